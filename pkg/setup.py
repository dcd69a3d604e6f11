"""Build script for the optional compiled path-sampling core.

The package works without the extension (a NumPy fallback is selected at
import time), but the compiled kernels are what make large Monte-Carlo
budgets practical on a single core.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build without Cython ships no extension
    ext_modules = []
else:
    ext = Extension(
        "fraclab._pathkernels",
        ["src/fraclab/_pathkernels.pyx"],
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
