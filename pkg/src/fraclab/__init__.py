"""Monte-Carlo and spectral solvers for time-fractional evolution problems.

The package couples three independent computational routes and is designed
so that each can be checked against the others:

* stochastic path sampling for the probabilistic solution formulas
  (:mod:`fraclab.paths`, :mod:`fraclab.mc`),
* a spectral Mittag-Leffler solver on an interval (:mod:`fraclab.spectral`),
* direct fractional-operator residuals (:mod:`fraclab.fracops`).

``fraclab.checks`` bundles the cross-validation battery; the ``fraclab``
console script exposes it together with the solvers.
"""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = ["__version__"]
