"""The error taxonomy keeps one catchable base and stdlib-compatible mixins."""

import pytest

from fraclab.errors import (
    CapabilityError,
    FracLabError,
    ParameterError,
    PathTruncationError,
    RangeError,
    ShapeError,
)


@pytest.mark.parametrize(
    "cls, mixin",
    [
        (ParameterError, ValueError),
        (RangeError, ValueError),
        (ShapeError, ValueError),
        (CapabilityError, NotImplementedError),
        (PathTruncationError, RuntimeError),
    ],
)
def test_hierarchy(cls, mixin):
    err = cls("boom") if cls is not PathTruncationError else cls("boom", partial=None)
    assert isinstance(err, FracLabError)
    assert isinstance(err, mixin)


def test_truncation_carries_partial_payload():
    payload = {"steps": 7}
    err = PathTruncationError("ran out", partial=payload)
    assert err.partial is payload
    assert "ran out" in str(err)


def test_truncation_partial_defaults_to_none():
    assert PathTruncationError("ran out").partial is None
