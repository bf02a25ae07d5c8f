"""
Tests for errors module.

This module contains the toolkit's exception hierarchy.
"""

import pytest

from src.errors import (
    ConfigError,
    DegenerateGroundSpace,
    InvalidArgument,
    LengthMismatch,
    LocqError,
    SizeMismatch,
    ZeroGap,
)


class TestErrorContext:
    """Test cases for structured error fields."""

    def test_config_error_fields(self):
        """Test that config errors carry path, key and detail."""
        error = ConfigError("cfg.json", "certification.delta", "must be < 1")
        assert error.context() == {
            "path": "cfg.json",
            "key": "certification.delta",
            "detail": "must be < 1",
        }
        assert "certification.delta" in str(error)

    def test_root_key_rendered(self):
        """Test that a missing key renders as <root>."""
        assert "<root>" in str(ConfigError("cfg.json", "", "invalid JSON"))

    def test_zero_gap_names_pair(self):
        """Test that pair-specific zero gaps mention the pair."""
        error = ZeroGap(0.0, pair=(2, 3))
        assert error.pair == (2, 3)
        assert "(2, 3)" in str(error)

    def test_degenerate_context_omits_states(self):
        """Test that degenerate-ground-space context stays JSON friendly."""
        error = DegenerateGroundSpace([-1.0, -1.0], ["a", "b"])
        assert error.context() == {"energies": [-1.0, -1.0], "degeneracy": 2}
        assert error.representatives is None


class TestHierarchy:
    """Test cases for the exception hierarchy."""

    @pytest.mark.parametrize(
        "error",
        [
            InvalidArgument("delta", 2.0, "must lie in (0, 1)"),
            SizeMismatch(4, 3),
            LengthMismatch(10, 9),
        ],
    )
    def test_value_errors(self, error):
        """Test that argument errors are both LocqError and ValueError."""
        assert isinstance(error, LocqError)
        assert isinstance(error, ValueError)

    def test_zero_gap_is_not_value_error(self):
        """Test that a vanishing gap is a toolkit error only."""
        assert not isinstance(ZeroGap(0.0), ValueError)
