import pytest

from core.errors import (
    ConfigurationError,
    CoverageError,
    DataError,
    InvalidInputError,
    NumericalError,
    PromptSimulationError,
    UrbanSAMError,
)


@pytest.mark.parametrize(
    "exc, code",
    [
        (ConfigurationError("bad size"), 2),
        (DataError("unreadable"), 3),
        (InvalidInputError("not binary"), 3),
        (CoverageError("gap", uncovered=[(0, 0)]), 3),
        (PromptSimulationError("stuck", best_overlap=40.0), 3),
        (NumericalError("nan"), 4),
    ],
)
def test_exit_codes(exc, code):
    assert isinstance(exc, UrbanSAMError)
    assert exc.exit_code == code


def test_value_error_compatibility():
    assert issubclass(ConfigurationError, ValueError)
    assert issubclass(InvalidInputError, ValueError)
    assert issubclass(NumericalError, ArithmeticError)


def test_errors_carry_details():
    coverage = CoverageError("2 cells", uncovered=[(1, 2), (3, 4)])
    assert coverage.uncovered == [(1, 2), (3, 4)]
    sim = PromptSimulationError("missed", best_overlap=61.5)
    assert sim.best_overlap == 61.5
    assert "missed" in str(sim)
