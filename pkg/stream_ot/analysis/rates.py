"""
Rates and Complexity
====================

Theoretical convergence rates of online Sinkhorn and the complexity
exponents of the plain and compressed variants, as exact fractions when
the inputs are decimal numbers.
"""

from dataclasses import dataclass, replace
from fractions import Fraction
from numbers import Rational
from typing import Optional, Tuple, Union

from stream_ot.core.online_sinkhorn import validate_schedule
from stream_ot.errors import ConfigurationError

Number = Union[int, float, Fraction, str]

ZETA_LARGE = "zeta_large"
ZETA_SMALL = "zeta_small"


def as_fraction(x: Number) -> Fraction:
    """Exact rational for ints, Fractions and decimal strings; floats go through their shortest repr."""
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    value = float(x)
    if value != value or value in (float("inf"), float("-inf")):
        raise ConfigurationError(f"exponent inputs must be finite, got {x}")
    return Fraction(repr(value))


def format_fraction(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class RateReport:
    """
    Attributes:
        new_rate: -a / (2a + 1), the asymptotic rate in N
        old_rate: b / (2a + 1), the rate of the earlier analysis
        transient_exponent: (b + 1) / (2a + 1), exponent of the transient term
        fitted_slope: Empirical slope, when a trace was fitted
        fit_window: (N_min, N_max) of that fit
    """

    new_rate: Fraction
    old_rate: Fraction
    transient_exponent: Fraction
    fitted_slope: Optional[float] = None
    fit_window: Optional[Tuple[float, float]] = None

    def with_fit(self, slope: float, window: Tuple[float, float]) -> "RateReport":
        return replace(self, fitted_slope=float(slope), fit_window=(float(window[0]), float(window[1])))

    def line(self) -> str:
        """One-line machine-readable summary."""
        parts = [
            f"new_rate={float(self.new_rate):.6f}",
            f"old_rate={float(self.old_rate):.6f}",
            f"transient_exponent={float(self.transient_exponent):.6f}",
            f"new_rate_exact={format_fraction(self.new_rate)}",
            f"old_rate_exact={format_fraction(self.old_rate)}",
        ]
        if self.fitted_slope is not None:
            parts.append(f"fitted_slope={self.fitted_slope:.6f}")
        return " ".join(parts)


@dataclass(frozen=True)
class ComplexityReport:
    """
    Exponents k of O(delta^-k) operation counts to reach accuracy delta.

    Attributes:
        os_exponent: 4 + 2/a
        cos_exponent: Compressed exponent, branch given by `regime`
        ratio_exponent: os_exponent - cos_exponent; positive means compression wins
        regime: "zeta_large" when zeta >= (a - b)/a, else "zeta_small"
        break_even_zeta: 3(a - b)/(4a + 1)
    """

    os_exponent: Fraction
    cos_exponent: Fraction
    ratio_exponent: Fraction
    regime: str
    break_even_zeta: Fraction

    def line(self) -> str:
        return (
            f"os={format_fraction(self.os_exponent)} cos={format_fraction(self.cos_exponent)} "
            f"ratio={format_fraction(self.ratio_exponent)} regime={self.regime} "
            f"break_even_zeta={format_fraction(self.break_even_zeta)}"
        )


def theoretical_rates(a: Number, b: Number) -> RateReport:
    """
    Rates for the schedule eta_t = (t+1)^b, b_t = (t+1)^(2a).

    Args:
        a: Batch growth exponent
        b: Learning-rate exponent

    Returns:
        RateReport without a fitted slope
    """
    a, b = as_fraction(a), as_fraction(b)
    validate_schedule(float(a), float(b), 1.0)
    denom = 2 * a + 1
    return RateReport(new_rate=-a / denom, old_rate=b / denom, transient_exponent=(b + 1) / denom)


def cos_exponent_branches(a: Fraction, b: Fraction, zeta: Fraction) -> Tuple[Fraction, Fraction]:
    """Both branch formulas of the compressed exponent, (large-zeta, small-zeta)."""
    gap = (a - b) / (a * zeta)
    return 2 + gap + 1 / a, 3 * gap + 1 / a


def complexity_exponents(a: Number, b: Number, zeta: Number) -> ComplexityReport:
    """
    Complexity exponents of online and compressed online Sinkhorn.

    Args:
        a: Batch growth exponent
        b: Learning-rate exponent
        zeta: Compression regularity

    Returns:
        ComplexityReport
    """
    a, b, zeta = as_fraction(a), as_fraction(b), as_fraction(zeta)
    validate_schedule(float(a), float(b), 1.0, float(zeta))
    os_exp = 4 + 2 / a
    large, small = cos_exponent_branches(a, b, zeta)
    if zeta >= (a - b) / a:
        regime, cos_exp = ZETA_LARGE, large
    else:
        regime, cos_exp = ZETA_SMALL, small
    return ComplexityReport(
        os_exponent=os_exp,
        cos_exponent=cos_exp,
        ratio_exponent=os_exp - cos_exp,
        regime=regime,
        break_even_zeta=3 * (a - b) / (4 * a + 1),
    )
