"""Real-valued special functions: complete elliptic integrals, Pochhammer
symbols and the Gauss hypergeometric function.

Elliptic integrals take the *parameter* m (K(m) = int_0^{pi/2} (1 - m sin^2)^{-1/2}),
not the modulus, so negative arguments are allowed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, SeriesError

__all__ = [
    "SeriesControl",
    "DEFAULT_SERIES",
    "elliptic_k",
    "elliptic_e",
    "pochhammer",
    "hyp2f1",
    "hyp2f1_re_gt1",
]

_AGM_MAXITER = 64
# above this argument the raw Gauss series is replaced by the 1 - x connection
_CONNECT_AT = 0.7


@dataclass(frozen=True)
class SeriesControl:
    """Truncation settings for every infinite series in the package.

    A series that has not met ``rel_tol`` after ``max_terms`` terms (per
    summation index) raises :class:`SeriesError` instead of returning a
    silently truncated value.
    """

    rel_tol: float = 1e-14
    max_terms: int = 5000

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-3):
            raise DomainError(f"rel_tol must lie in (0, 1e-3], got {self.rel_tol}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 8:
            raise DomainError(f"max_terms must be an integer >= 8, got {self.max_terms}")


DEFAULT_SERIES = SeriesControl()


def _agm(a, b):
    """Arithmetic-geometric mean iteration.

    Returns the limit and sum_{n>=1} 2^{n-1} c_n^2 with c_n = (a_{n-1} - b_{n-1})/2.
    """
    csum = 0.0
    weight = 1.0
    for _ in range(_AGM_MAXITER):
        if abs(a - b) <= 4e-16 * abs(a):
            return a, csum
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        csum += weight * c * c
        weight *= 2.0
    raise SeriesError("AGM iteration did not converge")  # pragma: no cover


def elliptic_k(m):
    """Complete elliptic integral of the first kind K(m), m < 1."""
    m = float(m)
    if not m < 1.0:
        raise DomainError(f"elliptic_k requires m < 1, got {m}")
    a, _ = _agm(1.0, math.sqrt(1.0 - m))
    return math.pi / (2.0 * a)


def elliptic_e(m):
    """Complete elliptic integral of the second kind E(m), m <= 1."""
    m = float(m)
    if m > 1.0:
        raise DomainError(f"elliptic_e requires m <= 1, got {m}")
    if m == 1.0:
        return 1.0
    # E = K (1 - sum_{n>=0} 2^{n-1} c_n^2) with c_0^2 = m; valid for m < 0 too
    a, csum = _agm(1.0, math.sqrt(1.0 - m))
    return math.pi / (2.0 * a) * (1.0 - 0.5 * m - csum)


def _is_pole(x):
    return x <= 0 and x == math.floor(x)


def _gamma_sign(x):
    if x > 0:
        return 1.0
    return -1.0 if math.floor(-x) % 2 == 0 else 1.0


def _gamma_ratio(num, den):
    """prod Gamma(num) / prod Gamma(den); zero if a denominator hits a pole."""
    if any(_is_pole(x) for x in den):
        return 0.0
    for x in num:
        if _is_pole(x):
            raise DomainError(f"Gamma pole at {x}")
    sign = 1.0
    logv = 0.0
    for x in num:
        sign *= _gamma_sign(x)
        logv += math.lgamma(x)
    for x in den:
        sign *= _gamma_sign(x)
        logv -= math.lgamma(x)
    return sign * math.exp(logv)


def pochhammer(a, n):
    """Rising factorial (a)_n = Gamma(a + n) / Gamma(a) for real a and n.

    Either Gamma hitting a pole is rejected, so e.g. (-2)_1 raises even though
    the polynomial limit exists.
    """
    a = float(a)
    n = float(n)
    if _is_pole(a) or _is_pole(a + n):
        raise DomainError(f"pochhammer({a}, {n}): Gamma pole")
    if n == 0.0:
        return 1.0
    if n.is_integer() and 0 < n <= 64:
        out = 1.0
        for k in range(int(n)):
            out *= a + k
        return out
    if 0 < a < 170 and 0 < a + n < 170:
        return math.gamma(a + n) / math.gamma(a)
    return _gamma_ratio([a + n], [a])


def _gauss_series(a, b, c, x, control):
    total = 1.0
    term = 1.0
    for n in range(control.max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * x
        total += term
        if term == 0.0:
            return total
        ratio = abs((a + n + 1) * (b + n + 1) / ((c + n + 1) * (n + 2.0)) * x)
        if ratio < 1.0 and abs(term) * ratio / (1.0 - ratio) <= control.rel_tol * abs(total):
            return total
    raise SeriesError(
        f"2F1({a}, {b}; {c}; {x}) series not converged after {control.max_terms} terms"
    )


def hyp2f1(a, b, c, x, control=DEFAULT_SERIES):
    """Gauss hypergeometric function 2F1(a, b; c; x) for 0 <= x <= 1.

    Above x = 0.7 the 1 - x connection formula is used unless c - a - b is an
    integer, in which case the direct series is summed (possibly slowly). At
    x = 1 Gauss's summation theorem is applied, which needs c - a - b > 0.
    """
    a, b, c, x = float(a), float(b), float(c), float(x)
    if _is_pole(c):
        raise DomainError(f"hyp2f1: c = {c} is a nonpositive integer")
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"hyp2f1: x = {x} outside [0, 1]")
    if x == 0.0 or a == 0.0 or b == 0.0:
        return 1.0
    s = c - a - b
    if x == 1.0:
        if s <= 0:
            raise DomainError(f"hyp2f1 diverges at x = 1 for c - a - b = {s}")
        return _gamma_ratio([c, s], [c - a, c - b])
    if x <= _CONNECT_AT or s.is_integer() or _is_pole(a) or _is_pole(b):
        return _gauss_series(a, b, c, x, control)
    y = 1.0 - x
    first = _gamma_ratio([c, s], [c - a, c - b])
    second = _gamma_ratio([c, -s], [a, b])
    out = 0.0
    if first != 0.0:
        out += first * _gauss_series(a, b, 1.0 - s, y, control)
    if second != 0.0:
        out += second * y**s * _gauss_series(c - a, c - b, 1.0 + s, y, control)
    return out


def _re_gt1_generic(a, b, c, x, control):
    y = 1.0 / x
    out = 0.0
    first = _gamma_ratio([c, b - a], [b, c - a])
    if first != 0.0:
        f1 = hyp2f1(a, a - c + 1.0, a - b + 1.0, y, control)
        out += first * x ** (-a) * math.cos(math.pi * a) * f1
    second = _gamma_ratio([c, a - b], [a, c - b])
    if second != 0.0:
        f2 = hyp2f1(b, b - c + 1.0, b - a + 1.0, y, control)
        out += second * x ** (-b) * math.cos(math.pi * b) * f2
    return out


def hyp2f1_re_gt1(a, b, c, x, control=DEFAULT_SERIES, degenerate_step=1e-3):
    """Real part of the principal-branch 2F1(a, b; c; x) for real x > 1.

    Uses the 1/x connection formula; on the cut both one-sided limits share
    the same real part, so (-x)^{-a} contributes x^{-a} cos(pi a).

    The routine is exercised for the family a = 1, c = b + 1/2 with b a
    half-integer, where b - a is never an integer. When b - a *is* an integer
    the connection coefficients have poles; the value is then taken as the
    limit in b, via a fourth-order Richardson combination of symmetric
    perturbations b +- h, b +- 2h with h = ``degenerate_step``. Expect
    roughly 1e-10 relative accuracy in that case.
    """
    a, b, c, x = float(a), float(b), float(c), float(x)
    if not x > 1.0:
        raise DomainError(f"hyp2f1_re_gt1 requires x > 1, got {x}")
    if _is_pole(c):
        raise DomainError(f"hyp2f1_re_gt1: c = {c} is a nonpositive integer")
    if not (b - a).is_integer():
        return _re_gt1_generic(a, b, c, x, control)
    h = degenerate_step

    def sym(step):
        return 0.5 * (
            _re_gt1_generic(a, b + step, c, x, control)
            + _re_gt1_generic(a, b - step, c, x, control)
        )

    return (4.0 * sym(h) - sym(2.0 * h)) / 3.0
