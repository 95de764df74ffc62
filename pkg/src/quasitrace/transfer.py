"""Unimodular transfer-matrix products over the golden-rotation potential.

Products over sites 1..n (right half-line) and n+1..0 (left half-line,
inverse factors), their traces at Fibonacci lengths, energy derivatives by
forward-mode dual numbers, windowed squared-norm sums, and the pointwise
norm/derivative inequality.

All products carry a power-of-two exponent so sweeps stay valid where the
entries grow past float64 range (doubly exponential growth off the spectrum).
Rescaling by powers of two is exact, so the extended representation changes
nothing but the dynamic range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .phase import PhasePoint
from .words import fib_number, rotation_block
from .xfloat import XReal

__all__ = [
    "TransferMatrix",
    "DualScalar",
    "TraceSample",
    "TraceParityReport",
    "TraceParityError",
    "MarginViolationError",
    "local_matrix",
    "transfer_product",
    "trace_right",
    "trace_left",
    "traces_right_upto",
    "traces_left_upto",
    "trace_sequence_recursive",
    "trace_derivative",
    "dual_traces_upto",
    "cumulative_norm",
    "norm_profile",
    "norm_trace_inequality",
    "phase_trace_parity",
]

_RENORM = 2.0**256  # keep entry squares finite in norm computations
_frexp = math.frexp
_ldexp = math.ldexp

TRACE_EQUALITY_TOL = 1e-9  # relative to max(1, |reference|); products differ only by rounding
MARGIN_TOL = 1e-8


class TraceParityError(AssertionError):
    """No parity class of levels satisfies the trace equality (implementation bug)."""


class MarginViolationError(AssertionError):
    """The norm/derivative inequality failed beyond rounding (implementation bug)."""


# ----------------------------------------------------------------------------
# internal representation: (a, b, c, d, e) meaning 2**e * [[a, b], [c, d]]
# ----------------------------------------------------------------------------

_IDENT = (1.0, 0.0, 0.0, 1.0, 0)


def _mul(m1, m2):
    a1, b1, c1, d1, e1 = m1
    a2, b2, c2, d2, e2 = m2
    a = a1 * a2 + b1 * c2
    b = a1 * b2 + b1 * d2
    c = c1 * a2 + d1 * c2
    d = c1 * b2 + d1 * d2
    mx = max(abs(a), abs(b), abs(c), abs(d))
    if mx > _RENORM:
        ex = _frexp(mx)[1]
        s = _ldexp(1.0, -ex)
        return (a * s, b * s, c * s, d * s, e1 + e2 + ex)
    return (a, b, c, d, e1 + e2)


def _add(m1, m2):
    a1, b1, c1, d1, e1 = m1
    a2, b2, c2, d2, e2 = m2
    if e1 < e2:
        a1, b1, c1, d1, e1, a2, b2, c2, d2, e2 = a2, b2, c2, d2, e2, a1, b1, c1, d1, e1
    shift = e2 - e1
    if shift < -1080:
        return (a1, b1, c1, d1, e1)
    s = _ldexp(1.0, shift)
    a = a1 + a2 * s
    b = b1 + b2 * s
    c = c1 + c2 * s
    d = d1 + d2 * s
    mx = max(abs(a), abs(b), abs(c), abs(d))
    if mx > _RENORM:
        ex = _frexp(mx)[1]
        sc = _ldexp(1.0, -ex)
        return (a * sc, b * sc, c * sc, d * sc, e1 + ex)
    return (a, b, c, d, e1)


def _trace(m) -> XReal:
    return XReal(m[0] + m[3], m[4])


def _det(m) -> XReal:
    return XReal(m[0] * m[3] - m[1] * m[2], 2 * m[4])


def _norm_sq(m) -> XReal:
    """Squared spectral norm, closed form from tr(A^T A) and det(A).

    The copy is rescaled so the largest entry sits in [0.5, 1); squares then
    stay comfortably inside float range regardless of the carried exponent.
    """
    a, b, c, d, e = m
    mx = max(abs(a), abs(b), abs(c), abs(d))
    if mx == 0.0:
        return XReal()
    ex = _frexp(mx)[1]
    s = _ldexp(1.0, -ex)
    a *= s
    b *= s
    c *= s
    d *= s
    t = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = t * t - 4.0 * det * det
    if disc < 0.0:
        disc = 0.0
    return XReal(0.5 * (t + math.sqrt(disc)), 2 * (e + ex))


@lru_cache(maxsize=1024)
def _potential_pattern(theta: PhasePoint, lo: int, hi: int) -> str:
    return rotation_block(lo, hi, theta).to01()


# ----------------------------------------------------------------------------
# public matrix type
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class TransferMatrix:
    """2x2 real matrix with a power-of-two scale: 2**exp2 * [[a11, a12], [a21, a22]]."""

    a11: float
    a12: float
    a21: float
    a22: float
    exp2: int = 0

    def _tuple(self):
        return (self.a11, self.a12, self.a21, self.a22, self.exp2)

    @classmethod
    def _from_tuple(cls, m) -> "TransferMatrix":
        return cls(m[0], m[1], m[2], m[3], m[4])

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        return TransferMatrix._from_tuple(_mul(self._tuple(), other._tuple()))

    def trace(self) -> XReal:
        return _trace(self._tuple())

    def det(self) -> XReal:
        return _det(self._tuple())

    def norm_sq(self) -> XReal:
        return _norm_sq(self._tuple())

    def entries(self) -> tuple[float, float, float, float]:
        """Plain-float entries; overflows to inf if the scale exceeds float range."""
        s = 2.0**self.exp2 if -1020 < self.exp2 < 1020 else math.inf
        return (self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)


@dataclass(frozen=True)
class DualScalar:
    """A value and its energy derivative, propagated jointly."""

    value: XReal
    deriv: XReal

    @property
    def value_float(self) -> float:
        return float(self.value)

    @property
    def deriv_float(self) -> float:
        return float(self.deriv)


@dataclass(frozen=True)
class TraceSample:
    """One (level, energy, coupling, phase) trace record."""

    k: int
    E: float
    lam: float
    theta: PhasePoint
    x: XReal
    dx: XReal


# ----------------------------------------------------------------------------
# products and traces
# ----------------------------------------------------------------------------

def local_matrix(m: int, E: float, lam: float, theta: PhasePoint) -> TransferMatrix:
    """One-site propagation matrix [[E - V(m), -1], [1, 0]]."""
    v = _potential_pattern(theta, m, m)
    a = E - lam if v == "1" else E
    return TransferMatrix(a, -1.0, 1.0, 0.0, 0)


def transfer_product(n: int, E: float, lam: float, theta: PhasePoint) -> TransferMatrix:
    """Ordered product over sites 1..n (n >= 1) or inverse factors over n+1..0 (n <= -1)."""
    if n == 0:
        raise ValueError("site count must be nonzero")
    if n >= 1:
        pattern = _potential_pattern(theta, 1, n)
        acc = _IDENT
        for ch in pattern:
            t11 = E - lam if ch == "1" else E
            acc = _mul((t11, -1.0, 1.0, 0.0, 0), acc)
        return TransferMatrix._from_tuple(acc)
    # n <= -1: inv([[a, -1], [1, 0]]) = [[0, 1], [-1, a]], composed left to right
    pattern = _potential_pattern(theta, n + 1, 0)
    acc = _IDENT
    for ch in pattern:
        t11 = E - lam if ch == "1" else E
        acc = _mul(acc, (0.0, 1.0, -1.0, t11, 0))
    return TransferMatrix._from_tuple(acc)


def traces_right_upto(k_max: int, E: float, lam: float, theta: PhasePoint) -> list[XReal]:
    """Traces of the right-half-line products at lengths F(0..k_max), one pass."""
    marks = [fib_number(k) for k in range(k_max + 1)]
    pattern = _potential_pattern(theta, 1, marks[-1])
    out: list[XReal] = []
    acc = _IDENT
    next_mark = 0
    for n, ch in enumerate(pattern, start=1):
        t11 = E - lam if ch == "1" else E
        acc = _mul((t11, -1.0, 1.0, 0.0, 0), acc)
        while next_mark <= k_max and marks[next_mark] == n:
            out.append(_trace(acc))
            next_mark += 1
    return out


def traces_left_upto(k_max: int, E: float, lam: float, theta: PhasePoint) -> list[XReal]:
    """Traces of the left-half-line products at lengths F(0..k_max), one pass.

    Uses tr(A**-1) = tr(A) for det-1 matrices: the trace over inverse factors
    down to site -F(k)+1 equals the trace of T(0) T(-1) ... T(-F(k)+1).
    """
    marks = [fib_number(k) for k in range(k_max + 1)]
    f_top = marks[-1]
    pattern = _potential_pattern(theta, -f_top + 1, 0)  # sites ascending
    out: list[XReal] = []
    acc = _IDENT
    next_mark = 0
    for n in range(f_top):
        ch = pattern[f_top - 1 - n]  # site 0, -1, -2, ...
        t11 = E - lam if ch == "1" else E
        acc = _mul(acc, (t11, -1.0, 1.0, 0.0, 0))
        while next_mark <= k_max and marks[next_mark] == n + 1:
            out.append(_trace(acc))
            next_mark += 1
    return out


def trace_right(k: int, E: float, lam: float, theta: PhasePoint) -> XReal:
    """Trace of the product over sites 1..F(k)."""
    return traces_right_upto(k, E, lam, theta)[k]


def trace_left(k: int, E: float, lam: float, theta: PhasePoint) -> XReal:
    """Trace of the inverse-factor product over sites -F(k)+1..0."""
    return traces_left_upto(k, E, lam, theta)[k]


def trace_sequence_recursive(k_max: int, E: float, lam: float) -> list[XReal]:
    """Phase-zero traces by the three-term recursion x(k+1) = x(k)x(k-1) - x(k-2).

    Seeds are taken from direct products; the recursion is a Cayley-Hamilton
    consequence of the two-block concatenation of level words.  Costs O(k_max)
    scalar operations instead of O(F(k_max)) matrix products.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    seeds = traces_right_upto(min(k_max, 2), E, lam, PhasePoint.zero())
    xs = list(seeds)
    for _ in range(3, k_max + 2):
        if len(xs) >= 3:
            xs.append(xs[-1] * xs[-2] - xs[-3])
    return xs[: k_max + 1]


# ----------------------------------------------------------------------------
# dual-number (value, d/dE) propagation
# ----------------------------------------------------------------------------

def _dual_pass(pattern: str, E: float, lam: float):
    """Yield (n, M, D) after each right-side factor; D = dM/dE."""
    m = _IDENT
    d = (0.0, 0.0, 0.0, 0.0, 0)
    n = 0
    for ch in pattern:
        t11 = E - lam if ch == "1" else E
        t = (t11, -1.0, 1.0, 0.0, 0)
        # dT = [[1,0],[0,0]]: dT @ m is row one of m over zeros
        dt_m = (m[0], m[1], 0.0, 0.0, m[4])
        d = _add(dt_m, _mul(t, d))
        m = _mul(t, m)
        n += 1
        yield n, m, d


def dual_traces_upto(k_max: int, E: float, lam: float, theta: PhasePoint) -> list[DualScalar]:
    """Right-half-line traces and their energy derivatives at Fibonacci lengths."""
    marks = [fib_number(k) for k in range(k_max + 1)]
    pattern = _potential_pattern(theta, 1, marks[-1])
    out: list[DualScalar] = []
    next_mark = 0
    for n, m, d in _dual_pass(pattern, E, lam):
        while next_mark <= k_max and marks[next_mark] == n:
            out.append(DualScalar(_trace(m), _trace(d)))
            next_mark += 1
    return out


def trace_derivative(k: int, E: float, lam: float, theta: PhasePoint) -> DualScalar:
    """(trace, d trace / dE) for the length-F(k) right-half-line product."""
    return dual_traces_upto(k, E, lam, theta)[k]


# ----------------------------------------------------------------------------
# windowed norms and the norm/derivative inequality
# ----------------------------------------------------------------------------

def norm_profile(l_values, E: float, lam: float, theta: PhasePoint) -> list[XReal]:
    """Windowed squared-norm sums at several window lengths, one pass.

    All entries of l_values must share a sign.  Positive windows sum
    ||M(1)||^2 .. ||M(floor(L))||^2 plus the fractional edge term; negative
    windows do the mirrored left-half-line sum over sites -1 .. -floor(|L|).
    Singular values of the inverse of a det-1 matrix coincide with those of
    the matrix itself, so the left side accumulates direct factors downward.
    """
    ls = list(l_values)
    if not ls:
        return []
    if all(l > 0 for l in ls):
        side = 1
    elif all(l < 0 for l in ls):
        side = -1
    else:
        raise ValueError("window lengths must be all positive or all negative")
    mags = sorted(set(abs(l) for l in ls))
    top = math.floor(mags[-1]) + 1
    if side > 0:
        pattern = _potential_pattern(theta, 1, top)
    else:
        pattern = _potential_pattern(theta, -top + 1, 0)[::-1]  # site 0, -1, ...
    norms: list[XReal] = []  # ||M(+-n)||^2 for n = 1..top
    acc = _IDENT
    for ch in pattern:
        t11 = E - lam if ch == "1" else E
        t = (t11, -1.0, 1.0, 0.0, 0)
        acc = _mul(t, acc) if side > 0 else _mul(acc, t)
        norms.append(_norm_sq(acc))
    prefix: list[XReal] = [XReal()]
    for v in norms:
        prefix.append(prefix[-1] + v)
    result: dict[float, XReal] = {}
    for l in mags:
        fl = math.floor(l)
        total = prefix[fl]
        if l > fl:
            total = total + (l - fl) * norms[fl]
        result[l] = total
    return [result[abs(l)] for l in ls]


def cumulative_norm(L: float, E: float, lam: float, theta: PhasePoint) -> XReal:
    """Windowed squared-norm sum at window length L (sign selects the half-line)."""
    if L == 0:
        return XReal()
    return norm_profile([L], E, lam, theta)[0]


def norm_trace_inequality(k: int, E: float, lam: float, theta: PhasePoint) -> XReal:
    """Margin 4 * (||M||^2_{F(k)})^{3/2} - |d trace/dE| at level k; must be >= 0.

    The cubed windowed norm means the 3/2 power of the squared-norm sum,
    matching the squared object the window is defined on.  A margin below
    -1e-8 * scale falsifies the implementation and raises.
    """
    f_k = fib_number(k)
    pattern = _potential_pattern(theta, 1, f_k)
    total = XReal()
    dual = None
    for n, m, d in _dual_pass(pattern, E, lam):
        total = total + _norm_sq(m)
        if n == f_k:
            dual = _trace(d)
    lhs = 4.0 * total.pow_3_2()
    rhs = abs(dual)
    margin = lhs - rhs
    scale = lhs + rhs
    if margin < -MARGIN_TOL * scale:
        raise MarginViolationError(
            f"norm/derivative inequality violated at k={k}, E={E}, lam={lam}"
        )
    return margin


# ----------------------------------------------------------------------------
# phase invariance of traces
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceParityReport:
    """Which parity class of levels reproduces the phase-zero traces, per side."""

    theta: PhasePoint
    lam: float
    k_max: int
    x_even_ok: bool
    x_odd_ok: bool
    y_even_ok: bool
    y_odd_ok: bool
    per_k: tuple = ()  # (k, family 'x'|'y', max relative error over the grid)


def _max_rel_err(values: list[XReal], refs: list[XReal]) -> float:
    worst = 0.0
    for v, r in zip(values, refs):
        diff = abs(v - r)
        if diff.m == 0.0:
            continue
        scale = max(abs(r), XReal(1.0))
        err = 2.0 ** min(diff.log2() - scale.log2(), 64.0)
        if err > worst:
            worst = err
    return worst


def phase_trace_parity(theta: PhasePoint, lam: float, E_grid,
                       k_max: int) -> TraceParityReport:
    """Compare traces at phase theta against phase zero over an energy grid.

    For each level the maximal relative deviation over the grid is recorded;
    a level passes when it stays below TRACE_EQUALITY_TOL.  On each half-line
    all even levels or all odd levels must pass, else the run aborts.
    """
    energies = list(E_grid)
    if not energies:
        raise ValueError("energy grid must be nonempty")
    zero = PhasePoint.zero(theta.bits)
    refs = [traces_right_upto(k_max, E, lam, zero) for E in energies]
    xs = [traces_right_upto(k_max, E, lam, theta) for E in energies]
    ys = [traces_left_upto(k_max, E, lam, theta) for E in energies]
    per_k = []
    flags = {"x": {0: True, 1: True}, "y": {0: True, 1: True}}
    for fam, table in (("x", xs), ("y", ys)):
        for k in range(k_max + 1):
            err = _max_rel_err([row[k] for row in table], [row[k] for row in refs])
            per_k.append((k, fam, err))
            if err > TRACE_EQUALITY_TOL:
                flags[fam][k % 2] = False
    if not (flags["x"][0] or flags["x"][1]):
        raise TraceParityError(f"no parity class passes for right traces at theta={theta}")
    if not (flags["y"][0] or flags["y"][1]):
        raise TraceParityError(f"no parity class passes for left traces at theta={theta}")
    return TraceParityReport(
        theta, lam, k_max,
        flags["x"][0], flags["x"][1], flags["y"][0], flags["y"][1],
        tuple(per_k),
    )
