"""Uniform grids, complex sampled functions, and 6th-order cumulative integration.

Every coefficient function, particular solution and formal power in this
package lives on a shared uniform grid as a :class:`SampledFunction`.  The one
nontrivial operation is :func:`cumulative_integral`: an antiderivative table
built from the exact integrals of sliding degree-5 Lagrange interpolants, so
that each node-to-node increment carries the local O(h^7) accuracy of the
6-point Newton-Cotes family and the whole table is globally O(h^6).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np

from .errors import GridError, NodeValueError

#: subintervals covered by one 6-point stencil
_PANEL = 5

DIV_FLOOR_DEFAULT = 1e-300

# 80-bit extended accumulator where the platform provides one (x86 Linux does);
# harmlessly the same as complex128 elsewhere
_ACCUM_DTYPE = np.clongdouble if np.finfo(np.longdouble).eps < 1e-18 else np.complex128


def _poly_mul_linear(coeffs: list[Fraction], root: int) -> list[Fraction]:
    """Multiply polynomial (low-to-high coeffs) by (t - root), exactly."""
    out = [Fraction(0)] * (len(coeffs) + 1)
    for i, c in enumerate(coeffs):
        out[i] -= c * root
        out[i + 1] += c
    return out


def _poly_integral_between(coeffs: list[Fraction], lo: int, hi: int) -> Fraction:
    total = Fraction(0)
    for i, c in enumerate(coeffs):
        total += c * (Fraction(hi) ** (i + 1) - Fraction(lo) ** (i + 1)) / (i + 1)
    return total


def _subinterval_weights() -> np.ndarray:
    """W[k, j] = integral over [k, k+1] of the j-th Lagrange basis on nodes 0..5."""
    W = np.empty((_PANEL, 6))
    for j in range(6):
        num = [Fraction(1)]
        den = Fraction(1)
        for m in range(6):
            if m == j:
                continue
            num = _poly_mul_linear(num, m)
            den *= j - m
        for k in range(_PANEL):
            W[k, j] = float(_poly_integral_between(num, k, k + 1) / den)
    return W


_W = _subinterval_weights()


@lru_cache(maxsize=None)
def _fd_weights(offsets: tuple[int, ...]) -> np.ndarray:
    """Exact first-derivative weights for unit-spaced nodes at given offsets.

    Solves the Vandermonde moment system in rational arithmetic; the result is
    exact for polynomials of degree < len(offsets).
    """
    n = len(offsets)
    M = [[Fraction(o) ** m for o in offsets] for m in range(n)]
    rhs = [Fraction(0)] * n
    rhs[1] = Fraction(1)
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        rhs[col], rhs[piv] = rhs[piv], rhs[col]
        inv = Fraction(1) / M[col][col]
        M[col] = [v * inv for v in M[col]]
        rhs[col] *= inv
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * bb for a, bb in zip(M[r], M[col])]
                rhs[r] -= f * rhs[col]
    return np.array([float(v) for v in rhs])


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [a, b] whose n_nodes - 1 subintervals tile into 6-point panels."""

    a: float
    b: float
    n_nodes: int

    def __post_init__(self):
        if not (self.a < self.b):
            raise GridError(f"need a < b, got [{self.a}, {self.b}]")
        if self.n_nodes < 6:
            raise GridError(f"need at least 6 nodes, got {self.n_nodes}")
        if (self.n_nodes - 1) % _PANEL != 0:
            raise GridError(
                f"n_nodes - 1 must be a multiple of {_PANEL}, got n_nodes={self.n_nodes}"
            )

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n_nodes - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.linspace(self.a, self.b, self.n_nodes)
        x.flags.writeable = False
        return x

    def index_of(self, x: float, tol: float = 1e-9) -> int:
        """Index of the grid node at x; raises if x is not (nearly) a node."""
        i = round((x - self.a) / self.h)
        if not 0 <= i < self.n_nodes or abs(self.a + i * self.h - x) > tol * max(1.0, abs(x)):
            raise GridError(f"{x} is not a node of the grid [{self.a}, {self.b}]")
        return int(i)


@dataclass(frozen=True)
class SampledFunction:
    """Complex values tabulated on a uniform grid; immutable after construction."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != (self.grid.n_nodes,):
            raise GridError(
                f"values length {v.shape} does not match grid with {self.grid.n_nodes} nodes"
            )
        bad = ~np.isfinite(v)
        if bad.any():
            raise NodeValueError("non-finite sample value", int(np.flatnonzero(bad)[0]))
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    # -- nodewise arithmetic -------------------------------------------------
    def _check_same_grid(self, other: "SampledFunction"):
        if other.grid != self.grid:
            raise GridError("operands live on different grids")

    def __add__(self, other):
        if isinstance(other, SampledFunction):
            self._check_same_grid(other)
            return SampledFunction(self.grid, self.values + other.values)
        return SampledFunction(self.grid, self.values + complex(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SampledFunction):
            self._check_same_grid(other)
            return SampledFunction(self.grid, self.values - other.values)
        return SampledFunction(self.grid, self.values - complex(other))

    def __rsub__(self, other):
        return SampledFunction(self.grid, complex(other) - self.values)

    def __mul__(self, other):
        if isinstance(other, SampledFunction):
            self._check_same_grid(other)
            return SampledFunction(self.grid, self.values * other.values)
        return SampledFunction(self.grid, self.values * complex(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, SampledFunction):
            self._check_same_grid(other)
            _check_divisor(other.values)
            return SampledFunction(self.grid, self.values / other.values)
        return SampledFunction(self.grid, self.values / complex(other))

    def __rtruediv__(self, other):
        _check_divisor(self.values)
        return SampledFunction(self.grid, complex(other) / self.values)

    def __neg__(self):
        return SampledFunction(self.grid, -self.values)

    def conj(self) -> "SampledFunction":
        return SampledFunction(self.grid, np.conj(self.values))

    def abs_max(self) -> float:
        return float(np.max(np.abs(self.values)))

    def abs_min(self) -> float:
        return float(np.min(np.abs(self.values)))


def _check_divisor(values: np.ndarray, floor: float = DIV_FLOOR_DEFAULT):
    mags = np.abs(values)
    if mags.min() < floor:
        raise NodeValueError(
            f"division by value of modulus below {floor}", int(np.argmin(mags))
        )


def sample(grid: Grid, fn) -> SampledFunction:
    """Tabulate a callable on the grid nodes (evaluated with complex inputs)."""
    return SampledFunction(grid, np.asarray(fn(grid.nodes.astype(np.complex128))))


def constant(grid: Grid, value: complex) -> SampledFunction:
    return SampledFunction(grid, np.full(grid.n_nodes, complex(value)))


def pointwise_combine(f: SampledFunction, g, op: str,
                      div_floor: float = DIV_FLOOR_DEFAULT) -> SampledFunction:
    """Nodewise arithmetic on sampled functions.

    op is one of "add", "mul", "div", "scale"; for "scale", g is a complex
    scalar.  Division checks every divisor node against div_floor and reports
    the offending node index.
    """
    if op == "scale":
        return SampledFunction(f.grid, f.values * complex(g))
    if not isinstance(g, SampledFunction):
        raise GridError(f"op {op!r} needs two sampled functions")
    f._check_same_grid(g)
    if op == "add":
        return SampledFunction(f.grid, f.values + g.values)
    if op == "mul":
        return SampledFunction(f.grid, f.values * g.values)
    if op == "div":
        _check_divisor(g.values, div_floor)
        return SampledFunction(f.grid, f.values / g.values)
    raise ValueError(f"unknown op {op!r}")


def _cumulative_values(h: float, v: np.ndarray) -> np.ndarray:
    """Raw-array core of cumulative_integral (no validation, no wrapping)."""
    n = v.shape[0]
    inc = np.empty(n - 1, dtype=np.complex128)
    # interior subintervals i = 2 .. n-4 use the centered stencil s = i-2;
    # explicit slice products beat correlate() on short kernels
    core = inc[2:n - 3]
    np.multiply(v[2:n - 3], _W[2, 2], out=core)
    for j in (0, 1, 3, 4, 5):
        core += _W[2, j] * v[j:j + n - 5]
    # clamped stencils near the ends
    for i in (0, 1):
        inc[i] = _W[i] @ v[0:6]
    for i in (n - 3, n - 2):
        inc[i] = _W[i - (n - 6)] @ v[n - 6:n]
    inc *= h
    # prefix-sum in extended precision: sequential rounding across ~1e5 nodes
    # otherwise dominates the error budget of the recursive-integral stacks
    F = np.empty(n, dtype=np.complex128)
    F[0] = 0.0
    F[1:] = np.cumsum(inc.astype(_ACCUM_DTYPE))
    return F


def cumulative_integral(f: SampledFunction) -> SampledFunction:
    """Antiderivative table F with F(node 0) = 0.

    Each node-to-node increment is the exact integral of the degree-5 Lagrange
    interpolant through the 6-point stencil nearest to (and containing) that
    subinterval, with stencils clamped at the boundaries.
    """
    return SampledFunction(f.grid, _cumulative_values(f.grid.h, f.values))


def integral_from(f: SampledFunction, anchor_index: int) -> SampledFunction:
    """Antiderivative vanishing at the given node instead of node 0."""
    F = cumulative_integral(f)
    if anchor_index == 0:
        return F
    return SampledFunction(f.grid, F.values - F.values[anchor_index])


def derivative(f: SampledFunction) -> SampledFunction:
    """First derivative by 7-point finite differences (6 points on tiny grids).

    Interior stencils are centered (error O(h^6)); boundary stencils are
    one-sided with the same width.
    """
    g = f.grid
    n = g.n_nodes
    width = min(7, n)
    half = (width - 1) // 2
    v = f.values
    out = np.empty(n, dtype=np.complex128)
    kernels = [_fd_weights(tuple(range(-k, width - k))) for k in range(width)]
    # interior nodes use the centered kernel via convolution
    centered = kernels[half]
    if n >= width:
        out[half:n - (width - 1 - half)] = np.convolve(v, centered[::-1], mode="valid")
    for i in range(half):
        out[i] = kernels[i] @ v[0:width]
    for i in range(n - (width - 1 - half), n):
        k = i - (n - width)
        out[i] = kernels[k] @ v[n - width:n]
    out /= g.h
    return SampledFunction(g, out)
