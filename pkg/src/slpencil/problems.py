"""Problem-level assembly: spectral shift, two-point characteristic series,
the damped-string front end, and the Dirac-system reduction.

A spectral shift re-centers the power series at lambda0 by transforming the
pencil coefficients; the series variable becomes Lambda = lambda - lambda0.
Characteristic series collect the boundary functional of the SPPS solutions as
Taylor coefficients, so eigenvalues become polynomial roots downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError, NodeValueError
from .grids import Grid, SampledFunction, constant, derivative
from .spps import (
    FormalPowerTable,
    ParticularSolution,
    PencilSpec,
    SolutionPair,
    build_formal_powers,
    build_particular_solution,
    tail_components,
)


@dataclass(frozen=True)
class ShiftedPencil:
    """Pencil re-centered at lambda0: L0 u = u * sum_k Lambda^k r_eff[k-1]."""

    base: PencilSpec
    lam0: complex
    q_eff: SampledFunction
    r_eff: tuple[SampledFunction, ...]

    @property
    def pencil(self) -> PencilSpec:
        return PencilSpec(p=self.base.p, q=self.q_eff, r=self.r_eff)


def shift_pencil(spec: PencilSpec, lam0: complex) -> ShiftedPencil:
    """Binomial re-centering of the polynomial right-hand side.

    r_eff[k] = sum_{l=0}^{N-k} C(k+l, l) lam0^l r_{k+l};
    q_eff = q - sum_k lam0^k r_k.
    """
    lam0 = complex(lam0)
    N = spec.degree
    q_eff = spec.q.values.copy()
    for k in range(1, N + 1):
        q_eff = q_eff - (lam0 ** k) * spec.r[k - 1].values
    r_eff = []
    for k in range(1, N + 1):
        acc = np.zeros(spec.grid.n_nodes, dtype=np.complex128)
        for ell in range(0, N - k + 1):
            acc += math.comb(k + ell, ell) * (lam0 ** ell) * spec.r[k + ell - 1].values
        r_eff.append(SampledFunction(spec.grid, acc))
    return ShiftedPencil(base=spec, lam0=lam0,
                         q_eff=SampledFunction(spec.grid, q_eff),
                         r_eff=tuple(r_eff))


@dataclass
class CharacteristicSeries:
    """Taylor coefficients of the characteristic function about ``center``.

    The eigenvalue condition is sum_k coeffs[k] (lambda - center)^k = 0.
    meta carries non-serialized build artifacts (the solution pair, scales).
    """

    center: complex
    coeffs: np.ndarray
    provenance: str
    meta: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 1 or c.size < 2:
            raise ValueError("need a 1-D coefficient array with M >= 1")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite characteristic coefficients")
        self.coeffs = c
        self.center = complex(self.center)

    @property
    def truncation(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, lam):
        """Horner evaluation; accepts scalars or arrays."""
        z = np.asarray(lam, dtype=np.complex128) - self.center
        acc = np.zeros_like(z)
        for c in self.coeffs[::-1]:
            acc = acc * z + c
        return acc if acc.shape else complex(acc)

    def deriv(self, lam):
        z = np.asarray(lam, dtype=np.complex128) - self.center
        acc = np.zeros_like(z)
        for k in range(len(self.coeffs) - 1, 0, -1):
            acc = acc * z + k * self.coeffs[k]
        return acc if acc.shape else complex(acc)

    def term_scale(self, lam) -> float:
        """max_k |coeffs[k] (lam-center)^k|, the cancellation-aware size of the sum."""
        z = abs(complex(lam) - self.center)
        powers = z ** np.arange(len(self.coeffs))
        return float(np.max(np.abs(self.coeffs) * powers))


@dataclass(frozen=True)
class StringProblem:
    """Damped string y'' = 2 a(x) lambda y + b(x) lambda^2 y on [0, L], y(0)=y(L)=0."""

    damping: SampledFunction
    density: SampledFunction

    def __post_init__(self):
        if self.density.grid != self.damping.grid:
            raise GridError("damping and density live on different grids")
        if self.damping.grid.a != 0.0:
            raise GridError("string problems start at x = 0")

    @property
    def grid(self) -> Grid:
        return self.damping.grid

    @property
    def pencil(self) -> PencilSpec:
        g = self.grid
        return PencilSpec(p=constant(g, 1.0), q=constant(g, 0.0),
                          r=(2.0 * self.damping, self.density))


@dataclass(frozen=True)
class DiracSpec:
    """Canonical one-dimensional Dirac system data: potential v and energy E."""

    v: SampledFunction
    energy: complex
    v_prime: SampledFunction | None = None

    def __post_init__(self):
        shifted = self.v.values - complex(self.energy)
        mags = np.abs(shifted)
        if mags.min() < 1e-300:
            raise NodeValueError("v - E vanishes", int(np.argmin(mags)))


def dirac_to_pencil(d: DiracSpec) -> PencilSpec:
    """Second-order pencil for w = y2 + y1:
    (w'/(v-E))' + (v-E) w = lambda^2 w/(v-E) + lambda (1/(v-E))' w.

    r1 uses the analytic identity (1/(v-E))' = -v'/(v-E)^2, with v' supplied
    or 6th-order finite-differenced.
    """
    g = d.v.grid
    vmE = SampledFunction(g, d.v.values - complex(d.energy))
    vp = d.v_prime if d.v_prime is not None else derivative(d.v)
    r1 = SampledFunction(g, -vp.values / (vmE.values ** 2))
    inv = SampledFunction(g, 1.0 / vmE.values)
    return PencilSpec(p=inv, q=vmE, r=(r1, inv))


def dirac_first_component(w: SampledFunction, w_prime: SampledFunction,
                          d: DiracSpec, lam: complex) -> SampledFunction:
    """Recover u = (lambda w + w') / (v - E) from the second-order solution."""
    vmE = d.v.values - complex(d.energy)
    return SampledFunction(w.grid, (complex(lam) * w.values + w_prime.values) / vmE)


# ---------------------------------------------------------------------------
# two-point boundary characteristic series


def _boundary_combination(u0: ParticularSolution, p: SampledFunction,
                          x0_index: int, left: tuple[complex, complex]
                          ) -> tuple[complex, complex]:
    """(c1, c2) killing alpha1 u(x0) + alpha2 (p u')(x0), canonically normalized."""
    a1, a2 = (complex(v) for v in left)
    if a1 == 0 and a2 == 0:
        raise ValueError("left boundary condition must not be identically zero")
    A = a1 * u0.u0.values[x0_index] + a2 * (p.values[x0_index]
                                            * u0.u0_prime.values[x0_index])
    B = a2 / u0.u0.values[x0_index]
    c1, c2 = B, -A
    top = max(abs(c1), abs(c2))
    if top == 0:
        raise ValueError("degenerate left boundary condition for this u0")
    # scale by the dominant entry so e.g. Dirichlet gives exactly (0, 1)
    lead = c1 if abs(c1) >= abs(c2) else c2
    return c1 / lead, c2 / lead


def two_point_series(table: FormalPowerTable, *,
                     left: tuple[complex, complex] = (1.0, 0.0),
                     right: tuple[complex, complex] = (1.0, 0.0),
                     center: complex = 0.0,
                     provenance: str = "custom-boundary") -> CharacteristicSeries:
    """Series whose zeros are eigenvalues of the separated boundary problem.

    The left condition alpha1 u + alpha2 (p u') = 0 at x0 fixes the solution
    combination; the coefficients collect beta1 u(b) + beta2 (p u')(b) per
    power of (lambda - center).  The table's anchor must be the left endpoint.
    """
    if table.x0_index != 0:
        raise GridError("two-point series expects the anchor at the left endpoint")
    b1, b2 = (complex(v) for v in right)
    pencil = table.pencil
    iend = table.end_index
    u0b = table.u0.u0.values[iend]
    pu0pb = pencil.p.values[iend] * table.u0.u0_prime.values[iend]
    c1, c2 = _boundary_combination(table.u0, pencil.p, table.x0_index, left)

    M = table.truncation
    coeffs = np.zeros(M + 1, dtype=np.complex128)
    for n in range(M + 1):
        xt_even = table.xtilde_end[2 * n]
        xt_odd_prev = table.xtilde_end[2 * n - 1] if n >= 1 else 0.0
        x_odd = table.x_end[2 * n + 1]
        x_even = table.x_end[2 * n]
        a_n = c1 * (b1 * u0b * xt_even + b2 * pu0pb * xt_even
                    + b2 * xt_odd_prev / u0b)
        a_n += c2 * (b1 * u0b * x_odd + b2 * pu0pb * x_odd + b2 * x_even / u0b)
        coeffs[n] = a_n
    return CharacteristicSeries(
        center=center, coeffs=coeffs, provenance=provenance,
        meta={"table": table, "combination": (c1, c2), "right": (b1, b2)},
    )


def two_point_tail(table: FormalPowerTable, lam_abs: float, *,
                   left: tuple[complex, complex] = (1.0, 0.0),
                   right: tuple[complex, complex] = (1.0, 0.0)) -> float:
    """Rigorous bound for the truncation tail of the two-point series.

    lam_abs bounds |lambda - center| on the region of interest.
    """
    pencil = table.pencil
    comps = tail_components(pencil, table.u0, lam_abs, table.truncation)
    iend = table.end_index
    u0b = abs(table.u0.u0.values[iend])
    pu0pb = abs(pencil.p.values[iend] * table.u0.u0_prime.values[iend])
    b1, b2 = (abs(complex(v)) for v in right)
    c1, c2 = (abs(v) for v in
              _boundary_combination(table.u0, pencil.p, table.x0_index, left))
    bound = c1 * ((b1 * u0b + b2 * pu0pb) * comps.even
                  + b2 * comps.lagged_xtilde / u0b)
    bound += c2 * ((b1 * u0b + b2 * pu0pb) * comps.odd_x + b2 * comps.even / u0b)
    return bound


# ---------------------------------------------------------------------------
# damped string
STRING_DEFAULT_TRUNCATION = 100


def string_u0(sp: StringProblem, lam0: complex = 0.0, *,
              chain_from: SolutionPair | None = None,
              truncation: int = 100) -> ParticularSolution:
    """u0 for the (possibly shifted) string pencil; u0 = 1 when lam0 = 0."""
    from .spps import chain_particular_solution

    g = sp.grid
    if lam0 == 0:
        return ParticularSolution(constant(g, 1.0), constant(g, 0.0),
                                  "closed-form", 0.0, 1.0)
    shifted = shift_pencil(sp.pencil, lam0)
    if chain_from is not None:
        return chain_particular_solution(chain_from, lam0, shifted.base.p,
                                         shifted.q_eff)
    return build_particular_solution(shifted.base.p, shifted.q_eff,
                                     truncation=truncation)


def string_characteristic(sp: StringProblem, x0: float = 0.0,
                          truncation: int = STRING_DEFAULT_TRUNCATION,
                          lam0: complex = 0.0, *,
                          u0: ParticularSolution | None = None,
                          store: str = "endpoint",
                          eval_points: tuple[complex, ...] = ()
                          ) -> CharacteristicSeries:
    """Dirichlet characteristic series of the damped string.

    At lam0 = 0 with u0 = 1 the coefficients reduce to X^(2n+1)(L).
    """
    if x0 != 0.0:
        raise GridError("the string boundary condition anchors the series at x0 = 0")
    lam0 = complex(lam0)
    pencil = sp.pencil if lam0 == 0 else shift_pencil(sp.pencil, lam0).pencil
    if u0 is None:
        u0 = string_u0(sp, lam0)
    table = build_formal_powers(pencil, u0, 0.0, truncation, store=store,
                                eval_points=eval_points)
    series = two_point_series(table, left=(1.0, 0.0), right=(1.0, 0.0),
                              center=lam0, provenance="string")
    return series


def string_tail(series: CharacteristicSeries, lam_abs: float) -> float:
    """Truncation-tail bound for a string characteristic series."""
    return two_point_tail(series.meta["table"], lam_abs)
