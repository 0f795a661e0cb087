"""Formal powers and power-series solutions for polynomial Sturm-Liouville pencils.

The pencil is (p u')' + q u = u * sum_k lambda^k r_k, k = 1..N.  Given a
non-vanishing particular solution u0 of the lambda = 0 equation, the general
solution is a power series in lambda whose coefficients (the "formal powers")
are recursively computed integrals anchored at a point x0.  This module builds
those tables, evaluates the two fundamental solutions u1, u2 and their
derivatives, constructs u0 when it is not supplied, and computes the rigorous
factorial-type majorant used to bound series-truncation tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError, NodeValueError, ParticularSolutionError
from .grids import (
    Grid,
    SampledFunction,
    _cumulative_values,
    constant,
    cumulative_integral,
    sample,
)

U0_FLOOR_RATIO = 1e-12


@dataclass(frozen=True)
class PencilSpec:
    """Coefficients of a degree-N pencil on one shared grid."""

    p: SampledFunction
    q: SampledFunction
    r: tuple[SampledFunction, ...]

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(self.r))
        if not self.r:
            raise GridError("a pencil needs at least one r coefficient")
        for f in (self.q, *self.r):
            if f.grid != self.p.grid:
                raise GridError("pencil coefficients live on different grids")

    @property
    def grid(self) -> Grid:
        return self.p.grid

    @property
    def degree(self) -> int:
        return len(self.r)


@dataclass(frozen=True)
class ParticularSolution:
    """Non-vanishing solution of the lambda = 0 pencil equation, with derivative.

    residual is the sup-norm of p*u0' - p*u0'(x0) + int(q*u0) relative to its
    natural scale, computed in integral form to avoid second differences.
    """

    u0: SampledFunction
    u0_prime: SampledFunction
    provenance: str  # "user-supplied" | "closed-form" | "spps-built"
    residual: float
    min_modulus_ratio: float

    @staticmethod
    def from_samples(u0: SampledFunction, u0_prime: SampledFunction,
                     p: SampledFunction, q: SampledFunction,
                     provenance: str = "user-supplied",
                     x0_index: int = 0,
                     floor_ratio: float = U0_FLOOR_RATIO) -> "ParticularSolution":
        ratio = _min_modulus_ratio(u0)
        if ratio < floor_ratio:
            i = int(np.argmin(np.abs(u0.values)))
            raise ParticularSolutionError(
                f"u0 modulus falls below {floor_ratio:g} of its maximum at node {i} "
                f"(x = {u0.grid.nodes[i]!r}); supply a different u0 or use a spectral shift"
            )
        res = _ode_residual(u0, u0_prime, p, q, x0_index)
        return ParticularSolution(u0, u0_prime, provenance, res, ratio)


def _min_modulus_ratio(f: SampledFunction) -> float:
    mags = np.abs(f.values)
    top = mags.max()
    return float(mags.min() / top) if top > 0 else 0.0


def _ode_residual(u0, u0_prime, p, q, x0_index: int) -> float:
    pu = p.values * u0_prime.values
    accum = cumulative_integral(SampledFunction(p.grid, q.values * u0.values)).values
    res = pu - pu[x0_index] + (accum - accum[x0_index])
    scale = max(np.max(np.abs(pu)), np.max(np.abs(accum)), 1e-30)
    return float(np.max(np.abs(res)) / scale)


@dataclass
class PowerSums:
    """Series sums at one fixed lambda, accumulated while the table is built.

    s_tilde_even = sum_n lam^n Xtilde^(2n)     s_tilde_odd = sum_n lam^n Xtilde^(2n+1)
    s_even       = sum_n lam^n X^(2n)          s_odd       = sum_n lam^n X^(2n+1)
    """

    lam: complex
    s_tilde_even: np.ndarray
    s_tilde_odd: np.ndarray
    s_even: np.ndarray
    s_odd: np.ndarray


@dataclass
class FormalPowerTable:
    """Formal powers of one pencil, anchored at x0, up to order 2M+1.

    In "full" storage mode xtilde[n] and x[n] hold whole-grid arrays; in
    "endpoint" mode only the boundary columns and any requested PowerSums are
    retained (the recursion window is discarded to bound memory).
    """

    pencil: PencilSpec
    u0: ParticularSolution
    x0: float
    x0_index: int
    truncation: int
    end_index: int
    xtilde_end: np.ndarray  # Xtilde^(n)(end), n = 0..2M+1
    x_end: np.ndarray       # X^(n)(end)
    xtilde_start: np.ndarray  # same columns at the grid's first node
    x_start: np.ndarray
    xtilde: list[np.ndarray] | None
    x: list[np.ndarray] | None
    sums: dict[complex, PowerSums] = field(default_factory=dict)

    @property
    def full(self) -> bool:
        return self.xtilde is not None


def _run_family(grid, i0: int, end: int, n_top: int, N: int, full: bool,
                r_on_odd: bool, weighted_r: list[np.ndarray],
                inv_u0sq_p: np.ndarray, eval_points: tuple[complex, ...]):
    """One recursion chain (the Xtilde family has r_on_odd=True, X has False).

    Returns (history-or-window, endpoint column, start column, series sums at
    the eval points split by parity).
    """
    n_nodes = grid.n_nodes
    h = grid.h
    one = np.ones(n_nodes, dtype=np.complex128)
    hist: list[np.ndarray] = [one]
    window = 2 * N
    col_end = np.empty(n_top + 1, dtype=np.complex128)
    col_start = np.empty(n_top + 1, dtype=np.complex128)
    col_end[0] = col_start[0] = 1.0
    even_sums = {complex(lam): one.copy() for lam in eval_points}
    odd_sums = {complex(lam): np.zeros(n_nodes, dtype=np.complex128)
                for lam in eval_points}
    lam_power = {complex(lam): 1.0 + 0.0j for lam in eval_points}
    acc = np.empty(n_nodes, dtype=np.complex128)

    for n in range(1, n_top + 1):
        r_turn = (n % 2 == 1) == r_on_odd
        if r_turn:
            acc[:] = 0.0
            for k in range(1, min(N, (n + 1) // 2) + 1):
                # reach back to entry n - 2k + 1 of the (possibly trimmed) history
                prev = hist[len(hist) - 2 * k + 1]
                acc += prev * weighted_r[k - 1]
            integrand = acc
        else:
            integrand = hist[-1] * inv_u0sq_p
        F = _cumulative_values(h, integrand)
        if i0 != 0:
            F -= F[i0]
        col_end[n] = F[end]
        col_start[n] = F[0]
        for lam in even_sums:
            if n % 2 == 0:
                lam_power[lam] *= lam
                even_sums[lam] += lam_power[lam] * F
            else:
                odd_sums[lam] += lam_power[lam] * F
        hist.append(F)
        if not full and len(hist) > window:
            del hist[0]
    return hist, col_end, col_start, even_sums, odd_sums


def build_formal_powers(spec: PencilSpec, u0: ParticularSolution, x0: float,
                        truncation: int, *, store: str = "full",
                        eval_points: tuple[complex, ...] = (),
                        end_index: int | None = None,
                        parallel: bool = True) -> FormalPowerTable:
    """Run the recursive-integral scheme up to index 2*truncation + 1.

    Odd Xtilde integrates u0^2 * sum_k Xtilde^(n-2k+1) r_k, even Xtilde
    integrates Xtilde^(n-1)/(u0^2 p); the X family swaps the parities.
    Negative indices contribute nothing, Xtilde^(0) = X^(0) = 1.  The two
    families are independent chains and run on separate threads by default.
    """
    if store not in ("full", "endpoint"):
        raise ValueError(f"unknown storage mode {store!r}")
    grid = spec.grid
    i0 = grid.index_of(x0)
    n_top = 2 * truncation + 1
    N = spec.degree

    u0sq = u0.u0.values * u0.u0.values
    denom = u0sq * spec.p.values
    mags = np.abs(denom)
    if mags.min() < 1e-300:
        raise NodeValueError("u0^2 * p vanishes", int(np.argmin(mags)))
    inv_u0sq_p = 1.0 / denom
    weighted_r = [u0sq * rk.values for rk in spec.r]
    end = grid.n_nodes - 1 if end_index is None else end_index
    full = store == "full"
    eval_points = tuple(complex(lam) for lam in eval_points)

    args = (grid, i0, end, n_top, N, full)
    tail = (weighted_r, inv_u0sq_p, eval_points)
    if parallel and grid.n_nodes >= 20000:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=2) as pool:
            fut = pool.submit(_run_family, *args, True, *tail)
            x_res = _run_family(*args, False, *tail)
            xt_res = fut.result()
    else:
        xt_res = _run_family(*args, True, *tail)
        x_res = _run_family(*args, False, *tail)

    xt_hist, xtilde_end, xtilde_start, st_even, st_odd = xt_res
    x_hist, x_end, x_start, s_even, s_odd = x_res
    sums = {lam: PowerSums(lam, st_even[lam], st_odd[lam],
                           s_even[lam], s_odd[lam]) for lam in eval_points}

    return FormalPowerTable(
        pencil=spec, u0=u0, x0=x0, x0_index=i0, truncation=truncation,
        end_index=end, xtilde_end=xtilde_end, x_end=x_end,
        xtilde_start=xtilde_start, x_start=x_start,
        xtilde=xt_hist if full else None,
        x=x_hist if full else None,
        sums=sums,
    )


@dataclass
class SolutionPair:
    """Evaluator for u1, u2 and their derivatives from a formal-power table."""

    table: FormalPowerTable
    _cache: dict = field(default_factory=dict, repr=False)

    def _series_sums(self, lam: complex) -> PowerSums:
        lam = complex(lam)
        hit = self.table.sums.get(lam)
        if hit is not None:
            return hit
        if not self.table.full:
            raise GridError(
                "table was built in endpoint mode; request this lambda via eval_points"
            )
        t = self.table
        M = t.truncation
        shape = t.pencil.grid.n_nodes
        ste = np.zeros(shape, dtype=np.complex128)
        sto = np.zeros(shape, dtype=np.complex128)
        se = np.zeros(shape, dtype=np.complex128)
        so = np.zeros(shape, dtype=np.complex128)
        for nn in range(M, -1, -1):  # Horner in lambda
            ste = ste * lam + t.xtilde[2 * nn]
            sto = sto * lam + t.xtilde[2 * nn + 1]
            se = se * lam + t.x[2 * nn]
            so = so * lam + t.x[2 * nn + 1]
        s = PowerSums(lam, ste, sto, se, so)
        self.table.sums[lam] = s
        return s

    def evaluate(self, lam: complex, c1: complex, c2: complex
                 ) -> tuple[SampledFunction, SampledFunction]:
        """u = c1 u1 + c2 u2 and its derivative at one lambda."""
        lam = complex(lam)
        key = (lam, complex(c1), complex(c2))
        if key in self._cache:
            return self._cache[key]
        s = self._series_sums(lam)
        t = self.table
        grid = t.pencil.grid
        u0 = t.u0.u0.values
        u0p = t.u0.u0_prime.values
        inv_u0p = 1.0 / (u0 * t.pencil.p.values)
        u1 = u0 * s.s_tilde_even
        u2 = u0 * s.s_odd
        u1_prime = u0p * s.s_tilde_even + inv_u0p * (lam * s.s_tilde_odd)
        u2_prime = u0p * s.s_odd + inv_u0p * s.s_even
        u = SampledFunction(grid, c1 * u1 + c2 * u2)
        up = SampledFunction(grid, c1 * u1_prime + c2 * u2_prime)
        self._cache[key] = (u, up)
        return u, up


def evaluate_solution(pair: SolutionPair, lam: complex, c1: complex, c2: complex
                      ) -> tuple[SampledFunction, SampledFunction]:
    """Functional form of SolutionPair.evaluate."""
    return pair.evaluate(lam, c1, c2)


def build_particular_solution(p: SampledFunction, q: SampledFunction, *,
                              x0: float | None = None, truncation: int = 100,
                              floor_ratio: float = U0_FLOOR_RATIO) -> ParticularSolution:
    """Construct a non-vanishing u0 for (p u')' + q u = 0.

    Rewrites the equation as (p v')' = lambda (-q) v, seeds the recursion with
    the trivial solution v = 1 of (p v')' = 0, evaluates at lambda = 1 and
    returns u1 + i u2.  For real p, q the two real solutions cannot vanish
    simultaneously; for complex coefficients the result is checked numerically.
    """
    grid = p.grid
    if x0 is None:
        x0 = grid.a
    seed = ParticularSolution(
        u0=constant(grid, 1.0), u0_prime=constant(grid, 0.0),
        provenance="closed-form", residual=0.0, min_modulus_ratio=1.0,
    )
    aux = PencilSpec(p=p, q=constant(grid, 0.0), r=(-q,))
    table = build_formal_powers(aux, seed, x0, truncation,
                                store="endpoint", eval_points=(1.0 + 0.0j,))
    pair = SolutionPair(table)
    u1, u1p = pair.evaluate(1.0, 1.0, 0.0)
    u2, u2p = pair.evaluate(1.0, 0.0, 1.0)
    u0 = SampledFunction(grid, u1.values + 1j * u2.values)
    u0_prime = SampledFunction(grid, u1p.values + 1j * u2p.values)
    return ParticularSolution.from_samples(
        u0, u0_prime, p, q, provenance="spps-built",
        x0_index=grid.index_of(x0), floor_ratio=floor_ratio,
    )


def chain_particular_solution(pair: SolutionPair, lam: complex,
                              p: SampledFunction, q_eff: SampledFunction, *,
                              floor_ratio: float = U0_FLOOR_RATIO) -> ParticularSolution:
    """Particular solution at a new series center, evaluated from an earlier pair.

    Tries the combinations u1 + i u2, u1 - i u2 and u1 and keeps the one whose
    minimum modulus (relative to its maximum) is largest; q_eff must be the
    effective potential of the pencil shifted to the new center so the stored
    residual refers to the right equation.
    """
    candidates = [(1.0, 1.0j), (1.0, -1.0j), (1.0, 0.0)]
    best = None
    best_ratio = -1.0
    for c1, c2 in candidates:
        u, up = pair.evaluate(lam, c1, c2)
        ratio = _min_modulus_ratio(u)
        if ratio > best_ratio:
            best_ratio = ratio
            best = (u, up)
    if best_ratio < floor_ratio:
        raise ParticularSolutionError(
            f"no non-vanishing combination found at center {lam}; "
            f"best modulus ratio {best_ratio:.3e}"
        )
    u, up = best
    return ParticularSolution.from_samples(
        u, up, p, q_eff, provenance="spps-built",
        x0_index=pair.table.x0_index, floor_ratio=floor_ratio,
    )


# ---------------------------------------------------------------------------
# truncation-tail majorant


def majorant_scale(spec: PencilSpec, u0: ParticularSolution) -> float:
    """Grid maximum of |u0^2 r_k| over all k and of |1/(u0^2 p)|."""
    u0sq = u0.u0.values * u0.u0.values
    m = float(np.max(np.abs(1.0 / (u0sq * spec.p.values))))
    for rk in spec.r:
        m = max(m, float(np.max(np.abs(u0sq * rk.values))))
    return m


def tail_series(m_hat: float, truncation: int, degree: int, *,
                rel_cutoff: float = 1e-18, max_terms: int = 200000) -> float:
    """sum_{n > truncation} m_hat^n / (2*floor(n/degree))!, or inf on overflow.

    The terms eventually decay factorially, so the sum is finite whenever the
    floating-point terms do not overflow along the way.
    """
    if m_hat == 0.0:
        return 0.0
    if not np.isfinite(m_hat):
        return math.inf
    n = truncation + 1
    q = n // degree
    log_term = n * math.log(m_hat) - math.lgamma(2 * q + 1)
    if log_term > 700.0:
        return math.inf
    term = math.exp(log_term)
    total = 0.0
    for _ in range(max_terms):
        total += term
        n += 1
        term *= m_hat
        if n % degree == 0:
            q = n // degree
            term /= (2 * q) * (2 * q - 1)
        if not np.isfinite(term) or not np.isfinite(total):
            return math.inf
        if term < rel_cutoff * total:
            return total + term
    return math.inf


def tail_bound(spec: PencilSpec, u0: ParticularSolution, lam_abs: float,
               truncation: int) -> float:
    """Rigorous sup-norm bound for the tail of sum lam^n Xtilde^(2n) past order M.

    Also valid for the X family: both even-index sequences satisfy the same
    factorial majorant with m_hat = |lambda| ((m (b-a))^2 + 1).
    """
    m = majorant_scale(spec, u0)
    length = spec.grid.b - spec.grid.a
    m_hat = lam_abs * ((m * length) ** 2 + 1.0)
    return tail_series(m_hat, truncation, spec.degree)


@dataclass(frozen=True)
class TailComponents:
    """Tail bounds for the individual formal-power families past order M.

    even covers sum_{n>M} |lam^n| sup|X^(2n)| (tilde or not); odd_x covers the
    X^(2n+1) family, odd_xtilde the Xtilde^(2n+1) family, and the lagged pair
    covers the index-(2n-1) sums that dispersion formulas use.
    """

    even: float
    odd_x: float
    odd_xtilde: float
    lagged_x: float
    lagged_xtilde: float


def tail_components(spec: PencilSpec, u0: ParticularSolution, lam_abs: float,
                    truncation: int) -> TailComponents:
    m = majorant_scale(spec, u0)
    length = spec.grid.b - spec.grid.a
    N = spec.degree
    m_hat = lam_abs * ((m * length) ** 2 + 1.0)

    def T(M: int) -> float:
        return tail_series(m_hat, M, N)

    def term(n: int) -> float:
        if m_hat == 0.0:
            return 0.0
        q = n // N
        lt = n * math.log(m_hat) - math.lgamma(2 * q + 1)
        return math.exp(lt) if lt < 700 else math.inf

    even = T(truncation)
    # |X^(2n+1)| <= m*length * sup|X^(2n)|
    odd_x = m * length * even
    # |Xtilde^(2n+1)| <= m*length * sum_{k=1..N} sup|Xtilde^(2(n-k+1))|
    odd_xtilde = 0.0
    head_xtilde = 0.0  # same bound applied to the single order-M odd power
    for k in range(1, N + 1):
        odd_xtilde += (lam_abs ** (k - 1)) * T(truncation - k + 1)
        head_xtilde += (lam_abs ** (k - 1)) * term(truncation - k + 1)
    odd_xtilde *= m * length
    head_xtilde *= m * length
    # sum_{n>M} |lam^n X^(2n-1)| = lam * sum_{j>=M} |lam^j X^(2j+1)|
    lagged_x = lam_abs * (m * length * term(truncation) + odd_x)
    lagged_xtilde = lam_abs * (head_xtilde + odd_xtilde)
    return TailComponents(even=even, odd_x=odd_x, odd_xtilde=odd_xtilde,
                          lagged_x=lagged_x, lagged_xtilde=lagged_xtilde)


def wronskian(pair: SolutionPair, lam: complex) -> SampledFunction:
    """p (u1 u2' - u1' u2) along the grid; constant in x by the Abel identity."""
    u1, u1p = pair.evaluate(lam, 1.0, 0.0)
    u2, u2p = pair.evaluate(lam, 0.0, 1.0)
    p = pair.table.pencil.p.values
    return SampledFunction(
        pair.table.pencil.grid,
        p * (u1.values * u2p.values - u1p.values * u2.values),
    )
