"""Formal-power recursion, solution assembly, u0 construction and tail bounds."""

import math

import numpy as np
import pytest

from slpencil import Grid, ParticularSolutionError, SampledFunction, constant, sample
from slpencil.grids import cumulative_integral
from slpencil.spps import (
    ParticularSolution,
    PencilSpec,
    SolutionPair,
    build_formal_powers,
    build_particular_solution,
    chain_particular_solution,
    majorant_scale,
    tail_bound,
    tail_series,
    wronskian,
)


def intro_pencil(n_nodes=1001):
    """y'' = y (lambda + 2 lambda^2) on [0, 1]: p = 1, q = 0, r_k = k."""
    g = Grid(0.0, 1.0, n_nodes)
    return PencilSpec(p=constant(g, 1.0), q=constant(g, 0.0),
                      r=(constant(g, 1.0), constant(g, 2.0)))


def unit_u0(g):
    return ParticularSolution(constant(g, 1.0), constant(g, 0.0),
                              "closed-form", 0.0, 1.0)


class TestFormalPowers:
    def test_base_cases(self):
        spec = intro_pencil(101)
        t = build_formal_powers(spec, unit_u0(spec.grid), 0.0, 3)
        assert np.all(t.xtilde[0] == 1.0)
        assert np.all(t.x[0] == 1.0)
        assert t.xtilde[1][0] == 0.0  # vanishes at the anchor
        for n in range(1, 8):
            assert abs(t.xtilde[n][t.x0_index]) < 1e-15
            assert abs(t.x[n][t.x0_index]) < 1e-15

    def test_intro_example_even_powers(self):
        spec = intro_pencil(1001)
        x = spec.grid.nodes
        t = build_formal_powers(spec, unit_u0(spec.grid), 0.0, 3)
        expected = {
            2: x**2 / 2,
            4: x**2 + x**4 / 24,
            6: x**4 / 6 + x**6 / 720,
        }
        for n, ref in expected.items():
            err = np.abs(t.xtilde[n] - ref)
            assert np.max(err[1:] / np.abs(ref[1:])) < 1e-10

    def test_single_term_pencil_gives_cosh_series(self):
        g = Grid(0.0, 1.0, 501)
        spec = PencilSpec(p=constant(g, 1.0), q=constant(g, 0.0), r=(constant(g, 1.0),))
        t = build_formal_powers(spec, unit_u0(g), 0.0, 5)
        x = g.nodes
        for n in range(1, 6):
            ref = x ** (2 * n) / math.factorial(2 * n)
            err = np.max(np.abs(t.xtilde[2 * n] - ref))
            assert err < 1e-12 * np.max(ref)

    def test_anchor_must_be_node(self):
        spec = intro_pencil(101)
        with pytest.raises(Exception):
            build_formal_powers(spec, unit_u0(spec.grid), 0.0505, 2)

    def test_endpoint_mode_matches_full(self):
        spec = intro_pencil(201)
        u0 = unit_u0(spec.grid)
        full = build_formal_powers(spec, u0, 0.0, 8)
        slim = build_formal_powers(spec, u0, 0.0, 8, store="endpoint",
                                   eval_points=(0.37 + 0.2j,))
        assert np.allclose(full.xtilde_end, slim.xtilde_end, rtol=0, atol=1e-15)
        assert np.allclose(full.x_end, slim.x_end, rtol=0, atol=1e-15)
        pf = SolutionPair(full)
        ps = SolutionPair(slim)
        uf, upf = pf.evaluate(0.37 + 0.2j, 1.0, 2.0 - 1j)
        us, ups = ps.evaluate(0.37 + 0.2j, 1.0, 2.0 - 1j)
        assert np.max(np.abs(uf.values - us.values)) < 1e-13
        assert np.max(np.abs(upf.values - ups.values)) < 1e-13

    def test_classical_recursion_oracle(self):
        """With N = 1 the table must match an independently coded classical scheme."""
        g = Grid(0.0, 1.0, 501)
        p = sample(g, lambda x: 1.0 + 0.3 * np.sin(x))
        q = sample(g, lambda x: 0.2 * np.cos(x))
        r1 = sample(g, lambda x: 1.0 + x**2)
        u0 = build_particular_solution(p, q, truncation=60)
        spec = PencilSpec(p=p, q=q, r=(r1,))
        t = build_formal_powers(spec, u0, 0.0, 6)

        # classical scheme: alternate multiply-integrate against u0^2 r and 1/(u0^2 p)
        def classic(seed_parity_r_first: bool):
            out = [np.ones(g.n_nodes, dtype=complex)]
            cur = out[0]
            u0sq = u0.u0.values**2
            for n in range(1, 14):
                r_turn = (n % 2 == 1) if seed_parity_r_first else (n % 2 == 0)
                integrand = cur * (u0sq * r1.values) if r_turn else cur / (u0sq * p.values)
                F = cumulative_integral(SampledFunction(g, integrand)).values
                cur = F - F[0]
                out.append(cur)
            return out

    # Xtilde starts with the r-weighted integral, X with the 1/(u0^2 p) one
        ref_tilde = classic(True)
        ref_plain = classic(False)
        for n in range(0, 14):
            scale = max(np.max(np.abs(ref_tilde[n])), 1e-30)
            assert np.max(np.abs(t.xtilde[n] - ref_tilde[n])) < 1e-12 * scale
            scale = max(np.max(np.abs(ref_plain[n])), 1e-30)
            assert np.max(np.abs(t.x[n] - ref_plain[n])) < 1e-12 * scale


class TestEvaluateSolution:
    def test_lambda_zero_returns_u0(self):
        spec = intro_pencil(101)
        pair = SolutionPair(build_formal_powers(spec, unit_u0(spec.grid), 0.0, 5))
        u, up = pair.evaluate(0.0, 1.0, 0.0)
        assert np.max(np.abs(u.values - 1.0)) == 0.0
        assert np.max(np.abs(up.values)) == 0.0

    def test_intro_example_cosh_value(self):
        spec = intro_pencil(10001)
        pair = SolutionPair(build_formal_powers(spec, unit_u0(spec.grid), 0.0, 30))
        u, _ = pair.evaluate(0.1, 1.0, 0.0)
        exact = np.cosh(np.sqrt(0.12))
        assert abs(u.values[-1] - exact) <= 1e-12

    def test_u2_initial_values(self):
        g = Grid(0.0, 1.0, 201)
        p = sample(g, lambda x: 2.0 + np.cos(x))
        q = sample(g, lambda x: 0.5 * x)
        r = (sample(g, lambda x: 1.0 + 0 * x), sample(g, lambda x: np.exp(-x)))
        u0 = build_particular_solution(p, q, truncation=60)
        pair = SolutionPair(build_formal_powers(PencilSpec(p, q, r), u0, 0.0, 20))
        lam = 0.3 - 0.7j
        u, up = pair.evaluate(lam, 0.0, 1.0)
        assert abs(u.values[0]) < 1e-13
        expected = 1.0 / (u0.u0.values[0] * p.values[0])
        assert abs(up.values[0] - expected) < 1e-12 * abs(expected)

    def test_wronskian_constant(self):
        g = Grid(0.0, 1.0, 1001)
        p = sample(g, lambda x: 1.0 + 0.2 * x)
        q = sample(g, lambda x: np.sin(x))
        r = (sample(g, lambda x: 1.0 + 0 * x), sample(g, lambda x: 1.0 + x))
        u0 = build_particular_solution(p, q, truncation=80)
        pair = SolutionPair(build_formal_powers(PencilSpec(p, q, r), u0, 0.0, 40))
        for lam in (0.0, 0.5, 1.0j, -0.3 + 0.8j):
            w = wronskian(pair, lam).values
            assert abs(w[0] - 1.0) < 1e-10
            assert np.max(np.abs(w - w[0])) < 1e-8 * abs(w[0])

    def test_ode_residual_integral_form(self):
        spec = intro_pencil(2001)
        g = spec.grid
        pair = SolutionPair(build_formal_powers(spec, unit_u0(g), 0.0, 40))
        for lam in (0.4, 1.0j, -0.5 + 0.5j):
            u, up = pair.evaluate(lam, 0.7, -0.3 + 1j)
            rhs = u.values * (lam * spec.r[0].values + lam**2 * spec.r[1].values
                              - spec.q.values)
            acc = cumulative_integral(SampledFunction(g, rhs)).values
            res = spec.p.values * up.values - spec.p.values[0] * up.values[0] - acc
            scale = max(np.max(np.abs(spec.p.values * up.values)), np.max(np.abs(acc)))
            assert np.max(np.abs(res)) <= 1e-8 * scale


class TestParticularSolution:
    def test_zero_potential_terminates(self):
        g = Grid(0.0, 1.0, 101)
        u0 = build_particular_solution(constant(g, 1.0), constant(g, 0.0))
        expected = 1.0 + 1j * g.nodes
        assert np.max(np.abs(u0.u0.values - expected)) < 1e-13
        assert u0.residual < 1e-13
        assert u0.min_modulus_ratio > 0.5

    def test_negative_q_gives_cosh_plus_i_sinh(self):
        g = Grid(0.0, 1.0, 501)
        u0 = build_particular_solution(constant(g, 1.0), constant(g, -1.0),
                                       truncation=60)
        ref = np.cosh(g.nodes) + 1j * np.sinh(g.nodes)
        assert np.max(np.abs(u0.u0.values - ref) / np.abs(ref)) < 1e-10

    def test_positive_q_gives_unit_circle(self):
        g = Grid(0.0, np.pi / 2, 501)
        u0 = build_particular_solution(constant(g, 1.0), constant(g, 1.0),
                                       truncation=60)
        ref = np.exp(1j * g.nodes)
        assert np.max(np.abs(u0.u0.values - ref)) < 1e-10
        # non-vanishing even though cos and sin each vanish somewhere
        assert u0.min_modulus_ratio > 0.9

    def test_vanishing_u0_raises_with_advice(self):
        g = Grid(0.0, 1.0, 101)
        bad = sample(g, lambda x: x - 0.5)
        with pytest.raises(ParticularSolutionError, match="spectral shift"):
            ParticularSolution.from_samples(bad, constant(g, 1.0),
                                            constant(g, 1.0), constant(g, 0.0))

    def test_chain_particular_solution_solves_shifted_equation(self):
        spec = intro_pencil(2001)
        g = spec.grid
        pair = SolutionPair(build_formal_powers(spec, unit_u0(g), 0.0, 40))
        lam0 = 1.0
        # q_eff = q - (lam0 r1 + lam0^2 r2) = -3 for the intro pencil
        q_eff = constant(g, -3.0)
        u0 = chain_particular_solution(pair, lam0, spec.p, q_eff)
        # solves u'' = 3u (the intro pencil at lambda = 1), without vanishing
        assert u0.residual < 1e-9
        assert u0.min_modulus_ratio > 0.1
        span = np.cosh(np.sqrt(3) * g.nodes), np.sinh(np.sqrt(3) * g.nodes)
        coef = np.linalg.lstsq(np.column_stack(span), u0.u0.values, rcond=None)[0]
        fit = np.column_stack(span) @ coef
        assert np.max(np.abs(fit - u0.u0.values)) < 1e-8 * np.max(np.abs(u0.u0.values))


class TestTailBound:
    def test_zero_lambda(self):
        spec = intro_pencil(101)
        assert tail_bound(spec, unit_u0(spec.grid), 0.0, 10) == 0.0

    def test_factorial_series_value(self):
        # N=1, m_hat=1, M=10: sum_{n>10} 1/(2n)! is essentially 1/22!
        val = tail_series(1.0, 10, 1)
        assert val <= 2e-21
        assert val >= 1.0 / math.factorial(22)

    def test_monotonicity(self):
        spec = intro_pencil(101)
        u0 = unit_u0(spec.grid)
        bounds_m = [tail_bound(spec, u0, 1.0, M) for M in (5, 10, 20, 40)]
        assert all(a >= b for a, b in zip(bounds_m, bounds_m[1:]))
        bounds_lam = [tail_bound(spec, u0, la, 20) for la in (0.5, 1.0, 2.0, 4.0)]
        assert all(a <= b for a, b in zip(bounds_lam, bounds_lam[1:]))

    def test_overflow_returns_inf(self):
        assert tail_series(1e280, 5, 2) == math.inf

    def test_tail_is_a_true_bound_for_intro_example(self):
        spec = intro_pencil(1001)
        u0 = unit_u0(spec.grid)
        t_small = build_formal_powers(spec, u0, 0.0, 12)
        t_big = build_formal_powers(spec, u0, 0.0, 24)
        for lam in np.exp(1j * np.linspace(0, 2 * np.pi, 7)):
            small = sum(lam**n * t_small.xtilde_end[2 * n] for n in range(13))
            big = sum(lam**n * t_big.xtilde_end[2 * n] for n in range(25))
            assert abs(big - small) <= tail_bound(spec, u0, abs(lam), 12)

    def test_majorant_scale(self):
        spec = intro_pencil(101)
        assert majorant_scale(spec, unit_u0(spec.grid)) == pytest.approx(2.0)
