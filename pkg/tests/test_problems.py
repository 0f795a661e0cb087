"""Spectral shift, string characteristic series, Dirac reduction."""

import numpy as np
import pytest

from slpencil import Grid, SampledFunction, constant, sample
from slpencil.grids import cumulative_integral
from slpencil.problems import (
    DiracSpec,
    StringProblem,
    dirac_first_component,
    dirac_to_pencil,
    shift_pencil,
    string_characteristic,
    string_tail,
    string_u0,
    two_point_series,
    two_point_tail,
)
from slpencil.rootfinding import Rectangle, certify, newton_polish, poly_roots
from slpencil.spps import (
    ParticularSolution,
    PencilSpec,
    SolutionPair,
    build_formal_powers,
    chain_particular_solution,
)


def intro_pencil(n_nodes=2001):
    g = Grid(0.0, 1.0, n_nodes)
    return PencilSpec(p=constant(g, 1.0), q=constant(g, 0.0),
                      r=(constant(g, 1.0), constant(g, 2.0)))


def unit_u0(g):
    return ParticularSolution(constant(g, 1.0), constant(g, 0.0),
                              "closed-form", 0.0, 1.0)


class TestShiftPencil:
    def test_zero_shift_is_identity(self):
        spec = intro_pencil(101)
        sh = shift_pencil(spec, 0.0)
        assert np.array_equal(sh.q_eff.values, spec.q.values)
        for a, b in zip(sh.r_eff, spec.r):
            assert np.array_equal(a.values, b.values)

    def test_degree_two_closed_form(self):
        g = Grid(0.0, 1.0, 101)
        r1 = sample(g, lambda x: 1.0 + x)
        r2 = sample(g, lambda x: np.exp(x))
        q = sample(g, lambda x: np.sin(x))
        spec = PencilSpec(p=constant(g, 1.0), q=q, r=(r1, r2))
        lam0 = 0.3 - 1.2j
        sh = shift_pencil(spec, lam0)
        assert np.allclose(sh.r_eff[0].values, r1.values + 2 * lam0 * r2.values)
        assert np.array_equal(sh.r_eff[1].values, r2.values)
        assert np.allclose(sh.q_eff.values,
                           q.values - lam0 * r1.values - lam0**2 * r2.values)

    def test_shift_then_unshift_roundtrip(self):
        g = Grid(0.0, 1.0, 101)
        spec = PencilSpec(p=constant(g, 1.0),
                          q=sample(g, lambda x: x),
                          r=(sample(g, lambda x: 1 + x**2),
                             sample(g, lambda x: np.cos(x)),
                             constant(g, 0.5)))
        lam0 = 0.7 + 0.2j
        once = shift_pencil(spec, lam0).pencil
        back = shift_pencil(once, -lam0).pencil
        assert np.max(np.abs(back.q.values - spec.q.values)) < 1e-12
        for a, b in zip(back.r, spec.r):
            assert np.max(np.abs(a.values - b.values)) < 1e-12

    def test_shift_consistency_on_intro_example(self):
        """Solution of the initial-value problem evaluated directly and through
        a spectral shift at lambda0 = 1 must agree at lambda = 1.5."""
        spec = intro_pencil(5001)
        g = spec.grid
        lam = 1.5
        exact = np.cosh(np.sqrt(lam + 2 * lam**2))

        pair0 = SolutionPair(build_formal_powers(spec, unit_u0(g), 0.0, 60))
        u_direct, _ = pair0.evaluate(lam, 1.0, 0.0)

        lam0 = 1.0
        sh = shift_pencil(spec, lam0)
        u0s = chain_particular_solution(pair0, lam0, spec.p, sh.q_eff)
        pair1 = SolutionPair(build_formal_powers(sh.pencil, u0s, 0.0, 40))
        # match the initial conditions u(0) = 1, u'(0) = 0 in the shifted frame
        c1 = 1.0 / u0s.u0.values[0]
        c2 = -c1 * u0s.u0_prime.values[0] * u0s.u0.values[0] * spec.p.values[0]
        u_shift, _ = pair1.evaluate(lam - lam0, c1, c2)

        assert abs(u_direct.values[-1] - exact) < 1e-10
        assert abs(u_shift.values[-1] - u_direct.values[-1]) <= 1e-9


def string_eigen_errors(series, count, lam_exact):
    roots = np.array(poly_roots(series))
    errs = []
    for lam in lam_exact[:count]:
        raw = roots[np.argmin(np.abs(roots - lam))]
        errs.append(abs(newton_polish(series, raw, steps=8) - lam))
    return errs


class TestStringCharacteristic:
    def test_first_coefficient_is_length(self):
        g = Grid(0.0, 1.0, 5001)
        sp = StringProblem(damping=sample(g, lambda x: np.cos(x)),
                           density=sample(g, lambda x: 1 + x**2))
        series = string_characteristic(sp, truncation=10)
        assert abs(series.coeffs[0] - 1.0) < 1e-13  # X^(1)(L) = L = 1

    def test_constant_damping_eigenvalues(self):
        g = Grid(0.0, 1.0, 20001)
        sp = StringProblem(damping=constant(g, 1.0), density=constant(g, 1.0))
        series = string_characteristic(sp, truncation=100)
        exact = [-1 + np.sqrt(complex(1 - n**2 * np.pi**2)) for n in range(1, 8)]
        exact += [-1 - np.sqrt(complex(1 - n**2 * np.pi**2)) for n in range(1, 8)]
        errs = string_eigen_errors(series, 14, exact)
        # double-precision coefficient rounding limits the higher modes
        by_n = [max(errs[n - 1], errs[n + 6]) for n in range(1, 8)]
        assert max(by_n[:5]) < 1e-9
        assert by_n[5] < 1e-8 and by_n[6] < 2e-7

    def test_undamped_string_spectrum(self):
        g = Grid(0.0, 1.0, 20001)
        sp = StringProblem(damping=constant(g, 0.0), density=constant(g, 1.0))
        series = string_characteristic(sp, truncation=60)
        exact = [1j * n * np.pi for n in (1, 2, 3)] + [-1j * n * np.pi for n in (1, 2, 3)]
        errs = string_eigen_errors(series, 6, exact)
        assert max(errs) < 1e-10

    def test_shift_consistency_constant_damping(self):
        """Eigenvalues through the shifted series agree with the unshifted ones."""
        g = Grid(0.0, 1.0, 20001)
        sp = StringProblem(damping=constant(g, 1.0), density=constant(g, 1.0))
        base = string_characteristic(sp, truncation=100)
        lam0 = -1.0 - 3.0j
        shifted = string_characteristic(sp, truncation=100, lam0=lam0)
        exact = [-1 + np.sqrt(complex(1 - np.pi**2)),
                 -1 - np.sqrt(complex(1 - np.pi**2))]
        for lam in exact:
            e_base = string_eigen_errors(base, 1, [lam])[0]
            e_shift = string_eigen_errors(shifted, 1, [lam])[0]
            assert e_base <= 1e-10 and e_shift <= 1e-10

    def test_boundary_residual_at_eigenvalue(self):
        """A nontrivial Dirichlet solution rebuilt at a localized root must
        nearly vanish at the right endpoint."""
        g = Grid(0.0, 1.0, 10001)
        sp = StringProblem(damping=constant(g, 1.0), density=constant(g, 1.0))
        lam1 = complex(-1 + np.sqrt(complex(1 - np.pi**2)))
        u0 = string_u0(sp)
        table = build_formal_powers(sp.pencil, u0, 0.0, 60,
                                    store="endpoint", eval_points=(lam1,))
        y, _ = SolutionPair(table).evaluate(lam1, 0.0, 1.0)
        assert abs(y.values[-1]) <= 1e-6 * np.max(np.abs(y.values))

    def test_certification_of_first_mode(self):
        g = Grid(0.0, 1.0, 10001)
        sp = StringProblem(damping=constant(g, 1.0), density=constant(g, 1.0))
        series = string_characteristic(sp, truncation=100)
        lam1 = complex(-1 + np.sqrt(complex(1 - np.pi**2)))
        rect = Rectangle.around(lam1, 0.5)
        tail = string_tail(series, rect.max_abs_from(0.0))
        assert np.isfinite(tail)
        from slpencil.rootfinding import EigenvalueRecord
        rec = EigenvalueRecord(lam1, 1, "poly_roots", False, 0.0)
        assert certify(rec, series, tail, rect).certified

    def test_tail_dominates_actual_truncation_error(self):
        g = Grid(0.0, 1.0, 5001)
        sp = StringProblem(damping=constant(g, 1.0), density=constant(g, 1.0))
        s40 = string_characteristic(sp, truncation=40)
        s80 = string_characteristic(sp, truncation=80)
        for lam in (0.5 + 0.5j, -1 + 2j, 2.0):
            observed = abs(complex(s80(lam)) - complex(s40(lam)))
            assert observed <= string_tail(s40, abs(lam))


class TestTwoPointSeries:
    def test_neumann_right_matches_derivative_zero(self):
        """With left Dirichlet and right Neumann the series zeros satisfy
        y(0) = 0, y'(1) = 0 for y'' = lambda y: lambda_n = -((n+1/2) pi)^2."""
        g = Grid(0.0, 1.0, 10001)
        spec = PencilSpec(p=constant(g, 1.0), q=constant(g, 0.0),
                          r=(constant(g, 1.0),))
        table = build_formal_powers(spec, unit_u0(g), 0.0, 60)
        series = two_point_series(table, left=(1.0, 0.0), right=(0.0, 1.0))
        roots = np.array(poly_roots(series))
        for n in range(3):
            lam = -((n + 0.5) * np.pi) ** 2
            raw = roots[np.argmin(np.abs(roots - lam))]
            assert abs(newton_polish(series, raw) - lam) < 1e-8

    def test_tail_bound_is_finite_and_positive(self):
        g = Grid(0.0, 1.0, 1001)
        spec = PencilSpec(p=constant(g, 1.0), q=constant(g, 0.0),
                          r=(constant(g, 1.0),))
        table = build_formal_powers(spec, unit_u0(g), 0.0, 30)
        t = two_point_tail(table, 2.0, left=(1.0, 0.0), right=(0.5, 1.5))
        assert 0 < t < 1e-10


class TestDirac:
    def test_constant_potential(self):
        g = Grid(-1.0, 1.0, 101)
        d = DiracSpec(v=constant(g, 3.0), energy=0.0)
        pencil = dirac_to_pencil(d)
        assert np.allclose(pencil.p.values, 1 / 3.0)
        assert np.allclose(pencil.q.values, 3.0)
        assert np.max(np.abs(pencil.r[0].values)) < 1e-10
        assert np.allclose(pencil.r[1].values, 1 / 3.0)

    def test_affine_potential_r1_closed_form(self):
        g = Grid(0.0, 1.0, 501)
        d = DiracSpec(v=sample(g, lambda x: x + 2.0), energy=0.0)
        pencil = dirac_to_pencil(d)
        expected = -1.0 / (g.nodes + 2.0) ** 2
        assert np.max(np.abs(pencil.r[0].values - expected)
                      / np.abs(expected)) < 1e-10

    def test_vanishing_denominator_rejected(self):
        g = Grid(-1.0, 1.0, 101)
        with pytest.raises(Exception):
            DiracSpec(v=sample(g, lambda x: x), energy=0.0)

    def test_first_order_system_residual(self):
        """u = (lambda w + w')/(v - E) with w from the pencil solves the
        added/subtracted first-order system in integral form."""
        g = Grid(0.0, 1.0, 5001)
        d = DiracSpec(v=constant(g, 3.0), energy=0.0)
        pencil = dirac_to_pencil(d)
        from slpencil.spps import build_particular_solution
        u0 = build_particular_solution(pencil.p, pencil.q, truncation=60)
        pair = SolutionPair(build_formal_powers(pencil, u0, 0.0, 40))
        for lam in (0.2, 0.5 + 0.3j):
            w, wp = pair.evaluate(lam, 1.0, 0.5)
            u = dirac_first_component(w, wp, d, lam)
            # u' + (v-E) w = lambda u  -> integral form
            vmE = d.v.values - complex(d.energy)
            rhs = cumulative_integral(
                SampledFunction(g, lam * u.values - vmE * w.values)).values
            res = u.values - u.values[0] - rhs
            assert np.max(np.abs(res)) <= 1e-8 * np.max(np.abs(u.values))
