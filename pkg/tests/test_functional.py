import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracnodal.discretization import Field
from fracnodal.functional import (
    DegenerateSplit,
    components,
    decomposition_excess,
    decomposition_excess_closed_form,
    energy,
    energy_from_components,
    gagliardo_energy,
    h_norm_sq,
    pairing,
    pairing_gap,
    residual,
)

from conftest import random_sign_changing


def energy_by_terms(problem, u):
    """Energy assembled from the generic nonlinearity and potential callables."""
    w = problem.w
    G = gagliardo_energy(problem, u)
    V = problem.potential(problem.grid.nodes)
    return (
        0.5 * problem.a * G
        + 0.25 * problem.b * G * G
        + 0.5 * w * np.sum(V * u * u)
        - w * np.sum(problem.nonlinearity.F(u))
    )


class TestEnergy:
    def test_zero_field(self, small_problem):
        assert energy(small_problem, np.zeros(small_problem.grid.size)) == 0.0

    def test_matches_term_by_term(self, small_problem, rng):
        u = random_sign_changing(rng, small_problem.grid)
        assert energy(small_problem, u) == pytest.approx(energy_by_terms(small_problem, u), rel=1e-13)

    def test_even_in_u(self, small_problem, rng):
        u = random_sign_changing(rng, small_problem.grid)
        assert energy(small_problem, -u) == pytest.approx(energy(small_problem, u), rel=1e-14)

    def test_accepts_fields(self, small_problem, rng):
        u = random_sign_changing(rng, small_problem.grid)
        assert energy(small_problem, Field(small_problem.grid, u)) == energy(small_problem, u)

    def test_components_reproduce_energy(self, small_problem, rng):
        for _ in range(5):
            u = random_sign_changing(rng, small_problem.grid)
            eb = components(small_problem, u)
            al, be = rng.uniform(0.2, 3.0, size=2)
            direct = energy(small_problem, al * np.maximum(u, 0) + be * np.minimum(u, 0))
            assert energy_from_components(small_problem, eb, al, be) == pytest.approx(direct, rel=1e-12)


class TestDerivative:
    def test_pairing_matches_finite_differences(self, small_problem, rng):
        h = 1e-6
        for _ in range(4):
            u = random_sign_changing(rng, small_problem.grid)
            for _ in range(3):
                phi = rng.normal(size=u.size)
                fd = (energy(small_problem, u + h * phi) - energy(small_problem, u - h * phi)) / (2 * h)
                assert pairing(small_problem, u, phi) == pytest.approx(fd, rel=1e-5)

    def test_taylor_remainder_is_second_order(self, small_problem, rng):
        u = random_sign_changing(rng, small_problem.grid)
        phi = rng.normal(size=u.size)
        d = pairing(small_problem, u, phi)
        rem = [abs(energy(small_problem, u + t * phi) - energy(small_problem, u) - t * d) for t in (1e-2, 5e-3)]
        assert rem[0] / rem[1] == pytest.approx(4.0, rel=0.05)

    def test_residual_represents_pairing(self, small_problem, rng):
        u = random_sign_changing(rng, small_problem.grid)
        r = residual(small_problem, u)
        for _ in range(5):
            phi = rng.normal(size=u.size)
            assert small_problem.w * float(r @ phi) == pytest.approx(pairing(small_problem, u, phi), rel=1e-12)

    def test_residual_of_zero(self, small_problem):
        z = Field(small_problem.grid, np.zeros(small_problem.grid.size))
        r = residual(small_problem, z)
        assert isinstance(r, Field) and not np.any(r.values)


class TestSplitIdentities:
    def test_gagliardo_split(self, small_problem, rng):
        u = random_sign_changing(rng, small_problem.grid, smooth=False)
        eb = components(small_problem, u)
        assert eb.gagliardo == pytest.approx(gagliardo_energy(small_problem, u), rel=1e-12)
        assert eb.cross > 0

    def test_excess_closed_form(self, small_problem, rng):
        u = random_sign_changing(rng, small_problem.grid)
        eb = components(small_problem, u)
        ex = decomposition_excess(small_problem, u)
        assert ex == pytest.approx(decomposition_excess_closed_form(small_problem, eb), rel=1e-10)
        assert ex > 0

    def test_excess_is_plain_energy_difference(self, small_problem, rng):
        u = 0.5 * random_sign_changing(rng, small_problem.grid)
        naive = energy(small_problem, u) - energy(small_problem, np.maximum(u, 0)) - energy(small_problem, np.minimum(u, 0))
        assert decomposition_excess(small_problem, u) == pytest.approx(naive, rel=1e-8)

    def test_excess_at_b0_is_aC(self, small_problem, rng):
        pr = small_problem.with_b(0.0)
        u = random_sign_changing(rng, pr.grid)
        eb = components(pr, u)
        assert decomposition_excess(pr, u) == pytest.approx(pr.a * eb.cross, rel=1e-10)

    def test_excess_needs_both_parts(self, small_problem):
        with pytest.raises(DegenerateSplit):
            decomposition_excess(small_problem, np.abs(np.linspace(-1, 1, small_problem.grid.size)) + 0.1)

    def test_pairing_gap_matches_direct(self, small_problem, rng):
        u = random_sign_changing(rng, small_problem.grid)
        eb = components(small_problem, u)
        up, um = np.maximum(u, 0), np.minimum(u, 0)
        direct_p = pairing(small_problem, u, up) - pairing(small_problem, up, up)
        direct_m = pairing(small_problem, u, um) - pairing(small_problem, um, um)
        assert pairing_gap(small_problem, eb, +1) == pytest.approx(direct_p, rel=1e-9)
        assert pairing_gap(small_problem, eb, -1) == pytest.approx(direct_m, rel=1e-9)
        assert direct_p > 0 and direct_m > 0


class TestCoercivity:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 2.0))
    def test_lower_bound(self, small_problem, seed, b):
        pr = small_problem.with_b(b)
        u = np.random.default_rng(seed).normal(size=pr.grid.size) * 3
        lhs = energy(pr, u) - 0.25 * pairing(pr, u, u)
        rhs = 0.25 * pr.a * h_norm_sq(pr, u)
        assert lhs - rhs >= -1e-12 * abs(rhs)


class TestProblem:
    def test_with_b_reuses_kernel(self, small_problem):
        pr = small_problem.with_b(0.3)
        assert pr.kernel is small_problem.kernel and pr.b == 0.3

    def test_with_params_rejects_grid_changes(self, small_problem):
        with pytest.raises(ValueError):
            small_problem.with_params(grid_points=32)
