import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ipps import continuum as ct
from ipps.errors import InputError
from ipps.pointprocess import identify_product, intensity, thicken, thin
from ipps.pointprocess import verify_thin_thicken_identity

P1 = ct.ContinuumParams(1.0, 1.0, 1.0)
params = st.builds(ct.ContinuumParams, st.floats(0.2, 3.0), st.floats(0.0, 3.0),
                   st.floats(0.05, 3.0))


def test_params_validation():
    with pytest.raises(InputError):
        ct.ContinuumParams(alpha=0.0)
    with pytest.raises(InputError):
        ct.ContinuumParams(t=-1.0)
    assert ct.ContinuumParams(2.0, 8.0).k == 2.0


# -- closed forms against quadrature ----------------------------------------------

@given(params, st.floats(0.0, 6.0))
def test_closed_forms_match_quadrature(P, d):
    assert ct.kernel_a(P, 0.0, d) == pytest.approx(
        ct.kernel_fk_quadrature(P, d, "unit"), abs=1e-8)
    assert ct.kernel_b(P, 0.0, d) == pytest.approx(
        ct.kernel_fk_quadrature(P, d, "zero"), abs=1e-8)


@given(params, st.floats(0.0, 5.0))
def test_derivatives_match_quadrature(P, d):
    for j in (1, 2):
        assert ct.kernel_a_derivs(P, d)[j] == pytest.approx(
            ct.kernel_fk_quadrature(P, d, "unit", j), abs=1e-7)
        assert ct.kernel_b_derivs(P, d)[j] == pytest.approx(
            ct.kernel_fk_quadrature(P, d, "zero", j), abs=1e-7)


def test_derivatives_match_finite_differences():
    h = 1e-5
    for d in [0.3, 1.0, 2.5]:
        for derivs, f in [(ct.kernel_a_derivs, ct.kernel_a), (ct.kernel_b_derivs, ct.kernel_b)]:
            K, K1, K2 = derivs(P1, d)
            assert K1 == pytest.approx((f(P1, 0, d + h) - f(P1, 0, d - h)) / (2 * h), abs=1e-7)
            assert K2 == pytest.approx(
                (f(P1, 0, d + h) - 2 * K + f(P1, 0, d - h)) / h ** 2, abs=1e-4)


def test_trivial_values():
    assert ct.kernel_a(P1, 0.7, 0.7) == 1.0
    assert ct.kernel_b(P1, 0.7, 0.7) == pytest.approx(1.0, abs=1e-15)
    P0 = ct.ContinuumParams(1.0, 0.0, 1.0)
    np.testing.assert_allclose(ct.kernel_a(P0, 0.0, np.linspace(0, 5, 11)), 1.0)
    big = ct.ContinuumParams(1.0, 1.0, 200.0)
    for d in [0.5, 1.0, 3.0]:
        assert ct.kernel_a(big, 0.0, d) == pytest.approx(math.exp(-d), abs=1e-12)
        assert ct.kernel_b(big, 0.0, d) == pytest.approx(math.exp(-d), abs=1e-12)
    with pytest.raises(InputError):
        ct.kernel_a(P1, 1.0, 0.0)


def test_kernel_a_decreases_in_time():
    ds = np.linspace(0.1, 4, 12)
    prev = ct.kernel_a(ct.ContinuumParams(1, 1, 0.1), 0.0, ds)
    for t in [0.3, 1.0, 3.0]:
        cur = ct.kernel_a(ct.ContinuumParams(1, 1, t), 0.0, ds)
        assert np.all(cur <= prev + 1e-15)
        prev = cur


def test_kernel_a_translation_invariant():
    assert ct.kernel_a(P1, -1.0, 0.5) == ct.kernel_a(P1, 2.0, 3.5)


def test_density_a():
    assert ct.density_a(ct.ContinuumParams(1, 1, 0)) == 0.0
    for t in [0.1, 1.0, 5.0]:
        P = ct.ContinuumParams(1.0, 1.0, t)
        assert ct.density_a(P) == pytest.approx(ct.density_a_erf(P), abs=1e-12)
    h = 1e-5
    fd = -0.5 * (ct.kernel_a(P1, 0, h) - 1.0) / h
    assert ct.density_a(P1) == pytest.approx(fd, abs=1e-4)
    vals = [ct.density_a(ct.ContinuumParams(2.0, 0.5, t)) for t in [0.5, 1, 2, 4, 8]]
    assert np.all(np.diff(vals) > 0)
    assert ct.density_a(ct.ContinuumParams(1, 1, 50)) == pytest.approx(0.5, abs=1e-12)


# -- Pfaffian kernels ---------------------------------------------------------------

def test_poisson_kernel_identified():
    law = identify_product(ct.poisson_kernel(1.0, 4.0), [-1.0, 0.2, 0.5, 2.0])
    assert law.kind == "poisson"
    assert law.c == pytest.approx(1.0)


def test_kernel_b_limit_is_poisson():
    P = ct.ContinuumParams(1.0, 1.0, 60.0)
    law = identify_product(ct.kernel_b_pfaffian(P), [-1.0, 0.0, 0.7, 2.0])
    assert law.kind == "poisson"
    assert law.c == pytest.approx(2.0, rel=1e-8)


def test_intensities_are_nonnegative():
    P = ct.ContinuumParams(1.0, 2.0, 0.5)
    for ker in [ct.kernel_a_pfaffian(P), ct.kernel_b_pfaffian(P), ct.kernel_c_pfaffian(P)]:
        for sub in [(0.1,), (-0.5, 0.4), (-1.0, 0.0, 1.3)]:
            assert intensity(ker, sub) >= -1e-12


@given(st.floats(0.3, 2.0), st.floats(0.3, 3.0), st.floats(0.1, 2.0))
def test_thin_thicken_identity(alpha, beta, t):
    assert verify_thin_thicken_identity(alpha, beta, t, [-0.8, 0.1, 0.9], 3) < 1e-9


def test_thinning_and_thickening_of_poisson():
    ker = ct.poisson_kernel(1.0, 1.0)
    law = identify_product(thicken(thin(ker, 0.5), 0.25), [0.0, 1.0, 2.5])
    assert law.c == pytest.approx(0.5)


# -- single seed ----------------------------------------------------------------------

def test_psi_is_a_tail_probability():
    xs = np.linspace(-12, 16, 60)
    v = ct.psi(P1, xs)
    assert np.all(np.diff(v) <= 0)
    assert v[0] == pytest.approx(1.0, abs=1e-6) and v[-1] == pytest.approx(0.0, abs=1e-6)
    assert ct.psi(ct.ContinuumParams(1, 1, 0), 0.0) == 1.0


@given(st.floats(-3, 3), st.floats(0.0, 3.0))
def test_kernel_c_diagonal_pinned(y, gap):
    P = ct.ContinuumParams(1.0, 0.5, 0.8)
    assert ct.kernel_c(P, y, y) == pytest.approx(1.0, abs=1e-12)
    assert ct.kernel_c(P, y, y + gap) >= -1e-12


def test_kernel_c_derivatives():
    P = ct.ContinuumParams(1.0, 0.25, 1.0)
    h = 1e-5
    for y, z in [(-1.0, 0.5), (0.2, 1.4)]:
        K, Ky, Kz, Kyz = ct.kernel_c_derivs(P, y, z)
        f = lambda a, b: ct.kernel_c(P, a, b)  # noqa: E731
        assert Ky == pytest.approx((f(y + h, z) - f(y - h, z)) / (2 * h), abs=1e-6)
        assert Kz == pytest.approx((f(y, z + h) - f(y, z - h)) / (2 * h), abs=1e-6)
        fd = (f(y + h, z + h) - f(y + h, z - h) - f(y - h, z + h) + f(y - h, z - h)) / (4 * h * h)
        assert Kyz == pytest.approx(fd, abs=1e-4)


def test_kernel_c_small_time_initial_data():
    P = ct.ContinuumParams(1.0, 0.5, 1e-6)
    assert ct.kernel_c(P, -1.0, 1.0) == pytest.approx(0.0, abs=1e-9)
    assert ct.kernel_c(P, 0.5, 1.5) == pytest.approx(math.exp(P.k), rel=1e-9)


def test_kernel_c_without_branching_is_coalescing_kernel():
    # beta = 0: a single walker; K is the probability that [y, z) is empty
    P = ct.ContinuumParams(1.0, 0.0, 0.7)
    from scipy.stats import norm
    sd = math.sqrt(2.0 * P.t)
    for y, z in [(-1.0, 0.5), (0.3, 1.2), (-2.0, -0.4)]:
        empty = 1.0 - (norm.cdf(z, scale=sd) - norm.cdf(y, scale=sd))
        assert ct.kernel_c(P, y, z) == pytest.approx(empty, abs=1e-12)


def test_sticky_joint_trivial_cases():
    P = ct.ContinuumParams(1.0, 0.25, 1.0)
    assert ct.sticky_pair_joint(P, 50.0, -50.0) == pytest.approx(1.0)
    P0 = ct.ContinuumParams(1.0, 0.25, 0.0)
    assert ct.sticky_pair_joint(P0, 0.5, -0.5) == 1.0
    assert ct.sticky_pair_joint(P0, -0.5, 0.5) == 0.0


def test_sticky_simulation_order_and_marginal():
    P = ct.ContinuumParams(1.0, 0.25, 1.0)
    L, R = ct.sticky_pair_simulate(P, 20000, 5)
    assert np.all(L <= R)
    est = np.mean(R >= 0.5)
    se = math.sqrt(est * (1 - est) / R.size)
    assert abs(est - ct.psi(P, 0.5)) < 4 * se


@pytest.mark.slow
def test_sticky_joint_against_simulation():
    P = ct.ContinuumParams(1.0, 0.25, 1.0)
    L, R = ct.sticky_pair_simulate(P, 100000, 17)
    hit = (L < -1.0) & (R >= 1.0)
    est, se = hit.mean(), hit.std(ddof=1) / math.sqrt(hit.size)
    assert abs(est - ct.sticky_pair_joint(P, -1.0, 1.0)) < 4 * se


# -- firework ---------------------------------------------------------------------------

def test_firework_values():
    assert ct.firework_stationary(-1.0, 2.0) == 0.0
    assert ct.firework_stationary(1.5, 1.5) == pytest.approx(1.0)
    ref = 1 - 2 / math.pi * (math.pi / 2 - 2 * math.atan(0.5))
    assert ct.firework_stationary(1.0, 2.0) == pytest.approx(ref, abs=1e-15)
    assert ct.firework_intensity(-1.0) == pytest.approx(1 / math.pi)
    with pytest.raises(InputError):
        ct.firework_stationary(0.05, 1.0, delta=0.1)
    with pytest.raises(InputError):
        ct.firework_stationary(0.0, 1.0)


@given(st.floats(0.1, 5), st.floats(0.1, 5))
def test_firework_reflection(a, b):
    y, z = sorted((a, b))
    assert ct.firework_stationary(y, z) == pytest.approx(ct.firework_stationary(-z, -y), abs=1e-14)


def test_firework_derivatives():
    h = 1e-6
    y, z = 0.7, 1.9
    K, Ky, Kz, Kyz = ct.firework_derivs(y, z)
    f = ct.firework_stationary
    assert Ky == pytest.approx((f(y + h, z) - f(y - h, z)) / (2 * h), abs=1e-7)
    assert Kz == pytest.approx((f(y, z + h) - f(y, z - h)) / (2 * h), abs=1e-7)


def test_firework_factorizes_across_origin():
    ker = ct.firework_kernel(0.1)
    for y, z in [(-1.0, 2.0), (-0.3, 0.4)]:
        assert intensity(ker, (y, z)) == pytest.approx(
            intensity(ker, (y,)) * intensity(ker, (z,)), abs=1e-10)
    assert intensity(ker, (1.0,)) == pytest.approx(1 / math.pi, abs=1e-12)


def test_firework_finite_beta():
    assert ct.firework_finite_beta(1.0, 0.0, 1.0, 2.0) == 1.0
    assert ct.firework_finite_beta(1.0, 3.0, 1.0, 1.0) == 1.0
    assert ct.firework_finite_beta(1.0, 1e4, 1.0, 2.0) == pytest.approx(
        ct.firework_stationary(1.0, 2.0), abs=1e-3)
    vals = [ct.firework_finite_beta(1.0, b, -1.0, 2.0) for b in [1.0, 10.0, 100.0, 1e4]]
    assert np.all(np.diff(vals) < 0) and vals[-1] < 1e-3


# -- net kernel ---------------------------------------------------------------------

@pytest.mark.parametrize("region, closed", [([(-math.inf, math.inf)], ct.kernel_b), ([], ct.kernel_a)])
def test_net_solver_matches_closed_form(region, closed):
    b, t = 1.0, 0.5
    sol = ct.solve_net(b, t, region, h=0.05, dt=0.0125, U=3.0, V=1.5)
    P = ct.ContinuumParams(0.5, b * b / 2, t)
    Y, Z = sol.nodes()
    assert np.max(np.abs(sol.K - closed(P, Y, Z))) < 1e-6
    assert sol.residual < 1e-4
    assert np.all(sol.K[0] == 1.0)


def test_net_trivial_and_interpolated_values():
    sol = ct.solve_net(0.0, 0.5, [], h=0.1, dt=0.05, U=2.0, V=1.0)
    np.testing.assert_allclose(sol.K, 1.0, atol=1e-12)
    assert ct.net_kernel(1.0, 0.5, [(0.0, 1.0)], 0.3, 0.3) == 1.0
    sol = ct.solve_net(1.0, 0.5, [(-math.inf, math.inf)], h=0.05, dt=0.0125, U=3.0, V=1.5)
    P = ct.ContinuumParams(0.5, 0.5, 0.5)
    assert sol.value(-0.2, 0.6) == pytest.approx(ct.kernel_b(P, -0.2, 0.6), abs=2e-5)


def test_net_interval_region_interpolates_between_cases():
    # an interval of A between y and z pushes the kernel below the A-free value
    A = [(-0.25, 0.25)]
    sol = ct.solve_net(1.0, 0.25, A, h=0.05, dt=0.0125)
    P = ct.ContinuumParams(0.5, 0.5, 0.25)
    y, z = -1.0, 1.0
    assert ct.kernel_b(P, y, z) - 1e-3 <= sol.value(y, z) <= ct.kernel_a(P, y, z) + 1e-3
    # discontinuous initial data: the residual is only moderately small
    assert sol.residual < 5e-3


def test_net_rejects_bad_times():
    with pytest.raises(InputError):
        ct.solve_net(1.0, 0.0, [])
    with pytest.raises(InputError):
        ct.solve_net(1.0, 0.33, [], h=0.1, dt=0.1, U=1.0, V=1.0)


# -- residuals and scaling limits ------------------------------------------------------

def test_pde_residuals():
    P = ct.ContinuumParams(1.0, 1.0, 1.0)
    pts = [(-0.5, 0.5), (0.0, 1.2), (1.0, 3.0)]

    def Ka(t, y, z):
        return ct.kernel_a(ct.ContinuumParams(1.0, 1.0, t), y, z)

    assert ct.pde_residual(Ka, 1.0, 1.0, 1.0, pts) < 1e-4
    one = lambda t, y, z: 1.0  # noqa: E731
    assert ct.pde_residual(one, 1.0, 0.0, 1.0, pts) == 0.0
    k = P.k
    Kinf = lambda t, y, z: math.exp(-k * (z - y))  # noqa: E731
    assert ct.pde_residual(Kinf, 1.0, 1.0, 1.0, pts, dKdt=lambda t, y, z: 0.0,
                           lap=lambda t, y, z: 2 * k * k * Kinf(t, y, z)) < 1e-10


def test_lattice_kernels_converge_to_continuum():
    P = ct.ContinuumParams(1.0, 1.0, 0.5)
    for ex in ("a", "b"):
        e1 = ct.lattice_continuum_error(ex, P, 0.1)
        e2 = ct.lattice_continuum_error(ex, P, 0.05)
        assert e2 < e1 / 1.7
    with pytest.raises(InputError):
        ct.lattice_continuum_error("z", P, 0.1)


def test_gnuplot_script():
    text = ct.gnuplot_script("d.csv", "title", "x", "y", [(1, 2, "a"), (1, 3, "b")], "xy")
    assert "set logscale xy" in text
    assert text.count("'d.csv'") == 2
