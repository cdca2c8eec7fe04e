import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ipps.duality import (InitialKernel, ScalarKernelTable, convergence_bound_check,
                          equilibrium_theta, kernel_definitional, kernel_from_distribution,
                          kernel_on_lattice_arwpi, kernel_on_lattice_bcrw, kernel_pair_pde_arwpi,
                          kernel_pair_pde_bcrw, stationary_theta)
from ipps.errors import InputError, StructureError
from ipps.lattice import (ARWPI, BCRW, OccupancyConfig, StateDistribution, build_generator,
                          empty_interval_prob, evolve_exact, spin_parity)

rates = st.floats(0.2, 2.0)


# -- tables and initial data ----------------------------------------------------

def test_table_validation_and_csv():
    v = np.array([[1.0, 0.5], [0.0, 1.0]])
    tab = ScalarKernelTable(1, 0.0, v)
    assert math.isnan(tab.values[1, 0])
    assert tab(0, 1) == 0.5
    assert tab.to_csv().splitlines() == ["y,z,K", "0,0,1", "0,1,0.5", "1,1,1"]
    with pytest.raises(StructureError):
        ScalarKernelTable(2, 0.0, v)
    with pytest.raises(InputError):
        tab(1, 0)


@given(st.integers(1, 8), st.data())
def test_initial_kernel_matches_definition(n, data):
    eta = OccupancyConfig.from_mask(n, data.draw(st.integers(0, (1 << n) - 1)))
    dist = StateDistribution.point_mass(eta)
    b = BCRW(1, 2, 3, 1.5)
    a = ARWPI.homogeneous(n, 1, 1, 0.3)
    got_b = InitialKernel.bcrw_deterministic(eta, b.phi).table()
    got_a = InitialKernel.arwpi_deterministic(eta).table()
    assert got_b.max_abs_diff(kernel_from_distribution(b, dist)) < 1e-12
    assert got_a.max_abs_diff(kernel_from_distribution(a, dist)) < 1e-12


def test_bernoulli_initial_kernel():
    th = [0.2, 0.7, 0.4, 0.9, 0.1]
    dist = StateDistribution.product_bernoulli(th)
    b = BCRW(1, 1, 3, 3)
    a = ARWPI.homogeneous(5, 1, 1, 0.5)
    assert InitialKernel.bcrw_bernoulli(th, b.phi).table().max_abs_diff(
        kernel_from_distribution(b, dist)) < 1e-12
    assert InitialKernel.arwpi_bernoulli(th).table().max_abs_diff(
        kernel_from_distribution(a, dist)) < 1e-12


def test_kernel_reads_observables():
    b = BCRW(1, 1, 3, 3)
    n = 6
    d = evolve_exact(build_generator(b, n), OccupancyConfig.alternating(n), 0.4)
    tab = kernel_from_distribution(b, d, 0.4)
    assert tab(1, 4) == pytest.approx(b.phi ** 3 * empty_interval_prob(d, 1, 4))
    a = ARWPI.homogeneous(n, 1, 1, 0.5)
    d = evolve_exact(build_generator(a), OccupancyConfig.alternating(n), 0.4)
    assert kernel_from_distribution(a, d)(0, 5) == pytest.approx(spin_parity(d, 0, 5))


# -- the two routes ---------------------------------------------------------------

@pytest.mark.parametrize("model", [BCRW(1, 1, 3, 3), BCRW(1, 2, 3, 1.5), BCRW(0, 1, 2, 0),
                                   BCRW(2, 0, 0, 1)])
@pytest.mark.parametrize("start", ["full", "alternating", "single", "empty"])
def test_bcrw_pair_equation_equals_master_equation(model, start):
    n = 9
    eta = OccupancyConfig.named(start, n)
    times = [0.0, 0.2, 0.7]
    pde = kernel_pair_pde_bcrw(model, InitialKernel.for_model(model, eta), times)
    ref = kernel_definitional(model, eta, times)
    for a, b in zip(pde, ref):
        assert a.max_abs_diff(b) < 1e-10


def test_documented_example_pair():
    model = BCRW(1, 1, 3, 3)
    eta = OccupancyConfig.full(12)
    pde = kernel_pair_pde_bcrw(model, InitialKernel.for_model(model, eta), 0.4)
    assert pde(5, 7) == pytest.approx(kernel_definitional(model, eta, 0.4)(5, 7), abs=1e-8)


@given(rates, rates, st.floats(0.1, 3.0), st.floats(0.05, 1.0), st.integers(0, 255))
def test_bcrw_routes_agree_for_admissible_rates(p, q, l, t, mask):
    model = BCRW(p, q, l, l * p / q)
    eta = OccupancyConfig.from_mask(8, mask)
    pde = kernel_pair_pde_bcrw(model, InitialKernel.for_model(model, eta), t)
    assert pde.max_abs_diff(kernel_definitional(model, eta, t)) < 1e-9 * model.phi ** 8


@given(st.lists(st.floats(0.0, 2.0), min_size=24, max_size=24), st.lists(st.floats(0, 1.5),
       min_size=8, max_size=8), st.floats(0.05, 1.0), st.integers(0, 255))
def test_arwpi_routes_agree_for_inhomogeneous_rates(jumps, imm, t, mask):
    model = ARWPI(tuple(jumps[:8]), tuple(jumps[8:16]), tuple(imm))
    eta = OccupancyConfig.from_mask(8, mask)
    pde = kernel_pair_pde_arwpi(model, InitialKernel.for_model(model, eta), t)
    assert pde.max_abs_diff(kernel_definitional(model, eta, t)) < 1e-10


def test_single_source_example():
    n, x0 = 12, 6
    model = ARWPI.single_source(n, 1.0, 1.0, x0, 2.0)
    eta = OccupancyConfig.alternating(n)
    pde = kernel_pair_pde_arwpi(model, InitialKernel.for_model(model, eta), 0.3)
    assert pde.max_abs_diff(kernel_definitional(model, eta, 0.3)) < 1e-8


def test_negative_time_rejected():
    model = BCRW(1, 1, 3, 3)
    with pytest.raises(InputError):
        kernel_pair_pde_bcrw(model, InitialKernel.for_model(model, OccupancyConfig.full(4)), -1.0)


def test_arwpi_rate_arrays_must_cover_window():
    model = ARWPI.homogeneous(5, 1, 1, 0.5)
    with pytest.raises(StructureError):
        kernel_pair_pde_arwpi(model, InitialKernel.arwpi_deterministic(OccupancyConfig.full(6)), 0.1)


def test_total_parity_is_conserved():
    # K(0, N) is the parity of the whole window: immigration and
    # annihilation both preserve it
    n = 8
    model = ARWPI.homogeneous(n, 1.0, 0.5, 0.7)
    eta = OccupancyConfig.from_sites(n, [1, 2, 5])
    tabs = kernel_pair_pde_arwpi(model, InitialKernel.for_model(model, eta), [0.5, 3.0])
    for tab in tabs:
        assert tab(0, n) == pytest.approx(-1.0, abs=1e-12)


# -- window insensitivity -------------------------------------------------------

def _empty_prob(model, n, eta, t, y, z):
    gen = build_generator(model if model.kind == "bcrw" else ARWPI.homogeneous(n, 1, 1, 0.5), n)
    return empty_interval_prob(evolve_exact(gen, eta, t), y, z)


@pytest.mark.parametrize("model, times, dist", [
    (BCRW(0.25, 0.25, 0.25, 0.25), [0.1, 0.3, 0.5], 4),
    (BCRW(1, 1, 3, 3), [0.1], 4),
    (ARWPI.homogeneous(1, 1, 1, 0.5), [0.1], 5),
])
def test_window_insensitivity(model, times, dist):
    for start in ["full", "alternating", "empty", "single"]:
        for t in times:
            y, z = dist, dist + 2
            n = z + dist
            if start == "single":
                small, big = OccupancyConfig.single(n, y), OccupancyConfig.single(n + 2, y)
            else:
                small, big = OccupancyConfig.named(start, n), OccupancyConfig.named(start, n + 2)
            a = _empty_prob(model, n, small, t, y, z)
            b = _empty_prob(model, n + 2, big, t, y, z)
            assert abs(a - b) < 1e-8


# -- translation-invariant solutions on Z ------------------------------------------

def test_lattice_solution_matches_window_interior():
    model = BCRW(1, 1, 3, 3)
    n, t = 14, 0.1
    eta = OccupancyConfig.full(n)
    win = kernel_pair_pde_bcrw(model, InitialKernel.for_model(model, eta), t)
    onz = kernel_on_lattice_bcrw(model, t, 20)
    for d in range(1, 4):
        assert win(6, 6 + d) == pytest.approx(onz[d], abs=1e-8)


def test_arwpi_lattice_solution_matches_window_interior():
    n, t = 14, 0.1
    model = ARWPI.homogeneous(n, 1.0, 1.0, 0.5)
    win = kernel_pair_pde_arwpi(model, InitialKernel.for_model(model, OccupancyConfig.empty(n)), t)
    onz = kernel_on_lattice_arwpi(1.0, 1.0, 0.5, t, 20)
    for d in range(1, 4):
        assert win(6, 6 + d) == pytest.approx(onz[d], abs=1e-8)


def test_lattice_solution_limits():
    model = BCRW(1, 1, 3, 3)
    K = kernel_on_lattice_bcrw(model, 40.0, 40)
    np.testing.assert_allclose(K[:15], model.phi ** -np.arange(15.0), atol=1e-9)
    theta, _ = stationary_theta(0.5, 1.0, 1.0)
    K = kernel_on_lattice_arwpi(1.0, 1.0, 0.5, 40.0, 40)
    np.testing.assert_allclose(K[:15], theta ** np.arange(15.0), atol=1e-9)
    assert kernel_on_lattice_bcrw(model, 0.0, 5)[0] == 1.0


def test_empty_start_grows_like_phi():
    model = BCRW(1, 1, 3, 3)
    K = kernel_on_lattice_bcrw(model, 0.0, 6, initial="empty")
    np.testing.assert_allclose(K, 2.0 ** np.arange(7.0))


# -- equilibria ------------------------------------------------------------------

def test_equilibrium_theta_quoted_value():
    theta, hat = equilibrium_theta(1.0, 1.0, 1.0)
    assert hat == pytest.approx(0.3090170, abs=1e-6)
    assert theta + 1 / theta - 2 == pytest.approx(1.0)


@given(st.floats(1e-3, 50), st.floats(0.1, 5), st.floats(0.1, 5))
def test_equilibrium_theta_solves_quadratic(m, p, q):
    theta, hat = equilibrium_theta(m, p, q)
    assert 0 < theta <= 1
    assert theta + 1 / theta - 2 == pytest.approx(2 * m / (p + q), rel=1e-9)
    assert hat == pytest.approx((1 - theta) / 2)
    assert stationary_theta(m, p, q) == equilibrium_theta(2 * m, p, q)


def test_equilibrium_edge_cases():
    assert equilibrium_theta(0.0, 1.0, 1.0) == (1.0, 0.0)
    assert equilibrium_theta(math.inf, 1.0, 1.0) == (0.0, 0.5)
    with pytest.raises(InputError):
        equilibrium_theta(-1.0, 1.0, 1.0)


@pytest.mark.parametrize("m", [0.5, 1.0])
def test_convergence_bound_interior(m):
    n = 12
    model = ARWPI.homogeneous(n, 1.0, 1.0, m)
    for start in ["full", "alternating", "empty"]:
        eta = OccupancyConfig.named(start, n)
        assert convergence_bound_check(model, eta, [0.0, 0.5, 1.0, 2.0, 4.0]) <= 1e-9


def test_convergence_routes_agree():
    n = 10
    model = ARWPI.homogeneous(n, 1.0, 1.0, 1.0)
    eta = OccupancyConfig.full(n)
    a = convergence_bound_check(model, eta, [0.5, 2.0], route="exact")
    b = convergence_bound_check(model, eta, [0.5, 2.0], route="pde")
    assert a == pytest.approx(b, abs=1e-10)


def test_convergence_bound_rejects_bad_input():
    model = ARWPI.single_source(6, 1, 1, 3, 1.0)
    with pytest.raises(InputError):
        convergence_bound_check(model, OccupancyConfig.full(6), [1.0])
    with pytest.raises(InputError):
        convergence_bound_check(ARWPI.homogeneous(6, 1, 1, 1), OccupancyConfig.full(6), [1.0],
                                margin=4)
