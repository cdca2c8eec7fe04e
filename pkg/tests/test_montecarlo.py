import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ipps.duality import stationary_theta
from ipps.errors import InputError
from ipps.lattice import (ARWPI, BCRW, OccupancyConfig, build_generator, empty_interval_prob,
                          evolve_exact, exact_intensity, spin_parity)
from ipps.montecarlo import (EstimateWithError, coupled_bcrw_run, empirical_distribution,
                             estimate_empty_interval, estimate_intensity, estimate_spin_parity,
                             gillespie_run, rightmost_displacement, run_replicas)

BC = BCRW(1, 1, 3, 3)


def test_estimate_with_error():
    e = EstimateWithError.from_samples([0.0, 1.0, 1.0, 0.0])
    assert e.mean == 0.5
    assert e.stderr == pytest.approx(np.std([0, 1, 1, 0], ddof=1) / 2)
    assert e.within(0.5 + 3.9 * e.stderr)
    assert not e.within(0.5 + 4.1 * e.stderr)
    with pytest.raises(InputError):
        EstimateWithError.from_samples([1.0])


def test_time_zero_is_exact():
    eta = OccupancyConfig.from_sites(10, [2, 3, 7])
    e = estimate_intensity(BC, eta, 0.0, (2, 7), 50, 1)
    assert (e.mean, e.stderr) == (1.0, 0.0)
    e = estimate_empty_interval(BC, eta, 0.0, 4, 4, 50, 1)
    assert (e.mean, e.stderr) == (1.0, 0.0)


@given(st.integers(0, 2 ** 64 - 1))
def test_runs_are_reproducible(seed):
    eta = OccupancyConfig.alternating(16)
    assert gillespie_run(BC, eta, 0.7, seed) == gillespie_run(BC, eta, 0.7, seed)
    a = ARWPI.homogeneous(16, 1.0, 0.5, 0.3)
    assert gillespie_run(a, eta, 0.7, seed) == gillespie_run(a, eta, 0.7, seed)


def test_replica_streams_are_independent_of_batch():
    eta = OccupancyConfig.alternating(12)
    obs = [("intensity", (3,)), ("empty", (2, 6))]
    full = run_replicas(BC, eta, 0.4, 20, 99, obs)
    tail = run_replicas(BC, eta, 0.4, 10, 109, obs)
    np.testing.assert_array_equal(full[10:], tail)


def test_seed_validation():
    with pytest.raises(InputError):
        gillespie_run(BC, OccupancyConfig.full(4), 1.0, -1)
    with pytest.raises(InputError):
        gillespie_run(BC, OccupancyConfig.full(4), -1.0, 0)
    with pytest.raises(InputError):
        run_replicas(BC, OccupancyConfig.full(4), 1.0, 5, 0, [("intensity", (2, 1))])


def test_bcrw_never_dies_and_arwpi_keeps_parity():
    eta = OccupancyConfig.single(20, 10)
    for s in range(20):
        assert gillespie_run(BC, eta, 2.0, s).count() >= 1
    a = ARWPI.homogeneous(20, 1.0, 1.0, 0.7)
    start = OccupancyConfig.from_sites(20, [3, 4, 9])
    for s in range(20):
        assert gillespie_run(a, start, 2.0, s).count() % 2 == 1


@pytest.mark.parametrize("model", [BC, ARWPI.single_source(10, 1.0, 0.5, 5, 1.5)])
def test_estimators_agree_with_exact(model):
    n, t = 10, 0.3
    eta = OccupancyConfig.alternating(n)
    gen = build_generator(model, n)
    dist = evolve_exact(gen, eta, t)
    reps = 40000
    checks = [
        (estimate_intensity(model, eta, t, (4,), reps, 5), exact_intensity(dist, (4,))),
        (estimate_intensity(model, eta, t, (3, 4), reps, 6), exact_intensity(dist, (3, 4))),
        (estimate_empty_interval(model, eta, t, 2, 6, reps, 7), empty_interval_prob(dist, 2, 6)),
        (estimate_spin_parity(model, eta, t, 1, 5, reps, 8), spin_parity(dist, 1, 5)),
    ]
    for est, ref in checks:
        assert est.within(ref, 4.0)


def test_empirical_distribution_total_variation():
    n, t = 6, 0.2
    eta = OccupancyConfig.single(n)
    emp = empirical_distribution(BC, eta, t, 200000, 3)
    exact = evolve_exact(build_generator(BC, n), eta, t)
    assert emp.total_variation(exact) < 0.01


def test_graphical_coupling_is_monotone():
    n = 30
    for s in range(30):
        small = OccupancyConfig.from_sites(n, [10, 20])
        large = OccupancyConfig.from_sites(n, [5, 10, 11, 20, 25])
        a, b, bad = coupled_bcrw_run(BC, small, large, 3.0, s)
        assert bad == 0
        assert np.all(a.bits <= b.bits)


def test_rightmost_particle_drifts_outward():
    est = rightmost_displacement(BC, 200, 3.0, 200, 11)
    assert est.mean > 4 * est.stderr > 0


def test_equilibrium_empty_interval_large_window():
    # homogeneous ARWPI relaxes to Bernoulli(theta_hat) away from the edges
    n, m = 200, 1.0
    model = ARWPI.homogeneous(n, 1.0, 1.0, m)
    _, hat = stationary_theta(m, 1.0, 1.0)
    est = estimate_empty_interval(model, OccupancyConfig.empty(n), 10.0, 98, 102, 20000, 21)
    assert est.within((1 - hat) ** 4, 4.0)
