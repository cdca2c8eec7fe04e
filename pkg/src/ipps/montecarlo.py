"""Event-driven simulation of BCRW and ARWPI on large windows.

Trajectories are sampled exactly (Gillespie): exponential waiting times
with the current total rate and events drawn proportionally to their
rates.  The same truncation rule as the exact engine applies: an event
that would move or copy a particle outside the window is a null event.

Random numbers come from SplitMix64, a counter-based 64-bit generator.
Replica ``i`` of a run with base seed ``s`` starts from the hashed
counter ``mix(s + i)``, so replica streams are reproducible one by one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import InputError
from .lattice import ARWPI, BCRW, MAX_EXACT_SITES, OccupancyConfig, StateDistribution

__all__ = [
    "EstimateWithError",
    "SimState",
    "gillespie_run",
    "run_replicas",
    "estimate_intensity",
    "estimate_empty_interval",
    "estimate_spin_parity",
    "empirical_distribution",
    "coupled_bcrw_run",
    "rightmost_displacement",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True, inline="always")
def _next(state):
    """Advance the counter; return (new_state, 64 random bits)."""
    state = state + _GOLDEN
    return state, _mix(state)


@nb.njit(cache=True, inline="always")
def _uniform(state):
    """Uniform on (0, 1]; never returns 0 so logs are safe."""
    state, z = _next(state)
    return state, ((z >> _S11) + np.uint64(1)) * _INV53


@nb.njit(cache=True, inline="always")
def _normal(state):
    state, u1 = _uniform(state)
    state, u2 = _uniform(state)
    return state, math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@nb.njit(cache=True)
def _seed_state(seed):
    return _mix(np.uint64(seed))


# -- BCRW ----------------------------------------------------------------

@nb.njit(cache=True)
def _bcrw_evolve(eta, p, q, l, r, t_end, state):
    """Evolve ``eta`` (uint8 array, modified in place) up to ``t_end``.

    A list of occupied sites with an inverse index gives O(1) uniform
    particle choice, insertion and removal.
    """
    n = eta.size
    slot = -np.ones(n, dtype=np.int64)
    parts = np.empty(n, dtype=np.int64)
    count = 0
    for x in range(n):
        if eta[x]:
            slot[x] = count
            parts[count] = x
            count += 1
    per = p + q + l + r
    clock = 0.0
    while count > 0 and per > 0.0:
        state, u = _uniform(state)
        clock += -math.log(u) / (count * per)
        if clock > t_end:
            break
        state, u = _uniform(state)
        k = min(int(u * count), count - 1)
        x = parts[k]
        state, u = _uniform(state)
        w = u * per
        if w < q:
            y, move = x - 1, True
        elif w < q + p:
            y, move = x + 1, True
        elif w < q + p + l:
            y, move = x - 1, False
        else:
            y, move = x + 1, False
        if y < 0 or y >= n:
            continue
        if move:
            # remove x (swap with last)
            j = slot[x]
            last = parts[count - 1]
            parts[j] = last
            slot[last] = j
            slot[x] = -1
            count -= 1
            eta[x] = 0
        if not eta[y]:
            eta[y] = 1
            slot[y] = count
            parts[count] = y
            count += 1
    return state


# -- ARWPI ---------------------------------------------------------------

@nb.njit(cache=True)
def _fen_add(tree, i, delta):
    n = tree.size - 1
    i += 1
    while i <= n:
        tree[i] += delta
        i += i & (-i)


@nb.njit(cache=True)
def _fen_find(tree, target, logn):
    """Smallest index whose prefix sum exceeds ``target``."""
    n = tree.size - 1
    pos = 0
    step = 1 << logn
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= target:
            pos = nxt
            target -= tree[nxt]
        step >>= 1
    return min(pos, n - 1), target


@nb.njit(cache=True)
def _arwpi_evolve(eta, p, q, m, t_end, state):
    """Evolve ``eta`` in place.  Site ``x`` carries the rate of its own
    jumps (if occupied) plus the immigration rate of bond ``{x-1, x}``."""
    n = eta.size
    jl = np.zeros(n)
    jr = np.zeros(n)
    im = np.zeros(n)
    for x in range(n):
        if x >= 1:
            jl[x] = q[x]
            im[x] = m[x]
        if x + 1 < n:
            jr[x] = p[x + 1]
    rate = np.zeros(n)
    tree = np.zeros(n + 1)
    for x in range(n):
        rate[x] = im[x] + (jl[x] + jr[x]) * eta[x]
        _fen_add(tree, x, rate[x])
    logn = 0
    while (1 << (logn + 1)) <= n:
        logn += 1
    clock = 0.0
    total = rate.sum()
    refresh = 0
    while True:
        if total <= 1e-300:
            break
        state, u = _uniform(state)
        clock += -math.log(u) / total
        if clock > t_end:
            break
        state, u = _uniform(state)
        x, w = _fen_find(tree, u * total, logn)
        if rate[x] <= 0.0:
            # rounding landed on an empty slot; walk to a live one
            while x < n - 1 and rate[x] <= 0.0:
                x += 1
            while rate[x] <= 0.0:
                x -= 1
            w = 0.5 * rate[x]
        w = min(max(w, 0.0), rate[x])
        if w < im[x]:
            eta[x - 1] ^= 1
            eta[x] ^= 1
            touched0, touched1 = x - 1, x
        elif w < im[x] + jl[x]:
            eta[x] = 0
            eta[x - 1] ^= 1
            touched0, touched1 = x - 1, x
        else:
            eta[x] = 0
            eta[x + 1] ^= 1
            touched0, touched1 = x, x + 1
        for y in (touched0, touched1):
            new = im[y] + (jl[y] + jr[y]) * eta[y]
            _fen_add(tree, y, new - rate[y])
            total += new - rate[y]
            rate[y] = new
        refresh += 1
        if refresh >= 4096:
            # bound drift of the running total
            total = rate.sum()
            refresh = 0
    return state


@nb.njit(cache=True)
def _bcrw_single(eta, p, q, l, r, t_end, seed):
    _bcrw_evolve(eta, p, q, l, r, t_end, _seed_state(seed))


@nb.njit(cache=True)
def _arwpi_single(eta, p, q, m, t_end, seed):
    _arwpi_evolve(eta, p, q, m, t_end, _seed_state(seed))


# -- replica drivers ----------------------------------------------------------

@nb.njit(cache=True)
def _observe(eta, kind, sites):
    if kind == 0:  # product of occupations
        for x in sites:
            if not eta[x]:
                return 0.0
        return 1.0
    s = 0
    for x in range(sites[0], sites[1]):
        s += eta[x]
    if kind == 1:  # empty interval
        return 1.0 if s == 0 else 0.0
    return 1.0 - 2.0 * (s & 1)  # parity


@nb.njit(cache=True)
def _replicas_bcrw(eta0, p, q, l, r, t_end, base, count, kinds, sites, offsets, masks):
    nobs = kinds.size
    out = np.empty((count, nobs))
    eta = np.empty_like(eta0)
    for i in range(count):
        eta[:] = eta0
        state = _seed_state(base + np.uint64(i))
        _bcrw_evolve(eta, p, q, l, r, t_end, state)
        for k in range(nobs):
            out[i, k] = _observe(eta, kinds[k], sites[offsets[k]:offsets[k + 1]])
        if masks.size:
            mk = 0
            for x in range(eta.size):
                mk |= np.int64(eta[x]) << x
            masks[i] = mk
    return out


@nb.njit(cache=True)
def _replicas_arwpi(eta0, p, q, m, t_end, base, count, kinds, sites, offsets, masks):
    nobs = kinds.size
    out = np.empty((count, nobs))
    eta = np.empty_like(eta0)
    for i in range(count):
        eta[:] = eta0
        state = _seed_state(base + np.uint64(i))
        _arwpi_evolve(eta, p, q, m, t_end, state)
        for k in range(nobs):
            out[i, k] = _observe(eta, kinds[k], sites[offsets[k]:offsets[k + 1]])
        if masks.size:
            mk = 0
            for x in range(eta.size):
                mk |= np.int64(eta[x]) << x
            masks[i] = mk
    return out


@dataclass(frozen=True)
class EstimateWithError:
    """Sample mean with its standard error ``std(ddof=1)/sqrt(n)``."""

    mean: float
    stderr: float
    replicas: int

    @classmethod
    def from_samples(cls, x) -> "EstimateWithError":
        x = np.asarray(x, dtype=float)
        if x.size < 2:
            raise InputError("need at least two replicas")
        return cls(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), int(x.size))

    def within(self, value: float, k: float = 4.0) -> bool:
        """``|mean - value| <= k * stderr`` (exact equality when stderr is 0)."""
        return abs(self.mean - value) <= k * self.stderr + 1e-15


@dataclass
class SimState:
    """Configuration, clock and seed of a single trajectory."""

    config: OccupancyConfig
    clock: float
    seed: int


def _check_model(model, n):
    if isinstance(model, ARWPI) and model.n_sites != n:
        raise InputError(f"ARWPI rates cover {model.n_sites} sites, configuration has {n}")
    if not isinstance(model, (BCRW, ARWPI)):
        raise InputError("model must be BCRW or ARWPI")


def _seed(seed) -> np.uint64:
    s = int(seed)
    if not 0 <= s < 2 ** 64:
        raise InputError("seed must be an unsigned 64-bit integer")
    return np.uint64(s)


def _drive(model, eta0: OccupancyConfig, t_end: float, base_seed, replicas: int,
           observables, want_masks=False):
    if not (t_end >= 0 and math.isfinite(t_end)):
        raise InputError("t_end must be finite and nonnegative")
    if replicas < 1:
        raise InputError("need at least one replica")
    _check_model(model, eta0.n_sites)
    kinds = np.array([k for k, _ in observables], dtype=np.int64)
    flat = [np.asarray(s, dtype=np.int64) for _, s in observables]
    offsets = np.zeros(len(flat) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([f.size for f in flat])
    sites = np.concatenate(flat) if flat else np.zeros(0, dtype=np.int64)
    if want_masks and eta0.n_sites > 62:
        raise InputError("state masks need at most 62 sites")
    masks = np.zeros(replicas if want_masks else 0, dtype=np.int64)
    eta = np.array(eta0.bits, dtype=np.uint8)
    base = _seed(base_seed)
    if isinstance(model, BCRW):
        vals = _replicas_bcrw(eta, model.p, model.q, model.l, model.r, float(t_end), base,
                              replicas, kinds, sites, offsets, masks)
    else:
        vals = _replicas_arwpi(eta, np.array(model.p), np.array(model.q), np.array(model.m),
                               float(t_end), base, replicas, kinds, sites, offsets, masks)
    return vals, masks


def gillespie_run(model, eta0: OccupancyConfig, t_end: float, seed: int) -> OccupancyConfig:
    """One exact trajectory up to ``t_end``; returns the final configuration."""
    if not (t_end >= 0 and math.isfinite(t_end)):
        raise InputError("t_end must be finite and nonnegative")
    _check_model(model, eta0.n_sites)
    eta = np.array(eta0.bits, dtype=np.uint8)
    seed = _seed(seed)
    if isinstance(model, BCRW):
        _bcrw_single(eta, model.p, model.q, model.l, model.r, float(t_end), seed)
    else:
        _arwpi_single(eta, np.array(model.p), np.array(model.q), np.array(model.m),
                      float(t_end), seed)
    return OccupancyConfig(eta)


def run_replicas(model, eta0: OccupancyConfig, t_end: float, replicas: int, base_seed: int,
                 observables) -> np.ndarray:
    """Per-replica observable values, shape ``(replicas, len(observables))``.

    ``observables`` is a list of ``(kind, sites)`` with kind ``"intensity"``
    (sites are the points), ``"empty"`` or ``"spin"`` (sites are ``(y, z)``).
    """
    code = {"intensity": 0, "empty": 1, "spin": 2}
    obs = []
    for kind, s in observables:
        if kind not in code:
            raise InputError(f"unknown observable {kind!r}")
        s = list(s)
        n = eta0.n_sites
        if kind == "intensity":
            if any(b <= a for a, b in zip(s, s[1:])) or (s and not (0 <= s[0] and s[-1] < n)):
                raise InputError("points must be increasing and inside the window")
        elif len(s) != 2 or not (0 <= s[0] <= s[1] <= n):
            raise InputError(f"interval {s} not inside window")
        obs.append((code[kind], s))
    vals, _ = _drive(model, eta0, t_end, base_seed, replicas, obs)
    return vals


def estimate_intensity(model, eta0, t, points, replicas, base_seed) -> EstimateWithError:
    """Monte Carlo estimate of ``E[eta_t(x_1) ... eta_t(x_n)]``."""
    return EstimateWithError.from_samples(
        run_replicas(model, eta0, t, replicas, base_seed, [("intensity", points)])[:, 0])


def estimate_empty_interval(model, eta0, t, y, z, replicas, base_seed) -> EstimateWithError:
    return EstimateWithError.from_samples(
        run_replicas(model, eta0, t, replicas, base_seed, [("empty", (y, z))])[:, 0])


def estimate_spin_parity(model, eta0, t, y, z, replicas, base_seed) -> EstimateWithError:
    return EstimateWithError.from_samples(
        run_replicas(model, eta0, t, replicas, base_seed, [("spin", (y, z))])[:, 0])


def empirical_distribution(model, eta0: OccupancyConfig, t: float, replicas: int,
                           base_seed: int) -> StateDistribution:
    """Histogram of final states as a :class:`StateDistribution`."""
    if eta0.n_sites > MAX_EXACT_SITES:
        raise InputError(f"state histograms limited to {MAX_EXACT_SITES} sites")
    _, masks = _drive(model, eta0, t, base_seed, replicas, [], want_masks=True)
    counts = np.bincount(masks, minlength=1 << eta0.n_sites)
    return StateDistribution(eta0.n_sites, counts / replicas)


# -- graphical coupling -------------------------------------------------------

@nb.njit(cache=True)
def _coupled_bcrw(a, b, p, q, l, r, t_end, seed):
    """Drive two configurations with one shared family of Poisson clocks.

    Every (site, event type) pair owns a clock; the superposition has rate
    ``N (p+q+l+r)``.  When a clock rings the event is applied to each copy
    in which the site is occupied.  Returns the number of times the
    inclusion ``a <= b`` was found violated after an event.
    """
    state = _seed_state(seed)
    n = a.size
    per = p + q + l + r
    total = n * per
    clock = 0.0
    bad = 0
    while total > 0.0:
        state, u = _uniform(state)
        clock += -math.log(u) / total
        if clock > t_end:
            break
        state, u = _uniform(state)
        x = min(int(u * n), n - 1)
        state, u = _uniform(state)
        w = u * per
        if w < q:
            y, move = x - 1, True
        elif w < q + p:
            y, move = x + 1, True
        elif w < q + p + l:
            y, move = x - 1, False
        else:
            y, move = x + 1, False
        if y < 0 or y >= n:
            continue
        for c in (a, b):
            if c[x]:
                if move:
                    c[x] = 0
                c[y] = 1
        if a[x] > b[x] or a[y] > b[y]:
            bad += 1
    return bad


def coupled_bcrw_run(model: BCRW, eta_small: OccupancyConfig, eta_large: OccupancyConfig,
                     t_end: float, seed: int):
    """Run two BCRW copies under the graphical coupling.

    Returns ``(final_small, final_large, violations)``; for an attractive
    system started from ``eta_small <= eta_large`` there are no violations.
    """
    if eta_small.n_sites != eta_large.n_sites:
        raise InputError("configurations differ in size")
    a = np.array(eta_small.bits, dtype=np.uint8)
    b = np.array(eta_large.bits, dtype=np.uint8)
    bad = _coupled_bcrw(a, b, model.p, model.q, model.l, model.r, float(t_end), _seed(seed))
    return OccupancyConfig(a), OccupancyConfig(b), int(bad)


def rightmost_displacement(model: BCRW, n_sites: int, t_end: float, replicas: int,
                           base_seed: int) -> EstimateWithError:
    """Mean displacement of the rightmost particle from a single central seed."""
    start = n_sites // 2
    eta0 = OccupancyConfig.single(n_sites, start)
    out = np.empty(replicas)
    for i in range(replicas):
        fin = gillespie_run(model, eta0, t_end, base_seed + i)
        out[i] = fin.sites().max() - start
    return EstimateWithError.from_samples(out)
