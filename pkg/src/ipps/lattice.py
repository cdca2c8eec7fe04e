"""Finite-window lattice models and their exact master equation.

Window sites are ``0 .. N-1``.  A configuration is stored as a bitmask
(bit ``x`` is site ``x``), so a distribution over configurations is a
vector of length ``2**N`` indexed by mask.  Interval endpoints ``y <= z``
range over ``0 .. N`` and ``[y, z)`` is the usual half-open block.

Boundary rule: any event whose target lies outside the window is dropped
(truncation).  For branching this is a no-op, for jumps the particle
stays put.  With this rule both models remain exactly Pfaffian on the
window, which the test-suite checks to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import InputError, StructureError, WindowTooLargeError

__all__ = [
    "MAX_EXACT_SITES",
    "OccupancyConfig",
    "BCRW",
    "ARWPI",
    "ModelSpec",
    "BcrwConstants",
    "StateDistribution",
    "apply_jump",
    "apply_branch",
    "apply_immigration",
    "build_generator",
    "evolve_exact",
    "empty_interval_prob",
    "spin_parity",
    "exact_intensity",
    "sigma_expectation",
]

MAX_EXACT_SITES = 14
RATE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class OccupancyConfig:
    """0/1 occupancy of the window ``[0, N)``."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 1 or b.size < 1:
            raise StructureError("occupancy must be a non-empty 1-d array")
        if not np.all((b == 0) | (b == 1)):
            raise InputError("occupancy values must be exactly 0 or 1")
        b = b.astype(np.uint8)
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def n_sites(self) -> int:
        return int(self.bits.size)

    @property
    def mask(self) -> int:
        if self.n_sites > 62:
            raise StructureError("bitmask form limited to 62 sites")
        return int(np.dot(self.bits.astype(np.int64), 1 << np.arange(self.n_sites, dtype=np.int64)))

    def __getitem__(self, x):
        return int(self.bits[x])

    def __len__(self):
        return self.n_sites

    def __eq__(self, other):
        if not isinstance(other, OccupancyConfig):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def __repr__(self):
        s = "".join(map(str, self.bits[:64]))
        return f"OccupancyConfig({s}{'...' if self.n_sites > 64 else ''})"

    def count(self) -> int:
        return int(self.bits.sum())

    def sites(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def with_bits(self, bits) -> "OccupancyConfig":
        return OccupancyConfig(np.asarray(bits, dtype=np.uint8))

    @classmethod
    def from_mask(cls, n_sites: int, mask: int) -> "OccupancyConfig":
        return cls(np.array([(mask >> x) & 1 for x in range(n_sites)], dtype=np.uint8))

    @classmethod
    def from_sites(cls, n_sites: int, sites: Iterable[int]) -> "OccupancyConfig":
        b = np.zeros(n_sites, dtype=np.uint8)
        for x in sites:
            if not 0 <= x < n_sites:
                raise InputError(f"site {x} outside window of {n_sites}")
            b[x] = 1
        return cls(b)

    @classmethod
    def empty(cls, n_sites: int) -> "OccupancyConfig":
        return cls(np.zeros(n_sites, dtype=np.uint8))

    @classmethod
    def full(cls, n_sites: int) -> "OccupancyConfig":
        return cls(np.ones(n_sites, dtype=np.uint8))

    @classmethod
    def alternating(cls, n_sites: int, start: int = 0) -> "OccupancyConfig":
        return cls(((np.arange(n_sites) + start) % 2 == 0).astype(np.uint8))

    @classmethod
    def single(cls, n_sites: int, site: int | None = None) -> "OccupancyConfig":
        return cls.from_sites(n_sites, [n_sites // 2 if site is None else site])

    @classmethod
    def named(cls, name: str, n_sites: int) -> "OccupancyConfig":
        """Look up one of ``empty``, ``full``, ``alternating``, ``single``."""
        table = {"empty": cls.empty, "full": cls.full,
                 "alternating": cls.alternating, "single": cls.single}
        try:
            return table[name](n_sites)
        except KeyError:
            raise InputError(f"unknown initial condition {name!r}; "
                             f"choose from {sorted(table)}") from None


# -- models -----------------------------------------------------------------

@dataclass(frozen=True)
class BcrwConstants:
    """Phase factor ``phi`` and potential ``c0`` of a branching-coalescing walk."""

    phi: float
    c0: float

    @classmethod
    def from_rates(cls, p: float, q: float, l: float, r: float) -> "BcrwConstants":
        phi = math.sqrt(1.0 + l / q) if q > 0 else math.sqrt(1.0 + r / p)
        c0 = 0.5 * (p + q) * (phi - 1.0) ** 2
        return cls(phi, c0)


@dataclass(frozen=True)
class BCRW:
    """Branching coalescing random walks with homogeneous rates.

    ``q``/``p`` are left/right jump rates and ``l``/``r`` left/right
    branching rates.  By default the Pfaffian rate condition is enforced:
    ``p*l == q*r`` with ``p, q > 0``, or one of the one-sided cases
    ``p = r = 0 < q, l`` and ``q = l = 0 < p, r``.  Pass ``strict=False``
    to build a model violating it (useful for probing).
    """

    p: float
    q: float
    l: float
    r: float
    strict: bool = field(default=True, compare=False)

    kind = "bcrw"

    def __post_init__(self):
        rates = (self.p, self.q, self.l, self.r)
        if not all(math.isfinite(v) and v >= 0 for v in rates):
            raise InputError(f"BCRW rates must be finite and nonnegative, got {rates}")
        if self.p == 0 and self.q == 0:
            raise InputError("BCRW needs p + q > 0")
        if self.strict and not self.satisfies_rate_condition():
            raise InputError(
                f"BCRW rates {rates} violate p*l == q*r (with p, q > 0) "
                "and are not one of the one-sided cases")

    def satisfies_rate_condition(self) -> bool:
        p, q, l, r = self.p, self.q, self.l, self.r
        if p > 0 and q > 0:
            return abs(p * l - q * r) <= RATE_RTOL * max(1.0, p * l, q * r)
        if p == 0 and r == 0:
            return q > 0 and l > 0
        if q == 0 and l == 0:
            return p > 0 and r > 0
        return False

    @property
    def constants(self) -> BcrwConstants:
        return BcrwConstants.from_rates(self.p, self.q, self.l, self.r)

    @property
    def phi(self) -> float:
        return self.constants.phi

    @property
    def c0(self) -> float:
        return self.constants.c0

    @property
    def total_rate(self) -> float:
        return self.p + self.q + self.l + self.r


def _rate_array(values, n: int, name: str) -> tuple:
    a = np.broadcast_to(np.asarray(values, dtype=float), (n,)).copy()
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise InputError(f"ARWPI rates {name} must be finite and nonnegative")
    return tuple(float(v) for v in a)


@dataclass(frozen=True)
class ARWPI:
    """Annihilating random walks with pairwise immigration.

    Per-site rates over the window, indexed like the generator:
    ``q[x]`` is the rate of a jump ``x -> x-1``, ``p[x]`` the rate of a
    jump ``x-1 -> x`` and ``m[x]`` the rate at which a pair lands on
    ``{x-1, x}``.  Entries at ``x = 0`` would cross the left edge and are
    ignored under truncation.
    """

    p: tuple
    q: tuple
    m: tuple

    kind = "arwpi"

    def __post_init__(self):
        n = len(self.p)
        if n < 1 or len(self.q) != n or len(self.m) != n:
            raise StructureError("ARWPI rate arrays must share a positive length")
        object.__setattr__(self, "p", _rate_array(self.p, n, "p"))
        object.__setattr__(self, "q", _rate_array(self.q, n, "q"))
        object.__setattr__(self, "m", _rate_array(self.m, n, "m"))

    @classmethod
    def homogeneous(cls, n_sites: int, p: float, q: float, m: float) -> "ARWPI":
        return cls((p,) * n_sites, (q,) * n_sites, (m,) * n_sites)

    @classmethod
    def single_source(cls, n_sites: int, p: float, q: float, site: int,
                      m: float) -> "ARWPI":
        """Immigration only onto the pair ``{site-1, site}``."""
        mm = [0.0] * n_sites
        mm[site] = m
        return cls((p,) * n_sites, (q,) * n_sites, tuple(mm))

    @property
    def n_sites(self) -> int:
        return len(self.p)

    @property
    def is_homogeneous(self) -> bool:
        return (len(set(self.p[1:])) <= 1 and len(set(self.q[1:])) <= 1
                and len(set(self.m[1:])) <= 1)


ModelSpec = Union[BCRW, ARWPI]


def _kind(model) -> str:
    if isinstance(model, str):
        if model not in ("bcrw", "arwpi"):
            raise InputError(f"unknown model kind {model!r}")
        return model
    return model.kind


# -- single transitions -----------------------------------------------------

def _check_move(eta: OccupancyConfig, src: int, dst: int) -> bool:
    """Validate a nearest-neighbour move; False if the target is outside."""
    n = eta.n_sites
    if abs(src - dst) != 1:
        raise InputError(f"sites {src} and {dst} are not neighbours")
    if not 0 <= src < n:
        raise InputError(f"source {src} outside window of {n}")
    if eta[src] != 1:
        raise InputError(f"source site {src} is empty")
    return 0 <= dst < n


def apply_jump(eta: OccupancyConfig, src: int, dst: int, model="bcrw") -> OccupancyConfig:
    """Move the particle at ``src`` to ``dst``.

    Coalescing models merge with an occupant of ``dst``; annihilating
    models remove both.  A target outside the window rejects the move and
    ``eta`` is returned unchanged.
    """
    if not _check_move(eta, src, dst):
        return eta
    b = eta.bits.copy()
    b[src] = 0
    if _kind(model) == "bcrw":
        b[dst] = 1
    else:
        b[dst] ^= 1
    return OccupancyConfig(b)


def apply_branch(eta: OccupancyConfig, src: int, dst: int) -> OccupancyConfig:
    """Place a copy of the particle at ``src`` onto ``dst`` (coalescing)."""
    if not _check_move(eta, src, dst):
        return eta
    b = eta.bits.copy()
    b[dst] = 1
    return OccupancyConfig(b)


def apply_immigration(eta: OccupancyConfig, x: int) -> OccupancyConfig:
    """Pair immigration onto ``{x-1, x}``: both sites flip."""
    if not 1 <= x < eta.n_sites:
        raise InputError(f"pair {{{x - 1}, {x}}} not inside window of {eta.n_sites}")
    b = eta.bits.copy()
    b[x - 1] ^= 1
    b[x] ^= 1
    return OccupancyConfig(b)


# -- exact engine ------------------------------------------------------------

@lru_cache(maxsize=None)
def _states(n: int) -> np.ndarray:
    s = np.arange(1 << n, dtype=np.int64)
    s.setflags(write=False)
    return s


def _check_exact_size(n: int):
    if n < 1:
        raise InputError("window must contain at least one site")
    if n > MAX_EXACT_SITES:
        raise WindowTooLargeError(
            f"exact engine is capped at N={MAX_EXACT_SITES} sites "
            f"({1 << MAX_EXACT_SITES} states), got N={n}; "
            "use the Monte Carlo estimators for larger windows")


def _events(model: ModelSpec, n: int):
    """Yield (source states, target states, rate) for every event channel."""
    s = _states(n)
    if _kind(model) == "bcrw":
        p, q, l, r = model.p, model.q, model.l, model.r
        for x in range(n):
            occ = s[((s >> x) & 1) == 1]
            bx = np.int64(1 << x)
            if x >= 1:
                left = np.int64(1 << (x - 1))
                if q:
                    yield occ, (occ & ~bx) | left, q
                if l:
                    yield occ, occ | left, l
            if x + 1 < n:
                right = np.int64(1 << (x + 1))
                if p:
                    yield occ, (occ & ~bx) | right, p
                if r:
                    yield occ, occ | right, r
    else:
        if model.n_sites != n:
            raise StructureError(
                f"ARWPI rates cover {model.n_sites} sites, window has {n}")
        for x in range(n):
            occ = s[((s >> x) & 1) == 1]
            bx = np.int64(1 << x)
            if x >= 1 and model.q[x]:
                yield occ, occ ^ bx ^ np.int64(1 << (x - 1)), model.q[x]
            if x + 1 < n and model.p[x + 1]:
                yield occ, occ ^ bx ^ np.int64(1 << (x + 1)), model.p[x + 1]
            if x >= 1 and model.m[x]:
                yield s, s ^ np.int64(3 << (x - 1)), model.m[x]


def build_generator(model: ModelSpec, n_sites: int | None = None) -> sp.csr_matrix:
    """Rate matrix ``Q`` (row = from-state) of the model on ``[0, N)``.

    Off-diagonal ``Q[a, b]`` is the total rate of events taking mask ``a``
    to mask ``b != a``; rows sum to zero.
    """
    if n_sites is None:
        if _kind(model) != "arwpi":
            raise InputError("window size required for BCRW")
        n_sites = model.n_sites
    _check_exact_size(n_sites)
    size = 1 << n_sites
    rows, cols, vals = [], [], []
    for src, dst, rate in _events(model, n_sites):
        keep = src != dst
        rows.append(src[keep])
        cols.append(dst[keep])
        vals.append(np.full(int(keep.sum()), float(rate)))
    if rows:
        rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    Q = sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    Q.sum_duplicates()
    out = np.asarray(Q.sum(axis=1)).ravel()
    return (Q - sp.diags(out)).tocsr()


@dataclass(frozen=True, eq=False)
class StateDistribution:
    """Probability vector over the ``2**N`` configurations of a window."""

    n_sites: int
    probs: np.ndarray

    def __post_init__(self):
        _check_exact_size(self.n_sites)
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (1 << self.n_sites,):
            raise StructureError(f"need {1 << self.n_sites} probabilities, got {p.shape}")
        if not np.all(np.isfinite(p)) or p.min() < -1e-10:
            raise InputError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise InputError(f"probabilities sum to {p.sum()!r}, not 1")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def point_mass(cls, eta: OccupancyConfig) -> "StateDistribution":
        p = np.zeros(1 << eta.n_sites)
        p[eta.mask] = 1.0
        return cls(eta.n_sites, p)

    @classmethod
    def product_bernoulli(cls, thetas: Sequence[float]) -> "StateDistribution":
        th = np.asarray(thetas, dtype=float)
        n = th.size
        _check_exact_size(n)
        if np.any(th < 0) or np.any(th > 1):
            raise InputError("Bernoulli parameters must lie in [0, 1]")
        s = _states(n)
        p = np.ones(1 << n)
        for x in range(n):
            bit = (s >> x) & 1
            p *= np.where(bit == 1, th[x], 1.0 - th[x])
        return cls(n, p)

    def total_variation(self, other: "StateDistribution") -> float:
        return 0.5 * float(np.abs(self.probs - other.probs).sum())


def _as_distribution(initial, n_sites: int | None = None) -> StateDistribution:
    if isinstance(initial, StateDistribution):
        return initial
    if isinstance(initial, OccupancyConfig):
        return StateDistribution.point_mass(initial)
    raise InputError(f"cannot interpret {type(initial).__name__} as an initial law")


def evolve_exact(gen: sp.spmatrix, initial, t):
    """Solve the master equation ``dP/dt = Q^T P`` from ``initial``.

    ``t`` may be a scalar (returns one :class:`StateDistribution`) or a
    sequence of times (returns a list).  The action of the matrix
    exponential is computed with the truncated-Taylor scheme of
    Al-Mohy and Higham, which preserves total probability to rounding.
    """
    dist = _as_distribution(initial)
    if gen.shape != (dist.probs.size,) * 2:
        raise StructureError("generator and distribution sizes differ")
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0) or not np.all(np.isfinite(times)):
        raise InputError("evolution time must be finite and nonnegative")
    QT = gen.T.tocsr()
    out = []
    for tt in times:
        p = dist.probs.copy() if tt == 0 else expm_multiply(QT * tt, dist.probs)
        out.append(StateDistribution(dist.n_sites, p))
    return out[0] if np.ndim(t) == 0 else out


def _interval_mask(n: int, y: int, z: int) -> np.int64:
    if not (0 <= y <= z <= n):
        raise InputError(f"interval [{y}, {z}) not inside window [0, {n})")
    return np.int64(((1 << z) - 1) ^ ((1 << y) - 1))


def empty_interval_prob(dist: StateDistribution, y: int, z: int) -> float:
    """``P[no particle in [y, z)]``."""
    m = _interval_mask(dist.n_sites, y, z)
    s = _states(dist.n_sites)
    return float(dist.probs[(s & m) == 0].sum())


def spin_parity(dist: StateDistribution, y: int, z: int) -> float:
    """``E[(-1)^{number of particles in [y, z)}]``."""
    m = _interval_mask(dist.n_sites, y, z)
    s = _states(dist.n_sites)
    sign = 1.0 - 2.0 * (np.bitwise_count(s & m) & 1)
    return float(dist.probs @ sign)


def exact_intensity(dist: StateDistribution, points: Sequence[int]) -> float:
    """``E[eta(x_1) ... eta(x_n)]`` for distinct increasing sites."""
    pts = list(points)
    if any(b <= a for a, b in zip(pts, pts[1:])):
        raise InputError("points must be strictly increasing")
    if pts and not (0 <= pts[0] and pts[-1] < dist.n_sites):
        raise InputError("points must lie in the window")
    m = np.int64(sum(1 << x for x in pts))
    s = _states(dist.n_sites)
    return float(dist.probs[(s & m) == m].sum())


def sigma_expectation(dist: StateDistribution, ys: Sequence[int], kind: str) -> float:
    """Expectation of the multi-interval duality function.

    ``ys = (y1 <= y2 <= ... <= y2n)`` defines the blocks
    ``[y1, y2), [y3, y4), ...``.  ``kind="empty"`` gives the probability
    that all blocks are empty, ``kind="spin"`` the expected product of
    block parities.
    """
    ys = list(ys)
    if len(ys) % 2:
        raise StructureError("need an even number of interval endpoints")
    if any(b < a for a, b in zip(ys, ys[1:])):
        raise InputError("endpoints must be nondecreasing")
    s = _states(dist.n_sites)
    m = np.int64(0)
    for a, b in zip(ys[0::2], ys[1::2]):
        m |= _interval_mask(dist.n_sites, a, b)
    if kind == "empty":
        return float(dist.probs[(s & m) == 0].sum())
    if kind == "spin":
        sign = 1.0 - 2.0 * (np.bitwise_count(s & m) & 1)
        return float(dist.probs @ sign)
    raise InputError(f"unknown duality kind {kind!r}")
