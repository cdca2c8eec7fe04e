"""Scalar duality kernels ``K_t(y, z)`` of the two lattice models.

Two independent routes are provided:

* definitional: evolve the full law with the exact engine and read off
  ``phi**(z-y) * P[no particle in [y, z)]`` (BCRW) or
  ``E[(-1)**eta[y, z)]`` (ARWPI);
* pair equation: solve the closed two-walker lattice equation satisfied by
  the same function, never touching configurations.

Agreement of the two is exactly what the duality relations assert; it is checked
by the test-suite.

On the window ``[0, N)`` with truncated dynamics the dual walkers live on
``0 <= y < z <= N``.  A walker sitting at ``0`` or ``N`` is frozen (every
event that could move it crosses the window edge) and carries no
potential.  Interior BCRW walkers jump right at ``q*phi`` and left at
``p*phi``; the potential is ``(p+q)*phi - p - q - r`` on the left
endpoint and ``(p+q)*phi - p - q - l`` on the right one, which sum to
``-2*c0``.  Interior ARWPI walkers at ``x`` jump right at ``q[x]``, left
at ``p[x]`` and feel ``-2*m[x]``.  ``K(y, y) = 1`` acts as a source.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import InputError, StructureError
from .lattice import (
    ARWPI,
    BCRW,
    OccupancyConfig,
    StateDistribution,
    _states,
    build_generator,
    evolve_exact,
)

__all__ = [
    "ScalarKernelTable",
    "InitialKernel",
    "kernel_from_distribution",
    "kernel_definitional",
    "kernel_pair_pde_bcrw",
    "kernel_pair_pde_arwpi",
    "kernel_on_lattice_bcrw",
    "kernel_on_lattice_arwpi",
    "solve_translation_invariant",
    "equilibrium_theta",
    "stationary_theta",
    "convergence_bound_check",
]


@dataclass(frozen=True, eq=False)
class ScalarKernelTable:
    """Values ``K_t(y, z)`` for ``0 <= y <= z <= N``.

    ``values`` is an ``(N+1, N+1)`` array; entries below the diagonal are
    NaN and never read.
    """

    n_sites: int
    t: float
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        n = self.n_sites
        if v.shape != (n + 1, n + 1):
            raise StructureError(f"table for N={n} must be {(n + 1, n + 1)}, got {v.shape}")
        iu = np.triu_indices(n + 1)
        if not np.all(np.isfinite(v[iu])):
            raise InputError("kernel table has non-finite entries")
        v[np.tril_indices(n + 1, -1)] = np.nan
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __call__(self, y: int, z: int) -> float:
        if not (0 <= y <= z <= self.n_sites):
            raise InputError(f"pair ({y}, {z}) outside table for N={self.n_sites}")
        return float(self.values[y, z])

    def pairs(self, margin: int = 0):
        """Pairs ``y < z`` with ``y >= margin`` and ``z <= N - margin``."""
        n = self.n_sites
        return [(y, z) for y in range(margin, n + 1 - margin)
                for z in range(y + 1, n + 1 - margin)]

    def max_abs_diff(self, other: "ScalarKernelTable", margin: int = 0) -> float:
        if other.n_sites != self.n_sites:
            raise StructureError("tables cover different windows")
        pr = self.pairs(margin)
        if not pr:
            return 0.0
        y, z = np.array(pr).T
        return float(np.max(np.abs(self.values[y, z] - other.values[y, z])))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("y,z,K\n")
        for y in range(self.n_sites + 1):
            for z in range(y, self.n_sites + 1):
                buf.write(f"{y},{z},{self.values[y, z]:.17g}\n")
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class InitialKernel:
    """Time-zero kernel together with how it was produced."""

    values: np.ndarray
    provenance: str

    @property
    def n_sites(self) -> int:
        return self.values.shape[0] - 1

    def table(self) -> ScalarKernelTable:
        return ScalarKernelTable(self.n_sites, 0.0, self.values)

    @staticmethod
    def _blocks(weights: np.ndarray, base: np.ndarray) -> np.ndarray:
        # K(y, z) = base**(z-y) * prod_{k in [y, z)} weights[k]
        n = weights.size
        out = np.full((n + 1, n + 1), np.nan)
        for y in range(n + 1):
            acc = 1.0
            out[y, y] = 1.0
            for z in range(y + 1, n + 1):
                acc *= base * weights[z - 1]
                out[y, z] = acc
        return out

    @classmethod
    def bcrw_deterministic(cls, eta: OccupancyConfig, phi: float) -> "InitialKernel":
        return cls(cls._blocks(1.0 - eta.bits.astype(float), phi), "deterministic")

    @classmethod
    def bcrw_bernoulli(cls, thetas: Sequence[float], phi: float) -> "InitialKernel":
        th = np.asarray(thetas, dtype=float)
        return cls(cls._blocks(1.0 - th, phi), "product-bernoulli")

    @classmethod
    def arwpi_deterministic(cls, eta: OccupancyConfig) -> "InitialKernel":
        return cls(cls._blocks(1.0 - 2.0 * eta.bits.astype(float), 1.0), "deterministic")

    @classmethod
    def arwpi_bernoulli(cls, thetas: Sequence[float]) -> "InitialKernel":
        th = np.asarray(thetas, dtype=float)
        return cls(cls._blocks(1.0 - 2.0 * th, 1.0), "product-bernoulli")

    @classmethod
    def for_model(cls, model, eta: OccupancyConfig) -> "InitialKernel":
        if model.kind == "bcrw":
            return cls.bcrw_deterministic(eta, model.phi)
        return cls.arwpi_deterministic(eta)


# -- definitional route -----------------------------------------------------

def kernel_from_distribution(model, dist: StateDistribution, t: float = 0.0) -> ScalarKernelTable:
    """Kernel table read off a law on configurations."""
    n = dist.n_sites
    s = _states(n)
    P = dist.probs
    K = np.full((n + 1, n + 1), np.nan)
    for y in range(n + 1):
        K[y, y] = 1.0
        acc = np.zeros(s.size, dtype=np.int64)
        for z in range(y + 1, n + 1):
            acc |= s & np.int64(1 << (z - 1))
            if model.kind == "bcrw":
                K[y, z] = model.phi ** (z - y) * P[acc == 0].sum()
            else:
                K[y, z] = P @ (1.0 - 2.0 * (np.bitwise_count(acc) & 1))
    return ScalarKernelTable(n, float(t), K)


def kernel_definitional(model, eta0, t, n_sites: int | None = None):
    """Kernel from the exact master equation.

    ``eta0`` is an :class:`OccupancyConfig` or a :class:`StateDistribution`.
    ``t`` may be a scalar or a sequence (then a list of tables is returned).
    """
    if isinstance(eta0, OccupancyConfig):
        n = eta0.n_sites
    elif isinstance(eta0, StateDistribution):
        n = eta0.n_sites
    else:
        raise InputError("initial state must be a configuration or a distribution")
    if n_sites is not None and n_sites != n:
        raise StructureError(f"initial state has {n} sites, window has {n_sites}")
    gen = build_generator(model, n)
    dists = evolve_exact(gen, eta0, t)
    if np.ndim(t) == 0:
        return kernel_from_distribution(model, dists, t)
    return [kernel_from_distribution(model, d, tt) for d, tt in zip(dists, t)]


# -- pair equation route ------------------------------------------------------

def _pair_index(n: int) -> np.ndarray:
    idx = -np.ones((n + 1, n + 1), dtype=np.int64)
    iu = np.triu_indices(n + 1, 1)
    idx[iu] = np.arange(iu[0].size)
    return idx


def _pair_system(n, right_y, left_y, pot_y, right_z, left_z, pot_z):
    """Sparse generator of the two-walker system on ``{0 <= y < z <= N}``.

    Rate arrays are indexed by walker position ``0..N``.  Returns ``(A, b)``
    such that ``u' = A u + b`` where ``b`` collects jumps onto the diagonal
    (value 1).
    """
    idx = _pair_index(n)
    y, z = np.triu_indices(n + 1, 1)
    m = y.size
    rows, cols, vals = [], [], []
    b = np.zeros(m)
    diag = pot_y[y] + pot_z[z]

    def move(rate, ny, nz):
        nonlocal diag
        rate = np.asarray(rate, dtype=float)
        act = rate > 0
        onto = act & (ny == nz)
        b[onto] += rate[onto]
        inside = act & (ny < nz)
        rows.append(np.flatnonzero(inside))
        cols.append(idx[ny[inside], nz[inside]])
        vals.append(rate[inside])
        diag = diag - np.where(act, rate, 0.0)

    move(right_y[y], y + 1, z)
    move(left_y[y], np.maximum(y - 1, 0), z)
    move(right_z[z], y, np.minimum(z + 1, n))
    move(left_z[z], y, z - 1)
    rows.append(np.arange(m))
    cols.append(np.arange(m))
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(m, m))
    return A, b


def _solve_affine(A: sp.spmatrix, b: np.ndarray, u0: np.ndarray, times) -> list:
    """Exact solution of ``u' = A u + b`` via an augmented exponential."""
    m = u0.size
    aug = sp.bmat([[A, sp.csr_matrix(b.reshape(-1, 1))],
                   [None, sp.csr_matrix((1, 1))]]).tocsr()
    w0 = np.append(u0, 1.0)
    out = []
    for tt in times:
        out.append(u0.copy() if tt == 0 else expm_multiply(aug * tt, w0)[:m])
    return out


def _times(t):
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0) or not np.all(np.isfinite(times)):
        raise InputError("time must be finite and nonnegative")
    return times


def _to_tables(n, sols, times, scalar):
    iu = np.triu_indices(n + 1, 1)
    tabs = []
    for u, tt in zip(sols, times):
        K = np.full((n + 1, n + 1), np.nan)
        K[iu] = u
        np.fill_diagonal(K, 1.0)
        tabs.append(ScalarKernelTable(n, float(tt), K))
    return tabs[0] if scalar else tabs


def _initial_vector(K0, n: int) -> np.ndarray:
    vals = K0.values if isinstance(K0, (InitialKernel, ScalarKernelTable)) else np.asarray(K0)
    if vals.shape != (n + 1, n + 1):
        raise StructureError(f"initial kernel must cover N={n}")
    return np.array(vals[np.triu_indices(n + 1, 1)], dtype=float)


def kernel_pair_pde_bcrw(model: BCRW, K0: InitialKernel, t, n_sites: int | None = None):
    """BCRW kernel from the two-walker equation on the window.

    Parameters
    ----------
    model : BCRW
        Supplies ``p, q`` and the constants ``phi, c0``.
    K0 : InitialKernel
        Time-zero kernel on the same window.
    t : float or sequence of float
    """
    n = K0.n_sites if n_sites is None else n_sites
    phi = model.phi
    p, q = model.p, model.q
    interior = np.ones(n + 1)
    interior[0] = interior[n] = 0.0
    right = q * phi * interior
    left = p * phi * interior
    base = (p + q) * phi - p - q
    pot_y = (base - model.r) * interior
    pot_z = (base - model.l) * interior
    A, b = _pair_system(n, right, left, pot_y, right, left, pot_z)
    times = _times(t)
    sols = _solve_affine(A, b, _initial_vector(K0, n), times)
    return _to_tables(n, sols, times, np.ndim(t) == 0)


def kernel_pair_pde_arwpi(model: ARWPI, K0: InitialKernel, t, n_sites: int | None = None):
    """ARWPI kernel from the two-walker equation with site-dependent rates."""
    n = model.n_sites
    if n_sites is not None and n_sites != n:
        raise StructureError(f"rate arrays cover {n} sites, window has {n_sites}")
    if K0.n_sites != n:
        raise StructureError(f"initial kernel covers {K0.n_sites} sites, rates cover {n}")
    interior = np.ones(n + 1)
    interior[0] = interior[n] = 0.0
    q = np.append(model.q, 0.0) * interior
    p = np.append(model.p, 0.0) * interior
    pot = -2.0 * np.append(model.m, 0.0) * interior
    A, b = _pair_system(n, q, p, pot, q, p, pot)
    times = _times(t)
    sols = _solve_affine(A, b, _initial_vector(K0, n), times)
    return _to_tables(n, sols, times, np.ndim(t) == 0)


# -- translation-invariant kernels on the whole lattice ----------------------

def solve_translation_invariant(rate: float, potential: float, k0: Callable[[np.ndarray], np.ndarray],
                                k0_far: float, t, d_max: int) -> np.ndarray:
    """Kernel ``K_t(d)``, ``d = z - y = 0..d_max``, for translation-invariant data on Z.

    Solves ``K'(d) = rate * (K(d+1) + K(d-1) - 2 K(d)) - potential * K(d)``
    with ``K(0) = 1``.  The value beyond ``d_max`` is taken to be the
    far-field solution ``k0_far * exp(-potential * t)``, which is exact up
    to the (super-exponentially small) probability that the difference
    walk travels ``d_max`` sites by time ``t``.
    """
    if rate < 0 or potential < 0:
        raise InputError("rate and potential must be nonnegative")
    times = _times(t)
    m = d_max
    d = np.arange(1, m + 1)
    main = np.full(m, -2.0 * rate - potential)
    off = np.full(m - 1, rate)
    A = sp.diags([off, main, off], [-1, 0, 1], shape=(m, m), format="lil")
    # augmented state: [K(1..m), 1, far]
    aug = sp.lil_matrix((m + 2, m + 2))
    aug[:m, :m] = A
    aug[0, m] = rate
    aug[m - 1, m + 1] = rate
    aug[m + 1, m + 1] = -potential
    aug = aug.tocsr()
    w0 = np.concatenate([np.asarray(k0(d), dtype=float), [1.0, k0_far]])
    out = []
    for tt in times:
        w = w0 if tt == 0 else expm_multiply(aug * tt, w0)
        out.append(np.concatenate([[1.0], w[:m]]))
    return out[0] if np.ndim(t) == 0 else np.array(out)


def kernel_on_lattice_bcrw(model: BCRW, t, d_max: int, initial: str = "full") -> np.ndarray:
    """BCRW kernel on Z as a function of ``d = z - y`` for homogeneous starts.

    ``initial="full"`` is ``eta0 = 1`` everywhere (``K0(d) = 0`` for ``d > 0``),
    ``initial="empty"`` is ``eta0 = 0`` (``K0(d) = phi**d``).
    """
    phi = model.phi
    rate = (model.p + model.q) * phi
    pot = 2.0 * model.c0
    if initial == "full":
        return solve_translation_invariant(rate, pot, np.zeros_like, 0.0, t, d_max)
    if initial == "empty":
        # K grows like phi**d; only usable when phi**d_max stays moderate
        return solve_translation_invariant(rate, pot, lambda d: phi ** d.astype(float),
                                           phi ** (d_max + 1), t, d_max)
    raise InputError(f"unknown homogeneous start {initial!r}")


def kernel_on_lattice_arwpi(p: float, q: float, m: float, t, d_max: int,
                            initial: str = "empty") -> np.ndarray:
    """Homogeneous ARWPI kernel on Z as a function of ``d = z - y``.

    Each of the two dual walkers feels ``-2m``, so the difference walk has
    total jump rate ``p + q`` in each direction and potential ``4m``.
    """
    if initial != "empty":
        raise InputError(f"only the empty start is translation invariant here, got {initial!r}")
    return solve_translation_invariant(p + q, 4.0 * m, np.ones_like, 1.0, t, d_max)


# -- equilibria ----------------------------------------------------------------

def equilibrium_theta(m: float, p: float, q: float) -> tuple[float, float]:
    """Root ``theta`` of ``theta + 1/theta - 2 = 2m/(p+q)`` and ``(1-theta)/2``.

    Returns the root in ``(0, 1]`` together with the intensity
    ``theta_hat = (1 - theta)/2`` of the associated product-Bernoulli law.
    Note that the immigration rate entering here is the *pair flux* per
    bond; a pair immigrates on bond ``{x-1, x}`` at rate ``m`` in the
    generator, and each of the two dual walkers then sees ``2m``.  For the
    stationary law of the generator with immigration rate ``m`` use
    :func:`stationary_theta`.
    """
    if p + q <= 0:
        raise InputError("need p + q > 0")
    if m < 0 or math.isnan(m):
        raise InputError("need m >= 0")
    if math.isinf(m):
        return 0.0, 0.5
    c = 2.0 * m / (p + q)
    # smaller root of theta^2 - (2 + c) theta + 1, written without cancellation
    theta = 1.0 / (1.0 + c / 2.0 + math.sqrt(c + c * c / 4.0))
    hat = 0.5 * (1.0 - theta)
    a = m / (p + q)
    alt = 0.5 * (math.sqrt(a * a + 2.0 * a) - a)
    if abs(hat - alt) > 1e-12 * max(1.0, alt):
        raise ArithmeticError("theta_hat closed forms disagree")
    return theta, hat


def stationary_theta(m: float, p: float, q: float) -> tuple[float, float]:
    """``(theta, theta_hat)`` of the stationary Bernoulli law of ARWPI.

    For the generator with pair-immigration rate ``m`` per bond and jump
    rates ``p, q`` the stationary kernel is ``theta**(z-y)`` with
    ``theta + 1/theta - 2 = 4m/(p+q)``, i.e. :func:`equilibrium_theta`
    evaluated at ``2m``.
    """
    return equilibrium_theta(2.0 * m, p, q)


def convergence_bound_check(model: ARWPI, eta0: OccupancyConfig, t_grid: Sequence[float],
                            margin: int = 3, route: str = "exact") -> float:
    """Largest ``|K_t - K_inf| - 2 exp(-2 m t)`` over the grid.

    ``K_inf(y, z) = theta**(z-y)`` with ``theta`` from :func:`stationary_theta`.
    Only pairs with ``margin <= y < z <= N - margin`` enter: pairs touching
    the window edge keep memory of the truncated boundary (for instance
    ``K(0, N)`` is the conserved total parity) and have no infinite-volume
    limit.
    """
    if not model.is_homogeneous:
        raise InputError("bound is stated for homogeneous rates")
    m, p, q = model.m[1], model.p[1], model.q[1]
    if m <= 0:
        raise InputError("bound needs m > 0")
    theta, _ = stationary_theta(m, p, q)
    times = list(t_grid)
    if route == "exact":
        tabs = kernel_definitional(model, eta0, times)
    elif route == "pde":
        tabs = kernel_pair_pde_arwpi(model, InitialKernel.arwpi_deterministic(eta0), times)
    else:
        raise InputError(f"unknown route {route!r}")
    worst = -math.inf
    for tab, tt in zip(tabs, times):
        pr = tab.pairs(margin)
        if not pr:
            raise InputError("margin leaves no pairs in the window")
        y, z = np.array(pr).T
        dev = np.abs(tab.values[y, z] - theta ** (z - y).astype(float))
        worst = max(worst, float(dev.max()) - 2.0 * math.exp(-2.0 * m * tt))
    return worst
