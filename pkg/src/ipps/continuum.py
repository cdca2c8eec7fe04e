"""Continuum Pfaffian kernels obtained as diffusive limits.

Notation used throughout: ``d = z - y``, ``s = sqrt(8 alpha t)``,
``a = sqrt(2 beta t)``, ``k = sqrt(beta/alpha)``.  The difference of two
rate-``2 alpha`` Brownian motions started at ``y < z`` has variance rate
``4 alpha`` and first hits zero at ``tau`` with
``P[tau <= t] = erfc(d/s)``; the potential ``2 beta`` turns this into the
Laplace-type transforms below.

* ``kernel_b(d) = E[exp(-2 beta tau); tau <= t]`` (zero initial data)
* ``kernel_a(d) = E[exp(-2 beta (t ^ tau))]``     (unit initial data)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numba as nb
import numpy as np
import scipy.sparse as sp
from scipy import integrate, special
from scipy.sparse.linalg import splu

from .errors import InputError
from .montecarlo import _normal, _seed, _seed_state, _uniform
from .pointprocess import PfaffianKernel

__all__ = [
    "ContinuumParams",
    "kernel_a",
    "kernel_a_derivs",
    "kernel_b",
    "kernel_b_derivs",
    "kernel_fk_quadrature",
    "density_a",
    "density_a_erf",
    "poisson_kernel",
    "kernel_a_pfaffian",
    "kernel_b_pfaffian",
    "kernel_zero_start_quadrature_pfaffian",
    "psi",
    "kernel_c",
    "kernel_c_derivs",
    "kernel_c_pfaffian",
    "sticky_pair_joint",
    "sticky_pair_simulate",
    "firework_stationary",
    "firework_derivs",
    "firework_intensity",
    "firework_kernel",
    "firework_finite_beta",
    "NetSolution",
    "net_kernel",
    "solve_net",
    "pde_residual",
    "gnuplot_script",
    "lattice_continuum_error",
    "GRID_PAIRS",
]


@dataclass(frozen=True)
class ContinuumParams:
    """Diffusion scale ``alpha``, reaction scale ``beta``, net drift ``b``, time ``t``."""

    alpha: float = 1.0
    beta: float = 1.0
    t: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise InputError("alpha must be positive")
        for name in ("beta", "t", "b"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise InputError(f"{name} must be finite and nonnegative")

    @property
    def k(self) -> float:
        return math.sqrt(self.beta / self.alpha)


def _gap(y, z):
    d = np.asarray(z, dtype=float) - np.asarray(y, dtype=float)
    if np.any(d < 0):
        raise InputError("need y <= z")
    return d


def _pieces(P: ContinuumParams, d):
    """Return (A, dA, ddA, h) for the zero-start kernel at gaps ``d``."""
    d = np.asarray(d, dtype=float)
    k, t = P.k, P.t
    s = math.sqrt(8.0 * P.alpha * t)
    a = math.sqrt(2.0 * P.beta * t)
    g = np.exp(-(d / s) ** 2 - a * a)  # common Gaussian factor
    xp = d / s + a
    xm = d / s - a
    plus = special.erfcx(xp) * g  # e^{kd} erfc(d/s + a)
    minus = np.where(xm >= 0, special.erfcx(np.maximum(xm, 0.0)) * g,
                     np.exp(-k * d) * special.erfc(xm))  # e^{-kd} erfc(d/s - a)
    A = 0.5 * (minus + plus)
    h = 2.0 / (s * math.sqrt(math.pi)) * g
    half = 0.5 * k * (plus - minus)
    dA = half - h
    ddA = k * k * A + 2.0 * d / (s * s) * h
    return A, half, dA, ddA, h


def kernel_b(P: ContinuumParams, y, z):
    """Zero-initial-data kernel ``E[exp(-2 beta tau); tau <= t]``; ``K(y, y) = 1``."""
    d = _gap(y, z)
    if P.t == 0:
        return np.where(d == 0, 1.0, 0.0)[()]
    return _pieces(P, d)[0][()]


def kernel_b_derivs(P: ContinuumParams, d):
    """``(K, K', K'')`` of :func:`kernel_b` as functions of the gap ``d >= 0``."""
    if P.t <= 0:
        raise InputError("derivatives need t > 0")
    A, _, dA, ddA, _ = _pieces(P, _gap(0.0, d))
    return A[()], dA[()], ddA[()]


def kernel_a(P: ContinuumParams, y, z):
    """Unit-initial-data kernel ``E[exp(-2 beta (t ^ tau))]``."""
    d = _gap(y, z)
    if P.t == 0:
        return np.ones_like(d)[()]
    A = _pieces(P, d)[0]
    s = math.sqrt(8.0 * P.alpha * P.t)
    return (A + math.exp(-2.0 * P.beta * P.t) * special.erf(d / s))[()]


def kernel_a_derivs(P: ContinuumParams, d):
    """``(K, K', K'')`` of :func:`kernel_a` in the gap variable."""
    if P.t <= 0:
        raise InputError("derivatives need t > 0")
    d = _gap(0.0, d)
    A, half, _, _, _ = _pieces(P, d)
    s = math.sqrt(8.0 * P.alpha * P.t)
    K = A + math.exp(-2.0 * P.beta * P.t) * special.erf(d / s)
    return K[()], half[()], (P.k ** 2 * A)[()]


def kernel_fk_quadrature(P: ContinuumParams, d: float, start: str = "zero", deriv: int = 0,
                         tol: float = 1e-13) -> float:
    """Feynman-Kac kernel by direct quadrature over the hitting-time law.

    With ``lam = 2 beta`` and ``F(s) = P[tau <= s] = erfc(d / sqrt(8 alpha s))``,
    ``E[exp(-lam tau); tau <= t] = exp(-lam t) F(t) + int_0^t lam exp(-lam s) F(s) ds``;
    the unit start adds ``exp(-lam t) (1 - F(t))``.  Substituting ``s = u**2``
    removes the endpoint singularity.  ``deriv`` in ``{0, 1, 2}`` selects
    the derivative in ``d``, taken under the integral (one-sided at
    ``d = 0``).
    """
    if P.t <= 0:
        raise InputError("quadrature route needs t > 0")
    if d < 0:
        raise InputError("gap must be nonnegative")
    if deriv not in (0, 1, 2):
        raise InputError("deriv must be 0, 1 or 2")
    lam = 2.0 * P.beta
    c = math.sqrt(8.0 * P.alpha)
    t = P.t
    rpi = 2.0 / math.sqrt(math.pi)
    if deriv == 2 and d < 1e-9 * c * math.sqrt(t):
        # mass concentrating below quadrature resolution; K'' is continuous
        d = 0.0

    def F(u):
        x = d / (c * u)
        if deriv == 0:
            return special.erfc(x)
        g = rpi * math.exp(-x * x) / (c * u)
        return -g if deriv == 1 else g * 2.0 * x / (c * u)

    def integrand(u):
        if u == 0.0:
            return 0.0
        return 2.0 * lam * u * math.exp(-lam * u * u) * F(u)

    rt = math.sqrt(t)
    brk = [min(d / c, rt * 0.999)] if 0 < d / c < rt else None
    val = 0.0
    if lam > 0:
        val, _ = integrate.quad(integrand, 0.0, rt, epsabs=tol, epsrel=tol, limit=400, points=brk)
    val += math.exp(-lam * t) * F(rt)
    if deriv == 2 and d == 0.0:
        # the integrand concentrates at u = 0 as d -> 0+; add its limiting mass
        val += 4.0 * lam / c ** 2
    if start == "unit":
        val += math.exp(-lam * t) * ((1.0 - F(rt)) if deriv == 0 else -F(rt))
    elif start != "zero":
        raise InputError(f"unknown start {start!r}")
    return float(val)


def density_a(P: ContinuumParams, y: float = 0.0) -> float:
    """One-point density ``-(1/2) dK/dz`` at the diagonal for unit initial data."""
    if P.t == 0:
        return 0.0
    return float(-0.5 * kernel_a_derivs(P, 0.0)[1])


def density_a_erf(P: ContinuumParams) -> float:
    """``(1/2) sqrt(beta/alpha) erf(sqrt(2 beta t))``."""
    return 0.5 * P.k * math.erf(math.sqrt(2.0 * P.beta * P.t))


# -- Pfaffian kernels ---------------------------------------------------------

def _ti_kernel(derivs: Callable, prefactor: float, diag_extra: float) -> PfaffianKernel:
    """Translation-invariant kernel from ``(K, K', K'')`` of the gap."""

    def off(y, z):
        K, d1, d2 = derivs(z - y)
        return np.array([[K, -d1], [d1, -d2]])

    d0 = derivs(0.0)[1]
    return PfaffianKernel(off, lambda y: -d0 + diag_extra, prefactor, lattice=False)


def poisson_kernel(alpha: float, beta: float) -> PfaffianKernel:
    """Large-time limit of the unit-start kernel: Poisson with rate ``sqrt(beta/alpha)/2``."""
    k = math.sqrt(beta / alpha)

    def derivs(d):
        e = math.exp(-k * d)
        return e, -k * e, k * k * e

    return _ti_kernel(derivs, 0.5, 0.0)


def kernel_a_pfaffian(P: ContinuumParams) -> PfaffianKernel:
    return _ti_kernel(lambda d: kernel_a_derivs(P, d), 0.5, 0.0)


def kernel_b_pfaffian(P: ContinuumParams) -> PfaffianKernel:
    """Branching-coalescing continuum kernel from a full start (closed form)."""
    return _ti_kernel(lambda d: kernel_b_derivs(P, d), 1.0, P.k)


def kernel_zero_start_quadrature_pfaffian(P: ContinuumParams) -> PfaffianKernel:
    """Annihilating continuum kernel from a full start, by quadrature.

    A full lattice start gives ``K0 = (-1)**(z-y)``, which averages to zero
    under diffusive scaling, so the scalar kernel solves the zero-start
    problem; the blocks carry the factor 1/2 of the annihilating model.
    """
    def derivs(d):
        return tuple(kernel_fk_quadrature(P, d, "zero", j) for j in range(3))

    return _ti_kernel(derivs, 0.5, 0.0)


# -- single seed: sticky pair ---------------------------------------------

def psi(P: ContinuumParams, x):
    """``P[R_t >= x] = (1/2) erfc((x - 2 sqrt(alpha beta) t) / sqrt(4 alpha t))``."""
    x = np.asarray(x, dtype=float)
    if P.t == 0:
        return np.where(x <= 0, 1.0, 0.0)[()]
    mu = 2.0 * math.sqrt(P.alpha * P.beta)
    return (0.5 * special.erfc((x - mu * P.t) / math.sqrt(4.0 * P.alpha * P.t)))[()]


def _dpsi(P: ContinuumParams, x):
    mu = 2.0 * math.sqrt(P.alpha * P.beta)
    v = 4.0 * P.alpha * P.t
    return -np.exp(-((x - mu * P.t) ** 2) / v) / math.sqrt(math.pi * v)


def kernel_c(P: ContinuumParams, y, z):
    """Kernel from a single particle at the origin."""
    d = _gap(y, z)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    k = P.k
    return (np.exp(k * d) * (1.0 - psi(P, y) * psi(P, -z))
            + np.exp(-k * d) * psi(P, -y) * psi(P, z))[()]


def kernel_c_derivs(P: ContinuumParams, y: float, z: float):
    """``(K, d_y K, d_z K, d_y d_z K)`` for :func:`kernel_c`."""
    if P.t <= 0:
        raise InputError("derivatives need t > 0")
    k = P.k
    E1, E2 = math.exp(k * (z - y)), math.exp(-k * (z - y))
    py, pmz, pmy, pz = (float(psi(P, v)) for v in (y, -z, -y, z))
    dy, dmz, dmy, dz = (float(_dpsi(P, v)) for v in (y, -z, -y, z))
    K = E1 * (1 - py * pmz) + E2 * pmy * pz
    Ky = -k * E1 * (1 - py * pmz) - E1 * dy * pmz + k * E2 * pmy * pz - E2 * dmy * pz
    Kz = k * E1 * (1 - py * pmz) + E1 * py * dmz - k * E2 * pmy * pz + E2 * pmy * dz
    Kyz = (-k * k * E1 * (1 - py * pmz) - k * E1 * dy * pmz
           - k * E1 * py * dmz + E1 * dy * dmz
           - k * k * E2 * pmy * pz + k * E2 * dmy * pz
           + k * E2 * pmy * dz - E2 * dmy * dz)
    return K, Ky, Kz, Kyz


def kernel_c_pfaffian(P: ContinuumParams) -> PfaffianKernel:
    def off(y, z):
        K, Ky, Kz, Kyz = kernel_c_derivs(P, y, z)
        return np.array([[K, -Kz], [-Ky, Kyz]])

    return PfaffianKernel(off, lambda y: -kernel_c_derivs(P, y, y)[2] + P.k, 1.0, lattice=False)


def sticky_pair_joint(P: ContinuumParams, y: float, z: float) -> float:
    """``P[L_t < y, R_t >= z]`` for the sticky pair started at the origin."""
    py, pmy, pz, pmz = (float(psi(P, v)) for v in (y, -y, z, -z))
    if y >= z:
        # L <= R, so {L >= y} and {R < z} are disjoint
        return pmy + pz - 1.0
    return pmy * pz - math.exp(2.0 * P.k * (z - y)) * (1.0 - pmz) * (1.0 - py)


@nb.njit(cache=True)
def _sticky_paths(alpha, beta, t, n, seed, dt, L, R):
    kappa = 2.0 * math.sqrt(beta)
    sq = math.sqrt(dt)
    for i in range(n):
        state = _seed_state(seed + np.uint64(i))
        if kappa == 0.0:
            X, T0 = 0.0, t
        else:
            s, Z, mn = 0.0, 0.0, 0.0
            C = 0.0
            while True:
                state, g = _normal(state)
                Zn = Z + sq * g + kappa * dt
                # exact minimum of the Brownian bridge between Z and Zn
                state, u = _uniform(state)
                bm = 0.5 * (Z + Zn - math.sqrt((Zn - Z) ** 2 - 2.0 * dt * math.log(u)))
                mnn = min(mn, bm)
                Cn = s + dt + max(0.0, -mnn) / kappa
                if Cn >= t:
                    f = (t - C) / (Cn - C)
                    state, g = _normal(state)
                    Zs = Z + f * (Zn - Z) + math.sqrt(f * (1.0 - f) * dt) * g
                    ell = max(0.0, -mn) + f * (max(0.0, -mnn) - max(0.0, -mn))
                    X = max(0.0, Zs + ell)
                    T0 = t - (s + f * dt)
                    break
                s += dt
                Z, mn, C = Zn, mnn, Cn
        D = math.sqrt(4.0 * alpha) * X
        state, g = _normal(state)
        M = math.sqrt(alpha * (t + T0)) * g
        L[i] = M - 0.5 * D
        R[i] = M + 0.5 * D


def sticky_pair_simulate(P: ContinuumParams, n_paths: int, seed: int, dt: float = 1e-3):
    """Sample ``(L_t, R_t)`` of the sticky pair.

    The gap ``D = R - L`` is ``sqrt(4 alpha)`` times a sticky Brownian
    motion ``dX = 1(X > 0) dW + kappa dt`` with ``kappa = 2 sqrt(beta)``;
    this is built by time-changing the drifted reflected walk
    ``Y = Z + ell`` with ``C(s) = s + ell(s)/kappa`` (reflection handled by
    exact bridge minima on a grid of step ``dt``).  The midpoint is
    conditionally Gaussian with variance ``alpha (t + T0)``, where ``T0``
    is the time spent stuck together.
    """
    if n_paths < 1:
        raise InputError("need at least one path")
    L = np.empty(n_paths)
    R = np.empty(n_paths)
    _sticky_paths(P.alpha, P.beta, P.t, n_paths, _seed(seed), dt, L, R)
    return L, R


# -- Brownian firework ----------------------------------------------------

def _check_delta(y, z, delta):
    if min(abs(y), abs(z)) < delta or y == 0 or z == 0:
        raise InputError(f"points must satisfy |y|, |z| >= delta = {delta} and be nonzero")


def firework_stationary(y: float, z: float, delta: float = 0.0) -> float:
    """Stationary firework kernel (infinite immigration at the origin)."""
    _check_delta(y, z, delta)
    if y > z:
        raise InputError("need y <= z")
    if y < 0 < z:
        return 0.0
    if y > 0:
        return 1.0 + 2.0 / math.pi * (math.atan(y / z) - math.atan(z / y))
    return 1.0 + 2.0 / math.pi * (math.atan(z / y) - math.atan(y / z))


def firework_derivs(y: float, z: float):
    """``(K, d_y K, d_z K, d_y d_z K)`` of the stationary firework kernel."""
    c = 4.0 / math.pi
    r2 = y * y + z * z
    if y < 0 < z:
        return 0.0, 0.0, 0.0, 0.0
    K = firework_stationary(y, z)
    if y > 0:
        return K, c * z / r2, -c * y / r2, c * (y * y - z * z) / r2 ** 2
    return K, -c * z / r2, c * y / r2, c * (z * z - y * y) / r2 ** 2


def firework_intensity(y: float, delta: float = 0.0) -> float:
    _check_delta(y, y, delta)
    return 1.0 / (math.pi * abs(y))


def firework_kernel(delta: float = 0.0) -> PfaffianKernel:
    """Pfaffian kernel of the stationary firework on ``|x| >= delta``."""

    def off(y, z):
        _check_delta(y, z, delta)
        K, Ky, Kz, Kyz = firework_derivs(y, z)
        return np.array([[K, -Kz], [-Ky, Kyz]])

    def diag(y):
        _check_delta(y, y, delta)
        return -firework_derivs(y, y)[2]

    return PfaffianKernel(off, diag, 0.5, lattice=False)


def firework_finite_beta(alpha: float, beta: float, y: float, z: float,
                         tol: float = 1e-10) -> float:
    """Stationary firework kernel at finite immigration strength.

    ``1 + (2/pi) int_0^inf e^{-u} (atan(y/(u/kappa + |z|)) - atan(z/(u/kappa + |y|))) du``
    with ``kappa = beta/alpha``.
    """
    if y > z:
        raise InputError("need y <= z")
    if beta == 0 or y == z:
        return 1.0
    kap = beta / alpha
    ay, az = abs(y), abs(z)

    def f(u):
        s = u / kap
        return math.exp(-u) * (math.atan2(y, s + az) - math.atan2(z, s + ay))

    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=tol, epsrel=tol, limit=400)
    return 1.0 + 2.0 / math.pi * val


# -- Brownian net point set --------------------------------------------------

@dataclass
class NetSolution:
    """Grid solution of the net kernel equation in rotated coordinates.

    ``u = (z - y)/sqrt(2) >= 0`` and ``v = (z + y)/sqrt(2)``; ``K[i, j]`` is the
    value at ``(u[i], v[j])``.  ``residual`` is the max discrete residual of
    the equation at the final time from snapshots at ``t +- dt``.
    """

    u: np.ndarray
    v: np.ndarray
    K: np.ndarray
    t: float
    residual: float
    domain: tuple

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """``(Y, Z)`` coordinates of the grid nodes, shaped like ``K``."""
        Ug, Vg = np.meshgrid(self.u, self.v, indexing="ij")
        return (Vg - Ug) / math.sqrt(2.0), (Vg + Ug) / math.sqrt(2.0)

    def values(self, y, z) -> np.ndarray:
        """Quintic interpolation between nodes (adds about ``h**4`` error)."""
        from scipy.interpolate import RegularGridInterpolator

        y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
        pts = np.stack([(z - y).ravel(), (z + y).ravel()], axis=1) / math.sqrt(2.0)
        f = RegularGridInterpolator((self.u, self.v), self.K, method="quintic")
        return f(pts).reshape(y.shape)

    def value(self, y: float, z: float) -> float:
        return float(self.values(y, z))


def _net_boundary(b, A, t):
    """Far-field data: unit-start kernel if ``(y, z)`` misses ``A``, else zero-start."""
    pa = ContinuumParams(alpha=0.5, beta=b * b / 2.0, t=t)

    def g(y, z):
        d = z - y
        if t == 0:
            return np.where(_misses(A, y, z), 1.0, np.where(d == 0, 1.0, 0.0))
        return np.where(_misses(A, y, z), kernel_a(pa, 0.0, d), kernel_b(pa, 0.0, d))

    return g


def _misses(A, y, z):
    """``(y, z)`` disjoint from every open interval in ``A``."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    out = np.ones(np.broadcast(y, z).shape, dtype=bool)
    for lo, hi in A:
        out &= ~((y < hi) & (z > lo) & (z > y))
    return out


def _net_run(b, A, t, U, V, h, dt, extra_steps=1):
    nu = int(round(U / h))
    nv = int(round(2 * V / h))
    u = np.linspace(0.0, U, nu + 1)
    v = np.linspace(-V, V, nv + 1)
    r2 = math.sqrt(2.0)
    Ug, Vg = np.meshgrid(u, v, indexing="ij")
    Y, Z = (Vg - Ug) / r2, (Vg + Ug) / r2
    g = _net_boundary(b, A, t)
    mi, mj = nu - 1, nv - 1
    N = mi * mj

    def lap1(m):
        return sp.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / h ** 2

    L = 0.5 * (sp.kron(lap1(mi), sp.identity(mj)) + sp.kron(sp.identity(mi), lap1(mj))) \
        - b * b * sp.identity(N)
    L = L.tocsc()

    def bvec(tt):
        # boundary contributions of 0.5 * Laplacian
        gb = np.asarray(_net_boundary(b, A, tt)(Y, Z), dtype=float)
        gb[0, :] = 1.0
        w = np.zeros((mi, mj))
        w[0, :] += gb[0, 1:-1]
        w[-1, :] += gb[-1, 1:-1]
        w[:, 0] += gb[1:-1, 0]
        w[:, -1] += gb[1:-1, -1]
        return 0.5 * w.ravel() / h ** 2, gb

    K0 = np.where(_misses(A, Y, Z), 1.0, 0.0)[1:-1, 1:-1].ravel()
    I = sp.identity(N, format="csc")
    # Rannacher start: four implicit Euler quarter steps
    qdt = dt / 4.0
    lu_ie = splu((I - qdt * L).tocsc())
    x = K0.copy()
    tt = 0.0
    for _ in range(4):
        tt += qdt
        x = lu_ie.solve(x + qdt * bvec(tt)[0])
    nsteps = int(round(t / dt))
    if abs(nsteps * dt - t) > 1e-12 * max(1.0, t):
        raise InputError("t must be a multiple of dt")
    lu = splu((I - 0.5 * dt * L).tocsc())
    M = (I + 0.5 * dt * L).tocsr()
    snaps = {}
    b_old = bvec(tt)[0]
    for n in range(1, nsteps + extra_steps):
        tn = tt + dt
        b_new = bvec(tn)[0]
        x = lu.solve(M @ x + 0.5 * dt * (b_old + b_new))
        tt, b_old = tn, b_new
        if n >= nsteps - 2:
            snaps[n + 1] = x.copy()

    def full(vec, time):
        gb = bvec(time)[1]
        out = gb.copy()
        out[1:-1, 1:-1] = vec.reshape(mi, mj)
        return out

    Kt = full(snaps[nsteps], t)
    Km = full(snaps[nsteps - 1], t - dt)
    Kp = full(snaps[nsteps + 1], t + dt)
    lapK = (Kt[2:, 1:-1] + Kt[:-2, 1:-1] + Kt[1:-1, 2:] + Kt[1:-1, :-2] - 4 * Kt[1:-1, 1:-1]) / h ** 2
    res = (Kp - Km)[1:-1, 1:-1] / (2 * dt) - 0.5 * lapK + b * b * Kt[1:-1, 1:-1]
    return u, v, Kt, float(np.max(np.abs(res)))


def solve_net(b: float, t: float, A: Sequence[tuple], h: float = 0.04, dt: float = 0.01,
              U: float | None = None, V: float | None = None,
              richardson: bool = True) -> NetSolution:
    """Crank-Nicolson solution of ``K_t = (1/2) Lap K - b^2 K`` on ``{y < z}``.

    ``K = 1`` on the diagonal, ``K_0 = 1((y, z) misses A)``, and the outer
    edges of the truncated domain carry the closed-form kernel for the
    interval's relation to ``A`` (exact when ``A`` is empty or the whole
    line).  With ``richardson=True`` the run is repeated with ``h/2, dt/2``
    and the two are combined to cancel the second-order error.
    """
    if t <= 0:
        raise InputError("t must be positive")
    A = [(float(lo), float(hi)) for lo, hi in A]
    span = max([abs(x) for iv in A for x in iv if math.isfinite(x)] + [1.0])
    # the far-field data are exact when A is empty or the whole line, so a
    # small domain suffices; otherwise leave room for the influence of A
    exact_edge = not A or A == [(-math.inf, math.inf)]
    reach = 2.0 if exact_edge else 8.0 * math.sqrt(t) + 1.0
    U = U if U is not None else round((span + reach) / h) * h
    V = V if V is not None else round((span + reach) / h) * h
    u, v, K, res = _net_run(b, A, t, U, V, h, dt)
    if richardson:
        _, _, Kf, resf = _net_run(b, A, t, U, V, h / 2, dt / 2)
        K = (4.0 * Kf[::2, ::2] - K) / 3.0
        res = resf
    return NetSolution(u, v, K, t, res, (U, V))


def net_kernel(b: float, t: float, A: Sequence[tuple], y: float, z: float, **kw) -> float:
    """Net kernel ``K^A_t(y, z)`` at a single pair (solves the full grid)."""
    if y > z:
        raise InputError("need y <= z")
    if y == z:
        return 1.0
    return solve_net(b, t, A, **kw).value(y, z)


def pde_residual(K: Callable, alpha: float, beta: float, t: float, points: Sequence[tuple],
                 h: float = 1e-2, dKdt: Callable | None = None,
                 lap: Callable | None = None) -> float:
    """Max residual of ``dK/dt - alpha Lap K + 2 beta K`` at ``(y, z)`` points.

    ``K(t, y, z)`` is evaluated; time and space derivatives use central
    differences of step ``h`` unless analytic ``dKdt(t, y, z)`` or
    ``lap(t, y, z)`` are supplied.
    """
    worst = 0.0
    for y, z in points:
        k0 = K(t, y, z)
        kt = dKdt(t, y, z) if dKdt else (K(t + h, y, z) - K(t - h, y, z)) / (2 * h)
        if lap:
            lp = lap(t, y, z)
        else:
            lp = (K(t, y + h, z) + K(t, y - h, z) + K(t, y, z + h) + K(t, y, z - h) - 4 * k0) / h ** 2
        worst = max(worst, abs(kt - alpha * lp + 2 * beta * k0))
    return float(worst)


def gnuplot_script(datafile: str, title: str, xlabel: str, ylabel: str,
                   series: Sequence[tuple], logscale: str = "") -> str:
    """Plain gnuplot script plotting ``series = [(xcol, ycol, label), ...]``."""
    lines = [
        "set datafile separator ','",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set key top right",
    ]
    if logscale:
        lines.append(f"set logscale {logscale}")
    plots = [f"'{datafile}' using {xc}:{yc} skip 1 with linespoints title '{lab}'"
             for xc, yc, lab in series]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


# -- diffusive scaling of the lattice kernels --------------------------------

GRID_PAIRS = ((0.0, 0.3), (-0.2, 0.8), (0.1, 1.8), (-1.0, 1.5), (0.0, 0.1))


def lattice_continuum_error(example: str, P: ContinuumParams, eps: float,
                            pairs: Sequence[tuple] = GRID_PAIRS, reach: float = 12.0) -> float:
    """Max ``|K^eps(floor(y/eps), floor(z/eps)) - K^c(y, z)|`` over ``pairs``.

    Example ``"a"``: ARWPI from the empty start with ``p = q = alpha``,
    ``m = beta eps^2 / 2``, run to time ``t / eps^2``.  Example ``"b"``:
    BCRW from the full start with ``p = q = alpha`` and
    ``l = r = 2 eps sqrt(alpha beta)``.  Points on the ``eps`` grid avoid the
    extra ``O(eps)`` rounding error of the floor map.
    """
    from .duality import kernel_on_lattice_arwpi, kernel_on_lattice_bcrw
    from .lattice import BCRW

    if eps <= 0:
        raise InputError("eps must be positive")
    al, be, t = P.alpha, P.beta, P.t
    d_max = int(math.ceil(reach / eps))
    if example == "a":
        K = kernel_on_lattice_arwpi(al, al, be * eps * eps / 2.0, t / eps ** 2, d_max)
        exact = kernel_a
    elif example == "b":
        br = 2.0 * eps * math.sqrt(al * be)
        K = kernel_on_lattice_bcrw(BCRW(al, al, br, br), t / eps ** 2, d_max)
        exact = kernel_b
    else:
        raise InputError(f"unknown example {example!r}")
    worst = 0.0
    for y, z in pairs:
        d = math.floor(z / eps + 1e-9) - math.floor(y / eps + 1e-9)
        if d > d_max:
            raise InputError("pair separation exceeds the lattice reach")
        worst = max(worst, abs(float(K[d]) - float(exact(P, y, z))))
    return worst
