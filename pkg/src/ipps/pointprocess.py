"""Pfaffian point-process kernels built from a scalar duality kernel.

A kernel is stored as five functions: the 2x2 block for ``y < z`` and the
single diagonal entry ``K12(y, y)``.  The n-point intensity at
``x_1 < ... < x_n`` is the Pfaffian of the ``2n x 2n`` matrix whose
``(i, j)`` block is the kernel block at ``(x_i, x_j)``; point ``i``
occupies rows ``2i, 2i+1`` (zero based).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .duality import ScalarKernelTable
from .errors import InputError, StructureError
from .pfaffian import pfaffian

__all__ = [
    "PfaffianKernel",
    "IntensityRequest",
    "ProductLaw",
    "assemble_bcrw_kernel",
    "assemble_arwpi_kernel",
    "bcrw_intermediate_kernel",
    "bcrw_phase_kernel",
    "intensity",
    "intensity_matrix",
    "conjugate",
    "thin",
    "thicken",
    "thickened_intensity_sum",
    "identify_product",
    "empty_interval_matrix",
    "empty_interval_pfaffian",
    "verify_thin_thicken_identity",
    "intensity_rows_csv",
]

Block = np.ndarray


@dataclass(frozen=True)
class PfaffianKernel:
    """Antisymmetric 2x2-block kernel.

    Parameters
    ----------
    offdiag : callable
        ``offdiag(y, z)`` for ``y < z`` returns the unscaled 2x2 block.
    diag12 : callable
        ``diag12(y)`` returns the unscaled diagonal entry ``K12(y, y)``.
    prefactor : float
        Multiplies both ``offdiag`` and ``diag12``.
    shift : float
        Added to the (scaled) diagonal entry; this is how an independent
        Poisson process is superposed.
    lattice : bool
        Whether the points live on Z (affects only product identification).
    """

    offdiag: Callable[[float, float], Block]
    diag12: Callable[[float], float]
    prefactor: float = 1.0
    shift: float = 0.0
    lattice: bool = True

    def block(self, y, z) -> Block:
        if y < z:
            return self.prefactor * np.asarray(self.offdiag(y, z), dtype=float)
        if y > z:
            return -self.block(z, y).T
        d = self.diag(y)
        return np.array([[0.0, d], [-d, 0.0]])

    def diag(self, y) -> float:
        return self.prefactor * float(self.diag12(y)) + self.shift


@dataclass(frozen=True)
class IntensityRequest:
    """Strictly increasing points ``x_1 < ... < x_n``."""

    points: tuple

    def __post_init__(self):
        pts = tuple(self.points)
        if len(pts) < 1:
            raise InputError("need at least one point")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise InputError(f"points must be strictly increasing, got {pts}")
        if len(pts) > 32:
            raise StructureError("at most 32 points (Pfaffian order 64)")
        object.__setattr__(self, "points", pts)

    @property
    def order(self) -> int:
        return len(self.points)


def _request(req) -> IntensityRequest:
    return req if isinstance(req, IntensityRequest) else IntensityRequest(tuple(req))


# -- lattice kernels ---------------------------------------------------------

def _table_lookup(table: ScalarKernelTable):
    n = table.n_sites
    V = table.values

    def K(y, z):
        if not (0 <= y <= z <= n):
            raise InputError(f"pair ({y}, {z}) needs values outside the table (N={n})")
        return V[y, z]

    return K


def assemble_bcrw_kernel(table: ScalarKernelTable, phi: float) -> PfaffianKernel:
    """Point-process kernel of BCRW from its scalar kernel.

    For ``y < z`` the block is ``(1/phi) [[K, -D2 K], [-D1 K, D1 D2 K]]``
    with forward differences, and ``K12(y, y) = 1 - K(y, y+1)/phi``.
    """
    K = _table_lookup(table)

    def off(y, z):
        k00, k01, k10, k11 = K(y, z), K(y, z + 1), K(y + 1, z), K(y + 1, z + 1)
        return np.array([[k00, -(k01 - k00)],
                         [-(k10 - k00), k11 - k01 - k10 + k00]])

    return PfaffianKernel(off, lambda y: phi - K(y, y + 1), 1.0 / phi)


def assemble_arwpi_kernel(table: ScalarKernelTable) -> PfaffianKernel:
    """Point-process kernel of ARWPI: same blocks, prefactor 1/2,
    ``K12(y, y) = -(1/2) (K(y, y+1) - 1)``."""
    K = _table_lookup(table)

    def off(y, z):
        k00, k01, k10, k11 = K(y, z), K(y, z + 1), K(y + 1, z), K(y + 1, z + 1)
        return np.array([[k00, -(k01 - k00)],
                         [-(k10 - k00), k11 - k01 - k10 + k00]])

    return PfaffianKernel(off, lambda y: 1.0 - K(y, y + 1), 0.5)


def bcrw_intermediate_kernel(table: ScalarKernelTable, phi: float) -> PfaffianKernel:
    """Kernel obtained directly from differentiating empty-interval Pfaffians.

    Block ``[[phi^(y+z) K, -D_z(phi^(y-z) K)], [-D_y(phi^(z-y) K), D_y D_z(phi^(-y-z) K)]]``.
    Row and column operations turn it into :func:`assemble_bcrw_kernel`.
    """
    K = _table_lookup(table)

    def off(y, z):
        a = phi ** (y + z) * K(y, z)
        b = -(phi ** (y - z - 1) * K(y, z + 1) - phi ** (y - z) * K(y, z))
        c = -(phi ** (z - y - 1) * K(y + 1, z) - phi ** (z - y) * K(y, z))
        d = (phi ** (-y - z - 2) * K(y + 1, z + 1) - phi ** (-y - z - 1) * K(y, z + 1)
             - phi ** (-y - z - 1) * K(y + 1, z) + phi ** (-y - z) * K(y, z))
        return np.array([[a, b], [c, d]])

    return PfaffianKernel(off, lambda y: 1.0 - K(y, y + 1) / phi, 1.0)


def bcrw_phase_kernel(table: ScalarKernelTable, phi: float) -> PfaffianKernel:
    """The intermediate kernel after removing the ``phi**(+-y)`` phases."""
    K = _table_lookup(table)

    def off(y, z):
        k00, k01, k10, k11 = K(y, z), K(y, z + 1), K(y + 1, z), K(y + 1, z + 1)
        return np.array([[k00, -(k01 / phi - k00)],
                         [-(k10 / phi - k00), k11 / phi ** 2 - k01 / phi - k10 / phi + k00]])

    return PfaffianKernel(off, lambda y: 1.0 - K(y, y + 1) / phi, 1.0)


# -- evaluation --------------------------------------------------------------

def intensity_matrix(kernel: PfaffianKernel, req) -> np.ndarray:
    req = _request(req)
    pts = req.points
    n = len(pts)
    M = np.zeros((2 * n, 2 * n))
    for i in range(n):
        d = kernel.diag(pts[i])
        M[2 * i, 2 * i + 1] = d
        M[2 * i + 1, 2 * i] = -d
        for j in range(i + 1, n):
            B = kernel.block(pts[i], pts[j])
            M[2 * i:2 * i + 2, 2 * j:2 * j + 2] = B
            M[2 * j:2 * j + 2, 2 * i:2 * i + 2] = -B.T
    return M


def intensity(kernel: PfaffianKernel, req) -> float:
    """n-point intensity ``rho_n(x_1, ..., x_n)`` as a Pfaffian."""
    return pfaffian(intensity_matrix(kernel, req), check=False)


def conjugate(kernel: PfaffianKernel, B: Callable[[float], np.ndarray]) -> PfaffianKernel:
    """Replace every block ``K(y, z)`` by ``B(y) K(y, z) B(z)^T``.

    ``det B(y) = 1`` is required; diagonal blocks are then unchanged, so
    every intensity is preserved.
    """
    def checked(y):
        b = np.asarray(B(y), dtype=float)
        if b.shape != (2, 2):
            raise StructureError("conjugating matrices must be 2x2")
        det = b[0, 0] * b[1, 1] - b[0, 1] * b[1, 0]
        if abs(det - 1.0) > 1e-12:
            raise InputError(f"conjugating matrix at {y} has determinant {det}, not 1")
        return b

    off = kernel.offdiag
    return replace(kernel, offdiag=lambda y, z: checked(y) @ np.asarray(off(y, z)) @ checked(z).T)


def thin(kernel: PfaffianKernel, gamma: float) -> PfaffianKernel:
    """Keep each point independently with probability ``gamma``."""
    if not 0.0 <= gamma <= 1.0:
        raise InputError("thinning parameter must lie in [0, 1]")
    return replace(kernel, prefactor=kernel.prefactor * gamma, shift=kernel.shift * gamma)


def thicken(kernel: PfaffianKernel, gamma: float) -> PfaffianKernel:
    """Superpose an independent Poisson process of rate ``gamma``."""
    if not gamma >= 0.0:
        raise InputError("thickening rate must be nonnegative")
    return replace(kernel, shift=kernel.shift + gamma)


def thickened_intensity_sum(kernel: PfaffianKernel, req, gamma: float) -> float:
    """``sum_J rho_{|J|}(x_J) gamma^(n - |J|)`` by brute force over subsets."""
    pts = _request(req).points
    total = 0.0
    for k in range(len(pts) + 1):
        for J in itertools.combinations(pts, k):
            rho = 1.0 if k == 0 else intensity(kernel, J)
            total += rho * gamma ** (len(pts) - k)
    return total


@dataclass(frozen=True)
class ProductLaw:
    """Outcome of :func:`identify_product`."""

    kind: str  # "bernoulli", "poisson" or "none"
    c: float | None = None


def identify_product(kernel: PfaffianKernel, points: Sequence, n_max: int = 3,
                     rtol: float = 1e-8) -> ProductLaw:
    """Test whether all intensities factor as ``rho_n = c**n``.

    Every subset of ``points`` of size at most ``n_max`` is checked.  A
    lattice kernel is reported as Bernoulli(c), a continuum one as
    Poisson(c).
    """
    pts = sorted(points)
    if not pts:
        raise InputError("need sample points")
    rho1 = np.array([intensity(kernel, (x,)) for x in pts])
    c = float(rho1.mean())
    scale = max(abs(c), 1e-300)
    if np.max(np.abs(rho1 - c)) > rtol * scale:
        return ProductLaw("none")
    for n in range(2, n_max + 1):
        for sub in itertools.combinations(pts, n):
            if abs(intensity(kernel, sub) - c ** n) > rtol * max(c ** n, 1e-300):
                return ProductLaw("none")
    return ProductLaw("bernoulli" if kernel.lattice else "poisson", c)


# -- empty-interval Pfaffians ------------------------------------------------

def empty_interval_matrix(K: Callable[[int, int], float], ys: Sequence[int]) -> np.ndarray:
    """Antisymmetric matrix with entries ``K(y_i, y_j)`` for ``i < j``."""
    ys = list(ys)
    if len(ys) % 2:
        raise StructureError("need an even number of endpoints")
    if any(b < a for a, b in zip(ys, ys[1:])):
        raise InputError("endpoints must be nondecreasing")
    n = len(ys)
    M = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            M[i, j] = K(ys[i], ys[j])
            M[j, i] = -M[i, j]
    return M


def empty_interval_pfaffian(table: ScalarKernelTable, ys: Sequence[int]) -> float:
    """``Pf(K(y_i, y_j))`` for ordered endpoints ``y_1 <= ... <= y_2n``."""
    return pfaffian(empty_interval_matrix(table, ys), check=False)


# -- continuum identity ------------------------------------------------------

def verify_thin_thicken_identity(alpha: float, beta: float, t: float,
                                 points: Sequence[float], n_max: int = 3) -> float:
    """Largest intensity discrepancy between two constructions.

    Left side: the branching-coalescing continuum process from a full
    start, thinned by 1/2 (kernel evaluated in closed form).
    Right side: the annihilating continuum process from a full start
    plus an independent Poisson process of rate ``sqrt(beta/alpha)/2``
    (kernel evaluated by Feynman-Kac quadrature).  Both scalar kernels
    solve the same equation from zero initial data; the identity is in
    the normalisations of the blocks and of the diagonal.
    """
    from .continuum import ContinuumParams, kernel_b_pfaffian, kernel_zero_start_quadrature_pfaffian

    params = ContinuumParams(alpha=alpha, beta=beta, t=t)
    k = math.sqrt(beta / alpha)
    left = thin(kernel_b_pfaffian(params), 0.5)
    right = thicken(kernel_zero_start_quadrature_pfaffian(params), 0.5 * k)
    pts = sorted(points)
    worst = 0.0
    for n in range(1, n_max + 1):
        for sub in itertools.combinations(pts, n):
            worst = max(worst, abs(intensity(left, sub) - intensity(right, sub)))
    return worst


def intensity_rows_csv(rows: Sequence[tuple]) -> str:
    """CSV with columns ``points, rho, source`` (points joined by ';')."""
    out = ["points,rho,source"]
    for pts, rho, src in rows:
        out.append(f"{';'.join(str(p) for p in pts)},{rho:.17g},{src}")
    return "\n".join(out) + "\n"
