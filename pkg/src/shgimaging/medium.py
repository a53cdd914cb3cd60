"""Realizations of the bounded random refractive-index perturbation.

The perturbation is ``mu = arctan(z)`` where ``z`` is a stationary zero-mean
Gaussian field with covariance ``R(s) = sigma_mu^2 exp(-s^2 / (2 l_mu^2))``,
sampled exactly on a cell-centered grid by circulant embedding of the
covariance on a doubled torus.  If the embedding is not positive definite the
generator falls back to spectral sampling with the continuum spectral density
of the same covariance.

The arctan transform keeps every sample inside (-pi/2, pi/2); at the standard
deviations used here (a few percent) it changes the variance by well under
0.1% and no post-transform rescaling is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ResolutionError
from .geometry import Box, as_point

__all__ = ["MediumParams", "MediumRealization", "generate", "sample_at", "dump_csv"]


@dataclass(frozen=True)
class MediumParams:
    """Statistical parameters of the random perturbation.

    sigma_mu    standard deviation of the underlying Gaussian field
    l_mu        correlation length
    alpha       Hoelder regularity exponent in (0, 1/2); only consumed by the
                stability predictors, not by the generator
    support_box square support of the perturbation (zero outside)
    grid_n      samples per axis (cell-centered)
    seed        64-bit seed; identical params give bit-identical fields
    """

    sigma_mu: float
    l_mu: float
    alpha: float = 0.45
    support_box: Box = Box(-1.0, -1.0, 1.0, 1.0)
    grid_n: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.sigma_mu < 0.0:
            raise DomainError("sigma_mu must be >= 0")
        if self.l_mu <= 0.0:
            raise DomainError("l_mu must be > 0")
        if not 0.0 < self.alpha < 0.5:
            raise DomainError("alpha must lie in (0, 1/2)")
        if self.grid_n < 16:
            raise DomainError("grid_n must be at least 16")
        box = Box.validate(self.support_box)
        if abs(box.width - box.height) > 1e-12 * max(box.width, box.height):
            raise DomainError("support_box must be square (single cell size)")
        object.__setattr__(self, "support_box", box)

    @property
    def cell_size(self) -> float:
        return self.support_box.width / self.grid_n

    def cell_centers(self):
        """1D coordinates of cell centers along x and y."""
        b = self.support_box
        h = self.cell_size
        x = b.xmin + h * (np.arange(self.grid_n) + 0.5)
        y = b.ymin + h * (np.arange(self.grid_n) + 0.5)
        return x, y


@dataclass(frozen=True)
class MediumRealization:
    """One sampled perturbation field on the grid of ``params``.

    ``values[iy, ix]`` is mu at the cell center (x[ix], y[iy]); every entry
    lies strictly inside (-pi/2, pi/2) and mu vanishes identically outside
    the support box.
    """

    params: MediumParams
    values: np.ndarray = field(repr=False)
    cell_size: float

    def cells_flat(self):
        """Cell centers as an (n*n, 2) array, row-major in (iy, ix)."""
        x, y = self.params.cell_centers()
        gx, gy = np.meshgrid(x, y)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def cell_index(self, p):
        """(iy, ix) of the grid cell containing p, or None outside the box."""
        q = as_point(p)
        b = self.params.support_box
        if not b.contains(q):
            return None
        h = self.cell_size
        n = self.params.grid_n
        ix = min(int((q[0] - b.xmin) / h), n - 1)
        iy = min(int((q[1] - b.ymin) / h), n - 1)
        return iy, ix


def _gaussian_cov(dist, sigma, l):
    return sigma * sigma * np.exp(-0.5 * (dist / l) ** 2)


def _embedding_eigenvalues(params: MediumParams, m: int):
    """DFT eigenvalues of the covariance embedded on an m x m torus."""
    h = params.cell_size
    k = np.arange(m)
    wrap = h * np.minimum(k, m - k)
    dist = np.hypot(wrap[:, None], wrap[None, :])
    return np.fft.fft2(_gaussian_cov(dist, params.sigma_mu, params.l_mu)).real


def _spectral_eigenvalues(params: MediumParams, m: int):
    """Spectrum-based surrogate when the embedding is indefinite.

    Uses the continuum spectral density of the Gaussian covariance,
    S(k) = sigma^2 2 pi l^2 exp(-|k|^2 l^2 / 2), discretized on the torus.
    """
    h = params.cell_size
    kx = 2.0 * math.pi * np.fft.fftfreq(m, d=h)
    k2 = kx[:, None] ** 2 + kx[None, :] ** 2
    s = params.sigma_mu ** 2 * 2.0 * math.pi * params.l_mu ** 2 * np.exp(
        -0.5 * k2 * params.l_mu ** 2
    )
    return s / (h * h)


def generate(params: MediumParams) -> MediumRealization:
    """Draw one realization; deterministic given ``params`` (incl. seed)."""
    h = params.cell_size
    if params.l_mu / h < 4.0:
        raise ResolutionError(
            f"grid resolves l_mu with {params.l_mu / h:.2f} cells; need at least 4"
        )
    n = params.grid_n
    if params.sigma_mu == 0.0:
        vals = np.zeros((n, n))
        return MediumRealization(params=params, values=vals, cell_size=h)

    m = 2 * n
    eig = _embedding_eigenvalues(params, m)
    if eig.min() < -1e-10 * eig.max():
        eig = _spectral_eigenvalues(params, m)
    eig = np.maximum(eig, 0.0)

    rng = np.random.default_rng(params.seed)
    xi = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    w = np.fft.fft2(np.sqrt(eig) * xi) / m
    z = w.real[:n, :n]
    vals = np.arctan(z)
    return MediumRealization(params=params, values=vals, cell_size=h)


def sample_at(m: MediumRealization, p) -> float:
    """Bilinear interpolation of mu at a point; exactly 0 outside the box."""
    q = as_point(p)
    b = m.params.support_box
    if not b.contains(q):
        return 0.0
    n = m.params.grid_n
    h = m.cell_size
    # fractional index on the cell-center lattice, clamped at the edges
    fx = (q[0] - b.xmin) / h - 0.5
    fy = (q[1] - b.ymin) / h - 0.5
    fx = min(max(fx, 0.0), n - 1.0)
    fy = min(max(fy, 0.0), n - 1.0)
    ix = min(int(fx), n - 2) if n > 1 else 0
    iy = min(int(fy), n - 2) if n > 1 else 0
    tx = fx - ix
    ty = fy - iy
    v = m.values
    return float(
        (1 - ty) * ((1 - tx) * v[iy, ix] + tx * v[iy, ix + 1])
        + ty * ((1 - tx) * v[iy + 1, ix] + tx * v[iy + 1, ix + 1])
    )


def dump_csv(m: MediumRealization, path) -> None:
    """Write the realization row-major with a parameter header."""
    p = m.params
    b = p.support_box
    with open(path, "w", newline="") as f:
        f.write("# medium realization\n")
        f.write(
            f"# sigma_mu = {p.sigma_mu:.17g}, l_mu = {p.l_mu:.17g}, "
            f"alpha = {p.alpha:.17g}, seed = {p.seed}\n"
        )
        f.write(
            f"# box = {b.xmin:.17g} {b.ymin:.17g} {b.xmax:.17g} {b.ymax:.17g}, "
            f"grid_n = {p.grid_n}, cell_size = {m.cell_size:.17g}\n"
        )
        f.write("iy,ix,x,y,mu\n")
        x, y = p.cell_centers()
        for iy in range(p.grid_n):
            for ix in range(p.grid_n):
                f.write(
                    f"{iy},{ix},{x[ix]:.17g},{y[iy]:.17g},{m.values[iy, ix]:.17g}\n"
                )
