"""Reverse-time backpropagation imaging and its analysis kernels.

The fundamental-frequency image correlates the boundary data against the
conjugated gradient of the background Green function and averages over the
illumination directions; the second-harmonic image backpropagates at twice
the frequency with no gradient weighting.  Direction averages use the
uniform-angle rule (2 pi / n times the sum over the simulated
illuminations); sensor integrals use the ring's arc-length weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, NoPeakError, SingularityError
from .forward import (
    FUNDAMENTAL,
    SECOND_HARMONIC,
    BoundaryData,
    SensorArray,
    gradient_table,
    hessian_table,
    value_table,
)
from .geometry import Box, as_point

__all__ = [
    "SearchGrid",
    "ImageGrid",
    "Backpropagator",
    "functional_I",
    "functional_J",
    "kernel_R",
    "kernel_Q",
    "kernel_Q_tilde",
    "kernel_R_tilde",
    "localize",
    "fwhm",
    "image_to_csv",
    "image_to_pgm",
]


@dataclass(frozen=True)
class SearchGrid:
    """Rectangular lattice of candidate reflector locations."""

    box: Box
    n_x: int
    n_y: int

    def __post_init__(self):
        object.__setattr__(self, "box", Box.validate(self.box))
        if self.n_x < 8 or self.n_y < 8:
            raise DomainError("search grid needs at least 8 points per axis")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.box.xmin, self.box.xmax, self.n_x)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.box.ymin, self.box.ymax, self.n_y)

    @property
    def dx(self) -> float:
        return (self.box.xmax - self.box.xmin) / (self.n_x - 1)

    @property
    def dy(self) -> float:
        return (self.box.ymax - self.box.ymin) / (self.n_y - 1)

    def points_flat(self) -> np.ndarray:
        """Lattice points as (n_x * n_y, 2), row-major in (iy, ix)."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def cell_diameter(self) -> float:
        return math.hypot(self.dx, self.dy)


@dataclass(frozen=True)
class ImageGrid:
    """Complex imaging functional sampled on a search grid."""

    grid: SearchGrid
    values: np.ndarray = field(repr=False)
    functional_tag: str

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != (self.grid.n_y, self.grid.n_x):
            raise DomainError(
                f"image shape {vals.shape} does not match grid "
                f"({self.grid.n_y}, {self.grid.n_x})"
            )
        object.__setattr__(self, "values", vals)


def _common_omega(datasets, tag: str) -> float:
    if not datasets:
        raise ConfigError("no boundary datasets supplied")
    omega = datasets[0].illumination.omega
    for bd in datasets:
        if bd.frequency_tag != tag:
            raise ConfigError(
                f"expected {tag} data, got {bd.frequency_tag}"
            )
        if abs(bd.illumination.omega - omega) > 1e-12 * omega:
            raise ConfigError("datasets mix different fundamental frequencies")
    return omega


class Backpropagator:
    """Cached sensor-to-grid tables for repeated imaging on a fixed setup.

    Building the Green-function tables dominates the cost of a single image;
    Monte Carlo sweeps reuse one instance across all trials.
    """

    def __init__(self, omega: float, sensors: SensorArray, grid: SearchGrid):
        if omega <= 0.0:
            raise DomainError("omega must be > 0")
        self.omega = float(omega)
        self.sensors = sensors
        self.grid = grid
        pts = grid.points_flat()
        self._pts = pts
        w = sensors.weights
        g1 = gradient_table(omega, pts, sensors.positions)
        self._bp_grad = np.conj(g1) * w[None, :, None]
        self._bp_val2 = np.conj(value_table(2.0 * omega, pts, sensors.positions)) * w[None, :]

    def _check(self, datasets, tag):
        omega = _common_omega(datasets, tag)
        if abs(omega - self.omega) > 1e-12 * self.omega:
            raise ConfigError("dataset frequency does not match the backpropagator")
        for bd in datasets:
            if bd.samples.shape[0] != self.sensors.count:
                raise ConfigError("sample count does not match the sensor array")

    def image_fundamental(self, datasets) -> ImageGrid:
        self._check(datasets, FUNDAMENTAL)
        n = len(datasets)
        acc = np.zeros(self._pts.shape[0], dtype=np.complex128)
        for bd in datasets:
            th = bd.illumination.theta
            v = th[0] * (self._bp_grad[:, :, 0] @ bd.samples) + th[1] * (
                self._bp_grad[:, :, 1] @ bd.samples
            )
            acc += np.exp(-1j * self.omega * (self._pts @ th)) * v
        acc *= 2.0 * math.pi / (n * 1j * self.omega)
        return ImageGrid(
            grid=self.grid,
            values=acc.reshape(self.grid.n_y, self.grid.n_x),
            functional_tag="I",
        )

    def image_second_harmonic(self, datasets) -> ImageGrid:
        self._check(datasets, SECOND_HARMONIC)
        n = len(datasets)
        acc = np.zeros(self._pts.shape[0], dtype=np.complex128)
        for bd in datasets:
            th = bd.illumination.theta
            acc += np.exp(-2j * self.omega * (self._pts @ th)) * (
                self._bp_val2 @ bd.samples
            )
        acc *= 2.0 * math.pi / n
        return ImageGrid(
            grid=self.grid,
            values=acc.reshape(self.grid.n_y, self.grid.n_x),
            functional_tag="J",
        )


def functional_I(datasets, sensors: SensorArray, grid: SearchGrid,
                 backprop: Backpropagator | None = None) -> ImageGrid:
    """Fundamental-frequency reverse-time image over the search grid."""
    omega = _common_omega(datasets, FUNDAMENTAL)
    bp = backprop or Backpropagator(omega, sensors, grid)
    return bp.image_fundamental(datasets)


def functional_J(datasets, sensors: SensorArray, grid: SearchGrid,
                 backprop: Backpropagator | None = None) -> ImageGrid:
    """Second-harmonic reverse-time image over the search grid."""
    omega = _common_omega(datasets, SECOND_HARMONIC)
    bp = backprop or Backpropagator(omega, sensors, grid)
    return bp.image_second_harmonic(datasets)


# ----------------------------------------------------------------------------
# Point-spread / analysis kernels
# ----------------------------------------------------------------------------

def kernel_R(omega: float, z1, z2, sensors: SensorArray) -> np.ndarray:
    """Sensor quadrature of conj(grad G(., z1)) grad G(., z2)^T, a 2x2 matrix.

    At coincident arguments and large sensor radius this tends to
    (omega / 8) I; it decays like |z1 - z2|^(-1/2) at separation.
    """
    z1 = as_point(z1)
    z2 = as_point(z2)
    g1 = gradient_table(omega, np.array([z1, z2]), sensors.positions)
    a = np.conj(g1[0]) * sensors.weights[:, None]
    b = g1[1]
    return a.T @ b


def kernel_Q(omega: float, x, z, sensors: SensorArray) -> complex:
    """Sensor quadrature of G_2w(., x) conj(G_2w(., z)).

    Tends to Im(G_2w(x, z)) / (2 omega) for a large ring; at coincident
    arguments the limit is 1 / (8 omega).
    """
    x = as_point(x)
    z = as_point(z)
    om2 = 2.0 * omega
    gx = value_table(om2, sensors.positions, x[None, :])[:, 0]
    gz = value_table(om2, sensors.positions, z[None, :])[:, 0]
    return complex(np.sum(sensors.weights * gx * np.conj(gz)))


def kernel_Q_tilde(omega: float, chi, x, y, n_theta: int) -> complex:
    """Direction average of the chi quadratic form with a traveling phase.

    Trapezoidal rule on the unit circle with n_theta >= 16 angles.
    """
    if n_theta < 16:
        raise DomainError("n_theta must be at least 16")
    x = as_point(x)
    y = as_point(y)
    chi = np.asarray(chi, dtype=float)
    ang = 2.0 * math.pi * np.arange(n_theta) / n_theta
    th = np.column_stack([np.cos(ang), np.sin(ang)])
    quad = np.einsum("ki,ij,kj->k", th, chi, th)
    phase = np.exp(2j * omega * (th @ (x - y)))
    return complex((2.0 * math.pi / n_theta) * np.sum(quad * phase))


def kernel_R_tilde(omega: float, z_s, z_r, y, sensors: SensorArray) -> np.ndarray:
    """Sensor quadrature pairing conj(grad G(., z_s)) with the Hessian of G
    applied to grad G(y, z_r); 2x2 complex.

    Arises as the medium sensitivity of the fundamental image around a
    reflector at z_r.
    """
    z_s = as_point(z_s)
    z_r = as_point(z_r)
    y = as_point(y)
    if np.hypot(*(y - z_r)) < 1e-12:
        raise SingularityError("kernel_R_tilde requires y != z_r")
    # gradient with respect to z_s equals the first-argument gradient at (z_s, x)
    g_zs = gradient_table(omega, z_s[None, :], sensors.positions)[0]
    hx = hessian_table(omega, sensors.positions, y[None, :])[:, 0, :]
    g_y_zr = gradient_table(omega, y[None, :], z_r[None, :])[0, 0]
    hv = np.stack(
        [
            hx[:, 0] * g_y_zr[0] + hx[:, 1] * g_y_zr[1],
            hx[:, 1] * g_y_zr[0] + hx[:, 2] * g_y_zr[1],
        ],
        axis=-1,
    )
    a = np.conj(g_zs) * sensors.weights[:, None]
    return a.T @ hv


# ----------------------------------------------------------------------------
# Peak handling and export
# ----------------------------------------------------------------------------

def localize(image: ImageGrid):
    """Lattice point with the largest modulus and that modulus.

    Ties break toward the smallest (iy, ix); an identically zero image has
    no peak.
    """
    mod = np.abs(image.values)
    if image.values.size == 0 or not np.any(mod > 0.0):
        raise NoPeakError("image is identically zero")
    flat = int(np.argmax(mod))
    iy, ix = divmod(flat, image.grid.n_x)
    point = np.array([image.grid.xs[ix], image.grid.ys[iy]])
    return point, float(mod[iy, ix])


def _half_max_width(coords: np.ndarray, profile: np.ndarray, ipk: int) -> float:
    half = 0.5 * profile[ipk]
    left = np.nan
    for i in range(ipk, 0, -1):
        if profile[i - 1] < half <= profile[i]:
            t = (profile[i] - half) / (profile[i] - profile[i - 1])
            left = coords[i] - t * (coords[i] - coords[i - 1])
            break
    right = np.nan
    for i in range(ipk, len(profile) - 1):
        if profile[i + 1] < half <= profile[i]:
            t = (profile[i] - half) / (profile[i] - profile[i + 1])
            right = coords[i] + t * (coords[i + 1] - coords[i])
            break
    return float(right - left)


def fwhm(image: ImageGrid, axis: str = "x") -> float:
    """Full width at half maximum of |image| along a line through the peak.

    Returns NaN when the half level is not crossed inside the grid.
    """
    mod = np.abs(image.values)
    if not np.any(mod > 0.0):
        raise NoPeakError("image is identically zero")
    iy, ix = np.unravel_index(int(np.argmax(mod)), mod.shape)
    if axis == "x":
        return _half_max_width(image.grid.xs, mod[iy, :], ix)
    if axis == "y":
        return _half_max_width(image.grid.ys, mod[:, ix], iy)
    raise DomainError("axis must be 'x' or 'y'")


def image_to_csv(image: ImageGrid, path) -> None:
    g = image.grid
    with open(path, "w", newline="") as f:
        f.write(f"# imaging functional {image.functional_tag}\n")
        f.write(
            f"# box = {g.box.xmin:.17g} {g.box.ymin:.17g} {g.box.xmax:.17g} "
            f"{g.box.ymax:.17g}, n_x = {g.n_x}, n_y = {g.n_y}\n"
        )
        f.write("ix,iy,x,y,re,im,abs\n")
        xs, ys = g.xs, g.ys
        for iy in range(g.n_y):
            for ix in range(g.n_x):
                v = image.values[iy, ix]
                f.write(
                    f"{ix},{iy},{xs[ix]:.17g},{ys[iy]:.17g},"
                    f"{v.real:.17g},{v.imag:.17g},{abs(v):.17g}\n"
                )


def image_to_pgm(image: ImageGrid, path, header_lines=()) -> None:
    """8-bit binary PGM of the modulus, normalized to the peak.

    Rows are written top-to-bottom with decreasing y so the file views with
    the y axis pointing up.  ``header_lines`` become PGM comment lines.
    """
    mod = np.abs(image.values)
    peak = mod.max()
    pix = np.zeros_like(mod, dtype=np.uint8) if peak == 0.0 else (
        np.round(255.0 * mod / peak).astype(np.uint8)
    )
    with open(path, "wb") as f:
        f.write(b"P5\n")
        for line in header_lines:
            f.write(f"# {line}\n".encode())
        f.write(f"{image.grid.n_x} {image.grid.n_y}\n255\n".encode())
        f.write(pix[::-1, :].tobytes())
