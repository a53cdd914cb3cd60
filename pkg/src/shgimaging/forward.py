"""Synthetic boundary data on a sensor ring for a small nonlinear reflector
in a random medium.

The data are generated from the leading-order small-reflector / weak-medium
expansions, not from a full PDE solve:

* fundamental frequency: single-scattering background field of the medium
  plus a dipole reflector term carrying the polarization tensor and the
  Born-corrected Green function,
* second harmonic: point source at the reflector with a deterministic and a
  medium-induced random amplitude, propagated at twice the frequency with a
  first-order medium correction.

All volume integrals over the medium use the midpoint rule on the medium
grid; the cell containing a singular point is excluded (integrable log
singularity, O(h^2 log h) quadrature error).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError, SingularityError
from .geometry import as_point
from .medium import MediumRealization
from .specfun import (
    GreenEval,
    green0,
    green0_gradient,
    green0_hessian,
    green0_value,
)

FUNDAMENTAL = "fundamental"
SECOND_HARMONIC = "second_harmonic"


# ----------------------------------------------------------------------------
# Domain types
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ReflectorSpec:
    """Small reflector: location, size, linear contrast and quadratic
    susceptibility.

    ``shape_area`` is the area of the unit reference shape (pi for the unit
    disk); the physical area is ``delta^2 * shape_area``.
    """

    z_r: np.ndarray
    delta: float
    sigma_r: float
    chi: np.ndarray
    shape_area: float = math.pi

    def __post_init__(self):
        object.__setattr__(self, "z_r", as_point(self.z_r))
        chi = np.asarray(self.chi, dtype=float)
        if chi.shape != (2, 2):
            raise DomainError("chi must be a 2x2 matrix")
        if not np.allclose(chi, chi.T, rtol=0.0, atol=1e-12):
            raise DomainError("chi must be symmetric")
        object.__setattr__(self, "chi", chi)
        if self.delta <= 0.0:
            raise DomainError("delta must be > 0")
        if self.sigma_r <= 0.0:
            raise DomainError("sigma_r must be > 0")
        if self.shape_area <= 0.0:
            raise DomainError("shape_area must be > 0")

    @property
    def volume(self) -> float:
        return self.delta ** 2 * self.shape_area


@dataclass(frozen=True)
class Illumination:
    """Unit-intensity plane wave exp(i omega theta . x) scaled by u_i."""

    omega: float
    theta: np.ndarray
    u_i: float = 1.0

    def __post_init__(self):
        if self.omega <= 0.0:
            raise DomainError("omega must be > 0")
        th = as_point(self.theta)
        if abs(np.hypot(th[0], th[1]) - 1.0) > 1e-12:
            raise DomainError("theta must be a unit vector")
        object.__setattr__(self, "theta", th)

    @classmethod
    def from_angle(cls, omega: float, angle: float, u_i: float = 1.0):
        return cls(omega=omega, theta=np.array([math.cos(angle), math.sin(angle)]), u_i=u_i)


@dataclass(frozen=True)
class SensorArray:
    """Equally spaced sensors on a measurement circle with arc-length weights."""

    center: np.ndarray
    radius: float
    count: int
    positions: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @classmethod
    def ring(cls, center, radius: float, count: int) -> "SensorArray":
        center = as_point(center)
        if radius <= 0.0 or count < 1:
            raise DomainError("sensor ring needs radius > 0 and count >= 1")
        ang = 2.0 * math.pi * np.arange(count) / count
        pos = center[None, :] + radius * np.column_stack([np.cos(ang), np.sin(ang)])
        w = np.full(count, 2.0 * math.pi * radius / count)
        return cls(center=center, radius=float(radius), count=int(count),
                   positions=pos, weights=w)

    @classmethod
    def half_wavelength(cls, center, radius: float, omega: float) -> "SensorArray":
        """Ring with one sensor per half wavelength of arc (count = ceil(2 R omega))."""
        if omega <= 0.0:
            raise DomainError("omega must be > 0")
        return cls.ring(center, radius, int(math.ceil(2.0 * radius * omega)))

    def spacing(self) -> float:
        return 2.0 * math.pi * self.radius / self.count


@dataclass(frozen=True)
class BoundaryData:
    """Complex field samples at the sensors for one illumination."""

    illumination: Illumination
    frequency_tag: str
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.frequency_tag not in (FUNDAMENTAL, SECOND_HARMONIC):
            raise DomainError(f"unknown frequency tag {self.frequency_tag!r}")
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=np.complex128)
        )


@dataclass(frozen=True)
class PolarizationTensor:
    """Dipole response matrix of a small inclusion (area units of the
    reference shape)."""

    m: np.ndarray


@dataclass(frozen=True)
class NoiseModel:
    """Additive complex Gaussian sensor noise, variance sigma^2 per sample."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0.0:
            raise DomainError("noise sigma must be >= 0")


# ----------------------------------------------------------------------------
# Vectorized Green-function tables (points x points)
# ----------------------------------------------------------------------------

def value_table(omega: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """G(a_i, b_j) as an (len(a), len(b)) complex array."""
    dx = a[:, 0][:, None] - b[:, 0][None, :]
    dy = a[:, 1][:, None] - b[:, 1][None, :]
    return green0_value(omega, dx, dy)


def gradient_table(omega: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gradient of G in its first argument: (len(a), len(b), 2) complex."""
    dx = a[:, 0][:, None] - b[:, 0][None, :]
    dy = a[:, 1][:, None] - b[:, 1][None, :]
    gx, gy = green0_gradient(omega, dx, dy)
    return np.stack([gx, gy], axis=-1)


def hessian_table(omega: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hessian components (hxx, hxy, hyy) of G: (len(a), len(b), 3) complex."""
    dx = a[:, 0][:, None] - b[:, 0][None, :]
    dy = a[:, 1][:, None] - b[:, 1][None, :]
    hxx, hxy, hyy = green0_hessian(omega, dx, dy)
    return np.stack([hxx, hxy, hyy], axis=-1)


def plane_wave_gradient(ill: Illumination, pts: np.ndarray) -> np.ndarray:
    """Gradient of the incoming plane wave at each point: (N, 2) complex."""
    phase = np.exp(1j * ill.omega * (pts @ ill.theta))
    return (1j * ill.omega * ill.u_i) * phase[:, None] * ill.theta[None, :]


# ----------------------------------------------------------------------------
# Quadrature kernels shared with the scenario engine
# ----------------------------------------------------------------------------

def _cell_weights(medium: MediumRealization, exclude=None) -> np.ndarray:
    """mu * h^2 per cell, flattened; optionally zero the cell holding a point."""
    w = medium.values.ravel() * medium.cell_size ** 2
    if exclude is not None:
        idx = medium.cell_index(exclude)
        if idx is not None:
            w = w.copy()
            w[idx[0] * medium.params.grid_n + idx[1]] = 0.0
    return w


def _background_kernel(mu_h2, grad_u0_cells, grad_cells_targets):
    """-(integral of mu grad U0 . grad_y G(., y)) by the midpoint rule."""
    cx = mu_h2 * grad_u0_cells[:, 0]
    cy = mu_h2 * grad_u0_cells[:, 1]
    return -(cx @ grad_cells_targets[:, :, 0] + cy @ grad_cells_targets[:, :, 1])


def _born_gradient_kernel(mu_h2, g1_direct, hess_cells, grad_cells_targets):
    """Gradient (in the reflector argument) of the Born-corrected Green
    function toward each target.

    g1_direct            (Nt, 2)  gradient of the background term
    hess_cells           (Nc, 3)  Green Hessian between cells and the reflector
    grad_cells_targets   (Nc, Nt, 2)
    """
    wx = mu_h2 * hess_cells[:, 0]
    wc = mu_h2 * hess_cells[:, 1]
    wy = mu_h2 * hess_cells[:, 2]
    corr_x = wx @ grad_cells_targets[:, :, 0] + wc @ grad_cells_targets[:, :, 1]
    corr_y = wc @ grad_cells_targets[:, :, 0] + wy @ grad_cells_targets[:, :, 1]
    return g1_direct + np.stack([corr_x, corr_y], axis=-1)


def _excluded_flat(medium: MediumRealization, point):
    """Flat index of the cell containing ``point``, or None outside the box."""
    idx = medium.cell_index(point)
    return None if idx is None else idx[0] * medium.params.grid_n + idx[1]


def _source_rand_kernel(medium, reflector, ill, hess_cells, excluded_flat):
    """Medium-induced part of the quadratic source amplitude.

    Integrates (mu(y) e^{i w th.y} - mu(z_r) e^{i w th.z_r}) against the
    Green Hessian at the reflector, contracted twice with the illumination
    direction through chi; the reflector cell is excluded by index (the
    integrand does not vanish where mu itself is zero).
    """
    from .medium import sample_at

    th = ill.theta
    om = ill.omega
    cells = medium.cells_flat()
    mu_zr = sample_at(medium, reflector.z_r)
    phases = np.exp(1j * om * (cells @ th))
    phase_zr = np.exp(1j * om * float(reflector.z_r @ th))
    diff = (medium.values.ravel() * phases - mu_zr * phase_zr) * medium.cell_size ** 2
    if excluded_flat is not None:
        diff = diff.copy()
        diff[excluded_flat] = 0.0
    htheta_x = hess_cells[:, 0] * th[0] + hess_cells[:, 1] * th[1]
    htheta_y = hess_cells[:, 1] * th[0] + hess_cells[:, 2] * th[1]
    b = np.array([np.sum(diff * htheta_x), np.sum(diff * htheta_y)])
    chith = reflector.chi @ th
    return (
        -2.0 * om ** 2 * ill.u_i ** 2 * phase_zr * (chith[0] * b[0] + chith[1] * b[1])
    )


def _second_harmonic_kernel(mu_h2, s_det, s_rand, omega, delta, shape_area,
                            g2_zr_targets, g2_targets_cells, g2_cells_zr):
    """Leading-order second-harmonic samples at the targets."""
    corr = g2_targets_cells @ (mu_h2 * g2_cells_zr)
    return -(delta ** 2) * shape_area * (
        (s_det + s_rand) * g2_zr_targets - 4.0 * omega ** 2 * s_det * corr
    )


def _require_enclosing(medium: MediumRealization, sensors: SensorArray) -> None:
    rad = medium.params.support_box.circumradius(about=sensors.center)
    if sensors.radius <= rad:
        raise ConfigError(
            f"sensor radius {sensors.radius} does not enclose the medium "
            f"support (circumradius {rad:.6g})"
        )


# ----------------------------------------------------------------------------
# Public operations
# ----------------------------------------------------------------------------

def polarization_tensor(sigma_r: float, shape_area: float = math.pi) -> PolarizationTensor:
    """Dipole polarization tensor of a disk-shaped inclusion.

    For a disk of reference area |B| the tensor is
    2 (sigma_r - 1) / (sigma_r + 1) |B| I; positive definite for sigma_r > 1,
    negative definite for sigma_r < 1.
    """
    if sigma_r <= 0.0:
        raise DomainError("sigma_r must be > 0")
    m = 2.0 * (sigma_r - 1.0) / (sigma_r + 1.0) * shape_area * np.eye(2)
    return PolarizationTensor(m=m)


def born_background_field(medium: MediumRealization, ill: Illumination,
                          sensors: SensorArray) -> BoundaryData:
    """Single-scattering field of the medium alone at the sensors."""
    _require_enclosing(medium, sensors)
    cells = medium.cells_flat()
    mu_h2 = _cell_weights(medium)
    grad_u0 = plane_wave_gradient(ill, cells)
    g1 = gradient_table(ill.omega, cells, sensors.positions)
    samples = _background_kernel(mu_h2, grad_u0, g1)
    return BoundaryData(illumination=ill, frequency_tag=FUNDAMENTAL, samples=samples)


def born_green(medium: MediumRealization, omega: float, x, z) -> GreenEval:
    """Green function with the first-order medium correction.

    Value and gradient (in ``x``) are corrected; the Hessian is not
    populated.  The correction integral is symmetric in (x, z), so the
    corrected value keeps the reciprocity of the exact kernel and the
    gradient in ``z`` is obtained by swapping the arguments.
    """
    x = as_point(x)
    z = as_point(z)
    if np.hypot(*(x - z)) < medium.cell_size:
        raise SingularityError("evaluation points closer than one medium cell")
    cells = medium.cells_flat()
    mu_h2 = _cell_weights(medium, exclude=x)
    if medium.cell_index(z) is not None:
        mu_h2 = mu_h2.copy()
        iy, ix = medium.cell_index(z)
        mu_h2[iy * medium.params.grid_n + ix] = 0.0

    g0 = green0(omega, x, z)
    g_cells_z = gradient_table(omega, cells, z[None, :])[:, 0, :]
    g_cells_x = gradient_table(omega, cells, x[None, :])[:, 0, :]
    corr = -np.sum(mu_h2 * np.sum(g_cells_z * g_cells_x, axis=1))

    hess_x = hessian_table(omega, cells, x[None, :])[:, 0, :]
    grad = _born_gradient_kernel(
        mu_h2, g0.gradient[None, :], hess_x, g_cells_z[:, None, :]
    )[0]
    return GreenEval(value=g0.value + corr, gradient=grad, hessian=None)


def fundamental_data(medium: MediumRealization, reflector: ReflectorSpec,
                     ill: Illumination, sensors: SensorArray) -> BoundaryData:
    """Total scattered field at the fundamental frequency.

    Background medium field plus the dipole term
    -delta^2 (M grad U0(z_r)) . grad_z G_born(x, z_r).
    """
    if not medium.params.support_box.contains(reflector.z_r):
        raise ConfigError("reflector must lie inside the medium support")
    if reflector.delta * ill.omega > 0.5:
        warnings.warn(
            f"delta * omega = {reflector.delta * ill.omega:.3g} > 0.5; the "
            "small-reflector expansion degrades",
            stacklevel=2,
        )
    background = born_background_field(medium, ill, sensors)

    cells = medium.cells_flat()
    mu_h2 = _cell_weights(medium, exclude=reflector.z_r)
    g1_direct = gradient_table(ill.omega, reflector.z_r[None, :], sensors.positions)[0]
    hess_cells = hessian_table(ill.omega, cells, reflector.z_r[None, :])[:, 0, :]
    g1_cells = gradient_table(ill.omega, cells, sensors.positions)
    grad_born = _born_gradient_kernel(mu_h2, g1_direct, hess_cells, g1_cells)

    m = polarization_tensor(reflector.sigma_r, reflector.shape_area).m
    p = m @ plane_wave_gradient(ill, reflector.z_r[None, :])[0]
    term = -(reflector.delta ** 2) * (grad_born @ p)
    return BoundaryData(
        illumination=ill,
        frequency_tag=FUNDAMENTAL,
        samples=background.samples + term,
    )


def source_det(reflector: ReflectorSpec, ill: Illumination) -> complex:
    """Deterministic quadratic source amplitude of the reflector."""
    th = ill.theta
    quad = float(th @ reflector.chi @ th)
    return complex(
        -(ill.omega ** 2) * ill.u_i ** 2
        * np.exp(2j * ill.omega * float(reflector.z_r @ th)) * quad
    )


def source_rand(medium: MediumRealization, reflector: ReflectorSpec,
                ill: Illumination) -> complex:
    """Medium-induced part of the quadratic source amplitude.

    Midpoint quadrature with the reflector cell excluded; the integrand
    vanishes at the reflector so the integral is well defined.
    """
    if not medium.params.support_box.contains(reflector.z_r):
        raise ConfigError("reflector must lie inside the medium support")
    cells = medium.cells_flat()
    hess_cells = hessian_table(ill.omega, reflector.z_r[None, :], cells)[0]
    return complex(_source_rand_kernel(
        medium, reflector, ill, hess_cells, _excluded_flat(medium, reflector.z_r)
    ))


def second_harmonic_data(medium: MediumRealization, reflector: ReflectorSpec,
                         ill: Illumination, sensors: SensorArray) -> BoundaryData:
    """Second-harmonic field at the sensors (frequency 2 omega)."""
    if not medium.params.support_box.contains(reflector.z_r):
        raise ConfigError("reflector must lie inside the medium support")
    if reflector.delta * ill.omega > 0.5:
        warnings.warn(
            f"delta * omega = {reflector.delta * ill.omega:.3g} > 0.5; the "
            "small-reflector expansion degrades",
            stacklevel=2,
        )
    _require_enclosing(medium, sensors)
    om2 = 2.0 * ill.omega
    cells = medium.cells_flat()
    mu_h2 = _cell_weights(medium, exclude=reflector.z_r)

    hess_cells = hessian_table(ill.omega, reflector.z_r[None, :], cells)[0]
    s_det = source_det(reflector, ill)
    s_rand = _source_rand_kernel(
        medium, reflector, ill, hess_cells, _excluded_flat(medium, reflector.z_r)
    )

    g2_zr_sensors = value_table(om2, reflector.z_r[None, :], sensors.positions)[0]
    g2_sensors_cells = value_table(om2, sensors.positions, cells)
    g2_cells_zr = value_table(om2, cells, reflector.z_r[None, :])[:, 0]
    samples = _second_harmonic_kernel(
        mu_h2, s_det, s_rand, ill.omega, reflector.delta, reflector.shape_area,
        g2_zr_sensors, g2_sensors_cells, g2_cells_zr,
    )
    return BoundaryData(
        illumination=ill, frequency_tag=SECOND_HARMONIC, samples=samples
    )


def _noise_draw(sigma: float, seed: int, count: int) -> np.ndarray:
    """Complex Gaussian noise, one counter-based substream per sensor."""
    scale = sigma / math.sqrt(2.0)
    out = np.empty(count, dtype=np.complex128)
    for j in range(count):
        gen = np.random.Generator(np.random.Philox(key=seed, counter=j << 128))
        re, im = gen.standard_normal(2)
        out[j] = scale * (re + 1j * im)
    return out


def add_measurement_noise(data: BoundaryData, noise: NoiseModel,
                          wavelength: float) -> BoundaryData:
    """Add independent complex Gaussian noise per sensor (variance sigma^2).

    The per-sensor substreams depend only on (seed, sensor index), so the
    result is independent of evaluation order.  ``wavelength`` is used to
    warn when the sensor spacing strays from the half-wavelength assumption
    of the white-noise model.
    """
    if noise.sigma == 0.0:
        return data
    count = data.samples.shape[0]
    return replace(data, samples=data.samples + _noise_draw(noise.sigma, noise.seed, count))


def check_noise_spacing(sensors: SensorArray, wavelength: float) -> None:
    """Warn when sensors are not approximately half a wavelength apart."""
    target = 0.5 * wavelength
    if abs(sensors.spacing() - target) > 0.25 * target:
        warnings.warn(
            f"sensor spacing {sensors.spacing():.4g} differs from half a "
            f"wavelength {target:.4g}; the white-noise sensor model assumes "
            "half-wavelength sampling",
            stacklevel=2,
        )


# ----------------------------------------------------------------------------
# CSV serialization
# ----------------------------------------------------------------------------

def boundary_to_csv(data: BoundaryData, sensors: SensorArray, path,
                    noise: NoiseModel | None = None) -> None:
    ill = data.illumination
    with open(path, "w", newline="") as f:
        f.write("# boundary data\n")
        f.write(
            f"# omega = {ill.omega:.17g}, theta = {ill.theta[0]:.17g} "
            f"{ill.theta[1]:.17g}, u_i = {ill.u_i:.17g}\n"
        )
        f.write(f"# frequency_tag = {data.frequency_tag}\n")
        sig = 0.0 if noise is None else noise.sigma
        seed = 0 if noise is None else noise.seed
        f.write(f"# noise_sigma = {sig:.17g}, noise_seed = {seed}\n")
        f.write(
            f"# sensors: center = {sensors.center[0]:.17g} "
            f"{sensors.center[1]:.17g}, radius = {sensors.radius:.17g}, "
            f"count = {sensors.count}\n"
        )
        f.write("sensor_index,pos_x,pos_y,re,im\n")
        for j in range(sensors.count):
            s = data.samples[j]
            f.write(
                f"{j},{sensors.positions[j, 0]:.17g},{sensors.positions[j, 1]:.17g},"
                f"{s.real:.17g},{s.imag:.17g}\n"
            )


def boundary_from_csv(path):
    """Read boundary data written by :func:`boundary_to_csv`.

    Returns (BoundaryData, SensorArray).  The sensor ring is rebuilt from the
    header; the per-row positions are informational.
    """
    from .errors import FormatError

    header = {}
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                prefix = ""
                if body.startswith("sensors:"):
                    prefix = "sensors."
                    body = body[len("sensors:"):]
                for part in body.split(","):
                    if "=" in part:
                        key, val = part.split("=", 1)
                        header[prefix + key.strip()] = val.strip()
                continue
            if line.startswith("sensor_index"):
                continue
            rows.append(line.split(","))
    try:
        omega = float(header["omega"])
        tx, ty = map(float, header["theta"].split())
        u_i = float(header["u_i"])
        tag = header["frequency_tag"]
        cx, cy = map(float, header["sensors.center"].split())
        radius = float(header["sensors.radius"])
        count = int(header["sensors.count"])
        samples = np.array([float(r[3]) + 1j * float(r[4]) for r in rows])
    except (KeyError, ValueError, IndexError) as exc:
        raise FormatError(f"malformed boundary CSV {path}: {exc}") from exc
    if samples.shape[0] != count:
        raise FormatError(
            f"boundary CSV {path}: {samples.shape[0]} rows for {count} sensors"
        )
    ill = Illumination(omega=omega, theta=np.array([tx, ty]), u_i=u_i)
    sensors = SensorArray.ring(np.array([cx, cy]), radius, count)
    return BoundaryData(illumination=ill, frequency_tag=tag, samples=samples), sensors
