"""Scenario configuration and a cached engine for repeated synthesis.

A scenario bundles the medium statistics, the reflector, the illumination
set, the sensor ring, the search grid and the measurement-noise model.  The
engine precomputes every Green-function table that does not depend on the
medium realization, which makes Monte Carlo sweeps two orders of magnitude
faster than calling the one-shot operations per trial while producing the
same numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import forward as fw
from . import imaging as im
from .errors import ConfigError
from .forward import (
    FUNDAMENTAL,
    SECOND_HARMONIC,
    BoundaryData,
    Illumination,
    NoiseModel,
    ReflectorSpec,
    SensorArray,
)
from .imaging import Backpropagator, SearchGrid
from .medium import MediumParams, MediumRealization, generate, sample_at

__all__ = ["ScenarioConfig", "ScenarioEngine", "derive_seed"]


def derive_seed(*entropy) -> int:
    """Fold a tuple of integers into one 64-bit stream key."""
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one simulation scenario."""

    medium: MediumParams
    reflector: ReflectorSpec
    omega: float
    u_i: float = 1.0
    n_illuminations: int = 8
    sensor_radius: float = 3.0
    sensor_count: int = 0  # 0 selects half-wavelength spacing
    grid_nx: int = 128
    grid_ny: int = 128
    noise_sigma: float = 0.0
    noise_seed: int = 0
    output_dir: Path = Path("out")

    def __post_init__(self):
        if self.omega <= 0.0:
            raise ConfigError("omega must be > 0")
        if self.n_illuminations < 1:
            raise ConfigError("need at least one illumination")
        if self.noise_sigma < 0.0:
            raise ConfigError("noise sigma must be >= 0")
        if not self.medium.support_box.contains(self.reflector.z_r):
            raise ConfigError("reflector lies outside the medium support box")
        rad = self.medium.support_box.circumradius(
            about=self.medium.support_box.center
        )
        if self.sensor_radius <= rad:
            raise ConfigError(
                f"sensor radius {self.sensor_radius} must exceed the medium "
                f"circumradius {rad:.6g}"
            )
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    @property
    def wavelength(self) -> float:
        return 2.0 * math.pi / self.omega

    def sensors(self) -> SensorArray:
        center = self.medium.support_box.center
        if self.sensor_count > 0:
            return SensorArray.ring(center, self.sensor_radius, self.sensor_count)
        return SensorArray.half_wavelength(center, self.sensor_radius, self.omega)

    def illuminations(self):
        n = self.n_illuminations
        return [
            Illumination.from_angle(self.omega, 2.0 * math.pi * j / n, self.u_i)
            for j in range(n)
        ]

    def search_grid(self) -> SearchGrid:
        return SearchGrid(
            box=self.medium.support_box, n_x=self.grid_nx, n_y=self.grid_ny
        )

    def noise_model(self, stream: int = 0) -> NoiseModel:
        return NoiseModel(
            sigma=self.noise_sigma, seed=derive_seed(self.noise_seed, stream)
        )


class ScenarioEngine:
    """Medium-independent tables for one scenario, reused across trials.

    The synthesized samples agree with the one-shot operations in
    :mod:`shgimaging.forward` to floating-point roundoff; the regression
    tests compare the two paths directly.
    """

    def __init__(self, cfg: ScenarioConfig, build_backprop: bool = True):
        self.cfg = cfg
        self.sensors = cfg.sensors()
        self.illuminations = cfg.illuminations()
        self.grid = cfg.search_grid()
        om = cfg.omega
        zr = cfg.reflector.z_r

        probe = generate(replace(cfg.medium, sigma_mu=0.0))
        self._cells = probe.cells_flat()
        self._h2 = probe.cell_size ** 2
        idx = probe.cell_index(zr)
        n = cfg.medium.grid_n
        self._zr_flat = None if idx is None else idx[0] * n + idx[1]

        pos = self.sensors.positions
        self._g1_cells_sensors = fw.gradient_table(om, self._cells, pos)
        self._g1_zr_sensors = fw.gradient_table(om, zr[None, :], pos)[0]
        self._hess_zr_cells = fw.hessian_table(om, zr[None, :], self._cells)[0]
        om2 = 2.0 * om
        self._g2_zr_sensors = fw.value_table(om2, zr[None, :], pos)[0]
        self._g2_sensors_cells = fw.value_table(om2, pos, self._cells)
        self._g2_cells_zr = fw.value_table(om2, self._cells, zr[None, :])[:, 0]
        self.backprop = Backpropagator(om, self.sensors, self.grid) if build_backprop else None

    # -- medium-dependent pieces ------------------------------------------

    def _mu_h2(self, medium: MediumRealization, exclude_reflector: bool):
        p = medium.params
        if p.grid_n != self.cfg.medium.grid_n or p.support_box != self.cfg.medium.support_box:
            raise ConfigError(
                "medium grid geometry does not match the engine's cached tables"
            )
        w = medium.values.ravel() * self._h2
        if exclude_reflector and self._zr_flat is not None:
            w = w.copy()
            w[self._zr_flat] = 0.0
        return w

    def _resolve_reflector(self, reflector: ReflectorSpec | None) -> ReflectorSpec:
        if reflector is None:
            return self.cfg.reflector
        # the cached tables are tied to the configured location; overrides
        # may change size, contrast or susceptibility only
        if not np.array_equal(reflector.z_r, self.cfg.reflector.z_r):
            raise ConfigError(
                "engine tables are built for a fixed reflector location; "
                "rebuild the engine to move the reflector"
            )
        return reflector

    def fundamental(self, medium: MediumRealization, ill: Illumination,
                    reflector: ReflectorSpec | None = None) -> BoundaryData:
        refl = self._resolve_reflector(reflector)
        mu_h2_bg = self._mu_h2(medium, exclude_reflector=False)
        grad_u0 = fw.plane_wave_gradient(ill, self._cells)
        background = fw._background_kernel(mu_h2_bg, grad_u0, self._g1_cells_sensors)

        mu_h2 = self._mu_h2(medium, exclude_reflector=True)
        grad_born = fw._born_gradient_kernel(
            mu_h2, self._g1_zr_sensors, self._hess_zr_cells, self._g1_cells_sensors
        )
        m = fw.polarization_tensor(refl.sigma_r, refl.shape_area).m
        p = m @ fw.plane_wave_gradient(ill, refl.z_r[None, :])[0]
        samples = background - refl.delta ** 2 * (grad_born @ p)
        return BoundaryData(illumination=ill, frequency_tag=FUNDAMENTAL, samples=samples)

    def second_harmonic(self, medium: MediumRealization, ill: Illumination,
                        reflector: ReflectorSpec | None = None) -> BoundaryData:
        refl = self._resolve_reflector(reflector)
        mu_h2 = self._mu_h2(medium, exclude_reflector=True)
        s_det = fw.source_det(refl, ill)
        s_rand = fw._source_rand_kernel(
            medium, refl, ill, self._hess_zr_cells, self._zr_flat
        )
        samples = fw._second_harmonic_kernel(
            mu_h2, s_det, s_rand, ill.omega, refl.delta, refl.shape_area,
            self._g2_zr_sensors, self._g2_sensors_cells, self._g2_cells_zr,
        )
        return BoundaryData(illumination=ill, frequency_tag=SECOND_HARMONIC, samples=samples)

    def apply_noise(self, fund, second, noise_sigma: tuple[float, float],
                    noise_seed: int):
        """Noisy copies of both channel lists.

        Each (illumination, channel) pair gets an independent stream derived
        from ``noise_seed``, so adding noise trial by trial to cached
        noiseless data reproduces a full resynthesis exactly.
        """
        lam = self.cfg.wavelength
        if noise_sigma[0] > 0.0 or noise_sigma[1] > 0.0:
            fw.check_noise_spacing(self.sensors, lam)
        out_f, out_s = [], []
        for j, (bd_f, bd_s) in enumerate(zip(fund, second)):
            if noise_sigma[0] > 0.0:
                bd_f = fw.add_measurement_noise(
                    bd_f, NoiseModel(noise_sigma[0], derive_seed(noise_seed, j, 0)), lam
                )
            if noise_sigma[1] > 0.0:
                bd_s = fw.add_measurement_noise(
                    bd_s, NoiseModel(noise_sigma[1], derive_seed(noise_seed, j, 1)), lam
                )
            out_f.append(bd_f)
            out_s.append(bd_s)
        return out_f, out_s

    def datasets(self, medium: MediumRealization,
                 reflector: ReflectorSpec | None = None,
                 noise_sigma: tuple[float, float] = (0.0, 0.0),
                 noise_seed: int = 0):
        """Boundary data for every illumination at both frequencies.

        ``noise_sigma`` holds the per-sample noise level for the fundamental
        and second-harmonic channels.
        """
        fund = [self.fundamental(medium, ill, reflector) for ill in self.illuminations]
        second = [self.second_harmonic(medium, ill, reflector) for ill in self.illuminations]
        return self.apply_noise(fund, second, noise_sigma, noise_seed)

    # -- single-point functional evaluation (peak statistics) -------------

    def functionals_at(self, point, fund, second):
        """(I, J) evaluated at one point without building the full image."""
        point = np.asarray(point, dtype=float)
        om = self.cfg.omega
        pos = self.sensors.positions
        w = self.sensors.weights
        g1 = fw.gradient_table(om, point[None, :], pos)[0]
        g2 = fw.value_table(2.0 * om, point[None, :], pos)[0]
        acc_i = 0.0 + 0.0j
        for bd in fund:
            th = bd.illumination.theta
            v = th[0] * np.sum(w * np.conj(g1[:, 0]) * bd.samples) + th[1] * np.sum(
                w * np.conj(g1[:, 1]) * bd.samples
            )
            acc_i += np.exp(-1j * om * float(point @ th)) * v
        acc_i *= 2.0 * math.pi / (len(fund) * 1j * om)
        acc_j = 0.0 + 0.0j
        for bd in second:
            th = bd.illumination.theta
            acc_j += np.exp(-2j * om * float(point @ th)) * np.sum(
                w * np.conj(g2) * bd.samples
            )
        acc_j *= 2.0 * math.pi / len(second)
        return complex(acc_i), complex(acc_j)
