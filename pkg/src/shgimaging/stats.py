"""Closed-form stability predictors and the Monte Carlo harness.

``predict`` evaluates the leading-order expectation and signal-to-noise
formulas for both imaging functionals; ``estimate_peak_statistics`` and
``run_sweep`` produce their empirical counterparts.  The predictor formulas
keep only leading-order terms and use large-ring kernel limits, so empirical
comparisons use generous tolerances (20% for expectations, a factor of a few
for variances); the second-harmonic medium-noise figure is a lower bound and
is never asserted as an equality.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NoPeakError
from .forward import SensorArray
from .imaging import kernel_R, localize
from .medium import generate
from .scenario import ScenarioConfig, ScenarioEngine, derive_seed

__all__ = [
    "Predictors",
    "SweepSpec",
    "SweepRow",
    "ExperimentReport",
    "predict",
    "estimate_peak_statistics",
    "run_sweep",
    "speckle_covariance_P",
    "report_to_csv",
    "report_summary",
]

SWEEP_PARAMETERS = ("medium_noise", "volume", "measurement_noise")


@dataclass(frozen=True)
class Predictors:
    """Leading-order peak expectations and signal-to-noise ratios.

    Medium-noise SNRs are +inf when sigma_mu = 0 (no medium noise); the
    second-harmonic medium figure is a lower bound with explicit constant
    ``c_bound``.
    """

    expect_I_peak: float
    expect_J_peak: float
    snr_I_medium: float
    snr_J_medium_lower_bound: float
    snr_I_meas: float
    snr_J_meas: float
    c_bound: float


def predict(cfg: ScenarioConfig) -> Predictors:
    """Evaluate the closed-form predictors for one scenario."""
    med = cfg.medium
    refl = cfg.reflector
    om = cfg.omega
    ui = cfg.u_i
    n = cfg.n_illuminations
    delta2 = refl.delta ** 2
    chi = refl.chi
    diam = med.support_box.diagonal
    contrast = (refl.sigma_r - 1.0) / (refl.sigma_r + 1.0)
    itheta = math.pi * (chi[0, 0] + chi[1, 1])  # circle average of the quadratic form
    m_scalar = 2.0 * contrast * refl.shape_area

    expect_i = -(math.pi * om / 4.0) * delta2 * m_scalar * ui
    expect_j = (refl.shape_area / 8.0) * delta2 * om * ui ** 2 * itheta

    if med.sigma_mu > 0.0:
        snr_i_med = (
            math.sqrt(2.0) * math.pi ** 1.5 * abs(contrast) * om * delta2 * ui
            / (med.sigma_mu * med.l_mu * math.sqrt(om * diam))
        )
    else:
        snr_i_med = math.inf

    c_bound = 2.0 ** 18.5 * math.pi ** 3 * math.e / 1.5 ** 2
    max_chi = float(np.max(np.abs(chi)))
    if med.sigma_mu > 0.0 and max_chi > 0.0:
        alpha = med.alpha
        snr_j_med = (
            med.l_mu ** alpha * itheta
            / (
                math.sqrt(c_bound) * med.sigma_mu * min(om ** (-alpha), 1.0)
                * max_chi * math.sqrt((om * diam) ** (3.0 + 2.0 * alpha) + 1.0)
            )
        )
    elif med.sigma_mu == 0.0:
        snr_j_med = math.inf
    else:
        snr_j_med = 0.0

    sigma = cfg.noise_sigma
    if sigma > 0.0:
        snr_i_meas = (
            math.sqrt(math.pi * n) * delta2 * om ** 2 * abs(refl.sigma_r - 1.0) * ui
            / ((refl.sigma_r + 1.0) * sigma)
        )
        sigma_nu = sigma ** 2 * cfg.wavelength / 2.0
        snr_j_meas = (
            delta2 * om ** 2 * ui ** 2 * math.sqrt(n)
            * max(chi[0, 0], chi[1, 1]) / (math.pi * sigma_nu)
        )
    else:
        snr_i_meas = math.inf
        snr_j_meas = math.inf

    return Predictors(
        expect_I_peak=expect_i,
        expect_J_peak=expect_j,
        snr_I_medium=snr_i_med,
        snr_J_medium_lower_bound=snr_j_med,
        snr_I_meas=snr_i_meas,
        snr_J_meas=snr_j_meas,
        c_bound=c_bound,
    )


# ----------------------------------------------------------------------------
# Monte Carlo peak statistics
# ----------------------------------------------------------------------------

def estimate_peak_statistics(cfg: ScenarioConfig, n_trials: int,
                             master_seed: int = 0,
                             engine: ScenarioEngine | None = None) -> dict:
    """Mean and variance of I(z_r) and J(z_r) over medium realizations.

    Evaluates the functionals at the true reflector location (not at the
    image argmax).  Measurement noise is included when the scenario has a
    nonzero noise sigma.
    """
    if n_trials < 30:
        raise ConfigError("peak statistics need at least 30 trials")
    eng = engine or ScenarioEngine(cfg, build_backprop=False)
    zr = cfg.reflector.z_r
    vals_i = np.empty(n_trials, dtype=np.complex128)
    vals_j = np.empty(n_trials, dtype=np.complex128)
    sig = (cfg.noise_sigma, cfg.noise_sigma)
    quiet = None
    if cfg.medium.sigma_mu == 0.0:
        # degenerate medium: synthesize once, redraw only the sensor noise
        quiet = eng.datasets(generate(cfg.medium))
    for t in range(n_trials):
        if quiet is not None:
            fund, second = eng.apply_noise(
                *quiet, noise_sigma=sig, noise_seed=derive_seed(master_seed, t, 1)
            )
        else:
            med = generate(replace(cfg.medium, seed=derive_seed(master_seed, t)))
            fund, second = eng.datasets(
                med, noise_sigma=sig if cfg.noise_sigma > 0.0 else (0.0, 0.0),
                noise_seed=derive_seed(master_seed, t, 1),
            )
        vals_i[t], vals_j[t] = eng.functionals_at(zr, fund, second)
    return {
        "mean_I_peak": complex(vals_i.mean()),
        "var_I_peak": float(np.mean(np.abs(vals_i - vals_i.mean()) ** 2)),
        "mean_J_peak": complex(vals_j.mean()),
        "var_J_peak": float(np.mean(np.abs(vals_j - vals_j.mean()) ** 2)),
    }


# ----------------------------------------------------------------------------
# Parameter sweeps
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """One localization-error sweep: parameter, values, trials, scenario."""

    swept_parameter: str
    values: tuple
    trials_per_value: int
    base_config: ScenarioConfig
    master_seed: int = 0

    def __post_init__(self):
        if self.swept_parameter not in SWEEP_PARAMETERS:
            raise ConfigError(
                f"swept_parameter must be one of {SWEEP_PARAMETERS}"
            )
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ConfigError("sweep needs a nonempty list of values")
        if any(v < 0.0 for v in vals) or (
            self.swept_parameter == "volume" and any(v <= 0.0 for v in vals)
        ):
            raise ConfigError("sweep values must be positive")
        if self.trials_per_value < 2:
            raise ConfigError("trials_per_value must be at least 2")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class SweepRow:
    parameter_value: float
    error_std_I: float
    error_std_J: float
    error_std_cells_I: float
    error_std_cells_J: float
    mean_peak_I: float
    mean_peak_J: float
    trials_used: int
    failures: int


@dataclass(frozen=True)
class ExperimentReport:
    spec: SweepSpec
    per_value: tuple = field(default_factory=tuple)


def _trial_scenario(spec: SweepSpec, value: float, med_seed: int):
    cfg = spec.base_config
    med = cfg.medium
    refl = cfg.reflector
    if spec.swept_parameter == "medium_noise":
        med = replace(med, sigma_mu=value, seed=med_seed)
    elif spec.swept_parameter == "volume":
        med = replace(med, seed=med_seed)
        refl = replace(refl, delta=math.sqrt(value / refl.shape_area))
    else:  # measurement_noise: sensor noise only, no medium fluctuations
        med = replace(med, sigma_mu=0.0, seed=med_seed)
    return med, refl


def _noiseless_rms(engine: ScenarioEngine, refl) -> tuple:
    """RMS sample magnitude per channel for the medium-free scenario."""
    cfg = engine.cfg
    quiet = generate(replace(cfg.medium, sigma_mu=0.0))
    fund, second = engine.datasets(quiet, reflector=refl)
    rms = lambda ds: math.sqrt(
        float(np.mean([np.mean(np.abs(bd.samples) ** 2) for bd in ds]))
    )
    return rms(fund), rms(second)


def run_sweep(spec: SweepSpec, threads: int = 1,
              engine: ScenarioEngine | None = None) -> ExperimentReport:
    """Monte Carlo localization-error sweep, bit-reproducible per master seed.

    For each (value, trial) a medium (and, for the measurement sweep, noise)
    realization is drawn from a seed derived from (master_seed, value index,
    trial index); both functionals are imaged and localized.  Localization
    failures are counted, not fatal.  Aggregation runs in (value, trial)
    order whatever the thread count.
    """
    cfg = spec.base_config
    eng = engine or ScenarioEngine(cfg)
    zr = cfg.reflector.z_r
    grid = eng.grid
    cell = grid.dx

    meas_rms: dict = {}
    if spec.swept_parameter == "measurement_noise":
        meas_rms["fund"], meas_rms["second"] = _noiseless_rms(eng, cfg.reflector)

    def one_trial(vi: int, ti: int):
        value = spec.values[vi]
        med_params, refl = _trial_scenario(
            spec, value, derive_seed(spec.master_seed, vi, ti, 0)
        )
        med = generate(med_params)
        if spec.swept_parameter == "measurement_noise":
            sig = (value * meas_rms["fund"], value * meas_rms["second"])
        else:
            sig = (0.0, 0.0)
        fund, second = eng.datasets(
            med, reflector=refl, noise_sigma=sig,
            noise_seed=derive_seed(spec.master_seed, vi, ti, 1),
        )
        out = {}
        for tag, img in (
            ("I", eng.backprop.image_fundamental(fund)),
            ("J", eng.backprop.image_second_harmonic(second)),
        ):
            try:
                pt, peak = localize(img)
                out[tag] = (float(np.hypot(*(pt - zr))), peak)
            except NoPeakError:
                out[tag] = None
        return out

    jobs = [(vi, ti) for vi in range(len(spec.values))
            for ti in range(spec.trials_per_value)]
    results = {}
    if threads == 1:
        for vi, ti in jobs:
            results[(vi, ti)] = one_trial(vi, ti)
    else:
        workers = threads if threads > 0 else None
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = {key: pool.submit(one_trial, *key) for key in jobs}
            for key in jobs:
                results[key] = futs[key].result()

    rows = []
    for vi, value in enumerate(spec.values):
        errs = {"I": [], "J": []}
        peaks = {"I": [], "J": []}
        failures = 0
        for ti in range(spec.trials_per_value):
            res = results[(vi, ti)]
            for tag in ("I", "J"):
                if res[tag] is None:
                    failures += 1
                else:
                    errs[tag].append(res[tag][0])
                    peaks[tag].append(res[tag][1])
        std = lambda a: float(np.std(a)) if a else float("nan")
        mean = lambda a: float(np.mean(a)) if a else float("nan")
        rows.append(
            SweepRow(
                parameter_value=value,
                error_std_I=std(errs["I"]),
                error_std_J=std(errs["J"]),
                error_std_cells_I=std(errs["I"]) / cell,
                error_std_cells_J=std(errs["J"]) / cell,
                mean_peak_I=mean(peaks["I"]),
                mean_peak_J=mean(peaks["J"]),
                trials_used=spec.trials_per_value,
                failures=failures,
            )
        )
    return ExperimentReport(spec=spec, per_value=tuple(rows))


# ----------------------------------------------------------------------------
# Speckle covariance kernel
# ----------------------------------------------------------------------------

def speckle_covariance_P(omega: float, z_s, y, z_s2, sensors: SensorArray,
                         n_theta: int = 64) -> complex:
    """Direction average of the paired point-spread matrices.

    Trapezoidal rule over illumination angles applied to
    exp(i w th.(zs - zs')) th^T R(zs, y) conj(R(zs', y)) th.
    """
    z_s = np.asarray(z_s, dtype=float)
    z_s2 = np.asarray(z_s2, dtype=float)
    r1 = kernel_R(omega, z_s, y, sensors)
    r2 = np.conj(kernel_R(omega, z_s2, y, sensors))
    ang = 2.0 * math.pi * np.arange(n_theta) / n_theta
    th = np.column_stack([np.cos(ang), np.sin(ang)])
    quad = np.einsum("ki,ij,kj->k", th, r1 @ r2, th)
    phase = np.exp(1j * omega * (th @ (z_s - z_s2)))
    return complex((2.0 * math.pi / n_theta) * np.sum(quad * phase))


# ----------------------------------------------------------------------------
# Report serialization
# ----------------------------------------------------------------------------

def report_to_csv(report: ExperimentReport, path) -> None:
    spec = report.spec
    with open(path, "w", newline="") as f:
        f.write("# localization-error sweep\n")
        f.write(
            f"# swept_parameter = {spec.swept_parameter}, trials_per_value = "
            f"{spec.trials_per_value}, master_seed = {spec.master_seed}\n"
        )
        f.write(
            "parameter_value,error_std_I,error_std_J,error_std_cells_I,"
            "error_std_cells_J,mean_peak_I,mean_peak_J,trials_used,failures\n"
        )
        for r in report.per_value:
            f.write(
                f"{r.parameter_value:.17g},{r.error_std_I:.17g},"
                f"{r.error_std_J:.17g},{r.error_std_cells_I:.17g},"
                f"{r.error_std_cells_J:.17g},{r.mean_peak_I:.17g},"
                f"{r.mean_peak_J:.17g},{r.trials_used},{r.failures}\n"
            )


def _finite_or_label(x: float):
    return x if math.isfinite(x) else "unbounded"


def report_summary(report: ExperimentReport, predictors: Predictors,
                   config_lines=None) -> str:
    """Structured text summary (JSON) of a sweep with its predictor block."""
    spec = report.spec
    doc = {
        "swept_parameter": spec.swept_parameter,
        "trials_per_value": spec.trials_per_value,
        "master_seed": spec.master_seed,
        "config": list(config_lines) if config_lines else [],
        "predictors": {
            "expect_I_peak": predictors.expect_I_peak,
            "expect_J_peak": predictors.expect_J_peak,
            "snr_I_medium": _finite_or_label(predictors.snr_I_medium),
            "snr_J_medium_lower_bound": _finite_or_label(
                predictors.snr_J_medium_lower_bound
            ),
            "snr_I_meas": _finite_or_label(predictors.snr_I_meas),
            "snr_J_meas": _finite_or_label(predictors.snr_J_meas),
            "c_bound": predictors.c_bound,
        },
        "per_value": [
            {
                "parameter_value": r.parameter_value,
                "error_std_I": r.error_std_I,
                "error_std_J": r.error_std_J,
                "error_std_cells_I": r.error_std_cells_I,
                "error_std_cells_J": r.error_std_cells_J,
                "mean_peak_I": r.mean_peak_I,
                "mean_peak_J": r.mean_peak_J,
                "trials_used": r.trials_used,
                "failures": r.failures,
            }
            for r in report.per_value
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)
