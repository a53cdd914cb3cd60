"""Acceptance suite: one test per criterion, one printed pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s`` (or ``python -m
tests.test_acceptance`` for a standalone report).  Heavy Monte Carlo pieces
are cached at module scope and shared between criteria.
"""

import math
import time
import warnings
from dataclasses import replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from shgimaging import cli
from shgimaging import forward as fw
from shgimaging import imaging as im
from shgimaging import medium as md
from shgimaging import specfun as sf
from shgimaging import stats as st
from shgimaging.geometry import Box
from shgimaging.scenario import ScenarioConfig, ScenarioEngine

OMEGA = 8.0
LAM = 2.0 * math.pi / OMEGA
ZR = np.array([-0.2, 0.5])
REFERENCE_DELTA = 0.004 / math.pi      # noiseless localization scenario
MC_VOLUME = 1e-2                       # reflector volume for the noisy studies
MC_DELTA = math.sqrt(MC_VOLUME / math.pi)


def _report(num: int, ok: bool, detail: str) -> bool:
    print(f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


def base_config(sigma_mu=0.02, delta=MC_DELTA, n_ill=8, noise_sigma=0.0, seed=0):
    return ScenarioConfig(
        medium=md.MediumParams(sigma_mu=sigma_mu, l_mu=0.25, grid_n=64, seed=seed),
        reflector=fw.ReflectorSpec(z_r=ZR, delta=delta, sigma_r=2.0, chi=np.eye(2)),
        omega=OMEGA,
        n_illuminations=n_ill,
        noise_sigma=noise_sigma,
    )


@lru_cache(maxsize=1)
def mc_engine() -> ScenarioEngine:
    return ScenarioEngine(base_config())


@lru_cache(maxsize=1)
def big_ring() -> fw.SensorArray:
    return fw.SensorArray.half_wavelength(np.zeros(2), 20.0 * LAM, OMEGA)


@lru_cache(maxsize=1)
def noiseless_images():
    """Reference-scenario images: quiet medium, no noise, 128^2 grid, 8 angles."""
    cfg = base_config(sigma_mu=0.0, delta=REFERENCE_DELTA)
    eng = mc_engine()
    quiet = md.generate(cfg.medium)
    fund = [eng.fundamental(quiet, ill, cfg.reflector) for ill in eng.illuminations]
    second = [eng.second_harmonic(quiet, ill, cfg.reflector) for ill in eng.illuminations]
    img_i = eng.backprop.image_fundamental(fund)
    img_j = eng.backprop.image_second_harmonic(second)
    return img_i, img_j


@lru_cache(maxsize=1)
def medium_noise_report():
    spec = st.SweepSpec(
        swept_parameter="medium_noise",
        values=(0.02, 0.04, 0.06, 0.08, 0.10),
        trials_per_value=60,
        base_config=base_config(),
        master_seed=20260809,
    )
    return st.run_sweep(spec, engine=mc_engine())


@lru_cache(maxsize=1)
def volume_report():
    spec = st.SweepSpec(
        swept_parameter="volume",
        values=tuple(np.logspace(-3, -1, 5)),  # two decades
        trials_per_value=60,
        base_config=base_config(),
        master_seed=20260810,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return st.run_sweep(spec, engine=mc_engine())


def check_criterion_1():
    t0 = time.perf_counter()
    r = im.kernel_R(OMEGA, ZR, ZR, big_ring())
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(r - (OMEGA / 8.0) * np.eye(2))) / (OMEGA / 8.0))
    ok = err < 0.03 and elapsed < 1.0
    return ok, f"kernel_R(z,z) vs omega/8: entrywise rel err {err:.2e} (<3%), {elapsed:.3f}s"


def check_criterion_2():
    ring = big_ring()
    worst = 0.0
    for dist in np.linspace(0.15 * LAM, 4.0 * LAM, 16):
        z2 = ZR + dist * np.array([0.6, 0.8])
        gy = fw.value_table(OMEGA, ring.positions, ZR[None, :])[:, 0]
        gz = fw.value_table(OMEGA, ring.positions, z2[None, :])[:, 0]
        lhs = complex(np.sum(ring.weights * np.conj(gy) * gz))
        rhs = sf.bessel_j0(OMEGA * dist) / (4.0 * OMEGA)
        worst = max(worst, abs(lhs - rhs) * 4.0 * OMEGA)
    ok = worst < 0.03
    return ok, f"scalar Helmholtz-Kirchhoff up to 4 wavelengths: err {worst:.2e} (<3%)"


def check_criterion_3():
    t0 = time.perf_counter()
    jump = max(sf.crossover_jumps().values())
    x = np.logspace(math.log10(0.01), math.log10(500.0), 2000)
    wr = sf.bessel_j1(x) * sf.bessel_y0(x) - sf.bessel_j0(x) * sf.bessel_y1(x)
    wr_err = float(np.max(np.abs(wr - 2.0 / (math.pi * x)) / (2.0 / (math.pi * x))))
    rng = np.random.default_rng(3)
    res = 0.0
    for om in rng.uniform(0.2, 30.0, size=10):
        r = rng.uniform(0.1, 100.0, size=100) / om
        ang = rng.uniform(0.0, 2.0 * math.pi, size=100)
        dx, dy = r * np.cos(ang), r * np.sin(ang)
        val = sf.green0_value(om, dx, dy)
        hxx, _, hyy = sf.green0_hessian(om, dx, dy)
        res = max(res, float(np.max(np.abs(hxx + hyy + om * om * val) / np.abs(val))))
    elapsed = time.perf_counter() - t0
    ok = jump < 1e-9 and wr_err < 1e-9 and res < 1e-8 and elapsed < 1.0
    return ok, (
        f"crossover jump {jump:.1e} (<1e-9), wronskian {wr_err:.1e} (<1e-9), "
        f"helmholtz residual over 1000 samples {res:.1e} (<1e-8), {elapsed:.2f}s"
    )


def check_criterion_4():
    t0 = time.perf_counter()
    img_i, img_j = noiseless_images()
    elapsed = time.perf_counter() - t0
    cell = img_i.grid.cell_diameter()
    di = float(np.hypot(*(im.localize(img_i)[0] - ZR)))
    dj = float(np.hypot(*(im.localize(img_j)[0] - ZR)))
    ok = di <= cell and dj <= cell and elapsed < 30.0
    return ok, (
        f"noiseless argmax offsets I {di / cell:.2f}, J {dj / cell:.2f} grid cells "
        f"(<=1), {elapsed:.1f}s (<30s)"
    )


def check_criterion_5():
    t0 = time.perf_counter()
    cfg = base_config()
    stats = st.estimate_peak_statistics(cfg, 120, master_seed=20260809,
                                        engine=mc_engine())
    elapsed = time.perf_counter() - t0
    expect_i = -(4.0 * math.pi ** 2 / 3.0) * MC_DELTA ** 2
    expect_j = (math.pi ** 2 / 4.0) * MC_DELTA ** 2 * OMEGA
    dev_i = abs(stats["mean_I_peak"].real - expect_i) / abs(expect_i)
    dev_j = abs(stats["mean_J_peak"].real - expect_j) / abs(expect_j)
    ok = dev_i < 0.20 and dev_j < 0.20 and elapsed < 600.0
    return ok, (
        f"120-trial means: Re I dev {dev_i:.1%}, J dev {dev_j:.1%} (<20%), "
        f"{elapsed:.1f}s (<600s)"
    )


def check_criterion_6():
    report = medium_noise_report()
    rows = report.per_value
    ordered = all(r.error_std_J <= r.error_std_I for r in rows)
    strict = all(r.error_std_J < r.error_std_I for r in rows[-2:])
    ok = ordered and strict
    pairs = ", ".join(
        f"{r.parameter_value:.2f}: J {r.error_std_cells_J:.2f} vs I "
        f"{r.error_std_cells_I:.2f}" for r in rows
    )
    return ok, f"error std (cells) per medium-noise level: {pairs}"


def check_criterion_7():
    report = volume_report()
    rows = report.per_value
    j_cells = [r.error_std_cells_J for r in rows]
    j_spread = max(j_cells) - min(j_cells)
    i_small = rows[0].error_std_I
    i_large = rows[-1].error_std_I
    ok = j_spread < 2.0 and i_small >= 3.0 * i_large
    return ok, (
        f"J spread {j_spread:.2f} cells (<2); I std smallest/largest volume "
        f"{rows[0].error_std_cells_I:.1f}/{rows[-1].error_std_cells_I:.1f} cells "
        f"(ratio {i_small / max(i_large, 1e-300):.1f}, >=3)"
    )


def check_criterion_8():
    img_i, img_j = noiseless_images()
    ratios = [im.fwhm(img_j, ax) / im.fwhm(img_i, ax) for ax in ("x", "y")]
    ok = all(0.4 <= r <= 0.6 for r in ratios)
    return ok, f"FWHM(J)/FWHM(I) = {ratios[0]:.3f} (x), {ratios[1]:.3f} (y) in [0.4, 0.6]"


def check_criterion_9():
    sigma0 = 0.02
    scaled = {}
    for n in (4, 8, 16):
        cfg = base_config(sigma_mu=0.0, n_ill=n, noise_sigma=sigma0)
        stats = st.estimate_peak_statistics(cfg, 1200, master_seed=7)
        scaled[n] = stats["var_I_peak"] * n / sigma0 ** 2
    vals = list(scaled.values())
    spread = (max(vals) - min(vals)) / min(vals)
    ok = spread < 0.15
    return ok, (
        "n Var[I(z_r)]/sigma^2 for n=4,8,16: "
        + ", ".join(f"{scaled[n]:.4f}" for n in (4, 8, 16))
        + f" (spread {spread:.1%} < 15%)"
    )


def check_criterion_10(tmp_dir: Path):
    cfg_text = (
        "medium.sigma_mu = 0.02\nmedium.l_mu = 0.25\nmedium.grid_n = 32\n"
        "medium.seed = 21\nreflector.z_r = -0.2 0.5\n"
        "reflector.delta = 0.056418958354775628\nreflector.sigma_r = 2\n"
        "reflector.chi = 1 0 0 1\nomega = 8\nn_illuminations = 2\n"
        "sensors.radius = 3\ngrid.nx = 64\ngrid.ny = 64\nnoise.sigma = 0.05\n"
        "noise.seed = 3\n"
    )
    cfg_path = tmp_dir / "det.cfg"
    cfg_path.write_text(cfg_text)
    blobs = []
    for label in ("r1", "r2"):
        out = tmp_dir / label
        rc = cli.main(["simulate", "--config", str(cfg_path), "--out", str(out)])
        assert rc == 0
        blobs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    same_files = blobs[0] == blobs[1]

    sweeps = []
    for label, threads in (("s1", "1"), ("s4", "4")):
        out = tmp_dir / label
        rc = cli.main([
            "sweep", "--config", str(cfg_path), "--sweep-param", "medium_noise",
            "--sweep-values", "0.02,0.05", "--trials", "3", "--threads", threads,
            "--out", str(out),
        ])
        assert rc == 0
        sweeps.append((out / "sweep_medium_noise.csv").read_bytes())
    same_sweep = sweeps[0] == sweeps[1]
    ok = same_files and same_sweep
    return ok, (
        f"repeat simulate byte-identical: {same_files}; sweep equal across "
        f"thread counts: {same_sweep}"
    )


def test_criterion_01_gradient_kernel_coincidence():
    ok, detail = check_criterion_1()
    assert _report(1, ok, detail)


def test_criterion_02_scalar_helmholtz_kirchhoff():
    ok, detail = check_criterion_2()
    assert _report(2, ok, detail)


def test_criterion_03_special_function_suite():
    ok, detail = check_criterion_3()
    assert _report(3, ok, detail)


def test_criterion_04_noiseless_localization():
    ok, detail = check_criterion_4()
    assert _report(4, ok, detail)


def test_criterion_05_expectation_match():
    ok, detail = check_criterion_5()
    assert _report(5, ok, detail)


def test_criterion_06_medium_noise_stability_ordering():
    ok, detail = check_criterion_6()
    assert _report(6, ok, detail)


def test_criterion_07_volume_insensitivity():
    ok, detail = check_criterion_7()
    assert _report(7, ok, detail)


def test_criterion_08_resolution_doubling():
    ok, detail = check_criterion_8()
    assert _report(8, ok, detail)


def test_criterion_09_measurement_noise_scaling():
    ok, detail = check_criterion_9()
    assert _report(9, ok, detail)


def test_criterion_10_determinism(tmp_path):
    ok, detail = check_criterion_10(tmp_path)
    assert _report(10, ok, detail)


def main() -> int:
    import tempfile

    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        checks = [
            (1, check_criterion_1), (2, check_criterion_2), (3, check_criterion_3),
            (4, check_criterion_4), (5, check_criterion_5), (6, check_criterion_6),
            (7, check_criterion_7), (8, check_criterion_8), (9, check_criterion_9),
            (10, lambda: check_criterion_10(Path(tmp))),
        ]
        for num, fn in checks:
            ok, detail = fn()
            if not _report(num, ok, detail):
                failures += 1
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
