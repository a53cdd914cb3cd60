"""Command-line front end: simulate boundary data, image it, run sweeps.

Subcommands
-----------
simulate   write per-illumination boundary CSVs and the medium realization
image      backpropagate data from a directory into images + localization
sweep      Monte Carlo localization-error sweep over a parameter
selftest   fast numerical invariant checks

Exit codes: 0 success, 2 configuration error, 3 compute/selftest failure,
4 I/O error.  The seed precedence is ``--seed`` > ``SHG_SEED`` > config file.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import forward as fw
from . import imaging as im
from . import medium as md
from . import stats as st
from .errors import (
    ConfigError,
    FormatError,
    IoError,
    ShgError,
)
from .geometry import Box
from .scenario import ScenarioConfig, ScenarioEngine

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTE = 3
EXIT_IO = 4


# ----------------------------------------------------------------------------
# Config parsing
# ----------------------------------------------------------------------------

def _parse_float(s):
    return float(s)


def _parse_int(s):
    return int(s, 0)


def _parse_floats(s):
    return [float(tok) for tok in s.split()]


_KEY_PARSERS = {
    "medium.sigma_mu": _parse_float,
    "medium.l_mu": _parse_float,
    "medium.alpha": _parse_float,
    "medium.box": _parse_floats,
    "medium.grid_n": _parse_int,
    "medium.seed": _parse_int,
    "reflector.z_r": _parse_floats,
    "reflector.delta": _parse_float,
    "reflector.sigma_r": _parse_float,
    "reflector.chi": _parse_floats,
    "reflector.shape_area": _parse_float,
    "omega": _parse_float,
    "u_i": _parse_float,
    "n_illuminations": _parse_int,
    "sensors.radius": _parse_float,
    "sensors.count": _parse_int,
    "grid.nx": _parse_int,
    "grid.ny": _parse_int,
    "noise.sigma": _parse_float,
    "noise.seed": _parse_int,
    "output_dir": str,
}

_REQUIRED = (
    "medium.sigma_mu",
    "medium.l_mu",
    "reflector.z_r",
    "reflector.delta",
    "reflector.sigma_r",
    "reflector.chi",
    "omega",
)

_DEFAULTS = {
    "medium.alpha": 0.45,
    "medium.box": [-1.0, -1.0, 1.0, 1.0],
    "medium.grid_n": 64,
    "medium.seed": 0,
    "reflector.shape_area": math.pi,
    "u_i": 1.0,
    "n_illuminations": 8,
    "sensors.radius": 3.0,
    "sensors.count": 0,
    "grid.nx": 128,
    "grid.ny": 128,
    "noise.sigma": 0.0,
    "noise.seed": 0,
    "output_dir": "out",
}


def parse_config(text: str) -> ScenarioConfig:
    """Parse flat ``key = value`` text into a validated scenario.

    Unknown keys are rejected; errors name the offending key and line.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _KEY_PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _KEY_PARSERS[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc

    for key in _REQUIRED:
        if key not in values or (
            key == "reflector.chi" and not values.get("reflector.chi")
        ):
            if key == "reflector.chi":
                raise ConfigError(
                    "reflector.chi: chi required for second-harmonic runs"
                )
            raise ConfigError(f"missing required key {key!r}")
    merged = dict(_DEFAULTS)
    merged.update(values)

    box = merged["medium.box"]
    if len(box) != 4:
        raise ConfigError("medium.box: expected 4 numbers (xmin ymin xmax ymax)")
    zr = merged["reflector.z_r"]
    if len(zr) != 2:
        raise ConfigError("reflector.z_r: expected 2 numbers")
    chi = merged["reflector.chi"]
    if len(chi) != 4:
        raise ConfigError("reflector.chi: expected 4 numbers (row-major 2x2)")

    try:
        medium = md.MediumParams(
            sigma_mu=merged["medium.sigma_mu"],
            l_mu=merged["medium.l_mu"],
            alpha=merged["medium.alpha"],
            support_box=Box(box[0], box[1], box[2], box[3]),
            grid_n=merged["medium.grid_n"],
            seed=merged["medium.seed"],
        )
        reflector = fw.ReflectorSpec(
            z_r=np.array(zr),
            delta=merged["reflector.delta"],
            sigma_r=merged["reflector.sigma_r"],
            chi=np.array(chi).reshape(2, 2),
            shape_area=merged["reflector.shape_area"],
        )
        return ScenarioConfig(
            medium=medium,
            reflector=reflector,
            omega=merged["omega"],
            u_i=merged["u_i"],
            n_illuminations=merged["n_illuminations"],
            sensor_radius=merged["sensors.radius"],
            sensor_count=merged["sensors.count"],
            grid_nx=merged["grid.nx"],
            grid_ny=merged["grid.ny"],
            noise_sigma=merged["noise.sigma"],
            noise_seed=merged["noise.seed"],
        )
    except ShgError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def resolved_config_lines(cfg: ScenarioConfig) -> list:
    """The full scenario as config text, for reproducibility headers."""
    b = cfg.medium.support_box
    chi = cfg.reflector.chi
    return [
        f"medium.sigma_mu = {cfg.medium.sigma_mu:.17g}",
        f"medium.l_mu = {cfg.medium.l_mu:.17g}",
        f"medium.alpha = {cfg.medium.alpha:.17g}",
        f"medium.box = {b.xmin:.17g} {b.ymin:.17g} {b.xmax:.17g} {b.ymax:.17g}",
        f"medium.grid_n = {cfg.medium.grid_n}",
        f"medium.seed = {cfg.medium.seed}",
        f"reflector.z_r = {cfg.reflector.z_r[0]:.17g} {cfg.reflector.z_r[1]:.17g}",
        f"reflector.delta = {cfg.reflector.delta:.17g}",
        f"reflector.sigma_r = {cfg.reflector.sigma_r:.17g}",
        f"reflector.chi = {chi[0, 0]:.17g} {chi[0, 1]:.17g} {chi[1, 0]:.17g} {chi[1, 1]:.17g}",
        f"reflector.shape_area = {cfg.reflector.shape_area:.17g}",
        f"omega = {cfg.omega:.17g}",
        f"u_i = {cfg.u_i:.17g}",
        f"n_illuminations = {cfg.n_illuminations}",
        f"sensors.radius = {cfg.sensor_radius:.17g}",
        f"sensors.count = {cfg.sensor_count}",
        f"grid.nx = {cfg.grid_nx}",
        f"grid.ny = {cfg.grid_ny}",
        f"noise.sigma = {cfg.noise_sigma:.17g}",
        f"noise.seed = {cfg.noise_seed}",
    ]


def _prepend_header(path: Path, lines) -> None:
    """Insert config comment lines after the first line of a text file."""
    body = path.read_text().splitlines(keepends=True)
    header = "".join(f"# config: {ln}\n" for ln in lines)
    with open(path, "w", newline="") as f:
        if body:
            f.write(body[0])
        f.write(header)
        f.writelines(body[1:])


# ----------------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------------

def cmd_simulate(cfg: ScenarioConfig, out_dir: Path) -> list:
    """Write the medium realization and per-illumination boundary CSVs."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    medium = md.generate(cfg.medium)
    header = resolved_config_lines(cfg)

    path = out_dir / "medium.csv"
    md.dump_csv(medium, path)
    _prepend_header(path, header)
    written.append(path)

    engine = ScenarioEngine(cfg, build_backprop=False)
    sig = (cfg.noise_sigma, cfg.noise_sigma)
    fund, second = engine.datasets(
        medium, noise_sigma=sig, noise_seed=cfg.noise_seed
    )
    noise = fw.NoiseModel(cfg.noise_sigma, cfg.noise_seed)
    for j, (bf, bs) in enumerate(zip(fund, second)):
        for tag, bd in (("fundamental", bf), ("second_harmonic", bs)):
            path = out_dir / f"{tag}_{j:03d}.csv"
            fw.boundary_to_csv(bd, engine.sensors, path, noise=noise)
            _prepend_header(path, header)
            written.append(path)
    return written


def _read_datasets(data_dir: Path, tag: str):
    paths = sorted(data_dir.glob(f"{tag}_*.csv"))
    if not paths:
        raise FormatError(f"no {tag}_*.csv files in {data_dir}")
    datasets = []
    sensors = None
    for p in paths:
        bd, sens = fw.boundary_from_csv(p)
        if bd.frequency_tag != tag:
            raise FormatError(f"{p}: frequency tag mismatch")
        if sensors is None:
            sensors = sens
        elif sensors.count != sens.count or abs(sensors.radius - sens.radius) > 1e-12:
            raise FormatError(f"{p}: sensor layout differs between files")
        datasets.append(bd)
    return datasets, sensors


def cmd_image(cfg: ScenarioConfig, data_dir: Path, out_dir: Path) -> list:
    """Backpropagate stored boundary data and localize the peak."""
    out_dir.mkdir(parents=True, exist_ok=True)
    header = resolved_config_lines(cfg)
    written = []
    grid = cfg.search_grid()
    fund, sensors = _read_datasets(data_dir, fw.FUNDAMENTAL)
    second, _ = _read_datasets(data_dir, fw.SECOND_HARMONIC)

    results = {}
    for tag, img in (
        ("I", im.functional_I(fund, sensors, grid)),
        ("J", im.functional_J(second, sensors, grid)),
    ):
        csv_path = out_dir / f"image_{tag}.csv"
        im.image_to_csv(img, csv_path)
        _prepend_header(csv_path, header)
        pgm_path = out_dir / f"image_{tag}.pgm"
        im.image_to_pgm(img, pgm_path, header_lines=[f"config: {ln}" for ln in header])
        written += [csv_path, pgm_path]
        point, peak = im.localize(img)
        results[tag] = (point, peak, im.fwhm(img, "x"), im.fwhm(img, "y"))

    zr = cfg.reflector.z_r
    path = out_dir / "localization.txt"
    with open(path, "w", newline="") as f:
        f.write("# peak localization summary\n")
        for ln in header:
            f.write(f"# config: {ln}\n")
        for tag in ("I", "J"):
            point, peak, wx, wy = results[tag]
            dist = float(np.hypot(*(point - zr)))
            f.write(
                f"{tag}: z_est = {point[0]:.17g} {point[1]:.17g}, "
                f"peak = {peak:.17g}, dist_to_z_r = {dist:.17g}, "
                f"fwhm_x = {wx:.17g}, fwhm_y = {wy:.17g}\n"
            )
    written.append(path)
    return written


def cmd_sweep(cfg: ScenarioConfig, out_dir: Path, param: str, values,
              trials: int, threads: int) -> list:
    """Run a localization sweep and write its report files."""
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = st.SweepSpec(
        swept_parameter=param,
        values=tuple(values),
        trials_per_value=trials,
        base_config=cfg,
        master_seed=cfg.medium.seed,
    )
    report = st.run_sweep(spec, threads=threads)
    header = resolved_config_lines(cfg)
    csv_path = out_dir / f"sweep_{param}.csv"
    st.report_to_csv(report, csv_path)
    _prepend_header(csv_path, header)
    summary_path = out_dir / f"sweep_{param}_summary.json"
    with open(summary_path, "w", newline="") as f:
        f.write(st.report_summary(report, st.predict(cfg), config_lines=header))
        f.write("\n")
    return [csv_path, summary_path]


def _selftest_checks():
    """Yield (name, passed, detail) for the fast invariant suite."""
    from . import specfun as sf

    omega = 8.0
    lam = 2.0 * math.pi / omega

    jumps = sf.crossover_jumps()
    worst = max(jumps.values())
    yield ("bessel series/asymptotic crossover", worst < 1e-9, f"max jump {worst:.3e}")

    x = np.logspace(math.log10(0.01), math.log10(500.0), 800)
    wr = sf.bessel_j1(x) * sf.bessel_y0(x) - sf.bessel_j0(x) * sf.bessel_y1(x)
    err = float(np.max(np.abs(wr - 2.0 / (math.pi * x)) / (2.0 / (math.pi * x))))
    yield ("wronskian identity", err < 1e-9, f"max rel err {err:.3e}")

    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(200):
        om = rng.uniform(0.5, 20.0)
        r = rng.uniform(0.1, 100.0) / om
        ang = rng.uniform(0.0, 2.0 * math.pi)
        x1 = np.array([r * math.cos(ang), r * math.sin(ang)])
        g = sf.green0(om, x1, np.zeros(2))
        res = abs(np.trace(g.hessian) + om * om * g.value) / abs(g.value)
        worst = max(worst, res)
    yield ("helmholtz residual", worst < 1e-8, f"max rel residual {worst:.3e}")

    sensors = fw.SensorArray.half_wavelength(np.zeros(2), 20.0 * lam, omega)
    z = np.array([-0.2, 0.5])
    rzz = im.kernel_R(omega, z, z, sensors)
    err = float(np.max(np.abs(rzz - (omega / 8.0) * np.eye(2))) / (omega / 8.0))
    yield ("gradient kernel coincidence (omega/8)", err < 0.03, f"rel err {err:.3e}")

    worst = 0.0
    for dist in (0.3 * lam, 1.1 * lam, 2.7 * lam, 4.0 * lam):
        z2 = z + dist * np.array([0.6, 0.8])
        gy = fw.value_table(omega, sensors.positions, z[None, :])[:, 0]
        gz = fw.value_table(omega, sensors.positions, z2[None, :])[:, 0]
        lhs = complex(np.sum(sensors.weights * np.conj(gy) * gz))
        rhs = sf.bessel_j0(omega * dist) / (4.0 * omega)
        worst = max(worst, abs(lhs - rhs) * 4.0 * omega)
    yield ("scalar Helmholtz-Kirchhoff", worst < 0.03, f"amp-rel err {worst:.3e}")

    q = im.kernel_Q(omega, z, z, sensors)
    err = abs(q - 1.0 / (8.0 * omega)) * 8.0 * omega
    yield ("backprop kernel coincidence (1/(8 omega))", err < 0.03, f"rel err {err:.3e}")

    # midpoint-rule convergence on a smooth medium, single sensor
    target = fw.SensorArray.ring(np.zeros(2), 3.0, 1)
    ill = fw.Illumination.from_angle(omega, 0.3)
    samples = []
    for n in (32, 64, 128):
        params = md.MediumParams(sigma_mu=0.02, l_mu=0.25, grid_n=n, seed=0)
        xs, ys = params.cell_centers()
        gx, gy = np.meshgrid(xs, ys)
        vals = 0.02 * np.cos(math.pi * gx) * np.sin(math.pi * gy)
        real = md.MediumRealization(params=params, values=vals, cell_size=params.cell_size)
        samples.append(fw.born_background_field(real, ill, target).samples[0])
    ratio = abs(samples[0] - samples[1]) / abs(samples[1] - samples[2])
    yield ("midpoint quadrature h^2 convergence", 3.0 <= ratio <= 5.0, f"ratio {ratio:.3f}")


def cmd_selftest() -> int:
    status = EXIT_OK
    for name, ok, detail in _selftest_checks():
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
        if not ok:
            status = EXIT_COMPUTE
    return status


# ----------------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="shgimaging",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("--config", required=True, help="scenario config file")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the medium seed (beats SHG_SEED and config)")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker threads for sweep trials (0 = auto)")

    add_common(sub.add_parser("simulate", help="synthesize boundary data"))
    sp = sub.add_parser("image", help="image stored boundary data")
    add_common(sp)
    sp.add_argument("--data", default=None,
                    help="directory with boundary CSVs (default: output dir)")
    sp = sub.add_parser("sweep", help="Monte Carlo localization sweep")
    add_common(sp)
    sp.add_argument("--sweep-param", required=True, choices=st.SWEEP_PARAMETERS)
    sp.add_argument("--sweep-values", default=None,
                    help="comma-separated parameter values (default per "
                         "parameter: medium noise 0.02..0.1, volume 1e-4..1e-1 "
                         "log-spaced, measurement noise 0..1 relative)")
    sp.add_argument("--trials", type=int, default=60)
    sub.add_parser("selftest", help="run fast numerical invariants")
    return p


_DEFAULT_SWEEP_VALUES = {
    "medium_noise": (0.02, 0.04, 0.06, 0.08, 0.10),
    "volume": tuple(float(v) for v in np.logspace(-4, -1, 7)),
    "measurement_noise": (0.0, 0.2, 0.4, 0.6, 0.8, 1.0),
}


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    seed = None
    if os.environ.get("SHG_SEED"):
        try:
            seed = int(os.environ["SHG_SEED"], 0)
        except ValueError as exc:
            raise ConfigError(f"SHG_SEED is not an integer: {exc}") from exc
    if args.seed is not None:
        seed = args.seed
    if seed is not None:
        cfg = replace(cfg, medium=replace(cfg.medium, seed=seed))
    if args.out is not None:
        cfg = replace(cfg, output_dir=Path(args.out))
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return cmd_selftest()
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise IoError(f"cannot read config {args.config}: {exc}") from exc
        try:
            cfg = _apply_overrides(parse_config(text), args)
        except ShgError as exc:
            # invariant violations at parse time are configuration failures
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        out_dir = Path(cfg.output_dir)
        if args.command == "simulate":
            written = cmd_simulate(cfg, out_dir)
        elif args.command == "image":
            data_dir = Path(args.data) if args.data else out_dir
            written = cmd_image(cfg, data_dir, out_dir)
        elif args.command == "sweep":
            if args.sweep_values is None:
                values = list(_DEFAULT_SWEEP_VALUES[args.sweep_param])
            else:
                try:
                    values = [float(v) for v in args.sweep_values.split(",") if v.strip()]
                except ValueError as exc:
                    raise ConfigError(f"bad --sweep-values: {exc}") from exc
            written = cmd_sweep(cfg, out_dir, args.sweep_param, values,
                                args.trials, args.threads)
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command}")
        for path in written:
            print(path)
        return EXIT_OK
    except (ConfigError, FormatError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IoError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ShgError as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
