"""Command-line entry points: ``sweep``, ``screens``, ``decay-table``, ``crosstalk``.

Exit codes: 0 success, 1 other simulation error, 2 invalid configuration,
3 unresolvable turbulence strength.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import artifacts
from .config import ConfigError, RunConfig, load_config
from .exceptions import DecayRangeError, DomainError, OAMTurbError, ResolutionError
from .experiments import (
    Scenario,
    check_resolution,
    crosstalk_matrices,
    decay_distance,
    derive_seed,
    fit_decay_scale,
    run_sweep,
)
from .turbulence import (
    TurbulenceParams,
    estimate_structure_function,
    generate_screen_pair,
    kolmogorov_structure_function,
    loglog_slope,
    save_screen,
)

OUTPUT_ROOT_ENV = "OAMTURB_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "oamturb-out"

log = logging.getLogger("oamturb")


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _output_dir(args, cfg: RunConfig) -> Path:
    root = args.out or cfg.output_dir or os.environ.get(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out, stem, command, cfg, started, files):
    doc = artifacts.manifest(command, cfg, cfg.result_hash(), cfg.master_seed, time.perf_counter() - started, files)
    name = f"{stem}.manifest.json"
    artifacts.write_json(doc, out / name)
    return name


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    cfg = _resolve_config(args)
    configs = [cfg.sweep_config(s) for s in cfg.scenarios]
    for sc in configs:
        check_resolution(sc.grid, sc.waist, sc.strengths)
    out = _output_dir(args, cfg)
    stem = f"sweep-{cfg.result_hash()}"

    result = None
    for sc in configs:
        log.info("sweep %s-photon: q=%s, %d strengths, N=%d", sc.scenario.value, sc.q_values, len(sc.strengths), sc.ensemble_size)
        part = run_sweep(sc, workers=cfg.workers)
        result = part if result is None else result.merge(part)

    fits = None
    if len(cfg.q_values) >= 2:
        try:
            fits = fit_decay_scale(result)
        except DecayRangeError as exc:
            log.warning("decay-scale fit skipped: %s", exc)

    digits = cfg.float_digits
    artifacts.write_sweep_csv(result, out / f"{stem}.csv", digits)
    artifacts.write_json(artifacts.sweep_to_json(result, fits, digits), out / f"{stem}.json")
    files = [f"{stem}.csv", f"{stem}.json"]
    files.append(_write_manifest(out, stem, "sweep", cfg, started, files))

    for e in sorted(result.entries, key=lambda e: (e.scenario.value, e.q, e.strength)):
        log.debug("%s q=%d s=%g C=%.4f", e.scenario.value, e.q, e.strength, e.concurrence)
    if fits:
        for fit in fits.values():
            print(f"{fit.scenario.value}-photon: Omega_0.5 = {fit.prefactor:.3f} * l^{fit.slope:.3f}")
    print(out / f"{stem}.csv")
    return 0


def _screen_target(cfg: RunConfig):
    s = cfg.screens
    if s.strength is not None:
        return {"r0": cfg.waist / s.strength if s.strength > 0 else np.inf}
    return {"params": TurbulenceParams(s.cn2, s.path, cfg.wavelength)}


def cmd_screens(args) -> int:
    started = time.perf_counter()
    cfg = _resolve_config(args)
    grid = cfg.grid
    target = _screen_target(cfg)
    out = _output_dir(args, cfg)
    stem = f"screens-{cfg.result_hash()}"
    files = []
    screen_dir = out / stem
    if cfg.screens.export:
        screen_dir.mkdir(exist_ok=True)

    sf = None
    r0 = None
    n_pairs = (cfg.screens.count + 1) // 2
    for k in range(n_pairs):
        pair = generate_screen_pair(
            grid, derive_seed(cfg.master_seed, k), subharmonic_levels=cfg.subharmonic_levels, **target
        )
        pair = pair[: cfg.screens.count - 2 * k]
        r0 = pair[0].r0
        part = estimate_structure_function(pair)
        sf = part if sf is None else sf.merge(part)
        if cfg.screens.export:
            for screen in pair:
                name = f"{stem}/screen-{k:05d}-{screen.pair_index}.bin"
                save_screen(screen, out / name)
                files.append(name)

    r, d = sf.radial(max_lag=grid.n_samples // 2)
    reference = kolmogorov_structure_function(r, r0)
    digits = cfg.float_digits
    rows = [(artifacts.fmt(a, digits), artifacts.fmt(b, digits), artifacts.fmt(c, digits)) for a, b, c in zip(r, d, reference)]
    artifacts.write_csv(out / f"{stem}.csv", ("r_m", "D", "reference"), rows)
    files.append(f"{stem}.csv")

    fit_range = (r >= 4 * grid.pitch) & (r <= grid.side / 8)
    if np.isfinite(r0) and np.all(d[fit_range] > 0):
        slope = loglog_slope(r[fit_range], d[fit_range])
        ratio = d[fit_range] / reference[fit_range]
        print(f"r0 = {r0:.6g} m, {sf.n_screens} screens")
        print(f"inertial-range slope = {slope:.4f} (Kolmogorov 5/3 = {5 / 3:.4f})")
        print(f"D / reference in [{ratio.min():.4f}, {ratio.max():.4f}]")
    else:
        print(f"r0 = inf, {sf.n_screens} screens, max D = {d.max():.3g}")
    files.append(_write_manifest(out, stem, "screens", cfg, started, files))
    print(out / f"{stem}.csv")
    return 0


def cmd_crosstalk(args) -> int:
    started = time.perf_counter()
    cfg = _resolve_config(args)
    ct = cfg.crosstalk
    check_resolution(cfg.grid, cfg.waist, ct.strengths)
    out = _output_dir(args, cfg)
    stem = f"crosstalk-{cfg.result_hash()}"
    digits = cfg.float_digits
    rows, doc = [], {"q_max": ct.q_max, "matrices": []}
    for scenario in ct.scenarios:
        mats = crosstalk_matrices(
            ct.q_max,
            ct.strengths,
            ct.ensemble_size,
            cfg.master_seed,
            scenario=scenario,
            waist=cfg.waist,
            wavelength=cfg.wavelength,
            grid=cfg.grid,
            subharmonic_levels=cfg.subharmonic_levels,
            workers=cfg.workers,
        )
        for strength, m in zip(ct.strengths, mats):
            doc["matrices"].append(
                {"scenario": Scenario(scenario).value, "strength": strength, **artifacts.crosstalk_to_json(m, digits)}
            )
            for i, la in enumerate(m.labels):
                for j, lb in enumerate(m.labels):
                    rows.append((scenario, artifacts.fmt(strength, digits), la, lb, artifacts.fmt(m.probabilities[i, j], digits)))
            print(
                f"{scenario}-photon w0/r0={strength:g}: anti-diagonal mass {m.anti_diagonal_mass():.4f}"
            )
    artifacts.write_csv(out / f"{stem}.csv", ("scenario", "strength", "l_a", "l_b", "probability"), rows)
    artifacts.write_json(doc, out / f"{stem}.json")
    files = [f"{stem}.csv", f"{stem}.json"]
    files.append(_write_manifest(out, stem, "crosstalk", cfg, started, files))
    print(out / f"{stem}.csv")
    return 0


def format_decay_table(ells, waist, wavelength, cn2) -> str:
    """Aligned two-column table of decay distances in kilometers."""
    rows = [(str(ell), f"{decay_distance(ell, waist, wavelength, cn2) / 1e3:.2f}") for ell in ells]
    w1 = max(len("l"), *(len(a) for a, _ in rows))
    w2 = max(len("distance_km"), *(len(b) for _, b in rows))
    lines = [f"{'l':>{w1}}  {'distance_km':>{w2}}"]
    lines += [f"{a:>{w1}}  {b:>{w2}}" for a, b in rows]
    return "\n".join(lines)


def cmd_decay_table(args) -> int:
    print(f"w0 = {args.waist:g} m, lambda = {args.wavelength:g} m, Cn2 = {args.cn2:g} m^-2/3")
    print(format_decay_table(args.ell, args.waist, args.wavelength, args.cn2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oamturb", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more log output")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration (defaults apply when omitted)")
    common.add_argument("--seed", type=int, help="override master_seed")
    common.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
    common.add_argument("--out", help=f"output directory (default: ${OUTPUT_ROOT_ENV} or ./{DEFAULT_OUTPUT_ROOT})")

    sub.add_parser("sweep", parents=[common], help="concurrence against w0/r0").set_defaults(func=cmd_sweep)
    sub.add_parser("screens", parents=[common], help="screen ensemble and structure function").set_defaults(
        func=cmd_screens
    )
    sub.add_parser("crosstalk", parents=[common], help="OAM crosstalk matrices").set_defaults(func=cmd_crosstalk)

    table = sub.add_parser("decay-table", help="distance at which entanglement decays")
    table.add_argument("--waist", type=float, default=0.1, help="beam waist in meters")
    table.add_argument("--wavelength", type=float, default=1550e-9, help="wavelength in meters")
    table.add_argument("--cn2", type=float, default=1e-15, help="Cn2 in m^-2/3")
    table.add_argument("--ell", type=int, nargs="+", default=[1, 3, 5, 7], help="OAM values")
    table.set_defaults(func=cmd_decay_table)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ResolutionError as exc:
        print(f"resolution error: {exc}", file=sys.stderr)
        return 3
    except (OAMTurbError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
