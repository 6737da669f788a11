"""Command-line entry point.

Verbs:

- ``run``       simulate a scenario, emit summary.json + fringe CSVs + figures
- ``calibrate`` report the effective noise-channel calibrations of a config
- ``fit``       fit a fringe CSV and emit the fit JSON + figure
- ``drift``     generate a drift trace, optionally close the loop, emit logs
- ``rates``     analytic rate budget for a scenario
- ``selftest``  reduced-statistics invariant suite

Exit codes: 0 ok, 1 configuration error, 2 runtime failure, 3 selftest
failure.  All file output stays inside the ``--out`` directory.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, engine
from .channel import PRESETS, generate_drift, write_trace_csv
from .config import (
    ScenarioConfig,
    load_bundled_scenario,
    load_scenario,
    bundled_scenario_names,
    sigma_theta_rad,
)
from .errors import ConfigError, SwapSimError
from .stabilization import DelayController, run_delay_loop, write_loop_csv


def _header(cfg_hash: str, seed: int) -> str:
    return f"swapsim {__version__} config={cfg_hash} seed={seed}"


def _meta(cfg_hash: str, seed: int) -> dict:
    return {"tool": f"swapsim {__version__}", "config_hash": cfg_hash, "seed": seed}


def _load(args) -> ScenarioConfig:
    cfg = (
        load_bundled_scenario(args.config)
        if args.config in bundled_scenario_names()
        else load_scenario(args.config)
    )
    if args.seed is not None:
        cfg = _override_seed(cfg, args.seed)
    return cfg


def _override_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    import dataclasses

    return dataclasses.replace(cfg, seed=seed)


def _fringe_from_points(points, table_key: str) -> analysis.FringeData:
    control = [p.control_value for p in points]
    counts = [p.fourfold_cc[table_key] if table_key in p.fourfold_cc else 0 for p in points]
    seconds = [p.duration_s for p in points]
    return analysis.FringeData.from_arrays(control, counts, seconds)


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = engine.run_scenario(
        cfg, workers=args.workers, spool_max_rows=args.spool_clicks
    )
    h = cfg.config_hash()
    engine_meta = _meta(h, cfg.seed)
    if args.spool_clicks:
        from .detection import write_clicks_csv

        write_clicks_csv(
            engine.spooled_click_records(summary), out / "clicks.csv",
            _header(h, cfg.seed),
        )

    payload = summary.to_dict()
    payload["meta"].update(engine_meta)
    with open(out / "summary.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")

    # two-fold fringe: source-mode analyzer coincidences, or BSM heralds
    if cfg.mode == "source":
        two = analysis.FringeData.from_arrays(
            [p.control_value for p in summary.points],
            [p.twofold_cc["C0,A0"] for p in summary.points],
            [p.duration_s for p in summary.points],
        )
    else:
        two = analysis.FringeData.from_arrays(
            [p.control_value for p in summary.points],
            [p.heralds_psi_minus for p in summary.points],
            [p.duration_s for p in summary.points],
        )
    analysis.write_fringe_csv(two, out / "fringe_twofold.csv", _header(h, cfg.seed))

    four = analysis.FringeData.from_arrays(
        [p.control_value for p in summary.points],
        [p.fourfold_cc["A0,B0"] for p in summary.points],
        [p.duration_s for p in summary.points],
    )
    analysis.write_fringe_csv(four, out / "fringe_fourfold.csv", _header(h, cfg.seed))

    with open(out / "heralds.csv", "w") as fh:
        fh.write(f"# {_header(h, cfg.seed)}\n")
        fh.write(
            "control_value,heralds_psi_minus,heralds_accidental,"
            "would_be_psi_plus,unheraldable,fourfold_candidates\n"
        )
        for p in summary.points:
            fh.write(
                f"{p.control_value:.9g},{p.heralds_psi_minus},{p.heralds_accidental},"
                f"{p.would_be_psi_plus},{p.unheraldable},{p.fourfold_candidates}\n"
            )

    if not args.no_figures:
        from . import report

        period = (
            2.0 * math.pi
            if cfg.sweep.kind == "phase"
            else 2.0 * math.pi / cfg.sweep.coefficient_rad_per_c
        )
        xlabel = "analyzer phase (rad)" if cfg.sweep.kind == "phase" else "MZI temperature (C)"
        for data, stem, label in (
            (two, "fringe_twofold", "two-fold coincidences"),
            (four, "fringe_fourfold", "four-fold coincidences"),
        ):
            fit = None
            if len(data.control) >= 5 and np.ptp(data.control) > 0 and data.counts.max() > 0:
                try:
                    fit = analysis.fit_fringe(data, period_hint=period)
                except SwapSimError:
                    fit = None
            report.render_fringe(data, fit, out / f"{stem}.png",
                                 f"{cfg.name}: {label}", xlabel)
    print(f"wrote {out}/summary.json (+ fringe CSVs, heralds.csv)")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sig_a = sigma_theta_rad(cfg.alice)
    sig_b = sigma_theta_rad(cfg.bob)
    scale = cfg.channels.phase_noise_scale
    payload = {
        "meta": _meta(cfg.config_hash(), cfg.seed),
        "multi_pair": {
            "mu_alice": cfg.alice.mu,
            "mu_bob": cfg.bob.mu,
            "v_d_alice": engine.visibility_degradation(cfg.alice.mu),
            "v_d_bob": engine.visibility_degradation(cfg.bob.mu),
        },
        "phase_noise": {
            "sigma_theta_alice_rad": sig_a,
            "sigma_theta_bob_rad": sig_b,
            "scale": scale,
            "twofold_penalty": math.exp(-2.0 * (scale * sig_a) ** 2),
            "fourfold_penalty": math.exp(
                -2.0 * (scale * sig_a) ** 2 - 2.0 * (scale * sig_b) ** 2
            ),
        },
        "source_visibilities": {
            "alice": cfg.alice.visibility,
            "bob": cfg.bob.visibility,
            "product": cfg.alice.visibility * cfg.bob.visibility,
        },
        "expected_fourfold_visibility": (
            cfg.alice.visibility * cfg.bob.visibility
            * (engine.visibility_degradation(cfg.alice.mu) if cfg.channels.multi_pair else 1.0)
            * (
                math.exp(-2.0 * (scale * sig_a) ** 2 - 2.0 * (scale * sig_b) ** 2)
                if cfg.channels.phase_noise
                else 1.0
            )
        ),
        "rate_budget": engine.rate_budget(cfg).to_dict(),
    }
    with open(out / "calibration_report.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out}/calibration_report.json")
    return 0


def cmd_fit(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = analysis.read_fringe_csv(args.input)
    hint = args.period_hint or float(np.ptp(data.control)) or 1.0
    fit = analysis.fit_fringe(data, period_hint=hint)
    verdict = analysis.entanglement_verdict(fit)
    meta = _meta("-", args.seed if args.seed is not None else 0)
    meta["input"] = str(args.input)
    meta["verdict"] = verdict.label
    meta["margin"] = verdict.margin
    analysis.write_fit_json(fit, out / "fringe_fit.json", meta)
    if not args.no_figures:
        from . import report

        report.render_fringe(data, fit, out / "fringe_fit.png",
                             f"fit of {Path(args.input).name}")
    print(
        f"V = {fit.v:.4f} +- {fit.v_err:.4f}  ({verdict.label}, margin {verdict.margin:+.4f})"
    )
    return 0


def cmd_drift(args) -> int:
    if args.duration_s <= 0:
        raise ConfigError("duration must be positive", "--duration-s")
    preset = PRESETS.get(args.preset)
    if preset is None:
        raise ConfigError(f"unknown preset '{args.preset}'", "--preset")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else 1
    trace = generate_drift(preset, args.duration_s, args.dt_s, seed)
    ctrl = DelayController()
    log = run_delay_loop(trace, ctrl, seed=seed, enabled=not args.loop_off)
    header = f"swapsim {__version__} config=drift-{preset.label} seed={seed}"
    write_loop_csv(log, out / "drift.csv", header)
    write_trace_csv(trace, out / "drift_raw.csv", header)

    stats_raw = analysis.drift_statistics(trace.delays_ps)
    stats_res = analysis.drift_statistics(log.residual_ps)
    payload = {
        "meta": {"tool": f"swapsim {__version__}", "preset": preset.label,
                 "seed": seed, "loop": "off" if args.loop_off else "on"},
        "raw": stats_raw,
        "residual": stats_res,
    }
    with open(out / "residual_stats.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    if not args.no_figures:
        from . import report

        report.render_drift(
            log.times_s, log.raw_delay_ps, log.compensation_ps, log.residual_ps,
            out / "drift.png",
            f"{preset.label} drift, loop {'off' if args.loop_off else 'on'}",
        )
    print(
        f"raw ptp {stats_raw['peak_to_peak_ps']:.0f} ps, residual sigma "
        f"{stats_res['sigma_ps']:.1f} ps -> {out}/drift.csv"
    )
    return 0


def cmd_rates(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    budget = engine.rate_budget(cfg)
    payload = {"meta": _meta(cfg.config_hash(), cfg.seed)}
    payload.update(budget.to_dict())
    with open(out / "rate_budget.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    if not args.no_figures:
        from . import report

        report.render_budget(budget.items, out / "rate_budget.png",
                             f"{cfg.name}: four-fold budget")
    print(
        f"herald {budget.herald_per_s:.3g}/s, four-fold {budget.fourfold_cc_per_h:.3g}/h "
        f"-> {out}/rate_budget.json"
    )
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    checks = run_selftest()
    failed = [name for name, ok, _ in checks if not ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 3 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="swapsim",
        description="time-bin entanglement swapping simulator and analysis toolkit",
    )
    p.add_argument("--version", action="version", version=f"swapsim {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument(
                "--config", required=True,
                help="scenario file path or bundled name "
                     f"({', '.join(bundled_scenario_names())})",
            )
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="seed override")
        sp.add_argument("--workers", type=int, default=1, help="worker processes")
        sp.add_argument("--no-figures", action="store_true",
                        help="skip matplotlib figure rendering")

    sp = sub.add_parser("run", help="simulate a scenario")
    common(sp)
    sp.add_argument("--spool-clicks", type=int, default=0, metavar="N",
                    help="also write up to N raw click rows per sweep point")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("calibrate", help="report noise-channel calibrations")
    common(sp)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("fit", help="fit a fringe CSV")
    sp.add_argument("--input", required=True, help="fringe CSV (control_value,counts,seconds)")
    sp.add_argument("--period-hint", type=float, default=None)
    common(sp, config=False)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("drift", help="drift trace and stabilization loop")
    sp.add_argument("--preset", default="sunny", help="rainy | cloudy | sunny | calm")
    sp.add_argument("--duration-s", type=float, default=86400.0)
    sp.add_argument("--dt-s", type=float, default=10.0)
    sp.add_argument("--loop-off", action="store_true", help="leave the loop open")
    common(sp, config=False)
    sp.set_defaults(func=cmd_drift)

    sp = sub.add_parser("rates", help="analytic rate budget")
    common(sp)
    sp.set_defaults(func=cmd_rates)

    sp = sub.add_parser("selftest", help="invariant suite at reduced statistics")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except SwapSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
