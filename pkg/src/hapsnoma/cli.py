"""Command-line entry point: ``hapsnoma <command> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as E
from . import optimizer as opt
from .scenario import (DEFAULT_SCENARIO, ScenarioError, default_scenario_path, dumps,
                       generate_users_ppp, load_power_profile, scenario_from_dict,
                       scenario_to_dict, synthetic_day_profile)


def _read_doc(path: str) -> tuple[dict, Path | None]:
    if path == DEFAULT_SCENARIO:
        return json.loads(default_scenario_path().read_text()), None
    p = Path(path)
    return json.loads(p.read_text()), p.parent


def load_with_overrides(path: str, seed: int | None = None, qos: float | None = None):
    """Load a scenario; --seed replaces the file's seed before users are drawn."""
    doc, base = _read_doc(path)
    if seed is not None:
        doc["seed"] = seed
    if qos is not None:
        doc.setdefault("qos", {})["rate_bps"] = qos
    return scenario_from_dict(doc, base)


def _config(args, scenario) -> opt.OptimizerConfig:
    return opt.OptimizerConfig(
        strategy=getattr(args, "strategy", "sweep"),
        mec_method=getattr(args, "mec", "welzl"),
        delta_r=getattr(args, "delta_r", 1.0),
        channel_mode=getattr(args, "channels", "frozen"),
        objective=getattr(args, "objective", "tdm"),
    ).resolved(scenario)


def _emit(rs: E.ResultSet, args) -> None:
    for p in E.emit_results(rs, args.out, args.format):
        print(f"wrote {p}")


def cmd_generate(args) -> int:
    doc, _ = _read_doc(args.base)
    doc.pop("ppp", None)
    doc["seed"] = args.seed
    doc["coverage"]["radius_km"] = args.radius
    users = generate_users_ppp(args.users, args.radius, args.seed)
    doc["users"] = [[u.position[0], u.position[1]] for u in users]
    s = scenario_from_dict(doc)
    out = E.output_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / args.name
    path.write_text(dumps(scenario_to_dict(s)))
    print(f"wrote {path} ({s.n_users} users)")
    return 0


def cmd_optimize(args) -> int:
    s = load_with_overrides(args.scenario, args.seed, args.qos)
    cfg = _config(args, s)
    rs = E.run_optimize(s, cfg, args.time)
    md = rs.metadata
    print(f"M = {md['M']}, radius = {md['radius_km']:.4f} km, "
          f"TDM average = {md['tdm_average_rate_bps'] / 1e6:.3f} Mbit/s "
          f"(OMA {md['oma_tdm_average_rate_bps'] / 1e6:.3f})")
    _emit(rs, args)
    return 0


def cmd_sweep_m(args) -> int:
    s = load_with_overrides(args.scenario, args.seed, args.qos)
    rs = E.sweep_m(s, _config(args, s), args.max_m, args.radius_step)
    if rs.metadata["unreachable_M"]:
        print(f"no radius yields M in {rs.metadata['unreachable_M']}")
    _emit(rs, args)
    return 0


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_sweep_snr(args) -> int:
    s = load_with_overrides(args.scenario, args.seed, args.qos)
    cfg = _config(args, s)
    grid = np.arange(args.snr_min, args.snr_max + 1e-9, args.snr_step)
    _emit(E.sweep_snr_ee(s, cfg, grid, tuple(_floats(args.pc))), args)
    _emit(E.sweep_snr_outage(s, cfg, None, args.mc_samples, args.partitions), args)
    return 0


def cmd_day_profile(args) -> int:
    s = load_with_overrides(args.scenario, args.seed, args.qos)
    if args.profile == "synthetic":
        prof = synthetic_day_profile(peak_w=args.peak_w, night_w=args.night_w)
    elif args.profile == "scenario":
        prof = s.power_profile
    else:
        prof = load_power_profile(args.profile)
    _emit(E.day_profile(s, prof, _config(args, s), args.step_min), args)
    return 0


def cmd_alloc_show(args) -> int:
    s = load_with_overrides(args.scenario, args.seed, args.qos)
    rs = E.alloc_show(s, _config(args, s), args.group)
    print(f"group {rs.metadata['group']} of {rs.metadata['M']}, "
          f"feasible = {rs.metadata['feasible']}")
    _emit(rs, args)
    return 0


def cmd_validate(args) -> int:
    checks = E.validate(args.seed, args.quick)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    return 0 if all(c.passed for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hapsnoma", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def common(sp, scenario=True):
        sp.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed (default: from file)")
        sp.add_argument("--out", default=None,
                        help=f"output directory (default: ${E.OUT_ENV} or ./hapsnoma-out)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        if scenario:
            sp.add_argument("--scenario", default=DEFAULT_SCENARIO,
                            help="scenario JSON file, or 'default'")
            sp.add_argument("--qos", type=float, default=None, help="QoS rate, bit/s")
            sp.add_argument("--mec", choices=E.MEC_METHODS, default="welzl")
            sp.add_argument("--strategy", choices=("sweep", "bisection"), default="sweep")
            sp.add_argument("--delta-r", type=float, default=1.0, help="sweep step, km")
            sp.add_argument("--channels", choices=("frozen", "mean", "ergodic"),
                            default="frozen")
            sp.add_argument("--objective", choices=("tdm", "sum"), default="tdm")

    g = sub.add_parser("generate", help="write a scenario with PPP users")
    g.add_argument("--users", type=int, required=True)
    g.add_argument("--radius", type=float, default=60.0, help="coverage radius, km")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--base", default=DEFAULT_SCENARIO, help="scenario to copy link settings from")
    g.add_argument("--name", default="scenario.json")
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_generate)

    o = sub.add_parser("optimize", help="search the beam radius and allocate power")
    common(o)
    o.add_argument("--time", default=None, help="time of day for the power profile")
    o.set_defaults(func=cmd_optimize)

    m = sub.add_parser("sweep-m", help="rate against number of beams")
    common(m)
    m.add_argument("--max-m", type=int, default=15)
    m.add_argument("--radius-step", type=float, default=0.05)
    m.set_defaults(func=cmd_sweep_m)

    s = sub.add_parser("sweep-snr", help="energy efficiency and outage against transmit SNR")
    common(s)
    s.add_argument("--pc", default="1.2,1.5,2", help="circuit powers, W, comma separated")
    s.add_argument("--snr-min", type=float, default=100.0)
    s.add_argument("--snr-max", type=float, default=190.0)
    s.add_argument("--snr-step", type=float, default=2.0)
    s.add_argument("--mc-samples", type=int, default=100_000)
    s.add_argument("--partitions", type=int, default=4)
    s.set_defaults(func=cmd_sweep_snr)

    d = sub.add_parser("day-profile", help="rate over a transmit-power day profile")
    common(d)
    d.add_argument("--profile", default="synthetic",
                   help="CSV file, 'synthetic' or 'scenario'")
    d.add_argument("--peak-w", type=float, default=10_000.0)
    d.add_argument("--night-w", type=float, default=1_500.0)
    d.add_argument("--step-min", type=int, default=60)
    d.set_defaults(func=cmd_day_profile)

    a = sub.add_parser("alloc-show", help="per-user power split in one group")
    common(a)
    a.add_argument("--group", type=int, default=None, help="group index (default: largest group)")
    a.set_defaults(func=cmd_alloc_show)

    v = sub.add_parser("validate", help="run the oracle checks")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--quick", action="store_true")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    seed = getattr(args, "seed", None)
    if args.command not in ("generate", "validate"):
        # report the seed that actually drives the run
        doc, _ = _read_doc(args.scenario) if Path(str(args.scenario)).exists() or \
            args.scenario == DEFAULT_SCENARIO else ({}, None)
        seed = seed if seed is not None else doc.get("seed")
    print(f"seed: {seed}")
    try:
        return args.func(args)
    except (ScenarioError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
