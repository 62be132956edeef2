"""Command line entry point.

    ddosguard run --config scenario.ini --out metrics.csv [--plot]
    ddosguard demo --scenario one
    ddosguard validate --config scenario.ini
    ddosguard dump --scenario two > two.ini

Exit status: 0 on success, 1 for a bad configuration, 2 for I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .report import write_figures
from .scenarios import ATTACK_START, ATTACKED_VM, SCENARIO_LATENCY, canonical_config
from .sim.config import ConfigError, dump_config, load_config, validate
from .sim.engine import Simulation
from .sim.metrics import export_csv
from .timeline import timeline

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def _overrides(cfg, args):
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "duration", None) is not None:
        changes["duration"] = args.duration
    if getattr(args, "loss", None) is not None:
        changes["loss_rate"] = args.loss
    if getattr(args, "parallel", False):
        changes["parallel"] = True
    return validate(replace(cfg, **changes)) if changes else cfg


def _finish(sim, args) -> None:
    if args.out:
        export_csv(sim.series, args.out)
        print(f"wrote {len(sim.series)} rows to {args.out}")
        if args.plot:
            for p in write_figures(sim.series, args.out, args.vm):
                print(f"wrote {p}")


def cmd_run(args) -> int:
    cfg = _overrides(load_config(args.config), args)
    sim = Simulation(cfg)
    sim.run()
    _finish(sim, args)
    return EXIT_OK


def cmd_demo(args) -> int:
    cfg = _overrides(canonical_config(args.scenario), args)
    sim = Simulation(cfg)
    sim.run()
    print(f"scenario {args.scenario}: mining latency {cfg.mining_latency}s, "
          f"attack on VM {ATTACKED_VM} from t={ATTACK_START}")
    for line in timeline(sim, ATTACKED_VM).lines(since=ATTACK_START - 5):
        print(line)
    if args.vm is None:
        args.vm = ATTACKED_VM
    _finish(sim, args)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"ok: {cfg.vm_count} VMs, {cfg.duration} ticks, {len(cfg.attacks)} attack(s)")
    return EXIT_OK


def cmd_dump(args) -> int:
    sys.stdout.write(dump_config(canonical_config(args.scenario)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddosguard", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def knobs(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--duration", type=int)
        p.add_argument("--loss", type=float, help="message loss rate in [0, 1]")
        p.add_argument("--parallel", action="store_true", help="advance VMs on a thread pool")
        p.add_argument("--plot", action="store_true", help="write PNG figures next to the CSV")
        p.add_argument("--vm", type=int, help="VM to plot (default: busiest / attacked)")

    p = sub.add_parser("run", help="run a scenario file and write the metrics CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    knobs(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("demo", help="run a built-in scenario and print the incident timeline")
    p.add_argument("--scenario", choices=sorted(SCENARIO_LATENCY), default="one")
    p.add_argument("--out")
    knobs(p)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("dump", help="print a built-in scenario as a config file")
    p.add_argument("--scenario", choices=sorted(SCENARIO_LATENCY), default="one")
    p.set_defaults(func=cmd_dump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
