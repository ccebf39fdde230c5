"""Command-line entry point.

Subcommands: ``run``, ``ablate``, ``sweep``, ``oracle`` and ``report``.
Settings resolve as built-in defaults, then ``--config`` file, then flags.
Result rows go to ``--out`` (or stdout); a summary table and a figure are
written next to ``--out`` with ``_summary`` and ``.png`` suffixes.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .baselines import brute_force
from .channel import sample_channels
from .config import NoiseModel, TimingConfig, read_config_file
from .harness import (ExperimentSpec, ablation_table, export, overhead_report, records_to_text,
                      rows_to_csv, rows_to_json, run_ablation, run_experiment, run_sweep,
                      summarize, write_table)
from .scenario import calibrated_config, generate_scenario

_EXPERIMENT_KEYS = {
    "seed_base": ("seed_base", int),
    "runs": ("n_runs", int),
    "methods": ("methods", lambda s: tuple(m.strip() for m in s.split(",") if m.strip())),
    "shots": ("shots", int),
    "noise": ("noise", lambda s: _on_off(s)),
    "exact": ("exact", lambda s: s.lower() in ("1", "true", "yes", "on")),
    "phase_bits": ("phase_bits", int),
    "baseline_epochs": ("baseline_epochs", int),
    "baseline_eta": ("baseline_eta", float),
    "workers": ("workers", int),
    "n_values": ("n_values", lambda s: [int(x) for x in s.split(",") if x.strip()]),
}


def _on_off(text: str) -> bool:
    t = text.strip().lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI config file")
    common.add_argument("--seed", type=int, help="first scenario seed")
    common.add_argument("--runs", type=int, help="Monte Carlo runs (seeds)")
    common.add_argument("--shots", type=int, help="measurement shots per circuit run")
    common.add_argument("--noise", choices=("on", "off"), help="gate/readout noise")
    common.add_argument("--exact", action="store_true", help="infinite-shot mode")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--epochs", type=int, help="training epochs")
    common.add_argument("--n-elements", type=int, help="RIS grid elements N")
    common.add_argument("--methods", help="comma-separated method list")
    common.add_argument("--timing", action="store_true", help="include wall_time column")
    common.add_argument("--no-plot", action="store_true", help="skip the figure")

    p = argparse.ArgumentParser(prog="qgcn-ris", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="one experiment over seeds and methods")
    sub.add_parser("ablate", parents=[common], help="full / no-virtual-spacing / no-double-sided")
    sw = sub.add_parser("sweep", parents=[common], help="repeat run over element counts")
    sw.add_argument("--n-values", type=_int_list, help="element counts, e.g. 2,4,6")
    orc = sub.add_parser("oracle", parents=[common], help="exhaustive grid search")
    orc.add_argument("--bits", type=int, help="phase bits B")
    sub.add_parser("report", parents=[common], help="circuit overhead and coherence budget")
    return p


def _build_spec(args, file_cfg: dict):
    spec_kw, extra = {}, {}
    for key, raw in file_cfg.get("experiment", {}).items():
        if key not in _EXPERIMENT_KEYS:
            raise KeyError(f"unknown experiment key {key!r}")
        name, conv = _EXPERIMENT_KEYS[key]
        (extra if name in ("exact", "n_values") else spec_kw)[name] = conv(raw)
    system = dict(file_cfg.get("system", {}))
    train = dict(file_cfg.get("train", {}))
    train.pop("shots", None)
    if "shots" in file_cfg.get("train", {}):
        spec_kw.setdefault("shots", file_cfg["train"]["shots"])
    noise_model = NoiseModel(**file_cfg.get("noise", {}))
    if args.seed is not None:
        spec_kw["seed_base"] = args.seed
    if args.runs is not None:
        spec_kw["n_runs"] = args.runs
    if args.shots is not None:
        spec_kw["shots"] = args.shots
    if args.noise is not None:
        spec_kw["noise"] = args.noise == "on"
    if args.exact or extra.get("exact"):
        spec_kw["shots"] = None
    if args.methods:
        spec_kw["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if args.epochs is not None:
        train["epochs"] = args.epochs
    if args.n_elements is not None:
        system["n_elements"] = args.n_elements
    spec = ExperimentSpec(system=system, train=train, noise_model=noise_model, **spec_kw)
    return spec, extra


def _side_path(out: Path, suffix: str, ext: str) -> Path:
    return out.with_name(out.stem + suffix + ext)


def _write_rows(rows, args, summary, figure=None):
    if args.out is None:
        sys.stdout.write(rows_to_csv(rows, args.timing) if args.format == "csv"
                         else rows_to_json(rows, args.timing))
        return
    export(rows, args.out, args.format, args.timing)
    write_table(summary, _side_path(args.out, "_summary", "." + args.format), args.format)
    if figure is not None and not args.no_plot:
        figure(summary, _side_path(args.out, "", ".png"))


def cmd_run(args, spec, extra):
    from .plotting import plot_summary

    rows = run_experiment(spec)
    _write_rows(rows, args, summarize(rows), plot_summary)


def cmd_ablate(args, spec, extra):
    from .plotting import plot_summary

    rows = run_ablation(spec)
    _write_rows(rows, args, ablation_table(rows), plot_summary)


def cmd_sweep(args, spec, extra):
    from .plotting import plot_sweep

    n_values = args.n_values or extra.get("n_values") or [spec.system_config().n_elements]
    rows = run_sweep(spec, n_values)
    _write_rows(rows, args, summarize(rows), plot_sweep)


def cmd_oracle(args, spec, extra):
    bits = args.bits if args.bits is not None else spec.phase_bits
    records = []
    for r in range(spec.n_runs):
        seed = spec.seed_base + r
        base = spec.system_config()
        scenario = generate_scenario(seed, base)
        channels = sample_channels(scenario, base)
        cfg = calibrated_config(channels, base)
        res = brute_force(channels, cfg, bits)
        records.append({
            "seed": seed, "n_elements": cfg.n_elements, "phase_bits": bits,
            "min_rate": res.best_min_rate,
            "activation": "".join(str(int(a)) for a in res.best_state.activation),
            "phase_levels": ";".join(str(int(round(p / (2 * np.pi / 2 ** bits))) % 2 ** bits)
                                     for p in res.best_state.phases),
            "patterns": res.n_patterns,
            "configurations_searched": res.configurations_searched,
            "scenario": scenario.digest(),
        })
    _write_records(records, args)


def cmd_report(args, spec, extra, timing: TimingConfig):
    rep = overhead_report(spec.system_config(), spec.train_config(), timing)
    head = {k: v for k, v in rep.items() if k != "blocks"}
    records = [{**blk, **head} for blk in rep["blocks"]]
    _write_records(records, args)


def _write_records(records, args):
    if args.out is None:
        sys.stdout.write(records_to_text(records, args.format))
    else:
        write_table(records, args.out, args.format)


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        file_cfg = read_config_file(args.config) if args.config else {}
        spec, extra = _build_spec(args, file_cfg)
        if args.command == "report":
            cmd_report(args, spec, extra, TimingConfig(**file_cfg.get("timing", {})))
        else:
            {"run": cmd_run, "ablate": cmd_ablate, "sweep": cmd_sweep,
             "oracle": cmd_oracle}[args.command](args, spec, extra)
    except (ValueError, KeyError, FileNotFoundError, OSError, TypeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"qgcn-ris {args.command}: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
