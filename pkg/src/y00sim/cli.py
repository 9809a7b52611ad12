"""Command-line front end.

Configuration precedence: built-in defaults < ``--config`` JSON file <
``--set KEY=VALUE`` overrides.  ``--seed`` and ``--workers`` are separate
flags.  Every run writes to ``<out>/<config-hash>-<UTC timestamp>/``; the
files inside depend only on the configuration and seed.

Exit codes: 0 ok, 2 configuration error, 3 complexity guard, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
import typing
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from pydantic import ConfigDict, ValidationError, create_model

from . import attacks, experiments
from .keystream import unicity_metrics
from .modem import design_levels, phase_signal_distance
from .receiver import design_neighbor_error
from .secmetrics import (
    NumericalError,
    TruncationError,
    coherent_pair_helstrom,
    complexity_report,
    discriminate_symmetric,
    helstrom_binary_mixed_small,
    homodyne_binary_error,
    max_distance,
)

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_NUMERIC = 0, 2, 3, 4


@dataclasses.dataclass
class AnalyzeConfig:
    M: int = 2000
    nbar: float = 10000.0
    key_len: int = 100
    kind: str = "lfsr"
    J: int = 3
    block_M: int = 1024
    H_X: float = 1.0
    D: float = 0.0
    alpha_min: float = 80.0
    alpha_max: float = 100.0
    table_M: int = 100
    loss_db_per_km: float = 0.2
    clone_Q: float | None = None
    small_M: int = 4
    small_alpha_min: float = 1.0
    small_alpha_max: float = 2.0
    binary_S: list[float] = dataclasses.field(default_factory=lambda: [2.0, 3.0, 4.0, 5.0, 6.0])


@dataclasses.dataclass
class AttackCliConfig(attacks.AttackConfig):
    parity: bool = True


SCHEMAS = {
    "simulate": experiments.LinkConfig,
    "eye": experiments.EyeConfig,
    "ber-distance": experiments.BerDistanceConfig,
    "attack": AttackCliConfig,
    "analyze": AnalyzeConfig,
}


class ConfigError(ValueError):
    pass


def _model(dc):
    hints = typing.get_type_hints(dc)
    fields = {}
    for f in dataclasses.fields(dc):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        fields[f.name] = (hints[f.name], default)
    return create_model(dc.__name__ + "Schema", __config__=ConfigDict(extra="forbid"), **fields)


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"--set expects KEY=VALUE, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def resolve_config(command: str, path: str | None, overrides: list[str]):
    """Merge defaults, file and overrides, validate, and build the dataclass."""
    data: dict = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    for item in overrides:
        key, value = _parse_override(item)
        data[key] = value
    dc = SCHEMAS[command]
    try:
        validated = _model(dc).model_validate(data)
        return dc(**validated.model_dump())
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_hash(command: str, cfg, seed: int) -> str:
    blob = json.dumps({"command": command, "config": dataclasses.asdict(cfg), "seed": seed},
                      sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


class RunWriter:
    def __init__(self, root: Path, command: str, cfg, seed: int):
        self.digest = config_hash(command, cfg, seed)
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
        self.dir = root / f"{self.digest[:12]}-{stamp}"
        self.dir.mkdir(parents=True, exist_ok=False)
        self.meta = {"command": command, "seed": seed, "config_hash": self.digest}
        self.json("config.json", {**self.meta, "config": dataclasses.asdict(cfg)})

    def json(self, name: str, payload) -> None:
        (self.dir / name).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")

    def csv(self, name: str, text: str, **extra) -> None:
        (self.dir / name).write_text(text)
        self.json(name + ".meta.json", {**self.meta, "file": name, **extra})


# --------------------------------------------------------------------------
# subcommands


def _simulate(cfg, seed, workers, out: RunWriter) -> int:
    res = experiments.run_simulation(cfg, seed, workers)
    out.json("detection_stats.json", res.to_dict())
    out.csv("raw_samples.csv", res.raw_csv, rows=min(cfg.raw_samples, cfg.n_bits))
    return EXIT_OK


def _eye(cfg, seed, workers, out: RunWriter) -> int:
    res = experiments.run_eye(cfg, seed)
    for name, hist in (("bob", res.bob), ("eve", res.eve)):
        out.csv(f"eye_{name}.csv", hist.to_csv(), histogram=json.loads(hist.metadata_json()))
    out.json("eye_openings.json", res.openings())
    return EXIT_OK


def _ber_distance(cfg, seed, workers, out: RunWriter) -> int:
    res = experiments.run_ber_distance(cfg, seed)
    out.csv("ber_distance.csv", res.to_csv(), summary=res.to_dict())
    out.json("ber_distance_summary.json", res.to_dict())
    return EXIT_OK


def _attack(cfg, seed, workers, out: RunWriter) -> int:
    fields = {f.name for f in dataclasses.fields(attacks.AttackConfig)}
    base = attacks.AttackConfig(**{k: v for k, v in dataclasses.asdict(cfg).items() if k in fields})
    report = attacks.heterodyne_kpa(base, workers)
    out.json("attack_report.json", report.to_dict())
    out.csv("attack_summary.csv", report.summary_csv())
    if cfg.parity:
        out.json("parity_report.json", attacks.parity_attack(base))
    if report.guard_refused:
        print(f"refused: complexity guard (|K|={cfg.key_len} exceeds brute-force limit "
              f"{attacks.BRUTE_FORCE_MAX_KEY_BITS})", file=sys.stderr)
        return EXIT_GUARD
    return EXIT_OK


def analyze(cfg: AnalyzeConfig) -> tuple[dict, list[dict]]:
    """Every closed-form quantity with its inputs; returns (report, distance curve)."""
    table = design_levels(cfg.alpha_min, cfg.alpha_max, cfg.table_M, "intensity")
    amp_table = design_levels(cfg.alpha_min, cfg.alpha_max, cfg.table_M, "amplitude")
    small = design_levels(cfg.small_alpha_min, cfg.small_alpha_max, cfg.small_M, "amplitude")
    S = np.asarray(cfg.binary_S, dtype=float)
    hel = np.array([coherent_pair_helstrom(s) for s in S])
    hom = np.array([homodyne_binary_error(s) for s in S])
    slope = (lambda y: float(np.polyfit(S, np.log(y), 1)[0])) if S.size >= 2 else (lambda y: None)
    dist = max_distance(table, cfg.loss_db_per_km, Q=cfg.clone_Q)
    unicity = unicity_metrics(cfg.key_len, cfg.kind, cfg.H_X, cfg.D)
    disc = discriminate_symmetric(cfg.M, cfg.nbar)
    # sequence figures as products of per-symbol successes over the known-plaintext slots
    slots = unicity.f_of_K / math.log2(cfg.M)
    seq = {
        "slots": slots,
        "log10_P_D_qum": slots * disc.log10_P_D_qum,
        "log10_key_guess": -cfg.key_len * math.log10(2),
        "log10_P_bayes": slots * math.log10(disc.P_bayes),
    }
    seq["ordering_holds"] = seq["log10_P_D_qum"] < seq["log10_key_guess"] < seq["log10_P_bayes"]
    report = {
        "inputs": dataclasses.asdict(cfg),
        "unicity": unicity.to_dict(),
        "complexity": complexity_report(cfg.J, cfg.key_len, cfg.block_M, cfg.kind).to_dict(),
        "discrimination": disc.to_dict(),
        "sequence_comparison": seq,
        "binary_bounds": {
            "S": S.tolist(),
            "helstrom": hel.tolist(),
            "homodyne": hom.tolist(),
            "helstrom_log_slope": slope(hel),
            "homodyne_log_slope": slope(hom),
        },
        "level_design": {
            "delta_amplitude": amp_table.delta,
            "delta_intensity": table.delta,
            "neighbor_error": design_neighbor_error(table),
            "phase_signal_distance": phase_signal_distance(cfg.alpha_max, cfg.table_M),
        },
        "mixed_state_small": {
            "M": cfg.small_M,
            "alpha_range": [cfg.small_alpha_min, cfg.small_alpha_max],
            "helstrom_error": helstrom_binary_mixed_small(small),
        },
        "distance": {k: v for k, v in dist.to_dict().items() if k != "curve"},
    }
    return report, dist.curve


def _analyze(cfg, seed, workers, out: RunWriter) -> int:
    report, curve = analyze(cfg)
    out.json("analysis.json", report)
    if curve:
        cols = list(curve[0])
        lines = [",".join(cols)] + [",".join(repr(r[c]) for c in cols) for r in curve]
        out.csv("distance_curve.csv", "\n".join(lines) + "\n")
    return EXIT_OK


RUNNERS = {
    "simulate": _simulate,
    "eye": _eye,
    "ber-distance": _ber_distance,
    "attack": _attack,
    "analyze": _analyze,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="y00", description="Y-00 quantum stream cipher simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--seed", type=int, default=0, help="master seed (u64)")
        p.add_argument("--workers", type=int, default=1, help="worker threads")
        p.add_argument("--out", default="runs", metavar="DIR", help="output root directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config field (value parsed as JSON when possible)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg = resolve_config(args.command, args.config, args.set)
        if isinstance(cfg, attacks.AttackConfig):
            cfg.master_seed = args.seed
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = RunWriter(Path(args.out), args.command, cfg, args.seed)
    try:
        code = RUNNERS[args.command](cfg, args.seed, args.workers, out)
    except (NumericalError, TruncationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(out.dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
