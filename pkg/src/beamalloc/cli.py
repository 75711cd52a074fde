"""Command-line entry point: load a config, run a campaign, write CSVs.

Config files are INI-style with the sections ``cell``, ``budget``, ``qos``,
``algorithm`` and ``sweep``; every key is optional and defaults to the
reference parameter set. Angles are in degrees, distances in meters, rates
in bits/s. See README.md for the full key list.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from . import __version__
from .allocator import NO_PROTECT, AllocationError, QosConfig
from .channel import ChannelError, LinkBudget
from .geometry import CellConfig, GeometryError
from .simulator import Arm, CampaignConfig, CampaignResult, ConfigError, run_campaign

log = logging.getLogger(__name__)

FAIRNESS_COLUMNS = ["K", "algorithm", "delta", "beta", "mean_gamma", "stderr", "mean_served", "mean_outage", "run_id"]
THROUGHPUT_COLUMNS = ["K", "algorithm", "delta", "beta", "mean_sumrate_gbps", "stderr", "run_id"]
HIST_COLUMNS = ["K", "algorithm", "delta", "theta_deg", "selection_fraction", "run_id"]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _names(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


# section -> key -> value parser
_SCHEMA: dict[str, dict[str, Callable]] = {
    "cell": {"radius_m": float, "num_sectors": int},
    "budget": {
        "tx_power_dbm_per_sector": float,
        "noise_density_dbm_hz": float,
        "system_bandwidth_hz": float,
        "num_subbands": int,
        "carrier_freq_ghz": float,
        "pathloss_exp": float,
        "sidelobe_level": float,
    },
    "qos": {"rmin_center_bps": float, "rmin_edge_bps": float},
    "algorithm": {"thetas_deg": _floats, "beta_m": float, "delta_m": float},
    "sweep": {"k": _ints, "frames": int, "seed": int, "algorithms": _names, "deltas_m": _floats},
}


def _read_values(path: str | Path | None) -> dict[str, dict]:
    values: dict[str, dict] = {s: {} for s in _SCHEMA}
    if path is None:
        return values
    parser = configparser.ConfigParser(interpolation=None, default_section="__unused__")
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(str(path), f"malformed config: {exc}") from None
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(section, "unknown section")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            try:
                values[section][key] = _SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}: {exc}") from None
    return values


def _build(section: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except (GeometryError, ChannelError, AllocationError) as exc:
        raise ConfigError(section, str(exc)) from None


def build_config(values: dict[str, dict]) -> CampaignConfig:
    c, b, q, a, s = (values.get(k, {}) for k in ("cell", "budget", "qos", "algorithm", "sweep"))
    cell = _build("cell", CellConfig, **c)
    budget = _build("budget", LinkBudget, **b)
    qos_kwargs = {}
    if "rmin_center_bps" in q:
        qos_kwargs["rmin_center"] = q["rmin_center_bps"]
    if "rmin_edge_bps" in q:
        qos_kwargs["rmin_edge"] = q["rmin_edge_bps"]
    qos = _build("qos", QosConfig, **qos_kwargs)

    deltas = s.get("deltas_m") or [None]
    arms = []
    for name in s.get("algorithms", ["proposed"]):
        for d in deltas:
            try:
                arm = Arm.parse(name, d)
            except ValueError as exc:
                raise ConfigError("sweep.algorithms", str(exc)) from None
            if arm.algorithm == NO_PROTECT and arms and arm in arms:
                continue
            arms.append(arm)

    kwargs = dict(cell=cell, budget=budget, qos=qos, arms=tuple(arms))
    if "thetas_deg" in a:
        kwargs["thetas_deg"] = tuple(a["thetas_deg"])
    if "beta_m" in a:
        kwargs["beta"] = a["beta_m"]
    if "delta_m" in a:
        kwargs["delta"] = a["delta_m"]
    if "k" in s:
        kwargs["k_values"] = tuple(s["k"])
    for key in ("frames", "seed"):
        if key in s:
            kwargs[key] = s[key]
    return CampaignConfig(**kwargs)


def load_config(path: str | Path | None, overrides: dict[str, dict] | None = None) -> CampaignConfig:
    """Parse and validate a config file; ``overrides`` (same shape) win over file values."""
    values = _read_values(path)
    for section, kv in (overrides or {}).items():
        values.setdefault(section, {}).update(kv)
    return build_config(values)


def config_record(cfg: CampaignConfig) -> dict:
    rec = dataclasses.asdict(cfg)
    rec["arms"] = [{"label": a.label, **dataclasses.asdict(a)} for a in cfg.arms]
    return rec


def run_id(cfg: CampaignConfig) -> str:
    blob = json.dumps(config_record(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def _write_csv(path: Path, columns: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def emit_results(result: CampaignResult, out_dir: str | Path, extra: dict | None = None) -> dict[str, Path]:
    """Write fairness.csv, throughput.csv, beamwidth_hist.csv and manifest.json.

    The CSVs carry the run id of the manifest that produced them and contain
    nothing time-dependent, so identical configs give byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    rid = run_id(cfg)
    fair, thr, hist = [], [], []
    for agg in result.aggregates:
        g, g_se = agg.gamma_stats
        s, s_se = agg.sumrate_stats
        key = [agg.k, agg.arm.label, agg.delta, agg.beta]
        fair.append(key + [g, g_se, agg.mean_of("served"), agg.mean_of("outage"), rid])
        thr.append(key + [s / 1e9, s_se / 1e9, rid])
        for t, frac in sorted(agg.theta_fractions.items()):
            hist.append([agg.k, agg.arm.label, agg.delta, t, frac, rid])

    paths = {
        "fairness": out / "fairness.csv",
        "throughput": out / "throughput.csv",
        "beamwidth_hist": out / "beamwidth_hist.csv",
        "manifest": out / "manifest.json",
    }
    _write_csv(paths["fairness"], FAIRNESS_COLUMNS, fair)
    _write_csv(paths["throughput"], THROUGHPUT_COLUMNS, thr)
    _write_csv(paths["beamwidth_hist"], HIST_COLUMNS, hist)
    manifest = {
        "run_id": rid,
        "tool": "beamalloc",
        "version": __version__,
        "seed": cfg.seed,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config_record(cfg),
        "outputs": {k: p.name for k, p in paths.items() if k != "manifest"},
        **(extra or {}),
    }
    with open(paths["manifest"], "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beamalloc", description="Adaptive beam/subband allocation campaigns.")
    p.add_argument("--config", help="INI config file (defaults to the reference parameters)")
    p.add_argument("--seed", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument(
        "--algo",
        action="append",
        help="proposed | no-protect | fixed:<deg>; repeat or comma-separate for a sweep",
    )
    p.add_argument("--sweep-k", help="comma-separated user counts, e.g. 20,40,60")
    p.add_argument("--deltas", help="comma-separated edge thresholds in meters")
    p.add_argument("--beta", type=float, help="position uncertainty radius in meters")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    overrides: dict[str, dict] = {"sweep": {}, "algorithm": {}}
    if args.seed is not None:
        overrides["sweep"]["seed"] = args.seed
    if args.frames is not None:
        overrides["sweep"]["frames"] = args.frames
    if args.algo:
        overrides["sweep"]["algorithms"] = [n for a in args.algo for n in _names(a)]
    try:
        if args.sweep_k:
            overrides["sweep"]["k"] = _ints(args.sweep_k)
        if args.deltas:
            overrides["sweep"]["deltas_m"] = _floats(args.deltas)
    except ValueError as exc:
        print(f"error: bad list argument: {exc}", file=sys.stderr)
        return 2
    if args.beta is not None:
        overrides["algorithm"]["beta_m"] = args.beta

    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2

    result = run_campaign(cfg, workers=max(1, args.workers))
    try:
        paths = emit_results(result, args.out)
    except OSError as exc:
        print(f"error: cannot write results: {exc}", file=sys.stderr)
        return 1
    for p in paths.values():
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
