"""``rho`` command line: gen, features, train, evaluate, ablate, place.

Exit codes: 0 success, 2 input error, 3 empty result, 4 internal invariant
violation.  ``RHO_LOG`` sets the log level (default WARNING).
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .features import (DEFAULT_THRESHOLD, FeatureError, NoObjectsRetained, emit_dataset, emit_times,
                       group_rows, parse_times, read_dataset)
from .pipeline import build_group
from .placement import (CostModelConfig, SpecInvalid, default_suite, generate_trace, load_suite,
                        tradeoff_entry, tradeoff_report)
from .placement.cost import ground_truth_labels, profile_trace
from .ranker import (DegenerateDataset, RankerError, RankerHyperparams, ablate, ablation_csv,
                     evaluate_rankings, llcm_rankings, load_model, loocv, model_digest, predict,
                     save_model, standard_subsets, train)
from .trace import TraceError, read_trace, save_trace

log = logging.getLogger("rho")

EXIT_OK, EXIT_INPUT, EXIT_EMPTY, EXIT_INTERNAL = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    seed: int = 0
    threshold: float = DEFAULT_THRESHOLD
    hyperparams: dict = field(default_factory=dict)
    cost_model: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)

    def ranker_hp(self) -> RankerHyperparams:
        return RankerHyperparams(**{**self.hyperparams, "seed": self.seed})

    def cost(self) -> CostModelConfig:
        return CostModelConfig.from_dict(self.cost_model)

    def digest(self) -> str:
        doc = {"seed": self.seed, "threshold": self.threshold, "hyperparams": self.hyperparams,
               "cost_model": self.cost_model}
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]

    def metadata(self) -> dict:
        return {"tool": "rho", "version": __version__, "seed": self.seed, "config_digest": self.digest()}


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise CliError(f"config file {path} not found")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(f"config file {path}: {exc}") from None
        unknown = set(doc) - {f.name for f in dataclasses.fields(RunConfig)}
        if unknown:
            raise CliError(f"config file {path}: unknown keys {sorted(unknown)}")
        cfg = RunConfig(**doc)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "threshold", None) is not None:
        cfg.threshold = args.threshold
    if not 0 <= cfg.seed < 1 << 64:
        raise CliError("seed must be an unsigned 64-bit integer")
    if not 0 < cfg.threshold <= 1:
        raise CliError("threshold must lie in (0, 1]")
    try:
        cfg.ranker_hp()
        cfg.cost()
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad configuration: {exc}") from None
    return cfg


def _out_dir(args, cfg: RunConfig, key: str = "reports") -> Path:
    out = Path(args.out or cfg.paths.get(key) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    log.info("wrote %s", path)


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"{p} does not exist")
    return p


# -- gen --------------------------------------------------------------------

def group_seed(seed: int, index: int) -> int:
    return (seed * 0x9E3779B97F4A7C15 + index) & ((1 << 64) - 1)


def cmd_gen(args, cfg: RunConfig) -> int:
    spec = args.spec
    try:
        if spec.startswith("builtin"):
            _, _, n = spec.partition(":")
            suite = default_suite(int(n) if n else 30, seed=cfg.seed)
        else:
            suite = load_suite(_require(spec))
    except (SpecInvalid, ValueError) as exc:
        raise CliError(f"spec error: {exc}") from None
    out = _out_dir(args, cfg, "traces")
    entries = []
    for i, g in enumerate(suite.groups):
        s = group_seed(cfg.seed, i)
        try:
            trace = generate_trace(g, s)
        except SpecInvalid as exc:
            raise CliError(f"spec error: {exc}") from None
        fname = f"{g.name}.trace"
        save_trace(trace, out / fname)
        entries.append({"group": g.name, "file": fname, "seed": s, "samples": len(trace.samples)})
    _write(out / "manifest.json", _dump_json({"groups": entries, "metadata": cfg.metadata()}))
    print(f"generated {len(entries)} traces in {out}")
    return EXIT_OK


# -- features ------------------------------------------------------------------

def _trace_paths(inputs) -> list[Path]:
    paths = []
    for item in inputs:
        p = _require(item)
        if p.is_dir():
            manifest = p / "manifest.json"
            if manifest.is_file():
                doc = json.loads(manifest.read_text(encoding="utf-8"))
                paths.extend(p / e["file"] for e in doc["groups"])
            else:
                paths.extend(sorted(p.glob("*.trace")))
        else:
            paths.append(p)
    if not paths:
        raise CliError("no trace files found")
    return paths


def cmd_features(args, cfg: RunConfig) -> int:
    paths = _trace_paths(args.traces or [cfg.paths.get("traces", ".")])
    labels = args.labels or "oracle"
    times_doc = None
    if labels.startswith("times:"):
        tpath = _require(labels[len("times:"):])
        try:
            times_doc = parse_times(tpath.read_text(encoding="utf-8"))
        except FeatureError as exc:
            raise CliError(str(exc)) from None
    elif labels != "oracle":
        raise CliError("--labels must be 'oracle' or 'times:<file>'")
    cost = cfg.cost()
    groups, times, diags = [], [], []
    for p in paths:
        name = p.stem
        try:
            trace = read_trace(p)
        except TraceError as exc:
            raise CliError(f"{p}: {exc}") from None
        gtimes = None
        if times_doc is not None:
            if name not in times_doc:
                raise CliError(f"times file has no entries for group {name}")
            gtimes = times_doc[name]
        try:
            res = build_group(trace, name, cost, cfg.threshold, gtimes)
        except NoObjectsRetained as exc:
            raise CliError(f"{name}: {exc}", EXIT_EMPTY) from None
        except FeatureError as exc:
            raise CliError(f"{name}: {exc}") from None
        groups.append(res.rows)
        times.extend((name, oid, t) for oid, t in sorted(res.times.items()))
        diags.append(res.diagnostics())
    out = _out_dir(args, cfg)
    _write(out / "dataset.csv", emit_dataset(groups))
    _write(out / "times.csv", emit_times(times))
    _write(out / "diagnostics.json", _dump_json({"groups": diags, "metadata": cfg.metadata()}))
    print(f"dataset: {sum(len(g) for g in groups)} rows in {len(groups)} groups -> {out / 'dataset.csv'}")
    return EXIT_OK


# -- train / evaluate / ablate ---------------------------------------------------

def _dataset(args, cfg):
    path = _require(args.dataset or cfg.paths.get("dataset", "dataset.csv"))
    try:
        return path, read_dataset(path)
    except FeatureError as exc:
        raise CliError(f"{path}: {exc}") from None


def _times(args, dataset_path: Path):
    tpath = Path(args.times) if getattr(args, "times", None) else dataset_path.with_name("times.csv")
    tpath = _require(tpath)
    try:
        return parse_times(tpath.read_text(encoding="utf-8"))
    except FeatureError as exc:
        raise CliError(f"{tpath}: {exc}") from None


def cmd_train(args, cfg: RunConfig) -> int:
    _, rows = _dataset(args, cfg)
    model = train(rows, cfg.ranker_hp())
    model.metadata.update(cfg.metadata())
    out = _out_dir(args, cfg)
    _write(out / "model.json", save_model(model))
    print(f"model digest {model_digest(model)}")
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig) -> int:
    path, rows = _dataset(args, cfg)
    times = _times(args, path)
    hp = cfg.ranker_hp()
    gbdt = evaluate_rankings(loocv(rows, hp), rows, times)
    base = evaluate_rankings(llcm_rankings(rows), rows, times)
    doc = {"approaches": {"llcm": base.to_dict(), "gbdt": gbdt.to_dict()}, "metadata": cfg.metadata()}
    out = _out_dir(args, cfg)
    _write(out / "evaluation.json", _dump_json(doc))
    print(f"{'approach':<10}{'accuracy':>10}{'mrr':>8}  accumulated loss % (avg, std)")
    for name, s in (("llcm", base), ("gbdt", gbdt)):
        al = s.accumulated_loss
        print(f"{name:<10}{s.accuracy:>10.2f}{s.mrr:>8.2f}  {al.total:.2f} ({al.mean:.2f}, {al.std:.2f})")
    return EXIT_OK


def cmd_ablate(args, cfg: RunConfig) -> int:
    path, rows = _dataset(args, cfg)
    times = _times(args, path)
    subsets = standard_subsets(refined=not args.no_refined)
    if args.subset:
        subsets = [tuple(s.split("+")) for s in args.subset]
    table = ablate(rows, cfg.ranker_hp(), times, subsets)
    out = _out_dir(args, cfg)
    _write(out / "ablation.csv", ablation_csv(table))
    print(f"{len(table)} subsets -> {out / 'ablation.csv'}")
    return EXIT_OK


# -- place -----------------------------------------------------------------------

def cmd_place(args, cfg: RunConfig) -> int:
    _, rows = _dataset(args, cfg)
    mpath = _require(args.model)
    model = load_model(mpath.read_text(encoding="utf-8"))
    tpath = _require(args.trace)
    try:
        trace = read_trace(tpath)
    except TraceError as exc:
        raise CliError(f"{tpath}: {exc}") from None
    name = tpath.stem
    cost = cfg.cost()
    grouped = group_rows(rows)
    if name in grouped:
        grows = grouped[name]
        profile = profile_trace(trace, name)
    else:
        try:
            res = build_group(trace, name, cost, cfg.threshold)
        except NoObjectsRetained as exc:
            raise CliError(f"{name}: {exc}", EXIT_EMPTY) from None
        grows, profile = res.rows, res.profile
    ranking = predict(model, grows)
    index = {o.object_id: i for i, o in enumerate(profile.objects)}
    retained = [index[r.object_id] for r in grows if r.object_id in index]
    if len(retained) != len(grows):
        raise CliError(f"dataset rows for {name} do not match the objects in {tpath}")
    truth = ground_truth_labels(profile, cost, retained=retained)
    chosen = index[ranking.top1]
    entry = tradeoff_entry(profile, truth, chosen, cost)
    best = profile.objects[truth.top1].object_id
    plan = {
        "group": name,
        "top1": {"object_id": ranking.top1, "label": profile.objects[chosen].label},
        "placement": [{"object_id": o.object_id, "label": o.label,
                       "tier": "DRAM" if o.object_id == ranking.top1 else "PMEM"} for o in profile.objects],
        "unmapped_tier": "DRAM",
        "tradeoff": {"slowdown": round(entry.slowdown, 6), "memory_reduction": round(entry.memory_reduction, 6)},
        "oracle": {"best": best, "hit": best == ranking.top1},
        "metadata": cfg.metadata(),
    }
    out = _out_dir(args, cfg)
    _write(out / f"{name}.plan.json", _dump_json(plan))
    _write(out / f"{name}.tradeoff.csv", tradeoff_report([entry]))
    print(f"{name}: {plan['top1']['label']} -> DRAM (slowdown {entry.slowdown:.3f}x, "
          f"memory reduction {entry.memory_reduction:.1f}x)")
    return EXIT_OK


# -- wiring ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration; flags override it")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--threshold", type=float, help="object relevance filter (default 0.10)")
    common.add_argument("--out", help="output directory")

    p = argparse.ArgumentParser(prog="rho", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rho {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate synthetic traces from a suite spec")
    g.add_argument("spec", help="suite spec JSON, or builtin[:N] for the default suite")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("features", parents=[common], help="build the labelled dataset from traces")
    f.add_argument("traces", nargs="*", help="trace files or directories")
    f.add_argument("--labels", help="oracle (default) or times:<file>")
    f.set_defaults(func=cmd_features)

    t = sub.add_parser("train", parents=[common], help="fit the ranker on a dataset")
    t.add_argument("dataset", nargs="?")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", parents=[common], help="leave-one-group-out comparison with the LLC-miss baseline")
    e.add_argument("dataset", nargs="?")
    e.add_argument("--times", help="times CSV (default: times.csv next to the dataset)")
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("ablate", parents=[common], help="feature-group ablation")
    a.add_argument("dataset", nargs="?")
    a.add_argument("--times", help="times CSV (default: times.csv next to the dataset)")
    a.add_argument("--subset", action="append", help="feature groups joined by '+'; repeatable")
    a.add_argument("--no-refined", action="store_true", help="skip the tlb_miss_only / external_access_only runs")
    a.set_defaults(func=cmd_ablate)

    pl = sub.add_parser("place", parents=[common], help="placement plan for one trace")
    pl.add_argument("dataset")
    pl.add_argument("model")
    pl.add_argument("trace")
    pl.set_defaults(func=cmd_place)
    return p


def main(argv: Optional[list] = None) -> int:
    logging.basicConfig(level=os.environ.get("RHO_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return args.func(args, cfg)
    except CliError as exc:
        print(f"rho: {exc}", file=sys.stderr)
        return exc.code
    except (DegenerateDataset, RankerError, FeatureError) as exc:
        print(f"rho: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AssertionError as exc:
        print(f"rho: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
