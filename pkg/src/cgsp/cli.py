"""Command-line front end: ingest, split, run, sweep-alpha, ablate-overlap, eval.

Options come from built-in defaults, then an optional ``--config`` JSON file,
then explicit flags (later sources win). Exit codes: 0 success, 1 bad
configuration, 2 bad or missing data, 3 any other failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .data import SCENARIOS, CrossDomainData, Split, SplitSpec, load_interactions, split as make_split
from .estimator import CGSPRecommender
from .evaluation import (
    DEFAULT_ALPHA_GRID,
    _prepare,
    ablate_overlap,
    evaluate,
    select_alpha,
    sweep_alpha,
)
from .exceptions import ConfigError, DataError
from .filters import FilterSpec
from .signal import mask_seen, top_n
from .utils import short_hash, stable_json


_FILTER_NAMES = {
    "linear": "linear",
    "linear-k": "linear_order_k",
    "linear_order_k": "linear_order_k",
    "lowpass": "ideal_lowpass",
    "ideal_lowpass": "ideal_lowpass",
    "mixed": "mixed",
}
# options that change where or how fast things run, not what is computed
_NOT_HASHED = ("out", "threads", "cache")


# ---------------------------------------------------------------- converters

def _choice(options: Sequence[str]) -> Callable[[Any], str]:
    def conv(v: Any) -> str:
        v = str(v).lower()
        if v not in options:
            raise ConfigError(f"expected one of {', '.join(options)}, got {v!r}")
        return v
    return conv


def _float(v: Any) -> float:
    if isinstance(v, bool):
        raise ConfigError(f"expected a number, got {v!r}")
    try:
        out = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {v!r}") from None
    if not math.isfinite(out):
        raise ConfigError(f"expected a finite number, got {v!r}")
    return out


def _int(v: Any) -> int:
    if isinstance(v, bool):
        raise ConfigError(f"expected an integer, got {v!r}")
    if isinstance(v, float) and v.is_integer():
        return int(v)
    try:
        return int(str(v))
    except ValueError:
        raise ConfigError(f"expected an integer, got {v!r}") from None


def _bool(v: Any) -> bool:
    if isinstance(v, bool):
        return v
    raise ConfigError(f"expected true or false, got {v!r}")


def _optional(conv: Callable[[Any], Any]) -> Callable[[Any], Any]:
    return lambda v: None if v is None else conv(v)


def _list(conv: Callable[[Any], Any]) -> Callable[[Any], tuple]:
    def parse(v: Any) -> tuple:
        if isinstance(v, str):
            v = [p for p in v.replace(" ", "").split(",") if p]
        if not isinstance(v, (list, tuple)):
            raise ConfigError(f"expected a list, got {v!r}")
        return tuple(conv(x) for x in v)
    return parse


def parse_grid(v: Any) -> tuple[float, ...]:
    """``"LO:HI:STEP"`` or an explicit list; values rounded to 10 decimals."""
    if isinstance(v, str) and ":" in v:
        parts = v.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid must look like LO:HI:STEP, got {v!r}")
        lo, hi, step = (_float(p) for p in parts)
        if step <= 0 or hi < lo:
            raise ConfigError(f"grid {v!r} needs STEP > 0 and HI >= LO")
        n = int(math.floor((hi - lo) / step + 1e-9))
        values = [round(lo + k * step, 10) for k in range(n + 1)]
    else:
        values = list(_list(_float)(v))
    if not values:
        raise ConfigError("grid is empty")
    if any(not 0.0 <= a <= 1.0 for a in values):
        raise ConfigError(f"grid values must lie in [0, 1], got {values}")
    return tuple(sorted(set(values)))


_CONVERT: dict[str, Callable[[Any], Any]] = {
    "source": _optional(str),
    "target": _optional(str),
    "split": _optional(str),
    "format": _choice(("tsv", "csv")),
    "header": _bool,
    "min_user_deg": _int,
    "min_item_deg": _int,
    "scenario": _choice(SCENARIOS),
    "strategy": _choice(("io", "oa", "ua")),
    "alpha": _float,
    "alpha_select": _optional(parse_grid),
    "filter": lambda v: _FILTER_NAMES[_choice(tuple(_FILTER_NAMES))(v)],
    "lowpass_rank": _int,
    "mix_weight": _float,
    "order": _int,
    "coeffs": _optional(_list(_float)),
    "topn": _int,
    "n_values": _list(_int),
    "seed": _int,
    "train_ratio": _float,
    "validation_ratio": _float,
    "test_user_fraction": _float,
    "ratios": parse_grid,
    "seeds": _list(_int),
    "mask_seen": _bool,
    "threads": _optional(_int),
    "cache": _optional(str),
    "out": str,
}


# -------------------------------------------------------------------- config

@dataclass(frozen=True)
class RunConfig:
    source: str | None = None
    target: str | None = None
    split: str | None = None
    format: str = "tsv"
    header: bool = False
    min_user_deg: int = 1
    min_item_deg: int = 1
    scenario: str = "intra"
    strategy: str = "io"
    alpha: float = 0.85
    alpha_select: tuple[float, ...] | None = None
    filter: str = "linear"
    lowpass_rank: int = 64
    mix_weight: float = 0.3
    order: int = 1
    coeffs: tuple[float, ...] | None = None
    topn: int = 20
    n_values: tuple[int, ...] = (10, 20)
    seed: int = 0
    train_ratio: float = 0.8
    validation_ratio: float = 0.2
    test_user_fraction: float = 0.5
    ratios: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8, 1.0)
    seeds: tuple[int, ...] = (0,)
    mask_seen: bool = True
    threads: int | None = None
    cache: str | None = None
    out: str = "cgsp_out"

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"--alpha must be in [0, 1], got {self.alpha}")
        if self.topn < 1:
            raise ConfigError("--topn must be >= 1")
        if not self.n_values or min(self.n_values) < 1:
            raise ConfigError("N values must be positive integers")
        if min(self.min_user_deg, self.min_item_deg) < 1:
            raise ConfigError("minimum degrees must be >= 1")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if not self.seeds:
            raise ConfigError("--seeds is empty")
        self.filter_spec()
        self.split_spec()

    @property
    def n_threads(self) -> int:
        return self.threads or os.cpu_count() or 1

    def filter_spec(self) -> FilterSpec:
        return FilterSpec(
            kind=self.filter,
            order=self.order,
            coeffs=self.coeffs,
            cutoff_rank=self.lowpass_rank,
            mix_weight=self.mix_weight,
        )

    def split_spec(self) -> SplitSpec:
        return SplitSpec(
            scenario=self.scenario,
            train_ratio=self.train_ratio,
            validation_ratio=self.validation_ratio,
            test_user_fraction=self.test_user_fraction,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    def effective(self) -> dict:
        """Options that determine results (paths to outputs and caches excluded)."""
        d = self.to_dict()
        for k in _NOT_HASHED:
            d.pop(k)
        return d

    def config_hash(self) -> str:
        return short_hash(self.effective())


def resolve_config(flags: dict[str, Any]) -> RunConfig:
    """Merge defaults, the ``--config`` file and explicit flags."""
    merged: dict[str, Any] = {}
    path = flags.pop("config", None)
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        raw = {k.replace("-", "_"): v for k, v in raw.items()}
        if "alpha" in raw and raw.get("alpha_select") is not None:
            raise ConfigError("config file sets both alpha and alpha_select")
        merged.update(raw)
    if "alpha" in flags:
        merged.pop("alpha_select", None)
    merged.update(flags)

    unknown = sorted(set(merged) - set(_CONVERT))
    if unknown:
        raise ConfigError(f"unknown option(s): {', '.join(unknown)}")
    values = {}
    for key, value in merged.items():
        try:
            values[key] = _CONVERT[key](value)
        except ConfigError as exc:
            raise ConfigError(f"{key.replace('_', '-')}: {exc}") from None
    return RunConfig(**values)


# ------------------------------------------------------------------- helpers

@dataclass
class _Loaded:
    split: Split
    dataset_hash: str


def _provenance(cfg: RunConfig, dataset_hash: str, command: str) -> dict:
    return {
        "tool": "cgsp",
        "version": __version__,
        "command": command,
        "config_hash": cfg.config_hash(),
        "dataset_hash": dataset_hash,
        "seed": cfg.seed,
    }


def _load_pair(cfg: RunConfig):
    if not cfg.source or not cfg.target:
        raise ConfigError("--source and --target are required")
    kw = dict(format=cfg.format, min_user_deg=cfg.min_user_deg, min_item_deg=cfg.min_item_deg, header=cfg.header)
    src = load_interactions(cfg.source, domain_name="source", **kw)
    tgt = load_interactions(cfg.target, domain_name="target", **kw)
    return src, tgt, short_hash([src.fingerprint(), tgt.fingerprint()])


def _load_split(cfg: RunConfig) -> _Loaded:
    if cfg.split is None:
        src, tgt, dhash = _load_pair(cfg)
        return _Loaded(make_split(tgt, src, cfg.split_spec()), dhash)
    try:
        raw = json.loads(Path(cfg.split).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read split manifest {cfg.split}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"split manifest {cfg.split} is not valid JSON: {exc}") from None
    sp = Split.from_dict(raw)
    if sp.spec.scenario != cfg.scenario:
        raise ConfigError(f"split manifest is for scenario {sp.spec.scenario!r}, config asks for {cfg.scenario!r}")
    dhash = raw.get("provenance", {}).get("dataset_hash") or short_hash(sp.to_dict())
    return _Loaded(sp, dhash)


def _model(cfg: RunConfig, alpha: float | None = None) -> CGSPRecommender:
    return CGSPRecommender(
        strategy=cfg.strategy,
        alpha=cfg.alpha if alpha is None else alpha,
        filter=cfg.filter,
        order=cfg.order,
        coeffs=cfg.coeffs,
        lowpass_rank=cfg.lowpass_rank,
        mix_weight=cfg.mix_weight,
        n_jobs=cfg.n_threads,
        cache_dir=cfg.cache,
        random_state=cfg.seed,
    )


def _fit_and_evaluate(cfg: RunConfig, loaded: _Loaded):
    sp = loaded.split
    model = _model(cfg).fit(sp.train_data())
    selection = None
    if cfg.alpha_select is not None:
        selection = select_alpha(
            model, cfg.alpha_select, sp.relevance("validation"), cfg.scenario,
            sp.seen("validation"), cfg.mask_seen,
        )
        model.set_params(alpha=selection.chosen_alpha)
    report = evaluate(
        model, sp.relevance("test"), cfg.scenario, sp.seen("test"),
        cfg.n_values, cfg.mask_seen, seed=cfg.seed,
    )
    return model, selection, report


def _recommendations(cfg: RunConfig, model: CGSPRecommender, sp: Split) -> list[dict]:
    prep = _prepare(model, sp.relevance("test"), cfg.scenario, sp.seen("test"), cfg.mask_seen)
    scores = model.predict_scores(prep.rows, cfg.scenario)
    items = model.data_.target_items
    out = []
    for k, key in enumerate(prep.keys):
        row = mask_seen(scores[k], prep.seen[k])
        ranked = top_n(row, cfg.topn)
        out.append({
            "user_key": key,
            "items": [items[i] for i in ranked],
            "scores": [float(row[i]) for i in ranked],
        })
    return out


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]], provenance: dict) -> str:
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={provenance[k]}" for k in sorted(provenance)) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(obj: Any) -> str:
    return json.dumps(json.loads(stable_json(obj)), sort_keys=True, indent=2) + "\n"


def _write_outputs(out: str, files: dict[str, str]) -> None:
    """Write every artifact only once all of them have been computed."""
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        tmp = root / f".{name}.tmp"
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, root / name)


def _metric_names(n_values: Sequence[int]) -> list[str]:
    return [f"{m}@{n}" for m in ("Recall", "NDCG") for n in sorted(n_values)]


def _timing(prov: dict, started: float, **extra: float) -> str:
    return _json_text({"provenance": prov, "runtime_seconds": time.perf_counter() - started, **extra})


# ------------------------------------------------------------------ commands

def cmd_ingest(cfg: RunConfig) -> int:
    src, tgt, dhash = _load_pair(cfg)
    data = CrossDomainData.from_interactions(src, tgt)
    prov = _provenance(cfg, dhash, "ingest")
    stats = {
        "provenance": prov,
        "source": {"users": src.n_users, "items": src.n_items, "interactions": len(src)},
        "target": {"users": tgt.n_users, "items": tgt.n_items, "interactions": len(tgt)},
        "overlap_users": data.n_overlap,
        "overlap_ratio": data.overlap_ratio,
    }
    _write_outputs(cfg.out, {"ingest.json": _json_text(stats)})
    print(f"source {src.n_users} users / {src.n_items} items / {len(src)} interactions")
    print(f"target {tgt.n_users} users / {tgt.n_items} items / {len(tgt)} interactions")
    print(f"overlap {data.n_overlap} users (ratio {data.overlap_ratio:.3f})")
    return 0


def cmd_split(cfg: RunConfig) -> int:
    loaded = _load_split(cfg)
    manifest = loaded.split.to_dict()
    manifest["provenance"] = _provenance(cfg, loaded.dataset_hash, "split")
    _write_outputs(cfg.out, {"split.json": _json_text(manifest)})
    sp = loaded.split
    print(f"{cfg.scenario} split: {len(sp.target)} train / {len(sp.validation)} validation / {len(sp.test)} test pairs")
    return 0


def _run(cfg: RunConfig, command: str, with_recs: bool) -> int:
    started = time.perf_counter()
    loaded = _load_split(cfg)
    model, selection, report = _fit_and_evaluate(cfg, loaded)
    prov = _provenance(cfg, loaded.dataset_hash, command)

    doc = {"provenance": prov, "config": cfg.effective(), "report": report.to_dict(include_runtime=False)}
    if selection is not None:
        doc["alpha_selection"] = selection.to_dict()
    files = {"report.json": _json_text(doc)}

    lines = [
        f"cgsp {__version__} {command}",
        f"scenario={report.scenario} strategy={report.strategy} filter={report.filter['kind']} alpha={report.alpha:g}",
    ]
    if selection is not None:
        lines.append(f"alpha selected on validation {selection.selection_metric}: {selection.chosen_alpha:g}")
    lines.append(f"users evaluated {report.n_users_evaluated}, skipped {report.n_users_skipped}")
    lines += [f"{name:<10} {report.metrics[name]:.4f}" for name in _metric_names(report.n_values)]
    lines.append(f"config_hash={prov['config_hash']} dataset_hash={prov['dataset_hash']} seed={prov['seed']}")

    if with_recs:
        manifest = loaded.split.to_dict()
        manifest["provenance"] = prov
        files["split.json"] = _json_text(manifest)
        recs = _recommendations(cfg, model, loaded.split)
        header = json.dumps({"provenance": prov}, sort_keys=True)
        files["recommendations.jsonl"] = "\n".join(
            [header] + [json.dumps(r, sort_keys=True) for r in recs]
        ) + "\n"
    files["summary.txt"] = "\n".join(lines) + "\n"
    files["timing.json"] = _timing(prov, started, evaluate_seconds=report.runtime_seconds)
    _write_outputs(cfg.out, files)
    print(files["summary.txt"], end="")
    return 0


def cmd_run(cfg: RunConfig) -> int:
    return _run(cfg, "run", with_recs=True)


def cmd_eval(cfg: RunConfig) -> int:
    if cfg.split is None:
        raise ConfigError("eval needs --split (a manifest written by the split command)")
    return _run(cfg, "eval", with_recs=False)


def cmd_sweep_alpha(cfg: RunConfig) -> int:
    started = time.perf_counter()
    grid = cfg.alpha_select or DEFAULT_ALPHA_GRID
    loaded = _load_split(cfg)
    model = _model(cfg).fit(loaded.split.train_data())
    sp = loaded.split
    table = sweep_alpha(model, grid, sp.relevance("test"), cfg.scenario, sp.seen("test"), cfg.n_values, cfg.mask_seen)
    prov = _provenance(cfg, loaded.dataset_hash, "sweep-alpha")
    names = _metric_names(cfg.n_values)
    rows = [[a] + [table[a][n] for n in names] for a in sorted(table)]
    doc = {
        "provenance": prov,
        "config": cfg.effective(),
        "rows": [dict(zip(["alpha"] + names, r)) for r in rows],
    }
    _write_outputs(cfg.out, {
        "sweep.csv": _csv_text(["alpha"] + names, rows, prov),
        "sweep.json": _json_text(doc),
        "timing.json": _timing(prov, started),
    })
    best = max(sorted(table), key=lambda a: table[a][names[-1]])
    print(f"{len(rows)} alpha values; best {names[-1]} {table[best][names[-1]]:.4f} at alpha={best:g}")
    return 0


def cmd_ablate_overlap(cfg: RunConfig) -> int:
    if cfg.alpha_select is not None:
        raise ConfigError("ablate-overlap runs at a fixed --alpha; --alpha-select is not supported here")
    started = time.perf_counter()
    loaded = _load_split(cfg)
    sp = loaded.split
    reports = ablate_overlap(
        cfg.ratios, cfg.seeds, sp.train_data(), _model(cfg), sp.relevance("test"),
        cfg.scenario, sp.seen("test"), cfg.n_values, cfg.mask_seen,
    )
    prov = _provenance(cfg, loaded.dataset_hash, "ablate-overlap")
    names = _metric_names(cfg.n_values)
    header = ["ratio", "seed", "overlap_users", "overlap_ratio"] + names
    rows: list[list[Any]] = []
    ratio_means: dict[str, list[float]] = {n: [] for n in names}
    for ratio in sorted(set(cfg.ratios)):
        group = [r for r in reports if r.extra["keep_ratio"] == ratio]
        for r in group:
            rows.append([ratio, r.extra["subsample_seed"], r.extra["overlap_users"], r.extra["overlap_ratio"]]
                        + [r.metrics[n] for n in names])
        mean = [math.fsum(r.metrics[n] for r in group) / len(group) for n in names]
        for n, v in zip(names, mean):
            ratio_means[n].append(v)
        rows.append([
            ratio, "mean",
            math.fsum(r.extra["overlap_users"] for r in group) / len(group),
            math.fsum(r.extra["overlap_ratio"] for r in group) / len(group),
        ] + mean)
    doc = {
        "provenance": prov,
        "config": cfg.effective(),
        "rows": [dict(zip(header, r)) for r in rows],
        "variance_across_ratios": {n: float(np.var(v)) for n, v in ratio_means.items()},
    }
    _write_outputs(cfg.out, {
        "ablation.csv": _csv_text(header, rows, prov),
        "ablation.json": _json_text(doc),
        "timing.json": _timing(prov, started),
    })
    print(f"{len(reports)} runs over {len(set(cfg.ratios))} ratios x {len(cfg.seeds)} seeds")
    return 0


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "ingest": cmd_ingest,
    "split": cmd_split,
    "run": cmd_run,
    "sweep-alpha": cmd_sweep_alpha,
    "ablate-overlap": cmd_ablate_overlap,
    "eval": cmd_eval,
}


# -------------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with option values; flags override it")
    p.add_argument("--source", help="source-domain interaction log")
    p.add_argument("--target", help="target-domain interaction log")
    p.add_argument("--format", help="tsv or csv (default tsv)")
    p.add_argument("--header", action="store_true", help="skip the first line of each log")
    p.add_argument("--min-user-deg", help="iterative pruning threshold for users")
    p.add_argument("--min-item-deg", help="iterative pruning threshold for items")
    p.add_argument("--scenario", help="intra or inter (default intra)")
    p.add_argument("--train-ratio")
    p.add_argument("--validation-ratio")
    p.add_argument("--test-user-fraction", help="share of overlapping users held out (inter)")
    p.add_argument("--seed", help="top-level seed for every random stream")
    p.add_argument("--out", help="output directory (default cgsp_out)")


def _model_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--split", help="reuse a split manifest instead of re-splitting --source/--target")
    p.add_argument("--strategy", help="io, oa or ua (default io)")
    alpha = p.add_mutually_exclusive_group()
    alpha.add_argument("--alpha", help="fixed blend weight in [0, 1] (default 0.85)")
    alpha.add_argument("--alpha-select", metavar="LO:HI:STEP", help="choose alpha on validation NDCG@20")
    p.add_argument("--filter", help="linear, linear-k, lowpass or mixed")
    p.add_argument("--lowpass-rank")
    p.add_argument("--mix-weight")
    p.add_argument("--order", help="polynomial order K (linear-k)")
    p.add_argument("--coeffs", help="comma-separated polynomial weights (linear-k)")
    p.add_argument("--topn", help="length of written recommendation lists (default 20)")
    p.add_argument("--n-values", help="comma-separated cutoffs N (default 10,20)")
    p.add_argument("--mask-seen", action=argparse.BooleanOptionalAction,
                   help="exclude known target items from intra rankings (default on)")
    p.add_argument("--threads", help="worker threads for scoring (default: all cores)")
    p.add_argument("--cache", help="directory for cached cross-Gram factors")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cgsp", description="Training-free cross-domain recommendation by graph filtering.")
    parser.add_argument("--version", action="version", version=f"cgsp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "ingest": "load and prune both logs, report sizes and overlap",
        "split": "write a train/validation/test split manifest",
        "run": "fit, evaluate and write recommendations",
        "sweep-alpha": "test metrics over an alpha grid",
        "ablate-overlap": "test metrics while removing overlapping users",
        "eval": "evaluate on an existing split manifest",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, argument_default=argparse.SUPPRESS)
        _common(p)
        if name not in ("ingest", "split"):
            _model_opts(p)
        if name == "ablate-overlap":
            p.add_argument("--ratios", help="keep ratios, comma list or LO:HI:STEP (default 0.2..1.0)")
            p.add_argument("--seeds", help="comma-separated subsampling seeds (default 0)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        ns = vars(build_parser().parse_args(argv))
        command = ns.pop("command")
        logging.basicConfig(
            level=logging.INFO if ns.pop("verbose", False) else logging.WARNING,
            format="%(levelname)s: %(message)s",
            stream=sys.stderr,
        )
        cfg = resolve_config(ns)
        return COMMANDS[command](cfg)
    except ConfigError as exc:
        code, kind, err = 1, "config error", exc
    except DataError as exc:
        code, kind, err = 2, "data error", exc
    except Exception as exc:  # noqa: BLE001 - anything else is a runtime failure
        code, kind, err = 3, "error", exc
    msg = " ".join(str(err).split()) or type(err).__name__
    print(f"cgsp: {kind}: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
