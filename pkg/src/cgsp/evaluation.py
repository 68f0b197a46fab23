"""Full-rank ranking evaluation, alpha selection and overlap ablation."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import clone

from .data import CrossDomainData, subsample_overlap
from .estimator import CGSPRecommender, blend
from .exceptions import DataError
from .signal import mask_seen as _mask, top_n
from .utils import stable_json

DEFAULT_N = (10, 20)
DEFAULT_ALPHA_GRID = tuple(round(0.1 * k, 10) for k in range(11))


def recall_at_n(ranked: Sequence[int], relevant: Iterable[int], n: int) -> float:
    """Share of relevant items found in the first ``n`` positions."""
    relevant = set(relevant)
    if not relevant:
        raise ValueError("relevant set is empty")
    hits = sum(1 for i in list(ranked)[:n] if i in relevant)
    return hits / len(relevant)


def ndcg_at_n(ranked: Sequence[int], relevant: Iterable[int], n: int) -> float:
    """Binary-relevance NDCG with a ``1 / log2(position + 1)`` discount."""
    relevant = set(relevant)
    if not relevant:
        raise ValueError("relevant set is empty")
    dcg = sum(1.0 / math.log2(p + 2) for p, i in enumerate(list(ranked)[:n]) if i in relevant)
    idcg = sum(1.0 / math.log2(p + 2) for p in range(min(n, len(relevant))))
    return dcg / idcg


@dataclass
class EvalReport:
    scenario: str
    strategy: str
    alpha: float
    filter: dict
    n_values: list[int]
    metrics: dict[str, float]
    n_users_evaluated: int
    n_users_skipped: int
    skipped: dict[str, int] = field(default_factory=dict)
    per_user: dict[str, dict[str, float]] | None = None
    runtime_seconds: float = 0.0
    seed: int | None = None
    dataset_hash: str | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self, include_runtime: bool = True) -> dict:
        d = {
            "scenario": self.scenario,
            "strategy": self.strategy,
            "alpha": self.alpha,
            "filter": self.filter,
            "n_values": list(self.n_values),
            "metrics": dict(self.metrics),
            "n_users_evaluated": self.n_users_evaluated,
            "n_users_skipped": self.n_users_skipped,
            "skipped": dict(self.skipped),
            "seed": self.seed,
            "dataset_hash": self.dataset_hash,
        }
        if self.per_user is not None:
            d["per_user"] = self.per_user
        if self.extra:
            d["extra"] = self.extra
        if include_runtime:
            d["runtime_seconds"] = self.runtime_seconds
        return d

    def to_json(self, include_runtime: bool = True) -> str:
        return stable_json(self.to_dict(include_runtime))

    def metric(self, name: str, n: int) -> float:
        return self.metrics[f"{name}@{n}"]


@dataclass
class _Prepared:
    keys: list[str]
    rows: np.ndarray
    relevant: list[set[int]]
    seen: list[set[int] | None]
    skipped: dict[str, int]


def _prepare(
    model: CGSPRecommender,
    relevance: Mapping[str, Iterable[int]],
    scenario: str,
    seen: Mapping[str, Iterable[int]] | None,
    mask: bool,
) -> _Prepared:
    data: CrossDomainData = model.data_
    skipped = {"empty_relevance": 0, "unknown_user": 0, "zero_source": 0, "empty_candidates": 0}
    keys, rows, rel, seen_sets = [], [], [], []
    src_deg = np.diff(data.R_S.indptr)
    for key in sorted(relevance):
        items = {int(i) for i in relevance[key] if i is not None}
        if not items:
            skipped["empty_relevance"] += 1
            continue
        row = data.target_row(key) if scenario == "intra" else data.source_row(key)
        if row is None:
            skipped["unknown_user"] += 1
            continue
        if scenario == "inter" and src_deg[row] == 0:
            skipped["zero_source"] += 1
            continue
        s = set(seen.get(key, ())) if (mask and seen is not None and scenario == "intra") else None
        if s is not None and len(s) >= data.n_items:
            skipped["empty_candidates"] += 1
            continue
        keys.append(key)
        rows.append(row)
        rel.append(items)
        seen_sets.append(s)
    return _Prepared(keys, np.asarray(rows, dtype=np.int64), rel, seen_sets,
                     {k: v for k, v in skipped.items() if v})


def _metrics_from_scores(
    scores: np.ndarray, prep: _Prepared, n_values: Sequence[int], per_user: bool
) -> tuple[dict[str, float], dict | None]:
    n_max = max(n_values)
    sums: dict[str, list[float]] = {f"{m}@{n}": [] for m in ("Recall", "NDCG") for n in n_values}
    detail = {} if per_user else None
    for k, key in enumerate(prep.keys):
        ranked = top_n(_mask(scores[k], prep.seen[k]), n_max)
        row = {}
        for n in n_values:
            row[f"Recall@{n}"] = recall_at_n(ranked, prep.relevant[k], n)
            row[f"NDCG@{n}"] = ndcg_at_n(ranked, prep.relevant[k], n)
        for name, v in row.items():
            sums[name].append(v)
        if detail is not None:
            detail[key] = row
    count = len(prep.keys)
    return {name: math.fsum(v) / count for name, v in sums.items()}, detail


def evaluate(
    model: CGSPRecommender,
    relevance: Mapping[str, Iterable[int]],
    scenario: str = "intra",
    seen: Mapping[str, Iterable[int]] | None = None,
    n_values: Sequence[int] = DEFAULT_N,
    mask_seen: bool = True,
    per_user: bool = False,
    seed: int | None = None,
) -> EvalReport:
    """Score every held-out user against the full target catalog.

    ``relevance`` maps user keys to held-out target item indices; ``seen``
    maps user keys to items excluded from ranking (intra only). Users that
    cannot be scored are skipped and counted, never zero-filled.
    """
    start = time.perf_counter()
    n_values = sorted(set(int(n) for n in n_values))
    prep = _prepare(model, relevance, scenario, seen, mask_seen)
    if not prep.keys:
        raise DataError(f"no evaluable users (skipped: {prep.skipped or 'none given'})")
    scores = model.predict_scores(prep.rows, scenario)
    metrics, detail = _metrics_from_scores(scores, prep, n_values, per_user)
    return EvalReport(
        scenario=scenario,
        strategy=model.strategy_.value,
        alpha=float(model.alpha),
        filter=model.filter_spec_.to_dict(),
        n_values=n_values,
        metrics=metrics,
        n_users_evaluated=len(prep.keys),
        n_users_skipped=sum(prep.skipped.values()),
        skipped=prep.skipped,
        per_user=detail,
        runtime_seconds=time.perf_counter() - start,
        seed=seed,
        dataset_hash=model.data_.fingerprint(),
    )


@dataclass
class AlphaSelection:
    grid: list[float]
    validation_ndcg: dict[float, float]
    chosen_alpha: float
    selection_metric: str = "NDCG@20"

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "validation_ndcg": {f"{a:g}": v for a, v in self.validation_ndcg.items()},
            "chosen_alpha": self.chosen_alpha,
            "selection_metric": self.selection_metric,
        }


def sweep_alpha(
    model: CGSPRecommender,
    grid: Sequence[float],
    relevance: Mapping[str, Iterable[int]],
    scenario: str = "intra",
    seen: Mapping[str, Iterable[int]] | None = None,
    n_values: Sequence[int] = DEFAULT_N,
    mask_seen: bool = True,
) -> dict[float, dict[str, float]]:
    """Metrics at every alpha of ``grid`` for one fitted model.

    Per-user ``x S`` and ``x S~`` are computed once and recombined per alpha
    when the filter allows it.
    """
    grid = sorted(float(a) for a in grid)
    if not grid or any(not 0.0 <= a <= 1.0 for a in grid):
        raise ValueError("alpha grid must be nonempty and inside [0, 1]")
    n_values = sorted(set(int(n) for n in n_values))
    prep = _prepare(model, relevance, scenario, seen, mask_seen)
    if not prep.keys:
        raise DataError(f"no evaluable users (skipped: {prep.skipped or 'none given'})")
    out: dict[float, dict[str, float]] = {}
    original = model.alpha
    try:
        if model.blend_decomposable:
            A, B, L = model.predict_score_parts(prep.rows, scenario)
            for a in grid:
                out[a], _ = _metrics_from_scores(blend(A, B, L, a), prep, n_values, False)
        else:
            for a in grid:
                model.set_params(alpha=a)
                out[a], _ = _metrics_from_scores(model.predict_scores(prep.rows, scenario), prep, n_values, False)
    finally:
        model.set_params(alpha=original)
    return out


def select_alpha(
    model: CGSPRecommender,
    grid: Sequence[float],
    relevance: Mapping[str, Iterable[int]],
    scenario: str = "intra",
    seen: Mapping[str, Iterable[int]] | None = None,
    mask_seen: bool = True,
) -> AlphaSelection:
    """Pick the alpha with the best validation NDCG@20 (smallest alpha on ties)."""
    if not relevance:
        raise DataError("validation set is empty")
    table = sweep_alpha(model, grid, relevance, scenario, seen, (20,), mask_seen)
    ndcg = {a: m["NDCG@20"] for a, m in table.items()}
    best = None
    for a in sorted(ndcg):
        if best is None or ndcg[a] > ndcg[best]:
            best = a
    return AlphaSelection(sorted(ndcg), ndcg, best)


def ablate_overlap(
    ratios: Sequence[float],
    seeds: Sequence[int],
    data: CrossDomainData,
    model: CGSPRecommender,
    relevance: Mapping[str, Iterable[int]],
    scenario: str = "intra",
    seen: Mapping[str, Iterable[int]] | None = None,
    n_values: Sequence[int] = DEFAULT_N,
    mask_seen: bool = True,
) -> list[EvalReport]:
    """Evaluate after dropping the source rows of part of the overlap.

    One report per ``(ratio, seed)``, ordered by ratio then seed, tagged with
    the achieved overlap in ``extra``.
    """
    reports = []
    for ratio in sorted(ratios):
        for seed in seeds:
            sub = subsample_overlap(data, ratio, seed)
            fitted = clone(model).fit(sub)
            rep = evaluate(fitted, relevance, scenario, seen, n_values, mask_seen, seed=seed)
            rep.extra.update(
                keep_ratio=float(ratio),
                subsample_seed=int(seed),
                overlap_users=sub.n_overlap,
                overlap_ratio=sub.overlap_ratio,
            )
            reports.append(rep)
    return reports
