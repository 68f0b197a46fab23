"""Personalized input signals, scoring, seen-item masking and top-N ranking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .data import SCENARIOS, CrossDomainData
from .filters import FilterSpec, LowPassState, apply_filtered
from .graph import CrossDomainGraph, Strategy, _c_factors, _use_user_block


def _chain(x: sp.csr_matrix, factors) -> sp.csr_matrix:
    for m, t in factors:
        x = x @ (m.T if t else m)
    return sp.csr_matrix(x)


@dataclass(frozen=True, eq=False)
class SignalMatrix:
    """Lazily evaluated signal rows ``X_T`` (intra) or ``X_S`` (inter).

    Rows are indexed by target users for intra and by source users for
    inter; columns follow the paired graph's ``[user block, item block]``
    layout.
    """

    scenario: str
    strategy: Strategy
    data: CrossDomainData
    C: sp.spmatrix | None
    with_users: bool

    @property
    def n_rows(self) -> int:
        return self.data.R_T.shape[0] if self.scenario == "intra" else self.data.R_S.shape[0]

    @property
    def dim(self) -> int:
        d = self.data
        if not self.with_users:
            return d.n_items
        nu = d.n_overlap if self.strategy is Strategy.OA else len(d.target_users)
        return nu + d.n_items

    def rows(self, users: Sequence[int] | np.ndarray) -> sp.csr_matrix:
        d = self.data
        idx = np.asarray(users, dtype=np.int64)
        if self.scenario == "intra":
            base = d.R_T[idx]
            item_part = base
        else:
            base = d.R_S[idx]
            item_part = _chain(base, _c_factors(d, self.C))
        if not self.with_users:
            return sp.csr_matrix(item_part)
        if self.strategy is Strategy.OA:
            user_part = base @ (d.R_OT.T if self.scenario == "intra" else d.R_OS.T)
        else:
            user_part = item_part @ d.R_T.T
        return sp.hstack([user_part, item_part], format="csr")

    def row(self, u: int) -> sp.csr_matrix:
        return self.rows([u])


def build_signal(
    scenario: str, strategy: Strategy | str, data: CrossDomainData, C: sp.spmatrix | None = None
) -> SignalMatrix:
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    strategy = Strategy.parse(strategy)
    return SignalMatrix(scenario, strategy, data, C, _use_user_block(strategy, data))


def score_user(
    x, graph: CrossDomainGraph, spec: FilterSpec | None = None, lowpass: LowPassState | None = None
) -> np.ndarray:
    """Item scores: the trailing ``n_items`` slice of the filtered response.

    Accepts one signal row or a batch; returns a matching 1-D or 2-D array.
    """
    spec = spec or FilterSpec()
    out = apply_filtered(graph, spec, lowpass, x)
    return out[..., out.shape[-1] - graph.n_items:]


def mask_seen(scores: np.ndarray, seen: Iterable[int] | None) -> np.ndarray:
    """Copy of ``scores`` with seen items set to ``-inf`` (never ranked)."""
    out = np.array(scores, dtype=np.float64)
    if seen:
        out[np.fromiter(seen, dtype=np.int64)] = -np.inf
    return out


def top_n(scores: np.ndarray, n: int) -> np.ndarray:
    """Item indices by descending score, ascending index on exact ties.

    ``-inf`` entries (masked items) are never returned, so the list can be
    shorter than ``n``.
    """
    if n < 1:
        raise ValueError("N must be >= 1")
    scores = np.asarray(scores, dtype=np.float64)
    cand = np.flatnonzero(scores > -np.inf)
    if cand.size > n:
        # keep everything tied with the n-th best so the tie rule applies exactly
        kth = np.partition(scores[cand], cand.size - n)[cand.size - n]
        cand = cand[scores[cand] >= kth]
    order = np.lexsort((cand, -scores[cand]))
    return cand[order][:n]
