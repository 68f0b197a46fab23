"""scikit-learn style estimator wrapping the graph / filter / signal pipeline."""

from __future__ import annotations

import logging
import numbers
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, check_scalar

from .data import SCENARIOS, CrossDomainData
from .filters import FilterSpec, apply_filtered, fit_lowpass
from .graph import Strategy, assemble, cross_gram, load_cross_gram, save_cross_gram
from .signal import build_signal, mask_seen, top_n

logger = logging.getLogger(__name__)


class CGSPRecommender(BaseEstimator):
    """Cross-domain graph signal processing recommender.

    Fitting builds the blended similarity graph for ``strategy`` from a
    :class:`~cgsp.data.CrossDomainData` and, for low-pass filters, the
    truncated spectral basis of ``R_T``. Nothing is trained.

    ``alpha`` may be changed with ``set_params`` after fitting; every other
    parameter needs a refit.

    Parameters
    ----------
    strategy : {"io", "oa", "ua"}
        Items-only, overlapping-users-augmented or users-augmented graph.
    alpha : float in [0, 1]
        Weight of the source-bridged similarity.
    filter : {"linear", "linear_order_k", "ideal_lowpass", "mixed"}
    order, coeffs : polynomial filter order and weights (``linear_order_k``).
    lowpass_rank : int
        Number of retained spectral components of the ideal low-pass filter.
    mix_weight : float
        Weight of the low-pass term in the mixed filter.
    symmetrize : bool
        Use ``(G + G^T) / 2`` instead of ``G``.
    cross_gram_budget : int or None
        Materialize ``R_OS^T R_OT`` when its nnz bound is below this.
    batch_size, n_jobs : scoring batch size and worker threads.
    cache_dir : str or None
        Directory for the cached cross-Gram factor.
    random_state : int
        Seed for the low-pass start vector.
    """

    def __init__(
        self,
        strategy: str = "io",
        alpha: float = 0.85,
        filter: str = "linear",
        order: int = 1,
        coeffs: Sequence[float] | None = None,
        lowpass_rank: int = 64,
        mix_weight: float = 0.3,
        symmetrize: bool = False,
        cross_gram_budget: int | None = 50_000_000,
        batch_size: int = 1024,
        n_jobs: int = 1,
        cache_dir: str | None = None,
        random_state: int = 0,
    ):
        self.strategy = strategy
        self.alpha = alpha
        self.filter = filter
        self.order = order
        self.coeffs = coeffs
        self.lowpass_rank = lowpass_rank
        self.mix_weight = mix_weight
        self.symmetrize = symmetrize
        self.cross_gram_budget = cross_gram_budget
        self.batch_size = batch_size
        self.n_jobs = n_jobs
        self.cache_dir = cache_dir
        self.random_state = random_state

    def _filter_spec(self) -> FilterSpec:
        return FilterSpec(
            kind=self.filter,
            order=self.order,
            coeffs=None if self.coeffs is None else tuple(self.coeffs),
            cutoff_rank=self.lowpass_rank,
            mix_weight=self.mix_weight,
        )

    def _cross_gram(self, data: CrossDomainData):
        if self.cache_dir is None:
            return cross_gram(data, self.cross_gram_budget)
        path = Path(self.cache_dir) / f"cross_gram_{data.fingerprint()}.npz"
        if path.exists():
            return load_cross_gram(path)
        C = cross_gram(data, self.cross_gram_budget)
        if C is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            save_cross_gram(path, C)
        return C

    def fit(self, X: CrossDomainData, y=None) -> "CGSPRecommender":
        if not isinstance(X, CrossDomainData):
            raise TypeError(f"expected CrossDomainData, got {type(X).__name__}")
        check_scalar(self.alpha, "alpha", numbers.Real, min_val=0.0, max_val=1.0)
        check_scalar(self.batch_size, "batch_size", numbers.Integral, min_val=1)
        check_scalar(self.n_jobs, "n_jobs", numbers.Integral, min_val=1)
        self.strategy_ = Strategy.parse(self.strategy)
        self.filter_spec_ = self._filter_spec()
        self.data_ = X
        self.cross_gram_ = self._cross_gram(X)
        self.graph_ = assemble(self.strategy_, self.alpha, X, self.cross_gram_, self.symmetrize)
        self.lowpass_ = None
        if self.filter_spec_.needs_lowpass:
            self.lowpass_ = fit_lowpass(
                X.R_T, self.lowpass_rank, seed=self.random_state, dataset_hash=X.fingerprint()
            )
        self.n_items_ = X.n_items
        self._signals = {}
        return self

    def _graph(self):
        g = self.graph_
        return g if g.alpha == self.alpha else g.with_alpha(self.alpha)

    def signal(self, scenario: str):
        check_is_fitted(self, "graph_")
        if scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
        if scenario not in self._signals:
            self._signals[scenario] = build_signal(scenario, self.strategy_, self.data_, self.cross_gram_)
        return self._signals[scenario]

    def _batched(self, users, fn) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        chunks = [users[i:i + self.batch_size] for i in range(0, users.size, self.batch_size)]
        if not chunks:
            return np.zeros((0, self.n_items_))
        if self.n_jobs > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                parts = list(pool.map(fn, chunks))
        else:
            parts = [fn(c) for c in chunks]
        return np.vstack(parts)

    def predict_scores(self, users: Sequence[int], scenario: str = "intra") -> np.ndarray:
        """Raw item scores (users x target items).

        ``users`` are target-user rows for ``intra`` and source-user rows for
        ``inter``.
        """
        sig = self.signal(scenario)
        graph = self._graph()
        n = self.n_items_

        def run(chunk):
            out = apply_filtered(graph, self.filter_spec_, self.lowpass_, sig.rows(chunk))
            return out[:, out.shape[1] - n:]

        return self._batched(users, run)

    @property
    def blend_decomposable(self) -> bool:
        """Whether scores are affine in alpha (true for all but polynomial filters)."""
        return self.filter_spec_.kind != "linear_order_k"

    def predict_score_parts(self, users: Sequence[int], scenario: str = "intra"):
        """``(A, B, L)`` with ``scores(alpha) = (1 - alpha) A + alpha B + L``.

        ``L`` is the alpha-independent low-pass term (``None`` for the
        linear filter). Used to sweep alpha without recomputing signals.
        """
        if not self.blend_decomposable:
            raise ValueError("polynomial filters are not affine in alpha")
        sig = self.signal(scenario)
        spec, n = self.filter_spec_, self.n_items_
        graph = self.graph_

        def run(chunk):
            x = sig.rows(chunk)
            if spec.kind == "ideal_lowpass":
                out = apply_filtered(graph, spec, self.lowpass_, x)[:, -n:]
                zero = np.zeros_like(out)
                return np.hstack([zero, zero, out])
            a, b = graph.apply_parts(x)
            low = np.zeros((x.shape[0], n))
            if spec.kind == "mixed":
                lp = FilterSpec("ideal_lowpass", cutoff_rank=spec.cutoff_rank)
                low = spec.mix_weight * apply_filtered(graph, lp, self.lowpass_, x)[:, -n:]
            return np.hstack([a[:, -n:], b[:, -n:], low])

        stacked = self._batched(users, run)
        A, B, L = stacked[:, :n], stacked[:, n:2 * n], stacked[:, 2 * n:]
        return A, B, (L if spec.needs_lowpass else None)

    def recommend(
        self,
        users: Sequence[int],
        n: int = 20,
        scenario: str = "intra",
        seen: Sequence[set[int] | None] | None = None,
    ) -> list[np.ndarray]:
        scores = self.predict_scores(users, scenario)
        out = []
        for row, s in enumerate(scores):
            if seen is not None:
                s = mask_seen(s, seen[row])
            out.append(top_n(s, n))
        return out


def blend(A: np.ndarray, B: np.ndarray, L: np.ndarray | None, alpha: float) -> np.ndarray:
    """Recombine :meth:`CGSPRecommender.predict_score_parts` at ``alpha``."""
    if alpha == 0.0:
        out = A
    elif alpha == 1.0:
        out = B
    else:
        out = (1.0 - alpha) * A + alpha * B
    return out if L is None else out + L
