"""Dense reference pipeline and synthetic data for verifying the engine.

Everything here is recomputed from the raw binary matrices with plain dense
numpy products, written straight from the block equations. Nothing is
imported from the factored engine except plain configuration types.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import InteractionSet
from .exceptions import DataError
from .filters import FilterSpec
from .utils import make_rng

MAX_DIM = 2000
# same spectral cut definition as the engine: ties within 1e-9 * sigma_max of
# the k-th singular value are kept; values below 1e-6 * sigma_max are zero
_TIE_RTOL = 1e-9
_RANK_RTOL = 1e-6


def _dense_normalize(A: np.ndarray) -> np.ndarray:
    du = A.sum(axis=1)
    di = A.sum(axis=0)
    denom = np.sqrt(np.outer(du, di))
    out = np.zeros_like(A, dtype=np.float64)
    nz = A > 0
    out[nz] = 1.0 / denom[nz]
    return out


@dataclass(eq=False)
class DenseInstance:
    """Dense binary matrices of both domains with every intermediate kept."""

    source: np.ndarray
    target: np.ndarray
    source_rows: np.ndarray
    target_rows: np.ndarray
    mats: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        total = sum(self.source.shape) + sum(self.target.shape)
        if total > 4 * MAX_DIM or max(self.source.shape + self.target.shape) > MAX_DIM:
            raise ValueError("instance too large for the dense oracle")
        self.source = (np.asarray(self.source) > 0).astype(np.float64)
        self.target = (np.asarray(self.target) > 0).astype(np.float64)
        RS = _dense_normalize(self.source)
        RT = _dense_normalize(self.target)
        ROS = RS[self.source_rows, :]
        ROT = RT[self.target_rows, :]
        C = ROS.T @ ROT
        m = self.mats
        m.update(RS=RS, RT=RT, ROS=ROS, ROT=ROT, C=C)
        m["S_IT"] = RT.T @ RT
        m["S_UT"] = RT @ RT.T
        m["S_UO"] = ROT @ ROT.T
        m["S_UO_IT"] = ROT @ RT.T @ RT
        m["St_IT"] = (ROT.T @ ROS) @ (ROS.T @ ROT) @ (RT.T @ RT)
        m["St_UO"] = ROT @ (ROT.T @ ROS) @ (ROS.T @ ROT) @ ROT.T
        m["St_UO_IT"] = (ROS @ RS.T @ RS) @ (ROS.T @ ROT) @ (RT.T @ RT)
        m["St_UT"] = RT @ (ROT.T @ ROS) @ (ROS.T @ ROT) @ RT.T
        m["St_UT_IT"] = RT @ (ROT.T @ ROS) @ (RS.T @ RS) @ (ROS.T @ ROT) @ (RT.T @ RT)

    @classmethod
    def from_interactions(cls, source: InteractionSet, target: InteractionSet) -> "DenseInstance":
        S = np.zeros((len(source.users), len(source.items)))
        T = np.zeros((len(target.users), len(target.items)))
        for u, i in zip(source.user_index, source.item_index):
            S[u, i] = 1.0
        for u, i in zip(target.user_index, target.item_index):
            T[u, i] = 1.0
        src_active = {k for n, k in enumerate(source.users) if S[n].any()}
        tgt_active = {k for n, k in enumerate(target.users) if T[n].any()}
        keys = sorted(src_active & tgt_active)
        s_rows = np.array([source.users.index(k) for k in keys], dtype=np.int64)
        t_rows = np.array([target.users.index(k) for k in keys], dtype=np.int64)
        return cls(S, T, s_rows, t_rows)

    @property
    def n_overlap(self) -> int:
        return int(self.source_rows.size)

    @property
    def n_items(self) -> int:
        return self.target.shape[1]

    def self_check(self, tol: float = 1e-12) -> dict[str, float]:
        """Recompute each bridged block a second way; returns max-abs gaps."""
        m = self.mats
        RS, RT, ROT, C = m["RS"], m["RT"], m["ROT"], m["C"]
        left = ROT @ C.T
        left_ut = RT @ C.T
        alt = {
            "St_IT": (C.T @ C) @ (RT.T @ RT),
            "St_UO": left @ left.T,
            "St_UO_IT": m["ROS"] @ (RS.T @ (RS @ C)) @ RT.T @ RT,
            "St_UT": left_ut @ left_ut.T,
            "St_UT_IT": (left_ut @ RS.T) @ (RS @ C @ RT.T) @ RT,
            "S_IT": np.einsum("ui,uj->ij", RT, RT),
            "S_UO_IT": (ROT @ RT.T) @ RT,
        }
        gaps = {}
        for name, other in alt.items():
            ref = m[name]
            scale = max(1.0, float(np.abs(ref).max(initial=0.0)))
            gaps[name] = float(np.abs(ref - other).max(initial=0.0))
            if gaps[name] > tol * scale:
                raise AssertionError(f"oracle block {name} inconsistent: {gaps[name]:.3e}")
        return gaps

    def graph_blocks(self, strategy: str) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``(S, S~)`` over the strategy's augmented dimension."""
        m = self.mats
        strategy = str(getattr(strategy, "value", strategy)).lower()
        if strategy == "oa" and self.n_overlap == 0:
            strategy = "io"
        if strategy == "io":
            return m["S_IT"], m["St_IT"]
        if strategy == "oa":
            S = np.block([[m["S_UO"], m["S_UO_IT"]], [m["S_UO_IT"].T, m["S_IT"]]])
            St = np.block([[m["St_UO"], m["St_UO_IT"]], [m["St_UO_IT"].T, m["St_IT"]]])
            return S, St
        if strategy == "ua":
            S = np.block([[m["S_UT"], m["RT"]], [m["RT"].T, m["S_IT"]]])
            St = np.block([[m["St_UT"], m["St_UT_IT"]], [m["St_UT_IT"].T, m["St_IT"]]])
            return S, St
        raise ValueError(f"unknown strategy {strategy!r}")

    def signals(self, strategy: str, scenario: str) -> np.ndarray:
        m = self.mats
        RS, RT, ROS, ROT = m["RS"], m["RT"], m["ROS"], m["ROT"]
        strategy = str(getattr(strategy, "value", strategy)).lower()
        if strategy == "oa" and self.n_overlap == 0:
            strategy = "io"
        if scenario == "intra":
            items = RT
            users = {"oa": RT @ ROT.T, "ua": RT @ RT.T}.get(strategy)
        elif scenario == "inter":
            items = RS @ ROS.T @ ROT
            users = {"oa": RS @ ROS.T, "ua": RS @ ROS.T @ ROT @ RT.T}.get(strategy)
        else:
            raise ValueError(f"unknown scenario {scenario!r}")
        return items if users is None else np.hstack([users, items])

    def lowpass_projector(self, k: int) -> np.ndarray:
        _, s, vt = np.linalg.svd(self.mats["RT"], full_matrices=True)
        kept = 0
        if s.size and s[0] > 0:
            nonzero = int(np.sum(s > _RANK_RTOL * s[0]))
            kept = nonzero if k >= nonzero else int(np.sum(s >= s[k - 1] - _TIE_RTOL * s[0]))
        V = vt[:kept].T
        return V @ V.T


def oracle_scores(
    instance: DenseInstance,
    strategy: str,
    scenario: str,
    alpha: float,
    spec: FilterSpec | None = None,
    symmetrize: bool = False,
) -> np.ndarray:
    """Dense score matrix (users x target items).

    Rows are all target users for ``intra`` and all source users for
    ``inter``.
    """
    spec = spec or FilterSpec()
    S, St = instance.graph_blocks(strategy)
    if symmetrize:
        S, St = (S + S.T) / 2, (St + St.T) / 2
    G = (1 - alpha) * S + alpha * St
    X = instance.signals(strategy, scenario)
    n = instance.n_items

    def lowpass(X):
        Y = X.copy()
        Y[:, -n:] = X[:, -n:] @ instance.lowpass_projector(spec.cutoff_rank)
        return Y

    if spec.kind == "linear":
        Y = X @ G
    elif spec.kind == "linear_order_k":
        Y = np.zeros_like(X)
        P = np.eye(G.shape[0])
        for beta in spec.coeffs:
            Y = Y + beta * (X @ P)
            P = P @ G
    elif spec.kind == "ideal_lowpass":
        Y = lowpass(X)
    else:
        Y = X @ G + spec.mix_weight * lowpass(X)
    return Y[:, -n:]


def generate_synthetic(
    n_source_users: int = 60,
    n_target_users: int = 50,
    n_overlap: int = 30,
    n_source_items: int = 80,
    n_target_items: int = 80,
    density: float = 0.05,
    n_clusters: int = 1,
    boost: float = 1.0,
    coherence: float = 1.0,
    seed: int = 0,
) -> tuple[InteractionSet, InteractionSet]:
    """Planted-cluster implicit feedback for a source and a target domain.

    Users and items get a cluster per domain; an interaction occurs with
    probability ``density * boost`` inside a cluster and
    ``density * (1 - boost)`` across clusters. Overlapping users keep their
    source cluster in the target domain with probability ``coherence``.
    ``n_clusters=1, boost=1`` gives uniform random matrices at ``density``.
    Users and items left without interactions are dropped.
    """
    if not 0 < density <= 1:
        raise DataError("density must be in (0, 1]")
    if n_clusters < 1:
        raise DataError("n_clusters must be >= 1")
    if not 0 <= boost <= 1 or not 0 <= coherence <= 1:
        raise DataError("boost and coherence must be in [0, 1]")
    if min(n_source_users, n_target_users, n_source_items, n_target_items) < 1:
        raise DataError("all domain sizes must be positive")
    if not 0 <= n_overlap <= min(n_source_users, n_target_users):
        raise DataError("n_overlap must be between 0 and the smaller user count")

    rng = make_rng(seed, "synthetic")
    src_keys = [f"o{k:05d}" for k in range(n_overlap)] + [
        f"s{k:05d}" for k in range(n_source_users - n_overlap)
    ]
    tgt_keys = [f"o{k:05d}" for k in range(n_overlap)] + [
        f"t{k:05d}" for k in range(n_target_users - n_overlap)
    ]
    src_cluster = rng.integers(n_clusters, size=n_source_users)
    tgt_cluster = rng.integers(n_clusters, size=n_target_users)
    keep = rng.random(n_overlap) < coherence
    tgt_cluster[:n_overlap] = np.where(keep, src_cluster[:n_overlap], tgt_cluster[:n_overlap])

    def sample(user_cluster, n_items, prefix, keys):
        item_cluster = rng.integers(n_clusters, size=n_items)
        same = user_cluster[:, None] == item_cluster[None, :]
        p = np.where(same, density * boost, density * (1.0 - boost))
        u, i = np.nonzero(rng.random(p.shape) < p)
        return [(keys[a], f"{prefix}{b:05d}") for a, b in zip(u, i)]

    src = InteractionSet.from_records("source", sample(src_cluster, n_source_items, "si", src_keys))
    tgt = InteractionSet.from_records("target", sample(tgt_cluster, n_target_items, "ti", tgt_keys))
    if len(src) == 0 or len(tgt) == 0:
        raise DataError("synthetic domain came out empty; raise density or sizes")
    return src, tgt
