"""Graph filters on top of an assembled graph, plus a smoothness diagnostic."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import ArpackNoConvergence, svds

from .exceptions import CGSPError, ConfigError
from .graph import CrossDomainGraph, _as_rows
from .utils import make_rng

logger = logging.getLogger(__name__)

FILTER_KINDS = ("linear", "linear_order_k", "ideal_lowpass", "mixed")
_ALIASES = {"linear-k": "linear_order_k", "lowpass": "ideal_lowpass"}

# singular values within TIE_RTOL * sigma_max of the cutoff are kept together;
# values below RANK_RTOL * sigma_max count as zero
TIE_RTOL = 1e-9
RANK_RTOL = 1e-6
# matrices this small (min dimension) fall back to a dense SVD when the
# requested rank is out of ARPACK's reach
DENSE_FALLBACK_DIM = 4000
# connected components up to this size always use a dense SVD
_DENSE_COMPONENT_DIM = 64


@dataclass(frozen=True)
class FilterSpec:
    """Which filter to run and its parameters.

    ``coeffs`` are the polynomial weights ``beta_0 .. beta_{K-1}`` of the
    higher-order linear filter, applied to successive graph powers.
    """

    kind: str = "linear"
    order: int = 1
    coeffs: tuple[float, ...] | None = None
    cutoff_rank: int = 64
    mix_weight: float = 0.3

    def __post_init__(self) -> None:
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in FILTER_KINDS:
            raise ConfigError(f"unknown filter kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "linear_order_k":
            if self.coeffs is None:
                raise ConfigError("linear_order_k needs coefficients beta_0..beta_{K-1}")
            coeffs = tuple(float(c) for c in self.coeffs)
            object.__setattr__(self, "coeffs", coeffs)
            if self.order in (None, 1) and len(coeffs) != 1:
                object.__setattr__(self, "order", len(coeffs))
            if len(coeffs) != self.order:
                raise ConfigError(f"order K={self.order} needs {self.order} coefficients, got {len(coeffs)}")
        if self.order < 1:
            raise ConfigError("filter order must be >= 1")
        if kind in ("ideal_lowpass", "mixed") and self.cutoff_rank < 1:
            raise ConfigError("cutoff_rank must be >= 1")
        if kind == "mixed" and self.mix_weight < 0:
            raise ConfigError("mix_weight must be >= 0")

    @property
    def needs_lowpass(self) -> bool:
        return self.kind in ("ideal_lowpass", "mixed")

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "linear_order_k":
            d.update(order=self.order, coeffs=list(self.coeffs))
        if self.needs_lowpass:
            d["cutoff_rank"] = self.cutoff_rank
        if self.kind == "mixed":
            d["mix_weight"] = self.mix_weight
        return d


@dataclass(frozen=True, eq=False)
class LowPassState:
    """Top right singular vectors of ``R_T`` (columns of ``basis``)."""

    basis: np.ndarray
    singular_values: np.ndarray
    requested_rank: int
    dataset_hash: str = ""

    @property
    def rank(self) -> int:
        return int(self.singular_values.size)

    def project(self, xi: np.ndarray) -> np.ndarray:
        return (xi @ self.basis) @ self.basis.T

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            np.savez(
                fh,
                basis=np.ascontiguousarray(self.basis),
                singular_values=self.singular_values,
                requested_rank=np.int64(self.requested_rank),
                dataset_hash=np.array(self.dataset_hash),
            )

    @classmethod
    def load(cls, path: str | Path) -> "LowPassState":
        with np.load(path, allow_pickle=False) as z:
            return cls(z["basis"], z["singular_values"], int(z["requested_rank"]), str(z["dataset_hash"]))


def _cut(s: np.ndarray, k: int) -> int:
    """Number of components kept for rank ``k``: ties at the cutoff stay together."""
    if s.size == 0 or s[0] <= 0:
        return 0
    nonzero = int(np.sum(s > RANK_RTOL * s[0]))
    if k >= nonzero:
        return nonzero
    return int(np.sum(s >= s[k - 1] - TIE_RTOL * s[0]))


def _components(A: sp.csr_matrix) -> list[tuple[np.ndarray, np.ndarray]]:
    """(rows, cols) of each connected component of the bipartite graph with an edge."""
    n_r, n_c = A.shape
    pattern = sp.csr_matrix((np.ones(A.nnz), A.indices, A.indptr), shape=A.shape)
    _, labels = connected_components(sp.bmat([[None, pattern], [pattern.T, None]]), directed=False)
    row_lab, col_lab = labels[:n_r], labels[n_r:]
    rows_by = np.split(np.argsort(row_lab, kind="stable"), np.flatnonzero(np.diff(np.sort(row_lab))) + 1)
    cols_by = np.split(np.argsort(col_lab, kind="stable"), np.flatnonzero(np.diff(np.sort(col_lab))) + 1)
    col_map = {int(col_lab[c[0]]): c for c in cols_by if c.size}
    out = []
    for r in rows_by:
        if r.size and int(row_lab[r[0]]) in col_map:
            out.append((r, col_map[int(row_lab[r[0]])]))
    return out


def _component_svd(B: sp.csr_matrix, n_req: int, rng, tol, maxiter) -> tuple[np.ndarray, np.ndarray, bool]:
    """Top singular values/right vectors of one component; flag says whether truncated."""
    m = min(B.shape)
    if n_req >= m - 1 or m <= _DENSE_COMPONENT_DIM:
        if m > DENSE_FALLBACK_DIM:
            raise ValueError(f"rank {n_req} too close to component dimension {m} for an iterative solver")
        _, s, vt = np.linalg.svd(B.toarray(), full_matrices=False)
        return s, vt.T, False
    try:
        _, s, vt = svds(B, k=n_req, tol=tol, v0=rng.standard_normal(m), maxiter=maxiter,
                        return_singular_vectors="vh")
    except ArpackNoConvergence as exc:
        raise CGSPError(
            f"truncated SVD did not converge after {maxiter or 'default'} iterations "
            f"({len(exc.eigenvalues)} of {n_req} values converged)"
        ) from exc
    order = np.argsort(-s, kind="stable")
    return s[order], vt[order].T, True


def fit_lowpass(
    R_T: sp.spmatrix,
    k: int,
    seed: int = 0,
    tol: float = 1e-8,
    maxiter: int | None = None,
    dataset_hash: str = "",
) -> LowPassState:
    """Rank-``k`` ideal low-pass basis from the top singular triplets of ``R_T``.

    The bipartite graph is split into connected components first: each one
    contributes its own top singular value (1 for a normalized matrix), so
    the leading value is repeated once per component, which a single
    Lanczos run cannot resolve. Small components use a dense SVD, larger
    ones ARPACK from a seeded start vector.

    Singular values tied with the ``k``-th one are included, so the projector
    is well defined; the achieved rank may therefore exceed ``k``. If ``R_T``
    has rank below ``k`` the achieved rank is returned with a warning.
    """
    if k < 1:
        raise ConfigError("low-pass rank must be >= 1")
    A = sp.csr_matrix(R_T, dtype=np.float64)
    A.eliminate_zeros()
    if min(A.shape) == 0:
        raise ValueError("cannot fit a low-pass basis on an empty matrix")
    comps = _components(A)

    pad = max(4, k // 4)
    while True:
        rng = make_rng(seed, "lowpass")
        values, vectors, owner, truncated = [], [], [], []
        for c, (rows, cols) in enumerate(comps):
            s, v, cut_short = _component_svd(A[rows][:, cols], k + pad, rng, tol, maxiter)
            full = np.zeros((A.shape[1], s.size))
            full[cols] = v
            values.append(s)
            vectors.append(full)
            owner.append(np.full(s.size, c))
            truncated.append(cut_short)
        if not comps:
            s, v = np.zeros(0), np.zeros((A.shape[1], 0))
            break
        s, v, who = np.concatenate(values), np.hstack(vectors), np.concatenate(owner)
        order = np.argsort(-s, kind="stable")
        s, v, who = s[order], v[:, order], who[order]
        kept = _cut(s, k)
        # a truncated component whose computed values are all kept may hide more of the tie
        if not any(truncated[c] and np.sum(who[:kept] == c) >= values[c].size for c in range(len(comps))):
            break
        pad *= 2

    kept = _cut(s, k)
    if kept < k:
        logger.warning("requested low-pass rank %d exceeds matrix rank; achieved rank %d", k, kept)
    elif kept > k:
        logger.info("low-pass rank %d extended to %d to keep tied singular values", k, kept)
    return LowPassState(np.ascontiguousarray(v[:, :kept]), s[:kept].copy(), k, dataset_hash)


def apply_filtered(
    graph: CrossDomainGraph, spec: FilterSpec, lowpass: LowPassState | None, x
) -> np.ndarray:
    """Filtered response of row signal(s) ``x`` over the full augmented dimension."""
    x, squeeze = _as_rows(x)
    if x.shape[1] != graph.aug_dim:
        raise ValueError(f"signal length {x.shape[1]} does not match graph dimension {graph.aug_dim}")
    if spec.needs_lowpass and lowpass is None:
        raise ValueError(f"filter {spec.kind!r} requires a fitted LowPassState")

    if spec.kind == "linear":
        out = graph.apply(x)
    elif spec.kind == "linear_order_k":
        out = _polynomial(graph, spec.coeffs, x)
    elif spec.kind == "ideal_lowpass":
        out = _lowpass(graph, lowpass, x)
    else:
        out = graph.apply(x) + spec.mix_weight * _lowpass(graph, lowpass, x)
    return out[0] if squeeze else out


def _polynomial(graph: CrossDomainGraph, coeffs, x) -> np.ndarray:
    y = x.toarray() if sp.issparse(x) else np.array(x, dtype=np.float64)
    out = coeffs[0] * y
    for beta in coeffs[1:]:
        y = graph.apply(y)
        out = out + beta * y
    return out


def _lowpass(graph: CrossDomainGraph, lowpass: LowPassState, x) -> np.ndarray:
    n = graph.n_items
    if lowpass.basis.shape[0] != n:
        raise ValueError(f"low-pass basis has {lowpass.basis.shape[0]} rows, graph has {n} items")
    out = x.toarray() if sp.issparse(x) else np.array(x, dtype=np.float64)
    out[:, out.shape[1] - n:] = lowpass.project(out[:, out.shape[1] - n:])
    return out


def smoothness(x, A) -> float:
    """Total variation ``sum_{i,j} A_ij (x_i - x_j)^2`` over ordered pairs.

    Cross-checked against the Laplacian quadratic form, which counts each
    unordered pair once: the sum equals ``2 x^T (D - A) x``.
    """
    A = np.asarray(A, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("adjacency must be square")
    if x.shape != (A.shape[0],):
        raise ValueError(f"signal length {x.shape} does not match adjacency {A.shape}")
    if A.shape[0] > 2000:
        raise ValueError("smoothness is a dense diagnostic limited to 2000 nodes")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12):
        raise ValueError("adjacency must be symmetric")
    diff = x[:, None] - x[None, :]
    pairwise = float(np.sum(A * diff * diff))
    quad = float(x @ (laplacian(A) @ x))
    scale = max(1.0, abs(pairwise))
    if abs(pairwise - 2.0 * quad) > 1e-9 * scale:
        raise ArithmeticError(f"pairwise form {pairwise} disagrees with 2 x^T L x = {2 * quad}")
    return pairwise


def laplacian(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    return np.diag(A.sum(axis=1)) - A
