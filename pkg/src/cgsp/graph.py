"""Cross-domain similarity graphs kept as chains of sparse factors.

A graph is never multiplied out: every block is a :class:`FactorChain` and a
row signal is pushed through it one sparse factor at a time. The blend
``(1 - alpha) * S + alpha * S~`` is applied to the two outputs.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .data import CrossDomainData

logger = logging.getLogger(__name__)

# sparse intermediates above this fill ratio are densified
_DENSIFY_AT = 0.1


class Strategy(str, enum.Enum):
    IO = "io"
    OA = "oa"
    UA = "ua"

    @classmethod
    def parse(cls, value: "Strategy | str") -> "Strategy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown strategy {value!r}; expected io, oa or ua") from None


Factor = tuple[sp.spmatrix, bool]


def _as_rows(x) -> tuple[np.ndarray | sp.csr_matrix, bool]:
    if sp.issparse(x):
        return sp.csr_matrix(x), False
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim != 2:
        raise ValueError("signal must be a row vector or a 2-D batch of rows")
    return x, False


def _dense(x) -> np.ndarray:
    return x.toarray() if sp.issparse(x) else np.asarray(x)


class FactorChain:
    """Lazy product ``F_1 F_2 ... F_m`` of sparse factors.

    Each factor is ``(matrix, transposed)``. ``apply`` right-multiplies a
    batch of row vectors through the factors left to right, so every step is
    a (rows x sparse) product and no factor product is ever formed.
    """

    def __init__(self, factors: Sequence[Factor], shape: tuple[int, int] | None = None):
        self.factors = [(m, bool(t)) for m, t in factors]
        self._oriented = [sp.csr_matrix(m.T if t else m) for m, t in self.factors]
        if self._oriented:
            for a, b in zip(self._oriented, self._oriented[1:]):
                if a.shape[1] != b.shape[0]:
                    raise ValueError(f"non-conformable factors {a.shape} x {b.shape}")
            outer = (self._oriented[0].shape[0], self._oriented[-1].shape[1])
            if shape is not None and tuple(shape) != outer:
                raise ValueError(f"declared shape {shape} does not match factors {outer}")
            self.shape = outer
        else:
            if shape is None:
                raise ValueError("an empty chain needs an explicit shape")
            self.shape = (int(shape[0]), int(shape[1]))

    @classmethod
    def zero(cls, rows: int, cols: int) -> "FactorChain":
        return cls([], (rows, cols))

    @property
    def is_zero(self) -> bool:
        return not self.factors

    @property
    def row_dim(self) -> int:
        return self.shape[0]

    @property
    def col_dim(self) -> int:
        return self.shape[1]

    @property
    def T(self) -> "FactorChain":
        return FactorChain([(m, not t) for m, t in reversed(self.factors)], self.shape[::-1])

    def apply(self, x) -> np.ndarray:
        """``x @ F_1 @ ... @ F_m`` for a batch ``x`` of shape (b, row_dim)."""
        if x.shape[1] != self.shape[0]:
            raise ValueError(f"signal length {x.shape[1]} != chain rows {self.shape[0]}")
        if self.is_zero:
            return np.zeros((x.shape[0], self.shape[1]))
        for m in self._oriented:
            x = x @ m
            if sp.issparse(x) and x.nnz > _DENSIFY_AT * x.shape[0] * x.shape[1]:
                x = x.toarray()
        return _dense(x)

    def toarray(self) -> np.ndarray:
        if self.is_zero:
            return np.zeros(self.shape)
        out = self._oriented[0]
        for m in self._oriented[1:]:
            out = out @ m
        return _dense(out)

    def __repr__(self) -> str:
        return f"FactorChain(shape={self.shape}, n_factors={len(self.factors)})"


class BlockOperator:
    """Symmetric-layout block operator ``[[U, C], [C^T, I]]``.

    ``user`` is n_users x n_users, ``cross`` n_users x n_items and ``item``
    n_items x n_items. With ``n_users == 0`` this is just ``item``.
    """

    def __init__(self, user: FactorChain | None, cross: FactorChain | None, item: FactorChain):
        self.item = item
        self.n_items = item.shape[0]
        if user is None:
            self.n_users = 0
            self.user = self.cross = None
        else:
            self.n_users = user.shape[0]
            if cross is None or cross.shape != (self.n_users, self.n_items):
                raise ValueError("cross block shape does not match user/item blocks")
            self.user, self.cross = user, cross

    @property
    def dim(self) -> int:
        return self.n_users + self.n_items

    def apply(self, x) -> np.ndarray:
        if self.n_users == 0:
            return self.item.apply(x)
        nu = self.n_users
        xu, xi = x[:, :nu], x[:, nu:]
        out_u = self.user.apply(xu) + self.cross.T.apply(xi)
        out_i = self.cross.apply(xu) + self.item.apply(xi)
        return np.hstack([out_u, out_i])

    @property
    def T(self) -> "BlockOperator":
        if self.n_users == 0:
            return BlockOperator(None, None, self.item.T)
        return BlockOperator(self.user.T, self.cross, self.item.T)

    def toarray(self) -> np.ndarray:
        if self.n_users == 0:
            return self.item.toarray()
        c = self.cross.toarray()
        return np.block([[self.user.toarray(), c], [c.T, self.item.toarray()]])

    def zeros_like(self) -> "BlockOperator":
        nu, ni = self.n_users, self.n_items
        if nu == 0:
            return BlockOperator(None, None, FactorChain.zero(ni, ni))
        return BlockOperator(FactorChain.zero(nu, nu), FactorChain.zero(nu, ni), FactorChain.zero(ni, ni))


def cross_gram(data: CrossDomainData, budget: int | None = 50_000_000) -> sp.csr_matrix | None:
    """``R_OS^T R_OT`` as an explicit sparse matrix when it fits the budget.

    The bound used is the number of (source item, target item) products
    generated by the overlap users, an upper bound on nnz.
    """
    if data.n_overlap == 0 or budget == 0:
        return None
    bound = int(np.dot(np.diff(data.R_OS.indptr), np.diff(data.R_OT.indptr)))
    if budget is not None and bound > budget:
        logger.info("cross-Gram bound %d exceeds budget %d; keeping it factored", bound, budget)
        return None
    C = (data.R_OS.T @ data.R_OT).tocsr()
    C.sort_indices()
    return C


def save_cross_gram(path: str | Path, C: sp.spmatrix) -> None:
    sp.save_npz(str(path), sp.csr_matrix(C), compressed=False)


def load_cross_gram(path: str | Path) -> sp.csr_matrix:
    return sp.load_npz(str(path)).tocsr()


def _c_factors(data: CrossDomainData, C: sp.spmatrix | None) -> list[Factor]:
    if C is not None:
        return [(C, False)]
    return [(data.R_OS, True), (data.R_OT, False)]


def _ct_factors(data: CrossDomainData, C: sp.spmatrix | None) -> list[Factor]:
    return [(m, not t) for m, t in reversed(_c_factors(data, C))]


def _use_user_block(strategy: Strategy, data: CrossDomainData) -> bool:
    if strategy is Strategy.OA and data.n_overlap == 0:
        logger.warning("OA strategy with empty overlap degrades to IO")
        return False
    return strategy is not Strategy.IO


def build_target_only(strategy: Strategy | str, data: CrossDomainData) -> BlockOperator:
    """Target-domain similarity ``S`` for the given strategy."""
    strategy = Strategy.parse(strategy)
    RT = data.R_T
    s_items = FactorChain([(RT, True), (RT, False)])
    if not _use_user_block(strategy, data):
        return BlockOperator(None, None, s_items)
    if strategy is Strategy.OA:
        ROT = data.R_OT
        user = FactorChain([(ROT, False), (ROT, True)])
        cross = FactorChain([(ROT, False), (RT, True), (RT, False)])
    else:
        user = FactorChain([(RT, False), (RT, True)])
        cross = FactorChain([(RT, False)])
    return BlockOperator(user, cross, s_items)


def build_source_bridged(
    strategy: Strategy | str, data: CrossDomainData, C: sp.spmatrix | None = None
) -> BlockOperator:
    """Source-bridged similarity ``S~`` routed through the overlapping users.

    ``C`` optionally supplies a precomputed ``R_OS^T R_OT``.
    """
    strategy = Strategy.parse(strategy)
    with_users = _use_user_block(strategy, data)
    n_users = {Strategy.OA: data.n_overlap, Strategy.UA: len(data.target_users)}.get(strategy, 0)
    ni = data.n_items
    if data.n_overlap == 0:
        logger.warning("empty overlap: source-bridged similarity is the zero operator")
        if not with_users:
            return BlockOperator(None, None, FactorChain.zero(ni, ni))
        return BlockOperator(FactorChain.zero(n_users, n_users), FactorChain.zero(n_users, ni),
                             FactorChain.zero(ni, ni))

    RT, RS, ROS, ROT = data.R_T, data.R_S, data.R_OS, data.R_OT
    c, ct = _c_factors(data, C), _ct_factors(data, C)
    s_items = [(RT, True), (RT, False)]
    item = FactorChain(ct + c + s_items)
    if strategy is Strategy.IO:
        return BlockOperator(None, None, item)
    if strategy is Strategy.OA:
        user = FactorChain([(ROT, False)] + ct + c + [(ROT, True)])
        cross = FactorChain([(ROS, False), (RS, True), (RS, False)] + c + s_items)
    else:
        user = FactorChain([(RT, False)] + ct + c + [(RT, True)])
        cross = FactorChain([(RT, False)] + ct + [(RS, True), (RS, False)] + c + s_items)
    return BlockOperator(user, cross, item)


@dataclass(frozen=True, eq=False)
class CrossDomainGraph:
    strategy: Strategy
    alpha: float
    target_part: BlockOperator
    bridged_part: BlockOperator
    n_items: int
    symmetrize: bool = False

    @property
    def aug_dim(self) -> int:
        return self.target_part.dim

    @property
    def n_user_block(self) -> int:
        return self.target_part.n_users

    @property
    def block_layout(self) -> tuple[tuple[str, int], ...]:
        if self.n_user_block == 0:
            return (("items", self.n_items),)
        users = "overlap_users" if self.strategy is Strategy.OA else "target_users"
        return ((users, self.n_user_block), ("items", self.n_items))

    def with_alpha(self, alpha: float) -> "CrossDomainGraph":
        _check_alpha(alpha)
        return replace(self, alpha=float(alpha))

    def _apply_part(self, part: BlockOperator, x) -> np.ndarray:
        out = part.apply(x)
        if self.symmetrize:
            out = 0.5 * (out + part.T.apply(x))
        return out

    def apply_parts(self, x) -> tuple[np.ndarray, np.ndarray]:
        """``(x S, x S~)`` for a batch of rows."""
        x, _ = _as_rows(x)
        self._check_len(x)
        return self._apply_part(self.target_part, x), self._apply_part(self.bridged_part, x)

    def apply(self, x) -> np.ndarray:
        x, squeeze = _as_rows(x)
        self._check_len(x)
        a = self.alpha
        if a == 0.0:
            out = self._apply_part(self.target_part, x)
        elif a == 1.0:
            out = self._apply_part(self.bridged_part, x)
        else:
            out = (1.0 - a) * self._apply_part(self.target_part, x) + a * self._apply_part(self.bridged_part, x)
        return out[0] if squeeze else out

    def _check_len(self, x) -> None:
        if x.shape[1] != self.aug_dim:
            raise ValueError(f"signal length {x.shape[1]} does not match graph dimension {self.aug_dim}")


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= float(alpha) <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")


def assemble(
    strategy: Strategy | str,
    alpha: float,
    data: CrossDomainData,
    C: sp.spmatrix | None = None,
    symmetrize: bool = False,
) -> CrossDomainGraph:
    _check_alpha(alpha)
    strategy = Strategy.parse(strategy)
    return CrossDomainGraph(
        strategy,
        float(alpha),
        build_target_only(strategy, data),
        build_source_bridged(strategy, data, C),
        data.n_items,
        symmetrize,
    )


def apply(graph: CrossDomainGraph, x) -> np.ndarray:
    return graph.apply(x)


def materialize(graph: CrossDomainGraph, max_dim: int = 2000) -> np.ndarray:
    """Dense ``(1 - alpha) S + alpha S~``; refuses above ``max_dim``."""
    if graph.aug_dim > max_dim:
        raise ValueError(f"graph dimension {graph.aug_dim} exceeds max_dim={max_dim}")
    S = graph.target_part.toarray()
    St = graph.bridged_part.toarray()
    if graph.symmetrize:
        S, St = 0.5 * (S + S.T), 0.5 * (St + St.T)
    return (1.0 - graph.alpha) * S + graph.alpha * St
