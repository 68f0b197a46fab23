"""Interaction loading, overlap detection, splitting and normalization.

All matrices are ``scipy.sparse.csr_matrix``. Internal indices follow the
sorted order of the external keys so that runs are reproducible.
"""

from __future__ import annotations

import bisect
import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigError, DataError
from .utils import make_rng

logger = logging.getLogger(__name__)

SCENARIOS = ("intra", "inter")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True, eq=False)
class InteractionSet:
    """Unit-valued (user, item) pairs of one domain with their key maps.

    ``user_index``/``item_index`` are parallel arrays sorted by
    (user, item) without duplicates. Sets produced by :func:`load_interactions`
    have no zero-degree users or items; training subsets created with
    :meth:`with_pairs` keep the full key lists and may have empty rows.
    """

    domain_name: str
    users: tuple[str, ...]
    items: tuple[str, ...]
    user_index: np.ndarray
    item_index: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.user_index, dtype=np.int64)
        i = np.asarray(self.item_index, dtype=np.int64)
        if u.shape != i.shape or u.ndim != 1:
            raise ValueError("user_index and item_index must be 1-D and aligned")
        if u.size and (u.min() < 0 or u.max() >= len(self.users)):
            raise ValueError("user index out of bounds")
        if i.size and (i.min() < 0 or i.max() >= len(self.items)):
            raise ValueError("item index out of bounds")
        code = u * max(len(self.items), 1) + i
        code, first = np.unique(code, return_index=True)
        object.__setattr__(self, "user_index", u[first])
        object.__setattr__(self, "item_index", i[first])
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "items", tuple(self.items))

    @classmethod
    def from_records(cls, domain_name: str, records: Iterable[tuple[str, str]]) -> "InteractionSet":
        records = list(records)
        users = sorted({u for u, _ in records})
        items = sorted({i for _, i in records})
        upos = {k: n for n, k in enumerate(users)}
        ipos = {k: n for n, k in enumerate(items)}
        uidx = np.fromiter((upos[u] for u, _ in records), dtype=np.int64, count=len(records))
        iidx = np.fromiter((ipos[i] for _, i in records), dtype=np.int64, count=len(records))
        return cls(domain_name, tuple(users), tuple(items), uidx, iidx)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    def __len__(self) -> int:
        return int(self.user_index.size)

    def with_pairs(self, user_index: np.ndarray, item_index: np.ndarray) -> "InteractionSet":
        return InteractionSet(self.domain_name, self.users, self.items, user_index, item_index)

    def to_binary(self) -> sp.csr_matrix:
        data = np.ones(len(self), dtype=np.float64)
        m = sp.csr_matrix(
            (data, (self.user_index, self.item_index)), shape=(self.n_users, self.n_items)
        )
        m.sort_indices()
        return m

    def key_pairs(self) -> list[tuple[str, str]]:
        return [(self.users[u], self.items[i]) for u, i in zip(self.user_index, self.item_index)]

    def user_degrees(self) -> np.ndarray:
        return np.bincount(self.user_index, minlength=self.n_users)

    def item_degrees(self) -> np.ndarray:
        return np.bincount(self.item_index, minlength=self.n_items)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.domain_name.encode())
        for u, i in self.key_pairs():
            h.update(f"{u}\t{i}\n".encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class OverlapInfo:
    """Users present in both domains, in sorted key order."""

    overlap_keys: tuple[str, ...] = ()
    source_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    target_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.overlap_keys)


def prune(
    pairs: Sequence[tuple[str, str]], min_user_deg: int = 1, min_item_deg: int = 1
) -> list[tuple[str, str]]:
    """Iteratively drop users/items below the minimum degrees until stable."""
    pairs = sorted(set(pairs))
    while True:
        udeg: dict[str, int] = {}
        ideg: dict[str, int] = {}
        for u, i in pairs:
            udeg[u] = udeg.get(u, 0) + 1
            ideg[i] = ideg.get(i, 0) + 1
        kept = [(u, i) for u, i in pairs if udeg[u] >= min_user_deg and ideg[i] >= min_item_deg]
        if len(kept) == len(pairs):
            return kept
        pairs = kept


def load_interactions(
    path: str | Path,
    format: str = "tsv",
    min_user_deg: int = 1,
    min_item_deg: int = 1,
    header: bool = False,
    domain_name: str | None = None,
) -> InteractionSet:
    """Read a ``user, item[, value]`` log into a pruned :class:`InteractionSet`.

    Records whose value column is not positive are dropped (binarization at
    ``> 0``); otherwise the value is ignored.
    """
    if format not in ("tsv", "csv"):
        raise ConfigError(f"unknown format {format!r}; expected 'tsv' or 'csv'")
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc

    records: list[tuple[str, str]] = []
    with fh:
        reader = csv.reader(fh, delimiter="\t" if format == "tsv" else ",")
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2 or len(row) > 3:
                raise DataError(f"{path}:{lineno}: expected 2 or 3 columns, got {len(row)}")
            user, item = row[0].strip(), row[1].strip()
            if not user or not item:
                raise DataError(f"{path}:{lineno}: empty user or item key")
            if len(row) == 3:
                try:
                    value = float(row[2])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-numeric value {row[2]!r}") from None
                if not value > 0:
                    continue
            records.append((user, item))

    kept = prune(records, min_user_deg, min_item_deg)
    if not kept:
        raise DataError(f"{path}: no interactions left after pruning")
    return InteractionSet.from_records(domain_name or path.stem, kept)


def detect_overlap(src: InteractionSet, tgt: InteractionSet) -> OverlapInfo:
    src_pos = {k: n for n, k in enumerate(src.users)}
    tgt_pos = {k: n for n, k in enumerate(tgt.users)}
    keys = sorted(src_pos.keys() & tgt_pos.keys())
    return OverlapInfo(
        tuple(keys),
        np.array([src_pos[k] for k in keys], dtype=np.int64),
        np.array([tgt_pos[k] for k in keys], dtype=np.int64),
    )


def normalize(raw: InteractionSet | sp.spmatrix | np.ndarray, allow_empty: bool = False) -> sp.csr_matrix:
    """Symmetric degree normalization ``D_U^{-1/2} R D_I^{-1/2}``.

    Each stored entry becomes ``1 / sqrt(deg(u) * deg(i))`` with degrees
    counted in the binarized input. Empty rows/columns are rejected unless
    ``allow_empty`` is set, in which case they simply stay empty.
    """
    m = raw.to_binary() if isinstance(raw, InteractionSet) else sp.csr_matrix(raw, dtype=np.float64)
    m = m.copy()
    m.data = (m.data > 0).astype(np.float64)
    m.eliminate_zeros()
    m.sort_indices()
    du = np.diff(m.indptr).astype(np.float64)
    di = np.bincount(m.indices, minlength=m.shape[1]).astype(np.float64)
    if not allow_empty and (np.any(du == 0) or np.any(di == 0)):
        raise DataError(
            f"zero-degree rows ({int(np.sum(du == 0))}) or columns ({int(np.sum(di == 0))}) "
            "in normalization input"
        )
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    m.data = 1.0 / np.sqrt(du[rows] * di[m.indices])
    return m


@dataclass(frozen=True, eq=False)
class CrossDomainData:
    """Normalized training matrices of both domains plus their overlap slices.

    The overlap consists of users that have at least one interaction in both
    training matrices. ``R_OS``/``R_OT`` are row slices of the already
    normalized ``R_S``/``R_T`` (degrees come from the full domain).
    """

    source_users: tuple[str, ...]
    source_items: tuple[str, ...]
    target_users: tuple[str, ...]
    target_items: tuple[str, ...]
    source_binary: sp.csr_matrix
    target_binary: sp.csr_matrix
    R_S: sp.csr_matrix
    R_T: sp.csr_matrix
    R_OS: sp.csr_matrix
    R_OT: sp.csr_matrix
    overlap: OverlapInfo

    @classmethod
    def from_interactions(cls, source: InteractionSet, target: InteractionSet) -> "CrossDomainData":
        return cls.from_binary(
            source.to_binary(), target.to_binary(),
            source.users, source.items, target.users, target.items,
        )

    @classmethod
    def from_binary(
        cls,
        source_binary: sp.spmatrix,
        target_binary: sp.spmatrix,
        source_users: Sequence[str],
        source_items: Sequence[str],
        target_users: Sequence[str],
        target_items: Sequence[str],
    ) -> "CrossDomainData":
        sb = sp.csr_matrix(source_binary, dtype=np.float64)
        tb = sp.csr_matrix(target_binary, dtype=np.float64)
        sb.eliminate_zeros()
        tb.eliminate_zeros()
        if sb.shape != (len(source_users), len(source_items)):
            raise ValueError("source matrix shape does not match key lists")
        if tb.shape != (len(target_users), len(target_items)):
            raise ValueError("target matrix shape does not match key lists")
        s_active = np.diff(sb.indptr) > 0
        t_active = np.diff(tb.indptr) > 0
        s_pos = {k: n for n, k in enumerate(source_users) if s_active[n]}
        t_pos = {k: n for n, k in enumerate(target_users) if t_active[n]}
        keys = sorted(s_pos.keys() & t_pos.keys())
        overlap = OverlapInfo(
            tuple(keys),
            np.array([s_pos[k] for k in keys], dtype=np.int64),
            np.array([t_pos[k] for k in keys], dtype=np.int64),
        )
        R_S = normalize(sb, allow_empty=True)
        R_T = normalize(tb, allow_empty=True)
        return cls(
            tuple(source_users), tuple(source_items), tuple(target_users), tuple(target_items),
            sb, tb, R_S, R_T,
            R_S[overlap.source_rows].tocsr(), R_T[overlap.target_rows].tocsr(),
            overlap,
        )

    @property
    def n_overlap(self) -> int:
        return len(self.overlap)

    @property
    def n_items(self) -> int:
        return len(self.target_items)

    @property
    def overlap_ratio(self) -> float:
        """Share of (active) target-domain users that also appear in the source."""
        active = int(np.sum(np.diff(self.target_binary.indptr) > 0))
        return self.n_overlap / active if active else 0.0

    def source_row(self, key: str) -> int | None:
        return _index_of(self.source_users, key)

    def target_row(self, key: str) -> int | None:
        return _index_of(self.target_users, key)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for keys in (self.source_users, self.source_items, self.target_users, self.target_items):
            h.update("\x1f".join(keys).encode())
            h.update(b"\x1e")
        for m in (self.source_binary, self.target_binary):
            c = m.tocoo()
            order = np.lexsort((c.col, c.row))
            h.update(np.ascontiguousarray(c.row[order], dtype=np.int64).tobytes())
            h.update(np.ascontiguousarray(c.col[order], dtype=np.int64).tobytes())
        return h.hexdigest()[:16]


def _index_of(keys: Sequence[str], key: str) -> int | None:
    n = bisect.bisect_left(keys, key)
    return n if n < len(keys) and keys[n] == key else None


@dataclass(frozen=True)
class SplitSpec:
    scenario: str = "intra"
    train_ratio: float = 0.8
    validation_ratio: float = 0.2
    test_user_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if not 0.0 < self.train_ratio <= 1.0:
            raise ConfigError(f"train_ratio must be in (0, 1], got {self.train_ratio}")
        if not 0.0 <= self.validation_ratio < 1.0:
            raise ConfigError(f"validation_ratio must be in [0, 1), got {self.validation_ratio}")
        if not 0.0 < self.test_user_fraction <= 1.0:
            raise ConfigError(f"test_user_fraction must be in (0, 1], got {self.test_user_fraction}")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "train_ratio": self.train_ratio,
            "validation_ratio": self.validation_ratio,
            "test_user_fraction": self.test_user_fraction,
            "seed": int(self.seed),
        }


@dataclass(frozen=True, eq=False)
class Split:
    """Training interaction sets plus held-out (user_key, item_key) pairs.

    Held-out items are always target-domain items. For the intra scenario
    the users are target users; for inter they are cold-start users scored
    through their source-domain row.
    """

    spec: SplitSpec
    source: InteractionSet
    target: InteractionSet
    validation: tuple[tuple[str, str], ...]
    test: tuple[tuple[str, str], ...]

    def train_data(self) -> CrossDomainData:
        return CrossDomainData.from_interactions(self.source, self.target)

    def relevance(self, which: str = "test") -> dict[str, set[int]]:
        pairs = {"test": self.test, "validation": self.validation}[which]
        out: dict[str, set[int]] = {}
        for u, i in pairs:
            out.setdefault(u, set()).add(_index_of(self.target.items, i))
        return out

    def seen(self, which: str = "test") -> dict[str, set[int]]:
        """Known target items per user that must not be recommended.

        Training items always; validation items too when scoring the test set.
        """
        out: dict[str, set[int]] = {}
        for u, i in zip(self.target.user_index, self.target.item_index):
            out.setdefault(self.target.users[u], set()).add(int(i))
        if which == "test":
            for u, i in self.validation:
                out.setdefault(u, set()).add(_index_of(self.target.items, i))
        return out

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "source_domain": self.source.domain_name,
            "target_domain": self.target.domain_name,
            "source_users": list(self.source.users),
            "source_items": list(self.source.items),
            "target_users": list(self.target.users),
            "target_items": list(self.target.items),
            "train_source": [list(p) for p in self.source.key_pairs()],
            "train_target": [list(p) for p in self.target.key_pairs()],
            "validation": [list(p) for p in self.validation],
            "test": [list(p) for p in self.test],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Split":
        def build(name: str, users: list, items: list, pairs: list) -> InteractionSet:
            upos = {k: n for n, k in enumerate(users)}
            ipos = {k: n for n, k in enumerate(items)}
            u = np.array([upos[a] for a, _ in pairs], dtype=np.int64)
            i = np.array([ipos[b] for _, b in pairs], dtype=np.int64)
            return InteractionSet(name, tuple(users), tuple(items), u, i)

        try:
            return cls(
                SplitSpec(**d["spec"]),
                build(d["source_domain"], d["source_users"], d["source_items"], d["train_source"]),
                build(d["target_domain"], d["target_users"], d["target_items"], d["train_target"]),
                tuple((a, b) for a, b in d["validation"]),
                tuple((a, b) for a, b in d["test"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed split manifest: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Split":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise DataError(f"cannot read split manifest {path}: {exc}") from exc


def split(target: InteractionSet, source: InteractionSet, spec: SplitSpec) -> Split:
    """Hold out test and validation interactions for one scenario.

    intra: per target user, ``max(1, round((1 - train_ratio) * deg))`` test
    items (users with fewer than two interactions keep everything), then
    ``round(validation_ratio * remaining)`` validation items, always leaving
    one training item. The source domain is passed through whole.

    inter: ``round(test_user_fraction * |overlap|)`` overlapping users become
    test users and lose their whole target row; a ``validation_ratio`` share
    of the remaining overlapping users is held out the same way for
    validation. Source rows are kept for everyone.
    """
    rng = make_rng(spec.seed, "split")
    t_user, t_item = target.user_index, target.item_index
    starts = np.searchsorted(t_user, np.arange(target.n_users + 1))
    keep = np.ones(len(target), dtype=bool)
    validation: list[tuple[str, str]] = []
    test: list[tuple[str, str]] = []

    if spec.scenario == "intra":
        too_small = 0
        for u in range(target.n_users):
            lo, hi = starts[u], starts[u + 1]
            deg = hi - lo
            if deg < 2:
                too_small += 1
                continue
            perm = lo + rng.permutation(deg)
            n_test = 0
            if spec.train_ratio < 1.0:
                n_test = min(max(1, _round_half_up((1.0 - spec.train_ratio) * deg)), deg - 1)
            rest = deg - n_test
            n_val = min(_round_half_up(spec.validation_ratio * rest), rest - 1)
            for pos in perm[:n_test]:
                test.append((target.users[u], target.items[t_item[pos]]))
            for pos in perm[n_test:n_test + n_val]:
                validation.append((target.users[u], target.items[t_item[pos]]))
            keep[perm[:n_test + n_val]] = False
        if too_small:
            logger.warning("%d target users have fewer than 2 interactions and get no test pair", too_small)
    else:
        ov = detect_overlap(source, target)
        if not len(ov):
            raise DataError("inter scenario requires overlapping users, found none")
        n = len(ov)
        perm = rng.permutation(n)
        n_test = max(1, _round_half_up(spec.test_user_fraction * n))
        remaining = n - n_test
        n_val = _round_half_up(spec.validation_ratio * remaining)
        if n_val >= remaining and remaining > 0:
            n_val = remaining - 1
        if n_test + n_val >= n:
            logger.warning("no overlapping users left for training; the source bridge is empty")
        for bucket, chosen in ((test, perm[:n_test]), (validation, perm[n_test:n_test + n_val])):
            for p in np.sort(chosen):
                row = ov.target_rows[p]
                lo, hi = starts[row], starts[row + 1]
                bucket.extend((target.users[row], target.items[i]) for i in t_item[lo:hi])
                keep[lo:hi] = False

    if not keep.any():
        raise DataError("split leaves no target training interactions")
    return Split(
        spec,
        source,
        target.with_pairs(t_user[keep], t_item[keep]),
        tuple(sorted(validation)),
        tuple(sorted(test)),
    )


def subsample_overlap(data: CrossDomainData, keep_ratio: float, seed: int) -> CrossDomainData:
    """Remove every source interaction of a random share of overlapping users.

    ``round(keep_ratio * |overlap|)`` users are retained, taken as a prefix of
    one seeded permutation, so retained sets are nested across ratios. The
    source matrices are renormalized; the target domain is untouched.
    """
    if not 0.0 <= keep_ratio <= 1.0:
        raise ConfigError(f"keep_ratio must be in [0, 1], got {keep_ratio}")
    n = data.n_overlap
    n_keep = _round_half_up(keep_ratio * n)
    if n_keep >= n:
        return data
    perm = make_rng(seed, "subsample").permutation(n)
    removed = data.overlap.source_rows[perm[n_keep:]]
    sb = data.source_binary.tolil(copy=True)
    for r in removed:
        sb.rows[r] = []
        sb.data[r] = []
    return CrossDomainData.from_binary(
        sb.tocsr(), data.target_binary,
        data.source_users, data.source_items, data.target_users, data.target_items,
    )
