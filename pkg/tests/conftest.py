from __future__ import annotations

from pathlib import Path

import pytest

from cgsp.data import CrossDomainData, InteractionSet
from cgsp.oracle import generate_synthetic


def write_log(path: Path, pairs, sep: str = "\t", values=None) -> Path:
    lines = []
    for n, (u, i) in enumerate(pairs):
        cols = [u, i] if values is None else [u, i, str(values[n])]
        lines.append(sep.join(cols))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def dense(m):
    return m.toarray() if hasattr(m, "toarray") else m


@pytest.fixture(scope="module")
def small_sets() -> tuple[InteractionSet, InteractionSet]:
    return generate_synthetic(seed=3)


@pytest.fixture(scope="module")
def small_data(small_sets) -> CrossDomainData:
    return CrossDomainData.from_interactions(*small_sets)


@pytest.fixture
def log_pair(tmp_path, small_sets):
    src, tgt = small_sets
    return write_log(tmp_path / "src.tsv", src.key_pairs()), write_log(tmp_path / "tgt.tsv", tgt.key_pairs())
