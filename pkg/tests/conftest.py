"""Shared dataset builders and loss pools for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

import secantboost as sb


def separable_dataset(m: int = 200, margin: float = 0.6, seed: int = 23) -> sb.Dataset:
    """Two numeric features, labels linearly separable with a hard margin.

    The margin is wide enough that stump ensembles driven by conservative
    guaranteed-decrease steps reach zero training error well inside 200
    rounds; thin margins leave near-boundary stragglers that need far more
    iterations than that.
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(4 * m, 2))
    raw = X @ np.array([1.0, 0.6])
    keep = np.abs(raw) > margin
    X, raw = X[keep][:m], raw[keep][:m]
    assert len(raw) == m, "not enough margin-respecting draws"
    return sb.dataset_from_numeric(X, np.sign(raw))


_LINES = (
    (0, 1, 2), (3, 4, 5), (6, 7, 8),  # rows
    (0, 3, 6), (1, 4, 7), (2, 5, 8),  # columns
    (0, 4, 8), (2, 4, 6),  # diagonals
)


def _board_label(cells: tuple) -> float:
    return 1.0 if any(all(cells[j] == "x" for j in line) for line in _LINES) else -1.0


def board_dataset(m: int = 460, seed: int = 23) -> sb.Dataset:
    """Nine categorical features over {x, o, b}; positive iff three x in a line.

    Boards are unique, drawn so that roughly 45% are positive.
    """
    rng = np.random.default_rng(seed)
    boards: dict = {}
    n_pos = 0
    want_pos = int(0.45 * m)
    while len(boards) < m:
        cells = tuple(rng.choice(["x", "o", "b"], size=9, p=[0.42, 0.38, 0.20]))
        if cells in boards:
            continue
        label = _board_label(cells)
        if label > 0 and n_pos >= want_pos:
            continue
        if label < 0 and (len(boards) - n_pos) >= m - want_pos:
            continue
        boards[cells] = label
        n_pos += label > 0
    cells = list(boards)
    columns = tuple(
        np.array([cells[i][f] for i in range(m)], dtype=object) for f in range(9)
    )
    labels = np.array([boards[c] for c in cells])
    return sb.dataset_from_columns(
        columns,
        labels,
        names=tuple(f"c{f}" for f in range(9)),
        types=("categorical",) * 9,
    )


@pytest.fixture(scope="session")
def separable200() -> sb.Dataset:
    return separable_dataset(200)


@pytest.fixture(scope="session")
def boards() -> sb.Dataset:
    return board_dataset()
