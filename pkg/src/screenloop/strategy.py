"""Balance strategies for the labeled training multiset and query
strategies for picking the next record to present.

Everything here is a pure function of its inputs plus an explicit rng
handle; callers own rng sequencing.  Ties always break toward the lower
row_id so golden tests stay stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MissingClass, PoolExhausted
from .rng import Rng

BALANCE_KINDS = ("simple", "undersample", "dynamic_resample")
QUERY_KINDS = ("max", "uncertainty", "random", "mixed")


@dataclass(frozen=True)
class BalanceSpec:
    kind: str = "dynamic_resample"
    undersample_ratio: float = 1.0
    dr_floor: float = 0.1

    def validate(self) -> None:
        if self.kind not in BALANCE_KINDS:
            raise ValueError(f"unknown balance kind {self.kind!r}")
        if self.undersample_ratio <= 0:
            raise ValueError("undersample_ratio must be positive")
        if not 0 < self.dr_floor <= 0.5:
            raise ValueError("dr_floor must be in (0, 0.5]")


@dataclass(frozen=True)
class QuerySpec:
    kind: str = "max"
    mixed_random_fraction: float = 0.05
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in QUERY_KINDS:
            raise ValueError(f"unknown query kind {self.kind!r}")
        if not 0 <= self.mixed_random_fraction <= 1:
            raise ValueError("mixed_random_fraction must be in [0, 1]")


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def balance(labeled_row_ids, labels, n_total: int, spec: BalanceSpec, rng: Rng) -> list[int]:
    """Resample the labeled rows into the training multiset.

    simple keeps everything; undersample keeps all relevant rows and
    samples min(n0, round(n1/ratio)) irrelevant ones; dynamic_resample
    duplicates relevant rows and subsamples irrelevant ones so the output
    size stays exactly n while the relevant share follows a target that
    starts near one half and decays to the natural ratio as labeling
    covers the pool:

        s = clamp(0.5 * (1 - n/n_total) + (n1/n) * (n/n_total),
                  max(dr_floor, n1/n), 0.5)

    Target counts round half up; m1 is clamped to >= n1 so every relevant
    row appears at least once, and irrelevant rows are never duplicated.
    """
    spec.validate()
    ids = list(labeled_row_ids)
    lab = list(labels)
    if len(ids) != len(lab):
        raise ValueError("row and label counts differ")
    relevant = sorted(i for i, y in zip(ids, lab) if y == 1)
    irrelevant = sorted(i for i, y in zip(ids, lab) if y == 0)
    n1, n0 = len(relevant), len(irrelevant)
    if n1 == 0 or n0 == 0:
        raise MissingClass("need at least one labeled row of each class")
    n = n1 + n0

    if spec.kind == "simple":
        return ids

    if spec.kind == "undersample":
        keep = min(n0, _round_half_up(n1 / spec.undersample_ratio))
        return relevant + rng.sample(irrelevant, keep)

    share = 0.5 * (1.0 - n / n_total) + (n1 / n) * (n / n_total)
    share = min(max(share, max(spec.dr_floor, n1 / n)), 0.5)
    m1 = max(_round_half_up(share * n), n1)
    m0 = n - m1
    out = [relevant[i % n1] for i in range(m1)]
    out += rng.sample(irrelevant, m0)
    return out


def _unlabeled_ids(labeled_mask) -> np.ndarray:
    mask = np.asarray(labeled_mask, dtype=bool)
    ids = np.flatnonzero(~mask)
    if ids.size == 0:
        raise PoolExhausted("no unlabeled records left")
    return ids


def select_next_with_source(scores, labeled_mask, spec: QuerySpec, rng: Rng) -> tuple[int, str]:
    """Pick the next unlabeled row and report how ("model" or "random").

    max takes the highest score, uncertainty the score closest to 0.5,
    random a uniform unlabeled row, and mixed flips one Bernoulli coin
    with p = mixed_random_fraction to choose between random and max.
    """
    spec.validate()
    scores = np.asarray(scores, dtype=np.float64)
    ids = _unlabeled_ids(labeled_mask)

    kind = spec.kind
    if kind == "mixed":
        kind = "random" if rng.rand() < spec.mixed_random_fraction else "max"

    if kind == "random":
        return int(ids[rng.randint(ids.size)]), "random"
    if kind == "max":
        key = -scores[ids]
    else:  # uncertainty
        key = np.abs(scores[ids] - 0.5)
    best = ids[key == key.min()]
    return int(best.min()), "model"


def select_next(scores, labeled_mask, spec: QuerySpec, rng: Rng) -> int:
    return select_next_with_source(scores, labeled_mask, spec, rng)[0]


def rank_pool(scores, labeled_mask) -> list[int]:
    """All unlabeled rows ordered by descending score, ties ascending row_id."""
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.asarray(labeled_mask, dtype=bool)
    ids = np.flatnonzero(~mask)
    if ids.size == 0:
        return []
    order = np.lexsort((ids, -scores[ids]))
    return [int(i) for i in ids[order]]
