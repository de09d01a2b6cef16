"""Subject-disjoint dataset splits and frame sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

SPLITS = ("train", "val", "test")
# sequence counts of the real-world release this toolkit mirrors; kept for reference only
DOCUMENTED_TARGETS = {"train": 73, "val": 11, "test": 38, "removed": 3}
EXACT_LIMIT = 16


@dataclass(frozen=True)
class SequenceRecord:
    seq_id: str
    subjects: frozenset
    n_frames: int
    fps: float

    def __post_init__(self):
        object.__setattr__(self, "subjects", frozenset(self.subjects))
        if not self.subjects:
            raise ValueError(f"sequence {self.seq_id}: needs at least one subject")
        if not self.fps > 0:
            raise ValueError(f"sequence {self.seq_id}: frame rate must be positive")
        if self.n_frames < 0:
            raise ValueError(f"sequence {self.seq_id}: negative frame count")


@dataclass
class SplitSpec:
    targets: tuple[int, int, int]
    assignment: dict[str, list[str]] = field(default_factory=dict)
    removed: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def counts(self) -> tuple[int, int, int]:
        return tuple(len(self.assignment.get(s, [])) for s in SPLITS)

    def deviation(self) -> int:
        return int(sum(abs(c - t) for c, t in zip(self.counts(), self.targets)))

    def check_disjoint(self, sequences: Sequence[SequenceRecord]) -> None:
        by_id = {s.seq_id: s for s in sequences}
        owner: dict = {}
        for split in SPLITS:
            for sid in self.assignment.get(split, []):
                for subj in by_id[sid].subjects:
                    if owner.setdefault(subj, split) != split:
                        raise AssertionError(f"subject {subj!r} appears in {owner[subj]} and {split}")

    def to_dict(self) -> dict:
        return {"targets": list(self.targets), **{s: self.assignment.get(s, []) for s in SPLITS},
                "removed": self.removed, "notes": self.notes}


def subject_components(sequences: Sequence[SequenceRecord]) -> list[list[int]]:
    """Groups of sequence indices linked by shared subjects, ordered by size then first index."""
    subj_index: dict = {}
    rows, cols = [], []
    for i, s in enumerate(sequences):
        for subj in sorted(s.subjects, key=repr):
            j = subj_index.setdefault(subj, i)
            rows.append(i)
            cols.append(j)
    n = len(sequences)
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, lab = connected_components(g, directed=False)
    comps: dict[int, list[int]] = {}
    for i, c in enumerate(lab):
        comps.setdefault(int(c), []).append(i)
    return sorted(comps.values(), key=lambda c: (-len(c), c[0]))


def _exact(sizes: tuple[int, ...], targets: tuple[int, int, int]) -> list[int]:
    """Choice per component (0..2 = split, 3 = removed) minimizing (deviation, removed)."""

    @lru_cache(maxsize=None)
    def best(k: int, c0: int, c1: int, c2: int):
        if k == len(sizes):
            dev = abs(c0 - targets[0]) + abs(c1 - targets[1]) + abs(c2 - targets[2])
            return (dev, 0), ()
        out = None
        for choice in range(4):
            cnt = [c0, c1, c2]
            if choice < 3:
                cnt[choice] += sizes[k]
            (dev, rem), rest = best(k + 1, *cnt)
            key = (dev, rem + (sizes[k] if choice == 3 else 0))
            if out is None or key < out[0]:
                out = (key, (choice,) + rest)
        return out

    return list(best(0, 0, 0, 0)[1])


def _greedy(sizes: Sequence[int], targets: tuple[int, int, int]) -> list[int]:
    cnt = [0, 0, 0]
    out = []
    for s in sizes:
        room = [targets[i] - cnt[i] for i in range(3)]
        fits = [i for i in range(3) if room[i] >= s]
        if fits:
            i = min(fits, key=lambda i: (room[i] - s, i))
            cnt[i] += s
            out.append(i)
        else:
            i = int(np.argmax(room))
            # placing it anyway costs s - 2 * room; dropping it costs nothing extra
            if room[i] > 0 and 2 * room[i] > s:
                cnt[i] += s
                out.append(i)
            else:
                out.append(3)
    return out


def subject_disjoint_split(sequences: Sequence[SequenceRecord], targets: tuple[int, int, int]
                           ) -> SplitSpec:
    """Assign whole subject-connected components to train/val/test.

    The assignment minimizes total deviation from ``targets`` and, among
    equally close assignments, the number of removed sequences. Up to 16
    components the search is exhaustive; beyond that components are placed
    largest first into the split whose remaining room fits them best.
    """
    if not sequences:
        raise ValueError("no sequences to split")
    targets = tuple(int(t) for t in targets)
    if len(targets) != 3 or min(targets) < 0:
        raise ValueError("targets must be three non-negative counts")
    if sum(targets) > len(sequences):
        raise ValueError(f"targets sum to {sum(targets)} but only {len(sequences)} sequences exist")
    ids = [s.seq_id for s in sequences]
    if len(set(ids)) != len(ids):
        raise ValueError("sequence ids must be unique")
    comps = subject_components(sequences)
    sizes = tuple(len(c) for c in comps)
    choice = _exact(sizes, targets) if len(comps) <= EXACT_LIMIT else _greedy(sizes, targets)
    spec = SplitSpec(targets, {s: [] for s in SPLITS})
    for comp, ch in zip(comps, choice):
        names = [ids[i] for i in comp]
        if ch == 3:
            spec.removed.extend(names)
        else:
            spec.assignment[SPLITS[ch]].extend(names)
    for s in SPLITS:
        spec.assignment[s].sort(key=ids.index)
    spec.removed.sort(key=ids.index)
    for s, c, t in zip(SPLITS, spec.counts(), targets):
        if c != t:
            spec.notes.append(f"{s}: {c} sequences, target {t}")
    spec.check_disjoint(sequences)
    return spec


def sample_frames(seq: SequenceRecord, rate: float = 1.0) -> list[int]:
    """Every ``floor(fps / rate)``-th frame starting at 0."""
    if not rate > 0:
        raise ValueError("rate must be positive")
    if rate > seq.fps:
        raise ValueError(f"rate {rate} Hz exceeds the sequence frame rate {seq.fps} Hz")
    q = seq.fps / rate
    # 30 / 0.1 is 299.99999999999997 in floating point
    stride = int(round(q)) if abs(q - round(q)) < 1e-9 else int(np.floor(q))
    return list(range(0, seq.n_frames, stride))
