"""Complex-plane mode clustering, MPF superposition, and WT grouping.

Modes are clustered on raw (Re, Im) coordinates.  Each cluster's member
participation factors are superimposed per WT-representative state, giving a
per-WT feature vector whose dominant entry assigns the WT to a group; groups
whose centroid features nearly coincide are merged, which is what turns
"clusters of modes" into "groups of machines".
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .modal import ConcernSet


@dataclass(frozen=True)
class ModeClusters:
    """Partition of the concern set; members hold global mode indices."""

    members: tuple[tuple[int, ...], ...]
    centres: np.ndarray          # complex, one per cluster
    inertia: float

    @property
    def n_clusters(self) -> int:
        return len(self.members)

    def centre_of(self, mode_index: int) -> complex:
        for c, group in enumerate(self.members):
            if mode_index in group:
                return complex(self.centres[c])
        raise KeyError(f"mode {mode_index} not in any cluster")


def _kmeans_plus_plus(pts: np.ndarray, c: int,
                      rng: np.random.Generator) -> np.ndarray:
    centres = np.empty((c, 2))
    centres[0] = pts[rng.integers(len(pts))]
    for k in range(1, c):
        d2 = np.min(((pts[:, None, :] - centres[None, :k, :]) ** 2
                     ).sum(axis=2), axis=1)
        total = d2.sum()
        if total == 0:
            centres[k] = pts[rng.integers(len(pts))]
        else:
            centres[k] = pts[rng.choice(len(pts), p=d2 / total)]
    return centres


def _lloyd(pts: np.ndarray, centres: np.ndarray,
           trace: list[float] | None = None,
           max_iter: int = 200) -> tuple[np.ndarray, np.ndarray, float]:
    c = len(centres)
    labels = np.full(len(pts), -1)
    for _ in range(max_iter):
        d2 = ((pts[:, None, :] - centres[None]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        for k in range(c):
            if not np.any(new_labels == k):
                # revive an empty cluster at the worst-assigned point, never
                # emptying another cluster in the process
                counts = np.bincount(new_labels, minlength=c)
                movable = counts[new_labels] > 1
                if not movable.any():
                    continue
                dist = np.where(movable,
                                d2[np.arange(len(pts)), new_labels], -np.inf)
                new_labels[int(np.argmax(dist))] = k
        if trace is not None:
            trace.append(float(((pts - centres[new_labels]) ** 2).sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centres = np.array([pts[labels == k].mean(axis=0) if np.any(labels == k)
                            else centres[k] for k in range(c)])
    inertia = float(((pts - centres[labels]) ** 2).sum())
    return centres, labels, inertia


def _kmeans_restart(pts: np.ndarray, c: int,
                    seed: np.random.SeedSequence) -> tuple[np.ndarray, np.ndarray, float]:
    rng = np.random.default_rng(seed)
    centres = _kmeans_plus_plus(pts, c, rng)
    return _lloyd(pts, centres)


def cluster_modes(concern: ConcernSet, c: int, seed: int,
                  n_restarts: int = 32) -> ModeClusters:
    """Seeded k-means over the concern representatives.

    Restarts draw independent child seeds, so running them in any order (or
    in parallel) reproduces the serial result; the lowest inertia wins and
    exact ties fall back to lexicographic centre order.  Cluster indices are
    canonical: sorted by centre (Re, Im).
    """
    pts = np.c_[concern.eigenvalues.real, concern.eigenvalues.imag]
    if not 1 <= c <= len(pts):
        raise ValueError(f"cluster count {c} not in [1, {len(pts)}]")

    children = np.random.SeedSequence(seed).spawn(n_restarts)
    best: tuple[float, tuple, np.ndarray, np.ndarray] | None = None
    for child in children:
        centres, labels, inertia = _kmeans_restart(pts, c, child)
        key = tuple(sorted(map(tuple, centres)))
        if best is None or (inertia, key) < (best[0], best[1]):
            best = (inertia, key, centres, labels)
    inertia, _, centres, labels = best

    order = sorted(range(c), key=lambda k: (centres[k, 0], centres[k, 1]))
    members = tuple(
        tuple(concern.mode_indices[p] for p in np.flatnonzero(labels == k))
        for k in order)
    # exact member means in the canonical order
    centre_cx = np.array([
        complex(np.mean(concern.eigenvalues[labels == k]))
        for k in order])
    return ModeClusters(members=members, centres=centre_cx,
                        inertia=inertia)


# ---------------------------------------------------------------------------
# feature vectors


@dataclass(frozen=True)
class FeatureTable:
    """Superimposed MPFs: one row per WT-representative state, one column
    per mode cluster."""

    wt_ids: tuple[str, ...]
    table: np.ndarray            # complex (n_wt, n_clusters)

    def feature_vector(self, wt_id: str) -> np.ndarray:
        return self.table[self.wt_ids.index(wt_id)]


def superimpose_mpf(mpf: np.ndarray, clusters: ModeClusters,
                    rep_rows: dict[str, int]) -> FeatureTable:
    """Sum each representative row of the MPF table over every cluster."""
    wt_ids = tuple(rep_rows)
    table = np.zeros((len(wt_ids), clusters.n_clusters), dtype=complex)
    for r, wt in enumerate(wt_ids):
        k = rep_rows[wt]
        for c, group in enumerate(clusters.members):
            table[r, c] = sum(mpf[k, i] for i in group)
    return FeatureTable(wt_ids=wt_ids, table=table)


@dataclass(frozen=True)
class GroupAssignment:
    group_of: dict[str, int]         # WT id -> dense group id
    margins: dict[str, float]        # dominance margin per WT, in [0, 1]
    merged: tuple[tuple[int, int], ...]   # (kept, absorbed) cluster-group pairs

    @property
    def n_groups(self) -> int:
        return len(set(self.group_of.values()))

    def members(self, group: int) -> tuple[str, ...]:
        return tuple(wt for wt, g in self.group_of.items() if g == group)


def group_wts(features: FeatureTable, tau: float = 0.1) -> GroupAssignment:
    """Assign each WT to its dominant cluster, then merge look-alike groups.

    Grouping works on feature magnitudes.  Two groups merge when their
    centroid feature vectors differ by less than tau relative to the larger
    centroid norm.  The margin is (top - second) / top over |F_kc|; with a
    single cluster it is 1 by convention.
    """
    mags = np.abs(features.table)
    n_wt, n_c = mags.shape
    raw = mags.argmax(axis=1)
    if n_c == 1:
        margins = np.ones(n_wt)
    else:
        part = np.sort(mags, axis=1)
        top, second = part[:, -1], part[:, -2]
        margins = np.where(top > 0, (top - second) / np.where(top > 0, top, 1.0), 0.0)

    # iterative closest-pair merging on group centroids
    alive = sorted(set(raw.tolist()))
    assign = raw.copy()
    merged: list[tuple[int, int]] = []
    while len(alive) > 1:
        centroids = {g: mags[assign == g].mean(axis=0) for g in alive}
        best = None
        for a_pos, ga in enumerate(alive):
            for gb in alive[a_pos + 1:]:
                denom = max(np.linalg.norm(centroids[ga]),
                            np.linalg.norm(centroids[gb]))
                if denom == 0:
                    dist = 0.0
                else:
                    dist = float(np.linalg.norm(centroids[ga] - centroids[gb])
                                 / denom)
                if best is None or dist < best[0]:
                    best = (dist, ga, gb)
        dist, ga, gb = best
        if dist >= tau:
            break
        assign[assign == gb] = ga
        merged.append((ga, gb))
        alive.remove(gb)

    # dense ids in order of first appearance over the WT list
    remap: dict[int, int] = {}
    for g in assign:
        if g not in remap:
            remap[int(g)] = len(remap)
    group_of = {wt: remap[int(g)] for wt, g in zip(features.wt_ids, assign)}
    return GroupAssignment(
        group_of=group_of,
        margins={wt: float(m) for wt, m in zip(features.wt_ids, margins)},
        merged=tuple(merged),
    )


# ---------------------------------------------------------------------------
# artifacts


def write_features_csv(features: FeatureTable, path: str | Path) -> None:
    n_c = features.table.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["wt_id"]
        for c in range(n_c):
            header += [f"cluster{c}_abs", f"cluster{c}_re", f"cluster{c}_im"]
        writer.writerow(header)
        for r, wt in enumerate(features.wt_ids):
            row = [wt]
            for c in range(n_c):
                f = features.table[r, c]
                row += [f"{abs(f):.12g}", f"{f.real:.12g}", f"{f.imag:.12g}"]
            writer.writerow(row)


def write_groups_json(groups: GroupAssignment, path: str | Path,
                      low_margin: float = 0.1) -> None:
    doc = {
        "assignment": groups.group_of,
        "margins": groups.margins,
        "low_margin_wts": sorted(
            wt for wt, m in groups.margins.items() if m < low_margin),
        "merge_log": [list(pair) for pair in groups.merged],
        "n_groups": groups.n_groups,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
