"""Per-element base losses and the hierarchical constraint transform.

All losses are N x C surfaces: rows are examples, columns are classes.
Labels are in {-1, +1} and scores are per-class sigmoid outputs in (0, 1).

The transform replaces each element with the max of itself and every element
of the same example at a strictly shallower level (default scope), which
forces per-example losses to be non-decreasing in depth while staying an
element-wise lower bound among all loss surfaces with that property. An
``ancestors-only`` scope restricts the max to the class's own root path.
"""

from __future__ import annotations

import numpy as np

from .taxonomy import Taxonomy

LOG_EPS = 1e-7  # score clamp for log losses; keeps saturated sigmoids finite

SCOPE_ALL_SHALLOWER = "all-shallower"
SCOPE_ANCESTORS_ONLY = "ancestors-only"
SCOPES = (SCOPE_ALL_SHALLOWER, SCOPE_ANCESTORS_ONLY)


def _check_pair(y, s):
    y = np.asarray(y)
    s = np.asarray(s, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 2:
        raise ValueError(f"label/score shape mismatch: {y.shape} vs {s.shape}")
    return y, s


def zero_one_loss(y, s, decision_threshold: float = 0.5) -> np.ndarray:
    """0-1 surface: 1 where the thresholded score disagrees with the label.

    A score exactly at the threshold predicts -1.
    """
    if not 0.0 < decision_threshold < 1.0:
        raise ValueError(f"decision_threshold must lie in (0,1), got {decision_threshold}")
    y, s = _check_pair(y, s)
    pred = np.where(s > decision_threshold, 1.0, -1.0)
    return (pred != np.sign(y)).astype(np.float64)


def bce_loss(y, s) -> np.ndarray:
    """Binary cross entropy per element, scores clamped to [eps, 1-eps]."""
    y, s = _check_pair(y, s)
    sc = np.clip(s, LOG_EPS, 1.0 - LOG_EPS)
    return np.where(y > 0, -np.log(sc), -np.log1p(-sc))


def bce_grad(y, s) -> np.ndarray:
    """d(bce)/d(score) per element, evaluated on the clamped score."""
    y, s = _check_pair(y, s)
    sc = np.clip(s, LOG_EPS, 1.0 - LOG_EPS)
    return np.where(y > 0, -1.0 / sc, 1.0 / (1.0 - sc))


def focal_loss(y, s, gamma: float = 2.0) -> np.ndarray:
    """Focal surface (1-p_t)^gamma * (-ln p_t), p_t the true-class score.

    gamma=0 reduces exactly to bce_loss.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    y, s = _check_pair(y, s)
    sc = np.clip(s, LOG_EPS, 1.0 - LOG_EPS)
    pt = np.where(y > 0, sc, 1.0 - sc)
    return (1.0 - pt) ** gamma * -np.log(pt)


def focal_grad(y, s, gamma: float = 2.0) -> np.ndarray:
    """d(focal)/d(score) per element."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    y, s = _check_pair(y, s)
    sc = np.clip(s, LOG_EPS, 1.0 - LOG_EPS)
    pt = np.where(y > 0, sc, 1.0 - sc)
    # d/dp [(1-p)^g * (-ln p)] = g (1-p)^(g-1) ln p - (1-p)^g / p
    if gamma == 0.0:
        dpt = -1.0 / pt
    else:
        dpt = gamma * (1.0 - pt) ** (gamma - 1.0) * np.log(pt) - (1.0 - pt) ** gamma / pt
    return np.where(y > 0, dpt, -dpt)


def hier_transform(base, taxonomy: Taxonomy, scope: str = SCOPE_ALL_SHALLOWER):
    """Apply the level-monotone max transform to a loss surface.

    Returns ``(transformed, routing)`` where ``routing[i, j]`` is the class id
    whose base element realized the max for element (i, j). Ties go to j
    itself, then to the smallest class id among maximizers. Runs one
    ascending sweep over level buckets, O(C) per example.
    """
    if scope not in SCOPES:
        raise ValueError(f"unknown scope {scope!r}, expected one of {SCOPES}")
    base = np.asarray(base, dtype=np.float64)
    if base.ndim != 2 or base.shape[1] != taxonomy.n_classes:
        raise ValueError(
            f"loss surface has {base.shape[-1] if base.ndim else 0} columns, "
            f"taxonomy has {taxonomy.n_classes} classes"
        )
    n = base.shape[0]
    out = np.empty_like(base)
    routing = np.empty(base.shape, dtype=np.int64)

    if scope == SCOPE_ALL_SHALLOWER:
        run_val = np.full(n, -np.inf)
        run_id = np.full(n, -1, dtype=np.int64)
        for ids in taxonomy.levels_index[1:]:
            sub = base[:, ids]
            own_wins = sub >= run_val[:, None]
            out[:, ids] = np.maximum(sub, run_val[:, None])
            routing[:, ids] = np.where(own_wins, ids[None, :], run_id[:, None])
            # fold this level into the running shallower max; argmax picks the
            # first (= smallest id, buckets are ascending) and cross-level ties
            # keep the smaller id
            lev_max = sub.max(axis=1)
            lev_id = ids[np.argmax(sub, axis=1)]
            tie = lev_max == run_val
            run_id = np.where(
                lev_max > run_val, lev_id, np.where(tie, np.minimum(run_id, lev_id), run_id)
            )
            run_val = np.maximum(run_val, lev_max)
    else:
        # running max down each root path; chain_min tracks the smallest id
        # among chain maximizers for deterministic routing
        chain_val = np.empty_like(base)
        chain_min = np.empty(base.shape, dtype=np.int64)
        for ids in taxonomy.levels_index[1:]:
            for j in ids:
                col = base[:, j]
                p = taxonomy.parent[j]
                if p is None:
                    out[:, j] = col
                    routing[:, j] = j
                    chain_val[:, j] = col
                    chain_min[:, j] = j
                    continue
                anc_val = chain_val[:, p]
                anc_min = chain_min[:, p]
                own_wins = col >= anc_val
                out[:, j] = np.maximum(col, anc_val)
                routing[:, j] = np.where(own_wins, j, anc_min)
                tie = col == anc_val
                chain_min[:, j] = np.where(
                    col > anc_val, j, np.where(tie, np.minimum(anc_min, j), anc_min)
                )
                chain_val[:, j] = np.maximum(col, anc_val)
    return out, routing


def hier_transform_backward(routing, upstream) -> np.ndarray:
    """Scatter upstream gradient of each transformed element to its argmax.

    out[i, k] = sum over j of upstream[i, j] where routing[i, j] == k.
    """
    routing = np.asarray(routing)
    upstream = np.asarray(upstream, dtype=np.float64)
    if routing.shape != upstream.shape or routing.ndim != 2:
        raise ValueError(f"routing/upstream shape mismatch: {routing.shape} vs {upstream.shape}")
    out = np.zeros_like(upstream)
    rows = np.broadcast_to(np.arange(routing.shape[0])[:, None], routing.shape)
    np.add.at(out, (rows, routing), upstream)
    return out


def check_label_matrix(y, taxonomy: Taxonomy) -> np.ndarray:
    """Validate a {-1,+1} label matrix: ancestor-closed, >=1 positive per row."""
    y = np.asarray(y)
    if y.ndim != 2 or y.shape[1] != taxonomy.n_classes:
        raise ValueError(f"label matrix shape {y.shape} does not match C={taxonomy.n_classes}")
    if not np.isin(y, (-1, 1)).all():
        raise ValueError("label matrix entries must be -1 or +1")
    if not (y == 1).any(axis=1).all():
        bad = int(np.flatnonzero(~(y == 1).any(axis=1))[0])
        raise ValueError(f"example {bad} has no positive class")
    pos = y == 1
    for c in range(taxonomy.n_classes):
        p = taxonomy.parent[c]
        if p is not None and not pos[pos[:, c], p].all():
            raise ValueError(
                f"label matrix is not ancestor-closed: class "
                f"{taxonomy.class_names[c]!r} positive without its parent"
            )
    return y
