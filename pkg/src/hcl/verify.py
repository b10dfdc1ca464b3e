"""Randomized verification of the transform and selection guarantees.

Each check draws fresh (hierarchy, loss-surface) instances from a seeded
generator and asserts the corresponding guarantee exactly (or at the stated
tolerance), returning a counterexample payload on the first violation:

* level-monotonicity of the transformed surface (both scopes),
* the element-wise bound chain base <= transformed <= g for generated
  level-monotone dominating surfaces g,
* the objective sandwich between total 0-1 loss and total transformed loss,
* equality of prefix selection with the exhaustive 2^C oracle, plus the
  disagreement rate of the fixed-threshold rule,
* finite-difference agreement of the loss and pipeline gradients.

The checks take the transform/selection callables as parameters so a
deliberately broken implementation can be fed in to prove the harness
actually catches violations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import curriculum, losses
from .taxonomy import Taxonomy, parse_hierarchy

GRAD_FD_STEP = 1e-5
GRAD_RTOL = 1e-4


@dataclass
class CheckResult:
    name: str
    trials: int
    failures: int = 0
    counterexample: dict | None = None
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.failures == 0


def random_taxonomy(rng, max_classes: int = 30, max_depth: int = 5) -> Taxonomy:
    """Random forest of up to max_classes nodes, depth-capped."""
    n = int(rng.integers(2, max_classes + 1))
    paths: list[str] = []
    depths: list[int] = []
    for i in range(n):
        if i == 0 or rng.random() < 0.25:
            paths.append(str(i))
            depths.append(1)
        else:
            shallow = [k for k in range(i) if depths[k] < max_depth]
            k = shallow[int(rng.integers(len(shallow)))] if shallow else 0
            paths.append(f"{paths[k]}/{i}")
            depths.append(depths[k] + 1)
    return parse_hierarchy(paths)


def random_surface(rng, n: int, c: int) -> np.ndarray:
    """Loss surface from a mix of distributions, tie-prone on purpose."""
    kind = int(rng.integers(3))
    if kind == 0:
        return rng.uniform(0.0, 4.0, size=(n, c))
    if kind == 1:
        return rng.integers(0, 2, size=(n, c)).astype(np.float64)  # 0-1 losses
    return rng.integers(0, 4, size=(n, c)).astype(np.float64)  # small-int ties


def _lambda_violation(surface, tax: Taxonomy):
    """First (example, shallow, deep) triple violating level monotonicity."""
    for ids_hi in range(2, tax.max_level + 1):
        deep = tax.levels_index[ids_hi]
        shallow = np.concatenate(tax.levels_index[1:ids_hi])
        deep_min = surface[:, deep].min(axis=1)
        shal_max = surface[:, shallow].max(axis=1)
        bad = np.flatnonzero(deep_min < shal_max)
        if len(bad):
            i = int(bad[0])
            c1 = int(deep[np.argmin(surface[i, deep])])
            c2 = int(shallow[np.argmax(surface[i, shallow])])
            return i, c1, c2
    return None


def _chain_violation(surface, tax: Taxonomy):
    for c in range(tax.n_classes):
        p = tax.parent[c]
        if p is None:
            continue
        bad = np.flatnonzero(surface[:, c] < surface[:, p])
        if len(bad):
            return int(bad[0]), c, p
    return None


def _instance_payload(tax, base, i, extra=None):
    payload = {
        "hierarchy": list(tax.class_names),
        "example": i,
        "base_row": [float(v) for v in base[i]],
    }
    if extra:
        payload.update(extra)
    return payload


def check_lambda(trials: int, seed: int, transform=losses.hier_transform) -> CheckResult:
    """Transformed surfaces are level-monotone: fully under all-shallower,
    along ancestor chains under ancestors-only."""
    rng = np.random.default_rng(seed)
    res = CheckResult("lambda-monotonicity", trials)
    for _ in range(trials):
        tax = random_taxonomy(rng)
        base = random_surface(rng, int(rng.integers(1, 51)), tax.n_classes)
        out_all, _ = transform(base, tax, losses.SCOPE_ALL_SHALLOWER)
        hit = _lambda_violation(out_all, tax)
        if hit is not None:
            i, c1, c2 = hit
            res.failures += 1
            res.counterexample = _instance_payload(tax, base, i, {
                "scope": losses.SCOPE_ALL_SHALLOWER,
                "deeper_class": tax.class_names[c1],
                "shallower_class": tax.class_names[c2],
                "transformed_row": [float(v) for v in out_all[i]],
            })
            return res
        out_anc, _ = transform(base, tax, losses.SCOPE_ANCESTORS_ONLY)
        hit = _chain_violation(out_anc, tax)
        if hit is not None:
            i, c, p = hit
            res.failures += 1
            res.counterexample = _instance_payload(tax, base, i, {
                "scope": losses.SCOPE_ANCESTORS_ONLY,
                "child": tax.class_names[c],
                "parent": tax.class_names[p],
                "transformed_row": [float(v) for v in out_anc[i]],
            })
            return res
    return res


def dominating_monotone_surface(rng, transformed, tax: Taxonomy) -> np.ndarray:
    """A level-monotone surface above the transform: running level maxima
    plus per-level cumulative non-negative noise."""
    noise = rng.uniform(0.0, 1.0, size=(transformed.shape[0], tax.max_level + 1))
    noise[:, 0] = 0.0
    cum = np.cumsum(noise, axis=1)
    g = transformed.copy()
    for lvl in range(1, tax.max_level + 1):
        ids = tax.levels_index[lvl]
        g[:, ids] += cum[:, lvl][:, None]
    return g


def _min_level_dominator(base, tax: Taxonomy) -> np.ndarray:
    """Smallest level-monotone surface >= base, computed by a direct level
    sweep so the bound check does not depend on the transform under test."""
    base = np.asarray(base, dtype=np.float64)
    lv = np.asarray(tax.level)
    out = base.copy()
    shallower = np.full(base.shape[0], -np.inf)
    for level in range(1, int(lv.max()) + 1):
        cols = np.flatnonzero(lv == level)
        out[:, cols] = np.maximum(base[:, cols], shallower[:, None])
        shallower = np.maximum(shallower, base[:, cols].max(axis=1))
    return out


def check_bound_chain(trials: int, seed: int, transform=losses.hier_transform,
                      dominators_per_trial: int = 2) -> CheckResult:
    """base <= transformed element-wise, and transformed <= g for generated
    level-monotone g >= base (tightness)."""
    rng = np.random.default_rng(seed)
    res = CheckResult("bound-chain-tightness", trials)
    for _ in range(trials):
        tax = random_taxonomy(rng)
        base = random_surface(rng, int(rng.integers(1, 51)), tax.n_classes)
        out, _ = transform(base, tax, losses.SCOPE_ALL_SHALLOWER)
        if (out < base).any():
            i, j = np.argwhere(out < base)[0]
            res.failures += 1
            res.counterexample = _instance_payload(tax, base, int(i), {
                "below_base_class": tax.class_names[int(j)],
                "transformed_row": [float(v) for v in out[int(i)]],
            })
            return res
        envelope = _min_level_dominator(base, tax)
        for _ in range(dominators_per_trial):
            g = dominating_monotone_surface(rng, envelope, tax)
            assert _lambda_violation(g, tax) is None and (g >= base).all()
            if (out > g).any():
                i, j = np.argwhere(out > g)[0]
                res.failures += 1
                res.counterexample = _instance_payload(tax, base, int(i), {
                    "above_dominator_class": tax.class_names[int(j)],
                    "dominator_row": [float(v) for v in g[int(i)]],
                })
                return res
            res.info["dominators_checked"] = res.info.get("dominators_checked", 0) + 1
    return res


def check_sandwich(trials: int, seed: int, tol: float = 1e-9) -> CheckResult:
    """Total transformed 0-1 loss <= curriculum objective <= total
    transformed base loss.

    Base surfaces are drawn to dominate their 0-1 surface element-wise;
    the upper bound requires that premise (the lower one holds always).
    """
    rng = np.random.default_rng(seed)
    res = CheckResult("objective-sandwich", trials)
    for _ in range(trials):
        tax = random_taxonomy(rng)
        n = int(rng.integers(1, 51))
        e01 = rng.integers(0, 2, size=(n, tax.n_classes)).astype(np.float64)
        base = e01 + rng.uniform(0.0, 2.0, size=e01.shape)
        lh, _ = losses.hier_transform(base, tax)
        eh, _ = losses.hier_transform(e01, tax)
        agg = curriculum.aggregate_class_losses(lh, eh)
        s = curriculum.select_classes(agg, tax.n_classes)
        value = curriculum.curriculum_objective(s, agg, tax.n_classes)
        lo, hi = float(eh.sum()), float(lh.sum())
        if not (lo - tol <= value <= hi + tol):
            res.failures += 1
            res.counterexample = {
                "hierarchy": list(tax.class_names),
                "zero_one_transformed_total": lo,
                "objective": value,
                "transformed_total": hi,
            }
            return res
    return res


def check_selection_oracle(trials: int, seed: int, tol: float = 1e-9,
                           select=curriculum.select_classes) -> CheckResult:
    """Prefix selection achieves the exhaustive 2^C optimum; also records
    how often the simpler fixed-threshold rule misses it."""
    rng = np.random.default_rng(seed)
    res = CheckResult("selection-oracle", trials)
    threshold_misses = 0
    for _ in range(trials):
        c = int(rng.integers(1, 13))
        if rng.random() < 0.3:
            big_l = rng.integers(0, 6, size=c).astype(np.float64)  # tie-prone
        else:
            big_l = rng.uniform(0.0, 5.0, size=c)
        e_total = float(rng.uniform(0.0, 2.0 * c))
        agg = curriculum.ClassLossAggregate(L=big_l, e_h_total=e_total, n_examples=1)
        s_fast = select(agg, c)
        fast_val = curriculum.curriculum_objective(s_fast, agg, c)
        _, oracle_val = curriculum.brute_force_select(agg, c)
        if abs(fast_val - oracle_val) > tol:
            res.failures += 1
            res.counterexample = {
                "L": [float(v) for v in big_l],
                "e_h_total": e_total,
                "fast_value": fast_val,
                "oracle_value": oracle_val,
                "selection": [int(v) for v in s_fast],
            }
            return res
        # fixed-threshold rule, with thresh aligned so its condition reads
        # prefixSum(K) > C - K + e_total
        s_thr = curriculum.select_classes(
            agg, c, rule=curriculum.RULE_FIXED_THRESHOLD, thresh=e_total + c - 1
        )
        thr_val = curriculum.curriculum_objective(s_thr, agg, c)
        if abs(thr_val - oracle_val) > tol:
            threshold_misses += 1
    res.info["threshold_rule_disagreement_rate"] = threshold_misses / max(trials, 1)
    return res


def _fd_grad(f, x, step=GRAD_FD_STEP):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp, xm = x.copy(), x.copy()
        xp[idx] += step
        xm[idx] -= step
        g[idx] = (f(xp) - f(xm)) / (2.0 * step)
        it.iternext()
    return g


def max_rel_err(analytic, fd) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-6)
    return float((np.abs(analytic - fd) / denom).max())


def _tie_free_scores(rng, y, shape, margin=1e-3, attempts=50):
    """Scores whose bce surface has pairwise-distinct per-example entries."""
    for _ in range(attempts):
        s = rng.uniform(0.05, 0.95, size=shape)
        base = losses.bce_loss(y, s)
        ok = True
        for row in base:
            d = np.diff(np.sort(row))
            if len(d) and d.min() < margin:
                ok = False
                break
        if ok:
            return s
    raise RuntimeError("could not draw a tie-free score matrix")


def check_gradients(trials: int, seed: int) -> CheckResult:
    """bce, focal(2) and frozen-selection pipeline gradients vs central FD."""
    rng = np.random.default_rng(seed)
    res = CheckResult("gradient-fd", trials)
    for _ in range(trials):
        tax = random_taxonomy(rng, max_classes=6, max_depth=3)
        n, c = int(rng.integers(2, 5)), tax.n_classes
        y = np.where(rng.random((n, c)) < 0.5, -1.0, 1.0)
        scores = _tie_free_scores(rng, y, (n, c))

        checks = {
            "bce": (lambda s: losses.bce_loss(y, s).sum(), losses.bce_grad(y, scores)),
            "focal": (lambda s: losses.focal_loss(y, s, 2.0).sum(),
                      losses.focal_grad(y, scores, 2.0)),
        }
        _, s_vec, weights = curriculum.hcl_loss(y, scores, tax)

        def pipeline(sc):
            lh, _ = losses.hier_transform(losses.bce_loss(y, sc), tax)
            return float((s_vec[None, :] * lh).sum())

        checks["hcl-pipeline"] = (pipeline, weights * losses.bce_grad(y, scores))

        for name, (f, analytic) in checks.items():
            err = max_rel_err(analytic, _fd_grad(f, scores))
            res.info[name] = max(res.info.get(name, 0.0), err)
            if err >= GRAD_RTOL:
                res.failures += 1
                res.counterexample = {
                    "check": name,
                    "max_rel_err": err,
                    "hierarchy": list(tax.class_names),
                }
                return res
    return res


def run_all(trials: int, seed: int) -> list[CheckResult]:
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    grad_trials = max(1, min(trials, 20))
    return [
        check_lambda(trials, seed),
        check_bound_chain(trials, seed + 1),
        check_sandwich(trials, seed + 2),
        check_selection_oracle(trials, seed + 3),
        check_gradients(grad_trials, seed + 4),
    ]
