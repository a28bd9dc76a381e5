"""Structural-causal-model declaration, ATE estimation and refutation.

The SCM is fixed in shape: treatment T -> outcome Y, confounders Z -> both,
effect modifiers -> Y only. Estimation treats each prompt method as a binary
contrast against control and adjusts for Z through a logistic propensity
model, consumed by matching, stratification or inverse probability
weighting. Refuters re-estimate under perturbations that should either
nullify the effect (placebo) or leave it unchanged (random common cause,
subset).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

SIMILARITY_OUTCOMES = {"y_lev_similarity", "y_bleu", "y_codebleu"}

DEFAULT_CONFOUNDERS = ("prompt_size", "n_whitespaces", "token_count", "nloc")
DEFAULT_EFFECT_MODIFIERS = ("complexity", "n_ast_nodes", "n_ast_errors",
                            "n_ast_levels")

ESTIMATION_METHODS = ("matching", "stratification", "ipw")
REFUTERS = ("placebo", "random_common_cause", "subset")


class CausalError(Exception):
    pass


class ConvergenceError(CausalError):
    def __init__(self, iterations: int, grad_norm: float):
        super().__init__(
            f"propensity fit did not converge after {iterations} iterations "
            f"(gradient norm {grad_norm:.3e})")
        self.grad_norm = grad_norm


class SeparationError(CausalError):
    def __init__(self):
        super().__init__(
            "perfect separation detected in the propensity model; trim the "
            "confounder space or the sample before estimating")


@dataclass(frozen=True)
class ScmSpec:
    treatment: str
    outcome: str
    confounders: tuple[str, ...] = DEFAULT_CONFOUNDERS
    effect_modifiers: tuple[str, ...] = DEFAULT_EFFECT_MODIFIERS

    def __post_init__(self):
        overlap = set(self.confounders) & set(self.effect_modifiers)
        if overlap:
            raise CausalError(
                f"variables cannot be both confounder and effect modifier: "
                f"{sorted(overlap)}")
        if self.treatment in self.confounders:
            raise CausalError("treatment cannot appear among confounders")
        if self.outcome in self.confounders:
            raise CausalError("outcome cannot appear among confounders")

    @property
    def outcome_is_similarity(self) -> bool:
        return self.outcome in SIMILARITY_OUTCOMES


@dataclass(frozen=True)
class AteResult:
    method: str
    ate: float
    ate_pct: float | None
    n_treated: int
    n_control: int

    def __post_init__(self):
        if self.n_treated < 1 or self.n_control < 1:
            raise CausalError("both arms must be populated")


@dataclass(frozen=True)
class RefutationResult:
    refuter: str
    original_ate: float
    refuted_ate: float
    stable: bool


# ---------------------------------------------------------------------------
# Correlation
# ---------------------------------------------------------------------------

def pearson_correlation(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise CausalError("series must have equal length of at least 2")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        raise CausalError("correlation undefined for a constant series")
    return float((xc * yc).sum() / denom)


def spearman_correlation(x: Sequence[float], y: Sequence[float]) -> float:
    """Rank-based alternative, exposed as an option only."""
    def ranks(v: np.ndarray) -> np.ndarray:
        order = np.argsort(v, kind="mergesort")
        r = np.empty_like(order, dtype=float)
        r[order] = np.arange(len(v), dtype=float)
        # average ties
        vals, inv, counts = np.unique(v, return_inverse=True,
                                      return_counts=True)
        sums = np.zeros(len(vals))
        np.add.at(sums, inv, r)
        return sums[inv] / counts[inv]
    return pearson_correlation(ranks(np.asarray(x, float)),
                               ranks(np.asarray(y, float)))


def screen_confounders(records: Sequence[Mapping], candidates: Sequence[str],
                       outcome: str, lo: float = 0.4, hi: float = 0.8,
                       group_key: str = "treatment") -> list[str]:
    """Candidates whose |r| with the outcome lies inside [lo, hi] in every
    treatment group, strongest minimum correlation first.

    A candidate above ``hi`` anywhere is excluded as a likely effect
    pathway rather than a confounder.
    """
    groups: dict[str, list[Mapping]] = {}
    for rec in records:
        groups.setdefault(str(rec[group_key]), []).append(rec)
    if len(groups) < 2:
        raise CausalError("records must span control and treatment groups")
    scored = []
    for cand in candidates:
        strengths = []
        ok = True
        for rows in groups.values():
            try:
                r = abs(pearson_correlation([row[cand] for row in rows],
                                            [row[outcome] for row in rows]))
            except CausalError:
                ok = False
                break
            if not lo <= r <= hi:
                ok = False
                break
            strengths.append(r)
        if ok:
            scored.append((min(strengths), cand))
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [name for _, name in scored]


# ---------------------------------------------------------------------------
# Propensity model
# ---------------------------------------------------------------------------

def standardize(Z: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance columns; constant columns become all-zero."""
    Z = np.asarray(Z, dtype=float)
    mean = Z.mean(axis=0)
    std = Z.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return (Z - mean) / std


def logistic_mle(Z: np.ndarray, T: np.ndarray, max_iter: int = 100,
                 tol: float = 1e-8, ridge: float = 0.0) -> np.ndarray:
    """Logistic coefficients (intercept first) by Newton-Raphson maximum
    likelihood with an iteration cap and a gradient-norm tolerance.

    Constant (all-zero) columns keep a zero coefficient. Raises
    ConvergenceError past the cap and SeparationError when the arms are
    perfectly separable (the MLE diverges). ``ridge`` adds an optional L2
    penalty on the slopes (never the intercept), which keeps near-separated
    designs estimable the way regularized fits in common causal stacks do.
    """
    Z = np.asarray(Z, dtype=float)
    T = np.asarray(T, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    n, k = Z.shape
    if T.shape != (n,):
        raise CausalError("T must be a vector matching Z's rows")
    if not np.isin(T, (0.0, 1.0)).all():
        raise CausalError("T must be binary")
    live = np.abs(Z).sum(axis=0) > 0
    X = np.column_stack([np.ones(n), Z[:, live]])
    penalty = np.full(X.shape[1], ridge)
    penalty[0] = 0.0
    beta = np.zeros(X.shape[1])
    grad_norm = np.inf
    for _ in range(max_iter):
        eta = X @ beta
        p = 1.0 / (1.0 + np.exp(-np.clip(eta, -35, 35)))
        grad = X.T @ (T - p) - penalty * beta
        grad_norm = float(np.abs(grad).max())
        if grad_norm < tol:
            break
        w = p * (1.0 - p)
        hess = (X * w[:, None]).T @ X + np.diag(penalty) \
            + 1e-10 * np.eye(X.shape[1])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise SeparationError() from exc
        beta += step
        if np.abs(beta[1:]).max(initial=0.0) > 30.0:
            # coefficients diverging on standardized inputs: separation
            fitted = 1.0 / (1.0 + np.exp(-np.clip(X @ beta, -35, 35)))
            if (np.abs(T - fitted) < 1e-6).all():
                raise SeparationError()
    else:
        raise ConvergenceError(max_iter, grad_norm)
    full = np.zeros(k + 1)
    full[0] = beta[0]
    full[1:][live] = beta[1:]
    return full


def fit_propensity(Z: np.ndarray, T: np.ndarray, max_iter: int = 100,
                   tol: float = 1e-8,
                   clip: tuple[float, float] = (0.01, 0.99),
                   ridge: float = 0.0) -> np.ndarray:
    """Propensity scores e(z) from the logistic MLE. Z is expected
    standardized; scores are clipped to the given interval."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    beta = logistic_mle(Z, np.asarray(T, dtype=float), max_iter, tol, ridge)
    eta = beta[0] + Z @ beta[1:]
    scores = 1.0 / (1.0 + np.exp(-np.clip(eta, -35, 35)))
    return np.clip(scores, clip[0], clip[1])


# ---------------------------------------------------------------------------
# Effect estimators (each consumes outcomes, treatment and scores directly
# so tests can force propensities)
# ---------------------------------------------------------------------------

def ipw_effect(Y: np.ndarray, T: np.ndarray, scores: np.ndarray) -> float:
    """Horvitz-Thompson IPW: mean(T*Y/e) - mean((1-T)*Y/(1-e))."""
    Y = np.asarray(Y, float)
    T = np.asarray(T, float)
    e = np.asarray(scores, float)
    return float(np.mean(T * Y / e) - np.mean((1.0 - T) * Y / (1.0 - e)))


def matching_effect(Y: np.ndarray, T: np.ndarray, scores: np.ndarray,
                    caliper_scale: float = 0.2) -> float:
    """1-nearest-neighbor matching on the propensity score with replacement.

    Every unit is matched to its nearest opposite-arm unit on the logit
    score within a caliper of ``caliper_scale`` times the logit's standard
    deviation; units without an in-caliper match are dropped. Ties resolve
    to the lowest index.
    """
    Y = np.asarray(Y, float)
    T = np.asarray(T, float)
    logit = np.log(scores) - np.log1p(-scores)
    caliper = caliper_scale * float(np.std(logit))
    treated = np.flatnonzero(T == 1)
    control = np.flatnonzero(T == 0)
    if len(treated) == 0 or len(control) == 0:
        raise CausalError("matching needs both arms populated")

    effects = []
    for idx, pool in ((treated, control), (control, treated)):
        dists = np.abs(logit[idx][:, None] - logit[pool][None, :])
        nearest = np.argmin(dists, axis=1)
        best = dists[np.arange(len(idx)), nearest]
        ok = best <= caliper if caliper > 0 else best == 0
        for i, j, keep in zip(idx, pool[nearest], ok):
            if not keep:
                continue
            y1 = Y[i] if T[i] == 1 else Y[j]
            y0 = Y[j] if T[i] == 1 else Y[i]
            effects.append(y1 - y0)
    if not effects:
        raise CausalError("empty common support: no matches within caliper")
    return float(np.mean(effects))


def stratification_effect(Y: np.ndarray, T: np.ndarray, scores: np.ndarray,
                          n_strata: int = 20) -> float:
    """Propensity-quantile strata; within-stratum mean differences weighted
    by stratum size. Strata lacking either arm are dropped.

    Coarse stratification leaves residual confounding (a handful of strata
    removes most but not all bias), so the default is 20 quantile strata;
    empty-arm strata collapse away on small samples.
    """
    Y = np.asarray(Y, float)
    T = np.asarray(T, float)
    qs = np.quantile(scores, np.linspace(0, 1, n_strata + 1)[1:-1])
    edges = np.unique(qs)
    strata = np.searchsorted(edges, scores, side="right")
    total = 0
    acc = 0.0
    for s in np.unique(strata):
        in_s = strata == s
        t_mask = in_s & (T == 1)
        c_mask = in_s & (T == 0)
        if not t_mask.any() or not c_mask.any():
            continue
        size = int(in_s.sum())
        acc += (Y[t_mask].mean() - Y[c_mask].mean()) * size
        total += size
    if total == 0:
        raise CausalError("all strata dropped: no stratum holds both arms")
    return acc / total


# ---------------------------------------------------------------------------
# Record-level estimation
# ---------------------------------------------------------------------------

def _extract_arrays(records: Sequence[Mapping], scm: ScmSpec
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    T = np.array([float(r[scm.treatment]) for r in records])
    Y = np.array([float(r[scm.outcome]) for r in records])
    Z = np.array([[float(r[c]) for c in scm.confounders] for r in records]) \
        if scm.confounders else np.zeros((len(records), 0))
    return Y, T, Z


def estimate_ate(records: Sequence[Mapping], scm: ScmSpec, method: str,
                 params: Mapping | None = None, seed: int = 0,
                 min_per_arm: int = 30) -> AteResult:
    """Adjusted average treatment effect of a binary contrast.

    Records are mappings carrying the SCM's treatment (0/1), outcome and
    confounder variables. Effect modifiers are deliberately left out of the
    propensity model.
    """
    if method not in ESTIMATION_METHODS:
        raise CausalError(f"unknown method {method!r}")
    params = dict(params or {})
    Y, T, Z = _extract_arrays(records, scm)
    n_treated = int((T == 1).sum())
    n_control = int((T == 0).sum())
    if min(n_treated, n_control) < min_per_arm:
        raise CausalError(
            f"need at least {min_per_arm} records per arm, have "
            f"{n_treated} treated / {n_control} control")
    if Z.shape[1] > 0:
        scores = fit_propensity(standardize(Z), T,
                                clip=params.get("clip", (0.01, 0.99)),
                                ridge=params.get("ridge", 0.0))
    else:
        scores = np.full(len(T), T.mean())
    if method == "ipw":
        ate = ipw_effect(Y, T, scores)
    elif method == "matching":
        ate = matching_effect(Y, T, scores,
                              caliper_scale=params.get("caliper_scale", 0.2))
    else:
        ate = stratification_effect(Y, T, scores,
                                    n_strata=params.get("n_strata", 20))
    ate_pct = ate * 100.0 if scm.outcome_is_similarity else None
    return AteResult(method=method, ate=ate, ate_pct=ate_pct,
                     n_treated=n_treated, n_control=n_control)


def refute(records: Sequence[Mapping], scm: ScmSpec, method: str,
           refuter: str, seed: int = 0, params: Mapping | None = None,
           original: AteResult | None = None,
           eps_placebo: float = 0.05, delta: float = 0.10,
           min_per_arm: int = 30) -> RefutationResult:
    """Re-estimate the effect under a perturbation.

    placebo: treatment replaced by a uniform permutation (expect ~0);
    random_common_cause: an independent N(0,1) confounder appended (expect
    ~original); subset: uniform 80% subsample (expect ~original).
    """
    if refuter not in REFUTERS:
        raise CausalError(f"unknown refuter {refuter!r}")
    if original is None:
        original = estimate_ate(records, scm, method, params, seed,
                                min_per_arm=min_per_arm)
    rng = np.random.default_rng(seed)
    rows = [dict(r) for r in records]

    if refuter == "placebo":
        permuted = rng.permutation([r[scm.treatment] for r in rows])
        for r, t in zip(rows, permuted):
            r[scm.treatment] = t
        scm_used = scm
    elif refuter == "random_common_cause":
        noise = rng.standard_normal(len(rows))
        for r, v in zip(rows, noise):
            r["_rcc"] = v
        scm_used = replace(scm, confounders=scm.confounders + ("_rcc",))
    else:
        take = rng.random(len(rows)) < 0.8
        rows = [r for r, keep in zip(rows, take) if keep]
        scm_used = scm

    refuted = estimate_ate(rows, scm_used, method, params, seed,
                           min_per_arm=min_per_arm)
    if refuter == "placebo":
        stable = abs(refuted.ate) <= eps_placebo
    else:
        stable = abs(refuted.ate - original.ate) <= delta * abs(original.ate)
    return RefutationResult(refuter=refuter, original_ate=original.ate,
                            refuted_ate=refuted.ate, stable=stable)


# ---------------------------------------------------------------------------
# Study driver: multi-valued treatment as binary contrasts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContrastStudy:
    treatment_id: str
    scm: ScmSpec
    results: dict[str, AteResult]
    refutations: dict[str, dict[str, RefutationResult]] = field(
        default_factory=dict)


def binary_contrast(records: Sequence[Mapping], treatment_id: str,
                    scm: ScmSpec, control_id: str = "control",
                    group_key: str = "treatment") -> list[dict]:
    """Rows of {treated, control} with a 0/1 treatment indicator column."""
    rows = []
    for rec in records:
        group = rec[group_key]
        if group == treatment_id:
            t = 1
        elif group == control_id:
            t = 0
        else:
            continue
        row = dict(rec)
        row[scm.treatment] = t
        rows.append(row)
    return rows


def run_contrast(records: Sequence[Mapping], treatment_id: str,
                 scm: ScmSpec, methods: Sequence[str] = ESTIMATION_METHODS,
                 refuters: Sequence[str] = REFUTERS, seed: int = 0,
                 params: Mapping | None = None,
                 eps_placebo: float = 0.05, delta: float = 0.10,
                 min_per_arm: int = 30) -> ContrastStudy:
    """Full estimation + refutation battery for one treatment-vs-control
    contrast."""
    rows = binary_contrast(records, treatment_id, scm)
    results: dict[str, AteResult] = {}
    refutations: dict[str, dict[str, RefutationResult]] = {}
    for method in methods:
        res = estimate_ate(rows, scm, method, params, seed,
                           min_per_arm=min_per_arm)
        results[method] = res
        refutations[method] = {}
        for refuter in refuters:
            refutations[method][refuter] = refute(
                rows, scm, method, refuter, seed=seed, params=params,
                original=res, eps_placebo=eps_placebo, delta=delta,
                min_per_arm=min_per_arm)
    return ContrastStudy(treatment_id=treatment_id, scm=scm,
                         results=results, refutations=refutations)
