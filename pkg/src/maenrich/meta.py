"""Meta-analytic pooling.

Common- and random-effects pooling, DerSimonian-Laird and REML
heterogeneity, CR1 cluster-robust variance, prediction intervals,
correlated-effect aggregation, subgroup / cumulative / leave-one-cluster-out
pooling and a two-level (cluster + effect) REML model.

CIs are Wald z for model-based standard errors and t with m - 1 degrees of
freedom for cluster-robust ones; no Knapp-Hartung adjustment. Prediction
intervals use t with k - 2 df (m - 1 for robust results).
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Callable, Hashable, Sequence

import numpy as np
from scipy import optimize, stats

from maenrich.errors import InputError, NumericalError

CE = "CE"
RE_DL = "RE-DL"
RE_REML = "RE-REML"

REML_TOL = 1e-10
REML_MAX_ITER = 500
ML_MAX_ITER = 500

Z975 = float(stats.norm.ppf(0.975))


class EmptyInput(NumericalError):
    def __init__(self):
        super().__init__("no effects to pool")


class TooFewEffects(NumericalError):
    def __init__(self, k: int, needed: int = 2):
        super().__init__(f"need at least {needed} effects, got {k}")
        self.k = k


class TooFewClusters(NumericalError):
    def __init__(self, m: int):
        super().__init__(f"need at least 2 clusters, got {m}")
        self.m = m


class SingleCluster(TooFewClusters):
    def __init__(self):
        super().__init__(1)


class NoConvergence(NumericalError):
    def __init__(self, max_iter: int):
        super().__init__(f"optimizer did not converge within {max_iter} iterations")
        self.max_iter = max_iter


class RhoOutOfRange(InputError):
    def __init__(self, rho: float):
        super().__init__(f"rho must lie in [0, 1], got {rho}")
        self.rho = rho


class MissingYear(InputError):
    def __init__(self, effect_key: str):
        super().__init__(f"effect {effect_key!r} has no year")
        self.effect_key = effect_key


def t_quantile(df: float, p: float = 0.975) -> float:
    return float(stats.t.ppf(p, df))


@dataclass(frozen=True)
class PooledResult:
    estimate: float
    se: float
    ci_low: float
    ci_high: float
    tau2: float
    q: float
    i2: float
    k: int
    method: str
    pi_low: float | None = None
    pi_high: float | None = None
    m: int | None = None
    robust: bool = False

    @property
    def ci(self) -> tuple[float, float]:
        return (self.ci_low, self.ci_high)

    @property
    def pi(self) -> tuple[float, float] | None:
        if self.pi_low is None:
            return None
        return (self.pi_low, self.pi_high)

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "se": self.se,
            "ci": [self.ci_low, self.ci_high],
            "tau2": self.tau2,
            "q": self.q,
            "i2": self.i2,
            "pi": None if self.pi_low is None else [self.pi_low, self.pi_high],
            "k": self.k,
            "m": self.m,
            "method": self.method,
            "robust": self.robust,
        }


@dataclass(frozen=True)
class AggregatedEffect:
    key: str
    yi: float
    vi: float
    n_inputs: int

    def to_dict(self) -> dict:
        return {"key": self.key, "yi": self.yi, "vi": self.vi, "n_inputs": self.n_inputs}


def _arrays(effects: Sequence) -> tuple[np.ndarray, np.ndarray]:
    y = np.array([e.yi for e in effects], dtype=float)
    v = np.array([e.vi for e in effects], dtype=float)
    return y, v


def _q_stat(y: np.ndarray, v: np.ndarray) -> float:
    w = 1.0 / v
    mu = float(np.sum(w * y) / np.sum(w))
    return float(np.sum(w * (y - mu) ** 2))


def i_squared(q: float, k: int) -> float:
    if q <= 0:
        return 0.0
    return max(0.0, (q - (k - 1)) / q) * 100.0


def pool_common(effects: Sequence) -> PooledResult:
    """Inverse-variance (common-effect) pooling."""
    if len(effects) == 0:
        raise EmptyInput()
    y, v = _arrays(effects)
    w = 1.0 / v
    sw = float(np.sum(w))
    mu = float(np.sum(w * y) / sw)
    se = math.sqrt(1.0 / sw)
    q = float(np.sum(w * (y - mu) ** 2))
    k = len(y)
    return PooledResult(
        estimate=mu,
        se=se,
        ci_low=mu - Z975 * se,
        ci_high=mu + Z975 * se,
        tau2=0.0,
        q=q,
        i2=i_squared(q, k),
        k=k,
        method=CE,
    )


def tau2_dl(effects: Sequence) -> float:
    """DerSimonian-Laird moment estimator, truncated at zero."""
    if len(effects) < 2:
        raise TooFewEffects(len(effects))
    y, v = _arrays(effects)
    w = 1.0 / v
    sw = np.sum(w)
    c = sw - np.sum(w**2) / sw
    q = _q_stat(y, v)
    return float(max(0.0, (q - (len(y) - 1)) / c))


def restricted_loglik(tau2: float | np.ndarray, y: np.ndarray, v: np.ndarray):
    """REML log-likelihood of the random-effects model, up to a constant.

    Vectorized over ``tau2`` when given an array.
    """
    t = np.atleast_1d(np.asarray(tau2, dtype=float))[:, None]
    w = 1.0 / (v[None, :] + t)
    sw = w.sum(axis=1)
    mu = (w * y[None, :]).sum(axis=1) / sw
    rss = (w * (y[None, :] - mu[:, None]) ** 2).sum(axis=1)
    ll = -0.5 * (np.log(v[None, :] + t).sum(axis=1) + np.log(sw) + rss)
    return ll if np.ndim(tau2) else float(ll[0])


def tau2_upper(y: np.ndarray) -> float:
    return max(10.0 * float(np.var(y, ddof=1)), 1e-3)


def tau2_reml(effects: Sequence, tol: float = REML_TOL, max_iter: int = REML_MAX_ITER) -> float:
    """REML heterogeneity variance on ``[0, max(10 var(y), 1e-3)]``.

    A 201-point scan picks the bracket holding the best grid value, a second
    201-point scan refines inside it, then bounded Brent polishes. The
    restricted likelihood can have a local maximum at 0 next to a higher
    interior one, so the boundary is chosen only by comparing values.
    """
    if len(effects) < 2:
        raise TooFewEffects(len(effects))
    y, v = _arrays(effects)
    order = np.lexsort((v, y))  # canonical order: result is exactly permutation invariant
    y, v = y[order], v[order]
    lo, hi = 0.0, tau2_upper(y)
    for _ in range(2):
        grid = np.linspace(lo, hi, 201)
        i = int(np.argmax(restricted_loglik(grid, y, v)))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(
        lambda t: -restricted_loglik(t, y, v),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": tol, "maxiter": max_iter},
    )
    if not res.success:
        raise NoConvergence(max_iter)
    at_zero = restricted_loglik(0.0, y, v)
    if at_zero >= -res.fun - 1e-13 * max(1.0, abs(at_zero)):
        return 0.0
    return float(res.x)


def tau2_estimate(effects: Sequence, method: str = "REML") -> float:
    m = method.upper().removeprefix("RE-")
    if m == "DL":
        return tau2_dl(effects)
    if m == "REML":
        return tau2_reml(effects)
    raise ValueError(f"unknown tau2 method {method!r}")


def _method_label(method: str) -> str:
    return RE_DL if method.upper().removeprefix("RE-") == "DL" else RE_REML


def _pool_given_tau2(y: np.ndarray, v: np.ndarray, tau2: float, method: str) -> PooledResult:
    w = 1.0 / (v + tau2)
    sw = float(np.sum(w))
    mu = float(np.sum(w * y) / sw)
    se = math.sqrt(1.0 / sw)
    k = len(y)
    q = _q_stat(y, v)
    pi_low = pi_high = None
    if k >= 3:
        half = t_quantile(k - 2) * math.sqrt(tau2 + se**2)
        pi_low, pi_high = mu - half, mu + half
    return PooledResult(
        estimate=mu,
        se=se,
        ci_low=mu - Z975 * se,
        ci_high=mu + Z975 * se,
        tau2=tau2,
        q=q,
        i2=i_squared(q, k),
        k=k,
        method=method,
        pi_low=pi_low,
        pi_high=pi_high,
    )


def pool_random(effects: Sequence, tau2_method: str = "REML") -> PooledResult:
    """Random-effects pooling with weights ``1 / (v_i + tau2)``.

    The prediction interval is only reported for k >= 3.
    """
    if len(effects) < 2:
        raise TooFewEffects(len(effects))
    y, v = _arrays(effects)
    tau2 = tau2_estimate(effects, tau2_method)
    return _pool_given_tau2(y, v, tau2, _method_label(tau2_method))


def pool_auto(effects: Sequence, tau2_method: str = "REML") -> PooledResult:
    """``pool_random``, falling back to the k = 1 passthrough."""
    if len(effects) == 1:
        return pool_common(effects)
    return pool_random(effects, tau2_method)


def _cluster_index(effects: Sequence, cluster_of: Callable) -> tuple[list, np.ndarray]:
    labels = [cluster_of(e) for e in effects]
    order = {}
    for lab in labels:
        order.setdefault(lab, len(order))
    return list(order), np.array([order[lab] for lab in labels], dtype=int)


def robust_variance(effects: Sequence, cluster_of: Callable, pooled: PooledResult) -> PooledResult:
    """CR1 cluster-robust standard error around ``pooled``'s estimate.

    Weights are the model weights ``1 / (v_i + tau2)`` implied by
    ``pooled``. The CI and prediction interval use t with m - 1 df.
    """
    clusters, idx = _cluster_index(effects, cluster_of)
    m = len(clusters)
    if m < 2:
        raise SingleCluster()
    y, v = _arrays(effects)
    w = 1.0 / (v + pooled.tau2)
    e = y - pooled.estimate
    sums = np.bincount(idx, weights=w * e, minlength=m)
    var = (m / (m - 1)) * float(np.sum(sums**2)) / float(np.sum(w)) ** 2
    se = math.sqrt(var)
    tq = t_quantile(m - 1)
    mu = pooled.estimate
    pi_low = pi_high = None
    if pooled.k >= 3:
        half = tq * math.sqrt(pooled.tau2 + var)
        pi_low, pi_high = mu - half, mu + half
    return replace(
        pooled,
        se=se,
        ci_low=mu - tq * se,
        ci_high=mu + tq * se,
        pi_low=pi_low,
        pi_high=pi_high,
        m=m,
        robust=True,
    )


def aggregate_correlated(effects: Sequence, rho: float, key: str = "") -> AggregatedEffect:
    """Mean of correlated estimates sharing a constant correlation ``rho``.

    The variance is ``1'S1 / n^2`` with ``S_ij = rho sqrt(v_i v_j)`` off
    the diagonal, so ``rho = 1`` with equal variances gains no precision.
    """
    if not 0.0 <= rho <= 1.0:
        raise RhoOutOfRange(rho)
    n = len(effects)
    if n == 0:
        raise EmptyInput()
    y, v = _arrays(effects)
    if n == 1:
        return AggregatedEffect(key=key, yi=float(y[0]), vi=float(v[0]), n_inputs=1)
    s = np.sqrt(v)
    total = float(np.sum(v)) + rho * (float(np.sum(s)) ** 2 - float(np.sum(v)))
    return AggregatedEffect(key=key, yi=float(np.mean(y)), vi=total / n**2, n_inputs=n)


def subgroup_pool(
    effects: Sequence, group_of: Callable, tau2_method: str = "REML"
) -> dict[str, PooledResult]:
    """Pool each group separately; groups come back in sorted order.

    A ``None`` group label is reported as ``"Unreported"``.
    """
    groups: dict[str, list] = defaultdict(list)
    for e in effects:
        g = group_of(e)
        groups["Unreported" if g is None else str(g)].append(e)
    return {g: pool_auto(groups[g], tau2_method) for g in sorted(groups)}


def cumulative_pool(effects: Sequence, tau2_method: str = "REML") -> list[tuple[int, PooledResult]]:
    """Pool everything published up to each distinct year.

    Subsets keep the caller's row order so the last entry is identical,
    bit for bit, to pooling the full list.
    """
    for e in effects:
        if e.year is None:
            raise MissingYear(e.effect_key)
    years = sorted({e.year for e in effects})
    out = []
    for year in years:
        subset = [e for e in effects if e.year <= year]
        out.append((year, pool_auto(subset, tau2_method)))
    return out


@dataclass(frozen=True)
class LocoEntry:
    cluster: str
    pooled: PooledResult
    delta: float

    def to_dict(self) -> dict:
        return {"cluster": self.cluster, "pooled": self.pooled.to_dict(), "delta": self.delta}


def leave_one_cluster_out(
    effects: Sequence, cluster_of: Callable, tau2_method: str = "REML"
) -> list[LocoEntry]:
    """Re-pool with each cluster dropped; ``delta = full - without``.

    Sorted by |delta| descending, ties by cluster label.
    """
    labels = [cluster_of(e) for e in effects]
    clusters = sorted(set(labels), key=str)
    if len(clusters) < 2:
        raise SingleCluster()
    full = pool_auto(effects, tau2_method)
    out = []
    for c in clusters:
        rest = [e for e, lab in zip(effects, labels) if lab != c]
        without = pool_auto(rest, tau2_method)
        out.append(LocoEntry(str(c), without, full.estimate - without.estimate))
    out.sort(key=lambda r: (-abs(r.delta), r.cluster))
    return out


# -- two-level model ---------------------------------------------------------


class _Blocks:
    """Per-cluster pieces of the block-diagonal marginal covariance."""

    def __init__(self, y: np.ndarray, v: np.ndarray, idx: np.ndarray, m: int):
        order = np.argsort(idx, kind="stable")
        self.y = y[order]
        self.v = v[order]
        self.idx = idx[order]
        self.m = m
        self.starts = np.searchsorted(self.idx, np.arange(m))

    def terms(self, s2c: float, s2e: float):
        """(log|V|, 1'V^-1 1, 1'V^-1 y, y'V^-1 y) via Sherman-Morrison per cluster."""
        d = self.v + s2e
        inv_d = 1.0 / d
        a = np.add.reduceat(inv_d, self.starts)  # 1'D^-1 1 per cluster
        b = np.add.reduceat(inv_d * self.y, self.starts)
        c = np.add.reduceat(inv_d * self.y**2, self.starts)
        denom = 1.0 + s2c * a
        logdet = float(np.sum(np.log(d)) + np.sum(np.log(denom)))
        one = float(np.sum(a - s2c * a**2 / denom))
        oy = float(np.sum(b - s2c * a * b / denom))
        yy = float(np.sum(c - s2c * b**2 / denom))
        return logdet, one, oy, yy

    def reml(self, s2c: float, s2e: float) -> float:
        logdet, one, oy, yy = self.terms(s2c, s2e)
        return -0.5 * (logdet + math.log(one) + yy - oy**2 / one)


def multilevel_reml(
    effects: Sequence,
    cluster_of: Callable[..., Hashable],
    tol: float = 1e-10,
    max_iter: int = ML_MAX_ITER,
) -> tuple[float, float, PooledResult]:
    """Fit ``y_i = mu + u_cluster + u_i + e_i`` by REML.

    Returns ``(sigma2_cluster, sigma2_effect, pooled)``; the pooled mean
    and SE are GLS under the fitted covariance. Variance components are
    optimized as squares of free parameters with Nelder-Mead started at
    half the DL tau2 for both. When every cluster holds a single effect
    the two components are confounded: sigma2_cluster is fixed at 0 and
    sigma2_effect equals the single-level REML tau2.
    """
    clusters, idx = _cluster_index(effects, cluster_of)
    m = len(clusters)
    if m < 2:
        raise TooFewClusters(m)
    k = len(effects)
    if k < 3:
        raise TooFewEffects(k, needed=3)
    y, v = _arrays(effects)
    blocks = _Blocks(y, v, idx, m)

    if m == k:
        s2c, s2e = 0.0, tau2_reml(effects)
    else:
        start = math.sqrt(0.5 * tau2_dl(effects))
        step = max(0.25 * start, 0.05)
        simplex = np.array([[start, start], [start + step, start], [start, start + step]])
        res = optimize.minimize(
            lambda p: -blocks.reml(p[0] ** 2, p[1] ** 2),
            x0=np.array([start, start]),
            method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": tol, "maxiter": max_iter, "initial_simplex": simplex},
        )
        if not res.success:
            raise NoConvergence(max_iter)
        s2c, s2e = float(res.x[0] ** 2), float(res.x[1] ** 2)
        s2c, s2e = _snap_to_boundary(blocks, s2c, s2e, tol)

    _, one, oy, _ = blocks.terms(s2c, s2e)
    mu = oy / one
    se = math.sqrt(1.0 / one)
    tau2 = s2c + s2e
    q = _q_stat(y, v)
    pi_low = pi_high = None
    if k >= 3:
        half = t_quantile(k - 2) * math.sqrt(tau2 + se**2)
        pi_low, pi_high = mu - half, mu + half
    pooled = PooledResult(
        estimate=mu,
        se=se,
        ci_low=mu - Z975 * se,
        ci_high=mu + Z975 * se,
        tau2=tau2,
        q=q,
        i2=i_squared(q, k),
        k=k,
        method=RE_REML,
        pi_low=pi_low,
        pi_high=pi_high,
        m=m,
    )
    return s2c, s2e, pooled


def _snap_to_boundary(blocks: _Blocks, s2c: float, s2e: float, tol: float) -> tuple[float, float]:
    """Prefer an exact zero component when the interior optimum is no better.

    Each one-dimensional boundary is refined with bounded Brent so the
    comparison is against that edge's own optimum.
    """
    best = (blocks.reml(s2c, s2e), s2c, s2e)
    hi = max(10.0 * (s2c + s2e), 1e-3)
    for fixed in ("c", "e"):
        if fixed == "c":
            f = lambda t: -blocks.reml(0.0, t)  # noqa: E731
        else:
            f = lambda t: -blocks.reml(t, 0.0)  # noqa: E731
        r = optimize.minimize_scalar(f, bounds=(0.0, hi), method="bounded", options={"xatol": 1e-12})
        t = float(r.x)
        if -f(0.0) >= -r.fun:
            t = 0.0
        cand = (0.0, t) if fixed == "c" else (t, 0.0)
        ll = blocks.reml(*cand)
        if ll >= best[0] - 1e-12 * max(1.0, abs(best[0])):
            best = (ll, *cand)
    return best[1], best[2]

