"""Statistical battery deciding whether a path ensemble behaves like a
Brownian motion: Gaussian marginals, stationary and independent increments,
linear quadratic variation, and a state-independent conditional mean.

Two-sample and independence nulls are calibrated by permutation; the
marginal goodness-of-fit null by parametric bootstrap.  Every p-value is
deterministic given (data, seed).
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist, pdist
from scipy.special import gammaln, hyp1f1
from scipy.stats import norm

from .errors import (DegenerateDesign, DegenerateSample, DimensionMismatch,
                     NotPositiveDefinite)
from .process import cholesky
from .rng import substream

DEFAULT_ALPHA = 0.01
DEFAULT_BOOTSTRAP = 200
DEFAULT_PERMUTATIONS = 500
# statistics that scan all pairs run on at most this many points per sample
DEFAULT_MAX_POINTS = 1000
MARGINAL_TIMES = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class TestReport:
    """One diagnostic: p-valued (reject iff p < threshold) or residual
    (reject iff statistic > threshold)."""
    name: str
    statistic: float
    p_value: float | None
    threshold: float
    verdict: str
    details: dict = field(default_factory=dict)

    @property
    def rejected(self):
        return self.verdict == "reject"


def _p_report(name, statistic, p_value, alpha, details):
    verdict = "reject" if p_value < alpha else "pass"
    return TestReport(name=name, statistic=float(statistic),
                      p_value=float(p_value), threshold=float(alpha),
                      verdict=verdict, details=details)


@dataclass(frozen=True)
class QVReport:
    """Realized quadratic variation against the line sigma^2 * t."""
    sigma2: float                  # slope from the summed-coordinate curve
    sigma2_per_coord: np.ndarray
    times: np.ndarray
    qv_curve: np.ndarray           # ensemble-average realized QV at each time
    residual: float                # max_t |QV_t - sigma2 t| / (1 + sigma2 t)
    threshold: float
    verdict: str
    details: dict = field(default_factory=dict)

    @property
    def rejected(self):
        return self.verdict == "reject"

    def to_test_report(self):
        d = dict(self.details)
        d.update(sigma2=float(self.sigma2),
                 sigma2_per_coord=[float(v) for v in self.sigma2_per_coord])
        return TestReport(name="qv_linearity", statistic=float(self.residual),
                          p_value=None, threshold=float(self.threshold),
                          verdict=self.verdict, details=d)


@dataclass(frozen=True)
class DriftEstimate:
    mu_hat: np.ndarray     # per output coordinate
    se: np.ndarray


# ---------------------------------------------------------------------------
# permutation kernels: one statistic per permutation row, each row
# accumulated sequentially so results do not depend on thread count

@njit(parallel=True, cache=True)
def _energy_perm_stats(D, perms, n):
    # D: (T, T) distances over the pooled sample, X first; perms: (P, T)
    P, T = perms.shape
    m = T - n
    out = np.empty(P)
    for p in prange(P):
        s_xx = 0.0
        s_yy = 0.0
        s_xy = 0.0
        for a in range(T):
            ia = perms[p, a]
            a_in_x = a < n
            for c in range(a + 1, T):
                d = D[ia, perms[p, c]]
                if a_in_x and (c < n):
                    s_xx += d
                elif (not a_in_x) and (c >= n):
                    s_yy += d
                else:
                    s_xy += d
        out[p] = 2.0 * s_xy / (n * m) - 2.0 * s_xx / (n * n) - 2.0 * s_yy / (m * m)
    return out


@njit(parallel=True, cache=True)
def _dcov_perm_stats(A, B, perms):
    # A, B: double-centered distance matrices; permuting B's rows/columns
    # together realizes the independence null
    P, n = perms.shape
    out = np.empty(P)
    for p in prange(P):
        s = 0.0
        for i in range(n):
            pi = perms[p, i]
            for j in range(n):
                s += A[i, j] * B[pi, perms[p, j]]
        out[p] = s / (n * n)
    return out


def _permutation_block(rng, count, size):
    perms = np.empty((count + 1, size), dtype=np.int64)
    perms[0] = np.arange(size)
    for p in range(1, count + 1):
        perms[p] = rng.permutation(size)
    return perms


def _maybe_subsample(X, max_points, rng):
    if X.shape[0] <= max_points:
        return X
    idx = rng.choice(X.shape[0], size=max_points, replace=False)
    return X[idx]


def _as_2d(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return X


# ---------------------------------------------------------------------------
# energy goodness of fit against the fitted Gaussian

def _e_dist_to_standard_normal(z):
    # E|a - Z| for Z ~ N(0, I_d) at each row a, via the confluent
    # hypergeometric closed form; exact, no reference-sample noise
    d = z.shape[1]
    r2 = np.einsum("ij,ij->i", z, z, optimize=False)
    c = np.sqrt(2.0) * np.exp(gammaln((d + 1) / 2.0) - gammaln(d / 2.0))
    return c * hyp1f1(-0.5, d / 2.0, -0.5 * r2)


def _e_dist_pair_standard_normal(d):
    # E|Z - Z'| for independent standard normal pairs
    return 2.0 * np.exp(gammaln((d + 1) / 2.0) - gammaln(d / 2.0))


def _standardize(X):
    mu = X.mean(axis=0)
    C = np.cov(X, rowvar=False, ddof=1).reshape(X.shape[1], X.shape[1])
    try:
        L = cholesky(C)
    except NotPositiveDefinite as e:
        raise DegenerateSample(f"sample covariance is singular: {e}") from e
    return solve_triangular(L, (X - mu).T, lower=True).T


def _energy_gof_stat(X):
    z = _standardize(X)
    n, d = z.shape
    term_point = 2.0 * _e_dist_to_standard_normal(z).mean()
    term_pair = _e_dist_pair_standard_normal(d)
    term_sample = 2.0 * pdist(z).sum() / (n * n)
    return term_point - term_pair - term_sample


def gaussian_marginal_test(samples, t, alpha=DEFAULT_ALPHA,
                           bootstrap=DEFAULT_BOOTSTRAP,
                           max_points=DEFAULT_MAX_POINTS, seed=0):
    """Does the time-t marginal look Gaussian?

    Fits mean and covariance, standardizes, and compares the sample to the
    standard normal with the energy statistic (closed-form expectations).
    The statistic is affine invariant, so the parametric bootstrap draws
    standard normal replicates and standardizes each by its own fit.
    """
    X = _as_2d(samples)
    if X.shape[0] < 100:
        raise ValueError("marginal test needs at least 100 samples")
    rng = substream(seed, f"marginal-gof[{float(t)!r}]")
    Xs = _maybe_subsample(X, max_points, rng)
    n, d = Xs.shape
    obs = _energy_gof_stat(Xs)
    count = 0
    for _ in range(bootstrap):
        if _energy_gof_stat(rng.normal(size=(n, d))) >= obs:
            count += 1
    p = (1 + count) / (bootstrap + 1)
    return _p_report(f"gaussian_marginal[t={float(t):g}]", obs, p, alpha,
                     dict(t=float(t), n_used=int(n), dim=int(d),
                          bootstrap=int(bootstrap)))


def two_sample_test(X, Y, alpha=DEFAULT_ALPHA,
                    permutations=DEFAULT_PERMUTATIONS,
                    max_points=DEFAULT_MAX_POINTS, seed=0,
                    name="two_sample", stage=None):
    """Energy-distance two-sample test with permutation calibration."""
    X = _as_2d(X)
    Y = _as_2d(Y)
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(
            f"samples have dimensions {X.shape[1]} and {Y.shape[1]}")
    if X.shape[0] < 100 or Y.shape[0] < 100:
        raise ValueError("two-sample test needs at least 100 points per side")
    rng = substream(seed, stage or name)
    Xs = _maybe_subsample(X, max_points, rng)
    Ys = _maybe_subsample(Y, max_points, rng)
    n = Xs.shape[0]
    pooled = np.vstack([Xs, Ys])
    D = cdist(pooled, pooled)
    perms = _permutation_block(rng, permutations, pooled.shape[0])
    stats = _energy_perm_stats(D, perms, n)
    p = (1 + int(np.sum(stats[1:] >= stats[0]))) / (permutations + 1)
    return _p_report(name, stats[0], p, alpha,
                     dict(n_x=int(n), n_y=int(Ys.shape[0]),
                          permutations=int(permutations)))


def _double_center(D):
    row = D.mean(axis=1, keepdims=True)
    col = D.mean(axis=0, keepdims=True)
    return D - row - col + D.mean()


def increment_independence_test(ensemble, window1, window2,
                                alpha=DEFAULT_ALPHA,
                                permutations=DEFAULT_PERMUTATIONS,
                                max_points=DEFAULT_MAX_POINTS, seed=None):
    """Distance-covariance test between increments over two windows.

    The null (independence) only holds when the windows are disjoint;
    overlapping windows are allowed and should reject.
    """
    s, t = window1
    u, v = window2
    U = ensemble.increments(s, t)
    V = ensemble.increments(u, v)
    if seed is None:
        seed = ensemble.seed
    name = f"increment_independence[({s:g},{t:g})x({u:g},{v:g})]"
    rng = substream(seed, name)
    if U.shape[0] > max_points:
        idx = rng.choice(U.shape[0], size=max_points, replace=False)
        U, V = U[idx], V[idx]
    A = _double_center(cdist(U, U))
    B = _double_center(cdist(V, V))
    perms = _permutation_block(rng, permutations, U.shape[0])
    stats = _dcov_perm_stats(A, B, perms)
    p = (1 + int(np.sum(stats[1:] >= stats[0]))) / (permutations + 1)
    return _p_report(name, stats[0], p, alpha,
                     dict(window1=[float(s), float(t)],
                          window2=[float(u), float(v)],
                          n_used=int(U.shape[0]),
                          permutations=int(permutations)))


def stationarity_test(ensemble, delta, t1, t2, alpha=DEFAULT_ALPHA,
                      permutations=DEFAULT_PERMUTATIONS,
                      max_points=DEFAULT_MAX_POINTS, seed=None):
    """Two-sample energy test between increments over [t1, t1+delta] and
    [t2, t2+delta]; under the Brownian null their laws coincide."""
    inc1 = ensemble.increments(t1, t1 + delta)
    inc2 = ensemble.increments(t2, t2 + delta)
    if seed is None:
        seed = ensemble.seed
    name = f"stationarity[d={delta:g},t1={t1:g},t2={t2:g}]"
    return two_sample_test(inc1, inc2, alpha=alpha, permutations=permutations,
                           max_points=max_points, seed=seed, name=name)


# ---------------------------------------------------------------------------
# quadratic variation

def _qv_accumulate(paths, chunk_rows):
    """Per-step sums over paths: squared-norm, per-coord square, mean, and
    outer products.  Streamed so no (N, K, d) temporary outlives a chunk."""
    N, k1, d = paths.shape
    K = k1 - 1
    sq_coord = np.zeros((K, d))     # sum_i dx^2 per step, coord
    lin = np.zeros((K, d))          # sum_i dx per step
    outer = np.zeros((K, d, d))     # sum_i dx dx' per step
    for lo in range(0, N, chunk_rows):
        hi = min(N, lo + chunk_rows)
        dx = np.diff(paths[lo:hi], axis=1)
        sq_coord += np.einsum("ijk,ijk->jk", dx, dx, optimize=False)
        lin += np.einsum("ijk->jk", dx, optimize=False)
        outer += np.einsum("ijk,ijl->jkl", dx, dx, optimize=False)
    return sq_coord, lin, outer


def _qv_threshold(times, N, drift_hat, cov_hat, runs, seed):
    """99th percentile of the linearity residual over surrogate true-BM runs
    with the estimated law, at matching (N, K).

    The ensemble-average per-step squared increment splits exactly into a
    scaled chi-square(N-1) part plus the squared shifted sample mean, so each
    surrogate run needs only O(K d) draws instead of N paths.
    """
    dt = np.diff(times)
    K = dt.size
    lam, U = np.linalg.eigh(cov_hat)
    lam = np.clip(lam, 0.0, None)
    d = lam.size
    rng = substream(seed, "qv-calibration")
    gammas = rng.chisquare(max(N - 1, 1), size=(runs, K, d))
    zs = rng.normal(size=(runs, K, d))
    # sample-mean part: w ~ N(0, cov/N) built from the eigenbasis
    w = np.einsum("rkd,cd->rkc", zs * np.sqrt(lam / N), U, optimize=False)
    shift = dt[None, :, None] * drift_hat[None, None, :] \
        + np.sqrt(dt)[None, :, None] * w
    ssq = dt[None, :] * (gammas @ lam) \
        + N * np.einsum("rkc,rkc->rk", shift, shift, optimize=False)
    curves = np.concatenate([np.zeros((runs, 1)), np.cumsum(ssq / N, axis=1)],
                            axis=1)
    T = times[-1]
    sig2 = curves[:, -1] / T
    resid = np.abs(curves - sig2[:, None] * times[None, :]) \
        / (1.0 + sig2[:, None] * times[None, :])
    return float(np.quantile(resid.max(axis=1), 0.99))


def qv_linearity(ensemble, calibration_runs=100, seed=None):
    """Realized quadratic variation and its deviation from a line.

    sigma2 is the slope QV_T / T of the ensemble-average realized QV; the
    rejection threshold is calibrated on surrogate Brownian runs with the
    increment law estimated from the data, at the same (N, K).
    """
    if ensemble.grid.K < 100:
        raise ValueError("quadratic variation needs at least 100 steps")
    N, k1, d = ensemble.paths.shape
    times = ensemble.grid.times
    T = times[-1]
    chunk_rows = max(1, int(8e6 // (k1 * d)))
    sq_coord, lin, outer = _qv_accumulate(ensemble.paths, chunk_rows)

    mean_sq = sq_coord.sum(axis=1) / N             # per-step E|dX|^2
    curve = np.concatenate([[0.0], np.cumsum(mean_sq)])
    sigma2 = float(curve[-1] / T)
    sigma2_coord = sq_coord.sum(axis=0) / (N * T)
    resid = float(np.max(np.abs(curve - sigma2 * times)
                         / (1.0 + sigma2 * times)))

    # plug-in increment law for the calibration surrogate
    step_mean = lin / N
    drift_hat = step_mean.sum(axis=0) / T
    cov_hat = (outer / N - np.einsum("jk,jl->jkl", step_mean, step_mean,
                                     optimize=False)).sum(axis=0) / T
    cov_hat = 0.5 * (cov_hat + cov_hat.T)
    if seed is None:
        seed = ensemble.seed
    threshold = _qv_threshold(times, N, drift_hat, cov_hat,
                              calibration_runs, seed)
    verdict = "reject" if resid > threshold else "pass"
    return QVReport(sigma2=sigma2, sigma2_per_coord=sigma2_coord,
                    times=times, qv_curve=curve, residual=resid,
                    threshold=threshold, verdict=verdict,
                    details=dict(n_paths=int(N), steps=int(k1 - 1),
                                 calibration_runs=int(calibration_runs)))


# ---------------------------------------------------------------------------
# conditional mean

def _cond_mean_features(states):
    n, d = states.shape
    r = np.linalg.norm(states, axis=1)
    cols = [np.ones(n)]
    cols.extend(states[:, c] for c in range(d))
    cols.extend(states[:, c] ** 2 for c in range(d))
    cols.append(r)
    return np.stack(cols, axis=1)


def conditional_mean_test(ensemble_in, ensemble_out, s, t,
                          alpha=DEFAULT_ALPHA):
    """Regression check that E[f(B_t) - f(B_s) | B_s] is constant.

    Regresses the increment of the output process on [1, x_c, x_c^2, |x|]
    of the conditioning state; mu_hat = intercept / (t - s).  Rejects when
    any slope is significant under heteroskedasticity-robust standard
    errors, Bonferroni-corrected over slopes and output coordinates.
    """
    if ensemble_in.N != ensemble_out.N:
        raise DimensionMismatch("ensembles are not index-aligned")
    if not np.array_equal(ensemble_in.grid.times, ensemble_out.grid.times):
        raise DimensionMismatch("ensembles live on different grids")
    i, j = ensemble_in.grid.index_of(s), ensemble_in.grid.index_of(t)
    if i >= j:
        raise ValueError("need s < t")
    states = ensemble_in.paths[:, i, :]
    Y = ensemble_out.paths[:, j, :] - ensemble_out.paths[:, i, :]
    F = _cond_mean_features(states)
    n, p = F.shape
    m = Y.shape[1]
    G = np.einsum("ij,ik->jk", F, F, optimize=False)
    try:
        cholesky(G)
    except NotPositiveDefinite as e:
        raise DegenerateDesign(f"feature matrix is rank-deficient: {e}") from e
    FtY = np.einsum("ij,ik->jk", F, Y, optimize=False)
    beta = np.linalg.solve(G, FtY)                       # (p, m)
    resid = Y - F @ beta
    Ginv = np.linalg.inv(G)
    se = np.empty((p, m))
    for c in range(m):
        meat = np.einsum("ij,i,ik->jk", F, resid[:, c] ** 2, F,
                         optimize=False)
        V = Ginv @ meat @ Ginv
        se[:, c] = np.sqrt(np.clip(np.diag(V), 0.0, None))
    dt = float(ensemble_in.grid.times[j] - ensemble_in.grid.times[i])
    mu_hat = beta[0] / dt
    mu_se = se[0] / dt
    zvals = np.abs(beta[1:]) / np.maximum(se[1:], 1e-300)
    slope_p = 2.0 * norm.sf(zvals)
    n_slopes = slope_p.size
    p_bonf = float(min(1.0, n_slopes * slope_p.min()))
    report = _p_report(
        f"conditional_mean[s={s:g},t={t:g}]",
        float(zvals.max()), p_bonf, alpha,
        dict(mu_hat=[float(v) for v in mu_hat],
             mu_se=[float(v) for v in mu_se],
             slopes=int(n_slopes), n=int(n)))
    return DriftEstimate(mu_hat=mu_hat, se=mu_se), report


# ---------------------------------------------------------------------------
# suite

def holm_rejections(named_pvalues, alpha):
    """Step-down Holm correction; returns the set of rejected names.

    Strict inequality matches the single-test rule (reject iff p < alpha),
    so a correction can never reject what uncorrected testing would not.
    """
    items = sorted(named_pvalues, key=lambda kv: kv[1])
    m = len(items)
    rejected = set()
    for rank, (name, p) in enumerate(items):
        if p < alpha / (m - rank):
            rejected.add(name)
        else:
            break
    return rejected


@dataclass(frozen=True)
class SuiteResult:
    reports: list
    qv: QVReport
    drift: DriftEstimate
    alpha: float
    corrected_rejections: list
    verdict: str


def conformance_suite(ensemble, alpha=DEFAULT_ALPHA,
                      marginal_times=MARGINAL_TIMES,
                      stationarity_windows=(1.0, 0.0, 1.0),
                      independence_windows=((0.0, 1.0), (1.0, 2.0)),
                      conditional_mean_window=(1.0, 2.0),
                      bootstrap=DEFAULT_BOOTSTRAP,
                      permutations=DEFAULT_PERMUTATIONS,
                      max_points=DEFAULT_MAX_POINTS, seed=None):
    """Full Brownian-conformance battery on one ensemble.

    Conditioning for the conditional-mean component uses the ensemble's own
    state (its natural filtration); verdicts are relative to it.  Holm's
    correction is applied across all p-valued components at family level
    alpha; the QV component is residual-thresholded.  Overall verdict is
    pass iff no corrected rejection and the QV residual is below threshold.
    """
    if seed is None:
        seed = ensemble.seed
    reports = []
    for t in marginal_times:
        reports.append(gaussian_marginal_test(
            ensemble.marginal(t), t, alpha=alpha, bootstrap=bootstrap,
            max_points=max_points, seed=seed))
    delta, t1, t2 = stationarity_windows
    reports.append(stationarity_test(
        ensemble, delta, t1, t2, alpha=alpha, permutations=permutations,
        max_points=max_points, seed=seed))
    reports.append(increment_independence_test(
        ensemble, independence_windows[0], independence_windows[1],
        alpha=alpha, permutations=permutations, max_points=max_points,
        seed=seed))
    s, t = conditional_mean_window
    drift, cm_report = conditional_mean_test(ensemble, ensemble, s, t,
                                             alpha=alpha)
    reports.append(cm_report)
    qv = qv_linearity(ensemble, seed=seed)
    reports.append(qv.to_test_report())

    named = [(r.name, r.p_value) for r in reports if r.p_value is not None]
    rejected = holm_rejections(named, alpha)
    corrected = sorted(rejected)
    verdict = "pass" if not rejected and not qv.rejected else "reject"
    return SuiteResult(reports=reports, qv=qv, drift=drift, alpha=alpha,
                       corrected_rejections=corrected, verdict=verdict)
