"""Numerical diagnostics for scalar fields: discrete Laplacian and eikonal
residuals on masked grids, mean-value and Gaussian-smoothing checks,
the Jensen gap of the gradient under a Gaussian weight, and
gradient-constancy certification on connected domains.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.special import gammaln

from .errors import (DisconnectedMask, DimensionMismatch,
                     HaloOutsideEvaluationDomain, NotDifferentiableHere)
from .rng import substream
from .transforms import gradient_many

DEFAULT_SPACING = 0.05

BALL_VOLUME_NOTE = ("unit-ball volume uses pi^(n/2) / Gamma(n/2 + 1); "
                    "the variant pi^(n/2) / Gamma(n/2) agrees with it "
                    "only at n = 2")


@dataclass(frozen=True)
class ResidualReport:
    """Absolute-residual summary over a point set (or one MC estimate)."""
    max_abs: float
    mean_abs: float
    argmax_point: np.ndarray
    tolerance: float
    verdict: str
    stderr: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def rejected(self):
        return self.verdict == "reject"


def _residual_report(values, points, tolerance, stderr=None, details=None):
    values = np.abs(np.asarray(values, dtype=np.float64))
    k = int(np.argmax(values))
    max_abs = float(values[k])
    verdict = "pass" if max_abs <= tolerance else "reject"
    return ResidualReport(max_abs=max_abs, mean_abs=float(values.mean()),
                          argmax_point=np.atleast_2d(points)[k].copy(),
                          tolerance=float(tolerance), verdict=verdict,
                          stderr=stderr, details=details or {})


@dataclass(frozen=True)
class JensenGapReport:
    """lhs = E|grad f(Y)|, rhs = |E grad f(Y)| for Gaussian Y; the gap
    vanishes exactly when the gradient is a.e. constant under the weight."""
    lhs: float
    rhs: float
    gap: float
    se_lhs: float
    se_rhs: float
    se_gap: float
    gradient_mean: np.ndarray   # the estimated constant gradient when gap ~ 0
    details: dict = field(default_factory=dict)


class GridDomain:
    """Axis-aligned lattice restricted by a mask; the masked point set must
    be connected under axis-neighbor adjacency."""

    def __init__(self, box, h=DEFAULT_SPACING, mask="box", mask_params=None):
        box = np.atleast_2d(np.asarray(box, dtype=np.float64))
        if box.ndim != 2 or box.shape[1] != 2:
            raise DimensionMismatch("box must be per-axis [lo, hi] pairs")
        if np.any(box[:, 1] <= box[:, 0]) or h <= 0:
            raise ValueError("box sides and spacing must be positive")
        self.n = box.shape[0]
        self.box = box
        self.h = float(h)
        self.mask_name = mask if isinstance(mask, str) else "custom"
        axes = []
        for lo, hi in box:
            count = int(round((hi - lo) / h)) + 1
            axes.append(lo + h * np.arange(count))
        self.shape = tuple(a.size for a in axes)
        mesh = np.meshgrid(*axes, indexing="ij")
        self.points = np.stack([m.ravel() for m in mesh], axis=1)
        self.mask = self._build_mask(mask, mask_params or {})
        if not np.any(self.mask):
            raise DisconnectedMask("mask selects no grid points")
        grid_mask = self.mask.reshape(self.shape)
        structure = ndimage.generate_binary_structure(self.n, 1)
        _, ncomp = ndimage.label(grid_mask, structure=structure)
        if ncomp != 1:
            raise DisconnectedMask(
                f"mask splits into {ncomp} grid-adjacency components")

    def _build_mask(self, mask, params):
        if callable(mask):
            return np.asarray(mask(self.points), dtype=bool)
        center = np.asarray(params.get("center",
                                       self.box.mean(axis=1)), dtype=np.float64)
        r = np.linalg.norm(self.points - center, axis=1)
        half = float(np.min(self.box[:, 1] - self.box[:, 0]) / 2.0)
        if mask == "box":
            return np.ones(self.points.shape[0], dtype=bool)
        if mask == "ball":
            radius = float(params.get("radius", 0.95 * half))
            return r <= radius
        if mask == "annulus":
            r0 = float(params.get("r0", 0.4 * half))
            r1 = float(params.get("r1", 0.95 * half))
            return (r >= r0) & (r <= r1)
        raise ValueError(f"unknown mask {mask!r}")

    @property
    def masked_points(self):
        return self.points[self.mask]


def _check_halo_defined(u, point_sets):
    for pts in point_sets:
        ok = u.defined_at(pts)
        if not np.all(ok):
            bad = pts[~np.asarray(ok, dtype=bool)][0]
            raise HaloOutsideEvaluationDomain(
                f"{u.name} is not evaluable at stencil point {bad.tolist()}")


def laplacian_residual(u, domain, tolerance=1e-6):
    """|central second-difference Laplacian| at every masked point.

    Exact (to rounding) on fields of degree <= 3, O(h^2) otherwise; the
    stencil reaches one spacing beyond the mask in each axis direction.
    """
    pts = domain.masked_points
    h = domain.h
    shifted = []
    for i in range(domain.n):
        e = np.zeros(domain.n)
        e[i] = h
        shifted.append(pts + e)
        shifted.append(pts - e)
    _check_halo_defined(u, [pts] + shifted)
    center = u.scalar_eval(pts)
    acc = np.zeros(pts.shape[0])
    for i in range(domain.n):
        acc += (u.scalar_eval(shifted[2 * i]) - 2.0 * center
                + u.scalar_eval(shifted[2 * i + 1])) / (h * h)
    return _residual_report(acc, pts, tolerance,
                            details=dict(points=int(pts.shape[0]),
                                         spacing=h))


def eikonal_residual(u, domain, target, tolerance=1e-6):
    """| |grad u| - target | over masked points.

    Points where u has no derivative are excluded from the sweep and
    recorded in the report details.
    """
    if target < 0:
        raise ValueError("target gradient norm must be non-negative")
    pts = domain.masked_points
    diff_ok = u.differentiable_at(pts)
    excluded = int(np.sum(~diff_ok))
    use = pts[diff_ok]
    if use.shape[0] == 0:
        raise NotDifferentiableHere(
            f"{u.name} has no derivative anywhere on the mask")
    norms = np.linalg.norm(gradient_many(u, use), axis=1)
    return _residual_report(
        norms - target, use, tolerance,
        details=dict(points=int(use.shape[0]), excluded_points=excluded,
                     target=float(target)))


def gradient_constancy(u, domain, tolerance=1e-4):
    """Mean gradient p over the connected mask and max_x |grad u(x) - p|.

    A pass certifies u is affine with slope p on the domain; connectivity
    of the mask (enforced by GridDomain, DisconnectedMask otherwise) is
    what lets one constant propagate everywhere.
    """
    pts = domain.masked_points
    grads = gradient_many(u, pts)
    p = grads.mean(axis=0)
    dev = np.linalg.norm(grads - p, axis=1)
    report = _residual_report(dev, pts, tolerance,
                              details=dict(points=int(pts.shape[0]),
                                           slope=[float(v) for v in p]))
    return p, report


def ball_volume(n):
    """Lebesgue measure of the unit ball: pi^(n/2) / Gamma(n/2 + 1)."""
    if n < 1:
        raise ValueError("dimension must be positive")
    return float(np.exp(0.5 * n * np.log(np.pi) - gammaln(n / 2.0 + 1.0)))


def ball_volume_mc(n, n_mc=10 ** 6, seed=0):
    """Cube-rejection Monte Carlo estimate of ball_volume(n) with its
    standard error; slow reference used to cross-check the formula."""
    rng = substream(seed, f"ball-volume-mc[{n}]")
    inside = 0
    chunk = 10 ** 6
    left = int(n_mc)
    while left > 0:
        take = min(chunk, left)
        X = rng.uniform(-1.0, 1.0, size=(take, n))
        inside += int(np.sum(np.einsum("ij,ij->i", X, X, optimize=False) <= 1.0))
        left -= take
    frac = inside / n_mc
    cube = 2.0 ** n
    se = cube * np.sqrt(max(frac * (1.0 - frac), 0.0) / n_mc)
    return cube * frac, float(se)


def sample_in_ball(center, r, count, rng):
    """Uniform draws in the ball of radius r: Gaussian direction times
    radius r * U^(1/n); exact in any dimension, no rejection."""
    center = np.asarray(center, dtype=np.float64)
    n = center.size
    z = rng.normal(size=(count, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    radii = r * rng.uniform(size=count) ** (1.0 / n)
    return center + radii[:, None] * z


def mean_value_check(u, x, r, n_mc=10 ** 6, seed=0):
    """Monte Carlo ball average of u around x against u(x).

    Zero residual (within MC error) is the mean-value property, the
    defining trait of harmonic fields.
    """
    x = np.asarray(x, dtype=np.float64)
    rng = substream(seed, "mean-value")
    pts = sample_in_ball(x, r, int(n_mc), rng)
    vals = u.scalar_eval(pts)
    avg = float(vals.mean())
    ux = u.scalar_eval(x)
    stderr = float(vals.std(ddof=1) / np.sqrt(n_mc))
    resid = avg - ux
    return _residual_report(
        [resid], [x], tolerance=3.0 * stderr, stderr=stderr,
        details=dict(ball_average=avg, center_value=float(ux),
                     radius=float(r), n_mc=int(n_mc)))


def smoothing_representation_check(f, law, tau, x, mu, n_mc=10 ** 6, seed=0):
    """Checks f(x) = -tau*mu + E[f(Y)] with Y ~ N(x + tau b, tau A).

    The residual detects a wrong mu by exactly the offset tau*(mu_true - mu).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (law.n,):
        raise DimensionMismatch("point dimension does not match law")
    rng = substream(seed, "smoothing-representation")
    z = rng.normal(size=(int(n_mc), law.n))
    y = x + tau * law.b + np.sqrt(tau) * (z @ law.L.T)
    vals = f.scalar_eval(y)
    est = float(vals.mean()) - tau * mu
    stderr = float(vals.std(ddof=1) / np.sqrt(n_mc))
    resid = est - f.scalar_eval(x)
    return _residual_report(
        [resid], [x], tolerance=3.0 * stderr, stderr=stderr,
        details=dict(smoothed_value=est, center_value=float(f.scalar_eval(x)),
                     tau=float(tau), mu=float(mu), n_mc=int(n_mc)))


def jensen_gap(f, law, tau, x, n_mc=10 ** 6, seed=0):
    """E|grad f(Y)| - |E grad f(Y)| for Gaussian Y centered at x + tau b.

    Strict convexity of the norm makes the gap zero iff the gradient is
    a.e. constant under the weight; a positive gap certifies that f is not
    affine there.  Samples landing exactly on non-differentiable points
    (a null set for catalog fields) are redrawn.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (law.n,):
        raise DimensionMismatch("point dimension does not match law")
    rng = substream(seed, "jensen-gap")
    z = rng.normal(size=(int(n_mc), law.n))
    y = x + tau * law.b + np.sqrt(tau) * (z @ law.L.T)
    for _ in range(100):
        bad = ~f.differentiable_at(y)
        if not np.any(bad):
            break
        znew = rng.normal(size=(int(bad.sum()), law.n))
        y[bad] = x + tau * law.b + np.sqrt(tau) * (znew @ law.L.T)
    else:
        raise NotDifferentiableHere(
            f"{f.name} keeps hitting non-differentiable points")
    grads = gradient_many(f, y)
    norms = np.linalg.norm(grads, axis=1)
    # means are anchored to the first sample so that an exactly constant
    # gradient yields gap 0.0 instead of summation-rounding noise
    lhs = float(norms[0] + (norms - norms[0]).mean())
    se_lhs = float(norms.std(ddof=1) / np.sqrt(n_mc))
    gbar = grads[0] + (grads - grads[0]).mean(axis=0)
    rhs = float(np.linalg.norm(gbar))
    # conservative bound: |mean| varies at most by the full covariance trace
    se_rhs = float(np.sqrt(np.sum(grads.var(axis=0, ddof=1)) / n_mc))
    gap = lhs - rhs
    se_gap = float(np.sqrt(se_lhs ** 2 + se_rhs ** 2))
    return JensenGapReport(lhs=lhs, rhs=rhs, gap=gap, se_lhs=se_lhs,
                           se_rhs=se_rhs, se_gap=se_gap, gradient_mean=gbar,
                           details=dict(tau=float(tau), n_mc=int(n_mc)))
