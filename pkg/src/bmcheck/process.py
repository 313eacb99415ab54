"""Exact simulation of Brownian motion with drift and covariance on a grid.

Increments over [t_i, t_{i+1}] are drawn from their exact Gaussian law
(no Euler discretization error), one Philox substream per (path, step),
so ensembles are bit-identical across thread counts and chunk layouts.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange
from scipy.linalg import solve_triangular

from .errors import (DimensionMismatch, NotPositiveDefinite,
                     SingularCovariance, UnsupportedFormat, WindowNotOnGrid)
from .rng import _philox_block, derive_key32_pair

_TWO_NEG64 = 2.0 ** -64
_TWO_PI = 2.0 * np.pi

# grid times are matched with this relative slack; spacings are far coarser
_TIME_ATOL = 1e-9


def cholesky(A):
    """Lower-triangular L with L @ L.T == A.

    Pivot tolerance is 1e-10 times the largest diagonal entry, so inputs
    that are singular (or indefinite) at working precision raise
    NotPositiveDefinite instead of producing garbage factors.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {A.shape}")
    if not np.array_equal(A, A.T):
        raise ValueError("matrix is not symmetric")
    n = A.shape[0]
    tol = 1e-10 * max(float(np.max(np.diag(A))), 0.0)
    L = np.zeros((n, n))
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if d <= tol:
            raise NotPositiveDefinite(
                f"pivot {d:.3e} at column {j} is at or below tolerance {tol:.3e}")
        L[j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            L[i, j] = (A[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return L


@dataclass(frozen=True)
class GaussianLaw:
    """Increment law: over [s, t] the increment is N((t-s) b, (t-s) A)."""
    n: int
    b: np.ndarray
    A: np.ndarray
    non_singular: bool = True

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.float64))
        object.__setattr__(self, "A", np.asarray(self.A, dtype=np.float64))
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if self.b.shape != (self.n,):
            raise DimensionMismatch(
                f"drift shape {self.b.shape} does not match n={self.n}")
        if self.A.shape != (self.n, self.n):
            raise DimensionMismatch(
                f"covariance shape {self.A.shape} does not match n={self.n}")
        if not np.array_equal(self.A, self.A.T):
            raise ValueError("covariance matrix is not symmetric")
        if self.non_singular:
            # factorization failure must surface at construction time
            object.__setattr__(self, "_L", cholesky(self.A))
        else:
            object.__setattr__(self, "_L", None)

    @property
    def L(self):
        if self._L is None:
            object.__setattr__(self, "_L", cholesky(self.A))
        return self._L


def standard_law(n):
    return GaussianLaw(n=n, b=np.zeros(n), A=np.eye(n))


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times starting at 0."""
    times: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times",
                           np.asarray(self.times, dtype=np.float64))
        t = self.times
        if t.ndim != 1 or t.size < 2:
            raise ValueError("grid needs at least two times")
        if t[0] != 0.0:
            raise ValueError("grid must start at 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("grid times must be strictly increasing")

    @classmethod
    def regular(cls, T, K):
        if T <= 0 or K < 1:
            raise ValueError("need T > 0 and K >= 1")
        return cls(np.arange(K + 1) * (T / K))

    @property
    def K(self):
        return self.times.size - 1

    @property
    def horizon(self):
        return float(self.times[-1])

    def index_of(self, t):
        """Index of the grid point equal to t, or WindowNotOnGrid."""
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > _TIME_ATOL * (1.0 + abs(t)):
            raise WindowNotOnGrid(f"time {t} is not a grid point")
        return idx


@njit(parallel=True, cache=True)
def _build_paths(out, dt, sqrt_dt, drift, L, origin, key0, key1, path_offset):
    # out: (paths, K+1, d).  Each (path, step, block) owns one Philox block;
    # the increment is dt*drift + sqrt(dt) * L @ z, accumulated in place.
    n_paths, k1, dim = out.shape
    nsteps = k1 - 1
    nblk = (dim + 1) // 2
    for i in prange(n_paths):
        z = np.empty(dim)
        gp = np.uint64(path_offset + i)
        for c in range(dim):
            out[i, 0, c] = origin[c]
        for j in range(nsteps):
            for blk in range(nblk):
                w0, w1, w2, w3 = _philox_block(
                    gp, np.uint64(j), np.uint64(blk), np.uint64(0),
                    np.uint64(key0), np.uint64(key1))
                x1 = (w0 << np.uint64(32)) | w1
                x2 = (w2 << np.uint64(32)) | w3
                u1 = (np.float64(x1) + 1.0) * _TWO_NEG64
                u2 = np.float64(x2) * _TWO_NEG64
                r = np.sqrt(-2.0 * np.log(u1))
                z[2 * blk] = r * np.cos(_TWO_PI * u2)
                if 2 * blk + 1 < dim:
                    z[2 * blk + 1] = r * np.sin(_TWO_PI * u2)
            for c in range(dim):
                acc = dt[j] * drift[c]
                for c2 in range(c + 1):
                    acc += sqrt_dt[j] * L[c, c2] * z[c2]
                out[i, j + 1, c] = out[i, j, c] + acc


@dataclass(frozen=True)
class PathEnsemble:
    """N simulated paths of one process on a shared grid."""
    law_dimension: int
    grid: TimeGrid
    paths: np.ndarray        # (N, K+1, d)
    seed: int
    origin: np.ndarray       # value at t_0, shared by every path

    def __post_init__(self):
        object.__setattr__(self, "paths", np.asarray(self.paths, dtype=np.float64))
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        N, k1, d = self.paths.shape
        if N < 1:
            raise ValueError("ensemble needs at least one path")
        if d != self.law_dimension:
            raise DimensionMismatch(
                f"paths carry dimension {d}, declared {self.law_dimension}")
        if k1 != self.grid.times.size:
            raise DimensionMismatch(
                f"paths have {k1} time slots, grid has {self.grid.times.size}")
        if self.origin.shape != (d,):
            raise DimensionMismatch("origin dimension mismatch")
        if not np.array_equal(self.paths[:, 0, :],
                              np.broadcast_to(self.origin, (N, d))):
            raise ValueError("path values at t_0 differ from origin")

    @property
    def N(self):
        return self.paths.shape[0]

    def marginal(self, t):
        """Values at grid time t, shape (N, d)."""
        return self.paths[:, self.grid.index_of(t), :]

    def increments(self, s, t):
        """X_t - X_s per path, shape (N, d); endpoints must be grid points."""
        i, j = self.grid.index_of(s), self.grid.index_of(t)
        if i >= j:
            raise WindowNotOnGrid(f"window ({s}, {t}) is not increasing")
        return self.paths[:, j, :] - self.paths[:, i, :]


def sample_paths(law, grid, N, origin=None, seed=0):
    """Simulate N exact Brownian paths of the given law on the grid.

    Every (path, step) increment comes from its own counter-based
    substream keyed by (seed, path index, step index); output is
    bit-identical for the same arguments regardless of thread count.
    """
    if N < 1:
        raise ValueError("need N >= 1")
    if origin is None:
        origin = np.zeros(law.n)
    origin = np.asarray(origin, dtype=np.float64)
    if origin.shape != (law.n,):
        raise DimensionMismatch("origin dimension does not match law")
    L = law.L  # may raise NotPositiveDefinite
    dt = np.diff(grid.times)
    out = np.empty((N, grid.times.size, law.n))
    k0, k1 = derive_key32_pair(seed, "paths")
    _build_paths(out, dt, np.sqrt(dt), law.b, L, origin,
                 np.uint64(k0), np.uint64(k1), np.uint64(0))
    return PathEnsemble(law_dimension=law.n, grid=grid, paths=out,
                        seed=int(seed), origin=origin)


def apply_transform(ensemble, f):
    """Pointwise image ensemble: same grid, values f(X_t).

    Evaluation is chunked over paths to bound temporary memory; values are
    identical to a single whole-array call because f evaluates elementwise.
    """
    if f.n_in != ensemble.law_dimension:
        raise DimensionMismatch(
            f"transform expects dimension {f.n_in}, "
            f"ensemble has {ensemble.law_dimension}")
    N, k1, d = ensemble.paths.shape
    m = f.n_out
    out = np.empty((N, k1, m))
    # ~4e6 points per chunk keeps eval temporaries around a few hundred MB
    chunk = max(1, int(4e6 // k1))
    for lo in range(0, N, chunk):
        hi = min(N, lo + chunk)
        flat = ensemble.paths[lo:hi].reshape(-1, d)
        out[lo:hi] = f.eval(flat).reshape(hi - lo, k1, m)
    return PathEnsemble(law_dimension=m, grid=ensemble.grid, paths=out,
                        seed=ensemble.seed, origin=f.eval(ensemble.origin))


def transition_density(law, tau, x, y):
    """Gaussian transition density at y after time tau started at x.

    (2 pi tau)^(-n/2) det(A)^(-1/2)
        * exp(-(1/(2 tau)) <y - b tau - x, A^(-1) (y - b tau - x)>)
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != (law.n,) or y.shape != (law.n,):
        raise DimensionMismatch("point dimension does not match law")
    try:
        L = cholesky(law.A)
    except NotPositiveDefinite as e:
        raise SingularCovariance(f"covariance not invertible: {e}") from e
    v = y - law.b * tau - x
    # quadratic form through the factor: solve L w = v, then |w|^2 = v' A^-1 v
    w = solve_triangular(L, v, lower=True)
    quad = float(w @ w)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    n = law.n
    log_pdf = -0.5 * (n * np.log(2.0 * np.pi * tau) + logdet + quad / tau)
    return float(np.exp(log_pdf))


_HEADER = struct.Struct("<IHH")  # N, K+1, d


def save_ensemble(ensemble, path):
    """Write an ensemble to .bin (header + times + paths) or .csv."""
    path = str(path)
    N, k1, d = ensemble.paths.shape
    if path.endswith(".bin"):
        if N > 0xFFFFFFFF or k1 > 0xFFFF or d > 0xFFFF:
            raise ValueError("ensemble too large for the binary header")
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(N, k1, d))
            fh.write(np.ascontiguousarray(ensemble.grid.times).tobytes())
            fh.write(np.ascontiguousarray(ensemble.paths).tobytes())
    elif path.endswith(".csv"):
        with open(path, "w") as fh:
            cols = ",".join(f"x{c}" for c in range(d))
            fh.write(f"path,time_index,time,{cols}\n")
            times = ensemble.grid.times
            for i in range(N):
                for j in range(k1):
                    vals = ",".join(repr(float(v)) for v in ensemble.paths[i, j])
                    fh.write(f"{i},{j},{times[j]!r},{vals}\n")
    else:
        raise UnsupportedFormat(f"cannot infer ensemble format from {path!r}")


def load_ensemble(path):
    """Read an ensemble written by save_ensemble (.bin only)."""
    path = str(path)
    if not path.endswith(".bin"):
        raise UnsupportedFormat("only the .bin layout can be loaded")
    with open(path, "rb") as fh:
        N, k1, d = _HEADER.unpack(fh.read(_HEADER.size))
        times = np.frombuffer(fh.read(8 * k1), dtype=np.float64)
        flat = np.frombuffer(fh.read(8 * N * k1 * d), dtype=np.float64)
    paths = flat.reshape(N, k1, d).copy()
    return PathEnsemble(law_dimension=d, grid=TimeGrid(times.copy()),
                        paths=paths, seed=0, origin=paths[0, 0, :].copy())
