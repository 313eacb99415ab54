"""Transform catalog: affine maps, radial lifts of sphere maps, scalar fields.

Every transform evaluates vectorized over rows of points.  Scalar fields
(n_out == 1) additionally expose gradients and Laplacians, analytically
where the closed form is known and by central differences otherwise.
"""

import re

import numpy as np

from .errors import DimensionMismatch, NotDifferentiableHere


class Transform:
    """Map R^n_in -> R^n_out, evaluated row-wise."""

    n_in = None
    n_out = None
    name = "transform"

    def _eval(self, X):
        raise NotImplementedError

    def eval(self, x):
        """Evaluate at one point (n_in,) -> (n_out,) or rows (N, n_in) -> (N, n_out)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[1] != self.n_in:
            raise DimensionMismatch(
                f"{self.name} expects dimension {self.n_in}, got {X.shape[1]}")
        out = self._eval(X)
        return out[0] if single else out

    def scalar_eval(self, x):
        if self.n_out != 1:
            raise DimensionMismatch(f"{self.name} is not a scalar field")
        out = self.eval(x)
        return float(out[0]) if np.asarray(x).ndim == 1 else out[:, 0]

    # points where a derivative exists; RadialLift overrides to exclude 0
    def differentiable_at(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.ones(X.shape[0], dtype=bool)

    # evaluation domain; RestrictedDomain overrides
    def defined_at(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.ones(X.shape[0], dtype=bool)

    has_analytic_grad = False

    def grad(self, X):
        """Analytic gradient rows, scalar fields only."""
        raise NotImplementedError

    def lap(self, X):
        """Analytic Laplacian values, scalar fields only."""
        raise NotImplementedError

    def __repr__(self):
        return self.name


class AffineTransform(Transform):
    """f(x) = P x + q."""

    def __init__(self, P, q=None):
        self.P = np.atleast_2d(np.asarray(P, dtype=np.float64))
        m, n = self.P.shape
        self.q = np.zeros(m) if q is None else np.asarray(q, dtype=np.float64)
        if self.q.shape != (m,):
            raise DimensionMismatch(
                f"offset shape {self.q.shape} does not match {m} rows of P")
        self.n_in = n
        self.n_out = m
        self.name = f"affine({m}x{n})"

    def _eval(self, X):
        return X @ self.P.T + self.q

    has_analytic_grad = True

    def grad(self, X):
        if self.n_out != 1:
            raise DimensionMismatch(f"{self.name} is not a scalar field")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.broadcast_to(self.P[0], (X.shape[0], self.n_in)).copy()

    def lap(self, X):
        if self.n_out != 1:
            raise DimensionMismatch(f"{self.name} is not a scalar field")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.zeros(X.shape[0])

    def compose(self, other):
        """self after other: x -> self.P (other.P x + other.q) + self.q."""
        if self.n_in != other.n_out:
            raise DimensionMismatch("composition dimensions do not chain")
        return AffineTransform(self.P @ other.P, self.P @ other.q + self.q)


def identity_transform(n):
    return AffineTransform(np.eye(n), np.zeros(n))


def affine_field(p, q=0.0):
    """Scalar field <p, x> + q."""
    p = np.asarray(p, dtype=np.float64)
    f = AffineTransform(p[None, :], np.array([float(q)]))
    f.name = f"affine_field(p={p.tolist()}, q={float(q):g})"
    return f


class SphereMap:
    """Unit-sphere map: identity, a rotation, or angle multiplication on S^1."""

    def __init__(self, kind, n, R=None, k=None):
        if kind not in ("identity", "rotation", "angle_multiply"):
            raise ValueError(f"unknown sphere map kind {kind!r}")
        self.kind = kind
        self.n = n
        self.R = R
        self.k = k
        if kind == "rotation":
            R = np.asarray(R, dtype=np.float64)
            if R.shape != (n, n):
                raise DimensionMismatch("rotation matrix shape mismatch")
            if np.max(np.abs(R.T @ R - np.eye(n))) > 1e-10:
                raise ValueError("rotation matrix is not orthogonal")
            self.R = R
        if kind == "angle_multiply":
            if n != 2:
                raise DimensionMismatch("angle_multiply is defined on the circle")
            if not float(k).is_integer() or abs(int(k)) < 1:
                raise ValueError("angle multiplier must be a nonzero integer")
            self.k = int(k)

    @classmethod
    def identity(cls, n):
        return cls("identity", n)

    @classmethod
    def rotation(cls, R):
        R = np.asarray(R, dtype=np.float64)
        return cls("rotation", R.shape[0], R=R)

    @classmethod
    def angle_multiply(cls, k):
        return cls("angle_multiply", 2, k=k)

    @property
    def name(self):
        if self.kind == "identity":
            return f"identity({self.n})"
        if self.kind == "rotation":
            return f"rotation({self.n}x{self.n})"
        return f"angle_multiply({self.k})"

    def apply(self, U):
        """Apply to unit rows U.  k=2 uses the algebraic double-angle form."""
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        if U.shape[1] != self.n:
            raise DimensionMismatch("sphere map dimension mismatch")
        if self.kind == "identity":
            return U.copy()
        if self.kind == "rotation":
            return U @ self.R.T
        if self.k == 2:
            u1, u2 = U[:, 0], U[:, 1]
            return np.stack([u1 * u1 - u2 * u2, 2.0 * u1 * u2], axis=1)
        return self.apply_trig(U)

    def apply_trig(self, U):
        """Trigonometric route (cos k theta, sin k theta); any k, circle only."""
        if self.kind != "angle_multiply":
            raise ValueError("trig route applies to angle_multiply only")
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        theta = np.arctan2(U[:, 1], U[:, 0])
        return np.stack([np.cos(self.k * theta), np.sin(self.k * theta)], axis=1)


class RadialLift(Transform):
    """g(x) = |x| h(x / |x|) with g(0) = 0; continuous, no derivative at 0."""

    def __init__(self, h):
        self.h = h
        self.n_in = self.n_out = h.n
        self.name = f"radial_lift({h.name})"

    def _eval(self, X):
        r = np.linalg.norm(X, axis=1)
        out = np.zeros_like(X)
        nz = r > 0.0
        if np.any(nz):
            out[nz] = r[nz, None] * self.h.apply(X[nz] / r[nz, None])
        return out

    def differentiable_at(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.linalg.norm(X, axis=1) > 0.0


class HarmonicField(Transform):
    """Real or imaginary part of (x1 + i x2)^k; harmonic on the plane."""

    def __init__(self, part, k):
        if part not in ("re", "im"):
            raise ValueError("part must be 're' or 'im'")
        if k < 1:
            raise ValueError("power must be a positive integer")
        self.part = part
        self.k = int(k)
        self.n_in = 2
        self.n_out = 1
        self.name = f"{part}_z^{k}"

    def _z(self, X):
        return X[:, 0] + 1j * X[:, 1]

    def _eval(self, X):
        w = self._z(X) ** self.k
        v = w.real if self.part == "re" else w.imag
        return v[:, None]

    has_analytic_grad = True

    def grad(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        dw = self.k * self._z(X) ** (self.k - 1)
        if self.part == "re":
            return np.stack([dw.real, -dw.imag], axis=1)
        return np.stack([dw.imag, dw.real], axis=1)

    def lap(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.zeros(X.shape[0])


class QuadraticForm(Transform):
    """u(x) = x' Q x + <p, x> + c with symmetric Q."""

    def __init__(self, Q, p=None, c=0.0):
        self.Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
        n = self.Q.shape[0]
        if self.Q.shape != (n, n):
            raise DimensionMismatch("Q must be square")
        if not np.array_equal(self.Q, self.Q.T):
            raise ValueError("Q must be symmetric")
        self.p = np.zeros(n) if p is None else np.asarray(p, dtype=np.float64)
        if self.p.shape != (n,):
            raise DimensionMismatch("p dimension mismatch")
        self.c = float(c)
        self.n_in = n
        self.n_out = 1
        self.name = f"quadratic({n}d)"

    def _eval(self, X):
        v = np.einsum("ij,jk,ik->i", X, self.Q, X, optimize=False)
        return (v + X @ self.p + self.c)[:, None]

    has_analytic_grad = True

    def grad(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return 2.0 * X @ self.Q + self.p

    def lap(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.full(X.shape[0], 2.0 * float(np.trace(self.Q)))


class AxisPolynomial(Transform):
    """u(x) = polynomial in the single coordinate x[axis]."""

    def __init__(self, coeffs, axis=0, n=1):
        self.coeffs = np.asarray(coeffs, dtype=np.float64)
        self.axis = int(axis)
        if not 0 <= self.axis < n:
            raise DimensionMismatch("axis outside dimension")
        self.n_in = int(n)
        self.n_out = 1
        self._d1 = np.polynomial.polynomial.polyder(self.coeffs)
        self._d2 = np.polynomial.polynomial.polyder(self.coeffs, 2)
        self.name = f"axis_poly({self.coeffs.tolist()}, axis={self.axis})"

    def _eval(self, X):
        v = np.polynomial.polynomial.polyval(X[:, self.axis], self.coeffs)
        return v[:, None]

    has_analytic_grad = True

    def grad(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.zeros_like(X)
        out[:, self.axis] = np.polynomial.polynomial.polyval(
            X[:, self.axis], self._d1)
        return out

    def lap(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.polynomial.polynomial.polyval(X[:, self.axis], self._d2)


class ComponentView(Transform):
    """Scalar view of one output coordinate of a vector transform."""

    def __init__(self, inner, index):
        if not 0 <= index < inner.n_out:
            raise DimensionMismatch("component index out of range")
        self.inner = inner
        self.index = int(index)
        self.n_in = inner.n_in
        self.n_out = 1
        self.name = f"{inner.name}[{index}]"

    def _eval(self, X):
        return self.inner._eval(X)[:, self.index][:, None]

    def differentiable_at(self, X):
        return self.inner.differentiable_at(X)

    def defined_at(self, X):
        return self.inner.defined_at(X)


class RestrictedDomain(Transform):
    """Same map, but declared evaluable only where the predicate holds."""

    def __init__(self, inner, predicate, name=None):
        self.inner = inner
        self.predicate = predicate
        self.n_in = inner.n_in
        self.n_out = inner.n_out
        self.name = name or f"restricted({inner.name})"
        self.has_analytic_grad = inner.has_analytic_grad

    def _eval(self, X):
        return self.inner._eval(X)

    def grad(self, X):
        return self.inner.grad(X)

    def lap(self, X):
        return self.inner.lap(X)

    def differentiable_at(self, X):
        return self.inner.differentiable_at(X)

    def defined_at(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.asarray(self.predicate(X), dtype=bool)


class HarmonicGallery:
    """Named scalar fields with identically zero analytic Laplacian."""

    @staticmethod
    def entries():
        fields = []
        for k in range(1, 5):
            fields.append(HarmonicField("re", k))
            fields.append(HarmonicField("im", k))
        fields.append(affine_field([0.6, 0.8], 0.25))
        fields.append(affine_field([1.0, 1.0], 0.0))
        return fields

    @staticmethod
    def get(name):
        m = re.fullmatch(r"(re|im)_z\^(\d+)", name)
        if m:
            return HarmonicField(m.group(1), int(m.group(2)))
        raise ValueError(f"unknown harmonic field {name!r}")


def fd_gradient(f, X, step=None):
    """Central-difference gradient rows of a scalar field.

    Per-row step 1e-5 * (1 + |x|) unless given; O(step^2) accurate.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[1]
    if step is None:
        h = 1e-5 * (1.0 + np.linalg.norm(X, axis=1))
    else:
        h = np.full(X.shape[0], float(step))
    out = np.empty_like(X)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        out[:, i] = (f.scalar_eval(X + h[:, None] * e)
                     - f.scalar_eval(X - h[:, None] * e)) / (2.0 * h)
    return out


def fd_laplacian(f, X, step=None):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[1]
    if step is None:
        h = 1e-5 * (1.0 + np.linalg.norm(X, axis=1))
    else:
        h = np.full(X.shape[0], float(step))
    center = f.scalar_eval(X)
    acc = np.zeros(X.shape[0])
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        acc += (f.scalar_eval(X + h[:, None] * e) - 2.0 * center
                + f.scalar_eval(X - h[:, None] * e)) / (h * h)
    return acc


def _check_differentiable(f, X):
    ok = f.differentiable_at(X)
    if not np.all(ok):
        bad = np.atleast_2d(X)[~ok][0]
        raise NotDifferentiableHere(
            f"{f.name} has no derivative at {bad.tolist()}")


def gradient_many(f, X):
    """Gradient rows (N, n) of a scalar field, analytic when available."""
    if f.n_out != 1:
        raise DimensionMismatch(f"{f.name} is not a scalar field")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_differentiable(f, X)
    if f.has_analytic_grad:
        return f.grad(X)
    return fd_gradient(f, X)


def gradient(f, x):
    """Gradient of a scalar field at one point."""
    return gradient_many(f, np.asarray(x, dtype=np.float64)[None, :])[0]


def laplacian_many(f, X):
    if f.n_out != 1:
        raise DimensionMismatch(f"{f.name} is not a scalar field")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_differentiable(f, X)
    if f.has_analytic_grad:
        return f.lap(X)
    return fd_laplacian(f, X)


def laplacian(f, x):
    """Laplacian of a scalar field at one point."""
    return float(laplacian_many(f, np.asarray(x, dtype=np.float64)[None, :])[0])


def eikonal_profile(f, points):
    """Euclidean norm of the gradient at each point; constancy is the
    certificate that the field solves an eikonal equation."""
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return np.linalg.norm(gradient_many(f, X), axis=1)


# ---------------------------------------------------------------------------
# transform identifier parsing, e.g. "radial_lift(angle_multiply(2))"

_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_^]*|-?\d+\.?\d*(?:[eE][+-]?\d+)?"
                    r"|[()\[\],=])")


def _tokenize(s):
    pos, out = 0, []
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if not m:
            if s[pos:].strip() == "":
                break
            raise ValueError(f"cannot tokenize transform string at {s[pos:]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expect=None):
        tok = self.peek()
        if tok is None or (expect is not None and tok != expect):
            raise ValueError(f"expected {expect!r}, got {tok!r}")
        self.i += 1
        return tok

    def parse_value(self):
        tok = self.peek()
        if tok is None:
            raise ValueError("unexpected end of transform expression")
        if tok == "[":
            return self.parse_list()
        if re.fullmatch(r"-?\d+\.?\d*(?:[eE][+-]?\d+)?", tok):
            self.take()
            return float(tok) if ("." in tok or "e" in tok or "E" in tok) else int(tok)
        name = self.take()
        if self.peek() == "(":
            return self.parse_call(name)
        return name  # bare identifier such as re_z^2

    def parse_list(self):
        self.take("[")
        items = []
        while self.peek() != "]":
            items.append(self.parse_value())
            if self.peek() == ",":
                self.take()
        self.take("]")
        return items

    def parse_call(self, name):
        self.take("(")
        args, kwargs = [], {}
        while self.peek() != ")":
            if (re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", str(self.peek()))
                    and self.i + 1 < len(self.toks) and self.toks[self.i + 1] == "="):
                key = self.take()
                self.take("=")
                kwargs[key] = self.parse_value()
            else:
                args.append(self.parse_value())
            if self.peek() == ",":
                self.take()
        self.take(")")
        return ("call", name, args, kwargs)


def _build_sphere_map(node):
    if not (isinstance(node, tuple) and node[0] == "call"):
        raise ValueError(f"expected a sphere map, got {node!r}")
    _, name, args, kwargs = node
    if name == "angle_multiply":
        return SphereMap.angle_multiply(*args, **kwargs)
    if name == "rotation":
        return SphereMap.rotation(*args, **kwargs)
    if name == "identity":
        return SphereMap.identity(*args, **kwargs)
    raise ValueError(f"unknown sphere map {name!r}")


def _build(node):
    if not (isinstance(node, tuple) and node[0] == "call"):
        raise ValueError(f"expected a transform call, got {node!r}")
    _, name, args, kwargs = node
    if name == "identity":
        return identity_transform(*args, **kwargs)
    if name == "affine":
        return AffineTransform(*args, **kwargs)
    if name == "affine_field":
        return affine_field(*args, **kwargs)
    if name == "radial_lift":
        if len(args) != 1 or kwargs:
            raise ValueError("radial_lift takes exactly one sphere map")
        return RadialLift(_build_sphere_map(args[0]))
    if name == "harmonic":
        if len(args) != 1 or kwargs or not isinstance(args[0], str):
            raise ValueError("harmonic takes one field name, e.g. re_z^2")
        return HarmonicGallery.get(args[0])
    if name == "quadratic":
        return QuadraticForm(*args, **kwargs)
    if name == "axis_poly":
        return AxisPolynomial(*args, **kwargs)
    if name == "component":
        if len(args) != 2:
            raise ValueError("component takes (transform, index)")
        return ComponentView(_build(args[0]), args[1])
    raise ValueError(f"unknown transform {name!r}")


def parse_transform(s):
    """Build a catalog transform from its string identifier.

    Examples: affine(P=[[2,0],[1,1]], q=[3,-1]);
    radial_lift(angle_multiply(2)); harmonic(re_z^2); identity(2).
    """
    parser = _Parser(_tokenize(s))
    name = parser.take()
    node = parser.parse_call(name)
    if parser.peek() is not None:
        raise ValueError(f"trailing input after transform: {parser.peek()!r}")
    return _build(node)
