"""Coordinate charts, metric tensor fields and pointwise metric algebra.

A metric lives on a single explicit coordinate chart: an open coordinate
box, possibly with periodic axes (for angle coordinates) and with excluded
axis-aligned hyperplanes (a puncture, the polar chart singularities).
Evaluators must be pure; all derived charts built here close over their
inputs without mutating them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConditioningError,
    ConfigurationError,
    DegeneracyError,
    DomainError,
    PositivityError,
)

DEFAULT_EXCLUDED_MARGIN = 1e-3
CONDITION_LIMIT = 1e12


def as_point(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise ConfigurationError(f"expected a point with {dim} coordinates, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class ExcludedSet:
    """An excluded axis-aligned hyperplane {x[axis] = value}.

    `margin` is the default standoff distance used when integrating or
    exhausting near the set; the set itself is only the hyperplane.
    """

    axis: int
    value: float
    margin: float = DEFAULT_EXCLUDED_MARGIN
    label: str = ""


class MetricChart:
    """A coordinate chart carrying a symmetric positive-definite metric field."""

    def __init__(
        self,
        dim,
        metric_components,
        domain=None,
        excluded=(),
        periodic_axes=(),
        batch_components=None,
        analytic_christoffel=None,
        batch_christoffel=None,
        label="chart",
    ):
        if dim < 1:
            raise ConfigurationError("chart dimension must be >= 1")
        self.dim = int(dim)
        self._components = metric_components
        self._batch_components = batch_components
        self._christoffel = analytic_christoffel
        self._batch_christoffel = batch_christoffel
        self.label = label
        if domain is None:
            domain = [(-np.inf, np.inf)] * self.dim
        domain = np.asarray(domain, dtype=float)
        if domain.shape != (self.dim, 2):
            raise ConfigurationError(f"domain must be {self.dim} (lo, hi) pairs")
        if np.any(domain[:, 0] >= domain[:, 1]):
            raise ConfigurationError("each domain interval needs lo < hi")
        self.domain = domain
        self.excluded = tuple(excluded)
        for ex in self.excluded:
            if not 0 <= ex.axis < self.dim:
                raise ConfigurationError(f"excluded set axis {ex.axis} out of range")
        self.periodic_axes = frozenset(int(a) for a in periodic_axes)
        for a in self.periodic_axes:
            if not 0 <= a < self.dim:
                raise ConfigurationError(f"periodic axis {a} out of range")
            if not np.all(np.isfinite(self.domain[a])):
                raise ConfigurationError("periodic axes need finite bounds")

    @property
    def has_analytic_christoffel(self):
        return self._christoffel is not None or self._batch_christoffel is not None

    # -- point handling -------------------------------------------------

    def wrap(self, x):
        """Map periodic coordinates into their fundamental interval."""
        x = np.asarray(x, dtype=float)
        if not self.periodic_axes:
            return x
        out = np.array(x, dtype=float, copy=True)
        for a in self.periodic_axes:
            lo, hi = self.domain[a]
            out[..., a] = lo + np.mod(out[..., a] - lo, hi - lo)
        return out

    def wrap_difference(self, dx):
        """Minimal-image coordinate difference (periodic axes wrapped)."""
        dx = np.asarray(dx, dtype=float)
        if not self.periodic_axes:
            return dx
        out = np.array(dx, dtype=float, copy=True)
        for a in self.periodic_axes:
            lo, hi = self.domain[a]
            period = hi - lo
            out[..., a] = (out[..., a] + period / 2) % period - period / 2
        return out

    def contains(self, x):
        """True when x lies in the open box and off every excluded set."""
        x = self.wrap(as_point(x, self.dim))
        for a in range(self.dim):
            if a in self.periodic_axes:
                continue
            lo, hi = self.domain[a]
            if not lo < x[a] < hi:
                return False
        for ex in self.excluded:
            if x[ex.axis] == ex.value:
                return False
        return True

    def require_interior(self, x):
        if not self.contains(x):
            raise DomainError(f"point {np.asarray(x)} is outside the domain of chart {self.label!r}")

    def interior_mask(self, points):
        """Vectorized `contains` over an (N, dim) array."""
        X = self.wrap(np.asarray(points, dtype=float))
        ok = np.ones(X.shape[0], dtype=bool)
        for a in range(self.dim):
            if a in self.periodic_axes:
                continue
            lo, hi = self.domain[a]
            ok &= (X[:, a] > lo) & (X[:, a] < hi)
        for ex in self.excluded:
            ok &= X[:, ex.axis] != ex.value
        return ok

    def boundary_clearances(self, points):
        """Coordinate distances from each finite face and excluded set.

        Returns (face_dist, excl_dist) with shapes (N, n_faces) and
        (N, n_excluded); faces of periodic axes are not boundaries and are
        skipped. Used by ray termination and by compact exhaustions.
        """
        X = self.wrap(np.atleast_2d(np.asarray(points, dtype=float)))
        faces = []
        for a in range(self.dim):
            if a in self.periodic_axes:
                continue
            lo, hi = self.domain[a]
            if np.isfinite(lo):
                faces.append(X[:, a] - lo)
            if np.isfinite(hi):
                faces.append(hi - X[:, a])
        face_dist = np.stack(faces, axis=1) if faces else np.empty((X.shape[0], 0))
        excl = [np.abs(X[:, ex.axis] - ex.value) for ex in self.excluded]
        excl_dist = np.stack(excl, axis=1) if excl else np.empty((X.shape[0], 0))
        return face_dist, excl_dist

    def stop_clearance(self):
        """Standoff distances at which integration halts: one per face, one per excluded set."""
        face_margins = []
        for a in range(self.dim):
            if a in self.periodic_axes:
                continue
            lo, hi = self.domain[a]
            if np.isfinite(lo):
                face_margins.append(DEFAULT_EXCLUDED_MARGIN)
            if np.isfinite(hi):
                face_margins.append(DEFAULT_EXCLUDED_MARGIN)
        excl_margins = [ex.margin for ex in self.excluded]
        return np.asarray(face_margins), np.asarray(excl_margins)

    # -- metric evaluation ----------------------------------------------

    def metric(self, x, validate=True):
        """G(x) as a (dim, dim) array; validates symmetry and positive definiteness."""
        x = self.wrap(as_point(x, self.dim))
        if validate:
            self.require_interior(x)
        G = np.asarray(self._components(x), dtype=float)
        if G.shape != (self.dim, self.dim):
            raise ConfigurationError(
                f"metric evaluator of {self.label!r} returned shape {G.shape}"
            )
        if validate:
            if not np.array_equal(G, G.T):
                raise DegeneracyError(
                    f"metric of {self.label!r} is not exactly symmetric at {x}", point=x
                )
            try:
                np.linalg.cholesky(G)
            except np.linalg.LinAlgError:
                eigs = np.linalg.eigvalsh(G)
                raise DegeneracyError(
                    f"metric of {self.label!r} is not positive definite at {x}",
                    point=x,
                    min_eigenvalue=float(eigs[0]),
                ) from None
        return G

    def metric_batch(self, points, validate=False):
        """G over an (N, dim) batch of points; hot path, unvalidated by default."""
        X = self.wrap(np.asarray(points, dtype=float))
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ConfigurationError(f"expected an (N, {self.dim}) batch of points")
        if self._batch_components is not None:
            G = np.asarray(self._batch_components(X), dtype=float)
        else:
            G = np.stack([np.asarray(self._components(x), dtype=float) for x in X])
        if G.shape != (X.shape[0], self.dim, self.dim):
            raise ConfigurationError(
                f"batch metric evaluator of {self.label!r} returned shape {G.shape}"
            )
        if validate:
            if not np.array_equal(G, np.swapaxes(G, 1, 2)):
                raise DegeneracyError(f"metric of {self.label!r} asymmetric in batch")
            try:
                np.linalg.cholesky(G)
            except np.linalg.LinAlgError:
                bad = _first_non_spd(G)
                raise DegeneracyError(
                    f"metric of {self.label!r} is not positive definite at {X[bad]}",
                    point=X[bad],
                    min_eigenvalue=float(np.linalg.eigvalsh(G[bad])[0]),
                ) from None
        return G

    def __repr__(self):
        return f"MetricChart({self.label!r}, dim={self.dim})"


def _first_non_spd(G):
    for i, Gi in enumerate(G):
        try:
            np.linalg.cholesky(Gi)
        except np.linalg.LinAlgError:
            return i
    return 0


class ScalarField:
    """A positive scalar function on a chart (a conformal factor or test function)."""

    def __init__(self, value, gradient=None, batch_value=None, label="scalar"):
        self._value = value
        self._batch_value = batch_value
        self.gradient = gradient
        self.label = label

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        v = float(self._value(x))
        if not v > 0.0:
            raise PositivityError(
                f"field {self.label!r} evaluated to {v} at {x}; it must be positive",
                point=x,
            )
        return v

    def batch(self, points):
        X = np.asarray(points, dtype=float)
        if self._batch_value is not None:
            v = np.asarray(self._batch_value(X), dtype=float)
        else:
            v = np.array([float(self._value(x)) for x in X])
        if not np.all(v > 0.0):
            bad = int(np.argmin(v > 0.0))
            raise PositivityError(
                f"field {self.label!r} evaluated to {v[bad]} at {X[bad]}; it must be positive",
                point=X[bad],
            )
        return v

    def reciprocal(self):
        """The field 1/f (pointwise), positive wherever f is."""
        inner_value = self._value
        inner_batch = self._batch_value
        outer = self

        def value(x):
            return 1.0 / outer(x)

        batch = None
        if inner_batch is not None:
            def batch(X):
                return 1.0 / outer.batch(X)

        return ScalarField(value, batch_value=batch, label=f"1/({self.label})")

    def scaled(self, factor):
        if factor <= 0:
            raise ConfigurationError("scaling factor must be positive")
        batch = None
        if self._batch_value is not None:
            def batch(X, s=factor):
                return s * self.batch(X)
        return ScalarField(
            lambda x, s=factor: s * self(x),
            batch_value=batch,
            label=f"{factor}*({self.label})",
        )

    def __repr__(self):
        return f"ScalarField({self.label!r})"


class SymTensorField:
    """A symmetric (0,2)-tensor field, optionally declared nonnegative."""

    def __init__(self, components, batch_components=None, nonneg_flag=True, label="tensor"):
        self._components = components
        self._batch_components = batch_components
        self.nonneg_flag = nonneg_flag
        self.label = label

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        S = np.asarray(self._components(x), dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ConfigurationError(f"tensor evaluator of {self.label!r} returned shape {S.shape}")
        if not np.array_equal(S, S.T):
            raise DegeneracyError(f"tensor {self.label!r} is not symmetric at {x}", point=x)
        return S

    def batch(self, points):
        X = np.asarray(points, dtype=float)
        if self._batch_components is not None:
            S = np.asarray(self._batch_components(X), dtype=float)
        else:
            S = np.stack([self(x) for x in X])
        return S

    def check_nonnegative(self, points, vectors, tol=0.0):
        """Spot-check v^T S(x) v >= -tol over sampled points and vectors."""
        for x in points:
            S = self(x)
            for v in vectors:
                q = float(np.asarray(v) @ S @ np.asarray(v))
                if q < -tol:
                    return False, (np.asarray(x), np.asarray(v), q)
        return True, None

    def __repr__(self):
        return f"SymTensorField({self.label!r}, nonneg={self.nonneg_flag})"


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector anchored at a chart point."""

    base: np.ndarray
    components: np.ndarray

    def validate(self, chart: MetricChart):
        chart.require_interior(self.base)
        if np.asarray(self.components).shape != (chart.dim,):
            raise ConfigurationError("tangent components do not match chart dimension")
        return self


# -- operations ----------------------------------------------------------


def metric_eval(chart: MetricChart, x, v, w) -> float:
    """The inner product g_x(v, w) = v^T G(x) w."""
    x = as_point(x, chart.dim)
    v = as_point(v, chart.dim)
    w = as_point(w, chart.dim)
    G = chart.metric(x)
    return float(v @ G @ w)


def conformal_transform(g: MetricChart, factor: ScalarField) -> MetricChart:
    """The rescaled chart with components G(x) / factor(x)^2.

    The factor must be positive on the chart; a nonpositive evaluation
    raises with the offending point named.
    """

    def components(x):
        a = factor(x)  # raises PositivityError when a <= 0
        return g.metric(x, validate=False) / (a * a)

    def batch_components(X):
        a = factor.batch(X)
        return g.metric_batch(X) / (a * a)[:, None, None]

    return MetricChart(
        g.dim,
        components,
        domain=g.domain,
        excluded=g.excluded,
        periodic_axes=g.periodic_axes,
        batch_components=batch_components,
        label=f"({g.label})/({factor.label})^2",
    )


def subtract_tensor(h: MetricChart, s: SymTensorField) -> MetricChart:
    """The chart evaluating H(x) - S(x); degeneracy is detected at evaluation."""
    if not s.nonneg_flag:
        raise ConfigurationError(
            f"tensor {s.label!r} is not declared nonnegative; refusing to subtract it"
        )

    def _check(G, x):
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            eigs = np.linalg.eigvalsh(G)
            raise DegeneracyError(
                f"{h.label!r} minus {s.label!r} degenerates at {x}",
                point=np.asarray(x),
                min_eigenvalue=float(eigs.min()),
            ) from None
        return G

    def components(x):
        return _check(h.metric(x, validate=False) - s(x), x)

    def batch_components(X):
        G = h.metric_batch(X) - s.batch(X)
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            bad = _first_non_spd(G)
            raise DegeneracyError(
                f"{h.label!r} minus {s.label!r} degenerates at {X[bad]}",
                point=X[bad],
                min_eigenvalue=float(np.linalg.eigvalsh(G[bad])[0]),
            ) from None
        return G

    return MetricChart(
        h.dim,
        components,
        domain=h.domain,
        excluded=h.excluded,
        periodic_axes=h.periodic_axes,
        batch_components=batch_components,
        label=f"({h.label})-({s.label})",
    )


def metric_leq(g: MetricChart, h: MetricChart, sample_points, sample_vectors=None, tol=1e-9):
    """True when g_x(v, v) <= h_x(v, v) + tol over the samples.

    At each sample point the full eigenvalue test is applied (all
    eigenvalues of H - G above -tol); explicit sample vectors, when given,
    are checked directly as quadratic forms.
    """
    if g.dim != h.dim:
        raise ConfigurationError("charts have different dimensions")
    for x in sample_points:
        D = h.metric(x, validate=False) - g.metric(x, validate=False)
        if float(np.linalg.eigvalsh(D)[0]) < -tol:
            return False
        if sample_vectors is not None:
            for v in sample_vectors:
                v = as_point(v, g.dim)
                if float(v @ D @ v) < -tol:
                    return False
    return True


def fd_steps(x, base=1e-5):
    """Per-coordinate central-difference steps max(base, base * |x_i|)."""
    x = np.asarray(x, dtype=float)
    return np.maximum(base, base * np.abs(x))


def christoffel(chart: MetricChart, x, fd_step=None):
    """Christoffel symbols Gamma^k_{ij} at x, shape (dim, dim, dim).

    Uses the chart's analytic symbols when present, otherwise central
    finite differences of the metric components. Raises ConditioningError
    when G(x) is numerically singular.
    """
    x = chart.wrap(as_point(x, chart.dim))
    chart.require_interior(x)
    G = chart.metric(x, validate=False)
    if np.linalg.cond(G) > CONDITION_LIMIT:
        raise ConditioningError(
            f"metric of {chart.label!r} is near-singular at {x}; symbols unreliable"
        )
    if chart._batch_christoffel is not None:
        return np.asarray(chart._batch_christoffel(x[None]), dtype=float)[0]
    if chart._christoffel is not None:
        return np.asarray(chart._christoffel(x), dtype=float)
    if fd_step is None:
        h = fd_steps(x)
    else:
        h = np.full(chart.dim, float(fd_step))
    for i in range(chart.dim):
        e = np.zeros(chart.dim)
        e[i] = h[i]
        chart.require_interior(x + e)
        chart.require_interior(x - e)
    return _christoffel_fd(chart, x[None], h[None])[0]


def christoffel_batch(chart: MetricChart, points):
    """Vectorized Christoffel symbols over an (N, dim) batch (hot path)."""
    X = chart.wrap(np.asarray(points, dtype=float))
    if chart._batch_christoffel is not None:
        return np.asarray(chart._batch_christoffel(X), dtype=float)
    if chart._christoffel is not None:
        return np.stack([np.asarray(chart._christoffel(x), dtype=float) for x in X])
    return _christoffel_fd(chart, X, fd_steps(X))


def _christoffel_fd(chart, X, H):
    """Central-difference symbols; X is (B, d), H the per-point steps (B, d)."""
    B, d = X.shape
    offsets = np.zeros((B, 2 * d, d))
    for i in range(d):
        offsets[:, 2 * i, i] = H[:, i]
        offsets[:, 2 * i + 1, i] = -H[:, i]
    probe = (X[:, None, :] + offsets).reshape(B * 2 * d, d)
    Gp = chart.metric_batch(probe).reshape(B, 2 * d, d, d)
    # dG[b, i, j, l] = d_i g_{jl}
    dG = (Gp[:, 0::2] - Gp[:, 1::2]) / (2.0 * H)[:, :, None, None]
    term1 = dG
    term2 = dG.transpose(0, 2, 1, 3)          # d_j g_{il}
    term3 = dG.transpose(0, 3, 1, 2)          # d_l g_{ij} indexed [b, i, j, l]
    lower = 0.5 * (term1 + term2 - term3)      # [b, i, j, l]
    G = chart.metric_batch(X)
    rhs = lower.transpose(0, 3, 1, 2).reshape(B, d, d * d)   # l leading for the solve
    try:
        gamma = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"singular metric while assembling symbols: {exc}") from exc
    return gamma.reshape(B, d, d, d)
