"""Deterministic adaptive Gauss-Legendre quadrature.

Integrands are vectorised: ``f(x)`` takes a 1-d array of nodes and returns an
array of shape ``(len(x),)`` or ``(len(x), m)`` (vector-valued, possibly
complex).  Panels are refined dyadically; the result is summed panel by panel
in left-to-right order with compensated summation, so identical inputs give
bit-identical outputs regardless of the refinement history.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConvergenceFailure, DomainError

TRANSFORMS = ("rational", "exponential")


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and rule sizes.

    ``workers > 1`` evaluates the nodes of a refinement step in a thread
    pool; results do not depend on it.
    """

    rel_tol: float = 1e-6
    abs_tol: float = 1e-12
    max_panels: int = 400
    panel_order: int = 16
    transform_id: str = "rational"
    workers: int = 1

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("rel_tol and abs_tol must be positive")
        if self.panel_order < 2:
            raise DomainError("panel_order must be >= 2")
        if self.transform_id not in TRANSFORMS:
            raise DomainError(f"unknown transform {self.transform_id!r}")

    def tightened(self, factor: float = 10.0) -> "QuadratureSpec":
        return replace(self, rel_tol=self.rel_tol / factor, abs_tol=self.abs_tol / factor)


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    """Nodes and weights on [-1, 1]."""
    x, w = leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def map_semi_infinite(u, transform_id: str, scale: float = 1.0):
    """Map u in [0, 1) to t in [0, inf); returns (t, dt/du)."""
    u = np.asarray(u, dtype=float)
    if transform_id == "rational":
        t = scale * u / (1.0 - u)
        jac = scale / (1.0 - u) ** 2
    elif transform_id == "exponential":
        t = -scale * np.log1p(-u)
        jac = scale / (1.0 - u)
    else:
        raise DomainError(f"unknown transform {transform_id!r}")
    return t, jac


def _fsum(values):
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return _fsum(values.real) + 1j * _fsum(values.imag)
    if values.ndim == 1:
        return math.fsum(values.tolist())
    return np.array([math.fsum(col) for col in values.T.tolist()])


class _Panels:
    """Adaptive refinement on [a, b] for a vectorised integrand g."""

    def __init__(self, g, a, b, spec, initial):
        self.g = g
        self.spec = spec
        self.x, self.w = gauss_legendre(spec.panel_order)
        edges = np.linspace(a, b, initial + 1)
        self.pool = ThreadPoolExecutor(spec.workers) if spec.workers > 1 else None
        # each panel: [a, b, coarse, left_half, right_half]
        try:
            coarse = self._rule(list(zip(edges[:-1], edges[1:])))
            mids = (edges[:-1] + edges[1:]) / 2
            halves = self._rule([iv for lo, mid, hi in zip(edges[:-1], mids, edges[1:])
                                 for iv in ((lo, mid), (mid, hi))])
            self.panels = [[edges[i], edges[i + 1], coarse[i], halves[2 * i], halves[2 * i + 1]]
                           for i in range(initial)]
        except BaseException:
            self.close()
            raise

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()
            self.pool = None

    def _rule(self, intervals):
        lo = np.array([iv[0] for iv in intervals])
        hi = np.array([iv[1] for iv in intervals])
        half = (hi - lo) / 2
        nodes = ((lo + hi) / 2)[:, None] + half[:, None] * self.x[None, :]
        flat = nodes.ravel()
        if self.pool is not None and flat.size > 1:
            chunks = np.array_split(flat, min(self.spec.workers, flat.size))
            vals = np.concatenate([np.asarray(v) for v in self.pool.map(self.g, chunks)], axis=0)
        else:
            vals = np.asarray(self.g(flat))
        vals = vals.reshape((len(intervals), self.x.size) + vals.shape[1:])
        wts = half[:, None] * self.w[None, :]
        return [np.tensordot(wts[i], vals[i], axes=(0, 0)) for i in range(len(intervals))]

    def _fine(self, p):
        return p[3] + p[4]

    def _err(self, p):
        return np.abs(p[3] + p[4] - p[2])

    def run(self):
        spec = self.spec
        try:
            while True:
                total = self.total()
                errs = [self._err(p) for p in self.panels]
                err = np.sum(errs, axis=0)
                target = np.maximum(spec.rel_tol * np.abs(total), spec.abs_tol)
                if np.all(err <= target):
                    return total, err
                if len(self.panels) >= spec.max_panels:
                    raise ConvergenceFailure(
                        f"quadrature exhausted {spec.max_panels} panels "
                        f"(error {np.max(err):.3e} > target {np.min(target):.3e})"
                    )
                score = [float(np.max(e / target)) for e in errs]
                worst = int(np.argmax(score))
                self._split(worst)
        finally:
            self.close()

    def _split(self, i):
        a, b, _, left, right = self.panels[i]
        m = (a + b) / 2
        q1, q3 = (a + m) / 2, (m + b) / 2
        h = self._rule([(a, q1), (q1, m), (m, q3), (q3, b)])
        self.panels[i:i + 1] = [[a, m, left, h[0], h[1]], [m, b, right, h[2], h[3]]]

    def total(self):
        return _fsum(np.array([self._fine(p) for p in self.panels]))


def _finish(value, err):
    if np.ndim(value) == 0:
        return value, float(np.max(err))
    return np.asarray(value), np.asarray(err, dtype=float)


def integrate_interval(f, a: float, b: float, spec: QuadratureSpec = QuadratureSpec(), initial: int = 2):
    """int_a^b f(x) dx; returns (value, error_estimate)."""
    if not b > a:
        raise DomainError("integration interval must have b > a")
    return _finish(*_Panels(f, float(a), float(b), spec, initial).run())


def integrate_semi_infinite(f, transform_id: str | None = None, spec: QuadratureSpec = QuadratureSpec(),
                            *, lower: float = 0.0, scale: float = 1.0, initial: int = 4):
    """int_lower^inf f(t) dt through t = lower + T(u), u in [0, 1).

    ``scale`` sets the transform's length scale; it should be of the order of
    the integrand's decay length.
    """
    tid = transform_id or spec.transform_id

    def g(u):
        with np.errstate(divide="ignore"):
            t, jac = map_semi_infinite(u, tid, scale)
        ok = np.isfinite(t) & np.isfinite(jac)
        if ok.all():
            vals = np.asarray(f(lower + t))
            return vals * jac.reshape(jac.shape + (1,) * (vals.ndim - 1))
        # nodes that round onto u = 1 sit at t = inf where the integrand has decayed
        inner = np.asarray(f(lower + t[ok]))
        vals = np.zeros((u.size,) + inner.shape[1:], dtype=inner.dtype)
        vals[ok] = inner * jac[ok].reshape(jac[ok].shape + (1,) * (inner.ndim - 1))
        return vals

    return _finish(*_Panels(g, 0.0, 1.0, spec, initial).run())


def integrate_nested(f, spec: QuadratureSpec = QuadratureSpec(), *, outer_transform: str | None = None,
                     inner_transform: str | None = None, outer_scale: float = 1.0, inner_scale: float = 1.0,
                     inner_lower=0.0):
    """int_0^inf dx int_{a(x)}^inf dy f(x, y).

    ``f(x, y)`` receives a scalar ``x`` and an array ``y``.  ``inner_lower``
    and ``inner_scale`` are constants or callables of ``x``.  The inner integrals run with
    tolerances ten times tighter than the outer one; the returned error adds
    the weighted inner error estimates to the outer one.
    """
    inner_spec = spec.tightened(10.0)
    lower = inner_lower if callable(inner_lower) else (lambda x: inner_lower)
    iscale = inner_scale if callable(inner_scale) else (lambda x: inner_scale)

    def outer(xs):
        vals = [integrate_semi_infinite(lambda y: f(x, y), inner_transform, inner_spec,
                                        lower=float(lower(x)), scale=float(iscale(x)))[0]
                for x in np.asarray(xs, dtype=float).tolist()]
        return np.array(vals)

    value, err = integrate_semi_infinite(outer, outer_transform, replace(spec, workers=1), scale=outer_scale)
    # every converged inner integral is within its own target; propagate that bound
    inner = np.maximum(inner_spec.rel_tol * np.abs(value), inner_spec.abs_tol)
    return value, err + inner
