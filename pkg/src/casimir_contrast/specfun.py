"""Exponential integrals and the closed-form flat/rough-surface kernels."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConvergenceFailure, DomainError

EULER = 0.5772156649015328606
_EPS = 1e-16
_FPMIN = 1e-300
_MAXIT = 400


@dataclass(frozen=True)
class KernelEvalControls:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("tolerances must be positive")


def _scalar_or_array(x, out):
    return float(out) if np.ndim(x) == 0 else out


def exp_integral_En(n: int, z):
    """E_n(z) = int_1^inf exp(-z t) / t^n dt for integer n >= 1 and z > 0.

    Power series (with the logarithmic term) for z <= 1, modified Lentz
    continued fraction above.
    """
    if int(n) != n or n < 1:
        raise DomainError("n must be an integer >= 1")
    n = int(n)
    x = np.asarray(z, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("E_n requires z > 0")
    xs = np.atleast_1d(x)
    out = np.empty_like(xs)
    lo = xs <= 1.0
    if np.any(lo):
        out[lo] = _en_series(n, xs[lo])
    if np.any(~lo):
        out[~lo] = _en_contfrac(n, xs[~lo])
    return _scalar_or_array(z, out if x.ndim else out[0])


def _en_series(n, x):
    nm1 = n - 1
    ans = np.full_like(x, 1.0 / nm1) if nm1 else -np.log(x) - EULER
    fact = np.ones_like(x)
    psi = -EULER + sum(1.0 / k for k in range(1, nm1 + 1))
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _MAXIT):
        fact = fact * (-x / i)
        if i != nm1:
            term = -fact / (i - nm1)
        else:
            term = fact * (-np.log(x) + psi)
        ans = ans + np.where(active, term, 0.0)
        active &= np.abs(term) >= np.abs(ans) * _EPS
        if not active.any():
            return ans
    raise ConvergenceFailure("E_n power series did not converge")


def _en_contfrac(n, x):
    nm1 = n - 1
    b = x + n
    c = np.full_like(x, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _MAXIT):
        a = -i * (nm1 + i)
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = np.where(active, c * d, 1.0)
        h = h * delta
        active &= np.abs(delta - 1.0) >= _EPS
        if not active.any():
            with np.errstate(under="ignore"):
                return h * np.exp(-x)
    raise ConvergenceFailure("E_n continued fraction did not converge")


def incomplete_gamma0(z):
    """Gamma(0, z) = int_z^inf exp(-t)/t dt, identical to E_1(z)."""
    x = np.asarray(z, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("Gamma(0, z) requires z > 0")
    return exp_integral_En(1, z)


def L_kernel(u):
    """Flat-plate second-order kernel

        4 (u^2 - 1) E_1(2u) + exp(-2u) (1 + 2u + u^2 - 2u^3) / u^2.

    Evaluated in the equivalent form 2 E_3(2u) - 4 E_1(2u) + exp(-2u)(2/u + 1/u^2),
    which avoids the O(u^2) cancellation of the written form at large u.
    """
    x = np.asarray(u, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("L_kernel requires u > 0")
    with np.errstate(under="ignore"):
        out = (
            2.0 * exp_integral_En(3, 2 * x)
            - 4.0 * exp_integral_En(1, 2 * x)
            + np.exp(-2 * x) * (2.0 / x + 1.0 / x**2)
        )
    return _scalar_or_array(u, out)


# -- rough-surface kernel -----------------------------------------------------
#
# The s-integral of W is done in tau = ln s: the s^{-3/2} weight becomes
# exp(-tau/2) and the exponential cut-off sits at tau ~ 2 ln(1/h).  The upper
# limit is where the exponent has dropped 80 below its value at s = 1.

_TAIL_GAP = 40.0


def _w_integrand(tau, y, h):
    # s^{-3/2} ds = s^{-1/2} dtau
    s = np.exp(tau)
    v2 = y * y + h * h * s
    v = np.sqrt(v2)
    with np.errstate(under="ignore"):
        return (s ** -0.5) * np.exp(-2 * v) * (3.0 / v2**2 + 6.0 / (v2 * v) + 4.0 * (1.0 - h * h * s) / v2)


def _tau_max(y, h):
    r = np.sqrt(y * y + h * h)
    return np.log(((r + _TAIL_GAP) ** 2 - y * y) / (h * h))


def W_kernel(y: float, h: float, controls: KernelEvalControls = KernelEvalControls()) -> float:
    """Rough-surface pair kernel W(|y|, h) by adaptive quadrature."""
    from .quadrature import QuadratureSpec, integrate_interval

    y = abs(float(y))
    h = float(h)
    if not h > 0:
        raise DomainError("W_kernel requires h > 0")
    r = math.hypot(y, h)
    head = 8.0 * float(incomplete_gamma0(2 * r))
    spec = QuadratureSpec(rel_tol=controls.rel_tol, abs_tol=controls.abs_tol,
                          max_panels=controls.max_subdivisions, panel_order=16)
    f = lambda tau: _w_integrand(tau, y, h)
    tmax = float(_tau_max(y, h))
    # split at the crossover tau where h^2 s ~ y^2 so both regimes get panels
    cut = min(max(2 * math.log(max(y, h) / h), 0.0), tmax)
    breaks = sorted({0.0, cut, tmax})
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b > a:
            try:
                val, _ = integrate_interval(f, a, b, spec)
            except ConvergenceFailure as exc:
                raise ConvergenceFailure(f"W_kernel({y}, {h}): {exc}") from None
            total += val
    return head + total


_GL16 = leggauss(16)


def W_kernel_batch(y, h, panels: int = 48):
    """Vectorised W on arrays via a fixed composite Gauss-Legendre rule in ln s.

    Used to build kernel tables; agrees with :func:`W_kernel` to ~1e-12.
    """
    y = np.abs(np.asarray(y, dtype=float))
    h = np.asarray(h, dtype=float)
    y, h = np.broadcast_arrays(y, h)
    if np.any(~(h > 0)):
        raise DomainError("W_kernel requires h > 0")
    shape = y.shape
    y = y.ravel()
    h = h.ravel()
    r = np.hypot(y, h)
    tmax = _tau_max(y, h)
    x, w = _GL16
    edges = np.linspace(0.0, 1.0, panels + 1)
    frac = ((edges[:-1, None] + edges[1:, None]) / 2 + (edges[1:, None] - edges[:-1, None]) / 2 * x).ravel()
    wts = ((edges[1:, None] - edges[:-1, None]) / 2 * w).ravel()
    out = np.empty_like(y)
    step = max(1, 200_000 // frac.size)
    for lo in range(0, y.size, step):
        sl = slice(lo, lo + step)
        tau = tmax[sl, None] * frac[None, :]
        vals = _w_integrand(tau, y[sl, None], h[sl, None])
        out[sl] = (vals * wts[None, :]).sum(axis=1) * tmax[sl]
    out += 8.0 * incomplete_gamma0(2 * r)
    return out.reshape(shape)
