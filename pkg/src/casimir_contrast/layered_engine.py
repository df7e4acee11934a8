"""Contrast series and log-det energies for planar layered bodies.

The fluctuation kernel is Fourier transformed along the plates only.  With
the transverse wavevector q along x, each (zeta, q) node gives a dense
operator on a z-grid covering both bodies.  The y-polarisation decouples
from (x, z); after the unitary z -> i z rescaling and symmetric scaling by
sqrt(eps - 1) both blocks are real symmetric, so one ``eigvalsh`` per block
yields every trace power and tr ln(1 + M).

Self-energies are removed node by node: every quantity is computed for both
bodies together and for each body alone, and the two single-body values are
subtracted.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import BranchViolation, DomainError, EigenFailure, GridTooCoarse, NonMonotoneConvergence
from .exact_planar import EnergyBreakdown
from .materials import DielectricModel, delta_epsilon
from .quadrature import QuadratureSpec, gauss_legendre, integrate_semi_infinite, map_semi_infinite

# interaction terms carry exp(-2 kappa H); beyond this exponent they are below rounding of the traces
SKIP_EXPONENT = 40.0
MAX_ORDER = 8
DEFAULT_QUAD = QuadratureSpec(rel_tol=1e-4, panel_order=8)


@dataclass(frozen=True)
class Layer:
    z_start: float
    z_end: float
    material: DielectricModel


@dataclass(frozen=True)
class LayeredScenario:
    """Piecewise-constant eps(z): body 1 below the gap, body 2 above.

    Semi-infinite layers use ``-inf``/``inf`` ends and are truncated at
    ``body_depth_L`` (or ``depth_factor / kappa`` per node when None).
    ``grid_spacing_dz=None`` selects the node-adapted graded grid with
    ``cells_per_length`` cells per decay length at the surface.
    """

    layers: tuple
    separation_H: float
    body_depth_L: Optional[float] = None
    grid_spacing_dz: Optional[float] = None
    cells_per_length: int = 16
    depth_factor: float = 12.0
    grading: float = 0.5
    contrast_scale: float = 1.0
    gap_start: float = 0.0

    def __post_init__(self):
        H = self.separation_H
        if not H > 0:
            raise DomainError("separation_H must be positive")
        if self.body_depth_L is not None and not self.body_depth_L > 0:
            raise DomainError("body_depth_L must be positive")
        if self.grid_spacing_dz is not None and not 0 < self.grid_spacing_dz < H:
            raise DomainError("grid_spacing_dz must lie in (0, H)")
        if self.cells_per_length < 4 or self.depth_factor <= 0 or self.grading <= 0:
            raise DomainError("bad grid controls")
        object.__setattr__(self, "layers", tuple(self.layers))
        lo, hi = self.gap_start, self.gap_start + H
        prev = -math.inf
        for layer in self.layers:
            if not layer.z_end > layer.z_start:
                raise DomainError("layer with non-positive thickness")
            if layer.z_start < prev:
                raise DomainError("layers must be ordered and disjoint")
            if not (layer.z_end <= lo or layer.z_start >= hi):
                raise DomainError("the gap must be vacuum")
            if layer.material.is_perfect_conductor:
                raise DomainError("perfect-conductor marker has no finite contrast")
            prev = layer.z_end

    @classmethod
    def two_half_spaces(cls, material_1, material_2, H, **kw):
        return cls((Layer(-math.inf, 0.0, material_1), Layer(H, math.inf, material_2)), H, **kw)

    def body_layers(self, body: int):
        """Layers of one body as (depth_start, depth_end, material), depth from the gap."""
        lo, hi = self.gap_start, self.gap_start + self.separation_H
        if body == 1:
            out = [(lo - l.z_end, lo - l.z_start, l.material) for l in self.layers if l.z_end <= lo]
        else:
            out = [(l.z_start - hi, l.z_end - hi, l.material) for l in self.layers if l.z_start >= hi]
        return sorted(out, key=lambda t: t[0])

    def mirrored(self) -> "LayeredScenario":
        """Reflect through the gap midplane, exchanging the bodies."""
        c = 2 * self.gap_start + self.separation_H
        layers = tuple(Layer(c - l.z_end, c - l.z_start, l.material) for l in reversed(self.layers))
        return replace(self, layers=layers)

    def translated(self, shift: float) -> "LayeredScenario":
        layers = tuple(Layer(l.z_start + shift, l.z_end + shift, l.material) for l in self.layers)
        return replace(self, layers=layers, gap_start=self.gap_start + shift)

    def with_contrast(self, scale: float) -> "LayeredScenario":
        return replace(self, contrast_scale=float(scale))

    def describe(self) -> dict:
        return {"H": self.separation_H, "body_depth_L": self.body_depth_L, "dz": self.grid_spacing_dz,
                "cells_per_length": self.cells_per_length, "depth_factor": self.depth_factor,
                "grading": self.grading, "contrast_scale": self.contrast_scale}


# -- kernel --------------------------------------------------------------------

@dataclass(frozen=True)
class MixedGreenEntry:
    """Kernel sample at (w, q, dz); ``smooth`` is 3x3 complex, ``contact_zz`` multiplies delta(dz)."""

    smooth: np.ndarray
    contact_zz: float = 1.0


def mixed_green(w: float, q: float, dz: float) -> MixedGreenEntry:
    """Partial Fourier transform over q_z of (w^2 delta_ij + q_i q_j)/(w^2 + q^2), q_perp along x."""
    if not w > 0:
        raise DomainError("w must be positive")
    if q < 0:
        raise DomainError("q must be non-negative")
    kappa = math.hypot(w, q)
    e = math.exp(-kappa * abs(dz))
    g = np.zeros((3, 3), dtype=complex)
    g[0, 0] = kappa * e / 2
    g[1, 1] = w * w * e / (2 * kappa)
    g[2, 2] = -q * q * e / (2 * kappa)
    g[0, 2] = g[2, 0] = 1j * q * math.copysign(1.0, dz) * e / 2 if dz != 0 else 0.0
    return MixedGreenEntry(g, 1.0)


# -- z-grids -------------------------------------------------------------------

@dataclass
class ZGrid:
    z: np.ndarray
    weights: np.ndarray
    delta_eps: np.ndarray
    body: np.ndarray

    def select(self, body):
        m = self.body == body
        return ZGrid(self.z[m], self.weights[m], self.delta_eps[m], self.body[m])

    def __len__(self):
        return self.z.size


def _depth_cells(d0, d1, kappa_g, n, grading, dz):
    """Midpoint nodes and weights on [d0, d1] (depths)."""
    if dz is not None:
        m = max(1, int(math.ceil((d1 - d0) / dz * (1 - 1e-12))))
        edges = np.linspace(d0, d1, m + 1)
        return (edges[:-1] + edges[1:]) / 2, np.diff(edges)
    # xi = (n/beta) ln(1 + beta kappa d): uniform in xi, midpoint rule in xi
    a = grading * kappa_g
    x0, x1 = (n / grading) * math.log1p(a * d0), (n / grading) * math.log1p(a * d1)
    m = max(1, int(math.ceil(x1 - x0 - 1e-9)))
    dxi = (x1 - x0) / m
    xi = x0 + (np.arange(m) + 0.5) * dxi
    g = np.exp(grading * xi / n)
    return (g - 1) / a, g / (n * kappa_g) * dxi


def build_grid(scenario: LayeredScenario, w: float, q: float) -> ZGrid:
    """Node-adapted grid covering both truncated bodies (gap excluded)."""
    kappa = math.hypot(w, q)
    depth = scenario.body_depth_L if scenario.body_depth_L is not None else scenario.depth_factor / kappa
    lo, hi = scenario.gap_start, scenario.gap_start + scenario.separation_H
    zs, ws, des, bs = [], [], [], []
    for body in (1, 2):
        layers = [(a, min(b, depth), m) for a, b, m in scenario.body_layers(body) if a < depth]
        if not layers:
            continue
        des_body = [scenario.contrast_scale * float(delta_epsilon(m, w)) for _, _, m in layers]
        kappa_g = math.sqrt(max(1.0 + max(des_body), 1.0) * w * w + q * q)
        dz = scenario.grid_spacing_dz
        if dz is not None and dz > min(1.0 / kappa_g, scenario.separation_H) / 8:
            raise GridTooCoarse(f"dz={dz} does not resolve decay length {1 / kappa_g:.3e} and H")
        for (a, b, _), de in zip(layers, des_body):
            d, wt = _depth_cells(a, b, kappa_g, scenario.cells_per_length, scenario.grading, dz)
            zs.append(lo - d if body == 1 else hi + d)
            ws.append(wt)
            des.append(np.full(d.size, de))
            bs.append(np.full(d.size, body))
    if not zs:
        e = np.empty(0)
        return ZGrid(e, e, e, np.empty(0, dtype=int))
    z = np.concatenate(zs)
    order = np.argsort(z, kind="stable")
    return ZGrid(z[order], np.concatenate(ws)[order], np.concatenate(des)[order], np.concatenate(bs)[order])


# -- mode matrices -------------------------------------------------------------

@dataclass
class ModeMatrix:
    """Discretised K0^-1 dK on a z-grid.

    ``matrix`` is 3N x 3N complex with component-major ordering
    (all x nodes, then y nodes, then z nodes).
    """

    matrix: np.ndarray
    node_z: np.ndarray
    node_weights: np.ndarray
    delta_eps: np.ndarray
    kappa: float


def _kernel_blocks(z, w, q):
    kappa = math.hypot(w, q)
    dz = z[:, None] - z[None, :]
    e = np.exp(-kappa * np.abs(dz))
    sg = np.sign(dz)
    gxx = kappa * e / 2
    gyy = w * w * e / (2 * kappa)
    gzz = -q * q * e / (2 * kappa)
    c = q * sg * e / 2  # G_xz = G_zx = i c
    return gxx, gyy, gzz, c


def build_mode_matrix(scenario: LayeredScenario, w: float, q: float, grid: Optional[ZGrid] = None) -> ModeMatrix:
    """Entry ((i, z), (j, z')) = G_ij(z - z') deps(z') dz' plus deps(z) on the zz diagonal."""
    if not w > 0:
        raise DomainError("w must be positive")
    grid = grid if grid is not None else build_grid(scenario, w, q)
    z, wt, de = grid.z, grid.weights, grid.delta_eps
    n = z.size
    gxx, gyy, gzz, c = _kernel_blocks(z, w, q)
    col = (de * wt)[None, :]
    m = np.zeros((3 * n, 3 * n), dtype=complex)
    m[:n, :n] = gxx * col
    m[n:2 * n, n:2 * n] = gyy * col
    m[2 * n:, 2 * n:] = gzz * col + np.diag(de)
    m[:n, 2 * n:] = 1j * c * col
    m[2 * n:, :n] = 1j * c * col
    return ModeMatrix(m, z, wt, de, math.hypot(w, q))


def trace_powers(M: ModeMatrix, max_order: int):
    """tr[M^n] for n = 1..max_order from the eigenvalues; returns (traces, max |Im|)."""
    if max_order < 1:
        raise DomainError("max_order must be >= 1")
    if M.matrix.size == 0:
        return [0.0] * max_order, 0.0
    try:
        lam = np.linalg.eigvals(M.matrix)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from None
    out, imag = [], 0.0
    p = np.ones_like(lam)
    for _ in range(max_order):
        p = p * lam
        s = p.sum()
        out.append(float(s.real))
        imag = max(imag, abs(s.imag))
    return out, imag


def _spectrum(grid: ZGrid, w, q):
    """Eigenvalues of the TE (y) and TM (x, z) blocks, symmetrised."""
    z, wt, de = grid.z, grid.weights, grid.delta_eps
    n = z.size
    if n == 0:
        return np.empty(0), np.empty(0)
    gxx, gyy, gzz, c = _kernel_blocks(z, w, q)
    try:
        if np.all(de >= 0):
            s = np.sqrt(de * wt)
            outer = s[:, None] * s[None, :]
            te = np.linalg.eigvalsh(gyy * outer)
            tm_mat = np.empty((2 * n, 2 * n))
            tm_mat[:n, :n] = gxx * outer
            tm_mat[:n, n:] = -c * outer
            tm_mat[n:, :n] = c * outer
            tm_mat[n:, n:] = gzz * outer
            tm_mat[n:, n:][np.diag_indices(n)] += de
            tm = np.linalg.eigvalsh(tm_mat)
        else:
            col = (de * wt)[None, :]
            te = np.linalg.eigvals(gyy * col)
            tm_mat = np.block([[gxx * col, -c * col], [c * col, gzz * col + np.diag(de)]])
            tm = np.linalg.eigvals(tm_mat)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from None
    return te, tm


def node_quantities(scenario: LayeredScenario, w: float, q: float, max_order: int = MAX_ORDER):
    """Subtracted interaction traces tr[M^n], n = 1..max_order, and tr ln(1 + M).

    Returns (traces, logdet, diagnostics).
    """
    grid = build_grid(scenario, w, q)
    # zero-contrast nodes add zero rows; dropping them makes a vacuum body cancel exactly
    live = grid.delta_eps != 0
    grid = ZGrid(grid.z[live], grid.weights[live], grid.delta_eps[live], grid.body[live])
    parts = [grid, grid.select(1), grid.select(2)]
    signs = (1.0, -1.0, -1.0)
    traces = np.zeros(max_order)
    logdet = 0.0
    max_imag = 0.0
    min_eig = math.inf
    # n = 1 by linearity: the diagonals coincide entry by entry
    traces[0] = 0.0
    for part, sgn in zip(parts, signs):
        te, tm = _spectrum(part, w, q)
        lam = np.concatenate([te, tm])
        if lam.size == 0:
            continue
        max_imag = max(max_imag, float(np.max(np.abs(np.imag(lam)))))
        lam_r = np.real(lam)
        min_eig = min(min_eig, float(lam_r.min()))
        p = lam_r.copy()
        for k in range(1, max_order):
            p = p * lam_r
            traces[k] += sgn * p.sum()
        if lam_r.min() <= -1:
            logdet = math.nan
        else:
            logdet += sgn * float(np.log1p(lam_r).sum())
    return traces, logdet, {"max_imag": max_imag, "min_eig": min_eig, "n_nodes": len(grid)}


# -- energies ------------------------------------------------------------------

def _integrand_factory(scenario, max_order, theta_order, want_logdet):
    H = scenario.separation_H
    xt, wt = gauss_legendre(theta_order)
    theta = (xt + 1) * math.pi / 4
    wtheta = wt * math.pi / 4
    pref = 1.0 / (32.0 * math.pi**2)  # (1/4pi^2) * kappa^2 dkappa = t^2 dt / (8 H^3)
    signs = np.array([(-1.0) ** (n - 1) / n for n in range(1, max_order + 1)])
    ncomp = max_order + 1

    def node_vector(t):
        out = np.zeros(ncomp)
        if t * 1.0 > SKIP_EXPONENT or t <= 0:
            return out
        kappa = t / (2 * H)
        for th, wth in zip(theta.tolist(), wtheta.tolist()):
            w, q = kappa * math.cos(th), kappa * math.sin(th)
            tr, ld, diag = node_quantities(scenario, w, q, max_order)
            if want_logdet and not math.isfinite(ld):
                raise BranchViolation(f"eigenvalue {diag['min_eig']:.3e} <= -1 at zeta={w:.3e}, q={q:.3e}")
            fac = pref * t * t * math.sin(th) * wth
            out[:max_order] += fac * signs * tr
            if want_logdet:
                out[max_order] += fac * ld
        return out

    def f(ts):
        return np.array([node_vector(t) for t in np.asarray(ts).tolist()])

    return f


def _integrate_layered(scenario, max_order, quad, want_logdet=True):
    f = _integrand_factory(scenario, max_order, quad.panel_order, want_logdet)
    value, err = integrate_semi_infinite(f, "rational", quad, scale=2.0, initial=2)
    H3 = scenario.separation_H ** 3
    return value / H3, err / H3


def interaction_series(scenario: LayeredScenario, max_order: int = 6, quad: QuadratureSpec = DEFAULT_QUAD,
                       with_logdet: bool = True) -> EnergyBreakdown:
    """Per-order interaction energies; ``metadata['logdet']`` carries the log-det energy."""
    if not 2 <= max_order <= MAX_ORDER:
        raise DomainError("max_order must lie in [2, 8]")
    value, err = _integrate_layered(scenario, max_order, quad, with_logdet)
    per_order = {n: float(value[n - 1]) for n in range(1, max_order + 1)}
    total = math.fsum(per_order.values())
    meta = {"method": "layered_series", "grid": scenario.describe(), "rel_tol": quad.rel_tol,
            "order_errors": {n: float(err[n - 1]) for n in range(1, max_order + 1)}}
    if with_logdet:
        meta["logdet"] = float(value[max_order])
        meta["logdet_error"] = float(err[max_order])
    return EnergyBreakdown(total, per_order, float(np.sum(err[:max_order])), meta)


def interaction_logdet(scenario: LayeredScenario, quad: QuadratureSpec = DEFAULT_QUAD) -> EnergyBreakdown:
    """Nonperturbative interaction energy from tr ln(1 + M)."""
    res = interaction_series(scenario, 2, quad, with_logdet=True)
    return EnergyBreakdown(res.metadata["logdet"], {}, res.metadata["logdet_error"],
                           {"method": "layered_logdet", "grid": scenario.describe(), "rel_tol": quad.rel_tol})


# -- convergence ladder --------------------------------------------------------

@dataclass
class ConvergenceReport:
    rungs: list
    depth_rungs: list
    limit: float
    est_error: float
    observed_order: float
    depth_change: float
    monotone: bool
    metadata: dict = field(default_factory=dict)


def _fixed_rule_logdet(scenario, panels, order):
    """Log-det energy on a fixed product rule (identical nodes across grids)."""
    x, w = gauss_legendre(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    u = ((edges[:-1, None] + edges[1:, None]) / 2 + np.diff(edges)[:, None] / 2 * x).ravel()
    wu = (np.diff(edges)[:, None] / 2 * w).ravel()
    t, jac = map_semi_infinite(u, "rational", 2.0)
    f = _integrand_factory(scenario, 2, order, True)
    vals = f(t)[:, 2]
    return math.fsum((vals * jac * wu).tolist()) / scenario.separation_H ** 3


def convergence_report(scenario: LayeredScenario, quad: QuadratureSpec = DEFAULT_QUAD,
                       levels: int = 3, panels: int = 6) -> ConvergenceReport:
    """Grid-halving and depth-doubling ladder for the log-det energy.

    Rungs use cells_per_length n * 2^k for k = -1, 0, ..., levels - 2 (so the
    scenario's own grid is the second rung) on one fixed quadrature rule.
    The Richardson limit assumes second order; ``est_error`` is the distance
    of the scenario's own-grid energy from it.
    """
    if levels < 3:
        raise DomainError("need at least three rungs")
    if scenario.grid_spacing_dz is not None:
        spacings = [scenario.grid_spacing_dz * 2.0 ** (1 - k) for k in range(levels)]
        variants = [replace(scenario, grid_spacing_dz=s) for s in spacings]
        resolution = [1.0 / s for s in spacings]
    else:
        base = scenario.cells_per_length
        cells = [max(4, base // 2)] + [base * 2 ** k for k in range(levels - 1)]
        variants = [replace(scenario, cells_per_length=c) for c in cells]
        resolution = cells
    energies = [_fixed_rule_logdet(v, panels, quad.panel_order) for v in variants]
    rungs = [{"resolution": r, "E_logdet": e} for r, e in zip(resolution, energies)]
    diffs = np.diff(energies)
    monotone = bool(np.all(np.sign(diffs) == np.sign(diffs[0]))) and bool(np.all(np.abs(diffs[1:]) < np.abs(diffs[:-1])))
    if not monotone:
        warnings.warn("grid ladder is not monotonically convergent", NonMonotoneConvergence)
    ratio = diffs[-2] / diffs[-1] if diffs[-1] != 0 else math.inf
    order = math.log2(abs(ratio)) if ratio not in (0, math.inf) else math.nan
    limit = energies[-1] + diffs[-1] / 3.0
    est = abs(energies[1] - limit)
    if scenario.body_depth_L is None:
        deeper = replace(scenario, depth_factor=2 * scenario.depth_factor)
    else:
        deeper = replace(scenario, body_depth_L=2 * scenario.body_depth_L)
    e_deep = _fixed_rule_logdet(deeper, panels, quad.panel_order)
    depth_change = abs(e_deep - energies[1]) / abs(energies[1]) if energies[1] else 0.0
    return ConvergenceReport(rungs, [{"depth": "base", "E_logdet": energies[1]}, {"depth": "doubled", "E_logdet": e_deep}],
                             float(limit), float(est), float(order), float(depth_change), monotone,
                             {"panels": panels, "panel_order": quad.panel_order, "grid": scenario.describe()})
