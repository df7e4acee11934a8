"""Second-order energy between two periodic height-profiled surfaces.

The pair kernel K(rho, g) = int dzeta zeta^4 c1 c2 W(zeta rho, zeta g) is
assembled from four frequency moments
M_k(R) = int dzeta zeta^k c1 c2 exp(-2 zeta R), tabulated once per material
pair, and then interpolated on a (ln r, phi) grid with r = |(rho, g)|.  The
lateral double sum is split with a smooth partition of unity: displacements
inside 2R_c (R_c = cell size) are summed over the sample lattice and its
periodic images; the remainder is integrated as a continuum, which reduces
to the flat-plate L-kernel integral minus the near part.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import ContactError, ConvergenceFailure, DomainError
from .exact_planar import EnergyBreakdown, _contrast_fn, l_kernel_energy
from .materials import DielectricModel
from .quadrature import QuadratureSpec, gauss_legendre, integrate_semi_infinite

DEFAULT_QUAD = QuadratureSpec(rel_tol=1e-9, abs_tol=1e-15)
TABLE_TOL = 1e-6


# -- height maps ----------------------------------------------------------------

@dataclass(frozen=True)
class HeightMap:
    """Periodic N x N height field on a square cell of edge ``cell_size``."""

    samples: np.ndarray
    cell_size: float
    label: int = 2

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
            raise DomainError("height map must be a non-empty square grid")
        if not np.all(np.isfinite(s)):
            raise DomainError("height map contains non-finite values")
        if not self.cell_size > 0:
            raise DomainError("cell_size must be positive")
        if self.label not in (1, 2):
            raise DomainError("label must be 1 or 2")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def spacing(self) -> float:
        return self.cell_size / self.n

    def coordinates(self):
        x = np.arange(self.n) * self.spacing
        return np.meshgrid(x, x, indexing="ij")

    def max_slope(self) -> float:
        """Largest |grad h| from periodic central differences."""
        if self.n < 3:
            return 0.0
        s = self.samples
        gx = (np.roll(s, -1, 0) - np.roll(s, 1, 0)) / (2 * self.spacing)
        gy = (np.roll(s, -1, 1) - np.roll(s, 1, 1)) / (2 * self.spacing)
        return float(np.max(np.hypot(gx, gy)))

    def shifted(self, di: int, dj: int) -> "HeightMap":
        return HeightMap(np.roll(self.samples, (di, dj), axis=(0, 1)), self.cell_size, self.label)

    def negated(self, label: Optional[int] = None) -> "HeightMap":
        return HeightMap(-self.samples, self.cell_size, self.label if label is None else label)

    # -- constructors ---------------------------------------------------------
    @classmethod
    def flat(cls, n: int, cell_size: float, offset: float = 0.0, label: int = 2):
        return cls(np.full((n, n), float(offset)), cell_size, label)

    @classmethod
    def sinusoid(cls, n: int, cell_size: float, amplitude: float, kx: int = 1, ky: int = 0, label: int = 2):
        x, y = cls.flat(n, cell_size).coordinates()
        k = 2 * math.pi / cell_size
        return cls(amplitude * np.cos(k * (kx * x + ky * y)), cell_size, label)

    @classmethod
    def gaussian_bump(cls, n: int, cell_size: float, amplitude: float, width: float, label: int = 2):
        """Bump centred in the cell, distances taken with the minimum image."""
        x, y = cls.flat(n, cell_size).coordinates()
        c = cell_size / 2
        dx = (x - c + c) % cell_size - c
        dy = (y - c + c) % cell_size - c
        return cls(amplitude * np.exp(-(dx**2 + dy**2) / (2 * width**2)), cell_size, label)

    # -- csv ------------------------------------------------------------------
    def to_csv(self, path) -> None:
        """First line ``N,cell_size``; then N rows of N heights (repr, exact round trip)."""
        lines = [f"{self.n},{float(self.cell_size)!r}"]
        lines += [",".join(repr(float(v)) for v in row) for row in self.samples]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path, label: int = 2) -> "HeightMap":
        rows = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
        if not rows:
            raise DomainError(f"{path}: empty height map")
        try:
            head = rows[0].split(",")
            n, cell = int(head[0]), float(head[1])
            data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
        except (ValueError, IndexError):
            raise DomainError(f"{path}: malformed height map") from None
        if data.shape != (n, n):
            raise DomainError(f"{path}: expected {n}x{n} heights, got {data.shape}")
        return cls(data, cell, label)


@dataclass(frozen=True)
class RoughScenario:
    material_1: DielectricModel
    material_2: DielectricModel
    h1: HeightMap
    h2: HeightMap
    separation_H: float

    def __post_init__(self):
        if self.h1.n != self.h2.n or self.h1.cell_size != self.h2.cell_size:
            raise DomainError("height maps must share N and cell_size")
        if not self.separation_H > 0:
            raise DomainError("separation_H must be positive")

    @property
    def min_gap(self) -> float:
        return self.separation_H + float(self.h2.samples.min()) - float(self.h1.samples.max())

    @property
    def max_gap(self) -> float:
        return self.separation_H + float(self.h2.samples.max()) - float(self.h1.samples.min())

    def exchanged(self) -> "RoughScenario":
        """(h1, h2, eps1, eps2) -> (-h2, -h1, eps2, eps1)."""
        return RoughScenario(self.material_2, self.material_1, self.h2.negated(1), self.h1.negated(2),
                             self.separation_H)


# -- pair kernel ----------------------------------------------------------------

class PairKernel:
    """K(rho, g) = int dzeta zeta^4 c1 c2 W(zeta rho, zeta g) for one material pair.

    Parameters
    ----------
    material_1, material_2 : DielectricModel
    contrast : {"bare", "cm"}
    r_range : (float, float)
        Range of r = sqrt(rho^2 + g^2) the moment tables must cover.
    """

    _PER_EFOLD = 12

    def __init__(self, material_1, material_2, contrast, r_range, quad=DEFAULT_QUAD):
        c1 = _contrast_fn(material_1, contrast)
        c2 = _contrast_fn(material_2, contrast)
        r_lo = 0.5 * r_range[0]
        # the s-integral reaches R = g e^{tau/2}; beyond r_hi the moments are static
        self.r_lo, self.r_hi = r_lo, 1e6 * r_range[1]
        n = int(math.ceil(self._PER_EFOLD * math.log(self.r_hi / r_lo))) + 1
        self.ln_r = np.linspace(math.log(r_lo), math.log(self.r_hi), n)
        R = np.exp(self.ln_r)
        ks = (0, 1, 2, 4)
        facts = np.array([math.factorial(k) for k in ks], dtype=float)

        # normalised m_k(R) = M_k (2R)^{k+1} / k! = int dx x^k e^{-x}/k! c1 c2(x / 2R)
        def f(x):
            zeta = x[:, None] / (2 * R[None, :])
            cc = c1(zeta) * c2(zeta)
            w = np.stack([x**k * np.exp(-x) / fk for k, fk in zip(ks, facts)], axis=1)
            return (w[:, :, None] * cc[:, None, :]).reshape(x.size, -1)

        vals, errs = integrate_semi_infinite(f, "rational", quad, scale=4.0)
        m = np.asarray(vals).reshape(len(ks), n)
        if np.any(~(m > 0)):
            raise DomainError("material pair has a non-positive contrast product")
        self.moment_error = float(np.max(np.asarray(errs).reshape(len(ks), n) / m))
        self._splines = {k: CubicSpline(self.ln_r, np.log(m[i])) for i, k in enumerate(ks)}
        self._facts = dict(zip(ks, facts))

    def moment(self, k, R):
        """M_k(R)."""
        lr = np.clip(np.log(R), self.ln_r[0], self.ln_r[-1])
        if np.any(np.log(R) < self.ln_r[0] - 1e-12):
            raise DomainError("moment requested below table range")
        return np.exp(self._splines[k](lr)) * self._facts[k] / (2 * R) ** (k + 1)

    def direct(self, rho, g, panels: int = 12):
        """K at arbitrary points by fixed composite Gauss-Legendre rules."""
        rho, g = np.broadcast_arrays(np.abs(np.asarray(rho, float)), np.asarray(g, float))
        shape = rho.shape
        rho, g = rho.ravel(), g.ravel()
        if np.any(~(g > 0)):
            raise DomainError("gap must be positive")
        r = np.hypot(rho, g)
        x, w = gauss_legendre(16)
        out = np.zeros(rho.size)
        # Gamma(0, .) part: int_1^inf 8 M_4(r t)/t dt with t = e^sigma, sigma in [0, 16]
        sig, ws = _composite(x, w, 0.0, 16.0, 8)
        out += 8 * (self.moment(4, r[:, None] * np.exp(sig)[None, :]) * ws[None, :]).sum(axis=1)
        # s-integral in tau = ln s, split where g^2 s ~ rho^2
        tc = 2 * np.log1p(rho / g)
        for lo, hi, npan in ((np.zeros_like(tc), tc, panels), (tc, tc + 40.0, panels)):
            frac, wf = _composite(x, w, 0.0, 1.0, npan)
            tau = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
            s = np.exp(tau)
            gs = (g * g)[:, None] * s
            R2 = (rho * rho)[:, None] + gs
            R = np.sqrt(R2)
            br = (3 * self.moment(0, R) / R2**2 + 6 * self.moment(1, R) / (R2 * R)
                  + 4 * (self.moment(2, R) - gs * self.moment(4, R)) / R2)
            out += ((s**-0.5) * br * wf[None, :]).sum(axis=1) * (hi - lo)
        return out.reshape(shape)


def _composite(x, w, a, b, panels):
    edges = np.linspace(a, b, panels + 1)
    half = np.diff(edges) / 2
    nodes = ((edges[:-1] + edges[1:]) / 2)[:, None] + half[:, None] * x[None, :]
    return nodes.ravel(), (half[:, None] * w[None, :]).ravel()


class KernelTable:
    """Cubic interpolant of ln(r^5 K) on a (ln r, phi) grid, phi = atan(rho / g).

    The grid is doubled until probe points between nodes match
    :meth:`PairKernel.direct` to ``tol``.
    """

    def __init__(self, kernel: PairKernel, r_min, r_max, phi_max, tol=TABLE_TOL, max_doublings=3):
        self.kernel = kernel
        lo, hi = math.log(r_min) - 0.01, math.log(r_max) + 0.01
        phi_hi = min(phi_max * 1.001 + 1e-3, math.pi / 2 - 1e-6)
        nr = max(8, int(math.ceil(6 * (hi - lo))) + 1)
        nphi = 24
        for _ in range(max_doublings + 1):
            lr = np.linspace(lo, hi, nr)
            ph = np.linspace(0.0, phi_hi, nphi)
            self._spl = self._fit(lr, ph)
            err = self._probe(lr, ph)
            if err <= tol:
                break
            nr, nphi = 2 * nr - 1, 2 * nphi - 1
        else:
            raise ConvergenceFailure(f"kernel table did not reach {tol:g} (probe error {err:.2e})")
        self.max_probe_error = err
        self.shape = (nr, nphi)

    def _fit(self, lr, ph):
        L, P = np.meshgrid(lr, ph, indexing="ij")
        r = np.exp(L)
        k = self.kernel.direct(r * np.sin(P), r * np.cos(P))
        return RectBivariateSpline(lr, ph, np.log(r**5 * k), kx=3, ky=3)

    def _probe(self, lr, ph):
        # midpoints of a deterministic subset of cells
        i = np.unique(np.linspace(0, lr.size - 2, min(lr.size - 1, 12)).astype(int))
        j = np.unique(np.linspace(0, ph.size - 2, min(ph.size - 1, 12)).astype(int))
        L, P = np.meshgrid((lr[i] + lr[i + 1]) / 2, (ph[j] + ph[j + 1]) / 2, indexing="ij")
        r = np.exp(L)
        ref = self.kernel.direct(r * np.sin(P), r * np.cos(P))
        got = np.exp(self._spl.ev(L, P)) / r**5
        return float(np.max(np.abs(got / ref - 1)))

    def __call__(self, rho, g):
        r = np.hypot(rho, g)
        lr = np.log(r)
        return np.exp(self._spl.ev(lr, np.arctan2(rho, g))) / r**5


# -- energies -------------------------------------------------------------------

def _cutoff(rho, R):
    """Smooth partition: 1 for rho <= R, 0 for rho >= 2R."""
    s = np.clip((np.asarray(rho, float) - R) / R, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1 - s, 1.0)), 0.0)
        b = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    return a / (a + b)


def _displacements(n, spacing, radius):
    m = int(math.ceil(radius / spacing))
    a = np.arange(-m, m + 1)
    A, B = np.meshgrid(a, a, indexing="ij")
    rho = spacing * np.hypot(A, B)
    keep = rho < radius
    return A[keep], B[keep], rho[keep]


def _e2_general(scenario: RoughScenario, quad: QuadratureSpec, contrast: str) -> EnergyBreakdown:
    m1, m2 = scenario.material_1, scenario.material_2
    meta = {"method": "eq6", "contrast": contrast, "n": scenario.h1.n, "cell_size": scenario.h1.cell_size,
            "max_slope": max(scenario.h1.max_slope(), scenario.h2.max_slope())}
    if m1.is_vacuum or m2.is_vacuum:
        return EnergyBreakdown(0.0, {2: 0.0}, 0.0, meta)
    gmin, gmax = scenario.min_gap, scenario.max_gap
    if not gmin > 0:
        raise ContactError(f"surfaces touch or overlap (minimum gap {gmin:.6g})")
    hm2 = scenario.h2
    n, cell, dx = hm2.n, hm2.cell_size, hm2.spacing
    dA, area = dx * dx, cell * cell
    Rc = cell
    rho_max = 2 * Rc
    kern = PairKernel(m1, m2, contrast, (gmin, math.hypot(rho_max, gmax)), quad)
    table = KernelTable(kern, gmin, math.hypot(rho_max, gmax), math.atan2(rho_max, gmin))

    h2 = scenario.h2.samples
    h1 = scenario.h1.samples
    da, db, rho = _displacements(n, dx, rho_max)
    chi = _cutoff(rho, Rc)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    g_x = scenario.separation_H + h2  # per body-2 sample

    # near field: sum over lattice displacements D, x' = x - D (periodic)
    near = np.zeros((n, n))
    chunk = max(1, 400_000 // (n * n))
    for lo in range(0, rho.size, chunk):
        sl = slice(lo, lo + chunk)
        src = h1[(ii[None] - da[sl, None, None]) % n, (jj[None] - db[sl, None, None]) % n]
        g = g_x[None] - src
        near += (table(rho[sl, None, None], g) * chi[sl, None, None]).sum(axis=0)
    near *= dA

    # far field: (dA/A) sum_x' F(g), F(g) = 2 pi [J(g) - int_0^{2Rc} rho K chi drho]
    g_all = g_x[:, :, None, None] - h1[None, None, :, :]
    g_unique, inverse = np.unique(g_all, return_inverse=True)
    if g_unique.size > 2048:
        g_nodes = np.linspace(gmin, gmax, 257)
        fvals = _far_field(m1, m2, g_nodes, table, Rc, quad, contrast)
        F = CubicSpline(g_nodes, fvals)(g_all)
    else:
        F = _far_field(m1, m2, g_unique, table, Rc, quad, contrast)[inverse].reshape(g_all.shape)
    far = (dA / area) * F.reshape(n, n, -1).sum(axis=2)

    per_x = dA * (near + far)
    total = -math.fsum(per_x.ravel().tolist()) / (128 * math.pi**3 * area)
    meta.update(table_shape=table.shape, table_probe_error=table.max_probe_error,
                moment_error=kern.moment_error, cutoff_radius=Rc)
    est = abs(total) * (table.max_probe_error + kern.moment_error + 10 * quad.rel_tol)
    return EnergyBreakdown(total, {2: total}, est, meta)


def _far_field(m1, m2, g, table, Rc, quad, contrast):
    g = np.asarray(g, float)
    J = -64 * math.pi**2 * l_kernel_energy(m1, m2, g, quad, contrast)[0]
    x, w = gauss_legendre(16)
    rho, wr = _composite(x, w, 0.0, 2 * Rc, 32)
    inner = (table(rho[None, :], g[:, None]) * (rho * _cutoff(rho, Rc) * wr)[None, :]).sum(axis=1)
    return 2 * math.pi * (J - inner)


def e2_rough(scenario: RoughScenario, quad: QuadratureSpec = DEFAULT_QUAD) -> EnergyBreakdown:
    """Second-order energy per unit area from the full W kernel."""
    return _e2_general(scenario, quad, "bare")


def e2_pws(scenario: RoughScenario, quad: QuadratureSpec = DEFAULT_QUAD) -> EnergyBreakdown:
    """As :func:`e2_rough` with Clausius-Mossotti contrasts (conductors allowed)."""
    res = _e2_general(scenario, quad, "cm")
    res.metadata["method"] = "pws"
    return res


def e2_proximity(material_1, material_2, h2: HeightMap, H: float, quad: QuadratureSpec = DEFAULT_QUAD,
                 contrast: str = "bare") -> EnergyBreakdown:
    """Area average of the flat second-order energy at the local gap H + h2(x)."""
    gaps = H + h2.samples
    if not gaps.min() > 0:
        raise ContactError(f"surfaces touch or overlap (minimum gap {gaps.min():.6g})")
    meta = {"method": "eq8", "contrast": contrast, "n": h2.n, "max_slope": h2.max_slope()}
    uniq, inverse = np.unique(gaps, return_inverse=True)
    vals, errs = l_kernel_energy(material_1, material_2, uniq, quad, contrast)
    per = np.asarray(vals)[inverse]
    total = math.fsum(per.ravel().tolist()) / per.size
    est = float(np.max(np.asarray(errs))) if np.size(errs) else 0.0
    return EnergyBreakdown(total, {2: total}, est, meta)
