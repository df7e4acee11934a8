"""Reference energies for two flat half-spaces.

Exact Lifshitz formula, perfect-conductor limit, the pairwise-summation
(Clausius-Mossotti) closed form and Taylor coefficients of the exact energy
in a uniform contrast scaling eps -> 1 + lam * (eps - 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IllConditioned
from .materials import DielectricModel, cm_contrast, delta_epsilon, epsilon_at, plasma_wavelength
from .quadrature import QuadratureSpec, integrate_nested, integrate_semi_infinite
from .specfun import L_kernel

TRUNCATION_CONVENTION = "partial sums include every order n <= N, odd orders too"


@dataclass(frozen=True)
class PlanarScenario:
    material_1: DielectricModel
    material_2: DielectricModel
    separation_H: float

    def __post_init__(self):
        if not self.separation_H > 0:
            raise DomainError("separation_H must be positive")

    def swapped(self) -> "PlanarScenario":
        return PlanarScenario(self.material_2, self.material_1, self.separation_H)


@dataclass
class EnergyBreakdown:
    """Energy per unit area with optional per-order contributions."""

    total: float
    per_order: dict = field(default_factory=dict)
    est_error: float = 0.0
    metadata: dict = field(default_factory=dict)

    def partial_sum(self, order: int) -> float:
        return math.fsum(v for n, v in sorted(self.per_order.items()) if n <= order)


# -- exact Lifshitz -----------------------------------------------------------

def _round_trips(de1, de2, p, pc1=False, pc2=False):
    """Products of TE and TM reflection factors of the two interfaces.

    ``s - p`` is written as ``de/(s + p)`` so small contrasts keep full
    relative precision; works for complex contrasts as well.
    """

    def factors(de, pc):
        if pc:
            return 1.0, -1.0
        s = np.sqrt(de + p * p)
        sp = s + p
        s_minus_p = de / sp
        eps = 1.0 + de
        te = s_minus_p / sp
        tm = (s_minus_p - p * de) / (s + p * eps)
        return te, tm

    te1, tm1 = factors(de1, pc1)
    te2, tm2 = factors(de2, pc2)
    return te1 * te2, tm1 * tm2


def _lifshitz_integral(scenario, quad, de_scale=None):
    """(1/4pi^2) int dzeta zeta^2 int_1^inf dp p [ln(1 - rTE e^-x) + ln(1 - rTM e^-x)].

    Integrated as H^-3 times a double integral over u = zeta H and
    t = 2 p u (lower limit 2u), so tolerances act on the H-free part.
    ``de_scale`` is an optional array of contrast multipliers, giving a
    vector result.
    """
    m1, m2, H = scenario.material_1, scenario.material_2, scenario.separation_H
    pc1, pc2 = m1.is_perfect_conductor, m2.is_perfect_conductor
    if de_scale is not None and (pc1 or pc2):
        raise DomainError("contrast scaling is undefined for the perfect-conductor marker")
    pref = 1.0 / (16.0 * math.pi**2)

    def f(u, t):
        zeta = u / H
        de1 = 0.0 if pc1 else delta_epsilon(m1, zeta)
        de2 = 0.0 if pc2 else delta_epsilon(m2, zeta)
        p = t / (2.0 * u)
        if de_scale is not None:
            p = p[:, None]
            de1 = de1 * de_scale[None, :]
            de2 = de2 * de_scale[None, :]
        rte, rtm = _round_trips(de1, de2, p, pc1, pc2)
        decay = np.exp(-t)
        if de_scale is not None:
            decay = decay[:, None]
            t = t[:, None]
        with np.errstate(under="ignore"):
            return pref * t * (np.log1p(-rte * decay) + np.log1p(-rtm * decay))

    value, err = integrate_nested(f, quad, outer_transform="rational", inner_transform="exponential",
                                  outer_scale=1.0, inner_scale=1.0, inner_lower=lambda u: 2.0 * u)
    return value / H**3, err / H**3


def exact_lifshitz_energy(scenario: PlanarScenario, quad: QuadratureSpec = QuadratureSpec()) -> EnergyBreakdown:
    """Lifshitz energy per unit area of two half-spaces across a vacuum gap."""
    if scenario.material_1.is_vacuum or scenario.material_2.is_vacuum:
        return EnergyBreakdown(0.0, est_error=0.0, metadata={"method": "exact", "note": "vacuum body"})
    value, err = _lifshitz_integral(scenario, quad)
    return EnergyBreakdown(float(value), est_error=float(err),
                           metadata={"method": "exact", "rel_tol": quad.rel_tol,
                                     "material_1": scenario.material_1.describe(),
                                     "material_2": scenario.material_2.describe()})


def perfect_conductor_energy(H: float) -> float:
    """-pi^2/720 / H^3."""
    if not H > 0:
        raise DomainError("H must be positive")
    return -math.pi**2 / 720.0 / H**3


def conductor_limit_study(H: float, eps_values, quad: QuadratureSpec = QuadratureSpec()):
    """Exact energies for frequency-independent eps, approaching the conductor limit."""
    out = []
    for eps in eps_values:
        m = DielectricModel.constant(eps)
        out.append(exact_lifshitz_energy(PlanarScenario(m, m, H), quad).total)
    return np.array(out)


# -- second-order kernel route ---------------------------------------------

def _contrast_fn(model, kind):
    if kind == "cm":
        return lambda z: cm_contrast(epsilon_at(model, z))
    if model.is_perfect_conductor:
        raise DomainError("bare contrast of a perfect conductor is infinite; use the CM replacement")
    return lambda z: delta_epsilon(model, z)


def l_kernel_energy(material_1, material_2, d, quad: QuadratureSpec = QuadratureSpec(), contrast: str = "bare"):
    """-(1/64 pi^2) int dzeta zeta^2 c1 c2 L(zeta d) for one or many gaps ``d``.

    ``contrast`` is ``"bare"`` (eps - 1) or ``"cm"`` (Clausius-Mossotti).
    Integrated in u = zeta d so a frequency-independent contrast gives an
    exactly d^-3 result.  Returns (value, error) with the shape of ``d``.
    """
    d_arr = np.atleast_1d(np.asarray(d, dtype=float))
    if np.any(~(d_arr > 0)):
        raise DomainError("gap must be positive")
    if material_1.is_vacuum or material_2.is_vacuum:
        z = np.zeros_like(d_arr)
        return (0.0, 0.0) if np.ndim(d) == 0 else (z, z.copy())
    c1 = _contrast_fn(material_1, contrast)
    c2 = _contrast_fn(material_2, contrast)
    const = all(m.kind in ("constant", "perfect_conductor") for m in (material_1, material_2))
    dmin = float(d_arr.min())

    # one shared integral over v = zeta * dmin; gap k sees u = v d_k / dmin
    ratio = d_arr / dmin
    if const:
        k = float(c1(0.0) * c2(0.0))
        val, err = integrate_semi_infinite(lambda u: u * u * L_kernel(u), "rational", quad)
        vals = -k * val / (64 * math.pi**2 * d_arr**3)
        errs = k * err / (64 * math.pi**2 * d_arr**3)
    else:
        def f(v):
            zeta = v / dmin
            u = v[:, None] * ratio[None, :]
            return (v * v)[:, None] * L_kernel(u) * (c1(zeta) * c2(zeta))[:, None]

        val, err = integrate_semi_infinite(f, "rational", quad)
        vals = -val / (64 * math.pi**2 * dmin**3)
        errs = err / (64 * math.pi**2 * dmin**3)
    if np.ndim(d) == 0:
        return float(vals[0]), float(errs[0])
    return vals, errs


def pws_planar_energy(scenario: PlanarScenario, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Pairwise-summation energy: the L-kernel formula with CM contrasts."""
    return l_kernel_energy(scenario.material_1, scenario.material_2, scenario.separation_H, quad, "cm")[0]


# -- Taylor coefficients in the contrast ---------------------------------

def _max_contrast(model):
    if model.kind == "drude_lorentz":
        return float(delta_epsilon(model, 0.0)) if model.omega_0 > 0 else math.inf
    if model.kind == "constant":
        return model.epsilon_static - 1
    if model.kind == "tabulated":
        return model.table[0][1] - 1
    return 0.0


def taylor_in_contrast(scenario: PlanarScenario, max_order: int, quad: QuadratureSpec = QuadratureSpec(rel_tol=1e-9),
                       method: str = "contour", n_points: int = 32, radius: float | None = None,
                       cond_limit: float = 1e10) -> EnergyBreakdown:
    """Coefficients c_n of E(lam) = sum_n c_n lam^n, eps_i = 1 + lam (eps_i - 1).

    ``method="contour"`` samples E on a circle |lam| = radius and extracts
    coefficients by a discrete Fourier transform (well conditioned).
    ``method="vandermonde"`` fits E(k/m), k = 1..m, m = max_order + 2, to
    powers lam^2..lam^m and raises IllConditioned above ``cond_limit``.
    Every sample shares one set of quadrature nodes.
    """
    if not 2 <= max_order <= 8:
        raise DomainError("max_order must lie in [2, 8]")
    meta = {"method": method, "truncation": TRUNCATION_CONVENTION}
    if method == "contour":
        if n_points < 2 * max_order + 2:
            raise DomainError("n_points too small for requested order")
        dmax = max(_max_contrast(scenario.material_1), _max_contrast(scenario.material_2), 1e-300)
        r = radius if radius is not None else 0.5 / max(1.0, dmax)
        lam = r * np.exp(2j * np.pi * np.arange(n_points) / n_points)
        samples, err = _lifshitz_integral(scenario, quad, de_scale=lam)
        coeffs = np.fft.fft(samples) / n_points / r ** np.arange(n_points)
        c = coeffs.real
        meta.update(radius=r, n_points=n_points, c0=float(c[0]), c1=float(c[1]),
                    max_imag=float(np.max(np.abs(coeffs.imag[: max_order + 1]))))
        coef_err = float(np.max(err)) / r ** np.arange(max_order + 1)
    elif method == "vandermonde":
        m = max_order + 2
        lam = np.arange(1, m + 1) / m
        V = lam[:, None] ** np.arange(2, m + 1)[None, :]
        cond = float(np.linalg.cond(V))
        meta["condition"] = cond
        if cond > cond_limit:
            raise IllConditioned(f"Vandermonde condition {cond:.3e} exceeds {cond_limit:.1e}")
        samples, err = _lifshitz_integral(scenario, quad, de_scale=lam.astype(float))
        sol = np.linalg.lstsq(V, samples.real, rcond=None)[0]
        c = np.concatenate([[0.0, 0.0], sol])
        coef_err = cond * float(np.max(err)) * np.ones(m + 1)
        meta.update(c0=0.0, c1=0.0)
    else:
        raise DomainError(f"unknown extraction method {method!r}")
    per_order = {n: float(c[n]) for n in range(2, max_order + 1)}
    total = math.fsum(per_order.values())
    return EnergyBreakdown(total, per_order, float(np.max(coef_err[2: max_order + 1])), meta)


# -- Figure-style ratio table -------------------------------------------------

def figure2_table(H_values, model: DielectricModel, orders=(2, 4, 6),
                  quad: QuadratureSpec = QuadratureSpec(rel_tol=1e-9)):
    """Ratios of truncated series and of the CM approximation to the exact energy.

    Identical media on both sides.  Returns a list of dicts with keys
    ``H``, ``H_over_lambda_p``, ``E_exact``, ``ratio_<N>`` and ``ratio_CM``.
    """
    lam_p = plasma_wavelength(model)
    rows = []
    for H in H_values:
        sc = PlanarScenario(model, model, float(H))
        exact = exact_lifshitz_energy(sc, quad).total
        series = taylor_in_contrast(sc, max(orders), quad)
        row = {"H": float(H), "H_over_lambda_p": float(H) / lam_p, "E_exact": exact}
        for n in orders:
            row[f"ratio_{n}"] = series.partial_sum(n) / exact
        row["ratio_CM"] = pws_planar_energy(sc, quad) / exact
        rows.append(row)
    return rows


def ratio_crossover(x, ratio) -> float:
    """Location of the steepest change of ``ratio`` against ln x.

    This is where the curve passes between its small- and large-x plateaus
    (the inflection in log scale); refined by a parabola through the
    three finite-difference slopes around the maximum.
    """
    lx = np.log(np.asarray(x, dtype=float))
    r = np.asarray(ratio, dtype=float)
    if lx.size < 4:
        raise DomainError("need at least four points")
    mid = (lx[1:] + lx[:-1]) / 2
    slope = np.abs(np.diff(r) / np.diff(lx))
    k = int(np.argmax(slope))
    if 0 < k < slope.size - 1:
        y0, y1, y2 = slope[k - 1: k + 2]
        denom = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        step = mid[k + 1] - mid[k]
        return float(np.exp(mid[k] + shift * step))
    return float(np.exp(mid[k]))
