"""Dielectric response on the imaginary-frequency axis.

All frequencies are in units of a reference frequency ``omega_ref`` and all
lengths in units of ``c / omega_ref`` (hbar = c = 1 internally).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.constants import c as C_LIGHT, hbar as HBAR
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NoPlasmaFrequency, StaticDivergence, TableRange

KINDS = ("drude_lorentz", "tabulated", "vacuum", "constant", "perfect_conductor")


@dataclass(frozen=True)
class Units:
    """Fixed internal convention hbar = c = 1 with one reference frequency.

    Parameters
    ----------
    omega_ref : float
        Reference angular frequency in rad/s.
    """

    omega_ref: float

    def __post_init__(self):
        if not self.omega_ref > 0:
            raise DomainError("omega_ref must be positive")

    @property
    def length_unit(self) -> float:
        """c / omega_ref in metres."""
        return C_LIGHT / self.omega_ref

    @property
    def energy_per_area_unit(self) -> float:
        """hbar omega_ref^3 / c^2 in J/m^2."""
        return HBAR * self.omega_ref**3 / C_LIGHT**2


@dataclass(frozen=True)
class DielectricModel:
    """Imaginary-frequency dielectric function eps(i zeta).

    Use the constructors :meth:`drude_lorentz`, :meth:`vacuum`,
    :meth:`constant`, :meth:`perfect_conductor` and :meth:`tabulated`
    rather than calling the class directly.
    """

    kind: str
    omega_p: float = 0.0
    omega_0: float = 0.0
    gamma: float = 0.0
    epsilon_static: float = 1.0
    table: Optional[tuple] = None
    _interp: Optional[PchipInterpolator] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown material kind {self.kind!r}")
        if min(self.omega_p, self.omega_0, self.gamma) < 0:
            raise DomainError("omega_p, omega_0 and gamma must be non-negative")
        if self.kind == "constant" and not self.epsilon_static >= 1:
            raise DomainError("constant permittivity must be >= 1")
        if self.kind == "tabulated":
            zeta, eps = (np.asarray(a, dtype=float) for a in zip(*self.table))
            if zeta.size < 2:
                raise DomainError("tabulated model needs at least two samples")
            if zeta[0] < 0 or np.any(np.diff(zeta) <= 0):
                raise DomainError("table frequencies must be >= 0 and strictly increasing")
            if np.any(eps < 1) or np.any(np.diff(eps) > 0):
                raise DomainError("table permittivities must be >= 1 and non-increasing")
            scale = zeta[zeta > 0][0]
            interp = PchipInterpolator(np.arcsinh(zeta / scale), eps, extrapolate=False)
            object.__setattr__(self, "_interp", interp)

    # -- constructors -----------------------------------------------------
    @classmethod
    def drude_lorentz(cls, omega_p: float, omega_0: float = 0.0, gamma: float = 0.0):
        return cls("drude_lorentz", omega_p=float(omega_p), omega_0=float(omega_0), gamma=float(gamma))

    @classmethod
    def vacuum(cls):
        return cls("vacuum")

    @classmethod
    def constant(cls, epsilon: float):
        """Frequency-independent permittivity (no high-frequency transparency)."""
        return cls("constant", epsilon_static=float(epsilon))

    @classmethod
    def perfect_conductor(cls):
        """Symbolic eps -> infinity marker."""
        return cls("perfect_conductor")

    @classmethod
    def tabulated(cls, zeta, epsilon):
        table = tuple((float(z), float(e)) for z, e in zip(zeta, epsilon))
        return cls("tabulated", table=table)

    @classmethod
    def from_csv(cls, path):
        """Read a two-column (zeta, eps) CSV; a non-numeric first row is a header."""
        rows = []
        with open(path, newline="") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row or not "".join(row).strip():
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if i == 0:
                        continue
                    raise DomainError(f"{path}: bad row {i + 1}: {row!r}")
        return cls.tabulated(*zip(*rows))

    # -- properties -------------------------------------------------------
    @property
    def is_perfect_conductor(self) -> bool:
        return self.kind == "perfect_conductor"

    @property
    def is_vacuum(self) -> bool:
        return self.kind == "vacuum" or (self.kind == "drude_lorentz" and self.omega_p == 0) or (
            self.kind == "constant" and self.epsilon_static == 1
        )

    def describe(self) -> dict:
        """Metadata record, including the extrapolation rule for tables."""
        d = {"kind": self.kind}
        if self.kind == "drude_lorentz":
            d.update(omega_p=self.omega_p, omega_0=self.omega_0, gamma=self.gamma)
        elif self.kind == "constant":
            d["epsilon"] = self.epsilon_static
        elif self.kind == "tabulated":
            d.update(n_samples=len(self.table), tail_rule="1 + C/zeta^2 beyond last sample")
        return d


def epsilon_at(model: DielectricModel, zeta):
    """eps(i zeta) for scalar or array ``zeta >= 0``.

    Returns ``inf`` for the perfect-conductor marker.
    """
    z = np.asarray(zeta, dtype=float)
    if np.any(z < 0) or np.any(np.isnan(z)):
        raise DomainError("zeta must be non-negative")
    kind = model.kind
    if kind == "vacuum":
        out = np.ones_like(z)
    elif kind == "constant":
        out = np.full_like(z, model.epsilon_static)
    elif kind == "perfect_conductor":
        out = np.full_like(z, np.inf)
    elif kind == "drude_lorentz":
        denom = model.omega_0**2 + model.gamma * z + z * z
        if model.omega_p > 0 and np.any((denom == 0) & (z == 0)):
            raise StaticDivergence("Drude model without restoring force is singular at zeta = 0")
        with np.errstate(divide="ignore", over="ignore"):
            # an underflowed denominator at tiny zeta > 0 overflows to inf
            safe = np.where(denom > 0, denom, 1.0)
            out = 1.0 + np.where(denom > 0, model.omega_p**2 / safe, np.inf if model.omega_p > 0 else 0.0)
    else:
        out = _tabulated_eval(model, z)
    return float(out) if out.ndim == 0 else out


def delta_epsilon(model: DielectricModel, zeta):
    """Dielectric contrast eps(i zeta) - 1."""
    return epsilon_at(model, zeta) - 1.0


def _tabulated_eval(model, z):
    zeta, eps = (np.asarray(a) for a in zip(*model.table))
    if np.any(z < zeta[0]):
        raise TableRange(f"zeta below first table sample {zeta[0]}")
    scale = zeta[zeta > 0][0]
    out = np.empty_like(z)
    inside = z <= zeta[-1]
    out[inside] = model._interp(np.arcsinh(z[inside] / scale))
    # continuous 1 + C/zeta^2 tail anchored on the last sample
    c_tail = (eps[-1] - 1.0) * zeta[-1] ** 2
    out[~inside] = 1.0 + c_tail / z[~inside] ** 2
    return out


def plasma_wavelength(model: DielectricModel) -> float:
    """2 pi c / omega_p in internal length units."""
    if model.kind != "drude_lorentz" or model.omega_p <= 0:
        raise NoPlasmaFrequency(f"{model.kind} model has no plasma frequency")
    return 2 * math.pi / model.omega_p


def cm_contrast(epsilon):
    """Clausius-Mossotti contrast 3(eps - 1)/(eps + 2); exactly 3 for eps = inf."""
    e = np.asarray(epsilon, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(e), 3.0, 3.0 * (e - 1.0) / (e + 2.0))
    return float(out) if out.ndim == 0 else out


def figure2_model(gamma: float = 0.0, omega_p: float = 1.0) -> DielectricModel:
    """Drude-Lorentz model with omega_0^2 = 2 omega_p^2, so eps(0) = 1.5."""
    return DielectricModel.drude_lorentz(omega_p, math.sqrt(2.0) * omega_p, gamma)


def write_table_csv(path, zeta, epsilon):
    lines = ["zeta,epsilon"] + [f"{z!r},{e!r}" for z, e in zip(map(float, zeta), map(float, epsilon))]
    Path(path).write_text("\n".join(lines) + "\n")
