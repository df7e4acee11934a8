"""Scenario-file driven command line front end.

Usage::

    python -m casimir_contrast exact --scenario plates.json --out exact.csv
    python -m casimir_contrast series --scenario fig2.json --threads 4
    python -m casimir_contrast figure2 --scenario fig2.json --tol 1e-8

Exit codes: 0 success, 2 configuration/schema error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import CasimirError, DomainError
from .exact_planar import (PlanarScenario, exact_lifshitz_energy, figure2_table, pws_planar_energy)
from .layered_engine import DEFAULT_QUAD as LAYERED_QUAD, Layer, LayeredScenario, convergence_report, interaction_series
from .materials import DielectricModel, Units, plasma_wavelength
from .quadrature import QuadratureSpec
from .rough_surface import DEFAULT_QUAD as ROUGH_QUAD, HeightMap, RoughScenario, e2_proximity, e2_pws, e2_rough

THREADS_ENV = "CASIMIR_THREADS"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

PositiveFloat = Annotated[float, Field(gt=0)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# -- schema ----------------------------------------------------------------------

class UnitsSection(_Strict):
    omega_ref: PositiveFloat
    output: Literal["internal", "si"] = "internal"


class MaterialSection(_Strict):
    name: str
    kind: Literal["drude_lorentz", "tabulated", "vacuum", "constant", "perfect_conductor"]
    omega_p: Optional[float] = Field(default=None, ge=0)
    omega_0: Optional[float] = Field(default=None, ge=0)
    gamma: Optional[float] = Field(default=None, ge=0)
    epsilon: Optional[float] = Field(default=None, ge=1)
    table_path: Optional[str] = None

    @model_validator(mode="after")
    def _fields_for_kind(self):
        need = {"drude_lorentz": ("omega_p", "omega_0", "gamma"), "constant": ("epsilon",),
                "tabulated": ("table_path",)}.get(self.kind, ())
        allowed = set(need)
        for name in ("omega_p", "omega_0", "gamma", "epsilon", "table_path"):
            value = getattr(self, name)
            if name in need and value is None:
                raise ValueError(f"{self.kind} material requires {name!r}")
            if name not in allowed and value is not None:
                raise ValueError(f"{name!r} is not a parameter of a {self.kind} material")
        return self


class PlanarGeometry(_Strict):
    type: Literal["planar"]
    body_1: str
    body_2: str
    H: Union[PositiveFloat, list[PositiveFloat]]


class LayerSection(_Strict):
    z_start: Optional[float]
    z_end: Optional[float]
    material: str


class LayeredGeometry(_Strict):
    type: Literal["layered"]
    layers: list[LayerSection]
    H: PositiveFloat
    body_depth_L: Optional[PositiveFloat] = None
    dz: Optional[PositiveFloat] = None


class RoughGeometry(_Strict):
    type: Literal["rough"]
    body_1: str
    body_2: str
    H: PositiveFloat
    h1_path: Optional[str] = None
    h2_path: str


GEOMETRIES = {"planar": PlanarGeometry, "layered": LayeredGeometry, "rough": RoughGeometry}


class QuadratureSection(_Strict):
    rel_tol: Optional[PositiveFloat] = None
    abs_tol: Optional[PositiveFloat] = None
    max_panels: Optional[int] = Field(default=None, ge=4)
    panel_order: Optional[int] = Field(default=None, ge=2)
    cells_per_length: Optional[int] = Field(default=None, ge=4)
    depth_factor: Optional[PositiveFloat] = None


class GridSection(_Strict):
    min: PositiveFloat
    max: PositiveFloat
    points: int = Field(ge=4)


class RunSection(_Strict):
    orders: int = Field(default=6, ge=2, le=8)
    H_over_lambda_p: Optional[GridSection] = None
    ladder: bool = False


class ScenarioFile(_Strict):
    units: UnitsSection
    materials: list[MaterialSection]
    geometry: dict
    quadrature: QuadratureSection = QuadratureSection()
    run: RunSection = RunSection()


class ConfigError(Exception):
    """Schema or configuration problem (exit code 2)."""


def _loc(prefix, loc):
    return ".".join(str(p) for p in (*prefix, *loc))


def _validation_message(exc: ValidationError, prefix=()):
    return "; ".join(f"{_loc(prefix, e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors())


class Scenario:
    """Validated scenario with resolved materials and geometry."""

    def __init__(self, data: dict, base_dir: Path):
        try:
            self.file = ScenarioFile.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(_validation_message(exc)) from None
        gtype = self.file.geometry.get("type")
        if gtype not in GEOMETRIES:
            raise ConfigError(f"geometry.type: expected one of {sorted(GEOMETRIES)}, got {gtype!r}")
        try:
            self.geometry = GEOMETRIES[gtype].model_validate(self.file.geometry)
        except ValidationError as exc:
            raise ConfigError(_validation_message(exc, ("geometry",))) from None
        self.base_dir = base_dir
        self.units = Units(self.file.units.omega_ref)
        self.materials = {}
        for i, m in enumerate(self.file.materials):
            if m.name in self.materials:
                raise ConfigError(f"materials.{i}.name: duplicate material {m.name!r}")
            self.materials[m.name] = self._build_material(m, i)

    def _build_material(self, m: MaterialSection, i: int) -> DielectricModel:
        try:
            if m.kind == "drude_lorentz":
                return DielectricModel.drude_lorentz(m.omega_p, m.omega_0, m.gamma)
            if m.kind == "constant":
                return DielectricModel.constant(m.epsilon)
            if m.kind == "tabulated":
                return DielectricModel.from_csv(self.path(m.table_path))
            return DielectricModel.vacuum() if m.kind == "vacuum" else DielectricModel.perfect_conductor()
        except (OSError, DomainError) as exc:
            raise ConfigError(f"materials.{i}: {exc}") from None

    def path(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.base_dir / q

    def material(self, name: str, where: str) -> DielectricModel:
        if name not in self.materials:
            raise ConfigError(f"{where}: unknown material {name!r}")
        return self.materials[name]

    def require(self, *types):
        if self.geometry.type not in types:
            raise ConfigError(f"geometry.type: command needs {' or '.join(types)}, got {self.geometry.type!r}")

    def quad(self, base: QuadratureSpec, tol: Optional[float], threads: int) -> QuadratureSpec:
        q = self.file.quadrature
        kw = {k: getattr(q, k) for k in ("rel_tol", "abs_tol", "max_panels", "panel_order") if getattr(q, k) is not None}
        if tol is not None:
            kw["rel_tol"] = tol
        try:
            return replace(base, workers=threads, **kw)
        except DomainError as exc:
            raise ConfigError(f"quadrature: {exc}") from None

    # -- geometry builders -------------------------------------------------
    def planar(self, H) -> PlanarScenario:
        g = self.geometry
        return PlanarScenario(self.material(g.body_1, "geometry.body_1"), self.material(g.body_2, "geometry.body_2"), H)

    def h_values(self):
        H = self.geometry.H
        return [H] if isinstance(H, float) else list(H)

    def layered(self, H=None) -> LayeredScenario:
        g = self.geometry
        q = self.file.quadrature
        kw = {}
        if q.cells_per_length is not None:
            kw["cells_per_length"] = q.cells_per_length
        if q.depth_factor is not None:
            kw["depth_factor"] = q.depth_factor
        try:
            if g.type == "planar":
                return LayeredScenario.two_half_spaces(self.material(g.body_1, "geometry.body_1"),
                                                       self.material(g.body_2, "geometry.body_2"), H, **kw)
            layers = []
            for i, layer in enumerate(g.layers):
                z0 = -math.inf if layer.z_start is None else layer.z_start
                z1 = math.inf if layer.z_end is None else layer.z_end
                layers.append(Layer(z0, z1, self.material(layer.material, f"geometry.layers.{i}.material")))
            return LayeredScenario(tuple(layers), g.H, body_depth_L=g.body_depth_L, grid_spacing_dz=g.dz, **kw)
        except DomainError as exc:
            raise ConfigError(f"geometry: {exc}") from None

    def two_half_spaces(self, sc: LayeredScenario) -> Optional[PlanarScenario]:
        """Planar equivalent when the layered profile is just two half-spaces."""
        ls = sc.layers
        if len(ls) == 2 and ls[0].z_start == -math.inf and ls[0].z_end == sc.gap_start \
                and ls[1].z_start == sc.gap_start + sc.separation_H and ls[1].z_end == math.inf:
            return PlanarScenario(ls[0].material, ls[1].material, sc.separation_H)
        return None

    def rough(self) -> RoughScenario:
        g = self.geometry
        try:
            h2 = HeightMap.from_csv(self.path(g.h2_path), label=2)
            h1 = HeightMap.from_csv(self.path(g.h1_path), label=1) if g.h1_path else HeightMap.flat(h2.n, h2.cell_size, label=1)
            return RoughScenario(self.material(g.body_1, "geometry.body_1"), self.material(g.body_2, "geometry.body_2"),
                                 h1, h2, g.H)
        except (OSError, DomainError) as exc:
            raise ConfigError(f"geometry: {exc}") from None

    # -- output units --------------------------------------------------------
    def length(self, x):
        return x * self.units.length_unit if self.file.units.output == "si" else x

    def energy(self, e):
        return e * self.units.energy_per_area_unit if self.file.units.output == "si" else e


# -- csv -------------------------------------------------------------------------

def fmt(v) -> str:
    """12 significant digits for floats; other values verbatim."""
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.11e}"
    return str(v)


def write_csv(header, rows, out):
    text = "\n".join([",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_bytes(text.encode())
    return text


# -- commands --------------------------------------------------------------------

def cmd_exact(sc: Scenario, quad_tol, threads):
    sc.require("planar")
    quad = sc.quad(QuadratureSpec(), quad_tol, threads)
    rows = []
    for H in sc.h_values():
        res = exact_lifshitz_energy(sc.planar(H), quad)
        rows.append([sc.length(H), sc.energy(res.total), sc.energy(res.est_error)])
    return ["H", "E_exact", "est_error"], rows


def cmd_series(sc: Scenario, quad_tol, threads):
    sc.require("planar", "layered")
    N = sc.file.run.orders
    quad = sc.quad(LAYERED_QUAD, quad_tol, threads)
    exact_quad = sc.quad(QuadratureSpec(rel_tol=1e-8), None, threads)
    hs = sc.h_values() if sc.geometry.type == "planar" else [sc.geometry.H]
    rows = []
    for H in hs:
        lay = sc.layered(H)
        res = interaction_series(lay, N, quad)
        est = res.est_error
        if sc.file.run.ladder:
            est = convergence_report(lay, quad).est_error
        planar = sc.two_half_spaces(lay)
        exact = exact_lifshitz_energy(planar, exact_quad).total if planar is not None else math.nan
        e_sum = res.partial_sum(N)
        rows.append([sc.length(H)] + [sc.energy(res.per_order[n]) for n in range(2, N + 1)]
                    + [sc.energy(e_sum), sc.energy(res.metadata["logdet"]), sc.energy(exact), sc.energy(est)])
    header = ["H"] + [f"E_order_{n}" for n in range(2, N + 1)] + ["E_sum", "E_logdet", "E_exact", "est_error"]
    return header, rows


def cmd_figure2(sc: Scenario, quad_tol, threads):
    sc.require("planar")
    grid = sc.file.run.H_over_lambda_p
    if grid is None:
        raise ConfigError("run.H_over_lambda_p: figure2 needs a grid {min, max, points}")
    model = sc.material(sc.geometry.body_1, "geometry.body_1")
    if sc.geometry.body_2 != sc.geometry.body_1:
        raise ConfigError("geometry.body_2: figure2 needs identical media on both sides")
    try:
        lam_p = plasma_wavelength(model)
    except DomainError as exc:
        raise ConfigError(f"geometry.body_1: {exc}") from None
    x = np.geomspace(grid.min, grid.max, grid.points)
    quad = sc.quad(QuadratureSpec(rel_tol=1e-9), quad_tol, threads)
    table = figure2_table(x * lam_p, model, (2, 4, 6), quad)
    rows = [[float(xi), r["ratio_2"], r["ratio_4"], r["ratio_6"], r["ratio_CM"]] for xi, r in zip(x, table)]
    return ["H_over_lambda_p", "ratio_2", "ratio_4", "ratio_6", "ratio_CM"], rows


def cmd_rough(sc: Scenario, quad_tol, threads):
    sc.require("rough")
    rs = sc.rough()
    quad = sc.quad(ROUGH_QUAD, quad_tol, threads)
    conductors = rs.material_1.is_perfect_conductor or rs.material_2.is_perfect_conductor
    rows = []
    if not conductors:
        r6 = e2_rough(rs, quad)
        rows.append(["eq6", sc.energy(r6.total), sc.energy(r6.est_error)])
        if not np.any(rs.h1.samples):
            r8 = e2_proximity(rs.material_1, rs.material_2, rs.h2, rs.separation_H, quad)
            rows.append(["eq8", sc.energy(r8.total), sc.energy(r8.est_error)])
    rp = e2_pws(rs, quad)
    rows.append(["pws", sc.energy(rp.total), sc.energy(rp.est_error)])
    return ["method", "energy", "est_error"], rows


def cmd_pws(sc: Scenario, quad_tol, threads):
    sc.require("planar")
    quad = sc.quad(QuadratureSpec(rel_tol=1e-9), quad_tol, threads)
    rows = []
    for H in sc.h_values():
        p = sc.planar(H)
        e_pws = fmt(sc.energy(pws_planar_energy(p, quad)))
        e_exact = fmt(sc.energy(exact_lifshitz_energy(p, quad).total))
        # ratio of the values as printed, so the columns are consistent
        num, den = float(e_pws), float(e_exact)
        ratio = num / den if den != 0 else math.nan
        rows.append([sc.length(H), num, den, ratio])
    return ["H", "E_pws", "E_exact", "ratio"], rows


def cmd_convergence(sc: Scenario, quad_tol, threads):
    sc.require("planar", "layered")
    quad = sc.quad(LAYERED_QUAD, quad_tol, threads)
    hs = sc.h_values() if sc.geometry.type == "planar" else [sc.geometry.H]
    rows = []
    for H in hs:
        rep = convergence_report(sc.layered(H), quad)
        common = [sc.energy(rep.limit), sc.energy(rep.est_error), float(rep.observed_order)]
        for r in rep.rungs:
            rows.append([sc.length(H), "grid", float(r["resolution"]), sc.energy(r["E_logdet"])] + common)
        rows.append([sc.length(H), "depth_x2", math.nan, sc.energy(rep.depth_rungs[1]["E_logdet"])] + common)
    return ["H", "rung", "resolution", "E_logdet", "limit", "est_error", "observed_order"], rows


COMMANDS = {"exact": cmd_exact, "series": cmd_series, "figure2": cmd_figure2, "rough": cmd_rough,
            "pws": cmd_pws, "convergence": cmd_convergence}


# -- entry point -------------------------------------------------------------------

def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="casimir_contrast", description="Lifshitz energies from scenario files.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--scenario", required=True, help="JSON scenario file.")
    ap.add_argument("--out", default=None, help="CSV output path (default stdout).")
    ap.add_argument("--threads", type=int, default=None,
                    help=f"Worker threads (default ${THREADS_ENV} or 1); never changes output.")
    ap.add_argument("--tol", type=float, default=None, help="Override the relative quadrature tolerance.")
    return ap


def load_scenario(path) -> Scenario:
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")
    return Scenario(data, p.parent)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads if args.threads is not None else _default_threads()
    if threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.tol is not None and not args.tol > 0:
        print("error: --tol must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        sc = load_scenario(args.scenario)
        header, rows = COMMANDS[args.command](sc, args.tol, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CasimirError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_csv(header, rows, args.out)
    return EXIT_OK
