import copy
import csv
import io
import json
import math
import re

import numpy as np
import pytest

from casimir_contrast import HeightMap
from casimir_contrast.cli import THREADS_ENV, main
from casimir_contrast.materials import write_table_csv

FIG2 = {"name": "m", "kind": "drude_lorentz", "omega_p": 1.0, "omega_0": math.sqrt(2.0), "gamma": 0.0}
PC = {"name": "pc", "kind": "perfect_conductor"}
VAC = {"name": "vac", "kind": "vacuum"}
UNITS = {"omega_ref": 1.0e15}


def planar(materials, body, H, **extra):
    return copy.deepcopy({"units": UNITS, "materials": materials,
                          "geometry": {"type": "planar", "body_1": body, "body_2": body, "H": H}, **extra})


def run(tmp_path, command, scenario, *flags, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(scenario))
    out = tmp_path / f"{command}.csv"
    code = main([command, "--scenario", str(p), "--out", str(out), *flags])
    return code, (out.read_bytes() if out.exists() else None)


def rows(data):
    return list(csv.DictReader(io.StringIO(data.decode())))


def test_exact_conductor_marker_and_large_epsilon(tmp_path):
    code, data = run(tmp_path, "exact", planar([PC], "pc", 1.0))
    assert code == 0
    assert float(rows(data)[0]["E_exact"]) == pytest.approx(-0.0137078, rel=5e-3)
    big = planar([{"name": "c", "kind": "constant", "epsilon": 1e8}], "c", [1.0, 2.0])
    code, data = run(tmp_path, "exact", big)
    r = rows(data)
    assert code == 0 and [float(x["H"]) for x in r] == [1.0, 2.0]
    assert float(r[0]["E_exact"]) == pytest.approx(-math.pi**2 / 720, rel=5e-3)


def test_exact_vacuum(tmp_path):
    code, data = run(tmp_path, "exact", planar([VAC], "vac", 1.0))
    assert code == 0 and float(rows(data)[0]["E_exact"]) == 0.0


def test_schema_rejects_unknown_key_with_path(tmp_path, capsys):
    bad = {"units": UNITS, "materials": [VAC], "geometry": {"type": "planar", "body_1": "vac", "body_2": "vac",
                                                          "separation": 1.0}}
    code, data = run(tmp_path, "exact", bad)
    assert code == 2 and data is None
    assert "geometry.separation" in capsys.readouterr().err


@pytest.mark.parametrize("mutate, path", [
    (lambda s: s.update(extra=1), "extra"),
    (lambda s: s["materials"][0].pop("gamma"), "materials.0"),
    (lambda s: s["materials"][0].update(epsilon=2.0), "materials.0"),
    (lambda s: s["geometry"].update(body_1="nope"), "geometry.body_1"),
    (lambda s: s["geometry"].update(H=-1.0), "geometry.H"),
    (lambda s: s["geometry"].update(type="sphere"), "geometry.type"),
    (lambda s: s["units"].pop("omega_ref"), "units.omega_ref"),
])
def test_schema_errors(tmp_path, capsys, mutate, path):
    sc = planar([dict(FIG2)], "m", 1.0)
    mutate(sc)
    code, _ = run(tmp_path, "exact", sc)
    assert code == 2
    assert path in capsys.readouterr().err


def test_wrong_geometry_for_command(tmp_path):
    assert run(tmp_path, "rough", planar([PC], "pc", 1.0))[0] == 2


def test_unreadable_scenario(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert main(["exact", "--scenario", str(p)]) == 2
    assert main(["exact", "--scenario", str(tmp_path / "missing.json")]) == 2


def test_pws_conductors_and_consistency(tmp_path):
    code, data = run(tmp_path, "pws", planar([PC], "pc", [1.0, 3.0]))
    assert code == 0
    for r in rows(data):
        assert abs(float(r["ratio"]) - 0.797) < 1e-3
        assert f"{float(r['E_pws']) / float(r['E_exact']):.11e}" == r["ratio"]


def test_pws_vacuum(tmp_path):
    code, data = run(tmp_path, "pws", planar([VAC], "vac", 1.0))
    assert code == 0 and float(rows(data)[0]["E_pws"]) == 0.0


def _rough_scenario(tmp_path, body, h2, h1=None):
    h2.to_csv(tmp_path / "h2.csv")
    geom = {"type": "rough", "body_1": body, "body_2": body, "H": 1.0, "h2_path": "h2.csv"}
    if h1 is not None:
        h1.to_csv(tmp_path / "h1.csv")
        geom["h1_path"] = "h1.csv"
    return {"units": UNITS, "materials": [dict(FIG2), PC], "geometry": geom}


def test_rough_flat_maps(tmp_path):
    code, data = run(tmp_path, "rough", _rough_scenario(tmp_path, "m", HeightMap.flat(8, 4.0)))
    r = {x["method"]: float(x["energy"]) for x in rows(data)}
    assert code == 0 and set(r) == {"eq6", "eq8", "pws"}
    assert abs(r["eq6"] / r["eq8"] - 1) < 5e-3


def test_rough_conductors_pws_only(tmp_path):
    code, data = run(tmp_path, "rough", _rough_scenario(tmp_path, "pc", HeightMap.flat(8, 4.0)))
    r = rows(data)
    assert code == 0 and [x["method"] for x in r] == ["pws"]
    assert float(r[0]["energy"]) == pytest.approx(-69 / (640 * math.pi**2), rel=5e-3)


def test_rough_no_eq8_when_body_1_profiled(tmp_path):
    sc = _rough_scenario(tmp_path, "m", HeightMap.flat(8, 4.0), HeightMap.sinusoid(8, 4.0, 0.1, label=1))
    code, data = run(tmp_path, "rough", sc)
    assert code == 0 and [x["method"] for x in rows(data)] == ["eq6", "pws"]


def test_rough_contact_exit_3(tmp_path, capsys):
    sc = _rough_scenario(tmp_path, "m", HeightMap.flat(8, 4.0, -1.0))
    code, data = run(tmp_path, "rough", sc)
    assert code == 3 and data is None
    assert "ContactError" in capsys.readouterr().err


def test_series_figure2_point(tmp_path):
    code, data = run(tmp_path, "series", planar([dict(FIG2)], "m", 1.0))
    r = rows(data)[0]
    assert code == 0
    assert list(r) == ["H", "E_order_2", "E_order_3", "E_order_4", "E_order_5", "E_order_6", "E_sum", "E_logdet",
                       "E_exact", "est_error"]
    exact = float(r["E_exact"])
    assert abs(float(r["E_sum"]) - exact) < abs(float(r["E_order_2"]) - exact)
    assert abs(float(r["E_logdet"]) / exact - 1) < 0.01


def test_series_layered_profile(tmp_path):
    sc = {"units": UNITS, "materials": [dict(FIG2), {"name": "c", "kind": "constant", "epsilon": 2.0}],
          "geometry": {"type": "layered", "H": 1.0, "layers": [
              {"z_start": None, "z_end": -0.5, "material": "m"}, {"z_start": -0.5, "z_end": 0.0, "material": "c"},
              {"z_start": 1.0, "z_end": None, "material": "m"}]},
          "run": {"orders": 3}}
    code, data = run(tmp_path, "series", sc)
    r = rows(data)[0]
    assert code == 0 and r["E_exact"] == "nan" and "E_order_4" not in r


def test_figure2_small_grid(tmp_path):
    sc = planar([dict(FIG2)], "m", 1.0, run={"H_over_lambda_p": {"min": 0.05, "max": 5.0, "points": 4}})
    code, data = run(tmp_path, "figure2", sc)
    r = rows(data)
    assert code == 0 and len(r) == 4
    vals = np.array([[float(x[k]) for k in ("ratio_2", "ratio_4", "ratio_6", "ratio_CM")] for x in r])
    assert np.all(np.isfinite(vals)) and np.all(vals > 0)
    assert abs(vals[0, 3] - 1) < abs(vals[0, 0] - 1)


def test_figure2_needs_grid(tmp_path):
    assert run(tmp_path, "figure2", planar([dict(FIG2)], "m", 1.0))[0] == 2


def test_convergence_small(tmp_path):
    sc = planar([dict(FIG2)], "m", 1.0, quadrature={"panel_order": 4, "cells_per_length": 8})
    code, data = run(tmp_path, "convergence", sc)
    r = rows(data)
    assert code == 0 and [x["rung"] for x in r] == ["grid", "grid", "grid", "depth_x2"]


def test_csv_format_and_threads(tmp_path, monkeypatch):
    sc = planar([dict(FIG2)], "m", [0.5, 1.0])
    _, a = run(tmp_path, "exact", sc)
    _, b = run(tmp_path, "exact", sc, "--threads", "3")
    monkeypatch.setenv(THREADS_ENV, "2")
    _, c = run(tmp_path, "exact", sc)
    assert a == b == c
    text = a.decode()
    assert "\r" not in text and text.endswith("\n")
    for line in text.splitlines()[1:]:
        for cell in line.split(","):
            assert re.fullmatch(r"-?\d\.\d{11}e[+-]\d{2}", cell)


def test_tabulated_material_and_si_output(tmp_path):
    write_table_csv(tmp_path / "eps.csv", [0.0, 0.5, 1.0, 2.0], [1.5, 1.4, 1.3, 1.1])
    sc = {"units": {"omega_ref": 1.0e15, "output": "si"},
          "materials": [{"name": "t", "kind": "tabulated", "table_path": "eps.csv"}],
          "geometry": {"type": "planar", "body_1": "t", "body_2": "t", "H": 1.0}}
    code, data = run(tmp_path, "exact", sc)
    r = rows(data)[0]
    assert code == 0
    assert float(r["H"]) == pytest.approx(2.99792458e-7)
    assert float(r["E_exact"]) < 0


def test_bad_flags(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(planar([PC], "pc", 1.0)))
    assert main(["exact", "--scenario", str(p), "--threads", "0"]) == 2
    assert main(["exact", "--scenario", str(p), "--tol", "-1"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["bogus", "--scenario", str(p)])
    assert exc.value.code == 2
