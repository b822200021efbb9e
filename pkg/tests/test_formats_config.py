import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hextile.config import DEFAULTS, ConfigError, RunConfig, parse_value
from hextile.formats import (
    DataError,
    principal_cuts,
    read_excitation,
    read_solution,
    read_tiling,
    read_trace,
    write_curve,
    write_cuts,
    write_excitation,
    write_scan,
    write_solution,
    write_tiling,
    write_trace,
)
from hextile.iga import RunTrace
from hextile.lattice import build_aperture
from hextile.pattern import ExcitationSet, PowerMask, ScanMap, UVGrid, array_factor, build_reference
from hextile.synthesis import Problem
from hextile.tiling import InvalidTilingError, maximal_tiling, minimal_tiling

RHO = math.sqrt(3) / 4


@pytest.fixture(scope="module")
def ap2():
    return build_aperture(2, RHO)


# --------------------------------------------------------------------------
# Tiling files


def test_tiling_round_trip(tmp_path, ap2):
    for t in (minimal_tiling(ap2), maximal_tiling(ap2)):
        p = tmp_path / "t.csv"
        write_tiling(p, ap2, t)
        assert read_tiling(p, ap2) == t
        lines = p.read_text().splitlines()
        assert lines[0] == "# rings: 2"
        assert lines[2] == "q,orientation,triangle_a,triangle_b"
        assert len(lines) == 3 + 12


def _rows(tmp_path, ap2):
    p = tmp_path / "t.csv"
    write_tiling(p, ap2, minimal_tiling(ap2))
    return p, p.read_text().splitlines()


def test_tiling_triangle_used_twice(tmp_path, ap2):
    p, lines = _rows(tmp_path, ap2)
    first = lines[3].split(",")
    second = lines[4].split(",")
    dup = first[2]
    second[2] = dup
    lines[4] = ",".join(second)
    p.write_text("\n".join(l for l in lines if not l.startswith("# word")) + "\n")
    with pytest.raises(InvalidTilingError) as err:
        read_tiling(p, ap2)
    assert int(dup) in err.value.triangles


def test_tiling_missing_row(tmp_path, ap2):
    p, lines = _rows(tmp_path, ap2)
    gone = lines.pop(5).split(",")
    p.write_text("\n".join(l for l in lines if not l.startswith("# word")) + "\n")
    with pytest.raises(InvalidTilingError) as err:
        read_tiling(p, ap2)
    assert set(err.value.triangles) >= {int(gone[2]), int(gone[3])}


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda ls: ls.__setitem__(2, "a,b,c,d"), "expected header"),
        (lambda ls: ls.__setitem__(3, "0,V,1"), "expected 4 fields"),
        (lambda ls: ls.__setitem__(3, "0,V,x,1"), "non-integer"),
        (lambda ls: ls.__setitem__(3, ls[3].replace(ls[3].split(",")[1], "Q")), "unknown orientation"),
        (lambda ls: ls.__setitem__(0, "# rings: 3"), "for 3 rings"),
        (lambda ls: ls.__setitem__(1, "# word: 1 0 0 0 0 0 0"), "word line"),
    ],
)
def test_tiling_malformed(tmp_path, ap2, mutate, message):
    p, lines = _rows(tmp_path, ap2)
    mutate(lines)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match=message):
        read_tiling(p, ap2)


def test_tiling_wrong_orientation_named(tmp_path, ap2):
    p, lines = _rows(tmp_path, ap2)
    f = lines[3].split(",")
    f[1] = {"V": "L", "L": "R", "R": "V"}[f[1]]
    lines[3] = ",".join(f)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match=r":4: tile"):
        read_tiling(p, ap2)


# --------------------------------------------------------------------------
# Excitation files


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1e6), st.floats(-1e6, 1e6)), min_size=1, max_size=30))
def test_excitation_round_trip_bit_exact(tmp_path_factory, rows):
    ex = ExcitationSet([a for a, _ in rows], [p for _, p in rows])
    path = tmp_path_factory.mktemp("ex") / "e.csv"
    write_excitation(path, ex)
    back = read_excitation(path, len(rows))
    assert back == ex


@pytest.mark.parametrize(
    "body, message",
    [
        ("triangle_index,amplitude,phase_deg\n0,1,0\n", "no row for triangles"),
        ("triangle_index,amplitude,phase_deg\n0,1,0\n0,1,0\n", ":3: triangle 0 listed twice"),
        ("triangle_index,amplitude,phase_deg\n0,1,0\n1,-1,0\n", ":3: amplitude"),
        ("triangle_index,amplitude,phase_deg\n0,1,0\n5,1,0\n", ":3: triangle index 5"),
        ("triangle_index,amplitude,phase_deg\n0,1,0\n1,abc,0\n", ":3: cannot parse"),
        ("triangle_index,amplitude,phase_deg\n0,1\n", ":2: expected 3 fields"),
        ("index,a,p\n0,1,0\n1,1,0\n", "expected header"),
    ],
)
def test_excitation_rejects(tmp_path, body, message):
    p = tmp_path / "e.csv"
    p.write_text(body)
    with pytest.raises(DataError, match=message):
        read_excitation(p, 2)


def test_excitation_missing_file(tmp_path):
    with pytest.raises(DataError):
        read_excitation(tmp_path / "none.csv", 2)


def test_reference_from_file(tmp_path, ap2):
    rng = np.random.default_rng(0)
    ex = ExcitationSet(rng.random(24), rng.uniform(-90, 90, 24))
    p = tmp_path / "ref.csv"
    write_excitation(p, ex)
    assert build_reference(ap2, "file", path=p) == ex


# --------------------------------------------------------------------------
# Reports


def test_cuts_peak_at_broadside(tmp_path, ap2):
    pat = array_factor(ap2, build_reference(ap2), 101)
    cuts = principal_cuts(pat)
    for t, db in cuts.values():
        k = int(np.argmax(db))
        assert db[k] == pytest.approx(0.0, abs=1e-12)
        assert t[k] == pytest.approx(0.0, abs=1e-12)
    p = tmp_path / "cuts.csv"
    write_cuts(p, pat)
    assert p.read_text().splitlines()[0] == "cut,coordinate,power_db"


def test_trace_round_trip(tmp_path):
    tr = RunTrace(best=[3.0, 2.0, 2.0], mean=[4.0, 3.5, 3.0], evaluations=[10, 18, 25], reason="max-iterations")
    p = tmp_path / "trace.csv"
    write_trace(p, tr)
    assert p.read_text().splitlines()[0] == "iteration,best_chi,mean_chi,evaluations"
    assert read_trace(p) == [(0, 3.0, 4.0, 10), (1, 2.0, 3.5, 18), (2, 2.0, 3.0, 25)]


def test_scan_and_curve_files(tmp_path):
    sm = ScanMap(np.array([0.0, 5.0]), np.array([0.0, 15.0, 30.0]), np.zeros((2, 3)) - 20, np.ones((2, 3)))
    p = tmp_path / "scan.csv"
    write_scan(p, sm)
    lines = p.read_text().splitlines()
    assert lines[0] == "theta_gamma,phi_gamma,sll_db,d_dbi" and len(lines) == 7
    write_curve(tmp_path / "c.csv", np.array([3.0, 2.0, 1.0]))
    assert (tmp_path / "c.csv").read_text().splitlines() == ["rank,chi", "1,3.0", "2,2.0", "3,1.0"]


def test_solution_reingest(tmp_path, ap2):
    problem = Problem(ap2, build_reference(ap2, "cosine-taper"), PowerMask(floor_db=-20.0), UVGrid(61))
    rec = problem.solution(maximal_tiling(ap2), {"method": "EDM", "config_hash": "abc"})
    write_solution(tmp_path / "best", ap2, rec)
    tiling, data = read_solution(tmp_path / "best", ap2)
    assert tiling == rec.tiling
    assert data["word"] == list(rec.word)
    assert data["provenance"]["config_hash"] == "abc"
    again = problem.chi_tiling(tiling)
    assert abs(again - data["chi"]) <= 1e-12 * max(abs(again), 1e-300)
    assert len(data["coefficients"]) == 12


# --------------------------------------------------------------------------
# Config


def test_config_defaults_and_hash():
    a = RunConfig.from_dict({})
    b = RunConfig.from_dict({"output": "elsewhere"})
    assert a.data == RunConfig.from_dict(DEFAULTS).data
    assert a.hash() == b.hash()
    assert a.hash() != RunConfig.from_dict({"seed": 1}).hash()
    assert RunConfig.from_dict(yaml_round_trip(a)).hash() == a.hash()


def yaml_round_trip(cfg):
    import yaml

    return yaml.safe_load(cfg.dump())


def test_config_load_and_override(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text("schema_version: 1\naperture:\n  rings: 3\nmask:\n  floor_db: -26\n")
    cfg = RunConfig.load(p)
    assert cfg["aperture"]["rings"] == 3 and cfg["mask"]["floor_db"] == -26
    cfg2 = cfg.override({"mask.shape": "ellipse", "grid": 101})
    assert cfg2["mask"]["shape"] == "ellipse" and cfg2["grid"] == 101
    assert cfg["grid"] == 201


@pytest.mark.parametrize(
    "raw",
    [
        {"colour": 1},
        {"mask": {"floor": -20}},
        {"schema_version": 2},
        {"aperture": {"rings": 0}},
        {"aperture": {"rings": 2.5}},
        {"aperture": {"cell_side": -1}},
        {"mask": {"shape": "circle"}},
        {"mask": {"extent": [1.0]}},
        {"grid": True},
        {"reference": {"kind": "file"}},
        {"ga": 3},
        {"seed": None},
    ],
)
def test_config_rejects(raw):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(raw)


def test_config_bad_override_and_files(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_dict({}).override({"mask.nope": 1})
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.yaml")
    p = tmp_path / "bad.yaml"
    p.write_text("mask: [unclosed\n")
    with pytest.raises(ConfigError):
        RunConfig.load(p)


def test_parse_value():
    assert parse_value("3") == 3
    assert parse_value("-20.5") == -20.5
    assert parse_value("[0.5, 0.5]") == [0.5, 0.5]
    assert parse_value("ellipse") == "ellipse"
    assert parse_value("null") is None


def test_hash_is_stable_text():
    cfg = RunConfig.from_dict({})
    assert len(cfg.hash()) == 16
    json.dumps(cfg.data)
