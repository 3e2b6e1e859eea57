"""Serialization contract: exact rationals, canonical bytes, round trips."""

import json
from fractions import Fraction

import pytest

from selfsim.distance_engine import critical_scan, distance_to_attractor, near_set
from selfsim.errors import ConfigError
from selfsim.geometry2d import sqrt_of_fraction
from selfsim.hull_analysis import (
    cuts_well_disk,
    edge_directions_match,
    gamma_estimate,
    hull_census,
)
from selfsim.ifs_core import attractor_cloud, cantor_ifs, rot_pair_ifs
from selfsim.kalpha import (
    KAlphaConfig,
    certificate_check,
    check_ball_separation,
    check_cr,
    check_sqrt_bounds,
    critical_family,
    kappa_search,
    refine,
)
from selfsim.precision import AngleRep, CertInterval
from selfsim import serialize as ser

F = Fraction
Q = F(1, 1000)


def _assert_no_floats(node, path="$"):
    """JSON trees must never carry bare floats; numerics are rational strings."""
    if isinstance(node, float):
        raise AssertionError(f"bare float at {path}: {node!r}")
    if isinstance(node, dict):
        for key, value in node.items():
            _assert_no_floats(value, f"{path}.{key}")
    elif isinstance(node, (list, tuple)):
        for i, value in enumerate(node):
            _assert_no_floats(value, f"{path}[{i}]")


def _roundtrips_as_json(doc):
    text = ser.canonical_dumps(doc)
    assert text.endswith("\n")
    assert json.loads(text) == doc
    assert ser.canonical_dumps(json.loads(text)) == text
    return text


@pytest.fixture(scope="module")
def canonical_state():
    return refine(None, KAlphaConfig())


@pytest.fixture(scope="module")
def cantor():
    return cantor_ifs()


# ---------------------------------------------------------------- primitives


class TestPrimitives:
    def test_frac_round_trip(self):
        for value in (F(0), F(3), F(-7, 2), F(10**40, 3**33)):
            assert ser.parse_frac(ser.frac_str(value)) == value

    def test_parse_frac_rejects_garbage(self):
        with pytest.raises(ConfigError):
            ser.parse_frac("three halves")
        with pytest.raises(ConfigError):
            ser.parse_frac("1/0")

    def test_angle_round_trip(self):
        angle = AngleRep(F(3, 2), F(-7, 1000))
        assert ser.angle_from_json(ser.angle_json(angle)) == angle

    def test_angle_from_json_strict(self):
        with pytest.raises(ConfigError):
            ser.angle_from_json({"pi_coeff": "1"})
        with pytest.raises(ConfigError):
            ser.angle_from_json(["1", "0"])

    def test_interval_json_is_exact_enclosure(self):
        iv = CertInterval.from_rational(F(1, 3), 64)
        lo, hi = (Fraction(s) for s in ser.interval_json(iv))
        assert lo < F(1, 3) < hi
        assert (lo, hi) == iv.to_fractions()

    def test_canonical_dumps_sorts_keys(self):
        text = ser.canonical_dumps({"b": 1, "a": 2})
        assert text.index('"a"') < text.index('"b"')
        assert text == ser.canonical_dumps({"a": 2, "b": 1})

    def test_word_str(self):
        assert ser.word_str((2, 1, -1)) == "2.1.-1"
        assert ser.word_str(()) == ""


# ----------------------------------------------------------- state documents


class TestStateRoundTrip:
    def test_byte_identical_round_trip(self, canonical_state):
        doc = ser.state_to_json(canonical_state)
        text = _roundtrips_as_json(doc)
        back = ser.state_from_json(json.loads(text))
        assert back == canonical_state
        assert ser.canonical_dumps(ser.state_to_json(back)) == text

    def test_no_floats_and_versioned(self, canonical_state):
        doc = ser.state_to_json(canonical_state)
        _assert_no_floats(doc)
        assert doc["schema_version"] == ser.SCHEMA_VERSION
        assert doc["kind"] == "refinement-state"

    def test_strict_keys(self, canonical_state):
        doc = ser.state_to_json(canonical_state)
        broken = dict(doc)
        broken.pop("k_seq")
        with pytest.raises(ConfigError):
            ser.state_from_json(broken)
        extra = dict(doc)
        extra["surprise"] = 1
        with pytest.raises(ConfigError):
            ser.state_from_json(extra)

    def test_kind_and_version_checked(self, canonical_state):
        doc = ser.state_to_json(canonical_state)
        wrong_kind = dict(doc)
        wrong_kind["kind"] = "other"
        with pytest.raises(ConfigError):
            ser.state_from_json(wrong_kind)
        wrong_version = dict(doc)
        wrong_version["schema_version"] = 99
        with pytest.raises(ConfigError):
            ser.state_from_json(wrong_version)

    def test_malformed_payload(self, canonical_state):
        doc = json.loads(ser.canonical_dumps(ser.state_to_json(canonical_state)))
        doc["windows"] = [{"c": {"pi_coeff": "1"}, "d": {"pi_coeff": "1"}}]
        with pytest.raises(ConfigError):
            ser.state_from_json(doc)


# ----------------------------------------------------------- report documents


class TestReportDocuments:
    def test_kappa_result(self):
        res = kappa_search(AngleRep(), AngleRep.pi_multiple(2), 0, Q)
        doc = ser.kappa_result_json(res, Q)
        _assert_no_floats(doc)
        _roundtrips_as_json(doc)
        assert doc["k"] == 1 and doc["l"] == 0
        assert doc["kappa"] == {"pi_coeff": "0", "remainder": "7/1000000"}

    def test_sqrt_report(self):
        rep = check_sqrt_bounds(Q, Q**2 / 2, Q)
        doc = ser.sqrt_report_json(rep)
        _assert_no_floats(doc)
        _roundtrips_as_json(doc)
        assert doc["t"] == "1/2"
        names = {ineq["name"] for ineq in doc["inequalities"]}
        assert names == {"lower_minus", "upper_minus", "lower_plus", "upper_plus"}
        for ineq in doc["inequalities"]:
            assert ineq["verdict"] == "holds"
            lo, hi = (Fraction(s) for s in ineq["lhs"])
            assert lo <= hi

    def test_ball_separation_report(self):
        rep = check_ball_separation(
            [(F(0), F(1))], [(F(0), F(-1))], [(F(2), F(1))], sqrt_of_fraction(8, 256)
        )
        doc = ser.ball_separation_json(rep)
        _assert_no_floats(doc)
        _roundtrips_as_json(doc)
        assert doc["verdict"] == "undecided"
        assert len(doc["balls"]) == 1
        assert doc["balls"][0]["ball"]["center"] == ["0", "0"]

    def test_cr_report(self):
        rep = check_cr(KAlphaConfig(), (2, -2), [(2, 1)])
        doc = ser.cr_report_json(rep)
        _assert_no_floats(doc)
        _roundtrips_as_json(doc)
        assert doc["verdict"] == "holds"
        assert doc["threshold"] == str(Q**3 / 7)
        assert doc["m_word"]["word"] == [2, -2]

    def test_critical_family_documents(self, canonical_state):
        rep = critical_family(canonical_state, 1, KAlphaConfig())
        doc = ser.critical_family_json(rep)
        _assert_no_floats(doc)
        _roundtrips_as_json(doc)
        assert doc["prefixes"] == [[1], [-1]]
        assert len(doc["separations"]) == 1
        assert doc["formula_positive"] is True

        prefix_csv = ser.family_prefix_csv(rep)
        lines = prefix_csv.splitlines()
        assert lines[0].startswith("prefix,chain_word,m_lo,m_hi")
        assert len(lines) == 3
        assert lines[1].startswith("1,2.1.1,")

        sep_csv = ser.family_separation_csv(rep)
        lines = sep_csv.splitlines()
        assert lines[0] == (
            "left,right,first_split,separation_lo,separation_hi,bound,certified"
        )
        assert len(lines) == 2
        assert lines[1].startswith("1,-1,1,")
        assert lines[1].endswith(",True")

    def test_certificate_document(self, canonical_state):
        rep = certificate_check(canonical_state, (-1,), 6, KAlphaConfig())
        doc = ser.certificate_json(rep)
        _assert_no_floats(doc)
        _roundtrips_as_json(doc)
        assert doc["verdict"] == "touching_certified"
        assert doc["prefix"] == [-1]
        assert all(slot["certified"] is True for slot in doc["slots"])
        assert all(g["holds"] is True for g in doc["growth_inequalities"])


# ------------------------------------------------- geometry-facing documents


class TestGeometryDocuments:
    def test_distance_document(self, cantor):
        res = distance_to_attractor(cantor, (F(1, 2), F(0)), F(1, 10**6))
        pts = near_set(cantor, (F(1, 2), F(0)), F(1, 100), F(1, 1000))
        doc = ser.distance_json(res, near_points=pts)
        _assert_no_floats(doc)
        _roundtrips_as_json(doc)
        lo, hi = (Fraction(s) for s in doc["value"])
        assert lo <= F(1, 6) <= hi
        assert doc["near_points"]

    def test_cloud_documents(self, cantor):
        cloud = attractor_cloud(cantor, F(1, 50))
        doc = ser.cloud_json(cloud)
        _assert_no_floats(doc)
        _roundtrips_as_json(doc)
        assert doc["points"] == len(cloud.entries)

        text = ser.cloud_csv(cloud)
        lines = text.splitlines()
        assert lines[0] == "word,x,y"
        assert len(lines) == len(cloud.entries) + 1
        assert ser.cloud_csv(cloud) == text

    def test_scan_documents(self, cantor):
        entries = critical_scan(
            cantor, ((F(0), F(0)), (F(1), F(0))), steps=9, eps=F(1, 10**4)
        )
        doc = ser.scan_json(entries)
        _assert_no_floats(doc)
        _roundtrips_as_json(doc)
        text = ser.scan_csv(entries)
        assert text.splitlines()[0] == "x,y,status,value_lo,value_hi,refined"
        assert len(text.splitlines()) == len(entries) + 1

    def test_hull_documents(self):
        ifs = rot_pair_ifs()
        census = hull_census(ifs, 3)
        doc = ser.hull_census_json(census)
        _assert_no_floats(doc)
        _roundtrips_as_json(doc)
        assert [rec["depth"] for rec in doc["records"]] == [1, 2, 3]
        text = ser.census_csv(census)
        assert text.splitlines()[0] == (
            "depth,vertex_count,raw_vertex_count,displacement,slack"
        )

        edges = edge_directions_match(ifs, 3, AngleRep(), 4, F(1, 100))
        edoc = ser.edge_report_json(edges)
        _assert_no_floats(edoc)
        _roundtrips_as_json(edoc)
        etext = ser.edge_csv(edges)
        assert etext.splitlines()[0].startswith("ax,ay,bx,by,length_sq")

    def test_gamma_and_cuts_well_documents(self, cantor):
        est = gamma_estimate(cantor, depth=3, samples=4, seed=11)
        doc = ser.gamma_json(est)
        _assert_no_floats(doc)
        _roundtrips_as_json(doc)
        assert doc["samples"] == 4

        from selfsim.geometry2d import Ball

        disk = Ball(
            (F(1, 2), F(0)), CertInterval.from_rational(F(1, 4), 64)
        )
        verdict = cuts_well_disk(cantor, (), disk, F(1, 10), depth=3)
        cdoc = ser.cuts_well_json(verdict, (), F(1, 10))
        _assert_no_floats(cdoc)
        _roundtrips_as_json(cdoc)
        assert cdoc["verdict"] in {"yes", "no", "undecided"}


# ---------------------------------------------------------------------- SVG


class TestSvg:
    SCENE = dict(
        boxes=[(F(0), F(1), F(1, 2))],
        balls=[(F(0), F(0), F(1, 4))],
        points=[(F(1, 3), F(1, 3))],
        axis_y=F(0),
    )

    def test_deterministic_and_well_formed(self):
        text = ser.svg_scene(**self.SCENE)
        assert text == ser.svg_scene(**self.SCENE)
        assert text.startswith('<?xml version="1.0"')
        assert text.endswith("</svg>\n")
        assert "<rect" in text and "<circle" in text and "<line" in text

    def test_empty_scene_rejected(self):
        with pytest.raises(ValueError):
            ser.svg_scene()

    def test_axis_alone_insufficient(self):
        with pytest.raises(ValueError):
            ser.svg_scene(axis_y=F(0))
