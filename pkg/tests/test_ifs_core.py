import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from selfsim.errors import BudgetExceeded, ConfigError, UnknownSymbol
from selfsim.geometry2d import hausdorff_distance
from selfsim.ifs_core import (
    IFS,
    Similarity,
    WordMap,
    attractor_cloud,
    cantor_ifs,
    compose_word,
    cylinder_ball,
    diam_certified,
    ifs_from_json,
    rot_pair_ifs,
    segment_ifs,
    sierpinski_ifs,
    sigma_delta,
    word_concat,
    word_is_prefix,
    word_lex_key,
    word_lex_less,
    word_ratio,
)
from selfsim.precision import AngleRep

F = Fraction


def quarter_ifs() -> IFS:
    """Two maps with quarter-turn rotation and a reflection, exactly evaluable."""
    return IFS(
        maps=(
            Similarity(F(1, 3), AngleRep(F(1, 2), F(0)), False, (F(1), F(0))),
            Similarity(F(1, 2), AngleRep(F(1), F(0)), True, (F(0), F(1))),
        ),
        labels=("a", "b"),
    )


# ------------------------------------------------------------ composition


def test_empty_word_is_identity():
    wm = compose_word(cantor_ifs(), ())
    assert wm.ratio == 1 and wm.reflect is False
    assert wm.rotation.is_zero_mod_2pi()
    assert wm.apply_exact((F(3), F(4))) == (F(3), F(4))


def test_cantor_word_composition():
    wm = compose_word(cantor_ifs(), (1, 2))
    assert wm.ratio == F(1, 9)
    assert wm.translation_exact() == (F(2, 9), F(0))
    assert wm.apply_exact((F(0), F(0))) == (F(2, 9), F(0))
    assert word_ratio(cantor_ifs(), (1, 2)) == F(1, 9)


def test_unknown_symbol_rejected():
    with pytest.raises(UnknownSymbol):
        compose_word(cantor_ifs(), (1, 3))


@given(
    st.lists(st.sampled_from([1, 2]), max_size=6),
    st.lists(st.sampled_from([1, 2]), max_size=6),
)
def test_composition_law_irrational_rotation(wi, wj):
    ifs = rot_pair_ifs(F(1, 5), AngleRep(F(0), F(1)))
    left = compose_word(ifs, tuple(wi) + tuple(wj))
    right = compose_word(ifs, tuple(wi)).compose(compose_word(ifs, tuple(wj)))
    assert left == right
    assert left.ratio == word_ratio(ifs, tuple(wi)) * word_ratio(ifs, tuple(wj))


@given(
    st.lists(st.sampled_from(["a", "b"]), max_size=6),
    st.lists(st.sampled_from(["a", "b"]), max_size=6),
)
def test_composition_law_with_reflection(wi, wj):
    ifs = quarter_ifs()
    left = compose_word(ifs, tuple(wi) + tuple(wj))
    right = compose_word(ifs, tuple(wi)).compose(compose_word(ifs, tuple(wj)))
    assert left == right


@given(st.lists(st.sampled_from(["a", "b"]), max_size=8))
def test_exact_and_interval_application_agree(word):
    ifs = quarter_ifs()
    wm = compose_word(ifs, tuple(word))
    exact = wm.apply_exact((F(1, 7), F(2, 7)))
    ix, iy = wm.apply_interval((F(1, 7), F(2, 7)), bits=128)
    assert ix.contains(exact[0]) and iy.contains(exact[1])


def test_identity_compose_neutral():
    ifs = quarter_ifs()
    wm = compose_word(ifs, ("a", "b"))
    ident = WordMap.identity()
    assert ident.compose(wm) == wm == wm.compose(ident)


# ------------------------------------------------------------------ words


def test_word_operations():
    assert word_concat((1,), (2, 2)) == (1, 2, 2)
    assert len(word_concat((1, 2), (2,))) == 3
    assert word_is_prefix((1, 2), (1, 2, 1))
    assert word_is_prefix((1, 2), (1, 2))
    assert not word_is_prefix((2,), (1, 2))


def test_lexicographic_order_total_on_equal_length():
    ifs = cantor_ifs()
    words = [(a, b, c) for a in (1, 2) for b in (1, 2) for c in (1, 2)]
    ordered = sorted(words, key=lambda w: word_lex_key(ifs, w))
    for i in range(len(ordered) - 1):
        assert word_lex_less(ifs, ordered[i], ordered[i + 1])
    assert ordered[0] == (1, 1, 1) and ordered[-1] == (2, 2, 2)


def test_lex_order_uses_label_positions_not_values():
    ifs = IFS(
        maps=(
            Similarity(F(1, 3), AngleRep(), False, (F(0), F(0))),
            Similarity(F(1, 3), AngleRep(), False, (F(2, 3), F(0))),
        ),
        labels=(5, -5),
    )
    assert word_lex_less(ifs, (5,), (-5,))


# -------------------------------------------------------------- cylinders


def test_cylinder_ball_empty_word_is_root():
    ifs = cantor_ifs()
    ball = cylinder_ball(ifs, ())
    assert (ball.center_exact, ball.radius) == ifs.root_ball()


def test_cylinder_ball_cantor_first_map():
    ball = cylinder_ball(cantor_ifs(), (1,), root=((F(1, 2), F(0)), F(1, 2)))
    assert ball.center_exact == (F(1, 6), F(0))
    assert ball.radius == F(1, 6)


def test_root_ball_cantor_is_centered_and_tight():
    center, radius = cantor_ifs().root_ball()
    assert center == (F(1, 2), F(0))
    assert F(1, 2) <= radius <= F(1, 2) + F(1, 2**60)


def test_root_ball_contains_deep_cloud():
    for ifs in [cantor_ifs(), sierpinski_ifs(), rot_pair_ifs()]:
        center, radius = ifs.root_ball()
        cloud = attractor_cloud(ifs, F(1, 200))
        bound = (radius + cloud.slack) ** 2
        for pt in cloud.points():
            dx, dy = pt[0] - center[0], pt[1] - center[1]
            assert dx * dx + dy * dy <= bound


def test_cylinder_nesting():
    ifs = cantor_ifs()
    outer = cylinder_ball(ifs, (2,))
    inner = cylinder_ball(ifs, (2, 1))
    dx = inner.center_exact[0] - outer.center_exact[0]
    dy = inner.center_exact[1] - outer.center_exact[1]
    assert dx * dx + dy * dy <= (outer.radius - inner.radius) ** 2


# ----------------------------------------------------------------- clouds


def test_cantor_cloud_depth_and_size():
    cloud = attractor_cloud(cantor_ifs(), F(1, 100))
    assert cloud.depth == 5
    assert len(cloud.points()) == 32
    deep = attractor_cloud(cantor_ifs(), F(1, 3**12))
    assert hausdorff_distance(cloud.points(), deep.points()).to_fractions()[1] <= F(1, 100)


def test_cloud_single_point_for_huge_eps():
    cloud = attractor_cloud(cantor_ifs(), F(3))
    assert cloud.depth == 0
    assert cloud.points() == ((F(1, 2), F(0)),)


def test_rot_pair_cloud_depth_five():
    cloud = attractor_cloud(rot_pair_ifs(), F(1, 1000))
    assert cloud.depth == 5
    assert len(cloud.points()) == 32


def test_cloud_budget_guard():
    with pytest.raises(BudgetExceeded):
        attractor_cloud(cantor_ifs(), F(1, 3**30), budget=1000)


def test_cloud_refinement_hausdorff_property():
    coarse = attractor_cloud(cantor_ifs(), F(1, 20))
    fine = attractor_cloud(cantor_ifs(), F(1, 40))
    iv = hausdorff_distance(coarse.points(), fine.points())
    assert iv.to_fractions()[1] <= F(1, 20)


def test_inexact_cloud_is_deterministic_with_certified_slack():
    ifs = rot_pair_ifs(F(1, 3), AngleRep(F(0), F(1)))
    one = attractor_cloud(ifs, F(1, 20))
    two = attractor_cloud(ifs, F(1, 20))
    assert one == two
    assert one.slack < F(1, 20)
    assert all(pt[0].denominator <= 2**80 for pt in one.points())


# ------------------------------------------------------------ sigma_delta


def test_sigma_delta_examples():
    ifs = cantor_ifs()
    assert sigma_delta(ifs, F(1, 3)) == {(1,), (2,)}
    assert sigma_delta(ifs, F(1, 9)) == {(1, 1), (1, 2), (2, 1), (2, 2)}
    assert sigma_delta(ifs, F(99, 100)) == {(1,), (2,)}


def test_sigma_delta_rejects_bad_delta():
    with pytest.raises(ValueError):
        sigma_delta(cantor_ifs(), F(0))
    with pytest.raises(ValueError):
        sigma_delta(cantor_ifs(), F(2))


@given(st.fractions(min_value=F(1, 200), max_value=F(9, 10), max_denominator=499))
def test_sigma_delta_prefix_free_cover(delta):
    words = sigma_delta(cantor_ifs(), delta)
    assert words
    listed = sorted(words)
    for i, wi in enumerate(listed):
        for wj in listed[i + 1 :]:
            assert not word_is_prefix(wi, wj)
            assert not word_is_prefix(wj, wi)
    # a prefix-free set covers iff its branch measure sums to 1
    assert sum(F(1, 2) ** len(w) for w in listed) == 1


# ------------------------------------------------------------------- diam


def test_diam_cantor_contains_one():
    iv = diam_certified(cantor_ifs(), F(1, 1000))
    assert iv.contains(1)
    assert iv.width() <= F(1, 1000)


def test_diam_segment_attractor():
    iv = diam_certified(segment_ifs(), F(1, 1000))
    assert iv.contains(1)


def test_diam_sierpinski():
    iv = diam_certified(sierpinski_ifs(), F(1, 100))
    # right triangle with legs 1: diameter is the hypotenuse sqrt(2)
    assert iv.square().contains(2)


# ------------------------------------------------------------------- JSON


def _valid_doc():
    return {
        "schema_version": 1,
        "labels": [1, 2],
        "maps": [
            {
                "ratio": "1/3",
                "rotation": {"pi_coeff": "0", "remainder": "0"},
                "reflect": False,
                "translation": ["0", "0"],
            },
            {
                "ratio": "1/3",
                "rotation": {"pi_coeff": "0", "remainder": "0"},
                "reflect": False,
                "translation": ["2/3", "0"],
            },
        ],
    }


def test_json_round_trip_matches_builtin(tmp_path):
    doc = _valid_doc()
    ifs = ifs_from_json(doc)
    assert ifs == cantor_ifs()
    path = tmp_path / "cantor.json"
    path.write_text(json.dumps(doc))
    from selfsim.ifs_core import load_ifs

    assert load_ifs(path) == cantor_ifs()


def test_json_rejects_unknown_keys():
    doc = _valid_doc()
    doc["extra"] = 1
    with pytest.raises(ConfigError):
        ifs_from_json(doc)


def test_json_rejects_floats():
    doc = _valid_doc()
    doc["maps"][0]["ratio"] = 0.3333
    with pytest.raises(ConfigError):
        ifs_from_json(doc)


def test_json_rejects_missing_map_keys():
    doc = _valid_doc()
    del doc["maps"][0]["reflect"]
    with pytest.raises(ConfigError):
        ifs_from_json(doc)


def test_json_rejects_duplicate_labels():
    doc = _valid_doc()
    doc["labels"] = [1, 1]
    with pytest.raises(ConfigError):
        ifs_from_json(doc)


def test_similarity_ratio_validation():
    with pytest.raises(ConfigError):
        Similarity(F(3, 2), AngleRep(), False, (F(0), F(0)))
