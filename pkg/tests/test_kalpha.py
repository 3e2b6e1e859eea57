"""Construction-module checks with independent closed-form oracles.

At ``alpha = 0`` every map is an axis-aligned contraction and the minimum
heights have closed forms: the deepest point of the attractor is the fixed
point of the ``-2`` map chain, giving ``min_y(K) = -q/(1-q^2)``, and for the
cylinder on ``(2,)`` the minimising chain is ``(2, -2, -2, ...)`` so
``M_(2) = q - q^3/(1-q^2)`` and ``M_(2,1)`` adds one more contraction level:
``q - q^4/(1-q^2)``.  The pinned-angle identities are checked exactly in
angle arithmetic, and the refinement bookkeeping is compared against values
derived by hand from the telescoping structure (flipping the sign letter at
1-based slot ``i`` of a ``(2, signs...)`` word translates its cylinder by
exactly ``q^(i+1) * (cos((i-1)a), sin((i-1)a))``).
"""

import math
import random
from fractions import Fraction

import pytest

from selfsim.errors import (
    BudgetExceeded,
    CertificationFailed,
    ConfigError,
    DomainViolation,
    HypothesisViolation,
    SearchExhausted,
)
from selfsim.geometry2d import sqrt_of_fraction
from selfsim.ifs_core import cloud_at_depth, diam_certified, word_state
from selfsim.kalpha import (
    CANONICAL_Q,
    CertificateVerdict,
    CheckVerdict,
    KAlphaConfig,
    _merge_x_clusters,
    angle_sign,
    build_kalpha,
    certificate_check,
    check_ball_separation,
    check_cr,
    check_sqrt_bounds,
    critical_family,
    kappa_search,
    m_value,
    mirror_word,
    r_balls,
    refine,
)
from selfsim.precision import AngleRep, CertInterval

F = Fraction
Q = F(1, 1000)


def interval_contains(iv: CertInterval, value: Fraction) -> bool:
    lo, hi = iv.to_fractions()
    return lo <= value <= hi


# ---------------------------------------------------------------------------
# family construction and configuration


class TestBuildFamily:
    def test_origin_images_are_exact(self):
        ifs = build_kalpha(KAlphaConfig())
        # at alpha = 0 every word state is exact; the translation component
        # is the image of the origin
        assert word_state(ifs, (1,))[3] == (F(1, 2), F(0))
        assert word_state(ifs, (-1,))[3] == (F(-1, 2), F(0))
        assert word_state(ifs, (2,))[3] == (F(0), Q)
        assert word_state(ifs, (-2,))[3] == (F(0), -Q)

    @pytest.mark.parametrize("q", [Q, F(1, 4)])
    def test_certified_diameter_band(self, q):
        # the two +-1 fixed points are 1/(1-q) apart at alpha = 0, and no
        # pair of points can exceed twice the root-ball radius
        ifs = build_kalpha(KAlphaConfig(q=q))
        lo, hi = diam_certified(ifs, eps=F(1, 10_000)).to_fractions()
        assert F(1) <= lo <= hi <= 1 + 2 * q

    def test_nonconformant_stamp(self):
        assert not KAlphaConfig().nonconformant
        assert KAlphaConfig(q=F(1, 4)).nonconformant

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            KAlphaConfig(q=F(1, 2))
        with pytest.raises(ConfigError):
            KAlphaConfig(q=F(-1, 10))
        with pytest.raises(ConfigError):
            KAlphaConfig(alpha=0.5)

    def test_mirror_word(self):
        assert mirror_word((2, 1, -1)) == (-2, -1, 1)


# ---------------------------------------------------------------------------
# certified minimum heights


class TestMValue:
    def test_closed_form_at_zero_angle(self):
        # minimising chain (2, -2, -2, ...): M = q - q^3/(1 - q^2)
        mv = m_value(KAlphaConfig(), (2,))
        assert interval_contains(mv.value, Q - Q**3 / (1 - Q**2))
        assert mv.in_band is True
        assert interval_contains(mv.minimizing_x, F(0))

    def test_closed_form_child_at_zero_angle(self):
        mv = m_value(KAlphaConfig(), (2, 1))
        assert interval_contains(mv.value, Q - Q**4 / (1 - Q**2))

    def test_monotone_strictness_via_plus_child(self):
        # M_(2,1) - M_(2) = q^3/(1+q) > 0; the (2,-2) child instead contains
        # the parent's minimising chain so its M-value is exactly equal
        parent = m_value(KAlphaConfig(), (2,))
        child = m_value(KAlphaConfig(), (2, 1))
        assert child.value.to_fractions()[0] > parent.value.to_fractions()[1]
        deep = m_value(KAlphaConfig(), (2, -2))
        assert interval_contains(deep.value, Q - Q**3 / (1 - Q**2))
        assert deep.in_band is None

    def test_band_at_window_midpoint_angle(self):
        cfg = KAlphaConfig(alpha=AngleRep.from_rational(7 * Q * Q))
        mv = m_value(cfg, (2,))
        lo, hi = mv.value.to_fractions()
        assert Q - 2 * Q * Q * (1 + 2 * Q) <= lo <= hi <= Q + 2 * Q * Q * (1 + 2 * Q)
        assert F(2, 3) * Q <= lo and hi <= F(4, 3) * Q
        assert mv.in_band is True

    def test_width_guarantee(self):
        cfg = KAlphaConfig(alpha=AngleRep.from_rational(7 * Q * Q))
        bits = 64
        mv = m_value(cfg, (2,), bits=bits)
        assert mv.value.width() <= Q / F(2) ** (bits // 2)

    def test_word_validation(self):
        with pytest.raises(ValueError):
            m_value(KAlphaConfig(), (1, 2))
        with pytest.raises(ValueError):
            m_value(KAlphaConfig(), ())
        with pytest.raises(ValueError):
            m_value(KAlphaConfig(), (-2,))

    def test_budget_exhaustion(self):
        with pytest.raises(BudgetExceeded) as exc:
            m_value(KAlphaConfig(), (2,), budget=2)
        assert exc.value.budget == 2
        assert exc.value.spent == 2

    def test_mirror_symmetry_of_clouds(self):
        # K_{-I} = -K_I holds exactly: compare depth-3 clouds at alpha = 0
        ifs = build_kalpha(KAlphaConfig())
        plus = sorted(cloud_at_depth(ifs, 3, root_word=(2, 1)).points())
        minus = sorted(
            (-x, -y) for (x, y) in cloud_at_depth(ifs, 3, root_word=(-2, -1)).points()
        )
        assert plus == minus


class TestRBalls:
    def test_single_ball_centred_at_origin(self):
        # at alpha = 0 the minimising chain of (2,) is the vertical chain
        # through x = 0; one touching ball, centred on the axis
        balls = r_balls(KAlphaConfig(), (2,))
        assert len(balls) == 1
        (cx, cy) = balls[0].ball.center
        assert cy == 0
        assert abs(cx) <= Q**3
        assert interval_contains(balls[0].ball.radius, Q - Q**3 / (1 - Q**2))

    def test_mirrored_word_reflects_center(self):
        plus = r_balls(KAlphaConfig(alpha=AngleRep.from_rational(7 * Q * Q)), (2, 1))
        minus = r_balls(
            KAlphaConfig(alpha=AngleRep.from_rational(7 * Q * Q)), (-2, -1)
        )
        assert len(plus) == len(minus) == 1
        assert minus[0].ball.center[0] == -plus[0].ball.center[0]
        assert minus[0].ball.radius.to_fractions() == plus[0].ball.radius.to_fractions()
        assert minus[0].source_word == (-2, -1)

    def test_word_validation(self):
        with pytest.raises(ValueError):
            r_balls(KAlphaConfig(), (1, 1))

    def test_cluster_merge_helper(self):
        merged = _merge_x_clusters(
            [(F(0), F(1)), (F(1, 2), F(2)), (F(3), F(4)), (F(4), F(5))]
        )
        assert merged == ((F(0), F(2)), (F(3), F(5)))
        with pytest.raises(ValueError):
            _merge_x_clusters([])


# ---------------------------------------------------------------------------
# elementary inequality checks


class TestSqrtBounds:
    def test_exact_interior_point_all_hold(self):
        rep = check_sqrt_bounds(Q, Q * Q / 2, Q)
        assert rep.t == F(1, 2)
        assert all(v is CheckVerdict.HOLDS for v in rep.verdicts().values())

    def test_upper_minus_fails_beyond_ratio(self):
        # a = 4q/3, b = q^2 gives t = 9/16 > 5/9
        rep = check_sqrt_bounds(F(4, 3) * Q, Q * Q, Q)
        assert rep.t == F(9, 16)
        v = rep.verdicts()
        assert v["upper_minus"] is CheckVerdict.FAILS
        assert v["lower_minus"] is CheckVerdict.HOLDS
        assert v["lower_plus"] is CheckVerdict.HOLDS
        assert v["upper_plus"] is CheckVerdict.HOLDS

    def test_equality_point_fails_strict_inequality(self):
        rep = check_sqrt_bounds(Q, F(5, 9) * Q * Q, Q)
        assert rep.verdicts()["upper_minus"] is CheckVerdict.FAILS

    def test_domain_violation(self):
        # a = 2q/3, b = q^2 gives t = 9/4 > 1: the radicand a^2 - b < 0
        with pytest.raises(DomainViolation):
            check_sqrt_bounds(F(2, 3) * Q, Q * Q, Q)

    def test_hypothesis_validation(self):
        with pytest.raises(ValueError):
            check_sqrt_bounds(2 * Q, Q * Q, Q)  # a outside [2q/3, 4q/3]
        with pytest.raises(ValueError):
            check_sqrt_bounds(Q, 2 * Q * Q, Q)  # b outside (0, q^2]

    def test_interval_straddle_is_undecided(self):
        bits = 64
        a = CertInterval.from_endpoints(Q * F(999, 1000), Q * F(1001, 1000), bits)
        b = F(5, 9) * Q * Q
        rep = check_sqrt_bounds(a, b, Q, bits=bits)
        assert rep.t is None
        assert rep.verdicts()["upper_minus"] is CheckVerdict.UNDECIDED

    def test_random_exact_inputs_match_direct_interval_oracle(self):
        rng = random.Random(20260814)
        for _ in range(25):
            # a >= q keeps a^2 >= q^2 so any b in (0, q^2] stays in domain
            a = Q * (1 + F(rng.randrange(0, 2**20), 2**20) / 3)
            b = Q * Q * F(rng.randrange(1, 2**20), 2**20)
            t = b / (a * a)
            if t in (F(5, 9), F(5, 4)):
                continue
            rep = check_sqrt_bounds(a, b, Q)
            bits = 512
            a_iv = CertInterval.from_rational(a, bits)
            b_iv = CertInterval.from_rational(b, bits)
            mid_minus = a_iv - (a_iv.square() - b_iv).sqrt()
            mid_plus = (a_iv.square() + b_iv).sqrt() - a_iv
            direct = {
                "lower_minus": (b_iv / (a_iv * 2)).definitely_less(mid_minus),
                "upper_minus": mid_minus.definitely_less(b_iv * 3 / (a_iv * 5)),
                "lower_plus": (b_iv * 2 / (a_iv * 5)).definitely_less(mid_plus),
                "upper_plus": mid_plus.definitely_less(b_iv / (a_iv * 2)),
            }
            for name, holds in direct.items():
                expected = CheckVerdict.HOLDS if holds else CheckVerdict.FAILS
                assert rep.verdicts()[name] is expected, (name, a, t)


class TestBallSeparation:
    def test_equality_configuration_is_tight(self):
        # K = {(0,1)}, L = {(0,-1)}, M = {(2,1)}, d = sqrt(8) = dist(L, M):
        # the bridging ball is the unit ball at the origin and the bound
        # sqrt(1 + 4) - 1 equals its distance to M exactly
        d = sqrt_of_fraction(8, 256)
        rep = check_ball_separation(
            [(F(0), F(1))], [(F(0), F(-1))], [(F(2), F(1))], d
        )
        assert rep.verdict is CheckVerdict.UNDECIDED
        bound_mid = sum(rep.bound.to_fractions()) / 2
        dist_mid = sum(rep.balls[0].distance_to_m.to_fractions()) / 2
        assert abs(bound_mid - (dist_mid)) <= F(1, 10**12)
        assert abs(float(bound_mid) - (math.sqrt(5) - 1)) < 1e-12

    def test_separated_configuration_holds(self):
        d = sqrt_of_fraction(8, 256)
        rep = check_ball_separation(
            [(F(0), F(1))], [(F(0), F(-1))], [(F(3), F(1))], d
        )
        assert rep.verdict is CheckVerdict.HOLDS

    def test_lm_distance_hypothesis(self):
        with pytest.raises(HypothesisViolation):
            check_ball_separation(
                [(F(0), F(1))], [(F(0), F(-1))], [(F(0), F(-2))], 5
            )

    def test_kl_versus_km_hypothesis(self):
        # K is strictly closer to M than to L
        with pytest.raises(HypothesisViolation):
            check_ball_separation(
                [(F(0), F(1))], [(F(0), F(-9))], [(F(1), F(1))], F(1)
            )

    def test_empty_cloud_rejected(self):
        with pytest.raises(ValueError):
            check_ball_separation([], [(F(0), F(1))], [(F(2), F(2))], 1)

    def test_random_well_separated_clouds_hold(self):
        # K near the origin, L below it, M far to the upper right: the
        # bound is at most sqrt(d_KL^2/4 + 32) - d_KL/2 <= 6.1 while every
        # bridging ball stays within the K-L bounding box, more than 9 away
        # from M
        rng = random.Random(99)
        for _ in range(5):
            k_pts = [
                (F(rng.randrange(0, 100), 100), F(rng.randrange(0, 100), 100))
                for _ in range(4)
            ]
            l_pts = [
                (F(rng.randrange(0, 100), 100), F(-rng.randrange(200, 300), 100))
                for _ in range(4)
            ]
            m_pts = [
                (F(rng.randrange(1000, 1100), 100), F(rng.randrange(1000, 1100), 100))
                for _ in range(4)
            ]
            rep = check_ball_separation(k_pts, l_pts, m_pts, 8)
            assert rep.verdict is CheckVerdict.HOLDS


class TestCheckCr:
    CFG = KAlphaConfig(alpha=AngleRep.from_rational(7 * Q * Q))

    def test_three_siblings_hold(self):
        rep = check_cr(self.CFG, (2, -2), [(2, 1), (2, -1), (2, 2)])
        assert rep.verdict is CheckVerdict.HOLDS
        assert rep.threshold == Q ** 3 / 7
        assert len(rep.pairs) == 3
        assert all(p.verdict is CheckVerdict.HOLDS for p in rep.pairs)

    def test_empty_sibling_set_is_vacuous(self):
        rep = check_cr(self.CFG, (2, -2), [])
        assert rep.verdict is CheckVerdict.HOLDS
        assert rep.pairs == ()

    def test_minimality_hypothesis_enforced(self):
        # M_(2,1) exceeds M_(2,-2), so (2,1) is not the sibling minimum
        with pytest.raises(HypothesisViolation):
            check_cr(self.CFG, (2, 1), [(2, -2), (2, -1)])

    def test_word_validation(self):
        with pytest.raises(ValueError):
            check_cr(self.CFG, (2, -2), [(2, 1, 1)])
        with pytest.raises(ValueError):
            check_cr(self.CFG, (2, -2), [(2, -2)])


# ---------------------------------------------------------------------------
# pinned-angle search


class TestKappaSearch:
    def test_full_turn_window(self):
        kr = kappa_search(AngleRep(), AngleRep.pi_multiple(2), 0, Q)
        assert (kr.k, kr.l) == (1, 0)
        assert kr.kappa == AngleRep.from_rational(7 * Q**2)
        assert kr.c == AngleRep.from_rational(4 * Q**2)
        assert kr.d == AngleRep.from_rational(10 * Q**2)

    def test_half_turn_window(self):
        kr = kappa_search(
            AngleRep.pi_multiple(F(1, 2)), AngleRep.pi_multiple(F(3, 2)), 1, Q
        )
        assert (kr.k, kr.l) == (2, 1)
        assert kr.kappa == AngleRep(F(1), 7 * Q**3 / 2)
        assert kr.c == AngleRep(F(1), 2 * Q**3)
        assert kr.d == AngleRep(F(1), 5 * Q**3)

    def test_quarter_contraction_full_turn(self):
        kr = kappa_search(AngleRep(), AngleRep.pi_multiple(2), 0, F(1, 4))
        assert (kr.k, kr.l) == (1, 0)
        assert kr.kappa == AngleRep.from_rational(F(7, 16))

    def test_pinned_identities_exact(self):
        kr = kappa_search(
            AngleRep.pi_multiple(F(1, 2)), AngleRep.pi_multiple(F(3, 2)), 1, Q
        )
        qpow = Q ** (kr.k + 1)
        # k * kappa = 2 l pi + 7 q^(k+1), and the window endpoints scale to
        # 2 l pi + 4 q^(k+1) and 2 l pi + 10 q^(k+1), all exactly
        assert (kr.kappa.scale(kr.k) - AngleRep.from_rational(7 * qpow)).is_zero_mod_2pi()
        assert kr.c.scale(kr.k).equals_mod_2pi(AngleRep.from_rational(4 * qpow))
        assert kr.d.scale(kr.k).equals_mod_2pi(AngleRep.from_rational(10 * qpow))

    def test_window_containment_certified(self):
        a = AngleRep.pi_multiple(F(1, 2))
        b = AngleRep.pi_multiple(F(3, 2))
        kr = kappa_search(a, b, 1, Q)
        assert angle_sign(kr.c - a) > 0
        assert angle_sign(b - kr.d) > 0

    def test_exhaustion_carries_cap(self):
        # a window of width ~6e-6 admits no multiple of 2pi/k for small k
        a = AngleRep.from_rational(4 * Q**2)
        b = AngleRep.from_rational(10 * Q**2)
        with pytest.raises(SearchExhausted) as exc:
            kappa_search(a, b, 5, Q, k_cap=60)
        assert exc.value.cap == 60

    def test_window_order_validated(self):
        with pytest.raises(ValueError):
            kappa_search(AngleRep.pi_multiple(1), AngleRep.pi_multiple(1), 0, Q)


# ---------------------------------------------------------------------------
# nested-window refinement


class TestRefine:
    def test_first_step_canonical(self):
        st = refine(None, KAlphaConfig())
        assert st.n == 1
        assert st.k_seq == (2,)
        assert st.l_seq == (0,)
        assert st.multiplier(1) == 1
        assert st.interval == (
            AngleRep.from_rational(4 * Q**2),
            AngleRep.from_rational(10 * Q**2),
        )
        assert st.interiors == ((1,),)
        assert st.phi_of((1,)) == (2, 1, 1)
        assert st.phi_of((-1,)) == (2, 1, -1)
        assert not st.nonconformant
        records = {r.condition: r for r in st.checks[0]}
        assert set(records) == set("ABCDEFGHI")
        assert all(r.verdict is CheckVerdict.HOLDS for r in records.values())
        detail = dict(records["D"].detail)
        # only the doubled-exponent band certifies at q = 1/1000: the gap
        # q^3 sin(alpha) with alpha ~ 7q^2 is of order 7q^5
        assert detail["variant_linear_exponent_holds"] == "False"
        assert detail["variant_double_exponent_holds"] == "False"
        c_detail = dict(records["C"].detail)
        assert "certified to fail" in c_detail["reversed_orientation"]

    def test_deterministic(self):
        a = refine(None, KAlphaConfig())
        b = refine(None, KAlphaConfig())
        assert a == b

    def test_second_step_canonical_exhausts_small_cap(self):
        st = refine(None, KAlphaConfig())
        with pytest.raises(SearchExhausted):
            refine(st, KAlphaConfig(), k_cap=60)

    def test_two_steps_quarter_contraction(self):
        q = F(1, 4)
        cfg = KAlphaConfig(q=q)
        st1 = refine(None, cfg)
        assert st1.k_seq == (2,)
        assert st1.interval == (
            AngleRep.from_rational(F(1, 4)),
            AngleRep.from_rational(F(5, 8)),
        )
        st2 = refine(st1, cfg)
        assert st2.k_seq == (2, 12)
        assert st2.l_seq == (0, 1)
        # interior signs at alpha ~ 2pi/11: sin(rot * alpha) > 0 for
        # rot = 2..5 (angles below pi) and < 0 for rot = 6..10
        assert st2.interiors[1] == (-1, -1, -1, -1, 1, 1, 1, 1, 1)
        assert st2.phi_of((-1, -1)) == (2, 1, -1, -1, -1, -1, -1, 1, 1, 1, 1, 1, -1)
        assert st2.phi_of((1, 1))[: len(st1.phi_of((1,)))] == st1.phi_of((1,))
        assert len(st2.phi_of((1, -1))) == 13
        assert st2.nonconformant
        records = {r.condition: r for r in st2.checks[1]}
        for cond in "ABCDEFGHI":
            assert records[cond].verdict is CheckVerdict.HOLDS, cond
        h_detail = dict(records["H"].detail)
        # at this wide window the parent minimum reroutes through a
        # vertical sub-chain five letters in, so neither sharp band holds
        assert h_detail["variant_vertical_dip_band_holds"] == "False"
        assert h_detail["variant_child_scale_band_holds"] == "False"

    def test_window_nesting_exact(self):
        q = F(1, 4)
        cfg = KAlphaConfig(q=q)
        st2 = refine(refine(None, cfg), cfg)
        (c1, d1), (c2, d2) = st2.windows
        assert angle_sign(c2 - c1) > 0
        assert angle_sign(d1 - d2) > 0

    def test_growth_is_strict(self):
        q = F(1, 4)
        cfg = KAlphaConfig(q=q)
        st2 = refine(refine(None, cfg), cfg)
        assert st2.k_seq[1] > 2 * st2.k_seq[0] + 1

    def test_state_config_mismatch(self):
        st = refine(None, KAlphaConfig())
        with pytest.raises(ValueError):
            refine(st, KAlphaConfig(q=F(1, 4)))

    def test_phi_unknown_prefix(self):
        st = refine(None, KAlphaConfig())
        with pytest.raises(KeyError):
            st.phi_of((1, 1))


# ---------------------------------------------------------------------------
# separation of the critical family


class TestCriticalFamily:
    def test_canonical_first_level(self):
        cfg = KAlphaConfig()
        st = refine(None, cfg)
        rep = critical_family(st, 1, cfg)
        assert rep.alpha == AngleRep.from_rational(7 * Q**2)
        assert rep.formula_positive
        assert rep.prefixes == ((1,), (-1,))
        assert len(rep.separations) == 1
        sep = rep.separations[0]
        assert sep.first_split == 1
        assert sep.bound == Q**5 - 22 * Q**6 / (1 - Q)
        # gap = q^3 sin(7 q^2) ~ 7 q^5
        lo, hi = sep.separation.to_fractions()
        assert F(69, 10) * Q**5 <= lo <= hi <= F(71, 10) * Q**5
        assert sep.certified
        assert not rep.nonconformant
        assert len(rep.certificates) == 2
        for cert in rep.certificates:
            assert cert.chain_word == st.phi_of(cert.prefix)
            h_lo, h_hi = cert.height.to_fractions()
            assert F(2, 3) * Q <= h_lo <= h_hi <= F(4, 3) * Q

    def test_quarter_contraction_second_level(self):
        q = F(1, 4)
        cfg = KAlphaConfig(q=q)
        st2 = refine(refine(None, cfg), cfg)
        rep = critical_family(st2, 2, cfg)
        # the bound q^(2k+1) - 22 q^(2k+2)/(1-q) is negative at q = 1/4
        # (22q/(1-q) > 1), so pairs certify trivially yet the report flags it
        assert not rep.formula_positive
        assert len(rep.separations) == 6
        assert all(s.certified for s in rep.separations)
        assert all(s.separation.to_fractions()[0] > 0 for s in rep.separations)
        assert rep.nonconformant
        splits = sorted(s.first_split for s in rep.separations)
        assert splits == [1, 1, 1, 1, 2, 2]

    def test_level_validation(self):
        cfg = KAlphaConfig()
        st = refine(None, cfg)
        with pytest.raises(ValueError):
            critical_family(st, 2, cfg)
        with pytest.raises(ValueError):
            critical_family(st, 0, cfg)
        with pytest.raises(ValueError):
            critical_family(st, 1, KAlphaConfig(q=F(1, 4)))


# ---------------------------------------------------------------------------
# touching-ball certificate


class TestCertificateCheck:
    def test_canonical_minus_prefix_certifies(self):
        cfg = KAlphaConfig()
        st = refine(None, cfg)
        rep = certificate_check(st, (-1,), 12, cfg)
        assert rep.verdict is CertificateVerdict.TOUCHING_CERTIFIED
        assert rep.prefix == (-1,)
        assert rep.chain_word[: 3] == (2, 1, -1)
        assert all(s == -1 for s in rep.chain_word[3:])
        u2_lo, u2_hi = rep.height.to_fractions()
        assert 0 < u2_lo <= u2_hi < Q
        assert len(rep.slots) == 11
        assert all(s.certified for s in rep.slots)
        assert rep.slots[0].kind == "horizontal-offset"
        assert all(s.kind == "height-gap" for s in rep.slots[1:])
        assert all(flag for _, flag in rep.growth_inequalities)
        assert all(v.startswith("True") for _, v in rep.side_conditions)
        diag = dict(rep.ball_chain_diagnostic)
        assert "too small" in diag["conclusion"]
        assert "residual cylinder" in rep.scope
        assert not rep.nonconformant

    def test_canonical_plus_prefix_certifies(self):
        cfg = KAlphaConfig()
        st = refine(None, cfg)
        rep = certificate_check(st, (1,), 10, cfg)
        assert rep.verdict is CertificateVerdict.TOUCHING_CERTIFIED
        assert len(rep.slots) == 9

    def test_large_contraction_fails_growth(self):
        q = F(1, 3)
        cfg = KAlphaConfig(q=q)
        st = refine(None, cfg)
        rep = certificate_check(st, (-1,), 8, cfg)
        assert rep.verdict is CertificateVerdict.FAILED
        # 1 > 3q fails at q = 1/3 (equality), as does 1 > 21 q^2
        assert all(not flag for _, flag in rep.growth_inequalities)
        assert rep.nonconformant

    def test_depth_validation(self):
        cfg = KAlphaConfig()
        st = refine(None, cfg)
        with pytest.raises(ValueError):
            certificate_check(st, (-1,), 3, cfg)
        with pytest.raises(ValueError):
            certificate_check(st, (2,), 8, cfg)
        with pytest.raises(ValueError):
            certificate_check(st, (-1, 1), 8, cfg)
        with pytest.raises(ValueError):
            certificate_check(st, (-1,), 8, KAlphaConfig(q=F(1, 4)))
