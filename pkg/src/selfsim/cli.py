"""Command-line surface: one subcommand per certified analysis.

Every run writes deterministic artifacts (JSON, CSV, optionally SVG) into
the requested output directory: the same configuration and seed always
produce byte-identical files.  Numeric values in JSON/CSV are exact rational
strings or interval pairs; SVG is presentation only.

Exit codes: 0 success; 2 configuration problems (bad arguments, unreadable
or malformed input files, violated parameter preconditions); 3 exhausted
expansion budgets or search caps; 4 certified failures (a refinement
condition fails or cannot be decided at the precision ladder, a hypothesis
or domain violation is certified, or a touching-ball check returns FAILED).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction
from pathlib import Path

from .distance_engine import (
    DEFAULT_EXPANSION_BUDGET,
    critical_scan,
    distance_to_attractor,
    near_set,
)
from .errors import (
    BudgetExceeded,
    CertificationFailed,
    ConfigError,
    DomainViolation,
    HypothesisViolation,
    SearchExhausted,
)
from .geometry2d import Ball, sqrt_of_fraction
from .hull_analysis import (
    DEFAULT_DIRECTION_TOL,
    cuts_well_disk,
    edge_directions_match,
    gamma_estimate,
    hull_census,
)
from .ifs_core import (
    DEFAULT_NODE_BUDGET,
    attractor_cloud,
    cantor_ifs,
    cylinder_ball,
    load_ifs,
    rot_pair_ifs,
    segment_ifs,
    sierpinski_ifs,
)
from .kalpha import (
    DEFAULT_KAPPA_CAP,
    DEFAULT_MIN_Y_BUDGET,
    CertificateVerdict,
    KAlphaConfig,
    build_kalpha,
    certificate_check,
    check_ball_separation,
    check_cr,
    check_sqrt_bounds,
    critical_family,
    kappa_search,
    refine,
)
from .precision import DEFAULT_BITS, AngleRep, CertInterval
from . import serialize as ser

F = Fraction


# ------------------------------------------------------------ value parsing


def parse_angle(text: str) -> AngleRep:
    """Angle grammar: '3pi/2', 'pi', '-pi/4', 'pi+1/2', '7/1000', '0'."""
    s = text.strip().replace(" ", "")
    try:
        if "pi" not in s:
            return AngleRep(F(0), F(s))
        before, after = s.split("pi", 1)
        if before in ("", "+"):
            coeff = F(1)
        elif before == "-":
            coeff = F(-1)
        else:
            coeff = F(before)
        remainder = F(0)
        if after:
            if after.startswith("/"):
                coeff /= F(after[1:])
            elif after[0] in "+-":
                remainder = F(after)
            else:
                raise ValueError("junk after pi term")
        return AngleRep(coeff, remainder)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(
            f"not an angle: {text!r} (examples: '3pi/2', 'pi+1/2', '7/1000')"
        ) from exc


def parse_word(text: str) -> tuple:
    """Dot-joined symbolic address, e.g. '2.1.-1'; '' is the empty word."""
    s = text.strip()
    if not s:
        return ()
    symbols = []
    for token in s.split("."):
        try:
            symbols.append(int(token))
        except ValueError:
            symbols.append(token)
    return tuple(symbols)


def parse_point(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"not a point: {text!r} (expected 'x,y' rationals)")
    return (ser.parse_frac(parts[0]), ser.parse_frac(parts[1]))


# -------------------------------------------------------------- IFS sources

_FAMILIES = ("cantor", "segment", "sierpinski", "rot-pair", "kalpha")


def _resolve_ifs(args):
    if args.ifs and args.family:
        raise ConfigError("give either --ifs PATH or --family NAME, not both")
    if args.ifs:
        return load_ifs(Path(args.ifs).resolve())
    if args.family == "cantor":
        return cantor_ifs()
    if args.family == "segment":
        return segment_ifs()
    if args.family == "sierpinski":
        return sierpinski_ifs()
    if args.family == "rot-pair":
        return rot_pair_ifs(ser.parse_frac(args.ratio), parse_angle(args.rotation))
    if args.family == "kalpha":
        return build_kalpha(
            KAlphaConfig(q=ser.parse_frac(args.q), alpha=parse_angle(args.alpha))
        )
    raise ConfigError("an IFS source is required: --ifs PATH or --family NAME")


# ----------------------------------------------------------------- emission


def _outdir(text: str) -> Path:
    path = Path(text).resolve()
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def _emit_json(path: Path, doc: dict) -> None:
    _emit(path, ser.canonical_dumps(doc))


def _svg_dir(args):
    if args.svg is None:
        return None
    return _outdir(args.svg or args.out)


def _load_state(text: str):
    path = Path(text).resolve()
    return ser.state_from_json(json.loads(path.read_text(encoding="utf-8")))


def _mid(interval: CertInterval) -> Fraction:
    lo, hi = interval.to_fractions()
    return (lo + hi) / 2


# ------------------------------------------------------------- subcommands


def _cmd_attractor(args) -> int:
    ifs = _resolve_ifs(args)
    cloud = attractor_cloud(ifs, ser.parse_frac(args.eps), args.budget, args.bits)
    out = _outdir(args.out)
    _emit_json(out / "attractor.json", ser.cloud_json(cloud))
    _emit(out / "attractor_cloud.csv", ser.cloud_csv(cloud))
    svg = _svg_dir(args)
    if svg is not None:
        _emit(svg / "attractor.svg", ser.svg_scene(points=cloud.points()))
    return 0


def _cmd_distance(args) -> int:
    ifs = _resolve_ifs(args)
    x = parse_point(args.point)
    eps = ser.parse_frac(args.eps)
    result = distance_to_attractor(ifs, x, eps, budget=args.budget, bits=args.bits)
    near = None
    if args.eta is not None:
        eta = ser.parse_frac(args.eta)
        near = near_set(
            ifs, x, eta, min(eps, eta / 2), budget=args.budget, bits=args.bits
        )
    _emit_json(_outdir(args.out) / "distance.json", ser.distance_json(result, near))
    return 0


def _cmd_critical_scan(args) -> int:
    ifs = _resolve_ifs(args)
    segment = (parse_point(args.a), parse_point(args.b))
    entries = critical_scan(
        ifs,
        segment,
        args.steps,
        ser.parse_frac(args.eps),
        budget=args.budget,
        bits=args.bits,
        refine_brackets=not args.no_bisect,
    )
    out = _outdir(args.out)
    _emit_json(out / "critical_scan.json", ser.scan_json(entries))
    _emit(out / "critical_scan.csv", ser.scan_csv(entries))
    return 0


def _cmd_hull_census(args) -> int:
    ifs = _resolve_ifs(args)
    census = hull_census(
        ifs, args.max_depth, args.budget, args.bits, ser.parse_frac(args.tol)
    )
    out = _outdir(args.out)
    _emit_json(out / "hull_census.json", ser.hull_census_json(census))
    _emit(out / "hull_census.csv", ser.census_csv(census))
    return 0


def _cmd_edge_directions(args) -> int:
    ifs = _resolve_ifs(args)
    report = edge_directions_match(
        ifs,
        args.depth,
        parse_angle(args.target),
        args.k_max,
        ser.parse_frac(args.tol),
        budget=args.budget,
        bits=args.bits,
    )
    out = _outdir(args.out)
    _emit_json(out / "edge_directions.json", ser.edge_report_json(report))
    _emit(out / "edge_directions.csv", ser.edge_csv(report))
    return 0


def _cmd_gamma(args) -> int:
    ifs = _resolve_ifs(args)
    estimate = gamma_estimate(
        ifs, args.depth, args.samples, args.seed, args.budget, args.bits
    )
    _emit_json(_outdir(args.out) / "gamma.json", ser.gamma_json(estimate))
    return 0


def _cmd_cuts_well(args) -> int:
    ifs = _resolve_ifs(args)
    word = parse_word(args.word)
    eps = ser.parse_frac(args.eps)
    disk = Ball(
        parse_point(args.center),
        CertInterval.from_rational(ser.parse_frac(args.radius), args.bits),
    )
    verdict = cuts_well_disk(
        ifs, word, disk, eps, depth=args.depth, budget=args.budget, bits=args.bits
    )
    _emit_json(_outdir(args.out) / "cuts_well.json", ser.cuts_well_json(verdict, word, eps))
    return 0


def _sqrt_grid(q: Fraction, n: int, bits: int) -> dict:
    points = []
    for i in range(n):
        a = 2 * q / 3 + (F(2 * i, 3 * (n - 1)) if n > 1 else F(0)) * q
        for j in range(n):
            b = q * q * F(j + 1, n)
            entry = {"a": ser.frac_str(a), "b": ser.frac_str(b)}
            try:
                report = check_sqrt_bounds(a, b, q, bits)
            except DomainViolation:
                entry["outcome"] = "domain_violation"
            else:
                entry["outcome"] = "checked"
                entry["t"] = None if report.t is None else ser.frac_str(report.t)
                entry["verdicts"] = {
                    name: verdict.value for name, verdict in report.verdicts().items()
                }
            points.append(entry)
    return ser.document("verify-sqrt", q=ser.frac_str(q), grid=n, points=points)


def _pom1_battery(trials: int, seed: int, bits: int) -> dict:
    equality = check_ball_separation(
        [(F(0), F(1))],
        [(F(0), F(-1))],
        [(F(2), F(1))],
        sqrt_of_fraction(8, bits),
        bits,
    )
    rng = random.Random(seed)
    trial_docs = []
    for _ in range(trials):
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
        report = check_ball_separation(k_pts, l_pts, m_pts, 8, bits)
        trial_docs.append(ser.ball_separation_json(report))
    return ser.document(
        "verify-pom1",
        equality=ser.ball_separation_json(equality),
        seed=seed,
        trials=trial_docs,
    )


def _cmd_verify_lemmas(args) -> int:
    q = ser.parse_frac(args.q)
    out = _outdir(args.out)
    if args.which in ("sqrt", "all"):
        _emit_json(out / "verify_sqrt.json", _sqrt_grid(q, args.grid, args.bits))
    if args.which in ("pom1", "all"):
        _emit_json(
            out / "verify_pom1.json", _pom1_battery(args.trials, args.seed, args.bits)
        )
    if args.which in ("cr", "all"):
        cfg = KAlphaConfig(q=q, alpha=AngleRep.from_rational(7 * q * q))
        report = check_cr(
            cfg, (2, -2), [(2, 1), (2, -1), (2, 2)], args.bits, args.budget
        )
        _emit_json(out / "verify_cr.json", ser.cr_report_json(report))
    return 0


def _cmd_kappa_search(args) -> int:
    q = ser.parse_frac(args.q)
    result = kappa_search(
        parse_angle(args.a),
        parse_angle(args.b),
        args.k0,
        q,
        bits=args.bits,
        k_cap=args.k_cap,
    )
    _emit_json(_outdir(args.out) / "kappa_search.json", ser.kappa_result_json(result, q))
    return 0


def _cmd_refine(args) -> int:
    if args.steps < 0:
        raise ConfigError("--steps must not be negative")
    state = None
    if args.resume:
        state_path = Path(args.resume).resolve()
        state_path.parent.mkdir(parents=True, exist_ok=True)
        if state_path.exists():
            state = _load_state(args.resume)
    else:
        state_path = _outdir(args.out) / "state.json"
    if state is None and args.steps == 0:
        raise ConfigError("no saved state and no steps requested: nothing to do")
    # when resuming, the saved contraction wins; --q only seeds fresh runs
    cfg = KAlphaConfig(q=state.q if state is not None else ser.parse_frac(args.q))
    for _ in range(args.steps):
        state = refine(state, cfg, args.bits, k_cap=args.k_cap, budget=args.budget)
    _emit(state_path, ser.canonical_dumps(ser.state_to_json(state)))
    return 0


def _family_svg(report, cfg, bits: int):
    ifs = build_kalpha(cfg.with_alpha(report.alpha))
    boxes, balls = [], []
    for cert in report.certificates:
        cb = cylinder_ball(ifs, cert.chain_word, bits=bits)
        center = cb.center_midpoint()
        boxes.append((center[0], center[1], cb.radius))
        balls.append((_mid(cert.center_x), F(0), abs(_mid(cert.height))))
    return ser.svg_scene(boxes=boxes, balls=balls, axis_y=F(0))


def _cmd_critical_family(args) -> int:
    state = _load_state(args.state)
    cfg = KAlphaConfig(q=state.q)
    n = state.n if args.n is None else args.n
    report = critical_family(state, n, cfg, args.bits, args.budget)
    out = _outdir(args.out)
    _emit_json(out / "critical_family.json", ser.critical_family_json(report))
    _emit(out / "critical_family_prefixes.csv", ser.family_prefix_csv(report))
    _emit(out / "critical_family_separations.csv", ser.family_separation_csv(report))
    svg = _svg_dir(args)
    if svg is not None:
        _emit(svg / "critical_family.svg", _family_svg(report, cfg, args.bits))
    return 0


def _certificate_svg(report, cfg, bits: int):
    ifs = build_kalpha(cfg.with_alpha(report.alpha))
    boxes = []
    for cut in (1, len(report.prefix) + 1):
        cb = cylinder_ball(ifs, report.chain_word[:cut], bits=bits)
        center = cb.center_midpoint()
        boxes.append((center[0], center[1], cb.radius))
    u = (_mid(report.center_x), _mid(report.height))
    balls = [(u[0], F(0), abs(u[1]))]
    return ser.svg_scene(boxes=boxes, balls=balls, points=[u], axis_y=F(0))


def _cmd_certificate(args) -> int:
    state = _load_state(args.state)
    cfg = KAlphaConfig(q=state.q)
    report = certificate_check(
        state, parse_word(args.prefix), args.depth, cfg, args.bits, args.budget
    )
    out = _outdir(args.out)
    _emit_json(out / "certificate.json", ser.certificate_json(report))
    svg = _svg_dir(args)
    if svg is not None:
        _emit(svg / "certificate.svg", _certificate_svg(report, cfg, args.bits))
    return 4 if report.verdict is CertificateVerdict.FAILED else 0


# --------------------------------------------------------------- the parser


def _add_common(sub, budget: int) -> None:
    sub.add_argument("--bits", type=int, default=DEFAULT_BITS, help="working precision")
    sub.add_argument("--budget", type=int, default=budget, help="expansion budget")
    sub.add_argument("--out", default=".", help="output directory")


def _add_ifs_source(sub) -> None:
    sub.add_argument("--ifs", help="path to an IFS JSON document")
    sub.add_argument("--family", choices=_FAMILIES, help="built-in IFS family")
    sub.add_argument("--ratio", default="1/5", help="rot-pair contraction ratio")
    sub.add_argument("--rotation", default="0", help="rot-pair rotation angle")
    sub.add_argument("--q", default="1/1000", help="four-map family contraction")
    sub.add_argument("--alpha", default="0", help="four-map family rotation angle")


def _add_svg(sub) -> None:
    sub.add_argument(
        "--svg",
        nargs="?",
        const="",
        default=None,
        metavar="DIR",
        help="also write an SVG figure (into DIR, default the output directory)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selfsim",
        description="Certified computations on self-similar sets in the plane.",
    )
    subs = parser.add_subparsers(dest="subcommand", required=True)

    sub = subs.add_parser("attractor", help="attractor point cloud with slack bound")
    _add_ifs_source(sub)
    _add_common(sub, DEFAULT_NODE_BUDGET)
    _add_svg(sub)
    sub.add_argument("--eps", default="1/100", help="Hausdorff slack target")
    sub.set_defaults(func=_cmd_attractor)

    sub = subs.add_parser("distance", help="certified distance to the attractor")
    _add_ifs_source(sub)
    _add_common(sub, DEFAULT_EXPANSION_BUDGET)
    sub.add_argument("--point", required=True, help="query point 'x,y'")
    sub.add_argument("--eps", default="1/1000000", help="interval width target")
    sub.add_argument("--eta", help="near-set slack (omit to skip the near set)")
    sub.set_defaults(func=_cmd_distance)

    sub = subs.add_parser("critical-scan", help="criticality sweep along a segment")
    _add_ifs_source(sub)
    _add_common(sub, DEFAULT_EXPANSION_BUDGET)
    sub.add_argument("--a", required=True, help="segment start 'x,y'")
    sub.add_argument("--b", required=True, help="segment end 'x,y'")
    sub.add_argument("--steps", type=int, default=27, help="number of samples")
    sub.add_argument("--eps", default="1/10000", help="distance width target")
    sub.add_argument(
        "--no-bisect", action="store_true", help="skip side-flip bracket bisection"
    )
    sub.set_defaults(func=_cmd_critical_scan)

    sub = subs.add_parser("hull-census", help="per-depth hull stabilization census")
    _add_ifs_source(sub)
    _add_common(sub, DEFAULT_NODE_BUDGET)
    sub.add_argument("--max-depth", type=int, default=6)
    sub.add_argument("--tol", default=str(DEFAULT_DIRECTION_TOL), help="direction tolerance")
    sub.set_defaults(func=_cmd_hull_census)

    sub = subs.add_parser("edge-directions", help="match hull edges to k*alpha mod pi")
    _add_ifs_source(sub)
    _add_common(sub, DEFAULT_NODE_BUDGET)
    sub.add_argument("--depth", type=int, default=4)
    sub.add_argument("--target", required=True, help="direction family angle")
    sub.add_argument("--k-max", type=int, default=12)
    sub.add_argument("--tol", default="1/1000", help="matching tolerance")
    sub.set_defaults(func=_cmd_edge_directions)

    sub = subs.add_parser("gamma", help="interior/boundary distance ratio estimate")
    _add_ifs_source(sub)
    _add_common(sub, DEFAULT_NODE_BUDGET)
    sub.add_argument("--depth", type=int, default=4)
    sub.add_argument("--samples", type=int, default=16)
    sub.add_argument("--seed", type=int, default=0)
    sub.set_defaults(func=_cmd_gamma)

    sub = subs.add_parser("cuts-well", help="eps-well disk cut of a cylinder hull")
    _add_ifs_source(sub)
    _add_common(sub, DEFAULT_NODE_BUDGET)
    sub.add_argument("--word", default="", help="cylinder address, e.g. '1.2'")
    sub.add_argument("--center", required=True, help="disk center 'x,y'")
    sub.add_argument("--radius", required=True, help="disk radius")
    sub.add_argument("--eps", default="1/10", help="tangent-direction tolerance")
    sub.add_argument("--depth", type=int, default=5)
    sub.set_defaults(func=_cmd_cuts_well)

    sub = subs.add_parser("verify-lemmas", help="batch inequality certifications")
    _add_common(sub, DEFAULT_MIN_Y_BUDGET)
    sub.add_argument("--which", choices=("sqrt", "pom1", "cr", "all"), default="all")
    sub.add_argument("--q", default="1/1000", help="contraction for sqrt/cr batches")
    sub.add_argument("--grid", type=int, default=5, help="sqrt grid resolution")
    sub.add_argument("--trials", type=int, default=5, help="random pom1 trials")
    sub.add_argument("--seed", type=int, default=0)
    sub.set_defaults(func=_cmd_verify_lemmas)

    sub = subs.add_parser("kappa-search", help="smallest k with k*alpha in the window")
    _add_common(sub, DEFAULT_MIN_Y_BUDGET)
    sub.add_argument("--a", required=True, help="window start angle")
    sub.add_argument("--b", required=True, help="window end angle")
    sub.add_argument("--k0", type=int, default=0, help="multiplier lower bound")
    sub.add_argument("--q", default="1/1000", help="contraction (sets the pinch width)")
    sub.add_argument("--k-cap", type=int, default=DEFAULT_KAPPA_CAP)
    sub.set_defaults(func=_cmd_kappa_search)

    sub = subs.add_parser("refine", help="run nested-window refinement steps")
    _add_common(sub, DEFAULT_MIN_Y_BUDGET)
    sub.add_argument("--steps", type=int, default=1)
    sub.add_argument("--q", default="1/1000", help="contraction for fresh runs")
    sub.add_argument("--k-cap", type=int, default=DEFAULT_KAPPA_CAP)
    sub.add_argument(
        "--resume",
        help="state file to resume from and write back to (default OUT/state.json)",
    )
    sub.set_defaults(func=_cmd_refine)

    sub = subs.add_parser("critical-family", help="separated family of chain minima")
    _add_common(sub, DEFAULT_MIN_Y_BUDGET)
    _add_svg(sub)
    sub.add_argument("--state", required=True, help="saved refinement state")
    sub.add_argument("--n", type=int, help="family level (default: state depth)")
    sub.set_defaults(func=_cmd_critical_family)

    sub = subs.add_parser("certificate", help="touching-ball certificate for a prefix")
    _add_common(sub, DEFAULT_MIN_Y_BUDGET)
    _add_svg(sub)
    sub.add_argument("--state", required=True, help="saved refinement state")
    sub.add_argument("--prefix", default="-1", help="sign prefix, e.g. '-1' or '1'")
    sub.add_argument("--depth", type=int, default=8, help="certified tail depth")
    sub.set_defaults(func=_cmd_certificate)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BudgetExceeded, SearchExhausted) as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return 3
    except (CertificationFailed, DomainViolation, HypothesisViolation) as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
