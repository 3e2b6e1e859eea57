"""Deterministic JSON, CSV, and SVG emission for reports and saved state.

Every load-bearing numeric value in a JSON or CSV document is either an
exact rational string (``"p/q"``) or an interval pair of such strings; a
bare float never appears without its enclosure.  Angles serialize as
``{"pi_coeff": ..., "remainder": ...}`` rational strings, so exact mod-2*pi
identities survive a round trip.  Documents are rendered with
:func:`canonical_dumps` (sorted keys, fixed indentation, trailing newline):
identical inputs give byte-identical artifacts, and a refinement state
round-trips through JSON exactly.

Free-text diagnostic strings inside reports (side conditions, prose
verdicts) are passed through verbatim; the certified values they describe
always appear elsewhere in the document as rationals or intervals.  SVG
output is presentation only and is never read back.
"""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import ConfigError
from .kalpha import (
    CertificateReport,
    CheckRecord,
    CheckVerdict,
    CriticalFamilyReport,
    CrReport,
    KappaResult,
    MValue,
    RefinementState,
    SqrtBoundsReport,
)
from .precision import AngleRep, CertInterval

SCHEMA_VERSION = 1

# --------------------------------------------------------------- primitives


def frac_str(value) -> str:
    """Exact rational rendering ("p/q", or "p" for integers)."""
    return str(Fraction(value))


def parse_frac(text: str) -> Fraction:
    """Inverse of :func:`frac_str`; raises ConfigError on malformed input."""
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a rational number: {text!r}") from exc


def interval_json(value: CertInterval) -> list[str]:
    """Interval pair [lo, hi] with exact (dyadic) endpoint rationals."""
    lo, hi = value.to_fractions()
    return [frac_str(lo), frac_str(hi)]


def angle_json(angle: AngleRep) -> dict:
    return {
        "pi_coeff": frac_str(angle.pi_coeff),
        "remainder": frac_str(angle.remainder),
    }


def angle_from_json(doc) -> AngleRep:
    if not isinstance(doc, dict) or set(doc) != {"pi_coeff", "remainder"}:
        raise ConfigError(f"angle must be a pi_coeff/remainder object, got {doc!r}")
    return AngleRep(parse_frac(doc["pi_coeff"]), parse_frac(doc["remainder"]))


def point_json(point) -> list[str]:
    return [frac_str(point[0]), frac_str(point[1])]


def word_json(word) -> list:
    return list(word)


def word_str(word) -> str:
    """Dot-joined word for CSV cells; the empty word renders as ''."""
    return ".".join(str(symbol) for symbol in word)


def canonical_dumps(doc: dict) -> str:
    """Canonical JSON text: sorted keys, 1-space indent, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def document(kind: str, **fields) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "kind": kind}
    out.update(fields)
    return out


def _require_keys(doc: dict, required: frozenset, kind: str) -> None:
    if not isinstance(doc, dict):
        raise ConfigError(f"{kind} document must be a JSON object")
    missing = sorted(required - doc.keys())
    extra = sorted(doc.keys() - required)
    if missing or extra:
        raise ConfigError(
            f"{kind} document has missing keys {missing} / unknown keys {extra}"
        )


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


# ------------------------------------------------------- refinement state


_STATE_KEYS = frozenset(
    {
        "schema_version",
        "kind",
        "n",
        "q",
        "precision_bits",
        "nonconformant",
        "k_seq",
        "l_seq",
        "windows",
        "interiors",
        "phi",
        "checks",
    }
)


def state_to_json(state: RefinementState) -> dict:
    return document(
        "refinement-state",
        n=state.n,
        q=frac_str(state.q),
        precision_bits=state.precision_bits,
        nonconformant=state.nonconformant,
        k_seq=list(state.k_seq),
        l_seq=list(state.l_seq),
        windows=[{"c": angle_json(c), "d": angle_json(d)} for c, d in state.windows],
        interiors=[word_json(word) for word in state.interiors],
        phi=[
            {"address": word_json(address), "chain": word_json(chain)}
            for address, chain in state.phi
        ],
        checks=[
            [
                {
                    "condition": rec.condition,
                    "verdict": rec.verdict.value,
                    "detail": [[key, value] for key, value in rec.detail],
                }
                for rec in step
            ]
            for step in state.checks
        ],
    )


def state_from_json(doc: dict) -> RefinementState:
    """Exact inverse of :func:`state_to_json` (strict keys, exact values)."""
    _require_keys(doc, _STATE_KEYS, "refinement-state")
    if doc["kind"] != "refinement-state":
        raise ConfigError(f"not a refinement-state document: kind={doc['kind']!r}")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {doc['schema_version']!r}")

    def word(items) -> tuple:
        return tuple(int(symbol) for symbol in items)

    try:
        windows = tuple(
            (angle_from_json(w["c"]), angle_from_json(w["d"])) for w in doc["windows"]
        )
        checks = tuple(
            tuple(
                CheckRecord(
                    condition=str(rec["condition"]),
                    verdict=CheckVerdict(rec["verdict"]),
                    detail=tuple((str(k), str(v)) for k, v in rec["detail"]),
                )
                for rec in step
            )
            for step in doc["checks"]
        )
        return RefinementState(
            n=int(doc["n"]),
            q=parse_frac(doc["q"]),
            k_seq=tuple(int(k) for k in doc["k_seq"]),
            l_seq=tuple(int(l) for l in doc["l_seq"]),
            windows=windows,
            interiors=tuple(word(items) for items in doc["interiors"]),
            phi=tuple(
                (word(entry["address"]), word(entry["chain"])) for entry in doc["phi"]
            ),
            checks=checks,
            precision_bits=int(doc["precision_bits"]),
            nonconformant=bool(doc["nonconformant"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed refinement-state document: {exc}") from exc


# ------------------------------------------------------------ report JSON


def kappa_result_json(result: KappaResult, q: Fraction) -> dict:
    return document(
        "kappa-search",
        q=frac_str(q),
        k=result.k,
        l=result.l,
        kappa=angle_json(result.kappa),
        c=angle_json(result.c),
        d=angle_json(result.d),
    )


def mvalue_json(mv: MValue) -> dict:
    return {
        "word": word_json(mv.word),
        "value": interval_json(mv.value),
        "minimizing_x": interval_json(mv.minimizing_x),
        "in_band": mv.in_band,
        "expansions": mv.expansions,
    }


def _ball_json(ball) -> dict:
    out = {"center": point_json(ball.center), "radius": interval_json(ball.radius)}
    if ball.pair is not None:
        out["pair"] = [point_json(ball.pair[0]), point_json(ball.pair[1])]
    return out


def sqrt_report_json(report: SqrtBoundsReport) -> dict:
    return document(
        "sqrt-bounds",
        a=interval_json(report.a),
        b=interval_json(report.b),
        q=frac_str(report.q),
        t=None if report.t is None else frac_str(report.t),
        inequalities=[
            {
                "name": ineq.name,
                "verdict": ineq.verdict.value,
                "lhs": interval_json(ineq.lhs),
                "rhs": interval_json(ineq.rhs),
            }
            for ineq in report.inequalities
        ],
    )


def ball_separation_json(report) -> dict:
    return document(
        "ball-separation",
        verdict=report.verdict.value,
        bound=interval_json(report.bound),
        dist_kl=interval_json(report.dist_kl),
        balls=[
            {
                "ball": _ball_json(ev.ball),
                "distance_to_m": interval_json(ev.distance_to_m),
                "verdict": ev.verdict.value,
            }
            for ev in report.balls
        ],
    )


def cr_report_json(report: CrReport) -> dict:
    return document(
        "cylinder-separation",
        word=word_json(report.word),
        others=[word_json(w) for w in report.others],
        threshold=frac_str(report.threshold),
        m_word=mvalue_json(report.m_word),
        m_others=[mvalue_json(mv) for mv in report.m_others],
        balls=[
            {"ball": _ball_json(rb.ball), "source_word": word_json(rb.source_word)}
            for rb in report.balls
        ],
        pairs=[
            {
                "ball_index": pair.ball_index,
                "other": word_json(pair.other),
                "distance": interval_json(pair.distance),
                "verdict": pair.verdict.value,
            }
            for pair in report.pairs
        ],
        verdict=report.verdict.value,
    )


def critical_family_json(report: CriticalFamilyReport) -> dict:
    return document(
        "critical-family",
        n=report.n,
        alpha=angle_json(report.alpha),
        prefixes=[word_json(p) for p in report.prefixes],
        m_values=[mvalue_json(mv) for mv in report.m_values],
        separations=[
            {
                "left": word_json(sep.left),
                "right": word_json(sep.right),
                "first_split": sep.first_split,
                "separation": interval_json(sep.separation),
                "bound": frac_str(sep.bound),
                "certified": sep.certified,
            }
            for sep in report.separations
        ],
        certificates=[
            {
                "prefix": word_json(cert.prefix),
                "chain_word": word_json(cert.chain_word),
                "center_x": interval_json(cert.center_x),
                "height": interval_json(cert.height),
            }
            for cert in report.certificates
        ],
        formula_positive=report.formula_positive,
        nonconformant=report.nonconformant,
    )


def certificate_json(report: CertificateReport) -> dict:
    return document(
        "touching-ball-certificate",
        verdict=report.verdict.value,
        prefix=word_json(report.prefix),
        chain_word=word_json(report.chain_word),
        alpha=angle_json(report.alpha),
        center_x=interval_json(report.center_x),
        height=interval_json(report.height),
        slots=[
            {
                "index": slot.index,
                "rot": slot.rot,
                "kind": slot.kind,
                "margin": interval_json(slot.margin),
                "certified": slot.certified,
            }
            for slot in report.slots
        ],
        growth_inequalities=[
            {"inequality": name, "holds": holds}
            for name, holds in report.growth_inequalities
        ],
        side_conditions=[[name, text] for name, text in report.side_conditions],
        ball_chain_diagnostic=[
            [name, text] for name, text in report.ball_chain_diagnostic
        ],
        scope=report.scope,
        nonconformant=report.nonconformant,
    )


def distance_json(result, near_points=None) -> dict:
    doc = document(
        "distance",
        value=interval_json(result.value),
        witnesses=[
            {"word": word_json(word), "point": point_json(point)}
            for word, point in result.witnesses
        ],
        expansions=result.expansions,
    )
    if near_points is not None:
        doc["near_points"] = [point_json(p) for p in near_points]
    return doc


def cloud_json(cloud) -> dict:
    return document(
        "attractor-cloud",
        depth=cloud.depth,
        slack=frac_str(cloud.slack),
        points=len(cloud.entries),
    )


def scan_json(entries) -> dict:
    return document(
        "critical-scan",
        entries=[
            {
                "point": point_json(entry.point),
                "value": interval_json(entry.value),
                "status": entry.status.value,
                "refined": entry.refined,
            }
            for entry in entries
        ],
    )


def hull_census_json(census) -> dict:
    return document(
        "hull-census",
        stabilized=census.stabilized,
        stable_from=census.stable_from,
        direction_tol=frac_str(census.direction_tol),
        records=[
            {
                "depth": rec.depth,
                "vertex_count": rec.vertex_count,
                "raw_vertex_count": rec.raw_vertex_count,
                "displacement": None
                if rec.displacement is None
                else frac_str(rec.displacement),
                "slack": frac_str(rec.slack),
                "directions": [interval_json(d) for d in rec.directions],
                "vertices": [point_json(v) for v in rec.hull.vertices],
            }
            for rec in census.records
        ],
    )


def edge_report_json(report) -> dict:
    return document(
        "edge-directions",
        depth=report.depth,
        alpha=angle_json(report.alpha),
        k_max=report.k_max,
        tol=frac_str(report.tol),
        slack=frac_str(report.slack),
        short_edges=report.short_edges,
        matches=[
            {
                "edge": [point_json(m.edge[0]), point_json(m.edge[1])],
                "length_sq": frac_str(m.length_sq),
                "direction": interval_json(m.direction),
                "matched_k": m.matched_k,
                "residual": frac_str(m.residual),
            }
            for m in report.matches
        ],
    )


def gamma_json(estimate) -> dict:
    return document(
        "gamma-estimate",
        gamma_hat=frac_str(estimate.gamma_hat),
        samples=estimate.samples,
        witness=None if estimate.witness is None else point_json(estimate.witness),
        depth=estimate.depth,
        slack=frac_str(estimate.slack),
        skipped=estimate.skipped,
        vacuous=estimate.vacuous,
    )


def cuts_well_json(verdict, word, eps: Fraction) -> dict:
    return document(
        "cuts-well", verdict=verdict.value, word=word_json(word), eps=frac_str(eps)
    )


# ------------------------------------------------------------------- CSV


def cloud_csv(cloud) -> str:
    return _csv_text(
        ("word", "x", "y"),
        (
            (word_str(word), frac_str(pt[0]), frac_str(pt[1]))
            for word, pt in cloud.entries
        ),
    )


def scan_csv(entries) -> str:
    rows = []
    for entry in entries:
        lo, hi = entry.value.to_fractions()
        rows.append(
            (
                frac_str(entry.point[0]),
                frac_str(entry.point[1]),
                entry.status.value,
                frac_str(lo),
                frac_str(hi),
                entry.refined,
            )
        )
    return _csv_text(("x", "y", "status", "value_lo", "value_hi", "refined"), rows)


def census_csv(census) -> str:
    return _csv_text(
        ("depth", "vertex_count", "raw_vertex_count", "displacement", "slack"),
        (
            (
                rec.depth,
                rec.vertex_count,
                rec.raw_vertex_count,
                "" if rec.displacement is None else frac_str(rec.displacement),
                frac_str(rec.slack),
            )
            for rec in census.records
        ),
    )


def edge_csv(report) -> str:
    rows = []
    for m in report.matches:
        lo, hi = m.direction.to_fractions()
        rows.append(
            (
                frac_str(m.edge[0][0]),
                frac_str(m.edge[0][1]),
                frac_str(m.edge[1][0]),
                frac_str(m.edge[1][1]),
                frac_str(m.length_sq),
                frac_str(lo),
                frac_str(hi),
                "" if m.matched_k is None else m.matched_k,
                frac_str(m.residual),
            )
        )
    return _csv_text(
        (
            "ax",
            "ay",
            "bx",
            "by",
            "length_sq",
            "direction_lo",
            "direction_hi",
            "matched_k",
            "residual",
        ),
        rows,
    )


def family_prefix_csv(report: CriticalFamilyReport) -> str:
    rows = []
    for prefix, mv, cert in zip(report.prefixes, report.m_values, report.certificates):
        if cert.prefix != prefix:
            raise ValueError("certificate order does not match prefix order")
        m_lo, m_hi = mv.value.to_fractions()
        x_lo, x_hi = mv.minimizing_x.to_fractions()
        c_lo, c_hi = cert.center_x.to_fractions()
        h_lo, h_hi = cert.height.to_fractions()
        rows.append(
            (
                word_str(prefix),
                word_str(cert.chain_word),
                frac_str(m_lo),
                frac_str(m_hi),
                frac_str(x_lo),
                frac_str(x_hi),
                frac_str(c_lo),
                frac_str(c_hi),
                frac_str(h_lo),
                frac_str(h_hi),
                "" if mv.in_band is None else mv.in_band,
                mv.expansions,
            )
        )
    return _csv_text(
        (
            "prefix",
            "chain_word",
            "m_lo",
            "m_hi",
            "x_lo",
            "x_hi",
            "center_x_lo",
            "center_x_hi",
            "height_lo",
            "height_hi",
            "in_band",
            "expansions",
        ),
        rows,
    )


def family_separation_csv(report: CriticalFamilyReport) -> str:
    rows = []
    for sep in report.separations:
        lo, hi = sep.separation.to_fractions()
        rows.append(
            (
                word_str(sep.left),
                word_str(sep.right),
                sep.first_split,
                frac_str(lo),
                frac_str(hi),
                frac_str(sep.bound),
                sep.certified,
            )
        )
    return _csv_text(
        (
            "left",
            "right",
            "first_split",
            "separation_lo",
            "separation_hi",
            "bound",
            "certified",
        ),
        rows,
    )


# ------------------------------------------------------------------- SVG


def _coord(value) -> str:
    return format(float(value), ".6g")


def svg_scene(
    *,
    boxes: Sequence[tuple] = (),
    balls: Sequence[tuple] = (),
    points: Sequence[tuple] = (),
    axis_y: Optional[Fraction] = None,
    width: int = 640,
) -> str:
    """Presentation-only picture of boxes (cx, cy, half-side), balls
    (cx, cy, radius), and points (x, y), in mathematical orientation.

    Coordinates are formatted with a fixed precision, so equal inputs give
    byte-identical documents.  Nothing reads SVG back; certified values live
    in the JSON/CSV artifacts.
    """
    xs: list[Fraction] = []
    ys: list[Fraction] = []
    for cx, cy, half in boxes:
        xs += [cx - half, cx + half]
        ys += [cy - half, cy + half]
    for cx, cy, radius in balls:
        xs += [cx - radius, cx + radius]
        ys += [cy - radius, cy + radius]
    for px, py in points:
        xs.append(px)
        ys.append(py)
    if not xs:
        raise ValueError("empty scene")
    if axis_y is not None:
        ys.append(axis_y)
    x_min, x_max, y_min, y_max = min(xs), max(xs), min(ys), max(ys)
    span = max(x_max - x_min, y_max - y_min, Fraction(1, 10**6))
    pad = span / 20
    x_min, x_max = x_min - pad, x_max + pad
    y_min, y_max = y_min - pad, y_max + pad
    w, h = x_max - x_min, y_max - y_min
    stroke = _coord(span / 300)
    dot = _coord(span / 150)
    height = int(round(width * float(h / w)))

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="{_coord(x_min)} {_coord(y_min)} '
        f'{_coord(w)} {_coord(h)}">',
        # flip the y axis so the picture uses mathematical orientation
        f'<g transform="translate(0,{_coord(y_min + y_max)}) scale(1,-1)" '
        f'fill="none" stroke-width="{stroke}">',
    ]
    if axis_y is not None:
        parts.append(
            f'<line x1="{_coord(x_min)}" y1="{_coord(axis_y)}" '
            f'x2="{_coord(x_max)}" y2="{_coord(axis_y)}" stroke="#999999"/>'
        )
    for cx, cy, half in boxes:
        parts.append(
            f'<rect x="{_coord(cx - half)}" y="{_coord(cy - half)}" '
            f'width="{_coord(2 * half)}" height="{_coord(2 * half)}" '
            f'stroke="#1f77b4"/>'
        )
    for cx, cy, radius in balls:
        parts.append(
            f'<circle cx="{_coord(cx)}" cy="{_coord(cy)}" r="{_coord(radius)}" '
            f'stroke="#d62728"/>'
        )
    for px, py in points:
        parts.append(
            f'<circle cx="{_coord(px)}" cy="{_coord(py)}" r="{dot}" '
            f'fill="#333333" stroke="none"/>'
        )
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
