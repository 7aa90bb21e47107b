"""End-to-end composition: seed discovery and per-arc certification."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_TOL_ACTIVE, SemiconcaveFn, transform
from .dcturn import (
    CONVEXITY_TOL,
    ArcTooShortError,
    ClassificationError,
    SelectionError,
    finite_turn_certificate,
    graph_slope_turn,
    jordan_dc,
    mixing_select,
    reparametrize,
    step3_construct,
    turn,
)
from .oracle import grid_singularity_scan
from .subdiff import GeometryError, is_singular
from .tracer import (
    PreconditionError,
    SingularArc,
    TraceError,
    pair_gap,
    project,
    seed_directions,
    trace_arc,
    verify_cy,
)

log = logging.getLogger(__name__)

SELECTION_TOL = 1e-6
RECONSTRUCTION_TOL = 1e-9
SUPPORT_TOL = 1e-9


def scanned_seeds(fn: SemiconcaveFn, h: float, tol_active: float = DEFAULT_TOL_ACTIVE):
    """Singular points obtained by projecting flagged scan cells onto
    branch-equality curves, in scan order."""
    out = []
    for c in grid_singularity_scan(fn, h).flagged:
        vals = np.array([b.value(c[0], c[1]) for b in fn.branches])
        if len(vals) < 2:
            continue
        pair = tuple(sorted(int(k) for k in np.argsort(vals, kind="stable")[:2]))
        z = project(fn, pair, c)
        if z is None or np.linalg.norm(z - c) > 2 * h or not fn.domain.contains(z, tol=0.0):
            continue
        if pair_gap(fn, pair, z) < 0 or not is_singular(fn, z, tol_active):
            continue
        out.append(z)
    return out


def discover_arcs(
    fn: SemiconcaveFn,
    seeds=None,
    h: float = 0.05,
    step: float = 2e-3,
    max_len: float = 10.0,
    tol_active: float = DEFAULT_TOL_ACTIVE,
) -> tuple[list[SingularArc], list[str]]:
    """Trace all admissible arcs from the given seeds, or from scanned ones.

    Scanned seeds within ``2h`` of an already traced arc are skipped, so each
    piece of the singular set is traced from one seed.  Returns the arcs and
    a list of diagnostics for seeds that were rejected.
    """
    arcs: list[SingularArc] = []
    notes: list[str] = []
    explicit = seeds is not None and len(seeds) > 0
    candidates = [np.asarray(s, dtype=float) for s in seeds] if explicit else scanned_seeds(fn, h, tol_active)
    covered = np.zeros((0, 2))
    for x0 in candidates:
        if not explicit and len(covered):
            if np.min(np.linalg.norm(covered - x0, axis=1)) <= 2 * h:
                continue
        try:
            dirs = seed_directions(fn, x0, tol_active)
        except PreconditionError as exc:
            notes.append(str(exc))
            continue
        if not dirs:
            notes.append(f"no admissible direction at {tuple(map(float, x0))}")
        for pair, q in dirs:
            try:
                arc = trace_arc(fn, x0, pair, q, step, max_len, tol_active)
            except TraceError as exc:
                notes.append(str(exc))
                continue
            arcs.append(arc)
            covered = np.vstack([covered, arc.points])
    return arcs, notes


@dataclass
class ArcCertificate:
    arc: SingularArc
    report: dict
    checks: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(self.checks.values())


def certify_arc(
    fn: SemiconcaveFn,
    arc: SingularArc,
    delta_min: float = 1e-6,
    turn_tol: float = 1e-3,
    tol_active: float = DEFAULT_TOL_ACTIVE,
) -> ArcCertificate:
    """Run reparametrization, the band construction, the Jordan split and
    the turn certificate on one arc, collecting every check."""
    report: dict = {
        "seed": arc.seed.tolist(),
        "q": arc.q.tolist(),
        "pair": list(arc.pair),
        "stop_reason": arc.stop_reason,
        "n_samples": len(arc.samples),
        "length": arc.length,
    }
    checks: dict = {}
    cy = verify_cy(arc, delta_min, fn, tol_active)
    report["cy"] = cy.as_dict()
    checks["cy"] = cy.passed
    if arc.stop_reason == "triple_point":
        end = arc.samples[-1].x
        try:
            report["next_directions"] = [
                {"pair": list(p), "q": q.tolist()} for p, q in seed_directions(fn, end, tol_active)
            ]
        except PreconditionError:
            report["next_directions"] = []
    try:
        gp = reparametrize(arc)
        fn_t = transform(fn, gp.frame)
        s3 = step3_construct(fn_t, gp, tol_active)
        dc = jordan_dc(gp)
        mix = mixing_select(s3.phis, gp.gs, gp.xs, tol=SELECTION_TOL)
        cert = finite_turn_certificate(fn, arc, turn_tol, tol_active=tol_active)
    except (ArcTooShortError, ClassificationError, SelectionError, GeometryError, TraceError) as exc:
        return ArcCertificate(arc, report, checks, error=f"{type(exc).__name__}: {exc}")

    slope_var = float(np.abs(np.diff(gp.slopes)).sum())
    lip_bound = gp.lipschitz + slope_var
    graph_pts = np.column_stack([gp.xs, gp.gs])
    report["graph"] = {
        "frame": {"rotation": gp.frame.rotation.tolist(), "origin": gp.frame.origin.tolist()},
        "alpha": gp.alpha,
        "n_points": len(gp.xs),
        "lipschitz": gp.lipschitz,
        "slope_variation": slope_var,
        "turn": turn(graph_pts) if len(gp.xs) >= 3 else 0.0,
        "turn_from_slopes": graph_slope_turn(gp.xs, gp.gs),
    }
    cls = s3.classification
    report["step3"] = {
        "delta": cls.delta,
        "levels": cls.levels.tolist(),
        "mesh": cls.mesh,
        "assignment": cls.assignment.tolist(),
        "bands": {str(i): int(len(idx)) for i, idx in cls.sets.items()},
        "selection_residual": s3.selection_residual,
        "support_defect": s3.support_defect,
    }
    recon = dc.reconstruction_error(gp.gs)
    report["dc"] = {
        "xs": dc.xs.tolist(),
        "y1": dc.y1.tolist(),
        "y2": dc.y2.tolist(),
        "offset": dc.offset,
        "reconstruction_error": recon,
        "convexity_defect": dc.convexity_defect(),
        "lipschitz": dc.lipschitz(),
        "lipschitz_bound": lip_bound,
    }
    mix_dc = mix.decomposition
    report["mixing"] = {
        "realizer": mix.realizer.tolist(),
        "reconstruction_error": mix_dc.reconstruction_error(gp.gs),
        "convexity_defect": mix_dc.convexity_defect(),
    }
    report["turn"] = cert.as_dict()
    checks.update(
        {
            "delta_positive": cls.delta > 0,
            "mesh_below_half_delta": cls.mesh < cls.delta / 2,
            "selection": s3.selection_residual <= SELECTION_TOL,
            "support_lines": s3.support_defect <= SUPPORT_TOL,
            "dc_convex": dc.convexity_defect() >= -CONVEXITY_TOL,
            "dc_reconstruction": recon <= RECONSTRUCTION_TOL,
            "dc_lipschitz": dc.lipschitz() <= lip_bound * (1 + 1e-9) + 1e-12,
            "turn_converged": cert.converged,
        }
    )
    return ArcCertificate(arc, report, checks)
