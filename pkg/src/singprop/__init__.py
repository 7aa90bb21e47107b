"""Singular sets of semiconcave functions of two variables.

Functions are finite minima of polynomial branches.  The package computes
reachable gradients and superdifferentials, traces the singular arcs that
emanate from singular points, and checks that those arcs are graphs of
differences of convex functions with finite turn.
"""

from .core import Branch, Domain, Frame, SemiconcaveFn, active_set, derive_constants, eval_min, make_fn, transform
from .dcturn import (
    DCDecomposition,
    GraphParam,
    TurnCertificate,
    finite_turn_certificate,
    jordan_dc,
    mixing_select,
    reparametrize,
    step3_construct,
    turn,
)
from .subdiff import (
    ConvexPolygon,
    GradientSet,
    Interval,
    diam,
    is_singular,
    propagation_criterion,
    reachable_gradients,
    slice,
    subdiff_f,
    superdifferential,
)
from .tracer import SingularArc, seed_directions, trace_arc, verify_cy

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "ConvexPolygon",
    "DCDecomposition",
    "Domain",
    "Frame",
    "GradientSet",
    "GraphParam",
    "Interval",
    "SemiconcaveFn",
    "SingularArc",
    "TurnCertificate",
    "active_set",
    "derive_constants",
    "diam",
    "eval_min",
    "finite_turn_certificate",
    "is_singular",
    "jordan_dc",
    "make_fn",
    "mixing_select",
    "propagation_criterion",
    "reachable_gradients",
    "reparametrize",
    "seed_directions",
    "slice",
    "step3_construct",
    "subdiff_f",
    "superdifferential",
    "trace_arc",
    "transform",
    "turn",
    "verify_cy",
]
