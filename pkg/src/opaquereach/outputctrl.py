"""Output controllability and its two bridges to opacity.

A state is output controllable over horizon k when some control sequence
drives the output to zero at time k.  Matched secret/nonsecret runs with
equal outputs subtract, by linearity, into exactly such a sequence for the
difference state; conversely, shifting a set by output-controllable states
manufactures an opaque pair.  Both directions are constructive here.

Controls are unconstrained throughout: the zero-output definition never
intersects its control space with the admissible input set, and witnesses
derived from matched runs are differences of admissible controls, which
live in U + (-U) rather than U.  controls_admissible checks membership in
that difference set when a caller wants the constrained reading.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (DEFAULT_TOL, GeometryError, Tolerances, VPolytope,
                       in_hull, minkowski_sum)
from .system import InputSet, LtiSystem, simulate

__all__ = ["OcWitness", "is_output_controllable", "oc_witness_from_opacity",
           "synth_opaque_pair", "difference_input_set", "controls_admissible"]


@dataclass(frozen=True)
class OcWitness:
    """Controls steering the output from x0 to zero, with the achieved miss.

    residual is the 2-norm of the simulated output at the final step; the
    witness is only meaningful when valid().
    """

    x0: np.ndarray
    controls: np.ndarray
    residual: float

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        ctl = np.asarray(self.controls, dtype=float)
        if ctl.ndim != 2:
            raise GeometryError("witness controls must have shape (k, m)")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "controls", ctl)

    @property
    def horizon(self):
        return self.controls.shape[0]

    def valid(self, tol: Tolerances = DEFAULT_TOL):
        return self.residual <= tol.geom_eps

    def replay(self, sys: LtiSystem):
        _, outputs = simulate(sys, self.x0, self.controls)
        return float(np.linalg.norm(outputs[-1]))


def _steering_matrix(sys, k):
    """[C A^{k-1} B | ... | C B], columns ordered as the stacked controls."""
    return np.hstack([sys.c @ term for term in sys.input_terms(k)])


def is_output_controllable(sys: LtiSystem, x0, k,
                           tol: Tolerances = DEFAULT_TOL) -> OcWitness | None:
    """Least-squares control sequence zeroing the output at time k, or None.

    Singular values below 1e-10 of the largest are treated as rank zero, so
    a target outside the numerical range of the steering matrix comes back
    as None rather than an absurdly large control.
    """
    k = int(k)
    if k < 1:
        raise GeometryError("output controllability needs a horizon k >= 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (sys.n,):
        raise GeometryError("x0 must be a state-space point")
    rhs = -(sys.c @ sys.power(k) @ x0)
    sol, _, _, _ = np.linalg.lstsq(_steering_matrix(sys, k), rhs, rcond=1e-10)
    controls = sol.reshape(k, sys.m)
    _, outputs = simulate(sys, x0, controls)
    residual = float(np.linalg.norm(outputs[-1]))
    wit = OcWitness(x0, controls, residual)
    return wit if wit.valid(tol) else None


def _as_run(obj):
    if hasattr(obj, "x0") and hasattr(obj, "controls"):
        return (np.atleast_1d(np.asarray(obj.x0, dtype=float)),
                np.asarray(obj.controls, dtype=float))
    x0, controls = obj
    return (np.atleast_1d(np.asarray(x0, dtype=float)),
            np.asarray(controls, dtype=float))


def oc_witness_from_opacity(sys: LtiSystem, pair, match,
                            tol: Tolerances = DEFAULT_TOL,
                            check_inputs: InputSet | None = None) -> OcWitness:
    """Difference of two output-matched runs, as a zero-output witness.

    pair and match are (x0, controls) tuples or any objects exposing those
    attributes (opacity certificates qualify).  Raises when the two runs do
    not actually produce the same final output.  With check_inputs the
    difference controls are additionally required to lie in U + (-U).
    """
    xs, us = _as_run(pair)
    xn, un = _as_run(match)
    if us.shape != un.shape:
        raise GeometryError("runs must share horizon and input dimension")
    _, ys = simulate(sys, xs, us)
    _, yn = simulate(sys, xn, un)
    gap = float(np.linalg.norm(ys[-1] - yn[-1]))
    scale = 1.0 + max(float(np.abs(ys[-1]).max()), float(np.abs(yn[-1]).max()))
    if gap > 10.0 * tol.geom_eps * scale:
        raise GeometryError(
            f"runs disagree at the final output by {gap:.3e}; not a match")
    wit = OcWitness(xs - xn, us - un,
                    float(np.linalg.norm(simulate(sys, xs - xn, us - un)[1][-1])))
    if check_inputs is not None:
        diff = difference_input_set(check_inputs, tol)
        ok = controls_admissible(wit.controls, diff, tol)
        if not ok:
            raise GeometryError(
                "difference controls leave the admissible difference set")
    return wit


def difference_input_set(u: InputSet, tol: Tolerances = DEFAULT_TOL) -> InputSet:
    """U + (-U): where differences of admissible controls live."""
    verts = u.vertices(tol)
    return InputSet(minkowski_sum(VPolytope(verts), VPolytope(-verts), tol))


def controls_admissible(controls, inputs: InputSet,
                        tol: Tolerances = DEFAULT_TOL) -> bool:
    """Whether every step of a control sequence lies in the given input set."""
    ctl = np.asarray(controls, dtype=float)
    hull = VPolytope(inputs.vertices(tol))
    return all(in_hull(row, hull, tol=tol) for row in np.atleast_2d(ctl))


def synth_opaque_pair(sys: LtiSystem, x_oc: VPolytope, witnesses, x2: VPolytope,
                      k, tol: Tolerances = DEFAULT_TOL):
    """Shift x2 by output-controllable states to manufacture an opaque pair.

    witnesses maps the vertices of x_oc, in order, to their zero-output
    control sequences for horizon k; each is revalidated by simulation.
    Returns (x1, x2) with x1 the vertex-sum Minkowski sum.  Runs from x1
    reproduce any x2 output by adding the witness controls of the shift,
    so the pair is opaque whenever those summed controls are admissible
    (always, for unconstrained controls).
    """
    k = int(k)
    if k < 1:
        raise GeometryError("synthesis needs a horizon k >= 1")
    witnesses = list(witnesses)
    if len(witnesses) != x_oc.nv:
        raise GeometryError(
            f"need one witness per vertex of x_oc: {x_oc.nv} vertices, "
            f"{len(witnesses)} witnesses")
    for vert, wit in zip(x_oc.vertices, witnesses):
        if wit is None:
            raise GeometryError("missing witness for an x_oc vertex")
        if wit.horizon != k or not np.allclose(wit.x0, vert, atol=tol.geom_eps):
            raise GeometryError("witness does not cover its x_oc vertex at k")
        if wit.replay(sys) > 10.0 * tol.geom_eps:
            raise GeometryError("stored witness fails revalidation")
    return minkowski_sum(x_oc, x2, tol), x2
