"""Opacity against several adversaries at once.

Each adversary sees the state through its own output map C_i.  The basic
decentralized property quantifies the single-adversary check over all maps;
stacking the maps into one tall matrix gives a strictly stronger check
(one nonsecret run must then explain every adversary simultaneously, see
counterexample_aggregated).  A coordinator that pools per-adversary
explanations sits in between: it covers the secret reach set by the
per-adversary explainable regions, which this module decides exactly by a
disjunctive LP expansion.  Finally, colluding adversaries exchange their
maps over a directed graph; the collusion fixpoint spreads non-opacity one
graph hop per round.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import product

import numpy as np

from .geometry import (DEFAULT_TOL, GeometryError, OPTIMAL, Tolerances,
                       convex_hull_h, solve_lp)
from .opacity import (FailureWitness, ScheduleVerdict, Status, Verdict,
                      _as_vpoly, _check_horizon)
from .system import InputSet, LtiSystem, Scenario, VPolytope, reach_exact

__all__ = ["AdversaryEnsemble", "CommGraph", "CoordinatorRule",
           "DecentralizedVerdict", "CollusionResult", "check_decentralized",
           "check_decentralized_K", "check_aggregated", "check_co_opacity",
           "is_directed_dominating", "simulate_collusion",
           "counterexample_aggregated"]


@dataclass(frozen=True)
class AdversaryEnsemble:
    """The output maps C_i of l adversaries, with their ids."""

    maps: tuple
    labels: tuple = ()

    def __post_init__(self):
        maps = tuple(np.atleast_2d(np.asarray(c, dtype=float)) for c in self.maps)
        if not maps:
            raise GeometryError("an ensemble needs at least one adversary")
        n = maps[0].shape[1]
        if any(c.ndim != 2 or c.shape[1] != n for c in maps):
            raise GeometryError("all maps must share the state dimension")
        labels = tuple(self.labels) or tuple(range(1, len(maps) + 1))
        if len(labels) != len(maps) or len(set(labels)) != len(labels):
            raise GeometryError("labels must be distinct, one per map")
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "labels", labels)

    @property
    def l(self):
        return len(self.maps)

    def stacked(self):
        return np.vstack(self.maps)

    def items(self):
        return zip(self.labels, self.maps)


@dataclass(frozen=True)
class CommGraph:
    """Directed communication graph; edge (i, j) lets j hear from i."""

    vertices: tuple
    edges: tuple = ()

    def __post_init__(self):
        vertices = tuple(self.vertices)
        vset = set(vertices)
        if len(vset) != len(vertices):
            raise GeometryError("graph vertices must be distinct")
        edges = []
        for i, j in self.edges:
            if i not in vset or j not in vset:
                raise GeometryError(f"edge ({i!r}, {j!r}) references unknown vertex")
            if i != j:
                edges.append((i, j))
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", tuple(edges))

    def senders_to(self, j):
        return {i for i, jj in self.edges if jj == j}


@dataclass(frozen=True)
class CoordinatorRule:
    """How the coordinator composes per-adversary explanations."""

    kind: str = "union"

    def __post_init__(self):
        if self.kind != "union":
            raise GeometryError(f"unrecognized coordinator rule {self.kind!r}")


@dataclass(frozen=True)
class DecentralizedVerdict:
    """One Verdict per adversary plus their conjunction."""

    k: int
    per_adversary: dict
    status: Status
    failing: tuple = ()

    def __bool__(self):
        return self.status is Status.HOLDS


@dataclass(frozen=True)
class CollusionResult:
    """Fixpoint of the map-sharing protocol at one time index.

    rounds[r] is the set of non-opaque adversaries after round r (index 0 is
    the initial per-adversary evaluation); events lists each adoption as
    (round, sender, receiver).
    """

    statuses: dict
    rounds: tuple
    events: tuple
    verdict: Verdict


def _conjunction(statuses):
    if any(s is Status.FAILS for s in statuses):
        return Status.FAILS
    if any(s is Status.UNKNOWN for s in statuses):
        return Status.UNKNOWN
    return Status.HOLDS


def _adversary_scenario(sc, c):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sc.observed_by(c)


def check_decentralized(sc: Scenario, ens: AdversaryEnsemble, k,
                        **kw) -> DecentralizedVerdict:
    """Strong opacity against every adversary separately."""
    from .opacity import check_strong_k_iso
    k = _check_horizon(k)
    per = {label: check_strong_k_iso(_adversary_scenario(sc, c), k, **kw)
           for label, c in ens.items()}
    status = _conjunction([v.status for v in per.values()])
    failing = tuple(label for label, v in per.items()
                    if v.status is Status.FAILS)
    return DecentralizedVerdict(k, per, status, failing)


def check_decentralized_K(sc: Scenario, ens: AdversaryEnsemble,
                          **kw) -> ScheduleVerdict:
    """The decentralized check at every time in the scenario schedule."""
    per_k = {k: check_decentralized(sc, ens, k, **kw) for k in sc.schedule}
    status = _conjunction([v.status for v in per_k.values()])
    first = next((k for k in sc.schedule
                  if per_k[k].status is Status.FAILS), None)
    return ScheduleVerdict("decentralized", per_k, status, first)


def check_aggregated(sc: Scenario, ens: AdversaryEnsemble, k, **kw) -> Verdict:
    """Strong opacity against the stacked map [C_1; ...; C_l].

    Holding here forces the decentralized check to hold (a shared nonsecret
    match projects to every adversary); the converse direction is false.
    """
    from .opacity import check_strong_k_iso
    k = _check_horizon(k)
    return check_strong_k_iso(_adversary_scenario(sc, ens.stacked()), k, **kw)


def _explainable_rows(sys, c, ns_verts, tol):
    """H-rep of {x : C x in hull(C X_ns(k))}, lifted to state space."""
    h = convex_hull_h(ns_verts @ c.T, tol)
    return h.normals @ c, h.offsets


def _clause_slack(sv, rows, tol):
    """Max over conv(sv) of the smallest violation among the chosen rows.

    Positive optimum = a point of the secret reach set that violates every
    chosen halfspace at once, i.e. escapes every explainable region.
    Variables: barycentric weights (nonneg, sum 1) and the slack t (free).
    """
    nv = sv.shape[0]
    cost = np.concatenate([np.zeros(nv), [-1.0]])
    a_ub = np.column_stack([np.vstack([-(g @ sv.T) for g, _ in rows]),
                            np.ones(len(rows))])
    b_ub = np.array([-b for _, b in rows])
    a_eq = np.concatenate([np.ones(nv), [0.0]])[None, :]
    nonneg = np.concatenate([np.ones(nv, dtype=bool), [False]])
    res = solve_lp(cost, a_ub, b_ub, a_eq, [1.0], nonneg=nonneg,
                   feas_eps=tol.lp_eps)
    if res.status != OPTIMAL:  # pragma: no cover - simplex is bounded here
        raise GeometryError(f"coverage LP ended {res.status}")
    return float(-res.fun), sv.T @ res.x[:nv]


def check_co_opacity(sc: Scenario, ens: AdversaryEnsemble, rule: CoordinatorRule,
                     k, max_clauses=10_000, samples=10_000, seed=0) -> Verdict:
    """Can pooled per-adversary explanations cover the whole secret reach set?

    Exact route: for every way of picking one violated facet per adversary,
    an LP maximizes the joint violation over the secret reach set; any
    positive optimum is an unexplainable state (FAILS), none proves coverage
    (HOLDS).  When the clause product exceeds max_clauses, seeded sampling
    can still find counterexamples but never prove coverage (UNKNOWN).
    """
    if not isinstance(rule, CoordinatorRule):
        rule = CoordinatorRule(rule)
    k = _check_horizon(k)
    tol = sc.tol
    for label, c in ens.items():
        if c.shape[0] > 3:
            raise GeometryError(
                f"adversary {label!r} observes {c.shape[0]} outputs; "
                "explainable regions need p_i <= 3")
    rs = reach_exact(sc.sys, sc.secret, sc.inputs_for("secret"), k, tol)
    rn = reach_exact(sc.sys, sc.nonsecret, sc.inputs_for("nonsecret"), k, tol)
    if rs.fidelity != "exact" or rn.fidelity != "exact":
        return Verdict(Status.UNKNOWN, "co-opacity", k,
                       note="reach sets degraded; coverage undecidable here")
    sv = _as_vpoly(rs, tol)[0].vertices
    ns = _as_vpoly(rn, tol)[0].vertices
    regions = [list(zip(*_explainable_rows(sc.sys, c, ns, tol)))
               for _, c in ens.items()]
    scale = 1.0 + max(float(np.abs(sv).max()), float(np.abs(ns).max()))
    gap_eps = 10.0 * tol.geom_eps * scale

    n_clauses = int(np.prod([len(r) for r in regions]))
    if n_clauses <= max_clauses:
        worst, where = 0.0, None
        for clause in product(*regions):
            slack, x = _clause_slack(sv, clause, tol)
            if slack > worst:
                worst, where = slack, x
        if worst > gap_eps:
            wit = FailureWitness(where, worst)
            return Verdict(Status.FAILS, "co-opacity", k, worst, wit,
                           note="state at time k outside every adversary's "
                                "explainable region")
        return Verdict(Status.HOLDS, "co-opacity", k, 0.0)

    rng = np.random.default_rng(seed)
    pts = np.vstack([sv, rng.dirichlet(0.5 * np.ones(sv.shape[0]),
                                       size=samples) @ sv])
    for x in pts:
        worst = min(max(float(g @ x - b) for g, b in rows)
                    for rows in regions)
        if worst > gap_eps:
            wit = FailureWitness(x, worst)
            return Verdict(Status.FAILS, "co-opacity", k, worst, wit,
                           note="sampled state outside every explainable "
                                "region (clause cap exceeded)")
    return Verdict(Status.UNKNOWN, "co-opacity", k,
                   note=f"{n_clauses} clauses exceed the cap and sampling "
                        "found no counterexample")


def is_directed_dominating(g: CommGraph, d) -> bool:
    """Does every vertex outside d have an in-edge from inside d?"""
    dset = set(d)
    if not dset.issubset(g.vertices):
        raise GeometryError("dominating-set candidates must be graph vertices")
    return all(g.senders_to(u) & dset for u in g.vertices if u not in dset)


def simulate_collusion(sc: Scenario, ens: AdversaryEnsemble, g: CommGraph, k,
                       **kw) -> CollusionResult:
    """Round-synchronous map sharing until the non-opaque set stops growing.

    Every adversary whose current map yields FAILS broadcasts that map; a
    receiver that still believes the system opaque adopts the map from its
    smallest-labelled failing in-neighbor and re-evaluates, which makes it
    fail too.  Adoption is absorbing and each time index restarts from the
    original maps, so the fixpoint arrives within l rounds.
    """
    from .opacity import check_strong_k_iso
    k = _check_horizon(k)
    if set(g.vertices) != set(ens.labels):
        raise GeometryError("graph vertices must be exactly the adversary ids")
    verdicts = {label: check_strong_k_iso(_adversary_scenario(sc, c), k, **kw)
                for label, c in ens.items()}
    statuses = {label: v.status for label, v in verdicts.items()}
    # held[i] names whose original map adversary i currently evaluates with;
    # a failing sender forwards the failing map it holds, not its own
    held = {label: label for label in ens.labels}
    failing = {label for label, s in statuses.items() if s is Status.FAILS}
    rounds = [frozenset(failing)]
    events = []
    for rnd in range(1, ens.l + 1):
        adopted = []
        for receiver in ens.labels:
            if statuses[receiver] is Status.FAILS:
                continue
            senders = sorted(g.senders_to(receiver) & failing)
            if senders:
                adopted.append((receiver, senders[0]))
        if not adopted:
            break
        for receiver, sender in adopted:
            # re-evaluation under the adopted map reproduces that map's
            # verdict: the check depends only on the map, not the holder
            held[receiver] = held[sender]
            statuses[receiver] = verdicts[held[sender]].status
            failing.add(receiver)
            events.append((rnd, sender, receiver))
        rounds.append(frozenset(failing))
    all_failed = len(failing) == ens.l
    if all_failed:
        verdict = Verdict(Status.FAILS, "collusion", k,
                          note="every adversary concludes non-opacity")
    elif any(statuses[lab] is Status.UNKNOWN for lab in ens.labels):
        verdict = Verdict(Status.UNKNOWN, "collusion", k)
    else:
        verdict = Verdict(Status.HOLDS, "collusion", k,
                          note="some adversary still finds the system opaque")
    return CollusionResult(statuses, tuple(rounds), tuple(events), verdict)


def counterexample_aggregated():
    """Per-adversary opacity without aggregated opacity.

    Axis adversaries each project the nonsecret segment onto [0, 1], which
    explains the secret origin; the stacked map sees the full plane, where
    the origin is 1/sqrt(2) away from the segment.
    """
    sys = LtiSystem(np.eye(2), [[0.0], [0.0]], np.eye(2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sc = Scenario(sys, VPolytope.singleton([0.0, 0.0]),
                      VPolytope(np.array([[0.0, 1.0], [1.0, 0.0]])),
                      InputSet.singleton([0.0]), (1,))
    ens = AdversaryEnsemble(([[1.0, 0.0]], [[0.0, 1.0]]))
    return sc, ens
