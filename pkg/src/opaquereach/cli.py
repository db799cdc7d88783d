"""Command line front end: check / radius / prune / plot over scenario files.

A scenario file is one JSON document: the plant matrices (row-major, with
explicit dims), the secret / nonsecret / input sets, the schedule of time
indices, and optional adversary, nonlinear, tolerance and epsilon sections.
Every validation error names the offending field path, and malformed JSON
is reported with its line and column, so a scenario author never has to
bisect the file by hand.

Exit codes are part of the contract: 0 when the property HOLDS at every
scheduled time, 1 when it FAILS somewhere, 2 when the engine cannot decide,
3 for any input problem.  Per-time checks are dispatched to a small worker
pool (capped by OPAQUE_REACH_THREADS); the report is assembled in schedule
order regardless of completion order.
"""

from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import click
import numpy as np

from .approx import cost_model, verify_sound
from .decentralized import (AdversaryEnsemble, CommGraph, check_co_opacity,
                            check_decentralized, simulate_collusion)
from .epsilon import check_eps_k_iso, opacity_radius
from .expr import ExprError
from .geometry import (DEFAULT_TOL, GeometryError, Tolerances, VPolytope,
                       Zonotope, gjk_closest, hpoly_to_vpolytope)
from .nonlinear import NlSystem, nl_falsify, nl_reach_samples
from .opacity import (UnsalvageableSecretError, _as_vpoly, check_strong_k_iso,
                      check_weak_k_iso, output_reach, prune_secret)
from .report import (Entry, Report, aggregate_status, render_svg, to_json,
                     to_text, vertices_csv, witness_dict)
from .system import InputSet, LtiSystem, Scenario

MODES = ("strong", "weak", "eps", "sound", "decentralized", "co",
         "collusion", "nonlinear")

_INPUT_ERROR = 3


class ScenarioFormatError(ValueError):
    """Problem in a scenario file; the message carries the field path."""


# ---------------------------------------------------------------- loading

def _require(doc, key, path, kind=dict):
    if key not in doc:
        raise ScenarioFormatError(f"{path}.{key}: required section is missing")
    val = doc[key]
    if kind is not None and not isinstance(val, kind):
        raise ScenarioFormatError(
            f"{path}.{key}: expected {kind.__name__}, got {type(val).__name__}")
    return val


def _vector(obj, path):
    if not isinstance(obj, list) or not obj or \
            not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
        raise ScenarioFormatError(f"{path}: expected a list of numbers")
    return np.asarray(obj, dtype=float)


def _matrix(obj, path):
    """Row-major {rows, cols, data}; a nested list is also accepted."""
    if isinstance(obj, dict):
        for key in ("rows", "cols", "data"):
            if key not in obj:
                raise ScenarioFormatError(f"{path}.{key}: required field is missing")
        r, c = obj["rows"], obj["cols"]
        if not all(isinstance(v, int) and v > 0 for v in (r, c)):
            raise ScenarioFormatError(f"{path}: rows and cols must be positive integers")
        data = _vector(obj["data"], f"{path}.data")
        if data.size != r * c:
            raise ScenarioFormatError(
                f"{path}.data: expected {r * c} numbers, got {data.size}")
        return data.reshape(r, c)
    if isinstance(obj, list):
        try:
            m = np.asarray(obj, dtype=float)
        except (TypeError, ValueError):
            raise ScenarioFormatError(f"{path}: rows have inconsistent lengths") from None
        if m.ndim != 2:
            raise ScenarioFormatError(f"{path}: expected a 2-d array")
        return m
    raise ScenarioFormatError(f"{path}: expected a matrix object or nested list")


def _point_set(obj, path, dim, allow_zonotope=False):
    if not isinstance(obj, dict):
        raise ScenarioFormatError(f"{path}: expected an object describing a set")
    keys = set(obj)
    if keys == {"vertices"}:
        v = _matrix(obj["vertices"], f"{path}.vertices")
        got = VPolytope(v)
    elif keys == {"box"}:
        box = obj["box"]
        lo = _vector(_require(box, "lo", f"{path}.box", list), f"{path}.box.lo")
        hi = _vector(_require(box, "hi", f"{path}.box", list), f"{path}.box.hi")
        if lo.shape != hi.shape:
            raise ScenarioFormatError(f"{path}.box: lo and hi lengths differ")
        got = VPolytope.from_box(lo, hi)
    elif keys == {"zonotope"} and allow_zonotope:
        z = obj["zonotope"]
        center = _vector(_require(z, "center", f"{path}.zonotope", list),
                         f"{path}.zonotope.center")
        gens = _matrix(_require(z, "generators", f"{path}.zonotope", None),
                       f"{path}.zonotope.generators")
        got = Zonotope(center, gens)
    else:
        forms = "vertices, box" + (", zonotope" if allow_zonotope else "")
        raise ScenarioFormatError(f"{path}: expected exactly one of {forms}")
    if got.dim != dim:
        raise ScenarioFormatError(
            f"{path}: set lives in dimension {got.dim}, expected {dim}")
    return got


@dataclass
class LoadedScenario:
    label: str
    sc: Scenario
    ensemble: AdversaryEnsemble | None = None
    graph: CommGraph | None = None
    coordinator: str = "union"
    nl: NlSystem | None = None
    nl_grid: object = 3
    epsilon: float | None = None


_SECTIONS = {"name", "system", "sets", "schedule", "adversaries", "nonlinear",
             "tolerances", "epsilon"}


def parse_scenario(doc, label="scenario") -> LoadedScenario:
    if not isinstance(doc, dict):
        raise ScenarioFormatError("top level: expected a JSON object")
    for key in doc:
        if key not in _SECTIONS:
            raise ScenarioFormatError(f"{key}: unknown section")

    system = _require(doc, "system", "$")
    a = _matrix(_require(system, "A", "system", None), "system.A")
    if a.shape[0] != a.shape[1]:
        raise ScenarioFormatError(f"system.A: must be square, got {a.shape}")
    n = a.shape[0]
    b = _matrix(_require(system, "B", "system", None), "system.B")
    if b.shape[0] != n:
        raise ScenarioFormatError(
            f"system.B: has {b.shape[0]} rows, A has dimension {n}")
    m = b.shape[1]

    ensemble = None
    graph = None
    coordinator = "union"
    adv = doc.get("adversaries")
    if adv is not None:
        if not isinstance(adv, dict):
            raise ScenarioFormatError("adversaries: expected an object")
        for key in adv:
            if key not in {"C_list", "labels", "graph", "coordinator"}:
                raise ScenarioFormatError(f"adversaries.{key}: unknown field")
        clist = _require(adv, "C_list", "adversaries", list)
        maps = []
        for i, entry in enumerate(clist):
            c_i = _matrix(entry, f"adversaries.C_list[{i}]")
            if c_i.shape[1] != n:
                raise ScenarioFormatError(
                    f"adversaries.C_list[{i}]: has {c_i.shape[1]} columns, "
                    f"state dimension is {n}")
            maps.append(c_i)
        labels = tuple(adv.get("labels", range(1, len(maps) + 1)))
        try:
            ensemble = AdversaryEnsemble(maps, labels)
        except GeometryError as e:
            raise ScenarioFormatError(f"adversaries: {e}") from None
        if "graph" in adv:
            edges = adv["graph"]
            if not isinstance(edges, list) or \
                    not all(isinstance(e, list) and len(e) == 2 for e in edges):
                raise ScenarioFormatError(
                    "adversaries.graph: expected a list of [sender, receiver] pairs")
            try:
                graph = CommGraph(ensemble.labels, tuple(map(tuple, edges)))
            except GeometryError as e:
                raise ScenarioFormatError(f"adversaries.graph: {e}") from None
        coordinator = adv.get("coordinator", "union")
        if coordinator != "union":
            raise ScenarioFormatError(
                f"adversaries.coordinator: unsupported rule {coordinator!r}")

    if "C" in system:
        c = _matrix(system["C"], "system.C")
        if c.shape[1] != n:
            raise ScenarioFormatError(
                f"system.C: has {c.shape[1]} columns, state dimension is {n}")
    elif ensemble is not None:
        c = ensemble.stacked()
    else:
        raise ScenarioFormatError(
            "system.C: required field is missing (no adversaries.C_list either)")
    for key in system:
        if key not in {"A", "B", "C"}:
            raise ScenarioFormatError(f"system.{key}: unknown field")

    sets = _require(doc, "sets", "$")
    for key in sets:
        if key not in {"secret", "nonsecret", "inputs", "inputs_nonsecret"}:
            raise ScenarioFormatError(f"sets.{key}: unknown field")
    secret = _point_set(_require(sets, "secret", "sets"), "sets.secret", n)
    nonsecret = _point_set(_require(sets, "nonsecret", "sets"), "sets.nonsecret", n)
    inputs = InputSet(_point_set(_require(sets, "inputs", "sets"), "sets.inputs",
                                 m, allow_zonotope=True))
    inputs_ns = None
    if "inputs_nonsecret" in sets:
        inputs_ns = InputSet(_point_set(sets["inputs_nonsecret"],
                                        "sets.inputs_nonsecret", m,
                                        allow_zonotope=True))

    schedule = _require(doc, "schedule", "$", list)
    if not schedule or not all(isinstance(k, int) and not isinstance(k, bool)
                               and k >= 1 for k in schedule):
        raise ScenarioFormatError("schedule: expected a nonempty list of integers >= 1")

    tol = DEFAULT_TOL
    if "tolerances" in doc:
        tdoc = _require(doc, "tolerances", "$")
        for key in tdoc:
            if key not in {"geom_eps", "lp_eps", "gjk_eps"}:
                raise ScenarioFormatError(f"tolerances.{key}: unknown field")
            if not isinstance(tdoc[key], (int, float)) or tdoc[key] <= 0:
                raise ScenarioFormatError(f"tolerances.{key}: must be a positive number")
        tol = Tolerances(**{k: float(v) for k, v in tdoc.items()})

    epsilon = doc.get("epsilon")
    if epsilon is not None:
        if not isinstance(epsilon, (int, float)) or isinstance(epsilon, bool) \
                or epsilon < 0:
            raise ScenarioFormatError("epsilon: must be a number >= 0")
        epsilon = float(epsilon)

    try:
        sc = Scenario(sys=_lti(a, b, c), secret=secret, nonsecret=nonsecret,
                      inputs=inputs, schedule=tuple(schedule), tol=tol,
                      inputs_nonsecret=inputs_ns)
    except GeometryError as e:
        raise ScenarioFormatError(f"sets: {e}") from None

    nl = None
    nl_grid = 3
    if "nonlinear" in doc:
        ndoc = _require(doc, "nonlinear", "$")
        for key in ndoc:
            if key not in {"f", "h", "grid"}:
                raise ScenarioFormatError(f"nonlinear.{key}: unknown field")
        f = _require(ndoc, "f", "nonlinear", list)
        h = _require(ndoc, "h", "nonlinear", list)
        if len(f) != n:
            raise ScenarioFormatError(
                f"nonlinear.f: expected {n} component expressions, got {len(f)}")
        try:
            nl = NlSystem.from_expressions(n, m, len(h), f, h)
        except (ExprError, GeometryError) as e:
            raise ScenarioFormatError(f"nonlinear: {e}") from None
        nl_grid = ndoc.get("grid", 3)
        if isinstance(nl_grid, list):
            nl_grid = tuple(nl_grid)

    return LoadedScenario(doc.get("name", label), sc, ensemble, graph,
                          coordinator, nl, nl_grid, epsilon)


def _lti(a, b, c):
    try:
        return LtiSystem(a, b, c)
    except GeometryError as e:
        raise ScenarioFormatError(f"system: {e}") from None


def load_scenario_file(path) -> LoadedScenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ScenarioFormatError(f"{path}: {e.strerror or e}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioFormatError(
            f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    name = os.path.splitext(os.path.basename(path))[0]
    return parse_scenario(doc, name)


# ------------------------------------------------------------- dispatch

def _workers(n_tasks):
    cap = os.environ.get("OPAQUE_REACH_THREADS")
    if cap is not None:
        try:
            cap = int(cap)
        except ValueError:
            raise ScenarioFormatError(
                f"OPAQUE_REACH_THREADS: not an integer: {cap!r}") from None
        if cap < 1:
            raise ScenarioFormatError("OPAQUE_REACH_THREADS: must be >= 1")
        return max(1, min(n_tasks, cap))
    return max(1, min(n_tasks, os.cpu_count() or 1))


def _run_schedule(fn, ks):
    """Per-time checks in a pool; results come back in schedule order."""
    with ThreadPoolExecutor(max_workers=_workers(len(ks))) as pool:
        return list(pool.map(fn, ks))


def _entry_from_verdict(v):
    return Entry(v.k, v.status.value,
                 distance=None if v.distance is None else float(v.distance),
                 witness=witness_dict(v.witness), note=v.note)


def _check_entry(ls: LoadedScenario, mode, k, eps, order, delta, seed):
    sc = ls.sc
    if mode == "strong":
        return _entry_from_verdict(check_strong_k_iso(sc, k))
    if mode == "weak":
        return _entry_from_verdict(check_weak_k_iso(sc, k))
    if mode == "sound":
        return _entry_from_verdict(verify_sound(sc, k, order))
    if mode == "eps":
        ev = check_eps_k_iso(sc, k, eps)
        return Entry(k, ev.status.value, radius=float(ev.radius),
                     note=f"threshold {eps:g}")
    if mode == "decentralized":
        dv = check_decentralized(sc, ls.ensemble, k)
        note = ("failing adversaries " + ", ".join(map(str, dv.failing))
                if dv.failing else "")
        return Entry(k, dv.status.value, note=note)
    if mode == "co":
        v = check_co_opacity(sc, ls.ensemble, ls.coordinator, k, seed=seed)
        return _entry_from_verdict(v)
    if mode == "collusion":
        cr = simulate_collusion(sc, ls.ensemble, ls.graph, k)
        v = cr.verdict
        note = f"{len(cr.rounds) - 1} sharing rounds; {v.note}"
        return Entry(k, v.status.value, note=note)
    v = nl_falsify(ls.nl, sc.secret, sc.nonsecret, sc.inputs, k, delta,
                   grid=ls.nl_grid, tol=sc.tol)
    return _entry_from_verdict(v)


def _mode_requirements(ls, mode, eps, delta):
    if mode == "eps" and eps is None:
        raise ScenarioFormatError(
            "eps mode needs a threshold: pass --eps or an epsilon section")
    if mode in ("decentralized", "co", "collusion") and ls.ensemble is None:
        raise ScenarioFormatError(f"{mode} mode needs an adversaries.C_list section")
    if mode == "collusion" and ls.graph is None:
        raise ScenarioFormatError("collusion mode needs an adversaries.graph section")
    if mode == "nonlinear":
        if ls.nl is None:
            raise ScenarioFormatError("nonlinear mode needs a nonlinear section")
        if delta is None:
            raise ScenarioFormatError("nonlinear mode needs --delta")


def _predicted_cost(ls, mode, ks):
    if mode == "nonlinear":
        return None
    sc = ls.sc
    return float(sum(cost_model(sc.sys.n, sc.sys.p, k) for k in ks))


def _named_output_sets(ls, mode, ks, delta):
    sets = []
    for k in ks:
        if mode == "nonlinear":
            for role in ("secret", "nonsecret"):
                cloud = nl_reach_samples(ls.nl, getattr(ls.sc, role), ls.sc.inputs,
                                         k, grid=ls.nl_grid, tol=ls.sc.tol)
                sets.append((role, k, cloud.points))
        else:
            for role in ("secret", "nonsecret"):
                poly, _ = _as_vpoly(output_reach(ls.sc, k, role), ls.sc.tol)
                sets.append((role, k, poly.vertices))
    return sets


def _emit(report, out, csv_path, csv_sets, json_stdout):
    doc = to_json(report)
    if json_stdout:
        click.echo(json.dumps(doc, indent=2))
    else:
        click.echo(to_text(report), nl=False)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    if csv_path:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(vertices_csv(csv_sets))


def _fail_input(e):
    click.echo(f"error: {e}", err=True)
    sys.exit(_INPUT_ERROR)


# ------------------------------------------------------------- commands

@click.group()
def main():
    """Set-based k-initial-state opacity verification for LTI plants."""


_scenario_arg = click.argument("scenario", type=str)


@main.command()
@_scenario_arg
@click.option("--mode", type=click.Choice(MODES), default="strong",
              show_default=True, help="Which opacity notion to decide.")
@click.option("--k", "horizons", type=int, multiple=True,
              help="Override the schedule (repeatable).")
@click.option("--eps", type=float, default=None,
              help="Radius threshold for eps mode.")
@click.option("--order", type=float, default=None,
              help="Zonotope order budget for sound mode (default: no reduction).")
@click.option("--delta", type=float, default=None,
              help="Separation threshold for nonlinear mode.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for the co-opacity sampling fallback.")
@click.option("--out", type=str, default=None, help="Write the JSON report here.")
@click.option("--csv", "csv_path", type=str, default=None,
              help="Write the output-set vertices as CSV here.")
@click.option("--json", "json_stdout", is_flag=True,
              help="Print the JSON report instead of the text table.")
def check(scenario, mode, horizons, eps, order, delta, seed, out, csv_path,
          json_stdout):
    """Decide opacity for every scheduled time index."""
    try:
        ls = load_scenario_file(scenario)
        ks = list(horizons) if horizons else list(ls.sc.schedule)
        if eps is None:
            eps = ls.epsilon
        _mode_requirements(ls, mode, eps, delta)
        t0 = time.perf_counter()
        entries = _run_schedule(
            lambda k: _check_entry(ls, mode, k, eps, order, delta, seed), ks)
        elapsed = time.perf_counter() - t0
        csv_sets = _named_output_sets(ls, mode, ks, delta) if csv_path else ()
    except (ScenarioFormatError, ExprError, GeometryError) as e:
        _fail_input(e)
    report = Report("check", mode, ls.label, tuple(entries),
                    aggregate_status([e.status for e in entries]),
                    _predicted_cost(ls, mode, ks), {"elapsed": round(elapsed, 6)})
    _emit(report, out, csv_path, csv_sets, json_stdout)
    sys.exit(report.exit_code)


@main.command()
@_scenario_arg
@click.option("--k", "horizons", type=int, multiple=True,
              help="Override the schedule (repeatable).")
@click.option("--eps", type=float, default=None,
              help="Threshold to grade each radius against.")
@click.option("--out", type=str, default=None, help="Write the JSON report here.")
@click.option("--json", "json_stdout", is_flag=True,
              help="Print the JSON report instead of the text table.")
def radius(scenario, horizons, eps, out, json_stdout):
    """Opacity radius per time index: the smallest eps making eps mode hold."""
    try:
        ls = load_scenario_file(scenario)
        ks = list(horizons) if horizons else list(ls.sc.schedule)
        if eps is None:
            eps = ls.epsilon
        t0 = time.perf_counter()

        def one(k):
            r, _ = opacity_radius(ls.sc, k)
            if eps is None:
                return Entry(k, "UNKNOWN", radius=float(r),
                             note="no threshold given; radius is the minimal eps")
            ok = r <= eps + ls.sc.tol.geom_eps
            return Entry(k, "HOLDS" if ok else "FAILS", radius=float(r),
                         note=f"threshold {eps:g}")

        entries = _run_schedule(one, ks)
        elapsed = time.perf_counter() - t0
    except (ScenarioFormatError, GeometryError) as e:
        _fail_input(e)
    report = Report("radius", "eps", ls.label, tuple(entries),
                    aggregate_status([e.status for e in entries]),
                    _predicted_cost(ls, "eps", ks), {"elapsed": round(elapsed, 6)})
    _emit(report, out, None, (), json_stdout)
    sys.exit(report.exit_code)


@main.command()
@_scenario_arg
@click.option("--k", type=int, default=None,
              help="Time index to prune at (default: first scheduled).")
@click.option("--out", type=str, default=None,
              help="Write the pruned-set JSON here (default: stdout).")
def prune(scenario, k, out):
    """Shrink the secret set until the check at k holds, and emit it."""
    try:
        ls = load_scenario_file(scenario)
        if k is None:
            k = ls.sc.schedule[0]
        pruned = prune_secret(ls.sc, k)
    except UnsalvageableSecretError as e:
        click.echo(f"unsalvageable: {e}", err=True)
        sys.exit(1)
    except (ScenarioFormatError, GeometryError) as e:
        _fail_input(e)
    doc = {"k": k,
           "normals": [[round(float(x), 9) for x in row] for row in pruned.normals],
           "offsets": [round(float(x), 9) for x in pruned.offsets]}
    note = ""
    if ls.sc.sys.n <= 3:
        try:
            vp = hpoly_to_vpolytope(pruned, ls.sc.tol)
        except GeometryError as e:
            click.echo(f"unsalvageable: pruned set has no interior ({e})", err=True)
            sys.exit(1)
        doc["vertices"] = [[round(float(x), 9) for x in row] for row in vp.vertices]
        check_sc = Scenario(ls.sc.sys, vp, ls.sc.nonsecret, ls.sc.inputs, (k,),
                            ls.sc.tol, ls.sc.inputs_nonsecret)
        v = check_strong_k_iso(check_sc, k)
        note = f"revalidation at k={k}: {v.status.value}"
    payload = json.dumps(doc, indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(payload)
        click.echo(f"pruned secret set written to {out}"
                   + (f" ({note})" if note else ""))
    else:
        click.echo(payload, nl=False)
        if note:
            click.echo(note, err=True)
    sys.exit(0)


@main.command()
@_scenario_arg
@click.option("--k", type=int, default=None,
              help="Time index to draw (default: first scheduled).")
@click.option("--mode", type=click.Choice(("strong", "eps")), default="strong",
              show_default=True,
              help="eps additionally draws the radius arrow.")
@click.option("--proj", type=int, nargs=2, default=None,
              help="Output coordinates to project onto (default: 0 1).")
@click.option("--out", type=str, default=None,
              help="Write the SVG here (default: stdout).")
def plot(scenario, k, mode, proj, out):
    """Draw the secret and nonsecret output sets at one time index."""
    try:
        ls = load_scenario_file(scenario)
        sc = ls.sc
        if k is None:
            k = sc.schedule[0]
        p = sc.sys.p
        vs, _ = _as_vpoly(output_reach(sc, k, "secret"), sc.tol)
        vn, _ = _as_vpoly(output_reach(sc, k, "nonsecret"), sc.tol)
        arrow = None
        if mode == "eps":
            r, argmax = opacity_radius(sc, k)
            _, _, nearest, _, _ = gjk_closest(VPolytope.singleton(argmax), vn, sc.tol)
            arrow = (argmax, nearest)
        if p == 1:
            cols = (0,)
            if proj:
                raise ScenarioFormatError(
                    "--proj: output dimension is 1; nothing to project")
        else:
            cols = tuple(proj) if proj else (0, 1)
            if len(set(cols)) != 2 or not all(0 <= c < p for c in cols):
                raise ScenarioFormatError(
                    f"--proj: coordinates must be distinct and in [0, {p - 1}]")
        named = [("secret", vs.vertices[:, cols]), ("nonsecret", vn.vertices[:, cols])]
        if arrow is not None:
            arrow = tuple(np.asarray(a)[list(cols)] for a in arrow)
        svg = render_svg(named, title=f"{ls.label} k={k}", arrow=arrow)
    except (ScenarioFormatError, GeometryError) as e:
        _fail_input(e)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(svg)
    else:
        click.echo(svg, nl=False)
    sys.exit(0)


if __name__ == "__main__":
    main()
