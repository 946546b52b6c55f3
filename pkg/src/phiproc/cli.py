"""Command-line front end.

    phi run --track TRACK [inputs] [--policy-tol T] [--max-iter N] [--seed S] [--out PATH]
    phi demo-flipflop --map FILE --start X [--seed S] [--steps N] [--out PATH]

The report is line-delimited JSON: a header record, one or more result
records, and a closing status record. It goes to ``--out`` (summary on
stdout) or, without ``--out``, to stdout (summary on stderr).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import depletion, kernel, lattice, oml, spectral
from .errors import EXIT_OK, EXIT_PARSE, ParseError, PhiError, PreconditionError
from .fixpoint import (
    EventSchedule,
    Mode,
    StabilizationPolicy,
    contraction_fixed_point,
)
from .report import REPORT_VERSION, dumps

TRACKS = ("lattice", "kernel", "spectral", "riesz", "oml", "depletion", "contraction")


@dataclass
class RunManifest:
    track: str
    inputs: dict = field(default_factory=dict)
    tol: float | None = None
    max_iter: int | None = None
    seed: int = 0
    out: str | None = None
    options: dict = field(default_factory=dict)

    def policy(self, base: StabilizationPolicy | None = None) -> StabilizationPolicy:
        base = base or StabilizationPolicy()
        return StabilizationPolicy(
            base.mode,
            base.tol_abs if self.tol is None else self.tol,
            base.tol_rel,
            base.max_iter if self.max_iter is None else self.max_iter,
        )


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read input ({exc.strerror})", None, path) from None


def _toml(path: str) -> dict:
    text = _read(path)
    if not text.strip():
        raise ParseError("empty input file", None, path)
    try:
        return depletion._toml.loads(text)
    except depletion._toml.TOMLDecodeError as exc:
        raise ParseError(str(exc), None, path) from None


def _complex_array(value, what, path, ndim):
    try:
        arr = np.array(
            [[spectral._parse_complex(str(z)) for z in row] for row in value] if ndim == 2
            else [spectral._parse_complex(str(z)) for z in value],
            dtype=complex,
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}: {exc}", None, path) from None
    return arr


# -- tracks ------------------------------------------------------------------------------

def _track_lattice(man: RunManifest):
    path = man.inputs.get("map")
    if path is None:
        raise PreconditionError("the lattice track needs --map")
    m = lattice.parse_set_valued_map(_read(path), path)
    start = man.options.get("start") or [0]
    seed_set = lattice.PowersetElement.of(m.n_states, start)
    rep = lattice.least_fixed_point_from(lattice.lift(m), seed_set)
    summary = f"least fixed point above {seed_set}: {rep.fixed_point} (stage {rep.stage})"
    return [{"record": "iteration_report", "operation": "least_fixed_point_from",
             "map": m.as_lists(), "seed_set": seed_set, **_iter(rep)}], summary


def _iter(rep):
    return {"fixed_point": rep.fixed_point, "stage": rep.stage, "residuals": rep.residuals,
            "converged": rep.converged, "info": rep.info}


def _track_kernel(man: RunManifest):
    p = man.options.get("p")
    path = man.inputs.get("kernel")
    k = None
    if path is not None:
        k = kernel.parse_kernel(_read(path), path)
    if p is not None:
        toy = kernel.toy_kernel(p)
        if k is not None and (k.n != 2 or np.abs(k.rows - toy.rows).max() > 1e-12):
            raise PreconditionError(f"{path} is not the toy kernel with p = {p}")
        k = toy
    if k is None:
        raise PreconditionError("the kernel track needs --kernel or --p")
    rep = kernel.stationary_distribution(k, man.policy())
    rec = {"record": "iteration_report", "operation": "stationary_distribution",
           "kernel": k, **_iter(rep)}
    if p is not None:
        rec["closed_form"] = [p / (1 + p), 1 / (1 + p)]
    summary = f"stationary distribution {np.round(rep.fixed_point.probs, 12).tolist()} (stage {rep.stage})"
    return [rec], summary


def _matrices(man):
    paths = man.inputs.get("matrix") or []
    if not paths:
        raise PreconditionError(f"the {man.track} track needs --matrix")
    return [spectral.parse_matrix(_read(p), p) for p in paths]


def _track_spectral(man: RunManifest):
    t = _matrices(man)[0]
    res = spectral.stabilize_normal(t, spectral.SpectralFilter(man.options.get("beta", 0.5)),
                                    man.policy())
    rec = {"record": "spectral_stabilization", "operation": "stabilize_normal",
           "analytic_limit": res.analytic_limit, "iterative_limit": res.iterative_limit,
           "limit_gap": res.limit_gap, "finite_iterations": res.iterations,
           "contraction_bound": res.contraction_bound, "observed_ratio": res.observed_ratio,
           "eigenvalues": res.decomposition.eigenvalues, **_iter(res.report)}
    rec["info"] = {}
    summary = (f"E({{1}}) of rank {res.analytic_limit.rank} reached in {res.iterations} filtered steps; "
               f"decay {res.observed_ratio} vs bound {res.contraction_bound:.6g}")
    return [rec], summary


def _track_riesz(man: RunManifest):
    ts = _matrices(man)
    radius = man.options.get("radius")
    contour = None
    if radius is not None:
        contour = spectral.RieszContour(1.0, radius, man.options.get("nodes") or 64)
    if len(ts) == 1:
        proj = spectral.riesz_projection(ts[0], contour)
        rec = {"record": "riesz_projection", "projection": proj,
               "contour": contour or spectral.default_contour(ts[0])}
        return [rec], f"Riesz projection of rank {proj.rank} (orthogonal: {proj.orthogonal})"
    res = spectral.product_of_riesz(ts, contour, seed=man.seed, strict=False)
    rec = {"record": "riesz_product", **{k: getattr(res, k) for k in
           ("projection", "factors", "rank", "fixed_dim", "max_probe_residual")},
           "range_matches": res.range_matches}
    return [rec], f"product of {len(ts)} Riesz projections: rank {res.rank}, joint fixed dim {res.fixed_dim}"


def _track_oml(man: RunManifest):
    path = man.inputs.get("config")
    if path is None:
        raise PreconditionError("the oml track needs --config")
    doc = _toml(path)
    for key in ("v", "q", "p0"):
        if key not in doc:
            raise ParseError(f"missing required key {key!r}", None, path)
    v = _complex_array(doc["v"], "v", path, 2)
    n = len(v)

    def subspace(key):
        vecs = _complex_array(doc[key], key, path, 2) if doc[key] else np.zeros((0, n))
        if vecs.size and vecs.shape[1] != n:
            raise ParseError(f"{key}: vectors must have length {n}", None, path)
        return oml.SubspaceProjection.span(vecs.T.reshape(n, -1), n)

    sys_ = oml.OmlSystem(v, subspace("q"), subspace("p0"))
    rep = oml.oml_fixed_point(sys_)
    return ([{"record": "iteration_report", "operation": "oml_fixed_point", **_iter(rep)}],
            f"P* of rank {rep.fixed_point.rank} at stage {rep.stage}")


def _track_depletion(man: RunManifest):
    path = man.inputs.get("config")
    if path is None:
        raise PreconditionError("the depletion track needs --config")
    text = _read(path)
    cfg, opts = depletion.parse_config(text, path)
    stim = cfg.stimulus
    if man.options.get("seed_given") and isinstance(stim, (depletion.Bernoulli, depletion.BoundedGap)):
        stim = type(stim)(**{**{f: getattr(stim, f) for f in stim.__dataclass_fields__}, "seed": man.seed})
        cfg = cfg.replace(stimulus=stim)
    steps = man.options.get("steps") or opts["steps"]
    records = []
    if isinstance(cfg.update, depletion.NonlinearUpdate):
        rep = depletion.nonlinear_kappa_bound(cfg, steps or 10_000)
        op = "nonlinear_kappa_bound"
    elif isinstance(stim, depletion.Constant):
        rep = depletion.run_pair(cfg, steps or 10_000, man.policy())
        op = "run_pair"
    elif isinstance(stim, depletion.Periodic):
        rep = depletion.quantified_gap_bound(cfg, steps or 10_000)
        op = "quantified_gap_bound"
    else:
        rep = depletion.density_gap_bound(cfg, steps or 20_000)
        op = "density_gap_bound"
    records.append({"record": "gap_report", "operation": op, "report": rep})
    if isinstance(stim, depletion.Bernoulli):
        demo = depletion.stochastic_demo(cfg, steps or 20_000)
        records.append({"record": "stochastic_demo", "operation": "stochastic_demo", "report": demo})
    summary = (f"intact {np.round(rep.intact_fixed, 9).tolist()}  circ {np.round(rep.circ_fixed, 9).tolist()}  "
               f"gap {np.round(rep.gap_vector, 9).tolist()}  utility gap {rep.utility_gap:.9g}")
    if rep.bound_value is not None:
        summary += f"  bound {rep.bound_value:.9g} ({'ok' if rep.bound_satisfied else 'VIOLATED'})"
    return records, summary


def _track_contraction(man: RunManifest):
    path = man.inputs.get("config")
    if path is None:
        raise PreconditionError("the contraction track needs --config")
    doc = _toml(path)
    try:
        a = np.array(doc["matrix"], dtype=float)
        c = np.array(doc.get("offset", [0.0] * len(a)), dtype=float)
        start = np.array(doc.get("start", [0.0] * len(a)), dtype=float)
        second = doc.get("second_start")
        second = None if second is None else np.array(second, dtype=float)
    except KeyError as exc:
        raise ParseError(f"missing required key {exc}", None, path) from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed value ({exc})", None, path) from None
    if a.ndim != 2 or a.shape[0] != a.shape[1] or c.shape != (len(a),) or start.shape != (len(a),):
        raise ParseError("matrix must be square and offset/start must match its size", None, path)
    schedule = None
    if "event_indices" in doc:
        schedule = EventSchedule(tuple(doc["event_indices"]), tuple(doc.get("factors", ())))
    base = StabilizationPolicy(Mode.NUMERIC, 1e-12, 0.0, 100_000)
    rep = contraction_fixed_point(lambda z: a @ z + c, schedule, start, policy=man.policy(base),
                                  second_start=second)
    return ([{"record": "iteration_report", "operation": "contraction_fixed_point", **_iter(rep)}],
            f"unique fixed point {np.round(rep.fixed_point, 10).tolist()} (stage {rep.stage})")


DISPATCH = {
    "lattice": _track_lattice,
    "kernel": _track_kernel,
    "spectral": _track_spectral,
    "riesz": _track_riesz,
    "oml": _track_oml,
    "depletion": _track_depletion,
    "contraction": _track_contraction,
}


# -- flip-flop demo ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlipFlopTrace:
    path: tuple[int, ...]
    lifted: tuple[lattice.PowersetElement, ...]
    dead_end: int | None


def demo_flipflop(m: lattice.SetValuedMap, start: int, seed: int = 0, steps: int = 10) -> FlipFlopTrace:
    """One sampled path ``x_{k+1} ~ Uniform(m(x_k))`` beside the lifted orbit
    of ``{start}``; every sampled state must lie in the lifted set of its step.

    A state without successors ends the path (``dead_end`` is its step); the
    lifted orbit still runs for all ``steps``.
    """
    if not 0 <= start < m.n_states:
        raise PreconditionError(f"start state {start} outside 0..{m.n_states - 1}")
    rng = np.random.default_rng(seed)
    lifted = lattice.lifted_orbit(m, lattice.PowersetElement.of(m.n_states, [start]), steps)
    path = [start]
    dead_end = None
    for k in range(steps):
        succ = lattice.states_of(m.successors[path[-1]])
        if not succ:
            dead_end = k
            break
        path.append(int(succ[rng.integers(len(succ))]))
    for k, x in enumerate(path):
        assert x in lifted[k], f"sampled state {x} escaped lifted set {lifted[k]} at step {k}"
    return FlipFlopTrace(tuple(path), tuple(lifted), dead_end)


def format_flipflop(trace: FlipFlopTrace) -> str:
    lines = [f"{'step':>4}  {'path':>5}  lifted set"]
    for k, s in enumerate(trace.lifted):
        x = str(trace.path[k]) if k < len(trace.path) else ("dead" if k == len(trace.path) else "")
        lines.append(f"{k:>4}  {x:>5}  {s}")
    if trace.dead_end is not None:
        lines.append(f"DeadEnd: state {trace.path[-1]} has no successors (step {trace.dead_end})")
    return "\n".join(lines)


# -- driver ---------------------------------------------------------------------------------

def _emit(records, out, summary):
    text = "".join(dumps(r) + "\n" for r in records)
    if out:
        Path(out).write_text(text)
        print(summary)
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)


def _header(man: RunManifest):
    return {"record": "header", "version": REPORT_VERSION, "track": man.track, "seed": man.seed,
            "inputs": man.inputs, "policy_tol": man.tol, "max_iter": man.max_iter,
            "options": {k: v for k, v in man.options.items() if k != "seed_given"}}


def _error_record(exc: Exception):
    if isinstance(exc, ParseError):
        return {"record": "error", "error": "ParseError", "message": str(exc),
                "line": exc.line, "exit_code": exc.exit_code}
    return {"record": "error", "error": "TrackError", "name": type(exc).__name__,
            "message": str(exc), "exit_code": exc.exit_code}


def run(man: RunManifest) -> int:
    try:
        records, summary = DISPATCH[man.track](man)
    except PhiError as exc:
        rec = _error_record(exc)
        _emit([_header(man), rec], man.out, f"{rec.get('name', rec['error'])}: {exc}")
        return exc.exit_code
    _emit([_header(man), *records, {"record": "status", "exit_code": EXIT_OK}], man.out, summary)
    return EXIT_OK


def _parser():
    ap = argparse.ArgumentParser(prog="phi", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one track and write a report")
    r.add_argument("--track", choices=TRACKS, required=True)
    r.add_argument("--config")
    r.add_argument("--kernel")
    r.add_argument("--matrix", action="append")
    r.add_argument("--map")
    r.add_argument("--start", type=int, nargs="+")
    r.add_argument("--p", type=float)
    r.add_argument("--beta", type=float)
    r.add_argument("--radius", type=float)
    r.add_argument("--nodes", type=int)
    r.add_argument("--steps", type=int)
    r.add_argument("--policy-tol", type=float)
    r.add_argument("--max-iter", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    d = sub.add_parser("demo-flipflop", help="sampled path beside the lifted set orbit")
    d.add_argument("--map", required=True)
    d.add_argument("--start", type=int, default=0)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--steps", type=int, default=10)
    d.add_argument("--out")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("seed must be a 64-bit unsigned integer", file=sys.stderr)
        return EXIT_PARSE
    if args.command == "demo-flipflop":
        try:
            m = lattice.parse_set_valued_map(_read(args.map), args.map)
            trace = demo_flipflop(m, args.start, args.seed, args.steps)
        except PhiError as exc:
            print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
            return exc.exit_code
        records = [{"record": "header", "version": REPORT_VERSION, "track": "flipflop",
                    "seed": args.seed, "inputs": {"map": args.map}},
                   {"record": "flipflop_trace", "trace": trace}]
        if trace.dead_end is not None:
            records.append({"record": "warning", "warning": "DeadEnd", "step": trace.dead_end,
                            "state": trace.path[-1]})
        records += [
                   {"record": "status", "exit_code": EXIT_OK}]
        _emit(records, args.out, format_flipflop(trace))
        return EXIT_OK
    inputs = {k: getattr(args, k) for k in ("config", "kernel", "matrix", "map") if getattr(args, k)}
    options = {k: getattr(args, k) for k in ("start", "p", "beta", "radius", "nodes", "steps")
               if getattr(args, k) is not None}
    options["seed_given"] = args.seed is not None
    man = RunManifest(args.track, inputs, args.policy_tol, args.max_iter,
                      0 if args.seed is None else args.seed, args.out, options)
    return run(man)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
