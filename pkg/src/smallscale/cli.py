"""Command-line front end: ``smallscale <subcommand> [flags]``.

Every run writes one JSON report (stdout unless ``--out``) carrying the tool
version, the seed and the full parameter echo. Exit codes: 0 success,
1 usage error, 2 validation failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import secrets
import sys
from fractions import Fraction
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .errors import InvalidArgument, PipelineFailure, RetryableFailure, SizeLimitError, ValidationFailure

IO_KEYS = {"out", "plot", "csv", "format", "entropy", "command"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    return obj


def _table_csv(rows):
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _jsonable(v) for k, v in r.items()})
    return buf.getvalue()


def _child_seeds(seed, k):
    """k independent integer seeds derived from one run seed."""
    return [int(c.generate_state(1, np.uint64)[0]) for c in np.random.SeedSequence(seed).spawn(k)]


# ---------------------------------------------------------------- subcommands


def cmd_spencer(a, seed):
    from .discrepancy import ConstraintSystem, random_coloring_baseline, read_matrix_market, spencer_coloring
    # separate streams for the matrix, the walk and the baseline colorings
    ss = _child_seeds(seed, 3)
    if a.matrix:
        A = read_matrix_market(a.matrix)
    else:
        rng = np.random.default_rng(ss[0])
        A = ConstraintSystem.from_matrix(rng.choice([-1.0, 1.0], size=(a.m or a.n, a.n)))
    res = spencer_coloring(A, ss[1])
    out = res.to_dict()
    if a.baseline_trials:
        out["baseline_median"] = random_coloring_baseline(A, a.baseline_trials, ss[2]).median_inf_norm
    out["signs"] = res.coloring.signs
    return out, [{"index": i + 1, "sign": int(s)} for i, s in enumerate(res.coloring.signs)], None


def cmd_beckfiala(a, seed):
    from .discrepancy import Hypergraph, beck_fiala, read_hypergraph
    if a.hypergraph:
        H = read_hypergraph(Path(a.hypergraph).read_text(), a.n)
    else:
        rng = np.random.default_rng(seed)
        n, d = a.n or 50, a.d
        memb = [rng.choice(a.edges, size=min(d, a.edges), replace=False) for _ in range(n)]
        edges = [[v for v in range(n) if j in memb[v]] for j in range(a.edges)]
        H = Hypergraph(n, tuple(edges))
    col = beck_fiala(H)
    disc = H.discrepancy(col)
    if disc > max(2 * H.max_degree - 1, 0):
        raise ValidationFailure("Beck-Fiala bound violated", {"discrepancy": disc})
    out = {"n": H.n, "edges": len(H.edges), "max_degree": H.max_degree, "discrepancy": disc,
           "bound": 2 * H.max_degree - 1, "signs": col.signs}
    return out, [{"index": i + 1, "sign": int(s)} for i, s in enumerate(col.signs)], None


def cmd_apdisc(a, seed):
    from .discrepancy import ap_discrepancy, ap_discrepancy_full
    if a.coloring:
        signs = np.array([1 if c == "+" else -1 for c in a.coloring if c in "+-"], dtype=np.int64)
        if signs.size != len(a.coloring.strip()):
            raise InvalidArgument("coloring must be a string of + and -")
    else:
        if a.n is None:
            raise InvalidArgument("give --coloring or --n")
        signs = np.random.default_rng(seed).choice([-1, 1], size=a.n)
    out = {"n": int(signs.size), "ap_discrepancy": ap_discrepancy(signs),
           "ap_discrepancy_full": ap_discrepancy_full(signs),
           "coloring": "".join("+" if s > 0 else "-" for s in signs)}
    return out, None, None


def cmd_rs(a, seed):
    from .littlewood import flatness_report, rudin_shapiro
    pair = rudin_shapiro(a.t)
    err = pair.check_identity(a.grid)
    fp, fq = flatness_report(pair.p), flatness_report(pair.q)
    out = {"t": a.t, "length": int(pair.p.size), "identity_max_rel_error": err,
           "p_flatness": fp, "q_flatness": fq}
    rows = [{"k": k, "p": int(p), "q": int(q)} for k, (p, q) in enumerate(zip(pair.p, pair.q))]
    return out, rows, None


def cmd_flatpoly(a, seed):
    from .littlewood import abs_curve, assemble_flat_littlewood, flatness_report
    from .plots import line_svg
    P = assemble_flat_littlewood(a.n, a.gamma, a.delta, seed)
    rep = flatness_report(P)
    bad = P.check()
    if bad:
        raise ValidationFailure("; ".join(bad))
    root = math.sqrt(4 * a.n)
    out = {"min_abs": rep["min_abs"], "max_abs": rep["max_abs"], "ratio": rep["ratio"],
           "min_abs_scaled": rep["min_abs"] / root, "max_abs_scaled": rep["max_abs"] / root,
           "grid_points": rep["grid_points"], "attempts": P.meta["attempts"],
           "bad_intervals": P.meta["bad_intervals"], "delta_eff": P.meta["delta_eff"],
           "coeffs": P.coeffs}
    rows = [{"j": j, "coefficient": int(c)} for j, c in enumerate(P.coeffs)]

    def plot():
        x, y = abs_curve(P, 4096)
        return line_svg(x, y / root, "|P(e^{i theta})| / sqrt(4n)", "theta", "scaled modulus",
                        hlines=[(0.02, "red")])
    return out, rows, plot


def cmd_nibble(a, seed):
    from .nibble import (graph_stats, greedy_independent_set, near_regular_graph, nibble_independent_set,
                         read_edge_list, shearer_target)
    ss = np.random.SeedSequence(seed).spawn(3)
    if a.graph:
        G = read_edge_list(Path(a.graph).read_text(), a.n)
    else:
        G = near_regular_graph(a.n or 2000, a.d, ss[0])
    stats = graph_stats(G)
    I, trace = nibble_independent_set(G, a.gamma, ss[1])
    greedy = greedy_independent_set(G, ss[2])
    D = stats["max_degree"]
    out = {"graph": stats, "nibble_size": len(I), "greedy_size": len(greedy),
           "independent_set": [v + 1 for v in I],
           "shearer_target": shearer_target(G.n, D) if D > 1 else None, "trace": trace.to_dict()}
    return out, trace.to_rows(), None


def cmd_pack(a, seed):
    from .packing import nibble_packing_pipeline, packing_svg, sample_poisson_box, saturated_greedy_packing
    if a.method == "nibble":
        rep, trace = nibble_packing_pipeline(a.d, a.gamma, a.L, a.intensity, seed)
        out = rep.to_dict()
        out["rounds"] = len(trace.rounds)
    else:
        ss = _child_seeds(seed, 2)
        rep = saturated_greedy_packing(sample_poisson_box(a.d, a.intensity, a.L, ss[0]), rng_seed=ss[1])
        out = rep.to_dict()
    if not rep.valid:
        raise ValidationFailure("overlapping balls", {"min_distance": rep.min_distance})
    rows = [{f"x{i + 1}": float(v) for i, v in enumerate(p)} for p in rep.points]
    plot = (lambda: packing_svg(rep.points, a.L, rep.radius)) if a.d == 2 else None
    return out, rows, plot


def cmd_codes(a, seed):
    from .packing import spherical_code_pipeline
    res = spherical_code_pipeline(a.d, a.theta, a.target, seed, samples=a.samples)
    pts = res.pop("points")
    res["points"] = pts
    rows = [{f"x{i + 1}": float(v) for i, v in enumerate(p)} for p in pts]
    return res, rows, None


def cmd_rho(a, seed):
    from .lwo import rho_small_ball
    b = "maximize" if a.b == "maximize" else float(a.b)
    est = rho_small_ball(a.v, a.eps, b, a.mode, a.trials, seed if seed is not None else 0)
    out = {"value": est.value, "mode": est.mode, "b": est.b, "trials": est.trials, "stderr": est.stderr,
           "exact": est.fraction()}
    return out, None, None


def cmd_lcd(a, seed):
    from .lwo import WeightVector, lcd
    res = lcd(WeightVector.unit(a.v), a.alpha, a.phi_max, a.step)
    out = {"lcd": res.value, "exceeds_phi_max": res.exceeds, "threshold": res.threshold,
           "grid_points": int(res.phis.size)}
    rows = [{"phi": float(p), "margin": float(m)} for p, m in zip(res.phis, res.margins)]
    return out, rows, None


def cmd_joint(a, seed):
    from .lwo import joint_small_ball, orthogonal_fixture
    v, W = orthogonal_fixture(a.n, a.k, seed)
    rows = [joint_small_ball(v, W[:k], a.eps, a.beta) for k in range(a.k + 1)]
    joints = [r["joint"] for r in rows]
    out = {"n": a.n, "records": rows,
           "non_increasing": all(x >= y for x, y in zip(joints, joints[1:]))}
    return out, rows, None


def cmd_singularity(a, seed):
    from .lwo import singularity_mc
    return singularity_mc(a.ensemble, a.n, a.trials, seed), None, None


def cmd_spectrum(a, seed):
    from .lwo import cdf_slope, spectrum_mc
    from .plots import line_svg
    res = spectrum_mc(a.ensemble, a.n, a.trials, a.eps_grid, seed)
    res.pop("sigma_min")
    res.pop("v")
    if len(a.eps_grid) > 1:
        res["cdf_slope"] = cdf_slope(res["eps"], res["cdf"])
    rows = [{"eps": e, "cdf": c, "f_eps": f} for e, c, f in zip(res["eps"], res["cdf"], res["f_eps"])]

    def plot():
        return line_svg(res["eps"], res["cdf"], "P(sqrt(n) sigma_min <= eps)", "eps", "empirical CDF")
    return res, rows, plot


COMMANDS = {
    "spencer": (cmd_spencer, True), "beckfiala": (cmd_beckfiala, True), "apdisc": (cmd_apdisc, True),
    "rs": (cmd_rs, False), "flatpoly": (cmd_flatpoly, True), "nibble": (cmd_nibble, True),
    "pack": (cmd_pack, True), "codes": (cmd_codes, True), "rho": (cmd_rho, False),
    "lcd": (cmd_lcd, False), "joint": (cmd_joint, True), "singularity": (cmd_singularity, True),
    "spectrum": (cmd_spectrum, True),
}


def build_parser():
    p = _Parser(prog="smallscale", description="Desk-scale experiments in probabilistic combinatorics.")
    p.add_argument("--version", action="version", version=f"smallscale {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--seed", type=_seed)
        s.add_argument("--entropy", action="store_true", help="draw a fresh seed (recorded in the output)")
        s.add_argument("--out", help="JSON report path (default stdout)")
        s.add_argument("--format", choices=["json", "csv"], default="json",
                       help="csv also writes the table next to --out (or to --csv)")
        s.add_argument("--csv", help="CSV table path")
        s.add_argument("--plot", help="SVG plot path")
        return s

    s = add("spencer", "iterated partial coloring of a +-1 matrix")
    s.add_argument("--n", type=int, default=64)
    s.add_argument("--m", type=int)
    s.add_argument("--matrix", help="Matrix Market file")
    s.add_argument("--baseline-trials", type=int, default=200)
    s = add("beckfiala", "floating coloring of a bounded-degree hypergraph")
    s.add_argument("--hypergraph", help="one edge per line, 1-based ids")
    s.add_argument("--n", type=int)
    s.add_argument("--edges", type=int, default=40)
    s.add_argument("--d", type=int, default=5)
    s = add("apdisc", "discrepancy of a coloring over arithmetic progressions")
    s.add_argument("--coloring")
    s.add_argument("--n", type=int)
    s = add("rs", "Rudin-Shapiro pair and its identity check")
    s.add_argument("--t", type=int, default=10)
    s.add_argument("--grid", type=int, default=4096)
    s = add("flatpoly", "flat Littlewood polynomial of degree 4n")
    s.add_argument("--n", type=int, default=256)
    s.add_argument("--gamma", type=float, default=1 / 32)
    s.add_argument("--delta", type=float)
    s = add("nibble", "independent set by the iterated nibble")
    s.add_argument("--graph", help="edge list, two 1-based ids per line")
    s.add_argument("--n", type=int, help="vertex count (default 2000, or inferred from --graph)")
    s.add_argument("--d", type=int, default=32)
    s.add_argument("--gamma", type=float, default=0.125)
    s = add("pack", "sphere packing in a box")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--intensity", type=float, default=16.0)
    s.add_argument("--L", type=float, default=6.0)
    s.add_argument("--gamma", type=float, default=0.125)
    s.add_argument("--method", choices=["nibble", "greedy"], default="nibble")
    s = add("codes", "spherical code with a minimum angle")
    s.add_argument("--d", type=int, default=3)
    s.add_argument("--theta", type=float, default=math.pi / 3)
    s.add_argument("--samples", type=int, default=2000)
    s.add_argument("--target", type=int)
    s = add("rho", "small-ball probability of a Rademacher sum")
    s.add_argument("--v", type=_floats, required=True)
    s.add_argument("--eps", type=float, default=0.0)
    s.add_argument("--b", default="0")
    s.add_argument("--mode", choices=["exact", "monte-carlo"], default="exact")
    s.add_argument("--trials", type=int, default=100000)
    s = add("lcd", "least common denominator of a unit vector")
    s.add_argument("--v", type=_floats, required=True)
    s.add_argument("--alpha", type=float, default=0.01)
    s.add_argument("--phi-max", type=float, default=10.0)
    s.add_argument("--step", type=float, default=0.01)
    s = add("joint", "joint small-ball probabilities along orthogonal directions")
    s.add_argument("--n", type=int, default=12)
    s.add_argument("--k", type=int, default=4)
    s.add_argument("--eps", type=float, default=0.3)
    s.add_argument("--beta", type=float, default=0.3)
    s = add("singularity", "singularity frequency of random sign matrices")
    s.add_argument("--ensemble", choices=["symmetric", "iid"], default="symmetric")
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--trials", type=int, default=10000)
    s = add("spectrum", "least singular value statistics")
    s.add_argument("--ensemble", choices=["symmetric", "iid"], default="symmetric")
    s.add_argument("--n", type=int, default=40)
    s.add_argument("--trials", type=int, default=500)
    s.add_argument("--eps-grid", type=_floats, default=[0.1 * i for i in range(1, 11)])
    return p


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def run_cli(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    func, randomized = COMMANDS[a.command]
    if a.command == "rho" and a.mode == "monte-carlo":
        randomized = True
    seed = a.seed
    if seed is None and a.entropy:
        seed = secrets.randbits(64)
    if randomized and seed is None:
        print("usage error: --seed is required (or pass --entropy)", file=sys.stderr)
        return 1
    if a.format == "csv" and not (a.csv or a.out):
        print("usage error: --format csv needs --out or --csv", file=sys.stderr)
        return 1
    params = {k: v for k, v in sorted(vars(a).items()) if k not in IO_KEYS and k != "seed"}
    report = {"tool": "smallscale", "version": __version__, "subcommand": a.command, "seed": seed,
              "params": params}
    try:
        result, rows, plot = func(a, seed)
    except (InvalidArgument, SizeLimitError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValidationFailure, RetryableFailure, PipelineFailure) as exc:
        report["status"] = "validation-failure"
        report["result"] = {"error": str(exc)}
        _emit(a, report, stdout)
        return 2
    report["status"] = "ok"
    report["result"] = result
    _emit(a, report, stdout)
    stamp = json.dumps(_jsonable({k: report[k] for k in ("tool", "version", "subcommand", "seed", "params")}),
                       sort_keys=True)
    if rows is not None and (a.csv or a.format == "csv"):
        path = a.csv or str(Path(a.out).with_suffix(".csv"))
        _write(path, f"# {stamp}\n" + _table_csv(rows))
    if a.plot:
        if plot is None:
            print("note: this subcommand has no plot", file=sys.stderr)
        else:
            head, rest = plot().split("\n", 1)
            _write(a.plot, f"{head}\n<metadata>{escape(stamp)}</metadata>\n{rest}")
    return 0


def _emit(a, report, stdout):
    text = json.dumps(_jsonable(report), sort_keys=True, indent=1) + "\n"
    if a.out:
        _write(a.out, text)
    else:
        stdout.write(text)


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
