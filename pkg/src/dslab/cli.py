"""Command-line front end: one experiment per invocation, one report out.

Exit status is 0 when every check of the report passed, 1 when a check or
a lemma inequality failed, 2 on bad input.  Failures are also written to
stderr as a single JSON record.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import anatomy as an
from . import bounds as bd
from . import certified
from . import experiments as ex
from . import gcdgraph as gg
from .arithmetic import totients
from .intervals import approx_set, overlap_crt, overlap_exact, psi_mass
from .psi import PsiFormatError, PsiFunction, generate_psi, parse_rational
from .reports import ExperimentReport, failure_record, resolve_output


def _psi(spec: str, Q: int) -> PsiFunction:
    return generate_psi(spec, Q)


# ---------------------------------------------------------------------------
# report builders (also used by the acceptance suite)


def measure_report(qs: Sequence[int], psi: PsiFunction) -> ExperimentReport:
    rep = ExperimentReport("measure", {"q": list(qs)})
    phi = totients(max(qs))
    ok = True
    for q in qs:
        U = approx_set(q, psi)
        formula = 2 * phi[q] * psi(q) / q
        rep.rows.append({"q": q, "psi": psi(q), "arcs": len(U), "measure": U.measure(), "formula": formula})
        ok &= U.measure() == formula
    rep.check("measure_identity", ok)
    return rep


def overlap_report(q: int, r: int, psi: PsiFunction) -> ExperimentReport:
    rep = ExperimentReport("overlap", {"q": q, "r": r})
    exact = overlap_exact(q, r, psi)
    rep.outputs["exact"] = exact
    if q != r:
        crt = overlap_crt(q, r, psi)
        rep.outputs["crt"] = crt
        rep.check("crt_matches_intersection", crt == exact)
    return rep


def bounds_report(psi: PsiFunction, *, q=None, r=None, Q=None, u=Fraction(2), T=Fraction(4), C=Fraction(1)):
    if q is not None and r is not None:
        rep = ExperimentReport("bounds", {"q": q, "r": r, "u": u, "T": T, "C": C})
        exact = overlap_exact(q, r, psi)
        rep.outputs["pv_factor"] = bd.pv_factor(q, r, psi)
        for name, b in (
            ("parts", bd.km_bound_parts(q, r, psi, u, T, exact=exact)),
            ("specialized", bd.km_bound_specialized(q, r, psi, C, exact=exact)),
        ):
            rep.rows.append(
                {
                    "bound": name,
                    "D": b.D,
                    "threshold": b.threshold,
                    "exact_overlap": b.exact_overlap,
                    "product_term": b.product_term,
                    "euler_factor": b.euler_factor,
                    "error_term": b.error_term,
                    "ratio": b.ratio,
                }
            )
        rep.check("euler_factor_at_least_one", all(row["euler_factor"] >= 1 for row in rep.rows))
        return rep
    if Q is None:
        raise ValueError("bounds needs --q and --r, or --Q for a calibration run")
    cal = bd.calibrate(Q, psi, ((u, T),) if (u, T) != (Fraction(2), Fraction(4)) else ((2, 4), (4, 16)))
    rep = ExperimentReport("bounds-calibration", {"Q": Q}, cal.as_record())
    rep.check("suprema_finite", True)
    return rep


def second_moment_report(Qs: Sequence[int], psi: PsiFunction, *, workers: int = 1, C=None) -> ExperimentReport:
    """Sweep each Q; checks Cauchy-Schwarz and the monotone decay of ``|rho - 1|``."""
    rep = ExperimentReport("second-moment", {"Q": list(Qs), "C": C})
    prev, cs, mono = None, True, True
    for Q in Qs:
        m = ex.second_moment(Q, psi, workers=workers)
        if C is not None:
            m.subtotals = ex.class_subtotals(Q, C, psi)
            rep.check(f"subtotals_sum_Q{Q}", sum(m.subtotals.values()) == m.sum_overlaps)
            rep.check(f"diagonal_is_Psi_Q{Q}", m.subtotals["E1"] == m.psi_mass)
        rep.rows.append(m.as_record())
        if m.psi_mass:
            cs &= m.sum_overlaps >= m.psi_mass**2
            dev = abs(m.ratio - 1)
            mono &= prev is None or dev <= prev
            prev = dev
    rep.check("cauchy_schwarz", cs)
    rep.check("deviation_non_increasing", mono)
    return rep


def classify_report(psi: PsiFunction, Q: int, C, *, q=None, r=None) -> ExperimentReport:
    rep = ExperimentReport("classify", {"Q": Q, "C": C})
    part = ex.Partition(Q, C, psi)
    rep.outputs["psi_mass"] = part.Psi
    rep.outputs["cutoff"] = part.cutoff
    rep.outputs["F_psi"] = part.F_Psi
    if q is not None and r is not None:
        rep.rows.append(part.classify(q, r).as_record())
        return rep
    counts = ex.class_counts(Q, C, psi)
    rep.outputs["counts"] = counts
    rep.check("one_label_per_pair", sum(counts.values()) == Q * Q)
    return rep


def props_report(psi: PsiFunction, Q: int, t, C) -> ExperimentReport:
    rep = ExperimentReport("props", {"Q": Q, "t": t, "C": C})
    rep.rows.append({"sum": "small-D", **ex.proposition_sum_1(Q, t, psi).as_record()})
    rep.rows.append({"sum": "large-L", **ex.proposition_sum_2(Q, t, C, psi).as_record()})
    return rep


def count_report(psi: PsiFunction, Q: int, alphas: Sequence[Fraction]) -> ExperimentReport:
    rep = ExperimentReport("count", {"Q": Q})
    rep.outputs["psi_mass"] = psi_mass(Q, psi)
    cap = sum(totients(Q)[1:])
    ok = True
    for a in alphas:
        S = ex.count_solutions(Q, a, psi)
        ok &= S <= cap
        rep.rows.append({"alpha": a, "S": S})
    rep.check("at_most_reduced_fractions", ok)
    return rep


def montecarlo_report(
    psi: PsiFunction, Q: int, N: int, seed: int, *, workers: int = 1, kappa: Optional[Fraction] = None
) -> ExperimentReport:
    """Max deviation of ``S/Psi`` over a seeded dyadic sample; optionally checked against ``kappa Psi^(-1/2)``."""
    mc = ex.monte_carlo_theorem1(Q, psi, N, seed, workers=workers)
    rep = ExperimentReport("montecarlo", {"Q": Q, "N": N, "seed": seed})
    rep.outputs.update(mc.as_record())
    rep.rows = [{"k": k, "alpha": Fraction(k, 1 << ex.DYADIC_BITS), "S": S} for k, S in mc.samples]
    if kappa is not None and mc.samples:
        rep.inputs["kappa"] = kappa
        rep.check("deviation_below_threshold", (mc.reference() * kappa).compare(mc.max_deviation) >= 0)
    return rep


def gcd_suite_report(n: int, seed: int, *, workers: int = 1) -> ExperimentReport:
    rows = ex.gcd_lemma_suite(n, seed, workers=workers)
    rep = ExperimentReport("gcd-suite", {"instances": n, "seed": seed}, rows=rows)
    branches: dict[str, int] = {}
    for r in rows:
        b = r.get("branch")
        if b is not None:
            branches[b] = branches.get(b, 0) + 1
    rep.outputs["branches"] = dict(sorted(branches.items()))
    rep.outputs["pruned"] = sum(bool(r.get("prune")) for r in rows)
    rep.outputs["violations"] = sum(len(r["violations"]) for r in rows)
    rep.check("no_violations", rep.outputs["violations"] == 0)
    return rep


GRAPH_OPS = (
    "validate", "density", "quality", "r-music", "find-pair", "specialize", "step",
    "iterate", "prune", "regularize", "greedy", "pipeline", "suite",
)


def gcd_graph_report(op: str, G: Optional[gg.GcdGraph], args) -> ExperimentReport:
    if op == "suite":
        return gcd_suite_report(args.samples or 200, args.seed, workers=args.threads)
    if G is None:
        raise ValueError(f"--op {op} needs --input")
    rep = ExperimentReport(f"gcd-graph:{op}", {"V": len(G.V), "W": len(G.W), "E": len(G.E)})
    out = rep.outputs
    if op == "validate":
        bad = gg.validate(G)
        rep.rows = [{"axiom": v.axiom, "detail": v.detail, "prime": v.prime} for v in bad]
        rep.check("valid", not bad)
    elif op == "density":
        out["delta"] = gg.edge_density(G)
    elif op == "quality":
        q = gg.quality(G)
        out["exact_part"] = q.exact
        out["quality"] = q.enclosure()
    elif op == "r-music":
        out["R"] = gg.remaining_primes(G)
        out["R_music"] = gg.r_music(G)
    elif op in ("find-pair", "specialize", "step"):
        if args.p is None:
            raise ValueError(f"--op {op} needs --p")
        if op == "find-pair":
            c = gg.find_pair(G, args.p)
            out.update({"k": c.k, "l": c.l, "achieved": c.achieved, "threshold": c.threshold()})
        elif op == "specialize":
            H = gg.specialize(G, args.p, args.k, args.l)
            out["graph"] = H.dumps()
            rep.check("valid", not gg.validate(H))
            rep.check("subgraph", gg.is_subgraph(H, G))
        else:
            H, tr = gg.step_122(G, args.p)
            out.update(tr.as_record())
            out["graph"] = H.dumps()
    elif op == "iterate":
        it = gg.iterate_quality_density(G, args.C, args.t)
        out.update(it.as_record())
        out["graph"] = it.graph.dumps()
    elif op == "prune":
        s = args.s if args.s is not None else Fraction(2)
        trace: list = []
        H = gg.prune_edges_84(G, s, trace=trace)
        rec = trace[0]
        out.update({"kept": len(H.E), "removed": rec.removed, "weighted_s": rec.weighted_s, "surrogate": rec.surrogate})
        out["graph"] = H.dumps()
    elif op == "regularize":
        trace = []
        H = gg.regularize_85(G, trace=trace)
        out["removed"] = [(st.side, st.vertex) for st in trace]
        out["graph"] = H.dumps()
        rep.check("regular", gg.is_regular(H))
    elif op == "greedy":
        H, gr = gg.greedy_empty_r(G)
        out["choices"] = gr.choices
        out["quality_ratio"] = gr.quality_ratio
        out["graph"] = H.dumps()
    elif op == "pipeline":
        res = gg.pipeline_goodgcd(G, args.C, args.t, variant=args.variant, s=args.s)
        out.update(res.as_record())
        out["graph"] = res.graph.dumps()
    else:
        raise ValueError(f"unknown graph op {op!r}")
    return rep


def anatomy_report(xs, ts, cs) -> ExperimentReport:
    rep = ExperimentReport("anatomy", {"x": list(xs), "t": list(ts), "c": list(cs)})
    cells = an.anatomy_grid(xs, ts, cs)
    for cell in cells:
        rep.rows.append(
            {"x": cell.x, "t": cell.t, "c": cell.c, "count": cell.count, "majorant": cell.majorant, "mass": cell.mass}
        )
    rep.check("markov_step", all(c.markov_holds for c in cells))
    return rep


def mean_value_report(xs, primes, K: Optional[Fraction] = None) -> ExperimentReport:
    P = an.PrimeSet.of(primes)
    rep = ExperimentReport("mean-value", {"x": list(xs), "P": list(P.primes), "K": K})
    ok = True
    for x in xs:
        mv = an.mean_value_check(x, P)
        scaled = abs(mv.residual) / certified.log(x) if x > 1 else None
        rep.rows.append({"x": x, "sum": mv.total, "main_term": mv.main_term, "residual": mv.residual, "scaled": scaled})
        if K is not None and scaled is not None:
            ok &= scaled.compare(K) <= 0
    if K is not None:
        rep.check("residual_within_K_log_x", ok)
    return rep


# ---------------------------------------------------------------------------
# argument parsing


def _rat(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except (PsiFormatError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--psi", default="constant:1/2", help="psi generator spec or file:<path>")
    common.add_argument("--output", help="report path (relative paths honour $DSLAB_OUTPUT_DIR)")
    common.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    common.add_argument("--threads", type=int, default=1, help="worker processes; results do not depend on it")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int)
    common.add_argument("--C", type=_rat, default=Fraction(1))
    common.add_argument("--t", type=_rat, default=Fraction(1))
    common.add_argument("--u", type=_rat, default=Fraction(2))
    common.add_argument("--T", type=_rat, default=Fraction(4))

    ap = argparse.ArgumentParser(prog="dslab", description="Exact experiments on approximation sets and GCD graphs.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", parents=[common], help="measure of A_q against 2 phi(q) psi(q) / q")
    p.add_argument("--q", type=int, nargs="+", required=True)

    for name, hlp in (("overlap", "exact overlap of A_q and A_r by both methods"), ("bounds", "overlap bounds")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        p.add_argument("--q", type=int, required=name == "overlap")
        p.add_argument("--r", type=int, required=name == "overlap")
        if name == "bounds":
            p.add_argument("--Q", type=int, help="calibrate over all pairs up to Q instead")

    p = sub.add_parser("second-moment", parents=[common], help="exact second moment by endpoint sweep")
    p.add_argument("--Q", type=int, nargs="+", required=True)
    p.add_argument("--classes", action="store_true", help="add per-class subtotals at --C")

    p = sub.add_parser("classify", parents=[common], help="the five-way pair partition")
    p.add_argument("--Q", type=int, required=True)
    p.add_argument("--q", type=int)
    p.add_argument("--r", type=int)

    p = sub.add_parser("props", parents=[common], help="restricted pair sums")
    p.add_argument("--Q", type=int, required=True)

    p = sub.add_parser("count", parents=[common], help="S(Q, alpha)")
    p.add_argument("--Q", type=int, required=True)
    p.add_argument("--alpha", type=_rat, nargs="+", required=True)

    p = sub.add_parser("montecarlo", parents=[common], help="deviation of S(Q, alpha) / Psi(Q) on dyadic samples")
    p.add_argument("--Q", type=int, required=True)
    p.add_argument("--kappa", type=_rat, help="check max deviation <= kappa Psi^(-1/2)")

    p = sub.add_parser("gcd-graph", parents=[common], help="GCD-graph operations")
    p.add_argument("--input", help="graph file")
    p.add_argument("--op", choices=GRAPH_OPS, required=True)
    p.add_argument("--p", type=int)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--l", type=int, default=0)
    p.add_argument("--s", type=_rat)
    p.add_argument("--variant", type=int, choices=(1, 2), default=1)

    p = sub.add_parser("anatomy", parents=[common], help="anatomy counts against the Markov majorant")
    p.add_argument("--x", type=int, nargs="+", required=True)
    p.add_argument("--c", type=_rat, nargs="+", required=True)
    p.add_argument("--tt", type=_rat, nargs="+", dest="ts", help="several t values (default: --t)")

    p = sub.add_parser("mean-value", parents=[common], help="mean value of f over an odd prime set")
    p.add_argument("--x", type=int, nargs="+", required=True)
    p.add_argument("--P", type=int, nargs="+", required=True)
    p.add_argument("--K", type=_rat)
    return ap


def run(args) -> ExperimentReport:
    cmd = args.command
    if cmd == "measure":
        return measure_report(args.q, _psi(args.psi, max(args.q)))
    if cmd == "overlap":
        return overlap_report(args.q, args.r, _psi(args.psi, max(args.q, args.r)))
    if cmd == "bounds":
        need = args.Q if args.q is None else max(args.q, args.r or 1)
        return bounds_report(_psi(args.psi, need), q=args.q, r=args.r, Q=args.Q, u=args.u, T=args.T, C=args.C)
    if cmd == "second-moment":
        psi = _psi(args.psi, max(args.Q))
        return second_moment_report(args.Q, psi, workers=args.threads, C=args.C if args.classes else None)
    if cmd == "classify":
        return classify_report(_psi(args.psi, args.Q), args.Q, args.C, q=args.q, r=args.r)
    if cmd == "props":
        return props_report(_psi(args.psi, args.Q), args.Q, args.t, args.C)
    if cmd == "count":
        return count_report(_psi(args.psi, args.Q), args.Q, args.alpha)
    if cmd == "montecarlo":
        psi = _psi(args.psi, args.Q)
        N = 20 if args.samples is None else args.samples
        return montecarlo_report(psi, args.Q, N, args.seed, workers=args.threads, kappa=args.kappa)
    if cmd == "gcd-graph":
        G = gg.GcdGraph.load(args.input) if args.input else None
        return gcd_graph_report(args.op, G, args)
    if cmd == "anatomy":
        return anatomy_report(args.x, args.ts or [args.t], args.c)
    if cmd == "mean-value":
        return mean_value_report(args.x, args.P, args.K)
    raise ValueError(f"unknown command {cmd!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rep = run(args)
    except gg.LemmaViolation as exc:
        sys.stderr.write(failure_record("lemma-violation", str(exc), **exc.record()))
        return 1
    except AssertionError as exc:
        sys.stderr.write(failure_record("assertion", str(exc)))
        return 1
    except (ValueError, IndexError, OSError) as exc:
        sys.stderr.write(failure_record("input", str(exc), command=args.command))
        return 2
    text = rep.render(args.format)
    path = resolve_output(args.output)
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)
    if not rep.passed:
        failed = sorted(k for k, v in rep.checks.items() if not v)
        sys.stderr.write(failure_record("check", "report checks failed", experiment=rep.name, failed=failed))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
