"""Command-line interface.

Exit codes: 0 success or check passed, 1 check failed, 2 usage or input
error. JSON output (``--output json``) is the stable contract; tables are
for people. Progress messages go to standard error.
"""

import argparse
import os
import sys

import numpy as np

from . import classical, graph, histories, io, noise, search
from ._validation import GuardExceededError
from .histories import LEVELS, HistoryFamily
from .quantum import LocalBasis

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("HISTOQ_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"HISTOQ_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _emit(args, payload, table):
    if args.output == "json":
        print(io.dumps(payload))
    else:
        print(table)


def _fmt(x):
    return f"{x:.6g}"


def _fmt_c(z):
    return f"{z.real:+.6f} {z.imag:+.6f}i"


def _verdict(ok):
    return "n/a" if ok is None else ("PASS" if ok else "FAIL")


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args):
    fam = io.load_family(args.file)
    circuit = fam.circuit
    dist = circuit.final_distribution()
    payload = {
        "valid": True,
        "qubits": circuit.qubits,
        "dim": circuit.dim,
        "stages": circuit.n_stages,
        "stage_labels": list(circuit.stage_labels),
        "pure": circuit.is_pure,
        "set_stages": list(fam.stages),
        "final_distribution": dist,
    }
    lines = [
        f"valid circuit: {circuit.qubits} qubits, {circuit.n_stages} stages ({', '.join(circuit.stage_labels)})",
        f"initial state: {'pure' if circuit.is_pure else 'mixed'}",
        f"sets at stages: {list(fam.stages)}",
        "final distribution: " + ", ".join(_fmt(p) for p in dist),
    ]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_analyze(args):
    fam = io.load_family(args.file)
    cm = histories.coherence_matrix(fam)
    probs = cm.probabilities()
    reports = histories.check_all(fam, args.epsilon)
    off = cm.matrix - np.diag(np.diag(cm.matrix))
    hist = [".".join(fam.sets[i].labels[a] for i, a in enumerate(fam.multi_index(k))) for k in range(fam.size)]
    payload = {
        "sizes": list(fam.sizes),
        "stages": list(fam.stages),
        "histories": hist,
        "probabilities": probs,
        "coherence": {"max_offdiagonal_abs": float(np.abs(off).max()), "max_offdiagonal_real": float(np.abs(off.real).max())},
        "nonzero_histories": histories.count_nonzero_histories(fam),
        "reports": {k: (None if r is None else r.to_dict()) for k, r in reports.items()},
        "epsilon": args.epsilon,
    }
    lines = [f"family: sets at stages {list(fam.stages)}, sizes {list(fam.sizes)}, {fam.size} histories"]
    lines.append("probabilities:")
    for h, p in zip(hist, probs):
        if p > histories.ZERO_PROBABILITY:
            lines.append(f"  {h:<24} {_fmt(p)}")
    lines.append(f"max |D| off-diagonal {_fmt(payload['coherence']['max_offdiagonal_abs'])}, "
                 f"max |Re D| {_fmt(payload['coherence']['max_offdiagonal_real'])}")
    for level in LEVELS:
        r = reports[level]
        lines.append(f"{level:<10} {_verdict(None if r is None else r.passed)}"
                     + ("" if r is None else f"  (violation {_fmt(r.max_violation)})"))
    _emit(args, payload, "\n".join(lines))
    if args.level:
        r = reports[args.level]
        return EXIT_OK if r is None or r.passed else EXIT_FAIL
    return EXIT_OK


def cmd_graph(args):
    fam = io.load_family(args.file)
    if not graph.family_is_fine(fam):
        raise UsageError("graph analysis needs rank-1 sets at every stage")
    g = graph.graph_from_family(fam)
    span = tuple(args.span) if args.span else None
    if span is not None and not 0 <= span[0] < span[1] <= g.n_layers - 1:
        raise UsageError(f"span must satisfy 0 <= a < b <= {g.n_layers - 1}")
    rows = graph.loop_table(g)
    weak = graph.check_weak_via_loops(g, args.epsilon)
    medium = graph.check_medium_via_paths(g)
    if args.dot:
        io.write_text(args.dot, graph.export_dot(g))
        print(f"wrote {args.dot}", file=sys.stderr)
    loops = []
    for s, e, p1, p2, prod in rows:
        item = {"start": s, "end": e, "path1": list(p1), "path2": list(p2), "product": prod}
        if span is not None:
            item["span"] = list(span)
            item["span_product"] = graph.loop_product(g, graph.LoopPair(s, e, p1, p2), span)
        loops.append(item)
    payload = {
        "layers": list(g.layer_sizes),
        "stages": list(g.stages),
        "edges": len(g.edges()),
        "loops": loops,
        "weak": weak.to_dict(),
        "medium": medium.to_dict(),
    }
    lines = [f"graph: layers {list(g.layer_sizes)} at stages {list(g.stages)}, {len(g.edges())} edges"]
    if not loops:
        lines.append("no loops; weakly consistent")
    for item in loops:
        line = f"loop {item['start']}->{item['end']} {item['path1']} / {item['path2']}: product {_fmt_c(item['product'])}"
        if span is not None:
            line += f", layers {span[0]}-{span[1]} {_fmt_c(item['span_product'])}"
        lines.append(line)
    lines.append(f"weak (loops)   {_verdict(weak.passed)}")
    lines.append(f"medium (paths) {_verdict(medium.passed)}")
    _emit(args, payload, "\n".join(lines))
    level = args.level or "weak"
    if level == "medium":
        return EXIT_OK if medium.passed else EXIT_FAIL
    return EXIT_OK if weak.passed else EXIT_FAIL


def _config(args, stage):
    return search.SearchConfig(
        stage=stage,
        level=args.level or "computing",
        epsilon=args.epsilon,
        grid=args.grid,
        joint_block_max=args.joint_block_max,
        require_nontrivial=args.nontrivial,
        max_results=args.max_results,
    )


def cmd_search(args):
    circuit = io.load_circuit(args.file)
    results = search.search_local_extensions(circuit, _config(args, args.stage), threads=_threads(args))
    lines = [f"{len(results)} extension(s) at stage {args.stage}"]
    for r in results:
        lines.append(
            f"  {r.basis.describe():<60} violation {_fmt(r.report.max_violation)}"
            f"  {'trivial' if r.trivial else 'nontrivial'}{'' if r.local else ' (joint)'}"
        )
    _emit(args, results, "\n".join(lines))
    return EXIT_OK


def cmd_profile(args):
    circuit = io.load_circuit(args.file)
    prof = search.classicality_profile(circuit, _config(args, 0), threads=_threads(args))
    lines = [f"{'stage':>5}  {'found':>5}  {'S (bits)':>8}  best"]
    for s in prof:
        ent = s.entanglement.get("bits")
        lines.append(f"{s.stage:>5}  {s.n_found:>5}  {'-' if ent is None else f'{ent:8.4f}':>8}  {s.message}")
    _emit(args, prof, "\n".join(lines))
    return EXIT_OK


def cmd_simulate(args):
    fam = io.load_family(args.file)
    if not all(s.is_fine for s in fam.sets):
        raise UsageError("simulation needs rank-1 sets at every stage")
    rep = classical.verify_sum_rule(fam.circuit, fam, args.epsilon)
    computing = histories.check_computing(fam, args.epsilon)
    quantum = fam.circuit.final_distribution()
    chain = classical.compile_chain(fam, require_consistent=False)
    chain_final = classical.run_chain(chain).probabilities
    payload = {
        "labels": list(fam.sets[-1].labels),
        "quantum": quantum,
        "classical": chain_final,
        "max_difference": rep.max_violation,
        "sum_rule": rep.to_dict(),
        "computing": computing.to_dict(),
        "chain": chain.to_dict(),
    }
    if args.chain:
        io.write_text(args.chain, io.dumps(chain.to_dict()))
        print(f"wrote {args.chain}", file=sys.stderr)
    lines = [f"{'outcome':<10} {'quantum':>12} {'chain':>12}"]
    for lab, q, c in zip(payload["labels"], quantum, chain_final):
        lines.append(f"{lab:<10} {q:12.8f} {c:12.8f}")
    lines.append(f"max difference {_fmt(rep.max_violation)} -> {'MATCH' if rep.passed else 'MISMATCH'}")
    lines.append(f"computing check {_verdict(computing.passed)}")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if rep.passed else EXIT_FAIL


def _parse_angles(text, qubits):
    try:
        pairs = [tuple(float(x) for x in part.split(",")) for part in text.split(";")]
    except ValueError:
        raise UsageError(f"bad angle list {text!r}; expected 'theta,phi;theta,phi'") from None
    if len(pairs) != qubits or any(len(p) != 2 for p in pairs):
        raise UsageError(f"need {qubits} 'theta,phi' pairs separated by ';'")
    return LocalBasis.from_angles(pairs)


def cmd_noise(args):
    circuit = io.load_circuit(args.file)
    if circuit.qubits is None:
        raise UsageError("noise experiments need a qubit register")
    consistent = (
        _parse_angles(args.basis, circuit.qubits) if args.basis else LocalBasis.computational(circuit.qubits)
    )
    seed = 0 if args.seed is None else args.seed
    if args.refocus:
        if args.decoherence:
            dec = _parse_angles(args.decoherence, circuit.qubits)
        else:
            rng = np.random.Generator(np.random.Philox(seed))
            th, ph = noise.random_bloch_angles(rng, (circuit.qubits,))
            dec = LocalBasis.from_angles(list(zip(th, ph)))
        refocused, at = noise.refocus_known_basis(circuit, args.stage, dec, consistent)
        channel = noise.DephasingChannel(dec, args.strength)
        p0 = circuit.final_distribution()
        p_ref = noise.noisy_final_distribution(refocused, {at: channel})
        p_raw = noise.noisy_final_distribution(circuit, {args.stage: channel})
        err = float(np.abs(p_ref - p0).max())
        payload = {
            "format": 1,
            "mode": "refocus",
            "rng_seed": seed,
            "stage": args.stage,
            "decoherence_basis": [list(a) for a in dec.angles],
            "consistent_basis": consistent.describe(),
            "noiseless": p0,
            "refocused": p_ref,
            "unprotected": p_raw,
            "max_error": err,
            "kl_unprotected": noise.kl_divergence(p0, p_raw),
            "epsilon": args.epsilon,
            "passed": err <= args.epsilon,
        }
        lines = [
            f"decoherence basis {dec.describe()} at stage {args.stage} (seed {seed})",
            "noiseless   " + " ".join(f"{p:.6f}" for p in p0),
            "refocused   " + " ".join(f"{p:.6f}" for p in p_ref),
            "unprotected " + " ".join(f"{p:.6f}" for p in p_raw),
            f"max error after refocusing {_fmt(err)} -> {'PASS' if err <= args.epsilon else 'FAIL'}",
        ]
        _emit(args, payload, "\n".join(lines))
        return EXIT_OK if err <= args.epsilon else EXIT_FAIL
    rep = noise.run_robustness_experiment(
        circuit, args.stage, consistent, args.samples, seed, args.strength, _threads(args)
    )
    lo, hi = rep.reduction_ci
    lines = [
        f"model: {rep.model} at stage {rep.stage}, strength {rep.strength}",
        f"samples {rep.samples}, seed {rep.rng_seed}",
        f"H0 = {rep.H0:.6f} +/- {rep.se_H0:.6f} nats",
        f"Hm = {rep.Hm:.6f} +/- {rep.se_Hm:.6f} nats",
        f"reduction = {rep.reduction:.4f} (95% CI {lo:.4f} .. {hi:.4f})",
        f"chi2 reduction = {rep.chi2_variant['reduction']:.4f}",
    ]
    _emit(args, rep, "\n".join(lines))
    return EXIT_OK


def cmd_bounds(args):
    if args.diosi is not None:
        r, dim = args.diosi
        if not 1 <= r <= dim or dim < 2:
            raise UsageError("--diosi needs 1 <= r <= dim and dim >= 2")
        rng = np.random.default_rng(0 if args.seed is None else args.seed)
        a = rng.normal(size=(dim, r)) + 1j * rng.normal(size=(dim, r))
        rho = a @ a.conj().T
        rho /= np.trace(rho).real
        fam = histories.build_diosi_family(rho)
        bound, kind = r * dim, "medium"
    else:
        dim = args.weak
        if dim < 2 or dim % 2:
            raise UsageError(f"--weak needs an even dimension >= 2, got {dim}")
        fam = histories.build_weak_bound_family(dim, initial_index=args.initial_index)
        r, bound, kind = 1, 2 * dim, "weak"
    count = histories.count_nonzero_histories(fam)
    reports = histories.check_all(fam, args.epsilon)
    if args.export:
        io.write_text(args.export, io.serialize_family(fam, dense=True))
        print(f"wrote {args.export}", file=sys.stderr)
    payload = {
        "construction": "diosi" if args.diosi is not None else "weak",
        "rank": r,
        "dim": dim,
        "stages": list(fam.stages),
        "sizes": list(fam.sizes),
        "nonzero_histories": count,
        "bound": bound,
        "bound_level": kind,
        "within_bound": count <= bound,
        "reports": {k: (None if v is None else v.to_dict()) for k, v in reports.items()},
    }
    lines = [
        f"{payload['construction']} construction: rank {r}, dimension {dim}, sets at stages {list(fam.stages)}",
        f"nonzero-probability histories: {count} (bound {bound} for {kind} consistency, r*dim = {r * dim})",
    ]
    for level in LEVELS:
        v = reports[level]
        lines.append(f"{level:<10} {_verdict(None if v is None else v.passed)}")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if count <= bound else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--epsilon", type=float, default=histories.DEFAULT_EPSILON, help="consistency tolerance")
    common.add_argument("--level", choices=LEVELS, default=None, help="consistency level to decide the exit code")
    common.add_argument("--output", choices=("json", "table"), default="table")
    common.add_argument("--seed", type=int, default=None, help="random seed (echoed in reports)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: HISTOQ_THREADS or all cores)")

    parser = _Parser(prog="histoq", description="Consistent-histories analysis of small quantum circuits.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", parents=[common], help="parse and validate a circuit or family file")
    p.add_argument("file", help="path, or - for standard input")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", parents=[common], help="probabilities and consistency verdicts of a family")
    p.add_argument("file")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("graph", parents=[common], help="Green-function graph, loop products and DOT export")
    p.add_argument("file")
    p.add_argument("--dot", help="write the graph in DOT format to this path")
    p.add_argument("--span", type=int, nargs=2, metavar=("A", "B"), help="also print loop products over layers A..B")
    p.set_defaults(func=cmd_graph)

    for name, func, text in (
        ("search", cmd_search, "local bases insertable at one stage"),
        ("profile", cmd_profile, "best local extension at every stage"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("file")
        if name == "search":
            p.add_argument("--stage", type=int, required=True)
        p.add_argument("--grid", type=float, default=search.DEFAULT_GRID, help="Bloch-angle grid step (radians)")
        p.add_argument("--joint-block-max", type=int, default=1)
        p.add_argument("--nontrivial", action="store_true", help="drop trivial extensions")
        p.add_argument("--max-results", type=int, default=50)
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", parents=[common], help="quantum vs stochastic-chain final distributions")
    p.add_argument("file")
    p.add_argument("--chain", help="write the compiled chain as JSON to this path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("noise", parents=[common], help="dephasing robustness experiment")
    p.add_argument("file")
    p.add_argument("--stage", type=int, default=2)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--strength", type=float, default=1.0)
    p.add_argument("--basis", help="consistent basis as 'theta,phi;theta,phi' (default computational)")
    p.add_argument("--refocus", action="store_true", help="protect with a rotation into a known dephasing basis")
    p.add_argument("--decoherence", help="known dephasing basis for --refocus (default drawn from --seed)")
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("bounds", parents=[common], help="constructions saturating the history-count bounds")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--diosi", type=int, nargs=2, metavar=("R", "DIM"), help="rank-R state in dimension DIM")
    g.add_argument("--weak", type=int, metavar="DIM", help="weakly consistent family in even dimension DIM")
    p.add_argument("--initial-index", type=int, default=1, help="basis state used by --weak")
    p.add_argument("--export", help="write the constructed family as JSON to this path")
    p.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, io.SchemaError, GuardExceededError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"histoq {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
