"""Command-line interface.

Exit codes: 0 on success, 1 when a verification fails, 2 on invalid input.
Vertex labels given on the command line (``--basis vertices+sep:1,3``) are
1-based, matching how small examples are usually written; files use 0-based
labels.
"""
from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import harness
from .estimation import GraphicalLassoSelector, NodewiseSelector
from .exceptions import GencovError, InvalidSpec
from .graph import FAMILIES, Graph, GraphFamilySpec, format_graph, generate_graph, read_graph, write_graph
from .mrf import StatisticBasis, ising_model, random_model, read_model
from .sampling import SamplerConfig, corrupt_missing, read_dataset, sample, write_dataset

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2

_SHORT = {"er": "erdos_renyi", "grid": "grid2d"}


def parse_graph_arg(text, seed=None):
    """Graph from a file path, ``dino``, or a family name followed by p (``chain4``, ``grid9``)."""
    if Path(text).is_file():
        return read_graph(text)
    if text == "dino":
        return generate_graph(GraphFamilySpec("dino", 13))
    match = re.fullmatch(r"([a-z_]+?)(\d+)", text)
    if not match:
        raise InvalidSpec(f"cannot interpret graph {text!r}")
    family = _SHORT.get(match.group(1), match.group(1))
    if family not in FAMILIES:
        raise InvalidSpec(f"unknown graph family {match.group(1)!r}")
    return generate_graph(GraphFamilySpec(family, int(match.group(2)), seed=seed))


def parse_weights(text):
    try:
        node, edge = (float(v) for v in text.split(","))
    except ValueError:
        raise InvalidSpec("--weights takes 'node,edge'") from None
    return node, edge


def parse_basis(text, p, m):
    """``vertices``, ``cliques`` or ``vertices+sep:1,3[;2,4]`` with 1-based labels."""
    if text in ("vertices", "cliques"):
        return text
    match = re.fullmatch(r"vertices\+sep:(.+)", text)
    if not match:
        raise InvalidSpec(f"unknown basis {text!r}")
    extra = []
    for group in match.group(1).split(";"):
        try:
            verts = tuple(sorted(int(v) - 1 for v in group.split(",")))
        except ValueError:
            raise InvalidSpec(f"bad vertex list {group!r}") from None
        if any(not 0 <= v < p for v in verts):
            raise InvalidSpec(f"vertex out of range in {group!r} (labels are 1..{p})")
        extra.append(verts)
    return StatisticBasis.power_set(extra, m, include=[(v,) for v in range(p)])


def _model(args, graph):
    if getattr(args, "model", None):
        return read_model(args.model)
    node, edge = parse_weights(args.weights)
    if args.m == 2:
        return ising_model(graph, node, edge)
    return random_model(graph, m=args.m, node=node, edge=edge)


def cmd_population_check(args):
    graph = parse_graph_arg(args.graph, args.seed)
    model = _model(args, graph)
    basis = parse_basis(args.basis, model.p, model.m)
    report = harness.run_population_check(model, basis, tol=args.tol)
    print(report.format(digits=args.digits))
    if args.out:
        report.structure[0][1].to_csv(args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_phase_transition(args):
    cfg = harness.load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if overrides:
        cfg = harness.ExperimentConfig(**{**cfg.__dict__, **overrides})

    def progress(row):
        print(f"p={row.p} n={row.n} rho={row.rho:g} success={row.success_rate:.3f}", file=sys.stderr)

    curve = harness.run_phase_transition(cfg, out=args.out, n_jobs=args.n_jobs, progress=progress)
    if args.out is None:
        import csv

        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(harness.CSV_HEADER + harness.EXTRA_COLUMNS)
        for row in curve.rows:
            writer.writerow(harness._format_row(row))
    return EXIT_OK


def cmd_graph_gen(args):
    spec = GraphFamilySpec(args.family, args.p, edge_prob=args.edge_prob, hub_degree=args.hub_degree,
                           seed=args.seed)
    graph = generate_graph(spec)
    if args.out:
        write_graph(graph, args.out)
    else:
        sys.stdout.write(format_graph(graph))
    return EXIT_OK


def cmd_sample(args):
    graph = parse_graph_arg(args.graph, args.seed) if args.graph else None
    if graph is None and not args.model:
        raise InvalidSpec("give --graph or --model")
    model = _model(args, graph)
    config = SamplerConfig(mode=args.mode, burn_in=args.burn_in, thinning=args.thinning, chains=args.chains)
    rng = np.random.default_rng(args.seed)
    data = sample(model, args.n, config, rng)
    if args.rho > 0:
        data = corrupt_missing(data, args.rho, rng)
    if args.out:
        write_dataset(data, args.out, mask_path=args.mask_out if args.rho > 0 else None)
    else:
        np.savetxt(sys.stdout, data.values, fmt="%d", delimiter=",")
    return EXIT_OK


def cmd_estimate(args):
    data = read_dataset(args.data, mask_path=args.mask, rho=args.rho)
    if args.method == "glasso":
        est = GraphicalLassoSelector(lam=args.lam, tau=args.tau, lam_const=args.lam_const,
                                     tau_factor=args.tau_factor, rho=args.rho)
    else:
        method = {"nodewise_tree": "tree", "nodewise_general": "general"}.get(args.method, args.method)
        est = NodewiseSelector(method=method, degree=args.degree, kappa=args.kappa,
                               max_candidates=args.max_candidates, lam=args.lam, tau=args.tau,
                               lam_const=args.lam_const, tau_factor=args.tau_factor,
                               combine=args.combine, rho=args.rho)
    est.fit(data)
    graph = Graph(data.p, est.edges_)
    if args.out:
        write_graph(graph, args.out)
    else:
        sys.stdout.write(format_graph(graph))
    if args.truth:
        truth = read_graph(args.truth)
        ok = truth.edges == graph.edges
        print(f"exact recovery: {'yes' if ok else 'no'}", file=sys.stderr)
        return EXIT_OK if ok else EXIT_FAIL
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="gencov", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("population-check", help="exact covariance, inverse and structure checks")
    pc.add_argument("--graph", required=True, help="chain4, cycle4, grid9, dino, ... or a graph file")
    pc.add_argument("--weights", default="0.1,2.0", help="node,edge weights")
    pc.add_argument("--model", help="model file (overrides --graph weights)")
    pc.add_argument("--m", type=int, default=2, help="alphabet size")
    pc.add_argument("--basis", default="vertices", help="vertices, cliques or vertices+sep:1,3")
    pc.add_argument("--tol", type=float, default=1e-8)
    pc.add_argument("--digits", type=int, default=2)
    pc.add_argument("--seed", type=int)
    pc.add_argument("--out", help="write the block report as CSV")
    pc.set_defaults(func=cmd_population_check)

    pt = sub.add_parser("phase-transition", help="Monte-Carlo recovery curves")
    pt.add_argument("--config", required=True)
    pt.add_argument("--seed", type=int)
    pt.add_argument("--trials", type=int)
    pt.add_argument("--out")
    pt.add_argument("--n-jobs", type=int, default=1)
    pt.set_defaults(func=cmd_phase_transition)

    gr = sub.add_parser("graph", help="graph utilities")
    gsub = gr.add_subparsers(dest="graph_command", required=True)
    gen = gsub.add_parser("gen", help="generate a benchmark graph")
    gen.add_argument("--family", required=True, choices=[f for f in FAMILIES if f != "custom"])
    gen.add_argument("--p", type=int, required=True)
    gen.add_argument("--edge-prob", type=float)
    gen.add_argument("--hub-degree", type=int)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_graph_gen)

    sm = sub.add_parser("sample", help="draw samples, optionally with missing entries")
    sm.add_argument("--graph")
    sm.add_argument("--model")
    sm.add_argument("--weights", default="0.1,0.3")
    sm.add_argument("--m", type=int, default=2)
    sm.add_argument("--n", type=int, required=True)
    sm.add_argument("--mode", default="exact", choices=["exact", "junction_tree", "gibbs"])
    sm.add_argument("--burn-in", type=int, default=1000)
    sm.add_argument("--thinning", type=int, default=10)
    sm.add_argument("--chains", type=int, default=1)
    sm.add_argument("--rho", type=float, default=0.0)
    sm.add_argument("--seed", type=int)
    sm.add_argument("--out")
    sm.add_argument("--mask-out")
    sm.set_defaults(func=cmd_sample)

    es = sub.add_parser("estimate", help="estimate a graph from a dataset")
    es.add_argument("--data", required=True)
    es.add_argument("--mask")
    es.add_argument("--rho", type=float, default=0.0)
    es.add_argument("--method", default="nodewise_tree",
                    choices=["glasso", "nodewise_tree", "nodewise_general", "corr_decay"])
    es.add_argument("--lam", type=float)
    es.add_argument("--tau", type=float)
    es.add_argument("--lam-const", type=float, default=0.5)
    es.add_argument("--tau-factor", type=float, default=2.0)
    es.add_argument("--degree", type=int, default=1)
    es.add_argument("--kappa", type=float)
    es.add_argument("--max-candidates", type=int)
    es.add_argument("--combine", default="or", choices=["or", "and"])
    es.add_argument("--truth", help="graph file; exit 1 unless recovery is exact")
    es.add_argument("--out")
    es.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GencovError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
