"""Monte-Carlo phase-transition experiments and population-level checks.

Experiments are described by a flat INI file with a single ``[experiment]``
section, for example::

    [experiment]
    family = chain
    p = 16, 32, 64
    node_weight = 0.1
    edge_weight = 0.3
    method = nodewise_tree
    n_over_logp = 20, 40, 80
    rho = 0
    trials = 100
    seed = 2024
    lam_const = 0.5
    tau_factor = 2.0
    combine = or

Give either ``n`` (absolute sample sizes) or ``n_over_logp`` (sample sizes
``ceil(c * log p)``; natural log).
"""
from __future__ import annotations

import configparser
import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .estimation import GraphicalLassoSelector, NodewiseSelector
from .exceptions import GencovError, InvalidSpec
from .graph import GraphFamilySpec, build_junction_tree, generate_graph, triangulate
from .mrf import StatisticBasis, ising_model
from .population import _check_pairs, generalized_covariance, inverse_and_blocks, verify_theorem1
from .sampling import SamplerConfig, corrupt_missing, sample

__all__ = [
    "ExperimentConfig",
    "PhaseRow",
    "PhaseCurve",
    "CSV_HEADER",
    "EXTRA_COLUMNS",
    "load_config",
    "trial_seed",
    "run_trial",
    "run_phase_transition",
    "emit_results",
    "read_results",
    "PopulationReport",
    "run_population_check",
]

logger = logging.getLogger(__name__)

METHODS = ("glasso", "nodewise_tree", "nodewise_general", "corr_decay")
CSV_HEADER = ("family", "p", "n", "n_over_logp", "rho", "method", "success_rate", "trials", "mean_runtime_ms")
EXTRA_COLUMNS = ("success_count", "lam_const", "tau_factor", "mean_precision", "mean_recall")


def _floats(text):
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text):
    return tuple(int(float(v)) for v in _floats(text))


@dataclass(frozen=True)
class ExperimentConfig:
    """One phase-transition sweep over ``p x n x rho`` cells.

    ``degree`` is the degree bound used by the regression methods and
    ``max_candidates`` the screen size of ``corr_decay`` (``None`` uses
    ``floor(2.5 * degree)``). ``sampler`` is a sampling mode or ``"auto"``
    (exact enumeration up to 2**16 states, junction-tree sampling beyond).
    """

    family: str = "chain"
    p: tuple = (16,)
    node_weight: float = 0.1
    edge_weight: float = 0.3
    method: str = "nodewise_tree"
    n: tuple = ()
    n_over_logp: tuple = ()
    rho: tuple = (0.0,)
    trials: int = 100
    seed: int = 0
    lam_const: float = 0.5
    tau_factor: float = 2.0
    combine: str = "or"
    degree: int = 2
    kappa: float | None = None
    max_candidates: int | None = None
    edge_prob: float | None = None
    graph_seed: int | None = None
    sampler: str = "auto"

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidSpec("trials must be at least 1")
        if not self.p:
            raise InvalidSpec("the p grid is empty")
        if bool(self.n) == bool(self.n_over_logp):
            raise InvalidSpec("give exactly one of n and n_over_logp")
        if not self.rho:
            raise InvalidSpec("the rho grid is empty")
        if self.method not in METHODS:
            raise InvalidSpec(f"method must be one of {METHODS}")
        if self.combine not in ("and", "or"):
            raise InvalidSpec("combine must be 'and' or 'or'")
        if any(not 0 <= r < 1 for r in self.rho):
            raise InvalidSpec("every rho must lie in [0, 1)")
        if self.sampler not in ("auto", "exact", "junction_tree", "gibbs"):
            raise InvalidSpec(f"unknown sampler {self.sampler!r}")

    def sample_sizes(self, p):
        if self.n:
            return tuple(sorted(set(self.n)))
        logp = math.log(p)
        return tuple(sorted({max(2, math.ceil(c * logp)) for c in self.n_over_logp}))

    def graph_spec(self, p):
        seed = self.seed if self.graph_seed is None else self.graph_seed
        return GraphFamilySpec(self.family, p, edge_prob=self.edge_prob, seed=seed)

    @classmethod
    def from_mapping(cls, raw):
        kinds = {
            "p": _ints, "n": _ints, "n_over_logp": _floats, "rho": _floats,
            "trials": int, "seed": int, "degree": int, "max_candidates": int, "graph_seed": int,
            "node_weight": float, "edge_weight": float, "lam_const": float, "tau_factor": float,
            "kappa": float, "edge_prob": float,
        }
        known = {f.name for f in fields(cls)}
        kw = {}
        for key, value in raw.items():
            key = key.strip().lower()
            if key not in known:
                raise InvalidSpec(f"unknown config key {key!r}")
            value = str(value).strip()
            if value.lower() in ("", "none"):
                continue
            kw[key] = kinds.get(key, lambda v: v.lower())(value)
        return cls(**kw)


def load_config(path):
    """Read an :class:`ExperimentConfig` from an INI file."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise InvalidSpec(f"cannot read config {path}")
    if not parser.has_section("experiment"):
        raise InvalidSpec("config needs an [experiment] section")
    return ExperimentConfig.from_mapping(dict(parser.items("experiment")))


def trial_seed(master, p, n, rho, trial):
    """Independent stream keyed by the cell's values and the trial index.

    Keys use values rather than grid positions, so adding cells to a sweep
    leaves every existing cell's randomness unchanged.
    """
    key = (int(p), int(n), int(round(rho * 1_000_000)), int(trial))
    return np.random.SeedSequence(int(master), spawn_key=key)


def _selector(cfg, rho):
    if cfg.method == "glasso":
        return GraphicalLassoSelector(lam_const=cfg.lam_const, tau_factor=cfg.tau_factor, rho=rho)
    method = {"nodewise_tree": "tree", "nodewise_general": "general", "corr_decay": "corr_decay"}[cfg.method]
    degree = 1 if method == "tree" else cfg.degree
    max_cand = cfg.max_candidates
    if method == "corr_decay" and max_cand is None and cfg.kappa is None:
        max_cand = int(2.5 * cfg.degree)
    return NodewiseSelector(method=method, degree=degree, kappa=cfg.kappa, max_candidates=max_cand,
                            lam_const=cfg.lam_const, tau_factor=cfg.tau_factor, combine=cfg.combine,
                            rho=rho, radius="auto")


def _sampler_mode(cfg, model):
    if cfg.sampler != "auto":
        return cfg.sampler
    return "exact" if model.m ** model.p <= 2**16 else "junction_tree"


def run_trial(cfg, model, truth, n, rho, seed):
    """One sample-corrupt-estimate round; returns (success, precision, recall, ms).

    Solver failures count as unsuccessful trials.
    """
    rng = np.random.default_rng(seed)
    data = sample(model, n, SamplerConfig(mode=_sampler_mode(cfg, model)), rng)
    if rho > 0:
        data = corrupt_missing(data, rho, rng)
    start = time.perf_counter()
    try:
        est = _selector(cfg, rho).fit(data).edges_
    except (GencovError, np.linalg.LinAlgError, ValueError) as exc:
        logger.info("trial failed (p=%d, n=%d, rho=%g): %s", model.p, n, rho, exc)
        return False, 0.0, 0.0, (time.perf_counter() - start) * 1e3
    ms = (time.perf_counter() - start) * 1e3
    hits = len(est & truth)
    precision = hits / len(est) if est else float(not truth)
    recall = hits / len(truth) if truth else 1.0
    return est == truth, precision, recall, ms


@dataclass
class PhaseRow:
    family: str
    p: int
    n: int
    n_over_logp: float
    rho: float
    method: str
    success_count: int
    trials: int
    mean_runtime_ms: float
    lam_const: float
    tau_factor: float
    mean_precision: float
    mean_recall: float

    @property
    def success_rate(self):
        return self.success_count / self.trials

    def as_record(self):
        rec = asdict(self)
        rec["success_rate"] = self.success_rate
        return rec


@dataclass
class PhaseCurve:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def select(self, **match):
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]

    def crossing(self, p, rho=0.0, level=0.5):
        """Rescaled sample size where the success rate first reaches ``level``.

        Linear interpolation between the bracketing grid points; ``None``
        if the curve never gets there.
        """
        rows = sorted(self.select(p=p, rho=rho), key=lambda r: r.n)
        prev = None
        for r in rows:
            if r.success_rate >= level:
                if prev is None or prev.success_rate >= level:
                    return r.n_over_logp
                w = (level - prev.success_rate) / (r.success_rate - prev.success_rate)
                return prev.n_over_logp + w * (r.n_over_logp - prev.n_over_logp)
            prev = r
        return None


def _run_cell(cfg, model, truth, p, n, rho):
    out = [run_trial(cfg, model, truth, n, rho, trial_seed(cfg.seed, p, n, rho, t)) for t in range(cfg.trials)]
    succ = sum(o[0] for o in out)
    return PhaseRow(cfg.family, p, n, n / math.log(p), rho, cfg.method, succ, cfg.trials,
                    float(np.mean([o[3] for o in out])), cfg.lam_const, cfg.tau_factor,
                    float(np.mean([o[1] for o in out])), float(np.mean([o[2] for o in out])))


def run_phase_transition(cfg, out=None, n_jobs=1, progress=None):
    """Run every ``(p, n, rho)`` cell and return the :class:`PhaseCurve`.

    Rows are written to ``out`` (if given) as each cell finishes, in
    ``p, rho, n`` order. ``n_jobs > 1`` spreads cells over joblib workers;
    the output does not depend on the worker count.
    """
    cells = []
    for p in cfg.p:
        graph = generate_graph(cfg.graph_spec(p))
        model = ising_model(graph, cfg.node_weight, cfg.edge_weight)
        for rho in cfg.rho:
            for n in cfg.sample_sizes(p):
                cells.append((model, graph.edges, p, n, rho))
    curve = PhaseCurve()
    handle = open(out, "w", newline="") if out is not None else None
    try:
        writer = None
        if handle is not None:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_HEADER + EXTRA_COLUMNS)
            handle.flush()
        if n_jobs in (None, 1):
            rows = (_run_cell(cfg, *c) for c in cells)
        else:
            from joblib import Parallel, delayed

            rows = Parallel(n_jobs=n_jobs, return_as="generator")(delayed(_run_cell)(cfg, *c) for c in cells)
        for row in rows:
            curve.rows.append(row)
            if writer is not None:
                writer.writerow(_format_row(row))
                handle.flush()
            if progress is not None:
                progress(row)
    finally:
        if handle is not None:
            handle.close()
    return curve


def _format_row(row):
    rec = row.as_record()
    out = []
    for key in CSV_HEADER + EXTRA_COLUMNS:
        v = rec[key]
        out.append(repr(float(v)) if isinstance(v, float) else v)
    return out


def emit_results(curve, path):
    """Write ``curve`` as CSV: the fixed header columns, then the extra columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER + EXTRA_COLUMNS)
        for row in curve.rows:
            writer.writerow(_format_row(row))
    return Path(path)


def read_results(path):
    """Inverse of :func:`emit_results`."""
    curve = PhaseCurve()
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            trials = int(rec["trials"])
            count = rec.get("success_count")
            count = int(count) if count not in (None, "") else round(float(rec["success_rate"]) * trials)
            curve.rows.append(PhaseRow(
                rec["family"], int(rec["p"]), int(rec["n"]), float(rec["n_over_logp"]), float(rec["rho"]),
                rec["method"], count, trials, float(rec["mean_runtime_ms"]),
                float(rec.get("lam_const") or "nan"), float(rec.get("tau_factor") or "nan"),
                float(rec.get("mean_precision") or "nan"), float(rec.get("mean_recall") or "nan"),
            ))
    return curve


@dataclass
class PopulationReport:
    """Population quantities for one model and basis, plus structure checks."""

    covariance: object
    inverse: object
    structure: list
    passed: bool

    def format(self, digits=2):
        basis = self.covariance.basis
        labels = [",".join(str(v + 1) for v in c) + (":" + ",".join(map(str, j)) if basis.m > 2 else "")
                  for c, j in basis.entries]
        lines = ["mean: " + " ".join(f"{x:.{digits + 2}f}" for x in self.covariance.mean)]
        for name, mat in (("covariance", self.covariance.matrix), ("inverse", self.inverse.matrix)):
            lines.append(f"{name}:")
            width = max(10, max(len(lab) for lab in labels) + 1)
            lines.append(" " * width + "".join(f"{lab:>{width}}" for lab in labels))
            for lab, row in zip(labels, mat):
                lines.append(f"{lab:>{width}}" + "".join(f"{x:>{width}.{digits}f}" for x in row))
        for name, rep in self.structure:
            status = "pass" if rep.passed else "FAIL"
            lines.append(f"{name}: {status} (max forbidden {rep.max_forbidden:.3g}, "
                         f"min allowed {rep.min_allowed:.3g})")
        return "\n".join(lines)


def run_population_check(model, basis="vertices", tol=1e-8):
    """Exact covariance and inverse for ``basis``, with the applicable structure checks.

    ``basis`` is ``"vertices"``, ``"cliques"`` (every clique of a
    triangulation) or a :class:`StatisticBasis`. Vertex bases are checked
    for graph structure (zero exactly at non-edges); augmented bases are
    checked against the separator statement on their added sets; clique
    bases against the full block statement.
    """
    graph = model.graph()
    jt = build_junction_tree(triangulate(graph))
    structure = []
    if isinstance(basis, str) and basis == "cliques":
        basis = StatisticBasis(jt.all_cliques(), model.m)
        structure.append(("block structure", verify_theorem1(model, jt, tol)))
    elif isinstance(basis, str) and basis == "vertices":
        basis = StatisticBasis.vertices_of(model.p, model.m)
        structure.append(("graph structure", _vertex_structure(model, basis, tol)))
    elif isinstance(basis, str):
        raise InvalidSpec(f"unknown basis {basis!r}")
    else:
        structure.append(("separator structure", _augmented_structure(model, basis, tol)))
    cov = generalized_covariance(model, basis)
    inv = inverse_and_blocks(cov)
    return PopulationReport(cov, inv, structure, all(rep.passed for _, rep in structure))


def _vertex_structure(model, basis, tol):
    """Zero blocks exactly at the non-edges of the original graph."""
    graph = model.graph()
    inv = inverse_and_blocks(generalized_covariance(model, basis))
    pairs = [((s,), (t,)) for s in range(model.p) for t in range(s + 1, model.p)]
    return _check_pairs(inv, pairs, lambda a, b: not graph.has_edge(a[0], b[0]), tol, None)


def _augmented_structure(model, basis, tol):
    """Vertex pairs cut apart by the added sets must have zero blocks."""
    graph = model.graph()
    added = [set(c) for c in basis.cliques if len(c) > 1]
    inv = inverse_and_blocks(generalized_covariance(model, basis))
    singles = [c[0] for c in basis.cliques if len(c) == 1]
    pairs = [((s,), (t,)) for i, s in enumerate(singles) for t in singles[i + 1:]]
    return _check_pairs(inv, pairs, lambda a, b: _separated_by(graph, a[0], b[0], added), tol, None)


def _separated_by(graph, s, t, added):
    """True if removing the union of some added set disconnects ``s`` and ``t``."""
    for sep in added:
        if s in sep or t in sep:
            continue
        comps = graph.components(removed=sep)
        if not any(s in c and t in c for c in comps):
            return True
    return False
