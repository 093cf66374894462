"""Undirected graphs, min-fill triangulation and junction trees.

Vertices are the integers ``0..p-1``. Edges are stored as sorted pairs so
``(s, t)`` and ``(t, s)`` denote the same edge.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import InvalidSpec, NotChordal

__all__ = [
    "Graph",
    "JunctionTree",
    "GraphFamilySpec",
    "triangulate",
    "is_chordal",
    "perfect_elimination_order",
    "build_junction_tree",
    "generate_graph",
    "dino_graph",
    "singleton_separable",
    "read_graph",
    "write_graph",
    "FAMILIES",
]

FAMILIES = ("chain", "cycle", "grid2d", "erdos_renyi", "star", "dino", "custom")


def _edge(s, t):
    s, t = int(s), int(t)
    if s == t:
        raise InvalidSpec(f"self-loop at vertex {s}")
    return (s, t) if s < t else (t, s)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``0..p-1``.

    ``fill_edges`` is set by :func:`triangulate` and lists the chords it
    added; it does not take part in equality.
    """

    p: int
    edges: frozenset = frozenset()
    fill_edges: frozenset = field(default=frozenset(), compare=False)

    def __post_init__(self):
        if int(self.p) < 1:
            raise InvalidSpec("a graph needs at least one vertex")
        edges = frozenset(_edge(s, t) for s, t in self.edges)
        for s, t in edges:
            if not (0 <= s < self.p and 0 <= t < self.p):
                raise InvalidSpec(f"edge ({s}, {t}) out of range for p={self.p}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "fill_edges", frozenset(_edge(s, t) for s, t in self.fill_edges))

    @property
    def vertices(self):
        return range(self.p)

    def has_edge(self, s, t):
        return s != t and _edge(s, t) in self.edges

    def adjacency(self):
        """Adjacency sets indexed by vertex."""
        adj = [set() for _ in range(self.p)]
        for s, t in self.edges:
            adj[s].add(t)
            adj[t].add(s)
        return adj

    def neighbors(self, s):
        return frozenset(t for e in self.edges if s in e for t in e if t != s)

    def degree(self, s):
        return len(self.neighbors(s))

    def max_degree(self):
        adj = self.adjacency()
        return max(len(a) for a in adj)

    def adjacency_matrix(self):
        a = np.zeros((self.p, self.p), dtype=bool)
        for s, t in self.edges:
            a[s, t] = a[t, s] = True
        return a

    def with_edges(self, extra):
        return Graph(self.p, self.edges | frozenset(_edge(s, t) for s, t in extra))

    def components(self, removed=()):
        """Connected components after deleting the vertices in ``removed``."""
        removed = set(removed)
        adj = self.adjacency()
        seen, comps = set(removed), []
        for v in range(self.p):
            if v in seen:
                continue
            comp, stack = set(), [v]
            seen.add(v)
            while stack:
                u = stack.pop()
                comp.add(u)
                for w in adj[u]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            comps.append(frozenset(comp))
        return comps

    def is_tree_or_forest(self):
        return len(self.edges) == self.p - len(self.components())

    def __repr__(self):
        return f"Graph(p={self.p}, edges={sorted(self.edges)})"


def perfect_elimination_order(graph):
    """Return a perfect elimination ordering of ``graph`` or ``None``.

    Uses maximum cardinality search; the reverse of the visit order is a
    perfect elimination ordering exactly when the graph is chordal.
    """
    adj = graph.adjacency()
    weight = [0] * graph.p
    numbered = [False] * graph.p
    visit = []
    for _ in range(graph.p):
        v = max((u for u in range(graph.p) if not numbered[u]), key=lambda u: (weight[u], -u))
        numbered[v] = True
        visit.append(v)
        for w in adj[v]:
            if not numbered[w]:
                weight[w] += 1
    order = visit[::-1]
    pos = {v: i for i, v in enumerate(order)}
    for v in order:
        later = [w for w in adj[v] if pos[w] > pos[v]]
        if not later:
            continue
        parent = min(later, key=pos.__getitem__)
        if any(w != parent and w not in adj[parent] for w in later):
            return None
    return order


def is_chordal(graph):
    return perfect_elimination_order(graph) is not None


def triangulate(graph):
    """Chordal supergraph by greedy minimum-fill elimination.

    Ties are broken by the lowest vertex index. The added chords are stored in
    ``fill_edges`` of the returned graph.
    """
    adj = graph.adjacency()
    remaining = set(range(graph.p))
    fill = set()
    while remaining:
        best, best_fill = None, None
        for v in sorted(remaining):
            nb = sorted(adj[v] & remaining)
            missing = [(a, b) for a, b in itertools.combinations(nb, 2) if b not in adj[a]]
            if best_fill is None or len(missing) < len(best_fill):
                best, best_fill = v, missing
                if not missing:
                    break
        for a, b in best_fill:
            adj[a].add(b)
            adj[b].add(a)
            fill.add(_edge(a, b))
        remaining.remove(best)
    return Graph(graph.p, graph.edges | fill, fill_edges=fill)


@dataclass(frozen=True)
class JunctionTree:
    """Maximal cliques of a chordal graph joined into a tree.

    ``separators[k]`` is the intersection of the cliques joined by
    ``tree_edges[k]``.
    """

    cliques: tuple
    tree_edges: tuple
    separators: tuple

    @property
    def has_singleton_separators(self):
        return all(len(s) <= 1 for s in self.separators)

    def neighbors(self, i):
        return [b if a == i else a for a, b in self.tree_edges if i in (a, b)]

    def path(self, i, j):
        """Clique indices on the unique tree path from ``i`` to ``j``."""
        prev = {i: None}
        stack = [i]
        while stack:
            u = stack.pop()
            for w in self.neighbors(u):
                if w not in prev:
                    prev[w] = u
                    stack.append(w)
        out = [j]
        while out[-1] != i:
            out.append(prev[out[-1]])
        return out[::-1]

    def running_intersection_holds(self):
        """Check that every vertex's cliques induce a connected subtree."""
        vertices = set().union(*self.cliques) if self.cliques else set()
        for v in vertices:
            holding = {k for k, c in enumerate(self.cliques) if v in c}
            start = next(iter(holding))
            seen, stack = {start}, [start]
            while stack:
                u = stack.pop()
                for w in self.neighbors(u):
                    if w in holding and w not in seen:
                        seen.add(w)
                        stack.append(w)
            if seen != holding:
                return False
        return True

    def all_cliques(self):
        """Every nonempty subset of a maximal clique, sorted by size then value."""
        subsets = set()
        for c in self.cliques:
            for k in range(1, len(c) + 1):
                subsets.update(itertools.combinations(sorted(c), k))
        return sorted(subsets, key=lambda a: (len(a), a))

    def separator_subsets(self):
        """``pow`` of the separator sets."""
        subsets = set()
        for s in self.separators:
            for k in range(1, len(s) + 1):
                subsets.update(itertools.combinations(sorted(s), k))
        return sorted(subsets, key=lambda a: (len(a), a))


def build_junction_tree(chordal):
    """Junction tree of a chordal graph.

    Raises
    ------
    NotChordal
        If ``chordal`` has no perfect elimination ordering.
    """
    order = perfect_elimination_order(chordal)
    if order is None:
        raise NotChordal("graph has a chordless cycle of length > 3")
    adj = chordal.adjacency()
    pos = {v: i for i, v in enumerate(order)}
    candidates = [frozenset({v} | {w for w in adj[v] if pos[w] > pos[v]}) for v in order]
    cliques = [c for c in candidates if not any(c < other for other in candidates)]
    cliques = sorted(set(cliques), key=lambda c: sorted(c))
    k = len(cliques)
    pairs = sorted(
        ((len(cliques[i] & cliques[j]), i, j) for i in range(k) for j in range(i + 1, k)),
        key=lambda w: (-w[0], w[1], w[2]),
    )
    parent = list(range(k))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree_edges = []
    for _, i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            tree_edges.append((i, j))
    jt = JunctionTree(
        cliques=tuple(cliques),
        tree_edges=tuple(tree_edges),
        separators=tuple(cliques[i] & cliques[j] for i, j in tree_edges),
    )
    if not jt.running_intersection_holds():
        raise NotChordal("maximum-weight clique tree violates running intersection")
    return jt


def singleton_separable(graph, s, t):
    """True if ``s`` and ``t`` are disconnected by deleting at most one other vertex."""
    if s == t or graph.has_edge(s, t):
        return False
    for removed in [()] + [(v,) for v in range(graph.p) if v not in (s, t)]:
        if not any(s in c and t in c for c in graph.components(removed)):
            return True
    return False


@dataclass(frozen=True)
class GraphFamilySpec:
    """Parameters for one of the benchmark graph families.

    ``edge_prob`` applies to ``erdos_renyi`` and defaults to ``3/p``;
    ``hub_degree`` applies to ``star`` and defaults to ``floor(log p)``.
    """

    family: str
    p: int
    edge_prob: float | None = None
    hub_degree: int | None = None
    seed: int | None = None
    edges: tuple = ()

    def validate(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.p < 1:
            raise InvalidSpec("p must be positive")
        if self.family == "grid2d" and math.isqrt(self.p) ** 2 != self.p:
            raise InvalidSpec(f"grid2d needs a perfect-square p, got {self.p}")
        if self.family == "cycle" and self.p < 3:
            raise InvalidSpec("a cycle needs p >= 3")
        if self.family == "dino" and self.p != 13:
            raise InvalidSpec("the dino fixture has p = 13")
        if self.edge_prob is not None and not 0.0 <= self.edge_prob <= 1.0:
            raise InvalidSpec("edge_prob must lie in [0, 1]")
        if self.family == "star" and self.p < 2:
            raise InvalidSpec("a star needs p >= 2")


def _star_edges(p, hub_degree):
    # leftover vertices hang off the last leaf as a pendant path
    d = max(1, min(hub_degree, p - 1))
    edges = [(0, leaf) for leaf in range(1, d + 1)]
    edges += [(v - 1, v) for v in range(d + 1, p)]
    return edges


def generate_graph(spec, rng=None):
    """Build a graph from a :class:`GraphFamilySpec`.

    Only ``erdos_renyi`` is random; it uses ``rng`` if given, else a
    generator seeded with ``spec.seed``.
    """
    spec.validate()
    p, fam = spec.p, spec.family
    if fam == "chain":
        edges = [(i, i + 1) for i in range(p - 1)]
    elif fam == "cycle":
        edges = [(i, (i + 1) % p) for i in range(p)]
    elif fam == "grid2d":
        k = math.isqrt(p)
        edges = [(r * k + c, r * k + c + 1) for r in range(k) for c in range(k - 1)]
        edges += [(r * k + c, (r + 1) * k + c) for r in range(k - 1) for c in range(k)]
    elif fam == "star":
        hub = spec.hub_degree if spec.hub_degree is not None else int(math.floor(math.log(p)))
        edges = _star_edges(p, hub)
    elif fam == "erdos_renyi":
        prob = spec.edge_prob if spec.edge_prob is not None else min(1.0, 3.0 / p)
        if rng is None:
            rng = np.random.default_rng(spec.seed)
        iu, ju = np.triu_indices(p, k=1)
        keep = rng.random(iu.size) < prob
        edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    elif fam == "dino":
        return dino_graph()
    else:
        edges = list(spec.edges)
    return Graph(p, frozenset(edges))


def dino_graph():
    """13-vertex, 15-edge block graph whose junction tree has singleton separators."""
    text = resources.files("gencov").joinpath("data/dino.txt").read_text()
    return parse_graph(text)


def parse_graph(text):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("p "):
        raise InvalidSpec("graph text must start with 'p <count>'")
    try:
        p = int(lines[0].split()[1])
        pairs = [tuple(int(v) for v in ln.split()) for ln in lines[1:]]
    except (ValueError, IndexError) as exc:
        raise InvalidSpec(f"malformed graph text: {exc}") from None
    for pair in pairs:
        if len(pair) != 2:
            raise InvalidSpec(f"expected 's t' pairs, got {pair}")
    return Graph(p, frozenset(pairs))


def format_graph(graph):
    lines = [f"p {graph.p}"] + [f"{s} {t}" for s, t in sorted(graph.edges)]
    return "\n".join(lines) + "\n"


def read_graph(path):
    return parse_graph(Path(path).read_text())


def write_graph(graph, path):
    Path(path).write_text(format_graph(graph))
