"""Layered Green-function graphs of fine-grained families.

Vertices are basis vectors, one layer per measurement stage, with layer 0
holding the initial eigenstates. The edge from vertex ``j`` of layer ``k`` to
vertex ``i`` of layer ``k + 1`` carries ``G = <phi_i|U|phi_j>`` and exists
when ``|G|`` exceeds ``zero_threshold``. For rank-1 families with a pure
initial state, a pair of distinct forward paths between the same endpoints
(a loop) contributes exactly its loop product to the coherence matrix.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import GuardExceededError, InvalidProjectorSetError
from .histories import ConsistencyReport, HistoryFamily, aligned_eigensystem
from .quantum import ProjectorSet

ZERO_THRESHOLD = 1e-12
MAX_PATHS = 10**6
MAX_PAIRS = 10**6


@dataclass(frozen=True, eq=False)
class GreenGraph:
    """Basis layers and Green-function weight matrices between them.

    ``weights[k][i, j]`` links vertex ``j`` of layer ``k`` to vertex ``i`` of
    layer ``k + 1``. ``start_weights`` holds the initial-state population of
    every layer-0 vertex.
    """

    layers: tuple
    stages: tuple
    weights: tuple
    start_weights: np.ndarray
    labels: tuple = ()
    zero_threshold: float = ZERO_THRESHOLD

    @property
    def n_layers(self):
        return len(self.layers)

    @property
    def layer_sizes(self):
        return tuple(b.shape[1] for b in self.layers)

    @property
    def n_vertices(self):
        return int(sum(self.layer_sizes))

    def adjacency(self, k):
        return np.abs(self.weights[k]) > self.zero_threshold

    def edges(self):
        """``(layer, j, i, G)`` for every present edge, layer-major and index-sorted."""
        out = []
        for k, w in enumerate(self.weights):
            for j in range(w.shape[1]):
                for i in range(w.shape[0]):
                    if abs(w[i, j]) > self.zero_threshold:
                        out.append((k, j, i, complex(w[i, j])))
        return out

    def live_starts(self):
        return [int(j) for j in np.flatnonzero(self.start_weights > ZERO_THRESHOLD)]

    def unitarity_error(self):
        """Worst ``|G^dag G - 1|`` over the square weight matrices."""
        errs = [
            np.abs(w.conj().T @ w - np.eye(w.shape[1])).max()
            for w in self.weights
            if w.shape[0] == w.shape[1]
        ]
        return float(max(errs, default=0.0))


@dataclass(frozen=True)
class LoopPair:
    """Two distinct forward paths sharing their first and last vertices."""

    start: int
    end: int
    path1: tuple
    path2: tuple


def build_graph(circuit, bases, stages=None, start_weights=None, zero_threshold=ZERO_THRESHOLD):
    """Green graph of rank-1 ``bases`` placed at ``stages`` of ``circuit``.

    ``bases[0]`` is the layer of initial states. By default the layers sit at
    stages ``0..n`` and the start weights are ``<phi_j|rho|phi_j>``.
    """
    bases = list(bases)
    if stages is None:
        stages = tuple(range(len(bases)))
        if len(bases) != circuit.n_stages + 1:
            raise ValueError(
                f"need {circuit.n_stages + 1} bases (initial layer plus one per gate), got {len(bases)}"
            )
    stages = tuple(int(s) for s in stages)
    if len(stages) != len(bases) or any(b < a for a, b in zip(stages, stages[1:])):
        raise ValueError("stages must be non-decreasing, one per basis")
    layers = []
    for b in bases:
        if isinstance(b, ProjectorSet):
            if not b.is_fine:
                raise InvalidProjectorSetError("graph analysis needs rank-1 projector sets")
            layers.append(b.vectors())
        else:
            layers.append(np.asarray(b, dtype=complex))
    weights = []
    for k in range(len(layers) - 1):
        u = circuit.unitary_between(stages[k], stages[k + 1])
        weights.append(layers[k + 1].conj().T @ u @ layers[k])
    if start_weights is None:
        rho = circuit.initial_density()
        l0 = layers[0]
        start_weights = np.einsum("xj,xy,yj->j", l0.conj(), rho, l0).real
    labels = tuple(
        tuple(b.labels) if isinstance(b, ProjectorSet) else tuple(str(i) for i in range(l.shape[1]))
        for b, l in zip(bases, layers)
    )
    return GreenGraph(
        tuple(layers), stages, tuple(weights), np.asarray(start_weights, dtype=float), labels, zero_threshold
    )


def graph_from_family(family, zero_threshold=ZERO_THRESHOLD):
    """Graph whose first layer is the eigenbasis of the initial state."""
    lam, vecs = aligned_eigensystem(family.initial_density())
    init = ProjectorSet.from_basis(vecs, tuple(f"psi{j}" for j in range(family.dim)))
    return build_graph(
        family.circuit,
        [init, *family.sets],
        (0, *family.stages),
        start_weights=lam,
        zero_threshold=zero_threshold,
    )


def _paths(graph, start, end, limit=MAX_PATHS):
    """All forward paths from ``start`` (layer 0) to ``end`` (last layer), DFS order."""
    last = graph.n_layers - 1
    adj = [graph.adjacency(k) for k in range(last)]
    # prune vertices that cannot reach ``end``
    reach = [None] * graph.n_layers
    reach[last] = np.zeros(graph.layer_sizes[last], dtype=bool)
    reach[last][end] = True
    for k in range(last - 1, -1, -1):
        reach[k] = (adj[k] & reach[k + 1][:, None]).any(axis=0)
    if not reach[0][start]:
        return []
    out = []
    stack = [(start,)]
    while stack:
        path = stack.pop()
        k = len(path) - 1
        if k == last:
            out.append(path)
            if len(out) > limit:
                raise GuardExceededError(f"more than {limit} paths between {start} and {end}")
            continue
        nxt = np.flatnonzero(adj[k][:, path[-1]] & reach[k + 1])
        for i in nxt[::-1]:
            stack.append(path + (int(i),))
    return out


def enumerate_loop_pairs(graph, start_vertex, end_vertex, limit=MAX_PAIRS):
    """Every unordered pair of distinct forward paths between the two endpoints."""
    if not 0 <= start_vertex < graph.layer_sizes[0]:
        raise IndexError(f"start vertex {start_vertex} out of range")
    if not 0 <= end_vertex < graph.layer_sizes[-1]:
        raise IndexError(f"end vertex {end_vertex} out of range")
    paths = _paths(graph, start_vertex, end_vertex)
    n = len(paths)
    if n * (n - 1) // 2 > limit:
        raise GuardExceededError(f"{n * (n - 1) // 2} loop pairs exceed the guard {limit}")
    return [
        LoopPair(start_vertex, end_vertex, paths[a], paths[b])
        for a in range(n)
        for b in range(a + 1, n)
    ]


def all_loop_pairs(graph, limit=MAX_PAIRS):
    """Loop pairs for every populated start vertex and every end vertex."""
    out = []
    for s in graph.live_starts():
        for e in range(graph.layer_sizes[-1]):
            out.extend(enumerate_loop_pairs(graph, s, e, limit - len(out)))
    return out


def path_amplitude(graph, path, span=None):
    a, b = (0, graph.n_layers - 1) if span is None else span
    amp = 1.0 + 0j
    for k in range(a, b):
        amp *= graph.weights[k][path[k + 1], path[k]]
    return amp


def loop_product(graph, pair, span=None):
    """``prod(path1 weights) * conj(prod(path2 weights))``.

    Over the full graph this equals the coherence function of the two
    histories for a pure initial state. ``span=(a, b)`` restricts the product
    to the edges between layers ``a`` and ``b``.
    """
    return complex(path_amplitude(graph, pair.path1, span) * np.conj(path_amplitude(graph, pair.path2, span)))


def check_weak_via_loops(graph, epsilon=1e-10):
    """Weak consistency from loops: every loop product must be purely imaginary.

    Products are scaled by the population of the start vertex. No loops at all
    passes.
    """
    worst, max_v, n = [], 0.0, 0
    for pair in all_loop_pairs(graph):
        n += 1
        val = graph.start_weights[pair.start] * loop_product(graph, pair)
        worst.append((abs(val.real), pair))
        max_v = max(max_v, abs(val.real))
    worst.sort(key=lambda w: -w[0])
    witnesses = [(w[1].path1, w[1].path2) for w in worst[:5] if w[0] > epsilon]
    details = {"loops": n}
    if n == 0:
        details["note"] = "no loops; weakly consistent"
    return ConsistencyReport("weak", max_v <= epsilon, max_v, epsilon, witnesses, details)


def path_counts(graph):
    """``counts[e, s]``: number of forward paths from start ``s`` to end ``e``."""
    counts = np.eye(graph.layer_sizes[0])
    for k in range(graph.n_layers - 1):
        counts = graph.adjacency(k).astype(float) @ counts
    return counts


def check_medium_via_paths(graph):
    """Medium consistency from paths: at most one path joins any populated start to any end."""
    counts = path_counts(graph)[:, graph.live_starts()]
    excess = float(max(counts.max() - 1.0, 0.0)) if counts.size else 0.0
    witnesses = []
    if excess > 0:
        live = graph.live_starts()
        e, s = np.unravel_index(int(np.argmax(counts)), counts.shape)
        witnesses.append((live[s], int(e)))
    return ConsistencyReport(
        "medium", excess == 0.0, excess, 0.0, witnesses, {"max_paths": int(counts.max()) if counts.size else 0}
    )


# ---------------------------------------------------------------------------
# DOT export


def _edge_kind(g, tol=1e-12):
    scale = max(abs(g), 1.0) * tol
    if abs(g.imag) <= scale:
        return "real"
    if abs(g.real) <= scale:
        return "imaginary"
    return "complex"


def format_complex(g, digits=4):
    kind = _edge_kind(g)
    if kind == "real":
        return f"{g.real:.{digits}f}"
    if kind == "imaginary":
        return f"{g.imag:.{digits}f}i"
    return f"({g.real:.{digits}f}{g.imag:+.{digits}f}i)"


_STYLE = {
    "real": "style=solid",
    "imaginary": "style=bold, penwidth=3",
    "complex": 'color="black:black"',
}


def export_dot(graph):
    """Deterministic DOT text: layers left to right, vertices by index.

    Real weights are solid edges, purely imaginary weights heavy edges and
    other complex weights double edges.
    """
    lines = ["digraph green {", "  rankdir=LR;", '  node [shape=circle, fontsize=10];']
    for k, size in enumerate(graph.layer_sizes):
        labels = graph.labels[k] if k < len(graph.labels) else ()
        lines.append(f"  subgraph layer{k} {{")
        lines.append("    rank=same;")
        for i in range(size):
            label = labels[i] if i < len(labels) else str(i)
            lines.append(f'    "L{k}_{i}" [label="{label}"];')
        lines.append("  }")
    for k, j, i, g in graph.edges():
        style = _STYLE[_edge_kind(g)]
        lines.append(f'  "L{k}_{j}" -> "L{k + 1}_{i}" [label="{format_complex(g)}", {style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def loop_table(graph, span=None):
    """Rows ``(start, end, path1, path2, product)`` for every loop pair."""
    return [
        (p.start, p.end, p.path1, p.path2, loop_product(graph, p, span))
        for p in all_loop_pairs(graph)
    ]


def family_is_fine(family: HistoryFamily):
    return all(s.is_fine for s in family.sets)
