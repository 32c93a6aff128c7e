"""
Weighted MaxCut instances: generation, exact solution and distances.

Conventions
-----------
* A cut assignment is a string of ``0``/``1`` characters; character ``i``
  is the side of vertex ``i``.
* Basis-state index ``k`` corresponds to the assignment whose vertex ``i``
  bit is ``(k >> i) & 1`` (vertex 0 is the least-significant bit).
* Objectives are minimized: the value of an assignment is the negated
  weight of the edges crossing the cut.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import FrozenSet, Iterable, Sequence, Tuple

import networkx as nx
import numpy as np

from qaoa_precond import rng as rng_streams
from qaoa_precond.errors import ProblemError, ProblemGenerationError

logger = logging.getLogger(__name__)

MIN_VERTICES = 2
MAX_VERTICES = 24
MAX_RESAMPLES = 1000
# Basis states scored per block in brute_force
ENUMERATION_BLOCK = 1 << 16

Edge = Tuple[int, int, float]


#------------------------------------------------------------------------
# Domain types
#------------------------------------------------------------------------
@dataclass(frozen=True)
class WeightedGraph:
    """
    An undirected MaxCut instance.

    Edges are stored as ``(u, v, w)`` with ``u < v`` in the order they were
    generated or read; that order fixes the floating-point accumulation of
    every cut value.
    """

    n_vertices: int
    edges: Tuple[Edge, ...]
    seed: int = 0

    def __post_init__(self):
        if self.n_vertices < 1:
            raise ProblemError(f"n_vertices must be positive, got {self.n_vertices}")
        edges = tuple((int(u), int(v), float(w)) for u, v, w in self.edges)
        seen = set()
        for u, v, w in edges:
            if not 0 <= u < v < self.n_vertices:
                raise ProblemError(f"edge ({u}, {v}) needs 0 <= u < v < {self.n_vertices}")
            if (u, v) in seen:
                raise ProblemError(f"duplicate edge ({u}, {v})")
            if not (math.isfinite(w) and w > 0.0):
                raise ProblemError(f"edge ({u}, {v}) weight must be positive and finite, got {w!r}")
            seen.add((u, v))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "seed", int(self.seed) & rng_streams.SEED_MASK)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def total_weight(self) -> float:
        return math.fsum(w for _, _, w in self.edges)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_vertices))
        graph.add_weighted_edges_from(self.edges)
        return graph


@dataclass(frozen=True, order=True)
class CutAssignment:
    bits: str

    def __post_init__(self):
        if not self.bits or set(self.bits) - {"0", "1"}:
            raise ProblemError(f"assignment must be a non-empty 0/1 string, got {self.bits!r}")

    def __len__(self):
        return len(self.bits)

    def complement(self) -> "CutAssignment":
        return CutAssignment(self.bits.translate(str.maketrans("01", "10")))

    def canonical(self) -> "CutAssignment":
        """Representative of the complement class with vertex 0 on side 0."""
        return self if self.bits[0] == "0" else self.complement()

    @property
    def index(self) -> int:
        return sum(1 << i for i, bit in enumerate(self.bits) if bit == "1")

    @classmethod
    def from_index(cls, index: int, n_vertices: int) -> "CutAssignment":
        return cls("".join("1" if (index >> i) & 1 else "0" for i in range(n_vertices)))


@dataclass(frozen=True)
class GroundTruth:
    optimal_value: float
    optimal_assignments: FrozenSet[CutAssignment] = field(default_factory=frozenset)

    def sorted_assignments(self):
        return sorted(self.optimal_assignments)


#------------------------------------------------------------------------
# Operations
#------------------------------------------------------------------------
def generate_problem(n: int, seed: int, density: float = 1.0,
                     weight_range: Tuple[float, float] = (1.0, 1.0),
                     max_resamples: int = MAX_RESAMPLES) -> WeightedGraph:
    """
    Draw a connected weighted graph from the seeded problem stream.

    Vertex pairs are visited in lexicographic order ``(0,1), (0,2), ...,
    (n-2,n-1)``.  For every pair two doubles are drawn from the stream: first
    the inclusion draw ``u1`` (the edge exists when ``u1 < density``), then
    the weight draw ``u2`` giving ``w = low + (high - low) * u2``.  Both draws
    happen whether or not the edge is kept, so the stream position never
    depends on earlier outcomes.  A disconnected draw is discarded and the
    next sweep continues on the same stream.

    Parameters
    ----------
    n : int
        Vertex count, ``2 <= n <= 24``.
    seed : int
        Master seed; the problem stream is ``stream(seed, "problem", n)``.
    density : float
        Edge inclusion probability in ``(0, 1]``.
    weight_range : (float, float)
        ``(low, high)`` with ``0 < low <= high``.
    max_resamples : int
        Sweeps tried before giving up.

    Raises
    ------
    ProblemError
        Arguments out of range.
    ProblemGenerationError
        No connected draw within ``max_resamples`` sweeps.
    """
    if not MIN_VERTICES <= n <= MAX_VERTICES:
        raise ProblemError(f"n must be in [{MIN_VERTICES}, {MAX_VERTICES}], got {n}")
    if not 0.0 < density <= 1.0:
        raise ProblemError(f"density must be in (0, 1], got {density}")
    low, high = (float(x) for x in weight_range)
    if not (low > 0.0 and high >= low and math.isfinite(high)):
        raise ProblemError(f"weight_range must satisfy 0 < low <= high, got {weight_range}")

    stream = rng_streams.stream(seed, rng_streams.PROBLEM, n)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    for attempt in range(max_resamples):
        draws = stream.random((len(pairs), 2))
        edges = [(u, v, low + (high - low) * float(wdraw))
                 for (u, v), (keep, wdraw) in zip(pairs, draws) if keep < density]
        graph = WeightedGraph(n, tuple(edges), seed)
        if edges and nx.is_connected(graph.to_networkx()):
            if attempt:
                logger.debug("connected graph after %d resamples (n=%d, density=%g)",
                             attempt, n, density)
            return graph
    raise ProblemGenerationError(
        f"no connected graph with n={n}, density={density} after {max_resamples} resamples")


def _check_length(g: WeightedGraph, a: CutAssignment):
    if len(a) != g.n_vertices:
        raise ProblemError(f"assignment length {len(a)} does not match {g.n_vertices} vertices")


def cut_value(g: WeightedGraph, a: CutAssignment) -> float:
    """Negated weight of the edges crossing the cut ``a``."""
    _check_length(g, a)
    bits = a.bits
    value = 0.0
    for u, v, w in g.edges:
        crossing = 1.0 if bits[u] != bits[v] else 0.0
        value -= w * crossing
    return value


def basis_energies(g: WeightedGraph, indices: np.ndarray) -> np.ndarray:
    """
    Cut values for an array of basis-state indices.

    Accumulates edge by edge in the same order and with the same arithmetic
    as ``cut_value``, so both give bit-identical results.
    """
    indices = np.asarray(indices, dtype=np.int64)
    values = np.zeros(indices.shape, dtype=np.float64)
    for u, v, w in g.edges:
        crossing = (((indices >> u) ^ (indices >> v)) & 1).astype(np.float64)
        values -= w * crossing
    return values


def brute_force(g: WeightedGraph, block: int = ENUMERATION_BLOCK) -> GroundTruth:
    """
    Exact minimum over all cuts.

    Vertex 0 is pinned to side 0, which leaves ``2**(n-1)`` states (the even
    basis indices).  They are scored in blocks of ``block`` states; the
    minimizers are the states whose value equals the minimum exactly, so the
    result does not depend on the block size.
    """
    n = g.n_vertices
    if n > MAX_VERTICES:
        raise ProblemError(f"brute force supports at most {MAX_VERTICES} vertices, got {n}")
    n_states = 1 << (n - 1)
    best = math.inf
    minimizers = []
    for start in range(0, n_states, block):
        reduced = np.arange(start, min(start + block, n_states), dtype=np.int64)
        values = basis_energies(g, reduced << 1)
        low = float(values.min())
        if low < best:
            best = low
            minimizers = []
        if low == best:
            minimizers.extend(int(k) << 1 for k in reduced[values == low])
    return GroundTruth(best, frozenset(CutAssignment.from_index(k, n) for k in minimizers))


def hamming_distance(a: CutAssignment, b: CutAssignment) -> int:
    """Bit distance between two cuts, minimized over the complement of ``b``."""
    if len(a) != len(b):
        raise ProblemError(f"assignment lengths differ: {len(a)} vs {len(b)}")
    d = sum(x != y for x, y in zip(a.bits, b.bits))
    return min(d, len(a) - d)


def distance_to_solution(a: CutAssignment, truth: GroundTruth) -> int:
    return min(hamming_distance(a, b) for b in truth.optimal_assignments)


#------------------------------------------------------------------------
# Text format: header "n m seed", then one "u v w" line per edge
#------------------------------------------------------------------------
def format_graph(g: WeightedGraph) -> str:
    lines = [f"{g.n_vertices} {g.n_edges} {g.seed}"]
    lines.extend(f"{u} {v} {w!r}" for u, v, w in g.edges)
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> WeightedGraph:
    rows = [line.split() for line in text.splitlines()
            if line.strip() and not line.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 3:
        raise ProblemError("graph text must start with a 'n m seed' header")
    try:
        n, m, seed = (int(x) for x in rows[0])
        edges = [(int(u), int(v), float(w)) for u, v, w in rows[1:]]
    except ValueError as exc:
        raise ProblemError(f"malformed graph text: {exc}") from exc
    if len(edges) != m:
        raise ProblemError(f"header announces {m} edges, found {len(edges)}")
    return WeightedGraph(n, tuple(edges), seed)


def write_graph(g: WeightedGraph, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_graph(g))
    return path


def read_graph(path) -> WeightedGraph:
    return parse_graph(Path(path).read_text())


def assignments_from_strings(bits: Iterable[str]) -> FrozenSet[CutAssignment]:
    return frozenset(CutAssignment(b) for b in bits)


def complete_graph(n: int, weights: Sequence[float] = None, seed: int = 0) -> WeightedGraph:
    """Complete graph with the given weights in lexicographic pair order (unit weights by default)."""
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    if weights is None:
        weights = [1.0] * len(pairs)
    if len(weights) != len(pairs):
        raise ProblemError(f"complete graph on {n} vertices needs {len(pairs)} weights")
    return WeightedGraph(n, tuple((u, v, w) for (u, v), w in zip(pairs, weights)), seed)
