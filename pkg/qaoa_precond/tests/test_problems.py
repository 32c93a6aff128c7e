import itertools
from pathlib import Path

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from qaoa_precond import problems
from qaoa_precond.errors import ProblemError, ProblemGenerationError
from qaoa_precond.problems import CutAssignment

PROBLEM_DIR = Path(__file__).resolve().parents[2] / "data" / "problems"


@st.composite
def graph_and_assignment(draw):
    n = draw(st.integers(min_value=2, max_value=10))
    seed = draw(st.integers(min_value=0, max_value=2 ** 32))
    density = draw(st.sampled_from([0.5, 0.8, 1.0]))
    g = problems.generate_problem(n, seed, density, (1.0, 10.0))
    bits = draw(st.text(alphabet="01", min_size=n, max_size=n))
    return g, CutAssignment(bits)


class TestGenerateProblem:
    def test_two_vertices(self):
        g = problems.generate_problem(2, seed=123, density=1.0, weight_range=(1, 1))
        assert g.edges == ((0, 1, 1.0),)

    def test_unit_triangle(self):
        g = problems.generate_problem(3, seed=32, density=1.0, weight_range=(1, 1))
        assert g.edges == ((0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0))
        assert g.seed == 32

    def test_deterministic(self):
        a = problems.generate_problem(5, 32, 0.7, (10, 100))
        b = problems.generate_problem(5, 32, 0.7, (10, 100))
        assert a == b
        assert problems.format_graph(a) == problems.format_graph(b)

    def test_frozen_five_node_instance(self, golden):
        g = problems.generate_problem(5, 32, 0.7, (10, 100))
        assert nx.is_connected(g.to_networkx())
        assert all(10.0 <= w <= 100.0 for _, _, w in g.edges)
        golden("maxcut_5_seed32_edges", [[u, v, w] for u, v, w in g.edges])

    def test_frozen_instance_file(self):
        g = problems.generate_problem(5, 32, 0.7, (10, 100))
        path = PROBLEM_DIR / "maxcut_5_32.txt"
        assert problems.read_graph(path) == g
        frozen = [line for line in path.read_text().splitlines(keepends=True) if not line.startswith("#")]
        assert "".join(frozen) == problems.format_graph(g)

    def test_seed_changes_graph(self):
        a = problems.generate_problem(6, 1, 0.6, (1, 5))
        b = problems.generate_problem(6, 2, 0.6, (1, 5))
        assert a.edges != b.edges

    @pytest.mark.parametrize("n", [0, 1, 25])
    def test_size_out_of_range(self, n):
        with pytest.raises(ProblemError):
            problems.generate_problem(n, 0)

    def test_bad_weight_range(self):
        with pytest.raises(ProblemError):
            problems.generate_problem(4, 0, 1.0, (2.0, 1.0))

    def test_unreachable_connectivity_fails_loudly(self):
        with pytest.raises(ProblemGenerationError):
            problems.generate_problem(12, 0, density=1e-6, max_resamples=5)


class TestWeightedGraph:
    def test_rejects_unordered_edge(self):
        with pytest.raises(ProblemError):
            problems.WeightedGraph(3, ((1, 0, 1.0),))

    def test_rejects_duplicate_edge(self):
        with pytest.raises(ProblemError):
            problems.WeightedGraph(3, ((0, 1, 1.0), (0, 1, 2.0)))

    @pytest.mark.parametrize("w", [0.0, -1.0, float("inf"), float("nan")])
    def test_rejects_bad_weight(self, w):
        with pytest.raises(ProblemError):
            problems.WeightedGraph(2, ((0, 1, w),))

    def test_text_format_round_trip(self, maxcut_5):
        text = problems.format_graph(maxcut_5)
        assert problems.parse_graph(text) == maxcut_5
        assert text.splitlines()[0] == "5 10 55"

    def test_edge_count_mismatch(self):
        with pytest.raises(ProblemError):
            problems.parse_graph("3 2 0\n0 1 1.0\n")


class TestCutValue:
    def test_k2(self, k2):
        assert problems.cut_value(k2, CutAssignment("01")) == -1.0
        assert problems.cut_value(k2, CutAssignment("00")) == 0.0

    def test_triangle(self, unit_triangle):
        assert problems.cut_value(unit_triangle, CutAssignment("001")) == -2.0

    def test_length_mismatch(self, k2):
        with pytest.raises(ProblemError):
            problems.cut_value(k2, CutAssignment("011"))

    @given(graph_and_assignment())
    def test_complement_invariance(self, case):
        g, a = case
        assert problems.cut_value(g, a) == problems.cut_value(g, a.complement())

    @given(graph_and_assignment())
    def test_matches_basis_energies(self, case):
        g, a = case
        assert problems.basis_energies(g, np.array([a.index]))[0] == problems.cut_value(g, a)


class TestBruteForce:
    def test_k2(self, k2):
        truth = problems.brute_force(k2)
        assert truth.optimal_value == -1.0
        assert truth.optimal_assignments == {CutAssignment("01")}

    def test_triangle(self, unit_triangle):
        truth = problems.brute_force(unit_triangle)
        assert truth.optimal_value == -2.0
        assert truth.optimal_assignments == problems.assignments_from_strings(["001", "010", "011"])

    def test_three_node_fixture(self, maxcut_3):
        truth = problems.brute_force(maxcut_3)
        assert truth.optimal_value == pytest.approx(-(33.12 + 38.11))
        assert truth.optimal_assignments == {CutAssignment("011")}

    @pytest.mark.parametrize("n, seed", [(2 + k % 9, 1000 + k) for k in range(100)])
    def test_against_full_enumeration(self, n, seed):
        g = problems.generate_problem(n, seed, 0.7, (1.0, 10.0))
        values = {}
        for bits in itertools.product("01", repeat=n):
            a = CutAssignment("".join(bits))
            values[a] = problems.cut_value(g, a)
        best = min(values.values())
        truth = problems.brute_force(g)
        assert truth.optimal_value == best
        expected = {a.canonical() for a, v in values.items() if v == best}
        assert truth.optimal_assignments == expected

    def test_block_size_does_not_matter(self, maxcut_5):
        assert problems.brute_force(maxcut_5, block=3) == problems.brute_force(maxcut_5)

    @given(graph_and_assignment())
    def test_optimum_is_a_lower_bound(self, case):
        g, a = case
        truth = problems.brute_force(g)
        assert truth.optimal_value <= problems.cut_value(g, a)
        for b in truth.optimal_assignments:
            assert problems.cut_value(g, b) == truth.optimal_value


class TestHammingDistance:
    @pytest.mark.parametrize("a, b, expected", [
        ("010", "101", 0),
        ("000", "000", 0),
        ("0011", "0101", 2),
        ("0000", "0001", 1),
    ])
    def test_examples(self, a, b, expected):
        assert problems.hamming_distance(CutAssignment(a), CutAssignment(b)) == expected

    def test_length_mismatch(self):
        with pytest.raises(ProblemError):
            problems.hamming_distance(CutAssignment("01"), CutAssignment("011"))

    @given(st.integers(min_value=1, max_value=10).flatmap(
        lambda n: st.tuples(*(st.text(alphabet="01", min_size=n, max_size=n) for _ in range(3)))))
    def test_pseudometric(self, triple):
        a, b, c = (CutAssignment(bits) for bits in triple)
        d = problems.hamming_distance
        assert d(a, a) == 0
        assert d(a, b) == d(b, a)
        assert d(a, c) <= d(a, b) + d(b, c)
        assert d(a, b) == d(a, b.complement())

    def test_distance_to_solution(self, unit_triangle):
        truth = problems.brute_force(unit_triangle)
        assert problems.distance_to_solution(CutAssignment("000"), truth) == 1
        assert problems.distance_to_solution(CutAssignment("110"), truth) == 0
