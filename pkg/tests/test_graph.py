import json
import re

import numpy as np
import pytest

from netcons.exceptions import (
    DisconnectedGraph,
    NoDampedNode,
    NotPSD,
    NotSPD,
    NotSymmetric,
    NoUndampedNode,
    SpecError,
)
from netcons.graph import (
    MIXED_DAMPING_MESSAGE,
    NodeClass,
    classify_nodes,
    fundamental_cycle_matrix,
    incidence_matrix,
    kron_lift,
    load_spec,
    make_spec,
    partition_edges,
    spec_from_dict,
)
from netcons.random_networks import random_spec

from conftest import PATH3, TRIANGLE, p3_mid


class TestClassify:
    def test_scalar_classes(self):
        spec = p3_mid()
        assert classify_nodes(spec) == [NodeClass.UNDAMPED, NodeClass.DAMPED, NodeClass.UNDAMPED]

    def test_partially_undamped(self):
        spec = make_spec(2, [(0, 1)], [np.eye(2), np.diag([1.0, 0.0])], r=2)
        assert classify_nodes(spec)[1] is NodeClass.PARTIALLY_UNDAMPED
        assert not NodeClass.PARTIALLY_UNDAMPED.is_damped

    def test_invariant_under_reordering(self, rng):
        spec = random_spec(rng, n=5, r=2)
        order = rng.permutation(5)
        doc = spec.to_dict()
        doc["nodes"] = [doc["nodes"][i] for i in order]
        shuffled = spec_from_dict(doc)
        by_id = dict(zip(shuffled.node_ids, classify_nodes(shuffled)))
        assert [by_id[i] for i in spec.node_ids] == classify_nodes(spec)


class TestIncidence:
    def test_single_edge(self):
        spec = make_spec(2, [(0, 1)], [1, 0])
        np.testing.assert_array_equal(incidence_matrix(spec), [[1], [-1]])

    def test_path(self):
        np.testing.assert_array_equal(incidence_matrix(p3_mid()), [[1, 0], [-1, 1], [0, -1]])

    def test_orientation_follows_index_not_listing(self):
        spec = make_spec(2, [(1, 0)], [1, 0])
        np.testing.assert_array_equal(incidence_matrix(spec), [[1], [-1]])

    @pytest.mark.parametrize("seed", range(10))
    def test_kernel_of_transpose_is_ones(self, seed):
        spec = random_spec(np.random.default_rng(seed))
        B = incidence_matrix(spec)
        assert np.allclose(B.T @ np.ones(spec.n), 0)
        assert np.linalg.matrix_rank(B) == spec.n - 1

    def test_triangle_rank(self):
        spec = make_spec(3, TRIANGLE, [1, 0, 0])
        assert np.linalg.matrix_rank(incidence_matrix(spec)) == 2


class TestCycles:
    def test_tree_has_empty_cycle_matrix(self):
        assert fundamental_cycle_matrix(p3_mid()).shape == (2, 0)

    def test_triangle(self):
        spec = make_spec(3, TRIANGLE, [1, 0, 0])
        C = fundamental_cycle_matrix(spec)
        assert C.shape == (3, 1)
        assert np.array_equal(C[:, 0], [1, 1, -1]) or np.array_equal(C[:, 0], [-1, -1, 1])
        assert np.all(incidence_matrix(spec) @ C == 0)

    @pytest.mark.parametrize("seed", range(20))
    def test_complementary_to_cuts(self, seed):
        spec = random_spec(np.random.default_rng(seed))
        B = incidence_matrix(spec)
        C = fundamental_cycle_matrix(spec, B)
        assert np.all(B @ C == 0)
        assert np.all(np.isin(C, [-1, 0, 1]))
        assert C.shape[1] == spec.m - spec.n + 1
        if C.size:
            assert np.linalg.matrix_rank(C) == C.shape[1]
        assert np.linalg.matrix_rank(np.hstack([B.T, C])) == spec.m


class TestKronLift:
    def test_identity(self):
        np.testing.assert_array_equal(kron_lift(np.array([[1.0]]), 1), [[1.0]])

    def test_row(self):
        np.testing.assert_array_equal(kron_lift(np.array([[1.0, -1.0]]), 2),
                                      [[1, 0, -1, 0], [0, 1, 0, -1]])

    def test_rank(self):
        B = incidence_matrix(p3_mid())
        assert np.linalg.matrix_rank(kron_lift(B, 3)) == 3 * np.linalg.matrix_rank(B)


class TestPartition:
    def test_covers_all_edges(self, rng):
        for _ in range(20):
            spec = random_spec(rng)
            part = partition_edges(spec, classify_nodes(spec))
            allidx = sorted([*part.damped, *part.interconnecting, *part.undamped])
            assert allidx == list(range(spec.m))


class TestValidation:
    def doc(self):
        return p3_mid().to_dict()

    def test_round_trip(self, tmp_path):
        path = tmp_path / "n.json"
        path.write_text(json.dumps(self.doc()))
        assert load_spec(path).to_dict() == self.doc()

    @pytest.mark.parametrize("field, value, error", [
        ("mass", [[-1.0]], NotSPD),
        ("damping", [[-1.0]], NotPSD),
    ])
    def test_node_matrices(self, field, value, error):
        doc = self.doc()
        doc["nodes"][0][field] = value
        with pytest.raises(error):
            spec_from_dict(doc)

    def test_non_symmetric(self):
        spec = make_spec(2, [(0, 1)], [1, 0], r=2, require_mixed=False)
        doc = spec.to_dict()
        doc["edges"][0]["weight"] = [[1.0, 0.5], [0.0, 1.0]]
        with pytest.raises(NotSymmetric):
            spec_from_dict(doc)

    def test_disconnected(self):
        doc = self.doc()
        doc["edges"] = doc["edges"][:1]
        with pytest.raises(DisconnectedGraph):
            spec_from_dict(doc)

    def test_all_damped(self):
        with pytest.raises(NoUndampedNode, match="at least one damped and at least one"):
            make_spec(3, PATH3, [1, 1, 1])

    def test_all_undamped(self):
        with pytest.raises(NoDampedNode, match=re.escape(MIXED_DAMPING_MESSAGE)):
            make_spec(3, PATH3, [0, 0, 0])

    @pytest.mark.parametrize("mutate", [
        lambda d: d.pop("edges"),
        lambda d: d.update(dimension=0),
        lambda d: d["nodes"][1].update(id="1"),
        lambda d: d["edges"].append({"from": "1", "to": "1", "weight": [[1.0]]}),
        lambda d: d["nodes"][0].update(mass=[[1.0, 0.0]]),
    ])
    def test_structural(self, mutate):
        doc = self.doc()
        mutate(doc)
        with pytest.raises(SpecError):
            spec_from_dict(doc)
