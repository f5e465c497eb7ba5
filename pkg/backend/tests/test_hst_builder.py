"""
Unit tests for HST construction, dummy leaves and the FRT embedding
"""
import numpy as np
import pytest

from models.hst import DegenerateMetric, LambdaTooSmall, MalformedTree, UnknownNode
from services.frt import frt_embed
from services.hst_builder import add_dummy_leaves, balanced_hst, build_hst, dummy_chain


def two_level_records():
    return [
        ("r", None, 2),
        ("x", "r", 1),
        ("y", "r", 1),
        ("a", "x", 0),
        ("b", "x", 0),
        ("c", "y", 0),
    ]


class TestBuildHst:
    """Validation and derived lookups of build_hst"""

    def test_costs_follow_levels(self):
        tree = build_hst(two_level_records(), 20)
        assert tree.height == 2
        assert tree.cost("a") == 1
        assert tree.cost("x") == 20
        assert tree.cost("r") == 400

    def test_leaves_and_counts(self):
        tree = build_hst(two_level_records(), 20)
        assert tree.leaves == ("a", "b", "c")
        assert tree.node("x").leaf_count == 2
        assert tree.node("r").size == 6
        assert tree.leaves_below("y") == ("c",)

    def test_distance_and_lca(self):
        tree = build_hst(two_level_records(), 20)
        assert tree.lca("a", "b") == "x"
        assert tree.distance("a", "b") == 2
        assert tree.distance("a", "c") == 42
        assert tree.child_toward("r", "b") == "x"

    def test_duplicate_id(self):
        records = two_level_records() + [("a", "y", 0)]
        with pytest.raises(MalformedTree):
            build_hst(records, 20)

    def test_orphan(self):
        records = two_level_records() + [("z", "nowhere", 0)]
        with pytest.raises(MalformedTree):
            build_hst(records, 20)

    def test_two_roots(self):
        records = two_level_records() + [("s", None, 2)]
        with pytest.raises(MalformedTree):
            build_hst(records, 20)

    def test_level_mismatch(self):
        records = [("r", None, 2), ("a", "r", 0)]
        with pytest.raises(MalformedTree):
            build_hst(records, 20)

    def test_leaf_above_level_zero(self):
        records = two_level_records() + [("z", "r", 1)]
        with pytest.raises(MalformedTree):
            build_hst(records, 20)

    def test_lambda_below_ten_h(self):
        with pytest.raises(LambdaTooSmall):
            build_hst(two_level_records(), 19)

    def test_separation_can_be_waived(self):
        tree = build_hst(two_level_records(), 3, enforce_separation=False)
        assert tree.cost("x") == 3

    def test_unknown_node(self):
        tree = build_hst(two_level_records(), 20)
        with pytest.raises(UnknownNode):
            tree.level("nope")


class TestDummyLeaves:
    """Dummy chains hang from the root and keep λ^level edge costs"""

    def test_two_k_dummies(self):
        tree = add_dummy_leaves(build_hst(two_level_records(), 20), 2)
        assert len(tree.dummy_leaves) == 4
        assert tree.real_leaves == ("a", "b", "c")

    def test_chain_shape(self):
        tree = add_dummy_leaves(build_hst(two_level_records(), 20), 1)
        chain = dummy_chain(tree, "dummy0")
        assert chain == ("dummy0", "dummy0@1")
        assert tree.parent("dummy0@1") == "r"
        assert tree.cost("dummy0@1") == 20
        assert tree.distance("dummy0", "a") == 42

    def test_measure_with_and_without_dummies(self):
        tree = add_dummy_leaves(build_hst(two_level_records(), 20), 1)
        assert tree.total_measure("nodes", True) == 10
        assert tree.total_measure("nodes", False) == 6
        assert tree.total_measure("leaves", True) == 5

    def test_aspect_ratio(self):
        tree = add_dummy_leaves(build_hst(two_level_records(), 20), 1)
        assert tree.aspect_ratio() == pytest.approx(21.0)


class TestBalancedHst:
    """Generated trees used by the gen command"""

    def test_leaf_names(self):
        tree = balanced_hst(5, 2, 20)
        assert tree.leaves == ("l0", "l1", "l2", "l3", "l4")
        assert tree.height == 2

    def test_all_leaves_at_level_zero(self):
        tree = balanced_hst(7, 3, 30)
        assert all(tree.level(leaf) == 0 for leaf in tree.leaves)
        assert len(tree.leaves) == 7


class TestFrtEmbed:
    """Random metric embedding"""

    @staticmethod
    def points(count, seed):
        rng = np.random.default_rng(seed)
        coordinates = rng.uniform(0, 1, size=(count, 2))
        return np.linalg.norm(coordinates[:, None, :] - coordinates[None, :, :], axis=-1)

    def test_tree_dominates_metric(self):
        distances = self.points(8, 3)
        tree = frt_embed(distances, 20, seed=11)
        scale = max(1.0, 1.0 / distances[~np.eye(8, dtype=bool)].min())
        for i in range(8):
            for j in range(i + 1, 8):
                assert tree.distance(f"p{i}", f"p{j}") >= distances[i, j] * scale - 1e-9

    def test_deterministic_for_seed(self):
        distances = self.points(6, 1)
        assert frt_embed(distances, 20, seed=5) == frt_embed(distances, 20, seed=5)

    def test_every_point_is_a_leaf(self):
        tree = frt_embed(self.points(5, 2), 20, seed=0, names=list("vwxyz"))
        assert set(tree.leaves) == set("vwxyz")

    def test_zero_distance_rejected(self):
        with pytest.raises(DegenerateMetric):
            frt_embed([[0, 0], [0, 0]], 20, seed=0)

    def test_single_point(self):
        tree = frt_embed([[0]], 20, seed=0)
        assert tree.leaves == ("p0",)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
