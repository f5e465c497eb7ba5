"""
Random hierarchical decomposition of a finite metric into a λ-HST
"""
import logging
from typing import List, Optional, Sequence

import numpy as np

from models.hst import Hst, DegenerateMetric, MalformedTree
from services.hst_builder import NodeRecord, build_hst

logger = logging.getLogger(__name__)


def frt_embed(
    distances: Sequence[Sequence[float]],
    lam: float,
    seed: int,
    names: Optional[Sequence[str]] = None,
) -> Hst:
    """
    Embed a finite metric into a random λ-HST whose leaves are the points

    Distances are first scaled by max(1, 1/d_min) so that every level-0 cluster is a
    singleton. Level-i clusters are balls of radius β·λ^(i-1) around centers taken in
    a random order, with β uniform in [1/2, 1]; the tree distance therefore dominates
    the metric for every pair.

    Args:
        distances: Symmetric matrix with zero diagonal and positive off-diagonal entries
        lam: Separation factor λ > 1
        seed: Seed for the center order and β
        names: Leaf identifiers (defaults to p0, p1, ...)

    Returns:
        Hst with one leaf per point

    Raises:
        DegenerateMetric: On zero or asymmetric distances
    """
    matrix = np.asarray(distances, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise DegenerateMetric("Distance matrix must be square and non-empty")
    if lam <= 1:
        raise MalformedTree(f"λ must exceed 1, got {lam}")
    count = matrix.shape[0]
    labels: List[str] = list(names) if names is not None else [f"p{i}" for i in range(count)]
    if len(labels) != count or len(set(labels)) != count:
        raise DegenerateMetric("Point names must be unique and match the matrix size")
    if not np.allclose(matrix, matrix.T) or np.any(np.diag(matrix) != 0):
        raise DegenerateMetric("Distance matrix must be symmetric with a zero diagonal")
    off_diagonal = matrix[~np.eye(count, dtype=bool)]
    if off_diagonal.size and np.any(off_diagonal <= 0):
        raise DegenerateMetric("Distinct points must be at positive distance")

    if count == 1:
        return build_hst([("r", None, 1), (labels[0], "r", 0)], lam, enforce_separation=False)

    scaled = matrix * max(1.0, 1.0 / float(off_diagonal.min()))
    diameter = float(scaled.max())
    height = 1
    while lam ** (height - 1) < 2 * diameter:
        height += 1

    rng = np.random.default_rng(seed)
    order = rng.permutation(count)
    beta = float(rng.uniform(0.5, 1.0))
    logger.debug(f"FRT: {count} points, H={height}, β={beta:.4f}")

    records: List[NodeRecord] = [("r", None, height)]
    clusters = [("r", list(range(count)))]
    for level in range(height - 1, 0, -1):
        radius = beta * lam ** (level - 1)
        refined = []
        for parent_id, members in clusters:
            remaining = set(members)
            index = 0
            for center in order:
                if not remaining:
                    break
                ball = [p for p in members if p in remaining and scaled[center, p] <= radius]
                if not ball:
                    continue
                node_id = f"{parent_id}.{index}"
                index += 1
                records.append((node_id, parent_id, level))
                refined.append((node_id, ball))
                remaining.difference_update(ball)
        clusters = refined

    for parent_id, members in clusters:
        for point in members:
            records.append((labels[point], parent_id, 0))

    tree = build_hst(records, lam, enforce_separation=False)
    logger.info(f"Embedded {count} points into an HST of height {tree.height}")
    return tree
