"""Cluster hierarchy: greedy divisive tree over matrix columns.

Each leaf owns a disjoint set of column indices and caches a precomputed
candidate split together with the leading squared singular values of the
would-be children.  The greedy loop always applies the split with the
largest error reduction sigma1^2(K1) + sigma1^2(K2) - sigma1^2(K), which is
exactly the decrease of the total rank-one approximation error.  Splits and
fuses append to a replayable log so interactive sessions can undo.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import leading_sigma_sq
from .rank2nmf import DegenerateFactorsError
from .splitter import (
    SplitResult,
    UnsplittableClusterError,
    split_kmeans,
    split_rank2,
)

__all__ = ["PendingSplit", "ClusterNode", "ClusterTree", "run_h2nmf", "TREE_FORMAT"]

TREE_FORMAT = "h2nmf-tree/1"

SPLIT_METHODS = ("rank2nmf", "kmeans", "spherical_kmeans")


@dataclass
class PendingSplit:
    """A precomputed candidate split with the children's sigma1^2 and gain."""

    result: SplitResult
    child_sigma1_sq: tuple[float, float]
    gain: float


@dataclass
class ClusterNode:
    id: int
    index_set: np.ndarray
    sigma1_sq: float
    fro_sq: float
    parent: int | None = None
    children: tuple[int, int] | None = None
    pending: PendingSplit | None = None


@dataclass
class _UndoRecord:
    kind: str
    node_id: int
    payload: tuple = field(default_factory=tuple)


class ClusterTree:
    """Single-writer cluster hierarchy over the columns of a data matrix.

    Mutations (split, fuse, undo) must be serialized by the caller; reads
    between mutations are safe.  All randomness is funneled through the
    seed given at construction, so runs are reproducible.
    """

    def __init__(
        self,
        matrix,
        *,
        splitter: str = "rank2nmf",
        delta_hat: float = 0.05,
        objective: str = "default",
        seed: int = 0,
    ):
        if splitter not in SPLIT_METHODS:
            raise ValueError(f"unknown splitter {splitter!r}")
        self.matrix = np.asarray(matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[1] < 1:
            raise ValueError("matrix must be 2-D with at least one column")
        self.splitter = splitter
        self.delta_hat = delta_hat
        self.objective = objective
        self.seed = seed
        self.warning = False
        self.nodes: dict[int, ClusterNode] = {}
        self.split_log: list[dict] = []
        self._undo: list[_UndoRecord] = []
        self._leaf_ids: set[int] = set()
        self._next_id = 1
        root = self._new_node(np.arange(self.matrix.shape[1], dtype=np.int64), None)
        self._leaf_ids.add(root.id)

    # ------------------------------------------------------------------ basics

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def leaf_ids(self) -> list[int]:
        """Leaves in creation order (node ids increase with creation)."""
        return sorted(self._leaf_ids)

    def node(self, node_id: int) -> ClusterNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise KeyError(f"unknown node {node_id}") from None

    def is_leaf(self, node_id: int) -> bool:
        return node_id in self._leaf_ids

    def split_gain(self, node_id: int) -> float:
        """Error reduction of the node's precomputed split; 0 if unsplittable."""
        node = self.node(node_id)
        return node.pending.gain if node.pending is not None else 0.0

    # ------------------------------------------------------------ construction

    def _new_node(self, index_set: np.ndarray, parent: int | None) -> ClusterNode:
        sub = self.matrix[:, index_set]
        node = ClusterNode(
            id=self._next_id,
            index_set=index_set,
            sigma1_sq=leading_sigma_sq(sub, seed=self.seed) if index_set.size else 0.0,
            fro_sq=float(np.einsum("ij,ij->", sub, sub)),
            parent=parent,
        )
        self._next_id += 1
        self.nodes[node.id] = node
        node.pending = self._compute_pending(node)
        return node

    def _run_splitter(self, index_set: np.ndarray, method: str) -> SplitResult:
        if method == "rank2nmf":
            return split_rank2(
                self.matrix,
                index_set,
                delta_hat=self.delta_hat,
                objective=self.objective,
                seed=self.seed,
            )
        mode = "euclidean" if method == "kmeans" else "spherical"
        return split_kmeans(self.matrix, index_set, mode=mode, seed=self.seed)

    def _compute_pending(
        self, node: ClusterNode, method: str | None = None
    ) -> PendingSplit | None:
        if node.index_set.size < 2:
            return None
        try:
            result = self._run_splitter(node.index_set, method or self.splitter)
        except (UnsplittableClusterError, DegenerateFactorsError):
            return None
        s1 = leading_sigma_sq(self.matrix[:, result.k1], seed=self.seed)
        s2 = leading_sigma_sq(self.matrix[:, result.k2], seed=self.seed)
        gain = s1 + s2 - node.sigma1_sq
        result.score = gain
        return PendingSplit(result=result, child_sigma1_sq=(s1, s2), gain=gain)

    # -------------------------------------------------------------- mutations

    def _apply_split(self, node_id: int) -> tuple[int, int]:
        node = self.node(node_id)
        pending = node.pending
        assert pending is not None
        c1 = self._new_node(pending.result.k1, node_id)
        c2 = self._new_node(pending.result.k2, node_id)
        # children reuse the sigma values computed for the gain
        c1.sigma1_sq, c2.sigma1_sq = pending.child_sigma1_sq
        node.children = (c1.id, c2.id)
        self._leaf_ids.discard(node_id)
        self._leaf_ids.update((c1.id, c2.id))
        entry = {
            "op": "split",
            "node": node_id,
            "children": [c1.id, c2.id],
            "method": pending.result.method,
        }
        self.split_log.append(entry)
        self._undo.append(_UndoRecord("split", node_id, (c1.id, c2.id)))
        return c1.id, c2.id

    def interactive_split(self, node_id: int, method: str | None = None):
        """Apply the node's pending split (optionally recomputed with another
        splitter).  The node must be a splittable leaf."""
        node = self.node(node_id)
        if not self.is_leaf(node_id):
            raise ValueError(f"node {node_id} is not a leaf")
        if method is not None:
            if method not in SPLIT_METHODS:
                raise ValueError(f"unknown splitter {method!r}")
            if node.pending is None or node.pending.result.method != method:
                pending = self._compute_pending(node, method)
                if pending is None:
                    raise ValueError(f"node {node_id} is unsplittable")
                node.pending = pending
        if node.pending is None:
            raise ValueError(f"node {node_id} is unsplittable")
        return self._apply_split(node_id)

    def interactive_fuse(self, leaf_a: int, leaf_b: int) -> int:
        """Fuse two leaves.

        Fusing siblings restores their parent exactly (the children are
        removed).  Otherwise a new parentless leaf owning the union is
        created and its split precomputed.  Returns the id of the restored
        or created leaf.
        """
        if leaf_a == leaf_b:
            raise ValueError("cannot fuse a leaf with itself")
        a = self.node(leaf_a)
        b = self.node(leaf_b)
        if not self.is_leaf(leaf_a) or not self.is_leaf(leaf_b):
            raise ValueError("both nodes must be leaves")
        siblings = (
            a.parent is not None
            and a.parent == b.parent
            and self.nodes[a.parent].children is not None
            and set(self.nodes[a.parent].children) == {leaf_a, leaf_b}
        )
        if siblings:
            parent_id = a.parent
            parent = self.nodes[parent_id]
            del self.nodes[leaf_a]
            del self.nodes[leaf_b]
            saved_next = self._next_id
            # rewind id allocation only when the children were the newest
            # nodes, so a fuse right after a split restores the tree exactly
            if {leaf_a, leaf_b} == {saved_next - 2, saved_next - 1}:
                self._next_id = min(leaf_a, leaf_b)
            parent.children = None
            self._leaf_ids.difference_update((leaf_a, leaf_b))
            self._leaf_ids.add(parent_id)
            entry = {"op": "fuse", "a": leaf_a, "b": leaf_b, "node": parent_id,
                     "sibling": True}
            self.split_log.append(entry)
            self._undo.append(
                _UndoRecord("fuse_sibling", parent_id, (a, b, saved_next))
            )
            return parent_id
        union = np.union1d(a.index_set, b.index_set)
        node = self._new_node(union, None)
        self._leaf_ids.difference_update((leaf_a, leaf_b))
        self._leaf_ids.add(node.id)
        entry = {"op": "fuse", "a": leaf_a, "b": leaf_b, "node": node.id,
                 "sibling": False}
        self.split_log.append(entry)
        self._undo.append(_UndoRecord("fuse_new", node.id, (leaf_a, leaf_b)))
        return node.id

    def undo(self) -> None:
        """Reverse the most recent split or fuse."""
        if not self._undo:
            raise ValueError("nothing to undo")
        rec = self._undo.pop()
        self.split_log.pop()
        if rec.kind == "split":
            c1, c2 = rec.payload
            node = self.nodes[rec.node_id]
            del self.nodes[c1]
            del self.nodes[c2]
            node.children = None
            self._leaf_ids.difference_update((c1, c2))
            self._leaf_ids.add(rec.node_id)
            self._next_id = min(c1, c2)
        elif rec.kind == "fuse_sibling":
            a, b, saved_next = rec.payload
            parent = self.nodes[rec.node_id]
            self.nodes[a.id] = a
            self.nodes[b.id] = b
            parent.children = (a.id, b.id)
            self._leaf_ids.discard(rec.node_id)
            self._leaf_ids.update((a.id, b.id))
            self._next_id = saved_next
        elif rec.kind == "fuse_new":
            a_id, b_id = rec.payload
            del self.nodes[rec.node_id]
            self._leaf_ids.discard(rec.node_id)
            self._leaf_ids.update((a_id, b_id))
            self._next_id = rec.node_id

    def auto_split_to(self, r: int) -> "ClusterTree":
        """Greedy splits until ``r`` leaves (or no leaf has positive gain).

        Sets ``warning`` when the target could not be reached.  Ties in the
        gain break toward the smallest leaf id.
        """
        if not 1 <= r <= self.n:
            raise ValueError("r out of range")
        while len(self._leaf_ids) < r:
            best_id = None
            best_gain = 0.0
            for leaf_id in self.leaf_ids:
                gain = self.split_gain(leaf_id)
                if self.nodes[leaf_id].pending is not None and gain > best_gain:
                    best_gain = gain
                    best_id = leaf_id
            if best_id is None:
                self.warning = True
                break
            self._apply_split(best_id)
        return self

    # ------------------------------------------------------------------ views

    def flatten(self) -> np.ndarray:
        """Label vector: each column gets the 1-based rank of its leaf in
        creation order."""
        labels = np.zeros(self.n, dtype=np.int64)
        for pos, leaf_id in enumerate(self.leaf_ids, start=1):
            labels[self.nodes[leaf_id].index_set] = pos
        return labels

    def total_error(self) -> float:
        """Sum over leaves of the rank-one approximation error."""
        return float(
            sum(
                self.nodes[i].fro_sq - self.nodes[i].sigma1_sq
                for i in self._leaf_ids
            )
        )

    def to_document(self) -> dict:
        """JSON-ready tree document (versioned format)."""
        nodes = []
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            nodes.append(
                {
                    "id": node.id,
                    "parent": node.parent,
                    "children": list(node.children) if node.children else None,
                    "size": int(node.index_set.size),
                    "sigma1_sq": float(node.sigma1_sq),
                    "gain": float(node.pending.gain) if node.pending else 0.0,
                }
            )
        return {
            "format": TREE_FORMAT,
            "n": self.n,
            "leaves": self.leaf_ids,
            "nodes": nodes,
        }


def run_h2nmf(
    M,
    r: int,
    splitter: str = "rank2nmf",
    *,
    delta_hat: float = 0.05,
    objective: str = "default",
    seed: int = 0,
) -> ClusterTree:
    """Grow a cluster tree to ``r`` leaves by greedy error reduction.

    Starts from a single root cluster holding every column, precomputes its
    split, then repeatedly applies the maximum-gain leaf split, precomputing
    the splits of both new leaves.  Total cost is O(mnr) for the rank-two
    splitter.  Deterministic given the matrix, r and the seed.
    """
    tree = ClusterTree(
        M, splitter=splitter, delta_hat=delta_hat, objective=objective, seed=seed
    )
    return tree.auto_split_to(r)
