"""Tree shapes and Markov character simulation along them.

Characters evolve independently per site: draw the root state uniformly,
then push it through the tree, flipping on each edge with the model's
length-dependent probability.  Randomness is drawn from counter-based
Philox streams keyed by (seed, edge), so results are deterministic and
independent of traversal scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .newick import Alignment, Node, Tree, _min_leaf

__all__ = ["EvolutionModel", "make_tree", "random_tree", "evolve"]


@dataclass(frozen=True)
class EvolutionModel:
    """Symmetric substitution process: two-state (cfn) or four-state DNA
    (jc69), at rate ``alpha`` per unit branch length."""

    kind: str
    alpha: float

    def __post_init__(self):
        if self.kind not in ("cfn", "jc69"):
            raise DomainError(f"unknown model {self.kind!r}")
        if self.alpha < 0:
            raise DomainError("rate must be nonnegative")

    @property
    def n_states(self) -> int:
        return 2 if self.kind == "cfn" else 4

    @property
    def alphabet(self) -> str:
        return "01" if self.kind == "cfn" else "acgt"

    def p_change(self, t: float) -> float:
        """Probability that the state at the bottom of an edge of length
        ``t`` differs from the state at the top."""
        if t < 0:
            raise DomainError("negative branch length")
        if self.kind == "cfn":
            return 0.5 * -math.expm1(-2.0 * self.alpha * t)
        return 0.75 * -math.expm1(-4.0 * self.alpha * t / 3.0)


def _default_labels(n: int) -> list[str]:
    return [f"t{i + 1}" for i in range(n)]


def make_tree(shape: str, size: int, edge_len: float = 1.0,
              labels: list[str] | None = None,
              outgroup: str | None = None) -> Tree:
    """A balanced tree (power-of-two leaves) or a comb, all edges equal.

    ``size`` is the leaf count before the optional outgroup, which is
    attached directly at the root to fix it.
    """
    if edge_len < 0:
        raise ValidationError("edge length must be nonnegative")
    if labels is None:
        labels = _default_labels(size)
    if len(labels) != size:
        raise ValidationError(f"need {size} labels, got {len(labels)}")

    if shape == "balanced":
        if size < 2 or size & (size - 1):
            raise ValidationError("balanced trees need a power-of-two leaf count")

        def build(lo: int, hi: int) -> Node:
            if hi - lo == 1:
                return Node(labels[lo], edge_len)
            mid = (lo + hi) // 2
            return Node(None, edge_len, [build(lo, mid), build(mid, hi)])

        left = build(0, size // 2)
        right = build(size // 2, size)
        root = Node(None, None, [left, right])
    elif shape == "comb":
        if size < 2:
            raise ValidationError("a comb needs at least 2 leaves")
        node = Node(labels[0], edge_len)
        node = Node(None, edge_len, [node, Node(labels[1], edge_len)])
        for k in range(2, size):
            node = Node(None, edge_len, [node, Node(labels[k], edge_len)])
        node.length = None
        root = node
    else:
        raise ValidationError(f"unknown shape {shape!r}")

    if outgroup is not None:
        root.children.append(Node(outgroup, edge_len))
    return Tree(root)


def random_tree(n: int, seed: int, labels: list[str] | None = None) -> Tree:
    """Random topology by repeatedly splitting a uniformly chosen leaf,
    with unit-exponential edge lengths.  Deterministic per seed."""
    if n < 2:
        raise ValidationError("need at least 2 leaves")
    rng = np.random.default_rng(np.random.SeedSequence((0x7265E5, seed)))
    if labels is None:
        labels = _default_labels(n)
    if len(labels) != n:
        raise ValidationError(f"need {n} labels, got {len(labels)}")

    leaves = [Node(labels[0]), Node(labels[1])]
    root = Node(None, None, list(leaves))
    for k in range(2, n):
        pick = leaves[int(rng.integers(len(leaves)))]
        fresh = Node(labels[k])
        # the picked leaf becomes an internal node with two leaf children
        child = Node(pick.label)
        pick.label = None
        pick.children = [child, fresh]
        leaves[leaves.index(pick)] = child
        leaves.append(fresh)
    tree = Tree(root)
    for node in tree.iter_nodes():
        if node is not tree.root:
            node.length = float(rng.exponential(1.0))
    return tree


def _edge_rng(seed: int, edge_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence((0xE701, seed, edge_id))))


def evolve(tree: Tree, model: EvolutionModel, length: int, seed: int) -> Alignment:
    """Simulate ``length`` sites along the tree; returns an Alignment in
    the tree's leaf order with unit column weights."""
    if length < 1:
        raise DomainError("length must be >= 1")
    k = model.n_states
    root_rng = _edge_rng(seed, 0)
    root_state = root_rng.integers(0, k, size=length).astype(np.uint8)

    leaf_rows: dict[str, np.ndarray] = {}
    counter = [0]

    def descend(node: Node, state: np.ndarray) -> None:
        # canonical child order keeps edge ids stable however the tree
        # object was produced
        for child in sorted(node.children, key=_min_leaf):
            counter[0] += 1
            rng = _edge_rng(seed, counter[0])
            p = model.p_change(child.length)
            flips = rng.random(length) < p
            if k == 2:
                new = (state ^ flips).astype(np.uint8)
            else:
                shift = rng.integers(1, k, size=length).astype(np.uint8)
                new = np.where(flips, (state + shift) % k, state).astype(np.uint8)
            if child.is_leaf():
                leaf_rows[child.label] = new
            else:
                descend(child, new)

    descend(tree.root, root_state)
    data = np.stack([leaf_rows[lab] for lab in tree.labels])
    return Alignment(list(tree.labels), data, model.alphabet)
