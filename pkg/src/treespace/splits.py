"""Bit-vector split algebra.

A split is the leaf bipartition induced by deleting one edge of a rooted
tree.  We store the side *below* the edge (the side away from the root
taxon Z) as a Python int bitmask over the ordered label universe:
bit i set <=> universe[i] is below the edge.  Position n -- the Z slot --
is therefore always 0, which buys a useful simplification: two stored
masks are compatible exactly when they are nested or disjoint, because
the fourth block of the bipartition intersection table always contains Z.

Masks double as dict keys, so edge classification between two trees is a
hash join, and all compatibility tests are single-word AND/compare ops.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ValidationError
from .newick import Node, Tree

__all__ = [
    "Split",
    "SplitSet",
    "Bin",
    "tree_to_splits",
    "compatible",
    "masks_compatible",
    "classify_edges",
    "partition_into_bins",
    "splits_to_tree",
]


@dataclass(frozen=True)
class Split:
    """One bipartition (mask = the side not containing Z) with a weight.

    Equality and hashing are by mask alone: two edges are the same edge
    exactly when they cut the leaf set the same way.
    """

    mask: int
    weight: float
    universe: tuple[str, ...] = field(compare=False, hash=False, repr=False, default=())

    def leaves(self) -> tuple[str, ...]:
        return tuple(lab for i, lab in enumerate(self.universe) if self.mask >> i & 1)

    def size(self) -> int:
        return self.mask.bit_count()

    def is_pendant(self) -> bool:
        return self.mask.bit_count() == 1

    def __eq__(self, other):
        return isinstance(other, Split) and self.mask == other.mask

    def __hash__(self):
        return hash(self.mask)


class SplitSet:
    """The splits of one tree over an ordered universe (labels + Z).

    ``weights`` maps mask -> edge weight.  Downward-leaf counts per mask
    are cached because the subproblem binning queries them repeatedly.
    """

    __slots__ = ("labels", "weights", "sizes", "full_mask")

    def __init__(self, labels: tuple[str, ...], weights: dict[int, float]):
        self.labels = tuple(labels)
        n = len(self.labels)
        self.full_mask = (1 << n) - 1
        for mask, w in weights.items():
            if mask <= 0 or mask >= self.full_mask:
                raise ValidationError(f"mask {mask:#x} is empty, full, or outside "
                                      f"the {n}-leaf universe")
            if w < 0:
                raise ValidationError("split weights must be nonnegative")
        self.weights = dict(weights)
        self.sizes = {m: m.bit_count() for m in self.weights}

    @property
    def universe(self) -> tuple[str, ...]:
        return self.labels + ("Z",)

    def n_leaves(self) -> int:
        return len(self.labels)

    def splits(self) -> list[Split]:
        return [Split(m, w, self.labels) for m, w in sorted(self.weights.items())]

    def internal_masks(self) -> list[int]:
        return sorted(m for m in self.weights if m.bit_count() > 1)

    def pendant_masks(self) -> list[int]:
        return sorted(m for m in self.weights if m.bit_count() == 1)

    def __len__(self):
        return len(self.weights)

    def __eq__(self, other):
        return (isinstance(other, SplitSet) and self.labels == other.labels
                and self.weights == other.weights)

    def __repr__(self):
        return f"SplitSet({len(self.weights)} splits on {len(self.labels)} leaves)"


def masks_compatible(a: int, b: int) -> bool:
    """Nested or disjoint.  Valid for Z-free masks (see module notes)."""
    inter = a & b
    return inter == 0 or inter == a or inter == b


def compatible(s: Split, t: Split) -> bool:
    """True iff one of the four bipartition block intersections is empty.

    The fourth block (above-e & above-f) always holds Z for stored
    splits, so this reduces to a nested-or-disjoint test on the masks.
    """
    if s.universe and t.universe and s.universe != t.universe:
        raise ValidationError("splits live on different universes")
    return masks_compatible(s.mask, t.mask)


def tree_to_splits(tree: Tree, labels: tuple[str, ...] | None = None) -> SplitSet:
    """One split per edge; mask bits mark the leaves below that edge."""
    if labels is None:
        labels = tuple(sorted(tree.labels))
    index = {lab: i for i, lab in enumerate(labels)}
    missing = set(tree.labels) - set(labels)
    if missing:
        raise ValidationError(f"labels not in universe: {sorted(missing)}")

    weights: dict[int, float] = {}

    def mask_of(node: Node) -> int:
        if node.is_leaf():
            m = 1 << index[node.label]
        else:
            m = 0
            for child in node.children:
                m |= mask_of(child)
        if node.length is not None:  # every non-root edge
            weights[m] = node.length
        return m

    mask_of(tree.root)
    return SplitSet(labels, weights)


def classify_edges(a: SplitSet, b: SplitSet):
    """Split the edges of two trees into shared and unique.

    Returns (shared, unique_a, unique_b) where shared is a list of
    (mask, weight_in_a, weight_in_b) for mask-equal pairs, and the
    unique lists hold (mask, weight).  With equal leaf sets every
    pendant lands in shared.
    """
    if a.labels != b.labels:
        raise ValidationError("split sets use different universes")
    shared, unique_a, unique_b = [], [], []
    for m in sorted(a.weights):
        if m in b.weights:
            shared.append((m, a.weights[m], b.weights[m]))
        else:
            unique_a.append((m, a.weights[m]))
    for m in sorted(b.weights):
        if m not in a.weights:
            unique_b.append((m, b.weights[m]))
    return shared, unique_a, unique_b


@dataclass
class Bin:
    """Unique splits of both trees filed under their tightest shared edge.

    ``anchor`` is the mask of that shared edge; the implicit root edge
    (all leaves) anchors everything not under a shared internal edge.
    Splits in different bins are always mutually compatible, so each bin
    is an independent subproblem for the geodesic.
    """

    anchor: int
    unique_a: list[tuple[int, float]] = field(default_factory=list)
    unique_b: list[tuple[int, float]] = field(default_factory=list)


def partition_into_bins(a: SplitSet, b: SplitSet) -> list[Bin]:
    shared, unique_a, unique_b = classify_edges(a, b)
    root_anchor = a.full_mask
    # candidate anchors, tightest (fewest leaves below) first
    anchors = sorted((m for m, _, _ in shared if m.bit_count() > 1),
                     key=lambda m: (m.bit_count(), m))

    def anchor_of(mask: int) -> int:
        for s in anchors:
            if mask & s == mask and mask != s:
                return s
        return root_anchor

    bins: dict[int, Bin] = {}
    for mask, w in unique_a:
        anc = anchor_of(mask)
        bins.setdefault(anc, Bin(anc)).unique_a.append((mask, w))
    for mask, w in unique_b:
        anc = anchor_of(mask)
        bins.setdefault(anc, Bin(anc)).unique_b.append((mask, w))
    return [bins[k] for k in sorted(bins)]


def splits_to_tree(s: SplitSet) -> Tree:
    """Materialize the unique tree carrying exactly these splits.

    Requires pairwise compatibility and a pendant split for every leaf.
    Inverse of tree_to_splits up to child ordering.
    """
    n = s.n_leaves()
    masks = sorted(s.weights, key=lambda m: (m.bit_count(), m))
    pendants = {m for m in masks if m.bit_count() == 1}
    if len(pendants) != n:
        raise ValidationError("a pendant split is required for every leaf")
    for i in range(len(masks)):
        for j in range(i + 1, len(masks)):
            if not masks_compatible(masks[i], masks[j]):
                raise ValidationError(
                    f"incompatible splits {masks[i]:#x} and {masks[j]:#x}")

    # parent of m = smallest strict superset; none -> child of the root
    nodes: dict[int, Node] = {}
    for m in masks:
        label = s.labels[m.bit_length() - 1] if m.bit_count() == 1 else None
        nodes[m] = Node(label=label, length=s.weights[m])
    root = Node()
    for i, m in enumerate(masks):
        parent = None
        for p in masks[i + 1:]:
            if m & p == m and p != m:
                parent = p
                break
        (nodes[parent] if parent is not None else root).children.append(nodes[m])
    if len(root.children) == 1:
        # a single top split covering every leaf cannot occur (mask
        # would equal the full universe side), so this is unreachable
        # for valid input; guard anyway
        root = root.children[0]
        root.length = None
    return Tree(root, labels=tuple())
