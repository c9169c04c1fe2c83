"""Trees, alignments, and the text formats used to exchange them.

Trees are rooted, weighted, with unique leaf labels and no unary nodes
(internal nodes have >= 2 children; together with the parent edge that
is degree >= 3, while the root may have just 2 children).  An unrooted
Newick string with a top-level trifurcation parses fine: the trifurcation
simply becomes the root.  Conceptually every tree is hung from a root
taxon ``Z``; no physical root edge is stored.

Branch lengths are required to be nonnegative and finite.  A missing
length defaults to 1.0 because downstream geodesic distances are
undefined for weightless trees; the default is deliberate and documented
rather than an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

_RESERVED = set("():,;\t\n\r ")


class Node:
    """One tree node; ``length`` is the weight of the edge above it."""

    __slots__ = ("label", "length", "children")

    def __init__(self, label=None, length=None, children=None):
        self.label = label
        self.length = length
        self.children = children if children is not None else []

    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class Tree:
    """Rooted weighted tree over a fixed set of uniquely labeled leaves."""

    root: Node
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.labels:
            self.labels = tuple(n.label for n in self.iter_nodes() if n.is_leaf())
        seen = set()
        for lab in self.labels:
            if lab in seen:
                raise ParseError(f"duplicate leaf label {lab!r}")
            seen.add(lab)

    def iter_nodes(self):
        """Yield nodes in preorder without recursion."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def n_leaves(self) -> int:
        return len(self.labels)

    def copy(self) -> "Tree":
        def clone(n: Node) -> Node:
            return Node(n.label, n.length, [clone(c) for c in n.children])

        return Tree(clone(self.root), self.labels)

    def leaf_path_lengths(self) -> dict[tuple[str, str], float]:
        """Patristic distance between every unordered leaf pair."""
        dists: dict[tuple[str, str], float] = {}

        def walk(node: Node) -> dict[str, float]:
            if node.is_leaf():
                below = {node.label: 0.0}
            else:
                below = {}
                parts = [walk(c) for c in node.children]
                for i in range(len(parts)):
                    for j in range(i + 1, len(parts)):
                        for a, da in parts[i].items():
                            for b, db in parts[j].items():
                                key = (a, b) if a < b else (b, a)
                                dists[key] = da + db
                    below.update(parts[i])
            if node.length is not None:
                for k in below:
                    below[k] += node.length
            return below

        walk(self.root)
        return dists

    def __repr__(self):
        return f"Tree({write_newick(self)!r})"


def _min_leaf(node: Node) -> str:
    best = None
    stack = [node]
    while stack:
        n = stack.pop()
        if n.is_leaf():
            if best is None or n.label < best:
                best = n.label
        else:
            stack.extend(n.children)
    return best


def parse_newick(text: str, collapse_zero: bool = False) -> Tree:
    """Parse a single Newick statement into a Tree.

    Internal node labels (e.g. bootstrap supports) are accepted and
    dropped.  With ``collapse_zero`` set, zero-weight internal edges are
    collapsed into multifurcations; otherwise they are kept as-is.
    """
    s = text.strip()
    if not s:
        raise ParseError("empty input")
    if not s.endswith(";"):
        raise ParseError("Newick statement must end with ';'")
    s = s[:-1]
    if ";" in s:
        raise ParseError("more than one Newick statement")

    root = Node()
    cur = root
    stack: list[Node] = []
    i, n = 0, len(s)

    def read_token(i: int) -> tuple[str, int]:
        j = i
        while j < n and s[j] not in _RESERVED:
            j += 1
        return s[i:j], j

    while i < n:
        c = s[i]
        if c.isspace():
            i += 1
        elif c == "(":
            if cur.label is not None or cur.children:
                raise ParseError("unexpected '('")
            child = Node()
            cur.children.append(child)
            stack.append(cur)
            cur = child
            i += 1
        elif c == ",":
            if not stack:
                raise ParseError("comma outside parentheses")
            parent = stack[-1]
            child = Node()
            parent.children.append(child)
            cur = child
            i += 1
        elif c == ")":
            if not stack:
                raise ParseError("unbalanced parentheses: extra ')'")
            cur = stack.pop()
            # an optional label after ')' names the internal node; dropped
            j = i + 1
            while j < n and s[j].isspace():
                j += 1
            _, i = read_token(j)
        elif c == ":":
            tok, j = read_token(i + 1)
            if not tok:
                raise ParseError("':' with no branch length")
            try:
                length = float(tok)
            except ValueError as exc:
                raise ParseError(f"bad branch length {tok!r}") from exc
            if not math.isfinite(length):
                raise ParseError(f"non-finite branch length {tok!r}")
            if length < 0:
                raise ParseError(f"negative branch length {tok!r}")
            if cur.length is not None:
                raise ParseError("branch length given twice")
            cur.length = length
            i = j
        else:
            tok, i = read_token(i)
            if cur.label is not None or cur.children or cur.length is not None:
                raise ParseError(f"unexpected token {tok!r}")
            cur.label = tok
    if stack:
        raise ParseError("unbalanced parentheses: missing ')'")

    # The scanner hangs the whole statement under a synthetic top node
    # with one child; unwrap it.  "(A,B);" parses to top->node{A,B}.
    if len(root.children) == 1 and root.label is None:
        root = root.children[0]
    elif root.label is not None and not root.children:
        raise ParseError("a single bare label is not a tree")
    root.length = None  # a length on the outermost node is meaningless

    _validate(root)
    if collapse_zero:
        _collapse_zero_edges(root)
    tree = Tree(root)
    if tree.n_leaves() < 2:
        raise ParseError("a tree needs at least 2 leaves")
    # default weights: every non-root node needs a length
    for node in tree.iter_nodes():
        if node is not tree.root and node.length is None:
            node.length = 1.0
    return tree


def _validate(root: Node) -> None:
    stack = [root]
    while stack:
        node = stack.pop()
        if node.is_leaf():
            if not node.label:
                raise ParseError("leaf without a label")
        else:
            if len(node.children) == 1:
                raise ParseError("unary internal node")
            stack.extend(node.children)


def _collapse_zero_edges(root: Node) -> None:
    # bottom-up: splice children of zero-length internal edges into parent
    def collapse(node: Node) -> None:
        for child in list(node.children):
            collapse(child)
            if not child.is_leaf() and child.length == 0.0:
                k = node.children.index(child)
                node.children[k : k + 1] = child.children
    collapse(root)


def _fmt_weight(w: float) -> str:
    i = int(w)
    return str(i) if i == w else repr(w)


def write_newick(tree: Tree) -> str:
    """Serialize with deterministic child order (smallest leaf label first)."""

    def render(node: Node) -> str:
        if node.is_leaf():
            body = node.label
        else:
            kids = sorted(node.children, key=_min_leaf)
            body = "(" + ",".join(render(k) for k in kids) + ")"
        if node.length is not None:
            body += ":" + _fmt_weight(node.length)
        return body

    return render(tree.root) + ";"


ALPHABETS = {"binary": "01", "dna": "acgt", "ternary": "-0+"}


@dataclass
class Alignment:
    """Character matrix over a small alphabet, rows = taxa.

    ``data`` holds alphabet indices (uint8).  ``column_weights`` are the
    integer multiplicities used by weighted estimators and by the
    bootstrap; parsers set them all to 1.
    """

    taxa: list[str]
    data: np.ndarray
    alphabet: str
    column_weights: np.ndarray = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.uint8)
        if self.column_weights is None:
            self.column_weights = np.ones(self.data.shape[1], dtype=np.int64)
        self.column_weights = np.asarray(self.column_weights, dtype=np.int64)
        if len(self.taxa) != self.data.shape[0]:
            raise ValidationError("taxa count does not match matrix rows")
        if self.column_weights.shape != (self.data.shape[1],):
            raise ValidationError("column_weights length mismatch")
        if (self.column_weights < 0).any():
            raise ValidationError("column weights must be nonnegative")
        if self.data.size and self.data.max() >= len(self.alphabet):
            raise ValidationError("character code outside alphabet")
        if len(set(self.taxa)) != len(self.taxa):
            raise ValidationError("duplicate taxon names")

    @property
    def n_taxa(self) -> int:
        return self.data.shape[0]

    @property
    def n_sites(self) -> int:
        return self.data.shape[1]

    def row_text(self, i: int) -> str:
        return "".join(self.alphabet[c] for c in self.data[i])

    def with_weights(self, weights) -> "Alignment":
        return Alignment(self.taxa, self.data, self.alphabet, weights)

    def to_fasta(self) -> str:
        chunks = []
        for i, name in enumerate(self.taxa):
            chunks.append(f">{name}\n{self.row_text(i)}\n")
        return "".join(chunks)


def _infer_alphabet(chars: set[str]) -> str:
    if chars <= set("01"):
        return "01"
    if chars <= set("acgt"):
        return "acgt"
    if chars <= set("-0+"):
        return "-0+"
    raise ParseError(f"unknown characters {sorted(chars)!r}: expected binary 01, "
                     "DNA acgt, or ternary -0+ (gaps are not supported)")


def _rows_to_alignment(names: list[str], seqs: list[str], alphabet: str | None) -> Alignment:
    if not names:
        raise ParseError("empty alignment")
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise ParseError("rows of unequal length")
    if lengths == {0}:
        raise ParseError("empty sequences")
    joined = [s.lower() for s in seqs]
    if alphabet is None:
        alphabet = _infer_alphabet(set("".join(joined)))
    else:
        alphabet = ALPHABETS.get(alphabet, alphabet)
    index = {ch: k for k, ch in enumerate(alphabet)}
    try:
        data = np.array([[index[ch] for ch in s] for s in joined], dtype=np.uint8)
    except KeyError as exc:
        raise ParseError(f"character {exc.args[0]!r} not in alphabet {alphabet!r}") from exc
    return Alignment(list(names), data, alphabet)


def parse_alignment(text: str, format: str = "fasta", alphabet: str | None = None) -> Alignment:
    """Read FASTA ('>' headers) or relaxed PHYLIP (count header, then
    'name sequence' rows).  All column weights start at 1."""
    if format == "fasta":
        return _parse_fasta(text, alphabet)
    if format == "phylip":
        return _parse_phylip(text, alphabet)
    raise ParseError(f"unknown alignment format {format!r}")


def _parse_fasta(text: str, alphabet: str | None) -> Alignment:
    names: list[str] = []
    seqs: list[str] = []
    cur: list[str] | None = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            name = line[1:].split()[0] if line[1:].split() else ""
            if not name:
                raise ParseError("FASTA header without a name")
            names.append(name)
            cur = []
            seqs.append(cur)
        else:
            if cur is None:
                raise ParseError("sequence data before first '>' header")
            cur.append(line)
    return _rows_to_alignment(names, ["".join(c) for c in seqs], alphabet)


def _parse_phylip(text: str, alphabet: str | None) -> Alignment:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty input")
    head = lines[0].split()
    if len(head) != 2:
        raise ParseError("PHYLIP header must be 'ntaxa nsites'")
    try:
        ntax, nsites = int(head[0]), int(head[1])
    except ValueError as exc:
        raise ParseError("PHYLIP header must be two integers") from exc
    rows = lines[1:]
    if len(rows) != ntax:
        raise ParseError(f"expected {ntax} rows, found {len(rows)}")
    names, seqs = [], []
    for row in rows:
        parts = row.split()
        if len(parts) < 2:
            raise ParseError(f"bad PHYLIP row {row!r}")
        names.append(parts[0])
        seqs.append("".join(parts[1:]))
    aln = _rows_to_alignment(names, seqs, alphabet)
    if aln.n_sites != nsites:
        raise ParseError(f"header says {nsites} sites, rows have {aln.n_sites}")
    return aln


def parse_trees(text: str, collapse_zero: bool = False) -> list[Tree]:
    """Parse a file of one Newick statement per ';' (newlines optional)."""
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            out.append(parse_newick(chunk + ";", collapse_zero=collapse_zero))
    if not out:
        raise ParseError("no trees found")
    return out
