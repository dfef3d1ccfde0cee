"""Binary merger trees: shapes, historical trees, symmetry counts, and a text format.

A *shape* is an unlabeled binary tree; a *historical tree* additionally carries
leaf masses and internal coagulation times.  Both are immutable and kept in a
canonical form (children sorted under a fixed total order) so that structural
equality is insensitive to child order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional


class TreeError(ValueError):
    pass


class ParseError(TreeError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


# ---------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class TreeShape:
    """Unlabeled binary tree; ``LEAF`` or an internal node with two children.

    Construct internal nodes through :func:`shape_node`, which sorts the
    children into canonical order.  Equality and hashing are structural.
    """

    left: Optional["TreeShape"] = None
    right: Optional["TreeShape"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @cached_property
    def n_leaves(self) -> int:
        if self.is_leaf:
            return 1
        return self.left.n_leaves + self.right.n_leaves

    @cached_property
    def serial(self) -> str:
        if self.is_leaf:
            return "1"
        return "{%s,%s}" % (self.left.serial, self.right.serial)

    def sort_key(self) -> tuple:
        return (self.n_leaves, self.serial)

    def __repr__(self) -> str:
        return f"TreeShape({self.serial})"


LEAF = TreeShape()


def shape_node(a: TreeShape, b: TreeShape) -> TreeShape:
    """Internal node with children in canonical order."""
    if b.sort_key() < a.sort_key():
        a, b = b, a
    return TreeShape(a, b)


def shapes_with_leaves(n: int) -> list[TreeShape]:
    """All canonical shapes with exactly ``n`` leaves."""
    if n < 1:
        return []
    if n == 1:
        return [LEAF]
    out = set()
    for k in range(1, n // 2 + 1):
        for a in shapes_with_leaves(k):
            for b in shapes_with_leaves(n - k):
                out.add(shape_node(a, b))
    return sorted(out, key=TreeShape.sort_key)


def shapes_up_to(n_max: int) -> list[TreeShape]:
    out: list[TreeShape] = []
    for n in range(1, n_max + 1):
        out.extend(shapes_with_leaves(n))
    return out


# ---------------------------------------------------------------------------
# historical trees


@dataclass(frozen=True)
class HistoricalTree:
    """Merger history of one cluster: leaf masses plus internal merge times.

    A leaf holds a positive ``mass_value`` (and optionally an integer particle
    ``label``); an internal node holds the merge ``time`` and two children whose
    own times do not exceed it.  Instances are immutable; build nodes through
    :func:`hist_node` so children are stored canonically.
    """

    mass_value: Optional[float] = None
    label: Optional[int] = None
    time: Optional[float] = None
    left: Optional["HistoricalTree"] = None
    right: Optional["HistoricalTree"] = None

    def __post_init__(self):
        if self.left is None:
            if self.mass_value is None or not self.mass_value > 0:
                raise TreeError("leaf mass must be positive")
        else:
            if self.time is None or not self.time > 0:
                raise TreeError("merge time must be positive")
            for child in (self.left, self.right):
                if not child.is_leaf and child.time > self.time:
                    raise TreeError(
                        f"non-monotone times: child at {child.time} above parent at {self.time}"
                    )

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @cached_property
    def n_leaves(self) -> int:
        if self.is_leaf:
            return 1
        return self.left.n_leaves + self.right.n_leaves

    @cached_property
    def mass(self) -> float:
        if self.is_leaf:
            return self.mass_value
        return self.left.mass + self.right.mass

    @cached_property
    def serial(self) -> str:
        if self.is_leaf:
            return repr(float(self.mass_value))
        return f"({self.left.serial},{self.right.serial})@{float(self.time)!r}"

    def sort_key(self) -> tuple:
        return (self.n_leaves, self.serial)

    def __repr__(self) -> str:
        return f"HistoricalTree({self.serial})"

    def walk(self) -> Iterator["HistoricalTree"]:
        """Post-order traversal (children before parent)."""
        if not self.is_leaf:
            yield from self.left.walk()
            yield from self.right.walk()
        yield self

    def internal_nodes(self) -> list["HistoricalTree"]:
        return [v for v in self.walk() if not v.is_leaf]


def hist_leaf(mass: float, label: Optional[int] = None) -> HistoricalTree:
    return HistoricalTree(mass_value=float(mass), label=label)


def hist_node(time: float, a: HistoricalTree, b: HistoricalTree) -> HistoricalTree:
    """Internal node; children stored in canonical order."""
    if b.sort_key() < a.sort_key():
        a, b = b, a
    return HistoricalTree(time=float(time), left=a, right=b)


# ---------------------------------------------------------------------------
# basic functionals on trees


def count_leaves(x) -> int:
    return x.n_leaves


def mass(xi: HistoricalTree) -> float:
    return xi.mass


def symmetry_exponent(tau: TreeShape) -> int:
    """Number of internal nodes whose two child subtrees are equal shapes."""
    if tau.is_leaf:
        return 0
    extra = 1 if tau.left == tau.right else 0
    return symmetry_exponent(tau.left) + symmetry_exponent(tau.right) + extra


def epsilon(tau: TreeShape) -> float:
    """Symmetry correction: 1 if the two children differ, 1/2 if equal."""
    if tau.is_leaf:
        raise TreeError("epsilon undefined for a single leaf")
    return 0.5 if tau.left == tau.right else 1.0


def shape_of(xi: HistoricalTree) -> TreeShape:
    if xi.is_leaf:
        return LEAF
    return shape_node(shape_of(xi.left), shape_of(xi.right))


def forget_times(xi: HistoricalTree):
    """Nested unordered pairs of masses (times and labels erased).

    Leaves map to a float; internal nodes map to a 2-tuple in canonical order.
    """
    if xi.is_leaf:
        return float(xi.mass_value)

    def key(x):
        if isinstance(x, float):
            return (1, repr(x))
        return (_mt_leaves(x), repr(x))

    a, b = forget_times(xi.left), forget_times(xi.right)
    if key(b) < key(a):
        a, b = b, a
    return (a, b)


def _mt_leaves(x) -> int:
    if isinstance(x, float):
        return 1
    return _mt_leaves(x[0]) + _mt_leaves(x[1])


def forget_labels(xi: HistoricalTree) -> HistoricalTree:
    """Drop leaf labels; preserves masses and times, re-canonicalizes."""
    if xi.is_leaf:
        return hist_leaf(xi.mass_value)
    return hist_node(xi.time, forget_labels(xi.left), forget_labels(xi.right))


def leaf_labels(xi: HistoricalTree) -> list[int]:
    return [v.label for v in xi.walk() if v.is_leaf]


# ---------------------------------------------------------------------------
# lifetime intervals


@dataclass(frozen=True)
class EdgeInterval:
    mass: float
    birth: float
    death: float


def edge_intervals(xi: HistoricalTree, horizon: float) -> list[EdgeInterval]:
    """Lifetime interval of every sub-cluster of ``xi`` up to ``horizon``.

    A leaf is born at 0, a merged cluster at its merge time; each dies at its
    parent's merge time, the root at ``horizon``.  Post-order, one entry per
    node, 2*n_leaves - 1 entries in total.
    """
    out: list[EdgeInterval] = []

    def rec(node: HistoricalTree, death: float):
        if node.is_leaf:
            out.append(EdgeInterval(node.mass, 0.0, death))
            return
        if node.time >= horizon:
            raise TreeError(f"node time {node.time} not below horizon {horizon}")
        rec(node.left, node.time)
        rec(node.right, node.time)
        out.append(EdgeInterval(node.mass, node.time, death))

    rec(xi, float(horizon))
    return out


def clusters_alive_at(xi: HistoricalTree, s: float) -> list[HistoricalTree]:
    """Maximal sub-clusters of ``xi`` already formed at time ``s``."""
    if xi.is_leaf or xi.time <= s:
        return [xi]
    return clusters_alive_at(xi.left, s) + clusters_alive_at(xi.right, s)


def internal_interaction_rate(xi: HistoricalTree, s: float, kernel) -> float:
    """Half-sum of kernel values over ordered pairs of distinct live sub-clusters."""
    live = clusters_alive_at(xi, s)
    total = 0.0
    for i, a in enumerate(live):
        for j, b in enumerate(live):
            if i != j:
                total += kernel.evaluate(a.mass, b.mass)
    return 0.5 * total


def cross_interaction_rate(x1: HistoricalTree, x2: HistoricalTree, s: float, kernel) -> float:
    """Kernel sum over cross pairs of sub-clusters live in two disjoint trees."""
    total = 0.0
    for a in clusters_alive_at(x1, s):
        for b in clusters_alive_at(x2, s):
            total += kernel.evaluate(a.mass, b.mass)
    return total


def kernel_product(xi: HistoricalTree, kernel) -> float:
    """Product of kernel values over the merge events inside ``xi`` (1 for a leaf)."""
    out = 1.0
    for v in xi.internal_nodes():
        out *= kernel.evaluate(v.left.mass, v.right.mass)
    return out


# ---------------------------------------------------------------------------
# labeled trees


def build_tree(shape: TreeShape, masses: list[float], times: list[float]) -> HistoricalTree:
    """Historical tree from ``shape`` with leaf ``masses`` (left to right) and
    internal-node ``times`` in post-order."""
    if len(masses) != shape.n_leaves:
        raise TreeError("need one mass per leaf")
    if len(times) != shape.n_leaves - 1:
        raise TreeError("need one time per internal node")
    mi = iter(masses)
    ti = iter(times)

    def rec(s: TreeShape) -> HistoricalTree:
        if s.is_leaf:
            return hist_leaf(next(mi))
        a = rec(s.left)
        b = rec(s.right)
        return hist_node(next(ti), a, b)

    return rec(shape)


def distinct_labelings(shape: TreeShape, labels: list[int]) -> set:
    """All distinct labeled trees of the given shape over ``labels``.

    Returns canonical nested frozensets; there are n!/2^q of them.
    """
    if len(labels) != shape.n_leaves:
        raise TreeError("label count must match leaf count")
    import itertools

    def key(s: TreeShape, perm: tuple) -> object:
        # canonical labeled-tree key: leaf -> label, node -> frozenset of keys
        if s.is_leaf:
            return perm[0]
        k = s.left.n_leaves
        return frozenset({key(s.left, perm[:k]), key(s.right, perm[k:])})

    return {key(shape, p) for p in itertools.permutations(labels)}


# ---------------------------------------------------------------------------
# text format: leaf = decimal mass, node = "(" child "," child ")" "@" time


def serialize(xi: HistoricalTree) -> str:
    return xi.serial


def parse(text: str, strict: bool = False) -> HistoricalTree:
    """Parse the tree text format; inverse of :func:`serialize` on canonical forms.

    With ``strict=True``, equal times anywhere in the tree are rejected
    (simulation output never produces ties).
    """
    pos = 0

    def error(msg: str):
        raise ParseError(msg, pos)

    def skip_ws():
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1

    def number() -> float:
        nonlocal pos
        start = pos
        while pos < len(text) and (text[pos].isdigit() or text[pos] in "+-.eE"):
            pos += 1
        if pos == start:
            error("expected a number")
        try:
            return float(text[start:pos])
        except ValueError:
            pos = start
            error(f"bad number {text[start:pos + 20]!r}")

    def node() -> HistoricalTree:
        nonlocal pos
        skip_ws()
        if pos >= len(text):
            error("unexpected end of input")
        if text[pos] == "(":
            pos += 1
            a = node()
            skip_ws()
            if pos >= len(text) or text[pos] != ",":
                error("expected ','")
            pos += 1
            b = node()
            skip_ws()
            if pos >= len(text) or text[pos] != ")":
                error("expected ')'")
            pos += 1
            skip_ws()
            if pos >= len(text) or text[pos] != "@":
                error("expected '@' with a merge time")
            pos += 1
            t = number()
            try:
                return hist_node(t, a, b)
            except TreeError as e:
                error(str(e))
        val = number()
        if not val > 0:
            error("leaf mass must be positive")
        return hist_leaf(val)

    tree = node()
    skip_ws()
    if pos != len(text):
        error("trailing input")
    if strict:
        times = [v.time for v in tree.walk() if not v.is_leaf]
        if len(times) != len(set(times)):
            raise ParseError("duplicate merge times under strict validation", 0)
        for v in tree.walk():
            if not v.is_leaf:
                for c in (v.left, v.right):
                    if not c.is_leaf and c.time == v.time:
                        raise ParseError("tied parent/child times under strict validation", 0)
    return tree
