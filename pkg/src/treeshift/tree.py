"""Directed-tree combinatorics: validation, navigation, structural sets, index.

Vertices are opaque strings.  The built-in infinite families render their
vertices as ``"-k"``, ``"0"`` and ``"(i,j)"``; explicit trees may use any
labels.  Infinite trees are never stored whole: a family is materialized to a
finite prefix together with per-vertex completeness flags.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional

__all__ = [
    "ValidationError",
    "DisconnectedError",
    "CircuitError",
    "MultipleParentsError",
    "MultipleRootsError",
    "UnknownVertexError",
    "EmptyComplementError",
    "NotFredholmError",
    "IndeterminateError",
    "DirectedTree",
    "StructuralSets",
    "TreeFamily",
    "Materialized",
    "vertex_key",
    "validate",
    "descendants",
    "structural_sets",
    "tree_index",
    "split_at",
    "as_complete",
    "explicit_truncation",
]


class ValidationError(ValueError):
    """Input graph is not a directed tree."""


class DisconnectedError(ValidationError):
    pass


class CircuitError(ValidationError):
    def __init__(self, cycle):
        super().__init__(f"circuit found: {' -> '.join(cycle)}")
        self.cycle = tuple(cycle)


class MultipleParentsError(ValidationError):
    def __init__(self, vertex):
        super().__init__(f"vertex {vertex!r} has more than one parent")
        self.vertex = vertex


class MultipleRootsError(ValidationError):
    def __init__(self, roots):
        super().__init__(f"more than one root: {sorted(roots)}")
        self.roots = frozenset(roots)


class UnknownVertexError(KeyError):
    pass


class EmptyComplementError(ValueError):
    pass


class NotFredholmError(ValueError):
    """The tree has infinitely many branching vertices or an infinite sibling set."""


class IndeterminateError(ValueError):
    """Structural data is not finitely determined at the requested depth."""


_PAIR_RE = re.compile(r"^\((-?\d+),(-?\d+)\)$")


def vertex_key(v: str):
    """Canonical sort key: integers, then (i,j) pairs, then plain strings."""
    try:
        return (0, int(v), 0)
    except ValueError:
        pass
    m = _PAIR_RE.match(v)
    if m:
        return (1, int(m.group(1)), int(m.group(2)))
    return (2, v, 0)


def _sorted_vertices(vs: Iterable[str]) -> tuple:
    return tuple(sorted(vs, key=vertex_key))


@dataclass(frozen=True)
class DirectedTree:
    """A finite directed tree with explicit parent and children maps.

    Instances are immutable; construct them through :func:`validate` (or the
    family materializers) so the invariants are guaranteed.
    """

    vertices: tuple
    parent: Mapping[str, str]
    children: Mapping[str, tuple]
    root: Optional[str]

    def __contains__(self, v) -> bool:
        return v in self.children

    def children_of(self, u: str) -> tuple:
        try:
            return self.children[u]
        except KeyError:
            raise UnknownVertexError(u) from None

    def parent_of(self, v: str) -> Optional[str]:
        if v not in self.children:
            raise UnknownVertexError(v)
        return self.parent.get(v)

    def non_root_vertices(self) -> tuple:
        return tuple(v for v in self.vertices if v != self.root)

    def edges(self) -> tuple:
        return tuple((self.parent[v], v) for v in self.vertices if v in self.parent)


@dataclass(frozen=True)
class StructuralSets:
    leaves: frozenset
    branching: frozenset
    vprime: frozenset


def _build(vertices, parent) -> DirectedTree:
    children: dict = {v: [] for v in vertices}
    for v, u in parent.items():
        children[u].append(v)
    children = {u: _sorted_vertices(cs) for u, cs in children.items()}
    roots = [v for v in vertices if v not in parent]
    root = roots[0] if len(roots) == 1 else None
    return DirectedTree(
        vertices=_sorted_vertices(vertices),
        parent=dict(parent),
        children=children,
        root=root,
    )


def validate(vertices: Iterable[str], edges: Iterable[tuple]) -> DirectedTree:
    """Check that (vertices, edges) is a directed tree and build it.

    Raises :class:`MultipleParentsError`, :class:`CircuitError`,
    :class:`DisconnectedError` or :class:`MultipleRootsError` otherwise.
    """
    vs = [str(v) for v in vertices]
    vset = set(vs)
    if len(vs) != len(vset):
        raise ValidationError("duplicate vertex ids")
    if not vset:
        raise ValidationError("empty vertex set")
    parent: dict = {}
    for u, v in edges:
        u, v = str(u), str(v)
        if u not in vset or v not in vset:
            raise ValidationError(f"edge ({u},{v}) mentions an unknown vertex")
        if u == v:
            raise ValidationError(f"self-loop at {u!r}")
        if v in parent:
            raise MultipleParentsError(v)
        parent[v] = u

    # Circuits: follow parents; with unique parents any circuit is a parent cycle.
    state: dict = {}  # 0 = in progress, 1 = done
    for start in vs:
        if state.get(start) == 1:
            continue
        path = []
        v = start
        while v is not None and state.get(v) != 1:
            if state.get(v) == 0:
                cycle = path[path.index(v):] + [v]
                raise CircuitError(cycle)
            state[v] = 0
            path.append(v)
            v = parent.get(v)
        for w in path:
            state[w] = 1

    # Connectivity of the undirected graph.
    adj: dict = {v: set() for v in vs}
    for v, u in parent.items():
        adj[u].add(v)
        adj[v].add(u)
    seen = {vs[0]}
    stack = [vs[0]]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    if len(seen) != len(vset):
        raise DisconnectedError(f"{len(vset) - len(seen)} vertices unreachable")

    roots = [v for v in vs if v not in parent]
    if len(roots) > 1:
        raise MultipleRootsError(roots)
    return _build(vset, parent)


def descendants(t: DirectedTree, u: str, n: int) -> frozenset:
    """The n-th descendant level of u (level 0 is {u})."""
    if u not in t.children:
        raise UnknownVertexError(u)
    if n < 0:
        raise ValueError("level must be nonnegative")
    level = {u}
    for _ in range(n):
        level = {w for v in level for w in t.children[v]}
        if not level:
            break
    return frozenset(level)


def structural_sets(t: DirectedTree) -> StructuralSets:
    leaves = frozenset(v for v in t.vertices if not t.children[v])
    branching = frozenset(v for v in t.vertices if len(t.children[v]) >= 2)
    return StructuralSets(
        leaves=leaves, branching=branching, vprime=frozenset(t.vertices) - leaves
    )


def _finite_index(t: DirectedTree) -> int:
    s = structural_sets(t)
    rooted = t.root is not None
    total = len(s.leaves) + len(s.branching) - sum(
        len(t.children[u]) for u in s.branching
    )
    return total - 1 if rooted else total


def tree_index(obj) -> int:
    """Index of a Fredholm directed tree (always <= 1).

    Accepts an explicit :class:`DirectedTree` (taken as the whole tree), a
    :class:`TreeFamily`, or a :class:`Materialized` family prefix.
    """
    if isinstance(obj, Materialized):
        if obj.family is not None:
            return tree_index(obj.family)
        if obj.complete == frozenset(obj.tree.vertices) and not obj.boundary_root:
            return _finite_index(obj.tree)
        raise IndeterminateError("truncated tree without family structure")
    if isinstance(obj, DirectedTree):
        return _finite_index(obj)
    if isinstance(obj, TreeFamily):
        return obj._index()
    raise TypeError(f"cannot compute index of {type(obj).__name__}")


def split_at(t: DirectedTree, u: str) -> tuple:
    """Split into (subtree of descendants of u, complement subtree)."""
    if u not in t.children:
        raise UnknownVertexError(u)
    des = set()
    stack = [u]
    while stack:
        x = stack.pop()
        des.add(x)
        stack.extend(t.children[x])
    rest = set(t.vertices) - des
    if not rest:
        raise EmptyComplementError(f"descendants of {u!r} exhaust the tree")
    sub = _build(des, {v: t.parent[v] for v in des if v != u})
    comp = _build(rest, {v: t.parent[v] for v in rest if v in t.parent})
    return sub, comp


@dataclass(frozen=True)
class Materialized:
    """A finite prefix of a (possibly infinite) directed tree.

    ``complete`` lists the vertices all of whose children are present;
    ``boundary_root`` is set when the materialized root is an artifact of the
    truncation (the true tree continues upward).
    """

    tree: DirectedTree
    complete: frozenset
    boundary_root: bool = False
    family: Optional["TreeFamily"] = None
    depth: int = 0

    def is_complete(self, v: str) -> bool:
        return v in self.complete

    def has_true_root(self) -> bool:
        return self.tree.root is not None and not self.boundary_root

    def true_root(self) -> Optional[str]:
        return self.tree.root if self.has_true_root() else None

    def levels(self) -> dict:
        """Distance from the materialized root, per vertex."""
        out = {self.tree.root: 0}
        stack = [self.tree.root]
        while stack:
            u = stack.pop()
            for v in self.tree.children[u]:
                out[v] = out[u] + 1
                stack.append(v)
        return out


def as_complete(t: DirectedTree) -> Materialized:
    """Wrap a genuinely finite tree (every vertex complete)."""
    return Materialized(tree=t, complete=frozenset(t.vertices), family=None)


def explicit_truncation(
    t: DirectedTree, incomplete: Iterable[str] = (), rootless: bool = False
) -> Materialized:
    """Mark an explicit tree as a truncation of a larger one.

    ``incomplete`` lists vertices with missing children; ``rootless`` marks the
    root as a truncation artifact of a rootless tree.
    """
    inc = frozenset(str(v) for v in incomplete)
    unknown = inc - set(t.vertices)
    if unknown:
        raise UnknownVertexError(sorted(unknown)[0])
    return Materialized(
        tree=t,
        complete=frozenset(t.vertices) - inc,
        boundary_root=rootless,
        family=None,
    )


@dataclass(frozen=True)
class FamilyStructure:
    """Finitely-determined structural data a custom generator may declare."""

    rooted: bool
    leaves: int
    branch_children: tuple = ()
    all_children_finite: bool = True


@dataclass(frozen=True)
class TreeFamily:
    """Parameterized infinite tree with depth-bounded materialization.

    Kinds: ``z_plus``, ``z``, ``z_minus``, ``t_eta_kappa`` (broom: a trunk of
    length kappa feeding a branching vertex with eta infinite branches),
    ``binary`` (full binary tree, every vertex has two children) and
    ``custom`` (explicit child generator).
    """

    kind: str
    eta: int = 0
    kappa: float = 0  # nonnegative int, or math.inf
    generator: Optional[Callable[[str], list]] = None
    custom_root: str = "0"
    structure: Optional[FamilyStructure] = None

    def __post_init__(self):
        if self.kind == "t_eta_kappa":
            if not (isinstance(self.eta, int) and self.eta >= 2):
                raise ValueError("eta must be a finite integer >= 2")
            if not (self.kappa == math.inf or (isinstance(self.kappa, int) and self.kappa >= 0)):
                raise ValueError("kappa must be a nonnegative integer or inf")
        elif self.kind == "custom":
            if self.generator is None:
                raise ValueError("custom family needs a generator")
        elif self.kind not in ("z_plus", "z", "z_minus", "binary"):
            raise ValueError(f"unknown family kind {self.kind!r}")

    # -- materialization ------------------------------------------------

    def materialize(self, depth: int) -> Materialized:
        if depth < 1:
            raise ValueError("depth must be >= 1")
        if self.kind == "z_plus":
            vs = [str(n) for n in range(depth + 1)]
            parent = {str(n): str(n - 1) for n in range(1, depth + 1)}
            complete = set(vs) - {str(depth)}
            boundary = False
        elif self.kind == "z":
            vs = [str(n) for n in range(-depth, depth + 1)]
            parent = {str(n): str(n - 1) for n in range(-depth + 1, depth + 1)}
            complete = set(vs) - {str(depth)}
            boundary = True
        elif self.kind == "z_minus":
            vs = [str(-k) for k in range(depth + 1)]
            parent = {str(-k): str(-k - 1) for k in range(depth)}
            complete = set(vs)  # "0" is a genuine leaf
            boundary = True
        elif self.kind == "t_eta_kappa":
            trunk = min(self.kappa, depth)
            trunk = int(trunk)
            vs = [str(-k) for k in range(trunk + 1)]
            parent = {str(-k): str(-k - 1) for k in range(trunk)}
            for i in range(1, self.eta + 1):
                for j in range(1, depth + 1):
                    v = f"({i},{j})"
                    vs.append(v)
                    parent[v] = "0" if j == 1 else f"({i},{j - 1})"
            complete = set(vs) - {f"({i},{depth})" for i in range(1, self.eta + 1)}
            boundary = self.kappa > trunk
        elif self.kind == "binary":
            if depth > 16:
                raise ValueError("binary family materialization capped at depth 16")
            vs = ["0"]
            parent = {}
            for i in range(1, depth + 1):
                for j in range(1, 2 ** i + 1):
                    v = f"({i},{j})"
                    vs.append(v)
                    parent[v] = "0" if i == 1 else f"({i - 1},{(j + 1) // 2})"
            complete = {v for v in vs if v == "0" or int(_PAIR_RE.match(v).group(1)) < depth}
            boundary = False
        else:  # custom
            vs = [self.custom_root]
            parent = {}
            frontier = [self.custom_root]
            for _ in range(depth):
                nxt = []
                for u in frontier:
                    for c in self.generator(u):
                        c = str(c)
                        vs.append(c)
                        parent[c] = u
                        nxt.append(c)
                frontier = nxt
            complete = set(vs) - set(frontier)
            boundary = False
        t = _build(set(vs), parent)
        return Materialized(
            tree=t,
            complete=frozenset(complete),
            boundary_root=boundary,
            family=self,
            depth=depth,
        )

    # -- structural data -------------------------------------------------

    def rooted(self) -> bool:
        if self.kind in ("z_plus", "binary"):
            return True
        if self.kind in ("z", "z_minus"):
            return False
        if self.kind == "t_eta_kappa":
            return self.kappa != math.inf
        return self.structure.rooted if self.structure else True

    def leafless(self) -> bool:
        if self.kind == "z_minus":
            return False
        if self.kind == "custom":
            if self.structure is None:
                raise IndeterminateError("custom family lacks declared structure")
            return self.structure.leaves == 0
        return True

    def _index(self) -> int:
        if self.kind == "z_plus":
            return -1
        if self.kind == "z":
            return 0
        if self.kind == "z_minus":
            return 1
        if self.kind == "t_eta_kappa":
            # one branching vertex with eta children, no leaves
            return (1 - 1 - self.eta) if self.rooted() else (1 - self.eta)
        if self.kind == "binary":
            raise NotFredholmError("every vertex of the binary tree is branching")
        st = self.structure
        if st is None:
            raise IndeterminateError("custom family lacks declared structure")
        if not st.all_children_finite:
            raise NotFredholmError("a vertex has infinitely many children")
        total = st.leaves + len(st.branch_children) - sum(st.branch_children)
        return total - 1 if st.rooted else total


def zplus() -> TreeFamily:
    return TreeFamily(kind="z_plus")


def zline() -> TreeFamily:
    return TreeFamily(kind="z")


def zminus() -> TreeFamily:
    return TreeFamily(kind="z_minus")


def broom(eta: int, kappa) -> TreeFamily:
    return TreeFamily(kind="t_eta_kappa", eta=eta, kappa=kappa)


def binary() -> TreeFamily:
    return TreeFamily(kind="binary")
