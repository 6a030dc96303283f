"""Shared builders for the example operators used across the tests."""

from __future__ import annotations

import math
import random

import treeshift as ts
from treeshift import tree
from treeshift.measure import AtomicMeasure
from treeshift.shift import (
    BranchRule,
    BroomWeights,
    ChainWeights,
    ConstantTail,
    WeightSystem,
)


def broom_weights(eta, kappa, branch_specs, trunk_head=()):
    """branch_specs: per branch, (head tuple, constant tail value)."""
    branches = tuple(
        BranchRule(head=tuple(head), tail=ConstantTail(tail), start=1)
        for head, tail in branch_specs
    )
    trunk = BranchRule(head=tuple(trunk_head), tail=None, start=0) if trunk_head else None
    return WeightSystem(rules=BroomWeights(eta=eta, kappa=kappa, branches=branches, trunk=trunk))


def chain_weights(kind, pos=None, neg=None):
    def mk(spec, start):
        if spec is None:
            return None
        head, tail = spec
        return BranchRule(head=tuple(head), tail=tail, start=start)

    return WeightSystem(rules=ChainWeights(kind=kind, pos=mk(pos, 1), neg=mk(neg, 0)))


def ones_chain(kind):
    pos = ((), ConstantTail(1.0))
    neg = ((), ConstantTail(1.0))
    if kind == "z_plus":
        return chain_weights(kind, pos=pos)
    if kind == "z_minus":
        return chain_weights(kind, neg=neg)
    return chain_weights(kind, pos=pos, neg=neg)


# -- named example systems ---------------------------------------------------


def hyponormal_two_branch(q=4.0, r=8.0, s=1.0, t=1.9):
    """Broom with one trunk step: hyponormal, square not hyponormal."""
    w = broom_weights(2, 1, [((q,), r), ((s,), t)], trunk_head=(q,))
    return ts.broom(2, 1), w


def paranormal_not_hyponormal():
    """Rooted double branch: paranormal but not hyponormal."""
    w = broom_weights(2, 0, [((1.0,), 2.0), ((1.0, 0.5), 1.0)])
    return ts.broom(2, 0), w


def two_threads(a=0.6, b=0.8):
    """Unit power norms at the branch vertex, non-moment sequences below."""
    w = broom_weights(2, 0, [((a, b / a, a / b), 1.0), ((b, a / b, b / a), 1.0)])
    return ts.broom(2, 0), w


def p_separating(lam0, a, b):
    """One trunk step, 1/sqrt2 first-level weights, constant 1/a and 1/b tails."""
    w = broom_weights(
        2, 1,
        [((1 / math.sqrt(2),), 1 / a), ((1 / math.sqrt(2),), 1 / b)],
        trunk_head=(lam0,),
    )
    return ts.broom(2, 1), w


def stem_binary(depth, alpha, beta):
    """Rooted stem feeding a full binary tree; alpha inside, beta outside.

    Hyponormal; the square fails at (2,2) once alpha > 2*beta.
    """
    verts = ["0", "(1,1)"]
    edges = [("0", "(1,1)")]
    weights = {"(1,1)": alpha}
    prev = ["(1,1)"]
    for i in range(2, depth + 1):
        cur = []
        for j in range(1, 2 ** (i - 1) + 1):
            v = f"({i},{j})"
            verts.append(v)
            parent = prev[(j - 1) // 2]
            edges.append((parent, v))
            weights[v] = alpha if j <= 2 ** (i - 2) else beta
            cur.append(v)
        prev = cur
    t = tree.validate(verts, edges)
    m = tree.explicit_truncation(t, incomplete=prev)
    return m, WeightSystem(base=weights)


def side_branch_chain(n_chain=20, decay=0.02, side_weight=0.0):
    """Rootless-truncated chain with (by default dead) side leaves."""
    verts = [f"c{i}" for i in range(n_chain)]
    edges = [(f"c{i}", f"c{i+1}") for i in range(n_chain - 1)]
    side = []
    for i in range(2, n_chain - 1, 2):
        verts.append(f"s{i}")
        edges.append((f"c{i}", f"s{i}"))
        side.append(f"s{i}")
    t = tree.validate(verts, edges)
    m = tree.explicit_truncation(t, incomplete=[f"c{n_chain-1}"], rootless=True)
    base = {f"c{i+1}": 1.0 / (1.0 + decay * i) for i in range(n_chain - 1)}
    base.update({s: side_weight for s in side})
    return m, WeightSystem(base=base), side


def random_tree(rng: random.Random, n: int) -> tree.DirectedTree:
    verts = [f"v{i}" for i in range(n)]
    edges = [(verts[rng.randrange(i)], verts[i]) for i in range(1, n)]
    return tree.validate(verts, edges)


def random_weights(rng: random.Random, t, lo=0.0, hi=3.0, zeros=0.0):
    base = {}
    for v in t.vertices:
        if t.parent.get(v) is None:
            continue
        base[v] = 0.0 if rng.random() < zeros else rng.uniform(lo, hi)
    return WeightSystem(base=base)


TWO_ATOM = AtomicMeasure.from_pairs([(0.5, 0.5), (1.0, 0.5)])
