"""The weighted shift as a computable object.

A :class:`WeightSystem` assigns a complex weight to every non-root vertex,
either explicitly (``base``) or through family rules (branch heads plus tail
generators).  All operations work on a :class:`~treeshift.tree.Materialized`
prefix and refuse to answer when the truncation cannot support the question.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .measure import AtomicMeasure, moment, ca_sequence
from .tree import IndeterminateError, Materialized, TreeFamily, UnknownVertexError, _PAIR_RE

__all__ = [
    "IncompleteTruncationError",
    "UnknownWeightError",
    "WeightSystem",
    "FredholmData",
    "NormResult",
    "DirectionReport",
    "DomainInclusionReport",
    "ConstantTail",
    "GeometricTail",
    "FactorialTail",
    "AffineTail",
    "MomentRatioTail",
    "CaRatioTail",
    "SequenceTail",
    "TrunkMomentRatioTail",
    "BranchRule",
    "BroomWeights",
    "ChainWeights",
    "BinaryWeights",
    "apply",
    "apply_adjoint",
    "norm",
    "power_norm_squared",
    "polar",
    "modulus_power",
    "fredholm_data",
    "normalize_weights",
    "solve_grading",
    "domain_inclusion_criteria",
    "vec_inner",
    "vec_norm",
    "shift_norms_squared",
]


class IncompleteTruncationError(ValueError):
    def __init__(self, vertex, why=""):
        super().__init__(f"truncation too shallow at {vertex!r}" + (f": {why}" if why else ""))
        self.vertex = vertex


class UnknownWeightError(KeyError):
    pass


# ---------------------------------------------------------------------------
# Tail rules: closed-form weight generators for the un-materialized part.
# Each rule reports its sup/inf over indices >= some start, with an exactness
# flag, so norms and Fredholm data can be promoted from at-depth to exact.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantTail:
    value_: float

    def value(self, idx: int) -> float:
        return self.value_

    def sup(self, start: int):
        return self.value_, True

    def inf(self, start: int):
        return self.value_, True

    def to_json(self):
        return {"kind": "constant", "value": self.value_}


@dataclass(frozen=True)
class GeometricTail:
    """value(i) = scale * ratio**i."""

    scale: float
    ratio: float

    def value(self, idx: int) -> float:
        return self.scale * self.ratio ** idx

    def sup(self, start: int):
        if self.ratio <= 1.0:
            return self.value(start), True
        return math.inf, True

    def inf(self, start: int):
        if self.ratio >= 1.0:
            return self.value(start), True
        return 0.0, True

    def to_json(self):
        return {"kind": "power", "scale": self.scale, "ratio": self.ratio}


@dataclass(frozen=True)
class FactorialTail:
    """value(i) = scale * i!."""

    scale: float = 1.0

    def value(self, idx: int) -> float:
        return self.scale * math.factorial(idx)

    def sup(self, start: int):
        return math.inf, True

    def inf(self, start: int):
        return self.value(start), True

    def to_json(self):
        return {"kind": "factorial", "scale": self.scale}


@dataclass(frozen=True)
class AffineTail:
    """value(i) = i + 1 - k_n on [k_n, k_{n+1}); the break gaps must grow.

    Models saw-tooth weight schedules; declared unbounded, so the sup is inf.
    """

    breaks: tuple

    def value(self, idx: int) -> float:
        if idx < self.breaks[0]:
            raise ValueError(f"index {idx} precedes first break")
        k = max(b for b in self.breaks if b <= idx)
        return float(idx + 1 - k)

    def sup(self, start: int):
        return math.inf, True

    def inf(self, start: int):
        return 1.0, True

    def to_json(self):
        return {"kind": "affine", "breaks": list(self.breaks)}


@dataclass(frozen=True)
class MomentRatioTail:
    """value(j)**2 = m_{j-1}/m_{j-2} for the moments of a fixed measure.

    The ratios increase to the top of the support, so the sup is exact.
    """

    measure: AtomicMeasure

    def value(self, idx: int) -> float:
        return math.sqrt(moment(self.measure, idx - 1) / moment(self.measure, idx - 2))

    def sup(self, start: int):
        return math.sqrt(self.measure.support_max()), True

    def inf(self, start: int):
        return self.value(start), True

    def to_json(self):
        return {"kind": "moment_ratio", "atoms": [[p, m] for p, m in self.measure.atoms]}


@dataclass(frozen=True)
class CaRatioTail:
    """value(j)**2 = a_{j-1}/a_{j-2} with a_n = 1 + integral of (1+...+s^(n-1)).

    The ratios decrease to 1, so both extremes are exact.
    """

    tau: AtomicMeasure

    def _a(self, n: int) -> float:
        return ca_sequence(1.0, self.tau, n)[n]

    def value(self, idx: int) -> float:
        return math.sqrt(self._a(idx - 1) / self._a(idx - 2))

    def sup(self, start: int):
        return self.value(start), True

    def inf(self, start: int):
        return 1.0, True

    def to_json(self):
        return {"kind": "ca_ratio", "atoms": [[p, m] for p, m in self.tau.atoms]}


@dataclass(frozen=True)
class TrunkMomentRatioTail:
    """Trunk weights of the subnormal model on the rootless broom.

    value(k)**2 = (sum_i c_i^2 m_i(-(k+1))) / (sum_i c_i^2 m_i(-(k+2))),
    a nonincreasing sequence, so the sup is its first value.
    """

    lambda1: tuple
    measures: tuple

    def _s(self, order: int) -> float:
        return sum(
            c ** 2 * moment(mu, -order) for c, mu in zip(self.lambda1, self.measures)
        )

    def value(self, idx: int) -> float:
        return math.sqrt(self._s(idx + 1) / self._s(idx + 2))

    def sup(self, start: int):
        return self.value(start), True

    def inf(self, start: int):
        return 0.0, False  # limit exists but is measure-dependent; report lower bound

    def to_json(self):
        return {
            "kind": "trunk_moment_ratio",
            "lambda1": list(self.lambda1),
            "measures": [[[p, m] for p, m in mu.atoms] for mu in self.measures],
        }


@dataclass(frozen=True)
class SequenceTail:
    """Arbitrary callable tail with declared sup/inf (tests and one-offs)."""

    fn: object
    declared_sup: float = math.inf
    declared_inf: float = 0.0
    exact: bool = False

    def value(self, idx: int) -> float:
        return self.fn(idx)

    def sup(self, start: int):
        return self.declared_sup, self.exact

    def inf(self, start: int):
        return self.declared_inf, self.exact

    def to_json(self):
        raise TypeError("sequence tails are not serializable")


def tail_from_json(d: dict):
    kind = d["kind"]
    if kind == "constant":
        return ConstantTail(float(d["value"]))
    if kind == "power":
        return GeometricTail(float(d.get("scale", 1.0)), float(d["ratio"]))
    if kind == "factorial":
        return FactorialTail(float(d.get("scale", 1.0)))
    if kind == "affine":
        return AffineTail(tuple(int(b) for b in d["breaks"]))
    if kind == "moment_ratio":
        return MomentRatioTail(AtomicMeasure.from_pairs(d["atoms"]))
    if kind == "ca_ratio":
        return CaRatioTail(AtomicMeasure.from_pairs(d["atoms"]))
    if kind == "trunk_moment_ratio":
        return TrunkMomentRatioTail(
            tuple(float(x) for x in d["lambda1"]),
            tuple(AtomicMeasure.from_pairs(a) for a in d["measures"]),
        )
    raise ValueError(f"unknown tail kind {kind!r}")


@dataclass(frozen=True)
class BranchRule:
    """Weights along one chain: explicit head values, then a tail rule.

    ``start`` is the index of ``head[0]``; ``tail.value(idx)`` covers
    idx >= start + len(head).
    """

    head: tuple
    tail: Optional[object] = None
    start: int = 1

    def value(self, idx: int) -> complex:
        off = idx - self.start
        if 0 <= off < len(self.head):
            return self.head[off]
        if off < 0:
            raise UnknownWeightError(idx)
        if self.tail is None:
            raise UnknownWeightError(idx)
        return self.tail.value(idx)

    def tail_start(self) -> int:
        return self.start + len(self.head)

    def sup_abs(self):
        vals = [abs(v) for v in self.head]
        if self.tail is None:
            return (max(vals) if vals else 0.0), True
        ts, exact = self.tail.sup(self.tail_start())
        vals.append(ts)
        return max(vals), exact

    def inf_abs_nonzero(self):
        """Infimum of nonzero |values|; (None, True) when all values are zero."""
        vals = [abs(v) for v in self.head if v != 0]
        if self.tail is None:
            return (min(vals) if vals else None), True
        ti, exact = self.tail.inf(self.tail_start())
        if ti == 0.0 and isinstance(self.tail, ConstantTail):
            return (min(vals) if vals else None), exact
        vals.append(ti)
        return min(vals), exact

    def to_json(self):
        out = {"head": [_num_to_json(v) for v in self.head], "start": self.start}
        if self.tail is not None:
            out["tail"] = self.tail.to_json()
        return out


def _num_to_json(v):
    v = complex(v)
    if v.imag == 0.0:
        return v.real
    return [v.real, v.imag]


def _num_from_json(x) -> complex:
    if isinstance(x, (list, tuple)):
        return complex(float(x[0]), float(x[1]))
    return complex(float(x))


# ---------------------------------------------------------------------------
# Family weight rules: map a vertex id to (rule, index).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BroomWeights:
    """Rules on the broom: trunk positions -k carry lambda_{-k} (k=0..kappa-1
    for a finite trunk, all k when the trunk is infinite); branch i carries
    lambda_{i,j} for j >= 1."""

    eta: int
    kappa: float
    branches: tuple  # eta BranchRules, index j starting at 1
    trunk: Optional[BranchRule] = None  # index k of lambda_{-k}, starting at 0

    def lookup(self, v: str):
        m = _PAIR_RE.match(v)
        if m:
            i, j = int(m.group(1)), int(m.group(2))
            if not (1 <= i <= self.eta) or j < 1:
                raise UnknownWeightError(v)
            return self.branches[i - 1], j
        k = -int(v)
        if k < 0:
            raise UnknownWeightError(v)
        if self.kappa != math.inf and k >= self.kappa:
            raise UnknownWeightError(v)  # the root carries no weight
        if self.trunk is None:
            raise UnknownWeightError(v)
        return self.trunk, k

    def rules(self):
        out = list(self.branches)
        if self.trunk is not None:
            out.append(self.trunk)
        return out

    def to_json(self):
        out = {
            "tails": [dict(branch=i + 1, **b.to_json()) for i, b in enumerate(self.branches)]
        }
        if self.trunk is not None:
            out["trunk"] = self.trunk.to_json()
        return out


@dataclass(frozen=True)
class ChainWeights:
    """Rules on a line: ``pos`` covers vertices n >= 1 (weight index n),
    ``neg`` covers n <= 0 (index k of lambda_{-k})."""

    kind: str  # z_plus | z | z_minus
    pos: Optional[BranchRule] = None
    neg: Optional[BranchRule] = None

    def lookup(self, v: str):
        n = int(v)
        if n >= 1:
            if self.kind == "z_minus" or self.pos is None:
                raise UnknownWeightError(v)
            return self.pos, n
        if self.kind == "z_plus":
            raise UnknownWeightError(v)  # 0 is the root
        if self.neg is None:
            raise UnknownWeightError(v)
        return self.neg, -n

    def rules(self):
        return [r for r in (self.pos, self.neg) if r is not None]

    def to_json(self):
        out = {}
        if self.pos is not None:
            out["pos"] = self.pos.to_json()
        if self.neg is not None:
            out["neg"] = self.neg.to_json()
        return out


@dataclass(frozen=True)
class BinaryWeights:
    """Rules on the full binary tree with a distinguished spine.

    The spine vertices (i,1) carry ``spine.value(i)``; every other non-root
    vertex carries the constant ``off_spine`` weight.
    """

    spine: BranchRule
    off_spine: float = 1.0

    def lookup(self, v: str):
        m = _PAIR_RE.match(v)
        if not m:
            raise UnknownWeightError(v)
        i, j = int(m.group(1)), int(m.group(2))
        if j == 1:
            return self.spine, i
        return BranchRule(head=(), tail=ConstantTail(self.off_spine), start=0), i

    def rules(self):
        return [self.spine, BranchRule(head=(), tail=ConstantTail(self.off_spine), start=0)]

    def to_json(self):
        return {"mu": self.spine.to_json(), "off_spine": self.off_spine}


@dataclass(frozen=True)
class WeightSystem:
    """Weights for all non-root vertices: explicit base plus optional rules."""

    base: Mapping[str, complex] = field(default_factory=dict)
    rules: Optional[object] = None

    def weight(self, v: str) -> complex:
        if v in self.base:
            return self.base[v]
        if self.rules is not None:
            rule, idx = self.rules.lookup(v)
            return rule.value(idx)
        raise UnknownWeightError(v)

    def with_base(self, extra: Mapping[str, complex]) -> "WeightSystem":
        merged = dict(self.base)
        merged.update(extra)
        return WeightSystem(base=merged, rules=self.rules)

    def scaled(self, c: complex) -> "WeightSystem":
        if self.rules is not None:
            raise TypeError("scaling is only supported for explicit weight systems")
        return WeightSystem(base={v: c * w for v, w in self.base.items()})

    def to_json(self) -> dict:
        out: dict = {"base": {v: _num_to_json(w) for v, w in sorted(self.base.items())}}
        if self.rules is not None:
            out.update(self.rules.to_json())
            out["rules_kind"] = type(self.rules).__name__
        return out


def weights_from_json(d: dict, family: Optional[TreeFamily] = None) -> WeightSystem:
    base = {v: _num_from_json(x) for v, x in d.get("base", {}).items()}
    rules = None
    if "tails" in d or "trunk" in d:
        if family is None or family.kind != "t_eta_kappa":
            raise ValueError("branch tail rules need a broom family")
        branches = [None] * family.eta
        for item in d.get("tails", []):
            b = BranchRule(
                head=tuple(_num_from_json(x) for x in item.get("head", [])),
                tail=tail_from_json(item["tail"]) if "tail" in item else None,
                start=int(item.get("start", 1)),
            )
            branches[int(item["branch"]) - 1] = b
        if any(b is None for b in branches):
            raise ValueError("every branch 1..eta needs a rule")
        trunk = None
        if "trunk" in d:
            tr = d["trunk"]
            trunk = BranchRule(
                head=tuple(_num_from_json(x) for x in tr.get("head", [])),
                tail=tail_from_json(tr["tail"]) if "tail" in tr else None,
                start=int(tr.get("start", 0)),
            )
        rules = BroomWeights(eta=family.eta, kappa=family.kappa, branches=tuple(branches), trunk=trunk)
    elif "pos" in d or "neg" in d:
        if family is None or family.kind not in ("z_plus", "z", "z_minus"):
            raise ValueError("chain rules need a line family")
        def mk(key):
            if key not in d:
                return None
            item = d[key]
            return BranchRule(
                head=tuple(_num_from_json(x) for x in item.get("head", [])),
                tail=tail_from_json(item["tail"]) if "tail" in item else None,
                start=int(item.get("start", 1 if key == "pos" else 0)),
            )
        rules = ChainWeights(kind=family.kind, pos=mk("pos"), neg=mk("neg"))
    elif "mu" in d:
        mu = d["mu"]
        rules = BinaryWeights(
            spine=BranchRule(
                head=tuple(_num_from_json(x) for x in mu.get("head", [])),
                tail=tail_from_json(mu["tail"]) if "tail" in mu else None,
                start=int(mu.get("start", 1)),
            ),
            off_spine=float(d.get("off_spine", 1.0)),
        )
    return WeightSystem(base=base, rules=rules)


# ---------------------------------------------------------------------------
# Vectors
# ---------------------------------------------------------------------------


def _clean(f: dict) -> dict:
    return {v: c for v, c in f.items() if c != 0}


def vec_inner(f: Mapping[str, complex], g: Mapping[str, complex]) -> complex:
    return sum(c * g[v].conjugate() for v, c in f.items() if v in g)


def vec_norm(f: Mapping[str, complex]) -> float:
    return math.sqrt(sum(abs(c) ** 2 for c in f.values()))


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------


def apply(w: WeightSystem, m: Materialized, f: Mapping[str, complex]) -> dict:
    """(Sf)(v) = lambda_v f(parent(v)); needs every support vertex complete."""
    out: dict = {}
    for u, c in f.items():
        if c == 0:
            continue
        if u not in m.tree.children:
            raise UnknownVertexError(u)
        if not m.is_complete(u):
            raise IncompleteTruncationError(u, "children missing")
        for v in m.tree.children[u]:
            out[v] = out.get(v, 0) + w.weight(v) * c
    return _clean(out)


def apply_adjoint(w: WeightSystem, m: Materialized, f: Mapping[str, complex]) -> dict:
    """(S*f)(u) = sum over children v of u of conj(lambda_v) f(v)."""
    out: dict = {}
    for v, c in f.items():
        if c == 0:
            continue
        if v not in m.tree.children:
            raise UnknownVertexError(v)
        p = m.tree.parent.get(v)
        if p is None:
            if m.boundary_root:
                raise IncompleteTruncationError(v, "parent missing")
            continue  # true root: S* e_root = 0
        out[p] = out.get(p, 0) + w.weight(v).conjugate() * c
    return _clean(out)


def shift_norms_squared(w: WeightSystem, m: Materialized) -> dict:
    """u -> ||S e_u||^2 over complete vertices."""
    out = {}
    for u in m.complete:
        out[u] = sum(abs(w.weight(v)) ** 2 for v in m.tree.children[u])
    return out


@dataclass(frozen=True)
class NormResult:
    value: float
    exact: bool

    def __float__(self):
        return self.value


def norm(w: WeightSystem, m: Materialized) -> NormResult:
    """sup_u ||S e_u||; exact when tails admit provable sups, else a lower
    bound at the materialization depth."""
    best = 0.0
    for u in m.complete:
        best = max(best, sum(abs(w.weight(v)) ** 2 for v in m.tree.children[u]))
    exact = not m.boundary_root and m.complete == frozenset(m.tree.vertices)
    if w.rules is not None:
        exact = True
        if isinstance(w.rules, BinaryWeights):
            s, ok = w.rules.spine.sup_abs()
            off = w.rules.off_spine
            best = max(best, s ** 2 + off ** 2, 2 * off ** 2)
            exact = ok
        else:
            for rule in w.rules.rules():
                s, ok = rule.sup_abs()
                best = max(best, s ** 2)
                exact = exact and ok
    return NormResult(value=math.sqrt(best), exact=exact)


def power_norm_squared(w: WeightSystem, m: Materialized, u: str, n: int) -> float:
    """||S^n e_u||^2 as a sum of squared path products over n levels."""
    if u not in m.tree.children:
        raise UnknownVertexError(u)
    if n == 0:
        return 1.0
    total = 0.0
    stack = [(u, 0, 1.0)]
    while stack:
        x, k, acc = stack.pop()
        if k == n:
            total += acc
            continue
        if not m.is_complete(x):
            raise IncompleteTruncationError(x, f"need level {n} below {u!r}")
        for v in m.tree.children[x]:
            stack.append((v, k + 1, acc * abs(w.weight(v)) ** 2))
    return total


def polar(w: WeightSystem, m: Materialized) -> tuple:
    """(modulus diagonal on complete vertices, partial-isometry weights).

    pi_v = lambda_v / ||S e_{parent(v)}|| when the parent norm is positive,
    else 0; then S e_u = ||S e_u|| (S_pi e_u) on basis vectors.
    """
    norms = {u: math.sqrt(v) for u, v in shift_norms_squared(w, m).items()}
    pi = {}
    for v in m.tree.vertices:
        p = m.tree.parent.get(v)
        if p is None or p not in norms:
            continue
        pi[v] = w.weight(v) / norms[p] if norms[p] > 0 else 0.0
    return norms, WeightSystem(base=pi)


def modulus_power(w: WeightSystem, m: Materialized, alpha: float) -> dict:
    """u -> ||S e_u||**alpha on complete vertices (diagonal of |S|^alpha)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return {u: v ** (alpha / 2.0) for u, v in shift_norms_squared(w, m).items()}


@dataclass(frozen=True)
class FredholmData:
    a: float  # card(V minus V_lambda^+), possibly inf
    b: float
    c: float  # infimum of chain-position nonzero moduli, inf when empty
    is_fredholm: bool
    index: Optional[int]
    exact: bool
    reason: str = ""


def fredholm_data(w: WeightSystem, m: Materialized) -> FredholmData:
    """Kernel/cokernel counters and the index, promoted to exact when the
    tail rules pin down the un-materialized part."""
    t = m.tree
    norms2 = shift_norms_squared(w, m)
    have_rules = w.rules is not None
    fully_finite = (not m.boundary_root) and m.complete == frozenset(t.vertices)
    exact = fully_finite or have_rules

    if have_rules and isinstance(w.rules, BinaryWeights):
        return FredholmData(
            a=0.0, b=math.inf, c=math.inf, is_fredholm=False, index=None,
            exact=True, reason="every vertex branches",
        )

    tail_infs = []
    tails_cover = True
    if have_rules:
        for rule in w.rules.rules():
            iv, ok = rule.inf_abs_nonzero()
            if iv is not None:
                tail_infs.append(iv)
            tails_cover = tails_cover and ok
            if rule.tail is not None and isinstance(rule.tail, ConstantTail) and rule.tail.value_ == 0.0:
                return FredholmData(
                    a=math.inf, b=math.inf, c=0.0, is_fredholm=False, index=None,
                    exact=True, reason="a whole tail of weights vanishes",
                )
        exact = exact and tails_cover

    a = sum(1 for u, s in norms2.items() if s == 0.0)
    b = 0
    for u, s in norms2.items():
        deg = len(t.children[u])
        if deg == 0:
            continue
        b += (deg - 1) if s > 0.0 else deg
    c_candidates = []
    for v in t.vertices:
        p = t.parent.get(v)
        if p is None or p not in m.complete:
            continue
        if len(t.children[p]) == 1:
            lam = abs(w.weight(v))
            if lam != 0.0:
                c_candidates.append(lam)
    c_candidates.extend(x for x in tail_infs if x > 0.0)
    if have_rules and any(x == 0.0 for x in tail_infs):
        c = 0.0
    else:
        c = min(c_candidates) if c_candidates else math.inf

    if not exact:
        raise IndeterminateError(
            "structural counters are not finitely determined at this depth"
        )
    is_f = c > 0.0 and b < math.inf
    rooted = m.has_true_root() if m.family is None else m.family.rooted()
    index = (a - b - 1 if rooted else a - b) if is_f else None
    return FredholmData(a=a, b=b, c=c, is_fredholm=is_f, index=index, exact=True)


def normalize_weights(w: WeightSystem, m: Materialized) -> tuple:
    """Phase-strip the weights: returns (|weights| system, unimodular phases).

    The phases satisfy lambda_v beta_v conj(beta_{parent}) = |lambda_v| with
    beta = 1 wherever the weight vanishes, anchored at the materialized root.
    """
    t = m.tree
    beta = {t.root: 1.0 + 0.0j}
    order = [t.root]
    i = 0
    while i < len(order):
        u = order[i]
        i += 1
        for v in t.children[u]:
            lam = w.weight(v)
            beta[v] = (abs(lam) / lam) * beta[u] if lam != 0 else 1.0 + 0.0j
            order.append(v)
    abs_base = {
        v: abs(w.weight(v)) for v in t.vertices if t.parent.get(v) is not None
    }
    return WeightSystem(base=abs_base, rules=w.rules), beta


def solve_grading(m: Materialized, c: float, anchor: tuple) -> dict:
    """theta with theta_parent - theta_child = c on every materialized edge,
    pinned at the anchor (vertex, value)."""
    v0, val0 = anchor
    if v0 not in m.tree.children:
        raise UnknownVertexError(v0)
    lv = m.levels()
    shift_by = val0 + c * lv[v0]
    return {u: shift_by - c * k for u, k in lv.items()}


# ---------------------------------------------------------------------------
# Domain-inclusion criteria
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DirectionReport:
    sup: float
    verdict: str  # "holds" | "fails" | "at-depth"
    exact: bool
    monotone_increasing: bool = False
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DomainInclusionReport:
    fwd: DirectionReport  # D(S) included in D(S*)
    bwd: DirectionReport  # D(S*) included in D(S)
    depth: int


def _tu_quantities(child_norms2: Sequence[float], child_mods: Sequence[float]):
    """Exact norms of the diagonal-minus-rank-one comparison operator.

    The diagonal is assembled from leave-one-out weight sums, which avoids the
    catastrophic cancellation the naive d^2 - d^2 lam^2/(1+n^2) form suffers
    on fast-growing weights.  Returns (operator norm, Hilbert-Schmidt norm,
    trace, diagonal sup).
    """
    d2 = np.asarray(child_norms2, dtype=float)
    lam = np.asarray(child_mods, dtype=float)
    lam2 = lam * lam
    denom = 1.0 + float(np.sum(lam2))  # 1 + ||S e_u||^2
    loo = np.array([1.0 + float(np.sum(np.delete(lam2, i))) for i in range(len(lam2))])
    mat = -np.outer(np.sqrt(d2) * lam, np.sqrt(d2) * lam) / denom
    np.fill_diagonal(mat, d2 * loo / denom)
    evs = np.linalg.eigvalsh(mat)
    t_norm = float(evs[-1])
    hs = float(np.sqrt(np.sum(mat * mat)))
    tr = float(np.trace(mat))
    return t_norm, hs, tr, float(np.max(d2)) if len(d2) else 0.0


def _binary_envs(w: WeightSystem, depth: int):
    """Per-level local data (weights and child norms) on the binary family.

    The generic off-spine environment comes first; the spine environments
    follow in level order so the tail of the series shows the growth.
    """
    spine, off = w.rules.spine, w.rules.off_spine
    mu = lambda i: abs(spine.value(i))
    white_n2 = 2.0 * off ** 2
    grey_n2 = lambda i: mu(i + 1) ** 2 + off ** 2  # norm at spine vertex (i,1)
    envs = [([off, off], [white_n2, white_n2])]
    # the root behaves like spine level 0; then spine vertices (i,1)
    for i in range(0, depth + 1):
        envs.append(([mu(i + 1), off], [grey_n2(i + 1), white_n2]))
    return envs


def domain_inclusion_criteria(w: WeightSystem, m: Materialized, depth: Optional[int] = None) -> DomainInclusionReport:
    """Test the two domain inclusions between the shift and its adjoint.

    fwd: sup_u of sum over children v of |lambda_v|^2/(1 + ||S e_v||^2);
    bwd: sup_u of the norm of the diagonal-minus-rank-one operator, reported
    together with its Hilbert-Schmidt and trace relaxations and the raw
    diagonal sup.  On the binary family with a named spine sequence the
    boundedness verdicts are exact; otherwise they are at-depth unless the
    operator itself is provably bounded.
    """
    if depth is None:
        depth = m.depth or 8

    fwd_vals: list = []
    t_vals: list = []
    hs_vals: list = []
    tr_vals: list = []
    diag_vals: list = []

    binary = w.rules is not None and isinstance(w.rules, BinaryWeights)
    if binary:
        for mods, child_n2 in _binary_envs(w, depth):
            fwd_vals.append(sum(l ** 2 / (1.0 + n2) for l, n2 in zip(mods, child_n2)))
            t, hs, tr, dg = _tu_quantities(child_n2, mods)
            t_vals.append(t)
            hs_vals.append(hs)
            tr_vals.append(tr)
            diag_vals.append(dg)
    else:
        norms2 = shift_norms_squared(w, m)
        lv = m.levels()
        order = sorted(
            (u for u in m.complete), key=lambda u: (lv[u], u)
        )
        for u in order:
            kids = m.tree.children[u]
            if not kids or any(v not in m.complete for v in kids):
                continue
            mods = [abs(w.weight(v)) for v in kids]
            child_n2 = [norms2[v] for v in kids]
            fwd_vals.append(sum(l ** 2 / (1.0 + n2) for l, n2 in zip(mods, child_n2)))
            t, hs, tr, dg = _tu_quantities(child_n2, mods)
            t_vals.append(t)
            hs_vals.append(hs)
            tr_vals.append(tr)
            diag_vals.append(dg)

    if not fwd_vals:
        raise IncompleteTruncationError(m.tree.root, "no vertex has two complete levels")

    def mono(vals):
        # running sup still strictly growing at the deepest levels
        run, last_new = 0.0, -1
        for i, v in enumerate(vals):
            if v > run:
                run, last_new = v, i
        return last_new >= len(vals) - 2 and len(vals) >= 3

    fwd_sup = max(fwd_vals)
    bwd_sup = max(t_vals)
    extras = {
        "hs_sup": max(hs_vals),
        "trace_sup": max(tr_vals),
        "diag_sup": max(diag_vals),
    }

    nr = norm(w, m)
    if nr.exact and math.isfinite(nr.value):
        fwd = DirectionReport(fwd_sup, "holds", True, mono(fwd_vals))
        bwd = DirectionReport(bwd_sup, "holds", True, mono(t_vals), extras)
    elif binary:
        tail = w.rules.spine.tail
        if isinstance(tail, FactorialTail):
            fwd_v, bwd_v = "holds", "fails"
        elif isinstance(tail, GeometricTail):
            fwd_v, bwd_v = "holds", "holds"
        elif isinstance(tail, AffineTail):
            fwd_v, bwd_v = "fails", "holds"
        else:
            fwd_v = bwd_v = "at-depth"
        exact = fwd_v != "at-depth"
        fwd = DirectionReport(fwd_sup, fwd_v, exact, mono(fwd_vals))
        bwd = DirectionReport(bwd_sup, bwd_v, exact, mono(t_vals), extras)
    else:
        fwd = DirectionReport(fwd_sup, "at-depth", False, mono(fwd_vals))
        bwd = DirectionReport(bwd_sup, "at-depth", False, mono(t_vals), extras)
    return DomainInclusionReport(fwd=fwd, bwd=bwd, depth=depth)
