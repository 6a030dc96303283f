"""Operator-class predicates.

Every verdict is ``yes``/``no``/``indeterminate`` with an exactness flag: a
closed-form criterion evaluated against family tail rules is exact, anything
read off a bare truncation is necessary-only at that depth.  A ``no`` always
carries a witness that can be re-evaluated directly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from . import measure as msr
from .measure import (
    AtomicMeasure,
    MomentPrefix,
    NotProbabilityError,
    SequenceVerdict,
    moment,
)
from .shift import (
    AffineTail,
    BinaryWeights,
    CaRatioTail,
    ConstantTail,
    FactorialTail,
    GeometricTail,
    IncompleteTruncationError,
    MomentRatioTail,
    TrunkMomentRatioTail,
    WeightSystem,
    apply,
    power_norm_squared,
    shift_norms_squared,
    vec_norm,
)
from .tree import Materialized, TreeFamily, vertex_key

__all__ = [
    "Verdict",
    "ClassificationReport",
    "MeasureMismatchError",
    "NotProbabilityError",
    "REL_TOL",
    "is_isometry",
    "is_quasinormal",
    "is_normal",
    "is_cohyponormal",
    "is_hyponormal",
    "is_p_hyponormal",
    "subnormal_on_T",
    "chex_on_T",
    "stieltjes_necessary",
    "ca_necessary",
    "paranormal_witness",
    "paranormal_sample",
    "admissibility",
]

REL_TOL = 1e-10


class MeasureMismatchError(ValueError):
    def __init__(self, branch, order, expected, got):
        super().__init__(
            f"branch {branch}: moment of order {order} is {got!r}, weights give {expected!r}"
        )
        self.branch = branch
        self.order = order


def _leq(a: float, b: float, tol: float = REL_TOL) -> bool:
    return a <= b + tol * max(1.0, abs(a), abs(b))


def _eq(a: float, b: float, tol: float = REL_TOL) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class Verdict:
    value: str  # "yes" | "no" | "indeterminate"
    exact: bool
    witness: object = None
    depth: Optional[int] = None
    detail: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.value == "yes"

    def to_json(self) -> dict:
        out = {"verdict": self.value, "exact": self.exact}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.depth is not None:
            out["depth"] = self.depth
        if self.detail:
            out["detail"] = {k: v for k, v in sorted(self.detail.items())}
        return out


@dataclass(frozen=True)
class ClassificationReport:
    entries: dict  # predicate name -> Verdict

    def to_json(self) -> dict:
        return {name: v.to_json() for name, v in sorted(self.entries.items())}

    def summary(self) -> dict:
        return {name: v.value for name, v in sorted(self.entries.items())}


# ---------------------------------------------------------------------------
# tail bookkeeping: what do the rules guarantee beyond the truncation?
# ---------------------------------------------------------------------------


def _rules_list(w: WeightSystem):
    if w.rules is None:
        return None
    if isinstance(w.rules, BinaryWeights):
        return None  # handled per-predicate
    return w.rules.rules()


def _tail_ranges(w: WeightSystem):
    """[(inf, sup, exact)] of |weight| over each rule's tail region."""
    rules = _rules_list(w)
    if rules is None:
        return None
    out = []
    for r in rules:
        if r.tail is None:
            continue
        lo, ok_lo = r.tail.inf(r.tail_start())
        hi, ok_hi = r.tail.sup(r.tail_start())
        out.append((lo, hi, ok_lo and ok_hi))
    return out


def _heads_covered(w: WeightSystem, m: Materialized) -> bool:
    """True when every explicit head value sits inside the complete region."""
    rules = _rules_list(w)
    if rules is None:
        return False
    horizon = max((r.start + len(r.head) for r in rules), default=0)
    return m.depth >= horizon + 1


def _binary_constant(w: WeightSystem, m: Materialized) -> bool:
    """Binary rules whose environments repeat verbatim beyond the truncation."""
    if not isinstance(w.rules, BinaryWeights):
        return False
    spine = w.rules.spine
    return (
        isinstance(spine.tail, ConstantTail)
        and m.depth >= spine.start + len(spine.head) + 1
    )


def _tail_hypo_status(tail) -> str:
    """Do the tail weights keep increasing along the chain? ok/fails/unknown."""
    if tail is None or isinstance(tail, (ConstantTail, MomentRatioTail, FactorialTail, TrunkMomentRatioTail)):
        return "ok"
    if isinstance(tail, GeometricTail):
        return "ok" if tail.ratio >= 1.0 else "fails"
    if isinstance(tail, CaRatioTail):
        return "ok" if not tail.tau.atoms else "fails"
    if isinstance(tail, AffineTail):
        return "fails"  # the weight drops back to 1 at every break
    return "unknown"


def _checkable(m: Materialized):
    """Vertices whose own and children's norms are known exactly."""
    for u in sorted(m.complete, key=vertex_key):
        kids = m.tree.children[u]
        if all(v in m.complete for v in kids):
            yield u, kids


# ---------------------------------------------------------------------------
# pointwise predicates
# ---------------------------------------------------------------------------


def is_isometry(w: WeightSystem, m: Materialized, tol: float = REL_TOL) -> Verdict:
    """sum of squared child weights equals 1 at every vertex."""
    for u in sorted(m.complete, key=vertex_key):
        s = sum(abs(w.weight(v)) ** 2 for v in m.tree.children[u])
        if not _eq(s, 1.0, tol):
            return Verdict("no", True, witness={"vertex": u, "norm_squared": s})
    ranges = _tail_ranges(w)
    exact = (
        ranges is not None
        and all(ok and lo == 1.0 and hi == 1.0 for lo, hi, ok in ranges)
        and _heads_covered(w, m)
    )
    if ranges is None and not isinstance(w.rules, BinaryWeights):
        exact = m.complete == frozenset(m.tree.vertices) and not m.boundary_root
    return Verdict("yes", exact, depth=m.depth or None)


def is_quasinormal(w: WeightSystem, m: Materialized, tol: float = REL_TOL) -> Verdict:
    """||S e_u|| = ||S e_v|| whenever v is a child of u with nonzero weight."""
    norms2 = shift_norms_squared(w, m)
    common = None
    for u, kids in _checkable(m):
        for v in kids:
            if abs(w.weight(v)) == 0.0:
                continue
            if not _eq(norms2[u], norms2[v], tol):
                return Verdict(
                    "no", True,
                    witness={"parent": u, "child": v, "norms_squared": [norms2[u], norms2[v]]},
                )
            common = norms2[u]
    ranges = _tail_ranges(w)
    exact = (
        ranges is not None
        and all(ok and lo == hi for lo, hi, ok in ranges)
        and _heads_covered(w, m)
    ) or _binary_constant(w, m)
    detail = {}
    nonzero = all(abs(w.weight(v)) > 0 for v in m.tree.vertices if m.tree.parent.get(v) is not None)
    if common is not None and nonzero:
        detail["scalar_multiple_of_isometry"] = math.sqrt(common)
    return Verdict("yes", exact, depth=m.depth or None, detail=detail)


def _zero_everywhere(w: WeightSystem, m: Materialized) -> bool:
    mats = all(
        abs(w.weight(v)) == 0.0
        for v in m.tree.vertices
        if m.tree.parent.get(v) is not None
    )
    ranges = _tail_ranges(w)
    tails = ranges is None or all(hi == 0.0 for _, hi, _ in ranges)
    return mats and tails


def _chain_verdict(w: WeightSystem, m: Materialized, require_equal: bool, tol: float) -> Verdict:
    """Shared detector for the rootless chain-with-dead-branches structure."""
    if m.has_true_root() if m.family is None else m.family.rooted():
        if _zero_everywhere(w, m):
            return Verdict("yes", True, detail={"structure": "zero operator"})
        nz = next(
            v for v in sorted(m.tree.vertices, key=vertex_key)
            if m.tree.parent.get(v) is not None and abs(w.weight(v)) != 0.0
        )
        return Verdict("no", True, witness={"reason": "rooted and nonzero", "vertex": nz})

    norms2 = shift_norms_squared(w, m)
    chain = []
    cur = m.tree.root
    terminal = False
    unresolved: set = set()
    while True:
        kids = m.tree.children[cur]
        if any(v not in m.complete for v in kids):
            unresolved.update(kids)  # the chain leaves the truncation here
            break
        plus = [v for v in kids if norms2[v] > 0.0]
        if len(plus) > 1:
            return Verdict("no", True, witness={"vertex": cur, "reason": "two live children"})
        dead = [v for v in kids if norms2[v] == 0.0 and abs(w.weight(v)) != 0.0]
        if plus:
            v = plus[0]
            lam = abs(w.weight(v))
            if dead:
                return Verdict("no", True, witness={"vertex": dead[0], "reason": "nonzero weight off the chain"})
            bad = (
                not _eq(norms2[v], lam * lam, tol)
                if require_equal
                else not _leq(norms2[v], lam * lam, tol)
            )
            if bad:
                # prefer the root cause: a nonzero weight feeding a dead branch below v
                for x in m.tree.children[v]:
                    if x in m.complete and norms2.get(x, 1.0) == 0.0 and abs(w.weight(x)) != 0.0:
                        return Verdict(
                            "no", True,
                            witness={"vertex": x, "reason": "nonzero weight off the chain"},
                        )
                return Verdict(
                    "no", True,
                    witness={"vertex": v, "child_norm_squared": norms2[v], "weight_squared": lam * lam},
                )
            chain.append(v)
            cur = v
            continue
        # no live child: a terminal broom may absorb one last nonzero step
        if require_equal and any(abs(w.weight(v)) != 0.0 for v in kids):
            v = next(v for v in kids if abs(w.weight(v)) != 0.0)
            return Verdict("no", True, witness={"vertex": v, "reason": "terminal weights break normality"})
        if not require_equal and chain:
            last = chain[-1]
            s = norms2.get(last, 0.0)
            if not _leq(s, abs(w.weight(last)) ** 2, tol):
                return Verdict(
                    "no", True,
                    witness={"vertex": last, "children_norm_squared": s},
                )
        unresolved.update(kids)  # terminal fan may carry nonzero weights
        terminal = True
        break

    # everything off the extracted chain must carry zero weight
    allowed = set(chain) | unresolved
    for v in sorted(m.tree.vertices, key=vertex_key):
        if m.tree.parent.get(v) is None or v in allowed:
            continue
        if abs(w.weight(v)) != 0.0:
            return Verdict("no", True, witness={"vertex": v, "reason": "nonzero weight off the chain"})

    ranges = _tail_ranges(w)
    exact = (
        ranges is not None
        and all(ok and lo == hi for lo, hi, ok in ranges)
        and _heads_covered(w, m)
    )
    return Verdict(
        "yes", exact, depth=m.depth or None,
        detail={"chain": chain, "terminal": terminal},
    )


def is_cohyponormal(w: WeightSystem, m: Materialized, tol: float = REL_TOL) -> Verdict:
    """Adjoint-side hyponormality: a rootless chain with nonincreasing moduli
    and dead side branches, or the zero operator."""
    return _chain_verdict(w, m, require_equal=False, tol=tol)


def is_normal(w: WeightSystem, m: Materialized, tol: float = REL_TOL) -> Verdict:
    """Normal shifts are two-sided chains with constant modulus."""
    return _chain_verdict(w, m, require_equal=True, tol=tol)


def _hyponormal_core(w, m, p, tol) -> Verdict:
    norms2 = shift_norms_squared(w, m)
    for u, kids in _checkable(m):
        total = 0.0
        for v in kids:
            lam = abs(w.weight(v))
            if norms2[v] == 0.0:
                if lam != 0.0:
                    return Verdict(
                        "no", True,
                        witness={"parent": u, "vertex": v, "reason": "weight into a kernel vector"},
                    )
                continue
            total += lam ** 2 / norms2[v] ** p
        if p != 1.0:
            if norms2[u] == 0.0:
                continue
            total *= norms2[u] ** (p - 1.0)
        if not _leq(total, 1.0, tol):
            return Verdict("no", True, witness={"vertex": u, "lhs": total})

    statuses = []
    rules = _rules_list(w)
    if rules is not None:
        statuses = [_tail_hypo_status(r.tail) for r in rules if r.tail is not None]
        for r, st in zip([r for r in rules if r.tail is not None], statuses):
            if st == "fails":
                j = r.tail_start() + 1
                return Verdict(
                    "no", True,
                    witness={"tail_index": j, "reason": "weights decrease along a tail"},
                )
    exact = (
        rules is not None
        and all(st == "ok" for st in statuses)
        and _heads_covered(w, m)
    )
    if rules is None and not isinstance(w.rules, BinaryWeights):
        exact = m.complete == frozenset(m.tree.vertices) and not m.boundary_root
    return Verdict("yes", exact, depth=m.depth or None)


def is_hyponormal(w: WeightSystem, m: Materialized, tol: float = REL_TOL) -> Verdict:
    """||S* f|| <= ||S f||, tested through the child-weight inequality."""
    return _hyponormal_core(w, m, 1.0, tol)


def is_p_hyponormal(w: WeightSystem, m: Materialized, p: float, tol: float = REL_TOL) -> Verdict:
    """|S*|^2p <= |S|^2p via the weighted child inequality; p=1 is hyponormality."""
    if p <= 0:
        raise ValueError("p must be positive")
    return _hyponormal_core(w, m, float(p), tol)


# ---------------------------------------------------------------------------
# model-backed predicates on the broom
# ---------------------------------------------------------------------------


def _broom_data(w: WeightSystem, m: Materialized):
    fam = m.family
    if fam is None or fam.kind != "t_eta_kappa":
        raise TypeError("exact model predicates live on the broom family only")
    return fam


def _branch_weight(w: WeightSystem, i: int, j: int) -> float:
    try:
        return abs(w.weight(f"({i},{j})"))
    except KeyError:
        raise IncompleteTruncationError(f"({i},{j})", "no weight rule covers it") from None


def _trunk_weight(w: WeightSystem, k: int) -> float:
    try:
        return abs(w.weight(str(-k)))
    except KeyError:
        raise IncompleteTruncationError(str(-k), "no weight rule covers it") from None


def _zgod0_check(w, fam, measures, chex: bool, orders: int, tol: float):
    """Products of squared branch weights must reproduce the model sequence."""
    for i, mu in enumerate(measures, start=1):
        prod = 1.0
        for n in range(1, orders + 1):
            prod *= _branch_weight(w, i, n + 1) ** 2
            if chex:
                want = msr.ca_sequence(1.0, mu, n)[n]
            else:
                want = moment(mu, n)
            if not _eq(prod, want, tol):
                raise MeasureMismatchError(i, n, prod, want)


def _zgod0_exact(w, measures, chex: bool) -> bool:
    rules = w.rules
    if rules is None or not hasattr(rules, "branches"):
        return False
    for rule, mu in zip(rules.branches, measures):
        t = rule.tail
        if chex:
            if isinstance(t, CaRatioTail) and t.tau.atoms == mu.atoms:
                continue
        else:
            if isinstance(t, MomentRatioTail) and t.measure.atoms == mu.atoms:
                continue
        if isinstance(t, ConstantTail):
            if chex and not mu.atoms and t.value_ == 1.0:
                continue
            if not chex and len(mu.atoms) == 1 and _eq(t.value_ ** 2, mu.atoms[0][0]):
                continue
        return False
    return True


def subnormal_on_T(
    w: WeightSystem,
    m: Materialized,
    measures: Sequence[AtomicMeasure],
    K: int = 25,
    tol: float = REL_TOL,
    orders: int = 12,
) -> Verdict:
    """Moment-model subnormality test on the broom with candidate measures.

    The measures must reproduce the squared partial products along each
    branch; the verdict then checks the consistency conditions tying the
    first-level weights and the trunk to negative moments.  The ``extremal``
    detail marks equality in the final condition.
    """
    fam = _broom_data(w, m)
    eta, kappa = fam.eta, fam.kappa
    if len(measures) != eta:
        raise ValueError(f"need {eta} measures")
    for i, mu in enumerate(measures, start=1):
        if not mu.is_probability():
            raise NotProbabilityError(i, mu.total_mass())
    _zgod0_check(w, fam, measures, chex=False, orders=orders, tol=tol)
    exact = _zgod0_exact(w, measures, chex=False)

    lam1 = [_branch_weight(w, i, 1) for i in range(1, eta + 1)]

    def s_neg(order: int) -> float:
        return sum(c * c * moment(mu, -order) for c, mu in zip(lam1, measures))

    detail = {"extremal": False}
    if kappa == 0:
        v = s_neg(1)
        if not _leq(v, 1.0, tol):
            return Verdict("no", True, witness={"condition": "consistency", "value": v})
        detail["extremal"] = _eq(v, 1.0, tol)
        return Verdict("yes", exact, detail=detail)

    v = s_neg(1)
    if not _eq(v, 1.0, tol):
        return Verdict("no", True, witness={"condition": "strong consistency", "value": v})

    ks = range(1, (int(kappa) - 1 if kappa != math.inf else K) + 1)
    for k in ks:
        prod = 1.0
        for j in range(k):
            prod *= _trunk_weight(w, j) ** 2
        lhs, rhs = 1.0 / prod, s_neg(k + 1)
        if not _eq(lhs, rhs, tol):
            return Verdict(
                "no", True,
                witness={"condition": "trunk equality", "k": k, "lhs": lhs, "rhs": rhs},
            )
    if kappa == math.inf:
        return Verdict("yes", False, depth=K, detail=detail)

    kappa = int(kappa)
    prod = 1.0
    for j in range(kappa):
        prod *= _trunk_weight(w, j) ** 2
    lhs, rhs = 1.0 / prod, s_neg(kappa + 1)
    if not _leq(rhs, lhs, tol):
        return Verdict(
            "no", True,
            witness={"condition": "final inequality", "lhs": lhs, "rhs": rhs},
        )
    detail["extremal"] = _eq(lhs, rhs, tol)
    return Verdict("yes", exact, detail=detail)


def chex_on_T(
    w: WeightSystem,
    m: Materialized,
    taus: Sequence[AtomicMeasure],
    tol: float = REL_TOL,
    orders: int = 12,
) -> Verdict:
    """Alternating-model complete hyperexpansivity test on the broom.

    With an infinite trunk the class collapses to isometries; otherwise the
    candidate measures on [0,1] must reproduce the branch products and satisfy
    the trunk conditions.  ``extremal`` marks equality in the last one.
    """
    fam = _broom_data(w, m)
    eta, kappa = fam.eta, fam.kappa
    if len(taus) != eta:
        raise ValueError(f"need {eta} measures")
    for i, tau in enumerate(taus, start=1):
        if tau.atoms and tau.support_max() > 1.0 + tol:
            raise ValueError(f"measure {i} must live on [0,1]")
    if kappa == math.inf:
        iso = is_isometry(w, m, tol)
        return Verdict(iso.value, iso.exact, witness=iso.witness, depth=iso.depth,
                       detail={"reduction": "infinite trunk forces an isometry"})

    _zgod0_check(w, fam, taus, chex=True, orders=orders, tol=tol)
    exact = _zgod0_exact(w, taus, chex=True)
    kappa = int(kappa)
    lam1 = [_branch_weight(w, i, 1) for i in range(1, eta + 1)]
    ssum = sum(c * c for c in lam1)

    def s_neg(order: int) -> float:
        return sum(c * c * moment(tau, -order) for c, tau in zip(lam1, taus))

    detail = {"extremal": False}
    if kappa == 0:
        lhs, rhs = ssum, 1.0 + s_neg(1)
        if not _leq(rhs, lhs, tol):
            return Verdict("no", True, witness={"condition": "consistency", "lhs": lhs, "rhs": rhs})
        detail["extremal"] = _eq(lhs, rhs, tol)
        return Verdict("yes", exact, detail=detail)

    if not _eq(ssum, 1.0 + s_neg(1), tol):
        return Verdict(
            "no", True,
            witness={"condition": "strong consistency", "lhs": ssum, "rhs": 1.0 + s_neg(1)},
        )
    prod = 1.0
    for k in range(1, kappa):
        prod *= _trunk_weight(w, k - 1) ** 2
        lhs = _trunk_weight(w, k - 1) ** 2
        rhs = 1.0 + prod * s_neg(k + 1)
        if not _eq(lhs, rhs, tol):
            return Verdict(
                "no", True,
                witness={"condition": "trunk equality", "k": k, "lhs": lhs, "rhs": rhs},
            )
    prod_full = 1.0
    for j in range(kappa):
        prod_full *= _trunk_weight(w, j) ** 2
    lhs = _trunk_weight(w, kappa - 1) ** 2
    rhs = 1.0 + prod_full * s_neg(kappa + 1)
    if not _leq(rhs, lhs, tol):
        return Verdict(
            "no", True,
            witness={"condition": "final inequality", "lhs": lhs, "rhs": rhs},
        )
    detail["extremal"] = _eq(lhs, rhs, tol)
    return Verdict("yes", exact, detail=detail)


# ---------------------------------------------------------------------------
# necessary-only sequence tests and sampling
# ---------------------------------------------------------------------------


def stieltjes_necessary(
    w: WeightSystem, m: Materialized, u: str, N: int, tol: float = msr.PSD_TOL
) -> SequenceVerdict:
    """Run the Hankel ladder on ||S^n e_u||^2, n <= N (necessary only)."""
    vals = [power_norm_squared(w, m, u, n) for n in range(N + 1)]
    return msr.is_stieltjes(MomentPrefix.of(vals), tol)


def ca_necessary(
    w: WeightSystem, m: Materialized, u: str, N: int, tol: float = msr.PSD_TOL
) -> SequenceVerdict:
    """Alternating-difference test on ||S^n e_u||^2, n <= N (necessary only)."""
    vals = [power_norm_squared(w, m, u, n) for n in range(N + 1)]
    return msr.is_completely_alternating(MomentPrefix.of(vals), tol)


def paranormal_witness(
    w: WeightSystem, m: Materialized, f: Mapping[str, complex], tol: float = REL_TOL
) -> bool:
    """Single inequality ||Sf||^2 <= ||S^2 f|| ||f|| for one vector."""
    sf = apply(w, m, f)
    s2f = apply(w, m, sf)
    lhs = vec_norm(sf) ** 2
    rhs = vec_norm(s2f) * vec_norm(f)
    return _leq(lhs, rhs, tol)


def paranormal_sample(
    w: WeightSystem,
    m: Materialized,
    count: int = 200,
    seed: int = 0,
    max_support: int = 6,
    tol: float = REL_TOL,
) -> Verdict:
    """Sampling wrapper: random finite vectors on doubly-complete vertices."""
    safe = [
        u
        for u, kids in _checkable(m)
        if all(k in m.complete for k in kids)
    ]
    if not safe:
        raise IncompleteTruncationError(m.tree.root, "no vertex supports S^2")
    rng = random.Random(seed)
    for trial in range(count):
        supp = rng.sample(safe, k=min(len(safe), rng.randint(1, max_support)))
        f = {
            v: complex(rng.uniform(-1, 1), rng.uniform(-1, 1)) for v in supp
        }
        if not paranormal_witness(w, m, f, tol):
            return Verdict("no", True, witness={"trial": trial, "vector": {k: [c.real, c.imag] for k, c in f.items()}})
    return Verdict("yes", False, depth=m.depth or None, detail={"trials": count})


# ---------------------------------------------------------------------------
# structure-only admissibility
# ---------------------------------------------------------------------------


def admissibility(obj) -> dict:
    """Which classes the bare tree admits, independent of any weights."""
    if isinstance(obj, Materialized):
        fam = obj.family
    elif isinstance(obj, TreeFamily):
        fam = obj
    else:
        fam = None

    if fam is not None:
        leafless = fam.leafless()
        infinite = True
        chain_like = fam.kind in ("z", "z_minus")
        is_z = fam.kind == "z"
    else:
        t = obj.tree if isinstance(obj, Materialized) else obj
        leafless = all(t.children[v] for v in t.vertices)
        infinite = False  # explicit trees are finite
        chain_like = False
        is_z = False

    injective_ok = leafless and infinite
    return {
        "hyponormal_nonzero": injective_ok,
        "subnormal_nonzero": injective_ok,
        "isometric_nonzero": injective_ok,
        "completely_hyperexpansive_nonzero": injective_ok,
        "injective_nonzero": injective_ok,
        "coisometric": chain_like,
        "dense_range": chain_like,
        "unitary": is_z,
        "normal_nonzero": is_z,
    }
