"""Finitely atomic measures, moments, and moment-sequence tests.

Moments of negative order follow the convention 1/0 = inf, so a measure with
an atom at 0 has infinite negative moments.  The positive-semidefiniteness
test used by :func:`is_stieltjes` runs on a small hand-rolled Jacobi
eigensolver; the LAPACK-backed check lives in :mod:`treeshift.oracle` so the
two routes stay independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "AtomicMeasure",
    "MomentPrefix",
    "SequenceVerdict",
    "ConditionViolated",
    "EmptyPrefixError",
    "moment",
    "is_stieltjes",
    "is_completely_alternating",
    "backward_extend_stieltjes",
    "backward_extend_ca",
    "jacobi_min_eig",
]

PSD_TOL = 1e-9


class ConditionViolated(ValueError):
    def __init__(self, message, value):
        super().__init__(f"{message} (got {value!r})")
        self.value = value


class NotProbabilityError(ValueError):
    def __init__(self, branch, mass):
        super().__init__(f"measure {branch} has total mass {mass!r}")
        self.branch = branch


class EmptyPrefixError(ValueError):
    pass


@dataclass(frozen=True)
class AtomicMeasure:
    """A finite positive combination of point masses on [0, oo)."""

    atoms: tuple  # ((point, mass), ...) sorted by point, points distinct

    def __post_init__(self):
        pts = [p for p, _ in self.atoms]
        if any(p < 0 for p in pts):
            raise ValueError("atoms must sit on [0, oo)")
        if any(m <= 0 for _, m in self.atoms):
            raise ValueError("masses must be positive")
        if sorted(pts) != pts or len(set(pts)) != len(pts):
            raise ValueError("points must be distinct and sorted ascending")

    @staticmethod
    def from_pairs(pairs: Iterable[tuple]) -> "AtomicMeasure":
        merged: dict = {}
        for p, m in pairs:
            p, m = float(p), float(m)
            merged[p] = merged.get(p, 0.0) + m
        atoms = tuple(sorted((p, m) for p, m in merged.items() if m != 0.0))
        return AtomicMeasure(atoms=atoms)

    @staticmethod
    def delta(point: float, mass: float = 1.0) -> "AtomicMeasure":
        return AtomicMeasure.from_pairs([(point, mass)])

    @staticmethod
    def zero() -> "AtomicMeasure":
        return AtomicMeasure(atoms=())

    def total_mass(self) -> float:
        return sum(m for _, m in self.atoms)

    def is_probability(self, tol: float = 1e-12) -> bool:
        return abs(self.total_mass() - 1.0) <= tol

    def support_max(self) -> float:
        return self.atoms[-1][0] if self.atoms else 0.0

    def support_min(self) -> float:
        return self.atoms[0][0] if self.atoms else 0.0

    def scaled(self, c: float) -> "AtomicMeasure":
        return AtomicMeasure(atoms=tuple((p, c * m) for p, m in self.atoms))

    def to_json(self) -> dict:
        return {"atoms": [[p, m] for p, m in self.atoms]}

    @staticmethod
    def from_json(d: dict) -> "AtomicMeasure":
        return AtomicMeasure.from_pairs(d["atoms"])


def moment(m: AtomicMeasure, n: int) -> float:
    """sum mass * point**n; +inf when n < 0 and an atom sits at 0."""
    total = 0.0
    for p, w in m.atoms:
        if p == 0.0:
            if n < 0:
                return math.inf
            total += w if n == 0 else 0.0
        else:
            total += w * p ** n
    return total


@dataclass(frozen=True)
class MomentPrefix:
    """A finite run t_offset ... t_{offset+N} of a real sequence."""

    values: tuple
    offset: int = 0

    def __post_init__(self):
        if len(self.values) == 0:
            raise EmptyPrefixError("empty prefix")

    @staticmethod
    def of(values: Sequence[float], offset: int = 0) -> "MomentPrefix":
        return MomentPrefix(values=tuple(float(v) for v in values), offset=offset)

    @staticmethod
    def from_measure(m: AtomicMeasure, upto: int) -> "MomentPrefix":
        return MomentPrefix.of([moment(m, n) for n in range(upto + 1)])


@dataclass(frozen=True)
class SequenceVerdict:
    ok: bool
    checked_to: int
    witness: Optional[tuple] = None  # kind-specific
    value: Optional[float] = None

    def __bool__(self) -> bool:
        return self.ok


def jacobi_min_eig(a: np.ndarray, sweeps: int = 64, eps: float = 1e-14) -> float:
    """Minimum eigenvalue of a small real symmetric matrix by cyclic Jacobi."""
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    for _ in range(sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                off += apq * apq
                if abs(apq) <= eps * (abs(a[p, p]) + abs(a[q, q]) + 1.0):
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a = (a + a.T) / 2.0
        if off <= eps * eps:
            break
    return float(np.min(np.diag(a)))


def _hankel(values: Sequence[float], start: int, order: int) -> np.ndarray:
    return np.array(
        [[values[start + i + j] for j in range(order)] for i in range(order)]
    )


def is_stieltjes(p: MomentPrefix, tol: float = PSD_TOL) -> SequenceVerdict:
    """Necessary-only moment test: both Hankel ladders must stay PSD.

    Checks every admissible order of [t_{i+j}] and [t_{i+j+1}].  A failure
    carries (shift, order) of the smallest violating matrix.  Passing a
    finite prefix is necessary, never sufficient.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    vals = p.values
    n = len(vals)
    scale = 1.0 + max(abs(v) for v in vals)
    thr = -tol * scale
    max_order = 0
    for order in range(1, n + 1):
        any_matrix = False
        for shift in (0, 1):
            if shift + 2 * (order - 1) >= n:
                continue
            any_matrix = True
            ev = jacobi_min_eig(_hankel(vals, shift, order))
            if ev < thr:
                return SequenceVerdict(
                    ok=False, checked_to=len(vals) - 1, witness=(shift, order), value=ev
                )
        if any_matrix:
            max_order = order
        else:
            break
    return SequenceVerdict(ok=True, checked_to=len(vals) - 1, witness=None, value=float(max_order))


def is_completely_alternating(p: MomentPrefix, tol: float = PSD_TOL) -> SequenceVerdict:
    """Necessary-only test: every alternating difference over the window is <= 0.

    Checks sum_j (-1)^j C(n,j) a_{m+j} <= 0 for all m >= 0, n >= 1 with
    m + n inside the prefix; a failure names the violating (m, n).
    """
    vals = p.values
    if len(vals) < 2:
        raise EmptyPrefixError("need at least two terms")
    scale = 1.0 + max(abs(v) for v in vals)
    thr = tol * scale
    for n in range(1, len(vals)):
        for m in range(0, len(vals) - n):
            s = sum((-1) ** j * comb(n, j) * vals[m + j] for j in range(n + 1))
            if s > thr:
                return SequenceVerdict(
                    ok=False, checked_to=len(vals) - 1, witness=(m, n), value=s
                )
    return SequenceVerdict(ok=True, checked_to=len(vals) - 1)


def backward_extend_stieltjes(m: AtomicMeasure, tol: float = 1e-12) -> AtomicMeasure:
    """One-step backward extension: nu with moment(nu, n+1) = moment(m, n).

    Requires moment(m, -1) <= 1; the mass deficit, if any, lands in an atom
    at 0.
    """
    neg1 = moment(m, -1)
    if neg1 > 1.0 + tol:
        raise ConditionViolated("need integral of 1/s d(mu) <= 1", neg1)
    pairs = [(p, w / p) for p, w in m.atoms if p > 0]
    deficit = 1.0 - neg1
    if deficit > tol:
        pairs.append((0.0, deficit))
    return AtomicMeasure.from_pairs(pairs)


def backward_extend_ca(a0: float, t: AtomicMeasure, tol: float = 1e-12) -> AtomicMeasure:
    """Backward extension of an alternating-representation measure on [0,1].

    Requires 1 + moment(t, -1) <= a0; returns (1/s) t plus the deficit mass
    at 0, the representing measure of the sequence prepended with 1.
    """
    if t.atoms and t.support_max() > 1.0 + tol:
        raise ValueError("measure must be supported in [0, 1]")
    neg1 = moment(t, -1)
    if 1.0 + neg1 > a0 + tol:
        raise ConditionViolated("need 1 + integral of 1/s d(tau) <= a0", 1.0 + neg1)
    pairs = [(p, w / p) for p, w in t.atoms if p > 0]
    deficit = a0 - 1.0 - neg1
    if deficit > tol:
        pairs.append((0.0, deficit))
    return AtomicMeasure.from_pairs(pairs)


def ca_sequence(a0: float, t: AtomicMeasure, upto: int) -> list:
    """a_n = a_0 + integral of (1 + s + ... + s^(n-1)) d(tau), n = 0..upto."""
    out = [float(a0)]
    for n in range(1, upto + 1):
        acc = a0
        for p, w in t.atoms:
            acc += w * sum(p ** k for k in range(n))
        out.append(acc)
    return out
