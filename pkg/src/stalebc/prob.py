"""Finite-alphabet probability tables and exact information measures (bits)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SUM_TOL = 1e-9
MAX_CELLS = 10_000_000


class ValidationError(ValueError):
    """Raised when a probability table violates its invariants."""


def _as_names(group: str | Iterable[str]) -> tuple[str, ...]:
    if isinstance(group, str):
        return (group,)
    return tuple(group)


def _check_probs(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what}: non-finite entries")
    if np.any(arr < 0):
        raise ValidationError(f"{what}: negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > SUM_TOL:
        raise ValidationError(f"{what}: mass {total!r} differs from 1")


def _readonly(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


def _entropy_of(arr: np.ndarray) -> float:
    p = arr.ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


@dataclass(frozen=True)
class Pmf:
    """A probability vector over ``{0, ..., support_size - 1}``."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _readonly(self.probs)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("Pmf needs a non-empty 1-D probability vector")
        _check_probs(arr, "Pmf")
        object.__setattr__(self, "probs", arr)

    @property
    def support_size(self) -> int:
        return self.probs.size

    @classmethod
    def uniform(cls, n: int) -> "Pmf":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point(cls, n: int, k: int) -> "Pmf":
        p = np.zeros(n)
        p[k] = 1.0
        return cls(p)

    def __len__(self) -> int:
        return self.support_size

    def __getitem__(self, k):
        return self.probs[k]


@dataclass(frozen=True)
class JointPmf:
    """A dense joint pmf whose axes carry unique names.

    ``axes`` is an ordered tuple of ``(name, alphabet_size)`` pairs matching
    ``table.shape``. Entropies of marginals are memoised per instance, so
    repeated mutual-information queries on one joint stay cheap.
    """

    axes: tuple[tuple[str, int], ...]
    table: np.ndarray
    _hcache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        axes = tuple((str(n), int(k)) for n, k in self.axes)
        names = [n for n, _ in axes]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate axis names in {names}")
        arr = _readonly(self.table)
        if arr.shape != tuple(k for _, k in axes):
            raise ValidationError(
                f"table shape {arr.shape} does not match axes {axes}")
        if arr.size > MAX_CELLS:
            raise ValidationError(
                f"joint has {arr.size} cells, above the {MAX_CELLS} limit")
        _check_probs(arr, "JointPmf")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "table", arr)
        object.__setattr__(self, "_pos", {n: i for i, n in enumerate(names)})

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.axes)

    def _index(self, group: str | Iterable[str]) -> tuple[int, ...]:
        try:
            return tuple(self._pos[n] for n in _as_names(group))
        except KeyError as e:
            raise ValidationError(f"unknown axis {e.args[0]!r}; have {self.names}") from None

    def marginal(self, group: str | Iterable[str]) -> "JointPmf":
        return marginal(self, group)

    def joint_entropy(self, group: str | Iterable[str]) -> float:
        """H of the marginal over ``group`` (empty group gives 0)."""
        idx = frozenset(self._index(group))
        if not idx:
            return 0.0
        h = self._hcache.get(idx)
        if h is None:
            drop = tuple(i for i in range(self.table.ndim) if i not in idx)
            h = _entropy_of(self.table.sum(axis=drop) if drop else self.table)
            self._hcache[idx] = h
        return h

    def cmi(self, a, b, c=()) -> float:
        return conditional_mutual_information(self, a, b, c)

    def conditional_entropy(self, a, c=()) -> float:
        a, c = _as_names(a), _as_names(c)
        return self.joint_entropy(a + c) - self.joint_entropy(c)


def entropy(p: Pmf | Sequence[float] | np.ndarray) -> float:
    """Shannon entropy in bits, with ``0 log 0 = 0``."""
    if not isinstance(p, Pmf):
        p = Pmf(p)
    return _entropy_of(p.probs)


def binary_entropy(x: float) -> float:
    return entropy([x, 1.0 - x])


def marginal(j: JointPmf, group: str | Iterable[str]) -> JointPmf:
    """Sum out every axis of ``j`` not named in ``group``; axis order is kept."""
    keep = set(j._index(group))
    if not keep:
        raise ValidationError("marginal needs at least one axis")
    drop = tuple(i for i in range(len(j.axes)) if i not in keep)
    table = j.table.sum(axis=drop) if drop else j.table
    axes = tuple(ax for i, ax in enumerate(j.axes) if i in keep)
    return JointPmf(axes, table)


def conditional_mutual_information(j: JointPmf, a, b, c=()) -> float:
    """I(A;B|C) in bits; an empty ``c`` gives plain mutual information.

    Computed as H(A,C) + H(B,C) - H(A,B,C) - H(C). Round-off below 1e-9 is
    clamped to zero; anything more negative signals a bug and raises.
    """
    a, b, c = _as_names(a), _as_names(b), _as_names(c)
    if not a or not b:
        raise ValidationError("mutual information needs non-empty groups")
    sa, sb, sc = set(a), set(b), set(c)
    if len(sa) != len(a) or len(sb) != len(b) or len(sc) != len(c):
        raise ValidationError("repeated axis inside a group")
    if sa & sb or sa & sc or sb & sc:
        raise ValidationError(f"groups overlap: {a} / {b} / {c}")
    val = (j.joint_entropy(a + c) + j.joint_entropy(b + c)
           - j.joint_entropy(a + b + c) - j.joint_entropy(c))
    if val < -SUM_TOL:
        raise ArithmeticError(f"negative mutual information {val}")
    return max(val, 0.0)
