"""Two-receiver broadcast channels with a random state known at the decoders.

The kernel is stored as a dense array ``kernel[x, s, y1, y2]``. Both outputs
share one alphabet of size ``y_size``. State and symbol indices are 0-based
everywhere, including the JSON interchange format.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .prob import JointPmf, Pmf, SUM_TOL

SYM_TOL = 1e-12


class ChannelError(ValueError):
    pass


class SymmetryError(ChannelError):
    pass


@dataclass(frozen=True)
class StateChannel:
    """p(s) together with p(y1, y2 | x, s)."""

    state_pmf: Pmf
    kernel: np.ndarray
    pi: tuple[int, ...] | None = None
    name: str = "custom"
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.state_pmf, Pmf):
            object.__setattr__(self, "state_pmf", Pmf(self.state_pmf))
        k = np.array(self.kernel, dtype=float)
        if k.ndim != 4 or k.shape[2] != k.shape[3]:
            raise ChannelError(
                f"kernel must have shape (x, s, y, y); got {k.shape}")
        if k.shape[1] != self.state_pmf.support_size:
            raise ChannelError("kernel state axis does not match state_pmf")
        if np.any(k < 0) or not np.all(np.isfinite(k)):
            raise ChannelError("kernel has negative or non-finite entries")
        sums = k.sum(axis=(2, 3))
        bad = np.argwhere(np.abs(sums - 1.0) > SUM_TOL)
        if bad.size:
            x, s = bad[0]
            raise ChannelError(
                f"kernel slice (x={x}, s={s}) sums to {sums[x, s]!r}")
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)
        if self.pi is not None:
            object.__setattr__(self, "pi", _check_perm(self.pi, self.s_size))

    @property
    def x_size(self) -> int:
        return self.kernel.shape[0]

    @property
    def s_size(self) -> int:
        return self.kernel.shape[1]

    @property
    def y_size(self) -> int:
        return self.kernel.shape[2]

    def y1_given_xs(self) -> np.ndarray:
        return self.kernel.sum(axis=3)

    def y2_given_xs(self) -> np.ndarray:
        return self.kernel.sum(axis=2)

    def joint(self, px) -> JointPmf:
        """Joint pmf over (X, S, Y1, Y2) for the input law ``px``."""
        px = np.asarray(px.probs if isinstance(px, Pmf) else px, dtype=float)
        t = np.einsum("x,s,xsab->xsab", px, self.state_pmf.probs, self.kernel)
        return JointPmf(
            (("X", self.x_size), ("S", self.s_size),
             ("Y1", self.y_size), ("Y2", self.y_size)), t)

    # -- interchange -----------------------------------------------------
    def to_dict(self) -> dict:
        ys = self.y_size
        d = {
            "x_size": self.x_size,
            "y_size": ys,
            "s_size": self.s_size,
            "state_pmf": self.state_pmf.probs.tolist(),
            "kernel": self.kernel.reshape(self.x_size, self.s_size, ys * ys).tolist(),
        }
        if self.pi is not None:
            d["pi"] = list(self.pi)
        return d

    @classmethod
    def from_dict(cls, d: dict, name: str = "custom") -> "StateChannel":
        try:
            xs, ys, ss = int(d["x_size"]), int(d["y_size"]), int(d["s_size"])
            kernel = np.asarray(d["kernel"], dtype=float)
            state = np.asarray(d["state_pmf"], dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise ChannelError(f"malformed channel document: {e}") from e
        if kernel.shape != (xs, ss, ys * ys):
            raise ChannelError(
                f"kernel shape {kernel.shape} != ({xs}, {ss}, {ys * ys})")
        if state.shape != (ss,):
            raise ChannelError("state_pmf length does not match s_size")
        pi = d.get("pi")
        try:
            return cls(Pmf(state), kernel.reshape(xs, ss, ys, ys),
                       tuple(pi) if pi is not None else None, name=name)
        except ValueError as e:
            raise ChannelError(str(e)) from e

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "StateChannel":
        p = Path(path)
        try:
            doc = json.loads(p.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ChannelError(f"cannot read channel file {p}: {e}") from e
        return cls.from_dict(doc, name=p.stem)


def _check_perm(pi: Sequence[int], n: int) -> tuple[int, ...]:
    pi = tuple(int(v) for v in pi)
    if sorted(pi) != list(range(n)):
        raise ChannelError(f"{pi} is not a permutation of 0..{n - 1}")
    return pi


@dataclass(frozen=True)
class SymmetryWitness:
    pi: tuple[int, ...]

    @property
    def is_involution(self) -> bool:
        return all(self.pi[self.pi[s]] == s for s in range(len(self.pi)))


@dataclass(frozen=True)
class DeterminismWitness:
    y1_map: np.ndarray  # [x, s] -> y1
    y2_map: np.ndarray  # [x, s] -> y2


def validate_symmetry(ch: StateChannel, pi: Sequence[int] | None = None) -> SymmetryWitness:
    """Check p_S(s) = p_S(pi(s)) and p_{Y1|X,S}(y|x,s) = p_{Y2|X,S}(y|x,pi(s))."""
    if pi is None:
        pi = ch.pi
    if pi is None:
        raise SymmetryError("no state permutation given and channel carries none")
    pi = _check_perm(pi, ch.s_size)
    if ch.y1_given_xs().shape != ch.y2_given_xs().shape:
        raise SymmetryError("output alphabets differ")
    ps = ch.state_pmf.probs
    for s in range(ch.s_size):
        if abs(ps[s] - ps[pi[s]]) > SYM_TOL:
            raise SymmetryError(
                f"p_S({s}) = {ps[s]} but p_S(pi({s})={pi[s]}) = {ps[pi[s]]}")
    w1, w2 = ch.y1_given_xs(), ch.y2_given_xs()
    for x, s, y in itertools.product(range(ch.x_size), range(ch.s_size), range(ch.y_size)):
        if abs(w1[x, s, y] - w2[x, pi[s], y]) > SYM_TOL:
            raise SymmetryError(
                f"p_Y1(y={y}|x={x},s={s}) = {w1[x, s, y]} differs from "
                f"p_Y2(y={y}|x={x},pi(s)={pi[s]}) = {w2[x, pi[s], y]}")
    return SymmetryWitness(pi)


def check_deterministic(ch: StateChannel) -> DeterminismWitness | None:
    k = ch.kernel
    flat = k.reshape(ch.x_size, ch.s_size, -1)
    top = flat.argmax(axis=2)
    if np.any(np.abs(flat.max(axis=2) - 1.0) > SYM_TOL):
        return None
    y1, y2 = np.divmod(top, ch.y_size)
    return DeterminismWitness(y1, y2)


def _from_maps(y1, y2, y_size: int, state_pmf, pi, name: str) -> StateChannel:
    y1, y2 = np.asarray(y1), np.asarray(y2)
    xs, ss = y1.shape
    k = np.zeros((xs, ss, y_size, y_size))
    xi, si = np.meshgrid(np.arange(xs), np.arange(ss), indexing="ij")
    k[xi, si, y1, y2] = 1.0
    return StateChannel(Pmf(state_pmf), k, pi, name=name)


ERASED = 2


def make_erasure(eps: float) -> StateChannel:
    """Binary erasure broadcast channel; the state is the pair of erasure flags.

    States are ordered (0,0), (0,1), (1,0), (1,1) for (s1, s2); output symbol
    2 denotes an erasure.
    """
    if not 0.0 <= eps <= 1.0:
        raise ChannelError(f"erasure probability {eps} outside [0, 1]")
    states = [(0, 0), (0, 1), (1, 0), (1, 1)]
    ps = [(eps if a else 1 - eps) * (eps if b else 1 - eps) for a, b in states]
    y1 = np.array([[ERASED if a else x for a, _ in states] for x in range(2)])
    y2 = np.array([[ERASED if b else x for _, b in states] for x in range(2)])
    pi = tuple(states.index((b, a)) for a, b in states)
    return _from_maps(y1, y2, 3, ps, pi, name=f"erasure:{eps:g}")


def _is_prime(q: int) -> bool:
    return q >= 2 and all(q % d for d in range(2, int(q ** 0.5) + 1))


def full_rank_matrices(q: int) -> list[tuple[int, int, int, int]]:
    """Invertible 2x2 matrices over GF(q) as (h11, h12, h21, h22), lexicographic."""
    return [h for h in itertools.product(range(q), repeat=4)
            if (h[0] * h[3] - h[1] * h[2]) % q]


def make_finite_field(q: int) -> StateChannel:
    """Y = H X over GF(q), H uniform over full-rank 2x2 matrices.

    The input index is ``x1 * q + x2``.
    """
    if not isinstance(q, (int, np.integer)) or not _is_prime(int(q)):
        raise ChannelError(f"field size {q} is not prime")
    q = int(q)
    mats = full_rank_matrices(q)
    inputs = list(itertools.product(range(q), repeat=2))
    y1 = np.array([[(h[0] * a + h[1] * b) % q for h in mats] for a, b in inputs])
    y2 = np.array([[(h[2] * a + h[3] * b) % q for h in mats] for a, b in inputs])
    pi = tuple(mats.index((h[2], h[3], h[0], h[1])) for h in mats)
    ps = np.full(len(mats), 1.0 / len(mats))
    return _from_maps(y1, y2, q, ps, pi, name=f"ff:{q}")


def make_blackwell_with_state() -> StateChannel:
    """Blackwell channel whose receivers trade places with the state.

    State index 0 (S=1): y1 = 1 iff x = 2, y2 = 1 iff x in {1, 2}.
    State index 1 (S=2): the two output maps swap. Input 1 is the middle
    letter that each output map merges with one neighbour.
    """
    a = np.array([0, 0, 1])  # 1{x == 2}
    b = np.array([0, 1, 1])  # 1{x in {1, 2}}
    y1 = np.stack([a, b], axis=1)
    y2 = np.stack([b, a], axis=1)
    return _from_maps(y1, y2, 2, [0.5, 0.5], (1, 0), name="blackwell")


def parse_channel_ref(ref: str) -> StateChannel:
    """Resolve ``erasure:EPS``, ``ff:Q``, ``blackwell`` or a JSON file path."""
    name, _, arg = ref.partition(":")
    try:
        if name == "erasure" and arg:
            return make_erasure(float(arg))
        if name == "ff" and arg:
            return make_finite_field(int(arg))
    except ValueError as e:
        raise ChannelError(f"bad channel reference {ref!r}: {e}") from e
    if ref == "blackwell":
        return make_blackwell_with_state()
    if Path(ref).is_file():
        return StateChannel.load(ref)
    raise ChannelError(f"unknown channel reference {ref!r}")
