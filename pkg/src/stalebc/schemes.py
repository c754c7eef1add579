"""Auxiliary-variable structures for the stale-state broadcast scheme.

An :class:`AuxScheme` fixes the law

    p(q) p(u0, u1, u2 | q) 1{x = x(u0, u1, u2, q)} p(s) p(v0, v1, v2 | u0, u1, u2, s, q)

All tables are indexed with q first: ``u_given_q[q, u0, u1, u2]``,
``x_map[q, u0, u1, u2]`` and ``v_given[q, u0, u1, u2, s, v0, v1, v2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .channels import (DeterminismWitness, StateChannel, SymmetryWitness,
                       check_deterministic, validate_symmetry)
from .prob import MAX_CELLS, SUM_TOL, JointPmf, Pmf, ValidationError

SYM_TOL = 1e-12

JOINT_AXES = ("Q", "U0", "U1", "U2", "X", "S", "Y1", "Y2", "V0", "V1", "V2")

# Example 3 writes its superposition table and upper-bound point with the
# figure's input letters, in which 1 and 2 are exchanged relative to the
# channel built by make_blackwell_with_state.
FIGURE_TO_CHANNEL = (0, 2, 1)


class SchemeError(ValueError):
    pass


@dataclass(frozen=True)
class AuxScheme:
    q_pmf: Pmf
    u_given_q: np.ndarray
    x_map: np.ndarray
    v_given: np.ndarray
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.q_pmf, Pmf):
            object.__setattr__(self, "q_pmf", Pmf(self.q_pmf))
        u = np.array(self.u_given_q, dtype=float)
        xm = np.array(self.x_map, dtype=np.int64)
        v = np.array(self.v_given, dtype=float)
        nq = self.q_pmf.support_size
        if u.ndim != 4 or u.shape[0] != nq:
            raise SchemeError(f"u_given_q shape {u.shape} inconsistent with |Q|={nq}")
        if xm.shape != u.shape:
            raise SchemeError(f"x_map shape {xm.shape} != u_given_q shape {u.shape}")
        if v.ndim != 8 or v.shape[:4] != u.shape:
            raise SchemeError(f"v_given shape {v.shape} inconsistent with {u.shape}")
        if np.any(u < 0) or np.any(np.abs(u.sum(axis=(1, 2, 3)) - 1) > SUM_TOL):
            raise SchemeError("p(u0,u1,u2|q) slices are not pmfs")
        if np.any(v < 0) or np.any(np.abs(v.sum(axis=(5, 6, 7)) - 1) > SUM_TOL):
            raise SchemeError("p(v0,v1,v2|u0,u1,u2,s,q) slices are not pmfs")
        if np.any(xm < 0):
            raise SchemeError("x_map has negative symbols")
        for a in (u, xm, v):
            a.setflags(write=False)
        object.__setattr__(self, "u_given_q", u)
        object.__setattr__(self, "x_map", xm)
        object.__setattr__(self, "v_given", v)

    @property
    def q_size(self) -> int:
        return self.q_pmf.support_size

    @property
    def u_sizes(self) -> tuple[int, int, int]:
        return self.u_given_q.shape[1:]

    @property
    def v_sizes(self) -> tuple[int, int, int]:
        return self.v_given.shape[5:]

    def joint(self, ch: StateChannel) -> JointPmf:
        """Full joint over Q, U0, U1, U2, X, S, Y1, Y2, V0, V1, V2."""
        key = id(ch)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is ch:
            return hit[1]
        if self.x_map.max() >= ch.x_size:
            raise SchemeError("x_map produces symbols outside the channel input")
        if self.v_given.shape[4] != ch.s_size:
            raise SchemeError("v_given state axis does not match the channel")
        shape = (self.q_size, *self.u_sizes, ch.x_size, ch.s_size,
                 ch.y_size, ch.y_size, *self.v_sizes)
        cells = math.prod(shape)
        if cells > MAX_CELLS:
            raise SchemeError(f"joint would have {cells} cells (limit {MAX_CELLS})")
        xhot = np.eye(ch.x_size)[self.x_map]
        t = np.einsum("q,qabc,qabcx,s,xsyz,qabcsijk->qabcxsyzijk",
                      self.q_pmf.probs, self.u_given_q, xhot,
                      ch.state_pmf.probs, ch.kernel, self.v_given, optimize=True)
        j = JointPmf(tuple(zip(JOINT_AXES, shape)), t)
        self._cache[key] = (ch, j)
        return j


@dataclass(frozen=True)
class TimeSharingParams:
    p: float
    px: Pmf
    pu0: Pmf

    def __post_init__(self):
        if not 0.0 <= self.p <= 0.5:
            raise SchemeError(f"time-share weight p={self.p} outside [0, 0.5]")
        for name in ("px", "pu0"):
            val = getattr(self, name)
            if not isinstance(val, Pmf):
                object.__setattr__(self, name, Pmf(val))


@dataclass(frozen=True)
class SuperpositionParams:
    u0_pmf: Pmf
    x_given_u0: np.ndarray  # [u0, x]

    def __post_init__(self):
        if not isinstance(self.u0_pmf, Pmf):
            object.__setattr__(self, "u0_pmf", Pmf(self.u0_pmf))
        k = np.array(self.x_given_u0, dtype=float)
        if k.ndim != 2 or k.shape[0] != self.u0_pmf.support_size:
            raise SchemeError(f"x_given_u0 shape {k.shape} inconsistent with u0_pmf")
        if np.any(k < 0) or np.any(np.abs(k.sum(axis=1) - 1) > SUM_TOL):
            raise SchemeError("x_given_u0 rows are not pmfs")
        k.setflags(write=False)
        object.__setattr__(self, "x_given_u0", k)

    def joint_u0_x(self) -> np.ndarray:
        return self.u0_pmf.probs[:, None] * self.x_given_u0

    @classmethod
    def from_joint(cls, p_u0x) -> "SuperpositionParams":
        p = np.asarray(p_u0x, dtype=float)
        pu = p.sum(axis=1)
        k = np.where(pu[:, None] > 0, p / np.where(pu > 0, pu, 1)[:, None],
                     1.0 / p.shape[1])
        return cls(Pmf(pu / pu.sum()), k)


def _require_deterministic(ch: StateChannel) -> DeterminismWitness:
    w = check_deterministic(ch)
    if w is None:
        raise SchemeError(
            "channel is not deterministic per state; V cannot copy an output")
    return w


def _copy_output_v(ymap: np.ndarray, xvals: np.ndarray, s_size: int,
                   v_size: int) -> np.ndarray:
    """One-hot table V0=V1=V2=y(x, s) for an array of x symbols."""
    y = ymap[xvals[..., None], np.arange(s_size)]
    onehot = np.eye(v_size)[y]
    return np.einsum("...i,...j,...k->...ijk", onehot, onehot, onehot)


def build_ts_scheme(params: TimeSharingParams, ch: StateChannel) -> AuxScheme:
    """Time-sharing specialisation: Q in {1,2,3}, independent U's, no superposition."""
    w = _require_deterministic(ch)
    n = ch.x_size
    if params.px.support_size != n or params.pu0.support_size != n:
        raise SchemeError("input laws must live on the channel input alphabet")
    p = params.p
    q_pmf = Pmf([p, p, 1 - 2 * p])
    pu = np.einsum("a,b,c->abc", params.pu0.probs, params.px.probs, params.px.probs)
    u = np.broadcast_to(pu, (3, n, n, n))
    a0, a1, a2 = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    x_map = np.stack([a1, a2, a0])
    vs = ch.y_size + 1  # last letter is the empty symbol
    v = np.empty((3, n, n, n, ch.s_size, vs, vs, vs))
    v[0] = _copy_output_v(w.y2_map, x_map[0], ch.s_size, vs)
    v[1] = _copy_output_v(w.y1_map, x_map[1], ch.s_size, vs)
    v[2] = 0.0
    v[2, ..., vs - 1, vs - 1, vs - 1] = 1.0
    return AuxScheme(q_pmf, u, x_map, v)


def build_sp_scheme(params: SuperpositionParams, ch: StateChannel) -> AuxScheme:
    """Superposition specialisation: Q in {1,2}, U1, U2 i.i.d. given a shared U0."""
    w = _require_deterministic(ch)
    n = ch.x_size
    k = params.x_given_u0
    if k.shape[1] != n:
        raise SchemeError("x_given_u0 must map onto the channel input alphabet")
    m = params.u0_pmf.support_size
    pu = np.einsum("a,ab,ac->abc", params.u0_pmf.probs, k, k)
    u = np.broadcast_to(pu, (2, m, n, n))
    _, a1, a2 = np.meshgrid(np.arange(m), np.arange(n), np.arange(n), indexing="ij")
    x_map = np.stack([a1, a2])
    vs = ch.y_size
    v = np.stack([_copy_output_v(w.y2_map, x_map[0], ch.s_size, vs),
                  _copy_output_v(w.y1_map, x_map[1], ch.s_size, vs)])
    return AuxScheme(Pmf([0.5, 0.5]), u, x_map, v)


def make_blackwell_sp_params(q1: float, alpha1: float, alpha2: float,
                             beta1: float, beta2: float) -> SuperpositionParams:
    """The four-letter U0 family used for the Blackwell channel with state.

    The six-case kernel is written in the figure's input letters and then
    mapped onto the channel's inputs through ``FIGURE_TO_CHANNEL``.
    """
    if not 0.0 <= q1 <= 0.5:
        raise SchemeError(f"q1={q1} outside [0, 0.5]")
    for name, val in (("alpha1", alpha1), ("alpha2", alpha2),
                      ("beta1", beta1), ("beta2", beta2)):
        if not 0.0 <= val <= 1.0:
            raise SchemeError(f"{name}={val} outside [0, 1]")
    pu0 = [q1, q1, (1 - 2 * q1) / 2, (1 - 2 * q1) / 2]

    def col(a, b):
        return [a * (1 - b), (1 - a) * (1 - b), b]

    rows = [col(alpha1, beta1), col(1 - alpha1, beta1),
            col(alpha2, beta2), col(1 - alpha2, beta2)]
    fig = np.array(rows)  # [u0, figure letter]
    k = np.zeros_like(fig)
    for f, c in enumerate(FIGURE_TO_CHANNEL):
        k[:, c] = fig[:, f]
    return SuperpositionParams(Pmf(pu0), k)


# -- symmetry -------------------------------------------------------------

def _mirror_tables(aux: AuxScheme, pi: tuple[int, ...]):
    """Tables of the mirrored scheme: swap (U1,U2), (V1,V2) and apply pi to S."""
    u = aux.u_given_q.transpose(0, 1, 3, 2)
    xm = aux.x_map.transpose(0, 1, 3, 2)
    v = aux.v_given.transpose(0, 1, 3, 2, 4, 5, 7, 6)[:, :, :, :, list(pi)]
    return u, xm, v


def find_aux_symmetry(aux: AuxScheme, w: SymmetryWitness) -> tuple[int, ...] | None:
    """A bijection on Q making the auxiliaries symmetric, or None."""
    n1, n2 = aux.u_sizes[1:]
    v1, v2 = aux.v_sizes[1:]
    if n1 != n2 or v1 != v2 or aux.v_given.shape[4] != len(w.pi):
        return None
    mu, mx, mv = _mirror_tables(aux, w.pi)
    pq = aux.q_pmf.probs
    nq = aux.q_size
    ok = np.zeros((nq, nq), dtype=bool)
    for q in range(nq):
        for r in range(nq):
            ok[q, r] = (abs(pq[q] - pq[r]) <= SYM_TOL
                        and np.array_equal(aux.x_map[q], mx[r])
                        and np.max(np.abs(aux.u_given_q[q] - mu[r])) <= SYM_TOL
                        and np.max(np.abs(aux.v_given[q] - mv[r])) <= SYM_TOL)
    rows, cols = linear_sum_assignment(~ok)
    if not ok[rows, cols].all():
        return None
    return tuple(int(c) for c in cols)


def is_symmetric_aux(aux: AuxScheme, w: SymmetryWitness) -> bool:
    return find_aux_symmetry(aux, w) is not None


def mirror(aux: AuxScheme, ch: StateChannel, w: SymmetryWitness) -> AuxScheme:
    """The receiver-swapped copy of ``aux`` (the Q' half of the symmetrisation)."""
    validate_symmetry(ch, w.pi)
    if aux.u_sizes[1] != aux.u_sizes[2] or aux.v_sizes[1] != aux.v_sizes[2]:
        raise SchemeError("U1/U2 and V1/V2 must share alphabets to mirror")
    u, xm, v = _mirror_tables(aux, w.pi)
    return AuxScheme(aux.q_pmf, u, xm, v)


def symmetrize(aux: AuxScheme, ch: StateChannel, w: SymmetryWitness) -> AuxScheme:
    """Time-share evenly between ``aux`` and its mirror; Q grows to 2N letters.

    The result is symmetric under q <-> q + N whenever pi is an involution,
    which holds for every built-in channel.
    """
    m = mirror(aux, ch, w)
    q = np.concatenate([aux.q_pmf.probs, m.q_pmf.probs]) * 0.5
    return AuxScheme(Pmf(q),
                     np.concatenate([aux.u_given_q, m.u_given_q]),
                     np.concatenate([aux.x_map, m.x_map]),
                     np.concatenate([aux.v_given, m.v_given]))


def constant_aux(ch: StateChannel) -> AuxScheme:
    """Every auxiliary a singleton; X is pinned to input 0."""
    return AuxScheme(Pmf([1.0]), np.ones((1, 1, 1, 1)), np.zeros((1, 1, 1, 1)),
                     np.ones((1, 1, 1, 1, ch.s_size, 1, 1, 1)))


def random_aux(rng: np.random.Generator, ch: StateChannel, q_size: int = 1,
               u0_size: int = 2, u_size: int = 2, v_sizes=(2, 2, 2)) -> AuxScheme:
    """A random (generally asymmetric) scheme on small alphabets."""
    shape_u = (q_size, u0_size, u_size, u_size)
    u = rng.dirichlet(np.ones(math.prod(shape_u[1:])), size=q_size).reshape(shape_u)
    xm = rng.integers(0, ch.x_size, size=shape_u)
    nv = math.prod(v_sizes)
    rows = math.prod(shape_u) * ch.s_size
    v = rng.dirichlet(np.ones(nv), size=rows).reshape(*shape_u, ch.s_size, *v_sizes)
    return AuxScheme(Pmf(rng.dirichlet(np.ones(q_size))), u, xm, v)


def ensure_pmf(p) -> Pmf:
    try:
        return p if isinstance(p, Pmf) else Pmf(p)
    except ValidationError as e:
        raise SchemeError(str(e)) from e
