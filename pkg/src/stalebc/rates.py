"""Rate expressions for the broadcast channel with stale state.

Every quantity is in bits per channel use. Generic evaluators work on an
:class:`~stalebc.schemes.AuxScheme`; the specialised ones (time-sharing,
superposition, degraded upper bound) work on small channel joints and are
what the optimiser drives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .channels import (ChannelError, StateChannel, SymmetryWitness,
                       check_deterministic, validate_symmetry)
from .optimizer import SearchSpec, maximize
from .prob import JointPmf, Pmf, binary_entropy, entropy
from .schemes import (FIGURE_TO_CHANNEL, AuxScheme, SchemeError,
                      SuperpositionParams, find_aux_symmetry, mirror)

CLAMP_TOL = 1e-9
U_ALL = ("U0", "U1", "U2")


@dataclass(frozen=True)
class RegionBounds:
    """Right-hand sides of the two individual and two sum-rate constraints."""

    r1_max: float
    r2_max: float
    sum3: float
    sum4: float

    @property
    def max_sum_rate(self) -> float:
        return max(0.0, min(self.sum3, self.sum4, self.r1_max + self.r2_max))


@dataclass
class RateCertificate:
    value: float
    term_breakdown: dict[str, Any]
    argument: dict[str, Any]
    method: str

    def to_dict(self) -> dict:
        return _jsonable({"value": self.value, "term_breakdown": self.term_breakdown,
                          "argument": self.argument, "method": self.method})


@dataclass(frozen=True)
class TsDiagnostics:
    c1: float
    l_of_p: float
    r_of_p: float
    p_star: float
    i_x_y1_s: float
    i_x_y2_given_y1_s: float


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, Pmf):
        return _jsonable(obj.probs)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


# -- closed forms used as references ---------------------------------------

def erasure_ts_closed_form(eps: float) -> float:
    return (1 - eps ** 2) / (2 + eps)


def blackwell_ts_closed_form(p0: float, p2: float) -> float:
    """Scalar time-sharing objective for the Blackwell channel with state."""
    p1 = 1 - p0 - p2

    def hb_ratio(num, den):
        return binary_entropy(min(max(num / den, 0.0), 1.0)) if den > 0 else 0.0

    den = 2 + 0.5 * (1 - p0) * hb_ratio(p2, 1 - p0) + 0.5 * (1 - p2) * hb_ratio(p0, 1 - p2)
    return entropy([p0, p1, p2]) / den


# -- channel-level information terms ---------------------------------------

def _require_sym_det(ch: StateChannel) -> SymmetryWitness:
    try:
        w = validate_symmetry(ch)
    except ChannelError as e:
        raise ChannelError(f"channel must be symmetric: {e}") from e
    if check_deterministic(ch) is None:
        raise ChannelError("channel must be deterministic per state")
    return w


def _input_spec(ch: StateChannel, spec: SearchSpec | None) -> SearchSpec:
    return spec or SearchSpec(dims=(ch.x_size,))


def c1_capacity(ch: StateChannel, spec: SearchSpec | None = None) -> tuple[float, Pmf]:
    """max over p(x) of I(X;Y1|S), with the maximising input law. Cached per channel."""
    hit = ch._cache.get("c1")
    if hit is not None:
        return hit
    r = maximize(lambda b: ch.joint(b[0]).cmi("X", "Y1", "S"), _input_spec(ch, spec))
    out = (r.best_value, Pmf(r.best_point[0]))
    return ch._cache.setdefault("c1", out)


def c12_capacity(ch: StateChannel, spec: SearchSpec | None = None) -> tuple[float, Pmf]:
    hit = ch._cache.get("c12")
    if hit is not None:
        return hit
    r = maximize(lambda b: ch.joint(b[0]).cmi("X", ("Y1", "Y2"), "S"),
                 _input_spec(ch, spec))
    out = (r.best_value, Pmf(r.best_point[0]))
    return ch._cache.setdefault("c12", out)


def ts_ratio(px, ch: StateChannel, c1: float) -> float:
    """C1 I(X;Y1,Y2|S) / (2 C1 + I(X;Y2|Y1,S)) at the input law ``px``."""
    j = ch.joint(px)
    num = c1 * j.cmi("X", ("Y1", "Y2"), "S")
    den = 2 * c1 + j.cmi("X", "Y2", ("Y1", "S"))
    return num / den if den > 0 else 0.0


def ts_lines(p: float, px, ch: StateChannel, spec: SearchSpec | None = None) -> TsDiagnostics:
    """The two linear-in-p branches of the time-sharing rate and their crossing."""
    if not 0.0 <= p <= 0.5:
        raise ValueError(f"p={p} outside [0, 0.5]")
    c1, _ = c1_capacity(ch, spec)
    j = ch.joint(px)
    i1 = j.cmi("X", "Y1", "S")
    i21 = j.cmi("X", "Y2", ("Y1", "S"))
    left = p * i1 + (0.5 - p) * c1 + 0.5 * p * i21
    right = p * i1 + (1 - 2 * p) * c1
    den = 2 * c1 + i21
    p_star = c1 / den if den > 0 else 0.0
    return TsDiagnostics(c1, left, right, p_star, i1, i21)


def ts_rate(ch: StateChannel, spec: SearchSpec | None = None) -> RateCertificate:
    """Best symmetric rate of the time-sharing scheme (ratio maximised over p(x))."""
    _require_sym_det(ch)
    c1, pu0 = c1_capacity(ch)
    r = maximize(lambda b: ts_ratio(b[0], ch, c1), _input_spec(ch, spec))
    px = r.best_point[0]
    d = ts_lines(0.0, px, ch)
    i12 = d.i_x_y1_s + d.i_x_y2_given_y1_s
    value = c1 * i12 / (2 * c1 + d.i_x_y2_given_y1_s) if c1 > 0 else 0.0
    at_star = ts_lines(d.p_star, px, ch)
    return RateCertificate(
        value=max(value, 0.0),
        term_breakdown={
            "C1": c1,
            "I(X;Y1|S)": d.i_x_y1_s,
            "I(X;Y2|Y1,S)": d.i_x_y2_given_y1_s,
            "I(X;Y1,Y2|S)": i12,
            "L(p*)": at_star.l_of_p,
            "R(p*)": at_star.r_of_p,
        },
        argument={"px": px, "pu0": pu0, "p_star": d.p_star,
                  "evaluations": r.evaluations},
        method="optimizer",
    )


def ts_scheme_rate(p: float, px, pu0, ch: StateChannel) -> float:
    """Two-term time-sharing min for fixed (p, U1 law, U0 law)."""
    if p > 0:
        j1 = ch.joint(px)
        i1 = j1.cmi("X", "Y1", "S")
        i21 = j1.cmi("X", "Y2", ("Y1", "S"))
    else:
        i1 = i21 = 0.0
    i0 = ch.joint(pu0).cmi("X", "Y1", "S")
    a = p * i1 + (0.5 - p) * i0 + 0.5 * p * i21
    b = p * i1 + (1 - 2 * p) * i0
    return max(0.0, min(a, b))


def common_maximizer_rate(ch: StateChannel, spec: SearchSpec | None = None) -> RateCertificate | None:
    """C1 C12 / (C1 + C12) when one input law maximises both I(X;Y1|S) and I(X;Y1,Y2|S)."""
    c1, _ = c1_capacity(ch, spec)
    c12, p12 = c12_capacity(ch, spec)
    if ch.joint(p12).cmi("X", "Y1", "S") < c1 - 1e-6:
        return None
    den = c1 + c12
    value = c1 * c12 / den if den > 0 else 0.0
    return RateCertificate(
        value=value,
        term_breakdown={"C1": c1, "C12": c12},
        argument={"px": p12, "p_star": c1 / den if den > 0 else 0.0},
        method="closed_form",
    )


def _sp_joint(ch: StateChannel, p_u0x: np.ndarray) -> JointPmf:
    t = np.einsum("ux,s,xsab->uxsab", p_u0x, ch.state_pmf.probs, ch.kernel)
    return JointPmf((("U0", p_u0x.shape[0]), ("X", ch.x_size), ("S", ch.s_size),
                     ("Y1", ch.y_size), ("Y2", ch.y_size)), t)


def _sp_terms(ch: StateChannel, p_u0x: np.ndarray) -> dict[str, float]:
    j = _sp_joint(ch, p_u0x)
    a = j.cmi("X", "Y1", "S")
    b = j.cmi("X", "Y2", ("Y1", "U0", "S"))
    c = j.cmi("U0", "Y1", "S")
    return {"I(X;Y1|S)": a, "I(X;Y2|Y1,U0,S)": b, "I(U0;Y1|S)": c,
            "term1": 0.5 * a + 0.25 * b, "term2": 0.5 * a + 0.5 * c}


def _sp_value(ch: StateChannel, p_u0x: np.ndarray) -> float:
    t = _sp_terms(ch, p_u0x)
    return max(0.0, min(t["term1"], t["term2"]))


def _active(t1: float, t2: float) -> str:
    if abs(t1 - t2) <= CLAMP_TOL:
        return "tie"
    return "term1" if t1 < t2 else "term2"


def sp_rate(ch: StateChannel, params: SuperpositionParams) -> RateCertificate:
    """Superposition-scheme symmetric rate at a fixed p(u0) p(x|u0)."""
    _require_sym_det(ch)
    if params.x_given_u0.shape[1] != ch.x_size:
        raise SchemeError("x_given_u0 must map onto the channel input alphabet")
    terms = _sp_terms(ch, params.joint_u0_x())
    terms["active"] = _active(terms["term1"], terms["term2"])
    live = params.x_given_u0[params.u0_pmf.probs > 0]
    if np.all(live.max(axis=1) == 1.0):
        # X is a function of U0: only the common layer carries data, and the
        # scheme degenerates to time-sharing with every slot spent on U0
        terms["common_layer_rate"] = ts_scheme_rate(0.0, None, params.joint_u0_x().sum(axis=0), ch)
    return RateCertificate(
        value=max(0.0, min(terms["term1"], terms["term2"])),
        term_breakdown=terms,
        argument={"u0_pmf": params.u0_pmf, "x_given_u0": params.x_given_u0},
        method="closed_form",
    )


def sp_optimize(ch: StateChannel, u0_size: int = 2,
                spec: SearchSpec | None = None) -> RateCertificate:
    """Search p(u0, x) with |U0| = ``u0_size`` for the best superposition rate."""
    _require_sym_det(ch)
    n = u0_size * ch.x_size
    spec = spec or SearchSpec(dims=(n,))
    r = maximize(lambda b: _sp_value(ch, b[0].reshape(u0_size, ch.x_size)), spec)
    params = SuperpositionParams.from_joint(r.best_point[0].reshape(u0_size, ch.x_size))
    cert = sp_rate(ch, params)
    cert.method = "optimizer"
    cert.argument["evaluations"] = r.evaluations
    cert.argument["budget_exhausted"] = r.exhausted
    return cert


# -- degraded-channel upper bound ------------------------------------------

def u_cardinality_limit(ch: StateChannel) -> int:
    return min(ch.x_size, ch.y_size * ch.s_size) + 1


def _ub_joint(ch: StateChannel, p_ux: np.ndarray) -> JointPmf:
    t = np.einsum("ux,s,xsab->uxsab", p_ux, ch.state_pmf.probs, ch.kernel)
    return JointPmf((("U", p_ux.shape[0]), ("X", ch.x_size), ("S", ch.s_size),
                     ("Y1", ch.y_size), ("Y2", ch.y_size)), t)


def _ub_terms(ch: StateChannel, p_ux: np.ndarray) -> tuple[float, float]:
    j = _ub_joint(ch, p_ux)
    return j.cmi("U", "Y2", "S"), j.cmi("X", ("Y1", "Y2"), ("S", "U"))


def degraded_upper_bound(ch: StateChannel, pu, x_given_u) -> float:
    """min{ I(U;Y2|S), I(X;Y1,Y2|S,U) } for the given p(u) p(x|u)."""
    pu = pu if isinstance(pu, Pmf) else Pmf(pu)
    k = np.asarray(x_given_u, dtype=float)
    if k.shape != (pu.support_size, ch.x_size):
        raise ValueError(f"x_given_u shape {k.shape} != ({pu.support_size}, {ch.x_size})")
    if np.any(k < 0) or np.any(np.abs(k.sum(axis=1) - 1) > 1e-9):
        raise ValueError("x_given_u rows are not pmfs")
    limit = u_cardinality_limit(ch)
    if pu.support_size > limit:
        raise ValueError(f"|U|={pu.support_size} exceeds the cardinality bound {limit}")
    return max(0.0, min(_ub_terms(ch, pu.probs[:, None] * k)))


def blackwell_bound_point() -> tuple[Pmf, np.ndarray]:
    """The reference evaluation point, mapped to the channel's input letters."""
    fig = np.array([[0.832, 0.0, 0.168], [0.0, 0.832, 0.168]])
    k = np.zeros_like(fig)
    for f, c in enumerate(FIGURE_TO_CHANNEL):
        k[:, c] = fig[:, f]
    return Pmf([0.5, 0.5]), k


def u_equals_x_point(ch: StateChannel, px=None) -> tuple[Pmf, np.ndarray]:
    px = Pmf.uniform(ch.x_size) if px is None else px
    return px, np.eye(ch.x_size)


def optimize_upper_bound(ch: StateChannel, u_size: int | None = None,
                         spec: SearchSpec | None = None) -> RateCertificate:
    limit = u_cardinality_limit(ch)
    u_size = u_size or limit
    if u_size > limit:
        raise ValueError(f"|U|={u_size} exceeds the cardinality bound {limit}")
    n = u_size * ch.x_size
    spec = spec or SearchSpec(dims=(n,))

    def obj(b):
        return min(_ub_terms(ch, b[0].reshape(u_size, ch.x_size)))

    r = maximize(obj, spec)
    p_ux = r.best_point[0].reshape(u_size, ch.x_size)
    a, b = _ub_terms(ch, p_ux)
    pu = p_ux.sum(axis=1)
    k = np.where(pu[:, None] > 0, p_ux / np.where(pu > 0, pu, 1)[:, None], 1.0 / ch.x_size)
    return RateCertificate(
        value=max(0.0, min(a, b)),
        term_breakdown={"I(U;Y2|S)": a, "I(X;Y1,Y2|S,U)": b, "active": _active(a, b)},
        argument={"pu": pu, "x_given_u": k, "evaluations": r.evaluations,
                  "budget_exhausted": r.exhausted},
        method="optimizer",
    )


# -- generic scheme evaluation ---------------------------------------------

def region_bounds(aux: AuxScheme, ch: StateChannel) -> RegionBounds:
    """Evaluate the four rate constraints on the full joint of ``aux`` and ``ch``."""
    j = aux.joint(ch)
    I = j.cmi
    r1 = I(("U0", "U1"), ("Y1", "V1"), ("Q", "S")) - I(U_ALL, ("V0", "V1"), ("Q", "Y1", "S"))
    r2 = I(("U0", "U2"), ("Y2", "V2"), ("Q", "S")) - I(U_ALL, ("V0", "V2"), ("Q", "Y2", "S"))
    i12 = I("U1", "U2", ("Q", "U0"))
    sum3 = (I("U1", ("Y1", "V1"), ("Q", "U0", "S"))
            + I("U2", ("Y2", "V2"), ("Q", "U0", "S"))
            + min(I("U0", ("Y1", "V1"), ("Q", "S")), I("U0", ("Y2", "V2"), ("Q", "S")))
            - i12
            - I(U_ALL, "V1", ("Q", "V0", "Y1", "S"))
            - I(U_ALL, "V2", ("Q", "V0", "Y2", "S"))
            - max(I(U_ALL, "V0", ("Q", "Y1", "S")), I(U_ALL, "V0", ("Q", "Y2", "S"))))
    sum4 = (I(("U0", "U1"), ("Y1", "V1"), ("Q", "S"))
            + I(("U0", "U2"), ("Y2", "V2"), ("Q", "S"))
            - i12
            - I(U_ALL, ("V0", "V1"), ("Q", "Y1", "S"))
            - I(U_ALL, ("V0", "V2"), ("Q", "Y2", "S")))
    vals = [r1, r2, sum3, sum4]
    return RegionBounds(*(max(v, 0.0) if v > -CLAMP_TOL else 0.0 for v in vals))


SYM_RATE_TERMS = {
    "I(U1;Y1,V1|Q,U0,S)": ("U1", ("Y1", "V1"), ("Q", "U0", "S")),
    "I(U0;Y1,V1|Q,S)": ("U0", ("Y1", "V1"), ("Q", "S")),
    "I(U1;U2|Q,U0)": ("U1", "U2", ("Q", "U0")),
    "I(U0,U1,U2;V1|Q,V0,Y1,S)": (U_ALL, "V1", ("Q", "V0", "Y1", "S")),
    "I(U0,U1,U2;V0|Q,Y1,S)": (U_ALL, "V0", ("Q", "Y1", "S")),
    "I(U0,U1;Y1,V1|Q,S)": (("U0", "U1"), ("Y1", "V1"), ("Q", "S")),
    "I(U0,U1,U2;V0,V1|Q,Y1,S)": (U_ALL, ("V0", "V1"), ("Q", "Y1", "S")),
}


def symmetric_scheme_rate(aux: AuxScheme, ch: StateChannel) -> RateCertificate:
    """Symmetric rate of a symmetric auxiliary scheme (two-term min)."""
    w = validate_symmetry(ch)
    q_perm = find_aux_symmetry(aux, w)
    if q_perm is None:
        raise SchemeError("auxiliaries are not symmetric; call symmetrize() first")
    j = aux.joint(ch)
    t = {name: j.cmi(*args) for name, args in SYM_RATE_TERMS.items()}
    names = list(SYM_RATE_TERMS)
    first = (t[names[0]] + 0.5 * t[names[1]] - 0.5 * t[names[2]]
             - t[names[3]] - 0.5 * t[names[4]])
    second = t[names[5]] - 0.5 * t[names[2]] - t[names[6]]
    t["term1"], t["term2"] = first, second
    t["active"] = _active(first, second)
    return RateCertificate(
        value=max(0.0, min(first, second)),
        term_breakdown=t,
        argument={"q_size": aux.q_size, "q_permutation": list(q_perm)},
        method="symmetric_scheme",
    )


MIRROR_PAIRS = [
    # (on the mirrored scheme, on the original scheme)
    ((("U0", "U1"), ("Y1", "V1"), ("Q", "S")), (("U0", "U2"), ("Y2", "V2"), ("Q", "S"))),
    ((U_ALL, ("V0", "V1"), ("Q", "Y1", "S")), (U_ALL, ("V0", "V2"), ("Q", "Y2", "S"))),
    (("U1", ("Y1", "V1"), ("Q", "U0", "S")), ("U2", ("Y2", "V2"), ("Q", "U0", "S"))),
    (("U0", ("Y1", "V1"), ("Q", "S")), ("U0", ("Y2", "V2"), ("Q", "S"))),
    (("U1", "U2", ("Q", "U0")), ("U1", "U2", ("Q", "U0"))),
    ((U_ALL, "V1", ("Q", "V0", "Y1", "S")), (U_ALL, "V2", ("Q", "V0", "Y2", "S"))),
    ((U_ALL, "V0", ("Q", "Y1", "S")), (U_ALL, "V0", ("Q", "Y2", "S"))),
]


def mirror_equalities(aux: AuxScheme, ch: StateChannel,
                      w: SymmetryWitness) -> list[tuple[float, float]]:
    """The seven (mirrored, original) information-term pairs; each pair should agree."""
    jm = mirror(aux, ch, w).joint(ch)
    jo = aux.joint(ch)
    return [(jm.cmi(*m), jo.cmi(*o)) for m, o in MIRROR_PAIRS]
