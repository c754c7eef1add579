"""Reference-number suite: every headline rate, recomputed and checked."""

from __future__ import annotations

import json
import time
from importlib import resources
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channels import (StateChannel, make_blackwell_with_state, make_erasure,
                       make_finite_field, validate_symmetry)
from .erasure_sim import SimConfig, simulate
from .rates import (blackwell_bound_point, blackwell_ts_closed_form, c1_capacity,
                    region_bounds, degraded_upper_bound, erasure_ts_closed_form,
                    mirror_equalities, optimize_upper_bound, common_maximizer_rate, sp_optimize,
                    sp_rate, symmetric_scheme_rate, ts_rate, ts_ratio)
from .optimizer import SearchSpec
from .schemes import make_blackwell_sp_params, random_aux, symmetrize

def report_schema() -> dict:
    """JSON schema that ``reproduce --json`` output conforms to."""
    return json.loads(resources.files(__package__).joinpath("reproduce.schema.json").read_text())


ERASURE_GRID = [round(0.1 * i, 1) for i in range(10)]


@dataclass
class Row:
    id: str
    description: str
    computed: float | None
    target: float
    relation: str  # "abs<=", "rel<=", ">=", "in"
    tolerance: float
    passed: bool = False
    upper: float | None = None
    error: str | None = None
    seconds: float = field(default=0.0, compare=False)

    def check(self) -> "Row":
        v = self.computed
        if v is None:
            self.passed = False
        elif self.relation == "abs<=":
            self.passed = abs(v - self.target) <= self.tolerance
        elif self.relation == "rel<=":
            self.passed = abs(v - self.target) <= self.tolerance * abs(self.target)
        elif self.relation == ">=":
            self.passed = v >= self.target - self.tolerance
        elif self.relation == "in":
            self.passed = self.target <= v <= self.upper
        else:
            raise ValueError(self.relation)
        self.passed = bool(self.passed)
        return self

    def to_dict(self) -> dict:
        d = {"id": self.id, "description": self.description,
             "computed": self.computed, "target": self.target,
             "relation": self.relation, "tolerance": self.tolerance,
             "passed": self.passed}
        if self.upper is not None:
            d["upper"] = self.upper
        if self.error is not None:
            d["error"] = self.error
        return d


def scalar_formula_deviation(ch: StateChannel, n: int = 50) -> float:
    """Largest gap between the generic ratio and the scalar Blackwell formula on a grid."""
    c1, _ = c1_capacity(ch)
    worst = 0.0
    grid = np.linspace(0.0, 1.0, n)
    for p0 in grid:
        for p2 in grid:
            if p0 + p2 > 1.0 + 1e-12:
                continue
            p2c = min(p2, 1.0 - p0)
            px = np.array([p0, max(1.0 - p0 - p2c, 0.0), p2c])
            px /= px.sum()
            gen = ts_ratio(px, ch, c1)
            ref = blackwell_ts_closed_form(px[0], px[2])
            worst = max(worst, abs(gen - ref))
    return worst


def symmetry_suite(ch: StateChannel, seed: int, n_sym: int = 50,
                 n_asym: int = 20) -> dict[str, float]:
    """Worst-case residuals of the symmetrisation and half-sum-rate identities."""
    w = validate_symmetry(ch)
    rng = np.random.default_rng(seed)
    half_gap = 0.0
    for _ in range(n_sym):
        aux = symmetrize(random_aux(rng, ch), ch, w)
        t2 = symmetric_scheme_rate(aux, ch).value
        half_gap = max(half_gap, abs(t2 - 0.5 * region_bounds(aux, ch).max_sum_rate))
    sr_margin = np.inf
    mirror_gap = 0.0
    for _ in range(n_asym):
        aux = random_aux(rng, ch)
        before = region_bounds(aux, ch).max_sum_rate
        after = region_bounds(symmetrize(aux, ch, w), ch).max_sum_rate
        sr_margin = min(sr_margin, after - before)
        for m, o in mirror_equalities(aux, ch, w):
            mirror_gap = max(mirror_gap, abs(m - o))
    return {"half_sum_gap": half_gap, "sym_sum_margin": float(sr_margin),
            "mirror_gap": mirror_gap}


def _timed(fn: Callable[[], list[Row]]) -> list[Row]:
    t = time.perf_counter()
    try:
        rows = fn()
    except Exception as e:  # a crashing check is a failed row, not a crashed suite
        return [Row(fn.__name__, f"raised {type(e).__name__}", None, 0.0, "abs<=", 0.0,
                    error=str(e))]
    dt = (time.perf_counter() - t) / max(len(rows), 1)
    for r in rows:
        r.seconds = dt
        r.check()
    return rows


def run_suite(seed: int = 7, blackwell: StateChannel | None = None,
              threads: int | None = None, include_simulation: bool = True) -> list[Row]:
    bw = blackwell if blackwell is not None else make_blackwell_with_state()
    state: dict = {}

    def spec(n):
        return SearchSpec(dims=(n,), seed=seed, threads=threads)

    def erasure():
        rows = []
        for eps in ERASURE_GRID:
            v = ts_rate(make_erasure(eps), spec(2)).value
            rows.append(Row(f"erasure_ts_eps{eps:.1f}",
                            f"erasure eps={eps:.1f}: time-sharing rate vs (1-eps^2)/(2+eps)",
                            v, erasure_ts_closed_form(eps), "abs<=", 1e-6))
        return rows

    def common_maximizer():
        rows = []
        for eps in (0.3, 0.7):
            c = common_maximizer_rate(make_erasure(eps))
            rows.append(Row(f"erasure_common_max_eps{eps:.1f}",
                            f"erasure eps={eps:.1f}: C1*C12/(C1+C12) closed form",
                            None if c is None else c.value,
                            erasure_ts_closed_form(eps), "abs<=", 1e-6))
        c = common_maximizer_rate(make_finite_field(2))
        rows.append(Row("ff2_common_max", "GF(2): C1*C12/(C1+C12) = 2/3",
                        None if c is None else c.value, 2 / 3, "abs<=", 1e-6))
        return rows

    def finite_field():
        v = ts_rate(make_finite_field(2), spec(4)).value
        return [Row("ff2_ts", "GF(2) finite-field channel: time-sharing rate = 2/3",
                    v, 2 / 3, "abs<=", 1e-6)]

    def blackwell_ts():
        c = ts_rate(bw, spec(3))
        state["ts"] = c.value
        px = c.argument["px"]
        return [Row("blackwell_ts", "Blackwell with state: time-sharing rate",
                    c.value, 0.5989, "abs<=", 1e-3),
                Row("blackwell_ts_argmax",
                    "Blackwell: max |(p0, p2) - 0.37325| at the optimum",
                    float(max(abs(px[0] - 0.37325), abs(px[2] - 0.37325))),
                    0.0, "abs<=", 5e-3)]

    def blackwell_sp():
        p = make_blackwell_sp_params(0.5, 0.13628, 0.5, 0.23025, 0.5)
        at_point = sp_rate(bw, p).value
        best = sp_optimize(bw, 2, spec(2 * bw.x_size)).value
        state["sp"] = best
        return [Row("blackwell_sp_point",
                    "Blackwell: superposition rate at q1=0.5, a1=0.13628, b1=0.23025",
                    at_point, 0.6103, ">=", 1e-3),
                Row("blackwell_sp_optimized", "Blackwell: optimiser's superposition rate",
                    best, 0.6103, ">=", 1e-3)]

    def separation():
        if "sp" not in state or "ts" not in state:
            raise RuntimeError("inner-bound rows did not complete")
        return [Row("blackwell_sp_minus_ts",
                    "Blackwell: superposition beats time-sharing by at least 0.010",
                    state["sp"] - state["ts"], 0.010, ">=", 0.0)]

    def upper_bound():
        pu, k = blackwell_bound_point()
        at_point = degraded_upper_bound(bw, pu, k)
        best = optimize_upper_bound(bw, None, spec(4 * bw.x_size)).value
        return [Row("blackwell_ub_point",
                    "Blackwell: degraded-channel bound at U~Bern(0.5), p(x|u)=0.832/0.168",
                    at_point, 0.653, ">=", 1e-3),
                Row("blackwell_ub_optimized",
                    "Blackwell: optimiser's degraded-channel bound lies in [0.653, 2/3)",
                    best, 0.653, "in", 0.0, upper=2 / 3 - 1e-4)]

    def scalar_formula():
        return [Row("blackwell_scalar_formula_grid",
                    "Blackwell: generic time-sharing ratio vs scalar formula, 50x50 grid",
                    scalar_formula_deviation(bw), 0.0, "abs<=", 1e-9)]

    def symmetry():
        r = symmetry_suite(bw, seed)
        return [Row("symmetric_half_sum_rate",
                    "50 symmetric schemes: symmetric rate = half the max sum-rate",
                    r["half_sum_gap"], 0.0, "abs<=", 1e-9),
                Row("symmetrize_sum_rate",
                    "20 asymmetric schemes: symmetrised sum-rate - original sum-rate",
                    r["sym_sum_margin"], 0.0, ">=", 1e-9),
                Row("symmetrize_mirror_equalities",
                    "20 asymmetric schemes: worst mirror-equality residual",
                    r["mirror_gap"], 0.0, "abs<=", 1e-9)]

    def simulation():
        rep = simulate(SimConfig(0.5, 2000, 100, seed))
        return [Row("sim_erasure_eps0.5",
                    "simulator eps=0.5, k=2000, 100 trials: per-user rate within 3% of 0.3",
                    rep.per_user_rate, 0.3, "rel<=", 0.03),
                Row("sim_decoding_failures", "simulator: trials with a decoding error",
                    float(rep.failures), 0.0, "abs<=", 0.0)]

    checks = [erasure, common_maximizer, finite_field, blackwell_ts, blackwell_sp, separation,
              upper_bound, scalar_formula, symmetry]
    if include_simulation:
        checks.append(simulation)
    rows: list[Row] = []
    for fn in checks:
        rows.extend(_timed(fn))
    return rows


def format_table(rows: list[Row]) -> str:
    lines = [f"{'check':34s} {'computed':>14s} {'target':>14s}  rule          result"]
    for r in rows:
        comp = "error" if r.computed is None else f"{r.computed:.10g}"
        if r.relation == "in":
            rule = f"in [{r.target:g}, {r.upper:.6g}]"
            tgt = f"{r.target:.10g}"
        else:
            rule = f"{r.relation} {r.tolerance:g}"
            tgt = f"{r.target:.10g}"
        lines.append(f"{r.id:34s} {comp:>14s} {tgt:>14s}  {rule:13s} "
                     f"{'PASS' if r.passed else 'FAIL'}  ({r.seconds:.1f}s)")
    n_ok = sum(r.passed for r in rows)
    lines.append(f"{n_ok}/{len(rows)} checks passed")
    return "\n".join(lines)
