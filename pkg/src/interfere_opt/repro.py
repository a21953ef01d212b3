"""Reproduction suite for the published worked examples.

Each check returns a :class:`Check` with the expected value, the computed
value and a pass flag at the tolerance stated next to it.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DegenerateMeasureError
from .exact import efficiencies
from .model import CovarianceSpec, ModelKind, build_kernel
from .reference import d1, d2, oa_i
from .solver import Measure, closed_form, solve, solve_proportions, verify_measure


@dataclass
class Check:
    name: str
    expected: str
    got: str
    passed: bool

    def to_dict(self):
        return {"name": self.name, "expected": self.expected, "got": self.got, "passed": bool(self.passed)}


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def check_case_ii():
    out = []
    for k, t, z, y in [(5, 4, Fraction(2, 41), Fraction(18, 5) - Fraction(2, 205)),
                       (4, 3, Fraction(3, 26), Fraction(5, 2) - Fraction(3, 104))]:
        sol = solve(k, t, model_kind=ModelKind.UNDIRECTIONAL)
        ok = abs(sol.z_star - float(z)) <= 1e-6 and abs(sol.y_star - float(y)) <= 1e-6
        out.append(Check(f"closed form ({k},{t})", f"z*={float(z):.8g}, y*={float(y):.8g}",
                         f"z*={sol.z_star:.8g}, y*={sol.y_star:.8g}", bool(ok)))
    return out


def check_d2():
    ker = build_kernel(CovarianceSpec.identity(), 5)
    y = solve(5, 4, kernel=ker).y_star
    e = efficiencies(d2(), ker, ModelKind.DIRECTIONAL, y)
    vals = (e.eff_a, e.eff_d, e.eff_e, e.eff_t)
    return Check("d2 efficiencies", "(1, 1, 1, 1)", ", ".join(f"{v:.10f}" for v in vals),
                 bool(np.allclose(vals, 1.0, rtol=0, atol=1e-9)))


def check_d1():
    ker = build_kernel(CovarianceSpec.identity(), 4)
    y = solve(4, 4, kernel=ker).y_star
    e = efficiencies(d1(), ker, ModelKind.DIRECTIONAL, y)
    vals = np.array([e.eff_a, e.eff_d, e.eff_e, e.eff_t])
    want = np.array([0.9943, 0.9946, 0.9682, 0.9949])
    return Check("d1 efficiencies (A, D, E, T)", ", ".join(f"{v:.4f}" for v in want),
                 ", ".join(f"{v:.4f}" for v in vals),
                 bool(np.all(np.abs(vals - want) <= 5e-4)))


def measure_efficiency(measure, spec, model_kind=ModelKind.DIRECTIONAL, allow_indefinite=False):
    """``q*`` of a measure over the optimal ``y*`` for the same kernel."""
    ker = build_kernel(spec, measure.k, allow_indefinite)
    sol = solve(measure.k, measure.t, model_kind=model_kind, kernel=ker)
    rep = verify_measure(measure, ker, model_kind, solution=sol)
    return rep.q_star / rep.y_star


def check_oa_i():
    oa = Measure.point_mass(tuple(oa_i(5).rows[0]), 5)
    sym = Measure.point_mass((1, 1, 2, 3, 3), 5)
    out = []
    e = measure_efficiency(oa, CovarianceSpec.identity())
    out.append(Check("OA_I, k=t=5, identity", ">= 0.94", _fmt(e), e >= 0.94))
    e = measure_efficiency(oa, CovarianceSpec.banded1(0.5))
    out.append(Check("OA_I, k=t=5, eta=0.5", "0.8232 +- 5e-4", _fmt(e), abs(e - 0.8232) <= 5e-4))
    e = measure_efficiency(oa, CovarianceSpec.banded1(0.9), allow_indefinite=True)
    out.append(Check("OA_I, k=t=5, eta=0.9 (indefinite)", "0.3395 +- 5e-4", _fmt(e), abs(e - 0.3395) <= 5e-4))
    e = measure_efficiency(sym, CovarianceSpec.banded1(0.5))
    out.append(Check("<11233>, k=t=5, eta=0.5", ">= 0.999", _fmt(e), e >= 0.999))
    return out


def check_42():
    ker = build_kernel(CovarianceSpec.identity(), 4)
    sol = solve(4, 2, kernel=ker)
    m = solve_proportions(sol, ker).measure
    p = m.weight_of
    rel = p((1, 1, 2, 2)) - 3 * p((1, 2, 1, 2)) - p((1, 2, 2, 1))
    km = Measure([(1, 1, 2, 2), (1, 2, 2, 1)], [0.5, 0.5], 2)
    ok_km = verify_measure(km, ker, ModelKind.DIRECTIONAL, solution=sol).is_optimal
    return [Check("(4,2) p<1122> = 3p<1212> + p<1221>", "0 +- 1e-8", _fmt(rel), abs(rel) <= 1e-8),
            Check("(4,2) measure 1122/1221 at 1/2", "optimal", str(ok_km), ok_km)]


BLOCKS_52 = [(1, 1, 1, 2, 2), (1, 1, 2, 2, 2), (1, 1, 2, 1, 2), (1, 2, 1, 2, 2), (1, 1, 2, 2, 1),
             (1, 2, 2, 1, 1), (1, 2, 1, 1, 2), (1, 2, 2, 1, 2), (1, 2, 1, 2, 1), (1, 2, 2, 2, 1)]


def relation_52(p):
    return 1.8 * (p[0] + p[1]) - 2.2 * (p[2] + p[3] + p[6] + p[7]) - 4 * p[8] - 0.4 * p[9]


def check_52():
    ker = build_kernel(CovarianceSpec.identity(), 5)
    sol = solve(5, 2, kernel=ker)
    m = solve_proportions(sol, ker).measure
    rel = relation_52([m.weight_of(b) for b in BLOCKS_52])
    quarter = Measure([(1, 1, 2, 2, 1), (2, 2, 1, 1, 2), (1, 2, 2, 1, 1), (2, 1, 1, 2, 2)], [0.25] * 4, 2,
                      "sequence")
    ok_q = verify_measure(quarter, ker, ModelKind.DIRECTIONAL, solution=sol).is_optimal
    return [Check("(5,2) linear relation 1.8/2.2/4/0.4", "0 +- 1e-8", _fmt(rel), abs(rel) <= 1e-8),
            Check("(5,2) quarter design", "optimal", str(ok_q), ok_q),
            Check("(5,2) support size", "10", str(len(sol.support)), len(sol.support) == 10)]


def check_case_i_52():
    cf = closed_form(5, 2)
    sol = solve(5, 2, model_kind=ModelKind.UNDIRECTIONAL)
    ok = abs(sol.z_star) <= 1e-6 and abs(sol.y_star - float(cf.y_star)) <= 1e-6
    return Check("closed form (5,2)", f"z*=0, y*={float(cf.y_star):.8g}",
                 f"z*={sol.z_star:.3g}, y*={sol.y_star:.8g}", bool(ok))


def run_all():
    checks = []
    for fn in (check_case_ii, check_case_i_52, check_d2, check_d1, check_oa_i, check_42, check_52):
        try:
            r = fn()
        except DegenerateMeasureError as exc:
            r = Check(fn.__name__, "computable", f"degenerate: {exc}", False)
        checks.extend(r if isinstance(r, list) else [r])
    return checks
