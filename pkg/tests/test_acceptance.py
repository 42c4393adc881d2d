"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line (also collected into the terminal
summary).  Run with ``pytest tests/test_acceptance.py -s`` to see the lines
inline.
"""

import statistics
import time

import pytest

from abacminres.abac import build_preconditioner
from abacminres.cli import run_solver
from abacminres.minres import MinresConfig, solve
from abacminres.operator import symmetrized_matvec, time_reverse
from abacminres.oracle import DEFAULT_SIZES, run_property_suite
from abacminres.problems import ProblemSpec, build_problem

from .conftest import ACCEPTANCE_LINES

ALPHA = 1e-8
TOL = 1e-6


def _report(n, checks):
    """``checks``: list of (label, ok, observed, expected)."""
    ok = all(c[1] for c in checks)
    parts = "; ".join(f"{lab} {obs} (want {exp}){'' if good else ' <-- FAIL'}" for lab, good, obs, exp in checks)
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} | {parts}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _iters(spec, kind, alpha=ALPHA, max_iter=1000):
    pb = build_problem(spec)
    _, rep = run_solver(pb, kind, alpha, MinresConfig(tol=TOL, max_iter=max_iter))
    assert rep.converged, f"{spec} {kind} did not converge"
    return rep.iterations


def _within(x, target, tol):
    return abs(x - target) <= tol


def test_criterion_1_bdf_heat():
    spec = ProblemSpec("heat-bdf", 31, 32)
    t0 = time.perf_counter()
    pa = _iters(spec, "abac")
    runtime = time.perf_counter() - t0
    p1 = _iters(spec, "block-circulant")
    plain = _iters(spec, "none")
    _report(1, [
        ("P_alpha iters", _within(pa, 2, 2), pa, "2+-2"),
        ("P_1 iters", _within(p1, 65, 10), p1, "65+-10"),
        ("MINRES-I iters", _within(plain, 48, 5), plain, "48+-5"),
        ("P_alpha runtime", runtime < 5.0, f"{runtime:.2f}s", "<5s"),
    ])


def test_criterion_2_cn_heat():
    spec = ProblemSpec("heat-cn", 31, 32)
    pa = _iters(spec, "abac")
    p1 = _iters(spec, "block-circulant")
    _report(2, [
        ("P_alpha iters", _within(pa, 2, 2), pa, "2+-2"),
        ("P_1 iters", _within(p1, 66, 10), p1, "66+-10"),
    ])


def test_criterion_3_variable_coefficient_heat():
    its = {N: _iters(ProblemSpec("heat-var-cn", 31, N), "abac") for N in (32, 64)}
    spread = max(its.values()) - min(its.values())
    _report(3, [
        ("P_alpha iters (32,32)", _within(its[32], 10, 3), its[32], "10+-3"),
        ("spread over N=32,64", spread <= 2, f"{its}", "<=2"),
    ])


def test_criterion_4_fractional_constant():
    checks = []
    for g in (0.1, 0.5, 0.9):
        spec = ProblemSpec("frac-l1", 31, 32, gamma=g)
        pa = _iters(spec, "abac")
        p1 = _iters(spec, "block-circulant")
        checks.append((f"gamma={g} P_alpha", _within(pa, 2, 1), pa, "2+-1"))
        checks.append((f"gamma={g} P_1", 4 <= p1 <= 10, p1, "6..8 +-2"))
    _report(4, checks)


def test_criterion_5_fractional_variable():
    checks = []
    for g in (0.3, 0.6, 0.9):
        its = {(N, m1): _iters(ProblemSpec("frac-l1", m1 - 1, N, gamma=g, coefficient="example4"), "abac")
               for N in (32, 64) for m1 in (32, 64)}
        spread = max(its.values()) - min(its.values())
        checks.append((f"gamma={g} P_alpha (32,32)", _within(its[(32, 32)], 8, 3), its[(32, 32)], "8+-3"))
        checks.append((f"gamma={g} spread", spread <= 2, spread, "<=2"))
    _report(5, checks)


MESH_FAMILIES = [
    dict(family="heat-bdf"),
    dict(family="heat-cn"),
    dict(family="heat-var-cn"),
    dict(family="frac-l1", gamma=0.5),
    dict(family="frac-l1", gamma=0.6, coefficient="example4"),
]


@pytest.mark.slow
def test_criterion_6_mesh_independence():
    checks = []
    for fam in MESH_FAMILIES:
        its = [_iters(ProblemSpec(m=m1 - 1, N=32, **fam), "abac") for m1 in (32, 64, 128, 256)]
        label = " ".join([fam["family"], fam.get("coefficient", "")] + ([f"g={fam['gamma']}"] if "gamma" in fam else []))
        label = " ".join(label.split())
        checks.append((label, max(its) - min(its) <= 2, its, "spread<=2"))
    _report(6, checks)


def test_criterion_7_oracle_suite():
    sizes = DEFAULT_SIZES + ((4, 2, 64),)
    t0 = time.perf_counter()
    results = run_property_suite(seed=0, sizes=sizes)
    elapsed = time.perf_counter() - t0
    by_name = {r.name: r for r in results}
    groups = {
        "(a) Q_alpha": ["q-alpha-orthogonal"],
        "(b) sqrt real": ["sqrt-real"],
        "(c) Y sqrt symmetric": ["y-sqrt-symmetric"],
        "(d) spectrum dist - alpha mu": ["spectrum-inclusion"],
        "(e) E_alpha - alpha mu": ["e-alpha-bound"],
        "(f) dense agreement": ["matvec-dense", "precond-dense"],
    }
    checks = []
    for label, names in groups.items():
        ok = all(by_name[n].passed for n in names)
        worst = max(by_name[n].value for n in names)
        checks.append((label, ok, f"{worst:.1e}", f"<={max(by_name[n].threshold for n in names):.0e}"))
    others = [r.name for r in results if not r.passed]
    checks.append(("remaining properties", not others, others or "all pass", "all pass"))
    checks.append(("runtime", elapsed < 60, f"{elapsed:.1f}s", "<60s"))
    _report(7, checks)


def _per_iteration_ratio(m1, iters=20, repeats=7):
    setups = {}
    for N in (256, 512):
        pb = build_problem(ProblemSpec("heat-bdf", m1 - 1, N))
        prec = build_preconditioner(pb.surrogate, 1.0)  # P_1 keeps MINRES iterating
        setups[N] = (pb, prec, time_reverse(pb.rhs, pb.M, pb.N))
    cfg = MinresConfig(tol=1e-300, max_iter=iters, check_symmetry=False, record_history=False)
    times = {256: [], 512: []}
    for _ in range(repeats):
        for N, (pb, prec, b) in setups.items():  # interleaved to share machine noise
            _, rep = solve(lambda v: symmetrized_matvec(pb.operator, v), prec, b, cfg)
            times[N].append(rep.wall_time / rep.iterations)
    return min(times[512]) / min(times[256]), statistics.median(times[512]) / statistics.median(times[256])


def test_criterion_8_per_iteration_cost():
    # gated on a cache-resident spatial size; the larger size is reported only,
    # since it measures the memory hierarchy rather than operation counts
    ratio, med = _per_iteration_ratio(8, iters=50)
    big, _ = _per_iteration_ratio(32, iters=10, repeats=3)
    _report(8, [
        ("t(N=512)/t(N=256), m+1=8", ratio <= 2.6, f"{ratio:.2f} (median {med:.2f})", "<=2.6"),
        ("info: m+1=32", True, f"{big:.2f}", "reported"),
    ])
