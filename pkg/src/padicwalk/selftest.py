"""Desk-scale oracle-equivalence and invariant suite.

Each check returns a ``CheckResult``.  The check of the moment theorem with the
proof's printed constants is reported as a known defect: it is computed and
shown, but only counts toward the exit status under ``strict=True``.
"""

from __future__ import annotations

import contextlib
import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import walk
from .convergence import (
    chentsov_check,
    epsilon_m,
    equilibrium_tv,
    fdd_gap,
    holder_bound_check,
    mc_goodness_of_fit,
    moment_scaling_check,
    standard_histories,
)
from .core import Ball, Params, class_indices
from .kernel import ball_mass, char_function, cylinder_prob_limit, kernel_table
from .oracles import phi_dft_all, step_pmf_dense
from .walk import History, exact_moment, moment_bound, moment_bound_repaired, thresholds

PRIMES = (2, 3, 5)
EXPONENTS = (Fraction(1, 2), 1, 2)
LEVELS = (2, 3, 4)
TIMES = (Fraction(1, 2), 1, 2)
SEED = 20240601


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    known_defect: bool = False
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else ("KNOWN-DEFECT" if self.known_defect else "FAIL")
        return f"[{tag}] {self.name} ({self.seconds:.2f}s) {self.detail}"


def _grid():
    return itertools.product(PRIMES, EXPONENTS, LEVELS)


def check_spectral_identity() -> CheckResult:
    worst = 0.0
    for p, b, m in _grid():
        params = Params(p, m, b)
        oracle = phi_dft_all(params)
        k = m - class_indices(p, m)
        closed = np.array([walk.phi_closed(int(kk), params) for kk in range(m + 1)])[k]
        worst = max(worst, float(np.max(np.abs(closed - oracle))))
    hand = [walk.phi_closed(k, Params(2, 2, 1)) for k in range(3)]
    hand_ok = np.allclose(hand, [1, 1 / 3, -2 / 3], atol=1e-12, rtol=0)
    return CheckResult("spectral identity", worst <= 1e-12 and hand_ok, {"maxAbsDiff": worst, "hand": hand})


def check_convolution_identity(max_n: int = 8) -> CheckResult:
    worst = 0.0
    for p, b, m in _grid():
        params = Params(p, m, b)
        one = step_pmf_dense(params)
        size = params.order
        idx = (np.arange(size)[:, None] - np.arange(size)[None, :]) % size
        circ = one[idx]
        dense = np.zeros(size)
        dense[0] = 1.0
        for n in range(1, max_n + 1):
            dense = circ @ dense
            worst = max(worst, float(np.max(np.abs(walk.nstep_pmf_dense(n, params) - dense))))
    pinned = walk.nstep_pmf_dense(2, Params(2, 2, 1))
    pin_ok = np.allclose(pinned, [1 / 2, 2 / 9, 1 / 18, 2 / 9], atol=1e-12, rtol=0)
    return CheckResult("convolution identity", worst <= 1e-12 and pin_ok, {"maxAbsDiff": worst, "pinned": pinned.tolist()})


def check_normalization() -> CheckResult:
    worst_sum, worst_neg = 0.0, 0.0
    for p, b, m in _grid():
        params = Params(p, m, b)
        for n in range(0, 9):
            pmf = walk.nstep_pmf_dense(n, params)
            worst_sum = max(worst_sum, float(abs(pmf.sum() - 1)))
            worst_neg = min(worst_neg, float(pmf.min()))
        for t in TIMES:
            kern = kernel_table(t, params, 8)
            worst_neg = min(worst_neg, float(kern.density.min()))
            if ball_mass(0, t, params) != 1.0:
                worst_sum = max(worst_sum, abs(ball_mass(0, t, params) - 1))
    ok = worst_sum <= 1e-12 and worst_neg >= -1e-12
    return CheckResult("normalization and positivity", ok, {"maxSumErr": worst_sum, "minValue": worst_neg})


def _moment_grid():
    for p, b in itertools.product(PRIMES, EXPONENTS):
        M = thresholds(p, b).M
        for m in range(M + 1, M + 4):
            params = Params(p, m, b)
            for r in (float(b) / 4, float(b) / 2, 3 * float(b) / 4):
                for n in range(1, 65):
                    yield params, n, r


def moment_violations(bound: Callable) -> tuple[int, int, float]:
    """(violations, cases, min bound/moment ratio) over the moment grid."""
    bad = total = 0
    ratio = math.inf
    for params, n, r in _moment_grid():
        lhs = exact_moment(n, r, params)
        rhs = bound(n, r, params)
        total += 1
        bad += int(lhs > rhs)
        ratio = min(ratio, float(rhs / lhs))
    return bad, total, ratio


def check_moment_theorem() -> CheckResult:
    bad, total, ratio = moment_violations(moment_bound)
    return CheckResult("moment theorem (printed constants)", bad == 0,
                       {"violations": bad, "cases": total, "minRatio": ratio}, known_defect=True)


def check_moment_repaired() -> CheckResult:
    bad, total, ratio = moment_violations(moment_bound_repaired)
    return CheckResult("moment theorem (repaired constants)", bad == 0,
                       {"violations": bad, "cases": total, "minRatio": ratio})


def check_l1_decay(extra: int = 5) -> CheckResult:
    N = math.ceil(thresholds(2, 1).N)
    ok, detail = True, {}
    for t in TIMES:
        gaps = [epsilon_m(t, Params(2, m, 1, 1)) for m in range(N, N + extra + 1)]
        eps = [g.eps_l1 for g in gaps]
        dec = all(b < a for a, b in zip(eps, eps[1:]))
        sup_ok = all(g.sup_density_gap <= g.eps_l1 + 1e-12 for g in gaps)
        ok &= dec and sup_ok
        detail[str(t)] = eps
    return CheckResult("L1 decay and sup gap", ok, detail)


def check_fdd() -> CheckResult:
    base = Params(2, 2, 1, 1)
    hs = standard_histories(2)
    ok = True
    detail = {}
    for name, h in hs.items():
        gaps = [fdd_gap(h, base, m) for m in range(3, 11)]
        ok &= all(b < a for a, b in zip(gaps, gaps[1:]))
        detail[name] = gaps
    m2 = fdd_gap(hs["single"], base, 2)
    target = abs(Fraction(5, 9) - 0.5 * (1 + math.exp(-4 / 3)))
    ok &= abs(m2 - target) <= 1e-4 and abs(m2 - 0.0762) <= 1e-4
    detail["m2"] = m2
    return CheckResult("finite-dimensional distributions", ok, detail)


def check_monte_carlo(samples: int = 1_000_000) -> CheckResult:
    law = walk.step_law(Params(2, 3, 1))
    counts = walk.sample_circle_counts(law, SEED, samples)
    again = walk.sample_circle_counts(law, SEED, samples)
    m = law.params.m
    # class v holds the circle l = m - v
    freq = np.array([counts[m - ell] for ell in range(1, m + 1)], dtype=float)
    probs = law.circle_prob
    sd = np.sqrt(samples * probs * (1 - probs))
    z = np.abs(freq - samples * probs) / sd
    rec = mc_goodness_of_fit(counts, law.density.class_masses())
    ok = bool(np.all(z <= 4)) and not rec.rejected and np.array_equal(counts, again)
    return CheckResult("Monte Carlo step law", ok, {"maxZ": float(z.max()), "pValue": rec.p_value})


def check_chapman_kolmogorov() -> CheckResult:
    params = Params(2, 4, 1, 1)
    s, t = Fraction(1, 3), Fraction(5, 4)
    mult = max(abs(char_function(s + t, k, params) - char_function(s, k, params) * char_function(t, k, params))
               for k in range(8))
    Z = Ball.whole(2)
    target = Ball(2, 1, 2)
    one = History((0, s + t), (Z, target))
    two = History((0, s, s + t), (Z, Z, target))
    lim = abs(cylinder_prob_limit(one, params) - cylinder_prob_limit(two, params))
    disc = abs(walk.cylinder_prob_discrete(one, params) - walk.cylinder_prob_discrete(two, params))
    ok = mult <= 1e-15 and lim <= 1e-12 and disc <= 1e-12
    return CheckResult("Chapman-Kolmogorov", ok, {"charFn": mult, "limit": lim, "discrete": disc})


def check_scaling() -> CheckResult:
    failures = []
    count = 0
    for m in (4, 5, 6):
        params = Params(2, m, 1, 1)
        for e, s in itertools.product(range(-6, 5), (0.25, 0.5, 0.75)):
            chk = holder_bound_check(Fraction(2) ** e, s, params)
            count += 1
            if not chk.passed:
                failures.append(chk)
        for r in (0.25, 0.5, 0.75):
            for t in (Fraction(1, 4), 1, 4):
                chk = moment_scaling_check(t, r, params)
                count += 1
                if not chk.passed:
                    failures.append(chk)
            for t1, t2, t3 in itertools.combinations((Fraction(1, 16), Fraction(1, 4), 1, 2, 4), 3):
                chk = chentsov_check(t1, t2, t3, r, params)
                count += 1
                if not chk.passed:
                    failures.append(chk)
    eq = equilibrium_tv(10, Params(2, 8, 1, 1), 8)
    ok = not failures and eq < 1e-4
    return CheckResult("scaling certificates", ok, {"checks": count, "failures": len(failures), "equilibriumTV": eq})


CHECKS = (
    check_spectral_identity,
    check_convolution_identity,
    check_normalization,
    check_moment_theorem,
    check_moment_repaired,
    check_l1_decay,
    check_fdd,
    check_monte_carlo,
    check_chapman_kolmogorov,
    check_scaling,
)


def _phi_sign_flip(y, params):
    """phi_closed with the sign of the beta term flipped."""
    k = walk._norm_exp(y)
    if k == 0:
        return 1.0
    P = float(params.pmb)
    return P / (P - 1) * (1 + float(walk.beta(params.p, params.b)) * float(walk.ppow(params.p, k * params.b)) / P)


FAULTS = {"phi-sign": ("phi_closed", _phi_sign_flip)}


@contextlib.contextmanager
def injected(fault: str | None):
    """Temporarily replace a walk function with a deliberately broken one."""
    if fault is None:
        yield
        return
    if fault not in FAULTS:
        raise KeyError(f"unknown fault {fault!r}; known: {sorted(FAULTS)}")
    name, broken = FAULTS[fault]
    original = getattr(walk, name)
    walk._nstep_density_cached.cache_clear()
    setattr(walk, name, broken)
    try:
        yield
    finally:
        setattr(walk, name, original)
        walk._nstep_density_cached.cache_clear()


@dataclass
class SelftestResult:
    checks: list
    strict: bool
    fault: str | None
    seconds: float

    @property
    def passed(self) -> bool:
        return all(c.passed or (c.known_defect and not self.strict) for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def run_selftest(fault: str | None = None, strict: bool = False, log=None) -> SelftestResult:
    start = time.perf_counter()
    results = []
    with injected(fault):
        for fn in CHECKS:
            t0 = time.perf_counter()
            try:
                res = fn()
            except Exception as exc:  # a crashing check is a failing check
                res = CheckResult(fn.__name__.removeprefix("check_"), False, {"error": repr(exc)})
            res.seconds = time.perf_counter() - t0
            results.append(res)
            if log:
                log(res.line())
    return SelftestResult(results, strict, fault, time.perf_counter() - start)
