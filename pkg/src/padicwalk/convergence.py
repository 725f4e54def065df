"""Quantitative diagnostics for the convergence of the embedded walks."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from .core import DomainError, Params, PreconditionError, as_exact
from .kernel import (
    _shell_series,
    ball_mass,
    char_function,
    cylinder_prob_limit,
    radial_density,
    radial_density_at_zero,
)
from .walk import (
    Ball,
    History,
    beta,
    cylinder_prob_discrete,
    exact_moment,
    nstep_density,
    phi_ladder,
    sample_circle_counts,
    step_law,
    thresholds,
    time_scale,
)

TAIL_TERM = 1e-16


def e_m(t, k: int, params: Params) -> float:
    """phi_m(y)^{floor(t lambda_m)} at a dual element with |y| = p^k, 0 beyond p^m."""
    if k < 0:
        raise DomainError("k must be >= 0")
    if k > params.m:
        return 0.0
    n = time_scale(params).steps(t)
    return float(phi_ladder(params)[k] ** n)


@dataclass
class EmGap:
    m: int
    t: Fraction | float
    eps_l1: float
    tail_bound: float
    sup_density_gap: float
    zero_class_gap: float = 0.0


def epsilon_m(t, params: Params, literal: bool = False) -> EmGap:
    """L1 distance (counting measure on Q_p/Z_p) between E_m(t, .) and the limit
    characteristic function, summed shell by shell."""
    t = as_exact(t)
    if not t > 0:
        raise DomainError("t must be positive")
    N = thresholds(params.p, params.b).N
    if params.m < N:
        raise PreconditionError(f"epsilon_m needs m >= N(p,b) = {N:.4g}; got m = {params.m}",
                                threshold="N(p,b)", value=N, m=params.m)
    p, m = params.p, params.m
    n = time_scale(params).steps(t)
    phi = phi_ladder(params)
    zero_gap = abs(1.0 - char_function(t, 0, params, literal))
    inner = [(p**k - p ** (k - 1)) * abs(phi[k] ** n - char_function(t, k, params)) for k in range(1, m + 1)]
    outer, tail = _shell_series(m + 1, float(t), params, TAIL_TERM)
    eps = math.fsum(inner) + outer + zero_gap
    return EmGap(m, t, eps, tail, sup_density_gap(t, params), zero_gap)


def sup_density_gap(t, params: Params) -> float:
    """sup over Z_p of |rho^m(t, .) - rho(t, .)|, where rho^m spreads the law of
    S_{floor(t lambda)} uniformly over cosets of p^m Z_p."""
    m = params.m
    n = time_scale(params).steps(t)
    walk = nstep_density(n, params).values
    gaps = [abs(walk[j] - radial_density(j, t, params)) for j in range(m)]
    # on p^m Z_p the limit density increases from rho(m) to rho(0)
    gaps.append(abs(walk[m] - radial_density(m, t, params)))
    gaps.append(abs(walk[m] - radial_density_at_zero(t, params).value))
    return max(gaps)


def fdd_probs(h: History, params: Params, m: int | None = None) -> tuple[float, float]:
    pm = params if m is None else params.at_level(m)
    return cylinder_prob_discrete(h, pm), cylinder_prob_limit(h, pm)


def fdd_gap(h: History, params: Params, m: int | None = None) -> float:
    """|P^m(C(h)) - P(C(h))|."""
    disc, lim = fdd_probs(h, params, m)
    return abs(disc - lim)


def _walk_coset_masses(t, params: Params, j: int) -> np.ndarray:
    """Mass of one coset of p^j Z_p per valuation class 0..j-1, then the zero coset."""
    n = time_scale(params).steps(t)
    prof = nstep_density(n, params)
    vals = prof.values
    per = [vals[i] * float(params.p) ** -j for i in range(j)]
    zero = float(np.sum(prof.class_masses()[j:]))
    return np.array(per + [zero])


def _limit_coset_masses(t, params: Params, j: int) -> np.ndarray:
    per = [radial_density(i, t, params) * float(params.p) ** -j for i in range(j)]
    return np.array(per + [ball_mass(j, t, params)])


def _cosets_per_class(p: int, j: int) -> np.ndarray:
    return np.array([(p - 1) * p ** (j - i - 1) for i in range(j)] + [1], dtype=float)


def marginal_tv(t, params: Params, j: int) -> float:
    """Total variation between the laws of Y_t under P^m and P, on balls of radius p^-j."""
    if not 0 <= j <= params.m:
        raise DomainError(f"resolution j={j} must lie in 0..m")
    diff = np.abs(_walk_coset_masses(t, params, j) - _limit_coset_masses(t, params, j))
    return 0.5 * float(np.sum(_cosets_per_class(params.p, j) * diff))


def equilibrium_tv(t, params: Params, j: int) -> float:
    """Total variation between the law of Y_t and Haar measure, on balls of radius p^-j."""
    diff = np.abs(_limit_coset_masses(t, params, j) - float(params.p) ** -j)
    return 0.5 * float(np.sum(_cosets_per_class(params.p, j) * diff))


@dataclass
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    passed: bool
    detail: dict = field(default_factory=dict)


def holder_bound_check(t, s: float, params: Params) -> BoundCheck:
    """1 - (1 - beta p^b (1 + p^{-mb}) / p^{mb})^{t sigma p^{mb}} <= max(2 p^b beta sigma, 1) t^s."""
    Mp = thresholds(params.p, params.b).M_prime
    if not params.m > Mp:
        raise PreconditionError(f"Hoelder bound needs m > M'(p,b) = {Mp:.4g}", threshold="M'(p,b)", value=Mp, m=params.m)
    if not 0 < s < 1:
        raise DomainError("s must lie in (0, 1)")
    t = float(as_exact(t))
    P, pb = float(params.pmb), float(params.pb)
    B = float(beta(params.p, params.b))
    sigma = float(time_scale(params).sigma)
    q = B * pb * (1 + 1 / P) / P
    lhs = 1 - (1 - q) ** (t * sigma * P)
    rhs = max(2 * pb * B * sigma, 1) * t**s
    return BoundCheck("holder", lhs, rhs, lhs <= rhs, {"t": t, "s": s, "m": params.m})


def moment_scaling_constant(r: float, params: Params) -> float:
    """C in E_m[|Y_t|^r] <= C t^{r/b}, assembled from the moment theorem's K
    (with n <= t sigma p^{mb} and ((n + 1 - r/b)/n)^{r/b} <= (2 - r/b)^{r/b})
    plus the Hoelder lemma applied with s = r/b."""
    r, b = float(r), float(params.b)
    s = r / b
    p = params.p
    P, pb = float(params.pmb), float(params.pb)
    B = float(beta(p, b))
    sigma = float(time_scale(params).sigma)
    A = p**r * (p - 1) / (p ** (r + 1) - 1)
    c = B * (pb - 1) * (1 + 1 / P + 1 / (P * (P - 1)))
    K = c * A * B ** (s - 1) / (pb * (pb - 1))
    return K * (2 - s) ** s * sigma**s + max(2 * pb * B * sigma, 1) * A


def _check_scaling_pre(r: float, params: Params) -> None:
    N = thresholds(params.p, params.b).N
    if params.m < N:
        raise PreconditionError(f"moment scaling needs m >= N(p,b) = {N:.4g}", threshold="N(p,b)", value=N, m=params.m)
    if not 0 < float(r) < float(params.b):
        raise DomainError("r must lie in (0, b)")


def moment_scaling_check(t, r: float, params: Params) -> BoundCheck:
    _check_scaling_pre(r, params)
    n = time_scale(params).steps(t)
    lhs = exact_moment(n, r, params) if n else 0.0
    rhs = moment_scaling_constant(r, params) * float(as_exact(t)) ** (float(r) / float(params.b))
    return BoundCheck("moment_scaling", lhs, rhs, lhs <= rhs, {"t": float(as_exact(t)), "r": float(r), "n": n})


def chentsov_check(t1, t2, t3, r: float, params: Params) -> BoundCheck:
    """E[|Y_t3 - Y_t2|^r] E[|Y_t2 - Y_t1|^r] <= C^2 (t3 - t1)^{2r/b} with exact increment moments."""
    _check_scaling_pre(r, params)
    t1, t2, t3 = (as_exact(x) for x in (t1, t2, t3))
    if not t1 < t2 < t3:
        raise DomainError("times must be strictly increasing")
    ts = time_scale(params)
    n1, n2, n3 = ts.steps(t1), ts.steps(t2), ts.steps(t3)
    inc = [exact_moment(d, r, params) if d else 0.0 for d in (n3 - n2, n2 - n1)]
    lhs = inc[0] * inc[1]
    C = moment_scaling_constant(r, params)
    rhs = C**2 * float(t3 - t1) ** (2 * float(r) / float(params.b))
    return BoundCheck("chentsov", lhs, rhs, lhs <= rhs, {"t": [float(t1), float(t2), float(t3)], "r": float(r)})


@dataclass
class ChiSquareRecord:
    statistic: float
    dof: int
    p_value: float
    alpha: float
    rejected: bool
    samples: int
    merged: list = field(default_factory=list)


def mc_goodness_of_fit(counts, probs, alpha: float = 1e-3, min_samples: int = 10_000) -> ChiSquareRecord:
    """Chi-square test of class counts against exact class probabilities.

    Adjacent classes are merged until every expected count is at least 5.
    """
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    total = int(counts.sum())
    if total < min_samples:
        raise DomainError(f"need at least {min_samples} samples, got {total}")
    expected = probs / probs.sum() * total
    obs_m, exp_m, groups, cur = [], [], [], []
    o = e = 0.0
    for i in range(len(counts)):
        o += counts[i]
        e += expected[i]
        cur.append(i)
        if e >= 5:
            obs_m.append(o)
            exp_m.append(e)
            groups.append(cur)
            o = e = 0.0
            cur = []
    if cur:
        if exp_m:
            obs_m[-1] += o
            exp_m[-1] += e
            groups[-1] = groups[-1] + cur
        else:
            obs_m, exp_m, groups = [o], [e], [cur]
    obs_m, exp_m = np.array(obs_m), np.array(exp_m)
    dof = max(len(obs_m) - 1, 1)
    stat = float(np.sum((obs_m - exp_m) ** 2 / exp_m))
    pval = float(stats.chi2.sf(stat, dof))
    merged = [g for g in groups if len(g) > 1]
    return ChiSquareRecord(stat, dof, pval, alpha, pval < alpha, total, merged)


def standard_histories(p: int) -> dict:
    """The single-ball and two-epoch nested-ball histories used by the harness."""
    Z = Ball.whole(p)
    return {
        "single": History((0, 1), (Z, Ball(p, 0, 1))),
        "nested": History((0, Fraction(1, 2), 1), (Z, Ball(p, 0, 1), Ball(p, 0, 2))),
    }


def _strictly_decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


@dataclass
class ConvergenceReport:
    params: dict
    grid: dict
    seed: int
    perM: list = field(default_factory=list)
    fdd: list = field(default_factory=list)
    tv: list = field(default_factory=list)
    moments: list = field(default_factory=list)
    mc: list = field(default_factory=list)
    assertions: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def failures(self) -> list:
        return [a for a in self.assertions if not a["passed"]]

    def to_dict(self) -> dict:
        return asdict(self)


def run_convergence(
    p: int = 2,
    b=1,
    D=1,
    m_range=range(3, 9),
    times=(Fraction(1, 2), 1, 2),
    seed: int = 20240601,
    samples: int = 100_000,
    tol: float = 1e-12,
    literal: bool = False,
    executor=None,
) -> ConvergenceReport:
    """Run every diagnostic over ``m_range`` x ``times`` and collect assertions.

    Per-m work may be mapped over ``executor``; results are merged in grid order.
    """
    m_range = list(m_range)
    times = [as_exact(t) for t in times]
    base = Params(p, m_range[0], b, D)
    th = thresholds(p, base.b)
    tv_res = min(m_range[0], 4)
    report = ConvergenceReport(
        params={"p": p, "b": str(base.b), "D": str(base.D), "literalSymbol": literal},
        grid={"mRange": m_range, "times": [str(t) for t in times], "tol": tol, "samples": samples,
              "tvResolution": tv_res, "thresholds": th._asdict()},
        seed=seed,
    )
    hists = standard_histories(p)
    r_grid = [float(base.b) / 2]

    def per_m(m):
        pm = base.at_level(m)
        out = {"gaps": [], "fdd": [], "tv": [], "moments": [], "mc": None}
        for t in times:
            g = epsilon_m(t, pm, literal)
            out["gaps"].append(g)
            out["tv"].append({"m": m, "t": str(t), "j": tv_res, "tv": marginal_tv(t, pm, tv_res)})
        for name, h in hists.items():
            disc, lim = fdd_probs(h, pm)
            out["fdd"].append({"history": name, "route": str(h), "m": m, "discrete": disc, "limit": lim,
                               "gap": abs(disc - lim)})
        if m > th.M_prime:
            for t in times:
                for chk in [holder_bound_check(t, 0.5, pm)] + [moment_scaling_check(t, r, pm) for r in r_grid]:
                    out["moments"].append({"m": m, **asdict(chk)})
        law = step_law(pm)
        counts = sample_circle_counts(law, seed + m, samples)
        rec = mc_goodness_of_fit(counts, law.density.class_masses())
        out["mc"] = {"m": m, "seed": seed + m, **asdict(rec)}
        return out

    results = list(executor.map(per_m, m_range)) if executor else [per_m(m) for m in m_range]

    for res in results:
        report.perM += [{"m": g.m, "t": str(g.t), "epsL1": g.eps_l1, "tailBound": g.tail_bound,
                         "supGap": g.sup_density_gap, "zeroClassGap": g.zero_class_gap} for g in res["gaps"]]
        report.fdd += res["fdd"]
        report.tv += res["tv"]
        report.moments += res["moments"]
        report.mc.append(res["mc"])

    def check(name, ok, **info):
        report.assertions.append({"name": name, "passed": bool(ok), **info})

    for t in times:
        rows = [r for r in report.perM if r["t"] == str(t)]
        eps = [r["epsL1"] for r in rows]
        if literal:
            check(f"eps_decay[t={t}]", True, skipped="literal symbol convention",
                  zeroClassOffset=rows[0]["zeroClassGap"])
        else:
            check(f"eps_decay[t={t}]", _strictly_decreasing(eps), values=eps)
        for r in rows:
            check(f"sup_le_eps[m={r['m']},t={t}]", r["supGap"] <= r["epsL1"] + tol)
        tvs = [x["tv"] for x in report.tv if x["t"] == str(t)]
        check(f"tv_decay[t={t}]", _strictly_decreasing(tvs), values=tvs)
    for name in hists:
        gaps = [f["gap"] for f in report.fdd if f["history"] == name]
        check(f"fdd_decay[{name}]", _strictly_decreasing(gaps), values=gaps)
    for mo in report.moments:
        check(f"{mo['name']}[m={mo['m']},{mo['detail']}]", mo["passed"])
    for rec in report.mc:
        check(f"mc_step_law[m={rec['m']}]", not rec["rejected"], pValue=rec["p_value"])
    return report
