"""The circle-weighted random walk on G_m and its embedding into Z_p."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .core import (
    Ball,
    Digits,
    DomainError,
    DualElement,
    GroupElement,
    Params,
    PreconditionError,
    RadialProfile,
    as_exact,
    circle_volume,
    ppow,
)
from .oracles import phi_dft_oracle  # noqa: F401  re-exported as part of the walk API


def beta(p: int, b) -> Fraction | float:
    """(p^{b+1} - 1) / (p^b (p - 1)); exact when b is an integer."""
    pb = ppow(p, as_exact(b))
    return (pb * p - 1) / (pb * (p - 1))


# -- step law -----------------------------------------------------------------

def normalizer(params: Params):
    """c_m = p^{mb} (p^b - 1) / (p^{mb} - 1), making sum_l c_m p^{-lb} = 1."""
    P = params.pmb
    return P * (params.pb - 1) / (P - 1)


@dataclass(frozen=True, eq=False)
class StepLaw:
    params: Params
    c_m: Fraction | float
    circle_prob: np.ndarray  # index l-1 holds Prob(X in S_m(l)), l = 1..m
    density: RadialProfile  # w.r.t. normalized Haar measure on G_m

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.circle_prob)

    def pmf(self) -> RadialProfile:
        """Per-element probabilities as a radial profile."""
        return RadialProfile(self.params.p, self.params.m, self.density.values / self.params.order)


def step_law(params: Params) -> StepLaw:
    p, m, b = params.p, params.m, params.b
    c = normalizer(params)
    probs = [c / ppow(p, ell * b) for ell in range(1, m + 1)]
    dens = np.zeros(m + 1)
    for ell, prob in enumerate(probs, start=1):
        # S_m(l) holds the elements of valuation m - l
        dens[m - ell] = float(prob / circle_volume(ell, p, m))
    return StepLaw(params, c, np.array([float(q) for q in probs]), RadialProfile(p, m, dens))


def _norm_exp(y) -> int:
    return y.norm_exp if isinstance(y, DualElement) else int(y)


def phi_closed(y, params: Params) -> float:
    """Characteristic function of one step at a dual element (or its norm exponent k).

    Uses the compact form p^{mb}/(p^{mb}-1) * (1 - beta |y|^b / p^{mb}).
    """
    k = _norm_exp(y)
    if not 0 <= k <= params.m:
        raise DomainError(f"dual norm exponent {k} outside 0..{params.m}")
    if k == 0:
        return 1.0
    P = float(params.pmb)
    return P / (P - 1) * (1 - float(beta(params.p, params.b)) * float(ppow(params.p, k * params.b)) / P)


def phi_expanded(k: int, params: Params) -> float:
    """The same characteristic function written as leading term plus the
    1/(p^{mb}(p^{mb}-1)) correction; k >= 1."""
    P = float(params.pmb)
    B = float(beta(params.p, params.b))
    yb = float(ppow(params.p, k * params.b))
    return 1 - B * (yb * (1 + 1 / P) - 1 / B) / P + (1 - B * yb / P) / (P * (P - 1))


def phi_ladder(params: Params) -> np.ndarray:
    """phi(0..m), phi(i) being the characteristic function at |y| = p^i."""
    return np.array([phi_closed(k, params) for k in range(params.m + 1)])


# -- n-step law -----------------------------------------------------------------

NEGATIVE_TOL = 1e-12


def nstep_density(n: int, params: Params) -> RadialProfile:
    """Density of S_n w.r.t. normalized Haar measure on G_m.

    Telescoped inverse transform of phi^n:
    sum_{i<=v} (phi(i)^n - phi(i+1)^n) p^i on valuation class v, with phi(m+1) = 0.
    Roundoff negatives down to -1e-12 (per-element mass) are clamped to 0.
    """
    if n < 0:
        raise DomainError("n must be >= 0")
    return _nstep_density_cached(n, params)


@lru_cache(maxsize=512)
def _nstep_density_cached(n: int, params: Params) -> RadialProfile:
    p, m = params.p, params.m
    pw = np.append(phi_ladder(params) ** n, 0.0)
    drops = (pw[:-1] - pw[1:]) * np.array([float(p) ** i for i in range(m + 1)])
    dens = np.cumsum(drops)
    scale = float(p) ** -m
    if np.min(dens) * scale < -NEGATIVE_TOL:
        raise ArithmeticError(f"n-step density negative beyond tolerance: {dens.min() * scale:.3e}")
    dens = np.maximum(dens, 0.0)
    dens.setflags(write=False)
    return RadialProfile(p, m, dens, meta={"n": n})


def nstep_pmf_dense(n: int, params: Params) -> np.ndarray:
    return nstep_density(n, params).dense() / params.order


def _check_r(r: float, params: Params) -> None:
    if not 0 < r < params.b:
        raise DomainError(f"r={r} must lie in (0, b={params.b})")


def exact_moment(n: int, r: float, params: Params) -> float:
    """E*[|S_n|^r] summed over valuation classes."""
    _check_r(r, params)
    p, m = params.p, params.m
    masses = nstep_density(n, params).class_masses()
    return math.fsum(masses[v] * p ** (-v * float(r)) for v in range(m))


class Thresholds(NamedTuple):
    M: int
    M_prime: float
    N: float


def thresholds(p: int, b) -> Thresholds:
    """M(p,b), M'(p,b) and N(p,b) = max(M, M')."""
    b = float(b)
    x = math.log((p ** (b + 1) - 1) / (p**b - 1), p) / b
    M = 1 + math.ceil(x - 1e-12)
    M_prime = math.log(2 * math.sqrt(2) * p**b, p) / b
    return Thresholds(M, M_prime, max(M, M_prime))


def _moment_pieces(r: float, params: Params):
    p, b = params.p, float(params.b)
    P = float(params.pmb)
    B = float(beta(p, b))
    pb = float(params.pb)
    A = p**r * (p - 1) / (p ** (r + 1) - 1)
    c = B * (pb - 1) * (1 + 1 / P + 1 / (P * (P - 1)))
    q = B * pb * (1 + 1 / P) / P
    return P, B, pb, A, c, q


def _check_moment_pre(n: int, r: float, params: Params) -> None:
    _check_r(r, params)
    M = thresholds(params.p, params.b).M
    if params.m <= M:
        raise PreconditionError(f"moment bound needs m > M(p,b) = {M}; got m = {params.m}",
                                threshold="M(p,b)", value=M, m=params.m)
    if n < 1:
        raise DomainError("moment bound is stated for n >= 1")


def moment_bound(n: int, r: float, params: Params) -> float:
    """Right-hand side of the moment theorem with the proof's explicit constants:

    K n^{r/b} p^{-mr} ((n + (b-r)/b)/n)^{r/b} + (1 - (1 - q)^n) p^r(p-1)/(p^{r+1}-1),
    K = c(m) p^r (p-1) beta^{(r-b)/b} / (p^b (p^b-1) (p^{r+1}-1)).

    These constants do not dominate the exact moment; see moment_bound_repaired.
    """
    _check_moment_pre(n, r, params)
    r = float(r)
    b = float(params.b)
    P, B, pb, A, c, q = _moment_pieces(r, params)
    s = r / b
    K = c * A * B ** ((r - b) / b) / (pb * (pb - 1))
    first = K * n**s * params.p ** (-params.m * r) * ((n + (b - r) / b) / n) ** s
    return first + (1 - (1 - q) ** n) * A


def moment_bound_repaired(n: int, r: float, params: Params) -> float:
    """A bound of the same shape that does dominate E*[|S_n|^r].

    Differs from ``moment_bound`` in three places: the factor p^b from
    p^{ib}/p^{mb} = Delta(i) p^b / (beta (p^b - 1)) sits in the numerator of K;
    the Riemann sum is bounded by the integral n B(1 - r/b, n) itself; and the
    i = m-1 term, where phi(m) < 0, is bounded separately.
    """
    _check_moment_pre(n, r, params)
    r = float(r)
    b = float(params.b)
    p, m = params.p, params.m
    P, B, pb, A, c, q = _moment_pieces(r, params)
    s = r / b
    K = c * A * pb * B ** (s - 1) / (pb - 1)
    beta_integral = math.exp(math.lgamma(1 - s) + math.lgamma(n + 1) - math.lgamma(n + 1 - s))
    phi = phi_ladder(params)
    last = A * p ** (-(m - 1) * r) * (abs(phi[m - 1]) ** n + abs(phi[m]) ** n)
    return K * p ** (-m * r) * beta_integral + last + (1 - (1 - q) ** n) * A


# -- time scale and sampling ------------------------------------------------------

@dataclass(frozen=True)
class TimeScale:
    """sigma = D/beta, lambda = sigma p^{mb}, tau = 1/lambda."""

    sigma: Fraction | float
    lam: Fraction | float
    tau: Fraction | float

    def steps(self, t) -> int:
        """floor(t * lambda), exact for rational t and lambda.

        With a floating lambda, products within a few ulps of an integer are
        snapped to it so that boundary times are not lost to roundoff.
        """
        t = as_exact(t)
        if t < 0:
            raise DomainError("time must be >= 0")
        x = t * self.lam
        if isinstance(x, Fraction):
            return math.floor(x)
        k = round(x)
        if abs(x - k) <= 4 * math.ulp(max(abs(x), 1.0)):
            return int(k)
        return math.floor(x)

    def step_time(self, n: int):
        return n * self.tau


def time_scale(params: Params) -> TimeScale:
    sigma = params.D / beta(params.p, params.b)
    lam = sigma * params.pmb
    return TimeScale(sigma, lam, 1 / lam)


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream keyed by (seed, index)."""

    seed: int
    index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.index,))
        return np.random.Generator(np.random.Philox(ss))


def _as_generator(rng) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


def sample_steps(law: StepLaw, rng, size: int) -> np.ndarray:
    """``size`` i.i.d. steps as residues.

    The circle S_m(l) is chosen by inverse CDF, then digit m-l is drawn from
    1..p-1 and digits m-l+1..m-1 uniformly.
    """
    gen = _as_generator(rng)
    p, m = law.params.p, law.params.m
    u = gen.random(size)
    cdf = law.cdf
    ell = np.minimum(np.searchsorted(cdf / cdf[-1], u, side="right") + 1, m)
    v = m - ell
    lead = gen.integers(1, p, size=size, dtype=np.int64)
    upper = gen.integers(0, np.power(p, ell - 1, dtype=np.int64), dtype=np.int64)
    return np.power(p, v, dtype=np.int64) * (lead + p * upper)


def sample_step(law: StepLaw, rng) -> GroupElement:
    return GroupElement(int(sample_steps(law, rng, 1)[0]), law.params.p, law.params.m)


def sample_circle_counts(law: StepLaw, seed: int, total: int, streams: int = 8, executor=None) -> np.ndarray:
    """Counts of sampled steps per valuation class (index m = zero class).

    Work is split across ``streams`` independent streams with fixed chunk sizes;
    counts are summed, so the result does not depend on the executor.
    """
    p, m = law.params.p, law.params.m
    chunks = [total // streams + (i < total % streams) for i in range(streams)]

    def run(i):
        res = sample_steps(law, RngStream(seed, i), chunks[i])
        return class_counts(res, p, m)

    parts = list(executor.map(run, range(streams))) if executor else [run(i) for i in range(streams)]
    return np.sum(parts, axis=0)


def class_counts(residues: np.ndarray, p: int, m: int) -> np.ndarray:
    """Histogram of residues by valuation (index m holds the zero class)."""
    res = np.asarray(residues, dtype=np.int64)
    v = np.zeros(res.shape, dtype=np.int64)
    for j in range(1, m + 1):
        v += res % p**j == 0
    return np.bincount(v, minlength=m + 1)


@dataclass(frozen=True, eq=False)
class PathSample:
    """Partial sums S_0..S_N of one walk and their embedding in Z_p."""

    params: Params
    scale: TimeScale
    seed: int
    stream: int
    steps: np.ndarray  # residues of S_0..S_N

    def time(self, n: int):
        return self.scale.step_time(n)

    def point_at(self, t) -> Digits:
        """Y_t = Gamma_m(S_{floor(t lambda)})."""
        n = self.scale.steps(t)
        if n >= len(self.steps):
            raise DomainError(f"time {t} is past the sampled horizon")
        return Digits.of(int(self.steps[n]), self.params.p, self.params.m)

    @property
    def embedded(self) -> list:
        return [(self.time(n), Digits.of(int(s), self.params.p, self.params.m)) for n, s in enumerate(self.steps)]

    def rows(self):
        for n, s in enumerate(self.steps):
            yield n, float(self.time(n)), int(s), str(Digits.of(int(s), self.params.p, self.params.m))

    def to_csv(self, fh=None) -> str | None:
        out = fh if fh is not None else io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["stepIndex", "time", "residue", "digitString"])
        for n, t, s, d in self.rows():
            w.writerow([n, format(t, ".17g"), s, d])
        return None if fh is not None else out.getvalue()


def sample_embedded_path(T, law: StepLaw, stream: RngStream, scale: TimeScale | None = None) -> PathSample:
    """Sample S_0..S_{floor(T lambda)} and keep the piecewise constant embedding."""
    T = as_exact(T)
    if not T > 0:
        raise DomainError("horizon must be positive")
    scale = scale or time_scale(law.params)
    n = scale.steps(T)
    incr = sample_steps(law, stream, n)
    sums = np.concatenate([[0], np.cumsum(incr) % law.params.order]).astype(np.int64)
    return PathSample(law.params, scale, stream.seed, stream.index, sums)


# -- histories --------------------------------------------------------------------

@dataclass(frozen=True)
class History:
    epochs: tuple
    route: tuple

    def __post_init__(self):
        epochs = tuple(as_exact(t) for t in self.epochs)
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "route", tuple(self.route))
        if len(epochs) != len(self.route) or not epochs:
            raise DomainError("epoch and route must be nonempty and of equal length")
        if epochs[0] != 0:
            raise DomainError("a history starts at time 0")
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise DomainError("epochs must be strictly increasing")

    @classmethod
    def of(cls, pairs: Sequence) -> "History":
        return cls(tuple(t for t, _ in pairs), tuple(u for _, u in pairs))

    @property
    def max_radius_exp(self) -> int:
        return max(u.radius_exp for u in self.route)

    def __str__(self) -> str:
        return "; ".join(f"({t}, {u})" for t, u in zip(self.epochs, self.route))


def circular_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(a) * np.fft.fft(b)).real


def cylinder_prob_discrete(h: History, params: Params, scale: TimeScale | None = None) -> float:
    """P_m(C(h)) by forward recursion over G_m."""
    m = params.m
    if h.max_radius_exp > m:
        raise PreconditionError(f"route ball radius p^-{h.max_radius_exp} not resolvable at level {m}")
    if not h.route[0].contains(0):
        return 0.0
    scale = scale or time_scale(params)
    n_at = [scale.steps(t) for t in h.epochs]
    mass = np.zeros(params.order)
    mass[0] = 1.0
    for i in range(1, len(h.epochs)):
        dn = n_at[i] - n_at[i - 1]
        if dn:
            mass = circular_convolve(mass, nstep_pmf_dense(dn, params))
        mass = mass * h.route[i].mask(m)
    return float(mass.sum())


__all__ = [
    "Ball",
    "History",
    "PathSample",
    "RngStream",
    "StepLaw",
    "Thresholds",
    "TimeScale",
    "beta",
    "class_counts",
    "cylinder_prob_discrete",
    "exact_moment",
    "moment_bound",
    "moment_bound_repaired",
    "normalizer",
    "nstep_density",
    "nstep_pmf_dense",
    "phi_closed",
    "phi_dft_oracle",
    "phi_expanded",
    "phi_ladder",
    "sample_circle_counts",
    "sample_embedded_path",
    "sample_step",
    "sample_steps",
    "step_law",
    "thresholds",
    "time_scale",
]
