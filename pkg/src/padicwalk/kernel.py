"""Heat kernel of the Vladimirov-Kochubei semigroup on Z_p.

The characteristic function at a dual element with |y| = p^k is
exp(-D (p^{kb} - 1/beta) t).  At the trivial character the symbol is taken to be
0 so that every rho(t, .) is a probability density; pass ``literal=True`` to use
|0|^b - 1/beta = -1/beta instead.
"""

from __future__ import annotations

import csv
import io
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .core import DomainError, Params, PreconditionError, as_exact, class_indices
from .walk import History, beta, circular_convolve


class TruncatedSum(NamedTuple):
    value: float
    tail_bound: float


def _t(t) -> float:
    t = float(as_exact(t))
    if not t > 0:
        raise DomainError("t must be positive")
    return t


def symbol(k: int, params: Params, literal: bool = False) -> float:
    """p^{kb} - 1/beta for k >= 1; 0 at the trivial character (or -1/beta if literal)."""
    if k < 0:
        raise DomainError("dual norm exponent must be >= 0")
    inv_beta = 1 / float(beta(params.p, params.b))
    if k == 0:
        return -inv_beta if literal else 0.0
    return float(params.p) ** (k * float(params.b)) - inv_beta


def spectral_gap(params: Params) -> float:
    return symbol(1, params)


@dataclass(frozen=True)
class LimitKernel:
    params: Params

    @property
    def beta(self):
        return beta(self.params.p, self.params.b)

    def symbol(self, k: int, literal: bool = False) -> float:
        return symbol(k, self.params, literal)

    def char_function(self, t, k: int, literal: bool = False) -> float:
        return char_function(t, k, self.params, literal)


def char_function(t, k: int, params: Params, literal: bool = False) -> float:
    if k == 0 and not literal:
        return 1.0
    return math.exp(-float(params.D) * symbol(k, params, literal) * _t(t))


def _shell_terms(j: int, t: float, params: Params) -> np.ndarray:
    """(p^k - p^{k-1}) exp(-D symbol(k) t) for k = 1..j."""
    p, b, D = params.p, float(params.b), float(params.D)
    k = np.arange(1, j + 1, dtype=float)
    inv_beta = 1 / float(beta(p, b))
    return (p**k - p ** (k - 1)) * np.exp(-D * (p ** (k * b) - inv_beta) * t)


def ball_mass(j: int, t, params: Params) -> float:
    """P(|Y_t| <= p^-j) = p^-j (1 + sum_{k=1}^j (p^k - p^{k-1}) e^{-D symbol(k) t})."""
    if j < 0:
        raise DomainError("j must be >= 0")
    if j == 0:
        return 1.0
    t = _t(t)
    return float(params.p) ** -j * (1 + math.fsum(_shell_terms(j, t, params)))


def radial_density(j: int, t, params: Params) -> float:
    """rho(t, x) at |x| = p^-j."""
    if j < 0:
        raise DomainError("j must be >= 0")
    t = _t(t)
    head = math.fsum(_shell_terms(j, t, params))
    return 1 + head - float(params.p) ** j * char_function(t, j + 1, params)


def radial_density_at_zero(t, params: Params, tol: float = 1e-16) -> TruncatedSum:
    """rho(t, 0) = 1 + sum_{k>=1} (p^k - p^{k-1}) e^{-D symbol(k) t}, the supremum of rho(t, .)."""
    t = _t(t)
    value, tail = _shell_series(1, t, params, tol)
    return TruncatedSum(1 + value, tail)


def _shell_series(k0: int, t: float, params: Params, tol: float) -> tuple[float, float]:
    """sum_{k>=k0} (p^k - p^{k-1}) e^{-D symbol(k) t}, stopped once a term is below
    ``tol`` and the term ratio is below 1/2; the remainder is then at most that term."""
    p = params.p
    terms = []
    k = k0
    prev = None
    while True:
        term = (p**k - p ** (k - 1)) * char_function(t, k, params)
        terms.append(term)
        if term == 0.0:
            return math.fsum(terms), 0.0
        ratio = term / prev if prev else 1.0
        if term < tol and ratio < 0.5:
            return math.fsum(terms), term
        prev = term
        k += 1
        if k > k0 + 10_000:
            raise ArithmeticError("shell series failed to converge")


@dataclass(frozen=True, eq=False)
class RadialKernel:
    t: Fraction | float
    density: np.ndarray  # at |x| = p^-j, j = 0..J
    ball_mass: np.ndarray

    def rows(self):
        for j, (d, bm) in enumerate(zip(self.density, self.ball_mass)):
            yield j, float(d), float(bm), 0.0

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["j", "density", "ballMass", "tailBound"])
        for j, d, bm, tb in self.rows():
            w.writerow([j, format(d, ".17g"), format(bm, ".17g"), format(tb, ".17g")])
        return out.getvalue()


_kernel_cache: dict = {}
_kernel_lock = threading.Lock()


def kernel_table(t, params: Params, J: int) -> RadialKernel:
    """Density and ball masses for j = 0..J; cached per (t, params, J).

    Values are exact finite sums, so the tail bound column is 0.
    """
    t = as_exact(t)
    key = (t, params, J)
    with _kernel_lock:
        hit = _kernel_cache.get(key)
    if hit is not None:
        return hit
    dens = np.array([radial_density(j, t, params) for j in range(J + 1)])
    mass = np.array([ball_mass(j, t, params) for j in range(J + 1)])
    dens.setflags(write=False)
    mass.setflags(write=False)
    kern = RadialKernel(t, dens, mass)
    with _kernel_lock:
        return _kernel_cache.setdefault(key, kern)


def limit_moment(t, r: float, params: Params, tail_tol: float = 1e-14) -> TruncatedSum:
    """E[|Y_t|^r] = sum_j p^{-jr} (ballMass(j) - ballMass(j+1)), truncated at the
    first J with p^{-Jr} < tail_tol; the remainder is at most p^{-Jr} ballMass(J)."""
    if not 0 < r < float(params.b):
        raise DomainError(f"r={r} must lie in (0, b)")
    p, r = params.p, float(r)
    J = max(1, math.ceil(-math.log(tail_tol) / (r * math.log(p))) + 1)
    masses = [ball_mass(j, t, params) for j in range(J + 1)]
    total = math.fsum(p ** (-j * r) * (masses[j] - masses[j + 1]) for j in range(J))
    return TruncatedSum(total, p ** (-J * r) * masses[J])


def qp_density(j: int, t, params: Params, rel_tol: float = 1e-15) -> float:
    """The Q_p heat kernel at |x| = p^-j (j of either sign):
    sum_{k<=j} p^k (e^{-Dt p^{kb}} - e^{-Dt p^{(k+1)b}}).

    For k below the truncation point each term is at most Dt p^{k+(k+1)b}, so the
    neglected tail is geometric with ratio p^{-(1+b)}; summation stops once that
    bound is below ``rel_tol`` times the partial sum.
    """
    t = _t(t)
    p, b, D = params.p, float(params.b), float(params.D)
    terms = []
    acc = 0.0
    k = j
    while True:
        lo, hi = D * t * p ** (k * b), D * t * p ** ((k + 1) * b)
        # e^{-lo} - e^{-hi} without cancellation when both are tiny
        term = p**k * -math.exp(-lo) * math.expm1(lo - hi)
        terms.append(term)
        acc += term
        tail = D * t * p**b * p ** ((k - 1) * (1 + b)) / (1 - p ** -(1 + b))
        if tail <= rel_tol * acc:
            return math.fsum(terms)
        k -= 1


def coset_law(t, params: Params, M: int) -> np.ndarray:
    """Law of Y_t mod p^M as a dense array over G_M."""
    p = params.p
    v = class_indices(p, M)
    dens = np.array([radial_density(j, t, params) for j in range(M)] + [0.0])
    law = dens[v] * float(p) ** -M
    law[0] = ball_mass(M, t, params)
    return law


def cylinder_prob_limit(h: History, params: Params, resolution: int | None = None) -> float:
    """P(C(h)) for a history whose route consists of balls.

    Events only see Y mod p^M, which is itself a random walk on G_M, so the
    recursion over cosets is exact.
    """
    M = resolution if resolution is not None else max(1, h.max_radius_exp)
    if h.max_radius_exp > M:
        raise PreconditionError(f"route ball radius p^-{h.max_radius_exp} not resolvable at resolution {M}")
    if not h.route[0].contains(0):
        return 0.0
    mass = np.zeros(params.p**M)
    mass[0] = 1.0
    for i in range(1, len(h.epochs)):
        mass = circular_convolve(mass, coset_law(h.epochs[i] - h.epochs[i - 1], params, M))
        mass = mass * h.route[i].mask(M)
    return float(mass.sum())
