"""Arithmetic and radial harmonic analysis on G_m = Z_p / p^m Z_p and its dual.

Group elements are residues in [0, p^m).  A dual residue ``r`` stands for the
class of ``r / p^m`` in p^{-m}Z_p / Z_p.  Haar measure on G_m has total mass 1;
the dual carries counting measure.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Union

import numpy as np

Number = Union[int, Fraction, float]

INF = math.inf
RESIDUE_CAP = 2**62


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class PreconditionError(ValueError):
    """A documented precondition (usually a threshold on m) does not hold.

    Keyword arguments (e.g. ``threshold="M(p,b)", value=3``) are kept in
    ``info`` for structured error reporting.
    """

    def __init__(self, message: str, **info):
        super().__init__(message)
        self.info = info


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % d for d in range(3, math.isqrt(n) + 1, 2))


def as_exact(x) -> Number:
    """Coerce ints, Fractions and "a/b" strings to Fraction; leave floats alone."""
    if isinstance(x, bool):
        raise TypeError("bool is not a number here")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return float(x)


def ppow(p: int, e: Number) -> Number:
    """p**e, exact as a Fraction whenever e is an integer."""
    if isinstance(e, Fraction) and e.denominator == 1:
        return Fraction(p) ** int(e)
    if isinstance(e, int):
        return Fraction(p) ** e
    if isinstance(e, float) and e.is_integer():
        return Fraction(p) ** int(e)
    return float(p) ** float(e)


@dataclass(frozen=True)
class Params:
    """Prime p, level m, Vladimirov exponent b and diffusion coefficient D.

    ``b`` and ``D`` given as int, Fraction or "num/den" string are kept exact, so
    quantities like p^{mb} stay rational when m*b is an integer.
    """

    p: int
    m: int
    b: Number = 1
    D: Number = 1

    def __post_init__(self):
        object.__setattr__(self, "b", as_exact(self.b))
        object.__setattr__(self, "D", as_exact(self.D))
        if not isinstance(self.p, int) or not is_prime(self.p):
            raise DomainError(f"p={self.p!r} is not prime")
        if not isinstance(self.m, int) or self.m < 1:
            raise DomainError(f"m={self.m!r} must be an integer >= 1")
        if self.p**self.m >= RESIDUE_CAP:
            raise DomainError(f"p^m = {self.p}^{self.m} exceeds the 2^62 residue cap")
        if not self.b > 0:
            raise DomainError("b must be positive")
        if not self.D > 0:
            raise DomainError("D must be positive")

    @property
    def order(self) -> int:
        """|G_m| = p^m."""
        return self.p**self.m

    @property
    def pb(self) -> Number:
        return ppow(self.p, self.b)

    @property
    def pmb(self) -> Number:
        return ppow(self.p, self.m * self.b)

    def at_level(self, m: int) -> "Params":
        return Params(self.p, m, self.b, self.D)


def _check_residue(residue: int, p: int, m: int) -> None:
    if not 0 <= residue < p**m:
        raise DomainError(f"residue {residue} outside [0, {p}^{m})")


def valuation(residue: int, p: int, m: int):
    """Largest v with p^v | residue; ``INF`` for the zero class."""
    _check_residue(residue, p, m)
    if residue == 0:
        return INF
    v = 0
    while residue % p == 0:
        residue //= p
        v += 1
    return v


def _class_index(residue: int, p: int, m: int) -> int:
    v = valuation(residue, p, m)
    return m if v == INF else v


@dataclass(frozen=True)
class GroupElement:
    residue: int
    p: int
    m: int

    def __post_init__(self):
        _check_residue(self.residue, self.p, self.m)

    @property
    def valuation(self):
        return valuation(self.residue, self.p, self.m)

    @property
    def norm(self) -> Fraction:
        return norm_group(self)

    def __add__(self, other: "GroupElement") -> "GroupElement":
        _same_level(self, other)
        return GroupElement((self.residue + other.residue) % self.p**self.m, self.p, self.m)

    def __sub__(self, other: "GroupElement") -> "GroupElement":
        _same_level(self, other)
        return GroupElement((self.residue - other.residue) % self.p**self.m, self.p, self.m)


@dataclass(frozen=True)
class DualElement:
    """The class of residue / p^m in p^{-m}Z_p / Z_p."""

    residue: int
    p: int
    m: int

    def __post_init__(self):
        _check_residue(self.residue, self.p, self.m)

    @property
    def valuation(self):
        return valuation(self.residue, self.p, self.m)

    @property
    def norm_exp(self) -> int:
        """k with |y| = p^k; 0 for the zero class."""
        v = self.valuation
        return 0 if v == INF else self.m - v

    @property
    def norm(self) -> Fraction:
        return norm_dual(self)


def _same_level(a, b) -> None:
    if (a.p, a.m) != (b.p, b.m):
        raise DomainError(f"level mismatch: (p={a.p}, m={a.m}) vs (p={b.p}, m={b.m})")


def norm_group(x: GroupElement) -> Fraction:
    v = x.valuation
    return Fraction(0) if v == INF else Fraction(1, x.p**v)


def norm_dual(y: DualElement) -> Fraction:
    v = y.valuation
    return Fraction(0) if v == INF else Fraction(y.p ** (y.m - v))


@dataclass(frozen=True)
class Digits:
    """Base-p digits a(0), a(1), ... of a truncated p-adic integer."""

    base: int
    coefficients: tuple

    def __post_init__(self):
        if any(not 0 <= a < self.base for a in self.coefficients):
            raise DomainError(f"digits {self.coefficients} not in [0, {self.base})")

    @classmethod
    def of(cls, value: int, p: int, ndigits: int) -> "Digits":
        if not 0 <= value < p**ndigits:
            raise DomainError(f"{value} needs more than {ndigits} base-{p} digits")
        out = []
        for _ in range(ndigits):
            value, a = divmod(value, p)
            out.append(a)
        return cls(p, tuple(out))

    @property
    def value(self) -> int:
        return sum(a * self.base**i for i, a in enumerate(self.coefficients))

    def __str__(self) -> str:
        # least significant digit first
        return " ".join(str(a) for a in self.coefficients)


@dataclass(frozen=True, init=False)
class Ball:
    """The ball {x in Z_p : |x - center| <= p^{-radius_exp}}, i.e. a coset of p^j Z_p.

    Centers are reduced modulo p^j, so equal cosets compare equal.
    """

    p: int
    center: int
    radius_exp: int

    def __init__(self, p: int, center, radius_exp: int):
        if radius_exp < 0:
            raise DomainError("radius_exp must be >= 0")
        if isinstance(center, Digits):
            center = center.value
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "radius_exp", radius_exp)
        object.__setattr__(self, "center", center % p**radius_exp)

    @classmethod
    def whole(cls, p: int) -> "Ball":
        """Z_p itself."""
        return cls(p, 0, 0)

    def contains(self, x: int) -> bool:
        return (x - self.center) % self.p**self.radius_exp == 0

    def mask(self, m: int) -> np.ndarray:
        """Boolean mask over residues of G_m; requires radius_exp <= m."""
        if self.radius_exp > m:
            raise PreconditionError(f"ball of radius p^-{self.radius_exp} not resolvable at level {m}")
        mod = self.p**self.radius_exp
        return np.arange(self.p**m, dtype=np.int64) % mod == self.center

    def __str__(self) -> str:
        return f"B({self.center}, {self.p}^-{self.radius_exp})"


# Volumes.  Index k follows the B_m(k) convention: B_m(k) is the ball of radius
# p^{k-m} in G_m, and B_m(0) is the zero class.

def _check_k(k: int, m: int) -> None:
    if not 0 <= k <= m:
        raise DomainError(f"k={k} outside 0..{m}")


def ball_volume(k: int, p: int, m: int) -> Fraction:
    _check_k(k, m)
    return Fraction(p) ** (k - m)


def circle_volume(k: int, p: int, m: int) -> Fraction:
    _check_k(k, m)
    if k == 0:
        return Fraction(1, p**m)
    return (1 - Fraction(1, p)) * Fraction(p) ** (k - m)


def dual_ball_volume(k: int, p: int, m: int) -> Fraction:
    _check_k(k, m)
    return Fraction(p**k)


def dual_circle_volume(k: int, p: int, m: int) -> Fraction:
    _check_k(k, m)
    if k == 0:
        return Fraction(1)
    return (1 - Fraction(1, p)) * p**k


def char_phase(x: GroupElement, y: DualElement) -> Fraction:
    """Exact phase (x*y mod p^m) / p^m in turns."""
    _same_level(x, y)
    n = x.p**x.m
    return Fraction(x.residue * y.residue % n, n)


def char_pairing(x: GroupElement, y: DualElement) -> complex:
    return cmath.exp(2j * math.pi * char_phase(x, y))


def indicator_integral(i: int, y: DualElement) -> Fraction:
    """Integral of chi(xy) over B_m(i) against normalized Haar measure."""
    p, m = y.p, y.m
    _check_k(i, m)
    if i == 0:
        return Fraction(1, p**m)
    return ball_volume(i, p, m) if y.norm <= p ** (m - i) else Fraction(0)


def dual_indicator_integral(i: int, x: GroupElement) -> Fraction:
    """Sum of chi(xy) over the dual ball of radius p^i (counting measure)."""
    p, m = x.p, x.m
    _check_k(i, m)
    # x in B_m(m - i)  <=>  |x| <= p^{-i}
    return dual_ball_volume(i, p, m) if x.norm <= Fraction(1, p**i) else Fraction(0)


def gamma_embed(x: GroupElement) -> Digits:
    """Canonical digit section G_m -> Z_p (digits 0..m-1)."""
    return Digits.of(x.residue, x.p, x.m)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """A function on G_m (or its dual) that is constant on circles.

    ``values`` has length m+1.  For a group profile, ``values[v]`` is the value
    on elements of valuation v (v < m) and ``values[m]`` the value at the zero
    class.  For a dual profile, ``values[k]`` is the value where |y| = p^k, with
    ``values[0]`` at the zero class.
    """

    p: int
    m: int
    values: np.ndarray
    dual: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (self.m + 1,):
            raise DomainError(f"expected {self.m + 1} class values, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def value_at_zero(self):
        return self.values[0] if self.dual else self.values[self.m]

    def class_of(self, residue: int) -> int:
        v = _class_index(residue, self.p, self.m)
        return self.m - v if self.dual else v

    def at(self, residue: int):
        return self.values[self.class_of(residue)]

    def class_sizes(self) -> np.ndarray:
        """Number of residues in each class."""
        p, m = self.p, self.m
        sizes = np.array([(p - 1) * p ** (m - v - 1) for v in range(m)] + [1], dtype=float)
        return sizes[::-1].copy() if self.dual else sizes

    def class_volumes(self) -> np.ndarray:
        """Haar volume of each class (normalized on G_m, counting on the dual)."""
        sizes = self.class_sizes()
        return sizes if self.dual else sizes / self.p**self.m

    def class_masses(self) -> np.ndarray:
        return self.values * self.class_volumes()

    def dense(self) -> np.ndarray:
        """Values at every residue 0..p^m-1."""
        idx = class_indices(self.p, self.m)
        if self.dual:
            idx = self.m - idx
        return self.values[idx]

    @classmethod
    def from_dense(cls, arr, p: int, m: int, dual: bool = False, atol: float = 1e-12) -> "RadialProfile":
        arr = np.asarray(arr)
        idx = class_indices(p, m)
        if dual:
            idx = m - idx
        vals = np.zeros(m + 1, dtype=arr.dtype)
        for c in range(m + 1):
            sel = arr[idx == c]
            if np.max(np.abs(sel - sel[0])) > atol:
                raise DomainError(f"function is not radial on class {c}")
            vals[c] = sel[0]
        return cls(p, m, vals, dual)


def class_indices(p: int, m: int) -> np.ndarray:
    """Valuation of every residue in [0, p^m), with m standing for the zero class."""
    n = p**m
    r = np.arange(n, dtype=np.int64)
    v = np.zeros(n, dtype=np.int64)
    for j in range(1, m + 1):
        v += (r % p**j == 0)
    return v


def radial_fourier(f: RadialProfile) -> RadialProfile:
    """Fourier transform of a radial function on G_m; returns a dual profile.

    Writes f as a combination of ball indicators {v(x) >= j} and transforms
    each one with the indicator integral.
    """
    if f.dual:
        raise DomainError("radial_fourier expects a group profile")
    p, m = f.p, f.m
    jumps = np.diff(f.values, prepend=0)  # f_j - f_{j-1}
    weighted = jumps * np.array([float(p) ** -j for j in range(m + 1)])
    # F(k) = sum_{j >= k} jumps_j p^{-j}
    out = np.cumsum(weighted[::-1])[::-1]
    return RadialProfile(p, m, out, dual=True)


def radial_fourier_inv(g: RadialProfile) -> RadialProfile:
    """Inverse transform of a radial dual function; returns a group profile."""
    if not g.dual:
        raise DomainError("radial_fourier_inv expects a dual profile")
    p, m = g.p, g.m
    drops = g.values - np.append(g.values[1:], 0)  # g_i - g_{i+1}
    weighted = drops * np.array([float(p) ** i for i in range(m + 1)])
    return RadialProfile(p, m, np.cumsum(weighted), dual=False)
