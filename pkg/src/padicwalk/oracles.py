"""Brute-force reference computations.

Everything here works on full dense arrays over G_m (or a truncated dual) and
uses only the character pairing, never the closed forms it is meant to check.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Params, class_indices


def character_matrix(p: int, m: int) -> np.ndarray:
    """chi(x*y) for x, y in [0, p^m), with phases reduced exactly in integers."""
    n = p**m
    r = np.arange(n, dtype=np.int64)
    phase = np.outer(r, r) % n
    return np.exp(2j * np.pi * phase / n)


def dense_fourier(f: np.ndarray, p: int, m: int) -> np.ndarray:
    """(F_m f)(y) = integral over G_m of chi(xy) f(x) d mu_m(x)."""
    return character_matrix(p, m).T @ np.asarray(f) / p**m


def dense_fourier_inv(g: np.ndarray, p: int, m: int) -> np.ndarray:
    """Sum over the dual of chi(-xy) g(y) (counting measure)."""
    return np.conj(character_matrix(p, m)) @ np.asarray(g)


def step_pmf_dense(params: Params) -> np.ndarray:
    """Per-element pmf of one step, built directly from the circle probabilities."""
    p, m, b = params.p, params.m, float(params.b)
    weights = np.array([p ** (-ell * b) for ell in range(1, m + 1)])
    circle_prob = weights / weights.sum()
    v = class_indices(p, m)
    pmf = np.zeros(p**m)
    nz = v < m
    ell = m - v[nz]
    pmf[nz] = circle_prob[ell - 1] / ((p - 1) * p ** (ell - 1))
    return pmf


def phi_dft_oracle(k: int, params: Params) -> float:
    """Characteristic function of one step at a dual element with |y| = p^k.

    Evaluated as sum_x pmf(x) chi(xy) at the representative y = p^{m-k}.
    """
    p, m = params.p, params.m
    n = p**m
    y = 0 if k == 0 else p ** (m - k)
    x = np.arange(n, dtype=np.int64)
    chi = np.exp(2j * np.pi * ((x * y) % n) / n)
    val = np.sum(step_pmf_dense(params) * chi)
    return float(val.real)


def phi_dft_all(params: Params) -> np.ndarray:
    """The step characteristic function at every dual residue."""
    p, m = params.p, params.m
    return dense_fourier(step_pmf_dense(params) * p**m, p, m)


def dense_convolution_power(pmf: np.ndarray, n: int) -> np.ndarray:
    """n-fold convolution on Z/p^m by repeated dense circulant products."""
    size = len(pmf)
    idx = (np.arange(size)[:, None] - np.arange(size)[None, :]) % size
    circ = pmf[idx]
    out = np.zeros(size)
    out[0] = 1.0
    for _ in range(n):
        out = circ @ out
    return out


def dense_ball_mass(j: int, t: float, params: Params, extra: int = 6) -> float:
    """P(|Y_t| <= p^-j) by summing the limit characteristic function over a
    truncated dual of size p^(j+extra), inverting densely, and integrating
    the resulting coset density over the ball."""
    p, b, D = params.p, float(params.b), float(params.D)
    J = j + extra
    n = p**J
    beta = (p ** (b + 1) - 1) / (p**b * (p - 1))
    k = J - class_indices(p, J)  # dual norm exponent for each residue
    phi = np.where(k == 0, 1.0, np.exp(-D * (np.power(float(p), k * b) - 1 / beta) * t))
    # fft evaluates sum_y exp(-2 pi i xy / n) phi(y), the same dense sum
    dens = np.fft.fft(phi).real
    v = class_indices(p, J)
    return float(dens[v >= j].sum() / n)


def qp_density_oracle(j: int, t: float, params: Params, K: int = 6, L: int = 8) -> float:
    """rho(t, x) on Q_p at |x| = p^-j by a Riemann sum of chi(xy) exp(-Dt|y|^b)
    over cosets of p^L Z_p inside p^-K Z_p."""
    p, b, D = params.p, float(params.b), float(params.D)
    size = p ** (K + L)
    r = np.arange(size, dtype=np.int64)
    v = class_indices(p, K + L)
    absy = np.where(v >= K + L, 0.0, np.power(float(p), K - v))
    phi = np.exp(-D * t * absy**b)
    mod = p ** (K - j)
    if K - j <= 0:
        chi = np.ones(size)
    else:
        chi = np.cos(2 * np.pi * (r % mod) / mod)
    return float(np.sum(chi * phi) * float(p) ** -L)


def brute_joint_increment_moment(n1: int, n2: int, r: float, params: Params) -> float:
    """E[|S_{n2} - S_{n1}|^r |S_{n1}|^r] by enumerating every step sequence."""
    p, m = params.p, params.m
    size = p**m
    pmf = step_pmf_dense(params)
    v = class_indices(p, m)
    absr = np.where(v >= m, 0.0, np.power(float(p), -v * r))
    # joint law of (S_{n1}, S_{n2}) accumulated path by path
    dist = {(0, 0): 1.0}
    for step in range(1, n2 + 1):
        nxt = {}
        for (a, s), w in dist.items():
            for x in range(1, size):
                key = (a if step > n1 else (a + x) % size, (s + x) % size)
                nxt[key] = nxt.get(key, 0.0) + w * pmf[x]
        dist = nxt
    return math.fsum(w * absr[(s - a) % size] * absr[a] for (a, s), w in dist.items())
