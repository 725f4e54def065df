import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from padicwalk.convergence import equilibrium_tv, moment_scaling_constant
from padicwalk.core import Ball, DomainError, Params, PreconditionError
from padicwalk.kernel import (
    LimitKernel,
    ball_mass,
    char_function,
    coset_law,
    cylinder_prob_limit,
    kernel_table,
    limit_moment,
    qp_density,
    radial_density,
    radial_density_at_zero,
    spectral_gap,
    symbol,
)
from padicwalk.oracles import dense_ball_mass, qp_density_oracle
from padicwalk.walk import History, beta

BASE = Params(2, 2, 1, 1)
kernel_params = st.sampled_from(
    [Params(p, 2, b, D) for p in (2, 3, 5) for b in (Fraction(1, 2), 1, 2) for D in (Fraction(1, 2), 1)]
)
times = st.sampled_from([Fraction(1, 16), Fraction(1, 4), Fraction(1, 2), 1, 2, 5])


def test_symbol_conventions():
    assert symbol(0, BASE) == 0
    assert symbol(0, BASE, literal=True) == pytest.approx(-2 / 3, abs=1e-15)
    assert symbol(1, BASE) == pytest.approx(4 / 3, abs=1e-15)
    assert spectral_gap(BASE) == pytest.approx(4 / 3, abs=1e-15)
    for p in (2, 3, 5):
        for b in (Fraction(1, 2), 1, 2):
            assert spectral_gap(Params(p, 2, b)) > 0
    with pytest.raises(DomainError):
        symbol(-1, BASE)
    assert LimitKernel(BASE).beta == Fraction(3, 2)


def test_char_function_examples():
    assert char_function(1, 0, BASE) == 1
    assert char_function(1, 1, BASE) == pytest.approx(math.exp(-4 / 3), rel=1e-15)
    assert char_function(1, 0, BASE, literal=True) == pytest.approx(math.exp(2 / 3), rel=1e-15)
    with pytest.raises(DomainError):
        char_function(0, 1, BASE)


@given(kernel_params, times, times, st.integers(0, 6))
def test_char_function_semigroup(params, s, t, k):
    lhs = char_function(s, k, params) * char_function(t, k, params)
    rhs = char_function(s + t, k, params)
    if rhs == 0.0:
        assert lhs == 0.0
        return
    # exp loses about |exponent| ulps of relative accuracy
    assert lhs == pytest.approx(rhs, rel=4e-16 * max(1.0, -math.log(rhs)), abs=1e-300)


def test_ball_mass_examples():
    for t in (Fraction(1, 100), Fraction(1, 2), 1, 3):
        assert ball_mass(0, t, BASE) == 1
        assert ball_mass(1, t, BASE) == pytest.approx(0.5 * (1 + math.exp(-4 * float(t) / 3)), rel=1e-15)
    assert ball_mass(1, Fraction(1, 10**9), BASE) == pytest.approx(1, abs=1e-8)
    assert ball_mass(1, 60, BASE) == pytest.approx(0.5, abs=1e-15)


@given(kernel_params, times)
def test_ball_mass_decreasing_and_conserving(params, t):
    masses = [ball_mass(j, t, params) for j in range(12)]
    assert all(b <= a for a, b in zip(masses, masses[1:]))
    p = params.p
    for J in (1, 4, 9):
        circles = sum(radial_density(j, t, params) * (1 - 1 / p) * p**-j for j in range(J))
        assert circles + ball_mass(J, t, params) == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("p,b", [(2, 1), (3, Fraction(1, 2)), (2, 2), (5, 1)])
@pytest.mark.parametrize("t", [Fraction(1, 4), 1, 3])
def test_ball_mass_matches_dense_oracle(p, b, t):
    params = Params(p, 2, b, 1)
    extra = 8 if p == 2 else 5 if p == 3 else 3
    for j in range(0, 4):
        assert ball_mass(j, t, params) == pytest.approx(dense_ball_mass(j, float(t), params, extra), abs=1e-10)


def test_radial_density_examples():
    assert radial_density(0, 1, BASE) == pytest.approx(1 - math.exp(-4 / 3), rel=1e-15)
    assert radial_density(0, 1, BASE) == pytest.approx(0.7364, abs=1e-4)
    gap = spectral_gap(BASE)
    for t in (5, 10, 20):
        env = math.exp(-gap * t)
        for j in range(9):
            # the deviation from 1 is a finite sum dominated by p^j e^{-gap t}
            assert abs(radial_density(j, t, BASE) - 1) <= 2 ** (j + 1) * env


@given(kernel_params, times, st.integers(0, 12))
def test_radial_density_nonnegative(params, t, j):
    assert radial_density(j, t, params) >= -1e-12


def test_density_at_zero_is_supremum():
    for t in (Fraction(1, 2), 1, 2):
        top = radial_density_at_zero(t, BASE)
        assert top.tail_bound <= 1e-16
        assert all(radial_density(j, t, BASE) <= top.value + 1e-12 for j in range(30))
        assert radial_density(60, t, BASE) == pytest.approx(top.value, rel=1e-12)


def test_kernel_table():
    kern = kernel_table(1, BASE, 5)
    assert kernel_table(Fraction(1), BASE, 5) is kern
    assert kern.ball_mass[0] == 1
    lines = kern.to_csv().splitlines()
    assert lines[0] == "j,density,ballMass,tailBound"
    assert len(lines) == 7
    assert lines[1].startswith("0,") and lines[1].endswith(",1,0")
    with pytest.raises(ValueError):
        kern.density[0] = 3.0


def test_limit_moment_limits():
    r = 0.5
    small = [limit_moment(Fraction(1, 10**e), r, BASE).value for e in (4, 8, 12)]
    assert all(b < a / 50 for a, b in zip(small, small[1:]))
    assert small[-1] < 1e-5
    big = limit_moment(50, r, BASE)
    assert big.value == pytest.approx((1 - 1 / 2) / (1 - 2 ** -(r + 1)), abs=1e-12)
    assert big.tail_bound < 1e-13
    with pytest.raises(DomainError):
        limit_moment(1, 1.0, BASE)


def test_limit_moment_scaling():
    # the m -> infinity role of E_m[|Y_t|^r] <= C t^{r/b}
    r = 0.5
    C = moment_scaling_constant(r, BASE.at_level(40))
    for e in range(-10, 3):
        t = Fraction(2) ** e
        lm = limit_moment(t, r, BASE)
        assert lm.value + lm.tail_bound <= C * float(t) ** r


def test_qp_density_normalized_and_positive():
    for params in (BASE, Params(3, 2, Fraction(1, 2), 1), Params(2, 2, 2, 1)):
        p = params.p
        vals = [qp_density(j, 1, params) for j in range(-60, 61)]
        assert min(vals) >= 0
        total = math.fsum(v * (1 - 1 / p) * float(p) ** -j for v, j in zip(vals, range(-60, 61)))
        # plus the ball of radius p^-61 around 0
        total += qp_density(61, 1, params) * float(p) ** -61
        assert total == pytest.approx(1, abs=1e-8)


@pytest.mark.parametrize("j", [-2, -1, 0, 1, 2])
def test_qp_density_matches_inverse_transform(j):
    assert qp_density(j, 1, BASE) == pytest.approx(qp_density_oracle(j, 1.0, BASE, K=8, L=10), abs=1e-6)


def test_coset_law_sums_to_one():
    for M in (1, 3, 6):
        law = coset_law(Fraction(1, 3), Params(3, 2, 1), M)
        assert law.sum() == pytest.approx(1, abs=1e-12)
        assert law.min() >= -1e-12


def test_cylinder_prob_limit_examples():
    Z = Ball.whole(2)
    h = History((0, 1), (Z, Ball(2, 0, 1)))
    assert cylinder_prob_limit(h, BASE) == pytest.approx(0.5 * (1 + math.exp(-4 / 3)), abs=1e-14)
    assert cylinder_prob_limit(h, BASE) == pytest.approx(0.63180, abs=1e-5)
    assert cylinder_prob_limit(History((0, 1, 2), (Z, Z, Z)), BASE) == pytest.approx(1, abs=1e-14)
    assert cylinder_prob_limit(History((0, 1), (Ball(2, 1, 1), Z)), BASE) == 0
    with pytest.raises(PreconditionError):
        cylinder_prob_limit(History((0, 1), (Z, Ball(2, 0, 3))), BASE, resolution=2)


@given(times, times, st.integers(0, 7), st.integers(1, 3))
def test_cylinder_chapman_kolmogorov(s, t, center, j):
    Z = Ball.whole(2)
    target = Ball(2, center, j)
    one = History((0, s + t), (Z, target))
    two = History((0, s, s + t), (Z, Z, target))
    assert cylinder_prob_limit(one, BASE) == pytest.approx(cylinder_prob_limit(two, BASE), abs=1e-12)


def test_cylinder_limit_resolution_independent():
    Z = Ball.whole(2)
    h = History((0, Fraction(1, 2), 1), (Z, Ball(2, 0, 1), Ball(2, 2, 2)))
    vals = [cylinder_prob_limit(h, BASE, resolution=M) for M in (2, 4, 7)]
    assert max(vals) - min(vals) <= 1e-12


def test_equilibrium_relaxation():
    gap = spectral_gap(BASE)
    tvs = [equilibrium_tv(t, BASE.at_level(8), 4) for t in (Fraction(1, 2), 1, 2, 4, 8)]
    assert all(b < a for a, b in zip(tvs, tvs[1:]))
    for t, tv in zip((Fraction(1, 2), 1, 2, 4, 8), tvs):
        assert tv <= 2**4 * math.exp(-gap * float(t))
    tv10 = equilibrium_tv(10, BASE.at_level(8), 8)
    assert tv10 < 1e-4
    assert tv10 == pytest.approx(math.exp(-40 / 3) / 2, rel=1e-2)
    assert float(beta(2, 1)) == 1.5
