import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import chisquare

from hotwall import laws
from hotwall.extreal import INF, XR

DY_LOG_Z = laws._DYADIC_LOG_Z
Z = math.exp(DY_LOG_Z)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_sample_single_atom_is_constant():
    law = laws.atomic([1.0], [1.0])
    rng = np.random.default_rng(0)
    assert np.all(laws.sample(law, rng, size=100) == 1.0)


def test_sample_dyadic_frequencies_chisquare():
    dy = laws.dyadic()
    rng = np.random.default_rng(7)
    draws = laws.sample(dy, rng, size=1_000_000)
    # top atoms individually, everything below 2^-2 grouped (chi^2 validity)
    edges = [1.0, 0.5, 0.25]
    observed = [int((draws == a).sum()) for a in edges]
    observed.append(len(draws) - sum(observed))
    expected = [math.exp(-(2.0**j)) / Z * len(draws) for j in range(3)]
    expected.append(len(draws) - sum(expected))
    stat = chisquare(observed, expected)
    assert stat.pvalue > 0.01


def test_sample_exp_interarrival_mean_tau():
    # interarrival times are Exp(1): mean of 1/V is 1, sd 1
    law = laws.exp_interarrival(1.0)
    rng = np.random.default_rng(3)
    v = laws.sample(law, rng, size=200_000)
    tau = 1.0 / v
    se = tau.std(ddof=1) / math.sqrt(tau.size)
    assert abs(tau.mean() - 1.0) < 3 * se


def test_sample_mixture_components():
    mix = laws.MixtureLaw(parts=((0.5, laws.atomic([1.0], [1.0])),
                                 (0.5, laws.atomic([2.0], [1.0]))))
    rng = np.random.default_rng(5)
    draws = laws.sample(mix, rng, size=20_000)
    frac = (draws == 2.0).mean()
    assert abs(frac - 0.5) < 0.02


# ---------------------------------------------------------------------------
# reciprocal pushforward
# ---------------------------------------------------------------------------


def test_reciprocal_single_atom():
    law = laws.atomic([2.0], [1.0])
    psi = laws.speed_to_interarrival(law)
    assert psi.atoms.tolist() == [0.5]
    assert psi.role == laws.ROLE_INTERARRIVAL


def test_reciprocal_dyadic_atoms():
    dy = laws.dyadic()
    psi = laws.speed_to_interarrival(dy)
    np.testing.assert_array_equal(np.sort(1.0 / psi.atoms), dy.atoms)
    np.testing.assert_allclose(np.sort(psi.atoms), 2.0 ** np.arange(psi.atoms.size)[::-1][::-1])


def test_reciprocal_roundtrip_exact_on_catalog():
    for law in (laws.dyadic(), laws.atomic([1.0, 3.0], [0.4, 0.6]),
                laws.exp_interarrival(1.5), laws.polynomial(3.0)):
        back = laws.interarrival_to_speed(laws.speed_to_interarrival(law))
        assert back is law


# ---------------------------------------------------------------------------
# expectation
# ---------------------------------------------------------------------------


def test_expectation_dyadic_exp_moment_series_oracle():
    # oracle: the weight series (1/Z) sum_j exp((c-1) 2^j)
    dy = laws.dyadic()
    for c in (0.95, 0.5):
        oracle = sum(math.exp((c - 1.0) * 2.0**j) for j in range(400)) / Z
        got = laws.exp_over_p_moment(dy, c)
        assert got.is_finite
        np.testing.assert_allclose(float(got), oracle, rtol=1e-12)


def test_expectation_dyadic_divergent_above_one():
    dy = laws.dyadic()
    assert laws.exp_over_p_moment(dy, 1.05) == INF
    assert laws.exp_over_p_moment(dy, 1.0) == INF


def test_expectation_normalization():
    for law in (laws.dyadic(), laws.atomic([1.0, 3.0], [0.4, 0.6]),
                laws.exp_interarrival(2.0), laws.polynomial(3.0)):
        one = laws.expectation(law, lambda p: np.ones_like(p))
        np.testing.assert_allclose(float(one), 1.0, atol=1e-9)


def test_expectation_linear_on_atomic_exact():
    law = laws.atomic([1.0, 2.0, 5.0], [0.2, 0.3, 0.5])
    g1 = lambda p: p
    g2 = lambda p: p**2
    lhs = float(laws.expectation(law, lambda p: 2.0 * g1(p) + 3.0 * g2(p)))
    rhs = 2.0 * float(laws.expectation(law, g1)) + 3.0 * float(laws.expectation(law, g2))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-15)


# ---------------------------------------------------------------------------
# xi
# ---------------------------------------------------------------------------


def test_xi_dyadic():
    assert abs(float(laws.compute_xi(laws.dyadic())) - 1.0) <= 1e-6


def test_xi_exp_interarrival_with_quadrature_oracle():
    # oracle: direct quadrature of exp(c/p) against the density on a c-grid,
    # compared to the analytic value xi0/(xi0-c); divergence beyond xi0 via
    # monotone lower bounds.
    xi0 = 2.0
    law = laws.exp_interarrival(xi0)
    for c in (1.0, 1.9):
        val, _ = quad(lambda u: xi0 * math.exp(-(xi0 - c) * u), 0, np.inf)
        np.testing.assert_allclose(val, xi0 / (xi0 - c), rtol=1e-8)
        got = laws.exp_over_p_moment(law, c)
        np.testing.assert_allclose(float(got), xi0 / (xi0 - c), rtol=1e-6)
    assert laws.exp_over_p_moment(law, 2.1) == INF
    assert abs(float(laws.compute_xi(law, tol=1e-3)) - xi0) <= 1e-3


def test_xi_polynomial_zero():
    assert laws.compute_xi(laws.polynomial(3.0), tol=1e-3) == XR(0.0)


def test_xi_finite_atomic_is_infinite():
    assert laws.compute_xi(laws.atomic([1.0, 3.0], [0.5, 0.5])) == INF


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------


def test_window_dyadic_single_atom_exact():
    dy = laws.dyadic()
    # window [0.6, 1.4) * 2^-8 holds exactly the atom 2^-8
    got = laws.window_probability(dy, 2.0**-8, 0.4)
    oracle = math.exp(-(2.0**8)) / Z
    np.testing.assert_allclose(got, oracle, rtol=1e-12)
    idx = np.nonzero(dy.atoms == 2.0**-8)[0][0]
    assert got == float(np.exp(dy.log_weights[idx]))


def test_window_dyadic_three_halves_center_true_values():
    # the window [1.8, 4.2) * 2^-j catches the atoms 2^(1-j) and 2^(2-j);
    # emptiness requires half-width < 1/3
    dy = laws.dyadic()
    for j in range(3, 11):
        got = laws.window_probability(dy, 3.0 * 2.0**-j, 0.4)
        oracle = (math.exp(-(2.0 ** (j - 1))) + math.exp(-(2.0 ** (j - 2)))) / Z
        np.testing.assert_allclose(got, oracle, rtol=1e-12)
    for j in range(3, 13):
        assert laws.window_probability(dy, 3.0 * 2.0**-j, 0.3) == 0.0
        assert laws.log_window_probability(dy, 3.0 * 2.0**-j, 0.3) == -math.inf


def test_window_full_support_is_one():
    law = laws.atomic([1.0, 3.0], [0.4, 0.6])
    assert laws.window_probability(law, 2.0, 0.9) == pytest.approx(1.0, abs=1e-15)


def test_window_monotone_in_delta():
    dy = laws.dyadic()
    eps = 3.0 * 2.0**-5
    vals = [laws.window_probability(dy, eps, d) for d in (0.1, 0.25, 0.34, 0.5, 0.8)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_log_window_dyadic_deep_tail_exact():
    # exact log-space mass far below double underflow
    dy = laws.dyadic()
    j = 40
    lw = laws.log_window_probability(dy, 2.0**-j, 0.4)
    np.testing.assert_allclose(lw, -(2.0**j) - DY_LOG_Z, rtol=1e-12)


def test_window_exp_law_cdf():
    law = laws.exp_interarrival(1.0)
    got = laws.window_probability(law, 0.5, 0.2)
    oracle = math.exp(-1.0 / 0.6) - math.exp(-1.0 / 0.4)
    np.testing.assert_allclose(got, oracle, rtol=1e-12)


# ---------------------------------------------------------------------------
# xi_bar
# ---------------------------------------------------------------------------


def test_xi_bar_dyadic_infinite_flag():
    dy = laws.dyadic()
    rep = laws.estimate_xi_bar(dy, delta_grid=[0.3, 0.25, 0.2, 0.1],
                               eps_grid=[3.0 * 2.0**-j for j in range(3, 13)],
                               xi=XR(1.0))
    assert rep.diagnostics["infinite_flag"]
    assert rep.xi_bar_lower == INF and rep.xi_bar_upper == INF


def test_xi_bar_exp_bracket():
    # analytic cdf exp(-xi0/p): window exponent tends to xi0/(1+delta)
    for xi0 in (0.5, 1.0, 2.0):
        law = laws.exp_interarrival(xi0)
        rep = laws.estimate_xi_bar(law, delta_grid=[0.3, 0.2, 0.1, 0.04],
                                   eps_grid=[0.5**k for k in range(1, 15)],
                                   xi=XR(xi0))
        lo, hi = float(rep.xi_bar_lower), float(rep.xi_bar_upper)
        assert lo <= xi0 <= hi
        assert hi - lo <= 0.2


def test_xi_bar_polynomial_near_zero():
    rep = laws.estimate_xi_bar(laws.polynomial(3.0), delta_grid=[0.3, 0.2, 0.1, 0.04],
                               eps_grid=[0.5**k for k in range(1, 18)], xi=XR(0.0))
    assert float(rep.xi_bar_upper) <= 0.05


def test_xi_le_xi_bar_upper_on_catalog():
    catalog = [laws.dyadic(), laws.exp_interarrival(1.0), laws.polynomial(3.0),
               laws.atomic([1.0, 3.0], [0.4, 0.6])]
    grids = dict(delta_grid=[0.3, 0.2, 0.1], eps_grid=[0.5**k for k in range(1, 14)])
    for law in catalog:
        rep = laws.estimate_xi_bar(law, **grids)
        assert rep.xi <= rep.xi_bar_upper


# ---------------------------------------------------------------------------
# size bias and tilting
# ---------------------------------------------------------------------------


def test_size_bias_two_atoms():
    pi = laws.atomic([1.0, 3.0], [0.5, 0.5])
    sb = laws.size_bias(pi)
    np.testing.assert_allclose(sb.weights, [0.25, 0.75], rtol=1e-14)


def test_size_bias_single_atom_fixed_point():
    pi = laws.atomic([2.5], [1.0])
    sb = laws.size_bias(pi)
    np.testing.assert_allclose(sb.weights, [1.0])
    np.testing.assert_allclose(sb.atoms, [2.5])


def test_size_bias_mean_inverse_identity():
    # mean of 1/p under the size-biased law equals 1/pi(p)
    pi = laws.atomic([1.0, 2.0, 4.0], [0.25, 0.5, 0.25])
    sb = laws.size_bias(pi)
    np.testing.assert_allclose(float(laws.law_mean_inverse(sb)),
                               1.0 / float(laws.law_mean(pi)), atol=1e-9)


def test_size_bias_involution():
    pi = laws.atomic([0.5, 1.0, 7.0], [0.1, 0.6, 0.3])
    back = laws.inverse_size_bias(laws.size_bias(pi))
    np.testing.assert_allclose(back.weights, pi.weights, rtol=1e-12)
    np.testing.assert_array_equal(back.atoms, pi.atoms)


def test_size_bias_increases_mean():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = rng.integers(2, 6)
        atoms = np.sort(rng.uniform(0.1, 5.0, size=n))
        atoms += np.arange(n) * 1e-3  # keep distinct
        w = rng.dirichlet(np.ones(n))
        if np.any(w <= 0):
            continue
        pi = laws.AtomicLaw(atoms=atoms, log_weights=np.log(w))
        sb = laws.size_bias(pi)
        assert float(laws.law_mean(sb)) > float(laws.law_mean(pi))


def test_size_bias_infinite_mean_raises():
    with pytest.raises(laws.InfiniteMean):
        laws.size_bias(laws.exp_interarrival(1.0))  # E[V] = +inf there


def test_tilt_no_op():
    phi = laws.atomic([1.0, 3.0], [0.4, 0.6])
    tilted, cf = laws.tilt_by_boundary_function(phi, lambda v: np.zeros_like(v))
    assert cf == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(tilted.weights, phi.weights, rtol=1e-12)


def test_tilt_single_atom_closed_form():
    phi = laws.atomic([1.0], [1.0])
    tilted, cf = laws.tilt_by_boundary_function(phi, lambda v: -v)
    assert cf == pytest.approx(math.exp(-1.0), rel=1e-14)
    np.testing.assert_allclose(tilted.weights, [1.0])


# ---------------------------------------------------------------------------
# config dialect
# ---------------------------------------------------------------------------


def test_config_roundtrip_builtins():
    for cfg in ({"kind": "builtin", "name": "dyadic"},
                {"kind": "density", "name": "exp_interarrival", "xi0": 2.0},
                {"kind": "density", "name": "polynomial", "kappa": 3.0}):
        law = laws.law_from_config(cfg)
        again = laws.law_from_config(laws.law_to_config(law))
        assert laws.law_to_config(again) == laws.law_to_config(law)


def test_config_roundtrip_atomic_and_mixture():
    cfg = {"kind": "mixture", "parts": [
        {"weight": 0.3, "law": {"kind": "atomic", "atoms": [1.0], "weights": [1.0]}},
        {"weight": 0.7, "law": {"kind": "atomic", "atoms": [1.0, 2.0], "weights": [0.5, 0.5]}},
    ]}
    law = laws.law_from_config(cfg)
    assert laws.law_to_config(laws.law_from_config(laws.law_to_config(law))) == laws.law_to_config(law)


def test_invalid_configs():
    with pytest.raises(ValueError):
        laws.law_from_config({"kind": "builtin", "name": "nope"})
    with pytest.raises(ValueError):
        laws.law_from_config({"kind": "wat"})
    with pytest.raises(ValueError):
        laws.atomic([1.0, 2.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        laws.atomic([-1.0], [1.0])
