import math

import numpy as np
import pytest
from scipy import integrate, special

from geostop.potentials import (
    PotentialHandle,
    default_eta,
    directional_derivatives,
    exp_gradient,
    exp_handle,
    exp_potential_geometric,
    fd_gradient_batch,
    fd_hessian_batch,
    heat_gradient_fixed,
    heat_gradient_geometric,
    heat_lower_handle,
    heat_potential_fixed,
    heat_potential_geometric,
    heat_shift_constant,
    heat_upper_handle,
    heat_value_closed_origin,
    kappa_m,
    kappa_s,
    max_gradient_fixed,
    max_lower_handle,
    max_potential_fixed,
    max_potential_geometric,
    max_shift_constant,
    max_upper_handle,
    max_value_closed_origin,
    ranked_decomposition,
)

RATIO = lambda d: (1.0 - d) / d


def test_kappa_s_values():
    d = 0.2
    np.testing.assert_allclose(kappa_s(2, d), RATIO(d))
    np.testing.assert_allclose(kappa_s(3, d), RATIO(d) * (0.5 + 1.0 / 6.0))
    np.testing.assert_allclose(kappa_s(4, d), RATIO(d) * (0.5 + 1.0 / 6.0))
    np.testing.assert_allclose(kappa_s(5, d), RATIO(d) * 0.6)
    with pytest.raises(ValueError):
        kappa_s(1, d)


def test_kappa_m_values():
    d = 0.2
    np.testing.assert_allclose(kappa_m(2, d), RATIO(d) * 2.0)
    np.testing.assert_allclose(kappa_m(3, d), RATIO(d) * 2.0)
    np.testing.assert_allclose(kappa_m(4, d), RATIO(d) * 8.0 / 3.0)
    np.testing.assert_allclose(kappa_m(5, d), RATIO(d) * 3.0)
    for n in range(2, 12):
        assert kappa_m(n, d) >= 2.0 * RATIO(d) - 1e-12


def test_default_eta():
    np.testing.assert_allclose(default_eta(4, 0.5),
                               math.sqrt(2.0 * 0.5 * math.log(4) / 0.5))
    with pytest.raises(ValueError):
        default_eta(2, 1.0)


def test_shift_constants():
    np.testing.assert_allclose(
        heat_shift_constant(2, 0.1, 9.0),
        math.sqrt(1.8) / math.sqrt(math.pi))
    np.testing.assert_allclose(
        max_shift_constant(3, 0.1, 18.0),
        2.0 * math.sqrt(1.8 / math.pi) * 2.0 / 3.0)


# ---------------------------------------------------------------------------
# fixed-horizon values against independent quadrature


def _heat_two_expert_oracle(x1, x2, sigma):
    """E max of two independent normals via the classic closed form."""
    m = x1 - x2
    s = sigma * math.sqrt(2.0)
    z = m / s
    return x2 + m * special.ndtr(z) + s * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _heat_quad_oracle(x, sigma):
    def cdf(v):
        return np.prod(special.ndtr((v - np.asarray(x)) / sigma))
    hi = integrate.quad(lambda v: 1.0 - cdf(v), 0, np.inf)[0]
    lo = integrate.quad(cdf, -np.inf, 0)[0]
    return hi - lo


def test_heat_fixed_two_experts():
    for x1, x2, t, kappa in [(1.0, 0.0, -1.0, 1.0), (3.0, -2.0, -0.5, 4.0),
                             (0.0, 0.0, -2.0, 0.5)]:
        sigma = math.sqrt(2.0 * kappa * abs(t))
        want = _heat_two_expert_oracle(x1, x2, sigma)
        got = heat_potential_fixed(np.array([x1, x2]), t, kappa)
        np.testing.assert_allclose(got, want, atol=1e-10)


def test_heat_fixed_three_experts_vs_quadrature():
    x = np.array([1.5, 0.0, -0.7])
    got = heat_potential_fixed(x, -2.0, 1.3)
    want = _heat_quad_oracle(x, math.sqrt(2.0 * 1.3 * 2.0))
    np.testing.assert_allclose(got, want, atol=1e-8)


def test_heat_fixed_origin_two_experts():
    # E max(Y1, Y2) = 1/sqrt(pi) scaled by sigma
    got = heat_potential_fixed(np.zeros(2), -1.0, 1.0)
    np.testing.assert_allclose(got, math.sqrt(2.0 / math.pi), atol=1e-12)


def test_heat_fixed_dominant_coordinate():
    got = heat_potential_fixed(np.array([10.0, 0.0]), -0.005, 1.0)
    np.testing.assert_allclose(got, 10.0, atol=1e-8)


def test_heat_fixed_dominates_max():
    rng = np.random.default_rng(5)
    for _ in range(25):
        x = rng.normal(size=4) * 3.0
        val = heat_potential_fixed(x, -1.0, 2.0)
        assert val >= x.max() - 1e-12


def test_heat_gradient_fixed_symmetry_and_dominance():
    np.testing.assert_allclose(heat_gradient_fixed(np.zeros(3), -1.0, 1.0),
                               np.full(3, 1.0 / 3.0), atol=1e-12)
    g = heat_gradient_fixed(np.array([10.0, 0.0]), -0.005, 1.0)
    np.testing.assert_allclose(g, [1.0, 0.0], atol=1e-10)


def test_heat_gradient_fixed_vs_quadrature():
    """Component i is P(coordinate i attains the smoothed max)."""
    x = np.array([0.8, 0.0, -0.5])
    sigma = math.sqrt(2.0 * 1.0 * 1.5)
    got = heat_gradient_fixed(x, -1.5, 1.0)
    for i in range(3):
        others = np.delete(x, i)
        want = integrate.quad(
            lambda y: math.exp(-0.5 * y * y) / math.sqrt(2.0 * math.pi)
            * np.prod(special.ndtr(y + (x[i] - others) / sigma)),
            -np.inf, np.inf)[0]
        np.testing.assert_allclose(got[i], want, atol=1e-8)
    np.testing.assert_allclose(got.sum(), 1.0, atol=1e-8)


def test_max_fixed_origin_closed_form():
    for n in (2, 3, 6):
        want = 2.0 * (n - 1) / n * math.sqrt(1.0 / math.pi)
        got = max_potential_fixed(np.zeros(n), -1.0, 1.0)
        np.testing.assert_allclose(got, want, atol=1e-12)
    np.testing.assert_allclose(max_potential_fixed(np.zeros(2), -math.pi, 1.0),
                               1.0, atol=1e-14)


def test_max_fixed_translation_and_permutation():
    rng = np.random.default_rng(9)
    x = rng.normal(size=4) * 2.0
    base = max_potential_fixed(x, -1.0, 3.0)
    np.testing.assert_allclose(max_potential_fixed(x + 2.5, -1.0, 3.0),
                               base + 2.5, atol=1e-12)
    perm = rng.permutation(4)
    np.testing.assert_allclose(max_potential_fixed(x[perm], -1.0, 3.0),
                               base, atol=1e-12)


def test_max_fixed_solves_its_equation():
    """u_t + kappa max_i u_ii vanishes away from rank ties."""
    x = np.array([2.0, 0.5, -1.0])
    kappa, t = 1.7, -2.0
    h = 1e-4
    u_t = (max_potential_fixed(x, t + h, kappa)
           - max_potential_fixed(x, t - h, kappa)) / (2.0 * h)
    diag = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        diag.append((max_potential_fixed(x + e, t, kappa)
                     - 2.0 * max_potential_fixed(x, t, kappa)
                     + max_potential_fixed(x - e, t, kappa)) / h ** 2)
    residual = u_t + kappa * max(diag)
    assert abs(residual) < 1e-5


def test_max_gradient_sums_to_one_exactly():
    rng = np.random.default_rng(3)
    for _ in range(30):
        x = rng.normal(size=5) * 4.0
        g = max_gradient_fixed(x, -0.7, 2.0)
        assert abs(g.sum() - 1.0) < 1e-14
        assert np.all(g >= 0.0)


def test_max_gradient_matches_finite_differences():
    xs = np.array([[2.0, 0.5, -1.0], [4.0, 1.0, 0.0], [-1.0, -2.0, -4.0]])
    got = np.array([max_gradient_fixed(x, -1.0, 2.0) for x in xs])
    want = fd_gradient_batch(
        lambda X: np.array([max_potential_fixed(x, -1.0, 2.0) for x in X]), xs)
    np.testing.assert_allclose(got, want, atol=1e-6)


def test_ranked_decomposition_shapes():
    dec = ranked_decomposition(np.array([0.0, 3.0, 1.0]), -1.0, 0.5)
    np.testing.assert_array_equal(dec.order, [1, 2, 0])
    assert dec.sigma == 1.0
    assert np.all(dec.z >= 0.0)
    assert dec.z.shape == (2,)


@pytest.mark.parametrize("func", [heat_potential_fixed, max_potential_fixed])
def test_fixed_time_domain_errors(func):
    with pytest.raises(ValueError):
        func(np.zeros(2), 0.0, 1.0)
    with pytest.raises(ValueError):
        func(np.zeros(2), -1.0, -2.0)


# ---------------------------------------------------------------------------
# geometric-horizon potentials


def test_exp_potential_and_gradient_identities():
    h = exp_handle(3, 0.25)
    x = np.array([1.0, 0.0, -2.0])
    eta = h.eta
    want = special.logsumexp(eta * x) / eta \
        + (1.0 - 0.25) * eta / (2.0 * 0.25)
    np.testing.assert_allclose(exp_potential_geometric(x, h), want, atol=1e-12)
    soft = np.exp(eta * x) / np.exp(eta * x).sum()
    np.testing.assert_allclose(exp_gradient(x, h), soft, atol=1e-12)


def test_heat_geometric_origin_matches_closed_form():
    for n, d in [(2, 1e-2), (3, 1e-4), (5, 1e-2)]:
        h = heat_lower_handle(n, d)
        got = heat_potential_geometric(np.zeros(n), h) + h.shift_constant
        np.testing.assert_allclose(got, heat_value_closed_origin(h), atol=1e-7)


def test_max_geometric_origin_matches_closed_form():
    for n, d in [(2, 1e-2), (4, 1e-4)]:
        h = max_upper_handle(n, d)
        got = max_potential_geometric(np.zeros(n), h) - h.shift_constant
        np.testing.assert_allclose(got, max_value_closed_origin(h), atol=1e-7)


def test_geometric_translation_covariance():
    rng = np.random.default_rng(17)
    x = rng.normal(size=3) * 5.0
    for h in (heat_lower_handle(3, 0.1), max_lower_handle(3, 0.1),
              heat_upper_handle(3, 0.1), max_upper_handle(3, 0.1)):
        base = h.value(x)
        np.testing.assert_allclose(h.value(x + 4.0), base + 4.0, atol=1e-9)


def test_geometric_sides_differ_by_twice_the_shift():
    x = np.array([1.0, -1.0, 0.5])
    lo = heat_lower_handle(3, 0.1)
    hi = lo.with_side("upper")
    np.testing.assert_allclose(hi.value(x) - lo.value(x),
                               2.0 * lo.shift_constant, atol=1e-10)


def test_small_delta_asymptote_two_experts():
    """sqrt(delta)-scaled origin values approach 1/sqrt(2) as delta -> 0."""
    d = 1e-6
    target = 1.0 / math.sqrt(2.0)
    for h in (heat_lower_handle(2, d), max_lower_handle(2, d),
              max_upper_handle(2, d)):
        fam_value = (heat_potential_geometric if h.family == "heat"
                     else max_potential_geometric)(np.zeros(2), h)
        assert abs(math.sqrt(d) * fam_value - target) < 0.01 * target


def test_geometric_gradients_match_finite_differences():
    rng = np.random.default_rng(23)
    xs = rng.normal(size=(4, 3)) * 3.0
    for h in (heat_lower_handle(3, 0.1), max_upper_handle(3, 0.1),
              exp_handle(3, 0.1)):
        got = h.gradient_batch(xs)
        want = fd_gradient_batch(h.value_batch, xs)
        np.testing.assert_allclose(got, want, atol=1e-6)
        np.testing.assert_allclose(got.sum(axis=1), 1.0, atol=1e-9)


def test_heat_geometric_gradient_permutes_with_input():
    h = heat_upper_handle(3, 0.2)
    x = np.array([2.0, -1.0, 0.5])
    g = heat_gradient_geometric(x, h)
    perm = np.array([2, 0, 1])
    np.testing.assert_allclose(heat_gradient_geometric(x[perm], h), g[perm],
                               atol=1e-12)


def test_lean_weight_rule_tracks_the_full_rule():
    # The strategy path runs the half-size quadrature; keep it within a
    # decade of the full rule's 1e-9 design accuracy or weights drift.
    from geostop.potentials import _heat_grad_batch

    rng = np.random.default_rng(77)
    xs = rng.normal(size=(50, 3)) * 4.0
    sig = np.full(50, 1.7)
    np.testing.assert_allclose(_heat_grad_batch(xs, sig, lean=True),
                               _heat_grad_batch(xs, sig, lean=False),
                               atol=1e-7)


def test_handle_validation():
    with pytest.raises(ValueError):
        PotentialHandle("bogus", 3, 0.1, "lower", kappa=1.0)
    with pytest.raises(ValueError):
        PotentialHandle("heat", 3, 0.1, "sideways", kappa=1.0)
    with pytest.raises(ValueError):
        heat_lower_handle(1, 0.1)


# ---------------------------------------------------------------------------
# derivative helpers


def test_fd_hessian_symmetric_and_heat_convex():
    h = heat_lower_handle(3, 0.2)
    x = np.array([[1.0, 0.0, -1.0]])
    hess = fd_hessian_batch(h.value_batch, x)[0]
    np.testing.assert_allclose(hess, hess.T, atol=1e-7)
    eigs = np.linalg.eigvalsh(hess)
    assert eigs.min() > -1e-6


def test_directional_derivatives_symmetry():
    # odd-order directional derivatives vanish at the symmetric point when
    # the direction is itself sign-symmetric under coordinate exchange
    h = heat_lower_handle(2, 0.2)
    q = np.array([1.0, -1.0])
    d3 = directional_derivatives(h, np.zeros(2), q, 3)
    assert abs(d3) < 1e-4
    d2 = directional_derivatives(h, np.zeros(2), q, 2)
    assert d2 > 0.0


def test_directional_derivatives_order_validation():
    h = heat_lower_handle(2, 0.2)
    with pytest.raises(ValueError):
        directional_derivatives(h, np.zeros(2), np.array([1.0, -1.0]), 5)
