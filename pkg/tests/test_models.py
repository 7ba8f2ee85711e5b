import numpy as np
import pytest
from scipy.optimize import minimize, root

from egma.models import (
    DomainError,
    LJClusterModel,
    MaierSteinModel,
    QuadraticModel,
    TwoChannelModel,
    UnsupportedCapability,
    fd_gradient,
    make_model,
)
from egma.oracles import ms_critical_point

RNG = np.random.default_rng(1234)


def fd5(f, x, h=1e-4):
    """Fourth-order central differences, one coordinate at a time."""
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)
    return out


def lap5(f, x, h=1e-3):
    total = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        total += (-f(x + 2 * e) + 16 * f(x + e) - 30 * f(x) + 16 * f(x - e) - f(x - 2 * e)) / (12 * h * h)
    return total


def hexagon(jitter=0.0, rng=RNG):
    ang = np.pi / 3 * np.arange(6)
    pos = np.vstack([[0.0, 0.0], 1.12 * np.column_stack([np.cos(ang), np.sin(ang)])])
    return (pos + jitter * rng.standard_normal(pos.shape)).ravel()


def sample(model, k=100):
    if model.name == "lj-cluster":
        return np.stack([hexagon(0.08) for _ in range(k)])
    if model.name == "two-channel":
        return RNG.uniform([-1.5, -0.5], [1.5, 2.0], size=(k, 2))
    return RNG.uniform(-1.5, 1.5, size=(k, 2))


ALL_MODELS = [
    QuadraticModel(0.1),
    TwoChannelModel(0.05),
    LJClusterModel(0.01),
    LJClusterModel(0.01, grad_u="analytic"),
    MaierSteinModel(0.1, 10.0),
    MaierSteinModel(0.1, 1.0),
]
IDS = ["quadratic", "two-channel", "lj-numeric", "lj-analytic", "maier-stein", "maier-stein-b1"]


# -- path potential values ----------------------------------------------------


def test_quadratic_values():
    m = QuadraticModel(0.1)
    assert m.path_potential([0.0, 0.0]) == pytest.approx(0.2, abs=1e-15)
    assert m.path_potential([1.0, 0.0]) == pytest.approx(-0.3, abs=1e-15)
    np.testing.assert_allclose(m.grad_path_potential([0.3, -2.0]), [-0.3, 2.0])
    np.testing.assert_allclose(m.drift([2.0, 3.0]), [-2.0, -3.0])


def test_maier_stein_on_y_axis():
    m = MaierSteinModel(0.1, 10.0)
    y = np.linspace(-2, 2, 9)
    pts = np.column_stack([np.zeros_like(y), y])
    # (eps beta - 1/2) y^2 = 0.5 y^2
    np.testing.assert_allclose(m.path_potential(pts), 0.5 * y * y, rtol=1e-14, atol=1e-15)


def test_maier_stein_explicit_formula_matches_general_definition():
    m = MaierSteinModel(0.3, 4.0)
    x = sample(m)
    b = m.drift(x)
    div = np.trace(m.drift_jacobian(x), axis1=-2, axis2=-1)
    general = -m.epsilon * div - 0.5 * np.sum(b * b, axis=1)
    np.testing.assert_allclose(m.path_potential(x), general, rtol=1e-12, atol=1e-12)


def test_maier_stein_fixed_points():
    for beta in (1.0, 10.0):
        m = MaierSteinModel(0.1, beta)
        for p in ([1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]):
            np.testing.assert_allclose(m.drift(p), [0.0, 0.0], atol=1e-15)


def test_maier_stein_beta_one_is_gradient():
    m = MaierSteinModel(0.1, 1.0)

    def v_ms(p):
        x, y = p
        return -x * x / 2 + x**4 / 4 + (1 + x * x) * y * y / 2

    for x in sample(m):
        np.testing.assert_allclose(m.drift(x), -fd5(v_ms, x), atol=1e-9)


def test_maier_stein_jacobian_matches_fd():
    m = MaierSteinModel(0.1, 10.0)
    for x in sample(m, 20):
        jac = m.drift_jacobian(x)
        fd = np.stack([fd5(lambda p, i=i: m.drift(p)[i], x) for i in range(2)])
        np.testing.assert_allclose(jac, fd, atol=1e-8)


def test_maier_stein_critical_point_is_stationary():
    for eps in (0.0, 0.05, 0.1, 0.5):
        x_c, e_c = ms_critical_point(eps)
        m = MaierSteinModel(eps, 10.0)
        for sign in (-1.0, 1.0):
            g = m.grad_path_potential([sign * x_c, 0.0])
            assert np.linalg.norm(g) <= 1e-10
            assert m.path_potential([sign * x_c, 0.0]) == pytest.approx(e_c, abs=1e-14)


def test_drift_jacobian_unsupported_for_gradient_models():
    with pytest.raises(UnsupportedCapability):
        QuadraticModel().drift_jacobian([0.0, 0.0])
    with pytest.raises(NotImplementedError):
        TwoChannelModel().drift_jacobian([0.0, 0.0])


# -- derivative machinery -----------------------------------------------------


@pytest.mark.parametrize("model", ALL_MODELS, ids=IDS)
def test_grad_path_potential_matches_fd(model):
    x = sample(model)
    got = model.grad_path_potential(x)
    ref = fd_gradient(model.path_potential, x, 1e-5)
    err = np.max(np.abs(got - ref), axis=1)
    assert np.all(err <= 1e-5 * (1.0 + np.max(np.abs(ref), axis=1)))


@pytest.mark.parametrize("model", [m for m in ALL_MODELS if m.kind == "gradient"],
                         ids=["quadratic", "two-channel", "lj-numeric", "lj-analytic"])
def test_gradient_models_drift_is_minus_grad_v(model):
    x = sample(model)
    g = model.grad_potential(x)
    np.testing.assert_array_equal(model.drift(x), -g)
    for p in x[:10]:
        ref = fd5(model.potential, p, 1e-5)
        assert np.max(np.abs(g[np.all(x == p, axis=1)][0] - ref)) <= 1e-6 * (1 + np.abs(ref).max())


@pytest.mark.parametrize("model", [TwoChannelModel(0.05), LJClusterModel(0.01)], ids=["two-channel", "lj"])
def test_laplacian_matches_fd(model):
    for p in sample(model, 10):
        ref = lap5(model.potential, p)
        assert model.laplacian_potential(p) == pytest.approx(ref, rel=1e-5, abs=1e-6)


@pytest.mark.parametrize("model", ALL_MODELS, ids=IDS)
def test_epsilon_zero_reduces_to_drift_norm(model):
    params = model.params()
    params["epsilon"] = 0.0
    m0 = make_model(model.name, **params)
    x = sample(m0, 20)
    b = m0.drift(x)
    np.testing.assert_allclose(m0.path_potential(x), -0.5 * np.sum(b * b, axis=1), rtol=1e-12, atol=1e-12)


def test_batched_and_single_evaluation_agree():
    for model in ALL_MODELS:
        x = sample(model, 5)
        single = np.array([model.path_potential(p) for p in x])
        np.testing.assert_allclose(model.path_potential(x), single, rtol=1e-14)


# -- two-channel landscape ----------------------------------------------------


def test_two_channel_critical_points():
    m = TwoChannelModel(0.05, 12.16)
    s1 = root(m.grad_potential, [0.0, 0.0], tol=1e-14).x
    s2 = root(m.grad_potential, [0.0, 1.0], tol=1e-14).x
    a = root(m.grad_potential, [-1.0, 0.0], tol=1e-14).x
    # equal saddle heights up to the precision of gamma = 12.16
    assert m.potential(s1) == pytest.approx(0.199373, abs=2e-6)
    assert m.potential(s2) == pytest.approx(0.199341, abs=2e-6)
    assert abs(m.potential(s1) - m.potential(s2)) < 1e-4
    np.testing.assert_allclose(a, [-0.984026, 0.043286], atol=1e-5)


@pytest.mark.parametrize(
    "eps,guess,expected",
    [(0.05, [0.0, 1.0], 1.5516), (0.05, [0.99, 0.02], 1.0849), (0.5, [0.3, 1.0], 23.9939)],
)
def test_two_channel_path_potential_maxima(eps, guess, expected):
    m = TwoChannelModel(eps)
    res = minimize(lambda p: -m.path_potential(p), guess, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 5000})
    assert -res.fun == pytest.approx(expected, abs=3e-4)


# -- Lennard-Jones ------------------------------------------------------------


def test_lj_pair_energy_and_minimum():
    m = LJClusterModel(0.0, n_atoms=2)
    r0 = 2 ** (1 / 6)
    assert m.potential([0, 0, r0, 0]) == pytest.approx(-1.0, rel=1e-14)
    np.testing.assert_allclose(m.grad_potential([0, 0, r0, 0]), 0.0, atol=1e-12)
    assert m.potential([0, 0, 1.0, 0]) == pytest.approx(0.0, abs=1e-15)


def test_lj_hexagon_energy():
    m = LJClusterModel(0.0)
    res = minimize(m.potential, hexagon(), jac=m.grad_potential, method="BFGS", options={"gtol": 1e-10})
    assert res.fun == pytest.approx(-12.534867, abs=1e-6)


def test_lj_translation_invariance():
    m = LJClusterModel(0.01)
    for p in sample(m, 20):
        shift = np.tile(RNG.uniform(-5, 5, 2), 7)
        assert m.potential(p + shift) == pytest.approx(m.potential(p), rel=1e-10)
        assert m.path_potential(p + shift) == pytest.approx(m.path_potential(p), rel=1e-9)


def test_lj_domain_error_names_pair():
    m = LJClusterModel(0.01)
    x = hexagon().reshape(7, 2)
    x[5] = x[2]
    with pytest.raises(DomainError) as info:
        m.path_potential(x.ravel())
    assert set(info.value.pair) == {2, 5}


def test_lj_analytic_and_numeric_modes_agree():
    a = LJClusterModel(0.5, grad_u="analytic")
    n = LJClusterModel(0.5, grad_u="numeric")
    x = sample(a, 10)
    ga, gn = a.grad_path_potential(x), n.grad_path_potential(x)
    assert np.max(np.abs(ga - gn)) <= 1e-5 * (1 + np.abs(ga).max())
    assert a.grad_mode == "analytic" and n.grad_mode == "numeric"


# -- construction -------------------------------------------------------------


def test_make_model_and_errors():
    m = make_model("maier-stein", epsilon=0.2, beta=3.5)
    assert m.params() == {"epsilon": 0.2, "beta": 3.5}
    assert m.kind == "non-gradient"
    with pytest.raises(ValueError):
        make_model("nope")
    with pytest.raises(ValueError):
        QuadraticModel(-1.0)
    with pytest.raises(ValueError):
        MaierSteinModel(0.1, 0.0)
    with pytest.raises(ValueError):
        QuadraticModel().path_potential([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        LJClusterModel(grad_u="symbolic")
