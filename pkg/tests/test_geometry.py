import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_jacobiator, cot_bracket, fd, levi_civita_symbol, pi_matrix
from poisson_sprays import catalog
from poisson_sprays.exceptions import CapabilityError, DomainError, ShapeError
from poisson_sprays.geometry import (
    BivectorField,
    Chart,
    DerivativeStrategy,
    Field,
    ThreeForm,
    bracket_field,
    cotangent_bracket,
    covector_field,
    eval_bivector,
    jacobiator,
    lie_derivative_function,
    pairing,
    sharp,
)

SO3 = catalog.get("so3-star").bivector
PLANE = BivectorField.constant([[0.0, 1.0], [-1.0, 0.0]])
WITNESS = catalog.get("non-poisson-witness").bivector

finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)
vec3 = arrays(np.float64, 3, elements=finite)


def test_eval_examples():
    assert np.array_equal(eval_bivector(BivectorField.zero(3), [0.3, -1.0, 2.0]), np.zeros((3, 3)))
    np.testing.assert_array_equal(eval_bivector(SO3, [0, 0, 1]), [[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
    for x in ([0.0, 0.0], [5.0, -3.0]):
        np.testing.assert_array_equal(eval_bivector(PLANE, x), [[0, 1], [-1, 0]])


def test_eval_outside_domain_raises():
    with pytest.raises(DomainError):
        eval_bivector(SO3, [3.0, 0.0, 0.0])


def test_eval_antisymmetrizes_raw_components():
    raw = BivectorField(Chart(2), lambda x: np.array([[1.0, 3.0], [1.0, 2.0]]), None, None, "analytic")
    np.testing.assert_array_equal(raw.matrix([0.0, 0.0]), [[0.0, 1.0], [-1.0, 0.0]])


def test_sharp_examples():
    assert np.array_equal(sharp(BivectorField.zero(3), [0.1, 0.2, 0.3], [1.0, 2.0, 3.0]), np.zeros(3))
    np.testing.assert_array_equal(sharp(SO3, [0, 0, 1], [1, 0, 0]), [0, 1, 0])
    np.testing.assert_array_equal(sharp(PLANE, [0, 0], [0, 1]), [-1, 0])


def test_sharp_shape_error():
    with pytest.raises(ShapeError):
        sharp(SO3, [0, 0, 1], [1.0, 0.0])


def test_jacobiator_examples():
    assert np.all(jacobiator(PLANE, [0.4, 0.2]) == 0)
    assert jacobiator(WITNESS, [1.0, 1.0, 1.0])[0, 1, 2] == 3.0
    rng = np.random.default_rng(1)
    for x in rng.uniform(-1, 1, (100, 3)):
        assert np.max(np.abs(jacobiator(SO3, x))) == 0.0


def test_jacobiator_matches_brute_force_on_witness(rng):
    comps = {(0, 1): lambda x: x[0], (1, 2): lambda x: x[1], (0, 2): lambda x: -x[2]}
    for x in rng.uniform(-1, 1, (5, 3)):
        P = pi_matrix(comps, x)
        dP = fd(lambda z: pi_matrix(comps, z), x)
        np.testing.assert_allclose(jacobiator(WITNESS, x), brute_jacobiator(P, dP), atol=1e-9)
        # J^{123} = x1 + x2 + x3 for this bivector
        assert jacobiator(WITNESS, x)[0, 1, 2] == pytest.approx(x.sum(), abs=1e-14)


def test_jacobiator_needs_derivatives():
    pi = BivectorField(Chart(2), lambda x: np.zeros((2, 2)), None, None, "analytic")
    with pytest.raises(CapabilityError):
        jacobiator(pi, [0.0, 0.0])


@settings(max_examples=60, deadline=None)
@given(x=vec3, a=vec3, b=vec3)
def test_sharp_is_antisymmetric(x, a, b):
    for pi in (SO3, WITNESS, catalog.get("sl2-star").bivector):
        assert pairing(b, sharp(pi, x, a)) == pytest.approx(-pairing(a, sharp(pi, x, b)), abs=1e-12)
        P = eval_bivector(pi, x)
        assert np.array_equal(P, -P.T)


@settings(max_examples=40, deadline=None)
@given(x=vec3)
def test_jacobiator_fully_antisymmetric(x):
    J = jacobiator(WITNESS, x)
    assert np.array_equal(J, -np.swapaxes(J, 0, 1))
    assert np.array_equal(J, -np.swapaxes(J, 1, 2))
    assert np.array_equal(J, -np.swapaxes(J, 0, 2))


def test_pairing_examples():
    assert pairing([0.0, 0.0], [3.0, 4.0]) == 0.0
    assert pairing([1.0, 2.0], [3.0, 4.0]) == 11.0
    np.testing.assert_array_equal(pairing(np.eye(3)[:, None, :], np.eye(3)[None, :, :]), np.eye(3))
    with pytest.raises(ShapeError):
        pairing([1.0], [1.0, 2.0])


def test_bracket_of_coordinate_forms_is_d_pi():
    x = np.array([0.3, -0.4, 0.5])
    for i in range(3):
        for j in range(3):
            got = cotangent_bracket(SO3, covector_field(np.eye(3)[i]), covector_field(np.eye(3)[j]), x)
            np.testing.assert_allclose(got, SO3.derivative(x)[i, j], atol=1e-15)


def test_bracket_trivial_cases(rng):
    a, b = covector_field(rng.standard_normal(3)), covector_field(rng.standard_normal(3))
    assert np.all(cotangent_bracket(BivectorField.zero(3), a, b, [0.1, 0.2, 0.3]) == 0)
    a2, b2 = covector_field([1.0, 2.0]), covector_field([-0.5, 0.3])
    assert np.all(cotangent_bracket(PLANE, a2, b2, [0.7, 0.1]) == 0)


def test_bracket_matches_fd_oracle(poly_fixture, rng):
    _, pi, comps = poly_fixture
    n = pi.dim
    Pf = lambda z: pi_matrix(comps, z)
    K1, K2 = rng.standard_normal((2, n, n))
    c1, c2 = rng.standard_normal((2, n))
    af = lambda z: c1 + K1 @ z + 0.3 * z**2
    bf = lambda z: c2 + K2 @ z
    alpha = Field(af, lambda z: K1 + np.diag(0.6 * z))
    beta = Field(bf, lambda z: K2)
    x = rng.uniform(-0.5, 0.5, n)
    np.testing.assert_allclose(cotangent_bracket(pi, alpha, beta, x), cot_bracket(Pf, af, bf, x), atol=1e-8)


def test_leibniz_identity(rng):
    # [a, f b] = f [a, b] + L_a(f) b, f polynomial, a and b constant
    x = np.array([0.2, -0.3, 0.4])
    c = rng.standard_normal(3)
    f = lambda z: 1.0 + z[0] * z[1] - 0.5 * z[2] ** 3
    grad_f = lambda z: np.array([z[1], z[0], -1.5 * z[2] ** 2])
    a, bvec = rng.standard_normal((2, 3))
    alpha = covector_field(a)
    fb = Field(lambda z: f(z) * bvec, lambda z: np.outer(bvec, grad_f(z)))
    for pi in (SO3, WITNESS):
        lhs = cotangent_bracket(pi, alpha, fb, x)
        rhs = f(x) * cotangent_bracket(pi, alpha, covector_field(bvec), x) + lie_derivative_function(pi, alpha, grad_f(x), x) * bvec
        np.testing.assert_allclose(lhs, rhs, atol=1e-13)
    del c


def _bracket_jacobi(pi, forms, x):
    a, b, c = forms
    total = np.zeros(pi.dim)
    for p, q, r in ((a, b, c), (b, c, a), (c, a, b)):
        total += cotangent_bracket(pi, p, bracket_field(pi, q, r), x)
    return np.max(np.abs(total))


@pytest.mark.parametrize("name", ["so3-star", "sl2-star", "heisenberg", "quadratic"])
def test_bracket_jacobi_identity_analytic(name, rng):
    pi = catalog.get(name).bivector
    n = pi.dim
    for _ in range(5):
        forms = [covector_field(v) for v in rng.standard_normal((3, n))]
        assert _bracket_jacobi(pi, forms, rng.uniform(-0.8, 0.8, n)) <= 1e-9


def test_bracket_jacobi_identity_fd_mode(rng):
    eps = levi_civita_symbol()
    pi = BivectorField.from_callable(lambda x: np.einsum("ijk,...k->...ij", eps, x), Chart(3, 2.0))
    assert pi.provenance == "finite-difference"
    for _ in range(3):
        forms = [covector_field(v) for v in rng.standard_normal((3, 3))]
        assert _bracket_jacobi(pi, forms, rng.uniform(-0.8, 0.8, 3)) <= 1e-6


def test_bracket_jacobi_fails_for_witness(rng):
    forms = [covector_field(np.eye(3)[i]) for i in range(3)]
    assert _bracket_jacobi(WITNESS, forms, np.ones(3)) > 1e-3


@pytest.mark.parametrize("name", catalog.names())
def test_catalog_derivatives_match_central_differences(name):
    pi = catalog.get(name).bivector
    h = 1e-5
    rng = np.random.default_rng(3)
    for x in rng.uniform(-0.5, 0.5, (5, pi.dim)):
        num = np.stack([(pi.matrix(x + h * e) - pi.matrix(x - h * e)) / (2 * h) for e in np.eye(pi.dim)], axis=-1)
        scale = 1.0 + np.max(np.abs(pi.second_derivative(x)))
        assert np.max(np.abs(num - pi.derivative(x))) <= 10 * h**2 * scale + 1e-10


def test_derivative_strategies_agree():
    eps = levi_civita_symbol()

    def comp(x):
        return [[sum(eps[i, j, k] * x[k] for k in range(3)) for j in range(3)] for i in range(3)]

    x = np.array([0.1, -0.2, 0.3])
    dual_pi = BivectorField.from_callable(comp, Chart(3, 2.0), DerivativeStrategy("dual-number"))
    fd_pi = BivectorField.from_callable(lambda z: np.einsum("ijk,...k->...ij", eps, z), Chart(3, 2.0))
    np.testing.assert_allclose(dual_pi.matrix(x), SO3.matrix(x), atol=1e-15)
    np.testing.assert_allclose(dual_pi.derivative(x), SO3.derivative(x), atol=1e-15)
    np.testing.assert_allclose(fd_pi.derivative(x), SO3.derivative(x), atol=1e-9)
    with pytest.raises(CapabilityError):
        BivectorField.from_callable(comp, Chart(3), DerivativeStrategy("analytic-callback"))
    with pytest.raises(ValueError):
        DerivativeStrategy("central-difference", h=0.0)


def test_polynomial_input_completes_antisymmetry():
    terms = [{"i": 1, "j": 2, "exponents": [1, 0], "coefficient": 2.0}]
    pi = BivectorField.polynomial(terms, 2)
    np.testing.assert_array_equal(pi.matrix([0.5, 0.0]), [[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_array_equal(pi.derivative([0.5, 0.0])[:, :, 0], [[0.0, 2.0], [-2.0, 0.0]])


def test_polynomial_matches_catalog_so3():
    terms = [
        {"i": 1, "j": 2, "exponents": [0, 0, 1], "coefficient": 1.0},
        {"i": 2, "j": 3, "exponents": [1, 0, 0], "coefficient": 1.0},
        {"i": 3, "j": 1, "exponents": [0, 1, 0], "coefficient": 1.0},
    ]
    pi = BivectorField.polynomial(terms, 3)
    x = np.array([0.3, -0.7, 1.1])
    np.testing.assert_array_equal(pi.matrix(x), SO3.matrix(x))
    np.testing.assert_array_equal(pi.derivative(x), SO3.derivative(x))


@pytest.mark.parametrize(
    "bad",
    [
        [{"i": 0, "j": 1, "exponents": [0, 0], "coefficient": 1.0}],
        [{"i": 1, "j": 1, "exponents": [0, 0], "coefficient": 1.0}],
        [{"i": 1, "j": 2, "exponents": [0], "coefficient": 1.0}],
    ],
)
def test_polynomial_rejects_malformed_terms(bad):
    with pytest.raises(ValueError):
        BivectorField.polynomial(bad, 2)


def test_three_form_is_antisymmetric():
    s = ThreeForm.from_entries(4, [{"i": 1, "j": 2, "k": 3, "value": 1.5}])
    S = s(np.zeros(4))
    assert S[0, 1, 2] == 1.5 and S[2, 1, 0] == -1.5 and S[1, 2, 0] == 1.5
    assert np.array_equal(S, -np.swapaxes(S, 0, 1))
