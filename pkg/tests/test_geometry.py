import numpy as np
import pytest

from finslerkit import geometry, jets, metrics
from finslerkit.geometry import GeometryFrame, TangentSample, _values
from finslerkit.jets import JetError
from finslerkit.metrics import domain_sample, parse_metric_dsl

import oracles as oc


def sample_of(model, seed=3, k=0):
    x, y = domain_sample(model, k + 1, seed=seed)
    return TangentSample.of(x[k], y[k])


# -- fundamental tensor -----------------------------------------------------


def test_fundamental_tensor_euclidean(zoo):
    s = sample_of(zoo["euclid3"])
    g = geometry.fundamental_tensor(zoo["euclid3"], s)
    assert g.components == pytest.approx(np.eye(3), abs=1e-14)
    assert g.signature == "dd"


def test_fundamental_tensor_randers_frozen(zoo):
    s = TangentSample.of([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    g = geometry.fundamental_tensor(zoo["mink3"], s)
    assert g.components == pytest.approx(np.diag([2.25, 1.5, 1.5]), abs=1e-12)


def test_inverse_fundamental(zoo):
    for name in ("mink3", "funk3", "randers3"):
        s = sample_of(zoo[name])
        g = geometry.fundamental_tensor(zoo[name], s).components
        ginv = geometry.inverse_fundamental(zoo[name], s).components
        assert ginv @ g == pytest.approx(np.eye(3), abs=1e-10)


def test_metric_contracts_to_L(zoo):
    for m in zoo.values():
        s = sample_of(m, seed=11)
        g = geometry.fundamental_tensor(m, s).components
        assert s.y @ g @ s.y == pytest.approx(m.value(s.x, s.y), rel=1e-12)


# -- Cartan -------------------------------------------------------------------


def test_cartan_vanishes_for_riemannian(zoo):
    for name in ("euclid3", "sphere3", "torus3"):
        s = sample_of(zoo[name])
        C = geometry.cartan(zoo[name], s)
        assert np.max(np.abs(C.components)) < 1e-12


def test_cartan_randers_contraction(zoo):
    s = TangentSample.of([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    C = geometry.cartan(zoo["mink3"], s)
    assert C.components[0, 0, 0] == pytest.approx(0.0, abs=1e-12)
    assert np.max(np.abs(np.einsum("ijk,k->ij", C.components, s.y))) < 1e-10


def test_cartan_homogeneity(zoo):
    m = zoo["funk3"]
    s = sample_of(m)
    C1 = geometry.cartan(m, s).components
    C2 = geometry.cartan(m, TangentSample.of(s.x, 2 * s.y)).components
    assert C2 == pytest.approx(0.5 * C1, rel=1e-9)


# -- Hilbert form ----------------------------------------------------------------


def test_hilbert_form_euclidean(zoo):
    s = TangentSample.of([0.1, 0.2, 0.3], [0.6, 0.8, 0.0])
    om = geometry.hilbert_form(zoo["euclid3"], s)
    assert om.components == pytest.approx(s.y, abs=1e-13)


def test_hilbert_form_properties(zoo):
    for name in ("funk3", "randers3", "sphere3"):
        m = zoo[name]
        s = sample_of(m, seed=7)
        om = geometry.hilbert_form(m, s).components
        om2 = geometry.hilbert_form(m, TangentSample.of(s.x, 2 * s.y)).components
        F = np.sqrt(m.value(s.x, s.y))
        ginv = geometry.inverse_fundamental(m, s).components
        assert om2 == pytest.approx(om, rel=1e-10)
        assert om @ s.y == pytest.approx(F, rel=1e-12)
        assert om @ ginv @ om == pytest.approx(1.0, rel=1e-10)


# -- spray and connection -----------------------------------------------------------


def test_spray_vanishes_without_x_dependence(zoo):
    s = sample_of(zoo["mink3"])
    G = geometry.spray(zoo["mink3"], s)
    assert np.max(np.abs(G.components)) < 1e-12


def test_spray_conformal_frozen():
    # e^{2 x1} |y|^2 at x=0, y=(0,1): G^1 = -0.5 (Levi-Civita oracle
    # Gamma^1_22 = -d_1 phi with phi = x1)
    m = parse_metric_dsl("exp(2*x1)*(y1^2+y2^2)", 2, name="conf")
    G = geometry.spray(m, TangentSample.of([0.0, 0.0], [0.0, 1.0]))
    assert G.components == pytest.approx([-0.5, 0.0], abs=1e-12)


def test_spray_homogeneity(zoo):
    m = zoo["funk3"]
    s = sample_of(m)
    G1 = geometry.spray(m, s).components
    G2 = geometry.spray(m, TangentSample.of(s.x, 2 * s.y)).components
    assert G2 == pytest.approx(4.0 * G1, rel=1e-10)


def test_spray_matches_printed_formula_oracle(zoo):
    for name in ("funk3", "randers3", "torus3"):
        m = zoo[name]
        X, Y = domain_sample(m, 5, seed=23)
        ad = _values(GeometryFrame(m, X, Y, 3).spray)
        fd = oc.oracle_spray(m, X, Y)
        assert fd == pytest.approx(ad, rel=1e-6, abs=1e-8)


def test_christoffel_euclidean_zero(zoo):
    s = sample_of(zoo["euclid3"])
    Gam = geometry.chern_christoffel(zoo["euclid3"], s)
    assert np.max(np.abs(Gam.components)) < 1e-13


def test_christoffel_sphere_matches_levi_civita(zoo):
    m = zoo["sphere3"]
    X = np.array([[0.2, -0.1, 0.4], [0.0, 0.3, -0.2]])
    lc = oc.oracle_levi_civita(m, X)
    fr = GeometryFrame(m, X, np.full((2, 3), 1 / np.sqrt(3)), 4)
    assert np.max(np.abs(lc - _values(fr.christoffel))) < 1e-8


def test_christoffel_reproduces_spray(zoo):
    for name in ("funk3", "randers3", "sphere3", "torus3"):
        m = zoo[name]
        s = sample_of(m, seed=29)
        Gam = geometry.chern_christoffel(m, s).components
        G = geometry.spray(m, s).components
        assert np.einsum("ijk,j,k->i", Gam, s.y, s.y) == pytest.approx(
            2.0 * G, rel=1e-9, abs=1e-9
        )


# -- Chern derivative ----------------------------------------------------------------


def test_metric_compatibility(zoo):
    for m in zoo.values():
        s = sample_of(m, seed=31)
        bundle = geometry.chern_derivative(m, s, lambda fr: fr.g, "dd")
        assert np.max(np.abs(bundle.horizontal.components)) < 1e-9
        assert np.max(np.abs(bundle.dynamical.components)) < 1e-9


def test_lagrangian_parallel(zoo):
    for name in ("funk3", "randers3", "torus3"):
        m = zoo[name]
        s = sample_of(m, seed=37)
        bundle = geometry.chern_derivative(m, s, lambda fr: fr.L, "")
        assert abs(bundle.dynamical.components) < 1e-9 * (1 + m.value(s.x, s.y))


def test_scalar_without_y_dependence(zoo):
    m = zoo["funk3"]
    s = sample_of(m)
    bundle = geometry.chern_derivative(m, s, lambda fr: fr.x_jets[0], "")
    assert bundle.horizontal.components == pytest.approx([1.0, 0.0, 0.0], abs=1e-12)


def test_derivative_bundle_dynamical_is_y_contraction(zoo):
    m = zoo["randers3"]
    s = sample_of(m)
    bundle = geometry.chern_derivative(m, s, lambda fr: fr.mean_landsberg, "d")
    contracted = np.einsum("ij,j->i", bundle.horizontal.components, s.y)
    assert bundle.dynamical.components == pytest.approx(contracted, rel=1e-11, abs=1e-13)


# -- Landsberg --------------------------------------------------------------------------


def test_landsberg_riemannian_zero(zoo):
    for name in ("euclid3", "sphere3", "torus3"):
        s = sample_of(zoo[name])
        P = geometry.landsberg(zoo[name], s)
        assert np.max(np.abs(P.components)) < 1e-9


def test_landsberg_minkowski_zero(zoo):
    s = sample_of(zoo["mink3"])
    P = geometry.landsberg(zoo["mink3"], s)
    assert np.max(np.abs(P.components)) < 1e-10


def test_mean_landsberg_randers_nonzero(zoo):
    # generic non-Berwald Randers: the mean Landsberg form must show up
    m = zoo["randers3"]
    X, Y = domain_sample(m, 10, seed=41)
    fr = GeometryFrame(m, X, Y, 4)
    vals = np.abs(_values(fr.mean_landsberg))
    assert np.max(vals) > 1e-3
    fd = oc.oracle_mean_landsberg(m, X, Y)
    assert fd == pytest.approx(_values(fr.mean_landsberg), rel=1e-5, abs=1e-6)


def test_landsberg_full_symmetry(zoo):
    m = zoo["randers3"]
    s = sample_of(m, seed=43)
    P = geometry.landsberg(m, s).components
    assert P == pytest.approx(np.transpose(P, (1, 0, 2)), abs=1e-10)
    assert P == pytest.approx(np.transpose(P, (2, 1, 0)), abs=1e-10)
    # trace definition agrees with the direct formula through full symmetry
    fr = GeometryFrame(m, s.x, s.y, 4)
    direct = np.array(
        [
            sum(fr.berwald[a, a, i].value() for a in range(3))
            - sum(fr.christoffel[a, a, i].value() for a in range(3))
            for i in range(3)
        ]
    )
    assert _values(fr.mean_landsberg) == pytest.approx(direct, rel=1e-9, abs=1e-11)


# -- Ricci ---------------------------------------------------------------------------------


def test_ricci_flat_models(zoo):
    for name in ("euclid3", "mink3"):
        s = sample_of(zoo[name])
        ric = geometry.ricci_scalar(zoo[name], s)
        assert abs(ric.components) < 1e-12


def test_ricci_sphere_constant_curvature(zoo):
    # unit round 3-sphere: Ric = 2 F^2 (Riemannian Ricci oracle: ric = (n-1) g)
    m = zoo["sphere3"]
    X, Y = domain_sample(m, 20, seed=47)
    fr = GeometryFrame(m, X, Y, 5)
    ratio = fr.ricci.value() / fr.L.value()
    assert np.max(np.abs(ratio - 2.0)) < 1e-7


def test_ricci_homogeneity(zoo):
    m = zoo["funk3"]
    s = sample_of(m)
    r1 = geometry.ricci_scalar(m, s).components
    r2 = geometry.ricci_scalar(m, TangentSample.of(s.x, 2 * s.y)).components
    assert r2 == pytest.approx(4.0 * r1, rel=1e-10)


def test_ricci_matches_oracle(zoo):
    for name in ("funk3", "randers3", "sphere3"):
        m = zoo[name]
        X, Y = domain_sample(m, 5, seed=53)
        fr = GeometryFrame(m, X, Y, 5)
        fd = oc.oracle_ricci(m, X, Y)
        assert fd == pytest.approx(fr.ricci.value(), rel=1e-5, abs=1e-6)


# -- pfrak and the Schur scalars ---------------------------------------------------------


def test_pfrak_riemannian_and_minkowski_zero(zoo):
    for name in ("euclid3", "sphere3", "torus3", "mink3"):
        s = sample_of(zoo[name])
        assert abs(geometry.pfrak(zoo[name], s).components) < 1e-8
        assert abs(geometry.pfrak_dyn(zoo[name], s).components) < 1e-8


def test_pfrak_funk2_nonzero_with_fd_confirmation(zoo):
    m = zoo["funk2"]
    X = np.array([[0.3, 0.0]])
    Y = np.array([[1.0, 0.0]])
    s = TangentSample.of(X[0], Y[0])
    val = geometry.pfrak(m, s).components
    assert abs(val) > 1e-4
    # finite-difference recomputation at two step sizes brackets the value
    fd1 = oc.oracle_pfrak(m, X, Y, h=0.02)[0]
    fd2 = oc.oracle_pfrak(m, X, Y, h=0.01)[0]
    assert fd1 == pytest.approx(val, rel=1e-4)
    assert fd2 == pytest.approx(val, rel=1e-4)
    assert abs(fd2 - val) <= abs(fd1 - val) + 1e-10


def test_schur_variants_zero_on_weakly_landsberg(zoo):
    for name in ("euclid3", "sphere3", "torus3", "mink3"):
        s = sample_of(zoo[name])
        for variant in ("as_printed", "as_expanded"):
            v = geometry.schur_corollary_scalar(zoo[name], s, variant).components
            assert abs(v) < 1e-8


def test_schur_variants_differ_on_funk(zoo):
    # the printed condition and the expanded dynamical derivative disagree
    # by twice the last term; funk makes the gap visible
    m = zoo["funk2"]
    s = TangentSample.of([0.3, 0.0], [1.0, 0.0])
    printed = geometry.schur_corollary_scalar(m, s, "as_printed").components
    expanded = geometry.schur_corollary_scalar(m, s, "as_expanded").components
    assert abs(expanded) < 1e-8
    assert abs(printed - expanded) > 1e-3


def test_identity1_rhs_fold(zoo):
    # g^{ab}_{|0} = 0 makes the traced and untraced dynamical derivative agree
    m = zoo["randers3"]
    s = sample_of(m, seed=59)
    fr = GeometryFrame(m, s.x, s.y, 7)
    assert fr.identity1_rhs_unfolded().value() == pytest.approx(
        fr.pfrak_dyn.value(), rel=1e-10, abs=1e-12
    )


# -- quadraticity and Bianchi -----------------------------------------------------------


def test_quadratic_ric_riemannian(zoo):
    m = zoo["sphere3"]
    x = np.array([0.2, -0.1, 0.4])
    dirs = np.array(
        [[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0], [0.6, 0.8, 0], [0.3, -0.5, 0.7], [-0.2, 0.4, 0.6]]
    )
    res = geometry.quadratic_ric_test(m, x, dirs)
    assert res["is_quadratic"]
    assert res["max_deviation"] < 1e-9
    ric = oc.oracle_riemannian_ricci(m, x[None])[0]
    assert res["h"] == pytest.approx(ric, rel=1e-5, abs=1e-6)


def test_quadratic_ric_euclidean_zero(zoo):
    res = geometry.quadratic_ric_test(zoo["euclid3"], np.zeros(3), np.eye(3) + 0.1)
    assert res["is_quadratic"]
    assert res["h"] == pytest.approx(np.zeros((3, 3)), abs=1e-12)


def test_quadratic_ric_funk_fails(zoo):
    from finslerkit.identities import default_directions

    res = geometry.quadratic_ric_test(
        zoo["funk2"], np.array([0.3, 0.0]), default_directions(2, 10)
    )
    assert not res["is_quadratic"]
    assert res["max_deviation"] > 1e-3


def test_quadratic_ric_needs_directions(zoo):
    with pytest.raises(ValueError):
        geometry.quadratic_ric_test(zoo["euclid3"], np.zeros(3), np.eye(3)[:1])


def test_bianchi_euclidean_exact(zoo):
    res = geometry.contracted_bianchi_riemannian(zoo["euclid3"], np.zeros(3))
    assert np.max(np.abs(res)) == 0.0


def test_bianchi_sphere(zoo):
    m = zoo["sphere3"]
    rng = np.random.default_rng(61)
    for _ in range(10):
        x = rng.uniform(-0.7, 0.7, size=3)
        res = geometry.contracted_bianchi_riemannian(m, x)
        assert np.max(np.abs(res)) < 1e-6


def test_bianchi_torus_non_einstein(zoo):
    # the identity is unconditional, Einstein or not
    m = zoo["torus3"]
    res = geometry.contracted_bianchi_riemannian(m, np.array([0.5, 1.0, 2.0]))
    assert np.max(np.abs(res)) < 1e-6
    div = oc.oracle_einstein_divergence(m, np.array([[0.5, 1.0, 2.0]]))
    assert np.max(np.abs(div)) < 1e-6


def test_bianchi_refuses_non_riemannian(zoo):
    with pytest.raises(ValueError):
        geometry.contracted_bianchi_riemannian(zoo["funk3"], np.zeros(3))


# -- order budget and singularity policy ------------------------------------------------


def test_order_budget_enforced(zoo):
    m = zoo["funk3"]
    s = sample_of(m)
    with pytest.raises(JetError):
        geometry.pfrak_dyn(m, s, order=6)
    with pytest.raises(JetError):
        geometry.ricci_scalar(m, s, order=4)


def test_singular_metric_raises():
    # (y1 + y2)^2 has a rank-one vertical Hessian
    m = parse_metric_dsl("(y1 + y2)^2", 2, validate=False)
    fr = GeometryFrame(m, np.zeros(2), np.array([1.0, 0.5]), 2)
    with pytest.raises(JetError):
        _ = fr.g_inv


def test_indefinite_metric_weight_refused():
    m = parse_metric_dsl("y1^2 - y2^2", 2, positive_definite=False, validate=False)
    fr = GeometryFrame(m, np.zeros(2), np.array([2.0, 1.0]), 2)
    with pytest.raises(JetError):
        fr.fiber_weight()
