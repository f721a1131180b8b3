import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from sklab import catalog, sk_verify
from sklab.catalog import HarmonicSpec
from sklab.errors import ModelOnlyError, OrderMismatchError
from sklab.field_core import AnnulusGrid, OneForm, ScalarField, gradient, hodge_star, linf, norm_sq
from sklab.singularity import estimate_order


def _sym_u_gradient(expr_in_r):
    x, y = sp.symbols("x y", real=True)
    e = expr_in_r(sp.sqrt(x**2 + y**2))
    return sp.lambdify((x, y), [e, sp.diff(e, x), sp.diff(e, y)], "numpy")


# -- connection ------------------------------------------------------------------------

def test_flat_case_connection_is_minus_half_du(grid):
    u = ScalarField(grid, 0.3 * grid.x + 0.1 * np.log(grid.R))
    conn = sk_verify.build_connection(HarmonicSpec.constant(2.0), u)
    du = gradient(u)
    for om in (conn.om11, conn.om22):
        np.testing.assert_array_equal(om.p, -0.5 * du.p)
        np.testing.assert_array_equal(om.q, -0.5 * du.q)


def test_trace_identity_is_exact_for_punctured_disc():
    m = catalog.get_metric("punctured_disc")
    g = m.grid(64)
    u = m.sample_u(g)
    conn = sk_verify.build_connection(m.h_spec, u)
    assert linf(conn.trace() + gradient(u)) < 1e-13 * linf(gradient(u))


def test_log_metric_connection_against_symbolic_oracle():
    m = catalog.get_metric("log_metric")
    f = _sym_u_gradient(lambda r: -sp.log(-sp.log(r)))
    errs = []
    for n in (64, 128):
        g = m.grid(n)
        conn = sk_verify.build_connection(m.h_spec, m.sample_u(g))
        u, ux, uy = (np.asarray(v, dtype=float) for v in f(g.x, g.y))
        eu = np.exp(u)
        # h = -log r, so dh = -(x, y)/r^2
        p = 0.5 * eu * (-g.x / g.R**2) - 0.5 * ux
        q = 0.5 * eu * (-g.y / g.R**2) - 0.5 * uy
        errs.append(max(linf(conn.om11.p - p), linf(conn.om11.q - q)))
    assert errs[1] < 1e-2 and errs[0] / errs[1] > 3.5


def test_log_metric_connection_matches_frozen_oracle(oracles):
    m = catalog.get_metric("log_metric")
    for row in oracles["metrics"]["log_metric"]:
        z = row["r"] * np.exp(1j * row["theta"])
        eu = np.exp(row["u"])
        dh = -np.array([z.real, z.imag]) / row["r"] ** 2
        assert 0.5 * eu * dh[0] - 0.5 * row["u_x"] == pytest.approx(row["om11_p"], rel=1e-12)
        assert 0.5 * eu * dh[1] - 0.5 * row["u_y"] == pytest.approx(row["om11_q"], rel=1e-12)
        assert float(m.u(z)) == pytest.approx(row["u"], rel=1e-13)


# -- flatness -----------------------------------------------------------------------------

@pytest.mark.parametrize("n", [16, 64, 200])
def test_flat_case_is_exactly_flat(n):
    g = AnnulusGrid(0.05, 0.5, n, n)
    conn = sk_verify.build_connection(HarmonicSpec.constant(1.0), ScalarField(g, 0.0))
    assert sk_verify.flatness_residual(conn) == 0.0


@pytest.mark.parametrize("name", ["punctured_disc", "log_metric", "disc", "conical(0.5)"])
def test_flatness_residual_decreases(name):
    m = catalog.get_metric(name)
    res = [sk_verify.flatness_residual(sk_verify.build_connection(m.h_spec, m.sample_u(m.grid(n))))
           for n in (64, 128)]
    assert res[0] / res[1] > 3.4


def test_flatness_detects_wrong_u():
    m = catalog.get_metric("punctured_disc")
    g = m.grid(128)
    good = sk_verify.flatness_residual(sk_verify.build_connection(m.h_spec, m.sample_u(g)))
    bad = sk_verify.flatness_residual(sk_verify.build_connection(m.h_spec, 1.1 * m.sample_u(g)))
    assert bad > 100 * good


# -- symmetry -------------------------------------------------------------------------------

def test_symmetry_holds_by_construction():
    m = catalog.get_metric("log_metric")
    conn = sk_verify.build_connection(m.h_spec, m.sample_u(m.grid(32)))
    assert sk_verify.symmetry_residual(conn) < 1e-12


def test_symmetry_detects_flipped_off_diagonal():
    m = catalog.get_metric("punctured_disc")
    conn = sk_verify.build_connection(m.h_spec, m.sample_u(m.grid(32)))
    broken = sk_verify.ConnectionForms(conn.om11, conn.om22, om12=hodge_star(conn.om11))
    assert sk_verify.symmetry_residual(broken) > 0.1


@given(st.integers(0, 2**32 - 1))
def test_random_connections_break_symmetry(seed):
    rng = np.random.default_rng(seed)
    g = AnnulusGrid(0.1, 1.0, 8, 8)
    forms = [OneForm(g, *rng.standard_normal((2, 8, 8))) for _ in range(4)]
    conn = sk_verify.ConnectionForms(*forms)
    assert sk_verify.symmetry_residual(conn) > 1e-3


# -- eta system ------------------------------------------------------------------------------

def test_eta_system_flat_case():
    g = AnnulusGrid(0.05, 0.5, 64, 64)
    res = sk_verify.check_eta_system(HarmonicSpec.constant(1.0), ScalarField(g, 0.0))
    assert max(res.values()) <= 1e-12


@pytest.mark.parametrize("name", ["log_metric", "punctured_disc"])
def test_eta_system_decay(name):
    m = catalog.get_metric(name)
    r = [sk_verify.check_eta_system(m, m.grid(n)) for n in (64, 128)]
    for key in ("codiff_eta", "laplace_u", "kazdan_warner"):
        assert r[0][key] / r[1][key] > 3.4, key
    assert r[1]["d_eta"] < 1e-9


def test_model_only_rejected():
    m = catalog.get_metric("picard_local(0.5)")
    with pytest.raises(ModelOnlyError):
        sk_verify.check_eta_system(m, m.grid(16))
    with pytest.raises(ModelOnlyError):
        sk_verify.refinement_study(m, levels=2, base_n=16)


def test_eta_system_rejects_non_finite_u(grid):
    with pytest.raises(ValueError):
        sk_verify.check_eta_system(HarmonicSpec.coordinate_x(), ScalarField(grid, np.nan))


# -- cubic form --------------------------------------------------------------------------------

def test_cubic_form_examples(grid):
    cf = sk_verify.cubic_form(HarmonicSpec.coordinate_x(), grid)
    np.testing.assert_allclose(cf.xi0.values, -0.25j)
    assert cf.order_estimate == 0
    cf = sk_verify.cubic_form(HarmonicSpec.log_abs(), grid)
    np.testing.assert_allclose(cf.xi0.values, -0.25j / grid.z, rtol=1e-14)
    assert cf.order_estimate == -1
    cf = sk_verify.cubic_form(HarmonicSpec.monomial(1), grid)
    np.testing.assert_allclose(cf.xi0.values, -0.5j * grid.z, rtol=1e-14)
    assert cf.order_estimate == 1


@pytest.mark.parametrize("name", sorted(catalog.harmonic_catalog()))
def test_cubic_form_identity_on_grid(name):
    spec = catalog.harmonic_catalog()[name]
    g = AnnulusGrid(0.01, 0.9, 40, 40)
    lhs = 16 * sk_verify.cubic_form(spec, g).xi0.abs_sq().values
    rhs = catalog.rho(spec, g).values
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


# -- curvature ---------------------------------------------------------------------------------

def test_curvature_of_flat_metric_is_zero(grid):
    assert linf(sk_verify.curvature(ScalarField(grid, 0.0))) == 0.0


def test_unit_disc_curvature_is_minus_one():
    # 4 (1 - |z|^2)^-2 |dz|^2 = e^{2u}|dz|^2 with u = log 2 - log(1 - r^2)
    errs = []
    for n in (64, 128):
        g = AnnulusGrid(0.05, 0.5, n, n)
        u = ScalarField(g, np.log(2.0) - np.log(1 - g.R**2))
        errs.append(linf(sk_verify.curvature(u) + 1.0))
    assert errs[1] < 1e-3 and errs[0] / errs[1] > 3.5


def test_curvature_sign_convention_for_g():
    g = AnnulusGrid(0.05, 0.5, 128, 128)
    u = ScalarField(g, 0.2 * np.log(g.R))  # harmonic u, so both metrics are flat
    assert linf(sk_verify.curvature(u, sign=-1)) < 1e-9
    with pytest.raises(ValueError):
        sk_verify.curvature(u, sign=0)


def test_log_metric_curvature_equals_minus_norm_of_eta_combination():
    m = catalog.get_metric("log_metric")
    errs = []
    for n in (64, 128):
        g = m.grid(n)
        u = m.sample_u(g)
        du = gradient(u)
        em = np.exp(-u.values)
        dh_p, dh_q = catalog.dh_components(m.h_spec, g.z, include_phi=False)
        eta_p, eta_q = 0.5 * (dh_p - em * du.p), 0.5 * (dh_q - em * du.q)
        combo = norm_sq(OneForm(g, 2 * eta_p + em * du.p, 2 * eta_q + em * du.q)).values
        errs.append(linf(sk_verify.curvature(u).values + combo))
    assert errs[0] / errs[1] > 3.5


# -- sandwich and order -------------------------------------------------------------------------

def test_sandwich_examples():
    g = AnnulusGrid(1e-3, 0.5, 64, 64)
    assert sk_verify.curvature_sandwich(HarmonicSpec.coordinate_x(), 0, g) == pytest.approx((1.0, 1.0))
    assert sk_verify.curvature_sandwich(HarmonicSpec.log_abs(), -1, g) == pytest.approx((1.0, 1.0))
    with pytest.raises(OrderMismatchError):
        sk_verify.curvature_sandwich(HarmonicSpec.monomial(1), 0, g)


def test_sandwich_c2_shrinks_with_r_in_for_wrong_order():
    spec = HarmonicSpec.monomial(1)
    c2s = [float((16 * np.abs(spec.xi0(r)) ** 2).min()) for r in (1e-1, 1e-2, 1e-3)]
    assert c2s[0] > c2s[1] > c2s[2]


@pytest.mark.parametrize("spec,n", [
    (HarmonicSpec.coordinate_x(), 0), (HarmonicSpec.log_abs(), -1),
    (HarmonicSpec.constant(0.0, a=1.0), -1), (HarmonicSpec.monomial(2), 2),
    (HarmonicSpec.monomial(-3, a=2.0), -3),
])
def test_estimate_order(spec, n):
    assert estimate_order(spec) == n
    g = AnnulusGrid(1e-3, 1e-1, 64, 64)
    assert estimate_order(sk_verify.cubic_form(spec, g)) == n


# -- refinement bookkeeping -------------------------------------------------------------------------

def test_fit_order_on_synthetic_errors():
    h = np.array([0.1, 0.05, 0.025])
    assert sk_verify.fit_order(h, 3 * h**2) == pytest.approx(2.0)
    assert sk_verify.fit_order(h, [1e-13, 3e-14, 5e-13]) is None
    assert sk_verify.is_rounding_level([1e-12, 0.0])
    assert not sk_verify.is_rounding_level([1e-3, 1e-12])


def test_refinement_study_flat_is_all_rounding_level():
    st_ = sk_verify.refinement_study(catalog.get_metric("flat"), levels=2, base_n=16)
    assert set(st_["rounding_level"]) == set(st_["orders"])
    assert all(v is None for v in st_["orders"].values())


def test_curvature_rounding_bound_covers_noise():
    g = AnnulusGrid(1e-6, 5e-2, 64, 16)
    u = ScalarField(g, np.log(g.R))  # harmonic: exact curvature is 0, computed value is pure rounding
    k = sk_verify.curvature(u).values[1:-1]
    bound = sk_verify.curvature_rounding_bound(u).values[1:-1]
    assert np.all(np.abs(k) <= bound)
    assert np.all(np.isnan(sk_verify.curvature_rounding_bound(u).values[[0, -1]]))
