
import numpy as np
import pytest

from magdirac import dirac_energy as de
from magdirac import kernels
from magdirac.errors import AccuracyError, InvalidInputError, SymmetryError
from magdirac.kernels import ModelParams
from magdirac.specfun import make_rule

P = ModelParams(4.0, 0.1, 1.0)
C = de.gaussian_cutoffs(0.25)
# frozen from the radial reduction (Laguerre |e|^2 times the cutoff pair correlation)
RADIAL_REF = {0.5: 2.825305226493718, 1.0: 9.045015681978187, 1.5: 40.9513547169521}


def const_kernel(c):
    return lambda X, Y: np.full(len(X), c, dtype=complex)


def tensor_spec(order=64):
    rule = make_rule("gauss_legendre", order)
    return de.QuadratureSpec(rule, make_rule("tanh_sinh", 48), 0.1, 16)


def test_plain_weight_constant_kernel_unit_square():
    c = 1.7
    got = de.dirac_energy(const_kernel(c), de.plain_weight(), de.box_cutoffs(), tensor_spec())
    assert got == pytest.approx(c * c, rel=1e-12)


def test_radial_constant_mode_matches_closed_form():
    for kappa in (0.5, 1.0, 1.5):
        got = de.radial_dirac_energy(P, de.power_weight(kappa), de.gaussian_cutoffs(0.25, trunc=10),
                                     radial_kernel=lambda s: np.ones_like(s))
        assert got == pytest.approx(de.gaussian_pair_closed_form(0.25, kappa), rel=1e-6)


def test_polar_pipeline_constant_kernel_matches_closed_form():
    c = de.gaussian_cutoffs(0.25, trunc=10)
    q = de.QuadratureSpec(make_rule("gauss_legendre", 64), make_rule("tanh_sinh", 64), c.support_radius / 4, 32,
                          make_rule("gauss_legendre", 64), "polar")
    got = de.dirac_energy(const_kernel(1.0), de.power_weight(1.0), c, q)
    assert got == pytest.approx(de.gaussian_pair_closed_form(0.25, 1.0), rel=1e-5)


def test_four_dimensional_brute_force_oracle():
    # low-order 4-D Gauss-Legendre on a regular weight (kappa = 0): no singularity to resolve
    c = de.gaussian_cutoffs(0.3, trunc=6)
    x, w = make_rule("gauss_legendre", 24).on_interval(-1.8, 1.8)
    P2 = np.array([(a, b) for a in x for b in x])
    W2 = np.outer(w, w).ravel()
    psi = c.psi1(P2)
    e = lambda X, Y: np.exp(-np.sum((X - Y) ** 2, 1)).astype(complex)  # noqa: E731
    brute = 0.0
    for i in range(len(P2)):
        brute += W2[i] * psi[i] * np.sum(W2 * psi * np.abs(e(np.repeat(P2[i:i + 1], len(P2), 0), P2)) ** 2)
    got = de.dirac_energy(e, de.plain_weight(), c, de.QuadratureSpec(make_rule("gauss_legendre", 48),
                                                                       make_rule("tanh_sinh", 32), 0.4))
    assert got == pytest.approx(brute, rel=1e-6)


def test_cross_path_kappa_one():
    q = de.model_spec(P, C)
    got = de.dirac_energy(kernels.LaguerreKernel(P), de.power_weight(1.0), C, q)
    ref = de.radial_dirac_energy(P, de.power_weight(1.0), C)
    assert got == pytest.approx(ref, rel=1e-3)
    assert ref == pytest.approx(RADIAL_REF[1.0], rel=1e-9)


def test_gauge_invariance_and_positivity():
    rng = np.random.default_rng(5)
    a, b, c0 = rng.normal(size=3)
    theta = lambda X: a * np.sin(3 * X[:, 0]) + b * X[:, 1] ** 2 + c0 * X[:, 0] * X[:, 1]  # noqa: E731
    base = kernels.LaguerreKernel(P)
    twisted = lambda X, Y: np.exp(1j * (theta(X) - theta(Y))) * base(X, Y)  # noqa: E731
    q = de.model_spec(P, C)
    w = de.power_weight(0.5)
    i0 = de.dirac_energy(base, w, C, q, check=False)
    i1 = de.dirac_energy(twisted, w, C, q, check=False)
    assert abs(i1 - i0) <= 1e-10 * abs(i0)
    assert i0 > 0


def test_hermite_route_and_field_input_agree():
    c = de.gaussian_cutoffs(0.15)
    p = ModelParams(4.0, 0.2, 1.0)
    q = de.model_spec(p, c, outer_order=16, angular_order=16, far_order=32)
    w = de.power_weight(1.0)
    a = de.dirac_energy(kernels.ModelKernel(p), w, c, q, check=False)
    b = de.dirac_energy(kernels.LaguerreKernel(p), w, c, q, check=False)
    assert a == pytest.approx(b, rel=1e-9)
    X, Y = de.request_pairs(c, q)
    field = kernels.kernel_pairs_field(p, X, Y)
    assert de.dirac_energy(field, w, c, q, check=False) == pytest.approx(a, rel=1e-12)


def test_kappa_ordering_agrees_between_paths():
    # |x - y| < 1 on the support, so |x - y|^-kappa and hence I grow with kappa
    kappas = [0.25, 0.75, 1.25, 1.75]
    q = de.model_spec(P, C)
    direct = de.dirac_energy_multi(kernels.LaguerreKernel(P), [de.power_weight(k) for k in kappas], C, q,
                                   check=False)
    radial = [de.radial_dirac_energy(P, de.power_weight(k), C, check=False) for k in kappas]
    assert list(np.argsort(direct)) == list(np.argsort(radial))
    assert np.all(np.diff(direct) > 0)


def test_zero_cutoff_gives_zero():
    zero = de.CutoffPair(lambda X: np.zeros(len(X)), C.psi2, C.support_radius)
    q = de.model_spec(P, zero)
    assert de.dirac_energy(kernels.LaguerreKernel(P), de.power_weight(1.0), zero, q) == 0.0
    assert de.radial_dirac_energy(P, de.power_weight(1.0), zero) == 0.0
    assert de.weyl_reference(1.0, 0.1, 0.0, np.eye(2), de.power_weight(1.0), zero) == 0.0


def test_weyl_reference_scaling():
    w = de.power_weight(0.5)
    # h well below the cutoff width, where the leading order h^(-2-kappa) dominates
    hs = [0.05, 0.025, 0.0125]
    vals = [de.weyl_reference(1.0, h, 0.0, np.eye(2), w, C, check=False) for h in hs]
    slope = np.polyfit(np.log(hs), np.log(vals), 1)[0]
    assert slope == pytest.approx(-2.5, abs=0.1)


@pytest.mark.parametrize("h", [0.2, 0.1])
def test_weyl_reference_equals_pipeline_with_weyl_kernel(h):
    w = de.power_weight(1.0)
    q = de.weyl_spec(1.0, h, C)
    a = de.weyl_reference(1.0, h, 0.0, np.eye(2), w, C, q)
    b = de.dirac_energy(kernels.WeylKernel(1.0, h), w, C, q)
    assert a == pytest.approx(b, rel=1e-6)


def test_symmetry_violation_detected():
    e = lambda X, Y: np.exp(1j * (X[:, 0] + Y[:, 0] + 0.7))  # noqa: E731  not hermitian
    with pytest.raises(SymmetryError):
        de.dirac_energy(e, de.power_weight(0.5), C, de.model_spec(P, C), check=False)


def test_refinement_failure_detected():
    e = lambda X, Y: np.cos(80 * np.hypot(*(X - Y).T)).astype(complex)  # noqa: E731
    q = de.QuadratureSpec(make_rule("gauss_legendre", 12), make_rule("tanh_sinh", 8), 0.5, 4,
                          make_rule("gauss_legendre", 8), "polar")
    with pytest.raises(AccuracyError):
        de.dirac_energy(e, de.power_weight(0.5), C, q)


def test_weight_validation():
    with pytest.raises(InvalidInputError):
        de.power_weight(2.0)
    with pytest.raises(InvalidInputError):
        de.SingularWeight(1.0, lambda X, Y, Z: np.hypot(*Z.T) ** -0.5)
    aniso = de.SingularWeight(1.0, lambda X, Y, Z: (1 + 0.5 * Z[:, 0] ** 2 / np.sum(Z**2, 1)) / np.hypot(*Z.T))
    assert aniso.homogeneity_checked
    with pytest.raises(InvalidInputError):
        de.radial_dirac_energy(P, aniso, C)
    with pytest.raises(InvalidInputError):
        de.radial_dirac_energy(ModelParams(4, 0.1, 1, v=0.1), de.power_weight(1.0), C)
