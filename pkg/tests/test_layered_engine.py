import math

import numpy as np
import pytest
from scipy.integrate import quad

from casimir_contrast import (BranchViolation, DielectricModel, DomainError, GridTooCoarse, Layer, LayeredScenario,
                              PlanarScenario, QuadratureSpec, build_mode_matrix, convergence_report,
                              interaction_logdet, interaction_series, l_kernel_energy, mixed_green,
                              taylor_in_contrast, trace_powers)
from casimir_contrast.layered_engine import node_quantities

from conftest import rel

VAC = DielectricModel.vacuum()


# -- kernel ----------------------------------------------------------------------

def test_mixed_green_q_zero_is_diagonal():
    w, dz = 1.3, 0.4
    g = mixed_green(w, 0.0, dz).smooth
    e = w * math.exp(-w * dz) / 2
    assert g[0, 0] == pytest.approx(e) and g[1, 1] == pytest.approx(e)
    assert g[2, 2] == 0 and np.count_nonzero(g - np.diag(np.diag(g))) == 0


@pytest.mark.parametrize("w, q, dz", [(1.0, 0.5, 0.3), (0.4, 2.0, 1.1), (2.0, 1.0, -0.7)])
def test_mixed_green_against_fourier_transform(w, q, dz):
    kap2 = w * w + q * q
    a = abs(dz)
    # non-contact parts of (w^2 delta_ij + q_i q_j) / (kappa^2 + k^2), q = (q, 0, k)
    cos_ft = lambda f: quad(f, 0, np.inf, weight="cos", wvar=a, epsabs=1e-11)[0] / math.pi
    sin_ft = lambda f: quad(f, 0, np.inf, weight="sin", wvar=a, epsabs=1e-11)[0] / math.pi
    ref_xx = cos_ft(lambda k: kap2 / (kap2 + k * k))
    ref_yy = cos_ft(lambda k: w * w / (kap2 + k * k))
    ref_zz = cos_ft(lambda k: (w * w + k * k) / (kap2 + k * k) - 1)
    ref_xz = math.copysign(1, dz) * sin_ft(lambda k: q * k / (kap2 + k * k))
    g = mixed_green(w, q, dz)
    assert g.contact_zz == 1.0
    assert g.smooth[0, 0].real == pytest.approx(ref_xx, abs=1e-8)
    assert g.smooth[1, 1].real == pytest.approx(ref_yy, abs=1e-8)
    assert g.smooth[2, 2].real == pytest.approx(ref_zz, abs=1e-8)
    assert g.smooth[0, 2].imag == pytest.approx(ref_xz, abs=1e-8)


def test_mixed_green_symmetries():
    g, h = mixed_green(0.9, 0.7, 0.5).smooth, mixed_green(0.9, 0.7, -0.5).smooth
    assert np.all(np.diag(g).imag == 0)
    assert g[0, 2].real == 0 and g[0, 2] == -h[0, 2]
    assert g[0, 1] == g[1, 2] == g[1, 0] == g[2, 1] == 0
    with pytest.raises(DomainError):
        mixed_green(0.0, 1.0, 0.1)


@pytest.mark.parametrize("w, dz", [(1.0, 0.7), (0.3, 1.5)])
def test_transverse_integral_reproduces_real_space_kernel(w, dz):
    # real-space kernel (w^2 - grad grad) exp(-w r) / (4 pi r) on the z axis
    r = dz
    f = math.exp(-w * r) / (4 * math.pi * r)
    f1 = -math.exp(-w * r) * (w * r + 1) / (4 * math.pi * r * r)
    f2 = math.exp(-w * r) * (w * w * r * r + 2 * w * r + 2) / (4 * math.pi * r**3)
    ref_xx, ref_zz = w * w * f - f1 / r, w * w * f - f2

    def avg(q, i):
        g = mixed_green(w, q, dz).smooth
        # average over the direction of q: xx mixes the along-q and transverse parts
        return 0.5 * (g[0, 0] + g[1, 1]).real if i == 0 else g[2, 2].real

    xx = quad(lambda q: q * avg(q, 0), 0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)[0] / (2 * math.pi)
    zz = quad(lambda q: q * avg(q, 2), 0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)[0] / (2 * math.pi)
    assert xx == pytest.approx(ref_xx, rel=1e-6)
    assert zz == pytest.approx(ref_zz, rel=1e-6)


# -- mode matrices ----------------------------------------------------------------

def _slabs(m1, m2, dz=0.1, H=1.0):
    return LayeredScenario((Layer(-0.6, 0.0, m1), Layer(H, H + 0.6, m2)), H, grid_spacing_dz=dz)


def test_vacuum_mode_matrix_is_zero():
    M = build_mode_matrix(_slabs(VAC, VAC), 0.5, 0.3)
    assert M.matrix.shape == (36, 36) and not np.any(M.matrix)
    assert trace_powers(M, 1)[0] == [0.0]


def test_trace_of_mode_matrix_by_hand(fig2):
    w, q = 0.5, 0.3
    M = build_mode_matrix(_slabs(fig2, fig2), w, q)
    kappa = math.hypot(w, q)
    hand = np.sum(M.delta_eps * (1 + w * w / kappa * M.node_weights))
    assert np.trace(M.matrix).real == pytest.approx(hand, rel=1e-14)
    assert trace_powers(M, 1)[0][0] == pytest.approx(hand, rel=1e-12)


def test_mode_matrix_spectrum_is_real(fig2):
    M = build_mode_matrix(_slabs(fig2, DielectricModel.constant(2.5)), 0.5, 0.3)
    assert np.max(np.abs(np.linalg.eigvals(M.matrix).imag)) < 1e-9


def test_trace_powers_against_products(fig2):
    M = build_mode_matrix(_slabs(fig2, fig2), 0.5, 0.3)
    assert M.node_z.size == 12
    A = M.matrix
    tr, imag = trace_powers(M, 4)
    brute2 = sum(A[a, b] * A[b, a] for a in range(A.shape[0]) for b in range(A.shape[0]))
    assert tr[1] == pytest.approx(brute2.real, rel=1e-10)
    P = np.eye(A.shape[0])
    for n in range(4):
        P = P @ A
        assert tr[n] == pytest.approx(np.trace(P).real, rel=1e-10)
    assert imag < 1e-9


def test_grid_too_coarse(fig2):
    with pytest.raises(GridTooCoarse):
        build_mode_matrix(_slabs(fig2, fig2, dz=0.2), 0.5, 0.3)


def test_scenario_validation(fig2):
    with pytest.raises(DomainError):
        LayeredScenario((Layer(-1, 0.5, fig2), Layer(1, 2, fig2)), 1.0)
    with pytest.raises(DomainError):
        LayeredScenario((Layer(-1, 0, fig2), Layer(-0.5, -0.2, fig2)), 1.0)
    with pytest.raises(DomainError):
        LayeredScenario.two_half_spaces(fig2, fig2, 1.0, grid_spacing_dz=1.0)
    with pytest.raises(DomainError):
        LayeredScenario.two_half_spaces(DielectricModel.perfect_conductor(), fig2, 1.0)


# -- node-level invariants -------------------------------------------------------

def test_translation_invariance(fig2):
    sc = LayeredScenario((Layer(-math.inf, -0.3, fig2), Layer(-0.3, 0.0, DielectricModel.constant(2.0)),
                          Layer(1.0, math.inf, fig2)), 1.0)
    a = node_quantities(sc, 0.7, 0.4, 6)
    b = node_quantities(sc.translated(0.3718), 0.7, 0.4, 6)
    assert np.allclose(a[0][1:], b[0][1:], rtol=1e-10, atol=0)
    assert a[1] == pytest.approx(b[1], rel=1e-10)


def test_single_body_traces_extensive_interaction_not(fig2):
    w, q, dz = 0.8, 0.6, 0.1
    depths = np.array([6.0, 12.0, 24.0])
    single = []
    for L in depths:
        M = build_mode_matrix(LayeredScenario((Layer(-math.inf, 0.0, fig2),), 1.0, body_depth_L=L,
                                              grid_spacing_dz=dz), w, q)
        single.append(trace_powers(M, 2)[0][1])
    slope = np.polyfit(np.log(depths), np.log(single), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.05)
    kappa = math.hypot(w, q)
    inter = [node_quantities(LayeredScenario.two_half_spaces(fig2, fig2, 1.0, body_depth_L=L, grid_spacing_dz=dz),
                             w, q, 4) for L in (12 / kappa, 24 / kappa)]
    assert np.allclose(inter[0][0][1:], inter[1][0][1:], rtol=1e-3)
    assert inter[0][1] == pytest.approx(inter[1][1], rel=1e-3)


def test_first_order_vanishes_exactly(fig2):
    tr, _, _ = node_quantities(LayeredScenario.two_half_spaces(fig2, fig2, 1.0), 0.5, 0.5)
    assert tr[0] == 0.0


# -- integrated energies ---------------------------------------------------------

@pytest.fixture(scope="module")
def series_fig2(layered_fig2):
    return interaction_series(layered_fig2, 6)


def test_series_first_order_and_sign(series_fig2):
    assert abs(series_fig2.per_order[1]) <= 1e-12 * abs(series_fig2.per_order[2])
    assert series_fig2.per_order[2] < 0


def test_series_second_order_matches_L_kernel(series_fig2, fig2):
    assert rel(series_fig2.per_order[2], l_kernel_energy(fig2, fig2, 1.0)[0]) < 5e-3


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0])
def test_series_matches_taylor_oracle(fig2, lam_p, x):
    H = x * lam_p
    s = interaction_series(LayeredScenario.two_half_spaces(fig2, fig2, H), 6, with_logdet=False)
    t = taylor_in_contrast(PlanarScenario(fig2, fig2, H), 6)
    assert rel(s.partial_sum(6), t.partial_sum(6)) < 0.01


def test_logdet_with_vacuum_body_is_zero(fig2):
    assert interaction_logdet(LayeredScenario.two_half_spaces(fig2, VAC, 1.0)).total == 0.0


def test_exchange_symmetry(fig2):
    other = DielectricModel.constant(2.0)
    sc = LayeredScenario((Layer(-math.inf, -0.5, fig2), Layer(-0.5, 0.0, other), Layer(1.0, math.inf, fig2)), 1.0)
    a = interaction_series(sc, 4)
    b = interaction_series(sc.mirrored(), 4)
    for n in (2, 3, 4):
        assert abs(a.per_order[n] - b.per_order[n]) <= a.est_error + b.est_error + 1e-9 * abs(a.per_order[2])
    assert a.metadata["logdet"] == pytest.approx(b.metadata["logdet"], rel=1e-8)


def test_logdet_approaches_second_order_at_small_contrast(layered_fig2):
    lams = (0.5, 0.25, 0.125)
    gaps = []
    for lam in lams:
        r = interaction_series(layered_fig2.with_contrast(lam), 2)
        gaps.append(abs(r.metadata["logdet"] - r.partial_sum(2)) / abs(r.metadata["logdet"]))
    ratios = [gaps[0] / gaps[1], gaps[1] / gaps[2]]
    assert all(1.6 < q < 2.4 for q in ratios)


def test_branch_violation(layered_fig2):
    with pytest.raises(BranchViolation):
        interaction_logdet(layered_fig2.with_contrast(-4.0))


def test_order_bounds(layered_fig2):
    for n in (1, 9):
        with pytest.raises(DomainError):
            interaction_series(layered_fig2, n)


def test_convergence_report_small_rule_is_deterministic(fig2):
    sc = LayeredScenario.two_half_spaces(fig2, fig2, 1.0, cells_per_length=8)
    spec = QuadratureSpec(panel_order=4)
    a = convergence_report(sc, spec, panels=2)
    b = convergence_report(sc, spec, panels=2)
    assert a.rungs == b.rungs and a.limit == b.limit
    assert [r["resolution"] for r in a.rungs] == [4, 8, 16]
    assert 1.5 < a.observed_order < 2.5
