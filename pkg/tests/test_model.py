import numpy as np
import pytest
from numpy.testing import assert_allclose

from mlzsim.errors import (
    DegenerateSlopes,
    DiagonalCoupling,
    DuplicateCoupling,
    InvalidParameter,
    NotBipartite,
)
from mlzsim.model import (
    BipartiteStructure,
    build_bowtie,
    build_chain,
    build_dtcm,
    build_five_state,
    build_four_state,
    build_generic,
    build_six_state,
    detect_bipartition,
    dtcm_couplings,
    dual_bosonic,
    eta,
    permute_model,
    sort_by_slope,
)

from _reference import brute_force_colorings
from conftest import random_bipartite_model, spaced_slopes


def fig4_model():
    return build_four_state(beta=0.1, beta1=1.25, beta2=0.65, g1=0.37, g2=0.5)


def fig5_chain(g3=0.47):
    return build_chain([5.0, 2.0, 1.0, 0.0], [0.5, 0.5, g3])


# ---------------------------------------------------------------------------
# generic builder
# ---------------------------------------------------------------------------

def test_build_generic_minimal_lz():
    m = build_generic([1.0, -1.0], [(1, 2, 0.5)])
    assert m.n == 2
    assert m.a[0, 1] == 0.5 and m.a[1, 0] == 0.5
    assert np.all(np.diag(m.a) == 0)


def test_build_generic_degenerate_slopes():
    with pytest.raises(DegenerateSlopes):
        build_generic([1.0, 1.0], [(1, 2, 0.5)])


def test_build_generic_fig5_chain():
    m = build_generic([5, 2, 1, 0], [(1, 2, 0.5), (2, 3, 0.5), (3, 4, 0.47)])
    assert_allclose(m.a, fig5_chain().a)
    assert m.edges() == [(0, 1), (1, 2), (2, 3)]


def test_build_generic_complex_coupling_is_hermitian():
    m = build_generic([1.0, -1.0, 3.0], [(1, 2, 0.3 + 0.4j), (2, 3, 1j)])
    assert np.max(np.abs(m.a - m.a.conj().T)) == 0


@pytest.mark.parametrize("couplings, exc", [
    ([(1, 1, 0.5)], DiagonalCoupling),
    ([(1, 2, 0.5), (2, 1, 0.2)], DuplicateCoupling),
    ([(0, 2, 0.5)], InvalidParameter),
    ([(1, 5, 0.5)], InvalidParameter),
])
def test_build_generic_rejects(couplings, exc):
    with pytest.raises(exc):
        build_generic([1.0, -1.0], couplings)


def test_model_arrays_are_readonly():
    m = build_generic([1.0, -1.0], [(1, 2, 0.5)])
    with pytest.raises(ValueError):
        m.a[0, 1] = 7.0
    with pytest.raises(ValueError):
        m.beta[0] = 2.0


# ---------------------------------------------------------------------------
# named families
# ---------------------------------------------------------------------------

def test_build_bowtie_three_state():
    m = build_bowtie(0.0, [(2.0, 0.3), (1.0, 0.2)])
    assert m.n == 3
    # center (state 0) coupled to all, no outer-outer coupling
    assert m.a[0, 1] == 0.3 and m.a[0, 2] == 0.2 and m.a[1, 2] == 0


def test_build_bowtie_single_state_rejected():
    with pytest.raises(InvalidParameter):
        build_bowtie(0.0, [])


def test_build_bowtie_pair_slope_sector():
    b1, b2, b3 = 3.0, 2.0, 1.0
    m = build_bowtie(0.0, [(b1 + b2, 0.3), (b1 + b3, 0.4), (b2 + b3, 0.5)])
    assert_allclose(m.beta, [0.0, 5.0, 4.0, 3.0])


def test_build_chain_two_state():
    m = build_chain([1.0, -1.0], [0.7])
    assert m.a[0, 1] == 0.7


def test_build_chain_three_state():
    m = build_chain([1.0, 2.0, 3.0], [1.0, 1.0])
    assert m.a[0, 1] == 1 and m.a[1, 2] == 1 and m.a[0, 2] == 0


def test_build_chain_wrong_coupling_count():
    with pytest.raises(InvalidParameter):
        build_chain([1.0, 2.0, 3.0], [1.0])


def test_dtcm_two_state_coupling_reduces_to_g():
    # S = 1/2, N_B = 0: the single coupling is g itself
    assert_allclose(dtcm_couplings(2, 0.37, 0.0), [0.37])


def test_dtcm_five_state_couplings():
    # S = 2, N_B = 0: spin factors (4, 6, 6, 4) times photon factors (1, 2, 3, 4)
    g = 0.5
    expected_sq = np.array([4.0, 12.0, 18.0, 16.0]) * g ** 2
    assert_allclose(dtcm_couplings(5, g, 0.0) ** 2, expected_sq, rtol=1e-14)


def test_dtcm_edge_couplings_match_closed_forms():
    # g_1^2 = g^2 2S and g_{2S}^2 = g^2 (2S)^2 at N_B = 0
    for n in (3, 4, 5, 6, 7):
        two_s = n - 1
        gs = dtcm_couplings(n, 1.0, 0.0)
        assert_allclose(gs[0] ** 2, two_s, rtol=1e-14)
        assert_allclose(gs[-1] ** 2, two_s ** 2, rtol=1e-14)


def test_build_dtcm_model():
    m = build_dtcm(5, 0.3, 0.0)
    assert_allclose(m.beta, [1, 2, 3, 4, 5])
    assert m.edges() == [(0, 1), (1, 2), (2, 3), (3, 4)]


@pytest.mark.parametrize("kwargs", [
    dict(n_states=1, g=0.3, n_b=0.0),
    dict(n_states=5, g=0.3, n_b=-1.0),
    dict(n_states=5, g=0.3, n_b=0.0, beta_scale=0.0),
])
def test_build_dtcm_rejects(kwargs):
    with pytest.raises(InvalidParameter):
        build_dtcm(**kwargs)


def test_build_four_state_fig4():
    m = fig4_model()
    assert_allclose(m.beta, [1.25, 0.1, -0.65, -1.25])
    x = np.sqrt((1.25 - 0.1) / (1.25 - 0.65))
    y = np.sqrt((1.25 + 0.1) / (1.25 + 0.65))
    assert_allclose(m.a[0, 1], x * 0.37)
    assert_allclose(m.a[0, 2], 0.5)
    assert_allclose(m.a[1, 3], -y * 0.5)
    assert_allclose(m.a[2, 3], 0.37)
    assert m.a[0, 3] == 0 and m.a[1, 2] == 0


def test_build_four_state_equal_scale_special_case():
    # beta == beta2 forces both scale factors to one
    m = build_four_state(beta=0.65, beta1=1.25, beta2=0.65, g1=0.37, g2=0.5)
    assert_allclose(m.a[0, 1], 0.37)
    assert_allclose(m.a[1, 3], -0.5)


def test_build_four_state_negative_radicand():
    with pytest.raises(InvalidParameter):
        build_four_state(beta=2.0, beta1=1.25, beta2=0.65, g1=0.3, g2=0.4)


def test_build_six_state_decoupled():
    m = build_six_state(3.0, 2.0, 1.0, 0.0, 0.0, 0.0)
    assert np.all(m.a == 0)


def test_build_six_state_structure():
    m = build_six_state(3.0, 2.0, 1.0, 0.3, 0.3, 0.3)
    assert_allclose(m.beta, [3, 2, 1, -1, -2, -3])
    assert m.edges() == [(0, 3), (0, 4), (1, 3), (1, 5), (2, 4), (2, 5)]
    assert m.a[1, 5] == -0.3 and m.a[2, 4] == -0.3 and m.a[2, 5] == -0.3


def test_build_six_state_rejects_bad_ordering():
    with pytest.raises(InvalidParameter):
        build_six_state(2.0, 3.0, 1.0, 0.1, 0.1, 0.1)


def test_build_five_state_fig7_family():
    g = 0.3
    m = build_five_state(1.0, 4.0, 2.0, -3.0, g * np.sqrt(3), g)
    assert_allclose(m.beta, [1, -1, 4, 2, -3])
    assert_allclose(m.a[0, 4], 2 * np.sqrt(2) * g, rtol=1e-12)


def test_build_five_state_constraints_hold():
    m = build_five_state(0.8, 3.5, 2.1, -2.9, 0.4, 0.25, taus=(1, -1, -1))
    b, b3, b4, b5 = 0.8, 3.5, 2.1, -2.9
    g13, g14, g15 = m.a[0, 2].real, m.a[0, 3].real, m.a[0, 4].real
    total = g13 ** 2 / (b3 - b) + g14 ** 2 / (b4 - b) + g15 ** 2 / (b5 - b)
    assert abs(total) < 1e-12
    for col, bi, tau in ((2, b3, 1), (3, b4, -1), (4, b5, -1)):
        g1i = m.a[0, col].real
        g2i = m.a[1, col].real
        assert_allclose(g2i, tau * g1i * np.sqrt((bi + b) / (bi - b)), rtol=1e-12)


def test_build_five_state_decoupled():
    m = build_five_state(1.0, 4.0, 2.0, -3.0, 0.0, 0.0)
    assert np.all(m.a == 0)


def test_build_five_state_rejects_ordering():
    with pytest.raises(InvalidParameter):
        build_five_state(1.0, 4.0, 2.0, -0.5, 0.3, 0.3)


@pytest.mark.parametrize("model", [
    build_generic([1.0, -1.0], [(1, 2, 0.5 + 0.1j)]),
    build_bowtie(0.0, [(2.0, 0.3), (1.0, 0.2)]),
    build_chain([5.0, 2.0, 1.0, 0.0], [0.5, 0.5, 0.47]),
    build_dtcm(5, 0.3, 0.5),
    build_four_state(0.1, 1.25, 0.65, 0.37, 0.5),
    build_six_state(3.0, 2.0, 1.0, 0.3, 0.2, 0.1),
    build_five_state(1.0, 4.0, 2.0, -3.0, 0.4, 0.3),
])
def test_builder_invariants(model):
    assert np.max(np.abs(model.a - model.a.conj().T)) <= 1e-12
    assert np.all(np.diag(model.a) == 0)


# ---------------------------------------------------------------------------
# bipartition
# ---------------------------------------------------------------------------

def test_detect_bipartition_bowtie():
    bip = detect_bipartition(build_bowtie(0.0, [(2.0, 0.3), (1.0, 0.2)]))
    assert bip.m == 1
    assert bip.groups[0] == 1  # the center alone forms group 1
    assert_allclose(bip.theta_diag(), [-1, 1, 1])


def test_detect_bipartition_triangle():
    triangle = build_generic([1.0, 0.0, -1.0],
                             [(1, 2, 0.1), (2, 3, 0.1), (1, 3, 0.1)])
    with pytest.raises(NotBipartite) as err:
        detect_bipartition(triangle)
    assert sorted(err.value.cycle) == [1, 2, 3]


def test_detect_bipartition_four_cycle():
    bip = detect_bipartition(fig4_model())
    assert bip.m == 2
    # the 4-cycle splits as {1, 4} / {2, 3}; the tie goes to state 1's side
    assert list(bip.groups) == [1, 2, 2, 1]


def test_detect_bipartition_no_couplings():
    m = build_generic([1.0, -1.0, 2.0], [])
    bip = detect_bipartition(m)
    assert bip.m == 0
    assert np.all(bip.groups == 2)


def test_detect_bipartition_against_enumeration(rng):
    for _ in range(40):
        n = int(rng.integers(2, 7))
        beta = spaced_slopes(rng, n)
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)
                 if rng.random() < 0.45]
        model = build_generic(beta, [(i + 1, j + 1, 0.1) for i, j in pairs])
        valid = brute_force_colorings(n, pairs)
        if not valid:
            with pytest.raises(NotBipartite):
                detect_bipartition(model)
            continue
        bip = detect_bipartition(model)
        assert tuple(bip.groups) in valid or \
            tuple(3 - g for g in bip.groups) in valid
        assert bip.m <= n - bip.m


def test_detected_groups_never_share_a_coupling(rng):
    for _ in range(60):
        model = random_bipartite_model(rng)
        bip = detect_bipartition(model)
        for i, j in model.edges():
            assert bip.groups[i] != bip.groups[j]


# ---------------------------------------------------------------------------
# eta
# ---------------------------------------------------------------------------

def test_eta_zero_couplings():
    assert_allclose(eta(build_generic([1.0, -1.0], [])).eta, [0.0, 0.0])


def test_eta_two_state():
    m = build_generic([1.5, -0.5], [(1, 2, 0.3)])
    expected = 0.09 / 2.0
    assert_allclose(eta(m).eta, [expected, -expected], rtol=1e-14)


def test_eta_three_state_bowtie():
    b1, b2, g1, g2 = 2.0, 1.0, 0.6, 0.4
    m = build_generic([b1, b2, 0.0], [(1, 3, g1), (2, 3, g2)])
    expected = [g1 ** 2 / b1, g2 ** 2 / b2, -g1 ** 2 / b1 - g2 ** 2 / b2]
    assert_allclose(eta(m).eta, expected, rtol=1e-14)


def test_eta_sums_to_zero_property(rng):
    for _ in range(120):
        n = int(rng.integers(2, 9))
        beta = spaced_slopes(rng, n)
        couplings = [(i + 1, j + 1,
                      rng.normal() * 0.5 + 0.5j * rng.normal())
                     for i in range(n) for j in range(i + 1, n)
                     if rng.random() < 0.6]
        m = build_generic(beta, couplings)
        assert abs(np.sum(eta(m).eta)) <= 1e-12


# ---------------------------------------------------------------------------
# sorting and duals
# ---------------------------------------------------------------------------

def test_sort_by_slope_already_sorted():
    m = fig5_chain()
    sorted_model, perm = sort_by_slope(m)
    assert_allclose(sorted_model.beta, m.beta)
    assert list(perm) == [0, 1, 2, 3]


def test_sort_by_slope_reversal():
    m = build_generic([0.0, 1.0, 2.0], [(1, 2, 0.1)])
    sorted_model, perm = sort_by_slope(m)
    assert_allclose(sorted_model.beta, [2.0, 1.0, 0.0])
    assert list(perm) == [2, 1, 0]


def test_sort_by_slope_round_trip(rng):
    for _ in range(25):
        model = random_bipartite_model(rng)
        sorted_model, perm = sort_by_slope(model)
        assert np.all(np.diff(sorted_model.beta) < 0)
        restored = permute_model(sorted_model, perm)
        assert_allclose(restored.beta, model.beta)
        assert_allclose(restored.a, model.a)


def test_dual_bosonic_three_state_bowtie():
    m = build_generic([2.0, 1.0, 0.0], [(1, 3, 0.6), (2, 3, 0.4)])
    dual = dual_bosonic(m)
    hp = dual.h_prime(2.0)
    assert_allclose(np.diag(hp), [-4.0, -2.0, 0.0])
    assert hp[0, 2] == 0.6j and hp[2, 0] == 0.6j


def test_dual_bosonic_zero_couplings_diagonal():
    m = build_generic([1.0, -1.0], [])
    hp = dual_bosonic(m).h_prime(3.0)
    assert np.all(hp == np.diag([-3.0, 3.0]))


def test_dual_bosonic_four_cycle():
    dual = dual_bosonic(fig4_model())
    assert dual.bipartition.m == 2


def test_dual_bosonic_rejects_triangle():
    triangle = build_generic([1.0, 0.0, -1.0],
                             [(1, 2, 0.1), (2, 3, 0.1), (1, 3, 0.1)])
    with pytest.raises(NotBipartite):
        dual_bosonic(triangle)


def test_bipartite_structure_validation():
    with pytest.raises(InvalidParameter):
        BipartiteStructure(groups=np.array([1, 1, 2]), m=2)
    with pytest.raises(InvalidParameter):
        BipartiteStructure(groups=np.array([1, 1, 2]), m=1)
