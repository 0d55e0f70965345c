import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mzbraid.errors import ValidationError
from mzbraid.kitaev import (ChainParams, MajoranaCouplingMatrix,
                            bdg_blocks, bdg_from_coupling,
                            build_majorana_coupling, coupling_from_bdg,
                            find_zero_modes)


def test_sweet_spot_predicate():
    assert ChainParams(mu=0.0, J=-1.0, g=1.0, N=4).sweet_spot()
    assert not ChainParams(mu=1e-15, J=-1.0, g=1.0, N=4).sweet_spot()
    assert not ChainParams(mu=0.0, J=-1.0, g=0.9, N=4).sweet_spot()


def test_invalid_params_rejected():
    with pytest.raises(ValidationError):
        ChainParams(mu=0.0, J=1.0, g=1.0, N=0)
    with pytest.raises(ValidationError):
        ChainParams(mu=np.inf, J=1.0, g=1.0, N=2)


def test_sweet_spot_coupling_structure_n2():
    # only the inter-site (gamma3, gamma2) pair survives; edge rows vanish
    A = build_majorana_coupling(ChainParams(mu=0.0, J=-1.0, g=1.0, N=2)).A
    expected = np.zeros((4, 4))
    expected[2, 1] = 2.0
    expected[1, 2] = -2.0
    assert np.array_equal(A, expected)
    assert np.all(A[0] == 0) and np.all(A[3] == 0)


def test_all_couplings_vanish_for_free_chain():
    A = build_majorana_coupling(ChainParams(mu=0.0, J=0.0, g=0.0, N=3)).A
    assert np.all(A == 0)


def test_near_zero_splitting_and_bulk_gap_against_dense_eigensolver():
    # frozen from a dense diagonalization of the 40x40 single-particle matrix
    A = build_majorana_coupling(ChainParams(mu=0.1, J=-1.0, g=1.0, N=20))
    ev = np.sort(np.abs(np.linalg.eigvalsh(A.single_particle_matrix())))
    assert ev[0] < 1e-14 and ev[1] < 1e-14      # split ~ (mu/2g)^N, below floor
    assert ev[2] == pytest.approx(1.9013023186172384, abs=1e-12)


def test_generic_parameters_split_doublet():
    A = build_majorana_coupling(ChainParams(mu=0.3, J=0.7, g=-0.4, N=5))
    ev = np.sort(np.abs(np.linalg.eigvalsh(A.single_particle_matrix())))
    assert ev[0] == pytest.approx(0.039221472945860356, abs=1e-12)


def test_antisymmetry_enforced():
    with pytest.raises(ValidationError):
        MajoranaCouplingMatrix(A=np.eye(4))


@settings(max_examples=40, deadline=None)
@given(mu=st.floats(-3, 3), J=st.floats(-3, 3), g=st.floats(-3, 3),
       N=st.integers(1, 12))
def test_spectrum_symmetric_about_zero(mu, J, g, N):
    A = build_majorana_coupling(ChainParams(mu=mu, J=J, g=g, N=N))
    ev = np.sort(np.linalg.eigvalsh(A.single_particle_matrix()))
    assert np.abs(ev + ev[::-1]).max() < 1e-12 * max(1.0, np.abs(ev).max())


@settings(max_examples=25, deadline=None)
@given(mu=st.floats(-2, 2), J=st.floats(-2, 2), g=st.floats(-2, 2),
       N=st.integers(1, 10))
def test_fermion_majorana_transform_involutive(mu, J, g, N):
    params = ChainParams(mu=mu, J=J, g=g, N=N)
    A_direct = build_majorana_coupling(params).A
    h, P = bdg_blocks(params)
    A_sub = coupling_from_bdg(h, P)
    np.testing.assert_allclose(A_sub, A_direct, atol=1e-14)
    h2, P2 = bdg_from_coupling(A_direct)
    np.testing.assert_allclose(h2, h, atol=1e-14)
    np.testing.assert_allclose(P2, P, atol=1e-14)


def test_sweet_spot_modes_perfectly_edge_localized():
    for N in (2, 10, 50):
        A = build_majorana_coupling(ChainParams(mu=0.0, J=-1.0, g=1.0, N=N))
        modes = find_zero_modes(A)
        assert len(modes) == 2
        for m in modes:
            assert abs(m.energy) <= 1e-12
            assert m.localization_length == "exact-edge"
        # support confined to the two edge Majorana indices
        for m in modes:
            interior = np.delete(m.amplitudes, [0, 2 * N - 1])
            assert np.abs(interior).max() ** 2 < 1e-14
        # deterministic ordering: left edge first
        assert modes[0].amplitudes[0] ** 2 > 0.99
        assert modes[1].amplitudes[-1] ** 2 > 0.99


def test_zero_matrix_returns_all_modes():
    A = build_majorana_coupling(ChainParams(mu=0.0, J=0.0, g=0.0, N=3))
    modes = find_zero_modes(A)
    assert len(modes) == 6
    assert all(m.energy == 0 for m in modes)
    G = np.stack([m.amplitudes for m in modes])
    np.testing.assert_allclose(G @ G.T, np.eye(6), atol=1e-12)


def test_split_doublet_decay_rate_matches_transfer_matrix():
    # weight decays by (mu/2g)^2 per site; log-slope 2 ln(mu/2g)
    params = ChainParams(mu=0.2, J=-1.0, g=1.0, N=30)
    modes = find_zero_modes(build_majorana_coupling(params), tol=1e-3)
    assert len(modes) == 2
    expected = -2.0 / (2 * np.log(params.mu / (2 * params.g)))
    for m in modes:
        assert m.localization_length == pytest.approx(expected, rel=1e-3)
    # opposite edges
    assert modes[0].amplitudes[0] ** 2 > 0.9
    assert modes[1].amplitudes[-1] ** 2 > 0.9


def test_no_modes_outside_tolerance():
    A = build_majorana_coupling(ChainParams(mu=0.3, J=0.7, g=-0.4, N=5))
    assert find_zero_modes(A, tol=1e-3) == []
    assert len(find_zero_modes(A, tol=0.05)) == 2
