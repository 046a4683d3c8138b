from __future__ import annotations

import math

import numpy as np
import pytest

from giantatom.bic_analysis import (
    bic_distances,
    bic_exists,
    build_bic,
    eigen_residual,
    verify_bic_numerically,
)
from giantatom.core_model import SystemConfig
from giantatom.dde_engine import DdeSpec, asymptotic_amplitude
from giantatom.errors import ConfigurationError, NoBoundStateError
from giantatom.lattice_sim import evolve

K_A = math.pi / 2
GAMMA = 0.08


@pytest.mark.parametrize(
    "d, phi_c, expected",
    [
        (2, 0.0, (True, 1)),
        (4, math.pi, (True, 2)),
        (6, 0.0, (True, 3)),
        (2, math.pi, (False, 1)),
        (4, 0.0, (False, 2)),
        (3, 0.0, (False, 0)),
        (2, math.pi / 2, (False, 1)),
        (4, math.pi / 2, (False, 2)),
        (2, -2 * math.pi, (True, 1)),
    ],
)
def test_existence(d, phi_c, expected):
    assert bic_exists(d, K_A, phi_c) == expected


def test_existence_needs_band_momentum():
    with pytest.raises(ConfigurationError):
        bic_exists(2, 0.0, 0.0)


def test_distances_inside_chain():
    assert bic_distances(K_A, 12) == [(1, 2), (2, 4), (3, 6)]
    assert bic_distances(math.acos(-0.5), 30) == [(2, 3), (4, 6), (6, 9), (8, 12), (10, 15)]


def test_closed_form_population():
    state = build_bic(SystemConfig.giant_atom(d=2, phi_c=0.0))
    assert state.exists and state.m == 1
    assert state.eps_pop == pytest.approx(1 / 1.04)
    assert state.eps_pop == pytest.approx(0.96154, abs=1e-5)
    assert state.energy == 0.0


def test_profile_shape_and_nodes():
    cfg = SystemConfig.giant_atom(d=6, phi_c=0.0)
    state = build_bic(cfg)
    x1, x2 = cfg.positions
    assert state.profile[x1] == 0 and state.profile[x2] == 0
    inner = np.arange(x1 + 1, x2)
    ratio = np.abs(state.profile[inner]) ** 2 / np.sin(K_A * (inner - x1)) ** 2
    nonzero = np.abs(np.sin(K_A * (inner - x1))) > 1e-9
    np.testing.assert_allclose(ratio[nonzero], 4 * cfg.g**2 * state.eps_pop / 4.0)
    mask = np.ones(cfg.N, bool)
    mask[inner] = False
    assert not np.any(state.profile[mask])


def test_single_antinode_for_first_order():
    cfg = SystemConfig.giant_atom(d=2, phi_c=0.0)
    state = build_bic(cfg)
    assert np.count_nonzero(np.abs(state.profile) > 0) == 1


@pytest.mark.parametrize("d, phi_c", [(2, 0.0), (4, math.pi), (6, 0.0), (8, math.pi)])
def test_normalized_exact_eigenvector(d, phi_c):
    cfg = SystemConfig.giant_atom(d=d, phi_c=phi_c)
    state = build_bic(cfg)
    assert state.norm == pytest.approx(1.0, abs=1e-12)
    assert eigen_residual(cfg, state) <= 1e-12


def test_exact_eigenvector_on_open_chain_and_detuned_band():
    cfg = SystemConfig(omega_a=1.0, N=40, coupling_points=((15, 0.0), (18, 0.0)), boundary="open-chain")
    assert cfg.derived().phi_WG == pytest.approx(2 * math.pi)
    cfg = SystemConfig(omega_a=1.0, N=40, coupling_points=((15, 0.0), (18, math.pi)), boundary="open-chain")
    state = build_bic(cfg)
    assert state.m == 2
    assert eigen_residual(cfg, state) <= 1e-12


def test_population_independent_of_phase_choice():
    base = build_bic(SystemConfig.giant_atom(d=2, phi_c=0.0)).eps_pop
    shifted = build_bic(SystemConfig.giant_atom(d=2, phases=(0.7, 0.7))).eps_pop
    wrapped = build_bic(SystemConfig.giant_atom(d=2, phi_c=2 * math.pi)).eps_pop
    assert base == shifted == wrapped


def test_no_closed_form_without_trapping():
    with pytest.raises(NoBoundStateError, match="no bound state"):
        build_bic(SystemConfig.giant_atom(d=2, phi_c=math.pi / 2))


def test_numerical_verification_succeeds():
    report = verify_bic_numerically(SystemConfig.giant_atom(d=2, phi_c=0.0))
    assert report.success
    assert report.infidelity <= 1e-6
    assert report.eigenvalue_error <= 1e-8
    assert report.exterior_weight <= 1e-20


def test_numerical_verification_fails_off_condition():
    report = verify_bic_numerically(SystemConfig.giant_atom(d=2, phi_c=0.1))
    assert not report.success
    assert "exterior" in report.message or "no eigenvalue" in report.message


def test_decoupled_atom_is_trivially_bound():
    cfg = SystemConfig.giant_atom(d=2, phi_c=0.0, g=0.0)
    report = verify_bic_numerically(cfg)
    assert report.success and report.infidelity == pytest.approx(0.0, abs=1e-15)


def test_lattice_amplitude_settles_on_bound_population():
    cfg = SystemConfig.giant_atom(d=2, phi_c=0.0, N=256)
    tr = evolve(cfg, 110.0, snapshot_every=None)
    late = np.abs(tr.eps[tr.times >= 60])
    state = build_bic(cfg)
    assert np.mean(late) == pytest.approx(state.eps_pop, abs=1e-3)
    assert state.eps_pop == pytest.approx(asymptotic_amplitude(DdeSpec.from_config(cfg)))
