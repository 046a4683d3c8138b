from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from giantatom.collision_sim import BinChainState, collide_step, unitarity_deviation
from giantatom.core_model import (
    AmplitudeState,
    SystemConfig,
    brillouin_grid,
    build_hamiltonian,
    coupling_in_momentum_space,
    format_phase,
    gauge_fix,
    parse_phase,
)
from giantatom.dde_engine import DdeSpec, integrate
from giantatom.field_tools import COMPONENT_NAMES, delay_feedback_amplitude, field_at_coupling_points
from giantatom.lattice_sim import evolve
from giantatom.markov_analysis import lindblad_rate

phase = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
small_d = st.integers(1, 6)
FAST = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@FAST
@given(d=small_d, phi_c=phase, g=st.floats(0.0, 0.45), N=st.integers(20, 60),
       boundary=st.sampled_from(["ring", "open-chain"]))
def test_hamiltonian_is_hermitian(d, phi_c, g, N, boundary):
    cfg = SystemConfig.giant_atom(d=d, phi_c=phi_c, g=g, N=N, x1=2, boundary=boundary)
    H = build_hamiltonian(cfg)
    np.testing.assert_array_equal(H, H.conj().T)


@FAST
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(4, 64))
def test_momentum_transform_preserves_norm(seed, N):
    rng = np.random.default_rng(seed)
    psi = AmplitudeState(0.3 + 0.1j, rng.normal(size=N) + 1j * rng.normal(size=N))
    ck = psi.momentum_amplitudes()
    assert np.vdot(ck, ck).real == pytest.approx(np.vdot(psi.field, psi.field).real, rel=1e-12)


@FAST
@given(d=small_d, phases=st.lists(phase, min_size=1, max_size=4), N=st.integers(30, 60))
def test_momentum_couplings_sum_rule(d, phases, N):
    cfg = SystemConfig.giant_atom(d=d, phases=phases, L=len(phases), N=N, x1=1)
    gk = coupling_in_momentum_space(cfg, brillouin_grid(N))
    assert np.sum(np.abs(gk) ** 2) == pytest.approx(cfg.L * cfg.g**2, rel=1e-12)


@settings(max_examples=8, deadline=None)
@given(d=st.integers(1, 4), phi_c=phase, shift=phase)
def test_global_phase_is_a_gauge(d, phi_c, shift):
    cfg = SystemConfig.giant_atom(d=d, phases=(shift, shift + phi_c), N=60)
    a = evolve(cfg, 3.0, snapshot_every=None)
    b = evolve(gauge_fix(cfg), 3.0, snapshot_every=None)
    assert np.max(np.abs(a.pop - b.pop)) <= 1e-9


@FAST
@given(phi_c=phase, k_a=st.floats(0.05, math.pi - 0.05), d=st.integers(0, 40))
def test_lindblad_rate_is_bounded_and_even(phi_c, k_a, d):
    G = 0.08
    rate = lindblad_rate(G, phi_c, k_a, d)
    assert -1e-15 <= rate <= 2 * G + 1e-15
    assert rate == pytest.approx(lindblad_rate(G, -phi_c, -k_a, d), abs=1e-15)


@FAST
@given(phi_c=phase, phi_WG=phase)
def test_unitarity_defect_is_cosine(phi_c, phi_WG):
    dev = unitarity_deviation(phi_c, phi_WG)
    assert dev == pytest.approx(abs(math.cos(phi_c)), abs=1e-14)
    assert dev == pytest.approx(unitarity_deviation(phi_c, 0.0), abs=1e-14)


@FAST
@given(phi_c=phase, phi_WG=phase, d=small_d, g=st.floats(0.05, 0.4))
def test_dde_amplitude_never_grows(phi_c, phi_WG, d, g):
    spec = DdeSpec.two_leg(4 * g**2 / 2.0, phi_c, phi_WG, d / 2.0)
    tr = integrate(spec, 15.0, 50)
    assert np.all(np.abs(tr.eps) <= 1 + 1e-12)
    assert np.all(np.diff(np.abs(tr.eps)[tr.times <= spec.t_d]) <= 1e-15)


@FAST
@given(phases=st.lists(phase, min_size=1, max_size=4), kappa=st.floats(0.0, 5.0),
       ell=st.integers(1, 4), steps=st.integers(1, 40))
def test_collision_steps_conserve_norm(phases, kappa, ell, steps):
    state = BinChainState.initial(phases, 1.1, ell, 0.05, steps)
    for _ in range(steps):
        collide_step(state, kappa)
    assert state.total_norm() == pytest.approx(1.0, abs=1e-12)


@FAST
@given(phi_c=phase, scale=st.floats(0.1, 3.0))
def test_field_components_are_linear_in_amplitude(phi_c, scale):
    cfg = SystemConfig.giant_atom(d=2, phi_c=phi_c)
    tr = integrate(DdeSpec.from_config(cfg), 4.0)
    base = field_at_coupling_points(tr, cfg)
    tr.eps = tr.eps * scale
    scaled = field_at_coupling_points(tr, cfg)
    for name in COMPONENT_NAMES:
        np.testing.assert_allclose(getattr(scaled, name), scale * getattr(base, name), rtol=1e-13, atol=1e-300)


@FAST
@given(phi_c=phase)
def test_feedback_vanishes_only_when_cosine_does(phi_c):
    cfg = SystemConfig.giant_atom(d=2, phi_c=phi_c)
    tr = integrate(DdeSpec.from_config(cfg), 4.0)
    amp = abs(delay_feedback_amplitude(field_at_coupling_points(tr, cfg), cfg, 3.0))
    dc = cfg.derived()
    scale = 4 * cfg.g / dc.v * abs(tr.eps_at(3.0 - dc.t_d))
    assert amp == pytest.approx(scale * abs(math.cos(phi_c)), abs=1e-15)


@FAST
@given(p=st.integers(-16, 16), q=st.sampled_from([1, 2, 3, 4, 6, 8]))
def test_phase_strings_round_trip(p, q):
    phi = p * math.pi / q
    assert parse_phase(format_phase(phi)) == pytest.approx(phi, abs=1e-12)
