import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dqdcavity import oracle
from dqdcavity.data_io import read_columns, write_trajectory, TRAJECTORY_COLUMNS
from dqdcavity.errors import IntegratorError, TruncationError, ValidationError
from dqdcavity.model import QubitTuning, coupling_set, steady_state_alpha
from dqdcavity.oracle import DESK


def _random_rho(n_levels, rng):
    m = rng.normal(size=(2 * n_levels, 2 * n_levels)) + 1j * rng.normal(size=(2 * n_levels, 2 * n_levels))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


# ---------------------------------------------------------------- coherent ODE


@given(st.floats(-5, 5), st.floats(0.5, 10), st.floats(1e-3, 0.1), st.floats(-1, 1), st.floats(1e-3, 0.1),
       st.sampled_from([-1, 1]))
def test_fixed_point_zeroes_rhs(eps0, tc, g0, eq, eps_r, s):
    cs = coupling_set(QubitTuning(eps0, tc), g0, eq)
    kappa = 0.02
    a = steady_state_alpha(cs, eps_r, kappa, s)
    det = s * cs.delta_omega - 0.5j * kappa
    res = oracle._alpha_rhs(a, det, eps_r + s * cs.g_dy / 2)
    assert abs(res) < 1e-14 * max(1.0, abs(eps_r) + abs(cs.g_dy))


def test_ode_relaxes_to_steady_state(rng):
    cs = coupling_set(QubitTuning(0.0, 6.14e9), 5.5e6, -137e6)
    for s in (-1, 1):
        ref = steady_state_alpha(cs, 397e3, 124.5e3, s)
        for a0 in rng.normal(size=5) * 10 + 1j * rng.normal(size=5) * 10:
            _, a = oracle.coherent_ode_evolve(a0, cs, 397e3, 124.5e3, s)
            assert abs(a[-1] - ref) / abs(ref) < 1e-6


def test_ode_blowup_and_validation():
    cs = coupling_set(QubitTuning(0.0, 1.0), 0.01, 0.1)
    with pytest.raises(IntegratorError):
        oracle.coherent_ode_evolve(1.0, cs, 0.01, 1.0, dt=5.0, t_final=500.0)
    with pytest.raises(ValidationError):
        oracle.coherent_ode_evolve(1.0, cs, 0.01, 0.0)
    with pytest.raises(ValidationError):
        oracle.coherent_ode_evolve(1.0, cs, 0.01, 1.0, qubit_sign=2)


# ---------------------------------------------------------------- master equation


@pytest.mark.parametrize("t", [0.0, 0.13, 0.71])
def test_block_kernel_matches_dense(rng, t):
    cfg = oracle.FockConfig(n_max=6, dt=0.01, t_final=1.0)
    p = dataclasses.replace(DESK, eps0=0.7, eps_r=0.05, g0=0.03)
    rho = _random_rho(cfg.n_max + 1, rng)
    dense = oracle.lindblad_rhs_dense(t, rho, p, cfg)
    blocks = oracle.lindblad_rhs_blocks(t, oracle.to_blocks(rho, cfg.n_max + 1), p)
    assert np.allclose(oracle.from_blocks(blocks), dense, atol=1e-12 * np.abs(dense).max())


def test_block_layout_roundtrip(rng):
    rho = _random_rho(5, rng)
    assert np.array_equal(oracle.from_blocks(oracle.to_blocks(rho, 5)), rho)


def test_hamiltonian_hermitian():
    cfg = oracle.FockConfig(n_max=5, dt=0.01, t_final=1.0)
    h = oracle.build_lab_hamiltonian(0.3, DESK, cfg)
    assert np.allclose(h, h.conj().T)


def test_short_run_preserves_trace_and_hermiticity():
    p = DESK
    cfg = oracle.auto_config(p, n_max=8)
    cfg = oracle.FockConfig(cfg.n_max, cfg.dt, 30.0)
    traj = oracle.lindblad_evolve(oracle.initial_state(p, cfg), p, cfg)
    assert traj.trace_err.max() <= 1e-8
    assert traj.hermiticity_err < 1e-10
    assert traj.min_eigenvalue > -1e-4


def test_truncation_error_raised():
    p = dataclasses.replace(DESK, eps_r=0.2)
    cfg = oracle.auto_config(p, n_max=3)
    cfg = oracle.FockConfig(3, cfg.dt, 100.0)
    with pytest.raises(TruncationError):
        oracle.lindblad_evolve(oracle.initial_state(p, cfg), p, cfg)


def test_initial_state_validation():
    cfg = oracle.FockConfig(n_max=4, dt=0.01, t_final=1.0)
    rho = oracle.initial_state(DESK, cfg)
    assert np.trace(rho) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        oracle.lindblad_evolve(rho[:4, :4], DESK, cfg)
    with pytest.raises(ValidationError):
        oracle.lindblad_evolve(2 * rho, DESK, cfg)
    with pytest.raises(ValidationError):
        oracle.FockConfig(n_max=1, dt=0.1, t_final=1.0)
    with pytest.raises(ValidationError):
        oracle.LabFrameParams(0, 0, 0.0, 0, 0, 1, 1)


def test_trajectory_dump(tmp_path):
    p = DESK
    cfg = oracle.FockConfig(4, 1.0 / 400, 2.0)
    traj = oracle.lindblad_evolve(oracle.initial_state(p, cfg), p, cfg)
    write_trajectory(tmp_path / "traj.csv", traj, stride=10)
    _, cols = read_columns(tmp_path / "traj.csv", TRAJECTORY_COLUMNS)
    assert np.array_equal(cols["re_a"], traj.a_expect.real[::10])


# ---------------------------------------------------------------- demodulation


def test_demodulation_recovers_rotating_amplitude():
    fr = 1.0
    t = np.arange(0, 40, 1 / 64)
    alpha = 0.3 - 0.4j
    res = oracle.demodulate(t, alpha * np.exp(-2j * math.pi * fr * t), fr, 20)
    assert res.magnitude == pytest.approx(0.5, rel=1e-12)
    # Q is the sine quadrature with the sign of a lock-in: I + iQ = conj(alpha)
    assert complex(res.i, res.q) == pytest.approx(alpha.conjugate(), rel=1e-12)


def test_demodulation_checks():
    t = np.arange(0, 40, 1 / 64)
    a = np.exp(-2j * math.pi * t)
    with pytest.raises(ValidationError):
        oracle.demodulate(t, a, 1.0, 3)
    with pytest.raises(ValidationError):
        oracle.demodulate(t[:100], a[:100], 1.0, 20)
    with pytest.warns(RuntimeWarning):
        oracle.demodulate(t, a, 1.01, 10)


def test_compare_rejects_short_runs_and_small_truncation():
    with pytest.raises(ValidationError):
        oracle.oracle_iq_compare(DESK, oracle.FockConfig(12, 1 / 350, 50.0))
    big = dataclasses.replace(DESK, eps_r=0.02)
    with pytest.raises(ValidationError, match="n_max"):
        oracle.oracle_iq_compare(big, oracle.auto_config(big, n_max=4))
    with pytest.raises(ValidationError):
        oracle.oracle_iq_compare(dataclasses.replace(DESK, kappa=0.0))


def test_regime_flags():
    flags = oracle.regime_flags(DESK)
    assert flags == {"adiabatic": True, "weak_drive": True, "weak_coupling": True}
    assert not oracle.regime_flags(dataclasses.replace(DESK, tc=1.0))["adiabatic"]


# ---------------------------------------------------------------- full runs


@pytest.mark.slow
def test_desk_reports(desk_reports):
    for sign, rep in desk_reports.items():
        assert rep.trace_error <= 1e-8
        assert rep.drift < 5e-3
        assert rep.relative_error < (0.05 if sign else 0.01)
    # reversing eps_q reverses the shift of the magnitude, as in the closed form
    m0 = desk_reports[0].oracle_magnitude
    up = desk_reports[1].oracle_magnitude - m0
    down = desk_reports[-1].oracle_magnitude - m0
    assert up * down < 0
    assert np.sign(up) == np.sign(desk_reports[1].effective_magnitude - desk_reports[0].effective_magnitude)


@pytest.mark.slow
def test_truncation_stability(desk_reports, desk_report_n24):
    rep = desk_report_n24
    assert rep.extras["n_max"] == 24
    ref = desk_reports[1].oracle_magnitude
    assert abs(rep.oracle_magnitude - ref) / ref < 1e-3


@pytest.mark.slow
def test_error_decreases_with_adiabaticity():
    """The eps_q-induced change of the magnitude approaches the closed form as
    fq/fr grows; its relative error falls monotonically over 5, 7, 10, 14."""
    errors = []
    for ratio in (5, 7, 10, 14):
        tc = ratio / 2.0
        p = dataclasses.replace(DESK, tc=tc, eps_q=0.1 * tc, g0=DESK.g0 / DESK.tc * tc)
        on, off = oracle.oracle_sweep([p, dataclasses.replace(p, eps_q=0.0)])
        shift_oracle = on.oracle_magnitude - off.oracle_magnitude
        shift_eff = on.effective_magnitude - off.effective_magnitude
        errors.append(abs(shift_oracle - shift_eff) / abs(shift_eff))
    assert all(b < a for a, b in zip(errors, errors[1:])), errors
    # leading behaviour ~ (fr/fq)^2: the 5 -> 10 drop is at least a factor 3
    assert errors[0] / errors[2] > 3.0
