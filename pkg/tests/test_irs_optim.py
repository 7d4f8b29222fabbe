import numpy as np
import pytest

from irsgame.channel import ChannelSet, synthesize_channels
from irsgame.errors import DomainError, NonConvergenceError
from irsgame.irs_optim import (build_r_matrix, combined_channel, compute_beamformer,
                               optimize_phase_shifts, unit_projection)


def random_channels(rng, L, K, scale=1.0):
    def cn(*shape):
        return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return ChannelSet(direct=cn(L), irs_user=cn(K), bs_irs=cn(K, L))


def test_unit_projection_definition():
    np.testing.assert_allclose(unit_projection([3 + 4j, -2j]), [0.6 + 0.8j, -1j])


def test_unit_projection_idempotent(rng):
    z = np.exp(1j * rng.uniform(0, 2 * np.pi, 50))
    np.testing.assert_allclose(unit_projection(z), z, atol=1e-15)


def test_unit_projection_rejects_zero():
    with pytest.raises(DomainError):
        unit_projection([1 + 1j, 0])


def test_r_matrix_hermitian_with_zero_corner(rng):
    ch = random_channels(rng, 4, 8)
    R = build_r_matrix(ch)
    assert R.shape == (9, 9)
    assert np.abs(R - R.conj().T).max() <= 1e-12
    assert R[-1, -1] == 0


def test_r_matrix_scalar_block(rng):
    ch = random_channels(rng, 3, 1)
    R = build_r_matrix(ch)
    expect = abs(ch.irs_user[0]) ** 2 * np.linalg.norm(ch.bs_irs) ** 2
    assert R[0, 0].real == pytest.approx(expect, rel=1e-12)


def test_r_matrix_quadratic_form_equals_channel_gain(rng):
    # v^H R v + ||h||^2 = ||h + G^H diag(h_IU) theta||^2 for v = [theta, 1]
    ch = random_channels(rng, 4, 6)
    theta = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    v = np.append(theta, 1.0)
    lhs = np.vdot(v, build_r_matrix(ch) @ v).real + np.linalg.norm(ch.direct) ** 2
    assert lhs == pytest.approx(np.linalg.norm(combined_channel(ch, theta)) ** 2, rel=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_objective_non_decreasing(seed):
    rng = np.random.default_rng(seed)
    ch = random_channels(rng, int(rng.integers(1, 6)), int(rng.integers(1, 17)))
    cfg, it = optimize_phase_shifts(ch, tol=1e-12, max_iter=5000, accept_last=True)
    trace = np.array(cfg.objective_trace)
    assert np.all(np.diff(trace) >= -1e-12 * trace[1:])
    assert np.abs(np.abs(cfg.phases) - 1).max() <= 4 * np.finfo(float).eps
    assert it == cfg.iterations


def test_k1_matches_grid_search(rng):
    ch = random_channels(rng, 4, 1)
    cfg, _ = optimize_phase_shifts(ch, tol=1e-14, max_iter=10_000)
    best = np.linalg.norm(combined_channel(ch, cfg))
    g = ch.bs_irs.conj().T[:, 0] * ch.irs_user[0]
    phi = np.linspace(0, 2 * np.pi, 1_000_000, endpoint=False)
    grid = np.abs(ch.direct[None, :] + np.exp(1j * phi)[:, None] * g[None, :])
    grid_best = np.sqrt((grid ** 2).sum(axis=1)).max()
    assert best == pytest.approx(grid_best, rel=1e-4)
    assert best >= grid_best * (1 - 1e-9)


def test_optimization_beats_random_phases(table2):
    s = table2.strategies[1]
    ch = synthesize_channels(table2, s)
    cfg, _ = optimize_phase_shifts(ch)
    best = np.linalg.norm(combined_channel(ch, cfg))
    rng = np.random.default_rng(0)
    for _ in range(50):
        theta = np.exp(1j * rng.uniform(0, 2 * np.pi, s.active_elements))
        assert np.linalg.norm(combined_channel(ch, theta)) <= best * (1 + 1e-12)


def test_zero_irs_channel_returns_direct(rng):
    ch = random_channels(rng, 4, 8)
    ch = ChannelSet(ch.direct, np.zeros(8, complex), ch.bs_irs)
    cfg, _ = optimize_phase_shifts(ch)
    np.testing.assert_allclose(np.abs(cfg.phases), 1.0)
    np.testing.assert_array_equal(combined_channel(ch, cfg), ch.direct)


def test_non_convergence_raises_unless_accepted(rng):
    ch = random_channels(rng, 4, 16)
    with pytest.raises(NonConvergenceError) as err:
        optimize_phase_shifts(ch, tol=1e-300, max_iter=2)
    assert err.value.iterations == 2
    cfg, it = optimize_phase_shifts(ch, tol=1e-300, max_iter=2, accept_last=True)
    assert it == 2 and not cfg.converged


@pytest.mark.parametrize("bad", [dict(tol=0.0), dict(max_iter=0)])
def test_optimizer_argument_guards(rng, bad):
    with pytest.raises(DomainError):
        optimize_phase_shifts(random_channels(rng, 2, 2), **bad)


def test_beamformer_power_exact(rng):
    for _ in range(20):
        ch = random_channels(rng, 4, 8)
        cfg, _ = optimize_phase_shifts(ch, accept_last=True)
        J = float(rng.uniform(1e-3, 10))
        w = compute_beamformer(ch, cfg, J)
        assert np.linalg.norm(w.w) ** 2 == pytest.approx(J, rel=1e-12)


def test_matched_filter_beats_random_beamformers(rng):
    ch = random_channels(rng, 4, 8)
    cfg, _ = optimize_phase_shifts(ch)
    c = combined_channel(ch, cfg)
    J = 2.0
    best = abs(np.vdot(c, compute_beamformer(ch, cfg, J).w))
    for _ in range(100):
        w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        w *= np.sqrt(J) / np.linalg.norm(w)
        assert abs(np.vdot(c, w)) <= best * (1 + 1e-12)


def test_beamformer_guards(rng):
    ch = random_channels(rng, 2, 2)
    with pytest.raises(DomainError):
        compute_beamformer(ch, np.ones(2), 0.0)
    zero = ChannelSet(np.zeros(2, complex), np.zeros(2, complex), np.zeros((2, 2), complex))
    with pytest.raises(DomainError):
        compute_beamformer(zero, np.ones(2), 1.0)
