"""Acceptance criteria 1-13, each at its stated tolerance.

Every test prints one ``[PASS]``/``[FAIL] criterion N: ...`` line, which is
also collected into the pytest terminal summary. Run standalone with
``python3 tests/test_acceptance.py`` for just the report.
"""
import math
import time

import numpy as np
import pytest

from irsgame.analysis import delay_stability_bound, detect_equilibrium
from irsgame.cli import main
from irsgame.dynamics import (DynamicsConfig, ReplicatorField, integrate_classical,
                              integrate_delayed, integrate_fractional, mittag_leffler,
                              picard_solve)
from irsgame.experiments import get_experiment, run_experiment
from irsgame.irs_optim import combined_channel, compute_beamformer, optimize_phase_shifts
from irsgame.channel import ChannelSet
from irsgame.scenario import builtin_scenario_path, load_scenario
from irsgame.utility import evaluate_strategies, net_values

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run outside pytest
    ACCEPTANCE_LINES = []

MU = math.exp(-2)


def report(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def field_for(name, mu=MU):
    s = load_scenario(builtin_scenario_path(name))
    return ReplicatorField(net_values(evaluate_strategies(s)), s.population, mu)


def decay(y):
    return -y


def random_channels(rng, L, K):
    def cn(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return ChannelSet(direct=cn(L), irs_user=cn(K), bs_irs=cn(K, L))


def test_criterion_01_simplex_conservation():
    traj = integrate_classical(DynamicsConfig(step=0.01, horizon=1000.0), field_for("table2"))
    sums = traj.shares.sum(axis=1)
    sum_err = np.abs(sums - 1).max()
    min_p = traj.shares.min()
    renorm = traj.metadata["renormalization_total"]
    ok = (traj.converged_at is not None and sum_err <= 1e-9 and min_p >= 0 and renorm <= 1e-4)
    report(1, ok, f"{len(traj)} steps to t={traj.converged_at}, max|sum-1|={sum_err:.2e}, "
                  f"min p={min_p:.3e}, renormalization={renorm:.2e}")


def test_criterion_02_equal_utility_equilibrium():
    start = time.perf_counter()
    traj = integrate_classical(DynamicsConfig(step=0.01, horizon=1000.0), field_for("table2"))
    rep = detect_equilibrium(traj)
    elapsed = time.perf_counter() - start
    ok = rep.converged and rep.relative_spread <= 1e-3 and elapsed <= 60
    report(2, ok, f"converged={rep.converged} at t={rep.time_to_converge}, relative spread="
                  f"{rep.relative_spread:.2e} over {len(rep.active)} active, {elapsed:.2f}s")


def test_criterion_03_fractional_reduction():
    f = field_for("table2")
    base = dict(step=1e-3, horizon=10.0, stop_at_convergence=False)
    a = integrate_classical(DynamicsConfig(**base), f)
    b = integrate_fractional(DynamicsConfig(kind="fractional", order=1.0, **base), f)
    diff = float(np.abs(a.shares - b.shares).max())
    report(3, diff <= 1e-6, f"beta=1 vs Euler at h=1e-3, T=10: max |dp| = {diff:.2e}")


def test_criterion_04_mittag_leffler_oracle():
    cfg = DynamicsConfig(kind="fractional", order=0.8, step=1e-3, horizon=1.0,
                         initial_shares=[1.0], stop_at_convergence=False)
    y = integrate_fractional(cfg, decay, project=False).final[0]
    ref = float(mittag_leffler(0.8, -1.0, terms=60))
    err = abs(y - ref)
    report(4, err <= 1e-3, f"y(1)={y:.8f}, E_0.8(-1)={ref:.8f}, error {err:.2e}")


def test_criterion_05_dde_oracle():
    amps = {}
    finals = {}
    for delay in (1.0, 1.7):
        cfg = DynamicsConfig(kind="delayed", delay=delay, step=0.01, horizon=200.0,
                             initial_shares=[1.0], stop_at_convergence=False)
        traj = integrate_delayed(cfg, decay, project=False)
        y, t = traj.shares[:, 0], traj.times
        finals[delay] = abs(y[-1])
        amps[delay] = (np.abs(y[(t > 90) & (t <= 100)]).max(),
                       np.abs(y[(t > 190) & (t <= 200)]).max())
    ok = finals[1.0] < 1e-3 and amps[1.7][1] > amps[1.7][0]
    report(5, ok, f"delta=1.0: |y(200)|={finals[1.0]:.2e}; delta=1.7: amplitude "
                  f"{amps[1.7][0]:.3g} at t=100 -> {amps[1.7][1]:.3g} at t=200")


def test_criterion_06_delay_straddle():
    f = field_for("two_sp")
    bound = delay_stability_bound(f.net_values, f.learning_rate, f.population)
    base = detect_equilibrium(integrate_classical(DynamicsConfig(horizon=10_000.0), f))
    assert base.converged
    horizon = 10 * base.time_to_converge
    res = {}
    for factor in (0.5, 4.0):
        cfg = DynamicsConfig(kind="delayed", delay=factor * bound, horizon=horizon)
        res[factor] = detect_equilibrium(integrate_delayed(cfg, f)).converged
    ok = res[0.5] and not res[4.0]
    report(6, ok, f"delta*={bound:.4f}, horizon={horizon:.2f}; converged at 0.5 delta*: "
                  f"{res[0.5]}, at 4 delta*: {res[4.0]}")


def test_criterion_07_phase_shift_and_beamformer():
    worst_unit, worst_drop, worst_power = 0.0, 0.0, 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        ch = random_channels(rng, int(rng.integers(1, 6)), int(rng.integers(1, 17)))
        cfg, _ = optimize_phase_shifts(ch, tol=1e-12, max_iter=5000, accept_last=True)
        trace = np.array(cfg.objective_trace)
        worst_drop = max(worst_drop, float(np.max(-np.diff(trace) / trace[1:], initial=0.0)))
        worst_unit = max(worst_unit, float(np.abs(np.abs(cfg.phases) - 1).max()))
        J = float(rng.uniform(0.1, 10))
        w = compute_beamformer(ch, cfg, J).w
        worst_power = max(worst_power, abs(np.linalg.norm(w) ** 2 - J) / J)

    rng = np.random.default_rng(2024)
    ch = random_channels(rng, 4, 1)
    cfg, _ = optimize_phase_shifts(ch, tol=1e-14)
    best = np.linalg.norm(combined_channel(ch, cfg))
    g = ch.bs_irs.conj().T[:, 0] * ch.irs_user[0]
    phi = np.linspace(0, 2 * np.pi, 1_000_000, endpoint=False)
    grid_best = np.sqrt((np.abs(ch.direct[None, :] + np.exp(1j * phi)[:, None] * g) ** 2)
                        .sum(axis=1)).max()
    rel = abs(best - grid_best) / grid_best

    ok = (worst_unit <= 4 * np.finfo(float).eps and worst_drop <= 1e-12 and rel <= 1e-4
          and worst_power <= 1e-12)
    report(7, ok, f"max ||theta|-1|={worst_unit:.1e}, max relative objective drop="
                  f"{worst_drop:.1e}, K=1 vs grid {rel:.1e}, power error {worst_power:.1e}")


def test_criterion_08_picard_cross_validation():
    f = field_for("table2")
    cfg = DynamicsConfig(step=0.01, horizon=1.0, stop_at_convergence=False,
                         initial_shares="dirichlet", seed=1)
    pic = picard_solve(cfg, f)
    eul = integrate_classical(cfg, f)
    diff = float(np.abs(pic.shares - eul.shares).max())
    report(8, diff <= 1e-4, f"Picard ({pic.metadata['sweeps']} sweeps) vs Euler on T=1: "
                            f"max |dp| = {diff:.2e}")


def test_criterion_09_irs_size_response():
    res = run_experiment(get_experiment("fig8_irs_size"))
    ok, parts = True, []
    for cfg in res.configs:
        shares = [res.metric("sp_share", k, cfg, 2)[0] for k in (8, 16, 32)]
        ok &= shares[0] <= shares[1] <= shares[2]
        parts.append(f"{cfg} " + "/".join(f"{s:.4f}" for s in shares))
    report(9, bool(ok), "SP2 share over K2 = 8, 16, 32: " + "; ".join(parts))


def test_criterion_10_irs_benefit():
    res = run_experiment(get_experiment("fig9_no_irs"))
    on = res.metric("total_utility", True)[0]
    off = res.metric("total_utility", False)[0]
    report(10, on > off, f"total utility with IRS {on:.4f} vs without {off:.4f}")


def test_criterion_11_learning_rate_ordering():
    res = run_experiment(get_experiment("fig9_learning_rate"))
    times = [res.metric("time_to_converge", mu)[0] for mu in res.spec.sweep_values]
    ok = None not in times and times[0] > times[1] > times[2]
    report(11, ok, "time to converge for mu = e^-3, e^-2, e^-1: "
                   + ", ".join(f"{t:.2f}" for t in times))


def test_criterion_12_memory_order_ordering():
    res = run_experiment(get_experiment("fig4_convergence"))
    tv = {b: res.metric("early_total_variation", config=f"fractional_b{b}")[0]
          for b in ("0.8", "1", "1.1")}
    tc = {b: res.metric("time_to_converge", config=f"fractional_b{b}")[0]
          for b in ("1", "1.1")}
    ok = (tv["1.1"] > tv["1"] and tv["1.1"] > tv["0.8"] and None not in tc.values()
          and tc["1.1"] > tc["1"])
    report(12, ok, f"early TV b=0.8/1/1.1: {tv['0.8']:.4f}/{tv['1']:.4f}/{tv['1.1']:.4f}; "
                   f"time to converge b=1: {tc['1']}, b=1.1: {tc['1.1']}")


def test_criterion_13_determinism(tmp_path):
    table2 = builtin_scenario_path("table2")
    commands = {
        "run": lambda d: ["run", table2, "--kind", "fractional", "--beta", "0.9", "--step", "0.1",
                          "--horizon", "100", "--output", d / "traj.csv"],
        "experiment": lambda d: ["experiment", "fig6_direction_field", "--output-dir", d],
        "field": lambda d: ["field", table2, "--axes", "1", "2", "--output", d / "field.csv"],
    }
    mismatched = []
    n_tables = 0
    for name, argv in commands.items():
        dirs = [tmp_path / name / str(i) for i in range(2)]
        for d in dirs:
            d.mkdir(parents=True)
            assert main([str(a) for a in argv(d)]) == 0
        tables = sorted(p.relative_to(dirs[0]) for p in dirs[0].rglob("*.csv"))
        n_tables += len(tables)
        for rel in tables:
            if (dirs[0] / rel).read_bytes() != (dirs[1] / rel).read_bytes():
                mismatched.append(f"{name}:{rel}")
    ok = n_tables > 0 and not mismatched
    report(13, ok, f"{n_tables} tables from run/experiment/field repeated; "
                   f"mismatched: {mismatched or 'none'}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
