"""Acceptance suite: one PASS/FAIL line per criterion, printed to the terminal.

The Monte Carlo sweeps use the default master seed 0; nothing here was
tuned to a particular seed.
"""

import numpy as np
import pytest

from secran.hermitian import LN2, random_psd
from secran.optimizer import (
    ALL_STRATEGIES,
    StrategyFlags,
    _floor_omega,
    absorb_artificial_noise,
    initialize_feasible,
    run_cccp,
    solve_subproblem,
    validate_feasibility,
    CccpProblem,
)
from secran.rates import (
    DesignVariables,
    all_subsets,
    fronthaul_usage_gS,
    per_ru_power,
    secrecy_rate_fk,
    smooth_objective,
    surrogate_fk_tilde,
    surrogate_gS_tilde,
)
from secran.experiments import ExperimentSpec, csv_text, run_sweep
from secran.strategies import run_strategy
from secran.system import SystemConfig, draw_realization, fixed_channels

SM, SP, NM, NP = (f.label for f in ALL_STRATEGIES)


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
    assert ok, detail


def random_config(rng, max_rus=3, max_ues=3, max_ant=2):
    return SystemConfig(
        num_rus=int(rng.integers(1, max_rus + 1)),
        num_ues=int(rng.integers(1, max_ues + 1)),
        ru_antennas=int(rng.integers(1, max_ant + 1)),
        ue_antennas=int(rng.integers(1, max_ant + 1)),
        fronthaul_capacity=float(rng.uniform(0.5, 3.0)),
    ).with_power_db(float(rng.uniform(0.0, 30.0)))


# --------------------------------------------------------------- 1

def test_criterion_1_cccp_monotonicity(capsys):
    rng = np.random.default_rng(1)
    worst_step, worst_violation = np.inf, 0.0
    for i in range(100):
        config = random_config(rng)
        channels = draw_realization(config, int(rng.integers(2**32)))
        objectives = []

        def check(v):
            objectives.append(smooth_objective(v, config, channels))
            rep = validate_feasibility(v, config, channels)
            nonlocal worst_violation
            worst_violation = max(worst_violation, rep.max_violation)

        run_cccp(config, channels, StrategyFlags(True, True), rng=i, callback=check)
        if len(objectives) > 1:
            worst_step = min(worst_step, float(np.min(np.diff(objectives))))
    ok = worst_step >= -1e-6 and worst_violation <= 1e-6
    report(capsys, 1, ok, f"100 instances, worst objective step {worst_step:.3e} (>= -1e-6), "
                          f"worst exact constraint violation {worst_violation:.3e} (<= 1e-6)")


# --------------------------------------------------------------- 2

def test_criterion_2_surrogate_bounds(capsys):
    rng = np.random.default_rng(2)
    worst = dict(f_tangent=0.0, g_tangent=0.0, f_bound=-np.inf, g_bound=-np.inf)
    for _ in range(1000):
        config = random_config(rng)
        channels = draw_realization(config, int(rng.integers(2**32)))
        n = config.n_r

        def point(scale):
            R = np.stack([random_psd(rng, n, rank=int(rng.integers(1, n + 1)), scale=scale)
                          for _ in range(config.num_ues)])
            return DesignVariables(R, random_psd(rng, n, scale=scale) + 1e-2 * np.eye(n))

        old, new = point(float(rng.uniform(0.1, 10))), point(float(rng.uniform(0.1, 10)))
        for k in range(config.num_ues):
            f_old = secrecy_rate_fk(old, config, channels, k)
            worst["f_tangent"] = max(worst["f_tangent"], abs(surrogate_fk_tilde(old, old, config, channels, k) - f_old))
            worst["f_bound"] = max(worst["f_bound"], surrogate_fk_tilde(new, old, config, channels, k)
                                   - secrecy_rate_fk(new, config, channels, k))
        for S in all_subsets(config.num_rus):
            g_old = fronthaul_usage_gS(old, config.blocks, S)
            worst["g_tangent"] = max(worst["g_tangent"], abs(surrogate_gS_tilde(old, old, config.blocks, S) - g_old))
            worst["g_bound"] = max(worst["g_bound"], fronthaul_usage_gS(new, config.blocks, S)
                                   - surrogate_gS_tilde(new, old, config.blocks, S))
    ok = all(v <= 1e-9 for v in worst.values())
    report(capsys, 2, ok, "1000 pairs, " + ", ".join(f"{k} {v:.2e}" for k, v in worst.items()) + " (all <= 1e-9)")


# --------------------------------------------------------------- 3

def test_criterion_3_noise_absorption(capsys):
    rng = np.random.default_rng(3)
    f_diff = p_diff = g_increase = 0.0
    for _ in range(1000):
        config = random_config(rng)
        channels = draw_realization(config, int(rng.integers(2**32)))
        n = config.n_r
        v = DesignVariables(
            np.stack([random_psd(rng, n) for _ in range(config.num_ues)]),
            random_psd(rng, n) + 1e-2 * np.eye(n),
            tuple(random_psd(rng, b, rank=int(rng.integers(1, b + 1))) for b in config.blocks.block_sizes),
        )
        a = absorb_artificial_noise(v)
        for k in range(config.num_ues):
            f_diff = max(f_diff, abs(secrecy_rate_fk(a, config, channels, k) - secrecy_rate_fk(v, config, channels, k)))
        for i in range(config.num_rus):
            p_diff = max(p_diff, abs(per_ru_power(a, config.blocks, i) - per_ru_power(v, config.blocks, i)))
        for S in all_subsets(config.num_rus):
            g_increase = max(g_increase, fronthaul_usage_gS(a, config.blocks, S)
                             - fronthaul_usage_gS(v, config.blocks, S))
    # "exact" is checked at floating-point resolution
    ok = f_diff <= 1e-10 and p_diff <= 1e-10 and g_increase <= 1e-10
    report(capsys, 3, ok, f"1000 samples, max |delta f_k| {f_diff:.1e}, max |delta power| {p_diff:.1e}, "
                          f"max g_S increase {g_increase:.1e}")


# --------------------------------------------------------------- 4

H1, H2, P_LIN, C_BITS = 1.0, 0.6, 10.0, 1.5
GRID = 200


def _lg(x):
    return np.log(x) / LN2


def _vphi(x, y):
    return _lg(y) + (x - y) / (y * LN2)


def _grid():
    p = np.linspace(0.0, P_LIN, GRID)
    w = np.linspace(P_LIN / GRID, P_LIN, GRID)
    return np.meshgrid(p, p, w, indexing="ij", sparse=True)


def _true_objective(p1, p2, w):
    S = p1 + p2 + w
    a, b = H1**2, H2**2
    f1 = _lg(a * S + 1) - _lg(a * (p2 + w) + 1) - _lg(b * S + 1) + _lg(b * (p2 + w) + 1)
    f2 = _lg(b * S + 1) - _lg(b * (p1 + w) + 1) - _lg(a * S + 1) + _lg(a * (p1 + w) + 1)
    feasible = (S <= P_LIN) & (_lg(S) - _lg(w) <= C_BITS)
    return np.where(feasible, f1 + f2, -np.inf)


def _surrogate_objective(p1, p2, w, q1, q2, w0):
    S, S0 = p1 + p2 + w, q1 + q2 + w0
    a, b = H1**2, H2**2
    f1 = (_lg(a * S + 1) + _lg(b * (p2 + w) + 1)
          - _vphi(a * (p2 + w) + 1, a * (q2 + w0) + 1) - _vphi(b * S + 1, b * S0 + 1))
    f2 = (_lg(b * S + 1) + _lg(a * (p1 + w) + 1)
          - _vphi(b * (p1 + w) + 1, b * (q1 + w0) + 1) - _vphi(a * S + 1, a * S0 + 1))
    feasible = (S <= P_LIN) & (_vphi(S, S0) - _lg(w) <= C_BITS)
    return np.where(feasible, f1 + f2, -np.inf)


def test_criterion_4_scalar_grid_oracle(capsys):
    config = SystemConfig(num_rus=1, num_ues=2, fronthaul_capacity=C_BITS, power_limit=P_LIN)
    channels = fixed_channels(config, [np.array([[H1]]), np.array([[H2]])])
    p1, p2, w = _grid()
    grid_opt = float(np.max(_true_objective(p1, p2, w)))

    _, trace = run_cccp(config, channels, StrategyFlags(True, True), rng=0)
    cccp_value = trace.objective[-1]

    # every subproblem on the CCCP path against its own grid oracle
    prob = CccpProblem(config, channels, StrategyFlags(True, True))
    old = initialize_feasible(config, channels, np.random.default_rng(0))
    worst_sub = 0.0
    for _ in range(trace.iterations):
        q1, q2 = old.R[0, 0, 0].real, old.R[1, 0, 0].real
        w0 = old.Omega[0, 0].real
        oracle = float(np.max(_surrogate_objective(p1, p2, w, q1, q2, w0)))
        sol = solve_subproblem(old, config, channels, problem=prob)
        worst_sub = max(worst_sub, abs(sol.objective - oracle))
        old = prob.decode(_floor_omega(prob, prob.encode(sol.new_vars)))
    ok = cccp_value >= grid_opt - 5e-2 and worst_sub <= 1e-2
    report(capsys, 4, ok, f"CCCP {cccp_value:.5f} vs grid optimum {grid_opt:.5f} (gap {grid_opt - cccp_value:+.2e}, "
                          f"allowed 5e-2); worst subproblem |solver - grid| {worst_sub:.2e} over "
                          f"{trace.iterations} solves (<= 1e-2)")


# --------------------------------------------------------------- 5

@pytest.fixture(scope="module")
def power_sweep():
    base = SystemConfig(num_rus=2, num_ues=3, ru_antennas=1, ue_antennas=1, fronthaul_capacity=2.0)
    spec = ExperimentSpec(base, sweep_variable="power_dB", sweep_values=(0, 5, 10, 15, 20, 25, 30),
                          num_draws=50, master_seed=0)
    return spec, run_sweep(spec)


def test_criterion_5_power_sweep(capsys, power_sweep):
    spec, res = power_sweep
    P = spec.sweep_values
    m = {lab: [res.mean(lab, p) for p in P] for lab in (SM, SP, NM, NP)}
    with capsys.disabled():
        print("\n  P [dB]   " + "  ".join(f"{lab:>22s}" for lab in m))
        for i, p in enumerate(P):
            print(f"  {p:6.0f}   " + "  ".join(f"{m[lab][i]:22.4f}" for lab in m))
    gap = np.subtract(m[SM], m[SP])
    a = bool(np.all(gap >= 0) and np.all(np.diff(gap) >= 0))
    hi = [i for i, p in enumerate(P) if p >= 20]
    b = all(m[SM][i] > m[NM][i] and m[SP][i] > m[NP][i] for i in hi)
    i25, i30, i20 = P.index(25), P.index(30), P.index(20)
    growth = {lab: (m[lab][i30] - m[lab][i25]) / m[lab][i25] for lab in (SM, SP)}
    c = all(g <= 0.10 for g in growth.values())
    d = all(m[lab][i20] >= m[lab][i25] >= m[lab][i30] for lab in (NM, NP))
    parts = {
        "a": f"mv - p2p gap {np.array2string(gap, precision=3)} non-negative and non-decreasing",
        "b": "secure > non-secure at P >= 20 dB",
        "c": "secure growth 25->30 dB " + ", ".join(f"{k} {v:+.1%}" for k, v in growth.items()) + " (<= 10%)",
        "d": "non-secure 20/25/30 dB " + "; ".join(
            f"{lab} {m[lab][i20]:.3f}/{m[lab][i25]:.3f}/{m[lab][i30]:.3f}" for lab in (NM, NP)) + " non-increasing",
    }
    for key, ok in zip("abcd", (a, b, c, d)):
        with capsys.disabled():
            print(f"  ({key}) {'ok  ' if ok else 'MISS'} {parts[key]}")
    report(capsys, 5, a and b and c and d, "power-sweep orderings (a)-(d), 50 draws, one antenna per RU")


# --------------------------------------------------------------- 6

@pytest.fixture(scope="module")
def ue_sweep():
    base = SystemConfig(num_rus=3, num_ues=2, fronthaul_capacity=1.0).with_power_db(20)
    spec = ExperimentSpec(base, sweep_variable="num_ues", sweep_values=(2, 3, 4, 5, 6), num_draws=50, master_seed=0)
    return spec, run_sweep(spec)


def test_criterion_6_ue_sweep(capsys, ue_sweep):
    spec, res = ue_sweep
    U = spec.sweep_values
    m = {lab: [res.mean(lab, u) for u in U] for lab in (SM, SP, NM, NP)}
    with capsys.disabled():
        print("\n  N_U   " + "  ".join(f"{lab:>22s}" for lab in m))
        for i, u in enumerate(U):
            print(f"  {u:3.0f}   " + "  ".join(f"{m[lab][i]:22.4f}" for lab in m))
    mono = {lab: bool(np.all(np.diff(v) <= 0)) for lab, v in m.items()}
    sec_gain = (m[SM][-1] - m[SP][-1]) / m[SP][-1]
    ns_mv, ns_p2p = res.mean(NM, U[-1], "mean_nonsecrecy"), res.mean(NP, U[-1], "mean_nonsecrecy")
    ns_gain = (ns_mv - ns_p2p) / ns_p2p
    ok_mono = all(mono.values())
    ok_gain = sec_gain >= 0.30
    ok_ns = ns_gain < sec_gain
    with capsys.disabled():
        print("  non-increasing in N_U: " + ", ".join(f"{k} {'ok' if v else 'MISS'}" for k, v in mono.items()))
        print(f"  secrecy gain mv over p2p at N_U=6: {sec_gain:+.1%} (>= 30%) {'ok' if ok_gain else 'MISS'}")
        print(f"  non-secrecy gain mv over p2p at N_U=6: {ns_gain:+.1%} (< secrecy gain) {'ok' if ok_ns else 'MISS'}")
    report(capsys, 6, ok_mono and ok_gain and ok_ns,
           f"UE-count sweep, 50 draws: monotone {ok_mono}, secrecy gain {sec_gain:+.1%}, "
           f"non-secrecy gain {ns_gain:+.1%}")


# --------------------------------------------------------------- 7

def test_criterion_7_determinism(capsys):
    base = SystemConfig(num_rus=2, num_ues=2, fronthaul_capacity=2.0)
    spec = ExperimentSpec(base, sweep_values=(10, 20), num_draws=3, master_seed=99)
    outputs = []
    for workers in (1, 1, 2):
        res = run_sweep(spec, workers=workers)
        outputs.append(csv_text(res.rows, res.summary).encode("utf-8"))
    first, second, parallel = outputs
    ok = first == second == parallel
    report(capsys, 7, ok, f"two serial runs and one 2-process run give identical CSV bytes ({len(first)} bytes)")


# --------------------------------------------------------------- 8

def _max_report_diff(a, b):
    diffs = [np.max(np.abs(a.f - b.f)), np.max(np.abs(a.nonsecrecy_rate - b.nonsecrecy_rate)),
             np.max(np.abs(a.per_ru_power - b.per_ru_power))]
    diffs += [abs(a.fronthaul_usage[S] - b.fronthaul_usage[S]) for S in a.fronthaul_usage]
    return float(max(diffs))


def test_criterion_8_structural_collapses(capsys):
    rng = np.random.default_rng(8)
    worst_ru = worst_ue = 0.0
    for d in range(10):
        config = SystemConfig(num_rus=1, num_ues=int(rng.integers(2, 4)), ru_antennas=int(rng.integers(1, 3)),
                              fronthaul_capacity=float(rng.uniform(0.5, 3))).with_power_db(float(rng.uniform(0, 30)))
        ch = draw_realization(config, d)
        for secure in (True, False):
            a = run_strategy(StrategyFlags(secure, True), config, ch, init_seed=d).report
            b = run_strategy(StrategyFlags(secure, False), config, ch, init_seed=d).report
            worst_ru = max(worst_ru, _max_report_diff(a, b))
        config = SystemConfig(num_rus=int(rng.integers(1, 4)), num_ues=1, ru_antennas=int(rng.integers(1, 3)),
                              fronthaul_capacity=float(rng.uniform(0.5, 3))).with_power_db(float(rng.uniform(0, 30)))
        ch = draw_realization(config, 100 + d)
        for mv in (True, False):
            a = run_strategy(StrategyFlags(True, mv), config, ch, init_seed=d).report
            b = run_strategy(StrategyFlags(False, mv), config, ch, init_seed=d).report
            worst_ue = max(worst_ue, _max_report_diff(a, b))
    ok = worst_ru <= 1e-6 and worst_ue <= 1e-6
    report(capsys, 8, ok, f"N_R = 1: mv vs p2p max report diff {worst_ru:.1e}; "
                          f"N_U = 1: secure vs non-secure {worst_ue:.1e} (<= 1e-6, 10 draws each)")
