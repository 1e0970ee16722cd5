"""Acceptance suite: one test per release criterion, c01 through c10.

Each test prints a single pass/fail line under ``pytest -v``.  The checks
re-derive every expected quantity independently of the code path under
test: nested-slope values against a plain recursive evaluator, offset
budgets against a 16x finer chord-gap grid, decrease bounds against the
realized loss trajectory, and the convergence certificate against honest
target probes on real runs.  Expensive boosting runs are shared through
module-scoped fixtures.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

import secantboost as sb
from secantboost import (
    BoostConfig,
    Ensemble,
    V_derivative,
    V_derivative_expansion,
    bregman_secant,
    convergence_certificate,
    dataset_from_numeric,
    edge,
    epsilon_from,
    find_alpha,
    make_builtin,
    max_confidence,
    nonzero_shift,
    partial_weights,
    q_star,
    run,
    secant_slopes,
    train_tree,
    w2_from_alpha,
)
from secantboost.cli import EXIT_CONSTANT_LOSS, RunConfig, main, run_cross_validation
from secantboost.vderiv import _recursive_v_derivative

SEED = 20260819

# Losses exercised by the 50-iteration soundness/decrease runs.
RUN_LOSSES = (
    ("logistic", {}),
    ("clipped_logistic", {"q": -2.0}),
    ("spring", {"Q": 500.0}),
)


# ---------------------------------------------------------------------------
# Shared expensive runs
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def fifty_iter_runs(separable200):
    """50-iteration runs with recorded per-example vectors, one per loss."""
    out = {}
    for name, params in RUN_LOSSES:
        F = make_builtin(name, **params)
        cfg = BoostConfig(record_vectors=True, seed=101)
        ens, rows = run(F, separable200, 50, cfg)
        out[name] = (F, ens, rows)
    return out


@pytest.fixture(scope="module")
def stump_run(separable200):
    """Logistic stumps, T=200, on the separable dataset; timed for c07."""
    F = make_builtin("logistic")
    start = time.perf_counter()
    ens, rows = run(F, separable200, 200, BoostConfig(seed=7))
    elapsed = time.perf_counter() - start
    return F, ens, rows, elapsed


@pytest.fixture(scope="module")
def board_cv(boards):
    """10-fold CV on the board dataset with 20-node trees; timed for c07.

    One CV sweep per training-label noise rate; the test splits stay clean.
    """
    results = {}
    start = time.perf_counter()
    for eta in (0.0, 0.05, 0.1, 0.2):
        cfg = RunConfig(
            loss="logistic", T=18, max_nodes=20, folds=10, noise_eta=eta, seed=29
        )
        fold_rows, curves, mean_curve = run_cross_validation(cfg, boards)
        results[eta] = (fold_rows, curves, mean_curve)
    elapsed = time.perf_counter() - start
    return results, elapsed


def _initial_loss(F, ens, S) -> float:
    y = np.asarray(S.labels, dtype=np.float64)
    return float(np.mean(F(y * ens.h0)))


# ---------------------------------------------------------------------------
# c01 - nested-slope evaluators agree
# ---------------------------------------------------------------------------


def test_c01_recursive_and_expansion_slopes_agree():
    """1000 random (loss, z, offsets) probes, orders 1..4: the one-line
    recursive evaluator and the signed-sum expansion match to 1e-8
    relative error, in under five seconds."""
    pool = [
        make_builtin("logistic"),
        make_builtin("exponential"),
        make_builtin("spring", Q=2.0),
        make_builtin("clipped_logistic", q=-1.0),
    ]
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    for _ in range(1000):
        F = pool[rng.integers(len(pool))]
        z = float(rng.uniform(-3.0, 3.0))
        n = int(rng.integers(1, 5))
        V = rng.uniform(1e-3, 10.0, size=n) * rng.choice([-1.0, 1.0], size=n)
        rec = _recursive_v_derivative(F, z, list(V))
        exp = V_derivative_expansion(F, z, list(V))
        assert abs(rec - exp) <= 1e-12 + 1e-8 * max(abs(rec), abs(exp))
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0


# ---------------------------------------------------------------------------
# c02 - order-2 slopes of convex losses are nonnegative
# ---------------------------------------------------------------------------


def test_c02_order2_slope_nonnegative_for_convex_losses():
    """V_derivative(F, a, [b, c]) >= -1e-10 on 10^4 probes per loss,
    2500 in each sign quadrant of (b, c)."""
    rng = np.random.default_rng(SEED + 1)
    log_lo, log_hi = np.log(0.05), np.log(10.0)
    for name in ("logistic", "square", "exponential"):
        F = make_builtin(name)
        for sign_b in (1.0, -1.0):
            for sign_c in (1.0, -1.0):
                for _ in range(2500):
                    a = float(rng.uniform(-25.0, 25.0))
                    b = sign_b * float(np.exp(rng.uniform(log_lo, log_hi)))
                    c = sign_c * float(np.exp(rng.uniform(log_lo, log_hi)))
                    assert V_derivative(F, a, [b, c]) >= -1e-10


# ---------------------------------------------------------------------------
# c03 - chord-anchored gap is bounded below by the worst chord overshoot
# ---------------------------------------------------------------------------


def test_c03_bregman_secant_lower_bound_on_rough_losses():
    """bregman_secant >= -q_star - 1e-6 on 10^3 probes across the two
    non-convex stress losses, with the overshoot taken on an 8192-point
    grid."""
    cases = (
        (make_builtin("spring", Q=500.0), (-2.0, 2.0)),
        (make_builtin("clipped_logistic", q=-2.0), (-3.0, 1.0)),
    )
    rng = np.random.default_rng(SEED + 2)
    for F, (z_lo, z_hi) in cases:
        for _ in range(500):
            z = float(rng.uniform(z_lo, z_hi))
            zp = z + float(rng.uniform(0.01, 0.5)) * float(rng.choice([-1.0, 1.0]))
            v = float(rng.uniform(0.01, 0.3)) * float(rng.choice([-1.0, 1.0]))
            q = q_star(F, z, zp, v, grid_points=8192)
            assert bregman_secant(F, zp, z, v) >= -q - 1e-6


# ---------------------------------------------------------------------------
# c04 - measured second-order mass never exceeds twice the curvature bound
# ---------------------------------------------------------------------------


def test_c04_logistic_second_order_mass_within_curvature(
    fifty_iter_runs, stump_run
):
    F = make_builtin("logistic")
    bound = 2.0 * F.smoothness_beta + 1e-8
    _, _, rows50 = fifty_iter_runs["logistic"]
    _, _, rows200, _ = stump_run
    checked = 0
    for row in list(rows50) + list(rows200):
        if row.w2_measured is None:
            continue
        assert row.w2_measured <= bound
        checked += 1
    assert checked >= 50


# ---------------------------------------------------------------------------
# c05 - every oracle-returned offset survives re-verification at 16x grid
# ---------------------------------------------------------------------------


def test_c05_offsets_feasible_at_16x_finer_grid(fifty_iter_runs):
    """Each fresh offset's worst chord gap, recomputed on a 16x finer grid
    than the oracle's decision grid (512 -> 8192), stays within the
    iteration's budget.  Zero violations allowed."""
    total_checked = 0
    for name, _ in RUN_LOSSES:
        F, _, rows = fifty_iter_runs[name]
        for row in rows:
            if row.offsets_new is None:
                continue
            fresh = np.nonzero(~row.offsets_reused)[0]
            for i in fresh:
                q = q_star(
                    F,
                    float(row.edges_new[i]),
                    float(row.edges_tilde[i]),
                    float(row.offsets_new[i]),
                    grid_points=8192,
                )
                assert q <= row.z_limit, (
                    f"{name} t={row.t} example {i}: gap {q} exceeds "
                    f"budget {row.z_limit}"
                )
                total_checked += 1
    assert total_checked > 1000


# ---------------------------------------------------------------------------
# c06 - realized decrease honors the guaranteed bound, loss is monotone
# ---------------------------------------------------------------------------


def test_c06_guaranteed_decrease_holds_per_iteration(fifty_iter_runs, separable200):
    for name, _ in RUN_LOSSES:
        F, ens, rows = fifty_iter_runs[name]
        assert rows, f"{name}: no iterations recorded"
        f_prev = _initial_loss(F, ens, separable200)
        for row in rows:
            if row.decrease_bound is not None:
                realized = f_prev - row.train_loss
                assert realized >= row.decrease_bound - 1e-8, (
                    f"{name} t={row.t}: realized {realized} below "
                    f"bound {row.decrease_bound}"
                )
            assert row.train_loss <= f_prev + 1e-8
            f_prev = row.train_loss


# ---------------------------------------------------------------------------
# c07 - end-to-end learning on numeric and categorical data
# ---------------------------------------------------------------------------


def test_c07_end_to_end_learning(stump_run, board_cv, boards):
    _, _, rows, stump_elapsed = stump_run
    assert min(row.train_err for row in rows) == 0.0

    results, cv_elapsed = board_cv
    y = np.asarray(boards.labels, dtype=np.float64)
    majority_baseline = min(float(np.mean(y > 0)), float(np.mean(y < 0)))
    for eta, (_, _, mean_curve) in results.items():
        assert mean_curve[-1] < majority_baseline, (
            f"noise {eta}: mean test error {mean_curve[-1]} not below "
            f"majority baseline {majority_baseline}"
        )
    assert stump_elapsed + cv_elapsed < 180.0


# ---------------------------------------------------------------------------
# c08 - degenerate-loss semantics
# ---------------------------------------------------------------------------


def test_c08_constant_loss_and_sign_stable_weights(tmp_path):
    # A constant loss stops at t=1 with all-zero weights, and the CLI maps
    # that stop to its dedicated exit code.
    rng = np.random.default_rng(SEED + 3)
    X = rng.normal(size=(12, 2))
    y = np.where(X[:, 0] > 0, 1.0, -1.0)
    S = dataset_from_numeric(X, y)
    flat = sb.table_loss("flat", [-100.0, 100.0], [1.0, 1.0])
    _, rows = run(flat, S, T=5)
    assert len(rows) == 1
    assert rows[0].t == 1
    assert rows[0].stop_reason == "zero_weights"
    assert rows[0].constant_loss

    data_path = tmp_path / "train.csv"
    lines = ["a,b,label"] + [
        f"{X[i, 0]:.6f},{X[i, 1]:.6f},{int(y[i])}" for i in range(12)
    ]
    data_path.write_text("\n".join(lines) + "\n")
    flat_path = tmp_path / "flat.csv"
    flat_path.write_text("z,F\n-100,1.0\n100,1.0\n")
    code = main(
        ["train", "--loss-table", str(flat_path), str(data_path), str(tmp_path / "o")]
    )
    assert code == EXIT_CONSTANT_LOSS

    # With the 0/1 loss, any example whose margin keeps its sign across an
    # update has both chord endpoints on one side of the jump, so its next
    # weight is exactly zero -- correctly classified or not.
    F = make_builtin("zero_one")
    rng = np.random.default_rng(0)
    X6 = rng.normal(size=(6, 2))
    y6 = np.array([1.0, 1.0, 1.0, -1.0, -1.0, -1.0])
    S6 = dataset_from_numeric(X6, y6)
    _, rows6 = run(F, S6, T=2, config=BoostConfig(record_vectors=True, seed=3))
    first = rows6[0]
    assert first.offsets_new is not None
    w_next = -secant_slopes(F, first.edges_new, first.offsets_new)
    stable = np.sign(first.edges_new) == np.sign(first.edges_tilde)
    assert np.any(stable)
    np.testing.assert_array_equal(w_next[stable], 0.0)


# ---------------------------------------------------------------------------
# c09 - coefficient search contract on random boosting states
# ---------------------------------------------------------------------------


def _random_state(k: int):
    """A legitimate start-of-iteration state: constant prior ensemble,
    weights derived by the update law, hypothesis trained the way the
    driver trains it."""
    losses = (
        make_builtin("logistic"),
        make_builtin("square"),
        make_builtin("clipped_logistic", q=-2.0),
        make_builtin("spring", Q=5.0),
    )
    F = losses[k % 4]
    rng = np.random.default_rng(5000 + k)
    m = int(rng.integers(10, 25))
    X = rng.normal(size=(m, 2))
    y = np.sign(X[:, 0] + 0.35 * X[:, 1])
    y[y == 0.0] = 1.0
    S = dataset_from_numeric(X, y)
    H_prev = Ensemble(h0=float(rng.uniform(-0.8, 0.8)))
    margins = y * H_prev.h0
    v_prev = rng.uniform(0.05, 1.5, size=m) * rng.choice([-1.0, 1.0], size=m)
    w = -secant_slopes(F, margins, v_prev)
    active = np.nonzero(w != 0.0)[0]
    S_t = S.subset(active).with_labels(y[active] * np.sign(w[active]))
    h = train_tree(S_t, np.abs(w[active]), max_nodes=1, seed=k)
    h = nonzero_shift(h, S)
    return F, S, H_prev, w, h, v_prev


def test_c09_find_alpha_contract_on_random_states():
    """On 100 random states with continuous losses the halving search
    terminates, the coefficient keeps the edge's sign, the accepted edge
    move stays strictly inside the unit ratio, and the derived
    (second-order mass, epsilon) place |alpha| strictly inside the
    admissible interval."""
    checked = 0
    for k in range(100):
        F, S, H_prev, w, h, v_prev = _random_state(k)
        eta = edge(w, S, h)
        assert eta != 0.0, f"state {k} drew a zero edge"
        alpha = find_alpha(F, S, H_prev, w, h, v_prev)  # raises past 200 halvings
        assert np.sign(alpha) == np.sign(eta)
        trial = partial_weights(F, S, H_prev, h, v_prev, alpha)
        ratio = abs(eta - edge(trial, S, h)) / abs(eta)
        assert ratio < 1.0
        M = max_confidence(h, S)
        w2 = w2_from_alpha(F, S, H_prev, h, v_prev, alpha, M, eta=eta)
        eps = epsilon_from(alpha, w2, eta, M)  # raises outside the interval
        assert eps > 0.0
        assert 0.0 < abs(alpha) < abs(eta) / (M * M * w2)
        checked += 1
    assert checked == 100


# ---------------------------------------------------------------------------
# c10 - certificate consistency on every run in the suite
# ---------------------------------------------------------------------------


def _probe_certificate(rows, f0: float) -> int:
    """Sweep targets around [final, f0]; whenever the certificate fires,
    the measured final loss must actually meet the target."""
    final = rows[-1].train_loss
    targets = np.unique(
        np.concatenate(
            [
                np.linspace(final - 0.25, f0 + 0.05, 31),
                final + np.array([-1e-2, -1e-4, -1e-6, 0.0, 1e-6, 1e-4, 1e-2]),
            ]
        )
    )
    hits = 0
    for target in targets:
        if convergence_certificate(rows, f0, float(target)):
            assert final <= target + 1e-6, (
                f"certificate fired at target {target} but final loss is {final}"
            )
            hits += 1
    return hits


def test_c10_certificate_never_overpromises(
    fifty_iter_runs, stump_run, board_cv, separable200
):
    hits = 0
    for name, _ in RUN_LOSSES:
        F, ens, rows = fifty_iter_runs[name]
        hits += _probe_certificate(rows, _initial_loss(F, ens, separable200))
    F, ens, rows, _ = stump_run
    hits += _probe_certificate(rows, _initial_loss(F, ens, separable200))
    # CV folds run the logistic loss from the zero-offset constant start,
    # so each fold's initial loss is F(0) exactly.
    F = make_builtin("logistic")
    f0 = float(F(0.0))
    results, _ = board_cv
    for fold_rows, _, _ in results.values():
        for rows in fold_rows:
            hits += _probe_certificate(rows, f0)
    assert hits > 0
