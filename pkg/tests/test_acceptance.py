"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

Shared expensive artifacts (the 100-replication study, the lambda scan,
the zero-penalty batch) are computed once per session and reused by the
criteria that inspect them.
"""

import time

import numpy as np
import pytest

from lpoc.empirical import r_tilde_basic, r_tilde_pd
from lpoc.forecast import crps
from lpoc.lambda_select import select_lambda
from lpoc.matrices import PenaltyMatrix, spd_factorize, validate_correlation
from lpoc.penalty import CovariateTable, screen_covariates
from lpoc.simulation import default_scenario, run_study, simulate_panel
from lpoc.solver import SolverConfig, solve_lpoc

from conftest import random_correlation
from test_forecast import crps_integral_oracle


def check(num, description, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE {num:>2} [{status}] {description}{suffix}")
    assert ok, f"criterion {num}: {description}{suffix}"


@pytest.fixture(scope="module")
def golden_solution():
    r_tilde = validate_correlation(
        np.array([[1.0, 0.8, 0.5], [0.8, 1.0, 0.1], [0.5, 0.1, 1.0]])
    )
    p = np.zeros((3, 3))
    p[0, 2] = p[2, 0] = 1.0
    start = time.monotonic()
    report = solve_lpoc(r_tilde, PenaltyMatrix.from_values(p), SolverConfig(lambda_eff=0.5))
    elapsed = time.monotonic() - start
    return report, elapsed


@pytest.fixture(scope="module")
def zero_penalty_batch():
    rng = np.random.default_rng(2024)
    cases = []
    start = time.monotonic()
    for _ in range(50):
        dim = int(rng.integers(3, 31))
        m = random_correlation(rng, dim)
        p = PenaltyMatrix.from_values(1.0 - np.eye(dim))
        report = solve_lpoc(m, p, SolverConfig(lambda_eff=0.0))
        cases.append((m, report))
    elapsed = time.monotonic() - start
    return cases, elapsed


@pytest.fixture(scope="module")
def study():
    start = time.monotonic()
    report = run_study(default_scenario())
    elapsed = time.monotonic() - start
    return report, elapsed


@pytest.fixture(scope="module")
def lambda_scan():
    scenario = default_scenario()
    _, errors = simulate_panel(scenario, 0)
    rpd = r_tilde_pd(r_tilde_basic(errors))
    grid = np.round(np.arange(0.0, 10.0001, 0.1), 10)
    start = time.monotonic()
    scan = select_lambda(rpd, scenario.penalty, grid, n_obs=11, smoothing=True,
                         keep_estimates=True)
    elapsed = time.monotonic() - start
    return scan, elapsed


def test_criterion_1_golden_three_by_three(golden_solution):
    report, elapsed = golden_solution
    est = report.estimate.values
    got = np.array([est[0, 1], est[0, 2], est[1, 2]])
    want = np.array([0.8211, 0.1542, -0.1813])
    ok = bool(np.all(np.abs(got - want) <= 1e-3)) and elapsed < 1.0
    check(1, "3x3 golden solution within 1e-3", ok,
          f"rho=({got[0]:.4f}, {got[1]:.4f}, {got[2]:.4f}), {elapsed:.2f}s")


def test_criterion_2_zero_penalty_identity(zero_penalty_batch):
    cases, elapsed = zero_penalty_batch
    worst = max(
        float(np.linalg.norm(rep.estimate.values - m.values)) for m, rep in cases
    )
    ok = worst <= 1e-6 and elapsed < 30.0
    check(2, "zero-penalty solves return the empirical matrix (50 cases, dims 3-30)",
          ok, f"worst gap {worst:.2e}, {elapsed:.1f}s")


def test_criterion_3_objective_monotonicity(golden_solution, zero_penalty_batch, study):
    traces = [golden_solution[0].objective_trace]
    traces += [rep.objective_trace for _, rep in zero_penalty_batch[0]]
    worst = 0.0
    for trace in traces:
        if len(trace) > 1:
            worst = max(worst, float(np.max(np.diff(np.asarray(trace)))))
    worst = max(worst, study[0].aggregate["objective_monotone_slack_max"])
    ok = worst <= 1e-10
    check(3, "objective trace nonincreasing on every solve in criteria 1, 2, 4",
          ok, f"max increase {worst:.2e}")


def test_criterion_4_study_error_bands(study):
    agg = study[0].aggregate
    lpoc_mse = agg["lpoc_all_mse"]
    lpoc_zero_mae = agg["lpoc_true_zero_mae"]
    pearson_mse = agg["pearson_all_mse"]
    lw_mse = agg["ledoit_wolf_all_mse"]
    ok = (
        0.015 <= lpoc_mse <= 0.030
        and lpoc_zero_mae <= 0.065
        and 0.060 <= pearson_mse <= 0.100
        and 0.033 <= lw_mse <= 0.062
        and lpoc_mse < pearson_mse
        and lpoc_mse < lw_mse
        and study[1] < 600.0
    )
    check(4, "study error metrics inside the published bands", ok,
          f"lpoc {lpoc_mse:.4f}, zeroMAE {lpoc_zero_mae:.4f}, pearson {pearson_mse:.4f}, "
          f"lw {lw_mse:.4f}, {study[1]:.0f}s")


def test_criterion_5_exact_zero_recovery(study):
    frac = study[0].aggregate["lpoc_exact_zero_fraction_mean"]
    ok = frac >= 0.45
    check(5, "mean exact-zero fraction among penalized cells at least 0.45",
          ok, f"fraction {frac:.3f}")


def test_criterion_6_unpenalized_block_fidelity(study):
    mean = study[0].aggregate["lpoc_true_nonzero_entry_mean"]
    ok = 0.45 <= mean <= 0.55
    check(6, "grand mean of within-block estimates in 0.5 +/- 0.05",
          ok, f"mean {mean:.4f}")


def test_criterion_7_lambda_selection(lambda_scan):
    scan, elapsed = lambda_scan
    ok = 3.0 <= scan.chosen_lambda <= 10.0 and elapsed < 300.0
    check(7, "smoothed criterion over grid 0:0.1:10 peaks in [3, 10]",
          ok, f"chosen {scan.chosen_lambda:g}, {elapsed:.0f}s")


def test_criterion_8_crps_oracle_equivalence():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 21))
        values = rng.standard_normal(n) * rng.uniform(0.2, 4.0) + rng.normal(0, 2.0)
        obs = float(rng.normal(0, 2.0))
        worst = max(worst, abs(crps(values, obs) - crps_integral_oracle(values, obs)))
    ok = worst <= 1e-6
    check(8, "sample CRPS matches integral oracle on 100 random ensembles",
          ok, f"worst gap {worst:.2e}")


def test_criterion_9_ks_screening_power():
    scenario = default_scenario()
    labels = scenario.labels
    block = np.zeros((9, 9), dtype=bool)
    for b in range(3):
        lo, hi = 3 * b, 3 * b + 3
        block[lo:hi, lo:hi] = True
    np.fill_diagonal(block, False)
    n_pairs = int(block[np.triu_indices(9, 1)].sum())

    block_hits = 0
    random_nulls = 0
    iu = np.triu_indices(9, 1)
    for rep in range(50):
        _, errors = simulate_panel(scenario, rep)
        rtilde = r_tilde_basic(errors)
        rng = np.random.default_rng(12345 + rep)
        pick = rng.choice(iu[0].size, size=n_pairs, replace=False)
        rand_ind = np.zeros((9, 9), dtype=bool)
        rand_ind[iu[0][pick], iu[1][pick]] = True
        rand_ind |= rand_ind.T
        table = CovariateTable(
            labels=labels, indicators={"same_block": block, "random": rand_ind}
        )
        report = screen_covariates(rtilde, table, n=11)
        by_name = {e.name: e for e in report.entries}
        block_hits += by_name["same_block"].p_value < 0.05
        random_nulls += by_name["random"].p_value >= 0.05
    ok = block_hits >= 40 and random_nulls >= 30
    check(9, "block covariate detected >= 80%, density-matched random covariate "
             "not flagged >= 60% (50 replications)",
          ok, f"block {block_hits}/50, random null {random_nulls}/50")


def test_criterion_10_strict_pd_everywhere(golden_solution, zero_penalty_batch,
                                           study, lambda_scan):
    failures = 0
    total = 0
    for estimate in [golden_solution[0].estimate] + [
        rep.estimate for _, rep in zero_penalty_batch[0]
    ] + list(lambda_scan[0].estimates.values()):
        total += 1
        try:
            validate_correlation(estimate.values, strict=True)
            spd_factorize(estimate.values, pd_floor=1e-8)
        except Exception:
            failures += 1
    study_ok = study[0].aggregate["all_estimates_strictly_pd"]
    total += 3 * study[0].aggregate["n_succeeded"]
    ok = failures == 0 and study_ok
    check(10, "every estimate from every estimator passes strict validation",
          ok, f"{total} estimates checked, {failures} failures")
