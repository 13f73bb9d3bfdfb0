"""Acceptance criteria at full scale.

Every check is recorded with ``ac_record`` and then asserted, so the terminal
summary prints one PASS/FAIL line per criterion alongside the usual results.
Reference values come from an independent 30-digit quadrature.
"""

import math
import time

import numpy as np
import pytest

from patchdyn.analysis import (
    convergence_distance,
    extinction_slopes,
    occupation_fraction,
    sync_diagnostics,
    time_average,
)
from patchdyn.cli import FIGURE_ALPHAS, figure_rows, run
from patchdyn.lyapunov import discrepancy_report, r_closedform_2patch, r_logslope, r_timeavg
from patchdyn.model import single_patch, two_patch
from patchdyn.reduce1d import (
    density_gap,
    density_moment,
    explicit_log_rho_nondegenerate,
    logistic_stationary_mean,
    reduce_2patch,
    stationary_density,
    ystar,
)
from patchdyn.robustness import (
    persistence_under_perturbation,
    r_continuity_scan,
    scan_summary,
    verdict_counts,
)
from patchdyn.sde import SimConfig, simulate_x

S7 = 7**0.5
DEG = two_patch(3, 4, 1, 1, S7, S7, 1)
DIAG = two_patch(3, 4, 1, 1, S7, S7, 0)
NOHORM = two_patch(1, 2, 0.5, 1, 1, 1, 1)
R_DEG = (5**0.5 - 2) / 2
R_DIAG = 1.3187210064899830446
YSTAR = (3 - 5**0.5) / 2

# roundoff floor for estimators whose stderr is itself at rounding level
ROUNDOFF = 1e-12
FULL = SimConfig(dt=1e-3, t_end=1e4, seed=1)


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def best_time(fn, reps=200):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


# ---------------------------------------------------------------------------
# AC-1 closed forms
# ---------------------------------------------------------------------------


def test_ac1_closed_forms(ac_record):
    r = r_closedform_2patch(DEG).value
    y = ystar(3, 4, 1, 1)
    nh = r_closedform_2patch(NOHORM).value
    ok = [
        ac_record("AC-1", "degenerate r", abs(r - 0.118034) <= 1e-6, f"r={r!r}"),
        ac_record("AC-1", "ystar", abs(y - 0.381966) <= 1e-6, f"y*={y!r}"),
        ac_record("AC-1", "synchronizing r exact", nh == 1.0, f"r={nh!r}"),
    ]
    assert all(ok)


def test_ac1_runtime(ac_record):
    worst = max(
        best_time(lambda: r_closedform_2patch(DEG)),
        best_time(lambda: ystar(3, 4, 1, 1)),
        best_time(lambda: r_closedform_2patch(NOHORM)),
    )
    assert ac_record("AC-1", "runtime < 1 ms", worst < 1e-3, f"{worst * 1e3:.3f} ms")


# ---------------------------------------------------------------------------
# AC-2 three-way agreement
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def ac2_runs():
    out = {}
    for name, spec in (("degenerate", DEG), ("diagonal", DIAG)):
        for fn in (r_timeavg, r_logslope):
            out[name, fn.__name__] = timed(fn, spec, FULL)
    return out


@pytest.mark.parametrize("name,reference", [("degenerate", R_DEG), ("diagonal", R_DIAG)])
@pytest.mark.parametrize("method", ["r_timeavg", "r_logslope"])
def test_ac2_agreement(ac2_runs, ac_record, name, reference, method):
    est, secs = ac2_runs[name, method]
    gap = abs(est.value - reference)
    tag = f"{name} {method[2:]}"
    ok = [
        ac_record("AC-2", f"{tag} within 3se", gap <= 3 * est.stderr + ROUNDOFF,
                  f"gap={gap:.3g} 3se={3 * est.stderr:.3g}"),
        ac_record("AC-2", f"{tag} stderr <= 0.01", est.stderr <= 0.01, f"stderr={est.stderr:.3g}"),
        ac_record("AC-2", f"{tag} runtime <= 60 s", secs <= 60, f"{secs:.1f} s"),
    ]
    assert all(ok)


# ---------------------------------------------------------------------------
# AC-3 density cross-check
# ---------------------------------------------------------------------------


def test_ac3_density(ac_record):
    dens = stationary_density(reduce_2patch(DIAG))
    gap = density_gap(dens, lambda y: explicit_log_rho_nondegenerate(y, 3, 4, 1, 1, 7, 7))
    mass = dens.mass()
    sym = density_moment(stationary_density(reduce_2patch(two_patch(3, 3, 1, 1, S7, S7, 0))), 1)
    ok = [
        ac_record("AC-3", "explicit form within 1e-6", gap <= 1e-6, f"gap={gap:.3g}"),
        ac_record("AC-3", "mass 1", abs(mass - 1) <= 1e-6, f"mass-1={mass - 1:.3g}"),
        ac_record("AC-3", "symmetric mean 0.5", abs(sym - 0.5) <= 1e-8, f"mean-0.5={sym - 0.5:.3g}"),
    ]
    assert all(ok)


# ---------------------------------------------------------------------------
# AC-4 discrepancy arbitration
# ---------------------------------------------------------------------------


def test_ac4_discrepancy(ac_record):
    rep = discrepancy_report(two_patch(3, 4, 1, 1, 1, 2, 1), FULL)
    finding = (
        f"quadrature={rep['quadrature']:.6f} expansion={rep['expansion']:.6f} "
        f"mc={rep['monte_carlo']:.6f}+-{rep['monte_carlo_stderr']:.2g}; "
        f"quadrature within 3se: {rep['quadrature_within_3se']}, "
        f"expansion within 3se: {rep['expansion_within_3se']}"
    )
    print(finding)
    ok = [
        ac_record("AC-4", "report states a winner",
                  rep["quadrature_within_3se"] != rep["expansion_within_3se"], finding),
        ac_record("AC-4", "quadrature matches Monte Carlo", rep["quadrature_within_3se"], finding),
    ]
    assert all(ok)


# ---------------------------------------------------------------------------
# AC-5 extinction
# ---------------------------------------------------------------------------


EXT2 = two_patch(0, 0.2, 1, 1, 1.5**0.5, 1.5**0.5, 0.3)
R_EXT2 = -0.4079110586337683128


def test_ac5_reference_is_negative_enough():
    assert r_closedform_2patch(EXT2).value == pytest.approx(R_EXT2, abs=1e-9)
    assert R_EXT2 < -0.2


@pytest.mark.parametrize(
    "name,spec,x0,reference",
    [("one patch", single_patch(0.5, 2**0.5), [1.0], -0.5), ("two patches", EXT2, [1.0, 1.0], R_EXT2)],
)
def test_ac5_extinction_slopes(ac_record, name, spec, x0, reference):
    path = simulate_x(spec, FULL.with_(record_stride=100), x0)
    slopes = extinction_slopes(path)
    ok = []
    for s in slopes:
        gap = abs(s.slope - reference)
        ok.append(ac_record("AC-5", f"{name} patch {s.patch} slope", gap <= 3 * s.stderr,
                            f"slope={s.slope:.4f} se={s.stderr:.3g}"))
    if len(slopes) == 2:
        a, b = slopes
        gap = abs(a.slope - b.slope)
        ok.append(ac_record("AC-5", "common rate", gap <= 3 * math.hypot(a.stderr, b.stderr), f"gap={gap:.3g}"))
    assert all(ok)


# ---------------------------------------------------------------------------
# AC-6 persistence proxy
# ---------------------------------------------------------------------------


def test_ac6_occupation(ac_record):
    path = simulate_x(DEG, FULL.with_(record_stride=10), [1.0, 1.0])
    frac = occupation_fraction(path, 1e-4).fraction
    assert ac_record("AC-6", "occupation below 1e-4 < 0.05", frac < 0.05, f"fraction={frac:.3f}")


def test_ac6_convergence(ac_record):
    rep = convergence_distance(DEG, SimConfig(dt=1e-3, seed=1), [0.01, 0.01], [5.0, 5.0], [1.0, 10.0, 100.0], 500)
    assert ac_record("AC-6", "W1 shrinks 5x from t=1 to t=100", rep.ratio <= 0.2, f"ratio={rep.ratio:.3f}")


# ---------------------------------------------------------------------------
# AC-7 synchronization
# ---------------------------------------------------------------------------


def test_ac7_unequal_start(ac_record):
    rep = sync_diagnostics(simulate_x(NOHORM, SimConfig(dt=1e-3, t_end=50, seed=3), [2.0, 1.0]))
    ok = [
        ac_record("AC-7", "|Z(50)-1| < 1e-6", rep.z_final_dev < 1e-6, f"{rep.z_final_dev:.3g}"),
        ac_record("AC-7", "X/U within 1%", np.all(np.abs(rep.ratios - 1) < 0.01), f"ratios={rep.ratios}"),
    ]
    assert all(ok)


def test_ac7_equal_start(ac_record):
    rep = sync_diagnostics(simulate_x(NOHORM, SimConfig(dt=1e-3, t_end=50, seed=3), [1.0, 1.0]))
    dev = float(np.max(np.abs(rep.z - 1)))
    assert ac_record("AC-7", "Z = 1 exactly", dev <= np.finfo(float).eps, f"max|Z-1|={dev:.3g}")


@pytest.fixture(scope="module")
def ac7_long():
    path = simulate_x(NOHORM, SimConfig(dt=1e-3, t_end=1e4, seed=4, record_stride=10), [2.0, 1.0])
    return time_average(path, 1, t_min=50.0)


def test_ac7_stationary_mean(ac_record, ac7_long):
    mean, se = ac7_long
    target = logistic_stationary_mean(1.5, 1.0, 1.0)
    gap = abs(mean - target)
    assert ac_record("AC-7", "X2 average vs stationary mean", gap <= 3 * se,
                     f"avg={mean:.4f} se={se:.3g} target={target:.6f}")


# ---------------------------------------------------------------------------
# AC-8 figure
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def figure():
    rows, secs = timed(figure_rows, cfg=SimConfig(t_end=1e4, seed=0))
    table = {(a, rho): (r, se) for a, rho, r, se, _ in rows}
    return table, secs


def test_ac8_runtime(ac_record, figure):
    _, secs = figure
    assert ac_record("AC-8", "preset <= 10 min", secs <= 600, f"{secs:.1f} s")


def test_ac8_anchor(ac_record, figure):
    table, _ = figure
    r, se = table[1.0, 1.0]
    assert ac_record("AC-8", "rho=1 at alpha=1", abs(r - 0.118034) <= max(3 * se, 1e-6), f"r={r:.6f}")


def test_ac8_single_driver_curve(ac_record, figure):
    table, _ = figure
    alphas = [a for a in FIGURE_ALPHAS if 5 <= a <= 20]
    curve = np.array([table[a, 1.0][0] for a in alphas])
    asym = np.array([0.5 * (3 + 4) - 3.5 + 1 / (8 * a) for a in alphas])
    rel = float(np.max(np.abs(curve / asym - 1)))
    ok = [
        ac_record("AC-8", "rho=1 decreasing", np.all(np.diff(curve) < 0)),
        ac_record("AC-8", "rho=1 near asymptote", rel <= 0.1, f"max rel dev={rel:.3g}"),
    ]
    assert all(ok)


def test_ac8_correlation_penalty(ac_record, figure):
    table, _ = figure
    worst = math.inf
    for a in FIGURE_ALPHAS:
        if a < 2:
            continue
        (r0, se0), (r1, se1) = table[a, 0.0], table[a, 1.0]
        worst = min(worst, (r0 - r1) - 3 * math.hypot(se0, se1))
    assert ac_record("AC-8", "rho=0 above rho=1", worst > 0, f"min margin={worst:.3g}")


# ---------------------------------------------------------------------------
# AC-9 robustness
# ---------------------------------------------------------------------------


def test_ac9_continuity(ac_record):
    rows = r_continuity_scan(DEG, [0.005, 0.01, 0.02], 20, seed=0)
    means = [s["mean_dev"] for s in scan_summary(rows)]
    ok = [
        ac_record("AC-9", "deviations finite", all(math.isfinite(r["abs_dev"]) for r in rows)),
        ac_record("AC-9", "mean deviation nondecreasing", means == sorted(means),
                  "means=" + ", ".join(f"{m:.4g}" for m in means)),
    ]
    assert all(ok)


def test_ac9_persistence(ac_record):
    counts = verdict_counts(persistence_under_perturbation(DEG, 0.01, 20, seed=0))
    assert ac_record("AC-9", "20/20 persistent", counts.get("Persistent", 0) == 20, str(counts))


# ---------------------------------------------------------------------------
# AC-10 numerics hygiene
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name,spec", [("degenerate", DEG), ("diagonal", DIAG)])
@pytest.mark.parametrize("method", ["r_timeavg", "r_logslope"])
def test_ac10_dt_halving(ac2_runs, ac_record, name, spec, method):
    coarse, _ = ac2_runs[name, method]
    fn = r_timeavg if method == "r_timeavg" else r_logslope
    fine = fn(spec, FULL.with_(dt=FULL.dt / 2))
    gap = abs(coarse.value - fine.value)
    tol = 3 * math.hypot(coarse.stderr, fine.stderr) + ROUNDOFF
    assert ac_record("AC-10", f"dt/2 {name} {method[2:]}", gap < tol, f"gap={gap:.3g} tol={tol:.3g}")


def test_ac10_dt_halving_time_average(ac_record, ac7_long):
    mean, se = ac7_long
    path = simulate_x(NOHORM, SimConfig(dt=5e-4, t_end=1e4, seed=4, record_stride=20), [2.0, 1.0])
    fine, fse = time_average(path, 1, t_min=50.0)
    gap = abs(mean - fine)
    tol = 3 * math.hypot(se, fse)
    assert ac_record("AC-10", "dt/2 X2 average", gap < tol, f"gap={gap:.3g} tol={tol:.3g}")


def test_ac10_reproducible(ac2_runs, ac_record):
    first, _ = ac2_runs["diagonal", "r_timeavg"]
    again = r_timeavg(DIAG, FULL)
    assert ac_record("AC-10", "rerun identical", np.array_equal(first.batch_means, again.batch_means))


def test_ac10_cli_byte_identical(ac_record, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(
        '{"model": {"a": [3, 4], "D": [[-1, 1], [1, -1]], "competition": {"kind": "linear", "kappa": 1},'
        ' "noise": {"sigma": [2.6457513110645907, 2.6457513110645907], "rho": 0}},'
        ' "sim": {"t_end": 100, "seed": 11}}'
    )
    outs = []
    for k in range(2):
        for sub in (["simulate", "--coords", "x"], ["robustness", "--theta", "0.01", "--trials", "3"]):
            out = tmp_path / f"{sub[0]}{k}.csv"
            assert run([sub[0], "--config", str(cfg), *sub[1:], "--out", str(out)]) == 0
            outs.append(out.read_bytes())
    assert ac_record("AC-10", "CLI outputs byte-identical", outs[:2] == outs[2:])
