import json
import math

import numpy as np
import pytest

from patchdyn.lyapunov import (
    Method,
    discrepancy_report,
    multistart_agreement,
    expanded_r,
    r_best,
    r_closedform_2patch,
    r_logslope,
    r_timeavg,
)
from patchdyn.model import ExplicitGamma, Linear, ModelSpec, single_patch, two_patch
from patchdyn.reduce1d import ystar
from patchdyn.sde import SimConfig

S7 = 7**0.5
DEG = two_patch(3, 4, 1, 1, S7, S7, 1)
DIAG = two_patch(3, 4, 1, 1, S7, S7, 0)

# hand-derived: y* = (3 - sqrt 5)/2, r = 3 y* + 4 (1 - y*) - 7/2 = (sqrt 5 - 2)/2
R_DEG = (math.sqrt(5) - 2) / 2
# mpmath oracle: speed-measure density integrated at 30 digits
R_DIAG = 1.3187210064899830446
R_DEG_12 = 2.3939541859722087412
R_RHO_HALF = 0.7615671707765224996
R_SUBCRITICAL = -0.4079110586337683128
MEAN_Y_DEG_12 = 0.5530229070138956294

# roundoff floor for estimators whose batches are identical up to rounding
ROUNDOFF = 1e-12


def close(est, target, k=3.0):
    return abs(est.value - target) <= k * est.stderr + ROUNDOFF


def test_timeavg_point_simplex():
    est = r_timeavg(single_patch(2, 2**0.5), SimConfig(t_end=100))
    assert est.value == pytest.approx(1.0, abs=1e-14)
    assert est.stderr == 0.0
    assert est.n_batches == 50 and est.method is Method.TIME_AVERAGE


def test_timeavg_degenerate_spec():
    est = r_timeavg(DEG, SimConfig(t_end=1000, seed=1))
    assert close(est, R_DEG) and est.stderr <= 0.01


def test_timeavg_two_seeds_consistent():
    a = r_timeavg(DIAG, SimConfig(t_end=1000, seed=1))
    b = r_timeavg(DIAG, SimConfig(t_end=1000, seed=2))
    assert abs(a.value - b.value) <= 3 * math.hypot(a.stderr, b.stderr)
    assert a.converged and b.converged


def test_logslope_single_patch():
    est = r_logslope(single_patch(0.5, 2**0.5), SimConfig(t_end=1e4, seed=3))
    assert close(est, -0.5)
    assert est.n_batches == 20 and est.method is Method.LOG_SLOPE


def test_logslope_deterministic():
    spec = ModelSpec(a=[1, 1], competition=Linear(1), D=np.zeros((2, 2)), noise=ExplicitGamma(np.zeros((2, 2))))
    est = r_logslope(spec, SimConfig(t_end=100))
    # 1e5 summed increments: rounding of order n_steps * eps
    assert est.value == pytest.approx(1.0, abs=1e-10)
    assert est.stderr < 1e-10


def test_logslope_and_timeavg_agree():
    spec = two_patch(1, 2, 0.7, 0.4, 1.2, 0.8, -0.3)
    cfg = SimConfig(t_end=2000, seed=4)
    a, b = r_timeavg(spec, cfg), r_logslope(spec, cfg)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.stderr, b.stderr)


def test_closed_form_degenerate():
    est = r_closedform_2patch(DEG)
    assert est.value == pytest.approx(R_DEG, abs=1e-15)
    assert est.stderr == 0.0 and est.details["case"] == "deterministic"
    assert est.details["ystar"] == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-15)


def test_closed_form_synchronizing_slice():
    est = r_closedform_2patch(two_patch(1, 2, 0.5, 1, 1, 1, 1))
    assert est.value == 1.0 and est.details["case"] == "nohorm"


def test_closed_form_equal_growth_single_driver():
    for al in (0.3, 2.0, 15.0):
        est = r_closedform_2patch(two_patch(2.5, 2.5, al, al, 1.2, 1.2, 1))
        assert est.value == pytest.approx(2.5 - 1.44 / 2, abs=1e-14)


@pytest.mark.parametrize(
    "spec,oracle",
    [
        (DIAG, R_DIAG),
        (two_patch(3, 4, 1, 1, 1, 2, 1), R_DEG_12),
        (two_patch(3, 4, 1, 1, S7, S7, 0.5), R_RHO_HALF),
        (two_patch(0, 0.2, 1, 1, 1.5**0.5, 1.5**0.5, 0.3), R_SUBCRITICAL),
    ],
)
def test_closed_form_density_route(spec, oracle):
    est = r_closedform_2patch(spec)
    assert est.details["case"] == "density"
    assert 0 < est.stderr < 1e-12
    assert abs(est.value - oracle) <= 3 * est.stderr + 1e-14


def test_closed_form_needs_two_patches():
    with pytest.raises(ValueError):
        r_closedform_2patch(single_patch(1, 1))


def test_large_dispersal_limit():
    vals = [r_closedform_2patch(two_patch(3, 4, al, al, S7, S7, 1)).value for al in (10, 20, 40)]
    assert vals[0] > vals[1] > vals[2]
    for al, v in zip((10, 20, 40), vals):
        approx = 3.5 - 3.5 + 1 / (8 * al)
        assert abs(v - approx) <= 0.1 * abs(approx)


def test_shift_of_growth_rates():
    c = 0.37
    for spec in (DIAG, DEG, two_patch(3, 4, 1, 1, 1, 2, 1)):
        up = spec.replace(a=spec.a + c)
        assert r_closedform_2patch(up).value - r_closedform_2patch(spec).value == pytest.approx(c, abs=1e-10)
    cfg = SimConfig(t_end=200, seed=5)
    a, b = r_timeavg(DIAG, cfg), r_timeavg(DIAG.replace(a=DIAG.a + c), cfg)
    assert b.value - a.value == pytest.approx(c, abs=1e-9)


def test_r_best_dispatch():
    assert r_best(single_patch(0.5, 2**0.5)).value == pytest.approx(-0.5)
    three = ModelSpec(
        a=[1, 1, 1], competition=Linear(1), D=[[-1, 1, 0], [0, -1, 1], [1, 0, -1]], noise=ExplicitGamma(np.eye(3))
    )
    est = r_best(three, SimConfig(t_end=500, seed=1))
    # uniform loadings on a symmetric cycle: phi = 1 - |y|^2 / 2, between 1/2 and 5/6
    assert est.method is Method.TIME_AVERAGE and 0.5 < est.value < 5 / 6


def test_json_record():
    est = r_timeavg(DIAG, SimConfig(t_end=50, seed=9))
    rec = json.loads(json.dumps(est.to_dict()))
    assert set(rec) == {"value", "stderr", "method", "horizon", "dt", "seed"}
    assert rec["method"] == "timeavg" and rec["seed"] == 9


def test_multistart_agreement_single_driver():
    res = multistart_agreement(two_patch(3, 4, 1, 1, 1, 2, 1), SimConfig(t_end=500, seed=2), [[0.05, 0.95], [0.95, 0.05]])
    assert res["agree"]


def test_expanded_equal_volatility_formula_off_by_sigma2_ystar():
    y = ystar(3, 4, 1, 1)
    assert expanded_r(DEG, "equal_vol") - R_DEG == pytest.approx(7 * y, abs=1e-12)


def test_expanded_independent_noise_formula_agrees():
    assert expanded_r(DIAG, "independent") == pytest.approx(R_DIAG, abs=1e-9)


def test_expanded_single_driver_expansion_misses_cross_term():
    spec = two_patch(3, 4, 1, 1, 1, 2, 1)
    gap = expanded_r(spec, "shared", density="speed") - R_DEG_12
    assert gap == pytest.approx(1 * 2 * MEAN_Y_DEG_12, abs=1e-9)


def test_expanded_unknown_formula():
    with pytest.raises(ValueError):
        expanded_r(DIAG, "nope")


def test_discrepancy_report_fields():
    rep = discrepancy_report(two_patch(3, 4, 1, 1, 1, 2, 1), SimConfig(t_end=200, seed=3))
    assert rep["quadrature"] == pytest.approx(R_DEG_12, abs=1e-12)
    for key in ("quadrature_within_3se", "expansion_within_3se", "explicit_density_within_3se"):
        assert isinstance(rep[key], bool)
