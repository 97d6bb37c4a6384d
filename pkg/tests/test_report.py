import csv
import json
import math

import pytest

from mott1d.duhamel import OracleConfig
from mott1d.errors import ValidationError
from mott1d.report import (
    CSV_COLUMNS,
    ExperimentSpec,
    fit_rate,
    run_experiment,
    write_csv,
    write_json,
)

SMALL = OracleConfig(n_points=8192, n_time_nodes=128)


# ---------------------------------------------------------------------------
# fit_rate
# ---------------------------------------------------------------------------

def test_fit_rate_exact_power():
    xs = [10.0, 20.0, 40.0, 80.0]
    assert fit_rate(xs, [x**-2 for x in xs]) == pytest.approx(-2.0, abs=1e-12)


def test_fit_rate_constant():
    assert fit_rate([1.0, 2.0, 4.0], [3.0, 3.0, 3.0]) == pytest.approx(0.0, abs=1e-12)


def test_fit_rate_rejections():
    with pytest.raises(ValidationError):
        fit_rate([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValidationError):
        fit_rate([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValidationError):
        fit_rate([1.0, 2.0, 3.0], [1.0, -2.0, 3.0])


# ---------------------------------------------------------------------------
# spec validation
# ---------------------------------------------------------------------------

def test_spec_rejects_empty_sweep():
    with pytest.raises(ValidationError):
        ExperimentSpec(lambda_sweep=())


def test_spec_rejects_early_time():
    with pytest.raises(ValidationError):
        ExperimentSpec(lambda_sweep=(10.0,), times=(0.9,))


def test_spec_rejects_unexcited():
    with pytest.raises(ValidationError):
        ExperimentSpec(lambda_sweep=(10.0,), excitations=((0, 1),))


def test_spec_sign_handling():
    assert ExperimentSpec(lambda_sweep=(10.0,), a2_sign="both").signs() == (1, -1)
    assert ExperimentSpec(lambda_sweep=(10.0,), a2_sign=-1).signs() == (-1,)


# ---------------------------------------------------------------------------
# run_experiment
# ---------------------------------------------------------------------------

def test_single_row_vanishing_coupling():
    spec = ExperimentSpec(lambda_sweep=(10.0,), a2_sign=1, oracle_cfg=SMALL,
                          lambda0_scale=1e-85)
    rows, slopes = run_experiment(spec)
    assert len(rows) == 1
    assert rows[0].p_oracle == 0.0
    assert not rows[0].failed
    assert slopes == {}


def test_rows_and_contrast(tmp_path):
    spec = ExperimentSpec(lambda_sweep=(10.0,), a2_sign="both", oracle_cfg=SMALL)
    rows, _ = run_experiment(spec)
    assert len(rows) == 2
    plus = next(r for r in rows if r.a2_sign > 0)
    minus = next(r for r in rows if r.a2_sign < 0)
    assert plus.p_oracle > 0 and math.isfinite(plus.ratio)
    assert math.isnan(plus.p_bound) and math.isnan(minus.p_leading)
    assert minus.ratio == pytest.approx(minus.p_oracle / plus.p_oracle)
    assert minus.p_oracle <= minus.p_bound
    assert plus.params_echo["a2"] == 2.0 and minus.params_echo["a2"] == -2.0

    write_csv(rows, tmp_path / "r.csv")
    got = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert list(got[0].keys()) == CSV_COLUMNS
    assert float(got[0]["p_oracle"]) == pytest.approx(plus.p_oracle)

    write_json(rows, {"demo": -1.0}, tmp_path / "r.json")
    doc = json.load(open(tmp_path / "r.json"))
    assert doc["fitted_slopes"] == {"demo": -1.0}
    assert doc["rows"][0]["params"]["M"] == 1.0


def test_workers_match_serial():
    spec = ExperimentSpec(lambda_sweep=(8.0, 10.0), a2_sign=1, oracle_cfg=SMALL)
    rows1, s1 = run_experiment(spec, workers=1)
    rows2, s2 = run_experiment(spec, workers=2)
    assert [r.p_oracle for r in rows1] == [r.p_oracle for r in rows2]
    assert s1 == s2


def test_failed_row_does_not_abort():
    # A wrap-around failure at one point is recorded, not raised.
    bad = OracleConfig(n_points=8192, n_time_nodes=64, domain_pad=0.5)
    spec = ExperimentSpec(lambda_sweep=(10.0,), a2_sign=1, oracle_cfg=bad)
    rows, _ = run_experiment(spec)
    assert rows[0].failed
    assert "contamination" in rows[0].error


def test_slopes_from_sweep():
    spec = ExperimentSpec(lambda_sweep=(8.0, 12.0, 16.0), a2_sign=1,
                          oracle_cfg=SMALL)
    rows, slopes = run_experiment(spec)
    assert len(rows) == 3
    key = "ratio_deviation_t1.5_n11"
    assert key in slopes
    assert slopes[key] <= -0.6
