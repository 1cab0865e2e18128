import numpy as np
import pytest

from taxiq import experiments
from taxiq.model import PARAM_NAMES, ModelParams, ValidationError

SOURCES = {"caption", "filler", "swept", "required"}


def test_manifest_covers_every_figure():
    manifest = experiments.load_manifest()
    for fig in experiments.FIGURES:
        spec = manifest[fig]
        assert set(spec["params"]) == set(PARAM_NAMES)
        assert {v["source"] for v in spec["params"].values()} <= SOURCES
        assert spec["params"][spec["x"]["name"]]["source"] == "swept"
        # only a required value may be missing
        for v in spec["params"].values():
            assert (v["value"] is None) == (v["source"] == "required")


def test_fig7a_needs_matching_cost():
    with pytest.raises(ValidationError) as info:
        experiments.run_figure("7a")
    assert info.value.code == "missing_parameter"


@pytest.mark.parametrize("fig", ["7a", "7b"])
def test_fig7_threshold_trends(fig):
    r = experiments.run_figure(fig, {"cost_cmp": 1.0})
    assert r.all_passed
    vals = [row["n_e"] for row in r.rows]
    assert vals[0] != vals[-1]


def test_fig5a_trends_and_errors():
    r = experiments.run_figure("5a")
    assert r.all_passed
    assert all(row["error"] == "" for row in r.rows)
    assert r.columns[:2] == ["mu2", "lambda"]


def test_rerun_is_byte_identical():
    a = experiments.run_figure("7b", {"cost_cmp": 1.0}).to_csv()
    b = experiments.run_figure("7b", {"cost_cmp": 1.0}, seed=99).to_csv()
    assert a == b


def test_point_errors_are_recorded_not_raised():
    r = experiments.run_figure("5a", grid=(3.5, 4.5, 3), series=[5.5])
    errs = [row["error"] for row in r.rows]
    assert errs == ["", "degenerate_intensity", ""]


def test_grid_and_series_override():
    r = experiments.run_figure("6a", grid=(2.0, 3.0, 3), series=[4.5])
    assert [row["lambda"] for row in r.rows] == [2.0, 2.5, 3.0]


def test_integer_axis_rounding():
    assert experiments.grid_values("capacity_n", 2, 50, 25)[:3] == [2, 4, 6]


def test_unknown_figure():
    with pytest.raises(ValidationError):
        experiments.run_figure("11")


def test_fmt():
    assert experiments.fmt(0.1 + 0.2) == "0.3"
    assert experiments.fmt(True) == "true" and experiments.fmt(None) == ""
    assert experiments.fmt(7) == "7"


def test_random_params_are_valid():
    rng = np.random.default_rng(0)
    for _ in range(200):
        p = experiments.random_params(rng)
        assert isinstance(p, ModelParams)
        assert p.mu1 < p.mu2 and p.k1 < p.k2 and p.reward_r > p.price_p and p.rho2 < 1


def test_random_draws_regime_split():
    high = experiments.random_draws(30, seed=1, rho0_above_one=True)
    assert all(p.rho0 > 1 for p in high)
    assert experiments.random_draws(5, seed=2) == experiments.random_draws(5, seed=2)


def test_fig9_crossing():
    r = experiments.run_figure("9")
    crossing = [t for t in r.trends if "low lambda" in t.claim]
    assert crossing and all(t.passed for t in crossing)
