import math

import numpy as np
import pytest

from rhig.bench import AlgoSpec, Scenario, run_experiment, write_csv
from rhig.bench import cli, runner
from rhig.bench.scenarios import scenario_lowerbound, scenario_planning, scenario_quadrotor
from rhig.bounds import variation_VT
from rhig.core import InstanceError
from rhig.offline import OfflineConvergenceError, offline_optimum


def test_planning_noise_free_is_exact():
    inst = scenario_planning(0.7, sigma2=0.0, seed=3)
    assert not np.any(inst.table.error_norms_sq())
    np.testing.assert_allclose(inst.theta.ravel(), 4 * np.sin(0.5 * np.arange(1, 21)))


def test_planning_paper_settings_build():
    for gamma in (0.3, 0.7):
        inst = Scenario("planning", {"gamma": gamma}).build(0)
        assert inst.T == 20 and inst.x0[0] == 10.0 and inst.spec.L == 3.0


def test_planning_one_step_error_mean():
    vals = np.array([scenario_planning(0.7, seed=s).table.error_norms_sq()[0] for s in range(1000)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 20.0) <= 3 * se


def test_planning_predictions_are_optimal_filter():
    inst = scenario_planning(0.5, T=6, seed=1)
    y = inst.theta.ravel() - inst.extras["d"]
    # row s holds d_tau + gamma^(tau-s) y_s
    for s in range(1, 6):
        for tau in range(s + 1, 7):
            expect = inst.extras["d"][tau - 1] + 0.5 ** (tau - s) * y[s - 1]
            assert inst.table.rows[s, tau - 1, 0] == pytest.approx(expect, abs=1e-12)


def test_quadrotor_shape_and_constants():
    inst = scenario_quadrotor(seed=0)
    assert inst.T == 100
    assert inst.extras["shock_stage"] == 56
    assert inst.spec.L == pytest.approx(2.6, abs=0.01)
    assert inst.eta == pytest.approx(1 / inst.spec.L)
    u = inst.extras["control"](np.ones(100))
    np.testing.assert_allclose(u, 8.8, atol=1e-9)


def test_quadrotor_zero_beta_tracks_target():
    inst = scenario_quadrotor({"beta": 0.0}, seed=2)
    sol = offline_optimum(inst.spec, inst.theta, inst.fset, inst.x0)
    np.testing.assert_allclose(sol.x_star, inst.theta, atol=1e-10)


def test_quadrotor_shock_is_unannounced():
    p = {"sigma2": 0.0}
    inst = scenario_quadrotor(p, seed=0)
    known = scenario_quadrotor({**p, "surprise": False}, seed=0)
    np.testing.assert_array_equal(inst.theta, known.theta)
    # a prediction read at stage 50 for stage 70 still uses the old reference
    assert inst.table.predict(70, 49) != inst.theta[69]
    assert known.table.predict(70, 49) == inst.theta[69]
    # from the shock stage on the change is known
    assert inst.table.predict(70, 55) == inst.theta[69]
    assert inst.table.predict(56, 49) == inst.theta[55]


def test_lowerbound_construction():
    for seed in range(20):
        inst = scenario_lowerbound(2.0, 1.0, T=12, seed=seed)
        th = inst.theta.ravel()
        t = np.arange(1, 13)
        assert np.all(th[t % 2 == 0] >= 1 / 8) and np.all(th[t % 2 == 0] <= 3 / 8)
        assert np.all(th[t % 2 == 1] <= -1 / 8) and np.all(th[t % 2 == 1] >= -3 / 8)
        for tt in range(1, 13):
            for tau in range(0, tt):
                err = abs(th[tt - 1] - inst.table.predict(tt, tau)[0])
                assert err <= (tt - tau) / (8 * tt) + 1e-15
        VT = variation_VT(inst.spec, inst.theta, inst.theta0, inst.fset)
        assert VT >= 2.0 * 12 / 8


def test_lowerbound_errors_uncorrelated_across_stages():
    errs = np.array([scenario_lowerbound(2.0, 1.0, T=6, seed=s).table.errors(2).ravel()
                     for s in range(3000)])
    corr = np.corrcoef(errs.T)
    off = corr[~np.eye(6, dtype=bool)]
    assert np.max(np.abs(off)) < 0.1


def test_lowerbound_condition():
    with pytest.raises(InstanceError):
        scenario_lowerbound(1.0, 0.5)
    with pytest.raises(InstanceError):
        scenario_lowerbound(2.0, 30.0)


def test_scenario_rejects_unknown_params():
    with pytest.raises(InstanceError):
        Scenario("planning", {"bogus": 1})
    with pytest.raises(InstanceError):
        Scenario("weather")


def test_single_seed_two_algorithms_share_offline_cost():
    reps = run_experiment(Scenario("planning"), [AlgoSpec("rhig", 2), AlgoSpec("afhc", 2)], 1)
    assert len(reps) == 2
    assert reps[0].offline_cost == reps[1].offline_cost
    assert all(r.regret >= -1e-6 for r in reps)


def test_runs_are_deterministic_and_parallel_invariant(tmp_path):
    algos = [AlgoSpec("rhig", 3), AlgoSpec("chc", 3, v=2), AlgoSpec("ogd", 0)]
    a = run_experiment(Scenario("planning"), algos, 4, base_seed=7)
    b = run_experiment(Scenario("planning"), algos, 4, base_seed=7, parallelism=2)
    write_csv(a, tmp_path / "a.csv", with_timing=False)
    write_csv(b, tmp_path / "b.csv", with_timing=False)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    keys = [(r.algorithm, r.W, r.seed) for r in a]
    assert keys == sorted(keys, key=lambda k: (runner.ALGORITHMS.index(k[0]), k[1], k[2]))


def test_failed_run_becomes_tagged_row():
    reps = run_experiment(Scenario("planning"), [AlgoSpec("chc", 2, v=5), AlgoSpec("rhig", 2)], 1)
    bad = [r for r in reps if r.algorithm == "chc"][0]
    assert bad.error and "InstanceError" in bad.error and math.isnan(bad.regret)
    good = [r for r in reps if r.algorithm == "rhig"][0]
    assert good.error is None and good.regret >= 0


def test_bound_columns():
    reps = run_experiment(Scenario("planning"), [AlgoSpec("rhig", 2, eta=1 / 6),
                                                 AlgoSpec("afhc", 2)], 2)
    for r in reps:
        if r.algorithm == "rhig":
            assert r.regret <= r.bound_theorem1 + 1e-6
            assert math.isfinite(r.bound_theorem5)
        else:
            assert math.isnan(r.bound_theorem1)


def test_cli_run_and_bounds(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code = cli.main(["run", "--scenario", "planning", "--algo", "rhig,afhc", "--W", "2",
                     "--seeds", "2", "--gamma", "0.3", "--out", str(out)])
    assert code == 0
    header = out.read_text().splitlines()[0]
    assert header == ",".join(runner.CSV_COLUMNS)
    assert len(out.read_text().splitlines()) == 5
    assert cli.main(["bounds", "--from", str(out)]) == 0
    rows = (tmp_path / "run_bounds.csv").read_text().splitlines()
    assert rows[0] == "scenario,algorithm,W,extra_param,seed,bound_name,value"
    names = {r.split(",")[5] for r in rows[1:]}
    assert {"theorem1", "theorem5", "corollary1_part2", "theorem6_K", "V_T"} <= names


def test_cli_same_seed_same_bytes(tmp_path):
    args = ["run", "--scenario", "lowerbound", "--algo", "rhig,chc", "--W", "3", "--seeds", "3",
            "--no-timing"]
    assert cli.main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("# shorter horizon\nT = 8\nsigma2 = 0.5\n")
    out = tmp_path / "r.csv"
    assert cli.main(["run", "--config", str(cfg), "--W", "inf", "--seeds", "1",
                     "--out", str(out)]) == 0
    assert "T = 8" in (tmp_path / "r.csv.params").read_text()


@pytest.mark.parametrize("argv", [
    ["run", "--W", "-1", "--out", "x.csv"],
    ["run", "--W", "two", "--out", "x.csv"],
    ["run", "--algo", "mpc", "--out", "x.csv"],
    ["run", "--algo", "afhc", "--W", "inf", "--out", "x.csv"],
    ["run", "--seeds", "0", "--out", "x.csv"],
    ["run", "--scenario", "moon", "--out", "x.csv"],
    ["bounds", "--from", "missing.csv"],
    ["frobnicate"],
])
def test_cli_config_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(argv) == 2


def test_cli_bad_config_keys(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("colour = blue\n")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2
    cfg.write_text("T = many\n")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2
    cfg.write_text("T = 0\n")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2


def test_cli_numerical_failure(tmp_path, monkeypatch):
    def broken(*a, **k):
        raise OfflineConvergenceError("stuck", np.zeros(1), 1.0)

    monkeypatch.setattr(runner, "offline_optimum", broken)
    assert cli.main(["run", "--seeds", "1", "--out", str(tmp_path / "x.csv")]) == 3


def test_cli_selftest():
    assert cli.main(["selftest"]) == 0
