import csv
import json

import numpy as np
import pytest

from pnpda.baselines import threedvar_analysis
from pnpda.dynamics import Lorenz63, Trajectory
from pnpda.errors import MisalignedTimes
from pnpda.harness import pipelines as P
from pnpda.harness.cli import main
from pnpda.harness.config import config_hash, default_config, deep_merge, load_config, validate
from pnpda.harness.io import (
    load_dataset,
    load_observations,
    load_trajectory,
    manifest,
    save_dataset,
    save_observations,
    save_trajectory,
)
from pnpda.harness.metrics import ResultTable, RunResult, rmse
from pnpda.observations import ObservationSpec

TINY = {
    "nature": {"n_steps": 2000, "spinup": 100, "discard": 0},
    "train": {"widths": [8, 8], "d_tau": 4, "max_epochs": 3, "batch": 8},
    "pnp": {"n_iter": 5},
    "eval": {"n_runs": 2, "n_cycles": 5, "spinup": 100},
    "pairs": {"n_iter": 50},
}


@pytest.fixture(scope="module")
def tiny_cfg():
    return load_config("l63", overrides=TINY)


class TestRmse:
    def test_constant_offset(self):
        t = np.zeros((10, 3))
        assert np.allclose(rmse(t + [1.0, -2.0, 0.5], t), [1.0, 2.0, 0.5])
        assert rmse(t + 2.0, t, per_component=False) == pytest.approx(2.0)

    def test_double_loop(self, rng):
        a, b = rng.standard_normal((20, 4)), rng.standard_normal((20, 4))
        ref = []
        for j in range(4):
            s = 0.0
            for t in range(20):
                s += (a[t, j] - b[t, j]) ** 2
            ref.append((s / 20) ** 0.5)
        assert np.allclose(rmse(a, b), ref, rtol=1e-14)

    def test_misaligned(self, rng):
        s = rng.standard_normal((5, 2))
        with pytest.raises(MisalignedTimes):
            rmse(Trajectory(np.arange(5.0), s), Trajectory(np.arange(5.0) + 1, s))
        with pytest.raises(MisalignedTimes):
            rmse(s, s[:4])
        with pytest.raises(MisalignedTimes):
            rmse(Trajectory(np.arange(5.0), s), s)

    def test_trajectories(self, rng):
        s = rng.standard_normal((5, 2))
        assert np.all(rmse(Trajectory(np.arange(5.0), s), Trajectory(np.arange(5.0), s)) == 0)


def table(rng):
    res = []
    for m in ("a", "b"):
        for r in range(4):
            res.append(RunResult(m, 0.5, r, rng.random((6, 3))))
    res.append(RunResult("b", 0.5, 4, None, failure="blow-up"))
    return ResultTable(res)


class TestResultTable:
    def test_aggregate(self, rng):
        T = table(rng)
        rows = {(m, c): (mean, std, ok, bad) for m, _, c, mean, std, ok, bad in T.aggregate()}
        for m in ("a", "b"):
            runs = [r for r in T.results if r.method == m and r.ok]
            per_run = [np.sqrt(np.mean(r.errors**2)) for r in runs]
            mean, std, ok, bad = rows[(m, "all")]
            assert abs(mean - np.mean(per_run)) <= 1e-12
            assert abs(std - np.std(per_run)) <= 1e-12
            assert ok == 4 and bad == (1 if m == "b" else 0)
            comp1 = [np.sqrt(np.mean(r.errors[:, 1] ** 2)) for r in runs]
            assert abs(rows[(m, 1)][0] - np.mean(comp1)) <= 1e-12

    def test_run_rmse_from_records(self, rng):
        # a run's RMSE equals the root mean square of its cycle records
        T = table(rng)
        recs = [row for row in T.records() if row[0] == "a" and row[2] == 2]
        assert len(recs) == 18
        assert np.sqrt(np.mean([e[-1] ** 2 for e in recs])) == pytest.approx(T.run_values("a")[2], rel=1e-14)

    def test_csv_round_trip(self, rng, tmp_path):
        T = table(rng)
        T.write_csv(tmp_path / "r.csv")
        back = ResultTable.read_csv(tmp_path / "r.csv")
        assert len(back) == 8  # the failed run is not in the records file
        for m in ("a", "b"):
            assert np.array_equal(back.run_values(m, 0.5), T.run_values(m, 0.5))

    def test_aggregate_csv(self, rng, tmp_path):
        T = table(rng)
        T.write_aggregate_csv(tmp_path / "a.csv")
        with open(tmp_path / "a.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0].keys() == {"method", "axis_value", "component", "mean", "std", "n_success", "n_failed"}
        b_all = [r for r in rows if r["method"] == "b" and r["component"] == "all"][0]
        assert b_all["n_failed"] == "1" and b_all["n_success"] == "4"

    def test_summary(self, rng):
        assert "failed 1" in table(rng).summary()


class TestConfig:
    @pytest.mark.parametrize("system", ["l63", "l96", "ks"])
    def test_defaults_valid(self, system):
        validate(default_config(system))

    def test_hash_stable(self):
        a, b = load_config("l63"), load_config("l63")
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash(load_config("l63", overrides={"seed": 1}))

    def test_bad_values(self):
        with pytest.raises(ValueError):
            load_config("l63", overrides={"eval": {"n_runs": 0}})
        with pytest.raises(ValueError):
            load_config("l63", overrides={"obs_eval": {"indices": [0, 3]}})
        with pytest.raises(ValueError):
            load_config("nope")

    def test_partial_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"testbed": "l96", "pnp": {"n_iter": 7}}))
        cfg = load_config(path=str(p))
        assert cfg["pnp"]["n_iter"] == 7 and cfg["pnp"]["n_samples"] == 8
        with pytest.raises(ValueError):
            load_config("l63", str(p))

    def test_full_preset(self):
        assert load_config("l63", full=True)["eval"]["n_runs"] == 50

    def test_manifest_reproduces_config(self, tmp_path):
        cfg = load_config("ks", overrides={"seed": 5})
        p = tmp_path / "m.json"
        p.write_text(json.dumps(manifest(cfg, "x")))
        assert config_hash(load_config(path=str(p))) == config_hash(cfg)

    def test_deep_merge(self):
        assert deep_merge({"a": {"b": 1, "c": 2}}, {"a": {"c": 3}}) == {"a": {"b": 1, "c": 3}}


class TestIo:
    def test_trajectory(self, rng, tmp_path):
        t = Trajectory(np.arange(4.0), rng.standard_normal((4, 3)))
        save_trajectory(tmp_path / "t.bin", t, "l63", 0.01, 3, "h")
        back, header = load_trajectory(tmp_path / "t.bin")
        assert np.array_equal(back.states, t.states) and np.array_equal(back.times, t.times)
        assert header["testbed"] == "l63" and header["dt"] == 0.01

    def test_observations(self, tiny_cfg, tmp_path):
        _, obs = P.generate_nature_run(tiny_cfg, n_steps=200)
        save_observations(tmp_path / "o.bin", obs, "l63")
        back, _ = load_observations(tmp_path / "o.bin")
        assert np.array_equal(back.values, obs.values)
        assert np.array_equal(back.steps, obs.steps)
        assert np.array_equal(back.spec.noise_cov, obs.spec.noise_cov)

    def test_dataset_and_wrong_kind(self, rng, tmp_path):
        from pnpda.flowmatch import PairDataset

        ds = PairDataset(rng.standard_normal((5, 3)), rng.standard_normal((5, 3)),
                         {"testbed": "l63", "steps": np.arange(5), "x": np.float64(1.5)})
        save_dataset(tmp_path / "d.bin", ds, "h")
        back, header = load_dataset(tmp_path / "d.bin")
        assert np.array_equal(back.xa, ds.xa)
        assert np.array_equal(back.metadata["steps"], np.arange(5))
        with pytest.raises(ValueError):
            load_trajectory(tmp_path / "d.bin")


class TestPipelines:
    def test_nature_deterministic_and_bounded(self, tiny_cfg):
        a, oa = P.generate_nature_run(tiny_cfg)
        b, ob = P.generate_nature_run(tiny_cfg)
        assert np.array_equal(a.states, b.states) and np.array_equal(oa.values, ob.values)
        s = a.states
        assert np.all(np.abs(s[:, :2]) < 35) and np.all((s[:, 2] > 0) & (s[:, 2] < 65))
        assert len(oa) == 2000 // 40

    def test_pairs_improve_on_background(self, tiny_cfg):
        ds = P.generate_training_pairs(tiny_cfg)
        assert ds.metadata["analysis_rmse"] < ds.metadata["background_rmse"]
        assert len(ds) == 2000 // 40

    def test_threedvar_toy_halfway(self, rng):
        # noiseless, fully observed, B = P: each analysis is the midpoint
        model = Lorenz63()
        spec = ObservationSpec.isotropic([0, 1, 2], 1.0, 3)
        truth = model.run(np.array([1.0, 2.0, 20.0]), 200, 0.01)
        x = truth[0] + 2.0
        for c in range(1, 5):
            xb = model.run(x, 40, 0.01)[-1]
            y = truth[40 * c]
            x = threedvar_analysis(xb, y, spec, np.eye(3))
            assert np.allclose(x, (xb + y) / 2, rtol=0, atol=1e-12)

    def test_run_deterministic(self, tiny_cfg):
        a = P.run_cyclic_da("3dvar", tiny_cfg, 1)
        b = P.run_cyclic_da("3dvar", tiny_cfg, 1)
        assert np.array_equal(a.errors, b.errors)
        assert a.errors.shape == (5, 3)

    def test_degenerate_sweep(self, tiny_cfg):
        T = P.sweep(tiny_cfg, "obs_noise", [tiny_cfg["obs_eval"]["sigma"]], ["3dvar"], n_runs=1)
        ref = P.run_cyclic_da("3dvar", tiny_cfg, 0)
        assert np.array_equal(T.results[0].errors, ref.errors)

    def test_sweep_layout(self, tiny_cfg):
        T = P.sweep(tiny_cfg, "obs_noise", [0.5, 2.0], ["freerun", "3dvar"], n_runs=2)
        assert T.cells() == [("freerun", 0.5), ("3dvar", 0.5), ("freerun", 2.0), ("3dvar", 2.0)]
        assert len(T) == 8
        with pytest.raises(ValueError):
            P.sweep(tiny_cfg, "bogus", [1], ["3dvar"])

    def test_freerun_ignores_observations(self, tiny_cfg):
        a = P.run_cyclic_da("freerun", tiny_cfg, 0, axis="obs_noise", axis_value=0.5)
        b = P.run_cyclic_da("freerun", tiny_cfg, 0, axis="obs_noise", axis_value=3.0)
        assert np.array_equal(a.errors, b.errors)

    def test_pnp_fallback_keeps_background(self, tiny_cfg, rng):
        from pnpda.flowmatch import VelocityNet

        net = VelocityNet.initialize(3, [8], rng, d_tau=4)
        net.flat[:] = np.nan
        res = P.run_cyclic_da("pnpda", tiny_cfg, 0, net=net)
        free = P.run_cyclic_da("freerun", tiny_cfg, 0)
        assert res.ok
        assert np.array_equal(res.errors, free.errors)

    def test_unknown_method(self, tiny_cfg):
        with pytest.raises(ValueError):
            P.run_cyclic_da("4dvar", tiny_cfg, 0)
        with pytest.raises(ValueError):
            P.run_cyclic_da("pnpda", tiny_cfg, 0)


def test_cli_end_to_end(tmp_path, capsys):
    cfgp = tmp_path / "cfg.json"
    cfgp.write_text(json.dumps({"testbed": "l63", **TINY}))
    c = str(cfgp)
    assert main(["--log-level", "WARNING", "generate", "--config", c, "--out", str(tmp_path / "nat")]) == 0
    truth, _ = load_trajectory(tmp_path / "nat" / "truth.bin")
    assert len(truth) == 2001
    ds = str(tmp_path / "pairs.bin")
    assert main(["--log-level", "WARNING", "pairs", "--config", c, "--out", ds]) == 0
    ck = str(tmp_path / "net.bin")
    assert main(["--log-level", "WARNING", "train", "--config", c, "--dataset", ds, "--out", ck, "--log-every", "0"]) == 0
    out = str(tmp_path / "res.csv")
    assert main(["--log-level", "WARNING", "assimilate", "--config", c, "--method", "pnpda",
                 "--checkpoint", ck, "--runs", "1", "--out", out]) == 0
    assert (tmp_path / "res.aggregate.csv").exists()
    man = json.loads((tmp_path / "res.csv.manifest.json").read_text())
    assert man["command"] == "assimilate" and man["seed"] == 63
    # rerunning from the manifest reproduces the records byte for byte
    out2 = str(tmp_path / "res2.csv")
    assert main(["--log-level", "WARNING", "assimilate", "--config", str(tmp_path / "res.csv.manifest.json"),
                 "--method", "pnpda", "--checkpoint", ck, "--runs", "1", "--out", out2]) == 0
    assert (tmp_path / "res.csv").read_bytes() == (tmp_path / "res2.csv").read_bytes()
    sw = str(tmp_path / "sw.csv")
    assert main(["--log-level", "WARNING", "sweep", "--config", c, "--axis", "obs_noise", "--values", "1.0",
                 "--methods", "3dvar", "--runs", "1", "--out", sw]) == 0
    ab = str(tmp_path / "ab.csv")
    assert main(["--log-level", "WARNING", "ablate", "--config", c, "--axis", "iters", "--values", "2", "3",
                 "--checkpoint", ck, "--runs", "1", "--out", ab]) == 0
    assert "pnpda" in capsys.readouterr().out
