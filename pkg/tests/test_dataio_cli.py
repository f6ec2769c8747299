"""Dataset serialization and the command-line surface."""

import json
import os

import numpy as np
import pytest

from sdenet import cli, dataio
from sdenet.errors import ConfigError, DataError, NumericError, SdenetError
from sdenet.simulator import generate_ring_network


def _dataset(tmp_path, rng, with_u=True, system=None):
    times = np.arange(8.0)
    z = rng.standard_normal((8, 2))
    u = rng.standard_normal((8, 1)) if with_u else None
    data = dataio.TimeSeriesData(times=times, z=z, u=u, system=system,
                                 meta={"origin": "test"})
    path = str(tmp_path / "data.csv")
    dataio.save_dataset(path, data)
    return path, data


def test_dataset_roundtrip_is_exact(tmp_path, rng):
    system = generate_ring_network(2, np.random.default_rng(0), n_hidden=1)
    path, data = _dataset(tmp_path, rng, system=system)
    loaded = dataio.load_dataset(path)
    assert np.array_equal(loaded.times, data.times)
    assert np.array_equal(loaded.z, data.z)
    assert np.array_equal(loaded.u, data.u)
    assert loaded.meta["origin"] == "test"
    assert np.array_equal(loaded.system.a, system.a)
    assert loaded.n_nodes == 2 and loaded.n_inputs == 1


def test_dataset_loads_without_sidecar(tmp_path, rng):
    path, data = _dataset(tmp_path, rng, with_u=False)
    os.remove(dataio.sidecar_path(path))
    loaded = dataio.load_dataset(path)
    assert loaded.system is None
    assert loaded.u is None
    assert np.array_equal(loaded.z, data.z)


def test_dataset_validation_messages(tmp_path):
    path = str(tmp_path / "bad.csv")

    def write(text):
        with open(path, "w") as fh:
            fh.write(text)

    with pytest.raises(DataError, match="not found"):
        dataio.load_dataset(str(tmp_path / "missing.csv"))
    write("x,y1\n0,1\n1,2\n")
    with pytest.raises(DataError, match="'t'"):
        dataio.load_dataset(path)
    write("t,y1,zz\n0,1,1\n1,2,2\n")
    with pytest.raises(DataError, match="zz"):
        dataio.load_dataset(path)
    write("t,y1\n0,1\n")
    with pytest.raises(DataError, match="at least 2"):
        dataio.load_dataset(path)
    write("t,y1\n0,1\n1\n")
    with pytest.raises(DataError, match="row 3"):
        dataio.load_dataset(path)
    write("t,y1\n0,1\n1,abc\n")
    with pytest.raises(DataError, match="row 3"):
        dataio.load_dataset(path)
    write("t,y1\n0,1\n1,nan\n")
    with pytest.raises(DataError, match="non-finite"):
        dataio.load_dataset(path)
    write("t,y1\n0,1\n0,2\n")
    with pytest.raises(DataError, match="increasing"):
        dataio.load_dataset(path)
    write("t,y1\n0,1\n1,2\n")
    dataio.write_json(dataio.sidecar_path(path), {"n_nodes": 4})
    with pytest.raises(DataError, match="declares 4"):
        dataio.load_dataset(path)


def test_write_json_deterministic_and_nan_safe(tmp_path):
    path_a = str(tmp_path / "a.json")
    path_b = str(tmp_path / "b.json")
    payload = {
        "z": np.array([1.0, np.nan, np.inf]),
        "a": {"nested": np.int64(3)},
    }
    dataio.write_json(path_a, payload)
    dataio.write_json(path_b, payload)
    with open(path_a, "rb") as fa, open(path_b, "rb") as fb:
        assert fa.read() == fb.read()
    loaded = dataio.read_json(path_a)
    assert loaded["z"] == [1.0, None, None]
    assert loaded["a"]["nested"] == 3
    with pytest.raises(DataError):
        dataio.read_json(str(tmp_path / "nope.json"))


def test_error_exit_codes():
    assert ConfigError("x").exit_code == 2
    assert DataError("x").exit_code == 3
    assert NumericError("x").exit_code == 4
    assert issubclass(ConfigError, SdenetError)


def _run(*argv):
    return cli.main(list(argv))


def test_cli_simulate_writes_dataset(tmp_path):
    out = str(tmp_path)
    code = _run("simulate", "--output", out, "--kind", "ring",
                "--n-nodes", "3", "--n-hidden", "0", "--m-samples", "12",
                "--seed", "7", "--name", "ringset")
    assert code == 0
    data = dataio.load_dataset(os.path.join(out, "ringset.csv"))
    assert data.z.shape == (12, 3)
    adj = np.array(data.meta["adjacency"])
    expected = np.eye(3, dtype=int)
    for j in range(3):
        expected[(j + 1) % 3, j] = 1
    assert np.array_equal(adj, expected)


def test_cli_simulate_is_deterministic(tmp_path):
    for sub in ("a", "b"):
        os.makedirs(tmp_path / sub)
        code = _run("simulate", "--output", str(tmp_path / sub),
                    "--m-samples", "10", "--seed", "3")
        assert code == 0
    for name in ("dataset.csv", "dataset.json"):
        with open(tmp_path / "a" / name, "rb") as fa:
            with open(tmp_path / "b" / name, "rb") as fb:
                assert fa.read() == fb.read(), name


def test_cli_infer_eval_pipeline(tmp_path):
    out = str(tmp_path)
    assert _run("simulate", "--output", out, "--kind", "ring",
                "--n-nodes", "3", "--n-hidden", "0", "--m-samples", "10",
                "--seed", "1") == 0
    dataset = os.path.join(out, "dataset.csv")
    assert _run("infer", "--output", out, "--dataset", dataset,
                "--k-max", "15", "--refinement", "2", "--seed", "1",
                "--name", "smoke") == 0
    with open(os.path.join(out, "smoke-summary.json")) as fh:
        payload = json.load(fh)
    assert payload["n_nodes"] == 3
    assert np.array(payload["link_prob"]).shape == (3, 3)
    assert np.array(payload["s_map"]).shape == (3, 3)
    assert payload["chains"] == 1
    traj = np.loadtxt(os.path.join(out, "smoke-trajectory.csv"),
                      delimiter=",", skiprows=1)
    assert traj.shape == (19, 4)  # 9 segments x 2 + 1 points, t + 3 nodes
    assert _run("eval", "--output", out,
                "--summary", os.path.join(out, "smoke-summary.json"),
                "--dataset", dataset, "--name", "sm") == 0
    metrics = dataio.read_json(os.path.join(out, "sm-metrics.json"))
    assert metrics["diagonal_excluded"] is True
    assert set(metrics) >= {"tp", "fp", "fn", "tn", "auroc", "auprec"}


def test_cli_eval_perfect_result(tmp_path):
    out = str(tmp_path)
    truth = [[1, 1, 0], [0, 1, 0], [1, 0, 1]]
    payload = {
        "n_nodes": 3,
        "link_prob": np.array(truth, dtype=float),
        "s_map": truth,
    }
    dataio.write_json(os.path.join(out, "sum.json"), payload)
    dataio.write_json(os.path.join(out, "truth.json"), {"adjacency": truth})
    code = _run("eval", "--output", out,
                "--summary", os.path.join(out, "sum.json"),
                "--truth", os.path.join(out, "truth.json"))
    assert code == 0
    metrics = dataio.read_json(os.path.join(out, "eval-metrics.json"))
    assert metrics["tpr"] == 1.0
    assert metrics["precision"] == 1.0
    assert metrics["auroc"] == 1.0
    assert metrics["auprec"] == 1.0


def test_cli_eval_shuffled_scores_are_chance(tmp_path):
    rng = np.random.default_rng(0)
    truth = np.zeros((4, 4), dtype=int)
    truth[0, 1] = truth[1, 2] = truth[2, 3] = truth[3, 0] = 1
    from sdenet.metrics import ranked_metrics

    vals = [
        ranked_metrics(rng.random((4, 4)), truth)["auroc"]
        for _ in range(300)
    ]
    assert abs(float(np.mean(vals)) - 0.5) < 0.05


def test_cli_exit_codes(tmp_path):
    out = str(tmp_path)
    assert _run("eval", "--output", out, "--summary",
                str(tmp_path / "none.json")) == 3
    assert _run("infer", "--output", out) == 2
    dataio.write_json(os.path.join(out, "sum.json"),
                      {"n_nodes": 1, "link_prob": [[1.0]], "s_map": [[1]]})
    assert _run("eval", "--output", out,
                "--summary", os.path.join(out, "sum.json"),
                "--truth", str(tmp_path / "missing.json")) == 3
    assert _run("--set", "simulate.m_samples=oops",
                "simulate", "--output", out) == 2


def test_cli_config_layering(tmp_path):
    out = str(tmp_path)
    cfg = {"simulate": {"m_samples": 9, "name": "fromfile"}, "seed": 5}
    cfg_path = os.path.join(out, "cfg.json")
    dataio.write_json(cfg_path, cfg)
    # file section sets m_samples and name; --set overrides the name;
    # the flag overrides nothing else
    assert _run("--config", cfg_path, "--set", "simulate.name=fromset",
                "simulate", "--output", out) == 0
    data = dataio.load_dataset(os.path.join(out, "fromset.csv"))
    assert data.z.shape[0] == 9
    # flags beat both layers
    assert _run("--config", cfg_path, "simulate", "--output", out,
                "--name", "fromflag", "--m-samples", "7") == 0
    assert dataio.load_dataset(os.path.join(out, "fromflag.csv")).z.shape[0] == 7


def test_cli_output_env_fallback(tmp_path, monkeypatch):
    env_dir = tmp_path / "envout"
    monkeypatch.setenv(cli.OUTPUT_ENV, str(env_dir))
    assert _run("simulate", "--m-samples", "8", "--name", "viaenv") == 0
    assert (env_dir / "viaenv.csv").exists()


def test_cli_multichain_pooling(tmp_path):
    out = str(tmp_path)
    assert _run("simulate", "--output", out, "--kind", "ring",
                "--n-nodes", "2", "--n-hidden", "0", "--m-samples", "8",
                "--seed", "2") == 0
    assert _run("infer", "--output", out,
                "--dataset", os.path.join(out, "dataset.csv"),
                "--k-max", "8", "--refinement", "2", "--chains", "2",
                "--seed", "2", "--name", "mc") == 0
    payload = dataio.read_json(os.path.join(out, "mc-summary.json"))
    assert payload["chains"] == 2


def test_edge_csv_layout(tmp_path):
    path = str(tmp_path / "edges.csv")
    prob = np.array([[0.9, 0.1], [0.6, 0.8]])
    s_map = np.array([[1, 0], [1, 1]])
    dataio.write_edge_csv(path, prob, s_map=s_map)
    rows = open(path).read().strip().split("\n")
    assert rows[0] == "target,source,probability,map"
    assert len(rows) == 5
    assert rows[1] == "1,1,0.9,1"
    assert rows[2] == "1,2,0.1,0"


def test_cli_benchmark_writes_artifacts(tmp_path):
    out = str(tmp_path)
    code = _run("benchmark", "--output", out, "--suite", "ring-desk",
                "--replicates", "1", "--k-max", "25", "--seed", "0")
    assert code == 0
    agg = dataio.read_json(os.path.join(out, "ring-desk-summary.json"))
    assert agg["replicates"] == 1 and agg["succeeded"] == 1
    rows = open(os.path.join(out, "ring-desk-replicates.csv")).read().splitlines()
    assert rows[0].startswith("replicate,seed,status")
    assert len(rows) == 2
