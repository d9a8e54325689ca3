import copy
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from looprc import cli
from looprc.classifier import trainable_params
from looprc.errors import ArtifactError, ConfigError, DataFormatError, StageError
from looprc.ioformats import load_iq_file, read_container, write_container, write_iq_file
from looprc.pipeline import (
    LAMBDA_SWEEP,
    SWEEP_COLUMNS,
    ModelArtifact,
    build_topology,
    dataset_from_iq_file,
    dataset_to_iq_file,
    load_dataset,
    metrics_to_json,
    report_fom,
    run_inference,
    run_sweep,
    run_training,
    validate_config,
)
from looprc.transforms import IQBurst, compute_mean_amplitude


def base_config(**dataset_over):
    """Small, fast, fully explicit experiment config."""
    dataset = {
        "kind": "sei",
        "n_devices": 3,
        "bursts_per_device": 10,
        "snr_db": 30.0,
        "seed": 4,
        "length": 256,
    }
    dataset.update(dataset_over)
    return {
        "dataset": dataset,
        "transforms": [{"kind": "fft_mag"}],
        "topology": {
            "k": 2,
            "n_nodes": 64,
            "loop_gain": 0.8,
            "input_gain": 1.0,
            "filter_taps": [1.0, 0.6],
            "mask_distribution": "uniform",
            "mask_seed": 3,
        },
        "ridge": {"lam": 1e-3},
        "seed": 1,
        "threads": 1,
    }


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    cfg = base_config()
    result = run_training(cfg, out_dir=out)
    return cfg, result, out


# --- I/Q file format ---


def test_iq_file_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    # float32-representable samples so storage adds no rounding
    samples = (
        rng.normal(size=(3, 128)).astype(np.float32).astype(np.float64)
        + 1j * rng.normal(size=(3, 128)).astype(np.float32).astype(np.float64)
    )
    bursts = [IQBurst(samples=s) for s in samples]
    path = tmp_path / "cap.iq"
    write_iq_file(path, bursts, labels=[0, 1, 0], label_names=["a", "b"])
    back = load_iq_file(path)
    assert len(back) == 3
    for orig, got in zip(samples, back):
        assert np.array_equal(orig, got.samples)
    assert [b.meta["label"] for b in back] == [0, 1, 0]
    assert back[1].meta["label_name"] == "b"


def test_iq_file_truncated_pair_rejected(tmp_path):
    path = tmp_path / "cap.iq"
    write_iq_file(path, [IQBurst(samples=np.ones(64, dtype=complex))])
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])  # drop one float -> odd count
    with pytest.raises(DataFormatError, match="truncated"):
        load_iq_file(path)


def test_iq_file_burst_count_mismatch_rejected(tmp_path):
    path = tmp_path / "cap.iq"
    write_iq_file(path, [IQBurst(samples=np.ones(64, dtype=complex)) for _ in range(2)])
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])  # drop one whole burst
    with pytest.raises(DataFormatError):
        load_iq_file(path)


def test_iq_file_missing_sidecar_rejected(tmp_path):
    path = tmp_path / "cap.iq"
    write_iq_file(path, [IQBurst(samples=np.ones(64, dtype=complex))])
    (tmp_path / "cap.iq.json").unlink()
    with pytest.raises(DataFormatError, match="sidecar"):
        load_iq_file(path)


def test_dataset_round_trip_preserves_labels_and_split(tmp_path):
    ds = load_dataset(base_config()["dataset"])
    path = tmp_path / "ds.iq"
    dataset_to_iq_file(ds, path)
    back = dataset_from_iq_file(path)
    assert np.array_equal(back.labels, ds.labels)
    assert back.label_names == ds.label_names
    assert np.array_equal(back.train_idx, ds.train_idx)
    assert np.array_equal(back.test_idx, ds.test_idx)


def test_unlabeled_iq_file_cannot_become_dataset(tmp_path):
    path = tmp_path / "cap.iq"
    write_iq_file(path, [IQBurst(samples=np.ones(64, dtype=complex))])
    with pytest.raises(DataFormatError, match="labels"):
        dataset_from_iq_file(path)


# --- model container ---


def test_model_artifact_round_trip_bit_identical(trained, tmp_path):
    cfg, result, out = trained
    ds = load_dataset(cfg["dataset"])
    test_bursts, _ = ds.subset(ds.test_idx)
    labels_a, scores_a = result.artifact.predict_bursts(test_bursts)
    loaded = ModelArtifact.load(out / "model.lrcm")
    labels_b, scores_b = loaded.predict_bursts(test_bursts)
    assert labels_a == labels_b
    assert np.array_equal(scores_a, scores_b)


def test_corrupted_model_payload_rejected(trained, tmp_path):
    _, _, out = trained
    raw = bytearray((out / "model.lrcm").read_bytes())
    raw[-3] ^= 0xFF
    bad = tmp_path / "bad.lrcm"
    bad.write_bytes(bytes(raw))
    with pytest.raises(ArtifactError):
        ModelArtifact.load(bad)


def test_wrong_container_kind_rejected(tmp_path):
    path = tmp_path / "other.lrcm"
    write_container(path, {"kind": "something-else"}, {"x": np.zeros(3)})
    with pytest.raises(ArtifactError, match="kind"):
        ModelArtifact.load(path)


def test_container_header_round_trip(tmp_path):
    header = {"kind": "probe", "nested": {"a": [1, 2.5, "s"]}}
    arrays = {"w": np.arange(6, dtype=np.float64).reshape(2, 3)}
    path = tmp_path / "c.lrcm"
    write_container(path, header, arrays)
    h2, a2 = read_container(path)
    assert h2["kind"] == "probe" and h2["nested"] == header["nested"]
    assert np.array_equal(a2["w"], arrays["w"])


# --- config validation ---


def test_validate_fills_defaults():
    cfg = validate_config(base_config())
    assert cfg["ridge"]["lam"] == 1e-3
    assert cfg["threads"] == 1


def test_unknown_top_level_key_rejected():
    cfg = base_config()
    cfg["reservoirs"] = 2
    with pytest.raises(ConfigError, match="reservoirs"):
        validate_config(cfg)


def test_identity_nonlinearity_rejected_in_config():
    cfg = base_config()
    cfg["topology"]["nonlinearity"] = "identity"
    with pytest.raises(ConfigError, match="identity"):
        validate_config(cfg)


def test_topology_requires_explicit_gains():
    cfg = base_config()
    del cfg["topology"]["loop_gain"]
    with pytest.raises(ConfigError, match="loop_gain"):
        validate_config(cfg)


_MUTATIONS = {
    "unknown_top": lambda c: c.update(extra=1),
    "unknown_dataset": lambda c: c["dataset"].update(wavelength=3),
    "bad_dataset_kind": lambda c: c["dataset"].update(kind="sei2"),
    "empty_transforms": lambda c: c.update(transforms=[]),
    "bad_transform_kind": lambda c: c.update(transforms=[{"kind": "wavelet"}]),
    "unknown_topology_key": lambda c: c["topology"].update(chirality="left"),
    "bad_combiner": lambda c: c["topology"].update(combiner="xor"),
    "negative_lam": lambda c: c["ridge"].update(lam=-1.0),
    "nan_lam": lambda c: c["ridge"].update(lam=float("nan")),
    "negative_seed": lambda c: c.update(seed=-1),
    "zero_threads": lambda c: c.update(threads=0),
    "bad_sweep_axis": lambda c: c.update(sweep={"voltage": [1]}),
    "empty_sweep_axis": lambda c: c.update(sweep={"k": []}),
}


@given(name=st.sampled_from(sorted(_MUTATIONS)))
@settings(max_examples=len(_MUTATIONS), deadline=None)
def test_corrupted_configs_rejected(name):
    cfg = copy.deepcopy(base_config())
    _MUTATIONS[name](cfg)
    with pytest.raises(ConfigError):
        validate_config(cfg)


def test_indivisible_split_needs_explicit_padding():
    with pytest.raises(ConfigError, match="pad_to_multiple"):
        build_topology(
            {"k": 3, "n_nodes": 30, "loop_gain": 0.8, "input_gain": 1.0}, 256
        )
    topo, eff = build_topology(
        {"k": 3, "n_nodes": 30, "loop_gain": 0.8, "input_gain": 1.0, "pad_to_multiple": True},
        256,
    )
    assert eff == 258
    assert topo.input_length == 258


def test_layered_topology_length_mismatch_rejected():
    layers = [
        [
            {"input_length": 100, "n_nodes": 20, "loop_gain": 0.8, "input_gain": 1.0},
            {"input_length": 100, "n_nodes": 20, "loop_gain": 0.8, "input_gain": 1.0},
        ]
    ]
    with pytest.raises(ConfigError, match="256"):
        build_topology({"layers": layers}, 256)


def test_transform_incompatible_with_burst_length_rejected():
    cfg = base_config()
    cfg["transforms"] = [{"kind": "decimated_dft", "d": 7}]  # 7 does not divide 256
    with pytest.raises(ConfigError):
        run_training(cfg)


# --- training, inference, sweeps ---


def test_metrics_document_bytes_deterministic(trained):
    cfg, result, _ = trained
    again = run_training(copy.deepcopy(cfg))
    assert metrics_to_json(again.metrics_doc) == metrics_to_json(result.metrics_doc)


def test_metrics_json_written_matches_doc(trained):
    _, result, out = trained
    assert (out / "metrics.json").read_text() == metrics_to_json(result.metrics_doc)


def test_inference_reproduces_evaluation_accuracy(trained, tmp_path):
    cfg, result, out = trained
    ds = load_dataset(cfg["dataset"])
    test_bursts, test_labels = ds.subset(ds.test_idx)
    iq = tmp_path / "test.iq"
    write_iq_file(iq, test_bursts)
    labels, scores = run_inference(out / "model.lrcm", iq, out_path=tmp_path / "pred.csv")
    name_to_idx = {n: i for i, n in enumerate(ds.label_names)}
    acc = float(np.mean([name_to_idx[l] for l in labels] == test_labels))
    assert acc == pytest.approx(result.metrics.accuracy)
    # CSV has one row per burst plus header
    lines = (tmp_path / "pred.csv").read_text().strip().splitlines()
    assert len(lines) == len(test_bursts) + 1


def test_inference_deterministic_across_calls(trained, tmp_path):
    cfg, _, out = trained
    ds = load_dataset(cfg["dataset"])
    test_bursts, _ = ds.subset(ds.test_idx)
    iq = tmp_path / "test.iq"
    write_iq_file(iq, test_bursts)
    labels_a, scores_a = run_inference(out / "model.lrcm", iq)
    labels_b, scores_b = run_inference(out / "model.lrcm", iq)
    assert labels_a == labels_b
    assert np.array_equal(scores_a, scores_b)


def test_training_on_written_dataset_matches_generator(trained, tmp_path):
    """iq_file datasets reuse the stored split, so training on the
    written form of a generated dataset must agree with the generator
    run (bursts differ only by float32 storage rounding)."""
    cfg, result, _ = trained
    ds = load_dataset(cfg["dataset"])
    path = tmp_path / "ds.iq"
    dataset_to_iq_file(ds, path)
    cfg2 = copy.deepcopy(cfg)
    cfg2["dataset"] = {"kind": "iq_file", "path": str(path)}
    again = run_training(cfg2)
    assert again.metrics.accuracy == pytest.approx(result.metrics.accuracy)


def test_profile_computed_on_training_split_only():
    cfg = base_config()
    cfg["transforms"] = [{"kind": "diff_fft"}]
    result = run_training(cfg)
    ds = load_dataset(cfg["dataset"])
    train_bursts, _ = ds.subset(ds.train_idx)
    oracle = compute_mean_amplitude(train_bursts)
    assert np.array_equal(result.artifact.profile.values, oracle.values)
    leaky = compute_mean_amplitude(list(ds.bursts))
    assert not np.array_equal(result.artifact.profile.values, leaky.values)


def test_single_point_sweep_equals_run_training(trained, tmp_path):
    cfg, result, _ = trained
    sweep_cfg = copy.deepcopy(cfg)
    sweep_cfg["sweep"] = {}
    out = tmp_path / "sweep.csv"
    rows = run_sweep(sweep_cfg, out_path=out)
    assert len(rows) == 1
    assert rows[0]["accuracy"] == pytest.approx(result.metrics.accuracy)
    header = out.read_text().splitlines()[0]
    assert header == ",".join(SWEEP_COLUMNS)


def test_sweep_covers_cartesian_axes(trained):
    cfg, _, _ = trained
    sweep_cfg = copy.deepcopy(cfg)
    sweep_cfg["sweep"] = {"lambda": [1e-3, 1e-1], "k": [1, 2]}
    rows = run_sweep(sweep_cfg)
    assert len(rows) == 4
    assert {(r["k"], r["lambda"]) for r in rows} == {(1, 1e-3), (1, 1e-1), (2, 1e-3), (2, 1e-1)}


def test_sweeping_topology_axes_requires_topology():
    cfg = base_config()
    cfg["topology"] = None
    cfg["sweep"] = {"n_nodes": [10, 20]}
    with pytest.raises(ConfigError, match="topology"):
        run_sweep(cfg)


def test_lambda_sweep_grid_constants():
    assert len(LAMBDA_SWEEP) == 9
    assert LAMBDA_SWEEP[0] == pytest.approx(1e-6)
    assert LAMBDA_SWEEP[-1] == pytest.approx(1e2)


def test_null_topology_is_ridge_baseline():
    cfg = base_config()
    cfg["topology"] = None
    result = run_training(cfg)
    # state length equals the datapoint length: no reservoir in the path
    assert result.metrics_doc["state_length"] == result.metrics_doc["datapoint_length"]


def test_fom_report_prints_reference_constants(trained):
    _, result, _ = trained
    text = report_fom(result.metrics_doc, train_seconds=result.train_seconds)
    assert str(result.metrics_doc["trainable_params"]) in text
    assert "20x" in text and "100x" in text and ">= 1200x" in text


def test_trainable_params_consistent_with_formula(trained):
    _, result, _ = trained
    doc = result.metrics_doc
    assert doc["trainable_params"] == trainable_params(doc["state_length"], 3)


# --- CLI ---


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_cli_train_and_infer_exit_zero(tmp_path):
    cfg_path = write_config(tmp_path, base_config())
    out_dir = tmp_path / "run"
    assert cli.main(["train", "--config", str(cfg_path), "--out", str(out_dir)]) == 0
    assert (out_dir / "model.lrcm").exists() and (out_dir / "metrics.json").exists()

    ds = load_dataset(base_config()["dataset"])
    test_bursts, _ = ds.subset(ds.test_idx)
    iq = tmp_path / "test.iq"
    write_iq_file(iq, test_bursts)
    code = cli.main(
        ["infer", "--model", str(out_dir / "model.lrcm"), "--iq", str(iq),
         "--out", str(tmp_path / "pred.csv")]
    )
    assert code == 0
    assert (tmp_path / "pred.csv").exists()


def test_cli_config_errors_exit_two(tmp_path):
    bad = base_config()
    bad["dataset"]["kind"] = "nope"
    cfg_path = write_config(tmp_path, bad)
    assert cli.main(["train", "--config", str(cfg_path)]) == 2
    assert cli.main(["train", "--config", str(tmp_path / "absent.json")]) == 2
    not_json = tmp_path / "broken.json"
    not_json.write_text("{")
    assert cli.main(["train", "--config", str(not_json)]) == 2


def test_cli_data_errors_exit_three(tmp_path):
    cfg = base_config()
    cfg["dataset"] = {"kind": "iq_file", "path": str(tmp_path / "missing.iq")}
    cfg_path = write_config(tmp_path, cfg)
    assert cli.main(["train", "--config", str(cfg_path)]) == 3


def test_cli_numeric_errors_exit_four(tmp_path):
    # rank-deficient normal equations at lambda = 0: 1024-dim rows, 24 train points
    cfg = base_config()
    cfg["topology"] = None
    cfg["dataset"]["length"] = 1024
    cfg["ridge"] = {"lam": 0.0}
    cfg_path = write_config(tmp_path, cfg)
    assert cli.main(["train", "--config", str(cfg_path)]) == 4


def test_cli_generate_writes_loadable_dataset(tmp_path):
    cfg_path = write_config(tmp_path, {"dataset": base_config()["dataset"]})
    out = tmp_path / "gen.iq"
    assert cli.main(["generate", "--config", str(cfg_path), "--out", str(out)]) == 0
    back = dataset_from_iq_file(out)
    assert len(back) == 30


def test_cli_hyperopt_writes_runnable_config(tmp_path):
    cfg = base_config()
    cfg["hyperopt"] = {
        "method": "grid",
        "levels": 1,
        "points_per_axis": 3,
        "space": {"lambda": {"type": "real", "low": 1e-4, "high": 1e-1, "log": True}},
    }
    cfg_path = write_config(tmp_path, cfg)
    out = tmp_path / "best.json"
    log = tmp_path / "trials.csv"
    code = cli.main(
        ["hyperopt", "--config", str(cfg_path), "--out", str(out), "--trial-log", str(log)]
    )
    assert code == 0
    best_cfg = json.loads(out.read_text())
    assert "hyperopt" not in best_cfg
    result = run_training(best_cfg)
    assert 0.0 <= result.metrics.accuracy <= 1.0
    lines = log.read_text().strip().splitlines()
    assert len(lines) == 3  # one JSON record per trial
    assert all("accuracy" in json.loads(line) for line in lines)


def test_cli_report_exit_zero(tmp_path, capsys):
    metrics = {"accuracy": 0.5, "label_names": ["a", "b"], "trainable_params": 128,
               "training_macs": 999, "state_length": 64}
    path = tmp_path / "metrics.json"
    path.write_text(json.dumps(metrics))
    assert cli.main(["report", "--metrics", str(path)]) == 0
    assert "figure-of-merit" in capsys.readouterr().out
