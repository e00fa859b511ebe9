"""Integration tests for the dcpkit command line: outputs, files and exit codes."""

import json
from pathlib import Path

import numpy as np
import pytest

from dcpkit import __version__
from dcpkit.core.imaging import load_pgm, save_pgm
from dcpkit.main import main
from dcpkit.services.synthesis import noise_image
from dcpkit.utils.file_handlers import (
    BlockContainer,
    load_artifact,
    read_blocks,
    sidecar_path,
    write_blocks,
)


def run_cli(capsys, *argv) -> tuple[int, dict]:
    """Run the CLI in-process; returns the exit code and the parsed stdout JSON (or {})."""
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else {}


@pytest.fixture
def pgm(tmp_path) -> Path:
    return save_pgm(noise_image(48, seed=3), tmp_path / "face.pgm")


# ============================================================================
# Exit Codes
# ============================================================================


@pytest.mark.integration
class TestExitCodes:
    def test_version(self, capsys):
        assert main(["--version"]) == 0
        assert __version__ in capsys.readouterr().out

    def test_unknown_flag(self, capsys):
        assert main(["encode", "x.pgm", "--bogus"]) == 2

    def test_missing_subcommand(self, capsys):
        assert main([]) == 2

    def test_missing_input_file(self, capsys, tmp_path):
        assert main(["encode", str(tmp_path / "none.pgm")]) == 3
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "input_error"

    def test_invalid_radii(self, capsys, pgm):
        assert main(["encode", str(pgm), "--rin", "6", "--rex", "4"]) == 2

    def test_invalid_thread_count(self, capsys, pgm):
        assert main(["--threads", "0", "encode", str(pgm)]) == 2

    def test_malformed_pgm(self, capsys, tmp_path):
        bad = tmp_path / "bad.pgm"
        bad.write_bytes(b"P5\n2 2\n255\n\x00")
        assert main(["encode", str(bad)]) == 3

    def test_missing_manifest_inputs(self, capsys, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text(
            json.dumps({"entries": [{"key": "a", "image": "a.pgm", "subject": "s"}]})
        )
        assert main(["identify", "--manifest", str(manifest)]) == 3
        assert "missing" in capsys.readouterr().err


# ============================================================================
# Encoding And Filtering
# ============================================================================


@pytest.mark.integration
class TestEncode:
    def test_writes_feature_file(self, capsys, pgm, tmp_path):
        out = tmp_path / "face.feat"
        code, result = run_cli(capsys, "--seed", "4", "encode", pgm, "--grid", "4", "--out", out)
        assert code == 0
        assert result["length"] == 16 * 512
        container = read_blocks(out)
        assert container.blocks["histograms"].dtype == np.dtype("<u4")
        assert container.blocks["histograms"].sum() == 48 * 48 * 2
        assert container.header["seed"] == 4
        assert container.header["config_hash"] == result["config_hash"]
        assert sidecar_path(out).is_file()

    def test_default_output_next_to_image(self, capsys, pgm):
        code, result = run_cli(
            capsys, "encode", pgm, "--descriptor", "lbp", "--rin", "1", "--rex", "2"
        )
        assert code == 0
        assert Path(result["output"]) == pgm.with_suffix(".feat")
        assert result["length"] == 81 * 256

    def test_normalized_histograms_are_float(self, capsys, pgm, tmp_path):
        out = tmp_path / "n.feat"
        assert run_cli(capsys, "encode", pgm, "--grid", "2", "--normalize", "--out", out)[0] == 0
        values = read_blocks(out).blocks["histograms"]
        assert values.dtype == np.dtype("<f4")
        np.testing.assert_allclose(values.reshape(8, 256).sum(axis=1), 1.0, rtol=1e-5)

    def test_config_file(self, capsys, pgm, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"preset": "feret128", "grid_n": 3}))
        code, result = run_cli(capsys, "encode", pgm, "--config", cfg, "--out", tmp_path / "c.feat")
        assert code == 0
        assert result["length"] == 9 * 512


@pytest.mark.integration
class TestFilter:
    def test_fdg_writes_one_image_per_orientation(self, capsys, pgm, tmp_path):
        code, result = run_cli(
            capsys, "filter", pgm, "--op", "fdg", "--orientations", "0,90", "--out-dir", tmp_path
        )
        assert code == 0
        assert [Path(p).name for p in result["outputs"]] == ["face_fdg0.pgm", "face_fdg1.pgm"]
        assert load_pgm(result["outputs"][0]).shape == (48, 48)

    def test_tt(self, capsys, pgm):
        code, result = run_cli(capsys, "filter", pgm, "--op", "tt")
        assert code == 0
        assert Path(result["outputs"][0]).name == "face_tt.pgm"

    def test_tt_invalid_sigmas(self, capsys, pgm):
        assert main(["filter", str(pgm), "--op", "tt", "--sigma1", "3", "--sigma2", "2"]) == 2


# ============================================================================
# Representation And Analysis
# ============================================================================


@pytest.mark.integration
class TestRepresent:
    def test_writes_nine_features(self, capsys, small_corpus, tmp_path):
        entry = small_corpus.manifest.entries[0]
        out = tmp_path / "face.mdml"
        code, result = run_cli(
            capsys,
            "represent",
            "--image",
            small_corpus.root / entry.image,
            "--landmarks",
            small_corpus.root / entry.landmarks,
            "--out",
            out,
        )
        assert code == 0
        assert result["lengths"]["H1"] == 165_888
        assert result["lengths"]["H3"] == 688_128
        container = load_artifact(out)
        assert container.header["names"] == ["H1", "H2", "H3", "C1", "C2", "C3", "C4", "C5", "C6"]


@pytest.mark.integration
class TestEntropyScan:
    def test_generated_fields(self, capsys):
        code, result = run_cli(
            capsys, "entropy-scan", "--fields", "2", "--size", "32", "--rin", "1", "--rex", "2"
        )
        assert code == 0
        assert len(result["per_mode"]) == 35
        assert result["dual_cross_id"] == 20

    def test_sweep(self, capsys):
        code, result = run_cli(
            capsys, "entropy-scan", "--fields", "1", "--size", "24", "--sweep", "1,2", "2,3"
        )
        assert code == 0
        assert [r["radii"] for r in result["reports"]] == [[1.0, 2.0], [2.0, 3.0]]

    def test_sweep_lengths_must_match(self, capsys):
        assert main(["entropy-scan", "--fields", "1", "--size", "24", "--sweep", "1,2", "3"]) == 2

    def test_empty_corpus_directory(self, capsys, tmp_path):
        assert main(["entropy-scan", "--corpus", str(tmp_path)]) == 3


# ============================================================================
# Training
# ============================================================================


@pytest.fixture
def training_features(tmp_path, rng) -> Path:
    centers = rng.normal(0.0, 3.0, size=(6, 12))
    X = np.repeat(centers, 4, axis=0) + rng.normal(0.0, 0.5, size=(24, 12))
    labels = [f"id{i}" for i in range(6) for _ in range(4)]
    return write_blocks(BlockContainer({"X": X}, {"labels": labels}), tmp_path / "train.feat")


@pytest.mark.integration
class TestTraining:
    def test_wpca(self, capsys, training_features, tmp_path):
        out = tmp_path / "w.model"
        code, result = run_cli(
            capsys, "train-wpca", "--features", training_features, "--dim", "5", "--out", out
        )
        assert code == 0
        assert (result["d_in"], result["d_out"], result["n_samples"]) == (12, 5, 24)
        assert load_artifact(out).d_out == 5

    def test_wpca_dim_clipped_to_data(self, capsys, training_features, tmp_path):
        code, result = run_cli(
            capsys, "train-wpca", "--features", training_features, "--out", tmp_path / "w.model"
        )
        assert code == 0
        assert result["d_out"] == 12

    def test_plda(self, capsys, training_features, tmp_path):
        out = tmp_path / "p.model"
        code, result = run_cli(
            capsys,
            "train-plda",
            "--features",
            training_features,
            "--pca-dim",
            "8",
            "--dh",
            "3",
            "--dw",
            "3",
            "--iters",
            "5",
            "--out",
            out,
        )
        assert code == 0
        assert (result["dim"], result["d_h"], result["d_w"]) == (8, 3, 3)
        assert len(result["log_likelihoods"]) == 6
        assert Path(result["pca_output"]).is_file()
        assert load_artifact(out).dim == 8

    def test_plda_without_labels(self, capsys, tmp_path, rng):
        feats = write_blocks(BlockContainer({"X": rng.normal(size=(6, 4))}), tmp_path / "x.feat")
        argv = ["train-plda", "--features", str(feats), "--out", str(tmp_path / "p.model")]
        assert main(argv) == 3

    def test_missing_block(self, capsys, training_features, tmp_path):
        argv = ["train-wpca", "--features", str(training_features), "--block", "Y"]
        assert main(argv + ["--out", str(tmp_path / "w.model")]) == 3

    def test_fusion(self, capsys, tmp_path, rng):
        y = rng.random(200) < 0.5
        table = np.column_stack([y + rng.normal(0.0, 0.3, 200), rng.normal(size=200), y])
        scores = tmp_path / "scores.csv"
        np.savetxt(scores, table, delimiter=",", header="s1,s2,label", comments="")
        out = tmp_path / "f.model"
        code, result = run_cli(capsys, "train-fusion", "--scores", scores, "--out", out)
        assert code == 0
        assert result["mode"] == "linear"
        assert result["weights"][0] > abs(result["weights"][1])

    def test_fusion_single_class(self, capsys, tmp_path):
        scores = tmp_path / "scores.csv"
        scores.write_text("s1,label\n0.5,1\n0.7,1\n")
        argv = ["train-fusion", "--scores", str(scores), "--out", str(tmp_path / "f.model")]
        assert main(argv) == 3


# ============================================================================
# Protocols And Corpus Generation
# ============================================================================


@pytest.mark.integration
class TestProtocols:
    def test_synth_corpus(self, capsys, tmp_path):
        code, result = run_cli(
            capsys, "--seed", "2", "synth-corpus", "--ids", "3", "--per-id", "2", "--folds", "2",
            "--out", tmp_path / "c",
        )
        assert code == 0
        assert result["n_images"] == 6
        assert Path(result["manifest"]).is_file()

    def test_identify(self, capsys, small_manifest, tmp_path):
        report = tmp_path / "id.json"
        code, result = run_cli(
            capsys, "identify", "--manifest", small_manifest, "--grid", "4", "--out", report,
            "--artifacts", tmp_path / "run",
        )
        assert code == 0
        assert result["protocol"] == "identification"
        assert result["n_gallery"] == 4 and result["n_probes"] == 8
        assert json.loads(report.read_text())["rank_k"] == result["rank_k"]
        assert (tmp_path / "run" / "run.json").is_file()
        assert (tmp_path / "run" / "features.feat").is_file()

    def test_verify_writes_roc(self, capsys, small_manifest, tmp_path):
        roc = tmp_path / "roc.csv"
        code, result = run_cli(
            capsys, "verify", "--manifest", small_manifest, "--grid", "4", "--roc-csv", roc
        )
        assert code == 0
        assert 0.0 <= result["auc"] <= 1.0
        assert roc.read_text().splitlines()[0] == "far,vr"

    def test_benchmark_timing(self, capsys):
        code, result = run_cli(capsys, "benchmark", "--size", "64", "--repeats", "1", "--grid", "4")
        assert code == 0
        assert result["ratio_dcp_lbp"] > 0

    def test_benchmark_unknown_descriptor(self, capsys):
        assert main(["benchmark", "--size", "32", "--descriptor", "sift"]) == 2
