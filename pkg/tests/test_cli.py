import csv
import json

import numpy as np
import pytest

from tdec_coordination import cli
from tdec_coordination.artifacts import write_csv
from tdec_coordination.logger import EVENT_HEADER, EVENTS_FILENAME
from tdec_coordination.spectrum import Eigenspectrum, FeatureInstance, SpectrumRecord, feature_rows, spectra_rows
from tdec_coordination.tdec import read_matrix

TV_SYNTH = ["synth", "--preset", "tv", "--seed", "11", "--quiet"]


@pytest.fixture(autouse=True)
def _isolated_cwd(tmp_path, monkeypatch):
    # keeps a stray ./tdec_config.json out of the resolved configuration
    monkeypatch.chdir(tmp_path)


def run(*argv):
    return cli.main(list(argv))


def tree(root):
    """Relative path -> bytes for every artifact except the event log."""
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name != EVENTS_FILENAME}


def events(out):
    with open(out / EVENTS_FILENAME, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def tv_pipeline(out):
    assert run(*TV_SYNTH, "--out-dir", out) == 0
    assert run("corr", "--preset", "tv", "--cohort", f"{out}/cohort_TV.csv", "--out-dir", out, "--quiet") == 0
    assert run("eig", "--preset", "tv", "--eigensolver", "lapack", "--out-dir", out, "--quiet") == 0
    assert run("features", "--preset", "tv", "--out-dir", out, "--quiet") == 0
    assert run("cv", "--preset", "tv", "--out-dir", out, "--quiet") == 0


def write_features(path, instances):
    write_csv(path, *feature_rows(instances))
    return str(path)


def write_spectra(path, labels):
    records = []
    for s, label in enumerate(labels):
        values = np.linspace(3.0, 0.5, 6) + 0.1 * s
        records.append(SpectrumRecord(Eigenspectrum(values), "seg000", f"S{s + 1:02d}", label, "TV"))
    write_csv(path, *spectra_rows(records))
    return str(path)


def test_synth_is_reproducible(tmp_path, monkeypatch):
    for name in ("one", "two"):
        (tmp_path / name).mkdir()
        monkeypatch.chdir(tmp_path / name)
        assert run(*TV_SYNTH, "--out-dir", "run") == 0
    first, second = tree(tmp_path / "one" / "run"), tree(tmp_path / "two" / "run")
    assert "cohort_TV.csv" in first and "S12/TV.csv" in first
    assert first == second


def test_synth_rank_above_channel_count(tmp_path):
    assert run("synth", "--rank", "9,2", "--channels", "6", "--out-dir", str(tmp_path), "--quiet") == cli.EXIT_FORMAT


def test_tv_pipeline(tmp_path):
    out = tmp_path / "out"
    tv_pipeline(str(out))

    matrices = sorted((out / "matrices" / "TV").glob("*.json"))
    assert len(matrices) == 36
    m, meta = read_matrix(matrices[0].with_suffix(".csv"), matrices[0])
    assert m.dim == 90
    assert meta["subject_id"] == "S01" and meta["label"] == "SZ"

    with open(out / "spectra_TV.csv", newline="") as f:
        header = next(csv.reader(f))
    assert header[-1] == "e90"

    report = json.loads((out / "cv_report_TV.json").read_text())
    assert len(report["folds"]) == 12
    assert report["standardize"] == "fold"
    assert report["mean_accuracy"] >= 0.8

    saved = json.loads((out / "run_config.json").read_text())
    assert saved["delay_scale"] == 7 and saved["eigensolver"] == "jacobi"


def test_pipeline_is_byte_identical(tmp_path, monkeypatch):
    for name in ("one", "two"):
        (tmp_path / name).mkdir()
        monkeypatch.chdir(tmp_path / name)
        tv_pipeline("run")
    assert tree(tmp_path / "one" / "run") == tree(tmp_path / "two" / "run")


def test_fau_matrices(tmp_path):
    out = str(tmp_path)
    assert run("synth", "--preset", "fau", "--subjects", "1,1", "--segments", "1", "--out-dir", out, "--quiet") == 0
    assert run("corr", "--preset", "fau", "--cohort", f"{out}/cohort_FAU.csv", "--out-dir", out, "--quiet") == 0
    sidecar = tmp_path / "matrices" / "FAU" / "S01_seg000.json"
    m, _ = read_matrix(sidecar.with_suffix(".csv"), sidecar)
    assert m.dim == 255


def two_modality_pipeline(out):
    for preset in ("tv", "fau"):
        assert run("synth", "--preset", preset, "--subjects", "3,3", "--segments", "2", "--seed", "5",
                   "--out-dir", out, "--quiet") == 0
        cohort = f"{out}/cohort_{preset.upper()}.csv"
        assert run("corr", "--preset", preset, "--cohort", cohort, "--out-dir", out, "--quiet") == 0
        assert run("eig", "--preset", preset, "--out-dir", out, "--quiet") == 0
        assert run("features", "--preset", preset, "--out-dir", out, "--quiet") == 0
    assert run("fuse", "--features", f"{out}/features_TV.csv", "--features", f"{out}/features_FAU.csv",
               "--out-dir", out, "--quiet") == 0


def test_two_modality_pipeline_is_byte_identical(tmp_path, monkeypatch):
    for name in ("one", "two"):
        (tmp_path / name).mkdir()
        monkeypatch.chdir(tmp_path / name)
        two_modality_pipeline("run")
    first = tree(tmp_path / "one" / "run")
    assert "fused_report.json" in first and "spectra_FAU.csv" in first
    assert first == tree(tmp_path / "two" / "run")

    with open(tmp_path / "one" / "run" / "features_FAU.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert len(rows) == 13
    assert all(float(r[-1]) > 0 for r in rows[1:])
    report = json.loads(first["fused_report.json"])
    assert report["modalities"] == ["FAU", "TV"]
    assert len(report["folds"]) == 6
    assert "RANK_DEFICIENT" not in [r[1] for r in events(tmp_path / "one" / "run")]


def test_short_fau_turns_warn_rank_deficient(tmp_path):
    out = str(tmp_path)
    assert run("synth", "--preset", "fau", "--subjects", "1,1", "--segments", "1", "--segment-s", "10",
               "--out-dir", out, "--quiet") == 0
    assert run("corr", "--preset", "fau", "--cohort", f"{out}/cohort_FAU.csv", "--out-dir", out, "--quiet") == 0
    assert ["RANK_DEFICIENT", "WARNING"] in [[r[1], r[4]] for r in events(tmp_path)]


def test_corr_without_qualifying_segments(tmp_path):
    out = str(tmp_path)
    assert run(*TV_SYNTH, "--subjects", "1,1", "--segments", "1", "--out-dir", out) == 0
    assert run("corr", "--preset", "tv", "--cohort", f"{out}/cohort_TV.csv", "--min-segment-s", "20",
               "--out-dir", out, "--quiet") == 0
    assert not (tmp_path / "matrices").exists()
    rows = events(tmp_path)
    assert ["NO_SEGMENTS", "WARNING"] in [[r[1], r[4]] for r in rows]


def test_corr_single_recording(tmp_path):
    out = str(tmp_path)
    assert run(*TV_SYNTH, "--subjects", "1,1", "--segments", "2", "--out-dir", out) == 0
    assert run("corr", "--preset", "tv", "--channels", f"{out}/S02/TV.csv", "--manifest", f"{out}/S02/manifest.json",
               "--speaker", "S02", "--labels", f"{out}/labels.csv", "--out-dir", out, "--quiet") == 0
    names = sorted(p.name for p in (tmp_path / "matrices" / "TV").glob("*.json"))
    assert names == ["S02_seg000.json", "S02_seg001.json"]
    assert json.loads((tmp_path / "matrices" / "TV" / names[0]).read_text())["label"] == "HC"


def test_bad_index_range_flag(tmp_path):
    assert run("features", "--ranges", "0.5:0.4", "--out-dir", str(tmp_path), "--quiet") == cli.EXIT_FORMAT


def test_cv_on_separable_features(tmp_path, capsys, separable_instances):
    path = write_features(tmp_path / "features_TV.csv", separable_instances)
    assert run("cv", "--features", path, "--out-dir", str(tmp_path)) == 0
    table = capsys.readouterr().out
    assert "100.00%" in table
    assert "F1(S)/F1(H)" in table
    report = json.loads((tmp_path / "cv_report_TV.json").read_text())
    assert report["mean_accuracy"] == 1.0
    assert report["svm_params"]["gamma"] == "auto"


def test_cv_missing_file(tmp_path):
    assert run("cv", "--features", str(tmp_path / "absent.csv"), "--out-dir", str(tmp_path), "--quiet") == cli.EXIT_IO


def test_cv_malformed_features(tmp_path):
    path = tmp_path / "features_TV.csv"
    path.write_text("subject_id,label,modality,segment_id,f0\nS01,SZ,TV,seg000,abc\n")
    assert run("cv", "--features", str(path), "--out-dir", str(tmp_path), "--quiet") == cli.EXIT_FORMAT
    assert events(tmp_path)[-1][1] == "FAILED"


def test_fuse_reports_both_modalities(tmp_path, capsys, make_instances):
    centers = [[1.5, 1.5] if s % 2 == 0 else [-1.5, -1.5] for s in range(8)]
    tv = write_features(tmp_path / "tv.csv", make_instances(centers, seed=1, modality="TV"))
    fau = write_features(tmp_path / "fau.csv", make_instances(centers, seed=2, modality="FAU"))
    assert run("fuse", "--features", tv, "--features", fau, "--out-dir", str(tmp_path)) == 0
    assert "Multi-modal" in capsys.readouterr().out
    report = json.loads((tmp_path / "fused_report.json").read_text())
    assert report["modalities"] == ["FAU", "TV"]
    assert sorted(report["single_modality"]) == ["FAU", "TV"]
    assert len(report["folds"]) == 8


def test_fuse_with_misaligned_segments(tmp_path, make_instances):
    centers = [[1.0] if s % 2 == 0 else [-1.0] for s in range(6)]
    tv = write_features(tmp_path / "tv.csv", make_instances(centers, modality="TV"))
    fau = write_features(tmp_path / "fau.csv", make_instances(centers, modality="FAU")[:-1])
    assert run("fuse", "--features", tv, "--features", fau, "--out-dir", str(tmp_path), "--quiet") == cli.EXIT_DATA


def test_fuse_needs_two_modalities(tmp_path, separable_instances):
    path = write_features(tmp_path / "tv.csv", separable_instances)
    assert run("fuse", "--features", path, "--out-dir", str(tmp_path), "--quiet") == cli.EXIT_FORMAT


def test_train_writes_models(tmp_path, separable_instances):
    tv = write_features(tmp_path / "tv.csv", separable_instances)
    fau = write_features(tmp_path / "fau.csv", [
        FeatureInstance(i.features, i.subject_id, i.label, "FAU", i.segment_id) for i in separable_instances])
    assert run("train", "--features", tv, "--out-dir", str(tmp_path), "--quiet") == 0
    assert (tmp_path / "model_TV.json").exists()
    assert run("train", "--features", tv, "--features", fau, "--out-dir", str(tmp_path), "--quiet") == 0
    assert (tmp_path / "stacking_model.json").exists()


def test_plotdata(tmp_path):
    path = write_spectra(tmp_path / "spectra_TV.csv", ["SZ", "HC", "SZ", "HC"])
    assert run("plotdata", "--spectra", path, "--out-dir", str(tmp_path), "--quiet") == 0
    with open(tmp_path / "plotdata_TV.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["index", "normalized_index", "log10_HC", "log10_SZ", "diff_SZ"]
    assert len(rows) == 7
    assert run("plotdata", "--spectra", path, "--zoom", "0:0.2", "--out-dir", str(tmp_path), "--quiet") == 0
    with open(tmp_path / "plotdata_TV.csv", newline="") as f:
        assert len(list(csv.reader(f))) == 3


def test_plotdata_single_group(tmp_path):
    path = write_spectra(tmp_path / "spectra_TV.csv", ["HC", "HC"])
    assert run("plotdata", "--spectra", path, "--out-dir", str(tmp_path), "--quiet") == 0
    with open(tmp_path / "plotdata_TV.csv", newline="") as f:
        assert next(csv.reader(f)) == ["index", "normalized_index", "log10_HC"]


def test_plotdata_missing_reference(tmp_path):
    path = write_spectra(tmp_path / "spectra_TV.csv", ["SZ", "HC"])
    assert run("plotdata", "--spectra", path, "--reference", "MDD", "--out-dir", str(tmp_path),
               "--quiet") == cli.EXIT_DATA


def test_select(tmp_path):
    metadata = tmp_path / "metadata.csv"
    metadata.write_text("subject_id,group,bprs,hamd\nP02,HC,20,1\nP01,SZ,50,5\nP03,SZ,30,5\n")
    assert run("select", "--metadata", str(metadata), "--out-dir", str(tmp_path), "--quiet") == 0
    assert (tmp_path / "labels.csv").read_text() == "subject_id,label\nP01,SZ\nP02,HC\n"


def test_event_log_accumulates(tmp_path):
    metadata = tmp_path / "metadata.csv"
    metadata.write_text("subject_id,group,bprs,hamd\nP01,SZ,50,5\n")
    for _ in range(2):
        assert run("select", "--metadata", str(metadata), "--out-dir", str(tmp_path), "--quiet") == 0
    rows = events(tmp_path)
    assert rows[0] == EVENT_HEADER
    assert [r[1] for r in rows[1:]].count("START") == 2
    assert rows[-1][1] == "DONE"


def test_usage_errors():
    assert run() == cli.EXIT_FORMAT
    assert run("transpose") == cli.EXIT_FORMAT
    assert run("select") == cli.EXIT_FORMAT


@pytest.mark.parametrize("error, code", [
    (FileNotFoundError("x"), cli.EXIT_IO),
    (ValueError("x"), cli.EXIT_FORMAT),
    (RuntimeError("x"), None),
])
def test_exit_code_mapping(error, code):
    assert cli.exit_code(error) == code
