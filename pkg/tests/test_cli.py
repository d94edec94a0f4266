import subprocess
import sys

import numpy as np
import pytest

from robust_gefl.cli import main
from robust_gefl.corpus import read_corpus
from robust_gefl.experiments import synthesize_corpus
from robust_gefl.knowledge import read_labeled_features
from robust_gefl.model import read_model


def _kv(text):
    out = {}
    for line in text.strip().splitlines():
        for pair in line.split():
            key, _, value = pair.partition("=")
            out[key] = value
    return out


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Raw TSV corpus plus the ingested corpus and a labeled-feature file."""
    root = tmp_path_factory.mktemp("cli")
    corpus = synthesize_corpus(60, 80, indicators=8, doc_length=20, seed=5)
    lines = []
    for doc in corpus.documents:
        words = " ".join(" ".join([corpus.vocabulary[f]] * c) for f, c in doc.entries)
        lines.append(f"{corpus.classes[doc.label]}\t{words}")
    (root / "raw.tsv").write_text("\n".join(lines) + "\n")
    assert main(["ingest", "--input", str(root / "raw.tsv"), "--out", str(root / "c.corpus")]) == 0
    assert main(["select", "--corpus", str(root / "c.corpus"), "--out", str(root / "k.tsv"),
                 "--pool", "8", "--per-class", "4:4", "--neutral-out", str(root / "n.tsv"),
                 "--pool-out", str(root / "pool.tsv")]) == 0
    return root


def test_ingest_output(workspace, capsys):
    out = workspace / "again.corpus"
    assert main(["ingest", "--input", str(workspace / "raw.tsv"), "--out", str(out), "--min-count", "1"]) == 0
    fields = _kv(capsys.readouterr().out)
    assert fields["docs"] == "120" and fields["classes"] == "2"
    text = out.read_text()
    assert "#command=ingest" in text and "#min_count=1" in text
    assert read_corpus(out).classes == ("negative", "positive")


def test_select_writes_feature_files(workspace):
    corpus = read_corpus(workspace / "c.corpus")
    labeled = read_labeled_features(workspace / "k.tsv", corpus)
    assert len(labeled) == 8
    assert len(read_labeled_features(workspace / "n.tsv", corpus)) == 10
    assert "#seed=0" in (workspace / "k.tsv").read_text()


def test_select_with_lda(workspace, capsys):
    args = ["select", "--corpus", str(workspace / "c.corpus"), "--method", "lda", "--out",
            str(workspace / "lda.tsv"), "--pool", "5", "--per-class", "3", "--lda-iterations", "30",
            "--topics-out", str(workspace / "topics.tsv")]
    assert main(args) == 0
    assert _kv(capsys.readouterr().out)["method"] == "lda"
    assert "topic\trank\tword\tphi\n" in (workspace / "topics.tsv").read_text()
    assert (workspace / "topics.tsv").read_text().startswith("#command=select")
    assert "#topic_labeling=" in (workspace / "lda.tsv").read_text()


@pytest.mark.parametrize("method", ["ge-fl", "neutral", "max_entropy", "kl"])
def test_train_then_eval(workspace, capsys, method):
    model = workspace / f"{method}.model"
    args = ["train", "--corpus", str(workspace / "c.corpus"), "--features", str(workspace / "k.tsv"),
            "--out", str(model), "--method", method, "--fold", "0", "--folds", "5"]
    assert main(args) == 0
    fields = _kv(capsys.readouterr().out)
    assert fields["termination"] in ("converged", "max_iterations")
    assert "#method=" in model.read_text() and "#reference_source=" in model.read_text()
    assert main(["eval", "--model", str(model), "--corpus", str(workspace / "c.corpus"),
                 "--fold", "0", "--folds", "5"]) == 0
    acc = float(_kv(capsys.readouterr().out)["accuracy"])
    assert 0.0 <= acc <= 1.0


def test_kl_with_beta_zero_matches_ge_fl(workspace):
    common = ["train", "--corpus", str(workspace / "c.corpus"), "--features", str(workspace / "k.tsv")]
    assert main(common + ["--out", str(workspace / "a.model"), "--method", "ge-fl"]) == 0
    assert main(common + ["--out", str(workspace / "b.model"), "--method", "kl", "--beta", "0",
                          "--reference", "1:3"]) == 0
    a, _ = read_model(workspace / "a.model")
    b, _ = read_model(workspace / "b.model")
    assert np.array_equal(a.theta, b.theta)


def test_config_file_and_flag_precedence(workspace, capsys):
    cfg = workspace / "run.cfg"
    cfg.write_text("method = max_entropy\nbeta = 2\nmax_iterations = 5\n")
    args = ["train", "--corpus", str(workspace / "c.corpus"), "--features", str(workspace / "k.tsv"),
            "--out", str(workspace / "cfg.model"), "--config", str(cfg), "--beta", "3"]
    assert main(args) == 0
    fields = _kv(capsys.readouterr().out)
    assert fields["method"] == "max_entropy" and fields["beta"] == "3.0"
    assert int(fields["iterations"]) <= 5


def test_sweep(workspace, capsys):
    spec = workspace / "sweep.cfg"
    spec.write_text("name = tiny\nsynthetic_docs = 30\nsynthetic_vocab = 40\nsynthetic_indicators = 6\n"
                    "pool_size = 6\nfeature_counts = 3:1\nfolds = 3\nrepetitions = 1\nmethods = ge_fl, kl\n")
    out = workspace / "results"
    assert main(["sweep", "--spec", str(spec), "--out-dir", str(out), "--set", "betas=0,5", "--gnuplot"]) == 0
    assert "rows=4" in capsys.readouterr().out
    text = (out / "tiny.csv").read_text()
    assert "# betas = 0, 5" in text or "# betas = 0.0, 5.0" in text
    assert (out / "tiny.gp").exists()


def test_exit_codes(workspace, tmp_path, capsys):
    assert main(["ingest", "--input", str(tmp_path / "nope.tsv"), "--out", str(tmp_path / "x")]) == 2
    assert main(["select", "--corpus", str(workspace / "c.corpus"), "--out", str(tmp_path / "k"),
                 "--pool", "3", "--per-class", "5:5"]) == 3
    model = (workspace / "ge-fl.model")
    if not model.exists():
        main(["train", "--corpus", str(workspace / "c.corpus"), "--features", str(workspace / "k.tsv"),
              "--out", str(model)])
    lines = model.read_text().splitlines()
    idx = next(i for i, ln in enumerate(lines) if ln.startswith("classes"))
    row = lines[idx + 1].split()
    row[0] = "nan"
    lines[idx + 1] = " ".join(row)
    broken = tmp_path / "broken.model"
    broken.write_text("\n".join(lines) + "\n")
    assert main(["eval", "--model", str(broken), "--corpus", str(workspace / "c.corpus")]) == 4
    assert "error:" in capsys.readouterr().err
    bad_cfg = tmp_path / "bad.cfg"
    bad_cfg.write_text("betta = 1\n")
    assert main(["train", "--corpus", str(workspace / "c.corpus"), "--features", str(workspace / "k.tsv"),
                 "--out", str(tmp_path / "m"), "--config", str(bad_cfg)]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "robust_gefl", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sweep" in proc.stdout
