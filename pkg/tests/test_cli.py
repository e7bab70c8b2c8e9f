import json

import numpy as np
import pytest

from elasticcp.cli import main
from elasticcp.io import dataset_csv, dumps, loads, read_dataset, write_csv
from elasticcp.simgen import SimSpec, generate

FAST = ["--mc-reps", "500"]


@pytest.fixture(scope="module")
def amp_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "amp.csv"
    assert main(["simulate", "--design", "amplitude-change", "--seed", "0", "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def amp_doc(amp_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("res") / "r.json"
    assert main(["detect", str(amp_csv), "--method", "elastic-amp", "--out", str(out), *FAST]) == 0
    return out


def test_simulate_layout(amp_csv):
    lines = amp_csv.read_text().splitlines()
    assert len(lines[0].split(",")) == 76
    assert len(lines) == 102
    assert lines[1].split(",")[0] == "-6.0"


def test_simulate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        main(["simulate", "--design", "phase-change", "--seed", "4", "--out", str(p)])
    assert a.read_bytes() == b.read_bytes()


def test_csv_round_trip(tmp_path):
    fs = generate(SimSpec("sensitivity", rng_seed=3))
    path = tmp_path / "s.csv"
    write_csv(path, fs)
    back = read_dataset(path)
    for f, g in zip(fs, back):
        assert np.array_equal(f.values, g.values)
        assert str(f.label) == g.label
    assert back[0].grid == fs[0].grid


def test_json_dataset(tmp_path):
    fs = generate(SimSpec(rng_seed=1))
    doc = {"t": list(fs[0].grid.original), "functions": [{"label": str(f.label), "values": list(f.values)} for f in fs]}
    path = tmp_path / "d.json"
    path.write_text(json.dumps(doc))
    back = read_dataset(path)
    assert len(back) == 75 and np.array_equal(back[3].values, fs[3].values)


def test_detect_document(amp_doc):
    doc = loads(amp_doc.read_text())
    assert doc["k_star"] == 30 and doc["k_star_label"] == "30"
    assert doc["decision"] == "reject"
    assert doc["method"] == "elastic-amp"
    assert len(doc["cusum_trace"]) == 75
    assert doc["mean_before"]["t"][0] == -6.0
    assert loads(dumps(doc)) == doc


def test_alpha_only_changes_decision(amp_csv, amp_doc, tmp_path):
    base = loads(amp_doc.read_text())
    out = tmp_path / "strict.json"
    main(["detect", str(amp_csv), "--method", "elastic-amp", "--alpha", "0.001", "--out", str(out), *FAST])
    strict = loads(out.read_text())
    for key in ("statistic", "k_star", "p_value", "cusum_trace", "lambda2"):
        assert strict[key] == base[key]
    assert strict["decision"] == "retain" and base["decision"] == "reject"


def test_detect_is_byte_identical(amp_csv, amp_doc, tmp_path):
    out = tmp_path / "again.json"
    main(["detect", str(amp_csv), "--method", "elastic-amp", "--out", str(out), *FAST])
    assert out.read_bytes() == amp_doc.read_bytes()


def test_plot_data(amp_csv, tmp_path):
    d = tmp_path / "plots"
    assert main(["detect", str(amp_csv), "--method", "elastic-phase", "--plot-data", str(d), "--out", str(tmp_path / "p.json"), *FAST]) == 0
    assert {p.name for p in d.iterdir()} == {"cusum.csv", "means.csv", "aligned.csv", "warps.csv"}
    warps = read_dataset(d / "warps.csv")
    assert warps[0].values[0] == -6.0 and warps[0].values[-1] == 6.0


def test_null_round_trip_and_exit_codes(tmp_path, capsys):
    path = tmp_path / "null.csv"
    main(["simulate", "--design", "null", "--n", "12", "--changepoint", "6", "--out", str(path)])
    assert main(["detect", str(path), "--method", "cross-sectional", *FAST]) == 0
    capsys.readouterr()

    bad = tmp_path / "bad.csv"
    bad.write_text("t,a\n0,1\n0.5,x\n1,2\n")
    assert main(["detect", str(bad)]) == 2
    assert main(["detect", str(tmp_path / "missing.csv")]) == 2
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("t,a,b\n0,1,2\n0.1,1\n0.2,1,2\n")
    assert main(["detect", str(ragged)]) == 2
    uneven = tmp_path / "uneven.csv"
    uneven.write_text("t,a,b,c,d\n0,1,2,3,4\n0.1,1,2,3,4\n0.5,1,2,3,4\n")
    assert main(["detect", str(uneven)]) == 2
    assert main(["simulate", "--design", "nope"]) == 2

    const = tmp_path / "const.csv"
    const.write_text(dataset_csv(generate(SimSpec(n=6, changepoint=3), z_sd=0, a_sd=0, change=False)))
    assert main(["detect", str(const), "--method", "elastic-amp", *FAST]) == 3
    assert main(["detect", str(const), "--method", "elastic-amp-pca", *FAST]) == 3


def test_align_command(tmp_path):
    single = tmp_path / "one.csv"
    single.write_text(dataset_csv(generate(SimSpec(n=2, changepoint=1, rng_seed=2))[:1]))
    out = tmp_path / "al"
    assert main(["align", str(single), "--out-dir", str(out)]) == 0
    aligned = read_dataset(out / "aligned.csv")
    original = read_dataset(single)
    assert np.array_equal(aligned[0].values, original[0].values)
    warps = read_dataset(out / "warps.csv")
    assert np.allclose(warps[0].values, original[0].grid.original)

    multi = tmp_path / "multi.csv"
    multi.write_text(dataset_csv(generate(SimSpec(n=8, changepoint=4, rng_seed=2))))
    assert main(["align", str(multi), "--out-dir", str(tmp_path / "al2")]) == 0
    before = np.vstack([f.values for f in read_dataset(multi)])
    after = np.vstack([f.values for f in read_dataset(tmp_path / "al2" / "aligned.csv")])
    assert after.std(axis=0).mean() < before.std(axis=0).mean()


def test_benchmark_command(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    args = ["benchmark", "--design", "sensitivity", "--reps", "1", "--methods", "elastic-amp-pca,cross-sectional", "--no-timing", *FAST]
    assert main(args + ["--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "seed,method,detected,k_star,p_value"
    assert len(rows) == 3
    assert "detection_rate" in capsys.readouterr().err
    again = tmp_path / "bench2.csv"
    main(args + ["--out", str(again)])
    assert again.read_bytes() == out.read_bytes()
    assert main(["benchmark", "--reps", "0"]) == 2


def test_detect_with_smoothing_and_limit_grid(amp_csv, tmp_path):
    out = tmp_path / "s.json"
    args = ["detect", str(amp_csv), "--method", "elastic-amp-pca", "--smooth-window", "5", "--smooth-passes", "2"]
    assert main(args + ["--limit-grid", "continuous", "--out", str(out), *FAST]) == 0
    doc = loads(out.read_text())
    assert doc["k_star"] == 30 and doc["config"]["limit_grid"] == "continuous"
    assert main(["detect", str(amp_csv), "--smooth-window", "4", "--smooth-passes", "1"]) == 2
