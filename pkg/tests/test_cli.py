import json

import numpy as np
import pytest

from progct import cli, data, nets
from progct.checkpoint import Checkpoint, save_checkpoint


@pytest.fixture()
def small_ckpt(tmp_path):
    g = nets.init_generator(5)
    for name in g.names():
        g[name].value = g[name].value * 0.2
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, Checkpoint(generator=g.arrays(), train_depth=3, seed=5,
                                     meta={"window": "abdomen"}))
    return path


@pytest.fixture()
def hu_slice(tmp_path):
    rng = np.random.default_rng(0)
    hu = rng.normal(scale=70.0, size=(96, 96)) + 20.0
    path = tmp_path / "slice.png"
    data.write_hu_png(path, hu)
    return path


def test_simulate_writes_dataset(tmp_path):
    out = tmp_path / "ds"
    rc = cli.main(["simulate", "--out", str(out), "--phantoms", "2",
                   "--slices-per-phantom", "1", "--size", "64", "--views", "48",
                   "--seed", "3"])
    assert rc == 0
    manifest = data.load_manifest(out)
    assert len(manifest.slices) == 2
    ld, nd = data.load_slice_pair(manifest.slices[0], out)
    assert ld.shape == nd.shape == (64, 64)
    assert manifest.params["dose_factor"] == 0.25


def test_denoise_writes_depth_files(tmp_path, small_ckpt, hu_slice):
    out = tmp_path / "den"
    rc = cli.main(["denoise", "--ckpt", str(small_ckpt), "--input", str(hu_slice),
                   "--depth", "3", "--out", str(out)])
    assert rc == 0
    files = sorted(p.name for p in out.iterdir())
    assert files == ["depth_1.png", "depth_2.png", "depth_3.png"]


def test_denoise_depth_zero_fails(tmp_path, small_ckpt, hu_slice):
    rc = cli.main(["denoise", "--ckpt", str(small_ckpt), "--input", str(hu_slice),
                   "--depth", "0", "--out", str(tmp_path / "x")])
    assert rc != 0
    assert not (tmp_path / "x").exists()


def test_denoise_over_cap_fails(tmp_path, small_ckpt, hu_slice):
    rc = cli.main(["denoise", "--ckpt", str(small_ckpt), "--input", str(hu_slice),
                   "--depth", "9", "--out", str(tmp_path / "x")])
    assert rc != 0


def test_denoise_missing_input_fails(tmp_path, small_ckpt):
    rc = cli.main(["denoise", "--ckpt", str(small_ckpt), "--input",
                   str(tmp_path / "missing.png"), "--depth", "1",
                   "--out", str(tmp_path / "x")])
    assert rc != 0


def test_denoise_corrupt_checkpoint_fails(tmp_path, hu_slice):
    bad = tmp_path / "bad.ckpt"
    bad.write_text("{broken")
    rc = cli.main(["denoise", "--ckpt", str(bad), "--input", str(hu_slice),
                   "--depth", "1", "--out", str(tmp_path / "x")])
    assert rc != 0


def test_stats_reproduces_published_pvalues(tmp_path, capsys):
    rows = []
    for i in range(5):
        rows.append({"case_id": f"c{i}", "reader_id": "r1", "method": "DL1",
                     "noise": 3, "fidelity": 4})
        rows.append({"case_id": f"c{i}", "reader_id": "r1", "method": "IR1",
                     "noise": 3, "fidelity": 3})
    for i in range(5, 7):
        rows.append({"case_id": f"c{i}", "reader_id": "r1", "method": "DL1",
                     "noise": 3, "fidelity": 2})
        rows.append({"case_id": f"c{i}", "reader_id": "r1", "method": "IR1",
                     "noise": 3, "fidelity": 3})
    ratings = tmp_path / "ratings.jsonl"
    ratings.write_text("\n".join(json.dumps(r) for r in rows))
    rc = cli.main(["stats", "--ratings", str(ratings)])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    cell = report["comparisons"]["all"]["r1"]
    assert cell["n_gt"] == 5 and cell["n_lt"] == 2
    assert cell["p1"] == 0.2265625
    assert cell["p2"] == 0.9375


def test_stats_seven_three_pair(tmp_path, capsys):
    rows = []
    for i in range(7):
        rows.append({"case_id": f"c{i}", "reader_id": "r1", "method": "DL1",
                     "noise": 4, "fidelity": 4})
        rows.append({"case_id": f"c{i}", "reader_id": "r1", "method": "IR1",
                     "noise": 3, "fidelity": 3})
    for i in range(7, 10):
        rows.append({"case_id": f"c{i}", "reader_id": "r1", "method": "DL1",
                     "noise": 2, "fidelity": 2})
        rows.append({"case_id": f"c{i}", "reader_id": "r1", "method": "IR1",
                     "noise": 3, "fidelity": 3})
    ratings = tmp_path / "r.jsonl"
    ratings.write_text("\n".join(json.dumps(r) for r in rows))
    out = tmp_path / "report.json"
    rc = cli.main(["stats", "--ratings", str(ratings), "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    cell = report["comparisons"]["all"]["r1"]
    assert cell["p1"] == 0.171875 and cell["p2"] == 0.9453125


def test_unknown_flag_exits_nonzero(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["denoise", "--nope"])
    assert e.value.code != 0
