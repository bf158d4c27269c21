import csv
import json
import re
from pathlib import Path

import numpy as np
import pytest

from realogic import cli
from realogic import tensor as T
from realogic.cli import ExperimentConfig, load_config, load_csv, main
from realogic.errors import EmptyAfterFilter, MissingColumn, NonNumericCell
from realogic.learn import ParamStore

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
BLOBS_CSV = CONFIGS / "data" / "blobs.csv"


def blobs_config(**overrides):
    cfg = json.loads((CONFIGS / "blobs.json").read_text())
    for b in cfg["datasets"].values():
        b["path"] = str(BLOBS_CSV)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    return cfg


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def separated_csv(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "sep.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "label"])
        for label, lo in ((1, 1.0), (0, -2.0)):
            for _ in range(10):
                w.writerow([rng.uniform(lo, lo + 1), rng.normal(), label])
    return path


def linear_config(tmp_path, formulas=None, semantics=None):
    """One-layer Dog predicate over data split cleanly at x1 = 0."""
    data = separated_csv(tmp_path)
    cfg = blobs_config(
        predicates={"Dog": {"input_dim": 2, "hidden": []}},
        training={"epochs": 3},
    )
    for b in cfg["datasets"].values():
        b["path"] = str(data)
    if formulas is not None:
        cfg["formulas"] = formulas
    if semantics is not None:
        cfg["semantics"] = semantics
    return write_config(tmp_path, cfg)


def write_linear_params(tmp_path, weight, bias):
    params = ParamStore()
    params.register("Dog.W0", np.array([weight], dtype=float))
    params.register("Dog.b0", np.array(bias, dtype=float))
    return params.save(tmp_path / "handmade")


def read_metrics(path):
    with path.open() as fh:
        return list(csv.DictReader(fh))


class TestTrain:
    def test_blobs_end_to_end(self, tmp_path, capsys):
        config = write_config(tmp_path, blobs_config())
        assert main(["train", "--config", str(config), "--out", str(tmp_path / "run")]) == 0
        rows = read_metrics(tmp_path / "run" / "metrics.csv")
        assert len(rows) == 200
        assert list(rows[0]) == ["epoch", "mean_loss", "sat_agg", "phi1", "phi2"]
        assert float(rows[-1]["sat_agg"]) >= 0.9
        assert (tmp_path / "run" / "params.json").exists() and (tmp_path / "run" / "params.bin").exists()
        out = capsys.readouterr().out
        assert "SatAgg" in out and "phi1" in out

    def test_default_out_dir(self, tmp_path):
        config = linear_config(tmp_path)
        assert main(["train", "--config", str(config)]) == 0
        assert (tmp_path / "out" / "metrics.csv").exists()

    def test_open_formula(self, tmp_path, capsys):
        cfg = blobs_config(
            signature={"variables": ["dog", "cat", "x"]},
            datasets={"x": {"path": str(BLOBS_CSV), "features": ["x1", "x2"]}},
            formulas=[{"name": "phi1", "formula": "Dog(x)"}],
        )
        code = main(["train", "--config", str(write_config(tmp_path, cfg))])
        assert code != 0
        assert "formula 'phi1' is not closed: free variable x" in capsys.readouterr().err

    def test_missing_csv(self, tmp_path, capsys):
        cfg = blobs_config()
        missing = tmp_path / "nowhere" / "data.csv"
        cfg["datasets"]["dog"]["path"] = str(missing)
        code = main(["train", "--config", str(write_config(tmp_path, cfg))])
        assert code != 0
        assert str(missing) in capsys.readouterr().err

    def test_reproducible_metrics_bytes(self, tmp_path):
        config = linear_config(tmp_path)
        for run in ("a", "b"):
            assert main(["train", "--config", str(config), "--out", str(tmp_path / run), "--seed", "7"]) == 0
        assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
        assert (tmp_path / "a" / "params.bin").read_bytes() == (tmp_path / "b" / "params.bin").read_bytes()

    def test_seed_changes_run(self, tmp_path):
        config = linear_config(tmp_path)
        for run, seed in (("a", "1"), ("b", "2")):
            main(["train", "--config", str(config), "--out", str(tmp_path / run), "--seed", seed])
        assert (tmp_path / "a" / "params.bin").read_bytes() != (tmp_path / "b" / "params.bin").read_bytes()


class TestEval:
    def test_ideal_predicate(self, tmp_path, capsys):
        config = linear_config(tmp_path)
        manifest = write_linear_params(tmp_path, [100.0, 0.0], [0.0])
        assert main(["eval", "--config", str(config), "--params", str(manifest)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert [line.split()[-1] for line in lines] == ["1.000000"] * 3

    @pytest.mark.parametrize("p", [1, 2, 7])
    def test_constant_half(self, tmp_path, capsys, p):
        config = linear_config(
            tmp_path,
            formulas=[{"name": "all", "formula": "forall dog: Dog(dog)"}],
            semantics={"p_forall": p},
        )
        manifest = write_linear_params(tmp_path, [0.0, 0.0], [0.0])
        assert main(["eval", "--config", str(config), "--params", str(manifest)]) == 0
        first = capsys.readouterr().out.splitlines()[0]
        assert first.split() == ["all", "0.500000"]

    def test_matches_training_within_gap(self, tmp_path, capsys):
        config = write_config(tmp_path, blobs_config())
        assert main(["train", "--config", str(config), "--out", str(tmp_path / "run")]) == 0
        final = float(read_metrics(tmp_path / "run" / "metrics.csv")[-1]["sat_agg"])
        capsys.readouterr()
        assert main(["eval", "--config", str(config), "--params", str(tmp_path / "run" / "params.json")]) == 0
        agg = float(capsys.readouterr().out.strip().splitlines()[-1].split()[-1])
        assert abs(agg - final) <= 0.05

    def test_missing_params_file(self, tmp_path, capsys):
        config = linear_config(tmp_path)
        assert main(["eval", "--config", str(config), "--params", str(tmp_path / "none.json")]) != 0
        assert "none.json" in capsys.readouterr().err


class TestGradcheck:
    def test_blobs(self, capsys):
        assert main(["gradcheck", "--config", str(CONFIGS / "blobs.json")]) == 0
        assert "max relative error" in capsys.readouterr().out

    def test_linear_aggregators(self, tmp_path):
        config = linear_config(tmp_path, semantics={"p_exists": 1, "p_forall": 1, "p_satagg": 1})
        assert main(["gradcheck", "--config", str(config)]) == 0

    def test_corrupted_backward_is_caught(self, tmp_path, monkeypatch, capsys):
        def bad_sigmoid(a):
            a = T.as_tensor(a)
            s = 1.0 / (1.0 + np.exp(-a.value))
            # derivative of the wrong function: s instead of s(1-s)
            return T.make_node(s, (a,), lambda g: (g * s,), "sigmoid")

        monkeypatch.setattr(T, "sigmoid", bad_sigmoid)
        config = linear_config(tmp_path)
        assert main(["gradcheck", "--config", str(config)]) != 0
        assert "FAIL" in capsys.readouterr().out


class TestErrors:
    def test_single_line_error_code(self, tmp_path, capsys):
        cfg = blobs_config(formulas=[{"name": "phi1", "formula": "forall dog: Dog(dog"}])
        assert main(["train", "--config", str(write_config(tmp_path, cfg))]) == 2
        err = capsys.readouterr().err
        assert len(err.strip().splitlines()) == 1
        assert err.startswith("ERROR ")
        assert re.fullmatch(r"[A-Z][A-Z_]*", err.split()[1])
        assert "phi1" in err and "line 1, column" in err

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda c: c.pop("formulas"),
            lambda c: c["training"].update(optimizer="lbfgs"),
            lambda c: c["semantics"].update(family="frank"),
            lambda c: c["predicates"].pop("Dog"),
            lambda c: c["datasets"].pop("cat"),
            lambda c: c["datasets"]["dog"].update(features=["x1", "nope"]),
        ],
    )
    def test_bad_configs_exit_nonzero(self, tmp_path, capsys, mutate):
        cfg = blobs_config()
        mutate(cfg)
        assert main(["gradcheck", "--config", str(write_config(tmp_path, cfg))]) != 0
        err = capsys.readouterr().err
        assert err.startswith("ERROR ") and len(err.strip().splitlines()) == 1

    def test_missing_config(self, tmp_path, capsys):
        assert main(["eval", "--config", str(tmp_path / "absent.json")]) != 0
        assert "absent.json" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{\n  \"signature\": ,\n}")
        assert main(["eval", "--config", str(path)]) != 0
        assert "line 2" in capsys.readouterr().err


class TestLoadCsv:
    @pytest.fixture
    def table(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b,label\n1,2,1\n3,4,0\n5,6,1\n7,8,0\n")
        return path

    def test_all_rows(self, table):
        out = load_csv(table, ["a", "b"])
        assert out.shape == (4, 2)
        np.testing.assert_array_equal(out.value, [[1, 2], [3, 4], [5, 6], [7, 8]])

    def test_filter(self, table):
        out = load_csv(table, ["a", "b"], {"column": "label", "value": "1"})
        np.testing.assert_array_equal(out.value, [[1, 2], [5, 6]])

    def test_numeric_filter_value(self, table):
        out = load_csv(table, ["a"], {"column": "label", "value": 1.0})
        assert out.shape == (2, 1)

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n3,abc\n")
        with pytest.raises(NonNumericCell) as info:
            load_csv(path, ["a", "b"])
        assert (info.value.row, info.value.col) == (3, "b")

    def test_missing_column(self, table):
        with pytest.raises(MissingColumn):
            load_csv(table, ["a", "zzz"])

    def test_empty_after_filter(self, table):
        with pytest.raises(EmptyAfterFilter):
            load_csv(table, ["a"], {"column": "label", "value": "9"})


def test_config_round_trip():
    config = load_config(CONFIGS / "blobs.json")
    again = ExperimentConfig.from_dict(json.loads(json.dumps(config.to_dict())), base_dir=config.base_dir)
    assert again == config
    for field in ("signature", "datasets", "predicates", "semantics", "training", "formulas"):
        assert getattr(again, field) == getattr(config, field)


def test_module_entry_point_matches_main():
    assert cli.main is main
