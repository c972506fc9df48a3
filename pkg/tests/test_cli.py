"""Configuration loading and the command-line interface."""

import json

import numpy as np
import pytest
import yaml

from gen_randers import cli
from gen_randers.config import ConfigError, load_config, parse_config

MINIMAL = {"dimension": 2, "seed": 42, "metric": {"catalog": "euclid_const_b"},
           "sample": {"count": 100}}


def write(tmp_path, doc, name="run.yaml"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if name.endswith(".json") else yaml.safe_dump(doc))
    return str(path)


def with_(**changes):
    doc = json.loads(json.dumps(MINIMAL))
    doc.update(changes)
    return doc


class TestConfig:
    @pytest.mark.parametrize("name", ["run.yaml", "run.json"])
    def test_minimal(self, tmp_path, name):
        cfg = load_config(write(tmp_path, MINIMAL, name))
        assert cfg.dimension == 2 and cfg.seed == 42
        assert cfg.entry.id == "euclid_const_b"
        assert cfg.sample.count == 100 and cfg.sample.seed == 42
        assert len(cfg.checks) >= 18

    def test_bad_variable_names_field(self):
        doc = with_(metric={"base": "sqrt(y1^2+y2^2)", "form": ["0.1", "x7"]})
        with pytest.raises(ConfigError) as err:
            parse_config(doc)
        assert err.value.field == "metric.form[1]"
        assert "x7" in str(err.value)

    def test_seed_required(self):
        doc = with_()
        del doc["seed"]
        with pytest.raises(ConfigError, match="seed required"):
            parse_config(doc)

    @pytest.mark.parametrize("dim", [1, 7])
    def test_dimension_range(self, dim):
        with pytest.raises(ConfigError) as err:
            parse_config(with_(dimension=dim))
        assert err.value.field == "dimension"

    def test_catalog_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            parse_config(with_(dimension=3))

    def test_unknown_check(self):
        with pytest.raises(ConfigError) as err:
            parse_config(with_(checks=["prop4_A", "bogus"]))
        assert err.value.field == "checks[1]"

    def test_yaml_parse_error_has_location(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("dimension: 2\nseed: [1,\n")
        with pytest.raises(ConfigError, match="line"):
            load_config(path)

    def test_custom_metric(self):
        cfg = parse_config(with_(metric={"base": "exp(x2)*sqrt(y1^2+y2^2)", "form": ["0", 0.1]}))
        assert cfg.entry.id == "custom"
        assert cfg.entry.form == ("0", "0.1")

    def test_hash_depends_on_content(self):
        assert parse_config(MINIMAL).config_hash == parse_config(with_()).config_hash
        assert parse_config(MINIMAL).config_hash != parse_config(with_(seed=1)).config_hash


class TestVerifyCommand:
    def test_default_suite_passes(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        code = cli.main(["verify", "--config", write(tmp_path, with_(sample={"count": 5})),
                         "--out", str(out)])
        report = json.loads(out.read_text())
        assert code == 0
        assert len(report["checks"]) >= 18
        assert report["instance"]["id"] == "euclid_const_b"
        assert "timestamp" in report["header"]

    def test_falsification_instance(self, tmp_path):
        out = tmp_path / "r.json"
        doc = with_(metric={"catalog": "euclid_curl_b"}, checks=["theorem2_N_zero"],
                    sample={"count": 5})
        code = cli.main(["verify", "--config", write(tmp_path, doc), "--out", str(out)])
        check = json.loads(out.read_text())["checks"][0]
        assert code == 1
        assert not check["pass"]
        assert len(check["witness"]["x"]) == 2

    def test_empty_check_list(self, tmp_path):
        out = tmp_path / "r.json"
        code = cli.main(["verify", "--config", write(tmp_path, with_(checks=[])), "--out", str(out)])
        assert code == 0
        assert json.loads(out.read_text())["checks"] == []

    def test_config_error_exit_code(self, tmp_path, capsys):
        doc = with_()
        del doc["seed"]
        assert cli.main(["verify", "--config", write(tmp_path, doc)]) == 2
        assert "seed required" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert cli.main(["verify", "--config", str(tmp_path / "none.yaml")]) == 2

    def test_theorems_and_tags_sections(self, tmp_path):
        out = tmp_path / "r.json"
        doc = with_(checks=[], theorems=["theorem1", "theorem4"], verify_tags=True,
                    sample={"count": 4})
        assert cli.main(["verify", "--config", write(tmp_path, doc), "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert set(report["theorems"]) == {"theorem1", "theorem4"}
        assert len(report["tags"]) == 8

    def test_deterministic_reports(self, tmp_path):
        cfg = write(tmp_path, with_(sample={"count": 6}))
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        cli.main(["verify", "--config", cfg, "--out", str(a), "--deterministic"])
        cli.main(["verify", "--config", cfg, "--out", str(b), "--deterministic"])
        assert a.read_bytes() == b.read_bytes()


class TestOtherCommands:
    def test_jet_worked_example(self, tmp_path, capsys):
        code = cli.main(["jet", "--config", write(tmp_path, MINIMAL), "--x", "0", "0",
                         "--y", "0", "1"])
        doc = json.loads(capsys.readouterr().out)
        assert code == 0
        np.testing.assert_allclose(doc["closed_form"]["g_star"], [[1.01, 0.1], [0.1, 1.0]],
                                   atol=1e-15)
        np.testing.assert_allclose(doc["star_engine"]["g"], [[1.01, 0.1], [0.1, 1.0]], atol=1e-15)
        assert {"R", "P", "Q", "G", "N"} <= set(doc["base"])

    def test_jet_zero_vector(self, tmp_path):
        assert cli.main(["jet", "--config", write(tmp_path, MINIMAL), "--x", "0", "0",
                         "--y", "0", "0"]) == 2

    def test_geodesic(self, tmp_path, capsys):
        doc = with_(metric={"catalog": "euclid_closed_b"},
                    geodesic={"x0": [0.1, 0.2], "y0": [0.6, 0.8], "t_end": 1.0})
        out = tmp_path / "geo"
        assert cli.main(["geodesic", "--config", write(tmp_path, doc), "--out-dir", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["comparison"]["max_deviation"] < 1e-6
        assert (out / "base.csv").read_text().startswith("t,x1,x2,y1,y2")
        assert (out / "star.csv").exists()

    def test_geodesic_requires_section(self, tmp_path):
        assert cli.main(["geodesic", "--config", write(tmp_path, MINIMAL),
                         "--out-dir", str(tmp_path)]) == 2

    def test_catalog(self, capsys):
        assert cli.main(["catalog", "--json"]) == 0
        entries = json.loads(capsys.readouterr().out)
        assert len(entries) >= 5
        assert {"euclid_flat", "euclid_curl_b"} <= {e["id"] for e in entries}
        assert cli.main(["catalog"]) == 0
