import json

import pytest

from crowdseg.cli import main


@pytest.fixture(scope="module")
def demo_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo")
    assert main(["demo", "--out", str(out), "--n-images", "25", "--seed", "1234"]) == 0
    return out


class TestPipeline:
    def test_ingest_summary(self, demo_dir, capsys):
        assert main(["ingest", "--campaign", str(demo_dir / "campaign.json")]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["images"] == 25
        assert doc["classes"] == ["Liver", "Aorta"]

    def test_merge_writes_audit_maps(self, demo_dir):
        out = demo_dir / "merged"
        rc = main(
            [
                "merge",
                "--campaign",
                str(demo_dir / "campaign.json"),
                "--threshold",
                "4",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        assert (out / "img000.png").exists()
        assert (out / "img000_freq_c1.png").exists()
        assert (out / "img000_freq_c2.png").exists()

    def test_eval_emits_csv_and_table(self, demo_dir, capsys):
        rc = main(
            [
                "eval",
                "--campaign",
                str(demo_dir / "campaign.json"),
                "--pred",
                str(demo_dir / "merged"),
                "--confidence",
                "0.95",
                "--out",
                str(demo_dir / "report"),
            ]
        )
        assert rc == 0
        table = capsys.readouterr().out
        assert "Liver" in table and "Aorta" in table
        csv_text = (demo_dir / "report" / "report.csv").read_text()
        assert csv_text.startswith("roi,mean_dsc,")

    def test_synth_toy(self, demo_dir):
        rc = main(
            [
                "synth",
                "--campaign",
                str(demo_dir / "campaign.json"),
                "--out",
                str(demo_dir / "synthetic"),
                "--seed",
                "5",
            ]
        )
        assert rc == 0
        assert (demo_dir / "synthetic" / "img000_synth.png").exists()
        sidecar = json.loads((demo_dir / "synthetic" / "img000_synth.json").read_text())
        assert sidecar["generator"] == "builtin_toy"

    def test_build_enhanced_deterministic(self, demo_dir):
        args = [
            "build",
            "--campaign",
            str(demo_dir / "campaign.json"),
            "--variant",
            "enhanced",
            "--synth-dir",
            str(demo_dir / "synthetic"),
            "--merged-dir",
            str(demo_dir / "merged"),
            "--seed",
            "11",
            "--min-dsc",
            "0.8",
            "--min-iou",
            "0.7",
        ]
        assert main(args + ["--out", str(demo_dir / "m1.json")]) == 0
        assert main(args + ["--out", str(demo_dir / "m2.json")]) == 0
        a = (demo_dir / "m1.json").read_bytes()
        assert a == (demo_dir / "m2.json").read_bytes()
        doc = json.loads(a)
        assert doc["summary"]["train_counts"] == {
            "real": 10,
            "synthetic": 10,
            "crowd_merged": 5,
        }
        assert doc["summary"]["n_test"] == 10

    def test_build_missing_synth_exit_1(self, demo_dir, capsys):
        rc = main(
            [
                "build",
                "--campaign",
                str(demo_dir / "campaign.json"),
                "--variant",
                "enlarged",
                "--seed",
                "11",
                "--out",
                str(demo_dir / "bad.json"),
            ]
        )
        assert rc == 1
        assert "RecipeViolation" in capsys.readouterr().err

    def test_report_formats_csv(self, demo_dir, capsys):
        rc = main(["report", "--csv", str(demo_dir / "report" / "report.csv")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "Mean DSC" in out

    def test_missing_campaign_exit_1(self, tmp_path, capsys):
        rc = main(["ingest", "--campaign", str(tmp_path / "nope.json")])
        assert rc == 1


class TestConfigFile:
    def test_config_supplies_defaults(self, demo_dir, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"campaign": str(demo_dir / "campaign.json")}))
        assert main(["--config", str(cfg), "ingest"]) == 0
        assert json.loads(capsys.readouterr().out)["images"] == 25
