import json
from pathlib import Path

import pytest

from cirdiff.cli import main

DATA = Path(__file__).resolve().parents[1] / "data"
CURVE = str(DATA / "curve_2019-12-30.csv")
SURFACE = str(DATA / "swaptions_payer_2019-12-30.csv")
STRIKES = str(DATA / "bermudan_strikes_2019-12-30.csv")
REF_CMS = str(DATA / "reference_cms_2019-12-30.csv")
REF_BERM = str(DATA / "reference_bermudan_payer_2019-12-30.csv")

FAST_CAL = ["--tenor", "5", "--maturities", "5,7", "--max-evals", "150"]


def run_calibrate(outdir, extra=()):
    return main(
        ["calibrate", "--curve", CURVE, "--surface", SURFACE, *FAST_CAL,
         "--out", str(outdir), *extra]
    )


class TestCalibrateCommand:
    def test_writes_outputs(self, tmp_path):
        code = run_calibrate(tmp_path)
        assert code in (0, 3)
        payload = json.loads((tmp_path / "calibration.json").read_text())
        assert len(payload["pi"]) == 8
        assert (tmp_path / "calibration_errors.csv").exists()

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_calibrate(a) == run_calibrate(b)
        for name in ("calibration.json", "calibration_errors.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_nonconvergence_exit_code(self, tmp_path):
        code = run_calibrate(tmp_path, extra=["--max-evals", "40"])
        assert code == 3
        assert (tmp_path / "calibration.json").exists()  # result still written

    def test_empty_target_is_input_error(self, tmp_path):
        code = main(
            ["calibrate", "--curve", CURVE, "--surface", SURFACE,
             "--tenor", "99", "--out", str(tmp_path)]
        )
        assert code == 2

    def test_missing_surface_is_input_error(self, tmp_path):
        code = main(["calibrate", "--curve", CURVE, "--surface", "/nope.csv",
                     "--tenor", "5", "--out", str(tmp_path)])
        assert code == 2

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "curve": CURVE, "surface": SURFACE, "tenor": 5.0,
            "maturities": [5, 7], "max-evals": 150, "out": str(tmp_path / "x"),
        }))
        code = main(["calibrate", "--config", str(cfg), "--out", str(tmp_path / "y")])
        assert code in (0, 3)
        assert (tmp_path / "y" / "calibration.json").exists()  # flag wins
        assert not (tmp_path / "x").exists()


class TestPriceCommand:
    def test_params_file_vs_inline_equivalence(self, tmp_path):
        cal_dir = tmp_path / "cal"
        run_calibrate(cal_dir)
        out_a = tmp_path / "a"
        code = main(
            ["price", "--curve", CURVE, "--surface", SURFACE, *FAST_CAL,
             "--params", str(cal_dir / "calibration.json"), "--out", str(out_a)]
        )
        assert code == 0
        out_b = tmp_path / "b"
        code = main(
            ["price", "--curve", CURVE, "--surface", SURFACE, *FAST_CAL,
             "--out", str(out_b)]
        )
        assert code in (0, 3)
        assert (out_a / "prices.csv").read_bytes() == (out_b / "prices.csv").read_bytes()

    def test_single_quote_order2(self, tmp_path, model_t5):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"pi": list(model_t5.params.pi)}))
        code = main(
            ["price", "--curve", CURVE, "--surface", SURFACE, "--params", str(params),
             "--tenor", "5", "--maturities", "5", "--orders", "2",
             "--out", str(tmp_path)]
        )
        assert code == 0
        header, row = (tmp_path / "prices.csv").read_text().splitlines()
        assert header.split(",")[4] == "gc2"
        assert float(row.split(",")[4]) > 0.0

    def test_mc_summary_written(self, tmp_path, model_t5):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"pi": list(model_t5.params.pi)}))
        code = main(
            ["price", "--curve", CURVE, "--surface", SURFACE, "--params", str(params),
             "--tenor", "5", "--maturities", "5,7", "--mc", "--paths", "1000",
             "--mesh", "64", "--out", str(tmp_path)]
        )
        assert code == 0
        lines = (tmp_path / "price_summary.csv").read_text().splitlines()
        assert lines[0] == "comparison,average_abs_error"
        assert [ln.split(",")[0] for ln in lines[1:]] == [
            "mc_minus_gc3", "mc_minus_gc5", "mc_minus_gc7", "mc_minus_market"]

    def test_invalid_params_rejected(self, tmp_path):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"pi": [0.1, 0.2, 0.5, 0.1, 0.1, 1.0, 0.01, 0.01]}))
        code = main(
            ["price", "--curve", CURVE, "--surface", SURFACE, "--params", str(params),
             "--tenor", "5", "--out", str(tmp_path)]
        )
        assert code == 2


class TestCmsCommand:
    def test_table_with_reference(self, tmp_path, model_t5):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"pi": list(model_t5.params.pi)}))
        code = main(
            ["cms", "--curve", CURVE, "--params", str(params),
             "--specs", "0x5x5,0x5x10", "--reference", REF_CMS,
             "--paths", "500", "--mesh", "64", "--out", str(tmp_path)]
        )
        assert code == 0
        lines = (tmp_path / "cms.csv").read_text().splitlines()
        assert lines[0].startswith("effective_years,tenor_years,index_years,model_rate")
        assert len(lines) == 3

    def test_zero_tenor_rejected(self, tmp_path, model_t5):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"pi": list(model_t5.params.pi)}))
        code = main(
            ["cms", "--curve", CURVE, "--params", str(params), "--specs", "0x0x5",
             "--paths", "100", "--mesh", "64", "--out", str(tmp_path)]
        )
        assert code == 2

    def test_byte_identical_reruns(self, tmp_path, model_t5):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"pi": list(model_t5.params.pi)}))
        args = ["cms", "--curve", CURVE, "--params", str(params), "--specs", "0x5x5",
                "--paths", "400", "--mesh", "64", "--seed", "11"]
        main([*args, "--out", str(tmp_path / "a")])
        main([*args, "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "cms.csv").read_bytes() == (
            tmp_path / "b" / "cms.csv").read_bytes()


class TestBermudanCommand:
    def test_grid_rows(self, tmp_path, model_t5):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"pi": list(model_t5.params.pi)}))
        code = main(
            ["bermudan", "--curve", CURVE, "--params", str(params),
             "--strikes", STRIKES, "--reference", REF_BERM,
             "--paths", "400", "--mesh", "32", "--out", str(tmp_path)]
        )
        assert code == 0
        lines = (tmp_path / "bermudan.csv").read_text().splitlines()
        assert len(lines) == 21  # header + 20 grid rows
        assert lines[0].split(",")[:4] == ["maturity_years", "tenor_years", "strike",
                                           "model_price"]


class TestSimulateCommand:
    def test_summary_and_dump(self, tmp_path, model_t5):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"pi": list(model_t5.params.pi)}))
        code = main(
            ["simulate", "--curve", CURVE, "--params", str(params), "--horizon", "3",
             "--paths", "200", "--mesh", "64", "--dump", "--out", str(tmp_path)]
        )
        assert code == 0
        assert (tmp_path / "simulation_zcb.csv").exists()
        for name in ("x", "y", "r", "discount"):
            assert (tmp_path / f"paths_{name}.csv").exists()
