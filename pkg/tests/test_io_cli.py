import csv
import json

import numpy as np
import pytest

from pl6kit.cli import COMMANDS, main
from pl6kit.errors import ConvergenceError, InputError, NumericalError
from pl6kit.finestructure import LABELS
from pl6kit.inference import SYNTHETIC_STRAINS
from pl6kit.io import Report, Table, config_from_dict, emit_report, format_cell, ingest_csv, load_config
from pl6kit.synthetic import DD_ALPHA, DD_BETA, fixture_path

GOLDEN = {
    "dd-scaling/power_law.csv": "parameter,estimate,uncertainty",
    "dd-scaling/prediction.csv": "n_pulses,t2_ms,t2_err_ms",
    "dd-scaling/xy8_fit.csv": "parameter,estimate,uncertainty",
    "decay-fit/fidelity.csv": "quantity,value,uncertainty",
    "decay-fit/fit.csv": "parameter,estimate,uncertainty",
    "eseem-fit/fit.csv": "parameter,estimate,uncertainty",
    "eseem-fit/ratio_check.csv": "quantity,value",
    "flip-rate-fit/fit.csv": "parameter,estimate,uncertainty",
    "infer/chains.csv": "chain,acceptance_rate,n_draws",
    "infer/intervals.csv": "parameter,level,median,lower,upper,rhat",
    "infer/posterior.csv": "chain,draw,lambda_so,d_es,d1,d2," + ",".join(f"delta_em{i}" for i in range(1, 8)) + ",log_post",
    "infer/predictive_band.csv": "delta_perp_ghz," + ",".join(f"{lab}_{q}" for lab in LABELS for q in ("q05", "q50", "q95")),
    "lambda-sim/lambda_fits.csv": "branch,omega_ghz,omega_err,t1_ns,t1_err,t_leak_ns,t_leak_err",
    "lambda-sim/reciprocity.csv": "driven,t1_ns,other,t_leak_ns,difference_ns,sigma_ns,within_sigma",
    "levels/levels.csv": "label,energy_ghz,ms_plus1,ms_0,ms_minus1,spin_branch",
    "linewidth-fit/fit.csv": "parameter,estimate,uncertainty",
    "ple-fit/fit.csv": "parameter,estimate,uncertainty",
    "ple-fit/peaks.csv": "peak,center_ghz,center_err_ghz,fwhm_mhz,fwhm_err_mhz,amplitude,amplitude_err",
    "rabi-fit/rabi_fits.csv": "power_uw,omega_ghz,omega_err_ghz,tau_ns,tau_err_ns,contrast",
    "rabi-fit/scaling.csv": "quantity,value,uncertainty",
    "rabi-sim/rabi_fits.csv": "power_uw,omega_true_ghz,omega_fit_ghz,omega_err_ghz,tau_ns,tau_err_ns",
    "rabi-sim/scaling.csv": "quantity,value,uncertainty",
    "rabi-sim/traces.csv": "t_ns,p6uw,p12uw,p23.8uw,p40uw,p60uw",
    "sweep/sweep.csv": "delta_perp_ghz,A1,A2,Ex,Ey,E1,E2",
    "visibility-fit/phase.csv": "quantity,value",
    "visibility-fit/visibility.csv": "branch,mean,mean_err,visibility,visibility_err,theta0_deg,theta0_err_deg,flags",
}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("report")
    cfg = out / "cfg.json"
    cfg.write_text(json.dumps({"seed": 7, "plots": False}))
    assert main(["report-all", "-c", str(cfg), "-o", str(out / "run")]) == 0
    return out / "run"


# --- ingestion -----------------------------------------------------------------

def test_three_row_spectrum_sorted(tmp_path):
    s = ingest_csv(write(tmp_path / "s.csv", "x,y,sigma\n3,30,1\n1,10,1\n2,20,1\n"), "spectrum")
    assert s.x.tolist() == [1, 2, 3] and s.y.tolist() == [10, 20, 30]


def test_non_numeric_names_row(tmp_path):
    p = write(tmp_path / "s.csv", "# comment\nx,y,sigma\n1,1,1\n2,oops,1\n")
    with pytest.raises(InputError, match=r"row 4, column 'y'"):
        ingest_csv(p, "spectrum")


@pytest.mark.parametrize("text, msg", [
    ("x,sigma\n1,1\n", "missing column"),
    ("", "empty file"),
    ("# only a comment\n", "empty file"),
    ("x,y,sigma\n", "no data rows"),
    ("x,y,sigma\n1,2\n", "expected 3 cells"),
    ("x,y,sigma\n1,inf,1\n", "non-finite"),
])
def test_rejected_files(tmp_path, text, msg):
    with pytest.raises(InputError, match=msg):
        ingest_csv(write(tmp_path / "s.csv", text), "spectrum")


def test_sigma_column_optional(tmp_path):
    s = ingest_csv(write(tmp_path / "s.csv", "x,y\n1,2\n2,3\n"), "spectrum")
    assert not s.sigma_known


def test_other_kinds(tmp_path):
    with pytest.raises(InputError, match="unknown CSV kind"):
        ingest_csv(write(tmp_path / "s.csv", "x,y\n1,2\n"), "bogus")
    with pytest.raises(InputError, match="counts must be"):
        ingest_csv(write(tmp_path / "d.csv", "t_ns,counts\n0,5\n1,-1\n"), "decay")
    t2 = ingest_csv(str(fixture_path("t2_scaling")), "t2_scaling")
    assert t2.x.tolist() == [2, 4, 8, 16]


def test_bundled_line_list():
    data = ingest_csv(str(fixture_path("line_list")), "line_list")
    assert len(data) == 7
    assert min(SYNTHETIC_STRAINS) == 0.688 and max(SYNTHETIC_STRAINS) == 12.416


def test_line_list_errors(tmp_path):
    head = "emitter,label,offset_ghz,sigma_ghz\n"
    with pytest.raises(InputError, match="empty"):
        ingest_csv(write(tmp_path / "l.csv", head + ",A1,1,0.1\n"), "line_list")
    with pytest.raises(InputError, match="l.csv"):
        ingest_csv(write(tmp_path / "l.csv", head + "a,A1,1,0.1\na,A2,2,0.1\n"), "line_list")


def test_bundled_fixtures_document_generator():
    for name in ("ple_spectrum", "line_list", "t2_scaling"):
        head = fixture_path(name).read_text().splitlines()[:2]
        assert head[0].startswith("# synthetic fixture") and "seed=" in head[1]


# --- configuration -------------------------------------------------------------

def test_config_validation(tmp_path):
    with pytest.raises(InputError, match="unknown config key"):
        config_from_dict({"seed": 1, "sed": 2})
    with pytest.raises(InputError, match="unknown parameter"):
        config_from_dict({"params": {"lam": 1.0}})
    for bad in (-1, 2**64, True, 1.5):
        with pytest.raises(InputError, match="seed"):
            config_from_dict({"seed": bad})
    with pytest.raises(InputError, match="file not found"):
        config_from_dict({"inputs": {"spectrum": "nope.csv"}}, str(tmp_path))
    with pytest.raises(InputError, match="invalid JSON"):
        load_config(write(tmp_path / "c.json", "{seed: 1"))
    cfg = load_config(write(tmp_path / "c.json", json.dumps({"seed": 2**64 - 1, "params": {"lambda_so": 5.0}})))
    assert cfg.seed == 2**64 - 1 and cfg.params.lambda_so == 5.0
    with pytest.raises(InputError, match="seed is required"):
        cfg.__class__().require_seed("infer")


# --- report emission -----------------------------------------------------------

def test_format_cell():
    assert format_cell(1.0 / 3) == "0.333333333"
    assert format_cell(np.int64(4)) == "4" and format_cell(True) == "true" and format_cell(None) == ""
    with pytest.raises(NumericalError):
        format_cell(float("nan"))


def test_empty_report_is_manifest_only(tmp_path):
    emit_report(Report("nothing"), tmp_path / "o")
    assert [p.name for p in (tmp_path / "o").iterdir()] == ["manifest.json"]


def test_nan_aborts_before_writing(tmp_path):
    rep = Report("x", [Table("good", ("a",), [(1.0,)]), Table("bad", ("a",), [(float("nan"),)])])
    with pytest.raises(NumericalError, match="bad"):
        emit_report(rep, tmp_path / "o")
    assert not any((tmp_path / "o").iterdir())


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(InputError, match="cannot create"):
        emit_report(Report("x", [Table("t", ("a",), [(1,)])]), blocker / "sub")


def test_table_shape_checked():
    with pytest.raises(InputError):
        Table("t", ("a", "b"), [(1,)])


def test_lf_endings_and_manifest(tmp_path):
    emit_report(Report("x", [Table("t", ("a", "b"), [(1.5, "u"), (2, "v")])], seed=3), tmp_path)
    raw = (tmp_path / "t.csv").read_bytes()
    assert raw == b"a,b\n1.5,u\n2,v\n"
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seed"] == 3 and set(man["outputs"]) == {"t.csv"}
    assert {"pl6kit", "numpy", "scipy"} <= set(man["versions"])


# --- command line --------------------------------------------------------------

def test_golden_schemas(full_run):
    produced = {str(p.relative_to(full_run)) for p in full_run.glob("*/*.csv")}
    assert produced == set(GOLDEN)
    for rel, header in GOLDEN.items():
        assert (full_run / rel).read_text().splitlines()[0] == header, rel
    man = json.loads((full_run / "manifest.json").read_text())
    assert man["notes"]["commands"] == sorted(COMMANDS)


def test_levels_table(full_run):
    rows = read_csv(full_run / "levels" / "levels.csv")
    assert [r["label"] for r in rows] == list(LABELS)
    e = {r["label"]: float(r["energy_ghz"]) for r in rows}
    assert abs(e["Ex"] - e["Ey"]) < 1e-8 and abs(e["E1"] - e["E2"]) < 1e-8
    assert abs(sum(e.values())) < 1e-7


def test_sweep_table(full_run):
    rows = read_csv(full_run / "sweep" / "sweep.csv")
    assert len(rows) == 125 and float(rows[-1]["delta_perp_ghz"]) == 12.416


def test_dd_scaling_round_trip(full_run):
    fit = {r["parameter"]: (float(r["estimate"]), float(r["uncertainty"])) for r in read_csv(full_run / "dd-scaling" / "power_law.csv")}
    for name, truth in (("alpha", DD_ALPHA), ("beta", DD_BETA)):
        est, err = fit[name]
        assert abs(est - truth) <= max(err, 1e-9)


def test_infer_seed_changes_hashes_not_schema(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"options": {"n_steps": 1500, "grid_points": 20, "n_draws": 50}, "plots": False}))
    outs = []
    for seed in (1, 1, 2):
        out = tmp_path / f"s{seed}_{len(outs)}"
        assert main(["infer", "-c", str(cfg), "--seed", str(seed), "-o", str(out)]) == 0
        outs.append(json.loads((out / "manifest.json").read_text()))
    assert outs[0]["outputs"] == outs[1]["outputs"]
    assert outs[0]["outputs"]["posterior.csv"] != outs[2]["outputs"]["posterior.csv"]
    assert set(outs[0]["outputs"]) == set(outs[2]["outputs"])
    heads = [(tmp_path / d / "intervals.csv").read_text().splitlines()[0] for d in ("s1_0", "s2_2")]
    assert heads[0] == heads[1]


def test_exit_code_success(tmp_path):
    assert main(["levels", "-o", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "levels.svg").exists()


def test_exit_code_input_errors(tmp_path, capsys):
    bad = write(tmp_path / "bad.csv", "x,y,sigma\n1,2,0.1\n2,abc,0.1\n")
    assert main(["eseem-fit", "-i", f"spectrum={bad}", "-o", str(tmp_path / "a")]) == 2
    assert "row 3" in capsys.readouterr().err
    cfg = write(tmp_path / "c.json", json.dumps({"seed": 1, "colour": "red"}))
    assert main(["levels", "-c", cfg, "-o", str(tmp_path / "b")]) == 2
    assert main(["infer", "-o", str(tmp_path / "c")]) == 2
    assert main(["report-all", "-o", str(tmp_path / "d")]) == 2
    assert main(["levels", "-i", "nonsense", "-o", str(tmp_path / "e")]) == 2
    opts = write(tmp_path / "o.json", json.dumps({"options": {"n_bogus": 1}}))
    assert main(["sweep", "-c", opts, "-o", str(tmp_path / "f")]) == 2


def test_exit_code_numerical(tmp_path, capsys):
    rng = np.random.default_rng(0)
    rows = "".join(f"{x},{rng.normal()},1\n" for x in np.linspace(0, 10, 50))
    noise = write(tmp_path / "n.csv", "x,y,sigma\n" + rows)
    assert main(["linewidth-fit", "-i", f"spectrum={noise}", "-o", str(tmp_path / "a")]) == 3
    assert "linewidth-fit" in capsys.readouterr().err


def test_exit_code_non_convergence(tmp_path, capsys):
    rows = "".join(f"e{i},,{v},0.0001\n" for i in range(2) for v in (-400, -1, 0, 3, 500, 900))
    lines = write(tmp_path / "l.csv", "emitter,label,offset_ghz,sigma_ghz\n" + rows)
    cfg = write(tmp_path / "c.json", json.dumps({"seed": 1, "options": {"n_steps": 1500}}))
    assert main(["infer", "-c", cfg, "-i", f"line_list={lines}", "-o", str(tmp_path / "a"), "--no-plots"]) == 4
    assert "rejections" in capsys.readouterr().err
    assert ConvergenceError("x").exit_code == 4
