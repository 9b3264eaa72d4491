import csv
import json
import shutil

import jsonschema
import numpy as np
import pytest
from conftest import FIXTURES, run_cli
from hypothesis import given, settings
from hypothesis import strategies as st

from calib_atlas.cli.config import PredictionDecl, load_config, load_schema, parse_config
from calib_atlas.cli.fixtures import build_fixtures
from calib_atlas.cli.io import ingest, write_csv, write_jsonl
from calib_atlas.cli.main import main
from calib_atlas.cli.plot import RELIABILITY_HEADER
from calib_atlas.errors import ConfigError, RowError, SchemaError
from calib_atlas.outcomes import OutcomeSpace, Pmf, dataset_from_rows, pmf_new, random_pmf
from calib_atlas.serialize import dumps, fmt_float

B = OutcomeSpace.binary()
DIST = [PredictionDecl("f", "dist")]


def write(path, text):
    path.write_text(text)
    return path


# --- ingest ------------------------------------------------------------------------

def test_ingest_three_rows(tmp_path):
    p = write(tmp_path / "d.csv", "x_id,y,p_0,p_1\na,0,0.3,0.7\nb,1,0.5,0.5\nc,1,1,0\n")
    ds = ingest(p, "csv", B, DIST)
    assert len(ds) == 3 and ds.total_weight == 3.0
    assert ds.records[0].preds["f"].weights == (0.3, 0.7)


def test_ingest_bad_row_line_number(tmp_path):
    p = write(tmp_path / "d.csv", "x_id,y,p_0,p_1\na,0,0.3,0.7\nb,1,0.5,0.6\n")
    with pytest.raises(RowError) as exc:
        ingest(p, "csv", B, DIST)
    assert exc.value.line == 3 and "line 3" in str(exc.value)


def test_ingest_renormalizes_small_drift(tmp_path):
    p = write(tmp_path / "d.csv", "x_id,y,p_0,p_1\na,0,0.3,0.7000001\n")
    warnings = []
    ds = ingest(p, "csv", B, DIST, warnings=warnings)
    assert len(warnings) == 1 and "renormalized" in warnings[0]
    assert sum(ds.records[0].preds["f"].weights) == pytest.approx(1.0, abs=1e-15)


def test_ingest_rejects_large_drift(tmp_path):
    p = write(tmp_path / "d.csv", "x_id,y,p_0,p_1\na,0,0.3,0.701\n")
    with pytest.raises(RowError):
        ingest(p, "csv", B, DIST)


def test_ingest_missing_column(tmp_path):
    p = write(tmp_path / "d.csv", "x_id,y,p_0\na,0,1\n")
    with pytest.raises(SchemaError):
        ingest(p, "csv", B, DIST)


def test_ingest_unknown_label(tmp_path):
    p = write(tmp_path / "d.csv", "x_id,y,p_0,p_1\na,2,0.5,0.5\n")
    with pytest.raises(RowError):
        ingest(p, "csv", B, DIST)


def test_ingest_drops_zero_weight(tmp_path):
    p = write(tmp_path / "d.csv", "x_id,y,weight,p_0,p_1\na,0,0,0.5,0.5\nb,1,2,0.5,0.5\n")
    ds = ingest(p, "csv", B, DIST)
    assert len(ds) == 1 and ds.records[0].x_id == "b"


def test_ingest_jsonl_errors(tmp_path):
    p = write(tmp_path / "d.jsonl", '{"x_id": "a", "y": "0", "pred": {"f": {"0": 0.5, "1": 0.5}}}\n{oops\n')
    with pytest.raises(RowError) as exc:
        ingest(p, "jsonl", B, DIST)
    assert exc.value.line == 2


def _random_dataset(seed, space):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(int(rng.integers(1, 20))):
        p = random_pmf(space, rng)
        rows.append((f"x{i}", space.labels[int(rng.integers(len(space)))],
                     {"f": p, "v": float(rng.normal())}, float(rng.uniform(0.01, 5)), {"g": int(rng.integers(2))}))
    return dataset_from_rows(space, rows)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_jsonl_round_trip_bit_exact(tmp_path_factory, seed):
    sp = OutcomeSpace(("0", "1", "2"), (0.0, 1.0, 2.0))
    ds = _random_dataset(seed, sp)
    decls = [PredictionDecl("f", "dist"), PredictionDecl("v", "real", "v")]
    path = tmp_path_factory.mktemp("rt") / "d.jsonl"
    write_jsonl(ds, path, decls)
    back = ingest(path, "jsonl", sp, decls, ["g"])
    assert back.records == ds.records


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_csv_round_trip_bit_exact(tmp_path_factory, seed):
    ds = _random_dataset(seed, B)
    decls = [PredictionDecl("f", "dist"), PredictionDecl("v", "real", "v")]
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    write_csv(ds, path, decls)
    back = ingest(path, "csv", B, decls, ["g"])
    assert back.records == ds.records


# --- serialization --------------------------------------------------------------------

@settings(max_examples=300)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_float_round_trips(x):
    s = fmt_float(x)
    assert float(s) == x and json.loads(s) == x


def test_dumps_sorted_and_stable():
    doc = {"b": 1.0, "a": [0.1, np.float64(2.0), np.bool_(True)], "p": pmf_new(B, [0.25, 0.75])}
    text = dumps(doc)
    assert text.endswith("\n") and text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [0.1, 2.0, True], "b": 1.0, "p": [0.25, 0.75]}
    assert "0.10000000000000001" in text


def test_dumps_non_finite():
    assert json.loads(dumps({"x": float("inf")})) == {"x": "inf"}


# --- config -------------------------------------------------------------------------------

def _doc(**over):
    doc = {
        "input": {"path": "missing.csv", "format": "csv"},
        "outcome_space": {"labels": ["0", "1"], "embedding": [0, 1]},
        "predictions": [{"name": "f", "kind": "dist"}, {"name": "p", "kind": "real"}],
        "losses": [{"name": "sq", "type": "squared"}],
        "metrics": [{"name": "d", "type": "decision", "prediction": "f", "losses": ["sq"]}],
    }
    doc.update(over)
    return doc


def test_config_ok():
    cfg = parse_config(_doc())
    assert cfg.space == B and set(cfg.losses) == {"sq"} and len(cfg.sha256) == 64


def test_undeclared_loss_before_ingestion(tmp_path):
    doc = _doc(metrics=[{"name": "d", "type": "decision", "prediction": "f", "losses": ["nope"]}])
    with pytest.raises(ConfigError, match="undeclared loss"):
        parse_config(doc)
    # the CLI stops with exit 2 even though the input file does not exist
    cfg = write(tmp_path / "c.json", json.dumps(doc))
    assert main(["audit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("metrics,msg", [
    ([{"name": "v", "type": "vanilla", "prediction": "f"}], "must be real"),
    ([{"name": "v", "type": "vanilla", "prediction": "q"}], "undeclared prediction"),
    ([{"name": "g", "type": "gamma", "prediction": "p", "property": "mean"}], "undeclared property"),
    ([{"name": "v", "type": "vanilla", "prediction": "p", "tol": "loose"}], "unknown tolerance"),
    ([{"name": "v", "type": "vanilla", "prediction": "p", "groups": ["g"]}], "undeclared group"),
    ([{"name": "c", "type": "cost_gap", "prediction": "f", "losses": ["sq"]}], "exactly two"),
    ([{"name": "v", "type": "vanilla", "prediction": "p"}] * 2, "duplicate metric"),
    ([{"name": "v", "type": "ece", "prediction": "p"}], "config"),
])
def test_config_errors(metrics, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(_doc(metrics=metrics))


def test_config_named_tolerance():
    cfg = parse_config(_doc(tolerances={"loose": 0.1},
                            metrics=[{"name": "v", "type": "vanilla", "prediction": "p", "tol": "loose"}]))
    assert cfg.tol_for(cfg.metrics[0]) == 0.1


def test_config_from_identification_loss():
    loss = {"name": "half_sq", "type": "from_identification", "identification": "mean",
            "gamma0": 0.0, "kappa": {"0": 0.0, "1": 0.5}, "grid": {"linspace": [0, 1, 11]}}
    cfg = parse_config(_doc(losses=[loss], metrics=[
        {"name": "s", "type": "swap_regret", "prediction": "p", "loss": "half_sq"}]))
    fn, grid = cfg.losses["half_sq"]
    assert fn("1", 0.25) == pytest.approx(0.5 * 0.75**2) and len(grid) == 11


def test_config_bad_loss_param():
    with pytest.raises(ConfigError):
        parse_config(_doc(losses=[{"name": "sq", "type": "pinball", "tau": 2.0}]))


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.json")
    with pytest.raises(ConfigError):
        load_config(write(tmp_path / "bad.json", "{"))


# --- audit --------------------------------------------------------------------------------

def test_oracle_fixture_passes(tmp_path, capsys):
    assert main(["audit", "--config", str(FIXTURES / "oracle_three.config.json"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(rep, load_schema("report"))
    assert rep["passed"] and not rep["failed"]
    assert set(rep["metrics"]["distribution_full"]["groups"]) == {"half=1", "half=0"}
    assert "PASS distribution_mode" in capsys.readouterr().out


def test_screen_fixture_fails_vanilla(tmp_path):
    assert main(["audit", "--config", str(FIXTURES / "half_predictor_screen.config.json"),
                 "--out", str(tmp_path)]) == 1
    m = json.loads((tmp_path / "report.json").read_text())["metrics"]
    assert m["decision_squared"]["verdict"] and not m["vanilla"]["verdict"]
    assert m["vanilla"]["value"] == pytest.approx(0.3, abs=1e-12)


def test_audit_deterministic(tmp_path):
    cfg = FIXTURES / "mean_variance.config.json"
    for d in ("a", "b"):
        assert main(["audit", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_audit_row_error_exit_2(tmp_path):
    shutil.copy(FIXTURES / "half_predictor.config.json", tmp_path / "c.json")
    write(tmp_path / "half_predictor.csv", "x_id,y,weight,pred,p_0,p_1\nx,0,1,0.5,0.5,0.6\n")
    assert main(["audit", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 2


def test_audit_metric_error_recorded(tmp_path):
    # the level 0.4 is never predicted: the metric errors, the report says so
    write(tmp_path / "d.csv", "x_id,y,p\na,1,0.5\nb,0,0.5\n")
    doc = {"input": {"path": "d.csv"}, "outcome_space": {"labels": ["0", "1"], "embedding": [0, 1]},
           "predictions": [{"name": "p", "kind": "real"}],
           "metrics": [{"name": "v", "type": "vanilla", "prediction": "p", "level": 0.4},
                       {"name": "w", "type": "vanilla", "prediction": "p"}]}
    cfg = write(tmp_path / "c.json", json.dumps(doc))
    assert main(["audit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["failed"] and "error" in rep["metrics"]["v"] and rep["metrics"]["w"]["verdict"]


def test_audit_log_level_env(tmp_path):
    proc = run_cli("audit", "--config", FIXTURES / "oracle_three.config.json", "--out", tmp_path,
                   env_extra={"CALIB_ATLAS_LOG": "DEBUG"})
    assert proc.returncode == 0


# --- plot ------------------------------------------------------------------------------

def _audit_report(tmp_path, rows, space, metric):
    header = "x_id,y,p" + ("".join(f",p_{lab}" for lab in space["labels"]) if "dist" in metric.get("_k", "") else "")
    write(tmp_path / "d.csv", header + "\n" + "\n".join(rows) + "\n")
    preds = [{"name": "p", "kind": "real"}] if "dist" not in metric.get("_k", "") else \
        [{"name": "p", "kind": "real"}, {"name": "f", "kind": "dist"}]
    metric = {k: v for k, v in metric.items() if k != "_k"}
    doc = {"input": {"path": "d.csv"}, "outcome_space": space, "predictions": preds,
           "properties": [{"name": "mode", "type": "mode"}], "metrics": [metric]}
    cfg = write(tmp_path / "c.json", json.dumps(doc))
    main(["audit", "--config", str(cfg), "--out", str(tmp_path / "o")])
    return tmp_path / "o" / "report.json"


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_plot_vanilla_three_levels(tmp_path):
    rep = _audit_report(tmp_path, ["a,1,0.2", "b,0,0.5", "c,1,0.8", "d,1,0.8"],
                        {"labels": ["0", "1"], "embedding": [0, 1]},
                        {"name": "van", "type": "vanilla", "prediction": "p"})
    assert main(["plot", "--report", str(rep), "--out", str(tmp_path / "plots")]) == 0
    rows = _rows(tmp_path / "plots" / "van.reliability.csv")
    assert rows[0] == RELIABILITY_HEADER and len(rows) == 4
    assert [float(r[0]) for r in rows[1:]] == [0.2, 0.5, 0.8]
    assert float(rows[1][4]) == pytest.approx(0.8)


def test_plot_simplex_for_three_outcomes(tmp_path):
    space = {"labels": ["0", "1", "2"], "embedding": [0, 1, 2]}
    rep = _audit_report(tmp_path, ["a,0,0.5,0.6,0.3,0.1", "b,1,0.5,0.2,0.5,0.3", "c,1,0.5,0.1,0.6,0.3"],
                        space, {"_k": "dist", "name": "dm", "type": "distribution", "prediction": "f",
                                "property": "mode"})
    main(["plot", "--report", str(rep), "--out", str(tmp_path / "plots")])
    rows = _rows(tmp_path / "plots" / "simplex.csv")
    assert rows[0] == ["metric", "level", "pred_0", "pred_1", "pred_2", "obs_0", "obs_1", "obs_2"]
    assert [r[1] for r in rows[1:]] == ["0", "1"]
    assert [float(v) for v in rows[2][2:5]] == pytest.approx([0.15, 0.55, 0.3])


def test_plot_empty_map_header_only(tmp_path):
    rep = _audit_report(tmp_path, ["a,1,0.2", "b,0,0.5"], {"labels": ["0", "1"], "embedding": [0, 1]},
                        {"name": "van", "type": "vanilla", "prediction": "p", "min_weight": 0.9})
    main(["plot", "--report", str(rep), "--out", str(tmp_path / "plots")])
    assert _rows(tmp_path / "plots" / "van.reliability.csv") == [RELIABILITY_HEADER]
    assert json.loads(rep.read_text())["skipped_levels"]["van"] == [0.2, 0.5]


def test_plot_unreadable_report(tmp_path):
    assert main(["plot", "--report", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2


# --- verify / schema / fixtures -------------------------------------------------------------

def test_verify_counterexamples(tmp_path, capsys):
    assert main(["verify", "counterexamples", "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    jsonschema.validate(manifest, load_schema("manifest"))
    names = {r["scenario"] for r in manifest["rows"]}
    for stem in ("half_predictor", "mean_variance", "cost_parity"):
        assert any(n.startswith(stem) for n in names)
    assert "PASS counterexample" in capsys.readouterr().out


def test_verify_tampered_edges_fail(tmp_path, capsys):
    code = main(["verify", "edges", "--seed", "1", "--n-per-edge", "3", "--bound-scale", "-1",
                 "--out", str(tmp_path)])
    assert code == 1
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert any(not r["pass"] and r["slack"] < 0 for r in manifest["rows"])
    assert "FAIL edge:" in capsys.readouterr().out


def test_verify_bad_suite():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "nothing"])
    assert exc.value.code == 2


def test_schema_verb(capsys):
    assert main(["schema", "config"]) == 0
    assert json.loads(capsys.readouterr().out)["title"] == load_schema("config")["title"]
    assert main(["schema"]) == 0
    assert set(json.loads(capsys.readouterr().out)) == {"config", "report", "manifest"}


def test_fixture_configs_validate():
    for cfg in sorted(FIXTURES.glob("*.config.json")):
        jsonschema.validate(json.loads(cfg.read_text()), load_schema("config"))
        load_config(cfg)


def test_fixtures_regenerate_byte_identical(tmp_path):
    written = build_fixtures(tmp_path)
    assert sorted(p.name for p in written) == sorted(p.name for p in FIXTURES.iterdir())
    for p in written:
        assert p.read_bytes() == (FIXTURES / p.name).read_bytes(), p.name


def test_cost_parity_fixture_values(tmp_path):
    assert main(["audit", "--config", str(FIXTURES / "cost_parity_0.40.config.json"), "--out", str(tmp_path)]) == 0
    m = json.loads((tmp_path / "report.json").read_text())["metrics"]
    assert m["bayes_risk_c"]["value"] == pytest.approx(6 / 35, abs=1e-12)
    assert m["cost_gap"]["value"] == pytest.approx((4 / 7) * abs(0.4 * 0.4 / 0.6 - 0.3), abs=1e-12)
