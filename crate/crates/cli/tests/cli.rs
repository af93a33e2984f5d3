mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::*;

const GHZ: f64 = 1e9;
const MU_B_OVER_H: f64 = 9.274_010_078_3e-24 / 6.626_070_15e-34;

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let o = run(dir, args);
    assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
}

fn assert_well_formed_svg(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert!(doc.descendants().any(|n| n.has_tag_name("circle") || n.has_tag_name("polyline")));
}

#[test]
fn exit_code_contract() {
    let d = tmp();
    let bad = run_matrix(d.path());
    assert!(bad.is_empty(), "mismatched exit codes: {bad:#?}");
}

#[test]
fn golden_spectrum_is_reproduced_byte_for_byte() {
    let d = tmp();
    ok(
        d.path(),
        &[
            "simulate-spectrum",
            "--config",
            golden("zero_noise.toml").to_str().unwrap(),
            "--b-field",
            "0.65",
            "--f-start",
            "18.9e9",
            "--f-stop",
            "19.2e9",
            "--f-step",
            "20e6",
            "--out",
            "s.csv",
        ],
    );
    assert_eq!(fs::read_to_string(d.path().join("s.csv")).unwrap(), fs::read_to_string(golden("spectrum_v1.csv")).unwrap());
}

#[test]
fn golden_files_parse() {
    let d = tmp();
    ok(d.path(), &["fit-peak", golden("spectrum_v1.csv").to_str().unwrap(), "--out", "f.json"]);
    ok(d.path(), &["plot", golden("power_table_v1.csv").to_str().unwrap(), "--out", "p.svg"]);
    ok(d.path(), &["simulate-spectrum", "--b-field", "0.75", "--seed", "2", "--out", "s075.csv"]);
    ok(d.path(), &["zeeman-fit", golden("fit_peak_v1.json").to_str().unwrap(), "s075.csv", "--out", "z.json"]);
    let f = json(&d.path().join("f.json"));
    let g = json(&golden("fit_peak_v1.json"));
    for k in ["amplitude", "center", "fwhm"] {
        let (a, b) = (f["params"][k].as_f64().unwrap(), g["params"][k].as_f64().unwrap());
        assert!((a / b - 1.0).abs() < 1e-9, "{k}: {a} vs {b}");
    }
}

#[test]
fn metadata_lines_do_not_break_plain_csv_readers() {
    let text = fs::read_to_string(golden("spectrum_v1.csv")).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["frequency_hz", "delta_i_a"]);
    let rows: Vec<(f64, f64)> = rdr.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 16);
    assert_eq!(rows[0].0, 18.9e9);
    assert!(text.lines().take_while(|l| !l.starts_with("frequency_hz")).all(|l| l.starts_with('#')));
}

#[test]
fn fit_peak_recovers_the_linewidth() {
    let d = tmp();
    ok(d.path(), &["simulate-spectrum", "--b-field", "0.65", "--sigma", "0", "--out", "clean.csv"]);
    ok(d.path(), &["fit-peak", "clean.csv", "--out", "clean.json"]);
    let f = json(&d.path().join("clean.json"));
    assert!((f["params"]["fwhm"].as_f64().unwrap() - 55e6).abs() < 1e3, "{}", f["params"]);
    assert!((f["energy_resolution"]["fwhm_nev"].as_f64().unwrap() - 227.46).abs() < 0.01);

    ok(d.path(), &["simulate-spectrum", "--b-field", "0.65", "--seed", "7", "--out", "noisy.csv"]);
    ok(d.path(), &["fit-peak", "noisy.csv", "--out", "noisy.json"]);
    let f = json(&d.path().join("noisy.json"));
    let fwhm = f["params"]["fwhm"].as_f64().unwrap();
    assert!((fwhm - 55e6).abs() <= 5e6, "{fwhm}");
    assert_eq!(f["converged"], true);
    assert!(f["sigmas"]["fwhm"].as_f64().unwrap() > 0.0);
}

#[test]
fn fit_peak_without_signal_reports_unconverged() {
    let d = tmp();
    ok(d.path(), &["simulate-spectrum", "--b-field", "0.65", "--position", "center", "--seed", "3", "--out", "c.csv"]);
    let o = run(d.path(), &["fit-peak", "c.csv", "--out", "c.json"]);
    assert_eq!(code(&o), 1);
    let f = json(&d.path().join("c.json"));
    assert_eq!(f["converged"], false);
    assert_eq!(f["detected"], false);
    assert!(f["conventions"].is_object() && f["config"].is_object());
}

#[test]
fn zeeman_fit_on_default_spectra() {
    let d = tmp();
    let mut files = Vec::new();
    for b in ["0.65", "0.75", "0.80"] {
        let out = format!("s{b}.csv");
        ok(d.path(), &["simulate-spectrum", "--b-field", b, "--seed", "5", "--out", &out]);
        files.push(out);
    }
    let mut args = vec!["zeeman-fit"];
    args.extend(files.iter().map(String::as_str));
    args.extend(["--out", "z.json"]);
    ok(d.path(), &args);
    let z = json(&d.path().join("z.json"));
    let g = z["params"]["g"].as_f64().unwrap();
    let f0 = z["params"]["f0_hz"].as_f64().unwrap();
    assert!((g - 1.84).abs() <= 0.12, "g = {g}");
    assert!((f0 / GHZ - 1.8).abs() <= 1.0, "f0 = {f0}");
    // The default 20 mT tip field is invisible to the analysis and lands in f0.
    let tip = 1.84 * MU_B_OVER_H * 0.020;
    assert!((f0 - 1.8 * GHZ - tip).abs() < 0.05 * GHZ, "f0 = {f0}");
    assert_eq!(z["weighting"], "weighted");
    assert_eq!(z["peaks"].as_array().unwrap().len(), 3);
    assert!(z["conventions"]["f0_exchange"].is_string());
}

#[test]
fn zeeman_fit_exact_without_tip_field() {
    let d = tmp();
    fs::write(d.path().join("c.toml"), "[noise]\nsigma = 0.0\n[instrument.junction]\nb_tip = 0.0\n").unwrap();
    for b in ["0.65", "0.75", "0.80"] {
        ok(d.path(), &["simulate-spectrum", "--config", "c.toml", "--b-field", b, "--out", &format!("s{b}.csv")]);
    }
    ok(d.path(), &["fit-peak", "s0.65.csv", "--out", "f.json"]);
    ok(d.path(), &["zeeman-fit", "f.json", "s0.75.csv", "s0.80.csv", "--out", "z.json"]);
    let z = json(&d.path().join("z.json"));
    assert!((z["params"]["g"].as_f64().unwrap() - 1.84).abs() < 1e-4);
    assert!((z["params"]["f0_hz"].as_f64().unwrap() - 1.8 * GHZ).abs() < 1e-3 * GHZ);
    let j = z["params"]["j_ex_ev"].as_f64().unwrap();
    let expect = 6.626_070_15e-34 * 1.8e9 / 6.0 / 1.602_176_634e-19;
    assert!((j / expect - 1.0).abs() < 1e-3);
}

#[test]
fn two_fields_give_nan_uncertainties_as_null() {
    let d = tmp();
    ok(d.path(), &["simulate-spectrum", "--b-field", "0.65", "--seed", "1", "--out", "a.csv"]);
    ok(d.path(), &["simulate-spectrum", "--b-field", "0.80", "--seed", "1", "--out", "b.csv"]);
    ok(d.path(), &["zeeman-fit", "a.csv", "b.csv", "--out", "z.json"]);
    let z = json(&d.path().join("z.json"));
    assert!(z["sigmas"]["g"].is_null());
    assert!(z["warnings"].as_array().unwrap().iter().any(|w| w.as_str().unwrap().contains("3")));
}

#[test]
fn calibrate_default_and_flat_lines() {
    let d = tmp();
    fs::write(d.path().join("line.toml"), DEFAULT_LINE_TOML).unwrap();
    fs::write(d.path().join("flat.toml"), FLAT_LINE_TOML).unwrap();
    ok(d.path(), &["calibrate", "--line", "line.toml", "--target-vrf", "0.005", "--band", "18e9:25e9", "--out", "pt.csv"]);
    let s = json(&d.path().join("pt.json"));
    assert!(s["flatness"].as_f64().unwrap() <= 0.01);
    assert_eq!(s["clipped_rows"], 0);
    assert!(s["config"]["line"].is_object() && s["conventions"].is_object());
    let v = s["params"]["v_rf_estimate_v"].as_f64().unwrap();
    assert!((v / 0.025 - 1.0).abs() < 0.01, "{v}");

    ok(d.path(), &["calibrate", "--line", "flat.toml", "--target-vrf", "0.005", "--band", "18e9:25e9", "--out", "flat.csv"]);
    let text = fs::read_to_string(d.path().join("flat.csv")).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let powers: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(powers.len(), 351);
    let spread = powers.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - powers.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 1e-9, "flat line power spread {spread} dB");
    // 0.31623 V at 0 dBm, −6 dB line, 5 mV target.
    let expect = 20.0 * (0.005 / (0.31623 * 10f64.powf(-6.0 / 20.0))).log10();
    assert!((powers[0] - expect).abs() < 0.05, "{} vs {expect}", powers[0]);
}

#[test]
fn calibrate_clipping_flags_rows() {
    let d = tmp();
    fs::write(d.path().join("line.toml"), DEFAULT_LINE_TOML).unwrap();
    let o = run(d.path(), &["calibrate", "--line", "line.toml", "--target-vrf", "1.0", "--band", "18e9:25e9", "--out", "c.csv"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("clipped"));
    let text = fs::read_to_string(d.path().join("c.csv")).unwrap();
    assert!(text.lines().any(|l| l.ends_with(",1")));
    assert!(json(&d.path().join("c.json"))["clipped_rows"].as_u64().unwrap() > 0);
}

#[test]
fn calibrate_accepts_tabulated_csv_line() {
    let d = tmp();
    let mut text = String::from("# format=esrstm-transmission/1\nfrequency_hz,transmission\n");
    for i in 0..=60 {
        let f = 17e9 + 0.15e9 * i as f64;
        text.push_str(&format!("{f},{}\n", 0.2 + 0.05 * (f / 1e9).sin()));
    }
    fs::write(d.path().join("t.csv"), text).unwrap();
    ok(d.path(), &["calibrate", "--line", "t.csv", "--target-vrf", "0.005", "--band", "18e9:25e9", "--out", "pt.csv"]);
}

#[test]
fn noisy_calibration_needs_a_seed() {
    let d = tmp();
    fs::write(d.path().join("line.toml"), DEFAULT_LINE_TOML).unwrap();
    let args = ["calibrate", "--line", "line.toml", "--target-vrf", "0.005", "--band", "18e9:25e9", "--noise", "0.02", "--out", "pt.csv"];
    assert_eq!(code(&run(d.path(), &args)), 2);
    let o = run_env(d.path(), &args, Some("4"));
    assert!(matches!(code(&o), 0 | 1), "{}", stderr(&o));
    assert!(json(&d.path().join("pt.json"))["flatness"].as_f64().unwrap() <= 0.03);
}

#[test]
fn seeds_are_deterministic_and_env_is_a_fallback() {
    let d = tmp();
    let sim = |seed: Option<&str>, env: Option<&str>, out: &str| {
        let mut a = vec!["simulate-spectrum", "--b-field", "0.65", "--out", out];
        if let Some(s) = seed {
            a.extend(["--seed", s]);
        }
        let o = run_env(d.path(), &a, env);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read(d.path().join(out)).unwrap()
    };
    let a = sim(Some("9"), None, "a.csv");
    assert_eq!(a, sim(Some("9"), None, "b.csv"));
    assert_eq!(a, sim(None, Some("9"), "c.csv"));
    assert_eq!(a, sim(Some("9"), Some("10"), "d.csv"), "flag beats environment");
    assert_ne!(a, sim(Some("10"), None, "e.csv"));
}

#[test]
fn malformed_csv_names_the_line() {
    let d = tmp();
    fs::write(d.path().join("m.csv"), "# x=1\nfrequency_hz,delta_i_a\n1e10,0\n1.01e10,0\n1.02e10,NaN\n").unwrap();
    let o = run(d.path(), &["fit-peak", "m.csv", "--out", "m.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
    fs::write(d.path().join("w.csv"), "frequency_hz,delta_i_a\n1e10,0\n1.01e10,0,3\n").unwrap();
    let o = run(d.path(), &["fit-peak", "w.csv", "--out", "w.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn failed_writes_leave_no_temporaries() {
    let d = tmp();
    fs::create_dir(d.path().join("out.csv")).unwrap();
    let o = run(d.path(), &["simulate-spectrum", "--b-field", "0.65", "--seed", "1", "--out", "out.csv"]);
    assert_eq!(code(&o), 3);
    let names: Vec<String> = fs::read_dir(d.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(names, vec!["out.csv".to_string()]);
}

#[test]
fn spatial_map_separates_lobes_from_center() {
    let d = tmp();
    ok(d.path(), &["spatial-map", "--seed", "3", "--out", "sp.csv"]);
    let text = fs::read_to_string(d.path().join("sp.csv")).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let by = |label: &str| rows.iter().find(|r| &r[0] == label).unwrap().clone();
    assert_eq!(&by("lobe:0")[4], "1");
    assert_eq!(&by("lobe:2")[4], "1");
    assert_eq!(&by("center")[4], "0");
    assert_eq!(&by("center")[5], "");
    ok(d.path(), &["plot", "sp.csv", "--out", "sp.svg"]);
    assert_well_formed_svg(&d.path().join("sp.svg"));
}

fn without_nulls(v: serde_json::Value) -> serde_json::Value {
    match v {
        serde_json::Value::Object(m) => {
            m.into_iter().filter(|(_, x)| !x.is_null()).map(|(k, x)| (k, without_nulls(x))).collect()
        }
        serde_json::Value::Array(a) => a.into_iter().map(without_nulls).collect(),
        x => x,
    }
}

#[test]
fn roundtrip_report_is_complete_and_reproducible() {
    let d = tmp();
    ok(d.path(), &["roundtrip", "--seed", "42", "--out", "a.json"]);
    ok(d.path(), &["roundtrip", "--seed", "42", "--out", "b.json"]);
    let mut a = json(&d.path().join("a.json"));
    let mut b = json(&d.path().join("b.json"));
    assert_eq!(a["kind"], "roundtrip");
    assert_eq!(a["passed"], true);
    assert_eq!(a["config"]["seed"], 42);
    assert!(a["conventions"].is_object());
    assert!(a["provenance"]["timestamp"].as_str().unwrap().starts_with("unix:"));
    a["provenance"]["timestamp"] = serde_json::Value::Null;
    b["provenance"]["timestamp"] = serde_json::Value::Null;
    assert_eq!(a, b);

    // The echoed config reproduces the run; unset options are JSON nulls
    // and simply absent in TOML.
    let echo: toml::Value = serde_json::from_value(without_nulls(a["config"].clone())).unwrap();
    fs::write(d.path().join("echo.toml"), toml::to_string(&echo).unwrap()).unwrap();
    ok(d.path(), &["roundtrip", "--config", "echo.toml", "--out", "c.json"]);
    let mut c = json(&d.path().join("c.json"));
    c["provenance"]["timestamp"] = serde_json::Value::Null;
    assert_eq!(a, c);
}

#[test]
fn plots_are_well_formed_svg() {
    let d = tmp();
    fs::write(d.path().join("line.toml"), DEFAULT_LINE_TOML).unwrap();
    ok(d.path(), &["simulate-spectrum", "--b-field", "0.65", "--seed", "1", "--out", "a.csv"]);
    ok(d.path(), &["simulate-spectrum", "--b-field", "0.75", "--seed", "1", "--out", "b.csv"]);
    ok(d.path(), &["simulate-spectrum", "--b-field", "0.80", "--seed", "1", "--out", "c.csv"]);
    ok(d.path(), &["fit-peak", "a.csv", "--out", "f.json"]);
    ok(d.path(), &["zeeman-fit", "a.csv", "b.csv", "c.csv", "--out", "z.json"]);
    ok(d.path(), &["calibrate", "--line", "line.toml", "--target-vrf", "0.005", "--band", "18e9:25e9", "--out", "pt.csv"]);
    ok(d.path(), &["roundtrip", "--seed", "42", "--out", "rt.json"]);
    for input in ["a.csv", "f.json", "z.json", "pt.csv", "pt.json", "rt.json", golden("power_table_v1.csv").to_str().unwrap()] {
        ok(d.path(), &["plot", input, "--out", "p.svg"]);
        assert_well_formed_svg(&d.path().join("p.svg"));
    }
}

#[test]
fn every_json_report_carries_conventions_and_config() {
    let d = tmp();
    fs::write(d.path().join("line.toml"), DEFAULT_LINE_TOML).unwrap();
    ok(d.path(), &["simulate-spectrum", "--b-field", "0.65", "--seed", "1", "--out", "a.csv"]);
    ok(d.path(), &["simulate-spectrum", "--b-field", "0.75", "--seed", "1", "--out", "b.csv"]);
    ok(d.path(), &["fit-peak", "a.csv", "--out", "f.json"]);
    ok(d.path(), &["zeeman-fit", "a.csv", "b.csv", "--out", "z.json"]);
    ok(d.path(), &["calibrate", "--line", "line.toml", "--target-vrf", "0.005", "--band", "18e9:25e9", "--out", "pt.csv"]);
    ok(d.path(), &["roundtrip", "--seed", "2", "--out", "rt.json"]);
    let _ = run(d.path(), &["zeeman-fit", "a.csv", "--out", "z1.json"]);
    for f in ["f.json", "z.json", "pt.json", "rt.json", "z1.json"] {
        let v = json(&d.path().join(f));
        assert!(v["conventions"].is_object(), "{f}");
        assert!(v["config"].is_object(), "{f}");
        assert!(v["kind"].is_string(), "{f}");
    }
}
