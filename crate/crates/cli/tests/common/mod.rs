#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_esrstm-lab");

pub const DEFAULT_LINE_TOML: &str = r#"kind = "parametric"
offset_db = -11.7
slope_db_per_ghz = 1.0
ripple_db = 10.0
ripple_period_hz = 1.5e9
phase = 0.0
origin_hz = 18e9
support_lo_hz = 17e9
support_hi_hz = 26e9
"#;

pub const FLAT_LINE_TOML: &str = r#"kind = "parametric"
offset_db = -6.0
slope_db_per_ghz = 0.0
ripple_db = 0.0
ripple_period_hz = 1e9
phase = 0.0
origin_hz = 18e9
support_lo_hz = 1e9
support_hi_hz = 40e9
"#;

/// Runs the binary in `dir` with the seed variable cleared unless given.
pub fn run_env(dir: &Path, args: &[&str], seed_env: Option<&str>) -> Output {
    let mut c = Command::new(BIN);
    c.current_dir(dir).args(args).env_remove("ESRSTM_LAB_SEED");
    if let Some(s) = seed_env {
        c.env("ESRSTM_LAB_SEED", s);
    }
    c.output().expect("binary runs")
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    run_env(dir, args, None)
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub struct Case {
    pub name: &'static str,
    pub args: Vec<&'static str>,
    pub expect: i32,
}

fn case(name: &'static str, expect: i32, args: &[&'static str]) -> Case {
    Case { name, args: args.to_vec(), expect }
}

/// Writes the fixtures the matrix refers to into `dir`.
pub fn matrix_fixtures(dir: &Path) {
    std::fs::write(dir.join("line.toml"), DEFAULT_LINE_TOML).unwrap();
    std::fs::write(dir.join("bad.toml"), "no_such_key = 1\n").unwrap();
    std::fs::write(dir.join("dark.toml"), "seed = 1\n[instrument.junction]\neta = 0.0\n").unwrap();
    std::fs::write(dir.join("malformed.csv"), "# b_set_t=0.65\nfrequency_hz,delta_i_a\n1e10,0\n1.1e10,zero\n")
        .unwrap();
    std::fs::write(dir.join("unknown.csv"), "a,b\n1,2\n").unwrap();
    std::fs::create_dir_all(dir.join("occupied.json")).unwrap();
}

/// Every command against every exit class. Cases run in order; later ones
/// read files earlier ones wrote.
pub fn exit_code_matrix() -> Vec<Case> {
    vec![
        case("simulate 0.65 T", 0, &["simulate-spectrum", "--b-field", "0.65", "--seed", "1", "--out", "s065.csv"]),
        case("simulate 0.75 T", 0, &["simulate-spectrum", "--b-field", "0.75", "--seed", "1", "--out", "s075.csv"]),
        case("simulate 0.80 T", 0, &["simulate-spectrum", "--b-field", "0.80", "--seed", "1", "--out", "s080.csv"]),
        case(
            "simulate center",
            0,
            &["simulate-spectrum", "--b-field", "0.65", "--position", "center", "--seed", "1", "--out", "c.csv"],
        ),
        case("fit-peak lobe", 0, &["fit-peak", "s065.csv", "--out", "f.json"]),
        case("fit-peak 0.80 T", 0, &["fit-peak", "s080.csv", "--out", "f080.json"]),
        case("zeeman-fit three fields", 0, &["zeeman-fit", "s065.csv", "s075.csv", "f080.json", "--out", "z.json"]),
        case(
            "calibrate default line",
            0,
            &["calibrate", "--line", "line.toml", "--target-vrf", "0.005", "--band", "18e9:25e9", "--out", "pt.csv"],
        ),
        case("spatial-map", 0, &["spatial-map", "--seed", "1", "--out", "sp.csv"]),
        case("roundtrip", 0, &["roundtrip", "--seed", "42", "--out", "rt.json"]),
        case("plot spectrum", 0, &["plot", "s065.csv", "--out", "s.svg"]),
        case("plot zeeman", 0, &["plot", "z.json", "--out", "z.svg"]),
        case("fit-peak without a peak", 1, &["fit-peak", "c.csv", "--out", "cf.json"]),
        case("zeeman-fit one field", 1, &["zeeman-fit", "s065.csv", "--out", "z1.json"]),
        case("zeeman-fit no usable field", 1, &["zeeman-fit", "c.csv", "s075.csv", "--out", "z2.json"]),
        case(
            "calibrate clipping",
            1,
            &["calibrate", "--line", "line.toml", "--target-vrf", "2.0", "--band", "18e9:25e9", "--out", "clip.csv"],
        ),
        case("roundtrip without signal", 1, &["roundtrip", "--config", "dark.toml", "--out", "dark.json"]),
        case("negative field", 2, &["simulate-spectrum", "--b-field", "-1", "--seed", "1", "--out", "n.csv"]),
        case("noisy run without seed", 2, &["simulate-spectrum", "--b-field", "0.65", "--out", "n.csv"]),
        case("unknown config key", 2, &["simulate-spectrum", "--config", "bad.toml", "--b-field", "0.65", "--out", "n.csv"]),
        case("bad position", 2, &["simulate-spectrum", "--b-field", "0.65", "--position", "lobe:x", "--seed", "1", "--out", "n.csv"]),
        case("missing argument", 2, &["fit-peak", "s065.csv"]),
        case("unknown command", 2, &["frobnicate"]),
        case(
            "band outside line",
            2,
            &["calibrate", "--line", "line.toml", "--target-vrf", "0.005", "--band", "10e9:25e9", "--out", "o.csv"],
        ),
        case("malformed band", 2, &["calibrate", "--line", "line.toml", "--target-vrf", "0.005", "--band", "18", "--out", "o.csv"]),
        case("malformed csv", 2, &["fit-peak", "malformed.csv", "--out", "m.json"]),
        case("duplicate fields", 2, &["zeeman-fit", "s065.csv", "s065.csv", "--out", "d.json"]),
        case("plot unknown csv", 2, &["plot", "unknown.csv", "--out", "u.svg"]),
        case("missing input", 3, &["fit-peak", "nope.csv", "--out", "x.json"]),
        case("unwritable output", 3, &["simulate-spectrum", "--b-field", "0.65", "--seed", "1", "--out", "no/such/dir.csv"]),
        case("output is a directory", 3, &["fit-peak", "s065.csv", "--out", "occupied.json"]),
        case("missing line model", 3, &["calibrate", "--line", "nope.toml", "--target-vrf", "0.005", "--band", "18e9:25e9", "--out", "o.csv"]),
    ]
}

/// (case name, expected, actual) for every mismatch.
pub fn run_matrix(dir: &Path) -> Vec<(&'static str, i32, i32, String)> {
    matrix_fixtures(dir);
    exit_code_matrix()
        .into_iter()
        .filter_map(|c| {
            let o = run(dir, &c.args);
            let got = code(&o);
            (got != c.expect).then(|| (c.name, c.expect, got, stderr(&o)))
        })
        .collect()
}
