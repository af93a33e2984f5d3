//! File formats.
//!
//! Traces are CSV with `#`-prefixed `key=value` metadata lines before the
//! header row; structured results are pretty JSON; configs are TOML. Every
//! output is written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use esrstm_core::pipeline::{ExperimentConfig, SpatialPoint};
use esrstm_core::rfchain::{PowerRow, PowerTable, TransmissionModel};
use esrstm_core::{Current, MagneticField, Spectrum, SpectrumMeta, Voltage};
use serde::de::DeserializeOwned;

use crate::error::{CliError, CliResult};

pub const SPECTRUM_HEADER: [&str; 2] = ["frequency_hz", "delta_i_a"];
pub const POWER_HEADER: [&str; 3] = ["frequency_hz", "power_dbm", "clipped"];
pub const TRANSMISSION_HEADER: [&str; 2] = ["frequency_hz", "transmission"];
pub const SPATIAL_HEADER: [&str; 9] = [
    "label",
    "x_nm",
    "y_nm",
    "density",
    "detected",
    "amplitude_a",
    "amplitude_sigma_a",
    "f_r_hz",
    "f_r_sigma_hz",
];

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

pub fn parse_toml<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn load_config(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    let cfg = match path {
        Some(p) => parse_toml(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.validate().map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
    Ok(cfg)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn sibling_json(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// A parsed CSV: metadata from leading `#` lines, header, rows with their
/// 1-based line numbers.
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub rows: Vec<(usize, Vec<String>)>,
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let text = read_text(path)?;
    parse_table(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn parse_table(text: &str) -> Result<Table, String> {
    let mut meta = BTreeMap::new();
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else { continue };
        if let Some((k, v)) = rest.split_once('=') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| format!("bad header: {e}"))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err("missing header row".into());
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match e.position() {
            Some(p) => format!("line {}: {e}", p.line()),
            None => e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table { meta, header, rows })
}

impl Table {
    pub fn expect_header(&self, want: &[&str]) -> Result<(), String> {
        if self.header.iter().map(String::as_str).ne(want.iter().copied()) {
            return Err(format!("expected header {:?}, found {:?}", want.join(","), self.header.join(",")));
        }
        Ok(())
    }

    pub fn has_header(&self, want: &[&str]) -> bool {
        self.expect_header(want).is_ok()
    }

    pub fn number(line: usize, cell: &str, column: &str) -> Result<f64, String> {
        let v: f64 = cell
            .parse()
            .map_err(|_| format!("line {line}: column {column}: {cell:?} is not a number"))?;
        if !v.is_finite() {
            return Err(format!("line {line}: column {column}: value is not finite"));
        }
        Ok(v)
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta.get(key).and_then(|v| v.parse().ok())
    }
}

fn format_spectrum(s: &Spectrum) -> String {
    let m = s.meta();
    let mut out = String::new();
    out.push_str("# format=esrstm-spectrum/1\n");
    out.push_str(&format!("# b_set_t={}\n", m.b_set.tesla()));
    out.push_str(&format!("# position={}\n", m.position));
    out.push_str(&format!("# seed={}\n", m.seed));
    out.push_str(&format!("# v_dc_v={}\n", m.v_dc.volts()));
    out.push_str(&format!("# i_set_a={}\n", m.i_set.amps()));
    out.push_str(&format!("# v_rf_v={}\n", m.v_rf.volts()));
    out.push_str(&SPECTRUM_HEADER.join(","));
    out.push('\n');
    for (f, v) in s.freqs().iter().zip(s.values()) {
        out.push_str(&format!("{f},{v}\n"));
    }
    out
}

pub fn write_spectrum(path: &Path, s: &Spectrum) -> CliResult<()> {
    write_atomic(path, format_spectrum(s).as_bytes())
}

pub fn spectrum_from_table(t: &Table) -> Result<Spectrum, String> {
    t.expect_header(&SPECTRUM_HEADER)?;
    let mut freqs = Vec::with_capacity(t.rows.len());
    let mut values = Vec::with_capacity(t.rows.len());
    for (line, row) in &t.rows {
        if row.len() != 2 {
            return Err(format!("line {line}: expected 2 columns, found {}", row.len()));
        }
        freqs.push(Table::number(*line, &row[0], "frequency_hz")?);
        values.push(Table::number(*line, &row[1], "delta_i_a")?);
    }
    let d = SpectrumMeta::default();
    let meta = SpectrumMeta {
        b_set: MagneticField(t.meta_f64("b_set_t").unwrap_or(f64::NAN)),
        position: t.meta.get("position").cloned().unwrap_or(d.position),
        seed: t.meta.get("seed").and_then(|s| s.parse().ok()).unwrap_or(0),
        v_dc: t.meta_f64("v_dc_v").map_or(d.v_dc, Voltage),
        i_set: t.meta_f64("i_set_a").map_or(d.i_set, Current),
        v_rf: t.meta_f64("v_rf_v").map_or(d.v_rf, Voltage),
    };
    Spectrum::new(freqs, values, meta).map_err(|e| e.to_string())
}

pub fn read_spectrum(path: &Path) -> CliResult<Spectrum> {
    let t = read_table(path)?;
    spectrum_from_table(&t).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn format_power_table(t: &PowerTable, flatness: f64) -> String {
    let mut out = String::new();
    out.push_str("# format=esrstm-power-table/1\n");
    out.push_str(&format!("# target_vrf_v={}\n", t.target_vrf));
    out.push_str(&format!("# band_lo_hz={}\n", t.band.0));
    out.push_str(&format!("# band_hi_hz={}\n", t.band.1));
    out.push_str(&format!("# flatness={flatness}\n"));
    out.push_str(&POWER_HEADER.join(","));
    out.push('\n');
    for r in &t.rows {
        out.push_str(&format!("{},{},{}\n", r.freq_hz, r.power_dbm, u8::from(r.clipped)));
    }
    out
}

pub fn power_table_from_table(t: &Table) -> Result<PowerTable, String> {
    t.expect_header(&POWER_HEADER)?;
    let mut rows = Vec::with_capacity(t.rows.len());
    for (line, row) in &t.rows {
        if row.len() != 3 {
            return Err(format!("line {line}: expected 3 columns, found {}", row.len()));
        }
        let clipped = match row[2].as_str() {
            "0" | "false" => false,
            "1" | "true" => true,
            other => return Err(format!("line {line}: column clipped: {other:?} is not 0 or 1")),
        };
        rows.push(PowerRow {
            freq_hz: Table::number(*line, &row[0], "frequency_hz")?,
            power_dbm: Table::number(*line, &row[1], "power_dbm")?,
            clipped,
        });
    }
    let need = |k: &str| t.meta_f64(k).ok_or_else(|| format!("missing metadata {k}"));
    let table = PowerTable { rows, target_vrf: need("target_vrf_v")?, band: (need("band_lo_hz")?, need("band_hi_hz")?) };
    table.validate().map_err(|e| e.to_string())?;
    Ok(table)
}

/// Tabulated line from `frequency_hz,transmission` rows (linear amplitude).
pub fn transmission_from_table(t: &Table) -> Result<TransmissionModel, String> {
    t.expect_header(&TRANSMISSION_HEADER)?;
    let mut freqs_hz = Vec::new();
    let mut values = Vec::new();
    for (line, row) in &t.rows {
        if row.len() != 2 {
            return Err(format!("line {line}: expected 2 columns, found {}", row.len()));
        }
        freqs_hz.push(Table::number(*line, &row[0], "frequency_hz")?);
        values.push(Table::number(*line, &row[1], "transmission")?);
    }
    let m = TransmissionModel::Tabulated { freqs_hz, values };
    m.validate().map_err(|e| e.to_string())?;
    Ok(m)
}

#[cfg(test)]
fn format_transmission(freqs: &[f64], values: &[f64]) -> String {
    let mut out = String::from("# format=esrstm-transmission/1\n");
    out.push_str(&TRANSMISSION_HEADER.join(","));
    out.push('\n');
    for (f, v) in freqs.iter().zip(values) {
        out.push_str(&format!("{f},{v}\n"));
    }
    out
}

/// A line model: TOML (`kind = "parametric"` or `"tabulated"`) or a
/// transmission CSV, chosen by extension.
pub fn read_line(path: &Path) -> CliResult<TransmissionModel> {
    let model = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let t = read_table(path)?;
        transmission_from_table(&t).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    } else {
        parse_toml(path)?
    };
    model.validate().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(model)
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn format_spatial(points: &[SpatialPoint], b_set: f64, seed: u64) -> String {
    let mut out = String::from("# format=esrstm-spatial/1\n");
    out.push_str(&format!("# b_set_t={b_set}\n# seed={seed}\n"));
    out.push_str(&SPATIAL_HEADER.join(","));
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "\"{}\",{},{},{},{},{},{},{},{}\n",
            p.label,
            p.x_nm,
            p.y_nm,
            p.density,
            u8::from(p.detected),
            opt(p.amplitude),
            opt(p.amplitude_sigma),
            opt(p.f_r),
            opt(p.f_r_sigma)
        ));
    }
    out
}

pub fn spatial_from_table(t: &Table) -> Result<Vec<SpatialPoint>, String> {
    t.expect_header(&SPATIAL_HEADER)?;
    let cell = |line: usize, s: &str, col: &str| -> Result<Option<f64>, String> {
        if s.is_empty() {
            Ok(None)
        } else {
            Table::number(line, s, col).map(Some)
        }
    };
    t.rows
        .iter()
        .map(|(line, r)| {
            if r.len() != SPATIAL_HEADER.len() {
                return Err(format!("line {line}: expected {} columns, found {}", SPATIAL_HEADER.len(), r.len()));
            }
            Ok(SpatialPoint {
                label: r[0].clone(),
                x_nm: Table::number(*line, &r[1], "x_nm")?,
                y_nm: Table::number(*line, &r[2], "y_nm")?,
                density: Table::number(*line, &r[3], "density")?,
                detected: r[4] == "1",
                amplitude: cell(*line, &r[5], "amplitude_a")?,
                amplitude_sigma: cell(*line, &r[6], "amplitude_sigma_a")?,
                f_r: cell(*line, &r[7], "f_r_hz")?,
                f_r_sigma: cell(*line, &r[8], "f_r_sigma_hz")?,
            })
        })
        .collect()
}
