use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use esrstm_core::fitkit::{detect_peak, fit_lorentzian_with_guess, FitResult};
use esrstm_core::pipeline::{
    peak_row, roundtrip_experiment, spatial_scan, zeeman_from_peaks, Conventions, ExperimentConfig, FieldSweep,
    PeakRow, Weighting,
};
use esrstm_core::rfchain::{calibrate, CalibrationConfig, RfLine};
use esrstm_core::spectrometer::{synthesize_spectrum, Lorentzian, Position};
use esrstm_core::units::energy_resolution;
use esrstm_core::{Error as CoreError, Frequency, FrequencyGrid, MagneticField};
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};
use crate::io;
use crate::svg::{Plot, Series, Style};

pub const SEED_ENV: &str = "ESRSTM_LAB_SEED";
/// Acceptance threshold for the calibrate command's verification.
pub const CALIBRATION_FLATNESS_MAX: f64 = 0.01;
const DEFAULT_STEP_HZ: f64 = 5e6;
const DEFAULT_WINDOW_HZ: f64 = 1.5e9;

/// Explicit flag, then config, then environment. A randomized run without
/// any of them is a usage error; there is no clock-derived seed.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>, randomized: bool) -> CliResult<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) if randomized => Err(CliError::Usage(format!(
            "a noisy run needs --seed, a `seed` in the config, or {SEED_ENV}"
        ))),
        Err(_) => Ok(0),
    }
}

fn conventions(weighting: &str) -> Value {
    serde_json::to_value(Conventions::standard(weighting)).expect("plain struct")
}

fn fit_maps(fit: &FitResult) -> (Map<String, Value>, Map<String, Value>) {
    let mut p = Map::new();
    let mut s = Map::new();
    for (i, n) in fit.names.iter().enumerate() {
        p.insert(n.clone(), json!(fit.params[i]));
        s.insert(n.clone(), json!(fit.sigmas[i]));
    }
    (p, s)
}

pub struct SimulateArgs {
    pub config: Option<PathBuf>,
    pub b_field: f64,
    pub position: Option<String>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub f_start: Option<f64>,
    pub f_stop: Option<f64>,
    pub f_step: Option<f64>,
}

/// Explicit range, else the configured sweep at this field, else a window
/// centred on the strongest predicted line.
fn simulation_grid(cfg: &ExperimentConfig, a: &SimulateArgs) -> CliResult<FrequencyGrid> {
    let step = a.f_step.unwrap_or(DEFAULT_STEP_HZ);
    let grid = match (a.f_start, a.f_stop) {
        (Some(lo), Some(hi)) => FieldSweep { b_set: a.b_field, f_start: lo, f_stop: hi, f_step: step }.grid()?,
        (None, None) => match cfg.sweeps.iter().find(|s| (s.b_set - a.b_field).abs() < 1e-9) {
            Some(s) => FieldSweep { f_step: a.f_step.unwrap_or(s.f_step), ..*s }.grid()?,
            None => {
                let lines = cfg.instrument.resonances(MagneticField(a.b_field))?;
                let (center, _) = lines
                    .iter()
                    .copied()
                    .max_by(|x, y| x.1.total_cmp(&y.1))
                    .ok_or_else(|| CliError::Usage("no resonance predicted at this field".into()))?;
                let lo = (((center - 0.5 * DEFAULT_WINDOW_HZ) / step).floor() * step).max(step);
                FrequencyGrid::with_step(Frequency(lo), Frequency(lo + DEFAULT_WINDOW_HZ), Frequency(step))?
            }
        },
        _ => return Err(CliError::Usage("--f-start and --f-stop must be given together".into())),
    };
    Ok(grid)
}

pub fn simulate_spectrum(a: &SimulateArgs) -> CliResult<()> {
    if !(a.b_field >= 0.0 && a.b_field.is_finite()) {
        return Err(CliError::Usage(format!(
            "--b-field {} rejected: the field is an out-of-plane magnitude and must be ≥ 0",
            a.b_field
        )));
    }
    let mut cfg = io::load_config(a.config.as_deref())?;
    if let Some(s) = a.sigma {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(CliError::Usage(format!("--sigma {s} must be ≥ 0")));
        }
        cfg.noise.sigma = s;
    }
    let seed = resolve_seed(a.seed, cfg.seed, cfg.noise.sigma > 0.0)?;
    let label = a.position.clone().unwrap_or_else(|| cfg.position.clone());
    let pos = Position::parse(&label, &cfg.instrument.molecule)?;
    let grid = simulation_grid(&cfg, a)?;
    let s = synthesize_spectrum(&cfg.instrument, &pos, MagneticField(a.b_field), &grid, &cfg.noise.model(seed))?;
    io::write_spectrum(&a.out, &s)
}

pub struct CalibrateArgs {
    pub line: PathBuf,
    pub target_vrf: f64,
    pub band: String,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub noise: Option<f64>,
    pub seed: Option<u64>,
}

fn parse_band(s: &str) -> CliResult<(f64, f64)> {
    let bad = || CliError::Usage(format!("--band {s:?}: expected <f_lo:f_hi> in Hz"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(bad());
    }
    Ok((lo, hi))
}

pub fn calibrate_cmd(a: &CalibrateArgs) -> CliResult<()> {
    if a.out.extension().is_some_and(|e| e == "json") {
        return Err(CliError::Usage("--out names the power-table CSV; the JSON summary is written beside it".into()));
    }
    let line = io::read_line(&a.line)?;
    let (exp_seed, mut cfg) = match &a.config {
        Some(p) => {
            let c = io::load_config(Some(p))?;
            (c.seed, c.calibration)
        }
        None => (None, CalibrationConfig { rel_noise: 0.0, ..CalibrationConfig::default() }),
    };
    (cfg.band_lo, cfg.band_hi) = parse_band(&a.band)?;
    cfg.target_vrf = a.target_vrf;
    if let Some(n) = a.noise {
        if !(n >= 0.0 && n.is_finite()) {
            return Err(CliError::Usage(format!("--noise {n} must be ≥ 0")));
        }
        cfg.rel_noise = n;
    }
    let (lo, hi) = line.support();
    if cfg.band_lo < lo || cfg.band_hi > hi {
        return Err(CliError::Usage(format!(
            "band {}:{} Hz lies outside the line model support {lo}:{hi} Hz",
            cfg.band_lo, cfg.band_hi
        )));
    }
    if cfg.f_ref < cfg.band_lo || cfg.f_ref > cfg.band_hi {
        cfg.f_ref = 0.5 * (cfg.band_lo + cfg.band_hi);
    }
    let seed = resolve_seed(a.seed, exp_seed, cfg.rel_noise > 0.0)?;
    let r = calibrate(&line, &cfg, seed)?;

    let clipped = r.power_table.rows.iter().filter(|x| x.clipped).count();
    io::write_atomic(&a.out, io::format_power_table(&r.power_table, r.residual_flatness).as_bytes())?;
    let (params, sigmas) = fit_maps(&r.vrf_fit);
    let passed = r.residual_flatness <= CALIBRATION_FLATNESS_MAX && clipped == 0;
    let summary = json!({
        "kind": "calibration",
        "power_table": a.out.display().to_string(),
        "params": {
            "k_v_per_sqrt_mw": r.k,
            "v_rf_estimate_v": r.vrf_fit.get("v_rf"),
            "estimate_power_dbm": cfg.estimate_power_dbm,
            "f_ref_hz": cfg.f_ref,
        },
        "sigmas": { "v_rf_estimate_v": r.vrf_fit.sigma("v_rf") },
        "converged": r.vrf_fit.converged,
        "step_fit": { "params": params, "sigmas": sigmas },
        "flatness": r.residual_flatness,
        "flatness_max": CALIBRATION_FLATNESS_MAX,
        "clipped_rows": clipped,
        "passed": passed,
        "verification": r.verification.iter().map(|(f, v)| json!({"frequency_hz": f, "v_rf_v": v})).collect::<Vec<_>>(),
        "transmission": r.transmission,
        "conventions": conventions("n/a"),
        "config": { "seed": seed, "line": line, "calibration": cfg },
    });
    io::write_json(&io::sibling_json(&a.out), &summary)?;
    if clipped > 0 {
        return Err(CliError::Soft(format!("{clipped} row(s) clipped at the source maximum of {} dBm", cfg.source_max_dbm)));
    }
    if !passed {
        return Err(CliError::Soft(format!(
            "verification flatness {:.3}% exceeds {:.1}%",
            100.0 * r.residual_flatness,
            100.0 * CALIBRATION_FLATNESS_MAX
        )));
    }
    Ok(())
}

pub fn fit_peak(input: &Path, out: &Path, k_mad: f64) -> CliResult<()> {
    if !(k_mad > 0.0) {
        return Err(CliError::Usage(format!("--k-mad {k_mad} must be positive")));
    }
    let s = io::read_spectrum(input)?;
    let guess = detect_peak(&s, k_mad)?;
    let fit = match &guess {
        Some(g) => match fit_lorentzian_with_guess(&s, g) {
            Ok(f) => Ok(f),
            Err(e @ (CoreError::Analysis(_) | CoreError::Numeric(_))) => Err(e.to_string()),
            Err(e) => return Err(e.into()),
        },
        None => Err("no peak detected".to_string()),
    };
    let (params, sigmas, converged, chi2, dof, n_iter) = match &fit {
        Ok(f) => {
            let (p, s) = fit_maps(f);
            (p, s, f.converged, json!(f.chi2), json!(f.dof), json!(f.n_iter))
        }
        Err(_) => (Map::new(), Map::new(), false, Value::Null, Value::Null, Value::Null),
    };
    let resolution = fit
        .as_ref()
        .ok()
        .filter(|f| f.converged)
        .and_then(|f| energy_resolution(Frequency(f.get("fwhm").expect("named"))).ok());
    let doc = json!({
        "kind": "fit-peak",
        "source": input.display().to_string(),
        "detected": guess.is_some(),
        "guess": guess,
        "params": params,
        "sigmas": sigmas,
        "converged": converged,
        "chi2": chi2,
        "dof": dof,
        "n_iter": n_iter,
        "energy_resolution": resolution,
        "meta": s.meta(),
        "conventions": conventions("n/a"),
        "config": { "k_mad": k_mad, "model": "lorentzian", "units": "SI (A, Hz)" },
        "error": fit.as_ref().err(),
    });
    io::write_json(out, &doc)?;
    match fit {
        Err(e) => Err(CliError::Soft(e)),
        Ok(f) if !f.converged => Err(CliError::Soft("Lorentzian fit did not converge".into())),
        Ok(_) => Ok(()),
    }
}

/// A peak row from a previously written fit-peak document.
fn peak_from_json(path: &Path) -> CliResult<Result<PeakRow, (f64, String)>> {
    let doc: Value = serde_json::from_str(&io::read_text(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let bad = |what: &str| CliError::Usage(format!("{}: not a fit-peak document ({what})", path.display()));
    if doc["kind"] != "fit-peak" {
        return Err(bad("kind"));
    }
    let b = doc["meta"]["b_set"].as_f64().ok_or_else(|| bad("meta.b_set"))?;
    if doc["converged"] != true {
        let reason = doc["error"].as_str().unwrap_or("fit did not converge").to_string();
        return Ok(Err((b, reason)));
    }
    let num = |sect: &str, k: &str| doc[sect][k].as_f64().unwrap_or(f64::NAN);
    Ok(Ok(PeakRow {
        b_set: b,
        f_fit: num("params", "center"),
        f_sigma: num("sigmas", "center"),
        amplitude: num("params", "amplitude"),
        fwhm: num("params", "fwhm"),
    }))
}

pub fn zeeman_fit(inputs: &[PathBuf], out: &Path, weighting: Weighting, k_mad: f64) -> CliResult<()> {
    if !(k_mad > 0.0) {
        return Err(CliError::Usage(format!("--k-mad {k_mad} must be positive")));
    }
    let mut peaks = Vec::new();
    let mut excluded = Vec::new();
    for p in inputs {
        let row = if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            peak_from_json(p)?
        } else {
            let s = io::read_spectrum(p)?;
            let b = s.meta().b_set.tesla();
            if !b.is_finite() {
                return Err(CliError::Usage(format!("{}: missing `# b_set_t=` metadata", p.display())));
            }
            peak_row(&s, k_mad)?.map_err(|r| (b, r))
        };
        match row {
            Ok(r) => peaks.push(r),
            Err((b, reason)) => excluded.push(json!({ "b_set": b, "reason": reason, "source": p.display().to_string() })),
        }
    }
    let config = json!({
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "weighting": weighting,
        "k_mad": k_mad,
    });
    let result = zeeman_from_peaks(peaks.clone(), weighting);
    let doc = match &result {
        Ok(z) => {
            let mut warnings: Vec<String> =
                excluded.iter().map(|e| format!("field {} T excluded: {}", e["b_set"], e["reason"].as_str().unwrap_or(""))).collect();
            warnings.extend(z.warnings.iter().cloned());
            json!({
                "kind": "zeeman",
                "params": { "g": z.g, "f0_hz": z.f0, "j_ex_ev": z.j_ex_ev },
                "sigmas": { "g": z.g_sigma, "f0_hz": z.f0_sigma, "j_ex_ev": z.j_ex_sigma_ev },
                "converged": z.line.converged,
                "weighting": z.weighting,
                "peaks": z.peaks,
                "excluded": excluded,
                "line": z.line,
                "warnings": warnings,
                "conventions": conventions(&z.weighting),
                "config": config,
            })
        }
        Err(CoreError::Analysis(msg)) => json!({
            "kind": "zeeman",
            "params": {},
            "sigmas": {},
            "converged": false,
            "peaks": peaks,
            "excluded": excluded,
            "warnings": [msg],
            "error": msg,
            "conventions": conventions("n/a"),
            "config": config,
        }),
        Err(e) => return Err(e.clone().into()),
    };
    io::write_json(out, &doc)?;
    result.map(|_| ()).map_err(CliError::from)
}

pub fn spatial_map(config: Option<&Path>, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let cfg = io::load_config(config)?;
    let seed = resolve_seed(seed, cfg.seed, cfg.noise.sigma > 0.0)?;
    let positions = cfg.spatial.all_positions(&cfg.instrument.molecule)?;
    let grid = cfg.spatial.frequency_grid()?;
    let points = spatial_scan(
        &positions,
        MagneticField(cfg.spatial.b_set),
        &grid,
        &cfg.instrument,
        &cfg.noise.model(seed),
        cfg.analysis.k_mad,
    )?;
    io::write_atomic(out, io::format_spatial(&points, cfg.spatial.b_set, seed).as_bytes())
}

pub fn roundtrip(config: Option<&Path>, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let cfg = io::load_config(config)?;
    let seed = resolve_seed(seed, cfg.seed, true)?;
    let mut report = roundtrip_experiment(&cfg, seed)?;
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    report.provenance.timestamp = Some(format!("unix:{secs}"));
    let mut doc = serde_json::to_value(&report).expect("report serializes");
    doc["kind"] = json!("roundtrip");
    io::write_json(out, &doc)?;
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        let mut why = report.flags.clone();
        if !failed.is_empty() {
            why.push(format!("checks outside envelope: {}", failed.join(", ")));
        }
        Err(CliError::Soft(format!("roundtrip failed: {}", why.join("; "))))
    }
}

fn lorentzian_curve(params: &Value, lo: f64, hi: f64) -> Option<Vec<(f64, f64)>> {
    let g = |k: &str| params[k].as_f64();
    let shape = Lorentzian { amplitude: g("amplitude")?, center: g("center")?, fwhm: g("fwhm")?, baseline: g("baseline")? };
    Some((0..=400).map(|i| lo + (hi - lo) * i as f64 / 400.0).map(|f| (f / 1e9, shape.eval(f) * 1e12)).collect())
}

fn spectrum_plot(s: &esrstm_core::Spectrum, fit_params: Option<Value>) -> Plot {
    let mut series = vec![Series {
        label: "data".into(),
        points: s.freqs().iter().zip(s.values()).map(|(f, v)| (f / 1e9, v * 1e12)).collect(),
        y_err: None,
        style: Style::Markers,
    }];
    let (lo, hi) = (s.freqs()[0], s.freqs()[s.len() - 1]);
    if let Some(curve) = fit_params.and_then(|p| lorentzian_curve(&p, lo, hi)) {
        series.push(Series { label: "Lorentzian fit".into(), points: curve, y_err: None, style: Style::Line });
    }
    Plot {
        title: format!("ESR spectrum at B = {} T, {}", s.meta().b_set.tesla(), s.meta().position),
        x_label: "frequency (GHz)".into(),
        y_label: "ΔI (pA)".into(),
        series,
    }
}

fn fit_params_of(s: &esrstm_core::Spectrum) -> Option<Value> {
    let g = detect_peak(s, 5.0).ok()??;
    let f = fit_lorentzian_with_guess(s, &g).ok().filter(|f| f.converged)?;
    Some(Value::Object(fit_maps(&f).0))
}

fn zeeman_plot(z: &Value) -> CliResult<Plot> {
    let peaks = z["peaks"].as_array().cloned().unwrap_or_default();
    let pts: Vec<(f64, f64)> = peaks
        .iter()
        .map(|p| (p["b_set"].as_f64().unwrap_or(f64::NAN), p["f_fit"].as_f64().unwrap_or(f64::NAN) / 1e9))
        .collect();
    let errs: Vec<f64> = peaks.iter().map(|p| p["f_sigma"].as_f64().unwrap_or(f64::NAN) / 1e9).collect();
    let mut series = vec![Series { label: "fitted peaks".into(), points: pts.clone(), y_err: Some(errs), style: Style::Markers }];
    let line = &z["line"];
    if let (Some(slope), Some(icpt)) = (
        line["params"].get(0).and_then(Value::as_f64),
        line["params"].get(1).and_then(Value::as_f64),
    ) {
        let lo = 0.0f64.min(pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min));
        let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).max(lo + 1e-3);
        series.push(Series {
            label: "linear fit".into(),
            points: vec![(lo, slope * lo + icpt), (hi, slope * hi + icpt)],
            y_err: None,
            style: Style::Line,
        });
    }
    Ok(Plot { title: "Zeeman line".into(), x_label: "B_set (T)".into(), y_label: "f_r (GHz)".into(), series })
}

fn plot_json(path: &Path) -> CliResult<Plot> {
    let doc: Value = serde_json::from_str(&io::read_text(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    match doc["kind"].as_str() {
        Some("fit-peak") => {
            let src = doc["source"].as_str().map(PathBuf::from);
            let spectrum = src.and_then(|p| io::read_spectrum(&p).ok());
            match spectrum {
                Some(s) => Ok(spectrum_plot(&s, Some(doc["params"].clone()))),
                None => {
                    let c = doc["params"]["center"].as_f64().unwrap_or(f64::NAN);
                    let w = doc["params"]["fwhm"].as_f64().unwrap_or(f64::NAN);
                    let curve = lorentzian_curve(&doc["params"], c - 5.0 * w, c + 5.0 * w)
                        .filter(|c| !c.is_empty() && c[0].0.is_finite())
                        .ok_or_else(|| CliError::Soft("fit-peak document has no fitted curve to plot".into()))?;
                    Ok(Plot {
                        title: "Lorentzian fit".into(),
                        x_label: "frequency (GHz)".into(),
                        y_label: "ΔI (pA)".into(),
                        series: vec![Series { label: "fit".into(), points: curve, y_err: None, style: Style::Line }],
                    })
                }
            }
        }
        Some("zeeman") => zeeman_plot(&doc),
        Some("roundtrip") if doc["zeeman"].is_object() => zeeman_plot(&doc["zeeman"]),
        Some("roundtrip") => Err(CliError::Soft("roundtrip report has no Zeeman result to plot".into())),
        Some("calibration") => {
            let pts = doc["verification"]
                .as_array()
                .map(|a| {
                    a.iter()
                        .map(|r| {
                            (r["frequency_hz"].as_f64().unwrap_or(f64::NAN) / 1e9, r["v_rf_v"].as_f64().unwrap_or(f64::NAN) * 1e3)
                        })
                        .collect()
                })
                .unwrap_or_default();
            Ok(Plot {
                title: "Compensated junction V_RF".into(),
                x_label: "frequency (GHz)".into(),
                y_label: "V_RF (mV)".into(),
                series: vec![Series { label: "verification".into(), points: pts, y_err: None, style: Style::Line }],
            })
        }
        _ => Err(CliError::Usage(format!("{}: unrecognised document kind", path.display()))),
    }
}

fn plot_csv(path: &Path) -> CliResult<Plot> {
    let t = io::read_table(path)?;
    let usage = |e: String| CliError::Usage(format!("{}: {e}", path.display()));
    if t.has_header(&io::SPECTRUM_HEADER) {
        let s = io::spectrum_from_table(&t).map_err(usage)?;
        let fit = fit_params_of(&s);
        return Ok(spectrum_plot(&s, fit));
    }
    if t.has_header(&io::POWER_HEADER) {
        let table = io::power_table_from_table(&t).map_err(usage)?;
        return Ok(Plot {
            title: format!("Source power for V_RF = {} mV", table.target_vrf * 1e3),
            x_label: "frequency (GHz)".into(),
            y_label: "P_RF (dBm)".into(),
            series: vec![Series {
                label: "power table".into(),
                points: table.rows.iter().map(|r| (r.freq_hz / 1e9, r.power_dbm)).collect(),
                y_err: None,
                style: Style::Line,
            }],
        });
    }
    if t.has_header(&io::TRANSMISSION_HEADER) {
        let rows: Result<Vec<(f64, f64)>, String> = t
            .rows
            .iter()
            .map(|(l, r)| Ok((io::Table::number(*l, &r[0], "frequency_hz")? / 1e9, io::Table::number(*l, &r[1], "transmission")?)))
            .collect();
        return Ok(Plot {
            title: "Line transmission".into(),
            x_label: "frequency (GHz)".into(),
            y_label: "T (linear)".into(),
            series: vec![Series { label: "transmission".into(), points: rows.map_err(usage)?, y_err: None, style: Style::Line }],
        });
    }
    if t.has_header(&io::SPATIAL_HEADER) {
        let pts = io::spatial_from_table(&t).map_err(usage)?;
        let pick = |d: bool| pts.iter().filter(|p| p.detected == d).map(|p| (p.x_nm, p.y_nm)).collect::<Vec<_>>();
        return Ok(Plot {
            title: "ESR detection map".into(),
            x_label: "x (nm)".into(),
            y_label: "y (nm)".into(),
            series: vec![
                Series { label: "peak detected".into(), points: pick(true), y_err: None, style: Style::Markers },
                Series { label: "no peak".into(), points: pick(false), y_err: None, style: Style::Markers },
            ],
        });
    }
    Err(CliError::Usage(format!("{}: unrecognised CSV header {:?}", path.display(), t.header.join(","))))
}

pub fn plot(input: &Path, out: &Path) -> CliResult<()> {
    let is_json = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let p = if is_json { plot_json(input)? } else { plot_csv(input)? };
    io::write_atomic(out, p.render().as_bytes())
}
