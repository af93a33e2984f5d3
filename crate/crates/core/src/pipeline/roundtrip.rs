use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rfchain::{calibrate, PowerTable, RfLine};
use crate::spectrometer::{synthesize_spectrum, CHOP_FREQUENCY_HZ};
use crate::spectrum::Spectrum;
use crate::units::{energy_resolution, EnergyResolution, Frequency, MagneticField};

use super::config::ExperimentConfig;
use super::spatial::{spatial_scan, SpatialPoint};
use super::zeeman::{zeeman_analysis, ZeemanResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub version: String,
    /// Filled by front ends; excluded from determinism comparisons.
    pub timestamp: Option<String>,
}

/// Conventions every number in a report depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub lockin_scaling: String,
    pub chop_frequency_hz: f64,
    pub linewidth: String,
    pub f0_exchange: String,
    pub zeeman_weighting: String,
    pub field_seen_by_analysis: String,
}

impl Conventions {
    pub fn standard(zeeman_weighting: &str) -> Self {
        Conventions {
            lockin_scaling: "mean difference <I_on> - <I_off>, not rms".into(),
            chop_frequency_hz: CHOP_FREQUENCY_HZ,
            linewidth: "FWHM; energy resolution reported as h*FWHM and h*FWHM/2".into(),
            f0_exchange: "f0 = 6|J_ex|/h (Ising doublet |m_J| = 6); magnitude only".into(),
            zeeman_weighting: zeeman_weighting.into(),
            field_seen_by_analysis: "commanded B_set; tip field and hysteresis are not corrected".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    /// V per √mW at the reference frequency.
    pub k: f64,
    /// Arcsine estimate of V_RF at the reference setting, V.
    pub v_rf_estimate: f64,
    #[serde(deserialize_with = "crate::serde_nan::f64")]
    pub v_rf_sigma: f64,
    /// Simulated truth behind the estimate, V.
    pub v_rf_true: f64,
    pub v_rf_rel_error: f64,
    pub flatness: f64,
    pub clipped_rows: usize,
    pub power_table: PowerTable,
}

/// One pass/fail comparison against a configured envelope [lo, hi].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// `None` when the stage producing it did not run.
    pub value: Option<f64>,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, value: Option<f64>, lo: f64, hi: f64) -> Self {
        let pass = value.is_some_and(|v| v >= lo && v <= hi);
        Check { name: name.into(), value, lo, hi, pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Input echo with the seed that was used; rerunning it reproduces the report.
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub conventions: Conventions,
    pub stages: Vec<StageRecord>,
    pub calibration: Option<CalibrationSummary>,
    pub zeeman: Option<ZeemanResult>,
    pub spatial: Option<Vec<SpatialPoint>>,
    /// From the mean fitted linewidth of the Zeeman series.
    pub energy_resolution: Option<EnergyResolution>,
    pub flags: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl ExperimentReport {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const STAGES: [&str; 4] = ["calibration", "synthesis", "zeeman", "spatial"];

/// The Zeeman series at the configured position; per-field seeds are
/// derived inside the synthesizer, so the result is order independent.
pub fn synthesize_series(config: &ExperimentConfig, seed: u64) -> Result<Vec<Spectrum>> {
    let pos = config.zeeman_position()?;
    let noise = config.noise.model(seed);
    config
        .sweeps
        .par_iter()
        .map(|s| synthesize_spectrum(&config.instrument, &pos, MagneticField(s.b_set), &s.grid()?, &noise))
        .collect()
}

/// Calibrate, synthesize the field series, fit the Zeeman line and scan
/// the configured positions. A failing stage is recorded and every later
/// stage is skipped; only an invalid configuration is an error.
pub fn roundtrip_experiment(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport> {
    config.validate()?;
    let mut config = config.clone();
    config.seed = Some(seed);
    let env = config.envelopes;

    let mut stages: Vec<StageRecord> = Vec::new();
    let mut flags = Vec::new();
    let mut halted = false;
    let record = |stages: &mut Vec<StageRecord>, name: &str, r: std::result::Result<Option<String>, String>| {
        let (status, message) = match r {
            Ok(msg) => (if msg.is_some() { StageStatus::Skipped } else { StageStatus::Ok }, msg),
            Err(e) => (StageStatus::Failed, Some(e)),
        };
        stages.push(StageRecord { name: name.into(), status, message });
    };

    let calibration = match calibrate(&config.line, &config.calibration, seed) {
        Ok(c) => {
            let v_true = config.line.junction_vrf(config.calibration.f_ref, config.calibration.estimate_power_dbm)?;
            let v_est = c.vrf_fit.get("v_rf").expect("named");
            record(&mut stages, STAGES[0], Ok(None));
            Some(CalibrationSummary {
                k: c.k,
                v_rf_estimate: v_est,
                v_rf_sigma: c.vrf_fit.sigma("v_rf").expect("named"),
                v_rf_true: v_true,
                v_rf_rel_error: v_est / v_true - 1.0,
                flatness: c.residual_flatness,
                clipped_rows: c.power_table.rows.iter().filter(|r| r.clipped).count(),
                power_table: c.power_table,
            })
        }
        Err(e) => {
            record(&mut stages, STAGES[0], Err(e.to_string()));
            halted = true;
            None
        }
    };

    let spectra = if halted {
        None
    } else {
        match synthesize_series(&config, seed) {
            Ok(s) => {
                record(&mut stages, STAGES[1], Ok(None));
                Some(s)
            }
            Err(e) => {
                record(&mut stages, STAGES[1], Err(e.to_string()));
                halted = true;
                None
            }
        }
    };

    let mut zeeman = None;
    if let Some(spectra) = &spectra {
        let any_peak = spectra
            .iter()
            .map(|s| crate::fitkit::detect_peak(s, config.analysis.k_mad))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .any(|g| g.is_some());
        if !any_peak {
            flags.push("no peaks detected".into());
            record(&mut stages, STAGES[2], Ok(Some("skipped: no peaks detected".into())));
        } else {
            match zeeman_analysis(spectra, config.analysis.k_mad, config.analysis.weighting) {
                Ok(z) => {
                    record(&mut stages, STAGES[2], Ok(None));
                    flags.extend(z.warnings.iter().cloned());
                    zeeman = Some(z);
                }
                Err(e) => {
                    record(&mut stages, STAGES[2], Err(e.to_string()));
                    halted = true;
                }
            }
        }
    }

    let spatial = if halted {
        None
    } else {
        let sc = &config.spatial;
        let run = || -> Result<Vec<SpatialPoint>> {
            spatial_scan(
                &sc.all_positions(&config.instrument.molecule)?,
                MagneticField(sc.b_set),
                &sc.frequency_grid()?,
                &config.instrument,
                &config.noise.model(seed),
                config.analysis.k_mad,
            )
        };
        match run() {
            Ok(p) => {
                record(&mut stages, STAGES[3], Ok(None));
                Some(p)
            }
            Err(e) => {
                record(&mut stages, STAGES[3], Err(e.to_string()));
                None
            }
        }
    };
    for name in STAGES {
        if !stages.iter().any(|s| s.name == name) {
            stages.push(StageRecord {
                name: name.into(),
                status: StageStatus::Skipped,
                message: Some("halted by an earlier stage failure".into()),
            });
        }
    }

    let mean_fwhm = zeeman
        .as_ref()
        .map(|z| z.peaks.iter().map(|p| p.fwhm).sum::<f64>() / z.peaks.len() as f64);
    let energy = mean_fwhm.and_then(|w| energy_resolution(Frequency(w)).ok());

    let fraction = |pts: &[SpatialPoint], lobe: bool| -> Option<f64> {
        let sel: Vec<&SpatialPoint> = pts
            .iter()
            .filter(|p| if lobe { p.label.starts_with("lobe") } else { p.label == "center" })
            .collect();
        if sel.is_empty() {
            return None;
        }
        let ok = sel.iter().filter(|p| p.detected == lobe).count();
        Some(ok as f64 / sel.len() as f64)
    };
    let g = &env.g;
    let f0 = &env.f0_ghz;
    let w = &env.fwhm_mhz;
    let mut checks = vec![
        Check::new("g", zeeman.as_ref().map(|z| z.g), g.center - g.tol, g.center + g.tol),
        Check::new("f0_ghz", zeeman.as_ref().map(|z| z.f0 / 1e9), f0.center - f0.tol, f0.center + f0.tol),
        Check::new("fwhm_mhz", mean_fwhm.map(|x| x / 1e6), w.center - w.tol, w.center + w.tol),
        Check::new("flatness", calibration.as_ref().map(|c| c.flatness), 0.0, env.flatness_max),
        Check::new(
            "vrf_rel_error",
            calibration.as_ref().map(|c| c.v_rf_rel_error),
            -env.vrf_rel_tol,
            env.vrf_rel_tol,
        ),
    ];
    if let Some(pts) = &spatial {
        if let Some(v) = fraction(pts, true) {
            checks.push(Check::new("spatial_lobes_detected", Some(v), 1.0, 1.0));
        }
        if let Some(v) = fraction(pts, false) {
            checks.push(Check::new("spatial_center_absent", Some(v), 1.0, 1.0));
        }
    }
    let passed = checks.iter().all(|c| c.pass) && stages.iter().all(|s| s.status == StageStatus::Ok);
    let weighting = zeeman.as_ref().map_or("not run".to_string(), |z| z.weighting.clone());

    Ok(ExperimentReport {
        config,
        provenance: Provenance { seed, version: env!("CARGO_PKG_VERSION").into(), timestamp: None },
        conventions: Conventions::standard(&weighting),
        stages,
        calibration,
        zeeman,
        spatial,
        energy_resolution: energy,
        flags,
        checks,
        passed,
    })
}
