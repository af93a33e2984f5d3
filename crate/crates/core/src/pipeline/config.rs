use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfchain::{CalibrationConfig, TransmissionModel};
use crate::spectrometer::{Instrument, MoleculeMap, NoiseModel, Position};
use crate::spectrum::FrequencyGrid;
use crate::units::Frequency;

/// One magnet setting and the frequency window swept there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSweep {
    /// Commanded field, T.
    pub b_set: f64,
    /// Hz.
    pub f_start: f64,
    pub f_stop: f64,
    pub f_step: f64,
}

impl FieldSweep {
    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::with_step(Frequency(self.f_start), Frequency(self.f_stop), Frequency(self.f_step))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// White Gaussian σ on ΔI, A.
    pub sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { sigma: NoiseModel::default().sigma }
    }
}

impl NoiseConfig {
    pub fn model(&self, seed: u64) -> NoiseModel {
        NoiseModel { sigma: self.sigma, seed }
    }
}

/// Rectangular tip-position raster in nm, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl SpatialGrid {
    pub fn positions(&self) -> Result<Vec<Position>> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Domain("spatial grid must have at least one point per axis".into()));
        }
        let axis = |lo: f64, hi: f64, n: usize, i: usize| {
            if n == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                let x = axis(self.x_min, self.x_max, self.nx, i);
                let y = axis(self.y_min, self.y_max, self.ny, j);
                out.push(Position::new(format!("{x},{y}"), x, y));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpatialConfig {
    pub b_set: f64,
    pub sweep_start: f64,
    pub sweep_stop: f64,
    pub sweep_step: f64,
    /// Labels accepted by position parsing (`center`, `lobe:K`, `x,y`).
    pub positions: Vec<String>,
    /// Optional raster scanned in addition to `positions`.
    pub grid: Option<SpatialGrid>,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        SpatialConfig {
            b_set: 0.650,
            sweep_start: 18.0e9,
            sweep_stop: 19.5e9,
            sweep_step: 5e6,
            positions: vec!["lobe:0".into(), "lobe:2".into(), "center".into()],
            grid: None,
        }
    }
}

impl SpatialConfig {
    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::with_step(
            Frequency(self.sweep_start),
            Frequency(self.sweep_stop),
            Frequency(self.sweep_step),
        )
    }

    pub fn all_positions(&self, map: &MoleculeMap) -> Result<Vec<Position>> {
        let mut out = self
            .positions
            .iter()
            .map(|p| Position::parse(p, map))
            .collect::<Result<Vec<_>>>()?;
        if let Some(g) = &self.grid {
            out.extend(g.positions()?);
        }
        Ok(out)
    }
}

/// How the Zeeman line is weighted by the per-field σ(f_r).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Weighted unless some σ(f_r) is zero or non-finite.
    #[default]
    Auto,
    Weighted,
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Peak detection threshold in robust noise units.
    pub k_mad: f64,
    pub weighting: Weighting,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { k_mad: 5.0, weighting: Weighting::Auto }
    }
}

/// Closed interval center ± tol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub center: f64,
    pub tol: f64,
}

impl Envelope {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.center).abs() <= self.tol
    }
}

/// Pass/fail targets for a run; configuration, not code, so tests can tighten them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Envelopes {
    pub g: Envelope,
    /// GHz.
    pub f0_ghz: Envelope,
    /// MHz.
    pub fwhm_mhz: Envelope,
    /// Largest allowed max |V_RF/target − 1| on the verification sweep.
    pub flatness_max: f64,
    /// Largest allowed relative error of the arcsine V_RF estimate.
    pub vrf_rel_tol: f64,
}

impl Default for Envelopes {
    fn default() -> Self {
        Envelopes {
            g: Envelope { center: 1.84, tol: 0.12 },
            f0_ghz: Envelope { center: 1.8, tol: 1.0 },
            fwhm_mhz: Envelope { center: 55.0, tol: 5.0 },
            flatness_max: 0.03,
            vrf_rel_tol: 0.02,
        }
    }
}

/// Complete description of a simulated experiment. Every field has a
/// default; a document containing only `seed = 42` is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub instrument: Instrument,
    pub noise: NoiseConfig,
    /// Tip position used for the multi-field Zeeman series.
    pub position: String,
    pub sweeps: Vec<FieldSweep>,
    pub spatial: SpatialConfig,
    pub line: TransmissionModel,
    pub calibration: CalibrationConfig,
    pub analysis: AnalysisConfig,
    pub envelopes: Envelopes,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sweep = |b_set: f64, lo: f64, hi: f64| FieldSweep { b_set, f_start: lo, f_stop: hi, f_step: 5e6 };
        ExperimentConfig {
            seed: None,
            instrument: Instrument::default(),
            noise: NoiseConfig::default(),
            position: "lobe:0".into(),
            sweeps: vec![
                sweep(0.650, 18.0e9, 19.5e9),
                sweep(0.750, 20.6e9, 22.1e9),
                sweep(0.800, 21.9e9, 23.4e9),
            ],
            spatial: SpatialConfig::default(),
            line: TransmissionModel::default(),
            calibration: CalibrationConfig { rel_noise: 0.02, ..CalibrationConfig::default() },
            analysis: AnalysisConfig::default(),
            envelopes: Envelopes::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.instrument.validate()?;
        self.line.validate()?;
        self.calibration.validate()?;
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(Error::Domain(format!("noise sigma {} must be ≥ 0", self.noise.sigma)));
        }
        for s in &self.sweeps {
            if !(s.b_set >= 0.0 && s.b_set.is_finite()) {
                return Err(Error::Domain(format!("field {} T must be ≥ 0", s.b_set)));
            }
            s.grid()?;
        }
        if !(self.spatial.b_set >= 0.0 && self.spatial.b_set.is_finite()) {
            return Err(Error::Domain(format!("field {} T must be ≥ 0", self.spatial.b_set)));
        }
        self.spatial.frequency_grid()?;
        self.spatial.all_positions(&self.instrument.molecule)?;
        Position::parse(&self.position, &self.instrument.molecule)?;
        if !(self.analysis.k_mad > 0.0) {
            return Err(Error::Domain("k_mad must be positive".into()));
        }
        Ok(())
    }

    pub fn zeeman_position(&self) -> Result<Position> {
        Position::parse(&self.position, &self.instrument.molecule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_uses_defaults() {
        let c: ExperimentConfig = toml::from_str("seed = 42\n").unwrap();
        assert_eq!(c.seed, Some(42));
        assert_eq!(ExperimentConfig { seed: None, ..c }, ExperimentConfig::default());
    }

    #[test]
    fn default_round_trips_through_toml() {
        let mut c = ExperimentConfig { seed: Some(7), ..Default::default() };
        c.spatial.grid = Some(SpatialGrid { x_min: -1.0, x_max: 1.0, nx: 3, y_min: -1.0, y_max: 1.0, ny: 2 });
        let text = toml::to_string(&c).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        back.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("sede = 42\n").is_err());
    }

    #[test]
    fn sweeps_contain_their_resonances() {
        let c = ExperimentConfig::default();
        for s in &c.sweeps {
            let f = c.instrument.resonances(crate::units::MagneticField(s.b_set)).unwrap()[0].0;
            assert!(f > s.f_start + 0.1e9 && f < s.f_stop - 0.1e9, "{f}");
        }
    }

    #[test]
    fn grid_positions_cover_raster() {
        let g = SpatialGrid { x_min: -1.0, x_max: 1.0, nx: 3, y_min: 0.0, y_max: 0.0, ny: 1 };
        let p = g.positions().unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p[1].x_nm, 0.0);
    }
}
