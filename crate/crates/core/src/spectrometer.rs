//! Synthetic ESR-STM spectra.
//!
//! A resonance of the radical spin changes the tunneling magnetoresistance
//! seen by a spin-polarized tip, so each ESR line appears as a Lorentzian
//! bump in ΔI(f) whose amplitude scales with the tip polarization and with
//! the radical spin density under the tip. The field at the molecule is the
//! commanded field plus the tip stray field and the magnet hysteresis
//! offset; analyses downstream only see the commanded one.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{FrequencyGrid, Spectrum, SpectrumMeta};
use crate::spinham::{esr_lines, zeeman_line, SpinSystemConfig};
use crate::units::{Current, Frequency, MagneticField, Voltage};

/// Amplitude-modulation (chopping) frequency of the RF for lock-in detection.
pub const CHOP_FREQUENCY_HZ: f64 = 431.0;

/// Largest magnet hysteresis offset accepted, in T.
pub const MAX_HYSTERESIS_T: f64 = 0.010;

/// Lobes of the ligand π density.
pub const N_LOBES: u32 = 8;

/// baseline + A·(Γ/2)² / ((f − f_r)² + (Γ/2)²), with Γ the FWHM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lorentzian {
    /// Peak height above baseline, A.
    pub amplitude: f64,
    /// Hz.
    pub center: f64,
    /// Hz.
    pub fwhm: f64,
    /// A.
    pub baseline: f64,
}

impl Lorentzian {
    pub fn new(amplitude: Current, center: Frequency, fwhm: Frequency, baseline: Current) -> Result<Self> {
        if !(fwhm.0 > 0.0) {
            return Err(Error::Domain(format!("linewidth {} Hz must be positive", fwhm.0)));
        }
        Ok(Lorentzian {
            amplitude: amplitude.0,
            center: center.0,
            fwhm: fwhm.0,
            baseline: baseline.0,
        })
    }

    #[inline]
    pub fn eval(&self, f: f64) -> f64 {
        let hw2 = 0.25 * self.fwhm * self.fwhm;
        let d = f - self.center;
        self.baseline + self.amplitude * hw2 / (d * d + hw2)
    }
}

pub fn lorentzian(f: Frequency, shape: &Lorentzian) -> Current {
    Current(shape.eval(f.0))
}

/// Continuous-wave Bloch steady state on resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochPeak {
    /// Ω²T1T2 / (1 + Ω²T1T2).
    pub saturation: f64,
    /// Power-broadened FWHM, (1/πT2)·√(1 + Ω²T1T2).
    pub fwhm: Frequency,
}

/// `omega` is the angular Rabi rate (rad/s), `t1`, `t2` in seconds.
pub fn bloch_peak(omega: f64, t1: f64, t2: f64) -> Result<BlochPeak> {
    for (name, v) in [("omega", omega), ("t1", t1), ("t2", t2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("{name} = {v} must be positive and finite")));
        }
    }
    let drive = omega * omega * t1 * t2;
    Ok(BlochPeak {
        saturation: drive / (1.0 + drive),
        fwhm: Frequency((1.0 + drive).sqrt() / (PI * t2)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Lineshape {
    /// Fixed peak height (A) and FWHM (Hz).
    Phenomenological { a_peak: f64, fwhm: f64 },
    /// Saturating CW line: height `a_sat`·s, width from the Bloch steady state.
    Bloch { a_sat: f64, omega: f64, t1: f64, t2: f64 },
}

impl Lineshape {
    /// (height at full weight, FWHM in Hz).
    pub fn peak(&self) -> Result<(f64, f64)> {
        match *self {
            Lineshape::Phenomenological { a_peak, fwhm } => {
                if !(fwhm > 0.0) {
                    return Err(Error::Domain(format!("linewidth {fwhm} Hz must be positive")));
                }
                Ok((a_peak, fwhm))
            }
            Lineshape::Bloch { a_sat, omega, t1, t2 } => {
                let p = bloch_peak(omega, t1, t2)?;
                Ok((a_sat * p.saturation, p.fwhm.hz()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SweepDirection {
    #[default]
    Up,
    Down,
}

/// Tunnel junction and tip settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JunctionConfig {
    /// Setpoint current, A.
    pub i_set: f64,
    /// DC bias, V.
    pub v_dc: f64,
    /// RF amplitude at the junction, V.
    pub v_rf: f64,
    /// Tip spin polarization in [−1, 1].
    pub eta: f64,
    /// Tip stray field along z, T.
    pub b_tip: f64,
    /// Hysteresis offset for an upward sweep, T; a downward sweep flips it.
    pub delta_b_hyst: f64,
    pub sweep: SweepDirection,
    /// ΔI offset, A.
    pub baseline: f64,
    pub lineshape: Lineshape,
}

impl Default for JunctionConfig {
    fn default() -> Self {
        JunctionConfig {
            i_set: 10e-12,
            v_dc: -0.100,
            v_rf: 0.010,
            eta: 1.0,
            b_tip: 0.020,
            delta_b_hyst: 0.0,
            sweep: SweepDirection::Up,
            baseline: 0.0,
            lineshape: Lineshape::Phenomenological { a_peak: 0.3e-12, fwhm: 55e6 },
        }
    }
}

impl JunctionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.abs() <= 1.0) {
            return Err(Error::Domain(format!("tip polarization {} outside [-1, 1]", self.eta)));
        }
        if !(self.delta_b_hyst.abs() <= MAX_HYSTERESIS_T) {
            return Err(Error::Domain(format!(
                "hysteresis offset {} T exceeds ±{MAX_HYSTERESIS_T} T",
                self.delta_b_hyst
            )));
        }
        for (name, v) in [
            ("i_set", self.i_set),
            ("v_dc", self.v_dc),
            ("v_rf", self.v_rf),
            ("b_tip", self.b_tip),
            ("baseline", self.baseline),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} is not finite")));
            }
        }
        self.lineshape.peak().map(|_| ())
    }

    /// Signed hysteresis offset for the configured sweep direction.
    pub fn hysteresis_offset(&self) -> f64 {
        match self.sweep {
            SweepDirection::Up => self.delta_b_hyst,
            SweepDirection::Down => -self.delta_b_hyst,
        }
    }

    /// Field acting on the molecule for a commanded field.
    pub fn effective_field(&self, b_set: MagneticField) -> MagneticField {
        MagneticField(b_set.0 + self.hysteresis_offset() + self.b_tip)
    }
}

/// Ring-shaped π-radical density with eight angular lobes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoleculeMap {
    pub center_x_nm: f64,
    pub center_y_nm: f64,
    pub ring_radius_nm: f64,
    pub ring_width_nm: f64,
    /// 0 gives a uniform ring, 1 fully separated lobes.
    pub modulation_depth: f64,
}

impl Default for MoleculeMap {
    fn default() -> Self {
        MoleculeMap {
            center_x_nm: 0.0,
            center_y_nm: 0.0,
            ring_radius_nm: 0.45,
            ring_width_nm: 0.1,
            modulation_depth: 0.5,
        }
    }
}

impl MoleculeMap {
    pub fn validate(&self) -> Result<()> {
        if !(self.ring_width_nm > 0.0) || !(self.ring_radius_nm >= 0.0) {
            return Err(Error::Domain("ring radius must be ≥ 0 and width > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.modulation_depth) {
            return Err(Error::Domain(format!(
                "modulation depth {} outside [0, 1]",
                self.modulation_depth
            )));
        }
        if !self.center_x_nm.is_finite() || !self.center_y_nm.is_finite() {
            return Err(Error::Domain("molecule center is not finite".into()));
        }
        Ok(())
    }

    pub fn center(&self) -> Position {
        Position::new("center", self.center_x_nm, self.center_y_nm)
    }

    /// Maximum of the k-th lobe (k = 0..8), at angle k·π/4.
    pub fn lobe(&self, k: u32) -> Position {
        let theta = k as f64 * 2.0 * PI / N_LOBES as f64;
        Position::new(
            format!("lobe:{k}"),
            self.center_x_nm + self.ring_radius_nm * theta.cos(),
            self.center_y_nm + self.ring_radius_nm * theta.sin(),
        )
    }
}

/// Tip position in nm, with a label used in metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub label: String,
    pub x_nm: f64,
    pub y_nm: f64,
}

impl Position {
    pub fn new(label: impl Into<String>, x_nm: f64, y_nm: f64) -> Self {
        Position { label: label.into(), x_nm, y_nm }
    }

    /// Accepts `center`, `lobe`, `lobe:K` or `x,y` in nm.
    pub fn parse(s: &str, map: &MoleculeMap) -> Result<Self> {
        let s = s.trim();
        match s {
            "center" => return Ok(map.center()),
            "lobe" => return Ok(map.lobe(0)),
            _ => {}
        }
        if let Some(k) = s.strip_prefix("lobe:") {
            let k: u32 = k
                .parse()
                .map_err(|_| Error::Domain(format!("bad lobe index in {s:?}")))?;
            if k >= N_LOBES {
                return Err(Error::Domain(format!("lobe index {k} must be below {N_LOBES}")));
            }
            return Ok(map.lobe(k));
        }
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() == 2 {
            let x: f64 = parts[0].trim().parse().map_err(|_| bad_position(s))?;
            let y: f64 = parts[1].trim().parse().map_err(|_| bad_position(s))?;
            if x.is_finite() && y.is_finite() {
                return Ok(Position::new(format!("{x},{y}"), x, y));
            }
        }
        Err(bad_position(s))
    }
}

fn bad_position(s: &str) -> Error {
    Error::Domain(format!("position {s:?} is not center, lobe, lobe:K or x,y"))
}

/// exp(−(r − r0)²/2w²)·(1 − d + d·cos²(4θ)), peak 1 on a lobe.
pub fn radical_density(pos: &Position, map: &MoleculeMap) -> f64 {
    let dx = pos.x_nm - map.center_x_nm;
    let dy = pos.y_nm - map.center_y_nm;
    let r = dx.hypot(dy);
    let radial = (-(r - map.ring_radius_nm).powi(2) / (2.0 * map.ring_width_nm.powi(2))).exp();
    let theta = dy.atan2(dx);
    let c = (0.5 * N_LOBES as f64 * theta).cos();
    let angular = 1.0 - map.modulation_depth + map.modulation_depth * c * c;
    (radial * angular).clamp(0.0, 1.0)
}

/// Where resonance frequencies come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResonanceModel {
    /// f = g_S·(μ_B/h)·B + 6|J_ex|/h.
    #[default]
    ClosedForm,
    /// Diagonalize the spin Hamiltonian. `sector` keeps only lines of one Tb
    /// m_J (the Tb moment is blocked in one state); `None` keeps them all.
    SpinModel { sector: Option<i32>, intensity_floor: f64 },
}

/// Spin system, junction and molecule: everything but position, field and noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Instrument {
    pub spin: SpinSystemConfig,
    pub junction: JunctionConfig,
    pub molecule: MoleculeMap,
    pub resonance: ResonanceModel,
}

impl Instrument {
    pub fn validate(&self) -> Result<()> {
        self.spin.validate()?;
        self.junction.validate()?;
        self.molecule.validate()
    }

    /// (frequency in Hz, relative weight) of every line at a commanded field.
    pub fn resonances(&self, b_set: MagneticField) -> Result<Vec<(f64, f64)>> {
        let b_eff = self.junction.effective_field(b_set);
        match self.resonance {
            ResonanceModel::ClosedForm => {
                Ok(vec![(zeeman_line(self.spin.g_s, self.spin.f0(), b_eff).hz(), 1.0)])
            }
            ResonanceModel::SpinModel { sector, intensity_floor } => {
                let lines = esr_lines(&self.spin, b_eff, intensity_floor)?;
                Ok(lines
                    .into_iter()
                    .filter(|l| sector.is_none_or(|s| s == l.sector))
                    .map(|l| (l.freq.hz(), l.intensity / 0.25))
                    .collect())
            }
        }
    }
}

/// Additive white Gaussian noise on ΔI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// A.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { sigma: 0.03e-12, seed: 0 }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-task seed: base seed ⊕ hash(field, position). Stable across
/// platforms and releases.
pub fn derive_seed(seed: u64, b_set: MagneticField, pos: &Position) -> u64 {
    let h = splitmix64(
        b_set.0.to_bits() ^ splitmix64(pos.x_nm.to_bits() ^ splitmix64(pos.y_nm.to_bits())),
    );
    seed ^ h
}

/// ΔI(f) at one tip position and commanded field.
pub fn synthesize_spectrum(
    inst: &Instrument,
    pos: &Position,
    b_set: MagneticField,
    grid: &FrequencyGrid,
    noise: &NoiseModel,
) -> Result<Spectrum> {
    inst.validate()?;
    grid.validate()?;
    if !b_set.is_finite() {
        return Err(Error::Domain("commanded field is not finite".into()));
    }
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(Error::Domain(format!("noise sigma {} must be ≥ 0", noise.sigma)));
    }
    let j = &inst.junction;
    let (height, fwhm) = j.lineshape.peak()?;
    let weight = height * j.eta * radical_density(pos, &inst.molecule);
    let peaks: Vec<Lorentzian> = inst
        .resonances(b_set)?
        .into_iter()
        .map(|(f, w)| Lorentzian { amplitude: weight * w, center: f, fwhm, baseline: 0.0 })
        .collect();

    let freqs = grid.frequencies();
    let mut values: Vec<f64> = freqs
        .iter()
        .map(|&f| j.baseline + peaks.iter().map(|p| p.eval(f)).sum::<f64>())
        .collect();

    if noise.sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(noise.seed, b_set, pos));
        let normal = Normal::new(0.0, noise.sigma).expect("sigma checked above");
        for v in values.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    let meta = SpectrumMeta {
        b_set,
        position: pos.label.clone(),
        v_dc: Voltage(j.v_dc),
        i_set: Current(j.i_set),
        v_rf: Voltage(j.v_rf),
        seed: noise.seed,
    };
    Spectrum::new(freqs, values, meta)
}

/// Chopped lock-in detection modelled as ΔI = ⟨I_on⟩ − ⟨I_off⟩.
pub fn lockin_output(i_on: &[f64], i_off: &[f64]) -> Result<Current> {
    if i_on.is_empty() || i_on.len() != i_off.len() {
        return Err(Error::Domain(format!(
            "chopped traces must be non-empty and equally long ({} vs {})",
            i_on.len(),
            i_off.len()
        )));
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    Ok(Current(mean(i_on) - mean(i_off)))
}
