//! RF line calibration through the junction itself.
//!
//! A sinusoidal RF voltage of amplitude V_RF samples the I(V) curve with the
//! arcsine distribution, so a sharp conductance step is broadened by ±V_RF
//! and the time-averaged current picks up a rectified part. Fitting the
//! broadening gives V_RF absolutely at one frequency and power; the
//! rectified current read by the lock-in then tracks V_RF through power and
//! frequency sweeps, which is enough to invert the line transmission and
//! pre-distort the source power for a flat V_RF.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitkit::{fit_arcsine_step, FitResult};

/// Source amplitude in V at 0 dBm: √(2·50 Ω·1 mW).
pub const SOURCE_AMPLITUDE_0DBM: f64 = 0.316_227_766_016_837_94;

const MIN_NODES: usize = 64;
const MAX_NODES: usize = 1 << 20;
const QUAD_REL_TOL: f64 = 1e-10;

/// Surface-state step: I(V) = c·V + G·w·softplus((V − V0)/w), so that
/// dI/dV = c + G·logistic((V − V0)/w). `width = 0` is a hard step.
///
/// Units are arbitrary but consistent: voltages in V, conductances in any
/// unit, currents in that unit times V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IVCurve {
    pub ohmic: f64,
    pub step: f64,
    pub onset: f64,
    pub width: f64,
}

impl Default for IVCurve {
    fn default() -> Self {
        IVCurve { ohmic: 1.0, step: 2.0, onset: -0.070, width: 0.005 }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl IVCurve {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("ohmic", self.ohmic), ("step", self.step), ("onset", self.onset)] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("IV curve {name} is not finite")));
            }
        }
        if !(self.width >= 0.0 && self.width.is_finite()) {
            return Err(Error::Domain(format!("step width {} must be ≥ 0", self.width)));
        }
        Ok(())
    }

    pub fn current(&self, v: f64) -> f64 {
        let d = v - self.onset;
        let ramp = if self.width > 0.0 { self.width * softplus(d / self.width) } else { d.max(0.0) };
        self.ohmic * v + self.step * ramp
    }

    pub fn conductance(&self, v: f64) -> f64 {
        let d = v - self.onset;
        let s = if self.width > 0.0 {
            logistic(d / self.width)
        } else if d > 0.0 {
            1.0
        } else if d < 0.0 {
            0.0
        } else {
            0.5
        };
        self.ohmic + self.step * s
    }
}

/// (1/π)∫₀^π f(center + amp·cos θ) dθ by Gauss–Chebyshev quadrature, doubling
/// the node count from 64 until successive estimates agree to 1e-10 of the
/// integrand scale.
pub fn arcsine_mean(f: impl Fn(f64) -> f64, center: f64, amp: f64) -> Result<f64> {
    if amp == 0.0 {
        return Ok(f(center));
    }
    let rule = |n: usize| {
        let mut sum = 0.0;
        let mut abs = 0.0;
        for k in 0..n {
            let x = ((2 * k + 1) as f64 * PI / (2 * n) as f64).cos();
            let v = f(center + amp * x);
            sum += v;
            abs += v.abs();
        }
        (sum / n as f64, abs / n as f64)
    };
    let (mut prev, _) = rule(MIN_NODES);
    let mut n = MIN_NODES;
    while n < MAX_NODES {
        n *= 2;
        let (cur, scale) = rule(n);
        if !cur.is_finite() {
            return Err(Error::Numeric("arcsine quadrature produced a non-finite value".into()));
        }
        if (cur - prev).abs() <= QUAD_REL_TOL * scale.max(f64::MIN_POSITIVE) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Numeric(format!("arcsine quadrature not converged at {MAX_NODES} nodes")))
}

fn check_vrf(v_rf: f64) -> Result<()> {
    if !(v_rf >= 0.0 && v_rf.is_finite()) {
        return Err(Error::Domain(format!("V_RF = {v_rf} V must be ≥ 0")));
    }
    Ok(())
}

/// u = (V0 − V)/V_RF clamped to [−1, 1] for the hard-step closed forms.
fn hard_u(iv: &IVCurve, v: f64, v_rf: f64) -> f64 {
    ((iv.onset - v) / v_rf).clamp(-1.0, 1.0)
}

/// Time-averaged current under RF: ⟨I(V_DC + V_RF·cos θ)⟩_θ.
pub fn arcsine_average(iv: &IVCurve, v_dc: f64, v_rf: f64) -> Result<f64> {
    check_vrf(v_rf)?;
    iv.validate()?;
    if v_rf == 0.0 {
        return Ok(iv.current(v_dc));
    }
    if iv.width == 0.0 {
        let u = (iv.onset - v_dc) / v_rf;
        let ramp = if u <= -1.0 {
            v_dc - iv.onset
        } else if u >= 1.0 {
            0.0
        } else {
            v_rf / PI * ((1.0 - u * u).sqrt() - u * u.acos())
        };
        return Ok(iv.ohmic * v_dc + iv.step * ramp);
    }
    arcsine_mean(|v| iv.current(v), v_dc, v_rf)
}

/// dI/dV convolved with the arcsine kernel 1/(π√(V_RF² − v²)).
pub fn broadened_didv(iv: &IVCurve, v: f64, v_rf: f64) -> Result<f64> {
    check_vrf(v_rf)?;
    iv.validate()?;
    if v_rf == 0.0 {
        return Ok(iv.conductance(v));
    }
    if iv.width == 0.0 {
        let u = hard_u(iv, v, v_rf);
        return Ok(iv.ohmic + iv.step * u.acos() / PI);
    }
    arcsine_mean(|x| iv.conductance(x), v, v_rf)
}

/// DC current change caused by switching the RF on: ⟨I⟩ − I(V_DC).
pub fn rectified_current(iv: &IVCurve, v_dc: f64, v_rf: f64) -> Result<f64> {
    Ok(arcsine_average(iv, v_dc, v_rf)? - iv.current(v_dc))
}

/// Fits the RF-off dI/dV trace to the step model, then V_RF alone on the
/// RF-on trace. Both traces share the bias grid `v` (V).
pub fn estimate_vrf(v: &[f64], didv_off: &[f64], didv_on: &[f64]) -> Result<FitResult> {
    fit_arcsine_step(v, didv_on, didv_off)
}

/// Recovers the step model from an [`estimate_vrf`] result.
pub fn fitted_iv(fit: &FitResult) -> Result<IVCurve> {
    let get = |n: &str| {
        fit.get(n).ok_or_else(|| Error::Analysis(format!("fit result has no parameter {n}")))
    };
    Ok(IVCurve { ohmic: get("ohmic")?, step: get("height")?, onset: get("v0")?, width: get("width")? })
}

/// Voltage transmission of the RF line, source to junction.
pub trait RfLine {
    /// Linear amplitude transmission at `f` Hz.
    fn transmission(&self, f: f64) -> Result<f64>;

    /// Frequency range (Hz) over which the model is valid.
    fn support(&self) -> (f64, f64);

    /// Junction amplitude for a source set to `p_dbm` at `f`.
    fn junction_vrf(&self, f: f64, p_dbm: f64) -> Result<f64> {
        Ok(SOURCE_AMPLITUDE_0DBM * self.transmission(f)? * 10f64.powf(p_dbm / 20.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TransmissionModel {
    /// T_dB(f) = offset − slope·(f − origin) + (ripple/2)·sin(2π(f − origin)/period + phase),
    /// with f − origin in GHz for the slope term. `ripple_db` is peak to peak.
    Parametric {
        offset_db: f64,
        slope_db_per_ghz: f64,
        ripple_db: f64,
        ripple_period_hz: f64,
        phase: f64,
        origin_hz: f64,
        support_lo_hz: f64,
        support_hi_hz: f64,
    },
    /// Linear interpolation through (Hz, linear T) samples.
    Tabulated { freqs_hz: Vec<f64>, values: Vec<f64> },
}

impl Default for TransmissionModel {
    /// About 25 mV at the junction for −5 dBm at 19 GHz, with 10 dB of ripple.
    fn default() -> Self {
        TransmissionModel::Parametric {
            offset_db: -11.7,
            slope_db_per_ghz: 1.0,
            ripple_db: 10.0,
            ripple_period_hz: 1.5e9,
            phase: 0.0,
            origin_hz: 18e9,
            support_lo_hz: 17e9,
            support_hi_hz: 26e9,
        }
    }
}

impl TransmissionModel {
    pub fn flat() -> Self {
        TransmissionModel::Parametric {
            offset_db: 0.0,
            slope_db_per_ghz: 0.0,
            ripple_db: 0.0,
            ripple_period_hz: 1e9,
            phase: 0.0,
            origin_hz: 18e9,
            support_lo_hz: 0.0,
            support_hi_hz: 1e12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TransmissionModel::Parametric {
                offset_db,
                slope_db_per_ghz,
                ripple_db,
                ripple_period_hz,
                phase,
                origin_hz,
                support_lo_hz,
                support_hi_hz,
            } => {
                let all = [offset_db, slope_db_per_ghz, ripple_db, ripple_period_hz, phase, origin_hz];
                if all.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain("transmission parameters must be finite".into()));
                }
                if !(*ripple_period_hz > 0.0) {
                    return Err(Error::Domain("ripple period must be positive".into()));
                }
                if !(support_lo_hz < support_hi_hz) {
                    return Err(Error::Domain("transmission support is empty".into()));
                }
                Ok(())
            }
            TransmissionModel::Tabulated { freqs_hz, values } => {
                if freqs_hz.len() < 2 || freqs_hz.len() != values.len() {
                    return Err(Error::Domain(
                        "tabulated transmission needs ≥ 2 (f, T) pairs of equal length".into(),
                    ));
                }
                if freqs_hz.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Domain("tabulated frequencies must increase strictly".into()));
                }
                if values.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                    return Err(Error::Domain("tabulated transmission must be positive".into()));
                }
                Ok(())
            }
        }
    }

    pub fn transmission_db(&self, f: f64) -> Result<f64> {
        Ok(20.0 * self.transmission(f)?.log10())
    }
}

fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (x - x0) / (x1 - x0);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

impl RfLine for TransmissionModel {
    fn transmission(&self, f: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        if !(f >= lo && f <= hi) {
            return Err(Error::Domain(format!(
                "{:.4} GHz outside the line model support {:.4}–{:.4} GHz",
                f / 1e9,
                lo / 1e9,
                hi / 1e9
            )));
        }
        match self {
            TransmissionModel::Parametric {
                offset_db,
                slope_db_per_ghz,
                ripple_db,
                ripple_period_hz,
                phase,
                origin_hz,
                ..
            } => {
                let df = f - origin_hz;
                let db = offset_db - slope_db_per_ghz * df / 1e9
                    + 0.5 * ripple_db * (2.0 * PI * df / ripple_period_hz + phase).sin();
                Ok(10f64.powf(db / 20.0))
            }
            TransmissionModel::Tabulated { freqs_hz, values } => Ok(interp_linear(freqs_hz, values, f)),
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            TransmissionModel::Parametric { support_lo_hz, support_hi_hz, .. } => {
                (*support_lo_hz, *support_hi_hz)
            }
            TransmissionModel::Tabulated { freqs_hz, .. } => (freqs_hz[0], freqs_hz[freqs_hz.len() - 1]),
        }
    }
}

/// A line whose source already applies a power table: the effective
/// transmission at a nominal source power P is T(f)·10^(P_table(f)/20).
pub struct Precompensated<'a> {
    pub line: &'a dyn RfLine,
    pub table: &'a PowerTable,
}

impl RfLine for Precompensated<'_> {
    fn transmission(&self, f: f64) -> Result<f64> {
        Ok(self.line.transmission(f)? * 10f64.powf(self.table.power_at(f)? / 20.0))
    }

    fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.line.support();
        (lo.max(self.table.band.0), hi.min(self.table.band.1))
    }
}

/// Junction amplitude versus source power at the reference frequency,
/// V_RF(P) = k·10^(P/20), plus the lock-in response that maps readings back
/// to V_RF through the fitted IV curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerScale {
    /// V per √mW at the reference frequency.
    pub k: f64,
    /// Lock-in reading per unit rectified current.
    pub lockin_gain: f64,
    pub iv: IVCurve,
    pub v_dc: f64,
}

impl PowerScale {
    pub fn vrf_at(&self, p_dbm: f64) -> f64 {
        self.k * 10f64.powf(p_dbm / 20.0)
    }

    pub fn lockin_of_vrf(&self, v_rf: f64) -> Result<f64> {
        Ok(self.lockin_gain * rectified_current(&self.iv, self.v_dc, v_rf)?)
    }

    /// Inverts the lock-in response by bisection; readings ≤ 0 map to 0.
    pub fn vrf_from_lockin(&self, reading: f64) -> Result<f64> {
        if !reading.is_finite() {
            return Err(Error::Domain("lock-in reading is not finite".into()));
        }
        if reading <= 0.0 {
            return Ok(0.0);
        }
        let mut hi = self.k.max(1e-3);
        let mut n = 0;
        while self.lockin_of_vrf(hi)? < reading {
            hi *= 2.0;
            n += 1;
            if n > 60 {
                return Err(Error::Numeric("lock-in reading beyond the response range".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.lockin_of_vrf(mid)? < reading {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Anchors V_RF(P) = k·10^(P/20) at (V_RF_known, P_known) and fits the
/// lock-in gain through the origin against the predicted rectified current
/// of the power sweep `samples` = (P_dBm, reading).
pub fn power_sweep_scale(
    samples: &[(f64, f64)],
    anchor: (f64, f64),
    iv: &IVCurve,
    v_dc: f64,
) -> Result<PowerScale> {
    if samples.len() < 3 {
        return Err(Error::Precondition(format!(
            "power sweep needs ≥ 3 samples, got {}",
            samples.len()
        )));
    }
    let (v_known, p_known) = anchor;
    if !(v_known > 0.0 && v_known.is_finite() && p_known.is_finite()) {
        return Err(Error::Domain(format!("anchor ({v_known} V, {p_known} dBm) is not usable")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.iter().any(|(p, r)| !p.is_finite() || !r.is_finite()) {
        return Err(Error::Domain("power sweep contains non-finite samples".into()));
    }
    if sorted.windows(2).any(|w| !(w[1].1 > w[0].1 && w[1].0 > w[0].0)) {
        return Err(Error::Analysis("lock-in amplitude is not monotone in source power".into()));
    }
    let k = v_known / 10f64.powf(p_known / 20.0);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for &(p, reading) in &sorted {
        let r = rectified_current(iv, v_dc, k * 10f64.powf(p / 20.0))?;
        sxy += r * reading;
        sxx += r * r;
    }
    if !(sxx > 0.0) {
        return Err(Error::Analysis("no rectified signal predicted over the power sweep".into()));
    }
    Ok(PowerScale { k, lockin_gain: sxy / sxx, iv: *iv, v_dc })
}

/// Simulated instrument: the true line and junction behind the readings,
/// with multiplicative Gaussian noise on every raw sample.
pub struct Bench<'a> {
    pub line: &'a dyn RfLine,
    pub iv: IVCurve,
    pub lockin_gain: f64,
    pub rel_noise: f64,
    pub rng: ChaCha8Rng,
}

impl<'a> Bench<'a> {
    pub fn new(line: &'a dyn RfLine, iv: IVCurve, lockin_gain: f64, rel_noise: f64, seed: u64) -> Result<Self> {
        iv.validate()?;
        if !(rel_noise >= 0.0 && rel_noise.is_finite()) {
            return Err(Error::Domain(format!("relative noise {rel_noise} must be ≥ 0")));
        }
        Ok(Bench { line, iv, lockin_gain, rel_noise, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    fn jitter(&mut self, x: f64) -> f64 {
        if self.rel_noise == 0.0 {
            return x;
        }
        let n = Normal::new(0.0, self.rel_noise).expect("noise checked in new");
        x * (1.0 + n.sample(&mut self.rng))
    }

    /// dI/dV over `v` with the RF on at (f, P), or off when `p_dbm` is None.
    pub fn didv_trace(&mut self, v: &[f64], rf: Option<(f64, f64)>) -> Result<Vec<f64>> {
        let v_rf = match rf {
            Some((f, p)) => self.line.junction_vrf(f, p)?,
            None => 0.0,
        };
        let clean = v.iter().map(|&x| broadened_didv(&self.iv, x, v_rf)).collect::<Result<Vec<_>>>()?;
        Ok(clean.into_iter().map(|y| self.jitter(y)).collect())
    }

    /// Mean of `averages` lock-in readings at (f, P) with V_DC applied.
    pub fn lockin(&mut self, f: f64, p_dbm: f64, v_dc: f64, averages: usize) -> Result<f64> {
        let v_rf = self.line.junction_vrf(f, p_dbm)?;
        let clean = self.lockin_gain * rectified_current(&self.iv, v_dc, v_rf)?;
        let n = averages.max(1);
        Ok((0..n).map(|_| self.jitter(clean)).sum::<f64>() / n as f64)
    }
}

/// Relative transmission T(f)/T(f_ref) on the sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionCurve {
    pub freqs_hz: Vec<f64>,
    pub t_rel: Vec<f64>,
    /// Readings under the dynamic-range floor; their T_rel is interpolated.
    pub flagged: Vec<bool>,
}

impl TransmissionCurve {
    pub fn at(&self, f: f64) -> f64 {
        interp_linear(&self.freqs_hz, &self.t_rel, f)
    }
}

/// Inclusive grid lo, lo + step, …, hi; the last point is exactly `hi`.
pub fn band_grid(band: (f64, f64), step: f64) -> Result<Vec<f64>> {
    let (lo, hi) = band;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!("band {lo}–{hi} Hz is empty")));
    }
    if !(step > 0.0) {
        return Err(Error::Domain(format!("step {step} Hz must be positive")));
    }
    let n = ((hi - lo) / step - 1e-9).ceil() as usize;
    let mut out: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    out.push(hi);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    /// Raw readings averaged per frequency.
    pub averages: usize,
    /// Half-width in grid points of the local quadratic smoother; 0 disables.
    pub smooth_half_window: usize,
    /// Readings at or below this lock-in value are flagged.
    pub floor: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { averages: 4, smooth_half_window: 5, floor: 0.0 }
    }
}

/// Least-squares quadratic through the points within `half` of each index,
/// evaluated at that index.
fn smooth_quadratic(xs: &[f64], ys: &[f64], half: usize) -> Vec<f64> {
    if half == 0 || xs.len() < 3 {
        return ys.to_vec();
    }
    let n = xs.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let x0 = xs[i];
            let scale = (xs[hi - 1] - xs[lo]).max(f64::MIN_POSITIVE);
            let mut m = [[0.0; 3]; 3];
            let mut b = [0.0; 3];
            for j in lo..hi {
                let t = (xs[j] - x0) / scale;
                let basis = [1.0, t, t * t];
                for r in 0..3 {
                    b[r] += basis[r] * ys[j];
                    for c in 0..3 {
                        m[r][c] += basis[r] * basis[c];
                    }
                }
            }
            let rows: Vec<Vec<f64>> = m.iter().map(|r| r.to_vec()).collect();
            let mat = crate::linalg::Matrix::from_rows(&rows).expect("3x3");
            match crate::linalg::solve_spd(&mat, &b) {
                Some(c) => c[0],
                None => ys[i],
            }
        })
        .collect()
}

/// Sweeps the band at constant source power and converts each lock-in
/// reading back to V_RF, giving T_rel(f) = V_RF(f) / (k·10^(P/20)).
pub fn measure_transmission(
    bench: &mut Bench<'_>,
    scale: &PowerScale,
    band: (f64, f64),
    step: f64,
    p_const: f64,
    opts: &SweepOptions,
) -> Result<TransmissionCurve> {
    let (lo, hi) = bench.line.support();
    if band.0 < lo || band.1 > hi {
        return Err(Error::Domain(format!(
            "band {:.3}–{:.3} GHz outside line support {:.3}–{:.3} GHz",
            band.0 / 1e9,
            band.1 / 1e9,
            lo / 1e9,
            hi / 1e9
        )));
    }
    let freqs = band_grid(band, step)?;
    let denom = scale.vrf_at(p_const);
    let mut t_rel = Vec::with_capacity(freqs.len());
    let mut flagged = Vec::with_capacity(freqs.len());
    for &f in &freqs {
        let reading = bench.lockin(f, p_const, scale.v_dc, opts.averages)?;
        let low = reading <= opts.floor;
        flagged.push(low);
        t_rel.push(if low { f64::NAN } else { scale.vrf_from_lockin(reading)? / denom });
    }
    let good: Vec<usize> = (0..freqs.len()).filter(|&i| !flagged[i]).collect();
    if good.is_empty() {
        return Err(Error::Analysis("every transmission reading is below the floor".into()));
    }
    let gx: Vec<f64> = good.iter().map(|&i| freqs[i]).collect();
    let gy: Vec<f64> = good.iter().map(|&i| t_rel[i]).collect();
    for i in 0..freqs.len() {
        if flagged[i] {
            t_rel[i] = if gx.len() == 1 { gy[0] } else { interp_linear(&gx, &gy, freqs[i]) };
        }
    }
    let t_rel = smooth_quadratic(&freqs, &t_rel, opts.smooth_half_window);
    if t_rel.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Analysis("recovered transmission is not positive everywhere".into()));
    }
    Ok(TransmissionCurve { freqs_hz: freqs, t_rel, flagged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub freq_hz: f64,
    pub power_dbm: f64,
    /// The required power exceeded the source maximum; the row holds the maximum.
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
    /// V.
    pub target_vrf: f64,
    /// Hz.
    pub band: (f64, f64),
}

impl PowerTable {
    pub fn validate(&self) -> Result<()> {
        if self.rows.len() < 2 {
            return Err(Error::Domain("power table needs ≥ 2 rows".into()));
        }
        if self.rows.windows(2).any(|w| !(w[1].freq_hz > w[0].freq_hz)) {
            return Err(Error::Domain("power table frequencies must increase strictly".into()));
        }
        if self.rows.iter().any(|r| !r.power_dbm.is_finite()) {
            return Err(Error::Domain("power table has non-finite powers".into()));
        }
        Ok(())
    }

    pub fn any_clipped(&self) -> bool {
        self.rows.iter().any(|r| r.clipped)
    }

    /// Source power at `f`, linear in dB between rows.
    pub fn power_at(&self, f: f64) -> Result<f64> {
        let first = self.rows[0].freq_hz;
        let last = self.rows[self.rows.len() - 1].freq_hz;
        if !(f >= first && f <= last) {
            return Err(Error::Domain(format!("{:.4} GHz outside the power table", f / 1e9)));
        }
        let xs: Vec<f64> = self.rows.iter().map(|r| r.freq_hz).collect();
        let ys: Vec<f64> = self.rows.iter().map(|r| r.power_dbm).collect();
        Ok(interp_linear(&xs, &ys, f))
    }
}

/// P(f) = 20·log10(target / (k·T_rel(f))), clipped at `source_max_dbm`.
pub fn compensate(t_rel: &TransmissionCurve, k: f64, target_vrf: f64, source_max_dbm: f64) -> Result<PowerTable> {
    if !(target_vrf > 0.0 && k > 0.0) {
        return Err(Error::Domain("target V_RF and scale k must be positive".into()));
    }
    if t_rel.t_rel.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Precondition("relative transmission must be positive on the band".into()));
    }
    let rows = t_rel
        .freqs_hz
        .iter()
        .zip(&t_rel.t_rel)
        .map(|(&f, &t)| {
            let p = 20.0 * (target_vrf / (k * t)).log10();
            PowerRow { freq_hz: f, power_dbm: p.min(source_max_dbm), clipped: p > source_max_dbm }
        })
        .collect();
    let band = (t_rel.freqs_hz[0], t_rel.freqs_hz[t_rel.freqs_hz.len() - 1]);
    Ok(PowerTable { rows, target_vrf, band })
}

/// Whole calibration protocol settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Hz.
    pub f_ref: f64,
    /// Source power for the arcsine V_RF estimate.
    pub estimate_power_dbm: f64,
    /// Bias grid for the dI/dV traces, V.
    pub bias_lo: f64,
    pub bias_hi: f64,
    pub bias_step: f64,
    pub sweep_power_lo_dbm: f64,
    pub sweep_power_hi_dbm: f64,
    pub sweep_power_step_db: f64,
    /// Constant source power for the transmission sweep.
    pub transmission_power_dbm: f64,
    /// Hz.
    pub band_lo: f64,
    pub band_hi: f64,
    pub band_step: f64,
    /// V.
    pub target_vrf: f64,
    pub source_max_dbm: f64,
    /// Multiplicative Gaussian noise on every raw reading.
    pub rel_noise: f64,
    pub sweep: SweepOptions,
    /// True junction behind the simulated readings.
    pub iv: IVCurve,
    pub lockin_gain: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            f_ref: 19e9,
            estimate_power_dbm: -5.0,
            bias_lo: -0.250,
            bias_hi: 0.110,
            bias_step: 0.000_25,
            sweep_power_lo_dbm: -15.0,
            sweep_power_hi_dbm: 5.0,
            sweep_power_step_db: 1.0,
            transmission_power_dbm: 5.0,
            band_lo: 18e9,
            band_hi: 25e9,
            band_step: 20e6,
            target_vrf: 0.005,
            source_max_dbm: 20.0,
            rel_noise: 0.0,
            sweep: SweepOptions::default(),
            iv: IVCurve::default(),
            lockin_gain: 1.0,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        self.iv.validate()?;
        if !(self.bias_step > 0.0 && self.bias_lo < self.bias_hi) {
            return Err(Error::Domain("bias grid is empty".into()));
        }
        if !(self.sweep_power_step_db > 0.0 && self.sweep_power_lo_dbm < self.sweep_power_hi_dbm) {
            return Err(Error::Domain("power sweep is empty".into()));
        }
        if !(self.band_step > 0.0 && self.band_lo < self.band_hi) {
            return Err(Error::Domain("calibration band is empty".into()));
        }
        if !(self.target_vrf > 0.0) {
            return Err(Error::Domain("target V_RF must be positive".into()));
        }
        if !(self.lockin_gain > 0.0) {
            return Err(Error::Domain("lock-in gain must be positive".into()));
        }
        Ok(())
    }

    pub fn bias_grid(&self) -> Vec<f64> {
        let n = ((self.bias_hi - self.bias_lo) / self.bias_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.bias_lo + self.bias_step * i as f64).collect()
    }

    pub fn power_grid(&self) -> Vec<f64> {
        let n = ((self.sweep_power_hi_dbm - self.sweep_power_lo_dbm) / self.sweep_power_step_db + 1e-9)
            .floor() as usize;
        (0..=n).map(|i| self.sweep_power_lo_dbm + self.sweep_power_step_db * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// V per √mW at the reference frequency.
    pub k: f64,
    pub vrf_fit: FitResult,
    pub scale: PowerScale,
    pub transmission: TransmissionCurve,
    pub power_table: PowerTable,
    /// max |V_RF/target − 1| on the verification grid.
    pub residual_flatness: f64,
    /// (Hz, true junction V_RF) on the verification grid.
    pub verification: Vec<(f64, f64)>,
}

/// Midpoints of the table grid, so verification never lands on a fit point.
pub fn verification_grid(table: &PowerTable) -> Vec<f64> {
    table.rows.windows(2).map(|w| 0.5 * (w[0].freq_hz + w[1].freq_hz)).collect()
}

/// Junction V_RF delivered through `line` when the source follows `table`.
pub fn verify(line: &dyn RfLine, table: &PowerTable) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut worst: f64 = 0.0;
    let mut out = Vec::new();
    for f in verification_grid(table) {
        let v = line.junction_vrf(f, table.power_at(f)?)?;
        worst = worst.max((v / table.target_vrf - 1.0).abs());
        out.push((f, v));
    }
    Ok((worst, out))
}

/// Runs the full protocol against a simulated bench built on `line`:
/// arcsine V_RF estimate at (f_ref, P_est), power sweep, constant-power
/// transmission sweep, compensation and verification.
pub fn calibrate(line: &dyn RfLine, cfg: &CalibrationConfig, seed: u64) -> Result<CalibrationResult> {
    cfg.validate()?;
    let (lo, hi) = line.support();
    if cfg.band_lo < lo || cfg.band_hi > hi || cfg.f_ref < lo || cfg.f_ref > hi {
        return Err(Error::Domain(format!(
            "calibration band {:.3}–{:.3} GHz outside line support {:.3}–{:.3} GHz",
            cfg.band_lo / 1e9,
            cfg.band_hi / 1e9,
            lo / 1e9,
            hi / 1e9
        )));
    }
    let mut bench = Bench::new(line, cfg.iv, cfg.lockin_gain, cfg.rel_noise, seed)?;

    let v = cfg.bias_grid();
    let off = bench.didv_trace(&v, None)?;
    let on = bench.didv_trace(&v, Some((cfg.f_ref, cfg.estimate_power_dbm)))?;
    let vrf_fit = estimate_vrf(&v, &off, &on)?;
    let iv = fitted_iv(&vrf_fit)?;
    let v_est = vrf_fit.get("v_rf").expect("step fit names v_rf");
    let v_dc = iv.onset;

    let samples = cfg
        .power_grid()
        .into_iter()
        .map(|p| Ok((p, bench.lockin(cfg.f_ref, p, v_dc, cfg.sweep.averages)?)))
        .collect::<Result<Vec<_>>>()?;
    let scale = power_sweep_scale(&samples, (v_est, cfg.estimate_power_dbm), &iv, v_dc)?;

    let transmission = measure_transmission(
        &mut bench,
        &scale,
        (cfg.band_lo, cfg.band_hi),
        cfg.band_step,
        cfg.transmission_power_dbm,
        &cfg.sweep,
    )?;
    let power_table = compensate(&transmission, scale.k, cfg.target_vrf, cfg.source_max_dbm)?;
    let (residual_flatness, verification) = verify(line, &power_table)?;
    Ok(CalibrationResult {
        k: scale.k,
        vrf_fit,
        scale,
        transmission,
        power_table,
        residual_flatness,
        verification,
    })
}
