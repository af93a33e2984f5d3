//! Angular-momentum operators, the coupled radical–Tb spin Hamiltonian and
//! the ESR lines it predicts.
//!
//! Product basis ordering is |m_S⟩ ⊗ |m_J⟩ with each factor running
//! m = j, j−1, …, −j. The field is out of plane (z only), so every operator
//! used here has a real representation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, Matrix};
use crate::units::{
    Energy, Frequency, MagneticField, BOHR_MAGNETON, BOHR_MAGNETON_OVER_H, PLANCK,
};

/// Dense operator on a spin Hilbert space. Hamiltonians are in joules.
pub type OperatorMatrix = Matrix;

/// Radical spin quantum number.
pub const RADICAL_SPIN: f64 = 0.5;
/// Tb³⁺ total angular momentum.
pub const TB_J: f64 = 6.0;
/// |m_J| of the Ising ground doublet.
pub const TB_DOUBLET_MJ: f64 = 6.0;

/// A single angular momentum j with 2j+1 states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinSpace {
    two_j: u32,
}

impl SpinSpace {
    pub fn new(j: f64) -> Result<Self> {
        let two_j = 2.0 * j;
        if !two_j.is_finite() || two_j < 0.0 || (two_j - two_j.round()).abs() > 1e-12 {
            return Err(Error::Domain(format!("j = {j} is not a non-negative half-integer")));
        }
        Ok(SpinSpace { two_j: two_j.round() as u32 })
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.two_j as usize + 1
    }

    /// m for basis index i (m = j − i).
    pub fn m(&self, i: usize) -> f64 {
        self.j() - i as f64
    }

    pub fn m_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m(i)).collect()
    }
}

/// Spin operators for one angular momentum.
#[derive(Debug, Clone)]
pub struct LadderOperators {
    pub space: SpinSpace,
    pub jz: OperatorMatrix,
    pub jplus: OperatorMatrix,
    pub jminus: OperatorMatrix,
    pub jx: OperatorMatrix,
}

impl LadderOperators {
    /// Jy² = −(J+ − J−)²/4, which is real even though Jy is not.
    pub fn jy_squared(&self) -> OperatorMatrix {
        let d = &self.jplus - &self.jminus;
        (&d * &d).scale(-0.25)
    }

    /// Jx² + Jy² + Jz².
    pub fn casimir(&self) -> OperatorMatrix {
        let jx2 = &self.jx * &self.jx;
        let jz2 = &self.jz * &self.jz;
        &(&jx2 + &self.jy_squared()) + &jz2
    }
}

pub fn ladder_matrices(j: f64) -> Result<LadderOperators> {
    let space = SpinSpace::new(j)?;
    let n = space.dim();
    let jz = OperatorMatrix::from_diag(&space.m_values());
    let mut jplus = OperatorMatrix::zeros(n);
    // J+|m⟩ = √(j(j+1) − m(m+1)) |m+1⟩, and |m+1⟩ sits one index lower.
    for i in 1..n {
        let m = space.m(i);
        jplus[(i - 1, i)] = (space.j() * (space.j() + 1.0) - m * (m + 1.0)).sqrt();
    }
    let jminus = jplus.transpose();
    let jx = (&jplus + &jminus).scale(0.5);
    Ok(LadderOperators { space, jz, jplus, jminus, jx })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeForm {
    /// J_ex·Sz·Jz only.
    #[default]
    Ising,
    /// Full J_ex·S·J.
    Heisenberg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    /// 2 × 13 = 26 states.
    #[default]
    Full,
    /// Tb restricted to the m_J = ±6 doublet: 4 states.
    Projected,
}

/// Radical (S = 1/2) exchange-coupled to Tb (J = 6).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinSystemConfig {
    /// Radical g-factor.
    pub g_s: f64,
    /// Tb Landé factor.
    pub g_j: f64,
    /// Exchange energy in J; negative is ferromagnetic.
    pub j_ex: f64,
    /// Coefficient of the −|A|·Jz² anisotropy term, in J.
    pub anisotropy: f64,
    pub exchange_form: ExchangeForm,
    pub mode: ModelMode,
}

impl Default for SpinSystemConfig {
    fn default() -> Self {
        SpinSystemConfig {
            g_s: 1.84,
            g_j: 1.5,
            // 6|J_ex|/h = 1.8 GHz, ferromagnetic sign.
            j_ex: -PLANCK * 0.3e9,
            anisotropy: PLANCK * 1000e9,
            exchange_form: ExchangeForm::Ising,
            mode: ModelMode::Full,
        }
    }
}

impl SpinSystemConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("g_s", self.g_s),
            ("g_j", self.g_j),
            ("j_ex", self.j_ex),
            ("anisotropy", self.anisotropy),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self.mode {
            ModelMode::Full => 26,
            ModelMode::Projected => 4,
        }
    }

    /// Zero-field intercept implied by the exchange, 6|J_ex|/h.
    pub fn f0(&self) -> Frequency {
        f0_from_exchange(Energy(self.j_ex))
    }
}

/// Spin operators of the two subsystems embedded in the product space.
struct ProductOperators {
    sz: Matrix,
    sx: Matrix,
    splus: Matrix,
    sminus: Matrix,
    jz: Matrix,
    jplus: Matrix,
    jminus: Matrix,
    identity_s: Matrix,
    identity_j: Matrix,
}

fn product_operators(mode: ModelMode) -> ProductOperators {
    let s = ladder_matrices(RADICAL_SPIN).expect("S = 1/2 is valid");
    let (jz, jplus, jminus) = match mode {
        ModelMode::Full => {
            let j = ladder_matrices(TB_J).expect("J = 6 is valid");
            (j.jz, j.jplus, j.jminus)
        }
        // Ladder operators leave the {+6, −6} doublet, so they vanish here.
        ModelMode::Projected => (
            Matrix::from_diag(&[TB_DOUBLET_MJ, -TB_DOUBLET_MJ]),
            Matrix::zeros(2),
            Matrix::zeros(2),
        ),
    };
    let identity_j = Matrix::identity(jz.dim());
    ProductOperators {
        sz: s.jz,
        sx: s.jx,
        splus: s.jplus,
        sminus: s.jminus,
        jz,
        jplus,
        jminus,
        identity_s: Matrix::identity(2),
        identity_j,
    }
}

/// m_J for each product-basis index.
fn tb_m_values(mode: ModelMode) -> Vec<f64> {
    let mj: Vec<f64> = match mode {
        ModelMode::Full => SpinSpace::new(TB_J).unwrap().m_values(),
        ModelMode::Projected => vec![TB_DOUBLET_MJ, -TB_DOUBLET_MJ],
    };
    [mj.clone(), mj].concat()
}

/// H = μ_B·B·(g_S·Sz + g_J·Jz) + J_ex·(Sz·Jz [+ ½(S+J− + S−J+)]) − |A|·Jz².
pub fn build_hamiltonian(cfg: &SpinSystemConfig, b: MagneticField) -> Result<OperatorMatrix> {
    cfg.validate()?;
    if !b.is_finite() {
        return Err(Error::Domain(format!("field {} T is not finite", b.0)));
    }
    let ops = product_operators(cfg.mode);
    let mu_b_b = BOHR_MAGNETON * b.tesla();

    let zeeman_s = ops.sz.kron(&ops.identity_j).scale(mu_b_b * cfg.g_s);
    let zeeman_j = ops.identity_s.kron(&ops.jz).scale(mu_b_b * cfg.g_j);
    let mut exchange = ops.sz.kron(&ops.jz);
    if cfg.exchange_form == ExchangeForm::Heisenberg {
        let flip = &ops.splus.kron(&ops.jminus) + &ops.sminus.kron(&ops.jplus);
        exchange = &exchange + &flip.scale(0.5);
    }
    let jz2 = &ops.jz * &ops.jz;
    let anis = ops.identity_s.kron(&jz2).scale(-cfg.anisotropy.abs());

    let h = &(&(&zeeman_s + &zeeman_j) + &exchange.scale(cfg.j_ex)) + &anis;
    Ok(h)
}

/// One allowed radical spin-flip transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsrLine {
    pub freq: Frequency,
    /// |⟨a|Sx⊗1|b⟩|², at most 1/4.
    pub intensity: f64,
    /// Tb m_J of the pair, rounded ⟨Jz⟩ of the lower level.
    pub sector: i32,
    pub lower: usize,
    pub upper: usize,
}

/// Transitions with |⟨a|Sx|b⟩|² above `intensity_floor`, sorted by frequency.
pub fn esr_lines(
    cfg: &SpinSystemConfig,
    b: MagneticField,
    intensity_floor: f64,
) -> Result<Vec<EsrLine>> {
    if !(intensity_floor > 0.0 && intensity_floor < 0.25) {
        return Err(Error::Precondition(format!(
            "intensity floor {intensity_floor} must lie in (0, 0.25)"
        )));
    }
    let h = build_hamiltonian(cfg, b)?;
    let eig = eigh(&h)?;
    let ops = product_operators(cfg.mode);
    let sx = ops.sx.kron(&ops.identity_j);
    let mj = tb_m_values(cfg.mode);

    let n = h.dim();
    let vectors: Vec<Vec<f64>> = (0..n).map(|k| eig.vector(k)).collect();
    let sx_v: Vec<Vec<f64>> = vectors.iter().map(|v| sx.mul_vec(v)).collect();
    // Splittings at or below this are degeneracies, not transitions.
    let e_floor = 1e-10 * h.max_abs();

    let mut lines = Vec::new();
    for (a, va) in vectors.iter().enumerate() {
        for (bb, sx_b) in sx_v.iter().enumerate().skip(a + 1) {
            let de = eig.values[bb] - eig.values[a];
            if de <= e_floor {
                continue;
            }
            let elem: f64 = va.iter().zip(sx_b).map(|(x, y)| x * y).sum();
            let intensity = elem * elem;
            if intensity <= intensity_floor {
                continue;
            }
            let jz_expect: f64 =
                va.iter().zip(&mj).map(|(c, m)| c * c * m).sum();
            lines.push(EsrLine {
                freq: Frequency(de / PLANCK),
                intensity: intensity.min(0.25),
                sector: jz_expect.round() as i32,
                lower: a,
                upper: bb,
            });
        }
    }
    lines.sort_by(|x, y| x.freq.0.total_cmp(&y.freq.0));
    Ok(lines)
}

/// f = g·(μ_B/h)·B + f0, the Δm_S = ±1 transition frequency.
pub fn zeeman_line(g: f64, f0: Frequency, b: MagneticField) -> Frequency {
    Frequency(g * BOHR_MAGNETON_OVER_H * b.tesla() + f0.hz())
}

/// f0 = 6|J_ex|/h (Ising doublet convention; the sign is not encoded).
pub fn f0_from_exchange(j_ex: Energy) -> Frequency {
    Frequency(j_ex.joules().abs() * TB_DOUBLET_MJ / PLANCK)
}

/// |J_ex| = h·f0/6.
pub fn exchange_from_f0(f0: Frequency) -> Energy {
    Energy(PLANCK * f0.hz().abs() / TB_DOUBLET_MJ)
}
