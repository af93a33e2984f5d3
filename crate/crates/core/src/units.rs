//! Physical constants and the handful of quantity kinds used across the crate.
//!
//! Every quantity is stored in SI base units (Hz, T, A, V, J). GHz, mV, pA and
//! eV only appear through the named constructors and accessors.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};

/// Planck constant (J·s), CODATA 2018 exact value.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Bohr magneton (J/T), CODATA 2018.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;

/// Elementary charge (C), i.e. joules per electronvolt.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// μ_B / h in Hz/T.
pub const BOHR_MAGNETON_OVER_H: f64 = BOHR_MAGNETON / PLANCK;

/// Grouped read-only view of the constants, handy for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysConstants {
    pub h: f64,
    pub mu_b: f64,
    /// μ_B/h in GHz/T.
    pub mu_b_over_h_ghz_per_t: f64,
}

pub const CONSTANTS: PhysConstants = PhysConstants {
    h: PLANCK,
    mu_b: BOHR_MAGNETON,
    mu_b_over_h_ghz_per_t: BOHR_MAGNETON_OVER_H * 1e-9,
};

macro_rules! quantity {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub f64);

        impl $name {
            #[inline]
            pub const fn si(self) -> f64 {
                self.0
            }

            #[inline]
            pub fn is_finite(self) -> bool {
                self.0.is_finite()
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, rhs: $name) -> $name {
                $name(self.0 + rhs.0)
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, rhs: $name) -> $name {
                $name(self.0 - rhs.0)
            }
        }

        impl Neg for $name {
            type Output = $name;
            fn neg(self) -> $name {
                $name(-self.0)
            }
        }
    };
}

quantity!(
    /// Frequency in Hz.
    Frequency
);
quantity!(
    /// Magnetic field in T (out-of-plane component).
    MagneticField
);
quantity!(
    /// Current in A.
    Current
);
quantity!(
    /// Voltage in V.
    Voltage
);
quantity!(
    /// Energy in J.
    Energy
);
quantity!(
    /// RF source power in dBm.
    PowerDbm
);

impl Frequency {
    pub fn from_ghz(ghz: f64) -> Self {
        Frequency(ghz * 1e9)
    }

    pub fn from_mhz(mhz: f64) -> Self {
        Frequency(mhz * 1e6)
    }

    pub fn hz(self) -> f64 {
        self.0
    }

    pub fn ghz(self) -> f64 {
        self.0 * 1e-9
    }

    pub fn mhz(self) -> f64 {
        self.0 * 1e-6
    }
}

impl MagneticField {
    pub fn from_mt(mt: f64) -> Self {
        MagneticField(mt * 1e-3)
    }

    pub fn tesla(self) -> f64 {
        self.0
    }
}

impl Current {
    pub fn from_pa(pa: f64) -> Self {
        Current(pa * 1e-12)
    }

    pub fn amps(self) -> f64 {
        self.0
    }

    pub fn pa(self) -> f64 {
        self.0 * 1e12
    }
}

impl Voltage {
    pub fn from_mv(mv: f64) -> Self {
        Voltage(mv * 1e-3)
    }

    pub fn volts(self) -> f64 {
        self.0
    }

    pub fn mv(self) -> f64 {
        self.0 * 1e3
    }
}

impl Energy {
    pub fn from_ev(ev: f64) -> Self {
        Energy(ev * ELEMENTARY_CHARGE)
    }

    pub fn joules(self) -> f64 {
        self.0
    }

    pub fn ev(self) -> f64 {
        self.0 / ELEMENTARY_CHARGE
    }

    pub fn nev(self) -> f64 {
        self.ev() * 1e9
    }

    pub fn uev(self) -> f64 {
        self.ev() * 1e6
    }
}

impl PowerDbm {
    pub fn dbm(self) -> f64 {
        self.0
    }

    /// Relative voltage amplitude 10^(P/20); 0 dBm maps to 1.
    pub fn amplitude_factor(self) -> f64 {
        10f64.powf(self.0 / 20.0)
    }
}

/// E = h·f.
pub fn energy_of_frequency(f: Frequency) -> Result<Energy> {
    if !f.is_finite() {
        return Err(Error::Domain(format!("frequency {} is not finite", f.0)));
    }
    if f.0 < 0.0 {
        return Err(Error::Domain(format!("frequency {} Hz is negative", f.0)));
    }
    Ok(Energy(PLANCK * f.0))
}

/// f = E/h.
pub fn frequency_of_energy(e: Energy) -> Result<Frequency> {
    if !e.is_finite() {
        return Err(Error::Domain(format!("energy {} is not finite", e.0)));
    }
    if e.0 < 0.0 {
        return Err(Error::Domain(format!("energy {} J is negative", e.0)));
    }
    Ok(Frequency(e.0 / PLANCK))
}

/// Energy resolution implied by a linewidth, in both width conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyResolution {
    pub fwhm_hz: f64,
    /// h·FWHM in neV.
    pub fwhm_nev: f64,
    /// h·FWHM/2 in neV.
    pub hwhm_nev: f64,
}

pub fn energy_resolution(fwhm: Frequency) -> Result<EnergyResolution> {
    let full = energy_of_frequency(fwhm)?;
    Ok(EnergyResolution {
        fwhm_hz: fwhm.hz(),
        fwhm_nev: full.nev(),
        hwhm_nev: full.nev() / 2.0,
    })
}
