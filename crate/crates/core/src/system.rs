//! Physical constants and the definition of a two-spin problem.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// SI constants. `hbar` only enters through the gyromagnetic ratio; every
/// operator in this crate is expressed in units of ħ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub k_b: f64,
    pub mu_b: f64,
    pub g: f64,
    pub hbar: f64,
}

impl PhysicalConstants {
    pub const ELECTRON: PhysicalConstants = PhysicalConstants {
        k_b: 1.380649e-23,
        mu_b: 9.2740100783e-24,
        g: 2.00231930436256,
        hbar: 1.054571817e-34,
    };

    /// g·μ_B in J/T.
    pub fn g_mu_b(&self) -> f64 {
        self.g * self.mu_b
    }

    /// γ = g·μ_B/ħ in rad s⁻¹ T⁻¹.
    pub fn gamma(&self) -> f64 {
        self.g * self.mu_b / self.hbar
    }

    pub fn beta(&self, temperature: f64) -> Result<f64> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::invalid(format!(
                "temperature must be positive and finite, got {temperature}"
            )));
        }
        Ok(1.0 / (self.k_b * temperature))
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::ELECTRON
    }
}

/// Spin quantum number stored as the integer 2s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub fn new(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !twice.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "spin must be a positive half-integer, got {s}"
            )));
        }
        Ok(Spin {
            twice: twice.round() as u32,
        })
    }

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::invalid("spin must be at least 1/2"));
        }
        Ok(Spin { twice })
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    /// Single-site Hilbert space dimension 2s+1.
    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }
}

impl std::fmt::Display for Spin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Two identical spins with isotropic exchange `exchange` (J, positive is
/// ferromagnetic) in a uniform field `field` (Tesla).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystemSpec {
    pub spin: Spin,
    pub exchange: f64,
    pub field: Vec3,
    pub alpha: f64,
    pub constants: PhysicalConstants,
}

impl SpinSystemSpec {
    pub fn new(s: f64, exchange: f64, field: Vec3, alpha: f64) -> Result<Self> {
        let spec = SpinSystemSpec {
            spin: Spin::new(s)?,
            exchange,
            field,
            alpha,
            constants: PhysicalConstants::ELECTRON,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The parameterisation used throughout: J = ratio·g·μ_B·B_z with B = (0,0,B_z).
    pub fn along_z(s: f64, j_over_gmub_bz: f64, bz: f64, alpha: f64) -> Result<Self> {
        let c = PhysicalConstants::ELECTRON;
        Self::new(
            s,
            j_over_gmub_bz * c.g_mu_b() * bz,
            Vec3::new(0.0, 0.0, bz),
            alpha,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !self.exchange.is_finite() {
            return Err(Error::invalid("exchange must be finite"));
        }
        if !self.field.iter().all(|b| b.is_finite()) {
            return Err(Error::invalid("field must be finite"));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid(format!(
                "damping must be non-negative, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// μ_s = g·μ_B·s.
    pub fn moment(&self) -> f64 {
        self.constants.g_mu_b() * self.spin.value()
    }

    /// True when the field has no transverse component (or vanishes).
    pub fn field_along_z(&self) -> bool {
        self.field.x == 0.0 && self.field.y == 0.0
    }
}
