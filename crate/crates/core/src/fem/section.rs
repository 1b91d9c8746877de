use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Material and rectangular cross-section of a beam member, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    /// Pa
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// kg/m³; carried for export only, no mass matrix is assembled.
    pub density: f64,
    /// m
    pub width: f64,
    /// m, bending depth
    pub height: f64,
    pub shear_correction: f64,
}

impl MaterialSection {
    /// Structural steel, 400 mm × 250 mm solid rectangle, κ = 5/6.
    pub fn steel_400x250() -> Self {
        Self {
            youngs_modulus: 210e9,
            poisson_ratio: 0.3,
            density: 7850.0,
            width: 0.4,
            height: 0.25,
            shear_correction: 5.0 / 6.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("youngs_modulus", self.youngs_modulus),
            ("poisson_ratio", self.poisson_ratio),
            ("density", self.density),
            ("width", self.width),
            ("height", self.height),
            ("shear_correction", self.shear_correction),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Model(format!("{name} must be positive, got {v}")));
            }
        }
        if self.poisson_ratio >= 0.5 {
            return Err(Error::Model(format!(
                "poisson_ratio must be below 0.5, got {}",
                self.poisson_ratio
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn second_moment(&self) -> f64 {
        self.width * self.height.powi(3) / 12.0
    }

    pub fn shear_modulus(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }

    pub fn axial_rigidity(&self) -> f64 {
        self.youngs_modulus * self.area()
    }

    pub fn bending_rigidity(&self) -> f64 {
        self.youngs_modulus * self.second_moment()
    }

    /// κ·G·A
    pub fn shear_rigidity(&self) -> f64 {
        self.shear_correction * self.shear_modulus() * self.area()
    }
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self::steel_400x250()
    }
}
