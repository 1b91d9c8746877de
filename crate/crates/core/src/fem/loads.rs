//! Downward line loads on the bottom chord and their work-equivalent nodal
//! forces.

use serde::{Deserialize, Serialize};

use super::model::{dof, FrameModel};
use crate::error::{Error, Result};

pub const MIN_INTENSITY_KN: f64 = 0.1;
pub const MAX_INTENSITY_KN: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Uniform load on the left half of the span.
    UdlHalf,
    /// Linearly varying load on the left half of the span.
    UvlHalf,
    /// Uniform load on the whole span.
    UdlFull,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::UdlHalf, Scenario::UvlHalf, Scenario::UdlFull];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::UdlHalf => "udl-half",
            Scenario::UvlHalf => "uvl-half",
            Scenario::UdlFull => "udl-full",
        }
    }
}

/// Where the half-span ramp load peaks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UvlDirection {
    /// Peak at the left support, zero at midspan.
    #[default]
    PeakAtSupport,
    /// Zero at the left support, peak at midspan.
    PeakAtMidspan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadCase {
    pub scenario: Scenario,
    /// Peak intensity, kN/m.
    pub intensity: f64,
    #[serde(default)]
    pub uvl_direction: UvlDirection,
}

impl LoadCase {
    pub fn new(scenario: Scenario, intensity: f64) -> Self {
        Self {
            scenario,
            intensity,
            uvl_direction: UvlDirection::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_INTENSITY_KN..=MAX_INTENSITY_KN).contains(&self.intensity) {
            return Err(Error::Model(format!(
                "load intensity {} kN/m outside [{MIN_INTENSITY_KN}, {MAX_INTENSITY_KN}]",
                self.intensity
            )));
        }
        Ok(())
    }

    /// Line-load magnitude (kN/m, positive downward) at `x` along a chord of
    /// length `span`. `inside_left` selects the left-half value at exactly midspan.
    fn magnitude_at(&self, x: f64, span: f64, inside_left: bool) -> f64 {
        let half = 0.5 * span;
        let q = self.intensity;
        let in_left = x < half || (x == half && inside_left);
        match self.scenario {
            Scenario::UdlFull => q,
            Scenario::UdlHalf => {
                if in_left {
                    q
                } else {
                    0.0
                }
            }
            Scenario::UvlHalf => {
                if !in_left {
                    return 0.0;
                }
                let t = (x / half).clamp(0.0, 1.0);
                match self.uvl_direction {
                    UvlDirection::PeakAtSupport => q * (1.0 - t),
                    UvlDirection::PeakAtMidspan => q * t,
                }
            }
        }
    }

    /// Intensity (kN/m) at each bottom-chord node. Midspan counts as loaded.
    pub fn nodal_intensities(&self, model: &FrameModel) -> Vec<f64> {
        let x0 = model.nodes[model.bottom_chord[0]][0];
        model
            .bottom_chord
            .iter()
            .map(|&i| self.magnitude_at(model.nodes[i][0] - x0, model.span, true))
            .collect()
    }
}

/// Consistent nodal forces (N, N·m) for the case, full DOF length.
///
/// Each bottom-chord segment carries a linear load from `w1` to `w2`; cubic
/// Hermite weighting gives transverse forces `L(7w1+3w2)/20`, `L(3w1+7w2)/20`
/// and end moments `L²(3w1+2w2)/60`, `−L²(2w1+3w2)/60`, all acting downward.
pub fn equivalent_nodal_loads(model: &FrameModel, case: &LoadCase) -> Result<Vec<f64>> {
    case.validate()?;
    let mut f = vec![0.0; model.n_dofs()];
    let x0 = model.nodes[model.bottom_chord[0]][0];
    for w in model.bottom_chord.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (xa, xb) = (model.nodes[a][0] - x0, model.nodes[b][0] - x0);
        let len = xb - xa;
        let mid_left = 0.5 * (xa + xb) < 0.5 * model.span;
        // end values taken from inside the segment
        let w1 = 1000.0 * case.magnitude_at(xa, model.span, mid_left);
        let w2 = 1000.0 * case.magnitude_at(xb, model.span, mid_left);
        if w1 == 0.0 && w2 == 0.0 {
            continue;
        }
        f[dof(a, 1)] -= len * (7.0 * w1 + 3.0 * w2) / 20.0;
        f[dof(a, 2)] -= len * len * (3.0 * w1 + 2.0 * w2) / 60.0;
        f[dof(b, 1)] -= len * (3.0 * w1 + 7.0 * w2) / 20.0;
        f[dof(b, 2)] += len * len * (2.0 * w1 + 3.0 * w2) / 60.0;
    }
    Ok(f)
}

/// Total downward load (N) of the case: the integral of the line load.
pub fn load_resultant(model: &FrameModel, case: &LoadCase) -> f64 {
    let q = 1000.0 * case.intensity;
    match case.scenario {
        Scenario::UdlFull => q * model.span,
        Scenario::UdlHalf => q * model.span / 2.0,
        Scenario::UvlHalf => q * model.span / 4.0,
    }
}
