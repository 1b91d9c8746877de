use serde::{Deserialize, Serialize};

use super::context::PhysicsContext;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "dd")]
    Dd,
    #[serde(rename = "dd+ec")]
    DdEc,
    #[serde(rename = "dd+ses")]
    DdSes,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Dd => "dd",
            LossKind::DdEc => "dd+ec",
            LossKind::DdSes => "dd+ses",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dd" => Ok(LossKind::Dd),
            "dd+ec" => Ok(LossKind::DdEc),
            "dd+ses" => Ok(LossKind::DdSes),
            other => Err(Error::Config(format!("unknown loss kind {other:?}"))),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub kind: LossKind,
    #[serde(default = "one")]
    pub weight_dd: f64,
    #[serde(default = "one")]
    pub weight_phys: f64,
    /// Divide the physics term by its training-set mean at the initial
    /// parameters.
    #[serde(default)]
    pub phys_scale: bool,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            weight_dd: 1.0,
            weight_phys: 1.0,
            phys_scale: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.weight_dd) || !ok(self.weight_phys) {
            return Err(Error::Config(
                "loss weights must be finite and non-negative".into(),
            ));
        }
        let phys = if self.kind == LossKind::Dd {
            0.0
        } else {
            self.weight_phys
        };
        if self.weight_dd == 0.0 && phys == 0.0 {
            return Err(Error::Config(
                "at least one loss weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Loss value with its two components, both unweighted.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub dd: f64,
    pub phys: f64,
}

fn check_batch(pred: &[f64], truth: &[f64], field_len: usize) -> Result<usize> {
    if field_len == 0 || pred.len() != truth.len() || !pred.len().is_multiple_of(field_len) {
        return Err(Error::Dimension(format!(
            "prediction batch of {} values, truth of {}, field length {field_len}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(pred.len() / field_len)
}

/// Mean relative L2 error over the batch; each sample is one flattened field.
pub fn loss_dd(pred: &[f64], truth: &[f64], field_len: usize) -> Result<f64> {
    let n = check_batch(pred, truth, field_len)?;
    dd_terms(pred, truth, field_len, 1.0 / n as f64, None)
}

/// Sum of `scale · ‖p − t‖/‖t‖` per sample, adding `scale · ∂/∂p` to `grad`.
pub(crate) fn dd_terms(
    pred: &[f64],
    truth: &[f64],
    field_len: usize,
    scale: f64,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut diff = vec![0.0; field_len];
    for (s, (p, t)) in pred
        .chunks_exact(field_len)
        .zip(truth.chunks_exact(field_len))
        .enumerate()
    {
        let tn = norm2(t);
        if tn == 0.0 {
            return Err(Error::ZeroNormTruth(s));
        }
        for ((d, a), b) in diff.iter_mut().zip(p).zip(t) {
            *d = a - b;
        }
        let dn = norm2(&diff);
        sum += scale * dn / tn;
        if let Some(g) = grad.as_deref_mut() {
            if dn > 0.0 {
                let c = scale / (dn * tn);
                let gs = &mut g[s * field_len..(s + 1) * field_len];
                for (gi, d) in gs.iter_mut().zip(&diff) {
                    *gi += c * d;
                }
            }
        }
    }
    Ok(sum)
}

/// Signed work residual `uᵀKu − uᵀf`.
pub fn energy_residual(u: &[f64], k: &Matrix, f: &[f64]) -> Result<f64> {
    if !k.is_square() || k.rows() != u.len() || f.len() != u.len() {
        return Err(Error::Dimension(format!(
            "energy residual: K is {}×{}, u has {}, f has {}",
            k.rows(),
            k.cols(),
            u.len(),
            f.len()
        )));
    }
    let ku = k.matvec(u)?;
    Ok(dot(u, &ku) - dot(u, f))
}

/// Mean absolute work residual over the batch, in joules.
pub fn loss_ec(pred: &[f64], samples: &[usize], ctx: &PhysicsContext) -> Result<f64> {
    let n = samples.len().max(1);
    ec_terms(pred, samples, ctx, 1.0 / n as f64, None)
}

pub(crate) fn ec_terms(
    pred: &[f64],
    samples: &[usize],
    ctx: &PhysicsContext,
    scale: f64,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    let k = ctx.k_free().ok_or(Error::MissingPhysics {
        loss: "dd+ec",
        what: "a stiffness matrix",
    })?;
    let field_len = ctx.field_len();
    check_samples(pred, samples, field_len)?;
    let n = k.rows();
    let mut u = vec![0.0; n];
    let mut ku = vec![0.0; n];
    let mut sum = 0.0;
    for (s, &id) in samples.iter().enumerate() {
        let p = &pred[s * field_len..(s + 1) * field_len];
        ctx.gather(p, &mut u);
        let f = ctx.force(id)?;
        k.matvec_into(&u, &mut ku);
        let r = dot(&u, &ku) - dot(&u, f);
        sum += scale * r.abs();
        if let Some(g) = grad.as_deref_mut() {
            let sign = if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            };
            if sign != 0.0 {
                // symmetric K: d/du (uᵀKu − uᵀf) = 2Ku − f
                for (v, fi) in ku.iter_mut().zip(f) {
                    *v = scale * sign * (2.0 * *v - fi);
                }
                ctx.scatter_add(&ku, &mut g[s * field_len..(s + 1) * field_len]);
            }
        }
    }
    Ok(sum)
}

/// Mean Euclidean norm of the reduced equilibrium residual `S·u_I − F_c`.
pub fn loss_ses(pred: &[f64], samples: &[usize], ctx: &PhysicsContext) -> Result<f64> {
    let n = samples.len().max(1);
    ses_terms(pred, samples, ctx, 1.0 / n as f64, None)
}

pub(crate) fn ses_terms(
    pred: &[f64],
    samples: &[usize],
    ctx: &PhysicsContext,
    scale: f64,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    let schur = ctx.schur().ok_or(Error::MissingPhysics {
        loss: "dd+ses",
        what: "a Schur system",
    })?;
    let s_mat = schur.s_matrix();
    let field_len = ctx.field_len();
    check_samples(pred, samples, field_len)?;
    let n = s_mat.rows();
    let mut u = vec![0.0; n];
    let mut res = vec![0.0; n];
    let mut back = vec![0.0; n];
    let mut sum = 0.0;
    for (s, &id) in samples.iter().enumerate() {
        let p = &pred[s * field_len..(s + 1) * field_len];
        ctx.gather(p, &mut u);
        let fc = ctx.fc(id)?;
        s_mat.matvec_into(&u, &mut res);
        for (r, f) in res.iter_mut().zip(fc) {
            *r -= f;
        }
        let rn = norm2(&res);
        sum += scale * rn;
        if let Some(g) = grad.as_deref_mut() {
            if rn > 0.0 {
                // Sᵀ·res / ‖res‖
                back.fill(0.0);
                for (i, &ri) in res.iter().enumerate() {
                    crate::linalg::axpy(scale * ri / rn, s_mat.row(i), &mut back);
                }
                ctx.scatter_add(&back, &mut g[s * field_len..(s + 1) * field_len]);
            }
        }
    }
    Ok(sum)
}

fn check_samples(pred: &[f64], samples: &[usize], field_len: usize) -> Result<()> {
    if pred.len() != samples.len() * field_len {
        return Err(Error::Dimension(format!(
            "{} predicted values for {} samples of {field_len}",
            pred.len(),
            samples.len()
        )));
    }
    Ok(())
}

/// `weight_dd·L_dd + weight_phys·L_phys / phys_norm`.
///
/// With `grad`, also adds `scale·∂L/∂pred` where `scale` weighs this batch
/// inside a larger mean (1 for a whole batch).
#[allow(clippy::too_many_arguments)]
pub(crate) fn loss_parts(
    spec: &LossSpec,
    pred: &[f64],
    truth: &[f64],
    samples: &[usize],
    ctx: &PhysicsContext,
    phys_norm: f64,
    scale: f64,
    mut grad: Option<&mut [f64]>,
) -> Result<LossParts> {
    let field_len = ctx.field_len();
    let n = check_batch(pred, truth, field_len)?;
    if n != samples.len() {
        return Err(Error::Dimension(format!(
            "{n} predicted samples for {} sample ids",
            samples.len()
        )));
    }
    let inv = scale / n as f64;
    let dd = match grad.as_deref_mut() {
        Some(g) if spec.weight_dd > 0.0 => {
            let mut tmp = vec![0.0; g.len()];
            let v = dd_terms(pred, truth, field_len, inv, Some(&mut tmp))?;
            crate::linalg::axpy(spec.weight_dd, &tmp, g);
            v
        }
        _ => dd_terms(pred, truth, field_len, inv, None)?,
    };
    let phys = match spec.kind {
        LossKind::Dd => 0.0,
        kind => {
            let w = spec.weight_phys / phys_norm;
            let mut tmp = grad.as_ref().map(|g| vec![0.0; g.len()]);
            let v = if kind == LossKind::DdEc {
                ec_terms(pred, samples, ctx, inv, tmp.as_deref_mut())?
            } else {
                ses_terms(pred, samples, ctx, inv, tmp.as_deref_mut())?
            };
            if let (Some(g), Some(t)) = (grad, tmp) {
                if w > 0.0 {
                    crate::linalg::axpy(w, &t, g);
                }
            }
            v
        }
    };
    let phys_w = if spec.kind == LossKind::Dd {
        0.0
    } else {
        spec.weight_phys / phys_norm
    };
    Ok(LossParts {
        total: spec.weight_dd * dd + phys_w * phys,
        dd,
        phys,
    })
}

/// Composite loss of one batch with unit physics normalization.
pub fn compose_loss(
    spec: &LossSpec,
    pred: &[f64],
    truth: &[f64],
    samples: &[usize],
    ctx: &PhysicsContext,
) -> Result<f64> {
    Ok(loss_parts(spec, pred, truth, samples, ctx, 1.0, 1.0, None)?.total)
}
