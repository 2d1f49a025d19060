use super::Tensor;
use crate::error::{shape_err, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const NORM_EPS: f64 = 1e-12;

/// What multiplies the class cosines to form logits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogitScale {
    /// The L2 norm of the input feature vector.
    InputNorm,
    /// A constant.
    Fixed(f64),
}

/// Angular margin settings. `margin = 1` is plain softmax cross-entropy over
/// the scaled cosines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarginConfig {
    pub margin: u32,
    pub scale: LogitScale,
    /// Weight `λ` of the target-class blend `(λ cos θ + ψ(θ)) / (1 + λ)`.
    /// Zero gives the pure margin; the trainer anneals it towards zero.
    pub blend: f64,
}

impl Default for MarginConfig {
    fn default() -> Self {
        Self { margin: 2, scale: LogitScale::Fixed(30.0), blend: 0.0 }
    }
}

impl MarginConfig {
    pub fn validate(&self) -> Result<()> {
        if self.margin < 1 {
            return Err(Error::InvalidConfig(format!("margin must be >= 1, got {}", self.margin)));
        }
        if let LogitScale::Fixed(s) = self.scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(format!("logit scale must be positive, got {s}")));
            }
        }
        if !(self.blend >= 0.0 && self.blend.is_finite()) {
            return Err(Error::InvalidConfig(format!("margin blend must be finite and >= 0, got {}", self.blend)));
        }
        Ok(())
    }
}

/// Chebyshev polynomials `T_m(c) = cos(mθ)` and `U_{m-1}(c)`.
fn chebyshev(m: u32, c: f64) -> (f64, f64) {
    let (mut t_prev, mut t) = (1.0, c);
    let (mut u_prev, mut u) = (0.0, 1.0);
    for _ in 1..m {
        let t_next = 2.0 * c * t - t_prev;
        let u_next = 2.0 * c * u - u_prev;
        t_prev = t;
        t = t_next;
        u_prev = u;
        u = u_next;
    }
    if m == 0 {
        (1.0, 0.0)
    } else {
        (t, u)
    }
}

/// Target-class angular function `ψ(θ) = (-1)^k cos(mθ) - 2k` for
/// `θ ∈ [kπ/m, (k+1)π/m]`, as a function of `c = cos θ`. Returns `ψ` and
/// `dψ/dc`.
pub fn psi(c: f64, m: u32) -> (f64, f64) {
    let c = c.clamp(-1.0, 1.0);
    if m == 1 {
        return (c, 1.0);
    }
    let theta = c.acos();
    let k = ((theta * m as f64 / PI).floor() as u32).min(m - 1);
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let (t, u) = chebyshev(m, c);
    (sign * t - 2.0 * k as f64, sign * m as f64 * u)
}

fn norm(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() + NORM_EPS).sqrt()
}

fn check_shapes(x: &Tensor, w: &Tensor) -> Result<()> {
    if x.cols() != w.cols() {
        return Err(shape_err(format!(
            "features {:?} vs class weights {:?}",
            x.shape(),
            w.shape()
        )));
    }
    Ok(())
}

/// Cosine of the angle between each row of `x` and each class-weight row.
fn cosines(xrow: &[f64], w: &Tensor) -> (f64, Vec<f64>, Vec<f64>) {
    let xn = norm(xrow);
    let wn: Vec<f64> = (0..w.rows()).map(|j| norm(w.row(j))).collect();
    let cos = (0..w.rows())
        .map(|j| {
            let dot: f64 = xrow.iter().zip(w.row(j)).map(|(a, b)| a * b).sum();
            dot / (xn * wn[j])
        })
        .collect();
    (xn, wn, cos)
}

/// Inference logits `s · cos θ_j` (no margin) for every row of `x`.
pub fn cosine_logits(x: &Tensor, w: &Tensor, cfg: &MarginConfig) -> Result<Tensor> {
    check_shapes(x, w)?;
    let k = w.rows();
    let mut out = Tensor::zeros(x.rows(), k);
    for r in 0..x.rows() {
        let (xn, _, cos) = cosines(x.row(r), w);
        let s = match cfg.scale {
            LogitScale::InputNorm => xn,
            LogitScale::Fixed(s) => s,
        };
        for (j, c) in cos.iter().enumerate() {
            out.set(r, j, s * c);
        }
    }
    Ok(out)
}

/// Numerically stable `-log softmax(logits)[label]`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Mean large-margin loss over the rows of `x` with gradients for `x` and
/// `w`. Class-weight rows are L2-normalised inside, so the loss does not
/// depend on their length.
pub fn margin_loss_with_grads(
    x: &Tensor,
    w: &Tensor,
    labels: &[usize],
    cfg: &MarginConfig,
) -> Result<(f64, Tensor, Tensor)> {
    cfg.validate()?;
    check_shapes(x, w)?;
    if labels.len() != x.rows() {
        return Err(shape_err(format!("{} labels for {} rows", labels.len(), x.rows())));
    }
    let (k, d) = (w.rows(), w.cols());
    if let Some(bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::InvalidInput(format!("label {bad} out of range for {k} classes")));
    }
    let inv_b = 1.0 / x.rows().max(1) as f64;
    let mut gx = Tensor::zeros(x.rows(), d);
    let mut gw = Tensor::zeros(k, d);
    let mut total = 0.0;

    for (r, &y) in labels.iter().enumerate() {
        let xrow = x.row(r);
        let (xn, wn, cos) = cosines(xrow, w);
        let (psi_y, dpsi_y) = psi(cos[y], cfg.margin);
        let lam = cfg.blend;
        let (psi_y, dpsi_y) = ((lam * cos[y] + psi_y) / (1.0 + lam), (lam + dpsi_y) / (1.0 + lam));
        let f: Vec<f64> = (0..k).map(|j| if j == y { psi_y } else { cos[j] }).collect();
        let s = match cfg.scale {
            LogitScale::InputNorm => xn,
            LogitScale::Fixed(s) => s,
        };
        let logits: Vec<f64> = f.iter().map(|v| s * v).collect();
        total += softmax_cross_entropy(&logits, y);

        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let gz: Vec<f64> = (0..k)
            .map(|j| (exps[j] / z - if j == y { 1.0 } else { 0.0 }) * inv_b)
            .collect();

        let u: Vec<f64> = xrow.iter().map(|v| v / xn).collect();
        let gxrow = &mut gx.data_mut()[r * d..(r + 1) * d];
        if cfg.scale == LogitScale::InputNorm {
            let coeff: f64 = (0..k).map(|j| gz[j] * f[j]).sum();
            for (g, ui) in gxrow.iter_mut().zip(&u) {
                *g += coeff * ui;
            }
        }
        for j in 0..k {
            let fprime = if j == y { dpsi_y } else { 1.0 };
            let gc = gz[j] * s * fprime;
            if gc == 0.0 {
                continue;
            }
            let wrow = w.row(j);
            let gwrow = &mut gw.data_mut()[j * d..(j + 1) * d];
            for i in 0..d {
                let what = wrow[i] / wn[j];
                gxrow[i] += gc * (what - cos[j] * u[i]) / xn;
                gwrow[i] += gc * (u[i] - cos[j] * what) / wn[j];
            }
        }
    }
    Ok((total * inv_b, gx, gw))
}
