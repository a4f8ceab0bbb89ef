//! Patch loss terms and their weighted sum.
//!
//! Every term is a mean over its index set so the weights do not depend on
//! patch resolution. Each `*_grad` function returns the value and writes the
//! gradient with respect to the patch pixels (channel-major, same layout as
//! [`Patch::pixels`]).

use alloc::vec;
use alloc::vec::Vec;

use crate::detector::DetectorOutput;
use crate::error::{Error, Result};
use crate::geometry::Patch;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[inline]
fn sq(v: f64) -> f64 {
    v * v
}

pub const TV_EPSILON: f64 = 1e-8;
pub const COLORFULNESS_MEAN_WEIGHT: f64 = 0.3;

/// Weights of the non-printability, total-variation and colorfulness terms.
/// The objectness term always has weight 1.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 0.01, beta: 2.5, gamma: 0.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.alpha, self.beta, self.gamma].iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(alloc::format!("loss weights must be finite and >= 0, got {:?}", self)))
        }
    }
}

/// Colors a printer can reproduce.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PrintableColorSet {
    colors: Vec<[f64; 3]>,
}

impl PrintableColorSet {
    pub fn new(colors: Vec<[f64; 3]>) -> Result<Self> {
        if colors.is_empty() {
            return Err(Error::EmptyColorSet);
        }
        if colors.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("printable color components must lie in [0, 1]".into()));
        }
        Ok(Self { colors })
    }

    pub fn colors(&self) -> &[[f64; 3]] {
        &self.colors
    }

    /// Nearest color and its distance.
    pub fn nearest(&self, rgb: [f64; 3]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.colors.iter().enumerate() {
            let d2 = sq(rgb[0] - c[0]) + sq(rgb[1] - c[1]) + sq(rgb[2] - c[2]);
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        (best.0, libm::sqrt(best.1))
    }
}

impl Default for PrintableColorSet {
    /// 30 colors: the 27-point lattice {0, 0.5, 1}^3 plus three grays.
    fn default() -> Self {
        let levels = [0.0, 0.5, 1.0];
        let mut colors = Vec::with_capacity(30);
        for r in levels {
            for g in levels {
                for b in levels {
                    colors.push([r, g, b]);
                }
            }
        }
        colors.extend([[0.25; 3], [0.75; 3], [0.125; 3]]);
        Self { colors }
    }
}

/// Mean over pixels of the distance to the nearest printable color.
pub fn nps_loss(patch: &Patch, colors: &PrintableColorSet) -> f64 {
    let n = patch.height() * patch.width();
    (0..n).map(|k| colors.nearest(patch.rgb(k)).1).sum::<f64>() / n as f64
}

pub fn nps_loss_grad(patch: &Patch, colors: &PrintableColorSet, grad: &mut [f64], scale: f64) -> f64 {
    let n = patch.height() * patch.width();
    let mut total = 0.0;
    for k in 0..n {
        let rgb = patch.rgb(k);
        let (i, d) = colors.nearest(rgb);
        total += d;
        if d > 0.0 {
            let c = colors.colors[i];
            for ch in 0..3 {
                grad[ch * n + k] += scale * (rgb[ch] - c[ch]) / (d * n as f64);
            }
        }
    }
    total / n as f64
}

/// Mean over positions with both a right and a lower neighbor, and over
/// channels, of `sqrt(dx^2 + dy^2 + eps)`.
pub fn tv_loss(patch: &Patch) -> f64 {
    tv_loss_grad_impl(patch, None, 0.0)
}

pub fn tv_loss_grad(patch: &Patch, grad: &mut [f64], scale: f64) -> f64 {
    tv_loss_grad_impl(patch, Some(grad), scale)
}

fn tv_loss_grad_impl(patch: &Patch, mut grad: Option<&mut [f64]>, scale: f64) -> f64 {
    let (h, w) = (patch.height(), patch.width());
    let px = patch.pixels();
    let count = (3 * (h - 1) * (w - 1)) as f64;
    let mut total = 0.0;
    for c in 0..3 {
        for i in 0..h - 1 {
            for j in 0..w - 1 {
                let k = patch.index(c, i, j);
                let right = k + 1;
                let down = k + w;
                let dx = px[right] - px[k];
                let dy = px[down] - px[k];
                let s = libm::sqrt(dx * dx + dy * dy + TV_EPSILON);
                total += s;
                if let Some(g) = grad.as_deref_mut() {
                    let f = scale / (s * count);
                    g[right] += f * dx;
                    g[down] += f * dy;
                    g[k] -= f * (dx + dy);
                }
            }
        }
    }
    total / count
}

/// Means and population standard deviations of the opponent channels
/// `rg = R - G` and `yb = (R + G) / 2 - B`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ColorfulnessStats {
    pub mu_rg: f64,
    pub mu_yb: f64,
    pub sigma_rg: f64,
    pub sigma_yb: f64,
}

impl ColorfulnessStats {
    pub fn of(patch: &Patch) -> Self {
        let n = patch.height() * patch.width();
        let (mut srg, mut syb, mut qrg, mut qyb) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..n {
            let (rg, yb) = opponent(patch.rgb(k));
            srg += rg;
            syb += yb;
            qrg += rg * rg;
            qyb += yb * yb;
        }
        let nf = n as f64;
        let (mu_rg, mu_yb) = (srg / nf, syb / nf);
        Self {
            mu_rg,
            mu_yb,
            sigma_rg: libm::sqrt((qrg / nf - mu_rg * mu_rg).max(0.0)),
            sigma_yb: libm::sqrt((qyb / nf - mu_yb * mu_yb).max(0.0)),
        }
    }

    pub fn colorfulness(&self) -> f64 {
        libm::sqrt(sq(self.sigma_rg) + sq(self.sigma_yb))
            + COLORFULNESS_MEAN_WEIGHT * libm::sqrt(sq(self.mu_rg) + sq(self.mu_yb))
    }
}

#[inline]
fn opponent([r, g, b]: [f64; 3]) -> (f64, f64) {
    (r - g, 0.5 * (r + g) - b)
}

/// Colorfulness of the patch on opponent channels.
pub fn saliency_loss(patch: &Patch) -> f64 {
    ColorfulnessStats::of(patch).colorfulness()
}

pub fn saliency_loss_grad(patch: &Patch, grad: &mut [f64], scale: f64) -> f64 {
    let stats = ColorfulnessStats::of(patch);
    let n = patch.height() * patch.width();
    let nf = n as f64;
    let spread = libm::sqrt(sq(stats.sigma_rg) + sq(stats.sigma_yb));
    let offset = libm::sqrt(sq(stats.mu_rg) + sq(stats.mu_yb));
    for k in 0..n {
        let (rg, yb) = opponent(patch.rgb(k));
        // d/d(rg_k), d/d(yb_k)
        let mut g_rg = 0.0;
        let mut g_yb = 0.0;
        if spread > 0.0 {
            g_rg += (rg - stats.mu_rg) / (nf * spread);
            g_yb += (yb - stats.mu_yb) / (nf * spread);
        }
        if offset > 0.0 {
            g_rg += COLORFULNESS_MEAN_WEIGHT * stats.mu_rg / (nf * offset);
            g_yb += COLORFULNESS_MEAN_WEIGHT * stats.mu_yb / (nf * offset);
        }
        grad[k] += scale * (g_rg + 0.5 * g_yb);
        grad[n + k] += scale * (-g_rg + 0.5 * g_yb);
        grad[2 * n + k] -= scale * g_yb;
    }
    stats.colorfulness()
}

/// Which per-cell score the objectness term maximizes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ObjectnessMode {
    /// Raw objectness.
    #[default]
    Raw,
    /// Objectness times the best class probability.
    TimesClass,
}

/// Location and value of the strongest cell in one detector output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectnessPeak {
    pub entry: usize,
    pub class: usize,
    pub value: f64,
}

pub fn objectness_peak(output: &DetectorOutput, mode: ObjectnessMode) -> ObjectnessPeak {
    let mut best = ObjectnessPeak { entry: 0, class: 0, value: f64::NEG_INFINITY };
    for e in 0..output.len() {
        let (class, score) = match mode {
            ObjectnessMode::Raw => (0, output.objectness[e] as f64),
            ObjectnessMode::TimesClass => {
                let (c, p) = output.best_class(e);
                (c, output.objectness[e] as f64 * p as f64)
            }
        };
        if score > best.value {
            best = ObjectnessPeak { entry: e, class, value: score };
        }
    }
    best
}

/// Mean over the batch of the per-image maximum objectness.
pub fn objectness_loss(outputs: &[DetectorOutput], mode: ObjectnessMode) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(outputs.iter().map(|o| objectness_peak(o, mode).value).sum::<f64>() / outputs.len() as f64)
}

/// Unweighted terms and the weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LossBreakdown {
    pub obj: f64,
    pub nps: f64,
    pub tv: f64,
    pub sal: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn combine(obj: f64, nps: f64, tv: f64, sal: f64, w: &LossWeights) -> Self {
        Self { obj, nps, tv, sal, total: w.alpha * nps + w.beta * tv + w.gamma * sal + obj }
    }

    pub fn is_finite(&self) -> bool {
        [self.obj, self.nps, self.tv, self.sal, self.total].iter().all(|v| v.is_finite())
    }
}

/// `alpha * nps + beta * tv + gamma * sal + obj`, with the breakdown.
pub fn total_loss(
    patch: &Patch,
    outputs: &[DetectorOutput],
    weights: &LossWeights,
    colors: &PrintableColorSet,
    mode: ObjectnessMode,
) -> Result<LossBreakdown> {
    weights.validate()?;
    let obj = objectness_loss(outputs, mode)?;
    Ok(LossBreakdown::combine(obj, nps_loss(patch, colors), tv_loss(patch), saliency_loss(patch), weights))
}

/// Value and gradient of the patch-only regularizers,
/// `alpha * nps + beta * tv + gamma * sal`, added into `grad`.
pub fn regularizer_grad(
    patch: &Patch,
    weights: &LossWeights,
    colors: &PrintableColorSet,
    grad: &mut [f64],
) -> (f64, f64, f64) {
    let nps = nps_loss_grad(patch, colors, grad, weights.alpha);
    let tv = tv_loss_grad(patch, grad, weights.beta);
    let sal = if weights.gamma > 0.0 {
        saliency_loss_grad(patch, grad, weights.gamma)
    } else {
        saliency_loss(patch)
    };
    (nps, tv, sal)
}

pub fn zero_grad(patch: &Patch) -> Vec<f64> {
    vec![0.0; patch.len()]
}
