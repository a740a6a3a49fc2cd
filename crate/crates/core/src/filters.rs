//! Online adaptive graph filters.
//!
//! All filters share the form `x[t+1] = x[t] + mu * P * g(D_S (y[t] - x[t]))`
//! where `P` is a band-restricted operator and `g` is an elementwise error
//! nonlinearity:
//!
//! | filter     | `P`                     | `g(e)`                 |
//! |------------|-------------------------|------------------------|
//! | GLMS       | `B`                     | `e`                    |
//! | GLMP       | `B`                     | `|e|^(p-1) sign(e)`    |
//! | G-Sign     | `B`                     | `sign(e)`              |
//! | GNS        | `B_n = U_F M U_F^T`     | `sign(e)`              |
//!
//! with `M = (U_F^T D_S R U_F)^-1` and `R = I / E|w|`. `GNS_EXACT`
//! recomputes `M[t]` every step from the current residuals, and
//! `GNS_SPECTRAL` applies the sign after rotating the residual onto the band.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::check_len;
use crate::sampling::{BandlimitProjector, SamplingMask};

/// Residuals smaller than this are clamped before inversion in `GNS_EXACT`.
pub const RESIDUAL_FLOOR: f64 = 1e-6;

/// Inner matrices with smallest eigenvalue below this are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-10;

pub const DEFAULT_P_EXPONENT: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FilterKind {
    #[serde(rename = "GLMS")]
    Glms,
    #[serde(rename = "GLMP")]
    Glmp,
    #[serde(rename = "GSIGN")]
    GSign,
    #[serde(rename = "GNS")]
    Gns,
    #[serde(rename = "GNS_EXACT")]
    GnsExact,
    #[serde(rename = "GNS_SPECTRAL")]
    GnsSpectral,
}

impl FilterKind {
    pub fn label(self) -> &'static str {
        match self {
            FilterKind::Glms => "GLMS",
            FilterKind::Glmp => "GLMP",
            FilterKind::GSign => "G-Sign",
            FilterKind::Gns => "GNS",
            FilterKind::GnsExact => "GNS-exact",
            FilterKind::GnsSpectral => "GNS-spectral",
        }
    }

    pub fn needs_normalizer(self) -> bool {
        matches!(self, FilterKind::Gns | FilterKind::GnsSpectral)
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Where a GNS filter gets `E|w|` from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    /// Closed form from the configured noise parameters.
    #[default]
    Known,
    /// A fixed value.
    Fixed(f64),
    /// Estimated online from observed residuals over the first `warmup` steps.
    Blind { warmup: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub kind: FilterKind,
    /// `mu`, `mu_s` or `mu_n` depending on kind. `None` requests tuning.
    #[serde(default)]
    pub step_size: Option<f64>,
    #[serde(default = "default_p")]
    pub p_exponent: f64,
    #[serde(default)]
    pub moment: MomentSource,
}

fn default_p() -> f64 {
    DEFAULT_P_EXPONENT
}

impl FilterConfig {
    pub fn new(kind: FilterKind, step_size: f64) -> Self {
        Self {
            kind,
            step_size: Some(step_size),
            p_exponent: DEFAULT_P_EXPONENT,
            moment: MomentSource::Known,
        }
    }

    pub fn untuned(kind: FilterKind) -> Self {
        Self {
            kind,
            step_size: None,
            p_exponent: DEFAULT_P_EXPONENT,
            moment: MomentSource::Known,
        }
    }

    pub fn with_step(mut self, step_size: f64) -> Self {
        self.step_size = Some(step_size);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(mu) = self.step_size {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::InvalidParameter(format!("{}: step size {mu} must be positive", self.kind)));
            }
        }
        if self.kind == FilterKind::Glmp && !(self.p_exponent > 1.0 && self.p_exponent < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "GLMP exponent {} outside (1, 2)",
                self.p_exponent
            )));
        }
        if let MomentSource::Fixed(m) = self.moment {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidParameter(format!("moment {m} must be positive")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        self.kind.label()
    }
}

/// `M` (or `M[t]`) and the weighting that produced it.
#[derive(Debug, Clone)]
pub struct NormalizerMatrix {
    pub m: DMatrix<f64>,
    /// Diagonal of `R` when it is a scaled identity.
    pub r_scalar: Option<f64>,
    /// Condition number of the inverted inner matrix.
    pub condition_number: f64,
}

/// Precomputed GNS operator: `M` and `B_n = U_F M U_F^T`.
#[derive(Debug, Clone)]
pub struct GnsNormalizer {
    pub normalizer: NormalizerMatrix,
    pub b_n: DMatrix<f64>,
    pub moment_abs: f64,
}

impl GnsNormalizer {
    /// Spectral norm of `B_n`.
    pub fn operator_norm(&self) -> f64 {
        // B_n is symmetric PSD with nonzero spectrum equal to that of M
        SymmetricEigen::new(self.normalizer.m.clone()).eigenvalues.max()
    }
}

/// Symmetric inverse via eigendecomposition. Returns the inverse and the
/// condition number, or the offending smallest eigenvalue.
fn spd_inverse(a: &DMatrix<f64>) -> std::result::Result<(DMatrix<f64>, f64), f64> {
    let eig = SymmetricEigen::new(a.clone());
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if min <= SINGULAR_TOL * max.max(1.0) {
        return Err(min);
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
    let inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    let inv = (&inv + inv.transpose()) * 0.5;
    Ok((inv, max / min))
}

/// `R = I / moment_abs`, `M = (U_F^T D_S R U_F)^-1`, `B_n = U_F M U_F^T`.
pub fn build_gns_normalizer(
    projector: &BandlimitProjector,
    mask: &SamplingMask,
    moment_abs: f64,
) -> Result<GnsNormalizer> {
    check_len(projector.n(), mask.n())?;
    if !(moment_abs > 0.0 && moment_abs.is_finite()) {
        return Err(Error::InvalidParameter(format!("E|w| = {moment_abs} must be positive")));
    }
    let r = 1.0 / moment_abs;
    let inner = projector.masked_gram(mask) * r;
    let (m, condition_number) = spd_inverse(&inner).map_err(|min| Error::SingularNormalizer {
        sigma_min: (min / r).max(0.0).sqrt(),
    })?;
    let u_f = projector.u_f();
    let b_n = u_f * &m * u_f.transpose();
    let b_n = (&b_n + b_n.transpose()) * 0.5;
    Ok(GnsNormalizer {
        normalizer: NormalizerMatrix {
            m,
            r_scalar: Some(r),
            condition_number,
        },
        b_n,
        moment_abs,
    })
}

/// Per-step normalizer `M[t] = (U_F^T D_S diag(|y - x|^-1) U_F)^-1`.
/// Observed residuals below [`RESIDUAL_FLOOR`] are clamped; the second
/// return value counts how many were.
pub fn exact_normalizer(
    projector: &BandlimitProjector,
    mask: &SamplingMask,
    y: &DVector<f64>,
    x_hat: &DVector<f64>,
) -> Result<(NormalizerMatrix, usize)> {
    let n = projector.n();
    check_len(n, mask.n())?;
    check_len(n, y.len())?;
    check_len(n, x_hat.len())?;
    let mut floor_events = 0;
    let weights = DVector::from_fn(n, |i, _| {
        if !mask.is_observed(i) {
            return 0.0;
        }
        let r = (y[i] - x_hat[i]).abs();
        if r < RESIDUAL_FLOOR {
            floor_events += 1;
            1.0 / RESIDUAL_FLOOR
        } else {
            1.0 / r
        }
    });
    let u_f = projector.u_f();
    let mut weighted = u_f.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= weights[i];
    }
    let inner = u_f.tr_mul(&weighted);
    let (m, condition_number) = spd_inverse(&inner).map_err(|min| Error::SingularNormalizer {
        sigma_min: min.max(0.0).sqrt(),
    })?;
    Ok((
        NormalizerMatrix {
            m,
            r_scalar: None,
            condition_number,
        },
        floor_events,
    ))
}

/// Elementwise sign with `sign(0) = 0`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
struct BlindMoment {
    warmup: usize,
    samples: Vec<f64>,
}

/// Estimate and bookkeeping for one filter in one run.
#[derive(Debug, Clone)]
pub struct FilterState<'a> {
    estimate: DVector<f64>,
    projector: &'a BandlimitProjector,
    mask: &'a SamplingMask,
    normalizer: Option<Arc<GnsNormalizer>>,
    blind: Option<BlindMoment>,
    t: usize,
    floor_events: usize,
}

impl<'a> FilterState<'a> {
    pub fn new(projector: &'a BandlimitProjector, mask: &'a SamplingMask, initial: DVector<f64>) -> Result<Self> {
        check_len(projector.n(), mask.n())?;
        check_len(projector.n(), initial.len())?;
        Ok(Self {
            estimate: initial,
            projector,
            mask,
            normalizer: None,
            blind: None,
            t: 0,
            floor_events: 0,
        })
    }

    pub fn zeros(projector: &'a BandlimitProjector, mask: &'a SamplingMask) -> Result<Self> {
        Self::new(projector, mask, DVector::zeros(projector.n()))
    }

    pub fn with_normalizer(mut self, normalizer: Arc<GnsNormalizer>) -> Self {
        self.normalizer = Some(normalizer);
        self
    }

    /// Re-estimates `E|w|` as the mean absolute observed residual over the
    /// second half of the first `warmup` steps, then rebuilds `B_n`. The
    /// normalizer already attached is used until then.
    pub fn with_blind_moment(mut self, warmup: usize) -> Self {
        self.blind = Some(BlindMoment {
            warmup,
            samples: Vec::new(),
        });
        self
    }

    pub fn estimate(&self) -> &DVector<f64> {
        &self.estimate
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn floor_events(&self) -> usize {
        self.floor_events
    }

    pub fn normalizer(&self) -> Option<&GnsNormalizer> {
        self.normalizer.as_deref()
    }

    /// `D_S (y - x[t])`.
    pub fn residual(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut e = y - &self.estimate;
        self.mask.mask_in_place(&mut e);
        e
    }

    pub fn glms_update(&self, y: &DVector<f64>, mu: f64) -> DVector<f64> {
        self.projector.matrix() * (self.residual(y) * mu)
    }

    pub fn glmp_update(&self, y: &DVector<f64>, mu: f64, p: f64) -> DVector<f64> {
        let g = self.residual(y).map(|e| sign(e) * e.abs().powf(p - 1.0) * mu);
        self.projector.matrix() * g
    }

    pub fn gsign_update(&self, y: &DVector<f64>, mu: f64) -> DVector<f64> {
        let g = self.residual(y).map(|e| sign(e) * mu);
        self.projector.matrix() * g
    }

    pub fn gns_update(&self, y: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
        let norm = self.require_normalizer()?;
        let g = self.residual(y).map(|e| sign(e) * mu);
        Ok(&norm.b_n * g)
    }

    /// `U_F M sign(U_F^T e)`: sign taken on band coefficients.
    pub fn gns_spectral_update(&self, y: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
        let norm = self.require_normalizer()?;
        let coeffs = self.projector.band_coefficients(&self.residual(y));
        let g = coeffs.map(|c| sign(c) * mu);
        Ok(self.projector.u_f() * (&norm.normalizer.m * g))
    }

    /// Update with the per-step normalizer `M[t]`; returns the update and the
    /// number of floored residuals.
    pub fn gns_exact_update(&self, y: &DVector<f64>, mu: f64) -> Result<(DVector<f64>, usize)> {
        let (m, floored) = exact_normalizer(self.projector, self.mask, y, &self.estimate)?;
        let g = self.residual(y).map(|e| sign(e) * mu);
        let u_f = self.projector.u_f();
        Ok((u_f * (&m.m * u_f.tr_mul(&g)), floored))
    }

    pub fn glms_step(&mut self, y: &DVector<f64>, mu: f64) {
        let d = self.glms_update(y, mu);
        self.apply(d);
    }

    pub fn glmp_step(&mut self, y: &DVector<f64>, mu: f64, p: f64) {
        let d = self.glmp_update(y, mu, p);
        self.apply(d);
    }

    pub fn gsign_step(&mut self, y: &DVector<f64>, mu: f64) {
        let d = self.gsign_update(y, mu);
        self.apply(d);
    }

    pub fn gns_step(&mut self, y: &DVector<f64>, mu: f64) -> Result<()> {
        self.observe_blind(y)?;
        let d = self.gns_update(y, mu)?;
        self.apply(d);
        Ok(())
    }

    pub fn gns_spectral_step(&mut self, y: &DVector<f64>, mu: f64) -> Result<()> {
        self.observe_blind(y)?;
        let d = self.gns_spectral_update(y, mu)?;
        self.apply(d);
        Ok(())
    }

    pub fn gns_exact_step(&mut self, y: &DVector<f64>, mu: f64) -> Result<()> {
        let (d, floored) = self.gns_exact_update(y, mu)?;
        self.floor_events += floored;
        self.apply(d);
        Ok(())
    }

    /// One step of the filter described by `config`.
    pub fn step(&mut self, config: &FilterConfig, y: &DVector<f64>) -> Result<()> {
        let mu = config
            .step_size
            .ok_or_else(|| Error::Config(format!("{} has no step size", config.kind)))?;
        match config.kind {
            FilterKind::Glms => self.glms_step(y, mu),
            FilterKind::Glmp => self.glmp_step(y, mu, config.p_exponent),
            FilterKind::GSign => self.gsign_step(y, mu),
            FilterKind::Gns => self.gns_step(y, mu)?,
            FilterKind::GnsExact => self.gns_exact_step(y, mu)?,
            FilterKind::GnsSpectral => self.gns_spectral_step(y, mu)?,
        }
        Ok(())
    }

    fn apply(&mut self, delta: DVector<f64>) {
        self.estimate += delta;
        self.t += 1;
    }

    fn require_normalizer(&self) -> Result<&GnsNormalizer> {
        self.normalizer
            .as_deref()
            .ok_or_else(|| Error::Config("GNS step without a precomputed normalizer".into()))
    }

    fn observe_blind(&mut self, y: &DVector<f64>) -> Result<()> {
        let Some(blind) = self.blind.as_mut() else {
            return Ok(());
        };
        if self.t >= blind.warmup / 2 && self.t < blind.warmup {
            for i in 0..self.estimate.len() {
                if self.mask.is_observed(i) {
                    blind.samples.push((y[i] - self.estimate[i]).abs());
                }
            }
        }
        if self.t + 1 == blind.warmup {
            let samples = std::mem::take(&mut blind.samples);
            self.blind = None;
            let moment = crate::noise::estimate_abs_moment_empirical(&samples)?;
            let rebuilt = build_gns_normalizer(self.projector, self.mask, moment)?;
            self.normalizer = Some(Arc::new(rebuilt));
        }
        Ok(())
    }
}
