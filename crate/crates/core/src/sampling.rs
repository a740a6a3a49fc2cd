//! Bandlimited signal model: frequency-band selection, the projector
//! `B = U_F U_F^T`, and the 0/1 sampling mask `D_S`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{check_len, GraphSignal, LaplacianSpectrum};

/// Relative tolerance under which two greedy scores count as tied.
const TIE_TOL: f64 = 1e-12;

/// Frequency indices into a spectrum, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencySet {
    indices: Vec<usize>,
}

impl FrequencySet {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate frequency index".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::InvalidParameter(format!(
                    "frequency index {last} out of range for {n} frequencies"
                )));
            }
        }
        Ok(Self { indices })
    }

    /// The `size` lowest frequencies.
    pub fn lowest(size: usize, n: usize) -> Result<Self> {
        Self::new((0..size).collect(), n)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Diagonal 0/1 observation operator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingMask {
    observed: Vec<bool>,
}

impl SamplingMask {
    pub fn full(n: usize) -> Self {
        Self {
            observed: vec![true; n],
        }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            observed: vec![false; n],
        }
    }

    pub fn from_bools(observed: Vec<bool>) -> Self {
        Self { observed }
    }

    pub fn from_indices(n: usize, nodes: &[usize]) -> Result<Self> {
        let mut observed = vec![false; n];
        for &i in nodes {
            if i >= n {
                return Err(Error::InvalidParameter(format!(
                    "observed node {i} out of range for {n} nodes"
                )));
            }
            observed[i] = true;
        }
        Ok(Self { observed })
    }

    /// Parses a 0/1 indicator vector; any other entry is rejected.
    pub fn from_indicator(values: &[f64]) -> Result<Self> {
        let observed = values
            .iter()
            .map(|&v| {
                if v == 1.0 {
                    Ok(true)
                } else if v == 0.0 {
                    Ok(false)
                } else {
                    Err(Error::InvalidParameter(format!("mask entry {v} is not 0 or 1")))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { observed })
    }

    /// `count` nodes drawn uniformly without replacement.
    pub fn random(n: usize, count: usize, seed: u64) -> Result<Self> {
        if count > n {
            return Err(Error::InvalidParameter(format!(
                "cannot observe {count} of {n} nodes"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = index::sample(&mut rng, n, count);
        Self::from_indices(n, &picks.into_vec())
    }

    pub fn n(&self) -> usize {
        self.observed.len()
    }

    pub fn is_observed(&self, i: usize) -> bool {
        self.observed[i]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn observed_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.observed[i]).collect()
    }

    pub fn unobserved_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.observed[i]).collect()
    }

    /// Diagonal of `D_S`.
    pub fn indicator(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.observed.iter().map(|&o| if o { 1.0 } else { 0.0 }))
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.indicator())
    }

    /// Zeroes the unobserved entries of `x` in place.
    pub fn mask_in_place(&self, x: &mut DVector<f64>) {
        for (v, &o) in x.iter_mut().zip(&self.observed) {
            if !o {
                *v = 0.0;
            }
        }
    }

    /// `D_S M`: rows of unobserved nodes set to zero.
    pub fn mask_rows(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (i, &o) in self.observed.iter().enumerate() {
            if !o {
                out.row_mut(i).fill(0.0);
            }
        }
        out
    }
}

/// Entrywise product of `x` with the mask indicator.
pub fn apply_mask(mask: &SamplingMask, x: &GraphSignal) -> Result<GraphSignal> {
    check_len(mask.n(), x.len())?;
    let mut out = x.0.clone();
    mask.mask_in_place(&mut out);
    Ok(GraphSignal(out))
}

/// Orthogonal projector onto the span of a frequency band.
#[derive(Debug, Clone)]
pub struct BandlimitProjector {
    matrix: DMatrix<f64>,
    band: FrequencySet,
    u_f: DMatrix<f64>,
}

impl BandlimitProjector {
    /// `B`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn band(&self) -> &FrequencySet {
        &self.band
    }

    /// `U_F`, shape `n x |F|`.
    pub fn u_f(&self) -> &DMatrix<f64> {
        &self.u_f
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn band_size(&self) -> usize {
        self.band.len()
    }

    /// Band coefficients `U_F^T x`.
    pub fn band_coefficients(&self, x: &DVector<f64>) -> DVector<f64> {
        self.u_f.tr_mul(x)
    }

    /// `U_F^T D_S U_F`.
    pub fn masked_gram(&self, mask: &SamplingMask) -> DMatrix<f64> {
        let masked = mask.mask_rows(&self.u_f);
        self.u_f.tr_mul(&masked)
    }
}

pub fn build_projector(spectrum: &LaplacianSpectrum, band: &FrequencySet) -> Result<BandlimitProjector> {
    if band.indices().last().is_some_and(|&i| i >= spectrum.n()) {
        return Err(Error::InvalidParameter("band exceeds spectrum size".into()));
    }
    let u_f = spectrum.columns(band.indices());
    let b = &u_f * u_f.transpose();
    // (B + B^T) / 2 is bitwise symmetric because fp addition commutes
    let matrix = (&b + b.transpose()) * 0.5;
    Ok(BandlimitProjector {
        matrix,
        band: band.clone(),
        u_f,
    })
}

/// Smallest singular value of `D_S U_F`. Positive means every signal in the
/// band is recoverable from the observed nodes.
pub fn check_sampling_condition(mask: &SamplingMask, projector: &BandlimitProjector) -> f64 {
    min_singular_value(&observed_rows(mask, projector.u_f()))
}

fn observed_rows(mask: &SamplingMask, m: &DMatrix<f64>) -> DMatrix<f64> {
    m.select_rows(&mask.observed_indices())
}

pub(crate) fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() < m.ncols() {
        return 0.0;
    }
    m.singular_values().min()
}

/// Objective maximised by greedy frequency selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandCriterion {
    /// Smallest singular value of `D_S U_F`.
    #[default]
    MinSingularValue,
    /// Determinant of `U_F^T D_S U_F`.
    Determinant,
}

/// Grows a band one frequency at a time, each time adding the index that
/// maximises `criterion` for the observed rows of `U`. Ties go to the lower
/// frequency index. When every extension has `sigma_min = 0` the step falls
/// back to maximising the sum of singular values.
pub fn greedy_select_frequencies(
    spectrum: &LaplacianSpectrum,
    mask: &SamplingMask,
    band_size: usize,
    criterion: BandCriterion,
) -> Result<FrequencySet> {
    let n = spectrum.n();
    check_len(n, mask.n())?;
    let observed = mask.observed_count();
    if band_size > observed {
        return Err(Error::Identifiability { band_size, observed });
    }
    if band_size == 0 {
        return Err(Error::InvalidParameter("band size must be positive".into()));
    }

    let u_obs = observed_rows(mask, spectrum.eigenvectors());
    let gram = u_obs.tr_mul(&u_obs);

    let mut selected: Vec<usize> = Vec::with_capacity(band_size);
    let mut available = vec![true; n];
    while selected.len() < band_size {
        let k = selected.len();
        let sub = gram.select_rows(&selected).select_columns(&selected);
        let scorer = StepScorer::new(sub, criterion);

        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|&j| available[j]) {
            let b = DVector::from_iterator(k, selected.iter().map(|&s| gram[(s, j)]));
            let score = scorer.score(&b, gram[(j, j)]);
            if best.is_none_or(|(_, v)| score > v + TIE_TOL * v.abs().max(1.0)) {
                best = Some((j, score));
            }
        }
        let (mut pick, best_score) = best.expect("fewer candidates than band size");

        if criterion == BandCriterion::MinSingularValue && best_score <= TIE_TOL {
            let mut fallback: Option<(usize, f64)> = None;
            for j in (0..n).filter(|&j| available[j]) {
                let mut cols = selected.clone();
                cols.push(j);
                let total: f64 = u_obs.select_columns(&cols).singular_values().sum();
                if fallback.is_none_or(|(_, v)| total > v + TIE_TOL * v.abs().max(1.0)) {
                    fallback = Some((j, total));
                }
            }
            pick = fallback.expect("candidate set is nonempty").0;
        }

        available[pick] = false;
        selected.push(pick);
    }
    FrequencySet::new(selected, n)
}

/// Scores one-column extensions of the current Gram matrix
/// `G = U_S^T D U_S` to `[[G, b], [b^T, c]]`.
struct StepScorer {
    criterion: BandCriterion,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl StepScorer {
    fn new(gram: DMatrix<f64>, criterion: BandCriterion) -> Self {
        let (eigenvalues, eigenvectors) = if gram.nrows() > 0 && criterion == BandCriterion::MinSingularValue {
            let eig = SymmetricEigen::new(gram.clone());
            let mut order: Vec<usize> = (0..gram.nrows()).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            (
                order.iter().map(|&i| eig.eigenvalues[i]).collect(),
                eig.eigenvectors.select_columns(&order),
            )
        } else {
            (Vec::new(), DMatrix::zeros(0, 0))
        };
        Self {
            criterion,
            eigenvalues,
            eigenvectors,
            gram,
        }
    }

    fn score(&self, b: &DVector<f64>, c: f64) -> f64 {
        match self.criterion {
            BandCriterion::MinSingularValue => self.min_eigenvalue(b, c).max(0.0).sqrt(),
            BandCriterion::Determinant => {
                // det of the bordered matrix = det(G) * (c - b^T G^{-1} b); det(G) is
                // common to all candidates so only the Schur complement matters
                if self.gram.nrows() == 0 {
                    return c;
                }
                match self.gram.clone().cholesky() {
                    Some(ch) => c - b.dot(&ch.solve(b)),
                    None => 0.0,
                }
            }
        }
    }

    /// Smallest eigenvalue of the bordered matrix from the secular equation
    /// `c - x - sum_i z_i^2 / (lambda_i - x) = 0`, `z = Q^T b`. The root lies
    /// below `lambda_1` (interlacing); when the equation has no root there the
    /// answer is `lambda_1` itself.
    fn min_eigenvalue(&self, b: &DVector<f64>, c: f64) -> f64 {
        if self.eigenvalues.is_empty() {
            return c;
        }
        let z = self.eigenvectors.tr_mul(b);
        let secular = |x: f64| -> f64 {
            c - x
                - self
                    .eigenvalues
                    .iter()
                    .zip(z.iter())
                    .map(|(&l, &zi)| zi * zi / (l - x))
                    .sum::<f64>()
        };
        let mut hi = self.eigenvalues[0];
        let mut lo = hi.min(c) - z.norm() - 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if secular(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
