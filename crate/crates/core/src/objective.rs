//! Cosine relevance and the per-query logistic ranking loss
//! `log(1 + Σ_j exp(-γ Δ_j))` with `Δ_j = R(Q, D+) - R(Q, D-_j)`.

use ndarray::ArrayView1;

use crate::error::{Error, Result};

/// Norms at or below this are treated as zero.
pub const NORM_EPS: f64 = 1e-12;

pub const DEFAULT_GAMMA: f64 = 10.0;

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch(format!("cosine of lengths {} and {}", a.len(), b.len())));
    }
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na <= NORM_EPS || nb <= NORM_EPS {
        return Err(Error::ZeroNorm);
    }
    Ok((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Similarities of one query against its clicked document and `n` negatives.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilaritySet {
    r_pos: f64,
    r_neg: Vec<f64>,
    gamma: f64,
}

impl SimilaritySet {
    pub fn new(r_pos: f64, r_neg: Vec<f64>, gamma: f64) -> Result<SimilaritySet> {
        let in_range = |r: f64| (-1.0..=1.0).contains(&r);
        if r_neg.is_empty() {
            return Err(Error::Config("at least one negative similarity is required".into()));
        }
        if !in_range(r_pos) || !r_neg.iter().all(|&r| in_range(r)) {
            return Err(Error::Config("similarities must lie in [-1, 1]".into()));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        Ok(SimilaritySet { r_pos, r_neg, gamma })
    }

    /// Builds a set straight from margins `Δ_j`, which are allowed to fall outside
    /// `[-2, 2]`; used to probe limits and derivatives of the loss.
    pub fn from_deltas(deltas: &[f64], gamma: f64) -> SimilaritySet {
        SimilaritySet {
            r_pos: 0.0,
            r_neg: deltas.iter().map(|d| -d).collect(),
            gamma,
        }
    }

    pub fn r_pos(&self) -> f64 {
        self.r_pos
    }

    pub fn r_neg(&self) -> &[f64] {
        &self.r_neg
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.r_neg.len()
    }

    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.r_neg.iter().map(move |r| self.r_pos - r)
    }

    /// Exponents `-γ Δ_j` and their shift `max(0, max_j -γ Δ_j)`.
    fn shifted_exponents(&self) -> (Vec<f64>, f64) {
        let xs: Vec<f64> = self.deltas().map(|d| -self.gamma * d).collect();
        let m = xs.iter().copied().fold(0.0, f64::max);
        (xs, m)
    }
}

pub fn loss(sims: &SimilaritySet) -> f64 {
    let (xs, m) = sims.shifted_exponents();
    if m == 0.0 {
        xs.iter().map(|x| x.exp()).sum::<f64>().ln_1p()
    } else {
        m + ((-m).exp() + xs.iter().map(|x| (x - m).exp()).sum::<f64>()).ln()
    }
}

/// `α_j = ∂loss/∂Δ_j = -γ e^{-γΔ_j} / (1 + Σ_k e^{-γΔ_k})`; every α_j ≤ 0.
pub fn alphas(sims: &SimilaritySet) -> Vec<f64> {
    let (xs, m) = sims.shifted_exponents();
    let scaled: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let denom = (-m).exp() + scaled.iter().sum::<f64>();
    scaled.iter().map(|e| -sims.gamma * e / denom).collect()
}

/// The minimized objective: the sum of per-query losses.
pub fn batch_loss(sets: &[SimilaritySet]) -> f64 {
    sets.iter().map(loss).sum()
}
