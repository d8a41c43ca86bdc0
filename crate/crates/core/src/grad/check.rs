//! Central finite differences as the reference gradient, and a harness that
//! compares them against the analytic backward passes on random small instances.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grad::{tuple_backward, tuple_loss, ClickTuple, GradientSet};
use crate::model::{Arch, Encoder, Variant};
use crate::texthash::{SparseVec, TrigramSequence};

/// Entries whose reference derivative is below this are compared absolutely.
pub const SMALL_GRADIENT: f64 = 1e-8;
pub const MAX_RELATIVE_ERROR: f64 = 1e-4;
pub const DEFAULT_STEP: f64 = 1e-5;
/// Parameter range for random gradcheck instances; wider than the training
/// initialization so gradients are well away from zero.
pub const INSTANCE_PARAM_RANGE: f64 = 0.5;

/// `(f(Λ + h e_k) − f(Λ − h e_k)) / 2h` for every active scalar of `params`.
pub fn fd_gradient<F>(mut f: F, params: &Encoder, h: f64) -> GradientSet
where
    F: FnMut(&Encoder) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = params.clone();
    let mut out = GradientSet::zeros_for(params);
    let sizes: Vec<usize> = params.groups().iter().map(|(_, g)| g.len()).collect();
    for (gi, &size) in sizes.iter().enumerate() {
        for k in 0..size {
            let orig = probe.groups()[gi].1[k];
            probe.groups_mut()[gi].1[k] = orig + h;
            let plus = f(&probe);
            probe.groups_mut()[gi].1[k] = orig - h;
            let minus = f(&probe);
            probe.groups_mut()[gi].1[k] = orig;
            out.as_encoder_mut().groups_mut()[gi].1[k] = (plus - minus) / (2.0 * h);
        }
    }
    out
}

/// A tuple with owned sequences.
#[derive(Clone, Debug)]
pub struct OwnedTuple {
    pub query: TrigramSequence,
    pub positive: TrigramSequence,
    pub negatives: Vec<TrigramSequence>,
}

/// A random batch of tuples with random query- and document-side encoders.
#[derive(Clone, Debug)]
pub struct Instance {
    pub query_encoder: Encoder,
    pub doc_encoder: Encoder,
    pub tuples: Vec<OwnedTuple>,
    pub gamma: f64,
}

pub fn random_sequence<R: Rng>(dim: usize, len: usize, rng: &mut R) -> TrigramSequence {
    let words = (0..len)
        .map(|_| {
            let mut pairs: Vec<(usize, u32)> = Vec::new();
            for i in 0..dim {
                if rng.random_bool(0.35) {
                    pairs.push((i, rng.random_range(1..=2)));
                }
            }
            if pairs.is_empty() {
                pairs.push((rng.random_range(0..dim), 1));
            }
            SparseVec::new(pairs, dim).expect("generated pairs are sorted and in range")
        })
        .collect();
    TrigramSequence::new(words).expect("length >= 1")
}

impl Instance {
    #[allow(clippy::too_many_arguments)]
    pub fn random<R: Rng>(
        arch: Arch,
        variant: Variant,
        bidirectional: bool,
        cells: usize,
        dim: usize,
        max_len: usize,
        negatives: usize,
        records: usize,
        gamma: f64,
        rng: &mut R,
    ) -> Instance {
        let range = INSTANCE_PARAM_RANGE;
        let query_encoder = Encoder::random(arch, variant, bidirectional, cells, dim, range, rng);
        let doc_encoder = Encoder::random(arch, variant, bidirectional, cells, dim, range, rng);
        let seq = |rng: &mut R| {
            let len = rng.random_range(1..=max_len);
            random_sequence(dim, len, rng)
        };
        let tuples = (0..records)
            .map(|_| OwnedTuple {
                query: seq(rng),
                positive: seq(rng),
                negatives: (0..negatives).map(|_| seq(rng)).collect(),
            })
            .collect();
        Instance {
            query_encoder,
            doc_encoder,
            tuples,
            gamma,
        }
    }

    fn with_tuples<T>(&self, mut f: impl FnMut(&ClickTuple<'_>) -> T) -> Vec<T> {
        self.tuples
            .iter()
            .map(|t| {
                let negs: Vec<&TrigramSequence> = t.negatives.iter().collect();
                f(&ClickTuple {
                    query: &t.query,
                    positive: &t.positive,
                    negatives: &negs,
                })
            })
            .collect()
    }

    /// Batch loss under the given encoders.
    pub fn loss(&self, q: &Encoder, d: &Encoder) -> Result<f64> {
        self.with_tuples(|t| tuple_loss(q, d, t, self.gamma)).into_iter().sum()
    }

    /// Analytic gradients `(query side, document side, batch loss)`.
    pub fn analytic(&self, q: &Encoder, d: &Encoder, depth: usize) -> Result<(GradientSet, GradientSet, f64)> {
        let mut gq = GradientSet::zeros_for(q);
        let mut gd = GradientSet::zeros_for(d);
        let losses = self.with_tuples(|t| tuple_backward(q, d, t, self.gamma, depth, &mut gq, &mut gd));
        let total = losses.into_iter().sum::<Result<f64>>()?;
        Ok((gq, gd, total))
    }

    /// Finite-difference gradients `(query side, document side)`.
    pub fn numeric(&self, h: f64) -> (GradientSet, GradientSet) {
        let d = &self.doc_encoder;
        let q = &self.query_encoder;
        let gq = fd_gradient(|p| self.loss(p, d).unwrap_or(f64::NAN), q, h);
        let gd = fd_gradient(|p| self.loss(q, p).unwrap_or(f64::NAN), d, h);
        (gq, gd)
    }
}

/// Worst discrepancy for one parameter group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupError {
    /// `query.<group>` or `document.<group>`.
    pub group: String,
    pub entries: usize,
    /// Max `|a − f| / max(|a|, |f|)` over entries with `|f| >= 1e-8`.
    pub max_rel_error: f64,
    /// Max `|a − f|` over entries with `|f| < 1e-8`.
    pub max_abs_error_small: f64,
}

impl GroupError {
    pub fn passes(&self) -> bool {
        self.max_rel_error <= MAX_RELATIVE_ERROR && self.max_abs_error_small <= SMALL_GRADIENT
    }

    fn merge(&mut self, other: &GroupError) {
        self.entries += other.entries;
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.max_abs_error_small = self.max_abs_error_small.max(other.max_abs_error_small);
    }
}

/// Per-group comparison of two gradient sets of the same shape.
pub fn compare(prefix: &str, analytic: &GradientSet, numeric: &GradientSet) -> Vec<GroupError> {
    analytic
        .groups()
        .into_iter()
        .zip(numeric.groups())
        .map(|((name, a), (_, f))| {
            let mut e = GroupError {
                group: format!("{prefix}.{name}"),
                entries: a.len(),
                max_rel_error: 0.0,
                max_abs_error_small: 0.0,
            };
            for (&a, &f) in a.iter().zip(f) {
                let diff = (a - f).abs();
                if !diff.is_finite() {
                    e.max_rel_error = f64::INFINITY;
                } else if f.abs() < SMALL_GRADIENT {
                    e.max_abs_error_small = e.max_abs_error_small.max(diff);
                } else {
                    e.max_rel_error = e.max_rel_error.max(diff / a.abs().max(f.abs()));
                }
            }
            e
        })
        .collect()
}

/// Settings for a multi-seed gradient check.
#[derive(Clone, Debug, Serialize)]
pub struct GradcheckConfig {
    pub arch: Arch,
    pub variant: Variant,
    pub bidirectional: bool,
    /// Cell counts are drawn uniformly from this inclusive range.
    pub cells: (usize, usize),
    /// Trigram dimensions are drawn uniformly from this inclusive range.
    pub dim: (usize, usize),
    pub max_len: usize,
    pub negatives: usize,
    pub records: usize,
    pub gammas: Vec<f64>,
    pub seeds: u64,
    pub step: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            arch: Arch::Lstm,
            variant: Variant::Full,
            bidirectional: false,
            cells: (3, 8),
            dim: (6, 20),
            max_len: 4,
            negatives: 2,
            records: 2,
            gammas: vec![1.0, 10.0],
            seeds: 10,
            step: DEFAULT_STEP,
        }
    }
}

impl GradcheckConfig {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (usize, usize)| lo >= 1 && lo <= hi;
        if !range_ok(self.cells) || !range_ok(self.dim) {
            return Err(Error::Config("cell and dimension ranges must be nonempty and >= 1".into()));
        }
        if self.max_len == 0 || self.negatives == 0 || self.records == 0 || self.seeds == 0 {
            return Err(Error::Config("length, negatives, records and seeds must be >= 1".into()));
        }
        if self.gammas.is_empty() || self.step.is_nan() || self.step <= 0.0 {
            return Err(Error::Config("need at least one gamma and a positive step".into()));
        }
        Ok(())
    }
}

/// Runs the analytic-vs-finite-difference comparison over `cfg.seeds` random
/// instances (cycling through `cfg.gammas`) and returns the worst error per group.
pub fn gradcheck(cfg: &GradcheckConfig) -> Result<Vec<GroupError>> {
    use rand::SeedableRng;
    cfg.validate()?;
    let mut worst: Vec<GroupError> = Vec::new();
    for seed in 0..cfg.seeds {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cells = rng.random_range(cfg.cells.0..=cfg.cells.1);
        let dim = rng.random_range(cfg.dim.0..=cfg.dim.1);
        let gamma = cfg.gammas[(seed as usize) % cfg.gammas.len()];
        let inst = Instance::random(
            cfg.arch,
            cfg.variant,
            cfg.bidirectional,
            cells,
            dim,
            cfg.max_len,
            cfg.negatives,
            cfg.records,
            gamma,
            &mut rng,
        );
        let (aq, ad, _) = inst.analytic(&inst.query_encoder, &inst.doc_encoder, usize::MAX)?;
        let (nq, nd) = inst.numeric(cfg.step);
        let errors = compare("query", &aq, &nq).into_iter().chain(compare("document", &ad, &nd));
        if worst.is_empty() {
            worst = errors.collect();
        } else {
            for (w, e) in worst.iter_mut().zip(errors) {
                w.merge(&e);
            }
        }
    }
    Ok(worst)
}
