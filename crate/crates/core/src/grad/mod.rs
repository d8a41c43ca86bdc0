//! Exact gradients of the ranking loss for both encoder architectures.
//!
//! The backward passes are plain reverse-mode differentiation of a stored
//! [`ForwardTrace`]. They reproduce the closed-form LSTM-RNN gradients (error
//! signals propagated backward through time plus the gate-local terms for each
//! parameter block), organised as one reverse sweep per sequence instead of
//! forward-accumulated `∂c/∂Λ` recursions. The finite-difference oracle in
//! [`check`] is the arbiter of correctness.
//!
//! Assembly for one `(Q, D+, D-_1..D-_n)` tuple, with `α_j = ∂loss/∂Δ_j`:
//!
//! ```text
//! ∂loss/∂y_Q   = Σ_j α_j (v_Q(Q, D+) - v_Q(Q, D-_j))
//! ∂loss/∂y_D+  = (Σ_j α_j) v_D(Q, D+)
//! ∂loss/∂y_D-j = -α_j v_D(Q, D-_j)
//! ```
//!
//! Each candidate document contributes its own query-side seed; since the
//! backward pass is linear in its seed, the seeds are summed and the query trace
//! is swept once.

pub mod check;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::model::{Encoder, EncoderTrace, ForwardTrace, LstmParams, Params, RnnParams, Variant};
use crate::objective::{alphas, loss, SimilaritySet, NORM_EPS};
use crate::texthash::{SparseVec, TrigramSequence};

/// Partial derivatives of the cosine `R = a·b·c` with respect to both inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct CosineBackSignals {
    /// `y_Qᵀ y_D`
    pub a: f64,
    /// `1 / ‖y_Q‖`
    pub b: f64,
    /// `1 / ‖y_D‖`
    pub c: f64,
    /// `∂R/∂y_Q = b·c·y_D − a·b³·c·y_Q`
    pub v_q: Array1<f64>,
    /// `∂R/∂y_D = b·c·y_Q − a·b·c³·y_D`
    pub v_d: Array1<f64>,
}

impl CosineBackSignals {
    pub fn similarity(&self) -> f64 {
        (self.a * self.b * self.c).clamp(-1.0, 1.0)
    }
}

pub fn cosine_back(yq: ArrayView1<'_, f64>, yd: ArrayView1<'_, f64>) -> Result<CosineBackSignals> {
    if yq.len() != yd.len() {
        return Err(Error::DimMismatch(format!("cosine of lengths {} and {}", yq.len(), yd.len())));
    }
    let nq = yq.dot(&yq).sqrt();
    let nd = yd.dot(&yd).sqrt();
    if nq <= NORM_EPS || nd <= NORM_EPS {
        return Err(Error::ZeroNorm);
    }
    let a = yq.dot(&yd);
    let b = 1.0 / nq;
    let c = 1.0 / nd;
    let v_q = &yd * (b * c) - &yq * (a * b * b * b * c);
    let v_d = &yq * (b * c) - &yd * (a * b * c * c * c);
    Ok(CosineBackSignals { a, b, c, v_q, v_d })
}

/// Gradient accumulator with exactly the shape of the [`Encoder`] it mirrors.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet(Encoder);

impl GradientSet {
    pub fn zeros_for(encoder: &Encoder) -> GradientSet {
        GradientSet(encoder.zeros_like())
    }

    pub fn from_encoder(encoder: Encoder) -> GradientSet {
        GradientSet(encoder)
    }

    pub fn as_encoder(&self) -> &Encoder {
        &self.0
    }

    pub fn as_encoder_mut(&mut self) -> &mut Encoder {
        &mut self.0
    }

    pub fn into_encoder(self) -> Encoder {
        self.0
    }

    pub fn groups(&self) -> Vec<(String, &[f64])> {
        self.0.groups()
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.l2_norm()
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.scale(factor);
    }

    pub fn add_assign(&mut self, other: &GradientSet) -> Result<()> {
        self.0.add_scaled(1.0, &other.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.groups().iter().all(|(_, g)| g.iter().all(|&v| v == 0.0))
    }
}

fn add_sparse_outer(w: &mut Array2<f64>, delta: &Array1<f64>, l: &SparseVec) {
    for &(idx, count) in l.pairs() {
        w.column_mut(idx).scaled_add(f64::from(count), delta);
    }
}

fn add_outer(w: &mut Array2<f64>, delta: &Array1<f64>, y: &Array1<f64>) {
    let col = delta.view().insert_axis(Axis(1));
    let row = y.view().insert_axis(Axis(0));
    general_mat_mul(1.0, &col, &row, 1.0, w);
}

fn check_trace(seq: &TrigramSequence, trace: &ForwardTrace, lstm: bool) -> Result<()> {
    if trace.len() != seq.len() || (lstm && trace.gates.len() != seq.len()) {
        return Err(Error::TraceMismatch(format!(
            "trace has {} steps, sequence has {} words",
            trace.len(),
            seq.len()
        )));
    }
    Ok(())
}

/// Reverse sweep of the plain RNN, accumulating into `grad`.
///
/// `d_out` is `∂L/∂y(m)`. The error signal at step `t` is
/// `δ(t) = (1 − y(t)) ∘ (1 + y(t)) ∘ (∂L/∂y(t))`, and
/// `∂L/∂y(t−1) = W_recᵀ δ(t)`; `W` collects `δ(t) l(t)ᵀ`, `W_rec` collects
/// `δ(t) y(t−1)ᵀ`. Only the last `depth` steps are visited.
pub fn rnn_backward(
    params: &RnnParams,
    seq: &TrigramSequence,
    trace: &ForwardTrace,
    d_out: &Array1<f64>,
    depth: usize,
    grad: &mut RnnParams,
) -> Result<()> {
    check_trace(seq, trace, false)?;
    if d_out.len() != params.hidden() || grad.hidden() != params.hidden() {
        return Err(Error::DimMismatch("output gradient / accumulator size".into()));
    }
    let m = seq.len();
    let zero = Array1::<f64>::zeros(params.hidden());
    let mut dy = d_out.clone();
    for t in (m.saturating_sub(depth)..m).rev() {
        let y = &trace.outputs[t];
        let y_prev = if t > 0 { &trace.outputs[t - 1] } else { &zero };
        let delta = &dy * &y.mapv(|v| (1.0 - v) * (1.0 + v));
        add_sparse_outer(&mut grad.w, &delta, &seq.words()[t]);
        add_outer(&mut grad.w_rec, &delta, y_prev);
        grad.b += &delta;
        dy = params.w_rec.t().dot(&delta);
    }
    Ok(())
}

/// Reverse sweep of the LSTM (either variant), accumulating into `grad`.
///
/// Per step, with `dy`, `dc` the incoming signals for `y(t)` and `c(t)`:
///
/// ```text
/// δo  = dy ∘ tanh(c) ∘ o(1−o)
/// dc += dy ∘ o ∘ (1 − tanh²c) + δo ∘ Wp1
/// δi  = dc ∘ y_g ∘ i(1−i)          δg = dc ∘ i ∘ (1 − y_g²)
/// δf  = dc ∘ c(t−1) ∘ f(1−f)
/// dc(t−1) = dc ∘ f + δi ∘ Wp3 + δf ∘ Wp2
/// dy(t−1) = Σ_k Wrec_kᵀ δ_k
/// ```
///
/// The reduced variant has `f ≡ 1`, no `δf` and no peephole terms.
pub fn lstm_backward(
    params: &LstmParams,
    seq: &TrigramSequence,
    trace: &ForwardTrace,
    d_out: &Array1<f64>,
    depth: usize,
    grad: &mut LstmParams,
) -> Result<()> {
    check_trace(seq, trace, true)?;
    let cells = params.cells();
    if d_out.len() != cells || grad.cells() != cells {
        return Err(Error::DimMismatch("output gradient / accumulator size".into()));
    }
    let full = params.variant == Variant::Full;
    let m = seq.len();
    let zero = Array1::<f64>::zeros(cells);
    let mut dy = d_out.clone();
    let mut dc_carry = Array1::<f64>::zeros(cells);

    for t in (m.saturating_sub(depth)..m).rev() {
        let g = &trace.gates[t];
        let l = &seq.words()[t];
        let y_prev = if t > 0 { &trace.outputs[t - 1] } else { &zero };
        let c_prev = if t > 0 { &trace.gates[t - 1].cell } else { &zero };
        let o = &g.output_gate;
        let i = &g.input_gate;

        let d_out_gate = &dy * &g.cell_tanh;
        let delta_o = &d_out_gate * &o.mapv(|v| v * (1.0 - v));
        let mut dc = dc_carry + &dy * o * &g.cell_tanh.mapv(|v| 1.0 - v * v);
        if full {
            dc += &(&delta_o * &params.peep_output);
            grad.peep_output += &(&delta_o * &g.cell);
        }

        let delta_i = &dc * &g.cell_input * &i.mapv(|v| v * (1.0 - v));
        let delta_g = &dc * i * &g.cell_input.mapv(|v| 1.0 - v * v);
        let mut dc_prev = &dc * &g.forget_gate;

        let mut dy_prev = params.output.w_rec.t().dot(&delta_o);
        dy_prev += &params.input.w_rec.t().dot(&delta_i);
        dy_prev += &params.cell.w_rec.t().dot(&delta_g);

        if full {
            let f = &g.forget_gate;
            let delta_f = &dc * c_prev * &f.mapv(|v| v * (1.0 - v));
            dc_prev += &(&delta_f * &params.peep_forget);
            dc_prev += &(&delta_i * &params.peep_input);
            grad.peep_forget += &(&delta_f * c_prev);
            grad.peep_input += &(&delta_i * c_prev);
            dy_prev += &params.forget.w_rec.t().dot(&delta_f);
            add_sparse_outer(&mut grad.forget.w, &delta_f, l);
            add_outer(&mut grad.forget.w_rec, &delta_f, y_prev);
            grad.forget.b += &delta_f;
        }

        for (block, delta) in [
            (&mut grad.output, &delta_o),
            (&mut grad.input, &delta_i),
            (&mut grad.cell, &delta_g),
        ] {
            add_sparse_outer(&mut block.w, delta, l);
            add_outer(&mut block.w_rec, delta, y_prev);
            block.b += delta;
        }

        dy = dy_prev;
        dc_carry = dc_prev;
    }
    Ok(())
}

/// Reverse sweep through one direction's parameters.
pub fn params_backward(
    params: &Params,
    seq: &TrigramSequence,
    trace: &ForwardTrace,
    d_out: &Array1<f64>,
    depth: usize,
    grad: &mut Params,
) -> Result<()> {
    match (params, grad) {
        (Params::Rnn(p), Params::Rnn(g)) => rnn_backward(p, seq, trace, d_out, depth, g),
        (Params::Lstm(p), Params::Lstm(g)) => lstm_backward(p, seq, trace, d_out, depth, g),
        _ => Err(Error::DimMismatch("gradient architecture differs from parameters".into())),
    }
}

/// Backpropagates `∂L/∂embedding` through an encoder; bidirectional encoders
/// split the signal between the two halves of the concatenated embedding.
pub fn encoder_backward(
    encoder: &Encoder,
    seq: &TrigramSequence,
    trace: &EncoderTrace,
    d_embedding: &Array1<f64>,
    depth: usize,
    grad: &mut GradientSet,
) -> Result<()> {
    if d_embedding.len() != encoder.embedding_dim() {
        return Err(Error::DimMismatch("embedding gradient length".into()));
    }
    let cells = encoder.cells();
    let acc = grad.as_encoder_mut();
    match (&encoder.backward, &trace.backward, &mut acc.backward) {
        (None, None, None) => {
            params_backward(&encoder.forward, seq, &trace.forward, d_embedding, depth, &mut acc.forward)
        }
        (Some(bp), Some(bt), Some(bg)) => {
            let d_fwd = d_embedding.slice(s![..cells]).to_owned();
            let d_bwd = d_embedding.slice(s![cells..]).to_owned();
            params_backward(&encoder.forward, seq, &trace.forward, &d_fwd, depth, &mut acc.forward)?;
            params_backward(bp, &seq.reversed(), bt, &d_bwd, depth, bg)
        }
        _ => Err(Error::TraceMismatch("directionality of encoder, trace and gradient differ".into())),
    }
}

/// One training tuple: a query, its clicked document and sampled negatives.
#[derive(Clone, Copy, Debug)]
pub struct ClickTuple<'a> {
    pub query: &'a TrigramSequence,
    pub positive: &'a TrigramSequence,
    pub negatives: &'a [&'a TrigramSequence],
}

/// Forward pass over a tuple; returns the similarity set.
pub fn tuple_similarities(
    q_enc: &Encoder,
    d_enc: &Encoder,
    tuple: &ClickTuple<'_>,
    gamma: f64,
) -> Result<SimilaritySet> {
    let yq = q_enc.trace(tuple.query)?.embedding();
    let yp = d_enc.trace(tuple.positive)?.embedding();
    let r_pos = crate::objective::cosine(yq.view(), yp.view())?;
    let r_neg = tuple
        .negatives
        .iter()
        .map(|n| {
            let yn = d_enc.trace(n)?.embedding();
            crate::objective::cosine(yq.view(), yn.view())
        })
        .collect::<Result<Vec<_>>>()?;
    SimilaritySet::new(r_pos, r_neg, gamma)
}

/// Loss of one tuple.
pub fn tuple_loss(q_enc: &Encoder, d_enc: &Encoder, tuple: &ClickTuple<'_>, gamma: f64) -> Result<f64> {
    Ok(loss(&tuple_similarities(q_enc, d_enc, tuple, gamma)?))
}

/// Accumulates the gradient of one tuple's loss into `gq` (query side) and `gd`
/// (document side) and returns the loss. Only the last `depth` words of each
/// sequence are unfolded.
pub fn tuple_backward(
    q_enc: &Encoder,
    d_enc: &Encoder,
    tuple: &ClickTuple<'_>,
    gamma: f64,
    depth: usize,
    gq: &mut GradientSet,
    gd: &mut GradientSet,
) -> Result<f64> {
    if depth == 0 {
        return Err(Error::Config("truncation depth must be >= 1".into()));
    }
    let q_trace = q_enc.trace(tuple.query)?;
    let p_trace = d_enc.trace(tuple.positive)?;
    let n_traces = tuple
        .negatives
        .iter()
        .map(|n| d_enc.trace(n))
        .collect::<Result<Vec<_>>>()?;

    let yq = q_trace.embedding();
    let pos = cosine_back(yq.view(), p_trace.embedding().view())?;
    let negs = n_traces
        .iter()
        .map(|t| cosine_back(yq.view(), t.embedding().view()))
        .collect::<Result<Vec<_>>>()?;

    let sims = SimilaritySet::new(
        pos.similarity(),
        negs.iter().map(CosineBackSignals::similarity).collect(),
        gamma,
    )?;
    let alpha = alphas(&sims);
    let alpha_sum: f64 = alpha.iter().sum();

    let mut seed_q = &pos.v_q * alpha_sum;
    for (a, neg) in alpha.iter().zip(&negs) {
        seed_q.scaled_add(-a, &neg.v_q);
    }
    encoder_backward(q_enc, tuple.query, &q_trace, &seed_q, depth, gq)?;

    let seed_p = &pos.v_d * alpha_sum;
    encoder_backward(d_enc, tuple.positive, &p_trace, &seed_p, depth, gd)?;
    for ((a, neg), (seq, trace)) in alpha.iter().zip(&negs).zip(tuple.negatives.iter().zip(&n_traces)) {
        let seed = &neg.v_d * -a;
        encoder_backward(d_enc, seq, trace, &seed, depth, gd)?;
    }
    Ok(loss(&sims))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Arch;
    use ndarray::arr1;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cosine_back_stationary_at_identical_unit_vectors() {
        let u = arr1(&[0.6, 0.8]);
        let s = cosine_back(u.view(), u.view()).unwrap();
        assert!((s.a - 1.0).abs() < 1e-15 && (s.b - 1.0).abs() < 1e-15 && (s.c - 1.0).abs() < 1e-15);
        assert!(s.v_q.iter().all(|v| v.abs() < 1e-15));
        assert!(s.v_d.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn cosine_back_orthogonal() {
        let s = cosine_back(arr1(&[1.0, 0.0]).view(), arr1(&[0.0, 1.0]).view()).unwrap();
        assert_eq!(s.a, 0.0);
        assert_eq!((s.b, s.c), (1.0, 1.0));
        assert_eq!(s.v_q, arr1(&[0.0, 1.0]));
        assert_eq!(s.v_d, arr1(&[1.0, 0.0]));
    }

    #[test]
    fn cosine_back_matches_finite_differences() {
        let yq = arr1(&[0.4, -1.0, 0.7]) * 2.0;
        let yd = arr1(&[0.9, 0.2, -0.3]);
        let s = cosine_back(yq.view(), yd.view()).unwrap();
        let h = 1e-6;
        let cos = |a: &Array1<f64>, b: &Array1<f64>| crate::objective::cosine(a.view(), b.view()).unwrap();
        for k in 0..3 {
            let mut p = yq.clone();
            let mut m = yq.clone();
            p[k] += h;
            m[k] -= h;
            let fd = (cos(&p, &yd) - cos(&m, &yd)) / (2.0 * h);
            assert!((fd - s.v_q[k]).abs() < 1e-9);
            let mut p = yd.clone();
            let mut m = yd.clone();
            p[k] += h;
            m[k] -= h;
            let fd = (cos(&yq, &p) - cos(&yq, &m)) / (2.0 * h);
            assert!((fd - s.v_d[k]).abs() < 1e-9);
        }
        assert!(matches!(cosine_back(arr1(&[0.0]).view(), arr1(&[1.0]).view()), Err(Error::ZeroNorm)));
    }

    #[test]
    fn zero_gamma_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = check::Instance::random(Arch::Rnn, Variant::Full, false, 3, 6, 3, 2, 1, 0.0, &mut rng);
        let (gq, gd, _) = inst.analytic(&inst.query_encoder, &inst.doc_encoder, 100).unwrap();
        assert!(gq.is_zero() && gd.is_zero());
    }

    #[test]
    fn truncation_irrelevant_for_single_word() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = check::Instance::random(Arch::Lstm, Variant::Full, false, 3, 6, 1, 2, 1, 10.0, &mut rng);
        let a = inst.analytic(&inst.query_encoder, &inst.doc_encoder, 1).unwrap();
        let b = inst.analytic(&inst.query_encoder, &inst.doc_encoder, 1).unwrap();
        assert_eq!(a, b);
        let long = check::Instance::random(Arch::Rnn, Variant::Full, false, 3, 6, 4, 2, 1, 10.0, &mut rng);
        let at4 = long.analytic(&long.query_encoder, &long.doc_encoder, 4).unwrap();
        let at9 = long.analytic(&long.query_encoder, &long.doc_encoder, 9).unwrap();
        assert_eq!(at4, at9);
        let at1 = long.analytic(&long.query_encoder, &long.doc_encoder, 1).unwrap();
        assert_ne!(at1.0, at4.0);
    }

    #[test]
    fn saturated_loss_gives_negligible_gradient() {
        // Positive is the query sentence itself under a shared encoder, so R+ = 1;
        // with a large γ any clear margin drives every α to ~0.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = check::Instance::random(Arch::Lstm, Variant::Reduced, false, 4, 8, 3, 1, 2, 1e3, &mut rng);
        let enc = &inst.query_encoder;
        let query = &inst.tuples[0].query;
        let other = &inst.tuples[1].query;
        let negatives = [other];
        let tuple = ClickTuple { query, positive: query, negatives: &negatives };
        let sims = tuple_similarities(enc, enc, &tuple, 1e3).unwrap();
        assert!((sims.r_pos() - 1.0).abs() < 1e-12);
        assert!(sims.deltas().all(|d| d > 0.05), "{sims:?}");
        let mut gq = GradientSet::zeros_for(enc);
        let mut gd = GradientSet::zeros_for(enc);
        tuple_backward(enc, enc, &tuple, 1e3, 10, &mut gq, &mut gd).unwrap();
        assert!(gq.l2_norm() < 1e-8 && gd.l2_norm() < 1e-8);
    }

    #[test]
    fn mismatched_trace_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = check::Instance::random(Arch::Rnn, Variant::Full, false, 3, 6, 3, 1, 1, 1.0, &mut rng);
        let enc = &inst.query_encoder;
        let seq = &inst.tuples[0].query;
        let other = seq.prefix(1);
        let trace = enc.trace(&other).unwrap();
        let mut g = GradientSet::zeros_for(enc);
        let d = Array1::ones(enc.embedding_dim());
        if seq.len() > 1 {
            assert!(matches!(
                encoder_backward(enc, seq, &trace, &d, 5, &mut g),
                Err(Error::TraceMismatch(_))
            ));
        }
    }
}
