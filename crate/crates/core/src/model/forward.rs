use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::model::params::{Encoder, LstmParams, Params, RnnParams, Side, Variant};
use crate::texthash::{SparseVec, TrigramSequence};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += W · l` for a sparse count vector `l`.
fn add_sparse_product(out: &mut Array1<f64>, w: &Array2<f64>, l: &SparseVec) {
    for &(idx, count) in l.pairs() {
        out.scaled_add(f64::from(count), &w.column(idx));
    }
}

fn preactivation(
    w: &Array2<f64>,
    w_rec: &Array2<f64>,
    b: &Array1<f64>,
    l: &SparseVec,
    y_prev: &Array1<f64>,
) -> Array1<f64> {
    let mut a = w_rec.dot(y_prev);
    a += b;
    add_sparse_product(&mut a, w, l);
    a
}

/// Gate activations of one LSTM step.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmStep {
    pub input_gate: Array1<f64>,
    /// All ones in the reduced variant.
    pub forget_gate: Array1<f64>,
    pub output_gate: Array1<f64>,
    /// Cell state `c(t)`.
    pub cell: Array1<f64>,
    /// `tanh(c(t))`, kept so derivatives never re-evaluate the nonlinearity.
    pub cell_tanh: Array1<f64>,
    /// Ungated cell input `y_g(t)`.
    pub cell_input: Array1<f64>,
}

/// Per-timestep record of a forward pass. `outputs[t]` is `y(t+1)`; `gates` is
/// empty for the plain RNN.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub outputs: Vec<Array1<f64>>,
    pub gates: Vec<LstmStep>,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn last_output(&self) -> &Array1<f64> {
        self.outputs.last().expect("traces are never empty")
    }
}

fn check_input(params_dim: usize, seq: &TrigramSequence) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::DimMismatch("empty sequence".into()));
    }
    if seq.dim() != params_dim {
        return Err(Error::DimMismatch(format!(
            "sequence dimension {} vs model input dimension {params_dim}",
            seq.dim()
        )));
    }
    Ok(())
}

/// Plain RNN forward pass from `initial` (zero when `None`).
pub fn rnn_forward(
    params: &RnnParams,
    seq: &TrigramSequence,
    initial: Option<&Array1<f64>>,
) -> Result<ForwardTrace> {
    check_input(params.input_dim(), seq)?;
    let hidden = params.hidden();
    let mut y = match initial {
        Some(v) if v.len() != hidden => {
            return Err(Error::DimMismatch(format!("initial state has length {}", v.len())))
        }
        Some(v) => v.clone(),
        None => Array1::zeros(hidden),
    };
    let mut outputs = Vec::with_capacity(seq.len());
    for l in seq.words() {
        y = preactivation(&params.w, &params.w_rec, &params.b, l, &y).mapv_into(f64::tanh);
        outputs.push(y.clone());
    }
    Ok(ForwardTrace {
        outputs,
        gates: Vec::new(),
    })
}

/// LSTM forward pass with zero initial cell state and output.
///
/// ```text
/// y_g(t) = tanh(W4 l(t) + Wrec4 y(t-1) + b4)
/// i(t)   = σ(W3 l(t) + Wrec3 y(t-1) + Wp3 ∘ c(t-1) + b3)
/// f(t)   = σ(W2 l(t) + Wrec2 y(t-1) + Wp2 ∘ c(t-1) + b2)      (≡ 1 when reduced)
/// c(t)   = f(t) ∘ c(t-1) + i(t) ∘ y_g(t)
/// o(t)   = σ(W1 l(t) + Wrec1 y(t-1) + Wp1 ∘ c(t) + b1)
/// y(t)   = o(t) ∘ tanh(c(t))
/// ```
pub fn lstm_forward(params: &LstmParams, seq: &TrigramSequence) -> Result<ForwardTrace> {
    check_input(params.input_dim(), seq)?;
    let cells = params.cells();
    let full = params.variant == Variant::Full;
    let mut y = Array1::<f64>::zeros(cells);
    let mut c = Array1::<f64>::zeros(cells);
    let mut outputs = Vec::with_capacity(seq.len());
    let mut gates = Vec::with_capacity(seq.len());

    for l in seq.words() {
        let cell_input = preactivation(&params.cell.w, &params.cell.w_rec, &params.cell.b, l, &y)
            .mapv_into(f64::tanh);

        let mut a_in = preactivation(&params.input.w, &params.input.w_rec, &params.input.b, l, &y);
        let forget_gate = if full {
            a_in += &(&params.peep_input * &c);
            let mut a_f =
                preactivation(&params.forget.w, &params.forget.w_rec, &params.forget.b, l, &y);
            a_f += &(&params.peep_forget * &c);
            a_f.mapv_into(sigmoid)
        } else {
            Array1::ones(cells)
        };
        let input_gate = a_in.mapv_into(sigmoid);

        let cell = &forget_gate * &c + &input_gate * &cell_input;
        let cell_tanh = cell.mapv(f64::tanh);

        let mut a_out =
            preactivation(&params.output.w, &params.output.w_rec, &params.output.b, l, &y);
        if full {
            a_out += &(&params.peep_output * &cell);
        }
        let output_gate = a_out.mapv_into(sigmoid);

        y = &output_gate * &cell_tanh;
        c = cell.clone();
        outputs.push(y.clone());
        gates.push(LstmStep {
            input_gate,
            forget_gate,
            output_gate,
            cell,
            cell_tanh,
            cell_input,
        });
    }
    Ok(ForwardTrace { outputs, gates })
}

/// Dispatches to the architecture's forward pass (zero initial state).
pub fn forward(params: &Params, seq: &TrigramSequence) -> Result<ForwardTrace> {
    match params {
        Params::Rnn(p) => rnn_forward(p, seq, None),
        Params::Lstm(p) => lstm_forward(p, seq),
    }
}

/// Sentence embedding: the output at the last word.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub v: Array1<f64>,
    pub side: Side,
}

impl Embedding {
    pub fn norm(&self) -> f64 {
        self.v.dot(&self.v).sqrt()
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.v.view()
    }
}

pub fn embed(params: &Params, seq: &TrigramSequence, side: Side) -> Result<Embedding> {
    let trace = forward(params, seq)?;
    Ok(Embedding {
        v: trace.last_output().clone(),
        side,
    })
}

/// `[forward(seq).y(m) ; backward(reverse(seq)).y(m)]`.
pub fn embed_bidirectional(
    fwd: &Params,
    bwd: &Params,
    seq: &TrigramSequence,
    side: Side,
) -> Result<Embedding> {
    if fwd.cells() != bwd.cells() {
        return Err(Error::DimMismatch("forward and backward cell counts differ".into()));
    }
    let left = embed(fwd, seq, side)?;
    let right = embed(bwd, &seq.reversed(), side)?;
    let v = ndarray::concatenate![Axis(0), left.v.view(), right.v.view()];
    Ok(Embedding { v, side })
}

/// Forward traces of both reading directions; the backward trace runs over the
/// reversed sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderTrace {
    pub forward: ForwardTrace,
    pub backward: Option<ForwardTrace>,
}

impl EncoderTrace {
    pub fn embedding(&self) -> Array1<f64> {
        match &self.backward {
            None => self.forward.last_output().clone(),
            Some(b) => ndarray::concatenate![
                Axis(0),
                self.forward.last_output().view(),
                b.last_output().view()
            ],
        }
    }
}

impl Encoder {
    pub fn trace(&self, seq: &TrigramSequence) -> Result<EncoderTrace> {
        let forward = forward(&self.forward, seq)?;
        let backward = match &self.backward {
            Some(b) => Some(self::forward(b, &seq.reversed())?),
            None => None,
        };
        Ok(EncoderTrace { forward, backward })
    }

    pub fn embed(&self, seq: &TrigramSequence, side: Side) -> Result<Embedding> {
        match &self.backward {
            None => embed(&self.forward, seq, side),
            Some(b) => embed_bidirectional(&self.forward, b, seq, side),
        }
    }
}
