use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default half-width of the uniform initialization interval.
pub const INIT_RANGE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Rnn,
    Lstm,
}

/// `Full` is the LSTM with forget gate and peepholes; `Reduced` fixes the forget
/// gate at one and drops the peepholes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Reduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Query,
    Document,
}

macro_rules! impl_enum_text {
    ($ty:ty { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(<$ty>::$variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($text => Ok(<$ty>::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"), other
                    ))),
                }
            }
        }
    };
}

impl_enum_text!(Arch { Rnn => "rnn", Lstm => "lstm" });
impl_enum_text!(Variant { Full => "full", Reduced => "reduced" });
impl_enum_text!(Side { Query => "query", Document => "document" });

fn uniform_matrix<R: Rng>(rows: usize, cols: usize, range: f64, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-range..=range))
}

fn uniform_vector<R: Rng>(len: usize, range: f64, rng: &mut R) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng.random_range(-range..=range))
}

/// Plain recurrent layer: `y(t) = tanh(W l(t) + W_rec y(t-1) + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnParams {
    /// `[hidden × trigram_dim]`
    pub w: Array2<f64>,
    /// `[hidden × hidden]`
    pub w_rec: Array2<f64>,
    pub b: Array1<f64>,
}

impl RnnParams {
    pub fn zeros(hidden: usize, input_dim: usize) -> RnnParams {
        RnnParams {
            w: Array2::zeros((hidden, input_dim)),
            w_rec: Array2::zeros((hidden, hidden)),
            b: Array1::zeros(hidden),
        }
    }

    pub fn random<R: Rng>(hidden: usize, input_dim: usize, range: f64, rng: &mut R) -> RnnParams {
        RnnParams {
            w: uniform_matrix(hidden, input_dim, range, rng),
            w_rec: uniform_matrix(hidden, hidden, range, rng),
            b: uniform_vector(hidden, range, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }
}

/// Input, recurrent and bias weights feeding one LSTM gate (or the cell input).
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    /// `[cells × trigram_dim]`
    pub w: Array2<f64>,
    /// `[cells × cells]`
    pub w_rec: Array2<f64>,
    pub b: Array1<f64>,
}

impl GateParams {
    fn zeros(cells: usize, input_dim: usize) -> GateParams {
        GateParams {
            w: Array2::zeros((cells, input_dim)),
            w_rec: Array2::zeros((cells, cells)),
            b: Array1::zeros(cells),
        }
    }

    fn random<R: Rng>(cells: usize, input_dim: usize, range: f64, rng: &mut R) -> GateParams {
        GateParams {
            w: uniform_matrix(cells, input_dim, range, rng),
            w_rec: uniform_matrix(cells, cells, range, rng),
            b: uniform_vector(cells, range, rng),
        }
    }
}

/// LSTM cell parameters.
///
/// All four weight blocks and the three diagonal peepholes are always allocated so
/// that both variants run through one forward/backward code path. In the
/// `Reduced` variant the forget block and the peepholes are never read and are not
/// part of [`Params::groups`], so they are neither trained nor checkpointed.
///
/// Block correspondence with the usual LSTM-RNN numbering: `output` is block 1,
/// `forget` block 2, `input` block 3 and `cell` (the ungated cell input) block 4.
/// Peepholes are indexed the same way (`peep_output` = 1, `peep_forget` = 2,
/// `peep_input` = 3).
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub variant: Variant,
    pub output: GateParams,
    pub forget: GateParams,
    pub input: GateParams,
    pub cell: GateParams,
    pub peep_output: Array1<f64>,
    pub peep_forget: Array1<f64>,
    pub peep_input: Array1<f64>,
}

impl LstmParams {
    pub fn zeros(variant: Variant, cells: usize, input_dim: usize) -> LstmParams {
        LstmParams {
            variant,
            output: GateParams::zeros(cells, input_dim),
            forget: GateParams::zeros(cells, input_dim),
            input: GateParams::zeros(cells, input_dim),
            cell: GateParams::zeros(cells, input_dim),
            peep_output: Array1::zeros(cells),
            peep_forget: Array1::zeros(cells),
            peep_input: Array1::zeros(cells),
        }
    }

    /// Uniform initialization of the active parameters; inactive ones stay zero.
    pub fn random<R: Rng>(
        variant: Variant,
        cells: usize,
        input_dim: usize,
        range: f64,
        rng: &mut R,
    ) -> LstmParams {
        let mut p = LstmParams::zeros(variant, cells, input_dim);
        p.output = GateParams::random(cells, input_dim, range, rng);
        p.input = GateParams::random(cells, input_dim, range, rng);
        p.cell = GateParams::random(cells, input_dim, range, rng);
        if variant == Variant::Full {
            p.forget = GateParams::random(cells, input_dim, range, rng);
            p.peep_output = uniform_vector(cells, range, rng);
            p.peep_forget = uniform_vector(cells, range, rng);
            p.peep_input = uniform_vector(cells, range, rng);
        }
        p
    }

    pub fn cells(&self) -> usize {
        self.output.b.len()
    }

    pub fn input_dim(&self) -> usize {
        self.output.w.ncols()
    }
}

/// Parameters of one reading direction of one side.
#[derive(Clone, Debug, PartialEq)]
pub enum Params {
    Rnn(RnnParams),
    Lstm(LstmParams),
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("parameter matrices are standard layout")
}

fn slice_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("parameter matrices are standard layout")
}

fn vslice(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("parameter vectors are contiguous")
}

fn vslice_mut(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("parameter vectors are contiguous")
}

impl Params {
    pub fn zeros(arch: Arch, variant: Variant, cells: usize, input_dim: usize) -> Params {
        match arch {
            Arch::Rnn => Params::Rnn(RnnParams::zeros(cells, input_dim)),
            Arch::Lstm => Params::Lstm(LstmParams::zeros(variant, cells, input_dim)),
        }
    }

    pub fn random<R: Rng>(
        arch: Arch,
        variant: Variant,
        cells: usize,
        input_dim: usize,
        range: f64,
        rng: &mut R,
    ) -> Params {
        match arch {
            Arch::Rnn => Params::Rnn(RnnParams::random(cells, input_dim, range, rng)),
            Arch::Lstm => Params::Lstm(LstmParams::random(variant, cells, input_dim, range, rng)),
        }
    }

    pub fn arch(&self) -> Arch {
        match self {
            Params::Rnn(_) => Arch::Rnn,
            Params::Lstm(_) => Arch::Lstm,
        }
    }

    /// `Full` for plain RNNs, which have no variant.
    pub fn variant(&self) -> Variant {
        match self {
            Params::Rnn(_) => Variant::Full,
            Params::Lstm(p) => p.variant,
        }
    }

    /// Hidden units (RNN) or memory cells (LSTM).
    pub fn cells(&self) -> usize {
        match self {
            Params::Rnn(p) => p.hidden(),
            Params::Lstm(p) => p.cells(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Params::Rnn(p) => p.input_dim(),
            Params::Lstm(p) => p.input_dim(),
        }
    }

    /// Active parameter tensors, flattened row-major, in checkpoint order.
    pub fn groups(&self) -> Vec<(&'static str, &[f64])> {
        match self {
            Params::Rnn(p) => vec![("w", slice(&p.w)), ("w_rec", slice(&p.w_rec)), ("b", vslice(&p.b))],
            Params::Lstm(p) => {
                let mut g = Vec::with_capacity(15);
                g.push(("output.w", slice(&p.output.w)));
                if p.variant == Variant::Full {
                    g.push(("forget.w", slice(&p.forget.w)));
                }
                g.push(("input.w", slice(&p.input.w)));
                g.push(("cell.w", slice(&p.cell.w)));
                g.push(("output.w_rec", slice(&p.output.w_rec)));
                if p.variant == Variant::Full {
                    g.push(("forget.w_rec", slice(&p.forget.w_rec)));
                }
                g.push(("input.w_rec", slice(&p.input.w_rec)));
                g.push(("cell.w_rec", slice(&p.cell.w_rec)));
                if p.variant == Variant::Full {
                    g.push(("output.peephole", vslice(&p.peep_output)));
                    g.push(("forget.peephole", vslice(&p.peep_forget)));
                    g.push(("input.peephole", vslice(&p.peep_input)));
                }
                g.push(("output.b", vslice(&p.output.b)));
                if p.variant == Variant::Full {
                    g.push(("forget.b", vslice(&p.forget.b)));
                }
                g.push(("input.b", vslice(&p.input.b)));
                g.push(("cell.b", vslice(&p.cell.b)));
                g
            }
        }
    }

    /// Mutable counterpart of [`Params::groups`], same order.
    pub fn groups_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        match self {
            Params::Rnn(p) => vec![
                ("w", slice_mut(&mut p.w)),
                ("w_rec", slice_mut(&mut p.w_rec)),
                ("b", vslice_mut(&mut p.b)),
            ],
            Params::Lstm(p) => {
                let full = p.variant == Variant::Full;
                let LstmParams {
                    output,
                    forget,
                    input,
                    cell,
                    peep_output,
                    peep_forget,
                    peep_input,
                    ..
                } = p;
                let mut g: Vec<(&'static str, &mut [f64])> = Vec::with_capacity(15);
                g.push(("output.w", slice_mut(&mut output.w)));
                if full {
                    g.push(("forget.w", slice_mut(&mut forget.w)));
                }
                g.push(("input.w", slice_mut(&mut input.w)));
                g.push(("cell.w", slice_mut(&mut cell.w)));
                g.push(("output.w_rec", slice_mut(&mut output.w_rec)));
                if full {
                    g.push(("forget.w_rec", slice_mut(&mut forget.w_rec)));
                }
                g.push(("input.w_rec", slice_mut(&mut input.w_rec)));
                g.push(("cell.w_rec", slice_mut(&mut cell.w_rec)));
                if full {
                    g.push(("output.peephole", vslice_mut(peep_output)));
                    g.push(("forget.peephole", vslice_mut(peep_forget)));
                    g.push(("input.peephole", vslice_mut(peep_input)));
                }
                g.push(("output.b", vslice_mut(&mut output.b)));
                if full {
                    g.push(("forget.b", vslice_mut(&mut forget.b)));
                }
                g.push(("input.b", vslice_mut(&mut input.b)));
                g.push(("cell.b", vslice_mut(&mut cell.b)));
                g
            }
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.groups().iter().map(|(_, s)| s.len()).sum()
    }

    pub fn zeros_like(&self) -> Params {
        Params::zeros(self.arch(), self.variant(), self.cells(), self.input_dim())
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|(_, s)| s.iter().all(|v| v.is_finite()))
    }
}

/// Everything one side (query or document) learns: a left-to-right model and,
/// for bidirectional encoders, a right-to-left model of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub forward: Params,
    pub backward: Option<Params>,
}

impl Encoder {
    pub fn new(forward: Params, backward: Option<Params>) -> Result<Encoder> {
        if let Some(b) = &backward {
            if b.arch() != forward.arch()
                || b.variant() != forward.variant()
                || b.cells() != forward.cells()
                || b.input_dim() != forward.input_dim()
            {
                return Err(Error::DimMismatch(
                    "forward and backward models must share architecture and shape".into(),
                ));
            }
        }
        Ok(Encoder { forward, backward })
    }

    pub fn unidirectional(forward: Params) -> Encoder {
        Encoder { forward, backward: None }
    }

    /// Fresh encoder drawn from `rng` (forward direction first).
    pub fn random<R: Rng>(
        arch: Arch,
        variant: Variant,
        bidirectional: bool,
        cells: usize,
        input_dim: usize,
        range: f64,
        rng: &mut R,
    ) -> Encoder {
        let forward = Params::random(arch, variant, cells, input_dim, range, rng);
        let backward =
            bidirectional.then(|| Params::random(arch, variant, cells, input_dim, range, rng));
        Encoder { forward, backward }
    }

    pub fn is_bidirectional(&self) -> bool {
        self.backward.is_some()
    }

    pub fn arch(&self) -> Arch {
        self.forward.arch()
    }

    pub fn variant(&self) -> Variant {
        self.forward.variant()
    }

    pub fn cells(&self) -> usize {
        self.forward.cells()
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    /// Length of the embedding this encoder produces.
    pub fn embedding_dim(&self) -> usize {
        if self.is_bidirectional() {
            2 * self.cells()
        } else {
            self.cells()
        }
    }

    /// All active tensors; backward-direction groups are prefixed with `bwd.`.
    pub fn groups(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> =
            self.forward.groups().into_iter().map(|(n, s)| (n.to_string(), s)).collect();
        if let Some(b) = &self.backward {
            out.extend(b.groups().into_iter().map(|(n, s)| (format!("bwd.{n}"), s)));
        }
        out
    }

    pub fn groups_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = self
            .forward
            .groups_mut()
            .into_iter()
            .map(|(n, s)| (n.to_string(), s))
            .collect();
        if let Some(b) = &mut self.backward {
            out.extend(b.groups_mut().into_iter().map(|(n, s)| (format!("bwd.{n}"), s)));
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.forward.num_parameters() + self.backward.as_ref().map_or(0, Params::num_parameters)
    }

    pub fn zeros_like(&self) -> Encoder {
        Encoder {
            forward: self.forward.zeros_like(),
            backward: self.backward.as_ref().map(Params::zeros_like),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.forward.is_finite() && self.backward.as_ref().is_none_or(Params::is_finite)
    }

    /// `self += scale * other`, over active groups.
    pub fn add_scaled(&mut self, scale: f64, other: &Encoder) -> Result<()> {
        let theirs = other.groups();
        let mut mine = self.groups_mut();
        if mine.len() != theirs.len() {
            return Err(Error::DimMismatch("parameter group count differs".into()));
        }
        for ((name, dst), (_, src)) in mine.iter_mut().zip(&theirs) {
            if dst.len() != src.len() {
                return Err(Error::DimMismatch(format!("group {name} differs in size")));
            }
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += scale * s;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, g) in self.groups_mut() {
            g.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Euclidean norm over every active entry.
    pub fn l2_norm(&self) -> f64 {
        self.groups()
            .iter()
            .flat_map(|(_, s)| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn group_counts() {
        let full = Params::zeros(Arch::Lstm, Variant::Full, 3, 5);
        let reduced = Params::zeros(Arch::Lstm, Variant::Reduced, 3, 5);
        let rnn = Params::zeros(Arch::Rnn, Variant::Full, 3, 5);
        assert_eq!(full.groups().len(), 15);
        assert_eq!(reduced.groups().len(), 9);
        assert_eq!(rnn.groups().len(), 3);
        assert_eq!(rnn.num_parameters(), 3 * 5 + 9 + 3);
        assert_eq!(reduced.num_parameters(), 3 * (3 * 5 + 9 + 3));
    }

    #[test]
    fn random_init_is_bounded_and_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        let pa = Params::random(Arch::Lstm, Variant::Full, 4, 6, INIT_RANGE, &mut a);
        let pb = Params::random(Arch::Lstm, Variant::Full, 4, 6, INIT_RANGE, &mut b);
        assert_eq!(pa, pb);
        for (_, g) in pa.groups() {
            assert!(g.iter().all(|v| v.abs() <= INIT_RANGE));
        }
    }

    #[test]
    fn reduced_init_leaves_inactive_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let Params::Lstm(p) = Params::random(Arch::Lstm, Variant::Reduced, 4, 6, 0.1, &mut rng) else {
            unreachable!()
        };
        assert!(p.forget.w.iter().all(|&v| v == 0.0));
        assert!(p.peep_input.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bidirectional_shape_check() {
        let f = Params::zeros(Arch::Lstm, Variant::Reduced, 3, 5);
        let b = Params::zeros(Arch::Lstm, Variant::Reduced, 4, 5);
        assert!(Encoder::new(f.clone(), Some(b)).is_err());
        let enc = Encoder::new(f.clone(), Some(f)).unwrap();
        assert_eq!(enc.embedding_dim(), 6);
        assert!(enc.groups().iter().any(|(n, _)| n == "bwd.cell.b"));
    }

    #[test]
    fn add_scaled_and_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Encoder::random(Arch::Rnn, Variant::Full, false, 2, 3, 1.0, &mut rng);
        let mut b = a.zeros_like();
        b.add_scaled(2.0, &a).unwrap();
        assert!((b.l2_norm() - 2.0 * a.l2_norm()).abs() < 1e-12);
        b.scale(0.5);
        assert_eq!(b, a);
    }

    #[test]
    fn enum_text_roundtrip() {
        assert_eq!("LSTM".parse::<Arch>().unwrap(), Arch::Lstm);
        assert_eq!(Variant::Reduced.to_string(), "reduced");
        assert!("gru".parse::<Arch>().is_err());
    }
}
