//! Interpretability exports: per-word gate and output activations, keyword
//! detection through the most active cells, and attribution of keywords to
//! cells across many queries.
//!
//! A cell "detects" word `t` (not the first word in its reading direction)
//! when `|y_cell(t) − y_cell(t−1)| ≥ threshold`. A word is a keyword when more
//! than 40% of the `top_k` most active cells detect it in both directions;
//! a word at a sentence boundary has a count in one direction only and is
//! judged on that one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Encoder, ForwardTrace};
use crate::texthash::{tokenize, TrigramDict};

pub const DEFAULT_TOP_K: usize = 10;
pub const DEFAULT_TOP_M: usize = 5;
/// Default change threshold as a fraction of the largest `|y|` in the sentence.
pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.2;
/// Fraction of the top cells that must detect a word.
pub const KEYWORD_FRACTION: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    InputGate,
    ForgetGate,
    OutputGate,
    CellState,
    Output,
}

impl GridKind {
    pub const ALL: [GridKind; 5] = [
        GridKind::InputGate,
        GridKind::ForgetGate,
        GridKind::OutputGate,
        GridKind::CellState,
        GridKind::Output,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GridKind::InputGate => "input_gate",
            GridKind::ForgetGate => "forget_gate",
            GridKind::OutputGate => "output_gate",
            GridKind::CellState => "cell_state",
            GridKind::Output => "output",
        }
    }
}

impl fmt::Display for GridKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::LeftToRight => "l2r",
            Direction::RightToLeft => "r2l",
        }
    }
}

/// Activations of one quantity for every cell at every word. Columns follow
/// the reading order of `direction`, so a right-to-left grid starts at the
/// last word of the sentence; `words` is in the same order.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationGrid {
    pub kind: GridKind,
    pub direction: Direction,
    pub words: Vec<String>,
    /// `cells × words`.
    pub values: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridJson {
    kind: GridKind,
    direction: Direction,
    words: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl ActivationGrid {
    pub fn cells(&self) -> usize {
        self.values.nrows()
    }

    /// File stem used by exports, e.g. `l2r_input_gate`.
    pub fn stem(&self) -> String {
        format!("{}_{}", self.direction.name(), self.kind)
    }

    /// CSV with a header row of word labels and one row per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(false).from_writer(out);
        w.write_record(&self.words)?;
        for row in self.values.rows() {
            w.write_record(row.iter().map(f64::to_string))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, kind: GridKind, direction: Direction) -> Result<ActivationGrid> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let words: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut flat = Vec::new();
        let mut rows = 0;
        for (i, rec) in r.records().enumerate() {
            for field in rec?.iter() {
                flat.push(field.parse::<f64>().map_err(|e| {
                    Error::parse("activation grid", i + 2, format!("{field:?}: {e}"))
                })?);
            }
            rows += 1;
        }
        let values = Array2::from_shape_vec((rows, words.len()), flat)
            .map_err(|e| Error::DimMismatch(e.to_string()))?;
        Ok(ActivationGrid {
            kind,
            direction,
            words,
            values,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(GridJson {
            kind: self.kind,
            direction: self.direction,
            words: self.words.clone(),
            values: self.values.rows().into_iter().map(|r| r.to_vec()).collect(),
        })
        .expect("grids serialize")
    }
}

fn stack_columns(columns: &[Array1<f64>]) -> Array2<f64> {
    let cells = columns.first().map_or(0, Array1::len);
    let mut m = Array2::zeros((cells, columns.len()));
    for (t, col) in columns.iter().enumerate() {
        m.column_mut(t).assign(col);
    }
    m
}

/// Grids of one direction's trace. `words` must already be in that direction's
/// reading order. Plain-RNN traces yield the output grid only.
pub fn grids_from_trace(
    trace: &ForwardTrace,
    words: &[String],
    direction: Direction,
) -> Result<Vec<ActivationGrid>> {
    if trace.len() != words.len() {
        return Err(Error::DimMismatch(format!(
            "trace has {} steps for {} words",
            trace.len(),
            words.len()
        )));
    }
    let grid = |kind, values| ActivationGrid {
        kind,
        direction,
        words: words.to_vec(),
        values,
    };
    let mut out = Vec::new();
    if !trace.gates.is_empty() {
        let g = &trace.gates;
        let pick = |f: fn(&crate::model::LstmStep) -> &Array1<f64>| -> Vec<Array1<f64>> {
            g.iter().map(|s| f(s).clone()).collect()
        };
        out.push(grid(GridKind::InputGate, stack_columns(&pick(|s| &s.input_gate))));
        out.push(grid(GridKind::ForgetGate, stack_columns(&pick(|s| &s.forget_gate))));
        out.push(grid(GridKind::OutputGate, stack_columns(&pick(|s| &s.output_gate))));
        out.push(grid(GridKind::CellState, stack_columns(&pick(|s| &s.cell))));
    }
    out.push(grid(GridKind::Output, stack_columns(&trace.outputs)));
    Ok(out)
}

/// Activation grids of `sentence` for every direction of `encoder`.
pub fn dump_activations(encoder: &Encoder, dict: &TrigramDict, sentence: &str) -> Result<Vec<ActivationGrid>> {
    let words: Vec<String> = tokenize(sentence).iter().map(|t| t.as_str().to_string()).collect();
    let seq = dict.hash_sentence(sentence)?;
    let trace = encoder.trace(&seq)?;
    let mut grids = grids_from_trace(&trace.forward, &words, Direction::LeftToRight)?;
    if let Some(b) = &trace.backward {
        let rev: Vec<String> = words.iter().rev().cloned().collect();
        grids.extend(grids_from_trace(b, &rev, Direction::RightToLeft)?);
    }
    Ok(grids)
}

/// Indices of the `top_k` largest `|y|` entries, largest first, lower index
/// first on ties. `top_k` is capped at the vector length.
pub fn top_active_cells(y: ArrayView1<'_, f64>, top_k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| y[b].abs().total_cmp(&y[a].abs()));
    idx.truncate(top_k);
    idx
}

/// Per-position detection counts of one direction's output grid (reading
/// order). Position 0 is `None`.
fn direction_counts(y: ArrayView2<'_, f64>, top: &[usize], threshold: f64) -> Vec<Option<usize>> {
    (0..y.ncols())
        .map(|t| {
            (t > 0).then(|| {
                top.iter()
                    .filter(|&&c| (y[[c, t]] - y[[c, t - 1]]).abs() >= threshold)
                    .count()
            })
        })
        .collect()
}

/// Detection counts of one word.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCounts {
    pub word: String,
    /// `None` for the first word, which has no predecessor left to right.
    pub cells_assigned_l2r: Option<usize>,
    /// `None` for the last word, or when there is no right-to-left direction.
    pub cells_assigned_r2l: Option<usize>,
    pub is_keyword: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeywordReport {
    pub top_k: usize,
    pub threshold: f64,
    pub top_cells_l2r: Vec<usize>,
    pub top_cells_r2l: Vec<usize>,
    /// In sentence order.
    pub words: Vec<WordCounts>,
}

impl KeywordReport {
    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.words.iter().filter(|w| w.is_keyword).map(|w| w.word.as_str())
    }
}

/// `count > 0.4·top_k` in every direction that has a count.
pub fn keyword_rule(l2r: Option<usize>, r2l: Option<usize>, top_k: usize) -> bool {
    let bar = KEYWORD_FRACTION * top_k as f64;
    let present: Vec<usize> = [l2r, r2l].into_iter().flatten().collect();
    !present.is_empty() && present.iter().all(|&c| c as f64 > bar)
}

/// Default threshold: a fixed fraction of the largest `|y|` over both grids.
pub fn default_threshold(l2r: ArrayView2<'_, f64>, r2l: Option<ArrayView2<'_, f64>>) -> f64 {
    let max = |g: ArrayView2<'_, f64>| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    DEFAULT_THRESHOLD_FRACTION * r2l.map_or(max(l2r), |b| max(l2r).max(max(b)))
}

/// Keyword report computed from output grids alone. `l2r` holds `y(t)` in
/// sentence order, `r2l` in reversed order; `words` is in sentence order.
pub fn keyword_counts(
    words: &[String],
    l2r: ArrayView2<'_, f64>,
    r2l: Option<ArrayView2<'_, f64>>,
    top_k: usize,
    threshold: Option<f64>,
) -> Result<KeywordReport> {
    let m = words.len();
    if l2r.ncols() != m || r2l.is_some_and(|b| b.ncols() != m || b.nrows() != l2r.nrows()) {
        return Err(Error::DimMismatch("output grids do not match the sentence".into()));
    }
    if m == 0 {
        return Err(Error::EmptySentence);
    }
    let threshold = threshold.unwrap_or_else(|| default_threshold(l2r, r2l));
    let top_l2r = top_active_cells(l2r.column(m - 1), top_k);
    let fwd = direction_counts(l2r, &top_l2r, threshold);
    let (top_r2l, bwd) = match r2l {
        Some(b) => {
            let top = top_active_cells(b.column(m - 1), top_k);
            let mut counts = direction_counts(b, &top, threshold);
            counts.reverse();
            (top, counts)
        }
        None => (Vec::new(), vec![None; m]),
    };
    let words = words
        .iter()
        .zip(fwd.into_iter().zip(bwd))
        .map(|(w, (a, b))| WordCounts {
            word: w.clone(),
            cells_assigned_l2r: a,
            cells_assigned_r2l: b,
            is_keyword: keyword_rule(a, b, top_k),
        })
        .collect();
    Ok(KeywordReport {
        top_k,
        threshold,
        top_cells_l2r: top_l2r,
        top_cells_r2l: top_r2l,
        words,
    })
}

/// Words of a sentence with its left-to-right output grid and, for a
/// bidirectional encoder, its right-to-left one.
pub type OutputGrids = (Vec<String>, Array2<f64>, Option<Array2<f64>>);

/// Output grids of `sentence` (left to right, and right to left when the
/// encoder is bidirectional) and its words.
pub fn output_grids(encoder: &Encoder, dict: &TrigramDict, sentence: &str) -> Result<OutputGrids> {
    let words: Vec<String> = tokenize(sentence).iter().map(|t| t.as_str().to_string()).collect();
    let trace = encoder.trace(&dict.hash_sentence(sentence)?)?;
    let l2r = stack_columns(&trace.forward.outputs);
    let r2l = trace.backward.as_ref().map(|b| stack_columns(&b.outputs));
    Ok((words, l2r, r2l))
}

/// Keyword report of one sentence under `encoder`.
pub fn keyword_report(
    encoder: &Encoder,
    dict: &TrigramDict,
    sentence: &str,
    top_k: usize,
    threshold: Option<f64>,
) -> Result<KeywordReport> {
    let (words, l2r, r2l) = output_grids(encoder, dict, sentence)?;
    keyword_counts(&words, l2r.view(), r2l.as_ref().map(|b| b.view()), top_k, threshold)
}

/// Keywords attributed to cells, aggregated over queries. Cell indices address
/// the embedding: left-to-right cells first, then right-to-left cells offset
/// by the cell count.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TopicCells {
    pub top_m: usize,
    pub top_k: usize,
    pub cells: BTreeMap<usize, Vec<String>>,
}

impl TopicCells {
    /// The `m` cells holding the most attributions of words in `vocabulary`,
    /// lower index first on ties.
    pub fn dominant_cells(&self, vocabulary: &BTreeSet<String>, m: usize) -> Vec<usize> {
        let mut counts: Vec<(usize, usize)> = self
            .cells
            .iter()
            .map(|(&c, kws)| (c, kws.iter().filter(|k| vocabulary.contains(*k)).count()))
            .filter(|&(_, n)| n > 0)
            .collect();
        counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        counts.into_iter().take(m).map(|(c, _)| c).collect()
    }
}

/// `|A ∩ B| / |A ∪ B|`, 0 for two empty sets.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// For every query: its `top_m` most active embedding cells and its keywords;
/// each keyword is attributed to each of those cells that detected it.
pub fn topic_cells<S: AsRef<str>>(
    queries: &[S],
    encoder: &Encoder,
    dict: &TrigramDict,
    top_m: usize,
    top_k: usize,
    threshold: Option<f64>,
) -> Result<TopicCells> {
    let cells = encoder.cells();
    let mut out = TopicCells {
        top_m,
        top_k,
        cells: BTreeMap::new(),
    };
    for q in queries {
        let (words, l2r, r2l) = output_grids(encoder, dict, q.as_ref())?;
        let m = words.len();
        let report = keyword_counts(&words, l2r.view(), r2l.as_ref().map(|b| b.view()), top_k, threshold)?;
        let embedding = match &r2l {
            Some(b) => ndarray::concatenate![Axis(0), l2r.column(m - 1), b.column(m - 1)],
            None => l2r.column(m - 1).to_owned(),
        };
        let detects = |cell: usize, word: usize| -> bool {
            let (grid, t) = if cell < cells {
                (l2r.view(), word)
            } else {
                match &r2l {
                    Some(b) => (b.view(), m - 1 - word),
                    None => return false,
                }
            };
            let c = cell % cells;
            t > 0 && (grid[[c, t]] - grid[[c, t - 1]]).abs() >= report.threshold
        };
        for cell in top_active_cells(embedding.view(), top_m) {
            for (w, wc) in report.words.iter().enumerate() {
                if wc.is_keyword && detects(cell, w) {
                    out.cells.entry(cell).or_default().push(wc.word.clone());
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arch, Params, Variant};
    use ndarray::{arr1, arr2, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn zero_params_give_half_gates_and_zero_output() {
        let dict = TrigramDict::build(["one two three"]).unwrap();
        let enc = Encoder::unidirectional(Params::zeros(Arch::Lstm, Variant::Full, 4, dict.dim()));
        let grids = dump_activations(&enc, &dict, "one two three").unwrap();
        assert_eq!(grids.len(), 5);
        for g in &grids {
            assert_eq!(g.values.dim(), (4, 3));
            let expect = match g.kind {
                GridKind::Output | GridKind::CellState => 0.0,
                _ => 0.5,
            };
            assert!(g.values.iter().all(|&v| v == expect), "{}", g.kind);
        }
    }

    #[test]
    fn reduced_forget_grid_is_ones_and_rnn_has_output_only() {
        let dict = TrigramDict::build(["a bb"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = Encoder::random(Arch::Lstm, Variant::Reduced, true, 3, dict.dim(), 0.5, &mut rng);
        let grids = dump_activations(&enc, &dict, "a bb").unwrap();
        assert_eq!(grids.len(), 10);
        for g in grids.iter().filter(|g| g.kind == GridKind::ForgetGate) {
            assert!(g.values.iter().all(|&v| v == 1.0));
        }
        for g in grids.iter().filter(|g| matches!(g.kind, GridKind::InputGate | GridKind::OutputGate)) {
            assert!(g.values.iter().all(|&v| v > 0.0 && v < 1.0));
        }
        let r2l = grids.iter().find(|g| g.direction == Direction::RightToLeft).unwrap();
        assert_eq!(r2l.words, vec!["bb", "a"]);

        let rnn = Encoder::random(Arch::Rnn, Variant::Full, false, 3, dict.dim(), 0.5, &mut rng);
        let grids = dump_activations(&rnn, &dict, "a bb").unwrap();
        assert_eq!(grids.len(), 1);
        assert_eq!(grids[0].kind, GridKind::Output);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let dict = TrigramDict::build(["x yy zzz"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let enc = Encoder::random(Arch::Lstm, Variant::Full, false, 5, dict.dim(), 0.5, &mut rng);
        for g in dump_activations(&enc, &dict, "x yy zzz").unwrap() {
            let mut buf = Vec::new();
            g.write_csv(&mut buf).unwrap();
            let back = ActivationGrid::read_csv(buf.as_slice(), g.kind, g.direction).unwrap();
            assert_eq!(back, g);
        }
    }

    #[test]
    fn grids_match_trace() {
        let dict = TrigramDict::build(["p q r"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let enc = Encoder::random(Arch::Lstm, Variant::Full, false, 3, dict.dim(), 0.5, &mut rng);
        let trace = enc.trace(&dict.hash_sentence("p q r").unwrap()).unwrap();
        let grids = dump_activations(&enc, &dict, "p q r").unwrap();
        let cell = grids.iter().find(|g| g.kind == GridKind::CellState).unwrap();
        for t in 0..3 {
            for c in 0..3 {
                assert_eq!(cell.values[[c, t]].to_bits(), trace.forward.gates[t].cell[c].to_bits());
            }
        }
    }

    #[test]
    fn top_cells_by_magnitude() {
        assert_eq!(top_active_cells(arr1(&[0.9, -0.1, 0.5]).view(), 2), vec![0, 2]);
        assert_eq!(top_active_cells(arr1(&[0.3, -0.3, 0.3, 0.3]).view(), 2), vec![0, 1]);
        assert_eq!(top_active_cells(arr1(&[0.1]).view(), 5), vec![0]);
    }

    #[test]
    fn top_cells_agree_with_full_sort_and_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let y: Array1<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut oracle: Vec<(f64, usize)> = y.iter().map(|v| v.abs()).zip(0..).collect();
            oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let want: Vec<usize> = oracle.iter().take(5).map(|x| x.1).collect();
            assert_eq!(top_active_cells(y.view(), 5), want);

            let perm: Vec<usize> = (0..12).rev().collect();
            let permuted: Array1<f64> = perm.iter().map(|&i| y[i]).collect();
            let got: BTreeSet<usize> =
                top_active_cells(permuted.view(), 5).into_iter().map(|i| perm[i]).collect();
            assert_eq!(got, want.into_iter().collect());
        }
    }

    #[test]
    fn constant_output_has_no_keywords() {
        let y = Array2::from_elem((10, 4), 0.3);
        let r = keyword_counts(&words(4), y.view(), Some(y.view()), 10, None).unwrap();
        assert!(r.words.iter().all(|w| !w.is_keyword));
        assert_eq!(r.words[0].cells_assigned_l2r, None);
        assert_eq!(r.words[3].cells_assigned_r2l, None);
        assert_eq!(r.words[1].cells_assigned_l2r, Some(0));
    }

    /// Ten cells, three words; the middle word moves `flips` of them by 1.0
    /// in both directions.
    fn flipped(flips: usize) -> (Array2<f64>, Array2<f64>) {
        let mut l2r = Array2::from_elem((10, 3), 0.5);
        for c in 0..flips {
            l2r[[c, 1]] = -0.5;
            l2r[[c, 2]] = -0.5;
        }
        let mut r2l = Array2::from_elem((10, 3), 0.5);
        for c in 0..flips {
            r2l[[c, 1]] = -0.5;
            r2l[[c, 2]] = -0.5;
        }
        (l2r, r2l)
    }

    #[test]
    fn forty_percent_rule_is_strict() {
        let (a, b) = flipped(7);
        let r = keyword_counts(&words(3), a.view(), Some(b.view()), 10, Some(0.5)).unwrap();
        assert_eq!(r.words[1].cells_assigned_l2r, Some(7));
        assert_eq!(r.words[1].cells_assigned_r2l, Some(7));
        assert!(r.words[1].is_keyword);

        let (a, b) = flipped(4);
        let r = keyword_counts(&words(3), a.view(), Some(b.view()), 10, Some(0.5)).unwrap();
        assert_eq!(r.words[1].cells_assigned_l2r, Some(4));
        assert!(!r.words[1].is_keyword);

        assert!(keyword_rule(Some(5), Some(5), 10));
        assert!(!keyword_rule(Some(5), Some(4), 10));
        assert!(keyword_rule(None, Some(5), 10));
        assert!(!keyword_rule(None, None, 10));
    }

    #[test]
    fn keyword_counts_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = rng.random_range(1..6);
            let a: Array2<f64> = Array2::from_shape_fn((12, m), |_| rng.random_range(-1.0..1.0));
            let b: Array2<f64> = Array2::from_shape_fn((12, m), |_| rng.random_range(-1.0..1.0));
            let r = keyword_counts(&words(m), a.view(), Some(b.view()), 10, None).unwrap();
            for w in &r.words {
                assert!(w.cells_assigned_l2r.unwrap_or(0) <= 10);
                assert!(w.cells_assigned_r2l.unwrap_or(0) <= 10);
            }
            assert_eq!(r.words[0].cells_assigned_l2r, None);
            assert_eq!(r.words[m - 1].cells_assigned_r2l, None);
        }
        let bad = Array2::zeros((3, 2));
        assert!(keyword_counts(&words(3), bad.view(), None, 2, None).is_err());
    }

    #[test]
    fn single_attribution() {
        let mut t = TopicCells::default();
        t.cells.insert(7, vec!["kw".into()]);
        let vocab: BTreeSet<String> = ["kw".to_string()].into();
        assert_eq!(t.dominant_cells(&vocab, 5), vec![7]);
        assert_eq!(jaccard(&[1, 2, 3], &[3, 4]), 0.25);
        assert_eq!(jaccard(&[], &[]), 0.0);
    }

    #[test]
    fn topic_cells_total_on_untrained_params() {
        let dict = TrigramDict::build(["ba be bi bo"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let enc = Encoder::random(Arch::Lstm, Variant::Reduced, true, 6, dict.dim(), 0.5, &mut rng);
        let t = topic_cells(&["ba be bi", "bo", "bi ba"], &enc, &dict, 5, 10, None).unwrap();
        assert!(t.cells.keys().all(|&c| c < 12));
        let grid = arr2(&[[0.0, 1.0]]);
        assert_eq!(keyword_counts(&words(2), grid.view(), None, 1, Some(0.5)).unwrap().words[1].cells_assigned_l2r, Some(1));
    }
}
