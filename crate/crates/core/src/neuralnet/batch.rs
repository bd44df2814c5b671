use ndarray::{Array2, Array3, ArrayView2, ArrayViewMut2, Axis};

use crate::encoding::EncodedSequence;
use crate::error::{Error, Result};

/// Step inputs of a batch, left-aligned and padded to the longest sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Inputs {
    /// `B x T x D` real-valued inputs.
    Dense(Array3<f64>),
    /// Positions of the 1-entries of binary inputs, per sequence and step.
    Binary { width: usize, active: Vec<Vec<Vec<u32>>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Inputs,
    pub lengths: Vec<usize>,
    pub targets: Vec<usize>,
}

impl Batch {
    pub fn dense(inputs: Array3<f64>, lengths: Vec<usize>, targets: Vec<usize>) -> Result<Batch> {
        let (b, t, _) = inputs.dim();
        if lengths.len() != b || targets.len() != b {
            return Err(Error::Shape("lengths/targets must have one entry per row".into()));
        }
        if lengths.iter().any(|&l| l == 0 || l > t) {
            return Err(Error::Shape(format!("sequence lengths must lie in 1..={t}")));
        }
        Ok(Batch {
            inputs: Inputs::Dense(inputs),
            lengths,
            targets,
        })
    }

    /// Batches encoded prefixes. Sequences without a known target get
    /// `usize::MAX`, which the loss rejects; such batches are for prediction
    /// only.
    pub fn from_sequences(seqs: &[&EncodedSequence]) -> Batch {
        let width = seqs.first().map_or(0, |s| s.width);
        Batch {
            inputs: Inputs::Binary {
                width,
                active: seqs.iter().map(|s| s.steps.clone()).collect(),
            },
            lengths: seqs.iter().map(|s| s.len()).collect(),
            targets: seqs.iter().map(|s| s.target.unwrap_or(usize::MAX)).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.lengths.len()
    }

    pub fn max_len(&self) -> usize {
        self.lengths.iter().copied().max().unwrap_or(0)
    }

    pub fn width(&self) -> usize {
        match &self.inputs {
            Inputs::Dense(x) => x.dim().2,
            Inputs::Binary { width, .. } => *width,
        }
    }

    /// `B x T_max` matrix with ones on valid steps.
    pub fn mask(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.size(), self.max_len()));
        for (b, &len) in self.lengths.iter().enumerate() {
            m.row_mut(b).iter_mut().take(len).for_each(|x| *x = 1.0);
        }
        m
    }

    /// `x_t · Wᵀ` for every row (`B x H`); rows past their length are zero.
    pub(crate) fn project(&self, t: usize, w: ArrayView2<'_, f64>) -> Array2<f64> {
        match &self.inputs {
            Inputs::Dense(x) => x.index_axis(Axis(1), t).dot(&w.t()),
            Inputs::Binary { active, .. } => {
                let mut out = Array2::zeros((self.size(), w.nrows()));
                for (b, seq) in active.iter().enumerate() {
                    if let Some(step) = seq.get(t) {
                        let mut row = out.row_mut(b);
                        for &i in step {
                            row += &w.column(i as usize);
                        }
                    }
                }
                out
            }
        }
    }

    /// `dW += daᵀ · x_t`.
    pub(crate) fn accumulate_input_grad(
        &self,
        t: usize,
        da: &Array2<f64>,
        mut dw: ArrayViewMut2<'_, f64>,
    ) {
        match &self.inputs {
            Inputs::Dense(x) => {
                dw += &da.t().dot(&x.index_axis(Axis(1), t));
            }
            Inputs::Binary { active, .. } => {
                for (b, seq) in active.iter().enumerate() {
                    if let Some(step) = seq.get(t) {
                        for &i in step {
                            let mut col = dw.column_mut(i as usize);
                            col += &da.row(b);
                        }
                    }
                }
            }
        }
    }
}
