//! One-layer GRU classifier trained with backpropagation through time and
//! Adam.
//!
//! Parameters live in one flat `Vec<f64>`; [`Tensor`] names the slices and
//! their shapes. Gradients and Adam moments share the same layout, which
//! keeps the optimizer, clipping and serialization free of per-tensor code.

mod adam;
mod batch;
mod gru;

use ndarray::{ArrayView2, ArrayViewMut2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

pub use self::adam::{adam_step, clip_global_norm, AdamConfig, AdamState};
pub use self::batch::{Batch, Inputs};
pub use self::gru::{forward, loss_and_gradients, predict, predict_batch, Trace};

pub const DEFAULT_HIDDEN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tensor {
    /// Update gate, input weights (H x D).
    Wz,
    /// Update gate, recurrent weights (H x H).
    Uz,
    Bz,
    /// Reset gate.
    Wr,
    Ur,
    Br,
    /// Candidate state.
    Wh,
    Uh,
    Bh,
    /// Output head (C x H).
    Wo,
    Bo,
}

impl Tensor {
    pub const ALL: [Tensor; 11] = [
        Tensor::Wz,
        Tensor::Uz,
        Tensor::Bz,
        Tensor::Wr,
        Tensor::Ur,
        Tensor::Br,
        Tensor::Wh,
        Tensor::Uh,
        Tensor::Bh,
        Tensor::Wo,
        Tensor::Bo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tensor::Wz => "Wz",
            Tensor::Uz => "Uz",
            Tensor::Bz => "bz",
            Tensor::Wr => "Wr",
            Tensor::Ur => "Ur",
            Tensor::Br => "br",
            Tensor::Wh => "Wh",
            Tensor::Uh => "Uh",
            Tensor::Bh => "bh",
            Tensor::Wo => "Wo",
            Tensor::Bo => "bo",
        }
    }

    pub fn from_name(name: &str) -> Option<Tensor> {
        Tensor::ALL.into_iter().find(|t| t.name() == name)
    }

    /// `(rows, cols)`; biases are single rows.
    pub fn shape(self, dims: Dims) -> (usize, usize) {
        let Dims {
            input: d,
            hidden: h,
            output: c,
        } = dims;
        match self {
            Tensor::Wz | Tensor::Wr | Tensor::Wh => (h, d),
            Tensor::Uz | Tensor::Ur | Tensor::Uh => (h, h),
            Tensor::Bz | Tensor::Br | Tensor::Bh => (1, h),
            Tensor::Wo => (c, h),
            Tensor::Bo => (1, c),
        }
    }

    fn is_bias(self) -> bool {
        matches!(self, Tensor::Bz | Tensor::Br | Tensor::Bh | Tensor::Bo)
    }

    fn index(self) -> usize {
        Tensor::ALL.iter().position(|&t| t == self).unwrap()
    }
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    dims: Dims,
    offsets: [usize; 12],
}

impl Layout {
    pub fn new(dims: Dims) -> Layout {
        let mut offsets = [0; 12];
        for (i, t) in Tensor::ALL.iter().enumerate() {
            let (r, c) = t.shape(dims);
            offsets[i + 1] = offsets[i] + r * c;
        }
        Layout { dims, offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets[11]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self, t: Tensor) -> std::ops::Range<usize> {
        let i = t.index();
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn view<'a>(&self, data: &'a [f64], t: Tensor) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape(t.shape(self.dims), &data[self.range(t)]).unwrap()
    }

    pub fn view_mut<'a>(&self, data: &'a mut [f64], t: Tensor) -> ArrayViewMut2<'a, f64> {
        ArrayViewMut2::from_shape(t.shape(self.dims), &mut data[self.range(t)]).unwrap()
    }

    /// First non-finite entry, reported by tensor name.
    pub fn find_non_finite(&self, data: &[f64]) -> Option<(Tensor, usize)> {
        Tensor::ALL.into_iter().find_map(|t| {
            data[self.range(t)]
                .iter()
                .position(|x| !x.is_finite())
                .map(|i| (t, i))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruNetwork {
    layout: Layout,
    params: Vec<f64>,
}

impl GruNetwork {
    /// Weights uniform in `[-s, s]` with `s = sqrt(1/H)`, biases zero.
    pub fn new(dims: Dims, seed: u64) -> GruNetwork {
        let mut net = GruNetwork::zeros(dims);
        let scale = (1.0 / dims.hidden as f64).sqrt();
        let mut rng = seed::rng(seed);
        for t in Tensor::ALL {
            if t.is_bias() {
                continue;
            }
            for p in &mut net.params[net.layout.range(t)] {
                *p = rng.gen_range(-scale..=scale);
            }
        }
        net
    }

    pub fn zeros(dims: Dims) -> GruNetwork {
        let layout = Layout::new(dims);
        GruNetwork {
            params: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn from_params(dims: Dims, params: Vec<f64>) -> Result<GruNetwork> {
        let layout = Layout::new(dims);
        if params.len() != layout.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                layout.len(),
                params.len()
            )));
        }
        Ok(GruNetwork { layout, params })
    }

    pub fn dims(&self) -> Dims {
        self.layout.dims
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn view(&self, t: Tensor) -> ArrayView2<'_, f64> {
        self.layout.view(&self.params, t)
    }

    pub fn view_mut(&mut self, t: Tensor) -> ArrayViewMut2<'_, f64> {
        self.layout.view_mut(&mut self.params, t)
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.layout.find_non_finite(&self.params) {
            Some((t, index)) => Err(Error::NumericFault {
                tensor: t.name().to_string(),
                index,
            }),
            None => Ok(()),
        }
    }
}

/// Gradients in the parameter layout of a [`GruNetwork`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layout: Layout,
    values: Vec<f64>,
}

impl Gradients {
    pub fn zeros(layout: &Layout) -> Gradients {
        Gradients {
            values: vec![0.0; layout.len()],
            layout: layout.clone(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn view(&self, t: Tensor) -> ArrayView2<'_, f64> {
        self.layout.view(&self.values, t)
    }

    pub fn view_mut(&mut self, t: Tensor) -> ArrayViewMut2<'_, f64> {
        self.layout.view_mut(&mut self.values, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_covers_all_tensors() {
        let dims = Dims {
            input: 3,
            hidden: 4,
            output: 5,
        };
        let layout = Layout::new(dims);
        assert_eq!(layout.len(), 3 * (4 * 3 + 4 * 4 + 4) + 5 * 4 + 5);
        let net = GruNetwork::new(dims, 1);
        assert!(net.view(Tensor::Bz).iter().all(|&x| x == 0.0));
        let s = 0.5;
        assert!(net.view(Tensor::Uh).iter().all(|&x| x.abs() <= s));
        assert!(net.check_finite().is_ok());
    }

    #[test]
    fn reports_non_finite_tensor() {
        let dims = Dims {
            input: 2,
            hidden: 2,
            output: 2,
        };
        let mut net = GruNetwork::zeros(dims);
        net.view_mut(Tensor::Ur)[[1, 0]] = f64::NAN;
        match net.check_finite() {
            Err(Error::NumericFault { tensor, index }) => {
                assert_eq!(tensor, "Ur");
                assert_eq!(index, 2);
            }
            other => panic!("{other:?}"),
        }
    }
}
