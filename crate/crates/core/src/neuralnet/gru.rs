use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::{Batch, Gradients, GruNetwork, Tensor};
use crate::encoding::EncodedSequence;
use crate::error::{Error, Result};

/// Activations kept from the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    steps: Vec<Step>,
    hidden: Array2<f64>,
}

impl Trace {
    /// Final hidden state of every row (its last valid step).
    pub fn hidden(&self) -> &Array2<f64> {
        &self.hidden
    }
}

#[derive(Debug, Clone)]
struct Step {
    h_prev: Array2<f64>,
    z: Array2<f64>,
    r: Array2<f64>,
    candidate: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn add_bias(mut a: Array2<f64>, bias: ArrayView2<'_, f64>) -> Array2<f64> {
    a += &bias.row(0);
    a
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

fn numeric_fault(net: &GruNetwork, what: &str) -> Error {
    match net.check_finite() {
        Err(e) => e,
        Ok(()) => Error::NumericFault {
            tensor: what.to_string(),
            index: 0,
        },
    }
}

fn check_batch(net: &GruNetwork, batch: &Batch) -> Result<()> {
    if batch.width() != net.dims().input {
        return Err(Error::Shape(format!(
            "batch width {} differs from network input {}",
            batch.width(),
            net.dims().input
        )));
    }
    if batch.lengths.contains(&0) {
        return Err(Error::Shape("empty sequence in batch".into()));
    }
    Ok(())
}

/// Runs the GRU over the batch from `h_0 = 0` and returns the softmax
/// probabilities (`B x C`) read from each row's last valid step.
///
/// Per step: `z = σ(Wz x + Uz h + bz)`, `r = σ(Wr x + Ur h + br)`,
/// `h̃ = tanh(Wh x + Uh (r ⊙ h) + bh)`, `h' = (1 − z) ⊙ h + z ⊙ h̃`. Rows past
/// their length keep `h` unchanged.
pub fn forward(net: &GruNetwork, batch: &Batch) -> Result<(Array2<f64>, Trace)> {
    check_batch(net, batch)?;
    let hidden = net.dims().hidden;
    let (wz, uz, bz) = (net.view(Tensor::Wz), net.view(Tensor::Uz), net.view(Tensor::Bz));
    let (wr, ur, br) = (net.view(Tensor::Wr), net.view(Tensor::Ur), net.view(Tensor::Br));
    let (wh, uh, bh) = (net.view(Tensor::Wh), net.view(Tensor::Uh), net.view(Tensor::Bh));

    let mut h = Array2::<f64>::zeros((batch.size(), hidden));
    let mut steps = Vec::with_capacity(batch.max_len());
    for t in 0..batch.max_len() {
        let z = add_bias(batch.project(t, wz) + h.dot(&uz.t()), bz).mapv_into(sigmoid);
        let r = add_bias(batch.project(t, wr) + h.dot(&ur.t()), br).mapv_into(sigmoid);
        let rh = &r * &h;
        let candidate = add_bias(batch.project(t, wh) + rh.dot(&uh.t()), bh).mapv_into(f64::tanh);
        let mut next = h.clone();
        for (b, &len) in batch.lengths.iter().enumerate() {
            if t < len {
                Zip::from(next.row_mut(b))
                    .and(h.row(b))
                    .and(z.row(b))
                    .and(candidate.row(b))
                    .for_each(|n, &hp, &zv, &c| *n = (1.0 - zv) * hp + zv * c);
            }
        }
        steps.push(Step {
            h_prev: std::mem::replace(&mut h, next),
            z,
            r,
            candidate,
        });
    }

    if h.iter().any(|x| !x.is_finite()) {
        return Err(numeric_fault(net, "hidden state"));
    }
    let mut probs = add_bias(h.dot(&net.view(Tensor::Wo).t()), net.view(Tensor::Bo));
    if probs.iter().any(|x| !x.is_finite()) {
        return Err(numeric_fault(net, "logits"));
    }
    softmax_rows(&mut probs);
    Ok((probs, Trace { steps, hidden: h }))
}

/// Mean categorical cross-entropy over the batch and its gradient with
/// respect to every parameter, by backpropagation through the valid steps.
pub fn loss_and_gradients(net: &GruNetwork, batch: &Batch) -> Result<(f64, Gradients)> {
    let classes = net.dims().output;
    if let Some(&bad) = batch.targets.iter().find(|&&y| y >= classes) {
        return Err(Error::Shape(format!("target {bad} outside 0..{classes}")));
    }
    let (probs, trace) = forward(net, batch)?;
    let rows = batch.size() as f64;
    let loss = batch
        .targets
        .iter()
        .enumerate()
        .map(|(b, &y)| -probs[[b, y]].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / rows;

    let mut grads = Gradients::zeros(net.layout());
    let mut dlogits = probs;
    for (b, &y) in batch.targets.iter().enumerate() {
        dlogits[[b, y]] -= 1.0;
    }
    dlogits /= rows;
    grads.view_mut(Tensor::Wo).assign(&dlogits.t().dot(&trace.hidden));
    grads.view_mut(Tensor::Bo).row_mut(0).assign(&dlogits.sum_axis(Axis(0)));
    let mut dh = dlogits.dot(&net.view(Tensor::Wo));

    let (uz, ur, uh) = (net.view(Tensor::Uz), net.view(Tensor::Ur), net.view(Tensor::Uh));
    for t in (0..trace.steps.len()).rev() {
        let step = &trace.steps[t];
        let active: Array1<f64> = batch
            .lengths
            .iter()
            .map(|&len| if t < len { 1.0 } else { 0.0 })
            .collect();
        let active = active.insert_axis(Axis(1));
        // Gradient into this step's update; inactive rows pass dh through.
        let dnew = &dh * &active;
        let mut dh_prev = &dh * &(1.0 - &active);

        let dz = &dnew * &(&step.candidate - &step.h_prev);
        let dcandidate = &dnew * &step.z;
        dh_prev += &(&dnew * &(1.0 - &step.z));

        let da_h = &dcandidate * &step.candidate.mapv(|c| 1.0 - c * c);
        let rh = &step.r * &step.h_prev;
        batch.accumulate_input_grad(t, &da_h, grads.view_mut(Tensor::Wh));
        let mut g = grads.view_mut(Tensor::Uh);
        g += &da_h.t().dot(&rh);
        let mut g = grads.view_mut(Tensor::Bh);
        g += &da_h.sum_axis(Axis(0));
        let drh = da_h.dot(&uh);
        let dr = &drh * &step.h_prev;
        dh_prev += &(&drh * &step.r);

        let da_z = &dz * &step.z.mapv(|z| z * (1.0 - z));
        batch.accumulate_input_grad(t, &da_z, grads.view_mut(Tensor::Wz));
        let mut g = grads.view_mut(Tensor::Uz);
        g += &da_z.t().dot(&step.h_prev);
        let mut g = grads.view_mut(Tensor::Bz);
        g += &da_z.sum_axis(Axis(0));
        dh_prev += &da_z.dot(&uz);

        let da_r = &dr * &step.r.mapv(|r| r * (1.0 - r));
        batch.accumulate_input_grad(t, &da_r, grads.view_mut(Tensor::Wr));
        let mut g = grads.view_mut(Tensor::Ur);
        g += &da_r.t().dot(&step.h_prev);
        let mut g = grads.view_mut(Tensor::Br);
        g += &da_r.sum_axis(Axis(0));
        dh_prev += &da_r.dot(&ur);

        dh = dh_prev;
    }

    if !loss.is_finite() {
        return Err(numeric_fault(net, "loss"));
    }
    if let Some((t, index)) = net.layout().find_non_finite(grads.values()) {
        return Err(Error::NumericFault {
            tensor: format!("gradient of {}", t.name()),
            index,
        });
    }
    Ok((loss, grads))
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = i;
        }
    }
    best
}

/// Most likely class (lowest index on ties) and the class probabilities.
pub fn predict(net: &GruNetwork, sequence: &EncodedSequence) -> Result<(usize, Vec<f64>)> {
    Ok(predict_batch(net, &[sequence])?.remove(0))
}

pub fn predict_batch(
    net: &GruNetwork,
    sequences: &[&EncodedSequence],
) -> Result<Vec<(usize, Vec<f64>)>> {
    if sequences.is_empty() {
        return Ok(Vec::new());
    }
    let (probs, _) = forward(net, &Batch::from_sequences(sequences))?;
    Ok(probs
        .rows()
        .into_iter()
        .map(|row| {
            let p = row.to_vec();
            (argmax(&p), p)
        })
        .collect())
}
