//! Forward pass, reverse-mode gradient and the R-operator (forward-over-reverse)
//! Hessian-vector product for [`MlpSpec`] networks.
//!
//! Notation inside this file: layers are walked by *position* `pos = 0..depth`
//! from the input side, so position `pos` is layer `k = depth - pos` in the
//! output-first numbering of the parameter layout.
//!
//! R-operator bookkeeping, direction `v = (V_pos, c_pos)`:
//!
//! ```text
//! forward   z = a W + b            R{z} = R{a} W + a V + c
//!           a' = relu(z)           R{a'} = R{z} . [z > 0]
//! backward  gW = aᵀ d              R{gW} = R{a}ᵀ d + aᵀ R{d}
//!           gb = 1ᵀ d              R{gb} = 1ᵀ R{d}
//!           d_prev = (d Wᵀ).[z>0]  R{d_prev} = (R{d} Wᵀ + d Vᵀ) . [z > 0]
//! ```
//!
//! ReLU has zero second derivative, so the mask is not differentiated.
//!
//! Output layer, with batch size `n`:
//! * cross-entropy fused with softmax `p = softmax(z)`: `d = (p - onehot) / n`,
//!   and `R{d} = (p . R{z} - p (pᵀ R{z})) / n`, the softmax Jacobian applied to
//!   `R{z}`. This is the exact Gauss-Newton block; the logits never pass
//!   through a separate log or exp.
//! * squared error `Σ (z - y)² / n`: `d = 2 (z - y) / n`, `R{d} = 2 R{z} / n`.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis, Zip};

use crate::error::{check_len, Error, Result};

use super::{Dataset, LossKind, MlpSpec, ParamVector, Targets};

/// Network outputs (logits for classification) on `inputs`.
pub fn forward(spec: &MlpSpec, params: &ParamVector, inputs: &Array2<f64>) -> Result<Array2<f64>> {
    params.check_spec(spec)?;
    check_len("forward input width", spec.input_width(), inputs.ncols())?;
    let depth = spec.depth();
    let mut act = inputs.clone();
    for pos in 0..depth {
        let k = depth - pos;
        let mut z = act.dot(&params.weights(k));
        z += &ArrayView1::from(params.bias(k));
        if pos + 1 < depth {
            z.mapv_inplace(relu);
        }
        act = z;
    }
    Ok(act)
}

/// Mean loss over the dataset.
pub fn loss(spec: &MlpSpec, params: &ParamVector, data: &Dataset) -> Result<f64> {
    data.check_spec(spec)?;
    let out = forward(spec, params, data.inputs())?;
    Ok(output_loss(spec.loss_kind(), &out, data.targets()).0)
}

pub fn loss_and_gradient(spec: &MlpSpec, params: &ParamVector, data: &Dataset) -> Result<(f64, ParamVector)> {
    let eval = Evaluation::new(spec, params, data)?;
    Ok((eval.loss(), eval.gradient()))
}

pub fn gradient(spec: &MlpSpec, params: &ParamVector, data: &Dataset) -> Result<ParamVector> {
    Ok(Evaluation::new(spec, params, data)?.gradient())
}

/// Exact Hessian-vector product `H v`.
pub fn hvp(spec: &MlpSpec, params: &ParamVector, data: &Dataset, v: &ParamVector) -> Result<ParamVector> {
    let eval = Evaluation::new(spec, params, data)?;
    let hv = eval.hvp(v.as_slice())?;
    ParamVector::new(params.layout().clone(), hv)
}

/// `H^r_k v_k`: the Hessian restricted to the `k` layers nearest the output,
/// all other weights held fixed at `params`.
pub fn reduced_hvp(
    spec: &MlpSpec,
    params: &ParamVector,
    data: &Dataset,
    v_k: &[f64],
    k: usize,
) -> Result<Vec<f64>> {
    Evaluation::new(spec, params, data)?.reduced_hvp(k, v_k)
}

/// Forward and backward passes at a fixed point, cached so that repeated
/// Hessian-vector products only pay for the R-passes.
pub struct Evaluation<'a> {
    spec: &'a MlpSpec,
    params: &'a ParamVector,
    data: &'a Dataset,
    /// Pre-activations per position.
    pre: Vec<Array2<f64>>,
    /// ReLU outputs of hidden positions (`depth - 1` entries).
    post: Vec<Array2<f64>>,
    /// Softmax probabilities (cross-entropy only).
    probs: Option<Array2<f64>>,
    /// dL/dz per position.
    deltas: Vec<Array2<f64>>,
    loss: f64,
}

impl<'a> Evaluation<'a> {
    pub fn new(spec: &'a MlpSpec, params: &'a ParamVector, data: &'a Dataset) -> Result<Self> {
        params.check_spec(spec)?;
        data.check_spec(spec)?;
        let depth = spec.depth();
        let mut pre = Vec::with_capacity(depth);
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(depth - 1);
        for pos in 0..depth {
            let k = depth - pos;
            let input = if pos == 0 { data.inputs().view() } else { post[pos - 1].view() };
            let mut z = input.dot(&params.weights(k));
            z += &ArrayView1::from(params.bias(k));
            if pos + 1 < depth {
                post.push(z.mapv(relu));
            }
            pre.push(z);
        }

        let (loss, delta_out, probs) = output_loss(spec.loss_kind(), &pre[depth - 1], data.targets());
        let mut deltas = vec![delta_out];
        for pos in (1..depth).rev() {
            let k = depth - pos;
            let mut d = deltas.last().unwrap().dot(&params.weights(k).t());
            mask_inactive(&mut d, &pre[pos - 1]);
            deltas.push(d);
        }
        deltas.reverse();

        Ok(Self {
            spec,
            params,
            data,
            pre,
            post,
            probs,
            deltas,
            loss,
        })
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn outputs(&self) -> &Array2<f64> {
        self.pre.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn depth(&self) -> usize {
        self.spec.depth()
    }

    fn input(&self, pos: usize) -> ArrayView2<'_, f64> {
        if pos == 0 {
            self.data.inputs().view()
        } else {
            self.post[pos - 1].view()
        }
    }

    pub fn gradient(&self) -> ParamVector {
        let depth = self.depth();
        let mut grad = ParamVector::zeros(self.spec);
        for pos in 0..depth {
            let k = depth - pos;
            let slot = *grad.layout().layer(k);
            let input = self.input(pos);
            let delta = &self.deltas[pos];
            let g = grad.as_mut_slice();
            let mut gw = ArrayViewMut2::from_shape(
                (slot.fan_in, slot.fan_out),
                &mut g[slot.weight_offset..slot.bias_offset],
            )
            .expect("slot shape");
            general_mat_mul(1.0, &input.t(), delta, 0.0, &mut gw);
            let gb = delta.sum_axis(Axis(0));
            g[slot.bias_offset..slot.end()].copy_from_slice(gb.as_slice().unwrap());
        }
        grad
    }

    /// Full Hessian-vector product. Runs the reduced product at full depth.
    pub fn hvp(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.reduced_hvp(self.depth(), v)
    }

    /// Dimension of the reduced operator for depth `k`.
    pub fn reduced_dim(&self, k: usize) -> Result<usize> {
        self.params.layout().prefix_len(k)
    }

    /// Hessian-vector product restricted to the parameters of the `k` layers
    /// nearest the output. `v_k` and the result are prefixes of the flat
    /// parameter layout.
    pub fn reduced_hvp(&self, k: usize, v_k: &[f64]) -> Result<Vec<f64>> {
        let depth = self.depth();
        let dim = self.reduced_dim(k)?;
        check_len("hvp direction", dim, v_k.len())?;
        let layout = self.params.layout();
        let first = depth - k;

        let dir_weights = |pos: usize| -> ArrayView2<'_, f64> {
            let s = layout.layer(depth - pos);
            ArrayView2::from_shape((s.fan_in, s.fan_out), &v_k[s.weight_offset..s.bias_offset])
                .expect("slot shape")
        };
        let dir_bias = |pos: usize| -> ArrayView1<'_, f64> {
            let s = layout.layer(depth - pos);
            ArrayView1::from(&v_k[s.bias_offset..s.end()])
        };

        // R-forward. r_post[i] holds R{a} for hidden position first + i.
        let mut r_post: Vec<Array2<f64>> = Vec::with_capacity(k);
        let mut r_out = None;
        for pos in first..depth {
            let mut rz = self.input(pos).dot(&dir_weights(pos));
            rz += &dir_bias(pos);
            if pos > first {
                let w = self.params.weights(depth - pos);
                general_mat_mul(1.0, &r_post[pos - first - 1], &w, 1.0, &mut rz);
            }
            if pos + 1 < depth {
                mask_inactive(&mut rz, &self.pre[pos]);
                r_post.push(rz);
            } else {
                r_out = Some(rz);
            }
        }
        let rz_out = r_out.expect("k >= 1 visits the output layer");

        let n = self.data.len() as f64;
        let mut r_delta = match self.spec.loss_kind() {
            LossKind::CrossEntropy => {
                let p = self.probs.as_ref().expect("cross-entropy caches probabilities");
                let mut rd = p * &rz_out;
                let pr: Array1<f64> = rd.sum_axis(Axis(1));
                Zip::from(rd.rows_mut()).and(p.rows()).and(&pr).for_each(|mut row, prow, &s| {
                    row.zip_mut_with(&prow, |x, &pi| *x -= pi * s);
                });
                rd.mapv_inplace(|x| x / n);
                rd
            }
            LossKind::MeanSquaredError => rz_out.mapv(|x| 2.0 * x / n),
        };

        // R-backward.
        let mut out = vec![0.0; dim];
        for pos in (first..depth).rev() {
            let slot = *layout.layer(depth - pos);
            let delta = &self.deltas[pos];
            let mut gw = ArrayViewMut2::from_shape(
                (slot.fan_in, slot.fan_out),
                &mut out[slot.weight_offset..slot.bias_offset],
            )
            .expect("slot shape");
            general_mat_mul(1.0, &self.input(pos).t(), &r_delta, 0.0, &mut gw);
            if pos > first {
                general_mat_mul(1.0, &r_post[pos - first - 1].t(), delta, 1.0, &mut gw);
            }
            let gb = r_delta.sum_axis(Axis(0));
            out[slot.bias_offset..slot.end()].copy_from_slice(gb.as_slice().unwrap());

            if pos > first {
                let w = self.params.weights(depth - pos);
                let mut next = r_delta.dot(&w.t());
                general_mat_mul(1.0, delta, &dir_weights(pos).t(), 1.0, &mut next);
                mask_inactive(&mut next, &self.pre[pos - 1]);
                r_delta = next;
            }
        }
        if let Some(i) = out.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "hessian-vector product",
                index: i,
            });
        }
        Ok(out)
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 { x } else { 0.0 }
}

/// Zeroes entries whose pre-activation is not strictly positive.
fn mask_inactive(x: &mut Array2<f64>, pre: &Array2<f64>) {
    Zip::from(x).and(pre).for_each(|x, &z| {
        if z <= 0.0 {
            *x = 0.0;
        }
    });
}

/// Mean loss, dL/dz at the output, and the softmax probabilities when
/// applicable.
fn output_loss(kind: LossKind, out: &Array2<f64>, targets: &Targets) -> (f64, Array2<f64>, Option<Array2<f64>>) {
    let n = out.nrows() as f64;
    match (kind, targets) {
        (LossKind::CrossEntropy, Targets::Classes(labels)) => {
            let mut probs = out.clone();
            let mut total = 0.0;
            for (mut row, &y) in probs.rows_mut().into_iter().zip(labels) {
                let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
                total += lse - row[y];
                row.mapv_inplace(|v| (v - lse).exp());
            }
            let mut delta = probs.clone();
            for (mut row, &y) in delta.rows_mut().into_iter().zip(labels) {
                row[y] -= 1.0;
            }
            delta.mapv_inplace(|v| v / n);
            (total / n, delta, Some(probs))
        }
        (LossKind::MeanSquaredError, Targets::Values(y)) => {
            let diff = out - y;
            let total = diff.iter().map(|d| d * d).sum::<f64>();
            (total / n, diff.mapv(|d| 2.0 * d / n), None)
        }
        _ => unreachable!("dataset was checked against the spec"),
    }
}
