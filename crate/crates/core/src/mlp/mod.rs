//! Fixed-architecture ReLU multilayer perceptron with exact gradients and
//! Hessian-vector products.
//!
//! Layers are numbered from the output: layer `k = 1` is the output layer,
//! `k = depth` the layer that reads the raw inputs. The flat parameter vector
//! stores layers in that order, each as a row-major `fan_in × fan_out` weight
//! block followed by its `fan_out` biases. The parameters of the `k` layers
//! closest to the output are therefore the prefix `[0, prefix_len(k))`.

mod autodiff;
mod oracle;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{seeded_rng, standard_normal};

pub use autodiff::{forward, gradient, hvp, loss, loss_and_gradient, reduced_hvp, Evaluation};
pub use oracle::{
    dense_hessian_oracle, finite_difference_gradient, finite_difference_hessian_columns, infinity_norm,
    ORACLE_MAX_PARAMS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Softmax cross-entropy over class logits.
    CrossEntropy,
    /// Squared error summed over outputs, averaged over samples.
    MeanSquaredError,
}

/// Layer widths from input to output; ReLU on hidden layers, identity on the
/// output layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    widths: Vec<usize>,
    loss: LossKind,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, loss: LossKind) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::invalid(format!(
                "an MLP needs at least input and output widths, got {widths:?}"
            )));
        }
        if let Some(i) = widths.iter().position(|&w| w == 0) {
            return Err(Error::invalid(format!("layer width {i} is zero in {widths:?}")));
        }
        Ok(Self { widths, loss })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Number of affine layers.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.widths)
    }

    pub fn param_count(&self) -> usize {
        self.layout().len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerSlot {
    pub fn len(&self) -> usize {
        self.fan_in * self.fan_out + self.fan_out
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn end(&self) -> usize {
        self.bias_offset + self.fan_out
    }
}

/// Offset table of a flat parameter vector; `slots[0]` is the output layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    slots: Vec<LayerSlot>,
    len: usize,
}

impl Layout {
    fn new(widths: &[usize]) -> Self {
        let mut slots = Vec::with_capacity(widths.len() - 1);
        let mut offset = 0;
        for pair in widths.windows(2).rev() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            slots.push(LayerSlot {
                fan_in,
                fan_out,
                weight_offset: offset,
                bias_offset: offset + fan_in * fan_out,
            });
            offset += fan_in * fan_out + fan_out;
        }
        Self { slots, len: offset }
    }

    /// Rebuilds a layout from `(fan_in, fan_out)` pairs listed output layer first.
    pub fn from_shapes(shapes: &[(usize, usize)]) -> Result<Self> {
        if shapes.is_empty() {
            return Err(Error::invalid("layout needs at least one layer"));
        }
        let mut widths: Vec<usize> = shapes.iter().rev().map(|s| s.0).collect();
        widths.push(shapes[0].1);
        for pair in shapes.windows(2) {
            if pair[0].0 != pair[1].1 {
                return Err(Error::invalid(format!(
                    "layer shapes {:?} and {:?} do not chain",
                    pair[1], pair[0]
                )));
            }
        }
        Ok(Self::new(&widths))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn depth(&self) -> usize {
        self.slots.len()
    }

    /// Slot of layer `k`, counted from the output (`k = 1`).
    pub fn layer(&self, k: usize) -> &LayerSlot {
        &self.slots[k - 1]
    }

    pub fn slots(&self) -> &[LayerSlot] {
        &self.slots
    }

    /// `(fan_in, fan_out)` output layer first.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.slots.iter().map(|s| (s.fan_in, s.fan_out)).collect()
    }

    /// Parameter count of the `k` layers closest to the output.
    pub fn prefix_len(&self, k: usize) -> Result<usize> {
        if k == 0 || k > self.depth() {
            return Err(Error::invalid(format!(
                "reduced depth k = {k} outside 1..={}",
                self.depth()
            )));
        }
        Ok(self.slots[k - 1].end())
    }
}

/// Flat weight vector together with its layer layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Layout,
}

impl ParamVector {
    pub fn new(layout: Layout, values: Vec<f64>) -> Result<Self> {
        check_len("parameter vector", layout.len(), values.len())?;
        Ok(Self { values, layout })
    }

    pub fn zeros(spec: &MlpSpec) -> Self {
        let layout = spec.layout();
        Self {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Weight block of layer `k` (output = 1) as a `fan_in × fan_out` view.
    pub fn weights(&self, k: usize) -> ArrayView2<'_, f64> {
        let s = self.layout.layer(k);
        ArrayView2::from_shape(
            (s.fan_in, s.fan_out),
            &self.values[s.weight_offset..s.bias_offset],
        )
        .expect("layout slot matches its shape")
    }

    pub fn weights_mut(&mut self, k: usize) -> &mut [f64] {
        let s = *self.layout.layer(k);
        &mut self.values[s.weight_offset..s.bias_offset]
    }

    pub fn bias(&self, k: usize) -> &[f64] {
        let s = self.layout.layer(k);
        &self.values[s.bias_offset..s.end()]
    }

    pub fn bias_mut(&mut self, k: usize) -> &mut [f64] {
        let s = *self.layout.layer(k);
        &mut self.values[s.bias_offset..s.end()]
    }

    pub fn check_spec(&self, spec: &MlpSpec) -> Result<()> {
        if self.layout != spec.layout() {
            return Err(Error::invalid(format!(
                "parameter layout {:?} does not match spec widths {:?}",
                self.layout.shapes(),
                spec.widths()
            )));
        }
        Ok(())
    }
}

/// He-scaled Gaussian weights (`N(0, 2 / fan_in)`) and zero biases.
pub fn init_params(spec: &MlpSpec, seed: u64) -> ParamVector {
    let mut params = ParamVector::zeros(spec);
    let mut rng = seeded_rng(seed);
    for k in 1..=spec.depth() {
        let fan_in = params.layout.layer(k).fan_in;
        let std = (2.0 / fan_in as f64).sqrt();
        for w in params.weights_mut(k) {
            *w = std * standard_normal(&mut rng);
        }
    }
    params
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    /// Class index per sample.
    Classes(Vec<usize>),
    /// One row of real targets per sample.
    Values(Array2<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Values(v) => v.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Input rows paired with targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    inputs: Array2<f64>,
    targets: Targets,
}

impl Dataset {
    pub fn new(name: impl Into<String>, inputs: Array2<f64>, targets: Targets) -> Result<Self> {
        check_len("dataset targets", inputs.nrows(), targets.len())?;
        if let Some(i) = inputs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "dataset inputs",
                index: i,
            });
        }
        if let Targets::Values(v) = &targets {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    what: "dataset targets",
                    index: i,
                });
            }
        }
        Ok(Self {
            name: name.into(),
            inputs,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    /// The first `n` samples (all of them if fewer).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        let targets = match &self.targets {
            Targets::Classes(c) => Targets::Classes(c[..n].to_vec()),
            Targets::Values(v) => Targets::Values(v.slice(ndarray::s![..n, ..]).to_owned()),
        };
        Self {
            name: self.name.clone(),
            inputs: self.inputs.slice(ndarray::s![..n, ..]).to_owned(),
            targets,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_width(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &Array2<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Checks that this dataset can be fed to `spec`.
    pub fn check_spec(&self, spec: &MlpSpec) -> Result<()> {
        if self.is_empty() {
            return Err(Error::invalid(format!("dataset '{}' is empty", self.name)));
        }
        check_len("dataset input width", spec.input_width(), self.input_width())?;
        match (&self.targets, spec.loss_kind()) {
            (Targets::Classes(c), LossKind::CrossEntropy) => {
                let classes = spec.output_width();
                if let Some(bad) = c.iter().find(|&&y| y >= classes) {
                    return Err(Error::invalid(format!(
                        "class index {bad} out of range for {classes} outputs"
                    )));
                }
                Ok(())
            }
            (Targets::Values(v), LossKind::MeanSquaredError) => {
                check_len("regression target width", spec.output_width(), v.ncols())
            }
            _ => Err(Error::invalid(format!(
                "dataset '{}' targets do not match loss {:?}",
                self.name,
                spec.loss_kind()
            ))),
        }
    }
}
