//! Layer descriptions, named parameter sets and sequential networks.

use rand::Rng;

use crate::error::{AutodiffError, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// One stage of a [`Sequential`] network. Shapes exclude the batch axis.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// `[in] -> [out]`
    Linear { inp: usize, out: usize },
    /// `[in_ch, L] -> [out_ch, (L - kernel) / stride + 1]`
    Conv1d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
    Tanh,
    /// `[C, L] -> [C, L / size]`
    MaxPool1d { size: usize },
    Flatten,
    Softmax,
    LogSoftmax,
}

/// Ordered, named collection of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new(entries: Vec<(String, Tensor)>) -> Self {
        let (names, tensors) = entries.into_iter().unzip();
        Self { names, tensors }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(move |i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Registers every tensor as a trainable leaf, in order.
    pub fn register(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.param(t.clone())).collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    fn check_compatible(&self, other: &ParamSet) -> Result<()> {
        let same = self.len() == other.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.shape() == b.shape());
        if same {
            Ok(())
        } else {
            Err(AutodiffError::ShapeMismatch {
                op: "param_set",
                detail: "parameter sets have different layouts".into(),
            })
        }
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &ParamSet) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += c * y;
            }
        }
        Ok(())
    }

    /// `self - other`, elementwise.
    pub fn difference(&self, other: &ParamSet) -> Result<ParamSet> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Largest elementwise absolute difference, or `None` for different layouts.
    pub fn max_abs_diff(&self, other: &ParamSet) -> Option<f64> {
        self.check_compatible(other).ok()?;
        Some(
            self.tensors
                .iter()
                .zip(&other.tensors)
                .filter_map(|(a, b)| a.max_abs_diff(b))
                .fold(0.0, f64::max),
        )
    }

    /// Prefixes every name with `prefix.`.
    pub fn prefixed(&self, prefix: &str) -> Vec<(String, Tensor)> {
        self.iter()
            .map(|(n, t)| (format!("{prefix}.{n}"), t.clone()))
            .collect()
    }
}

/// Feed-forward stack of [`Layer`]s applied to `[B, ..input_shape]` tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequential {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    output_shape: Vec<usize>,
}

fn bad_layer(detail: String) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op: "sequential",
        detail,
    }
}

impl Sequential {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let mut shape = input_shape.clone();
        for (i, layer) in layers.iter().enumerate() {
            shape = match (layer, shape.as_slice()) {
                (Layer::Linear { inp, out }, [n]) if n == inp && *out > 0 => vec![*out],
                (
                    Layer::Conv1d {
                        in_ch,
                        out_ch,
                        kernel,
                        stride,
                    },
                    [c, l],
                ) if c == in_ch && *kernel > 0 && *stride > 0 && l >= kernel && *out_ch > 0 => {
                    vec![*out_ch, (l - kernel) / stride + 1]
                }
                (Layer::MaxPool1d { size }, [c, l]) if *size > 0 && l >= size => {
                    vec![*c, l / size]
                }
                (Layer::Flatten, s) if !s.is_empty() => vec![s.iter().product()],
                (Layer::Relu | Layer::Tanh, s) if !s.is_empty() => s.to_vec(),
                (Layer::Softmax | Layer::LogSoftmax, [n]) => vec![*n],
                (layer, s) => {
                    return Err(bad_layer(format!(
                        "layer {i} ({layer:?}) cannot take input shape {s:?}"
                    )))
                }
            };
        }
        Ok(Self {
            input_shape,
            layers,
            output_shape: shape,
        })
    }

    /// Tanh multilayer perceptron: `widths[0] -> ... -> widths[last]`, linear head.
    pub fn mlp(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 {
            return Err(bad_layer("an MLP needs at least input and output widths".into()));
        }
        let mut layers = Vec::new();
        for (i, pair) in widths.windows(2).enumerate() {
            layers.push(Layer::Linear {
                inp: pair[0],
                out: pair[1],
            });
            if i + 2 < widths.len() {
                layers.push(Layer::Tanh);
            }
        }
        Self::new(vec![widths[0]], layers)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Names and shapes of the trainable tensors, in registration order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                Layer::Linear { inp, out: o } => {
                    out.push((format!("{i}.weight"), vec![inp, o]));
                    out.push((format!("{i}.bias"), vec![o]));
                }
                Layer::Conv1d {
                    in_ch,
                    out_ch,
                    kernel,
                    ..
                } => {
                    out.push((format!("{i}.weight"), vec![out_ch, in_ch, kernel]));
                    out.push((format!("{i}.bias"), vec![out_ch]));
                }
                _ => {}
            }
        }
        out
    }

    /// Glorot-uniform linear weights, He-uniform convolution kernels, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamSet {
        let mut entries = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let (wshape, bound, bias_len) = match *layer {
                Layer::Linear { inp, out } => {
                    (vec![inp, out], (6.0 / (inp + out) as f64).sqrt(), out)
                }
                Layer::Conv1d {
                    in_ch,
                    out_ch,
                    kernel,
                    ..
                } => (
                    vec![out_ch, in_ch, kernel],
                    (6.0 / (in_ch * kernel) as f64).sqrt(),
                    out_ch,
                ),
                _ => continue,
            };
            let n: usize = wshape.iter().product();
            let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
            entries.push((format!("{i}.weight"), Tensor::new(wshape, data).expect("init shape")));
            entries.push((format!("{i}.bias"), Tensor::zeros(&[bias_len])));
        }
        ParamSet::new(entries)
    }

    /// Checks that `params` matches this network's layout.
    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        let expected = self.param_shapes();
        let ok = expected.len() == params.len()
            && expected
                .iter()
                .zip(params.tensors())
                .all(|((_, s), t)| s.as_slice() == t.shape());
        if ok {
            Ok(())
        } else {
            Err(bad_layer("parameter layout does not match network".into()))
        }
    }

    /// Records the network on `tape`. `params` come from [`ParamSet::register`].
    pub fn forward(&self, tape: &mut Tape, params: &[Var], input: Var) -> Result<Var> {
        let shape = tape.value(input).shape();
        if shape.len() != self.input_shape.len() + 1 || shape[1..] != self.input_shape[..] {
            return Err(AutodiffError::ShapeMismatch {
                op: "forward",
                detail: format!("expected [B, {:?}], got {shape:?}", self.input_shape),
            });
        }
        let mut h = input;
        let mut p = params.iter();
        let mut next = || {
            p.next()
                .copied()
                .ok_or_else(|| bad_layer("too few parameters".into()))
        };
        for layer in &self.layers {
            h = match *layer {
                Layer::Linear { .. } => {
                    let (w, b) = (next()?, next()?);
                    tape.linear(h, w, b)?
                }
                Layer::Conv1d { stride, .. } => {
                    let (w, b) = (next()?, next()?);
                    tape.conv1d(h, w, b, stride)?
                }
                Layer::Relu => tape.relu(h)?,
                Layer::Tanh => tape.tanh(h)?,
                Layer::MaxPool1d { size } => tape.max_pool1d(h, size)?,
                Layer::Flatten => tape.flatten(h)?,
                Layer::Softmax => tape.softmax(h)?,
                Layer::LogSoftmax => tape.log_softmax(h)?,
            };
        }
        Ok(h)
    }

    /// Forward pass without keeping the tape.
    pub fn eval(&self, params: &ParamSet, input: &Tensor) -> Result<Tensor> {
        self.check_params(params)?;
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let x = tape.constant(input.clone());
        let y = self.forward(&mut tape, &vars, x)?;
        Ok(tape.value(y).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cnn() -> Sequential {
        Sequential::new(
            vec![4, 8],
            vec![
                Layer::Conv1d {
                    in_ch: 4,
                    out_ch: 3,
                    kernel: 3,
                    stride: 1,
                },
                Layer::Relu,
                Layer::MaxPool1d { size: 2 },
                Layer::Flatten,
                Layer::Linear { inp: 9, out: 2 },
                Layer::Softmax,
            ],
        )
        .unwrap()
    }

    #[test]
    fn shapes_propagate() {
        let net = small_cnn();
        assert_eq!(net.output_shape(), &[2]);
        let names: Vec<_> = net.param_shapes().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["0.weight", "0.bias", "4.weight", "4.bias"]);
    }

    #[test]
    fn invalid_stack_rejected() {
        assert!(Sequential::new(vec![3], vec![Layer::Linear { inp: 4, out: 2 }]).is_err());
        assert!(Sequential::new(vec![3], vec![Layer::MaxPool1d { size: 2 }]).is_err());
    }

    #[test]
    fn eval_is_deterministic_and_normalized() {
        let net = small_cnn();
        let params = net.init(&mut ChaCha8Rng::seed_from_u64(3));
        let x = Tensor::new(vec![5, 4, 8], (0..160).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let a = net.eval(&params, &x).unwrap();
        let b = net.eval(&params, &x).unwrap();
        assert_eq!(a, b);
        for row in a.data().chunks(2) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mlp_has_tanh_between_linears() {
        let net = Sequential::mlp(&[6, 64, 64, 9]).unwrap();
        assert_eq!(
            net.layers().iter().filter(|l| matches!(l, Layer::Tanh)).count(),
            2
        );
        assert_eq!(net.output_shape(), &[9]);
    }

    #[test]
    fn wrong_input_shape_rejected() {
        let net = Sequential::mlp(&[3, 2]).unwrap();
        let params = net.init(&mut ChaCha8Rng::seed_from_u64(0));
        assert!(net.eval(&params, &Tensor::zeros(&[1, 4])).is_err());
    }

    #[test]
    fn param_set_arithmetic() {
        let a = ParamSet::new(vec![("w".into(), Tensor::from_vec(vec![1.0, 2.0]))]);
        let b = ParamSet::new(vec![("w".into(), Tensor::from_vec(vec![0.5, 0.5]))]);
        let d = a.difference(&b).unwrap();
        assert_eq!(d.get("w").unwrap().data(), &[0.5, 1.5]);
        let mut c = b.clone();
        c.axpy(1.0, &d).unwrap();
        assert_eq!(c, a);
    }
}
