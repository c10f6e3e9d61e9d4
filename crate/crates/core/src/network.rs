//! Feed-forward networks: dense affine layers, ReLU, and valid-padding
//! stride-1 convolutions, with a versioned JSON file format.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{rational_from_f64, Rational, Scalar};

pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(Error::InvalidNetwork("matrix must be non-empty".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                context: "matrix row",
                expected: cols,
                found: r.len(),
            });
        }
        let n = rows.len();
        Ok(Matrix {
            rows: n,
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &S {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    fn try_map<T: Scalar>(&self, f: impl Fn(&S) -> Result<T>) -> Result<Matrix<T>> {
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect::<Result<_>>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<S> {
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(weights: Matrix<S>, bias: Vec<S>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::InvalidNetwork(format!(
                "dense bias has length {}, expected {}",
                bias.len(),
                weights.rows()
            )));
        }
        Ok(Dense { weights, bias })
    }

    pub fn eval(&self, x: &[S]) -> Vec<S> {
        (0..self.weights.rows())
            .map(|r| {
                self.weights
                    .row(r)
                    .iter()
                    .zip(x)
                    .fold(self.bias[r].clone(), |acc, (w, v)| {
                        acc + w.clone() * v.clone()
                    })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<S> {
    pub filter: Matrix<S>,
    pub input_shape: (usize, usize),
    pub bias: Vec<S>,
}

impl<S: Scalar> Conv2d<S> {
    /// `bias = None` means the zero vector.
    pub fn new(
        filter: Matrix<S>,
        input_shape: (usize, usize),
        bias: Option<Vec<S>>,
    ) -> Result<Self> {
        let (h, w) = input_shape;
        if filter.rows() > h || filter.cols() > w {
            return Err(Error::InvalidNetwork(format!(
                "filter {}x{} larger than input {h}x{w}",
                filter.rows(),
                filter.cols()
            )));
        }
        let out = (h - filter.rows() + 1) * (w - filter.cols() + 1);
        let bias = bias.unwrap_or_else(|| vec![S::zero(); out]);
        if bias.len() != out {
            return Err(Error::InvalidNetwork(format!(
                "conv2d bias has length {}, expected {out}",
                bias.len()
            )));
        }
        Ok(Conv2d {
            filter,
            input_shape,
            bias,
        })
    }

    pub fn output_shape(&self) -> (usize, usize) {
        let (h, w) = self.input_shape;
        (h - self.filter.rows() + 1, w - self.filter.cols() + 1)
    }

    /// Direct sliding-window evaluation over a row-major image.
    pub fn eval(&self, x: &[S]) -> Vec<S> {
        let (_, w) = self.input_shape;
        let (oh, ow) = self.output_shape();
        let mut out = Vec::with_capacity(oh * ow);
        for oi in 0..oh {
            for oj in 0..ow {
                let mut acc = self.bias[oi * ow + oj].clone();
                for a in 0..self.filter.rows() {
                    for b in 0..self.filter.cols() {
                        acc =
                            acc + self.filter.get(a, b).clone() * x[(oi + a) * w + oj + b].clone();
                    }
                }
                out.push(acc);
            }
        }
        out
    }
}

/// Rewrites a convolution as the equivalent dense affine layer: row `r` holds
/// the filter taps at the flattened positions of the `r`-th receptive field.
pub fn lower_conv<S: Scalar>(conv: &Conv2d<S>) -> Dense<S> {
    let (h, w) = conv.input_shape;
    let (oh, ow) = conv.output_shape();
    let mut weights = Matrix::zeros(oh * ow, h * w);
    for oi in 0..oh {
        for oj in 0..ow {
            let row = oi * ow + oj;
            for a in 0..conv.filter.rows() {
                for b in 0..conv.filter.cols() {
                    weights.set(row, (oi + a) * w + oj + b, conv.filter.get(a, b).clone());
                }
            }
        }
    }
    Dense {
        weights,
        bias: conv.bias.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<S> {
    Dense(Dense<S>),
    Relu { width: usize },
    Conv2d(Conv2d<S>),
}

impl<S: Scalar> Layer<S> {
    pub fn input_width(&self) -> usize {
        match self {
            Layer::Dense(d) => d.weights.cols(),
            Layer::Relu { width } => *width,
            Layer::Conv2d(c) => c.input_shape.0 * c.input_shape.1,
        }
    }

    pub fn output_width(&self) -> usize {
        match self {
            Layer::Dense(d) => d.weights.rows(),
            Layer::Relu { width } => *width,
            Layer::Conv2d(c) => {
                let (oh, ow) = c.output_shape();
                oh * ow
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Relu { .. } => "relu",
            Layer::Conv2d(_) => "conv2d",
        }
    }

    pub fn eval(&self, x: &[S]) -> Vec<S> {
        match self {
            Layer::Dense(d) => d.eval(x),
            Layer::Relu { .. } => x
                .iter()
                .map(|v| if *v > S::zero() { v.clone() } else { S::zero() })
                .collect(),
            Layer::Conv2d(c) => c.eval(x),
        }
    }

    fn try_map<T: Scalar>(&self, f: &impl Fn(&S) -> Result<T>) -> Result<Layer<T>> {
        Ok(match self {
            Layer::Dense(d) => Layer::Dense(Dense {
                weights: d.weights.try_map(f)?,
                bias: d.bias.iter().map(f).collect::<Result<_>>()?,
            }),
            Layer::Relu { width } => Layer::Relu { width: *width },
            Layer::Conv2d(c) => Layer::Conv2d(Conv2d {
                filter: c.filter.try_map(f)?,
                input_shape: c.input_shape,
                bias: c.bias.iter().map(f).collect::<Result<_>>()?,
            }),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<S = f64> {
    layers: Vec<Layer<S>>,
}

impl<S: Scalar> Network<S> {
    pub fn new(layers: Vec<Layer<S>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("network has no layers".into()));
        }
        for (t, pair) in layers.windows(2).enumerate() {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(Error::WidthMismatch {
                    prev: t,
                    prev_width: pair[0].output_width(),
                    next: t + 1,
                    next_width: pair[1].input_width(),
                });
            }
        }
        Ok(Network { layers })
    }

    pub fn layers(&self) -> &[Layer<S>] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].output_width()
    }

    /// Sub-network over a contiguous range of layers.
    pub fn slice(&self, range: Range<usize>) -> Result<Network<S>> {
        if range.start >= range.end || range.end > self.layers.len() {
            return Err(Error::InvalidNetwork(format!(
                "layer range {range:?} invalid for {} layers",
                self.layers.len()
            )));
        }
        Ok(Network {
            layers: self.layers[range].to_vec(),
        })
    }

    /// Forward pass.
    pub fn eval(&self, x: &[S]) -> Result<Vec<S>> {
        if x.len() != self.input_width() {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_width(),
                found: x.len(),
            });
        }
        let mut v = x.to_vec();
        for layer in &self.layers {
            v = layer.eval(&v);
        }
        Ok(v)
    }

    /// Same network with every convolution replaced by its dense lowering.
    pub fn lowered(&self) -> Network<S> {
        Network {
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Conv2d(c) => Layer::Dense(lower_conv(c)),
                    other => other.clone(),
                })
                .collect(),
        }
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> Result<T>) -> Result<Network<T>> {
        Ok(Network {
            layers: self
                .layers
                .iter()
                .map(|l| l.try_map(&f))
                .collect::<Result<_>>()?,
        })
    }

    pub fn to_f64(&self) -> Network<f64> {
        self.map_scalar(|v| Ok(v.to_f64()))
            .expect("float conversion is infallible")
    }
}

impl Network<f64> {
    /// Exact copy with every weight read as the decimal it was written as.
    pub fn to_exact(&self) -> Result<Network<Rational>> {
        self.map_scalar(|v| rational_from_f64(*v))
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            format_version: NETWORK_FORMAT_VERSION,
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Dense(d) => LayerFile::Dense {
                        weights: d.weights.to_rows(),
                        bias: Some(d.bias.clone()),
                    },
                    Layer::Relu { width } => LayerFile::Relu {
                        width: Some(*width),
                    },
                    Layer::Conv2d(c) => LayerFile::Conv2d {
                        filter: c.filter.to_rows(),
                        input_shape: [c.input_shape.0, c.input_shape.1],
                        bias: Some(c.bias.clone()),
                    },
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    format_version: u32,
    layers: Vec<LayerFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum LayerFile {
    Dense {
        weights: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<Vec<f64>>,
    },
    Relu {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        width: Option<usize>,
    },
    Conv2d {
        filter: Vec<Vec<f64>>,
        input_shape: [usize; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<Vec<f64>>,
    },
}

/// Parses and validates a network file.
pub fn load_network(text: &[u8]) -> Result<Network<f64>> {
    let file: NetworkFile = serde_json::from_slice(text).map_err(|e| {
        Error::parse(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    if file.format_version != NETWORK_FORMAT_VERSION {
        return Err(Error::parse(
            "format_version",
            format!(
                "unsupported version {}, expected {NETWORK_FORMAT_VERSION}",
                file.format_version
            ),
        ));
    }
    if file.layers.is_empty() {
        return Err(Error::parse("layers", "network has no layers"));
    }
    let mut layers: Vec<Layer<f64>> = Vec::with_capacity(file.layers.len());
    for (t, raw) in file.layers.into_iter().enumerate() {
        let at = |field: &str| format!("layers[{t}].{field}");
        let layer = match raw {
            LayerFile::Dense { weights, bias } => {
                let weights = Matrix::from_rows(weights)
                    .map_err(|e| Error::parse(at("weights"), e.to_string()))?;
                let bias = bias.unwrap_or_else(|| vec![0.0; weights.rows()]);
                Layer::Dense(
                    Dense::new(weights, bias)
                        .map_err(|e| Error::parse(at("bias"), e.to_string()))?,
                )
            }
            LayerFile::Relu { width } => {
                let inferred = layers.last().map(Layer::output_width);
                let width = match (width, inferred) {
                    (Some(w), _) => w,
                    (None, Some(w)) => w,
                    (None, None) => {
                        return Err(Error::parse(
                            at("width"),
                            "leading relu needs an explicit width",
                        ))
                    }
                };
                Layer::Relu { width }
            }
            LayerFile::Conv2d {
                filter,
                input_shape,
                bias,
            } => {
                let filter = Matrix::from_rows(filter)
                    .map_err(|e| Error::parse(at("filter"), e.to_string()))?;
                Layer::Conv2d(
                    Conv2d::new(filter, (input_shape[0], input_shape[1]), bias)
                        .map_err(|e| Error::parse(at("filter"), e.to_string()))?,
                )
            }
        };
        if layer.input_width() == 0 || layer.output_width() == 0 {
            return Err(Error::parse(at("type"), "layer has zero width"));
        }
        layers.push(layer);
    }
    Network::new(layers)
}

/// Forward pass of `net` on `x`.
pub fn eval_network<S: Scalar>(net: &Network<S>, x: &[S]) -> Result<Vec<S>> {
    net.eval(x)
}
