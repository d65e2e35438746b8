use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;
use crate::seed::{self, Stream};

/// Norms below this are clamped before dividing, so an all-zero feature row
/// maps to the zero vector instead of NaN.
pub const NORM_FLOOR: f64 = 1e-12;

/// Fully connected layer computing `W x + b` with `W` stored `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weight: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        if weight.rows() != bias.len() {
            return Err(Error::InvalidInput(format!(
                "bias length {} does not match weight rows {}",
                bias.len(),
                weight.rows()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }
}

/// Multilayer perceptron with rectified hidden layers and optional L2
/// normalization of the output rows.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderNet<T> {
    layers: Vec<DenseLayer<T>>,
    normalize_output: bool,
}

/// Intermediate values recorded by [`EncoderNet::forward_cached`] for the
/// backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    /// Input to every layer; `inputs[0]` is the batch itself.
    pub(crate) inputs: Vec<Matrix<T>>,
    /// Pre-activation of every layer.
    pub(crate) pre: Vec<Matrix<T>>,
    /// Row norms of the last pre-activation (only with normalization).
    pub(crate) norms: Vec<T>,
    pub(crate) output: Matrix<T>,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &Matrix<T> {
        &self.output
    }
}

impl<T: Scalar> EncoderNet<T> {
    pub fn new(layers: Vec<DenseLayer<T>>, normalize_output: bool) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("encoder needs at least one layer".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::InvalidInput(format!(
                    "layer {k} emits {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        if layers.iter().any(|l| l.out_dim() == 0 || l.in_dim() == 0) {
            return Err(Error::InvalidInput("layer dimensions must be positive".into()));
        }
        Ok(Self {
            layers,
            normalize_output,
        })
    }

    /// He-normal initialization with zero biases. `dims` lists the input width
    /// followed by every layer's output width.
    pub fn init(dims: &[usize], normalize_output: bool, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidInput(
                "architecture needs an input and an output width".into(),
            ));
        }
        let mut rng = seed::rng(seed, Stream::Init, &[]);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = (2.0 / fan_in.max(1) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        T::lit(z * scale)
                    })
                    .collect();
                DenseLayer {
                    weight: Matrix::from_vec(fan_out, fan_in, data).expect("sized above"),
                    bias: vec![T::zero(); fan_out],
                }
            })
            .collect();
        Self::new(layers, normalize_output)
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.layers
    }

    pub fn normalize_output(&self) -> bool {
        self.normalize_output
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Every parameter in a fixed order: per layer, weights row-major then bias.
    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.as_slice().iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.as_mut_slice().iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn forward(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(self.forward_cached(batch)?.output)
    }

    /// Single-sample convenience wrapper around [`forward`](Self::forward).
    pub fn embed(&self, sample: &[T]) -> Result<Vec<T>> {
        let batch = Matrix::from_vec(1, sample.len(), sample.to_vec())?;
        Ok(self.forward(&batch)?.into_vec())
    }

    pub fn forward_cached(&self, batch: &Matrix<T>) -> Result<ForwardCache<T>> {
        if batch.cols() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "batch has {} columns, encoder expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = batch.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = Matrix::zeros(current.rows(), layer.out_dim());
            for i in 0..current.rows() {
                let x = current.row(i);
                let zi = z.row_mut(i);
                for (o, out) in zi.iter_mut().enumerate() {
                    *out = dot(layer.weight.row(o), x) + layer.bias[o];
                }
            }
            if !z.all_finite() {
                return Err(Error::Numeric(format!("non-finite activation in layer {k}")));
            }
            let next = if k < last {
                z.map(|v| if v > T::zero() { v } else { T::zero() })
            } else {
                z.clone()
            };
            inputs.push(std::mem::replace(&mut current, next));
            pre.push(z);
        }
        let mut norms = Vec::new();
        if self.normalize_output {
            let floor = T::lit(NORM_FLOOR);
            norms.reserve(current.rows());
            for i in 0..current.rows() {
                let row = current.row_mut(i);
                let n = dot(row, row).sqrt();
                let d = n.max(floor);
                for v in row.iter_mut() {
                    *v /= d;
                }
                norms.push(n);
            }
        }
        Ok(ForwardCache {
            inputs,
            pre,
            norms,
            output: current,
        })
    }

    /// Converts all parameters to another scalar type.
    pub fn cast<U: Scalar>(&self) -> EncoderNet<U> {
        EncoderNet {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weight: l.weight.cast(),
                    bias: l.bias.iter().map(|b| U::lit(b.as_f64())).collect(),
                })
                .collect(),
            normalize_output: self.normalize_output,
        }
    }
}

/// Random matrix with standard normal entries, mainly for tests and synthetic inputs.
pub fn gaussian_matrix<T: Scalar, R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix<T> {
    let data = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::lit(z)
        })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized above")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_layer_normalizes() {
        let net = EncoderNet::new(
            vec![DenseLayer::new(Matrix::<f64>::identity(2), vec![0.0, 0.0]).unwrap()],
            true,
        )
        .unwrap();
        let out = net.embed(&[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(out[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn zero_weights_collapse_to_bias_direction() {
        let bias = vec![1.0, -2.0, 2.0];
        let layer = DenseLayer::new(Matrix::<f64>::zeros(3, 4), bias.clone()).unwrap();
        let net = EncoderNet::new(vec![layer], true).unwrap();
        let out = net.embed(&[0.3, -7.0, 1.0, 2.0]).unwrap();
        for (o, b) in out.iter().zip(&bias) {
            assert_abs_diff_eq!(*o, b / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_layer_forward_matches_hand_evaluation() {
        // hidden = relu(W1 x + b1), out = normalize(W2 hidden + b2)
        let w1 = Matrix::from_rows(&[[1.0, -1.0], [0.5, 2.0], [-1.0, 0.0]]).unwrap();
        let b1 = vec![0.1, -0.2, 0.3];
        let w2 = Matrix::from_rows(&[[1.0, 0.0, 2.0], [-1.0, 1.0, 0.5]]).unwrap();
        let b2 = vec![0.0, 0.25];
        let net = EncoderNet::new(
            vec![
                DenseLayer::new(w1, b1).unwrap(),
                DenseLayer::new(w2, b2).unwrap(),
            ],
            true,
        )
        .unwrap();
        let batch = Matrix::from_rows(&[[1.0, 2.0], [-0.5, 0.25]]).unwrap();
        let out = net.forward(&batch).unwrap();

        // sample 0: W1x+b1 = (-0.9, 4.3, -0.7) -> relu (0, 4.3, 0)
        //           W2h+b2 = (0, 4.55) -> (0, 1)
        // sample 1: W1x+b1 = (-0.65, 0.05, 0.8) -> relu (0, 0.05, 0.8)
        //           W2h+b2 = (1.6, 0.7) -> / sqrt(3.05)
        let n1 = (1.6f64 * 1.6 + 0.7 * 0.7).sqrt();
        let expected = [0.0, 1.0, 1.6 / n1, 0.7 / n1];
        for (o, e) in out.as_slice().iter().zip(expected) {
            assert_abs_diff_eq!(*o, e, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_output_row_hits_norm_floor() {
        let net = EncoderNet::new(vec![DenseLayer::<f64>::zeros(2, 2)], true).unwrap();
        let out = net.embed(&[1.0, 1.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn incompatible_layers_rejected() {
        let err = EncoderNet::new(
            vec![DenseLayer::<f64>::zeros(2, 3), DenseLayer::zeros(4, 1)],
            true,
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn batch_width_checked() {
        let net = EncoderNet::<f64>::init(&[3, 2], true, 0).unwrap();
        let bad = Matrix::zeros(1, 2);
        assert!(matches!(net.forward(&bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn non_finite_activation_reported() {
        let net = EncoderNet::<f64>::init(&[2, 2], true, 0).unwrap();
        let batch = Matrix::from_rows(&[[f64::NAN, 0.0]]).unwrap();
        assert!(matches!(net.forward(&batch), Err(Error::Numeric(_))));
    }

    #[test]
    fn init_is_seeded() {
        let a = EncoderNet::<f64>::init(&[4, 8, 3], true, 11).unwrap();
        let b = EncoderNet::<f64>::init(&[4, 8, 3], true, 11).unwrap();
        let c = EncoderNet::<f64>::init(&[4, 8, 3], true, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.param_count(), 4 * 8 + 8 + 8 * 3 + 3);
    }
}
