use crate::diffcore::net::{DenseLayer, EncoderNet, ForwardCache, NORM_FLOOR};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};
use crate::scalar::Scalar;

/// A scalar objective defined on the feature matrix an encoder emits.
///
/// Implementors return the loss together with its gradient with respect to
/// every feature entry; [`backprop`] chains that through the encoder.
pub trait FeatureLoss<T: Scalar> {
    fn value_and_grad(&self, features: &Matrix<T>) -> Result<(T, Matrix<T>)>;

    fn value(&self, features: &Matrix<T>) -> Result<T> {
        Ok(self.value_and_grad(features)?.0)
    }
}

impl<T: Scalar, F: FeatureLoss<T> + ?Sized> FeatureLoss<T> for &F {
    fn value_and_grad(&self, features: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        (**self).value_and_grad(features)
    }

    fn value(&self, features: &Matrix<T>) -> Result<T> {
        (**self).value(features)
    }
}

/// Gradient of a scalar with respect to every parameter of an encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct GradSet<T> {
    pub(crate) layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> GradSet<T> {
    pub fn zeros_like(net: &EncoderNet<T>) -> Self {
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| DenseLayer::zeros(l.in_dim(), l.out_dim()))
                .collect(),
        }
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    /// Same ordering as [`EncoderNet::params`].
    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.as_slice().iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.as_mut_slice().iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn is_congruent(&self, net: &EncoderNet<T>) -> bool {
        self.layers.len() == net.layers().len()
            && self
                .layers
                .iter()
                .zip(net.layers())
                .all(|(g, l)| g.weight.shape() == l.weight.shape() && g.bias.len() == l.bias.len())
    }

    pub fn scale(&mut self, factor: T) {
        for v in self.values_mut() {
            *v *= factor;
        }
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, factor: T, other: &Self) {
        for (a, &b) in self.values_mut().zip(other.values()) {
            *a += factor * b;
        }
    }
}

/// Reverse-mode gradient of `loss(net(inputs))` with respect to all
/// parameters of `net`. Returns the loss value alongside the gradient.
///
/// The rectifier uses subgradient 0 at exactly 0.
pub fn backprop<T: Scalar, L: FeatureLoss<T> + ?Sized>(
    net: &EncoderNet<T>,
    inputs: &Matrix<T>,
    loss: &L,
) -> Result<(T, GradSet<T>)> {
    let cache = net.forward_cached(inputs)?;
    let (value, dfeat) = loss.value_and_grad(cache.output())?;
    if !value.is_finite() {
        return Err(Error::Numeric(format!("loss evaluated to {value}")));
    }
    if dfeat.shape() != cache.output().shape() {
        return Err(Error::InvalidInput(format!(
            "loss gradient shape {:?} differs from feature shape {:?}",
            dfeat.shape(),
            cache.output().shape()
        )));
    }
    let grads = backward(net, &cache, dfeat);
    if !grads.all_finite() {
        return Err(Error::Numeric("non-finite parameter gradient".into()));
    }
    Ok((value, grads))
}

/// Chains an output-feature gradient back through the cached forward pass.
pub fn backward<T: Scalar>(
    net: &EncoderNet<T>,
    cache: &ForwardCache<T>,
    mut upstream: Matrix<T>,
) -> GradSet<T> {
    let mut grads = GradSet::zeros_like(net);
    if net.normalize_output() {
        let floor = T::lit(NORM_FLOOR);
        for (i, &n) in cache.norms.iter().enumerate() {
            let y = cache.output.row(i);
            let dy = upstream.row_mut(i);
            if n > floor {
                // d(u/|u|) = (I - y yᵀ) / |u|
                let proj = dot(y, dy);
                for (d, &yv) in dy.iter_mut().zip(y) {
                    *d = (*d - proj * yv) / n;
                }
            } else {
                for d in dy.iter_mut() {
                    *d /= floor;
                }
            }
        }
    }

    let last = net.layers().len() - 1;
    for k in (0..=last).rev() {
        let layer = &net.layers()[k];
        if k < last {
            let pre = &cache.pre[k];
            for (d, &z) in upstream.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                if z <= T::zero() {
                    *d = T::zero();
                }
            }
        }
        let input = &cache.inputs[k];
        let g = &mut grads.layers[k];
        for i in 0..upstream.rows() {
            let dz = upstream.row(i);
            let x = input.row(i);
            for (o, &d) in dz.iter().enumerate() {
                if d != T::zero() {
                    axpy(d, x, g.weight.row_mut(o));
                }
                g.bias[o] += d;
            }
        }
        if k > 0 {
            let mut down = Matrix::zeros(upstream.rows(), layer.in_dim());
            for i in 0..upstream.rows() {
                let dz = upstream.row(i);
                let dx = down.row_mut(i);
                for (o, &d) in dz.iter().enumerate() {
                    if d != T::zero() {
                        axpy(d, layer.weight.row(o), dx);
                    }
                }
            }
            upstream = down;
        }
    }
    grads
}

/// Compares [`backprop`] against central finite differences on every
/// parameter and returns the largest relative discrepancy. Entries whose
/// analytic gradient is below `1e-8` in magnitude contribute their absolute
/// error instead.
pub fn finite_diff_check<L: FeatureLoss<f64> + ?Sized>(
    net: &EncoderNet<f64>,
    inputs: &Matrix<f64>,
    loss: &L,
    epsilon: f64,
) -> Result<f64> {
    if !(1e-7..=1e-4).contains(&epsilon) {
        return Err(Error::Config(format!(
            "finite-difference step {epsilon} outside [1e-7, 1e-4]"
        )));
    }
    let (_, analytic) = backprop(net, inputs, loss)?;
    let analytic: Vec<f64> = analytic.values().copied().collect();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for (idx, &a) in analytic.iter().enumerate() {
        let original = *probe.params().nth(idx).expect("index within params");
        set_param(&mut probe, idx, original + epsilon);
        let plus = loss.value(&probe.forward(inputs)?)?;
        set_param(&mut probe, idx, original - epsilon);
        let minus = loss.value(&probe.forward(inputs)?)?;
        set_param(&mut probe, idx, original);
        let numeric = (plus - minus) / (2.0 * epsilon);
        let err = if a.abs() < 1e-8 {
            (a - numeric).abs()
        } else {
            (a - numeric).abs() / a.abs()
        };
        worst = worst.max(err);
    }
    Ok(worst)
}

fn set_param<T: Scalar>(net: &mut EncoderNet<T>, idx: usize, value: T) {
    if let Some(p) = net.params_mut().nth(idx) {
        *p = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::net::gaussian_matrix;
    use crate::seed::{self, Stream};
    use approx::assert_abs_diff_eq;

    struct Constant;

    impl FeatureLoss<f64> for Constant {
        fn value_and_grad(&self, f: &Matrix<f64>) -> Result<(f64, Matrix<f64>)> {
            Ok((3.5, Matrix::zeros(f.rows(), f.cols())))
        }
    }

    /// Sum of squared feature entries.
    struct SquaredNorm;

    impl FeatureLoss<f64> for SquaredNorm {
        fn value_and_grad(&self, f: &Matrix<f64>) -> Result<(f64, Matrix<f64>)> {
            let v = f.as_slice().iter().map(|x| x * x).sum();
            Ok((v, f.map(|x| 2.0 * x)))
        }
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let net = EncoderNet::<f64>::init(&[3, 5, 2], true, 1).unwrap();
        let x = gaussian_matrix(4, 3, &mut seed::rng(0, Stream::Synthetic, &[]));
        let (v, g) = backprop(&net, &x, &Constant).unwrap();
        assert_eq!(v, 3.5);
        assert!(g.values().all(|&x| x == 0.0));
        assert!(g.is_congruent(&net));
    }

    #[test]
    fn single_layer_squared_norm_matches_closed_form() {
        // loss = |W x|^2  =>  dL/dW = 2 (W x) xᵀ, dL/db = 2 W x (b = 0)
        let w = Matrix::from_rows(&[[0.5, -1.0, 2.0], [1.5, 0.25, -0.5]]).unwrap();
        let net = EncoderNet::new(vec![DenseLayer::new(w.clone(), vec![0.0; 2]).unwrap()], false)
            .unwrap();
        let x = [1.0, 2.0, -1.0];
        let wx: Vec<f64> = (0..2).map(|o| dot(w.row(o), &x)).collect();
        let (_, g) = backprop(&net, &Matrix::from_rows(&[x]).unwrap(), &SquaredNorm).unwrap();
        let gl = &g.layers()[0];
        for o in 0..2 {
            for i in 0..3 {
                assert_abs_diff_eq!(gl.weight[(o, i)], 2.0 * wx[o] * x[i], epsilon = 1e-14);
            }
            assert_abs_diff_eq!(gl.bias[o], 2.0 * wx[o], epsilon = 1e-14);
        }
    }

    #[test]
    fn linear_quadratic_gradcheck_is_tight() {
        let net = EncoderNet::<f64>::init(&[4, 3], false, 5).unwrap();
        let x = gaussian_matrix(3, 4, &mut seed::rng(1, Stream::Synthetic, &[]));
        let err = finite_diff_check(&net, &x, &SquaredNorm, 1e-5).unwrap();
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn normalized_deep_net_gradcheck() {
        let net = EncoderNet::<f64>::init(&[5, 8, 8, 4], true, 9).unwrap();
        let x = gaussian_matrix(6, 5, &mut seed::rng(2, Stream::Synthetic, &[]));
        struct Linear(Matrix<f64>);
        impl FeatureLoss<f64> for Linear {
            fn value_and_grad(&self, f: &Matrix<f64>) -> Result<(f64, Matrix<f64>)> {
                Ok((dot(f.as_slice(), self.0.as_slice()), self.0.clone()))
            }
        }
        let target = gaussian_matrix(6, 4, &mut seed::rng(3, Stream::Synthetic, &[]));
        let err = finite_diff_check(&net, &x, &Linear(target), 1e-6).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn gradcheck_rejects_step_out_of_range() {
        let net = EncoderNet::<f64>::init(&[2, 2], false, 0).unwrap();
        let x = Matrix::zeros(1, 2);
        assert!(finite_diff_check(&net, &x, &SquaredNorm, 1e-2).is_err());
    }
}
