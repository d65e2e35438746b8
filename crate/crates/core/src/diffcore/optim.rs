use crate::diffcore::backprop::GradSet;
use crate::diffcore::net::EncoderNet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Half-cosine decay from `base_lr` at step 0 to zero at `total`.
pub fn cosine_lr<T: Scalar>(step: usize, total: usize, base_lr: T) -> T {
    assert!(total > 0, "cosine schedule needs a positive horizon");
    let progress = T::from_count(step.min(total)) / T::from_count(total);
    base_lr * T::half() * (T::one() + (T::PI() * progress).cos())
}

/// SGD with heavy-ball momentum, coupled weight decay and a cosine schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct OptState<T> {
    momentum_buffers: GradSet<T>,
    pub step: usize,
    pub total_steps: usize,
    pub base_lr: T,
    pub momentum: T,
    pub weight_decay: T,
}

impl<T: Scalar> OptState<T> {
    pub fn new(
        net: &EncoderNet<T>,
        total_steps: usize,
        base_lr: T,
        momentum: T,
        weight_decay: T,
    ) -> Result<Self> {
        if total_steps == 0 {
            return Err(Error::Config("optimizer horizon must be positive".into()));
        }
        if !(base_lr > T::zero()) {
            return Err(Error::Config(format!("learning rate {base_lr} must be positive")));
        }
        if !(momentum >= T::zero() && momentum < T::one()) {
            return Err(Error::Config(format!("momentum {momentum} outside [0, 1)")));
        }
        if !(weight_decay >= T::zero()) {
            return Err(Error::Config(format!("weight decay {weight_decay} is negative")));
        }
        Ok(Self {
            momentum_buffers: GradSet::zeros_like(net),
            step: 0,
            total_steps,
            base_lr,
            momentum,
            weight_decay,
        })
    }

    pub fn buffers(&self) -> &GradSet<T> {
        &self.momentum_buffers
    }

    pub fn current_lr(&self) -> T {
        cosine_lr(self.step, self.total_steps, self.base_lr)
    }
}

/// One optimizer step:
/// `buf ← momentum·buf + grad + wd·param`, `param ← param − lr(step)·buf`.
///
/// Non-finite gradients abort the step before anything is mutated.
pub fn sgd_momentum_step<T: Scalar>(
    net: &mut EncoderNet<T>,
    grads: &GradSet<T>,
    opt: &mut OptState<T>,
) -> Result<()> {
    if !grads.is_congruent(net) || !opt.momentum_buffers.is_congruent(net) {
        return Err(Error::InvalidInput(
            "gradient or momentum shapes do not match the encoder".into(),
        ));
    }
    if !grads.all_finite() {
        return Err(Error::Numeric(format!(
            "non-finite gradient at optimizer step {}",
            opt.step
        )));
    }
    let lr = opt.current_lr();
    let (momentum, wd) = (opt.momentum, opt.weight_decay);
    for ((p, &g), b) in net
        .params_mut()
        .zip(grads.values())
        .zip(opt.momentum_buffers.values_mut())
    {
        *b = momentum * *b + g + wd * *p;
        *p -= lr * *b;
    }
    opt.step += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::net::DenseLayer;
    use crate::linalg::Matrix;
    use approx::assert_abs_diff_eq;

    fn tiny() -> EncoderNet<f64> {
        let w = Matrix::from_rows(&[[1.0, -2.0]]).unwrap();
        EncoderNet::new(vec![DenseLayer::new(w, vec![0.5]).unwrap()], false).unwrap()
    }

    fn grads_of(net: &EncoderNet<f64>, vals: [f64; 3]) -> GradSet<f64> {
        let mut g = GradSet::zeros_like(net);
        for (d, v) in g.values_mut().zip(vals) {
            *d = v;
        }
        g
    }

    #[test]
    fn schedule_endpoints() {
        assert_abs_diff_eq!(cosine_lr(0, 100, 0.06), 0.06, epsilon = 1e-17);
        assert_abs_diff_eq!(cosine_lr(100, 100, 0.06), 0.0, epsilon = 1e-17);
        assert_abs_diff_eq!(cosine_lr(50, 100, 0.06), 0.03, epsilon = 1e-17);
    }

    #[test]
    fn schedule_monotone() {
        let lrs: Vec<f64> = (0..=37).map(|s| cosine_lr(s, 37, 1.0)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut net = tiny();
        let before = net.clone();
        let g = GradSet::zeros_like(&net);
        let mut opt = OptState::new(&net, 10, 0.1, 0.9, 0.0).unwrap();
        sgd_momentum_step(&mut net, &g, &mut opt).unwrap();
        assert_eq!(net, before);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn vanilla_sgd_step() {
        let mut net = tiny();
        let g = grads_of(&net, [0.2, -0.4, 1.0]);
        // first step of the schedule uses the full base rate
        let mut opt = OptState::new(&net, 10, 0.1, 0.0, 0.0).unwrap();
        sgd_momentum_step(&mut net, &g, &mut opt).unwrap();
        let p: Vec<f64> = net.params().copied().collect();
        assert_abs_diff_eq!(p[0], 1.0 - 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], -2.0 + 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(p[2], 0.5 - 0.1, epsilon = 1e-15);
    }

    #[test]
    fn two_momentum_steps_match_unrolled_recursion() {
        let mut net = tiny();
        let g1 = grads_of(&net, [0.3, 0.1, -0.2]);
        let g2 = grads_of(&net, [-0.1, 0.4, 0.05]);
        let (lr0, m, wd, total) = (0.05, 0.9, 0.01, 4);
        let mut opt = OptState::new(&net, total, lr0, m, wd).unwrap();
        let p0: Vec<f64> = net.params().copied().collect();
        sgd_momentum_step(&mut net, &g1, &mut opt).unwrap();
        sgd_momentum_step(&mut net, &g2, &mut opt).unwrap();

        let lr1 = lr0 * 0.5 * (1.0 + (std::f64::consts::PI / 4.0).cos());
        let g1v: Vec<f64> = g1.values().copied().collect();
        let g2v: Vec<f64> = g2.values().copied().collect();
        for i in 0..3 {
            let b1 = g1v[i] + wd * p0[i];
            let p1 = p0[i] - lr0 * b1;
            let b2 = m * b1 + g2v[i] + wd * p1;
            let p2 = p1 - lr1 * b2;
            assert_abs_diff_eq!(net.params().nth(i).copied().unwrap(), p2, epsilon = 1e-15);
        }
    }

    #[test]
    fn nan_gradient_aborts_without_mutation() {
        let mut net = tiny();
        let before = net.clone();
        let g = grads_of(&net, [f64::NAN, 0.0, 0.0]);
        let mut opt = OptState::new(&net, 10, 0.1, 0.9, 0.0).unwrap();
        assert!(matches!(
            sgd_momentum_step(&mut net, &g, &mut opt),
            Err(Error::Numeric(_))
        ));
        assert_eq!(net, before);
        assert_eq!(opt.step, 0);
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        let net = tiny();
        assert!(OptState::new(&net, 0, 0.1, 0.9, 0.0).is_err());
        assert!(OptState::new(&net, 5, 0.0, 0.9, 0.0).is_err());
        assert!(OptState::new(&net, 5, 0.1, 1.0, 0.0).is_err());
        assert!(OptState::new(&net, 5, 0.1, 0.9, -1.0).is_err());
    }
}
