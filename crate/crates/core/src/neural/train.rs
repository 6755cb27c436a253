use ndarray::Array2;
use rand::Rng;

use super::network::{backward, forward, Network, NetworkState, PreparedInput};
use super::{CoeffMode, Loss};
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub step_size: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: NetworkState,
    /// Loss of the forward pass at the start of each epoch.
    pub trace: Vec<f64>,
}

/// Returned by training observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// `Θ(ℓ)` uniform on `±sqrt(6 / (F(ℓ−1) + F(ℓ)))`; coefficients from the layer spec.
pub fn init_state(net: &Network, seed: u64) -> NetworkState {
    let mut rng = seeded(seed);
    let dims = &net.spec().feature_dims;
    let weights = (0..net.spec().depth())
        .map(|l| {
            let bound = (6.0 / (dims[l] + dims[l + 1]) as f64).sqrt();
            Array2::from_shape_simple_fn((dims[l], dims[l + 1]), || rng.random_range(-bound..=bound))
        })
        .collect();
    let coeffs = net.spec().layers.iter().map(|l| l.initial_coeffs()).collect();
    NetworkState::new(weights, coeffs)
}

fn check(epochs: usize, step_size: f64) -> Result<()> {
    if epochs == 0 {
        return Err(Error::invalid("epochs must be at least 1"));
    }
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::invalid(format!("step size must be positive, got {step_size}")));
    }
    Ok(())
}

/// Full-batch fixed-step gradient descent from a seeded initialization.
pub fn train(net: &Network, z: Array2<f64>, loss: &Loss<'_>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    check(cfg.epochs, cfg.step_size)?;
    let input = net.prepare(z)?;
    let mut state = init_state(net, cfg.seed);
    let trace = train_with(net, &mut state, &input, loss, cfg.epochs, cfg.step_size, |_, _, _, _| Control::Continue)?;
    state.clear_cache();
    Ok(TrainOutcome { state, trace })
}

/// Gradient descent on an existing state. Before each update the observer
/// sees the epoch index, the network output, its loss and the parameters
/// that produced it, and may stop training early.
///
/// A non-finite loss, activation or parameter aborts with [`Error::Diverged`].
pub fn train_with<F>(
    net: &Network,
    state: &mut NetworkState,
    input: &PreparedInput,
    loss: &Loss<'_>,
    epochs: usize,
    step_size: f64,
    mut observer: F,
) -> Result<Vec<f64>>
where
    F: FnMut(usize, &Array2<f64>, f64, &NetworkState) -> Control,
{
    check(epochs, step_size)?;
    let mut trace = Vec::with_capacity(epochs);
    let diverged = |epoch: usize| Error::Diverged {
        epoch,
        last_finite_epoch: epoch.checked_sub(1),
    };
    for epoch in 0..epochs {
        let out = match forward(net, state, input) {
            Ok(out) => out,
            Err(Error::DivergedForward { .. }) => return Err(diverged(epoch)),
            Err(e) => return Err(e),
        };
        let value = loss.value(&out)?;
        if !value.is_finite() {
            return Err(diverged(epoch));
        }
        trace.push(value);
        if observer(epoch, &out, value, state) == Control::Stop {
            break;
        }
        let grads = backward(net, state, input, loss)?;
        for (w, g) in state.weights.iter_mut().zip(&grads.weights) {
            w.scaled_add(-step_size, g);
        }
        for ((h, g), layer) in state.coeffs.iter_mut().zip(&grads.coeffs).zip(&net.spec().layers) {
            if let (CoeffMode::Learnable, Some(g)) = (layer.coeff_mode, g) {
                for (hk, gk) in h.iter_mut().zip(g) {
                    *hk -= step_size * gk;
                }
            }
        }
        if !state.is_finite() {
            return Err(Error::Diverged {
                epoch,
                last_finite_epoch: Some(epoch),
            });
        }
    }
    Ok(trace)
}
