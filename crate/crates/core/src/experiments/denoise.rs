use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::ConfigFile;
use super::{mean, median, params, run_indexed, RunRecord, Value};
use crate::error::{Error, Result};
use crate::filters::{ngf_from_distances, polynomial, random_coeffs, FilterKind};
use crate::graph::{bfs_distances, generate_sbm, gso, GsoChoice};
use crate::neural::{
    init_state, train_with, Activation, CoeffMode, Control, GraphOperators, HopScaling, Loss, Network, NetworkSpec,
    OperatorKind, OutputHead,
};
use crate::rng::{derive_seed, seeded};

const NAME: &str = "denoise";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseConfig {
    pub seed: u64,
    pub realizations: usize,
    pub n: usize,
    pub communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// `‖w‖²` for the unit-norm clean signal.
    pub noise_power: f64,
    pub generators: Vec<FilterKind>,
    pub generator_taps: usize,
    pub architectures: Vec<OperatorKind>,
    pub taps: usize,
    pub coeff_mode: CoeffMode,
    pub hop_scaling: HopScaling,
    pub input_features: usize,
    /// Standard deviation of the random network input.
    pub input_std: f64,
    pub hidden: usize,
    pub activation: Activation,
    pub epochs: usize,
    pub step_size: f64,
    /// Per-epoch error rows are written every this many epochs (the minimum
    /// always uses all of them).
    pub trace_every: usize,
    /// Shift operator of the classical-filter signal generator.
    pub generator_gso: GsoChoice,
    /// Shift operator of the adjacency and classical-filter architectures.
    pub network_gso: GsoChoice,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            realizations: 50,
            n: 256,
            communities: 8,
            p_in: 0.3,
            p_out: 0.0075,
            noise_power: 0.1,
            generators: vec![FilterKind::Classical, FilterKind::Neighborhood],
            generator_taps: 4,
            architectures: vec![OperatorKind::Adjacency, OperatorKind::Classical, OperatorKind::Neighborhood],
            taps: 4,
            coeff_mode: CoeffMode::Learnable,
            hop_scaling: HopScaling::SpectralRadius,
            input_features: 64,
            input_std: 1.0,
            hidden: 64,
            activation: Activation::Tanh,
            epochs: 3000,
            step_size: 0.01,
            trace_every: 50,
            generator_gso: GsoChoice::ADJACENCY,
            network_gso: GsoChoice::NORMALIZED_ADJACENCY,
        }
    }
}

impl ConfigFile for DenoiseConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.realizations == 0 || self.epochs == 0 || self.trace_every == 0 {
            return bad("realizations, epochs and trace_every must be positive");
        }
        if self.taps == 0 || self.generator_taps == 0 || self.input_features == 0 || self.hidden == 0 {
            return bad("taps, generator_taps, input_features and hidden must be positive");
        }
        if self.communities == 0 || self.n % self.communities != 0 {
            return bad("n must be a positive multiple of communities");
        }
        if !(self.noise_power >= 0.0) || !(self.step_size > 0.0) || !(self.input_std > 0.0) {
            return bad("noise_power must be non-negative, step_size and input_std positive");
        }
        if self.generators.is_empty() || self.architectures.is_empty() {
            return bad("generators and architectures must not be empty");
        }
        Ok(())
    }
}

fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

fn norm(x: &Array2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Outcome of fitting one architecture to one noisy signal.
struct Fit {
    generator: FilterKind,
    arch: OperatorKind,
    errors: Vec<f64>,
    diverged_at: Option<usize>,
}

fn realization(cfg: &DenoiseConfig, index: usize) -> Result<Vec<Fit>> {
    let seed = derive_seed(cfg.seed, index as u64);
    let g = generate_sbm(cfg.n, cfg.communities, cfg.p_in, cfg.p_out, derive_seed(seed, 0))?.graph;
    let dist = bfs_distances(&g);
    let spec_for = |arch| {
        NetworkSpec::uniform(
            vec![cfg.input_features, cfg.hidden, 1],
            arch,
            cfg.taps,
            cfg.coeff_mode,
            cfg.activation,
            OutputHead::Identity,
        )
    };
    let max_classical = if cfg.architectures.contains(&OperatorKind::Classical) { cfg.taps } else { 0 };
    let max_hops = if cfg.architectures.contains(&OperatorKind::Neighborhood) { cfg.taps } else { 0 };
    let ops = GraphOperators::new(&g, cfg.network_gso, max_classical, max_hops, cfg.hop_scaling)?;

    let mut fits = Vec::new();
    for (gi, &generator) in cfg.generators.iter().enumerate() {
        let mut rng = seeded(derive_seed(seed, 1 + gi as u64));
        let h = random_coeffs(cfg.generator_taps, rng.random())?;
        let filter = match generator {
            FilterKind::Classical => polynomial(&gso(&g, cfg.generator_gso)?, &h)?,
            FilterKind::Neighborhood => ngf_from_distances(&dist, &h),
        };
        let b = normal_matrix(&mut rng, cfg.n, 1);
        let x = filter.dot(&b);
        let x = &x / norm(&x);
        let w = normal_matrix(&mut rng, cfg.n, 1);
        let w = &w * (cfg.noise_power.sqrt() / norm(&w));
        let y = &x + &w;
        let z = normal_matrix(&mut rng, cfg.n, cfg.input_features) * cfg.input_std;
        let init_seed = rng.random();

        for &arch in &cfg.architectures {
            let net = Network::new(spec_for(arch), &ops)?;
            let input = net.prepare(z.clone())?;
            let mut state = init_state(&net, init_seed);
            let loss = Loss::SquaredError { target: &y };
            let mut errors = Vec::with_capacity(cfg.epochs);
            let result = train_with(&net, &mut state, &input, &loss, cfg.epochs, cfg.step_size, |_, out, _, _| {
                errors.push(out.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
                Control::Continue
            });
            let diverged_at = match result {
                Ok(_) => None,
                Err(Error::Diverged { epoch, .. }) => Some(epoch),
                Err(e) => return Err(e),
            };
            fits.push(Fit {
                generator,
                arch,
                errors,
                diverged_at,
            });
        }
    }
    Ok(fits)
}

fn argmin(v: &[f64]) -> Option<(usize, f64)> {
    v.iter()
        .copied()
        .enumerate()
        .filter(|(_, e)| e.is_finite())
        .fold(None, |best, (i, e)| match best {
            Some((_, b)) if b <= e => best,
            _ => Some((i, e)),
        })
}

/// Denoising by early-stopped overfitting: each architecture is fit from a
/// random input to `y = x + w` and scored by `‖x − x̂‖² / ‖x‖²` at every epoch.
///
/// Records per realization: `error` every `trace_every` epochs, `min_error`
/// at its epoch, and `diverged` when training blew up. Aggregates over
/// realizations (tagged with the master seed): `median_error` per traced
/// epoch, `median_min_error` and `mean_min_error`.
pub fn exp_denoise(cfg: &DenoiseConfig, jobs: usize) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let per_run = run_indexed(jobs, cfg.realizations, |i| realization(cfg, i))?;
    let base = |generator: FilterKind, arch: OperatorKind| {
        params!(
            "generator" => generator.as_str(),
            "arch" => arch.as_str(),
            "taps" => cfg.taps,
            "noise_power" => cfg.noise_power,
        )
    };

    let mut records = Vec::new();
    for (i, fits) in per_run.iter().enumerate() {
        let seed = derive_seed(cfg.seed, i as u64);
        for fit in fits {
            let p = base(fit.generator, fit.arch);
            for (epoch, &e) in fit.errors.iter().enumerate() {
                if epoch % cfg.trace_every == 0 || epoch + 1 == fit.errors.len() {
                    records.push(RunRecord::new(NAME, seed, p.clone(), "error", Value::Number(e)).at_epoch(epoch));
                }
            }
            match argmin(&fit.errors) {
                Some((epoch, e)) => records.push(RunRecord::new(NAME, seed, p.clone(), "min_error", Value::Number(e)).at_epoch(epoch)),
                None => records.push(RunRecord::new(NAME, seed, p.clone(), "min_error", Value::Diverged)),
            }
            if let Some(epoch) = fit.diverged_at {
                records.push(RunRecord::new(NAME, seed, p.clone(), "diverged", Value::Diverged).at_epoch(epoch));
            }
        }
    }

    for (gi, &generator) in cfg.generators.iter().enumerate() {
        for (ai, &arch) in cfg.architectures.iter().enumerate() {
            let slot = gi * cfg.architectures.len() + ai;
            let runs: Vec<&Fit> = per_run.iter().map(|f| &f[slot]).collect();
            let p = base(generator, arch);
            let epochs = runs.iter().map(|f| f.errors.len()).max().unwrap_or(0);
            for epoch in (0..epochs).filter(|e| e % cfg.trace_every == 0 || e + 1 == epochs) {
                let at: Vec<f64> = runs.iter().filter_map(|f| f.errors.get(epoch).copied()).collect();
                let value = if at.len() == runs.len() { Value::Number(median(&at)) } else { Value::Diverged };
                records.push(RunRecord::new(NAME, cfg.seed, p.clone(), "median_error", value).at_epoch(epoch));
            }
            let mins: Vec<f64> = runs.iter().map(|f| argmin(&f.errors).map_or(f64::INFINITY, |m| m.1)).collect();
            let finite = mins.iter().all(|m| m.is_finite());
            let num = |v: f64| if v.is_finite() { Value::Number(v) } else { Value::Diverged };
            records.push(RunRecord::new(NAME, cfg.seed, p.clone(), "median_min_error", num(median(&mins))));
            records.push(RunRecord::new(
                NAME,
                cfg.seed,
                p,
                "mean_min_error",
                if finite { Value::Number(mean(&mins)) } else { Value::Diverged },
            ));
        }
    }
    Ok(records)
}
