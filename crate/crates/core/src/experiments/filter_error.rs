use serde::{Deserialize, Serialize};

use super::config::ConfigFile;
use super::{mean, median, params, run_indexed, RunRecord, Value};
use crate::error::{Error, Result};
use crate::filters::{ngf_from_distances, normalized_error_dense, polynomial, random_coeffs, FilterKind};
use crate::graph::{
    bfs_distances, generate_er, generate_small_world, gso, perturb, perturb_connected, resample_connected, Graph,
    GsoChoice,
};
use crate::rng::derive_seed;

const NAME: &str = "filter_error";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFamily {
    Er,
    SmallWorld,
}

impl GraphFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphFamily::Er => "er",
            GraphFamily::SmallWorld => "small_world",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterErrorConfig {
    pub seed: u64,
    pub realizations: usize,
    pub graphs: Vec<GraphFamily>,
    pub n: usize,
    pub er_p: f64,
    pub k_ring: usize,
    pub beta: f64,
    pub taps: Vec<usize>,
    pub create_pct: f64,
    pub destroy_pct: f64,
    /// Redraw the graph and its perturbation until both are connected.
    pub connected: bool,
    pub max_attempts: usize,
    pub gso: GsoChoice,
}

impl Default for FilterErrorConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            realizations: 100,
            graphs: vec![GraphFamily::Er, GraphFamily::SmallWorld],
            n: 64,
            er_p: 0.15,
            k_ring: 4,
            beta: 0.15,
            taps: vec![2, 4, 6, 8],
            create_pct: 0.0,
            destroy_pct: 0.1,
            connected: true,
            max_attempts: 1000,
            gso: GsoChoice::ADJACENCY,
        }
    }
}

impl ConfigFile for FilterErrorConfig {
    fn validate(&self) -> Result<()> {
        if self.realizations == 0 || self.graphs.is_empty() || self.taps.is_empty() {
            return Err(Error::Config("realizations, graphs and taps must be non-empty".into()));
        }
        if self.taps.contains(&0) {
            return Err(Error::Config("every entry of taps must be at least 1".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be positive".into()));
        }
        Ok(())
    }
}

/// Normalized errors for each entry of `cfg.taps`, classical then neighborhood.
type Errors = Vec<(Option<f64>, f64)>;

fn draw_graph(cfg: &FilterErrorConfig, family: GraphFamily, seed: u64) -> Result<Graph> {
    let sample = |s| match family {
        GraphFamily::Er => generate_er(cfg.n, cfg.er_p, s),
        GraphFamily::SmallWorld => generate_small_world(cfg.n, cfg.k_ring, cfg.beta, s),
    };
    if cfg.connected {
        resample_connected(seed, cfg.max_attempts, sample)
    } else {
        sample(seed)
    }
}

fn realization(cfg: &FilterErrorConfig, family: GraphFamily, seed: u64) -> Result<Errors> {
    let g = draw_graph(cfg, family, derive_seed(seed, 0))?;
    let pseed = derive_seed(seed, 1);
    let gp = if cfg.connected {
        perturb_connected(&g, cfg.create_pct, cfg.destroy_pct, pseed, cfg.max_attempts)?
    } else {
        perturb(&g, cfg.create_pct, cfg.destroy_pct, pseed)?
    };
    let (s, sp) = (gso(&g, cfg.gso)?, gso(&gp, cfg.gso)?);
    let (d, dp) = (bfs_distances(&g), bfs_distances(&gp));
    cfg.taps
        .iter()
        .map(|&k| {
            let h = random_coeffs(k, derive_seed(seed, 2 + k as u64))?;
            let classical = match (polynomial(&s, &h), polynomial(&sp, &h)) {
                (Ok(a), Ok(b)) => Some(normalized_error_dense(&a, &b)?),
                (Err(Error::FilterOverflow { .. }), _) | (_, Err(Error::FilterOverflow { .. })) => None,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            let ngf = normalized_error_dense(&ngf_from_distances(&d, &h), &ngf_from_distances(&dp, &h))?;
            Ok((classical, ngf))
        })
        .collect()
}

/// Error between filters on a graph and on its perturbation, for both filter
/// kinds and every tap count, with shared random coefficients per tap count.
///
/// Records `error` per realization (`diverged` on classical overflow) and
/// `median_error` / `mean_error` per (graph, filter, taps) over the finite runs.
pub fn exp_filter_error(cfg: &FilterErrorConfig, jobs: usize) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let r = cfg.realizations;
    let tasks = cfg.graphs.len() * r;
    let seed_of = |t: usize| derive_seed(derive_seed(cfg.seed, (t / r) as u64), (t % r) as u64);
    let results = run_indexed(jobs, tasks, |t| realization(cfg, cfg.graphs[t / r], seed_of(t)))?;

    let p = |family: GraphFamily, kind: FilterKind, k: usize| {
        params!(
            "graph" => family.as_str(),
            "filter" => kind.as_str(),
            "taps" => k,
            "create_pct" => cfg.create_pct,
            "destroy_pct" => cfg.destroy_pct,
        )
    };
    let num = |v: Option<f64>| v.map_or(Value::Diverged, Value::Number);
    let mut records = Vec::new();
    for (t, errs) in results.iter().enumerate() {
        let family = cfg.graphs[t / r];
        for (&k, &(classical, ngf)) in cfg.taps.iter().zip(errs) {
            records.push(RunRecord::new(NAME, seed_of(t), p(family, FilterKind::Classical, k), "error", num(classical)));
            records.push(RunRecord::new(NAME, seed_of(t), p(family, FilterKind::Neighborhood, k), "error", Value::Number(ngf)));
        }
    }
    for (fi, &family) in cfg.graphs.iter().enumerate() {
        let runs = &results[fi * r..(fi + 1) * r];
        for kind in [FilterKind::Classical, FilterKind::Neighborhood] {
            for (ki, &k) in cfg.taps.iter().enumerate() {
                let vals: Vec<f64> = runs
                    .iter()
                    .filter_map(|e| match kind {
                        FilterKind::Classical => e[ki].0,
                        FilterKind::Neighborhood => Some(e[ki].1),
                    })
                    .collect();
                let agg = |v: f64| if vals.is_empty() { Value::Diverged } else { Value::Number(v) };
                records.push(RunRecord::new(NAME, cfg.seed, p(family, kind, k), "median_error", agg(median(&vals))));
                records.push(RunRecord::new(NAME, cfg.seed, p(family, kind, k), "mean_error", agg(mean(&vals))));
            }
        }
    }
    Ok(records)
}
