use std::collections::VecDeque;
use std::path::PathBuf;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ConfigFile;
use super::{mean, median, params, run_indexed, RunRecord, Value};
use crate::datasets::{dataset_paths, load_citation, make_split, CitationDataset, FeatureMode, Split};
use crate::error::{Error, Result};
use crate::graph::{generate_sbm, perturb, Graph, GsoChoice, SbmGraph};
use crate::neural::{
    argmax_rows, init_state, loss_cross_entropy, train_with, Activation, CoeffMode, Control, GraphOperators,
    HopScaling, Loss, Network, NetworkSpec, OperatorKind, OutputHead,
};
use crate::rng::{derive_seed, seeded};

/// Environment variable naming the directory that holds citation datasets
/// when the config leaves `data_dir` empty.
pub const DATA_DIR_ENV: &str = "NGF_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Cora,
    Citeseer,
    Pubmed,
}

impl DataSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DataSource::Synthetic => "synthetic",
            DataSource::Cora => "cora",
            DataSource::Citeseer => "citeseer",
            DataSource::Pubmed => "pubmed",
        }
    }
}

/// Degree-corrected stochastic block model with bag-of-words node features.
///
/// Node `i` gets a Pareto propensity `θ_i` with tail index `degree_tail`
/// (rescaled to mean one; 0 gives every node `θ_i = 1`) and links to `j`
/// with probability `min(1, θ_i θ_j p)`, `p` being `p_in` or `p_out`. Every
/// class owns an equal slice of the vocabulary and a node draws
/// `words_per_node` distinct words, each from its own class slice with
/// probability `topic_share` and from the whole vocabulary otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSbm {
    pub n: usize,
    pub communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub degree_tail: f64,
    pub features: usize,
    pub words_per_node: usize,
    pub topic_share: f64,
}

impl Default for SyntheticSbm {
    fn default() -> Self {
        Self {
            n: 2400,
            communities: 6,
            p_in: 0.0056,
            p_out: 0.000375,
            degree_tail: 2.0,
            features: 600,
            words_per_node: 20,
            topic_share: 0.3,
        }
    }
}

impl SyntheticSbm {
    pub fn generate(&self, seed: u64) -> Result<CitationDataset> {
        let sbm = self.graph(derive_seed(seed, 0))?;
        let mut rng = seeded(derive_seed(seed, 1));
        let slice = self.features / self.communities;
        let mut features = Array2::zeros((self.n, self.features));
        for (i, &c) in sbm.communities.iter().enumerate() {
            let mut placed = 0;
            while placed < self.words_per_node {
                let w = if rng.random::<f64>() < self.topic_share {
                    c * slice + rng.random_range(0..slice)
                } else {
                    rng.random_range(0..self.features)
                };
                if features[[i, w]] == 0.0 {
                    features[[i, w]] = 1.0;
                    placed += 1;
                }
            }
        }
        Ok(CitationDataset {
            graph: sbm.graph,
            features,
            labels: sbm.communities,
            class_names: (0..self.communities).map(|c| format!("c{c}")).collect(),
            node_ids: (0..self.n).map(|i| i.to_string()).collect(),
        })
    }

    fn graph(&self, seed: u64) -> Result<SbmGraph> {
        if self.degree_tail == 0.0 {
            return generate_sbm(self.n, self.communities, self.p_in, self.p_out, seed);
        }
        let mut rng = seeded(seed);
        let theta: Vec<f64> = (0..self.n).map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / self.degree_tail)).collect();
        let mean = theta.iter().sum::<f64>() / self.n as f64;
        let size = self.n / self.communities;
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let p = if i / size == j / size { self.p_in } else { self.p_out };
                if rng.random::<f64>() < (theta[i] * theta[j] / (mean * mean) * p).min(1.0) {
                    edges.push((i, j));
                }
            }
        }
        Ok(SbmGraph {
            graph: Graph::from_edges(self.n, edges)?,
            communities: (0..self.n).map(|i| i / size).collect(),
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.degree_tail == 0.0 || self.degree_tail > 1.0) {
            return Err(Error::Config("synthetic.degree_tail must be 0 or greater than 1".into()));
        }
        if self.communities == 0 || self.n % self.communities != 0 {
            return Err(Error::Config("synthetic.n must be a positive multiple of synthetic.communities".into()));
        }
        if self.features < self.communities || self.words_per_node == 0 || self.words_per_node > self.features / 2 {
            return Err(Error::Config(
                "synthetic.features must cover every class and exceed twice synthetic.words_per_node".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.topic_share) {
            return Err(Error::Config("synthetic.topic_share must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// How the layer operators are built from the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorVariant {
    /// Shift operator scaled by its largest eigenvalue, hop matrices by
    /// the configured hop scaling.
    Normalized,
    /// Raw 0/1 adjacency and unscaled hop matrices.
    Binary,
}

impl OperatorVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            OperatorVariant::Normalized => "normalized",
            OperatorVariant::Binary => "binary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub seed: u64,
    /// Independent splits and initializations (and graphs, for synthetic data).
    pub repeats: usize,
    pub source: DataSource,
    /// Directory holding `cora/`, `citeseer/` and `Pubmed-Diabetes/`; empty
    /// means the `NGF_DATA_DIR` environment variable.
    pub data_dir: String,
    pub feature_mode: FeatureMode,
    pub largest_component: bool,
    /// Citation graphs above this size are cut to a connected subgraph of
    /// this many nodes; 0 disables the cap.
    pub max_nodes: usize,
    pub synthetic: SyntheticSbm,
    pub taps: Vec<usize>,
    pub architectures: Vec<OperatorKind>,
    pub variants: Vec<OperatorVariant>,
    pub coeff_mode: CoeffMode,
    pub hop_scaling: HopScaling,
    pub hidden: usize,
    pub activation: Activation,
    pub step_size: f64,
    pub max_epochs: usize,
    /// Training stops this many epochs after the best validation loss.
    pub patience: usize,
    pub train_per_class: usize,
    pub val_count: usize,
    pub test_count: usize,
    /// Perturbation levels for the perturbation sweep, as fractions of edges.
    pub perturbations: Vec<f64>,
    /// Part of each level spent on created edges; the rest destroys edges.
    pub create_share: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            repeats: 10,
            source: DataSource::Synthetic,
            data_dir: String::new(),
            feature_mode: FeatureMode::Binary,
            largest_component: true,
            max_nodes: 5000,
            synthetic: SyntheticSbm::default(),
            taps: vec![2, 4, 6],
            architectures: vec![OperatorKind::Classical, OperatorKind::Neighborhood],
            variants: vec![OperatorVariant::Normalized, OperatorVariant::Binary],
            coeff_mode: CoeffMode::Learnable,
            hop_scaling: HopScaling::SpectralRadius,
            hidden: 16,
            activation: Activation::Relu,
            step_size: 0.05,
            max_epochs: 1000,
            patience: 50,
            train_per_class: 20,
            val_count: 500,
            test_count: 1000,
            perturbations: vec![0.0, 0.1, 0.2, 0.3],
            create_share: 0.5,
        }
    }
}

impl ConfigFile for ClassifyConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.repeats == 0 || self.max_epochs == 0 || self.hidden == 0 {
            return bad("repeats, max_epochs and hidden must be positive");
        }
        if self.taps.is_empty() || self.taps.contains(&0) {
            return bad("taps must be a non-empty list of positive tap counts");
        }
        if self.architectures.is_empty() || self.variants.is_empty() {
            return bad("architectures and variants must not be empty");
        }
        if !(self.step_size > 0.0) {
            return bad("step_size must be positive");
        }
        if self.perturbations.is_empty() || self.perturbations.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("perturbations must be a non-empty list of fractions in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.create_share) {
            return bad("create_share must lie in [0, 1]");
        }
        if self.source == DataSource::Synthetic {
            self.synthetic.validate()?;
        }
        Ok(())
    }
}

impl ClassifyConfig {
    pub fn data_dir(&self) -> Result<PathBuf> {
        if !self.data_dir.is_empty() {
            return Ok(PathBuf::from(&self.data_dir));
        }
        std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config(format!("no data_dir configured and {DATA_DIR_ENV} is not set")))
    }

    /// The citation dataset after the component restriction and size cap, or
    /// `None` for synthetic data.
    pub fn load_dataset(&self) -> Result<Option<CitationDataset>> {
        if self.source == DataSource::Synthetic {
            return Ok(None);
        }
        let (content, cites) = dataset_paths(&self.data_dir()?, self.source.as_str());
        let (mut ds, _) = load_citation(&content, &cites, self.feature_mode)?;
        if self.largest_component {
            ds = ds.largest_component()?;
        }
        if self.max_nodes > 0 && ds.n() > self.max_nodes {
            ds = bfs_subset(&ds, self.max_nodes)?;
        }
        Ok(Some(ds))
    }
}

/// First `size` nodes in breadth-first order from the highest-degree node
/// (lowest index on ties), in their original order.
fn bfs_subset(ds: &CitationDataset, size: usize) -> Result<CitationDataset> {
    let g = &ds.graph;
    let root = (0..g.n()).max_by(|&a, &b| g.degree(a).cmp(&g.degree(b)).then(b.cmp(&a))).unwrap_or(0);
    let mut seen = vec![false; g.n()];
    let mut order = Vec::with_capacity(size);
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        if order.len() == size {
            break;
        }
        for &v in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.sort_unstable();
    Ok(CitationDataset {
        graph: g.induced(&order)?,
        features: ds.features.select(ndarray::Axis(0), &order),
        labels: order.iter().map(|&i| ds.labels[i]).collect(),
        class_names: ds.class_names.clone(),
        node_ids: order.iter().map(|&i| ds.node_ids[i].clone()).collect(),
    })
}

/// Result of one early-stopped training run.
#[derive(Debug, Clone, Copy)]
struct Fit {
    best: Option<(usize, f64, f64)>,
    diverged_at: Option<usize>,
}

fn accuracy(pred: &[usize], labels: &[usize], nodes: &[usize]) -> f64 {
    let hits = nodes.iter().filter(|&&i| pred[i] == labels[i]).count();
    hits as f64 / nodes.len() as f64
}

fn fit(
    cfg: &ClassifyConfig,
    g: &Graph,
    ds: &CitationDataset,
    split: &Split,
    variant: OperatorVariant,
    taps: usize,
    init_seed: u64,
) -> Result<Vec<Fit>> {
    let (gso, hop_scaling) = match variant {
        OperatorVariant::Normalized => (GsoChoice::NORMALIZED_ADJACENCY, cfg.hop_scaling),
        OperatorVariant::Binary => (GsoChoice::ADJACENCY, HopScaling::None),
    };
    let max_classical = if cfg.architectures.contains(&OperatorKind::Classical) { taps } else { 0 };
    let max_hops = if cfg.architectures.contains(&OperatorKind::Neighborhood) { taps } else { 0 };
    let ops = GraphOperators::new(g, gso, max_classical, max_hops, hop_scaling)?;
    let dims = vec![ds.features.ncols(), cfg.hidden, ds.class_names.len()];
    let loss = Loss::CrossEntropy {
        labels: &ds.labels,
        mask: &split.train,
    };
    let mut fits = Vec::with_capacity(cfg.architectures.len());
    for &arch in &cfg.architectures {
        let spec = NetworkSpec::uniform(dims.clone(), arch, taps, cfg.coeff_mode, cfg.activation, OutputHead::Softmax);
        let net = Network::new(spec, &ops)?;
        let input = net.prepare(ds.features.clone())?;
        let mut state = init_state(&net, init_seed);
        let mut best: Option<(usize, f64, f64)> = None;
        let result = train_with(&net, &mut state, &input, &loss, cfg.max_epochs, cfg.step_size, |epoch, out, _, _| {
            let val = loss_cross_entropy(out, &ds.labels, &split.val).unwrap_or(f64::INFINITY);
            match best {
                Some((_, b, _)) if val >= b => {}
                _ if val.is_finite() => {
                    let pred = argmax_rows(out);
                    best = Some((epoch, val, accuracy(&pred, &ds.labels, &split.test)));
                }
                _ => {}
            }
            match best {
                Some((b, _, _)) if epoch >= b + cfg.patience => Control::Stop,
                _ => Control::Continue,
            }
        });
        let diverged_at = match result {
            Ok(_) => None,
            Err(Error::Diverged { epoch, .. }) => Some(epoch),
            Err(e) => return Err(e),
        };
        fits.push(Fit { best, diverged_at });
    }
    Ok(fits)
}

/// One repeat at one perturbation level: every (variant, taps, architecture)
/// in config order.
fn run_one(cfg: &ClassifyConfig, shared: Option<&CitationDataset>, repeat: usize, level: f64) -> Result<Vec<Fit>> {
    let seed = derive_seed(cfg.seed, repeat as u64);
    let generated;
    let ds = match shared {
        Some(ds) => ds,
        None => {
            let ds = cfg.synthetic.generate(derive_seed(seed, 0))?;
            generated = if cfg.largest_component { ds.largest_component()? } else { ds };
            &generated
        }
    };
    let split = make_split(
        &ds.labels,
        ds.class_names.len(),
        cfg.train_per_class,
        cfg.val_count,
        cfg.test_count,
        derive_seed(seed, 1),
    )?;
    let init_seed = derive_seed(seed, 2);
    let g = if level > 0.0 {
        perturb(&ds.graph, level * cfg.create_share, level * (1.0 - cfg.create_share), derive_seed(seed, 3))?
    } else {
        ds.graph.clone()
    };
    let mut fits = Vec::new();
    for &variant in &cfg.variants {
        for &taps in &cfg.taps {
            fits.extend(fit(cfg, &g, ds, &split, variant, taps, init_seed)?);
        }
    }
    Ok(fits)
}

fn emit(cfg: &ClassifyConfig, name: &str, levels: Option<&[f64]>, jobs: usize) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let shared = cfg.load_dataset()?;
    let level_list = levels.unwrap_or(&[0.0]);
    let per_run = run_indexed(jobs, cfg.repeats * level_list.len(), |t| {
        run_one(cfg, shared.as_ref(), t / level_list.len(), level_list[t % level_list.len()])
    })?;
    let base = |variant: OperatorVariant, taps: usize, arch: OperatorKind, level: f64| {
        let mut p = params!(
            "source" => cfg.source.as_str(),
            "variant" => variant.as_str(),
            "taps" => taps,
            "arch" => arch.as_str(),
        );
        if levels.is_some() {
            p.extend(params!("perturbation" => level));
        }
        p
    };
    let slots: Vec<(OperatorVariant, usize, OperatorKind)> = cfg
        .variants
        .iter()
        .flat_map(|&v| cfg.taps.iter().flat_map(move |&k| cfg.architectures.iter().map(move |&a| (v, k, a))))
        .collect();

    let mut records = Vec::new();
    for (t, fits) in per_run.iter().enumerate() {
        let seed = derive_seed(cfg.seed, (t / level_list.len()) as u64);
        let level = level_list[t % level_list.len()];
        for (&(variant, taps, arch), fit) in slots.iter().zip(fits) {
            let p = base(variant, taps, arch, level);
            match fit.best {
                Some((epoch, val, acc)) => {
                    records.push(RunRecord::new(name, seed, p.clone(), "test_accuracy", Value::Number(acc)).at_epoch(epoch));
                    records.push(RunRecord::new(name, seed, p.clone(), "val_loss", Value::Number(val)).at_epoch(epoch));
                }
                None => {
                    records.push(RunRecord::new(name, seed, p.clone(), "test_accuracy", Value::Diverged));
                    records.push(RunRecord::new(name, seed, p.clone(), "val_loss", Value::Diverged));
                }
            }
            if let Some(epoch) = fit.diverged_at {
                records.push(RunRecord::new(name, seed, p, "diverged", Value::Diverged).at_epoch(epoch));
            }
        }
    }

    for (li, &level) in level_list.iter().enumerate() {
        for (si, &(variant, taps, arch)) in slots.iter().enumerate() {
            let accs: Vec<Option<f64>> = (0..cfg.repeats)
                .map(|r| per_run[r * level_list.len() + li][si].best.map(|b| b.2))
                .collect();
            let p = base(variant, taps, arch, level);
            let (m, avg) = match accs.iter().copied().collect::<Option<Vec<f64>>>() {
                Some(a) => (Value::Number(median(&a)), Value::Number(mean(&a))),
                None => (Value::Diverged, Value::Diverged),
            };
            records.push(RunRecord::new(name, cfg.seed, p.clone(), "median_test_accuracy", m));
            records.push(RunRecord::new(name, cfg.seed, p, "mean_test_accuracy", avg));
        }
    }
    Ok(records)
}

/// Node classification with two-layer softmax networks, early-stopped on the
/// validation loss.
///
/// Records per repeat and (variant, taps, arch): `test_accuracy` and
/// `val_loss` at the best validation epoch, plus `diverged` when training
/// blew up. Aggregates tagged with the master seed: `median_test_accuracy`
/// and `mean_test_accuracy`.
pub fn exp_classify(cfg: &ClassifyConfig, jobs: usize) -> Result<Vec<RunRecord>> {
    emit(cfg, "classify", None, jobs)
}

/// [`exp_classify`] on graphs perturbed at each level of `perturbations`:
/// `level · create_share` of the edge count is added and the rest of the
/// level removed. Splits and initializations do not depend on the level.
pub fn exp_perturb_classify(cfg: &ClassifyConfig, jobs: usize) -> Result<Vec<RunRecord>> {
    emit(cfg, "perturb_classify", Some(&cfg.perturbations), jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ClassifyConfig {
        ClassifyConfig {
            repeats: 2,
            synthetic: SyntheticSbm {
                n: 180,
                communities: 3,
                p_in: 0.1,
                p_out: 0.005,
                degree_tail: 0.0,
                features: 60,
                words_per_node: 6,
                topic_share: 0.5,
            },
            taps: vec![2, 3],
            train_per_class: 5,
            val_count: 30,
            test_count: 60,
            max_epochs: 60,
            step_size: 0.2,
            perturbations: vec![0.0, 0.2],
            ..Default::default()
        }
    }

    fn accuracies<'a>(recs: &'a [RunRecord], variant: &str, taps: &str, arch: &str) -> Vec<&'a RunRecord> {
        recs.iter()
            .filter(|r| {
                r.metric == "test_accuracy"
                    && r.param("variant") == Some(variant)
                    && r.param("taps") == Some(taps)
                    && r.param("arch") == Some(arch)
                    && r.param("perturbation").is_none_or(|p| p == "0")
            })
            .collect()
    }

    #[test]
    fn synthetic_classes_are_learnable() {
        let recs = exp_classify(&small(), 1).unwrap();
        for r in recs.iter().filter(|r| r.metric == "median_test_accuracy") {
            let acc = r.number().unwrap();
            assert!(acc > 1.0 / 3.0 + 0.1, "{:?}: {acc}", r.params);
            if r.param("variant") == Some("normalized") {
                assert!(acc > 0.9, "{:?}: {acc}", r.params);
            }
        }
    }

    #[test]
    fn binary_two_tap_architectures_agree() {
        let recs = exp_classify(&small(), 1).unwrap();
        let c = accuracies(&recs, "binary", "2", "classical");
        let n = accuracies(&recs, "binary", "2", "neighborhood");
        assert_eq!(c.len(), 2);
        for (a, b) in c.iter().zip(&n) {
            assert_eq!(a.value, b.value);
            assert_eq!(a.epoch, b.epoch);
        }
    }

    #[test]
    fn unperturbed_level_reproduces_plain_runs() {
        let cfg = small();
        let plain = exp_classify(&cfg, 1).unwrap();
        let swept = exp_perturb_classify(&cfg, 1).unwrap();
        for variant in ["normalized", "binary"] {
            for arch in ["classical", "neighborhood"] {
                let a = accuracies(&plain, variant, "3", arch);
                let b = accuracies(&swept, variant, "3", arch);
                assert_eq!(a.len(), b.len());
                assert!(a.iter().zip(&b).all(|(x, y)| x.value == y.value && x.seed == y.seed));
            }
        }
    }

    #[test]
    fn jobs_do_not_change_output() {
        let cfg = small();
        assert_eq!(exp_perturb_classify(&cfg, 1).unwrap(), exp_perturb_classify(&cfg, 3).unwrap());
    }

    #[test]
    fn validation_rejects_bad_values() {
        for cfg in [
            ClassifyConfig { taps: vec![], ..small() },
            ClassifyConfig { taps: vec![0, 2], ..small() },
            ClassifyConfig { step_size: 0.0, ..small() },
            ClassifyConfig { perturbations: vec![1.5], ..small() },
            ClassifyConfig { create_share: -0.1, ..small() },
            ClassifyConfig { variants: vec![], ..small() },
        ] {
            assert!(matches!(exp_classify(&cfg, 1), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn bfs_subset_is_connected_and_sized() {
        let ds = small().synthetic.generate(4).unwrap().largest_component().unwrap();
        let sub = bfs_subset(&ds, 50).unwrap();
        assert_eq!(sub.n(), 50);
        assert!(sub.graph.is_connected());
        assert_eq!(sub.features.nrows(), 50);
    }
}
