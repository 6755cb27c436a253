//! Citation-network datasets in the LINQS plain-text layout.
//!
//! A content file holds one node per line, `id<TAB>f_1 … f_F<TAB>class`; a
//! cites file holds one citation per line, `cited<TAB>citing`. Pubmed's
//! native `.tab` files (`NODE paper:` header, `label=` and `w-…=` fields) are
//! recognized as well.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{components, graph_metrics, Graph, GraphMetrics};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// 1 where the value is positive, else 0.
    #[default]
    Binary,
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CitationDataset {
    pub graph: Graph,
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    /// Sorted; `labels` index into it.
    pub class_names: Vec<String>,
    /// Original identifier of each node.
    pub node_ids: Vec<String>,
}

/// Counts gathered while loading, for the load report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub nodes: usize,
    pub features: usize,
    pub classes: usize,
    pub edges: usize,
    pub citations_read: usize,
    pub unknown_citations_dropped: usize,
    pub self_citations_dropped: usize,
    pub duplicate_citations: usize,
    pub components: usize,
    pub largest_component_size: usize,
}

/// Train / validation / test node indices, each sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl CitationDataset {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn metrics(&self) -> Result<GraphMetrics> {
        graph_metrics(&self.graph)
    }

    /// The dataset restricted to its largest connected component (lowest
    /// component id on ties), keeping node order.
    pub fn largest_component(&self) -> Result<Self> {
        let labels = components(&self.graph);
        let mut sizes = HashMap::new();
        for &c in &labels {
            *sizes.entry(c).or_insert(0usize) += 1;
        }
        let best = sizes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&c, _)| c)
            .ok_or_else(|| Error::invalid("empty dataset"))?;
        let keep: Vec<usize> = (0..self.n()).filter(|&i| labels[i] == best).collect();
        let graph = self.graph.induced(&keep)?;
        let features = self.features.select(ndarray::Axis(0), &keep);
        Ok(Self {
            graph,
            features,
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            node_ids: keep.iter().map(|&i| self.node_ids[i].clone()).collect(),
        })
    }

    /// Content and cites text that [`parse_citation`] reads back to an
    /// identical dataset.
    pub fn to_linqs(&self) -> (String, String) {
        let mut content = String::new();
        for (i, row) in self.features.rows().into_iter().enumerate() {
            content.push_str(&self.node_ids[i]);
            for v in row {
                let _ = write!(content, "\t{v}");
            }
            let _ = writeln!(content, "\t{}", self.class_names[self.labels[i]]);
        }
        let mut cites = String::new();
        for (i, j, _) in self.graph.edges() {
            let _ = writeln!(cites, "{}\t{}", self.node_ids[i], self.node_ids[j]);
        }
        (content, cites)
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

struct RawNodes {
    ids: Vec<String>,
    rows: Vec<Vec<f64>>,
    classes: Vec<String>,
}

fn read_linqs_content<R: BufRead>(reader: R, path: &Path) -> Result<RawNodes> {
    let mut out = RawNodes {
        ids: Vec::new(),
        rows: Vec::new(),
        classes: Vec::new(),
    };
    let mut width = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(parse_err(path, lineno, "expected id, features and class separated by tabs"));
        }
        let feats = &fields[1..fields.len() - 1];
        match width {
            None => width = Some(feats.len()),
            Some(w) if w != feats.len() => {
                return Err(parse_err(path, lineno, format!("{} features, earlier lines have {w}", feats.len())))
            }
            _ => {}
        }
        let row = feats
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(path, lineno, format!("bad feature value {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        out.ids.push(fields[0].to_owned());
        out.rows.push(row);
        out.classes.push(fields[fields.len() - 1].to_owned());
    }
    Ok(out)
}

fn read_pubmed_content<R: BufRead>(reader: R, path: &Path) -> Result<RawNodes> {
    let mut lines = reader.lines().enumerate();
    lines.next();
    let (_, decl) = lines.next().ok_or_else(|| parse_err(path, 2, "missing feature declaration line"))?;
    let decl = decl?;
    // entries look like `numeric:w-rat:0.0`
    let names: Vec<String> = decl
        .split('\t')
        .filter_map(|f| f.strip_prefix("numeric:"))
        .map(|f| f.rsplit_once(':').map_or(f, |(name, _)| name).to_owned())
        .collect();
    let column: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut out = RawNodes {
        ids: Vec::new(),
        rows: Vec::new(),
        classes: Vec::new(),
    };
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().trim().to_owned();
        let mut row = vec![0.0; names.len()];
        let mut class = None;
        for field in fields {
            let Some((key, value)) = field.split_once('=') else {
                return Err(parse_err(path, lineno, format!("expected key=value, got {field:?}")));
            };
            if key == "label" {
                class = Some(value.to_owned());
            } else if key == "summary" {
                continue;
            } else {
                let col = *column
                    .get(key)
                    .ok_or_else(|| parse_err(path, lineno, format!("undeclared feature {key:?}")))?;
                row[col] = value
                    .parse()
                    .map_err(|_| parse_err(path, lineno, format!("bad feature value {value:?}")))?;
            }
        }
        let class = class.ok_or_else(|| parse_err(path, lineno, "missing label"))?;
        out.ids.push(id);
        out.rows.push(row);
        out.classes.push(class);
    }
    Ok(out)
}

fn read_citations<R: BufRead>(reader: R, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("DIRECTED") || trimmed == "NO_FEATURES" {
            continue;
        }
        let fields: Vec<&str> = trimmed
            .split(['\t', ' '])
            .filter(|f| !f.is_empty() && *f != "|")
            .map(|f| f.strip_prefix("paper:").unwrap_or(f))
            .collect();
        let pair = match fields.len() {
            2 => (fields[0], fields[1]),
            // Pubmed: edge id, cited, citing
            3 => (fields[1], fields[2]),
            _ => return Err(parse_err(path, lineno, "expected `cited<TAB>citing`")),
        };
        out.push((pair.0.to_owned(), pair.1.to_owned()));
    }
    Ok(out)
}

/// Builds a dataset from already-opened content and cites readers.
pub fn parse_citation<A: BufRead, B: BufRead>(
    mut content: A,
    cites: B,
    content_path: &Path,
    cites_path: &Path,
    mode: FeatureMode,
) -> Result<(CitationDataset, LoadReport)> {
    let pubmed = content.fill_buf()?.starts_with(b"NODE\t");
    let raw = if pubmed {
        read_pubmed_content(content, content_path)?
    } else {
        read_linqs_content(content, content_path)?
    };
    if raw.ids.is_empty() {
        return Err(parse_err(content_path, 1, "no nodes"));
    }
    let mut index = HashMap::with_capacity(raw.ids.len());
    for (i, id) in raw.ids.iter().enumerate() {
        if index.insert(id.as_str(), i).is_some() {
            return Err(Error::invalid(format!("{}: node id {id:?} appears twice", content_path.display())));
        }
    }
    let class_names: Vec<String> = raw.classes.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let labels = raw
        .classes
        .iter()
        .map(|c| class_names.binary_search(c).expect("class collected above"))
        .collect();

    let citations = read_citations(cites, cites_path)?;
    let mut pairs = BTreeSet::new();
    let (mut unknown, mut self_loops) = (0, 0);
    for (a, b) in &citations {
        match (index.get(a.as_str()), index.get(b.as_str())) {
            (Some(&i), Some(&j)) if i == j => self_loops += 1,
            (Some(&i), Some(&j)) => {
                pairs.insert((i.min(j), i.max(j)));
            }
            _ => unknown += 1,
        }
    }
    let kept = citations.len() - unknown - self_loops;
    let n = raw.ids.len();
    let graph = Graph::from_edges(n, pairs.iter().copied())?;
    let width = raw.rows[0].len();
    let features = Array2::from_shape_fn((n, width), |(i, j)| {
        let v = raw.rows[i][j];
        match mode {
            FeatureMode::Binary => f64::from(u8::from(v > 0.0)),
            FeatureMode::Raw => v,
        }
    });
    let comp = components(&graph);
    let mut sizes = HashMap::new();
    for &c in &comp {
        *sizes.entry(c).or_insert(0usize) += 1;
    }
    let report = LoadReport {
        nodes: n,
        features: width,
        classes: class_names.len(),
        edges: graph.edge_count(),
        citations_read: citations.len(),
        unknown_citations_dropped: unknown,
        self_citations_dropped: self_loops,
        duplicate_citations: kept - pairs.len(),
        components: sizes.len(),
        largest_component_size: sizes.values().copied().max().unwrap_or(0),
    };
    Ok((
        CitationDataset {
            graph,
            features,
            labels,
            class_names,
            node_ids: raw.ids,
        },
        report,
    ))
}

pub fn load_citation(content: &Path, cites: &Path, mode: FeatureMode) -> Result<(CitationDataset, LoadReport)> {
    let open = |p: &Path| -> Result<BufReader<File>> {
        File::open(p)
            .map(BufReader::new)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", p.display())))
    };
    parse_citation(open(content)?, open(cites)?, content, cites, mode)
}

/// Content and cites paths for a dataset name under `dir`, in the LINQS
/// layout (`cora/cora.content`, `citeseer/citeseer.cites`, and Pubmed's
/// `Pubmed-Diabetes/data/*.tab`).
pub fn dataset_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    match name.to_ascii_lowercase().as_str() {
        "pubmed" => {
            let base = dir.join("Pubmed-Diabetes").join("data");
            (base.join("Pubmed-Diabetes.NODE.paper.tab"), base.join("Pubmed-Diabetes.DIRECTED.cites.tab"))
        }
        other => {
            let base = dir.join(other);
            (base.join(format!("{other}.content")), base.join(format!("{other}.cites")))
        }
    }
}

/// `train_per_class` nodes of every class for training, then `val_count`
/// and `test_count` further nodes drawn uniformly from the rest.
pub fn make_split(
    labels: &[usize],
    num_classes: usize,
    train_per_class: usize,
    val_count: usize,
    test_count: usize,
    seed: u64,
) -> Result<Split> {
    let mut rng = seeded(seed);
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::invalid(format!("label {l} out of range for {num_classes} classes")));
        }
        by_class[l].push(i);
    }
    let mut train = Vec::with_capacity(train_per_class * num_classes);
    let mut rest = Vec::new();
    for (c, mut nodes) in by_class.into_iter().enumerate() {
        if nodes.len() < train_per_class {
            return Err(Error::invalid(format!(
                "class {c} has {} nodes, {train_per_class} requested for training",
                nodes.len()
            )));
        }
        nodes.shuffle(&mut rng);
        rest.extend_from_slice(&nodes[train_per_class..]);
        nodes.truncate(train_per_class);
        train.extend(nodes);
    }
    if val_count + test_count > rest.len() {
        return Err(Error::invalid(format!(
            "{val_count} validation and {test_count} test nodes requested, {} available",
            rest.len()
        )));
    }
    rest.sort_unstable();
    rest.shuffle(&mut rng);
    let mut val = rest[..val_count].to_vec();
    let mut test = rest[val_count..val_count + test_count].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const CONTENT: &str = "p1\t0\t1\t0\tAI\np2\t1\t1\t0\tML\np3\t0\t0\t1\tAI\np4\t0\t1\t1\tDB\n";
    const CITES: &str = "p1\tp2\np2\tp1\np3\tp2\np9\tp1\np4\tp4\np4\tp3\n";

    fn parse(content: &str, cites: &str) -> Result<(CitationDataset, LoadReport)> {
        parse_citation(
            Cursor::new(content),
            Cursor::new(cites),
            Path::new("x.content"),
            Path::new("x.cites"),
            FeatureMode::Binary,
        )
    }

    #[test]
    fn loads_and_reports() {
        let (ds, report) = parse(CONTENT, CITES).unwrap();
        assert_eq!(ds.n(), 4);
        assert_eq!(ds.class_names, vec!["AI", "DB", "ML"]);
        assert_eq!(ds.labels, vec![0, 2, 0, 1]);
        assert_eq!(ds.features.row(1).to_vec(), vec![1.0, 1.0, 0.0]);
        assert_eq!(ds.graph.edges().map(|(i, j, _)| (i, j)).collect::<Vec<_>>(), vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(report.unknown_citations_dropped, 1);
        assert_eq!(report.self_citations_dropped, 1);
        assert_eq!(report.duplicate_citations, 1);
        assert_eq!(report.edges, 3);
        assert_eq!(report.largest_component_size, 4);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad_width = "a\t1\t0\tX\nb\t1\tY\n";
        match parse(bad_width, "") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse("a\t1\tX\nb\tz\tY\n", "") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse(CONTENT, "p1\tp2\nonlyone\n") {
            Err(Error::Parse { line, path, .. }) => assert_eq!((line, path), (2, PathBuf::from("x.cites"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn raw_and_binary_features() {
        let content = "a\t0.5\t0\tX\nb\t0\t2.5\tY\n";
        let (bin, _) = parse(content, "").unwrap();
        assert_eq!(bin.features, ndarray::array![[1.0, 0.0], [0.0, 1.0]]);
        let (raw, _) = parse_citation(Cursor::new(content), Cursor::new(""), Path::new("c"), Path::new("d"), FeatureMode::Raw).unwrap();
        assert_eq!(raw.features, ndarray::array![[0.5, 0.0], [0.0, 2.5]]);
    }

    #[test]
    fn pubmed_layout() {
        let content = "NODE\tpaper:\tlabel=cat=1,2,3:\n\
            cat=1,2,3:label\tnumeric:w-rat:0.0\tnumeric:w-cell:0.0\tnumeric:w-insulin:0.0\n\
            101\tlabel=1\tw-rat=0.09\tw-insulin=0.2\tsummary=w-rat,w-insulin\n\
            202\tlabel=3\tw-cell=0.01\tsummary=w-cell\n";
        let cites = "DIRECTED\t\t\tcites\nNO_FEATURES\n1\tpaper:101\t|\tpaper:202\n2\tpaper:101\t|\tpaper:999\n";
        let (ds, report) = parse(content, cites).unwrap();
        assert_eq!(ds.features, ndarray::array![[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]);
        assert_eq!(ds.class_names, vec!["1", "3"]);
        assert_eq!(ds.graph.edge_count(), 1);
        assert_eq!(report.unknown_citations_dropped, 1);
    }

    #[test]
    fn round_trip() {
        let (ds, _) = parse(CONTENT, CITES).unwrap();
        let (content, cites) = ds.to_linqs();
        let (back, _) = parse(&content, &cites).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn largest_component_keeps_order() {
        let content = "a\t1\tX\nb\t0\tY\nc\t1\tX\nd\t1\tY\n";
        let (ds, _) = parse(content, "a\tb\nc\td\nd\tb\n").unwrap();
        let lcc = ds.largest_component().unwrap();
        assert_eq!(lcc.node_ids, vec!["a", "b", "c", "d"]);
        let (ds, _) = parse(content, "a\tc\nb\td\nd\tc\n").unwrap();
        assert_eq!(ds.largest_component().unwrap().n(), 4);
        let (ds, _) = parse(content, "b\td\n").unwrap();
        let lcc = ds.largest_component().unwrap();
        assert_eq!(lcc.node_ids, vec!["b", "d"]);
        assert_eq!(lcc.labels, vec![1, 1]);
        assert_eq!(lcc.graph.edge_count(), 1);
    }

    #[test]
    fn split_counts_and_disjointness() {
        let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let s = make_split(&labels, 4, 5, 30, 40, 7).unwrap();
        assert_eq!(s.train.len(), 20);
        for c in 0..4 {
            assert_eq!(s.train.iter().filter(|&&i| labels[i] == c).count(), 5);
        }
        let all: BTreeSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        assert_eq!(all.len(), 90);
        assert_eq!(make_split(&labels, 4, 5, 30, 40, 7).unwrap(), s);
        assert_ne!(make_split(&labels, 4, 5, 30, 40, 8).unwrap(), s);
        assert!(make_split(&labels, 4, 26, 0, 0, 7).is_err());
        assert!(make_split(&labels, 4, 5, 50, 40, 7).is_err());
    }
}
