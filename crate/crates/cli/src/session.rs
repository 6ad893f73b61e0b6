//! The single exploration session behind the HTTP API.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use archmap::cluster::ClusterTree;
use archmap::layout::{layout_view, ViewParams};
use archmap::persist::{load_distances, load_json, load_layouts, load_tree, save_json};
use archmap::search::SearchTrace;
use archmap::{DistanceMatrix, LayoutResult, MetricTable, Space};
use serde::{Deserialize, Serialize};

use crate::commands::{load_metrics, load_space, MetricSource, ServeArgs};
use crate::error::{CliError, Result};

/// Attributes the filter endpoint accepts.
pub const FILTER_ATTRIBUTES: [&str; 5] = ["accuracy", "quantile", "params", "flops", "train_time"];

/// Share of the sampled architectures in the darkest color class.
pub const TOP_SHARE: f64 = 0.01;

/// Artifact locations; unset paths default to fixed names in `dir`.
#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub dir: PathBuf,
    pub space: Option<String>,
    pub dist: Option<PathBuf>,
    pub tree: Option<PathBuf>,
    pub layout: Option<PathBuf>,
    pub traces: Option<PathBuf>,
    pub source: MetricSource,
}

impl SessionConfig {
    pub fn in_dir(dir: &Path) -> Self {
        SessionConfig {
            dir: dir.to_path_buf(),
            space: None,
            dist: None,
            tree: None,
            layout: None,
            traces: None,
            source: MetricSource::default(),
        }
    }

    pub fn from_args(args: &ServeArgs) -> Self {
        SessionConfig {
            dir: args.session_dir.clone(),
            space: args.space.clone(),
            dist: args.dist.clone(),
            tree: args.tree.clone(),
            layout: args.layout.clone(),
            traces: args.traces.clone(),
            source: args.source.clone(),
        }
    }

    fn path(&self, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.dir.join(name))
    }

    fn snapshot_path(&self) -> PathBuf {
        self.dir.join("session.json")
    }
}

/// Selection and filters, written to the session dir after each change.
#[derive(Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct Snapshot {
    pub version: u32,
    pub space_hash: String,
    pub selection: BTreeSet<u64>,
    pub filters: BTreeMap<String, [f64; 2]>,
}

pub struct Session {
    pub config: SessionConfig,
    pub space: Space,
    pub space_hash: u64,
    pub dm: DistanceMatrix,
    pub tree: ClusterTree,
    pub metrics: Option<MetricTable>,
    /// Per matrix row; NaN where unknown.
    pub accuracy: Vec<f64>,
    /// Fraction of known accuracies at or below each row's accuracy.
    pub quantile: Vec<f64>,
    /// Smallest accuracy in the top 1% of the sampled architectures.
    pub top_threshold: Option<f64>,
    pub params: ViewParams,
    pub traces: BTreeMap<String, SearchTrace>,
    views: HashMap<(usize, usize), Arc<LayoutResult>>,
    pub selection: BTreeSet<u64>,
    pub filters: BTreeMap<String, [f64; 2]>,
}

impl Session {
    pub fn open(config: SessionConfig) -> Result<Self> {
        let space_arg = match &config.space {
            Some(s) => s.clone(),
            None => config.dir.join("space.json").to_string_lossy().into_owned(),
        };
        let space = load_space(&space_arg)?;
        let space_hash = space.spec_hash();
        let (dm, key) = load_distances(&config.path(&config.dist, "distances.axdm"), None)?;
        if key.space_hash != space_hash {
            return Err(archmap::Error::StaleCache("distances belong to a different space".into()).into());
        }
        let (tree, _) = load_tree(&config.path(&config.tree, "tree.json"), &dm, Some(space_hash))?;
        let levels = load_layouts(&config.path(&config.layout, "layout.json"), Some(space_hash))?;

        let mut source = config.source.clone();
        let default_csv = config.dir.join("metrics.csv");
        if source.metrics.is_none() && source.surrogate.is_none() && default_csv.exists() {
            source.metrics = Some(default_csv);
        }
        let metrics = load_metrics(&space, &source, dm.ids())?;
        let accuracy = match &metrics {
            Some(m) => m.accuracies(dm.ids()),
            None => vec![f64::NAN; dm.len()],
        };
        let (quantile, top_threshold) = rank_accuracy(&accuracy);

        let mut traces = BTreeMap::new();
        let trace_dir = config.path(&config.traces, "traces");
        if trace_dir.is_dir() {
            for entry in std::fs::read_dir(&trace_dir)? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    // other JSON files (summaries) are skipped
                    if let Ok(t) = load_json::<SearchTrace>(&path) {
                        let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                        traces.insert(name, t);
                    }
                }
            }
        }

        let mut views = HashMap::new();
        for v in levels {
            views.insert((v.level, v.cluster), Arc::new(v));
        }
        let mut session = Session {
            params: ViewParams::default(),
            config,
            space,
            space_hash,
            dm,
            tree,
            metrics,
            accuracy,
            quantile,
            top_threshold,
            traces,
            views,
            selection: BTreeSet::new(),
            filters: BTreeMap::new(),
        };
        session.restore();
        Ok(session)
    }

    fn restore(&mut self) {
        let Ok(snap) = load_json::<Snapshot>(&self.config.snapshot_path()) else { return };
        if snap.space_hash != self.hash_hex() {
            return;
        }
        self.selection = snap.selection.into_iter().filter(|id| self.dm.index_of(*id).is_some()).collect();
        self.filters = snap.filters;
    }

    pub fn hash_hex(&self) -> String {
        format!("{:016x}", self.space_hash)
    }

    pub fn snapshot(&self) -> Result<()> {
        let snap = Snapshot {
            version: 1,
            space_hash: self.hash_hex(),
            selection: self.selection.clone(),
            filters: self.filters.clone(),
        };
        std::fs::create_dir_all(&self.config.dir)?;
        Ok(save_json(&self.config.snapshot_path(), &snap)?)
    }

    /// The view of `cluster`'s descendants at `level`, computed on first
    /// use and stabilized against the view one level up.
    pub fn view(&mut self, level: usize, cluster: usize) -> Result<Arc<LayoutResult>> {
        if let Some(v) = self.views.get(&(level, cluster)) {
            return Ok(v.clone());
        }
        let node = self.tree.node(cluster).ok_or_else(|| CliError::NotFound(format!("no cluster {cluster}")))?;
        if level > self.tree.depth() || level < node.level {
            return Err(CliError::NotFound(format!("no level {level} below cluster {cluster}")));
        }
        let prior = if level > node.level { Some(self.view(level - 1, cluster)?) } else { None };
        let known = self.metrics.as_ref().map(|_| self.accuracy.as_slice());
        let v = layout_view(
            &self.dm,
            &self.tree,
            known,
            self.space_hash,
            level,
            cluster,
            prior.as_deref(),
            &self.params,
        )?;
        let v = Arc::new(v);
        self.views.insert((level, cluster), v.clone());
        Ok(v)
    }

    pub fn attribute(&self, row: usize, name: &str) -> Option<f64> {
        let value = match name {
            "accuracy" => self.accuracy[row],
            "quantile" => self.quantile[row],
            _ => {
                let m = self.metrics.as_ref()?.get(self.dm.ids()[row])?;
                match name {
                    "params" => m.params,
                    "flops" => m.flops,
                    "train_time" => m.train_time,
                    _ => return None,
                }
            }
        };
        (!value.is_nan()).then_some(value)
    }

    /// Sampled ids passing every range in `filters`, ascending.
    pub fn survivors(&self, filters: &BTreeMap<String, [f64; 2]>) -> BTreeSet<u64> {
        (0..self.dm.len())
            .filter(|&row| {
                filters.iter().all(|(name, [lo, hi])| {
                    self.attribute(row, name).is_some_and(|v| *lo <= v && v <= *hi)
                })
            })
            .map(|row| self.dm.ids()[row])
            .collect()
    }

    pub fn is_top(&self, row: usize) -> bool {
        self.top_threshold.is_some_and(|t| self.accuracy[row] >= t)
    }
}

/// Empirical CDF value per row and the top-1% threshold.
pub fn rank_accuracy(accuracy: &[f64]) -> (Vec<f64>, Option<f64>) {
    let mut known: Vec<f64> = accuracy.iter().copied().filter(|a| !a.is_nan()).collect();
    if known.is_empty() {
        return (vec![f64::NAN; accuracy.len()], None);
    }
    known.sort_by(|a, b| a.total_cmp(b));
    let m = known.len();
    let quantile = accuracy
        .iter()
        .map(|&a| {
            if a.is_nan() {
                f64::NAN
            } else {
                known.partition_point(|&x| x <= a) as f64 / m as f64
            }
        })
        .collect();
    let top = ((m as f64 * TOP_SHARE).ceil() as usize).max(1);
    (quantile, Some(known[m - top]))
}
