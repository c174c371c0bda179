//! Configuration sweeps and detector rankings by AP and AP_crit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::criticality::{CriticalityConfig, UnitWeight};
use crate::error::{Error, Result};
use crate::metrics::{summarize, ApStyle, EvalSet, MatchedSet};
use crate::model::{Dataset, DetectionSet, DEFAULT_MAX_RANGE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigGrid {
    pub d_values: Vec<f64>,
    pub r_values: Vec<f64>,
    pub t_values: Vec<f64>,
}

impl ConfigGrid {
    pub fn new(d_values: Vec<f64>, r_values: Vec<f64>, t_values: Vec<f64>) -> Result<Self> {
        let grid = ConfigGrid {
            d_values,
            r_values,
            t_values,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, values) in [("d_values", &self.d_values), ("r_values", &self.r_values), ("t_values", &self.t_values)] {
            if values.is_empty() {
                return Err(Error::config(format!("{name} is empty")));
            }
            if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::config(format!("{name} must be positive and finite")));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config(format!("{name} must be strictly increasing")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let grid: ConfigGrid = serde_json::from_str(text)?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.d_values.len() * self.r_values.len() * self.t_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All configurations, `t` varying fastest.
    pub fn configs(&self) -> Vec<CriticalityConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &d_max in &self.d_values {
            for &r_max in &self.r_values {
                for &t_max in &self.t_values {
                    out.push(CriticalityConfig { d_max, r_max, t_max });
                }
            }
        }
        out
    }
}

/// `D_max, R_max ∈ {5, 10, …, 50}` m and `T_max ∈ {2, 4, …, 30}` s.
pub fn default_grid() -> ConfigGrid {
    let steps = |step: f64, n: usize| (1..=n).map(|i| step * i as f64).collect();
    ConfigGrid {
        d_values: steps(5.0, 10),
        r_values: steps(5.0, 10),
        t_values: steps(2.0, 15),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub detector: String,
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(rename = "l")]
    pub distance_limit: f64,
    pub d_max: f64,
    pub r_max: f64,
    pub t_max: f64,
    pub ap: f64,
    pub ap_crit: f64,
}

impl SweepRow {
    pub fn config(&self) -> CriticalityConfig {
        CriticalityConfig {
            d_max: self.d_max,
            r_max: self.r_max,
            t_max: self.t_max,
        }
    }
}

/// Rows ordered by detector name, then distance limit, then configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invariant(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?;
        Ok(SweepTable { rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        SweepTable::from_csv(&text)
    }

    pub fn detectors(&self) -> Vec<String> {
        let mut names: Vec<String> = self.rows.iter().map(|r| r.detector.clone()).collect();
        names.sort();
        names.dedup();
        names
    }

    /// Distinct `(class, l, config)` cells in first-seen order.
    pub fn cells(&self) -> Vec<(String, f64, CriticalityConfig)> {
        let mut seen = Vec::new();
        let mut index = std::collections::HashSet::new();
        for row in &self.rows {
            let key = (
                row.class_name.clone(),
                row.distance_limit.to_bits(),
                row.d_max.to_bits(),
                row.r_max.to_bits(),
                row.t_max.to_bits(),
            );
            if index.insert(key) {
                seen.push((row.class_name.clone(), row.distance_limit, row.config()));
            }
        }
        seen
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub class_name: String,
    pub distance_limits: Vec<f64>,
    pub max_range: f64,
    pub ap_style: ApStyle,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            class_name: "car".into(),
            distance_limits: crate::matching::distance_limits_default(),
            max_range: DEFAULT_MAX_RANGE,
            ap_style: ApStyle::Anchored,
            workers: None,
        }
    }
}

/// AP and AP_crit for every (detector, l, configuration).
///
/// Matching and the per-object geometry are computed once per detector and
/// distance limit; each configuration only re-scores the cached inputs. The
/// output does not depend on the number of workers.
pub fn evaluate_sweep(
    dataset: &Dataset,
    detectors: &BTreeMap<String, DetectionSet>,
    grid: &ConfigGrid,
    opts: &SweepOptions,
) -> Result<SweepTable> {
    if detectors.is_empty() {
        return Err(Error::config("sweep needs at least one detector"));
    }
    grid.validate()?;
    let names: Vec<&String> = detectors.keys().collect();
    let sets: Vec<EvalSet> = detectors
        .values()
        .map(|d| EvalSet::new(dataset, d, &opts.class_name, opts.max_range))
        .collect();
    let matched: Vec<Vec<MatchedSet>> = sets
        .iter()
        .map(|s| opts.distance_limits.iter().map(|&l| MatchedSet::new(s, l)).collect())
        .collect();

    // AP never depends on the criticality weights.
    let ap: Vec<Vec<f64>> = sets
        .iter()
        .zip(&matched)
        .map(|(set, per_l)| {
            per_l
                .iter()
                .map(|m| summarize(&m.curve_for(set, &UnitWeight), false, opts.ap_style))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let configs = grid.configs();
    let score = |cfg: &CriticalityConfig| -> Result<Vec<Vec<f64>>> {
        let gt_w = sets[0].gt_weights(cfg);
        sets.iter()
            .zip(&matched)
            .map(|(set, per_l)| {
                let det_w = set.det_weights(cfg);
                per_l
                    .iter()
                    .map(|m| summarize(&m.curve(&gt_w, &det_w), true, opts.ap_style))
                    .collect()
            })
            .collect()
    };
    let cells: Vec<Vec<Vec<f64>>> = run_parallel(&configs, opts.workers, score)?;

    let mut rows = Vec::with_capacity(names.len() * opts.distance_limits.len() * configs.len());
    for (di, name) in names.iter().enumerate() {
        for (li, &l) in opts.distance_limits.iter().enumerate() {
            for (ci, cfg) in configs.iter().enumerate() {
                rows.push(SweepRow {
                    detector: (*name).clone(),
                    class_name: opts.class_name.clone(),
                    distance_limit: l,
                    d_max: cfg.d_max,
                    r_max: cfg.r_max,
                    t_max: cfg.t_max,
                    ap: ap[di][li],
                    ap_crit: cells[ci][di][li],
                });
            }
        }
    }
    Ok(SweepTable { rows })
}

#[cfg(feature = "parallel")]
fn run_parallel<T, R, F>(items: &[T], workers: Option<usize>, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    use rayon::prelude::*;
    let run = || items.par_iter().map(&f).collect::<Result<Vec<R>>>();
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::config(format!("cannot start {n} workers: {e}")))?
            .install(run),
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<T, R, F>(items: &[T], _workers: Option<usize>, f: F) -> Result<Vec<R>>
where
    F: Fn(&T) -> Result<R>,
{
    items.iter().map(f).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ap,
    ApCrit,
}

impl Metric {
    pub fn of(self, row: &SweepRow) -> f64 {
        match self {
            Metric::Ap => row.ap,
            Metric::ApCrit => row.ap_crit,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ap" => Ok(Metric::Ap),
            "ap_crit" => Ok(Metric::ApCrit),
            other => Err(Error::config(format!("unknown metric `{other}` (expected ap or ap_crit)"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Ap => "ap",
            Metric::ApCrit => "ap_crit",
        })
    }
}

/// Detectors by descending metric; ties by ascending name.
pub fn rank(table: &SweepTable, metric: Metric, class_name: &str, distance_limit: f64, config: &CriticalityConfig) -> Vec<String> {
    let mut rows: Vec<&SweepRow> = table
        .rows
        .iter()
        .filter(|r| r.class_name == class_name && r.distance_limit == distance_limit && r.config() == *config)
        .collect();
    rows.sort_by(|a, b| {
        metric
            .of(b)
            .total_cmp(&metric.of(a))
            .then_with(|| a.detector.cmp(&b.detector))
    });
    rows.into_iter().map(|r| r.detector.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingDiff {
    pub metric_a: Metric,
    pub metric_b: Metric,
    pub order_a: Vec<String>,
    pub order_b: Vec<String>,
    /// Detectors whose position differs between the two orders.
    pub n_moved: usize,
    pub max_displacement: usize,
}

pub fn ranking_diff(metric_a: Metric, order_a: &[String], metric_b: Metric, order_b: &[String]) -> Result<RankingDiff> {
    let mut sorted_a = order_a.to_vec();
    let mut sorted_b = order_b.to_vec();
    sorted_a.sort();
    sorted_b.sort();
    if sorted_a != sorted_b {
        return Err(Error::RankingMismatch(format!("{order_a:?} vs {order_b:?}")));
    }
    let mut n_moved = 0;
    let mut max_displacement = 0;
    for (i, name) in order_a.iter().enumerate() {
        let j = order_b.iter().position(|n| n == name).expect("same element sets");
        if i != j {
            n_moved += 1;
            max_displacement = max_displacement.max(i.abs_diff(j));
        }
    }
    Ok(RankingDiff {
        metric_a,
        metric_b,
        order_a: order_a.to_vec(),
        order_b: order_b.to_vec(),
        n_moved,
        max_displacement,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRanking {
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(rename = "l")]
    pub distance_limit: f64,
    pub config: CriticalityConfig,
    pub diff: RankingDiff,
}

/// How often the AP_crit order departs from the AP order, per (class, l).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingSummary {
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(rename = "l")]
    pub distance_limit: f64,
    pub configs: usize,
    pub changed: usize,
    /// Configurations per number of moved detectors.
    pub moved_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rankings {
    pub summary: Vec<RankingSummary>,
    pub cells: Vec<CellRanking>,
}

/// AP versus AP_crit orders for every cell of the table.
pub fn compare_rankings(table: &SweepTable) -> Result<Rankings> {
    let mut cells = Vec::new();
    let mut summary: Vec<RankingSummary> = Vec::new();
    for (class_name, l, config) in table.cells() {
        let by_ap = rank(table, Metric::Ap, &class_name, l, &config);
        let by_crit = rank(table, Metric::ApCrit, &class_name, l, &config);
        let diff = ranking_diff(Metric::Ap, &by_ap, Metric::ApCrit, &by_crit)?;
        let pos = summary
            .iter()
            .position(|s| s.class_name == class_name && s.distance_limit == l)
            .unwrap_or_else(|| {
                summary.push(RankingSummary {
                    class_name: class_name.clone(),
                    distance_limit: l,
                    configs: 0,
                    changed: 0,
                    moved_histogram: BTreeMap::new(),
                });
                summary.len() - 1
            });
        let s = &mut summary[pos];
        s.configs += 1;
        s.changed += usize::from(diff.n_moved > 0);
        *s.moved_histogram.entry(diff.n_moved).or_default() += 1;
        cells.push(CellRanking {
            class_name,
            distance_limit: l,
            config,
            diff,
        });
    }
    Ok(Rankings { summary, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn row(detector: &str, ap: f64, ap_crit: f64) -> SweepRow {
        SweepRow {
            detector: detector.into(),
            class_name: "car".into(),
            distance_limit: 1.0,
            d_max: 20.0,
            r_max: 20.0,
            t_max: 8.0,
            ap,
            ap_crit,
        }
    }

    fn cfg() -> CriticalityConfig {
        CriticalityConfig::new(20.0, 20.0, 8.0).unwrap()
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 1500);
        let configs = g.configs();
        assert_eq!(configs.len(), 1500);
        assert!(configs.contains(&cfg()));
        assert_eq!(configs[0], CriticalityConfig::new(5.0, 5.0, 2.0).unwrap());
        assert_eq!(configs[1499], CriticalityConfig::new(50.0, 50.0, 30.0).unwrap());
    }

    #[test]
    fn grid_validation() {
        assert!(ConfigGrid::new(vec![], vec![1.0], vec![1.0]).is_err());
        assert!(ConfigGrid::new(vec![2.0, 1.0], vec![1.0], vec![1.0]).is_err());
        assert!(ConfigGrid::new(vec![1.0], vec![-1.0], vec![1.0]).is_err());
        assert!(ConfigGrid::from_json(r#"{"d_values":[10],"r_values":[5,10],"t_values":[4]}"#).is_ok());
    }

    #[test]
    fn rank_orders_and_breaks_ties_by_name() {
        let t = SweepTable {
            rows: vec![row("A", 0.7, 0.5), row("B", 0.9, 0.5)],
        };
        assert_eq!(rank(&t, Metric::Ap, "car", 1.0, &cfg()), names(&["B", "A"]));
        assert_eq!(rank(&t, Metric::ApCrit, "car", 1.0, &cfg()), names(&["A", "B"]));
    }

    #[test]
    fn diff_examples() {
        let abc = names(&["A", "B", "C"]);
        let d = ranking_diff(Metric::Ap, &abc, Metric::ApCrit, &abc).unwrap();
        assert_eq!((d.n_moved, d.max_displacement), (0, 0));
        let d = ranking_diff(Metric::Ap, &abc, Metric::ApCrit, &names(&["B", "A", "C"])).unwrap();
        assert_eq!((d.n_moved, d.max_displacement), (2, 1));
        assert!(ranking_diff(Metric::Ap, &abc, Metric::ApCrit, &names(&["A", "B", "D"])).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = SweepTable {
            rows: vec![row("REG1.6", 0.1 + 0.2, 1.0 / 3.0), row("a,b", 0.0, 1.0)],
        };
        let text = t.to_csv().unwrap();
        assert!(text.starts_with("detector,class,l,d_max,r_max,t_max,ap,ap_crit\n"));
        assert_eq!(SweepTable::from_csv(&text).unwrap(), t);
    }

    #[test]
    fn compare_counts_changes() {
        let t = SweepTable {
            rows: vec![row("A", 0.7, 0.9), row("B", 0.9, 0.5), row("C", 0.1, 0.1)],
        };
        let r = compare_rankings(&t).unwrap();
        assert_eq!(r.summary.len(), 1);
        assert_eq!(r.summary[0].changed, 1);
        assert_eq!(r.cells[0].diff.n_moved, 2);
    }
}
