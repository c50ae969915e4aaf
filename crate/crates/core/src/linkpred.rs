//! Unsupervised link prediction: per fold, build the coding tree of the
//! training graph, score held-out and sampled pairs by similarity, and rank.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codingtree::CodingTree;
use crate::error::{Error, Result};
use crate::flow::{visit_rates, FlowConfig};
use crate::graph::{kfold_split, Graph, NodeId};
use crate::optimizer::optimize_two_level;
use crate::rng::{derive_seed, stream_rng};

/// Area under the ROC curve via the Mann-Whitney statistic; tied scores
/// share their average rank, so each tied (pos, neg) pair counts one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_scores(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput("AUC needs both positive and negative instances".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1
        let avg = (i + j + 2) as f64 / 2.0;
        pos_rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Mean precision at the rank of each positive, ranking by descending score
/// with ties kept in input order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_scores(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::InvalidInput("average precision needs a positive instance".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        if labels[k] {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / n_pos as f64)
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("scores contain NaN".into()));
    }
    Ok(())
}

/// Which coding tree the similarities come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Best two-level partition found by the optimizer.
    #[serde(rename = "mapsim")]
    MapSim,
    /// Every node in a single module.
    #[serde(rename = "mapsim_one_module", alias = "mapsim1")]
    MapSimOneModule,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mapsim" => Ok(Self::MapSim),
            "mapsim1" | "mapsim_one_module" => Ok(Self::MapSimOneModule),
            other => Err(Error::InvalidInput(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub folds: usize,
    pub seed: u64,
    pub trials: usize,
    pub method: Method,
    pub teleport_probability: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let flow = FlowConfig::default();
        Self {
            folds: 5,
            seed: 0,
            trials: 100,
            method: Method::MapSim,
            teleport_probability: flow.teleport_probability,
            tolerance: flow.tolerance,
            max_iterations: flow.max_iterations,
        }
    }
}

impl EvalConfig {
    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            teleport_probability: self.teleport_probability,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.trials < 1 {
            return Err(Error::InvalidInput("at least one trial is required".into()));
        }
        self.flow_config().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub auc: f64,
    pub aupr: f64,
    pub codelength: f64,
    pub modules: usize,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Wall-clock seconds per phase, summed over folds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub split: f64,
    pub flow: f64,
    pub partition: f64,
    pub score: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub folds: Vec<FoldReport>,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub aupr_mean: f64,
    pub aupr_std: f64,
    pub timing: Timing,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// What a scorer sees of one fold.
pub struct FoldContext<'a> {
    pub fold: usize,
    pub train: &'a Graph,
    pub tree: &'a CodingTree,
}

/// Runs the cross-validated evaluation, scoring pairs by similarity.
pub fn evaluate(g: &Graph, cfg: &EvalConfig) -> Result<EvalReport> {
    evaluate_with(g, cfg, |ctx, u, v| ctx.tree.mapsim(u, v))
}

/// Same protocol with a custom pair scorer; higher scores mean more likely
/// links.
pub fn evaluate_with<F>(g: &Graph, cfg: &EvalConfig, scorer: F) -> Result<EvalReport>
where
    F: Fn(&FoldContext<'_>, NodeId, NodeId) -> Result<f64> + Sync,
{
    cfg.validate()?;
    if g.edge_count() < 2 * cfg.folds {
        return Err(Error::InvalidInput(format!(
            "{} folds need at least {} edges, got {}",
            cfg.folds,
            2 * cfg.folds,
            g.edge_count()
        )));
    }
    let start = Instant::now();
    let splits = kfold_split(g, cfg.folds, cfg.seed)?;
    let split_time = start.elapsed().as_secs_f64();
    let flow_cfg = cfg.flow_config();

    let outcomes: Vec<Result<FoldOutcome>> = splits
        .par_iter()
        .map(|split| {
            if split.test_positive.is_empty() {
                return Ok(FoldOutcome::Skipped(format!(
                    "fold {}: no held-out link has both endpoints in the training component",
                    split.fold_index
                )));
            }
            let fold_seed = derive_seed(cfg.seed, split.fold_index as u64);
            let t = Instant::now();
            let flow = visit_rates(&split.train, &flow_cfg)?;
            let flow_time = t.elapsed().as_secs_f64();

            let t = Instant::now();
            let (tree, codelength, modules) = match cfg.method {
                Method::MapSim => {
                    let best = optimize_two_level(&flow, derive_seed(fold_seed, 2), cfg.trials)?;
                    (CodingTree::build(&flow, &best.partition)?, best.codelength, best.module_count)
                }
                Method::MapSimOneModule => {
                    let tree = CodingTree::one_module(&flow)?;
                    let l = tree.codelength();
                    (tree, l, 1)
                }
            };
            let partition_time = t.elapsed().as_secs_f64();

            let t = Instant::now();
            let mut instances: Vec<(NodeId, NodeId, bool)> = Vec::new();
            for &(u, v) in &split.test_positive {
                instances.push((u, v, true));
                if !g.is_directed() {
                    instances.push((v, u, true));
                }
            }
            instances.extend(split.test_negative.iter().map(|&(u, v)| (u, v, false)));
            // the instance order breaks ties in average precision
            instances.shuffle(&mut stream_rng(fold_seed, 1));
            let ctx = FoldContext { fold: split.fold_index, train: &split.train, tree: &tree };
            let scores = instances
                .par_iter()
                .map(|&(u, v, _)| scorer(&ctx, u, v))
                .collect::<Result<Vec<f64>>>()?;
            let labels: Vec<bool> = instances.iter().map(|&(_, _, l)| l).collect();
            let auc = roc_auc(&scores, &labels)?;
            let aupr = average_precision(&scores, &labels)?;
            let score_time = t.elapsed().as_secs_f64();

            let n_pos = labels.iter().filter(|&&l| l).count();
            Ok(FoldOutcome::Done(
                FoldReport {
                    fold: split.fold_index,
                    auc,
                    aupr,
                    codelength,
                    modules,
                    n_pos,
                    n_neg: labels.len() - n_pos,
                },
                [flow_time, partition_time, score_time],
            ))
        })
        .collect();

    let mut folds = Vec::new();
    let mut warnings = Vec::new();
    let mut timing = Timing { split: split_time, ..Timing::default() };
    for outcome in outcomes {
        match outcome? {
            FoldOutcome::Done(report, [f, p, s]) => {
                timing.flow += f;
                timing.partition += p;
                timing.score += s;
                folds.push(report);
            }
            FoldOutcome::Skipped(w) => warnings.push(w),
        }
    }
    if folds.is_empty() {
        return Err(Error::InvalidInput("every fold was skipped".into()));
    }
    let aucs: Vec<f64> = folds.iter().map(|f| f.auc).collect();
    let auprs: Vec<f64> = folds.iter().map(|f| f.aupr).collect();
    let (auc_mean, auc_std) = mean_std(&aucs);
    let (aupr_mean, aupr_std) = mean_std(&auprs);
    timing.total = start.elapsed().as_secs_f64();
    Ok(EvalReport { config: *cfg, folds, auc_mean, auc_std, aupr_mean, aupr_std, timing, warnings })
}

enum FoldOutcome {
    Done(FoldReport, [f64; 3]),
    Skipped(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_crossed_k_regular;

    fn split(pos: &[f64], neg: &[f64]) -> (Vec<f64>, Vec<bool>) {
        let scores = pos.iter().chain(neg).copied().collect();
        let labels = pos.iter().map(|_| true).chain(neg.iter().map(|_| false)).collect();
        (scores, labels)
    }

    #[test]
    fn auc_examples() {
        let (s, l) = split(&[0.9, 0.8], &[0.7, 0.1]);
        assert_eq!(roc_auc(&s, &l).unwrap(), 1.0);
        let (s, l) = split(&[0.9, 0.2], &[0.5, 0.1]);
        assert_eq!(roc_auc(&s, &l).unwrap(), 0.75);
        let (s, l) = split(&[0.3, 0.3], &[0.3, 0.3, 0.3]);
        assert_eq!(roc_auc(&s, &l).unwrap(), 0.5);
        let (s, l) = split(&[f64::INFINITY, 1.0], &[f64::INFINITY, 0.0]);
        assert_eq!(roc_auc(&s, &l).unwrap(), 0.625);
        let (s, l) = split(&[0.5], &[]);
        assert!(roc_auc(&s, &l).is_err());
        assert!(roc_auc(&[f64::NAN, 1.0], &[true, false]).is_err());
    }

    /// Counts concordant pairs directly.
    fn auc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    num += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_matches_pair_count_and_is_monotone_invariant() {
        let scores: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 / 10.0).collect();
        let labels: Vec<bool> = (0..40).map(|i| (i * 7) % 3 == 0).collect();
        let a = roc_auc(&scores, &labels).unwrap();
        assert!((a - auc_pairs(&scores, &labels)).abs() < 1e-12);
        let bits: Vec<f64> = scores.iter().map(|&s| -(-(s + 0.01f64).log2())).collect();
        assert!((roc_auc(&bits, &labels).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn ap_examples() {
        let ap = average_precision(&[4.0, 3.0, 2.0, 1.0], &[true, false, true, false]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&[3.0, 2.0, 1.0], &[true, true, false]).unwrap(), 1.0);
        let ap = average_precision(&[5.0, 4.0, 3.0, 2.0, 1.0], &[false, false, false, false, true]).unwrap();
        assert!((ap - 0.2).abs() < 1e-15);
        // ties keep input order
        assert_eq!(average_precision(&[1.0, 1.0], &[true, false]).unwrap(), 1.0);
        assert_eq!(average_precision(&[1.0, 1.0], &[false, true]).unwrap(), 0.5);
        assert!(average_precision(&[1.0], &[false]).is_err());
    }

    #[test]
    fn mean_std_sample() {
        assert_eq!(mean_std(&[1.0]), (1.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn method_names() {
        assert_eq!("mapsim1".parse::<Method>().unwrap(), Method::MapSimOneModule);
        assert_eq!("mapsim".parse::<Method>().unwrap(), Method::MapSim);
        assert!("foo".parse::<Method>().is_err());
        assert_eq!(serde_json::to_string(&Method::MapSimOneModule).unwrap(), "\"mapsim_one_module\"");
    }

    #[test]
    fn planted_graph_report() {
        let g = generate_crossed_k_regular(40, 4, 3).unwrap();
        let cfg = EvalConfig { trials: 5, seed: 11, ..Default::default() };
        let report = evaluate(&g, &cfg).unwrap();
        assert_eq!(report.folds.len(), 5);
        for f in &report.folds {
            assert_eq!(f.n_pos, f.n_neg);
            assert_eq!(f.n_pos % 2, 0);
            assert!((0.0..=1.0).contains(&f.auc) && (0.0..=1.0).contains(&f.aupr));
        }
        let (m, s) = mean_std(&report.folds.iter().map(|f| f.auc).collect::<Vec<_>>());
        assert_eq!((m, s), (report.auc_mean, report.auc_std));
        let again = evaluate(&g, &cfg).unwrap();
        assert_eq!(report.folds, again.folds);

        let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys.len(), 7, "{keys:?}");
        for k in ["config", "folds", "auc_mean", "auc_std", "aupr_mean", "aupr_std", "timing"] {
            assert!(json.get(k).is_some(), "{k}");
        }
        let fold_keys: Vec<&str> = json["folds"][0].as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(fold_keys.len(), 7);
    }

    #[test]
    fn rejects_bad_config() {
        let g = generate_crossed_k_regular(20, 4, 1).unwrap();
        let cfg = EvalConfig { folds: 1, ..Default::default() };
        assert!(evaluate(&g, &cfg).is_err());
        let cfg = EvalConfig { trials: 0, ..Default::default() };
        assert!(evaluate(&g, &cfg).is_err());
    }
}
