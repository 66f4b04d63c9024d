//! Evaluation protocols: leave-one-out cross-validation, the ablation study
//! and the model-size sweep.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::jobs::parallel_map;
use super::metrics::compute_rmse;
use super::report::{config_hash, median, EvalEntry, EvalReport};
use crate::data::Recording;
use crate::error::{Error, Result};
use crate::filters::{run_filter, tune_filter, FilterParams, Variant};
use crate::nn::{predict, train, Arch, History, LossKind, NetConfig, Network, TrainConfig};

/// Default tuning grid for the baseline filter.
pub fn default_filter_grid() -> Vec<FilterParams> {
    FilterParams::grid(FilterParams::default(), &[0.25, 0.5, 1.0, 2.0, 4.0, 8.0], &[0.0, 0.01, 0.05, 0.1, 0.3])
}

/// Filter methods evaluated alongside the network.
fn filter_entries(recs: &[Recording], tuned: FilterParams) -> Result<EvalReport> {
    let mut report = EvalReport::new();
    for variant in [Variant::Baseline(tuned), Variant::Strapdown] {
        let hash = config_hash(&variant);
        for r in recs {
            let t = Instant::now();
            let est = run_filter(r, &variant, None)?;
            report.push(EvalEntry {
                method: variant.id().to_string(),
                recording: r.name.clone(),
                label: r.label,
                rmse_deg: compute_rmse(&r.q_ref, &est, 0)?,
                config_hash: hash.clone(),
                runtime_s: t.elapsed().as_secs_f64(),
                param_count: None,
            })?;
        }
    }
    Ok(report)
}

/// One trained model evaluated on its held-out recordings.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub network: Network,
    pub history: History,
    pub val_rmse: Vec<(String, f64)>,
    pub runtime_s: f64,
}

/// Trains on `train_recs`, checks data lineage and evaluates on `val_recs`.
pub fn train_and_evaluate(
    train_recs: &[Recording],
    val_recs: &[Recording],
    net_cfg: &NetConfig,
    train_cfg: &TrainConfig,
) -> Result<FoldResult> {
    let t = Instant::now();
    let (network, history) = train(train_recs, val_recs, net_cfg, train_cfg)?;
    if let Some(v) = val_recs.iter().find(|v| history.train_sources.contains(&v.name)) {
        return Err(Error::Domain(format!("validation recording {} leaked into training", v.name)));
    }
    let mut val_rmse = Vec::new();
    for r in val_recs {
        let est = predict(&network, r)?;
        val_rmse.push((r.name.clone(), compute_rmse(&r.q_ref, &est, 0)?));
    }
    Ok(FoldResult {
        network,
        history,
        val_rmse,
        runtime_s: t.elapsed().as_secs_f64(),
    })
}

fn nn_method(cfg: &NetConfig) -> String {
    format!("nn_{}", cfg.arch.as_str())
}

#[derive(Debug, Clone)]
pub struct LoocvResult {
    pub report: EvalReport,
    pub tuned_filter: FilterParams,
    pub folds: Vec<FoldResult>,
}

/// Leave-one-out cross-validation: every recording is held out once and a
/// fresh network is trained on the others. The baseline filter is tuned once
/// on the entire set.
pub fn run_loocv(
    recs: &[Recording],
    net_cfg: &NetConfig,
    train_cfg: &TrainConfig,
    filter_grid: &[FilterParams],
    jobs: usize,
) -> Result<LoocvResult> {
    if recs.len() < 2 {
        return Err(Error::Config("cross-validation needs at least 2 recordings".into()));
    }
    let tuned = tune_filter(recs, filter_grid)?;
    let folds = parallel_map(jobs, (0..recs.len()).collect(), |i| {
        let train_recs: Vec<Recording> = recs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, r)| r.clone()).collect();
        train_and_evaluate(&train_recs, std::slice::from_ref(&recs[i]), net_cfg, train_cfg).map_err(|e| Error::Fold {
            fold: i,
            recording: recs[i].name.clone(),
            source: Box::new(e),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut report = EvalReport::new();
    let hash = config_hash(&(net_cfg, train_cfg));
    for (i, f) in folds.iter().enumerate() {
        report.push(EvalEntry {
            method: nn_method(net_cfg),
            recording: recs[i].name.clone(),
            label: recs[i].label,
            rmse_deg: f.val_rmse[0].1,
            config_hash: hash.clone(),
            runtime_s: f.runtime_s,
            param_count: Some(f.history.param_count),
        })?;
    }
    report.extend(filter_entries(recs, tuned)?)?;
    Ok(LoocvResult {
        report,
        tuned_filter: tuned,
        folds,
    })
}

/// Indices of training and validation recordings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

impl Split {
    pub fn pick(&self, recs: &[Recording]) -> (Vec<Recording>, Vec<Recording>) {
        let get = |ix: &[usize]| ix.iter().map(|&i| recs[i].clone()).collect::<Vec<_>>();
        (get(&self.train), get(&self.val))
    }
}

/// Validation set of the recordings with the maximum, median and minimum
/// prior error; everything else trains. For an even count the upper median is
/// taken. Ties resolve to the lower index.
pub fn split_by_prior_error(prior: &[f64]) -> Result<Split> {
    if prior.len() < 4 {
        return Err(Error::Config("a max/median/min split needs at least 4 recordings".into()));
    }
    let mut order: Vec<usize> = (0..prior.len()).collect();
    order.sort_by(|&a, &b| prior[a].total_cmp(&prior[b]).then(a.cmp(&b)));
    let n = order.len();
    let mut val = vec![order[n - 1], order[n / 2], order[0]];
    val.dedup();
    let train = (0..n).filter(|i| !val.contains(i)).collect();
    Ok(Split { train, val })
}

/// Split from the error of the baseline filter tuned on the entire set.
pub fn default_split(recs: &[Recording], filter_grid: &[FilterParams]) -> Result<Split> {
    let tuned = tune_filter(recs, filter_grid)?;
    let prior = recs
        .iter()
        .map(|r| compute_rmse(&r.q_ref, &run_filter(r, &Variant::Baseline(tuned), None)?, 0))
        .collect::<Result<Vec<_>>>()?;
    split_by_prior_error(&prior)
}

/// Cumulative ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationVariant {
    /// Elementwise MSE loss, no augmentation, ungrouped input.
    Bm,
    /// + attitude loss.
    BmLo,
    /// + rotational augmentation.
    BmLoDa,
    /// + grouped input.
    BmLoDaGi,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 4] = [Self::Bm, Self::BmLo, Self::BmLoDa, Self::BmLoDaGi];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bm => "BM",
            Self::BmLo => "BM+LO",
            Self::BmLoDa => "BM+LO+DA",
            Self::BmLoDaGi => "BM+LO+DA+GI",
        }
    }

    /// Applies the variant to base configurations. The base's dropout rates
    /// stay in force until augmentation takes over as the regularizer.
    pub fn configure(self, net: &NetConfig, tr: &TrainConfig) -> (NetConfig, TrainConfig) {
        let mut n = net.clone();
        let mut t = tr.clone();
        n.grouped_input = self == Self::BmLoDaGi;
        t.loss = if self == Self::Bm { LossKind::MseElementwise } else { LossKind::LinearAttSmoothL1 };
        t.augment = matches!(self, Self::BmLoDa | Self::BmLoDaGi);
        if t.augment {
            n.weight_dropout = 0.0;
            n.activation_dropout = 0.0;
        }
        (n, t)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub arch: Arch,
    pub variant: AblationVariant,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub param_count: usize,
    pub val_rmse: Vec<(String, f64)>,
    pub median_rmse: f64,
}

#[derive(Debug, Clone)]
pub struct AblationResult {
    pub rows: Vec<AblationRow>,
    pub report: EvalReport,
}

/// Trains every (architecture, variant) combination on the split and
/// evaluates it on the validation recordings.
pub fn run_ablation(
    recs: &[Recording],
    split: &Split,
    bases: &[(NetConfig, TrainConfig)],
    jobs: usize,
) -> Result<AblationResult> {
    let (train_recs, val_recs) = split.pick(recs);
    let mut todo = Vec::new();
    for (net, tr) in bases {
        for v in AblationVariant::ALL {
            let (n, t) = v.configure(net, tr);
            todo.push((v, n, t));
        }
    }
    let results = parallel_map(jobs, todo, |(v, n, t)| {
        train_and_evaluate(&train_recs, &val_recs, &n, &t).map(|f| (v, n, t, f))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut report = EvalReport::new();
    for (v, n, t, f) in results {
        let method = format!("{}:{}", n.arch.as_str(), v.as_str());
        let hash = config_hash(&(&n, &t));
        for (name, e) in &f.val_rmse {
            let label = val_recs.iter().find(|r| &r.name == name).and_then(|r| r.label);
            report.push(EvalEntry {
                method: method.clone(),
                recording: name.clone(),
                label,
                rmse_deg: *e,
                config_hash: hash.clone(),
                runtime_s: f.runtime_s,
                param_count: Some(f.history.param_count),
            })?;
        }
        rows.push(AblationRow {
            arch: n.arch,
            variant: v,
            median_rmse: median(&f.val_rmse.iter().map(|(_, e)| *e).collect::<Vec<_>>()),
            param_count: f.history.param_count,
            val_rmse: f.val_rmse,
            net: n,
            train: t,
        });
    }
    Ok(AblationResult { rows, report })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeRow {
    pub hidden: usize,
    pub param_count: usize,
    pub val_rmse: Vec<(String, f64)>,
    pub median_rmse: f64,
}

#[derive(Debug, Clone)]
pub struct SizeSweepResult {
    pub rows: Vec<SizeRow>,
    pub report: EvalReport,
}

/// Trains the fully optimized model at each hidden size.
pub fn run_size_sweep(
    recs: &[Recording],
    split: &Split,
    sizes: &[usize],
    net: &NetConfig,
    train_cfg: &TrainConfig,
    jobs: usize,
) -> Result<SizeSweepResult> {
    if sizes.is_empty() {
        return Err(Error::Config("size sweep needs at least one hidden size".into()));
    }
    let (train_recs, val_recs) = split.pick(recs);
    let (full_net, full_train) = AblationVariant::BmLoDaGi.configure(net, train_cfg);
    let results = parallel_map(jobs, sizes.to_vec(), |h| {
        let n = NetConfig { hidden: h, ..full_net.clone() };
        train_and_evaluate(&train_recs, &val_recs, &n, &full_train).map(|f| (n, f))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut report = EvalReport::new();
    for (n, f) in results {
        let method = format!("{}:h{}", n.arch.as_str(), n.hidden);
        let hash = config_hash(&(&n, &full_train));
        for (name, e) in &f.val_rmse {
            let label = val_recs.iter().find(|r| &r.name == name).and_then(|r| r.label);
            report.push(EvalEntry {
                method: method.clone(),
                recording: name.clone(),
                label,
                rmse_deg: *e,
                config_hash: hash.clone(),
                runtime_s: f.runtime_s,
                param_count: Some(f.history.param_count),
            })?;
        }
        rows.push(SizeRow {
            hidden: n.hidden,
            param_count: f.history.param_count,
            median_rmse: median(&f.val_rmse.iter().map(|(_, e)| *e).collect::<Vec<_>>()),
            val_rmse: f.val_rmse,
        });
    }
    Ok(SizeSweepResult { rows, report })
}
