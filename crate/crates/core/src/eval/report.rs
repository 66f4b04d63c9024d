use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::MotionLabel;
use crate::error::{Error, Result};

/// One evaluated (method, recording) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub method: String,
    pub recording: String,
    pub label: Option<MotionLabel>,
    pub rmse_deg: f64,
    pub config_hash: String,
    pub runtime_s: f64,
    pub param_count: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub entries: Vec<EvalEntry>,
}

impl EvalReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry; a second entry for the same (method, recording) pair or
    /// a negative / non-finite error is rejected.
    pub fn push(&mut self, e: EvalEntry) -> Result<()> {
        if !(e.rmse_deg >= 0.0) || !e.rmse_deg.is_finite() {
            return Err(Error::Domain(format!("{} on {}: e_RMS {} is not a valid error", e.method, e.recording, e.rmse_deg)));
        }
        if self.get(&e.method, &e.recording).is_some() {
            return Err(Error::Domain(format!("duplicate entry for {} on {}", e.method, e.recording)));
        }
        self.entries.push(e);
        Ok(())
    }

    pub fn extend(&mut self, other: EvalReport) -> Result<()> {
        for e in other.entries {
            self.push(e)?;
        }
        Ok(())
    }

    pub fn get(&self, method: &str, recording: &str) -> Option<&EvalEntry> {
        self.entries.iter().find(|e| e.method == method && e.recording == recording)
    }

    /// Methods in first-appearance order.
    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.method) {
                out.push(e.method.clone());
            }
        }
        out
    }

    pub fn errors_of(&self, method: &str) -> Vec<f64> {
        self.entries.iter().filter(|e| e.method == method).map(|e| e.rmse_deg).collect()
    }

    pub fn summary(&self) -> Vec<MethodSummary> {
        self.methods()
            .into_iter()
            .map(|m| {
                let v = self.errors_of(&m);
                MethodSummary {
                    n: v.len(),
                    median: quantile(&v, 0.5),
                    q1: quantile(&v, 0.25),
                    q3: quantile(&v, 0.75),
                    method: m,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl MethodSummary {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Short stable digest of any serializable configuration.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_vec(cfg).expect("configurations serialize");
    let digest = Sha256::digest(&json);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmitOptions {
    /// Write measured runtimes; otherwise the column is left empty so that
    /// reruns produce identical files.
    pub include_runtime: bool,
}

const PLOT_LOOCV: &str = r#"import csv, sys
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open(sys.argv[1] if len(sys.argv) > 1 else "results.csv")))
methods = []
for r in rows:
    if r["method"] not in methods:
        methods.append(r["method"])
data = [[float(r["rmse_deg"]) for r in rows if r["method"] == m] for m in methods]
fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(methods)), 4))
ax.boxplot(data)
ax.set_xticks(range(1, len(methods) + 1), methods, rotation=30, ha="right")
ax.set_ylabel("attitude e_RMS [deg]")
fig.tight_layout()
fig.savefig("errors_boxplot.png", dpi=150)
"#;

const PLOT_ABLATION: &str = r#"import csv, statistics, sys
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open(sys.argv[1] if len(sys.argv) > 1 else "results.csv")))
groups = {}
for r in rows:
    arch, sep, variant = r["method"].partition(":")
    if not sep or variant.startswith("h"):
        continue
    groups.setdefault(arch, {}).setdefault(variant, []).append(float(r["rmse_deg"]))
fig, ax = plt.subplots(figsize=(7, 4))
width = 0.8 / max(1, len(groups))
for i, (arch, variants) in enumerate(sorted(groups.items())):
    names = list(variants)
    xs = [j + i * width for j in range(len(names))]
    ax.bar(xs, [statistics.median(variants[n]) for n in names], width, label=arch)
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(names))], names)
ax.set_ylabel("median validation e_RMS [deg]")
ax.legend()
fig.tight_layout()
fig.savefig("ablation_bars.png", dpi=150)
"#;

const PLOT_SIZE: &str = r#"import csv, statistics, sys
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open(sys.argv[1] if len(sys.argv) > 1 else "results.csv")))
sizes = {}
for r in rows:
    arch, sep, variant = r["method"].partition(":")
    if sep and variant.startswith("h") and variant[1:].isdigit():
        sizes.setdefault(int(variant[1:]), []).append(float(r["rmse_deg"]))
xs = sorted(sizes)
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(xs, [statistics.median(sizes[x]) for x in xs], marker="o")
ax.set_xscale("log")
ax.set_xlabel("hidden size")
ax.set_ylabel("median validation e_RMS [deg]")
fig.tight_layout()
fig.savefig("size_sweep.png", dpi=150)
"#;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `results.csv`, `summary.csv`, `params.csv` (when parameter counts
/// are known) and plotting scripts into `out_dir`, creating it if needed.
pub fn emit_report(report: &EvalReport, out_dir: &Path, opts: EmitOptions) -> Result<()> {
    if report.entries.is_empty() {
        return Err(Error::Domain("nothing to report".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Domain(format!("csv encoding failed: {e}"));
    w.write_record(["method", "recording", "kind", "speed", "pausing", "rmse_deg", "runtime_s"]).map_err(csv_err)?;
    for e in &report.entries {
        let (k, s, p) = match e.label {
            Some(l) => (l.kind.as_str(), l.speed.as_str(), l.pausing.as_str()),
            None => ("", "", ""),
        };
        let rt = if opts.include_runtime { format!("{:.3}", e.runtime_s) } else { String::new() };
        w.write_record([e.method.as_str(), &e.recording, k, s, p, &e.rmse_deg.to_string(), &rt]).map_err(csv_err)?;
    }
    write(&out_dir.join("results.csv"), w.into_inner().map_err(|e| Error::Domain(e.to_string()))?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "n", "median_deg", "q1_deg", "q3_deg", "iqr_deg"]).map_err(csv_err)?;
    for s in report.summary() {
        w.write_record([
            s.method.clone(),
            s.n.to_string(),
            s.median.to_string(),
            s.q1.to_string(),
            s.q3.to_string(),
            s.iqr().to_string(),
        ])
        .map_err(csv_err)?;
    }
    write(&out_dir.join("summary.csv"), w.into_inner().map_err(|e| Error::Domain(e.to_string()))?)?;

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &report.entries {
        if let Some(c) = e.param_count {
            counts.insert(&e.method, c);
        }
    }
    if !counts.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "param_count"]).map_err(csv_err)?;
        for (m, c) in counts {
            w.write_record([m, &c.to_string()]).map_err(csv_err)?;
        }
        write(&out_dir.join("params.csv"), w.into_inner().map_err(|e| Error::Domain(e.to_string()))?)?;
    }

    write(&out_dir.join("plot_errors.py"), PLOT_LOOCV)?;
    write(&out_dir.join("plot_ablation.py"), PLOT_ABLATION)?;
    write(&out_dir.join("plot_size_sweep.py"), PLOT_SIZE)?;
    Ok(())
}
