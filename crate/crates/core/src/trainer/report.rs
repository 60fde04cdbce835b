//! Run reports and the results table.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::phase::PhaseLog;
use crate::error::{CtdError, Result};
use crate::metrics::MetricsReport;

pub const REPORT_SCHEMA: u32 = 1;

/// Fixed column order of the results table.
pub const CSV_COLUMNS: [&str; 16] = [
    "dataset", "comm", "regime", "#v", "#c", "#p", "l", "#w", "#m", "ACC", "AMI", "POS", "BOS", "CI", "CBM", "ratio",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub regime: String,
    pub dataset: String,
    pub comm: String,
    pub seed: u64,
    pub config_hash: String,
    /// Channel vocabulary size.
    #[serde(rename = "#v")]
    pub n_vocab: usize,
    /// Distinct concepts in the test set.
    #[serde(rename = "#c")]
    pub n_concepts: usize,
    /// Distinct phrases in the test set.
    #[serde(rename = "#p")]
    pub n_phrases: usize,
    pub l: usize,
    pub phases: Vec<PhaseLog>,
    pub test: MetricsReport,
}

impl RunReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    fn metric_values(&self) -> [f64; 6] {
        let t = &self.test;
        [t.acc, t.ami, t.pos, t.bos, t.ci, t.cbm]
    }
}

fn regime_rank(tag: &str) -> usize {
    ["D", "C/D", "CtD", "CtD-ZS"].iter().position(|t| *t == tag).unwrap_or(4)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 {
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v.sqrt())
}

/// Results table. Reports are grouped by (dataset, comm, regime, l) and
/// stably sorted; with `aggregate`, each group becomes one row of means
/// followed by a seed count and one standard-deviation column per metric.
pub fn results_csv(reports: &[RunReport], aggregate: bool) -> Result<String> {
    if reports.is_empty() {
        return Err(CtdError::Invalid("no run reports".into()));
    }
    if let Some(r) = reports.iter().find(|r| r.schema != REPORT_SCHEMA) {
        return Err(CtdError::Format {
            what: "run report",
            detail: format!("schema {} (expected {REPORT_SCHEMA})", r.schema),
        });
    }
    let mut rs: Vec<&RunReport> = reports.iter().collect();
    rs.sort_by(|a, b| {
        (&a.dataset, &a.comm, regime_rank(&a.regime), a.l).cmp(&(&b.dataset, &b.comm, regime_rank(&b.regime), b.l))
    });
    let mut out = CSV_COLUMNS.join(",");
    if aggregate {
        out.push_str(",seeds,ACC_std,AMI_std,POS_std,BOS_std,CI_std,CBM_std");
    }
    out.push('\n');
    let key = |r: &RunReport| (r.dataset.clone(), r.comm.clone(), r.regime.clone(), r.l);
    let groups: Vec<Vec<&RunReport>> = if aggregate {
        let mut gs: Vec<Vec<&RunReport>> = Vec::new();
        for r in rs {
            match gs.last_mut() {
                Some(g) if key(g[0]) == key(r) => g.push(r),
                _ => gs.push(vec![r]),
            }
        }
        gs
    } else {
        rs.into_iter().map(|r| vec![r]).collect()
    };
    for g in groups {
        let f = g[0];
        let avg = |v: &dyn Fn(&RunReport) -> f64| mean_std(&g.iter().map(|r| v(r)).collect::<Vec<_>>());
        let n_vocab = avg(&|r| r.n_vocab as f64).0;
        let n_c = avg(&|r| r.n_concepts as f64).0;
        let n_p = avg(&|r| r.n_phrases as f64).0;
        let n_w = avg(&|r| r.test.n_words as f64).0;
        let n_m = avg(&|r| r.test.n_messages as f64).0;
        let ratio = avg(&|r| r.test.ratio).0;
        let metrics: Vec<(f64, f64)> = (0..6).map(|k| avg(&|r| r.metric_values()[k])).collect();
        let num = |x: f64| if x.fract() == 0.0 { format!("{x:.0}") } else { format!("{x:.1}") };
        write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            f.dataset,
            f.comm,
            f.regime,
            num(n_vocab),
            num(n_c),
            num(n_p),
            f.l,
            num(n_w),
            num(n_m)
        )
        .unwrap();
        for (m, _) in &metrics {
            write!(out, ",{m:.3}").unwrap();
        }
        write!(out, ",{ratio:.3}").unwrap();
        if aggregate {
            write!(out, ",{}", g.len()).unwrap();
            for (_, s) in &metrics {
                write!(out, ",{s:.3}").unwrap();
            }
        }
        out.push('\n');
    }
    Ok(out)
}
