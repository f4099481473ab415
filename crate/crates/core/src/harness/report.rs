//! Consolidated metrics per (variant, method), as text and JSON.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{
    auc, confusion, delay_summary, fp_by_step, scored_steps, Confusion, ConfusionRates,
};
use super::pipeline::Calibration;
use super::trace::EpisodeTrace;
use crate::detectors::Method;
use crate::gridworld::{EnvVariant, VariantKind};

pub const REPORT_FORMAT: &str = "novelty-wm-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub variant: String,
    pub activation_step: u32,
    pub method: Method,
    pub episodes: usize,
    pub steps: usize,
    pub ade: Option<f64>,
    pub detected: usize,
    pub missed: usize,
    pub confusion: Confusion,
    pub rates: ConfusionRates,
    pub auc: Option<f64>,
}

/// Flag-rate curve of one method on the nominal environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NominalFp {
    pub method: Method,
    pub fp_rate: Option<f64>,
    pub fp_by_step: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format: String,
    pub version: u32,
    pub root_seed: u64,
    pub config_digest: String,
    pub calibration: Calibration,
    pub std_divisor: String,
    pub rows: Vec<MetricsRow>,
    pub nominal: Vec<NominalFp>,
}

/// Evaluated traces of one variant.
pub type VariantTraces = (EnvVariant, Vec<EpisodeTrace>);

/// Builds the report. Rows of novel variants pool the variant's steps with
/// the nominal steps (all negative) when a nominal run is present; the
/// nominal row itself carries only false-positive statistics.
pub fn build_report(
    results: &[VariantTraces],
    methods: &[Method],
    root_seed: u64,
    config_digest: &str,
    calibration: &Calibration,
) -> MetricsReport {
    let nominal: Vec<&EpisodeTrace> = results
        .iter()
        .filter(|(v, _)| v.kind == VariantKind::Nominal)
        .flat_map(|(_, t)| t.iter())
        .collect();
    let mut rows = Vec::new();
    for (variant, traces) in results {
        let is_nominal = variant.kind == VariantKind::Nominal;
        let mut pool: Vec<&EpisodeTrace> = traces.iter().collect();
        if !is_nominal {
            pool.extend(nominal.iter().copied());
        }
        for &m in methods {
            let c = confusion(&pool, m);
            let delay = delay_summary(traces, m);
            rows.push(MetricsRow {
                variant: variant.kind.id().to_string(),
                activation_step: variant.activation_step,
                method: m,
                episodes: traces.len(),
                steps: traces.iter().map(EpisodeTrace::len).sum(),
                ade: delay.ade,
                detected: delay.detected,
                missed: delay.missed,
                confusion: c,
                rates: ConfusionRates::from(&c),
                auc: auc(&scored_steps(&pool, m)),
            });
        }
    }
    let nominal_owned: Vec<EpisodeTrace> = nominal.iter().map(|t| (*t).clone()).collect();
    let nominal_fp = if nominal_owned.is_empty() {
        Vec::new()
    } else {
        methods
            .iter()
            .map(|&m| NominalFp {
                method: m,
                fp_rate: confusion(&nominal, m).fp_rate(),
                fp_by_step: fp_by_step(&nominal_owned, m),
            })
            .collect()
    };
    MetricsReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        root_seed,
        config_digest: config_digest.into(),
        calibration: *calibration,
        std_divisor: Calibration::STD_DIVISOR.into(),
        rows,
        nominal: nominal_fp,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

impl MetricsReport {
    pub fn row(&self, variant: &str, method: Method) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.method == method)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width table. Absent cells print as `-`; nominal rows print only
    /// false-positive columns.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "root seed {}  config {}",
            self.root_seed, self.config_digest
        );
        let c = &self.calibration;
        let _ = writeln!(
            s,
            "calibration: cmtre trained {:.6} random {:.6} combo {:.6}; cusum drift {:.6} decision {:.6}; std divisor {}",
            c.mare.trained, c.mare.random, c.mare.combination, c.cusum_drift, c.cusum_decision, self.std_divisor
        );
        let _ = writeln!(
            s,
            "{:<20} {:<14} {:>7} {:>9} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "variant",
            "method",
            "steps",
            "det/miss",
            "ADE",
            "FP",
            "FN",
            "prec",
            "recall",
            "acc",
            "AUC"
        );
        for r in &self.rows {
            let name = if r.activation_step > 0 {
                format!("{}@{}", r.variant, r.activation_step)
            } else {
                r.variant.clone()
            };
            if r.variant == VariantKind::Nominal.id() {
                let _ = writeln!(
                    s,
                    "{:<20} {:<14} {:>7} {:>9} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
                    name,
                    r.method.id(),
                    r.steps,
                    "-",
                    "-",
                    cell(r.rates.fp_rate),
                    "-",
                    "-",
                    "-",
                    "-",
                    "-"
                );
                continue;
            }
            let _ = writeln!(
                s,
                "{:<20} {:<14} {:>7} {:>9} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
                name,
                r.method.id(),
                r.steps,
                format!("{}/{}", r.detected, r.missed),
                cell(r.ade),
                cell(r.rates.fp_rate),
                cell(r.rates.fn_rate),
                cell(r.rates.precision),
                cell(r.rates.recall),
                cell(r.rates.accuracy),
                cell(r.auc)
            );
        }
        s
    }

    /// `step,<method>...` rows of the nominal flag-rate curves.
    pub fn fp_by_step_csv(&self) -> String {
        let mut s = String::from("step");
        for n in &self.nominal {
            let _ = write!(s, ",{}", n.method.id());
        }
        s.push('\n');
        let len = self
            .nominal
            .iter()
            .map(|n| n.fp_by_step.len())
            .max()
            .unwrap_or(0);
        for t in 0..len {
            let _ = write!(s, "{t}");
            for n in &self.nominal {
                let _ = write!(s, ",{}", n.fp_by_step.get(t).copied().unwrap_or(0.0));
            }
            s.push('\n');
        }
        s
    }

    pub fn ade_csv(&self) -> String {
        let mut s = String::from("variant,activation_step,method,ade,detected,missed\n");
        for r in &self.rows {
            let ade = r.ade.map_or_else(String::new, |v| v.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.variant,
                r.activation_step,
                r.method.id(),
                ade,
                r.detected,
                r.missed
            );
        }
        s
    }
}
