//! Experiment harness: cost accounting, the session-count experiment and
//! batch runs, with CSV and JSON output.

mod costs;
mod fig4;
mod matrix;
mod spec;

use serde::Serialize;

use crate::adversary::AdversaryError;
use crate::crypto::CurveId;
use crate::protocol::Variant;

pub use costs::{account_costs, analytic_costs, measured_costs, CostReport};
pub use fig4::{oracle_sessions, run_fig4, Fig4Row};
pub use matrix::{run_matrix, AbortDistribution, MatrixRow};
pub use spec::{ExperimentSpec, MatrixMode, PasskeyPolicy};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("{variant}/{curve} {field}: analytic {analytic} but measured {measured}")]
    CostMismatch {
        variant: Variant,
        curve: CurveId,
        field: &'static str,
        analytic: u64,
        measured: u64,
    },
    #[error("measurement session failed: {0}")]
    MeasurementFailed(String),
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn to_csv<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<String, SimError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| SimError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

pub fn costs_csv(rows: &[CostReport]) -> Result<String, SimError> {
    to_csv(rows)
}

pub fn fig4_csv(rows: &[Fig4Row]) -> Result<String, SimError> {
    to_csv(rows)
}

#[derive(Serialize)]
struct FlatMatrixRow<'a> {
    variant: Variant,
    mode: MatrixMode,
    trials: u32,
    successes: u32,
    success_rate: f64,
    aborts_phase1: u32,
    aborts_phase2: &'a str,
    aborts_phase3: u32,
    stalled: u32,
    link_key_agreement: f64,
}

pub fn matrix_csv(rows: &[MatrixRow]) -> Result<String, SimError> {
    let compact: Vec<String> = rows.iter().map(|r| r.aborts.phase2_compact()).collect();
    to_csv(rows.iter().zip(&compact).map(|(r, p2)| FlatMatrixRow {
        variant: r.variant,
        mode: r.mode,
        trials: r.trials,
        successes: r.successes,
        success_rate: r.success_rate,
        aborts_phase1: r.aborts.phase1,
        aborts_phase2: p2,
        aborts_phase3: r.aborts.phase3,
        stalled: r.aborts.stalled,
        link_key_agreement: r.link_key_agreement,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_csv_layout() {
        let rows: Vec<_> = Variant::ALL
            .iter()
            .map(|&v| analytic_costs(v, CurveId::P256))
            .collect();
        let text = costs_csv(&rows).unwrap();
        assert_eq!(
            text,
            "variant,curve,bits_exchanged,hash_invocations,storage_bits,phase1_bits,phase3_bits\n\
             original,p256,10240,80,276,1024,256\n\
             sm,p256,10496,82,276,1024,256\n\
             enhanced,p256,5280,42,532,1024,256\n"
        );
    }

    #[test]
    fn json_ends_with_newline() {
        let text = to_json(&analytic_costs(Variant::Enhanced, CurveId::P192));
        assert!(text.ends_with("}\n"));
        assert!(text.contains("\"storage_bits\": 468"));
    }
}
