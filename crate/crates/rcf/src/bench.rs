//! Wall-clock and query-count scaling of the single-item mechanism.

use std::time::Instant;

use rcf_core::single_item::{run_single_item, EtaPolicy};
use serde::Serialize;

use crate::format::FormatError;
use crate::generator::GeneratorSpec;

/// Sizes swept by default; `10^4` needs roughly 1 GB for the low-estimate
/// matrix and is opt-in.
pub const DEFAULT_SIZES: [usize; 3] = [10, 100, 1000];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub spec: String,
    pub n: usize,
    pub queries: u64,
    pub expected_queries: u64,
    pub build_ms: f64,
    pub run_ms: f64,
    pub seed: u64,
}

impl BenchRow {
    pub fn queries_exact(&self) -> bool {
        self.queries == self.expected_queries
    }
}

/// Generates and runs one instance of `spec` at each size.
pub fn bench(spec: &GeneratorSpec, sizes: &[usize], seed: u64) -> Result<Vec<BenchRow>, FormatError> {
    sizes
        .iter()
        .map(|&n| {
            let mut s = spec.clone();
            s.n = n;
            let started = Instant::now();
            let inst = s.generate(seed).build()?;
            let build_ms = started.elapsed().as_secs_f64() * 1e3;
            let started = Instant::now();
            let outcome = run_single_item(&inst, EtaPolicy::default_for(&inst), None)?;
            let run_ms = started.elapsed().as_secs_f64() * 1e3;
            let n64 = n as u64;
            Ok(BenchRow {
                spec: s.to_string(),
                n,
                queries: outcome.queries.total(),
                expected_queries: n64 * (n64 - 1) + n64,
                build_ms,
                run_ms,
                seed,
            })
        })
        .collect()
}

/// Least-squares slope of `log y` against `log n`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    num / den
}

/// Scaling exponents of queries and run time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fit {
    pub query_exponent: f64,
    pub time_exponent: f64,
}

pub fn fit(rows: &[BenchRow]) -> Fit {
    let q: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.queries as f64)).collect();
    let t: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.run_ms)).collect();
    Fit {
        query_exponent: log_log_slope(&q),
        time_exponent: log_log_slope(&t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_counts_are_quadratic() {
        let spec: GeneratorSpec = "bounded:d=2".parse().unwrap();
        let rows = bench(&spec, &[10, 20, 40], 1).unwrap();
        assert!(rows.iter().all(BenchRow::queries_exact));
        assert_eq!(rows[0].queries, 100);
        let f = fit(&rows);
        assert!((f.query_exponent - 2.0).abs() < 0.05, "{f:?}");
    }

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x: &f64| (x, 3.0 * x.powi(3))).collect();
        assert!((log_log_slope(&pts) - 3.0).abs() < 1e-12);
    }
}
