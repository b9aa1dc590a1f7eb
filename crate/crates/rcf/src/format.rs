//! On-disk formats: instances, outcomes, decompositions and CSV rows.
//!
//! Every document carries a versioned `format` tag and is read back
//! strictly: unknown fields are rejected.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rcf_core::multi_unit::{AllocationMatrix, MatchingDecomposition};
use rcf_core::{build_valuation, AuctionInstance, MechanismOutcome, SignalProfile, SignalSpace, ValuationFamily};
use serde::{Deserialize, Serialize};

pub const INSTANCE_FORMAT: &str = "rcf-instance/1";
pub const OUTCOME_FORMAT: &str = "rcf-outcome/1";
pub const DECOMPOSITION_FORMAT: &str = "rcf-decomposition/1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format tag {found:?}, expected {expected:?}")]
    Version { found: String, expected: &'static str },
    #[error("instance declares n = {declared} but has {found} {what}")]
    Count {
        declared: usize,
        found: usize,
        what: &'static str,
    },
    #[error(transparent)]
    Mechanism(#[from] rcf_core::Error),
}

pub fn read_file(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), FormatError> {
    fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Serializable mirror of [`ValuationFamily`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyDescriptor {
    Additive { weights: Vec<f64> },
    Max { weights: Vec<f64> },
    ConcaveOfSum { weights: Vec<f64>, exponent: f64 },
    Example31 { epsilon: f64 },
    Example32 { bidder: usize },
    BoundedDependency { dependencies: Vec<usize>, weights: Vec<f64> },
    Coverage { covers: Vec<Vec<usize>>, element_weights: Vec<f64> },
    Cut { edges: Vec<(usize, usize, f64)>, offset: f64 },
    Table { values: Vec<f64> },
}

impl From<FamilyDescriptor> for ValuationFamily {
    fn from(d: FamilyDescriptor) -> Self {
        use FamilyDescriptor as D;
        match d {
            D::Additive { weights } => Self::Additive { weights },
            D::Max { weights } => Self::Max { weights },
            D::ConcaveOfSum { weights, exponent } => Self::ConcaveOfSum { weights, exponent },
            D::Example31 { epsilon } => Self::Example31 { epsilon },
            D::Example32 { bidder } => Self::Example32 { bidder },
            D::BoundedDependency { dependencies, weights } => Self::BoundedDependency { dependencies, weights },
            D::Coverage { covers, element_weights } => Self::Coverage { covers, element_weights },
            D::Cut { edges, offset } => Self::Cut { edges, offset },
            D::Table { values } => Self::Table { values },
        }
    }
}

impl From<ValuationFamily> for FamilyDescriptor {
    fn from(f: ValuationFamily) -> Self {
        use ValuationFamily as F;
        match f {
            F::Additive { weights } => Self::Additive { weights },
            F::Max { weights } => Self::Max { weights },
            F::ConcaveOfSum { weights, exponent } => Self::ConcaveOfSum { weights, exponent },
            F::Example31 { epsilon } => Self::Example31 { epsilon },
            F::Example32 { bidder } => Self::Example32 { bidder },
            F::BoundedDependency { dependencies, weights } => Self::BoundedDependency { dependencies, weights },
            F::Coverage { covers, element_weights } => Self::Coverage { covers, element_weights },
            F::Cut { edges, offset } => Self::Cut { edges, offset },
            F::Table { values } => Self::Table { values },
        }
    }
}

/// An auction instance as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    #[serde(default = "one")]
    pub m: usize,
    pub grids: Vec<Vec<f64>>,
    /// One valuation per bidder.
    pub valuations: Vec<FamilyDescriptor>,
    pub profile: Vec<f64>,
    /// Public self-bounding bound, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_d: Option<u32>,
    /// Per-bidder self-bounding reports; derived from the valuations when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_reports: Option<Vec<u32>>,
}

fn one() -> usize {
    1
}

impl InstanceFile {
    pub fn new(
        grids: Vec<Vec<f64>>,
        valuations: Vec<ValuationFamily>,
        profile: Vec<f64>,
        m: usize,
        known_d: Option<u32>,
    ) -> Self {
        Self {
            format: INSTANCE_FORMAT.to_string(),
            name: None,
            n: grids.len(),
            m,
            grids,
            valuations: valuations.into_iter().map(Into::into).collect(),
            profile,
            known_d,
            d_reports: None,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let file: Self = serde_json::from_str(text)?;
        if file.format != INSTANCE_FORMAT {
            return Err(FormatError::Version {
                found: file.format,
                expected: INSTANCE_FORMAT,
            });
        }
        for (what, found) in [
            ("grids", file.grids.len()),
            ("valuations", file.valuations.len()),
            ("profile entries", file.profile.len()),
        ] {
            if found != file.n {
                return Err(FormatError::Count {
                    declared: file.n,
                    found,
                    what,
                });
            }
        }
        if let Some(d) = &file.d_reports {
            if d.len() != file.n {
                return Err(FormatError::Count {
                    declared: file.n,
                    found: d.len(),
                    what: "d reports",
                });
            }
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        Self::from_json(&read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        write_file(path, &self.to_json())
    }

    pub fn families(&self) -> Vec<ValuationFamily> {
        self.valuations.iter().cloned().map(Into::into).collect()
    }

    /// Builds the oracles and the instance.
    pub fn build(&self) -> Result<AuctionInstance, FormatError> {
        let space = Arc::new(SignalSpace::new(self.grids.clone())?);
        let mut oracles = Vec::with_capacity(self.n);
        for (i, family) in self.families().into_iter().enumerate() {
            let mut oracle = build_valuation(family, space.clone())?;
            if let Some(d) = &self.d_reports {
                oracle = oracle.with_reported_d(d[i]);
            }
            oracles.push(oracle);
        }
        let mut instance = AuctionInstance::new(space, oracles, SignalProfile::new(self.profile.clone()), self.m)?;
        if let Some(d) = self.known_d {
            instance = instance.with_known_d(d);
        }
        Ok(instance)
    }
}

/// Run parameters embedded in every output for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_id: String,
    /// Instance path or generator spec.
    pub source: String,
    pub eta_policy: String,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCountRecord {
    pub value: u64,
    pub low: u64,
}

/// Serialized [`MechanismOutcome`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub format: String,
    pub config: RunMeta,
    pub n: usize,
    pub m: usize,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub eta: Vec<f64>,
    pub tau: Vec<Vec<f64>>,
    pub candidate_probability: Vec<f64>,
    pub expected_candidates: f64,
    pub total_allocation: f64,
    pub values: Vec<f64>,
    pub welfare_ratio: f64,
    pub query_counts: QueryCountRecord,
    pub seed: Option<u64>,
    pub winners: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<(usize, usize)>>,
}

impl OutcomeRecord {
    pub fn new(config: RunMeta, outcome: &MechanismOutcome, assignment: Option<Vec<(usize, usize)>>) -> Self {
        Self {
            format: OUTCOME_FORMAT.to_string(),
            config,
            n: outcome.x.len(),
            m: outcome.items,
            x: outcome.x.clone(),
            p: outcome.p.clone(),
            eta: outcome.eta.clone(),
            tau: outcome.thresholds.clone(),
            candidate_probability: outcome.candidate_probability.clone(),
            expected_candidates: outcome.expected_candidates(),
            total_allocation: outcome.total_allocation(),
            values: outcome.values.clone(),
            welfare_ratio: outcome.welfare_ratio(),
            query_counts: QueryCountRecord {
                value: outcome.queries.value,
                low: outcome.queries.low,
            },
            seed: outcome.seed,
            winners: outcome.winners.clone(),
            assignment,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcome serializes")
    }

    /// One CSV row per bidder.
    pub fn csv_rows(&self, d: Option<u32>) -> Vec<OutcomeRow> {
        (0..self.n)
            .map(|i| OutcomeRow {
                run_id: self.config.run_id.clone(),
                n: self.n,
                m: self.m,
                d,
                eta_policy: self.config.eta_policy.clone(),
                i,
                x_i: self.x[i],
                p_i: self.p[i],
                v_i: self.values[i],
                welfare_ratio: self.welfare_ratio,
                seed: self.seed,
            })
            .collect()
    }
}

/// CSV columns of the outcome stream, in order.
pub const OUTCOME_COLUMNS: [&str; 11] = [
    "run_id",
    "n",
    "m",
    "d",
    "eta_policy",
    "i",
    "x_i",
    "p_i",
    "v_i",
    "welfare_ratio",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub run_id: String,
    pub n: usize,
    pub m: usize,
    pub d: Option<u32>,
    pub eta_policy: String,
    pub i: usize,
    pub x_i: f64,
    pub p_i: f64,
    pub v_i: f64,
    pub welfare_ratio: f64,
    pub seed: Option<u64>,
}

/// Sampled ex-post assignment, one row per `(bidder, item)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub run_id: String,
    pub i: usize,
    pub item: usize,
    pub seed: u64,
}

/// Writes rows with a header line into a CSV string.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingTerm {
    pub coefficient: f64,
    pub edges: Vec<(usize, usize)>,
}

/// Serialized allocation matrix and its matching decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub format: String,
    pub run_id: String,
    pub rows: usize,
    pub cols: usize,
    pub matrix: Vec<Vec<f64>>,
    pub terms: Vec<MatchingTerm>,
    pub coefficient_sum: f64,
    pub max_error: f64,
}

impl DecompositionRecord {
    pub fn new(run_id: &str, matrix: &AllocationMatrix, d: &MatchingDecomposition) -> Self {
        Self {
            format: DECOMPOSITION_FORMAT.to_string(),
            run_id: run_id.to_string(),
            rows: d.rows,
            cols: d.cols,
            matrix: matrix.rows().to_vec(),
            terms: d
                .terms
                .iter()
                .map(|(coefficient, edges)| MatchingTerm {
                    coefficient: *coefficient,
                    edges: edges.clone(),
                })
                .collect(),
            coefficient_sum: d.coefficient_sum(),
            max_error: d.max_error(matrix),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("decomposition serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_file() -> InstanceFile {
        InstanceFile::new(
            vec![vec![0.0, 1.0]; 2],
            vec![
                ValuationFamily::Additive { weights: vec![4.0, 0.0] },
                ValuationFamily::Additive { weights: vec![0.0, 1.0] },
            ],
            vec![1.0, 1.0],
            1,
            Some(1),
        )
    }

    #[test]
    fn instance_round_trip() {
        let f = worked_file();
        let back = InstanceFile::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let inst = back.build().unwrap();
        assert_eq!(inst.n(), 2);
        assert_eq!(inst.known_d(), Some(1));
    }

    #[test]
    fn rejects_wrong_version_and_counts() {
        let mut f = worked_file();
        f.format = "rcf-instance/0".into();
        assert!(matches!(InstanceFile::from_json(&f.to_json()), Err(FormatError::Version { .. })));
        let mut f = worked_file();
        f.profile.push(0.0);
        assert!(matches!(InstanceFile::from_json(&f.to_json()), Err(FormatError::Count { .. })));
        assert!(matches!(InstanceFile::from_json("{"), Err(FormatError::Json(_))));
        let unknown = worked_file().to_json().replacen("\"n\"", "\"bogus\": 1, \"n\"", 1);
        assert!(InstanceFile::from_json(&unknown).is_err());
    }

    #[test]
    fn family_tags_are_snake_case() {
        let d: FamilyDescriptor = serde_json::from_str(r#"{"family":"example31","epsilon":0.1}"#).unwrap();
        assert_eq!(d, FamilyDescriptor::Example31 { epsilon: 0.1 });
        let d: FamilyDescriptor =
            serde_json::from_str(r#"{"family":"cut","edges":[[0,1,2.0]],"offset":1.0}"#).unwrap();
        assert!(matches!(d, FamilyDescriptor::Cut { .. }));
    }

    #[test]
    fn csv_header_is_fixed() {
        let row = OutcomeRow {
            run_id: "r".into(),
            n: 2,
            m: 1,
            d: Some(1),
            eta_policy: "known".into(),
            i: 0,
            x_i: 0.25,
            p_i: 0.1,
            v_i: 4.0,
            welfare_ratio: 4.0,
            seed: None,
        };
        let text = to_csv(&[row]).unwrap();
        assert_eq!(text.lines().next().unwrap(), OUTCOME_COLUMNS.join(","));
    }
}
