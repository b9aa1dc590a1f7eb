//! Instance generators addressed by `family:key=value,...` specs.
//!
//! Families: `worked`, `coverage`, `cut`, `additive`, `max`, `concave`,
//! `bounded`, `example31`, `example32`. Common keys are `n`, `m` and `levels`
//! (grid size, default 2); `coverage` takes `elements`, `bounded` takes `d`,
//! `example31` takes `eps`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcf_core::{generate, ValuationFamily};

use crate::format::InstanceFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Worked,
    Coverage,
    Cut,
    Additive,
    Max,
    Concave,
    Bounded,
    Example31,
    Example32,
}

impl Kind {
    const ALL: [(&'static str, Kind); 9] = [
        ("worked", Kind::Worked),
        ("coverage", Kind::Coverage),
        ("cut", Kind::Cut),
        ("additive", Kind::Additive),
        ("max", Kind::Max),
        ("concave", Kind::Concave),
        ("bounded", Kind::Bounded),
        ("example31", Kind::Example31),
        ("example32", Kind::Example32),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, k)| *k == self).unwrap().0
    }

    /// Monotone and SOS by construction.
    pub fn monotone_sos(self) -> bool {
        !matches!(self, Kind::Cut | Kind::Max)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("unknown family {0:?}")]
    Family(String),
    #[error("malformed parameter {0:?}, expected key=value")]
    Malformed(String),
    #[error("unknown parameter {key:?} for {family}")]
    UnknownKey { family: &'static str, key: String },
    #[error("parameter {key} = {value:?} is invalid: {why}")]
    Value { key: String, value: String, why: &'static str },
}

/// A parsed generator spec.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: Kind,
    pub n: usize,
    pub m: usize,
    pub levels: usize,
    pub elements: usize,
    pub d: usize,
    pub epsilon: f64,
}

impl GeneratorSpec {
    pub fn new(kind: Kind, n: usize) -> Self {
        Self {
            kind,
            n,
            m: 1,
            levels: 2,
            elements: 2 * n.max(1),
            d: 2,
            epsilon: 0.1,
        }
    }

    pub fn with_items(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    /// Draws one instance; the same `(spec, seed)` always gives the same file.
    pub fn generate(&self, seed: u64) -> InstanceFile {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n;
        let grid: Vec<f64> = (0..self.levels).map(|k| k as f64).collect();
        let top = grid[grid.len() - 1];
        let mut profile: Vec<f64> = (0..n).map(|_| grid[rng.random_range(0..grid.len())]).collect();
        let valuations: Vec<ValuationFamily> = match self.kind {
            Kind::Worked => {
                profile = vec![1.0, 1.0];
                vec![
                    ValuationFamily::Additive { weights: vec![4.0, 0.0] },
                    ValuationFamily::Additive { weights: vec![0.0, 1.0] },
                ]
            }
            Kind::Coverage => (0..n).map(|_| generate::coverage(&mut rng, n, self.elements)).collect(),
            Kind::Cut => (0..n).map(|_| generate::cut(&mut rng, n)).collect(),
            Kind::Additive => (0..n).map(|_| generate::additive(&mut rng, n)).collect(),
            Kind::Max => (0..n).map(|_| generate::max(&mut rng, n)).collect(),
            Kind::Concave => (0..n).map(|_| generate::concave_of_sum(&mut rng, n)).collect(),
            Kind::Bounded => (0..n)
                .map(|_| generate::bounded_dependency(&mut rng, n, self.d))
                .collect(),
            Kind::Example31 => {
                profile = vec![top; n];
                vec![ValuationFamily::Example31 { epsilon: self.epsilon }; n]
            }
            Kind::Example32 => {
                profile = vec![top; n];
                (0..n).map(|bidder| ValuationFamily::Example32 { bidder }).collect()
            }
        };
        let known_d = valuations
            .iter()
            .map(ValuationFamily::known_self_bounding)
            .try_fold(0u32, |acc, d| d.map(|d| acc.max(d)));
        let grids = vec![grid; n];
        InstanceFile::new(grids, valuations, profile, self.m, known_d).with_name(format!("{self}#{seed}"))
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:n={},m={},levels={}", self.kind.name(), self.n, self.m, self.levels)?;
        match self.kind {
            Kind::Coverage => write!(f, ",elements={}", self.elements),
            Kind::Bounded => write!(f, ",d={}", self.d),
            Kind::Example31 => write!(f, ",eps={}", self.epsilon),
            _ => Ok(()),
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        let (family, rest) = s.split_once(':').unwrap_or((s, ""));
        let kind = Kind::ALL
            .iter()
            .find(|(name, _)| *name == family)
            .map(|(_, k)| *k)
            .ok_or_else(|| SpecError::Family(family.to_string()))?;
        let mut params = BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| SpecError::Malformed(part.to_string()))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        let default_n = match kind {
            Kind::Worked => 2,
            Kind::Example32 => 16,
            _ => 4,
        };
        let int = |key: &str, default: usize| -> Result<usize, SpecError> {
            params.get(key).map_or(Ok(default), |v| {
                v.parse().map_err(|_| SpecError::Value {
                    key: key.into(),
                    value: v.clone(),
                    why: "not a non-negative integer",
                })
            })
        };
        let mut spec = GeneratorSpec::new(kind, int("n", default_n)?);
        spec.m = int("m", 1)?;
        spec.levels = int("levels", 2)?;
        spec.elements = int("elements", spec.elements)?;
        spec.d = int("d", spec.d)?;
        if let Some(v) = params.get("eps") {
            spec.epsilon = v.parse().map_err(|_| SpecError::Value {
                key: "eps".into(),
                value: v.clone(),
                why: "not a number",
            })?;
        }
        let allowed: &[&str] = match kind {
            Kind::Coverage => &["n", "m", "levels", "elements"],
            Kind::Bounded => &["n", "m", "levels", "d"],
            Kind::Example31 => &["n", "m", "levels", "eps"],
            _ => &["n", "m", "levels"],
        };
        if let Some(key) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(SpecError::UnknownKey {
                family: kind.name(),
                key: key.clone(),
            });
        }
        let bad = |key: &str, value: usize, why| SpecError::Value {
            key: key.into(),
            value: value.to_string(),
            why,
        };
        if spec.n == 0 {
            return Err(bad("n", 0, "need at least one bidder"));
        }
        if kind == Kind::Worked && spec.n != 2 {
            return Err(bad("n", spec.n, "the worked instance has two bidders"));
        }
        if kind == Kind::Example32 {
            let r = (spec.n as f64).sqrt().round() as usize;
            if r * r != spec.n {
                return Err(bad("n", spec.n, "must be a perfect square"));
            }
        }
        if spec.levels < 2 {
            return Err(bad("levels", spec.levels, "grids need at least two points"));
        }
        if spec.m == 0 || (spec.m > 1 && spec.m >= spec.n) {
            return Err(bad("m", spec.m, "need 1 <= m < n"));
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints() {
        let s: GeneratorSpec = "coverage:n=6,elements=5".parse().unwrap();
        assert_eq!(s.kind, Kind::Coverage);
        assert_eq!((s.n, s.elements, s.m), (6, 5, 1));
        let back: GeneratorSpec = s.to_string().parse().unwrap();
        assert_eq!(back, s);
        let e: GeneratorSpec = "example31:n=8,eps=0.1".parse().unwrap();
        assert_eq!(e.epsilon, 0.1);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!("nope:n=3".parse::<GeneratorSpec>(), Err(SpecError::Family(_))));
        assert!(matches!("cut:n".parse::<GeneratorSpec>(), Err(SpecError::Malformed(_))));
        assert!(matches!("cut:d=3".parse::<GeneratorSpec>(), Err(SpecError::UnknownKey { .. })));
        assert!("example32:n=15".parse::<GeneratorSpec>().is_err());
        assert!("cut:n=3,m=3".parse::<GeneratorSpec>().is_err());
        assert!("cut:n=x".parse::<GeneratorSpec>().is_err());
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        for spec in ["coverage:n=5", "cut:n=4", "bounded:n=6,d=2", "example32:n=16", "worked", "max:n=3,levels=3"] {
            let s: GeneratorSpec = spec.parse().unwrap();
            let a = s.generate(7);
            assert_eq!(a, s.generate(7));
            let inst = a.build().unwrap();
            assert_eq!(inst.n(), s.n);
        }
        let cut: GeneratorSpec = "cut:n=4".parse().unwrap();
        assert_eq!(cut.generate(1).known_d, Some(2));
    }
}
