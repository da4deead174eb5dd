//! Job file format.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "group": {"kind": "zd", "d": 1},
//!   "k": 2,
//!   "family": [{"support": [[0], [1], [2]], "values": [0, 0, 0]}],
//!   "window_radius": 4
//! }
//! ```
//!
//! Free-group elements are strings over `a, b, …` with uppercase inverses;
//! ℤ^d elements are integer arrays.

use serde::{Deserialize, Serialize};

use freeshift::{CylinderFamily, GroupDescriptor, GroupElement, Pattern, Symbol};

use crate::jobs::JobError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementRepr {
    Word(String),
    Vector(Vec<i64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternRepr {
    pub support: Vec<ElementRepr>,
    pub values: Vec<Symbol>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRepr {
    #[serde(default)]
    pub base_cover: Vec<PatternRepr>,
    pub h: f64,
    #[serde(default)]
    pub bad_families: Vec<Vec<PatternRepr>>,
    #[serde(default = "yes")]
    pub auto_epsilon: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PseudoActionRepr {
    Cyclic { n: usize },
    Perm { v: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobFile {
    pub schema_version: u32,
    pub group: GroupDescriptor,
    pub k: u8,
    #[serde(default)]
    pub family: Vec<PatternRepr>,
    pub window_radius: Option<usize>,
    pub h: Option<f64>,
    pub seed: Option<u64>,
    pub plan: Option<PlanRepr>,
    /// construct-free: freeness patterns for every nonidentity γ of this radius.
    pub freeness_radius: Option<usize>,
    /// construct-free: factors per intersection family inside the window.
    pub window_factors: Option<usize>,
    pub pseudo_action: Option<PseudoActionRepr>,
    /// sofic-bound: radius of S (and of F).
    pub s_radius: Option<usize>,
    pub epsilon: Option<f64>,
    /// folner-entropy: side of the box F.
    pub n: Option<usize>,
    pub padding: Option<usize>,
}

impl JobFile {
    pub fn parse(text: &str) -> Result<Self, JobError> {
        let job: JobFile = serde_json::from_str(text).map_err(|e| JobError::Validation(e.to_string()))?;
        if job.schema_version != SCHEMA_VERSION {
            return Err(JobError::Validation(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                job.schema_version
            )));
        }
        job.group.validate().map_err(JobError::validation)?;
        Ok(job)
    }

    pub fn family(&self) -> Result<CylinderFamily, JobError> {
        family_from(self.group, self.k, &self.family)
    }
}

pub fn element_from(group: GroupDescriptor, e: &ElementRepr) -> Result<GroupElement, JobError> {
    let g = match (group, e) {
        (GroupDescriptor::Free { .. }, ElementRepr::Word(s)) => GroupElement::parse_word(s).map_err(JobError::validation)?,
        (GroupDescriptor::FreeAbelian { .. }, ElementRepr::Vector(v)) => GroupElement::vector(v.clone()),
        _ => return Err(JobError::Validation(format!("element {e:?} does not match group {group}"))),
    };
    group.check(&g).map_err(JobError::validation)?;
    Ok(g)
}

pub fn element_repr(g: &GroupElement) -> ElementRepr {
    match g.as_vector() {
        Some(v) => ElementRepr::Vector(v.to_vec()),
        None if g.is_identity() => ElementRepr::Word(String::new()),
        None => ElementRepr::Word(g.to_string()),
    }
}

pub fn pattern_from(group: GroupDescriptor, k: u8, p: &PatternRepr) -> Result<Pattern, JobError> {
    if p.support.len() != p.values.len() {
        return Err(JobError::Validation(format!(
            "pattern has {} support elements but {} values",
            p.support.len(),
            p.values.len()
        )));
    }
    let cells = p
        .support
        .iter()
        .zip(&p.values)
        .map(|(e, &v)| element_from(group, e).map(|g| (g, v)))
        .collect::<Result<Vec<_>, _>>()?;
    Pattern::new(cells, k).map_err(JobError::validation)
}

pub fn pattern_repr(p: &Pattern) -> PatternRepr {
    PatternRepr {
        support: p.support().iter().map(element_repr).collect(),
        values: p.values().to_vec(),
    }
}

pub fn family_from(group: GroupDescriptor, k: u8, ps: &[PatternRepr]) -> Result<CylinderFamily, JobError> {
    let members = ps.iter().map(|p| pattern_from(group, k, p)).collect::<Result<Vec<_>, _>>()?;
    CylinderFamily::new(members, k).map_err(JobError::validation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_patterns() {
        let z = GroupDescriptor::zd(2);
        let p = PatternRepr {
            support: vec![ElementRepr::Vector(vec![0, 1]), ElementRepr::Vector(vec![1, 0])],
            values: vec![1, 0],
        };
        let q = pattern_from(z, 2, &p).unwrap();
        assert_eq!(pattern_from(z, 2, &pattern_repr(&q)).unwrap(), q);

        let f = GroupDescriptor::free(2);
        let text = r#"{"support": ["", "a", "ab"], "values": [0, 1, 1]}"#;
        let p: PatternRepr = serde_json::from_str(text).unwrap();
        let q = pattern_from(f, 2, &p).unwrap();
        assert_eq!(q.len(), 3);
        assert_eq!(pattern_from(f, 2, &pattern_repr(&q)).unwrap(), q);
    }

    #[test]
    fn rejects_mismatches() {
        let bad = PatternRepr {
            support: vec![ElementRepr::Word("a".into())],
            values: vec![0],
        };
        assert!(pattern_from(GroupDescriptor::zd(1), 2, &bad).is_err());
        let dim = PatternRepr {
            support: vec![ElementRepr::Vector(vec![0, 0])],
            values: vec![0],
        };
        assert!(pattern_from(GroupDescriptor::zd(1), 2, &dim).is_err());
        let rank = PatternRepr {
            support: vec![ElementRepr::Word("c".into())],
            values: vec![0],
        };
        assert!(pattern_from(GroupDescriptor::free(2), 2, &rank).is_err());
        assert!(JobFile::parse(r#"{"schema_version": 2, "group": {"kind": "zd", "d": 1}, "k": 2}"#).is_err());
        assert!(JobFile::parse(r#"{"schema_version": 1, "group": {"kind": "zd", "d": 1}, "k": 2, "typo": 1}"#).is_err());
    }

    #[test]
    fn parses_fragments() {
        let job = JobFile::parse(
            r#"{"schema_version": 1, "group": {"kind": "free", "rank": 2}, "k": 2,
                "pseudo_action": {"kind": "perm", "v": 200, "seed": 3},
                "plan": {"base_cover": [], "h": 0.8, "bad_families": [], "auto_epsilon": true}}"#,
        )
        .unwrap();
        assert_eq!(job.pseudo_action, Some(PseudoActionRepr::Perm { v: 200, seed: 3 }));
        assert_eq!(job.plan.unwrap().h, 0.8);
    }
}
