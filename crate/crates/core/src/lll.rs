//! Finite Lovász local lemma instances on group windows.
//!
//! An instance fixes a window B, an alphabet and a base family Φ, and holds
//! every translate γ·φ whose support lies inside B. The symmetric-free form
//! of the lemma asks for ω: Φ → [0, 1) with
//!
//! ```text
//! k^{-|φ|} ≤ ω(φ) · ∏_{ψ ∈ N(φ)} (1 - ω(ψ))
//! ```
//!
//! where N(φ) are the other constraints meeting dom(φ). All products are
//! evaluated in log₂ space.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::covers::{CoverError, CylinderFamily};
use crate::group::GroupElement;
use crate::pattern::{CellPattern, Pattern, PatternError, Window};
use crate::scalar::{compensated_sum, log2_alphabet, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LllError {
    #[error("pattern {0} is not a constraint of this instance")]
    UnknownConstraint(String),
    #[error("witness has {found} values for {expected} constraints")]
    WitnessLength { expected: usize, found: usize },
    #[error("witness value {value} at constraint {index} is outside [0, 1)")]
    WitnessRange { index: usize, value: f64 },
    #[error("witness fails the correctness inequality (worst slack {worst_slack} bits)")]
    NotCorrect { worst_slack: f64 },
    #[error("window group differs from the pattern group")]
    GroupMismatch,
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Cover(#[from] CoverError),
}

/// One windowed constraint: a translate of a base pattern lying inside B.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pattern: Pattern,
    cells: CellPattern,
    /// (base index, γ) pairs producing this translate; more than one only
    /// when two base patterns have coinciding translates.
    origins: Vec<(usize, GroupElement)>,
}

impl Constraint {
    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn cells(&self) -> &CellPattern {
        &self.cells
    }

    pub fn origins(&self) -> &[(usize, GroupElement)] {
        &self.origins
    }

    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }
}

/// The windowed constraint set Forb_B(Γ·Φ).
#[derive(Clone, Debug)]
pub struct WindowInstance {
    window: Arc<Window>,
    base: CylinderFamily,
    constraints: Vec<Constraint>,
    neighbors: Vec<Vec<usize>>,
    by_cell: Vec<Vec<usize>>,
}

impl WindowInstance {
    /// All translates γ·φ, φ ∈ base, with dom(φ)γ⁻¹ ⊆ B.
    pub fn new(window: Arc<Window>, base: CylinderFamily) -> Result<Self, LllError> {
        let group = window.group();
        let mut found: BTreeMap<Pattern, Vec<(usize, GroupElement)>> = BTreeMap::new();
        for (bi, phi) in base.iter().enumerate() {
            if phi.support().iter().any(|g| !group.contains(g)) {
                return Err(LllError::GroupMismatch);
            }
            // γ is pinned by where one support point lands: s₀γ⁻¹ = b.
            let s0 = &phi.support()[0];
            let mut seen = HashSet::new();
            for b in window.elements() {
                let gamma = &b.inverse() * s0;
                if !seen.insert(gamma.clone()) {
                    continue;
                }
                let shifted = phi.left_shift(&gamma);
                if shifted.support().iter().all(|g| window.contains(g)) {
                    found.entry(shifted).or_default().push((bi, gamma));
                }
            }
        }
        let constraints = found
            .into_iter()
            .map(|(pattern, origins)| Constraint {
                cells: window.compile(&pattern).expect("support inside window"),
                pattern,
                origins,
            })
            .collect();
        Ok(Self::assemble(window, base, constraints))
    }

    /// An instance from explicit patterns, each treated as its own base
    /// pattern at γ = 1. Patterns leaving the window are rejected.
    pub fn from_patterns(window: Arc<Window>, patterns: impl IntoIterator<Item = Pattern>, k: u8) -> Result<Self, LllError> {
        let base = CylinderFamily::new(patterns, k)?;
        let group = window.group();
        let mut constraints = Vec::with_capacity(base.len());
        for (bi, p) in base.iter().enumerate() {
            let cells = window
                .compile(p)
                .ok_or_else(|| PatternError::SupportOutsideWindow(format!("{p:?}")))?;
            constraints.push(Constraint {
                pattern: p.clone(),
                cells,
                origins: vec![(bi, group.identity())],
            });
        }
        Ok(Self::assemble(window, base, constraints))
    }

    fn assemble(window: Arc<Window>, base: CylinderFamily, constraints: Vec<Constraint>) -> Self {
        let mut by_cell = vec![Vec::new(); window.len()];
        for (i, c) in constraints.iter().enumerate() {
            for &(cell, _) in c.cells.cells() {
                by_cell[cell].push(i);
            }
        }
        let neighbors = (0..constraints.len())
            .map(|i| {
                let mut n: Vec<usize> = constraints[i]
                    .cells
                    .cells()
                    .iter()
                    .flat_map(|&(cell, _)| by_cell[cell].iter().copied())
                    .filter(|&j| j != i)
                    .collect();
                n.sort_unstable();
                n.dedup();
                n
            })
            .collect();
        WindowInstance {
            window,
            base,
            constraints,
            neighbors,
            by_cell,
        }
    }

    pub fn window(&self) -> &Arc<Window> {
        &self.window
    }

    pub fn base(&self) -> &CylinderFamily {
        &self.base
    }

    pub fn alphabet(&self) -> u8 {
        self.base.alphabet()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Index of a constraint pattern.
    pub fn index_of(&self, p: &Pattern) -> Option<usize> {
        self.constraints.binary_search_by(|c| c.pattern.cmp(p)).ok()
    }

    /// Indices of constraints meeting constraint `i`, excluding `i`.
    pub fn neighbor_indices(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Constraints touching a window cell.
    pub fn constraints_at(&self, cell: usize) -> &[usize] {
        &self.by_cell[cell]
    }

    /// N(φ, Φ) for a constraint pattern.
    pub fn neighbors(&self, p: &Pattern) -> Result<Vec<&Pattern>, LllError> {
        let i = self
            .index_of(p)
            .ok_or_else(|| LllError::UnknownConstraint(format!("{p:?}")))?;
        Ok(self.neighbors[i].iter().map(|&j| &self.constraints[j].pattern).collect())
    }

    /// True iff no constraint occurs in `values` (window order).
    pub fn avoids(&self, values: &[u8]) -> bool {
        !self.constraints.iter().any(|c| c.cells.matches(values))
    }
}

/// ω: constraint index → [0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct Witness<T> {
    values: Vec<T>,
}

impl<T: Real> Witness<T> {
    pub fn new(values: Vec<T>) -> Result<Self, LllError> {
        for (index, &v) in values.iter().enumerate() {
            if !(v >= T::zero() && v < T::one()) {
                return Err(LllError::WitnessRange {
                    index,
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Witness { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_len(&self, inst: &WindowInstance) -> Result<(), LllError> {
        if self.values.len() != inst.len() {
            return Err(LllError::WitnessLength {
                expected: inst.len(),
                found: self.values.len(),
            });
        }
        Ok(())
    }
}

/// ω(φ) = 2^{-h|φ|}.
pub fn canonical_witness<T: Real>(inst: &WindowInstance, h: T) -> Witness<T> {
    Witness {
        values: inst.constraints.iter().map(|c| c.pattern.weight_pow(h)).collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectnessReport<T> {
    pub ok: bool,
    /// min over constraints of log₂(RHS) − log₂(LHS); +∞ when there are none.
    pub worst_slack: T,
    /// Per-constraint slack in bits, in constraint order.
    pub slacks: Vec<T>,
}

/// Checks the correctness inequality for every constraint.
pub fn check_correctness<T: Real>(inst: &WindowInstance, w: &Witness<T>) -> Result<CorrectnessReport<T>, LllError> {
    w.check_len(inst)?;
    let log2k: T = log2_alphabet(inst.alphabet());
    let slacks: Vec<T> = (0..inst.len())
        .into_par_iter()
        .map(|i| {
            let lhs = -T::from_usize_lossy(inst.constraints[i].len()) * log2k;
            let rhs = w.values[i].log2()
                + compensated_sum(inst.neighbors[i].iter().map(|&j| w.values[j].log2_1m()));
            rhs - lhs
        })
        .collect();
    let worst_slack = slacks.iter().copied().fold(T::infinity(), T::min);
    Ok(CorrectnessReport {
        ok: slacks.iter().all(|&s| s >= T::zero()),
        worst_slack,
        slacks,
    })
}

/// log₂ of k^{|B|} ∏(1 − ω(φ)), a lower bound on |Forb_B| when ω is a
/// correct witness.
pub fn counting_lower_bound<T: Real>(inst: &WindowInstance, w: &Witness<T>) -> Result<T, LllError> {
    let report = check_correctness(inst, w)?;
    if !report.ok {
        return Err(LllError::NotCorrect {
            worst_slack: report.worst_slack.to_f64().unwrap_or(f64::NAN),
        });
    }
    counting_bound_unchecked(inst, w)
}

/// The same quantity without the correctness precondition. It is only a
/// number; nothing guarantees it bounds |Forb_B| from below.
pub fn counting_bound_unchecked<T: Real>(inst: &WindowInstance, w: &Witness<T>) -> Result<T, LllError> {
    w.check_len(inst)?;
    let log2k: T = log2_alphabet(inst.alphabet());
    Ok(T::from_usize_lossy(inst.window.len()) * log2k + compensated_sum(w.values.iter().map(|v| v.log2_1m())))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditRow {
    pub phi: usize,
    pub psi: usize,
    /// Most translates of ψ meeting a single in-window copy of φ.
    pub count: usize,
    /// |φ||ψ|.
    pub bound: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    pub violations: usize,
}

/// Counts, for every pair of base patterns, translates of ψ meeting an
/// in-window copy of φ, against the |φ||ψ| bound.
pub fn neighbor_bound_audit(inst: &WindowInstance) -> AuditReport {
    let nb = inst.base.len();
    let mut counts = vec![vec![0usize; nb]; nb];
    for (i, c) in inst.constraints.iter().enumerate() {
        let mut per_psi = vec![0usize; nb];
        for &j in inst.neighbors[i].iter().chain(std::iter::once(&i)) {
            for &(psi, _) in &inst.constraints[j].origins {
                per_psi[psi] += 1;
            }
        }
        for &(phi, _) in &c.origins {
            for (psi, &n) in per_psi.iter().enumerate() {
                counts[phi][psi] = counts[phi][psi].max(n);
            }
        }
    }
    let members = inst.base.members();
    let rows: Vec<AuditRow> = (0..nb)
        .flat_map(|phi| (0..nb).map(move |psi| (phi, psi)))
        .map(|(phi, psi)| AuditRow {
            phi,
            psi,
            count: counts[phi][psi],
            bound: members[phi].len() * members[psi].len(),
        })
        .collect();
    let violations = rows.iter().filter(|r| r.count > r.bound).count();
    AuditReport { rows, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupDescriptor;
    use proptest::prelude::*;

    fn digits(s: &str, offset: i64) -> Pattern {
        Pattern::from_digits(s, offset, 2).unwrap()
    }

    fn zeros3(len: usize) -> WindowInstance {
        let base = CylinderFamily::new([digits("000", 0)], 2).unwrap();
        WindowInstance::new(Arc::new(Window::interval(len)), base).unwrap()
    }

    #[test]
    fn translates_of_000() {
        let inst = zeros3(8);
        assert_eq!(inst.len(), 6);
        for off in 0..6 {
            assert!(inst.index_of(&digits("000", off)).is_some());
        }
        let first = digits("000", 0);
        let n = inst.neighbors(&first).unwrap();
        assert_eq!(n, vec![&digits("000", 1), &digits("000", 2)]);
        assert!(matches!(
            inst.neighbors(&digits("000", 7)),
            Err(LllError::UnknownConstraint(_))
        ));
    }

    #[test]
    fn neighbor_examples() {
        let win = Arc::new(Window::interval(8));
        let inst = WindowInstance::from_patterns(win.clone(), [digits("1", 0), digits("1", 5)], 2).unwrap();
        assert!(inst.neighbor_indices(0).is_empty() && inst.neighbor_indices(1).is_empty());
        let same = WindowInstance::from_patterns(win, [digits("01", 2), digits("11", 2)], 2).unwrap();
        assert_eq!(same.neighbor_indices(0), &[1]);
        assert_eq!(same.neighbor_indices(1), &[0]);
    }

    #[test]
    fn correctness_examples() {
        let win = Arc::new(Window::interval(4));
        let empty = WindowInstance::from_patterns(win.clone(), [], 2).unwrap();
        let r = check_correctness(&empty, &Witness::<f64>::new(vec![]).unwrap()).unwrap();
        assert!(r.ok);
        let one = WindowInstance::from_patterns(win, [digits("01", 0)], 2).unwrap();
        let r = check_correctness(&one, &Witness::new(vec![0.5_f64]).unwrap()).unwrap();
        assert!(r.ok);
        assert!((r.worst_slack - 1.0).abs() < 1e-12);

        // per-constraint evaluation oracle on a 5-cell window, ω = 1/3
        let inst = zeros3(5);
        let h = 3f64.log2() / 3.0;
        let w = canonical_witness(&inst, h);
        let r = check_correctness(&inst, &w).unwrap();
        assert!(r.ok);
        for (i, &s) in r.slacks.iter().enumerate() {
            let wv = 1.0 / 3.0;
            let expected = f64::log2(wv) + inst.neighbor_indices(i).len() as f64 * (1.0 - wv).log2() + 3.0;
            assert!((s - expected).abs() < 1e-12);
        }
        // on 8 cells an interior copy has 4 neighbors and x(1-x)⁴ < 1/8 for all x
        let inst = zeros3(8);
        for i in 1..400 {
            let h = i as f64 / 100.0;
            assert!(!check_correctness(&inst, &canonical_witness(&inst, h)).unwrap().ok);
        }
    }

    #[test]
    fn canonical_witness_examples() {
        let inst = zeros3(8);
        assert!(canonical_witness(&inst, 1.0_f64).values().iter().all(|&v| v == 0.125));

        let ten = CylinderFamily::new([digits("0000000000", 0)], 2).unwrap();
        for len in [10, 12, 16, 20] {
            let inst = WindowInstance::new(Arc::new(Window::interval(len)), ten.clone()).unwrap();
            assert!(check_correctness(&inst, &canonical_witness(&inst, 0.9_f64)).unwrap().ok);
        }

        // at h = log₂k: ok iff no neighbors
        let lonely = WindowInstance::new(Arc::new(Window::interval(3)), CylinderFamily::new([digits("000", 0)], 2).unwrap()).unwrap();
        assert!(check_correctness(&lonely, &canonical_witness(&lonely, 1.0_f64)).unwrap().ok);
        assert!(!check_correctness(&inst_with_neighbors(), &canonical_witness(&inst_with_neighbors(), 1.0_f64)).unwrap().ok);
    }

    fn inst_with_neighbors() -> WindowInstance {
        zeros3(4)
    }

    #[test]
    fn audit_examples() {
        let r = neighbor_bound_audit(&zeros3(8));
        // interior copies meet five translates (themselves included)
        assert_eq!(r.rows, vec![AuditRow { phi: 0, psi: 0, count: 5, bound: 9 }]);
        assert_eq!(zeros3(8).neighbor_indices(0).len() + 1, 3);
        assert_eq!(r.violations, 0);
        let win = Arc::new(Window::interval(8));
        let far = WindowInstance::from_patterns(win.clone(), [digits("1", 0), digits("1", 6)], 2).unwrap();
        let r = neighbor_bound_audit(&far);
        assert_eq!(r.rows[1].count, 0);
        assert_eq!(r.violations, 0);
        let base = CylinderFamily::new([digits("1", 0)], 2).unwrap();
        let single = WindowInstance::new(win, base).unwrap();
        let r = neighbor_bound_audit(&single);
        assert_eq!((r.rows[0].count, r.rows[0].bound), (1, 1));
    }

    #[test]
    fn counting_bound_examples() {
        let win = Arc::new(Window::interval(8));
        let none = WindowInstance::from_patterns(win, [], 2).unwrap();
        assert_eq!(counting_lower_bound(&none, &Witness::<f64>::new(vec![]).unwrap()).unwrap(), 8.0);

        let inst = zeros3(8);
        let w = Witness::new(vec![0.125_f64; 6]).unwrap();
        let b = counting_bound_unchecked(&inst, &w).unwrap();
        assert!((b - (8.0 + 6.0 * (7.0_f64 / 8.0).log2())).abs() < 1e-12);
        assert!((b - 6.844_130).abs() < 1e-6);
        assert!(b <= 149f64.log2());
        assert!(matches!(counting_lower_bound(&inst, &w), Err(LllError::NotCorrect { .. })));

        let two = WindowInstance::from_patterns(Arc::new(Window::interval(2)), [digits("11", 0)], 2).unwrap();
        let b = counting_lower_bound(&two, &Witness::new(vec![0.5_f64]).unwrap()).unwrap();
        assert_eq!(b, 1.0);

        let bad = Witness::new(vec![0.01_f64; 6]).unwrap();
        assert!(matches!(counting_lower_bound(&inst, &bad), Err(LllError::NotCorrect { .. })));
    }

    #[test]
    fn witness_validation() {
        assert!(Witness::new(vec![1.0_f64]).is_err());
        assert!(Witness::new(vec![-0.1_f64]).is_err());
        assert!(Witness::new(vec![f64::NAN]).is_err());
        let inst = zeros3(8);
        assert!(matches!(
            check_correctness(&inst, &Witness::new(vec![0.1_f64]).unwrap()),
            Err(LllError::WitnessLength { .. })
        ));
    }

    #[test]
    fn free_group_translates() {
        let g = GroupDescriptor::free(2);
        let win = Arc::new(Window::ball(g, 2));
        let a = GroupElement::parse_word("a").unwrap();
        let base = CylinderFamily::new([Pattern::new([(g.identity(), 0), (a, 0)], 2).unwrap()], 2).unwrap();
        let inst = WindowInstance::new(win.clone(), base.clone()).unwrap();
        // re-enumeration oracle over a larger ball of candidate γ
        let mut expected = std::collections::BTreeSet::new();
        for gamma in g.ball(5) {
            let p = base.members()[0].left_shift(&gamma);
            if p.support().iter().all(|s| win.contains(s)) {
                expected.insert(p);
            }
        }
        let got: std::collections::BTreeSet<_> = inst.constraints().iter().map(|c| c.pattern().clone()).collect();
        assert_eq!(got, expected);
        assert_eq!(neighbor_bound_audit(&inst).violations, 0);
    }

    proptest! {
        #[test]
        fn shrinking_neighbor_witness_keeps_others_ok(h in 0.6f64..0.99, idx in 0usize..6, factor in 0.0f64..1.0) {
            let inst = zeros3(8);
            let mut w = canonical_witness(&inst, h).values().to_vec();
            let before = check_correctness(&inst, &Witness::new(w.clone()).unwrap()).unwrap();
            w[idx] *= factor;
            let after = check_correctness(&inst, &Witness::new(w).unwrap()).unwrap();
            for j in 0..inst.len() {
                if j != idx {
                    prop_assert!(after.slacks[j] >= before.slacks[j] - 1e-12);
                }
            }
        }

        #[test]
        fn canonical_witness_passes_under_breadth(len in 10usize..40, h in 0.05f64..0.95) {
            let ten = CylinderFamily::new([digits("0000000000", 0)], 2).unwrap();
            prop_assume!(h + ten.sigma(h) < 1.0);
            let inst = WindowInstance::new(Arc::new(Window::interval(len)), ten).unwrap();
            prop_assert!(check_correctness(&inst, &canonical_witness(&inst, h)).unwrap().ok);
        }
    }
}
