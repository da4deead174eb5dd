//! Exact arithmetic for the two supported group families: free abelian
//! groups ℤ^d and free groups F_m.
//!
//! Elements are ordered canonically "length, then lexicographic". For F_m
//! the length is the reduced word length and letters are ordered
//! `a < A < b < B < …` (uppercase is the inverse). For ℤ^d the length is the
//! ℓ∞ norm and coordinates compare by `(|c|, c < 0)`, so `1 < -1 < 2 < -2`,
//! which mirrors the letter order of the free group on one generator.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported free-group rank (letters `a..z`).
pub const MAX_FREE_RANK: usize = 26;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("group elements belong to different groups: {0} vs {1}")]
    DescriptorMismatch(String, String),
    #[error("group rank must be at least 1")]
    ZeroRank,
    #[error("free group rank {0} exceeds the supported maximum of {MAX_FREE_RANK}")]
    RankTooLarge(usize),
    #[error("element {element} does not belong to {group}")]
    ForeignElement { element: String, group: String },
    #[error("cannot parse group element {0:?}")]
    Parse(String),
}

/// Which group Γ we compute in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum GroupDescriptor {
    /// ℤ^d.
    #[serde(rename = "zd")]
    FreeAbelian { d: usize },
    /// The free group on `rank` generators.
    #[serde(rename = "free")]
    Free { rank: usize },
}

/// A letter of a free-group word: generator `code >> 1`, inverted when the
/// low bit is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(u8);

impl Letter {
    pub fn generator(index: usize) -> Self {
        assert!(index < MAX_FREE_RANK);
        Letter((index as u8) << 1)
    }

    /// Letter from its code `2·generator + inverse_bit`.
    pub fn from_code(code: u8) -> Self {
        assert!((code as usize) < 2 * MAX_FREE_RANK);
        Letter(code)
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn generator_index(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn is_inverse(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn inverse(self) -> Self {
        Letter(self.0 ^ 1)
    }

    fn as_char(self) -> char {
        let base = if self.is_inverse() { b'A' } else { b'a' };
        (base + self.generator_index() as u8) as char
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'a'..='z' => Some(Letter((c as u8 - b'a') << 1)),
            'A'..='Z' => Some(Letter(((c as u8 - b'A') << 1) | 1)),
            _ => None,
        }
    }
}

/// An element of ℤ^d (integer vector) or F_m (reduced word).
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum GroupElement {
    Vector(Vec<i64>),
    Word(Vec<Letter>),
}

fn coordinate_key(c: i64) -> (u64, bool) {
    (c.unsigned_abs(), c < 0)
}

impl GroupElement {
    pub fn zero(d: usize) -> Self {
        GroupElement::Vector(vec![0; d])
    }

    pub fn empty_word() -> Self {
        GroupElement::Word(Vec::new())
    }

    pub fn vector(coords: impl Into<Vec<i64>>) -> Self {
        GroupElement::Vector(coords.into())
    }

    /// Build a word, reducing it freely.
    pub fn word(letters: impl IntoIterator<Item = Letter>) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        GroupElement::Word(out)
    }

    /// Parse a word over `a..z` / `A..Z`; the empty string (or `"1"`) is the
    /// identity.
    pub fn parse_word(s: &str) -> Result<Self, GroupError> {
        if s == "1" {
            return Ok(Self::empty_word());
        }
        let letters = s
            .chars()
            .map(|c| Letter::from_char(c).ok_or_else(|| GroupError::Parse(s.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::word(letters))
    }

    pub fn is_identity(&self) -> bool {
        match self {
            GroupElement::Vector(v) => v.iter().all(|&c| c == 0),
            GroupElement::Word(w) => w.is_empty(),
        }
    }

    /// ℓ∞ norm for vectors, word length for words.
    pub fn length(&self) -> usize {
        match self {
            GroupElement::Vector(v) => v.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0) as usize,
            GroupElement::Word(w) => w.len(),
        }
    }

    pub fn inverse(&self) -> Self {
        match self {
            GroupElement::Vector(v) => GroupElement::Vector(v.iter().map(|c| -c).collect()),
            GroupElement::Word(w) => GroupElement::Word(w.iter().rev().map(|l| l.inverse()).collect()),
        }
    }

    fn same_group(&self, other: &Self) -> bool {
        match (self, other) {
            (GroupElement::Vector(a), GroupElement::Vector(b)) => a.len() == b.len(),
            (GroupElement::Word(_), GroupElement::Word(_)) => true,
            _ => false,
        }
    }

    /// Product `self · other`, or an error when the operands come from
    /// different groups.
    pub fn try_mul(&self, other: &Self) -> Result<Self, GroupError> {
        if !self.same_group(other) {
            return Err(GroupError::DescriptorMismatch(self.to_string(), other.to_string()));
        }
        Ok(match (self, other) {
            (GroupElement::Vector(a), GroupElement::Vector(b)) => {
                GroupElement::Vector(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (GroupElement::Word(a), GroupElement::Word(b)) => {
                let mut cancel = 0;
                while cancel < a.len().min(b.len()) && a[a.len() - 1 - cancel] == b[cancel].inverse() {
                    cancel += 1;
                }
                let mut out = Vec::with_capacity(a.len() + b.len() - 2 * cancel);
                out.extend_from_slice(&a[..a.len() - cancel]);
                out.extend_from_slice(&b[cancel..]);
                GroupElement::Word(out)
            }
            _ => unreachable!(),
        })
    }

    pub fn as_vector(&self) -> Option<&[i64]> {
        match self {
            GroupElement::Vector(v) => Some(v),
            GroupElement::Word(_) => None,
        }
    }

    pub fn as_word(&self) -> Option<&[Letter]> {
        match self {
            GroupElement::Word(w) => Some(w),
            GroupElement::Vector(_) => None,
        }
    }
}

impl Mul for &GroupElement {
    type Output = GroupElement;

    /// Panics when the operands come from different groups; use
    /// [`GroupElement::try_mul`] for a fallible product.
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        self.try_mul(rhs).expect("group elements from the same group")
    }
}

impl Ord for GroupElement {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (GroupElement::Vector(a), GroupElement::Vector(b)) => self
                .length()
                .cmp(&other.length())
                .then_with(|| a.len().cmp(&b.len()))
                .then_with(|| {
                    a.iter()
                        .map(|&c| coordinate_key(c))
                        .cmp(b.iter().map(|&c| coordinate_key(c)))
                }),
            (GroupElement::Word(a), GroupElement::Word(b)) => a.len().cmp(&b.len()).then_with(|| a.cmp(b)),
            (GroupElement::Vector(_), GroupElement::Word(_)) => Ordering::Less,
            (GroupElement::Word(_), GroupElement::Vector(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for GroupElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupElement::Vector(v) => {
                write!(f, "(")?;
                for (i, c) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            GroupElement::Word(w) if w.is_empty() => write!(f, "1"),
            GroupElement::Word(w) => w.iter().try_for_each(|l| write!(f, "{}", l.as_char())),
        }
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupDescriptor::FreeAbelian { d } => write!(f, "Z^{d}"),
            GroupDescriptor::Free { rank } => write!(f, "F_{rank}"),
        }
    }
}

impl GroupDescriptor {
    pub fn zd(d: usize) -> Self {
        GroupDescriptor::FreeAbelian { d }
    }

    pub fn free(rank: usize) -> Self {
        GroupDescriptor::Free { rank }
    }

    pub fn rank(&self) -> usize {
        match *self {
            GroupDescriptor::FreeAbelian { d } => d,
            GroupDescriptor::Free { rank } => rank,
        }
    }

    pub fn is_amenable(&self) -> bool {
        matches!(self, GroupDescriptor::FreeAbelian { .. } | GroupDescriptor::Free { rank: 1 })
    }

    pub fn validate(&self) -> Result<(), GroupError> {
        match *self {
            GroupDescriptor::FreeAbelian { d: 0 } | GroupDescriptor::Free { rank: 0 } => Err(GroupError::ZeroRank),
            GroupDescriptor::Free { rank } if rank > MAX_FREE_RANK => Err(GroupError::RankTooLarge(rank)),
            _ => Ok(()),
        }
    }

    pub fn identity(&self) -> GroupElement {
        match *self {
            GroupDescriptor::FreeAbelian { d } => GroupElement::zero(d),
            GroupDescriptor::Free { .. } => GroupElement::empty_word(),
        }
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        match (self, g) {
            (GroupDescriptor::FreeAbelian { d }, GroupElement::Vector(v)) => v.len() == *d,
            (GroupDescriptor::Free { rank }, GroupElement::Word(w)) => {
                w.iter().all(|l| l.generator_index() < *rank)
                    && w.windows(2).all(|p| p[0] != p[1].inverse())
            }
            _ => false,
        }
    }

    pub fn check(&self, g: &GroupElement) -> Result<(), GroupError> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(GroupError::ForeignElement {
                element: g.to_string(),
                group: self.to_string(),
            })
        }
    }

    /// Reduced product `a · b`, checking membership of both operands.
    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement, GroupError> {
        match (self.check(a), self.check(b)) {
            (Ok(()), Ok(())) => a.try_mul(b),
            _ => Err(GroupError::DescriptorMismatch(a.to_string(), b.to_string())),
        }
    }

    pub fn inverse(&self, a: &GroupElement) -> GroupElement {
        a.inverse()
    }

    /// Generators together with their inverses, in canonical order.
    pub fn symmetric_generators(&self) -> Vec<GroupElement> {
        let mut out = self.sphere(1);
        out.sort();
        out
    }

    /// All elements of length ≤ `radius` in canonical order.
    pub fn ball(&self, radius: usize) -> Vec<GroupElement> {
        match *self {
            GroupDescriptor::FreeAbelian { d } => {
                let r = radius as i64;
                let side = (2 * r + 1) as usize;
                let total = side.pow(d as u32);
                let mut out = Vec::with_capacity(total);
                for mut idx in 0..total {
                    let mut v = vec![0i64; d];
                    for c in v.iter_mut() {
                        *c = (idx % side) as i64 - r;
                        idx /= side;
                    }
                    out.push(GroupElement::Vector(v));
                }
                out.sort();
                out
            }
            GroupDescriptor::Free { rank } => {
                let letters: Vec<Letter> = (0..2 * rank as u8).map(Letter).collect();
                let mut out = vec![GroupElement::empty_word()];
                let mut frontier: Vec<Vec<Letter>> = vec![Vec::new()];
                for _ in 0..radius {
                    let mut next = Vec::with_capacity(frontier.len() * (2 * rank).saturating_sub(1).max(1));
                    for w in &frontier {
                        for &l in &letters {
                            if w.last() == Some(&l.inverse()) {
                                continue;
                            }
                            let mut nw = w.clone();
                            nw.push(l);
                            next.push(nw);
                        }
                    }
                    out.extend(next.iter().cloned().map(GroupElement::Word));
                    frontier = next;
                }
                out
            }
        }
    }

    /// Elements of length exactly `radius`, in canonical order.
    pub fn sphere(&self, radius: usize) -> Vec<GroupElement> {
        self.ball(radius).into_iter().filter(|g| g.length() == radius).collect()
    }

    /// Closed-form size of `ball(radius)`.
    pub fn ball_size(&self, radius: usize) -> u128 {
        match *self {
            GroupDescriptor::FreeAbelian { d } => (2 * radius as u128 + 1).pow(d as u32),
            GroupDescriptor::Free { rank: 1 } => 2 * radius as u128 + 1,
            GroupDescriptor::Free { rank } => {
                let m = rank as u128;
                1 + 2 * m * ((2 * m - 1).pow(radius as u32) - 1) / (2 * m - 2)
            }
        }
    }

    /// Greedy search for `n` translates `γ_1..γ_n` such that
    /// `D γ_i ∩ D' γ_j = ∅` for all input domains `D, D'` and all `i < j`.
    ///
    /// Candidates are scanned sphere by sphere in canonical order and the
    /// first one compatible with all previously accepted translates is kept.
    pub fn find_disjoint_translates(&self, domains: &[Vec<GroupElement>], n: usize) -> Vec<GroupElement> {
        self.find_disjoint_translates_on(Side::Right, domains, n)
    }

    /// As [`find_disjoint_translates`](Self::find_disjoint_translates), with
    /// `Side::Left` producing left cosets `γ_i D` instead of `D γ_i`.
    pub fn find_disjoint_translates_on(&self, side: Side, domains: &[Vec<GroupElement>], n: usize) -> Vec<GroupElement> {
        let mut union: Vec<GroupElement> = domains.iter().flatten().cloned().collect();
        union.sort();
        union.dedup();
        let mut used: HashSet<GroupElement> = HashSet::new();
        let mut accepted = Vec::with_capacity(n);
        let mut radius = 0;
        while accepted.len() < n {
            for g in self.sphere(radius) {
                let cells: Vec<GroupElement> = union
                    .iter()
                    .map(|d| match side {
                        Side::Right => d * &g,
                        Side::Left => &g * d,
                    })
                    .collect();
                if cells.iter().all(|c| !used.contains(c)) {
                    used.extend(cells);
                    accepted.push(g);
                    if accepted.len() == n {
                        break;
                    }
                }
            }
            radius += 1;
        }
        accepted
    }
}

/// Which side a translate or shift acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> GroupElement {
        GroupElement::parse_word(s).unwrap()
    }

    #[test]
    fn multiply_examples() {
        let z2 = GroupDescriptor::zd(2);
        assert_eq!(
            z2.multiply(&GroupElement::vector([1, 0]), &GroupElement::vector([0, 1])).unwrap(),
            GroupElement::vector([1, 1])
        );
        let f2 = GroupDescriptor::free(2);
        assert!(f2.multiply(&w("a"), &w("A")).unwrap().is_identity());
        assert_eq!(f2.multiply(&w("ab"), &w("Ba")).unwrap(), w("aa"));
    }

    #[test]
    fn multiply_rejects_mismatch() {
        let f2 = GroupDescriptor::free(2);
        assert!(matches!(
            f2.multiply(&w("a"), &GroupElement::vector([1])),
            Err(GroupError::DescriptorMismatch(..))
        ));
        assert!(GroupElement::vector([1, 2]).try_mul(&GroupElement::vector([1])).is_err());
        // generator c is not in F_2
        assert!(f2.multiply(&w("c"), &w("a")).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(GroupElement::vector([3]).inverse(), GroupElement::vector([-3]));
        assert_eq!(w("ab").inverse(), w("BA"));
        assert!(w("").inverse().is_identity());
        assert_eq!(w("aA"), w(""));
    }

    #[test]
    fn ball_examples() {
        let z = GroupDescriptor::zd(1);
        let b = z.ball(2);
        assert_eq!(b.len(), 5);
        let coords: Vec<i64> = b.iter().map(|g| g.as_vector().unwrap()[0]).collect();
        assert_eq!(coords, vec![0, 1, -1, 2, -2]);

        let f2 = GroupDescriptor::free(2);
        let b1: Vec<String> = f2.ball(1).iter().map(|g| g.to_string()).collect();
        assert_eq!(b1, vec!["1", "a", "A", "b", "B"]);
        assert_eq!(f2.ball(2).len(), 17);
    }

    /// Independent oracle: reduce every word of length ≤ r over all letters
    /// and count distinct results.
    fn brute_free_ball(rank: usize, r: usize) -> HashSet<GroupElement> {
        let letters: Vec<Letter> = (0..2 * rank as u8).map(Letter).collect();
        let mut words: Vec<Vec<Letter>> = vec![vec![]];
        let mut all = HashSet::new();
        for _ in 0..=r {
            let mut next = Vec::new();
            for wd in &words {
                all.insert(GroupElement::word(wd.iter().copied()));
                for &l in &letters {
                    let mut n = wd.clone();
                    n.push(l);
                    next.push(n);
                }
            }
            words = next;
        }
        all
    }

    #[test]
    fn free_ball_matches_brute_force() {
        for rank in 1..=3 {
            for r in 0..=3 {
                let ball: HashSet<_> = GroupDescriptor::free(rank).ball(r).into_iter().collect();
                assert_eq!(ball, brute_free_ball(rank, r), "rank {rank} radius {r}");
            }
        }
    }

    #[test]
    fn ball_sizes_closed_form() {
        for r in 0..=5 {
            for d in 1..=3 {
                let g = GroupDescriptor::zd(d);
                assert_eq!(g.ball(r).len() as u128, g.ball_size(r));
                assert_eq!(g.ball_size(r), (2 * r as u128 + 1).pow(d as u32));
            }
            for m in 1..=3 {
                let g = GroupDescriptor::free(m);
                assert_eq!(g.ball(r).len() as u128, g.ball_size(r), "F_{m} r={r}");
            }
        }
    }

    #[test]
    fn ball_is_sorted_symmetric_and_contains_identity() {
        for g in [GroupDescriptor::zd(2), GroupDescriptor::free(2)] {
            let b = g.ball(3);
            assert!(b.windows(2).all(|p| p[0] < p[1]));
            assert!(b[0].is_identity());
            let set: HashSet<_> = b.iter().cloned().collect();
            assert!(b.iter().all(|x| set.contains(&x.inverse())));
        }
    }

    #[test]
    fn disjoint_translates_examples() {
        let z = GroupDescriptor::zd(1);
        let dom = vec![vec![GroupElement::vector([0]), GroupElement::vector([1])]];
        let t = z.find_disjoint_translates(&dom, 2);
        assert_eq!(t, vec![GroupElement::vector([0]), GroupElement::vector([2])]);

        assert_eq!(z.find_disjoint_translates(&dom, 1), vec![GroupElement::vector([0])]);

        let f2 = GroupDescriptor::free(2);
        let dom = vec![vec![w(""), w("a")]];
        let t = f2.find_disjoint_translates(&dom, 2);
        // by hand: 1 accepted; a gives {a,aa}, A gives {A,1}, both clash; b gives {b,ab}
        assert_eq!(t, vec![w(""), w("b")]);
    }

    fn assert_pairwise_disjoint(side: Side, domains: &[Vec<GroupElement>], ts: &[GroupElement]) {
        for i in 0..ts.len() {
            for j in i + 1..ts.len() {
                for d in domains {
                    for e in domains {
                        let a: HashSet<GroupElement> = d
                            .iter()
                            .map(|x| if side == Side::Right { x * &ts[i] } else { &ts[i] * x })
                            .collect();
                        let b: HashSet<GroupElement> = e
                            .iter()
                            .map(|x| if side == Side::Right { x * &ts[j] } else { &ts[j] * x })
                            .collect();
                        assert!(a.is_disjoint(&b));
                    }
                }
            }
        }
    }

    #[test]
    fn disjoint_translates_postcondition() {
        let f2 = GroupDescriptor::free(2);
        let domains = vec![vec![w(""), w("ab")], vec![w("b"), w("Ab"), w("")]];
        for side in [Side::Left, Side::Right] {
            let ts = f2.find_disjoint_translates_on(side, &domains, 9);
            assert_eq!(ts.len(), 9);
            assert_pairwise_disjoint(side, &domains, &ts);
        }
        let z2 = GroupDescriptor::zd(2);
        let domains = vec![vec![GroupElement::vector([0, 0]), GroupElement::vector([1, 1])]];
        let ts = z2.find_disjoint_translates(&domains, 12);
        assert_pairwise_disjoint(Side::Right, &domains, &ts);
    }

    fn arb_word(rank: u8, max_len: usize) -> impl Strategy<Value = GroupElement> {
        prop::collection::vec(0..2 * rank, 0..max_len).prop_map(|v| GroupElement::word(v.into_iter().map(Letter)))
    }

    fn arb_vec(d: usize) -> impl Strategy<Value = GroupElement> {
        prop::collection::vec(-50i64..50, d).prop_map(GroupElement::Vector)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn free_group_laws(a in arb_word(2, 8), b in arb_word(2, 8), c in arb_word(2, 8)) {
            let f2 = GroupDescriptor::free(2);
            prop_assert!(f2.contains(&a));
            let ab_c = &(&a * &b) * &c;
            let a_bc = &a * &(&b * &c);
            prop_assert_eq!(&ab_c, &a_bc);
            prop_assert!(f2.contains(&ab_c));
            prop_assert_eq!(&(&a * &f2.identity()), &a);
            prop_assert_eq!(&(&f2.identity() * &a), &a);
            prop_assert!((&a * &a.inverse()).is_identity());
        }

        #[test]
        fn free_abelian_laws(a in arb_vec(3), b in arb_vec(3), c in arb_vec(3)) {
            let id = GroupDescriptor::zd(3).identity();
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&(&a * &id), &a);
            prop_assert!((&a * &a.inverse()).is_identity());
            prop_assert_eq!(&a * &b, &b * &a);
        }
    }
}
