//! Finite patterns φ: Γ ⇀ k, their shifts, and configurations on finite
//! windows.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

use crate::group::{GroupDescriptor, GroupElement, GroupError};
use crate::scalar::Real;

/// A symbol of the alphabet `{0, …, k-1}`.
pub type Symbol = u8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("patterns must have nonempty support")]
    EmptySupport,
    #[error("alphabet size must be at least 2, got {0}")]
    AlphabetTooSmall(u8),
    #[error("symbol {symbol} is outside the alphabet of size {k}")]
    SymbolOutOfRange { symbol: Symbol, k: u8 },
    #[error("conflicting values at {0}")]
    Conflict(String),
    #[error("support element {0} lies outside the window")]
    SupportOutsideWindow(String),
    #[error("configuration has {got} values but the window has {expected} cells")]
    WrongLength { expected: usize, got: usize },
    #[error("configurations live on different windows")]
    WindowMismatch,
    #[error("restriction set must be nonempty")]
    EmptyRestriction,
    #[error("alphabet mismatch: {0} vs {1}")]
    AlphabetMismatch(u8, u8),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// A finite partial map φ: Γ ⇀ {0..k-1} with nonempty support.
///
/// The support is kept sorted in canonical group order, so equality and
/// hashing are structural.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    support: Vec<GroupElement>,
    values: Vec<Symbol>,
    k: u8,
}

impl Pattern {
    pub fn new(cells: impl IntoIterator<Item = (GroupElement, Symbol)>, k: u8) -> Result<Self, PatternError> {
        if k < 2 {
            return Err(PatternError::AlphabetTooSmall(k));
        }
        let mut cells: Vec<(GroupElement, Symbol)> = cells.into_iter().collect();
        if cells.is_empty() {
            return Err(PatternError::EmptySupport);
        }
        cells.sort();
        cells.dedup();
        if let Some(p) = cells.windows(2).find(|p| p[0].0 == p[1].0) {
            return Err(PatternError::Conflict(p[0].0.to_string()));
        }
        if let Some(&(_, symbol)) = cells.iter().find(|(_, s)| *s >= k) {
            return Err(PatternError::SymbolOutOfRange { symbol, k });
        }
        let (support, values) = cells.into_iter().unzip();
        Ok(Pattern { support, values, k })
    }

    /// Pattern over ℤ given as a string of digits starting at `offset`,
    /// e.g. `from_digits("000", 0, 2)` is `{0↦0, 1↦0, 2↦0}`.
    pub fn from_digits(digits: &str, offset: i64, k: u8) -> Result<Self, PatternError> {
        let cells = digits
            .chars()
            .enumerate()
            .map(|(i, c)| {
                let s = c.to_digit(36).unwrap_or(u32::MAX).min(255) as Symbol;
                (GroupElement::vector([offset + i as i64]), s)
            })
            .collect::<Vec<_>>();
        Self::new(cells, k)
    }

    pub fn alphabet(&self) -> u8 {
        self.k
    }

    /// |φ|, the support size.
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn support(&self) -> &[GroupElement] {
        &self.support
    }

    pub fn values(&self) -> &[Symbol] {
        &self.values
    }

    pub fn cells(&self) -> impl Iterator<Item = (&GroupElement, Symbol)> + '_ {
        self.support.iter().zip(self.values.iter().copied())
    }

    pub fn get(&self, g: &GroupElement) -> Option<Symbol> {
        self.support.binary_search(g).ok().map(|i| self.values[i])
    }

    /// γ·φ: support `dom(φ)γ⁻¹`, `(γ·φ)(δ) = φ(δγ)`.
    pub fn left_shift(&self, gamma: &GroupElement) -> Pattern {
        let inv = gamma.inverse();
        self.remap(|s| s * &inv)
    }

    /// φ·γ: support `γ⁻¹dom(φ)`, `(φ·γ)(δ) = φ(γδ)`.
    pub fn right_shift(&self, gamma: &GroupElement) -> Pattern {
        let inv = gamma.inverse();
        self.remap(|s| &inv * s)
    }

    fn remap(&self, f: impl Fn(&GroupElement) -> GroupElement) -> Pattern {
        let mut cells: Vec<(GroupElement, Symbol)> = self.cells().map(|(s, v)| (f(s), v)).collect();
        cells.sort();
        let (support, values) = cells.into_iter().unzip();
        Pattern {
            support,
            values,
            k: self.k,
        }
    }

    /// d(U_φ) = 2^{-|φ|}, exactly.
    pub fn weight(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::one() << self.len())
    }

    /// d(U_φ)^h = 2^{-h|φ|} in floating point.
    pub fn weight_pow<T: Real>(&self, h: T) -> T {
        (h * T::from_usize_lossy(self.len())).exp2_neg()
    }

    /// Union of two patterns with compatible values.
    pub fn merge(&self, other: &Pattern) -> Result<Pattern, PatternError> {
        if self.k != other.k {
            return Err(PatternError::AlphabetMismatch(self.k, other.k));
        }
        Pattern::new(
            self.cells()
                .chain(other.cells())
                .map(|(g, s)| (g.clone(), s)),
            self.k,
        )
    }

    /// Diameter of the support: max length of `s⁻¹t` over support pairs.
    pub fn diameter(&self) -> usize {
        let mut best = 0;
        for s in &self.support {
            let inv = s.inverse();
            for t in &self.support {
                best = best.max((&inv * t).length());
            }
        }
        best
    }

    /// Max element length in the support.
    pub fn radius(&self) -> usize {
        self.support.iter().map(|g| g.length()).max().unwrap_or(0)
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (g, s)) in self.cells().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{g}↦{s}")?;
        }
        write!(f, "}}")
    }
}

/// A pattern compiled against a window or a finite vertex set: cells are
/// indices, sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellPattern {
    cells: Vec<(usize, Symbol)>,
}

impl CellPattern {
    /// Builds a cell pattern; duplicate cells with equal symbols collapse.
    /// Returns `None` on an empty or conflicting assignment.
    pub fn new(mut cells: Vec<(usize, Symbol)>) -> Option<Self> {
        cells.sort_unstable();
        cells.dedup();
        if cells.is_empty() || cells.windows(2).any(|p| p[0].0 == p[1].0) {
            return None;
        }
        Some(CellPattern { cells })
    }

    pub fn cells(&self) -> &[(usize, Symbol)] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn max_cell(&self) -> usize {
        self.cells.last().map(|c| c.0).unwrap_or(0)
    }

    pub fn matches(&self, values: &[Symbol]) -> bool {
        self.cells.iter().all(|&(c, s)| values[c] == s)
    }

    pub fn intersects(&self, other: &CellPattern) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.cells.len() && j < other.cells.len() {
            match self.cells[i].0.cmp(&other.cells[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum WindowShape {
    Ball { radius: usize },
    Boxed { lower: Vec<i64>, upper: Vec<i64> },
}

/// A finite ordered window B ⊆ Γ: a ball, or for ℤ^d a half-open box.
#[derive(Clone, Debug)]
pub struct Window {
    group: GroupDescriptor,
    shape: WindowShape,
    elements: Vec<GroupElement>,
    index: HashMap<GroupElement, usize>,
}

impl PartialEq for Window {
    fn eq(&self, other: &Self) -> bool {
        self.group == other.group && self.elements == other.elements
    }
}

impl Eq for Window {}

impl Window {
    pub fn ball(group: GroupDescriptor, radius: usize) -> Self {
        Self::from_parts(group, WindowShape::Ball { radius }, group.ball(radius))
    }

    /// Half-open box `[lower, upper)` in ℤ^d, in canonical element order.
    pub fn zd_box(lower: &[i64], upper: &[i64]) -> Result<Self, PatternError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(GroupError::ZeroRank.into());
        }
        let d = lower.len();
        let mut elements = vec![Vec::with_capacity(d)];
        for axis in 0..d {
            let mut next = Vec::new();
            for prefix in &elements {
                for c in lower[axis]..upper[axis] {
                    let mut v: Vec<i64> = prefix.clone();
                    v.push(c);
                    next.push(v);
                }
            }
            elements = next;
        }
        let mut elements: Vec<GroupElement> = elements.into_iter().map(GroupElement::Vector).collect();
        elements.sort();
        Ok(Self::from_parts(
            GroupDescriptor::zd(d),
            WindowShape::Boxed {
                lower: lower.to_vec(),
                upper: upper.to_vec(),
            },
            elements,
        ))
    }

    /// The interval `{0, …, len-1}` ⊆ ℤ.
    pub fn interval(len: usize) -> Self {
        Self::zd_box(&[0], &[len as i64]).expect("one-dimensional box")
    }

    fn from_parts(group: GroupDescriptor, shape: WindowShape, elements: Vec<GroupElement>) -> Self {
        let index = elements.iter().enumerate().map(|(i, g)| (g.clone(), i)).collect();
        Window {
            group,
            shape,
            elements,
            index,
        }
    }

    pub fn group(&self) -> GroupDescriptor {
        self.group
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn index_of(&self, g: &GroupElement) -> Option<usize> {
        self.index.get(g).copied()
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.index.contains_key(g)
    }

    pub fn radius(&self) -> Option<usize> {
        match self.shape {
            WindowShape::Ball { radius } => Some(radius),
            WindowShape::Boxed { .. } => None,
        }
    }

    /// Compile a pattern to window cell indices, or `None` if its support
    /// leaves the window.
    pub fn compile(&self, p: &Pattern) -> Option<CellPattern> {
        let cells = p
            .cells()
            .map(|(g, s)| self.index_of(g).map(|i| (i, s)))
            .collect::<Option<Vec<_>>>()?;
        CellPattern::new(cells)
    }
}

/// A total assignment of symbols to a window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowConfiguration {
    window: Arc<Window>,
    values: Vec<Symbol>,
    k: u8,
}

impl WindowConfiguration {
    pub fn new(window: Arc<Window>, values: Vec<Symbol>, k: u8) -> Result<Self, PatternError> {
        if k < 2 {
            return Err(PatternError::AlphabetTooSmall(k));
        }
        if values.len() != window.len() {
            return Err(PatternError::WrongLength {
                expected: window.len(),
                got: values.len(),
            });
        }
        if let Some(&symbol) = values.iter().find(|&&s| s >= k) {
            return Err(PatternError::SymbolOutOfRange { symbol, k });
        }
        Ok(WindowConfiguration { window, values, k })
    }

    /// Constant configuration.
    pub fn constant(window: Arc<Window>, symbol: Symbol, k: u8) -> Result<Self, PatternError> {
        let n = window.len();
        Self::new(window, vec![symbol; n], k)
    }

    pub fn window(&self) -> &Arc<Window> {
        &self.window
    }

    pub fn values(&self) -> &[Symbol] {
        &self.values
    }

    pub fn alphabet(&self) -> u8 {
        self.k
    }

    pub fn get(&self, g: &GroupElement) -> Option<Symbol> {
        self.window.index_of(g).map(|i| self.values[i])
    }

    /// x ⊇ φ, for φ supported inside the window.
    pub fn occurs(&self, p: &Pattern) -> Result<bool, PatternError> {
        let mut all = true;
        for (g, s) in p.cells() {
            match self.get(g) {
                None => return Err(PatternError::SupportOutsideWindow(g.to_string())),
                Some(v) => all &= v == s,
            }
        }
        Ok(all)
    }

    /// x|_F as a pattern.
    pub fn restrict(&self, f: &[GroupElement]) -> Result<Pattern, PatternError> {
        let cells = f
            .iter()
            .map(|g| {
                self.get(g)
                    .map(|s| (g.clone(), s))
                    .ok_or_else(|| PatternError::SupportOutsideWindow(g.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Pattern::new(cells, self.k)
    }

    /// The whole configuration as a pattern on its window.
    pub fn to_pattern(&self) -> Pattern {
        Pattern::new(
            self.window
                .elements()
                .iter()
                .cloned()
                .zip(self.values.iter().copied()),
            self.k,
        )
        .expect("window nonempty")
    }
}

/// `occurs(φ, x)`.
pub fn occurs(p: &Pattern, x: &WindowConfiguration) -> Result<bool, PatternError> {
    x.occurs(p)
}

/// X_F: the distinct restrictions of `configs` to `f`.
pub fn restriction_set(configs: &[WindowConfiguration], f: &[GroupElement]) -> Result<BTreeSet<Pattern>, PatternError> {
    if f.is_empty() {
        return Err(PatternError::EmptyRestriction);
    }
    if let Some(first) = configs.first() {
        if configs.iter().any(|c| *c.window != *first.window) {
            return Err(PatternError::WindowMismatch);
        }
    }
    configs.iter().map(|c| c.restrict(f)).collect()
}
