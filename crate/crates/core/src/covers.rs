//! Width and breadth functionals on finite cylinder families.
//!
//! For a family 𝒰 of cylinders U_φ and a parameter h:
//!
//! * `ρ_h(𝒰) = Σ 2^{-h|φ|}` and the width `𝔴(𝒰) = inf{h ≥ 0 : ρ_h(𝒰) ≤ 1}`;
//! * `σ_h(𝒰) = Σ |φ|·(-log₂(1 - 2^{-h|φ|}))` and the breadth
//!   `𝔟(𝒰) = sup{h > 0 : h + σ_h(𝒰) < log₂ k}`.
//!
//! Windowed helpers evaluate covers against explicit configuration lists;
//! [`window_set_width`] is an exhaustive oracle for tiny windows.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::group::{GroupElement, Side};
use crate::pattern::{Pattern, PatternError, Symbol, WindowConfiguration};
use crate::scalar::{bisect, compensated_sum, log2_alphabet, Real};

/// Default bisection tolerance for width and breadth.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Default grid size for the breadth scan.
pub const DEFAULT_BREADTH_GRID: usize = 4096;
/// Largest window handled by [`window_set_width`].
pub const MAX_WIDTH_ORACLE_WINDOW: usize = 6;
/// Largest alphabet handled by [`window_set_width`].
pub const MAX_WIDTH_ORACLE_ALPHABET: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverError {
    #[error("family members use alphabet {found}, expected {expected}")]
    AlphabetMismatch { expected: u8, found: u8 },
    #[error("width oracle limited to windows of ≤ {MAX_WIDTH_ORACLE_WINDOW} cells and k ≤ {MAX_WIDTH_ORACLE_ALPHABET} (got {cells} cells, k = {k})")]
    ScaleExceeded { cells: usize, k: u8 },
    #[error("product family would have {0} members, above the expansion limit")]
    TooManyMembers(u128),
    #[error("merged factors overlap at {0}; translates are not disjoint")]
    OverlappingFactors(String),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

/// A finite set of cylinders U_φ over a common alphabet, held as their
/// patterns in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CylinderFamily {
    members: Vec<Pattern>,
    k: u8,
}

impl CylinderFamily {
    /// Builds a family, dropping duplicate members.
    pub fn new(members: impl IntoIterator<Item = Pattern>, k: u8) -> Result<Self, CoverError> {
        let set: BTreeSet<Pattern> = members.into_iter().collect();
        if let Some(p) = set.iter().find(|p| p.alphabet() != k) {
            return Err(CoverError::AlphabetMismatch {
                expected: k,
                found: p.alphabet(),
            });
        }
        if k < 2 {
            return Err(PatternError::AlphabetTooSmall(k).into());
        }
        Ok(CylinderFamily {
            members: set.into_iter().collect(),
            k,
        })
    }

    pub fn empty(k: u8) -> Self {
        CylinderFamily { members: Vec::new(), k }
    }

    pub fn alphabet(&self) -> u8 {
        self.k
    }

    pub fn members(&self) -> &[Pattern] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Pattern> {
        self.members.iter()
    }

    /// Set union with another family over the same alphabet.
    pub fn union(&self, other: &CylinderFamily) -> Result<CylinderFamily, CoverError> {
        CylinderFamily::new(self.members.iter().chain(other.members.iter()).cloned(), self.k)
    }

    pub fn max_pattern_len(&self) -> usize {
        self.members.iter().map(Pattern::len).max().unwrap_or(0)
    }

    /// ρ_h(𝒰) = Σ 2^{-h|φ|}.
    pub fn rho<T: Real>(&self, h: T) -> T {
        compensated_sum(self.members.iter().map(|p| p.weight_pow(h)))
    }

    /// σ_h(𝒰) = Σ |φ|·(-log₂(1 - 2^{-h|φ|})). Infinite at h = 0 for a
    /// nonempty family.
    pub fn sigma<T: Real>(&self, h: T) -> T {
        compensated_sum(self.members.iter().map(|p| sigma_term(p.len(), h)))
    }

    /// 𝔴(𝒰): the root of ρ_h = 1 when ρ_0 > 1, else 0.
    pub fn width<T: Real>(&self, tol: T) -> T {
        width_from_sizes(self.members.iter().map(Pattern::len), tol)
    }

    /// 𝔟(𝒰), see [`family_breadth`].
    pub fn breadth<T: Real>(&self, grid: usize, tol: T) -> T {
        family_breadth(self, grid, tol)
    }
}

impl<'a> IntoIterator for &'a CylinderFamily {
    type Item = &'a Pattern;
    type IntoIter = std::slice::Iter<'a, Pattern>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}

/// σ_h of a single cylinder of support size `len`.
pub fn sigma_term<T: Real>(len: usize, h: T) -> T {
    let n = T::from_usize_lossy(len);
    -n * (h * n).exp2_neg().log2_1m()
}

/// Width of a family given only its support sizes.
pub fn width_from_sizes<T: Real>(sizes: impl Iterator<Item = usize> + Clone, tol: T) -> T {
    let count = sizes.clone().count();
    if count <= 1 {
        return T::zero();
    }
    let min_size = sizes.clone().min().unwrap_or(1).max(1);
    let rho = |h: T| compensated_sum(sizes.clone().map(|s| (h * T::from_usize_lossy(s)).exp2_neg()));
    // ρ_h ≤ count · 2^{-h·min} ≤ 1 at h = log₂(count)/min.
    let hi = T::from_usize_lossy(count).log2() / T::from_usize_lossy(min_size);
    if rho(hi) > T::one() {
        return hi;
    }
    let (lo, hi) = bisect(T::zero(), hi, tol, true, |h| rho(h) > T::one());
    lo + (hi - lo) / T::lit(2.0)
}

/// `rho(family, h)`.
pub fn rho<T: Real>(family: &CylinderFamily, h: T) -> T {
    family.rho(h)
}

/// `sigma(family, h)`.
pub fn sigma<T: Real>(family: &CylinderFamily, h: T) -> T {
    family.sigma(h)
}

/// `family_width(family, tol)`.
pub fn family_width<T: Real>(family: &CylinderFamily, tol: T) -> T {
    family.width(tol)
}

/// 𝔟(𝒰) = sup{h > 0 : h + σ_h(𝒰) < log₂ k}.
///
/// `g(h) = h + σ_h` need not be monotone, so g is scanned on a uniform grid
/// over (0, log₂ k]; the largest feasible grid point is then pushed up by
/// bisection against the next (infeasible) grid point. Returns 0 when no
/// grid point is feasible.
pub fn family_breadth<T: Real>(family: &CylinderFamily, grid: usize, tol: T) -> T {
    let grid = grid.max(2);
    let log2k: T = log2_alphabet(family.alphabet());
    let feasible = |h: T| h + family.sigma(h) < log2k;
    let step = log2k / T::from_usize_lossy(grid);
    let best = (1..=grid).rev().find(|&i| feasible(step * T::from_usize_lossy(i)));
    match best {
        None => T::zero(),
        Some(i) => {
            let lo = step * T::from_usize_lossy(i);
            if i == grid {
                return lo;
            }
            let hi = step * T::from_usize_lossy(i + 1);
            let (lo, _) = bisect(lo, hi, tol, true, feasible);
            lo
        }
    }
}

/// A certified breadth lower bound: `h + σ_h(𝒰) < log₂ k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BreadthCertificate<T> {
    pub h: T,
    pub log2_k: T,
    /// σ_h of everything certified, including any analytic tail.
    pub sigma: T,
    /// `log₂ k − h − σ`, strictly positive.
    pub slack: T,
}

impl<T: Real> BreadthCertificate<T> {
    /// Certifies `h` for a family whose σ_h is `sigma`, or `None` when the
    /// slack is not positive.
    pub fn from_sigma(k: u8, h: T, sigma: T) -> Option<Self> {
        let log2_k = log2_alphabet(k);
        let slack = log2_k - h - sigma;
        (slack > T::zero() && h > T::zero()).then_some(BreadthCertificate { h, log2_k, sigma, slack })
    }

    pub fn for_family(family: &CylinderFamily, h: T) -> Option<Self> {
        Self::from_sigma(family.alphabet(), h, family.sigma(h))
    }

    /// As [`for_family`](Self::for_family), adding an analytic σ tail bound
    /// for cylinders that are not materialized.
    pub fn with_tail(family: &CylinderFamily, h: T, tail_sigma: T) -> Option<Self> {
        Self::from_sigma(family.alphabet(), h, family.sigma(h) + tail_sigma)
    }
}

/// Product family `{ ⋂_i τ_i(U_i) : U_i ∈ ℱ }` whose factors are pairwise
/// disjoint translates of a base family ℱ.
///
/// With `Side::Left` the i-th factor is `γ_i⁻¹·U_i` (support `dom(U_i)γ_i`);
/// with `Side::Right` it is `U_i·γ_i⁻¹` (support `γ_i dom(U_i)`). Members
/// are never stored: there are |ℱ|^N of them.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProductFamily {
    side: Side,
    translates: Vec<GroupElement>,
    base: CylinderFamily,
    blocks: Vec<Vec<Pattern>>,
}

impl ProductFamily {
    pub fn new(side: Side, base: CylinderFamily, translates: Vec<GroupElement>) -> Result<Self, CoverError> {
        let blocks: Vec<Vec<Pattern>> = translates
            .iter()
            .map(|g| {
                let inv = g.inverse();
                base.iter()
                    .map(|p| match side {
                        Side::Left => p.left_shift(&inv),
                        Side::Right => p.right_shift(&inv),
                    })
                    .collect()
            })
            .collect();
        let mut seen: HashMap<&GroupElement, usize> = HashMap::new();
        for (i, block) in blocks.iter().enumerate() {
            for g in block.iter().flat_map(|p| p.support()) {
                if let Some(&j) = seen.get(g) {
                    if j != i {
                        return Err(CoverError::OverlappingFactors(g.to_string()));
                    }
                }
                seen.insert(g, i);
            }
        }
        Ok(ProductFamily {
            side,
            translates,
            base,
            blocks,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn translates(&self) -> &[GroupElement] {
        &self.translates
    }

    pub fn base(&self) -> &CylinderFamily {
        &self.base
    }

    /// Number of factors N.
    pub fn factors(&self) -> usize {
        self.blocks.len()
    }

    /// The shifted copies of ℱ making up each factor.
    pub fn blocks(&self) -> &[Vec<Pattern>] {
        &self.blocks
    }

    pub fn alphabet(&self) -> u8 {
        self.base.alphabet()
    }

    /// |ℱ|^N, saturating.
    pub fn member_count(&self) -> u128 {
        (self.base.len() as u128).saturating_pow(self.blocks.len() as u32)
    }

    /// Number of members of each support size: coefficients of
    /// `(Σ_{U∈ℱ} z^{|U|})^N`.
    pub fn size_distribution<T: Real>(&self) -> Vec<T> {
        let mut dist = vec![T::one()];
        for _ in 0..self.blocks.len() {
            let mut next = vec![T::zero(); dist.len() + self.base.max_pattern_len()];
            for (s, &c) in dist.iter().enumerate() {
                if c == T::zero() {
                    continue;
                }
                for p in self.base.iter() {
                    next[s + p.len()] = next[s + p.len()] + c;
                }
            }
            dist = next;
        }
        dist
    }

    /// ρ_h = ρ_h(ℱ)^N, since weights multiply over disjoint factors.
    pub fn rho<T: Real>(&self, h: T) -> T {
        self.base.rho(h).powi(self.blocks.len() as i32)
    }

    /// Exact σ_h summed over all members via the size distribution.
    pub fn sigma<T: Real>(&self, h: T) -> T {
        if self.base.is_empty() {
            return T::zero();
        }
        compensated_sum(
            self.size_distribution::<T>()
                .into_iter()
                .enumerate()
                .filter(|(_, c)| *c > T::zero())
                .map(|(s, c)| c * sigma_term(s, h)),
        )
    }

    /// Iterates members as merged patterns, in lexicographic order of the
    /// factor choices.
    pub fn members(&self) -> impl Iterator<Item = Pattern> + '_ {
        let radix = self.base.len();
        let n = self.blocks.len();
        let total = if radix == 0 { 0 } else { self.member_count() };
        (0..total).map(move |mut idx| {
            let mut choice = vec![0usize; n];
            for slot in choice.iter_mut().rev() {
                *slot = (idx % radix as u128) as usize;
                idx /= radix as u128;
            }
            let cells = choice
                .iter()
                .enumerate()
                .flat_map(|(i, &c)| self.blocks[i][c].cells().map(|(g, s)| (g.clone(), s)));
            Pattern::new(cells, self.alphabet()).expect("disjoint factors merge without conflict")
        })
    }

    /// Materializes all members, refusing above `limit`.
    pub fn to_family(&self, limit: u128) -> Result<CylinderFamily, CoverError> {
        let count = self.member_count();
        if count > limit {
            return Err(CoverError::TooManyMembers(count));
        }
        CylinderFamily::new(self.members(), self.alphabet())
    }
}

/// True iff every configuration extends some member (windowed `X ⊆ ⋃𝒰`).
pub fn is_window_cover(family: &CylinderFamily, configs: &[WindowConfiguration]) -> Result<bool, CoverError> {
    let mut covered = vec![false; configs.len()];
    for p in family {
        for (slot, x) in covered.iter_mut().zip(configs) {
            if x.occurs(p)? {
                *slot = true;
            }
        }
    }
    Ok(covered.into_iter().all(|c| c))
}

type Bits = Vec<u64>;

fn bit_test(b: &Bits, i: usize) -> bool {
    b[i / 64] >> (i % 64) & 1 == 1
}

fn bit_set(b: &mut Bits, i: usize) {
    b[i / 64] |= 1 << (i % 64);
}

fn bits_subset(a: &Bits, b: &Bits) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

struct CoverCandidate {
    pattern: Pattern,
    covers: Bits,
}

struct CoverSearch<'a, T> {
    candidates: &'a [CoverCandidate],
    /// For each config, the candidates covering it.
    by_config: Vec<Vec<usize>>,
    cost: Vec<T>,
    n_configs: usize,
    best: T,
    best_choice: Vec<usize>,
}

impl<T: Real> CoverSearch<'_, T> {
    fn run(&mut self, covered: &mut Vec<u32>, chosen: &mut Vec<usize>, acc: T) {
        if acc >= self.best {
            return;
        }
        // branch on the uncovered config with the fewest options
        let mut target = None;
        let mut fewest = usize::MAX;
        for c in 0..self.n_configs {
            if covered[c] == 0 && self.by_config[c].len() < fewest {
                fewest = self.by_config[c].len();
                target = Some(c);
            }
        }
        let Some(target) = target else {
            self.best = acc;
            self.best_choice = chosen.clone();
            return;
        };
        let options = self.by_config[target].clone();
        for cand in options {
            let cost = acc + self.cost[cand];
            if cost >= self.best {
                continue;
            }
            let cover = &self.candidates[cand].covers;
            for c in 0..self.n_configs {
                if bit_test(cover, c) {
                    covered[c] += 1;
                }
            }
            chosen.push(cand);
            self.run(covered, chosen, cost);
            chosen.pop();
            for c in 0..self.n_configs {
                if bit_test(cover, c) {
                    covered[c] -= 1;
                }
            }
        }
    }
}

/// Exact width of a window configuration set over covers whose members have
/// support ⊆ window and size ≤ `max_support`.
///
/// Decides "some cover has ρ_h ≤ 1" by branch-and-bound weighted set cover,
/// bisects on h, and returns the width of the optimal cover found at the
/// upper end of the final bracket. Refuses windows above
/// [`MAX_WIDTH_ORACLE_WINDOW`] cells or alphabets above
/// [`MAX_WIDTH_ORACLE_ALPHABET`].
pub fn window_set_width<T: Real>(configs: &[WindowConfiguration], max_support: usize, tol: T) -> Result<T, CoverError> {
    let Some(first) = configs.first() else {
        return Ok(T::zero());
    };
    let window = first.window().clone();
    let k = first.alphabet();
    if window.len() > MAX_WIDTH_ORACLE_WINDOW || k > MAX_WIDTH_ORACLE_ALPHABET {
        return Err(CoverError::ScaleExceeded { cells: window.len(), k });
    }
    if configs.iter().any(|c| **c.window() != *window) {
        return Err(PatternError::WindowMismatch.into());
    }
    let distinct: BTreeSet<Vec<Symbol>> = configs.iter().map(|c| c.values().to_vec()).collect();
    let distinct: Vec<Vec<Symbol>> = distinct.into_iter().collect();
    let n_configs = distinct.len();
    let words = n_configs.div_ceil(64);

    // Candidate patterns are the restrictions of the configurations to
    // subsets of size ≤ max_support; anything else covers nothing.
    let n = window.len();
    let mut by_pattern: HashMap<(u32, Vec<Symbol>), Bits> = HashMap::new();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize > max_support {
            continue;
        }
        for (ci, vals) in distinct.iter().enumerate() {
            let key: Vec<Symbol> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| vals[i]).collect();
            let bits = by_pattern.entry((mask, key)).or_insert_with(|| vec![0; words]);
            bit_set(bits, ci);
        }
    }
    let mut raw: Vec<(u32, Vec<Symbol>, Bits)> = by_pattern.into_iter().map(|((m, v), b)| (m, v, b)).collect();
    raw.sort();
    // Drop dominated candidates: same or smaller coverage with a support
    // that is no larger (so no cheaper at any h).
    let mut keep = vec![true; raw.len()];
    for i in 0..raw.len() {
        for j in 0..raw.len() {
            if i == j || !keep[j] {
                continue;
            }
            let (si, sj) = (raw[i].0.count_ones(), raw[j].0.count_ones());
            if sj >= si && bits_subset(&raw[i].2, &raw[j].2) && (sj > si || raw[i].2 != raw[j].2 || j < i) {
                keep[i] = false;
                break;
            }
        }
    }
    let elements = window.elements();
    let candidates: Vec<CoverCandidate> = raw
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|((mask, vals, covers), _)| {
            let cells = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| elements[i].clone()).zip(vals);
            CoverCandidate {
                pattern: Pattern::new(cells, k).expect("restriction of a configuration"),
                covers,
            }
        })
        .collect();
    let mut by_config = vec![Vec::new(); n_configs];
    for (i, c) in candidates.iter().enumerate() {
        for (cfg, list) in by_config.iter_mut().enumerate() {
            if bit_test(&c.covers, cfg) {
                list.push(i);
            }
        }
    }

    let min_cover = |h: T| -> Option<Vec<usize>> {
        let cost: Vec<T> = candidates.iter().map(|c| c.pattern.weight_pow(h)).collect();
        let mut lists = by_config.clone();
        for l in lists.iter_mut() {
            l.sort_by(|&a, &b| cost[a].partial_cmp(&cost[b]).unwrap().then(a.cmp(&b)));
        }
        let mut search = CoverSearch {
            candidates: &candidates,
            by_config: lists,
            cost,
            n_configs,
            best: T::one() + T::epsilon() * T::lit(64.0),
            best_choice: Vec::new(),
        };
        search.run(&mut vec![0; n_configs], &mut Vec::new(), T::zero());
        (search.best <= T::one() + T::epsilon() * T::lit(64.0) && search.best_choice.len() + n_configs > 0
            && search.best < T::one() + T::epsilon() * T::lit(64.0))
        .then_some(search.best_choice)
    };
    let width_of = |choice: &[usize]| width_from_sizes(choice.iter().map(|&i| candidates[i].pattern.len()), tol);

    if let Some(choice) = min_cover(T::zero()) {
        return Ok(width_of(&choice));
    }
    let mut hi = T::one();
    let mut found = min_cover(hi);
    while found.is_none() {
        hi = hi * T::lit(2.0);
        found = min_cover(hi);
    }
    let (_, hi) = bisect(T::zero(), hi, tol, true, |h| min_cover(h).is_none());
    let choice = min_cover(hi).or(found).expect("a cover exists at the upper bracket");
    Ok(width_of(&choice))
}
