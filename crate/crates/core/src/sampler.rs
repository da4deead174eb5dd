//! Moser–Tardos resampling on window instances, exact counting and window
//! entropy estimates.
//!
//! Randomness comes from ChaCha8 keyed by the seed. The draw for cell `c`
//! at its `e`-th (re)sampling reads stream `c` at word offset
//! `e · WORDS_PER_DRAW`, so the sequence of symbols seen by a cell does not
//! depend on the order in which other cells were touched or on how the
//! violation scan is scheduled.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::covers::CylinderFamily;
use crate::group::GroupDescriptor;
use crate::lll::{LllError, WindowInstance};
use crate::pattern::{PatternError, Symbol, Window, WindowConfiguration};
use crate::scalar::Real;

/// Words reserved per draw within a cell's stream.
pub const WORDS_PER_DRAW: u128 = 16;
/// Largest k^{|B|} accepted by the exhaustive routines.
pub const MAX_ENUMERATION: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("resample budget of {budget} exhausted with {violated} constraints still violated")]
    BudgetExhausted { budget: u64, violated: usize },
    #[error("exhaustive enumeration of {k}^{cells} configurations exceeds the 2^24 limit")]
    ScaleExceeded { cells: usize, k: u8 },
    #[error("configuration window differs from the instance window")]
    WindowMismatch,
    #[error("entropy estimates need an amenable group, got {0}")]
    NonAmenable(GroupDescriptor),
    #[error("max_resamples must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Lll(#[from] LllError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ResampleRule {
    /// Resample the violated constraint of lowest canonical index.
    #[serde(rename = "lowest-index")]
    LowestIndex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub max_resamples: u64,
    pub resample_rule: ResampleRule,
}

impl SamplerConfig {
    pub fn new(seed: u64, max_resamples: u64) -> Result<Self, SamplerError> {
        if max_resamples == 0 {
            return Err(SamplerError::ZeroBudget);
        }
        Ok(SamplerConfig {
            seed,
            max_resamples,
            resample_rule: ResampleRule::LowestIndex,
        })
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            max_resamples: 1_000_000,
            resample_rule: ResampleRule::LowestIndex,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleOutcome {
    pub configuration: WindowConfiguration,
    pub resamples: u64,
    /// Times each constraint was resampled, in constraint order.
    pub per_constraint: Vec<u64>,
}

struct CellRng {
    key: [u8; 32],
    k: u8,
}

impl CellRng {
    fn new(seed: u64, k: u8) -> Self {
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(seed).fill(&mut key);
        CellRng { key, k }
    }

    fn draw(&self, cell: usize, epoch: u64) -> Symbol {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(cell as u64);
        rng.set_word_pos(epoch as u128 * WORDS_PER_DRAW);
        rng.gen_range(0..self.k)
    }
}

/// Runs Moser–Tardos resampling until no constraint occurs.
pub fn sample(inst: &WindowInstance, cfg: &SamplerConfig) -> Result<SampleOutcome, SamplerError> {
    if cfg.max_resamples == 0 {
        return Err(SamplerError::ZeroBudget);
    }
    let n = inst.window().len();
    let k = inst.alphabet();
    let rng = CellRng::new(cfg.seed, k);
    let mut values: Vec<Symbol> = (0..n).map(|c| rng.draw(c, 0)).collect();
    let mut epochs = vec![1u64; n];
    let constraints = inst.constraints();
    let mut violated: BTreeSet<usize> = (0..constraints.len())
        .into_par_iter()
        .filter(|&i| constraints[i].cells().matches(&values))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    let mut per_constraint = vec![0u64; constraints.len()];
    let mut resamples = 0u64;
    while let Some(&i) = violated.first() {
        if resamples == cfg.max_resamples {
            return Err(SamplerError::BudgetExhausted {
                budget: cfg.max_resamples,
                violated: violated.len(),
            });
        }
        resamples += 1;
        per_constraint[i] += 1;
        for &(cell, _) in constraints[i].cells().cells() {
            values[cell] = rng.draw(cell, epochs[cell]);
            epochs[cell] += 1;
        }
        for &(cell, _) in constraints[i].cells().cells() {
            for &j in inst.constraints_at(cell) {
                if constraints[j].cells().matches(&values) {
                    violated.insert(j);
                } else {
                    violated.remove(&j);
                }
            }
        }
    }
    Ok(SampleOutcome {
        configuration: WindowConfiguration::new(inst.window().clone(), values, k)?,
        resamples,
        per_constraint,
    })
}

/// True iff no constraint of the instance occurs in `x`.
pub fn verify_avoidance(x: &WindowConfiguration, inst: &WindowInstance) -> Result<bool, SamplerError> {
    if **x.window() != **inst.window() {
        return Err(SamplerError::WindowMismatch);
    }
    Ok(inst.avoids(x.values()))
}

fn check_scale(cells: usize, k: u8) -> Result<(), SamplerError> {
    let total = (k as u128).checked_pow(cells as u32);
    match total {
        Some(t) if t <= MAX_ENUMERATION => Ok(()),
        _ => Err(SamplerError::ScaleExceeded { cells, k }),
    }
}

/// Depth-first enumeration over cells in a fixed order, checking each
/// constraint as soon as its last cell is assigned.
struct Search<'a> {
    inst: &'a WindowInstance,
    order: Vec<usize>,
    /// Constraints completed at each depth.
    due: Vec<Vec<usize>>,
    values: Vec<Symbol>,
}

impl<'a> Search<'a> {
    fn new(inst: &'a WindowInstance, order: Vec<usize>) -> Self {
        let n = inst.window().len();
        let mut position = vec![0usize; n];
        for (d, &c) in order.iter().enumerate() {
            position[c] = d;
        }
        let mut due = vec![Vec::new(); n];
        for (i, c) in inst.constraints().iter().enumerate() {
            let last = c.cells().cells().iter().map(|&(cell, _)| position[cell]).max().unwrap_or(0);
            due[last].push(i);
        }
        Search {
            inst,
            order,
            due,
            values: vec![0; n],
        }
    }

    fn ok_at(&self, depth: usize) -> bool {
        let cs = self.inst.constraints();
        !self.due[depth].iter().any(|&i| cs[i].cells().matches(&self.values))
    }

    /// Number of valid completions from `depth` to `end`.
    fn count(&mut self, depth: usize, end: usize) -> u64 {
        if depth == end {
            return 1;
        }
        let cell = self.order[depth];
        let mut total = 0;
        for s in 0..self.inst.alphabet() {
            self.values[cell] = s;
            if self.ok_at(depth) {
                total += self.count(depth + 1, end);
            }
        }
        total
    }

    /// Whether a valid completion exists from `depth`.
    fn extends(&mut self, depth: usize) -> bool {
        if depth == self.order.len() {
            return true;
        }
        let cell = self.order[depth];
        for s in 0..self.inst.alphabet() {
            self.values[cell] = s;
            if self.ok_at(depth) && self.extends(depth + 1) {
                return true;
            }
        }
        false
    }

    /// Number of valid assignments of the first `prefix` cells that extend
    /// to the whole window.
    fn count_extendable(&mut self, depth: usize, prefix: usize) -> u64 {
        if depth == prefix {
            return u64::from(self.extends(depth));
        }
        let cell = self.order[depth];
        let mut total = 0;
        for s in 0..self.inst.alphabet() {
            self.values[cell] = s;
            if self.ok_at(depth) {
                total += self.count_extendable(depth + 1, prefix);
            }
        }
        total
    }
}

impl Search<'_> {
    fn collect_extendable(&mut self, depth: usize, prefix: usize, out: &mut Vec<Vec<Symbol>>) {
        if depth == prefix {
            if self.extends(depth) {
                out.push(self.order[..prefix].iter().map(|&c| self.values[c]).collect());
            }
            return;
        }
        let cell = self.order[depth];
        for s in 0..self.inst.alphabet() {
            self.values[cell] = s;
            if self.ok_at(depth) {
                self.collect_extendable(depth + 1, prefix, out);
            }
        }
    }
}

/// Exact |Forb_B| by pruned enumeration.
pub fn brute_force_count(inst: &WindowInstance) -> Result<u64, SamplerError> {
    let n = inst.window().len();
    check_scale(n, inst.alphabet())?;
    let mut search = Search::new(inst, (0..n).collect());
    Ok(search.count(0, n))
}

/// Exact |(Forb_B)_F|: patterns on the cells `f` that extend to a
/// configuration of the window avoiding every constraint.
pub fn count_restrictions(inst: &WindowInstance, f: &[usize]) -> Result<u64, SamplerError> {
    let n = inst.window().len();
    check_scale(n, inst.alphabet())?;
    let inside: HashSet<usize> = f.iter().copied().collect();
    let mut order: Vec<usize> = f.to_vec();
    order.extend((0..n).filter(|c| !inside.contains(c)));
    let mut search = Search::new(inst, order);
    Ok(search.count_extendable(0, f.len()))
}

/// The patterns counted by [`count_restrictions`], as value vectors in the
/// order of `f`, sorted.
pub fn restriction_patterns(inst: &WindowInstance, f: &[usize]) -> Result<Vec<Vec<Symbol>>, SamplerError> {
    let n = inst.window().len();
    check_scale(n, inst.alphabet())?;
    let inside: HashSet<usize> = f.iter().copied().collect();
    let mut order: Vec<usize> = f.to_vec();
    order.extend((0..n).filter(|c| !inside.contains(c)));
    let mut search = Search::new(inst, order);
    let mut out = Vec::new();
    search.collect_extendable(0, f.len(), &mut out);
    out.sort();
    Ok(out)
}

/// log₂|(Forb_B)_F| / |F| with F = [0, n)^d and B = F padded by `padding`
/// on every side (default: the largest pattern diameter).
///
/// Returns −∞ when the restriction set is empty.
pub fn folner_entropy_estimate<T: Real>(
    group: GroupDescriptor,
    base: &CylinderFamily,
    n: usize,
    padding: Option<usize>,
) -> Result<T, SamplerError> {
    let GroupDescriptor::FreeAbelian { d } = group else {
        return Err(SamplerError::NonAmenable(group));
    };
    let pad = padding.unwrap_or_else(|| base.iter().map(|p| p.diameter()).max().unwrap_or(0)) as i64;
    let lower = vec![-pad; d];
    let upper = vec![n as i64 + pad; d];
    let window = Arc::new(Window::zd_box(&lower, &upper)?);
    check_scale(window.len(), base.alphabet())?;
    let f_window = Window::zd_box(&vec![0; d], &vec![n as i64; d])?;
    let f: Vec<usize> = f_window
        .elements()
        .iter()
        .map(|g| window.index_of(g).expect("F inside B"))
        .collect();
    let inst = WindowInstance::new(window, base.clone())?;
    let count = count_restrictions(&inst, &f)?;
    if count == 0 {
        return Ok(T::neg_infinity());
    }
    Ok(T::from_u64(count).expect("count").log2() / T::from_usize_lossy(f.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lll::{canonical_witness, check_correctness};
    use crate::pattern::Pattern;
    use proptest::prelude::*;

    fn digits(s: &str, offset: i64) -> Pattern {
        Pattern::from_digits(s, offset, 2).unwrap()
    }

    fn instance(pats: &[&str], len: usize) -> WindowInstance {
        let base = CylinderFamily::new(pats.iter().map(|s| digits(s, 0)), 2).unwrap();
        WindowInstance::new(Arc::new(Window::interval(len)), base).unwrap()
    }

    /// Independent oracle: filter all binary strings by substring search.
    fn strings_avoiding(len: usize, bad: &[&str]) -> Vec<String> {
        (0..1u32 << len)
            .map(|m| (0..len).map(|i| if m >> i & 1 == 1 { '1' } else { '0' }).collect::<String>())
            .filter(|s| !bad.iter().any(|b| s.contains(b)))
            .collect()
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_count(&instance(&[], 8)).unwrap(), 256);
        assert_eq!(brute_force_count(&instance(&["000"], 8)).unwrap(), 149);
        // t(n) = t(n-1) + t(n-2) + t(n-3)
        let mut t = vec![1u64, 2, 4];
        for i in 3..=14 {
            t.push(t[i - 1] + t[i - 2] + t[i - 3]);
        }
        for len in 3..=14 {
            assert_eq!(brute_force_count(&instance(&["000"], len)).unwrap(), t[len]);
        }
        assert_eq!(brute_force_count(&instance(&["0", "1"], 4)).unwrap(), 0);
        assert!(matches!(
            brute_force_count(&instance(&[], 25)),
            Err(SamplerError::ScaleExceeded { .. })
        ));
    }

    #[test]
    fn counts_match_string_oracle() {
        for bad in [&["000"][..], &["11"], &["010", "11"], &["0110", "101"]] {
            for len in 4..=12 {
                assert_eq!(
                    brute_force_count(&instance(bad, len)).unwrap() as usize,
                    strings_avoiding(len, bad).len()
                );
            }
        }
    }

    #[test]
    fn sampler_examples() {
        let empty = instance(&[], 8);
        let out = sample(&empty, &SamplerConfig::new(3, 10).unwrap()).unwrap();
        assert_eq!(out.resamples, 0);

        let inst = instance(&["000"], 8);
        for seed in 1..=100 {
            let out = sample(&inst, &SamplerConfig::new(seed, 100_000).unwrap()).unwrap();
            assert!(verify_avoidance(&out.configuration, &inst).unwrap());
            let again = sample(&inst, &SamplerConfig::new(seed, 100_000).unwrap()).unwrap();
            assert_eq!(out, again);
        }

        let win = Arc::new(Window::interval(4));
        let impossible = WindowInstance::from_patterns(win, [digits("0", 1), digits("1", 1)], 2).unwrap();
        assert!(matches!(
            sample(&impossible, &SamplerConfig::new(0, 50).unwrap()),
            Err(SamplerError::BudgetExhausted { budget: 50, .. })
        ));
        assert!(SamplerConfig::new(0, 0).is_err());
    }

    #[test]
    fn avoidance_examples() {
        let win = Arc::new(Window::interval(8));
        let x = WindowConfiguration::new(win.clone(), vec![0, 0, 1, 0, 0, 1, 0, 1], 2).unwrap();
        assert!(verify_avoidance(&x, &instance(&[], 8)).unwrap());
        assert!(verify_avoidance(&x, &instance(&["000"], 8)).unwrap());
        let zeros = WindowConfiguration::constant(win, 0, 2).unwrap();
        assert!(!verify_avoidance(&zeros, &instance(&["000"], 8)).unwrap());
        assert!(matches!(
            verify_avoidance(&zeros, &instance(&["000"], 9)),
            Err(SamplerError::WindowMismatch)
        ));
    }

    #[test]
    fn rng_draws_are_stable_per_cell() {
        let rng = CellRng::new(42, 5);
        let a: Vec<_> = (0..20).map(|e| rng.draw(3, e)).collect();
        let other = CellRng::new(42, 5);
        let _ = other.draw(7, 0);
        let b: Vec<_> = (0..20).map(|e| other.draw(3, e)).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|&s| s < 5));
        let c: Vec<_> = (0..20).map(|e| CellRng::new(43, 5).draw(3, e)).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn entropy_examples() {
        let z = GroupDescriptor::zd(1);
        for n in 1..=10 {
            let e: f64 = folner_entropy_estimate(z, &CylinderFamily::empty(2), n, None).unwrap();
            assert_eq!(e, 1.0);
        }
        let fam = CylinderFamily::new([digits("000", 0)], 2).unwrap();
        let e: f64 = folner_entropy_estimate(z, &fam, 8, None).unwrap();
        // every no-000 word of length 8 extends (pad with 1s): 149 of them
        assert_eq!(strings_avoiding(8, &["000"]).len(), 149);
        assert!((e - 149f64.log2() / 8.0).abs() < 1e-12);
        assert!((e - 0.902_396).abs() < 1e-6);

        let both = CylinderFamily::new([digits("0", 0), digits("1", 0)], 2).unwrap();
        let e: f64 = folner_entropy_estimate(z, &both, 3, None).unwrap();
        assert_eq!(e, f64::NEG_INFINITY);
        assert!(matches!(
            folner_entropy_estimate::<f64>(GroupDescriptor::free(2), &fam, 3, None),
            Err(SamplerError::NonAmenable(_))
        ));
        let z2 = GroupDescriptor::zd(2);
        let e: f64 = folner_entropy_estimate(z2, &CylinderFamily::empty(2), 2, Some(1)).unwrap();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn restriction_patterns_match_count() {
        let inst = instance(&["000"], 10);
        let f: Vec<usize> = (2..6).collect();
        let pats = restriction_patterns(&inst, &f).unwrap();
        assert_eq!(pats.len() as u64, count_restrictions(&inst, &f).unwrap());
        assert_eq!(pats.len(), strings_avoiding(4, &["000"]).len());
        assert!(!pats.contains(&vec![0, 0, 0, 1]));
    }

    #[test]
    fn restriction_count_padding_monotone() {
        let z = GroupDescriptor::zd(1);
        let fam = CylinderFamily::new([digits("0110", 0), digits("11", 0)], 2).unwrap();
        let mut last = f64::INFINITY;
        for pad in 0..6 {
            let e: f64 = folner_entropy_estimate(z, &fam, 6, Some(pad)).unwrap();
            assert!(e <= last + 1e-15);
            last = e;
        }
    }

    #[test]
    fn mt_resample_statistics() {
        // single-pattern family with h + σ_h < 1
        let ten = CylinderFamily::new([digits("0000000000", 0)], 2).unwrap();
        let inst = WindowInstance::new(Arc::new(Window::interval(24)), ten).unwrap();
        let h = 0.9;
        let w = canonical_witness(&inst, h);
        assert!(check_correctness(&inst, &w).unwrap().ok);
        let seeds = 1000;
        let mut totals = vec![0u64; inst.len()];
        for seed in 0..seeds {
            let out = sample(&inst, &SamplerConfig::new(seed, 1_000_000).unwrap()).unwrap();
            for (t, c) in totals.iter_mut().zip(out.per_constraint) {
                *t += c;
            }
        }
        for (i, &t) in totals.iter().enumerate() {
            let mean = t as f64 / seeds as f64;
            let x = w.values()[i];
            assert!(mean <= 3.0 * x / (1.0 - x), "constraint {i}: {mean}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn samples_avoid_and_counts_bound(len in 6usize..14, seed in any::<u64>(), pat in "[01]{3,5}") {
            let inst = instance(&[pat.as_str()], len);
            let count = brute_force_count(&inst).unwrap();
            prop_assert_eq!(count as usize, strings_avoiding(len, &[pat.as_str()]).len());
            if count > 0 {
                let out = sample(&inst, &SamplerConfig::new(seed, 1_000_000).unwrap()).unwrap();
                prop_assert!(verify_avoidance(&out.configuration, &inst).unwrap());
            }
        }
    }
}
