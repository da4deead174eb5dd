//! Intersection families that push pointwise width up, the augmented cover
//! built from them, and the freeness-forcing patterns.
//!
//! Given ℱ with 𝔴(ℱ) < h, the left family is
//! `𝒱 = { ⋂_{i≤N} γ_i⁻¹·U_i : U_i ∈ ℱ }` with the γ_i chosen so the translated
//! domains `dom(U)γ_i` are pairwise disjoint. Any x avoiding 𝒱 has some
//! translate γ_i·x outside ⋃ℱ. N is the least integer with
//! `c₁c₂·N·ρ_h(ℱ)^N < ε`, where `c₁ = max|U|` and `c₂ = 2^h·|log₂(1 − 2^{-h})|`.
//! The right family 𝒲 is the mirror image under the right action.
//!
//! 𝒱 has |ℱ|^N members, so it is kept as a [`ProductFamily`] and σ_h is
//! evaluated from its size distribution.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::covers::{BreadthCertificate, CoverError, CylinderFamily, ProductFamily};
use crate::group::{GroupDescriptor, GroupElement, Side};
use crate::pattern::{Pattern, PatternError, WindowConfiguration};
use crate::scalar::{compensated_sum, log2_alphabet, Real};

/// Hard stop for the N search.
pub const MAX_FACTORS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstructorError {
    #[error("family width {width} is not below h = {h}")]
    WidthNotBelowH { width: f64, h: f64 },
    #[error("family is empty")]
    EmptyFamily,
    #[error("h must be positive and finite, got {0}")]
    BadH(f64),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("no N ≤ {MAX_FACTORS} satisfies the factor inequality")]
    NoFactorCount,
    #[error("σ_h = {sigma} of the built family is not below ε = {epsilon}")]
    SigmaAboveEpsilon { sigma: f64, epsilon: f64 },
    #[error("base cover has no slack: h + σ_h(𝒰) = {total} ≥ log₂ k = {log2_k}")]
    NoSlack { total: f64, log2_k: f64 },
    #[error("augmentation σ {realized} exceeded its budget {budget}")]
    BudgetViolation { realized: f64, budget: f64 },
    #[error("freeness patterns need a nonidentity element")]
    IdentityGamma,
    #[error("no translate of the family fits inside the window")]
    WindowTooSmall,
    #[error("families use alphabet {found}, expected {expected}")]
    AlphabetMismatch { expected: u8, found: u8 },
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

fn f64_of<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `c₁ = max |log₂ d(U)| = max |U|`.
pub fn constant_c1<T: Real>(family: &CylinderFamily) -> T {
    T::from_usize_lossy(family.max_pattern_len())
}

/// `c₂ = 2^h·|log₂(1 − 2^{-h})|`.
pub fn constant_c2<T: Real>(h: T) -> T {
    h.exp2() * h.exp2_neg().log2_1m().abs()
}

/// Least N ≥ 1 with `c₁c₂·N·ρ^N < ε`.
pub fn factor_count<T: Real>(c1c2: T, rho: T, epsilon: T) -> Option<usize> {
    (1..=MAX_FACTORS).find(|&n| c1c2 * T::from_usize_lossy(n) * rho.powi(n as i32) < epsilon)
}

/// One of the families 𝒱 (left) or 𝒲 (right).
#[derive(Clone, Debug, PartialEq)]
pub struct IntersectionFamily<T> {
    pub product: ProductFamily,
    pub h: T,
    pub epsilon: T,
    pub c1: T,
    pub c2: T,
    pub rho: T,
    /// `c₁c₂·N·ρ^N`, the proof's bound on σ_h.
    pub sigma_bound: T,
    /// Exact σ_h over all members.
    pub sigma: T,
}

impl<T: Real> IntersectionFamily<T> {
    pub fn factors(&self) -> usize {
        self.product.factors()
    }

    pub fn side(&self) -> Side {
        self.product.side()
    }

    /// Expands the members, refusing above `limit`.
    pub fn to_family(&self, limit: u128) -> Result<CylinderFamily, ConstructorError> {
        Ok(self.product.to_family(limit)?)
    }
}

fn check_h<T: Real>(h: T) -> Result<(), ConstructorError> {
    if !(h > T::zero() && h.is_finite()) {
        return Err(ConstructorError::BadH(f64_of(h)));
    }
    Ok(())
}

/// 𝔴(ℱ) < h, tested as ρ_h(ℱ) < 1 so the boundary case is exact.
fn check_width<T: Real>(family: &CylinderFamily, h: T) -> Result<(), ConstructorError> {
    if !(family.rho(h) < T::one()) {
        return Err(ConstructorError::WidthNotBelowH {
            width: f64_of(family.width(T::lit(1e-12))),
            h: f64_of(h),
        });
    }
    Ok(())
}

fn domains(family: &CylinderFamily) -> Vec<Vec<GroupElement>> {
    family.iter().map(|p| p.support().to_vec()).collect()
}

fn group_of(family: &CylinderFamily) -> Option<GroupDescriptor> {
    let g = family.iter().flat_map(|p| p.support()).next()?;
    Some(match g {
        GroupElement::Vector(v) => GroupDescriptor::zd(v.len()),
        GroupElement::Word(_) => {
            let rank = family
                .iter()
                .flat_map(|p| p.support())
                .filter_map(|g| g.as_word())
                .flatten()
                .map(|l| l.generator_index() + 1)
                .max()
                .unwrap_or(1);
            GroupDescriptor::free(rank.max(2))
        }
    })
}

/// Builds the family with an explicit number of factors, skipping the N
/// selection. Used where the window cannot hold the ε-driven N.
pub fn build_family_with_factors<T: Real>(
    family: &CylinderFamily,
    side: Side,
    h: T,
    factors: usize,
) -> Result<IntersectionFamily<T>, ConstructorError> {
    check_h(h)?;
    let group = group_of(family).ok_or(ConstructorError::EmptyFamily)?;
    check_width(family, h)?;
    // left factors sit on dom(U)γ_i, right factors on γ_i dom(U)
    let coset_side = match side {
        Side::Left => Side::Right,
        Side::Right => Side::Left,
    };
    let translates = group.find_disjoint_translates_on(coset_side, &domains(family), factors);
    let product = ProductFamily::new(side, family.clone(), translates)?;
    let c1 = constant_c1(family);
    let c2 = constant_c2(h);
    let rho = family.rho(h);
    let sigma_bound = c1 * c2 * T::from_usize_lossy(factors) * rho.powi(factors as i32);
    let sigma = product.sigma(h);
    Ok(IntersectionFamily {
        product,
        h,
        epsilon: T::infinity(),
        c1,
        c2,
        rho,
        sigma_bound,
        sigma,
    })
}

fn build_family<T: Real>(family: &CylinderFamily, side: Side, h: T, epsilon: T) -> Result<IntersectionFamily<T>, ConstructorError> {
    check_h(h)?;
    if !(epsilon > T::zero()) {
        return Err(ConstructorError::BadEpsilon(f64_of(epsilon)));
    }
    if family.is_empty() {
        return Err(ConstructorError::EmptyFamily);
    }
    check_width(family, h)?;
    let c1c2 = constant_c1::<T>(family) * constant_c2(h);
    let n = factor_count(c1c2, family.rho(h), epsilon).ok_or(ConstructorError::NoFactorCount)?;
    let mut built = build_family_with_factors(family, side, h, n)?;
    built.epsilon = epsilon;
    if !(built.sigma < epsilon) {
        return Err(ConstructorError::SigmaAboveEpsilon {
            sigma: f64_of(built.sigma),
            epsilon: f64_of(epsilon),
        });
    }
    Ok(built)
}

/// 𝒱 for ℱ: translates `γ_i⁻¹·U_i` with disjoint domains `dom(U)γ_i`.
pub fn build_left_family<T: Real>(family: &CylinderFamily, h: T, epsilon: T) -> Result<IntersectionFamily<T>, ConstructorError> {
    build_family(family, Side::Left, h, epsilon)
}

/// 𝒲 for ℱ: translates `U_i·γ_i⁻¹` with disjoint domains `γ_i dom(U)`.
pub fn build_right_family<T: Real>(family: &CylinderFamily, h: T, epsilon: T) -> Result<IntersectionFamily<T>, ConstructorError> {
    build_family(family, Side::Right, h, epsilon)
}

/// `ε_n = (log₂k − h − σ_h(𝒰)) / 2^{n+2}`.
pub fn epsilon_schedule<T: Real>(slack: T, m: usize) -> Vec<T> {
    (0..m).map(|n| slack / T::lit(2.0).powi(n as i32 + 2)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentationPlan<T> {
    base_cover: CylinderFamily,
    h: T,
    bad_families: Vec<CylinderFamily>,
    epsilons: Vec<T>,
    slack: T,
}

impl<T: Real> AugmentationPlan<T> {
    /// Validates the plan and fixes the ε_n schedule.
    pub fn new(base_cover: CylinderFamily, h: T, bad_families: Vec<CylinderFamily>) -> Result<Self, ConstructorError> {
        check_h(h)?;
        let k = base_cover.alphabet();
        for f in &bad_families {
            if f.alphabet() != k {
                return Err(ConstructorError::AlphabetMismatch {
                    expected: k,
                    found: f.alphabet(),
                });
            }
            if f.is_empty() {
                return Err(ConstructorError::EmptyFamily);
            }
            check_width(f, h)?;
        }
        let log2_k: T = log2_alphabet(k);
        let sigma = base_cover.sigma(h);
        let slack = log2_k - h - sigma;
        if !(slack > T::zero()) {
            return Err(ConstructorError::NoSlack {
                total: f64_of(h + sigma),
                log2_k: f64_of(log2_k),
            });
        }
        let epsilons = epsilon_schedule(slack, bad_families.len());
        Ok(AugmentationPlan {
            base_cover,
            h,
            bad_families,
            epsilons,
            slack,
        })
    }

    pub fn base_cover(&self) -> &CylinderFamily {
        &self.base_cover
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn bad_families(&self) -> &[CylinderFamily] {
        &self.bad_families
    }

    pub fn epsilons(&self) -> &[T] {
        &self.epsilons
    }

    /// `log₂k − h − σ_h(𝒰)`.
    pub fn slack(&self) -> T {
        self.slack
    }
}

/// 𝒰′ = 𝒰 ∪ ⋃_n (𝒱_n ∪ 𝒲_n) with its breadth certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedCover<T> {
    pub base: CylinderFamily,
    pub left: Vec<IntersectionFamily<T>>,
    pub right: Vec<IntersectionFamily<T>>,
    pub certificate: BreadthCertificate<T>,
    /// Σ_n σ_h(𝒱_n) + σ_h(𝒲_n).
    pub realized_sigma: T,
    /// Σ_n 2ε_n.
    pub budget: T,
    pub initial_slack: T,
}

impl<T: Real> AugmentedCover<T> {
    /// Materializes 𝒰′ when it has at most `limit` members.
    pub fn to_family(&self, limit: u128) -> Result<CylinderFamily, ConstructorError> {
        let total: u128 = self
            .left
            .iter()
            .chain(&self.right)
            .map(|f| f.product.member_count())
            .fold(self.base.len() as u128, u128::saturating_add);
        if total > limit {
            return Err(CoverError::TooManyMembers(total).into());
        }
        let mut members: BTreeSet<Pattern> = self.base.iter().cloned().collect();
        for f in self.left.iter().chain(&self.right) {
            members.extend(f.product.members());
        }
        Ok(CylinderFamily::new(members, self.base.alphabet())?)
    }
}

pub fn assemble_augmented_cover<T: Real>(plan: &AugmentationPlan<T>) -> Result<AugmentedCover<T>, ConstructorError> {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (f, &eps) in plan.bad_families.iter().zip(&plan.epsilons) {
        left.push(build_left_family(f, plan.h, eps)?);
        right.push(build_right_family(f, plan.h, eps)?);
    }
    let realized_sigma = compensated_sum(left.iter().chain(&right).map(|f| f.sigma));
    let budget = compensated_sum(plan.epsilons.iter().map(|&e| e + e));
    if !(realized_sigma < budget) && !plan.epsilons.is_empty() {
        return Err(ConstructorError::BudgetViolation {
            realized: f64_of(realized_sigma),
            budget: f64_of(budget),
        });
    }
    let sigma = plan.base_cover.sigma(plan.h) + realized_sigma;
    let certificate = BreadthCertificate::from_sigma(plan.base_cover.alphabet(), plan.h, sigma).ok_or(
        ConstructorError::BudgetViolation {
            realized: f64_of(realized_sigma),
            budget: f64_of(budget),
        },
    )?;
    Ok(AugmentedCover {
        base: plan.base_cover.clone(),
        left,
        right,
        certificate,
        realized_sigma,
        budget,
        initial_slack: plan.slack,
    })
}

/// The k patterns `{1 ↦ i, γ ↦ i}`.
pub fn freeness_patterns(gamma: &GroupElement, k: u8) -> Result<CylinderFamily, ConstructorError> {
    if gamma.is_identity() {
        return Err(ConstructorError::IdentityGamma);
    }
    let one = match gamma {
        GroupElement::Vector(v) => GroupElement::zero(v.len()),
        GroupElement::Word(_) => GroupElement::empty_word(),
    };
    let members = (0..k)
        .map(|i| Pattern::new([(one.clone(), i), (gamma.clone(), i)], k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CylinderFamily::new(members, k)?)
}

/// Translates γ for which every member of `family`, moved by γ on `side`,
/// lies in the window of `x`.
fn in_window_translates(x: &WindowConfiguration, family: &CylinderFamily, side: Side) -> Vec<GroupElement> {
    let window = x.window();
    let union: BTreeSet<&GroupElement> = family.iter().flat_map(|p| p.support()).collect();
    let Some(&s0) = union.iter().next() else {
        return Vec::new();
    };
    let mut out = BTreeSet::new();
    for b in window.elements() {
        // left: s₀γ = b; right: γs₀ = b
        let gamma = match side {
            Side::Left => &s0.inverse() * b,
            Side::Right => b * &s0.inverse(),
        };
        let fits = union.iter().all(|s| {
            let moved = match side {
                Side::Left => *s * &gamma,
                Side::Right => &gamma * *s,
            };
            window.contains(&moved)
        });
        if fits {
            out.insert(gamma);
        }
    }
    out.into_iter().collect()
}

/// True iff some in-window translate of x (γ·x for `Left`, x·γ for
/// `Right`) lies outside ⋃ℱ.
pub fn orbit_escape_check(x: &WindowConfiguration, family: &CylinderFamily, side: Side) -> Result<bool, ConstructorError> {
    if family.is_empty() {
        return Ok(true);
    }
    let translates = in_window_translates(x, family, side);
    if translates.is_empty() {
        return Err(ConstructorError::WindowTooSmall);
    }
    for gamma in translates {
        // γ·x ∈ U_φ iff x extends γ⁻¹·φ (support dom(φ)γ); mirrored on the right.
        let inv = gamma.inverse();
        let mut hit = false;
        for p in family {
            let moved = match side {
                Side::Left => p.left_shift(&inv),
                Side::Right => p.right_shift(&inv),
            };
            if x.occurs(&moved)? {
                hit = true;
                break;
            }
        }
        if !hit {
            return Ok(true);
        }
    }
    Ok(false)
}

/// True iff x(δγ) = x(δ) wherever both cells are in the window.
pub fn period_check(x: &WindowConfiguration, gamma: &GroupElement) -> bool {
    x.window().elements().iter().all(|d| match x.get(&(d * gamma)) {
        Some(v) => v == x.get(d).expect("window cell"),
        None => true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lll::WindowInstance;
    use crate::pattern::Window;
    use crate::sampler::{sample, verify_avoidance, SamplerConfig};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn z(i: i64) -> GroupElement {
        GroupElement::vector([i])
    }

    fn w(s: &str) -> GroupElement {
        GroupElement::parse_word(s).unwrap()
    }

    fn config(vals: &[u8], k: u8) -> WindowConfiguration {
        WindowConfiguration::new(Arc::new(Window::interval(vals.len())), vals.to_vec(), k).unwrap()
    }

    #[test]
    fn freeness_examples() {
        let f = freeness_patterns(&z(1), 2).unwrap();
        let expected = CylinderFamily::new(
            [Pattern::from_digits("00", 0, 2).unwrap(), Pattern::from_digits("11", 0, 2).unwrap()],
            2,
        )
        .unwrap();
        assert_eq!(f, expected);
        for k in 2..=5u8 {
            let f = freeness_patterns(&w("ab"), k).unwrap();
            assert_eq!(f.len(), k as usize);
            let width: f64 = f.width(1e-12);
            assert!((width - (k as f64).log2() / 2.0).abs() < 1e-9);
        }
        assert!(matches!(freeness_patterns(&z(0), 2), Err(ConstructorError::IdentityGamma)));
    }

    #[test]
    fn constants_and_n_selection() {
        let f = freeness_patterns(&z(1), 2).unwrap();
        let h = 0.8_f64;
        let rho = f.rho(h);
        assert!((rho - 2.0 * 2f64.powf(-1.6)).abs() < 1e-15);
        assert!((rho - 0.659_754).abs() < 1e-6);
        let c1: f64 = constant_c1(&f);
        let c2 = constant_c2(h);
        assert_eq!(c1, 2.0);
        // 2^0.8 · |log₂(1 − 2^{-0.8})|
        assert!((c2 - 2f64.powf(0.8) * (1.0 - 2f64.powf(-0.8)).log2().abs()).abs() < 1e-14);
        // brute oracle for N: scan n until the inequality holds
        for eps in [0.1, 0.05, 0.01] {
            let mut n = 1;
            while c1 * c2 * n as f64 * rho.powi(n) >= eps {
                n += 1;
            }
            let built = build_left_family(&f, h, eps).unwrap();
            assert_eq!(built.factors(), n as usize);
            assert!(built.sigma < eps);
            assert!(built.sigma <= built.sigma_bound);
            // closed form: 2^N members of size 2N
            let nn = n as f64;
            let closed = 2f64.powi(n) * 2.0 * nn * -(-2f64.powf(-2.0 * nn * h)).ln_1p() / std::f64::consts::LN_2;
            assert!((built.sigma - closed).abs() < 1e-12 * closed.max(1e-300));
        }
        assert_eq!(build_left_family(&f, h, 0.05).unwrap().factors(), 18);
        assert!(matches!(
            build_left_family(&f, 0.5_f64, 0.05),
            Err(ConstructorError::WidthNotBelowH { .. })
        ));
    }

    #[test]
    fn single_factor_degenerate() {
        let f = freeness_patterns(&z(1), 2).unwrap();
        let built = build_left_family(&f, 0.8_f64, 100.0).unwrap();
        assert_eq!(built.factors(), 1);
        let fam = built.to_family(16).unwrap();
        assert_eq!(fam.len(), 2);
        assert!(fam.iter().all(|p| p.len() == 2));
    }

    #[test]
    fn materialized_members_have_summed_sizes() {
        let f = CylinderFamily::new(
            [Pattern::from_digits("00", 0, 2).unwrap(), Pattern::from_digits("111", 0, 2).unwrap()],
            2,
        )
        .unwrap();
        let built = build_family_with_factors(&f, Side::Left, 1.2_f64, 4).unwrap();
        let fam = built.to_family(1 << 10).unwrap();
        assert_eq!(fam.len(), 16);
        let mut sizes: Vec<usize> = fam.iter().map(|p| p.len()).collect();
        sizes.sort();
        // sizes 2a + 3(4 − a) with multiplicity C(4, a)
        let mut expected = Vec::new();
        for a in 0..=4usize {
            let c = [1, 4, 6, 4, 1][a];
            expected.extend(std::iter::repeat(2 * a + 3 * (4 - a)).take(c));
        }
        expected.sort();
        assert_eq!(sizes, expected);
        assert!((fam.sigma(1.2_f64) - built.sigma).abs() < 1e-12);
    }

    #[test]
    fn right_family_on_free_group() {
        let f = CylinderFamily::new([Pattern::new([(w(""), 0), (w("a"), 0)], 2).unwrap()], 2).unwrap();
        let l = build_family_with_factors(&f, Side::Left, 0.5_f64, 3).unwrap();
        let r = build_family_with_factors(&f, Side::Right, 0.5_f64, 3).unwrap();
        let ls: Vec<_> = l.to_family(8).unwrap().iter().map(|p| p.support().to_vec()).collect();
        let rs: Vec<_> = r.to_family(8).unwrap().iter().map(|p| p.support().to_vec()).collect();
        assert_ne!(ls, rs);
        assert_eq!(l.sigma, r.sigma);
        // ℤ: both sides agree
        let g = freeness_patterns(&z(1), 2).unwrap();
        let l = build_left_family(&g, 0.8_f64, 0.1).unwrap();
        let r = build_right_family(&g, 0.8_f64, 0.1).unwrap();
        assert_eq!(l.product.blocks(), r.product.blocks());
    }

    #[test]
    fn free_group_factors_are_disjoint_on_both_sides() {
        for g in GroupDescriptor::free(2).ball(2).into_iter().filter(|g| !g.is_identity()) {
            let f = freeness_patterns(&g, 2).unwrap();
            for side in [Side::Left, Side::Right] {
                let v = build_family_with_factors(&f, side, 0.8_f64, 4).unwrap();
                assert_eq!(v.to_family(64).unwrap().iter().map(|p| p.len()).max(), Some(8), "{g} {side:?}");
            }
        }
    }

    #[test]
    fn schedule_and_assembly() {
        let eps = epsilon_schedule(0.2_f64, 3);
        assert_eq!(eps, vec![0.05, 0.025, 0.0125]);

        let empty = CylinderFamily::empty(2);
        let plan = AugmentationPlan::new(empty.clone(), 0.8_f64, vec![]).unwrap();
        let out = assemble_augmented_cover(&plan).unwrap();
        assert!((out.certificate.slack - 0.2).abs() < 1e-12);

        let f = freeness_patterns(&z(1), 2).unwrap();
        let plan = AugmentationPlan::new(empty.clone(), 0.8_f64, vec![f.clone()]).unwrap();
        let out = assemble_augmented_cover(&plan).unwrap();
        assert!(out.certificate.slack >= 0.1 - 1e-12);
        assert!(out.realized_sigma < 0.1);

        let g = freeness_patterns(&z(2), 2).unwrap();
        let plan = AugmentationPlan::new(empty, 0.8_f64, vec![f, g]).unwrap();
        let e = plan.epsilons();
        assert!((e[0] - 0.2 / 4.0).abs() < 1e-15 && (e[1] - 0.2 / 8.0).abs() < 1e-15);
        let out = assemble_augmented_cover(&plan).unwrap();
        assert!(out.realized_sigma < out.initial_slack / 2.0);

        let one = CylinderFamily::new([Pattern::from_digits("1", 0, 2).unwrap()], 2).unwrap();
        assert!(matches!(
            AugmentationPlan::new(one, 0.8_f64, vec![]),
            Err(ConstructorError::NoSlack { .. })
        ));
    }

    #[test]
    fn escape_and_period_examples() {
        let zeros = config(&[0; 6], 2);
        let far_one = CylinderFamily::new([Pattern::from_digits("1", 0, 2).unwrap()], 2).unwrap();
        assert!(orbit_escape_check(&zeros, &far_one, Side::Left).unwrap());
        let zero = CylinderFamily::new([Pattern::from_digits("0", 0, 2).unwrap()], 2).unwrap();
        assert!(!orbit_escape_check(&zeros, &zero, Side::Left).unwrap());
        assert!(!orbit_escape_check(&zeros, &zero, Side::Right).unwrap());
        let wide = CylinderFamily::new([Pattern::from_digits("0", 0, 2).unwrap(), Pattern::from_digits("0", 9, 2).unwrap()], 2).unwrap();
        assert!(matches!(
            orbit_escape_check(&zeros, &wide, Side::Left),
            Err(ConstructorError::WindowTooSmall)
        ));

        assert!(period_check(&zeros, &z(3)));
        let alt = config(&[0, 1, 0, 1, 0, 1, 0, 1], 2);
        assert!(!period_check(&alt, &z(1)));
        assert!(period_check(&alt, &z(2)));
        assert!(period_check(&alt, &z(-2)));
    }

    #[test]
    fn escape_after_avoiding_left_family() {
        // exhaustive over a 12-cell window with N = 3 factors
        let f = freeness_patterns(&z(1), 2).unwrap();
        let v = build_family_with_factors(&f, Side::Left, 0.8_f64, 3).unwrap().to_family(64).unwrap();
        let win = Arc::new(Window::interval(12));
        let inst = WindowInstance::new(win.clone(), v).unwrap();
        assert!(!inst.is_empty());
        for m in 0..1u32 << 12 {
            let vals: Vec<u8> = (0..12).map(|i| (m >> i & 1) as u8).collect();
            if inst.avoids(&vals) {
                let x = WindowConfiguration::new(win.clone(), vals, 2).unwrap();
                assert!(orbit_escape_check(&x, &f, Side::Left).unwrap());
            }
        }
    }

    #[test]
    fn sampled_configurations_are_aperiodic() {
        let k = 3;
        let mut members = Vec::new();
        for g in GroupDescriptor::zd(1).ball(2).into_iter().filter(|g| !g.is_identity()) {
            members.extend(freeness_patterns(&g, k).unwrap().members().to_vec());
        }
        let base = CylinderFamily::new(members, k).unwrap();
        let inst = WindowInstance::new(Arc::new(Window::interval(12)), base).unwrap();
        for seed in 0..20 {
            let out = sample(&inst, &SamplerConfig::new(seed, 10_000_000).unwrap()).unwrap();
            assert!(verify_avoidance(&out.configuration, &inst).unwrap());
            for g in [z(1), z(-1), z(2), z(-2)] {
                assert!(!period_check(&out.configuration, &g));
            }
        }
    }

    proptest! {
        #[test]
        fn sigma_below_epsilon(h in 0.55f64..1.0, eps in 0.001f64..1.0, gap in 1i64..5) {
            let f = freeness_patterns(&z(gap), 2).unwrap();
            let l = build_left_family(&f, h, eps).unwrap();
            let r = build_right_family(&f, h, eps).unwrap();
            prop_assert!(l.sigma < eps && r.sigma < eps);
            prop_assert!(l.sigma <= l.sigma_bound * (1.0 + 1e-12));
        }
    }
}
