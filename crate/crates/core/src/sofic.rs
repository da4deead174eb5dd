//! Pseudo-actions on finite sets and the transfer of forbidden patterns to
//! them.
//!
//! A pseudo-action is stored as a table over a ball of Γ. A vertex v is
//! F-proper when `1·v = v`, `γ·(δ·v) = (γδ)·v` for γ, δ, γδ ∈ F, and
//! γ ↦ γ·v is injective on F. For a base family Φ and a finite symmetric
//! S ∋ 1, the transferred family is `Φ_α = {φ_v : φ ⊆ S, v ∈ Prop_{S³}}` with
//! `φ_v(γ·v) = φ(γ)`. Vertex patterns are held as ℤ patterns on the interval
//! `{0, …, |V|-1}` so the LLL and enumeration code apply unchanged.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::covers::CylinderFamily;
use crate::group::{GroupDescriptor, GroupElement, GroupError};
use crate::lll::{canonical_witness, check_correctness, counting_lower_bound, CorrectnessReport, LllError, WindowInstance};
use crate::pattern::{Pattern, PatternError, Symbol, Window};
use crate::sampler::{restriction_patterns, SamplerError, MAX_ENUMERATION};
use crate::scalar::{compensated_sum, log2_alphabet, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SoficError {
    #[error("element {element} lies outside the table radius {radius}")]
    RadiusExceeded { element: String, radius: usize },
    #[error("pseudo-action needs at least one vertex")]
    EmptyVertexSet,
    #[error("table row for {element} has {found} entries, expected {expected}")]
    TableShape { element: String, expected: usize, found: usize },
    #[error("table maps into vertex {vertex} ≥ |V| = {size}")]
    VertexOutOfRange { vertex: usize, size: usize },
    #[error("coloring enumeration of {k}^{vertices} exceeds the 2^24 limit")]
    ScaleExceeded { vertices: usize, k: u8 },
    #[error("ω_α fails the correctness check on Φ_α (worst slack {worst_slack} bits)")]
    WitnessFailed { worst_slack: f64 },
    #[error("base cover has no slack at h: h + σ_h = {total} ≥ log₂ k")]
    NoSlack { total: f64 },
    #[error("ε must lie in [0, 1], got {0}")]
    BadEpsilon(f64),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Lll(#[from] LllError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// α: ball(r) × V → V.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoAction {
    group: GroupDescriptor,
    radius: usize,
    size: usize,
    elements: Vec<GroupElement>,
    index: HashMap<GroupElement, usize>,
    /// `table[e][v] = elements[e]·v`.
    table: Vec<Vec<u32>>,
}

impl PseudoAction {
    /// Tabulates `act` on ball(radius) × V.
    pub fn from_fn(
        group: GroupDescriptor,
        size: usize,
        radius: usize,
        mut act: impl FnMut(&GroupElement, usize) -> usize,
    ) -> Result<Self, SoficError> {
        group.validate()?;
        if size == 0 {
            return Err(SoficError::EmptyVertexSet);
        }
        let elements = group.ball(radius);
        let mut table = Vec::with_capacity(elements.len());
        for g in &elements {
            let row = (0..size)
                .map(|v| {
                    let w = act(g, v);
                    if w >= size {
                        Err(SoficError::VertexOutOfRange { vertex: w, size })
                    } else {
                        Ok(w as u32)
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            table.push(row);
        }
        Ok(Self::assemble(group, size, radius, elements, table))
    }

    /// From explicit rows, one per element of ball(radius) in canonical order.
    pub fn from_table(group: GroupDescriptor, size: usize, radius: usize, table: Vec<Vec<u32>>) -> Result<Self, SoficError> {
        group.validate()?;
        if size == 0 {
            return Err(SoficError::EmptyVertexSet);
        }
        let elements = group.ball(radius);
        if table.len() != elements.len() {
            return Err(SoficError::TableShape {
                element: format!("ball({radius})"),
                expected: elements.len(),
                found: table.len(),
            });
        }
        for (g, row) in elements.iter().zip(&table) {
            if row.len() != size {
                return Err(SoficError::TableShape {
                    element: g.to_string(),
                    expected: size,
                    found: row.len(),
                });
            }
            if let Some(&w) = row.iter().find(|&&w| w as usize >= size) {
                return Err(SoficError::VertexOutOfRange { vertex: w as usize, size });
            }
        }
        Ok(Self::assemble(group, size, radius, elements, table))
    }

    fn assemble(group: GroupDescriptor, size: usize, radius: usize, elements: Vec<GroupElement>, table: Vec<Vec<u32>>) -> Self {
        let index = elements.iter().enumerate().map(|(i, g)| (g.clone(), i)).collect();
        PseudoAction {
            group,
            radius,
            size,
            elements,
            index,
            table,
        }
    }

    pub fn group(&self) -> GroupDescriptor {
        self.group
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// |V|.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    fn row(&self, g: &GroupElement) -> Result<&[u32], SoficError> {
        self.index
            .get(g)
            .map(|&i| self.table[i].as_slice())
            .ok_or_else(|| SoficError::RadiusExceeded {
                element: g.to_string(),
                radius: self.radius,
            })
    }

    /// γ·v.
    pub fn act(&self, g: &GroupElement, v: usize) -> Result<usize, SoficError> {
        Ok(self.row(g)?[v] as usize)
    }
}

/// ℤ acting on ℤ/n by translation, tabulated on ball(radius).
pub fn cyclic_approximation(n: usize, radius: usize) -> Result<PseudoAction, SoficError> {
    PseudoAction::from_fn(GroupDescriptor::zd(1), n, radius, |g, v| {
        let shift = g.as_vector().expect("ℤ element")[0];
        (v as i64 + shift).rem_euclid(n as i64) as usize
    })
}

/// F_rank acting on V through one seeded uniform permutation per generator.
pub fn permutation_approximation(rank: usize, size: usize, seed: u64, radius: usize) -> Result<PseudoAction, SoficError> {
    let group = GroupDescriptor::free(rank);
    group.validate()?;
    if size == 0 {
        return Err(SoficError::EmptyVertexSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut forward = Vec::with_capacity(rank);
    let mut backward = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut p: Vec<u32> = (0..size as u32).collect();
        p.shuffle(&mut rng);
        let mut inv = vec![0u32; size];
        for (i, &j) in p.iter().enumerate() {
            inv[j as usize] = i as u32;
        }
        forward.push(p);
        backward.push(inv);
    }
    let elements = group.ball(radius);
    let index: HashMap<&GroupElement, usize> = elements.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let mut table: Vec<Vec<u32>> = Vec::with_capacity(elements.len());
    // ball order is by length, so the tail γ' of γ = ℓγ' is already filled
    for g in &elements {
        let word = g.as_word().expect("free group element");
        let row = match word.split_first() {
            None => (0..size as u32).collect(),
            Some((first, rest)) => {
                let tail = GroupElement::word(rest.iter().copied());
                let prev = &table[index[&tail]];
                let perm = if first.is_inverse() {
                    &backward[first.generator_index()]
                } else {
                    &forward[first.generator_index()]
                };
                prev.iter().map(|&v| perm[v as usize]).collect()
            }
        };
        table.push(row);
    }
    PseudoAction::from_table(group, size, radius, table)
}

/// Adds 1 and all inverses.
pub fn symmetric_closure(group: GroupDescriptor, s: &[GroupElement]) -> Vec<GroupElement> {
    let mut out: BTreeSet<GroupElement> = s.iter().cloned().collect();
    out.extend(s.iter().map(GroupElement::inverse));
    out.insert(group.identity());
    out.into_iter().collect()
}

/// Sⁿ = {γ₁⋯γₙ : γᵢ ∈ S}.
pub fn set_power(s: &[GroupElement], n: usize) -> Vec<GroupElement> {
    let mut acc: BTreeSet<GroupElement> = s.iter().cloned().collect();
    for _ in 1..n {
        acc = acc.iter().flat_map(|a| s.iter().map(move |b| a * b)).collect();
    }
    acc.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProperReport {
    pub f: Vec<GroupElement>,
    pub proper: Vec<usize>,
    /// 1 − |Prop_F|/|V|.
    pub epsilon_achieved: f64,
}

impl ProperReport {
    /// (ε, F)-faithfulness: |Prop_F| ≥ (1 − ε)|V|.
    pub fn is_faithful(&self, epsilon: f64, size: usize) -> bool {
        self.proper.len() as f64 >= (1.0 - epsilon) * size as f64
    }
}

/// Prop_F(α).
pub fn proper_set(alpha: &PseudoAction, f: &[GroupElement]) -> Result<ProperReport, SoficError> {
    let f: Vec<GroupElement> = f.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let rows: Vec<&[u32]> = f.iter().map(|g| alpha.row(g)).collect::<Result<_, _>>()?;
    let identity = alpha.row(&alpha.group.identity())?;
    let in_f: HashMap<&GroupElement, usize> = f.iter().enumerate().map(|(i, g)| (g, i)).collect();
    // (γ, δ, γδ) index triples inside F
    let mut triples = Vec::new();
    for (i, g) in f.iter().enumerate() {
        for (j, d) in f.iter().enumerate() {
            if let Some(&p) = in_f.get(&(g * d)) {
                triples.push((i, j, p));
            }
        }
    }
    let proper: Vec<usize> = (0..alpha.size)
        .into_par_iter()
        .filter(|&v| {
            if identity[v] as usize != v {
                return false;
            }
            let equivariant = triples
                .iter()
                .all(|&(i, j, p)| rows[i][rows[j][v] as usize] == rows[p][v]);
            if !equivariant {
                return false;
            }
            let images: BTreeSet<u32> = rows.iter().map(|r| r[v]).collect();
            images.len() == rows.len()
        })
        .collect();
    let epsilon_achieved = 1.0 - proper.len() as f64 / alpha.size as f64;
    Ok(ProperReport {
        f,
        proper,
        epsilon_achieved,
    })
}

/// Φ_α as an instance on the vertex interval.
#[derive(Clone, Debug)]
pub struct Transfer {
    pub instance: WindowInstance,
    /// Vertices v at which patterns were placed.
    pub anchors: Vec<usize>,
    /// Base patterns with support ⊆ S.
    pub used: Vec<Pattern>,
    /// Emitted (φ, v) pairs before deduplication.
    pub emitted: usize,
}

fn vertex(v: usize) -> GroupElement {
    GroupElement::vector([v as i64])
}

/// φ_v for each φ ∈ Φ with dom(φ) ⊆ S and each v ∈ Prop_{filter}(α).
pub fn transfer_patterns_with(
    family: &CylinderFamily,
    alpha: &PseudoAction,
    s: &[GroupElement],
    filter: &[GroupElement],
) -> Result<Transfer, SoficError> {
    let s_set: BTreeSet<&GroupElement> = s.iter().collect();
    let used: Vec<Pattern> = family
        .iter()
        .filter(|p| p.support().iter().all(|g| s_set.contains(g)))
        .cloned()
        .collect();
    let anchors = proper_set(alpha, filter)?.proper;
    let k = family.alphabet();
    let mut patterns = Vec::new();
    for p in &used {
        for &v in &anchors {
            let cells = p
                .cells()
                .map(|(g, sym)| alpha.act(g, v).map(|w| (vertex(w), sym)))
                .collect::<Result<Vec<_>, _>>()?;
            patterns.push(Pattern::new(cells, k)?);
        }
    }
    let emitted = patterns.len();
    let window = Arc::new(Window::interval(alpha.size));
    let instance = WindowInstance::from_patterns(window, patterns, k)?;
    Ok(Transfer {
        instance,
        anchors,
        used,
        emitted,
    })
}

/// Φ_α with the S³-proper anchors. S is closed under inverses and 1 first.
pub fn transfer_patterns(family: &CylinderFamily, alpha: &PseudoAction, s: &[GroupElement]) -> Result<Transfer, SoficError> {
    let s = symmetric_closure(alpha.group, s);
    let s3 = set_power(&s, 3);
    transfer_patterns_with(family, alpha, &s, &s3)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexBound<T> {
    pub correctness: CorrectnessReport<T>,
    /// log₂ of |V|·log₂k + Σ_{ψ∈Φ_α} log₂(1 − 2^{-h|ψ|}).
    pub log2_bound: T,
    pub per_vertex: T,
    /// log₂k − σ_h(Φ), the closing term of the chain.
    pub chain_floor: T,
    pub patterns: usize,
}

/// LLL lower bound on |Forb(Φ_α)| with ω_α(ψ) = 2^{-h|ψ|} checked on the
/// vertex instance itself.
pub fn vertex_lll_count_bound<T: Real>(transfer: &Transfer, base: &CylinderFamily, h: T) -> Result<VertexBound<T>, SoficError> {
    let log2k: T = log2_alphabet(base.alphabet());
    let sigma = base.sigma(h);
    if !(h + sigma < log2k) {
        return Err(SoficError::NoSlack {
            total: (h + sigma).to_f64().unwrap_or(f64::NAN),
        });
    }
    let inst = &transfer.instance;
    let w = canonical_witness(inst, h);
    let correctness = check_correctness(inst, &w)?;
    if !correctness.ok {
        return Err(SoficError::WitnessFailed {
            worst_slack: correctness.worst_slack.to_f64().unwrap_or(f64::NAN),
        });
    }
    let log2_bound = counting_lower_bound(inst, &w)?;
    let size = T::from_usize_lossy(inst.window().len());
    Ok(VertexBound {
        correctness,
        per_vertex: log2_bound / size,
        log2_bound,
        chain_floor: log2k - sigma,
        patterns: inst.len(),
    })
}

/// The restriction set X_F of Forb(Γ·Φ) computed on ball(radius(F) + pad).
pub fn window_restriction_set(
    group: GroupDescriptor,
    family: &CylinderFamily,
    f: &[GroupElement],
    padding: Option<usize>,
) -> Result<Vec<Vec<Symbol>>, SoficError> {
    let pad = padding.unwrap_or_else(|| family.iter().map(|p| p.diameter()).max().unwrap_or(0));
    let radius = f.iter().map(|g| g.length()).max().unwrap_or(0) + pad;
    let window = Arc::new(Window::ball(group, radius));
    let cells: Vec<usize> = f
        .iter()
        .map(|g| window.index_of(g).ok_or_else(|| PatternError::SupportOutsideWindow(g.to_string())))
        .collect::<Result<_, _>>()?;
    let inst = WindowInstance::new(window, family.clone())?;
    Ok(restriction_patterns(&inst, &cells)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColoringReport<T> {
    /// |Col_{ε,F}|.
    pub col: u64,
    /// h_{ε,F} = log₂|Col| / |V| (−∞ when empty).
    pub h_eps_f: T,
    /// |Forb(Φ_α)| when a transfer was supplied.
    pub forb: Option<u64>,
    /// Members of Forb(Φ_α) missing from Col; zero whenever α
    /// is (ε, S⁴)-faithful.
    pub forb_outside_col: Option<u64>,
}

/// Enumerates all f: V → k, counting approximate colorings: at least
/// (1 − ε)|V| vertices v with `(γ ↦ f(γ·v))|_F ∈ X_F`.
pub fn approx_coloring_count<T: Real>(
    alpha: &PseudoAction,
    k: u8,
    x_f: &[Vec<Symbol>],
    f: &[GroupElement],
    epsilon: f64,
    transfer: Option<&Transfer>,
) -> Result<ColoringReport<T>, SoficError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(SoficError::BadEpsilon(epsilon));
    }
    let n = alpha.size;
    let total = (k as u128).checked_pow(n as u32).filter(|&t| t <= MAX_ENUMERATION);
    let Some(total) = total else {
        return Err(SoficError::ScaleExceeded { vertices: n, k });
    };
    let fk = (k as u128).checked_pow(f.len() as u32).filter(|&t| t <= MAX_ENUMERATION);
    let Some(fk) = fk else {
        return Err(SoficError::ScaleExceeded { vertices: f.len(), k });
    };
    let code = |vals: &[Symbol]| vals.iter().fold(0usize, |acc, &s| acc * k as usize + s as usize);
    let mut allowed = vec![false; fk as usize];
    for p in x_f {
        allowed[code(p)] = true;
    }
    // offsets[v] = [γ·v for γ ∈ F]
    let offsets: Vec<Vec<usize>> = (0..n)
        .map(|v| f.iter().map(|g| alpha.act(g, v)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let threshold = (1.0 - epsilon) * n as f64;
    let inst = transfer.map(|t| &t.instance);
    let (col, forb, outside) = (0..total as u64)
        .into_par_iter()
        .fold(
            || (0u64, 0u64, 0u64, vec![0u8; n]),
            |(mut col, mut forb, mut outside, mut vals), mut idx| {
                for slot in vals.iter_mut() {
                    *slot = (idx % k as u64) as u8;
                    idx /= k as u64;
                }
                let good = offsets
                    .iter()
                    .filter(|row| {
                        let c = row.iter().fold(0usize, |acc, &w| acc * k as usize + vals[w] as usize);
                        allowed[c]
                    })
                    .count();
                let in_col = good as f64 >= threshold;
                col += u64::from(in_col);
                if let Some(inst) = inst {
                    if inst.avoids(&vals) {
                        forb += 1;
                        outside += u64::from(!in_col);
                    }
                }
                (col, forb, outside, vals)
            },
        )
        .map(|(c, f, o, _)| (c, f, o))
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let h_eps_f = if col == 0 {
        T::neg_infinity()
    } else {
        T::from_u64(col).expect("count").log2() / T::from_usize_lossy(n)
    };
    Ok(ColoringReport {
        col,
        h_eps_f,
        forb: transfer.map(|_| forb),
        forb_outside_col: transfer.map(|_| outside),
    })
}

/// Σ_{φ∈Φ} log₂(1 − 2^{-h|φ|}) + log₂k, the per-vertex product bound.
pub fn per_vertex_product_bound<T: Real>(base: &CylinderFamily, h: T) -> T {
    log2_alphabet::<T>(base.alphabet()) + compensated_sum(base.iter().map(|p| p.weight_pow(h).log2_1m()))
}
