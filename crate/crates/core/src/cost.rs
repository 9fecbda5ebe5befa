//! Perturbative distance of a product formula as a polynomial in `θ`.
//!
//! Writing `X_(r,j) = θ_{r,j} H_j` in row-major multi-index order (the
//! smallest index acts first), the logarithm of the ansatz expands as
//!
//! ```text
//! log U_var = -i Σ_j (Σ_r θ_{r,j}) H_j − Σ_{j>j'} χ_{j,j'} [H_j, H_j'] + i Σ Φ_{j,k,l} [H_j,[H_k,H_l]] + …
//! ```
//!
//! With the linear part matched to `−itH`, the distance `C` is the
//! normalized Hilbert–Schmidt norm of the second-order operator and `E` the
//! norm of the third-order one. Every commutator of Pauli strings is a
//! single Pauli string, so both operators are grouped by output string at
//! compile time and evaluation is a sparse sum over the nonvanishing pairs
//! or triples.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CellWindow, HamiltonianModel};
use crate::pauli::{anticommutes, PauliString, PauliSum};
use crate::sheet::ParamSheet;

#[derive(Clone, Copy, Debug)]
pub struct CompileOptions {
    /// Also build the nested-commutator table for `E` and `Λ`.
    pub third_order: bool,
    /// Upper bound on stored pairs plus triples.
    pub budget: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            third_order: false,
            budget: 4_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct PairEntry {
    j: u32,
    jp: u32,
    group: u32,
    coeff: Complex64,
}

#[derive(Clone, Copy, Debug)]
struct TripleEntry {
    j: u32,
    /// `k > l`; the mirrored `(j, l, k)` entry is folded in with a minus sign.
    k: u32,
    l: u32,
    group: u32,
    coeff: Complex64,
}

#[derive(Clone, Debug)]
struct Grouping {
    keys: Vec<(u64, u64)>,
    index: HashMap<(u64, u64), u32>,
}

impl Grouping {
    fn new() -> Self {
        Self {
            keys: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn slot(&mut self, key: (u64, u64)) -> u32 {
        let next = self.keys.len() as u32;
        *self.index.entry(key).or_insert_with(|| {
            self.keys.push(key);
            next
        })
    }
}

/// Precomputed commutator tables of one model.
#[derive(Clone, Debug)]
pub struct CostPolynomial {
    n: usize,
    terms: usize,
    pairs: Vec<PairEntry>,
    pair_groups: Grouping,
    triples: Option<(Vec<TripleEntry>, Grouping)>,
    cell: Option<CellWindow>,
}

/// `χ_{j,j'}` over the compiled pairs plus the linear aggregates `ξ_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiCoefficients {
    pub pairs: Vec<(usize, usize)>,
    pub chi: Vec<f64>,
    pub xi: Vec<f64>,
}

impl ChiCoefficients {
    pub fn get(&self, j: usize, jp: usize) -> Option<f64> {
        self.pairs.iter().position(|&p| p == (j, jp)).map(|i| self.chi[i])
    }
}

/// `Φ_{j,k,l}` for every index triple stored in the third-order table,
/// in both `(j,k,l)` and `(j,l,k)` orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiTensor {
    pub entries: Vec<((usize, usize, usize), f64)>,
}

impl PhiTensor {
    pub fn get(&self, j: usize, k: usize, l: usize) -> f64 {
        self.entries
            .iter()
            .find(|(idx, _)| *idx == (j, k, l))
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }
}

/// Column prefix sums, `pre[r·M + j] = Σ_{r'<r} θ_{r',j}`.
struct Prefix<'a> {
    theta: &'a [f64],
    pre: Vec<f64>,
    layers: usize,
    m: usize,
}

impl<'a> Prefix<'a> {
    fn new(sheet: &'a ParamSheet) -> Self {
        let (layers, m) = (sheet.layers(), sheet.terms());
        let theta = sheet.theta();
        let mut pre = vec![0.0; (layers + 1) * m];
        for r in 0..layers {
            for j in 0..m {
                pre[(r + 1) * m + j] = pre[r * m + j] + theta[r * m + j];
            }
        }
        Self {
            theta,
            pre,
            layers,
            m,
        }
    }

    #[inline]
    fn th(&self, r: usize, j: usize) -> f64 {
        self.theta[r * self.m + j]
    }

    /// `Σ_{r'<r} θ_{r',j}`.
    #[inline]
    fn before(&self, r: usize, j: usize) -> f64 {
        self.pre[r * self.m + j]
    }

    /// `Σ_{r'>r} θ_{r',j}`.
    #[inline]
    fn after(&self, r: usize, j: usize) -> f64 {
        self.pre[self.layers * self.m + j] - self.pre[(r + 1) * self.m + j]
    }

    fn chi(&self, j: usize, jp: usize) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.layers {
            let (a, b) = (self.th(r, j), self.th(r, jp));
            acc += a * b + a * self.before(r, jp) - b * self.before(r, j);
        }
        0.5 * acc
    }

    /// Coefficient of `[H_j,[H_k,H_l]]` in the third-order term.
    fn phi(&self, j: usize, k: usize, l: usize) -> f64 {
        let (mut s, mut q, mut w) = (0.0, 0.0, 0.0);
        for u in 0..self.layers {
            // three distinct positions, middle one at (u, k)
            let later_j = self.after(u, j) + if j > k { self.th(u, j) } else { 0.0 };
            let earlier_l = self.before(u, l) + if l < k { self.th(u, l) } else { 0.0 };
            s += self.th(u, k) * later_j * earlier_l;
            // [X_a,[X_b,X_i]] with both a and b before i = (u, l)
            let pj = self.before(u, j) + if j < l { self.th(u, j) } else { 0.0 };
            let pk = self.before(u, k) + if k < l { self.th(u, k) } else { 0.0 };
            w += self.th(u, l) * pj * pk;
            if j == k {
                let tj = self.th(u, j);
                q += tj * tj * (self.before(u, l) + if l < j { self.th(u, l) } else { 0.0 });
            }
        }
        s / 4.0 + (q + w) / 12.0
    }
}

/// Whether the union support of `terms` starts at the window origin.
fn is_representative(window: &CellWindow, supports: &[u64]) -> bool {
    let union = supports.iter().fold(0u64, |acc, s| acc | s);
    let (mut min_x, mut min_y) = (usize::MAX, usize::MAX);
    let mut bits = union;
    while bits != 0 {
        let q = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        min_x = min_x.min(q % window.wx);
        min_y = min_y.min(q / window.wx);
    }
    union != 0 && min_x == 0 && min_y == 0
}

impl CostPolynomial {
    pub fn compile(model: &HamiltonianModel, third_order: bool) -> Result<Self> {
        Self::compile_with(
            model,
            CompileOptions {
                third_order,
                ..CompileOptions::default()
            },
        )
    }

    /// Unit-cell models keep only pairs and triples whose support starts at
    /// the cell origin, one per translation orbit.
    pub fn compile_with(model: &HamiltonianModel, opts: CompileOptions) -> Result<Self> {
        let n = model.n();
        let paulis: Vec<PauliString> = model.terms().iter().map(|t| t.pauli).collect();
        let m = paulis.len();
        let cell = model.cell_window();
        let keep = |idx: &[usize]| -> bool {
            match &cell {
                Some(w) => {
                    let s: Vec<u64> = idx.iter().map(|&i| paulis[i].support()).collect();
                    is_representative(w, &s)
                }
                None => true,
            }
        };

        let mut pairs = Vec::new();
        let mut all_pairs = Vec::new();
        let mut pair_groups = Grouping::new();
        for j in 0..m {
            for jp in 0..j {
                let (a, b) = (&paulis[j], &paulis[jp]);
                if !anticommutes(a.x_mask(), a.z_mask(), b.x_mask(), b.z_mask()) {
                    continue;
                }
                all_pairs.push((j, jp));
                if !keep(&[j, jp]) {
                    continue;
                }
                let prod = a.multiply(b)?;
                pairs.push(PairEntry {
                    j: j as u32,
                    jp: jp as u32,
                    group: pair_groups.slot(prod.key()),
                    coeff: prod.coefficient() * 2.0,
                });
                if pairs.len() > opts.budget {
                    return Err(Error::Capacity(format!(
                        "more than {} commutator pairs",
                        opts.budget
                    )));
                }
            }
        }

        let triples = if opts.third_order {
            let mut entries = Vec::new();
            let mut groups = Grouping::new();
            for &(k, l) in &all_pairs {
                let inner = paulis[k].multiply(&paulis[l])?;
                for (j, pj) in paulis.iter().enumerate() {
                    if !anticommutes(pj.x_mask(), pj.z_mask(), inner.x_mask(), inner.z_mask()) {
                        continue;
                    }
                    if !keep(&[j, k, l]) {
                        continue;
                    }
                    let outer = pj.multiply(&inner)?;
                    entries.push(TripleEntry {
                        j: j as u32,
                        k: k as u32,
                        l: l as u32,
                        group: groups.slot(outer.key()),
                        coeff: outer.coefficient() * 4.0,
                    });
                    if pairs.len() + entries.len() > opts.budget {
                        return Err(Error::Capacity(format!(
                            "more than {} commutator pairs and triples",
                            opts.budget
                        )));
                    }
                }
            }
            Some((entries, groups))
        } else {
            None
        };

        Ok(Self {
            n,
            terms: m,
            pairs,
            pair_groups,
            triples,
            cell,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn cell_window(&self) -> Option<CellWindow> {
        self.cell
    }

    /// Nonvanishing pairs `(j, j')`, `j > j'`.
    pub fn pair_list(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|p| (p.j as usize, p.jp as usize)).collect()
    }

    pub fn has_third_order(&self) -> bool {
        self.triples.is_some()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.as_ref().map_or(0, |(e, _)| e.len())
    }

    /// `2^{-n} Tr([H_j,H_j'][H_k,H_k'])` for pair indices `a`, `b`.
    pub fn trace_entry(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (&self.pairs[a], &self.pairs[b]);
        if p.group == q.group {
            (p.coeff * q.coeff).re
        } else {
            0.0
        }
    }

    /// Dense copy of the pair trace table, for inspection on small models.
    pub fn trace_table2(&self) -> Vec<Vec<f64>> {
        let k = self.pairs.len();
        (0..k).map(|a| (0..k).map(|b| self.trace_entry(a, b)).collect()).collect()
    }

    fn check_sheet(&self, sheet: &ParamSheet) -> Result<()> {
        if sheet.terms() != self.terms {
            return Err(Error::InvalidConfig(format!(
                "sheet has {} terms, model has {}",
                sheet.terms(),
                self.terms
            )));
        }
        Ok(())
    }

    pub fn chi_of(&self, sheet: &ParamSheet) -> Result<ChiCoefficients> {
        self.check_sheet(sheet)?;
        let pre = Prefix::new(sheet);
        Ok(ChiCoefficients {
            pairs: self.pair_list(),
            chi: self
                .pairs
                .iter()
                .map(|p| pre.chi(p.j as usize, p.jp as usize))
                .collect(),
            xi: sheet.xi(),
        })
    }

    fn pair_sums(&self, pre: &Prefix) -> Vec<Complex64> {
        let mut sums = vec![Complex64::default(); self.pair_groups.keys.len()];
        for p in &self.pairs {
            sums[p.group as usize] += p.coeff * pre.chi(p.j as usize, p.jp as usize);
        }
        sums
    }

    /// `C(θ)²`, the squared norm of `Σ_{j>j'} χ_{j,j'} [H_j, H_j']`. The
    /// linear `ξ` part is excluded by definition.
    pub fn cost_sq(&self, sheet: &ParamSheet) -> Result<f64> {
        self.check_sheet(sheet)?;
        let pre = Prefix::new(sheet);
        Ok(self.pair_sums(&pre).iter().map(|s| s.norm_sqr()).sum())
    }

    pub fn cost(&self, sheet: &ParamSheet) -> Result<f64> {
        Ok(self.cost_sq(sheet)?.sqrt())
    }

    /// `C²` and its gradient with respect to the sheet's free entries. For
    /// a constrained sheet the slaved last layer enters through the chain
    /// rule, `d/dθ_{q,l} = ∂_{q,l} − ∂_{R,l}`.
    pub fn cost_sq_and_grad(&self, sheet: &ParamSheet) -> Result<(f64, Vec<f64>)> {
        self.check_sheet(sheet)?;
        let pre = Prefix::new(sheet);
        let sums = self.pair_sums(&pre);
        let value = sums.iter().map(|s| s.norm_sqr()).sum();

        let (layers, m) = (sheet.layers(), sheet.terms());
        let mut full = vec![0.0; layers * m];
        for p in &self.pairs {
            let g = 2.0 * (sums[p.group as usize].conj() * p.coeff).re;
            if g == 0.0 {
                continue;
            }
            let (j, jp) = (p.j as usize, p.jp as usize);
            for q in 0..layers {
                let da = pre.th(q, jp) + pre.before(q, jp) - pre.after(q, jp);
                let db = pre.th(q, j) + pre.after(q, j) - pre.before(q, j);
                full[q * m + j] += 0.5 * g * da;
                full[q * m + jp] += 0.5 * g * db;
            }
        }
        if sheet.is_constrained() {
            let last = (layers - 1) * m;
            let mut free = full[..last].to_vec();
            for (i, v) in free.iter_mut().enumerate() {
                *v -= full[last + i % m];
            }
            Ok((value, free))
        } else {
            Ok((value, full))
        }
    }

    pub fn grad_cost_sq(&self, sheet: &ParamSheet) -> Result<Vec<f64>> {
        Ok(self.cost_sq_and_grad(sheet)?.1)
    }

    /// `Σ_{j>j'} χ_{j,j'} [H_j, H_j']` as an explicit Pauli sum.
    pub fn second_order_operator(&self, sheet: &ParamSheet) -> Result<PauliSum> {
        self.check_sheet(sheet)?;
        let pre = Prefix::new(sheet);
        let mut out = PauliSum::new(self.n)?;
        for (s, key) in self.pair_sums(&pre).iter().zip(&self.pair_groups.keys) {
            let p = PauliString::new(self.n, key.0, key.1)?;
            out.add_string(&p, *s);
        }
        Ok(out)
    }

    fn triple_table(&self) -> Result<&(Vec<TripleEntry>, Grouping)> {
        self.triples.as_ref().ok_or(Error::MissingThirdOrder)
    }

    /// Folded weights `Φ_{j,k,l} − Φ_{j,l,k}` per stored triple.
    fn third_weights(&self, sheet: &ParamSheet) -> Result<Vec<f64>> {
        self.check_sheet(sheet)?;
        let (entries, _) = self.triple_table()?;
        let pre = Prefix::new(sheet);
        Ok(entries
            .iter()
            .map(|e| {
                let (j, k, l) = (e.j as usize, e.k as usize, e.l as usize);
                pre.phi(j, k, l) - pre.phi(j, l, k)
            })
            .collect())
    }

    fn third_sums(&self, weights: &[f64]) -> Result<Vec<Complex64>> {
        let (entries, groups) = self.triple_table()?;
        let mut sums = vec![Complex64::default(); groups.keys.len()];
        for (e, w) in entries.iter().zip(weights) {
            sums[e.group as usize] += e.coeff * *w;
        }
        Ok(sums)
    }

    fn third_norm(&self, weights: &[f64]) -> Result<f64> {
        Ok(self
            .third_sums(weights)?
            .iter()
            .map(|s| s.norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn phi(&self, sheet: &ParamSheet) -> Result<PhiTensor> {
        self.check_sheet(sheet)?;
        let (entries, _) = self.triple_table()?;
        let pre = Prefix::new(sheet);
        let mut out = Vec::with_capacity(2 * entries.len());
        for e in entries {
            let (j, k, l) = (e.j as usize, e.k as usize, e.l as usize);
            out.push(((j, k, l), pre.phi(j, k, l)));
            out.push(((j, l, k), pre.phi(j, l, k)));
        }
        Ok(PhiTensor { entries: out })
    }

    /// Third-order estimate `E(θ) = ‖Σ Φ_{j,k,l} [H_j,[H_k,H_l]]‖`.
    pub fn error_term(&self, sheet: &ParamSheet) -> Result<f64> {
        let w = self.third_weights(sheet)?;
        self.third_norm(&w)
    }

    pub fn third_order_operator(&self, sheet: &ParamSheet) -> Result<PauliSum> {
        let w = self.third_weights(sheet)?;
        let (_, groups) = self.triple_table()?;
        let mut out = PauliSum::new(self.n)?;
        for (s, key) in self.third_sums(&w)?.iter().zip(&groups.keys) {
            let p = PauliString::new(self.n, key.0, key.1)?;
            out.add_string(&p, *s);
        }
        Ok(out)
    }

    /// Weights of the part of `Φ` that grows as `K(K−1)/2` under
    /// repetition. The cubic part is a nested commutator of `H` with itself
    /// and vanishes, so two evaluations pin it down exactly.
    fn rest_weights(&self, sheet: &ParamSheet) -> Result<(Vec<f64>, Vec<f64>)> {
        let once = self.third_weights(sheet)?;
        let twice = self.third_weights(&sheet.repeat_sheet(2)?)?;
        let rest = twice.iter().zip(&once).map(|(b, a)| b - 2.0 * a).collect();
        Ok((once, rest))
    }

    /// Rest term `Λ` of the repetition bound
    /// `E(θ^K) ≤ K E(θ) + K(K−1)/2 · Λ`.
    pub fn lambda_rest(&self, sheet: &ParamSheet) -> Result<f64> {
        let (_, rest) = self.rest_weights(sheet)?;
        self.third_norm(&rest)
    }

    pub fn repeated_error_bound(&self, sheet: &ParamSheet, k: usize) -> Result<f64> {
        let (once, rest) = self.rest_weights(sheet)?;
        let kf = k as f64;
        Ok(kf * self.third_norm(&once)? + 0.5 * kf * (kf - 1.0) * self.third_norm(&rest)?)
    }

    /// `E(θ^K)` from the single-step tables, `‖K·Φ + K(K−1)/2·Ψ‖`.
    pub fn repeated_error_term(&self, sheet: &ParamSheet, k: usize) -> Result<f64> {
        let (once, rest) = self.rest_weights(sheet)?;
        let kf = k as f64;
        let w: Vec<f64> = once
            .iter()
            .zip(&rest)
            .map(|(a, b)| kf * a + 0.5 * kf * (kf - 1.0) * b)
            .collect();
        self.third_norm(&w)
    }
}

/// `χ_{j,j'}` for any index pair, straight from the sheet.
pub fn chi_entry(sheet: &ParamSheet, j: usize, jp: usize) -> f64 {
    Prefix::new(sheet).chi(j, jp)
}

/// `Φ_{j,k,l}` for any index triple, straight from the sheet.
pub fn phi_entry(sheet: &ParamSheet, j: usize, k: usize, l: usize) -> f64 {
    Prefix::new(sheet).phi(j, k, l)
}

/// Class-shared parameters evaluated on a translation-invariant model's
/// unit cell.
#[derive(Clone, Debug)]
pub struct UnitCellCost {
    cell: HamiltonianModel,
    poly: CostPolynomial,
    class_coeffs: Vec<f64>,
    term_class: Vec<usize>,
}

impl UnitCellCost {
    pub fn new(model: &HamiltonianModel, order: u32) -> Result<Self> {
        let class_coeffs = model.class_coefficients()?;
        let cell = model.unit_cell(order)?;
        let poly = CostPolynomial::compile(&cell, order == 3)?;
        let term_class = cell
            .translation()
            .map(|t| t.term_class.clone())
            .ok_or_else(|| Error::NotTranslationInvariant("cell lost its classes".into()))?;
        Ok(Self {
            cell,
            poly,
            class_coeffs,
            term_class,
        })
    }

    pub fn cell(&self) -> &HamiltonianModel {
        &self.cell
    }

    pub fn polynomial(&self) -> &CostPolynomial {
        &self.poly
    }

    /// Number of interaction classes `A`.
    pub fn classes(&self) -> usize {
        self.class_coeffs.len()
    }

    pub fn class_coefficients(&self) -> &[f64] {
        &self.class_coeffs
    }

    /// Number of translations of the parent lattice.
    pub fn translations(&self) -> usize {
        self.cell.cell_window().map_or(1, |w| w.parent_sites)
    }

    /// Constrained class-level sheet from `(R − 1) × A` free entries.
    pub fn shared_sheet(&self, layers: usize, free: &[f64], t: f64) -> Result<ParamSheet> {
        ParamSheet::from_free(layers, free, t, &self.class_coeffs)
    }

    /// Expands a class-level `R × A` sheet onto the cell's terms.
    pub fn expand(&self, shared: &ParamSheet) -> Result<ParamSheet> {
        expand_shared(&self.term_class, shared)
    }

    /// `C_unit` (order 2) or `E_unit` (order 3).
    pub fn value(&self, shared: &ParamSheet) -> Result<f64> {
        let sheet = self.expand(shared)?;
        match self.cell.cell_window().map(|w| w.order) {
            Some(3) => self.poly.error_term(&sheet),
            _ => self.poly.cost(&sheet),
        }
    }

    /// `C_unit²` and its gradient with respect to the shared free entries.
    pub fn cost_sq_and_grad(&self, shared: &ParamSheet) -> Result<(f64, Vec<f64>)> {
        let sheet = self.expand(shared)?;
        let (value, cell_grad) = self.poly.cost_sq_and_grad(&sheet)?;
        let (a, m) = (self.classes(), self.cell.len());
        let rows = cell_grad.len() / m.max(1);
        let mut grad = vec![0.0; rows * a];
        for r in 0..rows {
            for (j, &cls) in self.term_class.iter().enumerate() {
                grad[r * a + cls] += cell_grad[r * m + j];
            }
        }
        Ok((value, grad))
    }
}

/// `θ_{r,j} = θ_{r,class(j)}`; the result keeps the shared sheet's
/// constraint flag.
pub fn expand_shared(term_class: &[usize], shared: &ParamSheet) -> Result<ParamSheet> {
    let (layers, a) = (shared.layers(), shared.terms());
    if term_class.iter().any(|&c| c >= a) {
        return Err(Error::InvalidConfig(format!(
            "shared sheet has {a} classes, model needs more"
        )));
    }
    let coeffs: Vec<f64> = term_class.iter().map(|&c| shared.coefficients()[c]).collect();
    let theta: Vec<f64> = (0..layers)
        .flat_map(|r| term_class.iter().map(move |&c| shared.get(r, c)))
        .collect();
    if shared.is_constrained() {
        let m = term_class.len();
        ParamSheet::from_free(layers, &theta[..(layers - 1) * m], shared.time(), &coeffs)
    } else {
        ParamSheet::unconstrained(layers, theta, shared.time(), coeffs)
    }
}

/// `C_unit` or `E_unit` of a translation-invariant model for a class-level
/// `R × A` parameter matrix.
pub fn unit_cell_cost(
    model: &HamiltonianModel,
    shared: &[f64],
    layers: usize,
    t: f64,
    order: u32,
) -> Result<f64> {
    let unit = UnitCellCost::new(model, order)?;
    let sheet = ParamSheet::unconstrained(layers, shared.to_vec(), t, unit.class_coeffs.clone())?;
    unit.value(&sheet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Connectivity, CouplingSpec, Term};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tfim2(normalize: bool) -> HamiltonianModel {
        CouplingSpec {
            normalize,
            ..CouplingSpec::tfim(
                Connectivity::Lattice {
                    nx: 2,
                    ny: 1,
                    periodic: false,
                },
                0,
            )
            .uniform()
        }
        .build()
        .unwrap()
    }

    fn xy3x3() -> HamiltonianModel {
        CouplingSpec::xy(
            Connectivity::Lattice {
                nx: 3,
                ny: 3,
                periodic: false,
            },
            11,
        )
        .build()
        .unwrap()
    }

    fn random_sheet(model: &HamiltonianModel, layers: usize, t: f64, seed: u64) -> ParamSheet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = model.coefficients();
        let free: Vec<f64> = (0..(layers - 1) * c.len())
            .map(|i| t * c[i % c.len()] / layers as f64 * (1.0 + rng.random_range(-0.5..0.5)))
            .collect();
        ParamSheet::from_free(layers, &free, t, &c).unwrap()
    }

    /// Literal triple loop over layer pairs.
    fn naive_chi(sheet: &ParamSheet, j: usize, jp: usize) -> f64 {
        let mut acc = 0.0;
        for r in 0..sheet.layers() {
            acc += sheet.get(r, j) * sheet.get(r, jp);
            for rp in 0..r {
                acc += sheet.get(r, j) * sheet.get(rp, jp) - sheet.get(r, jp) * sheet.get(rp, j);
            }
        }
        0.5 * acc
    }

    #[test]
    fn tfim2_pairs_and_table() {
        let poly = CostPolynomial::compile(&tfim2(false), false).unwrap();
        assert_eq!(poly.pair_list(), vec![(1, 0), (2, 0)]);
        let table = poly.trace_table2();
        assert_eq!(table, vec![vec![-4.0, 0.0], vec![0.0, -4.0]]);
    }

    #[test]
    fn commuting_model_is_free() {
        let terms = ["ZZI", "IZZ", "ZIZ"]
            .iter()
            .map(|l| Term {
                label: l.to_string(),
                coeff: 1.0,
                pauli: PauliString::from_label(l).unwrap(),
            })
            .collect();
        let model = HamiltonianModel::from_terms(3, terms, true).unwrap();
        let poly = CostPolynomial::compile(&model, true).unwrap();
        assert!(poly.pair_list().is_empty());
        let sheet = random_sheet(&model, 3, 0.7, 1);
        assert_eq!(poly.cost_sq(&sheet).unwrap(), 0.0);
        assert!(poly.grad_cost_sq(&sheet).unwrap().iter().all(|g| *g == 0.0));
        assert_eq!(poly.error_term(&sheet).unwrap(), 0.0);
    }

    #[test]
    fn xy2_cross_entry_sign() {
        let model = CouplingSpec::xy(Connectivity::Full { n: 2 }, 0).uniform().build().unwrap();
        // terms: X0, X1, YY, ZZ
        let poly = CostPolynomial::compile(&model, false).unwrap();
        let pairs = poly.pair_list();
        let a = pairs.iter().position(|&p| p == (3, 1)).unwrap();
        let b = pairs.iter().position(|&p| p == (2, 0)).unwrap();
        assert_eq!(poly.trace_entry(a, b), 4.0);
        let lhs = PauliString::from_label("ZZ").unwrap().commutator(&PauliString::from_label("IX").unwrap()).unwrap();
        let rhs = PauliString::from_label("YY").unwrap().commutator(&PauliString::from_label("XI").unwrap()).unwrap();
        assert_eq!(lhs.trace_product(&rhs).unwrap().re, 4.0);
    }

    #[test]
    fn trotter_chi_and_closed_form() {
        let model = tfim2(false);
        let poly = CostPolynomial::compile(&model, false).unwrap();
        let (t, r) = (0.1, 3);
        let sheet = ParamSheet::trotter(r, t, &model.coefficients()).unwrap();
        let chi = poly.chi_of(&sheet).unwrap();
        let c = model.coefficients();
        for (&(j, jp), &v) in chi.pairs.iter().zip(&chi.chi) {
            assert!((v - t * t * c[j] * c[jp] / (2.0 * r as f64)).abs() < 1e-16);
        }
        let expected = t.powi(4) * (0.0625 + 0.0625) / 9.0;
        let got = poly.cost_sq(&sheet).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected);
        assert!((got - 1.3889e-6).abs() < 1e-10);
        assert!((got.sqrt() - 1.1785e-3).abs() < 1e-7);
    }

    #[test]
    fn zero_sheet_has_zero_chi() {
        let model = tfim2(true);
        let poly = CostPolynomial::compile(&model, true).unwrap();
        let sheet = ParamSheet::unconstrained(2, vec![0.0; 6], 0.4, model.coefficients()).unwrap();
        let chi = poly.chi_of(&sheet).unwrap();
        assert!(chi.chi.iter().all(|v| *v == 0.0));
        let c = model.coefficients();
        for (x, cj) in chi.xi.iter().zip(&c) {
            assert_eq!(*x, -0.4 * cj);
        }
        assert_eq!(poly.error_term(&sheet).unwrap(), 0.0);
        assert_eq!(poly.lambda_rest(&sheet).unwrap(), 0.0);
    }

    #[test]
    fn chi_matches_naive_loop() {
        let model = CouplingSpec::custom(
            vec![
                crate::model::CustomTerm { pauli: "XZ".into(), coeff: 0.4 },
                crate::model::CustomTerm { pauli: "ZY".into(), coeff: -0.9 },
            ],
            false,
        )
        .build()
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let theta: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sheet = ParamSheet::unconstrained(3, theta, 1.0, model.coefficients()).unwrap();
            let naive = naive_chi(&sheet, 1, 0);
            assert!((chi_entry(&sheet, 1, 0) - naive).abs() < 1e-14);
        }
    }

    /// The closed form for the constrained case must agree with direct
    /// substitution of the slaved last layer.
    #[test]
    fn constrained_chi_closed_form_agrees() {
        let model = xy3x3();
        let sheet = random_sheet(&model, 4, 0.3, 8);
        let c = model.coefficients();
        let (t, rr) = (sheet.time(), sheet.layers() - 1);
        for &(j, jp) in CostPolynomial::compile(&model, false).unwrap().pair_list().iter().take(20) {
            let a: f64 = (0..rr).map(|r| sheet.get(r, j)).sum();
            let mut v = 0.5 * t * t * c[j] * c[jp] - t * c[jp] * a;
            for r in 0..rr {
                v += sheet.get(r, j) * sheet.get(r, jp);
                for rp in 0..r {
                    v += sheet.get(r, j) * sheet.get(rp, jp);
                }
            }
            assert!((v - chi_entry(&sheet, j, jp)).abs() < 1e-15);
        }
    }

    #[test]
    fn trotter_gradient_nonzero_on_xy() {
        let model = xy3x3();
        let poly = CostPolynomial::compile(&model, false).unwrap();
        let t = 0.5 / 18f64.sqrt();
        let sheet = ParamSheet::trotter(3, t, &model.coefficients()).unwrap();
        let (c2, g) = poly.cost_sq_and_grad(&sheet).unwrap();
        assert!(c2 > 0.0);
        assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-8);
    }

    #[test]
    fn cost_matches_pauli_sum_accumulation() {
        let model = xy3x3();
        let poly = CostPolynomial::compile(&model, false).unwrap();
        let sheet = random_sheet(&model, 3, 0.4, 5);
        let mut op = PauliSum::new(model.n()).unwrap();
        let terms = model.terms();
        for j in 0..terms.len() {
            for jp in 0..j {
                let comm = terms[j].pauli.commutator(&terms[jp].pauli).unwrap();
                op.add_scaled(&comm, Complex64::new(naive_chi(&sheet, j, jp), 0.0)).unwrap();
            }
        }
        let want = op.norm_sq();
        let got = poly.cost_sq(&sheet).unwrap();
        assert!((got - want).abs() < 1e-10 * want);
    }

    #[test]
    fn unconstrained_gradient_matches_differences() {
        let model = xy3x3();
        let poly = CostPolynomial::compile(&model, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta: Vec<f64> = (0..3 * model.len()).map(|_| rng.random_range(-0.2..0.2)).collect();
        let sheet = ParamSheet::unconstrained(3, theta.clone(), 0.3, model.coefficients()).unwrap();
        let g = poly.grad_cost_sq(&sheet).unwrap();
        for i in (0..theta.len()).step_by(7) {
            let h = 1e-6;
            let mut p = theta.clone();
            p[i] += h;
            let mut mm = theta.clone();
            mm[i] -= h;
            let f = |v: Vec<f64>| {
                poly.cost_sq(&ParamSheet::unconstrained(3, v, 0.3, model.coefficients()).unwrap()).unwrap()
            };
            let fd = (f(p) - f(mm)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-8), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn missing_tables_are_reported() {
        let model = tfim2(true);
        let poly = CostPolynomial::compile(&model, false).unwrap();
        let sheet = ParamSheet::trotter(2, 0.1, &model.coefficients()).unwrap();
        assert!(matches!(poly.error_term(&sheet), Err(Error::MissingThirdOrder)));
        assert!(matches!(poly.lambda_rest(&sheet), Err(Error::MissingThirdOrder)));
        let wrong = ParamSheet::trotter(2, 0.1, &[1.0]).unwrap();
        assert!(poly.cost_sq(&wrong).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let opts = CompileOptions {
            third_order: false,
            budget: 3,
        };
        assert!(matches!(
            CostPolynomial::compile_with(&xy3x3(), opts),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn repetition_identities() {
        let model = xy3x3();
        let poly = CostPolynomial::compile(&model, true).unwrap();
        let sheet = random_sheet(&model, 3, 0.2, 4);
        let c1 = poly.cost(&sheet).unwrap();
        let chi1 = poly.chi_of(&sheet).unwrap();
        for k in [1usize, 2, 5, 17] {
            let rep = sheet.repeat_sheet(k).unwrap();
            let ck = poly.cost(&rep).unwrap();
            assert!((ck - k as f64 * c1).abs() <= 1e-12 * k as f64 * c1);
            let chik = poly.chi_of(&rep).unwrap();
            let scale = chi1.chi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in chik.chi.iter().zip(&chi1.chi) {
                assert!((a - k as f64 * b).abs() <= 1e-13 * k as f64 * scale);
            }
            let direct = poly.error_term(&rep).unwrap();
            let from_tables = poly.repeated_error_term(&sheet, k).unwrap();
            assert!((direct - from_tables).abs() <= 1e-10 * direct);
            assert!(direct <= poly.repeated_error_bound(&sheet, k).unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn unit_cell_matches_chain() {
        let chain = |n: usize| {
            CouplingSpec::tfim(
                Connectivity::Lattice {
                    nx: n,
                    ny: 1,
                    periodic: true,
                },
                0,
            )
            .uniform()
            .build()
            .unwrap()
        };
        let m6 = chain(6);
        let unit = UnitCellCost::new(&m6, 2).unwrap();
        assert_eq!(unit.classes(), 2);
        let shared = unit.shared_sheet(3, &[-0.05, 0.02, -0.03, 0.015], 0.1).unwrap();
        let c_unit = unit.value(&shared).unwrap();
        let full = expand_shared(&m6.translation().unwrap().term_class, &shared).unwrap();
        let c_full = CostPolynomial::compile(&m6, false).unwrap().cost(&full).unwrap();
        assert!((c_full - 6f64.sqrt() * c_unit).abs() < 1e-12 * c_full);
    }
}
