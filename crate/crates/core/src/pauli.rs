//! Phase-exact algebra of n-qubit Pauli strings.
//!
//! A string is stored in symplectic form: bit `q` of `x_mask`/`z_mask`
//! encodes the factor on qubit `q` as `00 = I`, `10 = X`, `11 = Y`,
//! `01 = Z`. The global prefactor is an element of `{±1, ±i}` times a real
//! scale, so products never accumulate floating-point phase error.
//!
//! Dense realizations use little-endian basis indices: qubit `q` is bit `q`
//! of the computational-basis index.

use std::collections::BTreeMap;
use std::fmt;

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coefficients below this magnitude are dropped from a [`PauliSum`].
pub const CANONICAL_EPS: f64 = 1e-14;

/// Default ceiling on qubit count for dense realizations.
pub const DENSE_LIMIT: usize = 12;

/// Largest supported qubit count (one machine word per mask).
pub const MAX_QUBITS: usize = 64;

/// Power of `i`: `One = i⁰`, `I = i¹`, `MinusOne = i²`, `MinusI = i³`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Phase {
    #[default]
    One,
    I,
    MinusOne,
    MinusI,
}

impl Phase {
    pub fn from_power(k: u32) -> Self {
        match k & 3 {
            0 => Phase::One,
            1 => Phase::I,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn power(self) -> u32 {
        self as u32
    }

    pub fn to_complex(self) -> Complex64 {
        match self {
            Phase::One => Complex64::new(1.0, 0.0),
            Phase::I => Complex64::new(0.0, 1.0),
            Phase::MinusOne => Complex64::new(-1.0, 0.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, Phase::One | Phase::MinusOne)
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase::from_power(self.power() + rhs.power())
    }
}

impl std::ops::Neg for Phase {
    type Output = Phase;
    fn neg(self) -> Phase {
        Phase::from_power(self.power() + 2)
    }
}

/// An n-qubit Pauli string with prefactor `phase · scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    phase: Phase,
    scale: f64,
}

fn mask_for(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidConfig(format!(
            "qubit count {n} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// Power of `i` picked up by `X^{x1} Z^{z1} · X^{x2} Z^{z2}` once both
/// operands are written in the `i^{|x∧z|} X^x Z^z` form.
#[inline]
pub(crate) fn product_phase_power(x1: u64, z1: u64, x2: u64, z2: u64) -> u32 {
    let x3 = x1 ^ x2;
    let z3 = z1 ^ z2;
    let k = (x1 & z1).count_ones() + (x2 & z2).count_ones() + 2 * (z1 & x2).count_ones();
    // subtracting |x3∧z3| is adding 3·|x3∧z3| mod 4
    k + 3 * (x3 & z3).count_ones()
}

#[inline]
pub(crate) fn anticommutes(x1: u64, z1: u64, x2: u64, z2: u64) -> bool {
    ((x1 & z2).count_ones() + (z1 & x2).count_ones()) % 2 == 1
}

impl PauliString {
    pub fn new(n: usize, x_mask: u64, z_mask: u64) -> Result<Self> {
        check_qubits(n)?;
        let m = mask_for(n);
        if x_mask & !m != 0 || z_mask & !m != 0 {
            return Err(Error::InvalidConfig(format!(
                "mask bits set beyond qubit count {n}"
            )));
        }
        Ok(Self {
            n,
            x: x_mask,
            z: z_mask,
            phase: Phase::One,
            scale: 1.0,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, 0, 0)
    }

    /// Parses a label such as `"XIZY"`; character `q` acts on qubit `q`.
    pub fn from_label(label: &str) -> Result<Self> {
        let chars: Vec<char> = label.chars().filter(|c| !c.is_whitespace()).collect();
        let n = chars.len();
        check_qubits(n)?;
        let (mut x, mut z) = (0u64, 0u64);
        for (q, c) in chars.iter().enumerate() {
            match c.to_ascii_uppercase() {
                'I' => {}
                'X' => x |= 1 << q,
                'Y' => {
                    x |= 1 << q;
                    z |= 1 << q;
                }
                'Z' => z |= 1 << q,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown Pauli symbol '{other}' in \"{label}\""
                    )))
                }
            }
        }
        Self::new(n, x, z)
    }

    /// Product of single-qubit factors, e.g. `&[(0, 'Z'), (3, 'Z')]`.
    pub fn from_sparse(n: usize, factors: &[(usize, char)]) -> Result<Self> {
        check_qubits(n)?;
        let mut label = vec!['I'; n];
        for &(q, c) in factors {
            if q >= n {
                return Err(Error::InvalidConfig(format!(
                    "qubit {q} out of range for {n} qubits"
                )));
            }
            label[q] = c;
        }
        Self::from_label(&label.into_iter().collect::<String>())
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn key(&self) -> (u64, u64) {
        (self.x, self.z)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `phase · scale` as a complex number.
    pub fn coefficient(&self) -> Complex64 {
        self.phase.to_complex() * self.scale
    }

    /// Qubits with a non-identity factor.
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> usize {
        self.support().count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.support() == 0
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase.is_real()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        !anticommutes(self.x, self.z, other.x, other.z)
    }

    /// Label without prefactor, qubit 0 first.
    pub fn label(&self) -> String {
        (0..self.n)
            .map(|q| match ((self.x >> q) & 1, (self.z >> q) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (1, 1) => 'Y',
                _ => 'Z',
            })
            .collect()
    }

    fn check_same(&self, other: &PauliString) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    /// Phase-exact product `self · other`.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        self.check_same(other)?;
        let k = product_phase_power(self.x, self.z, other.x, other.z);
        Ok(PauliString {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: self.phase * other.phase * Phase::from_power(k),
            scale: self.scale * other.scale,
        })
    }

    /// `self·other − other·self`: zero, or `2·self·other` when they
    /// anticommute.
    pub fn commutator(&self, other: &PauliString) -> Result<PauliSum> {
        self.check_same(other)?;
        let mut out = PauliSum::new(self.n)?;
        if anticommutes(self.x, self.z, other.x, other.z) {
            let p = self.multiply(other)?;
            out.add_string(&p, Complex64::new(2.0, 0.0));
        }
        Ok(out)
    }

    /// Matrix element `<row| P |row ⊕ x>`, the only non-zero entry in `row`.
    #[inline]
    pub(crate) fn row_entry(&self, row: usize) -> Complex64 {
        let col = row as u64 ^ self.x;
        let k = (self.x & self.z).count_ones() + 2 * (self.z & col).count_ones();
        self.coefficient() * Phase::from_power(k).to_complex()
    }

    pub fn to_dense(&self) -> Result<Mat<Complex64>> {
        PauliSum::from_string(self).to_dense()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.phase {
            Phase::One => "",
            Phase::I => "i·",
            Phase::MinusOne => "-",
            Phase::MinusI => "-i·",
        };
        if self.scale == 1.0 {
            write!(f, "{p}{}", self.label())
        } else {
            write!(f, "{p}{}·{}", self.scale, self.label())
        }
    }
}

/// Linear combination of Pauli strings keyed by `(x_mask, z_mask)`.
///
/// Each key stands for the Hermitian string with unit prefactor, so
/// distinct keys are orthonormal under `2^{-n} Tr(A† B)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n: usize,
    terms: BTreeMap<(u64, u64), Complex64>,
}

impl PauliSum {
    pub fn new(n: usize) -> Result<Self> {
        check_qubits(n)?;
        Ok(Self {
            n,
            terms: BTreeMap::new(),
        })
    }

    pub fn from_string(p: &PauliString) -> Self {
        let mut s = Self {
            n: p.n,
            terms: BTreeMap::new(),
        };
        s.add_string(p, Complex64::new(1.0, 0.0));
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, key: (u64, u64)) -> Complex64 {
        self.terms.get(&key).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u64, u64), Complex64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    fn insert(&mut self, key: (u64, u64), value: Complex64) {
        let entry = self.terms.entry(key).or_default();
        *entry += value;
        if entry.norm() < CANONICAL_EPS {
            self.terms.remove(&key);
        }
    }

    /// Adds `weight · p`, folding the string's own prefactor into the
    /// coefficient.
    pub fn add_string(&mut self, p: &PauliString, weight: Complex64) {
        debug_assert_eq!(p.n, self.n);
        self.insert(p.key(), weight * p.coefficient());
    }

    /// `self += weight · other`.
    pub fn add_scaled(&mut self, other: &PauliSum, weight: Complex64) -> Result<()> {
        self.check_same(other)?;
        for (k, v) in other.iter() {
            self.insert(k, weight * v);
        }
        Ok(())
    }

    pub fn scaled(&self, weight: Complex64) -> PauliSum {
        let mut out = PauliSum {
            n: self.n,
            terms: BTreeMap::new(),
        };
        for (k, v) in self.iter() {
            out.insert(k, weight * v);
        }
        out
    }

    fn check_same(&self, other: &PauliSum) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    /// Operator product `self · other`.
    pub fn multiply(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_same(other)?;
        let mut out = PauliSum::new(self.n)?;
        for (&(x1, z1), &a) in &self.terms {
            for (&(x2, z2), &b) in &other.terms {
                // both keys are Hermitian strings, so undo their internal i^{|x∧z|}
                let k = product_phase_power(x1, z1, x2, z2);
                out.insert((x1 ^ x2, z1 ^ z2), a * b * Phase::from_power(k).to_complex());
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        let mut ab = self.multiply(other)?;
        let ba = other.multiply(self)?;
        ab.add_scaled(&ba, Complex64::new(-1.0, 0.0))?;
        Ok(ab)
    }

    /// `2^{-n} Tr(self† · other)`.
    pub fn hs_inner(&self, other: &PauliSum) -> Result<Complex64> {
        self.check_same(other)?;
        Ok(self
            .terms
            .iter()
            .filter_map(|(k, a)| other.terms.get(k).map(|b| a.conj() * b))
            .sum())
    }

    /// `2^{-n} Tr(self · other)` with no adjoint.
    pub fn trace_product(&self, other: &PauliSum) -> Result<Complex64> {
        self.check_same(other)?;
        Ok(self
            .terms
            .iter()
            .filter_map(|(k, a)| other.terms.get(k).map(|b| a * b))
            .sum())
    }

    /// Squared normalized Hilbert–Schmidt norm, `Σ |coeff|²`.
    pub fn norm_sq(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn to_dense(&self) -> Result<Mat<Complex64>> {
        self.to_dense_with_limit(DENSE_LIMIT)
    }

    pub fn to_dense_with_limit(&self, limit: usize) -> Result<Mat<Complex64>> {
        if self.n > limit {
            return Err(Error::Capacity(format!(
                "{} qubits exceeds the dense limit of {limit}",
                self.n
            )));
        }
        let dim = 1usize << self.n;
        let mut m = Mat::<Complex64>::zeros(dim, dim);
        for (&(x, z), &c) in &self.terms {
            let p = PauliString {
                n: self.n,
                x,
                z,
                phase: Phase::One,
                scale: 1.0,
            };
            for row in 0..dim {
                let col = row ^ x as usize;
                m[(row, col)] += c * p.row_entry(row);
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(label: &str) -> PauliString {
        PauliString::from_label(label).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn kron(a: &Mat<Complex64>, b: &Mat<Complex64>) -> Mat<Complex64> {
        let (ra, ca) = (a.nrows(), a.ncols());
        let (rb, cb) = (b.nrows(), b.ncols());
        Mat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
    }

    fn single(ch: char) -> Mat<Complex64> {
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        let e = match ch {
            'I' => [o, z, z, o],
            'X' => [z, o, o, z],
            'Y' => [z, -i, i, z],
            _ => [o, z, z, -o],
        };
        Mat::from_fn(2, 2, |r, k| e[2 * r + k])
    }

    /// Independent dense construction: kron with qubit n-1 as the most
    /// significant factor.
    fn kron_dense(p: &PauliString) -> Mat<Complex64> {
        let label: Vec<char> = p.label().chars().collect();
        let mut m = single(label[label.len() - 1]);
        for &ch in label.iter().rev().skip(1) {
            m = kron(&m, &single(ch));
        }
        let coeff = p.coefficient();
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| coeff * m[(i, j)])
    }

    fn max_diff(a: &Mat<Complex64>, b: &Mat<Complex64>) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                d = d.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        d
    }

    #[test]
    fn xy_is_iz() {
        let p = ps("XI").multiply(&ps("YI")).unwrap();
        assert_eq!(p.key(), ps("ZI").key());
        assert_eq!(p.phase(), Phase::I);
    }

    #[test]
    fn identity_is_neutral() {
        let p = ps("XYZ").with_phase(Phase::MinusI);
        let id = PauliString::identity(3).unwrap();
        assert_eq!(p.multiply(&id).unwrap(), p);
        assert_eq!(id.multiply(&p).unwrap(), p);
    }

    #[test]
    fn zz_times_xi_matches_dense() {
        let p = ps("ZZ").multiply(&ps("XI")).unwrap();
        assert_eq!(p.label(), "YZ");
        assert_eq!(p.phase(), Phase::I);
        let dense = &kron_dense(&ps("ZZ")) * &kron_dense(&ps("XI"));
        assert!(max_diff(&dense, &kron_dense(&p)) < 1e-15);
    }

    #[test]
    fn mismatched_qubits_error() {
        assert!(matches!(
            ps("X").multiply(&ps("XX")),
            Err(Error::DimensionMismatch { left: 1, right: 2 })
        ));
        assert!(ps("X").commutator(&ps("XX")).is_err());
        let a = PauliSum::from_string(&ps("X"));
        let b = PauliSum::from_string(&ps("XX"));
        assert!(a.hs_inner(&b).is_err());
        assert!(a.trace_product(&b).is_err());
    }

    #[test]
    fn masks_beyond_n_rejected() {
        assert!(PauliString::new(2, 0b100, 0).is_err());
        assert!(PauliString::new(0, 0, 0).is_err());
        assert!(PauliString::from_label("XQ").is_err());
    }

    #[test]
    fn commutator_examples() {
        assert!(ps("ZZ").commutator(&ps("ZI")).unwrap().is_empty());

        let c1 = ps("ZZ").commutator(&ps("XI")).unwrap();
        assert_eq!(c1.len(), 1);
        assert_eq!(c1.coefficient(ps("YZ").key()), c(0.0, 2.0));
        let dense = {
            let a = kron_dense(&ps("ZZ"));
            let b = kron_dense(&ps("XI"));
            &(&a * &b) - &(&b * &a)
        };
        assert!(max_diff(&dense, &c1.to_dense().unwrap()) < 1e-15);

        let c2 = ps("YY").commutator(&ps("XI")).unwrap();
        assert_eq!(c2.coefficient(ps("ZY").key()), c(0.0, -2.0));
        let dense = {
            let a = kron_dense(&ps("YY"));
            let b = kron_dense(&ps("XI"));
            &(&a * &b) - &(&b * &a)
        };
        assert!(max_diff(&dense, &c2.to_dense().unwrap()) < 1e-15);
    }

    #[test]
    fn inner_products() {
        let x = PauliSum::from_string(&ps("XI"));
        let z = PauliSum::from_string(&ps("ZI"));
        assert_eq!(x.hs_inner(&x).unwrap(), c(1.0, 0.0));
        assert_eq!(x.hs_inner(&z).unwrap(), c(0.0, 0.0));

        let comm = ps("ZZ").commutator(&ps("XI")).unwrap();
        assert_eq!(comm.hs_inner(&comm).unwrap(), c(4.0, 0.0));
        assert_eq!(comm.trace_product(&comm).unwrap(), c(-4.0, 0.0));

        let id = PauliSum::from_string(&PauliString::identity(2).unwrap());
        assert_eq!(id.trace_product(&id).unwrap(), c(1.0, 0.0));

        let other = ps("YY").commutator(&ps("XI")).unwrap();
        assert_eq!(comm.trace_product(&other).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn trace_product_matches_dense_trace() {
        let a = ps("ZZ").commutator(&ps("XI")).unwrap();
        let b = ps("YY").commutator(&ps("XI")).unwrap();
        for (p, q) in [(&a, &a), (&a, &b), (&b, &b)] {
            let m = &p.to_dense().unwrap() * &q.to_dense().unwrap();
            let tr: Complex64 = (0..4).map(|i| m[(i, i)]).sum::<Complex64>() / 4.0;
            assert!((tr - p.trace_product(q).unwrap()).norm() < 1e-15);
        }
    }

    #[test]
    fn dense_basics() {
        let id = PauliString::identity(1).unwrap().to_dense().unwrap();
        assert_eq!(id[(0, 0)], c(1.0, 0.0));
        assert_eq!(id[(0, 1)], c(0.0, 0.0));
        let x = ps("X").to_dense().unwrap();
        assert_eq!(x[(0, 1)], c(1.0, 0.0));
        assert_eq!(x[(1, 0)], c(1.0, 0.0));
        assert_eq!(x[(0, 0)], c(0.0, 0.0));
        let zz = ps("ZZ").to_dense().unwrap();
        let diag: Vec<f64> = (0..4).map(|i| zz[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn dense_limit_is_enforced() {
        let p = PauliString::identity(13).unwrap();
        assert!(matches!(p.to_dense(), Err(Error::Capacity(_))));
        assert!(PauliSum::from_string(&ps("XX"))
            .to_dense_with_limit(1)
            .is_err());
    }

    #[test]
    fn dust_is_canonicalized_away() {
        let mut s = PauliSum::from_string(&ps("XZ"));
        s.add_string(&ps("XZ"), c(-1.0 + 1e-16, 0.0));
        assert!(s.is_empty());
    }

    #[test]
    fn dense_matches_kron_construction() {
        for label in ["XYZ", "YIY", "ZXI", "IIY"] {
            let p = ps(label).with_phase(Phase::MinusI).with_scale(0.5);
            assert!(max_diff(&p.to_dense().unwrap(), &kron_dense(&p)) < 1e-15);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
            let m = mask_for(n);
            (any::<u64>(), any::<u64>(), 0u32..4).prop_map(move |(x, z, k)| {
                PauliString::new(n, x & m, z & m)
                    .unwrap()
                    .with_phase(Phase::from_power(k))
            })
        }

        fn arb_pair() -> impl Strategy<Value = (PauliString, PauliString)> {
            (1usize..=6).prop_flat_map(|n| (arb_string(n), arb_string(n)))
        }

        fn arb_triple() -> impl Strategy<Value = (PauliString, PauliString, PauliString)> {
            (1usize..=6).prop_flat_map(|n| (arb_string(n), arb_string(n), arb_string(n)))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn product_is_phase_exact((p, q) in arb_pair()) {
                let pq = p.multiply(&q).unwrap();
                let dense = &kron_dense(&p) * &kron_dense(&q);
                prop_assert!(max_diff(&dense, &kron_dense(&pq)) < 1e-12);
                prop_assert!(max_diff(&pq.to_dense().unwrap(), &dense) < 1e-12);
            }
        }

        proptest! {
            #[test]
            fn product_is_associative((p, q, r) in arb_triple()) {
                let left = p.multiply(&q).unwrap().multiply(&r).unwrap();
                let right = p.multiply(&q.multiply(&r).unwrap()).unwrap();
                prop_assert_eq!(left, right);
            }

            #[test]
            fn squares_to_scalar_identity(p in (1usize..=6).prop_flat_map(arb_string)) {
                let sq = p.multiply(&p).unwrap();
                prop_assert!(sq.is_identity());
                prop_assert!(sq.phase().is_real());
            }

            #[test]
            fn commutator_is_antisymmetric((p, q) in arb_pair()) {
                let pq = p.commutator(&q).unwrap();
                let qp = q.commutator(&p).unwrap();
                prop_assert_eq!(pq, qp.scaled(c(-1.0, 0.0)));
            }

            #[test]
            fn hs_norm_is_coefficient_sum(
                (p, q) in arb_pair(),
                a in -2.0f64..2.0,
                b in -2.0f64..2.0,
            ) {
                let mut s = PauliSum::from_string(&p).scaled(c(a, 0.0));
                s.add_string(&q, c(0.0, b));
                let inner = s.hs_inner(&s).unwrap();
                prop_assert!(inner.im.abs() < 1e-15);
                prop_assert!(inner.re >= 0.0);
                prop_assert!((inner.re - s.norm_sq()).abs() < 1e-12);
            }

            #[test]
            fn anti_hermitian_trace_product_is_real((p, q) in arb_pair()) {
                let p = p.with_phase(Phase::One);
                let q = q.with_phase(Phase::One);
                let a = p.commutator(&q).unwrap();
                let b = q.commutator(&p).unwrap();
                prop_assert!(a.trace_product(&b).unwrap().im.abs() < 1e-15);
            }
        }
    }
}
