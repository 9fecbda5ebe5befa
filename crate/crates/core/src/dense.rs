//! Exact dense-matrix oracle for small systems.
//!
//! Exponentials of single Pauli strings are applied in place as
//! `cos θ · I − i sin θ · P`, which touches each entry once and never forms
//! a matrix product. The exact propagator comes from one Hermitian
//! eigendecomposition that is reused for every time.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::HamiltonianModel;
use crate::pauli::{PauliString, DENSE_LIMIT};
use crate::sheet::ParamSheet;

pub type DenseMatrix = Mat<Complex64>;

fn check_size(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::Capacity(format!(
            "{n} qubits exceeds the dense limit of {DENSE_LIMIT}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DenseUnitary {
    m: Mat<Complex64>,
}

impl DenseUnitary {
    pub fn identity(n: usize) -> Result<Self> {
        check_size(n)?;
        let dim = 1usize << n;
        Ok(Self {
            m: Mat::from_fn(dim, dim, |i, j| {
                if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::default()
                }
            }),
        })
    }

    /// Wraps a matrix without checking unitarity.
    pub fn from_matrix(m: Mat<Complex64>) -> Self {
        Self { m }
    }

    pub fn matrix(&self) -> &Mat<Complex64> {
        &self.m
    }

    pub fn into_matrix(self) -> Mat<Complex64> {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// `self · other`.
    pub fn mul(&self, other: &DenseUnitary) -> DenseUnitary {
        DenseUnitary {
            m: &self.m * &other.m,
        }
    }

    pub fn adjoint(&self) -> DenseUnitary {
        DenseUnitary {
            m: self.m.adjoint().to_owned(),
        }
    }

    /// `self^k` by repeated squaring.
    pub fn pow(&self, mut k: usize) -> DenseUnitary {
        let mut result: Option<Mat<Complex64>> = None;
        let mut base = self.m.clone();
        loop {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => &r * &base,
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            base = &base * &base;
        }
        match result {
            Some(m) => DenseUnitary { m },
            None => DenseUnitary {
                m: Mat::from_fn(self.dim(), self.dim(), |i, j| {
                    if i == j {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::default()
                    }
                }),
            },
        }
    }

    /// Left-multiplies by `exp(−iθP)` for a Hermitian string `P`.
    pub fn apply_rotation(&mut self, p: &PauliString, theta: f64) {
        let dim = self.dim();
        let (s, c) = theta.sin_cos();
        let f: Vec<Complex64> = (0..dim)
            .map(|a| Complex64::new(0.0, -s) * p.row_entry(a))
            .collect();
        let x = p.x_mask() as usize;
        for col in 0..dim {
            let v = self.m.col_as_slice_mut(col);
            if x == 0 {
                for a in 0..dim {
                    v[a] *= c + f[a];
                }
                continue;
            }
            let high = 1usize << (usize::BITS - 1 - x.leading_zeros());
            for a in 0..dim {
                if a & high != 0 {
                    continue;
                }
                let b = a ^ x;
                let (va, vb) = (v[a], v[b]);
                v[a] = va * c + f[a] * vb;
                v[b] = vb * c + f[b] * va;
            }
        }
    }

    /// Normalized Frobenius distance `‖U†U − I‖`.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.m.adjoint() * &self.m;
        let dim = self.dim();
        let mut acc = 0.0;
        for j in 0..dim {
            for i in 0..dim {
                let want = if i == j { 1.0 } else { 0.0 };
                acc += (prod[(i, j)] - want).norm_sqr();
            }
        }
        (acc / dim as f64).sqrt()
    }
}

/// `sqrt(2^{-n} Σ |u_ab − v_ab|²)`.
pub fn epsilon(u: &DenseUnitary, v: &DenseUnitary) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            left: u.dim().trailing_zeros() as usize,
            right: v.dim().trailing_zeros() as usize,
        });
    }
    let dim = u.dim();
    let mut acc = 0.0;
    for j in 0..dim {
        let (a, b) = (u.m.col_as_slice(j), v.m.col_as_slice(j));
        for i in 0..dim {
            acc += (a[i] - b[i]).norm_sqr();
        }
    }
    Ok((acc / dim as f64).sqrt())
}

/// Eigendecomposition of a model's dense Hamiltonian, giving `exp(−itH)`
/// for any `t` at the price of one matrix product.
#[derive(Clone, Debug)]
pub struct SpectralPropagator {
    vectors: Mat<Complex64>,
    values: Vec<f64>,
}

impl SpectralPropagator {
    pub fn new(model: &HamiltonianModel) -> Result<Self> {
        check_size(model.n())?;
        let h = model.to_pauli_sum().to_dense()?;
        let eig = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
        let values = eig.S().column_vector().iter().map(|v| v.re).collect();
        Ok(Self {
            vectors: eig.U().to_owned(),
            values,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, t: f64) -> DenseUnitary {
        let phases: Vec<Complex64> = self
            .values
            .iter()
            .map(|l| Complex64::from_polar(1.0, -t * l))
            .collect();
        let dim = self.values.len();
        let scaled = Mat::from_fn(dim, dim, |i, j| self.vectors[(i, j)] * phases[j]);
        DenseUnitary {
            m: &scaled * self.vectors.adjoint(),
        }
    }
}

/// `exp(−itH)`.
pub fn propagator(model: &HamiltonianModel, t: f64) -> Result<DenseUnitary> {
    Ok(SpectralPropagator::new(model)?.at(t))
}

fn check_sheet(model: &HamiltonianModel, sheet: &ParamSheet) -> Result<()> {
    if sheet.terms() != model.len() {
        return Err(Error::InvalidConfig(format!(
            "sheet has {} terms, model has {}",
            sheet.terms(),
            model.len()
        )));
    }
    Ok(())
}

/// `∏_r ∏_j exp(−iθ_{r,j} H_j)` with `(0, 0)` applied first.
pub fn ansatz_unitary(model: &HamiltonianModel, sheet: &ParamSheet) -> Result<DenseUnitary> {
    check_sheet(model, sheet)?;
    let mut u = DenseUnitary::identity(model.n())?;
    for r in 0..sheet.layers() {
        for (j, term) in model.terms().iter().enumerate() {
            u.apply_rotation(&term.pauli, sheet.get(r, j));
        }
    }
    Ok(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum TrotterOrder {
    First,
    Second,
    Fourth,
}

impl TrotterOrder {
    pub const ALL: [TrotterOrder; 3] = [TrotterOrder::First, TrotterOrder::Second, TrotterOrder::Fourth];

    pub fn from_q(q: u32) -> Result<Self> {
        match q {
            1 => Ok(TrotterOrder::First),
            2 => Ok(TrotterOrder::Second),
            4 => Ok(TrotterOrder::Fourth),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }

    pub fn q(self) -> u32 {
        match self {
            TrotterOrder::First => 1,
            TrotterOrder::Second => 2,
            TrotterOrder::Fourth => 4,
        }
    }

    /// Exponentials per step for `m` terms, merging the middle pair of a
    /// symmetric step.
    pub fn exponentials_per_step(self, m: usize) -> usize {
        match self {
            TrotterOrder::First => m,
            TrotterOrder::Second => 2 * m - 1,
            TrotterOrder::Fourth => 5 * (2 * m - 1),
        }
    }
}

/// Weight of the outer stages of the fourth-order recursion.
pub fn fourth_order_weight() -> f64 {
    1.0 / (4.0 - 4f64.powf(1.0 / 3.0))
}

fn strang(model: &HamiltonianModel, u: &mut DenseUnitary, tau: f64) {
    let terms = model.terms();
    let last = terms.len() - 1;
    for t in &terms[..last] {
        u.apply_rotation(&t.pauli, 0.5 * tau * t.coeff);
    }
    u.apply_rotation(&terms[last].pauli, tau * terms[last].coeff);
    for t in terms[..last].iter().rev() {
        u.apply_rotation(&t.pauli, 0.5 * tau * t.coeff);
    }
}

/// One step of duration `tau`.
pub fn trotter_step(model: &HamiltonianModel, tau: f64, order: TrotterOrder) -> Result<DenseUnitary> {
    let mut u = DenseUnitary::identity(model.n())?;
    match order {
        TrotterOrder::First => {
            for t in model.terms() {
                u.apply_rotation(&t.pauli, tau * t.coeff);
            }
        }
        TrotterOrder::Second => strang(model, &mut u, tau),
        TrotterOrder::Fourth => {
            let s = fourth_order_weight();
            for w in [s, s, 1.0 - 4.0 * s, s, s] {
                strang(model, &mut u, w * tau);
            }
        }
    }
    Ok(u)
}

/// `R` steps of duration `t/R`. First order is built exponential by
/// exponential, exactly as the ansatz at its Trotter point; higher orders
/// power a single step.
pub fn trotter_unitary(model: &HamiltonianModel, t: f64, steps: usize, q: u32) -> Result<DenseUnitary> {
    let order = TrotterOrder::from_q(q)?;
    if steps == 0 {
        return Err(Error::InvalidConfig("Trotter step count must be ≥ 1".into()));
    }
    match order {
        TrotterOrder::First => ansatz_unitary(model, &ParamSheet::trotter(steps, t, &model.coefficients())?),
        _ => Ok(trotter_step(model, t / steps as f64, order)?.pow(steps)),
    }
}

/// `ε(U(Kt), U_var^K)` with the single step raised to the `K`-th power.
pub fn repeated_epsilon(model: &HamiltonianModel, sheet: &ParamSheet, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("repetition count must be ≥ 1".into()));
    }
    let exact = propagator(model, k as f64 * sheet.time())?;
    let step = ansatz_unitary(model, sheet)?;
    epsilon(&exact, &step.pow(k))
}

/// `sqrt(2^{-n} Tr(A†A))²` of an arbitrary square matrix.
pub fn normalized_norm_sq(a: &DenseMatrix) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for v in a.col_as_slice(j) {
            acc += v.norm_sqr();
        }
    }
    acc / a.nrows().max(1) as f64
}

/// Degree-2 part of the ansatz log as a dense matrix,
/// `½ Σ_b θ_b [H_b, Σ_{a<b} θ_a H_a]` over the exponentials in application
/// order. Its normalized norm is `C`.
pub fn second_order_dense(model: &HamiltonianModel, sheet: &ParamSheet) -> Result<DenseMatrix> {
    check_sheet(model, sheet)?;
    check_size(model.n())?;
    let h: Vec<DenseMatrix> = model.terms().iter().map(|t| t.pauli.to_dense()).collect::<Result<_>>()?;
    let dim = 1usize << model.n();
    let mut acc = DenseMatrix::zeros(dim, dim);
    let mut out = DenseMatrix::zeros(dim, dim);
    for r in 0..sheet.layers() {
        for (j, hj) in h.iter().enumerate() {
            let th = sheet.get(r, j);
            if th != 0.0 {
                let s = faer::Scale(Complex64::new(0.5 * th, 0.0));
                out += (hj * &acc - &acc * hj) * s;
                acc += hj * faer::Scale(Complex64::new(th, 0.0));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Connectivity, CouplingSpec, Term};
    use crate::pauli::PauliString;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tfim2() -> HamiltonianModel {
        CouplingSpec::tfim(
            Connectivity::Lattice {
                nx: 2,
                ny: 1,
                periodic: false,
            },
            0,
        )
        .uniform()
        .build()
        .unwrap()
    }

    fn single(label: &str, coeff: f64) -> HamiltonianModel {
        let term = Term {
            label: label.into(),
            coeff,
            pauli: PauliString::from_label(label).unwrap(),
        };
        HamiltonianModel::from_terms(label.len(), vec![term], false).unwrap()
    }

    fn close(a: &DenseUnitary, b: &DenseUnitary, tol: f64) {
        let e = epsilon(a, b).unwrap();
        assert!(e < tol, "distance {e}");
    }

    #[test]
    fn propagator_basics() {
        let model = tfim2();
        let prop = SpectralPropagator::new(&model).unwrap();
        close(&prop.at(0.0), &DenseUnitary::identity(2).unwrap(), 1e-14);
        close(&prop.at(0.3).mul(&prop.at(0.5)), &prop.at(0.8), 1e-12);
        assert!(prop.at(1.7).unitarity_defect() < 1e-10);

        let x = single("X", 1.0);
        let t = 0.9;
        let u = propagator(&x, t).unwrap();
        assert!((u.matrix()[(0, 0)] - Complex64::new(t.cos(), 0.0)).norm() < 1e-14);
        assert!((u.matrix()[(0, 1)] - Complex64::new(0.0, -t.sin())).norm() < 1e-14);
    }

    #[test]
    fn rotation_matches_spectral() {
        for label in ["XZY", "ZIZ", "IYI", "III"] {
            let model = single(label, 1.0);
            let mut u = DenseUnitary::identity(3).unwrap();
            u.apply_rotation(&model.terms()[0].pauli, 0.37);
            close(&u, &propagator(&model, 0.37).unwrap(), 1e-13);
        }
    }

    #[test]
    fn ansatz_limits() {
        let model = tfim2();
        let zero = ParamSheet::unconstrained(2, vec![0.0; 6], 0.5, model.coefficients()).unwrap();
        close(&ansatz_unitary(&model, &zero).unwrap(), &DenseUnitary::identity(2).unwrap(), 1e-15);

        let t = 0.8;
        let fine = ParamSheet::trotter(512, t, &model.coefficients()).unwrap();
        let e = epsilon(&propagator(&model, t).unwrap(), &ansatz_unitary(&model, &fine).unwrap()).unwrap();
        assert!(e < 1e-3);

        let one = single("ZXZ", 0.7);
        let s = ParamSheet::trotter(3, 1.1, &one.coefficients()).unwrap();
        close(&ansatz_unitary(&one, &s).unwrap(), &propagator(&one, 1.1).unwrap(), 1e-13);
    }

    #[test]
    fn first_order_is_the_trotter_ansatz() {
        let model = tfim2();
        let sheet = ParamSheet::trotter(4, 0.6, &model.coefficients()).unwrap();
        let a = trotter_unitary(&model, 0.6, 4, 1).unwrap();
        let b = ansatz_unitary(&model, &sheet).unwrap();
        assert_eq!(epsilon(&a, &b).unwrap(), 0.0);
        assert!(matches!(trotter_unitary(&model, 0.6, 4, 3), Err(Error::UnsupportedOrder(3))));
    }

    #[test]
    fn exponential_counts() {
        assert_eq!(TrotterOrder::First.exponentials_per_step(33), 33);
        assert_eq!(TrotterOrder::Second.exponentials_per_step(33), 65);
        assert_eq!(TrotterOrder::Fourth.exponentials_per_step(33), 325);
    }

    #[test]
    fn epsilon_examples() {
        let x = single("X", 1.0);
        let id = DenseUnitary::identity(1).unwrap();
        for t in [0.1, 1.0, 2.5] {
            let e = epsilon(&id, &propagator(&x, t).unwrap()).unwrap();
            assert!((e - 2.0 * (t / 2.0).sin().abs()).abs() < 1e-14);
        }
        assert_eq!(epsilon(&id, &id).unwrap(), 0.0);
        assert!(epsilon(&id, &DenseUnitary::identity(2).unwrap()).is_err());
    }

    #[test]
    fn epsilon_is_a_metric() {
        let model = tfim2();
        let prop = SpectralPropagator::new(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let us: Vec<DenseUnitary> = (0..3).map(|_| prop.at(rng.random_range(-3.0..3.0))).collect();
            let ab = epsilon(&us[0], &us[1]).unwrap();
            assert!((ab - epsilon(&us[1], &us[0]).unwrap()).abs() < 1e-15);
            assert!(ab <= epsilon(&us[0], &us[2]).unwrap() + epsilon(&us[2], &us[1]).unwrap() + 1e-14);
        }
    }

    #[test]
    fn repeated_epsilon_matches_explicit_product() {
        let model = tfim2();
        let sheet = ParamSheet::trotter(3, 0.4, &model.coefficients()).unwrap();
        let single_step = ansatz_unitary(&model, &sheet).unwrap();
        let plain = epsilon(&propagator(&model, 0.4).unwrap(), &single_step).unwrap();
        assert!((repeated_epsilon(&model, &sheet, 1).unwrap() - plain).abs() < 1e-15);
        let two = ansatz_unitary(&model, &sheet.repeat_sheet(2).unwrap()).unwrap();
        let direct = epsilon(&propagator(&model, 0.8).unwrap(), &two).unwrap();
        assert!((repeated_epsilon(&model, &sheet, 2).unwrap() - direct).abs() < 1e-13);

        let one = single("XY", 0.3);
        let s = ParamSheet::trotter(2, 0.5, &one.coefficients()).unwrap();
        for k in [1, 3, 8] {
            assert!(repeated_epsilon(&one, &s, k).unwrap() < 1e-13);
        }
    }

    #[test]
    fn pow_matches_products() {
        let model = tfim2();
        let u = trotter_step(&model, 0.3, TrotterOrder::Second).unwrap();
        let mut acc = DenseUnitary::identity(2).unwrap();
        for k in 0..6 {
            close(&u.pow(k), &acc, 1e-14);
            acc = acc.mul(&u);
        }
    }

    #[test]
    fn constructed_unitaries_are_unitary() {
        let model = tfim2();
        for order in TrotterOrder::ALL {
            assert!(trotter_step(&model, 0.7, order).unwrap().unitarity_defect() < 1e-10);
        }
    }

    #[test]
    fn capacity_is_enforced() {
        assert!(matches!(DenseUnitary::identity(13), Err(Error::Capacity(_))));
    }

    #[test]
    fn dense_second_order_norm_is_the_cost() {
        let model = CouplingSpec::xy(Connectivity::Full { n: 3 }, 8).build().unwrap();
        let poly = crate::cost::CostPolynomial::compile(&model, false).unwrap();
        let free: Vec<f64> = (0..2 * model.len()).map(|i| 0.05 * ((i * 7 % 5) as f64 - 2.0)).collect();
        let sheet = ParamSheet::from_free(3, &free, 0.4, &model.coefficients()).unwrap();
        let dense = normalized_norm_sq(&second_order_dense(&model, &sheet).unwrap());
        let c2 = poly.cost_sq(&sheet).unwrap();
        assert!((dense - c2).abs() < 1e-12 * c2, "{dense} vs {c2}");
    }
}
