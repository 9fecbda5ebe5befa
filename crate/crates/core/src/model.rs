//! Hamiltonian builders: TFIM, XY and user-supplied Pauli sums.
//!
//! Term order is fixed at construction and the ansatz applies terms in
//! exactly this order. XY models list the field terms `X_μ` first, then the
//! `Y_μY_ν` bonds, then the `Z_μZ_ν` bonds. TFIM models list the `Z_μZ_ν`
//! bonds first and then the fields. Bonds within a block are sorted by
//! `(μ, ν)` with `μ < ν`. Interactions carry a negative sign and fields a
//! positive one.
//!
//! Lattice sites are numbered row-major, `μ = y·nx + x`.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{anticommutes, PauliString, PauliSum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tfim,
    Xy,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Connectivity {
    /// All-to-all couplings on `n` qubits.
    Full { n: usize },
    /// Nearest-neighbour square lattice. A chain is `ny = 1`.
    Lattice {
        nx: usize,
        ny: usize,
        #[serde(default)]
        periodic: bool,
    },
}

/// Uniform distribution `center ± half_width`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub center: f64,
    #[serde(default)]
    pub half_width: f64,
}

impl Coupling {
    pub const fn new(center: f64, half_width: f64) -> Self {
        Self { center, half_width }
    }

    pub const fn fixed(center: f64) -> Self {
        Self::new(center, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomTerm {
    /// Pauli label, character `q` acting on qubit `q`.
    pub pauli: String,
    pub coeff: f64,
}

fn default_j() -> Coupling {
    Coupling::new(1.0, 0.25)
}
fn default_jy() -> Coupling {
    Coupling::new(0.5, 0.25)
}
fn default_jz() -> Coupling {
    Coupling::new(1.0, 0.25)
}
fn default_h() -> Coupling {
    Coupling::fixed(0.25)
}
fn default_true() -> bool {
    true
}

/// Everything needed to rebuild a model deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub kind: ModelKind,
    #[serde(default = "default_connectivity")]
    pub connectivity: Connectivity,
    /// TFIM `Z_μZ_ν` coupling.
    #[serde(default = "default_j")]
    pub j: Coupling,
    /// XY `Y_μY_ν` coupling.
    #[serde(default = "default_jy")]
    pub jy: Coupling,
    /// XY `Z_μZ_ν` coupling.
    #[serde(default = "default_jz")]
    pub jz: Coupling,
    /// Transverse field on every site.
    #[serde(default = "default_h")]
    pub h: Coupling,
    #[serde(default)]
    pub seed: u64,
    /// Rescale so that `Σ c_j² = n`.
    #[serde(default = "default_true")]
    pub normalize: bool,
    /// Explicit terms for `kind = custom`.
    #[serde(default)]
    pub terms: Vec<CustomTerm>,
}

fn default_connectivity() -> Connectivity {
    Connectivity::Lattice {
        nx: 3,
        ny: 3,
        periodic: false,
    }
}

impl CouplingSpec {
    pub fn xy(connectivity: Connectivity, seed: u64) -> Self {
        Self {
            kind: ModelKind::Xy,
            connectivity,
            j: default_j(),
            jy: default_jy(),
            jz: default_jz(),
            h: default_h(),
            seed,
            normalize: true,
            terms: Vec::new(),
        }
    }

    pub fn tfim(connectivity: Connectivity, seed: u64) -> Self {
        Self {
            kind: ModelKind::Tfim,
            ..Self::xy(connectivity, seed)
        }
    }

    pub fn custom(terms: Vec<CustomTerm>, normalize: bool) -> Self {
        Self {
            kind: ModelKind::Custom,
            terms,
            normalize,
            ..Self::xy(Connectivity::Full { n: 1 }, 0)
        }
    }

    /// Zeroes every half-width, giving a translation-invariant model on a
    /// periodic lattice.
    pub fn uniform(mut self) -> Self {
        for c in [&mut self.j, &mut self.jy, &mut self.jz, &mut self.h] {
            c.half_width = 0.0;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, c) in [("j", self.j), ("jy", self.jy), ("jz", self.jz), ("h", self.h)] {
            if !(c.half_width >= 0.0) || !c.center.is_finite() || !c.half_width.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "coupling {name}: half-width must be finite and non-negative"
                )));
            }
        }
        match self.connectivity {
            Connectivity::Full { n } if n == 0 => {
                Err(Error::InvalidConfig("qubit count must be at least 1".into()))
            }
            Connectivity::Lattice { nx, ny, .. } if nx == 0 || ny == 0 => Err(
                Error::InvalidConfig(format!("lattice extents must be ≥ 1, got {nx}×{ny}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<HamiltonianModel> {
        match self.kind {
            ModelKind::Xy => build_xy(self),
            ModelKind::Tfim => build_tfim(self),
            ModelKind::Custom => build_custom(self),
        }
    }
}

/// Uniform draw from `[center − half_width, center + half_width]`.
pub fn sample_couplings<R: Rng + ?Sized>(center: f64, half_width: f64, rng: &mut R) -> f64 {
    if half_width == 0.0 {
        center
    } else {
        rng.random_range(center - half_width..=center + half_width)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub nx: usize,
    pub ny: usize,
    pub periodic: bool,
}

impl Lattice {
    pub fn sites(&self) -> usize {
        self.nx * self.ny
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.nx, site / self.nx)
    }

    pub fn dimension(&self) -> usize {
        (self.nx > 1) as usize + (self.ny > 1) as usize
    }
}

/// Interaction classes for translation-invariant parameter sharing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationInfo {
    /// Class names such as `"X"`, `"YY/x"`, `"ZZ/y"`.
    pub classes: Vec<String>,
    pub term_class: Vec<usize>,
    /// Site from which the term's bond offset is taken.
    pub term_anchor: Vec<usize>,
}

/// Window metadata carried by a unit-cell model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellWindow {
    pub wx: usize,
    pub wy: usize,
    pub order: u32,
    /// Sites of the parent lattice.
    pub parent_sites: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub label: String,
    pub coeff: f64,
    pub pauli: PauliString,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianModel {
    kind: ModelKind,
    n: usize,
    terms: Vec<Term>,
    lattice: Option<Lattice>,
    norm_scale: f64,
    translation: Option<TranslationInfo>,
    cell: Option<CellWindow>,
}

impl HamiltonianModel {
    /// Builds a model from explicit terms, optionally normalizing to
    /// `Σ c_j² = n`.
    pub fn from_terms(n: usize, terms: Vec<Term>, normalize: bool) -> Result<Self> {
        let mut model = Self {
            kind: ModelKind::Custom,
            n,
            terms,
            lattice: None,
            norm_scale: 1.0,
            translation: None,
            cell: None,
        };
        model.check()?;
        if normalize {
            model.normalize()?;
        }
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for (idx, t) in self.terms.iter().enumerate() {
            if t.pauli.n() != self.n {
                return Err(Error::DimensionMismatch {
                    left: self.n,
                    right: t.pauli.n(),
                });
            }
            if t.pauli.phase() != crate::pauli::Phase::One || t.pauli.scale() != 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "term {} must be a bare Hermitian Pauli string",
                    t.label
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "term {} has a non-finite coefficient",
                    t.label
                )));
            }
            if let Some(prev) = seen.insert(t.pauli.key(), idx) {
                return Err(Error::InvalidConfig(format!(
                    "terms {} and {} share the Pauli string {}",
                    self.terms[prev].label,
                    t.label,
                    t.pauli.label()
                )));
            }
        }
        if self.terms.iter().all(|t| t.coeff == 0.0) {
            return Err(Error::InvalidConfig("Hamiltonian is identically zero".into()));
        }
        Ok(())
    }

    fn normalize(&mut self) -> Result<()> {
        let norm = self.hs_norm();
        let scale = (self.n as f64).sqrt() / norm;
        for t in &mut self.terms {
            t.coeff *= scale;
        }
        self.norm_scale *= scale;
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of terms `M`.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coeff).collect()
    }

    pub fn lattice(&self) -> Option<Lattice> {
        self.lattice
    }

    pub fn norm_scale(&self) -> f64 {
        self.norm_scale
    }

    pub fn translation(&self) -> Option<&TranslationInfo> {
        self.translation.as_ref()
    }

    pub fn cell_window(&self) -> Option<CellWindow> {
        self.cell
    }

    /// `sqrt(2^{-n} Tr H²) = sqrt(Σ c_j²)`.
    pub fn hs_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff * t.coeff).sum::<f64>().sqrt()
    }

    /// Largest term weight, the locality `p`.
    pub fn locality(&self) -> usize {
        self.terms.iter().map(|t| t.pauli.weight()).max().unwrap_or(0)
    }

    pub fn to_pauli_sum(&self) -> PauliSum {
        let mut s = PauliSum::new(self.n).expect("model qubit count is validated");
        for t in &self.terms {
            s.add_string(&t.pauli, Complex64::new(t.coeff, 0.0));
        }
        s
    }

    /// Whether every pair of terms commutes.
    pub fn is_commuting(&self) -> bool {
        self.terms.iter().enumerate().all(|(j, a)| {
            self.terms[..j].iter().all(|b| a.pauli.commutes_with(&b.pauli))
        })
    }

    /// Class-level coefficient vector when the model is translation
    /// invariant (every class present at every site with one coefficient).
    pub fn class_coefficients(&self) -> Result<Vec<f64>> {
        let info = self.translation.as_ref().ok_or_else(|| {
            Error::NotTranslationInvariant("model carries no translation classes".into())
        })?;
        let mut coeff: Vec<Option<f64>> = vec![None; info.classes.len()];
        for (t, &a) in self.terms.iter().zip(&info.term_class) {
            match coeff[a] {
                None => coeff[a] = Some(t.coeff),
                Some(c) if (c - t.coeff).abs() <= 1e-12 * c.abs().max(1e-300) => {}
                Some(c) => {
                    return Err(Error::NotTranslationInvariant(format!(
                        "class {} has coefficients {c} and {}",
                        info.classes[a], t.coeff
                    )))
                }
            }
        }
        coeff
            .into_iter()
            .enumerate()
            .map(|(a, c)| {
                c.ok_or_else(|| {
                    Error::NotTranslationInvariant(format!("class {} has no terms", info.classes[a]))
                })
            })
            .collect()
    }

    /// Sub-model on a `(2p−1)^D` (order 2) or `(3p−2)^D` (order 3) window
    /// of a periodic lattice. Terms keep their parent order and class; the
    /// result records the window so the cost compiler can select one
    /// representative per translation orbit.
    pub fn unit_cell(&self, order: u32) -> Result<HamiltonianModel> {
        let lattice = match self.lattice {
            Some(l) if l.periodic => l,
            _ => {
                return Err(Error::NotTranslationInvariant(
                    "unit cells need a periodic lattice".into(),
                ))
            }
        };
        let info = self.translation.as_ref().ok_or_else(|| {
            Error::NotTranslationInvariant("model carries no translation classes".into())
        })?;
        self.class_coefficients()?;
        let mut per_class = vec![0usize; info.classes.len()];
        for &a in &info.term_class {
            per_class[a] += 1;
        }
        if per_class.iter().any(|&k| k != lattice.sites()) {
            return Err(Error::NotTranslationInvariant(
                "every class must appear once per site".into(),
            ));
        }
        self.check_class_order(info)?;

        let p = self.locality().max(1);
        let w = match order {
            2 => 2 * p - 1,
            3 => 3 * p - 2,
            other => return Err(Error::UnsupportedOrder(other)),
        };
        let window = |extent: usize| -> Result<usize> {
            if extent == 1 {
                Ok(1)
            } else if extent > w {
                Ok(w)
            } else {
                Err(Error::NotTranslationInvariant(format!(
                    "lattice extent {extent} must exceed the window width {w}"
                )))
            }
        };
        let (wx, wy) = (window(lattice.nx)?, window(lattice.ny)?);

        let n_cell = wx * wy;
        let mut terms = Vec::new();
        let mut term_class = Vec::new();
        let mut term_anchor = Vec::new();
        for (idx, t) in self.terms.iter().enumerate() {
            let mut label = vec!['I'; n_cell];
            let mut inside = true;
            for q in 0..self.n {
                let bit = 1u64 << q;
                if t.pauli.support() & bit == 0 {
                    continue;
                }
                let (x, y) = lattice.coords(q);
                if x >= wx || y >= wy {
                    inside = false;
                    break;
                }
                label[y * wx + x] = pauli_char(t.pauli.x_mask() & bit != 0, t.pauli.z_mask() & bit != 0);
            }
            if !inside {
                continue;
            }
            let label: String = label.into_iter().collect();
            terms.push(Term {
                label: t.label.clone(),
                coeff: t.coeff,
                pauli: PauliString::from_label(&label)?,
            });
            term_class.push(info.term_class[idx]);
            let (ax, ay) = lattice.coords(info.term_anchor[idx]);
            term_anchor.push(ay * wx + ax);
        }

        Ok(HamiltonianModel {
            kind: self.kind,
            n: n_cell,
            terms,
            lattice: Some(Lattice {
                nx: wx,
                ny: wy,
                periodic: false,
            }),
            norm_scale: self.norm_scale,
            translation: Some(TranslationInfo {
                classes: info.classes.clone(),
                term_class,
                term_anchor,
            }),
            cell: Some(CellWindow {
                wx,
                wy,
                order,
                parent_sites: lattice.sites(),
            }),
        })
    }

    /// Anticommuting pairs must be ordered by their classes alone, otherwise
    /// the per-pair coefficients differ between translates.
    fn check_class_order(&self, info: &TranslationInfo) -> Result<()> {
        let mut order: HashMap<(usize, usize), bool> = HashMap::new();
        for j in 0..self.terms.len() {
            for k in 0..j {
                let (a, b) = (&self.terms[j].pauli, &self.terms[k].pauli);
                if !anticommutes(a.x_mask(), a.z_mask(), b.x_mask(), b.z_mask()) {
                    continue;
                }
                let (cj, ck) = (info.term_class[j], info.term_class[k]);
                if cj == ck {
                    return Err(Error::NotTranslationInvariant(format!(
                        "anticommuting terms {} and {} share a class",
                        self.terms[j].label, self.terms[k].label
                    )));
                }
                let key = (cj.min(ck), cj.max(ck));
                let later_is_max = cj > ck;
                if *order.entry(key).or_insert(later_is_max) != later_is_max {
                    return Err(Error::NotTranslationInvariant(format!(
                        "classes {} and {} appear in both orders",
                        info.classes[key.0], info.classes[key.1]
                    )));
                }
            }
        }
        Ok(())
    }
}

fn pauli_char(x: bool, z: bool) -> char {
    match (x, z) {
        (false, false) => 'I',
        (true, false) => 'X',
        (true, true) => 'Y',
        (false, true) => 'Z',
    }
}

struct Bond {
    mu: usize,
    nu: usize,
    class_suffix: &'static str,
    anchor: usize,
}

/// Bonds sorted by `(μ, ν)`; duplicates from short periodic extents are
/// merged keeping the first direction found.
fn bonds(conn: Connectivity) -> (usize, Vec<Bond>, Option<Lattice>) {
    match conn {
        Connectivity::Full { n } => {
            let mut out = Vec::new();
            for mu in 0..n {
                for nu in mu + 1..n {
                    out.push(Bond {
                        mu,
                        nu,
                        class_suffix: "",
                        anchor: mu,
                    });
                }
            }
            (n, out, None)
        }
        Connectivity::Lattice { nx, ny, periodic } => {
            let lattice = Lattice { nx, ny, periodic };
            let mut map: BTreeMap<(usize, usize), Bond> = BTreeMap::new();
            for s in 0..lattice.sites() {
                let (x, y) = lattice.coords(s);
                let right = if x + 1 < nx {
                    Some(s + 1)
                } else if periodic {
                    Some(y * nx)
                } else {
                    None
                };
                let down = if y + 1 < ny {
                    Some(s + nx)
                } else if periodic {
                    Some(x)
                } else {
                    None
                };
                for (other, suffix) in [(right, "/x"), (down, "/y")] {
                    let Some(o) = other else { continue };
                    if o == s {
                        continue;
                    }
                    let key = (s.min(o), s.max(o));
                    map.entry(key).or_insert(Bond {
                        mu: key.0,
                        nu: key.1,
                        class_suffix: suffix,
                        anchor: s,
                    });
                }
            }
            (lattice.sites(), map.into_values().collect(), Some(lattice))
        }
    }
}

struct Builder {
    n: usize,
    terms: Vec<Term>,
    classes: Vec<String>,
    term_class: Vec<usize>,
    term_anchor: Vec<usize>,
}

impl Builder {
    fn new(n: usize) -> Self {
        Self {
            n,
            terms: Vec::new(),
            classes: Vec::new(),
            term_class: Vec::new(),
            term_anchor: Vec::new(),
        }
    }

    fn push(&mut self, label: String, coeff: f64, factors: &[(usize, char)], class: String, anchor: usize) -> Result<()> {
        let pauli = PauliString::from_sparse(self.n, factors)?;
        let idx = match self.classes.iter().position(|c| *c == class) {
            Some(i) => i,
            None => {
                self.classes.push(class);
                self.classes.len() - 1
            }
        };
        self.terms.push(Term { label, coeff, pauli });
        self.term_class.push(idx);
        self.term_anchor.push(anchor);
        Ok(())
    }

    fn fields(&mut self, h: Coupling, rng: &mut ChaCha8Rng) -> Result<()> {
        for mu in 0..self.n {
            let c = sample_couplings(h.center, h.half_width, rng);
            self.push(format!("X{mu}"), c, &[(mu, 'X')], "X".into(), mu)?;
        }
        Ok(())
    }

    fn bonds(&mut self, bonds: &[Bond], ch: char, j: Coupling, rng: &mut ChaCha8Rng) -> Result<()> {
        let name: String = [ch, ch].iter().collect();
        for b in bonds {
            let c = -sample_couplings(j.center, j.half_width, rng);
            self.push(
                format!("{name}{}-{}", b.mu, b.nu),
                c,
                &[(b.mu, ch), (b.nu, ch)],
                format!("{name}{}", b.class_suffix),
                b.anchor,
            )?;
        }
        Ok(())
    }

    fn finish(self, kind: ModelKind, lattice: Option<Lattice>, normalize: bool) -> Result<HamiltonianModel> {
        // couplings filtered away by zero coefficients are dropped
        let keep: Vec<usize> = (0..self.terms.len()).filter(|&i| self.terms[i].coeff != 0.0).collect();
        let terms: Vec<Term> = keep.iter().map(|&i| self.terms[i].clone()).collect();
        let mut model = HamiltonianModel::from_terms(self.n, terms, normalize)?;
        model.kind = kind;
        model.lattice = lattice;
        if lattice.is_some() {
            model.translation = Some(TranslationInfo {
                classes: self.classes,
                term_class: keep.iter().map(|&i| self.term_class[i]).collect(),
                term_anchor: keep.iter().map(|&i| self.term_anchor[i]).collect(),
            });
        }
        Ok(model)
    }
}

pub fn build_xy(spec: &CouplingSpec) -> Result<HamiltonianModel> {
    if spec.kind != ModelKind::Xy {
        return Err(Error::InvalidConfig("build_xy needs kind = xy".into()));
    }
    spec.validate()?;
    let (n, bonds, lattice) = bonds(spec.connectivity);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut b = Builder::new(n);
    b.fields(spec.h, &mut rng)?;
    b.bonds(&bonds, 'Y', spec.jy, &mut rng)?;
    b.bonds(&bonds, 'Z', spec.jz, &mut rng)?;
    b.finish(ModelKind::Xy, lattice, spec.normalize)
}

pub fn build_tfim(spec: &CouplingSpec) -> Result<HamiltonianModel> {
    if spec.kind != ModelKind::Tfim {
        return Err(Error::InvalidConfig("build_tfim needs kind = tfim".into()));
    }
    spec.validate()?;
    let (n, bonds, lattice) = bonds(spec.connectivity);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut b = Builder::new(n);
    b.bonds(&bonds, 'Z', spec.j, &mut rng)?;
    b.fields(spec.h, &mut rng)?;
    b.finish(ModelKind::Tfim, lattice, spec.normalize)
}

pub fn build_custom(spec: &CouplingSpec) -> Result<HamiltonianModel> {
    let first = spec
        .terms
        .first()
        .ok_or_else(|| Error::InvalidConfig("custom model has no terms".into()))?;
    let n = first.pauli.trim().len();
    let terms = spec
        .terms
        .iter()
        .map(|t| {
            Ok(Term {
                label: t.pauli.clone(),
                coeff: t.coeff,
                pauli: PauliString::from_label(&t.pauli)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    HamiltonianModel::from_terms(n, terms, spec.normalize)
}
