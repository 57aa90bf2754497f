//! System Hamiltonian building blocks: H = σ_x A_x + σ_y A_y + σ_z A_z + A_0
//! with the A operators acting on a finite auxiliary space, plus the concrete
//! qubit-in-a-cavity realization A_x = g(b+b†), A_y = ig(b−b†), A_z = 0,
//! A_0 = Δ b†b on a truncated Fock space.

use ndarray::{array, linalg::kron, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dagger, hermiticity_defect, ident, max_abs, CMat, C64};

/// Tensor ordering used across the entire crate: full-space matrices are
/// qubit ⊗ auxiliary, i.e. `kron(pauli, aux_operator)`. Index = q·dim + a.
pub const QUBIT_FIRST: () = ();

/// Signed control axes for π-pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignedAxis {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

impl SignedAxis {
    pub fn sign(self) -> f64 {
        match self {
            SignedAxis::PlusX | SignedAxis::PlusY => 1.0,
            SignedAxis::MinusX | SignedAxis::MinusY => -1.0,
        }
    }

    pub fn is_x(self) -> bool {
        matches!(self, SignedAxis::PlusX | SignedAxis::MinusX)
    }

    /// Pulse token in the ASCII sequence notation (overline → trailing '-').
    pub fn token(self) -> &'static str {
        match self {
            SignedAxis::PlusX => "X",
            SignedAxis::MinusX => "X-",
            SignedAxis::PlusY => "Y",
            SignedAxis::MinusY => "Y-",
        }
    }

    /// The opposite-sign pulse about the same axis.
    pub fn flipped(self) -> Self {
        match self {
            SignedAxis::PlusX => SignedAxis::MinusX,
            SignedAxis::MinusX => SignedAxis::PlusX,
            SignedAxis::PlusY => SignedAxis::MinusY,
            SignedAxis::MinusY => SignedAxis::PlusY,
        }
    }
}

/// Labeled qubit operators with their 2x2 matrix realizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitOperator {
    I,
    X,
    Y,
    Z,
}

impl QubitOperator {
    pub fn matrix(self) -> CMat {
        match self {
            QubitOperator::I => ident(2),
            QubitOperator::X => sigma_x(),
            QubitOperator::Y => sigma_y(),
            QubitOperator::Z => sigma_z(),
        }
    }
}

pub fn sigma_x() -> CMat {
    array![
        [C64::new(0., 0.), C64::new(1., 0.)],
        [C64::new(1., 0.), C64::new(0., 0.)]
    ]
}

pub fn sigma_y() -> CMat {
    array![
        [C64::new(0., 0.), C64::new(0., -1.)],
        [C64::new(0., 1.), C64::new(0., 0.)]
    ]
}

pub fn sigma_z() -> CMat {
    array![
        [C64::new(1., 0.), C64::new(0., 0.)],
        [C64::new(0., 0.), C64::new(-1., 0.)]
    ]
}

/// The four coupling operators of the system Hamiltonian on the auxiliary
/// space, all Hermitian.
#[derive(Debug, Clone)]
pub struct CouplingSet {
    pub dim: usize,
    pub a0: CMat,
    pub ax: CMat,
    pub ay: CMat,
    pub az: CMat,
}

impl CouplingSet {
    pub fn new(a0: CMat, ax: CMat, ay: CMat, az: CMat) -> Result<Self> {
        let dim = a0.nrows();
        for (name, m) in [("a0", &a0), ("ax", &ax), ("ay", &ay), ("az", &az)] {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::InvalidModel(format!(
                    "{name} is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let scale = max_abs(m).max(1.0);
            if hermiticity_defect(m) > 1e-12 * scale {
                return Err(Error::InvalidModel(format!("{name} is not Hermitian")));
            }
        }
        Ok(Self {
            dim,
            a0,
            ax,
            ay,
            az,
        })
    }

    /// All couplings zero on a `dim`-dimensional auxiliary space.
    pub fn zero(dim: usize) -> Self {
        let z = Array2::zeros((dim, dim));
        Self {
            dim,
            a0: z.clone(),
            ax: z.clone(),
            ay: z.clone(),
            az: z,
        }
    }
}

/// Cavity model: Fock-space truncation, coupling g and frequency bias Δ.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CavityModel {
    pub n_fock: usize,
    pub g: f64,
    pub delta: f64,
}

/// Lowering operator b with ⟨n−1|b|n⟩ = √n on the truncated Fock space.
pub fn lowering_operator(n_fock: usize) -> CMat {
    let mut b = Array2::zeros((n_fock, n_fock));
    for n in 1..n_fock {
        b[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    b
}

/// Couplings of an atom in a lossless cavity:
/// A_0 = Δ b†b, A_x = g(b+b†), A_y = ig(b−b†), A_z = 0.
pub fn cavity_couplings(model: &CavityModel) -> Result<CouplingSet> {
    if model.n_fock < 2 {
        return Err(Error::InvalidModel(format!(
            "n_fock must be at least 2, got {}",
            model.n_fock
        )));
    }
    let b = lowering_operator(model.n_fock);
    let bd = dagger(&b);
    let a0 = bd.dot(&b).mapv(|z| z * model.delta);
    let ax = (&b + &bd).mapv(|z| z * model.g);
    let ay = (&b - &bd).mapv(|z| z * C64::i() * model.g);
    let az = Array2::zeros((model.n_fock, model.n_fock));
    CouplingSet::new(a0, ax, ay, az)
}

/// H_S = σ_x⊗A_x + σ_y⊗A_y + σ_z⊗A_z + I⊗A_0 on the full space.
pub fn assemble_hamiltonian(couplings: &CouplingSet) -> CMat {
    kron(&sigma_x(), &couplings.ax)
        + kron(&sigma_y(), &couplings.ay)
        + kron(&sigma_z(), &couplings.az)
        + kron(&ident(2), &couplings.a0)
}

/// Control term (±½)·amplitude·σ_axis ⊗ I. A barred pulse is the sign-flipped
/// drive field.
pub fn control_hamiltonian(axis: SignedAxis, amplitude: f64, dim: usize) -> CMat {
    let pauli = if axis.is_x() { sigma_x() } else { sigma_y() };
    kron(&pauli, &ident(dim)).mapv(|z| z * 0.5 * axis.sign() * amplitude)
}

/// Lift an auxiliary-space operator to the full space (I ⊗ A).
pub fn lift_aux(a: &CMat) -> CMat {
    kron(&ident(2), a)
}

/// Lift a qubit operator to the full space (σ ⊗ I).
pub fn lift_qubit(sigma: &CMat, dim: usize) -> CMat {
    kron(sigma, &ident(dim))
}

// ---------------------------------------------------------------------------
// JSON model specification
// ---------------------------------------------------------------------------

type CxRows = Vec<Vec<(f64, f64)>>;

/// Wire format for coupling models; complex entries are [re, im] pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Cavity {
        n_fock: usize,
        g: f64,
        delta: f64,
    },
    Generic {
        a0: CxRows,
        ax: CxRows,
        ay: CxRows,
        az: CxRows,
    },
}

fn rows_to_matrix(rows: &CxRows) -> Result<CMat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidModel(
            "matrix rows must be square and non-empty".into(),
        ));
    }
    let mut m = Array2::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        for (j, &(re, im)) in row.iter().enumerate() {
            m[[i, j]] = C64::new(re, im);
        }
    }
    Ok(m)
}

fn matrix_to_rows(m: &CMat) -> CxRows {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|z| (z.re, z.im)).collect())
        .collect()
}

impl ModelSpec {
    pub fn build(&self) -> Result<CouplingSet> {
        match self {
            ModelSpec::Cavity { n_fock, g, delta } => cavity_couplings(&CavityModel {
                n_fock: *n_fock,
                g: *g,
                delta: *delta,
            }),
            ModelSpec::Generic { a0, ax, ay, az } => CouplingSet::new(
                rows_to_matrix(a0)?,
                rows_to_matrix(ax)?,
                rows_to_matrix(ay)?,
                rows_to_matrix(az)?,
            ),
        }
    }

    pub fn from_couplings(c: &CouplingSet) -> Self {
        ModelSpec::Generic {
            a0: matrix_to_rows(&c.a0),
            ax: matrix_to_rows(&c.ax),
            ay: matrix_to_rows(&c.ay),
            az: matrix_to_rows(&c.az),
        }
    }
}
