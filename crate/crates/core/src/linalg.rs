//! Dense complex linear algebra helpers shared by all modules.
//!
//! Everything here works on `ndarray` matrices of [`C64`]. Dimensions in this
//! crate stay small (≤ ~128), so dense eigendecomposition is the workhorse:
//! Hermitian exponentials, unitary logarithms and spectral norms all go
//! through `eigh`.

use std::sync::OnceLock;

use ndarray::{array, Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;

/// Some LAPACK-binding versions hand back the complex-conjugate eigenvector
/// matrix from `eigh` (row/column-major mismatch). Probe once with a fixed
/// 2x2 Hermitian matrix and remember whether the returned vectors need
/// conjugation to satisfy H v = e v.
fn eigh_needs_conjugate() -> bool {
    static FLAG: OnceLock<bool> = OnceLock::new();
    *FLAG.get_or_init(|| {
        let h: CMat = array![
            [C64::new(0., 0.), C64::new(0., 1.)],
            [C64::new(0., -1.), C64::new(0., 0.)]
        ];
        let (e, v) = h.eigh(UPLO::Lower).expect("probe eigh failed");
        let resid = |vm: &CMat| -> f64 {
            let hv = h.dot(vm);
            let mut r = 0.0f64;
            for j in 0..2 {
                for a in 0..2 {
                    r += (hv[[a, j]] - e[j] * vm[[a, j]]).norm_sqr();
                }
            }
            r.sqrt()
        };
        let plain = resid(&v);
        let conj = resid(&v.mapv(|z| z.conj()));
        conj < plain
    })
}

pub fn ident(n: usize) -> CMat {
    Array2::eye(n)
}

pub fn dagger(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}

pub fn anti_commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) + b.dot(a)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// ‖M − M†‖ in max-norm.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    max_abs(&(m - &dagger(m)))
}

/// ‖U†U − I‖ in max-norm.
pub fn unitarity_defect(u: &CMat) -> f64 {
    max_abs(&(dagger(u).dot(u) - ident(u.nrows())))
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + &dagger(m)).mapv(|z| 0.5 * z)
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized first
/// so callers may pass matrices that are Hermitian only up to roundoff.
pub fn eigh_hermitian(h: &CMat) -> Result<(Array1<f64>, CMat)> {
    let (e, v) = hermitize(h).eigh(UPLO::Lower)?;
    let v = if eigh_needs_conjugate() {
        v.mapv(|z| z.conj())
    } else {
        v
    };
    Ok((e, v))
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.iter().all(|z| z.norm() == 0.0) {
        return 0.0;
    }
    let gram = dagger(m).dot(m);
    match eigh_hermitian(&gram) {
        Ok((e, _)) => e.iter().fold(0.0f64, |a, &x| a.max(x)).max(0.0).sqrt(),
        // Gram matrices of finite inputs always diagonalize; keep a fallback anyway.
        Err(_) => m.iter().map(|z| z.norm().powi(2)).sum::<f64>().sqrt(),
    }
}

/// exp(−i·t·H) for Hermitian H, by eigendecomposition.
pub fn expi_hermitian(h: &CMat, t: f64) -> Result<CMat> {
    let (e, v) = eigh_hermitian(h)?;
    let phases: Array1<C64> = e.mapv(|x| (-C64::i() * x * t).exp());
    Ok(scaled_columns(&v, &phases).dot(&dagger(&v)))
}

/// Apply exp(−i·t·H) to a state vector.
pub fn expi_apply(h: &CMat, t: f64, psi: &Array1<C64>) -> Result<Array1<C64>> {
    let (e, v) = eigh_hermitian(h)?;
    let c = dagger(&v).dot(psi);
    let rotated: Array1<C64> = e
        .iter()
        .zip(c.iter())
        .map(|(&ek, &ck)| ck * (-C64::i() * ek * t).exp())
        .collect();
    Ok(v.dot(&rotated))
}

fn scaled_columns(v: &CMat, scale: &Array1<C64>) -> CMat {
    let mut out = v.clone();
    for (mut col, &s) in out.columns_mut().into_iter().zip(scale.iter()) {
        col.mapv_inplace(|z| z * s);
    }
    out
}

/// Error if a state vector has drifted off unit norm.
pub fn check_unit_norm(psi: &Array1<C64>) -> Result<()> {
    let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotConverged(format!("state norm drifted to {n}")));
    }
    Ok(())
}

/// Nearest unitary in the polar sense: U (U†U)^{−1/2}.
pub fn polar_unitary(u: &CMat) -> Result<CMat> {
    let gram = dagger(u).dot(u);
    let (e, v) = eigh_hermitian(&gram)?;
    let inv_sqrt: Array1<C64> = e.mapv(|x| C64::new(1.0 / x.max(1e-300).sqrt(), 0.0));
    let correction = scaled_columns(&v, &inv_sqrt).dot(&dagger(&v));
    Ok(u.dot(&correction))
}

/// Spectral decomposition u = V diag(λ) V† of a unitary (normal) matrix with a
/// guaranteed orthonormal eigenbasis.
///
/// Diagonalizes the Hermitian combination (u+u†)/2 + μ(u−u†)/(2i); for almost
/// every μ its eigenvectors diagonalize u as well. Collisions (distinct
/// u-eigenvalues landing on the same combination value) are detected through
/// the eigen-residual and retried with the next μ.
pub fn eig_unitary(u: &CMat) -> Result<(Array1<C64>, CMat)> {
    let n = u.nrows();
    let ud = dagger(u);
    let re = (u + &ud).mapv(|z| 0.5 * z);
    let im = (u - &ud).mapv(|z| z / (2.0 * C64::i()));
    // fixed sweep of mixing constants; irrational-ish to dodge symmetric spectra
    const MUS: [f64; 5] = [
        0.734_618_297_4,
        1.912_837_55,
        0.329_081_886,
        3.330_218_77,
        0.104_729_31,
    ];
    let mut best: Option<(f64, Array1<C64>, CMat)> = None;
    for &mu in MUS.iter() {
        let h = &re + &im.mapv(|z| z * mu);
        let (_, v) = eigh_hermitian(&h)?;
        let uv = u.dot(&v);
        let mut lambdas = Array1::<C64>::zeros(n);
        let mut resid = 0.0f64;
        for j in 0..n {
            let vj = v.column(j);
            let uvj = uv.column(j);
            let lam: C64 = vj.iter().zip(uvj.iter()).map(|(a, b)| a.conj() * b).sum();
            let r: f64 = uvj
                .iter()
                .zip(vj.iter())
                .map(|(a, b)| (a - lam * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            resid = resid.max(r);
            lambdas[j] = lam;
        }
        if resid < 1e-10 * (n as f64) {
            return Ok((lambdas, v));
        }
        if best.as_ref().is_none_or(|(r, _, _)| resid < *r) {
            best = Some((resid, lambdas, v));
        }
    }
    let (resid, lambdas, v) = best.unwrap();
    if resid < 1e-7 {
        return Ok((lambdas, v));
    }
    Err(Error::Linalg(format!(
        "unitary eigendecomposition residual {resid:.3e} after all mixing constants"
    )))
}
