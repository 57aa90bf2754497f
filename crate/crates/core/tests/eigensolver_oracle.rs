//! Cross-check of the library eigendecomposition against a self-contained
//! cyclic Jacobi eigensolver. The oracle shares no code with the LAPACK path.

use ndarray::Array2;
use refocus_core::linalg::{eigh_hermitian, CMat, C64};
use refocus_core::model::{assemble_hamiltonian, cavity_couplings, CavityModel};

/// Cyclic Jacobi for complex Hermitian matrices: repeatedly zero the largest
/// off-diagonal entry with a complex Givens rotation until convergence.
/// Returns eigenvalues in ascending order.
fn jacobi_eigenvalues(h: &CMat) -> Vec<f64> {
    let n = h.nrows();
    let mut a = h.clone();
    for _sweep in 0..200 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off.max(a[[i, j]].norm());
                }
            }
        }
        if off < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.norm() < 1e-18 {
                    continue;
                }
                // unitary 2x2 annihilating the (p,q) element:
                // diagonalize [[app, apq], [apq*, aqq]]
                let app = a[[p, p]].re;
                let aqq = a[[q, q]].re;
                let phase = apq / apq.norm();
                let theta = 0.5 * (2.0 * apq.norm()).atan2(app - aqq);
                let (c, s) = (theta.cos(), theta.sin());
                // rows/columns update: G† A G with
                // G[[p,p]]=c, G[[p,q]]=-s·phase, G[[q,p]]=s·phase*, G[[q,q]]=c
                let gpp = C64::new(c, 0.0);
                let gpq = -phase * s;
                let gqp = phase.conj() * s;
                let gqq = C64::new(c, 0.0);
                // A ← G† A
                for k in 0..n {
                    let xp = a[[p, k]];
                    let xq = a[[q, k]];
                    a[[p, k]] = gpp.conj() * xp + gqp.conj() * xq;
                    a[[q, k]] = gpq.conj() * xp + gqq.conj() * xq;
                }
                // A ← A G
                for k in 0..n {
                    let xp = a[[k, p]];
                    let xq = a[[k, q]];
                    a[[k, p]] = xp * gpp + xq * gqp;
                    a[[k, q]] = xp * gpq + xq * gqq;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[[i, i]].re).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

#[test]
fn jacobi_oracle_solves_a_known_matrix() {
    // [[2, i], [-i, 2]] has eigenvalues 1 and 3
    let mut h = Array2::zeros((2, 2));
    h[[0, 0]] = C64::new(2.0, 0.0);
    h[[1, 1]] = C64::new(2.0, 0.0);
    h[[0, 1]] = C64::new(0.0, 1.0);
    h[[1, 0]] = C64::new(0.0, -1.0);
    let eigs = jacobi_eigenvalues(&h);
    assert!((eigs[0] - 1.0).abs() < 1e-12);
    assert!((eigs[1] - 3.0).abs() < 1e-12);
}

#[test]
fn assembled_cavity_spectrum_matches_jacobi_oracle() {
    let c = cavity_couplings(&CavityModel {
        n_fock: 4,
        g: 0.1,
        delta: 1.0,
    })
    .unwrap();
    let h = assemble_hamiltonian(&c);
    let oracle = jacobi_eigenvalues(&h);
    let (lib, _) = eigh_hermitian(&h).unwrap();
    for (a, b) in lib.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-10, "eigenvalue {a} vs oracle {b}");
    }
}

#[test]
fn random_hermitian_spectra_agree() {
    let mut state = 0x9E3779B97F4A7C15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    for trial in 0..4 {
        let n = 5 + trial;
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                m[[i, j]] = C64::new(next(), next());
            }
        }
        let h: CMat = (&m + &m.t().mapv(|z: C64| z.conj())).mapv(|z| 0.5 * z);
        let oracle = jacobi_eigenvalues(&h);
        let (lib, _) = eigh_hermitian(&h).unwrap();
        for (a, b) in lib.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-10, "n={n}: {a} vs {b}");
        }
    }
}
