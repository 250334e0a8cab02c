//! Small dense Hermitian linear algebra: Jacobi eigen-decomposition with a
//! deterministic eigenpair order, and log-determinants.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const MAX_SWEEPS: usize = 100;

/// Largest `|a_ij - conj(a_ji)|`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues (descending) and unit eigenvectors (columns) of a Hermitian
/// matrix by cyclic complex Jacobi rotations, iterated until the
/// off-diagonal mass falls below `1e-12` relative to the Frobenius norm.
///
/// Equal eigenvalues (within `1e-12` relative) are ordered by the phase of
/// the eigenvector's first component; each eigenvector is then rotated so
/// its first non-negligible component is real and positive.
pub fn hermitian_eigen(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(invalid("matrix must be square"));
    }
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !scale.is_finite() {
        return Err(Error::DegenerateCovariance("non-finite matrix entry".into()));
    }
    if hermitian_defect(a) > 1e-10 * scale.max(1.0) {
        return Err(invalid("matrix is not Hermitian"));
    }
    let mut m = a.clone();
    let mut v = CMatrix::identity(n, n);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let values: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    let phase = |j: usize| v[(0, j)].arg();
    let tie = 1e-12 * scale.max(1e-300);
    order.sort_by(|&a, &b| {
        if (values[a] - values[b]).abs() <= tie {
            phase(a).total_cmp(&phase(b))
        } else {
            values[b].total_cmp(&values[a])
        }
    });
    let mut vecs = CMatrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        let col = v.column(j);
        let lead = col.iter().find(|z| z.norm() > 1e-12).copied().unwrap_or(Complex64::new(1.0, 0.0));
        let unphase = Complex64::from_polar(1.0, -lead.arg());
        for i in 0..n {
            vecs[(i, k)] = col[i] * unphase;
        }
    }
    Ok((order.iter().map(|&j| values[j]).collect(), vecs))
}

/// One Jacobi rotation zeroing `m[p][q]`: first a diagonal phase making the
/// pivot real, then the classical real rotation.
fn rotate(m: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let phase = apq / g;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let theta = (aqq - app) / (2.0 * g);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // J restricted to (p, q): [[c, s], [-s e^{-iφ}, c e^{-iφ}]].
    let e = phase.conj();
    let j = [[Complex64::new(c, 0.0), Complex64::new(s, 0.0)], [-e * s, e * c]];
    let n = m.nrows();
    for k in 0..n {
        let (mp, mq) = (m[(k, p)], m[(k, q)]);
        m[(k, p)] = mp * j[0][0] + mq * j[1][0];
        m[(k, q)] = mp * j[0][1] + mq * j[1][1];
    }
    for k in 0..n {
        let (mp, mq) = (m[(p, k)], m[(q, k)]);
        m[(p, k)] = j[0][0].conj() * mp + j[1][0].conj() * mq;
        m[(q, k)] = j[0][1].conj() * mp + j[1][1].conj() * mq;
    }
    m[(p, q)] = Complex64::new(0.0, 0.0);
    m[(q, p)] = Complex64::new(0.0, 0.0);
    m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);
    for k in 0..n {
        let (vp, vq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = vp * j[0][0] + vq * j[1][0];
        v[(k, q)] = vp * j[0][1] + vq * j[1][1];
    }
}

/// `ln det A` of a Hermitian positive-definite matrix via Cholesky.
pub fn log_det_hpd(a: &CMatrix) -> Result<f64> {
    let chol = nalgebra::Cholesky::new(a.clone())
        .ok_or_else(|| Error::DegenerateCovariance("matrix is not positive definite".into()))?;
    let l = chol.l();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)].re;
        if !(d > 0.0) {
            return Err(Error::DegenerateCovariance("zero pivot in Cholesky factor".into()));
        }
        acc += d.ln();
    }
    Ok(2.0 * acc)
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn inverse_hpd(a: &CMatrix) -> Result<CMatrix> {
    nalgebra::Cholesky::new(a.clone())
        .map(|c| c.inverse())
        .ok_or_else(|| Error::DegenerateCovariance("matrix is not positive definite".into()))
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
