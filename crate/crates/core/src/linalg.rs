//! Dense matrix helpers shared by the geometry modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Mat = DMatrix<f64>;

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn skew_part(m: &Mat) -> Mat {
    (m - m.transpose()) * 0.5
}

pub fn sym_part(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn frobenius_inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn orthogonality_residual(q: &Mat) -> f64 {
    let n = q.nrows();
    max_abs(&(q.transpose() * q - Mat::identity(n, n)))
}

pub fn expm(m: &Mat) -> Mat {
    m.clone().exp()
}

/// Principal logarithm of a special orthogonal matrix.
///
/// Uses the commuting split R = S + A into symmetric and skew parts: on each
/// eigenspace of S with eigenvalue cos θ the skew part acts as sin θ times a
/// unit rotation, so log R = A · f(S) with f(c) = arccos(c) / √(1 − c²).
/// Returns the logarithm together with `1 + min cos θ`, the margin to the
/// cut locus.
pub fn log_special_orthogonal(r: &Mat) -> (Mat, f64) {
    let s = sym_part(r);
    let a = skew_part(r);
    let eig = SymmetricEigen::new(s);
    let min_cos = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let scaled = eig.eigenvalues.map(theta_over_sin);
    let f = &eig.eigenvectors * Mat::from_diagonal(&scaled) * eig.eigenvectors.transpose();
    let log = skew_part(&(a * f));
    (log, 1.0 + min_cos.max(-1.0))
}

/// θ / sin θ as a function of c = cos θ, with the removable singularity at c = 1.
fn theta_over_sin(c: f64) -> f64 {
    let c = c.clamp(-1.0, 1.0);
    let one_minus = 1.0 - c;
    if one_minus < 1e-8 {
        // θ² ≈ 2(1 − c); θ/sin θ = 1 + θ²/6 + 7θ⁴/360
        let t2 = 2.0 * one_minus;
        return 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0;
    }
    let theta = c.acos();
    let s = theta.sin();
    if s <= 0.0 {
        f64::INFINITY
    } else {
        theta / s
    }
}

/// Rotation angles θ ∈ [0, π] of an orthogonal matrix, one per eigenvalue of
/// its symmetric part.
pub fn rotation_angles(r: &Mat) -> DVector<f64> {
    SymmetricEigen::new(sym_part(r))
        .eigenvalues
        .map(|c| c.clamp(-1.0, 1.0).acos())
}

/// Pfaffian of a skew-symmetric matrix by pivoted skew elimination.
pub fn pfaffian(m: &Mat) -> f64 {
    let n = m.nrows();
    if n % 2 == 1 {
        return 0.0;
    }
    let mut a = m.clone();
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        let mut kp = k + 1;
        let mut best = a[(k + 1, k)].abs();
        for i in k + 2..n {
            if a[(i, k)].abs() > best {
                best = a[(i, k)].abs();
                kp = i;
            }
        }
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let piv = a[(k, k + 1)];
        if piv == 0.0 {
            return 0.0;
        }
        pf *= piv;
        if k + 2 < n {
            let tau: Vec<f64> = (k + 2..n).map(|j| a[(k, j)] / piv).collect();
            let col: Vec<f64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }
    pf
}

/// Nearest orthogonal matrix (orthogonal polar factor).
pub fn polar_orthogonal(m: &Mat) -> Mat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}

/// Gram–Schmidt on the coordinate basis with respect to the inner product
/// `g`. Column k of the result is g-orthonormal and lies in the span of the
/// first k+1 coordinate vectors. Returns `None` if `g` is not positive
/// definite.
pub fn gram_schmidt_frame(g: &Mat) -> Option<Mat> {
    let n = g.nrows();
    let mut frame = Mat::zeros(n, n);
    for k in 0..n {
        let mut v = DVector::<f64>::zeros(n);
        v[k] = 1.0;
        for j in 0..k {
            let fj = frame.column(j).into_owned();
            let proj = (v.transpose() * g * &fj)[(0, 0)];
            v -= fj * proj;
        }
        let norm2 = (v.transpose() * g * &v)[(0, 0)];
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return None;
        }
        frame.set_column(k, &(v / norm2.sqrt()));
    }
    Some(frame)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector<R: rand::Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed special orthogonal matrix: QR of a Gaussian matrix with
/// the sign of each column fixed by the diagonal of R, then one column
/// flipped if needed to land in SO.
pub fn random_special_orthogonal<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> Mat {
    let g = gaussian_matrix(dim, dim, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            let flipped = -q.column(j).into_owned();
            q.set_column(j, &flipped);
        }
    }
    if q.determinant() < 0.0 {
        let flipped = -q.column(0).into_owned();
        q.set_column(0, &flipped);
    }
    q
}
