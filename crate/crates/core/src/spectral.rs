//! Dense spectral utilities: eigenvalues with a canonical ordering, ranks
//! and pseudoinverses, principal-minor sums, and a Routh-Hurwitz stability
//! table with both determinant families cross-checked.
//!
//! Matrices of size 1 and 2 get closed-form eigenvalues so that structurally
//! exact spectra (e.g. a double zero of a defective 2x2) come out exact
//! instead of carrying iteration noise.

use crate::error::{CoordError, Result};
use crate::tol;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Infinity-norm estimate used to scale zero tolerances.
pub fn norm_scale(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn ensure_square(m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(CoordError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(CoordError::Numerical(
            "matrix contains non-finite entries".into(),
        ));
    }
    Ok(())
}

/// Canonical eigenvalue order: by real part, then imaginary part.
pub fn canonical_sort(eigs: &mut [Complex64]) {
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// All eigenvalues of a real square matrix, canonically sorted.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = ensure_square(m)?;
    ensure_finite(m)?;
    let mut eigs: Vec<Complex64> = match n {
        0 => Vec::new(),
        1 => vec![Complex64::new(m[(0, 0)], 0.0)],
        2 => {
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let tr = a + d;
            let det = a * d - b * c;
            let disc = tr * tr - 4.0 * det;
            if disc >= 0.0 {
                let s = disc.sqrt();
                vec![
                    Complex64::new((tr - s) / 2.0, 0.0),
                    Complex64::new((tr + s) / 2.0, 0.0),
                ]
            } else {
                let s = (-disc).sqrt() / 2.0;
                vec![Complex64::new(tr / 2.0, -s), Complex64::new(tr / 2.0, s)]
            }
        }
        _ => m.complex_eigenvalues().iter().copied().collect(),
    };
    canonical_sort(&mut eigs);
    Ok(eigs)
}

/// Number of eigenvalues with modulus at most `tau`.
pub fn zero_multiplicity(eigs: &[Complex64], tau: f64) -> usize {
    eigs.iter().filter(|e| e.norm() <= tau).count()
}

#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub eigenvalues: Vec<Complex64>,
    pub rank: usize,
    pub zero_multiplicity: usize,
    /// Largest modulus among eigenvalues strictly inside the unit circle,
    /// if any eigenvalue lies there.
    pub dominant_subunit_modulus: Option<f64>,
}

pub fn spectral_report(m: &DMatrix<f64>) -> Result<SpectralReport> {
    let eigs = eigenvalues(m)?;
    let tau = tol::zero_tol(norm_scale(m));
    let zero_multiplicity = zero_multiplicity(&eigs, tau);
    let dominant_subunit_modulus = eigs
        .iter()
        .map(|e| e.norm())
        .filter(|&r| r < 1.0 - tau)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    Ok(SpectralReport {
        rank: rank(m),
        eigenvalues: eigs,
        zero_multiplicity,
        dominant_subunit_modulus,
    })
}

/// SVD rank tolerance: dim * machine-eps * sigma_max.
fn rank_tolerance(dim: usize, sigma_max: f64) -> f64 {
    dim as f64 * f64::EPSILON * sigma_max
}

pub fn rank(m: &DMatrix<f64>) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return 0;
    }
    let tol = rank_tolerance(m.nrows().max(m.ncols()), smax);
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}

/// Largest singular value.
pub fn opnorm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Moore-Penrose pseudoinverse with the standard rank cutoff.
pub fn pinv(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = if smax == 0.0 {
        0.0
    } else {
        rank_tolerance(m.nrows().max(m.ncols()), smax)
    };
    svd.pseudo_inverse(tol)
        .map_err(|e| CoordError::Numerical(format!("pseudoinverse failed: {e}")))
}

/// Orthonormal basis of the right null space. Wide matrices are padded with
/// zero rows first (the null space is unchanged) so the thin SVD always
/// carries the full basis.
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let tol = rank_tolerance(m.nrows().max(m.ncols()), 1.0);
    null_space_with(m, RankCutoff::Relative(tol))
}

/// Like [`null_space`] but with the caller's rank cutoff. Matrices assembled
/// from other computed bases (stacked projectors, Gram products) carry noise
/// well above machine precision, so rank decisions on them need a coarser
/// cutoff than fresh input data does.
pub fn null_space_with(m: &DMatrix<f64>, cutoff: RankCutoff) -> DMatrix<f64> {
    let (r, c) = (m.nrows(), m.ncols());
    let square = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = square.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let tol = cutoff.threshold(svd.singular_values.max());
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    // rows of v_t beyond the rank span the kernel
    let dim = c - rank;
    let mut basis = DMatrix::zeros(c, dim);
    for k in 0..dim {
        basis.column_mut(k).copy_from(&v_t.row(rank + k).transpose());
    }
    basis
}

/// Orthonormal basis of the column space (range).
pub fn range_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let tol = rank_tolerance(m.nrows().max(m.ncols()), 1.0);
    range_space_with(m, RankCutoff::Relative(tol))
}

/// Like [`range_space`] but with the caller's rank cutoff.
pub fn range_space_with(m: &DMatrix<f64>, cutoff: RankCutoff) -> DMatrix<f64> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let tol = cutoff.threshold(svd.singular_values.max());
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    u.columns(0, rank).into_owned()
}

/// How to turn a singular-value spectrum into a rank decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankCutoff {
    /// Keep singular values above `factor * sigma_max`.
    Relative(f64),
    /// Keep singular values above a fixed threshold.
    Absolute(f64),
}

impl RankCutoff {
    fn threshold(self, smax: f64) -> f64 {
        match self {
            RankCutoff::Relative(factor) => factor * smax,
            RankCutoff::Absolute(t) => t,
        }
    }
}

/// Positive left null vector of a singular matrix, normalized to sum 1.
/// Errors if the left kernel is not one-dimensional or mixes signs beyond
/// the tolerance.
pub fn left_null_positive(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let basis = null_space(&m.transpose());
    if basis.ncols() != 1 {
        return Err(CoordError::Hypothesis(format!(
            "left kernel is {}-dimensional, expected 1",
            basis.ncols()
        )));
    }
    let mut v: DVector<f64> = basis.column(0).into_owned();
    let tau = tol::zero_tol(norm_scale(m));
    if v.sum() < 0.0 {
        v.neg_mut();
    }
    if v.iter().any(|&x| x < -tau) {
        return Err(CoordError::Hypothesis(
            "left null vector changes sign; matrix lacks the irreducible \
             nonnegative-kernel structure"
                .into(),
        ));
    }
    let total = v.sum();
    if total <= 0.0 {
        return Err(CoordError::Numerical("left null vector sums to zero".into()));
    }
    Ok(v / total)
}

fn for_each_subset(n: usize, r: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, left: usize, buf: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if left == 0 {
            f(buf);
            return;
        }
        for i in start..=n - left {
            buf.push(i);
            rec(i + 1, n, left - 1, buf, f);
            buf.pop();
        }
    }
    if r <= n {
        rec(0, n, r, &mut Vec::with_capacity(r), f);
    }
}

fn submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let k = idx.len();
    DMatrix::from_fn(k, k, |i, j| m[(idx[i], idx[j])])
}

const MINOR_SUM_MAX_DIM: usize = 12;

/// Sum of all order-r principal minors, by direct subset enumeration.
/// Exact combinatorics, so the dimension is capped.
pub fn principal_minor_sum(m: &DMatrix<f64>, r: usize) -> Result<f64> {
    weighted_minor_sum(m, None, r)
}

/// Sum over all index subsets S of size r of (prod_{i in S} w_i) * det(M[S, S]).
///
/// With w = None all weights are 1 and this is the plain principal-minor
/// sum; with weights it equals the order-r minor sum of diag(w) * M.
pub fn weighted_minor_sum(m: &DMatrix<f64>, w: Option<&[f64]>, r: usize) -> Result<f64> {
    let n = ensure_square(m)?;
    if n > MINOR_SUM_MAX_DIM {
        return Err(CoordError::InvalidConfig(format!(
            "principal-minor sums use exhaustive subset enumeration and are \
             capped at dimension {MINOR_SUM_MAX_DIM}, got {n}"
        )));
    }
    if r == 0 {
        return Ok(1.0);
    }
    if r > n {
        return Ok(0.0);
    }
    if let Some(w) = w {
        if w.len() != n {
            return Err(CoordError::DimensionMismatch(format!(
                "{} weights for dimension {}",
                w.len(),
                n
            )));
        }
    }
    let mut total = 0.0;
    for_each_subset(n, r, &mut |idx| {
        let mut term = submatrix(m, idx).determinant();
        if let Some(w) = w {
            for &i in idx {
                term *= w[i];
            }
        }
        total += term;
    });
    Ok(total)
}

/// Routh-Hurwitz verdict for a monic real polynomial
/// lambda^n + c[0] lambda^(n-1) + ... + c[n-1].
#[derive(Debug, Clone)]
pub struct RouthVerdict {
    pub coefficients: Vec<f64>,
    /// Leading principal minors of the Hurwitz matrix, orders 1..=n.
    pub hurwitz_determinants: Vec<f64>,
    /// All coefficients positive and the odd-order determinant family
    /// positive (the two families are equivalent for genuine Hurwitz
    /// polynomials; see `families_agree`).
    pub stable: bool,
    /// Whether the odd- and even-order determinant families reach the same
    /// verdict. Disagreement indicates the polynomial sits numerically on
    /// the stability boundary.
    pub families_agree: bool,
}

pub fn routh_hurwitz(coeffs: &[f64]) -> Result<RouthVerdict> {
    let n = coeffs.len();
    if n == 0 {
        return Err(CoordError::InvalidConfig(
            "empty coefficient list: the polynomial degree must be at least 1".into(),
        ));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(CoordError::Numerical(
            "non-finite polynomial coefficient".into(),
        ));
    }
    // a[0] = 1 (monic), a[k] = coeffs[k-1]
    let a = |k: isize| -> f64 {
        if k < 0 || k as usize > n {
            0.0
        } else if k == 0 {
            1.0
        } else {
            coeffs[k as usize - 1]
        }
    };
    let h = DMatrix::from_fn(n, n, |i, j| a(2 * (j as isize + 1) - (i as isize + 1)));
    let mut dets = Vec::with_capacity(n);
    for r in 1..=n {
        dets.push(h.view((0, 0), (r, r)).into_owned().determinant());
    }
    let all_pos = coeffs.iter().all(|&c| c > 0.0);
    let odd_ok = dets.iter().step_by(2).all(|&d| d > 0.0);
    let even_ok = dets.iter().skip(1).step_by(2).all(|&d| d > 0.0);
    Ok(RouthVerdict {
        coefficients: coeffs.to_vec(),
        hurwitz_determinants: dets,
        stable: all_pos && odd_ok,
        families_agree: (all_pos && odd_ok) == (all_pos && even_ok),
    })
}

/// Gershgorin disks (center, radius) of a real square matrix, row version.
pub fn gershgorin(m: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    let n = ensure_square(m)?;
    Ok((0..n)
        .map(|i| {
            let radius: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| m[(i, j)].abs())
                .sum();
            (m[(i, i)], radius)
        })
        .collect())
}
