//! Symmetric eigendecomposition with a deterministic ordering, and
//! Gauss–Legendre nodes.

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenpairs of a symmetric matrix sorted by eigenvalue (descending or
/// ascending). Each eigenvector's first coordinate of magnitude above 1e-12
/// is made positive; exact ties in eigenvalue are ordered lexicographically
/// by eigenvector.
#[must_use]
pub fn sorted_eigen(matrix: &DMatrix<f64>, descending: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = matrix.nrows();
    let sym = (matrix + matrix.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..m)
        .map(|i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
            (eig.eigenvalues[i], v)
        })
        .collect();
    pairs.sort_by(|a, b| {
        let ord = a.0.total_cmp(&b.0);
        let ord = if descending { ord.reverse() } else { ord };
        ord.then_with(|| {
            a.1.iter()
                .zip(&b.1)
                .map(|(x, y)| y.total_cmp(x))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    pairs.into_iter().unzip()
}

/// Gauss–Legendre rule on `[0, 1]`: nodes ascending, weights summing to 1.
#[must_use]
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=10 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-12, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn eigen_sorted_and_sign_normalized() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0]);
        let (vals, vecs) = sorted_eigen(&a, true);
        assert_eq!(vals, vec![5.0, 2.0, 1.0]);
        assert_eq!(vecs[0], vec![0.0, 1.0, 0.0]);
        let (vals, _) = sorted_eigen(&a, false);
        assert_eq!(vals, vec![1.0, 2.0, 5.0]);
    }
}
