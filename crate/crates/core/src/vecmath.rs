//! Dense small-vector helpers on `&[f64]`.

#[inline]
#[must_use]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
#[must_use]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
#[must_use]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
#[must_use]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
#[must_use]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

#[must_use]
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Volume of the unit ball in ℝ^k.
#[must_use]
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(k - 2) * 2.0 * std::f64::consts::PI / k as f64,
    }
}

/// Removes from `v` its components along the orthonormal vectors in `basis`.
pub fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= c * y;
        }
    }
}

/// Distance from `p` to the affine plane `origin + span(basis)` with `basis` orthonormal.
#[must_use]
pub fn dist_to_plane(p: &[f64], origin: &[f64], basis: &[Vec<f64>]) -> f64 {
    let mut d = sub(p, origin);
    project_out(&mut d, basis);
    norm(&d)
}

/// Orthonormal completion of `basis` to all of ℝ^m, deterministic: candidate
/// directions are the coordinate axes in order.
#[must_use]
pub fn orthonormal_complement(basis: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    let mut out = Vec::new();
    for axis in 0..m {
        if all.len() == m {
            break;
        }
        let mut e = vec![0.0; m];
        e[axis] = 1.0;
        // Two passes of Gram-Schmidt keep the result orthonormal to rounding.
        project_out(&mut e, &all);
        project_out(&mut e, &all);
        let n = norm(&e);
        if n > 1e-6 {
            e.iter_mut().for_each(|x| *x /= n);
            all.push(e.clone());
            out.push(e);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn complement_is_orthonormal() {
        let s = 0.5_f64.sqrt();
        let basis = vec![vec![s, s, 0.0]];
        let comp = orthonormal_complement(&basis, 3);
        assert_eq!(comp.len(), 2);
        for c in &comp {
            assert!(dot(c, &basis[0]).abs() < 1e-14);
            assert!((norm(c) - 1.0).abs() < 1e-14);
        }
        assert!(dot(&comp[0], &comp[1]).abs() < 1e-14);
    }
}
