use proptest::prelude::*;

use harmstrat::covering::vitali_subcover;
use harmstrat::jones_beta::{beta2_value, dini_integral, DiscreteMeasure};
use harmstrat::map_model::{sample_map, CatalogEntry, GridDomain, SampledMap};
use harmstrat::reifenberg::{check_disjoint, minkowski_content, Ball, BallCovering, Label};
use harmstrat::symmetry::{
    effective_span, is_stratum_member, strata_membership_with, verify_span_certificate, SymmetryQuadrature,
};

fn point(dim: usize, extent: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-extent..extent, dim)
}

fn atoms(max: usize) -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
    prop::collection::vec((point(3, 1.0), 0.1f64..1.0), 1..=max)
}

fn measure(atoms: &[(Vec<f64>, f64)]) -> DiscreteMeasure {
    DiscreteMeasure::new(3, atoms.to_vec()).unwrap()
}

fn rotation(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (sc, cc) = c.sin_cos();
    let rz = [[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]];
    let ry = [[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]];
    let rx = [[1.0, 0.0, 0.0], [0.0, cc, -sc], [0.0, sc, cc]];
    let mul = |p: [[f64; 3]; 3], q: [[f64; 3]; 3]| {
        let mut o = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                o[i][j] = (0..3).map(|l| p[i][l] * q[l][j]).sum();
            }
        }
        o
    };
    mul(rz, mul(ry, rx))
}

fn apply(rot: &[[f64; 3]; 3], shift: &[f64], p: &[f64]) -> Vec<f64> {
    (0..3)
        .map(|i| (0..3).map(|j| rot[i][j] * p[j]).sum::<f64>() + shift[i])
        .collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn beta_is_invariant_under_rigid_motions(
        a in atoms(12), k in 0usize..3,
        angles in (0.0f64..6.3, 0.0f64..6.3, 0.0f64..6.3), shift in point(3, 2.0),
    ) {
        let mu = measure(&a);
        let rot = rotation(angles.0, angles.1, angles.2);
        let moved = DiscreteMeasure::new(3, a.iter().map(|(p, w)| (apply(&rot, &shift, p), *w)).collect()).unwrap();
        // Radius 3 contains every atom, so no atom sits on the boundary sphere.
        let before = beta2_value(&mu, &[0.0; 3], 3.0, k).unwrap();
        let after = beta2_value(&moved, &shift, 3.0, k).unwrap();
        prop_assert!(close(before, after, 1e-9), "{before} vs {after}");
    }

    #[test]
    fn beta_scales_with_weights_of_degree_k(a in atoms(12), k in 0usize..3, lambda in 0.1f64..10.0, x in point(3, 0.5)) {
        let mu = measure(&a);
        let scaled = DiscreteMeasure::new(
            3,
            a.iter().map(|(p, w)| (p.iter().map(|c| c * lambda).collect(), w * lambda.powi(k as i32))).collect(),
        ).unwrap();
        let xs: Vec<f64> = x.iter().map(|c| c * lambda).collect();
        let b0 = beta2_value(&mu, &x, 3.0, k).unwrap();
        let b1 = beta2_value(&scaled, &xs, 3.0 * lambda, k).unwrap();
        prop_assert!(close(b0, b1, 1e-9), "{b0} vs {b1}");
    }

    #[test]
    fn beta_is_monotone_in_the_measure(a in atoms(12), extra in atoms(5), k in 0usize..3, x in point(3, 0.5), r in 0.2f64..1.5) {
        let mu = measure(&a);
        let mut all = a.clone();
        all.extend(extra);
        let nu = measure(&all);
        prop_assert!(beta2_value(&mu, &x, r, k).unwrap() <= beta2_value(&nu, &x, r, k).unwrap() + 1e-12);
    }

    #[test]
    fn off_center_inequality(a in atoms(15), k in 0usize..3, x in point(3, 0.5), r in 0.2f64..1.0, dir in point(3, 1.0), t in 0.0f64..1.0) {
        let mu = measure(&a);
        let n = dir.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-9);
        let y: Vec<f64> = x.iter().zip(&dir).map(|(xi, d)| xi + t * r * d / n).collect();
        let lhs = beta2_value(&mu, &x, r, k).unwrap();
        let rhs = 2f64.powi(k as i32 + 2) * beta2_value(&mu, &y, 2.0 * r, k).unwrap();
        prop_assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
    }

    #[test]
    fn dini_sum_splits_by_scale_and_by_atom(a in atoms(15), k in 0usize..3, x in point(3, 0.5), r in 0.25f64..1.5, depth in 3usize..7) {
        let d = dini_integral(&measure(&a), &x, r, k, depth).unwrap();
        let by_scale: f64 = d.per_scale.iter().sum();
        let by_atom: f64 = d.per_atom.iter().map(|(_, c)| c).sum();
        prop_assert!(close(d.value, by_scale, 1e-12));
        prop_assert!(close(d.value, by_atom, 1e-12));
        prop_assert!(d.value >= 0.0);
    }

    #[test]
    fn effective_span_certificate_holds(pts in prop::collection::vec(point(3, 1.0), 1..30), rho in 0.01f64..0.3) {
        let span = effective_span(&pts, rho).unwrap();
        prop_assert!(span.dim <= 3);
        prop_assert_eq!(span.certificate.len(), span.dim + 1);
        prop_assert!(verify_span_certificate(&pts, &span.certificate, rho));
        prop_assert!(span.dim == 3 || span.max_residual <= 2.0 * rho);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn minkowski_content_is_monotone(pts in prop::collection::vec(point(3, 1.0), 1..8), extra in point(3, 1.0), r in 0.05f64..0.3, grow in 1.0f64..2.0) {
        let h = 1.0 / 64.0;
        let v = minkowski_content(&pts, r, &[0.0; 3], 1.0, h).unwrap();
        let wider = minkowski_content(&pts, r * grow, &[0.0; 3], 1.0, h).unwrap();
        let mut more = pts.clone();
        more.push(extra);
        let bigger = minkowski_content(&more, r, &[0.0; 3], 1.0, h).unwrap();
        prop_assert!(v <= wider && v <= bigger);
        prop_assert!(wider <= 4.0 / 3.0 * std::f64::consts::PI * 1.1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn vitali_postconditions(balls in prop::collection::vec((point(3, 1.0), 0.01f64..0.5), 100)) {
        let input: Vec<Ball> = balls
            .into_iter()
            .map(|(center, radius)| Ball { center, radius, label: Label::Final })
            .collect();
        let kept = vitali_subcover(&input);
        let mut c = BallCovering::new(3, 0);
        c.balls = kept.clone();
        prop_assert!(check_disjoint(&c).is_ok());
        for b in &input {
            let near = kept.iter().any(|k| {
                let d: f64 = k.center.iter().zip(&b.center).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                k.radius >= b.radius && d <= 2.0 * k.radius
            });
            prop_assert!(near);
        }
    }
}

fn radial_map() -> SampledMap {
    let d = GridDomain::centered(3, 3.0, 16).unwrap();
    sample_map(&CatalogEntry::parse("radial", 3).unwrap(), &d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fast_membership_agrees_with_full_scan(x in point(3, 0.4), eps in 0.02f64..0.6, j in 2i32..4) {
        let u = radial_map();
        let r = 0.5f64.powi(j);
        let q = SymmetryQuadrature::default();
        let full = strata_membership_with(&u, &x, 0, eps, r, &q).unwrap();
        prop_assert_eq!(is_stratum_member(&u, &x, 0, eps, r, &q).unwrap(), full.member);
    }
}
