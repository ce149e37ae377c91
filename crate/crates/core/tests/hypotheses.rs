use fbvp::hypotheses::{check_condition_31, check_h1, probe_h2, probe_h3, Sign};
use fbvp::linops::LinOp;
use fbvp::registry::{build_section4, section4_growth, Section4Rhs, SECTION4_GROWTH_RADIUS};
use fbvp::resonance::{build_resonance, ProblemSpec};
use nalgebra::DMatrix;
use std::sync::Arc;

#[test]
fn sign_condition_holds_on_block_example() {
    for k in 1..=3 {
        let spec = build_section4(k).unwrap();
        let rd = build_resonance(&spec, 0.0).unwrap();
        let h3 = probe_h3(&spec, &rd, 1.0, 1.12, 50, k as u64).unwrap();
        assert_eq!(h3.sign, Sign::Positive, "k = {k}");
        assert_eq!(h3.undefined, 0);
        assert_eq!(h3.products.len(), 50);
        assert!(h3.products.iter().all(|&(r, _)| r > 1.0 && r <= 1.12));
    }
}

#[test]
fn sign_product_is_quadratic_in_the_norm() {
    // For k = 1 the kernel is one-dimensional and f is affine in (u₃, v₃).
    let spec = build_section4(1).unwrap();
    let rd = build_resonance(&spec, 0.0).unwrap();
    let h3 = probe_h3(&spec, &rd, 1.0, 1.12, 30, 4).unwrap();
    let ratios: Vec<f64> = h3.products.iter().map(|&(r, p)| p / (r * r)).collect();
    for r in &ratios {
        assert!((r - ratios[0]).abs() < 1e-12 * ratios[0].abs(), "{ratios:?}");
    }
}

#[test]
fn solvability_defect_is_positive_on_block_example() {
    let spec = build_section4(1).unwrap();
    let rd = build_resonance(&spec, 0.0).unwrap();
    let h2 = probe_h2(&spec, &rd, 1.0, 40, 2).unwrap();
    assert!(h2.evidence, "{h2:?}");
    assert!(h2.min_defect > 0.0);
}

#[test]
fn growth_bound_violations_are_the_known_branch() {
    let spec = build_section4(1).unwrap();
    let g = section4_growth(SECTION4_GROWTH_RADIUS);
    let h1 = check_h1(&spec, &g, 10_000, 0).unwrap();
    assert!(h1.violations < 50, "{}", h1.violations);
    for s in &h1.violation_samples {
        assert!(s.v.norm() >= 1.0);
        assert!(s.v[0].abs() * SECTION4_GROWTH_RADIUS < 1.0);
    }
}

#[test]
fn condition_is_invariant_under_coordinate_permutation() {
    let spec = build_section4(2).unwrap();
    let rd = build_resonance(&spec, 0.0).unwrap();
    let g = section4_growth(SECTION4_GROWTH_RADIUS);
    let base = check_condition_31(spec.ord, &rd, &g).unwrap();
    let perm = [4usize, 0, 5, 2, 1, 3];
    let p = DMatrix::from_fn(6, 6, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
    let a = LinOp::new(&p * spec.a.matrix() * p.transpose()).unwrap();
    let permuted = ProblemSpec::new(spec.ord, spec.xi, a, Arc::new(Section4Rhs { k: 2 }), spec.grid_n).unwrap();
    let rd2 = build_resonance(&permuted, 0.0).unwrap();
    let other = check_condition_31(permuted.ord, &rd2, &g).unwrap();
    assert!((base.quotient - other.quotient).abs() < 1e-14);
    assert!((base.kernel_proj_norm - other.kernel_proj_norm).abs() < 1e-14);
    assert_eq!(base.pass, other.pass);
}

#[test]
fn condition_fails_once_slopes_reach_the_margin() {
    use fbvp::hypotheses::GrowthFn;
    let spec = build_section4(1).unwrap();
    let rd = build_resonance(&spec, 0.0).unwrap();
    let mut g = section4_growth(SECTION4_GROWTH_RADIUS);
    // ‖I − M⁺M‖ = 1, so the margin closes at Γ(3/2)/2.
    g.a1 = GrowthFn::constant(0.886_226_925_452_758 / 2.0 + 1e-9);
    let c = check_condition_31(spec.ord, &rd, &g).unwrap();
    assert!(!c.pass);
    assert!(c.margin_a < 0.0);
    assert_eq!(c.quotient, f64::INFINITY);
}
