use fbvp::fracops::{GridFn, Order, SplitFn};
use fbvp::linops::{operator_norm, LinOp};
use fbvp::registry::build_section4;
use fbvp::resonance::{build_resonance, random_resonant_operator, random_smooth_grid, verify_structure, DomainElement, ProblemSpec, ResonanceData};
use fbvp::rhs::ZeroRhs;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

const XIS: [f64; 4] = [0.125, 0.25, 0.5, 0.75];

/// A random resonant problem on a grid of 64 subintervals.
fn random_spec(seed: u64) -> ProblemSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6);
    let dim_ker = rng.random_range(1..=n);
    let ord = Order::new(rng.random_range(1.05..=2.0)).unwrap();
    let xi = XIS[rng.random_range(0..XIS.len())];
    let a = random_resonant_operator(n, dim_ker, xi, ord, &mut rng).unwrap();
    ProblemSpec::new(ord, xi, a, Arc::new(ZeroRhs { dim: n }), 64).unwrap()
}

fn section4() -> (ProblemSpec, ResonanceData) {
    let spec = build_section4(1).unwrap();
    let rd = build_resonance(&spec, 0.0).unwrap();
    (spec, rd)
}

fn split(g: GridFn) -> SplitFn {
    SplitFn::from_grid(g)
}

fn max_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

#[test]
fn random_specs_are_resonant() {
    for seed in 0..50 {
        let spec = random_spec(seed);
        let rd = build_resonance(&spec, 0.0).unwrap();
        assert!(rd.dim_ker >= 1);
        assert_eq!(rd.ker_m.ncols(), rd.dim_ker);
        assert!((rd.m.matrix() * &rd.ker_m).amax() < 1e-12);
    }
}

#[test]
fn corange_identity_on_random_specs() {
    for seed in 0..20 {
        let spec = random_spec(seed);
        let rd = build_resonance(&spec, 0.0).unwrap();
        let (xi, ord) = (spec.xi, spec.ord);
        let n = spec.dim();
        let comp = rd.corange_complement();
        let lhs = &comp * (spec.a.matrix() * xi.powf(2.0 * ord.alpha() - 1.0) - DMatrix::identity(n, n));
        let rhs = &comp * (xi.powf(ord.alpha()) - 1.0);
        assert!((lhs - rhs).amax() <= 1e-13, "seed {seed}");
    }
}

#[test]
fn structure_error_shrinks_with_grid() {
    let spec = build_section4(1).unwrap();
    let mut prev = f64::INFINITY;
    for n in [256, 512] {
        let s = spec.with_grid(n).unwrap();
        let rd = build_resonance(&s, 0.0).unwrap();
        let rep = verify_structure(&s, &rd, 4, 11).unwrap();
        assert!(rep.all_pass(), "{:?}", rep.checks);
        let e = rep.get("(e)").unwrap().residual;
        assert!(e < prev / 2.0, "{e} vs {prev}");
        prev = e;
    }
}

#[test]
fn k_p_obeys_its_bound() {
    let (spec, rd) = section4();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bound = rd.kp_bound_constant();
    for _ in 0..50 {
        let y = rd.q_complement(&split(random_smooth_grid(spec.grid_n, 3, &mut rng))).unwrap();
        let x = rd.k_p(&y).unwrap();
        let size = x.size();
        assert!(size <= bound * y.sup_bound() + 1e-12, "{size} > {bound} * {}", y.sup_bound());
    }
}

#[test]
fn block_operator_projectors_are_exact() {
    let (spec, rd) = section4();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let x = DomainElement {
            c: DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0)),
            y: split(random_smooth_grid(spec.grid_n, 3, &mut rng)),
        };
        let p = rd.p_project(&x);
        assert_eq!(rd.p_project(&p), p);
        let y = rd.q_complement(&split(random_smooth_grid(spec.grid_n, 3, &mut rng))).unwrap();
        let kp = rd.k_p(&y).unwrap();
        assert_eq!(rd.p_project(&kp).c, DVector::zeros(3));
    }
}

#[test]
fn non_ep_operator_is_flagged() {
    // M = [[0, 1], [0, 0]]: ker M = span e1, ker Mᵀ = span e2.
    let ord = Order::new(1.5).unwrap();
    let a = LinOp::from_row_slice(2, 2, &[2.0, -2.0, 0.0, 2.0]).unwrap();
    let spec = ProblemSpec::new(ord, 0.25, a, Arc::new(ZeroRhs { dim: 2 }), 16).unwrap();
    let rd = build_resonance(&spec, 0.0).unwrap();
    assert!((rd.ep_defect - 1.0).abs() < 1e-14);
    assert!(operator_norm(&rd.m) > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn h_is_linear(seed in any::<u64>(), s in -2.0f64..2.0, r in -2.0f64..2.0) {
        let spec = random_spec(seed);
        let rd = build_resonance(&spec, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let f = split(random_smooth_grid(64, spec.dim(), &mut rng));
        let g = split(random_smooth_grid(64, spec.dim(), &mut rng));
        let lhs = rd.h(&f.lincomb(s, &g, r).unwrap()).unwrap();
        let rhs = rd.h(&f).unwrap() * s + rd.h(&g).unwrap() * r;
        prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn q_is_idempotent(seed in any::<u64>()) {
        let spec = random_spec(seed);
        let rd = build_resonance(&spec, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let g = split(random_smooth_grid(64, spec.dim(), &mut rng));
        let q = rd.q_project(&g).unwrap();
        let qq = rd.q_project(&SplitFn::from_power(64, q.clone())).unwrap();
        let scale = 1.0 + q.coeffs.amax();
        prop_assert!(max_diff(&qq.coeffs, &q.coeffs) < 1e-10 * scale);
        prop_assert_eq!(qq.exponent, q.exponent);
    }

    #[test]
    fn p_is_idempotent_and_k_p_lands_in_ker_p(seed in any::<u64>()) {
        let spec = random_spec(seed);
        let rd = build_resonance(&spec, 0.0).unwrap();
        let n = spec.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let x = DomainElement {
            c: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            y: split(random_smooth_grid(64, n, &mut rng)),
        };
        let p = rd.p_project(&x);
        let pp = rd.p_project(&p);
        prop_assert!(max_diff(&pp.c, &p.c) < 1e-14 * (1.0 + x.c.amax()));
        prop_assert!(p.y.sup_bound() == 0.0);
        let y = rd.q_complement(&split(random_smooth_grid(64, n, &mut rng))).unwrap();
        let kp = rd.k_p(&y).unwrap();
        let pk = rd.p_project(&kp);
        prop_assert!(pk.c.amax() < 1e-12 * (1.0 + kp.c.amax()));
    }
}
