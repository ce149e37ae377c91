use fbvp::fracops::{frac_integral, gamma, GridFn};
use fbvp::registry::{build_section4, section4_operator, SECTION4_XI};
use fbvp::resonance::{build_resonance, random_smooth_grid, DomainElement, ProblemSpec, ResonanceData};
use fbvp::rhs::{AffineRhs, Profile, ZeroRhs};
use fbvp::solver::{fixed_point_map, solve, InitialGuess, SolveOptions, Termination};
use fbvp::{Order, SplitFn};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

const N: usize = 256;

fn forced(amplitude: [f64; 3], profile: Profile) -> (ProblemSpec, ResonanceData) {
    let ord = Order::new(1.5).unwrap();
    let rhs = AffineRhs::forcing(DVector::from_row_slice(&amplitude), profile);
    let spec = ProblemSpec::new(ord, SECTION4_XI, section4_operator(1).unwrap(), Arc::new(rhs), N).unwrap();
    let rd = build_resonance(&spec, 0.0).unwrap();
    (spec, rd)
}

/// `I^(3/2)` of the profile, in closed form.
fn exact_integral(profile: Profile, t: f64) -> f64 {
    let a = 1.5;
    match profile {
        Profile::OneMinusTwoT => t.powf(a) / gamma(a + 1.0).unwrap() - 2.0 * t.powf(a + 1.0) / gamma(a + 2.0).unwrap(),
        Profile::Sqrt => gamma(1.5).unwrap() / gamma(a + 1.5).unwrap() * t.powf(a + 0.5),
        _ => unreachable!(),
    }
}

/// Closed-form solution `c t^(1/2) + I^(3/2) g` with `c = c0 + M⁺ h(g)`,
/// `h(g) = A I^(3/2) g(ξ) − I^(3/2) g(1)`.
fn oracle(rd: &ResonanceData, amplitude: [f64; 3], profile: Profile, c0: &DVector<f64>) -> (DVector<f64>, Vec<DVector<f64>>) {
    let amp = DVector::from_row_slice(&amplitude);
    let h = rd.a.matrix() * &amp * exact_integral(profile, SECTION4_XI) - &amp * exact_integral(profile, 1.0);
    let c = c0 + rd.m_plus.matrix() * h;
    let nodes = (0..=N)
        .map(|j| {
            let t = j as f64 / N as f64;
            &c * t.sqrt() + &amp * exact_integral(profile, t)
        })
        .collect();
    (c, nodes)
}

fn run_oracle(amplitude: [f64; 3], profile: Profile, sigma: f64) -> (f64, f64, usize, Termination) {
    let (spec, rd) = forced(amplitude, profile);
    let c0 = DVector::from_row_slice(&[0.0, 0.0, sigma]);
    let opts = SolveOptions {
        damping: 1.0,
        initial: InitialGuess::Element(DomainElement::kernel(c0.clone(), N)),
        ..Default::default()
    };
    let rep = solve(&spec, &rd, &opts).unwrap();
    let (c, nodes) = oracle(&rd, amplitude, profile, &c0);
    let x = rep.solution.eval_nodes(spec.ord).unwrap();
    let err = (0..=N)
        .map(|j| (x.at(j) - &nodes[j]).amax())
        .fold((&rep.solution.c - c).amax(), f64::max);
    // quadrature error of I^(3/2) g alone
    let g = GridFn::from_scalar_fn(N, |t| profile.eval(t)).unwrap();
    let ig = frac_integral(&g, 1.5).unwrap();
    let quad = (0..=N).map(|j| (ig.at(j)[0] - exact_integral(profile, ig.node(j))).abs()).fold(0.0, f64::max);
    (err, quad, rep.iterations, rep.termination)
}

#[test]
fn pure_forcing_matches_closed_form_linear_profile() {
    let (err, quad, iters, term) = run_oracle([0.5, -0.25, 0.0], Profile::OneMinusTwoT, 0.7);
    assert_eq!(term, Termination::Converged);
    assert!(iters <= 3, "{iters}");
    // The product rule is exact on linear data.
    assert!(quad < 1e-14);
    assert!(err < 1e-13, "{err}");
}

#[test]
fn pure_forcing_matches_closed_form_sqrt_profile() {
    let (err, quad, iters, term) = run_oracle([1.0, 2.0, 0.0], Profile::Sqrt, -0.3);
    assert_eq!(term, Termination::Converged);
    assert!(iters <= 3, "{iters}");
    assert!(quad > 0.0 && err <= 10.0 * quad, "err {err}, quadrature {quad}");
}

#[test]
fn zero_rhs_keeps_kernel_elements() {
    let spec = build_section4(2).unwrap();
    let spec = ProblemSpec::new(spec.ord, spec.xi, spec.a.clone(), Arc::new(ZeroRhs { dim: 6 }), 64).unwrap();
    let rd = build_resonance(&spec, 0.0).unwrap();
    for seed in 0..5 {
        let opts = SolveOptions {
            initial: InitialGuess::RandomKernel { scale: 2.0 },
            seed,
            ..Default::default()
        };
        let rep = solve(&spec, &rd, &opts).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert!((rd.m.matrix() * &rep.solution.c).amax() < 1e-15);
        assert!(rep.solution.c.norm() > 0.0);
    }
}

#[test]
fn fixed_point_map_lands_in_domain() {
    let spec = build_section4(1).unwrap().with_grid(64).unwrap();
    let rd = build_resonance(&spec, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let x = DomainElement {
            c: DVector::from_fn(3, |_, _| rng.random_range(-0.5..0.5)),
            y: SplitFn::from_grid(random_smooth_grid(64, 3, &mut rng).scaled(0.2)),
        };
        let phi = fixed_point_map(&spec, &rd, &x).unwrap();
        assert!(rd.boundary_defect(&phi).unwrap() < 1e-13);
        assert!(rd.solvability_defect(&phi.y).unwrap() < 1e-13);
    }
}

#[test]
fn block_example_solves_for_each_k() {
    for k in 1..=3 {
        let spec = build_section4(k).unwrap();
        let rd = build_resonance(&spec, 0.0).unwrap();
        let rep = solve(&spec, &rd, &SolveOptions::default()).unwrap();
        assert!(rep.converged, "k = {k}: {:?}", rep.termination);
        let r = rep.residuals.as_ref().unwrap();
        assert!(r.right_bc_defect <= 1e-5 && r.right_bc_direct <= 1e-5);
        assert!(r.solvability_defect <= 1e-6);
        assert!(r.pde_residual <= 1e-2);
        assert_eq!(r.left_bc_defect, 0.0);
        // Only the first component is forced at the fixed point.
        assert!(rep.solution.c[0] < 0.0);
        assert_eq!(rep.solution.c.rows(1, 3 * k - 1).amax(), 0.0);
        let again = solve(&spec, &rd, &SolveOptions::default()).unwrap();
        assert_eq!(again, rep);
    }
}

#[test]
fn iterate_differences_contract() {
    let spec = build_section4(1).unwrap();
    let rd = build_resonance(&spec, 0.0).unwrap();
    let rep = solve(&spec, &rd, &SolveOptions::default()).unwrap();
    for w in rep.history.windows(2).skip(1) {
        assert!(w[1] <= 0.6 * w[0], "{:?}", rep.history);
    }
}

#[test]
fn one_iteration_is_not_enough() {
    let spec = build_section4(1).unwrap();
    let rd = build_resonance(&spec, 0.0).unwrap();
    let opts = SolveOptions {
        max_iter: 1,
        ..Default::default()
    };
    let rep = solve(&spec, &rd, &opts).unwrap();
    assert!(!rep.converged);
    assert_eq!(rep.termination, Termination::MaxIterations);
}
