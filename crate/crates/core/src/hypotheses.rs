//! Sampled evidence for the growth, solvability and sign hypotheses of the
//! existence theorem, and the arithmetic solvability margin.
//!
//! The sign and solvability hypotheses quantify over infinite sets. The
//! probes here sample them; a passing probe is evidence, not a proof.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fracops::{gamma, Order, SplitFn};
use crate::linops::spectral_norm;
use crate::resonance::{random_smooth_grid, DomainElement, ProblemSpec, ResonanceData};
use crate::solver::apply_n;

/// A nonnegative function on `[0, 1]` with its `L¹` norm.
#[derive(Clone)]
pub struct GrowthFn {
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Exact norm if known. Otherwise [`GrowthFn::l1_norm`] integrates.
    pub l1: Option<f64>,
}

impl fmt::Debug for GrowthFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrowthFn").field("l1", &self.l1).finish_non_exhaustive()
    }
}

/// `L¹` norm with the error estimate of the quadrature fallback, if used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Norm {
    pub value: f64,
    pub quadrature_error: Option<f64>,
}

impl GrowthFn {
    pub fn constant(v: f64) -> Self {
        Self {
            f: Arc::new(move |_| v),
            l1: Some(v.abs()),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, l1: Option<f64>) -> Self {
        Self {
            f: Arc::new(f),
            l1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    /// Supplied norm, or composite Simpson on 2048 panels with the
    /// difference against 1024 panels as error estimate.
    pub fn l1_norm(&self) -> L1Norm {
        if let Some(v) = self.l1 {
            return L1Norm {
                value: v,
                quadrature_error: None,
            };
        }
        let fine = simpson(|t| self.eval(t).abs(), 2048);
        let coarse = simpson(|t| self.eval(t).abs(), 1024);
        L1Norm {
            value: fine,
            quadrature_error: Some((fine - coarse).abs()),
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
    let n = 2 * panels;
    let h = 1.0 / n as f64;
    let mut acc = f(0.0) + f(1.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

/// `‖f(t,u,v)‖ ≤ a₁‖u‖ + b₁‖v‖ + a₂‖u‖^γ₁ + b₂‖v‖^γ₂ + c`.
#[derive(Debug, Clone)]
pub struct GrowthSpec {
    pub a1: GrowthFn,
    pub b1: GrowthFn,
    pub a2: GrowthFn,
    pub b2: GrowthFn,
    pub c: GrowthFn,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl GrowthSpec {
    pub fn validate(&self) -> Result<()> {
        for g in [self.gamma1, self.gamma2] {
            if !(0.0..1.0).contains(&g) {
                return Err(Error::Input(format!("growth exponents must lie in [0, 1), got {g}")));
            }
        }
        for (name, f) in self.parts() {
            if let Some(v) = f.l1 {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::Input(format!("L1 norm of {name} must be finite and >= 0, got {v}")));
                }
            }
        }
        Ok(())
    }

    fn parts(&self) -> [(&'static str, &GrowthFn); 5] {
        [
            ("a1", &self.a1),
            ("b1", &self.b1),
            ("a2", &self.a2),
            ("b2", &self.b2),
            ("c", &self.c),
        ]
    }

    pub fn bound(&self, t: f64, nu: f64, nv: f64) -> f64 {
        self.a1.eval(t) * nu
            + self.b1.eval(t) * nv
            + self.a2.eval(t) * pow0(nu, self.gamma1)
            + self.b2.eval(t) * pow0(nv, self.gamma2)
            + self.c.eval(t)
    }
}

fn pow0(z: f64, g: f64) -> f64 {
    if g == 0.0 {
        1.0
    } else {
        z.powf(g)
    }
}

/// One `(t, u, v)` draw of [`check_h1`].
#[derive(Debug, Clone, PartialEq)]
pub struct H1Sample {
    pub t: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub f_norm: f64,
    pub bound: f64,
}

impl H1Sample {
    /// `bound − ‖f‖`; negative on a violation.
    pub fn slack(&self) -> f64 {
        self.bound - self.f_norm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct H1Report {
    pub samples: usize,
    pub violations: usize,
    pub ok: bool,
    /// Sample with the smallest slack.
    pub worst: Option<H1Sample>,
    /// First violations found, at most [`H1_KEEP`].
    pub violation_samples: Vec<H1Sample>,
}

pub const H1_KEEP: usize = 32;

/// Range of the sampled `‖u‖`, `‖v‖` (log-uniform).
pub const H1_NORM_RANGE: (f64, f64) = (1e-3, 1e3);

fn random_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut *rng));
        let n: f64 = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

fn log_uniform<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

/// Samples the growth bound at random `(t, u, v)`.
pub fn check_h1(spec: &ProblemSpec, growth: &GrowthSpec, samples: usize, seed: u64) -> Result<H1Report> {
    if samples == 0 {
        return Err(Error::Input("sample count must be >= 1".into()));
    }
    growth.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.dim();
    let (lo, hi) = H1_NORM_RANGE;
    let mut worst: Option<H1Sample> = None;
    let mut violations = 0;
    let mut violation_samples = Vec::new();
    for _ in 0..samples {
        let t: f64 = rng.random_range(0.0..=1.0);
        let u = random_direction(n, &mut rng) * log_uniform(lo, hi, &mut rng);
        let v = random_direction(n, &mut rng) * log_uniform(lo, hi, &mut rng);
        let f_norm = spec.rhs.eval(t, &u, &v).norm();
        let bound = growth.bound(t, u.norm(), v.norm());
        let s = H1Sample {
            t,
            u,
            v,
            f_norm,
            bound,
        };
        // NaN norms count as violations.
        let violated = !(s.f_norm <= s.bound);
        if violated {
            violations += 1;
            if violation_samples.len() < H1_KEEP {
                violation_samples.push(s.clone());
            }
        }
        let replace = match &worst {
            None => true,
            Some(w) => violated && w.slack() >= 0.0 || s.slack() < w.slack(),
        };
        if replace {
            worst = Some(s);
        }
    }
    Ok(H1Report {
        samples,
        violations,
        ok: violations == 0,
        worst,
        violation_samples,
    })
}

/// Quantities of the solvability condition
/// `Γ(α) > max{(‖I−M⁺M‖+1)‖a₁‖, (‖I−M⁺M‖+1)‖b₁‖}` and
/// `(‖I−M⁺M‖+1)²‖a₁‖‖b₁‖ / ((Γ(α) − (‖I−M⁺M‖+1)‖a₁‖)(Γ(α) − (‖I−M⁺M‖+1)‖b₁‖)) < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cond31Report {
    pub gamma_alpha: f64,
    pub kernel_proj_norm: f64,
    pub a1_norm: L1Norm,
    pub b1_norm: L1Norm,
    /// `(‖I−M⁺M‖+1)‖a₁‖`
    pub rhs_a: f64,
    /// `(‖I−M⁺M‖+1)‖b₁‖`
    pub rhs_b: f64,
    pub margin_a: f64,
    pub margin_b: f64,
    /// The product quotient; infinite when a margin is not positive.
    pub quotient: f64,
    pub pass: bool,
}

impl Cond31Report {
    /// `max(rhs_a, rhs_b)`
    pub fn rhs(&self) -> f64 {
        self.rhs_a.max(self.rhs_b)
    }
}

impl fmt::Display for Cond31Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Gamma(alpha) = {:.6}, max side = {:.6}, product quotient = {:.6} -> {}",
            self.gamma_alpha,
            self.rhs(),
            self.quotient,
            if self.pass { "pass" } else { "fail" }
        )
    }
}

pub fn check_condition_31(ord: Order, rdata: &ResonanceData, growth: &GrowthSpec) -> Result<Cond31Report> {
    let gamma_alpha = gamma(ord.alpha())?;
    let kernel_proj_norm = spectral_norm(&rdata.kernel_proj());
    Ok(condition_31_from(
        gamma_alpha,
        kernel_proj_norm,
        growth.a1.l1_norm(),
        growth.b1.l1_norm(),
    ))
}

/// The arithmetic of the condition, from its four inputs.
pub fn condition_31_from(gamma_alpha: f64, kernel_proj_norm: f64, a1_norm: L1Norm, b1_norm: L1Norm) -> Cond31Report {
    let k = kernel_proj_norm + 1.0;
    let rhs_a = k * a1_norm.value;
    let rhs_b = k * b1_norm.value;
    let margin_a = gamma_alpha - rhs_a;
    let margin_b = gamma_alpha - rhs_b;
    let quotient = if margin_a > 0.0 && margin_b > 0.0 {
        rhs_a * rhs_b / (margin_a * margin_b)
    } else {
        f64::INFINITY
    };
    let pass = margin_a > 0.0 && margin_b > 0.0 && quotient < 1.0;
    Cond31Report {
        gamma_alpha,
        kernel_proj_norm,
        a1_norm,
        b1_norm,
        rhs_a,
        rhs_b,
        margin_a,
        margin_b,
        quotient,
        pass,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct H2Report {
    pub a1: f64,
    pub samples: usize,
    /// Samples where `N x` was not finite.
    pub undefined: usize,
    pub min_defect: f64,
    pub max_defect: f64,
    /// `min_defect > 0` over the defined samples.
    pub evidence: bool,
}

/// Samples `x` in the domain of `L` with `‖D^(α−1) x(t)‖ > A₁` for all `t`
/// and reports `‖(I − MM⁺) h(N x)‖`.
///
/// `y = (I − Q) g` for a random smooth `g`, and
/// `c = M⁺ h(y) + k` with `k ∈ ker M` large enough that
/// `Γ(α)‖c‖ > A₁ + sup ‖I¹ y‖`.
pub fn probe_h2(spec: &ProblemSpec, rdata: &ResonanceData, a1: f64, samples: usize, seed: u64) -> Result<H2Report> {
    if !(a1 > 0.0) {
        return Err(Error::Input(format!("A1 must be positive, got {a1}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.dim();
    let n_sub = spec.grid_n;
    let g_alpha = gamma(spec.ord.alpha())?;
    let (mut min_d, mut max_d) = (f64::INFINITY, 0.0_f64);
    let mut undefined = 0;
    for _ in 0..samples {
        let g = SplitFn::from_grid(random_smooth_grid(n_sub, n, &mut rng));
        let y = rdata.q_complement(&g)?;
        let c_part = rdata.m_plus.matrix() * rdata.h(&y)?;
        let i1 = y.frac_integral(1.0)?.sup_norm();
        let target = (a1 + i1) * (1.0 + rng.random_range(0.0..1.0)) / g_alpha;
        let k_norm = (target * target - c_part.norm_squared()).max(0.0).sqrt();
        let coords = random_direction(rdata.dim_ker, &mut rng) * k_norm;
        let x = DomainElement {
            c: c_part + &rdata.ker_m * coords,
            y,
        };
        match apply_n(spec, &x) {
            Ok(w) => {
                let d = rdata.solvability_defect(&SplitFn::from_grid(w))?;
                if d.is_finite() {
                    min_d = min_d.min(d);
                    max_d = max_d.max(d);
                } else {
                    undefined += 1;
                }
            }
            Err(Error::NonFiniteRhs { .. }) => undefined += 1,
            Err(e) => return Err(e),
        }
    }
    let defined = samples - undefined;
    Ok(H2Report {
        a1,
        samples,
        undefined,
        min_defect: if defined > 0 { min_d } else { f64::NAN },
        max_defect: if defined > 0 { max_d } else { f64::NAN },
        evidence: defined > 0 && min_d > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
    /// Mixed signs or a zero product.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct H3Report {
    pub a2: f64,
    pub norm_max: f64,
    pub samples: usize,
    pub undefined: usize,
    pub min_product: f64,
    pub max_product: f64,
    pub sign: Sign,
    /// `(‖e‖, ⟨e, J Q N(e t^(α−1))⟩)` for every defined sample.
    pub products: Vec<(f64, f64)>,
}

impl H3Report {
    pub fn evidence(&self) -> bool {
        self.sign != Sign::None
    }
}

/// Samples `e ∈ ker M` with `A₂ < ‖e‖ ≤ norm_max` and reports
/// `⟨e, J Q N(e t^(α−1))⟩`.
pub fn probe_h3(
    spec: &ProblemSpec,
    rdata: &ResonanceData,
    a2: f64,
    norm_max: f64,
    samples: usize,
    seed: u64,
) -> Result<H3Report> {
    if rdata.dim_ker == 0 {
        return Err(Error::NotApplicable("ker M is trivial".into()));
    }
    if !(a2 > 0.0) || !(norm_max > a2) {
        return Err(Error::Input(format!(
            "need 0 < A2 < norm_max, got A2 = {a2}, norm_max = {norm_max}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sub = spec.grid_n;
    let mut products = Vec::with_capacity(samples);
    let mut undefined = 0;
    for _ in 0..samples {
        // Uniform on (A₂, norm_max]; the open end is hit with probability 0
        // but is excluded explicitly.
        let mut r = rng.random_range(a2..=norm_max);
        if r == a2 {
            r = norm_max;
        }
        let e = &rdata.ker_m * (random_direction(rdata.dim_ker, &mut rng) * r);
        let x = DomainElement::kernel(e.clone(), n_sub);
        let w = match apply_n(spec, &x) {
            Ok(w) => w,
            Err(Error::NonFiniteRhs { .. }) => {
                undefined += 1;
                continue;
            }
            Err(err) => return Err(err),
        };
        let q = rdata.q_project(&SplitFn::from_grid(w))?;
        let p = e.dot(&rdata.apply_j(&q.coeffs));
        if p.is_finite() {
            products.push((e.norm(), p));
        } else {
            undefined += 1;
        }
    }
    let min_product = products.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_product = products.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let sign = if products.is_empty() {
        Sign::None
    } else if min_product > 0.0 {
        Sign::Positive
    } else if max_product < 0.0 {
        Sign::Negative
    } else {
        Sign::None
    };
    Ok(H3Report {
        a2,
        norm_max,
        samples,
        undefined,
        min_product,
        max_product,
        sign,
        products,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOptions {
    pub h1_samples: usize,
    pub samples: usize,
    pub a1: f64,
    pub a2: f64,
    /// Upper end of the sampled `‖e‖`; defaults to `2 A₂`.
    pub norm_max: Option<f64>,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            h1_samples: 10_000,
            samples: 100,
            a1: 1.0,
            a2: 1.0,
            norm_max: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub h1: Option<H1Report>,
    pub cond31: Option<Cond31Report>,
    pub h2: H2Report,
    pub h3: H3Report,
}

/// Runs all checks. The two probes run on separate threads with seeds
/// `seed` and `seed + 1`.
pub fn check_hypotheses(
    spec: &ProblemSpec,
    rdata: &ResonanceData,
    growth: Option<&GrowthSpec>,
    opts: &ProbeOptions,
) -> Result<HypothesisReport> {
    let norm_max = opts.norm_max.unwrap_or(2.0 * opts.a2);
    let (h2, h3) = std::thread::scope(|s| {
        let h2 = s.spawn(|| probe_h2(spec, rdata, opts.a1, opts.samples, opts.seed));
        let h3 = s.spawn(|| probe_h3(spec, rdata, opts.a2, norm_max, opts.samples, opts.seed.wrapping_add(1)));
        (
            h2.join().expect("H2 probe panicked"),
            h3.join().expect("H3 probe panicked"),
        )
    });
    let (h1, cond31) = match growth {
        Some(g) => (
            Some(check_h1(spec, g, opts.h1_samples, opts.seed.wrapping_add(2))?),
            Some(check_condition_31(spec.ord, rdata, g)?),
        ),
        None => (None, None),
    };
    Ok(HypothesisReport {
        h1,
        cond31,
        h2: h2?,
        h3: h3?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::LinOp;
    use crate::resonance::build_resonance;
    use crate::rhs::{AffineRhs, Profile, ZeroRhs};
    use approx::assert_relative_eq;
    use crate::fracops::GridFn;
    use nalgebra::DMatrix;

    fn block_spec(rhs: Arc<dyn crate::rhs::RightHandSide>) -> ProblemSpec {
        ProblemSpec::new(
            Order::new(1.5).unwrap(),
            0.25,
            LinOp::from_diagonal(&[1.5, 1.75, 2.0]).unwrap(),
            rhs,
            64,
        )
        .unwrap()
    }

    fn zero_growth() -> GrowthSpec {
        GrowthSpec {
            a1: GrowthFn::zero(),
            b1: GrowthFn::zero(),
            a2: GrowthFn::zero(),
            b2: GrowthFn::zero(),
            c: GrowthFn::zero(),
            gamma1: 0.0,
            gamma2: 0.0,
        }
    }

    #[test]
    fn zero_rhs_satisfies_zero_growth() {
        let spec = block_spec(Arc::new(ZeroRhs { dim: 3 }));
        let r = check_h1(&spec, &zero_growth(), 500, 1).unwrap();
        assert!(r.ok);
    }

    #[test]
    fn quadratic_rhs_beats_linear_growth() {
        let f = |_t: f64, u: &DVector<f64>, _v: &DVector<f64>| {
            let mut out = DVector::zeros(3);
            out[0] = u.norm_squared();
            out
        };
        let spec = block_spec(Arc::new(f));
        let mut g = zero_growth();
        g.a1 = GrowthFn::constant(1.0);
        g.c = GrowthFn::constant(1.0);
        let r = check_h1(&spec, &g, 2000, 2).unwrap();
        assert!(!r.ok);
        let w = r.worst.unwrap();
        assert!(w.u.norm() > 1.0);
    }

    #[test]
    fn condition_trivial_and_boundary() {
        let spec = block_spec(Arc::new(ZeroRhs { dim: 3 }));
        let rd = build_resonance(&spec, 0.0).unwrap();
        let c = check_condition_31(spec.ord, &rd, &zero_growth()).unwrap();
        assert!(c.pass);
        assert_eq!(c.quotient, 0.0);
        assert_relative_eq!(c.margin_a, gamma(1.5).unwrap());

        let mut g = zero_growth();
        g.a1 = GrowthFn::constant(gamma(1.5).unwrap());
        assert!(!check_condition_31(spec.ord, &rd, &g).unwrap().pass);
    }

    #[test]
    fn quadrature_fallback_reports_error() {
        let g = GrowthFn::new(|t| t * t, None);
        let n = g.l1_norm();
        assert_relative_eq!(n.value, 1.0 / 3.0, epsilon = 1e-14);
        assert!(n.quadrature_error.unwrap() < 1e-14);
    }

    #[test]
    fn zero_rhs_has_no_evidence() {
        let spec = block_spec(Arc::new(ZeroRhs { dim: 3 }));
        let rd = build_resonance(&spec, 0.0).unwrap();
        let h2 = probe_h2(&spec, &rd, 1.0, 10, 0).unwrap();
        assert_eq!(h2.max_defect, 0.0);
        assert!(!h2.evidence);
        let h3 = probe_h3(&spec, &rd, 1.0, 2.0, 10, 0).unwrap();
        assert_eq!(h3.sign, Sign::None);
    }

    #[test]
    fn constant_forcing_defect_is_constant() {
        let g = AffineRhs::forcing(DVector::from_vec(vec![0.0, 0.0, 1.0]), Profile::One);
        let spec = block_spec(Arc::new(g));
        let rd = build_resonance(&spec, 0.0).unwrap();
        let ones = GridFn::from_matrix(DMatrix::from_fn(65, 3, |_, i| if i == 2 { 1.0 } else { 0.0 })).unwrap();
        let want = rd.solvability_defect(&SplitFn::from_grid(ones)).unwrap();
        let h2 = probe_h2(&spec, &rd, 1.0, 10, 4).unwrap();
        assert_relative_eq!(h2.min_defect, want, epsilon = 1e-14);
        assert_relative_eq!(h2.max_defect, want, epsilon = 1e-14);
        assert!(h2.evidence);
    }

    #[test]
    fn probes_are_deterministic() {
        let g = AffineRhs::new(
            DMatrix::identity(3, 3) * 0.1,
            DMatrix::identity(3, 3) * 0.1,
            DVector::zeros(3),
            Profile::Zero,
        )
        .unwrap();
        let spec = block_spec(Arc::new(g));
        let rd = build_resonance(&spec, 0.0).unwrap();
        let a = probe_h3(&spec, &rd, 1.0, 3.0, 20, 9).unwrap();
        let b = probe_h3(&spec, &rd, 1.0, 3.0, 20, 9).unwrap();
        assert_eq!(a, b);
    }
}
