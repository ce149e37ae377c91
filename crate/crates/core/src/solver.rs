//! The nonlinear operator `N`, the fixed-point map
//! `Φ x = P x + J Q N x + K_P (I − Q) N x`, and its damped iteration.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fracops::{GridFn, PowerFn, SplitFn};
use crate::resonance::{interior_sup_diff, DomainElement, ProblemSpec, ResonanceData};

/// Iterates with a norm above this are declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// Nodes skipped at each end when measuring the equation residual.
pub const PDE_SKIP: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    Zero,
    Element(DomainElement),
    /// `c` drawn from a Gaussian on `ker M` with the given scale, `y = 0`.
    RandomKernel { scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub damping: f64,
    pub max_iter: usize,
    pub tol_fixed_point: f64,
    pub tol_residual: f64,
    pub tol_pde: f64,
    pub initial: InitialGuess,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iter: 500,
            tol_fixed_point: 1e-10,
            tol_residual: 1e-6,
            tol_pde: 1e-2,
            initial: InitialGuess::Zero,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Input(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        for (name, v) in [
            ("tol_fixed_point", self.tol_fixed_point),
            ("tol_residual", self.tol_residual),
            ("tol_pde", self.tol_pde),
        ] {
            if !(v > 0.0) {
                return Err(Error::Input(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    Diverged,
    EvaluationFailed,
    /// The iteration settled but a residual exceeds its tolerance.
    ResidualsAboveTolerance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// Interior sup-norm of `D^α x − N x`.
    pub pde_residual: f64,
    /// `‖I^(2−α) x(0)‖`; zero by representation.
    pub left_bc_defect: f64,
    /// `‖M c − h(y)‖`.
    pub right_bc_defect: f64,
    /// `‖x(1) − A x(ξ)‖` from node values.
    pub right_bc_direct: f64,
    /// `‖(I − MM⁺) h(N x)‖`.
    pub solvability_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub solution: DomainElement,
    /// Iterate-difference norms, one per iteration.
    pub history: Vec<f64>,
    pub residuals: Option<Residuals>,
    pub message: Option<String>,
}

/// `N x` at every node: `f(t_j, x(t_j), D^(α−1) x(t_j))`.
pub fn apply_n(spec: &ProblemSpec, x: &DomainElement) -> Result<GridFn> {
    let u = x.eval_nodes(spec.ord)?;
    let v = x.trace_nodes(spec.ord)?;
    let n_sub = x.n_sub();
    let dim = x.dim();
    let mut out = DMatrix::zeros(n_sub + 1, dim);
    for j in 0..=n_sub {
        let t = u.node(j);
        let fj = spec.rhs.eval(t, &u.at(j), &v.at(j));
        if fj.len() != dim || fj.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFiniteRhs { node: j, t });
        }
        out.row_mut(j).copy_from(&fj.transpose());
    }
    GridFn::from_matrix(out)
}

/// One application of `Φ`:
/// `w = N x`, `q = κ (I − MM⁺) h(w)`, `y' = w − q t^(α−1)`,
/// `c' = (I − M⁺M) c + J q + M⁺ h(y')`.
pub fn fixed_point_map(
    spec: &ProblemSpec,
    rdata: &ResonanceData,
    x: &DomainElement,
) -> Result<DomainElement> {
    let w = SplitFn::from_grid(apply_n(spec, x)?);
    let q = rdata.q_project(&w)?;
    let jq = rdata.apply_j(&q.coeffs);
    let y_new = w.with_power(PowerFn {
        coeffs: -q.coeffs,
        exponent: q.exponent,
    });
    let c_new = rdata.kernel_proj() * &x.c + jq + rdata.m_plus.matrix() * rdata.h(&y_new)?;
    Ok(DomainElement { c: c_new, y: y_new })
}

/// All residuals of a candidate solution.
pub fn residuals(
    spec: &ProblemSpec,
    rdata: &ResonanceData,
    x: &DomainElement,
) -> Result<Residuals> {
    let nx = apply_n(spec, x)?;
    let d = x.frac_derivative(spec.ord)?;
    let pde_residual = interior_sup_diff(&d.values, &nx, PDE_SKIP);
    let left_bc_defect = x.left_bc_value(spec.ord)?.norm();
    let right_bc_defect = rdata.boundary_defect(x)?;
    let nodes = x.eval_nodes(spec.ord)?;
    let j_xi = spec.xi_node().ok_or_else(|| {
        Error::Input(format!("xi = {} is not a grid node", spec.xi))
    })?;
    let right_bc_direct = (nodes.at(x.n_sub()) - spec.a.matrix() * nodes.at(j_xi)).norm();
    let solvability_defect = rdata.solvability_defect(&SplitFn::from_grid(nx))?;
    Ok(Residuals {
        pde_residual,
        left_bc_defect,
        right_bc_defect,
        right_bc_direct,
        solvability_defect,
    })
}

fn initial_element(
    spec: &ProblemSpec,
    rdata: &ResonanceData,
    opts: &SolveOptions,
) -> Result<DomainElement> {
    let n = spec.dim();
    let n_sub = spec.grid_n;
    match &opts.initial {
        InitialGuess::Zero => Ok(DomainElement::zeros(n_sub, n)),
        InitialGuess::Element(x) => {
            if x.dim() != n || x.n_sub() != n_sub {
                return Err(Error::Input(format!(
                    "initial guess has shape ({}, N = {}), problem needs ({n}, N = {n_sub})",
                    x.dim(),
                    x.n_sub()
                )));
            }
            Ok(x.clone())
        }
        InitialGuess::RandomKernel { scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let coords = DVector::from_fn(rdata.dim_ker, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            });
            Ok(DomainElement::kernel(&rdata.ker_m * coords, n_sub))
        }
    }
}

/// Damped iteration `x ← (1 − λ) x + λ Φ x`.
///
/// Always returns a report; `converged` is set only when the iterate
/// difference falls below `tol_fixed_point` and the residuals meet their
/// tolerances.
pub fn solve(spec: &ProblemSpec, rdata: &ResonanceData, opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    let lambda = opts.damping;
    let mut x = initial_element(spec, rdata, opts)?;
    let mut history = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut message = None;

    for _ in 0..opts.max_iter {
        let phi = match fixed_point_map(spec, rdata, &x) {
            Ok(p) => p,
            Err(e) => {
                termination = Termination::EvaluationFailed;
                message = Some(e.to_string());
                break;
            }
        };
        let next = x.lincomb(1.0 - lambda, &phi, lambda)?;
        let diff = next.lincomb(1.0, &x, -1.0)?.size();
        history.push(diff);
        x = next;
        if !diff.is_finite() || x.size() > DIVERGENCE_LIMIT {
            termination = Termination::Diverged;
            message = Some(format!("iterate norm exceeded {DIVERGENCE_LIMIT:e}"));
            break;
        }
        if diff <= opts.tol_fixed_point {
            termination = Termination::Converged;
            break;
        }
    }

    let residuals = if termination == Termination::Diverged {
        None
    } else {
        match residuals(spec, rdata, &x) {
            Ok(r) => Some(r),
            Err(e) => {
                termination = Termination::EvaluationFailed;
                message.get_or_insert(e.to_string());
                None
            }
        }
    };
    if termination == Termination::Converged {
        let r = residuals.as_ref().expect("residuals computed");
        let ok = r.right_bc_defect <= opts.tol_residual
            && r.solvability_defect <= opts.tol_residual
            && r.pde_residual <= opts.tol_pde;
        if !ok {
            termination = Termination::ResidualsAboveTolerance;
        }
    }

    Ok(SolveReport {
        converged: termination == Termination::Converged,
        termination,
        iterations: history.len(),
        solution: x,
        history,
        residuals,
        message,
    })
}

/// Certified bound `(z₁, z₂)` for
/// `z₁ ≤ λ₁ z₁^γ₁ + λ₂ z₂ + λ₃`, `z₂ ≤ μ₁ z₁ + μ₂ z₂^γ₂ + μ₃`.
///
/// Each sublinear term is first dominated by `δ z + C(δ)` (Young), which
/// turns the system into a linear one whose solution `S` satisfies
/// `T(S) ≤ S` for the monotone map `T` given by the right-hand sides. The
/// iterates `Tᵏ(S)` then decrease to the largest fixed point of `T`,
/// which bounds every solution of the inequalities.
pub fn apriori_bound(lambda: [f64; 3], mu: [f64; 3], gamma1: f64, gamma2: f64) -> Result<(f64, f64)> {
    for (i, v) in lambda.iter().chain(mu.iter()).enumerate() {
        if !(*v >= 0.0) || !v.is_finite() {
            return Err(Error::Input(format!(
                "coefficient #{} must be finite and nonnegative, got {v}",
                i + 1
            )));
        }
    }
    for g in [gamma1, gamma2] {
        if !(0.0..1.0).contains(&g) {
            return Err(Error::Input(format!("exponents must lie in [0, 1), got {g}")));
        }
    }
    let [l1, l2, l3] = lambda;
    let [m1, m2, m3] = mu;
    let prod = l2 * m1;
    if prod >= 1.0 {
        return Err(Error::NoBound(prod));
    }

    // Linear slopes kept below 1 with room so that the linear system stays
    // uniquely solvable: (1 − δ₁)(1 − δ₂) = (1 + λ₂μ₁)/2 > λ₂μ₁.
    let slack = ((1.0 + prod) / 2.0).sqrt();
    let delta = 1.0 - slack;
    let (s1, k1) = young(l1, gamma1, delta);
    let (s2, k2) = young(m2, gamma2, delta);
    // z₁ (1 − s1) = λ₂ z₂ + λ₃ + k1, z₂ (1 − s2) = μ₁ z₁ + μ₃ + k2.
    let (a1, a2) = (1.0 - s1, 1.0 - s2);
    let b1 = l3 + k1;
    let b2 = m3 + k2;
    let det = a1 * a2 - l2 * m1;
    let mut z1 = (a2 * b1 + l2 * b2) / det;
    let mut z2 = (a1 * b2 + m1 * b1) / det;

    let t = |z1: f64, z2: f64| {
        (
            l1 * pow0(z1, gamma1) + l2 * z2 + l3,
            m1 * z1 + m2 * pow0(z2, gamma2) + m3,
        )
    };
    for _ in 0..100_000 {
        let (n1, n2) = t(z1, z2);
        // Rounding can nudge T(S) above S by an ulp; never step upward.
        let (n1, n2) = (n1.min(z1), n2.min(z2));
        let change = (z1 - n1).abs().max((z2 - n2).abs());
        z1 = n1;
        z2 = n2;
        if change <= 1e-10 * (1.0 + z1.max(z2)) * 1e-3 {
            break;
        }
    }
    Ok((z1, z2))
}

/// `z^γ` with `0^0 = 1`.
fn pow0(z: f64, g: f64) -> f64 {
    if g == 0.0 {
        1.0
    } else {
        z.powf(g)
    }
}

/// Splits `c z^γ ≤ s z + k` for all `z ≥ 0`, returning `(s, k)`.
fn young(c: f64, g: f64, delta: f64) -> (f64, f64) {
    if c == 0.0 {
        return (0.0, 0.0);
    }
    if g == 0.0 {
        return (0.0, c);
    }
    // max_z (c z^γ − δ z) = (1 − γ) γ^(γ/(1−γ)) c^(1/(1−γ)) δ^(−γ/(1−γ))
    let e = g / (1.0 - g);
    let k = (1.0 - g) * g.powf(e) * c.powf(1.0 / (1.0 - g)) * delta.powf(-e);
    (delta, k)
}
