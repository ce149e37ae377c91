//! Text report and CSV writers.

use std::fmt::Write;

use fbvp::check::Check;
use fbvp::hypotheses::{Cond31Report, H1Report, H2Report, H3Report};
use fbvp::resonance::{ResonanceData, StructureReport};
use fbvp::solver::SolveReport;
use fbvp::{Order, Result};
use nalgebra::{DMatrix, DVector};

/// Matrices with more rows than this are summarized instead of printed.
const MAX_PRINTED_ROWS: usize = 12;

/// Accumulates `report.txt`.
#[derive(Debug, Default)]
pub struct Report {
    text: String,
}

impl Report {
    pub fn new(title: &str) -> Self {
        let mut r = Self::default();
        r.line(title);
        r
    }

    pub fn line(&mut self, s: &str) {
        self.text.push_str(s);
        self.text.push('\n');
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key}: {value}");
    }

    pub fn section(&mut self, name: &str) {
        let _ = write!(self.text, "\n[{name}]\n");
    }

    pub fn check(&mut self, c: &Check) {
        let _ = writeln!(self.text, "{c}");
    }

    pub fn checks<'a>(&mut self, cs: impl IntoIterator<Item = &'a Check>) {
        for c in cs {
            self.check(c);
        }
    }

    pub fn matrix(&mut self, name: &str, m: &DMatrix<f64>) {
        if m.nrows() > MAX_PRINTED_ROWS {
            let _ = writeln!(
                self.text,
                "{name}: {}x{} (not printed), max |entry| {:.6e}",
                m.nrows(),
                m.ncols(),
                m.amax()
            );
            return;
        }
        let _ = writeln!(self.text, "{name}:");
        for row in m.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>14.6e}")).collect();
            let _ = writeln!(self.text, "  {}", cells.join(" "));
        }
    }

    pub fn vector(&mut self, name: &str, v: &DVector<f64>) {
        let _ = writeln!(self.text, "{name}: {}", fmt_vec(v.as_slice()));
    }

    pub fn resonance(&mut self, rd: &ResonanceData) {
        self.section("resonance");
        self.matrix("M = I - xi^(alpha-1) A", rd.m.matrix());
        self.matrix("M+", rd.m_plus.matrix());
        self.kv("rank M", rd.rank);
        self.kv("dim ker M", rd.dim_ker);
        self.kv("singular values", fmt_vec(&rd.singular_values));
        self.kv("rank tolerance", format!("{:.3e}", rd.tol_used));
        if rd.rank_warning {
            self.line("warning: a singular value lies within 10x of the rank tolerance");
        }
        self.kv("ep_defect", format!("{:.3e}", rd.ep_defect));
        self.kv("Q prefactor", format!("{:.12e}", rd.q_prefactor));
        self.matrix("ker M basis", &rd.ker_m);
    }

    pub fn structure(&mut self, s: &StructureReport) {
        self.section("structure");
        self.checks(&s.checks);
    }

    /// The three numbers of the solvability condition.
    pub fn condition(&mut self, c: &Cond31Report) {
        self.section("smallness condition");
        self.kv("Gamma(alpha)", format!("{:.6}", c.gamma_alpha));
        self.kv("max side", format!("{:.6}", c.rhs()));
        self.kv("product quotient", format!("{:.6}", c.quotient));
        self.kv("|I - M+M|", format!("{:.6}", c.kernel_proj_norm));
        self.kv(
            "|a1|_1, |b1|_1",
            format!("{:.6}, {:.6}", c.a1_norm.value, c.b1_norm.value),
        );
        self.kv("margins", format!("{:.6}, {:.6}", c.margin_a, c.margin_b));
        self.kv("result", if c.pass { "pass" } else { "fail" });
    }

    pub fn h1(&mut self, h: &H1Report) {
        self.section("growth bound (H1)");
        self.kv("samples", h.samples);
        self.kv("violations", h.violations);
        if let Some(w) = &h.worst {
            self.kv(
                "smallest slack",
                format!("{:.6e} at t = {:.6}, |u| = {:.6e}, |v| = {:.6e}", w.slack(), w.t, w.u.norm(), w.v.norm()),
            );
        }
        self.kv("result", if h.ok { "pass" } else { "fail" });
    }

    pub fn h2(&mut self, h: &H2Report) {
        self.section("solvability probe (H2)");
        self.kv("A1", h.a1);
        self.kv("samples", format!("{} ({} undefined)", h.samples, h.undefined));
        self.kv("defect range", format!("[{:.6e}, {:.6e}]", h.min_defect, h.max_defect));
        self.kv("evidence", h.evidence);
    }

    pub fn h3(&mut self, h: &H3Report) {
        self.section("sign probe (H3)");
        self.kv("A2", h.a2);
        self.kv("norm range", format!("({}, {}]", h.a2, h.norm_max));
        self.kv("samples", format!("{} ({} undefined)", h.samples, h.undefined));
        self.kv("product range", format!("[{:.6e}, {:.6e}]", h.min_product, h.max_product));
        self.kv("sign", format!("{:?}", h.sign));
    }

    pub fn solve(&mut self, s: &SolveReport) {
        self.section("solver");
        self.kv("termination", format!("{:?}", s.termination));
        self.kv("converged", s.converged);
        self.kv("iterations", s.iterations);
        if let Some(last) = s.history.last() {
            self.kv("last iterate difference", format!("{last:.3e}"));
        }
        if let Some(m) = &s.message {
            self.kv("message", m);
        }
        self.vector("c", &s.solution.c);
        match &s.residuals {
            Some(r) => {
                self.kv("pde_residual", format!("{:.3e}", r.pde_residual));
                self.kv("left_bc_defect", format!("{:.3e}", r.left_bc_defect));
                self.kv("right_bc_defect", format!("{:.3e}", r.right_bc_defect));
                self.kv("right_bc_direct", format!("{:.3e}", r.right_bc_direct));
                self.kv("solvability_defect", format!("{:.3e}", r.solvability_defect));
            }
            None => self.line("residuals: not available"),
        }
    }

    pub fn into_string(self) -> String {
        self.text
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", cells.join(", "))
}

/// `t, x_1..x_n, dtrace_1..dtrace_n` at every node, 17 significant digits.
pub fn solution_csv(ord: Order, s: &SolveReport) -> Result<String> {
    let x = s.solution.eval_nodes(ord)?;
    let tr = s.solution.trace_nodes(ord)?;
    let n = x.dim();
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",x_{i}");
    }
    for i in 1..=n {
        let _ = write!(out, ",dtrace_{i}");
    }
    out.push('\n');
    for j in 0..=x.n_sub() {
        let _ = write!(out, "{:.16e}", x.node(j));
        for v in x.at(j).iter().chain(tr.at(j).iter()) {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// One row per sweep run: `run, seed, termination, iterations, c_1..c_n`.
pub fn sweep_csv(rows: &[(u64, SolveReport)]) -> String {
    let n = rows.first().map_or(0, |(_, r)| r.solution.c.len());
    let mut out = String::from("run,seed,termination,iterations");
    for i in 1..=n {
        let _ = write!(out, ",c_{i}");
    }
    out.push('\n');
    for (k, (seed, r)) in rows.iter().enumerate() {
        let _ = write!(out, "{k},{seed},{:?},{}", r.termination, r.iterations);
        for v in r.solution.c.iter() {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}
