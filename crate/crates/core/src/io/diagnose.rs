use serde::{Deserialize, Serialize};

use crate::discrepancy::Discrepancy;
use crate::error::{Error, Result};
use crate::selectors::SelectionResult;
use crate::solvers::solve_simplex_qp;

/// Frank-Wolfe budget used for the optimal-weights term.
pub const WEIGHT_MAX_ITER: usize = 1_000_000;
pub const WEIGHT_GAP_TOL: f64 = 1e-8;

/// Checks a selection against the guarantee
/// `MMD^2 <= phi^2 + C^2 (1 + log m) / m`, where `phi^2` is the best squared
/// discrepancy of any convex reweighting of the candidates and
/// `C = C_target + C_candidates`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub iterations: usize,
    pub points: usize,
    pub phi_squared: f64,
    pub fw_gap: f64,
    pub fw_iterations: usize,
    /// Double integral of the kernel against the target.
    pub c_target_squared: f64,
    /// Largest kernel diagonal over the candidates.
    pub c_candidates_squared: f64,
    /// `phi^2 + C^2 (1 + log m) / m`.
    pub bound: f64,
    pub measured: f64,
    /// `measured <= bound + fw_gap`.
    pub bound_satisfied: bool,
}

pub fn diagnose(ctx: &Discrepancy<'_>, result: &SelectionResult) -> Result<DiagnosticReport> {
    let n = ctx.len();
    let indices = result.indices();
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    let m = result.iterations();
    if m == 0 || indices.is_empty() {
        return Err(Error::DegenerateData("result has no selected points".into()));
    }
    let measured = ctx.mmd_squared_uniform(&indices)?;
    let weights = solve_simplex_qp(
        &ctx.gram(),
        ctx.kernel_means(),
        ctx.double_integral(),
        WEIGHT_MAX_ITER,
        WEIGHT_GAP_TOL,
    )?;
    let c_target_squared = ctx.double_integral();
    let c_candidates_squared = ctx.diagonal().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c = c_target_squared.sqrt() + c_candidates_squared.sqrt();
    let mf = m as f64;
    let bound = weights.phi_squared + c * c * (1.0 + mf.ln()) / mf;
    Ok(DiagnosticReport {
        iterations: m,
        points: indices.len(),
        phi_squared: weights.phi_squared,
        fw_gap: weights.duality_gap,
        fw_iterations: weights.fw_iterations,
        c_target_squared,
        c_candidates_squared,
        bound,
        measured,
        bound_satisfied: measured <= bound + weights.duality_gap,
    })
}

impl std::fmt::Display for DiagnosticReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "iterations          {}", self.iterations)?;
        writeln!(f, "points              {}", self.points)?;
        writeln!(f, "measured MMD^2      {:.6e}", self.measured)?;
        writeln!(f, "optimal weights     {:.6e} (gap {:.1e}, {} iterations)", self.phi_squared, self.fw_gap, self.fw_iterations)?;
        writeln!(f, "C^2 target          {:.6e}", self.c_target_squared)?;
        writeln!(f, "C^2 candidates      {:.6e}", self.c_candidates_squared)?;
        writeln!(f, "bound               {:.6e}", self.bound)?;
        write!(f, "bound satisfied     {}", if self.bound_satisfied { "yes" } else { "NO" })
    }
}
