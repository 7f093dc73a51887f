//! End-to-end decision procedure: relax, interiorize, factor, certify, and
//! optionally run the Fourier check and the numerical oracle.
//!
//! Every stage records what it did in [`PipelineReport`]; a failing stage is
//! logged in `errors` and the run continues with what is left.

use serde::Serialize;

use crate::basis::{orthonormalize, DEFAULT_DEP_TOL};
use crate::certifier::{self, CertificateReport, Decision, DEFAULT_ETA};
use crate::fourier::{self, IntegralEstimate, Verdict, VerifyOptions};
use crate::oracle::{self, OracleOptions, OracleResult};
use crate::relaxation::{
    self, interiorize_traced, RelaxOptions, SmallMDecision, TransformedSystem,
};
use crate::symmat::{eigendecompose, SymMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub eta: f64,
    pub relax: RelaxOptions,
    pub entropy_steps: usize,
    /// Run the Monte Carlo Fourier check when the norm certificate fails.
    pub integral: Option<VerifyOptions>,
    /// Run the oracle when nothing else decided.
    pub oracle: Option<OracleOptions>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            eta: DEFAULT_ETA,
            relax: RelaxOptions::default(),
            entropy_steps: 200,
            integral: None,
            oracle: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Solvable,
    Unsolvable,
    Inconclusive,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Solvable => 0,
            Outcome::Inconclusive => 2,
            Outcome::Unsolvable => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxStage {
    pub feasible: bool,
    pub rank: usize,
    pub residual: f64,
    pub gap: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct InteriorStage {
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub rank_before: usize,
    pub rank_after: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformStage {
    pub reduced_dim: usize,
    pub equivalent: bool,
    /// Facial-reduction rounds (homogeneous systems only).
    pub levels: usize,
}

/// Exhaustive cross-check of the oracle for `n ≤ GRID_MAX_DIM`.
#[derive(Debug, Clone, Serialize)]
pub struct GridStage {
    pub bound: f64,
    pub step: f64,
    pub best_x: Vec<f64>,
    pub residual: f64,
}

pub const GRID_MAX_DIM: usize = 2;

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub n: usize,
    pub m: usize,
    pub m_effective: usize,
    pub homogeneous: bool,
    pub outcome: Outcome,
    /// Stage that produced the outcome.
    pub decided_by: Option<String>,
    /// A solution in the original variables, when one was constructed.
    pub witness: Option<Vec<f64>>,
    /// `Σ (⟨Q_i x, x⟩ − α_i)²` at the witness.
    pub witness_residual: Option<f64>,
    pub small_m: Option<SmallMDecision>,
    pub relaxation: Option<RelaxStage>,
    pub interior: Option<InteriorStage>,
    pub transform: Option<TransformStage>,
    pub certificate: Option<CertificateReport>,
    pub integral: Option<IntegralEstimate>,
    pub oracle: Option<OracleResult>,
    pub grid: Option<GridStage>,
    pub notes: Vec<String>,
    pub errors: Vec<String>,
}

impl PipelineReport {
    fn new(n: usize, m: usize, homogeneous: bool) -> Self {
        Self {
            n,
            m,
            m_effective: 0,
            homogeneous,
            outcome: Outcome::Inconclusive,
            decided_by: None,
            witness: None,
            witness_residual: None,
            small_m: None,
            relaxation: None,
            interior: None,
            transform: None,
            certificate: None,
            integral: None,
            oracle: None,
            grid: None,
            notes: Vec::new(),
            errors: Vec::new(),
        }
    }

    fn decide(&mut self, outcome: Outcome, stage: &str) {
        self.outcome = outcome;
        self.decided_by = Some(stage.into());
    }

    fn error(&mut self, stage: &str, e: &Error) {
        log::warn!("{stage}: {e}");
        self.errors.push(format!("{stage}: {e}"));
    }

    pub fn exit_code(&self) -> i32 {
        self.outcome.exit_code()
    }
}

fn check_input(qs: &[SymMatrix], alpha: &[f64]) -> Result<usize> {
    let n = qs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no forms given".into()))?
        .dim();
    if alpha.len() != qs.len() {
        return Err(Error::DimensionMismatch {
            expected: qs.len(),
            found: alpha.len(),
        });
    }
    if let Some(q) = qs.iter().find(|q| q.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: q.dim(),
        });
    }
    Ok(n)
}

fn span_dimension(qs: &[SymMatrix]) -> Result<usize> {
    match orthonormalize(qs, DEFAULT_DEP_TOL) {
        Ok(b) => Ok(b.len()),
        Err(Error::EmptySpan) => Ok(0),
        Err(e) => Err(e),
    }
}

/// Rank-one `X = λ v vᵀ` gives the solution `√λ v`.
fn rank_one_witness(x: &SymMatrix) -> Result<Vec<f64>> {
    let spec = eigendecompose(x)?;
    let s = spec.values[0].max(0.0).sqrt();
    Ok(spec.vectors.column(0).iter().map(|v| v * s).collect())
}

/// Decides `⟨Q_i x, x⟩ = α_i` (full convention).
pub fn run(qs: &[SymMatrix], alpha: &[f64], opts: &PipelineOptions) -> Result<PipelineReport> {
    let n = check_input(qs, alpha)?;
    let mut rep = PipelineReport::new(n, qs.len(), false);
    rep.m_effective = span_dimension(qs)?;

    if rep.m_effective <= 2 {
        // the relaxation is exact here, so its verdict decides the system
        match relaxation::solve_feasibility(qs, alpha, &opts.relax) {
            Ok(r) => {
                let d = if r.is_feasible() {
                    SmallMDecision::Solvable
                } else {
                    SmallMDecision::Unsolvable
                };
                rep.relaxation = Some(RelaxStage {
                    feasible: r.is_feasible(),
                    rank: r.rank,
                    residual: r.residual,
                    gap: r.gap,
                    sweeps: r.sweeps,
                });
                rep.small_m = Some(d);
                rep.notes
                    .push("span dimension <= 2: the relaxation decides the system exactly".into());
                match d {
                    SmallMDecision::Solvable => rep.decide(Outcome::Solvable, "small_m"),
                    SmallMDecision::Unsolvable => {
                        rep.notes
                            .push("no PSD matrix satisfies the relaxed constraints".into());
                        rep.decide(Outcome::Unsolvable, "small_m")
                    }
                }
            }
            Err(e) => rep.error("small_m", &e),
        }
        if let Some(o) = &opts.oracle {
            run_oracle(&mut rep, qs, alpha, o, false);
        }
        return Ok(rep);
    }

    let relaxed = match relaxation::solve_feasibility(qs, alpha, &opts.relax) {
        Ok(r) => r,
        Err(e) => {
            rep.error("relaxation", &e);
            finish_with_oracle(&mut rep, qs, alpha, opts, false);
            return Ok(rep);
        }
    };
    rep.relaxation = Some(RelaxStage {
        feasible: relaxed.is_feasible(),
        rank: relaxed.rank,
        residual: relaxed.residual,
        gap: relaxed.gap,
        sweeps: relaxed.sweeps,
    });
    if !relaxed.is_feasible() {
        rep.notes
            .push("no PSD matrix satisfies the relaxed constraints".into());
        rep.decide(Outcome::Unsolvable, "relaxation");
        return Ok(rep);
    }

    let inner = match interiorize_traced(&relaxed, qs, alpha, opts.entropy_steps) {
        Ok((inner, trace)) => {
            rep.interior = Some(InteriorStage {
                entropy_before: relaxed.entropy,
                entropy_after: inner.entropy,
                rank_before: relaxed.rank,
                rank_after: inner.rank,
                steps: trace.entropies.len().saturating_sub(1),
            });
            inner
        }
        Err(e) => {
            rep.error("interior", &e);
            relaxed
        }
    };

    if inner.rank == 1 {
        let x = inner.x.as_ref().expect("feasible result carries X");
        let w = rank_one_witness(x)?;
        rep.witness_residual = Some(oracle::residual(qs, alpha, &w));
        rep.witness = Some(w);
        rep.decide(Outcome::Solvable, "relaxation");
        return Ok(rep);
    }

    let sys = match relaxation::factor_and_transform(&inner, qs) {
        Ok(s) => s,
        Err(e) => {
            rep.error("transform", &e);
            finish_with_oracle(&mut rep, qs, alpha, opts, false);
            return Ok(rep);
        }
    };
    rep.transform = Some(TransformStage {
        reduced_dim: sys.reduced_dim,
        equivalent: sys.equivalent,
        levels: 1,
    });
    if !sys.equivalent {
        rep.notes.push(format!(
            "relaxation solution has rank {} < n; a solution of the reduced system still lifts to one of the original",
            sys.reduced_dim
        ));
    }

    match certifier::certify_inhomogeneous(&sys.qhat, opts.eta) {
        Ok(c) => {
            let certified = c.decision == Decision::CertifiedSolvable;
            rep.certificate = Some(c);
            if certified {
                rep.decide(Outcome::Solvable, "certificate");
                return Ok(rep);
            }
        }
        Err(e) => rep.error("certificate", &e),
    }

    if let Some(v) = &opts.integral {
        if run_integral(&mut rep, &sys, v, false) {
            return Ok(rep);
        }
    }
    if let Some(o) = &opts.oracle {
        run_oracle(&mut rep, qs, alpha, o, false);
    }
    Ok(rep)
}

/// Decides whether `⟨Q_i x, x⟩ = 0` has a solution `x ≠ 0`.
pub fn run_homogeneous(qs: &[SymMatrix], opts: &PipelineOptions) -> Result<PipelineReport> {
    let zeros = vec![0.0; qs.len()];
    let n = check_input(qs, &zeros)?;
    let mut rep = PipelineReport::new(n, qs.len(), true);
    rep.m_effective = span_dimension(qs)?;

    let red = match relaxation::reduce_homogeneous(qs, &opts.relax, opts.entropy_steps) {
        Ok(r) => r,
        Err(e) => {
            rep.error("relaxation", &e);
            finish_with_oracle(&mut rep, qs, &zeros, opts, true);
            return Ok(rep);
        }
    };
    if red.infeasible && red.levels.is_empty() {
        rep.relaxation = Some(RelaxStage {
            feasible: false,
            rank: 0,
            residual: f64::NAN,
            gap: f64::NAN,
            sweeps: 0,
        });
        rep.notes
            .push("no PSD matrix of unit trace satisfies the relaxed constraints".into());
        rep.decide(Outcome::Unsolvable, "relaxation");
        return Ok(rep);
    }
    let sys = red
        .final_system()
        .expect("a feasible reduction has at least one level")
        .clone();
    rep.relaxation = Some(RelaxStage {
        feasible: true,
        rank: red.levels[0].reduced_dim,
        residual: f64::NAN,
        gap: f64::NAN,
        sweeps: 0,
    });
    rep.transform = Some(TransformStage {
        reduced_dim: sys.reduced_dim,
        equivalent: sys.equivalent,
        levels: red.levels.len(),
    });
    if red.infeasible {
        // a deeper level lost feasibility within tolerance; the outer ones
        // were feasible, so this is a numerical disagreement
        rep.notes
            .push("facial reduction became infeasible below the first level".into());
        finish_with_oracle(&mut rep, qs, &zeros, opts, true);
        return Ok(rep);
    }
    if sys.reduced_dim == 1 {
        let w = red.lift(&[1.0]);
        rep.witness_residual = Some(oracle::residual(qs, &zeros, &w));
        rep.witness = Some(w);
        rep.decide(Outcome::Solvable, "relaxation");
        return Ok(rep);
    }

    // tr Q̂_i = tr(Q_i X) vanishes only up to the relaxation tolerance
    let r = sys.reduced_dim;
    let mut worst: f64 = 0.0;
    let qhat: Vec<SymMatrix> = sys
        .qhat
        .iter()
        .map(|q| {
            let t = q.trace() / r as f64;
            worst = worst.max(t.abs() * r as f64 / q.hs_norm().max(f64::MIN_POSITIVE));
            q.axpy(-t, &SymMatrix::identity(r))
        })
        .collect();
    if worst > 0.0 {
        rep.notes.push(format!(
            "removed residual traces of relative size {worst:.2e} from the reduced forms"
        ));
    }
    let projected = TransformedSystem {
        alpha: vec![0.0; qhat.len()],
        qhat,
        ..sys
    };

    match certifier::certify_homogeneous(&projected.qhat, opts.eta) {
        Ok(c) => {
            let certified = c.decision == Decision::CertifiedSolvable;
            rep.certificate = Some(c);
            if certified {
                rep.decide(Outcome::Solvable, "certificate");
                return Ok(rep);
            }
        }
        Err(e) => rep.error("certificate", &e),
    }
    if let Some(v) = &opts.integral {
        if run_integral(&mut rep, &projected, v, true) {
            return Ok(rep);
        }
    }
    if let Some(o) = &opts.oracle {
        run_oracle(&mut rep, qs, &zeros, o, true);
    }
    Ok(rep)
}

fn finish_with_oracle(
    rep: &mut PipelineReport,
    qs: &[SymMatrix],
    alpha: &[f64],
    opts: &PipelineOptions,
    homogeneous: bool,
) {
    if let Some(o) = &opts.oracle {
        run_oracle(rep, qs, alpha, o, homogeneous);
    }
}

/// Returns true when the check decided the system.
fn run_integral(
    rep: &mut PipelineReport,
    sys: &TransformedSystem,
    v: &VerifyOptions,
    homogeneous: bool,
) -> bool {
    let basis = match orthonormalize(&sys.qhat, DEFAULT_DEP_TOL) {
        Ok(b) => b,
        Err(e) => {
            rep.error("integral", &e);
            return false;
        }
    };
    let est = if homogeneous {
        fourier::verify_traceless(&basis, v)
    } else {
        // the reduced system is ⟨Q̂_i x, x⟩ = tr Q̂_i, so in the orthonormal
        // basis it is trace-matched
        let alpha = fourier::trace_matched_alpha(&basis);
        fourier::verify_trace_matched(&basis, &alpha, v)
    };
    match est {
        Ok(est) => {
            let positive = est.verdict == Verdict::PositiveReal;
            rep.integral = Some(est);
            if positive {
                rep.decide(Outcome::Solvable, "integral");
            }
            positive
        }
        Err(e) => {
            rep.error("integral", &e);
            false
        }
    }
}

fn run_oracle(
    rep: &mut PipelineReport,
    qs: &[SymMatrix],
    alpha: &[f64],
    o: &OracleOptions,
    homogeneous: bool,
) {
    let res = if homogeneous {
        oracle::solve_homogeneous(qs, o)
    } else {
        oracle::solve(qs, alpha, o)
    };
    if res.solved {
        if rep.outcome == Outcome::Unsolvable {
            rep.notes.push(
                "oracle found a solution although an earlier stage reported none".into(),
            );
        }
        if rep.witness.is_none() {
            rep.witness = Some(res.best_x.clone());
            rep.witness_residual = Some(res.residual);
        }
        if rep.outcome == Outcome::Inconclusive {
            rep.decide(Outcome::Solvable, "oracle");
        }
    }
    rep.oracle = Some(res);
    if !homogeneous && rep.n <= GRID_MAX_DIM {
        let scale = alpha.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let bound = 2.0 * scale.sqrt();
        let step = bound / 1000.0;
        match oracle::grid_search(qs, alpha, bound, step) {
            Ok((best_x, residual)) => {
                rep.grid = Some(GridStage {
                    bound,
                    step,
                    best_x,
                    residual,
                })
            }
            Err(e) => rep.error("grid", &e),
        }
    }
}
