use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use quadcert::basis::{orthonormalize, DEFAULT_DEP_TOL};
use quadcert::certifier::{self, CertificateReport, Decision};
use quadcert::ensembles::{self, write_csv};
use quadcert::fourier::{self, IntegralEstimate, Verdict, VerifyOptions};
use quadcert::instance::{InstanceFile, System};
use quadcert::oracle::{self, OracleOptions};
use quadcert::pipeline::{self, Outcome, PipelineOptions, PipelineReport};
use quadcert::relaxation::{self, RelaxOptions, RelaxStatus};
use quadcert::Error;
use serde::Serialize;
use serde_json::json;

use crate::{Cli, Command, ExperimentArgs};

pub const SCHEMA_VERSION: u32 = 1;

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

/// Relative tolerance for `α_i = tr Q_i` in `certify`.
const TRACE_MATCH_TOL: f64 = 1e-8;

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<quadcert::instance::InstanceError> for Failure {
    fn from(e: quadcert::instance::InstanceError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Indeterminate { .. } | Error::Quadrature { .. } | Error::EigenNoConvergence { .. } => {
                EXIT_INCONCLUSIVE
            }
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub fn run(cli: &Cli) -> u8 {
    let result = match &cli.command {
        Command::Certify { path, eta } => certify(cli, path, *eta),
        Command::Pipeline {
            path,
            eta,
            verify_integral,
            samples,
            oracle,
            starts,
            entropy_steps,
            seed,
        } => {
            let opts = PipelineOptions {
                eta: *eta,
                relax: RelaxOptions::default(),
                entropy_steps: *entropy_steps,
                integral: verify_integral.then_some(VerifyOptions {
                    samples: *samples,
                    seed: *seed,
                }),
                oracle: oracle.then_some(OracleOptions {
                    starts: *starts,
                    seed: *seed,
                    ..OracleOptions::default()
                }),
            };
            run_pipeline(cli, path, &opts, *seed)
        }
        Command::Relax {
            path,
            entropy_steps,
            matrix,
        } => relax(cli, path, *entropy_steps, *matrix),
        Command::Verify {
            path,
            samples,
            seed,
        } => verify(
            cli,
            path,
            &VerifyOptions {
                samples: *samples,
                seed: *seed,
            },
        ),
        Command::Solve {
            path,
            starts,
            max_iter,
            seed,
        } => solve(
            cli,
            path,
            &OracleOptions {
                starts: *starts,
                max_iter: *max_iter,
                seed: *seed,
            },
        ),
        Command::Experiment(args) => experiment(args),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load(path: &Path) -> Result<System, Failure> {
    Ok(InstanceFile::load(path)?.system())
}

fn emit<T: Serialize>(
    cli: &Cli,
    command: &str,
    seed: Option<u64>,
    code: u8,
    report: &T,
    text: impl FnOnce() -> String,
) -> Result<u8, Failure> {
    if cli.json {
        let v = json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "seed": seed,
            "exit_code": code,
            "report": report,
        });
        println!("{}", serde_json::to_string(&v).map_err(|e| Failure::input(e.to_string()))?);
    } else {
        print!("{}", text());
    }
    Ok(code)
}

fn certify(cli: &Cli, path: &Path, eta: f64) -> Result<u8, Failure> {
    let sys = load(path)?;
    let mut report = if sys.homogeneous {
        certifier::certify_homogeneous(&sys.matrices, eta)?
    } else {
        let mut rep = certifier::certify_inhomogeneous(&sys.matrices, eta)?;
        let mismatch = sys.matrices.iter().zip(&sys.alpha).position(|(q, a)| {
            let t = q.trace();
            (a - t).abs() > TRACE_MATCH_TOL * (1.0 + t.abs())
        });
        if let Some(i) = mismatch {
            rep.decision = Decision::Inconclusive;
            rep.notes.push(format!(
                "alpha[{i}] differs from tr Q_{i}; the certificate only covers alpha_i = tr Q_i (run `pipeline` to reduce to that form)"
            ));
        }
        rep
    };
    if report.guard_band && report.decision == Decision::CertifiedSolvable {
        // the certifier already refuses inside the guard band; keep it explicit
        report.decision = Decision::Inconclusive;
    }
    let code = match report.decision {
        Decision::CertifiedSolvable => EXIT_OK,
        Decision::Inconclusive => EXIT_INCONCLUSIVE,
    };
    emit(cli, "certify", None, code, &report, || certificate_text(&report))
}

fn certificate_text(r: &CertificateReport) -> String {
    let mut s = format!(
        "decision: {}\n‖Σ A_i²‖_op = {:.6e}  threshold η/m = {:.6e}  (η = {:e}, m_eff = {}, n = {})\n",
        match r.decision {
            Decision::CertifiedSolvable => "certified solvable",
            Decision::Inconclusive => "inconclusive",
        },
        r.norm_value,
        r.threshold,
        r.eta,
        r.m_effective,
        r.n
    );
    for note in &r.notes {
        s.push_str(&format!("note: {note}\n"));
    }
    s
}

fn run_pipeline(cli: &Cli, path: &Path, opts: &PipelineOptions, seed: u64) -> Result<u8, Failure> {
    let sys = load(path)?;
    let mut report = if sys.homogeneous {
        pipeline::run_homogeneous(&sys.matrices, opts)?
    } else {
        pipeline::run(&sys.matrices, &sys.alpha, opts)?
    };
    if sys.implied_alpha && !sys.homogeneous {
        report
            .notes
            .push("alpha absent; using alpha_i = tr Q_i".into());
    }
    let code = report.exit_code() as u8;
    emit(cli, "pipeline", Some(seed), code, &report, || pipeline_text(&report))
}

fn pipeline_text(r: &PipelineReport) -> String {
    let mut s = format!(
        "system: n = {}, m = {} (span dimension {}){}\n",
        r.n,
        r.m,
        r.m_effective,
        if r.homogeneous { ", homogeneous" } else { "" }
    );
    if let Some(d) = r.small_m {
        s.push_str(&format!("exact small-m decision: {d:?}\n"));
    }
    if let Some(rel) = &r.relaxation {
        s.push_str(&format!(
            "relaxation: {} (rank {}, residual {:.3e}, {} sweeps)\n",
            if rel.feasible { "feasible" } else { "infeasible" },
            rel.rank,
            rel.residual,
            rel.sweeps
        ));
    }
    if let Some(i) = &r.interior {
        s.push_str(&format!(
            "interior: entropy {:.6} -> {:.6}, rank {} -> {} ({} steps)\n",
            i.entropy_before, i.entropy_after, i.rank_before, i.rank_after, i.steps
        ));
    }
    if let Some(t) = &r.transform {
        s.push_str(&format!(
            "transform: reduced dimension {} ({}equivalent, {} level(s))\n",
            t.reduced_dim,
            if t.equivalent { "" } else { "not " },
            t.levels
        ));
    }
    if let Some(c) = &r.certificate {
        s.push_str(&format!(
            "certificate: {:?}, norm {:.6e} vs threshold {:.6e}\n",
            c.decision, c.norm_value, c.threshold
        ));
    }
    if let Some(e) = &r.integral {
        s.push_str(&integral_text(e));
    }
    if let Some(o) = &r.oracle {
        s.push_str(&format!(
            "oracle: {} (residual {:.6e}, {} starts)\n",
            if o.solved { "solved" } else { "not solved" },
            o.residual,
            o.starts
        ));
    }
    if let Some(g) = &r.grid {
        s.push_str(&format!(
            "grid minimum: {:.6e} on [-{}, {}]^n with step {:e}\n",
            g.residual, g.bound, g.bound, g.step
        ));
    }
    for note in &r.notes {
        s.push_str(&format!("note: {note}\n"));
    }
    for err in &r.errors {
        s.push_str(&format!("stage error: {err}\n"));
    }
    s.push_str(&format!(
        "outcome: {}\n",
        match r.outcome {
            Outcome::Solvable => "solvable",
            Outcome::Unsolvable => "no solution",
            Outcome::Inconclusive => "inconclusive",
        }
    ));
    s
}

#[derive(Serialize)]
struct RelaxReport {
    status: RelaxStatus,
    rank: usize,
    residual: f64,
    entropy: f64,
    gap: f64,
    sweeps: usize,
    matrix: Option<Vec<f64>>,
}

fn relax(cli: &Cli, path: &Path, entropy_steps: usize, matrix: bool) -> Result<u8, Failure> {
    let sys = load(path)?;
    let opts = RelaxOptions::default();
    let (res, qs, alpha) = if sys.homogeneous {
        let res = relaxation::solve_feasibility_homogeneous(&sys.matrices, &opts)?;
        let mut qs = sys.matrices.clone();
        qs.push(quadcert::SymMatrix::identity(qs[0].dim()));
        let mut alpha = sys.alpha.clone();
        alpha.push(1.0);
        (res, qs, alpha)
    } else {
        let res = relaxation::solve_feasibility(&sys.matrices, &sys.alpha, &opts)?;
        (res, sys.matrices.clone(), sys.alpha.clone())
    };
    let res = if res.is_feasible() && entropy_steps > 0 {
        relaxation::interiorize(&res, &qs, &alpha, entropy_steps)?
    } else {
        res
    };
    let report = RelaxReport {
        status: res.status,
        rank: res.rank,
        residual: res.residual,
        entropy: res.entropy,
        gap: res.gap,
        sweeps: res.sweeps,
        matrix: if matrix {
            res.x.as_ref().map(|x| x.to_row_major())
        } else {
            None
        },
    };
    let code = if res.is_feasible() {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    };
    emit(cli, "relax", None, code, &report, || {
        let mut s = match report.status {
            RelaxStatus::Feasible => format!(
                "feasible: rank {}, residual {:.3e}, entropy {:.6}, {} sweeps\n",
                report.rank, report.residual, report.entropy, report.sweeps
            ),
            RelaxStatus::Infeasible => format!(
                "infeasible: projection gap {:.3e} after {} sweeps\n",
                report.gap, report.sweeps
            ),
        };
        if let Some(m) = &report.matrix {
            let n = (m.len() as f64).sqrt().round() as usize;
            for row in m.chunks(n) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.6}")).collect();
                s.push_str(&cells.join(" "));
                s.push('\n');
            }
        }
        s
    })
}

fn integral_text(e: &IntegralEstimate) -> String {
    format!(
        "integral: Re = {:.6e}, Im = {:.6e}; uncertainty {:.3e} (quadrature {:.1e}, tail {:.1e}, 3σ {:.1e}); {:?}\n\
         tameness: {} tame, {} wild (cubic), {} wild (quartic) of {} samples\n",
        e.value.re,
        e.value.im,
        e.total_uncertainty(),
        e.quadrature_error,
        e.tail_bound,
        3.0 * e.mc_stderr,
        e.verdict,
        e.tameness.tame,
        e.tameness.wild_cubic,
        e.tameness.wild_quartic,
        e.samples
    )
}

fn verify(cli: &Cli, path: &Path, opts: &VerifyOptions) -> Result<u8, Failure> {
    let sys = load(path)?;
    let basis = orthonormalize(&sys.matrices, DEFAULT_DEP_TOL)?;
    let est = if sys.homogeneous {
        fourier::verify_traceless(&basis, opts)?
    } else {
        let alpha = fourier::to_half_form(&basis.transform_rhs(&sys.alpha)?);
        fourier::verify_trace_matched(&basis, &alpha, opts)?
    };
    let code = match est.verdict {
        Verdict::PositiveReal => EXIT_OK,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    };
    emit(cli, "verify", Some(opts.seed), code, &est, || integral_text(&est))
}

fn solve(cli: &Cli, path: &Path, opts: &OracleOptions) -> Result<u8, Failure> {
    let sys = load(path)?;
    let res = if sys.homogeneous {
        oracle::solve_homogeneous(&sys.matrices, opts)
    } else {
        oracle::solve(&sys.matrices, &sys.alpha, opts)
    };
    let code = if res.solved { EXIT_OK } else { EXIT_INCONCLUSIVE };
    emit(cli, "solve", Some(opts.seed), code, &res, || {
        format!(
            "{}: residual {:.6e} after {} starts\nx = {:?}\n",
            if res.solved { "solved" } else { "not solved" },
            res.residual,
            res.starts,
            res.best_x
        )
    })
}

fn experiment(args: &ExperimentArgs) -> Result<u8, Failure> {
    let or = |v: &[usize], d: &[usize]| if v.is_empty() { d.to_vec() } else { v.to_vec() };
    let mut buf = Vec::new();
    let summary = match args.kind.as_str() {
        "scaling" => {
            let ns = or(&args.n, &[100, 200]);
            let ms = or(&args.m, &[5]);
            let rows = ensembles::scaling_experiment(&ns, &ms, args.trials.unwrap_or(20), args.seed)?;
            write_csv(&rows, &mut buf)?;
            ensembles::summarize_scaling(&rows)
                .iter()
                .map(|s| {
                    format!(
                        "scaling n={} m={}: mean ‖B‖_op = {:.6e} ± {:.1e} ({:.3} × 4m/n) over {} trials",
                        s.n, s.m, s.mean, s.std, s.mean_ratio, s.trials
                    )
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
        "slice" => {
            let n = single(&args.n, 6, "n")?;
            let rep = ensembles::affine_slice_experiment(
                n,
                args.codim.unwrap_or(n),
                args.trials.unwrap_or(20),
                args.seed,
                args.eta,
            )?;
            write_csv(&rep.rows, &mut buf)?;
            format!(
                "slice n={} codim={}: solvable in {:.3} of {} trials, certified in {}",
                rep.n, rep.codim, rep.frequency, rep.trials, rep.certified
            )
        }
        "moments" => {
            let ms = or(&args.m, &[3, 5, 8]);
            let samples = args.samples.unwrap_or(100_000);
            let mut rows = Vec::new();
            for m in ms {
                rows.extend(ensembles::haar_moments(m, samples, args.seed)?);
            }
            write_csv(&rows, &mut buf)?;
            let worst = rows.iter().fold(0.0f64, |a, r| a.max(r.z.abs()));
            format!("moments: {} rows, largest |z| = {worst:.3}", rows.len())
        }
        "tameness" => {
            let n = single(&args.n, 100, "n")?;
            let m = single(&args.m, 4, "m")?;
            let rows = ensembles::tameness_experiment(
                n,
                m,
                args.trials.unwrap_or(5),
                args.samples.unwrap_or(2000),
                args.seed,
            )?;
            write_csv(&rows, &mut buf)?;
            let total: usize = rows.iter().map(|r| r.samples).sum();
            let tame: usize = rows.iter().map(|r| r.tame).sum();
            format!(
                "tameness n={n} m={m}: {tame} of {total} samples tame ({:.3})",
                tame as f64 / total.max(1) as f64
            )
        }
        other => {
            return Err(Failure::input(format!(
                "unknown experiment kind {other:?}; expected scaling, slice, moments or tameness"
            )))
        }
    };
    match &args.out {
        Some(path) => {
            let mut f = File::create(path)
                .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
            f.write_all(&buf)
                .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
            println!("{summary} (seed {})", args.seed);
        }
        None => {
            io::stdout()
                .write_all(&buf)
                .map_err(|e| Failure::input(e.to_string()))?;
            eprintln!("{summary} (seed {})", args.seed);
        }
    }
    Ok(EXIT_OK)
}

fn single(v: &[usize], default: usize, name: &str) -> Result<usize, Failure> {
    match v {
        [] => Ok(default),
        [x] => Ok(*x),
        _ => Err(Failure::input(format!("--{name} takes a single value for this experiment"))),
    }
}
