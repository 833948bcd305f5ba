//! The `chbell` command line: closed-form bounds, achieving attacks, oracle
//! certification, parameter sweeps, and simulation.
//!
//! Exit codes: 0 on success, 2 for usage or validation errors, 3 for
//! computation failures (infeasible programs, I/O).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::closed_form::{build_attack, ch_bound, chsh_bound, ConditionFlags};
use crate::lhv::{
    ensemble_bell_value, validate_ensemble, Functional, LhvEnsemble, RandomnessBounds,
};
use crate::oracle::{optimize_factorizable, optimize_general, Certificate, OracleResult};
use crate::sim::{self, SimConfig};
use crate::{Error, Result, CH_QUANTUM_BOUND};

#[derive(Parser)]
#[command(
    name = "chbell",
    about = "CH/CHSH Bell-test bounds and attacks under partially random inputs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Emit JSON where a human summary is the default.
    #[arg(long, global = true)]
    json: bool,
    /// Output file (required by `attack` and `sweep`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed for `simulate`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PointArgs {
    /// Condition: general | factorizable | ns | ns-factorizable.
    #[arg(long)]
    cond: ConditionFlags,
    /// Upper bound on p(x,y|lambda).
    #[arg(long = "P")]
    p: Option<f64>,
    /// Lower bound on p(x,y|lambda).
    #[arg(long = "Q")]
    q: Option<f64>,
    /// Symmetric deviation: P = 1/4 + delta, Q = 1/4 - delta.
    #[arg(long, conflicts_with_all = ["p", "q"])]
    delta: Option<f64>,
}

impl PointArgs {
    fn bounds(&self) -> Result<RandomnessBounds> {
        match (self.delta, self.p) {
            (Some(d), None) => RandomnessBounds::from_delta(d),
            (None, Some(p)) => RandomnessBounds::new(p, self.q.unwrap_or(0.0)),
            _ => Err(Error::InvalidParameter(
                "specify either --P (with optional --Q) or --delta".into(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed-form optimal Bell value for local models.
    Bound {
        #[command(flatten)]
        point: PointArgs,
        /// Functional: ch (default) or chsh.
        #[arg(long, default_value = "ch")]
        func: String,
    },
    /// Construct an achieving ensemble and write it as JSON.
    Attack {
        #[command(flatten)]
        point: PointArgs,
    },
    /// Certify the closed form with the independent optimizer.
    Oracle {
        #[command(flatten)]
        point: PointArgs,
        /// Functional: ch (default) or chsh.
        #[arg(long, default_value = "ch")]
        func: String,
        /// Grid resolution for factorizable conditions.
        #[arg(long, default_value_t = 512)]
        grid: usize,
    },
    /// Emit closed-form values (optionally oracle-certified) over a grid as CSV.
    Sweep {
        /// Comma-separated conditions.
        #[arg(long, value_delimiter = ',')]
        cond: Vec<ConditionFlags>,
        /// Functional: ch (default) or chsh.
        #[arg(long, default_value = "ch")]
        func: String,
        /// P grid as lo:hi:step.
        #[arg(long = "p-range")]
        p_range: Option<String>,
        /// Q grid as lo:hi:step.
        #[arg(long = "q-range")]
        q_range: Option<String>,
        /// Delta grid as lo:hi:step.
        #[arg(long = "delta-range", conflicts_with_all = ["p_range", "critical"])]
        delta_range: Option<String>,
        /// Solve J(P,Q) = j-target for P along the Q grid instead.
        #[arg(long)]
        critical: bool,
        /// Target Bell value for --critical (default: the quantum CH maximum).
        #[arg(long = "j-target")]
        j_target: Option<f64>,
        /// Append oracle and gap columns.
        #[arg(long)]
        oracle: bool,
        /// Grid resolution for factorizable oracle columns.
        #[arg(long, default_value_t = 512)]
        grid: usize,
    },
    /// Run a seeded Monte-Carlo experiment on an ensemble file.
    Simulate {
        /// Ensemble JSON file.
        #[arg(long = "in")]
        input: PathBuf,
        /// Number of trials.
        #[arg(long)]
        n: u64,
    },
    /// Validate an ensemble file, optionally against a condition's closed form.
    Verify {
        /// Ensemble JSON file.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        cond: Option<ConditionFlags>,
        #[arg(long = "P")]
        p: Option<f64>,
        #[arg(long = "Q")]
        q: Option<f64>,
        /// Tolerance for the closed-form comparison.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

fn parse_functional(s: &str) -> Result<Functional> {
    match s {
        "ch" => Ok(Functional::Ch),
        "chsh" => Ok(Functional::Chsh),
        other => Err(Error::InvalidParameter(format!(
            "unknown functional {other:?} (expected ch | chsh)"
        ))),
    }
}

/// Format with 12 significant digits, locale-independent.
fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

struct RangeSpec {
    lo: f64,
    hi: f64,
    step: f64,
}

impl RangeSpec {
    fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else {
            return Err(Error::InvalidParameter(format!(
                "range {s:?} must be lo:hi:step"
            )));
        };
        let parse = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number {t:?} in range")))
        };
        let spec = Self {
            lo: parse(lo)?,
            hi: parse(hi)?,
            step: parse(step)?,
        };
        if spec.step <= 0.0 || spec.hi < spec.lo {
            return Err(Error::InvalidParameter(format!(
                "range {s:?} must have positive step and hi >= lo"
            )));
        }
        Ok(spec)
    }

    fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::LpInfeasible | Error::Io(_) => 3,
        _ => 2,
    }
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bound {
            ref point,
            ref func,
        } => cmd_bound(point, func),
        Command::Attack { ref point } => cmd_attack(point, cli.out.as_deref(), cli.json),
        Command::Oracle {
            ref point,
            ref func,
            grid,
        } => cmd_oracle(point, func, grid),
        Command::Sweep {
            ref cond,
            ref func,
            ref p_range,
            ref q_range,
            ref delta_range,
            critical,
            j_target,
            oracle,
            grid,
        } => cmd_sweep(SweepSpec {
            conditions: cond.clone(),
            functional: parse_functional(func)?,
            p_range: p_range.as_deref().map(RangeSpec::parse).transpose()?,
            q_range: q_range.as_deref().map(RangeSpec::parse).transpose()?,
            delta_range: delta_range.as_deref().map(RangeSpec::parse).transpose()?,
            critical,
            j_target: j_target.unwrap_or(CH_QUANTUM_BOUND),
            oracle,
            grid,
            out: cli.out.clone(),
        }),
        Command::Simulate { ref input, n } => cmd_simulate(input, n, cli.seed),
        Command::Verify {
            ref input,
            cond,
            p,
            q,
            tol,
        } => cmd_verify(input, cond, p, q, tol, cli.json),
    }
}

fn bound_for(
    cond: ConditionFlags,
    functional: Functional,
    rb: RandomnessBounds,
) -> Result<crate::closed_form::BoundResult> {
    match functional {
        Functional::Ch => Ok(ch_bound(cond, rb)),
        Functional::Chsh => {
            if cond.no_signaling {
                return Err(Error::InvalidParameter(
                    "CHSH bounds are defined for the general and factorizable conditions".into(),
                ));
            }
            Ok(chsh_bound(cond, rb))
        }
    }
}

fn cmd_bound(point: &PointArgs, func: &str) -> Result<()> {
    let functional = parse_functional(func)?;
    let rb = point.bounds()?;
    let bound = bound_for(point.cond, functional, rb)?;
    println!("{}", serde_json::to_string_pretty(&bound)?);
    Ok(())
}

fn cmd_attack(point: &PointArgs, out: Option<&std::path::Path>, json: bool) -> Result<()> {
    let out = out.ok_or_else(|| Error::InvalidParameter("--out is required for attack".into()))?;
    let rb = point.bounds()?;
    let attack = build_attack(point.cond, rb)?;
    let report = validate_ensemble(&attack.ensemble, &rb);
    if !report.passed() {
        return Err(Error::EnsembleInvalid(report));
    }
    let achieved = attack.achieved()?;
    if (achieved - attack.expected.value).abs() > 1e-9 {
        return Err(Error::LpInfeasible);
    }
    // Validate before touching the filesystem so failures leave no partial file.
    std::fs::write(out, serde_json::to_string_pretty(&attack.ensemble)?)?;
    if json {
        let summary = json!({
            "condition": point.cond,
            "P": rb.p,
            "Q": rb.q,
            "functional": attack.functional,
            "achieved": achieved,
            "closed_form": attack.expected.value,
            "branch": attack.expected.branch,
            "implied_ch": attack.implied_ch,
            "construction": attack.construction,
            "atoms": attack.ensemble.atoms.len(),
            "validation": "ok",
            "out": out.display().to_string(),
        });
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        let implied = attack
            .implied_ch
            .map(|v| format!(", implied CH {v:.6}"))
            .unwrap_or_default();
        println!(
            "attack {} P={} Q={}: achieved {} = closed form {:.6} ({}{}), validation ok, {} atoms -> {}",
            point.cond,
            rb.p,
            rb.q,
            achieved,
            attack.expected.value,
            attack.functional,
            implied,
            attack.ensemble.atoms.len(),
            out.display()
        );
    }
    Ok(())
}

/// Oracle value for a condition, mapping the no-signaling conditions through
/// the CH-CHSH equivalence.
fn oracle_for(
    cond: ConditionFlags,
    functional: Functional,
    rb: RandomnessBounds,
    grid: usize,
) -> Result<OracleResult> {
    match (cond.no_signaling, cond.factorizable) {
        (false, false) => optimize_general(functional, rb),
        (false, true) => optimize_factorizable(functional, rb, grid),
        (true, fac) => {
            if functional != Functional::Ch {
                return Err(Error::InvalidParameter(
                    "no-signaling oracle runs are defined for the CH functional".into(),
                ));
            }
            let mut result = if fac {
                optimize_factorizable(Functional::Chsh, rb, grid)?
            } else {
                optimize_general(Functional::Chsh, rb)?
            };
            result.value = (result.value - 2.0) / 4.0;
            if let Certificate::Grid { error_bound, .. } = &mut result.certificate {
                *error_bound /= 4.0;
            }
            Ok(result)
        }
    }
}

fn cmd_oracle(point: &PointArgs, func: &str, grid: usize) -> Result<()> {
    let functional = parse_functional(func)?;
    let rb = point.bounds()?;
    let closed = bound_for(point.cond, functional, rb)?;
    let result = oracle_for(point.cond, functional, rb, grid)?;
    let gap = (result.value - closed.value).abs();
    let out = json!({
        "condition": point.cond,
        "functional": functional,
        "P": rb.p,
        "Q": rb.q,
        "value": result.value,
        "certificate": result.certificate,
        "closed_form": closed.value,
        "branch": closed.branch,
        "gap": gap,
        "witness": result.witness,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

struct SweepSpec {
    conditions: Vec<ConditionFlags>,
    functional: Functional,
    p_range: Option<RangeSpec>,
    q_range: Option<RangeSpec>,
    delta_range: Option<RangeSpec>,
    critical: bool,
    j_target: f64,
    oracle: bool,
    grid: usize,
    out: Option<PathBuf>,
}

fn cmd_sweep(spec: SweepSpec) -> Result<()> {
    let out = spec
        .out
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("--out is required for sweep".into()))?;
    if spec.conditions.is_empty() {
        return Err(Error::InvalidParameter(
            "--cond must list at least one condition".into(),
        ));
    }
    let mut csv = String::from("condition,P,Q,delta,closed_form,branch");
    if spec.oracle {
        csv.push_str(",oracle,gap");
    }
    csv.push('\n');

    let emit = |cond: ConditionFlags,
                rb: RandomnessBounds,
                delta: Option<f64>,
                csv: &mut String|
     -> Result<()> {
        let bound = bound_for(cond, spec.functional, rb)?;
        let delta_col = delta
            .or_else(|| rb.delta())
            .map(fmt_sig)
            .unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{}",
            cond.label(),
            fmt_sig(rb.p),
            fmt_sig(rb.q),
            delta_col,
            fmt_sig(bound.value),
            bound.branch
        ));
        if spec.oracle {
            let result = oracle_for(cond, spec.functional, rb, spec.grid)?;
            let gap = (result.value - bound.value).abs();
            csv.push_str(&format!(",{},{}", fmt_sig(result.value), fmt_sig(gap)));
        }
        csv.push('\n');
        Ok(())
    };

    let mut skipped = 0usize;
    if let Some(deltas) = &spec.delta_range {
        if spec.functional != Functional::Ch {
            return Err(Error::InvalidParameter(
                "delta sweeps are defined for the CH functional".into(),
            ));
        }
        for cond in &spec.conditions {
            for d in deltas.values() {
                match RandomnessBounds::from_delta(d) {
                    Ok(rb) => emit(*cond, rb, Some(d), &mut csv)?,
                    Err(_) => skipped += 1,
                }
            }
        }
    } else if spec.critical {
        let qs = spec
            .q_range
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("--critical requires --q-range".into()))?;
        if spec.functional != Functional::Ch {
            return Err(Error::InvalidParameter(
                "critical sweeps are defined for the CH functional".into(),
            ));
        }
        for cond in &spec.conditions {
            for q in qs.values() {
                match critical_p(*cond, q, spec.j_target) {
                    Some(p) => {
                        let rb = RandomnessBounds::new(p, q)?;
                        emit(*cond, rb, None, &mut csv)?;
                    }
                    None => skipped += 1,
                }
            }
        }
    } else {
        let (Some(ps), Some(qs)) = (&spec.p_range, &spec.q_range) else {
            return Err(Error::InvalidParameter(
                "sweep needs --p-range and --q-range, or --delta-range, or --critical".into(),
            ));
        };
        for cond in &spec.conditions {
            for p in ps.values() {
                for q in qs.values() {
                    match RandomnessBounds::new(p, q) {
                        Ok(rb) => emit(*cond, rb, None, &mut csv)?,
                        Err(_) => skipped += 1,
                    }
                }
            }
        }
    }
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} infeasible grid points");
    }
    std::fs::write(out, csv)?;
    Ok(())
}

/// Smallest P at which the closed form reaches `j` at fixed Q, or None when
/// even P = 1 falls short.
fn critical_p(cond: ConditionFlags, q: f64, j: f64) -> Option<f64> {
    let value = |p: f64| {
        RandomnessBounds::new(p, q)
            .ok()
            .map(|rb| ch_bound(cond, rb).value)
    };
    if value(1.0)? < j {
        return None;
    }
    let (mut lo, mut hi) = (0.25, 1.0);
    if value(lo)? >= j {
        return Some(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if value(mid)? >= j {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Some(hi)
}

fn cmd_simulate(input: &std::path::Path, n: u64, seed: u64) -> Result<()> {
    let text = std::fs::read_to_string(input)?;
    let ensemble: LhvEnsemble = serde_json::from_str(&text)?;
    let cfg = SimConfig {
        n_trials: n,
        seed,
        ensemble,
    };
    cfg.validate()?;
    let report = sim::run(&cfg)?;
    let out = json!({
        "generator": report.generator,
        "config": { "n_trials": cfg.n_trials, "seed": cfg.seed, "ensemble": cfg.ensemble },
        "counts": report.counts,
        "j_estimate": report.j_estimate,
        "std_error": report.std_error,
        "j_exact": report.j_exact,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_verify(
    input: &std::path::Path,
    cond: Option<ConditionFlags>,
    p: Option<f64>,
    q: Option<f64>,
    tol: f64,
    json: bool,
) -> Result<()> {
    let text = std::fs::read_to_string(input)?;
    let ensemble: LhvEnsemble = serde_json::from_str(&text)?;
    // Without explicit bounds, validate against the loosest box.
    let rb = match p {
        Some(p) => RandomnessBounds::new(p, q.unwrap_or(0.0))?,
        None => RandomnessBounds::new(1.0, 0.0)?,
    };
    let report = validate_ensemble(&ensemble, &rb);
    if !report.passed() {
        return Err(Error::EnsembleInvalid(report));
    }
    let ch = ensemble_bell_value(&ensemble, Functional::Ch)?;
    let chsh = ensemble_bell_value(&ensemble, Functional::Chsh)?;
    let mut summary = json!({
        "validation": "ok",
        "atoms": ensemble.atoms.len(),
        "ch_value": ch,
        "chsh_value": chsh,
    });
    if let Some(cond) = cond {
        let expected = if cond.no_signaling {
            chsh_bound(cond, rb)
        } else {
            ch_bound(cond, rb)
        };
        let achieved = if cond.no_signaling { chsh } else { ch };
        let gap = (achieved - expected.value).abs();
        summary["closed_form"] = json!(expected.value);
        summary["achieved"] = json!(achieved);
        summary["gap"] = json!(gap);
        if gap > tol {
            eprintln!(
                "error: ensemble value {achieved} misses the {} closed form {} by {gap:.3e} (tol {tol:.1e})",
                cond.label(),
                expected.value
            );
            return Err(Error::InvalidParameter("closed-form mismatch".into()));
        }
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!(
            "ok: {} atoms, CH {ch:.9}, CHSH {chsh:.9}",
            ensemble.atoms.len()
        );
    }
    Ok(())
}
