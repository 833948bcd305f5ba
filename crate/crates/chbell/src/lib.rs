//! Clauser-Horne (CH) and CHSH Bell tests with partially random measurement
//! settings.
//!
//! When the inputs of a Bell test are only partially random -- each setting
//! pair `(x, y)` is drawn from `p(x,y|λ)` with `Q ≤ p(x,y|λ) ≤ P` instead of
//! the uniform `1/4` -- a classical (local hidden variable) adversary who
//! controls `λ` can fake a violation. This crate computes how large that fake
//! violation can be, constructs the ensembles that achieve it, certifies the
//! closed forms against an independent exact optimizer, and simulates the
//! resulting finite-statistics experiments.
//!
//! The pieces:
//!
//! * [`bell`] -- observed distributions, the CH and CHSH functionals, the
//!   count-based CH estimator, and no-signaling checks.
//! * [`lhv`] -- deterministic output strategies, per-`λ` input distributions,
//!   weighted ensembles (a complete classical attack), and their exact Bell
//!   values.
//! * [`closed_form`] -- the piecewise-optimal Bell values under the four
//!   condition combinations (signaling/no-signaling × free/factorizable
//!   inputs), critical thresholds, and explicit achieving attacks.
//! * [`oracle`] -- independent maximization of the attack value by vertex
//!   enumeration of the box-simplex polytope plus a small exact linear
//!   program; used to certify every closed form.
//! * [`sim`] -- seeded trial-by-trial Monte-Carlo execution of an ensemble,
//!   accumulating counts and estimating the CH value with a standard error.
//! * [`cli`] -- the `chbell` command line (bounds, attacks, oracle runs,
//!   sweeps, simulation).
//!
//! ```
//! use chbell::{build_attack, ch_bound, optimize_general, ConditionFlags,
//!              Functional, RandomnessBounds};
//!
//! let rb = RandomnessBounds::new(0.3, 0.05)?;
//! let bound = ch_bound(ConditionFlags::GENERAL, rb);
//! assert!((bound.value - 0.5).abs() < 1e-12);
//!
//! // The independent optimizer and the explicit attack both land on it.
//! let oracle = optimize_general(Functional::Ch, rb)?;
//! assert!((oracle.value - bound.value).abs() < 1e-9);
//! let attack = build_attack(ConditionFlags::GENERAL, rb)?;
//! assert!((attack.achieved()? - bound.value).abs() < 1e-9);
//! # Ok::<(), chbell::Error>(())
//! ```

pub mod bell;
pub mod cli;
pub mod closed_form;
pub mod lhv;
pub mod oracle;
pub mod sim;

use thiserror::Error;

pub use bell::{
    ch_chsh_residual, ch_from_counts, ch_value, chsh_value, is_no_signaling, BellFunctional,
    JointConditional, NoSignalingCheck, SingleCountConvention, TrialCounts,
};
pub use closed_form::{
    build_attack, ch_bound, ch_bound_delta, chsh_bound, critical_threshold, rescale_to_zero_q,
    Attack, BoundResult, ConditionFlags, ThresholdKind, ZeroQRescale,
};
pub use lhv::{
    ensemble_bell_value, induced_joint, j_lambda, j_lambda_chsh, merge_equivalent_lambdas,
    optimal_local_response, validate_ensemble, Atom, AtomInputs, DeterministicStrategy,
    FactorizedInputConditional, Functional, InputConditional, LhvEnsemble, RandomnessBounds,
    ValidationReport,
};
pub use oracle::{
    box_simplex_vertices, lp_maximize, optimize_factorizable, optimize_general, Certificate,
    LpSolution, OracleResult, StrategyAtom, StrategySet,
};
pub use sim::{empirical_ch, run_trials, SimConfig, SimReport};

/// Maximal quantum value of the CH functional, `(√2 − 1)/2`.
pub const CH_QUANTUM_BOUND: f64 = (std::f64::consts::SQRT_2 - 1.0) / 2.0;

/// Maximal quantum value of the CHSH functional, `2√2`.
pub const CHSH_QUANTUM_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Tolerance for probability normalization and no-signaling checks.
///
/// All closed-form arithmetic in this crate is exact up to f64 rounding, so
/// normalization defects beyond this are real input errors, not noise.
pub const PROB_TOL: f64 = 1e-12;

/// Tolerance for the input-averaging constraint `Σ_λ q(λ) p(x,y|λ) = 1/4`.
///
/// Looser than [`PROB_TOL`] so that numerically constructed ensembles
/// (oracle witnesses, grid searches) validate.
pub const AVG_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("insufficient trials for setting ({x},{y})")]
    InsufficientTrials { x: u8, y: u8 },
    #[error("infeasible randomness bounds: {0}")]
    InfeasibleBounds(String),
    #[error("delta out of range: {0} (must lie in [0, 1/4])")]
    DeltaOutOfRange(f64),
    #[error("target {target} outside attainable range {lo}..{hi} of the {branch} branch")]
    TargetOutOfRange {
        target: f64,
        lo: f64,
        hi: f64,
        branch: &'static str,
    },
    #[error("averaging constraint violated at setting index {setting}: sum {sum} != 1/4")]
    AveragingViolated { setting: usize, sum: f64 },
    #[error("setting ({x},{y}) has zero probability under the ensemble")]
    ZeroProbabilitySetting { x: u8, y: u8 },
    #[error("ensemble failed validation:\n{0}")]
    EnsembleInvalid(ValidationReport),
    #[error("no ensemble meets the averaging constraint (infeasible linear program)")]
    LpInfeasible,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
