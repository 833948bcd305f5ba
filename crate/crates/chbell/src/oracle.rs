//! Independent exact maximization of the attack value, used to certify every
//! closed form.
//!
//! The program is bilinear: weights `q(λ)` multiply input distributions
//! `p(·|λ)`, both unknown. For each fixed output strategy the per-λ value is
//! linear in `p(·|λ)`, and the feasible set for each `p(·|λ)` is the
//! box-simplex `{p ∈ Δ³ : Q ≤ p_i ≤ P}`, so every atom decomposes into a
//! convex combination of polytope vertices without changing the objective or
//! the averaging constraint. That turns the whole problem into one small
//! linear program over (strategy, vertex) atoms, solved here exactly.
//!
//! The factorizable variant has a curved feasible set (products of per-party
//! distributions), so it is grid-certified instead: atoms live on an
//! `(α, β)` grid and the result carries an explicit error bound.
//!
//! Nothing in this module consults the closed forms of
//! [`crate::closed_form`]; agreement between the two is established by the
//! test suite, not assumed.

use serde::Serialize;

use crate::lhv::{
    j_lambda_for, Atom, DeterministicStrategy, FactorizedInputConditional, Functional,
    InputConditional, LhvEnsemble, RandomnessBounds, REDUCED_CHSH_STRATEGIES,
    REDUCED_CH_STRATEGIES,
};
use crate::{Error, Result};

/// One column of the linear program: a deterministic strategy paired with a
/// feasible input distribution (a box-simplex vertex for the general
/// program, a grid point for the factorizable one), and its contribution to
/// the Bell value at unit weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyAtom {
    pub strategy: DeterministicStrategy,
    pub vertex: InputConditional,
    /// `4 · J_λ(strategy, vertex)` for the chosen functional.
    pub value: f64,
}

impl StrategyAtom {
    pub fn new(
        functional: Functional,
        strategy: DeterministicStrategy,
        vertex: InputConditional,
    ) -> Self {
        Self {
            strategy,
            vertex,
            value: 4.0 * j_lambda_for(functional, strategy, vertex),
        }
    }
}

/// How an oracle value is certified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Certificate {
    /// Exact up to f64 arithmetic.
    Exact,
    /// Optimum over an `(α, β)` grid of the stated resolution; the true
    /// optimum lies within `error_bound` above the reported value.
    Grid { resolution: usize, error_bound: f64 },
}

/// Output of an oracle run: the optimum, an ensemble witnessing it, and the
/// certificate.
#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    pub value: f64,
    pub witness: LhvEnsemble,
    pub certificate: Certificate,
}

/// Which output strategies the oracle ranges over.
///
/// `Reduced` is the provably sufficient set (5 for CH, 4 for CHSH);
/// `All16` ranges over every deterministic strategy and exists to confirm
/// the reduction empirically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategySet {
    Reduced,
    All16,
}

/// All vertices of `{p ∈ ℝ⁴ : Σ p_i = 1, Q ≤ p_i ≤ P}`.
///
/// Every vertex has at least three coordinates at a bound, so enumeration
/// fixes three coordinates to `{Q, P}` patterns, solves for the fourth, and
/// keeps the feasible results, deduplicated within 1e−12.
pub fn box_simplex_vertices(rb: RandomnessBounds) -> Result<Vec<InputConditional>> {
    let (p, q) = (rb.p, rb.q);
    if rb.is_degenerate() {
        return Ok(vec![InputConditional::uniform()]);
    }
    let mut vertices: Vec<[f64; 4]> = Vec::new();
    for free in 0..4usize {
        for pattern in 0..8u8 {
            let mut v = [0.0f64; 4];
            let mut bit = 0;
            for (i, slot) in v.iter_mut().enumerate() {
                if i == free {
                    continue;
                }
                *slot = if pattern >> bit & 1 == 1 { p } else { q };
                bit += 1;
            }
            let rest: f64 = v.iter().sum();
            let f = 1.0 - rest;
            if f < q - 1e-12 || f > p + 1e-12 {
                continue;
            }
            v[free] = f;
            if !vertices
                .iter()
                .any(|u| u.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-12))
            {
                vertices.push(v);
            }
        }
    }
    vertices
        .into_iter()
        .map(InputConditional::new)
        .collect::<Result<Vec<_>>>()
}

/// Result of a linear program over strategy atoms.
#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Optimal objective: the Bell value of the best mixture.
    pub value: f64,
    /// Mixture weight per input atom (same order); almost all zero.
    pub weights: Vec<f64>,
}

impl LpSolution {
    /// Indices of atoms carrying weight.
    pub fn support(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 1e-12)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Maximize `Σ_v w_v · value_v` over `w ≥ 0` subject to
/// `Σ_v w_v · vertex_v = moment_targets` and `Σ_v w_v = 1`.
///
/// Solved by a dense two-phase simplex (Bland's rule under degeneracy). Five
/// equality constraints, so optima are supported on at most five atoms.
pub fn lp_maximize(atoms: &[StrategyAtom], moment_targets: [f64; 4]) -> Result<LpSolution> {
    if atoms.is_empty() {
        return Err(Error::LpInfeasible);
    }
    let m = atoms.len();
    let mut columns = Vec::with_capacity(m);
    for atom in atoms {
        let ic = atom.vertex.as_array();
        columns.push([ic[0], ic[1], ic[2], ic[3], 1.0]);
    }
    let b = [
        moment_targets[0],
        moment_targets[1],
        moment_targets[2],
        moment_targets[3],
        1.0,
    ];
    let c: Vec<f64> = atoms.iter().map(|a| a.value).collect();
    simplex(&columns, &b, &c)
}

/// Reference solver: enumerate basic feasible solutions directly.
///
/// The normalization row is implied by the moment rows whenever every atom's
/// distribution sums to 1, so bases are 4-column subsets of the moment
/// system. Exhaustive and slow; used to cross-check [`lp_maximize`].
pub fn lp_maximize_enumerated(
    atoms: &[StrategyAtom],
    moment_targets: [f64; 4],
) -> Result<LpSolution> {
    if atoms.is_empty() {
        return Err(Error::LpInfeasible);
    }
    let m = atoms.len();
    let cols: Vec<[f64; 4]> = atoms.iter().map(|a| a.vertex.as_array()).collect();
    for col in &cols {
        let s: f64 = col.iter().sum();
        assert!(
            (s - 1.0).abs() < 1e-9,
            "atom distributions must be normalized"
        );
    }
    let mut best: Option<LpSolution> = None;
    let mut consider = |subset: &[usize]| {
        let Some(w) = solve_square(&cols, subset, moment_targets) else {
            return;
        };
        if w.iter().any(|&x| x < -1e-9) {
            return;
        }
        let value: f64 = subset
            .iter()
            .zip(&w)
            .map(|(&i, &wi)| atoms[i].value * wi)
            .sum();
        if best.as_ref().is_none_or(|b| value > b.value) {
            let mut weights = vec![0.0; m];
            for (&i, &wi) in subset.iter().zip(&w) {
                weights[i] = wi.max(0.0);
            }
            best = Some(LpSolution { value, weights });
        }
    };
    // Size-4 bases cover every extreme point when the moment rows have full
    // rank; smaller subsets handle degenerate vertex sets.
    for size in 1..=4usize {
        let mut subset: Vec<usize> = (0..size).collect();
        if size > m {
            break;
        }
        loop {
            consider(&subset);
            // next combination
            let mut i = size;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if subset[i] < m - (size - i) {
                    subset[i] += 1;
                    for j in i + 1..size {
                        subset[j] = subset[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    subset.clear();
                    break;
                }
            }
            if subset.is_empty() {
                break;
            }
        }
    }
    best.ok_or(Error::LpInfeasible)
}

/// Solve the 4×k system `Σ_j cols[subset[j]] · w_j = b` exactly when it has a
/// unique consistent solution.
#[allow(clippy::needless_range_loop)] // row elimination over offset ranges
fn solve_square(cols: &[[f64; 4]], subset: &[usize], b: [f64; 4]) -> Option<Vec<f64>> {
    let k = subset.len();
    // Augmented 4×(k+1) matrix, eliminated with partial pivoting.
    let mut a = [[0.0f64; 5]; 4];
    for r in 0..4 {
        for (j, &ci) in subset.iter().enumerate() {
            a[r][j] = cols[ci][r];
        }
        a[r][k] = b[r];
    }
    let mut pivot_rows = Vec::with_capacity(k);
    let mut used = [false; 4];
    for col in 0..k {
        let pivot = (0..4)
            .filter(|r| !used[*r])
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))?;
        if a[pivot][col].abs() < 1e-11 {
            return None; // dependent columns
        }
        used[pivot] = true;
        pivot_rows.push(pivot);
        let inv = 1.0 / a[pivot][col];
        for j in col..=k {
            a[pivot][j] *= inv;
        }
        for r in 0..4 {
            if r != pivot && a[r][col] != 0.0 {
                let f = a[r][col];
                for j in col..=k {
                    a[r][j] -= f * a[pivot][j];
                }
            }
        }
    }
    // Remaining rows must be consistent (0 = 0).
    for r in 0..4 {
        if !used[r] && a[r][k].abs() > 1e-9 {
            return None;
        }
    }
    let mut w = vec![0.0; k];
    for (col, &r) in pivot_rows.iter().enumerate() {
        w[col] = a[r][k];
    }
    Some(w)
}

const RC_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;

/// Dense full-tableau two-phase simplex, maximizing `c·w` over
/// `A w = b, w ≥ 0` with `A` given column-wise (5 rows).
fn simplex(columns: &[[f64; 5]], b: &[f64; 5], c: &[f64]) -> Result<LpSolution> {
    let rows = 5usize;
    let n = columns.len();
    let total = n + rows; // structural + artificial
    let width = total + 1; // + rhs

    // tableau rows 0..rows are constraints, row `rows` is the objective.
    let mut t = vec![0.0f64; (rows + 1) * width];
    let at = |r: usize, j: usize| r * width + j;
    for (j, col) in columns.iter().enumerate() {
        for r in 0..rows {
            t[at(r, j)] = col[r];
        }
    }
    for r in 0..rows {
        t[at(r, n + r)] = 1.0;
        t[at(r, total)] = b[r];
    }
    let mut basis: Vec<usize> = (n..total).collect();

    let run_phase = |t: &mut Vec<f64>,
                     basis: &mut Vec<usize>,
                     costs: &[f64],
                     allow_artificial: bool|
     -> Result<()> {
        // (Re)build the objective row from the costs and current basis.
        for j in 0..width {
            t[at(rows, j)] = if j < costs.len() { costs[j] } else { 0.0 };
        }
        for r in 0..rows {
            let cb = if basis[r] < costs.len() {
                costs[basis[r]]
            } else {
                0.0
            };
            if cb != 0.0 {
                for j in 0..width {
                    t[at(rows, j)] -= cb * t[at(r, j)];
                }
            }
        }
        // Pivot counts stay tiny for 5-row programs; the limit only turns a
        // cycling bug into an error instead of a hang.
        let limit = 20_000usize;
        let mut bland_after = 1_000usize;
        for iter in 0..limit {
            let allowed_cols = if allow_artificial { total } else { n };
            // Entering column: Dantzig rule, Bland's rule once degenerate
            // stalling is plausible.
            let mut entering = None;
            if iter < bland_after {
                let mut best = RC_TOL;
                for j in 0..allowed_cols {
                    let rc = t[at(rows, j)];
                    if rc > best {
                        best = rc;
                        entering = Some(j);
                    }
                }
            } else {
                bland_after = 0;
                for j in 0..allowed_cols {
                    if t[at(rows, j)] > RC_TOL {
                        entering = Some(j);
                        break;
                    }
                }
            }
            let Some(pc) = entering else {
                return Ok(());
            };
            // Ratio test; ties broken toward the smallest basis column for
            // determinism (and to cooperate with Bland's rule).
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..rows {
                let a = t[at(r, pc)];
                if a > PIVOT_TOL {
                    let ratio = t[at(r, total)] / a;
                    match leaving {
                        None => leaving = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio < lratio + 1e-12 && basis[r] < basis[lr])
                            {
                                leaving = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((pr, _)) = leaving else {
                // Unbounded; cannot happen with the normalization row, but
                // fail loudly rather than loop.
                return Err(Error::LpInfeasible);
            };
            pivot(t, rows, width, pr, pc);
            basis[pr] = pc;
        }
        Err(Error::InvalidParameter(
            "simplex iteration limit exceeded".into(),
        ))
    };

    // Phase 1: drive the artificials to zero.
    let mut phase1_costs = vec![0.0; total];
    phase1_costs[n..].fill(-1.0);
    run_phase(&mut t, &mut basis, &phase1_costs, true)?;
    let infeasibility: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &j)| j >= n)
        .map(|(r, _)| t[at(r, total)])
        .sum();
    if infeasibility.abs() > 1e-8 {
        return Err(Error::LpInfeasible);
    }
    // Pivot lingering zero-level artificials out where possible; a row with
    // no structural pivot is redundant and its artificial stays at zero.
    for r in 0..rows {
        if basis[r] >= n {
            if let Some(pc) = (0..n).find(|&j| t[at(r, j)].abs() > 1e-8) {
                pivot(&mut t, rows, width, r, pc);
                basis[r] = pc;
            }
        }
    }

    // Phase 2: the real objective, artificials barred from entering.
    run_phase(&mut t, &mut basis, c, false)?;

    let mut weights = vec![0.0; n];
    for r in 0..rows {
        if basis[r] < n {
            weights[basis[r]] = t[at(r, total)].max(0.0);
        }
    }
    let value = weights.iter().zip(c).map(|(w, ci)| w * ci).sum();
    Ok(LpSolution { value, weights })
}

fn pivot(t: &mut [f64], rows: usize, width: usize, pr: usize, pc: usize) {
    let at = |r: usize, j: usize| r * width + j;
    let inv = 1.0 / t[at(pr, pc)];
    for j in 0..width {
        t[at(pr, j)] *= inv;
    }
    for r in 0..=rows {
        if r == pr {
            continue;
        }
        let f = t[at(r, pc)];
        if f != 0.0 {
            for j in 0..width {
                t[at(r, j)] -= f * t[at(pr, j)];
            }
        }
    }
}

fn best_strategy_for(
    functional: Functional,
    set: StrategySet,
    ic: InputConditional,
) -> (DeterministicStrategy, f64) {
    let reduced: &[DeterministicStrategy] = match functional {
        Functional::Ch => &REDUCED_CH_STRATEGIES,
        Functional::Chsh => &REDUCED_CHSH_STRATEGIES,
    };
    let mut best: Option<(DeterministicStrategy, f64)> = None;
    let mut eval = |s: DeterministicStrategy| {
        let v = j_lambda_for(functional, s, ic);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((s, v));
        }
    };
    match set {
        StrategySet::Reduced => reduced.iter().copied().for_each(&mut eval),
        StrategySet::All16 => DeterministicStrategy::all().for_each(&mut eval),
    }
    best.expect("strategy sets are nonempty")
}

fn witness_from(
    atoms: &[StrategyAtom],
    inputs: Option<&[FactorizedInputConditional]>,
    weights: &[f64],
) -> LhvEnsemble {
    let mut out = Vec::new();
    for (i, &w) in weights.iter().enumerate() {
        if w > 1e-12 {
            let atom = match inputs {
                Some(facs) => Atom::new(w, facs[i], atoms[i].strategy),
                None => Atom::new(w, atoms[i].vertex, atoms[i].strategy),
            };
            out.push(atom);
        }
    }
    LhvEnsemble::new(out)
}

/// Exact maximum of the Bell value over all ensembles feasible at `rb`,
/// computed as a linear program over (strategy, vertex) atoms.
pub fn optimize_general(functional: Functional, rb: RandomnessBounds) -> Result<OracleResult> {
    optimize_general_with(functional, rb, StrategySet::Reduced)
}

/// [`optimize_general`] with an explicit strategy set.
pub fn optimize_general_with(
    functional: Functional,
    rb: RandomnessBounds,
    set: StrategySet,
) -> Result<OracleResult> {
    let vertices = box_simplex_vertices(rb)?;
    let atoms: Vec<StrategyAtom> = vertices
        .into_iter()
        .map(|v| {
            let (s, _) = best_strategy_for(functional, set, v);
            StrategyAtom::new(functional, s, v)
        })
        .collect();
    let lp = lp_maximize(&atoms, [0.25; 4])?;
    let witness = witness_from(&atoms, None, &lp.weights);
    Ok(OracleResult {
        value: lp.value,
        witness,
        certificate: Certificate::Exact,
    })
}

/// Grid-certified maximum under the factorizable condition.
///
/// Atoms are products `p(x,y|λ) = p_A(x|λ) p_B(y|λ)` with `(α, β)` on a
/// `(grid_n+1)²` grid, filtered to the box constraints; weights come from the
/// same linear program. The reported optimum is a lower bound on the true
/// factorizable optimum and lies within the certificate's `error_bound` of
/// it: moving any optimal atom to the nearest feasible grid point changes
/// `(α, β)` by at most one step, and the atom objectives have gradient sum
/// below 2 in `(α, β)`, so `8/grid_n` over-covers the total after the factor
/// 4 between per-λ values and Bell values.
pub fn optimize_factorizable(
    functional: Functional,
    rb: RandomnessBounds,
    grid_n: usize,
) -> Result<OracleResult> {
    if grid_n < 64 {
        return Err(Error::InvalidParameter(format!(
            "grid_n must be at least 64, got {grid_n}"
        )));
    }
    let p_eff = rb.effective_p();
    let mut atoms = Vec::new();
    let mut inputs = Vec::new();
    for i in 0..=grid_n {
        let alpha = i as f64 / grid_n as f64;
        for j in 0..=grid_n {
            let beta = j as f64 / grid_n as f64;
            let fac = FactorizedInputConditional::new(alpha, beta)?;
            let ic = fac.induced();
            let feasible = ic
                .as_array()
                .iter()
                .all(|&v| v >= rb.q - 1e-12 && v <= p_eff + 1e-12);
            if !feasible {
                continue;
            }
            let (s, _) = best_strategy_for(functional, StrategySet::Reduced, ic);
            atoms.push(StrategyAtom::new(functional, s, ic));
            inputs.push(fac);
        }
    }
    if atoms.is_empty() {
        return Err(Error::InvalidParameter(
            "no feasible grid points for the factorizable oracle".into(),
        ));
    }
    let lp = lp_maximize(&atoms, [0.25; 4])?;
    let witness = witness_from(&atoms, Some(&inputs), &lp.weights);
    Ok(OracleResult {
        value: lp.value,
        witness,
        certificate: Certificate::Grid {
            resolution: grid_n,
            error_bound: 8.0 / grid_n as f64,
        },
    })
}
