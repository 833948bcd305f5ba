//! Local-hidden-variable attacks: deterministic output strategies, per-λ
//! input distributions, and weighted ensembles.
//!
//! A complete attack is an [`LhvEnsemble`]: a list of atoms `(q(λ), p(·|λ),
//! strategy(λ))`. Against an observer who checks that settings look uniform,
//! the ensemble must satisfy the averaging constraint
//! `Σ_λ q(λ) p(x,y|λ) = 1/4`; its CH (or CHSH) value is then
//! `4 Σ_λ q(λ) J_λ` with `J_λ` the per-λ functional value.
//!
//! Probabilistic local strategies never appear as a type: they are convex
//! mixtures of deterministic ones, so mixtures of atoms cover them.

use serde::{Deserialize, Serialize};

use crate::bell::JointConditional;
use crate::{Error, Result, AVG_TOL, PROB_TOL};

/// One λ's input distribution `p(x,y|λ)`, indexed as `p[2x+y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct InputConditional {
    p: [f64; 4],
}

impl InputConditional {
    pub fn new(p: [f64; 4]) -> Result<Self> {
        for (i, &v) in p.iter().enumerate() {
            if !v.is_finite() || !(-PROB_TOL..=1.0 + PROB_TOL).contains(&v) {
                return Err(Error::InvalidDistribution(format!(
                    "input probability p[{i}] = {v} outside [0,1]"
                )));
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!(
                "input probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self { p })
    }

    pub fn uniform() -> Self {
        Self { p: [0.25; 4] }
    }

    /// `p(x,y|λ)`.
    pub fn prob(&self, x: u8, y: u8) -> f64 {
        self.p[(2 * x + y) as usize]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.p
    }
}

impl TryFrom<[f64; 4]> for InputConditional {
    type Error = Error;
    fn try_from(p: [f64; 4]) -> Result<Self> {
        Self::new(p)
    }
}

impl From<InputConditional> for [f64; 4] {
    fn from(ic: InputConditional) -> [f64; 4] {
        ic.p
    }
}

/// Factorizable input distribution `p(x,y|λ) = p_A(x|λ) p_B(y|λ)`,
/// parametrized by `alpha = p_A(0|λ)` and `beta = p_B(0|λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizedInputConditional {
    pub alpha: f64,
    pub beta: f64,
}

impl FactorizedInputConditional {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidDistribution(format!(
                    "{name} = {v} outside [0,1]"
                )));
            }
        }
        Ok(Self { alpha, beta })
    }

    /// The induced joint input distribution
    /// `(αβ, α(1−β), (1−α)β, (1−α)(1−β))`.
    pub fn induced(&self) -> InputConditional {
        let (a, b) = (self.alpha, self.beta);
        InputConditional {
            p: [a * b, a * (1.0 - b), (1.0 - a) * b, (1.0 - a) * (1.0 - b)],
        }
    }
}

/// An atom's input side: a general conditional or a factorizable one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AtomInputs {
    General(InputConditional),
    Factorized(FactorizedInputConditional),
}

impl AtomInputs {
    pub fn conditional(&self) -> InputConditional {
        match self {
            AtomInputs::General(ic) => *ic,
            AtomInputs::Factorized(f) => f.induced(),
        }
    }

    pub fn is_factorized(&self) -> bool {
        matches!(self, AtomInputs::Factorized(_))
    }
}

impl From<InputConditional> for AtomInputs {
    fn from(ic: InputConditional) -> Self {
        AtomInputs::General(ic)
    }
}

impl From<FactorizedInputConditional> for AtomInputs {
    fn from(f: FactorizedInputConditional) -> Self {
        AtomInputs::Factorized(f)
    }
}

/// One λ's deterministic output rule.
///
/// Bit `a_x` is `p̃_A(0|x,λ)` (1 means "output 0 at setting x"), and `b_y`
/// likewise for Bob; stored as `[a0, a1, b0, b1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u8; 4]", into = "[u8; 4]")]
pub struct DeterministicStrategy {
    bits: [u8; 4],
}

impl DeterministicStrategy {
    pub fn new(a0: u8, a1: u8, b0: u8, b1: u8) -> Result<Self> {
        let bits = [a0, a1, b0, b1];
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidParameter(format!(
                "strategy bits must be 0 or 1, got {bits:?}"
            )));
        }
        Ok(Self { bits })
    }

    /// All 16 strategies, ordered by [`Self::index`].
    pub fn all() -> impl Iterator<Item = Self> {
        (0..16u8).map(Self::from_index)
    }

    pub fn from_index(i: u8) -> Self {
        Self {
            bits: [(i >> 3) & 1, (i >> 2) & 1, (i >> 1) & 1, i & 1],
        }
    }

    pub fn index(&self) -> u8 {
        self.bits[0] << 3 | self.bits[1] << 2 | self.bits[2] << 1 | self.bits[3]
    }

    /// `p̃_A(0|x,λ)` as a bit.
    pub fn alice_bit(&self, x: u8) -> u8 {
        self.bits[x as usize]
    }

    /// `p̃_B(0|y,λ)` as a bit.
    pub fn bob_bit(&self, y: u8) -> u8 {
        self.bits[2 + y as usize]
    }

    /// Alice's output at setting `x` (0 or 1).
    pub fn alice_output(&self, x: u8) -> u8 {
        1 - self.alice_bit(x)
    }

    /// Bob's output at setting `y`.
    pub fn bob_output(&self, y: u8) -> u8 {
        1 - self.bob_bit(y)
    }

    /// The strategy with both parties' outputs flipped. Leaves every CHSH
    /// correlator unchanged.
    pub fn complement(&self) -> Self {
        Self {
            bits: [
                1 - self.bits[0],
                1 - self.bits[1],
                1 - self.bits[2],
                1 - self.bits[3],
            ],
        }
    }
}

impl TryFrom<[u8; 4]> for DeterministicStrategy {
    type Error = Error;
    fn try_from(bits: [u8; 4]) -> Result<Self> {
        Self::new(bits[0], bits[1], bits[2], bits[3])
    }
}

impl From<DeterministicStrategy> for [u8; 4] {
    fn from(s: DeterministicStrategy) -> [u8; 4] {
        s.bits
    }
}

const fn strat(a0: u8, a1: u8, b0: u8, b1: u8) -> DeterministicStrategy {
    DeterministicStrategy {
        bits: [a0, a1, b0, b1],
    }
}

/// The five output strategies that can make the CH `J_λ` positive, in the
/// canonical order used for tie-breaking:
/// values `(p2−p0)/2, (p1−p0)/2, (p1−p2)/2, (p2−p1)/2, (p1+p2)/2−p3`.
pub const REDUCED_CH_STRATEGIES: [DeterministicStrategy; 5] = [
    strat(0, 1, 1, 0),
    strat(1, 0, 0, 1),
    strat(1, 0, 1, 1),
    strat(1, 1, 1, 0),
    strat(1, 1, 1, 1),
];

/// The four optimal CHSH output strategies: each places the single negative
/// sign on one of `p3, p2, p1, p0` in turn.
pub const REDUCED_CHSH_STRATEGIES: [DeterministicStrategy; 4] = [
    strat(1, 1, 1, 1),
    strat(1, 0, 1, 1),
    strat(1, 1, 1, 0),
    strat(0, 1, 1, 0),
];

/// Which Bell functional an ensemble is evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    Ch,
    Chsh,
}

impl std::fmt::Display for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Functional::Ch => write!(f, "ch"),
            Functional::Chsh => write!(f, "chsh"),
        }
    }
}

/// Per-λ CH value for a deterministic strategy, with single counts averaged
/// over the other party's setting:
///
/// `J_λ = a0·b0·p0 + a0·b1·p1 + a1·b0·p2 − a1·b1·p3
///        − a0·(p0+p1)/2 − b0·(p0+p2)/2`
pub fn j_lambda(s: DeterministicStrategy, ic: InputConditional) -> f64 {
    let [p0, p1, p2, p3] = ic.as_array();
    let (a0, a1) = (s.alice_bit(0) as f64, s.alice_bit(1) as f64);
    let (b0, b1) = (s.bob_bit(0) as f64, s.bob_bit(1) as f64);
    a0 * b0 * p0 + a0 * b1 * p1 + a1 * b0 * p2
        - a1 * b1 * p3
        - a0 * (p0 + p1) / 2.0
        - b0 * (p0 + p2) / 2.0
}

/// Per-λ CHSH value: `Σ_{x,y} (−1)^(xy + a_x + b_y) p(x,y|λ)`.
pub fn j_lambda_chsh(s: DeterministicStrategy, ic: InputConditional) -> f64 {
    let mut total = 0.0;
    for x in 0..2u8 {
        for y in 0..2u8 {
            let parity = (x * y + s.alice_bit(x) + s.bob_bit(y)) % 2;
            let sign = if parity == 0 { 1.0 } else { -1.0 };
            total += sign * ic.prob(x, y);
        }
    }
    total
}

/// Per-λ value for the chosen functional.
pub fn j_lambda_for(functional: Functional, s: DeterministicStrategy, ic: InputConditional) -> f64 {
    match functional {
        Functional::Ch => j_lambda(s, ic),
        Functional::Chsh => j_lambda_chsh(s, ic),
    }
}

/// Best deterministic response to an input distribution: the maximizer of
/// `J_λ` over [`REDUCED_CH_STRATEGIES`]. Ties break toward the lowest
/// strategy position, so the result is deterministic.
pub fn optimal_local_response(ic: InputConditional) -> (DeterministicStrategy, f64) {
    let mut best = (
        REDUCED_CH_STRATEGIES[0],
        j_lambda(REDUCED_CH_STRATEGIES[0], ic),
    );
    for &s in &REDUCED_CH_STRATEGIES[1..] {
        let v = j_lambda(s, ic);
        if v > best.1 {
            best = (s, v);
        }
    }
    best
}

/// One weighted component of an attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "q")]
    pub weight: f64,
    #[serde(rename = "p")]
    pub inputs: AtomInputs,
    #[serde(rename = "s")]
    pub outputs: DeterministicStrategy,
}

impl Atom {
    pub fn new(weight: f64, inputs: impl Into<AtomInputs>, outputs: DeterministicStrategy) -> Self {
        Self {
            weight,
            inputs: inputs.into(),
            outputs,
        }
    }
}

/// A complete attack: weighted atoms of (input distribution, output rule).
///
/// Construction only enforces per-atom well-formedness; weight normalization,
/// the averaging constraint, and box constraints are checked by
/// [`validate_ensemble`] so that defective ensembles can be loaded and
/// reported on rather than rejected opaquely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhvEnsemble {
    pub atoms: Vec<Atom>,
}

impl LhvEnsemble {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    /// Single-atom ensemble with uniform inputs.
    pub fn single(outputs: DeterministicStrategy) -> Self {
        Self::new(vec![Atom::new(1.0, InputConditional::uniform(), outputs)])
    }

    pub fn weight_sum(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// `Σ_λ q(λ) p_i(λ)` for setting index `i = 2x+y`.
    pub fn moment(&self, i: usize) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * a.inputs.conditional().as_array()[i])
            .sum()
    }

    /// `4 Σ_λ q(λ) J_λ` without checking the averaging constraint.
    ///
    /// Only meaningful as a Bell value when the constraint holds; exposed
    /// because the merge lemma preserves this sum for arbitrary ensembles.
    pub fn weighted_bell_sum(&self, functional: Functional) -> f64 {
        4.0 * self
            .atoms
            .iter()
            .map(|a| a.weight * j_lambda_for(functional, a.outputs, a.inputs.conditional()))
            .sum::<f64>()
    }

    pub fn is_fully_factorized(&self) -> bool {
        self.atoms.iter().all(|a| a.inputs.is_factorized())
    }
}

/// Bell value `4 Σ_λ q(λ) J_λ` of an ensemble.
///
/// Errors if the averaging constraint `Σ_λ q(λ) p_i(λ) = 1/4` fails at any
/// setting index (within [`AVG_TOL`]); the derivation of the ensemble formula
/// assumes it.
pub fn ensemble_bell_value(e: &LhvEnsemble, functional: Functional) -> Result<f64> {
    for i in 0..4 {
        let m = e.moment(i);
        if (m - 0.25).abs() > AVG_TOL {
            return Err(Error::AveragingViolated { setting: i, sum: m });
        }
    }
    Ok(e.weighted_bell_sum(functional))
}

/// Upper and lower bounds `Q ≤ p(x,y|λ) ≤ P` on the input randomness.
///
/// Full randomness is `P = Q = 1/4`; the symmetric deviation case is
/// `P = 1/4 + δ, Q = 1/4 − δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomnessBounds {
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "Q")]
    pub q: f64,
}

impl RandomnessBounds {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !p.is_finite() || !q.is_finite() {
            return Err(Error::InfeasibleBounds("P and Q must be finite".into()));
        }
        if q < -PROB_TOL {
            return Err(Error::InfeasibleBounds(format!("Q = {q} is negative")));
        }
        if q > 0.25 + PROB_TOL {
            return Err(Error::InfeasibleBounds(format!("Q = {q} exceeds 1/4")));
        }
        if p < 0.25 - PROB_TOL {
            return Err(Error::InfeasibleBounds(format!("P = {p} is below 1/4")));
        }
        if p > 1.0 + PROB_TOL {
            return Err(Error::InfeasibleBounds(format!("P = {p} exceeds 1")));
        }
        Ok(Self { p, q })
    }

    /// Symmetric bounds `P = 1/4 + δ`, `Q = 1/4 − δ`.
    pub fn from_delta(delta: f64) -> Result<Self> {
        if !(0.0..=0.25).contains(&delta) {
            return Err(Error::DeltaOutOfRange(delta));
        }
        Self::new(0.25 + delta, 0.25 - delta)
    }

    /// The deviation δ when the bounds are symmetric around 1/4.
    pub fn delta(&self) -> Option<f64> {
        let d = self.p - 0.25;
        if ((0.25 - self.q) - d).abs() <= PROB_TOL {
            Some(d)
        } else {
            None
        }
    }

    /// Largest value any `p(x,y|λ)` can actually take: `min(P, 1 − 3Q)`.
    ///
    /// With three entries already at the floor Q, the fourth cannot exceed
    /// `1 − 3Q`, so a nominal P above that is unattainable.
    pub fn effective_p(&self) -> f64 {
        self.p.min(1.0 - 3.0 * self.q)
    }

    /// Whether the bounds force the unique uniform input distribution.
    pub fn is_degenerate(&self) -> bool {
        self.p - 0.25 <= 1e-9 || 0.25 - self.q <= 1e-9
    }
}

/// A single violated constraint found by [`validate_ensemble`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: ConstraintKind,
    /// Atom index, when the violation is per-atom.
    pub atom: Option<usize>,
    /// Setting index `2x+y`, when the violation is per-setting.
    pub setting: Option<usize>,
    /// How far past the constraint the value lies.
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    WeightNegative,
    WeightSum,
    InputNormalization,
    Averaging,
    BoxLower,
    BoxUpper,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self.constraint {
            ConstraintKind::WeightNegative => "negative weight",
            ConstraintKind::WeightSum => "weights do not sum to 1",
            ConstraintKind::InputNormalization => "input probabilities do not sum to 1",
            ConstraintKind::Averaging => "averaging constraint",
            ConstraintKind::BoxLower => "input probability below Q",
            ConstraintKind::BoxUpper => "input probability above effective P",
        };
        write!(f, "{name} (by {:.3e})", self.magnitude)?;
        if let Some(a) = self.atom {
            write!(f, " at atom {a}")?;
        }
        if let Some(s) = self.setting {
            write!(f, " setting {s}")?;
        }
        Ok(())
    }
}

/// Result of checking an ensemble against randomness bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            write!(f, "ok")
        } else {
            for v in &self.violations {
                writeln!(f, "  - {v}")?;
            }
            Ok(())
        }
    }
}

/// Check the four constraint families on an ensemble at the given bounds:
/// weight normalization, per-atom input normalization, the averaging
/// constraint, and the per-entry box `Q ≤ p_i(λ) ≤ min(P, 1−3Q)`.
pub fn validate_ensemble(e: &LhvEnsemble, rb: &RandomnessBounds) -> ValidationReport {
    let mut violations = Vec::new();
    for (i, atom) in e.atoms.iter().enumerate() {
        if atom.weight < 0.0 {
            violations.push(Violation {
                constraint: ConstraintKind::WeightNegative,
                atom: Some(i),
                setting: None,
                magnitude: -atom.weight,
            });
        }
        let ic = atom.inputs.conditional().as_array();
        let sum: f64 = ic.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            violations.push(Violation {
                constraint: ConstraintKind::InputNormalization,
                atom: Some(i),
                setting: None,
                magnitude: (sum - 1.0).abs(),
            });
        }
        let p_eff = rb.effective_p();
        for (s, &v) in ic.iter().enumerate() {
            if v < rb.q - AVG_TOL {
                violations.push(Violation {
                    constraint: ConstraintKind::BoxLower,
                    atom: Some(i),
                    setting: Some(s),
                    magnitude: rb.q - v,
                });
            }
            if v > p_eff + AVG_TOL {
                violations.push(Violation {
                    constraint: ConstraintKind::BoxUpper,
                    atom: Some(i),
                    setting: Some(s),
                    magnitude: v - p_eff,
                });
            }
        }
    }
    let wsum = e.weight_sum();
    if (wsum - 1.0).abs() > PROB_TOL {
        violations.push(Violation {
            constraint: ConstraintKind::WeightSum,
            atom: None,
            setting: None,
            magnitude: (wsum - 1.0).abs(),
        });
    }
    for s in 0..4 {
        let m = e.moment(s);
        if (m - 0.25).abs() > AVG_TOL {
            violations.push(Violation {
                constraint: ConstraintKind::Averaging,
                atom: None,
                setting: Some(s),
                magnitude: (m - 0.25).abs(),
            });
        }
    }
    ValidationReport { violations }
}

/// Combine atoms that share an output strategy into one atom with summed
/// weight and the weight-averaged input distribution.
///
/// Leaves the Bell value and the input moments unchanged (the per-λ
/// functionals are linear in the input distribution) and is idempotent.
/// Zero-weight groups are dropped; merged inputs become general conditionals
/// even if the sources were factorizable, since a mixture of products is not
/// a product. Output atoms are ordered by strategy index.
pub fn merge_equivalent_lambdas(e: &LhvEnsemble) -> LhvEnsemble {
    struct Group {
        count: usize,
        weight: f64,
        weighted_ic: [f64; 4],
        first: Atom,
    }
    let mut groups: [Option<Group>; 16] = std::array::from_fn(|_| None);
    for atom in &e.atoms {
        let slot = &mut groups[atom.outputs.index() as usize];
        let ic = atom.inputs.conditional().as_array();
        match slot {
            None => {
                *slot = Some(Group {
                    count: 1,
                    weight: atom.weight,
                    weighted_ic: ic.map(|v| atom.weight * v),
                    first: *atom,
                })
            }
            Some(g) => {
                g.count += 1;
                g.weight += atom.weight;
                for (acc, v) in g.weighted_ic.iter_mut().zip(ic) {
                    *acc += atom.weight * v;
                }
            }
        }
    }
    let mut atoms = Vec::new();
    for (index, group) in groups.into_iter().enumerate() {
        let Some(g) = group else { continue };
        // A singleton group passes through untouched so its factorized form
        // (if any) survives.
        if g.count == 1 {
            atoms.push(g.first);
            continue;
        }
        if g.weight == 0.0 {
            continue;
        }
        let mean = g.weighted_ic.map(|v| v / g.weight);
        let ic = InputConditional::new(mean).unwrap_or_else(|_| {
            // Weighted means of valid conditionals are valid up to rounding;
            // renormalize defensively.
            let s: f64 = mean.iter().sum();
            InputConditional {
                p: mean.map(|v| v / s),
            }
        });
        atoms.push(Atom::new(
            g.weight,
            ic,
            DeterministicStrategy::from_index(index as u8),
        ));
    }
    LhvEnsemble::new(atoms)
}

/// The observed distribution induced by an ensemble:
/// `p̃(a,b|x,y) = Σ_λ [outputs match] p(x,y|λ) q(λ) / p(x,y)`.
pub fn induced_joint(e: &LhvEnsemble) -> Result<JointConditional> {
    let mut setting_prob = [0.0f64; 4];
    for atom in &e.atoms {
        let ic = atom.inputs.conditional().as_array();
        for i in 0..4 {
            setting_prob[i] += atom.weight * ic[i];
        }
    }
    for x in 0..2u8 {
        for y in 0..2u8 {
            if setting_prob[(2 * x + y) as usize] <= 0.0 {
                return Err(Error::ZeroProbabilitySetting { x, y });
            }
        }
    }
    let mut table = [0.0f64; 16];
    for atom in &e.atoms {
        let ic = atom.inputs.conditional();
        for x in 0..2u8 {
            for y in 0..2u8 {
                let a = atom.outputs.alice_output(x);
                let b = atom.outputs.bob_output(y);
                let i = (a as usize) << 3 | (b as usize) << 2 | (x as usize) << 1 | y as usize;
                table[i] += atom.weight * ic.prob(x, y) / setting_prob[(2 * x + y) as usize];
            }
        }
    }
    JointConditional::new(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ic(p: [f64; 4]) -> InputConditional {
        InputConditional::new(p).unwrap()
    }

    /// The closed-form J_λ per deterministic strategy (the 4×4 table of the
    /// CH per-λ values), used as an independent check on `j_lambda`.
    fn table_closed_form(s: DeterministicStrategy, p: [f64; 4]) -> f64 {
        let [p0, p1, p2, p3] = p;
        let a = (s.alice_bit(0), s.alice_bit(1));
        let b = (s.bob_bit(0), s.bob_bit(1));
        match (a, b) {
            ((0, 0), (0, 0)) | ((0, 0), (0, 1)) => 0.0,
            ((0, 0), (1, 0)) | ((0, 0), (1, 1)) => -(p0 + p2) / 2.0,
            ((0, 1), (0, 0)) => 0.0,
            ((0, 1), (0, 1)) => -p3,
            ((0, 1), (1, 0)) => (p2 - p0) / 2.0,
            ((0, 1), (1, 1)) => (p2 - p0) / 2.0 - p3,
            ((1, 0), (0, 0)) => -(p0 + p1) / 2.0,
            ((1, 0), (0, 1)) => (p1 - p0) / 2.0,
            ((1, 0), (1, 0)) => -(p1 + p2) / 2.0,
            ((1, 0), (1, 1)) => (p1 - p2) / 2.0,
            ((1, 1), (0, 0)) => -(p0 + p1) / 2.0,
            ((1, 1), (0, 1)) => (p1 - p0) / 2.0 - p3,
            ((1, 1), (1, 0)) => (p2 - p1) / 2.0,
            ((1, 1), (1, 1)) => (p2 + p1) / 2.0 - p3,
            _ => unreachable!(),
        }
    }

    #[test]
    fn j_lambda_matches_closed_forms() {
        let samples = [
            [0.25, 0.25, 0.25, 0.25],
            [0.125, 0.375, 0.375, 0.125],
            [0.0, 0.375, 0.375, 0.25],
            [0.1, 0.2, 0.3, 0.4],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.25, 0.25],
        ];
        for p in samples {
            for s in DeterministicStrategy::all() {
                let got = j_lambda(s, ic(p));
                let want = table_closed_form(s, p);
                assert!(
                    (got - want).abs() <= 1e-15,
                    "strategy {:?} at {p:?}: {got} vs {want}",
                    <[u8; 4]>::from(s)
                );
            }
        }
    }

    #[test]
    fn j_lambda_examples() {
        assert_eq!(
            j_lambda(strat(0, 1, 1, 0), InputConditional::uniform()),
            0.0
        );
        // (a0,a1) = (0,0) rows are 0 or −(p0+p2)/2.
        let p = ic([0.1, 0.2, 0.3, 0.4]);
        for b0 in 0..2u8 {
            for b1 in 0..2u8 {
                let v = j_lambda(strat(0, 0, b0, b1), p);
                assert!(v == 0.0 || (v + 0.2).abs() < 1e-15);
            }
        }
        let v = j_lambda(strat(1, 1, 1, 1), ic([0.125, 0.375, 0.375, 0.125]));
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn chsh_j_lambda_reduced_forms() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let expect = [
            p[0] + p[1] + p[2] - p[3],
            p[0] + p[1] + p[3] - p[2],
            p[0] + p[2] + p[3] - p[1],
            p[1] + p[2] + p[3] - p[0],
        ];
        for (s, want) in REDUCED_CHSH_STRATEGIES.iter().zip(expect) {
            assert!((j_lambda_chsh(*s, ic(p)) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn optimal_response_uniform_is_zero() {
        let (_, v) = optimal_local_response(InputConditional::uniform());
        assert_eq!(v, 0.0);
    }

    #[test]
    fn optimal_response_example() {
        let (s, v) = optimal_local_response(ic([0.0, 0.375, 0.375, 0.25]));
        assert!((v - 3.0 / 16.0).abs() < 1e-15);
        // Tie between the first two candidates breaks to the first.
        assert_eq!(s, strat(0, 1, 1, 0));
    }

    #[test]
    fn optimal_response_dominates_all_sixteen() {
        let samples = [
            [0.3, 0.3, 0.2, 0.2],
            [0.05, 0.45, 0.45, 0.05],
            [0.25, 0.3, 0.25, 0.2],
            [0.0, 0.0, 0.5, 0.5],
        ];
        for p in samples {
            let (_, v) = optimal_local_response(ic(p));
            let brute = DeterministicStrategy::all()
                .map(|s| j_lambda(s, ic(p)))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((v - brute).abs() < 1e-15, "at {p:?}: {v} vs brute {brute}");
        }
    }

    #[test]
    fn merge_weighted_mean_example() {
        let s = strat(1, 1, 1, 1);
        let e = LhvEnsemble::new(vec![
            Atom::new(0.3, ic([0.0, 0.5, 0.25, 0.25]), s),
            Atom::new(0.7, ic([0.25, 0.25, 0.25, 0.25]), s),
        ]);
        let merged = merge_equivalent_lambdas(&e);
        assert_eq!(merged.atoms.len(), 1);
        assert!((merged.atoms[0].weight - 1.0).abs() < 1e-15);
        let got = merged.atoms[0].inputs.conditional().as_array();
        let want = [0.175, 0.325, 0.25, 0.25];
        for i in 0..4 {
            assert!((got[i] - want[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn merge_preserves_value_and_moments() {
        let e = LhvEnsemble::new(vec![
            Atom::new(0.2, ic([0.4, 0.2, 0.2, 0.2]), strat(0, 1, 1, 0)),
            Atom::new(0.3, ic([0.1, 0.3, 0.4, 0.2]), strat(0, 1, 1, 0)),
            Atom::new(0.5, ic([0.25, 0.25, 0.3, 0.2]), strat(1, 1, 1, 1)),
        ]);
        let merged = merge_equivalent_lambdas(&e);
        assert_eq!(merged.atoms.len(), 2);
        for f in [Functional::Ch, Functional::Chsh] {
            assert!((merged.weighted_bell_sum(f) - e.weighted_bell_sum(f)).abs() < 1e-12);
        }
        for i in 0..4 {
            assert!((merged.moment(i) - e.moment(i)).abs() < 1e-15);
        }
        let twice = merge_equivalent_lambdas(&merged);
        assert_eq!(twice, merged);
    }

    #[test]
    fn single_uniform_atom_respects_classical_bounds() {
        for s in DeterministicStrategy::all() {
            let e = LhvEnsemble::single(s);
            assert!(ensemble_bell_value(&e, Functional::Ch).unwrap() <= 0.0);
            assert!(ensemble_bell_value(&e, Functional::Chsh).unwrap() <= 2.0);
        }
    }

    #[test]
    fn bell_value_requires_averaging() {
        let e = LhvEnsemble::new(vec![Atom::new(
            1.0,
            ic([0.4, 0.2, 0.2, 0.2]),
            strat(0, 1, 1, 0),
        )]);
        match ensemble_bell_value(&e, Functional::Ch) {
            Err(Error::AveragingViolated { setting: 0, .. }) => {}
            other => panic!("expected AveragingViolated at setting 0, got {other:?}"),
        }
    }

    #[test]
    fn induced_joint_all_zeros() {
        let e = LhvEnsemble::single(strat(1, 1, 1, 1));
        let d = induced_joint(&e).unwrap();
        for x in 0..2u8 {
            for y in 0..2u8 {
                assert_eq!(d.p(0, 0, x, y), 1.0);
            }
        }
    }

    #[test]
    fn uniform_input_ensembles_are_no_signaling() {
        let e = LhvEnsemble::new(vec![
            Atom::new(0.4, InputConditional::uniform(), strat(0, 1, 1, 0)),
            Atom::new(0.6, InputConditional::uniform(), strat(1, 0, 1, 1)),
        ]);
        let d = induced_joint(&e).unwrap();
        assert!(crate::bell::is_no_signaling(&d, PROB_TOL).passed);
    }

    #[test]
    fn validation_flags_box_and_weight_violations() {
        let rb = RandomnessBounds::new(0.3, 0.1).unwrap();
        let bad_box = LhvEnsemble::new(vec![Atom::new(
            1.0,
            ic([0.31, 0.19, 0.25, 0.25]),
            strat(0, 1, 1, 0),
        )]);
        let report = validate_ensemble(&bad_box, &rb);
        assert!(report
            .violations
            .iter()
            .any(|v| v.constraint == ConstraintKind::BoxUpper));

        let bad_weights = LhvEnsemble::new(vec![Atom::new(
            0.9,
            InputConditional::uniform(),
            strat(0, 1, 1, 0),
        )]);
        let report = validate_ensemble(&bad_weights, &rb);
        assert!(report
            .violations
            .iter()
            .any(|v| v.constraint == ConstraintKind::WeightSum));
    }

    #[test]
    fn bounds_validation() {
        assert!(RandomnessBounds::new(0.3, 0.3).is_err());
        assert!(RandomnessBounds::new(0.2, 0.1).is_err());
        assert!(RandomnessBounds::new(1.1, 0.0).is_err());
        assert!(RandomnessBounds::new(0.3, -0.1).is_err());
        let rb = RandomnessBounds::new(0.9, 0.1).unwrap();
        assert!((rb.effective_p() - 0.7).abs() < 1e-15);
        assert!(RandomnessBounds::new(0.25, 0.25).unwrap().is_degenerate());
    }

    #[test]
    fn ensemble_json_round_trip() {
        let e = LhvEnsemble::new(vec![
            Atom::new(0.5, ic([0.25, 0.25, 0.3, 0.2]), strat(0, 1, 1, 0)),
            Atom::new(
                0.5,
                FactorizedInputConditional::new(0.4, 0.5).unwrap(),
                strat(1, 1, 1, 1),
            ),
        ]);
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.contains("\"q\"") && json.contains("\"p\"") && json.contains("\"s\""));
        assert!(json.contains("\"alpha\""));
        let back: LhvEnsemble = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
    }
}
