//! Piecewise-optimal Bell values under partially random inputs, and the
//! attacks that achieve them.
//!
//! Four condition combinations are covered, depending on whether the observed
//! distribution may be signaling and whether the per-λ input distributions
//! must factorize across the parties:
//!
//! | condition          | optimal CH value                                        |
//! |--------------------|---------------------------------------------------------|
//! | general            | `5/2(4P−1)`, `4P−2Q−1/2`, `1−4Q` by region              |
//! | factorizable       | `4P−1` if `P+Q ≤ 1/2`, else `1−4Q`                      |
//! | ns                 | `6P−3/2` if `3P+Q ≤ 1`, else `1/2−2Q`                   |
//! | ns-factorizable    | `2P−1/2` if `P+Q ≤ 1/2`, else `1/2−2Q`                  |
//!
//! The CHSH optima are `24P−4`/`4−8Q` (general) and `8P`/`4−8Q`
//! (factorizable); under no-signaling the CH and CHSH values are linked by
//! `J_CH = (J_CHSH − 2)/4`, which is how the `ns` rows above arise.
//!
//! [`build_attack`] returns explicit ensembles meeting the bounds; every
//! construction is validated against [`crate::oracle`] by the test suite.

use serde::{Deserialize, Serialize};

use crate::lhv::{
    Atom, DeterministicStrategy, FactorizedInputConditional, Functional, InputConditional,
    LhvEnsemble, RandomnessBounds, REDUCED_CHSH_STRATEGIES, REDUCED_CH_STRATEGIES,
};
use crate::{Error, Result};

/// Which structural assumptions the adversary must respect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConditionFlags {
    /// The induced observed distribution must be no-signaling.
    pub no_signaling: bool,
    /// Each λ's input distribution must factorize across the parties.
    pub factorizable: bool,
}

impl ConditionFlags {
    pub const GENERAL: Self = Self {
        no_signaling: false,
        factorizable: false,
    };
    pub const FACTORIZABLE: Self = Self {
        no_signaling: false,
        factorizable: true,
    };
    pub const NO_SIGNALING: Self = Self {
        no_signaling: true,
        factorizable: false,
    };
    pub const NS_FACTORIZABLE: Self = Self {
        no_signaling: true,
        factorizable: true,
    };

    pub const ALL: [Self; 4] = [
        Self::GENERAL,
        Self::FACTORIZABLE,
        Self::NO_SIGNALING,
        Self::NS_FACTORIZABLE,
    ];

    pub fn label(&self) -> &'static str {
        match (self.no_signaling, self.factorizable) {
            (false, false) => "general",
            (false, true) => "factorizable",
            (true, false) => "ns",
            (true, true) => "ns-factorizable",
        }
    }
}

impl std::fmt::Display for ConditionFlags {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for ConditionFlags {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Self::GENERAL),
            "factorizable" => Ok(Self::FACTORIZABLE),
            "ns" => Ok(Self::NO_SIGNALING),
            "ns-factorizable" => Ok(Self::NS_FACTORIZABLE),
            other => Err(Error::InvalidParameter(format!(
                "unknown condition {other:?} (expected general | factorizable | ns | ns-factorizable)"
            ))),
        }
    }
}

impl Serialize for ConditionFlags {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for ConditionFlags {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A closed-form optimum together with the active piecewise region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub value: f64,
    /// Region predicate that produced the value; "boundary" when two closed
    /// regions overlap (their formulas agree there).
    pub branch: &'static str,
    #[serde(flatten)]
    pub bounds_used: RandomnessBounds,
    pub condition: ConditionFlags,
}

/// Optimal CH value for local models at the given bounds and condition.
pub fn ch_bound(cond: ConditionFlags, rb: RandomnessBounds) -> BoundResult {
    let (p, q) = (rb.p, rb.q);
    let (value, branch) = match (cond.no_signaling, cond.factorizable) {
        (false, false) => {
            let lo = 3.0 * p + q <= 1.0;
            let hi = 2.0 * p + q >= 0.75;
            match (lo, hi) {
                (true, true) => (2.5 * (4.0 * p - 1.0), "boundary"),
                (true, false) => (2.5 * (4.0 * p - 1.0), "3P+Q<=1"),
                (false, true) => (1.0 - 4.0 * q, "2P+Q>=3/4"),
                (false, false) => (4.0 * p - 2.0 * q - 0.5, "middle"),
            }
        }
        (false, true) => {
            if p + q <= 0.5 {
                (4.0 * p - 1.0, "P+Q<=1/2")
            } else {
                (1.0 - 4.0 * q, "P+Q>1/2")
            }
        }
        (true, false) => {
            let s = 3.0 * p + q;
            if s == 1.0 {
                (6.0 * p - 1.5, "boundary")
            } else if s < 1.0 {
                (6.0 * p - 1.5, "3P+Q<=1")
            } else {
                (0.5 - 2.0 * q, "3P+Q>=1")
            }
        }
        (true, true) => {
            if p + q <= 0.5 {
                (2.0 * p - 0.5, "P+Q<=1/2")
            } else {
                (0.5 - 2.0 * q, "P+Q>1/2")
            }
        }
    };
    BoundResult {
        value,
        branch,
        bounds_used: rb,
        condition: cond,
    }
}

/// Optimal CHSH value for local models. Only the factorizable flag matters:
/// the CHSH program has no extra no-signaling variant (the no-signaling CH
/// results are derived from these via `J_CH = (J_CHSH − 2)/4`).
pub fn chsh_bound(cond: ConditionFlags, rb: RandomnessBounds) -> BoundResult {
    let (p, q) = (rb.p, rb.q);
    let (value, branch) = if cond.factorizable {
        if p + q <= 0.5 {
            (8.0 * p, "P+Q<=1/2")
        } else {
            (4.0 - 8.0 * q, "P+Q>1/2")
        }
    } else {
        let s = 3.0 * p + q;
        if s == 1.0 {
            (24.0 * p - 4.0, "boundary")
        } else if s < 1.0 {
            (24.0 * p - 4.0, "3P+Q<=1")
        } else {
            (4.0 - 8.0 * q, "3P+Q>=1")
        }
    };
    BoundResult {
        value,
        branch,
        bounds_used: rb,
        condition: cond,
    }
}

/// Optimal CH value under the symmetric quantification `P = 1/4 + δ`,
/// `Q = 1/4 − δ`: `4δ` for signaling conditions, `2δ` under no-signaling.
/// The factorizable flag does not change the δ-parametrized optimum.
pub fn ch_bound_delta(cond: ConditionFlags, delta: f64) -> Result<f64> {
    if !(0.0..=0.25).contains(&delta) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    Ok(if cond.no_signaling {
        2.0 * delta
    } else {
        4.0 * delta
    })
}

/// The affine substitution that removes the lower bound Q.
///
/// `p'_i = (p_i − Q)/(1 − 4Q)` maps the box `[Q, P]` onto `[0, P']` with
/// `P' = (P − Q)/(1 − 4Q)` and preserves the averaging constraint, so a
/// `Q = 0` solution at `P'` pulls back to the general case. The Bell values
/// relate by `J(P,Q) = scale · J'(P',0) + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroQRescale {
    /// `Q = 1/4`: the inputs are forced uniform and the substitution is
    /// singular; callers should use the classical bound directly.
    Degenerate,
    Affine {
        p_prime: f64,
        /// `1 − 4Q`.
        scale: f64,
        /// `0` for CH, `8Q` for CHSH.
        offset: f64,
    },
}

pub fn rescale_to_zero_q(rb: RandomnessBounds, functional: Functional) -> ZeroQRescale {
    let scale = 1.0 - 4.0 * rb.q;
    if scale <= 1e-9 {
        return ZeroQRescale::Degenerate;
    }
    let offset = match functional {
        Functional::Ch => 0.0,
        Functional::Chsh => 8.0 * rb.q,
    };
    ZeroQRescale::Affine {
        p_prime: (rb.p - rb.q) / scale,
        scale,
        offset,
    }
}

/// Which critical quantity to invert out of a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    /// The P at which the small-Q branch reaches the target (`Q = 0`).
    PAtSmallQ,
    /// The Q at which the large-Q branch reaches the target (P saturated).
    QAtLargeP,
    /// The δ at which the symmetric δ-form reaches the target.
    Delta,
}

/// Invert the active branch of a closed form at a target Bell value.
///
/// Errors when the target is outside the range the branch can attain.
pub fn critical_threshold(cond: ConditionFlags, kind: ThresholdKind, j_target: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&j_target) || j_target == 0.0 {
        return Err(Error::TargetOutOfRange {
            target: j_target,
            lo: 0.0,
            hi: 1.0,
            branch: "any",
        });
    }
    let reject = |hi: f64, branch: &'static str| Error::TargetOutOfRange {
        target: j_target,
        lo: 0.0,
        hi,
        branch,
    };
    match kind {
        ThresholdKind::PAtSmallQ => match (cond.no_signaling, cond.factorizable) {
            (false, false) => (j_target <= 5.0 / 6.0)
                .then(|| (1.0 + 0.4 * j_target) / 4.0)
                .ok_or(reject(5.0 / 6.0, "5/2(4P-1)")),
            (false, true) => Ok((1.0 + j_target) / 4.0),
            (true, false) => (j_target <= 0.5)
                .then(|| (j_target + 1.5) / 6.0)
                .ok_or(reject(0.5, "6P-3/2")),
            (true, true) => (j_target <= 0.5)
                .then(|| (j_target + 0.5) / 2.0)
                .ok_or(reject(0.5, "2P-1/2")),
        },
        ThresholdKind::QAtLargeP => {
            if cond.no_signaling {
                (j_target < 0.5)
                    .then(|| (0.5 - j_target) / 2.0)
                    .ok_or(reject(0.5, "1/2-2Q"))
            } else {
                Ok((1.0 - j_target) / 4.0)
            }
        }
        ThresholdKind::Delta => {
            if cond.no_signaling {
                (j_target <= 0.5)
                    .then(|| j_target / 2.0)
                    .ok_or(reject(0.5, "2delta"))
            } else {
                Ok(j_target / 4.0)
            }
        }
    }
}

/// An explicit achieving ensemble for one condition at one set of bounds.
#[derive(Debug, Clone)]
pub struct Attack {
    pub ensemble: LhvEnsemble,
    /// The functional the construction targets: CH for the signaling
    /// conditions, CHSH for the no-signaling ones.
    pub functional: Functional,
    /// The closed-form optimum in `functional` that the ensemble achieves.
    pub expected: BoundResult,
    /// For no-signaling conditions, the CH value implied via
    /// `J_CH = (J_CHSH − 2)/4`. The symmetrized ensemble attains it exactly.
    pub implied_ch: Option<f64>,
    pub construction: &'static str,
}

impl Attack {
    /// The ensemble's exact Bell value in the targeted functional.
    pub fn achieved(&self) -> Result<f64> {
        crate::lhv::ensemble_bell_value(&self.ensemble, self.functional)
    }
}

type RawAtom = (f64, [f64; 4], DeterministicStrategy);

/// CH attack at `Q = 0`, upper bound `p`, per the three P regimes.
fn ch_attack_atoms_zero_q(p: f64) -> Vec<RawAtom> {
    let s = REDUCED_CH_STRATEGIES;
    if 3.0 * p <= 1.0 + 1e-12 {
        // Three entries saturate P; the slot whose coefficient vanishes in
        // the grouped objective absorbs the rest. Splitting the first two
        // weights evenly solves the averaging equations.
        let r = 1.0 - 3.0 * p;
        let zero_slot = [0usize, 0, 2, 1, 3];
        let weights = [0.125, 0.125, 0.25, 0.25, 0.25];
        (0..5)
            .map(|j| {
                let mut ic = [p; 4];
                ic[zero_slot[j]] = r;
                (weights[j], ic, s[j])
            })
            .collect()
    } else if p >= 0.375 - 1e-12 {
        // The algebraic maximum J = 1 is reachable; only three strategies
        // carry weight.
        vec![
            (1.0 / 3.0, [0.25, 0.375, 0.0, 0.375], s[2]),
            (1.0 / 3.0, [0.25, 0.0, 0.375, 0.375], s[3]),
            (1.0 / 3.0, [0.25, 0.375, 0.375, 0.0], s[4]),
        ]
    } else {
        let r = 1.0 - 2.0 * p;
        let q12 = 0.5 - 1.0 / (8.0 * r);
        let q34 = 1.0 / (8.0 * r) + 1.0 / (8.0 * p) - 0.5;
        let q5 = 1.0 - 1.0 / (4.0 * p);
        vec![
            (q12, [0.0, r, p, p], s[0]),
            (q12, [0.0, p, r, p], s[1]),
            (q34, [r, p, 0.0, p], s[2]),
            (q34, [r, 0.0, p, p], s[3]),
            (q5, [r, p, p, 0.0], s[4]),
        ]
    }
}

/// CHSH attack at `Q = 0`: four atoms, each placing its strategy's negative
/// sign on the entry that stays small.
fn chsh_attack_atoms_zero_q(p: f64) -> Vec<RawAtom> {
    let minus_slot = [3usize, 2, 1, 0];
    let (fill, small) = if 3.0 * p <= 1.0 + 1e-12 {
        (p, 1.0 - 3.0 * p)
    } else {
        (1.0 / 3.0, 0.0)
    };
    REDUCED_CHSH_STRATEGIES
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let mut ic = [fill; 4];
            ic[minus_slot[j]] = small;
            (0.25, ic, s)
        })
        .collect()
}

fn atoms_from_raw(raw: Vec<RawAtom>, scale: f64, shift: f64) -> Result<Vec<Atom>> {
    raw.into_iter()
        .map(|(w, ic, s)| {
            let mapped = ic.map(|v| scale * v + shift);
            Ok(Atom::new(w, InputConditional::new(mapped)?, s))
        })
        .collect()
}

fn uniform_singleton() -> Vec<Atom> {
    vec![Atom::new(
        1.0,
        InputConditional::uniform(),
        DeterministicStrategy::new(1, 1, 1, 1).unwrap(),
    )]
}

/// Nonfactorizable attack for the chosen functional, via the Q = 0
/// construction at `P' = (P−Q)/(1−4Q)` pulled back through the affine map
/// `p = (1−4Q)p' + Q`.
fn general_attack(rb: RandomnessBounds, functional: Functional) -> Result<Vec<Atom>> {
    match rescale_to_zero_q(rb, functional) {
        ZeroQRescale::Degenerate => Ok(uniform_singleton()),
        ZeroQRescale::Affine { p_prime, scale, .. } => {
            let raw = match functional {
                Functional::Ch => ch_attack_atoms_zero_q(p_prime),
                Functional::Chsh => chsh_attack_atoms_zero_q(p_prime),
            };
            atoms_from_raw(raw, scale, rb.q)
        }
    }
}

/// Factorizable attack: four product-input atoms at
/// `(α, β) ∈ {(1−2p̄, 1/2), (1/2, 1−2p̄), (2p̄, 1/2), (1/2, 2p̄)}` with
/// `p̄ = min(P, 1/2 − Q)`, each reaching the per-atom optimum while the
/// mixture averages to uniform settings.
fn factorizable_attack(rb: RandomnessBounds, functional: Functional) -> Result<Vec<Atom>> {
    let p_bar = rb.p.min(0.5 - rb.q);
    let fac = |alpha: f64, beta: f64| FactorizedInputConditional::new(alpha, beta);
    let low = fac(1.0 - 2.0 * p_bar, 0.5)?;
    let high = fac(2.0 * p_bar, 0.5)?;
    let atoms = match functional {
        Functional::Ch => {
            let s = REDUCED_CH_STRATEGIES;
            vec![
                Atom::new(0.25, low, s[0]),
                Atom::new(0.25, fac(0.5, 1.0 - 2.0 * p_bar)?, s[1]),
                Atom::new(0.25, high, s[2]),
                Atom::new(0.25, fac(0.5, 2.0 * p_bar)?, s[3]),
            ]
        }
        Functional::Chsh => {
            let s = REDUCED_CHSH_STRATEGIES;
            vec![
                Atom::new(0.25, high, s[0]),
                Atom::new(0.25, high, s[1]),
                Atom::new(0.25, low, s[2]),
                Atom::new(0.25, low, s[3]),
            ]
        }
    };
    Ok(atoms)
}

/// Double every atom with its output-flipped twin at half weight.
///
/// CHSH correlators are invariant under a global output flip, so the CHSH
/// value is unchanged, while both parties' output marginals become exactly
/// 1/2 -- the induced distribution turns no-signaling, and the CH value
/// becomes `(J_CHSH − 2)/4` on the nose.
fn symmetrize(ensemble: LhvEnsemble) -> LhvEnsemble {
    let atoms = ensemble
        .atoms
        .into_iter()
        .flat_map(|a| {
            [
                Atom {
                    weight: a.weight / 2.0,
                    inputs: a.inputs,
                    outputs: a.outputs,
                },
                Atom {
                    weight: a.weight / 2.0,
                    inputs: a.inputs,
                    outputs: a.outputs.complement(),
                },
            ]
        })
        .collect();
    LhvEnsemble::new(atoms)
}

/// Construct an ensemble achieving the closed-form optimum for `cond` at
/// `rb`.
///
/// Signaling conditions build CH-optimal ensembles directly. No-signaling
/// conditions build CHSH-optimal ensembles and symmetrize them, which forces
/// the induced distribution to be no-signaling; the CH optimum then follows
/// through the CH-CHSH equivalence and is achieved exactly.
pub fn build_attack(cond: ConditionFlags, rb: RandomnessBounds) -> Result<Attack> {
    let functional = if cond.no_signaling {
        Functional::Chsh
    } else {
        Functional::Ch
    };
    let base = if cond.factorizable {
        factorizable_attack(rb, functional)?
    } else {
        general_attack(rb, functional)?
    };
    let mut ensemble = LhvEnsemble::new(base);
    let (expected, implied_ch) = match functional {
        Functional::Ch => (ch_bound(cond, rb), None),
        Functional::Chsh => {
            ensemble = symmetrize(ensemble);
            let chsh = chsh_bound(cond, rb);
            let implied = (chsh.value - 2.0) / 4.0;
            (chsh, Some(implied))
        }
    };
    Ok(Attack {
        ensemble,
        functional,
        expected,
        implied_ch,
        construction: "analytic",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{ch_value, chsh_value, is_no_signaling, SingleCountConvention};
    use crate::lhv::{ensemble_bell_value, induced_joint, validate_ensemble};
    use crate::{CH_QUANTUM_BOUND, PROB_TOL};

    fn rb(p: f64, q: f64) -> RandomnessBounds {
        RandomnessBounds::new(p, q).unwrap()
    }

    #[test]
    fn ch_bound_examples() {
        let b = ch_bound(ConditionFlags::GENERAL, rb(0.25, 0.25));
        assert_eq!(b.value, 0.0);
        assert_eq!(b.branch, "boundary");

        let b = ch_bound(ConditionFlags::GENERAL, rb(0.3, 0.05));
        assert!((b.value - 0.5).abs() < 1e-12);
        assert_eq!(b.branch, "3P+Q<=1");

        let b = ch_bound(ConditionFlags::GENERAL, rb(0.34, 0.02));
        assert!((b.value - 0.82).abs() < 1e-12);
        assert_eq!(b.branch, "middle");

        let b = ch_bound(ConditionFlags::NO_SIGNALING, rb(0.3, 0.05));
        assert!((b.value - 0.3).abs() < 1e-12);

        let b = ch_bound(ConditionFlags::FACTORIZABLE, rb(0.3, 0.0));
        assert!((b.value - 0.2).abs() < 1e-12);

        let b = ch_bound(ConditionFlags::NS_FACTORIZABLE, rb(0.3, 0.0));
        assert!((b.value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn chsh_bound_examples() {
        let b = chsh_bound(ConditionFlags::GENERAL, rb(1.0 / 3.0, 0.0));
        assert!((b.value - 4.0).abs() < 1e-12);

        let b = chsh_bound(ConditionFlags::GENERAL, rb(0.25, 0.25));
        assert!((b.value - 2.0).abs() < 1e-12);

        let b = chsh_bound(ConditionFlags::FACTORIZABLE, rb(0.3, 0.1));
        assert!((b.value - 2.4).abs() < 1e-12);
        assert_eq!(b.branch, "P+Q<=1/2");
    }

    #[test]
    fn delta_examples() {
        assert_eq!(ch_bound_delta(ConditionFlags::GENERAL, 0.0).unwrap(), 0.0);
        let v = ch_bound_delta(ConditionFlags::GENERAL, 0.051).unwrap();
        assert!((v - 0.204).abs() < 1e-12);
        let v = ch_bound_delta(ConditionFlags::NO_SIGNALING, 0.104).unwrap();
        assert!((v - 0.208).abs() < 1e-12);
        assert!(ch_bound_delta(ConditionFlags::GENERAL, 0.3).is_err());
        assert!(ch_bound_delta(ConditionFlags::GENERAL, -0.01).is_err());
    }

    #[test]
    fn branch_continuity() {
        // 3P+Q = 1 between the first and middle branch of the general form.
        for q in [0.0f64, 0.05, 0.1] {
            let p = (1.0 - q) / 3.0;
            let first = 2.5 * (4.0 * p - 1.0);
            let middle = 4.0 * p - 2.0 * q - 0.5;
            assert!((first - middle).abs() < 1e-12);
        }
        // 2P+Q = 3/4 between the middle and the flat branch.
        for q in [0.0f64, 0.05, 0.1] {
            let p = (0.75 - q) / 2.0;
            let middle = 4.0 * p - 2.0 * q - 0.5;
            let flat = 1.0 - 4.0 * q;
            assert!((middle - flat).abs() < 1e-12);
        }
        // P+Q = 1/2 for the factorizable forms.
        for q in [0.0f64, 0.1, 0.2] {
            let p = 0.5 - q;
            assert!((4.0 * p - 1.0 - (1.0 - 4.0 * q)).abs() < 1e-12);
            assert!((2.0 * p - 0.5 - (0.5 - 2.0 * q)).abs() < 1e-12);
            assert!((8.0 * p - (4.0 - 8.0 * q)).abs() < 1e-12);
        }
        // 3P+Q = 1 for the no-signaling form; at P = 1/3, Q = 0 the general
        // form also meets its own boundary at 5/6.
        let b = ch_bound(ConditionFlags::GENERAL, rb(1.0 / 3.0, 0.0));
        assert!((b.value - 5.0 / 6.0).abs() < 1e-12);
        let ns = ch_bound(ConditionFlags::NO_SIGNALING, rb(1.0 / 3.0, 0.0));
        assert!((ns.value - 0.5).abs() < 1e-12);
        assert_eq!(ns.branch, "boundary");
    }

    #[test]
    fn rescale_examples() {
        match rescale_to_zero_q(rb(0.3, 0.1), Functional::Ch) {
            ZeroQRescale::Affine {
                p_prime,
                scale,
                offset,
            } => {
                assert!((p_prime - 1.0 / 3.0).abs() < 1e-12);
                assert!((scale - 0.6).abs() < 1e-12);
                assert_eq!(offset, 0.0);
            }
            ZeroQRescale::Degenerate => panic!("not degenerate"),
        }
        match rescale_to_zero_q(rb(0.4, 0.0), Functional::Chsh) {
            ZeroQRescale::Affine {
                p_prime,
                scale,
                offset,
            } => {
                assert_eq!(p_prime, 0.4);
                assert_eq!(scale, 1.0);
                assert_eq!(offset, 0.0);
            }
            ZeroQRescale::Degenerate => panic!("not degenerate"),
        }
        assert_eq!(
            rescale_to_zero_q(rb(0.25, 0.25), Functional::Ch),
            ZeroQRescale::Degenerate
        );
    }

    #[test]
    fn rescale_consistency_sweep() {
        // (1−4Q)·J'(P') must reproduce the direct closed form, for CH and
        // (with the 8Q offset) for CHSH, over 200 random feasible points.
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 200 {
            let p = rng.random_range(0.25..1.0);
            let q = rng.random_range(0.0..0.245);
            let bounds = RandomnessBounds::new(p, q).unwrap();
            let ZeroQRescale::Affine {
                p_prime,
                scale,
                offset,
            } = rescale_to_zero_q(bounds, Functional::Ch)
            else {
                continue;
            };
            let Ok(prime_bounds) = RandomnessBounds::new(p_prime.min(1.0), 0.0) else {
                continue;
            };
            assert_eq!(offset, 0.0);
            let direct = ch_bound(ConditionFlags::GENERAL, bounds).value;
            let via = scale * ch_bound(ConditionFlags::GENERAL, prime_bounds).value;
            assert!(
                (direct - via).abs() < 1e-12,
                "P={p} Q={q}: {direct} vs {via}"
            );
            let ZeroQRescale::Affine { scale, offset, .. } =
                rescale_to_zero_q(bounds, Functional::Chsh)
            else {
                continue;
            };
            let direct = chsh_bound(ConditionFlags::GENERAL, bounds).value;
            let via = scale * chsh_bound(ConditionFlags::GENERAL, prime_bounds).value + offset;
            assert!((direct - via).abs() < 1e-12);
            checked += 1;
        }
    }

    #[test]
    fn critical_thresholds_match_derivations() {
        let j = CH_QUANTUM_BOUND;
        let q_general =
            critical_threshold(ConditionFlags::GENERAL, ThresholdKind::QAtLargeP, j).unwrap();
        assert!((q_general - 0.19822).abs() < 5e-4);
        let q_ns =
            critical_threshold(ConditionFlags::NO_SIGNALING, ThresholdKind::QAtLargeP, j).unwrap();
        assert!((q_ns - 0.14645).abs() < 5e-4);

        let p_general =
            critical_threshold(ConditionFlags::GENERAL, ThresholdKind::PAtSmallQ, j).unwrap();
        assert!((p_general - 0.27071).abs() < 1e-5);
        let p_fac =
            critical_threshold(ConditionFlags::FACTORIZABLE, ThresholdKind::PAtSmallQ, j).unwrap();
        assert!((p_fac - 0.30178).abs() < 5e-4);
        let p_ns =
            critical_threshold(ConditionFlags::NO_SIGNALING, ThresholdKind::PAtSmallQ, j).unwrap();
        assert!((p_ns - 0.28452).abs() < 5e-4);
        let p_nsfac =
            critical_threshold(ConditionFlags::NS_FACTORIZABLE, ThresholdKind::PAtSmallQ, j)
                .unwrap();
        assert!((p_nsfac - 0.35355).abs() < 5e-4);

        let d_general =
            critical_threshold(ConditionFlags::GENERAL, ThresholdKind::Delta, j).unwrap();
        assert!((d_general - 0.05178).abs() < 5e-4);
        let d_ns =
            critical_threshold(ConditionFlags::NO_SIGNALING, ThresholdKind::Delta, j).unwrap();
        assert!((d_ns - 0.10355).abs() < 5e-4);
    }

    #[test]
    fn critical_threshold_rejects_unattainable_targets() {
        assert!(
            critical_threshold(ConditionFlags::GENERAL, ThresholdKind::PAtSmallQ, 0.9).is_err()
        );
        assert!(
            critical_threshold(ConditionFlags::NO_SIGNALING, ThresholdKind::QAtLargeP, 0.6)
                .is_err()
        );
        assert!(critical_threshold(ConditionFlags::GENERAL, ThresholdKind::Delta, 0.0).is_err());
        assert!(critical_threshold(ConditionFlags::GENERAL, ThresholdKind::Delta, 1.0).is_err());
    }

    #[test]
    fn attack_case1_structure() {
        let attack = build_attack(ConditionFlags::GENERAL, rb(1.0 / 3.0, 0.0)).unwrap();
        assert_eq!(attack.ensemble.atoms.len(), 5);
        let weights: Vec<f64> = attack.ensemble.atoms.iter().map(|a| a.weight).collect();
        for (w, want) in weights.iter().zip([0.125, 0.125, 0.25, 0.25, 0.25]) {
            assert!((w - want).abs() < 1e-12);
        }
        let achieved = attack.achieved().unwrap();
        assert!((achieved - 5.0 / 6.0).abs() < 1e-12);
        assert!(validate_ensemble(&attack.ensemble, &rb(1.0 / 3.0, 0.0)).passed());
    }

    #[test]
    fn general_attack_induces_signaling_distribution_with_matching_ch() {
        // The CH-optimal ensemble fakes its violation through signaling: the
        // induced distribution breaks no-signaling, yet its CH value under
        // the averaging convention still equals the ensemble value.
        let bounds = rb(1.0 / 3.0, 0.0);
        let attack = build_attack(ConditionFlags::GENERAL, bounds).unwrap();
        let dist = induced_joint(&attack.ensemble).unwrap();
        assert!(!is_no_signaling(&dist, PROB_TOL).passed);
        let ch = ch_value(&dist, SingleCountConvention::AverageOverOtherSetting);
        assert!((ch - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn attack_case2_value() {
        let attack = build_attack(ConditionFlags::GENERAL, rb(0.35, 0.0)).unwrap();
        let achieved = attack.achieved().unwrap();
        assert!((achieved - 0.9).abs() < 1e-12);
        assert!(validate_ensemble(&attack.ensemble, &rb(0.35, 0.0)).passed());
    }

    #[test]
    fn attack_case3_value() {
        let attack = build_attack(ConditionFlags::GENERAL, rb(0.375, 0.0)).unwrap();
        let achieved = attack.achieved().unwrap();
        assert!((achieved - 1.0).abs() < 1e-12);
        let weights: Vec<f64> = attack.ensemble.atoms.iter().map(|a| a.weight).collect();
        assert_eq!(weights.len(), 3);
        for w in weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chsh_attack_at_one_third() {
        let attack = build_attack(ConditionFlags::NO_SIGNALING, rb(1.0 / 3.0, 0.0)).unwrap();
        assert!((attack.achieved().unwrap() - 4.0).abs() < 1e-12);
        // Symmetrized: 8 atoms of weight 1/8.
        assert_eq!(attack.ensemble.atoms.len(), 8);
    }

    #[test]
    fn ns_attack_induces_no_signaling_distribution() {
        for bounds in [rb(0.3, 0.05), rb(0.5, 0.1), rb(0.3541, 0.1)] {
            let attack = build_attack(ConditionFlags::NO_SIGNALING, bounds).unwrap();
            let dist = induced_joint(&attack.ensemble).unwrap();
            assert!(is_no_signaling(&dist, PROB_TOL).passed);
            // CH value of the induced distribution equals the NS CH optimum.
            let ch = ch_value(&dist, SingleCountConvention::AverageOverOtherSetting);
            let want = ch_bound(ConditionFlags::NO_SIGNALING, bounds).value;
            assert!((ch - want).abs() < 1e-12, "at {bounds:?}: {ch} vs {want}");
            // And matches the CHSH value through the equivalence.
            let chsh = chsh_value(&dist);
            assert!((ch - (chsh - 2.0) / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn factorizable_attacks_hit_bounds_and_stay_factorized() {
        for bounds in [rb(0.3, 0.0), rb(0.3, 0.1), rb(0.45, 0.02), rb(0.3, 0.21)] {
            let attack = build_attack(ConditionFlags::FACTORIZABLE, bounds).unwrap();
            assert!(attack.ensemble.is_fully_factorized());
            let achieved = attack.achieved().unwrap();
            let want = ch_bound(ConditionFlags::FACTORIZABLE, bounds).value;
            assert!(
                (achieved - want).abs() < 1e-12,
                "at {bounds:?}: {achieved} vs {want}"
            );
            assert!(validate_ensemble(&attack.ensemble, &bounds).passed());
        }
    }

    #[test]
    fn ns_factorizable_attack() {
        for bounds in [rb(0.3, 0.0), rb(0.4, 0.05), rb(0.6, 0.2)] {
            let attack = build_attack(ConditionFlags::NS_FACTORIZABLE, bounds).unwrap();
            assert!(attack.ensemble.is_fully_factorized());
            let achieved = attack.achieved().unwrap();
            let want = chsh_bound(ConditionFlags::NS_FACTORIZABLE, bounds).value;
            assert!((achieved - want).abs() < 1e-12);
            let dist = induced_joint(&attack.ensemble).unwrap();
            assert!(is_no_signaling(&dist, PROB_TOL).passed);
            let implied = attack.implied_ch.unwrap();
            let ch = ensemble_bell_value(&attack.ensemble, Functional::Ch).unwrap();
            assert!((ch - implied).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_bounds_give_classical_values() {
        let bounds = rb(0.25, 0.25);
        for cond in ConditionFlags::ALL {
            let attack = build_attack(cond, bounds).unwrap();
            let achieved = attack.achieved().unwrap();
            assert!((achieved - attack.expected.value).abs() < 1e-9);
        }
    }

    #[test]
    fn condition_labels_round_trip() {
        for cond in ConditionFlags::ALL {
            let parsed: ConditionFlags = cond.label().parse().unwrap();
            assert_eq!(parsed, cond);
        }
        assert!("signaling".parse::<ConditionFlags>().is_err());
    }

    #[test]
    fn bound_result_serializes_flat() {
        let b = ch_bound(ConditionFlags::GENERAL, rb(0.3, 0.05));
        let json = serde_json::to_value(&b).unwrap();
        assert_eq!(json["condition"], "general");
        assert_eq!(json["P"], 0.3);
        assert_eq!(json["Q"], 0.05);
        assert_eq!(json["branch"], "3P+Q<=1");
    }
}
