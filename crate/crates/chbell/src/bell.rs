//! Observed distributions and the Bell functionals.
//!
//! The data plane of a bipartite test with binary inputs and outputs is the
//! conditional distribution `p̃(a,b|x,y)` ([`JointConditional`]). On top of it
//! this module defines the CH functional (detection probabilities, classical
//! bound 0), the CHSH functional (correlations, classical bound 2), the
//! count-based CH estimator used by experiments, and the no-signaling check
//! that links the two.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result, CHSH_QUANTUM_BOUND, CH_QUANTUM_BOUND, PROB_TOL};

/// How the single-party probabilities `p̃_A(0)` and `p̃_B(0)` of the CH
/// functional are read off a joint conditional distribution.
///
/// The CH functional needs Alice's probability of detecting `0` at `x = 0`,
/// which a joint distribution only defines per setting of the *other* party.
/// The choice below is arbitrary for signaling distributions and immaterial
/// for no-signaling ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingleCountConvention {
    /// Average the two settings of the other party (the default).
    #[default]
    AverageOverOtherSetting,
    /// Condition on the other party's setting being 0.
    OtherSettingZero,
    /// Condition on the other party's setting being 1.
    OtherSettingOne,
}

/// Observed distribution `p̃(a,b|x,y)` over binary inputs and outputs.
///
/// Stored as 16 probabilities indexed by `(a,b,x,y)`. Construction validates
/// that every entry lies in `[0,1]` and that each setting pair `(x,y)` is
/// normalized within [`PROB_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointConditional {
    table: [f64; 16],
}

const fn idx(a: u8, b: u8, x: u8, y: u8) -> usize {
    (a as usize) << 3 | (b as usize) << 2 | (x as usize) << 1 | y as usize
}

impl JointConditional {
    pub fn new(table: [f64; 16]) -> Result<Self> {
        for (i, &v) in table.iter().enumerate() {
            if !(0.0..=1.0 + PROB_TOL).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "entry {i} is {v}, outside [0,1]"
                )));
            }
        }
        let dist = Self { table };
        for x in 0..2u8 {
            for y in 0..2u8 {
                let s = dist.setting_sum(x, y);
                if (s - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidDistribution(format!(
                        "setting ({x},{y}) sums to {s}, not 1"
                    )));
                }
            }
        }
        Ok(dist)
    }

    /// Build from a closure over `(a, b, x, y)`.
    pub fn from_fn(f: impl Fn(u8, u8, u8, u8) -> f64) -> Result<Self> {
        let mut table = [0.0; 16];
        for a in 0..2u8 {
            for b in 0..2u8 {
                for x in 0..2u8 {
                    for y in 0..2u8 {
                        table[idx(a, b, x, y)] = f(a, b, x, y);
                    }
                }
            }
        }
        Self::new(table)
    }

    /// `p̃(a,b|x,y)`.
    pub fn p(&self, a: u8, b: u8, x: u8, y: u8) -> f64 {
        self.table[idx(a, b, x, y)]
    }

    fn setting_sum(&self, x: u8, y: u8) -> f64 {
        (0..2u8)
            .flat_map(|a| (0..2u8).map(move |b| self.p(a, b, x, y)))
            .sum()
    }

    /// Alice's marginal `p̃_A(a|x,y) = Σ_b p̃(a,b|x,y)`.
    pub fn alice_marginal(&self, a: u8, x: u8, y: u8) -> f64 {
        self.p(a, 0, x, y) + self.p(a, 1, x, y)
    }

    /// Bob's marginal `p̃_B(b|x,y) = Σ_a p̃(a,b|x,y)`.
    pub fn bob_marginal(&self, b: u8, x: u8, y: u8) -> f64 {
        self.p(0, b, x, y) + self.p(1, b, x, y)
    }

    /// The Popescu-Rohrlich box: `p̃(a,b|x,y) = 1/2` iff `a ⊕ b = x·y`.
    ///
    /// Maximally nonlocal but no-signaling; CHSH value 4, CH value 1/2.
    pub fn pr_box() -> Self {
        Self::from_fn(|a, b, x, y| if a ^ b == x & y { 0.5 } else { 0.0 })
            .expect("PR box is a valid distribution")
    }

    /// Singlet-state correlations at the CHSH-optimal settings:
    /// `p̃(a,b|x,y) = [1 + (−1)^(a+b+xy)/√2] / 4`.
    ///
    /// Uniform marginals, correlators `±1/√2`, CHSH value `2√2`, CH value
    /// `(√2−1)/2`.
    pub fn tsirelson() -> Self {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_fn(|a, b, x, y| {
            let sign = if (a + b + x * y) % 2 == 0 { 1.0 } else { -1.0 };
            (1.0 + sign * c) / 4.0
        })
        .expect("Tsirelson table is a valid distribution")
    }

    /// Uniform noise, `p̃ = 1/4` everywhere.
    pub fn white_noise() -> Self {
        Self::new([0.25; 16]).expect("white noise is a valid distribution")
    }

    /// Both parties always output 0: `p̃(0,0|x,y) = 1`.
    pub fn always_zero() -> Self {
        Self::from_fn(|a, b, _, _| if a == 0 && b == 0 { 1.0 } else { 0.0 })
            .expect("deterministic table is a valid distribution")
    }

    /// Convex mixture of distributions. Weights must be nonnegative and sum
    /// to 1 within [`PROB_TOL`].
    pub fn mix(parts: &[(f64, &JointConditional)]) -> Result<Self> {
        let wsum: f64 = parts.iter().map(|(w, _)| w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || (wsum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!(
                "mixture weights must be nonnegative and sum to 1 (got {wsum})"
            )));
        }
        let mut table = [0.0; 16];
        for (w, d) in parts {
            for (t, v) in table.iter_mut().zip(&d.table) {
                *t += w * v;
            }
        }
        Self::new(table)
    }
}

impl Serialize for JointConditional {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = BTreeMap::new();
        for a in 0..2u8 {
            for b in 0..2u8 {
                for x in 0..2u8 {
                    for y in 0..2u8 {
                        map.insert(format!("{a},{b},{x},{y}"), self.p(a, b, x, y));
                    }
                }
            }
        }
        let mut outer = BTreeMap::new();
        outer.insert("p", map);
        outer.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for JointConditional {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Flat {
            p: BTreeMap<String, f64>,
        }
        let flat = Flat::deserialize(deserializer)?;
        let mut table = [f64::NAN; 16];
        for (key, value) in &flat.p {
            let bits: Vec<u8> = key
                .split(',')
                .map(|s| s.trim().parse::<u8>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| D::Error::custom(format!("bad index key {key:?}")))?;
            match bits.as_slice() {
                [a, b, x, y] if *a < 2 && *b < 2 && *x < 2 && *y < 2 => {
                    table[idx(*a, *b, *x, *y)] = *value;
                }
                _ => return Err(D::Error::custom(format!("bad index key {key:?}"))),
            }
        }
        if table.iter().any(|v| v.is_nan()) {
            return Err(D::Error::custom("missing entries in \"p\" table"));
        }
        Self::new(table).map_err(D::Error::custom)
    }
}

/// Raw trial counts of a CH experiment.
///
/// `n_setting[2x+y]` counts trials with settings `(x,y)`; `coincidences`
/// counts the `00` outcomes per setting; `singles_a` counts trials where
/// Alice had `x = 0` and output 0 (regardless of `y`), out of `n_a0` such
/// trials, and symmetrically for Bob.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialCounts {
    pub n_total: u64,
    pub n_setting: [u64; 4],
    pub coincidences: [u64; 4],
    pub singles_a: u64,
    pub singles_b: u64,
    pub n_a0: u64,
    pub n_b0: u64,
}

impl TrialCounts {
    /// Check the counting identities; returns the first violated one.
    pub fn validate(&self) -> Result<()> {
        let sum: u64 = self.n_setting.iter().sum();
        if sum != self.n_total {
            return Err(Error::InvalidParameter(format!(
                "setting counts sum to {sum}, not n_total {}",
                self.n_total
            )));
        }
        if self.n_a0 != self.n_setting[0] + self.n_setting[1] {
            return Err(Error::InvalidParameter(
                "n_a0 != n_setting(0,0) + n_setting(0,1)".into(),
            ));
        }
        if self.n_b0 != self.n_setting[0] + self.n_setting[2] {
            return Err(Error::InvalidParameter(
                "n_b0 != n_setting(0,0) + n_setting(1,0)".into(),
            ));
        }
        for i in 0..4 {
            if self.coincidences[i] > self.n_setting[i] {
                return Err(Error::InvalidParameter(format!(
                    "coincidences[{i}] exceeds n_setting[{i}]"
                )));
            }
        }
        if self.singles_a > self.n_a0 || self.singles_b > self.n_b0 {
            return Err(Error::InvalidParameter(
                "singles exceed their trial counts".into(),
            ));
        }
        Ok(())
    }

    /// Exact-proportion counts for `dist` with `n` trials per setting pair,
    /// under the averaging single-count convention. Panics if the implied
    /// counts are not integral; use dyadic distributions in tests.
    pub fn exact_proportions(dist: &JointConditional, n: u64) -> Self {
        let count = |p: f64, total: u64| -> u64 {
            let c = p * total as f64;
            assert!(
                (c - c.round()).abs() < 1e-6,
                "probability {p} does not yield integral counts at n = {total}"
            );
            c.round() as u64
        };
        let mut coincidences = [0u64; 4];
        for x in 0..2u8 {
            for y in 0..2u8 {
                coincidences[(2 * x + y) as usize] = count(dist.p(0, 0, x, y), n);
            }
        }
        let singles_a =
            count(dist.alice_marginal(0, 0, 0), n) + count(dist.alice_marginal(0, 0, 1), n);
        let singles_b = count(dist.bob_marginal(0, 0, 0), n) + count(dist.bob_marginal(0, 1, 0), n);
        Self {
            n_total: 4 * n,
            n_setting: [n; 4],
            coincidences,
            singles_a,
            singles_b,
            n_a0: 2 * n,
            n_b0: 2 * n,
        }
    }
}

/// A Bell functional `J = Σ β(a,b,x,y) p̃(a,b|x,y)` with its classical and
/// quantum bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BellFunctional {
    coefficients: [f64; 16],
    pub classical_bound: f64,
    pub quantum_bound: f64,
}

impl BellFunctional {
    /// The CHSH functional, `β = (−1)^(xy+a+b)`.
    pub fn chsh() -> Self {
        let mut coefficients = [0.0; 16];
        for a in 0..2u8 {
            for b in 0..2u8 {
                for x in 0..2u8 {
                    for y in 0..2u8 {
                        coefficients[idx(a, b, x, y)] =
                            if (x * y + a + b) % 2 == 0 { 1.0 } else { -1.0 };
                    }
                }
            }
        }
        Self {
            coefficients,
            classical_bound: 2.0,
            quantum_bound: CHSH_QUANTUM_BOUND,
        }
    }

    /// The CH functional with the single-party terms expanded to joint
    /// coefficients under the given convention.
    pub fn ch(conv: SingleCountConvention) -> Self {
        let mut coefficients = [0.0; 16];
        coefficients[idx(0, 0, 0, 0)] += 1.0;
        coefficients[idx(0, 0, 0, 1)] += 1.0;
        coefficients[idx(0, 0, 1, 0)] += 1.0;
        coefficients[idx(0, 0, 1, 1)] -= 1.0;
        // -p̃_A(0): Alice outputs 0 at x = 0, marginalized over b, read off
        // the y settings selected by the convention (and symmetrically).
        let (ys, xs): (&[u8], &[u8]) = match conv {
            SingleCountConvention::AverageOverOtherSetting => (&[0, 1], &[0, 1]),
            SingleCountConvention::OtherSettingZero => (&[0], &[0]),
            SingleCountConvention::OtherSettingOne => (&[1], &[1]),
        };
        let share_a = 1.0 / ys.len() as f64;
        for &y in ys {
            for b in 0..2u8 {
                coefficients[idx(0, b, 0, y)] -= share_a;
            }
        }
        let share_b = 1.0 / xs.len() as f64;
        for &x in xs {
            for a in 0..2u8 {
                coefficients[idx(a, 0, x, 0)] -= share_b;
            }
        }
        Self {
            coefficients,
            classical_bound: 0.0,
            quantum_bound: CH_QUANTUM_BOUND,
        }
    }

    pub fn coefficient(&self, a: u8, b: u8, x: u8, y: u8) -> f64 {
        self.coefficients[idx(a, b, x, y)]
    }

    pub fn evaluate(&self, dist: &JointConditional) -> f64 {
        self.coefficients
            .iter()
            .zip(dist.table.iter())
            .map(|(c, p)| c * p)
            .sum()
    }
}

fn single_a(dist: &JointConditional, conv: SingleCountConvention) -> f64 {
    match conv {
        SingleCountConvention::AverageOverOtherSetting => {
            0.5 * (dist.alice_marginal(0, 0, 0) + dist.alice_marginal(0, 0, 1))
        }
        SingleCountConvention::OtherSettingZero => dist.alice_marginal(0, 0, 0),
        SingleCountConvention::OtherSettingOne => dist.alice_marginal(0, 0, 1),
    }
}

fn single_b(dist: &JointConditional, conv: SingleCountConvention) -> f64 {
    match conv {
        SingleCountConvention::AverageOverOtherSetting => {
            0.5 * (dist.bob_marginal(0, 0, 0) + dist.bob_marginal(0, 1, 0))
        }
        SingleCountConvention::OtherSettingZero => dist.bob_marginal(0, 0, 0),
        SingleCountConvention::OtherSettingOne => dist.bob_marginal(0, 1, 0),
    }
}

/// CH value of a distribution:
/// `p̃(0,0|0,0) + p̃(0,0|0,1) + p̃(0,0|1,0) − p̃(0,0|1,1) − p̃_A(0) − p̃_B(0)`.
///
/// Non-positive for every local model with fully random inputs; the quantum
/// maximum is [`CH_QUANTUM_BOUND`].
pub fn ch_value(dist: &JointConditional, conv: SingleCountConvention) -> f64 {
    dist.p(0, 0, 0, 0) + dist.p(0, 0, 0, 1) + dist.p(0, 0, 1, 0)
        - dist.p(0, 0, 1, 1)
        - single_a(dist, conv)
        - single_b(dist, conv)
}

/// CHSH value of a distribution: `Σ (−1)^(xy+a+b) p̃(a,b|x,y)`.
pub fn chsh_value(dist: &JointConditional) -> f64 {
    let mut total = 0.0;
    for a in 0..2u8 {
        for b in 0..2u8 {
            for x in 0..2u8 {
                for y in 0..2u8 {
                    let sign = if (x * y + a + b) % 2 == 0 { 1.0 } else { -1.0 };
                    total += sign * dist.p(a, b, x, y);
                }
            }
        }
    }
    total
}

/// Outcome of a no-signaling check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoSignalingCheck {
    pub passed: bool,
    /// Largest marginal discrepancy found.
    pub max_residual: f64,
}

/// Check that Alice's output marginal is independent of `y` and Bob's of `x`,
/// within `tol`.
pub fn is_no_signaling(dist: &JointConditional, tol: f64) -> NoSignalingCheck {
    let mut max_residual: f64 = 0.0;
    for x in 0..2u8 {
        let d = (dist.alice_marginal(0, x, 0) - dist.alice_marginal(0, x, 1)).abs();
        max_residual = max_residual.max(d);
    }
    for y in 0..2u8 {
        let d = (dist.bob_marginal(0, 0, y) - dist.bob_marginal(0, 1, y)).abs();
        max_residual = max_residual.max(d);
    }
    NoSignalingCheck {
        passed: max_residual <= tol,
        max_residual,
    }
}

/// The six-ratio CH estimator:
/// `Σ_{xy≠11} C(x,y)/N(x,y) − C(1,1)/N(1,1) − S_A/N_A(0) − S_B/N_B(0)`.
pub fn ch_from_counts(counts: &TrialCounts) -> Result<f64> {
    for x in 0..2u8 {
        for y in 0..2u8 {
            if counts.n_setting[(2 * x + y) as usize] == 0 {
                return Err(Error::InsufficientTrials { x, y });
            }
        }
    }
    if counts.n_a0 == 0 {
        return Err(Error::InsufficientTrials { x: 0, y: 0 });
    }
    if counts.n_b0 == 0 {
        return Err(Error::InsufficientTrials { x: 0, y: 0 });
    }
    let ratio = |i: usize| counts.coincidences[i] as f64 / counts.n_setting[i] as f64;
    Ok(ratio(0) + ratio(1) + ratio(2)
        - ratio(3)
        - counts.singles_a as f64 / counts.n_a0 as f64
        - counts.singles_b as f64 / counts.n_b0 as f64)
}

/// `|J_CH − (J_CHSH − 2)/4|` for a distribution.
///
/// Zero (within [`PROB_TOL`]) for every no-signaling distribution and every
/// single-count convention; generally nonzero for signaling ones.
pub fn ch_chsh_residual(dist: &JointConditional, conv: SingleCountConvention) -> f64 {
    (ch_value(dist, conv) - (chsh_value(dist) - 2.0) / 4.0).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONVENTIONS: [SingleCountConvention; 3] = [
        SingleCountConvention::AverageOverOtherSetting,
        SingleCountConvention::OtherSettingZero,
        SingleCountConvention::OtherSettingOne,
    ];

    #[test]
    fn ch_of_always_zero_is_zero() {
        let d = JointConditional::always_zero();
        assert_eq!(ch_value(&d, SingleCountConvention::default()), 0.0);
    }

    #[test]
    fn ch_of_pr_box_is_half() {
        let d = JointConditional::pr_box();
        for conv in CONVENTIONS {
            assert!((ch_value(&d, conv) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn ch_of_tsirelson_is_quantum_bound() {
        let d = JointConditional::tsirelson();
        assert!((ch_value(&d, SingleCountConvention::default()) - CH_QUANTUM_BOUND).abs() < 1e-15);
    }

    #[test]
    fn chsh_examples() {
        assert_eq!(chsh_value(&JointConditional::always_zero()), 2.0);
        assert_eq!(chsh_value(&JointConditional::pr_box()), 4.0);
        assert_eq!(chsh_value(&JointConditional::white_noise()), 0.0);
        assert!((chsh_value(&JointConditional::tsirelson()) - CHSH_QUANTUM_BOUND).abs() < 1e-15);
    }

    #[test]
    fn functional_form_matches_direct_evaluation() {
        // The expanded-coefficient route and the direct formulas must agree.
        let dists = [
            JointConditional::pr_box(),
            JointConditional::tsirelson(),
            JointConditional::white_noise(),
            JointConditional::always_zero(),
        ];
        for d in &dists {
            assert!((BellFunctional::chsh().evaluate(d) - chsh_value(d)).abs() < 1e-14);
            for conv in CONVENTIONS {
                assert!((BellFunctional::ch(conv).evaluate(d) - ch_value(d, conv)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn chsh_coefficients_are_signs() {
        let f = BellFunctional::chsh();
        for a in 0..2u8 {
            for b in 0..2u8 {
                for x in 0..2u8 {
                    for y in 0..2u8 {
                        let expect = if (x * y + a + b) % 2 == 0 { 1.0 } else { -1.0 };
                        assert_eq!(f.coefficient(a, b, x, y), expect);
                    }
                }
            }
        }
    }

    #[test]
    fn average_convention_is_mean_of_one_sided() {
        let d = signaling_example();
        let avg = ch_value(&d, SingleCountConvention::AverageOverOtherSetting);
        let zero = ch_value(&d, SingleCountConvention::OtherSettingZero);
        let one = ch_value(&d, SingleCountConvention::OtherSettingOne);
        assert!((avg - 0.5 * (zero + one)).abs() < 1e-15);
    }

    #[test]
    fn pr_box_is_no_signaling() {
        let check = is_no_signaling(&JointConditional::pr_box(), PROB_TOL);
        assert!(check.passed);
        assert_eq!(check.max_residual, 0.0);
    }

    /// Alice outputs 0 deterministically when y = 0 but uniformly when y = 1.
    fn signaling_example() -> JointConditional {
        JointConditional::from_fn(|a, _b, _x, y| {
            let pa = if y == 0 {
                if a == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                0.5
            };
            pa * 0.5 // Bob uniform
        })
        .unwrap()
    }

    #[test]
    fn signaling_distribution_fails_check() {
        let check = is_no_signaling(&signaling_example(), PROB_TOL);
        assert!(!check.passed);
        assert!((check.max_residual - 0.5).abs() < 1e-15);
    }

    #[test]
    fn residual_zero_for_ns_nonzero_for_signaling() {
        for conv in CONVENTIONS {
            assert!(ch_chsh_residual(&JointConditional::pr_box(), conv) < 1e-15);
            assert!(ch_chsh_residual(&JointConditional::tsirelson(), conv) < 1e-12);
        }
        let signaling = signaling_example();
        assert!(
            ch_chsh_residual(&signaling, SingleCountConvention::AverageOverOtherSetting) > 1e-3
        );
        assert!(ch_chsh_residual(&signaling, SingleCountConvention::OtherSettingOne) > 1e-3);
    }

    #[test]
    fn counts_all_detect() {
        let counts = TrialCounts {
            n_total: 1000,
            n_setting: [250; 4],
            coincidences: [250; 4],
            singles_a: 500,
            singles_b: 500,
            n_a0: 500,
            n_b0: 500,
        };
        counts.validate().unwrap();
        assert_eq!(ch_from_counts(&counts).unwrap(), 0.0);
    }

    #[test]
    fn counts_from_pr_box_proportions() {
        let counts = TrialCounts::exact_proportions(&JointConditional::pr_box(), 400);
        counts.validate().unwrap();
        assert_eq!(ch_from_counts(&counts).unwrap(), 0.5);
    }

    #[test]
    fn exact_proportions_reproduce_ch_value() {
        let d = JointConditional::tsirelson();
        // Not dyadic, so scale to a large n and compare loosely against the
        // rounding granularity instead of exactly.
        let n = 1 << 24;
        let count = |p: f64| (p * n as f64).round() as u64;
        let counts = TrialCounts {
            n_total: 4 * n,
            n_setting: [n; 4],
            coincidences: [
                count(d.p(0, 0, 0, 0)),
                count(d.p(0, 0, 0, 1)),
                count(d.p(0, 0, 1, 0)),
                count(d.p(0, 0, 1, 1)),
            ],
            singles_a: count(d.alice_marginal(0, 0, 0)) + count(d.alice_marginal(0, 0, 1)),
            singles_b: count(d.bob_marginal(0, 0, 0)) + count(d.bob_marginal(0, 1, 0)),
            n_a0: 2 * n,
            n_b0: 2 * n,
        };
        let est = ch_from_counts(&counts).unwrap();
        let exact = ch_value(&d, SingleCountConvention::AverageOverOtherSetting);
        assert!((est - exact).abs() < 1e-6);
    }

    #[test]
    fn zero_denominator_is_an_error() {
        let counts = TrialCounts {
            n_total: 750,
            n_setting: [250, 250, 250, 0],
            coincidences: [250, 250, 250, 0],
            singles_a: 500,
            singles_b: 500,
            n_a0: 500,
            n_b0: 500,
        };
        match ch_from_counts(&counts) {
            Err(Error::InsufficientTrials { x: 1, y: 1 }) => {}
            other => panic!("expected InsufficientTrials(1,1), got {other:?}"),
        }
    }

    #[test]
    fn rejects_invalid_distribution() {
        let mut table = [0.25; 16];
        table[0] = 0.5; // breaks normalization of setting (0,0)
        assert!(JointConditional::new(table).is_err());
        table[0] = -0.1;
        assert!(JointConditional::new(table).is_err());
    }

    #[test]
    fn json_round_trip() {
        let d = JointConditional::pr_box();
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"p\""));
        assert!(json.contains("\"0,0,0,0\""));
        let back: JointConditional = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn counts_json_round_trip() {
        let counts = TrialCounts::exact_proportions(&JointConditional::pr_box(), 8);
        let json = serde_json::to_string(&counts).unwrap();
        let back: TrialCounts = serde_json::from_str(&json).unwrap();
        assert_eq!(back, counts);
    }
}
