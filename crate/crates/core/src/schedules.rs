//! Time-varying coefficients: first/second-moment decay rates and learning rates.
//!
//! Every `1 - x^k` term is evaluated as `-expm1(k ln x)`. Naive powering
//! loses all significant digits once `k ln x` is of order `1e-4`, which is
//! exactly the AdamNX regime (`k = 1 - beta2`).
//!
//! Steps are 1-based: the first optimizer update uses `t = 1`, where every
//! family except `Constant` returns a decay rate of exactly zero.
//!
//! The AdamClassic, AdamNX and AdaX families all share one shape: with some
//! effective rate `rho`, the decay is `(1 - rho^(t-1)) / (1 - rho^t)`
//! (times `rho` for AdamClassic). We evaluate that ratio and its complement
//! separately so that `1 - beta2_hat` keeps full relative precision long
//! after `beta2_hat` itself has rounded to `1.0`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("schedule domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, ScheduleError>;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const ADAMNX_DEFAULT_BETA2: f64 = 0.99;
pub const ADAM_DEFAULT_BETA2: f64 = 0.999;
pub const ADAX_DEFAULT_BETA2: f64 = 1e-4;
pub const ADAFACTOR_DEFAULT_C: f64 = 0.8;

/// Second-moment decay-rate family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayFamily {
    /// `(b - b^t) / (1 - b^t)`, the rate hidden inside bias-corrected Adam.
    AdamClassic { beta2: f64 },
    /// `(1 - b^((1-b)(t-1))) / (1 - b^((1-b)t))`.
    AdamNX { beta2: f64 },
    /// `1 - b / ((1+b)^t - 1)`.
    AdaX { beta2: f64 },
    /// `1 - 1/t^c`.
    Adafactor { c: f64 },
    /// Fixed `b`, no bias correction.
    Constant { beta2: f64 },
}

impl DecayFamily {
    pub fn name(&self) -> &'static str {
        match self {
            DecayFamily::AdamClassic { .. } => "adam-classic",
            DecayFamily::AdamNX { .. } => "adamnx",
            DecayFamily::AdaX { .. } => "adax",
            DecayFamily::Adafactor { .. } => "adafactor",
            DecayFamily::Constant { .. } => "constant",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DecayFamily::AdamClassic { beta2 } | DecayFamily::AdamNX { beta2 } => {
                beta2 > 0.0 && beta2 < 1.0
            }
            DecayFamily::AdaX { beta2 } => beta2 > 0.0 && beta2.is_finite(),
            DecayFamily::Adafactor { c } => c > 0.0 && c <= 1.0,
            DecayFamily::Constant { beta2 } => (0.0..1.0).contains(&beta2),
        };
        if ok {
            Ok(())
        } else {
            Err(ScheduleError::Domain(format!("invalid {} parameters: {self:?}", self.name())))
        }
    }
}

/// Decay rates for both moments at step `t`, with their complements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub beta1_hat: f64,
    pub one_minus_beta1_hat: f64,
    pub beta2_hat: f64,
    pub one_minus_beta2_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecaySchedule {
    beta1: f64,
    family: DecayFamily,
}

impl DecaySchedule {
    pub fn new(beta1: f64, family: DecayFamily) -> Result<Self> {
        check_beta1(beta1)?;
        family.validate()?;
        Ok(Self { beta1, family })
    }

    /// `(beta1, beta2) = (0.9, 0.99)`.
    pub fn adamnx() -> Self {
        Self {
            beta1: DEFAULT_BETA1,
            family: DecayFamily::AdamNX {
                beta2: ADAMNX_DEFAULT_BETA2,
            },
        }
    }

    /// `(beta1, beta2) = (0.9, 0.999)`.
    pub fn adam_classic() -> Self {
        Self {
            beta1: DEFAULT_BETA1,
            family: DecayFamily::AdamClassic {
                beta2: ADAM_DEFAULT_BETA2,
            },
        }
    }

    pub fn adax() -> Self {
        Self {
            beta1: DEFAULT_BETA1,
            family: DecayFamily::AdaX {
                beta2: ADAX_DEFAULT_BETA2,
            },
        }
    }

    pub fn adafactor() -> Self {
        Self {
            beta1: DEFAULT_BETA1,
            family: DecayFamily::Adafactor {
                c: ADAFACTOR_DEFAULT_C,
            },
        }
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn family(&self) -> DecayFamily {
        self.family
    }

    pub fn beta2_hat(&self, t: u64) -> f64 {
        self.second_moment(t).0
    }

    /// `1 - beta2_hat(t)`, accurate even where `beta2_hat` rounds to 1.
    pub fn beta2_hat_complement(&self, t: u64) -> f64 {
        self.second_moment(t).1
    }

    pub fn coefficients(&self, t: u64) -> Coefficients {
        let (beta1_hat, one_minus_beta1_hat) = classic_pair(self.beta1.ln(), t);
        let (beta2_hat, one_minus_beta2_hat) = self.second_moment(t);
        Coefficients {
            beta1_hat,
            one_minus_beta1_hat,
            beta2_hat,
            one_minus_beta2_hat,
        }
    }

    fn second_moment(&self, t: u64) -> (f64, f64) {
        assert!(t >= 1, "schedule steps are 1-based");
        match self.family {
            DecayFamily::AdamClassic { beta2 } => classic_pair(beta2.ln(), t),
            DecayFamily::AdamNX { beta2 } => ratio_pair((1.0 - beta2) * beta2.ln(), t),
            DecayFamily::AdaX { beta2 } => ratio_pair(-beta2.ln_1p(), t),
            DecayFamily::Adafactor { c } => {
                let rest = (-c * (t as f64).ln()).exp();
                (1.0 - rest, rest)
            }
            DecayFamily::Constant { beta2 } => (beta2, 1.0 - beta2),
        }
    }
}

fn check_beta1(beta1: f64) -> Result<()> {
    if beta1 > 0.0 && beta1 < 1.0 {
        Ok(())
    } else {
        Err(ScheduleError::Domain(format!("beta1 must lie in (0, 1), got {beta1}")))
    }
}

/// `(1 - rho^(t-1)) / (1 - rho^t)` and its complement, given `ln rho < 0`.
fn ratio_pair(ln_rho: f64, t: u64) -> (f64, f64) {
    let t = t as f64;
    let denom = (t * ln_rho).exp_m1();
    let complement = ((t - 1.0) * ln_rho).exp() * ln_rho.exp_m1() / denom;
    // 1 - c is exact enough once c <= 1/2 and keeps the rate monotone in t
    let value = if complement <= 0.5 {
        1.0 - complement
    } else {
        ((t - 1.0) * ln_rho).exp_m1() / denom
    };
    (value, complement)
}

/// `(b - b^t) / (1 - b^t)` and `(1 - b) / (1 - b^t)`, given `ln b < 0`.
fn classic_pair(ln_b: f64, t: u64) -> (f64, f64) {
    let t = t as f64;
    let denom = (t * ln_b).exp_m1();
    let value = ln_b.exp() * ((t - 1.0) * ln_b).exp_m1() / denom;
    let complement = ln_b.exp_m1() / denom;
    (value, complement)
}

/// First-moment rate `(b1 - b1^t) / (1 - b1^t)`.
pub fn beta1_hat(beta1: f64, t: u64) -> Result<f64> {
    check_beta1(beta1)?;
    check_step(t)?;
    Ok(classic_pair(beta1.ln(), t).0)
}

/// Second-moment rate of the given schedule at step `t`.
pub fn beta2_hat(schedule: &DecaySchedule, t: u64) -> Result<f64> {
    check_step(t)?;
    Ok(schedule.beta2_hat(t))
}

fn check_step(t: u64) -> Result<()> {
    if t == 0 {
        Err(ScheduleError::Domain("steps are 1-based, got t = 0".into()))
    } else {
        Ok(())
    }
}

/// Learning-rate strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Fixed { eta: f64 },
    /// Linear from `eta_peak` at `t = 0` to `eta_min` at `t = t1`, then flat.
    LinearThenFloor { eta_peak: f64, eta_min: f64, t1: u64 },
}

impl LrSchedule {
    pub fn fixed(eta: f64) -> Result<Self> {
        if eta > 0.0 && eta.is_finite() {
            Ok(LrSchedule::Fixed { eta })
        } else {
            Err(ScheduleError::Domain(format!("learning rate must be > 0, got {eta}")))
        }
    }

    pub fn linear_then_floor(eta_peak: f64, eta_min: f64, t1: u64) -> Result<Self> {
        let mut problems = Vec::new();
        if !(eta_peak > 0.0 && eta_peak.is_finite()) {
            problems.push(format!("eta_peak must be > 0, got {eta_peak}"));
        }
        if !(eta_min > 0.0 && eta_min.is_finite()) {
            problems.push(format!("eta_min must be > 0, got {eta_min}"));
        }
        if eta_min > eta_peak {
            problems.push(format!("eta_min ({eta_min}) exceeds eta_peak ({eta_peak})"));
        }
        if t1 == 0 {
            problems.push("t1 must be >= 1".to_string());
        }
        if problems.is_empty() {
            Ok(LrSchedule::LinearThenFloor {
                eta_peak,
                eta_min,
                t1,
            })
        } else {
            Err(ScheduleError::Domain(problems.join("; ")))
        }
    }

    pub fn lr_at(&self, t: u64) -> f64 {
        match *self {
            LrSchedule::Fixed { eta } => eta,
            LrSchedule::LinearThenFloor {
                eta_peak,
                eta_min,
                t1,
            } => {
                if t >= t1 {
                    eta_min
                } else {
                    eta_peak + (eta_min - eta_peak) * (t as f64 / t1 as f64)
                }
            }
        }
    }
}

pub fn lr_at(schedule: &LrSchedule, t: u64) -> f64 {
    schedule.lr_at(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nx(beta2: f64) -> DecaySchedule {
        DecaySchedule::new(0.9, DecayFamily::AdamNX { beta2 }).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    // Expected values below come from 50-digit mpmath evaluation of the
    // closed forms.
    #[test]
    fn beta1_hat_examples() {
        assert_eq!(beta1_hat(0.9, 1).unwrap(), 0.0);
        assert!(rel(beta1_hat(0.9, 2).unwrap(), 9.0 / 19.0) < 1e-15);
        assert!((beta1_hat(0.9, 1_000_000).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn beta1_hat_domain() {
        assert!(beta1_hat(0.9, 0).is_err());
        assert!(beta1_hat(1.0, 3).is_err());
        assert!(beta1_hat(0.0, 3).is_err());
        assert!(beta1_hat(-0.5, 3).is_err());
    }

    #[test]
    fn beta2_hat_examples() {
        assert_eq!(nx(0.99).beta2_hat(1), 0.0);
        assert!(rel(nx(0.99).beta2_hat(2), 0.500_025_125_839_612_6) < 1e-13);
        assert!(rel(nx(0.99).beta2_hat(100), 0.990_049_667_492_491_4) < 1e-13);
        let classic = DecaySchedule::new(0.9, DecayFamily::AdamClassic { beta2: 0.999 }).unwrap();
        assert!(rel(classic.beta2_hat(2), 0.499_749_874_937_468_7) < 1e-14);
        let ada = DecaySchedule::adafactor();
        assert_eq!(ada.beta2_hat(1), 0.0);
        assert!(rel(ada.beta2_hat(10), 0.841_510_680_753_888_7) < 1e-14);
        let adax = DecaySchedule::adax();
        assert_eq!(adax.beta2_hat(1), 0.0);
        assert!(rel(adax.beta2_hat(2), 0.500_024_998_750_062_5) < 1e-12);
        assert!(rel(adax.beta2_hat(1000), 0.999_049_116_847_998_9) < 1e-13);
        let constant = DecaySchedule::new(0.9, DecayFamily::Constant { beta2: 0.95 }).unwrap();
        assert_eq!(constant.beta2_hat(1), 0.95);
        assert_eq!(constant.beta2_hat(500), 0.95);
    }

    #[test]
    fn complements_keep_precision_at_large_t() {
        // 1 - beta2_hat(1e5) = 4.33926073028814e-9 (mpmath)
        let c = nx(0.99).beta2_hat_complement(100_000);
        assert!(rel(c, 4.339_260_730_288_142e-9) < 1e-9);
        // AdaX at huge t: no overflow, no NaN
        let adax = DecaySchedule::adax();
        let c = adax.beta2_hat_complement(100_000_000);
        assert!(c.is_finite() && c >= 0.0);
        assert_eq!(adax.beta2_hat(100_000_000), 1.0);
        assert!(rel(adax.beta2_hat_complement(100_000), 1.0 - 0.999_999_995_457_530_3) < 1e-7);
    }

    #[test]
    fn complement_matches_value() {
        for s in [
            nx(0.99),
            DecaySchedule::adam_classic(),
            DecaySchedule::adax(),
            DecaySchedule::adafactor(),
        ] {
            for t in [1, 2, 3, 10, 77, 1000] {
                let c = s.coefficients(t);
                assert!((c.beta2_hat + c.one_minus_beta2_hat - 1.0).abs() < 1e-15, "{s:?} t={t}");
                assert!((c.beta1_hat + c.one_minus_beta1_hat - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn family_validation() {
        assert!(DecaySchedule::new(0.9, DecayFamily::AdamNX { beta2: 1.0 }).is_err());
        assert!(DecaySchedule::new(0.9, DecayFamily::AdamNX { beta2: 0.0 }).is_err());
        assert!(DecaySchedule::new(0.9, DecayFamily::AdamClassic { beta2: 1.2 }).is_err());
        assert!(DecaySchedule::new(0.9, DecayFamily::AdaX { beta2: 0.0 }).is_err());
        assert!(DecaySchedule::new(0.9, DecayFamily::Adafactor { c: 1.5 }).is_err());
        assert!(DecaySchedule::new(0.9, DecayFamily::Adafactor { c: 1.0 }).is_ok());
        assert!(DecaySchedule::new(0.9, DecayFamily::Constant { beta2: 0.0 }).is_ok());
        assert!(DecaySchedule::new(1.0, DecayFamily::AdamNX { beta2: 0.99 }).is_err());
        assert!(beta2_hat(&nx(0.99), 0).is_err());
    }

    #[test]
    fn classic_limit() {
        let s = DecaySchedule::adam_classic();
        assert!((s.beta2_hat(1_000_000) - 0.999).abs() < 1e-12);
        let mut prev = s.beta2_hat(1);
        for t in 2..20_000 {
            let cur = s.beta2_hat(t);
            assert!(cur > prev, "t={t}");
            prev = cur;
        }
    }

    #[test]
    fn adamnx_ordering_in_beta2() {
        // For t >= 2 the AdamNX rate decreases as beta2 grows: its effective
        // EMA rate rho = beta2^(1-beta2) increases with beta2, and
        // (1 - rho^(t-1)) / (1 - rho^t) is decreasing in rho.
        // mpmath at t=2: 0.50263, 0.500025, 0.50000025.
        for t in [2_u64, 3, 10, 100, 1000, 10_000, 100_000] {
            let a = nx(0.9).beta2_hat(t);
            let b = nx(0.99).beta2_hat(t);
            let c = nx(0.999).beta2_hat(t);
            assert!(a >= b && b >= c, "t={t}: {a} {b} {c}");
        }
        assert!(rel(nx(0.9).beta2_hat(2), 0.502_633_988_525_256_9) < 1e-13);
        assert!(rel(nx(0.999).beta2_hat(2), 0.500_000_250_125_083_4) < 1e-12);
    }

    #[test]
    fn lr_schedule() {
        let s = LrSchedule::linear_then_floor(1e-2, 1e-4, 100).unwrap();
        assert_eq!(s.lr_at(0), 1e-2);
        assert_eq!(s.lr_at(100), 1e-4);
        assert_eq!(s.lr_at(1000), 1e-4);
        assert!(rel(s.lr_at(50), (1e-2 + 1e-4) / 2.0) < 1e-15);
        let f = LrSchedule::fixed(0.3).unwrap();
        assert_eq!(f.lr_at(0), 0.3);
        assert_eq!(lr_at(&f, 123_456), 0.3);
        assert!(LrSchedule::linear_then_floor(1e-4, 1e-2, 10).is_err());
        assert!(LrSchedule::linear_then_floor(1e-2, 1e-4, 0).is_err());
        assert!(LrSchedule::fixed(0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rates_stay_in_unit_interval(beta2 in 0.5f64..0.9999, t in 1u64..10_000_000) {
                for s in [nx(beta2), DecaySchedule::new(0.9, DecayFamily::AdamClassic { beta2 }).unwrap()] {
                    let c = s.coefficients(t);
                    prop_assert!((0.0..=1.0).contains(&c.beta2_hat));
                    prop_assert!(c.one_minus_beta2_hat >= 0.0 && c.one_minus_beta2_hat <= 1.0);
                    // saturates at 0.9 in f64 once 0.9^t drops below the rounding unit
                    prop_assert!((0.0..=0.9).contains(&c.beta1_hat));
                }
            }

            #[test]
            fn lr_is_between_min_and_peak(t in 0u64..1000) {
                let s = LrSchedule::linear_then_floor(0.1, 0.001, 300).unwrap();
                let lr = s.lr_at(t);
                prop_assert!((0.001..=0.1).contains(&lr));
            }
        }
    }
}
