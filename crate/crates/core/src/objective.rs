//! Power objectives and the score function that ranks p-value pairs.
//!
//! Every objective handled here is a convex combination of three pure
//! measures:
//!
//! * `Π_any`: probability of at least one discovery when both nulls are false,
//! * `Π_avg`: expected fraction of the two hypotheses rejected when both are false,
//! * `Π_1`: expected discoveries when exactly one null is false, each equally likely.
//!
//! Each measure integrates `D1·a1 + D2·a2 + max(D1, D2)·a3` against the
//! p-value square. The score replaces the decisions with `I(p_i ≤ α)`; the
//! optimal rule rejects where the score exceeds a threshold.

use crate::error::{domain, OmtError, Result};
use crate::gauss::{lr_z, quantile_unchecked, AlternativeModel, PValuePair};

/// The three pure power measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Any,
    Avg,
    Pi1,
}

/// Which coefficient function of the integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    /// Multiplies `D1`.
    A1,
    /// Multiplies `D2`.
    A2,
    /// Multiplies `max(D1, D2)`.
    A3,
}

/// Convex weights over the pure measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub any: f64,
    pub avg: f64,
    pub pi1: f64,
}

impl Weights {
    pub const ANY: Weights = Weights {
        any: 1.0,
        avg: 0.0,
        pi1: 0.0,
    };
    pub const AVG: Weights = Weights {
        any: 0.0,
        avg: 1.0,
        pi1: 0.0,
    };
    pub const PI1: Weights = Weights {
        any: 0.0,
        avg: 0.0,
        pi1: 1.0,
    };
    /// `1/3·Π_any + 2/3·Π_1`.
    pub const COMBO: Weights = Weights {
        any: 1.0 / 3.0,
        avg: 0.0,
        pi1: 2.0 / 3.0,
    };

    pub fn pure(measure: Measure) -> Self {
        match measure {
            Measure::Any => Self::ANY,
            Measure::Avg => Self::AVG,
            Measure::Pi1 => Self::PI1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.any, self.avg, self.pi1];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return domain(format!("weights {w:?} must be finite and nonnegative"));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return domain(format!("weights {w:?} sum to {sum}, not 1"));
        }
        Ok(())
    }
}

/// An objective: weights, the alternative it is tuned to, and the level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSpec {
    pub weights: Weights,
    pub model: AlternativeModel,
    pub alpha: f64,
}

impl ObjectiveSpec {
    pub fn new(weights: Weights, model: AlternativeModel, alpha: f64) -> Result<Self> {
        weights.validate()?;
        if !(alpha > 0.0 && alpha <= 0.5) {
            return domain(format!("alpha {alpha} is outside (0, 0.5]"));
        }
        if !(model.theta1 < 0.0 && model.theta2 < 0.0) {
            return domain(format!(
                "objective shifts ({}, {}) must both be negative",
                model.theta1, model.theta2
            ));
        }
        Ok(Self {
            weights,
            model,
            alpha,
        })
    }

    pub fn pure(measure: Measure, model: AlternativeModel, alpha: f64) -> Result<Self> {
        Self::new(Weights::pure(measure), model, alpha)
    }
}

/// The score `s(p)` of an objective, evaluated in z-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreFunction {
    spec: ObjectiveSpec,
    crit: f64,
}

impl ScoreFunction {
    /// Fails with `UnsupportedModel` for correlated statistics.
    pub fn new(spec: ObjectiveSpec) -> Result<Self> {
        if spec.model.rho != 0.0 {
            return Err(OmtError::UnsupportedModel(format!(
                "scores are defined for independent statistics only (rho = {})",
                spec.model.rho
            )));
        }
        Ok(Self {
            spec,
            crit: quantile_unchecked(spec.alpha),
        })
    }

    pub fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }

    /// `Φ⁻¹(α)`, the z-value of the marginal level.
    pub fn crit(&self) -> f64 {
        self.crit
    }

    /// `(a1, a2, a3)` at a z-pair.
    pub fn coefficients_z(&self, z1: f64, z2: f64) -> (f64, f64, f64) {
        let w = &self.spec.weights;
        let lr1 = lr_z(z1, self.spec.model.theta1);
        let lr2 = lr_z(z2, self.spec.model.theta2);
        let joint = lr1 * lr2;
        let a1 = 0.5 * (w.avg * joint + w.pi1 * lr1);
        let a2 = 0.5 * (w.avg * joint + w.pi1 * lr2);
        let a3 = w.any * joint;
        (a1, a2, a3)
    }

    /// Score with the indicators supplied explicitly.
    ///
    /// Inside a rectangle where the indicators are constant this is a smooth
    /// function, non-increasing in each coordinate, which lets boundary
    /// searches run past the rectangle edge.
    #[inline]
    pub fn piece_z(&self, z1: f64, z2: f64, in1: bool, in2: bool) -> f64 {
        if !(in1 || in2) {
            return 0.0;
        }
        let (a1, a2, a3) = self.coefficients_z(z1, z2);
        let mut s = a3;
        if in1 {
            s += a1;
        }
        if in2 {
            s += a2;
        }
        s
    }

    /// The `z2` at which `piece_z(z1, ·, in1, in2)` crosses `t`: the score
    /// exceeds `t` exactly when `z2` is below the returned value (`±∞` when
    /// it always or never does).
    ///
    /// At fixed `z1` the score is `k0 + k1·lr(z2)` with `k0, k1 ≥ 0`, and
    /// `lr(z2)` falls from `∞` to `0`, so the crossing has a closed form.
    pub fn crossing_z2(&self, z1: f64, in1: bool, in2: bool, t: f64) -> f64 {
        if !(in1 || in2) {
            return if 0.0 > t { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        let w = &self.spec.weights;
        let theta2 = self.spec.model.theta2;
        let lr1 = lr_z(z1, self.spec.model.theta1);
        let mut k0 = 0.0;
        let mut k1 = w.any * lr1;
        if in1 {
            k0 += 0.5 * w.pi1 * lr1;
            k1 += 0.5 * w.avg * lr1;
        }
        if in2 {
            k1 += 0.5 * (w.avg * lr1 + w.pi1);
        }
        let excess = t - k0;
        if excess < 0.0 || (excess == 0.0 && k1 > 0.0) {
            return f64::INFINITY;
        }
        if k1 == 0.0 {
            return f64::NEG_INFINITY;
        }
        // lr(z2) > q  ⇔  θ2·z2 − θ2²/2 > ln q  ⇔  z2 < (ln q + θ2²/2) / θ2.
        ((excess / k1).ln() + 0.5 * theta2 * theta2) / theta2
    }

    #[inline]
    pub fn eval_z(&self, z1: f64, z2: f64) -> f64 {
        self.piece_z(z1, z2, z1 <= self.crit, z2 <= self.crit)
    }

    /// Score at a p-value pair. The indicators are evaluated on the p-scale.
    pub fn eval(&self, p: PValuePair) -> Result<f64> {
        check_open(p)?;
        let z = p.to_z();
        Ok(self.piece_z(z.z1, z.z2, p.p1 <= self.spec.alpha, p.p2 <= self.spec.alpha))
    }
}

fn check_open(p: PValuePair) -> Result<()> {
    for x in [p.p1, p.p2] {
        if !(x > 0.0 && x < 1.0) {
            return domain(format!("p-value {x} is outside (0, 1)"));
        }
    }
    Ok(())
}

/// One coefficient function of the objective integrand at `p`.
pub fn coefficient(spec: &ObjectiveSpec, which: Coefficient, p: PValuePair) -> Result<f64> {
    let sf = ScoreFunction::new(*spec)?;
    check_open(p)?;
    let z = p.to_z();
    let (a1, a2, a3) = sf.coefficients_z(z.z1, z.z2);
    Ok(match which {
        Coefficient::A1 => a1,
        Coefficient::A2 => a2,
        Coefficient::A3 => a3,
    })
}

/// Score of `spec` at `p`.
pub fn score(spec: &ObjectiveSpec, p: PValuePair) -> Result<f64> {
    ScoreFunction::new(*spec)?.eval(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::{lr_density, std_normal_cdf};
    use proptest::prelude::*;

    const ALPHA: f64 = 0.025;

    fn spec(w: Weights, t1: f64, t2: f64) -> ObjectiveSpec {
        ObjectiveSpec::new(w, AlternativeModel::independent(t1, t2).unwrap(), ALPHA).unwrap()
    }

    #[test]
    fn pure_coefficients() {
        let p = PValuePair::new(0.01, 0.3);
        let any = spec(Weights::ANY, -2.0, -2.0);
        assert_eq!(coefficient(&any, Coefficient::A1, p).unwrap(), 0.0);
        assert_eq!(coefficient(&any, Coefficient::A2, p).unwrap(), 0.0);
        let pi1 = spec(Weights::PI1, -2.0, -2.0);
        assert_eq!(coefficient(&pi1, Coefficient::A3, p).unwrap(), 0.0);

        let avg = spec(Weights::AVG, -2.0, -2.0);
        let a1 = coefficient(&avg, Coefficient::A1, PValuePair::new(0.5, 0.5)).unwrap();
        let expect = lr_density(0.5, -2.0).unwrap().powi(2) / 2.0;
        assert!((a1 - expect).abs() < 1e-15);
        assert!((a1 - 0.009_158).abs() < 1e-6);
    }

    #[test]
    fn score_examples() {
        let pi1 = spec(Weights::PI1, -2.0, -2.0);
        let s = score(&pi1, PValuePair::new(0.02, 0.5)).unwrap();
        assert!((s - 0.5 * lr_density(0.02, -2.0).unwrap()).abs() < 1e-12);
        // 40-digit evaluation of ½·exp(−2·Φ⁻¹(0.02) − 2).
        assert!((s - 4.113_814_254_924_93).abs() < 1e-9);

        for w in [Weights::ANY, Weights::AVG, Weights::PI1, Weights::COMBO] {
            let sp = spec(w, -2.0, -1.0);
            assert_eq!(score(&sp, PValuePair::new(0.5, 0.5)).unwrap(), 0.0);
        }
    }

    #[test]
    fn joint_term_active_on_the_strips() {
        // max(D1, D2) can be 1 whenever either p-value is at most alpha, so the
        // joint coefficient must count on the strips too.
        let any = spec(Weights::ANY, -2.0, -2.0);
        let s = score(&any, PValuePair::new(0.02, 0.5)).unwrap();
        let expect = lr_density(0.02, -2.0).unwrap() * lr_density(0.5, -2.0).unwrap();
        assert!((s - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let sp = spec(Weights::PI1, -2.0, -2.0);
        assert!(score(&sp, PValuePair::new(0.0, 0.5)).is_err());
        assert!(score(&sp, PValuePair::new(0.3, 1.0)).is_err());
        let w = Weights {
            any: 0.5,
            avg: 0.6,
            pi1: 0.0,
        };
        assert!(ObjectiveSpec::new(w, AlternativeModel::exchangeable(-1.0).unwrap(), ALPHA).is_err());
        let m = AlternativeModel::exchangeable(0.0).unwrap();
        assert!(ObjectiveSpec::new(Weights::ANY, m, ALPHA).is_err());
        let m = AlternativeModel::new(-1.0, -1.0, 0.3).unwrap();
        let sp = ObjectiveSpec::new(Weights::ANY, m, ALPHA).unwrap();
        assert!(matches!(
            ScoreFunction::new(sp),
            Err(OmtError::UnsupportedModel(_))
        ));
    }

    #[test]
    fn pi1_matches_closed_form_in_corner() {
        let theta = -2.3;
        let sp = spec(Weights::PI1, theta, theta);
        for &(p1, p2) in &[(0.01, 0.02), (0.001, 0.024), (0.025, 0.025)] {
            let s = score(&sp, PValuePair::new(p1, p2)).unwrap();
            let expect =
                0.5 * (lr_density(p1, theta).unwrap() + lr_density(p2, theta).unwrap());
            assert!((s - expect).abs() <= 1e-12 * expect);
        }
    }

    fn arb_weights() -> impl Strategy<Value = Weights> {
        (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b, c)| {
            let s = a + b + c + 1e-9;
            let any = a / s;
            let avg = b / s;
            Weights {
                any,
                avg,
                pi1: 1.0 - any - avg,
            }
        })
    }

    proptest! {
        #[test]
        fn score_is_linear_in_weights(
            w in arb_weights(),
            t1 in -4.0..-0.1f64,
            t2 in -4.0..-0.1f64,
            p1 in 1e-6..0.999f64,
            p2 in 1e-6..0.999f64,
        ) {
            let p = PValuePair::new(p1, p2);
            let s = score(&spec(w, t1, t2), p).unwrap();
            let parts = w.any * score(&spec(Weights::ANY, t1, t2), p).unwrap()
                + w.avg * score(&spec(Weights::AVG, t1, t2), p).unwrap()
                + w.pi1 * score(&spec(Weights::PI1, t1, t2), p).unwrap();
            prop_assert!((s - parts).abs() <= 1e-12 * s.abs().max(1.0));
        }

        #[test]
        fn score_is_exchangeable(
            t in -4.0..-0.1f64,
            p1 in 1e-6..0.999f64,
            p2 in 1e-6..0.999f64,
        ) {
            for w in [Weights::ANY, Weights::AVG, Weights::PI1] {
                let sp = spec(w, t, t);
                let a = score(&sp, PValuePair::new(p1, p2)).unwrap();
                let b = score(&sp, PValuePair::new(p2, p1)).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn score_nonincreasing_within_rectangles(
            w in arb_weights(),
            t1 in -4.0..-0.1f64,
            t2 in -4.0..-0.1f64,
            z1 in -6.0..2.0f64,
            z2 in -6.0..2.0f64,
            d1 in 0.0..2.0f64,
            d2 in 0.0..2.0f64,
        ) {
            let sf = ScoreFunction::new(spec(w, t1, t2)).unwrap();
            let c = sf.crit();
            let (q1, q2) = (z1 + d1, z2 + d2);
            // Same rectangle only.
            prop_assume!((z1 <= c) == (q1 <= c) && (z2 <= c) == (q2 <= c));
            prop_assert!(sf.eval_z(z1, z2) >= sf.eval_z(q1, q2));
            prop_assert!(sf.eval_z(z1, z2) >= 0.0);
        }
    }

    #[test]
    fn zero_off_the_l_region() {
        let sf = ScoreFunction::new(spec(Weights::COMBO, -3.0, -1.0)).unwrap();
        let c = sf.crit();
        assert!((std_normal_cdf(c) - ALPHA).abs() < 1e-15);
        assert_eq!(sf.eval_z(c + 1e-9, c + 1e-9), 0.0);
        assert!(sf.eval_z(c, c + 1.0) > 0.0);
    }

    #[test]
    fn crossing_matches_direct_evaluation() {
        let m = AlternativeModel::independent(-3.4, -2.7).unwrap();
        for w in [Weights::ANY, Weights::AVG, Weights::PI1, Weights::COMBO] {
            let f = ScoreFunction::new(ObjectiveSpec::new(w, m, 0.025).unwrap()).unwrap();
            for &z1 in &[-4.0, -2.5, -1.0, 0.5] {
                for (in1, in2) in [(true, false), (false, true), (true, true)] {
                    for &t in &[0.01, 1.0, 7.5, 80.0] {
                        let r = f.crossing_z2(z1, in1, in2, t);
                        if r.is_finite() {
                            assert!(f.piece_z(z1, r - 1e-7, in1, in2) > t);
                            assert!(f.piece_z(z1, r + 1e-7, in1, in2) <= t);
                        } else if r == f64::INFINITY {
                            assert!(f.piece_z(z1, 40.0, in1, in2) > t);
                        } else {
                            assert!(f.piece_z(z1, -40.0, in1, in2) <= t);
                        }
                    }
                }
            }
        }
    }

}
