//! Normal-distribution kernels and the p-value likelihood-ratio density.
//!
//! A one-sided p-value generated by a shifted normal statistic is
//! `p = Φ(θ + Z)`. Its density on (0, 1) is `exp(Φ⁻¹(p)·θ − θ²/2)`, which is
//! also its likelihood ratio against the uniform null. Most of the crate works
//! in z-space (`z = Φ⁻¹(p)`), where that density is a plain shifted normal.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{domain, Result};

/// Smallest p-value a decision rule will transform; smaller inputs are clamped.
pub const P_FLOOR: f64 = 1e-300;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF, `Φ(z)`.
///
/// Evaluated through `erfc` so that the lower tail keeps full relative
/// precision. Saturates to 0 or 1 outside the representable range.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Upper tail `1 − Φ(z)` without cancellation.
#[inline]
pub fn std_normal_sf(z: f64) -> f64 {
    std_normal_cdf(-z)
}

/// Standard normal quantile, `Φ⁻¹(u)`.
///
/// Wichura's AS241 (PPND16) rational approximation followed by one Newton
/// step against [`std_normal_cdf`].
pub fn std_normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return domain(format!("quantile argument {u} is outside (0, 1)"));
    }
    Ok(quantile_unchecked(u))
}

/// `Φ⁻¹` extended to the closed interval: 0 maps to −∞ and 1 to +∞.
pub(crate) fn quantile_unchecked(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    let z = ppnd16(u);
    // One Newton step; the upper half works with the complement so the
    // residual does not cancel.
    let resid = if u < 0.5 {
        std_normal_cdf(z) - u
    } else {
        (1.0 - u) - std_normal_sf(z)
    };
    let pdf = std_normal_pdf(z);
    if pdf > 0.0 && pdf.is_finite() {
        z - resid / pdf
    } else {
        z
    }
}

fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5.226_495_278_852_854_5e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let z = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

/// Likelihood ratio of a shifted-normal p-value against the uniform null,
/// expressed in z-space: `exp(θ·z − θ²/2)`.
#[inline]
pub fn lr_z(z: f64, theta: f64) -> f64 {
    (theta * z - 0.5 * theta * theta).exp()
}

/// Density of `p = Φ(θ + Z)` at `p`.
pub fn lr_density(p: f64, theta: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("p-value {p} is outside (0, 1)"));
    }
    if !theta.is_finite() {
        return domain(format!("shift {theta} is not finite"));
    }
    Ok(lr_z(quantile_unchecked(p), theta))
}

/// Standard bivariate normal density with correlation `rho`.
pub fn bivariate_null_density(z1: f64, z2: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return domain(format!("correlation {rho} is outside (-1, 1)"));
    }
    let one_m = 1.0 - rho * rho;
    let quad = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / one_m;
    Ok((-0.5 * quad).exp() / (2.0 * PI * one_m.sqrt()))
}

/// A pair of one-sided p-values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValuePair {
    pub p1: f64,
    pub p2: f64,
}

impl PValuePair {
    pub fn new(p1: f64, p2: f64) -> Self {
        Self { p1, p2 }
    }

    /// Rejects NaN and values outside [0, 1].
    pub fn validate(&self) -> Result<()> {
        for p in [self.p1, self.p2] {
            if !(0.0..=1.0).contains(&p) {
                return domain(format!("p-value {p} is outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// z-scores after clamping each p-value to `[P_FLOOR, 1]`.
    pub fn to_z(&self) -> ZScorePair {
        ZScorePair {
            z1: quantile_unchecked(self.p1.max(P_FLOOR)),
            z2: quantile_unchecked(self.p2.max(P_FLOOR)),
        }
    }
}

/// A pair of test statistics on the z-scale, `z = Φ⁻¹(p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZScorePair {
    pub z1: f64,
    pub z2: f64,
}

impl ZScorePair {
    pub fn new(z1: f64, z2: f64) -> Self {
        Self { z1, z2 }
    }

    pub fn to_p(&self) -> PValuePair {
        PValuePair {
            p1: std_normal_cdf(self.z1),
            p2: std_normal_cdf(self.z2),
        }
    }
}

/// Shifted bivariate-normal model for the z-scores:
/// `z1 = θ1 + Z1`, `z2 = θ2 + ρ·Z1 + √(1−ρ²)·Z2`.
///
/// Negative shifts are alternatives; zero is the boundary null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternativeModel {
    pub theta1: f64,
    pub theta2: f64,
    pub rho: f64,
}

impl AlternativeModel {
    pub fn new(theta1: f64, theta2: f64, rho: f64) -> Result<Self> {
        if !theta1.is_finite() || !theta2.is_finite() {
            return domain(format!("shifts ({theta1}, {theta2}) must be finite"));
        }
        if !(rho.abs() < 1.0) {
            return domain(format!("correlation {rho} is outside (-1, 1)"));
        }
        Ok(Self { theta1, theta2, rho })
    }

    /// Independent statistics with the given shifts.
    pub fn independent(theta1: f64, theta2: f64) -> Result<Self> {
        Self::new(theta1, theta2, 0.0)
    }

    /// Exchangeable shifts, independent statistics.
    pub fn exchangeable(theta: f64) -> Result<Self> {
        Self::new(theta, theta, 0.0)
    }

    /// Both nulls true, independent statistics.
    pub fn global_null() -> Self {
        Self {
            theta1: 0.0,
            theta2: 0.0,
            rho: 0.0,
        }
    }

    /// Same correlation with both shifts set to zero.
    pub fn null_like(&self) -> Self {
        Self {
            theta1: 0.0,
            theta2: 0.0,
            rho: self.rho,
        }
    }

    pub fn with_thetas(&self, theta1: f64, theta2: f64) -> Self {
        Self {
            theta1,
            theta2,
            rho: self.rho,
        }
    }

    /// Joint density of `(z1, z2)` under this model.
    pub fn z_density(&self, z1: f64, z2: f64) -> f64 {
        let one_m = 1.0 - self.rho * self.rho;
        let a = z1 - self.theta1;
        let b = z2 - self.theta2;
        let quad = (a * a - 2.0 * self.rho * a * b + b * b) / one_m;
        (-0.5 * quad).exp() / (2.0 * PI * one_m.sqrt())
    }
}
