//! Power of a procedure under an alternative, and trial-design searches built
//! on it: two-arm calibration, allocation between groups, required sample size.

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, OmtError, Result};
use crate::fmt::dec4;
use crate::gauss::{quantile_unchecked, std_normal_cdf, AlternativeModel};
use crate::numerics::{mc_estimate, McConfig, McEstimate, QuadratureConfig};
use crate::objective::{ObjectiveSpec, Weights};
use crate::procedures::{build_omt, Event, Procedure, ProcedureKind};

/// Lower end of the sample-size search (one person per group).
pub const N_MIN: u64 = 2;
/// Default upper end of the sample-size search.
pub const N_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PowerMeasure {
    Avg,
    Any,
    Pi1,
    Combo,
}

impl PowerMeasure {
    /// Table order.
    pub const ALL: [PowerMeasure; 4] = [
        PowerMeasure::Avg,
        PowerMeasure::Any,
        PowerMeasure::Pi1,
        PowerMeasure::Combo,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PowerMeasure::Avg => "pi_avg",
            PowerMeasure::Any => "pi_any",
            PowerMeasure::Pi1 => "pi_1",
            PowerMeasure::Combo => "pi_combo",
        }
    }

    /// Objective weights whose optimal rule targets this measure.
    pub fn weights(&self) -> Weights {
        match self {
            PowerMeasure::Avg => Weights::AVG,
            PowerMeasure::Any => Weights::ANY,
            PowerMeasure::Pi1 => Weights::PI1,
            PowerMeasure::Combo => Weights::COMBO,
        }
    }
}

impl fmt::Display for PowerMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PowerMeasure {
    type Err = OmtError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pi_avg" | "avg" => PowerMeasure::Avg,
            "pi_any" | "any" => PowerMeasure::Any,
            "pi_1" | "pi1" => PowerMeasure::Pi1,
            "pi_combo" | "combo" => PowerMeasure::Combo,
            other => return domain(format!("unknown power measure '{other}'")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerReport {
    pub pi_avg: f64,
    pub pi_any: f64,
    pub pi_1: f64,
    pub pi_combo: f64,
}

impl PowerReport {
    pub fn from_parts(pi_any: f64, pi_avg: f64, pi_1: f64) -> Self {
        Self {
            pi_avg,
            pi_any,
            pi_1,
            pi_combo: pi_any / 3.0 + 2.0 * pi_1 / 3.0,
        }
    }

    pub fn get(&self, m: PowerMeasure) -> f64 {
        match m {
            PowerMeasure::Avg => self.pi_avg,
            PowerMeasure::Any => self.pi_any,
            PowerMeasure::Pi1 => self.pi_1,
            PowerMeasure::Combo => self.pi_combo,
        }
    }

    pub fn set(&mut self, m: PowerMeasure, value: f64) {
        match m {
            PowerMeasure::Avg => self.pi_avg = value,
            PowerMeasure::Any => self.pi_any = value,
            PowerMeasure::Pi1 => self.pi_1 = value,
            PowerMeasure::Combo => self.pi_combo = value,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("measure,value\n");
        for m in PowerMeasure::ALL {
            out.push_str(&format!("{},{}\n", m.name(), dec4(self.get(m))));
        }
        out
    }
}

/// Probabilities of rejecting `H1`, `H2`, and at least one, under `model`.
pub fn rejection_probabilities(
    proc: &Procedure,
    model: &AlternativeModel,
    cfg: &QuadratureConfig,
) -> Result<[f64; 3]> {
    Ok([
        proc.event_probability(Event::Reject1, model, cfg)?,
        proc.event_probability(Event::Reject2, model, cfg)?,
        proc.event_probability(Event::RejectAny, model, cfg)?,
    ])
}

/// Global-null rejection probability.
pub fn fwer(proc: &Procedure, cfg: &QuadratureConfig) -> Result<f64> {
    proc.global_null_rejection(cfg)
}

pub fn evaluate_power(
    proc: &Procedure,
    model: &AlternativeModel,
    cfg: &QuadratureConfig,
) -> Result<PowerReport> {
    let [d1, d2, any] = rejection_probabilities(proc, model, cfg)?;
    let only1 = model.with_thetas(model.theta1, 0.0);
    let only2 = model.with_thetas(0.0, model.theta2);
    let p1 = proc.event_probability(Event::Reject1, &only1, cfg)?;
    let p2 = proc.event_probability(Event::Reject2, &only2, cfg)?;
    Ok(PowerReport::from_parts(any, 0.5 * (d1 + d2), 0.5 * (p1 + p2)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McPowerReport {
    pub pi_avg: McEstimate,
    pub pi_any: McEstimate,
    pub pi_1: McEstimate,
    pub pi_combo: McEstimate,
}

impl McPowerReport {
    pub fn get(&self, m: PowerMeasure) -> McEstimate {
        match m {
            PowerMeasure::Avg => self.pi_avg,
            PowerMeasure::Any => self.pi_any,
            PowerMeasure::Pi1 => self.pi_1,
            PowerMeasure::Combo => self.pi_combo,
        }
    }
}

/// Simulated power. The two single-alternative terms of `Π_1` use seeds
/// `seed + 1` and `seed + 2`, so their errors are independent of each other.
pub fn mc_power(proc: &Procedure, model: &AlternativeModel, mc: &McConfig) -> Result<McPowerReport> {
    let any = mc_estimate(
        |z| {
            let d = proc.decide_z(z);
            f64::from(d.d1 || d.d2)
        },
        model,
        mc,
    )?;
    let avg = mc_estimate(
        |z| {
            let d = proc.decide_z(z);
            0.5 * (f64::from(d.d1) + f64::from(d.d2))
        },
        model,
        mc,
    )?;
    let only1 = model.with_thetas(model.theta1, 0.0);
    let only2 = model.with_thetas(0.0, model.theta2);
    let a = mc_estimate(
        |z| f64::from(proc.decide_z(z).d1),
        &only1,
        &mc.with_seed(mc.seed.wrapping_add(1)),
    )?;
    let b = mc_estimate(
        |z| f64::from(proc.decide_z(z).d2),
        &only2,
        &mc.with_seed(mc.seed.wrapping_add(2)),
    )?;
    let pi1 = McEstimate {
        mean: 0.5 * (a.mean + b.mean),
        std_error: 0.5 * a.std_error.hypot(b.std_error),
    };
    let combo = McEstimate {
        mean: any.mean / 3.0 + 2.0 * pi1.mean / 3.0,
        std_error: (any.std_error / 3.0).hypot(2.0 * pi1.std_error / 3.0),
    };
    Ok(McPowerReport {
        pi_avg: avg,
        pi_any: any,
        pi_1: pi1,
        pi_combo: combo,
    })
}

fn check_rate(name: &str, r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("{name} {r} is outside (0, 1)"));
    }
    Ok(())
}

/// A two-arm comparison of event proportions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoArmDesign {
    pub rate_control: f64,
    pub rate_treat: f64,
    pub n_control: u64,
    pub n_treat: u64,
}

impl TwoArmDesign {
    pub fn new(rate_control: f64, rate_treat: f64, n_control: u64, n_treat: u64) -> Result<Self> {
        let d = Self {
            rate_control,
            rate_treat,
            n_control,
            n_treat,
        };
        d.validate()?;
        Ok(d)
    }

    /// `persons` split evenly between arms, an odd remainder going to control.
    pub fn with_persons(rate_control: f64, rate_treat: f64, persons: u64) -> Result<Self> {
        Self::new(
            rate_control,
            rate_treat,
            persons.div_ceil(2),
            persons / 2,
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_rate("control rate", self.rate_control)?;
        check_rate("treatment rate", self.rate_treat)?;
        if self.n_control == 0 || self.n_treat == 0 {
            return domain("each arm needs at least one person");
        }
        Ok(())
    }
}

/// Mean of the one-sided z-statistic (unpooled variance).
pub fn theta_from_design(d: &TwoArmDesign) -> Result<f64> {
    d.validate()?;
    let (pc, pt) = (d.rate_control, d.rate_treat);
    let var = pc * (1.0 - pc) / d.n_control as f64 + pt * (1.0 - pt) / d.n_treat as f64;
    Ok((pt - pc) / var.sqrt())
}

/// One-sided p-value `Φ(z)` of the observed difference in proportions,
/// treatment minus control, with unpooled variance.
pub fn observed_pvalue(
    events_control: u64,
    n_control: u64,
    events_treat: u64,
    n_treat: u64,
) -> Result<f64> {
    if n_control == 0 || n_treat == 0 {
        return domain("each arm needs at least one person");
    }
    if events_control > n_control || events_treat > n_treat {
        return domain(format!(
            "event counts exceed arm sizes ({events_control}/{n_control}, {events_treat}/{n_treat})"
        ));
    }
    let pc = events_control as f64 / n_control as f64;
    let pt = events_treat as f64 / n_treat as f64;
    for (arm, p) in [("control", pc), ("treatment", pt)] {
        if p == 0.0 || p == 1.0 {
            return Err(OmtError::DegenerateVariance(format!(
                "observed {arm} proportion is {p}"
            )));
        }
    }
    let var = pc * (1.0 - pc) / n_control as f64 + pt * (1.0 - pt) / n_treat as f64;
    Ok(std_normal_cdf((pt - pc) / var.sqrt()))
}

/// Shift `θ` at which a single level-`alpha` test has power `beta`:
/// `Φ⁻¹(α) − Φ⁻¹(β)`.
pub fn theta_from_marginal_power(beta: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return domain(format!("alpha {alpha} is outside (0, 0.5)"));
    }
    if !(beta >= alpha && beta < 1.0) {
        return domain(format!("power {beta} is outside [alpha, 1)"));
    }
    Ok(quantile_unchecked(alpha) - quantile_unchecked(beta))
}

/// Maps the number of persons in a group to that group's shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Calibration {
    /// Two-proportion design at fixed event rates.
    Design { rate_control: f64, rate_treat: f64 },
    /// A group of `reference_persons` has marginal power `beta` at level
    /// `alpha`; the shift grows with the square root of the group size.
    MarginalPower {
        beta: f64,
        alpha: f64,
        reference_persons: u64,
    },
}

impl Calibration {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Calibration::Design {
                rate_control,
                rate_treat,
            } => {
                check_rate("control rate", rate_control)?;
                check_rate("treatment rate", rate_treat)
            }
            Calibration::MarginalPower {
                beta,
                alpha,
                reference_persons,
            } => {
                if reference_persons == 0 {
                    return domain("reference group size must be positive");
                }
                theta_from_marginal_power(beta, alpha).map(|_| ())
            }
        }
    }

    /// Shift of a group with `persons` people; zero when either arm would be empty.
    pub fn theta(&self, persons: u64) -> Result<f64> {
        self.validate()?;
        if persons < 2 {
            return Ok(0.0);
        }
        match *self {
            Calibration::Design {
                rate_control,
                rate_treat,
            } => theta_from_design(&TwoArmDesign::with_persons(rate_control, rate_treat, persons)?),
            Calibration::MarginalPower {
                beta,
                alpha,
                reference_persons,
            } => {
                let t = theta_from_marginal_power(beta, alpha)?;
                Ok(t * (persons as f64 / reference_persons as f64).sqrt())
            }
        }
    }

    /// Group sizes `(round(rN), N − round(rN))` and their shifts.
    pub fn split(&self, total: u64, r: f64) -> Result<((u64, u64), (f64, f64))> {
        if !(0.0..=1.0).contains(&r) {
            return domain(format!("split {r} is outside [0, 1]"));
        }
        let m1 = ((r * total as f64).round() as u64).min(total);
        let m2 = total - m1;
        Ok(((m1, m2), (self.theta(m1)?, self.theta(m2)?)))
    }
}

/// Power of a single level-`alpha` test of the funded hypothesis when the
/// other hypothesis gets nobody. Rejections of the unfunded (true) null are
/// not discoveries, so the average and `Π_1` count half.
fn single_test_report(alpha: f64, theta: f64) -> PowerReport {
    let p = std_normal_cdf(quantile_unchecked(alpha) - theta);
    PowerReport::from_parts(p, 0.5 * p, 0.5 * p)
}

/// Which optimal rule is evaluated at each design point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AllocationObjective {
    /// Each measure is evaluated under the rule that is optimal for it.
    Matched,
    /// One rule, optimal for these weights, evaluated under every measure.
    Fixed(Weights),
}

/// A procedure family whose members are indexed by the design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcedureFamily {
    Builtin(ProcedureKind),
    Omt(AllocationObjective),
}

impl ProcedureFamily {
    pub fn label(&self) -> String {
        match self {
            ProcedureFamily::Builtin(k) => k.name().to_string(),
            ProcedureFamily::Omt(_) => "omt".to_string(),
        }
    }
}

/// All four measures for a family at shifts `(theta1, theta2)`.
pub fn family_power(
    family: &ProcedureFamily,
    theta1: f64,
    theta2: f64,
    alpha: f64,
    cfg: &QuadratureConfig,
) -> Result<PowerReport> {
    if theta1 == 0.0 || theta2 == 0.0 {
        return Ok(single_test_report(alpha, theta1 + theta2));
    }
    let model = AlternativeModel::independent(theta1, theta2)?;
    match family {
        ProcedureFamily::Builtin(kind) => {
            let proc = Procedure::builtin(*kind, alpha, cfg)?;
            evaluate_power(&proc, &model, cfg)
        }
        ProcedureFamily::Omt(AllocationObjective::Fixed(w)) => {
            let proc = build_omt(&ObjectiveSpec::new(*w, model, alpha)?, cfg)?;
            evaluate_power(&proc, &model, cfg)
        }
        ProcedureFamily::Omt(AllocationObjective::Matched) => {
            let mut out = PowerReport::default();
            for m in PowerMeasure::ALL {
                let proc = build_omt(&ObjectiveSpec::new(m.weights(), model, alpha)?, cfg)?;
                out.set(m, evaluate_power(&proc, &model, cfg)?.get(m));
            }
            Ok(out)
        }
    }
}

/// Power of a family for `total` persons split `r : 1 − r` between groups.
pub fn power_at_n(
    family: &ProcedureFamily,
    total: u64,
    r: f64,
    calibration: &Calibration,
    alpha: f64,
    cfg: &QuadratureConfig,
) -> Result<PowerReport> {
    let (_, (t1, t2)) = calibration.split(total, r)?;
    family_power(family, t1, t2, alpha, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub r_grid: Vec<f64>,
    pub power_at_r: Vec<PowerReport>,
}

impl AllocationResult {
    /// First split attaining the largest value of `m`.
    pub fn argmax(&self, m: PowerMeasure) -> f64 {
        let mut best = 0;
        for (i, rep) in self.power_at_r.iter().enumerate() {
            if rep.get(m) > self.power_at_r[best].get(m) {
                best = i;
            }
        }
        self.r_grid[best]
    }

    pub fn power(&self, r: f64) -> Option<&PowerReport> {
        self.r_grid
            .iter()
            .position(|x| (x - r).abs() < 1e-12)
            .map(|i| &self.power_at_r[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,pi_avg,pi_any,pi_1,pi_combo\n");
        for (r, p) in self.r_grid.iter().zip(&self.power_at_r) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                dec4(*r),
                dec4(p.pi_avg),
                dec4(p.pi_any),
                dec4(p.pi_1),
                dec4(p.pi_combo)
            ));
        }
        out
    }
}

/// Evaluates the optimal rule at every split in `r_grid`; the grid is sorted
/// and deduplicated first.
pub fn allocation_search(
    total: u64,
    objective: AllocationObjective,
    calibration: &Calibration,
    r_grid: &[f64],
    alpha: f64,
    cfg: &QuadratureConfig,
) -> Result<AllocationResult> {
    if r_grid.is_empty() {
        return domain("allocation grid is empty");
    }
    if total < N_MIN {
        return domain(format!("total sample size must be at least {N_MIN}"));
    }
    let mut grid = r_grid.to_vec();
    if let Some(bad) = grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return domain(format!("split {bad} is outside [0, 1]"));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let family = ProcedureFamily::Omt(objective);
    let power_at_r = grid
        .iter()
        .map(|&r| power_at_n(&family, total, r, calibration, alpha, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(AllocationResult {
        r_grid: grid,
        power_at_r,
    })
}

/// Smallest total sample size (integer persons) at which the family reaches
/// `target` for `measure`.
#[allow(clippy::too_many_arguments)]
pub fn required_n_for_power(
    family: &ProcedureFamily,
    measure: PowerMeasure,
    target: f64,
    calibration: &Calibration,
    r: f64,
    alpha: f64,
    cfg: &QuadratureConfig,
    cap: u64,
) -> Result<u64> {
    if target.is_nan() {
        return domain("target power is NaN");
    }
    if target >= 1.0 {
        return Err(OmtError::Unachievable { target, cap });
    }
    if target <= 0.0 {
        return Ok(N_MIN);
    }
    let reaches = |n: u64| -> Result<bool> {
        Ok(power_at_n(family, n, r, calibration, alpha, cfg)?.get(measure) >= target)
    };
    if reaches(N_MIN)? {
        return Ok(N_MIN);
    }
    let mut lo = N_MIN;
    let mut hi = N_MIN;
    loop {
        hi = (hi * 2).min(cap);
        if reaches(hi)? {
            break;
        }
        if hi == cap {
            return Err(OmtError::Unachievable { target, cap });
        }
        lo = hi;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Rounding of group sizes can make power slightly non-monotone in N.
    let mut n = hi;
    for _ in 0..8 {
        if n <= N_MIN || !reaches(n - 1)? {
            break;
        }
        n -= 1;
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SavingsReport {
    pub measure: PowerMeasure,
    pub n_reference: u64,
    /// Power of the optimal rule for `measure` at the reference size.
    pub target: f64,
    /// Size at which the comparator first reaches `target`.
    pub n_required: u64,
    /// `(n_required − n_reference) / n_required · 100`.
    pub savings_pct: f64,
}

/// Sample-size saving of the optimal rule for `measure` relative to `comparator`.
#[allow(clippy::too_many_arguments)]
pub fn savings(
    measure: PowerMeasure,
    n_reference: u64,
    r: f64,
    comparator: ProcedureKind,
    calibration: &Calibration,
    alpha: f64,
    cfg: &QuadratureConfig,
    cap: u64,
) -> Result<SavingsReport> {
    let omt = ProcedureFamily::Omt(AllocationObjective::Fixed(measure.weights()));
    let target = power_at_n(&omt, n_reference, r, calibration, alpha, cfg)?.get(measure);
    let n_required = required_n_for_power(
        &ProcedureFamily::Builtin(comparator),
        measure,
        target,
        calibration,
        r,
        alpha,
        cfg,
        cap,
    )?;
    Ok(SavingsReport {
        measure,
        n_reference,
        target,
        n_required,
        savings_pct: (n_required as f64 - n_reference as f64) / n_required as f64 * 100.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALPHA: f64 = 0.025;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn design_theta() {
        let d = TwoArmDesign::new(0.075, 0.048_75, 1200, 1200).unwrap();
        assert!((theta_from_design(&d).unwrap() + 2.673).abs() < 0.01);
        let d = TwoArmDesign::new(0.075, 0.048_75, 1956, 1914).unwrap();
        assert!((theta_from_design(&d).unwrap() + 3.397).abs() < 0.01);
        let d = TwoArmDesign::new(0.1, 0.1, 10, 20).unwrap();
        assert_eq!(theta_from_design(&d).unwrap(), 0.0);
        assert!(TwoArmDesign::new(0.0, 0.1, 10, 10).is_err());
        assert!(TwoArmDesign::new(0.1, 0.1, 0, 10).is_err());
    }

    #[test]
    fn apex_pvalues() {
        assert!((observed_pvalue(166, 1956, 132, 1914).unwrap() - 0.032).abs() < 1e-3);
        assert!((observed_pvalue(57, 1218, 33, 1198).unwrap() - 0.006).abs() < 1e-3);
        assert!((observed_pvalue(10, 100, 20, 200).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            observed_pvalue(0, 100, 3, 100),
            Err(OmtError::DegenerateVariance(_))
        ));
        assert!(observed_pvalue(101, 100, 3, 100).is_err());
    }

    #[test]
    fn marginal_power_theta() {
        let t = theta_from_marginal_power(0.85, ALPHA).unwrap();
        assert!((t + 2.996).abs() < 1e-3);
        assert!(theta_from_marginal_power(ALPHA, ALPHA).unwrap().abs() < 1e-12);
        let t = theta_from_marginal_power(0.5, ALPHA).unwrap();
        assert!((t + 1.959_964).abs() < 1e-6);
        assert!(theta_from_marginal_power(1.0, ALPHA).is_err());
        assert!(theta_from_marginal_power(0.01, ALPHA).is_err());
    }

    #[test]
    fn calibration_scaling() {
        let cal = Calibration::MarginalPower {
            beta: 0.85,
            alpha: ALPHA,
            reference_persons: 2400,
        };
        let ((m1, m2), (t1, t2)) = cal.split(4800, 0.25).unwrap();
        assert_eq!((m1, m2), (1200, 3600));
        let t = theta_from_marginal_power(0.85, ALPHA).unwrap();
        assert!((t1 - t * 0.5f64.sqrt()).abs() < 1e-12);
        assert!((t2 - t * 1.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(cal.split(4800, 0.0).unwrap().1 .0, 0.0);

        let design = Calibration::Design {
            rate_control: 0.075,
            rate_treat: 0.048_75,
        };
        assert!((design.theta(2400).unwrap() + 2.673).abs() < 0.01);
        assert_eq!(design.theta(1).unwrap(), 0.0);
    }

    #[test]
    fn bonferroni_null_pi1() {
        let b = Procedure::bonferroni(ALPHA).unwrap();
        let r = evaluate_power(&b, &AlternativeModel::global_null(), &cfg()).unwrap();
        assert!((r.pi_1 - ALPHA / 2.0).abs() < 1e-10);
    }

    #[test]
    fn report_csv() {
        let r = PowerReport::from_parts(0.9281, 0.74712, 0.66999);
        assert!((r.pi_combo - (0.9281 / 3.0 + 2.0 * 0.66999 / 3.0)).abs() < 1e-15);
        assert_eq!(
            r.to_csv(),
            "measure,value\npi_avg,0.7471\npi_any,0.9281\npi_1,0.6700\npi_combo,0.7560\n"
        );
    }

    #[test]
    fn single_funded_group() {
        let rep = family_power(&ProcedureFamily::Builtin(ProcedureKind::Hommel), -3.0, 0.0, ALPHA, &cfg())
            .unwrap();
        let p = std_normal_cdf(quantile_unchecked(ALPHA) + 3.0);
        assert!((rep.pi_any - p).abs() < 1e-15);
        assert!((rep.pi_1 - p / 2.0).abs() < 1e-15);
        assert!((rep.pi_combo - 2.0 * p / 3.0).abs() < 1e-15);
    }

    #[test]
    fn required_n_edges() {
        let fam = ProcedureFamily::Builtin(ProcedureKind::Hommel);
        let cal = Calibration::MarginalPower {
            beta: 0.85,
            alpha: ALPHA,
            reference_persons: 2400,
        };
        let n = required_n_for_power(&fam, PowerMeasure::Any, 0.0, &cal, 0.5, ALPHA, &cfg(), N_CAP);
        assert_eq!(n.unwrap(), N_MIN);
        let n = required_n_for_power(&fam, PowerMeasure::Any, 1.0, &cal, 0.5, ALPHA, &cfg(), N_CAP);
        assert!(matches!(n, Err(OmtError::Unachievable { .. })));
        let n = required_n_for_power(&fam, PowerMeasure::Any, 0.99, &cal, 0.5, ALPHA, &cfg(), 1000);
        assert!(matches!(n, Err(OmtError::Unachievable { .. })));

        // Marginal power of a single group is monotone in N with a known inverse.
        let target = 0.5;
        let n = required_n_for_power(
            &fam,
            PowerMeasure::Pi1,
            0.8,
            &cal,
            1.0,
            ALPHA,
            &cfg(),
            N_CAP,
        )
        .unwrap_err();
        assert!(matches!(n, OmtError::Unachievable { .. }));
        let n = required_n_for_power(&fam, PowerMeasure::Any, target, &cal, 1.0, ALPHA, &cfg(), N_CAP)
            .unwrap();
        // Φ(c − θ_ref √(N/2400)) ≥ 1/2  ⇔  N ≥ 2400 (c / θ_ref)².
        let t = theta_from_marginal_power(0.85, ALPHA).unwrap();
        let exact = 2400.0 * (quantile_unchecked(ALPHA) / t).powi(2);
        assert_eq!(n, exact.ceil() as u64);
    }

    #[test]
    fn allocation_grid_validation() {
        let cal = Calibration::Design {
            rate_control: 0.075,
            rate_treat: 0.048_75,
        };
        assert!(allocation_search(600, AllocationObjective::Matched, &cal, &[], ALPHA, &cfg()).is_err());
        assert!(
            allocation_search(600, AllocationObjective::Matched, &cal, &[1.5], ALPHA, &cfg()).is_err()
        );
        let res = allocation_search(
            600,
            AllocationObjective::Fixed(Weights::ANY),
            &cal,
            &[1.0, 0.5, 0.0, 0.5],
            ALPHA,
            &cfg(),
        )
        .unwrap();
        assert_eq!(res.r_grid, vec![0.0, 0.5, 1.0]);
        assert_eq!(res.argmax(PowerMeasure::Any), 0.0);
        let csv = res.to_csv();
        assert!(csv.starts_with("r,pi_avg,pi_any,pi_1,pi_combo\n0.0000,"));
    }
}
