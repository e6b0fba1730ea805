//! Decision rules for two hypotheses.
//!
//! Every rule here is marginally nominal (never rejects `H_i` with `p_i > α`)
//! and weakly monotone, so each rejection event is a lower set in the z-plane
//! and its probability reduces to a 1-D integral (see
//! [`crate::numerics::integrate_lower_set`]).

use std::f64::consts::{LN_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use crate::error::{domain, OmtError, Result};
use crate::gauss::{quantile_unchecked, AlternativeModel, PValuePair, ZScorePair};
use crate::numerics::{
    illinois, integrate_lower_set, lower_set_difference, lower_set_probability_fixed,
    GaussLegendre, LowerSet, LowerSetLayout, QuadratureConfig,
};
use crate::objective::{ObjectiveSpec, ScoreFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProcedureKind {
    Omt,
    Hommel,
    ClosedStouffer,
    Bittman,
    FixedSequence,
    Bonferroni,
}

impl ProcedureKind {
    pub const BUILTINS: [ProcedureKind; 5] = [
        ProcedureKind::Hommel,
        ProcedureKind::ClosedStouffer,
        ProcedureKind::Bittman,
        ProcedureKind::FixedSequence,
        ProcedureKind::Bonferroni,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProcedureKind::Omt => "omt",
            ProcedureKind::Hommel => "hommel",
            ProcedureKind::ClosedStouffer => "closed_stouffer",
            ProcedureKind::Bittman => "bittman",
            ProcedureKind::FixedSequence => "fixed_sequence",
            ProcedureKind::Bonferroni => "bonferroni",
        }
    }
}

impl fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProcedureKind {
    type Err = OmtError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "omt" => ProcedureKind::Omt,
            "hommel" => ProcedureKind::Hommel,
            "closed_stouffer" | "stouffer" => ProcedureKind::ClosedStouffer,
            "bittman" => ProcedureKind::Bittman,
            "fixed_sequence" => ProcedureKind::FixedSequence,
            "bonferroni" => ProcedureKind::Bonferroni,
            other => return domain(format!("unknown procedure '{other}'")),
        })
    }
}

/// Rejection decisions for `(H1, H2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Decision {
    pub d1: bool,
    pub d2: bool,
}

impl Decision {
    pub fn class(&self) -> RegionClass {
        match (self.d1, self.d2) {
            (false, false) => RegionClass::None,
            (true, false) => RegionClass::Only1,
            (false, true) => RegionClass::Only2,
            (true, true) => RegionClass::Both,
        }
    }

    /// Componentwise `self ⪰ other`.
    pub fn dominates(&self, other: &Decision) -> bool {
        (self.d1 || !other.d1) && (self.d2 || !other.d2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionClass {
    None,
    Only1,
    Only2,
    Both,
}

impl RegionClass {
    pub fn name(&self) -> &'static str {
        match self {
            RegionClass::None => "none",
            RegionClass::Only1 => "only1",
            RegionClass::Only2 => "only2",
            RegionClass::Both => "both",
        }
    }
}

/// The three rejection events whose probabilities make up every power measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Reject1,
    Reject2,
    RejectAny,
}

#[derive(Debug, Clone, PartialEq)]
enum Rule {
    Hommel,
    /// Reject `H_i` when `p_i ≤ α` and `z1 + z2 ≤ threshold`.
    ZSum { threshold: f64 },
    FixedSequence,
    Bonferroni,
    Omt { score: ScoreFunction, threshold: f64 },
}

/// A decision rule at a fixed level.
#[derive(Debug, Clone, PartialEq)]
pub struct Procedure {
    kind: ProcedureKind,
    alpha: f64,
    crit: f64,
    crit_half: f64,
    rule: Rule,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return domain(format!("alpha {alpha} is outside (0, 0.5]"));
    }
    Ok(())
}

impl Procedure {
    fn with_rule(kind: ProcedureKind, alpha: f64, rule: Rule) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            kind,
            alpha,
            crit: quantile_unchecked(alpha),
            crit_half: quantile_unchecked(alpha / 2.0),
            rule,
        })
    }

    /// Reject `H_i` iff `p_i ≤ α/2` or both p-values are at most `α`.
    pub fn hommel(alpha: f64) -> Result<Self> {
        Self::with_rule(ProcedureKind::Hommel, alpha, Rule::Hommel)
    }

    /// Closed testing with Stouffer's intersection test.
    pub fn closed_stouffer(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let threshold = SQRT_2 * quantile_unchecked(alpha);
        Self::with_rule(
            ProcedureKind::ClosedStouffer,
            alpha,
            Rule::ZSum { threshold },
        )
    }

    /// `H1` at level α, then `H2` at level α only if `H1` was rejected.
    pub fn fixed_sequence(alpha: f64) -> Result<Self> {
        Self::with_rule(ProcedureKind::FixedSequence, alpha, Rule::FixedSequence)
    }

    /// Equal-weight Bonferroni: `p_i ≤ α/2`.
    pub fn bonferroni(alpha: f64) -> Result<Self> {
        Self::with_rule(ProcedureKind::Bonferroni, alpha, Rule::Bonferroni)
    }

    /// Builtin procedures that need no construction. Bittman and the optimal
    /// rule go through their builders.
    pub fn builtin(kind: ProcedureKind, alpha: f64, cfg: &QuadratureConfig) -> Result<Self> {
        match kind {
            ProcedureKind::Hommel => Self::hommel(alpha),
            ProcedureKind::ClosedStouffer => Self::closed_stouffer(alpha),
            ProcedureKind::FixedSequence => Self::fixed_sequence(alpha),
            ProcedureKind::Bonferroni => Self::bonferroni(alpha),
            ProcedureKind::Bittman => build_bittman(alpha, cfg),
            ProcedureKind::Omt => domain("the optimal procedure needs an objective; use build_omt"),
        }
    }

    pub fn kind(&self) -> ProcedureKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `Φ⁻¹(α)`.
    pub fn crit(&self) -> f64 {
        self.crit
    }

    /// Threshold of the optimal rule on the score scale, or of Bittman's and
    /// closed-Stouffer's rules on the z-sum scale.
    pub fn threshold(&self) -> Option<f64> {
        match &self.rule {
            Rule::Omt { threshold, .. } | Rule::ZSum { threshold } => Some(*threshold),
            _ => None,
        }
    }

    pub fn objective(&self) -> Option<&ObjectiveSpec> {
        match &self.rule {
            Rule::Omt { score, .. } => Some(score.spec()),
            _ => None,
        }
    }

    /// Short label such as `hommel` or `omt[pi1]`.
    pub fn label(&self) -> String {
        match &self.rule {
            Rule::Omt { score, .. } => {
                let w = score.spec().weights;
                let tag = if w == crate::objective::Weights::ANY {
                    "any".to_string()
                } else if w == crate::objective::Weights::AVG {
                    "avg".to_string()
                } else if w == crate::objective::Weights::PI1 {
                    "pi1".to_string()
                } else if w == crate::objective::Weights::COMBO {
                    "combo".to_string()
                } else {
                    format!("{:.3}/{:.3}/{:.3}", w.any, w.avg, w.pi1)
                };
                format!("omt[{tag}]")
            }
            _ => self.kind.name().to_string(),
        }
    }

    #[inline]
    fn decide_parts(&self, in1: bool, in2: bool, half1: bool, half2: bool, z: ZScorePair) -> Decision {
        match &self.rule {
            Rule::Hommel => {
                let both = in1 && in2;
                Decision {
                    d1: half1 || both,
                    d2: half2 || both,
                }
            }
            Rule::ZSum { threshold } => {
                let pass = z.z1 + z.z2 <= *threshold;
                Decision {
                    d1: in1 && pass,
                    d2: in2 && pass,
                }
            }
            Rule::FixedSequence => Decision {
                d1: in1,
                d2: in1 && in2,
            },
            Rule::Bonferroni => Decision {
                d1: half1,
                d2: half2,
            },
            Rule::Omt { score, threshold } => {
                let reject = score.piece_z(z.z1, z.z2, in1, in2) > *threshold;
                Decision {
                    d1: in1 && reject,
                    d2: in2 && reject,
                }
            }
        }
    }

    /// Decision at a p-value pair; level comparisons are made on the p-scale.
    pub fn decide(&self, p: PValuePair) -> Result<Decision> {
        p.validate()?;
        let a = self.alpha;
        Ok(self.decide_parts(
            p.p1 <= a,
            p.p2 <= a,
            p.p1 <= a / 2.0,
            p.p2 <= a / 2.0,
            p.to_z(),
        ))
    }

    /// Decision at a z-pair.
    #[inline]
    pub fn decide_z(&self, z: ZScorePair) -> Decision {
        self.decide_parts(
            z.z1 <= self.crit,
            z.z2 <= self.crit,
            z.z1 <= self.crit_half,
            z.z2 <= self.crit_half,
            z,
        )
    }

    /// Upper z2-boundary of the optimal rule's rejection set at column `z1`.
    fn omt_boundary(&self, score: &ScoreFunction, t: f64, z1: f64) -> f64 {
        let c = self.crit;
        if z1 <= c {
            // Above c only H1 is in play; below c both are.
            let strip = score.crossing_z2(z1, true, false, t);
            if strip > c {
                return strip;
            }
            let corner = score.crossing_z2(z1, true, true, t);
            if corner > c {
                c
            } else {
                corner
            }
        } else {
            score.crossing_z2(z1, false, true, t).min(c)
        }
    }

    fn any_boundary(&self, z1: f64) -> f64 {
        let (c, c2) = (self.crit, self.crit_half);
        match &self.rule {
            Rule::Hommel => {
                if z1 <= c2 {
                    f64::INFINITY
                } else if z1 <= c {
                    c
                } else {
                    c2
                }
            }
            Rule::ZSum { threshold } => {
                if z1 <= c {
                    threshold - z1
                } else {
                    (threshold - z1).min(c)
                }
            }
            Rule::FixedSequence => {
                if z1 <= c {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
            Rule::Bonferroni => {
                if z1 <= c2 {
                    f64::INFINITY
                } else {
                    c2
                }
            }
            Rule::Omt { score, threshold } => self.omt_boundary(score, *threshold, z1),
        }
    }

    /// Upper boundary `b(z1)` of an event's region `{z2 ≤ b(z1)}`.
    pub fn boundary(&self, event: Event, z1: f64) -> f64 {
        let (c, c2) = (self.crit, self.crit_half);
        match (&self.rule, event) {
            (_, Event::RejectAny) => self.any_boundary(z1),
            (Rule::Hommel, Event::Reject1) => {
                if z1 <= c2 {
                    f64::INFINITY
                } else if z1 <= c {
                    c
                } else {
                    f64::NEG_INFINITY
                }
            }
            (Rule::Hommel, Event::Reject2) => {
                if z1 <= c {
                    c
                } else {
                    c2
                }
            }
            (Rule::FixedSequence, Event::Reject2) => {
                if z1 <= c {
                    c
                } else {
                    f64::NEG_INFINITY
                }
            }
            (Rule::Bonferroni, Event::Reject1) => {
                if z1 <= c2 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
            (Rule::Bonferroni, Event::Reject2) => c2,
            // Marginally nominal rules: D1 = I(z1 ≤ c)·D_any, D2 = I(z2 ≤ c)·D_any.
            (_, Event::Reject1) => {
                if z1 <= c {
                    self.any_boundary(z1)
                } else {
                    f64::NEG_INFINITY
                }
            }
            (_, Event::Reject2) => self.any_boundary(z1).min(c),
        }
    }

    /// The region of one event as a [`LowerSet`].
    pub fn event_region(&self, event: Event) -> EventRegion<'_> {
        EventRegion { proc: self, event }
    }

    /// Probability of `event` under `model`.
    pub fn event_probability(
        &self,
        event: Event,
        model: &AlternativeModel,
        cfg: &QuadratureConfig,
    ) -> Result<f64> {
        integrate_lower_set(&self.event_region(event), model, cfg)
    }

    /// Rejection probability when both nulls hold (independent statistics).
    pub fn global_null_rejection(&self, cfg: &QuadratureConfig) -> Result<f64> {
        self.event_probability(Event::RejectAny, &AlternativeModel::global_null(), cfg)
    }
}

/// One rejection event of a procedure, viewed as a lower set.
pub struct EventRegion<'a> {
    proc: &'a Procedure,
    event: Event,
}

impl LowerSet for EventRegion<'_> {
    fn upper(&self, z1: f64) -> f64 {
        self.proc.boundary(self.event, z1)
    }

    fn levels(&self) -> Vec<f64> {
        vec![self.proc.crit, self.proc.crit_half]
    }

    fn breaks(&self) -> Vec<f64> {
        vec![self.proc.crit, self.proc.crit_half]
    }
}

/// Null-measure size of the symmetric difference between the rejection
/// regions of two procedures, summed over both hypotheses.
pub fn region_difference(a: &Procedure, b: &Procedure, cfg: &QuadratureConfig) -> Result<f64> {
    let null = AlternativeModel::global_null();
    let mut total = 0.0;
    for event in [Event::Reject1, Event::Reject2] {
        total += lower_set_difference(&a.event_region(event), &b.event_region(event), &null, cfg)?;
    }
    Ok(total)
}

/// Bittman's consonant sharpening of closed-Stouffer: the z-sum threshold is
/// raised until the global-null rejection probability is exactly `α`.
pub fn build_bittman(alpha: f64, cfg: &QuadratureConfig) -> Result<Procedure> {
    check_alpha(alpha)?;
    cfg.validate()?;
    let c = quantile_unchecked(alpha);
    let stouffer = SQRT_2 * c;
    let null = AlternativeModel::global_null();
    let rule = GaussLegendre::new(cfg.nodes_per_panel);
    let panels = 2 * cfg.panels_per_axis;
    let fwer = |k: f64| {
        let proc = Procedure::with_rule(ProcedureKind::Bittman, alpha, Rule::ZSum { threshold: k })
            .expect("alpha checked");
        let region = proc.event_region(Event::RejectAny);
        let layout = LowerSetLayout::new(std::slice::from_ref(&region), &null, &[]);
        lower_set_probability_fixed(&region, &null, &layout, panels, &rule)
    };
    // FWER increases with the threshold: below α at Stouffer's value, 2α − α²
    // once the whole L-region is inside.
    let hi = c + crate::numerics::Z_SPAN;
    let tol = (1e-2 * cfg.abs_tol).min(1e-6 * alpha);
    let threshold = illinois(|k| fwer(k) - alpha, stouffer, hi, tol)?;
    let proc = Procedure::with_rule(ProcedureKind::Bittman, alpha, Rule::ZSum { threshold })?;
    certify_level(&proc, cfg)?;
    Ok(proc)
}

/// The optimal rule for `spec`: reject `H_i` when `p_i ≤ α` and the score
/// exceeds the threshold that spends exactly `α` under the global null.
pub fn build_omt(spec: &ObjectiveSpec, cfg: &QuadratureConfig) -> Result<Procedure> {
    let score = ScoreFunction::new(*spec)?;
    cfg.validate()?;
    let alpha = spec.alpha;
    let c = score.crit();
    let null = AlternativeModel::global_null();
    let rule = GaussLegendre::new(cfg.nodes_per_panel);
    let panels = 2 * cfg.panels_per_axis;
    let make = |t: f64| {
        Procedure::with_rule(ProcedureKind::Omt, alpha, Rule::Omt { score, threshold: t })
    };
    let fwer = |t: f64| -> f64 {
        let proc = make(t).expect("alpha checked");
        let region = proc.event_region(Event::RejectAny);
        let layout = LowerSetLayout::new(std::slice::from_ref(&region), &null, &[]);
        lower_set_probability_fixed(&region, &null, &layout, panels, &rule)
    };

    // Bracket: twice the largest score on a 256² grid over the L-region,
    // widened until the rejection probability drops below α.
    let mut hi: f64 = 0.0;
    let n = 256;
    let (lo_z, hi_z) = (c - 6.0, c + 6.0);
    for i in 0..n {
        let z1 = lo_z + (hi_z - lo_z) * (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let z2 = lo_z + (hi_z - lo_z) * (j as f64 + 0.5) / n as f64;
            hi = hi.max(score.eval_z(z1, z2));
        }
    }
    hi *= 2.0;
    let mut widen = 0;
    while fwer(hi) >= alpha {
        hi *= 2.0;
        widen += 1;
        if widen > 400 || !hi.is_finite() {
            return Err(OmtError::NoBracket {
                g_lo: fwer(0.0) - alpha,
                g_hi: fwer(hi) - alpha,
            });
        }
    }
    let tol = (1e-2 * cfg.abs_tol).min(1e-6 * alpha);
    let threshold = illinois(|t| fwer(t) - alpha, 0.0, hi, tol)?;
    let proc = make(threshold)?;
    certify_level(&proc, cfg)?;
    Ok(proc)
}

fn certify_level(proc: &Procedure, cfg: &QuadratureConfig) -> Result<()> {
    let level = proc.global_null_rejection(cfg)?;
    let err = (level - proc.alpha).abs();
    if err > cfg.abs_tol {
        return Err(OmtError::ToleranceNotMet {
            estimate: err,
            tolerance: cfg.abs_tol,
        });
    }
    Ok(())
}

/// Most negative exchangeable shift at which the optimal rule for `Π_1` is
/// still Hommel's procedure: `−log 2 / (Φ⁻¹(α) − Φ⁻¹(α/2))`.
pub fn hommel_coincidence_bound(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return domain(format!("alpha {alpha} is outside (0, 0.5)"));
    }
    Ok(-LN_2 / (quantile_unchecked(alpha) - quantile_unchecked(alpha / 2.0)))
}

/// Classification of a square z-grid by a procedure's decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    /// Cell edges along each axis (same for both axes).
    pub edges: Vec<f64>,
    /// Cell centres along each axis.
    pub centers: Vec<f64>,
    /// Row-major classes: index `i * n + j` is the cell at `(centers[i], centers[j])`.
    pub cells: Vec<RegionClass>,
}

impl RegionGrid {
    pub fn size(&self) -> usize {
        self.centers.len()
    }

    pub fn class_at(&self, i: usize, j: usize) -> RegionClass {
        self.cells[i * self.size() + j]
    }

    /// Cell counts in the order none, only1, only2, both.
    pub fn counts(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for c in &self.cells {
            out[match c {
                RegionClass::None => 0,
                RegionClass::Only1 => 1,
                RegionClass::Only2 => 2,
                RegionClass::Both => 3,
            }] += 1;
        }
        out
    }

    /// `z1,z2,class` rows, z1 varying slowest, six significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.size();
        let labels: Vec<String> = self.centers.iter().map(|z| crate::fmt::sig6(*z)).collect();
        let mut out = String::with_capacity(n * n * 24 + 16);
        out.push_str("z1,z2,class\n");
        for i in 0..n {
            for j in 0..n {
                out.push_str(&labels[i]);
                out.push(',');
                out.push_str(&labels[j]);
                out.push(',');
                out.push_str(self.cells[i * n + j].name());
                out.push('\n');
            }
        }
        out
    }
}

/// Axis edges on `[z_lo, z_hi]` with the nearest interior edges moved onto
/// the `Φ⁻¹(α)` and `Φ⁻¹(α/2)` lines.
fn grid_edges(n: usize, z_lo: f64, z_hi: f64, lines: &[f64]) -> Vec<f64> {
    let step = (z_hi - z_lo) / n as f64;
    let mut edges: Vec<f64> = (0..=n).map(|k| z_lo + step * k as f64).collect();
    for &line in lines {
        if !(line > z_lo && line < z_hi) {
            continue;
        }
        let k = ((line - z_lo) / step).round() as usize;
        let k = k.clamp(1, n - 1);
        edges[k] = line;
    }
    edges
}

/// Classifies each cell of an `n × n` grid on `[z_lo, z_hi]²` by the decision
/// at its centre.
pub fn export_region(proc: &Procedure, grid_size: usize, z_lo: f64, z_hi: f64) -> Result<RegionGrid> {
    if grid_size < 16 {
        return domain(format!("grid size must be at least 16 (got {grid_size})"));
    }
    if !(z_lo.is_finite() && z_hi.is_finite() && z_lo < z_hi) {
        return domain(format!("invalid z-range [{z_lo}, {z_hi}]"));
    }
    let edges = grid_edges(grid_size, z_lo, z_hi, &[proc.crit, proc.crit_half]);
    let centers: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut cells = Vec::with_capacity(grid_size * grid_size);
    for &z1 in &centers {
        for &z2 in &centers {
            cells.push(proc.decide_z(ZScorePair::new(z1, z2)).class());
        }
    }
    Ok(RegionGrid {
        edges,
        centers,
        cells,
    })
}
