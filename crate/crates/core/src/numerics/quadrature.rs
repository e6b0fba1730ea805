//! Deterministic quadrature over decision regions in z-space.
//!
//! Two routes are provided. [`integrate_lower_set`] handles regions that are
//! lower sets in the z-plane, which covers every weakly monotone decision
//! rule: the region is `{z2 ≤ b(z1)}` for a non-increasing boundary `b`, so
//! its probability is a 1-D integral of a conditional normal CDF.
//! [`integrate_region`] is a general nested rule for an arbitrary indicator
//! and integrand; it locates the indicator's switch points along each column
//! by bisection.
//!
//! Both place panel edges on every discontinuity they can find and certify
//! the result by comparing against a run with twice as many panels.

use std::sync::OnceLock;

use crate::error::{domain, OmtError, Result};
use crate::gauss::{
    quantile_unchecked, std_normal_cdf, std_normal_pdf, AlternativeModel, PValuePair,
};

use super::roots::predicate_edge;

/// Half-width, in standard deviations, of the integration window.
pub(crate) const Z_SPAN: f64 = 12.0;

/// Resolution used when pinning boundary transitions.
const EDGE_TOL: f64 = 1e-13;

/// Number of coarse samples used to look for boundary transitions.
const SCAN_POINTS: usize = 193;
/// Geometric refinement toward each boundary transition: edges at
/// `x ± w·8⁻ᵏ` for `k = 1..=GRADING_LEVELS`, `w` the nominal panel width.
const GRADING_LEVELS: i32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    /// Panels across the integration window, before alignment splits.
    pub panels_per_axis: usize,
    /// Gauss–Legendre order per panel.
    pub nodes_per_panel: usize,
    /// Target for the panel-doubling error estimate.
    pub abs_tol: f64,
    /// How many times the panel count may be doubled before giving up.
    pub max_refinements: u32,
    /// p-values whose z-lines must be panel edges (typically α and α/2).
    pub align_p: Vec<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            panels_per_axis: 24,
            nodes_per_panel: 16,
            abs_tol: 1e-8,
            max_refinements: 4,
            align_p: Vec::new(),
        }
    }
}

impl QuadratureConfig {
    /// Named profiles: `coarse`, `standard`, `fine`.
    pub fn profile(name: &str) -> Result<Self> {
        let base = Self::default();
        match name {
            "coarse" => Ok(Self {
                panels_per_axis: 12,
                abs_tol: 1e-7,
                ..base
            }),
            "standard" | "default" => Ok(base),
            "fine" => Ok(Self {
                panels_per_axis: 48,
                abs_tol: 1e-10,
                max_refinements: 5,
                ..base
            }),
            other => domain(format!("unknown quadrature profile '{other}'")),
        }
    }

    /// Adds the `α` and `α/2` lines to the alignment set.
    pub fn aligned_to(mut self, alpha: f64) -> Self {
        self.align_p.push(alpha);
        self.align_p.push(alpha / 2.0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.panels_per_axis < 8 {
            return domain(format!(
                "panels_per_axis must be at least 8 (got {})",
                self.panels_per_axis
            ));
        }
        if !(2..=64).contains(&self.nodes_per_panel) {
            return domain(format!(
                "nodes_per_panel must be in 2..=64 (got {})",
                self.nodes_per_panel
            ));
        }
        if !(self.abs_tol > 0.0) {
            return domain("abs_tol must be positive");
        }
        Ok(())
    }

    fn align_z(&self) -> Vec<f64> {
        self.align_p
            .iter()
            .filter(|p| **p > 0.0 && **p < 1.0)
            .map(|p| quantile_unchecked(*p))
            .collect()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                if n == 1 {
                    p0 = 1.0;
                    p1 = x;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared rule of order 16.
    pub fn order16() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(16))
    }

    fn for_order(n: usize) -> std::borrow::Cow<'static, GaussLegendre> {
        if n == 16 {
            std::borrow::Cow::Borrowed(Self::order16())
        } else {
            std::borrow::Cow::Owned(Self::new(n))
        }
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// A region `{(z1, z2) : z2 ≤ upper(z1)}` with `upper` non-increasing.
///
/// `upper` may return `±∞`. `levels` lists the horizontal lines the boundary
/// can stick to; crossings of those lines and jumps to or from `±∞` are found
/// automatically and used as panel edges.
pub trait LowerSet {
    fn upper(&self, z1: f64) -> f64;

    fn levels(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Known vertical lines where `upper` is not smooth.
    fn breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<T: LowerSet + ?Sized> LowerSet for &T {
    fn upper(&self, z1: f64) -> f64 {
        (**self).upper(z1)
    }
    fn levels(&self) -> Vec<f64> {
        (**self).levels()
    }
    fn breaks(&self) -> Vec<f64> {
        (**self).breaks()
    }
}

/// Category of a boundary value relative to the levels. Monotone in `z1` for
/// a non-increasing boundary.
fn category(b: f64, levels: &[f64]) -> Vec<i8> {
    let mut code = Vec::with_capacity(levels.len() + 1);
    code.push(if b == f64::INFINITY {
        0
    } else if b == f64::NEG_INFINITY {
        2
    } else {
        1
    });
    for &l in levels {
        code.push(if b > l {
            0
        } else if b == l {
            1
        } else {
            2
        });
    }
    code
}

/// z1-positions in `(lo, hi)` where the boundary changes category.
pub(crate) fn boundary_transitions<F>(upper: F, levels: &[f64], lo: f64, hi: f64) -> Vec<f64>
where
    F: Fn(f64) -> f64,
{
    code_transitions(|z| category(upper(z), levels), lo, hi)
}

/// z1-positions in `(lo, hi)` where `code` changes value. Exhaustive when the
/// code sequence is monotone; otherwise a change and its reversal inside one
/// scan interval can go unnoticed.
fn code_transitions<C, K>(code_at: C, lo: f64, hi: f64) -> Vec<f64>
where
    C: Fn(f64) -> K,
    K: PartialEq + Clone,
{
    let mut out = Vec::new();
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let mut prev_x = lo;
    let mut prev_code = code_at(lo);
    for i in 1..SCAN_POINTS {
        let x = if i == SCAN_POINTS - 1 {
            hi
        } else {
            lo + step * i as f64
        };
        let code = code_at(x);
        let mut cur_x = prev_x;
        let mut cur_code = prev_code.clone();
        while cur_code != code {
            let (_, b) = predicate_edge(|z| code_at(z) == cur_code, cur_x, x, EDGE_TOL);
            out.push(b);
            if b >= x {
                break;
            }
            cur_x = b;
            cur_code = code_at(b);
        }
        prev_x = x;
        prev_code = code;
    }
    out
}

/// Builds panel edges over `[lo, hi]` that include every break.
fn panel_edges(lo: f64, hi: f64, breaks: &[f64], panels: usize) -> Vec<f64> {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * a.abs().max(1.0));
    let width = (hi - lo) / panels as f64;
    let mut edges = vec![pts[0]];
    for w in pts.windows(2) {
        let len = w[1] - w[0];
        let k = ((len / width).ceil() as usize).max(1);
        for j in 1..=k {
            edges.push(if j == k {
                w[1]
            } else {
                w[0] + len * j as f64 / k as f64
            });
        }
    }
    edges
}

/// Panel edges with geometric grading toward each point of `graded`.
///
/// The boundary may run off to `±∞` at a transition, where the integrand is
/// smooth on each side but not analytic at the endpoint.
fn graded_edges(lo: f64, hi: f64, breaks: &[f64], graded: &[f64], panels: usize) -> Vec<f64> {
    let mut all: Vec<f64> = breaks.iter().chain(graded).copied().collect();
    let width = (hi - lo) / panels as f64;
    for &g in graded {
        for k in 1..=GRADING_LEVELS {
            let d = width * 8f64.powi(-k);
            all.extend([g - d, g + d]);
        }
    }
    panel_edges(lo, hi, &all, panels)
}

/// Conditional `P(z2 ≤ b | z1)` under the model.
#[inline]
pub(crate) fn conditional_cdf(b: f64, z1: f64, model: &AlternativeModel) -> f64 {
    if b == f64::INFINITY {
        return 1.0;
    }
    if b == f64::NEG_INFINITY {
        return 0.0;
    }
    let sd = (1.0 - model.rho * model.rho).sqrt();
    let mean = model.theta2 + model.rho * (z1 - model.theta1);
    std_normal_cdf((b - mean) / sd)
}

fn integrate_panels<F: FnMut(f64) -> f64>(edges: &[f64], rule: &GaussLegendre, mut f: F) -> f64 {
    // Sequential left-to-right reduction keeps results bit-reproducible.
    edges
        .windows(2)
        .map(|w| rule.integrate(w[0], w[1], &mut f))
        .sum()
}

fn certify<F>(cfg: &QuadratureConfig, mut run: F) -> Result<f64>
where
    F: FnMut(usize) -> f64,
{
    cfg.validate()?;
    let mut panels = cfg.panels_per_axis;
    let mut coarse = run(panels);
    let mut estimate = f64::INFINITY;
    for _ in 0..=cfg.max_refinements {
        panels *= 2;
        let fine = run(panels);
        estimate = (fine - coarse).abs();
        if estimate <= cfg.abs_tol {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(OmtError::ToleranceNotMet {
        estimate,
        tolerance: cfg.abs_tol,
    })
}

fn z1_window(model: &AlternativeModel) -> (f64, f64) {
    (model.theta1 - Z_SPAN, model.theta1 + Z_SPAN)
}

/// Panel layout for a set of lower-set boundaries, shared across panel counts.
pub(crate) struct LowerSetLayout {
    lo: f64,
    hi: f64,
    breaks: Vec<f64>,
    transitions: Vec<f64>,
}

impl LowerSetLayout {
    pub(crate) fn new<R: LowerSet>(regions: &[R], model: &AlternativeModel, extra: &[f64]) -> Self {
        let (lo, hi) = z1_window(model);
        let mut breaks: Vec<f64> = extra.to_vec();
        let mut transitions = Vec::new();
        for r in regions {
            breaks.extend(r.breaks());
            transitions.extend(boundary_transitions(|z| r.upper(z), &r.levels(), lo, hi));
        }
        Self {
            lo,
            hi,
            breaks,
            transitions,
        }
    }

    pub(crate) fn edges(&self, panels: usize) -> Vec<f64> {
        graded_edges(self.lo, self.hi, &self.breaks, &self.transitions, panels)
    }
}

/// Probability of a lower set at a fixed panel count, without certification.
pub(crate) fn lower_set_probability_fixed<R: LowerSet>(
    region: &R,
    model: &AlternativeModel,
    layout: &LowerSetLayout,
    panels: usize,
    rule: &GaussLegendre,
) -> f64 {
    let edges = layout.edges(panels);
    integrate_panels(&edges, rule, |z1| {
        let b = region.upper(z1);
        if b == f64::NEG_INFINITY {
            0.0
        } else {
            std_normal_pdf(z1 - model.theta1) * conditional_cdf(b, z1, model)
        }
    })
}

/// `P((z1, z2) ∈ region)` under `model`, certified to `cfg.abs_tol`.
pub fn integrate_lower_set<R: LowerSet>(
    region: &R,
    model: &AlternativeModel,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let rule = GaussLegendre::for_order(cfg.nodes_per_panel);
    let layout = LowerSetLayout::new(std::slice::from_ref(region), model, &cfg.align_z());
    certify(cfg, |panels| {
        lower_set_probability_fixed(region, model, &layout, panels, &rule)
    })
}

/// Probability of the symmetric difference of two lower sets under `model`.
pub fn lower_set_difference<A: LowerSet, B: LowerSet>(
    a: &A,
    b: &B,
    model: &AlternativeModel,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let rule = GaussLegendre::for_order(cfg.nodes_per_panel);
    let (lo, hi) = z1_window(model);
    let mut breaks = cfg.align_z();
    breaks.extend(a.breaks());
    breaks.extend(b.breaks());
    let mut transitions = boundary_transitions(|z| a.upper(z), &a.levels(), lo, hi);
    transitions.extend(boundary_transitions(|z| b.upper(z), &b.levels(), lo, hi));
    certify(cfg, |panels| {
        let edges = graded_edges(lo, hi, &breaks, &transitions, panels);
        integrate_panels(&edges, &rule, |z1| {
            let fa = conditional_cdf(a.upper(z1), z1, model);
            let fb = conditional_cdf(b.upper(z1), z1, model);
            std_normal_pdf(z1 - model.theta1) * (fa - fb).abs()
        })
    })
}

/// Switch points of `ind` along a column, within `[lo, hi]`.
fn column_switches<I>(ind: &I, lo: f64, hi: f64, lines: &[f64], samples: usize) -> Vec<f64>
where
    I: Fn(f64) -> bool,
{
    let mut grid: Vec<f64> = (0..samples)
        .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
        .collect();
    grid.extend(lines.iter().copied().filter(|x| *x > lo && *x < hi));
    grid.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut prev = ind(grid[0]);
    for w in grid.windows(2) {
        let cur = ind(w[1]);
        if cur != prev {
            let (_, b) = predicate_edge(|z| ind(z) == prev, w[0], w[1], EDGE_TOL);
            out.push(b);
        }
        prev = cur;
    }
    out
}

/// `∫∫ indicator(p)·f(p)·density(p) dp` over the unit square.
///
/// `model = None` means independent uniform p-values (the global null).
/// Otherwise the density is that of `p = Φ(z)` with `z` drawn from the model,
/// which covers correlated nulls and shifted alternatives alike. The
/// indicator's boundary is located numerically, so it must be piecewise
/// constant with finitely many switches along each column.
pub fn integrate_region<F, I>(
    f: F,
    indicator: I,
    model: Option<&AlternativeModel>,
    cfg: &QuadratureConfig,
) -> Result<f64>
where
    F: Fn(PValuePair) -> f64,
    I: Fn(PValuePair) -> bool,
{
    let model = model.copied().unwrap_or_else(AlternativeModel::global_null);
    let rule = GaussLegendre::for_order(cfg.nodes_per_panel);
    let lines = cfg.align_z();
    let sd = (1.0 - model.rho * model.rho).sqrt();
    let (lo, hi) = z1_window(&model);
    let to_p = |z1: f64, z2: f64| PValuePair::new(std_normal_cdf(z1), std_normal_cdf(z2));

    let column_window = |z1: f64| {
        let mean = model.theta2 + model.rho * (z1 - model.theta1);
        (mean, mean - Z_SPAN * sd, mean + Z_SPAN * sd)
    };
    let switches_at = |z1: f64, samples: usize| {
        let (_, a, b) = column_window(z1);
        column_switches(&|z2| indicator(to_p(z1, z2)), a, b, &lines, samples)
    };

    // Outer breaks: alignment lines plus columns where the switch count or
    // the state at the bottom of the column changes.
    let mut breaks = lines.clone();
    breaks.extend(code_transitions(
        |z1| {
            let (_, a, _) = column_window(z1);
            (switches_at(z1, 65).len(), indicator(to_p(z1, a)))
        },
        lo,
        hi,
    ));

    let column = |z1: f64, inner_panels: usize| -> f64 {
        let (mean, a, b) = column_window(z1);
        let mut cuts = switches_at(z1, 129);
        cuts.extend(lines.iter().copied().filter(|x| *x > a && *x < b));
        cuts.push(a);
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            if !indicator(to_p(z1, mid)) {
                continue;
            }
            let edges = panel_edges(w[0], w[1], &[], ((w[1] - w[0]) / (b - a) * inner_panels as f64).ceil() as usize);
            total += integrate_panels(&edges, &rule, |z2| {
                f(to_p(z1, z2)) * std_normal_pdf((z2 - mean) / sd) / sd
            });
        }
        std_normal_pdf(z1 - model.theta1) * total
    };

    certify(cfg, |panels| {
        let edges = panel_edges(lo, hi, &breaks, panels);
        integrate_panels(&edges, &rule, |z1| column(z1, panels))
    })
}
