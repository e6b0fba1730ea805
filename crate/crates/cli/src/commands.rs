use std::fmt::Write as _;
use std::io::Write;

use omt_core::fmt::{dec4, sig6};
use omt_core::gauss::{AlternativeModel, PValuePair};
use omt_core::numerics::QuadratureConfig;
use omt_core::objective::{ObjectiveSpec, Weights};
use omt_core::power_design::{
    allocation_search, evaluate_power, mc_power, observed_pvalue, savings, theta_from_design,
    theta_from_marginal_power, AllocationObjective, McPowerReport, PowerMeasure, PowerReport,
    TwoArmDesign,
};
use omt_core::procedures::{build_omt, export_region, Procedure, ProcedureKind, RegionClass};

use crate::config::{parse_weights, CalibrationMode, RunConfig};
use crate::error::{CliError, CliResult};

/// Keys each command reads, in dump order.
pub const REGION_KEYS: &[&str] = &[
    "alpha", "procedures", "objective", "calibration", "theta1", "theta2", "persons1", "persons2",
    "rate_control", "rate_treat", "beta", "reference_persons", "grid", "z_min", "z_max",
    "quadrature", "output",
];
pub const POWER_KEYS: &[&str] = &[
    "alpha", "procedures", "objective", "calibration", "theta1", "theta2", "rho", "persons1",
    "persons2", "rate_control", "rate_treat", "beta", "reference_persons", "mc", "reps", "seed",
    "quadrature", "output",
];
pub const ALLOCATE_KEYS: &[&str] = &[
    "alpha", "calibration", "rate_control", "rate_treat", "beta", "reference_persons", "total_n",
    "r_grid", "allocation_objective", "measure", "quadrature", "output",
];
pub const APEX_KEYS: &[&str] = &[
    "alpha", "calibration", "rate_control", "rate_treat", "beta", "reference_persons",
    "events_control1", "n_control1", "events_treat1", "n_treat1", "events_control2", "n_control2",
    "events_treat2", "n_treat2", "quadrature", "output",
];
pub const SAVINGS_KEYS: &[&str] = &[
    "alpha", "calibration", "rate_control", "rate_treat", "beta", "reference_persons",
    "reference_n", "split", "comparator", "measure", "n_cap", "quadrature", "output",
];

/// A column of a power table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcedureChoice {
    Builtin(ProcedureKind),
    Omt(Weights),
}

impl ProcedureChoice {
    pub fn build(
        &self,
        model: &AlternativeModel,
        alpha: f64,
        quad: &QuadratureConfig,
    ) -> CliResult<Procedure> {
        Ok(match self {
            ProcedureChoice::Builtin(k) => Procedure::builtin(*k, alpha, quad)?,
            ProcedureChoice::Omt(w) => build_omt(&ObjectiveSpec::new(*w, *model, alpha)?, quad)?,
        })
    }
}

/// Parses `table`, `all`, or a comma list of procedure names; `omt` alone
/// uses `objective`, `omt:<objective>` names its own.
pub fn parse_procedures(list: &str, objective: Weights) -> CliResult<Vec<ProcedureChoice>> {
    use ProcedureChoice::*;
    let omt = |w| Omt(w);
    match list {
        "table" => {
            return Ok(vec![
                omt(Weights::ANY),
                omt(Weights::PI1),
                omt(Weights::COMBO),
                Builtin(ProcedureKind::ClosedStouffer),
                Builtin(ProcedureKind::Hommel),
            ])
        }
        "all" => {
            let mut v = vec![
                omt(Weights::ANY),
                omt(Weights::AVG),
                omt(Weights::PI1),
                omt(Weights::COMBO),
            ];
            v.extend(ProcedureKind::BUILTINS.iter().map(|k| Builtin(*k)));
            return Ok(v);
        }
        _ => {}
    }
    let mut out = Vec::new();
    for token in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let named = token
            .strip_prefix("omt:")
            .or_else(|| token.strip_prefix("omt[").and_then(|t| t.strip_suffix(']')));
        let choice = if let Some(obj) = named {
            Omt(parse_weights(obj)
                .ok_or_else(|| CliError::Config(format!("unknown objective '{obj}'")))?)
        } else if token == "omt" {
            Omt(objective)
        } else {
            Builtin(
                token
                    .parse()
                    .map_err(|e: omt_core::OmtError| CliError::Config(e.to_string()))?,
            )
        };
        out.push(choice);
    }
    if out.is_empty() {
        return Err(CliError::Config("no procedures selected".into()));
    }
    Ok(out)
}

fn write_output(path: &str, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_string(),
        source,
    })
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn output_path(cfg: &RunConfig, default: &str) -> String {
    if cfg.is_set("output") {
        cfg.raw("output").to_string()
    } else {
        default.to_string()
    }
}

fn model_for(cfg: &RunConfig, mode: CalibrationMode, with_rho: bool) -> CliResult<AlternativeModel> {
    let (t1, t2) = cfg.thetas(mode)?;
    let rho = if with_rho { cfg.get_f64("rho")? } else { 0.0 };
    Ok(AlternativeModel::new(t1, t2, rho)?)
}

pub fn region(cfg: &RunConfig, env: Option<&str>, out: &mut dyn Write) -> CliResult<()> {
    let alpha = cfg.alpha()?;
    let quad = cfg.quadrature(env)?;
    let objective = cfg.weights("objective")?;
    let choices = parse_procedures(cfg.raw("procedures"), objective)?;
    let [choice] = choices[..] else {
        return Err(CliError::Config("region needs exactly one procedure".into()));
    };
    let grid: usize = cfg.get("grid")?;
    let (z_lo, z_hi) = (cfg.get_f64("z_min")?, cfg.get_f64("z_max")?);
    let mode = cfg.calibration_mode(CalibrationMode::Marginal)?;
    let model = model_for(cfg, mode, false)?;
    let path = output_path(cfg, "region.csv");

    let proc = choice.build(&model, alpha, &quad)?;
    let region = export_region(&proc, grid, z_lo, z_hi)?;
    let csv = region.to_csv();
    if path == "-" {
        return emit(out, &csv);
    }
    write_output(&path, &csv)?;

    let mut s = String::new();
    let _ = writeln!(s, "procedure = {}", proc.label());
    let _ = writeln!(s, "alpha = {}", dec4(alpha));
    if matches!(choice, ProcedureChoice::Omt(_)) {
        let _ = writeln!(s, "calibration = {}", mode.name());
        let _ = writeln!(s, "theta1 = {}", sig6(model.theta1));
        let _ = writeln!(s, "theta2 = {}", sig6(model.theta2));
    }
    if let Some(t) = proc.threshold() {
        let _ = writeln!(s, "threshold = {}", sig6(t));
    }
    let counts = region.counts();
    for (class, n) in [
        RegionClass::None,
        RegionClass::Only1,
        RegionClass::Only2,
        RegionClass::Both,
    ]
    .iter()
    .zip(counts)
    {
        let _ = writeln!(s, "cells_{} = {n}", class.name());
    }
    let _ = writeln!(s, "output = {path}");
    emit(out, &s)
}

/// Measure rows followed by the global-null rejection row.
fn power_table(
    labels: &[String],
    reports: &[PowerReport],
    fwer: &[f64],
    mc: Option<&[(McPowerReport, omt_core::numerics::McEstimate)]>,
) -> String {
    let mut s = String::from("measure");
    for l in labels {
        s.push(',');
        s.push_str(l);
    }
    if mc.is_some() {
        for l in labels {
            let _ = write!(s, ",{l}:mc,{l}:se");
        }
    }
    s.push('\n');
    for m in PowerMeasure::ALL {
        s.push_str(m.name());
        for r in reports {
            let _ = write!(s, ",{}", dec4(r.get(m)));
        }
        if let Some(mc) = mc {
            for (rep, _) in mc {
                let e = rep.get(m);
                let _ = write!(s, ",{},{}", dec4(e.mean), sig6(e.std_error));
            }
        }
        s.push('\n');
    }
    s.push_str("fwer");
    for f in fwer {
        let _ = write!(s, ",{}", dec4(*f));
    }
    if let Some(mc) = mc {
        for (_, e) in mc {
            let _ = write!(s, ",{},{}", dec4(e.mean), sig6(e.std_error));
        }
    }
    s.push('\n');
    s
}

fn evaluate_table(
    procs: &[&Procedure],
    model: &AlternativeModel,
    quad: &QuadratureConfig,
    mc: Option<&omt_core::numerics::McConfig>,
) -> CliResult<String> {
    let mut labels = Vec::new();
    let mut reports = Vec::new();
    let mut fwer = Vec::new();
    let mut sims = Vec::new();
    for &proc in procs {
        labels.push(proc.label());
        reports.push(evaluate_power(&proc, model, quad)?);
        fwer.push(proc.global_null_rejection(quad)?);
        if let Some(mc) = mc {
            let rep = mc_power(&proc, model, mc)?;
            let null = omt_core::numerics::mc_estimate(
                |z| {
                    let d = proc.decide_z(z);
                    f64::from(d.d1 || d.d2)
                },
                &model.null_like(),
                &mc.with_seed(mc.seed.wrapping_add(3)),
            )?;
            sims.push((rep, null));
        }
    }
    Ok(power_table(
        &labels,
        &reports,
        &fwer,
        mc.map(|_| sims.as_slice()),
    ))
}

pub fn power(cfg: &RunConfig, env: Option<&str>, out: &mut dyn Write) -> CliResult<()> {
    let alpha = cfg.alpha()?;
    let quad = cfg.quadrature(env)?;
    let objective = cfg.weights("objective")?;
    let choices = parse_procedures(cfg.raw("procedures"), objective)?;
    let mode = cfg.calibration_mode(CalibrationMode::Marginal)?;
    let model = model_for(cfg, mode, true)?;
    let mc = if cfg.get_bool("mc")? { Some(cfg.mc()?) } else { None };

    let procs = choices
        .iter()
        .map(|c| c.build(&model, alpha, &quad))
        .collect::<CliResult<Vec<_>>>()?;
    let table = evaluate_table(&procs.iter().collect::<Vec<_>>(), &model, &quad, mc.as_ref())?;
    if cfg.is_set("output") && cfg.raw("output") != "-" {
        write_output(cfg.raw("output"), &table)?;
    }
    emit(out, &table)
}

pub fn allocate(cfg: &RunConfig, env: Option<&str>, out: &mut dyn Write) -> CliResult<()> {
    let alpha = cfg.alpha()?;
    let quad = cfg.quadrature(env)?;
    let mode = cfg.calibration_mode(CalibrationMode::Marginal)?;
    let cal = cfg.calibration(mode)?;
    let total: u64 = cfg.get("total_n")?;
    let grid = cfg.f64_list("r_grid")?;
    if grid.is_empty() {
        return Err(CliError::Config("allocation grid is empty".into()));
    }
    let objective = match cfg.raw("allocation_objective") {
        "matched" => AllocationObjective::Matched,
        other => AllocationObjective::Fixed(parse_weights(other).ok_or_else(|| {
            CliError::Config(format!("invalid allocation objective '{other}'"))
        })?),
    };
    let measure = cfg.measure()?;
    let path = output_path(cfg, "allocation.csv");

    let res = allocation_search(total, objective, &cal, &grid, alpha, &quad)?;
    let csv = res.to_csv();
    let mut s = String::new();
    if path == "-" {
        s.push_str(&csv);
    } else {
        write_output(&path, &csv)?;
    }
    let measures: Vec<PowerMeasure> = match measure {
        Some(m) => vec![m],
        None => PowerMeasure::ALL.to_vec(),
    };
    for m in measures {
        let _ = writeln!(s, "argmax {} = {}", m.name(), dec4(res.argmax(m)));
    }
    emit(out, &s)
}

pub fn apex(cfg: &RunConfig, env: Option<&str>, out: &mut dyn Write) -> CliResult<()> {
    let alpha = cfg.alpha()?;
    let quad = cfg.quadrature(env)?;
    let group = |i: u8| -> CliResult<(u64, u64, u64, u64)> {
        Ok((
            cfg.get(&format!("events_control{i}"))?,
            cfg.get(&format!("n_control{i}"))?,
            cfg.get(&format!("events_treat{i}"))?,
            cfg.get(&format!("n_treat{i}"))?,
        ))
    };
    let (g1, g2) = (group(1)?, group(2)?);
    let mode = cfg.calibration_mode(CalibrationMode::Design)?;
    let rate_control = cfg.get_f64("rate_control")?;
    let rate_treat = cfg.get_f64("rate_treat")?;
    let beta = cfg.get_f64("beta")?;
    let reference: u64 = cfg.get("reference_persons")?;
    if reference == 0 {
        return Err(CliError::Config("reference_persons must be positive".into()));
    }

    let p1 = observed_pvalue(g1.0, g1.1, g1.2, g1.3)?;
    let p2 = observed_pvalue(g2.0, g2.1, g2.2, g2.3)?;
    let design = |g: (u64, u64, u64, u64)| -> CliResult<f64> {
        Ok(theta_from_design(&TwoArmDesign::new(rate_control, rate_treat, g.1, g.3)?)?)
    };
    let theta_ref = theta_from_marginal_power(beta, alpha)?;
    let marginal = |g: (u64, u64, u64, u64)| theta_ref * ((g.1 + g.3) as f64 / reference as f64).sqrt();
    let by_design = (design(g1)?, design(g2)?);
    let by_marginal = (marginal(g1), marginal(g2));
    let (t1, t2) = match mode {
        CalibrationMode::Design => by_design,
        CalibrationMode::Marginal => by_marginal,
        CalibrationMode::Direct => (cfg.get_f64("theta1")?, cfg.get_f64("theta2")?),
    };
    let model = AlternativeModel::independent(t1, t2)?;

    let mut s = String::new();
    let _ = writeln!(s, "p1 = {}", dec4(p1));
    let _ = writeln!(s, "p2 = {}", dec4(p2));
    let _ = writeln!(s, "theta_design = {},{}", sig6(by_design.0), sig6(by_design.1));
    let _ = writeln!(s, "theta_marginal = {},{}", sig6(by_marginal.0), sig6(by_marginal.1));
    let _ = writeln!(s, "calibration = {}", mode.name());
    let choices = parse_procedures("all", Weights::COMBO)?;
    let observed = PValuePair::new(p1, p2);
    let procs = choices
        .iter()
        .map(|c| c.build(&model, alpha, &quad))
        .collect::<CliResult<Vec<_>>>()?;
    for proc in &procs {
        let d = proc.decide(observed)?;
        let _ = writeln!(s, "decision {} = {}", proc.label(), d.class().name());
    }
    s.push('\n');
    // The table columns are a subset of the procedures already built.
    let columns: Vec<&Procedure> = parse_procedures("table", Weights::COMBO)?
        .iter()
        .filter_map(|t| choices.iter().position(|c| c == t).map(|i| &procs[i]))
        .collect();
    let table = evaluate_table(&columns, &model, &quad, None)?;
    if cfg.is_set("output") && cfg.raw("output") != "-" {
        write_output(cfg.raw("output"), &table)?;
    }
    s.push_str(&table);
    emit(out, &s)
}

pub fn savings_cmd(cfg: &RunConfig, env: Option<&str>, out: &mut dyn Write) -> CliResult<()> {
    let alpha = cfg.alpha()?;
    let quad = cfg.quadrature(env)?;
    let mode = cfg.calibration_mode(CalibrationMode::Marginal)?;
    let cal = cfg.calibration(mode)?;
    let reference: u64 = cfg.get("reference_n")?;
    let split = cfg.get_f64("split")?;
    let comparator = cfg.procedure_kind("comparator")?;
    if comparator == ProcedureKind::Omt {
        return Err(CliError::Config("comparator must be a builtin procedure".into()));
    }
    let cap: u64 = cfg.get("n_cap")?;
    let measures: Vec<PowerMeasure> = match cfg.measure()? {
        Some(m) => vec![m],
        None => vec![PowerMeasure::Any, PowerMeasure::Avg, PowerMeasure::Combo, PowerMeasure::Pi1],
    };
    let mut s = String::from("measure,omt_power,n_reference,n_required,savings_pct\n");
    for m in measures {
        let r = savings(m, reference, split, comparator, &cal, alpha, &quad, cap)?;
        let _ = writeln!(
            s,
            "{},{},{},{},{:.2}",
            m.name(),
            dec4(r.target),
            r.n_reference,
            r.n_required,
            r.savings_pct
        );
    }
    if cfg.is_set("output") && cfg.raw("output") != "-" {
        write_output(cfg.raw("output"), &s)?;
    }
    emit(out, &s)
}
