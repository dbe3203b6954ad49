//! Subcommands as functions from a validated config to a [`Table`].

use bose_quasifree::condensate::{
    local_normality_report, number_expectation, regularized_number, BoxBasis, DensityProfile, NumberValue,
};
use bose_quasifree::equilibrium::{
    clustering_check, equilibrium_form, kms_boundary_value, thermodynamic_limit_scan, Equilibrium, LimitParams,
    ThermalParams, Verdict,
};
use bose_quasifree::quasifree::{QuasifreeSpec, SesquiForm};
use bose_quasifree::single_particle::{domain_classify, DomainStatus, LimitKind, TestFunction};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{
    ClusterCheckConfig, DensityProfileConfig, DomainClassifyConfig, KmsCheckConfig, LimitScanConfig,
    PhaseScanConfig,
};
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Table};
use crate::suite::{self, SuiteOptions};

/// A finished table and, for checking subcommands, the failure to report
/// after the table has been written.
#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    pub failure: Option<String>,
}

impl From<Table> for Outcome {
    fn from(table: Table) -> Self {
        Self { table, failure: None }
    }
}

fn number_cell(v: NumberValue<f64>) -> Cell {
    match v {
        NumberValue::Finite(x) => Cell::Num(x),
        NumberValue::Divergent => "Divergent".into(),
    }
}

fn status_cell(s: DomainStatus) -> Cell {
    format!("{s:?}").into()
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Converged => "Converged",
        Verdict::NotConverged => "NotConverged",
    }
}

/// Critical density of the unit trap along the first axis, plus the
/// condensate constant `shift_weight`.
pub fn density_profile(cfg: &DensityProfileConfig) -> CliResult<Outcome> {
    if cfg.dim == 0 {
        return Err(CliError::config("dim must be positive"));
    }
    if !cfg.shift_weight.is_finite() || cfg.shift_weight < 0.0 {
        return Err(CliError::config("shift_weight must be finite and non-negative"));
    }
    let points: Vec<Vec<f64>> = cfg
        .grid
        .points()?
        .into_iter()
        .map(|x| {
            let mut p = vec![0.0; cfg.dim];
            p[0] = x;
            p
        })
        .collect();
    let profile = DensityProfile::critical_trap(cfg.beta, points)?;
    let mut columns: Vec<String> = (1..=cfg.dim).map(|k| format!("x{k}")).collect();
    columns.push("density_thermal".into());
    columns.push("density_with_shift".into());
    let mut table = Table::new(&columns.iter().map(String::as_str).collect::<Vec<_>>());
    for (x, density) in profile.points {
        let mut row: Vec<Cell> = x.into_iter().map(Cell::Num).collect();
        row.push(density.into());
        row.push((density + cfg.shift_weight).into());
        table.push(row);
    }
    Ok(table.into())
}

/// Gibbs states of the trap along a μ-grid, then the boundary limit state.
pub fn phase_scan(cfg: &PhaseScanConfig) -> CliResult<Outcome> {
    let model_cfg = cfg.model();
    let model = model_cfg.build()?;
    let ground_energy = model.ground_energy();
    if cfg.mu_grid.is_empty() && !cfg.boundary {
        return Err(CliError::config("phase scan needs a mu_grid or the boundary row"));
    }
    if cfg.mu_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::config("mu_grid must be strictly increasing"));
    }
    if let Some(mu) = cfg.mu_grid.iter().find(|mu| !(**mu < ground_energy)) {
        return Err(CliError::config(format!(
            "mu = {mu} is not below the ground energy {ground_energy}"
        )));
    }
    if !(cfg.eps_reg > 0.0) {
        return Err(CliError::config("eps_reg must be positive"));
    }
    if cfg.basis_size == 0 {
        return Err(CliError::config("basis_size must be positive"));
    }
    let region = cfg.region()?;
    if region.dim() != cfg.dim {
        return Err(CliError::config("region dimension does not match dim"));
    }
    if cfg.probes.is_empty() {
        return Err(CliError::config("phase scan needs at least one probe"));
    }
    let probes: Vec<TestFunction<f64>> = cfg.probes.iter().map(|p| p.build(&model_cfg)).collect::<CliResult<_>>()?;
    let ground = model.ground_state()?;

    let mut states: Vec<(f64, bool, Equilibrium<f64>)> = Vec::new();
    for &mu in &cfg.mu_grid {
        states.push((mu, false, ThermalParams::new(cfg.beta, mu, model)?.into()));
    }
    if cfg.boundary {
        let limit = LimitParams::new(cfg.beta, model, LimitKind::TrapGround)?;
        states.push((ground_energy, true, limit.into()));
    }

    let blocks: Vec<Vec<Vec<Cell>>> = states
        .par_iter()
        .map(|(mu, boundary, state)| {
            let spec = QuasifreeSpec::new(SesquiForm::from(*state));
            let lowest = number_cell(number_expectation(&spec, &ground)?);
            let box_number = local_normality_report(state, &region, BoxBasis::Legendre, cfg.basis_size)?.total();
            probes
                .iter()
                .enumerate()
                .map(|(k, f)| {
                    let status = match state {
                        Equilibrium::Thermal(_) => DomainStatus::Regular,
                        Equilibrium::Limit(_) => domain_classify(&model, LimitKind::TrapGround, f)?.status,
                    };
                    Ok(vec![
                        Cell::Num(*mu),
                        (*boundary).into(),
                        k.into(),
                        lowest.clone(),
                        number_cell(number_expectation(&spec, f)?),
                        regularized_number(&spec, f, cfg.eps_reg)?.into(),
                        box_number.into(),
                        status_cell(status),
                    ])
                })
                .collect::<bose_quasifree::Result<Vec<_>>>()
        })
        .collect::<bose_quasifree::Result<_>>()?;

    let mut table = Table::new(&[
        "mu",
        "boundary",
        "probe",
        "lowest_mode_occupation",
        "probe_number",
        "regularized_number",
        "box_number",
        "verdict",
    ]);
    let mut lowest: Vec<f64> = Vec::new();
    for block in blocks {
        if let Some(Cell::Num(v)) = block.first().map(|row| row[3].clone()) {
            lowest.push(v);
        }
        for row in block {
            table.push(row);
        }
    }
    table.summarize("ground_energy", json!(ground_energy));
    table.summarize(
        "lowest_mode_increasing",
        json!(lowest.windows(2).all(|w| w[0] < w[1])),
    );
    Ok(table.into())
}

/// `|trap(L) − free|` for each trap length.
pub fn limit_scan(cfg: &LimitScanConfig) -> CliResult<Outcome> {
    if cfg.lengths.is_empty() {
        return Err(CliError::config("lengths must not be empty"));
    }
    let model = cfg.model();
    let f = cfg.f.build(&model)?;
    let g = match &cfg.g {
        Some(g) => g.build(&model)?,
        None => f.clone(),
    };
    let report = thermodynamic_limit_scan(cfg.beta, cfg.mu, &f, &g, cfg.t, &cfg.lengths, cfg.tol)?;
    let mut table = Table::new(&["length", "deviation"]);
    for (length, deviation) in &report.entries {
        table.push(vec![(*length).into(), (*deviation).into()]);
    }
    table.summarize("verdict", json!(verdict_name(report.verdict)));
    table.summarize(
        "strictly_decreasing",
        json!(report.entries.windows(2).all(|w| w[1].1 < w[0].1)),
    );
    Ok(table.into())
}

/// Both sides of the KMS boundary identity; fails when any deviation
/// exceeds `tol`.
pub fn kms_check(cfg: &KmsCheckConfig) -> CliResult<Outcome> {
    let state = cfg.state.build()?;
    let f = cfg.f.build(&cfg.state.model)?;
    let g = match &cfg.g {
        Some(g) => g.build(&cfg.state.model)?,
        None => f.clone(),
    };
    if cfg.times.is_empty() {
        return Err(CliError::config("times must not be empty"));
    }
    if !state.is_regular(&f)? || !state.is_regular(&g)? {
        return Err(CliError::config("probe lies outside the regular domain of the limit state"));
    }
    let rows: Vec<(f64, num_complex::Complex<f64>, num_complex::Complex<f64>)> = cfg
        .times
        .par_iter()
        .map(|&t| Ok((t, kms_boundary_value(&state, &f, &g, t)?, equilibrium_form(&state, &g, &f, -t)?)))
        .collect::<bose_quasifree::Result<_>>()?;
    let mut table = Table::new(&["t", "continued_re", "continued_im", "swapped_re", "swapped_im", "deviation"]);
    let mut worst = 0.0f64;
    for (t, lhs, rhs) in rows {
        let d = (lhs - rhs).norm();
        worst = worst.max(d);
        table.push(vec![t.into(), lhs.re.into(), lhs.im.into(), rhs.re.into(), rhs.im.into(), d.into()]);
    }
    let passed = worst <= cfg.tol;
    table.summarize("max_deviation", json!(worst));
    table.summarize("passed", json!(passed));
    Ok(Outcome {
        table,
        failure: (!passed).then(|| format!("KMS deviation {worst:e} exceeds {:e}", cfg.tol)),
    })
}

/// Two-point moduli and factorization gaps along the time list.
pub fn cluster_check(cfg: &ClusterCheckConfig) -> CliResult<Outcome> {
    let state = cfg.state.build()?;
    let f = cfg.f.build(&cfg.state.model)?;
    let g = match &cfg.g {
        Some(g) => g.build(&cfg.state.model)?,
        None => f.clone(),
    };
    if cfg.times.is_empty() {
        return Err(CliError::config("times must not be empty"));
    }
    let report = clustering_check(&state, &f, &g, &cfg.times, cfg.tol)?;
    let mut table = Table::new(&["t", "two_point_re", "two_point_im", "two_point_abs", "factorization_gap"]);
    for (k, (t, v)) in report.two_point.iter().enumerate() {
        let gap = report.factorization_gap.get(k).map_or(Cell::Text(String::new()), |g| Cell::Num(g.1));
        table.push(vec![(*t).into(), v.re.into(), v.im.into(), v.norm().into(), gap]);
    }
    table.summarize("verdict", json!(verdict_name(report.verdict)));
    table.summarize("periodic", json!(report.periodic));
    table.summarize("strictly_decreasing", json!(report.strictly_decreasing()));
    Ok(table.into())
}

/// Regular or divergent verdict of each function for the model's limit.
pub fn domain_classify_cmd(cfg: &DomainClassifyConfig) -> CliResult<Outcome> {
    let model = cfg.model.build()?;
    if cfg.functions.is_empty() {
        return Err(CliError::config("functions must not be empty"));
    }
    let functions: Vec<TestFunction<f64>> =
        cfg.functions.iter().map(|f| f.build(&cfg.model)).collect::<CliResult<_>>()?;
    let verdicts = functions
        .par_iter()
        .map(|f| domain_classify(&model, cfg.model.limit_kind(), f))
        .collect::<bose_quasifree::Result<Vec<_>>>()?;
    let mut table = Table::new(&["function", "status", "diagnostic"]);
    for (k, v) in verdicts.into_iter().enumerate() {
        table.push(vec![k.into(), status_cell(v.status), v.diagnostic.into()]);
    }
    Ok(table.into())
}

/// Runs the verification suite; fails when any check fails.
pub fn verify(options: &SuiteOptions) -> CliResult<Outcome> {
    let checks = suite::run(options)?;
    let mut table = Table::new(&["group", "check", "measured", "tolerance", "passed"]);
    let mut failed = Vec::new();
    for check in &checks {
        if !check.passed {
            failed.push(format!("{}/{}", check.group, check.name));
        }
        table.push(vec![
            check.group.into(),
            check.name.clone().into(),
            check.measured.into(),
            check.tolerance.into(),
            check.passed.into(),
        ]);
    }
    table.summarize("checks", json!(checks.len()));
    table.summarize("failed", json!(failed));
    let failure = (!failed.is_empty()).then(|| format!("{} of {} checks failed: {}", failed.len(), checks.len(), failed.join(" ")));
    Ok(Outcome { table, failure })
}
