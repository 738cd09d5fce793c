use clap::{Args, ValueEnum};
use nalgebra::DMatrix;
use optomech::evolution::ProtocolOptions;
use optomech::normal_modes::POLARITON_LABELS;
use optomech::{
    adaptive_grid, build, compare_with_gaussian, diagonalize, evolve_covariance, noise_budget, normalize,
    project_polaritons, psd, run_protocol, solve_steady, spectrum_sweep, stability_check, validate_regime,
    CovarianceState, Drive, ModelKind, ModelParams, Protocol, SteadyState, SystemConfig,
};
use serde_json::{json, Value};

use crate::CliError;

/// A rectangular result with a fixed header, written as one CSV file.
pub struct Table {
    pub name: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl Cell {
    fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }
}

impl Table {
    fn new(name: &'static str, header: &[&str]) -> Self {
        Table {
            name,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Two-column `quantity,value` table.
    fn report(name: &'static str, entries: Vec<(&str, Cell)>) -> Self {
        let mut t = Table::new(name, &["quantity", "value"]);
        for (k, v) in entries {
            t.rows.push(vec![Cell::text(k), v]);
        }
        t
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => format_number(*x),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Twelve significant digits, fixed exponent form, independent of locale.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.11e}")
    }
}

fn flag(b: bool) -> Cell {
    Cell::text(if b { "true" } else { "false" })
}

pub struct Output {
    pub tables: Vec<Table>,
    pub json: Value,
    /// Set when the run completed but a check it performs did not pass.
    pub failure: Option<String>,
}

impl Output {
    fn new(tables: Vec<Table>, json: Value) -> Self {
        Output {
            tables,
            json,
            failure: None,
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("results serialize to JSON")
}

/// Model parameters for a config; pump-driven configs go through the
/// classical steady state first.
pub fn resolve(config: &SystemConfig) -> Result<(ModelParams, Option<SteadyState>), CliError> {
    let steady = match config.drive {
        Drive::Pump { .. } => Some(solve_steady(config)?),
        Drive::Coupling { .. } => None,
    };
    let params = normalize(config, steady.as_ref())?;
    Ok((params, steady))
}

pub fn steady(config: &SystemConfig) -> Result<Output, CliError> {
    let s = solve_steady(config)?;
    let (g_a, g_b) = s.couplings(config);
    let params = normalize(config, Some(&s))?;
    let residual = s.relation_residual(config)?;
    let table = Table::report(
        "steady",
        vec![
            ("alpha_re", s.alpha.re.into()),
            ("alpha_im", s.alpha.im.into()),
            ("alpha_p_re", s.alpha_p.re.into()),
            ("alpha_p_im", s.alpha_p.im.into()),
            ("beta_re", s.beta.re.into()),
            ("beta_im", s.beta.im.into()),
            ("beta_p_re", s.beta_p.re.into()),
            ("beta_p_im", s.beta_p.im.into()),
            ("x_c", s.x_c.into()),
            ("G_a_rad_s", g_a.into()),
            ("G_b_rad_s", g_b.into()),
            ("delta_a", params.delta_a.into()),
            ("delta_b", params.delta_b.into()),
            ("iterations", (s.iterations as f64).into()),
            ("relation_residual", residual.into()),
        ],
    );
    let json = json!({
        "steady": to_json(&s),
        "couplings_rad_s": [g_a, g_b],
        "params": to_json(&params),
        "relation_residual": residual,
    });
    Ok(Output::new(vec![table], json))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Five,
    Three,
    Two,
}

impl Kind {
    fn model_kind(self) -> ModelKind {
        match self {
            Kind::Five => ModelKind::FiveMode,
            Kind::Three => ModelKind::ThreeMode,
            Kind::Two => ModelKind::TwoModeAdiabatic,
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "three")]
    pub kind: Kind,
    /// Also write the drift and diffusion matrices.
    #[arg(long)]
    pub dump: bool,
}

fn matrix_table(name: &'static str, labels: &[String], m: &DMatrix<f64>) -> Table {
    let quads: Vec<String> = labels.iter().flat_map(|l| [format!("x_{l}"), format!("p_{l}")]).collect();
    let mut header = vec!["row"];
    header.extend(quads.iter().map(String::as_str));
    let mut t = Table::new(name, &header);
    for (r, q) in quads.iter().enumerate() {
        let mut row = vec![Cell::text(q.clone())];
        row.extend((0..m.ncols()).map(|c| Cell::Num(m[(r, c)])));
        t.rows.push(row);
    }
    t
}

pub fn model(config: &SystemConfig, args: &ModelArgs) -> Result<Output, CliError> {
    let (params, _) = resolve(config)?;
    let model = build(args.kind.model_kind(), &params)?;
    let stability = stability_check(&model);
    let regime = validate_regime(&params);
    let mut eig = Table::new("eigenvalues", &["re", "im"]);
    for z in &stability.eigenvalues {
        eig.rows.push(vec![z.re.into(), z.im.into()]);
    }
    let summary = Table::report(
        "model",
        vec![
            ("kind", Cell::text(model.kind.name())),
            ("modes", Cell::text(model.labels.join(" "))),
            ("abscissa", stability.abscissa.into()),
            ("stable", flag(stability.stable)),
            ("dominant_mode", Cell::text(stability.dominant_mode.clone())),
            ("adiabatic_elimination_ok", flag(regime.adiabatic_elimination_ok)),
            ("sideband_resolved_ok", flag(regime.sideband_resolved_ok)),
            ("coupling_weak_ok", flag(regime.coupling_weak_ok)),
        ],
    );
    let mut tables = vec![summary, eig];
    let mut json = json!({
        "kind": model.kind.name(),
        "labels": model.labels,
        "stability": to_json(&stability),
        "regime": to_json(&regime),
        "params": to_json(&params),
    });
    if args.dump {
        tables.push(matrix_table("drift", &model.labels, &model.drift));
        tables.push(matrix_table("diffusion", &model.labels, &model.diffusion));
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
        };
        json["drift"] = json!(rows(&model.drift));
        json["diffusion"] = json!(rows(&model.diffusion));
    }
    for msg in &regime.messages {
        eprintln!("regime: {msg}");
    }
    Ok(Output::new(tables, json))
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// First optical detuning of the sweep (units of omega_m).
    #[arg(long, default_value_t = -1.2, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

fn linspace(from: f64, to: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if points < 2 || !(to > from) {
        return Err(CliError::Usage(format!(
            "need --to > --from and at least 2 points (got {from}..{to}, {points})"
        )));
    }
    Ok((0..points).map(|i| from + (to - from) * i as f64 / (points - 1) as f64).collect())
}

pub fn spectrum(config: &SystemConfig, args: &SpectrumArgs) -> Result<Output, CliError> {
    let (params, _) = resolve(config)?;
    let grid = linspace(args.from, args.to, args.points)?;
    let sweep = spectrum_sweep(&params, &grid)?;
    let mut header = vec!["delta_a".to_string()];
    header.extend(POLARITON_LABELS.iter().map(|k| format!("omega_{k}")));
    for k in POLARITON_LABELS {
        for j in ["a", "b", "c"] {
            header.push(format!("frac_{k}_{j}"));
        }
    }
    let mut table = Table {
        name: "spectrum",
        header,
        rows: Vec::new(),
    };
    for point in &sweep {
        let mut row = vec![Cell::Num(point.delta_a)];
        match &point.spectrum {
            Some(s) => {
                row.extend(s.omega.iter().map(|&w| Cell::Num(w)));
                row.extend(s.composition.iter().flatten().map(|&w| Cell::Num(w)));
            }
            None => {
                row.extend((0..12).map(|_| Cell::Num(f64::NAN)));
                if let Some(e) = &point.error {
                    eprintln!("warning: delta_a = {}: {e}", point.delta_a);
                }
            }
        }
        table.rows.push(row);
    }
    Ok(Output::new(vec![table], json!({ "params": to_json(&params), "sweep": to_json(&sweep) })))
}

#[derive(Debug, Args)]
pub struct PsdArgs {
    #[arg(long, value_enum, default_value = "five")]
    pub kind: Kind,
    /// Bare mode whose spectrum is computed.
    #[arg(long, default_value = "a")]
    pub mode: String,
    #[arg(long, default_value_t = -1.5, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, default_value_t = 1.5, allow_hyphen_values = true)]
    pub to: f64,
    /// Uniform base points; refinement around each resonance is added.
    #[arg(long, default_value_t = 3001)]
    pub points: usize,
}

pub fn power_spectrum(config: &SystemConfig, args: &PsdArgs) -> Result<Output, CliError> {
    let (params, _) = resolve(config)?;
    let model = build(args.kind.model_kind(), &params)?;
    linspace(args.from, args.to, args.points)?;
    let grid = adaptive_grid(&model, args.from, args.to, args.points);
    let result = psd(&model, &grid, &args.mode)?;
    let mut table = Table::new("psd", &["omega", "S"]);
    for (w, s) in result.omega.iter().zip(&result.s) {
        table.rows.push(vec![(*w).into(), (*s).into()]);
    }
    Ok(Output::new(vec![table], to_json(&result)))
}

const POPULATION_HEADER: [&str; 7] = ["t", "n_a", "n_b", "n_c", "n_A", "n_B", "n_C"];

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Duration in units of 1/omega_m.
    #[arg(long, default_value_t = 1000.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.04)]
    pub dt: f64,
    /// Approximate number of output rows.
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
}

fn stride(t_end: f64, dt: f64, samples: usize) -> usize {
    let steps = (t_end / dt).ceil().max(1.0) as usize;
    (steps / samples.max(1)).max(1)
}

pub fn evolve(config: &SystemConfig, args: &EvolveArgs) -> Result<Output, CliError> {
    let (params, _) = resolve(config)?;
    let model = build(ModelKind::ThreeMode, &params)?;
    let spectrum = diagonalize(&params)?;
    let initial = CovarianceState::thermal(&model.labels, &[params.nbar_a, params.nbar_b, params.nbar_c])?;
    let traj = evolve_covariance(
        &|_| Ok(model.clone()),
        &initial,
        args.t_end,
        args.dt,
        stride(args.t_end, args.dt, args.samples),
    )?;
    let mut table = Table::new("evolve", &POPULATION_HEADER);
    let mut polaritons = Vec::with_capacity(traj.times.len());
    for ((t, bare), sigma) in traj.times.iter().zip(&traj.bare).zip(&traj.states) {
        let state = CovarianceState {
            sigma: sigma.clone(),
            t: *t,
            labels: model.labels.clone(),
        };
        let pol = project_polaritons(&state, &spectrum)?;
        let mut row = vec![Cell::Num(*t)];
        row.extend(bare.iter().chain(&pol).map(|&n| Cell::Num(n)));
        table.rows.push(row);
        polaritons.push(pol);
    }
    let mut json = json!({ "params": to_json(&params), "trajectory": to_json(&traj) });
    json["trajectory"]["polariton"] = json!(polaritons);
    Ok(Output::new(vec![table], json))
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    #[arg(long, default_value_t = 0.04)]
    pub dt: f64,
    /// Output rows per phase (receive, ramp, detect).
    #[arg(long, default_value_t = 200)]
    pub samples_per_phase: usize,
}

pub fn protocol(config: &SystemConfig, args: &ProtocolArgs) -> Result<Output, CliError> {
    let (params, _) = resolve(config)?;
    let settings = config
        .protocol
        .as_ref()
        .ok_or_else(|| CliError::Config("the config has no [protocol] section".into()))?;
    let protocol = Protocol::from_config(settings)?;
    let options = ProtocolOptions {
        dt: args.dt,
        samples_per_phase: args.samples_per_phase,
        ..ProtocolOptions::default()
    };
    let run = run_protocol(&protocol, &params, None, &options)?;
    if !run.feasibility.feasible {
        eprintln!("warning: {}", run.feasibility.message);
    }
    let traj = &run.trajectory;
    let mut table = Table::new("protocol", &POPULATION_HEADER);
    for ((t, bare), pol) in traj.times.iter().zip(&traj.bare).zip(&traj.polariton) {
        let mut row = vec![Cell::Num(*t)];
        row.extend(bare.iter().chain(pol).map(|&n| Cell::Num(n)));
        table.rows.push(row);
    }
    Ok(Output::new(
        vec![table],
        json!({ "params": to_json(&params), "protocol": to_json(&protocol), "run": to_json(&run) }),
    ))
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Input microwave occupation; defaults to the microwave bath occupation.
    #[arg(long)]
    pub n_s: Option<f64>,
}

pub fn budget(config: &SystemConfig, args: &BudgetArgs) -> Result<Output, CliError> {
    let (params, _) = resolve(config)?;
    let b = noise_budget(config, &params, args.n_s)?;
    let optional = |v: Option<bool>| Cell::text(v.map_or("n/a", |ok| if ok { "true" } else { "false" }));
    let table = Table::report(
        "budget",
        vec![
            ("n_s", b.n_s.into()),
            ("n_o", b.n_o.into()),
            ("mech_noise_term", b.mech_noise_term.into()),
            ("omega_s_rad_s", b.omega_s.into()),
            ("omega_o_rad_s", b.omega_o.into()),
            ("tau_min_s", b.adiabatic_window.0.into()),
            ("tau_max_s", b.adiabatic_window.1.into()),
            ("window_ratio", b.window_ratio.into()),
            ("window_feasible", flag(b.window_feasible)),
            ("dead_time_s", b.dead_time.into()),
            ("min_receive_window_s", b.min_receive_window.into()),
            ("min_detect_window_s", b.min_detect_window.into()),
            ("protocol_tau_ok", optional(b.protocol_tau_ok)),
            ("protocol_receive_ok", optional(b.protocol_receive_ok)),
            ("protocol_detect_ok", optional(b.protocol_detect_ok)),
        ],
    );
    Ok(Output::new(vec![table], to_json(&b)))
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 1000.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.02)]
    pub dt: f64,
    /// Largest retained number state of every mode.
    #[arg(long, default_value_t = 3)]
    pub cutoff: usize,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
}

pub fn oracle(config: &SystemConfig, args: &OracleArgs) -> Result<Output, CliError> {
    let (params, _) = resolve(config)?;
    let cutoff = [args.cutoff; 3];
    let report = compare_with_gaussian(&params, cutoff, args.t_end, args.dt, stride(args.t_end, args.dt, args.samples))?;
    let mut traj = Table::new(
        "oracle",
        &["t", "fock_a", "fock_b", "fock_c", "gauss_a", "gauss_b", "gauss_c"],
    );
    for ((t, f), g) in report.times.iter().zip(&report.fock).zip(&report.gaussian) {
        let mut row = vec![Cell::Num(*t)];
        row.extend(f.iter().chain(g).map(|&n| Cell::Num(n)));
        traj.rows.push(row);
    }
    let summary = Table::report(
        "oracle_report",
        vec![
            ("max_deviation_a", report.max_deviation[0].into()),
            ("max_deviation_b", report.max_deviation[1].into()),
            ("max_deviation_c", report.max_deviation[2].into()),
            ("tolerance", report.tolerance.into()),
            ("max_leakage", report.max_leakage.into()),
            ("initial_truncation_loss", report.initial_truncation_loss.into()),
            ("agree", flag(report.agree)),
        ],
    );
    let mut out = Output::new(vec![summary, traj], to_json(&report));
    if !report.agree {
        out.failure = Some(format!(
            "Fock and Gaussian populations differ by up to {:.3e}, above the tolerance {:.3e}",
            report.max_deviation.iter().copied().fold(0.0, f64::max),
            report.tolerance
        ));
    }
    Ok(out)
}
