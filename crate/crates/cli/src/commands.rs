//! Command orchestration: build the model from a [`RunConfig`], run the
//! requested computation (with the truncation convergence guard where
//! enabled) and emit the output files.

use std::path::{Path, PathBuf};

use optomotor::dynamics::{
    self, build_liouvillian, evolve, max_series_drift, steady_state, thermal_state,
    EvolveOptions, TrajectoryRecord,
};
use optomotor::hilbert::{build_layout, FockSpaceLayout, Mode};
use optomotor::models::{build_effective_hamiltonian, build_full_hamiltonian};
use optomotor::observables::{attach_derived_series, g2_two_time, standard_observables};
use optomotor::spectrum::{
    find_avoided_crossings, sweep_delta, sweep_delta_full, AnticrossingReport, DeltaGrid,
    SpectrumSweepResult,
};
use optomotor::{CoreError, OperatorMatrix};

use crate::config::{ModelKind, OutputFormat, RunConfig, CONVERGENCE_DRIFT_TOL};
use crate::output::{
    fmt_f64, out_path, trajectory_columns, trajectory_json, write_atomic, write_svg, CsvDoc,
    Panel,
};

/// Failure taxonomy mapped to process exit codes (config = 2, the rest = 3).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "io failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }

    /// Machine-readable one-line record for stderr.
    pub fn json_record(&self) -> String {
        let (kind, message) = match self {
            CliError::Config(m) => ("config", m),
            CliError::Numerical(m) => ("numerical", m),
            CliError::Io(m) => ("io", m),
        };
        serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Truncation convergence guard outcome: the same run repeated at
/// (n1+2, n2+2) and the sup-norm drift of every recorded series.
#[derive(Debug, Clone, Copy)]
pub struct GuardReport {
    pub coarse: (usize, usize),
    pub fine: (usize, usize),
    pub drift: f64,
    pub threshold: f64,
}

impl GuardReport {
    pub fn converged(&self) -> bool {
        self.drift <= self.threshold
    }

    pub fn meta_line(&self) -> String {
        format!(
            "convergence_guard: coarse = ({}, {}), fine = ({}, {}), drift = {}, threshold = {}, converged = {}",
            self.coarse.0,
            self.coarse.1,
            self.fine.0,
            self.fine.1,
            fmt_f64(self.drift),
            fmt_f64(self.threshold),
            self.converged()
        )
    }
}

fn layout_of(cfg: &RunConfig) -> CliResult<FockSpaceLayout> {
    build_layout(cfg.layout.n1, cfg.layout.n2).map_err(|e| CliError::Config(e.to_string()))
}

fn hamiltonian_of(cfg: &RunConfig, layout: &FockSpaceLayout) -> CliResult<OperatorMatrix> {
    match cfg.model {
        ModelKind::Effective => {
            let p = cfg
                .effective
                .ok_or_else(|| CliError::Config("missing [effective] section".into()))?;
            build_effective_hamiltonian(&p, layout).map_err(CliError::from)
        }
        ModelKind::Full => {
            let p = cfg
                .full
                .ok_or_else(|| CliError::Config("missing [full] section".into()))?;
            Ok(build_full_hamiltonian(&p, layout))
        }
    }
}

fn meta_common(cfg: &RunConfig, command: &str) -> Vec<String> {
    let mut meta = vec![format!("command: {command}")];
    let model = match cfg.model {
        ModelKind::Effective => "effective",
        ModelKind::Full => "full",
    };
    meta.push(format!("model = {model}"));
    match cfg.model {
        ModelKind::Effective => {
            if let Some(p) = &cfg.effective {
                meta.push(format!(
                    "omega = {}, omega1 = {}, omega2 = {}, k1 = {}, k2 = {}, j_coupling = {}",
                    p.omega, p.omega1, p.omega2, p.k1, p.k2, p.j_coupling
                ));
            }
        }
        ModelKind::Full => {
            if let Some(p) = &cfg.full {
                meta.push(format!(
                    "omega = {}, omega1 = {}, omega2 = {}, lambda1 = {}, lambda2 = {}, j_coupling = {}",
                    p.omega, p.omega1, p.omega2, p.lambda1, p.lambda2, p.j_coupling
                ));
            }
        }
    }
    let d = &cfg.dissipation;
    meta.push(format!(
        "kappa1 = {}, kappa2 = {}, gamma = {}, gamma_phi = {}, n_th = {}",
        d.kappa1, d.kappa2, d.gamma, d.gamma_phi, d.n_th
    ));
    meta.push(format!("n1 = {}, n2 = {}", cfg.layout.n1, cfg.layout.n2));
    meta
}

/// Result of the `spectrum` command.
pub struct SpectrumOutcome {
    pub sweep: SpectrumSweepResult,
    pub reports: Vec<AnticrossingReport>,
    pub guard: Option<GuardReport>,
    pub files: Vec<PathBuf>,
}

fn sweep_at(cfg: &RunConfig, n1: usize, n2: usize) -> CliResult<SpectrumSweepResult> {
    let layout = build_layout(n1, n2).map_err(|e| CliError::Config(e.to_string()))?;
    let grid = DeltaGrid::new(cfg.sweep.delta_lo, cfg.sweep.delta_hi, cfg.sweep.points)
        .map_err(|e| CliError::Config(e.to_string()))?;
    match cfg.model {
        ModelKind::Effective => {
            let p = cfg
                .effective
                .ok_or_else(|| CliError::Config("missing [effective] section".into()))?;
            sweep_delta(&p, grid, cfg.sweep.m_levels, &layout).map_err(CliError::from)
        }
        ModelKind::Full => {
            let p = cfg
                .full
                .ok_or_else(|| CliError::Config("missing [full] section".into()))?;
            sweep_delta_full(&p, grid, cfg.sweep.m_levels, &layout).map_err(CliError::from)
        }
    }
}

/// Sweep the low-lying spectrum over Δ, locate avoided crossings and write
/// the sweep CSV, the anticrossing CSV and the optional SVG/JSON mirrors.
pub fn run_spectrum_command(
    cfg: &RunConfig,
    out_dir: &Path,
    convergence_guard: bool,
) -> CliResult<SpectrumOutcome> {
    cfg.validate().map_err(CliError::Config)?;
    let sweep = sweep_at(cfg, cfg.layout.n1, cfg.layout.n2)?;
    let reports = find_avoided_crossings(&sweep, cfg.sweep.min_prominence);

    let guard = if convergence_guard {
        let fine = sweep_at(cfg, cfg.layout.n1 + 2, cfg.layout.n2 + 2)?;
        let mut drift = 0.0f64;
        for (a, b) in sweep.levels.iter().zip(&fine.levels) {
            for (x, y) in a.iter().zip(b) {
                drift = drift.max((x - y).abs());
            }
        }
        Some(GuardReport {
            coarse: (cfg.layout.n1, cfg.layout.n2),
            fine: (cfg.layout.n1 + 2, cfg.layout.n2 + 2),
            drift,
            threshold: CONVERGENCE_DRIFT_TOL,
        })
    } else {
        None
    };

    let mut files = Vec::new();
    let m = cfg.sweep.m_levels;
    let mut header = vec!["delta".to_string()];
    header.extend((0..m).map(|i| format!("E{i}")));
    let mut doc = CsvDoc::new(header);
    for line in meta_common(cfg, "spectrum") {
        doc.meta(line);
    }
    doc.meta(format!(
        "sweep: delta in [{}, {}], {} points, m = {}",
        cfg.sweep.delta_lo, cfg.sweep.delta_hi, cfg.sweep.points, m
    ));
    if let Some(g) = &guard {
        doc.meta(g.meta_line());
    }
    for (delta, row) in sweep.delta_grid.iter().zip(&sweep.levels) {
        let mut cells = vec![fmt_f64(*delta)];
        cells.extend(row.iter().map(|v| fmt_f64(*v)));
        doc.row(cells);
    }
    let path = out_path(out_dir, "spectrum.csv");
    doc.write(&path)?;
    files.push(path);

    let mut adoc = CsvDoc::new(vec![
        "level_pair".into(),
        "delta_star".into(),
        "gap".into(),
    ]);
    for line in meta_common(cfg, "spectrum") {
        adoc.meta(line);
    }
    adoc.meta(format!("min_prominence = {}", cfg.sweep.min_prominence));
    for r in &reports {
        adoc.row(vec![
            format!("{}-{}", r.level_pair.0, r.level_pair.1),
            fmt_f64(r.delta_star),
            fmt_f64(r.gap),
        ]);
    }
    let path = out_path(out_dir, "anticrossings.csv");
    adoc.write(&path)?;
    files.push(path);

    if cfg.output.formats.contains(&OutputFormat::Svg) {
        let curves = (0..m)
            .map(|i| {
                (
                    format!("E{i}"),
                    sweep
                        .delta_grid
                        .iter()
                        .zip(&sweep.levels)
                        .map(|(d, row)| (*d, row[i]))
                        .collect(),
                )
            })
            .collect();
        let panel = Panel {
            title: format!("{} lowest levels vs detuning", m),
            x_label: "delta (units of omega2)".into(),
            y_label: "energy (units of omega2)".into(),
            curves,
        };
        let path = out_path(out_dir, "spectrum.svg");
        write_svg(&path, &[panel])?;
        files.push(path);
    }

    if cfg.output.formats.contains(&OutputFormat::Json) {
        let body = serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "sweep": &sweep,
            "anticrossings": &reports,
            "convergence_guard": guard.as_ref().map(|g| serde_json::json!({
                "drift": g.drift,
                "threshold": g.threshold,
                "converged": g.converged(),
            })),
        });
        let path = out_path(out_dir, "spectrum.json");
        write_atomic(&path, serde_json::to_string_pretty(&body).unwrap().as_bytes())?;
        files.push(path);
    }

    Ok(SpectrumOutcome {
        sweep,
        reports,
        guard,
        files,
    })
}

/// Result of the `evolve` command.
pub struct EvolveOutcome {
    pub record: TrajectoryRecord,
    pub guard: Option<GuardReport>,
    pub files: Vec<PathBuf>,
}

fn trajectory_at(cfg: &RunConfig, n1: usize, n2: usize) -> CliResult<TrajectoryRecord> {
    let layout = build_layout(n1, n2).map_err(|e| CliError::Config(e.to_string()))?;
    let h = {
        let mut scaled = cfg.clone();
        scaled.layout.n1 = n1;
        scaled.layout.n2 = n2;
        hamiltonian_of(&scaled, &layout)?
    };
    let l = build_liouvillian(&h, &cfg.dissipation, &layout)?;
    let rho0 = thermal_state(
        &layout,
        cfg.resolved_n_init(),
        cfg.trajectory.initial_qubit.into(),
    );
    let t_max = cfg.resolved_t_max();
    let points = cfg.trajectory.points.max(1);
    let t_grid: Vec<f64> = if points == 1 || t_max == 0.0 {
        vec![0.0]
    } else {
        (0..points)
            .map(|i| i as f64 * t_max / (points - 1) as f64)
            .collect()
    };
    let observables = standard_observables(&layout);
    let out = evolve(&rho0, &l, &t_grid, &observables, &EvolveOptions::default())?;
    let mut record = out.record;
    attach_derived_series(&mut record);
    Ok(record)
}

/// Integrate the dissipative dynamics, record the standard observable set
/// plus derived series, and write trajectory CSV / SVG / JSON.
pub fn run_evolve_command(
    cfg: &RunConfig,
    out_dir: &Path,
    convergence_guard: bool,
) -> CliResult<EvolveOutcome> {
    cfg.validate().map_err(CliError::Config)?;
    let record = trajectory_at(cfg, cfg.layout.n1, cfg.layout.n2)?;

    let guard = if convergence_guard {
        let fine = trajectory_at(cfg, cfg.layout.n1 + 2, cfg.layout.n2 + 2)?;
        Some(GuardReport {
            coarse: (cfg.layout.n1, cfg.layout.n2),
            fine: (cfg.layout.n1 + 2, cfg.layout.n2 + 2),
            drift: max_series_drift(&record, &fine),
            threshold: CONVERGENCE_DRIFT_TOL,
        })
    } else {
        None
    };

    let mut files = Vec::new();
    let select = cfg.trajectory.observables.as_deref();
    let (header, rows) = trajectory_columns(&record, select);
    let mut doc = CsvDoc::new(header);
    for line in meta_common(cfg, "evolve") {
        doc.meta(line);
    }
    doc.meta(format!(
        "trajectory: t_max = {}, points = {}, n_init = {}, initial_qubit = {:?}",
        cfg.resolved_t_max(),
        cfg.trajectory.points,
        cfg.resolved_n_init(),
        cfg.trajectory.initial_qubit
    ));
    if let Some(g) = &guard {
        doc.meta(g.meta_line());
    }
    for r in rows {
        doc.row(r);
    }
    let path = out_path(out_dir, "trajectory.csv");
    doc.write(&path)?;
    files.push(path);

    if cfg.output.formats.contains(&OutputFormat::Svg) {
        let series_curve = |label: &str| -> Vec<(f64, f64)> {
            record
                .get(label)
                .and_then(|s| s.as_real())
                .map(|v| record.times.iter().copied().zip(v.iter().copied()).collect())
                .unwrap_or_default()
        };
        let g2_panel = Panel {
            title: "second-order coherence".into(),
            x_label: "time (units of 1/omega2)".into(),
            y_label: "g2".into(),
            curves: vec![
                ("g2_c".into(), series_curve("g2_c")),
                ("g2_d".into(), series_curve("g2_d")),
            ],
        };
        let z_panel = Panel {
            title: "population imbalances".into(),
            x_label: "time (units of 1/omega2)".into(),
            y_label: "z".into(),
            curves: vec![
                ("z_c".into(), series_curve("z_c")),
                ("z_d".into(), series_curve("z_d")),
            ],
        };
        let path = out_path(out_dir, "trajectory.svg");
        write_svg(&path, &[g2_panel, z_panel])?;
        files.push(path);
    }

    if cfg.output.formats.contains(&OutputFormat::Json) {
        let meta = serde_json::json!({
            "t_max": cfg.resolved_t_max(),
            "points": cfg.trajectory.points,
            "n_init": cfg.resolved_n_init(),
            "convergence_guard": guard.as_ref().map(|g| serde_json::json!({
                "drift": g.drift,
                "threshold": g.threshold,
                "converged": g.converged(),
            })),
        });
        let body = trajectory_json(&record, select, &meta);
        let path = out_path(out_dir, "trajectory.json");
        write_atomic(&path, serde_json::to_string_pretty(&body).unwrap().as_bytes())?;
        files.push(path);
    }

    Ok(EvolveOutcome {
        record,
        guard,
        files,
    })
}

/// Result of the `g2` command.
pub struct G2Outcome {
    pub taus: Vec<f64>,
    pub g2_c: Vec<f64>,
    pub g2_d: Vec<f64>,
    pub files: Vec<PathBuf>,
}

/// Steady-state two-time coherence g²(τ) for both modes. Requires a
/// truncation small enough for the dense steady-state solver
/// (2·n1·n2 squared within the guard).
pub fn run_g2_command(cfg: &RunConfig, out_dir: &Path) -> CliResult<G2Outcome> {
    cfg.validate().map_err(CliError::Config)?;
    let layout = layout_of(cfg)?;
    let dim = layout.total_dim();
    if dim * dim > dynamics::STEADY_STATE_DENSE_LIMIT {
        return Err(CliError::Config(format!(
            "g2 needs the dense steady-state path: (2*n1*n2)^2 = {} exceeds {}; \
             lower --n1/--n2 (e.g. 4 and 4)",
            dim * dim,
            dynamics::STEADY_STATE_DENSE_LIMIT
        )));
    }
    let h = hamiltonian_of(cfg, &layout)?;
    let l = build_liouvillian(&h, &cfg.dissipation, &layout)?;
    let rho_ss = steady_state(&l)?;
    let points = cfg.g2.points.max(2);
    let taus: Vec<f64> = (0..points)
        .map(|i| i as f64 * cfg.g2.tau_max / (points - 1) as f64)
        .collect();
    let opts = EvolveOptions::long_horizon();
    let g2_c = g2_two_time(&rho_ss, &l, &layout, Mode::One, &taus, &opts)?;
    let g2_d = g2_two_time(&rho_ss, &l, &layout, Mode::Two, &taus, &opts)?;

    let mut files = Vec::new();
    let mut doc = CsvDoc::new(vec!["tau".into(), "g2_c".into(), "g2_d".into()]);
    for line in meta_common(cfg, "g2") {
        doc.meta(line);
    }
    doc.meta(format!(
        "two-time correlation from the steady state; tau_max = {}, points = {}",
        cfg.g2.tau_max, points
    ));
    for i in 0..taus.len() {
        doc.row(vec![fmt_f64(taus[i]), fmt_f64(g2_c[i]), fmt_f64(g2_d[i])]);
    }
    let path = out_path(out_dir, "g2_two_time.csv");
    doc.write(&path)?;
    files.push(path);

    if cfg.output.formats.contains(&OutputFormat::Svg) {
        let panel = Panel {
            title: "steady-state two-time coherence".into(),
            x_label: "tau (units of 1/omega2)".into(),
            y_label: "g2(tau)".into(),
            curves: vec![
                (
                    "g2_c".into(),
                    taus.iter().copied().zip(g2_c.iter().copied()).collect(),
                ),
                (
                    "g2_d".into(),
                    taus.iter().copied().zip(g2_d.iter().copied()).collect(),
                ),
            ],
        };
        let path = out_path(out_dir, "g2_two_time.svg");
        write_svg(&path, &[panel])?;
        files.push(path);
    }

    if cfg.output.formats.contains(&OutputFormat::Json) {
        let body = serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "tau": taus,
            "g2_c": g2_c,
            "g2_d": g2_d,
        });
        let path = out_path(out_dir, "g2_two_time.json");
        write_atomic(&path, serde_json::to_string_pretty(&body).unwrap().as_bytes())?;
        files.push(path);
    }

    Ok(G2Outcome {
        taus,
        g2_c,
        g2_d,
        files,
    })
}
