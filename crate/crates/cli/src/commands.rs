use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use insulab::fem::FemSpace;
use insulab::geometry::{measures, write_mesh, DomainKind};
use insulab::heat_content::{
    certify_minimizer, linear_candidate, minimize_heat_content, solve_u0, threshold_m1, DEFAULT_SCHEDULE,
};
use insulab::radial_exact::{ball_thresholds, identity_2bel_check, lambda_m_disk, recurrence_residual, AnnulusU0};
use insulab::temp_decay::{
    decay_quotient, repair_monotone, threshold_m0, threshold_m0_with_refinement, DecayOptions, DecayProblem,
    ScanRow, SCAN_CSV_HEADER,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_grid, RunConfig};
use crate::svg::{line_plot, mesh_plot, Marker, Series};
use crate::{CliError, Command, Common, DomainArgs, Problem};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn write(&mut self, dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn write_json(&mut self, dir: &Path, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        self.write(dir, name, &text)
    }
}

fn config(name: &str, d: &DomainArgs, c: &Common) -> RunConfig {
    RunConfig {
        command: name.into(),
        domain: d.domain.clone(),
        h: d.h,
        refine: d.refine,
        m: None,
        m_grid: None,
        tol: None,
        seed: c.seed,
    }
}

fn envelope(kind: &str, cfg: &RunConfig) -> serde_json::Map<String, Value> {
    let mut v = serde_json::Map::new();
    v.insert("schema".into(), "insulab-v1".into());
    v.insert("kind".into(), kind.into());
    v.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    v
}

fn space_for(cfg: &RunConfig) -> Result<FemSpace, CliError> {
    cfg.check()?;
    Ok(FemSpace::new(&cfg.mesh()?))
}

/// Boundary values against arclength, one series per boundary loop.
fn trace_series(space: &FemSpace, u: &[f64], label: &str) -> Result<Vec<Series>, CliError> {
    let mesh = &space.mesh;
    let mut out = Vec::new();
    for (comp, edges) in mesh.boundary_loops()? {
        let mut s = 0.0;
        let mut points = vec![(0.0, u[mesh.boundary_edges[edges[0]].v[0]])];
        for &k in &edges {
            let e = &mesh.boundary_edges[k];
            s += mesh.edge_length(e);
            points.push((s, u[e.v[1]]));
        }
        out.push(Series { label: format!("{label}, boundary {comp}"), points });
    }
    Ok(out)
}

pub fn run(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::ThresholdM1 { domain, common } => cmd_threshold_m1(domain, common),
        Command::ThresholdM0 { domain, tol, pair, common } => cmd_threshold_m0(domain, *tol, *pair, common),
        Command::Sweep { domain, problem, m_grid, m, tol, jobs, common } => {
            cmd_sweep(domain, *problem, m_grid.as_deref(), *m, *tol, *jobs, common)
        }
        Command::Oracle { n, radius, common } => cmd_oracle(*n, *radius, common),
        Command::Heat { domain, m, trials, common } => cmd_heat(domain, *m, *trials, common),
        Command::Decay { domain, m, common } => cmd_decay(domain, *m, common),
        Command::Mesh { domain, common } => cmd_mesh(domain, common),
    }
}

fn cmd_threshold_m1(d: &DomainArgs, c: &Common) -> Result<Outcome, CliError> {
    let cfg = config("threshold-m1", d, c);
    let space = space_for(&cfg)?;
    let rep = threshold_m1(&space)?;
    let u0 = solve_u0(&space)?;
    let mut out = Outcome::default();

    out.checks.push(check(
        "m1_nonnegative",
        rep.m1 >= 0.0 && rep.m1.is_finite(),
        format!("m1 = {}", rep.m1),
    ));
    let mean = space.integral(&u0) / space.area;
    let scale = u0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    out.checks.push(check("u0_zero_mean", mean.abs() <= 1e-10 * scale.max(1.0), format!("mean = {mean:e}")));
    let oracle = match space.mesh.domain.kind {
        DomainKind::Annulus { inner, outer } => {
            let exact = AnnulusU0::new(inner, outer)?.m1();
            let err = rep.m1_extrapolated / exact - 1.0;
            out.checks.push(check("annulus_closed_form_2pct", err.abs() <= 0.02, format!("relative error {err:e}")));
            json!({ "m1": exact, "relative_error": err })
        }
        DomainKind::Disk { .. } => {
            out.checks.push(check(
                "disk_below_noise_floor",
                rep.below_noise_floor(),
                format!("extrapolated {:e}, floor {:e}", rep.m1_extrapolated, rep.noise_floor),
            ));
            json!({ "m1": 0.0 })
        }
        _ => Value::Null,
    };

    let mut doc = envelope("m1-report", &cfg);
    doc.insert("report".into(), serde_json::to_value(&rep).expect("report serializes"));
    doc.insert("below_noise_floor".into(), rep.below_noise_floor().into());
    doc.insert("oracle".into(), oracle);
    doc.insert("checks".into(), serde_json::to_value(&out.checks).expect("checks serialize"));
    out.write_json(&c.out, "m1.json", &Value::Object(doc))?;
    let svg = line_plot("u0 on the boundary", "arclength", "u0", &trace_series(&space, &u0, "u0")?, &[]);
    out.write(&c.out, "m1_trace.svg", &svg)?;
    out.summary.push(format!(
        "m1 = {:.6e} (refined {:.6e}, extrapolated {:.6e}, noise floor {:.3e})",
        rep.m1, rep.refined.m1, rep.m1_extrapolated, rep.noise_floor
    ));
    out.summary.push(format!("delta_omega = {:.6e}, P = {:.6}, |Ω| = {:.6}", rep.delta_omega, rep.perimeter, rep.area));
    Ok(out)
}

fn cmd_threshold_m0(d: &DomainArgs, tol: f64, pair: bool, c: &Common) -> Result<Outcome, CliError> {
    let mut cfg = config("threshold-m0", d, c);
    cfg.tol = Some(tol);
    let space = space_for(&cfg)?;
    let rep = if pair { threshold_m0_with_refinement(&space, tol)? } else { threshold_m0(&space, tol)? };
    let mut out = Outcome::default();
    out.checks.push(check(
        "kappa1_le_mu2",
        rep.kappa1 <= rep.mu2 + 1e-8,
        format!("κ1 = {}, μ2 = {}", rep.kappa1, rep.mu2),
    ));
    out.checks.push(check(
        "mu2_lt_lambda_d",
        rep.mu2 < rep.lambda_d * (1.0 - 1e-6),
        format!("μ2 = {}, λ_D = {}", rep.mu2, rep.lambda_d),
    ));
    out.checks.push(check(
        "bracket_converged",
        rep.hi - rep.lo < tol * rep.lo,
        format!("[{}, {}]", rep.lo, rep.hi),
    ));
    let oracle = match space.mesh.domain.kind {
        DomainKind::Disk { radius } => {
            let ball = ball_thresholds(2, radius)?;
            let law = rep.m0 * rep.mu2 / (2.0 * PI) - 1.0;
            out.checks.push(check("disk_two_pi_law_2pct", law.abs() <= 0.02, format!("m0·μ2/2π − 1 = {law:e}")));
            out.summary.push(format!("radial oracle m0 = {:.6}, μ2 = {:.6}", ball.m0, ball.mu2));
            json!({
                "m0": ball.m0,
                "mu2": ball.mu2,
                "lambda_d": ball.lambda_d,
                "m0_relative_error": rep.m0 / ball.m0 - 1.0,
                "m0_mu2_over_two_pi": rep.m0 * rep.mu2 / (2.0 * PI),
            })
        }
        _ => Value::Null,
    };
    let mut doc = envelope("m0-report", &cfg);
    doc.insert("report".into(), serde_json::to_value(&rep).expect("report serializes"));
    doc.insert("oracle".into(), oracle);
    doc.insert("checks".into(), serde_json::to_value(&out.checks).expect("checks serialize"));
    out.write_json(&c.out, "m0.json", &Value::Object(doc))?;
    out.summary.insert(
        0,
        format!(
            "m0 = {:.6} (κ1 = {:.6}, μ2 = {:.6}, λ_D = {:.6}, κ1 ≈ μ2: {})",
            rep.m0, rep.kappa1, rep.mu2, rep.lambda_d, rep.kappa1_equals_mu2
        ),
    );
    if let Some(fine) = &rep.refined {
        out.summary.push(format!("refined mesh m0 = {:.6}", fine.m0));
    }
    Ok(out)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    d: &DomainArgs,
    problem: Problem,
    grid: Option<&str>,
    m: Option<f64>,
    tol: f64,
    jobs: usize,
    c: &Common,
) -> Result<Outcome, CliError> {
    let grid = match (grid, m) {
        (Some(g), _) => parse_grid(g)?,
        (None, Some(m)) => vec![m],
        (None, None) => return Err(CliError::Usage("sweep needs --m-grid or --m".into())),
    };
    let mut cfg = config("sweep", d, c);
    cfg.m_grid = Some(grid.clone());
    cfg.tol = Some(tol);
    cfg.command = match problem {
        Problem::Decay => "sweep-decay".into(),
        Problem::Heat => "sweep-heat".into(),
    };
    let space = space_for(&cfg)?;
    let workers = pool(jobs)?;
    let mut out = Outcome::default();
    let (header, rows, threshold, label) = match problem {
        Problem::Decay => {
            let dp = DecayProblem::new(&space)?;
            let opts = DecayOptions::default();
            let mut results = workers.install(|| {
                grid.par_iter()
                    .map(|&m| dp.minimize(m, &opts, &[]))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            let restarted = repair_monotone(&dp, &mut results, &opts)?;
            let consistent = results
                .iter()
                .all(|r| (decay_quotient(&space, &r.u, r.m) / r.lambda_m - 1.0).abs() <= 1e-10);
            out.checks.push(check("rayleigh_consistency", consistent, "Q(u) = λ_m to 1e-10".into()));
            out.summary.push(format!("{restarted} grid point(s) restarted from their left neighbour"));
            let rows: Vec<ScanRow> = results.iter().map(ScanRow::from).collect();
            let m0 = threshold_m0(&space, tol)?.m0;
            (SCAN_CSV_HEADER.to_string(), rows, m0, "m0")
        }
        Problem::Heat => {
            let results = workers.install(|| {
                grid.par_iter()
                    .map(|&m| minimize_heat_content(&space, m, &DEFAULT_SCHEDULE))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            let rows: Vec<ScanRow> = results
                .iter()
                .map(|r| ScanRow {
                    m: r.m,
                    lambda_m: r.objective,
                    vanish_measure: r.vanishing.measure,
                    min_trace: r.min_trace(),
                })
                .collect();
            let m1 = threshold_m1(&space)?.m1;
            ("m,objective,vanish_measure,min_trace".to_string(), rows, m1, "m1")
        }
    };
    let monotone = rows.windows(2).all(|w| w[1].lambda_m <= w[0].lambda_m + 1e-8 * w[0].lambda_m.abs().max(1.0));
    out.checks.push(check("objective_nonincreasing_in_m", monotone, format!("{} grid points", rows.len())));

    let mut csv = header.clone();
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    out.write(&c.out, "sweep.csv", &csv)?;
    let series = Series {
        label: "vanishing measure".into(),
        points: rows.iter().map(|r| (r.m, r.vanish_measure)).collect(),
    };
    let marker = Marker { label: format!("{label} = {threshold:.4}"), x: threshold };
    let svg = line_plot("Bare part of the boundary", "m", "vanishing measure", &[series], &[marker]);
    out.write(&c.out, "sweep.svg", &svg)?;
    let mut doc = envelope("sweep", &cfg);
    doc.insert("csv_header".into(), header.into());
    doc.insert(label.into(), threshold.into());
    doc.insert("rows".into(), serde_json::to_value(&rows).expect("rows serialize"));
    doc.insert("checks".into(), serde_json::to_value(&out.checks).expect("checks serialize"));
    out.write_json(&c.out, "sweep.json", &Value::Object(doc))?;
    out.summary.insert(0, format!("{label} = {threshold:.6}"));
    for r in &rows {
        out.summary.push(r.csv_line());
    }
    Ok(out)
}

fn cmd_oracle(n: usize, radius: f64, c: &Common) -> Result<Outcome, CliError> {
    if n < 2 {
        return Err(CliError::Usage(format!("--n must be at least 2, got {n}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(CliError::Usage(format!("--radius must be positive, got {radius}")));
    }
    let ball = ball_thresholds(n, radius)?;
    let mut out = Outcome::default();
    let nf = n as f64;
    let prod = ball.normalized_product();
    let want = (nf - 1.0) / nf;
    out.checks.push(check(
        "normalized_product",
        (prod / want - 1.0).abs() <= 1e-10,
        format!("m0·μ2·|Ω|/P² = {prod}, (n−1)/n = {want}"),
    ));
    if n == 2 {
        let p = ball.m0 * ball.mu2;
        out.checks.push(check("two_pi_law", (p / (2.0 * PI) - 1.0).abs() <= 1e-10, format!("m0·μ2 = {p}")));
    }
    let mut worst = 0.0f64;
    for s in [0.5, 1.0, 1.5, 2.0] {
        for k in 1..=300 {
            worst = worst.max(recurrence_residual(s, 0.1 * k as f64)?);
        }
    }
    out.checks.push(check("bessel_recurrence", worst < 1e-11, format!("max residual {worst:e}")));
    let mut identity = Vec::new();
    if n == 2 {
        let mut worst = 0.0f64;
        for f in [1.25, 1.5, 2.0, 3.0, 5.0] {
            let m = f * ball.m0;
            let lambda = lambda_m_disk(2, radius, m)?;
            let r = identity_2bel_check(radius, m, lambda)?;
            worst = worst.max(r.abs());
            identity.push(json!({ "m": m, "lambda_m": lambda, "residual": r }));
        }
        out.checks.push(check("radial_identity", worst < 1e-8, format!("max residual {worst:e}")));
    }
    let mut doc = serde_json::Map::new();
    doc.insert("schema".into(), "insulab-v1".into());
    doc.insert("kind".into(), "ball-oracle".into());
    doc.insert("config".into(), json!({ "command": "oracle", "n": n, "radius": radius }));
    doc.insert("ball".into(), serde_json::to_value(&ball).expect("ball serializes"));
    doc.insert("m0_mu2".into(), (ball.m0 * ball.mu2).into());
    doc.insert("normalized_product".into(), prod.into());
    doc.insert("identity".into(), identity.into());
    doc.insert("checks".into(), serde_json::to_value(&out.checks).expect("checks serialize"));
    out.write_json(&c.out, "oracle.json", &Value::Object(doc))?;
    out.summary.extend([
        format!("n                  {n}"),
        format!("R                  {radius}"),
        format!("p                  {:.10}", ball.p),
        format!("mu2                {:.10}", ball.mu2),
        format!("lambda_D           {:.10}", ball.lambda_d),
        format!("m0                 {:.10}", ball.m0),
        format!("m0*mu2             {:.10}", ball.m0 * ball.mu2),
        format!("m0*mu2*|B|/P^2     {prod:.6}"),
    ]);
    Ok(out)
}

fn cmd_heat(d: &DomainArgs, m: f64, trials: usize, c: &Common) -> Result<Outcome, CliError> {
    let mut cfg = config("heat", d, c);
    cfg.m = Some(m);
    let space = space_for(&cfg)?;
    let r = minimize_heat_content(&space, m, &DEFAULT_SCHEDULE)?;
    let mut out = Outcome::default();
    let total = space.integral(&r.u);
    out.checks.push(check("unit_integral", (total - 1.0).abs() <= 1e-10, format!("∫u = {total}")));
    let u0 = solve_u0(&space)?;
    let cand = linear_candidate(&space, &u0, m)?;
    let certificate = if space.boundary_min(&cand) > 0.0 {
        let cert = certify_minimizer(&space, &r.u, m, trials, c.seed)?;
        out.checks.push(check(
            "certificate",
            cert.passed,
            format!("{} trials, worst margin {:e}", cert.trials, cert.worst_margin),
        ));
        serde_json::to_value(&cert).expect("certificate serializes")
    } else {
        Value::Null
    };
    let mut doc = envelope("heat-minimizer", &cfg);
    doc.insert("result".into(), r.to_json());
    doc.insert("certificate".into(), certificate);
    doc.insert("checks".into(), serde_json::to_value(&out.checks).expect("checks serialize"));
    out.write_json(&c.out, "heat.json", &Value::Object(doc))?;
    let svg = line_plot("Heat-content minimizer on the boundary", "arclength", "u", &trace_series(&space, &r.u, "u")?, &[]);
    out.write(&c.out, "heat_trace.svg", &svg)?;
    out.summary.push(format!(
        "T_m = {:.10}, vanishing measure {:.6}, min trace {:.3e}",
        r.objective,
        r.vanishing.measure,
        r.min_trace()
    ));
    Ok(out)
}

fn cmd_decay(d: &DomainArgs, m: f64, c: &Common) -> Result<Outcome, CliError> {
    let mut cfg = config("decay", d, c);
    cfg.m = Some(m);
    let space = space_for(&cfg)?;
    let dp = DecayProblem::new(&space)?;
    let r = dp.minimize(m, &DecayOptions::default(), &[])?;
    let mut out = Outcome::default();
    let q = decay_quotient(&space, &r.u, m);
    out.checks.push(check("rayleigh_consistency", (q / r.lambda_m - 1.0).abs() <= 1e-10, format!("Q(u) = {q}")));
    out.checks.push(check(
        "below_dirichlet",
        r.lambda_m <= dp.dirichlet.eigenvalue + 1e-8,
        format!("λ_m = {}, λ_D = {}", r.lambda_m, dp.dirichlet.eigenvalue),
    ));
    let mut doc = envelope("decay-minimizer", &cfg);
    doc.insert("result".into(), r.to_json());
    doc.insert("kappa1".into(), dp.kappa1.eigenvalue.into());
    doc.insert("lambda_d".into(), dp.dirichlet.eigenvalue.into());
    doc.insert("checks".into(), serde_json::to_value(&out.checks).expect("checks serialize"));
    out.write_json(&c.out, "decay.json", &Value::Object(doc))?;
    let svg = line_plot("Decay minimizer on the boundary", "arclength", "u", &trace_series(&space, &r.u, "u")?, &[]);
    out.write(&c.out, "decay_trace.svg", &svg)?;
    out.summary.push(format!(
        "λ_m = {:.10} ({}), κ1 = {:.10}, vanishing measure {:.6}",
        r.lambda_m, r.method, dp.kappa1.eigenvalue, r.vanishing.measure
    ));
    Ok(out)
}

fn cmd_mesh(d: &DomainArgs, c: &Common) -> Result<Outcome, CliError> {
    let cfg = config("mesh", d, c);
    cfg.check()?;
    let mesh = cfg.mesh()?;
    let mut out = Outcome::default();
    let valid = mesh.validate();
    out.checks.push(check(
        "mesh_valid",
        valid.is_ok(),
        valid.err().map_or_else(|| "ok".into(), |e| e.to_string()),
    ));
    let mut text = Vec::new();
    write_mesh(&mesh, &mut text)?;
    out.write(&c.out, "domain.mesh", &String::from_utf8(text).expect("mesh text is utf-8"))?;
    out.write(&c.out, "mesh.svg", &mesh_plot(&mesh.vertices, &mesh.triangles))?;
    let ms = measures(&mesh);
    let mut doc = envelope("mesh", &cfg);
    doc.insert("vertices".into(), mesh.n_vertices().into());
    doc.insert("triangles".into(), mesh.triangles.len().into());
    doc.insert("boundary_edges".into(), mesh.boundary_edges.len().into());
    doc.insert("max_edge_length".into(), mesh.max_edge_length().into());
    doc.insert("measures".into(), serde_json::to_value(&ms).expect("measures serialize"));
    doc.insert("checks".into(), serde_json::to_value(&out.checks).expect("checks serialize"));
    out.write_json(&c.out, "mesh.json", &Value::Object(doc))?;
    out.summary.push(format!(
        "{} vertices, {} triangles, area {:.6}, perimeter {:.6}",
        mesh.n_vertices(),
        mesh.triangles.len(),
        ms.area,
        ms.perimeter
    ));
    Ok(out)
}
