//! The analysis subcommands. Each writes its report with a leading
//! comment line carrying the version, grid spacing and tolerances.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::Deserialize;

use qvalued::blowup::{decay_report, DecayFit, DecayOptions, FitOptions, FitTarget, EXACT_EXCESS};
use qvalued::cylindrical::GeneratorRecord;
use qvalued::field::{read_qfld, sample_field, write_qfld, Grid, ShellRule};
use qvalued::frequency::{self as freq, profile, Quantity, MONOTONE_TOL};
use qvalued::minimizer::{self as solver, ball_mask, box_mask, log_csv, SolveParams};
use qvalued::QField;

use crate::config::RunConfig;
use crate::{CmdResult, Failure, VERSION};

pub fn header(h: f64, tolerances: &str) -> String {
    format!("# qval {VERSION} h={h:e} {tolerances}")
}

pub fn read_field(path: &Path) -> anyhow::Result<QField> {
    let f = File::open(path).with_context(|| format!("opening field {}", path.display()))?;
    read_qfld(BufReader::new(f)).with_context(|| format!("reading field {}", path.display()))
}

pub fn write_field(u: &QField, path: &Path) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    write_qfld(u, &mut w)?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_generator(path: &Path) -> anyhow::Result<GeneratorRecord> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading spec {}", path.display()))?;
    GeneratorRecord::from_toml(&text).with_context(|| format!("parsing spec {}", path.display()))
}

fn grid_of(cfg: &RunConfig) -> anyhow::Result<Grid> {
    Ok(Grid::cube(cfg.dim, cfg.half, cfg.cells)?)
}

fn describe(u: &QField) -> String {
    let dims: Vec<String> = u.grid().dims().iter().map(|d| d.to_string()).collect();
    format!("n={} q={} m={} dims={}", u.n(), u.q(), u.m(), dims.join("x"))
}

pub fn generate(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let spec = load_generator(cfg.field.as_ref().expect("spec path"))?;
    let eval = spec.build()?;
    let u = sample_field(eval.as_ref(), &grid_of(cfg)?)?;
    let path = cfg.out.as_ref().expect("output path");
    write_field(&u, path)?;
    writeln!(out, "{}", header(u.grid().h(), "tol=none")).map_err(Failure::usage)?;
    writeln!(out, "wrote {} {}", path.display(), describe(&u)).map_err(Failure::usage)?;
    Ok(())
}

pub fn frequency_cmd_radii(cfg: &RunConfig) -> Vec<f64> {
    cfg.radii.clone().unwrap_or_else(|| (0..9).map(|i| 0.1 + 0.05 * i as f64).collect())
}

pub fn frequency_report(cfg: &RunConfig, u: &QField) -> Result<String, Failure> {
    let center = cfg.center_or_origin(u.n())?;
    let radii = frequency_cmd_radii(cfg);
    let rule = ShellRule::default_for(u.n())?;
    let alpha = match cfg.alpha {
        Some(a) => a,
        None => freq::frequency(u, &center, radii[0], &rule)?,
    };
    let p = profile(u, &center, &radii, alpha, &rule)?;
    let mut s = header(u.grid().h(), &format!("monotone_tol={MONOTONE_TOL} alpha={alpha}"));
    s.push('\n');
    s.push_str(&p.to_csv());
    let violations = p.check_monotone(MONOTONE_TOL);
    if violations.is_empty() {
        s.push_str("# monotone: ok\n");
    }
    for v in violations {
        let name = match v.quantity {
            Quantity::Frequency => "N",
            Quantity::Weiss => "W",
        };
        s.push_str(&format!("# monotone: {name} drops by {:e} between rho={} and rho={}\n", v.drop, radii[v.index], radii[v.index + 1]));
    }
    Ok(s)
}

pub fn frequency(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let u = read_field(cfg.field.as_ref().expect("field path"))?;
    let report = frequency_report(cfg, &u)?;
    match &cfg.out {
        Some(p) => write_text(p, &report)?,
        None => out.write_all(report.as_bytes()).map_err(Failure::usage)?,
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Fix the nodes on the boundary of the grid box.
    #[default]
    Box,
    /// Fix every node outside the open ball.
    Ball,
}

/// Boundary description for `minimize`: the data come from an analytic
/// generator sampled on the configured grid, or from a QFLD1 file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    #[serde(default)]
    pub domain: Domain,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default = "unit")]
    pub radius: f64,
    /// QFLD1 file, resolved relative to the spec file.
    #[serde(default)]
    pub field: Option<PathBuf>,
    #[serde(default)]
    pub generator: Option<GeneratorRecord>,
    /// Replace `solve.relaxation` by the optimal SOR factor for the grid.
    #[serde(default)]
    pub auto_relaxation: bool,
    #[serde(default)]
    pub solve: SolveParams,
}

fn unit() -> f64 {
    1.0
}

impl BoundarySpec {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading boundary spec {}", path.display()))?;
        let mut spec: BoundarySpec =
            toml::from_str(&text).with_context(|| format!("parsing boundary spec {}", path.display()))?;
        if let Some(f) = &spec.field {
            if f.is_relative() {
                spec.field = Some(path.parent().unwrap_or(Path::new(".")).join(f));
            }
        }
        Ok(spec)
    }

    /// Boundary data on the grid, with interior nodes set to `q` copies of
    /// the origin, and the fixed-node mask.
    pub fn initial(&self, cfg: &RunConfig) -> anyhow::Result<(QField, Vec<bool>)> {
        let data = match (&self.field, &self.generator) {
            (Some(p), None) => read_field(p)?,
            (None, Some(g)) => sample_field(g.build()?.as_ref(), &grid_of(cfg)?)?,
            _ => bail!("boundary spec needs exactly one of `field` and `generator`"),
        };
        let grid = data.grid().clone();
        let fixed = match self.domain {
            Domain::Box => box_mask(&grid),
            Domain::Ball => {
                let c = self.center.clone().unwrap_or_else(|| vec![0.0; grid.n()]);
                if c.len() != grid.n() {
                    bail!("ball center has {} coordinates, grid has n = {}", c.len(), grid.n());
                }
                grid.check_ball(&c, self.radius)?;
                ball_mask(&grid, &c, self.radius)
            }
        };
        let mut init = data;
        for (i, &f) in fixed.iter().enumerate() {
            if !f {
                init.value_mut(i).fill(0.0);
            }
        }
        Ok((init, fixed))
    }
}

pub fn minimize_cmd(cfg: &RunConfig, log: Option<&Path>) -> Result<(QField, String, String), Failure> {
    let spec = BoundarySpec::load(cfg.field.as_ref().expect("boundary path"))?;
    let (init, fixed) = spec.initial(cfg)?;
    let mut params = spec.solve.clone();
    if let Some(s) = cfg.seed {
        params.seed = s;
    }
    if spec.auto_relaxation {
        let cells = init.grid().dims().iter().max().unwrap() - 1;
        params.relaxation = SolveParams::optimal_relaxation(cells);
    }
    let sol = solver::minimize(&init, &fixed, &params)?;
    let head = header(
        init.grid().h(),
        &format!("energy_tol={:e} delta_tol={:e} relaxation={} seed={}", params.energy_tol, params.delta_tol, params.relaxation, params.seed),
    );
    let summary = format!(
        "{head}\nenergy={:e} best_restart={} sweeps={}\n",
        sol.energy,
        sol.best_restart,
        sol.log.len()
    );
    let log_text = format!("{head}\n{}", log_csv(&sol.log));
    if let Some(p) = log {
        write_text(p, &log_text)?;
    }
    Ok((sol.field, summary, log_text))
}

pub fn minimize(cfg: &RunConfig, log: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    let (field, summary, _) = minimize_cmd(cfg, log)?;
    write_field(&field, cfg.out.as_ref().expect("output path"))?;
    out.write_all(summary.as_bytes()).map_err(Failure::usage)?;
    Ok(())
}

/// The degree `k0/q0` (q0 <= min(q, 3), coprime, k0 <= 12) nearest to `n`.
pub fn nearest_degree(n: f64, q: usize) -> (usize, usize) {
    let mut best = (1, 1, f64::INFINITY);
    for q0 in 1..=q.min(3) {
        for k0 in 1..=12 {
            if gcd(k0, q0) != 1 {
                continue;
            }
            let d = (k0 as f64 / q0 as f64 - n).abs();
            if d < best.2 - 1e-12 {
                best = (k0, q0, d);
            }
        }
    }
    (best.0, best.1)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Decay report as (structured text, CSV, one-line summary).
pub fn decay_outputs(cfg: &RunConfig, u: &QField) -> Result<(String, String, String), Failure> {
    let center = cfg.center_or_origin(u.n())?;
    let (k0, q0) = match (cfg.k0, cfg.q0) {
        (Some(k0), Some(q0)) => (k0, q0),
        (None, None) => {
            let rule = ShellRule::default_for(u.n())?;
            let rho = cfg.rho0 * cfg.theta.powi(cfg.scales as i32);
            nearest_degree(freq::frequency(u, &center, rho, &rule)?, u.q())
        }
        _ => return Err(Failure::usage(anyhow!("give both --k0 and --q0, or neither"))),
    };
    let fit = FitOptions::default();
    let opts = DecayOptions {
        rho0: cfg.rho0,
        theta: cfg.theta,
        scales: cfg.scales,
        target: FitTarget::Degree { k0, q0 },
        fit: fit.clone(),
    };
    let rep = decay_report(u, &center, &opts)?;
    let head = header(
        u.grid().h(),
        &format!("exact_excess={EXACT_EXCESS:e} fit_max_iter={} k0={k0} q0={q0}", fit.max_iter),
    );
    let summary = match rep.fit {
        DecayFit::ExactTangent => "exact tangent".to_string(),
        DecayFit::Insufficient => "insufficient scales for a fit".to_string(),
        DecayFit::Fitted { mu, residual, points, .. } => format!("mu={mu} residual={residual:e} points={points}"),
    };
    Ok((format!("{head}\n{}", rep.to_text()), format!("{head}\n{}", rep.to_csv()), format!("{head}\n{summary}\n")))
}

pub fn decay(cfg: &RunConfig, csv: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    let u = read_field(cfg.field.as_ref().expect("field path"))?;
    let (text, table, summary) = decay_outputs(cfg, &u)?;
    if let Some(p) = csv {
        write_text(p, &table)?;
    }
    match &cfg.out {
        Some(p) => {
            write_text(p, &text)?;
            out.write_all(summary.as_bytes()).map_err(Failure::usage)?;
        }
        None => out.write_all(text.as_bytes()).map_err(Failure::usage)?,
    }
    Ok(())
}
