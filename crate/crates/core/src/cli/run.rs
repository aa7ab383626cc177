//! Command dispatch and output rendering.

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use super::config::{Command, Format, JobConfig, Source};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gbdt::{self, GbdtParams};
use crate::linalg::{self, CMatrix};
use crate::propagator::SampledPotential;
use crate::weyl_direct;
use crate::weyl_inverse::{self, Realization};
use crate::spectral;

/// Rendered output of one job.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub text: String,
    /// Residual report from `--verify`, as a JSON document.
    pub verification: Option<String>,
    /// Set when a roundtrip comparison failed; the output is still complete.
    pub comparison_failed: bool,
}

fn real(x: f64) -> Result<Value> {
    if !x.is_finite() {
        return Err(Error::NonFinite("output value"));
    }
    Ok(json!(x))
}

fn complex(z: Complex64) -> Result<Value> {
    Ok(Value::Array(vec![real(z.re)?, real(z.im)?]))
}

fn matrix(m: &CMatrix) -> Result<Value> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|k| complex(m[(i, k)])).collect::<Result<Vec<_>>>().map(Value::Array))
        .collect::<Result<Vec<_>>>()
        .map(Value::Array)
}

fn object(entries: Vec<(&str, Value)>) -> Value {
    Value::Object(entries.into_iter().map(|(k, v)| (k.to_owned(), v)).collect::<Map<_, _>>())
}

fn document(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    text
}

/// Column-oriented table with a header line.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("output value"));
        }
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
        Ok(())
    }

    fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| (v + 0.0).to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn entry_columns(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(2 * rows * cols);
    for i in 1..=rows {
        for k in 1..=cols {
            out.push(format!("{prefix}_{i}_{k}_re"));
            out.push(format!("{prefix}_{i}_{k}_im"));
        }
    }
    out
}

fn entries(m: &CMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.len());
    for i in 0..m.nrows() {
        for k in 0..m.ncols() {
            out.push(m[(i, k)].re);
            out.push(m[(i, k)].im);
        }
    }
    out
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| (*s).to_owned()).collect()
}

struct Resolved {
    params: GbdtParams,
    inverse: Option<weyl_inverse::InverseSolution>,
}

fn resolve(config: &JobConfig) -> Result<Resolved> {
    match &config.source {
        Source::Gbdt(g) => Ok(Resolved {
            params: gbdt::make_gbdt(
                g.layout,
                g.alpha.clone(),
                g.sigma0.clone(),
                g.theta1.clone(),
                g.theta2.clone(),
                config.tolerances.identity,
            )?,
            inverse: None,
        }),
        Source::Realization(r) => {
            let solution = weyl_inverse::inverse_problem_detailed(r, config.tolerances.inverse())?;
            Ok(Resolved {
                params: solution.params.clone(),
                inverse: Some(solution),
            })
        }
    }
}

fn realization(config: &JobConfig) -> &Realization {
    match &config.source {
        Source::Realization(r) => r,
        Source::Gbdt(_) => unreachable!("validated: command needs a realization"),
    }
}

fn potential_table(pot: &SampledPotential) -> Result<Table> {
    let l = pot.layout();
    let mut header = columns(&["x"]);
    header.extend(entry_columns("v", l.m1, l.m2));
    let mut table = Table::new(header);
    for (x, v) in pot.xs().iter().zip(pot.vs()) {
        let mut row = vec![*x];
        row.extend(entries(v));
        table.push(row)?;
    }
    Ok(table)
}

fn potential_doc(pot: &SampledPotential) -> Result<Value> {
    Ok(object(vec![
        ("x", pot.xs().iter().map(|&x| real(x)).collect::<Result<Vec<_>>>()?.into()),
        ("v", pot.vs().iter().map(matrix).collect::<Result<Vec<_>>>()?.into()),
    ]))
}

fn params_doc(p: &GbdtParams) -> Result<Value> {
    Ok(object(vec![
        ("m1", json!(p.layout.m1)),
        ("m2", json!(p.layout.m2)),
        ("alpha", matrix(&p.alpha)?),
        ("sigma0", matrix(&p.sigma0)?),
        ("theta1", matrix(&p.theta1)?),
        ("theta2", matrix(&p.theta2)?),
    ]))
}

fn inverse_doc(sol: &weyl_inverse::InverseSolution) -> Result<Value> {
    let min_eig = sol.riccati.min_eigenvalue;
    Ok(object(vec![
        ("reduced_order", json!(sol.reduced.order())),
        (
            "riccati",
            object(vec![
                ("x", matrix(&sol.riccati.x)?),
                ("residual", real(sol.riccati.residual)?),
                ("min_eigenvalue", if min_eig.is_finite() { real(min_eig)? } else { Value::Null }),
            ]),
        ),
        (
            "admissibility",
            object(vec![
                ("max_norm_on_grid", real(sol.admissibility.max_norm)?),
                ("argmax", real(sol.admissibility.argmax)?),
                (
                    "max_pole_imag",
                    if sol.admissibility.max_pole_imag.is_finite() {
                        real(sol.admissibility.max_pole_imag)?
                    } else {
                        Value::Null
                    },
                ),
            ]),
        ),
    ]))
}

/// Residuals of the algebraic and differential invariants at a few points.
fn verification(config: &JobConfig, resolved: &Resolved) -> Result<String> {
    let p = &resolved.params;
    let xs: Vec<f64> = [0.5, 1.0, 2.0].into_iter().filter(|&x| x <= config.grid.x_max).collect();
    let mut points = Vec::new();
    for &x in &xs {
        let state = gbdt::state_at(p, x)?;
        points.push(object(vec![
            ("x", real(x)?),
            ("propagated_identity", real(gbdt::propagated_identity_residual(p, &state))?),
            ("potential_relation", real(spectral::relation_residual(p, x)?)?),
            ("derivative_identity", real(spectral::derivative_identity_residual(p, x, 1e-4)?)?),
        ]));
    }
    let theta = spectral::theta_of(p)?;
    let mut entries = vec![
        ("identity_residual", real(p.identity_residual())?),
        ("theta_identity_residual", real(theta.identity_residual)?),
        ("points", Value::Array(points)),
    ];
    if let Some(sol) = &resolved.inverse {
        entries.push(("riccati_residual", real(sol.riccati.residual)?));
        let mut worst: f64 = 0.0;
        for z in [Complex64::new(0.0, 1.0), Complex64::new(1.0, 2.0), Complex64::new(-2.0, 0.5)] {
            let d = weyl_inverse::weyl_closed_form(p, z)? - weyl_inverse::eval_transfer(&sol.reduced, z)?;
            worst = worst.max(linalg::norm2(&d));
        }
        entries.push(("closed_form_round_trip", real(worst)?));
    }
    Ok(document(&object(entries)))
}

fn estimates_table(config: &JobConfig, estimates: &[weyl_direct::WeylEstimate], m1: usize, m2: usize) -> Result<String> {
    let mut header = columns(&["re_z", "im_z"]);
    header.extend(entry_columns("phi", m2, m1));
    header.extend(columns(&["radius_bound", "ball_radius", "discretization_error", "x_used"]));
    let mut table = Table::new(header);
    for (z, e) in config.z_points.iter().zip(estimates) {
        let mut row = vec![z.re, z.im];
        row.extend(entries(&e.phi));
        row.extend([e.radius_bound, e.ball_radius, e.discretization_error, e.x_used]);
        table.push(row)?;
    }
    Ok(table.render())
}

fn estimates_doc(estimates: &[weyl_direct::WeylEstimate]) -> Result<Value> {
    estimates
        .iter()
        .map(|e| {
            Ok(object(vec![
                ("z", complex(e.z)?),
                ("phi", matrix(&e.phi)?),
                ("radius_bound", real(e.radius_bound)?),
                ("ball_radius", real(e.ball_radius)?),
                ("discretization_error", real(e.discretization_error)?),
                ("x_used", real(e.x_used)?),
            ]))
        })
        .collect::<Result<Vec<_>>>()
        .map(Value::Array)
}

/// Runs `command` on a validated config.
pub fn run(config: &JobConfig, command: Command, format: Format, verify: bool, exec: Execution) -> Result<RunOutput> {
    let grid = config.grid;
    let mut comparison_failed = false;
    let mut verification_text = None;
    let text = match command {
        Command::GenPotential => {
            let resolved = resolve(config)?;
            let pot = gbdt::sample_potential(&resolved.params, grid.x_max, grid.step)?;
            if verify {
                verification_text = Some(verification(config, &resolved)?);
            }
            match format {
                Format::Csv => potential_table(&pot)?.render(),
                Format::Doc => document(&potential_doc(&pot)?),
            }
        }
        Command::WeylEval => {
            let resolved = resolve(config)?;
            let l = resolved.params.layout;
            let values = exec.try_map(&config.z_points, |&z| weyl_inverse::weyl_closed_form(&resolved.params, z))?;
            match format {
                Format::Csv => {
                    let mut header = columns(&["re_z", "im_z"]);
                    header.extend(entry_columns("phi", l.m2, l.m1));
                    let mut table = Table::new(header);
                    for (z, phi) in config.z_points.iter().zip(&values) {
                        let mut row = vec![z.re, z.im];
                        row.extend(entries(phi));
                        table.push(row)?;
                    }
                    table.render()
                }
                Format::Doc => {
                    let records = config
                        .z_points
                        .iter()
                        .zip(&values)
                        .map(|(&z, phi)| Ok(object(vec![("z", complex(z)?), ("phi", matrix(phi)?)])))
                        .collect::<Result<Vec<_>>>()?;
                    document(&Value::Array(records))
                }
            }
        }
        Command::DirectSolve => {
            let resolved = resolve(config)?;
            let l = resolved.params.layout;
            let pot = gbdt::sample_potential(&resolved.params, grid.x_max, grid.step)?;
            let estimates = weyl_direct::estimate_weyl_grid(&pot, &config.z_points, grid.x_max, exec)?;
            match format {
                Format::Csv => estimates_table(config, &estimates, l.m1, l.m2)?,
                Format::Doc => document(&estimates_doc(&estimates)?),
            }
        }
        Command::Inverse => {
            let resolved = resolve(config)?;
            let sol = resolved.inverse.as_ref().expect("realization source");
            let pot = gbdt::sample_potential(&resolved.params, grid.x_max, grid.step)?;
            if verify {
                verification_text = Some(verification(config, &resolved)?);
            }
            match format {
                Format::Csv => potential_table(&pot)?.render(),
                Format::Doc => {
                    let Value::Object(mut doc) = inverse_doc(sol)? else {
                        unreachable!()
                    };
                    doc.insert("params".into(), params_doc(&resolved.params)?);
                    doc.insert("potential".into(), potential_doc(&pot)?);
                    document(&Value::Object(doc))
                }
            }
        }
        Command::Roundtrip => {
            let r = realization(config);
            let resolved = resolve(config)?;
            let l = resolved.params.layout;
            let pot = gbdt::sample_potential(&resolved.params, grid.x_max, grid.step)?;
            let estimates = weyl_direct::estimate_weyl_grid(&pot, &config.z_points, grid.x_max, exec)?;
            let slack = config.tolerances.roundtrip_slack;
            let mut records = Vec::new();
            for e in &estimates {
                let exact = weyl_inverse::eval_transfer(r, e.z)?;
                let deviation = linalg::norm2(&(&e.phi - &exact));
                let pass = deviation <= e.radius_bound + slack;
                comparison_failed |= !pass;
                records.push((e, exact, deviation, pass));
            }
            match format {
                Format::Csv => {
                    let mut header = columns(&["re_z", "im_z"]);
                    header.extend(entry_columns("phi_exact", l.m2, l.m1));
                    header.extend(entry_columns("phi_est", l.m2, l.m1));
                    header.extend(columns(&["deviation", "radius_bound", "pass"]));
                    let mut table = Table::new(header);
                    for (e, exact, deviation, pass) in &records {
                        let mut row = vec![e.z.re, e.z.im];
                        row.extend(entries(exact));
                        row.extend(entries(&e.phi));
                        row.extend([*deviation, e.radius_bound, if *pass { 1.0 } else { 0.0 }]);
                        table.push(row)?;
                    }
                    table.render()
                }
                Format::Doc => {
                    let rows = records
                        .iter()
                        .map(|(e, exact, deviation, pass)| {
                            Ok(object(vec![
                                ("z", complex(e.z)?),
                                ("phi_exact", matrix(exact)?),
                                ("phi_est", matrix(&e.phi)?),
                                ("deviation", real(*deviation)?),
                                ("radius_bound", real(e.radius_bound)?),
                                ("pass", Value::Bool(*pass)),
                            ]))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    document(&Value::Array(rows))
                }
            }
        }
        Command::BoundStates => {
            let resolved = resolve(config)?;
            let p = &resolved.params;
            let spectrum = spectral::spectrum_check(p, None)?;
            let states = spectral::bound_states(p, grid.x_max, grid.step, config.tolerances.real_eigenvalue)?;
            match format {
                Format::Csv => {
                    let mut header = columns(&["x"]);
                    for s in 1..=states.len() {
                        header.extend(entry_columns(&format!("g{s}"), p.layout.m(), 1));
                    }
                    let mut table = Table::new(header);
                    let len = gbdt::grid_len(grid.x_max, grid.step)?;
                    for k in 0..len {
                        let mut row = vec![k as f64 * grid.step];
                        for s in &states {
                            row.extend(entries(&s.g_samples[k]));
                        }
                        table.push(row)?;
                    }
                    table.render()
                }
                Format::Doc => {
                    let list = states
                        .iter()
                        .map(|s| {
                            Ok(object(vec![
                                ("lambda", real(s.lambda)?),
                                ("f", matrix(&s.f)?),
                                ("g0_norm", real(s.g0_norm)?),
                                ("sup_norm", real(s.sup_norm())?),
                                ("ode_residual", real(s.ode_residual)?),
                                ("consequence_residual", real(s.consequence_residual)?),
                                ("l2_norm_estimate", real(s.l2_norm_estimate)?),
                                ("tail_estimate", real(s.tail_estimate)?),
                                ("tail_scale", real(s.tail_scale)?),
                                ("x", s.xs.iter().map(|&x| real(x)).collect::<Result<Vec<_>>>()?.into()),
                                ("g", s.g_samples.iter().map(matrix).collect::<Result<Vec<_>>>()?.into()),
                            ]))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    document(&object(vec![
                        (
                            "theta_eigenvalues",
                            spectrum.eigenvalues.iter().map(|&z| complex(z)).collect::<Result<Vec<_>>>()?.into(),
                        ),
                        ("spectrum_ok", Value::Bool(spectrum.ok)),
                        ("states", Value::Array(list)),
                    ]))
                }
            }
        }
    };
    Ok(RunOutput {
        text,
        verification: verification_text,
        comparison_failed,
    })
}
