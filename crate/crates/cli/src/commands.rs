use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use cvepr_core::report::{
    estimates_table, fmt_num, params_field, reports_table, write_estimates_csv, write_reports_csv,
    REPORT_HEADER,
};
use cvepr_core::{
    any_g_product_criterion, any_violation, check_uncertainty_proviso, compare_with_source,
    estimate_criteria, evaluate_all, lhv_record, linear_product_criterion, load_state_spec,
    optimal_gain, ppt_diagnostic, reid_epr_criterion, run_experiment, wigner_sample,
    CriteriaConfig, CriterionReport, EstimateOptions, FockDensityMatrix, GaussianState, GridSpec,
    Method, PptDiagnostic, QuadraturePair, ResponseModel, State, UncertaintyBounds,
};

use crate::{BoundArgs, Command, Format, GridArgs, OutputArgs};

/// PPT tolerance for the entangled/separable verdict.
const PPT_TOL: f64 = 1e-9;

/// Runs one subcommand; `Ok(true)` means a violation was found.
pub fn run(command: Command) -> Result<bool> {
    match command {
        Command::Describe { common } => {
            let state = load(&common.state)?;
            emit(&common.output, &describe(&state, common.output.format)?)?;
            Ok(false)
        }
        Command::Criteria {
            common,
            bounds,
            gains,
        } => {
            let state = load(&common.state)?;
            let cfg = config(&common.grid, &bounds)?;
            let reports = evaluate_all(&state, &gains.values(), &cfg)?;
            let text = match common.output.format {
                Format::Csv => reports_csv(&reports)?,
                Format::Table => {
                    let mut t = reports_table(&reports);
                    match ppt_diagnostic(&state) {
                        Ok(d) => writeln!(t, "{}", ppt_line(&d))?,
                        Err(e) => writeln!(t, "ppt: skipped ({e})")?,
                    }
                    t
                }
            };
            emit(&common.output, &text)?;
            Ok(any_violation(&reports))
        }
        Command::Sweep {
            r_range,
            cutoff,
            state,
            gains,
            grid,
            bounds,
            output,
        } => {
            let cfg = config(&grid, &bounds)?;
            let rows = match (r_range, state) {
                (Some(r), _) => {
                    let gains = gains.map(|g| g.values()).unwrap_or_else(|| vec![1.0]);
                    sweep_r(&r.values(), cutoff, &gains, &cfg)?
                }
                (None, Some(path)) => {
                    let Some(gains) = gains else {
                        bail!("a gain sweep needs --gains start:stop:step");
                    };
                    sweep_g(&load(&path)?, &gains.values(), &cfg)?
                }
                (None, None) => unreachable!("clap requires --r-range or --state"),
            };
            emit(&output, &sweep_text(&rows, output.format))?;
            Ok(false)
        }
        Command::Experiment {
            common,
            bounds,
            shots,
            seed,
            records,
        } => {
            let state = load(&common.state)?;
            let grid = grid_spec(&common.grid)?;
            let n = shots as usize;
            let x = run_experiment(&state, 0.0, 0.0, n, seed, &grid)?;
            let p = run_experiment(&state, FRAC_PI_2, FRAC_PI_2, n, seed.wrapping_add(1), &grid)?;
            if let Some(dir) = records {
                fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                x.write_csv(fs::File::create(dir.join("x_record.csv"))?)?;
                p.write_csv(fs::File::create(dir.join("p_record.csv"))?)?;
            }
            let opts = EstimateOptions {
                bounds: bound_args(&bounds)?,
                seed: seed.wrapping_add(2),
                ..EstimateOptions::default()
            };
            let summary = estimate_criteria(&x, &p, &opts)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            let text = match common.output.format {
                Format::Csv => estimates_csv(&summary.estimates)?,
                Format::Table => format!(
                    "{} shots per setting, seed {seed}\n{}",
                    shots,
                    estimates_table(&summary.estimates)
                ),
            };
            emit(&common.output, &text)?;
            Ok(summary.estimates.iter().any(|e| e.report.violated))
        }
        Command::Lhv {
            common,
            bounds,
            shots,
            seed,
            smear,
            ensemble,
        } => {
            let state = load(&common.state)?;
            let bounds = bound_args(&bounds)?;
            let model = match smear {
                None => ResponseModel::DispersionFree,
                Some(s) if s > 0.0 && s.is_finite() => ResponseModel::Smeared {
                    sigma_x: s,
                    sigma_p: s,
                },
                Some(s) => bail!("--smear must be positive, got {s}"),
            };
            let e = wigner_sample(&state, shots as usize, seed)?;
            if let Some(path) = ensemble {
                e.write_csv(
                    fs::File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?,
                )?;
            }
            let proviso = check_uncertainty_proviso(&e, model, &bounds);
            let check = compare_with_source(&e, model, &state);
            let x = lhv_record(&e, 0.0, 0.0, model, seed.wrapping_add(1))?;
            let p = lhv_record(&e, FRAC_PI_2, FRAC_PI_2, model, seed.wrapping_add(2))?;
            let opts = EstimateOptions {
                bounds,
                seed: seed.wrapping_add(3),
                ..EstimateOptions::default()
            };
            let summary = estimate_criteria(&x, &p, &opts)?;
            let mut head = String::new();
            writeln!(head, "source: {}", e.source())?;
            writeln!(head, "proviso: {}", proviso.summary())?;
            writeln!(
                head,
                "marginal variances (x_A, p_A, x_B, p_B): model [{}], quantum [{}]{}",
                short(&check.model_variances),
                short(&check.quantum_variances),
                if check.inflated { " [inflated]" } else { "" }
            )?;
            for w in &summary.warnings {
                writeln!(head, "warning: {w}")?;
            }
            let text = match common.output.format {
                Format::Csv => {
                    eprint!("{head}");
                    estimates_csv(&summary.estimates)?
                }
                Format::Table => format!("{head}{}", estimates_table(&summary.estimates)),
            };
            emit(&common.output, &text)?;
            Ok(summary.estimates.iter().any(|e| e.report.violated))
        }
    }
}

fn short(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn load(path: &Path) -> Result<State> {
    load_state_spec(path).with_context(|| format!("state spec {}", path.display()))
}

fn grid_spec(g: &GridArgs) -> Result<GridSpec> {
    Ok(GridSpec::new(g.grid_points as usize, g.grid_sigmas)?)
}

fn bound_args(b: &BoundArgs) -> Result<UncertaintyBounds> {
    Ok(UncertaintyBounds::new(b.c, b.d)?)
}

fn config(g: &GridArgs, b: &BoundArgs) -> Result<CriteriaConfig> {
    Ok(CriteriaConfig {
        bounds: bound_args(b)?,
        grid: grid_spec(g)?,
    })
}

fn emit(output: &OutputArgs, text: &str) -> Result<()> {
    match &output.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn reports_csv(reports: &[CriterionReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_reports_csv(&mut buf, reports)?;
    Ok(String::from_utf8(buf)?)
}

fn estimates_csv(estimates: &[cvepr_core::CriterionEstimate]) -> Result<String> {
    let mut buf = Vec::new();
    write_estimates_csv(&mut buf, estimates)?;
    Ok(String::from_utf8(buf)?)
}

fn ppt_line(d: &PptDiagnostic) -> String {
    let verdict = if d.entangled(PPT_TOL) {
        "entangled"
    } else {
        "PPT (consistent with separability)"
    };
    match d {
        PptDiagnostic::Fock { min_eigenvalue } => format!(
            "ppt: min eigenvalue of partial transpose = {} ({verdict})",
            fmt_num(*min_eigenvalue)
        ),
        PptDiagnostic::Gaussian { min_symplectic } => format!(
            "ppt: min symplectic eigenvalue of partial transpose = {} ({verdict})",
            fmt_num(*min_symplectic)
        ),
    }
}

fn describe(state: &State, format: Format) -> Result<String> {
    let m = state.moments();
    let mut rows: Vec<(String, f64)> = Vec::new();
    for i in 0..4 {
        rows.push((format!("mean_{i}"), m.mean()[i]));
    }
    for i in 0..4 {
        for j in 0..4 {
            rows.push((format!("cov_{i}{j}"), m.cov()[(i, j)]));
        }
    }
    rows.push((
        "uncertainty_min_eigenvalue".into(),
        m.uncertainty_min_eigenvalue(),
    ));
    let mut extra = Vec::new();
    match state {
        State::Fock(f) => {
            rows.push(("dim_a".into(), f.dim_a() as f64));
            rows.push(("dim_b".into(), f.dim_b() as f64));
            rows.push(("trace".into(), f.trace()));
            rows.push(("min_eigenvalue".into(), f.min_eigenvalue()));
        }
        State::Mixture(mix) => rows.push(("terms".into(), mix.terms().len() as f64)),
        State::Gaussian(_) => {}
    }
    match ppt_diagnostic(state) {
        Ok(d @ PptDiagnostic::Fock { min_eigenvalue }) => {
            rows.push(("ppt_min_eigenvalue".into(), min_eigenvalue));
            extra.push(ppt_line(&d));
        }
        Ok(d @ PptDiagnostic::Gaussian { min_symplectic }) => {
            rows.push(("ppt_min_symplectic".into(), min_symplectic));
            extra.push(ppt_line(&d));
        }
        Err(e) => extra.push(format!("ppt: skipped ({e})")),
    }

    let mut out = String::new();
    match format {
        Format::Csv => {
            writeln!(out, "quantity,value")?;
            writeln!(out, "kind,{}", state.kind())?;
            for (k, v) in rows {
                writeln!(out, "{k},{}", fmt_num(v))?;
            }
        }
        Format::Table => {
            writeln!(out, "representation: {}", state.kind())?;
            match state {
                State::Fock(f) => writeln!(
                    out,
                    "dims: {} x {}, trace {:.12}, min eigenvalue {}",
                    f.dim_a(),
                    f.dim_b(),
                    f.trace(),
                    fmt_num(f.min_eigenvalue())
                )?,
                State::Mixture(mix) => {
                    writeln!(out, "terms: {}", mix.terms().len())?;
                    for (k, t) in mix.terms().iter().enumerate() {
                        writeln!(out, "  term {k}: weight {:.6}", t.weight)?;
                    }
                }
                State::Gaussian(_) => {}
            }
            let v = m.mean();
            writeln!(
                out,
                "mean (x_A, p_A, x_B, p_B): [{:.6}, {:.6}, {:.6}, {:.6}]",
                v[0], v[1], v[2], v[3]
            )?;
            writeln!(out, "covariance:")?;
            for i in 0..4 {
                let row: Vec<String> = (0..4)
                    .map(|j| format!("{:>12.6}", m.cov()[(i, j)]))
                    .collect();
                writeln!(out, "  {}", row.join(" "))?;
            }
            let min = m.uncertainty_min_eigenvalue();
            writeln!(
                out,
                "physicality: min eigenvalue of cov + iΩ = {} ({})",
                fmt_num(min),
                if min >= -1e-9 {
                    "physical"
                } else {
                    "unphysical"
                }
            )?;
            for line in extra {
                writeln!(out, "{line}")?;
            }
        }
    }
    Ok(out)
}

struct SweepRow {
    param: &'static str,
    value: f64,
    report: CriterionReport,
}

fn sort_key(r: &CriterionReport) -> (cvepr_core::CriterionKind, String, String) {
    (r.kind, r.method.to_string(), params_field(&r.params))
}

fn sweep_r(
    rs: &[f64],
    cutoff: Option<usize>,
    gains: &[f64],
    cfg: &CriteriaConfig,
) -> Result<Vec<SweepRow>> {
    let blocks = rs
        .par_iter()
        .map(|&r| -> Result<Vec<SweepRow>> {
            let state = match cutoff {
                Some(c) => State::Fock(FockDensityMatrix::two_mode_squeezed_vacuum(r, c)?),
                None => State::Gaussian(GaussianState::two_mode_squeezed_vacuum(r)?),
            };
            let mut reports = evaluate_all(&state, gains, cfg)?;
            reports.sort_by_key(sort_key);
            Ok(reports
                .into_iter()
                .map(|report| SweepRow {
                    param: "r",
                    value: r,
                    report,
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

/// Per gain `g`: Reid product with gains `(g, h*)`, the linear product at
/// `(g, h*)` and the common-gain product at `g`.
fn sweep_g(state: &State, gains: &[f64], cfg: &CriteriaConfig) -> Result<Vec<SweepRow>> {
    let h = optimal_gain(state, QuadraturePair::P)?;
    let blocks = gains
        .par_iter()
        .map(|&g| -> Result<Vec<SweepRow>> {
            let reports = vec![
                reid_epr_criterion(state, Method::Linear, Some((g, h)), cfg)?,
                linear_product_criterion(state, g, h, cfg)?,
                any_g_product_criterion(state, g, cfg)?,
            ];
            Ok(reports
                .into_iter()
                .map(|report| SweepRow {
                    param: "g",
                    value: g,
                    report,
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

fn sweep_text(rows: &[SweepRow], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = format!("param,value,{REPORT_HEADER}\n");
            for row in rows {
                let r = &row.report;
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    row.param,
                    fmt_num(row.value),
                    r.kind,
                    fmt_num(r.lhs),
                    fmt_num(r.bound),
                    fmt_num(r.margin()),
                    params_field(&r.params),
                    r.method,
                    r.convergence_delta.map(fmt_num).unwrap_or_default(),
                    r.violated
                ));
            }
            out
        }
        Format::Table => {
            let mut out = String::new();
            let mut start = 0;
            while start < rows.len() {
                let value = rows[start].value;
                let end = rows[start..]
                    .iter()
                    .position(|r| r.value != value)
                    .map_or(rows.len(), |k| start + k);
                let block: Vec<CriterionReport> =
                    rows[start..end].iter().map(|r| r.report.clone()).collect();
                out.push_str(&format!("{} = {value}\n", rows[start].param));
                out.push_str(&reports_table(&block));
                out.push('\n');
                start = end;
            }
            out
        }
    }
}
