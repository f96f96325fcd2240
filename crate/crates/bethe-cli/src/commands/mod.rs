//! Subcommand implementations: each builds its estimator inputs from the
//! config, runs the library, and emits fixed-schema CSVs plus the manifest.

mod verify;

pub use verify::run_verify;

use crate::config::{ConfigError, RunConfig};
use crate::outputs::{fmt_bool, fmt_f64, RunWriter};
use crate::CliError;
use bethe::disorder::DisorderModel;
use bethe::greens::{edge_ambiguous, ComplexEnergy};
use bethe::phase::{
    classify_point, edge_analysis, free_lyapunov, scan_phase_diagram, spectrum_interval, Budgets,
    SpectrumSet,
};
use bethe::population::{
    estimate_dos, estimate_free_energy, legendre_rate, lyapunov_boundary, pool_equilibrate,
    FreeEnergyCurve,
};
use bethe::resonance::{count_resonances, LdParameters, ResonanceConfig};
use bethe::seed::RealizationSeed;

pub fn budgets(config: &RunConfig) -> Result<Budgets, ConfigError> {
    Ok(Budgets {
        pool_size: config.usize("pool")?,
        sweeps: config.usize("sweeps")?,
        chains: config.usize("chains")?,
        chain_len: config.usize("n")?,
        etas: config.f64_list("etas")?,
        s_grid: config.f64_list("s_grid")?,
    })
}

fn require_model(config: &RunConfig) -> Result<DisorderModel, CliError> {
    config
        .model()?
        .ok_or_else(|| CliError::Usage("this subcommand needs a disorder model (dist != none)".into()))
}

pub fn run_spectrum(config: &RunConfig) -> Result<i32, CliError> {
    let mut writer = RunWriter::new(config)?;
    let k = config.u32("K")?;
    let (dist, row) = match config.model()? {
        None => {
            let edge = 2.0 * (k as f64).sqrt();
            ("none".to_string(), ("interval".to_string(), fmt_f64(-edge), fmt_f64(edge)))
        }
        Some(model) => {
            let set = spectrum_interval(&model, k);
            let row = match set {
                SpectrumSet::FullLine => ("full_line".to_string(), String::new(), String::new()),
                SpectrumSet::Interval { lo, hi } => ("interval".to_string(), fmt_f64(lo), fmt_f64(hi)),
            };
            (config.get("dist").to_string(), row)
        }
    };
    let rows = vec![vec![
        k.to_string(),
        fmt_f64(config.f64("lambda")?),
        dist,
        row.0,
        row.1,
        row.2,
    ]];
    writer.csv("spectrum.csv", &["K", "lambda", "dist", "support", "lo", "hi"], &rows)?;
    writer.finish()?;
    Ok(0)
}

pub fn run_lyapunov(config: &RunConfig) -> Result<i32, CliError> {
    let mut writer = RunWriter::new(config)?;
    let k = config.u32("K")?;
    let e_grid = config.grid("E")?;
    let lambda = config.f64("lambda")?;
    let mut rows = Vec::new();
    match config.model()? {
        None => {
            for &e in &e_grid {
                if edge_ambiguous(k, e) {
                    writer.warn(format!("E = {e} within 1e-6 of the band edge: branch ambiguous"));
                }
                rows.push(vec![
                    fmt_f64(e),
                    fmt_f64(0.0),
                    fmt_f64(0.0),
                    fmt_f64(free_lyapunov(k, e)),
                    fmt_f64(0.0),
                ]);
            }
        }
        Some(model) => {
            let etas = config.f64_list("etas")?;
            let pool = config.usize("pool")?;
            let sweeps = config.usize("sweeps")?;
            let master = config.u64("seed")?;
            for (ie, &e) in e_grid.iter().enumerate() {
                let seed = RealizationSeed::with_path(master, &[ie as u64]);
                writer.task_stream(format!("E={e}"), &seed.stream_path);
                let lb = lyapunov_boundary(&model, k, e, &etas, pool, sweeps, &seed);
                if !lb.converged {
                    writer.warn(format!("E = {e}: smallest-eta values not stabilized"));
                }
                if !lb.equilibrated {
                    writer.warn(format!("E = {e}: pool drift above 1e-3"));
                }
                for row in &lb.per_eta {
                    rows.push(vec![
                        fmt_f64(e),
                        fmt_f64(lambda),
                        fmt_f64(row.eta),
                        fmt_f64(row.l),
                        fmt_f64(row.stderr),
                    ]);
                }
            }
        }
    }
    writer.csv("lyapunov.csv", &["E", "lambda", "eta", "L", "stderr"], &rows)?;
    writer.finish()?;
    Ok(0)
}

fn fit_curve(
    config: &RunConfig,
    model: &DisorderModel,
    writer: &mut RunWriter,
) -> Result<FreeEnergyCurve, CliError> {
    let k = config.u32("K")?;
    let e = config.grid("E")?[0];
    let eta = config.f64("eta")?;
    let seed = RealizationSeed::with_path(config.u64("seed")?, &[0]);
    writer.task_stream("curve", &seed.stream_path);
    let pool = pool_equilibrate(
        model,
        k,
        ComplexEnergy::new(e, eta),
        config.usize("pool")?,
        config.usize("sweeps")?,
        &seed,
    );
    if !pool.equilibrated {
        writer.warn("pool drift above 1e-3".to_string());
    }
    let s_grid: Vec<f64> = config
        .f64_list("s_grid")?
        .into_iter()
        .filter(|&s| s >= -model.moment_exponent)
        .collect();
    Ok(estimate_free_energy(
        &pool,
        model,
        &s_grid,
        config.usize("n")?,
        config.usize("chains")?,
        &seed.child(1),
    ))
}

pub fn run_free_energy(config: &RunConfig) -> Result<i32, CliError> {
    let mut writer = RunWriter::new(config)?;
    let model = require_model(config)?;
    let curve = fit_curve(config, &model, &mut writer)?;
    let rows: Vec<Vec<String>> = (0..curve.s_grid.len())
        .map(|i| {
            vec![
                fmt_f64(curve.s_grid[i]),
                fmt_f64(curve.phi[i]),
                fmt_f64(curve.stderr[i]),
                curve.n.to_string(),
                fmt_f64(curve.eta),
                fmt_bool(curve.flagged[i]),
            ]
        })
        .collect();
    for (i, &f) in curve.flagged.iter().enumerate() {
        if f {
            writer.warn(format!("heavy-tail weights at s = {}", curve.s_grid[i]));
        }
    }
    writer.csv("free_energy.csv", &["s", "phi", "stderr", "n", "eta", "flagged"], &rows)?;
    writer.finish()?;
    Ok(0)
}

pub fn run_rate_function(config: &RunConfig) -> Result<i32, CliError> {
    let mut writer = RunWriter::new(config)?;
    let model = require_model(config)?;
    let curve = fit_curve(config, &model, &mut writer)?;
    let rf = legendre_rate(&curve);
    let rows: Vec<Vec<String>> = (0..rf.gamma_grid.len())
        .map(|i| {
            vec![fmt_f64(rf.gamma_grid[i]), fmt_f64(rf.rate[i]), fmt_f64(rf.s_of_gamma[i])]
        })
        .collect();
    writer.csv("rate_function.csv", &["gamma", "rate", "s_of_gamma"], &rows)?;
    writer.finish()?;
    Ok(0)
}

pub fn run_dos(config: &RunConfig) -> Result<i32, CliError> {
    let mut writer = RunWriter::new(config)?;
    let model = require_model(config)?;
    let k = config.u32("K")?;
    let e_grid = config.grid("E")?;
    let etas = config.f64_list("etas")?;
    let seed = RealizationSeed::new(config.u64("seed")?);
    let est = estimate_dos(
        &model,
        k,
        &e_grid,
        &etas,
        config.usize("pool")?,
        config.usize("sweeps")?,
        &seed,
    );
    let eta_min = etas.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut rows = Vec::new();
    for row in &est.rows {
        let converged = if row.eta == eta_min {
            let point = est.extrapolated.iter().find(|p| p.e == row.e).unwrap();
            if !point.converged {
                writer.warn(format!("E = {}: DOS not stabilized at the smallest eta", row.e));
            }
            point.converged
        } else {
            false
        };
        rows.push(vec![
            fmt_f64(row.e),
            fmt_f64(row.eta),
            fmt_f64(row.rooted),
            fmt_f64(row.full),
            fmt_f64(row.full_stderr),
            fmt_bool(converged),
        ]);
    }
    writer.csv("dos.csv", &["E", "eta", "rooted_D", "full_D", "stderr", "converged"], &rows)?;
    writer.finish()?;
    Ok(0)
}

pub fn run_phase_scan(config: &RunConfig) -> Result<i32, CliError> {
    let mut writer = RunWriter::new(config)?;
    let k = config.u32("K")?;
    let e_grid = config.grid("E")?;
    let lambda_grid = config.grid("lambda")?;
    // the scan varies lambda itself; a template model carries the family
    let template = match config.model_with_lambda(lambda_grid[0])? {
        Some(m) => m,
        None => DisorderModel::uniform_symmetric(0.0).map_err(|e| CliError::Usage(e.to_string()))?,
    };
    let master = config.u64("seed")?;
    let diagram = scan_phase_diagram(&template, k, &e_grid, &lambda_grid, &budgets(config)?, master);
    let mut rows = Vec::new();
    for (ie, &e) in e_grid.iter().enumerate() {
        for (il, &lambda) in lambda_grid.iter().enumerate() {
            writer.task_stream(format!("E={e},lambda={lambda}"), &[ie as u64, il as u64]);
            let p = &diagram.points[ie * lambda_grid.len() + il];
            for flag in &p.flags {
                writer.warn(format!("cell E={e} lambda={lambda}: {flag}"));
            }
            let fmt_margin = |m: Option<f64>| m.map_or("na".to_string(), fmt_f64);
            let margins = format!(
                "acL={};acP={};locP={}",
                fmt_f64(p.margin_ac_lyapunov),
                fmt_margin(p.margin_ac_phi1),
                fmt_margin(p.margin_localized),
            );
            rows.push(vec![
                fmt_f64(p.e),
                fmt_f64(p.lambda),
                fmt_f64(p.l),
                fmt_f64(p.l_stderr),
                p.phi1.map_or(String::new(), |v| fmt_f64(v.value)),
                p.phi1.map_or(String::new(), |v| fmt_f64(v.spread)),
                p.label.as_str().to_string(),
                margins,
            ]);
        }
    }
    writer.csv(
        "phase.csv",
        &["E", "lambda", "L", "L_stderr", "phi1", "phi1_spread", "label", "margins"],
        &rows,
    )?;
    writer.finish()?;
    Ok(0)
}

pub fn run_edge(config: &RunConfig) -> Result<i32, CliError> {
    let mut writer = RunWriter::new(config)?;
    let model = require_model(config)?;
    let k = config.u32("K")?;
    let window = config.f64("edge.window")?;
    let points = config.usize("edge.points")?.max(2);
    let e_edge = -2.0 * (k as f64).sqrt() - model.lambda;
    let grid: Vec<f64> =
        (0..points).map(|i| e_edge + window * i as f64 / (points - 1) as f64).collect();
    let seed = RealizationSeed::new(config.u64("seed")?);
    let edge = edge_analysis(&model, k, &grid, &budgets(config)?, &seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if !edge.all_below_bound {
        writer.warn("a near-edge Lyapunov estimate exceeded the free bound by over 3 sigma");
    }
    let rows: Vec<Vec<String>> = edge
        .rows
        .iter()
        .map(|&(e, l, se)| {
            vec![
                fmt_f64(e),
                fmt_f64(l),
                fmt_f64(se),
                fmt_f64(edge.l0_bound),
                fmt_bool(l <= edge.l0_bound + 3.0 * se),
            ]
        })
        .collect();
    writer.csv("edge.csv", &["E", "L", "stderr", "bound", "below_bound"], &rows)?;
    let summary = vec![
        vec!["e_edge".to_string(), fmt_f64(edge.e_edge)],
        vec!["lambda_star".to_string(), fmt_f64(edge.lambda_star)],
        vec!["l0_bound".to_string(), fmt_f64(edge.l0_bound)],
        vec!["edge_ac".to_string(), fmt_bool(edge.edge_ac)],
        vec!["all_below_bound".to_string(), fmt_bool(edge.all_below_bound)],
    ];
    writer.csv("edge_summary.csv", &["metric", "value"], &summary)?;
    writer.finish()?;
    Ok(0)
}

pub fn run_resonance(config: &RunConfig) -> Result<i32, CliError> {
    let mut writer = RunWriter::new(config)?;
    let model = require_model(config)?;
    let k = config.u32("K")?;
    let e = config.grid("E")?[0];
    let eta = config.f64("eta")?;
    let alpha = config.f64("alpha")?;
    let n = config.u32("resonance.n")?;
    let seed = RealizationSeed::new(config.u64("seed")?);
    let pool = pool_equilibrate(
        &model,
        k,
        ComplexEnergy::new(e, eta),
        config.usize("pool")?,
        config.usize("sweeps")?,
        &seed.child(0),
    );
    let (l_hat, _) = bethe::population::estimate_lyapunov(&pool);

    let rconfig = match config.get("resonance.mode") {
        "lyapunov" => ResonanceConfig::lyapunov_mode(n, k, eta, alpha, l_hat),
        "large-deviation" => {
            let curve = fit_curve(config, &model, &mut writer)?;
            let phi1 = bethe::population::phi1_extrapolated(&curve);
            let delta_gap = (k as f64).ln() + phi1.value;
            let s = *curve.s_grid.last().unwrap();
            let gamma = -curve.slope_at(s);
            let (i_gamma, _) = bethe::population::legendre_at(&curve, gamma);
            let b = (2.0 * model.sup_norm / model.lambda)
                * 16f64.max(1.0 / (1.0 - 0.75f64.powi(k as i32)));
            let params = LdParameters {
                s,
                gamma,
                i_gamma,
                delta_gap,
                phi_s: curve.value_at(s),
                epsilon: config.f64("resonance.epsilon")?,
                kappa: config.f64("resonance.kappa")?,
                b,
            };
            ResonanceConfig::large_deviation_mode(n, k, eta, alpha, l_hat + 0.1, params)
        }
        other => {
            return Err(CliError::Usage(format!(
                "resonance.mode must be lyapunov or large-deviation, got {other}"
            )))
        }
    };
    for c in rconfig.validate() {
        if !c.satisfied {
            writer.warn(format!("parameter window `{}` not satisfied: {}", c.name, c.detail));
        }
    }
    let sample_sites = match config.usize("resonance.sample_sites")? {
        0 => None,
        count => Some(count),
    };
    let stats = count_resonances(
        &model,
        &rconfig,
        &pool,
        config.usize("trials")?,
        sample_sites,
        &seed.child(1),
    );
    if stats.zero_events {
        writer.warn("no trial produced a resonance (tau too large for this budget)");
    }
    let trial_rows: Vec<Vec<String>> = stats
        .per_trial_n
        .iter()
        .enumerate()
        .map(|(i, &n)| vec![i.to_string(), n.to_string()])
        .collect();
    writer.csv("resonance_trials.csv", &["trial", "N"], &trial_rows)?;
    let tau = rconfig.tau;
    let summary: Vec<(&str, String)> = vec![
        ("mode", config.get("resonance.mode").to_string()),
        ("n", rconfig.n.to_string()),
        ("tau", fmt_f64(tau)),
        ("ell", fmt_f64(rconfig.ell)),
        ("xi", fmt_f64(stats.xi)),
        ("sphere_size", fmt_f64(stats.sphere_size)),
        ("mean_N", fmt_f64(stats.mean_n)),
        ("mean_N_stderr", fmt_f64(stats.mean_n_stderr)),
        ("mean_N2", fmt_f64(stats.mean_n2)),
        ("mean_N_N_minus_1", fmt_f64(stats.mean_nn1)),
        ("p_ge1", fmt_f64(stats.p_ge1)),
        ("p_ge1_stderr", fmt_f64(stats.p_ge1_stderr)),
        ("single_site_p", fmt_f64(stats.single_site_p)),
        ("single_site_stderr", fmt_f64(stats.single_site_stderr)),
        ("symmetry_ok", fmt_bool(stats.symmetry_ok)),
        ("second_moment_ratio", fmt_f64(stats.second_moment_ratio)),
        ("rate_extreme", fmt_f64(stats.event_rates[0])),
        ("rate_regular", fmt_f64(stats.event_rates[1])),
        ("rate_marginal", fmt_f64(stats.event_rates[2])),
        ("rate_joint", fmt_f64(stats.event_rates[3])),
        ("zero_events", fmt_bool(stats.zero_events)),
    ];
    let rows: Vec<Vec<String>> =
        summary.into_iter().map(|(k, v)| vec![k.to_string(), v]).collect();
    writer.csv("resonance_summary.csv", &["metric", "value"], &rows)?;
    writer.finish()?;
    Ok(0)
}

/// Shared entry used by `dispatch`.
pub fn run(config: &RunConfig, suite: Option<&str>) -> Result<i32, CliError> {
    let k = config.u32("K")?;
    let _ = k;
    match config.subcommand.as_str() {
        "spectrum" => run_spectrum(config),
        "lyapunov" => run_lyapunov(config),
        "free-energy" => run_free_energy(config),
        "rate-function" => run_rate_function(config),
        "dos" => run_dos(config),
        "phase-scan" => run_phase_scan(config),
        "edge" => run_edge(config),
        "resonance" => run_resonance(config),
        "verify" => run_verify(config, suite.unwrap_or("")),
        other => Err(CliError::Usage(format!("unknown subcommand `{other}`"))),
    }
}

pub fn classify_single(config: &RunConfig) -> Result<bethe::phase::PhasePoint, CliError> {
    let model = require_model(config)?;
    let k = config.u32("K")?;
    let e = config.grid("E")?[0];
    let seed = RealizationSeed::new(config.u64("seed")?);
    Ok(classify_point(&model, k, e, &budgets(config)?, &seed))
}
