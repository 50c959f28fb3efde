//! The five subcommand runners. Each writes its artifacts into the output
//! directory and returns the report entries it printed there.

use std::path::{Path, PathBuf};

use pcfilter::blocking::BlockedSequence;
use pcfilter::error::Error;
use pcfilter::filter::{self, Factors, FilterCharacteristic, MseReport, Route};
use pcfilter::minimax::{self, DensityClassD00, SaddleCandidate, SolveOptions};
use pcfilter::oracle::{self, SimulationSpec};
use pcfilter::spectral::{factorize, MatrixMAPolynomial, SpectralDensityGrid};
use pcfilter::textio;
use pcfilter::Result;

use crate::config::{MinimaxMode, ProblemConfig};

type Entries = Vec<(String, String)>;

fn entry(entries: &mut Entries, key: &str, value: impl ToString) {
    entries.push((key.to_string(), value.to_string()));
}

fn section(entries: &mut Entries, title: &str) {
    entries.push((format!("# {title}"), String::new()));
}

fn write_report(out: &Path, name: &str, entries: &Entries, machine: bool) -> Result<()> {
    textio::write_text(&out.join(name), &textio::report_to_string(entries, machine))
}

fn ensure_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.display().to_string(),
        source,
    })
}

fn mse_entries(entries: &mut Entries, report: &MseReport) {
    entry(entries, "route", report.route);
    entry(entries, "delta", report.delta);
    entry(entries, "first_term", report.first_term);
    entry(entries, "second_term", report.second_term);
    entry(entries, "s_tail_norm", report.s_tail_norm);
    entry(entries, "b_tail_norm", report.b_tail_norm);
    entry(entries, "truncation_warning", report.truncation_warning);
}

fn filter_to_blocked(h: &FilterCharacteristic) -> BlockedSequence {
    BlockedSequence {
        k: h.k(),
        blocks: h.coeffs().to_vec(),
    }
}

pub struct RunOutput {
    pub entries: Entries,
    /// Verification verdict for commands that check things (exit 2 if false).
    pub verified: bool,
}

impl RunOutput {
    fn ok(entries: Entries) -> Self {
        RunOutput {
            entries,
            verified: true,
        }
    }
}

pub fn run_factorize(cfg: &ProblemConfig, out: &Path, machine: bool) -> Result<RunOutput> {
    ensure_out(out)?;
    let density = cfg.f.build("f", cfg.k, cfg.grid_size)?;
    let d = factorize(&density, cfg.order, &cfg.factorize)?;
    let b = pcfilter::spectral::invert_factor(&d, cfg.inverse_order)?;
    textio::write_text(&out.join("d.ma.txt"), &textio::ma_to_string(&d))?;
    textio::write_text(&out.join("b.ma.txt"), &textio::ma_to_string(&b))?;
    let rebuilt = pcfilter::spectral::density_from_ma(&d, cfg.grid_size)?;
    let residual = density
        .values()
        .iter()
        .zip(rebuilt.values().iter())
        .map(|(s, p)| (s - p).norm() / s.norm().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let mut entries = Entries::new();
    section(&mut entries, "canonical factorization");
    entry(&mut entries, "K", cfg.k);
    entry(&mut entries, "F", cfg.grid_size);
    entry(&mut entries, "order", d.order());
    entry(&mut entries, "relative_residual", residual);
    entry(&mut entries, "b_order", b.order());
    entry(&mut entries, "b_tail_norm", b.tail_norm());
    write_report(out, "factorize.report.txt", &entries, machine)?;
    Ok(RunOutput::ok(entries))
}

fn build_factors(cfg: &ProblemConfig) -> Result<(SpectralDensityGrid, SpectralDensityGrid, Factors)> {
    let f = cfg.f.build("f", cfg.k, cfg.grid_size)?;
    let g = cfg.g.build("g", cfg.k, cfg.grid_size)?;
    let factors = Factors::from_densities(
        &f,
        &g,
        cfg.order,
        Some(cfg.inverse_order),
        &cfg.factorize,
    )?;
    Ok((f, g, factors))
}

pub fn run_filter(cfg: &ProblemConfig, out: &Path, machine: bool) -> Result<RunOutput> {
    ensure_out(out)?;
    let weights = cfg.weights()?;
    let (_, _, factors) = build_factors(cfg)?;
    let solution = match cfg.route {
        Route::ViaF => filter::solve_via_f(&factors.b, &factors.phi, &weights)?,
        _ => filter::solve_via_g(&factors.d, &factors.b, &factors.psi, &weights)?,
    };
    textio::write_text(
        &out.join("h.txt"),
        &textio::blocked_to_string(&filter_to_blocked(&solution.h)),
    )?;
    let mut entries = Entries::new();
    section(&mut entries, "optimal filter");
    entry(&mut entries, "K", cfg.k);
    entry(&mut entries, "h_lags", solution.h.coeffs().len());
    mse_entries(&mut entries, &solution.report);
    write_report(out, "filter.report.txt", &entries, machine)?;
    Ok(RunOutput::ok(entries))
}

fn candidate_artifacts(out: &Path, c: &SaddleCandidate) -> Result<()> {
    textio::write_text(&out.join("f0.density.txt"), &textio::density_to_string(&c.f0))?;
    textio::write_text(&out.join("g0.density.txt"), &textio::density_to_string(&c.g0))?;
    textio::write_text(&out.join("d0.ma.txt"), &textio::ma_to_string(&c.d0))?;
    textio::write_text(&out.join("phi0.ma.txt"), &textio::ma_to_string(&c.phi0))?;
    textio::write_text(&out.join("psi0.ma.txt"), &textio::ma_to_string(&c.psi0))?;
    textio::write_text(&out.join("b0.ma.txt"), &textio::ma_to_string(&c.b0))?;
    textio::write_text(
        &out.join("h0.txt"),
        &textio::blocked_to_string(&filter_to_blocked(&c.h0)),
    )?;
    Ok(())
}

fn float_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn run_minimax(cfg: &ProblemConfig, out: &Path, machine: bool) -> Result<RunOutput> {
    ensure_out(out)?;
    let weights = cfg.weights()?;
    if cfg.p_moments.len() != cfg.k || cfg.q_moments.len() != cfg.k {
        return Err(Error::InvalidParameter {
            name: "p/q",
            msg: format!(
                "need {} moments per side, got p: {}, q: {}",
                cfg.k,
                cfg.p_moments.len(),
                cfg.q_moments.len()
            ),
        });
    }
    let opts = SolveOptions {
        grid_size: cfg.grid_size,
        opt_order: cfg.opt_order,
        inverse_order: cfg.inverse_order,
        stationarity_tol: cfg.stationarity_tol,
        restarts: cfg.restarts,
        max_iters: cfg.solver_iters,
        seed: cfg.seed,
        factorize: cfg.factorize.clone(),
        ..SolveOptions::default()
    };
    let class = DensityClassD00::new(cfg.p_moments.clone(), cfg.q_moments.clone())?;
    let candidate = match cfg.mode {
        MinimaxMode::Full => {
            minimax::solve_least_favorable(&class, &weights, cfg.route, &opts)?
        }
        MinimaxMode::GivenF => {
            let f = cfg.f.build("f", cfg.k, cfg.grid_size)?;
            let phi = factorize(&f, cfg.order, &cfg.factorize)?;
            minimax::least_favorable_given_f(&f, &phi, &cfg.q_moments, &weights, &opts)?
        }
        MinimaxMode::GivenG => {
            let g = cfg.g.build("g", cfg.k, cfg.grid_size)?;
            let psi = factorize(&g, cfg.order, &cfg.factorize)?;
            minimax::least_favorable_given_g(&g, &psi, &cfg.p_moments, &weights, &opts)?
        }
    };
    candidate_artifacts(out, &candidate)?;
    let report = minimax::saddle_check(&candidate, &candidate.class, cfg.probes, cfg.seed)?;

    let mut entries = Entries::new();
    section(&mut entries, "least favorable candidate");
    entry(&mut entries, "delta0", candidate.delta0);
    entry(&mut entries, "certified", candidate.certified);
    entry(&mut entries, "alpha2", float_list(&candidate.alpha2));
    entry(&mut entries, "beta2", float_list(&candidate.beta2));
    entry(
        &mut entries,
        "lagrange_residual_f",
        candidate.residuals.residual_f,
    );
    entry(
        &mut entries,
        "lagrange_residual_g",
        candidate.residuals.residual_g,
    );
    entry(
        &mut entries,
        "factorization_residual",
        candidate.diagnostics.factorization_residual,
    );
    entry(
        &mut entries,
        "membership_error",
        candidate.diagnostics.membership_error,
    );
    entry(
        &mut entries,
        "route_consistency",
        candidate.diagnostics.route_consistency,
    );
    entry(
        &mut entries,
        "winning_restart",
        candidate.diagnostics.winning_restart,
    );
    entry(&mut entries, "iterations", candidate.diagnostics.iterations);
    section(&mut entries, "saddle probes");
    entry(&mut entries, "probes", report.n_probes);
    entry(&mut entries, "density_violations", report.density_violations);
    entry(&mut entries, "filter_violations", report.filter_violations);
    entry(
        &mut entries,
        "worst_density_margin",
        report.worst_density_margin,
    );
    entry(
        &mut entries,
        "worst_filter_margin",
        report.worst_filter_margin,
    );
    entry(&mut entries, "saddle_passed", report.passed());
    write_report(out, "minimax.report.txt", &entries, machine)?;
    Ok(RunOutput::ok(entries))
}

fn factor_for_simulation(
    source: &crate::config::DensitySource,
    key: &str,
    cfg: &ProblemConfig,
) -> Result<MatrixMAPolynomial> {
    let density = source.build(key, cfg.k, cfg.grid_size)?;
    if density.is_zero(cfg.factorize.eps_pd) {
        Ok(MatrixMAPolynomial::zero(cfg.k, cfg.k))
    } else {
        factorize(&density, cfg.order, &cfg.factorize)
    }
}

pub fn run_simulate(cfg: &ProblemConfig, out: &Path, machine: bool) -> Result<RunOutput> {
    ensure_out(out)?;
    let phi = factor_for_simulation(&cfg.f, "f", cfg)?;
    let psi = factor_for_simulation(&cfg.g, "g", cfg)?;
    let spec = SimulationSpec::new(phi, psi, cfg.horizon, cfg.n_paths, cfg.seed)?;
    let paths = oracle::simulate_ma(&spec);
    let mut mean_sq = 0.0;
    for (i, (signal, noise)) in paths.iter().enumerate() {
        let obs = BlockedSequence {
            k: signal.k,
            blocks: signal
                .blocks
                .iter()
                .zip(noise.blocks.iter())
                .map(|(s, n)| s + n)
                .collect(),
        };
        textio::write_text(
            &out.join(format!("signal_p{i}.txt")),
            &textio::blocked_to_string(signal),
        )?;
        textio::write_text(
            &out.join(format!("noise_p{i}.txt")),
            &textio::blocked_to_string(noise),
        )?;
        textio::write_text(
            &out.join(format!("observations_p{i}.txt")),
            &textio::blocked_to_string(&obs),
        )?;
        mean_sq += obs.blocks.iter().map(|b| b.norm_squared()).sum::<f64>();
    }
    mean_sq /= (cfg.n_paths * cfg.horizon * cfg.k) as f64;
    let mut entries = Entries::new();
    section(&mut entries, "moving-average simulation");
    entry(&mut entries, "K", cfg.k);
    entry(&mut entries, "horizon", cfg.horizon);
    entry(&mut entries, "n_paths", cfg.n_paths);
    entry(&mut entries, "seed", cfg.seed);
    entry(&mut entries, "observation_mean_square", mean_sq);
    write_report(out, "simulate.report.txt", &entries, machine)?;
    Ok(RunOutput::ok(entries))
}

pub fn run_verify(cfg: &ProblemConfig, out: &Path, machine: bool) -> Result<RunOutput> {
    ensure_out(out)?;
    let weights = cfg.weights()?;
    let (f, g, factors) = build_factors(cfg)?;

    let via_g = filter::solve_via_g(&factors.d, &factors.b, &factors.psi, &weights)?;
    let via_f = filter::solve_via_f(&factors.b, &factors.phi, &weights)?;
    let duality_delta = (via_g.report.delta - via_f.report.delta).abs();
    let duality_h = via_g.h.coeff_distance(&via_f.h);

    let oracle_value = oracle::finite_horizon_mmse(&f, &g, &weights, cfg.oracle_horizon)?;
    let delta = match cfg.route {
        Route::ViaF => via_f.report.delta,
        _ => via_g.report.delta,
    };
    let oracle_gap = (oracle_value.value - delta).abs();

    // the oracle can only improve with more history
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    let mut h_mark = weights.coeffs.len().max(2);
    let mut horizons = Vec::new();
    while h_mark < cfg.oracle_horizon {
        horizons.push(h_mark);
        h_mark *= 2;
    }
    horizons.push(cfg.oracle_horizon);
    for &n_h in &horizons {
        let v = oracle::finite_horizon_mmse(&f, &g, &weights, n_h)?.value;
        if v > prev + 1e-10 {
            monotone = false;
        }
        prev = v;
    }

    let h = match cfg.route {
        Route::ViaF => &via_f.h,
        _ => &via_g.h,
    };
    let horizon = h.coeffs().len().max(weights.coeffs.len());
    let spec = SimulationSpec::new(
        factors.phi.clone(),
        factors.psi.clone(),
        horizon,
        cfg.mc_paths,
        cfg.seed,
    )?;
    let empirical = oracle::empirical_mse(h, &spec, &weights)?;
    let mc_gap = (empirical.mean - delta).abs();
    let mc_band = 3.0 * empirical.std_error;

    let checks = [
        ("duality_delta", duality_delta <= 1e-8),
        ("duality_h", duality_h <= 1e-8),
        ("oracle_gap", oracle_gap <= cfg.oracle_tol),
        ("oracle_monotone", monotone),
        ("monte_carlo", mc_gap <= mc_band),
    ];
    let verified = checks.iter().all(|(_, ok)| *ok);

    let mut entries = Entries::new();
    section(&mut entries, "cross-validation");
    entry(&mut entries, "delta_via_g", via_g.report.delta);
    entry(&mut entries, "delta_via_f", via_f.report.delta);
    entry(&mut entries, "duality_delta", duality_delta);
    entry(&mut entries, "duality_h", duality_h);
    entry(&mut entries, "oracle_value", oracle_value.value);
    entry(&mut entries, "oracle_horizon", cfg.oracle_horizon);
    entry(&mut entries, "oracle_gap", oracle_gap);
    entry(&mut entries, "oracle_regularized", oracle_value.regularized);
    entry(&mut entries, "oracle_monotone", monotone);
    entry(&mut entries, "mc_mean", empirical.mean);
    entry(&mut entries, "mc_std_error", empirical.std_error);
    entry(&mut entries, "mc_paths", empirical.n_paths);
    entry(&mut entries, "mc_gap", mc_gap);
    entry(&mut entries, "mc_band", mc_band);
    section(&mut entries, "verdicts");
    for (name, ok) in checks {
        entry(&mut entries, &format!("check_{name}"), if ok { "pass" } else { "fail" });
    }
    entry(&mut entries, "verified", verified);
    write_report(out, "verify.report.txt", &entries, machine)?;
    Ok(RunOutput {
        entries,
        verified,
    })
}

pub fn output_dir(cfg: &ProblemConfig, cli_out: Option<&PathBuf>, config_path: &Path) -> PathBuf {
    if let Some(o) = cli_out {
        return o.clone();
    }
    match &cfg.out {
        Some(o) if o.is_relative() => config_path
            .parent()
            .unwrap_or(Path::new("."))
            .join(o),
        Some(o) => o.clone(),
        None => PathBuf::from("."),
    }
}
