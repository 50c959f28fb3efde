//! Flat key-value problem configuration.
//!
//! A run is described by a text file of `key = value` lines (no positional
//! math input, so runs stay auditable). Densities are given either as named
//! generators (`white(σ²)`, scalar `ma(c0, c1, …)`, `zero`) or as
//! `file:<path>` pointing at a density grid artifact.

use std::path::{Path, PathBuf};

use pcfilter::error::Error;
use pcfilter::filter::Route;
use pcfilter::spectral::{
    density_from_ma, FactorizeOptions, MatrixMAPolynomial, SpectralDensityGrid,
};
use pcfilter::textio;
use pcfilter::Result;

#[derive(Debug, Clone)]
pub enum DensitySource {
    White(f64),
    ScalarMa(Vec<f64>),
    /// A density grid artifact.
    File(PathBuf),
    /// A factor polynomial artifact; the density is its outer product.
    FactorFile(PathBuf),
    Zero,
}

impl DensitySource {
    fn parse(key: &str, value: &str, config_dir: &Path) -> Result<Self> {
        let v = value.trim();
        if v == "zero" {
            return Ok(DensitySource::Zero);
        }
        if let Some(rest) = v.strip_prefix("file:") {
            let p = PathBuf::from(rest.trim());
            let p = if p.is_relative() { config_dir.join(p) } else { p };
            return Ok(DensitySource::File(p));
        }
        if let Some(rest) = v.strip_prefix("mafile:") {
            let p = PathBuf::from(rest.trim());
            let p = if p.is_relative() { config_dir.join(p) } else { p };
            return Ok(DensitySource::FactorFile(p));
        }
        if let Some(inner) = v.strip_prefix("white(").and_then(|s| s.strip_suffix(')')) {
            let sigma2: f64 = inner.trim().parse().map_err(|e| bad_key(key, format!("{e}")))?;
            if sigma2 < 0.0 {
                return Err(bad_key(key, "variance must be nonnegative".into()));
            }
            return Ok(DensitySource::White(sigma2));
        }
        if let Some(inner) = v.strip_prefix("ma(").and_then(|s| s.strip_suffix(')')) {
            let coeffs: Vec<f64> = inner
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad_key(key, format!("{e}")))?;
            if coeffs.is_empty() {
                return Err(bad_key(key, "ma(...) needs at least one coefficient".into()));
            }
            return Ok(DensitySource::ScalarMa(coeffs));
        }
        Err(bad_key(
            key,
            format!("unrecognized density source {v:?}; use white(σ²), ma(c0,…), file:path or zero"),
        ))
    }

    /// Materialize the density on the configured grid.
    pub fn build(&self, key: &str, k: usize, grid_size: usize) -> Result<SpectralDensityGrid> {
        match self {
            DensitySource::Zero => Ok(SpectralDensityGrid::zero(k, grid_size)),
            DensitySource::White(s2) => Ok(SpectralDensityGrid::white(k, grid_size, *s2)),
            DensitySource::ScalarMa(coeffs) => {
                if k != 1 {
                    return Err(bad_key(
                        key,
                        format!("inline ma(...) sources are scalar, but K = {k}"),
                    ));
                }
                density_from_ma(&MatrixMAPolynomial::scalar(coeffs), grid_size)
            }
            DensitySource::File(path) => {
                let d = textio::read_density_file(path)?;
                if d.k() != k || d.grid_size() != grid_size {
                    return Err(Error::GridMismatch(format!(
                        "{}: density is {}x{} on {} points, config says K = {k}, F = {grid_size}",
                        path.display(),
                        d.k(),
                        d.k(),
                        d.grid_size()
                    )));
                }
                Ok(d)
            }
            DensitySource::FactorFile(path) => {
                let p = textio::read_ma_file(path)?;
                if p.rows() != k {
                    return Err(Error::GridMismatch(format!(
                        "{}: factor has {} rows, config says K = {k}",
                        path.display(),
                        p.rows()
                    )));
                }
                density_from_ma(&p, grid_size)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimaxMode {
    Full,
    GivenF,
    GivenG,
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub k: usize,
    pub grid_size: usize,
    pub order: usize,
    pub inverse_order: usize,
    pub f: DensitySource,
    pub g: DensitySource,
    pub weights_path: Option<PathBuf>,
    pub route: Route,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub factorize: FactorizeOptions,
    // minimax
    pub p_moments: Vec<f64>,
    pub q_moments: Vec<f64>,
    pub mode: MinimaxMode,
    pub opt_order: usize,
    pub restarts: usize,
    pub solver_iters: usize,
    pub stationarity_tol: f64,
    pub probes: usize,
    // simulate
    pub horizon: usize,
    pub n_paths: usize,
    // verify
    pub oracle_horizon: usize,
    pub mc_paths: usize,
    pub oracle_tol: f64,
}

fn bad_key(key: &str, msg: String) -> Error {
    Error::InvalidParameter {
        name: Box::leak(format!("config key `{key}`").into_boxed_str()),
        msg,
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| bad_key(key, format!("{e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| bad_key(key, format!("{e}"))))
        .collect()
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = textio::read_text(path)?;
        let entries = textio::parse_report(&text, &path.display().to_string())?;
        let config_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();

        let mut k = None;
        let mut grid_size = 1024usize;
        let mut order = 4usize;
        let mut inverse_order = None;
        let mut f = DensitySource::Zero;
        let mut g = DensitySource::Zero;
        let mut weights_path = None;
        let mut route = Route::ViaG;
        let mut seed = 0u64;
        let mut out = None;
        let mut factorize = FactorizeOptions::default();
        let mut p_moments = Vec::new();
        let mut q_moments = Vec::new();
        let mut class_path: Option<PathBuf> = None;
        let mut mode = MinimaxMode::Full;
        let mut opt_order = 2usize;
        let mut restarts = 8usize;
        let mut solver_iters = 120usize;
        let mut stationarity_tol = 1e-6;
        let mut probes = 1000usize;
        let mut horizon = 16usize;
        let mut n_paths = 4usize;
        let mut oracle_horizon = 200usize;
        let mut mc_paths = 20_000usize;
        let mut oracle_tol = 1e-4;

        for (key, value) in &entries {
            match key.as_str() {
                "K" => k = Some(parse_num::<usize>(key, value)?),
                "F" => grid_size = parse_num(key, value)?,
                "L" => order = parse_num(key, value)?,
                "Lb" => inverse_order = Some(parse_num::<usize>(key, value)?),
                "f" => f = DensitySource::parse(key, value, &config_dir)?,
                "g" => g = DensitySource::parse(key, value, &config_dir)?,
                "weights" => {
                    let p = PathBuf::from(value.trim());
                    weights_path =
                        Some(if p.is_relative() { config_dir.join(p) } else { p });
                }
                "route" => {
                    route = match value.trim() {
                        "via_f" => Route::ViaF,
                        "via_g" => Route::ViaG,
                        other => {
                            return Err(bad_key(key, format!("unknown route {other:?}")));
                        }
                    }
                }
                "seed" => seed = parse_num(key, value)?,
                "out" => out = Some(PathBuf::from(value.trim())),
                "tol_factor" => factorize.tol = parse_num(key, value)?,
                "max_iter" => factorize.max_iter = parse_num(key, value)?,
                "eps_pd" => factorize.eps_pd = parse_num(key, value)?,
                "p" => p_moments = parse_list(key, value)?,
                "q" => q_moments = parse_list(key, value)?,
                "class" => {
                    let p = PathBuf::from(value.trim());
                    class_path = Some(if p.is_relative() { config_dir.join(p) } else { p });
                }
                "mode" => {
                    mode = match value.trim() {
                        "full" => MinimaxMode::Full,
                        "given_f" => MinimaxMode::GivenF,
                        "given_g" => MinimaxMode::GivenG,
                        other => return Err(bad_key(key, format!("unknown mode {other:?}"))),
                    }
                }
                "opt_order" => opt_order = parse_num(key, value)?,
                "restarts" => restarts = parse_num(key, value)?,
                "solver_iters" => solver_iters = parse_num(key, value)?,
                "stationarity_tol" => stationarity_tol = parse_num(key, value)?,
                "probes" => probes = parse_num(key, value)?,
                "horizon" => horizon = parse_num(key, value)?,
                "n_paths" => n_paths = parse_num(key, value)?,
                "oracle_horizon" => oracle_horizon = parse_num(key, value)?,
                "mc_paths" => mc_paths = parse_num(key, value)?,
                "oracle_tol" => oracle_tol = parse_num(key, value)?,
                other => {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line: 0,
                        msg: format!("unknown config key `{other}`"),
                    });
                }
            }
        }

        let k = k.ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: "missing required key `K`".into(),
        })?;
        if let Some(cp) = &class_path {
            let text = textio::read_text(cp)?;
            let class_entries = textio::parse_report(&text, &cp.display().to_string())?;
            for (ck, cv) in &class_entries {
                match ck.as_str() {
                    "K" => {
                        let ck_val: usize = parse_num(ck, cv)?;
                        if ck_val != k {
                            return Err(Error::Parse {
                                path: cp.display().to_string(),
                                line: 0,
                                msg: format!("class file says K = {ck_val}, config says K = {k}"),
                            });
                        }
                    }
                    "p" => p_moments = parse_list(ck, cv)?,
                    "q" => q_moments = parse_list(ck, cv)?,
                    other => {
                        return Err(Error::Parse {
                            path: cp.display().to_string(),
                            line: 0,
                            msg: format!("unknown class file key `{other}`"),
                        });
                    }
                }
            }
        }
        Ok(ProblemConfig {
            k,
            grid_size,
            order,
            inverse_order: inverse_order.unwrap_or(4 * order.max(1)),
            f,
            g,
            weights_path,
            route,
            seed,
            out,
            factorize,
            p_moments,
            q_moments,
            mode,
            opt_order,
            restarts,
            solver_iters,
            stationarity_tol,
            probes,
            horizon,
            n_paths,
            oracle_horizon,
            mc_paths,
            oracle_tol,
        })
    }

    pub fn weights(&self) -> Result<pcfilter::blocking::FunctionalWeights> {
        let path = self.weights_path.as_ref().ok_or(Error::InvalidParameter {
            name: "weights",
            msg: "this command needs a `weights` file in the config".into(),
        })?;
        let w = textio::read_weights_file(path)?;
        if w.k() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "{}: weights have dimension {}, config says K = {}",
                path.display(),
                w.k(),
                self.k
            )));
        }
        Ok(w)
    }
}
