//! Run configuration: defaults, then a `key = value` file, then flags.

use std::path::Path;

use clap::Args;
use scatnet::classifier::{BetaGrid, CrossValidation, DEFAULT_MAX_DIM};
use scatnet::{Error, GaborParams, Oversampling, Result, ScatteringConfig};

/// Penalty used when training: a fixed value, or chosen on a held-out part
/// of the training set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaChoice {
    Fixed(f64),
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scattering: ScatteringConfig,
    pub max_dim: usize,
    pub beta: BetaChoice,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub val_fraction: f64,
    pub j_grid: Vec<usize>,
    pub beta_grid: BetaGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scattering: ScatteringConfig::default(),
            max_dim: DEFAULT_MAX_DIM,
            beta: BetaChoice::Auto,
            seed: 0,
            jobs: None,
            val_fraction: 0.2,
            j_grid: vec![2, 3, 4],
            beta_grid: BetaGrid::default(),
        }
    }
}

/// Hyperparameter flags; each overrides the matching config-file key.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Config file of `key = value` lines (`#` starts a comment).
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Number of wavelet scales J.
    #[arg(long = "J", global = true)]
    pub scales: Option<usize>,
    /// Number of wavelet orientations |Γ|.
    #[arg(long, global = true)]
    pub orientations: Option<usize>,
    /// Wavelet carrier frequency ξ (radians per pixel).
    #[arg(long, global = true)]
    pub xi: Option<f64>,
    /// Wavelet envelope width σ (pixels).
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Low-pass width σ_φ before dilation by 2^J.
    #[arg(long = "sigma-phi", global = true)]
    pub sigma_phi: Option<f64>,
    /// Wavelet envelope anisotropy.
    #[arg(long, global = true)]
    pub slant: Option<f64>,
    /// Maximum path length m0.
    #[arg(long, global = true)]
    pub m0: Option<usize>,
    /// Oversampling Δ: 1 or 1/2.
    #[arg(long, global = true)]
    pub delta: Option<String>,
    /// Maximum affine model dimension K.
    #[arg(long = "K", global = true)]
    pub max_dim: Option<usize>,
    /// Model-selection penalty β: a number, `inf`, or `auto`.
    #[arg(long, global = true)]
    pub beta: Option<String>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Held-out fraction used when selecting hyperparameters.
    #[arg(long = "val-fraction", global = true)]
    pub val_fraction: Option<f64>,
    /// Scales searched by `crossval`, comma separated.
    #[arg(long = "j-grid", global = true)]
    pub j_grid: Option<String>,
    /// Penalties searched: comma separated numbers, or `auto[:N]`.
    #[arg(long = "beta-grid", global = true)]
    pub beta_grid: Option<String>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_beta(value: &str) -> Result<BetaChoice> {
    match value.trim() {
        "auto" => Ok(BetaChoice::Auto),
        "inf" | "infinity" => Ok(BetaChoice::Fixed(f64::INFINITY)),
        v => {
            let b: f64 = parse("beta", v)?;
            if !(b >= 0.0) {
                return Err(Error::Config(format!("beta must be non-negative, got {b}")));
            }
            Ok(BetaChoice::Fixed(b))
        }
    }
}

fn parse_beta_grid(value: &str) -> Result<BetaGrid> {
    let v = value.trim();
    if let Some(rest) = v.strip_prefix("auto") {
        let count = match rest.strip_prefix(':') {
            Some(n) => parse("beta_grid", n)?,
            None if rest.is_empty() => 30,
            None => return Err(Error::Config(format!("beta_grid: cannot parse {value:?}"))),
        };
        return Ok(BetaGrid::Quantile { count });
    }
    let betas = v
        .split(',')
        .map(|b| match parse_beta(b)? {
            BetaChoice::Fixed(x) => Ok(x),
            BetaChoice::Auto => Err(Error::Config("beta_grid entries must be numbers".into())),
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BetaGrid::Explicit(betas))
}

impl RunConfig {
    /// Applies one setting; `key` uses the config-file spelling.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let g = &mut self.scattering.gabor;
        match key {
            "J" => g.scales = parse(key, value)?,
            "orientations" => g.n_orientations = parse(key, value)?,
            "xi" => g.xi = parse(key, value)?,
            "sigma" => g.sigma = parse(key, value)?,
            "sigma_phi" => g.sigma_phi = parse(key, value)?,
            "slant" => g.slant = parse(key, value)?,
            "m0" => self.scattering.max_order = parse(key, value)?,
            "delta" => self.scattering.oversampling = value.parse::<Oversampling>()?,
            "K" => self.max_dim = parse(key, value)?,
            "beta" => self.beta = parse_beta(value)?,
            "seed" => self.seed = parse(key, value)?,
            "jobs" => self.jobs = Some(parse(key, value)?),
            "val_fraction" => self.val_fraction = parse(key, value)?,
            "j_grid" => {
                self.j_grid = value
                    .split(',')
                    .map(|j| parse(key, j))
                    .collect::<Result<Vec<usize>>>()?
            }
            "beta_grid" => self.beta_grid = parse_beta_grid(value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn resolve(args: &ConfigArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => load_file(path)?,
            None => RunConfig::default(),
        };
        let g = &mut cfg.scattering.gabor;
        if let Some(v) = args.scales {
            g.scales = v;
        }
        if let Some(v) = args.orientations {
            g.n_orientations = v;
        }
        if let Some(v) = args.xi {
            g.xi = v;
        }
        if let Some(v) = args.sigma {
            g.sigma = v;
        }
        if let Some(v) = args.sigma_phi {
            g.sigma_phi = v;
        }
        if let Some(v) = args.slant {
            g.slant = v;
        }
        if let Some(v) = args.m0 {
            cfg.scattering.max_order = v;
        }
        if let Some(v) = &args.delta {
            cfg.set("delta", v)?;
        }
        if let Some(v) = args.max_dim {
            cfg.max_dim = v;
        }
        if let Some(v) = &args.beta {
            cfg.set("beta", v)?;
        }
        if let Some(v) = args.seed {
            cfg.seed = v;
        }
        if let Some(v) = args.jobs {
            cfg.jobs = Some(v);
        }
        if let Some(v) = args.val_fraction {
            cfg.val_fraction = v;
        }
        if let Some(v) = &args.j_grid {
            cfg.set("j_grid", v)?;
        }
        if let Some(v) = &args.beta_grid {
            cfg.set("beta_grid", v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scattering.gabor.validate()?;
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.j_grid.is_empty() {
            return Err(Error::Config("j_grid is empty".into()));
        }
        Ok(())
    }

    pub fn with_scales(&self, scales: usize) -> ScatteringConfig {
        ScatteringConfig {
            gabor: GaborParams {
                scales,
                ..self.scattering.gabor
            },
            ..self.scattering
        }
    }

    pub fn cross_validation(&self) -> CrossValidation {
        CrossValidation {
            val_fraction: self.val_fraction,
            seed: self.seed,
            max_dim: self.max_dim,
            beta_grid: self.beta_grid.clone(),
        }
    }

    /// Canonical text form of every setting that affects results.
    pub fn describe(&self) -> String {
        let g = &self.scattering.gabor;
        format!(
            "J={} orientations={} xi={} sigma={} sigma_phi={} slant={} m0={} delta={} K={} beta={:?} seed={} val_fraction={} j_grid={:?} beta_grid={:?}",
            g.scales,
            g.n_orientations,
            g.xi,
            g.sigma,
            g.sigma_phi,
            g.slant,
            self.scattering.max_order,
            self.scattering.oversampling,
            self.max_dim,
            self.beta,
            self.seed,
            self.val_fraction,
            self.j_grid,
            self.beta_grid
        )
    }
}

/// Defaults overridden by the settings in `path`.
pub fn load_file(path: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        context: path.display().to_string(),
        source: e,
    })?;
    cfg.apply_file_text(&text)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "# experiment\nJ = 4\nbeta = 0.5  # fixed\ndelta = 1\nbeta_grid = auto:12\n").unwrap();
        let args = ConfigArgs {
            config: Some(p.clone()),
            scales: Some(2),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!(cfg.scattering.gabor.scales, 2);
        assert_eq!(cfg.beta, BetaChoice::Fixed(0.5));
        assert_eq!(cfg.scattering.oversampling, Oversampling::Critical);
        assert_eq!(cfg.beta_grid, BetaGrid::Quantile { count: 12 });
        assert_eq!(load_file(&p).unwrap().scattering.gabor.scales, 4);
    }

    #[test]
    fn bad_settings_are_config_errors() {
        let mut cfg = RunConfig::default();
        for (k, v) in [("J", "x"), ("beta", "-1"), ("colour", "red"), ("delta", "1/4")] {
            let e = cfg.set(k, v).unwrap_err();
            assert_eq!(e.kind(), scatnet::ErrorKind::Config, "{k}");
        }
        assert!(cfg.apply_file_text("J 3").is_err());
        cfg.set("beta", "inf").unwrap();
        assert_eq!(cfg.beta, BetaChoice::Fixed(f64::INFINITY));
        cfg.set("beta_grid", "0.1,1,inf").unwrap();
        assert_eq!(cfg.beta_grid, BetaGrid::Explicit(vec![0.1, 1.0, f64::INFINITY]));
    }
}
