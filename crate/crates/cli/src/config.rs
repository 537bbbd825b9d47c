//! `key = value` configuration files and their merge with command-line flags.

use std::path::Path;

use clap::Args;
use hyperconvex::verify::Level;
use hyperconvex::{Error, Result};

/// Tunables settable from a config file or a flag; flags win.
#[derive(Args, Clone, Debug, Default)]
pub struct Tunables {
    /// Resample input surfaces to this many latitude rows.
    #[arg(long, global = true)]
    pub n_theta: Option<usize>,
    /// Resample input surfaces to this many longitude columns.
    #[arg(long, global = true)]
    pub n_phi: Option<usize>,
    /// Form residual required of a realization.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Tolerance of consistency residuals in reports.
    #[arg(long, global = true)]
    pub residual_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Seed for random restarts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Accepted for compatibility; all computations run on one thread.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub level: Option<Level>,
    /// Singular values ≤ tau·s_max count as kernel.
    #[arg(long, global = true)]
    pub kernel_tau: Option<f64>,
    /// Required ratio s₇/s₆.
    #[arg(long, global = true)]
    pub kernel_gap: Option<f64>,
    /// Points per closed curve in the geodesic search.
    #[arg(long, global = true)]
    pub geodesic_points: Option<usize>,
    /// Random starting curves in the geodesic search.
    #[arg(long, global = true)]
    pub geodesic_seeds: Option<usize>,
}

fn value<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T> {
    v.parse().map_err(|_| Error::Format(format!("config line {line}: bad value {v:?} for {key}")))
}

impl Tunables {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let n = n + 1;
            let (k, v) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Format(format!("config line {n}: expected `key = value`")))?;
            match k {
                "n_theta" => c.n_theta = Some(value(k, v, n)?),
                "n_phi" => c.n_phi = Some(value(k, v, n)?),
                "tol" => c.tol = Some(value(k, v, n)?),
                "residual_tol" => c.residual_tol = Some(value(k, v, n)?),
                "max_iter" => c.max_iter = Some(value(k, v, n)?),
                "seed" => c.seed = Some(value(k, v, n)?),
                "threads" => c.threads = Some(value(k, v, n)?),
                "level" => c.level = Some(value(k, v, n)?),
                "kernel_tau" => c.kernel_tau = Some(value(k, v, n)?),
                "kernel_gap" => c.kernel_gap = Some(value(k, v, n)?),
                "geodesic_points" => c.geodesic_points = Some(value(k, v, n)?),
                "geodesic_seeds" => c.geodesic_seeds = Some(value(k, v, n)?),
                _ => return Err(Error::Format(format!("config line {n}: unknown key {k:?}"))),
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Self) -> Self {
        Self {
            n_theta: self.n_theta.or(base.n_theta),
            n_phi: self.n_phi.or(base.n_phi),
            tol: self.tol.or(base.tol),
            residual_tol: self.residual_tol.or(base.residual_tol),
            max_iter: self.max_iter.or(base.max_iter),
            seed: self.seed.or(base.seed),
            threads: self.threads.or(base.threads),
            level: self.level.or(base.level),
            kernel_tau: self.kernel_tau.or(base.kernel_tau),
            kernel_gap: self.kernel_gap.or(base.kernel_gap),
            geodesic_points: self.geodesic_points.or(base.geodesic_points),
            geodesic_seeds: self.geodesic_seeds.or(base.geodesic_seeds),
        }
    }
}
