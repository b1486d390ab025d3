//! Bound versus sample size: for every `(N, run, degree)` cell, simulate `N`
//! trajectories and certify. Cells run in parallel; each derives its data
//! seed from `(master seed, N, run)` alone, so both degrees of a run see the
//! same trajectories and the output does not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use jsrcert::bounds::budget_for;
use jsrcert::sampling::simulate;
use jsrcert::{certify, Error, ModeSet, Result, SolveOptions};

use crate::plot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub modes_file: String,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub runs: usize,
    pub degrees: Vec<usize>,
    pub beta: f64,
    pub beta1: f64,
    pub l: usize,
    pub modes_upper: usize,
    pub seed: u64,
    pub options: SolveOptions,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("--n-list must be non-empty and strictly increasing".into()));
        }
        if self.n_list[0] == 0 {
            return Err(Error::InvalidArgument("--n-list entries must be positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidArgument("--runs must be at least 1".into()));
        }
        if self.degrees.is_empty() || self.degrees.contains(&0) {
            return Err(Error::InvalidArgument("--degrees must list positive degrees".into()));
        }
        if self.l == 0 || self.modes_upper == 0 {
            return Err(Error::InvalidArgument("--len and --modes-upper must be at least 1".into()));
        }
        self.options.validate()
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Data seed of the `(N, run)` cell.
pub fn cell_seed(master: u64, n: usize, run: usize) -> u64 {
    mix(mix(mix(master) ^ n as u64) ^ run as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub run: usize,
    pub degree: usize,
    pub gamma_star: f64,
    pub bound: f64,
    pub finite: bool,
    /// Not part of the CSV; kept for diagnostics.
    #[serde(skip)]
    pub kappa: f64,
    #[serde(skip)]
    pub c_bound_active: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub config: SweepConfig,
    /// Sorted by `(N, run, degree)`.
    pub rows: Vec<SweepRow>,
}

fn fmt_real(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

impl SweepOutput {
    pub fn csv(&self) -> String {
        let mut s = String::from("N,run,degree,gamma_star,bound,finite\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.n,
                r.run,
                r.degree,
                fmt_real(r.gamma_star),
                fmt_real(r.bound),
                r.finite
            ));
        }
        s
    }

    /// Mean bound per `(degree, N)`, degrees in config order, `N` increasing.
    /// An infinite bound in any run makes the mean infinite.
    pub fn means(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for &d in &self.config.degrees {
            for &n in &self.config.n_list {
                let vals: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.degree == d && r.n == n)
                    .map(|r| r.bound)
                    .collect();
                out.push((d, n, vals.iter().sum::<f64>() / vals.len() as f64));
            }
        }
        out
    }

    pub fn mean_bound(&self, degree: usize, n: usize) -> Option<f64> {
        self.means().into_iter().find(|&(d, m, _)| d == degree && m == n).map(|(_, _, v)| v)
    }

    pub fn svg(&self) -> String {
        let series: Vec<plot::Series> = self
            .config
            .degrees
            .iter()
            .map(|&d| plot::Series {
                label: if d == 1 { "quadratic (d=1)".to_string() } else { format!("SOS (d={d})") },
                points: self
                    .means()
                    .into_iter()
                    .filter(|&(dd, _, _)| dd == d)
                    .map(|(_, n, v)| (n as f64, v))
                    .collect(),
            })
            .collect();
        let meta = serde_json::to_string(&self.config).unwrap_or_default();
        plot::line_plot_svg(&series, "N (number of trajectories)", "mean JSR upper bound", &meta)
    }
}

/// Runs every cell of `config` on `modes`.
pub fn run_sweep(modes: &ModeSet, config: &SweepConfig) -> Result<SweepOutput> {
    config.validate()?;
    let cells: Vec<(usize, usize, usize)> = config
        .n_list
        .iter()
        .flat_map(|&n| (0..config.runs).flat_map(move |run| config.degrees.iter().map(move |&d| (n, run, d))))
        .collect();
    let mut rows = cells
        .par_iter()
        .map(|&(n, run, d)| {
            let obs = simulate(modes, n, config.l, cell_seed(config.seed, n, run))?.endpoints();
            let budget = budget_for(&obs, d, config.modes_upper, config.beta, config.beta1);
            let report = certify(&obs, &budget, &config.options, jsrcert::Provenance::Constructed)?;
            Ok(SweepRow {
                n,
                run,
                degree: d,
                gamma_star: report.gamma_star,
                bound: report.jsr_upper_bound,
                finite: report.finite,
                kappa: report.kappa,
                c_bound_active: report.regimes.c_bound_active,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| (r.n, r.run, r.degree));
    Ok(SweepOutput {
        config: config.clone(),
        rows,
    })
}
