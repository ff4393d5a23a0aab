//! Parallel benchmark orchestration.

use hscm_core::simgen::{aggregate, run_replicate, BenchmarkRow};
use hscm_core::{EstimateOptions, SimConfig};
use rayon::prelude::*;

use crate::error::{AppError, Result};

pub const CSV_HEADER: &str =
    "n,m,p,q,r,noise,group_specific,second_factor,replicates,failures,shd_mean,shd_se,rmse_mean,rmse_se";

/// Runs every (configuration, replicate) pair on at most `jobs` threads.
/// Replicates are seeded by index, so results do not depend on `jobs`.
pub fn run(
    configs: &[SimConfig],
    replicates: usize,
    base: &EstimateOptions,
    jobs: Option<usize>,
) -> Result<Vec<BenchmarkRow>> {
    if replicates < 2 {
        return Err(AppError::Usage("at least two replicates required".into()));
    }
    for c in configs {
        c.validate()?;
    }
    base.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| AppError::Usage(format!("cannot start worker pool: {e}")))?;
    let tasks: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..replicates).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<_> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, r)| run_replicate(&configs[c], r, base))
            .collect()
    });
    Ok(outcomes
        .chunks(replicates)
        .zip(configs)
        .map(|(chunk, c)| aggregate(c, chunk))
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn to_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let c = &row.config;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.n,
            c.m,
            c.p,
            c.q,
            c.r,
            c.noise.name(),
            c.group_specific,
            c.second_factor,
            row.replicates,
            row.failures,
            num(row.shd_mean),
            num(row.shd_se),
            opt(row.rmse_mean),
            opt(row.rmse_se),
        ));
    }
    out
}
