//! Randomized repetitions of a scenario for every method.
//!
//! Each run redraws, per agent, the initial estimate spread γ (`x̂ = p + γz`,
//! `P̂ = γ²I`) and the sensor range band and bearing noise. Every method in a
//! run sees the same draws and the same measurement-noise streams.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bearing::SensorParams;
use crate::config::{ConfigError, MonteCarloConfig, NormalParams, RunMethod, ScenarioConfig};
use crate::ellipsoid::Ellipsoid;
use crate::linalg::{SpdMatrix2, Vec2};
use crate::netsim::{run_scenario, SimError};
use crate::report::{histogram_counts, histogram_edges, Stats};
use crate::streams::{run_agent_index, substream, Stream};

#[derive(Debug, Error)]
pub enum MonteCarloError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run {run}: {source}")]
    Simulation { run: u64, source: SimError },
    #[error("run {run}, agent {agent}: no valid {what} after {attempts} draws")]
    Rejection {
        run: u64,
        agent: usize,
        what: &'static str,
        attempts: u32,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Final error of one agent in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalError {
    pub run_id: u64,
    pub method: RunMethod,
    pub agent_id: usize,
    pub final_err_m: f64,
    /// Checksum of the run's measurement noise; equal across methods of a run.
    pub noise_checksum: u64,
}

/// Final-error statistics for one (method, agent) over all runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub method: RunMethod,
    pub agent_id: usize,
    pub stats: Stats,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Flat row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: RunMethod,
    pub agent_id: usize,
    pub runs: usize,
    pub median: f64,
    pub mean: f64,
    pub p05: f64,
    pub p25: f64,
    pub p75: f64,
    pub p95: f64,
    pub min: f64,
    pub max: f64,
}

/// Flat row of `histogram.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub method: RunMethod,
    pub agent_id: usize,
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

impl SummaryRecord {
    pub fn row(&self) -> SummaryRow {
        let s = &self.stats;
        SummaryRow {
            method: self.method,
            agent_id: self.agent_id,
            runs: s.count,
            median: s.median,
            mean: s.mean,
            p05: s.p05,
            p25: s.p25,
            p75: s.p75,
            p95: s.p95,
            min: s.min,
            max: s.max,
        }
    }

    pub fn histogram_rows(&self) -> Vec<HistogramRow> {
        self.counts
            .iter()
            .enumerate()
            .map(|(bin, &count)| HistogramRow {
                method: self.method,
                agent_id: self.agent_id,
                bin,
                lo: self.edges[bin],
                hi: self.edges[bin + 1],
                count,
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    /// Ordered by run, then method (config order), then agent.
    pub finals: Vec<FinalError>,
    /// Ordered by method (config order), then agent.
    pub summaries: Vec<SummaryRecord>,
}

fn draw_until<T>(
    rng: &mut ChaCha8Rng,
    max_attempts: u32,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Option<T>,
) -> Option<T> {
    (0..max_attempts).find_map(|_| draw(rng))
}

fn normal(p: NormalParams) -> Normal<f64> {
    // Validated configs have finite mean and nonnegative std.
    Normal::new(p.mean, p.std).expect("validated normal parameters")
}

/// The scenario of run `run`: the base with per-agent randomized initial
/// estimates and sensors.
pub fn draw_run(
    mc: &MonteCarloConfig,
    root_seed: u64,
    run: u64,
) -> Result<ScenarioConfig, MonteCarloError> {
    let r = &mc.randomization;
    let (gamma, r_min, r_max, sigma) = (
        normal(r.gamma),
        normal(r.r_min),
        normal(r.r_max),
        normal(r.sigma_deg),
    );
    let mut scenario = mc.base.clone();
    let target = scenario.target;
    for (agent, cfg) in scenario.agents.iter_mut().enumerate() {
        let mut rng = substream(root_seed, Stream::MonteCarlo, run_agent_index(run, agent));
        let fail = |what| MonteCarloError::Rejection {
            run,
            agent,
            what,
            attempts: r.max_attempts,
        };

        let g = draw_until(&mut rng, r.max_attempts, |rng| {
            Some(gamma.sample(rng)).filter(|g| *g > 0.0)
        })
        .ok_or_else(|| fail("gamma"))?;
        let z = Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let shape = SpdMatrix2::scaled_identity(g * g).map_err(|_| fail("gamma"))?;
        cfg.initial_estimate = Ellipsoid::new(target + z * g, shape);

        let (lo, hi) = draw_until(&mut rng, r.max_attempts, |rng| {
            let (lo, hi) = (r_min.sample(rng), r_max.sample(rng));
            (lo > 0.0 && lo < hi).then_some((lo, hi))
        })
        .ok_or_else(|| fail("range band"))?;
        let s = draw_until(&mut rng, r.max_attempts, |rng| {
            Some(sigma.sample(rng)).filter(|s| *s > 0.0 && *s < 90.0)
        })
        .ok_or_else(|| fail("sigma"))?;
        cfg.sensor = SensorParams::new(cfg.sensor.pose(), lo, hi, s).map_err(|_| fail("sensor"))?;
    }
    Ok(scenario)
}

/// Simulation seed of run `run`.
pub fn run_seed(root_seed: u64, run: u64) -> u64 {
    substream(root_seed, Stream::RunSeed, run).random()
}

fn one_run(
    mc: &MonteCarloConfig,
    root_seed: u64,
    run: u64,
) -> Result<Vec<FinalError>, MonteCarloError> {
    let scenario = draw_run(mc, root_seed, run)?;
    let seed = run_seed(root_seed, run);
    let mut out = Vec::with_capacity(mc.base.methods.len() * scenario.agents.len());
    for &method in &mc.base.methods {
        let log = run_scenario(&scenario, method, seed, run)
            .map_err(|source| MonteCarloError::Simulation { run, source })?;
        out.extend(log.final_records().map(|rec| FinalError {
            run_id: run,
            method,
            agent_id: rec.agent_id,
            final_err_m: rec.err_m,
            noise_checksum: log.noise_checksum,
        }));
    }
    Ok(out)
}

/// Builds per-(method, agent) summaries from final errors. Histograms of one
/// agent share edges `[0, max]` across methods so they can be overlaid.
pub fn summarize(
    finals: &[FinalError],
    methods: &[RunMethod],
    agents: usize,
    bins: usize,
) -> Vec<SummaryRecord> {
    let values = |m: RunMethod, a: usize| -> Vec<f64> {
        finals
            .iter()
            .filter(|f| f.method == m && f.agent_id == a)
            .map(|f| f.final_err_m)
            .collect()
    };
    let edges: Vec<Vec<f64>> = (0..agents)
        .map(|a| {
            let max = finals
                .iter()
                .filter(|f| f.agent_id == a)
                .map(|f| f.final_err_m)
                .fold(0.0, f64::max);
            histogram_edges(max, bins)
        })
        .collect();
    let mut out = Vec::new();
    for &method in methods {
        for (agent, edges) in edges.iter().enumerate() {
            let v = values(method, agent);
            if v.is_empty() {
                continue;
            }
            out.push(SummaryRecord {
                method,
                agent_id: agent,
                stats: Stats::of(&v),
                counts: histogram_counts(&v, edges),
                edges: edges.clone(),
            });
        }
    }
    out
}

/// Runs all `mc.runs` repetitions on a pool of `threads` workers. Output
/// does not depend on `threads`.
pub fn run_montecarlo(
    mc: &MonteCarloConfig,
    root_seed: u64,
    threads: usize,
) -> Result<MonteCarloResult, MonteCarloError> {
    mc.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| MonteCarloError::Pool(e.to_string()))?;
    let per_run: Vec<Vec<FinalError>> = pool.install(|| {
        (0..mc.runs)
            .into_par_iter()
            .map(|run| one_run(mc, root_seed, run))
            .collect::<Result<_, _>>()
    })?;
    let finals: Vec<FinalError> = per_run.into_iter().flatten().collect();
    let summaries = summarize(
        &finals,
        &mc.base.methods,
        mc.base.agents.len(),
        mc.histogram_bins,
    );
    Ok(MonteCarloResult { finals, summaries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, LoadedConfig};

    fn config(runs: u64) -> MonteCarloConfig {
        let text = format!(
            r#"{{
            "base": {{
                "target": [10, -12],
                "agents": [
                    {{"initial_estimate": {{"center": [2, -1], "shape": [[36, 0], [0, 36]]}},
                     "sensor": {{"pose": [-15, 0], "r_min": 2, "r_max": 70, "sigma_deg": 12}}}},
                    {{"initial_estimate": {{"center": [2, -1], "shape": [[36, 0], [0, 36]]}},
                     "sensor": {{"pose": [8, 15], "r_min": 2, "r_max": 70, "sigma_deg": 10}}}}
                ],
                "steps": 30
            }},
            "runs": {runs},
            "histogram_bins": 7
        }}"#
        );
        match parse_config(&text).unwrap() {
            LoadedConfig::MonteCarlo(mc) => mc,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn draws_respect_sensor_invariants() {
        let mc = config(1);
        for run in 0..200 {
            let sc = draw_run(&mc, 5, run).unwrap();
            for (a, base) in sc.agents.iter().zip(&mc.base.agents) {
                let s = &a.sensor;
                assert!(s.r_min() > 0.0 && s.r_min() < s.r_max());
                assert!(s.sigma_deg() > 0.0 && s.sigma_deg() < 90.0);
                assert_eq!(s.pose(), base.sensor.pose());
                let p = a.initial_estimate.shape;
                assert_eq!(p.xy(), 0.0);
                assert_eq!(p.xx(), p.yy());
            }
        }
    }

    #[test]
    fn impossible_distribution_hits_the_cap() {
        let mut mc = config(1);
        mc.randomization.gamma = NormalParams::new(-1e6, 1.0);
        mc.randomization.max_attempts = 5;
        assert!(matches!(
            draw_run(&mc, 0, 0),
            Err(MonteCarloError::Rejection { what: "gamma", .. })
        ));
    }

    #[test]
    fn single_run_gives_one_summary_per_method_and_agent() {
        let mc = config(1);
        let res = run_montecarlo(&mc, 9, 1).unwrap();
        assert_eq!(res.summaries.len(), 5 * 2);
        assert!(res
            .summaries
            .iter()
            .all(|s| s.counts.iter().sum::<u64>() == 1));
        assert_eq!(res.finals.len(), 5 * 2);
    }

    #[test]
    fn methods_in_a_run_share_noise_and_thread_count_is_irrelevant() {
        let mc = config(12);
        let one = run_montecarlo(&mc, 3, 1).unwrap();
        let four = run_montecarlo(&mc, 3, 4).unwrap();
        assert_eq!(one.finals, four.finals);
        assert_eq!(one.summaries, four.summaries);
        for run in 0..12 {
            let sums: Vec<u64> = one
                .finals
                .iter()
                .filter(|f| f.run_id == run)
                .map(|f| f.noise_checksum)
                .collect();
            assert!(sums.windows(2).all(|w| w[0] == w[1]));
        }
        for s in &one.summaries {
            assert_eq!(s.counts.iter().sum::<u64>(), 12);
        }
    }
}
