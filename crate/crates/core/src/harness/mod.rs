//! Monte-Carlo experiment runner.
//!
//! Every (agent, run) pair is simulated independently. Random streams are
//! derived from `(base_seed, label, run)` by hashing, never from a shared
//! generator, so traces do not depend on thread count or scheduling and
//! dropping runs leaves the others untouched. The channel trajectory and the
//! uniforms behind each ACK draw are keyed by run only, so within a run every
//! agent faces the same channel and the same decoding luck.

mod summary;
mod trace;

use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::Rng;

pub use summary::{compare_matched, compare_within, summarize, AgentSummary, RatioReport, Summary};
pub use trace::{read_traces, write_traces, TraceRecord};

use crate::agents::{AgentFactory, LinkAgent, LinkModel};
use crate::channel::{self, generate_cqi, ChannelRealization, CqiReport};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::mcs::McsTable;
use crate::olm::Olm;
use crate::seed::StreamKey;

/// Genie throughput: the best `r_m * G(m, theta)` at the true SINR.
pub fn oracle_throughput(truth: &Olm, table: &McsTable, theta_db: f64) -> f64 {
    truth.best_throughput(table, theta_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Runs spread over a thread pool; `None` uses rayon's default size.
    #[default]
    Parallel,
    ParallelThreads(usize),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub execution: Execution,
    /// Keep the belief of every belief-tracking agent after each TTI of run 0.
    pub dump_pmf: bool,
    /// When raised, runs that have not started yet are skipped.
    pub cancel: Option<Arc<AtomicBool>>,
}

/// Belief snapshots of one agent in run 0, one row of probabilities per TTI.
#[derive(Debug, Clone, PartialEq)]
pub struct PmfDump {
    pub agent: String,
    pub centers: Vec<f64>,
    pub probs_per_tti: Vec<Vec<f64>>,
}

impl PmfDump {
    /// CSV `tti,bin,prob` with 1-based TTIs and 0-based bins.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["tti", "bin", "prob"])?;
        for (t, probs) in self.probs_per_tti.iter().enumerate() {
            for (k, p) in probs.iter().enumerate() {
                w.write_record([(t + 1).to_string(), k.to_string(), p.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Ordered by agent (config order), then run, then TTI.
    pub traces: Vec<TraceRecord>,
    pub summary: Summary,
    pub pmf_dumps: Vec<PmfDump>,
    /// Runs that completed; fewer than `num_runs` only after cancellation.
    pub completed_runs: Vec<usize>,
}

/// Everything shared by the runs of one experiment.
pub struct Experiment {
    config: ExperimentConfig,
    truth: Olm,
    link: Arc<LinkModel>,
    factories: Vec<(String, AgentFactory)>,
}

struct RunResult {
    run: usize,
    per_agent: Vec<Vec<TraceRecord>>,
    oracle: Vec<f64>,
    collapses: Vec<u64>,
    pmf: Vec<PmfDump>,
}

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let config = config.resolved()?;
        config.validate()?;
        let (truth, link) = config.olm.build()?;
        let link = Arc::new(link);
        let gamma = config.scenario.normalized_doppler();
        let factories = config
            .agents
            .iter()
            .map(|a| Ok((a.name.clone(), AgentFactory::new(a, &link, gamma)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            truth,
            link,
            factories,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn truth(&self) -> &Olm {
        &self.truth
    }

    pub fn link(&self) -> &LinkModel {
        &self.link
    }

    pub fn factory(&self, agent: &str) -> Option<&AgentFactory> {
        self.factories.iter().find(|(n, _)| n == agent).map(|(_, f)| f)
    }

    /// The channel trajectory every agent sees in `run`.
    pub fn channel(&self, run: usize) -> Result<ChannelRealization> {
        let mut rng = StreamKey::new(self.config.base_seed)
            .with_str("channel")
            .with_u64(run as u64)
            .rng();
        channel::realize(&self.config.scenario, self.config.num_ttis, &mut rng)
    }

    pub fn run(&self, options: &RunOptions) -> Result<ExperimentOutput> {
        let runs: Vec<usize> = (0..self.config.num_runs).collect();
        self.run_subset(&runs, options)
    }

    /// Simulates only the listed runs.
    pub fn run_subset(&self, runs: &[usize], options: &RunOptions) -> Result<ExperimentOutput> {
        let results = self.execute(runs, options)?;
        Ok(self.assemble(results))
    }

    fn execute(&self, runs: &[usize], options: &RunOptions) -> Result<Vec<RunResult>> {
        let job = |run: usize| -> Option<Result<RunResult>> {
            if options.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed)) {
                return None;
            }
            Some(self.simulate_run(run, options.dump_pmf && run == 0))
        };
        let collected: Vec<Option<Result<RunResult>>> = match options.execution {
            Execution::Sequential => runs.iter().map(|&r| job(r)).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                runs.par_iter().map(|&r| job(r)).collect()
            }
            #[cfg(feature = "parallel")]
            Execution::ParallelThreads(n) => {
                use rayon::prelude::*;
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| crate::Error::invalid("parallel", e.to_string()))?;
                pool.install(|| runs.par_iter().map(|&r| job(r)).collect())
            }
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel | Execution::ParallelThreads(_) => runs.iter().map(|&r| job(r)).collect(),
        };
        collected.into_iter().flatten().collect()
    }

    /// One independent link: channel draw plus every agent on it.
    fn simulate_run(&self, run: usize, keep_beliefs: bool) -> Result<RunResult> {
        let cfg = &self.config;
        let t_max = cfg.num_ttis;
        let key = StreamKey::new(cfg.base_seed);
        let chan = self.channel(run)?;
        let mut ack_rng = key.with_str("ack").with_u64(run as u64).rng();
        let ack_uniforms: Vec<f64> = (0..t_max).map(|_| ack_rng.random::<f64>()).collect();
        let table = &self.link.table;

        let oracle: Vec<f64> = (0..t_max)
            .map(|t| oracle_throughput(&self.truth, table, chan.theta_eff_db(t)))
            .collect();

        let mut per_agent = Vec::with_capacity(self.factories.len());
        let mut collapses = Vec::with_capacity(self.factories.len());
        let mut pmf = Vec::new();
        for (name, factory) in &self.factories {
            let mut rng = key.with_str("agent").with_str(name).with_u64(run as u64).rng();
            let mut agent = factory.build(&mut rng);
            let mut dump = None;
            let mut records = Vec::with_capacity(t_max);
            let mut pending_cqi: VecDeque<CqiReport> = VecDeque::new();
            let mut pending_ack: VecDeque<(usize, usize, bool)> = VecDeque::new();
            #[allow(clippy::needless_range_loop)]
            for t in 0..t_max {
                let tti = t + 1;
                let theta = chan.theta_eff_db(t);
                if let Some(cqi) = &cfg.cqi {
                    if tti % cqi.period_ttis == 0 {
                        pending_cqi.push_back(generate_cqi(&self.truth, table, theta, tti, cqi.delay_ttis));
                    }
                    while pending_cqi.front().is_some_and(|r| r.available_at <= tti) {
                        let report = pending_cqi.pop_front().expect("checked");
                        agent.on_cqi(&report);
                    }
                }
                let proposal = agent.propose(&mut rng);
                let p = self.truth.lookup(proposal.mcs, theta);
                let ack = channel::ack_from_uniform(p, ack_uniforms[t]);
                records.push(TraceRecord {
                    agent: name.clone(),
                    run,
                    tti,
                    mcs: proposal.mcs,
                    ack,
                    throughput: if ack { table.rate(proposal.mcs) } else { 0.0 },
                    theta_hat_db: proposal.theta_hat_db,
                    theta_true_db: theta,
                });
                pending_ack.push_back((tti + cfg.feedback_delay_ttis, proposal.mcs, ack));
                deliver(agent.as_mut(), &mut pending_ack, tti);
                if keep_beliefs {
                    if let Some(belief) = agent.belief() {
                        let d = dump.get_or_insert_with(|| PmfDump {
                            agent: name.clone(),
                            centers: belief.centers().to_vec(),
                            probs_per_tti: Vec::with_capacity(t_max),
                        });
                        d.probs_per_tti.push(belief.probs().to_vec());
                    }
                }
            }
            per_agent.push(records);
            collapses.push(agent.belief_collapses());
            pmf.extend(dump);
        }
        Ok(RunResult {
            run,
            per_agent,
            oracle,
            collapses,
            pmf,
        })
    }

    fn assemble(&self, mut results: Vec<RunResult>) -> ExperimentOutput {
        results.sort_by_key(|r| r.run);
        let n_agents = self.factories.len();
        let t_max = self.config.num_ttis;
        let total: usize = results.iter().map(|r| r.per_agent.iter().map(Vec::len).sum::<usize>()).sum();
        let mut traces = Vec::with_capacity(total);
        for a in 0..n_agents {
            for r in &results {
                traces.extend_from_slice(&r.per_agent[a]);
            }
        }
        let mut oracle = vec![0.0; t_max];
        for r in &results {
            oracle.iter_mut().zip(&r.oracle).for_each(|(o, v)| *o += v);
        }
        let n = results.len().max(1) as f64;
        oracle.iter_mut().for_each(|o| *o /= n);
        let mut belief_collapses = BTreeMap::new();
        for (a, (name, factory)) in self.factories.iter().enumerate() {
            if matches!(factory, AgentFactory::Ltsla { .. }) {
                belief_collapses.insert(name.clone(), results.iter().map(|r| r.collapses[a]).sum());
            }
        }
        let agents = summarize(&traces, self.link.table.len());
        let completed_runs = results.iter().map(|r| r.run).collect();
        let pmf_dumps = results.iter_mut().flat_map(|r| std::mem::take(&mut r.pmf)).collect();
        ExperimentOutput {
            summary: Summary {
                num_runs: results.len(),
                num_ttis: t_max,
                agents,
                oracle_throughput_per_tti: oracle,
                belief_collapses,
            },
            traces,
            pmf_dumps,
            completed_runs,
        }
    }
}

fn deliver(agent: &mut dyn LinkAgent, pending: &mut VecDeque<(usize, usize, bool)>, tti: usize) {
    while pending.front().is_some_and(|(due, _, _)| *due <= tti) {
        let (_, mcs, ack) = pending.pop_front().expect("checked");
        agent.observe(mcs, ack);
    }
}

/// Builds and runs an experiment in one call.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentOutput> {
    Experiment::new(config)?.run(options)
}
