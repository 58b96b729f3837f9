//! Run pipelines behind the CLI: single reductions and seeded basin sweeps.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::error_analysis::{self, ErrorZeroReport};
use crate::fixpoint::{self, FixedPointCertificate, Verdict};
use crate::h2::{self, H2ErrorReport};
use crate::irka::{self, InitStrategy, IrkaConfig, IterationTrace};
use crate::lti::{classify, Classification, StateSpaceSystem};
use crate::projection::ShiftSet;

pub const REPORT_VERSION: u32 = 1;
/// Relative shift-set distance under which two fixed points are the same cluster.
pub const CLUSTER_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertifyMode {
    Auto,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub irka: IrkaConfig,
    pub seed: u64,
    pub certify: CertifyMode,
}

impl RunConfig {
    pub fn new(r: usize) -> Self {
        RunConfig {
            irka: IrkaConfig::new(r),
            seed: 0,
            certify: CertifyMode::Auto,
        }
    }
}

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub report_version: u32,
    pub input_digest: String,
    pub classification: Classification,
    pub config: RunConfig,
    pub initial_shifts: ShiftSet,
    pub trace: IterationTrace,
    pub h2: H2ErrorReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<FixedPointCertificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_zeros: Option<ErrorZeroReport>,
    pub notes: Vec<String>,
    /// Per-phase wall-clock milliseconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        text.push('\n');
        text
    }
}

struct Clock {
    enabled: bool,
    phases: BTreeMap<String, f64>,
}

impl Clock {
    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if self.enabled {
            self.phases
                .insert(phase.to_string(), start.elapsed().as_secs_f64() * 1e3);
        }
        out
    }
}

fn check_order(sys: &StateSpaceSystem, r: usize) -> Result<()> {
    if r == 0 || r >= sys.order() {
        return Err(Error::invalid(
            "r",
            format!("r must be < n (r = {r}, n = {})", sys.order()),
        ));
    }
    Ok(())
}

/// Initial shifts -> IRKA -> H2 error -> (SSS and converged) certificate and error zeros.
///
/// A run that exhausts its sweeps still yields a report; check `trace.converged`.
pub fn run_reduce(
    sys: &StateSpaceSystem,
    input: &[u8],
    cfg: &RunConfig,
    timings: bool,
) -> Result<RunReport> {
    check_order(sys, cfg.irka.r)?;
    let mut clock = Clock {
        enabled: timings,
        phases: BTreeMap::new(),
    };
    let classification = clock.time("classify", || classify(sys));
    if !classification.stable {
        let eigenvalue = sys
            .unstable_eigenvalue()?
            .unwrap_or(num_complex::Complex64::new(f64::NAN, 0.0));
        return Err(Error::UnstableSystem { eigenvalue });
    }
    let initial_shifts = irka::initial_shifts(sys, cfg.irka.r, cfg.irka.init, cfg.seed)?;
    let trace = clock.time("irka", || irka::run_irka(sys, &cfg.irka, &initial_shifts))?;
    let h2 = clock.time("h2", || h2::h2_error(sys, &trace.final_model))?;
    let mut notes = Vec::new();
    if !trace.converged {
        notes.push(format!(
            "not converged after {} sweeps (last change {:.3e})",
            trace.sweeps.len(),
            trace.last_change()
        ));
    }
    if h2.pole_collision {
        notes.push("a reduced pole coincides with a full pole; pole-residue route skipped".into());
    }
    if h2.frequency_refined {
        notes.push("Gramian error terms cancel to roundoff; error norm from frequency-domain integration".into());
    }
    let mut certificate = None;
    let mut error_zeros = None;
    let wanted = cfg.certify == CertifyMode::Auto && trace.converged;
    if wanted && !classification.sss {
        notes.push("certification skipped: system is not SSS".into());
    } else if wanted {
        match clock.time("certify", || fixpoint::certify(sys, &trace.final_model)) {
            Ok(cert) => {
                notes.extend(cert.warnings.iter().cloned());
                certificate = Some(cert);
            }
            Err(e) => notes.push(format!("certification failed: {e}")),
        }
        match clock.time("error_zeros", || {
            error_analysis::error_zeros(sys, &trace.final_model)
        }) {
            Ok(z) => error_zeros = Some(z),
            Err(e) => notes.push(format!("error zeros unavailable: {e}")),
        }
    }
    Ok(RunReport {
        report_version: REPORT_VERSION,
        input_digest: digest(input),
        classification,
        config: cfg.clone(),
        initial_shifts,
        trace,
        h2,
        certificate,
        error_zeros,
        notes,
        timings: timings.then_some(clock.phases),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub index: usize,
    pub seed: u64,
    pub converged: bool,
    pub sweeps: usize,
    pub final_shifts: Option<ShiftSet>,
    #[serde(rename = "cost_J")]
    pub cost_j: Option<f64>,
    pub cluster: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCluster {
    pub cluster: usize,
    pub shifts: ShiftSet,
    pub runs: usize,
    pub basin_share: f64,
    #[serde(rename = "cost_J")]
    pub cost_j: f64,
    pub spectral_radius: Option<f64>,
    pub verdict: Option<Verdict>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub report_version: u32,
    pub input_digest: String,
    pub config: RunConfig,
    pub count: usize,
    pub runs: Vec<SweepRun>,
    pub clusters: Vec<SweepCluster>,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        text.push('\n');
        text
    }

    /// `cluster,basin_share,spectral_radius,cost_j,verdict,runs`
    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["cluster", "basin_share", "spectral_radius", "cost_j", "verdict", "runs"])
            .expect("in-memory write");
        for c in &self.clusters {
            let verdict = c
                .verdict
                .map(|v| serde_json::to_value(v).expect("verdict").as_str().unwrap_or("").to_string())
                .unwrap_or_default();
            w.write_record([
                c.cluster.to_string(),
                c.basin_share.to_string(),
                c.spectral_radius.map(|v| v.to_string()).unwrap_or_default(),
                c.cost_j.to_string(),
                verdict,
                c.runs.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

/// Per-run seeds drawn from the master seed, independent of scheduling.
pub fn run_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..count).map(|_| rng.random()).collect()
}

fn shift_distance(a: &ShiftSet, b: &ShiftSet) -> f64 {
    a.relative_change_from(b)
}

/// `count` IRKA runs from seeded log-uniform starts, clustered by final shift set.
pub fn basin_sweep(
    sys: &StateSpaceSystem,
    input: &[u8],
    cfg: &RunConfig,
    count: usize,
    jobs: usize,
) -> Result<SweepReport> {
    check_order(sys, cfg.irka.r)?;
    if !sys.is_sss() {
        return Err(Error::NotSss("basin sweeps require an SSS system".into()));
    }
    let seeds = run_seeds(cfg.seed, count);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))?;
    let irka_cfg = IrkaConfig {
        init: InitStrategy::RandomLoguniform,
        ..cfg.irka.clone()
    };
    let outcomes: Vec<Result<(IterationTrace, f64)>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let s0 = irka::initial_shifts(sys, irka_cfg.r, InitStrategy::RandomLoguniform, seed)?;
                let trace = irka::run_irka(sys, &irka_cfg, &s0)?;
                let cost = h2::h2_error(sys, &trace.final_model)?.cost_j;
                Ok((trace, cost))
            })
            .collect()
    });

    let mut runs = Vec::with_capacity(count);
    let mut reps: Vec<(ShiftSet, StateSpaceSystem, f64, usize)> = Vec::new();
    for (index, (outcome, &seed)) in outcomes.into_iter().zip(&seeds).enumerate() {
        let run = match outcome {
            Ok((trace, cost)) => {
                let cluster = trace.converged.then(|| {
                    match reps
                        .iter()
                        .position(|rep| shift_distance(&trace.final_shifts, &rep.0) <= CLUSTER_DISTANCE)
                    {
                        Some(k) => {
                            reps[k].3 += 1;
                            k
                        }
                        None => {
                            reps.push((trace.final_shifts.clone(), trace.final_model.clone(), cost, 1));
                            reps.len() - 1
                        }
                    }
                });
                SweepRun {
                    index,
                    seed,
                    converged: trace.converged,
                    sweeps: trace.sweeps.len(),
                    final_shifts: Some(trace.final_shifts),
                    cost_j: Some(cost),
                    cluster,
                    error: None,
                }
            }
            Err(e) => SweepRun {
                index,
                seed,
                converged: false,
                sweeps: 0,
                final_shifts: None,
                cost_j: None,
                cluster: None,
                error: Some(e.to_string()),
            },
        };
        runs.push(run);
    }

    let clusters = pool.install(|| {
        reps.par_iter()
            .enumerate()
            .map(|(k, (shifts, model, cost, members))| {
                let (spectral_radius, verdict, note) = if cfg.certify == CertifyMode::Off {
                    (None, None, None)
                } else {
                    match fixpoint::certify(sys, model) {
                        Ok(c) => (Some(c.spectral_radius), Some(c.verdict), c.warnings.first().cloned()),
                        Err(e) => (None, None, Some(e.to_string())),
                    }
                };
                SweepCluster {
                    cluster: k,
                    shifts: shifts.clone(),
                    runs: *members,
                    basin_share: *members as f64 / count as f64,
                    cost_j: *cost,
                    spectral_radius,
                    verdict,
                    note,
                }
            })
            .collect()
    });
    Ok(SweepReport {
        report_version: REPORT_VERSION,
        input_digest: digest(input),
        config: RunConfig {
            irka: irka_cfg,
            ..cfg.clone()
        },
        count,
        runs,
        clusters,
    })
}
