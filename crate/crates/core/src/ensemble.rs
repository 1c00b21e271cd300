//! Seeded, parallel, resumable disorder ensembles.
//!
//! A kernel maps a realization index to a fixed-length observation vector.
//! Indices are evaluated in parallel chunks and reduced strictly in index
//! order, so results do not depend on the worker count.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "CC_CRITICAL_WORKERS";

/// Worker count from the environment, falling back to `default`.
pub fn workers_from_env(default: usize) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(default)
}

/// Streaming mean and second central moment with a compensated mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
    comp: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        let step = delta / self.n as f64;
        // Kahan-compensated update of the mean
        let y = step - self.comp;
        let t = self.mean + y;
        self.comp = (t - self.mean) - y;
        self.mean = t;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan's parallel merge.
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * (other.n as f64 / n as f64);
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64 / n as f64);
        self.mean = mean;
        self.comp = 0.0;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// `sqrt(M2 / (n (n − 1)))`.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            (self.m2 / (self.n as f64 * (self.n - 1) as f64)).sqrt()
        }
    }
}

/// Per-key statistics plus means over consecutive index batches (for
/// bootstrap resampling).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub keys: Vec<String>,
    pub stats: Vec<Welford>,
    pub batch_size: u64,
    /// Means of completed batches, `[batch][key]`.
    pub batches: Vec<Vec<f64>>,
    current: Vec<Welford>,
    current_batch: u64,
    /// Realization indices whose kernel failed numerically.
    pub skipped: Vec<u64>,
    /// All indices below this have been reduced.
    pub completed: u64,
}

impl Accumulator {
    pub fn new(keys: Vec<String>, batch_size: u64) -> Self {
        let n = keys.len();
        Accumulator {
            keys,
            stats: vec![Welford::default(); n],
            batch_size: batch_size.max(1),
            batches: Vec::new(),
            current: vec![Welford::default(); n],
            current_batch: 0,
            skipped: Vec::new(),
            completed: 0,
        }
    }

    fn close_batch(&mut self) {
        if self.current.iter().any(|w| w.n > 0) {
            self.batches.push(self.current.iter().map(|w| w.mean).collect());
        }
        for w in self.current.iter_mut() {
            *w = Welford::default();
        }
    }

    /// Reduces the result of realization `index`; indices must arrive in
    /// increasing order.
    pub fn record(&mut self, index: u64, result: Result<Vec<f64>>) -> Result<()> {
        if index != self.completed {
            return Err(Error::Parameter(format!(
                "out-of-order reduction: got index {index}, expected {}",
                self.completed
            )));
        }
        let batch = index / self.batch_size;
        if batch != self.current_batch {
            self.close_batch();
            self.current_batch = batch;
        }
        match result {
            Ok(v) => {
                if v.len() != self.keys.len() {
                    return Err(Error::Parameter(format!(
                        "kernel returned {} values for {} keys",
                        v.len(),
                        self.keys.len()
                    )));
                }
                for ((s, c), x) in self.stats.iter_mut().zip(self.current.iter_mut()).zip(v) {
                    s.push(x);
                    c.push(x);
                }
            }
            Err(e) if e.is_numerical() => {
                log::warn!("realization {index} skipped: {e}");
                self.skipped.push(index);
            }
            Err(e) => return Err(e),
        }
        self.completed += 1;
        Ok(())
    }

    /// Closes the current batch once it is full or the run is complete.
    fn finish(&mut self, total: u64) {
        if self.completed.is_multiple_of(self.batch_size) || self.completed == total {
            self.close_batch();
            self.current_batch = self.completed / self.batch_size;
        }
    }

    pub fn get(&self, key: &str) -> Option<&Welford> {
        self.keys.iter().position(|k| k == key).map(|i| &self.stats[i])
    }

    pub fn mean(&self, key: &str) -> Option<f64> {
        self.get(key).map(|w| w.mean)
    }

    pub fn skipped_fraction(&self) -> f64 {
        if self.completed == 0 {
            0.0
        } else {
            self.skipped.len() as f64 / self.completed as f64
        }
    }
}

/// Everything that determines an ensemble's output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub seed: u64,
    pub samples: u64,
    pub batch_size: u64,
    /// Geometry, parameters, regularization and observable selection.
    pub descriptor: serde_json::Value,
    /// Not part of the identity of the run.
    #[serde(skip)]
    pub workers: usize,
}

impl EnsembleConfig {
    pub fn new(seed: u64, samples: u64, descriptor: serde_json::Value) -> Self {
        EnsembleConfig {
            seed,
            samples,
            batch_size: (samples / 50).max(1),
            descriptor,
            workers: workers_from_env(rayon::current_num_threads()),
        }
    }

    /// SHA-256 of the canonical JSON of seed, sample count, batching and descriptor.
    pub fn hash(&self) -> String {
        let canonical = serde_json::json!({
            "seed": self.seed,
            "samples": self.samples,
            "batch_size": self.batch_size,
            "descriptor": self.descriptor,
        });
        hex(&Sha256::digest(canonical.to_string().as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs indices `acc.completed .. until` and reduces them in order.
pub fn run_range<K>(config: &EnsembleConfig, acc: &mut Accumulator, until: u64, kernel: &K) -> Result<()>
where
    K: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    let until = until.min(config.samples);
    let workers = config.workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    let chunk = (workers as u64 * 8).max(16);
    while acc.completed < until {
        let start = acc.completed;
        let end = (start + chunk).min(until);
        let results: Vec<Result<Vec<f64>>> = pool.install(|| (start..end).into_par_iter().map(kernel).collect());
        for (i, r) in (start..end).zip(results) {
            acc.record(i, r)?;
        }
    }
    acc.finish(config.samples);
    Ok(())
}

/// Runs the full ensemble, optionally checkpointing to `checkpoint` every
/// `every` realizations and resuming from it if present.
pub fn run_ensemble<K>(
    config: &EnsembleConfig,
    keys: Vec<String>,
    kernel: K,
    checkpoint: Option<&Path>,
    every: u64,
) -> Result<Accumulator>
where
    K: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    let mut acc = match checkpoint {
        Some(p) if p.exists() => {
            let acc = resume(p, config)?;
            if acc.keys != keys {
                return Err(Error::Integrity("checkpoint keys differ from the requested observables".into()));
            }
            acc
        }
        _ => Accumulator::new(keys, config.batch_size),
    };
    let step = if checkpoint.is_some() { every.max(1) } else { config.samples.max(1) };
    while acc.completed < config.samples {
        let until = (acc.completed + step).min(config.samples);
        run_range(config, &mut acc, until, &kernel)?;
        if let Some(p) = checkpoint {
            persist(p, config, &acc)?;
        }
    }
    if acc.skipped_fraction() > 1e-3 {
        log::warn!(
            "{} of {} realizations skipped",
            acc.skipped.len(),
            acc.completed
        );
    }
    Ok(acc)
}

#[derive(Serialize, Deserialize)]
struct Payload {
    version: u32,
    config_hash: String,
    seed: u64,
    samples: u64,
    accumulator: Accumulator,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    payload: serde_json::Value,
    checksum: String,
}

/// Writes the accumulator state with its config hash and a payload checksum.
pub fn persist(path: &Path, config: &EnsembleConfig, acc: &Accumulator) -> Result<()> {
    let payload = serde_json::to_value(Payload {
        version: 1,
        config_hash: config.hash(),
        seed: config.seed,
        samples: config.samples,
        accumulator: acc.clone(),
    })?;
    let checksum = hex(&Sha256::digest(payload.to_string().as_bytes()));
    let text = serde_json::to_string_pretty(&CheckpointFile { payload, checksum })?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads a checkpoint, refusing corrupted files and foreign configurations.
pub fn resume(path: &Path, config: &EnsembleConfig) -> Result<Accumulator> {
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile =
        serde_json::from_str(&text).map_err(|e| Error::Integrity(format!("unreadable checkpoint: {e}")))?;
    let checksum = hex(&Sha256::digest(file.payload.to_string().as_bytes()));
    if checksum != file.checksum {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    let payload: Payload =
        serde_json::from_value(file.payload).map_err(|e| Error::Integrity(format!("malformed payload: {e}")))?;
    let expected = config.hash();
    if payload.config_hash != expected {
        return Err(Error::ConfigMismatch {
            expected,
            found: payload.config_hash,
        });
    }
    Ok(payload.accumulator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::phase_at;

    fn config(samples: u64, workers: usize) -> EnsembleConfig {
        EnsembleConfig {
            workers,
            ..EnsembleConfig::new(17, samples, serde_json::json!({"kind": "test"}))
        }
    }

    fn cos_kernel(i: u64) -> Result<Vec<f64>> {
        let p = phase_at(17, i, 0);
        Ok(vec![p.cos(), p.sin(), 2.5])
    }

    fn keys() -> Vec<String> {
        vec!["cos".into(), "sin".into(), "const".into()]
    }

    #[test]
    fn constant_and_symmetric_kernels() {
        let acc = run_ensemble(&config(10_000, 2), keys(), cos_kernel, None, 0).unwrap();
        let c = acc.get("const").unwrap();
        assert_eq!(c.mean, 2.5);
        assert_eq!(c.m2, 0.0);
        let w = acc.get("cos").unwrap();
        assert!(w.mean.abs() < 4.0 * w.stderr());
        assert_eq!(acc.batches.len(), 50);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let a = run_ensemble(&config(3000, 1), keys(), cos_kernel, None, 0).unwrap();
        let b = run_ensemble(&config(3000, 8), keys(), cos_kernel, None, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.3 - 7.0).collect();
        let mut all = Welford::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Welford::default();
        let mut b = Welford::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.n, all.n);
        assert!((a.mean - all.mean).abs() <= 1e-12 * all.mean.abs());
        assert!((a.m2 - all.m2).abs() <= 1e-12 * all.m2);
    }

    #[test]
    fn numerical_failures_are_skipped() {
        let k = |i: u64| {
            if i % 100 == 7 {
                Err(Error::Singular("resonance".into()))
            } else {
                Ok(vec![1.0])
            }
        };
        let acc = run_ensemble(&config(1000, 2), vec!["x".into()], k, None, 0).unwrap();
        assert_eq!(acc.skipped.len(), 10);
        assert_eq!(acc.get("x").unwrap().n, 990);
        let bad = |_: u64| Err(Error::Parameter("bad".into()));
        assert!(run_ensemble(&config(10, 1), vec!["x".into()], bad, None, 0).is_err());
    }

    #[test]
    fn checkpoint_resume_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let cfg = config(2000, 2);
        let straight = run_ensemble(&cfg, keys(), cos_kernel, None, 0).unwrap();
        // interrupt at 50%
        let mut half = Accumulator::new(keys(), cfg.batch_size);
        run_range(&cfg, &mut half, 1000, &cos_kernel).unwrap();
        persist(&path, &cfg, &half).unwrap();
        let resumed = run_ensemble(&cfg, keys(), cos_kernel, Some(&path), 300).unwrap();
        assert_eq!(resumed, straight);
        assert_eq!(resumed.get("cos").unwrap().stderr(), straight.get("cos").unwrap().stderr());
    }

    #[test]
    fn checkpoint_guards() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let cfg = config(100, 1);
        let mut acc = Accumulator::new(keys(), cfg.batch_size);
        run_range(&cfg, &mut acc, 50, &cos_kernel).unwrap();
        persist(&path, &cfg, &acc).unwrap();
        let other = EnsembleConfig { seed: 18, ..cfg.clone() };
        assert!(matches!(resume(&path, &other), Err(Error::ConfigMismatch { .. })));
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replacen("\"n\": 50", "\"n\": 51", 1)).unwrap();
        assert!(matches!(resume(&path, &cfg), Err(Error::Integrity(_))));
        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(resume(&path, &cfg), Err(Error::Integrity(_))));
    }
}
