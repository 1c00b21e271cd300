//! Ensemble runs shared by the command-line driver and the acceptance suite.
//! Each run is a serializable parameter set; the same set and seed always
//! reproduce the same numbers.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::{run_ensemble, Accumulator, EnsembleConfig};
use crate::error::{Error, Result};
use crate::evolution::{
    build_us, compose_t, compose_u, sample_disorder, twist_phases, DisorderRealization, Regularization, ScatteringParams,
};
use crate::greens::{point_contact_state, GreenFactorization, SymbolicPattern};
use crate::kernels::{
    conductance_cycles, decay_estimate, monotype_keys, monotype_values, monotype_worst, radial_profile, zz_estimate,
    CirculationLayout, DecayFit, DecayLayout, MomentLayout, ZzEstimate, ZzLayout,
};
use crate::lattice::{build_medial, LinkId, NetworkGeometry, Orientation, Topology};
use crate::observables::{check_window, conductance, fit_power_law, multifractal_spectrum, MultifractalFit, PowerLawFit};

fn params(beta: f64) -> Result<ScatteringParams<f64>> {
    ScatteringParams::new(beta)
}

fn square_torus(l: usize) -> Result<NetworkGeometry> {
    NetworkGeometry::new(l, l, Topology::Torus)
}

fn config<S: Serialize>(kind: &str, seed: u64, samples: u64, run: &S) -> Result<EnsembleConfig> {
    if samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    let mut d = serde_json::to_value(run)?;
    d["kind"] = serde_json::Value::from(kind);
    Ok(EnsembleConfig::new(seed, samples, d))
}

/// Link at the center of a torus, used as the default point contact.
pub fn center_link(geom: &NetworkGeometry) -> LinkId {
    geom.horizontal_link(geom.lx() as i64 / 2, geom.ly() as i64 / 2)
}

/// A point contact given by the tail node of its link and the link direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactSpec {
    pub x: i64,
    pub y: i64,
    pub dir: Orientation,
}

impl ContactSpec {
    /// Parses `"x,y,dir;x,y,dir;..."`, e.g. `"8,8,+x"`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(';')
            .filter(|t| !t.trim().is_empty())
            .map(|t| {
                let parts: Vec<&str> = t.split(',').map(str::trim).collect();
                let bad = || Error::Parameter(format!("contact `{t}` is not of the form x,y,dir"));
                if parts.len() != 3 {
                    return Err(bad());
                }
                Ok(ContactSpec {
                    x: parts[0].parse().map_err(|_| bad())?,
                    y: parts[1].parse().map_err(|_| bad())?,
                    dir: Orientation::parse(parts[2]).ok_or_else(bad)?,
                })
            })
            .collect()
    }

    pub fn resolve(&self, geom: &NetworkGeometry) -> Result<LinkId> {
        geom.link_from(self.x, self.y, self.dir)
    }
}

/// The contact link and the node around which observables are centered:
/// the head of the contact link.
fn contact_of(geom: &NetworkGeometry, spec: Option<ContactSpec>) -> Result<(LinkId, (i64, i64))> {
    let link = match spec {
        Some(c) => c.resolve(geom)?,
        None => center_link(geom),
    };
    let head = geom.link(link).head.ok_or_else(|| Error::Domain(format!("contact {link} is a terminal link")))?;
    let n = geom.node(head);
    Ok((link, (n.x as i64, n.y as i64)))
}

/// `Σzz` and `Υzz` on a translation-invariant absorbing torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZzRun {
    pub l: usize,
    pub beta: f64,
    pub mu: f64,
    pub seed: u64,
    pub samples: u64,
    /// Side of the node block whose edges act as sources.
    pub box_size: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub resamples: usize,
}

pub struct ZzOutput {
    pub layout: ZzLayout,
    pub acc: Accumulator,
    pub estimate: Result<ZzEstimate>,
}

pub fn run_zz(run: &ZzRun, checkpoint: Option<&Path>) -> Result<ZzOutput> {
    let g = square_torus(run.l)?;
    check_window(run.r_min, run.r_max, run.l)?;
    let m = build_medial(&g);
    let layout = ZzLayout::new(&g, &m, run.box_size.min(run.l), run.r_max)?;
    let us = build_us::<f64>(&g, &params(run.beta)?);
    let reg = Regularization::AbsorbingBackground { mu: run.mu };
    let pattern = SymbolicPattern::new(&compose_t(&us, &DisorderRealization::clean(g.n_links()), &reg)?)?;
    let cfg = config("sigma-scan", run.seed, run.samples, run)?;
    let acc = run_ensemble(
        &cfg,
        layout.keys(),
        |i| {
            let t = compose_t(&us, &sample_disorder(&g, run.seed, i), &reg)?;
            Ok(layout.evaluate(&GreenFactorization::factorize_with(&pattern, &t)?))
        },
        checkpoint,
        (run.samples / 10).max(1),
    )?;
    let estimate = zz_estimate(&layout, &acc, run.r_min, run.r_max, run.resamples, run.seed);
    Ok(ZzOutput { layout, acc, estimate })
}

/// Moments of point-contact states on a unitary torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultifractalRun {
    pub l: usize,
    pub beta: f64,
    pub seed: u64,
    pub samples: u64,
    pub q: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub resamples: usize,
    /// Defaults to the horizontal link east of the central node.
    pub contact: Option<ContactSpec>,
}

/// `q = −0.5, −0.25, …, 1.5`.
pub fn default_q_grid() -> Vec<f64> {
    (0..9).map(|k| -0.5 + 0.25 * k as f64).collect()
}

pub struct MultifractalOutput {
    pub layout: MomentLayout,
    pub acc: Accumulator,
    pub fit: Result<MultifractalFit>,
}

pub fn run_multifractal(run: &MultifractalRun, checkpoint: Option<&Path>) -> Result<MultifractalOutput> {
    let g = square_torus(run.l)?;
    check_window(run.r_min, run.r_max, run.l)?;
    if !run.q.iter().any(|&q| (q - 1.0).abs() < 1e-12) {
        return Err(Error::Parameter("the q grid must contain 1".into()));
    }
    let (contact, _) = contact_of(&g, run.contact)?;
    let layout = MomentLayout::new(&g, contact, run.q.clone(), run.r_min, run.r_max)?;
    let us = build_us::<f64>(&g, &params(run.beta)?);
    let cfg = config("multifractal", run.seed, run.samples, run)?;
    let acc = run_ensemble(
        &cfg,
        layout.keys(),
        |i| {
            let u = compose_u(&us, &sample_disorder(&g, run.seed, i))?;
            layout.evaluate(&point_contact_state(&u, contact)?)
        },
        checkpoint,
        (run.samples / 10).max(1),
    )?;
    let fit = multifractal_spectrum(&layout.batches(&acc), run.r_min, run.r_max, run.resamples, run.seed);
    Ok(MultifractalOutput { layout, acc, fit })
}

/// Kubo conductance between the rows `L/4` and `3L/4` of an `L × L` cylinder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConductanceRun {
    pub l: usize,
    pub beta: f64,
    pub seed: u64,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConductanceSummary {
    pub l: usize,
    pub mean: f64,
    pub stderr: f64,
    pub mean_imag: f64,
    pub samples: u64,
    pub skipped: usize,
}

pub fn run_conductance(run: &ConductanceRun, checkpoint: Option<&Path>) -> Result<ConductanceSummary> {
    let g = NetworkGeometry::new(run.l, run.l, Topology::CylinderX)?;
    let m = build_medial(&g);
    let (c1, c2) = conductance_cycles(&g)?;
    let us = build_us::<f64>(&g, &params(run.beta)?);
    let cfg = config("conductance", run.seed, run.samples, run)?;
    let acc = run_ensemble(
        &cfg,
        vec!["g".into(), "g_imag".into()],
        |i| {
            let t = compose_t(&us, &sample_disorder(&g, run.seed, i), &Regularization::None)?;
            let s = conductance(&g, &m, &t, &c1, &c2)?;
            Ok(vec![s.g, s.imag])
        },
        checkpoint,
        (run.samples / 10).max(1),
    )?;
    Ok(ConductanceSummary {
        l: run.l,
        mean: acc.stats[0].mean,
        stderr: acc.stats[0].stderr(),
        mean_imag: acc.stats[1].mean,
        samples: acc.stats[0].n,
        skipped: acc.skipped.len(),
    })
}

/// Circulation of the `|ψ_c|²` current around squares centered on the contact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CirculationRun {
    pub l: usize,
    pub beta: f64,
    pub seed: u64,
    pub samples: u64,
    pub sides: Vec<usize>,
    /// Defaults to the horizontal link east of the central node.
    pub contact: Option<ContactSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CirculationSummary {
    pub side: usize,
    pub mean: f64,
    pub stderr: f64,
    pub mean_abs: f64,
    /// `|E circ| / E|circ|`.
    pub normalized: f64,
    pub samples: u64,
}

pub fn run_circulation(run: &CirculationRun, checkpoint: Option<&Path>) -> Result<Vec<CirculationSummary>> {
    let g = square_torus(run.l)?;
    let m = build_medial(&g);
    let (contact, center) = contact_of(&g, run.contact)?;
    let layout = CirculationLayout::new(&g, &m, contact, center, &run.sides)?;
    let us = build_us::<f64>(&g, &params(run.beta)?);
    let cfg = config("circulation", run.seed, run.samples, run)?;
    let acc = run_ensemble(
        &cfg,
        layout.keys(),
        |i| {
            let u = compose_u(&us, &sample_disorder(&g, run.seed, i))?;
            layout.evaluate(&g, &m, &point_contact_state(&u, contact)?)
        },
        checkpoint,
        (run.samples / 10).max(1),
    )?;
    Ok(run
        .sides
        .iter()
        .enumerate()
        .map(|(k, &side)| {
            let (c, a) = (&acc.stats[2 * k], &acc.stats[2 * k + 1]);
            CirculationSummary {
                side,
                mean: c.mean,
                stderr: c.stderr(),
                mean_abs: a.mean,
                normalized: c.mean.abs() / a.mean,
                samples: c.n,
            }
        })
        .collect())
}

/// Exponential decay of `E(σ)` with distance on an absorbing torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRun {
    pub l: usize,
    pub beta: f64,
    pub mu: f64,
    pub seed: u64,
    pub samples: u64,
    pub r_min: i64,
    pub r_max: i64,
    pub resamples: usize,
}

pub fn run_decay(run: &DecayRun, checkpoint: Option<&Path>) -> Result<DecayFit> {
    let g = square_torus(run.l)?;
    let h = run.l as i64 / 2;
    let sources = vec![
        g.horizontal_link(h, h),
        g.vertical_link(h, h),
        g.horizontal_link(h + 1, h),
        g.vertical_link(h + 1, h),
    ];
    let layout = DecayLayout::new(&g, sources, run.r_min, run.r_max)?;
    let us = build_us::<f64>(&g, &params(run.beta)?);
    let reg = Regularization::AbsorbingBackground { mu: run.mu };
    let pattern = SymbolicPattern::new(&compose_t(&us, &DisorderRealization::clean(g.n_links()), &reg)?)?;
    let cfg = config("decay", run.seed, run.samples, run)?;
    let acc = run_ensemble(
        &cfg,
        layout.keys(),
        |i| {
            let t = compose_t(&us, &sample_disorder(&g, run.seed, i), &reg)?;
            Ok(layout.evaluate(&GreenFactorization::factorize_with(&pattern, &t)?))
        },
        checkpoint,
        (run.samples / 10).max(1),
    )?;
    decay_estimate(&layout, &acc, run.resamples, run.seed)
}

/// Disorder average of `G(ℓ₀→ℓ)` and `G(ℓ₀→ℓ)²` against `δ_{ℓℓ₀}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotypeRun {
    pub l: usize,
    pub mu: f64,
    pub seed: u64,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotypeSummary {
    /// Largest `|mean − δ| / stderr` over all links and parts.
    pub worst_z: f64,
    pub worst_key: String,
    pub samples: u64,
}

pub fn run_monotype(run: &MonotypeRun) -> Result<MonotypeSummary> {
    let g = square_torus(run.l)?;
    let source = center_link(&g);
    let us = build_us::<f64>(&g, &ScatteringParams::critical());
    let reg = Regularization::AbsorbingBackground { mu: run.mu };
    let pattern = SymbolicPattern::new(&compose_t(&us, &DisorderRealization::clean(g.n_links()), &reg)?)?;
    let cfg = config("monotype", run.seed, run.samples, run)?;
    let acc = run_ensemble(
        &cfg,
        monotype_keys(g.n_links()),
        |i| {
            let t = compose_t(&us, &sample_disorder(&g, run.seed, i), &reg)?;
            Ok(monotype_values(&GreenFactorization::factorize_with(&pattern, &t)?, source))
        },
        None,
        0,
    )?;
    let (worst_z, worst_key) = monotype_worst(&acc, source);
    Ok(MonotypeSummary {
        worst_z,
        worst_key,
        samples: acc.stats.first().map_or(0, |w| w.n),
    })
}

/// Power law of `|ψ_c(r)|²` for the clean critical torus with twisted
/// boundary conditions `(π, π)`; the untwisted torus has a resonance at the
/// contact eigenvalue.
pub fn clean_decay(l: usize, r_min: f64, r_max: f64) -> Result<PowerLawFit> {
    let g = square_torus(l)?;
    check_window(r_min, r_max, l)?;
    let us = build_us::<f64>(&g, &ScatteringParams::critical());
    let u = compose_u(&us, &DisorderRealization::from_phases(twist_phases(&g, PI, PI)))?;
    let c = center_link(&g);
    let psi = point_contact_state(&u, c)?;
    fit_power_law(&radial_profile(&g, c, &psi, r_min, r_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_are_reproducible() {
        let run = ConductanceRun {
            l: 8,
            beta: PI / 4.0,
            seed: 3,
            samples: 20,
        };
        let a = run_conductance(&run, None).unwrap();
        assert_eq!(a, run_conductance(&run, None).unwrap());
        assert!(a.mean > 0.0 && a.mean < 1.0 && a.mean_imag.abs() < 1e-10);
    }

    #[test]
    fn circulation_summary_shape() {
        let run = CirculationRun {
            l: 8,
            beta: PI / 4.0,
            seed: 1,
            samples: 10,
            sides: vec![2, 3],
            contact: None,
        };
        let s = run_circulation(&run, None).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|x| x.mean_abs > 0.0 && x.normalized <= 1.0));
    }

    #[test]
    fn zz_run_small() {
        let run = ZzRun {
            l: 16,
            beta: PI / 4.0,
            mu: -1.0 / 32.0,
            seed: 2,
            samples: 20,
            box_size: 4,
            r_min: 2.0,
            r_max: 4.0,
            resamples: 20,
        };
        let out = run_zz(&run, None).unwrap();
        assert_eq!(out.acc.stats[0].n, 20);
        let e = out.estimate.unwrap();
        assert!(e.level.n_hat.is_finite());
    }

    #[test]
    fn clean_decay_small() {
        let f = clean_decay(32, 2.0, 8.0).unwrap();
        assert!((f.exponent + 2.0).abs() < 0.5, "{f:?}");
    }

    #[test]
    fn contact_specs() {
        let g = square_torus(8).unwrap();
        let c = ContactSpec::parse_list("5,4,-x; 1,2,n").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].resolve(&g).unwrap(), center_link(&g));
        assert!(ContactSpec::parse_list("1,2").is_err());
        assert!(ContactSpec::parse_list("1,2,up").is_err());
    }

    #[test]
    fn window_beyond_quarter_rejected() {
        assert!(clean_decay(16, 2.0, 8.0).is_err());
    }
}
