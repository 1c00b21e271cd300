//! Per-realization kernels for the statistical observables and the estimators
//! that turn accumulated ensembles into fits.
//!
//! A kernel maps one factorized realization to a flat `Vec<f64>` whose layout
//! is fixed by a layout object; the ensemble module reduces those vectors and
//! the `*_estimate` functions read the reduced means and batch means back.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cochain::{circulation, current_cochain, j10_weights};
use crate::ensemble::Accumulator;
use crate::error::{Error, Result};
use crate::evolution::EvolutionOperator;
use crate::greens::GreenFactorization;
use crate::lattice::{Cycle, EdgeId, LinkId, MedialLattice, NetworkGeometry, NodeId, Sublattice, Topology};
use crate::observables::{
    amplitude_ratio, bootstrap, fit_level_n, linear_fit, LevelFit, MomentBatches, RatioEstimate, ZzPoint,
};

/// Means of the completed batches listed in `pick`, per key.
pub fn batch_means(acc: &Accumulator, pick: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; acc.keys.len()];
    for &b in pick {
        for (o, v) in out.iter_mut().zip(&acc.batches[b]) {
            *o += v;
        }
    }
    let n = pick.len().max(1) as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

fn is_a(geom: &NetworkGeometry, medial: &MedialLattice, e: EdgeId) -> bool {
    geom.node(medial.edges[e].node).sublattice == Sublattice::A
}

fn sub_tag(a: bool) -> char {
    if a {
        'A'
    } else {
        'B'
    }
}

/// Displacement class of an ordered edge pair: `(dx, dy)` of first minus
/// second, and whether the first edge sits on an A node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ZzClass {
    pub dx: i64,
    pub dy: i64,
    pub first_a: bool,
}

impl ZzClass {
    pub fn w(&self) -> Complex64 {
        Complex64::new(self.dx as f64, self.dy as f64)
    }
}

struct SigmaTarget {
    edge: EdgeId,
    class: usize,
    inv_dw: Complex64,
}

/// Geometry of the Σzz/Υzz scan on a torus: the source box, its links, the
/// displacement classes and the precomputed pair lists.
pub struct ZzLayout {
    pub l: usize,
    pub box_size: usize,
    pub r_max: f64,
    pub classes: Vec<ZzClass>,
    /// Pairs per class accumulated in every realization (Σ and Υ).
    pub sigma_pairs: Vec<usize>,
    pub upsilon_pairs: Vec<usize>,
    box_edges: Vec<EdgeId>,
    box_a: Vec<bool>,
    links: Vec<LinkId>,
    link_col: HashMap<LinkId, usize>,
    weights: Vec<[(LinkId, Complex64); 4]>,
    targets: Vec<Vec<SigmaTarget>>,
    upsilon: Vec<(usize, usize, usize, Complex64)>,
}

const PER_CLASS: usize = 4;
const GLOBAL: usize = 8;

impl ZzLayout {
    /// Sources are the medial edges of the `box_size × box_size` block of
    /// nodes at the origin; pairs up to distance `r_max` are kept.
    pub fn new(geom: &NetworkGeometry, medial: &MedialLattice, box_size: usize, r_max: f64) -> Result<Self> {
        if geom.topology() != Topology::Torus || geom.lx() != geom.ly() {
            return Err(Error::Parameter("Σzz scans need a square torus".into()));
        }
        let l = geom.lx();
        if box_size == 0 || box_size > l {
            return Err(Error::Parameter(format!("box size {box_size} outside 1..={l}")));
        }
        if !(r_max >= 1.0 && r_max <= l as f64 / 2.0) {
            return Err(Error::Parameter(format!("r_max = {r_max} outside [1, L/2]")));
        }
        let box_edges: Vec<EdgeId> = (0..box_size as i64)
            .flat_map(|y| (0..box_size as i64).map(move |x| (x, y)))
            .map(|(x, y)| geom.node_id(x, y))
            .collect();
        let box_a: Vec<bool> = box_edges.iter().map(|&e| is_a(geom, medial, e)).collect();
        let mut links: Vec<LinkId> = box_edges.iter().flat_map(|&e| medial.edges[e].roles.as_array()).collect();
        links.sort_unstable();
        links.dedup();
        let link_col = links.iter().enumerate().map(|(j, &l)| (l, j)).collect();
        let weights: Vec<_> = (0..medial.n_edges()).map(|e| j10_weights(geom, medial, e)).collect();

        let mut class_index: BTreeMap<ZzClass, usize> = BTreeMap::new();
        let cutoff = r_max + 0.5;
        let classify = |e: EdgeId, e2: EdgeId| -> Option<(ZzClass, Complex64)> {
            let d = geom.displacement(medial.edges[e2].position, medial.edges[e].position);
            let r = d.norm();
            if r < 0.5 || r > cutoff {
                return None;
            }
            let c = ZzClass {
                dx: d.re.round() as i64,
                dy: d.im.round() as i64,
                first_a: is_a(geom, medial, e),
            };
            Some((c, 1.0 / (medial.edges[e].direction * medial.edges[e2].direction)))
        };
        // fix the class order before indexing
        for &e2 in &box_edges {
            for e in 0..medial.n_edges() {
                if let Some((c, _)) = classify(e, e2) {
                    class_index.entry(c).or_insert(0);
                }
            }
        }
        for (i, v) in class_index.values_mut().enumerate() {
            *v = i;
        }
        let classes: Vec<ZzClass> = class_index.keys().copied().collect();
        let mut sigma_pairs = vec![0; classes.len()];
        let mut upsilon_pairs = vec![0; classes.len()];
        let mut targets = Vec::with_capacity(box_edges.len());
        for &e2 in &box_edges {
            let mut t = Vec::new();
            for e in 0..medial.n_edges() {
                if let Some((c, inv_dw)) = classify(e, e2) {
                    let class = class_index[&c];
                    sigma_pairs[class] += 1;
                    t.push(SigmaTarget { edge: e, class, inv_dw });
                }
            }
            targets.push(t);
        }
        let mut upsilon = Vec::new();
        for (i1, &e1) in box_edges.iter().enumerate() {
            for (i2, &e2) in box_edges.iter().enumerate() {
                if let Some((c, inv_dw)) = classify(e1, e2) {
                    let class = class_index[&c];
                    upsilon_pairs[class] += 1;
                    upsilon.push((i1, i2, class, inv_dw));
                }
            }
        }
        Ok(ZzLayout {
            l,
            box_size,
            r_max,
            classes,
            sigma_pairs,
            upsilon_pairs,
            box_edges,
            box_a,
            links,
            link_col,
            weights,
            targets,
            upsilon,
        })
    }

    pub fn n_values(&self) -> usize {
        PER_CLASS * self.classes.len() + GLOBAL
    }

    pub fn keys(&self) -> Vec<String> {
        let mut k = Vec::with_capacity(self.n_values());
        for c in &self.classes {
            let tag = format!("{}:{}:{}", c.dx, c.dy, sub_tag(c.first_a));
            for part in ["szz_re", "szz_im", "uzz_re", "uzz_im"] {
                k.push(format!("{part}:{tag}"));
            }
        }
        for part in ["p_re", "p_im", "q_re", "q_im"] {
            for s in ['A', 'B'] {
                k.push(format!("{part}:{s}"));
            }
        }
        k
    }

    /// Links whose columns a realization needs.
    pub fn source_links(&self) -> &[LinkId] {
        &self.links
    }

    /// Per-class means over this realization's pairs of `Σzz/Δw Δw'` and
    /// `Υzz/Δw Δw'`, then the sublattice means of `P_e = Σ w A` and
    /// `Q_e = Σ w Ā` used for the connected part.
    pub fn evaluate(&self, fact: &GreenFactorization<f64>) -> Vec<f64> {
        let cols = fact.columns(&self.links);
        let nc = self.classes.len();
        let mut sigma = vec![Complex64::new(0.0, 0.0); nc];
        for (i2, &e2) in self.box_edges.iter().enumerate() {
            let w2: Vec<(usize, Complex64)> = self.weights[e2].iter().map(|&(l, w)| (self.link_col[&l], w)).collect();
            for t in &self.targets[i2] {
                let mut v = Complex64::new(0.0, 0.0);
                for &(l1, w1) in &self.weights[t.edge] {
                    for &(c2, w) in &w2 {
                        v += w1 * w * cols[(l1, c2)].norm_sqr();
                    }
                }
                sigma[t.class] += v * t.inv_dw;
            }
        }
        let a: HashMap<LinkId, Complex64> = self
            .links
            .iter()
            .enumerate()
            .map(|(j, &l)| (l, cols[(l, j)] - 1.0))
            .collect();
        let p: Vec<Complex64> = self
            .box_edges
            .iter()
            .map(|&e| self.weights[e].iter().map(|&(l, w)| w * a[&l]).sum())
            .collect();
        let q: Vec<Complex64> = self
            .box_edges
            .iter()
            .map(|&e| self.weights[e].iter().map(|&(l, w)| w * a[&l].conj()).sum())
            .collect();
        let mut ups = vec![Complex64::new(0.0, 0.0); nc];
        for &(i1, i2, class, inv_dw) in &self.upsilon {
            ups[class] += p[i1] * q[i2] * inv_dw;
        }
        let mut out = Vec::with_capacity(self.n_values());
        for c in 0..nc {
            let s = sigma[c] / self.sigma_pairs[c].max(1) as f64;
            let u = ups[c] / self.upsilon_pairs[c].max(1) as f64;
            out.extend([s.re, s.im, u.re, u.im]);
        }
        let mut pm = [Complex64::new(0.0, 0.0); 2];
        let mut qm = [Complex64::new(0.0, 0.0); 2];
        let mut cnt = [0usize; 2];
        for (k, &isa) in self.box_a.iter().enumerate() {
            let s = usize::from(!isa);
            pm[s] += p[k];
            qm[s] += q[k];
            cnt[s] += 1;
        }
        let avg = |z: Complex64, n: usize| z / n.max(1) as f64;
        let (pa, pb, qa, qb) = (avg(pm[0], cnt[0]), avg(pm[1], cnt[1]), avg(qm[0], cnt[0]), avg(qm[1], cnt[1]));
        out.extend([pa.re, pb.re, pa.im, pb.im, qa.re, qb.re, qa.im, qb.im]);
        out
    }

    fn index(&self, class: usize, part: usize) -> usize {
        PER_CLASS * class + part
    }

    /// Tables of `Σzz`, raw `Υzz` and connected `Υzz` coefficients from a vector
    /// of per-key means (and optional standard errors), one point per class.
    pub fn tables(&self, means: &[f64], stderr: Option<&[f64]>) -> ZzTables {
        let g = PER_CLASS * self.classes.len();
        let pm = [Complex64::new(means[g], means[g + 2]), Complex64::new(means[g + 1], means[g + 3])];
        let qm = [Complex64::new(means[g + 4], means[g + 6]), Complex64::new(means[g + 5], means[g + 7])];
        let se = |i: usize, j: usize| stderr.map_or(0.0, |s| s[i].hypot(s[j]));
        let mut out = ZzTables::default();
        for (k, c) in self.classes.iter().enumerate() {
            let s = Complex64::new(means[self.index(k, 0)], means[self.index(k, 1)]);
            let u = Complex64::new(means[self.index(k, 2)], means[self.index(k, 3)]);
            // sublattice of the second edge follows from the parity of the displacement
            let second_a = c.first_a == ((c.dx + c.dy).rem_euclid(2) == 0);
            let dw = dir(c.first_a) * dir(second_a);
            let disconnected = pm[usize::from(!c.first_a)] * qm[usize::from(!second_a)] / dw;
            let point = |value: Complex64, stderr: f64| ZzPoint {
                w: c.w(),
                dw: Complex64::new(1.0, 0.0),
                value,
                stderr,
            };
            out.sigma.push(point(s, se(self.index(k, 0), self.index(k, 1))));
            let su = se(self.index(k, 2), self.index(k, 3));
            out.upsilon.push(point(u, su));
            out.upsilon_connected.push(point(u - disconnected, su));
        }
        out.classes = self.classes.clone();
        out
    }
}

fn dir(a: bool) -> Complex64 {
    if a {
        Complex64::new(1.0, 1.0)
    } else {
        Complex64::new(1.0, -1.0)
    }
}

/// Coefficient tables `Σzz(e,e')/(Δw Δw')` etc., indexed like `classes`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ZzTables {
    pub classes: Vec<ZzClass>,
    pub sigma: Vec<ZzPoint>,
    pub upsilon: Vec<ZzPoint>,
    pub upsilon_connected: Vec<ZzPoint>,
}

fn in_window(points: &[ZzPoint], r_min: f64, r_max: f64) -> Vec<ZzPoint> {
    points
        .iter()
        .filter(|p| p.w.norm() >= r_min - 1e-9 && p.w.norm() <= r_max + 1e-9)
        .copied()
        .collect()
}

/// Level fit and amplitude ratios with batch-bootstrap errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZzEstimate {
    pub level: LevelFit,
    pub n_hat_err: f64,
    pub exponent_err: f64,
    /// `Σzz/Υzz` with the connected `Υzz`.
    pub ratio: RatioEstimate,
    pub ratio_re_err: f64,
    pub ratio_im_err: f64,
    /// `Σzz/Υzz` with the raw `Υzz`.
    pub ratio_raw: RatioEstimate,
    pub samples: u64,
}

fn zz_point_estimates(layout: &ZzLayout, means: &[f64], stderr: Option<&[f64]>, r_min: f64, r_max: f64) -> Result<(LevelFit, RatioEstimate, RatioEstimate)> {
    let t = layout.tables(means, stderr);
    let level = fit_level_n(&t.sigma, r_min, r_max)?;
    let s = in_window(&t.sigma, r_min, r_max);
    let ratio = amplitude_ratio(&s, &in_window(&t.upsilon_connected, r_min, r_max))?;
    let raw = amplitude_ratio(&s, &in_window(&t.upsilon, r_min, r_max))?;
    Ok((level, ratio, raw))
}

pub fn zz_estimate(layout: &ZzLayout, acc: &Accumulator, r_min: f64, r_max: f64, resamples: usize, seed: u64) -> Result<ZzEstimate> {
    let means: Vec<f64> = acc.stats.iter().map(|w| w.mean).collect();
    let stderr: Vec<f64> = acc.stats.iter().map(|w| w.stderr()).collect();
    let (level, ratio, ratio_raw) = zz_point_estimates(layout, &means, Some(&stderr), r_min, r_max)?;
    let nb = acc.batches.len();
    let stat = |f: fn(&(LevelFit, RatioEstimate, RatioEstimate)) -> f64| {
        bootstrap(nb, resamples, seed, |pick| {
            let m = batch_means(acc, pick);
            zz_point_estimates(layout, &m, None, r_min, r_max).ok().map(|e| f(&e))
        })
        .1
    };
    Ok(ZzEstimate {
        n_hat_err: stat(|e| e.0.n_hat),
        exponent_err: stat(|e| e.0.exponent),
        ratio_re_err: stat(|e| e.1.ratio.re),
        ratio_im_err: stat(|e| e.1.ratio.im),
        level,
        ratio,
        ratio_raw,
        samples: acc.completed - acc.skipped.len() as u64,
    })
}

/// Links and radii for the moments `|ψ_c(ℓ)|^{2q}` of point-contact states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentLayout {
    pub contact: LinkId,
    pub q: Vec<f64>,
    pub links: Vec<LinkId>,
    pub radius: Vec<f64>,
}

impl MomentLayout {
    /// Keeps links whose distance from the contact midpoint rounds into
    /// `[r_min, r_max]`.
    pub fn new(geom: &NetworkGeometry, contact: LinkId, q: Vec<f64>, r_min: f64, r_max: f64) -> Result<Self> {
        geom.check_link(contact)?;
        let c = geom.midpoint(contact);
        let (links, radius): (Vec<LinkId>, Vec<f64>) = (0..geom.n_links())
            .map(|l| (l, geom.distance(c, geom.midpoint(l))))
            .filter(|&(_, r)| r.round() >= r_min - 1e-9 && r.round() <= r_max + 1e-9)
            .unzip();
        if links.is_empty() {
            return Err(Error::Parameter("no links in the moment window".into()));
        }
        Ok(MomentLayout { contact, q, links, radius })
    }

    pub fn keys(&self) -> Vec<String> {
        self.q
            .iter()
            .flat_map(|q| self.links.iter().map(move |l| format!("m:{q}:{l}")))
            .collect()
    }

    pub fn evaluate(&self, psi: &[Complex64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.q.len() * self.links.len());
        for &q in &self.q {
            for &l in &self.links {
                let v = psi[l].norm_sqr().powf(q);
                if !v.is_finite() {
                    return Err(Error::Singular(format!("vanishing amplitude on link {l} for q = {q}")));
                }
                out.push(v);
            }
        }
        Ok(out)
    }

    /// Batch means regrouped as `[batch][q][link]`.
    pub fn batches(&self, acc: &Accumulator) -> MomentBatches {
        let nl = self.links.len();
        MomentBatches {
            q: self.q.clone(),
            radius: self.radius.clone(),
            batches: acc
                .batches
                .iter()
                .map(|b| (0..self.q.len()).map(|iq| b[iq * nl..(iq + 1) * nl].to_vec()).collect())
                .collect(),
            samples: (acc.completed - acc.skipped.len() as u64) as usize,
        }
    }
}

/// Square cycles of several sizes around a common center for the
/// circulation of `|ψ_c|²` currents.
#[derive(Clone, Debug)]
pub struct CirculationLayout {
    pub contact: LinkId,
    pub sides: Vec<usize>,
    pub cycles: Vec<Cycle>,
    exempt: Vec<NodeId>,
}

impl CirculationLayout {
    /// Squares of the given sides (perimeter `4m`) centered near node `(cx, cy)`.
    pub fn new(geom: &NetworkGeometry, medial: &MedialLattice, contact: LinkId, center: (i64, i64), sides: &[usize]) -> Result<Self> {
        geom.check_link(contact)?;
        let rec = geom.link(contact);
        let exempt: Vec<NodeId> = rec.tail.into_iter().chain(rec.head).collect();
        let mut cycles = Vec::with_capacity(sides.len());
        for &m in sides {
            let mut x0 = center.0 + 1 - m as i64;
            if (x0 + center.1).rem_euclid(2) == 0 {
                x0 += 1;
            }
            let c = Cycle::square(geom, medial, x0, center.1, m)?;
            let touches = c.edges.iter().any(|&(e, _)| exempt.contains(&medial.edges[e].node));
            if touches {
                return Err(Error::Domain(format!("square of side {m} passes through the contact")));
            }
            cycles.push(c);
        }
        Ok(CirculationLayout {
            contact,
            sides: sides.to_vec(),
            cycles,
            exempt,
        })
    }

    pub fn keys(&self) -> Vec<String> {
        self.sides
            .iter()
            .flat_map(|m| [format!("circ:{m}"), format!("abs:{m}")])
            .collect()
    }

    pub fn evaluate(&self, geom: &NetworkGeometry, medial: &MedialLattice, psi: &[Complex64]) -> Result<Vec<f64>> {
        let j: Vec<Complex64> = psi.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
        let c = current_cochain(geom, medial, &j, &self.exempt)?;
        let mut out = Vec::with_capacity(2 * self.cycles.len());
        for cyc in &self.cycles {
            let v = circulation(medial, &c, cyc)?.re;
            out.extend([v, v.abs()]);
        }
        Ok(out)
    }
}

/// `E(σ)` averaged over integer distance shells around a few source links.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayLayout {
    pub sources: Vec<LinkId>,
    pub shells: Vec<i64>,
    shell_of: Vec<Vec<Option<usize>>>,
    counts: Vec<usize>,
}

impl DecayLayout {
    pub fn new(geom: &NetworkGeometry, sources: Vec<LinkId>, r_min: i64, r_max: i64) -> Result<Self> {
        for &s in &sources {
            geom.check_link(s)?;
        }
        let shells: Vec<i64> = (r_min..=r_max).collect();
        let mut counts = vec![0; shells.len()];
        let shell_of = sources
            .iter()
            .map(|&s| {
                (0..geom.n_links())
                    .map(|l| {
                        let k = geom.distance(geom.midpoint(s), geom.midpoint(l)).round() as i64;
                        (r_min..=r_max).contains(&k).then(|| {
                            let i = (k - r_min) as usize;
                            counts[i] += 1;
                            i
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(DecayLayout { sources, shells, shell_of, counts })
    }

    pub fn keys(&self) -> Vec<String> {
        self.shells.iter().map(|r| format!("sigma:{r}")).collect()
    }

    pub fn evaluate(&self, fact: &GreenFactorization<f64>) -> Vec<f64> {
        let cols = fact.columns(&self.sources);
        let mut out = vec![0.0; self.shells.len()];
        for (j, map) in self.shell_of.iter().enumerate() {
            for (l, s) in map.iter().enumerate() {
                if let Some(i) = s {
                    out[*i] += cols[(l, j)].norm_sqr();
                }
            }
        }
        for (o, c) in out.iter_mut().zip(&self.counts) {
            *o /= *c as f64;
        }
        out
    }
}

/// Slope of `ln E(σ)` against distance, with its batch-bootstrap error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub slope_err: f64,
    pub samples: u64,
}

fn decay_slope(layout: &DecayLayout, means: &[f64]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = layout
        .shells
        .iter()
        .zip(means)
        .filter(|(_, &m)| m > 0.0)
        .map(|(&r, &m)| (r as f64, m.ln()))
        .unzip();
    linear_fit(&x, &y).ok().map(|(_, b, _)| b)
}

pub fn decay_estimate(layout: &DecayLayout, acc: &Accumulator, resamples: usize, seed: u64) -> Result<DecayFit> {
    let means: Vec<f64> = acc.stats.iter().map(|w| w.mean).collect();
    let slope = decay_slope(layout, &means).ok_or_else(|| Error::Fit("decay profile not fittable".into()))?;
    let (_, err, _) = bootstrap(acc.batches.len(), resamples, seed, |pick| decay_slope(layout, &batch_means(acc, pick)));
    Ok(DecayFit {
        slope,
        slope_err: err,
        samples: acc.completed - acc.skipped.len() as u64,
    })
}

/// `Re, Im` of `G(ℓ₀→ℓ)` and of `G(ℓ₀→ℓ)²` for every link `ℓ`: the one- and
/// two-factor retarded products whose disorder average is `δ_{ℓℓ₀}`.
pub fn monotype_values(fact: &GreenFactorization<f64>, source: LinkId) -> Vec<f64> {
    let col = fact.column(source);
    let mut out = Vec::with_capacity(4 * col.len());
    for z in col.iter() {
        let z2 = z * z;
        out.extend([z.re, z.im, z2.re, z2.im]);
    }
    out
}

pub fn monotype_keys(n_links: usize) -> Vec<String> {
    (0..n_links)
        .flat_map(|l| [format!("g_re:{l}"), format!("g_im:{l}"), format!("g2_re:{l}"), format!("g2_im:{l}")])
        .collect()
}

/// Largest `|mean − δ| / stderr` over the monotype keys, and where it occurs.
pub fn monotype_worst(acc: &Accumulator, source: LinkId) -> (f64, String) {
    let mut worst = (0.0, String::new());
    for (i, (k, w)) in acc.keys.iter().zip(&acc.stats).enumerate() {
        let link = i / 4;
        let part = i % 4;
        let expected = if link == source && (part == 0 || part == 2) { 1.0 } else { 0.0 };
        let se = w.stderr();
        let z = if se > 0.0 {
            (w.mean - expected).abs() / se
        } else if (w.mean - expected).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        if z > worst.0 {
            worst = (z, k.clone());
        }
    }
    worst
}

/// Default pair of row cycles for the cylinder conductance.
pub fn conductance_cycles(geom: &NetworkGeometry) -> Result<(Cycle, Cycle)> {
    let ly = geom.ly();
    Ok((Cycle::row(geom, ly / 4)?, Cycle::row(geom, 3 * ly / 4)?))
}

/// `|ψ_c(ℓ)|²` against distance from the contact for one state: the median
/// over each integer shell in `[r_min, r_max]`, placed at the median radius.
pub fn radial_profile(geom: &NetworkGeometry, contact: LinkId, psi: &[Complex64], r_min: f64, r_max: f64) -> Vec<(f64, f64)> {
    let c = geom.midpoint(contact);
    let mut shells: BTreeMap<i64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (l, z) in psi.iter().enumerate() {
        let r = geom.distance(c, geom.midpoint(l));
        let k = r.round();
        if k >= r_min - 1e-9 && k <= r_max + 1e-9 {
            let s = shells.entry(k as i64).or_default();
            s.0.push(r);
            s.1.push(z.norm_sqr());
        }
    }
    let med = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    };
    shells.into_values().map(|(mut r, mut y)| (med(&mut r), med(&mut y))).collect()
}

/// Solve for the point-contact state of `u` in double precision.
pub fn contact_state(u: &EvolutionOperator<f64>, contact: LinkId) -> Result<Vec<Complex64>> {
    crate::greens::point_contact_state(u, contact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{run_ensemble, EnsembleConfig};
    use crate::evolution::{build_us, compose_t, compose_u, sample_disorder, DisorderRealization, Regularization, ScatteringParams};
    use crate::greens::SymbolicPattern;
    use crate::lattice::build_medial;

    fn torus(l: usize) -> (NetworkGeometry, MedialLattice) {
        let g = NetworkGeometry::new(l, l, Topology::Torus).unwrap();
        let m = build_medial(&g);
        (g, m)
    }

    #[test]
    fn zz_layout_matches_direct_projection() {
        let (g, m) = torus(8);
        let layout = ZzLayout::new(&g, &m, 3, 3.0).unwrap();
        assert_eq!(layout.keys().len(), layout.n_values());
        let us = build_us::<f64>(&g, &ScatteringParams::critical());
        let t = compose_t(&us, &sample_disorder(&g, 4, 1), &Regularization::AbsorbingBackground { mu: -0.1 }).unwrap();
        let f = GreenFactorization::factorize(&t).unwrap();
        let v = layout.evaluate(&f);
        // recompute one class by brute force from single Green's functions
        let k = layout.classes.iter().position(|c| c.dx == 2 && c.dy == 0 && c.first_a).unwrap();
        let mut s = Complex64::new(0.0, 0.0);
        let mut n = 0;
        for &e2 in &layout.box_edges {
            for e in 0..m.n_edges() {
                let d = g.displacement(m.edges[e2].position, m.edges[e].position);
                if (d - Complex64::new(2.0, 0.0)).norm() > 1e-9 || !is_a(&g, &m, e) {
                    continue;
                }
                let mut x = Complex64::new(0.0, 0.0);
                for (l1, w1) in j10_weights(&g, &m, e) {
                    for (l2, w2) in j10_weights(&g, &m, e2) {
                        x += w1 * w2 * f.green(l2, l1).norm_sqr();
                    }
                }
                s += x / (m.edges[e].direction * m.edges[e2].direction);
                n += 1;
            }
        }
        s /= n as f64;
        assert!((Complex64::new(v[4 * k], v[4 * k + 1]) - s).norm() < 1e-12);
    }

    #[test]
    fn zz_tables_connected_part_vanishes_at_zero_t() {
        let (g, m) = torus(8);
        let layout = ZzLayout::new(&g, &m, 4, 3.0).unwrap();
        let t = compose_t(
            &build_us::<f64>(&g, &ScatteringParams::critical()),
            &DisorderRealization::clean(g.n_links()),
            &Regularization::AbsorbingBackground { mu: f64::NEG_INFINITY },
        )
        .unwrap();
        let f = GreenFactorization::factorize(&t).unwrap();
        let v = layout.evaluate(&f);
        let tables = layout.tables(&v, None);
        assert!(tables.upsilon.iter().all(|p| p.value.norm() == 0.0));
        assert!(tables.upsilon_connected.iter().all(|p| p.value.norm() == 0.0));
        // T = 0 leaves only the diagonal of σ, so edges sharing no link decouple
        assert!(tables.sigma.iter().filter(|p| p.w.norm() > 1.5).all(|p| p.value.norm() < 1e-15));
    }

    #[test]
    fn moment_layout_round_trip() {
        let (g, _) = torus(16);
        let c = g.horizontal_link(8, 8);
        let layout = MomentLayout::new(&g, c, vec![0.0, 0.5, 1.0], 2.0, 4.0).unwrap();
        assert!(layout.radius.iter().all(|r| r.round() >= 2.0 && r.round() <= 4.0));
        let us = build_us::<f64>(&g, &ScatteringParams::critical());
        let u = compose_u(&us, &sample_disorder(&g, 2, 0)).unwrap();
        let psi = contact_state(&u, c).unwrap();
        let v = layout.evaluate(&psi).unwrap();
        let nl = layout.links.len();
        assert!(v[..nl].iter().all(|&x| x == 1.0));
        for k in 0..nl {
            assert!((v[nl + k].powi(2) - v[2 * nl + k]).abs() < 1e-12 * v[2 * nl + k].max(1.0));
        }
    }

    #[test]
    fn circulation_layout_rejects_contact_on_cycle() {
        let (g, m) = torus(16);
        let c = g.horizontal_link(8, 8);
        assert!(CirculationLayout::new(&g, &m, c, (8, 8), &[2, 3]).is_ok());
        let c2 = g.horizontal_link(7, 7);
        assert!(CirculationLayout::new(&g, &m, c2, (8, 8), &[2]).is_err());
    }

    #[test]
    fn decay_profile_of_clean_absorbing_torus_falls() {
        let (g, _) = torus(16);
        let layout = DecayLayout::new(&g, vec![g.horizontal_link(8, 8)], 1, 5).unwrap();
        let us = build_us::<f64>(&g, &ScatteringParams::critical());
        let pat_t = compose_t(&us, &sample_disorder(&g, 1, 0), &Regularization::AbsorbingBackground { mu: -0.3 }).unwrap();
        let pat = SymbolicPattern::new(&pat_t).unwrap();
        let cfg = EnsembleConfig::new(9, 40, serde_json::json!({"test": "decay"}));
        let acc = run_ensemble(
            &cfg,
            layout.keys(),
            |i| {
                let t = compose_t(&us, &sample_disorder(&g, 9, i), &Regularization::AbsorbingBackground { mu: -0.3 })?;
                Ok(layout.evaluate(&GreenFactorization::factorize_with(&pat, &t)?))
            },
            None,
            0,
        )
        .unwrap();
        let fit = decay_estimate(&layout, &acc, 50, 1).unwrap();
        assert!(fit.slope < 0.0 && fit.slope_err.is_finite());
    }

    #[test]
    fn monotype_zero_t_is_exactly_delta() {
        let (g, _) = torus(4);
        let t = compose_t(
            &build_us::<f64>(&g, &ScatteringParams::critical()),
            &DisorderRealization::clean(g.n_links()),
            &Regularization::AbsorbingBackground { mu: f64::NEG_INFINITY },
        )
        .unwrap();
        let f = GreenFactorization::factorize(&t).unwrap();
        let mut acc = Accumulator::new(monotype_keys(g.n_links()), 1);
        for i in 0..3 {
            acc.record(i, Ok(monotype_values(&f, 5))).unwrap();
        }
        assert_eq!(monotype_worst(&acc, 5).0, 0.0);
    }
}
