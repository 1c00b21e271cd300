//! Physics estimates built on the Green's function and cochain layers:
//! Kubo conductance, power-law and level fits, amplitude ratios and the
//! multifractal spectrum of point-contact states.
//!
//! Statistics are carried in `f64` regardless of the scalar used upstream.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::{Complex, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cochain::{edge_links, DoubleCochain};
use crate::error::{Error, Result};
use crate::evolution::EvolutionOperator;
use crate::greens::GreenFactorization;
use crate::lattice::{Cycle, LinkId, MedialLattice, NetworkGeometry, Topology};
use crate::scalar::{norm_sqr, to_c64, Real};

/// One realization of the two-terminal conductance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConductanceSample {
    pub g: f64,
    /// Imaginary part of the double sum; zero up to rounding.
    pub imag: f64,
    pub c1: Cycle,
    pub c2: Cycle,
    pub lx: usize,
    pub ly: usize,
}

fn cycle_rows(geom: &NetworkGeometry, medial: &MedialLattice, c: &Cycle) -> BTreeSet<usize> {
    c.edges
        .iter()
        .map(|&(e, _)| geom.node(medial.edges[e].node).y)
        .collect()
}

fn check_cycles(geom: &NetworkGeometry, medial: &MedialLattice, c1: &Cycle, c2: &Cycle) -> Result<()> {
    if geom.topology() != Topology::CylinderX {
        return Err(Error::Domain("conductance needs a cylinder with terminals".into()));
    }
    for c in [c1, c2] {
        if c.is_empty() || !c.is_closed(medial) {
            return Err(Error::Domain("conductance cycles must be closed and non-empty".into()));
        }
    }
    let ly = geom.ly();
    let r1 = cycle_rows(geom, medial, c1);
    let r2 = cycle_rows(geom, medial, c2);
    for &y in r1.iter().chain(&r2) {
        if y == 0 || y + 1 >= ly {
            return Err(Error::Domain(format!(
                "cycle passes through row {y}, adjacent to a terminal"
            )));
        }
    }
    for &a in &r1 {
        for &b in &r2 {
            if a.abs_diff(b) < 2 {
                return Err(Error::Domain(format!(
                    "cycles at rows {a} and {b} are not separated"
                )));
            }
        }
    }
    Ok(())
}

/// `G = Σ_{e∈C1} Σ_{e'∈C2} σ(e, e')` with `σ(ℓ, ℓ') = |⟨ℓ|(1−T)^{-1}|ℓ'⟩|²`,
/// on a cylinder whose open edges absorb.
pub fn conductance<T: Real>(
    geom: &NetworkGeometry,
    medial: &MedialLattice,
    t: &EvolutionOperator<T>,
    c1: &Cycle,
    c2: &Cycle,
) -> Result<ConductanceSample> {
    check_cycles(geom, medial, c1, c2)?;
    let fact = GreenFactorization::factorize(t)?;
    let sources: Vec<LinkId> = c2
        .edges
        .iter()
        .flat_map(|&(e, _)| edge_links(medial, e))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let cols = fact.columns(&sources);
    let index: BTreeMap<LinkId, usize> = sources.iter().enumerate().map(|(j, &l)| (l, j)).collect();
    let table = |l: LinkId, l2: LinkId| {
        index
            .get(&l2)
            .map(|&j| Complex::new(norm_sqr(cols[(l, j)]), T::zero()))
    };
    let d = DoubleCochain::new(geom, medial, table);
    let g = to_c64(d.over_cycles(c1, c2)?);
    Ok(ConductanceSample {
        g: g.re,
        imag: g.im,
        c1: c1.clone(),
        c2: c2.clone(),
        lx: geom.lx(),
        ly: geom.ly(),
    })
}

/// Least-squares fit `y = A r^p` on log-log axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub n_radii: usize,
    /// Covariance of `(ln A, p)` from the residual scatter.
    pub covariance: [[f64; 2]; 2],
}

impl PowerLawFit {
    pub fn exponent_stderr(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }
}

/// Ordinary least squares `y = a + b x`, returning `(a, b, cov)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, [[f64; 2]; 2])> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Fit(format!("linear fit needs at least 2 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let s2 = if n > 2 {
        x.iter()
            .zip(y)
            .map(|(u, v)| (v - a - b * u).powi(2))
            .sum::<f64>()
            / (nf - 2.0)
    } else {
        0.0
    };
    let vb = s2 / sxx;
    let va = s2 * (1.0 / nf + mx * mx / sxx);
    let cab = -mx * vb;
    Ok((a, b, [[va, cab], [cab, vb]]))
}

/// Fits a power law through `(r, y)` points with `y > 0`; needs at least
/// four distinct radii.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    let radii: BTreeSet<u64> = points.iter().map(|p| p.0.to_bits()).collect();
    if radii.len() < 4 {
        return Err(Error::Fit(format!(
            "power-law fit needs at least 4 distinct radii, got {}",
            radii.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::Fit(format!("non-positive point ({}, {}) in log-log fit", p.0, p.1)));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (a, b, cov) = linear_fit(&x, &y)?;
    let r_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let r_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    Ok(PowerLawFit {
        exponent: b,
        amplitude: a.exp(),
        r_min,
        r_max,
        n_radii: radii.len(),
        covariance: cov,
    })
}

/// Rejects fit windows outside `[2, L/4]`.
pub fn check_window(r_min: f64, r_max: f64, l: usize) -> Result<()> {
    if r_min < 2.0 || r_max > l as f64 / 4.0 || r_min >= r_max {
        return Err(Error::Fit(format!(
            "window [{r_min}, {r_max}] not inside [2, {}]",
            l as f64 / 4.0
        )));
    }
    Ok(())
}

/// A (10,10)-projected correlator at one pair of medial edges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZzPoint {
    /// Complex displacement `w − w'` between the edge midpoints.
    pub w: Complex64,
    /// Product of the edge vectors `Δw_e Δw_{e'}`; `1` for bare tables.
    pub dw: Complex64,
    pub value: Complex64,
    pub stderr: f64,
}

impl ZzPoint {
    /// `value · w² / dw`, the amplitude multiplying `dw/w²`.
    pub fn amplitude(&self) -> Complex64 {
        self.value * self.w * self.w / self.dw
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelFit {
    pub n_hat: f64,
    pub exponent: f64,
    pub exponent_stderr: f64,
    /// Median imaginary part of the amplitude relative to `n_hat`.
    pub imag_residual: f64,
    pub n_points: usize,
    pub r_min: f64,
    pub r_max: f64,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn radius_key(r: f64) -> i64 {
    (r * 1e6).round() as i64
}

/// Estimates the level `n` in `Σzz ≈ n Δw Δw' / (w − w')²` from points with
/// `r_min ≤ |w| ≤ r_max`.
pub fn fit_level_n(points: &[ZzPoint], r_min: f64, r_max: f64) -> Result<LevelFit> {
    let inside: Vec<&ZzPoint> = points
        .iter()
        .filter(|p| p.w.norm() >= r_min - 1e-9 && p.w.norm() <= r_max + 1e-9)
        .collect();
    let mut re: Vec<f64> = inside.iter().map(|p| p.amplitude().re).collect();
    let mut im: Vec<f64> = inside.iter().map(|p| p.amplitude().im).collect();
    let n_hat = median(&mut re);
    let imag = median(&mut im);
    // radial profile of the amplitude rotated onto the real axis, oriented
    // by the sign of the measured level
    let sign = if n_hat < 0.0 { -1.0 } else { 1.0 };
    let mut shells: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
    for p in &inside {
        let r = p.w.norm();
        let u = p.w / r;
        let v = sign * (p.value * u * u / p.dw).re;
        let s = shells.entry(radius_key(r)).or_insert((r, 0.0, 0));
        s.1 += v;
        s.2 += 1;
    }
    let profile: Vec<(f64, f64)> = shells
        .values()
        .map(|&(r, s, n)| (r, s / n as f64))
        .filter(|p| p.1 > 0.0)
        .collect();
    let fit = fit_power_law(&profile)?;
    Ok(LevelFit {
        n_hat,
        exponent: fit.exponent,
        exponent_stderr: fit.exponent_stderr(),
        imag_residual: imag / n_hat,
        n_points: inside.len(),
        r_min,
        r_max,
    })
}

/// Least-squares ratio `Σzz ≈ ρ Υzz` over a common set of displacements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub ratio: Complex64,
    pub stderr: f64,
    /// Combined significance of `Υzz` against zero, in standard errors.
    pub upsilon_significance: f64,
    /// `Υzz` indistinguishable from zero at the available statistics.
    pub inconclusive: bool,
}

pub fn amplitude_ratio(sigma: &[ZzPoint], upsilon: &[ZzPoint]) -> Result<RatioEstimate> {
    if sigma.len() != upsilon.len() || sigma.is_empty() {
        return Err(Error::Fit("ratio needs two non-empty tables of equal length".into()));
    }
    if sigma.iter().zip(upsilon).any(|(s, u)| (s.w - u.w).norm() > 1e-9) {
        return Err(Error::Fit("ratio tables have different displacements".into()));
    }
    let uu: f64 = upsilon.iter().map(|u| u.value.norm_sqr()).sum();
    if uu == 0.0 {
        return Ok(RatioEstimate {
            ratio: Complex64::new(f64::NAN, f64::NAN),
            stderr: f64::INFINITY,
            upsilon_significance: 0.0,
            inconclusive: true,
        });
    }
    let ratio: Complex64 = sigma
        .iter()
        .zip(upsilon)
        .map(|(s, u)| u.value.conj() * s.value)
        .sum::<Complex64>()
        / uu;
    let var = sigma
        .iter()
        .zip(upsilon)
        .map(|(s, u)| u.value.norm_sqr() * (s.stderr.powi(2) + ratio.norm_sqr() * u.stderr.powi(2)))
        .sum::<f64>()
        / (uu * uu);
    let chi2: f64 = upsilon
        .iter()
        .filter(|u| u.stderr > 0.0)
        .map(|u| u.value.norm_sqr() / u.stderr.powi(2))
        .sum();
    let all_exact = upsilon.iter().all(|u| u.stderr == 0.0);
    let significance = if all_exact { f64::INFINITY } else { chi2.sqrt() };
    Ok(RatioEstimate {
        ratio,
        stderr: var.sqrt(),
        upsilon_significance: significance,
        inconclusive: significance < 3.0,
    })
}

/// Bootstrap over batches: resamples batch indices with replacement and
/// returns `(mean, std)` of the statistic over resamples where it is defined.
pub fn bootstrap(
    n_batches: usize,
    resamples: usize,
    seed: u64,
    mut stat: impl FnMut(&[usize]) -> Option<f64>,
) -> (f64, f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vals = Vec::with_capacity(resamples);
    let mut idx = vec![0usize; n_batches];
    for _ in 0..resamples {
        for i in idx.iter_mut() {
            *i = rng.random_range(0..n_batches);
        }
        if let Some(v) = stat(&idx) {
            if v.is_finite() {
                vals.push(v);
            }
        }
    }
    let n = vals.len();
    if n < 2 {
        return (vals.first().copied().unwrap_or(f64::NAN), f64::NAN, n);
    }
    let m = vals.iter().sum::<f64>() / n as f64;
    let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, v.sqrt(), n)
}

/// Batch means of `|ψ_c(ℓ)|^{2q}` for a grid of `q`, indexed by link, with
/// each link's distance from the contact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBatches {
    pub q: Vec<f64>,
    pub radius: Vec<f64>,
    /// `[batch][q index][link]`.
    pub batches: Vec<Vec<Vec<f64>>>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultifractalFit {
    pub q: Vec<f64>,
    pub x_q: Vec<f64>,
    pub x_q_err: Vec<f64>,
    pub delta_q: Vec<f64>,
    pub delta_q_err: Vec<f64>,
    /// Parabola coefficient in `Δ_q ≈ X q (1 − q)`.
    pub x: f64,
    pub x_err: f64,
    /// `(q, Δ_q − Δ_{1−q}, bootstrap error)` for every reflected pair on the grid.
    pub weyl: Vec<(f64, f64, f64)>,
    pub r_min: f64,
    pub r_max: f64,
    pub samples: usize,
}

struct MultifractalPoint {
    x_q: Vec<f64>,
    delta_q: Vec<f64>,
    x: f64,
    weyl: Vec<f64>,
}

/// Links grouped by distance rounded to an integer; a shell is kept when its
/// integer radius lies in the window.
fn shells(radius: &[f64], r_min: f64, r_max: f64) -> Vec<(f64, Vec<usize>)> {
    let mut m: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (l, &r) in radius.iter().enumerate() {
        let k = r.round();
        if k >= r_min - 1e-9 && k <= r_max + 1e-9 {
            m.entry(k as i64).or_default().push(l);
        }
    }
    m.into_values().map(|links| {
            let mut r: Vec<f64> = links.iter().map(|&l| radius[l]).collect();
            (median(&mut r), links)
        })
        .collect()
}

fn weyl_pairs(q: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, &a) in q.iter().enumerate() {
        if a < 0.5 - 1e-12 {
            if let Some(j) = q.iter().position(|&b| (a + b - 1.0).abs() < 1e-12) {
                out.push((i, j));
            }
        }
    }
    out
}

fn multifractal_point(
    data: &MomentBatches,
    pick: &[usize],
    shells: &[(f64, Vec<usize>)],
    i1: usize,
    pairs: &[(usize, usize)],
) -> Option<MultifractalPoint> {
    let n_links = data.radius.len();
    let mut x_q = Vec::with_capacity(data.q.len());
    for iq in 0..data.q.len() {
        let mut mean = vec![0.0; n_links];
        for &b in pick {
            for (m, v) in mean.iter_mut().zip(&data.batches[b][iq]) {
                *m += v;
            }
        }
        let profile: Vec<(f64, f64)> = shells
            .iter()
            .map(|(r, links)| {
                let mut v: Vec<f64> = links.iter().map(|&l| mean[l] / pick.len() as f64).collect();
                (*r, median(&mut v))
            })
            .collect();
        let fit = fit_power_law(&profile).ok()?;
        x_q.push(-0.5 * fit.exponent);
    }
    let x1 = x_q[i1];
    let delta_q: Vec<f64> = data.q.iter().zip(&x_q).map(|(q, x)| x - q * x1).collect();
    let (num, den) = data.q.iter().zip(&delta_q).fold((0.0, 0.0), |(n, d), (q, dq)| {
        let p = q * (1.0 - q);
        (n + dq * p, d + p * p)
    });
    let weyl = pairs.iter().map(|&(i, j)| delta_q[i] - delta_q[j]).collect();
    Some(MultifractalPoint {
        x_q,
        delta_q,
        x: num / den,
        weyl,
    })
}

/// `X_q = −½ · slope(log E|ψ|^{2q} vs log r)`, `Δ_q = X_q − q X_1` and the
/// parabola coefficient, with bootstrap errors over batches. Each radial
/// shell contributes the median over its links of the ensemble means.
pub fn multifractal_spectrum(
    data: &MomentBatches,
    r_min: f64,
    r_max: f64,
    resamples: usize,
    seed: u64,
) -> Result<MultifractalFit> {
    let i1 = data
        .q
        .iter()
        .position(|&q| (q - 1.0).abs() < 1e-12)
        .ok_or_else(|| Error::Fit("q grid must contain q = 1".into()))?;
    if data.q.iter().filter(|&&q| (q * (1.0 - q)).abs() > 1e-12).count() == 0 {
        return Err(Error::Fit("q grid has no point off {0, 1}".into()));
    }
    if data.batches.is_empty() {
        return Err(Error::Fit("no moment batches".into()));
    }
    for b in &data.batches {
        if b.len() != data.q.len() || b.iter().any(|v| v.len() != data.radius.len()) {
            return Err(Error::Fit("moment batch shape mismatch".into()));
        }
    }
    let sh = shells(&data.radius, r_min, r_max);
    let pairs = weyl_pairs(&data.q);
    let all: Vec<usize> = (0..data.batches.len()).collect();
    let point = multifractal_point(data, &all, &sh, i1, &pairs)
        .ok_or_else(|| Error::Fit("moment profile not fittable (too few shells or non-positive)".into()))?;
    let nq = data.q.len();
    let np = pairs.len();
    // one bootstrap pass, components: x_q (nq), delta_q (nq), x, weyl (np)
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(resamples);
    bootstrap(data.batches.len(), resamples, seed, |pick| {
        let p = multifractal_point(data, pick, &sh, i1, &pairs)?;
        let mut v = p.x_q;
        v.extend(p.delta_q);
        v.push(p.x);
        v.extend(p.weyl);
        draws.push(v);
        Some(0.0)
    });
    let width = 2 * nq + 1 + np;
    let err: Vec<f64> = (0..width)
        .map(|k| {
            let n = draws.len();
            if n < 2 {
                return 0.0;
            }
            let m = draws.iter().map(|d| d[k]).sum::<f64>() / n as f64;
            (draws.iter().map(|d| (d[k] - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        })
        .collect();
    Ok(MultifractalFit {
        q: data.q.clone(),
        x_q: point.x_q,
        x_q_err: err[..nq].to_vec(),
        delta_q: point.delta_q,
        delta_q_err: err[nq..2 * nq].to_vec(),
        x: point.x,
        x_err: err[2 * nq],
        weyl: pairs
            .iter()
            .enumerate()
            .map(|(k, &(i, _))| (data.q[i], point.weyl[k], err[2 * nq + 1 + k]))
            .collect(),
        r_min,
        r_max,
        samples: data.samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{build_us, compose_t, sample_disorder, DisorderRealization, Regularization, ScatteringParams};
    use crate::lattice::{build_medial, LinkKind};

    fn landauer(geom: &NetworkGeometry, t: &EvolutionOperator<f64>) -> f64 {
        // flux from bottom entrances reaching top exits
        let fact = GreenFactorization::factorize(t).unwrap();
        let mid = geom.ly() as f64 / 2.0;
        let mut g = 0.0;
        for a in geom.links().iter().filter(|l| l.kind == LinkKind::Entrance && l.midpoint.1 < mid) {
            let col = fact.column(a.id);
            for b in geom.links().iter().filter(|l| l.kind == LinkKind::Exit && l.midpoint.1 > mid) {
                g += col[b.id].norm_sqr();
            }
        }
        g
    }

    #[test]
    fn kubo_matches_landauer() {
        let g = NetworkGeometry::new(8, 8, Topology::CylinderX).unwrap();
        let m = build_medial(&g);
        let us = build_us::<f64>(&g, &ScatteringParams::critical());
        for i in 0..4 {
            let t = compose_t(&us, &sample_disorder(&g, 11, i), &Regularization::None).unwrap();
            let c1 = Cycle::row(&g, 2).unwrap();
            let c2 = Cycle::row(&g, 5).unwrap();
            let s = conductance(&g, &m, &t, &c1, &c2).unwrap();
            let l = landauer(&g, &t);
            assert!(s.imag.abs() < 1e-10);
            assert!((s.g - l).abs() < 1e-10, "kubo {} landauer {}", s.g, l);
        }
    }

    #[test]
    fn full_cut_blocks_transport() {
        let g = NetworkGeometry::new(8, 8, Topology::CylinderX).unwrap();
        let m = build_medial(&g);
        let us = build_us::<f64>(&g, &ScatteringParams::critical());
        let cut: Vec<LinkId> = (0..8).map(|x| g.vertical_link(x, 3)).collect();
        let t = compose_t(&us, &sample_disorder(&g, 2, 0), &Regularization::PointContacts(cut)).unwrap();
        let s = conductance(&g, &m, &t, &Cycle::row(&g, 1).unwrap(), &Cycle::row(&g, 6).unwrap()).unwrap();
        assert!(s.g.abs() < 1e-14);
    }

    #[test]
    fn conductance_depends_on_homology_class_only() {
        let g = NetworkGeometry::new(8, 10, Topology::CylinderX).unwrap();
        let m = build_medial(&g);
        let us = build_us::<f64>(&g, &ScatteringParams::critical());
        let t = compose_t(&us, &sample_disorder(&g, 4, 1), &Regularization::None).unwrap();
        let c1 = Cycle::row(&g, 2).unwrap();
        let c2 = Cycle::row(&g, 7).unwrap();
        let g0 = conductance(&g, &m, &t, &c1, &c2).unwrap().g;
        for (x, y) in [(1, 2), (4, 1), (5, 2)] {
            let d = c1.deformed(&m, m.two_cell_id(x, y).unwrap()).unwrap();
            let g1 = conductance(&g, &m, &t, &d, &c2).unwrap().g;
            assert!((g1 - g0).abs() < 1e-10);
        }
        let d2 = c2.deformed(&m, m.two_cell_id(3, 6).unwrap()).unwrap();
        assert!((conductance(&g, &m, &t, &c1, &d2).unwrap().g - g0).abs() < 1e-10);
    }

    #[test]
    fn conductance_rejects_bad_cycles() {
        let g = NetworkGeometry::new(8, 8, Topology::CylinderX).unwrap();
        let m = build_medial(&g);
        let us = build_us::<f64>(&g, &ScatteringParams::critical());
        let t = compose_t(&us, &DisorderRealization::clean(g.n_links()), &Regularization::None).unwrap();
        let row = |y| Cycle::row(&g, y).unwrap();
        for (a, b) in [(0, 5), (2, 7), (3, 4), (3, 3)] {
            assert!(matches!(conductance(&g, &m, &t, &row(a), &row(b)), Err(Error::Domain(_))));
        }
        let tg = NetworkGeometry::new(8, 8, Topology::Torus).unwrap();
        let tm = build_medial(&tg);
        let tr = Cycle::row(&tg, 2).unwrap();
        assert!(conductance(&tg, &tm, &t, &tr, &tr).is_err());
    }

    #[test]
    fn power_law_exact_and_window_rules() {
        let pts: Vec<(f64, f64)> = (2..9).map(|r| (r as f64, 3.0 * (r as f64).powf(-2.0))).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.exponent + 2.0).abs() < 1e-12);
        assert!((f.amplitude - 3.0).abs() < 1e-12);
        assert!(f.exponent_stderr() < 1e-10);
        assert!(fit_power_law(&pts[..3]).is_err());
        assert!(check_window(2.0, 8.0, 32).is_ok());
        assert!(check_window(1.0, 8.0, 32).is_err());
        assert!(check_window(2.0, 9.0, 32).is_err());
    }

    fn synthetic(n: f64, noise: f64, seed: u64) -> Vec<ZzPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for dx in -8i32..=8 {
            for dy in -8i32..=8 {
                let w = Complex64::new(dx as f64, dy as f64);
                if w.norm() < 2.0 || w.norm() > 8.0 {
                    continue;
                }
                for dw in [Complex64::new(0.0, 2.0), Complex64::new(2.0, 0.0), Complex64::new(0.0, -2.0)] {
                    let eta = 1.0 + noise * (2.0 * rng.random::<f64>() - 1.0) * 3f64.sqrt();
                    out.push(ZzPoint {
                        w,
                        dw,
                        value: dw * n * eta / (w * w),
                        stderr: 0.0,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn level_fit_recovers_synthetic_amplitude() {
        let f = fit_level_n(&synthetic(4.0, 0.0, 0), 2.0, 8.0).unwrap();
        assert!((f.n_hat - 4.0).abs() < 1e-12);
        assert!((f.exponent + 2.0).abs() < 1e-12);
        assert!(f.imag_residual.abs() < 1e-12);
        let pts = synthetic(4.0, 0.1, 7);
        assert!(pts.len() >= 500);
        let f = fit_level_n(&pts, 2.0, 8.0).unwrap();
        assert!((f.n_hat - 4.0).abs() < 0.2, "n_hat {}", f.n_hat);
        assert!((f.exponent + 2.0).abs() < 0.1);
        assert!(fit_level_n(&pts, 2.0, 2.5).is_err());
    }

    #[test]
    fn ratio_of_synthetic_tables() {
        let s: Vec<ZzPoint> = synthetic(4.0, 0.0, 0).into_iter().map(|p| ZzPoint { stderr: 0.01, ..p }).collect();
        let u: Vec<ZzPoint> = s.iter().map(|p| ZzPoint { value: -p.value / 4.0, ..*p }).collect();
        let r = amplitude_ratio(&s, &u).unwrap();
        assert!((r.ratio - Complex64::new(-4.0, 0.0)).norm() < 1e-12);
        assert!(!r.inconclusive);
        let zero: Vec<ZzPoint> = s.iter().map(|p| ZzPoint { value: Complex64::new(0.0, 0.0), ..*p }).collect();
        assert!(amplitude_ratio(&s, &zero).unwrap().inconclusive);
        assert!(amplitude_ratio(&s, &u[1..]).is_err());
    }

    #[test]
    fn bootstrap_is_seeded() {
        let data: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let stat = |idx: &[usize]| Some(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64);
        let a = bootstrap(50, 200, 3, stat);
        let b = bootstrap(50, 200, 3, stat);
        assert_eq!(a, b);
        let sd = {
            let m = data.iter().sum::<f64>() / 50.0;
            (data.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 49.0 / 50.0).sqrt()
        };
        assert!((a.1 / sd - 1.0).abs() < 0.25);
    }

    fn power_moments(q: &[f64], x_of_q: impl Fn(f64) -> f64, batches: usize) -> MomentBatches {
        let radius: Vec<f64> = (1..20).flat_map(|k| [k as f64 - 0.2, k as f64, k as f64 + 0.2]).collect();
        let one: Vec<Vec<f64>> = q.iter().map(|&qq| radius.iter().map(|r| r.powf(-2.0 * x_of_q(qq))).collect()).collect();
        MomentBatches {
            q: q.to_vec(),
            radius,
            batches: vec![one; batches],
            samples: batches,
        }
    }

    #[test]
    fn multifractal_parabola_from_exact_moments() {
        let q = [-0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5];
        let data = power_moments(&q, |q| 0.9 * q + 0.25 * q * (1.0 - q), 4);
        let f = multifractal_spectrum(&data, 2.0, 16.0, 20, 1).unwrap();
        assert!((f.x - 0.25).abs() < 1e-10, "{:?}", f);
        assert_eq!(f.delta_q[2], 0.0);
        assert!(f.delta_q[6].abs() < 1e-12);
        assert_eq!(f.weyl.len(), 4);
        assert!(f.weyl.iter().all(|w| w.1.abs() < 1e-10));
        assert!(f.x_err < 1e-10);
        let free = power_moments(&q, |q| q, 1);
        let f = multifractal_spectrum(&free, 2.0, 16.0, 10, 1).unwrap();
        assert!(f.delta_q.iter().all(|d| d.abs() < 1e-10));
        let no_one = power_moments(&[0.0, 0.5], |q| q, 1);
        assert!(multifractal_spectrum(&no_one, 2.0, 16.0, 10, 1).is_err());
    }
}
