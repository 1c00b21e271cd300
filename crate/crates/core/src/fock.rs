//! Truncated Fock-space checks of the supersymmetric second quantization
//! `U ↦ ρ(U) = exp Σ c*_α X c^α`, `X = log U`.
//!
//! The four species (retarded/advanced bosons `b±`, fermions `f±`) commute
//! with each other, so every supertrace factorizes into one trace per
//! species. Bosons are truncated at total occupation `N_max`; since the
//! one-body generators conserve particle number, each number sector is
//! exponentiated exactly and only the sectors above `N_max` are dropped.
//!
//! Advanced terms are normal ordered before exponentiation:
//! `−b₋Xb₋† = −b₋†Xᵀb₋ − tr X` and `f₋Xf₋† = tr X − f₋†Xᵀf₋`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `e^{μ n}` with `e^{-∞·0} = 1`.
fn weight(mu: f64, n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        (mu * n as f64).exp()
    }
}

/// Boson occupation basis of `modes` modes, grouped by total number.
#[derive(Clone, Debug)]
pub struct TruncatedFock {
    pub modes: usize,
    pub n_max: usize,
    sectors: Vec<Vec<Vec<usize>>>,
    index: Vec<HashMap<Vec<usize>, usize>>,
}

fn compositions(n: usize, modes: usize) -> Vec<Vec<usize>> {
    if modes == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for k in (0..=n).rev() {
        for mut rest in compositions(n - k, modes - 1) {
            rest.insert(0, k);
            out.push(rest);
        }
    }
    out
}

impl TruncatedFock {
    pub fn new(modes: usize, n_max: usize) -> Result<Self> {
        if modes == 0 || modes > 3 {
            return Err(Error::Parameter(format!(
                "truncated Fock space supports 1 to 3 links, got {modes}"
            )));
        }
        let sectors: Vec<Vec<Vec<usize>>> = (0..=n_max).map(|n| compositions(n, modes)).collect();
        let index = sectors
            .iter()
            .map(|s| s.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect())
            .collect();
        Ok(TruncatedFock {
            modes,
            n_max,
            sectors,
            index,
        })
    }

    pub fn sector_dim(&self, n: usize) -> usize {
        self.sectors[n].len()
    }

    pub fn dim(&self) -> usize {
        self.sectors.iter().map(|s| s.len()).sum()
    }

    /// `Σ A_ij b_i† b_j` restricted to the `n`-particle sector.
    pub fn boson_one_body(&self, a: &CMat, n: usize) -> CMat {
        let basis = &self.sectors[n];
        let mut m = CMat::zeros(basis.len(), basis.len());
        for (col, occ) in basis.iter().enumerate() {
            for i in 0..self.modes {
                for j in 0..self.modes {
                    let aij = a[(i, j)];
                    if aij == c(0.0) || occ[j] == 0 {
                        continue;
                    }
                    let mut out = occ.clone();
                    out[j] -= 1;
                    let amp = (occ[j] as f64).sqrt() * ((out[i] + 1) as f64).sqrt();
                    out[i] += 1;
                    let row = self.index[n][&out];
                    m[(row, col)] += aij * amp;
                }
            }
        }
        m
    }

    /// `exp(Σ A_ij b_i† b_j)` per sector.
    pub fn boson_exp(&self, a: &CMat) -> Vec<CMat> {
        (0..=self.n_max).map(|n| self.boson_one_body(a, n).exp()).collect()
    }

    /// Geometric tail `Σ_{n>N_max} dim(n) e^{μ n}` bounding the dropped
    /// sectors of a trace whose sector blocks have operator norm ≤ 1.
    pub fn tail_bound(&self, mu: f64) -> f64 {
        if mu >= 0.0 {
            return f64::INFINITY;
        }
        let mut tail = 0.0;
        let mut n = self.n_max + 1;
        loop {
            let d = binomial(n + self.modes - 1, self.modes - 1);
            let term = d * (mu * n as f64).exp();
            tail += term;
            if term < 1e-30 * tail.max(1e-300) || n > self.n_max + 10_000 {
                break;
            }
            n += 1;
        }
        tail
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ A_ij f_i† f_j` on the `2^modes` fermion space (occupation bitmasks,
/// Jordan-Wigner ordering).
pub fn fermion_one_body(a: &CMat) -> CMat {
    let modes = a.nrows();
    let dim = 1usize << modes;
    let mut m = CMat::zeros(dim, dim);
    for s in 0..dim {
        for i in 0..modes {
            for j in 0..modes {
                let aij = a[(i, j)];
                if aij == c(0.0) || s & (1 << j) == 0 {
                    continue;
                }
                let s1 = s & !(1 << j);
                let sign_j = (s & ((1 << j) - 1)).count_ones();
                if s1 & (1 << i) != 0 {
                    continue;
                }
                let sign_i = (s1 & ((1 << i) - 1)).count_ones();
                let s2 = s1 | (1 << i);
                let sign = if (sign_i + sign_j) % 2 == 0 { 1.0 } else { -1.0 };
                m[(s2, s)] += aij * sign;
            }
        }
    }
    m
}

fn parity(s: usize) -> f64 {
    if s.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Checks unitarity to `1e-10` and returns the principal logarithm
/// (eigenphases in `(−π, π]`).
pub fn unitary_log(u: &CMat) -> Result<CMat> {
    let n = u.nrows();
    if u.ncols() != n {
        return Err(Error::Domain("matrix is not square".into()));
    }
    let res = (u.adjoint() * u - CMat::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if res > 1e-10 {
        return Err(Error::Domain(format!("matrix is not unitary (residual {res:e})")));
    }
    let (q, t) = nalgebra::linalg::Schur::new(u.clone()).unpack();
    let mut d = CMat::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = Complex64::new(0.0, t[(i, i)].arg());
    }
    Ok(&q * d * q.adjoint())
}

/// One-body generators of the four species after normal ordering, with the
/// scalar offsets they carry.
struct Generators {
    x: CMat,
    minus_xt: CMat,
    trace: Complex64,
}

fn generators(u: &CMat) -> Result<Generators> {
    let x = unitary_log(u)?;
    let minus_xt = -x.transpose();
    let trace = x.trace();
    Ok(Generators { x, minus_xt, trace })
}

/// Sector blocks of `ρ(U)` for each species.
#[derive(Clone, Debug)]
pub struct RhoBlocks {
    pub boson_retarded: Vec<CMat>,
    pub fermion_retarded: CMat,
    pub boson_advanced: Vec<CMat>,
    pub fermion_advanced: CMat,
}

pub fn rho_blocks(fock: &TruncatedFock, u: &CMat) -> Result<RhoBlocks> {
    if u.nrows() != fock.modes {
        return Err(Error::Parameter("matrix size differs from the number of links".into()));
    }
    let g = generators(u)?;
    let adv_b = (-g.trace).exp();
    let adv_f = g.trace.exp();
    Ok(RhoBlocks {
        boson_retarded: fock.boson_exp(&g.x),
        fermion_retarded: fermion_one_body(&g.x).exp(),
        boson_advanced: fock.boson_exp(&g.minus_xt).into_iter().map(|m| m * adv_b).collect(),
        fermion_advanced: fermion_one_body(&g.minus_xt).exp() * adv_f,
    })
}

/// Per-species traces of `e^{μN} ρ(U)` (fermions with the parity sign).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeciesTraces {
    pub boson_retarded: Complex64,
    pub fermion_retarded: Complex64,
    pub boson_advanced: Complex64,
    pub fermion_advanced: Complex64,
}

impl SpeciesTraces {
    pub fn product(&self) -> Complex64 {
        self.boson_retarded * self.fermion_retarded * self.boson_advanced * self.fermion_advanced
    }
}

fn boson_trace(blocks: &[CMat], mu: f64, insert: Option<&dyn Fn(usize) -> CMat>) -> Complex64 {
    blocks
        .iter()
        .enumerate()
        .map(|(n, b)| {
            let m = match insert {
                Some(f) => b * f(n),
                None => b.clone(),
            };
            m.trace() * weight(mu, n)
        })
        .sum()
}

fn fermion_supertrace(block: &CMat, mu: f64, insert: Option<&CMat>) -> Complex64 {
    let m = match insert {
        Some(a) => block * a,
        None => block.clone(),
    };
    (0..m.nrows())
        .map(|s| m[(s, s)] * parity(s) * weight(mu, s.count_ones() as usize))
        .sum()
}

fn species_traces(blocks: &RhoBlocks, mu: f64) -> SpeciesTraces {
    SpeciesTraces {
        boson_retarded: boson_trace(&blocks.boson_retarded, mu, None),
        fermion_retarded: fermion_supertrace(&blocks.fermion_retarded, mu, None),
        boson_advanced: boson_trace(&blocks.boson_advanced, mu, None),
        fermion_advanced: fermion_supertrace(&blocks.fermion_advanced, mu, None),
    }
}

/// Scalar identity: truncated supertrace of
/// `exp(ξ0 b₊†b₊ + ξ1 f₊†f₊ − ξ2 b₋b₋† + ξ3 f₋f₋†)` against its closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BreadReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub difference: f64,
    pub tail_bound: f64,
}

pub fn bread_identity(xi: [Complex64; 4], n_max: usize) -> Result<BreadReport> {
    let [x0, x1, x2, x3] = xi;
    if !(x0.re < 0.0 && x2.re > 0.0) {
        return Err(Error::Domain(format!(
            "divergent trace: need Re ξ0 < 0 < Re ξ2, got {} and {}",
            x0.re, x2.re
        )));
    }
    let mut lhs = c(0.0);
    for n0 in 0..=n_max {
        for n2 in 0..=n_max {
            for n1 in 0..2 {
                for n3 in 0..2 {
                    let sign = if (n1 + n3) % 2 == 0 { 1.0 } else { -1.0 };
                    let e = x0 * n0 as f64 + x1 * n1 as f64 - x2 * (n2 + 1) as f64 + x3 * (1 - n3) as f64;
                    lhs += e.exp() * sign;
                }
            }
        }
    }
    let one = c(1.0);
    let rhs = (one - x1.exp()) * (one - x3.exp()) / ((one - x0.exp()) * (one - x2.exp()));
    let a = x0.exp().norm();
    let b = (-x2).exp().norm();
    let ea = a.powi(n_max as i32 + 1) / (1.0 - a);
    let eb = b.powi(n_max as i32 + 1) / (1.0 - b);
    let f = ((one - x1.exp()) * (x3.exp() - one)).norm();
    let full_a = 1.0 / (1.0 - a);
    let full_b = b / (1.0 - b);
    let tail = f * (full_a * eb * b.max(1.0) + (full_b + eb) * ea);
    Ok(BreadReport {
        lhs,
        rhs,
        difference: (lhs - rhs).norm(),
        tail_bound: tail,
    })
}

/// Truncated Gaussian supertrace and its per-species determinant oracles.
#[derive(Clone, Debug, PartialEq)]
pub struct SupertraceReport {
    pub traces: SpeciesTraces,
    pub full: Complex64,
    /// `det(1 − e^μ U)^{-1}`.
    pub boson_retarded_oracle: Complex64,
    /// `det(1 − e^μ U)`.
    pub fermion_retarded_oracle: Complex64,
    /// `det(U)^{-1} det(1 − e^μ Ū)^{-1}`.
    pub boson_advanced_oracle: Complex64,
    /// `det(U) det(1 − e^μ Ū)`.
    pub fermion_advanced_oracle: Complex64,
    pub max_difference: f64,
    pub tail_bound: f64,
}

fn check_supertrace_inputs(u: &CMat, mu: f64, n_max: usize, tol: f64) -> Result<TruncatedFock> {
    if u.nrows() > 2 {
        return Err(Error::Parameter(format!(
            "full supertrace limited to 2 links, got {}",
            u.nrows()
        )));
    }
    if !(mu < 0.0) {
        return Err(Error::Domain(format!("mu = {mu} must be negative")));
    }
    let fock = TruncatedFock::new(u.nrows(), n_max)?;
    let tail = fock.tail_bound(mu);
    if tail > tol {
        return Err(Error::Truncation { tail, tol });
    }
    Ok(fock)
}

pub fn gaussian_supertrace(u: &CMat, mu: f64, n_max: usize, tol: f64) -> Result<SupertraceReport> {
    let fock = check_supertrace_inputs(u, mu, n_max, tol)?;
    let blocks = rho_blocks(&fock, u)?;
    let traces = species_traces(&blocks, mu);
    let n = u.nrows();
    let id = CMat::identity(n, n);
    let em = c(mu.exp());
    let det_r = (&id - u * em).determinant();
    let det_a = (&id - u.map(|z| z.conj()) * em).determinant();
    let det_u = u.determinant();
    let report = SupertraceReport {
        traces,
        full: traces.product(),
        boson_retarded_oracle: c(1.0) / det_r,
        fermion_retarded_oracle: det_r,
        boson_advanced_oracle: c(1.0) / (det_u * det_a),
        fermion_advanced_oracle: det_u * det_a,
        max_difference: 0.0,
        tail_bound: fock.tail_bound(mu),
    };
    let diffs = [
        (report.full - c(1.0)).norm(),
        (traces.boson_retarded - report.boson_retarded_oracle).norm(),
        (traces.fermion_retarded - report.fermion_retarded_oracle).norm(),
        (traces.boson_advanced - report.boson_advanced_oracle).norm(),
        (traces.fermion_advanced - report.fermion_advanced_oracle).norm(),
    ];
    Ok(SupertraceReport {
        max_difference: diffs.into_iter().fold(0.0, f64::max),
        ..report
    })
}

/// The two basic contractions, each computed as a Fock-space expectation
/// `STr e^{μN} ρ(U) A` and as a matrix element of `T = e^μ U`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WickReport {
    /// `⟨b₊†(ℓ1) b₊(ℓ2)⟩`.
    pub boson_retarded: Complex64,
    /// `⟨f₊†(ℓ1) f₊(ℓ2)⟩`.
    pub fermion_retarded: Complex64,
    /// `⟨ℓ2|T(1−T)^{-1}|ℓ1⟩`.
    pub retarded_matrix: Complex64,
    /// `⟨b₋(ℓ1) b₋†(ℓ2)⟩`.
    pub boson_advanced: Complex64,
    /// `⟨f₋(ℓ1) f₋†(ℓ2)⟩`.
    pub fermion_advanced: Complex64,
    /// `⟨ℓ2|(1−T†)^{-1}|ℓ1⟩`.
    pub advanced_matrix: Complex64,
    pub max_difference: f64,
}

fn unit(n: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(i, j)] = c(1.0);
    m
}

pub fn wick_check(u: &CMat, mu: f64, l1: usize, l2: usize, n_max: usize, tol: f64) -> Result<WickReport> {
    let n = u.nrows();
    if l1 >= n || l2 >= n {
        return Err(Error::Index {
            what: "link",
            index: l1.max(l2),
            size: n,
        });
    }
    let fock = if mu == f64::NEG_INFINITY {
        TruncatedFock::new(n, 0)?
    } else {
        check_supertrace_inputs(u, mu, n_max, tol)?
    };
    let blocks = rho_blocks(&fock, u)?;
    let base = species_traces(&blocks, mu);
    let delta = if l1 == l2 { c(1.0) } else { c(0.0) };

    // b₊†(ℓ1) b₊(ℓ2)
    let e12 = unit(n, l1, l2);
    let ins = |k: usize| fock.boson_one_body(&e12, k);
    let br = boson_trace(&blocks.boson_retarded, mu, Some(&ins));
    let boson_retarded = br * base.fermion_retarded * base.boson_advanced * base.fermion_advanced;
    let fr = fermion_supertrace(&blocks.fermion_retarded, mu, Some(&fermion_one_body(&e12)));
    let fermion_retarded = base.boson_retarded * fr * base.boson_advanced * base.fermion_advanced;

    // b₋(ℓ1) b₋†(ℓ2) = b₋†(ℓ2) b₋(ℓ1) + δ, and f₋(ℓ1) f₋†(ℓ2) = δ − f₋†(ℓ2) f₋(ℓ1)
    let e21 = unit(n, l2, l1);
    let ins_adv = |k: usize| {
        let m = fock.boson_one_body(&e21, k);
        let d = m.nrows();
        m + CMat::identity(d, d) * delta
    };
    let ba = boson_trace(&blocks.boson_advanced, mu, Some(&ins_adv));
    let boson_advanced = base.boson_retarded * base.fermion_retarded * ba * base.fermion_advanced;
    let f_ins = CMat::identity(1 << n, 1 << n) * delta - fermion_one_body(&e21);
    let fa = fermion_supertrace(&blocks.fermion_advanced, mu, Some(&f_ins));
    let fermion_advanced = base.boson_retarded * base.fermion_retarded * base.boson_advanced * fa;

    let em = if mu == f64::NEG_INFINITY { 0.0 } else { mu.exp() };
    let t = u * c(em);
    let id = CMat::identity(n, n);
    let ret = &t * (&id - &t).try_inverse().ok_or_else(|| Error::Singular("1 - T".into()))?;
    let adv = (&id - t.adjoint()).try_inverse().ok_or_else(|| Error::Singular("1 - T†".into()))?;
    let retarded_matrix = ret[(l2, l1)];
    let advanced_matrix = adv[(l2, l1)];
    let diffs = [
        (boson_retarded - retarded_matrix).norm(),
        (fermion_retarded + retarded_matrix).norm(),
        (boson_advanced - advanced_matrix).norm(),
        (fermion_advanced - advanced_matrix).norm(),
    ];
    Ok(WickReport {
        boson_retarded,
        fermion_retarded,
        retarded_matrix,
        boson_advanced,
        fermion_advanced,
        advanced_matrix,
        max_difference: diffs.into_iter().fold(0.0, f64::max),
    })
}

/// Haar-random unitary from a seeded complex Gaussian matrix (QR with phase fix).
pub fn random_unitary(n: usize, seed: u64) -> CMat {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = CMat::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut out = q.clone();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        for i in 0..n {
            out[(i, j)] = q[(i, j)] * ph;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bread_trivial_cases() {
        let r = bread_identity([c(-1.0), c(-1.0), c(1.0), c(1.0)], 60).unwrap();
        assert!((r.rhs - c(1.0)).norm() < 1e-15);
        assert!(r.difference < 1e-12);
        let r = bread_identity([c(-1.0), c(0.0), c(1.0), c(0.5)], 60).unwrap();
        assert_eq!(r.rhs, c(0.0));
        assert!(r.lhs.norm() < 1e-12);
        assert!(matches!(bread_identity([c(0.1), c(0.0), c(1.0), c(0.0)], 10), Err(Error::Domain(_))));
    }

    #[test]
    fn bread_generic_point() {
        let xi = [cx(-0.7, 0.3), cx(-0.2, 1.1), cx(0.5, -0.4), cx(0.9, 0.2)];
        let r = bread_identity(xi, 60).unwrap();
        assert!(r.difference < 1e-10, "{r:?}");
        assert!(r.difference <= r.tail_bound);
    }

    #[test]
    fn truncation_converges_geometrically() {
        let xi = [cx(-0.7, 0.3), cx(-0.2, 1.1), cx(0.5, -0.4), cx(0.9, 0.2)];
        let a = bread_identity(xi, 10).unwrap();
        let b = bread_identity(xi, 20).unwrap();
        // slowest geometric ratio is e^{-0.5} per extra level
        let factor = (-0.5f64 * 10.0).exp();
        assert!(b.difference <= a.difference * factor * 1.01);
        assert!(a.difference <= a.tail_bound && b.difference <= b.tail_bound);
    }

    #[test]
    fn one_link_boson_trace() {
        let phi = 0.83;
        let mu = -0.4;
        let u = CMat::from_element(1, 1, Complex64::from_polar(1.0, phi));
        let r = gaussian_supertrace(&u, mu, 80, 1e-10).unwrap();
        let expect = c(1.0) / (c(1.0) - Complex64::from_polar(mu.exp(), phi));
        assert!((r.traces.boson_retarded - expect).norm() < 1e-12);
        assert!((r.full - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn two_link_supertrace_and_determinants() {
        let u = random_unitary(2, 5);
        let r = gaussian_supertrace(&u, -1.0, 40, 1e-10).unwrap();
        assert!(r.max_difference < 1e-8, "{r:?}");
        assert!(matches!(gaussian_supertrace(&random_unitary(3, 1), -1.0, 10, 1e-8), Err(Error::Parameter(_))));
        assert!(matches!(gaussian_supertrace(&u, -1.0, 5, 1e-8), Err(Error::Truncation { .. })));
        let bad = &u * c(0.9);
        assert!(matches!(gaussian_supertrace(&bad, -1.0, 40, 1e-8), Err(Error::Domain(_))));
    }

    #[test]
    fn wick_contractions() {
        let u = random_unitary(2, 9);
        for (l1, l2) in [(0, 0), (0, 1), (1, 0)] {
            let w = wick_check(&u, -1.0, l1, l2, 40, 1e-10).unwrap();
            assert!(w.max_difference < 1e-8, "{w:?}");
            assert!((w.fermion_retarded + w.boson_retarded).norm() < 1e-8);
        }
    }

    #[test]
    fn wick_at_zero_fugacity() {
        let u = random_unitary(2, 2);
        for (l1, l2) in [(0, 0), (0, 1)] {
            let w = wick_check(&u, f64::NEG_INFINITY, l1, l2, 0, 0.0).unwrap();
            assert_eq!(w.boson_retarded, c(0.0));
            let d = if l1 == l2 { 1.0 } else { 0.0 };
            assert!((w.boson_advanced - c(d)).norm() < 1e-14);
            assert!((w.fermion_advanced - c(d)).norm() < 1e-14);
        }
    }

    #[test]
    fn second_quantization_is_multiplicative() {
        let fock = TruncatedFock::new(1, 12).unwrap();
        let a = CMat::from_element(1, 1, Complex64::from_polar(1.0, 2.9));
        let b = CMat::from_element(1, 1, Complex64::from_polar(1.0, 1.7));
        let ab = &a * &b;
        let (ra, rb, rab) = (
            rho_blocks(&fock, &a).unwrap(),
            rho_blocks(&fock, &b).unwrap(),
            rho_blocks(&fock, &ab).unwrap(),
        );
        let close = |x: &CMat, y: &CMat| (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-8;
        for n in 0..=12 {
            assert!(close(&(&ra.boson_retarded[n] * &rb.boson_retarded[n]), &rab.boson_retarded[n]));
            assert!(close(&(&ra.boson_advanced[n] * &rb.boson_advanced[n]), &rab.boson_advanced[n]));
        }
        assert!(close(&(&ra.fermion_retarded * &rb.fermion_retarded), &rab.fermion_retarded));
        assert!(close(&(&ra.fermion_advanced * &rb.fermion_advanced), &rab.fermion_advanced));
    }

    #[test]
    fn sector_dimensions() {
        let f = TruncatedFock::new(2, 4).unwrap();
        assert_eq!((0..=4).map(|n| f.sector_dim(n)).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        assert_eq!(f.dim(), 15);
        assert!(TruncatedFock::new(4, 2).is_err());
    }

    #[test]
    fn fermion_operators_anticommute() {
        let n = 3;
        let op = |i: usize, j: usize| fermion_one_body(&unit(n, i, j));
        // [f0†f1, f1†f2] = f0†f2
        let comm = &op(0, 1) * &op(1, 2) - &op(1, 2) * &op(0, 1);
        assert!((comm - op(0, 2)).iter().all(|z| z.norm() < 1e-15));
    }
}
