//! Z4 quadruplet structure, spinor/Bloch diagonalization of the clean
//! network and the Dirac-cone check.
//!
//! Unit cells are centered on *counterclockwise* plaquettes: the cell at
//! `r = (a, b)` has lower-left node `(2a + 1, 2b)`. Internal links are the
//! four sides of the central plaquette (0 = bottom, 1 = right, 2 = top,
//! 3 = left), and the external link `l'` is the other link entering the node
//! where internal link `l` ends. With this anchoring the projected blocks
//! reproduce the closed-form transfer blocks exactly; centering cells on
//! clockwise plaquettes flips the sign of the off-diagonal entries.

use faer::Mat;
use nalgebra::{ComplexField, DMatrix, Matrix2};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::EvolutionOperator;
use crate::lattice::{LinkId, NetworkGeometry, Topology};
use crate::scalar::{abs, cis, Real};

fn c<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// `i^l` for any integer `l`.
fn i_pow<T: Real>(l: i64) -> Complex<T> {
    match l.rem_euclid(4) {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), -T::one()),
    }
}

/// Momentum component entering the block `H_{l-1} → H_l`.
pub fn kappa<T: Real>(l: usize, k: [T; 2]) -> T {
    match l % 4 {
        1 => -k[1],
        2 => k[0],
        3 => k[1],
        _ => -k[0],
    }
}

/// Clean critical transfer block `u_{l,l-1}(k)` in the spinor basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochBlock<T: Real> {
    pub l: usize,
    pub k: [T; 2],
    pub matrix: Matrix2<Complex<T>>,
}

pub fn bloch_block<T: Real>(l: usize, k: [T; 2]) -> BlochBlock<T> {
    let half = T::lit(0.5);
    let e = cis(kappa(l, k));
    let one = c(T::one());
    let d = (one + e) * half;
    let o = (one - e) * half;
    let il = l as i64;
    let matrix = Matrix2::new(d, i_pow::<T>(il) * o, i_pow::<T>(-il) * o, d);
    BlochBlock { l: l % 4, k, matrix }
}

/// `u_{l,l-1} u_{l-1,l-2} u_{l-2,l-3} u_{l+1,l}`: four steps returning to `H_l`.
pub fn cyclic_product<T: Real>(l: usize, k: [T; 2]) -> Matrix2<Complex<T>> {
    let mut p = Matrix2::identity();
    for j in 0..4 {
        p *= bloch_block(l + 4 - j, k).matrix;
    }
    p
}

/// The four internal and four external links of the cell at `(a, b)`.
pub fn cell_links(geom: &NetworkGeometry, a: i64, b: i64) -> ([LinkId; 4], [LinkId; 4]) {
    let (x0, y0) = (2 * a + 1, 2 * b);
    let internal = [
        geom.horizontal_link(x0, y0),
        geom.vertical_link(x0 + 1, y0),
        geom.horizontal_link(x0, y0 + 1),
        geom.vertical_link(x0, y0),
    ];
    let external = [
        geom.horizontal_link(x0 + 1, y0),
        geom.vertical_link(x0 + 1, y0 + 1),
        geom.horizontal_link(x0 - 1, y0 + 1),
        geom.vertical_link(x0, y0 - 1),
    ];
    (internal, external)
}

/// Normalized plane-wave spinor `ẽ_l^σ(k)` as a link-space vector;
/// `sigma = +1` or `-1`.
pub fn spinor_vector<T: Real>(geom: &NetworkGeometry, l: usize, sigma: i8, k: [T; 2]) -> Result<Vec<Complex<T>>> {
    if geom.topology() != Topology::Torus {
        return Err(Error::Domain("spinor basis needs a torus".into()));
    }
    let (na, nb) = (geom.lx() / 2, geom.ly() / 2);
    let norm = T::one() / ComplexField::sqrt(T::lit((2 * na * nb) as f64));
    let mut v = vec![c(T::zero()); geom.n_links()];
    let ext_coef = if sigma > 0 {
        c(T::one())
    } else {
        -c(T::one())
    };
    let spin = if sigma > 0 {
        c(T::one())
    } else {
        i_pow::<T>(l as i64)
    };
    for a in 0..na {
        for b in 0..nb {
            let (int, ext) = cell_links(geom, a as i64, b as i64);
            let phase = cis(-(k[0] * T::lit(a as f64) + k[1] * T::lit(b as f64)));
            let w = phase * spin * norm;
            v[int[l % 4]] += w;
            v[ext[l % 4]] += w * ext_coef;
        }
    }
    Ok(v)
}

fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(c(T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

/// Numerical block `⟨ẽ_l^σ(k)| U |ẽ_{l-1}^τ(k)⟩`.
pub fn project_block<T: Real>(
    geom: &NetworkGeometry,
    u: &EvolutionOperator<T>,
    l: usize,
    k: [T; 2],
) -> Result<Matrix2<Complex<T>>> {
    let from = (l + 3) % 4;
    let mut m = Matrix2::zeros();
    for (i, s) in [1i8, -1].into_iter().enumerate() {
        let bra = spinor_vector(geom, l, s, k)?;
        for (j, t) in [1i8, -1].into_iter().enumerate() {
            let ket = u.apply(&spinor_vector(geom, from, t, k)?);
            m[(i, j)] = inner(&bra, &ket);
        }
    }
    Ok(m)
}

/// Allowed Bloch momenta of a torus, in cell units.
pub fn momenta<T: Real>(geom: &NetworkGeometry) -> Vec<[T; 2]> {
    let (na, nb) = (geom.lx() / 2, geom.ly() / 2);
    let mut ks = Vec::with_capacity(na * nb);
    for i in 0..na {
        for j in 0..nb {
            ks.push([
                T::TAU() * T::lit(i as f64) / T::lit(na as f64),
                T::TAU() * T::lit(j as f64) / T::lit(nb as f64),
            ]);
        }
    }
    ks
}

fn arg<T: Real>(z: Complex<T>) -> T {
    z.im.atan2(z.re)
}

/// Eigenphases `ε` of the cyclic product (`U⁴` on `H_l`) at momentum `k`.
pub fn cyclic_phases<T: Real>(k: [T; 2]) -> [T; 2] {
    let p = cyclic_product(0, k);
    // eigenvalues of a 2x2 matrix
    let tr = p[(0, 0)] + p[(1, 1)];
    let det = p[(0, 0)] * p[(1, 1)] - p[(0, 1)] * p[(1, 0)];
    let half = T::lit(0.5);
    let disc = ComplexField::sqrt(tr * tr * half * half - det);
    let (l1, l2) = (tr * half + disc, tr * half - disc);
    let (mut e1, mut e2) = (arg(l1), arg(l2));
    if e1 > e2 {
        std::mem::swap(&mut e1, &mut e2);
    }
    [e1, e2]
}

/// Eigenphases of the clean `U_s` from the Bloch blocks: for each `k`, the
/// eight values `(ε_± + 2πm)/4`, folded to `(-π, π]`.
pub fn bloch_eigenphases<T: Real>(geom: &NetworkGeometry) -> Vec<([T; 2], usize, T)> {
    let mut out = Vec::new();
    for k in momenta::<T>(geom) {
        let eps = cyclic_phases(k);
        for m in 0..4 {
            for (s, &e) in eps.iter().enumerate() {
                let w = (e + T::TAU() * T::lit(m as f64)) / T::lit(4.0);
                out.push((k, 2 * m + s, fold_phase(w)));
            }
        }
    }
    out
}

pub fn fold_phase<T: Real>(w: T) -> T {
    let tau = T::TAU();
    let mut w = w % tau;
    if w > T::PI() {
        w -= tau;
    }
    if w <= -T::PI() {
        w += tau;
    }
    w
}

pub fn to_faer<T: Real>(m: &DMatrix<Complex<T>>) -> Mat<Complex<T>> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// All eigenvalues of a dense matrix.
pub fn eigenvalues<T: Real>(m: &DMatrix<Complex<T>>) -> Result<Vec<Complex<T>>> {
    to_faer(m)
        .eigenvalues()
        .map_err(|e| Error::Singular(format!("eigenvalue solver failed: {e:?}")))
}

/// Largest distance in an optimal greedy matching of two eigenvalue multisets.
pub fn multiset_distance<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst = T::zero();
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| arg(a[i]).partial_cmp(&arg(a[j])).unwrap());
    for i in order {
        let mut best = None;
        for (j, &bj) in b.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = abs(a[i] - bj);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, d) = best.unwrap();
        used[j] = true;
        if d > worst {
            worst = d;
        }
    }
    worst
}

/// `Ψ_m = Σ_{l=0}^{3} (e^{-i(ε+2πm)/4} U)^l ψ` for `ψ` supported on `H₀`.
pub fn z4_extend<T: Real>(
    geom: &NetworkGeometry,
    u: &EvolutionOperator<T>,
    psi: &[Complex<T>],
    eps: T,
    m: usize,
) -> Result<Vec<Complex<T>>> {
    let tol = T::lit(1e-12);
    for (l, z) in psi.iter().enumerate() {
        if geom.link(l).class != 0 && abs(*z) > tol {
            return Err(Error::Domain(format!(
                "input vector has weight on link {l} outside H0"
            )));
        }
    }
    let lambda = cis(-(eps + T::TAU() * T::lit(m as f64)) / T::lit(4.0));
    let mut term = psi.to_vec();
    let mut out = psi.to_vec();
    for _ in 1..4 {
        term = u.apply(&term).into_iter().map(|z| z * lambda).collect();
        for (o, t) in out.iter_mut().zip(&term) {
            *o += t;
        }
    }
    Ok(out)
}

/// One eigenvalue of `U⁴|H₀` lifted to its four eigenvectors of `U`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadrupletReport {
    pub epsilon: f64,
    /// `e^{i(ε+2πm)/4}` for `m = 0..3`, as (re, im).
    pub eigenvalues: [(f64, f64); 4],
    /// `‖UΨ_m − λ_m Ψ_m‖ / ‖Ψ_m‖`.
    pub residuals: [f64; 4],
    /// Residual of the `H₀` eigenvector itself.
    pub input_residual: f64,
}

fn norm<T: Real>(v: &[Complex<T>]) -> T {
    ComplexField::sqrt(v.iter().fold(T::zero(), |a, z| a + z.re * z.re + z.im * z.im))
}

/// Diagonalize `U⁴` on `H₀` and lift every eigenvector to a quadruplet.
pub fn quadruplets<T: Real>(geom: &NetworkGeometry, u: &EvolutionOperator<T>) -> Result<Vec<QuadrupletReport>> {
    let h0 = geom.class_links(0);
    let n = h0.len();
    let mut block = DMatrix::from_element(n, n, c(T::zero()));
    for (j, &lj) in h0.iter().enumerate() {
        let mut v = vec![c(T::zero()); u.n()];
        v[lj] = c(T::one());
        for _ in 0..4 {
            v = u.apply(&v);
        }
        for (i, &li) in h0.iter().enumerate() {
            block[(i, j)] = v[li];
        }
    }
    let evd = to_faer(&block)
        .eigen()
        .map_err(|e| Error::Singular(format!("eigen solver failed: {e:?}")))?;
    let (vecs, vals) = (evd.U(), evd.S());
    let mut reports = Vec::with_capacity(n);
    for j in 0..n {
        let lam = vals.column_vector()[j];
        let eps = arg(lam);
        let mut psi = vec![c(T::zero()); u.n()];
        for (i, &li) in h0.iter().enumerate() {
            psi[li] = vecs[(i, j)];
        }
        let nrm = norm(&psi);
        for z in psi.iter_mut() {
            *z /= c(nrm);
        }
        let mut u4 = psi.clone();
        for _ in 0..4 {
            u4 = u.apply(&u4);
        }
        let target = cis(eps);
        let r_in: Vec<_> = u4.iter().zip(&psi).map(|(a, b)| a - b * target).collect();
        let mut eigenvalues = [(0.0, 0.0); 4];
        let mut residuals = [0.0; 4];
        for m in 0..4 {
            let big = z4_extend(geom, u, &psi, eps, m)?;
            let lm = cis((eps + T::TAU() * T::lit(m as f64)) / T::lit(4.0));
            let ub = u.apply(&big);
            let r: Vec<_> = ub.iter().zip(&big).map(|(a, b)| a - b * lm).collect();
            eigenvalues[m] = (lm.re.to_f64_lossy(), lm.im.to_f64_lossy());
            residuals[m] = (norm(&r) / norm(&big)).to_f64_lossy();
        }
        reports.push(QuadrupletReport {
            epsilon: eps.to_f64_lossy(),
            eigenvalues,
            residuals,
            input_residual: norm(&r_in).to_f64_lossy(),
        });
    }
    Ok(reports)
}

/// Dispersion of the clean critical network near the Dirac points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiracReport {
    pub l: usize,
    /// (k_x, k_y, |ε|/|k|) for the smallest nonzero momenta.
    pub samples: Vec<(f64, f64, f64)>,
    pub max_relative_deviation: f64,
    /// `|ε(δ,0)| − |ε(0,δ)|` at the smallest momentum.
    pub anisotropy: f64,
    /// Eigenvalues of `U` at `k = 0`, as (re, im).
    pub centers: Vec<(f64, f64)>,
}

/// Ratio `|ε(k)| / |k|` for the positive branch; `1` on the Dirac cone.
pub fn cone_ratio<T: Real>(k: [T; 2]) -> T {
    let eps = cyclic_phases(k);
    let kn = ComplexField::sqrt(k[0] * k[0] + k[1] * k[1]);
    eps[1].abs() / kn
}

/// Check `|ε(k)| = |k| + O(k²)` on an `L x L` torus (cell grid `L/2`).
pub fn dirac_check(l: usize) -> Result<DiracReport> {
    if l < 16 || !l.is_multiple_of(2) {
        return Err(Error::Parameter(format!("dirac_check needs even L >= 16, got {l}")));
    }
    let d = std::f64::consts::TAU / (l / 2) as f64;
    let ks = [[d, 0.0], [0.0, d], [d, d], [-d, 0.0], [0.0, -d]];
    let samples: Vec<_> = ks.iter().map(|&k| (k[0], k[1], cone_ratio(k))).collect();
    let max_relative_deviation = samples
        .iter()
        .map(|s| (s.2 - 1.0).abs())
        .fold(0.0, f64::max);
    let ex = cyclic_phases([d, 0.0])[1];
    let ey = cyclic_phases([0.0, d])[1];
    let centers = (0..4)
        .flat_map(|m| {
            cyclic_phases([0.0, 0.0]).map(|e| {
                let z = cis((e + std::f64::consts::TAU * m as f64) / 4.0);
                (z.re, z.im)
            })
        })
        .collect();
    Ok(DiracReport {
        l,
        samples,
        max_relative_deviation,
        anisotropy: (ex.abs() - ey.abs()).abs(),
        centers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{build_us, compose_u, sample_disorder, ScatteringParams};
    use num_complex::Complex64;

    fn close(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn block_at_zero_momentum_is_identity() {
        for l in 0..4 {
            assert!(close(&bloch_block(l, [0.0, 0.0]).matrix, &Matrix2::identity()) < 1e-15);
        }
    }

    #[test]
    fn block_two_at_pi() {
        let b = bloch_block(2, [std::f64::consts::PI, 0.0]).matrix;
        let expect = Matrix2::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 0.0),
        );
        assert!(close(&b, &expect) < 1e-15);
    }

    #[test]
    fn blocks_are_unitary() {
        for l in 0..4 {
            let b = bloch_block(l, [0.7, -1.9]).matrix;
            assert!(close(&(b.adjoint() * b), &Matrix2::identity()) < 1e-12);
        }
    }

    #[test]
    fn first_block_matches_closed_form() {
        let ky = 0.37;
        let e = Complex64::new(0.0, -ky).exp();
        let i = Complex64::i();
        let expect = Matrix2::new(1.0 + e, i * (1.0 - e), -i * (1.0 - e), 1.0 + e) * Complex64::new(0.5, 0.0);
        assert!(close(&bloch_block(1, [1.3, ky]).matrix, &expect) < 1e-15);
    }

    #[test]
    fn spinor_basis_is_orthonormal() {
        let g = NetworkGeometry::new(8, 8, Topology::Torus).unwrap();
        let k = momenta::<f64>(&g)[5];
        let mut vs = Vec::new();
        for l in 0..4 {
            for s in [1, -1] {
                vs.push(spinor_vector(&g, l, s, k).unwrap());
            }
        }
        for (i, a) in vs.iter().enumerate() {
            for (j, b) in vs.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((inner(a, b) - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cell_links_have_expected_classes() {
        let g = NetworkGeometry::new(8, 8, Topology::Torus).unwrap();
        let (int, ext) = cell_links(&g, 1, 2);
        for l in 0..4 {
            assert_eq!(g.link(int[l]).class as usize, l);
            assert_eq!(g.link(ext[l]).class as usize, l);
            assert_eq!(g.link(int[l]).head, g.link(ext[l]).head);
        }
    }

    #[test]
    fn projected_blocks_match_closed_form() {
        let g = NetworkGeometry::new(8, 8, Topology::Torus).unwrap();
        let us = build_us(&g, &ScatteringParams::<f64>::critical());
        for k in momenta::<f64>(&g) {
            for l in 0..4 {
                let num = project_block(&g, &us, l, k).unwrap();
                assert!(close(&num, &bloch_block(l, k).matrix) < 1e-10, "l={l} k={k:?}");
            }
        }
    }

    #[test]
    fn clean_spectrum_is_union_of_bloch_spectra() {
        let g = NetworkGeometry::new(8, 8, Topology::Torus).unwrap();
        let us = build_us(&g, &ScatteringParams::<f64>::critical());
        let numeric = eigenvalues(&us.to_dense()).unwrap();
        let bloch: Vec<Complex64> = bloch_eigenphases::<f64>(&g)
            .into_iter()
            .map(|(_, _, w)| Complex64::new(0.0, w).exp())
            .collect();
        assert_eq!(numeric.len(), bloch.len());
        assert!(multiset_distance(&numeric, &bloch) < 1e-10);
    }

    #[test]
    fn disordered_quadruplets() {
        let g = NetworkGeometry::new(4, 4, Topology::Torus).unwrap();
        let us = build_us(&g, &ScatteringParams::<f64>::critical());
        let u = compose_u(&us, &sample_disorder(&g, 11, 0)).unwrap();
        let reps = quadruplets(&g, &u).unwrap();
        assert_eq!(reps.len(), 8);
        for r in &reps {
            for m in 0..4 {
                assert!(r.residuals[m] < 1e-10, "{r:?}");
            }
            let (a, b) = (r.eigenvalues[0], r.eigenvalues[2]);
            assert!((a.0 + b.0).abs() < 1e-12 && (a.1 + b.1).abs() < 1e-12);
        }
        let spec = eigenvalues(&u.to_dense()).unwrap();
        let rotated: Vec<_> = spec.iter().map(|z| z * Complex64::i()).collect();
        assert!(multiset_distance(&spec, &rotated) < 1e-10);
    }

    #[test]
    fn z4_extend_rejects_vectors_off_h0() {
        let g = NetworkGeometry::new(4, 4, Topology::Torus).unwrap();
        let us = build_us(&g, &ScatteringParams::<f64>::critical());
        let mut v = vec![Complex64::new(0.0, 0.0); g.n_links()];
        v[g.class_links(1)[0]] = Complex64::new(1.0, 0.0);
        assert!(matches!(z4_extend(&g, &us, &v, 0.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn dirac_cone_along_axes() {
        for l in [16, 32, 64] {
            let r = dirac_check(l).unwrap();
            assert!(r.anisotropy < 1e-10);
            for s in &r.samples[..2] {
                assert!((s.2 - 1.0).abs() < 1e-2);
            }
        }
        let d = std::f64::consts::TAU / 64.0;
        let ratio = cone_ratio([d, 0.0]);
        assert!((0.99..=1.01).contains(&ratio));
        let r = dirac_check(32).unwrap();
        let mut centers = r.centers.clone();
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut expect = vec![(1.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.0, 1.0), (-1.0, 0.0), (-1.0, 0.0), (0.0, -1.0), (0.0, -1.0)];
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in centers.iter().zip(&expect) {
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
    }
}
