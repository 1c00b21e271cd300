//! Exactness suite: identities that hold per realization to machine
//! precision, checked at fixed small sizes.

use std::time::Instant;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cochain::DoubleCochain;
use crate::error::{Error, Result};
use crate::evolution::{build_us, compose_t, compose_u, sample_disorder, EvolutionOperator, Regularization, ScatteringParams};
use crate::fock::{bread_identity, gaussian_supertrace, random_unitary, wick_check};
use crate::greens::GreenFactorization;
use crate::lattice::{build_medial, Cycle, LinkId, NetworkGeometry, Topology};
use crate::observables::conductance;
use crate::spectral::{bloch_block, cyclic_product, eigenvalues, momenta, multiset_distance, project_block, quadruplets};

/// Knobs of the exactness suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    /// Linear size of the torus used by the Bloch and Kirchhoff checks.
    pub l: usize,
    pub seed: u64,
    /// Relabel left and right turns in `U_s` before checking (negative control).
    pub swap_turns: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            l: 8,
            seed: 1,
            swap_turns: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: u8,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
}

fn check(id: u8, name: &str, value: f64, tolerance: f64, start: Instant) -> CheckResult {
    CheckResult {
        id,
        name: name.to_string(),
        value,
        tolerance,
        passed: value.is_finite() && value < tolerance,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn us_for(geom: &NetworkGeometry, opts: &ValidationOptions) -> EvolutionOperator<f64> {
    let us = build_us::<f64>(geom, &ScatteringParams::critical());
    if opts.swap_turns {
        us.with_turns_swapped()
    } else {
        us
    }
}

fn torus(l: usize) -> Result<NetworkGeometry> {
    NetworkGeometry::new(l, l, Topology::Torus)
}

fn max_entry(m: &Matrix2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Unitarity of `U` for several tori and the class advance `H_l → H_{l+1}`.
pub fn check_unitarity(opts: &ValidationOptions) -> Result<Vec<CheckResult>> {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut structure: f64 = 0.0;
    for l in [4, 8, 12, 16] {
        let g = torus(l)?;
        let u = compose_u(&us_for(&g, opts), &sample_disorder(&g, opts.seed, l as u64))?;
        worst = worst.max(u.unitarity_residual());
        for (r, c, _) in u.triplets() {
            if g.link(r).class != (g.link(c).class + 1) % 4 {
                structure = 1.0;
            }
        }
    }
    Ok(vec![
        check(1, "U unitarity, 4x4..16x16", worst, 1e-12, t0),
        check(1, "class advance H_l -> H_l+1", structure, 0.5, t0),
    ])
}

/// Quadruplet residuals and invariance of the spectrum under `z ↦ iz`.
pub fn check_z4(opts: &ValidationOptions) -> Result<Vec<CheckResult>> {
    let t0 = Instant::now();
    let g = torus(4)?;
    let u = compose_u(&us_for(&g, opts), &sample_disorder(&g, opts.seed, 0))?;
    let reports = quadruplets(&g, &u)?;
    let res = reports
        .iter()
        .flat_map(|r| r.residuals.iter().copied().chain([r.input_residual]))
        .fold(0.0, f64::max);
    let first = check(2, "Z4 quadruplet eigen-residual", res, 1e-10, t0);
    let t1 = Instant::now();
    let ev = eigenvalues(&u.to_dense())?;
    let rotated: Vec<Complex64> = ev.iter().map(|z| z * Complex64::i()).collect();
    let d = multiset_distance(&ev, &rotated);
    Ok(vec![first, check(2, "spectrum invariant under i", d, 1e-10, t1)])
}

/// Projected blocks of the clean `U_s` against the closed form, and the
/// linear term of the cyclic product by central differences.
pub fn check_bloch(opts: &ValidationOptions) -> Result<Vec<CheckResult>> {
    let t0 = Instant::now();
    let g = torus(opts.l)?;
    let us = us_for(&g, opts);
    let mut worst: f64 = 0.0;
    for k in momenta::<f64>(&g) {
        for l in 0..4 {
            let m = project_block(&g, &us, l, k)?;
            worst = worst.max(max_entry(&(m - bloch_block(l, k).matrix)));
        }
    }
    let first = check(3, "Bloch blocks vs closed form", worst, 1e-10, t0);
    let t1 = Instant::now();
    let h = 1e-5;
    let dx = (cyclic_product(0, [h, 0.0]) - cyclic_product(0, [-h, 0.0]))[(0, 1)] / (2.0 * h);
    let dy = (cyclic_product(0, [0.0, h]) - cyclic_product(0, [0.0, -h]))[(0, 1)] / (2.0 * h);
    let lin = (dx - Complex64::i()).norm().max((dy + 1.0).norm());
    Ok(vec![first, check(3, "cyclic product linear term", lin, 1e-6, t1)])
}

/// Double Kirchhoff rule of `σ(ℓ, ℓ') = |G(ℓ←ℓ')|²` with two point contacts,
/// on 2-cells at least three steps from the contacts and the fixed edge.
pub fn check_kirchhoff(opts: &ValidationOptions) -> Result<Vec<CheckResult>> {
    let t0 = Instant::now();
    let l = opts.l.max(12);
    let g = torus(l)?;
    let m = build_medial(&g);
    let h = l as i64 / 2;
    let contacts: Vec<LinkId> = vec![g.horizontal_link(1, 1), g.vertical_link(h + 1, h + 2)];
    let t = compose_t(
        &us_for(&g, opts),
        &sample_disorder(&g, opts.seed, 7),
        &Regularization::PointContacts(contacts.clone()),
    )?;
    let f = GreenFactorization::factorize(&t)?;
    let n = g.n_links();
    let mut table = vec![Complex64::new(0.0, 0.0); n * n];
    for src in 0..n {
        let col = f.column(src);
        for (tgt, z) in col.iter().enumerate() {
            table[tgt * n + src] = Complex64::new(z.norm_sqr(), 0.0);
        }
    }
    let sigma = DoubleCochain::new(&g, &m, |a: LinkId, b: LinkId| Some(table[a * n + b]));
    let contact_pts: Vec<Complex64> = contacts.iter().map(|&c| g.midpoint(c)).collect();
    let far = |p: Complex64, extra: Complex64| {
        contact_pts.iter().chain([&extra]).all(|&q| g.distance(p, q) >= 3.0)
    };
    let fixed = [g.node_id(h - 2, 2), g.node_id(3, h)];
    let mut worst: f64 = 0.0;
    for &e2 in &fixed {
        let pe = m.edges[e2].position;
        for (cell, pc) in m.two_cells.iter().enumerate() {
            if !far(pc.center, pe) {
                continue;
            }
            worst = worst.max(sigma.first_argument_residual(cell, e2)?.norm());
            worst = worst.max(sigma.second_argument_residual(e2, cell)?.norm());
        }
    }
    Ok(vec![check(4, "Kirchhoff double rule for sigma", worst, 1e-10, t0)])
}

/// `G(C1, C2)` on a cylinder under single-plaquette deformations of either cycle.
pub fn check_homology(opts: &ValidationOptions) -> Result<Vec<CheckResult>> {
    let t0 = Instant::now();
    let g = NetworkGeometry::new(8, 10, Topology::CylinderX)?;
    let m = build_medial(&g);
    let t = compose_t(&us_for(&g, opts), &sample_disorder(&g, opts.seed, 3), &Regularization::None)?;
    let c1 = Cycle::row(&g, 2)?;
    let c2 = Cycle::row(&g, 7)?;
    let g0 = conductance(&g, &m, &t, &c1, &c2)?.g;
    let mut worst: f64 = 0.0;
    for (x, y) in [(1, 2), (4, 1), (5, 2), (7, 2)] {
        let d = c1.deformed(&m, m.two_cell_id(x, y)?)?;
        worst = worst.max((conductance(&g, &m, &t, &d, &c2)?.g - g0).abs());
    }
    for (x, y) in [(3, 6), (0, 7)] {
        let d = c2.deformed(&m, m.two_cell_id(x, y)?)?;
        worst = worst.max((conductance(&g, &m, &t, &c1, &d)?.g - g0).abs());
    }
    Ok(vec![check(5, "homology invariance of G(C1,C2)", worst, 1e-10, t0)])
}

/// Scalar trace identity, Gaussian supertraces and the two Wick contractions.
pub fn check_fock(opts: &ValidationOptions) -> Result<Vec<CheckResult>> {
    let t0 = Instant::now();
    let xi = [
        Complex64::new(-0.7, 0.3),
        Complex64::new(-0.2, 1.1),
        Complex64::new(0.5, -0.4),
        Complex64::new(0.9, 0.2),
    ];
    let b = bread_identity(xi, 60)?;
    let first = check(6, "scalar trace identity within tail bound", b.difference, b.tail_bound.max(1e-14), t0);
    let t1 = Instant::now();
    let mut st: f64 = 0.0;
    for lf in [1, 2] {
        let u = random_unitary(lf, opts.seed + lf as u64);
        st = st.max(gaussian_supertrace(&u, -1.0, 40, 1e-10)?.max_difference);
    }
    let second = check(6, "supertrace = 1 and determinant oracles", st, 1e-8, t1);
    let t2 = Instant::now();
    let u = random_unitary(2, opts.seed + 7);
    let mut wk: f64 = 0.0;
    for (l1, l2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        wk = wk.max(wick_check(&u, -1.0, l1, l2, 40, 1e-10)?.max_difference);
    }
    Ok(vec![first, second, check(6, "basic Wick contractions", wk, 1e-8, t2)])
}

/// The whole suite. Odd `L` is a dimension error.
pub fn run_exactness(opts: &ValidationOptions) -> Result<Vec<CheckResult>> {
    if !opts.l.is_multiple_of(2) || opts.l < 4 {
        return Err(Error::Dimension { lx: opts.l, ly: opts.l });
    }
    let mut out = Vec::new();
    for f in [check_unitarity, check_z4, check_bloch, check_kirchhoff, check_homology, check_fock] {
        out.extend(f(opts)?);
    }
    Ok(out)
}
