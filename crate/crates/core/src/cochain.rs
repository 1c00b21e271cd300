//! Link currents and pair correlators as (double) 1-cochains on Γ.
//!
//! A medial edge `e` sits on a node with links `ℓᵢ±`, `ℓₒ±` (incoming/outgoing,
//! on the plus/minus side of `e`). The current across `e` is
//! `j(e) = j(ℓᵢ⁻) − j(ℓₒ⁻) = j(ℓₒ⁺) − j(ℓᵢ⁺)`, the two forms agreeing when the
//! node conserves current. The rotated edge `Re` uses the same rule with the
//! rotated role assignment. Cochain values below use the average of the two
//! forms, which is what the (10)/(01) projection weights are built from.

use num_complex::{Complex, Complex64};

use crate::error::{Error, Result};
use crate::lattice::{CellId, Cycle, EdgeId, LinkId, LinkRoles, MedialLattice, NetworkGeometry, NodeId};
use crate::scalar::{abs, from_c64, Real};

/// Current across every medial edge and along its rotation.
#[derive(Clone, Debug, PartialEq)]
pub struct Cochain1<T> {
    /// `j(e)`.
    pub across: Vec<Complex<T>>,
    /// `j(Re)`.
    pub along: Vec<Complex<T>>,
    /// Largest disagreement between the two forms of `j(e)` over checked nodes.
    pub max_mismatch: T,
    pub worst_node: Option<NodeId>,
}

fn half<T: Real>() -> Complex<T> {
    Complex::new(T::lit(0.5), T::zero())
}

fn symmetric<T: Real>(r: &LinkRoles, j: &[Complex<T>]) -> (Complex<T>, Complex<T>) {
    let a = j[r.in_minus] - j[r.out_minus];
    let b = j[r.out_plus] - j[r.in_plus];
    ((a + b) * half(), a - b)
}

/// Builds the current cochain of a link current. Nodes in `exempt` (sources,
/// sinks) are skipped by the conservation check; any other node whose two
/// forms of `j(e)` differ by more than `1e-8` is reported as an error.
pub fn current_cochain<T: Real>(
    geom: &NetworkGeometry,
    medial: &MedialLattice,
    j: &[Complex<T>],
    exempt: &[NodeId],
) -> Result<Cochain1<T>> {
    if j.len() != geom.n_links() {
        return Err(Error::Parameter(format!(
            "current has {} entries for {} links",
            j.len(),
            geom.n_links()
        )));
    }
    let mut across = Vec::with_capacity(medial.n_edges());
    let mut along = Vec::with_capacity(medial.n_edges());
    let mut max_mismatch = T::zero();
    let mut worst_node = None;
    for e in &medial.edges {
        let (v, diff) = symmetric(&e.roles, j);
        let (w, _) = symmetric(&e.rotated_roles, j);
        across.push(v);
        along.push(w);
        if exempt.contains(&e.node) {
            continue;
        }
        let m = abs(diff);
        if m > max_mismatch {
            max_mismatch = m;
            worst_node = Some(e.node);
        }
    }
    if max_mismatch > T::lit(1e-8) {
        return Err(Error::Kirchhoff {
            node: worst_node.unwrap_or(0),
            mismatch: max_mismatch.to_f64_lossy(),
        });
    }
    Ok(Cochain1 {
        across,
        along,
        max_mismatch,
        worst_node,
    })
}

/// Unit current circulating on the four links of the plaquette with
/// lower-left corner `(x, y)`.
pub fn plaquette_loop_current<T: Real>(geom: &NetworkGeometry, x: i64, y: i64) -> Vec<Complex<T>> {
    let mut j = vec![Complex::new(T::zero(), T::zero()); geom.n_links()];
    for l in [
        geom.horizontal_link(x, y),
        geom.horizontal_link(x, y + 1),
        geom.vertical_link(x, y),
        geom.vertical_link(x + 1, y),
    ] {
        j[l] = Complex::new(T::one(), T::zero());
    }
    j
}

/// Signed sum of `j(e)` over the boundary of every 2-cell; empty-boundary
/// cells (cut by an open edge) give 0.
pub fn two_cell_residuals<T: Real>(medial: &MedialLattice, c: &Cochain1<T>) -> Vec<Complex<T>> {
    medial
        .two_cells
        .iter()
        .map(|cell| {
            cell.boundary.iter().fold(Complex::new(T::zero(), T::zero()), |acc, &(e, s)| {
                acc + c.across[e] * T::lit(s as f64)
            })
        })
        .collect()
}

/// `∮_C ⋆⁻¹ j = Σ_{e∈C} sign · j(Re)` over a closed chain.
pub fn circulation<T: Real>(medial: &MedialLattice, c: &Cochain1<T>, cycle: &Cycle) -> Result<Complex<T>> {
    if !cycle.is_closed(medial) {
        return Err(Error::Domain("circulation needs a closed cycle".into()));
    }
    Ok(cycle
        .edges
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |acc, &(e, s)| {
            acc + c.along[e] * T::lit(s as f64)
        }))
}

/// `Σ_{e∈C} sign · j(e)`: the flux through a chain.
pub fn flux<T: Real>(c: &Cochain1<T>, cycle: &Cycle) -> Complex<T> {
    cycle
        .edges
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |acc, &(e, s)| {
            acc + c.across[e] * T::lit(s as f64)
        })
}

fn link_angle(geom: &NetworkGeometry, l: LinkId) -> f64 {
    let (dx, dy) = geom.link(l).orientation.vector();
    (dy as f64).atan2(dx as f64)
}

/// Weights of the (10) projection `½(j(e) − i j(Re))` on the four links of
/// `e`: `2^{-3/2} e^{-iθ}` with `θ` the counterclockwise angle from the
/// minus→plus normal of `e` to the direction of travel on the link.
pub fn j10_weights(geom: &NetworkGeometry, medial: &MedialLattice, e: EdgeId) -> [(LinkId, Complex64); 4] {
    let edge = &medial.edges[e];
    let normal = (edge.direction * Complex64::i()).arg();
    let r = edge.roles;
    let w = |l: LinkId| {
        let theta = link_angle(geom, l) - normal;
        let rot = medial.rotation as f64;
        (l, Complex64::from_polar(2f64.powf(-1.5), -rot * theta))
    };
    [w(r.out_plus), w(r.in_plus), w(r.out_minus), w(r.in_minus)]
}

/// Which complex components of each argument a projection keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    ZZ,
    ZZbar,
    ZbarZ,
    ZbarZbar,
}

impl Projection {
    fn conj_flags(self) -> (bool, bool) {
        match self {
            Projection::ZZ => (false, false),
            Projection::ZZbar => (false, true),
            Projection::ZbarZ => (true, false),
            Projection::ZbarZbar => (true, true),
        }
    }
}

fn weights_for(geom: &NetworkGeometry, medial: &MedialLattice, e: EdgeId, conj: bool) -> [(LinkId, Complex64); 4] {
    let mut w = j10_weights(geom, medial, e);
    if conj {
        for x in w.iter_mut() {
            x.1 = x.1.conj();
        }
    }
    w
}

/// Across-current weights: `j(e) = Σ w·j(ℓ)`, the symmetric form.
fn across_weights(geom: &NetworkGeometry, medial: &MedialLattice, e: EdgeId) -> [(LinkId, Complex64); 4] {
    let mut w = j10_weights(geom, medial, e);
    for x in w.iter_mut() {
        x.1 = Complex64::new(2.0 * x.1.re, 0.0);
    }
    w
}

fn bilinear<T: Real>(
    wa: &[(LinkId, Complex64); 4],
    wb: &[(LinkId, Complex64); 4],
    table: &dyn Fn(LinkId, LinkId) -> Option<Complex<T>>,
) -> Result<Complex<T>> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for &(l1, w1) in wa {
        for &(l2, w2) in wb {
            let v = table(l1, l2).ok_or(Error::IncompleteData(l1, l2))?;
            acc += v * from_c64::<T>(w1 * w2);
        }
    }
    Ok(acc)
}

/// Projects a link-pair table onto medial edges `(e, e')`:
/// `Σ_{ℓ,ℓ'} w_e(ℓ) w_{e'}(ℓ') table(ℓ, ℓ')`, conjugating the weights of
/// whichever argument is anti-holomorphic.
pub fn project<T: Real>(
    geom: &NetworkGeometry,
    medial: &MedialLattice,
    table: &dyn Fn(LinkId, LinkId) -> Option<Complex<T>>,
    e: EdgeId,
    e2: EdgeId,
    p: Projection,
) -> Result<Complex<T>> {
    let (c1, c2) = p.conj_flags();
    bilinear(&weights_for(geom, medial, e, c1), &weights_for(geom, medial, e2, c2), table)
}

/// `Σzz(e, e')`.
pub fn project_zz<T: Real>(
    geom: &NetworkGeometry,
    medial: &MedialLattice,
    table: &dyn Fn(LinkId, LinkId) -> Option<Complex<T>>,
    e: EdgeId,
    e2: EdgeId,
) -> Result<Complex<T>> {
    project(geom, medial, table, e, e2, Projection::ZZ)
}

/// The links a projection onto `e` reads.
pub fn edge_links(medial: &MedialLattice, e: EdgeId) -> [LinkId; 4] {
    medial.edges[e].roles.as_array()
}

/// A link-pair table read as a double 1-cochain `(e, e') ↦ σ(e, e')`.
pub struct DoubleCochain<'a, T> {
    geom: &'a NetworkGeometry,
    medial: &'a MedialLattice,
    table: Box<dyn Fn(LinkId, LinkId) -> Option<Complex<T>> + 'a>,
}

impl<'a, T: Real> DoubleCochain<'a, T> {
    pub fn new(
        geom: &'a NetworkGeometry,
        medial: &'a MedialLattice,
        table: impl Fn(LinkId, LinkId) -> Option<Complex<T>> + 'a,
    ) -> Self {
        DoubleCochain {
            geom,
            medial,
            table: Box::new(table),
        }
    }

    pub fn value(&self, e: EdgeId, e2: EdgeId) -> Result<Complex<T>> {
        bilinear(
            &across_weights(self.geom, self.medial, e),
            &across_weights(self.geom, self.medial, e2),
            &*self.table,
        )
    }

    pub fn project(&self, e: EdgeId, e2: EdgeId, p: Projection) -> Result<Complex<T>> {
        project(self.geom, self.medial, &*self.table, e, e2, p)
    }

    /// `Σ_{e∈C1} Σ_{e'∈C2} σ(e, e')`.
    pub fn over_cycles(&self, c1: &Cycle, c2: &Cycle) -> Result<Complex<T>> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for &(e, s) in &c1.edges {
            for &(e2, s2) in &c2.edges {
                acc += self.value(e, e2)? * T::lit((s * s2) as f64);
            }
        }
        Ok(acc)
    }

    /// Signed boundary sum over 2-cell `cell` in the first argument, `e'` fixed.
    pub fn first_argument_residual(&self, cell: CellId, e2: EdgeId) -> Result<Complex<T>> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for &(e, s) in &self.medial.two_cells[cell].boundary {
            acc += self.value(e, e2)? * T::lit(s as f64);
        }
        Ok(acc)
    }

    /// Signed boundary sum over 2-cell `cell` in the second argument.
    pub fn second_argument_residual(&self, e: EdgeId, cell: CellId) -> Result<Complex<T>> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for &(e2, s) in &self.medial.two_cells[cell].boundary {
            acc += self.value(e, e2)? * T::lit(s as f64);
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{build_us, compose_u, sample_disorder, ScatteringParams};
    use crate::greens::point_contact_state;
    use crate::lattice::{build_medial, Topology};
    use num_complex::Complex64;

    fn torus(l: usize) -> (NetworkGeometry, MedialLattice) {
        let g = NetworkGeometry::new(l, l, Topology::Torus).unwrap();
        let m = build_medial(&g);
        (g, m)
    }

    #[test]
    fn weights_match_explicit_table() {
        let (g, m) = torus(4);
        for e in 0..m.n_edges() {
            let r = m.edges[e].roles;
            let w = j10_weights(&g, &m, e);
            let get = |l: LinkId| w.iter().find(|x| x.0 == l).unwrap().1;
            assert!((get(r.out_plus) - Complex64::new(0.25, 0.25)).norm() < 1e-15);
            assert!((get(r.in_plus) - Complex64::new(-0.25, 0.25)).norm() < 1e-15);
            assert!((get(r.out_minus) - Complex64::new(-0.25, -0.25)).norm() < 1e-15);
            assert!((get(r.in_minus) - Complex64::new(0.25, -0.25)).norm() < 1e-15);
            let s: Complex64 = w.iter().map(|x| x.1).sum();
            assert!(s.norm() < 1e-15);
            assert!(w.iter().all(|x| (x.1.norm() - 2f64.powf(-1.5)).abs() < 1e-15));
        }
    }

    #[test]
    fn weights_reproduce_across_and_along() {
        let (g, m) = torus(4);
        let j: Vec<Complex64> = (0..g.n_links()).map(|l| Complex64::new((l * 7 % 5) as f64, 0.0)).collect();
        for e in 0..m.n_edges() {
            let (a, _) = symmetric(&m.edges[e].roles, &j);
            let (b, _) = symmetric(&m.edges[e].rotated_roles, &j);
            let z: Complex64 = j10_weights(&g, &m, e).iter().map(|&(l, w)| w * j[l]).sum();
            assert!((z - (a - Complex64::i() * b) * 0.5).norm() < 1e-14);
        }
    }

    #[test]
    fn clockwise_loop_lives_on_its_four_edges() {
        let (g, m) = torus(6);
        let j = plaquette_loop_current::<f64>(&g, 2, 2);
        let c = current_cochain(&g, &m, &j, &[]).unwrap();
        let nonzero: Vec<(usize, f64)> = c
            .across
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > 1e-12)
            .map(|(e, v)| (e, v.re))
            .collect();
        assert_eq!(nonzero.len(), 4);
        assert!(nonzero.iter().all(|(_, v)| (v.abs() - 1.0).abs() < 1e-14));
        let cell = m.zero_cell_id(2, 2).unwrap();
        for (e, _) in &nonzero {
            let edge = &m.edges[*e];
            assert!(edge.tail == cell || edge.head == cell);
        }
        assert!(two_cell_residuals(&m, &c).iter().all(|r| r.norm() < 1e-14));
    }

    #[test]
    fn loop_circulations() {
        let (g, m) = torus(12);
        let sq = Cycle::square(&g, &m, 3, 4, 2).unwrap();
        let circ = |x: i64, y: i64| {
            let c = current_cochain(&g, &m, &plaquette_loop_current::<f64>(&g, x, y), &[]).unwrap();
            circulation(&m, &c, &sq).unwrap()
        };
        // clockwise loops are pure across-currents: no circulation anywhere
        for y in 0..12 {
            for x in (y % 2..12).step_by(2) {
                assert!(circ(x, y).norm() < 1e-14);
            }
        }
        // counterclockwise loops: -2 for each of the four enclosed cells,
        // +1 for each of the eight cells touching the cycle from outside
        let mut inside = 0;
        let mut outside = 0;
        let mut total = Complex64::new(0.0, 0.0);
        for y in 0..12 {
            for x in ((y + 1) % 2..12).step_by(2) {
                let v = circ(x, y);
                total += v;
                if (v.re + 2.0).abs() < 1e-14 {
                    inside += 1;
                } else if (v.re - 1.0).abs() < 1e-14 {
                    outside += 1;
                } else {
                    assert!(v.norm() < 1e-14);
                }
            }
        }
        assert_eq!((inside, outside), (4, 8));
        assert!(total.norm() < 1e-12);
        assert!((circ(3, 4).re + 2.0).abs() < 1e-14);
    }

    #[test]
    fn open_chain_rejected() {
        let (g, m) = torus(4);
        let c = current_cochain(&g, &m, &vec![Complex64::new(0.0, 0.0); g.n_links()], &[]).unwrap();
        let open = Cycle::from_terms([(3, 1)]);
        assert!(matches!(circulation(&m, &c, &open), Err(Error::Domain(_))));
    }

    #[test]
    fn non_conserved_current_names_node() {
        let (g, m) = torus(4);
        let mut j = vec![Complex64::new(0.0, 0.0); g.n_links()];
        j[g.horizontal_link(1, 1)] = Complex64::new(1.0, 0.0);
        let err = current_cochain(&g, &m, &j, &[]).unwrap_err();
        assert!(matches!(err, Error::Kirchhoff { .. }));
    }

    #[test]
    fn point_contact_current_is_closed() {
        let (g, m) = torus(8);
        let us = build_us(&g, &ScatteringParams::critical());
        let u = compose_u(&us, &sample_disorder(&g, 3, 0)).unwrap();
        let lc = g.horizontal_link(3, 3);
        let psi = point_contact_state(&u, lc).unwrap();
        let j: Vec<Complex64> = psi.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
        let exempt = [g.link(lc).tail.unwrap(), g.link(lc).head.unwrap()];
        let c = current_cochain(&g, &m, &j, &exempt).unwrap();
        assert!(c.max_mismatch < 1e-10);
        for (cell, r) in two_cell_residuals(&m, &c).iter().enumerate() {
            let touches = m.two_cells[cell].boundary.iter().any(|&(e, _)| exempt.contains(&m.edges[e].node));
            if !touches {
                assert!(r.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn projections_partition_unity() {
        let (g, m) = torus(4);
        let table = |a: LinkId, b: LinkId| Some(Complex64::new(((a * 13 + b * 7) % 11) as f64, 0.0));
        let d = DoubleCochain::new(&g, &m, table);
        for (e, e2) in [(0, 5), (3, 3), (9, 14)] {
            let total: Complex64 = [Projection::ZZ, Projection::ZZbar, Projection::ZbarZ, Projection::ZbarZbar]
                .iter()
                .map(|&p| d.project(e, e2, p).unwrap())
                .sum();
            assert!((total - d.value(e, e2).unwrap()).norm() < 1e-13);
            let zz = d.project(e, e2, Projection::ZZ).unwrap();
            let bb = d.project(e, e2, Projection::ZbarZbar).unwrap();
            assert!((zz.conj() - bb).norm() < 1e-13);
        }
    }

    #[test]
    fn delta_table_projects_to_zero_far_away() {
        let (g, m) = torus(8);
        let delta = |a: LinkId, b: LinkId| Some(Complex64::new(if a == b { 1.0 } else { 0.0 }, 0.0));
        let e = g.node_id(1, 1);
        let e2 = g.node_id(5, 4);
        assert_eq!(project_zz(&g, &m, &delta, e, e2).unwrap(), Complex64::new(0.0, 0.0));
        let scaled = |a: LinkId, b: LinkId| delta(a, b).map(|v| v * 3.0);
        let z1 = project_zz(&g, &m, &delta, e, e).unwrap();
        let z3 = project_zz(&g, &m, &scaled, e, e).unwrap();
        assert!((z3 - z1 * 3.0).norm() < 1e-15);
    }

    #[test]
    fn missing_pair_reported() {
        let (g, m) = torus(4);
        let empty = |_: LinkId, _: LinkId| None::<Complex64>;
        assert!(matches!(project_zz(&g, &m, &empty, 0, 1), Err(Error::IncompleteData(_, _))));
    }
}
