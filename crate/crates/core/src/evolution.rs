//! Node scattering `U_s`, random link phases `U_r` and the sub-unitary `T`.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LinkId, NetworkGeometry};
use crate::scalar::{cis, Real};

/// Node mixing angle: `a₊ = e^{iπ/4} cos β`, `a₋ = e^{-iπ/4} sin β`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringParams<T> {
    pub beta: T,
}

impl<T: Real> ScatteringParams<T> {
    pub fn new(beta: T) -> Result<Self> {
        if !(beta >= T::zero() && beta <= T::FRAC_PI_2()) {
            return Err(Error::Parameter(format!(
                "beta = {} outside [0, π/2]",
                beta.to_f64_lossy()
            )));
        }
        Ok(ScatteringParams { beta })
    }

    pub fn critical() -> Self {
        ScatteringParams {
            beta: T::FRAC_PI_4(),
        }
    }

    /// Left-turn amplitude.
    pub fn a_plus(&self) -> Complex<T> {
        cis(T::FRAC_PI_4()) * ComplexField::cos(self.beta)
    }

    /// Right-turn amplitude.
    pub fn a_minus(&self) -> Complex<T> {
        cis(-T::FRAC_PI_4()) * ComplexField::sin(self.beta)
    }
}

/// Uniform random link phases drawn from a counter-based stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization<T> {
    pub seed: u64,
    pub index: u64,
    pub phases: Vec<T>,
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Phase of one link, addressable without generating the others.
pub fn phase_at(seed: u64, index: u64, link: LinkId) -> f64 {
    let mut rng = stream(seed, index);
    rng.set_word_pos(2 * link as u128);
    rng.random::<f64>() * std::f64::consts::TAU
}

pub fn sample_disorder<T: Real>(
    geom: &NetworkGeometry,
    seed: u64,
    index: u64,
) -> DisorderRealization<T> {
    let mut rng = stream(seed, index);
    let phases = (0..geom.n_links())
        .map(|_| T::lit(rng.random::<f64>() * std::f64::consts::TAU))
        .collect();
    DisorderRealization {
        seed,
        index,
        phases,
    }
}

impl<T: Real> DisorderRealization<T> {
    /// No disorder: all phases zero.
    pub fn clean(n_links: usize) -> Self {
        DisorderRealization {
            seed: 0,
            index: 0,
            phases: vec![T::zero(); n_links],
        }
    }

    pub fn from_phases(phases: Vec<T>) -> Self {
        DisorderRealization {
            seed: 0,
            index: 0,
            phases,
        }
    }
}

/// Twisted boundary conditions: phase `theta_x` on links crossing the x seam
/// and `theta_y` on links crossing the y seam. Gauge-equivalent to a clean
/// system with shifted momenta.
pub fn twist_phases<T: Real>(geom: &NetworkGeometry, theta_x: T, theta_y: T) -> Vec<T> {
    geom.links()
        .iter()
        .map(|l| {
            let (Some(t), Some(h)) = (l.tail, l.head) else {
                return T::zero();
            };
            let (t, h) = (geom.node(t), geom.node(h));
            let (dx, dy) = l.orientation.vector();
            let mut phi = T::zero();
            if t.x as i64 + dx != h.x as i64 {
                phi += theta_x * T::lit(dx as f64);
            }
            if t.y as i64 + dy != h.y as i64 {
                phi += theta_y * T::lit(dy as f64);
            }
            phi
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Regularization<T> {
    /// Unitary evolution (sub-unitary only through open edges).
    None,
    AbsorbingBackground { mu: T },
    PointContacts(Vec<LinkId>),
}

impl<T: Real> Regularization<T> {
    pub fn validate(&self, n_links: usize) -> Result<()> {
        match self {
            Regularization::None => Ok(()),
            Regularization::AbsorbingBackground { mu } => {
                if *mu < T::zero() {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!(
                        "mu = {} must be negative",
                        mu.to_f64_lossy()
                    )))
                }
            }
            Regularization::PointContacts(c) => {
                if c.is_empty() {
                    return Err(Error::Parameter("empty contact set".into()));
                }
                for &l in c {
                    if l >= n_links {
                        return Err(Error::Index {
                            what: "contact link",
                            index: l,
                            size: n_links,
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

/// Default absorption `μ = -1/(2L)` for translation-invariant scans.
pub fn default_mu(l: usize) -> f64 {
    -1.0 / (2.0 * l as f64)
}

/// Sparse link-space operator with at most two entries per column.
#[derive(Clone, Debug)]
pub struct EvolutionOperator<T> {
    n: usize,
    /// Per column: (row, value) pairs.
    cols: Vec<[Option<(LinkId, Complex<T>)>; 2]>,
}

impl<T: Real> EvolutionOperator<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn column(&self, c: LinkId) -> impl Iterator<Item = (LinkId, Complex<T>)> + '_ {
        self.cols[c].iter().flatten().copied()
    }

    /// All nonzero entries as (row, col, value).
    pub fn triplets(&self) -> impl Iterator<Item = (LinkId, LinkId, Complex<T>)> + '_ {
        (0..self.n).flat_map(move |c| self.column(c).map(move |(r, v)| (r, c, v)))
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.n];
        for (c, &vc) in v.iter().enumerate() {
            for (r, a) in self.column(c) {
                out[r] += a * vc;
            }
        }
        out
    }

    pub fn apply_adjoint(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        (0..self.n)
            .map(|c| {
                self.column(c)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (r, a)| {
                        acc + a.conj() * v[r]
                    })
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<Complex<T>> {
        let mut m = DMatrix::from_element(self.n, self.n, Complex::new(T::zero(), T::zero()));
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Row-scaled copy: entry `(r, c)` multiplied by `f(r)`.
    fn scale_rows(&self, f: impl Fn(LinkId) -> Complex<T>) -> Self {
        let cols = self
            .cols
            .iter()
            .map(|col| col.map(|e| e.map(|(r, v)| (r, v * f(r)))))
            .collect();
        EvolutionOperator { n: self.n, cols }
    }

    /// `U Q` with `Q` removing the contact columns.
    pub fn with_columns_removed(&self, contacts: &[LinkId]) -> Self {
        let mut cols = self.cols.clone();
        for &c in contacts {
            cols[c] = [None, None];
        }
        EvolutionOperator { n: self.n, cols }
    }

    /// Copy with the two amplitudes of every column exchanged, i.e. the
    /// left and right turns relabeled. Only useful as a negative control.
    pub fn with_turns_swapped(&self) -> Self {
        let cols = self
            .cols
            .iter()
            .map(|col| match *col {
                [Some((r1, v1)), Some((r2, v2))] => [Some((r1, v2)), Some((r2, v1))],
                other => other,
            })
            .collect();
        EvolutionOperator { n: self.n, cols }
    }

    /// Largest deviation of `U†U` from the identity.
    pub fn unitarity_residual(&self) -> T {
        let mut worst = T::zero();
        // columns interact only through shared rows; use the row index map
        let mut rows: Vec<Vec<(LinkId, Complex<T>)>> = vec![Vec::new(); self.n];
        for (r, c, v) in self.triplets() {
            rows[r].push((c, v));
        }
        for c in 0..self.n {
            let mut acc: Vec<(LinkId, Complex<T>)> = Vec::new();
            for (r, a) in self.column(c) {
                for &(c2, b) in &rows[r] {
                    let val = b.conj() * a;
                    match acc.iter_mut().find(|(k, _)| *k == c2) {
                        Some(slot) => slot.1 += val,
                        None => acc.push((c2, val)),
                    }
                }
            }
            if !acc.iter().any(|&(k, _)| k == c) {
                acc.push((c, Complex::new(T::zero(), T::zero())));
            }
            for (k, mut v) in acc {
                if k == c {
                    v -= Complex::new(T::one(), T::zero());
                }
                let d = crate::scalar::abs(v);
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }
}

/// `U_s`: column `ℓ` holds `a₊` at row `ℓ₊` and `a₋` at row `ℓ₋`.
pub fn build_us<T: Real>(geom: &NetworkGeometry, params: &ScatteringParams<T>) -> EvolutionOperator<T> {
    let (ap, am) = (params.a_plus(), params.a_minus());
    let cols = (0..geom.n_links())
        .map(|l| match geom.successors(l) {
            Some((p, m)) => [Some((p, ap)), Some((m, am))],
            None => [None, None],
        })
        .collect();
    EvolutionOperator {
        n: geom.n_links(),
        cols,
    }
}

/// `U = U_r U_s` with `U_r = diag(e^{iφ_ℓ})`.
pub fn compose_u<T: Real>(us: &EvolutionOperator<T>, disorder: &DisorderRealization<T>) -> Result<EvolutionOperator<T>> {
    if disorder.phases.len() != us.n {
        return Err(Error::Parameter(format!(
            "disorder has {} phases for {} links",
            disorder.phases.len(),
            us.n
        )));
    }
    Ok(us.scale_rows(|r| cis(disorder.phases[r])))
}

/// Sub-unitary `T = e^{μ} U_r U_s` or `T = Q U_r U_s`.
pub fn compose_t<T: Real>(
    us: &EvolutionOperator<T>,
    disorder: &DisorderRealization<T>,
    reg: &Regularization<T>,
) -> Result<EvolutionOperator<T>> {
    reg.validate(us.n)?;
    let u = compose_u(us, disorder)?;
    Ok(match reg {
        Regularization::None => u,
        Regularization::AbsorbingBackground { mu } => {
            let f = Complex::new(ComplexField::exp(*mu), T::zero());
            u.scale_rows(|_| f)
        }
        Regularization::PointContacts(contacts) => {
            let mut keep = vec![true; us.n];
            for &c in contacts {
                keep[c] = false;
            }
            let zero = Complex::new(T::zero(), T::zero());
            let one = Complex::new(T::one(), T::zero());
            let mut t = u.scale_rows(|r| if keep[r] { one } else { zero });
            for col in t.cols.iter_mut() {
                for e in col.iter_mut() {
                    if matches!(e, Some((r, _)) if !keep[*r]) {
                        *e = None;
                    }
                }
            }
            t
        }
    })
}
