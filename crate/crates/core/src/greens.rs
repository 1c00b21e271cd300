//! Green's functions `(1 − T)^{-1}` via sparse LU, pair correlators and
//! point-contact stationary states.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::evolution::EvolutionOperator;
use crate::lattice::LinkId;
use crate::scalar::{norm_sqr, Real};

fn zero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

fn one<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

fn identity_minus<T: Real>(t: &EvolutionOperator<T>) -> Result<SparseColMat<usize, Complex<T>>> {
    let n = t.n();
    let mut trip = Vec::with_capacity(3 * n);
    for i in 0..n {
        trip.push(Triplet::new(i, i, one::<T>()));
    }
    for (r, c, v) in t.triplets() {
        trip.push(Triplet::new(r, c, -v));
    }
    SparseColMat::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::Parameter(format!("sparse assembly failed: {e:?}")))
}

/// Symbolic LU analysis of `1 − T`, reusable across realizations that share
/// a sparsity pattern.
#[derive(Clone, Debug)]
pub struct SymbolicPattern {
    n: usize,
    symbolic: SymbolicLu<usize>,
}

impl SymbolicPattern {
    pub fn new<T: Real>(t: &EvolutionOperator<T>) -> Result<Self> {
        let m = identity_minus(t)?;
        let symbolic = SymbolicLu::try_new(m.symbolic())
            .map_err(|e| Error::Singular(format!("symbolic analysis failed: {e:?}")))?;
        Ok(SymbolicPattern { n: t.n(), symbolic })
    }
}

/// Reusable factorization of `1 − T` for one realization.
pub struct GreenFactorization<T: Real> {
    n: usize,
    matrix: SparseColMat<usize, Complex<T>>,
    lu: Lu<usize, Complex<T>>,
    cache: RefCell<HashMap<LinkId, Rc<Vec<Complex<T>>>>>,
}

impl<T: Real> GreenFactorization<T> {
    pub fn factorize(t: &EvolutionOperator<T>) -> Result<Self> {
        let pattern = SymbolicPattern::new(t)?;
        Self::factorize_with(&pattern, t)
    }

    pub fn factorize_with(pattern: &SymbolicPattern, t: &EvolutionOperator<T>) -> Result<Self> {
        if pattern.n != t.n() {
            return Err(Error::Parameter("symbolic pattern size mismatch".into()));
        }
        let matrix = identity_minus(t)?;
        let lu = Lu::try_new_with_symbolic(pattern.symbolic.clone(), matrix.as_ref())
            .map_err(|e| Error::Singular(format!("LU factorization failed: {e:?}")))?;
        let f = GreenFactorization {
            n: t.n(),
            matrix,
            lu,
            cache: RefCell::new(HashMap::new()),
        };
        f.probe_singularity()?;
        Ok(f)
    }

    /// Zero pivots are not reported by the factorization itself; a solve on a
    /// fixed probe vector exposes them as non-finite or exploding output.
    fn probe_singularity(&self) -> Result<()> {
        let b: Vec<Complex<T>> = (0..self.n)
            .map(|i| Complex::new(T::lit(1.0 + (i % 7) as f64), T::lit((i % 3) as f64 - 1.0)))
            .collect();
        let x = self.solve(&b);
        let bn = b.iter().map(|z| norm_sqr(*z)).fold(T::zero(), |a, v| a + v);
        let xn = x.iter().map(|z| norm_sqr(*z)).fold(T::zero(), |a, v| a + v);
        let limit = T::one() / (T::eps() * T::lit(1e4));
        if !xn.to_f64_lossy().is_finite() || xn > bn * limit {
            return Err(Error::Singular(
                "1 - T is numerically singular (eigenvalue 1)".into(),
            ));
        }
        let r = self.residual(&x, &b);
        if !(r < T::lit(1e-6)) {
            return Err(Error::Singular(format!(
                "probe solve residual {} too large",
                r.to_f64_lossy()
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve `(1 − T) x = b`.
    pub fn solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solve `(1 − T†) x = b`.
    pub fn solve_adjoint(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_adjoint_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Columns `(1 − T)^{-1} |ℓ⟩` for every source, solved as one block.
    pub fn columns(&self, sources: &[LinkId]) -> Mat<Complex<T>> {
        let mut rhs = Mat::zeros(self.n, sources.len());
        for (j, &s) in sources.iter().enumerate() {
            rhs[(s, j)] = one();
        }
        self.lu.solve_in_place(rhs.as_mut());
        rhs
    }

    /// Rows `⟨ℓ| (1 − T)^{-1}` for every target, as conjugated columns of the
    /// adjoint solve: entry `(ℓ', j)` holds `conj(⟨targets[j]|(1−T)^{-1}|ℓ'⟩)`.
    pub fn adjoint_columns(&self, targets: &[LinkId]) -> Mat<Complex<T>> {
        let mut rhs = Mat::zeros(self.n, targets.len());
        for (j, &s) in targets.iter().enumerate() {
            rhs[(s, j)] = one();
        }
        self.lu.solve_adjoint_in_place(rhs.as_mut());
        rhs
    }

    /// Cached column `(1 − T)^{-1}|from⟩`.
    pub fn column(&self, from: LinkId) -> Rc<Vec<Complex<T>>> {
        if let Some(c) = self.cache.borrow().get(&from) {
            return c.clone();
        }
        let mut b = vec![zero(); self.n];
        b[from] = one();
        let col = Rc::new(self.solve(&b));
        self.cache.borrow_mut().insert(from, col.clone());
        col
    }

    /// `⟨to|(1 − T)^{-1}|from⟩`.
    pub fn green(&self, from: LinkId, to: LinkId) -> Complex<T> {
        self.column(from)[to]
    }

    /// Relative residual `‖(1 − T) x − b‖ / ‖b‖`.
    pub fn residual(&self, x: &[Complex<T>], b: &[Complex<T>]) -> T {
        let mut r: Vec<Complex<T>> = b.iter().map(|z| -*z).collect();
        let sym = self.matrix.symbolic();
        let vals = self.matrix.val();
        for c in 0..self.n {
            for idx in sym.col_range(c) {
                let row = sym.row_idx()[idx];
                r[row] += vals[idx] * x[c];
            }
        }
        let rn = r.iter().fold(T::zero(), |a, z| a + norm_sqr(*z));
        let bn = b.iter().fold(T::zero(), |a, z| a + norm_sqr(*z));
        nalgebra::ComplexField::sqrt(rn / bn)
    }
}

/// `σ_{ℓ1ℓ2} = |⟨ℓ1|(1−T)^{-1}|ℓ2⟩|²` and
/// `υ_{ℓ1ℓ2} = A(ℓ1) conj(A(ℓ2))` with `A(ℓ) = ⟨ℓ|T(1−T)^{-1}|ℓ⟩`, per realization.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCorrelators<T> {
    pub pairs: Vec<(LinkId, LinkId)>,
    pub sigma: Vec<T>,
    pub upsilon: Vec<Complex<T>>,
}

/// `A(ℓ) = ⟨ℓ|T(1−T)^{-1}|ℓ⟩ = G_ℓℓ − 1`.
pub fn diagonal_response<T: Real>(fact: &GreenFactorization<T>, l: LinkId) -> Complex<T> {
    fact.green(l, l) - one()
}

pub fn sigma_upsilon<T: Real>(fact: &GreenFactorization<T>, pairs: &[(LinkId, LinkId)]) -> Result<PairCorrelators<T>> {
    let mut sigma = Vec::with_capacity(pairs.len());
    let mut upsilon = Vec::with_capacity(pairs.len());
    for &(l1, l2) in pairs {
        for l in [l1, l2] {
            if l >= fact.n() {
                return Err(Error::Index {
                    what: "link",
                    index: l,
                    size: fact.n(),
                });
            }
        }
        sigma.push(norm_sqr(fact.green(l2, l1)));
        upsilon.push(diagonal_response(fact, l1) * diagonal_response(fact, l2).conj());
    }
    Ok(PairCorrelators {
        pairs: pairs.to_vec(),
        sigma,
        upsilon,
    })
}

/// Stationary state with unit amplitude injected at `ℓ_c` and everything
/// arriving at `ℓ_c` absorbed: `ψ = U(Qψ + |ℓ_c⟩)`, `Q = 1 − |ℓ_c⟩⟨ℓ_c|`.
pub fn point_contact_state<T: Real>(u: &EvolutionOperator<T>, contact: LinkId) -> Result<Vec<Complex<T>>> {
    if contact >= u.n() {
        return Err(Error::Index {
            what: "contact link",
            index: contact,
            size: u.n(),
        });
    }
    let uq = u.with_columns_removed(&[contact]);
    let fact = GreenFactorization::factorize(&uq).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!(
            "{msg}; UQ has an eigenvalue at 1 (resonance), perturb the seed or boundary twist"
        )),
        other => other,
    })?;
    let mut src = vec![zero(); u.n()];
    for (r, v) in u.column(contact) {
        src[r] += v;
    }
    Ok(fact.solve(&src))
}

/// `‖ψ − U(Qψ + |ℓ_c⟩)‖`.
pub fn stationarity_residual<T: Real>(u: &EvolutionOperator<T>, contact: LinkId, psi: &[Complex<T>]) -> T {
    let mut v = psi.to_vec();
    v[contact] = one();
    let uv = u.apply(&v);
    let r = uv
        .iter()
        .zip(psi)
        .fold(T::zero(), |a, (x, y)| a + norm_sqr(*x - *y));
    nalgebra::ComplexField::sqrt(r)
}
