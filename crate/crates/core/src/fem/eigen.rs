use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::{c64, Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::assembly::HermitianPencil;
use super::sparse::SparseMatrix;

/// Pencils with at most this many unknowns are solved densely.
pub const DENSE_LIMIT: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    /// Relative residual `‖Ku - ΛMu‖ / ‖Ku‖` required of every pair.
    pub tol: f64,
    pub seed: u64,
    /// Shift of the shift-invert operator; must lie below the spectrum.
    pub shift: f64,
    /// Extra block vectors carried along to speed up convergence.
    pub guard: usize,
    /// Number of block Krylov steps between restarts.
    pub krylov_blocks: usize,
    pub max_restarts: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            seed: 0x5eed,
            shift: 0.0,
            guard: 3,
            krylov_blocks: 4,
            max_restarts: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Ascending eigenvalues, repeated according to multiplicity.
    pub values: Vec<f64>,
    /// Mass-orthonormal eigenvectors on the free unknowns.
    pub vectors: Vec<Vec<c64>>,
    pub residuals: Vec<f64>,
    /// Number of restarts (zero for the dense path).
    pub iterations: usize,
}

/// The `count` smallest eigenpairs of `Ku = ΛMu` with default options and
/// relative residual tolerance `tol`.
pub fn solve_lowest(pencil: &HermitianPencil, count: usize, tol: f64) -> Result<EigenResult> {
    solve_lowest_with(
        pencil,
        count,
        &EigenOptions {
            tol,
            ..EigenOptions::default()
        },
    )
}

fn init_parallelism() {
    static ONCE: Once = Once::new();
    // factorizations run one per worker; keep each one sequential so the
    // results do not depend on the thread count
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

pub fn solve_lowest_with(pencil: &HermitianPencil, count: usize, opts: &EigenOptions) -> Result<EigenResult> {
    let n = pencil.n_free();
    if count == 0 || count > n {
        return Err(Error::Precondition(format!(
            "requested {count} eigenpairs of a pencil with {n} free unknowns"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Precondition(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    init_parallelism();
    let block = count + opts.guard;
    if n <= DENSE_LIMIT || block * (opts.krylov_blocks + 1) >= n {
        return dense(pencil, count, opts.tol);
    }
    krylov(pencil, count, block, opts)
}

fn residual(k: &[c64], m: &[c64], lambda: f64) -> f64 {
    let mut r2 = 0.0;
    let mut k2 = 0.0;
    for (a, b) in k.iter().zip(m) {
        r2 += (a - b * lambda).norm_sqr();
        k2 += a.norm_sqr();
    }
    if k2 == 0.0 {
        r2.sqrt()
    } else {
        (r2 / k2).sqrt()
    }
}

fn dense_matrix(a: &SparseMatrix<c64>) -> Mat<c64> {
    let mut d = Mat::<c64>::zeros(a.n(), a.n());
    for (r, c, v) in a.entries() {
        d[(r, c)] = v;
    }
    d
}

fn dense(pencil: &HermitianPencil, count: usize, tol: f64) -> Result<EigenResult> {
    let n = pencil.n_free();
    let k = dense_matrix(&pencil.stiffness);
    let m = dense_matrix(&pencil.mass);
    let me = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NumericalBreakdown(format!("mass eigen-decomposition failed: {e:?}")))?;
    let s = me.S().column_vector();
    let smin = (0..n).map(|i| s[i].re).fold(f64::INFINITY, f64::min);
    if !(smin > 0.0) {
        return Err(Error::NumericalBreakdown(format!(
            "mass matrix is not positive definite (smallest eigenvalue {smin:e})"
        )));
    }
    // M^{-1/2} = U S^{-1/2} U*
    let u = me.U();
    let scaled = Mat::<c64>::from_fn(n, n, |i, j| u[(i, j)] * (1.0 / s[j].re.sqrt()));
    let w = &scaled * u.adjoint();
    let c = &w * &k * &w;
    let c = Mat::<c64>::from_fn(n, n, |i, j| (c[(i, j)] + c[(j, i)].conj()) * 0.5);
    let ce = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NumericalBreakdown(format!("reduced eigen-decomposition failed: {e:?}")))?;
    let vals = ce.S().column_vector();
    let x = &w * ce.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].re.total_cmp(&vals[b].re));
    let mut out = EigenResult {
        values: Vec::with_capacity(count),
        vectors: Vec::with_capacity(count),
        residuals: Vec::with_capacity(count),
        iterations: 0,
    };
    for &j in order.iter().take(count) {
        let v: Vec<c64> = (0..n).map(|i| x[(i, j)]).collect();
        let lambda = vals[j].re;
        let kv = pencil.stiffness.apply(&v);
        let mv = pencil.mass.apply(&v);
        out.residuals.push(residual(&kv, &mv, lambda));
        out.values.push(lambda);
        out.vectors.push(v);
    }
    check_residuals(&out, tol)?;
    Ok(out)
}

fn check_residuals(out: &EigenResult, tol: f64) -> Result<()> {
    let worst = out.residuals.iter().copied().fold(0.0, f64::max);
    if worst > tol {
        return Err(Error::NumericalBreakdown(format!(
            "eigenpair residual {worst:e} exceeds tolerance {tol:e}"
        )));
    }
    Ok(())
}

fn inner(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Shift-invert operator `(K - σM)^{-1} M` backed by a sparse Cholesky
/// factorization.
struct ShiftInvert<'a> {
    pencil: &'a HermitianPencil,
    llt: Llt<usize, c64>,
}

impl<'a> ShiftInvert<'a> {
    fn new(pencil: &'a HermitianPencil, shift: f64) -> Result<Self> {
        let vals: Vec<c64> = pencil
            .stiffness
            .values()
            .iter()
            .zip(pencil.mass.values())
            .map(|(k, m)| k - m * shift)
            .collect();
        let shifted = pencil.stiffness.pattern().with_values(vals);
        let a = shifted.as_faer();
        let symbolic = match pencil.symbolic.get() {
            Some(s) => s.clone(),
            None => {
                let s = SymbolicLlt::try_new(a.symbolic(), Side::Lower)
                    .map_err(|e| Error::NumericalBreakdown(format!("symbolic factorization failed: {e:?}")))?;
                pencil.symbolic.get_or_init(|| s).clone()
            }
        };
        let llt = Llt::try_new_with_symbolic(symbolic, a, Side::Lower).map_err(|e| {
            Error::NumericalBreakdown(format!(
                "Cholesky factorization of K - {shift}M failed ({e:?}); the pencil is not positive definite above the shift"
            ))
        })?;
        Ok(Self { pencil, llt })
    }

    fn apply_block(&self, xs: &[Vec<c64>]) -> Vec<Vec<c64>> {
        let n = self.pencil.n_free();
        let mut rhs = Mat::<c64>::zeros(n, xs.len());
        for (j, x) in xs.iter().enumerate() {
            let mx = self.pencil.mass.apply(x);
            for i in 0..n {
                rhs[(i, j)] = mx[i];
            }
        }
        self.llt.solve_in_place(rhs.as_mut());
        (0..xs.len()).map(|j| (0..n).map(|i| rhs[(i, j)]).collect()).collect()
    }
}

/// Mass-orthonormal basis with cached `M q`.
struct Basis<'a> {
    mass: &'a SparseMatrix<c64>,
    q: Vec<Vec<c64>>,
    mq: Vec<Vec<c64>>,
}

impl<'a> Basis<'a> {
    fn new(mass: &'a SparseMatrix<c64>) -> Self {
        Self {
            mass,
            q: Vec::new(),
            mq: Vec::new(),
        }
    }

    /// Orthogonalizes `v` against the basis, repeating the projection while
    /// it removes most of the norm, and appends it unless it is numerically
    /// dependent. Returns whether it was kept.
    fn push(&mut self, mut v: Vec<c64>) -> bool {
        let mut mv = self.mass.apply(&v);
        let norm0 = inner(&v, &mv).re.max(0.0).sqrt();
        if norm0 == 0.0 {
            return false;
        }
        let mut before = norm0;
        let mut norm = norm0;
        for _ in 0..4 {
            for (q, mq) in self.q.iter().zip(&self.mq) {
                let c = inner(mq, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
            mv = self.mass.apply(&v);
            norm = inner(&v, &mv).re.max(0.0).sqrt();
            if norm < 1e-12 * norm0 {
                return false;
            }
            if norm > 0.7 * before {
                break;
            }
            before = norm;
        }
        let s = 1.0 / norm;
        self.q.push(v.into_iter().map(|x| x * s).collect());
        self.mq.push(mv.into_iter().map(|x| x * s).collect());
        true
    }
}

fn krylov(pencil: &HermitianPencil, count: usize, block: usize, opts: &EigenOptions) -> Result<EigenResult> {
    let n = pencil.n_free();
    let op = ShiftInvert::new(pencil, opts.shift)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<c64>> = (0..block)
        .map(|_| {
            (0..n)
                .map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    // one application smooths the random start towards the low modes
    x = op.apply_block(&x);
    let mut last = None;
    for restart in 0..opts.max_restarts {
        let mut basis = Basis::new(&pencil.mass);
        for v in &x {
            basis.push(v.clone());
        }
        let mut current = basis.q.clone();
        for _ in 0..opts.krylov_blocks {
            if current.is_empty() {
                break;
            }
            let next = op.apply_block(&current);
            let start = basis.q.len();
            for v in next {
                basis.push(v);
            }
            current = basis.q[start..].to_vec();
        }
        let d = basis.q.len();
        if d < count {
            return Err(Error::NumericalBreakdown(format!(
                "Krylov basis collapsed to dimension {d} < {count}"
            )));
        }
        let kq: Vec<Vec<c64>> = basis.q.iter().map(|q| pencil.stiffness.apply(q)).collect();
        let h = Mat::<c64>::from_fn(d, d, |i, j| {
            let a = inner(&basis.q[i], &kq[j]);
            let b = inner(&basis.q[j], &kq[i]).conj();
            (a + b) * 0.5
        });
        let e = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::NumericalBreakdown(format!("Rayleigh-Ritz eigensolve failed: {e:?}")))?;
        let s = e.S().column_vector();
        let y = e.U();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
        let combine = |vs: &[Vec<c64>], j: usize| -> Vec<c64> {
            let mut out = vec![c64::new(0.0, 0.0); n];
            for (i, v) in vs.iter().enumerate() {
                let c = y[(i, j)];
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += c * vi;
                }
            }
            out
        };
        let mut result = EigenResult {
            values: Vec::with_capacity(count),
            vectors: Vec::with_capacity(count),
            residuals: Vec::with_capacity(count),
            iterations: restart + 1,
        };
        let mut next_x = Vec::with_capacity(block);
        for (rank, &j) in order.iter().take(block.min(d)).enumerate() {
            let u = combine(&basis.q, j);
            if rank < count {
                let ku = combine(&kq, j);
                let mu = combine(&basis.mq, j);
                result.residuals.push(residual(&ku, &mu, s[j].re));
                result.values.push(s[j].re);
                result.vectors.push(u.clone());
            }
            next_x.push(u);
        }
        let worst = result.residuals.iter().copied().fold(0.0, f64::max);
        if worst <= opts.tol {
            return Ok(result);
        }
        log::trace!("restart {restart}: worst residual {worst:e}");
        last = Some(worst);
        x = next_x;
    }
    Err(Error::NumericalBreakdown(format!(
        "no convergence after {} restarts (worst residual {:e}, tolerance {:e})",
        opts.max_restarts,
        last.unwrap_or(f64::NAN),
        opts.tol
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pencil() {
        let k = vec![vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 3.0]];
        let m = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let p = HermitianPencil::from_dense(&k, &m).unwrap();
        let r = solve_lowest(&p, 2, 1e-10).unwrap();
        assert!((r.values[0] - 1.0).abs() < 1e-12);
        assert!((r.values[1] - 2.0).abs() < 1e-12);
        assert!(matches!(solve_lowest(&p, 4, 1e-8), Err(Error::Precondition(_))));
    }

    fn laplacian_1d(n: usize) -> HermitianPencil {
        // -u'' on (0, 1) with linear elements, Dirichlet at both ends
        let h = 1.0 / (n + 1) as f64;
        let mut k = vec![vec![0.0; n]; n];
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            k[i][i] = 2.0 / h;
            m[i][i] = 4.0 * h / 6.0;
            if i + 1 < n {
                k[i][i + 1] = -1.0 / h;
                k[i + 1][i] = -1.0 / h;
                m[i][i + 1] = h / 6.0;
                m[i + 1][i] = h / 6.0;
            }
        }
        HermitianPencil::from_dense(&k, &m).unwrap()
    }

    #[test]
    fn krylov_agrees_with_dense() {
        let p = laplacian_1d(400);
        let r = solve_lowest(&p, 4, 1e-9).unwrap();
        assert!(r.iterations > 0);
        for (j, v) in r.values.iter().enumerate() {
            let exact = ((j + 1) as f64 * std::f64::consts::PI).powi(2);
            assert!((v - exact).abs() / exact < 1e-3, "{v} vs {exact}");
        }
        // mass orthonormality
        for a in 0..4 {
            for b in 0..4 {
                let ip = inner(&r.vectors[a], &p.mass.apply(&r.vectors[b]));
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - c64::new(want, 0.0)).norm() < 1e-9);
            }
        }
        let small = laplacian_1d(150);
        let d = solve_lowest(&small, 3, 1e-10).unwrap();
        let opts = EigenOptions {
            tol: 1e-10,
            ..Default::default()
        };
        let kr = krylov(&small, 3, 6, &opts).unwrap();
        for j in 0..3 {
            assert!((d.values[j] - kr.values[j]).abs() < 1e-8 * d.values[j]);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = laplacian_1d(300);
        let a = solve_lowest(&p, 3, 1e-9).unwrap();
        let b = solve_lowest(&p, 3, 1e-9).unwrap();
        assert_eq!(a.values, b.values);
    }
}
