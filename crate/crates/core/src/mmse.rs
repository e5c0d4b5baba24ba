//! Batch MMSE estimation of `w`, `λ` and `ĥ` from sample statistics.
//!
//! Expectations are replaced by averages over a batch. Each block is a
//! Hermitian linear system solved by Cholesky factorisation with a small
//! ridge. The three blocks are coupled through `r_k = r − Dλ` and
//! `r − F ĥ`, so [`alternate`] cycles through them.

use nalgebra::Cholesky;

use crate::error::{check_dim, Error, Result};
use crate::{CMatrix, CVector, Complex64};

/// Running sample means of the second-order statistics of one user/stage.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStatistics {
    /// `E[r_k r_kᴴ]`, M×M.
    pub r_cov: CMatrix,
    /// `E[b* r_k]`, M.
    pub p_b: CVector,
    /// `E[Dᴴ D]`, P×P.
    pub d_cov: CMatrix,
    /// `E[Dᴴ (r − F ĥ)]`, P.
    pub p_f: CVector,
    /// `E[Fᴴ F]`, Lp×Lp.
    pub f_cov: CMatrix,
    /// `E[Fᴴ (r − D λ)]`, Lp.
    pub p_d: CVector,
    pub n_samples: usize,
}

fn running_mean<M>(mean: &mut M, sample: M, n: usize)
where
    M: std::ops::SubAssign + std::ops::AddAssign + Clone + std::ops::Div<Complex64, Output = M>,
{
    let mut delta = sample;
    delta -= mean.clone();
    *mean += delta / Complex64::new(n as f64, 0.0);
}

impl SampleStatistics {
    pub fn new(m: usize, p: usize, lp: usize) -> Self {
        Self {
            r_cov: CMatrix::zeros(m, m),
            p_b: CVector::zeros(m),
            d_cov: CMatrix::zeros(p, p),
            p_f: CVector::zeros(p),
            f_cov: CMatrix::zeros(lp, lp),
            p_d: CVector::zeros(lp),
            n_samples: 0,
        }
    }

    /// Adds one sample. `r_cancelled` is `r − Dλ`, so the raw observation is
    /// recovered as `r_cancelled + Dλ`.
    pub fn accumulate(
        &mut self,
        r_cancelled: &CVector,
        b_ref: Complex64,
        d: &CMatrix,
        f: &CMatrix,
        h_hat: &CVector,
        lambda: &CVector,
    ) -> Result<()> {
        let m = self.r_cov.nrows();
        check_dim("sample observation", m, r_cancelled.len())?;
        check_dim("sample D rows", m, d.nrows())?;
        check_dim("sample D columns", self.d_cov.nrows(), d.ncols())?;
        check_dim("sample F rows", m, f.nrows())?;
        check_dim("sample F columns", self.f_cov.nrows(), f.ncols())?;
        check_dim("sample channel", f.ncols(), h_hat.len())?;
        check_dim("sample parameter vector", d.ncols(), lambda.len())?;

        let r = r_cancelled + d * lambda;
        self.n_samples += 1;
        let n = self.n_samples;
        running_mean(&mut self.r_cov, r_cancelled * r_cancelled.adjoint(), n);
        running_mean(&mut self.p_b, r_cancelled * b_ref.conj(), n);
        running_mean(&mut self.d_cov, d.ad_mul(d), n);
        running_mean(&mut self.p_f, d.ad_mul(&(&r - f * h_hat)), n);
        running_mean(&mut self.f_cov, f.ad_mul(f), n);
        running_mean(&mut self.p_d, f.ad_mul(r_cancelled), n);
        Ok(())
    }
}

/// Diagonal loading added before each solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// `1e−8 · trace(R) / dim`.
    Auto,
    Fixed(f64),
}

impl Ridge {
    fn value(self, a: &CMatrix) -> f64 {
        match self {
            Ridge::Auto => {
                let dim = a.nrows().max(1) as f64;
                1e-8 * a.trace().re / dim
            }
            Ridge::Fixed(eps) => eps,
        }
    }
}

fn solve_hermitian(context: &'static str, a: &CMatrix, b: &CVector, ridge: Ridge) -> Result<CVector> {
    if a.nrows() == 0 {
        return Ok(CVector::zeros(0));
    }
    let eps = ridge.value(a);
    let mut loaded = a.clone();
    for q in 0..loaded.nrows() {
        loaded[(q, q)] += Complex64::new(eps, 0.0);
    }
    let chol = Cholesky::new(loaded).ok_or(Error::SingularStatistics(context))?;
    let diag = chol.l_dirty().diagonal();
    let max = diag.iter().map(|x| x.re).fold(0.0, f64::max);
    let min = diag.iter().map(|x| x.re).fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || (min / max).powi(2) < 1e-15 {
        return Err(Error::SingularStatistics(context));
    }
    Ok(chol.solve(b))
}

/// `w = (R + εI)⁻¹ p_b`.
pub fn solve_w(stats: &SampleStatistics, ridge: Ridge) -> Result<CVector> {
    solve_hermitian("receive filter", &stats.r_cov, &stats.p_b, ridge)
}

/// `λ = (R_D + εI)⁻¹ p_F`.
pub fn solve_lambda(stats: &SampleStatistics, ridge: Ridge) -> Result<CVector> {
    solve_hermitian("IC parameter", &stats.d_cov, &stats.p_f, ridge)
}

/// `ĥ = (R_F + εI)⁻¹ p_D`.
pub fn solve_h(stats: &SampleStatistics, ridge: Ridge) -> Result<CVector> {
    solve_hermitian("channel", &stats.f_cov, &stats.p_d, ridge)
}

/// One observation of the batch: raw `r`, reference symbol, reconstruction
/// matrix `D` (M×P) and regeneration matrix `F` (M×Lp).
#[derive(Debug, Clone)]
pub struct BatchSample {
    pub r: CVector,
    pub b: Complex64,
    pub d: CMatrix,
    pub f: CMatrix,
}

fn batch_dims(batch: &[BatchSample]) -> Result<(usize, usize, usize)> {
    let first = batch
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty batch".into()))?;
    Ok((first.r.len(), first.d.ncols(), first.f.ncols()))
}

pub fn batch_statistics(batch: &[BatchSample], lambda: &CVector, h_hat: &CVector) -> Result<SampleStatistics> {
    let (m, p, lp) = batch_dims(batch)?;
    let mut stats = SampleStatistics::new(m, p, lp);
    for s in batch {
        let r_c = if p > 0 { &s.r - &s.d * lambda } else { s.r.clone() };
        stats.accumulate(&r_c, s.b, &s.d, &s.f, h_hat, lambda)?;
    }
    Ok(stats)
}

/// Sample mean of `|b − wᴴ(r − Dλ)|²`.
pub fn sample_j1(batch: &[BatchSample], w: &CVector, lambda: &CVector) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|s| {
            let r_c = if lambda.is_empty() { s.r.clone() } else { &s.r - &s.d * lambda };
            (s.b - w.dotc(&r_c)).norm_sqr()
        })
        .sum();
    total / batch.len() as f64
}

/// Sample mean of `‖F ĥ − r + D λ‖²`.
pub fn sample_j2(batch: &[BatchSample], lambda: &CVector, h_hat: &CVector) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|s| {
            let mut e = &s.f * h_hat - &s.r;
            if !lambda.is_empty() {
                e += &s.d * lambda;
            }
            e.norm_squared()
        })
        .sum();
    total / batch.len() as f64
}

#[derive(Debug, Clone)]
pub struct Alternation {
    pub w: CVector,
    pub lambda: CVector,
    pub h_hat: CVector,
    /// Cost after each round.
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
}

/// [`alternate_from`] starting at `ĥ = [1, 0, …]` and `λ = 1`.
pub fn alternate(batch: &[BatchSample], iters: usize, ridge: Ridge) -> Result<Alternation> {
    let (_, p, lp) = batch_dims(batch)?;
    let mut h0 = CVector::zeros(lp);
    if lp > 0 {
        h0[0] = Complex64::new(1.0, 0.0);
    }
    alternate_from(batch, CVector::from_element(p, Complex64::new(1.0, 0.0)), h0, iters, ridge)
}

/// Repeats `ĥ → λ → w` block solves, refreshing the statistics before
/// each solve.
pub fn alternate_from(
    batch: &[BatchSample],
    mut lambda: CVector,
    mut h_hat: CVector,
    iters: usize,
    ridge: Ridge,
) -> Result<Alternation> {
    if iters == 0 {
        return Err(Error::InvalidParameter("need at least one alternation round".into()));
    }
    let (m, p, lp) = batch_dims(batch)?;
    check_dim("initial parameter vector", p, lambda.len())?;
    check_dim("initial channel", lp, h_hat.len())?;
    let mut w = CVector::zeros(m);
    let mut j1 = Vec::with_capacity(iters);
    let mut j2 = Vec::with_capacity(iters);
    for _ in 0..iters {
        h_hat = solve_h(&batch_statistics(batch, &lambda, &h_hat)?, ridge)?;
        lambda = solve_lambda(&batch_statistics(batch, &lambda, &h_hat)?, ridge)?;
        w = solve_w(&batch_statistics(batch, &lambda, &h_hat)?, ridge)?;
        j1.push(sample_j1(batch, &w, &lambda));
        j2.push(sample_j2(batch, &lambda, &h_hat));
    }
    Ok(Alternation {
        w,
        lambda,
        h_hat,
        j1,
        j2,
    })
}
