//! Transmit side and channel: spreading codes, constraint matrices,
//! sparse multipath channels, user powers and the chip-rate received vector.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::{CVector, Complex64};

/// Real spreading sequence with chips at `±1/√N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingCode {
    chips: Vec<f64>,
}

impl SpreadingCode {
    pub fn new(chips: Vec<f64>) -> Result<Self> {
        if chips.is_empty() {
            return Err(Error::InvalidParameter("empty spreading code".into()));
        }
        let mag = 1.0 / (chips.len() as f64).sqrt();
        if let Some(bad) = chips.iter().find(|c| (c.abs() - mag).abs() > 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "chip {bad} is not ±1/√{}",
                chips.len()
            )));
        }
        Ok(Self { chips })
    }

    /// Builds a code from chip signs (`true` is `+1/√N`).
    pub fn from_signs(signs: &[bool]) -> Result<Self> {
        let mag = 1.0 / (signs.len() as f64).sqrt();
        Self::new(signs.iter().map(|&s| if s { mag } else { -mag }).collect())
    }

    /// Uniformly random code of length `n`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        let mag = 1.0 / (n as f64).sqrt();
        let chips = (0..n)
            .map(|_| if rng.random::<bool>() { mag } else { -mag })
            .collect();
        Self { chips }
    }

    pub fn chips(&self) -> &[f64] {
        &self.chips
    }

    /// Processing gain N.
    pub fn n(&self) -> usize {
        self.chips.len()
    }
}

/// Shifted-code matrices mapping a channel vector to one user's
/// contribution from the previous, current and next symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrices {
    /// M×Lp banded Toeplitz matrix; column `l` is the code delayed by `l` chips.
    pub c: DMatrix<f64>,
    /// Tail of `c` (rows N..M) moved to the top: spill-over of symbol i−1.
    pub c_prev: DMatrix<f64>,
    /// Head of `c` (rows 0..Lp−1) moved to the bottom: leakage of symbol i+1.
    pub c_next: DMatrix<f64>,
    n: usize,
    lp: usize,
}

impl ConstraintMatrices {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lp(&self) -> usize {
        self.lp
    }

    /// Observation length M = N + Lp − 1.
    pub fn m_dim(&self) -> usize {
        self.n + self.lp - 1
    }

    /// `(b_prev·C^p + b_cur·C + b_next·C^s)·h`.
    pub fn contribution(
        &self,
        b_prev: Complex64,
        b_cur: Complex64,
        b_next: Complex64,
        h: &CVector,
    ) -> CVector {
        let m = self.m_dim();
        let mut out = CVector::zeros(m);
        for l in 0..self.lp {
            for row in 0..m {
                let v = b_prev * self.c_prev[(row, l)]
                    + b_cur * self.c[(row, l)]
                    + b_next * self.c_next[(row, l)];
                out[row] += v * h[l];
            }
        }
        out
    }
}

pub fn build_constraint_matrices(code: &SpreadingCode, lp: usize) -> Result<ConstraintMatrices> {
    let n = code.n();
    if lp < 1 || lp > n {
        return Err(Error::InvalidParameter(format!(
            "path count {lp} must lie in 1..={n}"
        )));
    }
    let m = n + lp - 1;
    let mut c = DMatrix::zeros(m, lp);
    for l in 0..lp {
        for (q, &chip) in code.chips().iter().enumerate() {
            c[(q + l, l)] = chip;
        }
    }
    let mut c_prev = DMatrix::zeros(m, lp);
    let mut c_next = DMatrix::zeros(m, lp);
    for t in 0..lp - 1 {
        for l in 0..lp {
            c_prev[(t, l)] = c[(n + t, l)];
            c_next[(n + t, l)] = c[(t, l)];
        }
    }
    Ok(ConstraintMatrices {
        c,
        c_prev,
        c_next,
        n,
        lp,
    })
}

/// Discrete-time multipath gains `h_{k,l}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub taps: CVector,
}

impl ChannelVector {
    pub fn new(taps: CVector) -> Self {
        Self { taps }
    }

    pub fn lp(&self) -> usize {
        self.taps.len()
    }

    pub fn energy(&self) -> f64 {
        self.taps.norm_squared()
    }
}

/// Placement of the first nonzero path in the tap window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstPath {
    /// First path at delay 0 (receiver locked to the main path).
    Pinned,
    /// Whole path profile shifted uniformly within the window.
    Random,
}

/// Sparse tapped-delay-line channel profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelProfile {
    lp: usize,
    nonzero_paths: usize,
    max_spacing: usize,
    first_path: FirstPath,
}

impl ChannelProfile {
    pub const MAX_SPACING: usize = 3;

    pub fn new(lp: usize, nonzero_paths: usize, first_path: FirstPath) -> Result<Self> {
        if nonzero_paths == 0 {
            return Err(Error::InvalidParameter("need at least one path".into()));
        }
        let span = 1 + (nonzero_paths - 1) * Self::MAX_SPACING;
        if span > lp {
            return Err(Error::InvalidParameter(format!(
                "{nonzero_paths} paths with spacing up to {} chips do not fit in {lp} taps",
                Self::MAX_SPACING
            )));
        }
        Ok(Self {
            lp,
            nonzero_paths,
            max_spacing: Self::MAX_SPACING,
            first_path,
        })
    }

    pub fn lp(&self) -> usize {
        self.lp
    }

    pub fn nonzero_paths(&self) -> usize {
        self.nonzero_paths
    }
}

impl Default for ChannelProfile {
    fn default() -> Self {
        Self::new(9, 3, FirstPath::Pinned).unwrap()
    }
}

/// Draws a unit-energy sparse channel: path spacings uniform on
/// {1,…,3} chips, gains with real and imaginary parts uniform on [−1, 1].
pub fn generate_channel<R: Rng + ?Sized>(rng: &mut R, profile: &ChannelProfile) -> ChannelVector {
    let mut delays = Vec::with_capacity(profile.nonzero_paths);
    let mut at = 0usize;
    delays.push(at);
    for _ in 1..profile.nonzero_paths {
        at += rng.random_range(1..=profile.max_spacing);
        delays.push(at);
    }
    let offset = match profile.first_path {
        FirstPath::Pinned => 0,
        FirstPath::Random => rng.random_range(0..=profile.lp - 1 - at),
    };
    let mut taps = CVector::zeros(profile.lp);
    for d in delays {
        // A zero draw for both parts has probability zero; the loop keeps
        // the "exactly nonzero_paths taps" contract unconditional.
        loop {
            let g = Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
            if g.norm_sqr() > 0.0 {
                taps[d + offset] = g;
                break;
            }
        }
    }
    let norm = taps.norm();
    taps.unscale_mut(norm);
    ChannelVector { taps }
}

/// Log-normal user amplitudes: `10·log10(A²) ~ N(0, std_db²)`.
pub fn generate_amplitudes<R: Rng + ?Sized>(rng: &mut R, k_users: usize, std_db: f64) -> Vec<f64> {
    let dist = Normal::new(0.0, std_db.max(0.0)).expect("finite std");
    (0..k_users)
        .map(|_| {
            let p_db: f64 = dist.sample(rng);
            10f64.powf(p_db / 20.0)
        })
        .collect()
}

/// Noise variance per complex chip sample for an average Eb/N0 in dB,
/// relative to a unit mean bit energy.
pub fn noise_var_for_ebn0(ebn0_db: f64) -> f64 {
    10f64.powf(-ebn0_db / 10.0)
}

pub fn is_qpsk(b: Complex64) -> bool {
    b.re.abs() == 1.0 && b.im.abs() == 1.0
}

/// One user's QPSK symbols `b[i] ∈ {±1 ± j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream {
    symbols: Vec<Complex64>,
}

impl SymbolStream {
    pub fn new(symbols: Vec<Complex64>) -> Result<Self> {
        if let Some(b) = symbols.iter().find(|b| !is_qpsk(**b)) {
            return Err(Error::InvalidParameter(format!("{b} is not a QPSK symbol")));
        }
        Ok(Self { symbols })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        let sign = |bit: bool| if bit { 1.0 } else { -1.0 };
        let symbols = (0..len)
            .map(|_| Complex64::new(sign(rng.random()), sign(rng.random())))
            .collect();
        Self { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    /// Symbol at a signed index; zero outside the packet.
    pub fn at(&self, i: isize) -> Complex64 {
        if i < 0 {
            return Complex64::new(0.0, 0.0);
        }
        self.symbols
            .get(i as usize)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserConfig {
    pub amplitude: f64,
    pub code: SpreadingCode,
    pub channel: ChannelVector,
}

impl UserConfig {
    pub fn new(amplitude: f64, code: SpreadingCode, channel: ChannelVector) -> Result<Self> {
        if !(amplitude > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "amplitude must be positive, got {amplitude}"
            )));
        }
        Ok(Self {
            amplitude,
            code,
            channel,
        })
    }
}

/// Users plus their cached constraint matrices.
#[derive(Debug, Clone)]
pub struct SignalModel {
    users: Vec<UserConfig>,
    matrices: Vec<ConstraintMatrices>,
    m_dim: usize,
}

impl SignalModel {
    /// `n` and `lp` fix the dimensions; they matter when `users` is empty.
    pub fn new(users: Vec<UserConfig>, n: usize, lp: usize) -> Result<Self> {
        let mut matrices = Vec::with_capacity(users.len());
        for u in &users {
            check_dim("spreading code length", n, u.code.n())?;
            check_dim("channel length", lp, u.channel.lp())?;
            matrices.push(build_constraint_matrices(&u.code, lp)?);
        }
        if lp < 1 || lp > n {
            return Err(Error::InvalidParameter(format!(
                "path count {lp} must lie in 1..={n}"
            )));
        }
        Ok(Self {
            users,
            matrices,
            m_dim: n + lp - 1,
        })
    }

    pub fn users(&self) -> &[UserConfig] {
        &self.users
    }

    pub fn matrices(&self) -> &[ConstraintMatrices] {
        &self.matrices
    }

    pub fn m_dim(&self) -> usize {
        self.m_dim
    }

    /// Noise-free contribution of user `k` to `r[i]`.
    pub fn user_contribution(&self, k: usize, symbols: &SymbolStream, i: usize) -> CVector {
        let i = i as isize;
        let u = &self.users[k];
        let mut v = self.matrices[k].contribution(
            symbols.at(i - 1),
            symbols.at(i),
            symbols.at(i + 1),
            &u.channel.taps,
        );
        v.scale_mut(u.amplitude);
        v
    }

    /// `r[i]` with circularly symmetric Gaussian noise of variance `noise_var`.
    pub fn received<R: Rng + ?Sized>(
        &self,
        symbols: &[SymbolStream],
        i: usize,
        noise_var: f64,
        rng: &mut R,
    ) -> Result<CVector> {
        check_dim("symbol streams", self.users.len(), symbols.len())?;
        let mut r = CVector::zeros(self.m_dim);
        for (k, s) in symbols.iter().enumerate() {
            r += self.user_contribution(k, s, i);
        }
        if noise_var > 0.0 {
            add_noise(&mut r, noise_var, rng);
        }
        Ok(r)
    }
}

pub fn add_noise<R: Rng + ?Sized>(r: &mut CVector, noise_var: f64, rng: &mut R) {
    let sd = (noise_var / 2.0).sqrt();
    for x in r.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *x += Complex64::new(sd * re, sd * im);
    }
}

/// Received vector for symbol `i`; `n` and `lp` fix the dimensions.
pub fn synthesize_received<R: Rng + ?Sized>(
    users: &[UserConfig],
    symbols: &[SymbolStream],
    i: usize,
    noise_var: f64,
    n: usize,
    lp: usize,
    rng: &mut R,
) -> Result<CVector> {
    SignalModel::new(users.to_vec(), n, lp)?.received(symbols, i, noise_var, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn example_code() -> SpreadingCode {
        SpreadingCode::new(vec![0.5, 0.5, -0.5, 0.5]).unwrap()
    }

    #[test]
    fn lp_one_has_no_shifts() {
        let cm = build_constraint_matrices(&example_code(), 1).unwrap();
        assert_eq!(cm.m_dim(), 4);
        assert_eq!(cm.c.column(0).as_slice(), &[0.5, 0.5, -0.5, 0.5]);
        assert!(cm.c_prev.iter().all(|&x| x == 0.0));
        assert!(cm.c_next.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn lp_two_hand_built_matrices() {
        let cm = build_constraint_matrices(&example_code(), 2).unwrap();
        assert_eq!(cm.m_dim(), 5);
        assert_eq!(cm.c.column(0).as_slice(), &[0.5, 0.5, -0.5, 0.5, 0.0]);
        assert_eq!(cm.c.column(1).as_slice(), &[0.0, 0.5, 0.5, -0.5, 0.5]);
        let prev = DMatrix::from_row_slice(5, 2, &[0., 0.5, 0., 0., 0., 0., 0., 0., 0., 0.]);
        let next = DMatrix::from_row_slice(5, 2, &[0., 0., 0., 0., 0., 0., 0., 0., 0.5, 0.]);
        assert_eq!(cm.c_prev, prev);
        assert_eq!(cm.c_next, next);
    }

    #[test]
    fn lp_above_n_is_rejected() {
        assert!(build_constraint_matrices(&example_code(), 5).is_err());
        assert!(build_constraint_matrices(&example_code(), 0).is_err());
    }

    #[test]
    fn bad_chips_are_rejected() {
        assert!(SpreadingCode::new(vec![0.5, 0.5, 0.5]).is_err());
        assert!(SymbolStream::new(vec![c(1.0, 0.0)]).is_err());
        assert!(UserConfig::new(0.0, example_code(), ChannelVector::new(CVector::zeros(1))).is_err());
    }

    #[test]
    fn flat_single_user_is_scaled_code() {
        let user = UserConfig::new(
            1.0,
            example_code(),
            ChannelVector::new(CVector::from_element(1, c(1.0, 0.0))),
        )
        .unwrap();
        let syms = vec![SymbolStream::new(vec![c(1.0, 1.0)]).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = synthesize_received(&[user], &syms, 0, 0.0, 4, 1, &mut rng).unwrap();
        for (x, s) in r.iter().zip(example_code().chips()) {
            assert_eq!(*x, c(1.0, 1.0) * *s);
        }
    }

    #[test]
    fn two_users_match_explicit_matrix_products() {
        let code_b = SpreadingCode::new(vec![0.5, -0.5, -0.5, -0.5]).unwrap();
        let h_a = CVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let h_b = CVector::from_vec(vec![c(0.3, -0.4), c(-0.5, 0.2)]);
        let users = vec![
            UserConfig::new(1.5, example_code(), ChannelVector::new(h_a.clone())).unwrap(),
            UserConfig::new(0.7, code_b.clone(), ChannelVector::new(h_b.clone())).unwrap(),
        ];
        let syms = vec![
            SymbolStream::new(vec![c(1., 1.), c(-1., 1.), c(1., -1.)]).unwrap(),
            SymbolStream::new(vec![c(-1., -1.), c(1., 1.), c(-1., 1.)]).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = synthesize_received(&users, &syms, 1, 0.0, 4, 2, &mut rng).unwrap();

        // Explicit complex matrix arithmetic per user.
        let mut expected = CVector::zeros(5);
        for (u, s) in users.iter().zip(&syms) {
            let cm = build_constraint_matrices(&u.code, 2).unwrap();
            let to_c = |m: &DMatrix<f64>| m.map(|x| c(x, 0.0));
            let f = to_c(&cm.c_prev) * s.at(0) + to_c(&cm.c) * s.at(1) + to_c(&cm.c_next) * s.at(2);
            expected += (f * &u.channel.taps) * c(u.amplitude, 0.0);
        }
        assert!((r - expected).norm() < 1e-15);
    }

    #[test]
    fn noise_only_covariance_is_identity() {
        let model = SignalModel::new(vec![], 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut cov = crate::CMatrix::zeros(5, 5);
        let mut mean = CVector::zeros(5);
        for _ in 0..draws {
            let r = model.received(&[], 0, 1.0, &mut rng).unwrap();
            cov += &r * r.adjoint();
            mean += r;
        }
        cov /= c(draws as f64, 0.0);
        mean /= c(draws as f64, 0.0);
        for a in 0..5 {
            assert!(mean[a].norm() < 0.02);
            for b in 0..5 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((cov[(a, b)] - c(want, 0.0)).norm() < 0.02, "{a},{b}: {}", cov[(a, b)]);
            }
        }
    }

    #[test]
    fn channels_are_sparse_unit_energy_and_pinned() {
        let profile = ChannelProfile::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let h = generate_channel(&mut rng, &profile);
            assert_eq!(h.lp(), 9);
            let nz: Vec<usize> = (0..9).filter(|&l| h.taps[l].norm() > 0.0).collect();
            assert_eq!(nz.len(), 3);
            assert_eq!(nz[0], 0);
            assert!(*nz.last().unwrap() <= 6);
            assert!((h.energy() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_first_path_stays_in_window() {
        let profile = ChannelProfile::new(9, 3, FirstPath::Random).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut saw_shift = false;
        for _ in 0..2000 {
            let h = generate_channel(&mut rng, &profile);
            let nz: Vec<usize> = (0..9).filter(|&l| h.taps[l].norm() > 0.0).collect();
            assert_eq!(nz.len(), 3);
            saw_shift |= nz[0] > 0;
        }
        assert!(saw_shift);
        assert!(ChannelProfile::new(6, 3, FirstPath::Pinned).is_err());
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let profile = ChannelProfile::default();
        let a = generate_channel(&mut ChaCha8Rng::seed_from_u64(3), &profile);
        let b = generate_channel(&mut ChaCha8Rng::seed_from_u64(3), &profile);
        assert_eq!(a, b);
        let pa = generate_amplitudes(&mut ChaCha8Rng::seed_from_u64(3), 8, 3.0);
        let pb = generate_amplitudes(&mut ChaCha8Rng::seed_from_u64(3), 8, 3.0);
        assert_eq!(pa, pb);
    }

    #[test]
    fn amplitude_spread_in_db() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(generate_amplitudes(&mut rng, 5, 0.0).iter().all(|&a| a == 1.0));
        let db: Vec<f64> = generate_amplitudes(&mut rng, 100_000, 3.0)
            .iter()
            .map(|a| 10.0 * (a * a).log10())
            .collect();
        let mean = db.iter().sum::<f64>() / db.len() as f64;
        let var = db.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (db.len() - 1) as f64;
        assert!((var.sqrt() - 3.0).abs() < 0.05, "std {}", var.sqrt());
    }

    #[test]
    fn ebn0_mapping() {
        assert!((noise_var_for_ebn0(10.0) - 0.1).abs() < 1e-15);
        assert_eq!(noise_var_for_ebn0(f64::INFINITY), 0.0);
    }

    #[test]
    fn boundary_symbols_are_zero() {
        let s = SymbolStream::new(vec![c(1., 1.)]).unwrap();
        assert_eq!(s.at(-1), c(0., 0.));
        assert_eq!(s.at(1), c(0., 0.));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn columns_are_one_chip_shifts(signs in prop::collection::vec(any::<bool>(), 2..20), lp_frac in 0.0f64..1.0) {
                let code = SpreadingCode::from_signs(&signs).unwrap();
                let n = code.n();
                let lp = 1 + ((n - 1) as f64 * lp_frac) as usize;
                let cm = build_constraint_matrices(&code, lp).unwrap();
                prop_assert!((code.chips().iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
                for l in 0..lp {
                    for row in 0..cm.m_dim() {
                        let want = if row >= l && row - l < n { code.chips()[row - l] } else { 0.0 };
                        prop_assert_eq!(cm.c[(row, l)], want);
                        let want_prev = if row + 1 < lp { cm.c[(n + row, l)] } else { 0.0 };
                        prop_assert_eq!(cm.c_prev[(row, l)], want_prev);
                        let want_next = if row >= n { cm.c[(row - n, l)] } else { 0.0 };
                        prop_assert_eq!(cm.c_next[(row, l)], want_next);
                    }
                }
            }

            #[test]
            fn doubling_amplitude_doubles_contribution(seed in any::<u64>(), amp in 0.1f64..3.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let profile = ChannelProfile::default();
                let code = SpreadingCode::random(&mut rng, 16);
                let ch = generate_channel(&mut rng, &profile);
                let syms = vec![SymbolStream::random(&mut rng, 3)];
                let one = SignalModel::new(vec![UserConfig::new(amp, code.clone(), ch.clone()).unwrap()], 16, 9).unwrap();
                let two = SignalModel::new(vec![UserConfig::new(2.0 * amp, code, ch.clone()).unwrap()], 16, 9).unwrap();
                let a = one.received(&syms, 1, 0.0, &mut rng).unwrap();
                let b = two.received(&syms, 1, 0.0, &mut rng).unwrap();
                prop_assert!((b - a.scale(2.0)).norm() <= 1e-14);
                let cm = &one.matrices()[0];
                let ch_norm = cm.c.map(|x| Complex64::new(x, 0.0)) * &ch.taps;
                prop_assert!(ch_norm.norm() <= ch.taps.norm() * (9f64).sqrt() + 1e-12);
            }
        }
    }
}
