//! One Monte Carlo trial: draw a scenario, transmit a packet, run every
//! requested receiver on the same received samples and score them.

use rand::Rng;

use crate::adaptive::{PacketReceiver, ReceiverKind, ReceiverOptions, StepSizes};
use crate::error::Result;
use crate::seed::{stream_rng, Stream};
use crate::signal::{
    add_noise, generate_amplitudes, generate_channel, noise_var_for_ebn0, ChannelProfile, SignalModel, SpreadingCode,
    SymbolStream, UserConfig,
};
use crate::sim::config::ExperimentConfig;
use crate::{CVector, Complex64};

/// Everything a trial draws, fixed before any receiver runs.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub model: SignalModel,
    pub symbols: Vec<SymbolStream>,
    pub received: Vec<CVector>,
    pub noise_var: f64,
}

impl TrialData {
    pub fn powers(&self) -> Vec<f64> {
        self.model.users().iter().map(|u| u.amplitude * u.amplitude).collect()
    }
}

/// Scenario parameters of one cell of an experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub n: usize,
    pub profile: ChannelProfile,
    pub k_users: usize,
    pub ebn0_db: f64,
    pub packet_len: usize,
    pub amp_std_db: f64,
    /// Codes shared by all trials, when fixed.
    pub codes: Option<Vec<SpreadingCode>>,
}

impl Scenario {
    pub fn from_config(cfg: &ExperimentConfig, k_users: usize, ebn0_db: f64) -> Result<Self> {
        let codes = cfg.fixed_codes.then(|| {
            let mut rng = stream_rng(crate::seed::splitmix64(cfg.master_seed), Stream::Codes);
            (0..k_users).map(|_| SpreadingCode::random(&mut rng, cfg.n)).collect()
        });
        Ok(Self {
            n: cfg.n,
            profile: cfg.channel_profile()?,
            k_users,
            ebn0_db,
            packet_len: cfg.packet_len,
            amp_std_db: cfg.amp_std_db,
            codes,
        })
    }
}

pub fn generate_trial(scn: &Scenario, trial_seed: u64) -> Result<TrialData> {
    let mut code_rng = stream_rng(trial_seed, Stream::Codes);
    let mut chan_rng = stream_rng(trial_seed, Stream::Channels);
    let mut pow_rng = stream_rng(trial_seed, Stream::Powers);
    let mut sym_rng = stream_rng(trial_seed, Stream::Symbols);
    let mut noise_rng = stream_rng(trial_seed, Stream::Noise);

    let amps = generate_amplitudes(&mut pow_rng, scn.k_users, scn.amp_std_db);
    let users = (0..scn.k_users)
        .map(|k| {
            let code = match &scn.codes {
                Some(codes) => codes[k].clone(),
                None => SpreadingCode::random(&mut code_rng, scn.n),
            };
            UserConfig::new(amps[k], code, generate_channel(&mut chan_rng, &scn.profile))
        })
        .collect::<Result<Vec<_>>>()?;
    let model = SignalModel::new(users, scn.n, scn.profile.lp())?;
    let symbols: Vec<SymbolStream> = (0..scn.k_users)
        .map(|_| SymbolStream::random(&mut sym_rng, scn.packet_len))
        .collect();
    let noise_var = noise_var_for_ebn0(scn.ebn0_db);
    let received = (0..scn.packet_len)
        .map(|i| {
            let mut r = model.received(&symbols, i, 0.0, &mut noise_rng)?;
            add_noise(&mut r, noise_var, &mut noise_rng);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialData {
        model,
        symbols,
        received,
        noise_var,
    })
}

/// Scale- and phase-invariant channel error `min_c ‖c·ĥ − h‖² / ‖h‖²`.
pub fn channel_mse(h_hat: &CVector, h: &CVector) -> f64 {
    let hh = h.norm_squared();
    let ee = h_hat.norm_squared();
    if hh == 0.0 {
        return 0.0;
    }
    if ee == 0.0 {
        return 1.0;
    }
    let cross = h_hat.dotc(h).norm_sqr();
    (1.0 - cross / (ee * hh)).max(0.0)
}

fn bit_errors(decided: Complex64, sent: Complex64) -> u32 {
    u32::from(decided.re != sent.re) + u32::from(decided.im != sent.im)
}

/// Per-trial scores of one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub receiver: ReceiverKind,
    /// Bit errors summed over users, per symbol index.
    pub errors_per_symbol: Vec<u32>,
    /// Channel MSE averaged over users, per symbol index.
    pub mse_per_symbol: Vec<f64>,
    /// BER over the decision-directed part of the packet.
    pub ber_final: f64,
    /// Channel MSE averaged over the last `mse_window` symbols.
    pub mse_final: f64,
}

pub struct RunSettings {
    pub training_len: usize,
    pub pic_stages: usize,
    pub amp_smoothing: f64,
    pub freeze_dd_updates: bool,
    pub mse_window: usize,
}

impl RunSettings {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            training_len: cfg.training_len,
            pic_stages: cfg.pic_stages,
            amp_smoothing: cfg.amp_smoothing,
            freeze_dd_updates: cfg.freeze_dd_updates,
            mse_window: cfg.mse_window,
        }
    }
}

/// Runs one receiver over a drawn packet.
pub fn run_receiver(data: &TrialData, kind: ReceiverKind, steps: StepSizes, settings: &RunSettings) -> Result<TrialMetrics> {
    let opts = ReceiverOptions {
        steps,
        pic_stages: settings.pic_stages,
        training_len: settings.training_len,
        amp_smoothing: settings.amp_smoothing,
        freeze_dd_updates: settings.freeze_dd_updates,
    };
    let len = data.received.len();
    if len == 0 {
        return Err(crate::Error::InvalidParameter("empty packet".into()));
    }
    let k_users = data.symbols.len();
    let powers = data.powers();
    let mut rx = PacketReceiver::new(kind, opts, data.model.matrices(), &data.symbols, &powers, len)?;
    let mut errors_per_symbol = Vec::with_capacity(len);
    let mut mse_per_symbol = Vec::with_capacity(len);
    let mut dd_errors = 0u64;
    for i in 0..len {
        let decisions = rx.process_symbol(&data.received)?;
        let errs: u32 = decisions
            .iter()
            .zip(&data.symbols)
            .map(|(d, s)| bit_errors(*d, s.symbols()[i]))
            .sum();
        if i >= settings.training_len {
            dd_errors += u64::from(errs);
        }
        errors_per_symbol.push(errs);
        let mse = (0..k_users)
            .map(|k| channel_mse(rx.reported_channel(k), &data.model.users()[k].channel.taps))
            .sum::<f64>()
            / k_users as f64;
        mse_per_symbol.push(mse);
    }
    let dd_bits = 2 * k_users * (len - settings.training_len.min(len));
    let ber_final = if dd_bits > 0 { dd_errors as f64 / dd_bits as f64 } else { 0.0 };
    let window = settings.mse_window.min(len).max(1);
    let mse_final = mse_per_symbol[len - window..].iter().sum::<f64>() / window as f64;
    Ok(TrialMetrics {
        receiver: kind,
        errors_per_symbol,
        mse_per_symbol,
        ber_final,
        mse_final,
    })
}

/// Draws trial `trial_seed` and runs each receiver with its step sizes on
/// the identical received samples.
pub fn run_trial(
    scn: &Scenario,
    receivers: &[(ReceiverKind, StepSizes)],
    settings: &RunSettings,
    trial_seed: u64,
) -> Result<Vec<TrialMetrics>> {
    let data = generate_trial(scn, trial_seed)?;
    receivers
        .iter()
        .map(|&(kind, steps)| run_receiver(&data, kind, steps, settings))
        .collect()
}

/// Uniform random phase rotation, used to check metric invariances.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario(k: usize, ebn0: f64, len: usize) -> Scenario {
        let mut cfg = ExperimentConfig::default();
        cfg.packet_len = len;
        Scenario::from_config(&cfg, k, ebn0).unwrap()
    }

    #[test]
    fn channel_mse_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = CVector::from_fn(9, |_, _| Complex64::new(rng.random(), rng.random()));
        let e = CVector::from_fn(9, |_, _| Complex64::new(rng.random(), rng.random()));
        let base = channel_mse(&e, &h);
        for _ in 0..20 {
            let c = random_rotation(&mut rng) * rng.random_range(0.01..100.0);
            assert!((channel_mse(&(&e * c), &h) - base).abs() < 1e-12);
        }
        assert!(channel_mse(&(&h * Complex64::new(0.0, 3.0)), &h) < 1e-14);
        assert_eq!(channel_mse(&CVector::zeros(9), &h), 1.0);
    }

    #[test]
    fn trial_draws_are_reproducible() {
        let scn = scenario(3, 10.0, 40);
        let a = generate_trial(&scn, 99).unwrap();
        let b = generate_trial(&scn, 99).unwrap();
        assert_eq!(a.received, b.received);
        assert_eq!(a.symbols, b.symbols);
        let c = generate_trial(&scn, 100).unwrap();
        assert_ne!(a.received, c.received);
    }

    #[test]
    fn fixed_codes_are_shared_across_trials() {
        let mut cfg = ExperimentConfig::default();
        cfg.fixed_codes = true;
        cfg.packet_len = 10;
        let scn = Scenario::from_config(&cfg, 4, 10.0).unwrap();
        let a = generate_trial(&scn, 1).unwrap();
        let b = generate_trial(&scn, 2).unwrap();
        for k in 0..4 {
            assert_eq!(a.model.users()[k].code, b.model.users()[k].code);
        }
    }

    #[test]
    fn single_user_noise_free_linear_is_error_free() {
        let scn = scenario(1, f64::INFINITY, 600);
        let settings = RunSettings::from_config(&ExperimentConfig::default());
        let m = run_trial(&scn, &[(ReceiverKind::Linear, StepSizes::new(0.01, 0.01, 0.01).unwrap())], &settings, 3)
            .unwrap();
        assert_eq!(m[0].ber_final, 0.0);
    }
}
