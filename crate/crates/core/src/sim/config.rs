//! Experiment configuration and its `key = value` file format.
//!
//! ```text
//! # global keys
//! k_users = 8
//! ebn0_db = 6, 9, 12, 15
//! receivers = linear, sic, jo-sic
//!
//! [jo-sic]
//! mu_w = 0.005, 0.01
//! mu_lambda = 0.002, 0.005
//! mu_h = 0.005
//! ```
//!
//! Lists are comma separated. Sections name a receiver and hold its
//! step-size candidate lists. Unknown keys and repeated keys are errors.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::adaptive::{ReceiverKind, StepSizes};
use crate::error::{Error, Result};
use crate::signal::{ChannelProfile, FirstPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// BER against symbol index.
    Convergence,
    /// Channel-estimate MSE against symbol index.
    ChannelMse,
    /// Final BER against Eb/N0.
    SweepEbn0,
    /// Final BER against the number of users.
    SweepUsers,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::ChannelMse => "channel-mse",
            ExperimentKind::SweepEbn0 => "sweep-ebn0",
            ExperimentKind::SweepUsers => "sweep-users",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ExperimentKind::Convergence,
            ExperimentKind::ChannelMse,
            ExperimentKind::SweepEbn0,
            ExperimentKind::SweepUsers,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown experiment `{s}`")))
    }
}

/// Candidate step sizes searched for one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGrid {
    pub mu_w: Vec<f64>,
    pub mu_lambda: Vec<f64>,
    pub mu_h: Vec<f64>,
}

impl StepGrid {
    pub fn single(steps: StepSizes) -> Self {
        Self {
            mu_w: vec![steps.mu_w],
            mu_lambda: vec![steps.mu_lambda],
            mu_h: vec![steps.mu_h],
        }
    }

    /// Grid searched when the config file has no section for `kind`.
    pub fn default_for(kind: ReceiverKind) -> Self {
        match kind {
            ReceiverKind::Linear => Self {
                mu_w: vec![0.0075, 0.0125, 0.02],
                mu_lambda: vec![0.005],
                mu_h: vec![0.005],
            },
            ReceiverKind::Sic | ReceiverKind::Pic => Self {
                mu_w: vec![0.0075, 0.0125, 0.02],
                mu_lambda: vec![0.005],
                mu_h: vec![0.0025, 0.005, 0.01],
            },
            ReceiverKind::JoSic | ReceiverKind::JoPic => Self {
                mu_w: vec![0.0075, 0.0125, 0.02],
                mu_lambda: vec![0.0025, 0.005, 0.01],
                mu_h: vec![0.0025, 0.005, 0.01],
            },
        }
    }

    fn validate(&self, kind: ReceiverKind) -> Result<()> {
        for (name, list) in [("mu_w", &self.mu_w), ("mu_lambda", &self.mu_lambda), ("mu_h", &self.mu_h)] {
            if list.is_empty() {
                return Err(Error::InvalidParameter(format!("{kind}: empty {name} grid")));
            }
            if let Some(bad) = list.iter().find(|&&m| !(m > 0.0 && m.is_finite())) {
                return Err(Error::InvalidParameter(format!("{kind}: {name} value {bad} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub lp: usize,
    pub nonzero_paths: usize,
    pub first_path: FirstPath,
    pub amp_std_db: f64,
    /// Single value unless sweeping users.
    pub k_users: Vec<usize>,
    /// Single value unless sweeping Eb/N0.
    pub ebn0_db: Vec<f64>,
    pub packet_len: usize,
    pub training_len: usize,
    pub trials: usize,
    pub pilot_trials: usize,
    pub receivers: Vec<ReceiverKind>,
    pub pic_stages: usize,
    pub grids: BTreeMap<ReceiverKind, StepGrid>,
    pub master_seed: u64,
    /// Draw the spreading codes once per experiment instead of per trial.
    pub fixed_codes: bool,
    pub freeze_dd_updates: bool,
    pub amp_smoothing: f64,
    /// Symbols averaged for the end-of-packet channel MSE.
    pub mse_window: usize,
    /// Run trials on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let receivers = ReceiverKind::ALL.to_vec();
        let grids = receivers.iter().map(|&k| (k, StepGrid::default_for(k))).collect();
        Self {
            experiment: ExperimentKind::Convergence,
            n: 16,
            lp: 9,
            nonzero_paths: 3,
            first_path: FirstPath::Pinned,
            amp_std_db: 3.0,
            k_users: vec![8],
            ebn0_db: vec![12.0],
            packet_len: 1500,
            training_len: 150,
            trials: 20,
            pilot_trials: 5,
            receivers,
            pic_stages: 3,
            grids,
            master_seed: 1,
            fixed_codes: false,
            freeze_dd_updates: false,
            amp_smoothing: 0.05,
            mse_window: 100,
            parallel: true,
        }
    }
}

impl ExperimentConfig {
    /// Trial count of the full-size protocol.
    pub const FULL_SCALE_TRIALS: usize = 100;

    pub fn channel_profile(&self) -> Result<ChannelProfile> {
        ChannelProfile::new(self.lp, self.nonzero_paths, self.first_path)
    }

    pub fn grid(&self, kind: ReceiverKind) -> StepGrid {
        self.grids.get(&kind).cloned().unwrap_or_else(|| StepGrid::default_for(kind))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.receivers.is_empty() {
            return bad("no receivers configured".into());
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.receivers.iter().find(|r| !seen.insert(**r)) {
            return bad(format!("receiver {dup} listed twice"));
        }
        if self.n == 0 || self.lp == 0 || self.lp > self.n {
            return bad(format!("need 1 ≤ lp ≤ n, got n={} lp={}", self.n, self.lp));
        }
        self.channel_profile()?;
        if self.k_users.is_empty() || self.k_users.contains(&0) {
            return bad("k_users must be non-empty and positive".into());
        }
        if self.ebn0_db.is_empty() || self.ebn0_db.iter().any(|x| x.is_nan()) {
            return bad("ebn0_db must be non-empty".into());
        }
        if self.training_len >= self.packet_len {
            return bad(format!(
                "training_len {} must be below packet_len {}",
                self.training_len, self.packet_len
            ));
        }
        if self.trials == 0 || self.pilot_trials == 0 {
            return bad("trials and pilot_trials must be at least 1".into());
        }
        if self.pic_stages == 0 {
            return bad("pic_stages must be at least 1".into());
        }
        if !(self.amp_std_db >= 0.0) {
            return bad("amp_std_db must be non-negative".into());
        }
        if !(self.amp_smoothing > 0.0 && self.amp_smoothing <= 1.0) {
            return bad("amp_smoothing must lie in (0, 1]".into());
        }
        if self.mse_window == 0 || self.mse_window > self.packet_len {
            return bad("mse_window must lie in 1..=packet_len".into());
        }
        match self.experiment {
            ExperimentKind::SweepEbn0 if self.k_users.len() != 1 => {
                return bad("sweep-ebn0 takes a single k_users value".into())
            }
            ExperimentKind::SweepUsers if self.ebn0_db.len() != 1 => {
                return bad("sweep-users takes a single ebn0_db value".into())
            }
            ExperimentKind::Convergence | ExperimentKind::ChannelMse
                if self.k_users.len() != 1 || self.ebn0_db.len() != 1 =>
            {
                return bad(format!("{} takes single k_users and ebn0_db values", self.experiment))
            }
            _ => {}
        }
        for &kind in &self.receivers {
            self.grid(kind).validate(kind)?;
        }
        Ok(())
    }

    /// Parses a config file; keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: HashSet<(Option<ReceiverKind>, String)> = HashSet::new();
        let mut section: Option<ReceiverKind> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| Error::Config { line: line_no, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("malformed section header `{line}`")))?
                    .trim();
                let kind = name.parse::<ReceiverKind>().map_err(|e| err(e.to_string()))?;
                section = Some(kind);
                cfg.grids.entry(kind).or_insert_with(|| StepGrid::default_for(kind));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert((section, key.to_string())) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            let wrap = |e: Error| err(e.to_string());
            match section {
                Some(kind) => {
                    let list = parse_list::<f64>(value).map_err(wrap)?;
                    let grid = cfg.grids.get_mut(&kind).expect("inserted with section");
                    match key {
                        "mu_w" => grid.mu_w = list,
                        "mu_lambda" => grid.mu_lambda = list,
                        "mu_h" => grid.mu_h = list,
                        _ => return Err(err(format!("unknown key `{key}` in [{kind}]"))),
                    }
                }
                None => cfg.set_global(key, value).map_err(wrap)?,
            }
        }
        Ok(cfg)
    }

    fn set_global(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = value.parse()?,
            "n" => self.n = parse_one(value)?,
            "lp" => self.lp = parse_one(value)?,
            "nonzero_paths" => self.nonzero_paths = parse_one(value)?,
            "first_path" => {
                self.first_path = match value {
                    "pinned" => FirstPath::Pinned,
                    "random" => FirstPath::Random,
                    _ => return Err(Error::InvalidParameter(format!("first_path must be pinned or random, got `{value}`"))),
                }
            }
            "amp_std_db" => self.amp_std_db = parse_one(value)?,
            "k_users" => self.k_users = parse_list(value)?,
            "ebn0_db" => self.ebn0_db = parse_list(value)?,
            "packet_len" => self.packet_len = parse_one(value)?,
            "training_len" => self.training_len = parse_one(value)?,
            "trials" => self.trials = parse_one(value)?,
            "pilot_trials" => self.pilot_trials = parse_one(value)?,
            "receivers" => {
                self.receivers = if value.is_empty() { Vec::new() } else { parse_list(value)? };
            }
            "pic_stages" => self.pic_stages = parse_one(value)?,
            "master_seed" => self.master_seed = parse_one(value)?,
            "fixed_codes" => self.fixed_codes = parse_one(value)?,
            "freeze_dd_updates" => self.freeze_dd_updates = parse_one(value)?,
            "amp_smoothing" => self.amp_smoothing = parse_one(value)?,
            "mse_window" => self.mse_window = parse_one(value)?,
            "parallel" => self.parallel = parse_one(value)?,
            _ => return Err(Error::InvalidParameter(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back the same config. The
    /// `parallel` flag does not change any result and is left out, so runs
    /// that differ only in it write identical manifests.
    pub fn to_text(&self) -> String {
        let list = |xs: &[String]| xs.join(", ");
        let fmt_f = |xs: &[f64]| list(&xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>());
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("experiment", self.experiment.to_string());
        kv("n", self.n.to_string());
        kv("lp", self.lp.to_string());
        kv("nonzero_paths", self.nonzero_paths.to_string());
        kv(
            "first_path",
            match self.first_path {
                FirstPath::Pinned => "pinned",
                FirstPath::Random => "random",
            }
            .into(),
        );
        kv("amp_std_db", format!("{:?}", self.amp_std_db));
        kv("k_users", list(&self.k_users.iter().map(|k| k.to_string()).collect::<Vec<_>>()));
        kv("ebn0_db", fmt_f(&self.ebn0_db));
        kv("packet_len", self.packet_len.to_string());
        kv("training_len", self.training_len.to_string());
        kv("trials", self.trials.to_string());
        kv("pilot_trials", self.pilot_trials.to_string());
        kv("receivers", list(&self.receivers.iter().map(|r| r.to_string()).collect::<Vec<_>>()));
        kv("pic_stages", self.pic_stages.to_string());
        kv("master_seed", self.master_seed.to_string());
        kv("fixed_codes", self.fixed_codes.to_string());
        kv("freeze_dd_updates", self.freeze_dd_updates.to_string());
        kv("amp_smoothing", format!("{:?}", self.amp_smoothing));
        kv("mse_window", self.mse_window.to_string());
        for kind in &self.receivers {
            let g = self.grid(*kind);
            out.push_str(&format!("\n[{kind}]\n"));
            out.push_str(&format!("mu_w = {}\n", fmt_f(&g.mu_w)));
            out.push_str(&format!("mu_lambda = {}\n", fmt_f(&g.mu_lambda)));
            out.push_str(&format!("mu_h = {}\n", fmt_f(&g.mu_h)));
        }
        out
    }
}

fn parse_one<T: FromStr>(value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>> {
    value.split(',').map(parse_one).collect()
}
