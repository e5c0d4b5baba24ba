use std::fmt;
use std::str::FromStr;

use super::{compute_errors, detect, EstimatorState, StepSizes};
use crate::error::{check_dim, Error, Result};
use crate::ic::{build_regen_matrix, cancel, pic_group, sic_group, sic_schedule, IcGroup, IcParameterVector, ReconstructionMatrix};
use crate::signal::{ConstraintMatrices, SymbolStream};
use crate::{CVector, Complex64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReceiverKind {
    Linear,
    Sic,
    Pic,
    JoSic,
    JoPic,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 5] = [
        ReceiverKind::Linear,
        ReceiverKind::Sic,
        ReceiverKind::Pic,
        ReceiverKind::JoSic,
        ReceiverKind::JoPic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::Linear => "linear",
            ReceiverKind::Sic => "sic",
            ReceiverKind::Pic => "pic",
            ReceiverKind::JoSic => "jo-sic",
            ReceiverKind::JoPic => "jo-pic",
        }
    }

    /// Whether cancellation weights are adapted (`λ`) rather than taken from
    /// amplitude estimates.
    pub fn is_joint(self) -> bool {
        matches!(self, ReceiverKind::JoSic | ReceiverKind::JoPic)
    }

    fn is_successive(self) -> bool {
        matches!(self, ReceiverKind::Sic | ReceiverKind::JoSic)
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReceiverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown receiver `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverOptions {
    pub steps: StepSizes,
    pub pic_stages: usize,
    pub training_len: usize,
    /// Smoothing factor of the conventional amplitude estimate.
    pub amp_smoothing: f64,
    /// Stop `λ` and `ĥ` adaptation once training ends.
    pub freeze_dd_updates: bool,
}

impl ReceiverOptions {
    pub fn new(steps: StepSizes, training_len: usize) -> Self {
        Self {
            steps,
            pic_stages: 3,
            training_len,
            amp_smoothing: 0.05,
            freeze_dd_updates: false,
        }
    }
}

/// Front-end linear filter and channel estimator of one user.
#[derive(Debug, Clone)]
struct FrontEnd {
    w: CVector,
    h_hat: CVector,
    /// Smoothed `|wᴴr|²`.
    out_energy: f64,
}

#[derive(Debug, Clone)]
struct UserStage {
    state: EstimatorState,
    /// `λ` entries keyed by interferer index, so a change of group
    /// membership keeps each pair's weight.
    lambda_by_user: Vec<Complex64>,
    amp: f64,
    decision: Complex64,
}

/// Read-only view of one user's estimator at one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSnapshot {
    pub w: CVector,
    pub h_hat: CVector,
    pub lambda_by_user: Vec<Complex64>,
    pub amplitude: f64,
}

/// Symbol-by-symbol receiver for one packet.
///
/// Every receiver has a linear front-end per user that runs one symbol
/// ahead; its decisions serve as the tentative `b̂[i+1]` needed to
/// regenerate the next-symbol leakage. `Linear` stops there. SIC receivers
/// run one pass in decreasing power order. PIC receivers run `pic_stages`
/// passes; a pass regenerates all other users from its own channel
/// estimates and the previous pass's decisions. Joint receivers adapt `λ`
/// per user and stage; conventional ones weight regenerated users by a
/// smoothed amplitude estimate.
pub struct PacketReceiver<'a> {
    kind: ReceiverKind,
    opts: ReceiverOptions,
    matrices: &'a [ConstraintMatrices],
    known: &'a [SymbolStream],
    m_dim: usize,
    len: usize,
    front: Vec<FrontEnd>,
    stages: Vec<Vec<UserStage>>,
    tentative: Vec<Vec<Complex64>>,
    finals: Vec<Vec<Complex64>>,
    order: Vec<usize>,
    next: usize,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl<'a> PacketReceiver<'a> {
    /// `known` holds each user's transmitted symbols; only the first
    /// `training_len` are ever read. `powers` sets the SIC order during
    /// training.
    pub fn new(
        kind: ReceiverKind,
        opts: ReceiverOptions,
        matrices: &'a [ConstraintMatrices],
        known: &'a [SymbolStream],
        powers: &[f64],
        packet_len: usize,
    ) -> Result<Self> {
        let k_users = matrices.len();
        check_dim("training streams", k_users, known.len())?;
        check_dim("power list", k_users, powers.len())?;
        let Some(first) = matrices.first() else {
            return Err(Error::InvalidParameter("receiver needs at least one user".into()));
        };
        let (m_dim, lp) = (first.m_dim(), first.lp());
        for cm in matrices {
            check_dim("user observation length", m_dim, cm.m_dim())?;
        }
        let train_end = opts.training_len.min(packet_len);
        if known.iter().any(|s| s.len() < train_end) {
            return Err(Error::InvalidParameter("training streams shorter than training length".into()));
        }
        if matches!(kind, ReceiverKind::Pic | ReceiverKind::JoPic) && opts.pic_stages == 0 {
            return Err(Error::InvalidParameter("PIC needs at least one stage".into()));
        }

        let mut h0 = CVector::zeros(lp);
        h0[0] = Complex64::new(1.0, 0.0);
        let matched = |cm: &ConstraintMatrices| {
            let v = cm.c.map(|x| Complex64::new(x, 0.0)) * &h0;
            let norm = v.norm();
            v.unscale(norm)
        };
        let front = matrices
            .iter()
            .map(|cm| FrontEnd {
                w: matched(cm),
                h_hat: h0.clone(),
                out_energy: 1.0,
            })
            .collect();
        let n_stages = match kind {
            ReceiverKind::Linear => 0,
            ReceiverKind::Sic | ReceiverKind::JoSic => 1,
            ReceiverKind::Pic | ReceiverKind::JoPic => opts.pic_stages,
        };
        let stages = (1..=n_stages)
            .map(|stage| {
                matrices
                    .iter()
                    .map(|cm| UserStage {
                        state: EstimatorState::new(matched(cm), IcParameterVector::zeros(0), h0.clone(), stage),
                        lambda_by_user: vec![Complex64::new(1.0, 0.0); k_users],
                        amp: 1.0,
                        decision: ZERO,
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            kind,
            opts,
            matrices,
            known,
            m_dim,
            len: packet_len,
            front,
            stages,
            tentative: vec![vec![ZERO; packet_len]; k_users],
            finals: vec![vec![ZERO; packet_len]; k_users],
            order: sic_schedule(powers),
            next: 0,
        })
    }

    pub fn kind(&self) -> ReceiverKind {
        self.kind
    }

    pub fn k_users(&self) -> usize {
        self.matrices.len()
    }

    /// Index of the next symbol to be processed.
    pub fn position(&self) -> usize {
        self.next
    }

    /// Current SIC detection order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Final decisions of user `k` for the symbols processed so far.
    pub fn decisions(&self, k: usize) -> &[Complex64] {
        &self.finals[k][..self.next]
    }

    /// Channel estimate reported for user `k`: the front-end estimator for
    /// the linear receiver, otherwise the estimator of the last stage.
    pub fn reported_channel(&self, k: usize) -> &CVector {
        match self.stages.last() {
            Some(stage) => &stage[k].state.h_hat,
            None => &self.front[k].h_hat,
        }
    }

    /// Stage 0 is the linear front-end.
    pub fn stage_snapshot(&self, stage: usize, k: usize) -> Option<StageSnapshot> {
        if stage == 0 {
            let f = self.front.get(k)?;
            return Some(StageSnapshot {
                w: f.w.clone(),
                h_hat: f.h_hat.clone(),
                lambda_by_user: Vec::new(),
                amplitude: f.out_energy.sqrt(),
            });
        }
        let s = self.stages.get(stage - 1)?.get(k)?;
        Some(StageSnapshot {
            w: s.state.w.clone(),
            h_hat: s.state.h_hat.clone(),
            lambda_by_user: s.lambda_by_user.clone(),
            amplitude: s.amp,
        })
    }

    fn training(&self, t: usize) -> bool {
        t < self.opts.training_len
    }

    fn known_at(&self, k: usize, t: usize) -> Option<Complex64> {
        self.training(t).then(|| self.known[k].symbols()[t])
    }

    fn prev_ref(&self, k: usize, i: usize) -> Complex64 {
        if i == 0 {
            return ZERO;
        }
        self.known_at(k, i - 1).unwrap_or(self.finals[k][i - 1])
    }

    fn next_ref(&self, k: usize, i: usize) -> Complex64 {
        if i + 1 >= self.len {
            return ZERO;
        }
        self.known_at(k, i + 1).unwrap_or(self.tentative[k][i + 1])
    }

    /// Step sizes for `λ` and `ĥ` at symbol `i`, after the freeze policy.
    fn estimator_steps(&self, i: usize) -> (f64, f64) {
        if self.opts.freeze_dd_updates && !self.training(i) {
            (0.0, 0.0)
        } else {
            let mu_lambda = if self.kind.is_joint() { self.opts.steps.mu_lambda } else { 0.0 };
            (mu_lambda, self.opts.steps.mu_h)
        }
    }

    fn smooth_amp(&self, amp: f64, regen: &CVector, observed: &CVector) -> f64 {
        let energy = regen.norm_squared();
        if energy > 0.0 {
            let rho = self.opts.amp_smoothing;
            (1.0 - rho) * amp + rho * regen.dotc(observed).norm() / energy
        } else {
            amp
        }
    }

    /// Front-end filtering of symbol `t`.
    fn front_lookahead(&mut self, t: usize, r: &CVector) {
        for k in 0..self.k_users() {
            let x = self.front[k].w.dotc(r);
            let dec = detect(x);
            self.tentative[k][t] = dec;
            let rho = self.opts.amp_smoothing;
            self.front[k].out_energy = (1.0 - rho) * self.front[k].out_energy + rho * x.norm_sqr();
            let b_ref = self.known_at(k, t).unwrap_or(dec);
            super::update_w(&mut self.front[k].w, b_ref - x, r, self.opts.steps.mu_w);
        }
    }

    /// Front-end channel estimation for symbol `i`.
    fn front_channel_update(&mut self, i: usize, r: &CVector) {
        let (_, mu_h) = self.estimator_steps(i);
        for k in 0..self.k_users() {
            let b_cur = self.known_at(k, i).unwrap_or(self.tentative[k][i]);
            let f = build_regen_matrix(&self.matrices[k], self.prev_ref(k, i), b_cur, self.next_ref(k, i));
            let e_vector = &f.f * &self.front[k].h_hat - r;
            super::update_h(&mut self.front[k].h_hat, &f, &e_vector, mu_h);
        }
    }

    /// Detection and adaptation of user `k` at `stage` (0-based) against
    /// reconstruction `d` with weights `weights`; returns `F ĥ`.
    fn process_user(
        &mut self,
        stage: usize,
        k: usize,
        i: usize,
        r: &CVector,
        d: &ReconstructionMatrix,
        weights: CVector,
    ) -> Result<CVector> {
        let (mu_lambda, mu_h) = self.estimator_steps(i);
        let steps = StepSizes {
            mu_w: self.opts.steps.mu_w,
            mu_lambda,
            mu_h,
        };
        let prev = self.prev_ref(k, i);
        let next = self.next_ref(k, i);
        let known = self.known_at(k, i);
        let cm = &self.matrices[k];

        let st = &mut self.stages[stage][k];
        st.state.lambda = IcParameterVector::new(weights);
        let r_k = cancel(r, d, &st.state.lambda)?;
        let x = st.state.w.dotc(&r_k);
        let dec = detect(x);
        let b_ref = known.unwrap_or(dec);
        let f = build_regen_matrix(cm, prev, b_ref, next);
        let errors = compute_errors(&st.state, r, &r_k, &f, d, b_ref)?;
        let regen = &f.f * &st.state.h_hat;
        st.state.sg_step(&errors, &r_k, &f, d, &steps);
        st.decision = dec;

        if self.kind.is_joint() {
            let st = &mut self.stages[stage][k];
            for (pos, &j) in d.group().members().iter().enumerate() {
                st.lambda_by_user[j] = st.state.lambda.lambda[pos];
            }
        } else {
            let amp = self.smooth_amp(self.stages[stage][k].amp, &regen, &r_k);
            self.stages[stage][k].amp = amp;
        }
        Ok(regen)
    }

    fn weights(&self, stage: usize, k: usize, group: &IcGroup, prev_amps: &[f64]) -> CVector {
        let members = group.members();
        if self.kind.is_joint() {
            let lam = &self.stages[stage][k].lambda_by_user;
            CVector::from_iterator(members.len(), members.iter().map(|&j| lam[j]))
        } else {
            CVector::from_iterator(members.len(), members.iter().map(|&j| Complex64::new(prev_amps[j], 0.0)))
        }
    }

    fn successive_pass(&mut self, i: usize, r: &CVector) -> Result<()> {
        let order = self.order.clone();
        let mut regen: Vec<Option<CVector>> = vec![None; self.k_users()];
        for (pos, &k) in order.iter().enumerate() {
            let group = sic_group(&order, pos);
            let cols: Vec<&CVector> = group
                .members()
                .iter()
                .map(|&j| regen[j].as_ref().expect("detected earlier in the pass"))
                .collect();
            let d = ReconstructionMatrix::from_columns(group.clone(), self.m_dim, &cols)?;
            let amps: Vec<f64> = self.stages[0].iter().map(|s| s.amp).collect();
            let weights = self.weights(0, k, &group, &amps);
            let v = self.process_user(0, k, i, r, &d, weights)?;
            regen[k] = Some(v);
        }
        for k in 0..self.k_users() {
            self.finals[k][i] = self.stages[0][k].decision;
        }
        Ok(())
    }

    /// Stage `stage` regenerates every user from its own channel estimate
    /// and the decisions of the stage before (the front-end for stage 0).
    fn stage_regen(&self, stage: usize, i: usize) -> Vec<CVector> {
        (0..self.k_users())
            .map(|j| {
                let b = self.known_at(j, i).unwrap_or(match stage {
                    0 => self.tentative[j][i],
                    _ => self.stages[stage - 1][j].decision,
                });
                let f = build_regen_matrix(&self.matrices[j], self.prev_ref(j, i), b, self.next_ref(j, i));
                &f.f * &self.stages[stage][j].state.h_hat
            })
            .collect()
    }

    fn parallel_passes(&mut self, i: usize, r: &CVector) -> Result<()> {
        let k_users = self.k_users();
        for stage in 0..self.stages.len() {
            let regen = self.stage_regen(stage, i);
            let amps: Vec<f64> = self.stages[stage].iter().map(|s| s.amp).collect();
            for k in 0..k_users {
                let group = pic_group(k, k_users)?;
                let cols: Vec<&CVector> = group.members().iter().map(|&j| &regen[j]).collect();
                let d = ReconstructionMatrix::from_columns(group.clone(), self.m_dim, &cols)?;
                let weights = self.weights(stage, k, &group, &amps);
                self.process_user(stage, k, i, r, &d, weights)?;
            }
        }
        let last = self.stages.last().expect("at least one stage");
        for k in 0..k_users {
            self.finals[k][i] = last[k].decision;
        }
        Ok(())
    }

    /// Processes the next symbol and returns every user's final decision.
    ///
    /// `received` must hold the whole packet so the front-end can look one
    /// symbol ahead.
    pub fn process_symbol(&mut self, received: &[CVector]) -> Result<Vec<Complex64>> {
        check_dim("packet length", self.len, received.len())?;
        let i = self.next;
        if i >= self.len {
            return Err(Error::InvalidParameter("packet already fully processed".into()));
        }
        if i == 0 {
            self.front_lookahead(0, &received[0]);
        }
        if i + 1 < self.len {
            self.front_lookahead(i + 1, &received[i + 1]);
        }
        if self.kind.is_successive() && !self.training(i) {
            let est: Vec<f64> = (0..self.k_users())
                .map(|k| self.stages[0][k].state.h_hat.norm_squared() * self.front[k].out_energy)
                .collect();
            self.order = sic_schedule(&est);
        }
        let r = &received[i];
        self.front_channel_update(i, r);
        match self.kind {
            ReceiverKind::Linear => {
                for k in 0..self.k_users() {
                    self.finals[k][i] = self.tentative[k][i];
                }
            }
            ReceiverKind::Sic | ReceiverKind::JoSic => self.successive_pass(i, r)?,
            ReceiverKind::Pic | ReceiverKind::JoPic => self.parallel_passes(i, r)?,
        }
        self.next += 1;
        Ok((0..self.k_users()).map(|k| self.finals[k][i]).collect())
    }

    /// Runs the remaining symbols of the packet.
    pub fn run(&mut self, received: &[CVector]) -> Result<()> {
        while self.next < self.len {
            self.process_symbol(received)?;
        }
        Ok(())
    }
}
