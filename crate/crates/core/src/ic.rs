//! Interference regeneration and cancellation.
//!
//! Every interferer `j` in a cancellation group is regenerated as
//! `F_j·ĥ_j`, where `F_j` combines the user's constraint matrices with its
//! symbol decisions for the previous, current and next symbol. The
//! regenerated columns form the reconstruction matrix `D`, and the
//! cancelled observation is `r − D·λ`. Conventional cancellation is the
//! special case where `λ` holds scalar amplitude estimates; SIC and PIC
//! only differ in how the groups are chosen.

use std::collections::HashSet;

use crate::error::{check_dim, Error, Result};
use crate::signal::ConstraintMatrices;
use crate::{CMatrix, CVector, Complex64};

/// Ordered set of users to regenerate and subtract.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IcGroup {
    members: Vec<usize>,
}

impl IcGroup {
    /// Fails on repeated members. An empty group means "cancel nothing".
    pub fn new(members: Vec<usize>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(members.len());
        if let Some(dup) = members.iter().find(|m| !seen.insert(**m)) {
            return Err(Error::InvalidParameter(format!(
                "user {dup} appears twice in cancellation group"
            )));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Group size P.
    pub fn p(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `F_j = b̂[i−1]·C^p + b̂[i]·C + b̂[i+1]·C^s`, an M×Lp matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRegenMatrix {
    pub f: CMatrix,
}

pub fn build_regen_matrix(
    cm: &ConstraintMatrices,
    b_prev: Complex64,
    b_cur: Complex64,
    b_next: Complex64,
) -> UserRegenMatrix {
    let f = CMatrix::from_fn(cm.m_dim(), cm.lp(), |row, l| {
        b_prev * cm.c_prev[(row, l)] + b_cur * cm.c[(row, l)] + b_next * cm.c_next[(row, l)]
    });
    UserRegenMatrix { f }
}

/// M×P matrix whose columns are the regenerated group members.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionMatrix {
    pub d: CMatrix,
    group: IcGroup,
}

impl ReconstructionMatrix {
    /// Wraps precomputed columns `F_j·ĥ_j`, one per group member.
    pub fn from_columns(group: IcGroup, m_dim: usize, columns: &[&CVector]) -> Result<Self> {
        check_dim("reconstruction columns", group.p(), columns.len())?;
        let mut d = CMatrix::zeros(m_dim, group.p());
        for (j, col) in columns.iter().enumerate() {
            check_dim("reconstruction column length", m_dim, col.len())?;
            d.set_column(j, col);
        }
        Ok(Self { d, group })
    }

    pub fn group(&self) -> &IcGroup {
        &self.group
    }

    pub fn m_dim(&self) -> usize {
        self.d.nrows()
    }
}

pub fn build_reconstruction_matrix(
    group: &IcGroup,
    m_dim: usize,
    regen: &[UserRegenMatrix],
    h_hat: &[CVector],
) -> Result<ReconstructionMatrix> {
    check_dim("regeneration matrices", group.p(), regen.len())?;
    check_dim("channel estimates", group.p(), h_hat.len())?;
    let mut d = CMatrix::zeros(m_dim, group.p());
    for (j, (f, h)) in regen.iter().zip(h_hat).enumerate() {
        check_dim("regeneration rows", m_dim, f.f.nrows())?;
        check_dim("channel estimate length", f.f.ncols(), h.len())?;
        d.set_column(j, &(&f.f * h));
    }
    Ok(ReconstructionMatrix {
        d,
        group: group.clone(),
    })
}

/// Per-user, per-stage weights on the regenerated interferers.
#[derive(Debug, Clone, PartialEq)]
pub struct IcParameterVector {
    pub lambda: CVector,
}

impl IcParameterVector {
    pub fn new(lambda: CVector) -> Self {
        Self { lambda }
    }

    pub fn zeros(p: usize) -> Self {
        Self::new(CVector::zeros(p))
    }

    pub fn ones(p: usize) -> Self {
        Self::new(CVector::from_element(p, Complex64::new(1.0, 0.0)))
    }

    pub fn p(&self) -> usize {
        self.lambda.len()
    }
}

/// `r − D·λ`, subtracting one weighted column at a time in group order, so
/// cancelling a group equals cancelling its members one by one.
pub fn cancel(r: &CVector, d: &ReconstructionMatrix, lambda: &IcParameterVector) -> Result<CVector> {
    check_dim("cancel observation", d.m_dim(), r.len())?;
    check_dim("cancel parameter vector", d.d.ncols(), lambda.p())?;
    let mut out = r.clone();
    for (j, &l) in lambda.lambda.iter().enumerate() {
        out.axpy(-l, &d.d.column(j), Complex64::new(1.0, 0.0));
    }
    Ok(out)
}

/// Amplitude-weighted cancellation `r − Σ_j Â_j·F_j·ĥ_j`.
pub fn conventional_cancel(
    r: &CVector,
    group: &IcGroup,
    regen: &[UserRegenMatrix],
    h_hat: &[CVector],
    a_hat: &[f64],
) -> Result<CVector> {
    check_dim("amplitude estimates", group.p(), a_hat.len())?;
    let d = build_reconstruction_matrix(group, r.len(), regen, h_hat)?;
    let lambda = IcParameterVector::new(CVector::from_iterator(
        a_hat.len(),
        a_hat.iter().map(|&a| Complex64::new(a, 0.0)),
    ));
    cancel(r, &d, &lambda)
}

/// Detection order by decreasing power; ties go to the lower user index.
pub fn sic_schedule(powers: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..powers.len()).collect();
    order.sort_by(|&a, &b| powers[b].total_cmp(&powers[a]).then(a.cmp(&b)));
    order
}

/// Cancellation group of the user at `position` in a SIC order: everyone
/// detected before it.
pub fn sic_group(order: &[usize], position: usize) -> IcGroup {
    IcGroup {
        members: order[..position].to_vec(),
    }
}

/// All users but `k`, ascending.
pub fn pic_group(k: usize, k_users: usize) -> Result<IcGroup> {
    if k >= k_users {
        return Err(Error::InvalidParameter(format!(
            "desired user {k} out of range for {k_users} users"
        )));
    }
    Ok(IcGroup {
        members: (0..k_users).filter(|&j| j != k).collect(),
    })
}
