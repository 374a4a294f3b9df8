//! Transversality defects of maps and families against level-set submanifolds.
//!
//! A target `Z = h^{-1}(0)` of codimension `c` meets `f` at `x` with defect
//! `c - rank(dh . df)` when `f(x)` lies on `Z` and defect 0 otherwise.

mod search;
mod threshold;

pub use search::{
    defect_family_sup, find_nontransverse_witness, measure_zero_probe, sample_sigma, ProbeReport,
    SigmaCloud, SigmaOptions, SupEstimate, Witness, WitnessSearch,
};
pub use threshold::{genericity_threshold, SBound, Smoothness, ThresholdQuery};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::expr::{ExprMap, Wrt};
use crate::linalg::{rank_decide, TolPolicy};

/// `Z = h^{-1}(0)` for an explicit submersion `h: R^q -> R^c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetSubmanifold {
    pub ambient_dim: usize,
    pub codim: usize,
    pub defining_map: ExprMap,
    pub membership_tol: f64,
}

impl LevelSetSubmanifold {
    pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;

    pub fn new(defining_map: ExprMap) -> Result<Self> {
        if defining_map.arity_a() != 0 {
            return Err(Error::InvalidInput("defining map must not take parameters".into()));
        }
        let codim = defining_map.output_dim();
        let ambient_dim = defining_map.arity_x();
        if codim == 0 {
            return Err(Error::Precondition(
                "codimension 0 target: every parameter would be non-transverse".into(),
            ));
        }
        if codim > ambient_dim {
            return Err(Error::InvalidInput(format!(
                "codimension {codim} exceeds ambient dimension {ambient_dim}"
            )));
        }
        Ok(Self {
            ambient_dim,
            codim,
            defining_map,
            membership_tol: Self::DEFAULT_MEMBERSHIP_TOL,
        })
    }

    /// The single point `{p}`.
    pub fn point(p: &[f64]) -> Result<Self> {
        let comps = p
            .iter()
            .enumerate()
            .map(|(i, &v)| crate::expr::Expr::x(i).add(crate::expr::Expr::Const(-v)))
            .collect();
        Self::new(ExprMap::new(p.len(), 0, comps)?)
    }

    pub fn with_membership_tol(mut self, tol: f64) -> Self {
        self.membership_tol = tol;
        self
    }

    pub fn residual(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.defining_map.eval(y, &[])?)
    }

    /// `dh` at `y`, checked to have full rank `c`.
    pub fn checked_differential(&self, y: &[f64], policy: TolPolicy) -> Result<DMatrix<f64>> {
        let dh = self.defining_map.jacobian(y, &[], Wrt::X)?;
        let rank = rank_decide(&dh, policy)?.rank;
        if rank < self.codim {
            return Err(Error::NotSubmersion {
                point: y.to_vec(),
                rank,
                codim: self.codim,
            });
        }
        Ok(dh)
    }
}

/// `F: X_box x A_box -> R^q` together with a target `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyProblem {
    pub map: ExprMap,
    pub target: LevelSetSubmanifold,
    pub x_box: BoxDomain,
    pub a_box: BoxDomain,
    #[serde(default)]
    pub rank_policy: TolPolicy,
}

impl FamilyProblem {
    pub fn new(map: ExprMap, target: LevelSetSubmanifold, x_box: BoxDomain, a_box: BoxDomain) -> Result<Self> {
        if map.output_dim() != target.ambient_dim {
            return Err(Error::InvalidInput(format!(
                "family has {} outputs but the target lives in R^{}",
                map.output_dim(),
                target.ambient_dim
            )));
        }
        if x_box.dim() != map.arity_x() || a_box.dim() != map.arity_a() {
            return Err(Error::InvalidInput(format!(
                "boxes of dimension ({}, {}) do not match arities ({}, {})",
                x_box.dim(),
                a_box.dim(),
                map.arity_x(),
                map.arity_a()
            )));
        }
        Ok(Self {
            map,
            target,
            x_box,
            a_box,
            rank_policy: TolPolicy::default(),
        })
    }

    pub fn with_rank_policy(mut self, policy: TolPolicy) -> Self {
        self.rank_policy = policy;
        self
    }

    pub fn state_dim(&self) -> usize {
        self.map.arity_x()
    }

    pub fn param_dim(&self) -> usize {
        self.map.arity_a()
    }

    pub fn codim(&self) -> usize {
        self.target.codim
    }

    /// `h(F(x, a))`.
    pub fn composite_residual(&self, x: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        self.target.residual(&self.map.eval(x, a)?)
    }

    /// `h(F(x, a))` and `dh . dF` with respect to `wrt`.
    pub fn composite_jacobian(&self, x: &[f64], a: &[f64], wrt: Wrt) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let (y, df) = self.map.eval_with_jacobian(x, a, wrt)?;
        let (r, dh) = self.target.defining_map.eval_with_jacobian(&y, &[], Wrt::X)?;
        Ok((r, dh * df))
    }
}

/// Where a family point sits relative to `W` and its companion set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    NotOnZ,
    Transverse,
    InW,
    InWTilde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub delta_section: usize,
    pub delta_family: usize,
    pub classification: Classification,
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    /// `||h(F(x, a))||_inf`.
    pub residual: f64,
}

/// Defect together with the cutoff that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DefectDetail {
    pub delta: usize,
    pub on_target: bool,
    pub tolerance_used: f64,
    pub residual: f64,
}

pub(crate) fn defect_detail(
    map: &ExprMap,
    z: &LevelSetSubmanifold,
    x: &[f64],
    a: &[f64],
    wrt: Wrt,
    policy: TolPolicy,
) -> Result<DefectDetail> {
    let (y, df) = map.eval_with_jacobian(x, a, wrt)?;
    let r = z.residual(&y)?;
    let residual = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if residual > z.membership_tol || residual.is_nan() {
        return Ok(DefectDetail {
            delta: 0,
            on_target: false,
            tolerance_used: 0.0,
            residual,
        });
    }
    let dh = z.checked_differential(&y, policy)?;
    let decision = rank_decide(&(dh * df), policy)?;
    Ok(DefectDetail {
        delta: z.codim - decision.rank.min(z.codim),
        on_target: true,
        tolerance_used: decision.tolerance_used,
        residual,
    })
}

/// `delta(f, x, Z)` for the section of `f` at the parameter `a` (empty for
/// parameter-free maps), with the default rank policy.
pub fn defect_at(f: &ExprMap, z: &LevelSetSubmanifold, x: &[f64], a: &[f64]) -> Result<usize> {
    defect_at_with(f, z, x, a, TolPolicy::default())
}

pub fn defect_at_with(
    f: &ExprMap,
    z: &LevelSetSubmanifold,
    x: &[f64],
    a: &[f64],
    policy: TolPolicy,
) -> Result<usize> {
    if f.output_dim() != z.ambient_dim {
        return Err(Error::InvalidInput(format!(
            "map has {} outputs but the target lives in R^{}",
            f.output_dim(),
            z.ambient_dim
        )));
    }
    Ok(defect_detail(f, z, x, a, Wrt::X, policy)?.delta)
}

/// Section and family defects at `(x, a)`.
///
/// The section rank is decided with the absolute cutoff the family decision
/// used, which keeps `delta_section >= delta_family` exact: the section
/// Jacobian is a column block of the family Jacobian, so its singular values
/// are dominated one by one.
pub fn classify_family_point(p: &FamilyProblem, x: &[f64], a: &[f64]) -> Result<DefectReport> {
    let family = defect_detail(&p.map, &p.target, x, a, Wrt::XA, p.rank_policy)?;
    let (delta_section, delta_family, classification) = if !family.on_target {
        (0, 0, Classification::NotOnZ)
    } else {
        let section = defect_detail(
            &p.map,
            &p.target,
            x,
            a,
            Wrt::X,
            TolPolicy::Absolute(family.tolerance_used),
        )?;
        let class = if section.delta == 0 {
            Classification::Transverse
        } else if section.delta == family.delta {
            Classification::InW
        } else {
            Classification::InWTilde
        };
        (section.delta, family.delta, class)
    };
    Ok(DefectReport {
        delta_section,
        delta_family,
        classification,
        x: x.to_vec(),
        a: a.to_vec(),
        residual: family.residual,
    })
}

/// `n - c + delta(F, Z)`.
pub fn delta_star(p: &FamilyProblem, sampled_sup: usize) -> i64 {
    p.state_dim() as i64 - p.codim() as i64 + sampled_sup as i64
}
