//! Bi-Lipschitz profiles for the normalized one-parameter families
//! `t^b` on (0,1] and `t^{k/2} e^{-bt}` on [0,inf), plus the finite-box
//! distance bounds for the unnormalized reliability families.

use crate::domain::{TimeDomain, TRUNCATION_TAIL_MASS};
use crate::error::{IpsError, Result};
use crate::geometry::closed_form;
use crate::surface::TimeLaw;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileFamily {
    /// `u_b(t) = t^b` on (0,1], parameter `b` in (-1/2, inf).
    Power,
    /// `u_b(t) = t^{k/2} e^{-bt}` on [0,inf), parameter `b` in (0, inf).
    ExpFamily { k: u8 },
}

/// Non-increasing bracket `rho_lower(b v b') |b-b'| <= d(u_b, u_b') <=
/// rho_upper(b ^ b') |b-b'|` on the normalized family, where `d` is the
/// L2 distance between unit-norm members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProfile {
    pub family: ProfileFamily,
}

impl LipschitzProfile {
    pub fn powerlaw() -> Self {
        Self { family: ProfileFamily::Power }
    }

    pub fn expfamily(k: u8) -> Result<Self> {
        if k > 1 {
            return Err(IpsError::InvalidParameter(format!(
                "exp family profile supports k in {{0, 1}}, got {k}"
            )));
        }
        Ok(Self { family: ProfileFamily::ExpFamily { k } })
    }

    /// Open lower endpoint of the parameter interval.
    pub fn domain_start(&self) -> f64 {
        match self.family {
            ProfileFamily::Power => -0.5,
            ProfileFamily::ExpFamily { .. } => 0.0,
        }
    }

    pub fn rho_lower(&self, u: f64) -> f64 {
        match self.family {
            ProfileFamily::Power => 1.0 / (1.0 + 2.0 * u),
            ProfileFamily::ExpFamily { .. } => 1.0 / (2.0 * u),
        }
    }

    pub fn rho_upper(&self, u: f64) -> f64 {
        match self.family {
            ProfileFamily::Power => 1.0 / (1.0 + 2.0 * u),
            ProfileFamily::ExpFamily { k } => (k as f64 + 1.0).sqrt() / (2.0 * u),
        }
    }

    fn check_param(&self, b: f64) -> Result<()> {
        if !b.is_finite() || b <= self.domain_start() {
            return Err(IpsError::InvalidParameter(format!(
                "parameter {b} outside the profile interval ({}, inf)",
                self.domain_start()
            )));
        }
        Ok(())
    }

    /// Squared L2 distance between the unit-norm members at `b` and `b'`.
    pub fn normalized_sq_distance(&self, b: f64, bp: f64) -> Result<f64> {
        self.check_param(b)?;
        self.check_param(bp)?;
        Ok(match self.family {
            ProfileFamily::Power => closed_form::power_sqrt_dist_sq(b, bp),
            ProfileFamily::ExpFamily { k } => 2.0 * closed_form::exp_family_hellinger_sq(b, bp, k),
        })
    }

    pub fn normalized_distance(&self, b: f64, bp: f64) -> Result<f64> {
        Ok(self.normalized_sq_distance(b, bp)?.sqrt())
    }

    /// The unit-norm member at `b`, normalized over the family's reference
    /// domain ((0,1] for power laws, [0,inf) for the exponential family).
    pub fn member(&self, b: f64) -> Result<TimeLaw> {
        self.check_param(b)?;
        Ok(match self.family {
            ProfileFamily::Power => {
                TimeLaw::Power { scale: (2.0 * b + 1.0).sqrt(), exponent: b }
            }
            ProfileFamily::ExpFamily { k } => TimeLaw::ExpDecay {
                scale: closed_form::exp_family_normalizer(b, k),
                rate: b,
                half_power: k,
            },
        })
    }

    /// Observation window carrying the family's mass: the unit interval for
    /// power laws, or a truncation of [0,inf) whose tail mass is below
    /// `TRUNCATION_TAIL_MASS` for every member with parameter >= `b_min`.
    pub fn reference_domain(&self, b_min: f64) -> Result<TimeDomain> {
        self.check_param(b_min)?;
        match self.family {
            ProfileFamily::Power => Ok(TimeDomain::open_unit()),
            ProfileFamily::ExpFamily { .. } => {
                let member = self.member(b_min)?;
                let tail = |t: f64| member.square_integral(t, f64::INFINITY).unwrap_or(f64::NAN);
                let mut hi = 1.0 / b_min;
                let mut guard = 0;
                while tail(hi) > TRUNCATION_TAIL_MASS {
                    hi *= 2.0;
                    guard += 1;
                    if guard > 200 {
                        return Err(IpsError::NonConvergence(
                            "truncation point search did not terminate".into(),
                        ));
                    }
                }
                let mut lo = hi / 2.0;
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if tail(mid) > TRUNCATION_TAIL_MASS {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                TimeDomain::truncated(hi)
            }
        }
    }

    /// Validates a closed parameter range `[r, R]` against the profile
    /// interval.
    pub fn validate_range(&self, r: f64, big_r: f64) -> Result<()> {
        self.check_param(r)?;
        self.check_param(big_r)?;
        if r >= big_r {
            return Err(IpsError::InvalidParameter(format!(
                "empty parameter range [{r}, {big_r}]"
            )));
        }
        Ok(())
    }
}

/// Exact squared L2 distance between two same-family laws on `[a, b]`,
/// or `None` when no closed cross term exists.
pub fn law_l2_dist_sq_exact(u: &TimeLaw, v: &TimeLaw, a: f64, b: f64) -> Option<f64> {
    let cross = u.cross_integral(v, a, b)?;
    let uu = u.square_integral(a, b).ok()?;
    let vv = v.square_integral(a, b).ok()?;
    Some((uu + vv - 2.0 * cross).max(0.0))
}

/// Distance bound `r2^{1/2} |d theta_1| + sqrt(2) r1 r2^{3/2} |d theta_2|`
/// for `theta_1 t^{theta_2}` on (0,1], valid on the box
/// `[-r1, r1] x [-1/2 + 1/r2, inf)`.
pub fn duane_dist_bound(theta: (f64, f64), theta_p: (f64, f64), r1: f64, r2: f64) -> Result<f64> {
    check_box(theta, theta_p, r1, r2, -0.5 + 1.0 / r2)?;
    Ok(r2.sqrt() * (theta.0 - theta_p.0).abs()
        + std::f64::consts::SQRT_2 * r1 * r2.powf(1.5) * (theta.1 - theta_p.1).abs())
}

/// Distance bound `C1(k) |d theta_1| + C2(k) |d theta_2|` for
/// `theta_1 t^{k/2} e^{-theta_2 t}` on (0,inf), valid on the box
/// `[-r1, r1] x [1/r2, inf)`, with
/// `C1(0) = (r2/2)^{1/2}`, `C2(0) = r1 r2^{3/2}/2`,
/// `C1(1) = r2/2`, `C2(1) = (3/8)^{1/2} r1 r2^2`.
pub fn exp_decay_dist_bound(
    theta: (f64, f64),
    theta_p: (f64, f64),
    r1: f64,
    r2: f64,
    k: u8,
) -> Result<f64> {
    check_box(theta, theta_p, r1, r2, 1.0 / r2)?;
    let (c1, c2) = match k {
        0 => ((r2 / 2.0).sqrt(), r1 * r2.powf(1.5) / 2.0),
        1 => (r2 / 2.0, (3.0f64 / 8.0).sqrt() * r1 * r2 * r2),
        _ => {
            return Err(IpsError::InvalidParameter(format!(
                "decay distance bound supports k in {{0, 1}}, got {k}"
            )))
        }
    };
    Ok(c1 * (theta.0 - theta_p.0).abs() + c2 * (theta.1 - theta_p.1).abs())
}

fn check_box(
    theta: (f64, f64),
    theta_p: (f64, f64),
    r1: f64,
    r2: f64,
    floor: f64,
) -> Result<()> {
    if r1 <= 0.0 || r2 <= 0.0 {
        return Err(IpsError::InvalidParameter("box radii must be positive".into()));
    }
    for th in [theta, theta_p] {
        if th.0.abs() > r1 + 1e-12 || th.1 < floor - 1e-12 {
            return Err(IpsError::InvalidParameter(format!(
                "parameter ({}, {}) outside the box [-{r1}, {r1}] x [{floor}, inf)",
                th.0, th.1
            )));
        }
    }
    Ok(())
}
