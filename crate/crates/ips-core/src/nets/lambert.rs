//! Principal branch of the Lambert W function by Newton iteration.

use crate::error::{IpsError, Result};

const MAX_ITER: usize = 100;
const REL_TOL: f64 = 1e-14;

/// Solves `w e^w = z` for the principal branch (`w >= -1`, `z >= -1/e`).
///
/// For large arguments the iteration runs on `w + ln w = ln z`, which avoids
/// overflow of `e^w`.
pub fn lambert_w0(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(IpsError::InvalidParameter("lambert_w0 requires a finite argument".into()));
    }
    let min_z = -(-1.0f64).exp();
    if z < min_z {
        return Err(IpsError::InvalidParameter(format!(
            "lambert_w0 defined on [-1/e, inf), got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(0.0);
    }

    if z > 1e10 {
        return newton_log_form(z);
    }

    let mut w = initial_guess(z);
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - z;
        let df = ew * (w + 1.0);
        if df == 0.0 {
            break;
        }
        let mut step = f / df;
        // Keep the iterate on the principal branch.
        while w - step <= -1.0 {
            step *= 0.5;
        }
        let next = w - step;
        if (next - w).abs() <= REL_TOL * (1.0 + next.abs()) {
            return Ok(next);
        }
        w = next;
    }
    // Near the branch point the derivative degenerates; accept the iterate if
    // it still solves the equation to high accuracy.
    if (w * w.exp() - z).abs() <= 1e-10 * (1.0 + z.abs()) {
        return Ok(w);
    }
    Err(IpsError::NonConvergence(format!("lambert_w0({z}) did not converge")))
}

fn initial_guess(z: f64) -> f64 {
    if z < -0.2 {
        // Series around the branch point z = -1/e.
        let p = (2.0 * (1.0 + std::f64::consts::E * z)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 * p * p * p / 72.0
    } else if z < std::f64::consts::E {
        let l = (1.0 + z).ln();
        l * (1.0 - l / (2.0 + l))
    } else {
        let l = z.ln();
        l - l.ln()
    }
}

fn newton_log_form(z: f64) -> Result<f64> {
    let ln_z = z.ln();
    let mut w = ln_z - ln_z.ln();
    for _ in 0..MAX_ITER {
        let f = w + w.ln() - ln_z;
        let df = 1.0 + 1.0 / w;
        let next = w - f / df;
        if (next - w).abs() <= REL_TOL * next.abs() {
            return Ok(next);
        }
        w = next;
    }
    Err(IpsError::NonConvergence(format!("lambert_w0({z}) did not converge")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_on_wide_grid() {
        for &z in &[1e-9, 1e-4, 0.1, 0.5, 1.0, std::f64::consts::E, 10.0, 738.9, 1e6, 1e10, 1e30, 1e300] {
            let w = lambert_w0(z).unwrap();
            let back = if w > 500.0 { w.ln() + w - z.ln() } else { (w * w.exp() - z) / z };
            assert!(back.abs() < 1e-12, "z={z}: residual {back}");
        }
    }

    #[test]
    fn known_values() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-14);
        let w = lambert_w0(2.0 * (2.0f64).exp()).unwrap();
        assert!((w - 2.0).abs() < 1e-13);
    }

    #[test]
    fn negative_branch_segment() {
        for &z in &[-0.35, -0.3, -0.2, -0.05, -1e-4] {
            let w = lambert_w0(z).unwrap();
            assert!(w > -1.0 && w < 0.0);
            assert!((w * w.exp() - z).abs() < 1e-12);
        }
        let at_branch = lambert_w0(-(-1.0f64).exp()).unwrap();
        assert!((at_branch + 1.0).abs() < 2e-4);
    }

    #[test]
    fn rejects_out_of_domain() {
        assert!(lambert_w0(-1.0).is_err());
        assert!(lambert_w0(f64::NAN).is_err());
    }
}
