//! Interaction kernels for the attraction and repulsion forces.

use crate::error::{Error, Result};

/// Radially decreasing interaction kernel. Both families evaluate to 1 at
/// `r = 0` and stay in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `psi(r) = (1 + r^theta)^-1` with `theta > 0`. Larger `theta` makes
    /// the interaction more short-ranged.
    Polynomial { theta: f64 },
    /// `psi(r) = exp(-r^2 / sigma^2)` with `sigma > 0`.
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn polynomial(theta: f64) -> Self {
        KernelSpec::Polynomial { theta }
    }

    pub fn gaussian(sigma: f64) -> Self {
        KernelSpec::Gaussian { sigma }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Polynomial { theta } => {
                if !theta.is_finite() || theta <= 0.0 {
                    return Err(Error::Parameter(format!(
                        "polynomial kernel exponent must be positive, got {theta}"
                    )));
                }
            }
            KernelSpec::Gaussian { sigma } => {
                if !sigma.is_finite() || sigma <= 0.0 {
                    return Err(Error::Parameter(format!(
                        "gaussian kernel width must be positive, got {sigma}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Kernel value from the squared distance. Infallible hot-path variant:
    /// squared distances are nonnegative by construction.
    #[inline]
    pub fn eval_sq(&self, r_sq: f64) -> f64 {
        match *self {
            KernelSpec::Polynomial { theta } => 1.0 / (1.0 + pow_from_sq(r_sq, theta)),
            KernelSpec::Gaussian { sigma } => (-r_sq / (sigma * sigma)).exp(),
        }
    }
}

/// `r^theta` computed from `r^2`, avoiding the square root for the common
/// integer exponents used in practice.
#[inline]
fn pow_from_sq(r_sq: f64, theta: f64) -> f64 {
    if theta == 2.0 {
        r_sq
    } else if theta == 1.0 {
        r_sq.sqrt()
    } else if theta == 3.0 {
        r_sq * r_sq.sqrt()
    } else if theta == 4.0 {
        r_sq * r_sq
    } else {
        r_sq.powf(0.5 * theta)
    }
}

/// Evaluates a kernel at radius `r >= 0`.
pub fn kernel_eval(spec: &KernelSpec, r: f64) -> Result<f64> {
    spec.validate()?;
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Parameter(format!(
            "kernel radius must be nonnegative, got {r}"
        )));
    }
    Ok(spec.eval_sq(r * r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_theta2_at_one() {
        let k = KernelSpec::polynomial(2.0);
        assert_eq!(kernel_eval(&k, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn unit_value_at_origin() {
        for spec in [
            KernelSpec::polynomial(0.7),
            KernelSpec::polynomial(3.0),
            KernelSpec::gaussian(0.25),
        ] {
            assert_eq!(kernel_eval(&spec, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn gaussian_unit_width() {
        let k = KernelSpec::gaussian(1.0);
        let v = kernel_eval(&k, 1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_radius() {
        let k = KernelSpec::polynomial(2.0);
        assert!(kernel_eval(&k, -0.5).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(KernelSpec::polynomial(0.0).validate().is_err());
        assert!(KernelSpec::gaussian(-1.0).validate().is_err());
    }

    #[test]
    fn fractional_exponent_matches_powf() {
        let k = KernelSpec::polynomial(2.5);
        let r: f64 = 1.7;
        let expect = 1.0 / (1.0 + r.powf(2.5));
        assert!((kernel_eval(&k, r).unwrap() - expect).abs() < 1e-15);
    }
}
