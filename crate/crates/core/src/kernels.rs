//! Collapse-model kernels, Kramers-Moyal coefficients and parameter maps.
//!
//! Everything here is a pure function of [`CollapseParams`]; kernels are
//! evaluation rules plus metadata and carry no discretization. The module is
//! unit-agnostic: callers pick a consistent unit system (SI or reduced).
//! Temperatures are stored in energy units, i.e. `noise_temp` is `k_B * T_n`.

use std::f64::consts::PI;

use statrs::function::{erf, exponential};

use crate::quad;
use crate::{Error, Result};

/// Constants of the collapse models.
///
/// `gamma` and `noise_temp` are only meaningful for the dissipative model and
/// are derived by [`CollapseParams::dissipative`]; `grav_const` is zero unless
/// gravity-induced collapse is switched on with [`CollapseParams::with_gravity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseParams {
    /// Collapse rate [1/time].
    pub lambda: f64,
    /// Inverse localization area [1/length^2].
    pub alpha: f64,
    pub hbar: f64,
    /// Dissipative temperature parameter (dimensionless).
    pub k_temp: f64,
    /// Damping rate [1/time].
    pub gamma: f64,
    /// Noise temperature in energy units.
    pub noise_temp: f64,
    pub mass: f64,
    pub grav_const: f64,
    /// Mass-smearing length R0.
    pub smear_radius: f64,
    /// Spatial dimension, 1 to 3.
    pub dims: u32,
}

impl CollapseParams {
    /// Plain GRW parameters.
    pub fn grw(lambda: f64, alpha: f64, hbar: f64, mass: f64, dims: u32) -> Result<Self> {
        let p = Self {
            lambda,
            alpha,
            hbar,
            k_temp: 0.0,
            gamma: 0.0,
            noise_temp: f64::INFINITY,
            mass,
            grav_const: 0.0,
            smear_radius: 1.0,
            dims,
        };
        p.validate()?;
        Ok(p)
    }

    /// Dissipative GRW parameters; derives `gamma = 2 lambda k` and
    /// `noise_temp = hbar^2 alpha / (8 m k)` (localization length `1/sqrt(alpha)`).
    pub fn dissipative(lambda: f64, alpha: f64, hbar: f64, mass: f64, k_temp: f64, dims: u32) -> Result<Self> {
        let mut p = Self::grw(lambda, alpha, hbar, mass, dims)?;
        p.k_temp = k_temp;
        p.gamma = 2.0 * lambda * k_temp;
        p.noise_temp = if k_temp > 0.0 {
            hbar * hbar / (8.0 * mass * k_temp * p.localization_length().powi(2))
        } else {
            f64::INFINITY
        };
        p.validate()?;
        Ok(p)
    }

    /// Switches on gravity-induced collapse with constant `grav_const` and smearing length `smear_radius`.
    pub fn with_gravity(mut self, grav_const: f64, smear_radius: f64) -> Result<Self> {
        self.grav_const = grav_const;
        self.smear_radius = smear_radius;
        self.validate()?;
        Ok(self)
    }

    /// Same parameters with a different spatial dimension.
    pub fn with_dims(mut self, dims: u32) -> Result<Self> {
        self.dims = dims;
        self.validate()?;
        Ok(self)
    }

    /// `r_c = 1/sqrt(alpha)`.
    pub fn localization_length(&self) -> f64 {
        1.0 / self.alpha.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("hbar", self.hbar),
            ("k_temp", self.k_temp),
            ("gamma", self.gamma),
            ("mass", self.mass),
            ("grav_const", self.grav_const),
            ("smear_radius", self.smear_radius),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        if self.noise_temp.is_nan() {
            return Err(Error::InvalidParameter("noise_temp is NaN".into()));
        }
        let checks = [
            (self.lambda >= 0.0, "lambda >= 0"),
            (self.alpha > 0.0, "alpha > 0"),
            (self.hbar > 0.0, "hbar > 0"),
            (self.mass > 0.0, "mass > 0"),
            (self.k_temp >= 0.0, "k_temp >= 0"),
            (self.gamma >= 0.0, "gamma >= 0"),
            (self.grav_const >= 0.0, "grav_const >= 0"),
            (self.smear_radius > 0.0, "smear_radius > 0"),
            ((1..=3).contains(&self.dims), "dims in 1..=3"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::InvalidParameter(format!("violated: {what}")));
            }
        }
        Ok(())
    }
}

/// How the point mass is smeared out in the gravitational kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smearing {
    Gaussian,
    HardSphere,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    Infinite,
    Cutoff(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelRule {
    /// `(pi w)^{-d/2} exp(-|p|^2 / w)` with `w = alpha hbar^2`.
    Gaussian { width_sq: f64, dims: u32 },
    /// `(4G / pi hbar^2) |mu(p)|^2 / |p|^2`.
    DiosiPenrose {
        grav_const: f64,
        mass: f64,
        hbar: f64,
        smear_radius: f64,
        smearing: Smearing,
        dims: u32,
    },
}

/// A momentum-jump kernel as an evaluation rule plus metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumKernel {
    pub rule: KernelRule,
    pub support: Support,
    /// Integral of the kernel over momentum space; 1 for the normalized GRW
    /// kernel, a rate for the gravitational kernel (infinite below 3D).
    pub total_rate: f64,
}

impl MomentumKernel {
    pub fn dims(&self) -> u32 {
        match self.rule {
            KernelRule::Gaussian { dims, .. } | KernelRule::DiosiPenrose { dims, .. } => dims,
        }
    }

    /// Kernel density at the momentum vector `p` (length `dims`).
    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.dims() as usize {
            return Err(Error::InvalidParameter(format!(
                "momentum has {} components, kernel is {}-dimensional",
                p.len(),
                self.dims()
            )));
        }
        self.eval_norm(p.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    /// Kernel density at a momentum of Euclidean norm `p`.
    pub fn eval_norm(&self, p: f64) -> Result<f64> {
        match self.rule {
            KernelRule::Gaussian { width_sq, dims } => {
                Ok((PI * width_sq).powf(-(dims as f64) / 2.0) * (-p * p / width_sq).exp())
            }
            KernelRule::DiosiPenrose {
                grav_const,
                mass,
                hbar,
                smear_radius,
                smearing,
                ..
            } => {
                if p == 0.0 {
                    return Err(Error::SingularPoint);
                }
                let mu = mass * form_factor(smearing, smear_radius * p / hbar);
                Ok(4.0 * grav_const / (PI * hbar * hbar) * mu * mu / (p * p))
            }
        }
    }

    /// Density of the single-axis momentum jump `p_x`, i.e. the kernel
    /// integrated over the transverse components.
    ///
    /// For the Gaussian kernel this is the 1D Gaussian of the same width. The
    /// gravitational kernel is always projected from three dimensions, where
    /// it is integrable; the projection has a logarithmic singularity at 0.
    pub fn axis_marginal(&self, px: f64) -> Result<f64> {
        match self.rule {
            KernelRule::Gaussian { width_sq, .. } => Ok((PI * width_sq).powf(-0.5) * (-px * px / width_sq).exp()),
            KernelRule::DiosiPenrose {
                grav_const,
                mass,
                hbar,
                smear_radius,
                smearing,
                ..
            } => {
                if px == 0.0 {
                    return Err(Error::SingularPoint);
                }
                // (8G m^2 / hbar^2) * int_{s0}^inf f(s)^2 / s ds, s = R0 q / hbar
                let pre = 8.0 * grav_const * mass * mass / (hbar * hbar);
                let s0 = smear_radius * px.abs() / hbar;
                let tail = match smearing {
                    // f^2 = exp(-s^2): the integral is E1(s0^2) / 2
                    Smearing::Gaussian => 0.5 * expint_e1(s0 * s0),
                    Smearing::HardSphere => hard_sphere_log_tail(s0),
                };
                Ok(pre * tail)
            }
        }
    }

    /// Mean of [`Self::axis_marginal`] over `[-h, h]`; finite although the
    /// gravitational marginal diverges at the origin.
    pub fn axis_cell_average(&self, h: f64) -> Result<f64> {
        if h <= 0.0 {
            return Err(Error::InvalidParameter("cell half-width must be positive".into()));
        }
        match self.rule {
            KernelRule::Gaussian { width_sq, .. } => Ok(0.5 * erf::erf(h / width_sq.sqrt()) / h),
            KernelRule::DiosiPenrose {
                grav_const,
                mass,
                hbar,
                smear_radius,
                smearing,
                ..
            } => {
                let pre = 8.0 * grav_const * mass * mass / (hbar * hbar);
                let a = smear_radius / hbar;
                let c = a * h;
                // int_0^h tail(a p) dp = (1/a) int_0^c tail(s) ds
                let integral_s = match smearing {
                    // int_0^c E1(s^2)/2 ds = (c E1(c^2) + sqrt(pi) erf(c)) / 2
                    Smearing::Gaussian => 0.5 * (c * expint_e1(c * c) + PI.sqrt() * erf::erf(c)),
                    Smearing::HardSphere => quad::integrate(hard_sphere_log_tail, 0.0, c, 1e-13),
                };
                Ok(pre * integral_s / (a * h))
            }
        }
    }

    /// Second moment `int p_x^2 K dp` of the single-axis marginal, i.e. the
    /// per-component momentum variance injected per unit time (or per event).
    pub fn axis_second_moment(&self) -> f64 {
        match self.rule {
            KernelRule::Gaussian { width_sq, .. } => width_sq / 2.0,
            KernelRule::DiosiPenrose {
                grav_const,
                mass,
                hbar,
                smear_radius,
                smearing,
                ..
            } => {
                let base = grav_const * mass * mass * hbar / smear_radius.powi(3);
                match smearing {
                    Smearing::Gaussian => 4.0 * PI.sqrt() / 3.0 * base,
                    Smearing::HardSphere => 8.0 * PI * base,
                }
            }
        }
    }
}

/// Fourier transform of the normalized smeared mass density at `s = R0 |p| / hbar`.
fn form_factor(smearing: Smearing, s: f64) -> f64 {
    match smearing {
        Smearing::Gaussian => (-0.5 * s * s).exp(),
        Smearing::HardSphere => {
            if s < 1e-3 {
                // series of 3 (sin s - s cos s) / s^3
                1.0 - s * s / 10.0 + s.powi(4) / 280.0
            } else {
                3.0 * (s.sin() - s * s.cos()) / (s * s * s)
            }
        }
    }
}

/// `E1(x)` for `x > 0`.
fn expint_e1(x: f64) -> f64 {
    if x > 700.0 {
        return 0.0;
    }
    // statrs' continued fraction occasionally fails to converge just above 1
    exponential::integral(x, 1).unwrap_or_else(|| expint_e1_series(x))
}

/// Power series `-gamma - ln x - sum (-x)^k / (k k!)`, accurate for moderate `x`.
fn expint_e1_series(x: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// `int_{s0}^inf f(s)^2 / s ds` for the uniform-ball form factor.
fn hard_sphere_log_tail(s0: f64) -> f64 {
    const S_MAX: f64 = 400.0;
    if s0 >= S_MAX {
        return 9.0 / (8.0 * s0.powi(4));
    }
    let f = |s: f64| {
        let ff = form_factor(Smearing::HardSphere, s);
        ff * ff / s
    };
    let mut edges = vec![s0];
    let mut e = (s0 / PI).floor() * PI + PI;
    while e < S_MAX {
        edges.push(e);
        e += PI;
    }
    edges.push(S_MAX);
    // f^2 / s ~ 9 cos^2 s / s^5 for large s
    quad::integrate_panels(f, &edges, 1e-14) + 9.0 / (8.0 * S_MAX.powi(4))
}

/// Normalized Gaussian momentum kernel of a GRW collapse event.
pub fn grw_momentum_kernel(params: &CollapseParams) -> Result<MomentumKernel> {
    params.validate()?;
    Ok(MomentumKernel {
        rule: KernelRule::Gaussian {
            width_sq: params.alpha * params.hbar * params.hbar,
            dims: params.dims,
        },
        support: Support::Infinite,
        total_rate: 1.0,
    })
}

/// Coefficient of `d^{2n} W / dp^{2n}` in the Kramers-Moyal expansion of the
/// GRW collapse term: `lambda (alpha hbar^2)^n (2n-1)!! / (2^n (2n)!)`.
pub fn kramers_moyal_coefficient(n: i64, params: &CollapseParams) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain(format!("Kramers-Moyal order must be >= 1, got {n}")));
    }
    params.validate()?;
    let w = params.alpha * params.hbar * params.hbar;
    // (2n-1)!! / (2^n (2n)!) = 1 / (4^n n!)
    let mut coeff = params.lambda;
    for k in 1..=n {
        coeff *= w / (4.0 * k as f64);
    }
    Ok(coeff)
}

/// `D_p = d lambda alpha hbar^2 / 4`.
pub fn diffusion_constant(params: &CollapseParams) -> Result<f64> {
    params.validate()?;
    Ok(params.dims as f64 * params.lambda * params.alpha * params.hbar * params.hbar / 4.0)
}

/// Collapse rate that makes the single-particle CSL generator equal to GRW:
/// `lambda = xi (alpha / 4 pi)^{3/2}`.
pub fn csl_rate_from_xi(xi: f64, alpha: f64) -> Result<f64> {
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::InvalidParameter(format!("xi must be finite and >= 0, got {xi}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be finite and > 0, got {alpha}")));
    }
    Ok(xi * (alpha / (4.0 * PI)).powf(1.5))
}

/// Gravitational jump kernel `(4G/pi hbar^2) |mu(p)|^2 / |p|^2` in `dims` dimensions.
///
/// Only in three dimensions is the kernel integrable; below that `total_rate`
/// is infinite. Use [`MomentumKernel::axis_marginal`] for 1D solvers.
pub fn dp_jump_kernel(params: &CollapseParams, smearing: Smearing) -> Result<MomentumKernel> {
    params.validate()?;
    let (g, m, hbar, r0) = (params.grav_const, params.mass, params.hbar, params.smear_radius);
    let total_rate = if g == 0.0 {
        0.0
    } else if params.dims == 3 {
        let base = g * m * m / (hbar * r0);
        match smearing {
            Smearing::Gaussian => 8.0 * PI.sqrt() * base,
            // (16 G m^2 / hbar R0) * 9 * int (sin s - s cos s)^2 / s^6 ds, the integral being pi/15
            Smearing::HardSphere => 48.0 * PI / 5.0 * base,
        }
    } else {
        f64::INFINITY
    };
    Ok(MomentumKernel {
        rule: KernelRule::DiosiPenrose {
            grav_const: g,
            mass: m,
            hbar,
            smear_radius: r0,
            smearing,
            dims: params.dims,
        },
        support: Support::Infinite,
        total_rate,
    })
}

/// Total 3D rate `4 pi int p^2 K(p) dp` by radial quadrature; the `p^2`
/// Jacobian cancels the `1/p^2` divergence.
pub fn dp_total_rate_quadrature(kernel: &MomentumKernel) -> Result<f64> {
    let KernelRule::DiosiPenrose {
        grav_const,
        mass,
        hbar,
        smear_radius,
        smearing,
        ..
    } = kernel.rule
    else {
        return Err(Error::InvalidParameter("not a gravitational kernel".into()));
    };
    let pre = 4.0 * PI * 4.0 * grav_const / (PI * hbar * hbar) * mass * mass;
    let scale = hbar / smear_radius;
    // integrate in s = R0 p / hbar, dp = scale ds
    let integral_s = match smearing {
        Smearing::Gaussian => quad::integrate_to_infinity(|s| (-s * s).exp(), 0.0, 1.0, 1e-14),
        Smearing::HardSphere => {
            let f = |s: f64| form_factor(Smearing::HardSphere, s).powi(2);
            let s_max = 4000.0;
            let mut edges = vec![0.0];
            let mut e = PI;
            while e < s_max {
                edges.push(e);
                e += PI;
            }
            edges.push(s_max);
            // f^2 ~ 9 cos^2 s / s^4
            quad::integrate_panels(f, &edges, 1e-14) + 3.0 / (2.0 * s_max.powi(3))
        }
    };
    Ok(pre * scale * integral_s)
}

/// Drift and diffusion coefficients of the first-order-in-k expansion of the
/// dissipative collapse operator: `(gamma, gamma m k_B T_n)`.
///
/// With `k = 0` the drift vanishes and the diffusion is the plain GRW
/// [`diffusion_constant`].
pub fn dissipative_kernel_expanded(params: &CollapseParams) -> Result<(f64, f64)> {
    params.validate()?;
    if params.k_temp == 0.0 {
        return Ok((0.0, diffusion_constant(params)?));
    }
    let gamma = 2.0 * params.lambda * params.k_temp;
    let noise_temp = params.hbar * params.hbar / (8.0 * params.mass * params.k_temp * params.localization_length().powi(2));
    Ok((gamma, gamma * params.mass * noise_temp))
}

/// Multiplier `exp(-alpha x'^2 / 4)` of the collapse map acting on the
/// momentum-Fourier-transformed Wigner function.
pub fn position_rep_multiplier(params: &CollapseParams, x_prime: f64) -> f64 {
    (-params.alpha * x_prime * x_prime / 4.0).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const HBAR_SI: f64 = 1.054_571_817e-34;

    fn unit_grw() -> CollapseParams {
        CollapseParams::grw(0.7, 2.0, 1.0, 1.0, 1).unwrap()
    }

    #[test]
    fn grw_kernel_peak() {
        let p = CollapseParams::grw(1.0, 3.0, 0.5, 1.0, 1).unwrap();
        let k = grw_momentum_kernel(&p).unwrap();
        assert_relative_eq!(k.eval(&[0.0]).unwrap(), 1.0 / (PI * 3.0 * 0.25).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn grw_kernel_fwhm_si() {
        let p = CollapseParams::grw(1e-16, 1e14, HBAR_SI, 1.0, 1).unwrap();
        let k = grw_momentum_kernel(&p).unwrap();
        let KernelRule::Gaussian { width_sq, .. } = k.rule else { unreachable!() };
        let fwhm = 2.0 * (2f64.ln() * width_sq).sqrt();
        assert_relative_eq!(fwhm, 1.756e-27, max_relative = 5e-4);
        // half maximum really is reached at fwhm / 2
        let peak = k.eval(&[0.0]).unwrap();
        assert_relative_eq!(k.eval(&[fwhm / 2.0]).unwrap(), peak / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn non_finite_params_rejected() {
        assert!(CollapseParams::grw(f64::NAN, 1.0, 1.0, 1.0, 1).is_err());
        assert!(CollapseParams::grw(1.0, f64::INFINITY, 1.0, 1.0, 1).is_err());
        assert!(CollapseParams::grw(1.0, 1.0, 0.0, 1.0, 1).is_err());
        assert!(CollapseParams::grw(1.0, 1.0, 1.0, 1.0, 4).is_err());
        assert!(CollapseParams::grw(-1.0, 1.0, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn km_coefficients() {
        let p = unit_grw();
        let w = p.alpha * p.hbar * p.hbar;
        assert_relative_eq!(kramers_moyal_coefficient(1, &p).unwrap(), p.lambda * w / 4.0, max_relative = 1e-15);
        assert_relative_eq!(kramers_moyal_coefficient(2, &p).unwrap(), p.lambda * w * w / 32.0, max_relative = 1e-15);
        // n = 3: 15 / (8 * 720)
        assert_relative_eq!(
            kramers_moyal_coefficient(3, &p).unwrap(),
            p.lambda * w.powi(3) * 15.0 / (8.0 * 720.0),
            max_relative = 1e-15
        );
        assert!(matches!(kramers_moyal_coefficient(0, &p), Err(Error::Domain(_))));
        assert!(matches!(kramers_moyal_coefficient(-2, &p), Err(Error::Domain(_))));
        let zero = CollapseParams::grw(0.0, 2.0, 1.0, 1.0, 1).unwrap();
        for n in 1..6 {
            assert_eq!(kramers_moyal_coefficient(n, &zero).unwrap(), 0.0);
        }
    }

    #[test]
    fn km_first_order_equals_1d_diffusion() {
        let p = unit_grw();
        assert_eq!(kramers_moyal_coefficient(1, &p).unwrap(), diffusion_constant(&p).unwrap());
    }

    #[test]
    fn diffusion_constants() {
        let p3 = CollapseParams::grw(0.3, 5.0, 0.2, 1.0, 3).unwrap();
        assert_relative_eq!(diffusion_constant(&p3).unwrap(), 3.0 * 0.3 * 5.0 * 0.04 / 4.0, max_relative = 1e-15);
        let p2 = CollapseParams::grw(1e-16, 1e14, HBAR_SI, 1.0, 2).unwrap();
        assert_relative_eq!(diffusion_constant(&p2).unwrap(), 5.56e-71, max_relative = 1e-3);
        let p0 = CollapseParams::grw(0.0, 5.0, 0.2, 1.0, 2).unwrap();
        assert_eq!(diffusion_constant(&p0).unwrap(), 0.0);
    }

    #[test]
    fn csl_mapping() {
        assert_relative_eq!(csl_rate_from_xi(1.0, 4.0 * PI).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(csl_rate_from_xi(0.0, 3.0).unwrap(), 0.0);
        assert_relative_eq!(csl_rate_from_xi(2.0, PI).unwrap(), 0.25, max_relative = 1e-15);
        assert!(csl_rate_from_xi(-1.0, 1.0).is_err());
        assert!(csl_rate_from_xi(1.0, 0.0).is_err());
    }

    #[test]
    fn csl_kernel_identical_to_grw() {
        let alpha = 7.3;
        let lambda = csl_rate_from_xi(2.5, alpha).unwrap();
        let mapped = CollapseParams::grw(lambda, alpha, 1.0, 1.0, 1).unwrap();
        let direct = CollapseParams::grw(2.5 * (alpha / (4.0 * PI)).powf(1.5), alpha, 1.0, 1.0, 1).unwrap();
        assert_eq!(mapped, direct);
        assert_eq!(grw_momentum_kernel(&mapped).unwrap(), grw_momentum_kernel(&direct).unwrap());
    }

    #[test]
    fn dp_singular_and_nonnegative() {
        let p = CollapseParams::grw(0.0, 1.0, 1.0, 1.0, 3).unwrap().with_gravity(1.0, 1.0).unwrap();
        for s in [Smearing::Gaussian, Smearing::HardSphere] {
            let k = dp_jump_kernel(&p, s).unwrap();
            assert!(matches!(k.eval(&[0.0, 0.0, 0.0]), Err(Error::SingularPoint)));
            assert!(matches!(k.axis_marginal(0.0), Err(Error::SingularPoint)));
            for i in 1..200 {
                let q = i as f64 * 0.37;
                assert!(k.eval(&[q, -0.5 * q, 0.1]).unwrap() >= 0.0);
                assert!(k.axis_marginal(q).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn dp_zero_gravity_is_zero() {
        let p = CollapseParams::grw(0.0, 1.0, 1.0, 1.0, 3).unwrap().with_gravity(0.0, 1.0).unwrap();
        let k = dp_jump_kernel(&p, Smearing::Gaussian).unwrap();
        assert_eq!(k.total_rate, 0.0);
        assert_eq!(k.eval(&[0.3, 0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(k.axis_marginal(0.3).unwrap(), 0.0);
    }

    #[test]
    fn dp_gaussian_total_rate() {
        let p = CollapseParams::grw(0.0, 1.0, 1.3, 2.0, 3).unwrap().with_gravity(0.4, 0.7).unwrap();
        let k = dp_jump_kernel(&p, Smearing::Gaussian).unwrap();
        let closed = 8.0 * PI.sqrt() * 0.4 * 4.0 / (1.3 * 0.7);
        assert_relative_eq!(k.total_rate, closed, max_relative = 1e-15);
        assert_relative_eq!(dp_total_rate_quadrature(&k).unwrap(), closed, max_relative = 1e-9);
    }

    #[test]
    fn dp_hard_sphere_total_rate() {
        let p = CollapseParams::grw(0.0, 1.0, 1.0, 1.0, 3).unwrap().with_gravity(1.0, 1.0).unwrap();
        let k = dp_jump_kernel(&p, Smearing::HardSphere).unwrap();
        assert_relative_eq!(dp_total_rate_quadrature(&k).unwrap(), k.total_rate, max_relative = 1e-7);
    }

    #[test]
    fn dp_total_rate_diverges_below_3d() {
        let p = CollapseParams::grw(0.0, 1.0, 1.0, 1.0, 1).unwrap().with_gravity(1.0, 1.0).unwrap();
        assert!(dp_jump_kernel(&p, Smearing::Gaussian).unwrap().total_rate.is_infinite());
    }

    #[test]
    fn dp_marginal_integrates_to_total_rate() {
        let p = CollapseParams::grw(0.0, 1.0, 1.0, 1.0, 3).unwrap().with_gravity(1.0, 1.0).unwrap();
        for s in [Smearing::Gaussian, Smearing::HardSphere] {
            let k = dp_jump_kernel(&p, s).unwrap();
            let h = 0.05;
            let inner = 2.0 * h * k.axis_cell_average(h).unwrap();
            let outer = 2.0 * crate::quad::integrate_panels(
                |q| k.axis_marginal(q).unwrap(),
                &[h, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0, 400.0],
                1e-12,
            );
            assert_relative_eq!(inner + outer, k.total_rate, max_relative = 2e-5);
        }
    }

    #[test]
    fn dp_marginal_second_moment() {
        let p = CollapseParams::grw(0.0, 1.0, 1.0, 1.0, 3).unwrap().with_gravity(1.0, 1.0).unwrap();
        let k = dp_jump_kernel(&p, Smearing::Gaussian).unwrap();
        let m2 = 2.0 * crate::quad::integrate_panels(
            |q| q * q * k.axis_marginal(q).unwrap(),
            &[1e-12, 0.5, 1.0, 2.0, 4.0, 8.0, 30.0],
            1e-13,
        );
        assert_relative_eq!(m2, k.axis_second_moment(), max_relative = 1e-8);
    }

    #[test]
    fn dissipative_coefficients() {
        let base = CollapseParams::grw(0.9, 2.0, 1.0, 1.5, 1).unwrap();
        let (drift, diff) = dissipative_kernel_expanded(&base).unwrap();
        assert_eq!(drift, 0.0);
        assert_eq!(diff, diffusion_constant(&base).unwrap());

        let p = CollapseParams::dissipative(0.9, 2.0, 1.0, 1.5, 0.05, 1).unwrap();
        let (gamma, d) = dissipative_kernel_expanded(&p).unwrap();
        assert_relative_eq!(gamma, 2.0 * 0.9 * 0.05, max_relative = 1e-15);
        assert_relative_eq!(gamma, p.gamma, max_relative = 1e-15);
        assert_relative_eq!(d, gamma * p.mass * p.noise_temp, max_relative = 1e-15);
        // independent of k: gamma m T_n = lambda alpha hbar^2 / 4
        assert_relative_eq!(d, 0.9 * 2.0 / 4.0, max_relative = 1e-14);

        let p2 = CollapseParams::dissipative(1.8, 2.0, 1.0, 1.5, 0.05, 1).unwrap();
        let (g2, d2) = dissipative_kernel_expanded(&p2).unwrap();
        assert_relative_eq!(g2, 2.0 * gamma, max_relative = 1e-15);
        assert_relative_eq!(d2, 2.0 * d, max_relative = 1e-15);
    }

    #[test]
    fn e1_series_matches_reference() {
        // scipy.special.exp1
        assert_relative_eq!(expint_e1_series(1.0), 0.2193839343955205, max_relative = 1e-14);
        assert_relative_eq!(expint_e1_series(0.1), 1.8229239584193906, max_relative = 1e-14);
        assert_relative_eq!(expint_e1_series(2.0), 0.048900510708061125, max_relative = 1e-12);
        for x in [1.00035, 1.0018, 1.1487, 1.177575] {
            assert_relative_eq!(expint_e1(x), expint_e1_series(x), max_relative = 1e-13);
        }
    }

    #[test]
    fn multiplier_values() {
        let p = CollapseParams::grw(1.0, 3.0, 1.0, 1.0, 1).unwrap();
        assert_eq!(position_rep_multiplier(&p, 0.0), 1.0);
        assert_relative_eq!(position_rep_multiplier(&p, 2.0 / 3f64.sqrt()), (-1.0f64).exp(), max_relative = 1e-15);
    }
}
