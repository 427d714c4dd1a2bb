//! Conversion of reduced Lennard-Jones units to SI.

use super::config::RunConfig;
use crate::{Error, Result};

/// Boltzmann constant [J/K].
pub const K_B: f64 = 1.380649e-23;

/// Lennard-Jones constants of one species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Species {
    /// Length scale [m].
    pub sigma: f64,
    /// Energy scale [J].
    pub epsilon: f64,
    /// Particle mass [kg].
    pub mass: f64,
}

impl Species {
    /// Argon with `epsilon = 120 k_B` (about 1.657e-21 J).
    pub fn argon() -> Self {
        Self {
            sigma: 3.4e-10,
            epsilon: 120.0 * K_B,
            mass: 6.634e-26,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitReport {
    /// `sigma sqrt(m / epsilon)` [s].
    pub tau: f64,
    /// Momentum diffusion constant `A^2 epsilon^2 tau / (2 sigma^2)` [J^2 s / m^2].
    pub d_p: f64,
    /// Noise temperature [K].
    pub t_n: f64,
    pub gamma: f64,
    /// Velocity-spread temperatures `sigma_v^2 epsilon / k_B` of the two halves [K].
    pub t_left: f64,
    pub t_right: f64,
    pub length: f64,
}

pub fn convert_units(config: &RunConfig, species: &Species) -> Result<UnitReport> {
    for (k, v) in [("sigma", species.sigma), ("epsilon", species.epsilon), ("mass", species.mass)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{k} must be positive, got {v}")));
        }
    }
    let tau = species.sigma * (species.mass / species.epsilon).sqrt();
    let e_over_k = species.epsilon / K_B;
    Ok(UnitReport {
        tau,
        d_p: config.a_nd * config.a_nd * species.epsilon * species.epsilon * tau / (2.0 * species.sigma * species.sigma),
        t_n: config.t_n_nd * e_over_k,
        gamma: config.gamma() / tau,
        t_left: config.sigma_left.powi(2) * e_over_k,
        t_right: config.sigma_right.powi(2) * e_over_k,
        length: config.box_length() * species.sigma,
    })
}

impl UnitReport {
    pub fn to_text(&self) -> String {
        format!(
            "tau = {:.6e} s\nD_p = {:.6e} J^2 s/m^2\nT_n = {:.6} K\ngamma = {:.6e} 1/s\nT_left_initial = {:.6} K\nT_right_initial = {:.6} K\nL = {:.6e} m\n",
            self.tau, self.d_p, self.t_n, self.gamma, self.t_left, self.t_right, self.length
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argon_reference_values() {
        let r = convert_units(&RunConfig::default(), &Species::argon()).unwrap();
        // independent evaluation of the three defining formulas
        let eps = 120.0 * 1.380649e-23;
        let tau = 3.4e-10 * (6.634e-26f64 / eps).sqrt();
        assert!((r.tau / tau - 1.0).abs() < 1e-14);
        assert!((r.tau / 2.151e-12 - 1.0).abs() < 5e-4);
        assert!((r.d_p / 2.554e-43 - 1.0).abs() < 5e-4);
        assert!((r.t_n - 70.356).abs() < 5e-3);
    }

    #[test]
    fn rejects_bad_species() {
        let s = Species {
            mass: 0.0,
            ..Species::argon()
        };
        assert!(convert_units(&RunConfig::default(), &s).is_err());
    }

    #[test]
    fn report_lists_quantities() {
        let r = convert_units(&RunConfig::default(), &Species::argon()).unwrap();
        let t = r.to_text();
        assert!(t.contains("tau = 2.15") && t.contains("T_n = 70.35"));
    }
}
