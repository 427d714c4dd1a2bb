//! Thin wrappers around double-exponential quadrature.

pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    quadrature::integrate(f, a, b, abs_tol).integral
}

/// Integral over consecutive panels `[edges[i], edges[i+1]]`.
pub(crate) fn integrate_panels<F: Fn(f64) -> f64>(f: F, edges: &[f64], abs_tol: f64) -> f64 {
    let panels = edges.len().saturating_sub(1).max(1) as f64;
    edges
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], abs_tol / panels))
        .sum()
}

/// Integral over `[a, inf)` using `x = a + scale * t / (1 - t)`.
pub(crate) fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, scale: f64, abs_tol: f64) -> f64 {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - t;
        let x = a + scale * t / one_minus;
        f(x) * scale / (one_minus * one_minus)
    };
    integrate(g, 0.0, 1.0, abs_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_half_line() {
        let v = integrate_to_infinity(|x| (-x * x).exp(), 0.0, 1.0, 1e-12);
        assert!((v - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn panels_add_up() {
        let v = integrate_panels(|x| x.sin(), &[0.0, 1.0, 2.0, std::f64::consts::PI], 1e-12);
        assert!((v - 2.0).abs() < 1e-10);
    }
}
