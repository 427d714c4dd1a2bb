use std::io::Write;

use crate::{Error, Result};

/// `W(x, p)` on a uniform tensor grid.
///
/// `x` is periodic with nodes `x_min + i dx`, `dx = (x_max - x_min) / nx`.
/// `p` is cell-centred with nodes `p_min + (j + 1/2) dp` and zero-flux walls
/// at `p_min` and `p_max`. Values are stored row-major: `values[i * np + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub nx: usize,
    pub np: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub values: Vec<f64>,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub norm: f64,
    pub x_marginal: Vec<f64>,
    pub p_marginal: Vec<f64>,
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_p: f64,
    /// `<p^2>` for unit mass and `k_B = 1`; divide by the mass otherwise.
    pub kinetic_temperature: f64,
    /// Phase-space volume of the negative part, `sum |min(W, 0)| dx dp`.
    pub negativity_volume: f64,
}

impl WignerGrid {
    pub fn new(nx: usize, np: usize, x_range: (f64, f64), p_range: (f64, f64)) -> Result<Self> {
        if nx < 1 || np < 4 {
            return Err(Error::InvalidParameter(format!("grid needs nx >= 1 and np >= 4, got {nx}x{np}")));
        }
        let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && b > a;
        if !ok(x_range) || !ok(p_range) {
            return Err(Error::InvalidParameter("grid bounds must be finite and increasing".into()));
        }
        Ok(Self {
            nx,
            np,
            x_min: x_range.0,
            x_max: x_range.1,
            p_min: p_range.0,
            p_max: p_range.1,
            values: vec![0.0; nx * np],
            time: 0.0,
        })
    }

    /// Grid filled from `f(x, p)`.
    pub fn from_fn(
        nx: usize,
        np: usize,
        x_range: (f64, f64),
        p_range: (f64, f64),
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut g = Self::new(nx, np, x_range, p_range)?;
        for i in 0..nx {
            let x = g.x(i);
            for j in 0..np {
                g.values[i * np + j] = f(x, g.p(j));
            }
        }
        g.check_finite()?;
        Ok(g)
    }

    /// Product Gaussian with the given centre and widths, normalized to a
    /// discrete norm of 1.
    pub fn gaussian(
        nx: usize,
        np: usize,
        x_range: (f64, f64),
        p_range: (f64, f64),
        center: (f64, f64),
        sigma: (f64, f64),
    ) -> Result<Self> {
        let period = x_range.1 - x_range.0;
        let mut g = Self::from_fn(nx, np, x_range, p_range, |x, p| {
            // nearest periodic image of the centre
            let dx = x - center.0 - period * ((x - center.0) / period).round();
            let dp = p - center.1;
            (-0.5 * (dx * dx / (sigma.0 * sigma.0) + dp * dp / (sigma.1 * sigma.1))).exp()
        })?;
        let n = g.norm();
        if n <= 0.0 {
            return Err(Error::InvalidParameter("Gaussian state has no mass on the grid".into()));
        }
        g.values.iter_mut().for_each(|v| *v /= n);
        Ok(g)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.np as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + (j as f64 + 0.5) * self.dp()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.np + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.np..(i + 1) * self.np]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx() * self.dp()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(Error::BlowUp {
                step: 0,
                what: format!("non-finite Wigner value at row {}, column {}", k / self.np, k % self.np),
            }),
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.np == other.np
            && self.x_min == other.x_min
            && self.x_max == other.x_max
            && self.p_min == other.p_min
            && self.p_max == other.p_max
    }

    /// Writes `x,p,W` triplets, one per node, preceded by optional `#` comment lines.
    pub fn write_csv<W: Write>(&self, out: &mut W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "x,p,W")?;
        for i in 0..self.nx {
            let x = self.x(i);
            for j in 0..self.np {
                writeln!(out, "{:.17e},{:.17e},{:.17e}", x, self.p(j), self.get(i, j))?;
            }
        }
        Ok(())
    }
}

/// Rectangle-rule functionals of the grid (exact trapezoid rule for the
/// periodic `x` direction and for states that vanish at the `p` walls).
pub fn observables(grid: &WignerGrid) -> Observables {
    let (dx, dp) = (grid.dx(), grid.dp());
    let mut x_marginal = vec![0.0; grid.nx];
    let mut p_marginal = vec![0.0; grid.np];
    let mut negativity = 0.0;
    for i in 0..grid.nx {
        for (j, &w) in grid.row(i).iter().enumerate() {
            x_marginal[i] += w * dp;
            p_marginal[j] += w * dx;
            if w < 0.0 {
                negativity -= w;
            }
        }
    }
    let norm: f64 = x_marginal.iter().sum::<f64>() * dx;
    let safe = if norm != 0.0 { norm } else { 1.0 };
    let mean_x = (0..grid.nx).map(|i| grid.x(i) * x_marginal[i]).sum::<f64>() * dx / safe;
    let mean_p = (0..grid.np).map(|j| grid.p(j) * p_marginal[j]).sum::<f64>() * dp / safe;
    let second_p = (0..grid.np).map(|j| grid.p(j).powi(2) * p_marginal[j]).sum::<f64>() * dp / safe;
    Observables {
        norm,
        x_marginal,
        p_marginal,
        mean_x,
        mean_p,
        var_p: second_p - mean_p * mean_p,
        kinetic_temperature: second_p,
        negativity_volume: negativity * dx * dp,
    }
}
