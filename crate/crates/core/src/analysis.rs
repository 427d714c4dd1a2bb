//! Observables of particle snapshots: global temperature, cloud-in-cell
//! kinetic-energy density, y-averaged profiles, Fourier modes of the
//! kinetic-energy density and the momentum factorization diagnostic.

use std::io::Write;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::md::cells::{min_image, CellList};
use crate::md::ParticleSystem;
use crate::{Error, Result};

/// Default field resolution per axis.
pub const DEFAULT_GRID: usize = 128;

/// `T = Σ v² / (2n)`, the per-particle kinetic energy in two dimensions.
pub fn kinetic_temperature(sys: &ParticleSystem) -> f64 {
    let n = sys.n();
    if n == 0 {
        return 0.0;
    }
    sys.velocities.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>() / (2.0 * n as f64)
}

/// Node-centred periodic scalar field; node `(ix, iy)` sits at
/// `(ix * hx, iy * hy)` and is stored at `values[iy * ng + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub ng: usize,
    pub box_size: [f64; 2],
    pub values: Vec<f64>,
}

impl FieldGrid {
    pub fn spacing(&self) -> [f64; 2] {
        [self.box_size[0] / self.ng as f64, self.box_size[1] / self.ng as f64]
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1]
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.ng + ix]
    }

    /// Node x coordinates.
    pub fn xs(&self) -> Vec<f64> {
        let hx = self.spacing()[0];
        (0..self.ng).map(|i| i as f64 * hx).collect()
    }

    /// `Σ values · cell area`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Cloud-in-cell deposition of `v²/2` onto an `ng × ng` node grid, as an
/// energy density (energy per unit area).
pub fn cic_deposit(sys: &ParticleSystem, ng: usize) -> Result<FieldGrid> {
    if ng < 2 {
        return Err(Error::InvalidParameter(format!("grid needs at least 2 nodes per axis, got {ng}")));
    }
    let [lx, ly] = sys.box_size;
    let (hx, hy) = (lx / ng as f64, ly / ng as f64);
    let mut energy = vec![0.0; ng * ng];
    for (x, v) in sys.positions.iter().zip(&sys.velocities) {
        let e = 0.5 * (v[0] * v[0] + v[1] * v[1]);
        let (fx, fy) = (x[0] / hx, x[1] / hy);
        let (i0, j0) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - i0, fy - j0);
        let i0 = (i0 as isize).rem_euclid(ng as isize) as usize;
        let j0 = (j0 as isize).rem_euclid(ng as isize) as usize;
        let (i1, j1) = ((i0 + 1) % ng, (j0 + 1) % ng);
        energy[j0 * ng + i0] += e * (1.0 - tx) * (1.0 - ty);
        energy[j0 * ng + i1] += e * tx * (1.0 - ty);
        energy[j1 * ng + i0] += e * (1.0 - tx) * ty;
        energy[j1 * ng + i1] += e * tx * ty;
    }
    let area = hx * hy;
    Ok(FieldGrid {
        ng,
        box_size: sys.box_size,
        values: energy.into_iter().map(|e| e / area).collect(),
    })
}

/// Column means: `⟨e⟩_y` at each node column.
pub fn y_averaged_profile(field: &FieldGrid) -> Vec<f64> {
    let ng = field.ng;
    (0..ng)
        .map(|ix| (0..ng).map(|iy| field.get(ix, iy)).sum::<f64>() / ng as f64)
        .collect()
}

/// `(1/(2n)) Σ v² exp(-i k x)` with `k = 2π n_x / L_x`, summed over particles.
pub fn fourier_mode(sys: &ParticleSystem, n_x: u32) -> Complex64 {
    let n = sys.n();
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let k = 2.0 * std::f64::consts::PI * n_x as f64 / sys.box_size[0];
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, v) in sys.positions.iter().zip(&sys.velocities) {
        let v2 = v[0] * v[0] + v[1] * v[1];
        if n_x == 0 {
            acc.re += v2;
        } else {
            let (s, c) = (k * x[0]).sin_cos();
            acc += Complex64::new(v2 * c, -v2 * s);
        }
    }
    acc / (2.0 * n as f64)
}

/// Settings of the factorization diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationOptions {
    /// Pairs closer than this are candidates.
    pub pair_radius: f64,
    pub max_pairs: usize,
    /// Permutation resamples for the null distribution.
    pub resamples: usize,
    pub seed: u64,
}

impl Default for FactorizationOptions {
    fn default() -> Self {
        Self {
            pair_radius: 1.5,
            max_pairs: 1_000_000,
            resamples: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factorization {
    /// `‖f₂ − f⊗f‖₂` over the binned `v_x` histogram.
    pub value: f64,
    /// Mean and standard deviation of the value with velocities permuted
    /// among particles (no correlations by construction).
    pub null_mean: f64,
    pub null_sd: f64,
    pub pairs: usize,
}

/// `‖f₂ − f⊗f‖₂` with default options.
pub fn factorization_diagnostic(sys: &ParticleSystem, bins: usize) -> Result<f64> {
    let opts = FactorizationOptions {
        resamples: 0,
        ..Default::default()
    };
    Ok(factorization_with_null(sys, bins, &opts)?.value)
}

/// The diagnostic together with its permutation null.
pub fn factorization_with_null(
    sys: &ParticleSystem,
    bins: usize,
    opts: &FactorizationOptions,
) -> Result<Factorization> {
    let n = sys.n();
    if n < 100 {
        return Err(Error::Statistics(format!("need at least 100 particles, got {n}")));
    }
    if bins < 8 {
        return Err(Error::InvalidParameter(format!("need at least 8 bins, got {bins}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pairs = close_pairs(sys, opts.pair_radius)?;
    if pairs.len() > opts.max_pairs {
        let keep = index::sample(&mut rng, pairs.len(), opts.max_pairs);
        let mut picked: Vec<usize> = keep.into_iter().collect();
        picked.sort_unstable();
        pairs = picked.into_iter().map(|k| pairs[k]).collect();
    }
    if pairs.len() < 4 * bins * bins {
        return Err(Error::Statistics(format!(
            "{} pairs cannot populate {bins}x{bins} bins",
            pairs.len()
        )));
    }
    let vx: Vec<f64> = sys.velocities.iter().map(|v| v[0]).collect();
    let range = vx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::Statistics("velocity spread is zero or not finite".into()));
    }
    let bin_of: Vec<usize> = vx.iter().map(|&v| symmetric_bin(v, range, bins)).collect();
    let value = distance(&pairs, &bin_of, bins);
    let mut null = Vec::with_capacity(opts.resamples);
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..opts.resamples {
        perm.shuffle(&mut rng);
        let permuted: Vec<usize> = perm.iter().map(|&k| bin_of[k]).collect();
        null.push(distance(&pairs, &permuted, bins));
    }
    let (null_mean, null_sd) = mean_sd(&null);
    Ok(Factorization {
        value,
        null_mean,
        null_sd,
        pairs: pairs.len(),
    })
}

/// Bin over `[-range, range]` with `bin(-v) = bins - 1 - bin(v)` exactly.
fn symmetric_bin(v: f64, range: f64, bins: usize) -> usize {
    let up = |a: f64| ((((range + a) / (2.0 * range)) * bins as f64) as usize).min(bins - 1);
    if v < 0.0 {
        bins - 1 - up(-v)
    } else {
        up(v)
    }
}

fn distance(pairs: &[(u32, u32)], bin_of: &[usize], bins: usize) -> f64 {
    let mut joint = vec![0.0; bins * bins];
    let mut marginal = vec![0.0; bins];
    // both orderings, so f₂ is symmetric and both marginals coincide
    let w = 1.0 / (2.0 * pairs.len() as f64);
    for &(i, j) in pairs {
        let (a, b) = (bin_of[i as usize], bin_of[j as usize]);
        joint[a * bins + b] += w;
        joint[b * bins + a] += w;
        marginal[a] += w;
        marginal[b] += w;
    }
    let mut acc = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let d = joint[a * bins + b] - marginal[a] * marginal[b];
            acc += d * d;
        }
    }
    acc.sqrt()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, var.sqrt())
}

/// All unordered pairs closer than `radius`, in ascending `(i, j)` order.
fn close_pairs(sys: &ParticleSystem, radius: f64) -> Result<Vec<(u32, u32)>> {
    let cells = CellList::build(&sys.positions, sys.box_size, radius)?;
    let r2 = radius * radius;
    let pos = &sys.positions;
    let mut out = Vec::new();
    for i in 0..pos.len() {
        let xi = pos[i];
        let mut near = Vec::new();
        if cells.uses_cells() {
            cells.for_neighbors(cells.cell_of[i], sys.box_size, |j, s| {
                if j > i {
                    let d = [pos[j][0] + s[0] - xi[0], pos[j][1] + s[1] - xi[1]];
                    if d[0] * d[0] + d[1] * d[1] < r2 {
                        near.push(j as u32);
                    }
                }
            });
        } else {
            for (j, xj) in pos.iter().enumerate().skip(i + 1) {
                let d = [
                    min_image(xj[0] - xi[0], sys.box_size[0]),
                    min_image(xj[1] - xi[1], sys.box_size[1]),
                ];
                if d[0] * d[0] + d[1] * d[1] < r2 {
                    near.push(j as u32);
                }
            }
        }
        near.sort_unstable();
        out.extend(near.into_iter().map(|j| (i as u32, j)));
    }
    Ok(out)
}

/// One row of a mode time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSample {
    pub t: f64,
    pub n_x: u32,
    pub value: Complex64,
}

/// One row of a diagnostic time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticSample {
    pub t: f64,
    pub value: f64,
    pub null_floor: f64,
}

fn write_comments<W: Write>(out: &mut W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    Ok(())
}

pub fn write_profile_csv<W: Write>(out: &mut W, comments: &[String], xs: &[f64], profile: &[f64]) -> Result<()> {
    if xs.len() != profile.len() {
        return Err(Error::InvalidParameter("profile and coordinates differ in length".into()));
    }
    write_comments(out, comments)?;
    writeln!(out, "x,e_kin_y")?;
    for (x, e) in xs.iter().zip(profile) {
        writeln!(out, "{x:.17e},{e:.17e}")?;
    }
    Ok(())
}

pub fn write_modes_csv<W: Write>(out: &mut W, comments: &[String], rows: &[ModeSample]) -> Result<()> {
    write_comments(out, comments)?;
    writeln!(out, "t,n_x,Re,Im,abs")?;
    for r in rows {
        writeln!(
            out,
            "{:.17e},{},{:.17e},{:.17e},{:.17e}",
            r.t,
            r.n_x,
            r.value.re,
            r.value.im,
            r.value.norm()
        )?;
    }
    Ok(())
}

pub fn write_diagnostics_csv<W: Write>(out: &mut W, comments: &[String], rows: &[DiagnosticSample]) -> Result<()> {
    write_comments(out, comments)?;
    writeln!(out, "t,value,null_floor")?;
    for r in rows {
        writeln!(out, "{:.17e},{:.17e},{:.17e}", r.t, r.value, r.null_floor)?;
    }
    Ok(())
}

/// Reads a two-column profile CSV back, skipping comments and the header.
pub fn read_profile_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut es = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).skip(1) {
        let mut cols = line.split(',');
        let mut next = || -> Result<f64> {
            cols.next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::InvalidParameter(format!("bad profile row: {line}")))
        };
        xs.push(next()?);
        es.push(next()?);
    }
    Ok((xs, es))
}

/// Reads a mode time series back, skipping comments and the header.
pub fn read_modes_csv(text: &str) -> Result<Vec<ModeSample>> {
    let mut rows = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).skip(1) {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::InvalidParameter(format!("bad mode row: {line}"));
        if cols.len() != 5 {
            return Err(bad());
        }
        let f = |k: usize| cols[k].parse::<f64>().map_err(|_| bad());
        rows.push(ModeSample {
            t: f(0)?,
            n_x: cols[1].parse().map_err(|_| bad())?,
            value: Complex64::new(f(2)?, f(3)?),
        });
    }
    Ok(rows)
}
