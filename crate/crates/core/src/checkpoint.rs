//! Binary snapshots of particle systems and Wigner grids.
//!
//! Little-endian layout. Header: magic `CLMD`, version `u32`, kind `u32`
//! (1 particles, 2 grid), `n u64`, `L f64`, `time f64`, `dt f64`, `mode u32`,
//! `key u64`, `step u64`.
//!
//! Particle payload: positions then velocities (`n x 2` f64 each), then a
//! trailer `box_x, noise_amplitude, gamma, noise_temp, cutoff` (f64). `L` is
//! the box height; square boxes have `box_x == L`.
//!
//! Grid payload (`n = nx`, `L = x_max - x_min`): `np u64`, `x_min, x_max,
//! p_min, p_max` (f64), then `nx x np` values row-major.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::md::cells::check_geometry;
use crate::md::{DynamicsMode, DynamicsSpec, ParticleSystem};
use crate::wigner::WignerGrid;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CLMD";
pub const VERSION: u32 = 1;
pub const KIND_PARTICLES: u32 = 1;
pub const KIND_GRID: u32 = 2;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8 + 8 + 8 + 4 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub version: u32,
    pub kind: u32,
    pub n: u64,
    pub length: f64,
    pub time: f64,
    pub dt: f64,
    pub mode: u32,
    pub key: u64,
    pub step: u64,
}

/// A decoded snapshot of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Particles(ParticleSystem),
    Grid(WignerGrid),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn header(&mut self, h: &Header) {
        self.0.extend_from_slice(MAGIC);
        self.u32(h.version);
        self.u32(h.kind);
        self.u64(h.n);
        self.f64(h.length);
        self.f64(h.time);
        self.f64(h.dt);
        self.u32(h.mode);
        self.u64(h.key);
        self.u64(h.step);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated: need {k} bytes at offset {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn pairs(&mut self, n: usize) -> Result<Vec<[f64; 2]>> {
        (0..n).map(|_| Ok([self.f64()?, self.f64()?])).collect()
    }
    fn header(&mut self) -> Result<Header> {
        if self.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let h = Header {
            version: self.u32()?,
            kind: self.u32()?,
            n: self.u64()?,
            length: self.f64()?,
            time: self.f64()?,
            dt: self.f64()?,
            mode: self.u32()?,
            key: self.u64()?,
            step: self.u64()?,
        };
        if h.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", h.version)));
        }
        Ok(h)
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn encode_particles(sys: &ParticleSystem) -> Vec<u8> {
    let n = sys.n();
    let mut w = Writer(Vec::with_capacity(HEADER_LEN + 32 * n + 40));
    w.header(&Header {
        version: VERSION,
        kind: KIND_PARTICLES,
        n: n as u64,
        length: sys.box_size[1],
        time: sys.time,
        dt: sys.dynamics.dt,
        mode: sys.dynamics.mode.code(),
        key: sys.rng_key,
        step: sys.step,
    });
    for p in sys.positions.iter().chain(&sys.velocities) {
        w.f64(p[0]);
        w.f64(p[1]);
    }
    let d = &sys.dynamics;
    for v in [sys.box_size[0], d.noise_amplitude, d.gamma, d.noise_temp, d.cutoff] {
        w.f64(v);
    }
    w.0
}

pub fn encode_grid(grid: &WignerGrid, dt: f64, mode: u32) -> Vec<u8> {
    let mut w = Writer(Vec::with_capacity(HEADER_LEN + 40 + 8 * grid.values.len()));
    w.header(&Header {
        version: VERSION,
        kind: KIND_GRID,
        n: grid.nx as u64,
        length: grid.x_max - grid.x_min,
        time: grid.time,
        dt,
        mode,
        key: 0,
        step: 0,
    });
    w.u64(grid.np as u64);
    for v in [grid.x_min, grid.x_max, grid.p_min, grid.p_max] {
        w.f64(v);
    }
    for &v in &grid.values {
        w.f64(v);
    }
    w.0
}

pub fn read_header(bytes: &[u8]) -> Result<Header> {
    Reader { buf: bytes, pos: 0 }.header()
}

pub fn decode(bytes: &[u8]) -> Result<Snapshot> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let h = r.header()?;
    let n = usize::try_from(h.n).map_err(|_| Error::Checkpoint("count overflows".into()))?;
    let snap = match h.kind {
        KIND_PARTICLES => {
            if n == 0 || n > (bytes.len() - HEADER_LEN) / 32 {
                return Err(Error::Checkpoint(format!("particle count {n} does not fit the file")));
            }
            let positions = r.pairs(n)?;
            let velocities = r.pairs(n)?;
            let box_x = r.f64()?;
            let dynamics = DynamicsSpec {
                mode: DynamicsMode::from_code(h.mode).map_err(|e| Error::Checkpoint(e.to_string()))?,
                noise_amplitude: r.f64()?,
                gamma: r.f64()?,
                noise_temp: r.f64()?,
                dt: h.dt,
                cutoff: r.f64()?,
            };
            dynamics.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
            let box_size = [box_x, h.length];
            check_geometry(box_size, dynamics.cutoff).map_err(|e| Error::Checkpoint(e.to_string()))?;
            let inside = positions
                .iter()
                .all(|p| (0.0..box_size[0]).contains(&p[0]) && (0.0..box_size[1]).contains(&p[1]));
            if !inside || velocities.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint("particle state outside the box or not finite".into()));
            }
            Snapshot::Particles(ParticleSystem {
                positions,
                velocities,
                box_size,
                time: h.time,
                step: h.step,
                rng_key: h.key,
                dynamics,
                noise: None,
                forces: None,
                neighbors: None,
            })
        }
        KIND_GRID => {
            let np = usize::try_from(r.u64()?).map_err(|_| Error::Checkpoint("count overflows".into()))?;
            let (x_min, x_max, p_min, p_max) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
            let cells = n.checked_mul(np).filter(|&c| c <= bytes.len() / 8).ok_or_else(|| {
                Error::Checkpoint(format!("grid {n}x{np} does not fit the file"))
            })?;
            let mut grid = WignerGrid::new(n, np, (x_min, x_max), (p_min, p_max))
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
            for v in grid.values.iter_mut().take(cells) {
                *v = r.f64()?;
            }
            grid.time = h.time;
            Snapshot::Grid(grid)
        }
        k => return Err(Error::Checkpoint(format!("unknown payload kind {k}"))),
    };
    r.finish()?;
    Ok(snap)
}

pub fn save_particles(path: &Path, sys: &ParticleSystem) -> Result<String> {
    let bytes = encode_particles(sys);
    fs::write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

pub fn load_particles(path: &Path) -> Result<ParticleSystem> {
    match decode(&fs::read(path)?)? {
        Snapshot::Particles(s) => Ok(s),
        Snapshot::Grid(_) => Err(Error::Checkpoint(format!("{} holds a grid, not particles", path.display()))),
    }
}

pub fn save_grid(path: &Path, grid: &WignerGrid, dt: f64, mode: u32) -> Result<String> {
    let bytes = encode_grid(grid, dt, mode);
    fs::write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

pub fn load_grid(path: &Path) -> Result<WignerGrid> {
    match decode(&fs::read(path)?)? {
        Snapshot::Grid(g) => Ok(g),
        Snapshot::Particles(_) => Err(Error::Checkpoint(format!("{} holds particles, not a grid", path.display()))),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::md::{initial_system, run};

    fn system() -> ParticleSystem {
        let mut s = initial_system(64, [12.0, 10.0], 0.8, DynamicsSpec::grw_noise(0.0025, 1e-4), 5).unwrap();
        run(&mut s, 7).unwrap();
        s
    }

    #[test]
    fn particles_round_trip_bitwise() {
        let s = system();
        let bytes = encode_particles(&s);
        assert_eq!(bytes.len(), HEADER_LEN + 32 * 64 + 40);
        let Snapshot::Particles(back) = decode(&bytes).unwrap() else { panic!() };
        assert_eq!(back, s);
        assert_eq!(encode_particles(&back), bytes);
    }

    #[test]
    fn header_layout() {
        let s = system();
        let bytes = encode_particles(&s);
        assert_eq!(&bytes[..4], b"CLMD");
        let h = read_header(&bytes).unwrap();
        assert_eq!((h.version, h.kind, h.n), (1, 1, 64));
        assert_eq!(h.length, 10.0);
        assert_eq!(h.step, 7);
        assert_eq!(h.mode, DynamicsMode::GrwNoise.code());
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 64);
    }

    #[test]
    fn resumed_run_matches_uninterrupted() {
        let mut a = system();
        let mut b = match decode(&encode_particles(&a)).unwrap() {
            Snapshot::Particles(s) => s,
            _ => unreachable!(),
        };
        run(&mut a, 20).unwrap();
        run(&mut b, 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_round_trip_bitwise() {
        let mut g = WignerGrid::gaussian(8, 6, (-1.0, 1.0), (-2.0, 2.0), (0.1, -0.2), (0.3, 0.5)).unwrap();
        g.time = 0.125;
        let bytes = encode_grid(&g, 0.01, 3);
        let Snapshot::Grid(back) = decode(&bytes).unwrap() else { panic!() };
        assert_eq!(back, g);
        assert_eq!(read_header(&bytes).unwrap().kind, KIND_GRID);
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = encode_particles(&system());
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(Error::Checkpoint(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(decode(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode(&extra).is_err());
    }

    #[test]
    fn files_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let s = system();
        let p = dir.path().join("a.clmd");
        let h1 = save_particles(&p, &s).unwrap();
        assert_eq!(h1, sha256_hex(&std::fs::read(&p).unwrap()));
        assert_eq!(load_particles(&p).unwrap(), s);
        assert!(load_grid(&p).is_err());
        assert_eq!(h1.len(), 64);
    }
}
