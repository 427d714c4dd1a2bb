use std::fmt;
use std::sync::Arc;

use crate::kernels::{CollapseParams, Smearing};
use crate::{Error, Result};

/// External potential `U(x)` with derivatives up to third order.
pub trait Potential: Send + Sync {
    /// `[U, U', U'', U''']` at `x`.
    fn derivatives(&self, x: f64) -> [f64; 4];
}

/// `U(x) = sum_k c_k x^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPotential {
    pub coeffs: Vec<f64>,
}

impl PolynomialPotential {
    pub fn free() -> Self {
        Self { coeffs: vec![] }
    }

    /// `m omega^2 x^2 / 2`.
    pub fn harmonic(mass: f64, omega: f64) -> Self {
        Self {
            coeffs: vec![0.0, 0.0, 0.5 * mass * omega * omega],
        }
    }

    /// `c x^4`.
    pub fn quartic(c: f64) -> Self {
        Self {
            coeffs: vec![0.0, 0.0, 0.0, 0.0, c],
        }
    }
}

impl Potential for PolynomialPotential {
    fn derivatives(&self, x: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (order, slot) in out.iter_mut().enumerate() {
            // Horner on the `order`-th derivative
            let mut acc = 0.0;
            for k in (order..self.coeffs.len()).rev() {
                let falling: f64 = (k - order + 1..=k).map(|v| v as f64).product();
                acc = acc * x + self.coeffs[k] * falling;
            }
            *slot = acc;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorMode {
    LiouvilleClassical,
    MoyalOrder3,
    GrwMaster,
    GrwFokkerPlanck,
    DissipativeKramers,
    DiosiPenroseMaster(Smearing),
}

/// Whether the streaming step carries the `hbar^2` Moyal correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamingOrder {
    Classical,
    Moyal3,
}

#[derive(Clone)]
pub struct GeneratorSpec {
    pub mode: GeneratorMode,
    pub streaming: StreamingOrder,
    pub potential: Arc<dyn Potential>,
    pub params: CollapseParams,
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("mode", &self.mode)
            .field("streaming", &self.streaming)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl GeneratorSpec {
    /// Streaming is classical for `LiouvilleClassical` and includes the Moyal
    /// term otherwise; override `streaming` to switch it off.
    pub fn new(mode: GeneratorMode, potential: Arc<dyn Potential>, params: CollapseParams) -> Result<Self> {
        let streaming = match mode {
            GeneratorMode::LiouvilleClassical => StreamingOrder::Classical,
            _ => StreamingOrder::Moyal3,
        };
        let spec = Self {
            mode,
            streaming,
            potential,
            params,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_streaming(mut self, streaming: StreamingOrder) -> Self {
        self.streaming = streaming;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.params.dims != 1 {
            return Err(Error::InvalidParameter("the Wigner solver is one-dimensional (dims = 1)".into()));
        }
        match self.mode {
            GeneratorMode::DiosiPenroseMaster(_) if self.params.grav_const <= 0.0 => Err(Error::InvalidParameter(
                "diosi_penrose_master needs grav_const > 0 and smear_radius".into(),
            )),
            GeneratorMode::DissipativeKramers if self.params.k_temp > 0.0 && !self.params.noise_temp.is_finite() => {
                Err(Error::InvalidParameter("dissipative_kramers needs a finite noise temperature".into()))
            }
            _ => Ok(()),
        }
    }
}
