//! Sine/cosine backends for the carrier generators.
//!
//! Phase is a 32-bit word: one full turn is exactly 2^32, so multiplying a
//! frequency word by a sample index and letting it wrap gives a phase-coherent
//! oscillator for free. Outputs are Q1.15 in [-32767, +32767].
//!
//! Two interchangeable backends are provided, mirroring the usual hardware
//! trade-off:
//!
//! * [`QuarterWaveLut`]: one quadrant of samples plus symmetry unfolding,
//!   2-cycle pipeline latency, error dominated by phase quantization.
//! * [`Cordic`]: iterative rotation with gain pre-compensation, latency equal
//!   to the iteration count, error dominated by the residual rotation angle.
//!
//! Both backends return the exact values (32767, 0), (0, 32767), (-32767, 0),
//! (0, -32767) at the four quarter-turn points; swapping backends never moves
//! a pulse in time because the scheduling layer folds the reported latency
//! into its per-port lead times.

use crate::fixed::{rne_shift, sat_i16};

/// Backend selection, as it appears in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrigKind {
    /// Quarter-wave lookup table with 2^table_bits entries per quadrant.
    Lut { table_bits: u32 },
    /// Circular CORDIC with the given number of iterations.
    Cordic { iterations: u32 },
}

impl TrigKind {
    /// Pipeline latency the backend will report, without constructing it.
    pub fn latency(self) -> u32 {
        match self {
            TrigKind::Lut { .. } => 2,
            TrigKind::Cordic { iterations } => iterations,
        }
    }
}

impl Default for TrigKind {
    fn default() -> Self {
        TrigKind::Lut { table_bits: 12 }
    }
}

/// A constructed sine/cosine unit.
#[derive(Debug, Clone)]
pub enum TrigBackend {
    Lut(QuarterWaveLut),
    Cordic(Cordic),
}

impl TrigBackend {
    pub fn new(kind: TrigKind) -> Self {
        match kind {
            TrigKind::Lut { table_bits } => TrigBackend::Lut(QuarterWaveLut::new(table_bits)),
            TrigKind::Cordic { iterations } => TrigBackend::Cordic(Cordic::new(iterations)),
        }
    }

    /// (cos, sin) of `theta` (full turn = 2^32) as Q1.15.
    pub fn cos_sin(&self, theta: u32) -> (i16, i16) {
        match self {
            TrigBackend::Lut(l) => l.cos_sin(theta),
            TrigBackend::Cordic(c) => c.cos_sin(theta),
        }
    }

    /// Pipeline latency in cycles, folded into scheduling lead times.
    pub fn latency(&self) -> u32 {
        self.kind().latency()
    }

    pub fn kind(&self) -> TrigKind {
        match self {
            TrigBackend::Lut(l) => TrigKind::Lut { table_bits: l.bits },
            TrigBackend::Cordic(c) => TrigKind::Cordic {
                iterations: c.iterations,
            },
        }
    }
}

/// Quarter-wave sine table with symmetry unfolding.
///
/// The table stores sin on [0, pi/2] inclusive (2^bits + 1 entries), so the
/// quadrant endpoints are exact. The incoming phase is rounded to the nearest
/// table step before lookup.
#[derive(Debug, Clone)]
pub struct QuarterWaveLut {
    bits: u32,
    table: Vec<i16>,
}

impl QuarterWaveLut {
    pub fn new(bits: u32) -> Self {
        assert!((2..=16).contains(&bits), "table_bits out of range: {bits}");
        let n = 1usize << bits;
        let table = (0..=n)
            .map(|i| {
                let x = std::f64::consts::FRAC_PI_2 * i as f64 / n as f64;
                (32767.0 * x.sin()).round() as i16
            })
            .collect();
        QuarterWaveLut { bits, table }
    }

    pub fn cos_sin(&self, theta: u32) -> (i16, i16) {
        let n = 1u64 << self.bits;
        // Round to the nearest of the 4*n table positions around the circle.
        let shift = 32 - (self.bits + 2);
        let j = ((theta as u64 + (1 << (shift - 1))) >> shift) & (4 * n - 1);
        let quadrant = (j >> self.bits) & 3;
        let i = (j & (n - 1)) as usize;
        let ni = (n as usize) - i;
        let t = &self.table;
        match quadrant {
            0 => (t[ni], t[i]),
            1 => (-t[i], t[ni]),
            2 => (-t[ni], -t[i]),
            _ => (t[i], -t[ni]),
        }
    }
}

const QUARTER: i64 = 1 << 30;
const HALF: i64 = 1 << 31;

/// Circular CORDIC in rotation mode, phase held in turn units (2^32 = 1 turn).
#[derive(Debug, Clone)]
pub struct Cordic {
    iterations: u32,
    atan: Vec<i64>,
    x0: i64,
}

// Internal magnitude unit: 1.0 = 2^30. Working values stay far inside i64.
const UNIT_SHIFT: u32 = 30;

impl Cordic {
    pub fn new(iterations: u32) -> Self {
        assert!(
            (4..=30).contains(&iterations),
            "iterations out of range: {iterations}"
        );
        let atan = (0..iterations)
            .map(|i| {
                let a = (2f64).powi(-(i as i32)).atan();
                (a / std::f64::consts::TAU * 4294967296.0).round() as i64
            })
            .collect();
        let gain: f64 = (0..iterations)
            .map(|i| (1.0 + (2f64).powi(-2 * i as i32)).sqrt())
            .product();
        let x0 = (32767.0 * (1u64 << UNIT_SHIFT) as f64 / gain).round() as i64;
        Cordic {
            iterations,
            atan,
            x0,
        }
    }

    pub fn cos_sin(&self, theta: u32) -> (i16, i16) {
        // Fold into [-quarter, +quarter]; a fold flips both outputs.
        let mut z = theta as i32 as i64;
        let mut neg = false;
        if z > QUARTER {
            z -= HALF;
            neg = true;
        } else if z < -QUARTER {
            z += HALF;
            neg = true;
        }
        let (mut c, mut s) = if z == 0 {
            (32767, 0)
        } else if z == QUARTER {
            (0, 32767)
        } else if z == -QUARTER {
            (0, -32767)
        } else {
            let mut x = self.x0;
            let mut y = 0i64;
            for i in 0..self.iterations {
                let (dx, dy) = (y >> i, x >> i);
                if z >= 0 {
                    x -= dx;
                    y += dy;
                    z -= self.atan[i as usize];
                } else {
                    x += dx;
                    y -= dy;
                    z += self.atan[i as usize];
                }
            }
            (
                sat_i16(rne_shift(x, UNIT_SHIFT)).clamp(-32767, 32767),
                sat_i16(rne_shift(y, UNIT_SHIFT)).clamp(-32767, 32767),
            )
        };
        if neg {
            c = -c;
            s = -s;
        }
        (c, s)
    }
}
