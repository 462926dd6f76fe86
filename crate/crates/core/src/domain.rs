//! Jobs, machines and the WSPT ratio.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{quantize, Field, NumericFormat, Scalar};

/// Smallest expected processing time the generator emits.
pub const MIN_EPT: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MachineType {
    Cpu,
    Gpu,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Best,
    Worst,
}

/// A compute unit: machine type and quality. Its index is its position in
/// the machine list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MachineProfile {
    pub mtype: MachineType,
    pub quality: Quality,
}

impl MachineProfile {
    pub const fn new(mtype: MachineType, quality: Quality) -> Self {
        MachineProfile { mtype, quality }
    }
}

impl fmt::Display for MachineProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{:?}, {:?}>", self.mtype, self.quality)
    }
}

/// M1..M5: CPU best, CPU worst, mixed best, GPU best, GPU worst.
pub fn default_machines() -> Vec<MachineProfile> {
    use MachineType::*;
    use Quality::*;
    vec![
        MachineProfile::new(Cpu, Best),
        MachineProfile::new(Cpu, Worst),
        MachineProfile::new(Mixed, Best),
        MachineProfile::new(Gpu, Best),
        MachineProfile::new(Gpu, Worst),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nature {
    Compute,
    Memory,
    Mixed,
}

impl Nature {
    pub const ALL: [Nature; 3] = [Nature::Compute, Nature::Memory, Nature::Mixed];
}

/// A job as produced by the workload generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    /// Nonzero trace-wide identifier.
    pub id: u64,
    pub created_at: u64,
    pub nature: Nature,
    pub weight: u32,
    /// Expected processing time on each machine.
    pub ept: Vec<u32>,
}

impl Job {
    pub fn machines(&self) -> usize {
        self.ept.len()
    }
}

/// Quantized `weight / ept_i`.
///
/// The ratio is formed from the stored (quantized) weight and EPT, as the
/// hardware only ever sees those. It is meant to be computed once per job and
/// machine and kept, not recomputed per cycle.
pub fn wspt(weight: u32, ept_i: u32, format: &NumericFormat) -> Scalar {
    debug_assert!(ept_i >= 1);
    let w = quantize(weight as f64, format, Field::Weight).to_f64();
    let e = quantize(ept_i as f64, format, Field::Ept).to_f64();
    if e == 0.0 {
        return quantize(0.0, format, Field::Wspt);
    }
    quantize(w / e, format, Field::Wspt)
}

/// Base EPT per job nature and machine type, and the quality multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityTable {
    pub compute: TypeRow,
    pub memory: TypeRow,
    pub mixed: TypeRow,
    pub best_factor: f64,
    pub worst_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeRow {
    pub cpu: f64,
    pub gpu: f64,
    pub mixed: f64,
}

impl Default for AffinityTable {
    fn default() -> Self {
        AffinityTable {
            compute: TypeRow {
                cpu: 40.0,
                gpu: 15.0,
                mixed: 25.0,
            },
            memory: TypeRow {
                cpu: 20.0,
                gpu: 45.0,
                mixed: 25.0,
            },
            mixed: TypeRow {
                cpu: 30.0,
                gpu: 30.0,
                mixed: 20.0,
            },
            best_factor: 1.0,
            worst_factor: 4.0,
        }
    }
}

impl AffinityTable {
    pub fn base(&self, nature: Nature, mtype: MachineType) -> f64 {
        let row = match nature {
            Nature::Compute => &self.compute,
            Nature::Memory => &self.memory,
            Nature::Mixed => &self.mixed,
        };
        match mtype {
            MachineType::Cpu => row.cpu,
            MachineType::Gpu => row.gpu,
            MachineType::Mixed => row.mixed,
        }
    }

    pub fn quality_factor(&self, quality: Quality) -> f64 {
        match quality {
            Quality::Best => self.best_factor,
            Quality::Worst => self.worst_factor,
        }
    }

    /// EPT for an explicit jitter multiplier, clamped to [`MIN_EPT`].
    pub fn ept_with_jitter(&self, nature: Nature, profile: MachineProfile, jitter: f64) -> u32 {
        let raw = self.base(nature, profile.mtype) * self.quality_factor(profile.quality) * jitter;
        let rounded = (raw + 0.5).floor();
        if rounded.is_nan() || rounded < MIN_EPT as f64 {
            MIN_EPT
        } else if rounded >= u32::MAX as f64 {
            u32::MAX
        } else {
            rounded as u32
        }
    }
}

/// Draws an EPT with multiplicative jitter uniform in [0.9, 1.1].
pub fn ept_model<R: Rng + ?Sized>(
    nature: Nature,
    profile: MachineProfile,
    table: &AffinityTable,
    rng: &mut R,
) -> u32 {
    let jitter = rng.random_range(0.9..=1.1);
    table.ept_with_jitter(nature, profile, jitter)
}
