//! α check: a CAM tagged by job, holding the remaining virtual-work cycles.


use super::{EngineError, JobTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlphaCamEntry {
    pub tag: JobTag,
    pub remaining: u32,
}

#[derive(Debug, Clone)]
pub struct AlphaCam {
    cells: Vec<Option<AlphaCamEntry>>,
}

impl AlphaCam {
    pub fn new(capacity: usize) -> Self {
        AlphaCam {
            cells: vec![None; capacity],
        }
    }

    pub fn len(&self) -> usize {
        self.cells.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(Option::is_none)
    }

    fn find(&self, tag: JobTag) -> Option<usize> {
        self.cells
            .iter()
            .position(|cell| matches!(cell, Some(e) if e.tag == tag))
    }

    pub fn insert(&mut self, tag: JobTag, remaining: u32) -> Result<(), EngineError> {
        let free = self
            .cells
            .iter()
            .position(Option::is_none)
            .ok_or(EngineError::Capacity)?;
        self.cells[free] = Some(AlphaCamEntry { tag, remaining });
        Ok(())
    }

    pub fn get(&self, tag: JobTag) -> Option<u32> {
        self.find(tag).and_then(|i| self.cells[i]).map(|e| e.remaining)
    }

    /// One cycle of virtual work; returns the remaining count.
    pub fn decrement(&mut self, tag: JobTag) -> Result<u32, EngineError> {
        let i = self.find(tag).ok_or(EngineError::UnknownId(tag))?;
        let entry = self.cells[i].as_mut().expect("matched cell is occupied");
        entry.remaining = entry.remaining.saturating_sub(1);
        Ok(entry.remaining)
    }

    pub fn remove(&mut self, tag: JobTag) -> Result<AlphaCamEntry, EngineError> {
        let i = self.find(tag).ok_or(EngineError::UnknownId(tag))?;
        Ok(self.cells[i].take().expect("matched cell is occupied"))
    }

    pub fn entries(&self) -> impl Iterator<Item = AlphaCamEntry> + '_ {
        self.cells.iter().flatten().copied()
    }
}

/// Resolution of α: it is held as an integer count of `1 / ALPHA_SCALE`.
pub const ALPHA_SCALE: u64 = 1_000_000_000;

/// α rounded to the nearest `1 / ALPHA_SCALE`, so decimal inputs such as
/// 0.1 are taken at face value rather than as their binary expansion.
pub fn alpha_units(alpha: f64) -> u64 {
    (alpha * ALPHA_SCALE as f64).round() as u64
}

/// `ceil(alpha * ept_i)` in exact integer arithmetic on [`alpha_units`].
pub fn alpha_init(alpha: f64, ept_i: u32) -> u32 {
    debug_assert!(alpha > 0.0 && alpha <= 1.0);
    let product = alpha_units(alpha) as u128 * ept_i as u128;
    let scale = ALPHA_SCALE as u128;
    (product.div_ceil(scale)).min(u32::MAX as u128) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_init_examples() {
        assert_eq!(alpha_init(0.5, 8), 4);
        assert_eq!(alpha_init(0.25, 10), 3);
        assert_eq!(alpha_init(0.5, 10), 5);
        assert_eq!(alpha_init(1.0, 17), 17);
        assert_eq!(alpha_init(0.3, 10), 3);
        assert_eq!(alpha_init(0.1, 10), 1);
        assert_eq!(alpha_init(0.01, 100), 1);
        assert_eq!(alpha_init(0.05, 10), 1);
    }

    #[test]
    fn cam_matches_by_tag() {
        let mut cam = AlphaCam::new(2);
        cam.insert(JobTag(4), 2).unwrap();
        cam.insert(JobTag(9), 5).unwrap();
        assert_eq!(cam.insert(JobTag(1), 1), Err(EngineError::Capacity));
        assert_eq!(cam.decrement(JobTag(9)).unwrap(), 4);
        assert_eq!(cam.get(JobTag(4)), Some(2));
        assert_eq!(cam.decrement(JobTag(4)).unwrap(), 1);
        assert_eq!(cam.decrement(JobTag(4)).unwrap(), 0);
        assert_eq!(cam.remove(JobTag(4)).unwrap().remaining, 0);
        assert_eq!(cam.len(), 1);
        assert_eq!(cam.decrement(JobTag(4)), Err(EngineError::UnknownId(JobTag(4))));
    }

    #[test]
    fn alpha_init_never_below_one_cycle() {
        for ept in 1..300 {
            for alpha in [0.01, 0.1, 0.33, 0.5, 0.75, 1.0] {
                let c = alpha_init(alpha, ept);
                assert!(c >= 1);
                assert!(c as f64 >= alpha * ept as f64 - 1e-9);
                assert!((c as f64) < alpha * ept as f64 + 1.0 - 1e-9);
            }
        }
    }
}
