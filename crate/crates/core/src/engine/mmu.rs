//! Memory Management Unit: free-address FIFO plus a tag-to-address LUT.

use std::collections::{HashMap, VecDeque};

use super::jmm::VsEntry;
use super::{EngineError, JobTag};

#[derive(Debug, Clone)]
pub struct Mmu {
    free: VecDeque<usize>,
    lut: HashMap<JobTag, usize>,
}

impl Mmu {
    /// All `slots` addresses start free, lowest first.
    pub fn new(slots: usize) -> Self {
        Mmu {
            free: (0..slots).collect(),
            lut: HashMap::with_capacity(slots),
        }
    }

    /// Custom free queue, for exercising allocation order.
    pub fn with_free(free: impl IntoIterator<Item = usize>) -> Self {
        Mmu {
            free: free.into_iter().collect(),
            lut: HashMap::new(),
        }
    }

    /// Pops the next free address and maps `tag` to it.
    pub fn alloc(&mut self, tag: JobTag) -> Result<usize, EngineError> {
        let addr = self.free.pop_front().ok_or(EngineError::Capacity)?;
        self.lut.insert(tag, addr);
        Ok(addr)
    }

    /// Drops `tag`, invalidates its JMM slot and queues the address for reuse.
    pub fn free(&mut self, jmm: &mut [VsEntry], tag: JobTag) -> Result<usize, EngineError> {
        let addr = self.lut.remove(&tag).ok_or(EngineError::UnknownId(tag))?;
        jmm[addr].invalidate();
        self.free.push_back(addr);
        Ok(addr)
    }

    pub fn lookup(&self, tag: JobTag) -> Option<usize> {
        self.lut.get(&tag).copied()
    }

    pub fn free_slots(&self) -> usize {
        self.free.len()
    }

    pub fn free_queue(&self) -> impl Iterator<Item = usize> + '_ {
        self.free.iter().copied()
    }

    pub fn mapped(&self) -> usize {
        self.lut.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::NumericFormat;

    #[test]
    fn alloc_pops_queue_front() {
        let mut mmu = Mmu::with_free([2, 5]);
        assert_eq!(mmu.alloc(JobTag(1)).unwrap(), 2);
        assert_eq!(mmu.free_queue().collect::<Vec<_>>(), vec![5]);
        assert_eq!(mmu.lookup(JobTag(1)), Some(2));
    }

    #[test]
    fn free_requeues_address_and_clears_slot() {
        let fmt = NumericFormat::int8();
        let mut jmm = vec![VsEntry::empty(&fmt); 6];
        let mut mmu = Mmu::with_free([4, 1]);
        let addr = mmu.alloc(JobTag(9)).unwrap();
        assert_eq!(addr, 4);
        jmm[addr] = VsEntry::new(JobTag(9), 3, 12, &fmt);
        assert_eq!(mmu.free(&mut jmm, JobTag(9)).unwrap(), 4);
        assert_eq!(mmu.free_queue().collect::<Vec<_>>(), vec![1, 4]);
        assert_eq!(mmu.lookup(JobTag(9)), None);
        assert!(!jmm[4].is_valid());
    }

    #[test]
    fn errors() {
        let mut mmu = Mmu::with_free([]);
        assert_eq!(mmu.alloc(JobTag(1)), Err(EngineError::Capacity));
        let mut jmm = vec![];
        assert_eq!(
            mmu.free(&mut jmm, JobTag(4)),
            Err(EngineError::UnknownId(JobTag(4)))
        );
    }
}
