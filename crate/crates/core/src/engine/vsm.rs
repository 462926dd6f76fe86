//! Virtual Schedule Manager: a bounded shift register of job tags, head first.

use super::{EngineError, JobTag};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualSchedule {
    slots: Vec<JobTag>,
    capacity: usize,
}

impl VirtualSchedule {
    pub fn new(capacity: usize) -> Self {
        VirtualSchedule {
            slots: Vec::with_capacity(capacity),
            capacity,
        }
    }

    pub fn from_tags(tags: &[JobTag], capacity: usize) -> Result<Self, EngineError> {
        if tags.len() > capacity {
            return Err(EngineError::Capacity);
        }
        let mut vsm = VirtualSchedule::new(capacity);
        vsm.slots.extend_from_slice(tags);
        Ok(vsm)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() >= self.capacity
    }

    pub fn head(&self) -> Option<JobTag> {
        self.slots.first().copied()
    }

    pub fn tags(&self) -> &[JobTag] {
        &self.slots
    }

    /// Places `tag` at index `p`; occupants of `p..` move one slot deeper.
    /// `p == 0` is the full shift, anything else a partial one.
    pub fn insert(&mut self, tag: JobTag, p: usize) -> Result<(), EngineError> {
        if self.is_full() {
            return Err(EngineError::Capacity);
        }
        if p > self.slots.len() {
            return Err(EngineError::Invariant(format!(
                "insert index {p} beyond schedule length {}",
                self.slots.len()
            )));
        }
        self.slots.insert(p, tag);
        Ok(())
    }

    /// Removes the head; every remaining tag moves one slot toward it.
    pub fn pop(&mut self) -> Result<JobTag, EngineError> {
        if self.slots.is_empty() {
            return Err(EngineError::Empty);
        }
        Ok(self.slots.remove(0))
    }
}

pub fn vsm_insert(vsm: &mut VirtualSchedule, tag: JobTag, p: usize) -> Result<(), EngineError> {
    vsm.insert(tag, p)
}

pub fn vsm_pop(vsm: &mut VirtualSchedule) -> Result<JobTag, EngineError> {
    vsm.pop()
}
