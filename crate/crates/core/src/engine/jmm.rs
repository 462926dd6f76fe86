//! Job Metadata Memory entries and the Individual Job Cost Calculator.

use crate::domain;
use crate::numerics::{quantize, Field, Fixed, NumericFormat, Scalar};

use super::JobTag;

/// One JMM register: the stored attributes of a job in a virtual schedule
/// and its two running cost contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VsEntry {
    pub tag: JobTag,
    /// Remaining high-priority contribution, `ept - n`.
    pub sum_h: Scalar,
    /// Remaining low-priority contribution, `weight - n * wspt`.
    pub sum_l: Scalar,
    pub wspt: Scalar,
    pub weight: Scalar,
    pub ept: Scalar,
}

impl VsEntry {
    pub fn empty(format: &NumericFormat) -> Self {
        let zero = |field| quantize(0.0, format, field);
        VsEntry {
            tag: JobTag::INVALID,
            sum_h: zero(Field::Ept),
            sum_l: sum_l_scalar(0.0, format),
            wspt: zero(Field::Wspt),
            weight: zero(Field::Weight),
            ept: zero(Field::Ept),
        }
    }

    pub fn new(tag: JobTag, weight: u32, ept_i: u32, format: &NumericFormat) -> Self {
        Self::with_wspt(tag, weight, ept_i, domain::wspt(weight, ept_i, format), format)
    }

    /// Fresh entry with a precomputed WSPT; both sums start at their maximum.
    pub fn with_wspt(
        tag: JobTag,
        weight: u32,
        ept_i: u32,
        wspt: Scalar,
        format: &NumericFormat,
    ) -> Self {
        let weight = quantize(weight as f64, format, Field::Weight);
        let ept = quantize(ept_i as f64, format, Field::Ept);
        VsEntry {
            tag,
            sum_h: ept,
            sum_l: sum_l_scalar(weight.to_f64(), format),
            wspt,
            weight,
            ept,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.tag.is_valid()
    }

    pub fn invalidate(&mut self) {
        self.tag = JobTag::INVALID;
    }
}

/// `value` in the low-priority accumulator layout.
pub fn sum_l_scalar(value: f64, format: &NumericFormat) -> Scalar {
    if format.is_float() {
        Scalar::Float(value)
    } else {
        let (frac, total) = format.sum_l_layout();
        Scalar::Fixed(Fixed::from_real(value, frac, total))
    }
}

fn one_like(x: &Scalar) -> Scalar {
    match x {
        Scalar::Fixed(f) => Scalar::Fixed(Fixed::saturating_new(1, f.frac_bits(), f.total_bits())),
        Scalar::Float(_) => Scalar::Float(1.0),
    }
}

/// The WSPT re-expressed in the accumulator layout of `sum_l`.
fn wspt_as_sum_l(wspt: &Scalar, sum_l: &Scalar) -> Scalar {
    match (wspt, sum_l) {
        (Scalar::Fixed(w), Scalar::Fixed(s)) => Scalar::Fixed(w.resize(s.total_bits())),
        _ => *wspt,
    }
}

/// Per-entry output of the IJCC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IjccOutput {
    pub h_term: Scalar,
    pub l_term: Scalar,
    /// Set when the entry ranks at or above the new job.
    pub cmp_bit: bool,
    pub updated: VsEntry,
}

/// Classifies `entry` against a candidate job and applies one cycle of
/// virtual work when `entry` is the head of its schedule.
///
/// Empty slots and invalid candidates contribute nothing; the term the
/// comparison does not select is masked to zero.
pub fn individual_job_cost(
    entry: &VsEntry,
    new_wspt: &Scalar,
    new_id_valid: bool,
    head: JobTag,
) -> IjccOutput {
    let occupied = entry.is_valid();
    let cmp_bit = occupied && entry.wspt >= *new_wspt;
    let contributes = occupied && new_id_valid;
    let h_term = if contributes && cmp_bit {
        entry.sum_h
    } else {
        entry.sum_h.zero_like()
    };
    let l_term = if contributes && !cmp_bit {
        entry.sum_l
    } else {
        entry.sum_l.zero_like()
    };

    let mut updated = *entry;
    if occupied && entry.tag == head {
        updated.sum_h = entry
            .sum_h
            .saturating_sub(&one_like(&entry.sum_h))
            .expect("sum_h layout is fixed per format");
        updated.sum_l = entry
            .sum_l
            .saturating_sub(&wspt_as_sum_l(&entry.wspt, &entry.sum_l))
            .expect("wspt resized to sum_l layout");
    }
    IjccOutput {
        h_term,
        l_term,
        cmp_bit,
        updated,
    }
}
