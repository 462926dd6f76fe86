//! Cost Calculator and Cost Comparator.

use crate::domain;
use crate::numerics::{quantize, Field, Fixed, NumericFormat, Scalar};

use super::jmm::individual_job_cost;
use super::{EngineError, JobTag, MachineSchedulerState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostOutcome {
    /// Saturated maximum when the machine is full.
    pub cost: Scalar,
    /// Number of resident jobs ranking at or above the candidate.
    pub insert_index: usize,
    pub wspt: Scalar,
    /// Set when the virtual schedule has no free slot.
    pub full: bool,
}

/// Pairwise reduction in `ceil(log2 n)` stages, saturating at every adder.
pub fn tree_sum(terms: &mut [Scalar]) -> Option<Scalar> {
    let n = terms.len();
    if n == 0 {
        return None;
    }
    let mut stride = 1;
    while stride < n {
        let mut i = 0;
        while i + stride < n {
            terms[i] = terms[i]
                .saturating_add(&terms[i + stride])
                .expect("tree adder inputs share one layout");
            i += 2 * stride;
        }
        stride *= 2;
    }
    Some(terms[0])
}

fn round_shift(value: u128, shift: u32) -> u128 {
    if shift == 0 {
        value
    } else {
        (value + (1u128 << (shift - 1))) >> shift
    }
}

/// Combines the two tree-adder outputs with the candidate's weight and EPT:
/// `weight * (ept + sum_h_total) + ept * sum_l_total`.
fn combine(
    weight: &Scalar,
    ept: &Scalar,
    h_total: &Scalar,
    l_total: &Scalar,
    format: &NumericFormat,
) -> Scalar {
    match (weight, ept, h_total, l_total) {
        (Scalar::Fixed(w), Scalar::Fixed(e), Scalar::Fixed(h), Scalar::Fixed(l)) => {
            let max = Fixed::max_value(0, format.cost_bits).raw() as u128;
            let delay = (e.raw() as u128 + h.raw() as u128).min(max);
            let high = (w.raw() as u128 * delay).min(max);
            let low = round_shift(e.raw() as u128 * l.raw() as u128, l.frac_bits()).min(max);
            let cost = (high + low).min(max);
            Scalar::Fixed(Fixed::saturating_new(cost as u64, 0, format.cost_bits))
        }
        _ => Scalar::Float(
            weight.to_f64() * (ept.to_f64() + h_total.to_f64()) + ept.to_f64() * l_total.to_f64(),
        ),
    }
}

/// Cost of placing a job with `weight` and `ept_i` on `machine`.
///
/// Every JMM slot runs through the IJCC in parallel; the high and low terms
/// are reduced by two independent tree adders, so the result does not depend
/// on slot order.
pub fn compute_cost(
    machine: &MachineSchedulerState,
    weight: u32,
    ept_i: u32,
    format: &NumericFormat,
) -> CostOutcome {
    let new_wspt = domain::wspt(weight, ept_i, format);
    if machine.vsm().is_full() {
        return CostOutcome {
            cost: format.max_cost(),
            insert_index: machine.vsm().len(),
            wspt: new_wspt,
            full: true,
        };
    }

    let jmm = machine.jmm();
    let mut h_terms = Vec::with_capacity(jmm.len());
    let mut l_terms = Vec::with_capacity(jmm.len());
    let mut insert_index = 0;
    for entry in jmm {
        // cost evaluation never writes back, so no entry is treated as head
        let out = individual_job_cost(entry, &new_wspt, true, JobTag::INVALID);
        insert_index += usize::from(out.cmp_bit);
        h_terms.push(widen_to_cost(&out.h_term, format));
        l_terms.push(out.l_term);
    }
    let zero_h = widen_to_cost(&quantize(0.0, format, Field::Ept), format);
    let zero_l = super::jmm::sum_l_scalar(0.0, format);
    let h_total = tree_sum(&mut h_terms).unwrap_or(zero_h);
    let l_total = tree_sum(&mut l_terms).unwrap_or(zero_l);

    let weight_q = quantize(weight as f64, format, Field::Weight);
    let ept_q = quantize(ept_i as f64, format, Field::Ept);
    CostOutcome {
        cost: combine(&weight_q, &ept_q, &h_total, &l_total, format),
        insert_index,
        wspt: new_wspt,
        full: false,
    }
}

fn widen_to_cost(x: &Scalar, format: &NumericFormat) -> Scalar {
    match x {
        Scalar::Fixed(f) => Scalar::Fixed(f.resize(format.cost_bits)),
        Scalar::Float(_) => *x,
    }
}

/// Index of the cheapest machine with a free slot; the lowest index wins ties.
pub fn select_machine(costs: &[CostOutcome]) -> Result<usize, EngineError> {
    let mut best: Option<(usize, &Scalar)> = None;
    for (i, outcome) in costs.iter().enumerate() {
        if outcome.full {
            continue;
        }
        match best {
            Some((_, cost)) if outcome.cost >= *cost => {}
            _ => best = Some((i, &outcome.cost)),
        }
    }
    best.map(|(i, _)| i).ok_or(EngineError::NoCapacity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::jmm::{sum_l_scalar, VsEntry};

    fn outcome(cost: f64, full: bool) -> CostOutcome {
        CostOutcome {
            cost: Scalar::Float(cost),
            insert_index: 0,
            wspt: Scalar::Float(0.0),
            full,
        }
    }

    #[test]
    fn comparator_picks_minimum() {
        let costs: Vec<_> = [42.0, 20.0, 99.0, 100.0, 57.0]
            .iter()
            .map(|&c| outcome(c, false))
            .collect();
        assert_eq!(select_machine(&costs).unwrap(), 1);
    }

    #[test]
    fn comparator_breaks_ties_low() {
        let costs: Vec<_> = [20.0, 20.0, 99.0].iter().map(|&c| outcome(c, false)).collect();
        assert_eq!(select_machine(&costs).unwrap(), 0);
    }

    #[test]
    fn comparator_reports_no_capacity() {
        let max = f32::MAX as f64;
        assert_eq!(
            select_machine(&[outcome(max, true), outcome(max, true)]),
            Err(EngineError::NoCapacity)
        );
        assert_eq!(select_machine(&[outcome(max, true), outcome(5.0, false)]), Ok(1));
    }

    #[test]
    fn tree_sum_saturates() {
        let mut terms: Vec<_> = (0..5)
            .map(|_| Scalar::Fixed(Fixed::new(100, 0, 8).unwrap()))
            .collect();
        assert_eq!(tree_sum(&mut terms).unwrap().to_f64(), 255.0);
        let mut terms: Vec<_> = (1..=7).map(|i| Scalar::Float(i as f64)).collect();
        assert_eq!(tree_sum(&mut terms).unwrap().to_f64(), 28.0);
        assert_eq!(tree_sum(&mut []), None);
    }

    #[test]
    fn empty_machine_cost_is_weight_times_ept() {
        for fmt in [NumericFormat::int8(), NumericFormat::fp32()] {
            let m = MachineSchedulerState::new(4, &fmt);
            let out = compute_cost(&m, 2, 10, &fmt);
            assert_eq!(out.cost.to_f64(), 20.0);
            assert_eq!(out.insert_index, 0);
            assert!(!out.full);
        }
        let fmt = NumericFormat::fp32();
        let m = MachineSchedulerState::new(4, &fmt);
        assert_eq!(compute_cost(&m, 2, 10, &fmt).wspt.to_f64(), 0.2f32 as f64);
    }

    /// K1{W=4, ept=8, two cycles of virtual work}, K2{W=1, ept=10, untouched};
    /// candidate {W=2, ept=10}: 2*(10+6) + 10*1.0 = 42 at index 1.
    fn example_machine(fmt: &NumericFormat) -> MachineSchedulerState {
        let mut m = MachineSchedulerState::new(4, fmt);
        let mut k1 = VsEntry::new(JobTag(1), 4, 8, fmt);
        k1.sum_h = quantize(6.0, fmt, Field::Ept);
        k1.sum_l = sum_l_scalar(3.0, fmt);
        let k2 = VsEntry::new(JobTag(2), 1, 10, fmt);
        m.install(k1, 0, 4).unwrap();
        m.install(k2, 1, 10).unwrap();
        m
    }

    #[test]
    fn two_resident_jobs_split_high_and_low() {
        let fmt = NumericFormat::fp32();
        let m = example_machine(&fmt);
        let out = compute_cost(&m, 2, 10, &fmt);
        assert_eq!(out.cost.to_f64(), 42.0);
        assert_eq!(out.insert_index, 1);
    }

    #[test]
    fn int8_reproduces_exact_example() {
        // K2's wspt (0.1) rounds to 0.125 in UQ5.3 and the candidate's 0.2
        // rounds to 0.25, so the split is unchanged and every operand is exact.
        let fmt = NumericFormat::int8();
        let m = example_machine(&fmt);
        let out = compute_cost(&m, 2, 10, &fmt);
        assert_eq!(out.cost.as_fixed().unwrap().raw(), 42);
        assert_eq!(out.insert_index, 1);
    }

    #[test]
    fn full_machine_returns_sentinel() {
        let fmt = NumericFormat::int8();
        let mut m = MachineSchedulerState::new(2, &fmt);
        m.install(VsEntry::new(JobTag(1), 3, 20, &fmt), 0, 10).unwrap();
        m.install(VsEntry::new(JobTag(2), 3, 20, &fmt), 1, 10).unwrap();
        let out = compute_cost(&m, 1, 10, &fmt);
        assert!(out.full);
        assert_eq!(out.cost, fmt.max_cost());
    }

    #[test]
    fn int8_cost_saturates_at_sixteen_bits() {
        let fmt = NumericFormat::int8();
        let mut m = MachineSchedulerState::new(8, &fmt);
        for t in 1..=8 {
            m.install(VsEntry::new(JobTag(t), 255, 250, &fmt), (t - 1) as usize, 125)
                .unwrap();
        }
        let out = compute_cost(&m, 200, 250, &fmt);
        assert_eq!(out.cost.as_fixed().unwrap().raw(), u16::MAX as u64);
    }
}
