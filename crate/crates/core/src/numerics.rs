//! Precision schemes, unsigned fixed-point values and saturating arithmetic.
//!
//! Every quantity the scheduler stores (weight, expected processing time,
//! WSPT ratio, release counter, cost) lives in one of five precision schemes.
//! The integer schemes hold values as unsigned fixed point that saturates at
//! both ends; the floating schemes round stored attributes to half or single
//! precision and carry sums in a wide accumulator.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericsError {
    #[error("relative error is undefined for a zero reference value")]
    UndefinedReference,
    #[error("fixed-point format mismatch: {left} vs {right}")]
    FormatMismatch { left: String, right: String },
    #[error("raw value {raw} does not fit in {total_bits} bits")]
    RawOutOfRange { raw: u64, total_bits: u32 },
    #[error("invalid numeric format: {0}")]
    InvalidFormat(String),
}

/// One of the five precision schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Int4,
    Int8,
    Mixed,
    Fp16,
    Fp32,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Int4,
        Scheme::Int8,
        Scheme::Mixed,
        Scheme::Fp16,
        Scheme::Fp32,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Int4 => "int4",
            Scheme::Int8 => "int8",
            Scheme::Mixed => "mixed",
            Scheme::Fp16 => "fp16",
            Scheme::Fp32 => "fp32",
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, Scheme::Fp16 | Scheme::Fp32)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = NumericsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| NumericsError::InvalidFormat(format!("unknown precision `{s}`")))
    }
}

/// The job attribute a value is stored as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Weight,
    Alpha,
    Ept,
    Wspt,
    Cost,
}

/// Field widths of a precision scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NumericFormat {
    pub scheme: Scheme,
    pub weight_bits: u32,
    pub alpha_bits: u32,
    pub ept_bits: u32,
    pub wspt_bits: u32,
    pub cost_bits: u32,
    /// Fractional bits of the WSPT encoding; 0 for the floating schemes.
    pub wspt_frac_bits: u32,
}

impl NumericFormat {
    pub fn new(scheme: Scheme) -> Self {
        let (weight_bits, alpha_bits, ept_bits, wspt_bits, cost_bits, wspt_frac_bits) = match scheme
        {
            Scheme::Int4 => (4, 4, 4, 4, 8, 2),
            Scheme::Int8 => (8, 8, 8, 8, 16, 3),
            Scheme::Mixed => (4, 4, 8, 8, 16, 3),
            Scheme::Fp16 => (16, 16, 16, 16, 16, 0),
            Scheme::Fp32 => (32, 32, 32, 32, 32, 0),
        };
        NumericFormat {
            scheme,
            weight_bits,
            alpha_bits,
            ept_bits,
            wspt_bits,
            cost_bits,
            wspt_frac_bits,
        }
    }

    pub fn int4() -> Self {
        Self::new(Scheme::Int4)
    }

    pub fn int8() -> Self {
        Self::new(Scheme::Int8)
    }

    pub fn mixed() -> Self {
        Self::new(Scheme::Mixed)
    }

    pub fn fp16() -> Self {
        Self::new(Scheme::Fp16)
    }

    pub fn fp32() -> Self {
        Self::new(Scheme::Fp32)
    }

    /// Overrides the WSPT binary point of an integer scheme.
    pub fn with_wspt_frac_bits(mut self, frac_bits: u32) -> Result<Self, NumericsError> {
        if self.is_float() {
            if frac_bits != 0 {
                return Err(NumericsError::InvalidFormat(format!(
                    "{} has no fixed-point WSPT split",
                    self.scheme
                )));
            }
            return Ok(self);
        }
        if frac_bits >= self.wspt_bits {
            return Err(NumericsError::InvalidFormat(format!(
                "wspt_frac_bits {frac_bits} must be below wspt width {}",
                self.wspt_bits
            )));
        }
        self.wspt_frac_bits = frac_bits;
        Ok(self)
    }

    pub fn is_float(&self) -> bool {
        self.scheme.is_float()
    }

    pub fn bits(&self, field: Field) -> u32 {
        match field {
            Field::Weight => self.weight_bits,
            Field::Alpha => self.alpha_bits,
            Field::Ept => self.ept_bits,
            Field::Wspt => self.wspt_bits,
            Field::Cost => self.cost_bits,
        }
    }

    pub fn frac_bits(&self, field: Field) -> u32 {
        match field {
            Field::Wspt if !self.is_float() => self.wspt_frac_bits,
            _ => 0,
        }
    }

    /// Format of the low-priority accumulator: cost width, WSPT binary point.
    pub fn sum_l_layout(&self) -> (u32, u32) {
        (self.wspt_frac_bits, self.cost_bits)
    }

    /// Largest representable cost.
    pub fn max_cost(&self) -> Scalar {
        match self.scheme {
            Scheme::Fp16 => Scalar::Float(half::f16::MAX.to_f64()),
            Scheme::Fp32 => Scalar::Float(f32::MAX as f64),
            _ => Scalar::Fixed(Fixed::max_value(0, self.cost_bits)),
        }
    }
}

/// Unsigned fixed-point value: `raw / 2^frac_bits`, `raw < 2^total_bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fixed {
    raw: u64,
    frac_bits: u32,
    total_bits: u32,
}

fn max_raw(total_bits: u32) -> u64 {
    if total_bits >= 64 {
        u64::MAX
    } else {
        (1u64 << total_bits) - 1
    }
}

impl Fixed {
    pub fn new(raw: u64, frac_bits: u32, total_bits: u32) -> Result<Self, NumericsError> {
        if raw > max_raw(total_bits) {
            return Err(NumericsError::RawOutOfRange { raw, total_bits });
        }
        Ok(Fixed {
            raw,
            frac_bits,
            total_bits,
        })
    }

    /// Builds a value, clamping `raw` to the largest representable one.
    pub fn saturating_new(raw: u64, frac_bits: u32, total_bits: u32) -> Self {
        Fixed {
            raw: raw.min(max_raw(total_bits)),
            frac_bits,
            total_bits,
        }
    }

    pub fn zero(frac_bits: u32, total_bits: u32) -> Self {
        Fixed {
            raw: 0,
            frac_bits,
            total_bits,
        }
    }

    pub fn max_value(frac_bits: u32, total_bits: u32) -> Self {
        Fixed {
            raw: max_raw(total_bits),
            frac_bits,
            total_bits,
        }
    }

    /// Nearest representable value (round half up), saturating at both ends.
    pub fn from_real(value: f64, frac_bits: u32, total_bits: u32) -> Self {
        let scaled = value * (frac_bits as f64).exp2();
        let raw = if scaled.is_nan() || scaled <= 0.0 {
            0
        } else {
            let rounded = (scaled + 0.5).floor();
            if rounded >= max_raw(total_bits) as f64 {
                max_raw(total_bits)
            } else {
                rounded as u64
            }
        };
        Fixed {
            raw,
            frac_bits,
            total_bits,
        }
    }

    pub fn raw(&self) -> u64 {
        self.raw
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn to_f64(&self) -> f64 {
        self.raw as f64 / (self.frac_bits as f64).exp2()
    }

    pub fn is_saturated(&self) -> bool {
        self.raw == max_raw(self.total_bits)
    }

    fn check_same(&self, other: &Fixed) -> Result<(), NumericsError> {
        if self.frac_bits != other.frac_bits || self.total_bits != other.total_bits {
            return Err(NumericsError::FormatMismatch {
                left: self.layout(),
                right: other.layout(),
            });
        }
        Ok(())
    }

    fn layout(&self) -> String {
        format!("UQ{}.{}", self.total_bits - self.frac_bits.min(self.total_bits), self.frac_bits)
    }

    /// Same binary point, different container width (saturating when narrowing).
    pub fn resize(&self, total_bits: u32) -> Fixed {
        Fixed::saturating_new(self.raw, self.frac_bits, total_bits)
    }

    pub fn saturating_add(&self, other: &Fixed) -> Result<Fixed, NumericsError> {
        self.check_same(other)?;
        Ok(Fixed::saturating_new(
            self.raw.saturating_add(other.raw),
            self.frac_bits,
            self.total_bits,
        ))
    }

    pub fn saturating_sub(&self, other: &Fixed) -> Result<Fixed, NumericsError> {
        self.check_same(other)?;
        Ok(Fixed {
            raw: self.raw.saturating_sub(other.raw),
            ..*self
        })
    }
}

/// `max(a - b, 0)` in raw space.
pub fn saturating_sub(a: Fixed, b: Fixed) -> Result<Fixed, NumericsError> {
    a.saturating_sub(&b)
}

/// A stored quantity: fixed point for the integer schemes, a rounded float
/// for the floating ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scalar {
    Fixed(Fixed),
    Float(f64),
}

impl Scalar {
    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Fixed(x) => x.to_f64(),
            Scalar::Float(x) => *x,
        }
    }

    pub fn as_fixed(&self) -> Option<Fixed> {
        match self {
            Scalar::Fixed(x) => Some(*x),
            Scalar::Float(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Fixed(x) => x.raw == 0,
            Scalar::Float(x) => *x == 0.0,
        }
    }

    /// A zero of the same representation.
    pub fn zero_like(&self) -> Scalar {
        match self {
            Scalar::Fixed(x) => Scalar::Fixed(Fixed::zero(x.frac_bits, x.total_bits)),
            Scalar::Float(_) => Scalar::Float(0.0),
        }
    }

    pub fn saturating_add(&self, other: &Scalar) -> Result<Scalar, NumericsError> {
        match (self, other) {
            (Scalar::Fixed(a), Scalar::Fixed(b)) => a.saturating_add(b).map(Scalar::Fixed),
            (Scalar::Float(a), Scalar::Float(b)) => Ok(Scalar::Float(a + b)),
            _ => Err(mixed_repr(self, other)),
        }
    }

    pub fn saturating_sub(&self, other: &Scalar) -> Result<Scalar, NumericsError> {
        match (self, other) {
            (Scalar::Fixed(a), Scalar::Fixed(b)) => a.saturating_sub(b).map(Scalar::Fixed),
            (Scalar::Float(a), Scalar::Float(b)) => Ok(Scalar::Float((a - b).max(0.0))),
            _ => Err(mixed_repr(self, other)),
        }
    }

    /// Total order within one representation; `None` across representations.
    pub fn try_cmp(&self, other: &Scalar) -> Option<Ordering> {
        match (self, other) {
            (Scalar::Fixed(a), Scalar::Fixed(b)) if a.frac_bits == b.frac_bits => {
                Some(a.raw.cmp(&b.raw))
            }
            (Scalar::Float(a), Scalar::Float(b)) => a.partial_cmp(b),
            _ => None,
        }
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.try_cmp(other)
    }
}

fn mixed_repr(a: &Scalar, b: &Scalar) -> NumericsError {
    NumericsError::FormatMismatch {
        left: format!("{a:?}"),
        right: format!("{b:?}"),
    }
}

fn round_float(value: f64, scheme: Scheme) -> f64 {
    match scheme {
        Scheme::Fp16 => half::f16::from_f64(value.min(half::f16::MAX.to_f64())).to_f64(),
        _ => (value.min(f32::MAX as f64) as f32) as f64,
    }
}

/// Stores `value` (nonnegative) as the given field of `format`.
///
/// Integer schemes round half up to the field's binary point and saturate at
/// the field maximum. Floating schemes round to the scheme's precision.
pub fn quantize(value: f64, format: &NumericFormat, field: Field) -> Scalar {
    debug_assert!(value >= 0.0 || value.is_nan(), "quantize expects a nonnegative value, got {value}");
    let value = value.max(0.0);
    if format.is_float() {
        Scalar::Float(round_float(value, format.scheme))
    } else {
        Scalar::Fixed(Fixed::from_real(
            value,
            format.frac_bits(field),
            format.bits(field),
        ))
    }
}

/// `100 * |quantized - reference| / reference`.
pub fn relative_error(quantized: f64, reference: f64) -> Result<f64, NumericsError> {
    if reference == 0.0 {
        return Err(NumericsError::UndefinedReference);
    }
    Ok(100.0 * (quantized - reference).abs() / reference.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn widths_per_scheme() {
        let widths = |f: NumericFormat| {
            (f.weight_bits, f.alpha_bits, f.ept_bits, f.wspt_bits, f.cost_bits)
        };
        assert_eq!(widths(NumericFormat::int4()), (4, 4, 4, 4, 8));
        assert_eq!(widths(NumericFormat::int8()), (8, 8, 8, 8, 16));
        assert_eq!(widths(NumericFormat::mixed()), (4, 4, 8, 8, 16));
        assert_eq!(widths(NumericFormat::fp16()), (16, 16, 16, 16, 16));
        assert_eq!(widths(NumericFormat::fp32()), (32, 32, 32, 32, 32));
        assert_eq!(NumericFormat::int8().wspt_frac_bits, 3);
        assert_eq!(NumericFormat::int4().wspt_frac_bits, 2);
        assert_eq!(NumericFormat::mixed().wspt_frac_bits, 3);
        assert_eq!(NumericFormat::fp32().wspt_frac_bits, 0);
    }

    #[test]
    fn frac_split_must_leave_an_integer_bit() {
        assert!(NumericFormat::int8().with_wspt_frac_bits(8).is_err());
        assert_eq!(
            NumericFormat::int8().with_wspt_frac_bits(4).unwrap().wspt_frac_bits,
            4
        );
        assert!(NumericFormat::fp32().with_wspt_frac_bits(1).is_err());
    }

    #[test]
    fn quantize_examples() {
        let q = quantize(7.0, &NumericFormat::int8(), Field::Weight);
        assert_eq!(q.as_fixed().unwrap().raw(), 7);
        assert_eq!(q.to_f64(), 7.0);

        let q = quantize(0.5, &NumericFormat::int8(), Field::Wspt);
        assert_eq!(q.as_fixed().unwrap().raw(), 4);
        assert_eq!(q.to_f64(), 0.5);

        let q = quantize(20.0, &NumericFormat::int4(), Field::Weight);
        assert_eq!(q.as_fixed().unwrap().raw(), 15);
        assert_eq!(q.to_f64(), 15.0);
    }

    #[test]
    fn quantize_rounds_half_up() {
        // 0.0625 * 8 = 0.5 -> 1
        let q = quantize(0.0625, &NumericFormat::int8(), Field::Wspt);
        assert_eq!(q.as_fixed().unwrap().raw(), 1);
        let q = quantize(0.06, &NumericFormat::int8(), Field::Wspt);
        assert_eq!(q.as_fixed().unwrap().raw(), 0);
    }

    #[test]
    fn float_schemes_round_to_precision() {
        let q = quantize(0.1, &NumericFormat::fp32(), Field::Wspt);
        assert_eq!(q.to_f64(), 0.1f32 as f64);
        let q = quantize(0.1, &NumericFormat::fp16(), Field::Wspt);
        assert_eq!(q.to_f64(), half::f16::from_f64(0.1).to_f64());
        let q = quantize(1e6, &NumericFormat::fp16(), Field::Cost);
        assert_eq!(q.to_f64(), 65504.0);
    }

    #[test]
    fn relative_error_examples() {
        assert_eq!(relative_error(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(relative_error(0.375, 0.5).unwrap(), 25.0);
        assert_eq!(
            relative_error(1.0, 0.0),
            Err(NumericsError::UndefinedReference)
        );
    }

    #[test]
    fn saturating_sub_examples() {
        let f = |raw| Fixed::new(raw, 3, 16).unwrap();
        assert_eq!(saturating_sub(f(8), f(3)).unwrap().raw(), 5);
        assert_eq!(saturating_sub(f(2), f(5)).unwrap().raw(), 0);
        assert_eq!(saturating_sub(f(5), f(5)).unwrap().raw(), 0);
        let other = Fixed::new(1, 0, 16).unwrap();
        assert!(matches!(
            saturating_sub(f(5), other),
            Err(NumericsError::FormatMismatch { .. })
        ));
    }

    #[test]
    fn fixed_rejects_out_of_range_raw() {
        assert!(Fixed::new(16, 0, 4).is_err());
        assert!(Fixed::new(15, 0, 4).is_ok());
        assert_eq!(Fixed::saturating_new(300, 0, 8).raw(), 255);
    }

    #[test]
    fn addition_saturates_at_width() {
        let a = Fixed::new(200, 0, 8).unwrap();
        let b = Fixed::new(100, 0, 8).unwrap();
        let sum = a.saturating_add(&b).unwrap();
        assert_eq!(sum.raw(), 255);
        assert!(sum.is_saturated());
    }

    #[test]
    fn scheme_parses_from_config_names() {
        assert_eq!("int8".parse::<Scheme>().unwrap(), Scheme::Int8);
        assert_eq!("FP32".parse::<Scheme>().unwrap(), Scheme::Fp32);
        assert!("int16".parse::<Scheme>().is_err());
    }

    fn int_scheme() -> impl Strategy<Value = NumericFormat> {
        prop_oneof![
            Just(NumericFormat::int4()),
            Just(NumericFormat::int8()),
            Just(NumericFormat::mixed()),
        ]
    }

    fn any_field() -> impl Strategy<Value = Field> {
        prop_oneof![
            Just(Field::Weight),
            Just(Field::Alpha),
            Just(Field::Ept),
            Just(Field::Wspt),
            Just(Field::Cost),
        ]
    }

    proptest! {
        #[test]
        fn representable_values_round_trip(fmt in int_scheme(), field in any_field(), raw in 0u64..1 << 16) {
            let bits = fmt.bits(field);
            let raw = raw & max_raw(bits);
            let value = Fixed::new(raw, fmt.frac_bits(field), bits).unwrap().to_f64();
            let again = quantize(value, &fmt, field).as_fixed().unwrap();
            prop_assert_eq!(again.raw(), raw);
        }

        #[test]
        fn quantize_is_monotone(fmt in int_scheme(), field in any_field(), a in 0.0f64..400.0, b in 0.0f64..400.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let qlo = quantize(lo, &fmt, field).as_fixed().unwrap();
            let qhi = quantize(hi, &fmt, field).as_fixed().unwrap();
            prop_assert!(qlo.raw() <= qhi.raw());
            prop_assert!(qhi.raw() <= max_raw(fmt.bits(field)));
        }

        #[test]
        fn fp32_is_identity_on_generator_values(weight in 1u32..=255, ept in 10u32..=2000) {
            let fmt = NumericFormat::fp32();
            prop_assert_eq!(quantize(weight as f64, &fmt, Field::Weight).to_f64(), weight as f64);
            prop_assert_eq!(quantize(ept as f64, &fmt, Field::Ept).to_f64(), ept as f64);
        }
    }
}
