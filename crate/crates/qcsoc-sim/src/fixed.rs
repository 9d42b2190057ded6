//! Q1.15 fixed-point helpers shared by the RF datapath.
//!
//! The datapath convention: full scale is +/-32767, products are rounded to
//! nearest (ties to even) and saturated back into 16 bits. Accumulators are
//! wider and use plain arithmetic shifts where the hardware would.

/// Largest positive Q1.15 value, used as "unity" gain.
pub const Q15_MAX: i16 = 0x7FFF;

/// Shifts `v` right by `shift`, rounding to nearest with ties to even.
pub fn rne_shift(v: i64, shift: u32) -> i64 {
    debug_assert!(shift > 0 && shift < 63);
    let floor = v >> shift;
    let rem = v - (floor << shift);
    let half = 1i64 << (shift - 1);
    if rem > half {
        floor + 1
    } else if rem == half {
        floor + (floor & 1)
    } else {
        floor
    }
}

/// Saturates a wide value into the Q1.15 range.
pub fn sat_i16(v: i64) -> i16 {
    v.clamp(i16::MIN as i64, i16::MAX as i64) as i16
}

/// Saturates a wide value into 32 bits.
pub fn sat_i32(v: i64) -> i32 {
    v.clamp(i32::MIN as i64, i32::MAX as i64) as i32
}

/// Q1.15 multiply: round to nearest-even, then saturate.
///
/// The only product that can overflow i16 after the shift is
/// (-32768) * (-32768); it saturates to +32767.
pub fn q15_mul(a: i16, b: i16) -> i16 {
    let p = a as i64 * b as i64;
    sat_i16(rne_shift(p, 15))
}
