//! The 32-bit reference counter and wrap-aware schedule comparisons.
//!
//! Every peripheral shares one free-running counter that increments once per
//! CPU cycle and wraps mod 2^32. Schedule words (t0, arm times) are compared
//! against it inside a +/-2^31 window, so "before" and "after" stay well
//! defined across the wrap.

/// Signed distance from `b` to `a` inside the +/-2^31 window.
pub fn wrap_delta(a: u32, b: u32) -> i32 {
    a.wrapping_sub(b) as i32
}

/// True when `a` is earlier than `b` in wrap-aware order.
pub fn wrap_lt(a: u32, b: u32) -> bool {
    wrap_delta(a, b) < 0
}

/// Unsigned modular distance between two 32-bit words (shortest way round).
pub fn wrap_dist(a: u32, b: u32) -> u32 {
    let d = a.wrapping_sub(b);
    d.min(d.wrapping_neg())
}

/// Resolves a 32-bit schedule word to an absolute cycle near `now64`.
///
/// `now64` is the monotonic simulation cycle whose low 32 bits equal the
/// current reference counter value. Words more than 2^31 away alias; that is
/// inherent to a 32-bit schedule space.
pub fn resolve_cycle(now64: u64, word: u32) -> i64 {
    now64 as i64 + wrap_delta(word, now64 as u32) as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons_survive_the_wrap() {
        assert!(wrap_lt(0xFFFF_FFF0, 0x10)); // just before the wrap vs just after
        assert!(!wrap_lt(0x10, 0xFFFF_FFF0));
        assert_eq!(wrap_delta(0x10, 0xFFFF_FFF0), 0x20);
        assert_eq!(wrap_dist(0xFFFF_FFFF, 0x0), 1);
        assert_eq!(wrap_dist(0, 0x8000_0000), 0x8000_0000);
    }

    #[test]
    fn resolve_cycle_tracks_the_wrap() {
        assert_eq!(resolve_cycle(100, 130), 130);
        assert_eq!(resolve_cycle(100, 90), 90);
        // Counter about to wrap: a small word means "just after the wrap".
        let now = 0x1_FFFF_FFF0u64;
        assert_eq!(resolve_cycle(now, 0x10), 0x2_0000_0010);
        assert_eq!(resolve_cycle(now, 0xFFFF_FFE0), 0x1_FFFF_FFE0);
    }
}
