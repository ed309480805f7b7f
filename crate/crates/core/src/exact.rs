//! Order-independent exact accumulation of `f64` values.
//!
//! Histogram label statistics must come out identical whether they are
//! accumulated on a single machine or merged from per-worker partial
//! histograms, for any worker count and any partition. Plain `f64` addition is
//! not associative, so partial sums would drift in the last bits depending on
//! how samples are grouped. [`ExactSum`] sidesteps this by keeping the running
//! sum as a list of non-overlapping `f64` components whose mathematical sum is
//! exact (Shewchuk-style expansion arithmetic). Adding values and merging two
//! sums are exact operations, so the represented real number depends only on
//! the multiset of inputs. [`ExactSum::value`] rounds that exact number to the
//! nearest `f64` through a wide fixed-point accumulator, which makes the
//! rounded result a pure function of the exact value as well.

/// Exact running sum of `f64` values.
///
/// `add` and `merge` never lose a bit; `value()` returns the correctly
/// rounded `f64` of the exact sum. Inputs must be finite.
#[derive(Clone, Debug, Default)]
pub struct ExactSum {
    // Non-overlapping components in increasing magnitude; empty means zero.
    parts: Vec<f64>,
}

/// Error-free transformation: returns (fl(a+b), exact error).
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bv = s - a;
    let av = s - bv;
    (s, (a - av) + (b - bv))
}

const COMPRESS_AT: usize = 24;

impl ExactSum {
    pub fn new() -> Self {
        Self { parts: Vec::new() }
    }

    pub fn from_value(x: f64) -> Self {
        let mut s = Self::new();
        s.add(x);
        s
    }

    pub fn is_zero(&self) -> bool {
        self.parts.is_empty()
    }

    /// Adds one value to the sum. Exact.
    pub fn add(&mut self, x: f64) {
        debug_assert!(x.is_finite(), "ExactSum requires finite inputs");
        self.grow(x);
        if self.parts.len() > COMPRESS_AT {
            self.compress();
        }
    }

    /// Adds another exact sum to this one. Exact.
    pub fn merge(&mut self, other: &ExactSum) {
        self.parts.reserve(other.parts.len());
        for &c in &other.parts {
            self.grow(c);
        }
        if self.parts.len() > COMPRESS_AT {
            self.compress();
        }
    }

    // In-place grow-expansion. Every two_sum step preserves the exact total,
    // so the invariant "sum(parts) + q == old sum + x" holds throughout; the
    // write cursor never passes the read cursor because zero errors are
    // dropped.
    fn grow(&mut self, x: f64) {
        if x == 0.0 {
            return;
        }
        let mut q = x;
        let mut w = 0;
        for r in 0..self.parts.len() {
            let (s, err) = two_sum(q, self.parts[r]);
            q = s;
            if err != 0.0 {
                self.parts[w] = err;
                w += 1;
            }
        }
        self.parts.truncate(w);
        if q != 0.0 {
            self.parts.push(q);
        }
    }

    // Rebuilds the expansion from its own components in increasing magnitude,
    // which collapses cancellation dust back to a short form. Exact.
    fn compress(&mut self) {
        let mut vals = std::mem::take(&mut self.parts);
        vals.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
        for v in vals {
            self.grow(v);
        }
    }

    /// The exact sum rounded to the nearest `f64` (ties to even).
    pub fn value(&self) -> f64 {
        let mut acc = Superacc::new();
        for &c in &self.parts {
            acc.deposit(c);
        }
        acc.round()
    }
}

impl PartialEq for ExactSum {
    fn eq(&self, other: &Self) -> bool {
        let mut diff = self.clone();
        for &c in &other.parts {
            diff.grow(-c);
        }
        diff.parts.iter().all(|&c| c == 0.0)
    }
}

// ---------------------------------------------------------------------------
// Wide fixed-point accumulator used only to round an exact expansion.
// ---------------------------------------------------------------------------

const CHUNK_BITS: u32 = 32;
// Least representable bit: below the least significant bit of any finite f64
// (subnormals bottom out at 2^-1074). Multiple of 32.
const EXP_MIN: i32 = -1120;
// 70 chunks span bits up to 2^(32*70 - 1120) = 2^1120 > 2^1024.
const NCHUNKS: usize = 70;

struct Superacc {
    chunks: [i64; NCHUNKS],
}

impl Superacc {
    fn new() -> Self {
        Self { chunks: [0; NCHUNKS] }
    }

    fn deposit(&mut self, x: f64) {
        if x == 0.0 {
            return;
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        debug_assert!(biased != 0x7ff, "non-finite deposit");
        let (mant, exp) = if biased == 0 {
            (frac, 1 - 1075)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        if mant == 0 {
            return;
        }
        let pos = (exp - EXP_MIN) as u32;
        let idx = (pos / CHUNK_BITS) as usize;
        let shift = pos % CHUNK_BITS;
        // 53 mantissa bits shifted by < 32: spans at most three 32-bit chunks.
        let wide = (mant as u128) << shift;
        let pieces = [
            (wide & 0xffff_ffff) as i64,
            ((wide >> 32) & 0xffff_ffff) as i64,
            (wide >> 64) as i64,
        ];
        for (off, &p) in pieces.iter().enumerate() {
            if negative {
                self.chunks[idx + off] -= p;
            } else {
                self.chunks[idx + off] += p;
            }
        }
    }

    // Normalizes chunks to digits in [0, 2^32); the carry out of the top chunk
    // is negative exactly when the represented value is negative.
    fn normalize(chunks: &mut [i64; NCHUNKS]) -> i64 {
        let mut carry: i64 = 0;
        for c in chunks.iter_mut() {
            let t = *c + carry;
            let digit = t.rem_euclid(1 << CHUNK_BITS);
            carry = (t - digit) >> CHUNK_BITS;
            *c = digit;
        }
        carry
    }

    fn round(mut self) -> f64 {
        let mut carry = Self::normalize(&mut self.chunks);
        let negative = carry < 0;
        if negative {
            for c in self.chunks.iter_mut() {
                *c = -*c;
            }
            carry = Self::normalize(&mut self.chunks);
        }
        debug_assert_eq!(carry, 0, "accumulator range exceeded");

        let top = match self.chunks.iter().rposition(|&d| d != 0) {
            Some(i) => i,
            None => return 0.0,
        };
        let msb = 63 - (self.chunks[top] as u64).leading_zeros() as i32;
        // Exponent of the highest set bit: value is in [2^e_top, 2^(e_top+1)).
        let e_top = 32 * top as i32 + msb + EXP_MIN;
        if e_top > 1023 {
            return if negative { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        let subnormal = e_top < -1022;
        // Position (relative to EXP_MIN) of the least kept mantissa bit.
        let rb = if subnormal { -1074 } else { e_top - 52 } - EXP_MIN;

        // A 96-bit window holding the top three digits covers every kept bit.
        let d = |i: i32| -> u128 {
            if i >= 0 {
                self.chunks[i as usize] as u128
            } else {
                0
            }
        };
        let window = (d(top as i32) << 64) | (d(top as i32 - 1) << 32) | d(top as i32 - 2);
        let wbase = 32 * (top as i32 - 2); // bit position of window bit 0
        // rel can exceed the window width (up to 110) when the value is far
        // below the subnormal threshold; the shifts below stay defined and
        // the mantissa correctly comes out zero.
        let rel = rb - wbase;
        debug_assert!((1..128).contains(&rel));

        let mut mant = (window >> rel) as u64;
        let round_bit = rel > 0 && (window >> (rel - 1)) & 1 == 1;
        let mut sticky = rel > 1 && window & ((1u128 << (rel - 1)) - 1) != 0;
        if !sticky {
            sticky = (0..top.saturating_sub(2)).any(|i| self.chunks[i] != 0);
        }
        if round_bit && (sticky || mant & 1 == 1) {
            mant += 1;
        }

        let sign = if negative { 1u64 << 63 } else { 0 };
        let bits = if subnormal {
            if mant == 1 << 52 {
                // Rounded up into the smallest normal.
                sign | 1 << 52
            } else {
                sign | mant
            }
        } else {
            let mut e = e_top;
            if mant == 1 << 53 {
                mant >>= 1;
                e += 1;
                if e > 1023 {
                    return if negative { f64::NEG_INFINITY } else { f64::INFINITY };
                }
            }
            debug_assert!((1 << 52..1 << 53).contains(&mant));
            sign | ((e + 1023) as u64) << 52 | (mant & ((1 << 52) - 1))
        };
        f64::from_bits(bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn sum_of(values: &[f64]) -> ExactSum {
        let mut s = ExactSum::new();
        for &v in values {
            s.add(v);
        }
        s
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(ExactSum::new().value(), 0.0);
    }

    #[test]
    fn single_values_round_trip() {
        for &v in &[
            1.0,
            -1.0,
            0.1,
            std::f64::consts::PI,
            f64::MIN_POSITIVE,
            5e-324,          // least subnormal
            -5e-324,
            1.7976931348623157e308,
            -3.137e-290,
        ] {
            assert_eq!(ExactSum::from_value(v).value(), v, "value {v:e}");
        }
    }

    #[test]
    fn classic_non_associative_case() {
        // 0.1 + 0.2 rounds to 0.30000000000000004 in f64; the exact sum keeps
        // the error term and still rounds to that same nearest double.
        let s = sum_of(&[0.1, 0.2]);
        assert_eq!(s.value(), 0.1 + 0.2);
    }

    #[test]
    fn catastrophic_cancellation_is_exact() {
        let s = sum_of(&[1e200, 1.0, -1e200]);
        assert_eq!(s.value(), 1.0);
        let s = sum_of(&[1e200, 5e-324, -1e200]);
        assert_eq!(s.value(), 5e-324);
    }

    #[test]
    fn huge_magnitude_spread() {
        let s = sum_of(&[1e300, 1e-300, -1e300, -1e-300]);
        assert_eq!(s.value(), 0.0);
    }

    #[test]
    fn merge_equals_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values: Vec<f64> = (0..500)
            .map(|_| {
                let e: i32 = rng.random_range(-60..60);
                let m: f64 = rng.random_range(-1.0..1.0);
                m * 2f64.powi(e)
            })
            .collect();
        let whole = sum_of(&values);
        for chunks in [2usize, 3, 7] {
            let mut merged = ExactSum::new();
            for part in values.chunks(values.len() / chunks + 1) {
                merged.merge(&sum_of(part));
            }
            assert_eq!(merged.value(), whole.value());
            assert!(merged == whole);
        }
    }

    // Independent oracle: with exponents confined to a window, the exact sum
    // fits in an i128 fixed-point integer, and i128 -> f64 casts round to
    // nearest in Rust.
    fn oracle_sum(values: &[(i64, i32)]) -> f64 {
        // values are (mantissa, exponent) pairs with |mantissa| < 2^53.
        let emin = values.iter().map(|&(_, e)| e).min().unwrap();
        let total: i128 = values
            .iter()
            .map(|&(m, e)| (m as i128) << (e - emin) as u32)
            .sum();
        (total as f64) * 2f64.powi(emin)
    }

    proptest! {
        #[test]
        fn matches_fixed_point_oracle(
            raw in proptest::collection::vec((-(1i64 << 53)..(1i64 << 53), -30i32..30), 1..200)
        ) {
            let floats: Vec<f64> = raw.iter().map(|&(m, e)| m as f64 * 2f64.powi(e)).collect();
            let expected = oracle_sum(&raw);
            // Guard against overflow in the oracle's f64 scaling step.
            prop_assume!(expected.is_finite());
            prop_assert_eq!(sum_of(&floats).value(), expected);
        }

        #[test]
        fn order_and_grouping_invariant(
            values in proptest::collection::vec(
                prop_oneof![
                    any::<f64>().prop_filter("finite", |v| v.is_finite()),
                    (-1e6f64..1e6),
                    (-1e-300f64..1e-300),
                ],
                1..120,
            ),
            split in 0usize..120,
            seed in any::<u64>(),
        ) {
            let reference = sum_of(&values).value();

            let mut shuffled = values.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            shuffled.shuffle(&mut rng);
            prop_assert_eq!(sum_of(&shuffled).value(), reference);

            let cut = split % values.len().max(1);
            let mut merged = sum_of(&shuffled[..cut]);
            merged.merge(&sum_of(&shuffled[cut..]));
            prop_assert_eq!(merged.value(), reference);
        }

        #[test]
        fn compress_keeps_value(values in proptest::collection::vec(-1e12f64..1e12, 30..80)) {
            let mut s = sum_of(&values);
            let before = s.value();
            s.compress();
            prop_assert_eq!(s.value(), before);
        }
    }
}
