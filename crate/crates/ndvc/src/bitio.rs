//! Bit-level serialization shared by every bitstream layer.
//!
//! Bits are packed MSB-first within each byte and alignment pads with zero
//! bits, so any two implementations of these rules produce byte-identical
//! streams. On top of the raw bit buffers sit unsigned and signed
//! exponential-Golomb codes, the only entropy codes used by the codec.

use crate::error::{Error, Result};

/// Append-only bit buffer, MSB-first within each byte.
#[derive(Debug, Default, Clone)]
pub struct BitSink {
    buf: Vec<u8>,
    /// Total bits written so far.
    bits: usize,
}

impl BitSink {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes the `n` low bits of `value`, most significant first.
    ///
    /// Panics if `n > 32` or `value` does not fit in `n` bits; both are
    /// caller bugs, not data errors.
    pub fn write_bits(&mut self, value: u32, n: usize) {
        assert!(n <= 32, "bit field width {n} exceeds 32");
        assert!(
            n == 32 || value < (1u32 << n),
            "value {value} does not fit in {n} bits"
        );
        for i in (0..n).rev() {
            let bit = (value >> i) & 1;
            let bit_idx = self.bits % 8;
            if bit_idx == 0 {
                self.buf.push(0);
            }
            if bit == 1 {
                *self.buf.last_mut().unwrap() |= 1 << (7 - bit_idx);
            }
            self.bits += 1;
        }
    }

    pub fn write_bit(&mut self, bit: bool) {
        self.write_bits(bit as u32, 1);
    }

    /// Pads with zero bits up to the next byte boundary.
    pub fn byte_align(&mut self) {
        self.bits = self.buf.len() * 8;
    }

    /// Total bits written, before any alignment padding.
    pub fn bit_len(&self) -> usize {
        self.bits
    }

    /// Aligns and returns the underlying bytes.
    pub fn into_bytes(mut self) -> Vec<u8> {
        self.byte_align();
        self.buf
    }
}

/// Bit reader over a byte slice, MSB-first within each byte.
#[derive(Debug, Clone)]
pub struct BitSource<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitSource<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Reads `n` bits, most significant first. Exact inverse of
    /// [`BitSink::write_bits`].
    pub fn read_bits(&mut self, n: usize) -> Result<u32> {
        assert!(n <= 32, "bit field width {n} exceeds 32");
        if self.pos + n > self.bytes.len() * 8 {
            return Err(Error::Truncated(format!(
                "read of {n} bits at bit {} exceeds {}-byte buffer",
                self.pos,
                self.bytes.len()
            )));
        }
        let mut value = 0u32;
        for _ in 0..n {
            let byte = self.bytes[self.pos / 8];
            let bit = (byte >> (7 - self.pos % 8)) & 1;
            value = (value << 1) | bit as u32;
            self.pos += 1;
        }
        Ok(value)
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        Ok(self.read_bits(1)? == 1)
    }

    /// Skips forward to the next byte boundary.
    pub fn byte_align(&mut self) {
        self.pos = (self.pos + 7) / 8 * 8;
    }

    pub fn bits_consumed(&self) -> usize {
        self.pos
    }

    pub fn bits_remaining(&self) -> usize {
        self.bytes.len() * 8 - self.pos
    }
}

/// Writes `v` as an unsigned exponential-Golomb code: with `b = v + 1` and
/// `k = bit_length(b) - 1`, emits `k` zero bits then `b` in `k + 1` bits.
pub fn encode_ue(sink: &mut BitSink, v: u32) {
    assert!(v < u32::MAX - 1, "ue value out of range");
    let b = v + 1;
    let k = 31 - b.leading_zeros() as usize;
    sink.write_bits(0, k);
    sink.write_bits(b, k + 1);
}

/// Inverse of [`encode_ue`]. A prefix of 32 or more zero bits is corruption.
pub fn decode_ue(source: &mut BitSource) -> Result<u32> {
    let mut k = 0usize;
    while !source.read_bit()? {
        k += 1;
        if k >= 32 {
            return Err(Error::Corruption(
                "exp-Golomb prefix of 32+ zero bits".into(),
            ));
        }
    }
    let rest = source.read_bits(k)?;
    let b = (1u32 << k) | rest;
    Ok(b - 1)
}

/// Signed exponential-Golomb: `v > 0` maps to `2v - 1`, `v <= 0` to `-2v`.
pub fn encode_se(sink: &mut BitSink, v: i32) {
    let m = if v > 0 {
        2 * (v as i64) - 1
    } else {
        -2 * (v as i64)
    };
    encode_ue(sink, m as u32);
}

/// Inverse of [`encode_se`].
pub fn decode_se(source: &mut BitSource) -> Result<i32> {
    let m = decode_ue(source)? as i64;
    let v = if m % 2 == 1 { (m + 1) / 2 } else { -(m / 2) };
    Ok(v as i32)
}

/// Bit cost of `encode_ue(v)` without touching a sink.
pub fn ue_len(v: u32) -> usize {
    let b = v as u64 + 1;
    let k = 63 - b.leading_zeros() as usize;
    2 * k + 1
}

/// Bit cost of `encode_se(v)` without touching a sink.
pub fn se_len(v: i32) -> usize {
    let m = if v > 0 {
        2 * (v as i64) - 1
    } else {
        -2 * (v as i64)
    };
    ue_len(m as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits_of(bytes: &[u8], n: usize) -> String {
        let mut s = String::new();
        for i in 0..n {
            let bit = (bytes[i / 8] >> (7 - i % 8)) & 1;
            s.push(if bit == 1 { '1' } else { '0' });
        }
        s
    }

    #[test]
    fn write_bits_msb_first() {
        let mut sink = BitSink::new();
        sink.write_bits(0b101, 3);
        assert_eq!(sink.bit_len(), 3);
        let bytes = sink.into_bytes();
        assert_eq!(bits_of(&bytes, 3), "101");
    }

    #[test]
    fn align_pads_with_zeros() {
        let mut sink = BitSink::new();
        sink.write_bits(1, 1);
        sink.write_bits(0, 2);
        let bytes = sink.into_bytes();
        assert_eq!(bytes, vec![0b1000_0000]);
    }

    #[test]
    fn read_three_bits() {
        let mut src = BitSource::new(&[0b1010_0000]);
        assert_eq!(src.read_bits(3).unwrap(), 5);
    }

    #[test]
    fn read_past_end_is_truncation() {
        let mut src = BitSource::new(&[0xFF]);
        src.read_bits(8).unwrap();
        assert!(matches!(src.read_bits(1), Err(Error::Truncated(_))));
    }

    fn ue_bits(v: u32) -> String {
        let mut sink = BitSink::new();
        encode_ue(&mut sink, v);
        let n = sink.bit_len();
        bits_of(&sink.into_bytes(), n)
    }

    fn se_bits(v: i32) -> String {
        let mut sink = BitSink::new();
        encode_se(&mut sink, v);
        let n = sink.bit_len();
        bits_of(&sink.into_bytes(), n)
    }

    #[test]
    fn ue_code_table() {
        assert_eq!(ue_bits(0), "1");
        assert_eq!(ue_bits(1), "010");
        assert_eq!(ue_bits(2), "011");
        assert_eq!(ue_bits(4), "00101");
    }

    #[test]
    fn se_code_table() {
        assert_eq!(se_bits(0), "1");
        assert_eq!(se_bits(1), "010");
        assert_eq!(se_bits(-1), "011");
        assert_eq!(se_bits(3), "00110");
        assert_eq!(se_bits(-3), "00111");
    }

    #[test]
    fn se_round_trip_small_range() {
        let mut sink = BitSink::new();
        for v in -1000..=1000 {
            encode_se(&mut sink, v);
        }
        let bytes = sink.into_bytes();
        let mut src = BitSource::new(&bytes);
        for v in -1000..=1000 {
            assert_eq!(decode_se(&mut src).unwrap(), v);
        }
    }

    #[test]
    fn ue_round_trip_and_length_exhaustive_16bit() {
        for v in 0u32..(1 << 16) {
            let mut sink = BitSink::new();
            encode_ue(&mut sink, v);
            let expected_len = 2 * (32 - (v + 1).leading_zeros() as usize - 1) + 1;
            assert_eq!(sink.bit_len(), expected_len);
            assert_eq!(sink.bit_len(), ue_len(v));
            let bytes = sink.into_bytes();
            let mut src = BitSource::new(&bytes);
            assert_eq!(decode_ue(&mut src).unwrap(), v);
        }
    }

    #[test]
    fn malformed_prefix_is_corruption() {
        // 32 zero bits followed by a one.
        let bytes = [0u8, 0, 0, 0, 0x80];
        let mut src = BitSource::new(&bytes);
        assert!(matches!(decode_ue(&mut src), Err(Error::Corruption(_))));
    }

    #[test]
    fn se_len_matches_encoder() {
        for v in [-5000, -1, 0, 1, 2, 77, 40000] {
            let mut sink = BitSink::new();
            encode_se(&mut sink, v);
            assert_eq!(sink.bit_len(), se_len(v));
        }
    }

    proptest! {
        /// Any interleaving of field widths reads back exactly.
        #[test]
        fn field_script_round_trip(script in prop::collection::vec((0usize..=32, any::<u32>()), 0..64)) {
            let mut sink = BitSink::new();
            let mut expected = Vec::new();
            for &(n, raw) in &script {
                let value = if n == 32 { raw } else { raw & ((1u32 << n) - 1).max(0) };
                let value = if n == 0 { 0 } else { value };
                sink.write_bits(value, n);
                expected.push((n, value));
            }
            let bytes = sink.into_bytes();
            let mut src = BitSource::new(&bytes);
            for &(n, value) in &expected {
                prop_assert_eq!(src.read_bits(n).unwrap(), value);
            }
        }

        #[test]
        fn ue_se_round_trip(vals in prop::collection::vec((0u32..1_000_000, -1_000_000i32..1_000_000), 1..64)) {
            let mut sink = BitSink::new();
            for &(u, s) in &vals {
                encode_ue(&mut sink, u);
                encode_se(&mut sink, s);
            }
            let bytes = sink.into_bytes();
            let mut src = BitSource::new(&bytes);
            for &(u, s) in &vals {
                prop_assert_eq!(decode_ue(&mut src).unwrap(), u);
                prop_assert_eq!(decode_se(&mut src).unwrap(), s);
            }
        }
    }
}
