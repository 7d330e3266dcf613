//! Bit-exact file formats: `NDV1` representations and `NDC1` control
//! streams.
//!
//! Both formats keep the decision layer and the residual (or delta
//! coefficient) layer as separate byte-aligned sections with explicit
//! `u32` lengths, so stripping residual data is a pure container
//! operation that never entropy-decodes anything. Multi-byte header
//! fields are little-endian; the bit layers inside are MSB-first.
//!
//! ```text
//! NDV1: magic "NDV1" | version u8 | width u16 | height u16 |
//!       frame_count u32 | gop_len u8 | qp u8
//!       per frame: frame_type u8 | dec_len u32 | dec bytes |
//!                  res_len u32 | res bytes
//!
//! NDC1: magic "NDC1" | version u8 | width u16 | height u16 |
//!       frame_count u32 | gop_len u8 | native_qp u8 | dtc_present u8
//!       per frame: frame_type u8 | dec_len u32 | dec bytes |
//!                  [dtc_len u32 | dtc bytes when dtc_present]
//! ```

use crate::codec::{
    decode_decision_layer, decode_frames, decode_residual_layer, encode_decision_layer,
    encode_residual_layer, encode_sequence, EncodedFrame, FrameType, QuantParams, ResidualLevels,
};
use crate::error::{Error, Result};
use crate::media_io::Sequence;

pub const NDV_MAGIC: &[u8; 4] = b"NDV1";
pub const NDC_MAGIC: &[u8; 4] = b"NDC1";
pub const FORMAT_VERSION: u8 = 1;

/// Byte length of the NDV1 fixed header.
pub const NDV_HEADER_LEN: usize = 15;
/// Byte length of the NDC1 fixed header.
pub const NDC_HEADER_LEN: usize = 16;

/// Header of a stored representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepHeader {
    pub width: u16,
    pub height: u16,
    pub frame_count: u32,
    pub gop_len: u8,
    pub qp: u8,
}

/// A parsed representation: headers plus per-frame decisions and levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub header: RepHeader,
    pub frames: Vec<EncodedFrame>,
}

impl Representation {
    /// Reconstructs the video this representation codes.
    pub fn decode(&self) -> Result<Sequence> {
        let q = QuantParams::new(self.header.qp)?;
        decode_frames(
            &self.frames,
            self.header.width as usize,
            self.header.height as usize,
            self.header.gop_len,
            q,
        )
    }
}

/// Encodes a sequence into a representation with the closed-GOP structure.
pub fn encode_representation(source: &Sequence, qp: u8, gop_len: u8) -> Result<Representation> {
    let (frames, _) = encode_sequence(source, qp, gop_len)?;
    Ok(Representation {
        header: RepHeader {
            width: source.width() as u16,
            height: source.height() as u16,
            frame_count: source.len() as u32,
            gop_len,
            qp,
        },
        frames,
    })
}

/// Header of a control stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsHeader {
    pub width: u16,
    pub height: u16,
    pub frame_count: u32,
    pub gop_len: u8,
    /// QP the packaged decisions were optimized for.
    pub native_qp: u8,
    pub dtc_present: bool,
}

/// One control-stream frame: decisions, plus delta coefficients when the
/// stream is deflated.
#[derive(Debug, Clone, PartialEq)]
pub struct CsFrame {
    pub decisions: crate::codec::FrameDecisions,
    pub dtc: Option<ResidualLevels>,
}

/// A parsed control stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlStream {
    pub header: CsHeader,
    pub frames: Vec<CsFrame>,
}

struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Corruption(format!(
                "section of {n} bytes at offset {} overruns {}-byte file",
                self.pos,
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn check_dims_header(width: u16, height: u16) -> Result<()> {
    if width == 0 || height == 0 || width % 16 != 0 || height % 16 != 0 {
        return Err(Error::Corruption(format!(
            "header dimensions {width}x{height} are not positive multiples of 16"
        )));
    }
    Ok(())
}

/// Serializes a representation. Re-serializing a parsed file is
/// byte-identical.
pub fn write_representation(rep: &Representation) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(NDV_MAGIC);
    w.u8(FORMAT_VERSION);
    w.u16(rep.header.width);
    w.u16(rep.header.height);
    w.u32(rep.header.frame_count);
    w.u8(rep.header.gop_len);
    w.u8(rep.header.qp);
    let (width, height) = (rep.header.width as usize, rep.header.height as usize);
    for frame in &rep.frames {
        w.u8(frame.decisions.frame_type.code());
        let dec = encode_decision_layer(&frame.decisions, width, height);
        w.u32(dec.len() as u32);
        w.bytes(&dec);
        let res = encode_residual_layer(&frame.levels);
        w.u32(res.len() as u32);
        w.bytes(&res);
    }
    w.buf
}

pub fn read_representation(bytes: &[u8]) -> Result<Representation> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4).map_err(|_| Error::Format("file too short for magic".into()))?;
    if magic != NDV_MAGIC {
        return Err(Error::Format("not an NDV1 representation".into()));
    }
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(Error::Unsupported(format!(
            "NDV1 version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    let width = r.u16()?;
    let height = r.u16()?;
    check_dims_header(width, height)?;
    let frame_count = r.u32()?;
    let gop_len = r.u8()?;
    let qp = r.u8()?;
    if gop_len == 0 {
        return Err(Error::Corruption("gop length 0".into()));
    }
    if qp > 51 {
        return Err(Error::Corruption(format!("header qp {qp} outside [0, 51]")));
    }
    let mut frames = Vec::with_capacity(frame_count as usize);
    for _ in 0..frame_count {
        let frame_type = FrameType::from_code(r.u8()?)?;
        let dec_len = r.u32()? as usize;
        let dec = r.take(dec_len)?;
        let decisions = decode_decision_layer(dec, width as usize, height as usize, frame_type)?;
        let res_len = r.u32()? as usize;
        let res = r.take(res_len)?;
        let levels = decode_residual_layer(res, width as usize, height as usize)?;
        frames.push(EncodedFrame { decisions, levels });
    }
    if !r.done() {
        return Err(Error::Corruption("trailing bytes after last frame".into()));
    }
    Ok(Representation {
        header: RepHeader {
            width,
            height,
            frame_count,
            gop_len,
            qp,
        },
        frames,
    })
}

/// Serializes a control stream.
pub fn write_cs(cs: &ControlStream) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(NDC_MAGIC);
    w.u8(FORMAT_VERSION);
    w.u16(cs.header.width);
    w.u16(cs.header.height);
    w.u32(cs.header.frame_count);
    w.u8(cs.header.gop_len);
    w.u8(cs.header.native_qp);
    w.u8(cs.header.dtc_present as u8);
    let (width, height) = (cs.header.width as usize, cs.header.height as usize);
    for frame in &cs.frames {
        w.u8(frame.decisions.frame_type.code());
        let dec = encode_decision_layer(&frame.decisions, width, height);
        w.u32(dec.len() as u32);
        w.bytes(&dec);
        if cs.header.dtc_present {
            let dtc = frame.dtc.as_ref().expect("dtc_present stream carries DTC");
            let bytes = encode_residual_layer(dtc);
            w.u32(bytes.len() as u32);
            w.bytes(&bytes);
        }
    }
    w.buf
}

pub fn read_cs(bytes: &[u8]) -> Result<ControlStream> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4).map_err(|_| Error::Format("file too short for magic".into()))?;
    if magic != NDC_MAGIC {
        return Err(Error::Format("not an NDC1 control stream".into()));
    }
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(Error::Unsupported(format!(
            "NDC1 version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    let width = r.u16()?;
    let height = r.u16()?;
    check_dims_header(width, height)?;
    let frame_count = r.u32()?;
    let gop_len = r.u8()?;
    let native_qp = r.u8()?;
    let dtc_present = match r.u8()? {
        0 => false,
        1 => true,
        other => {
            return Err(Error::Corruption(format!(
                "dtc_present flag {other} is neither 0 nor 1"
            )))
        }
    };
    if gop_len == 0 {
        return Err(Error::Corruption("gop length 0".into()));
    }
    if native_qp > 51 {
        return Err(Error::Corruption(format!(
            "header qp {native_qp} outside [0, 51]"
        )));
    }
    let mut frames = Vec::with_capacity(frame_count as usize);
    for _ in 0..frame_count {
        let frame_type = FrameType::from_code(r.u8()?)?;
        let dec_len = r.u32()? as usize;
        let dec = r.take(dec_len)?;
        let decisions = decode_decision_layer(dec, width as usize, height as usize, frame_type)?;
        let dtc = if dtc_present {
            let dtc_len = r.u32()? as usize;
            let bytes = r.take(dtc_len)?;
            Some(decode_residual_layer(bytes, width as usize, height as usize)?)
        } else {
            None
        };
        frames.push(CsFrame { decisions, dtc });
    }
    if !r.done() {
        return Err(Error::Corruption("trailing bytes after last frame".into()));
    }
    Ok(ControlStream {
        header: CsHeader {
            width,
            height,
            frame_count,
            gop_len,
            native_qp,
            dtc_present,
        },
        frames,
    })
}

/// Strips every residual layer from a representation, producing a plain
/// control stream. Decision-layer bytes are copied verbatim; nothing is
/// entropy-decoded — the layer lengths alone drive the walk.
pub fn strip_residual(ndv_bytes: &[u8]) -> Result<Vec<u8>> {
    let mut r = ByteReader::new(ndv_bytes);
    let magic = r.take(4).map_err(|_| Error::Format("file too short for magic".into()))?;
    if magic != NDV_MAGIC {
        return Err(Error::Format("not an NDV1 representation".into()));
    }
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(Error::Unsupported(format!(
            "NDV1 version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    let width = r.u16()?;
    let height = r.u16()?;
    let frame_count = r.u32()?;
    let gop_len = r.u8()?;
    let qp = r.u8()?;

    let mut w = ByteWriter::new();
    w.bytes(NDC_MAGIC);
    w.u8(FORMAT_VERSION);
    w.u16(width);
    w.u16(height);
    w.u32(frame_count);
    w.u8(gop_len);
    w.u8(qp); // native_qp: the qp the stripped decisions were made for
    w.u8(0); // dtc_present
    for _ in 0..frame_count {
        let frame_type = r.u8()?;
        let dec_len = r.u32()?;
        let dec = r.take(dec_len as usize)?;
        w.u8(frame_type);
        w.u32(dec_len);
        w.bytes(dec);
        let res_len = r.u32()?;
        r.take(res_len as usize)?; // skipped, never decoded
    }
    if !r.done() {
        return Err(Error::Corruption("trailing bytes after last frame".into()));
    }
    Ok(w.buf)
}

/// Per-GOP segment table of an NDV1 or NDC1 file: one `(byte_offset,
/// byte_length)` entry per GOP. Segments start at intra frames, so each
/// one decodes in isolation given the header.
pub fn segment_index(bytes: &[u8]) -> Result<Vec<(usize, usize)>> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4).map_err(|_| Error::Format("file too short for magic".into()))?;
    let (header_rest, has_dtc_flag) = match magic {
        m if m == NDV_MAGIC => (NDV_HEADER_LEN - 4, false),
        m if m == NDC_MAGIC => (NDC_HEADER_LEN - 4, true),
        _ => return Err(Error::Format("neither NDV1 nor NDC1".into())),
    };
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(Error::Unsupported(format!("version {version}")));
    }
    r.take(4)?; // width, height
    let frame_count = r.u32()?;
    let gop_len = r.u8()? as usize;
    if gop_len == 0 {
        return Err(Error::Corruption("gop length 0".into()));
    }
    let dtc_present = if has_dtc_flag {
        r.u8()?; // native_qp
        r.u8()? != 0
    } else {
        r.u8()?; // qp
        false
    };
    debug_assert_eq!(r.pos, header_rest + 4);

    let mut segments = Vec::new();
    let mut seg_start = r.pos;
    for t in 0..frame_count as usize {
        if t % gop_len == 0 {
            if t > 0 {
                segments.push((seg_start, r.pos - seg_start));
                seg_start = r.pos;
            }
            // Closed GOPs: every segment must open with an intra frame.
            let ft = bytes
                .get(r.pos)
                .copied()
                .ok_or_else(|| Error::Corruption("file ends before GOP start".into()))?;
            if ft != FrameType::Intra.code() {
                return Err(Error::Corruption(format!(
                    "frame {t} opens a GOP but is not intra"
                )));
            }
        }
        r.u8()?; // frame type
        let dec_len = r.u32()? as usize;
        r.take(dec_len)?;
        if !has_dtc_flag {
            let res_len = r.u32()? as usize;
            r.take(res_len)?;
        } else if dtc_present {
            let dtc_len = r.u32()? as usize;
            r.take(dtc_len)?;
        }
    }
    if frame_count > 0 {
        segments.push((seg_start, r.pos - seg_start));
    }
    if !r.done() {
        return Err(Error::Corruption("trailing bytes after last frame".into()));
    }
    Ok(segments)
}

/// Builds a standalone single-GOP file from a parsed header and one
/// segment's bytes, by rewriting the frame-count field. The result parses
/// with the ordinary readers.
pub fn splice_segment(header_of: &[u8], segment: &[u8], frames_in_segment: u32) -> Result<Vec<u8>> {
    let header_len = match header_of.get(..4) {
        Some(m) if m == NDV_MAGIC => NDV_HEADER_LEN,
        Some(m) if m == NDC_MAGIC => NDC_HEADER_LEN,
        _ => return Err(Error::Format("neither NDV1 nor NDC1".into())),
    };
    if header_of.len() < header_len {
        return Err(Error::Corruption("file shorter than its header".into()));
    }
    let mut out = header_of[..header_len].to_vec();
    out[9..13].copy_from_slice(&frames_in_segment.to_le_bytes());
    out.extend_from_slice(segment);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode_sequence;
    use crate::media_io::synth_sequence;

    fn encoded_rep(qp: u8, frames: usize, gop: u8) -> (Representation, Vec<u8>) {
        let seq = synth_sequence(64, 64, frames).unwrap();
        let (encoded, _) = encode_sequence(&seq, qp, gop).unwrap();
        let rep = Representation {
            header: RepHeader {
                width: 64,
                height: 64,
                frame_count: frames as u32,
                gop_len: gop,
                qp,
            },
            frames: encoded,
        };
        let bytes = write_representation(&rep);
        (rep, bytes)
    }

    #[test]
    fn representation_round_trip_is_byte_identical() {
        let (rep, bytes) = encoded_rep(18, 6, 3);
        let parsed = read_representation(&bytes).unwrap();
        assert_eq!(parsed, rep);
        assert_eq!(write_representation(&parsed), bytes);
    }

    #[test]
    fn cs_round_trip_with_and_without_dtc() {
        let (rep, _) = encoded_rep(24, 4, 2);
        let plain = ControlStream {
            header: CsHeader {
                width: 64,
                height: 64,
                frame_count: 4,
                gop_len: 2,
                native_qp: 24,
                dtc_present: false,
            },
            frames: rep
                .frames
                .iter()
                .map(|f| CsFrame {
                    decisions: f.decisions.clone(),
                    dtc: None,
                })
                .collect(),
        };
        let bytes = write_cs(&plain);
        assert_eq!(read_cs(&bytes).unwrap(), plain);

        let deflated = ControlStream {
            header: CsHeader {
                dtc_present: true,
                ..plain.header
            },
            frames: rep
                .frames
                .iter()
                .map(|f| CsFrame {
                    decisions: f.decisions.clone(),
                    dtc: Some(ResidualLevels::new_empty(64, 64)),
                })
                .collect(),
        };
        let bytes = write_cs(&deflated);
        let parsed = read_cs(&bytes).unwrap();
        assert_eq!(parsed, deflated);
    }

    #[test]
    fn all_zero_dtc_blocks_cost_one_bit_each() {
        // 64x64 frame: 16 blocks of 16x16 -> 64 transform blocks, one
        // "ue(0)" bit each -> an 8-byte aligned DTC layer.
        let levels = ResidualLevels::new_empty(64, 64);
        let bytes = crate::codec::encode_residual_layer(&levels);
        assert_eq!(bytes.len(), 8);
    }

    #[test]
    fn version_bump_is_unsupported_not_parsed() {
        let (_, mut bytes) = encoded_rep(18, 2, 2);
        bytes[4] = 2;
        assert!(matches!(read_representation(&bytes), Err(Error::Unsupported(_))));
        assert!(matches!(strip_residual(&bytes), Err(Error::Unsupported(_))));
        let cs = strip_residual(&write_representation(&encoded_rep(18, 2, 2).0)).unwrap();
        let mut cs_bumped = cs;
        cs_bumped[4] = 9;
        assert!(matches!(read_cs(&cs_bumped), Err(Error::Unsupported(_))));
    }

    #[test]
    fn bad_magic_is_format_error() {
        assert!(matches!(read_representation(b"JUNK"), Err(Error::Format(_))));
        assert!(matches!(read_cs(b"NDV1xxxx"), Err(Error::Format(_))));
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let (_, mut bytes) = encoded_rep(18, 2, 2);
        bytes.push(0);
        assert!(matches!(read_representation(&bytes), Err(Error::Corruption(_))));
    }

    #[test]
    fn strip_size_arithmetic() {
        let (rep, bytes) = encoded_rep(12, 6, 3);
        let stripped = strip_residual(&bytes).unwrap();
        let residual_total: usize = rep
            .frames
            .iter()
            .map(|f| crate::codec::encode_residual_layer(&f.levels).len())
            .sum();
        // NDC header is one byte longer than NDV; each frame drops its
        // residual length field (4 bytes) and payload.
        assert_eq!(
            stripped.len(),
            bytes.len() - residual_total - 4 * rep.frames.len() + 1
        );
    }

    #[test]
    fn strip_preserves_decisions_exactly() {
        let (rep, bytes) = encoded_rep(18, 6, 3);
        let cs = read_cs(&strip_residual(&bytes).unwrap()).unwrap();
        assert_eq!(cs.header.native_qp, 18);
        assert!(!cs.header.dtc_present);
        for (a, b) in cs.frames.iter().zip(&rep.frames) {
            assert_eq!(a.decisions, b.decisions);
        }
    }

    #[test]
    fn strip_never_reads_residual_bits() {
        // Corrupting residual payload bytes must not change the stripped
        // output: the walk is driven by the length fields alone.
        let (_, bytes) = encoded_rep(18, 4, 2);
        let clean = strip_residual(&bytes).unwrap();
        let mut corrupted = bytes.clone();
        // Flip every byte of the last frame's residual payload.
        let rep = read_representation(&bytes).unwrap();
        let last_res = crate::codec::encode_residual_layer(&rep.frames[3].levels);
        let tail = corrupted.len() - last_res.len()..corrupted.len();
        for b in &mut corrupted[tail] {
            *b ^= 0xFF;
        }
        assert_eq!(strip_residual(&corrupted).unwrap(), clean);
    }

    #[test]
    fn segment_index_counts_and_conservation() {
        let (_, bytes) = encoded_rep(18, 32, 16);
        let segments = segment_index(&bytes).unwrap();
        assert_eq!(segments.len(), 2);
        assert_eq!(segments[0].0, NDV_HEADER_LEN);
        let total: usize = segments.iter().map(|(_, len)| len).sum();
        assert_eq!(NDV_HEADER_LEN + total, bytes.len());
        // Contiguity.
        assert_eq!(segments[0].0 + segments[0].1, segments[1].0);
    }

    #[test]
    fn segment_decodes_in_isolation() {
        let (rep, bytes) = encoded_rep(18, 6, 3);
        let segments = segment_index(&bytes).unwrap();
        let (off, len) = segments[1];
        let spliced = splice_segment(&bytes, &bytes[off..off + len], 3).unwrap();
        let parsed = read_representation(&spliced).unwrap();
        assert_eq!(parsed.frames.len(), 3);
        assert_eq!(parsed.frames[..], rep.frames[3..6]);
        let q = crate::codec::QuantParams::new(18).unwrap();
        let decoded = crate::codec::decode_frames(&parsed.frames, 64, 64, 3, q).unwrap();
        assert_eq!(decoded.len(), 3);
    }

    #[test]
    fn segment_index_works_on_control_streams() {
        let (_, bytes) = encoded_rep(18, 6, 3);
        let cs_bytes = strip_residual(&bytes).unwrap();
        let segments = segment_index(&cs_bytes).unwrap();
        assert_eq!(segments.len(), 2);
        let total: usize = segments.iter().map(|(_, len)| len).sum();
        assert_eq!(NDC_HEADER_LEN + total, cs_bytes.len());
    }
}
