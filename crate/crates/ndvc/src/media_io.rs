//! Raw video loading, storage, synthesis, and comparison.
//!
//! All video is single-plane 8-bit (luma only) with dimensions that are
//! multiples of 16, which keeps every bit-exactness test free of partial
//! block padding rules. Y4M files are accepted as input (mono or 4:2:0,
//! chroma discarded); storage round trips use bare planar files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One 8-bit single-plane raster frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl Frame {
    /// Creates a frame from row-major samples. Dimensions must be positive
    /// multiples of 16 and `samples.len()` must equal `width * height`.
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if samples.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "expected {} samples for {}x{}, got {}",
                width * height,
                width,
                height,
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    /// A frame filled with a constant value.
    pub fn constant(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.samples[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        debug_assert!(x < self.width && y < self.height);
        self.samples[y * self.width + x] = value;
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// An ordered run of frames with identical dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    frames: Vec<Frame>,
    frame_rate: f64,
}

impl Sequence {
    /// Frame rate is carried as metadata only; it never affects coding.
    pub fn new(frames: Vec<Frame>, frame_rate: f64) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidArgument("sequence must not be empty".into()))?;
        let (w, h) = (first.width, first.height);
        if !frames.iter().all(|f| f.width == w && f.height == h) {
            return Err(Error::ShapeMismatch(
                "all frames in a sequence must share dimensions".into(),
            ));
        }
        Ok(Self { frames, frame_rate })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn set_frame_rate(&mut self, fps: f64) {
        self.frame_rate = fps;
    }

    /// A contiguous sub-run of frames as its own sequence.
    pub fn slice(&self, start: usize, count: usize) -> Result<Sequence> {
        if start + count > self.frames.len() || count == 0 {
            return Err(Error::InvalidArgument(format!(
                "slice [{start}, {}) out of range for {} frames",
                start + count,
                self.frames.len()
            )));
        }
        Sequence::new(self.frames[start..start + count].to_vec(), self.frame_rate)
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || width % 16 != 0 || height % 16 != 0 {
        return Err(Error::InvalidArgument(format!(
            "dimensions {width}x{height} must be positive multiples of 16"
        )));
    }
    Ok(())
}

const Y4M_MAGIC: &[u8] = b"YUV4MPEG2";

/// Reads a Y4M file, keeping only the luma plane.
///
/// Supported chroma tags: `Cmono` (luma only) and the 4:2:0 family
/// (`C420`, `C420jpeg`, `C420mpeg2`, `C420paldv`), whose chroma planes are
/// skipped. A missing `C` token means 4:2:0 by Y4M convention.
pub fn read_y4m(path: impl AsRef<Path>) -> Result<Sequence> {
    let mut reader = BufReader::new(File::open(path.as_ref())?);
    let mut data = Vec::new();
    reader.read_to_end(&mut data)?;
    read_y4m_bytes(&data)
}

pub fn read_y4m_bytes(data: &[u8]) -> Result<Sequence> {
    let header_end = data
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing Y4M header terminator".into()))?;
    let header = &data[..header_end];
    if !header.starts_with(Y4M_MAGIC) {
        return Err(Error::Format("not a YUV4MPEG2 file".into()));
    }
    let header = std::str::from_utf8(header)
        .map_err(|_| Error::Format("Y4M header is not valid text".into()))?;

    let mut width = None;
    let mut height = None;
    let mut frame_rate = 25.0;
    let mut chroma = "420".to_string();
    for token in header.split_ascii_whitespace().skip(1) {
        let (tag, rest) = token.split_at(1);
        match tag {
            "W" => {
                width = Some(rest.parse::<usize>().map_err(|_| {
                    Error::Format(format!("bad Y4M width token {token:?}"))
                })?)
            }
            "H" => {
                height = Some(rest.parse::<usize>().map_err(|_| {
                    Error::Format(format!("bad Y4M height token {token:?}"))
                })?)
            }
            "F" => {
                let (num, den) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::Format(format!("bad Y4M rate token {token:?}")))?;
                let num: f64 = num
                    .parse()
                    .map_err(|_| Error::Format(format!("bad Y4M rate token {token:?}")))?;
                let den: f64 = den
                    .parse()
                    .map_err(|_| Error::Format(format!("bad Y4M rate token {token:?}")))?;
                if den <= 0.0 {
                    return Err(Error::Format(format!("bad Y4M rate token {token:?}")));
                }
                frame_rate = num / den;
            }
            "C" => chroma = rest.to_string(),
            _ => {} // interlace, aspect, extensions: ignored
        }
    }
    let width = width.ok_or_else(|| Error::Format("Y4M header missing width".into()))?;
    let height = height.ok_or_else(|| Error::Format("Y4M header missing height".into()))?;
    check_dims(width, height)?;

    let chroma_bytes = match chroma.as_str() {
        "mono" => 0,
        "420" | "420jpeg" | "420mpeg2" | "420paldv" => (width / 2) * (height / 2) * 2,
        other => {
            return Err(Error::Unsupported(format!(
                "Y4M chroma mode C{other} (only mono and 4:2:0 are handled)"
            )))
        }
    };

    let luma_bytes = width * height;
    let mut frames = Vec::new();
    let mut pos = header_end + 1;
    while pos < data.len() {
        let line_end = data[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|o| pos + o)
            .ok_or_else(|| Error::Format("unterminated FRAME marker".into()))?;
        if !data[pos..line_end].starts_with(b"FRAME") {
            return Err(Error::Format("expected FRAME marker".into()));
        }
        let payload_start = line_end + 1;
        let payload_end = payload_start + luma_bytes + chroma_bytes;
        if payload_end > data.len() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                format!("truncated frame payload at frame {}", frames.len()),
            )));
        }
        let samples = data[payload_start..payload_start + luma_bytes].to_vec();
        frames.push(Frame::new(width, height, samples)?);
        pos = payload_end;
    }
    Sequence::new(frames, frame_rate)
}

/// Reads `count` frames of bare `width * height` planar bytes.
pub fn read_raw(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    count: usize,
) -> Result<Sequence> {
    check_dims(width, height)?;
    if count == 0 {
        return Err(Error::InvalidArgument("frame count must be at least 1".into()));
    }
    let frame_bytes = width * height;
    let meta = std::fs::metadata(path.as_ref())?;
    if (meta.len() as usize) < frame_bytes * count {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            format!(
                "{} is {} bytes but {} frames of {}x{} need {}",
                path.as_ref().display(),
                meta.len(),
                count,
                width,
                height,
                frame_bytes * count
            ),
        )));
    }
    let mut reader = BufReader::new(File::open(path.as_ref())?);
    let mut frames = Vec::with_capacity(count);
    for _ in 0..count {
        let mut samples = vec![0u8; frame_bytes];
        reader.read_exact(&mut samples)?;
        frames.push(Frame::new(width, height, samples)?);
    }
    Sequence::new(frames, 25.0)
}

/// Writes a sequence as bare planar bytes, returning the byte count.
pub fn write_raw(seq: &Sequence, path: impl AsRef<Path>) -> Result<usize> {
    let mut writer = BufWriter::new(File::create(path.as_ref())?);
    let mut written = 0usize;
    for frame in seq.frames() {
        writer.write_all(frame.samples())?;
        written += frame.samples().len();
    }
    writer.flush()?;
    Ok(written)
}

/// Deterministic synthetic test sequence: a diagonal gradient background
/// drifting at (3, 1) pixels per frame with an opaque 16x16 square of
/// value 220 moving at (2, 1). Integer-pel motion search has an exact
/// optimum on it, which keeps motion-related tests deterministic.
pub fn synth_sequence(width: usize, height: usize, frame_count: usize) -> Result<Sequence> {
    check_dims(width, height)?;
    if frame_count == 0 {
        return Err(Error::InvalidArgument("frame count must be at least 1".into()));
    }
    let wrap_x = (width - 16).max(1);
    let wrap_y = (height - 16).max(1);
    let mut frames = Vec::with_capacity(frame_count);
    for t in 0..frame_count {
        let sq_x = (8 + 2 * t) % wrap_x;
        let sq_y = (8 + t) % wrap_y;
        let mut samples = vec![0u8; width * height];
        for y in 0..height {
            for x in 0..width {
                let in_square =
                    x >= sq_x && x < sq_x + 16 && y >= sq_y && y < sq_y + 16;
                samples[y * width + x] = if in_square {
                    220
                } else {
                    (((x + 3 * t) % 256 + (y + t) % 256) / 2) as u8
                };
            }
        }
        frames.push(Frame::new(width, height, samples)?);
    }
    Sequence::new(frames, 25.0)
}

/// PSNR in decibels between two frames; `f64::INFINITY` when identical.
pub fn psnr_frame(a: &Frame, b: &Frame) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let sse: u64 = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    Ok(psnr_from_sse(sse, a.samples.len() as u64))
}

/// PSNR over all samples of all frames of two sequences.
pub fn psnr(a: &Sequence, b: &Sequence) -> Result<f64> {
    if a.len() != b.len() || a.width() != b.width() || a.height() != b.height() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.len(),
            b.width(),
            b.height(),
            b.len()
        )));
    }
    let mut sse = 0u64;
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        sse += fa
            .samples
            .iter()
            .zip(&fb.samples)
            .map(|(&x, &y)| {
                let d = x as i64 - y as i64;
                (d * d) as u64
            })
            .sum::<u64>();
    }
    Ok(psnr_from_sse(sse, (a.len() * a.width() * a.height()) as u64))
}

fn psnr_from_sse(sse: u64, n: u64) -> f64 {
    if sse == 0 {
        return f64::INFINITY;
    }
    let mse = sse as f64 / n as f64;
    10.0 * (255.0f64 * 255.0 / mse).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn y4m_file(header: &str, frames: &[Vec<u8>]) -> Vec<u8> {
        let mut data = header.as_bytes().to_vec();
        data.push(b'\n');
        for f in frames {
            data.extend_from_slice(b"FRAME\n");
            data.extend_from_slice(f);
        }
        data
    }

    #[test]
    fn y4m_mono_single_frame() {
        let data = y4m_file("YUV4MPEG2 W16 H16 F25:1 Cmono", &[vec![0x80; 256]]);
        let seq = read_y4m_bytes(&data).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.width(), 16);
        assert_eq!(seq.height(), 16);
        assert_eq!(seq.frame_rate(), 25.0);
        assert!(seq.frame(0).samples().iter().all(|&s| s == 128));
    }

    #[test]
    fn y4m_rejects_non_multiple_of_16() {
        let data = y4m_file("YUV4MPEG2 W15 H16 F25:1 Cmono", &[vec![0x80; 240]]);
        assert!(matches!(read_y4m_bytes(&data), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn y4m_420_skips_chroma() {
        // 16x16 luma + two 8x8 chroma planes per frame.
        let mut payload = vec![10u8; 256];
        payload.extend(vec![99u8; 64]);
        payload.extend(vec![77u8; 64]);
        let data = y4m_file(
            "YUV4MPEG2 W16 H16 F30:1 C420jpeg",
            &[payload.clone(), payload],
        );
        let seq = read_y4m_bytes(&data).unwrap();
        assert_eq!(seq.len(), 2);
        assert!(seq
            .frames()
            .iter()
            .all(|f| f.samples().iter().all(|&s| s == 10)));
    }

    #[test]
    fn y4m_default_chroma_is_420() {
        let mut payload = vec![10u8; 256];
        payload.extend(vec![0u8; 128]);
        let data = y4m_file("YUV4MPEG2 W16 H16 F25:1", &[payload]);
        assert_eq!(read_y4m_bytes(&data).unwrap().len(), 1);
    }

    #[test]
    fn y4m_bad_magic() {
        assert!(matches!(
            read_y4m_bytes(b"JUNKMPEG2 W16 H16\n"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn y4m_unsupported_chroma() {
        let data = y4m_file("YUV4MPEG2 W16 H16 C444", &[vec![0; 256 * 3]]);
        assert!(matches!(read_y4m_bytes(&data), Err(Error::Unsupported(_))));
    }

    #[test]
    fn y4m_truncated_payload() {
        let data = y4m_file("YUV4MPEG2 W16 H16 Cmono", &[vec![0x80; 255]]);
        assert!(matches!(read_y4m_bytes(&data), Err(Error::Io(_))));
    }

    #[test]
    fn raw_round_trip_and_undersized_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zeros.raw");
        std::fs::write(&path, vec![0u8; 512]).unwrap();
        let seq = read_raw(&path, 16, 16, 2).unwrap();
        assert_eq!(seq.len(), 2);
        assert!(seq.frames().iter().all(|f| f.samples().iter().all(|&s| s == 0)));

        std::fs::write(&path, vec![0u8; 511]).unwrap();
        assert!(matches!(read_raw(&path, 16, 16, 2), Err(Error::Io(_))));
    }

    #[test]
    fn synth_pixel_formula() {
        let seq = synth_sequence(128, 128, 2).unwrap();
        // Base value outside the square at the origin.
        assert_eq!(seq.frame(0).get(0, 0), 0);
        // Inside the square at t=0 (square corner (8, 8)).
        assert_eq!(seq.frame(0).get(10, 10), 220);
        // Square has moved to (10, 9) at t=1 and still covers (10, 10).
        assert_eq!(seq.frame(1).get(10, 10), 220);
    }

    #[test]
    fn synth_is_pure() {
        let a = synth_sequence(64, 64, 5).unwrap();
        let b = synth_sequence(64, 64, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn psnr_cases() {
        let a = Frame::constant(16, 16, 100).unwrap();
        assert_eq!(psnr_frame(&a, &a).unwrap(), f64::INFINITY);

        let b = Frame::constant(16, 16, 101).unwrap();
        let db = psnr_frame(&a, &b).unwrap();
        assert!((db - 48.1308).abs() < 1e-3, "got {db}");

        let c = Frame::constant(16, 16, 0).unwrap();
        let d = Frame::constant(16, 16, 255).unwrap();
        assert_eq!(psnr_frame(&c, &d).unwrap(), 0.0);

        let e = Frame::constant(32, 16, 0).unwrap();
        assert!(psnr_frame(&a, &e).is_err());
    }

    proptest! {
        #[test]
        fn raw_write_read_identity(frames in prop::collection::vec(
            prop::collection::vec(any::<u8>(), 256..=256), 1..4))
        {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("seq.raw");
            let seq = Sequence::new(
                frames.into_iter().map(|s| Frame::new(16, 16, s).unwrap()).collect(),
                25.0,
            ).unwrap();
            let written = write_raw(&seq, &path).unwrap();
            prop_assert_eq!(written, seq.len() * 256);
            let back = read_raw(&path, 16, 16, seq.len()).unwrap();
            prop_assert_eq!(back.frames(), seq.frames());
        }

        #[test]
        fn psnr_symmetric(xs in prop::collection::vec(any::<u8>(), 256), ys in prop::collection::vec(any::<u8>(), 256)) {
            let a = Frame::new(16, 16, xs).unwrap();
            let b = Frame::new(16, 16, ys).unwrap();
            prop_assert_eq!(
                psnr_frame(&a, &b).unwrap().to_bits(),
                psnr_frame(&b, &a).unwrap().to_bits()
            );
        }
    }
}
