//! The deterministic block codec.
//!
//! Frames are coded as 16x16 blocks that either carry one prediction mode
//! or split into four independently predicted 8x8 quadrants; transforms
//! are always 8x8. The encoder picks decisions by exact-bit
//! rate-distortion search, and every stage is integer arithmetic with
//! fixed rounding, so encoder and decoder agree sample-exactly and two
//! runs on the same input produce byte-identical streams.

mod predict;
mod rd;
mod syntax;
mod transform;

pub use predict::{motion_search, predict, sad};
pub(crate) use rd::{levels_from_prediction, reconstruct_unit};
pub use rd::{apply_decisions, decode_frame, rd_encode_frame};
pub use syntax::{
    decode_decision_layer, decode_residual_layer, encode_decision_layer, encode_residual_layer,
};
pub use transform::{dequantize, fwd_transform, inv_transform, quantize, zigzag, zigzag_inverse};

use crate::error::{Error, Result};
use crate::media_io::{Frame, Sequence};

/// Quantization parameters: the control knob trading bit rate for quality.
///
/// `step` grows geometrically, doubling every 6 QP; `lambda = step^2 / 16`
/// weights bits against squared error in the rate-distortion cost. Costs
/// are compared as `16 * ssd + step^2 * bits` so the comparison stays in
/// exact integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantParams {
    qp: u8,
    step: i32,
}

impl QuantParams {
    pub fn new(qp: u8) -> Result<Self> {
        Ok(Self {
            qp,
            step: step_of_qp(qp)?,
        })
    }

    pub fn qp(&self) -> u8 {
        self.qp
    }

    pub fn step(&self) -> i32 {
        self.step
    }

    /// Rate-distortion cost scaled by 16: `16 * ssd + step^2 * bits`.
    /// Minimizing this is exactly minimizing `ssd + lambda * bits`.
    pub fn rd_cost(&self, ssd: u64, bits: u64) -> u64 {
        16 * ssd + (self.step as u64) * (self.step as u64) * bits
    }
}

/// Quantizer step for a QP in [0, 51]: `max(1, round(2^(qp/6)))` with
/// ties rounded away from zero.
pub fn step_of_qp(qp: u8) -> Result<i32> {
    if qp > 51 {
        return Err(Error::InvalidArgument(format!("qp {qp} outside [0, 51]")));
    }
    let step = (2f64.powf(qp as f64 / 6.0)).round() as i32;
    Ok(step.max(1))
}

/// Integer-pel motion vector, each component in [-8, 8].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MotionVector {
    pub dx: i8,
    pub dy: i8,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { dx: 0, dy: 0 };

    pub const fn new(dx: i8, dy: i8) -> Self {
        Self { dx, dy }
    }

    pub fn in_range(&self) -> bool {
        (-8..=8).contains(&self.dx) && (-8..=8).contains(&self.dy)
    }
}

/// Prediction mode of one part (a whole 16x16 block or an 8x8 quadrant).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredMode {
    /// Mean of the available reconstructed top and left neighbors,
    /// 128 when there are none.
    IntraDc,
    /// Left neighbor column copied across the part.
    IntraH,
    /// Top neighbor row copied down the part.
    IntraV,
    /// Reference block displaced by the motion vector.
    Inter(MotionVector),
}

impl PredMode {
    /// Tie-break rank: IntraDc < IntraH < IntraV < Inter.
    pub fn rank(&self) -> u8 {
        match self {
            PredMode::IntraDc => 0,
            PredMode::IntraH => 1,
            PredMode::IntraV => 2,
            PredMode::Inter(_) => 3,
        }
    }

    pub fn is_inter(&self) -> bool {
        matches!(self, PredMode::Inter(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameType {
    Intra,
    Predicted,
}

impl FrameType {
    pub fn code(&self) -> u8 {
        match self {
            FrameType::Intra => 0,
            FrameType::Predicted => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(FrameType::Intra),
            1 => Ok(FrameType::Predicted),
            other => Err(Error::Corruption(format!("unknown frame type {other}"))),
        }
    }
}

/// Coding decision for one 16x16 block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockDecision {
    /// One mode shared by the block's four 8x8 transform blocks.
    Whole(PredMode),
    /// Independent mode per 8x8 quadrant, raster order.
    Split([PredMode; 4]),
}

/// All coding decisions of one frame: everything the encoder searches for
/// and a guided transcoder reuses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameDecisions {
    pub frame_type: FrameType,
    /// One decision per 16x16 block, raster order.
    pub blocks: Vec<BlockDecision>,
}

impl FrameDecisions {
    /// Checks block count and that intra frames carry no inter modes.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let expected = (width / 16) * (height / 16);
        if self.blocks.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} block decisions for a {}x{} frame (expected {expected})",
                self.blocks.len(),
                width,
                height
            )));
        }
        if self.frame_type == FrameType::Intra {
            let has_inter = self.blocks.iter().any(|b| match b {
                BlockDecision::Whole(m) => m.is_inter(),
                BlockDecision::Split(ms) => ms.iter().any(|m| m.is_inter()),
            });
            if has_inter {
                return Err(Error::Corruption(
                    "intra frame contains an inter prediction mode".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Quantized transform coefficient levels of one frame.
///
/// One entry per 8x8 transform block in coding order: for each 16x16 block
/// in raster order, its four quadrants in raster order. Levels are stored
/// in zig-zag scan order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualLevels {
    pub blocks: Vec<[i32; 64]>,
}

impl ResidualLevels {
    pub fn new_empty(width: usize, height: usize) -> Self {
        Self {
            blocks: vec![[0i32; 64]; (width / 16) * (height / 16) * 4],
        }
    }

    pub fn nonzero_fraction(&self) -> f64 {
        let total = self.blocks.len() * 64;
        if total == 0 {
            return 0.0;
        }
        let nonzero: usize = self
            .blocks
            .iter()
            .map(|b| b.iter().filter(|&&l| l != 0).count())
            .sum();
        nonzero as f64 / total as f64
    }
}

/// One encoded frame: the decision layer plus the residual layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFrame {
    pub decisions: FrameDecisions,
    pub levels: ResidualLevels,
}

/// Encodes a sequence with closed GOPs: frame 0 of each GOP is intra, the
/// rest are predicted from the immediately previous reconstructed frame.
/// Returns the encoded frames and the reconstruction the decoder will see.
pub fn encode_sequence(
    source: &Sequence,
    qp: u8,
    gop_len: u8,
) -> Result<(Vec<EncodedFrame>, Sequence)> {
    if gop_len == 0 {
        return Err(Error::InvalidArgument("gop length must be at least 1".into()));
    }
    let q = QuantParams::new(qp)?;
    let mut encoded = Vec::with_capacity(source.len());
    let mut recon_frames: Vec<Frame> = Vec::with_capacity(source.len());
    for (t, frame) in source.frames().iter().enumerate() {
        let reference = if t % gop_len as usize == 0 {
            None
        } else {
            Some(&recon_frames[t - 1])
        };
        let (decisions, levels, recon) = rd_encode_frame(frame, reference, q)?;
        encoded.push(EncodedFrame { decisions, levels });
        recon_frames.push(recon);
    }
    let recon = Sequence::new(recon_frames, source.frame_rate())?;
    Ok((encoded, recon))
}

/// Decodes a run of encoded frames with the same GOP structure the
/// encoder used.
pub fn decode_frames(
    frames: &[EncodedFrame],
    width: usize,
    height: usize,
    gop_len: u8,
    q: QuantParams,
) -> Result<Sequence> {
    if gop_len == 0 {
        return Err(Error::InvalidArgument("gop length must be at least 1".into()));
    }
    if frames.is_empty() {
        return Err(Error::InvalidArgument("no frames to decode".into()));
    }
    let mut out: Vec<Frame> = Vec::with_capacity(frames.len());
    for (t, ef) in frames.iter().enumerate() {
        let expected = if t % gop_len as usize == 0 {
            FrameType::Intra
        } else {
            FrameType::Predicted
        };
        if ef.decisions.frame_type != expected {
            return Err(Error::Corruption(format!(
                "frame {t} has type {:?}, GOP structure requires {:?}",
                ef.decisions.frame_type, expected
            )));
        }
        let reference = if ef.decisions.frame_type == FrameType::Intra {
            None
        } else {
            Some(&out[t - 1])
        };
        let frame = decode_frame(&ef.decisions, &ef.levels, reference, width, height, q)?;
        out.push(frame);
    }
    Sequence::new(out, 25.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_table_powers_of_two() {
        assert_eq!(step_of_qp(0).unwrap(), 1);
        assert_eq!(step_of_qp(6).unwrap(), 2);
        assert_eq!(step_of_qp(12).unwrap(), 4);
        assert_eq!(step_of_qp(18).unwrap(), 8);
        assert_eq!(step_of_qp(24).unwrap(), 16);
        assert_eq!(step_of_qp(30).unwrap(), 32);
    }

    #[test]
    fn step_table_rounded_points() {
        // round(2^(13/6)) = round(4.4898) and round(2^8.5) = round(362.04),
        // frozen from a high-precision evaluation.
        assert_eq!(step_of_qp(13).unwrap(), 4);
        assert_eq!(step_of_qp(51).unwrap(), 362);
        assert!(step_of_qp(52).is_err());
    }

    #[test]
    fn rd_cost_matches_lambda_definition() {
        let q = QuantParams::new(12).unwrap();
        // step 4, lambda = 1: cost ordering of (ssd, bits) pairs must match
        // ssd + bits exactly when lambda is 1.
        assert_eq!(q.rd_cost(10, 3), 16 * 10 + 16 * 3);
        assert!(q.rd_cost(10, 3) < q.rd_cost(10, 4));
        assert!(q.rd_cost(10, 3) < q.rd_cost(11, 3));
    }
}
