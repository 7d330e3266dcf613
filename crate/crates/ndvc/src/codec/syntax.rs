//! Bit syntax of the decision and residual layers.
//!
//! The decision layer codes, per 16x16 block: a split flag, then one mode
//! tag per part (exp-Golomb, numbered per frame type so the common mode is
//! cheapest), and for inter parts the motion vector as signed differences
//! against the left neighbor part's vector. The residual layer codes each
//! 8x8 transform block as a nonzero count followed by (zero-run, level)
//! pairs in zig-zag order. Both layers are byte-aligned per frame.
//!
//! The same routines price candidates during the rate-distortion search,
//! so search costs are exactly the serialized bits.

use crate::bitio::{decode_se, decode_ue, encode_se, encode_ue, BitSink, BitSource};
use crate::error::{Error, Result};

use super::{BlockDecision, FrameDecisions, FrameType, MotionVector, PredMode, ResidualLevels};

fn mode_tag(frame_type: FrameType, mode: PredMode) -> u32 {
    match (frame_type, mode) {
        (FrameType::Intra, PredMode::IntraDc) => 0,
        (FrameType::Intra, PredMode::IntraH) => 1,
        (FrameType::Intra, PredMode::IntraV) => 2,
        (FrameType::Intra, PredMode::Inter(_)) => unreachable!("inter mode in intra frame"),
        (FrameType::Predicted, PredMode::Inter(_)) => 0,
        (FrameType::Predicted, PredMode::IntraDc) => 1,
        (FrameType::Predicted, PredMode::IntraH) => 2,
        (FrameType::Predicted, PredMode::IntraV) => 3,
    }
}

fn mode_from_tag(frame_type: FrameType, tag: u32, mv: Option<MotionVector>) -> Result<PredMode> {
    match (frame_type, tag) {
        (FrameType::Intra, 0) => Ok(PredMode::IntraDc),
        (FrameType::Intra, 1) => Ok(PredMode::IntraH),
        (FrameType::Intra, 2) => Ok(PredMode::IntraV),
        (FrameType::Predicted, 0) => Ok(PredMode::Inter(mv.expect("mv decoded for inter tag"))),
        (FrameType::Predicted, 1) => Ok(PredMode::IntraDc),
        (FrameType::Predicted, 2) => Ok(PredMode::IntraH),
        (FrameType::Predicted, 3) => Ok(PredMode::IntraV),
        (ft, tag) => Err(Error::Corruption(format!(
            "mode tag {tag} is not valid in a {ft:?} frame"
        ))),
    }
}

/// Motion-vector prediction context: the mode of every finalized 8x8 cell,
/// filled in coding order. A part's vector is predicted from the part
/// covering the pixel just left of its top-left corner; zero when that
/// part does not exist or is not inter.
#[derive(Debug, Clone)]
pub struct MvPredCtx {
    cells_w: usize,
    cells: Vec<Option<PredMode>>,
}

impl MvPredCtx {
    pub fn new(width: usize, height: usize) -> Self {
        let cells_w = width / 8;
        Self {
            cells_w,
            cells: vec![None; cells_w * (height / 8)],
        }
    }

    pub fn mv_pred(&self, px: usize, py: usize) -> MotionVector {
        if px == 0 {
            return MotionVector::ZERO;
        }
        let cell = (py / 8) * self.cells_w + (px - 1) / 8;
        match self.cells[cell] {
            Some(PredMode::Inter(mv)) => mv,
            _ => MotionVector::ZERO,
        }
    }

    pub fn record(&mut self, px: usize, py: usize, size: usize, mode: PredMode) {
        for cy in 0..size / 8 {
            for cx in 0..size / 8 {
                let cell = (py / 8 + cy) * self.cells_w + px / 8 + cx;
                self.cells[cell] = Some(mode);
            }
        }
    }
}

/// Codes one part's mode tag (and motion delta) and records it in the
/// context. Shared by the serializer and the search's bit pricing.
pub fn encode_part(
    sink: &mut BitSink,
    ctx: &mut MvPredCtx,
    frame_type: FrameType,
    px: usize,
    py: usize,
    size: usize,
    mode: PredMode,
) {
    encode_ue(sink, mode_tag(frame_type, mode));
    if let PredMode::Inter(mv) = mode {
        let pred = ctx.mv_pred(px, py);
        encode_se(sink, mv.dx as i32 - pred.dx as i32);
        encode_se(sink, mv.dy as i32 - pred.dy as i32);
    }
    ctx.record(px, py, size, mode);
}

fn decode_part(
    source: &mut BitSource,
    ctx: &mut MvPredCtx,
    frame_type: FrameType,
    px: usize,
    py: usize,
    size: usize,
) -> Result<PredMode> {
    let tag = decode_ue(source)?;
    let mode = if frame_type == FrameType::Predicted && tag == 0 {
        let pred = ctx.mv_pred(px, py);
        let dx = decode_se(source)? + pred.dx as i32;
        let dy = decode_se(source)? + pred.dy as i32;
        if !(-8..=8).contains(&dx) || !(-8..=8).contains(&dy) {
            return Err(Error::Corruption(format!(
                "decoded motion vector ({dx}, {dy}) outside [-8, 8]"
            )));
        }
        mode_from_tag(
            frame_type,
            tag,
            Some(MotionVector::new(dx as i8, dy as i8)),
        )?
    } else {
        mode_from_tag(frame_type, tag, None)?
    };
    ctx.record(px, py, size, mode);
    Ok(mode)
}

/// Serializes a frame's decision layer (byte-aligned).
pub fn encode_decision_layer(decisions: &FrameDecisions, width: usize, height: usize) -> Vec<u8> {
    let mut sink = BitSink::new();
    let mut ctx = MvPredCtx::new(width, height);
    let blocks_w = width / 16;
    for (i, block) in decisions.blocks.iter().enumerate() {
        let bx = (i % blocks_w) * 16;
        let by = (i / blocks_w) * 16;
        match block {
            BlockDecision::Whole(mode) => {
                sink.write_bit(false);
                encode_part(&mut sink, &mut ctx, decisions.frame_type, bx, by, 16, *mode);
            }
            BlockDecision::Split(modes) => {
                sink.write_bit(true);
                for (q, mode) in modes.iter().enumerate() {
                    let qx = bx + (q % 2) * 8;
                    let qy = by + (q / 2) * 8;
                    encode_part(&mut sink, &mut ctx, decisions.frame_type, qx, qy, 8, *mode);
                }
            }
        }
    }
    sink.into_bytes()
}

/// Parses a frame's decision layer. Rejects trailing garbage beyond
/// alignment padding.
pub fn decode_decision_layer(
    bytes: &[u8],
    width: usize,
    height: usize,
    frame_type: FrameType,
) -> Result<FrameDecisions> {
    let mut source = BitSource::new(bytes);
    let mut ctx = MvPredCtx::new(width, height);
    let blocks_w = width / 16;
    let block_count = blocks_w * (height / 16);
    let mut blocks = Vec::with_capacity(block_count);
    for i in 0..block_count {
        let bx = (i % blocks_w) * 16;
        let by = (i / blocks_w) * 16;
        if source.read_bit()? {
            let mut modes = [PredMode::IntraDc; 4];
            for (q, slot) in modes.iter_mut().enumerate() {
                let qx = bx + (q % 2) * 8;
                let qy = by + (q / 2) * 8;
                *slot = decode_part(&mut source, &mut ctx, frame_type, qx, qy, 8)?;
            }
            blocks.push(BlockDecision::Split(modes));
        } else {
            blocks.push(BlockDecision::Whole(decode_part(
                &mut source, &mut ctx, frame_type, bx, by, 16,
            )?));
        }
    }
    if source.bits_remaining() >= 8 {
        return Err(Error::Corruption(
            "trailing bytes after decision layer".into(),
        ));
    }
    Ok(FrameDecisions { frame_type, blocks })
}

/// Codes one 8x8 transform block's levels (zig-zag order): nonzero count,
/// then (zero-run, level) pairs.
pub fn encode_block_levels(sink: &mut BitSink, levels: &[i32; 64]) {
    let nonzero = levels.iter().filter(|&&l| l != 0).count() as u32;
    encode_ue(sink, nonzero);
    let mut run = 0u32;
    for &level in levels {
        if level == 0 {
            run += 1;
        } else {
            encode_ue(sink, run);
            encode_se(sink, level);
            run = 0;
        }
    }
}

pub fn decode_block_levels(source: &mut BitSource) -> Result<[i32; 64]> {
    let mut levels = [0i32; 64];
    let nonzero = decode_ue(source)?;
    if nonzero > 64 {
        return Err(Error::Corruption(format!(
            "residual block claims {nonzero} nonzero levels"
        )));
    }
    let mut pos: i64 = -1;
    for _ in 0..nonzero {
        let run = decode_ue(source)? as i64;
        pos += run + 1;
        if pos >= 64 {
            return Err(Error::Corruption("zero-run past end of block".into()));
        }
        let level = decode_se(source)?;
        if level == 0 || level.unsigned_abs() >= 1 << 15 {
            return Err(Error::Corruption(format!(
                "residual level {level} outside the coded range"
            )));
        }
        levels[pos as usize] = level;
    }
    Ok(levels)
}

/// Serializes a frame's residual (or delta-coefficient) layer.
pub fn encode_residual_layer(levels: &ResidualLevels) -> Vec<u8> {
    let mut sink = BitSink::new();
    for block in &levels.blocks {
        encode_block_levels(&mut sink, block);
    }
    sink.into_bytes()
}

pub fn decode_residual_layer(bytes: &[u8], width: usize, height: usize) -> Result<ResidualLevels> {
    let mut source = BitSource::new(bytes);
    let block_count = (width / 16) * (height / 16) * 4;
    let mut blocks = Vec::with_capacity(block_count);
    for _ in 0..block_count {
        blocks.push(decode_block_levels(&mut source)?);
    }
    if source.bits_remaining() >= 8 {
        return Err(Error::Corruption(
            "trailing bytes after residual layer".into(),
        ));
    }
    Ok(ResidualLevels { blocks })
}
