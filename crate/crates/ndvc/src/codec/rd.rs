//! Rate-distortion search, decision application, and frame decoding.
//!
//! The three entry points share one block-coding pipeline, which is what
//! makes the codec drift-free: the encoder's reconstruction is produced by
//! the same arithmetic the decoder runs, and `rd_encode_frame` is exactly
//! "search for decisions, then `apply_decisions`".

use crate::bitio::BitSink;
use crate::error::{Error, Result};
use crate::media_io::Frame;

use super::predict::{motion_search, predict};
use super::syntax::{encode_block_levels, encode_part, MvPredCtx};
use super::transform::{dequantize, fwd_transform, inv_transform, quantize, zigzag, zigzag_inverse};
use super::{BlockDecision, FrameDecisions, FrameType, PredMode, QuantParams, ResidualLevels};

/// Dequantizes, inverse-transforms, and writes `pred + residual` clamped
/// to [0, 255] into the reconstruction. Encoder and decoder both end every
/// transform block here.
pub(crate) fn reconstruct_unit(
    recon: &mut Frame,
    px: usize,
    py: usize,
    pred: &[u8],
    levels_zz: &[i32; 64],
    step: i32,
) {
    let scan = zigzag_inverse(levels_zz);
    let mut coeffs = [0i32; 64];
    for i in 0..64 {
        coeffs[i] = dequantize(scan[i], step);
    }
    let residual = inv_transform(&coeffs);
    for y in 0..8 {
        for x in 0..8 {
            let v = (pred[y * 8 + x] as i32 + residual[y * 8 + x]).clamp(0, 255);
            recon.set(px + x, py + y, v as u8);
        }
    }
}

/// Transform-and-quantize of one 8x8 block of `target` against a given
/// prediction: the zig-zag levels that code `target - pred`.
pub(crate) fn levels_from_prediction(
    target: &Frame,
    pred: &[u8],
    px: usize,
    py: usize,
    step: i32,
) -> [i32; 64] {
    let mut residual = [0i32; 64];
    for y in 0..8 {
        for x in 0..8 {
            residual[y * 8 + x] = target.get(px + x, py + y) as i32 - pred[y * 8 + x] as i32;
        }
    }
    let coeffs = fwd_transform(&residual);
    let mut raster = [0i32; 64];
    for i in 0..64 {
        raster[i] = quantize(coeffs[i], step);
    }
    zigzag(&raster)
}

/// Codes one 8x8 transform block: predict, transform the residual against
/// `source`, quantize, and reconstruct. Returns the zig-zag levels.
fn code_unit(
    source: &Frame,
    recon: &mut Frame,
    reference: Option<&Frame>,
    mode: PredMode,
    px: usize,
    py: usize,
    step: i32,
) -> Result<[i32; 64]> {
    let pred = predict(mode, px, py, 8, recon, reference)?;
    let levels = levels_from_prediction(source, &pred, px, py, step);
    reconstruct_unit(recon, px, py, &pred, &levels, step);
    Ok(levels)
}

/// Decodes one 8x8 transform block from its levels.
fn decode_unit(
    recon: &mut Frame,
    reference: Option<&Frame>,
    mode: PredMode,
    px: usize,
    py: usize,
    levels_zz: &[i32; 64],
    step: i32,
) -> Result<()> {
    let pred = predict(mode, px, py, 8, recon, reference).map_err(as_corruption)?;
    reconstruct_unit(recon, px, py, &pred, levels_zz, step);
    Ok(())
}

/// In a decode or apply path, an illegal mode is bad stream data rather
/// than a caller bug.
fn as_corruption(e: Error) -> Error {
    match e {
        Error::ModeInvalid(msg) => Error::Corruption(msg),
        other => other,
    }
}

/// Offsets of a 16x16 block's transform quadrants, raster order.
const QUADS: [(usize, usize); 4] = [(0, 0), (8, 0), (0, 8), (8, 8)];

/// Codes a whole part (16x16: four quadrants sharing the mode; 8x8: one
/// quadrant `quad`) and stores levels into `out[quad]`.
fn code_part(
    source: &Frame,
    recon: &mut Frame,
    reference: Option<&Frame>,
    mode: PredMode,
    px: usize,
    py: usize,
    size: usize,
    step: i32,
    out: &mut [[i32; 64]; 4],
    quad: usize,
) -> Result<()> {
    if size == 16 {
        for (q, (ox, oy)) in QUADS.iter().enumerate() {
            out[q] = code_unit(source, recon, reference, mode, px + ox, py + oy, step)?;
        }
    } else {
        out[quad] = code_unit(source, recon, reference, mode, px, py, step)?;
    }
    Ok(())
}

fn save_region(frame: &Frame, bx: usize, by: usize) -> [u8; 256] {
    let mut out = [0u8; 256];
    for y in 0..16 {
        for x in 0..16 {
            out[y * 16 + x] = frame.get(bx + x, by + y);
        }
    }
    out
}

fn restore_region(frame: &mut Frame, bx: usize, by: usize, saved: &[u8; 256]) {
    for y in 0..16 {
        for x in 0..16 {
            frame.set(bx + x, by + y, saved[y * 16 + x]);
        }
    }
}

fn ssd_region(source: &Frame, recon: &Frame, px: usize, py: usize, size: usize) -> u64 {
    let mut total = 0u64;
    for y in 0..size {
        for x in 0..size {
            let d = source.get(px + x, py + y) as i64 - recon.get(px + x, py + y) as i64;
            total += (d * d) as u64;
        }
    }
    total
}

/// Legal candidate modes for a part, in tie-break order. Inter carries the
/// motion search result for this exact part.
fn part_candidates(
    source: &Frame,
    reference: Option<&Frame>,
    frame_type: FrameType,
    px: usize,
    py: usize,
    size: usize,
) -> Vec<PredMode> {
    let mut modes = vec![PredMode::IntraDc];
    if px > 0 {
        modes.push(PredMode::IntraH);
    }
    if py > 0 {
        modes.push(PredMode::IntraV);
    }
    if frame_type == FrameType::Predicted {
        let reference = reference.expect("predicted frame has a reference");
        modes.push(PredMode::Inter(motion_search(
            source, reference, px, py, size,
        )));
    }
    modes
}

/// Exact serialized bit count of a part's decision syntax under `ctx`.
fn part_bits(ctx: &MvPredCtx, frame_type: FrameType, px: usize, py: usize, size: usize, mode: PredMode) -> u64 {
    let mut sink = BitSink::new();
    let mut scratch = ctx.clone();
    encode_part(&mut sink, &mut scratch, frame_type, px, py, size, mode);
    sink.bit_len() as u64
}

fn levels_bits(levels: &[i32; 64]) -> u64 {
    let mut sink = BitSink::new();
    encode_block_levels(&mut sink, levels);
    sink.bit_len() as u64
}

struct Candidate {
    decision: BlockDecision,
    levels: [[i32; 64]; 4],
    region: [u8; 256],
    cost: u64,
    /// 0 = no-split arm, 1 = split arm; ties prefer the smaller key.
    tie_key: (u8, [u8; 4]),
}

fn better(candidate: &Candidate, incumbent: &Option<Candidate>) -> bool {
    match incumbent {
        None => true,
        Some(best) => {
            candidate.cost < best.cost
                || (candidate.cost == best.cost && candidate.tie_key < best.tie_key)
        }
    }
}

/// Encodes one frame by exhaustive rate-distortion choice per 16x16 block.
///
/// Returns the decisions, the quantized levels, and the reconstruction.
/// The reconstruction equals what [`decode_frame`] produces from the other
/// two outputs, and the function is a pure function of its inputs.
pub fn rd_encode_frame(
    source: &Frame,
    reference: Option<&Frame>,
    q: QuantParams,
) -> Result<(FrameDecisions, ResidualLevels, Frame)> {
    if let Some(r) = reference {
        if !r.same_shape(source) {
            return Err(Error::ShapeMismatch(format!(
                "reference {}x{} vs source {}x{}",
                r.width(),
                r.height(),
                source.width(),
                source.height()
            )));
        }
    }
    let (w, h) = (source.width(), source.height());
    let frame_type = if reference.is_some() {
        FrameType::Predicted
    } else {
        FrameType::Intra
    };
    let step = q.step();
    let mut recon = Frame::constant(w, h, 0)?;
    let mut ctx = MvPredCtx::new(w, h);
    let mut blocks = Vec::with_capacity((w / 16) * (h / 16));
    let mut all_levels = Vec::with_capacity((w / 16) * (h / 16) * 4);

    for by in (0..h).step_by(16) {
        for bx in (0..w).step_by(16) {
            let untouched = save_region(&recon, bx, by);
            let mut best: Option<Candidate> = None;

            // No-split arm: one mode across the block.
            for mode in part_candidates(source, reference, frame_type, bx, by, 16) {
                let mut levels = [[0i32; 64]; 4];
                code_part(source, &mut recon, reference, mode, bx, by, 16, step, &mut levels, 0)?;
                let ssd = ssd_region(source, &recon, bx, by, 16);
                let bits = 1
                    + part_bits(&ctx, frame_type, bx, by, 16, mode)
                    + levels.iter().map(levels_bits).sum::<u64>();
                let candidate = Candidate {
                    decision: BlockDecision::Whole(mode),
                    levels,
                    region: save_region(&recon, bx, by),
                    cost: q.rd_cost(ssd, bits),
                    tie_key: (0, [mode.rank(), 0, 0, 0]),
                };
                restore_region(&mut recon, bx, by, &untouched);
                if better(&candidate, &best) {
                    best = Some(candidate);
                }
            }

            // Split arm: best mode per quadrant, chosen greedily in raster
            // order against the reconstruction the earlier quadrants left.
            {
                let mut split_ctx = ctx.clone();
                let mut modes = [PredMode::IntraDc; 4];
                let mut levels = [[0i32; 64]; 4];
                let mut ssd_total = 0u64;
                let mut bits_total = 1u64; // split flag
                for (quad, (ox, oy)) in QUADS.iter().enumerate() {
                    let (qx, qy) = (bx + ox, by + oy);
                    let mut q_best: Option<(u64, u8, PredMode, [i32; 64], [u8; 256])> = None;
                    let before = save_region(&recon, bx, by);
                    for mode in part_candidates(source, reference, frame_type, qx, qy, 8) {
                        let mut lv = [[0i32; 64]; 4];
                        code_part(source, &mut recon, reference, mode, qx, qy, 8, step, &mut lv, quad)?;
                        let ssd = ssd_region(source, &recon, qx, qy, 8);
                        let bits = part_bits(&split_ctx, frame_type, qx, qy, 8, mode)
                            + levels_bits(&lv[quad]);
                        let cost = q.rd_cost(ssd, bits);
                        let rank = mode.rank();
                        let wins = match &q_best {
                            None => true,
                            Some((c, r, ..)) => cost < *c || (cost == *c && rank < *r),
                        };
                        if wins {
                            q_best = Some((cost, rank, mode, lv[quad], save_region(&recon, bx, by)));
                        }
                        restore_region(&mut recon, bx, by, &before);
                    }
                    let (_, _, mode, lv, region) = q_best.expect("IntraDc is always legal");
                    restore_region(&mut recon, bx, by, &region);
                    modes[quad] = mode;
                    levels[quad] = lv;
                    ssd_total += ssd_region(source, &recon, qx, qy, 8);
                    bits_total += part_bits(&split_ctx, frame_type, qx, qy, 8, mode)
                        + levels_bits(&lv);
                    // Commit the quadrant to the local syntax context.
                    let mut sink = BitSink::new();
                    encode_part(&mut sink, &mut split_ctx, frame_type, qx, qy, 8, mode);
                }
                let candidate = Candidate {
                    decision: BlockDecision::Split(modes),
                    levels,
                    region: save_region(&recon, bx, by),
                    cost: q.rd_cost(ssd_total, bits_total),
                    tie_key: (1, modes.map(|m| m.rank())),
                };
                restore_region(&mut recon, bx, by, &untouched);
                if better(&candidate, &best) {
                    best = Some(candidate);
                }
            }

            let winner = best.expect("at least IntraDc was evaluated");
            restore_region(&mut recon, bx, by, &winner.region);
            let mut sink = BitSink::new();
            match winner.decision {
                BlockDecision::Whole(mode) => {
                    encode_part(&mut sink, &mut ctx, frame_type, bx, by, 16, mode)
                }
                BlockDecision::Split(modes) => {
                    for (quad, (ox, oy)) in QUADS.iter().enumerate() {
                        encode_part(&mut sink, &mut ctx, frame_type, bx + ox, by + oy, 8, modes[quad]);
                    }
                }
            }
            all_levels.extend_from_slice(&winner.levels);
            blocks.push(winner.decision);
        }
    }

    Ok((
        FrameDecisions { frame_type, blocks },
        ResidualLevels { blocks: all_levels },
        recon,
    ))
}

/// Recomputes residual levels and the reconstruction for fixed decisions:
/// the deterministic back half of the encoder, with no search.
pub fn apply_decisions(
    source_pixels: &Frame,
    reference: Option<&Frame>,
    decisions: &FrameDecisions,
    q: QuantParams,
) -> Result<(ResidualLevels, Frame)> {
    let (w, h) = (source_pixels.width(), source_pixels.height());
    decisions.validate(w, h).map_err(as_corruption)?;
    if decisions.frame_type == FrameType::Predicted && reference.is_none() {
        return Err(Error::Corruption(
            "predicted frame applied without a reference".into(),
        ));
    }
    if let Some(r) = reference {
        if !r.same_shape(source_pixels) {
            return Err(Error::ShapeMismatch(format!(
                "reference {}x{} vs source {}x{}",
                r.width(),
                r.height(),
                w,
                h
            )));
        }
    }
    let step = q.step();
    let mut recon = Frame::constant(w, h, 0)?;
    let mut all_levels = Vec::with_capacity((w / 16) * (h / 16) * 4);
    let blocks_w = w / 16;
    for (i, block) in decisions.blocks.iter().enumerate() {
        let bx = (i % blocks_w) * 16;
        let by = (i / blocks_w) * 16;
        let mut levels = [[0i32; 64]; 4];
        match block {
            BlockDecision::Whole(mode) => {
                code_part(source_pixels, &mut recon, reference, *mode, bx, by, 16, step, &mut levels, 0)
                    .map_err(as_corruption)?;
            }
            BlockDecision::Split(modes) => {
                for (quad, (ox, oy)) in QUADS.iter().enumerate() {
                    code_part(
                        source_pixels,
                        &mut recon,
                        reference,
                        modes[quad],
                        bx + ox,
                        by + oy,
                        8,
                        step,
                        &mut levels,
                        quad,
                    )
                    .map_err(as_corruption)?;
                }
            }
        }
        all_levels.extend_from_slice(&levels);
    }
    Ok((ResidualLevels { blocks: all_levels }, recon))
}

/// Reconstructs a frame from decisions and levels: prediction, dequantize,
/// inverse transform, clamp, in block raster order. Mirrors the encoder's
/// reconstruction loop exactly.
pub fn decode_frame(
    decisions: &FrameDecisions,
    levels: &ResidualLevels,
    reference: Option<&Frame>,
    width: usize,
    height: usize,
    q: QuantParams,
) -> Result<Frame> {
    decisions.validate(width, height).map_err(as_corruption)?;
    let expected_blocks = (width / 16) * (height / 16) * 4;
    if levels.blocks.len() != expected_blocks {
        return Err(Error::Corruption(format!(
            "{} residual blocks for a {}x{} frame (expected {expected_blocks})",
            levels.blocks.len(),
            width,
            height
        )));
    }
    if decisions.frame_type == FrameType::Predicted && reference.is_none() {
        return Err(Error::Corruption(
            "predicted frame decoded without a reference".into(),
        ));
    }
    let step = q.step();
    let mut recon = Frame::constant(width, height, 0)?;
    let blocks_w = width / 16;
    for (i, block) in decisions.blocks.iter().enumerate() {
        let bx = (i % blocks_w) * 16;
        let by = (i / blocks_w) * 16;
        match block {
            BlockDecision::Whole(mode) => {
                for (q_idx, (ox, oy)) in QUADS.iter().enumerate() {
                    decode_unit(
                        &mut recon,
                        reference,
                        *mode,
                        bx + ox,
                        by + oy,
                        &levels.blocks[i * 4 + q_idx],
                        step,
                    )?;
                }
            }
            BlockDecision::Split(modes) => {
                for (q_idx, (ox, oy)) in QUADS.iter().enumerate() {
                    decode_unit(
                        &mut recon,
                        reference,
                        modes[q_idx],
                        bx + ox,
                        by + oy,
                        &levels.blocks[i * 4 + q_idx],
                        step,
                    )?;
                }
            }
        }
    }
    Ok(recon)
}
