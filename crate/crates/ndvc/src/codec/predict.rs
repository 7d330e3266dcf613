//! Intra/inter prediction and exhaustive integer-pel motion search.

use crate::error::{Error, Result};
use crate::media_io::Frame;

use super::{MotionVector, PredMode};

/// Computes the prediction for a square part of side `size` (8 or 16) with
/// top-left pixel (`px`, `py`), returned row-major.
///
/// Intra modes read reconstructed neighbors from `recon` (the frame being
/// built, already final above and left of the part); inter reads the
/// displaced block from `reference`. Unavailable neighbors or out-of-frame
/// displacements are mode-invalid: the encoder's search never selects such
/// modes, and decoders treat them as corruption.
pub fn predict(
    mode: PredMode,
    px: usize,
    py: usize,
    size: usize,
    recon: &Frame,
    reference: Option<&Frame>,
) -> Result<Vec<u8>> {
    let (w, h) = (recon.width(), recon.height());
    debug_assert!(px + size <= w && py + size <= h);
    let mut pred = vec![0u8; size * size];
    match mode {
        PredMode::IntraDc => {
            let mut sum = 0u32;
            let mut count = 0u32;
            if py > 0 {
                for x in px..px + size {
                    sum += recon.get(x, py - 1) as u32;
                }
                count += size as u32;
            }
            if px > 0 {
                for y in py..py + size {
                    sum += recon.get(px - 1, y) as u32;
                }
                count += size as u32;
            }
            let dc = if count == 0 {
                128
            } else {
                ((sum + count / 2) / count) as u8
            };
            pred.fill(dc);
        }
        PredMode::IntraH => {
            if px == 0 {
                return Err(Error::ModeInvalid(format!(
                    "horizontal prediction at ({px}, {py}) has no left neighbor"
                )));
            }
            for y in 0..size {
                let v = recon.get(px - 1, py + y);
                pred[y * size..(y + 1) * size].fill(v);
            }
        }
        PredMode::IntraV => {
            if py == 0 {
                return Err(Error::ModeInvalid(format!(
                    "vertical prediction at ({px}, {py}) has no top neighbor"
                )));
            }
            for x in 0..size {
                let v = recon.get(px + x, py - 1);
                for y in 0..size {
                    pred[y * size + x] = v;
                }
            }
        }
        PredMode::Inter(mv) => {
            let reference = reference.ok_or_else(|| {
                Error::ModeInvalid("inter prediction without a reference frame".into())
            })?;
            if !mv.in_range() || !mv_in_frame(mv, px, py, size, w, h) {
                return Err(Error::ModeInvalid(format!(
                    "motion vector ({}, {}) leaves the frame at ({px}, {py})",
                    mv.dx, mv.dy
                )));
            }
            let sx = (px as i32 + mv.dx as i32) as usize;
            let sy = (py as i32 + mv.dy as i32) as usize;
            for y in 0..size {
                for x in 0..size {
                    pred[y * size + x] = reference.get(sx + x, sy + y);
                }
            }
        }
    }
    Ok(pred)
}

/// Whether the block displaced by `mv` lies fully inside a `w` x `h` frame.
pub fn mv_in_frame(mv: MotionVector, px: usize, py: usize, size: usize, w: usize, h: usize) -> bool {
    let x0 = px as i32 + mv.dx as i32;
    let y0 = py as i32 + mv.dy as i32;
    x0 >= 0 && y0 >= 0 && x0 + size as i32 <= w as i32 && y0 + size as i32 <= h as i32
}

/// Sum of absolute differences between a square source block and the
/// reference block displaced by (`dx`, `dy`).
pub fn sad(
    source: &Frame,
    reference: &Frame,
    px: usize,
    py: usize,
    size: usize,
    dx: i32,
    dy: i32,
) -> u32 {
    let sx = (px as i32 + dx) as usize;
    let sy = (py as i32 + dy) as usize;
    let mut total = 0u32;
    for y in 0..size {
        for x in 0..size {
            let a = source.get(px + x, py + y) as i32;
            let b = reference.get(sx + x, sy + y) as i32;
            total += a.abs_diff(b);
        }
    }
    total
}

/// Exhaustive integer-pel search over dx, dy in [-8, 8], restricted to
/// displacements that keep the block inside the reference frame, minimizing
/// SAD against the source block. Ties break toward smaller |dx| + |dy|,
/// then smaller dy, then smaller dx.
pub fn motion_search(
    source: &Frame,
    reference: &Frame,
    px: usize,
    py: usize,
    size: usize,
) -> MotionVector {
    let (w, h) = (reference.width(), reference.height());
    let mut best_mv = MotionVector::ZERO;
    let mut best = u32::MAX;
    let mut best_key = (u32::MAX, i32::MAX, i32::MAX);
    for dy in -8i32..=8 {
        for dx in -8i32..=8 {
            let mv = MotionVector::new(dx as i8, dy as i8);
            if !mv_in_frame(mv, px, py, size, w, h) {
                continue;
            }
            let cost = sad_bounded(source, reference, px, py, size, dx, dy, best);
            let key = (dx.unsigned_abs() + dy.unsigned_abs(), dy, dx);
            if cost < best || (cost == best && key < best_key) {
                best = cost;
                best_key = key;
                best_mv = mv;
            }
        }
    }
    best_mv
}

/// SAD with early abort: once the running sum exceeds `limit` the candidate
/// cannot win or tie, so the exact value no longer matters.
fn sad_bounded(
    source: &Frame,
    reference: &Frame,
    px: usize,
    py: usize,
    size: usize,
    dx: i32,
    dy: i32,
    limit: u32,
) -> u32 {
    let sx = (px as i32 + dx) as usize;
    let sy = (py as i32 + dy) as usize;
    let mut total = 0u32;
    for y in 0..size {
        for x in 0..size {
            let a = source.get(px + x, py + y) as i32;
            let b = reference.get(sx + x, sy + y) as i32;
            total += a.abs_diff(b);
        }
        if total > limit {
            return total;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media_io::{synth_sequence, Frame};

    #[test]
    fn dc_fallback_is_128() {
        let recon = Frame::constant(16, 16, 0).unwrap();
        let pred = predict(PredMode::IntraDc, 0, 0, 8, &recon, None).unwrap();
        assert!(pred.iter().all(|&p| p == 128));
    }

    #[test]
    fn dc_averages_top_and_left() {
        let mut recon = Frame::constant(32, 32, 0).unwrap();
        for x in 8..16 {
            recon.set(x, 7, 10); // top row
        }
        for y in 8..16 {
            recon.set(7, y, 20); // left column
        }
        let pred = predict(PredMode::IntraDc, 8, 8, 8, &recon, None).unwrap();
        // round-half-up mean of eight 10s and eight 20s
        assert!(pred.iter().all(|&p| p == 15));
    }

    #[test]
    fn horizontal_copies_left_column() {
        let mut recon = Frame::constant(32, 32, 0).unwrap();
        for y in 0..8 {
            recon.set(7, y, 50);
        }
        let pred = predict(PredMode::IntraH, 8, 0, 8, &recon, None).unwrap();
        assert!(pred.iter().all(|&p| p == 50));
        assert!(predict(PredMode::IntraH, 0, 0, 8, &recon, None).is_err());
    }

    #[test]
    fn vertical_copies_top_row() {
        let mut recon = Frame::constant(32, 32, 0).unwrap();
        for x in 0..8 {
            recon.set(x, 7, (x * 10) as u8);
        }
        let pred = predict(PredMode::IntraV, 0, 8, 8, &recon, None).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(pred[y * 8 + x], (x * 10) as u8);
            }
        }
        assert!(predict(PredMode::IntraV, 0, 0, 8, &recon, None).is_err());
    }

    #[test]
    fn inter_zero_mv_copies_colocated() {
        let seq = synth_sequence(32, 32, 2).unwrap();
        let recon = Frame::constant(32, 32, 0).unwrap();
        let pred = predict(
            PredMode::Inter(MotionVector::ZERO),
            8,
            8,
            8,
            &recon,
            Some(seq.frame(0)),
        )
        .unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(pred[y * 8 + x], seq.frame(0).get(8 + x, 8 + y));
            }
        }
    }

    #[test]
    fn inter_out_of_frame_is_invalid() {
        let f = Frame::constant(32, 32, 0).unwrap();
        let err = predict(
            PredMode::Inter(MotionVector::new(-8, 0)),
            0,
            0,
            8,
            &f,
            Some(&f),
        );
        assert!(matches!(err, Err(Error::ModeInvalid(_))));
    }

    #[test]
    fn search_identical_frames_yields_zero() {
        let seq = synth_sequence(64, 64, 1).unwrap();
        let f = seq.frame(0);
        assert_eq!(motion_search(f, f, 16, 16, 16), MotionVector::ZERO);
    }

    #[test]
    fn search_flat_frames_tie_breaks_to_zero() {
        let a = Frame::constant(64, 64, 77).unwrap();
        let b = Frame::constant(64, 64, 77).unwrap();
        assert_eq!(motion_search(&a, &b, 16, 16, 8), MotionVector::ZERO);
    }

    /// Brute-force oracle: full SAD over the window with the documented
    /// tie-break, no early abort.
    fn oracle_search(
        source: &Frame,
        reference: &Frame,
        px: usize,
        py: usize,
        size: usize,
    ) -> (MotionVector, u32, usize) {
        let mut best: Option<(u32, (u32, i32, i32), MotionVector)> = None;
        let mut zero_sad_count = 0usize;
        for dy in -8i32..=8 {
            for dx in -8i32..=8 {
                let mv = MotionVector::new(dx as i8, dy as i8);
                if !mv_in_frame(mv, px, py, size, reference.width(), reference.height()) {
                    continue;
                }
                let cost = sad(source, reference, px, py, size, dx, dy);
                if cost == 0 {
                    zero_sad_count += 1;
                }
                let key = (dx.unsigned_abs() + dy.unsigned_abs(), dy, dx);
                let better = match &best {
                    None => true,
                    Some((c, k, _)) => cost < *c || (cost == *c && key < *k),
                };
                if better {
                    best = Some((cost, key, mv));
                }
            }
        }
        let (cost, _, mv) = best.unwrap();
        (mv, cost, zero_sad_count)
    }

    #[test]
    fn search_recovers_square_motion() {
        // The synthetic square sits at (10, 9) in frame 1 and (8, 8) in
        // frame 0, so its true motion into the past is (-2, -1). An 8x8
        // block at square offset (8, 8) has a rectangle of zero-SAD
        // displacements whose L1-closest corner is exactly the true motion.
        let seq = synth_sequence(128, 128, 2).unwrap();
        let (px, py) = (10 + 8, 9 + 8);
        let (mv, cost, zeros) = oracle_search(seq.frame(1), seq.frame(0), px, py, 8);
        assert_eq!(cost, 0);
        assert!(zeros > 1, "containment set should not be a single point");
        assert_eq!(mv, MotionVector::new(-2, -1));
        assert_eq!(motion_search(seq.frame(1), seq.frame(0), px, py, 8), mv);
    }

    #[test]
    fn search_matches_oracle_on_varied_blocks() {
        let seq = synth_sequence(128, 128, 3).unwrap();
        for &(px, py, size) in &[
            (0, 0, 16),
            (16, 0, 16),
            (112, 112, 16),
            (8, 16, 8),
            (48, 64, 8),
            (120, 8, 8),
        ] {
            let (mv, _, _) = oracle_search(seq.frame(2), seq.frame(1), px, py, size);
            assert_eq!(
                motion_search(seq.frame(2), seq.frame(1), px, py, size),
                mv,
                "block ({px}, {py}) size {size}"
            );
        }
    }
}
