//! Deflation and inflation: exact simulcast reconstruction through delta
//! coefficients.
//!
//! Deflation runs a true simulcast encode of the source, then recomputes
//! the residual levels the guided path would produce from the decoded
//! high-quality video under the same decisions and the same simulcast
//! reconstruction references. The elementwise level difference — the delta
//! coefficients (DTC) — goes into the control stream next to the
//! decisions. Inflation replays the guided computation and adds the DTC
//! back, recovering the simulcast levels exactly, so the rebuilt bitstream
//! is byte-identical to the one a simulcast encoder would have stored.
//!
//! Both directions keep the simulcast reconstruction as their prediction
//! reference chain; that choice is what makes the induction exact.

use crate::codec::{
    levels_from_prediction, predict, rd_encode_frame, reconstruct_unit, BlockDecision,
    EncodedFrame, FrameDecisions, PredMode, QuantParams, ResidualLevels,
};
use crate::container::{ControlStream, CsFrame, CsHeader, RepHeader, Representation};
use crate::error::{Error, Result};
use crate::guided::check_cs_shape;
use crate::media_io::{Frame, Sequence};

const QUADS: [(usize, usize); 4] = [(0, 0), (8, 0), (0, 8), (8, 8)];

/// Visits every 8x8 transform unit of a frame in coding order with its
/// effective prediction mode.
fn for_each_unit(
    decisions: &FrameDecisions,
    width: usize,
    mut visit: impl FnMut(usize, PredMode, usize, usize) -> Result<()>,
) -> Result<()> {
    let blocks_w = width / 16;
    for (i, block) in decisions.blocks.iter().enumerate() {
        let bx = (i % blocks_w) * 16;
        let by = (i / blocks_w) * 16;
        for (q, (ox, oy)) in QUADS.iter().enumerate() {
            let mode = match block {
                BlockDecision::Whole(mode) => *mode,
                BlockDecision::Split(modes) => modes[q],
            };
            visit(i * 4 + q, mode, bx + ox, by + oy)?;
        }
    }
    Ok(())
}

/// Deflates one ladder point: simulcast-encodes the source at `qp` and
/// packages the decisions together with the delta coefficients against the
/// decoded high-quality video.
///
/// Also returns the simulcast bitstream itself. The NDVC flow never stores
/// it — it exists so callers can verify inflation reproduces it exactly.
pub fn deflate(
    source: &Sequence,
    r0_decoded: &Sequence,
    qp: u8,
    gop_len: u8,
) -> Result<(ControlStream, Representation)> {
    if source.width() != r0_decoded.width()
        || source.height() != r0_decoded.height()
        || source.len() != r0_decoded.len()
    {
        return Err(Error::ShapeMismatch(format!(
            "source {}x{}x{} vs decoded high-quality {}x{}x{}",
            source.width(),
            source.height(),
            source.len(),
            r0_decoded.width(),
            r0_decoded.height(),
            r0_decoded.len()
        )));
    }
    if gop_len == 0 {
        return Err(Error::InvalidArgument("gop length must be at least 1".into()));
    }
    let q = QuantParams::new(qp)?;
    let step = q.step();
    let width = source.width();

    let mut cs_frames = Vec::with_capacity(source.len());
    let mut sim_frames = Vec::with_capacity(source.len());
    let mut sim_recon: Vec<Frame> = Vec::with_capacity(source.len());
    for t in 0..source.len() {
        let reference = if t % gop_len as usize == 0 {
            None
        } else {
            Some(&sim_recon[t - 1])
        };
        let (decisions, sim_levels, recon) = rd_encode_frame(source.frame(t), reference, q)?;

        // Residual levels the guided encoder would compute for the decoded
        // high-quality frame, predicting from the simulcast reconstruction.
        let mut dtc_blocks = vec![[0i32; 64]; sim_levels.blocks.len()];
        for_each_unit(&decisions, width, |idx, mode, px, py| {
            let pred = predict(mode, px, py, 8, &recon, reference)?;
            let guided = levels_from_prediction(r0_decoded.frame(t), &pred, px, py, step);
            for k in 0..64 {
                dtc_blocks[idx][k] = sim_levels.blocks[idx][k] - guided[k];
            }
            Ok(())
        })?;

        cs_frames.push(CsFrame {
            decisions: decisions.clone(),
            dtc: Some(ResidualLevels { blocks: dtc_blocks }),
        });
        sim_frames.push(EncodedFrame {
            decisions,
            levels: sim_levels,
        });
        sim_recon.push(recon);
    }

    let cs = ControlStream {
        header: CsHeader {
            width: source.width() as u16,
            height: source.height() as u16,
            frame_count: source.len() as u32,
            gop_len,
            native_qp: qp,
            dtc_present: true,
        },
        frames: cs_frames,
    };
    let simulcast = Representation {
        header: RepHeader {
            width: source.width() as u16,
            height: source.height() as u16,
            frame_count: source.len() as u32,
            gop_len,
            qp,
        },
        frames: sim_frames,
    };
    Ok((cs, simulcast))
}

/// Inflates a deflated control stream back into the exact simulcast
/// bitstream: replays the guided level computation against the decoded
/// high-quality video and adds the delta coefficients.
pub fn inflate(r0_decoded: &Sequence, cs: &ControlStream) -> Result<Representation> {
    if !cs.header.dtc_present {
        return Err(Error::Corruption(
            "control stream carries no delta coefficients".into(),
        ));
    }
    check_cs_shape(cs, r0_decoded)?;
    let q = QuantParams::new(cs.header.native_qp)?;
    let step = q.step();
    let (width, height) = (r0_decoded.width(), r0_decoded.height());
    let gop = cs.header.gop_len as usize;

    let mut out_frames = Vec::with_capacity(cs.frames.len());
    let mut recon_frames: Vec<Frame> = Vec::with_capacity(cs.frames.len());
    for (t, cs_frame) in cs.frames.iter().enumerate() {
        cs_frame
            .decisions
            .validate(width, height)
            .map_err(|e| Error::Corruption(e.to_string()))?;
        let dtc = cs_frame
            .dtc
            .as_ref()
            .ok_or_else(|| Error::Corruption(format!("frame {t} is missing its DTC layer")))?;
        let unit_count = (width / 16) * (height / 16) * 4;
        if dtc.blocks.len() != unit_count {
            return Err(Error::Corruption(format!(
                "frame {t} carries {} DTC blocks, expected {unit_count}",
                dtc.blocks.len()
            )));
        }
        let reference = if t % gop == 0 {
            None
        } else {
            Some(&recon_frames[t - 1])
        };
        let mut recon = Frame::constant(width, height, 0)?;
        let mut levels = vec![[0i32; 64]; unit_count];
        for_each_unit(&cs_frame.decisions, width, |idx, mode, px, py| {
            let pred = predict(mode, px, py, 8, &recon, reference).map_err(|e| match e {
                Error::ModeInvalid(m) => Error::Corruption(m),
                other => other,
            })?;
            let guided = levels_from_prediction(r0_decoded.frame(t), &pred, px, py, step);
            let mut original = [0i32; 64];
            for k in 0..64 {
                original[k] = guided[k] + dtc.blocks[idx][k];
            }
            reconstruct_unit(&mut recon, px, py, &pred, &original, step);
            levels[idx] = original;
            Ok(())
        })?;
        out_frames.push(EncodedFrame {
            decisions: cs_frame.decisions.clone(),
            levels: ResidualLevels { blocks: levels },
        });
        recon_frames.push(recon);
    }

    Ok(Representation {
        header: RepHeader {
            width: cs.header.width,
            height: cs.header.height,
            frame_count: cs.header.frame_count,
            gop_len: cs.header.gop_len,
            qp: cs.header.native_qp,
        },
        frames: out_frames,
    })
}

/// Fraction of nonzero delta coefficients across a deflated stream.
pub fn dtc_nonzero_fraction(cs: &ControlStream) -> f64 {
    let mut nonzero = 0usize;
    let mut total = 0usize;
    for frame in &cs.frames {
        if let Some(dtc) = &frame.dtc {
            for block in &dtc.blocks {
                total += 64;
                nonzero += block.iter().filter(|&&v| v != 0).count();
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        nonzero as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::{encode_representation, write_cs, write_representation};
    use crate::guided::{generate_control_stream, guided_encode};
    use crate::media_io::{psnr, synth_sequence};

    fn fixture() -> (Sequence, Sequence) {
        let source = synth_sequence(64, 64, 8).unwrap();
        let r0 = encode_representation(&source, 8, 4).unwrap();
        let decoded = r0.decode().unwrap();
        (source, decoded)
    }

    #[test]
    fn lossless_high_quality_gives_all_zero_dtc() {
        let source = synth_sequence(64, 64, 6).unwrap();
        let (cs, _) = deflate(&source, &source, 18, 3).unwrap();
        assert_eq!(dtc_nonzero_fraction(&cs), 0.0);
    }

    #[test]
    fn inflate_reproduces_simulcast_exactly() {
        let (source, decoded) = fixture();
        for qp in [12u8, 18, 24, 30] {
            let (cs, returned_sim) = deflate(&source, &decoded, qp, 4).unwrap();
            let independent_sim = encode_representation(&source, qp, 4).unwrap();
            assert_eq!(
                write_representation(&returned_sim),
                write_representation(&independent_sim)
            );
            let inflated = inflate(&decoded, &cs).unwrap();
            assert_eq!(
                write_representation(&inflated),
                write_representation(&independent_sim),
                "qp {qp}"
            );
            // Decoded outputs are the same samples, so quality is identical.
            let a = inflated.decode().unwrap();
            let b = independent_sim.decode().unwrap();
            assert_eq!(a.frames(), b.frames());
            assert_eq!(
                psnr(&source, &a).unwrap().to_bits(),
                psnr(&source, &b).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn deflated_cs_survives_serialization() {
        let (source, decoded) = fixture();
        let (cs, sim) = deflate(&source, &decoded, 18, 4).unwrap();
        let bytes = write_cs(&cs);
        let parsed = crate::container::read_cs(&bytes).unwrap();
        let inflated = inflate(&decoded, &parsed).unwrap();
        assert_eq!(write_representation(&inflated), write_representation(&sim));
    }

    #[test]
    fn zero_dtc_inflation_matches_guided_encode() {
        // With the high-quality video equal to the source, deflation's
        // guided levels equal the simulcast levels, so inflation collapses
        // to the plain guided path.
        let source = synth_sequence(64, 64, 6).unwrap();
        let (cs, _) = deflate(&source, &source, 24, 3).unwrap();
        assert_eq!(dtc_nonzero_fraction(&cs), 0.0);
        let inflated = inflate(&source, &cs).unwrap();

        let plain = generate_control_stream(&source, 24, 3).unwrap();
        let guided = guided_encode(&source, &plain, 24).unwrap();
        assert_eq!(write_representation(&inflated), write_representation(&guided));
    }

    #[test]
    fn very_coarse_quantization_leaves_dtc_mostly_zero() {
        let (source, decoded) = fixture();
        let (cs, _) = deflate(&source, &decoded, 51, 4).unwrap();
        let fraction = dtc_nonzero_fraction(&cs);
        // Recorded on the fixture: at step 362 almost everything
        // quantizes to zero on both paths.
        assert!(fraction < 0.02, "DTC nonzero fraction {fraction}");
    }

    #[test]
    fn deflated_cs_is_smaller_than_simulcast_stream() {
        let (source, decoded) = fixture();
        for qp in [12u8, 18, 24, 30] {
            let (cs, sim) = deflate(&source, &decoded, qp, 4).unwrap();
            assert!(
                write_cs(&cs).len() < write_representation(&sim).len(),
                "qp {qp}"
            );
        }
    }

    #[test]
    fn dtc_sparsity_improves_with_high_quality_r0() {
        let source = synth_sequence(64, 64, 8).unwrap();
        let mut fractions = Vec::new();
        for r0_qp in [4u8, 12] {
            let r0 = encode_representation(&source, r0_qp, 4).unwrap();
            let decoded = r0.decode().unwrap();
            let (cs, _) = deflate(&source, &decoded, 18, 4).unwrap();
            fractions.push(dtc_nonzero_fraction(&cs));
        }
        assert!(
            fractions[0] <= fractions[1],
            "r0 qp 4 fraction {} vs r0 qp 12 fraction {}",
            fractions[0],
            fractions[1]
        );
    }

    #[test]
    fn inflate_requires_delta_coefficients() {
        let (_, decoded) = fixture();
        let plain = generate_control_stream(&decoded, 18, 4).unwrap();
        assert!(matches!(
            inflate(&decoded, &plain),
            Err(Error::Corruption(_))
        ));
    }
}
