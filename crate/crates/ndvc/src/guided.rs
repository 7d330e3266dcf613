//! Control-stream generation and guided fast encoding.
//!
//! A control stream packages the coding decisions of one representation
//! without its residual data. A guided encoder reuses those decisions to
//! regenerate the representation from the decoded high-quality stream,
//! skipping the decision search entirely; with the decisions taken at the
//! same QP the output is byte-identical to a full transcode. One control
//! stream can also drive several nearby ladder points, trading a little
//! delivered bit rate for fewer stored control streams.

use crate::codec::{apply_decisions, encode_sequence, QuantParams};
use crate::container::{
    encode_representation, ControlStream, CsFrame, CsHeader, RepHeader, Representation,
};
use crate::error::{Error, Result};
use crate::media_io::{Frame, Sequence};

/// The encoding ladder: QPs in ascending order (descending bit rate), the
/// high-quality representation's QP below all of them, and how many ladder
/// points share one control stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LadderSpec {
    qps: Vec<u8>,
    r0_qp: u8,
    reps_per_cs: usize,
}

impl LadderSpec {
    pub fn new(qps: Vec<u8>, r0_qp: u8, reps_per_cs: usize) -> Result<Self> {
        if qps.is_empty() {
            return Err(Error::InvalidArgument("ladder must not be empty".into()));
        }
        if !qps.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "ladder qps must be strictly ascending".into(),
            ));
        }
        if qps.iter().any(|&q| q > 51) || r0_qp > 51 {
            return Err(Error::InvalidArgument("qp outside [0, 51]".into()));
        }
        if r0_qp >= qps[0] {
            return Err(Error::InvalidArgument(format!(
                "r0 qp {r0_qp} must be below the ladder minimum {}",
                qps[0]
            )));
        }
        if !matches!(reps_per_cs, 1 | 2 | 4) {
            return Err(Error::InvalidArgument(format!(
                "reps_per_cs {reps_per_cs} must be 1, 2, or 4"
            )));
        }
        Ok(Self {
            qps,
            r0_qp,
            reps_per_cs,
        })
    }

    pub fn qps(&self) -> &[u8] {
        &self.qps
    }

    pub fn r0_qp(&self) -> u8 {
        self.r0_qp
    }

    pub fn reps_per_cs(&self) -> usize {
        self.reps_per_cs
    }

    pub fn with_reps_per_cs(&self, reps_per_cs: usize) -> Result<Self> {
        Self::new(self.qps.clone(), self.r0_qp, reps_per_cs)
    }
}

/// One group of ladder points served by a single control stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsGroup {
    /// Ladder points of this group, ascending qp.
    pub member_qps: Vec<u8>,
    /// QP the shared control stream is generated at.
    pub cs_qp: u8,
}

/// Splits the ladder into consecutive groups of `reps_per_cs` points (the
/// last group may be smaller) and picks each group's control-stream
/// generation point: the second-lowest-rate member for groups of three or
/// more, the lowest-rate member for groups of one or two.
pub fn assign_cs_groups(ladder: &LadderSpec) -> Vec<CsGroup> {
    ladder
        .qps
        .chunks(ladder.reps_per_cs)
        .map(|chunk| {
            let idx = if chunk.len() >= 3 {
                chunk.len() - 2
            } else {
                chunk.len() - 1
            };
            CsGroup {
                member_qps: chunk.to_vec(),
                cs_qp: chunk[idx],
            }
        })
        .collect()
}

/// The generation QP of the control stream serving ladder point `qp`.
pub fn cs_qp_for_point(ladder: &LadderSpec, qp: u8) -> Result<u8> {
    assign_cs_groups(ladder)
        .iter()
        .find(|g| g.member_qps.contains(&qp))
        .map(|g| g.cs_qp)
        .ok_or_else(|| Error::InvalidArgument(format!("qp {qp} is not a ladder point")))
}

/// Generates a control stream for one representation: runs the full
/// rate-distortion search over the decoded high-quality video at
/// `qp_target` and keeps only the decisions, discarding all residual data.
pub fn generate_control_stream(
    r0_decoded: &Sequence,
    qp_target: u8,
    gop_len: u8,
) -> Result<ControlStream> {
    let (frames, _) = encode_sequence(r0_decoded, qp_target, gop_len)?;
    Ok(ControlStream {
        header: CsHeader {
            width: r0_decoded.width() as u16,
            height: r0_decoded.height() as u16,
            frame_count: r0_decoded.len() as u32,
            gop_len,
            native_qp: qp_target,
            dtc_present: false,
        },
        frames: frames
            .into_iter()
            .map(|f| CsFrame {
                decisions: f.decisions,
                dtc: None,
            })
            .collect(),
    })
}

pub(crate) fn check_cs_shape(cs: &ControlStream, video: &Sequence) -> Result<()> {
    if cs.header.width as usize != video.width()
        || cs.header.height as usize != video.height()
        || cs.header.frame_count as usize != video.len()
    {
        return Err(Error::ShapeMismatch(format!(
            "control stream {}x{}x{} vs video {}x{}x{}",
            cs.header.width,
            cs.header.height,
            cs.header.frame_count,
            video.width(),
            video.height(),
            video.len()
        )));
    }
    Ok(())
}

/// Fast encode guided by a control stream: applies the packaged decisions
/// over the decoded high-quality video at `qp_out`, predicting from its
/// own `qp_out` reconstruction loop, and recomputes only the residuals.
///
/// With `qp_out == cs.native_qp` the output is byte-identical to
/// [`full_transcode`] at that QP; other QPs reuse the same decisions and
/// pay for the mismatch with more residual data.
pub fn guided_encode(
    r0_decoded: &Sequence,
    cs: &ControlStream,
    qp_out: u8,
) -> Result<Representation> {
    if cs.header.dtc_present {
        return Err(Error::InvalidArgument(
            "deflated control stream passed to the plain guided encoder".into(),
        ));
    }
    check_cs_shape(cs, r0_decoded)?;
    let q = QuantParams::new(qp_out)?;
    let gop = cs.header.gop_len as usize;
    let mut encoded = Vec::with_capacity(cs.frames.len());
    let mut recon_frames: Vec<Frame> = Vec::with_capacity(cs.frames.len());
    for (t, cs_frame) in cs.frames.iter().enumerate() {
        let reference = if t % gop == 0 {
            None
        } else {
            Some(&recon_frames[t - 1])
        };
        let (levels, recon) =
            apply_decisions(r0_decoded.frame(t), reference, &cs_frame.decisions, q)?;
        encoded.push(crate::codec::EncodedFrame {
            decisions: cs_frame.decisions.clone(),
            levels,
        });
        recon_frames.push(recon);
    }
    Ok(Representation {
        header: RepHeader {
            width: cs.header.width,
            height: cs.header.height,
            frame_count: cs.header.frame_count,
            gop_len: cs.header.gop_len,
            qp: qp_out,
        },
        frames: encoded,
    })
}

/// Traditional transcode: decode the stored representation and re-encode
/// it from scratch at `qp_out`, full search included.
pub fn full_transcode(r0: &Representation, qp_out: u8) -> Result<Representation> {
    let decoded = r0.decode()?;
    encode_representation(&decoded, qp_out, r0.header.gop_len)
}
