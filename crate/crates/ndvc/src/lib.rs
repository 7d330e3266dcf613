//! A self-contained block-based video codec and the network-distributed
//! video coding (NDVC) toolchain built around it.
//!
//! Video providers adapt content to clients either by storing every
//! representation up front (simulcast) or by re-encoding the stored
//! high-quality representation on demand (transcoding). NDVC sits between
//! the two: the origin keeps one high-quality representation plus small
//! *control streams* carrying only coding decisions, and an in-network
//! node regenerates any representation cheaply by reusing those decisions.
//!
//! The crate provides:
//!
//! - [`media_io`] — raw/Y4M video loading, a deterministic synthetic
//!   sequence generator, and PSNR.
//! - [`bitio`] — MSB-first bit buffers and exponential-Golomb codes.
//! - [`codec`] — the deterministic block codec: integer transform,
//!   quantization, intra/inter prediction, exhaustive motion search, and
//!   exact-bit rate-distortion encoding.
//! - [`container`] — the `NDV1` representation and `NDC1` control-stream
//!   file formats, with byte-separable decision and residual layers.
//! - [`guided`] — control-stream generation and guided fast encoding,
//!   including one control stream driving several representations.
//! - [`deflation`] — deflation/inflation with delta coefficients for exact
//!   simulcast reconstruction from the high-quality representation.
//! - [`evaluation`] — BD-rate, the asset builder, and the cost report
//!   comparing all adaptation strategies.
//! - [`pipeline`] — byte-accounted storage, a trace-driven segment
//!   streaming simulator, and a small TCP segment server.
//!
//! Every encoder path is a pure function of its inputs: two runs on the
//! same input produce byte-identical streams. See the crate examples for
//! runnable walkthroughs of each capability:
//!
//! ```bash
//! cargo run --release --example synth_and_encode
//! cargo run --release --example guided_transcode
//! cargo run --release --example multi_rep_control_stream
//! cargo run --release --example deflate_inflate
//! cargo run --release --example cost_report
//! cargo run --release --example streaming_simulation
//! cargo run --release --example serve_segments
//! ```

pub mod bitio;
pub mod codec;
pub mod container;
pub mod deflation;
pub mod error;
pub mod evaluation;
pub mod guided;
pub mod media_io;
pub mod pipeline;

pub use error::{Error, Result};
