//! Block-wise transfer with network coding.
//!
//! A client sends a resource split into fixed-size blocks to a server over a
//! lossy link using stop-and-wait. Without coding, every lost block or lost
//! acknowledgment costs a retransmission of the same block. With coding, the
//! client folds one new block into an XOR combination after each timeout,
//! so a block that arrived but whose ack was lost is never sent again; the
//! server acknowledges *seen* blocks via Gauss-Jordan elimination over
//! GF(2^8) and asks for random linear repairs only for real forward losses.
//!
//! Modules, bottom up:
//!
//! * [`gf256`]: field arithmetic and row operations.
//! * [`wire`]: request and ack option codecs.
//! * [`coding`]: coded-block construction and the seen-block decoder.
//! * [`protocol`]: client and server state machines for both protocols.
//! * [`channel`]: Bernoulli and scripted loss models.
//! * [`model`]: closed-form expected additional blocks.
//! * [`sim`]: lockstep driver, Monte-Carlo sweeps and CSV output.
//! * [`cli`]: the `ncbwt` command-line front end.

pub mod channel;
pub mod cli;
pub mod coding;
pub mod gf256;
pub mod model;
pub mod protocol;
pub mod scalar;
pub mod sim;
pub mod wire;

pub use coding::{Block, CodedBlock, DecoderState, SplitResource};
pub use gf256::Gf256;
pub use scalar::Scalar;
pub use sim::{Protocol, SimResult};
pub use wire::{AckOption, RequestOption};

/// Analytic results in double precision.
pub type AnalyticPoint = model::AnalyticPoint<f64>;
/// Analytic results in single precision.
pub type AnalyticPointF32 = model::AnalyticPoint<f32>;
/// Exact rational scalar.
pub type Exact = num_rational::Rational64;
/// Analytic results computed exactly.
pub type ExactAnalyticPoint = model::AnalyticPoint<Exact>;
/// Channel parameters in double precision, as used by the simulator.
pub type ChannelParams = channel::ChannelParams<f64>;
/// Channel parameters held exactly.
pub type ExactChannelParams = channel::ChannelParams<Exact>;

/// Five-block walkthrough trace bundled for `ncbwt trace`.
pub const WALKTHROUGH_TRACE: &str = include_str!("../traces/walkthrough.trace");
