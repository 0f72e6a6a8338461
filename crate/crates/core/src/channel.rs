//! Lossy links between client and server.
//!
//! A round fails with total probability `p`. The forward (block-carrying)
//! direction drops with probability `f = alpha * p`; given the block got
//! through, the ack drops with `q = (1 - alpha) * p / (1 - alpha * p)`, so
//! that `f + (1 - f) * q = p`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Scalar;

/// Upper end of the supported loss range.
pub const MAX_LOSS: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("loss probability {0} outside [0, 0.9]")]
    LossOutOfRange(String),
    #[error("alpha {0} outside (0, 1]")]
    AlphaOutOfRange(String),
    #[error("scripted trace exhausted after {0} outcomes")]
    TraceExhausted(usize),
    #[error("invalid trace token {token:?} on line {line}")]
    BadToken { line: usize, token: String },
    #[error("trace is empty")]
    EmptyTrace,
    #[error("cannot read trace file: {0}")]
    Io(String),
}

/// Forward loss probability `alpha * p`.
pub fn forward_loss<T: Scalar>(p: T, alpha: T) -> T {
    alpha * p
}

/// Ack loss probability conditioned on the block having been delivered.
pub fn reverse_loss<T: Scalar>(p: T, alpha: T) -> T {
    let f = forward_loss(p, alpha);
    (T::one() - alpha) * p / (T::one() - f)
}

/// Unconditional probability that a round produces no ack.
pub fn round_failure<T: Scalar>(p: T, alpha: T) -> T {
    let f = forward_loss(p, alpha);
    f + (T::one() - f) * reverse_loss(p, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams<T = f64> {
    pub p: T,
    pub alpha: T,
}

impl<T: Scalar> ChannelParams<T> {
    pub fn new(p: T, alpha: T) -> Result<Self, ChannelError> {
        let max = T::from_f64(MAX_LOSS).expect("finite");
        if p < T::zero() || p > max {
            return Err(ChannelError::LossOutOfRange(p.to_string()));
        }
        if alpha <= T::zero() || alpha > T::one() {
            return Err(ChannelError::AlphaOutOfRange(alpha.to_string()));
        }
        Ok(ChannelParams { p, alpha })
    }

    pub fn forward_loss(&self) -> T {
        forward_loss(self.p, self.alpha)
    }

    pub fn reverse_loss(&self) -> T {
        reverse_loss(self.p, self.alpha)
    }
}

/// Source of per-transmission delivery outcomes.
pub trait Link {
    /// Whether the next client-to-server transmission arrives.
    fn forward_delivered(&mut self) -> Result<bool, ChannelError>;
    /// Whether the ack for a delivered transmission arrives.
    fn reverse_delivered(&mut self) -> Result<bool, ChannelError>;
}

/// Independent Bernoulli losses from a seeded generator.
#[derive(Debug, Clone)]
pub struct BernoulliLink {
    forward: f64,
    reverse: f64,
    rng: ChaCha8Rng,
}

impl BernoulliLink {
    pub fn new(params: ChannelParams<f64>, seed: u64) -> Self {
        BernoulliLink {
            forward: params.forward_loss(),
            reverse: params.reverse_loss(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Link for BernoulliLink {
    fn forward_delivered(&mut self) -> Result<bool, ChannelError> {
        Ok(self.rng.random::<f64>() >= self.forward)
    }

    fn reverse_delivered(&mut self) -> Result<bool, ChannelError> {
        Ok(self.rng.random::<f64>() >= self.reverse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Delivered,
    Lost,
}

impl Outcome {
    pub fn delivered(self) -> bool {
        self == Outcome::Delivered
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Delivered => "D",
            Outcome::Lost => "L",
        })
    }
}

/// Explicit outcome list: one `D`/`L` token per transmission, forward and
/// reverse interleaved in the order they happen. `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace(pub Vec<Outcome>);

impl FromStr for Trace {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("");
            for token in body.split(|c: char| c.is_whitespace() || c == ',') {
                match token {
                    "" => {}
                    "D" | "d" => out.push(Outcome::Delivered),
                    "L" | "l" => out.push(Outcome::Lost),
                    other => {
                        return Err(ChannelError::BadToken {
                            line: lineno + 1,
                            token: other.to_string(),
                        })
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(ChannelError::EmptyTrace);
        }
        Ok(Trace(out))
    }
}

impl Trace {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ChannelError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ChannelError::Io(format!("{}: {e}", path.as_ref().display())))?;
        text.parse()
    }
}

/// Replays a [`Trace`] in order; running past its end is an error.
#[derive(Debug, Clone)]
pub struct ScriptedLink {
    trace: Trace,
    pos: usize,
}

impl ScriptedLink {
    pub fn new(trace: Trace) -> Self {
        ScriptedLink { trace, pos: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }

    fn next(&mut self) -> Result<bool, ChannelError> {
        let o = self
            .trace
            .0
            .get(self.pos)
            .ok_or(ChannelError::TraceExhausted(self.pos))?;
        self.pos += 1;
        Ok(o.delivered())
    }
}

impl Link for ScriptedLink {
    fn forward_delivered(&mut self) -> Result<bool, ChannelError> {
        self.next()
    }

    fn reverse_delivered(&mut self) -> Result<bool, ChannelError> {
        self.next()
    }
}
