//! Closed-form expected retransmission counts.
//!
//! With `N` blocks and a per-round loss probability `p`, stop-and-wait needs
//! `N / (1 - p)` transmissions on average, so `N/(1-p) - N` are additional.
//! With coding only forward losses (probability `alpha * p`) cost a block,
//! giving `N/(1 - alpha*p) - N`.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("resource and block size must be positive (got R={resource}, B={block})")]
    ZeroSize { resource: u64, block: u64 },
    #[error("loss probability {0} outside [0, 1)")]
    LossOutOfRange(String),
    #[error("alpha {0} outside (0, 1]")]
    AlphaOutOfRange(String),
}

/// Expected additional blocks for both protocols at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticPoint<T> {
    pub n: u64,
    pub p: T,
    pub alpha: T,
    pub a_wonc: T,
    pub a_wnc: T,
}

/// `N = ceil(R / B)`.
pub fn blocks_count(resource_bytes: u64, block_bytes: u64) -> Result<u64, ModelError> {
    if resource_bytes == 0 || block_bytes == 0 {
        return Err(ModelError::ZeroSize {
            resource: resource_bytes,
            block: block_bytes,
        });
    }
    Ok(resource_bytes.div_ceil(block_bytes))
}

fn check_loss<T: Scalar>(p: T) -> Result<(), ModelError> {
    if p < T::zero() || p >= T::one() {
        return Err(ModelError::LossOutOfRange(p.to_string()));
    }
    Ok(())
}

fn extra<T: Scalar>(n: u64, loss: T) -> T {
    let n = T::from_count(n);
    n / (T::one() - loss) - n
}

/// Expected additional blocks without coding.
pub fn additional_wonc<T: Scalar>(n: u64, p: T) -> Result<T, ModelError> {
    check_loss(p)?;
    Ok(extra(n, p))
}

/// Expected additional blocks with coding.
pub fn additional_wnc<T: Scalar>(n: u64, p: T, alpha: T) -> Result<T, ModelError> {
    if p < T::zero() || p > T::one() {
        return Err(ModelError::LossOutOfRange(p.to_string()));
    }
    if alpha <= T::zero() || alpha > T::one() {
        return Err(ModelError::AlphaOutOfRange(alpha.to_string()));
    }
    let forward = alpha * p;
    check_loss(forward)?;
    Ok(extra(n, forward))
}

pub fn analytic_point<T: Scalar>(n: u64, p: T, alpha: T) -> Result<AnalyticPoint<T>, ModelError> {
    Ok(AnalyticPoint {
        n,
        p,
        alpha,
        a_wonc: additional_wonc(n, p)?,
        a_wnc: additional_wnc(n, p, alpha)?,
    })
}
