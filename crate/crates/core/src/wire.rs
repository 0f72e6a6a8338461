//! Option values carried by coded blocks and their acknowledgments.
//!
//! Request option, big-endian:
//!
//! ```text
//! byte 0     c_c   coded-block tag
//! bytes 1-2  no_t  lowest block index in the combination
//! bytes 3-4  no_e  highest block index in the combination
//! byte 5     flags bit7 = M, bit6 = explicit coefficients, bits5-3 reserved, bits2-0 = SZX
//! bytes 6..  one coefficient per block in [no_t, no_e], explicit kind only
//! ```
//!
//! Ack option, big-endian, always five bytes:
//!
//! ```text
//! byte 0     c_s   copy of the acknowledged block's c_c
//! bytes 1-2  sn    newest seen block
//! byte 3     u     htp - sn
//! byte 4     rdt_s additional blocks still required
//! ```

use thiserror::Error;

use crate::gf256::Gf256;

pub const REQUEST_HEADER_LEN: usize = 6;
pub const ACK_LEN: usize = 5;
pub const MAX_SZX: u8 = 6;

const FLAG_MORE: u8 = 0x80;
const FLAG_EXPLICIT: u8 = 0x40;
const RESERVED_MASK: u8 = 0x38;
const SZX_MASK: u8 = 0x07;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("truncated option: need {need} bytes, got {got}")]
    Truncated { need: usize, got: usize },
    #[error("option length {got} does not match expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("window start {no_t} exceeds window end {no_e}")]
    InvertedWindow { no_t: u16, no_e: u16 },
    #[error("block index 0 is not valid")]
    ZeroIndex,
    #[error("reserved flag bits set: {0:#04x}")]
    ReservedBits(u8),
    #[error("SZX {0} out of range 0..=6")]
    BadSzx(u8),
    #[error("explicit option carries {got} coefficients for a window of {span}")]
    CoefficientCount { span: usize, got: usize },
    #[error("explicit option has a zero coefficient at a window edge")]
    ZeroEdgeCoefficient,
    #[error("implicit XOR option must not carry coefficients")]
    UnexpectedCoefficients,
    #[error("ack requests {rdt_s} repairs but only {known} blocks are known")]
    RepairsExceedKnown { rdt_s: u8, known: u32 },
    #[error("ack htp {0} exceeds the 16-bit index space")]
    HtpOverflow(u32),
}

/// How the coding vector of a request is conveyed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodingKind {
    /// All-ones over `[no_t, no_e]`; no coefficient bytes on the wire.
    ImplicitXor,
    /// One explicit coefficient per block in `[no_t, no_e]`.
    ExplicitRlnc,
}

/// Option value attached to every block the client sends.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RequestOption {
    pub c_c: u8,
    pub no_t: u16,
    pub no_e: u16,
    /// `true` while the combination does not reach the resource's last block.
    pub more: bool,
    pub szx: u8,
    pub kind: CodingKind,
    pub coeffs: Vec<Gf256>,
}

impl RequestOption {
    /// A single uncoded block.
    pub fn native(c_c: u8, index: u16, more: bool, szx: u8) -> Self {
        Self::xor(c_c, index, index, more, szx)
    }

    pub fn xor(c_c: u8, no_t: u16, no_e: u16, more: bool, szx: u8) -> Self {
        RequestOption {
            c_c,
            no_t,
            no_e,
            more,
            szx,
            kind: CodingKind::ImplicitXor,
            coeffs: Vec::new(),
        }
    }

    pub fn span(&self) -> usize {
        usize::from(self.no_e).saturating_sub(usize::from(self.no_t)) + 1
    }

    pub fn is_native(&self) -> bool {
        self.no_t == self.no_e
            && match self.kind {
                CodingKind::ImplicitXor => true,
                CodingKind::ExplicitRlnc => self.coeffs.first() == Some(&Gf256::ONE),
            }
    }

    /// Coefficient of block `index`; zero outside the window.
    pub fn coefficient(&self, index: usize) -> Gf256 {
        let (lo, hi) = (usize::from(self.no_t), usize::from(self.no_e));
        if index < lo || index > hi {
            return Gf256::ZERO;
        }
        match self.kind {
            CodingKind::ImplicitXor => Gf256::ONE,
            CodingKind::ExplicitRlnc => self.coeffs[index - lo],
        }
    }

    pub fn encoded_len(&self) -> usize {
        match self.kind {
            CodingKind::ImplicitXor => REQUEST_HEADER_LEN,
            CodingKind::ExplicitRlnc => REQUEST_HEADER_LEN + self.span(),
        }
    }

    pub fn validate(&self) -> Result<(), WireError> {
        if self.no_t == 0 {
            return Err(WireError::ZeroIndex);
        }
        if self.no_t > self.no_e {
            return Err(WireError::InvertedWindow {
                no_t: self.no_t,
                no_e: self.no_e,
            });
        }
        if self.szx > MAX_SZX {
            return Err(WireError::BadSzx(self.szx));
        }
        match self.kind {
            CodingKind::ImplicitXor if !self.coeffs.is_empty() => {
                Err(WireError::UnexpectedCoefficients)
            }
            CodingKind::ImplicitXor => Ok(()),
            CodingKind::ExplicitRlnc => {
                if self.coeffs.len() != self.span() {
                    return Err(WireError::CoefficientCount {
                        span: self.span(),
                        got: self.coeffs.len(),
                    });
                }
                if self.coeffs[0].is_zero() || self.coeffs[self.coeffs.len() - 1].is_zero() {
                    return Err(WireError::ZeroEdgeCoefficient);
                }
                Ok(())
            }
        }
    }
}

/// Option value the server returns for every block it receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct AckOption {
    pub c_s: u8,
    pub sn: u16,
    pub u: u8,
    pub rdt_s: u8,
}

impl AckOption {
    /// Highest block index the server has touched.
    pub fn htp(&self) -> u32 {
        u32::from(self.sn) + u32::from(self.u)
    }

    pub fn validate(&self) -> Result<(), WireError> {
        let htp = self.htp();
        if htp > u32::from(u16::MAX) {
            return Err(WireError::HtpOverflow(htp));
        }
        if u32::from(self.rdt_s) > htp {
            return Err(WireError::RepairsExceedKnown {
                rdt_s: self.rdt_s,
                known: htp,
            });
        }
        Ok(())
    }
}

pub fn encode_request(opt: &RequestOption) -> Result<Vec<u8>, WireError> {
    opt.validate()?;
    let mut out = Vec::with_capacity(opt.encoded_len());
    out.push(opt.c_c);
    out.extend_from_slice(&opt.no_t.to_be_bytes());
    out.extend_from_slice(&opt.no_e.to_be_bytes());
    let mut flags = opt.szx & SZX_MASK;
    if opt.more {
        flags |= FLAG_MORE;
    }
    if opt.kind == CodingKind::ExplicitRlnc {
        flags |= FLAG_EXPLICIT;
    }
    out.push(flags);
    out.extend(opt.coeffs.iter().map(|c| c.0));
    Ok(out)
}

pub fn decode_request(data: &[u8]) -> Result<RequestOption, WireError> {
    if data.len() < REQUEST_HEADER_LEN {
        return Err(WireError::Truncated {
            need: REQUEST_HEADER_LEN,
            got: data.len(),
        });
    }
    let flags = data[5];
    if flags & RESERVED_MASK != 0 {
        return Err(WireError::ReservedBits(flags & RESERVED_MASK));
    }
    let no_t = u16::from_be_bytes([data[1], data[2]]);
    let no_e = u16::from_be_bytes([data[3], data[4]]);
    if no_t > no_e {
        return Err(WireError::InvertedWindow { no_t, no_e });
    }
    let kind = if flags & FLAG_EXPLICIT != 0 {
        CodingKind::ExplicitRlnc
    } else {
        CodingKind::ImplicitXor
    };
    let expected = match kind {
        CodingKind::ImplicitXor => REQUEST_HEADER_LEN,
        CodingKind::ExplicitRlnc => REQUEST_HEADER_LEN + usize::from(no_e - no_t) + 1,
    };
    if data.len() < expected {
        return Err(WireError::Truncated {
            need: expected,
            got: data.len(),
        });
    }
    if data.len() > expected {
        return Err(WireError::LengthMismatch {
            expected,
            got: data.len(),
        });
    }
    let opt = RequestOption {
        c_c: data[0],
        no_t,
        no_e,
        more: flags & FLAG_MORE != 0,
        szx: flags & SZX_MASK,
        kind,
        coeffs: data[REQUEST_HEADER_LEN..]
            .iter()
            .copied()
            .map(Gf256)
            .collect(),
    };
    opt.validate()?;
    Ok(opt)
}

pub fn encode_ack(opt: &AckOption) -> Result<[u8; ACK_LEN], WireError> {
    opt.validate()?;
    let sn = opt.sn.to_be_bytes();
    Ok([opt.c_s, sn[0], sn[1], opt.u, opt.rdt_s])
}

pub fn decode_ack(data: &[u8]) -> Result<AckOption, WireError> {
    if data.len() != ACK_LEN {
        return Err(WireError::LengthMismatch {
            expected: ACK_LEN,
            got: data.len(),
        });
    }
    let opt = AckOption {
        c_s: data[0],
        sn: u16::from_be_bytes([data[1], data[2]]),
        u: data[3],
        rdt_s: data[4],
    };
    opt.validate()?;
    Ok(opt)
}

/// Block size in bytes for an SZX exponent: `2^(szx + 4)`.
pub fn block_size_for_szx(szx: u8) -> Option<usize> {
    (szx <= MAX_SZX).then(|| 1usize << (szx + 4))
}

pub fn szx_for_block_size(block_size: usize) -> Option<u8> {
    (0..=MAX_SZX).find(|&s| block_size_for_szx(s) == Some(block_size))
}
