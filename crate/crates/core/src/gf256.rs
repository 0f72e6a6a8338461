//! Arithmetic over GF(2^8) with the reduction polynomial
//! x^8 + x^4 + x^3 + x^2 + 1 (0x11D).
//!
//! Addition is XOR. Multiplication and inversion go through log/antilog
//! tables built at compile time; the generator is 0x02.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Sub};

use thiserror::Error;

/// Low byte of the reduction polynomial (x^8 is implicit).
pub const POLY: u16 = 0x1D;

static EXP: [u8; 512] = build_exp();
static LOG: [u8; 256] = build_log();

const fn build_exp() -> [u8; 512] {
    let mut t = [0u8; 512];
    let mut v: u16 = 1;
    let mut i = 0;
    while i < 255 {
        t[i] = v as u8;
        t[i + 255] = v as u8;
        v <<= 1;
        if v & 0x100 != 0 {
            v ^= 0x100 | POLY;
        }
        i += 1;
    }
    t[510] = t[0];
    t
}

const fn build_log() -> [u8; 256] {
    let exp = build_exp();
    let mut t = [0u8; 256];
    let mut i = 0;
    while i < 255 {
        t[exp[i] as usize] = i as u8;
        i += 1;
    }
    t
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("row length mismatch: coefficients {lhs_coeffs} vs {rhs_coeffs}, payload {lhs_payload} vs {rhs_payload}")]
    LengthMismatch {
        lhs_coeffs: usize,
        rhs_coeffs: usize,
        lhs_payload: usize,
        rhs_payload: usize,
    },
}

/// An element of GF(2^8).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn inv(self) -> Result<Gf256, GfError> {
        gf_inv(self)
    }
}

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf256({:#04x})", self.0)
    }
}

impl fmt::Display for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02x}", self.0)
    }
}

impl From<u8> for Gf256 {
    fn from(v: u8) -> Self {
        Gf256(v)
    }
}

impl Add for Gf256 {
    type Output = Gf256;
    #[inline]
    fn add(self, rhs: Gf256) -> Gf256 {
        gf_add(self, rhs)
    }
}

// Characteristic 2: subtraction is addition.
impl Sub for Gf256 {
    type Output = Gf256;
    #[inline]
    fn sub(self, rhs: Gf256) -> Gf256 {
        gf_add(self, rhs)
    }
}

impl AddAssign for Gf256 {
    #[inline]
    fn add_assign(&mut self, rhs: Gf256) {
        *self = *self + rhs;
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    #[inline]
    fn mul(self, rhs: Gf256) -> Gf256 {
        gf_mul(self, rhs)
    }
}

impl MulAssign for Gf256 {
    #[inline]
    fn mul_assign(&mut self, rhs: Gf256) {
        *self = gf_mul(*self, rhs);
    }
}

#[inline]
pub fn gf_add(a: Gf256, b: Gf256) -> Gf256 {
    Gf256(a.0 ^ b.0)
}

#[inline]
pub fn gf_mul(a: Gf256, b: Gf256) -> Gf256 {
    Gf256(mul_u8(a.0, b.0))
}

pub fn gf_inv(a: Gf256) -> Result<Gf256, GfError> {
    if a.is_zero() {
        return Err(GfError::ZeroInverse);
    }
    Ok(Gf256(EXP[255 - LOG[a.0 as usize] as usize]))
}

#[inline]
fn mul_u8(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        0
    } else {
        EXP[LOG[a as usize] as usize + LOG[b as usize] as usize]
    }
}

/// `dst[i] += scale * src[i]` over equal-length byte slices.
///
/// Panics if the slices differ in length.
pub fn slice_axpy(dst: &mut [u8], scale: Gf256, src: &[u8]) {
    assert_eq!(dst.len(), src.len(), "slice_axpy length mismatch");
    match scale.0 {
        0 => {}
        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= s),
        s => {
            let ls = LOG[s as usize] as usize;
            for (d, &x) in dst.iter_mut().zip(src) {
                if x != 0 {
                    *d ^= EXP[ls + LOG[x as usize] as usize];
                }
            }
        }
    }
}

/// `buf[i] *= scale` in place.
pub fn slice_scale(buf: &mut [u8], scale: Gf256) {
    match scale.0 {
        0 => buf.fill(0),
        1 => {}
        s => buf.iter_mut().for_each(|x| *x = mul_u8(*x, s)),
    }
}

/// One row of a linear system over GF(2^8): a coding vector indexed by block
/// (position `i` holds the coefficient of block `i + 1`) together with the
/// combined payload bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffRow {
    pub coefficients: Vec<u8>,
    pub payload: Vec<u8>,
}

impl CoeffRow {
    pub fn zero(n_blocks: usize, block_size: usize) -> Self {
        CoeffRow {
            coefficients: vec![0; n_blocks],
            payload: vec![0; block_size],
        }
    }

    /// Unit coding vector for 1-based block `index`.
    pub fn unit(n_blocks: usize, index: usize, payload: Vec<u8>) -> Self {
        let mut coefficients = vec![0; n_blocks];
        coefficients[index - 1] = 1;
        CoeffRow {
            coefficients,
            payload,
        }
    }

    pub fn coeff(&self, index: usize) -> Gf256 {
        Gf256(self.coefficients[index - 1])
    }

    /// 1-based index of the first nonzero coefficient.
    pub fn leading(&self) -> Option<usize> {
        self.coefficients
            .iter()
            .position(|&c| c != 0)
            .map(|i| i + 1)
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0)
    }

    pub fn scale(&mut self, s: Gf256) {
        slice_scale(&mut self.coefficients, s);
        slice_scale(&mut self.payload, s);
    }

    /// In-place `self += scale * source`.
    pub fn axpy(&mut self, scale: Gf256, source: &CoeffRow) -> Result<(), GfError> {
        self.check_shape(source)?;
        slice_axpy(&mut self.coefficients, scale, &source.coefficients);
        slice_axpy(&mut self.payload, scale, &source.payload);
        Ok(())
    }

    fn check_shape(&self, other: &CoeffRow) -> Result<(), GfError> {
        if self.coefficients.len() != other.coefficients.len()
            || self.payload.len() != other.payload.len()
        {
            return Err(GfError::LengthMismatch {
                lhs_coeffs: self.coefficients.len(),
                rhs_coeffs: other.coefficients.len(),
                lhs_payload: self.payload.len(),
                rhs_payload: other.payload.len(),
            });
        }
        Ok(())
    }
}

/// Returns `target + scale * source`.
pub fn row_axpy(target: &CoeffRow, scale: Gf256, source: &CoeffRow) -> Result<CoeffRow, GfError> {
    let mut out = target.clone();
    out.axpy(scale, source)?;
    Ok(out)
}
