//! Coded-block construction and the server-side Gauss-Jordan decoder.
//!
//! The decoder keeps its rows in reduced row echelon form at all times, so
//! the set of pivot columns is exactly the set of *seen* blocks: for every
//! pivot `k` the server can express block `k` plus a combination of
//! higher-indexed, not-yet-seen blocks.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::gf256::{self, CoeffRow, Gf256};
use crate::wire::{self, CodingKind, RequestOption, WireError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodingError {
    #[error("resource is empty")]
    EmptyResource,
    #[error("unsupported block size {0}; expected a power of two in 16..=1024")]
    UnsupportedBlockSize(usize),
    #[error("coding window is empty")]
    EmptyWindow,
    #[error("coding window is not a contiguous run of block indices")]
    NonContiguousWindow,
    #[error("window needs {expected} coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("window edge coefficient must be nonzero")]
    ZeroEdgeCoefficient,
    #[error("block index {index} outside resource of {n_total} blocks")]
    IndexOutOfRange { index: usize, n_total: usize },
    #[error("more flag is {more} but window end {no_e} of {n_total}")]
    MoreFlagMismatch {
        more: bool,
        no_e: usize,
        n_total: usize,
    },
    #[error("payload is {got} bytes, block size is {expected}")]
    PayloadLength { expected: usize, got: usize },
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// One fixed-size slice of the resource, indexed from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub index: usize,
    pub payload: Vec<u8>,
}

/// A resource split into equal blocks, last one zero-padded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitResource {
    pub blocks: Vec<Block>,
    pub block_size: usize,
    pub original_len: usize,
}

impl SplitResource {
    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn szx(&self) -> u8 {
        wire::szx_for_block_size(self.block_size).expect("block size validated on split")
    }

    /// Blocks `lo..=hi` (1-based).
    pub fn window(&self, lo: usize, hi: usize) -> &[Block] {
        &self.blocks[lo - 1..hi]
    }
}

pub fn split_resource(resource: &[u8], block_size: usize) -> Result<SplitResource, CodingError> {
    if resource.is_empty() {
        return Err(CodingError::EmptyResource);
    }
    if wire::szx_for_block_size(block_size).is_none() {
        return Err(CodingError::UnsupportedBlockSize(block_size));
    }
    let blocks = resource
        .chunks(block_size)
        .enumerate()
        .map(|(i, chunk)| {
            let mut payload = chunk.to_vec();
            payload.resize(block_size, 0);
            Block {
                index: i + 1,
                payload,
            }
        })
        .collect();
    Ok(SplitResource {
        blocks,
        block_size,
        original_len: resource.len(),
    })
}

/// Concatenates decoded blocks and strips the padding.
pub fn reassemble(blocks: &[Block], original_len: usize) -> Vec<u8> {
    let mut out: Vec<u8> = blocks
        .iter()
        .flat_map(|b| b.payload.iter().copied())
        .collect();
    out.truncate(original_len);
    out
}

/// A block on the wire: option value plus combined payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedBlock {
    pub option: RequestOption,
    pub payload: Vec<u8>,
}

fn window_bounds(blocks: &[Block]) -> Result<(u16, u16), CodingError> {
    let first = blocks.first().ok_or(CodingError::EmptyWindow)?;
    if blocks
        .iter()
        .enumerate()
        .any(|(i, b)| b.index != first.index + i)
    {
        return Err(CodingError::NonContiguousWindow);
    }
    let lo = first.index;
    let hi = lo + blocks.len() - 1;
    let to_u16 = |i: usize| {
        u16::try_from(i).map_err(|_| CodingError::IndexOutOfRange {
            index: i,
            n_total: usize::from(u16::MAX),
        })
    };
    if lo == 0 {
        return Err(WireError::ZeroIndex.into());
    }
    Ok((to_u16(lo)?, to_u16(hi)?))
}

/// XOR of a contiguous window. A single-block window yields the native block.
pub fn make_xor(blocks: &[Block], c_c: u8, more: bool, szx: u8) -> Result<CodedBlock, CodingError> {
    let (no_t, no_e) = window_bounds(blocks)?;
    let mut payload = blocks[0].payload.clone();
    for b in &blocks[1..] {
        gf256::slice_axpy(&mut payload, Gf256::ONE, &b.payload);
    }
    Ok(CodedBlock {
        option: RequestOption::xor(c_c, no_t, no_e, more, szx),
        payload,
    })
}

/// Random linear combination with coefficients drawn uniformly from 1..=255.
pub fn make_rlnc<R: Rng + ?Sized>(
    blocks: &[Block],
    c_c: u8,
    more: bool,
    szx: u8,
    rng: &mut R,
) -> Result<CodedBlock, CodingError> {
    let coeffs: Vec<Gf256> = (0..blocks.len())
        .map(|_| Gf256(rng.random_range(1..=255)))
        .collect();
    make_rlnc_with(blocks, &coeffs, c_c, more, szx)
}

/// Linear combination with caller-chosen coefficients.
pub fn make_rlnc_with(
    blocks: &[Block],
    coeffs: &[Gf256],
    c_c: u8,
    more: bool,
    szx: u8,
) -> Result<CodedBlock, CodingError> {
    let (no_t, no_e) = window_bounds(blocks)?;
    if coeffs.len() != blocks.len() {
        return Err(CodingError::CoefficientCount {
            expected: blocks.len(),
            got: coeffs.len(),
        });
    }
    if coeffs[0].is_zero() || coeffs[coeffs.len() - 1].is_zero() {
        return Err(CodingError::ZeroEdgeCoefficient);
    }
    let mut payload = vec![0u8; blocks[0].payload.len()];
    for (b, &c) in blocks.iter().zip(coeffs) {
        gf256::slice_axpy(&mut payload, c, &b.payload);
    }
    Ok(CodedBlock {
        option: RequestOption {
            c_c,
            no_t,
            no_e,
            more,
            szx,
            kind: CodingKind::ExplicitRlnc,
            coeffs: coeffs.to_vec(),
        },
        payload,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsertOutcome {
    pub innovative: bool,
    pub new_seen: Vec<usize>,
}

/// `(sn, htp, rdt_s)` as reported to the client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SeenReport {
    pub sn: usize,
    pub htp: usize,
    pub rdt_s: usize,
}

impl SeenReport {
    pub fn triple(&self) -> (usize, usize, usize) {
        (self.sn, self.htp, self.rdt_s)
    }
}

/// Stored row: coding vector and payload; nonzero coefficients live in
/// `[pivot, hi]`.
#[derive(Debug, Clone)]
struct PivotRow {
    row: CoeffRow,
    hi: usize,
}

#[derive(Debug, Clone)]
pub struct DecoderState {
    n_total: usize,
    block_size: usize,
    rows: BTreeMap<usize, PivotRow>,
    htp: usize,
    prefix: usize,
}

impl DecoderState {
    pub fn new(n_total: usize, block_size: usize) -> Self {
        DecoderState {
            n_total,
            block_size,
            rows: BTreeMap::new(),
            htp: 0,
            prefix: 0,
        }
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn htp(&self) -> usize {
        self.htp
    }

    pub fn is_seen(&self, index: usize) -> bool {
        self.rows.contains_key(&index)
    }

    pub fn seen(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.keys().copied()
    }

    pub fn is_complete(&self) -> bool {
        self.rank() == self.n_total
    }

    /// Rebuilds the coding vector a block's option describes.
    fn row_for(&self, cb: &CodedBlock) -> Result<(CoeffRow, usize, usize), CodingError> {
        let opt = &cb.option;
        opt.validate()?;
        let (lo, hi) = (usize::from(opt.no_t), usize::from(opt.no_e));
        if hi > self.n_total {
            return Err(CodingError::IndexOutOfRange {
                index: hi,
                n_total: self.n_total,
            });
        }
        if opt.more != (hi < self.n_total) {
            return Err(CodingError::MoreFlagMismatch {
                more: opt.more,
                no_e: hi,
                n_total: self.n_total,
            });
        }
        if cb.payload.len() != self.block_size {
            return Err(CodingError::PayloadLength {
                expected: self.block_size,
                got: cb.payload.len(),
            });
        }
        let mut row = CoeffRow::zero(self.n_total, self.block_size);
        for i in lo..=hi {
            row.coefficients[i - 1] = opt.coefficient(i).0;
        }
        row.payload.copy_from_slice(&cb.payload);
        Ok((row, lo, hi))
    }

    pub fn insert(&mut self, cb: &CodedBlock) -> Result<InsertOutcome, CodingError> {
        let (mut row, lo, hi) = self.row_for(cb)?;
        self.htp = self.htp.max(hi);

        // Forward elimination. A stored row touches only its own pivot column
        // and non-pivot columns, so one ascending pass clears every pivot.
        let mut row_hi = hi;
        for (&pivot, stored) in self.rows.range(lo..) {
            if pivot > row_hi {
                break;
            }
            let c = row.coeff(pivot);
            if c.is_zero() {
                continue;
            }
            axpy_range(&mut row, c, &stored.row, pivot, stored.hi);
            row_hi = row_hi.max(stored.hi);
        }

        let Some(pivot) = row.coefficients[..row_hi]
            .iter()
            .position(|&c| c != 0)
            .map(|i| i + 1)
        else {
            return Ok(InsertOutcome {
                innovative: false,
                new_seen: Vec::new(),
            });
        };
        let norm = row.coeff(pivot).inv().expect("pivot is nonzero");
        row.scale(norm);

        // Back-substitution into earlier rows that reach the new pivot column.
        for (&p, stored) in self.rows.range_mut(..pivot) {
            if stored.hi < pivot {
                continue;
            }
            let c = stored.row.coeff(pivot);
            if !c.is_zero() {
                axpy_range(&mut stored.row, c, &row, pivot, row_hi);
                stored.hi = stored.hi.max(row_hi);
                debug_assert_eq!(stored.row.leading(), Some(p));
            }
        }
        self.rows.insert(pivot, PivotRow { row, hi: row_hi });
        while self.rows.contains_key(&(self.prefix + 1)) {
            self.prefix += 1;
        }
        Ok(InsertOutcome {
            innovative: true,
            new_seen: vec![pivot],
        })
    }

    /// Highest pivot, seen or not contiguously.
    pub fn max_seen(&self) -> usize {
        self.rows.keys().next_back().copied().unwrap_or(0)
    }

    /// `sn` is the newest block of the fully seen prefix `1..=sn`. It equals
    /// the highest pivot unless an unlucky random draw left a hole, in which
    /// case repairs must start at the hole to stay decodable.
    pub fn seen_report(&self) -> SeenReport {
        SeenReport {
            sn: self.prefix,
            htp: self.htp,
            rdt_s: self.htp - self.rank(),
        }
    }

    /// All original blocks once the system has full rank.
    pub fn try_decode(&self) -> Option<Vec<Block>> {
        if !self.is_complete() {
            return None;
        }
        Some(
            self.rows
                .iter()
                .map(|(&index, r)| {
                    debug_assert!(r.row.coefficients.iter().enumerate().all(|(i, &c)| {
                        if i + 1 == index {
                            c == 1
                        } else {
                            c == 0
                        }
                    }));
                    Block {
                        index,
                        payload: r.row.payload.clone(),
                    }
                })
                .collect(),
        )
    }

    /// Walks every row and checks the reduced-row-echelon invariants.
    pub fn check_rref(&self) -> Result<(), String> {
        for (&pivot, stored) in &self.rows {
            if stored.row.leading() != Some(pivot) {
                return Err(format!("row {pivot} leads at {:?}", stored.row.leading()));
            }
            if stored.row.coeff(pivot) != Gf256::ONE {
                return Err(format!("row {pivot} pivot is {}", stored.row.coeff(pivot)));
            }
            if let Some(last) = stored.row.coefficients.iter().rposition(|&c| c != 0) {
                if last + 1 > stored.hi {
                    return Err(format!("row {pivot} exceeds tracked bound {}", stored.hi));
                }
            }
            for (&other, o) in &self.rows {
                if other != pivot && !o.row.coeff(pivot).is_zero() {
                    return Err(format!("row {other} has nonzero in pivot column {pivot}"));
                }
            }
        }
        if let Some(&max) = self.rows.keys().next_back() {
            if self.htp < max {
                return Err(format!("htp {} below max seen {max}", self.htp));
            }
        }
        Ok(())
    }
}

/// `dst += scale * src`, touching only coefficient columns `lo..=hi`.
fn axpy_range(dst: &mut CoeffRow, scale: Gf256, src: &CoeffRow, lo: usize, hi: usize) {
    gf256::slice_axpy(
        &mut dst.coefficients[lo - 1..hi],
        scale,
        &src.coefficients[lo - 1..hi],
    );
    gf256::slice_axpy(&mut dst.payload, scale, &src.payload);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn resource(n: usize, b: usize, seed: u64) -> SplitResource {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bytes: Vec<u8> = (0..n * b).map(|_| rng.random()).collect();
        split_resource(&bytes, b).unwrap()
    }

    fn xor(res: &SplitResource, lo: usize, hi: usize) -> CodedBlock {
        make_xor(res.window(lo, hi), 0, hi < res.n_blocks(), res.szx()).unwrap()
    }

    #[test]
    fn split_counts() {
        assert_eq!(
            split_resource(&vec![7; 512_000], 1024).unwrap().n_blocks(),
            500
        );
        assert_eq!(
            split_resource(&vec![7; 512_000], 256).unwrap().n_blocks(),
            2000
        );
        let one = split_resource(&[9], 16).unwrap();
        assert_eq!(one.n_blocks(), 1);
        assert_eq!(one.blocks[0].payload[0], 9);
        assert!(one.blocks[0].payload[1..].iter().all(|&b| b == 0));
        assert_eq!(one.blocks[0].payload.len(), 16);
        assert_eq!(split_resource(&[], 16), Err(CodingError::EmptyResource));
        assert_eq!(
            split_resource(&[1], 100),
            Err(CodingError::UnsupportedBlockSize(100))
        );
        assert_eq!(
            split_resource(&[1], 2048),
            Err(CodingError::UnsupportedBlockSize(2048))
        );
    }

    #[test]
    fn reassemble_strips_padding() {
        let data: Vec<u8> = (0..100u8).collect();
        let res = split_resource(&data, 32).unwrap();
        assert_eq!(res.n_blocks(), 4);
        assert_eq!(reassemble(&res.blocks, res.original_len), data);
    }

    #[test]
    fn xor_examples() {
        let res = resource(5, 16, 1);
        let single = xor(&res, 1, 1);
        assert_eq!(single.payload, res.blocks[0].payload);
        assert!(single.option.is_native());

        let four = xor(&res, 1, 4);
        let mut expect = vec![0u8; 16];
        for b in &res.blocks[..4] {
            for (e, x) in expect.iter_mut().zip(&b.payload) {
                *e ^= x;
            }
        }
        assert_eq!(four.payload, expect);
        assert_eq!((four.option.no_t, four.option.no_e), (1, 4));

        let mut twice = four.payload.clone();
        gf256::slice_axpy(&mut twice, Gf256::ONE, &four.payload);
        assert!(twice.iter().all(|&b| b == 0));
    }

    #[test]
    fn xor_window_errors() {
        let res = resource(5, 16, 1);
        assert_eq!(make_xor(&[], 0, true, 0), Err(CodingError::EmptyWindow));
        let gap = vec![res.blocks[0].clone(), res.blocks[2].clone()];
        assert_eq!(
            make_xor(&gap, 0, true, 0),
            Err(CodingError::NonContiguousWindow)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            make_rlnc(&[], 1, true, 0, &mut rng),
            Err(CodingError::EmptyWindow)
        );
    }

    #[test]
    fn rlnc_matches_row_axpy() {
        let res = resource(5, 16, 2);
        let cb = make_rlnc_with(res.window(3, 4), &[Gf256(0x05), Gf256(0x0A)], 1, true, 0).unwrap();
        let zero = CoeffRow::zero(5, 16);
        let p3 = CoeffRow::unit(5, 3, res.blocks[2].payload.clone());
        let p4 = CoeffRow::unit(5, 4, res.blocks[3].payload.clone());
        let acc = gf256::row_axpy(&zero, Gf256(0x05), &p3).unwrap();
        let acc = gf256::row_axpy(&acc, Gf256(0x0A), &p4).unwrap();
        assert_eq!(cb.payload, acc.payload);
        assert_eq!(acc.coefficients, vec![0, 0, 0x05, 0x0A, 0]);
        assert_eq!(cb.option.kind, CodingKind::ExplicitRlnc);
    }

    #[test]
    fn rlnc_single_block_decodes_by_scaling() {
        let res = resource(5, 16, 3);
        let cb = make_rlnc_with(res.window(4, 4), &[Gf256(0x33)], 1, true, 0).unwrap();
        let mut back = cb.payload.clone();
        gf256::slice_scale(&mut back, Gf256(0x33).inv().unwrap());
        assert_eq!(back, res.blocks[3].payload);
    }

    #[test]
    fn random_coefficients_nonzero() {
        let res = resource(8, 16, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let cb = make_rlnc(res.window(2, 8), 1, true, 0, &mut rng).unwrap();
            assert!(cb.option.coeffs.iter().all(|c| !c.is_zero()));
            cb.option.validate().unwrap();
        }
    }

    #[test]
    fn two_rlnc_rank_two_recovers_both() {
        let res = resource(4, 16, 5);
        let mut dec = DecoderState::new(4, 16);
        dec.insert(&xor(&res, 1, 1)).unwrap();
        dec.insert(&xor(&res, 2, 2)).unwrap();
        let a = make_rlnc_with(res.window(3, 4), &[Gf256(1), Gf256(2)], 1, false, 0).unwrap();
        let b = make_rlnc_with(res.window(3, 4), &[Gf256(3), Gf256(7)], 2, false, 0).unwrap();
        assert!(dec.insert(&a).unwrap().innovative);
        assert!(dec.insert(&b).unwrap().innovative);
        assert_eq!(dec.try_decode().unwrap(), res.blocks);
    }

    #[test]
    fn scenario_seen_reports() {
        let res = resource(5, 32, 6);
        let mut dec = DecoderState::new(5, 32);
        assert_eq!(dec.seen_report().triple(), (0, 0, 0));

        let o = dec.insert(&xor(&res, 1, 1)).unwrap();
        assert_eq!(o.new_seen, vec![1]);
        assert_eq!(dec.seen_report().triple(), (1, 1, 0));

        let o = dec.insert(&xor(&res, 1, 4)).unwrap();
        assert!(o.innovative);
        assert_eq!(o.new_seen, vec![2]);
        assert_eq!(dec.seen().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(dec.seen_report().triple(), (2, 4, 2));

        assert!(!dec.insert(&xor(&res, 1, 1)).unwrap().innovative);
        assert_eq!(dec.seen_report().triple(), (2, 4, 2));

        let r = make_rlnc_with(res.window(3, 4), &[Gf256(0x21), Gf256(0x9c)], 2, true, 6).unwrap();
        assert!(dec.insert(&r).unwrap().innovative);
        assert_eq!(dec.seen_report().triple(), (3, 4, 1));
        assert!(dec.try_decode().is_none());

        dec.insert(&xor(&res, 4, 4)).unwrap();
        assert_eq!(dec.seen_report().triple(), (4, 4, 0));
        assert!(dec.try_decode().is_none());
        dec.insert(&xor(&res, 5, 5)).unwrap();
        assert_eq!(dec.seen_report().triple(), (5, 5, 0));
        dec.check_rref().unwrap();
        assert_eq!(dec.try_decode().unwrap(), res.blocks);
    }

    #[test]
    fn identity_system_decodes() {
        let res = resource(6, 16, 7);
        let mut dec = DecoderState::new(6, 16);
        for i in (1..=6).rev() {
            dec.insert(&xor(&res, i, i)).unwrap();
            dec.check_rref().unwrap();
        }
        assert_eq!(dec.try_decode().unwrap(), res.blocks);
    }

    #[test]
    fn insert_rejects_malformed() {
        let res = resource(5, 16, 8);
        let mut dec = DecoderState::new(4, 16);
        assert!(matches!(
            dec.insert(&xor(&res, 5, 5)),
            Err(CodingError::IndexOutOfRange { index: 5, .. })
        ));
        let mut dec = DecoderState::new(5, 16);
        let mut bad = xor(&res, 1, 2);
        bad.option.more = false;
        assert!(matches!(
            dec.insert(&bad),
            Err(CodingError::MoreFlagMismatch { .. })
        ));
        let mut short = xor(&res, 1, 2);
        short.payload.pop();
        assert!(matches!(
            dec.insert(&short),
            Err(CodingError::PayloadLength { .. })
        ));
        let mut inverted = xor(&res, 1, 2);
        inverted.option.no_t = 3;
        assert!(matches!(dec.insert(&inverted), Err(CodingError::Wire(_))));
        assert_eq!(dec.rank(), 0);
        assert_eq!(dec.htp(), 0);
    }

    #[test]
    fn random_dense_system_stays_rref() {
        let n = 12;
        let res = resource(n, 16, 9);
        let mut dec = DecoderState::new(n, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        while !dec.is_complete() {
            let lo = rng.random_range(1..=n);
            let hi = rng.random_range(lo..=n);
            let cb = make_rlnc(res.window(lo, hi), 1, hi < n, 0, &mut rng).unwrap();
            let before = dec.rank();
            let out = dec.insert(&cb).unwrap();
            assert_eq!(dec.rank(), before + usize::from(out.innovative));
            dec.check_rref().unwrap();
        }
        assert_eq!(dec.try_decode().unwrap(), res.blocks);
    }
}
