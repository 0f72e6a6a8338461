//! Oracles and fixtures shared by the integration tests. Everything here is
//! written independently of the library's fast paths.

#![allow(dead_code)]

use ncbwt::channel::{ScriptedLink, Trace};
use ncbwt::coding::{self, SplitResource};
use ncbwt::sim::{self, Protocol, RoundRecord, RunOptions, SimResult};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shift-and-add multiply in GF(2)[x], then reduction modulo
/// x^8 + x^4 + x^3 + x^2 + 1.
pub fn clmul_reduce(a: u8, b: u8) -> u8 {
    let mut wide: u16 = 0;
    for bit in 0..8 {
        if (b >> bit) & 1 == 1 {
            wide ^= u16::from(a) << bit;
        }
    }
    for bit in (8..16).rev() {
        if (wide >> bit) & 1 == 1 {
            wide ^= 0x11D << (bit - 8);
        }
    }
    wide as u8
}

/// Expected additional transmissions as a geometric series: every
/// transmission needs `k` extra attempts with probability `loss^k (1 - loss)`,
/// so the extra count per block is `sum_{k>=1} loss^k`.
pub fn series_additional(n: u64, loss: f64) -> f64 {
    let mut term = loss;
    let mut sum = 0.0;
    for _ in 0..10_000 {
        sum += term;
        term *= loss;
        if term < 1e-18 {
            break;
        }
    }
    n as f64 * sum
}

/// Deterministic pseudo-random resource.
pub fn random_resource(len: usize, block: usize, seed: u64) -> (Vec<u8>, SplitResource) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bytes = vec![0u8; len];
    rng.fill_bytes(&mut bytes);
    let res = coding::split_resource(&bytes, block).expect("valid resource");
    (bytes, res)
}

/// Replays the bundled five-block walkthrough and records every round.
pub fn replay_walkthrough(protocol: Protocol) -> (SimResult, Vec<RoundRecord>, usize) {
    let trace: Trace = ncbwt::WALKTHROUGH_TRACE
        .parse()
        .expect("bundled trace parses");
    let (_, resource) = random_resource(5 * 1024, 1024, 1);
    let mut link = ScriptedLink::new(trace);
    let mut records = Vec::new();
    let mut observe = |r: &RoundRecord| records.push(r.clone());
    let result = sim::run_transfer(
        protocol,
        &resource,
        &mut link,
        RunOptions {
            rlnc_seed: 11,
            observer: Some(&mut observe),
            ..RunOptions::default()
        },
    )
    .expect("walkthrough completes");
    let used = link.consumed();
    (result, records, used)
}
