//! Lockstep driver connecting a client, a lossy link and the server, and
//! Monte-Carlo sweeps over the loss grid.
//!
//! One round carries one transmission. Queued burst members go out in
//! consecutive rounds; a round that starts with nothing queued is a timeout.

use std::collections::VecDeque;
use std::fmt::{self, Write as _};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{BernoulliLink, ChannelError, ChannelParams, Link};
use crate::coding::{self, CodingError, SplitResource};
use crate::model::{self, ModelError};
use crate::protocol::{
    BaselineClient, Client, ClientAction, NcClient, ProtocolError, Server, Transmission, TxRole,
};
use crate::wire::{AckOption, CodingKind, RequestOption};

/// Exact CSV header of sweep output.
pub const CSV_HEADER: &str =
    "protocol,block_bytes,p,alpha,n_blocks,analytic_additional,sim_mean_additional,sim_std_additional,trials,seed";

/// Rounds after which a stochastic run is abandoned.
pub const DEFAULT_ROUND_LIMIT: usize = 50_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("transfer did not finish within {0} rounds")]
    RoundLimit(usize),
    #[error("client finished but the server holds an incomplete or different resource")]
    Corrupted,
    #[error("invalid experiment configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Bwt,
    NcBwt,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Bwt => "BWT",
            Protocol::NcBwt => "NC_BWT",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimResult {
    pub tx_total: usize,
    pub additional: usize,
    pub rounds: usize,
    pub delivered: bool,
    pub seed: u64,
    /// Delivered transmissions that carried a new block index.
    pub introductions_delivered: usize,
    /// Of those, how many failed to raise the decoder rank.
    pub introductions_redundant: usize,
}

/// What the client did after a round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reaction {
    Sent(Vec<(TxRole, RequestOption)>),
    Wait,
    Finish,
}

fn describe_option(o: &RequestOption) -> String {
    let body = match o.kind {
        _ if o.no_t == o.no_e && o.is_native() => format!("p{}", o.no_t),
        CodingKind::ImplicitXor => format!("xor[p{}..p{}]", o.no_t, o.no_e),
        CodingKind::ExplicitRlnc => {
            let coeffs: Vec<String> = o.coeffs.iter().map(|c| c.to_string()).collect();
            format!("rlnc[p{}..p{}]{{{}}}", o.no_t, o.no_e, coeffs.join(" "))
        }
    };
    format!("{body} c_c={} M={} SZX={}", o.c_c, u8::from(o.more), o.szx)
}

impl fmt::Display for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reaction::Wait => f.write_str("wait"),
            Reaction::Finish => f.write_str("finish"),
            Reaction::Sent(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|(role, o)| format!("{role} {}", describe_option(o)))
                    .collect();
                if parts.len() > 1 {
                    write!(f, "burst of {}: {}", parts.len(), parts.join("; "))
                } else {
                    write!(f, "send {}", parts.join(""))
                }
            }
        }
    }
}

fn reaction_of(action: &ClientAction) -> Reaction {
    match action {
        ClientAction::Send(t) => Reaction::Sent(vec![(t.role, t.block.option.clone())]),
        ClientAction::SendBurst(ts) => Reaction::Sent(
            ts.iter()
                .map(|t| (t.role, t.block.option.clone()))
                .collect(),
        ),
        ClientAction::Wait => Reaction::Wait,
        ClientAction::Finish => Reaction::Finish,
    }
}

/// One round as observed by the driver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRecord {
    pub round: usize,
    pub after_timeout: bool,
    pub role: TxRole,
    pub option: RequestOption,
    pub forward: bool,
    pub innovative: Option<bool>,
    pub ack: Option<AckOption>,
    pub reverse: Option<bool>,
    pub reaction: Option<Reaction>,
}

impl RoundRecord {
    /// `(sn, htp, rdt_s)` of the server's ack, if one was produced.
    pub fn ack_triple(&self) -> Option<(u32, u32, u8)> {
        self.ack.map(|a| (u32::from(a.sn), a.htp(), a.rdt_s))
    }
}

fn dl(b: bool) -> &'static str {
    if b {
        "D"
    } else {
        "L"
    }
}

impl fmt::Display for RoundRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "round {:>3}", self.round)?;
        if self.after_timeout {
            f.write_str(" [timeout]")?;
        }
        write!(
            f,
            " client -> {} {} | forward {}",
            self.role,
            describe_option(&self.option),
            dl(self.forward)
        )?;
        if let Some(a) = self.ack {
            write!(
                f,
                " | server {} ack R({},{},{}) c_s={} u={}",
                if self.innovative == Some(true) {
                    "innovative,"
                } else {
                    "redundant,"
                },
                a.sn,
                a.htp(),
                a.rdt_s,
                a.c_s,
                a.u
            )?;
        }
        if let Some(r) = self.reverse {
            write!(f, " | reverse {}", dl(r))?;
        }
        match &self.reaction {
            Some(r) => write!(f, " | client: {r}"),
            None => f.write_str(" | client: no ack"),
        }
    }
}

/// Bounds and hooks for a single transfer.
pub struct RunOptions<'o> {
    pub round_limit: usize,
    pub rlnc_seed: u64,
    pub observer: Option<&'o mut dyn FnMut(&RoundRecord)>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        RunOptions {
            round_limit: DEFAULT_ROUND_LIMIT,
            rlnc_seed: 0,
            observer: None,
        }
    }
}

/// Drives one complete transfer of `resource` over `link`.
pub fn run_transfer(
    protocol: Protocol,
    resource: &SplitResource,
    link: &mut dyn Link,
    opts: RunOptions<'_>,
) -> Result<SimResult, SimError> {
    match protocol {
        Protocol::Bwt => {
            let (client, first) = BaselineClient::new(resource)?;
            drive(client, first, resource, link, opts)
        }
        Protocol::NcBwt => {
            let (client, first) = NcClient::new(resource, opts.rlnc_seed)?;
            drive(client, first, resource, link, opts)
        }
    }
}

fn drive<C: Client>(
    mut client: C,
    first: ClientAction,
    resource: &SplitResource,
    link: &mut dyn Link,
    mut opts: RunOptions<'_>,
) -> Result<SimResult, SimError> {
    let mut server = Server::for_resource(resource);
    let mut queue: VecDeque<Transmission> = first.into_transmissions().into();
    let mut result = SimResult {
        seed: opts.rlnc_seed,
        ..SimResult::default()
    };

    loop {
        if result.rounds >= opts.round_limit {
            return Err(SimError::RoundLimit(opts.round_limit));
        }
        let after_timeout = queue.is_empty();
        if after_timeout {
            queue.extend(client.on_timeout()?.into_transmissions());
        }
        let tx = queue
            .pop_front()
            .expect("timeout always yields a transmission");
        result.rounds += 1;
        result.tx_total += 1;

        let mut record = RoundRecord {
            round: result.rounds,
            after_timeout,
            role: tx.role,
            option: tx.block.option.clone(),
            forward: link.forward_delivered()?,
            innovative: None,
            ack: None,
            reverse: None,
            reaction: None,
        };
        let mut finished = false;
        if record.forward {
            let ack = server.on_block(&tx.block)?;
            let innovative = server.last_innovative();
            if tx.role == TxRole::Introduce {
                result.introductions_delivered += 1;
                if !innovative {
                    result.introductions_redundant += 1;
                }
            }
            record.innovative = Some(innovative);
            record.ack = Some(ack);
            let back = link.reverse_delivered()?;
            record.reverse = Some(back);
            if back {
                let action = client.on_ack(&ack)?;
                record.reaction = Some(reaction_of(&action));
                finished = action == ClientAction::Finish;
                queue.extend(action.into_transmissions());
            }
        }
        if let Some(obs) = opts.observer.as_mut() {
            obs(&record);
        }
        if finished {
            break;
        }
    }

    debug_assert_eq!(client.tx_count(), result.tx_total);
    let original: Vec<u8> = coding::reassemble(&resource.blocks, resource.original_len);
    match server.resource() {
        Some(bytes) if bytes == original => {}
        _ => return Err(SimError::Corrupted),
    }
    result.delivered = server.state().delivered;
    result.additional = result.tx_total - resource.n_blocks();
    Ok(result)
}

/// Transfer over a seeded Bernoulli link with a freshly generated resource.
pub fn run_random_transfer(
    protocol: Protocol,
    resource_bytes: usize,
    block_bytes: usize,
    params: ChannelParams<f64>,
    seed: u64,
) -> Result<SimResult, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bytes = vec![0u8; resource_bytes];
    rng.fill_bytes(&mut bytes);
    let resource = coding::split_resource(&bytes, block_bytes)?;
    let mut link = BernoulliLink::new(params, rng.next_u64());
    run_transfer(
        protocol,
        &resource,
        &mut link,
        RunOptions {
            rlnc_seed: rng.next_u64(),
            ..RunOptions::default()
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolSelect {
    Bwt,
    Nc,
    Both,
}

impl ProtocolSelect {
    pub fn protocols(self) -> &'static [Protocol] {
        match self {
            ProtocolSelect::Bwt => &[Protocol::Bwt],
            ProtocolSelect::Nc => &[Protocol::NcBwt],
            ProtocolSelect::Both => &[Protocol::Bwt, Protocol::NcBwt],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub resource_bytes: usize,
    pub block_bytes: Vec<usize>,
    pub p_grid: Vec<f64>,
    pub alphas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub protocol: ProtocolSelect,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            resource_bytes: 512_000,
            block_bytes: vec![256, 512, 1024],
            p_grid: p_range(0.0, 0.9, 0.05).expect("valid default range"),
            alphas: vec![0.3, 0.7, 1.0],
            trials: 0,
            seed: 1,
            protocol: ProtocolSelect::Both,
        }
    }
}

/// Rounds grid values to 1e-9 so that `0.05 * 3` prints as `0.15`.
fn tidy(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Inclusive `lo..=hi` in `step` increments.
pub fn p_range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, SimError> {
    if step.is_nan() || step <= 0.0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(SimError::Config(format!("bad range {lo}:{hi}:{step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| tidy(lo + k as f64 * step)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub protocol: Protocol,
    pub block_bytes: usize,
    pub p: f64,
    pub alpha: f64,
    pub n_blocks: u64,
    pub analytic: f64,
    pub sim_mean: Option<f64>,
    pub sim_std: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{:.6},{},{},{},{}",
            self.protocol,
            self.block_bytes,
            self.p,
            self.alpha,
            self.n_blocks,
            self.analytic,
            opt(self.sim_mean),
            opt(self.sim_std),
            self.trials,
            self.seed
        )
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial, independent of thread scheduling.
pub fn trial_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.block_bytes.is_empty() || self.p_grid.is_empty() || self.alphas.is_empty() {
            return Err(SimError::Config("grids must be nonempty".into()));
        }
        if self.resource_bytes == 0 {
            return Err(SimError::Config("resource must be nonempty".into()));
        }
        for &b in &self.block_bytes {
            if crate::wire::szx_for_block_size(b).is_none() {
                return Err(SimError::Config(format!(
                    "block size {b} is not a power of two in 16..=1024"
                )));
            }
        }
        for &p in &self.p_grid {
            for &a in &self.alphas {
                model::additional_wnc(1, p, a)?;
                model::additional_wonc(1, p)?;
                if self.trials > 0 {
                    ChannelParams::new(p, a)?;
                }
            }
        }
        Ok(())
    }
}

/// One row per (protocol, block size, p, alpha), in that order.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>, SimError> {
    config.validate()?;
    let mut rows = Vec::new();
    for &protocol in config.protocol.protocols() {
        for &b in &config.block_bytes {
            let n = model::blocks_count(config.resource_bytes as u64, b as u64)?;
            for (pi, &p) in config.p_grid.iter().enumerate() {
                for (ai, &alpha) in config.alphas.iter().enumerate() {
                    let analytic = match protocol {
                        Protocol::Bwt => model::additional_wonc(n, p)?,
                        Protocol::NcBwt => model::additional_wnc(n, p, alpha)?,
                    };
                    let (sim_mean, sim_std) = if config.trials > 0 {
                        let key = [protocol as u64, b as u64, pi as u64, ai as u64];
                        let (m, s) = simulate_point(config, protocol, b, p, alpha, &key)?;
                        (Some(m), Some(s))
                    } else {
                        (None, None)
                    };
                    rows.push(SweepRow {
                        protocol,
                        block_bytes: b,
                        p,
                        alpha,
                        n_blocks: n,
                        analytic,
                        sim_mean,
                        sim_std,
                        trials: config.trials,
                        seed: config.seed,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Mean and sample standard deviation of additional blocks over the trials.
pub fn simulate_point(
    config: &ExperimentConfig,
    protocol: Protocol,
    block_bytes: usize,
    p: f64,
    alpha: f64,
    key: &[u64],
) -> Result<(f64, f64), SimError> {
    let params = ChannelParams::new(p, alpha)?;
    let samples: Vec<f64> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut parts = key.to_vec();
            parts.push(t as u64);
            let seed = trial_seed(config.seed, &parts);
            run_random_transfer(protocol, config.resource_bytes, block_bytes, params, seed)
                .map(|r| r.additional as f64)
        })
        .collect::<Result<_, _>>()?;
    Ok(mean_std(&samples))
}

pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    out
}
