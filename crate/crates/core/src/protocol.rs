//! Client and server state machines for coded block-wise transfer, plus the
//! uncoded stop-and-wait baseline.
//!
//! The coded client introduces exactly one new block per transmission while
//! it has no feedback: the first send is native `p1`, and each timeout grows
//! the XOR window by one block. Every delivered introduction is therefore
//! innovative at the server. Once an ack reports `rdt_s > 0` missing degrees
//! of freedom, the client sends that many repairs over the unseen window
//! `[sn + 1, htp]`, tagging each with a fresh `c_c` so the acks can be told
//! apart.
//!
//! Ack handling on the client:
//!
//! * `c_s == 0` acknowledges an introduction. If `htp` is below the window
//!   end of the latest introduction the ack is stale and ignored. Otherwise
//!   `rdt_s == 0` advances to the next native block (or finishes) and
//!   `rdt_s > 0` starts a repair burst.
//! * `c_s > 0` acknowledges a repair. An ack for an older repair than the
//!   newest in flight only matters if it reveals more missing blocks than
//!   repairs still in flight; the shortfall is covered with further random
//!   repairs. An ack for the newest repair either resumes introduction or
//!   starts a new burst. A single missing block with `u == 1` is sent
//!   natively.

use std::collections::BTreeSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::coding::{self, CodedBlock, CodingError, DecoderState, SplitResource};
use crate::wire::{AckOption, WireError};

/// Largest coding window, so that `htp - sn` fits the one-byte `u` field.
pub const MAX_WINDOW: usize = 255;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("resource has no blocks")]
    EmptyResource,
    #[error("resource of {0} blocks exceeds the 16-bit index space")]
    TooManyBlocks(usize),
    #[error("client already finished")]
    AlreadyDone,
    #[error("ack field overflow: htp {htp} sn {sn} rdt_s {rdt_s}")]
    AckOverflow { sn: usize, htp: usize, rdt_s: usize },
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Introduce,
    Repair,
    Done,
}

/// Why a block was sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TxRole {
    /// Carries a block index the client has not sent before in this window.
    Introduce,
    /// Repeats an earlier combination (baseline retransmission, or the coded
    /// client's window is exhausted).
    Resend,
    /// Random linear repair over the unseen window.
    Repair,
    /// Single missing block sent uncoded instead of a repair.
    NativeRepair,
}

impl fmt::Display for TxRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TxRole::Introduce => "introduce",
            TxRole::Resend => "resend",
            TxRole::Repair => "repair",
            TxRole::NativeRepair => "native-repair",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    pub block: CodedBlock,
    pub role: TxRole,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientAction {
    Send(Transmission),
    SendBurst(Vec<Transmission>),
    Wait,
    Finish,
}

impl ClientAction {
    pub fn into_transmissions(self) -> Vec<Transmission> {
        match self {
            ClientAction::Send(t) => vec![t],
            ClientAction::SendBurst(ts) => ts,
            ClientAction::Wait | ClientAction::Finish => Vec::new(),
        }
    }
}

/// Behaviour shared by both clients, as seen by the round driver.
pub trait Client {
    fn on_timeout(&mut self) -> Result<ClientAction, ProtocolError>;
    fn on_ack(&mut self, ack: &AckOption) -> Result<ClientAction, ProtocolError>;
    fn tx_count(&self) -> usize;
    fn is_done(&self) -> bool;
}

fn check_resource(resource: &SplitResource) -> Result<usize, ProtocolError> {
    let n = resource.n_blocks();
    if n == 0 {
        return Err(ProtocolError::EmptyResource);
    }
    if n > usize::from(u16::MAX) {
        return Err(ProtocolError::TooManyBlocks(n));
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientState {
    pub n_total: usize,
    pub w_lo: usize,
    pub w_hi: usize,
    pub phase: Phase,
    pub c_c_next: u16,
    pub outstanding_repairs: BTreeSet<u8>,
    pub last_ack: Option<AckOption>,
    pub tx_count: usize,
    pub additional_count: usize,
    /// Window end of the latest introduction.
    pub last_no_e: usize,
}

/// Network-coded client.
#[derive(Debug, Clone)]
pub struct NcClient<'a> {
    resource: &'a SplitResource,
    state: ClientState,
    rng: ChaCha8Rng,
}

impl<'a> NcClient<'a> {
    /// Starts a transfer; the first action sends native `p1` with `c_c = 0`.
    pub fn new(
        resource: &'a SplitResource,
        seed: u64,
    ) -> Result<(Self, ClientAction), ProtocolError> {
        let n = check_resource(resource)?;
        let mut client = NcClient {
            resource,
            state: ClientState {
                n_total: n,
                w_lo: 1,
                w_hi: 1,
                phase: Phase::Introduce,
                c_c_next: 1,
                outstanding_repairs: BTreeSet::new(),
                last_ack: None,
                tx_count: 0,
                additional_count: 0,
                last_no_e: 1,
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let first = client.xor(1, 1, 0, TxRole::Introduce)?;
        Ok((client, ClientAction::Send(first)))
    }

    pub fn state(&self) -> &ClientState {
        &self.state
    }

    fn more(&self, hi: usize) -> bool {
        hi < self.state.n_total
    }

    fn xor(
        &mut self,
        lo: usize,
        hi: usize,
        c_c: u8,
        role: TxRole,
    ) -> Result<Transmission, ProtocolError> {
        let block = coding::make_xor(
            self.resource.window(lo, hi),
            c_c,
            self.more(hi),
            self.resource.szx(),
        )?;
        self.state.tx_count += 1;
        Ok(Transmission { block, role })
    }

    fn rlnc(&mut self, lo: usize, hi: usize, c_c: u8) -> Result<Transmission, ProtocolError> {
        if lo == hi {
            return self.xor(lo, hi, c_c, TxRole::NativeRepair);
        }
        let block = coding::make_rlnc(
            self.resource.window(lo, hi),
            c_c,
            self.more(hi),
            self.resource.szx(),
            &mut self.rng,
        )?;
        self.state.tx_count += 1;
        Ok(Transmission {
            block,
            role: TxRole::Repair,
        })
    }

    /// Next repair tag, or `None` once the one-byte counter is used up.
    fn tag(&mut self) -> Option<u8> {
        let t = u8::try_from(self.state.c_c_next).ok()?;
        self.state.c_c_next += 1;
        self.state.outstanding_repairs.insert(t);
        Some(t)
    }

    fn finish(&mut self) -> ClientAction {
        self.state.phase = Phase::Done;
        self.state.additional_count = self.state.tx_count - self.state.n_total;
        ClientAction::Finish
    }

    fn introduce_from(&mut self, lo: usize) -> Result<ClientAction, ProtocolError> {
        self.state.phase = Phase::Introduce;
        self.state.outstanding_repairs.clear();
        self.state.w_lo = lo;
        self.state.w_hi = lo;
        self.state.last_no_e = lo;
        Ok(ClientAction::Send(self.xor(
            lo,
            lo,
            0,
            TxRole::Introduce,
        )?))
    }

    /// Repairs for `rdt_s` missing degrees of freedom over `[sn + 1, htp]`.
    fn start_repair(&mut self, ack: &AckOption) -> Result<ClientAction, ProtocolError> {
        let (sn, htp) = (usize::from(ack.sn), ack.htp() as usize);
        let count = usize::from(ack.rdt_s);
        // Tags restart with each repair episode, or when a burst would run
        // past 255; nothing older is in flight at that point.
        if self.state.phase == Phase::Introduce
            || usize::from(self.state.c_c_next) + count > usize::from(u8::MAX) + 1
        {
            self.state.c_c_next = 1;
        }
        self.state.phase = Phase::Repair;
        self.state.outstanding_repairs.clear();
        self.state.w_hi = htp;
        if count == 1 && ack.u == 1 {
            let t = self.tag().expect("fresh counter");
            return Ok(ClientAction::Send(self.xor(
                sn + 1,
                sn + 1,
                t,
                TxRole::NativeRepair,
            )?));
        }
        let mut burst = Vec::with_capacity(count);
        for _ in 0..count {
            let t = self.tag().expect("burst fits the tag space");
            burst.push(self.rlnc(sn + 1, htp, t)?);
        }
        Ok(match burst.len() {
            1 => ClientAction::Send(burst.pop().expect("one element")),
            _ => ClientAction::SendBurst(burst),
        })
    }

    fn on_normal_ack(&mut self, ack: &AckOption) -> Result<ClientAction, ProtocolError> {
        let htp = ack.htp() as usize;
        if self.state.phase != Phase::Introduce || htp < self.state.last_no_e {
            return Ok(ClientAction::Wait);
        }
        self.state.last_ack = Some(*ack);
        if ack.rdt_s > 0 {
            return self.start_repair(ack);
        }
        if htp == self.state.n_total {
            return Ok(self.finish());
        }
        self.introduce_from(htp + 1)
    }

    fn on_repair_ack(&mut self, ack: &AckOption) -> Result<ClientAction, ProtocolError> {
        let newest = match self.state.outstanding_repairs.last() {
            Some(&t) if self.state.phase == Phase::Repair => t,
            _ => return Ok(ClientAction::Wait),
        };
        if ack.c_s > newest || !self.state.outstanding_repairs.contains(&ack.c_s) {
            return Ok(ClientAction::Wait);
        }
        self.state.last_ack = Some(*ack);
        let htp = ack.htp() as usize;
        if ack.c_s == newest {
            self.state.outstanding_repairs.clear();
            if ack.rdt_s == 0 {
                if htp == self.state.n_total {
                    return Ok(self.finish());
                }
                return self.introduce_from(htp + 1);
            }
            return self.start_repair(ack);
        }

        // Older repair: everything up to it is settled.
        self.state.outstanding_repairs.retain(|&t| t > ack.c_s);
        let in_flight = self.state.outstanding_repairs.len();
        let shortfall = usize::from(ack.rdt_s).saturating_sub(in_flight);
        if shortfall == 0 {
            return Ok(ClientAction::Wait);
        }
        let sn = usize::from(ack.sn);
        let mut out = Vec::with_capacity(shortfall);
        for _ in 0..shortfall {
            let Some(t) = self.tag() else { break };
            out.push(self.rlnc(sn + 1, htp, t)?);
        }
        Ok(match out.len() {
            0 => ClientAction::Wait,
            1 => ClientAction::Send(out.pop().expect("one element")),
            _ => ClientAction::SendBurst(out),
        })
    }
}

impl Client for NcClient<'_> {
    fn on_timeout(&mut self) -> Result<ClientAction, ProtocolError> {
        let n = self.state.n_total;
        match self.state.phase {
            Phase::Done => Err(ProtocolError::AlreadyDone),
            Phase::Introduce => {
                let (lo, hi) = (self.state.w_lo, self.state.w_hi);
                let t = if hi < n && hi + 1 - lo < MAX_WINDOW {
                    self.state.w_hi += 1;
                    self.state.last_no_e = hi + 1;
                    self.xor(lo, hi + 1, 0, TxRole::Introduce)?
                } else {
                    self.xor(lo, hi, 0, TxRole::Resend)?
                };
                Ok(ClientAction::Send(t))
            }
            Phase::Repair => {
                // Nothing came back for the newest repair. Send one repair over
                // everything the server may lack, stretched by one new block
                // when possible so that it is innovative whenever delivered.
                let base = self.state.last_ack.map_or(0, |a| usize::from(a.sn));
                let mut hi = self.state.w_hi.max(base + 1);
                if hi < n && hi + 1 - base <= MAX_WINDOW {
                    hi += 1;
                }
                self.state.w_hi = hi;
                self.state.outstanding_repairs.clear();
                if self.state.c_c_next > u16::from(u8::MAX) {
                    self.state.c_c_next = 1;
                }
                let t = self.tag().expect("counter reset above");
                Ok(ClientAction::Send(self.rlnc(base + 1, hi, t)?))
            }
        }
    }

    fn on_ack(&mut self, ack: &AckOption) -> Result<ClientAction, ProtocolError> {
        if self.state.phase == Phase::Done {
            return Err(ProtocolError::AlreadyDone);
        }
        ack.validate()?;
        if ack.c_s == 0 {
            self.on_normal_ack(ack)
        } else {
            self.on_repair_ack(ack)
        }
    }

    fn tx_count(&self) -> usize {
        self.state.tx_count
    }

    fn is_done(&self) -> bool {
        self.state.phase == Phase::Done
    }
}

/// Uncoded stop-and-wait client: one native block at a time, resent
/// unchanged on timeout.
#[derive(Debug, Clone)]
pub struct BaselineClient<'a> {
    resource: &'a SplitResource,
    n_total: usize,
    next: usize,
    tx_count: usize,
    done: bool,
}

impl<'a> BaselineClient<'a> {
    pub fn new(resource: &'a SplitResource) -> Result<(Self, ClientAction), ProtocolError> {
        let n = check_resource(resource)?;
        let mut client = BaselineClient {
            resource,
            n_total: n,
            next: 1,
            tx_count: 0,
            done: false,
        };
        let first = client.native(TxRole::Introduce)?;
        Ok((client, ClientAction::Send(first)))
    }

    /// Index of the block currently being sent.
    pub fn current(&self) -> usize {
        self.next
    }

    fn native(&mut self, role: TxRole) -> Result<Transmission, ProtocolError> {
        let i = self.next;
        let block = coding::make_xor(
            self.resource.window(i, i),
            0,
            i < self.n_total,
            self.resource.szx(),
        )?;
        self.tx_count += 1;
        Ok(Transmission { block, role })
    }
}

impl Client for BaselineClient<'_> {
    fn on_timeout(&mut self) -> Result<ClientAction, ProtocolError> {
        if self.done {
            return Err(ProtocolError::AlreadyDone);
        }
        Ok(ClientAction::Send(self.native(TxRole::Resend)?))
    }

    fn on_ack(&mut self, ack: &AckOption) -> Result<ClientAction, ProtocolError> {
        if self.done {
            return Err(ProtocolError::AlreadyDone);
        }
        ack.validate()?;
        if (ack.htp() as usize) < self.next {
            return Ok(ClientAction::Wait);
        }
        if self.next == self.n_total {
            self.done = true;
            return Ok(ClientAction::Finish);
        }
        self.next += 1;
        Ok(ClientAction::Send(self.native(TxRole::Introduce)?))
    }

    fn tx_count(&self) -> usize {
        self.tx_count
    }

    fn is_done(&self) -> bool {
        self.done
    }
}

#[derive(Debug, Clone)]
pub struct ServerState {
    pub decoder: DecoderState,
    pub delivered: bool,
    pub original_len: usize,
}

/// Receiver shared by both protocols: decodes, tracks seen blocks and acks
/// every arriving block.
#[derive(Debug, Clone)]
pub struct Server {
    state: ServerState,
    last_innovative: bool,
}

impl Server {
    pub fn new(n_total: usize, block_size: usize, original_len: usize) -> Self {
        Server {
            state: ServerState {
                decoder: DecoderState::new(n_total, block_size),
                delivered: false,
                original_len,
            },
            last_innovative: false,
        }
    }

    pub fn for_resource(resource: &SplitResource) -> Self {
        Self::new(
            resource.n_blocks(),
            resource.block_size,
            resource.original_len,
        )
    }

    pub fn state(&self) -> &ServerState {
        &self.state
    }

    pub fn decoder(&self) -> &DecoderState {
        &self.state.decoder
    }

    /// Whether the most recent block raised the decoder rank.
    pub fn last_innovative(&self) -> bool {
        self.last_innovative
    }

    pub fn on_block(&mut self, cb: &CodedBlock) -> Result<AckOption, ProtocolError> {
        let outcome = self.state.decoder.insert(cb)?;
        self.last_innovative = outcome.innovative;
        if self.state.decoder.is_complete() {
            self.state.delivered = true;
        }
        let r = self.state.decoder.seen_report();
        let overflow = || ProtocolError::AckOverflow {
            sn: r.sn,
            htp: r.htp,
            rdt_s: r.rdt_s,
        };
        let ack = AckOption {
            c_s: cb.option.c_c,
            sn: u16::try_from(r.sn).map_err(|_| overflow())?,
            u: u8::try_from(r.htp - r.sn).map_err(|_| overflow())?,
            rdt_s: u8::try_from(r.rdt_s).map_err(|_| overflow())?,
        };
        ack.validate()?;
        Ok(ack)
    }

    /// The reassembled resource once every block is decoded.
    pub fn resource(&self) -> Option<Vec<u8>> {
        let blocks = self.state.decoder.try_decode()?;
        Some(coding::reassemble(&blocks, self.state.original_len))
    }
}
