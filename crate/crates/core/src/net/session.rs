//! One QKD session between a transmitter (Alice) and a receiver (Bob).
//!
//! Pulses are simulated and sifted in chunks. Sifted bits pile up until they
//! fill a reconciliation block; each block is then reconciled, estimated,
//! amplified and deposited on both nodes. Bits that do not fill a block wait
//! for the next session.
//!
//! Frames exchanged while sifting chunk `k` carry block id `CHUNK_FLAG | k`;
//! frames for reconciliation block `j` carry `j`.
//!
//! Every distilled block first pays back the authentication key the session
//! has spent so far (Alice-to-Bob direction first), and whatever is left goes
//! to the application pools.

use thiserror::Error;

use super::frame::MsgType;
use super::node::{Network, PeerState};
use super::pool::PoolBlock;
use super::topology::TopologyError;
use super::transport::{Link, PublicChannel, Role, TranscriptEntry, TransportError};
use crate::entropy::{usable_entropy, EntropyInputs, EstimatorKind};
use crate::privamp::{self, Lineage, SecretBlock};
use crate::qchan::{expected_rates, AliceSlot, BobSlot, ChannelError, WeakCoherentLink};
use crate::recon::{reconcile, ReconError, ReconProtocol};
use crate::rng::{derive_seed, fnv1a64, XorShift64Star};
use crate::sift::{sift, SiftError, SiftVariant};

pub const CHUNK_FLAG: u32 = 0x8000_0000;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub sift: SiftVariant,
    pub recon: ReconProtocol,
    pub estimator: EstimatorKind,
    /// The estimator confidence parameter `c`.
    pub confidence: f64,
    /// Non-randomness deduction `r`, in bits per block.
    pub nonrandomness: f64,
    pub block_bits: usize,
    pub chunk_pulses: usize,
    /// Weight of the newest block in the error-rate average.
    pub qber_weight: f64,
    pub seed: u64,
    pub keep_transcript: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sift: SiftVariant::Classic,
            recon: ReconProtocol::Cascade,
            estimator: EstimatorKind::Slutsky,
            confidence: 1e-4,
            nonrandomness: 0.0,
            block_bits: 4096,
            chunk_pulses: 1 << 18,
            qber_weight: 0.25,
            seed: 1,
            keep_transcript: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: &str| Err(SessionError::Config(m.to_string()));
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad("confidence must lie in (0, 1)");
        }
        if !(self.nonrandomness >= 0.0 && self.nonrandomness.is_finite()) {
            return bad("nonrandomness must be a non-negative number");
        }
        if privamp::size_for(self.block_bits) != Some(self.block_bits) {
            return bad("block_bits must be a supported field size (8 to 8192, a power of two)");
        }
        if self.chunk_pulses == 0 {
            return bad("chunk_pulses must be positive");
        }
        if !(self.qber_weight > 0.0 && self.qber_weight <= 1.0) {
            return bad("qber_weight must lie in (0, 1]");
        }
        Ok(())
    }

    fn estimator_index(&self) -> usize {
        EstimatorKind::ALL
            .iter()
            .position(|k| *k == self.estimator)
            .expect("ALL lists every estimator")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockOutcome {
    Amplified,
    /// Reconciled, but the estimate left nothing to keep.
    ZeroYield,
    /// Discarded by reconciliation or amplification.
    Failed,
    /// Not a block: pulses and traffic after the last full block.
    Tail,
}

impl BlockOutcome {
    pub fn name(self) -> &'static str {
        match self {
            Self::Amplified => "amplified",
            Self::ZeroYield => "zero-yield",
            Self::Failed => "failed",
            Self::Tail => "tail",
        }
    }
}

impl std::str::FromStr for BlockOutcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Amplified, Self::ZeroYield, Self::Failed, Self::Tail]
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| format!("unknown block outcome `{s}`"))
    }
}

/// Everything measured for one block. Chunk-level quantities (pulses,
/// detections, sifted bits, sifting traffic) are charged to the first block
/// completed after them, so records always sum to the session totals.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    pub session_id: u32,
    pub block_id: u32,
    pub outcome: BlockOutcome,
    pub pulses: u64,
    pub detections: u64,
    pub sifted_bits: u64,
    pub wall_time: f64,
    pub qber_estimate: f64,
    pub b: u64,
    pub e: u64,
    pub d: u64,
    pub round_trips: u64,
    pub bytes: u64,
    /// Estimator bounds in [`EstimatorKind::ALL`] order.
    pub t: [Option<f64>; 4],
    pub usable: [u64; 4],
    pub secret_bits: u64,
    /// Authentication key spent since the previous record.
    pub auth_spent: u64,
    /// Secret bits returned to the authentication ledgers.
    pub auth_bits: u64,
    pub app_bits: u64,
}

impl BlockRecord {
    fn blank(session_id: u32, block_id: u32, outcome: BlockOutcome) -> Self {
        Self {
            session_id,
            block_id,
            outcome,
            pulses: 0,
            detections: 0,
            sifted_bits: 0,
            wall_time: 0.0,
            qber_estimate: 0.0,
            b: 0,
            e: 0,
            d: 0,
            round_trips: 0,
            bytes: 0,
            t: [None; 4],
            usable: [0; 4],
            secret_bits: 0,
            auth_spent: 0,
            auth_bits: 0,
            app_bits: 0,
        }
    }

    /// Whether the block went through reconciliation successfully.
    pub fn reconciled(&self) -> bool {
        matches!(self.outcome, BlockOutcome::Amplified | BlockOutcome::ZeroYield)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionStats {
    pub pulses_sent: u64,
    pub detections: u64,
    pub sifted_bits: u64,
    pub blocks_reconciled: u64,
    pub blocks_failed: u64,
    pub blocks_amplified: u64,
    pub reconciled_bits: u64,
    pub errors_corrected: u64,
    /// Errors per reconciled bit.
    pub qber_measured: f64,
    pub disclosed_d: u64,
    /// Mean bound per reconciled block, in [`EstimatorKind::ALL`] order.
    pub t_estimates: [Option<f64>; 4],
    pub secret_bits_out: u64,
    pub round_trips: u64,
    pub bytes_exchanged: u64,
    /// Simulated seconds of source time.
    pub wall_time: f64,
    pub auth_bits_spent: u64,
    pub auth_bits_replenished: u64,
    pub app_bits: u64,
}

impl SessionStats {
    pub fn from_records(records: &[BlockRecord]) -> Self {
        let mut s = Self::default();
        let mut t_sum = [0.0; 4];
        let mut t_n = [0u64; 4];
        for r in records {
            s.pulses_sent += r.pulses;
            s.detections += r.detections;
            s.sifted_bits += r.sifted_bits;
            s.wall_time += r.wall_time;
            s.disclosed_d += r.d;
            s.round_trips += r.round_trips;
            s.bytes_exchanged += r.bytes;
            s.secret_bits_out += r.secret_bits;
            s.auth_bits_spent += r.auth_spent;
            s.auth_bits_replenished += r.auth_bits;
            s.app_bits += r.app_bits;
            match r.outcome {
                BlockOutcome::Failed => s.blocks_failed += 1,
                BlockOutcome::Tail => {}
                _ => {
                    s.blocks_reconciled += 1;
                    s.reconciled_bits += r.b;
                    s.errors_corrected += r.e;
                    for k in 0..4 {
                        if let Some(t) = r.t[k] {
                            t_sum[k] += t;
                            t_n[k] += 1;
                        }
                    }
                }
            }
            if r.outcome == BlockOutcome::Amplified {
                s.blocks_amplified += 1;
            }
        }
        if s.reconciled_bits > 0 {
            s.qber_measured = s.errors_corrected as f64 / s.reconciled_bits as f64;
        }
        for k in 0..4 {
            if t_n[k] > 0 {
                s.t_estimates[k] = Some(t_sum[k] / t_n[k] as f64);
            }
        }
        s
    }

    /// Secret bits per simulated second.
    pub fn secret_rate(&self) -> f64 {
        per_second(self.secret_bits_out, self.wall_time)
    }

    pub fn sifted_rate(&self) -> f64 {
        per_second(self.sifted_bits, self.wall_time)
    }

    /// Secret bits per second left after repaying authentication.
    pub fn net_rate(&self) -> f64 {
        (self.secret_bits_out as f64 - self.auth_bits_spent as f64) / self.wall_time.max(f64::MIN_POSITIVE)
    }
}

fn per_second(bits: u64, secs: f64) -> f64 {
    if secs > 0.0 {
        bits as f64 / secs
    } else {
        0.0
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("`{0}` and `{1}` disagree on authentication: only one side holds a ledger")]
    AuthMismatch(String, String),
    #[error("session {session_id} aborted during {stage} ({at}): {reason}")]
    Aborted {
        session_id: u32,
        stage: &'static str,
        at: String,
        reason: String,
    },
}

#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: u32,
    pub stats: SessionStats,
    pub records: Vec<BlockRecord>,
    /// Empty unless [`PipelineConfig::keep_transcript`] is set.
    pub transcript: Vec<TranscriptEntry>,
}

/// Runs `n_pulses` pulses from `tx` to `rx` through the whole stack.
pub fn run_session(
    net: &mut Network,
    tx: &str,
    rx: &str,
    cfg: &PipelineConfig,
    n_pulses: u64,
) -> Result<Session, SessionError> {
    cfg.validate()?;
    let pair_seed = derive_seed(derive_seed(cfg.seed, fnv1a64(tx.as_bytes())), fnv1a64(rx.as_bytes()));
    let session_id = net.peer_mut(tx, rx).sessions + 1;
    let seed = derive_seed(pair_seed, session_id as u64);
    let params = net.topology.path_params(tx, rx, derive_seed(seed, 3))?;
    let channel = WeakCoherentLink::new(params.clone())?;

    let mut alice = std::mem::take(net.peer_mut(tx, rx));
    let mut bob = std::mem::take(net.peer_mut(rx, tx));
    let link = match (alice.auth.take(), bob.auth.take()) {
        (Some(a), Some(b)) => Link::authenticated(session_id, a, b),
        (None, None) => Link::plain(session_id),
        (a, b) => {
            alice.auth = a;
            bob.auth = b;
            *net.peer_mut(tx, rx) = alice;
            *net.peer_mut(rx, tx) = bob;
            return Err(SessionError::AuthMismatch(tx.to_string(), rx.to_string()));
        }
    };
    let link = if cfg.keep_transcript { link } else { link.without_transcript() };
    let qber = alice
        .qber_estimate
        .unwrap_or_else(|| expected_rates(&params).expected_qber);

    let mut run = Run {
        cfg,
        seed,
        session_id,
        pulse_rate_hz: params.pulse_rate_hz,
        link,
        channel,
        alice_rng: XorShift64Star::new(derive_seed(seed, 1)),
        bob_rng: XorShift64Star::new(derive_seed(seed, 2)),
        pa_rng: XorShift64Star::new(derive_seed(seed, 5)),
        alice,
        bob,
        qber,
        records: Vec::new(),
        pending: Pending::default(),
        bytes_mark: 0,
        auth_mark: 0,
        replenished: [0; 2],
        total_pulses: 0,
        total_sifted: 0,
        next_block: 0,
    };
    let result = run.execute(n_pulses);

    let Run {
        mut link,
        mut alice,
        mut bob,
        qber,
        records,
        ..
    } = run;
    let transcript = link.take_transcript();
    if let Some([a, b]) = link.into_auth() {
        alice.auth = Some(a);
        bob.auth = Some(b);
    }
    for side in [&mut alice, &mut bob] {
        side.qber_estimate = Some(qber);
        side.sessions = session_id;
    }
    *net.peer_mut(tx, rx) = alice;
    *net.peer_mut(rx, tx) = bob;
    result?;
    Ok(Session {
        session_id,
        stats: SessionStats::from_records(&records),
        records,
        transcript,
    })
}

#[derive(Debug, Default)]
struct Pending {
    pulses: u64,
    detections: u64,
    sifted: u64,
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    seed: u64,
    session_id: u32,
    pulse_rate_hz: f64,
    link: Link,
    channel: WeakCoherentLink,
    alice_rng: XorShift64Star,
    bob_rng: XorShift64Star,
    pa_rng: XorShift64Star,
    alice: PeerState,
    bob: PeerState,
    qber: f64,
    records: Vec<BlockRecord>,
    pending: Pending,
    bytes_mark: usize,
    auth_mark: usize,
    /// Key returned to each direction's ledger during this session.
    replenished: [usize; 2],
    total_pulses: u64,
    total_sifted: u64,
    next_block: u32,
}

impl Run<'_> {
    fn execute(&mut self, n_pulses: u64) -> Result<(), SessionError> {
        let mut sent = 0u64;
        let mut chunk = 0u32;
        while sent < n_pulses {
            let len = (n_pulses - sent).min(self.cfg.chunk_pulses as u64) as usize;
            self.sift_chunk(chunk, len)?;
            sent += len as u64;
            chunk += 1;
            while self.alice.carry.len() >= self.cfg.block_bits {
                self.process_block()?;
            }
        }
        let p = &self.pending;
        if p.pulses > 0 || self.link.bytes_sent() > self.bytes_mark || self.auth_spent() > self.auth_mark {
            let rec = BlockRecord::blank(self.session_id, self.next_block, BlockOutcome::Tail);
            self.push(rec);
        }
        Ok(())
    }

    fn abort(&self, stage: &'static str, at: String, reason: impl ToString) -> SessionError {
        SessionError::Aborted {
            session_id: self.session_id,
            stage,
            at,
            reason: reason.to_string(),
        }
    }

    fn auth_spent(&self) -> usize {
        self.link.auth_bits_spent(Role::Alice) + self.link.auth_bits_spent(Role::Bob)
    }

    fn sift_chunk(&mut self, chunk: u32, len: usize) -> Result<(), SessionError> {
        let a_bits = self.alice_rng.bits(len);
        let a_bases = self.alice_rng.bits(len);
        let b_bases = self.bob_rng.bits(len);
        let recs = self.channel.transmit(&a_bits, &a_bases, &b_bases)?;
        let alice: Vec<AliceSlot> = recs.iter().map(|r| r.alice_view()).collect();
        let bob: Vec<BobSlot> = recs.iter().map(|r| r.bob_view()).collect();
        self.link.set_block(CHUNK_FLAG | chunk);
        let seed = derive_seed(self.seed, 0x5000_0000 | chunk as u64);
        let res = sift(self.cfg.sift, &alice, &bob, seed, &mut self.link)
            .map_err(|e: SiftError| self.abort("sifting", format!("chunk {chunk}"), e))?;
        self.pending.pulses += len as u64;
        self.pending.detections += recs.iter().filter(|r| r.fire_mask.any()).count() as u64;
        self.pending.sifted += res.alice.len() as u64;
        self.total_pulses += len as u64;
        self.total_sifted += res.alice.len() as u64;
        self.alice.carry.extend_from_slice(&res.alice.bits);
        self.bob.carry.extend_from_slice(&res.bob.bits);
        Ok(())
    }

    /// Attaches the pending chunk counters and traffic, then stores `rec`.
    fn push(&mut self, mut rec: BlockRecord) {
        let p = std::mem::take(&mut self.pending);
        rec.pulses = p.pulses;
        rec.detections = p.detections;
        rec.sifted_bits = p.sifted;
        rec.wall_time = p.pulses as f64 / self.pulse_rate_hz;
        let bytes = self.link.bytes_sent();
        rec.bytes = (bytes - self.bytes_mark) as u64;
        self.bytes_mark = bytes;
        let spent = self.auth_spent();
        rec.auth_spent = (spent - self.auth_mark) as u64;
        self.auth_mark = spent;
        self.records.push(rec);
    }

    fn process_block(&mut self) -> Result<(), SessionError> {
        let size = self.cfg.block_bits;
        let block_id = self.next_block;
        self.next_block += 1;
        let a: Vec<u8> = self.alice.carry.drain(..size).collect();
        let b: Vec<u8> = self.bob.carry.drain(..size).collect();
        self.link.set_block(block_id);
        let at = format!("block {block_id}");

        let mut rec = BlockRecord::blank(self.session_id, block_id, BlockOutcome::Failed);
        rec.b = size as u64;
        let est = self.qber.clamp(0.0, 0.45);
        rec.qber_estimate = est;
        let block_seed = derive_seed(self.seed, 0x1_0000_0000 | block_id as u64);
        let r = match reconcile(self.cfg.recon, &a, &b, est, block_seed, &mut self.link) {
            Ok(r) => r,
            Err(ReconError::Transport(e)) => return Err(self.abort("reconciliation", at, e)),
            Err(_) => {
                self.push(rec);
                return Ok(());
            }
        };
        rec.d = r.disclosed_bits_d as u64;
        rec.round_trips = r.round_trips as u64;
        if r.failed {
            self.push(rec);
            return Ok(());
        }
        rec.e = r.measured_error_count_e as u64;
        let w = self.cfg.qber_weight;
        self.qber = (1.0 - w) * self.qber + w * rec.e as f64 / size as f64;

        let n = if self.total_sifted > 0 {
            (size as u128 * self.total_pulses as u128 / self.total_sifted as u128) as u64
        } else {
            0
        };
        let inputs = EntropyInputs {
            b: rec.b,
            e: rec.e,
            n: n.max(rec.b),
            d: rec.d,
            r: self.cfg.nonrandomness,
            c: self.cfg.confidence,
        };
        for (k, kind) in EstimatorKind::ALL.iter().enumerate() {
            let u = usable_entropy(*kind, &inputs);
            rec.t[k] = u.t;
            rec.usable[k] = u.bits;
        }
        let m = rec.usable[self.cfg.estimator_index()] as usize;
        if m == 0 {
            rec.outcome = BlockOutcome::ZeroYield;
            self.push(rec);
            return Ok(());
        }

        // Alice draws the hash and announces it.
        let params = match privamp::gen_pa_params_for_block(size, m, &mut self.pa_rng) {
            Ok(p) => p,
            Err(_) => {
                self.push(rec);
                return Ok(());
            }
        };
        self.link
            .send(Role::Alice, MsgType::PaParams, privamp::encode_params(&params))
            .map_err(|e| self.abort("privacy amplification", at.clone(), e))?;
        let payload = self
            .link
            .recv(Role::Bob, MsgType::PaParams)
            .map_err(|e| self.abort("privacy amplification", at.clone(), e))?;
        let bob_params = privamp::decode_params(&payload).map_err(|e| {
            let err = TransportError::Payload {
                msg_type: MsgType::PaParams,
                reason: "undecodable hash parameters",
            };
            self.abort("privacy amplification", at.clone(), format!("{err} ({e})"))
        })?;
        let lineage = Lineage {
            session_id: self.session_id,
            block_id,
        };
        let (sa, sb) = match (
            privamp::pa_hash(&params, &r.alice.bits, lineage),
            privamp::pa_hash(&bob_params, &r.bob.bits, lineage),
        ) {
            (Ok(sa), Ok(sb)) => (sa, sb),
            _ => {
                self.push(rec);
                return Ok(());
            }
        };
        rec.secret_bits = m as u64;
        self.deposit(&sa, &sb, &mut rec)
            .map_err(|e| self.abort("deposit", at.clone(), e))?;
        rec.outcome = BlockOutcome::Amplified;
        self.push(rec);
        Ok(())
    }

    /// Splits each side's secret block between its ledgers and its pool.
    fn deposit(&mut self, sa: &SecretBlock, sb: &SecretBlock, rec: &mut BlockRecord) -> Result<(), String> {
        let m = sa.bits.len();
        let mut cuts = [0usize; 3];
        let mut off = 0;
        if self.link.is_authenticated() {
            for (dir, role) in [Role::Alice, Role::Bob].into_iter().enumerate() {
                let owed = self.link.auth_bits_spent(role) - self.replenished[dir];
                let k = owed.min(m - off);
                self.replenished[dir] += k;
                off += k;
                cuts[dir + 1] = off;
            }
        }
        let slice = |s: &SecretBlock, r: std::ops::Range<usize>| SecretBlock {
            bits: s.bits[r].to_vec(),
            lineage: s.lineage,
        };
        for dir in 0..2 {
            let range = cuts[dir]..cuts[dir + 1];
            if range.is_empty() {
                continue;
            }
            // Direction 0 is Alice's outgoing ledger and Bob's replica of it.
            let (a_half, b_half) = (slice(sa, range.clone()), slice(sb, range));
            let a_auth = self.link.auth_mut(Role::Alice).expect("authenticated link");
            let target = if dir == 0 { &mut a_auth.outgoing } else { &mut a_auth.incoming };
            target.replenish(&a_half).map_err(|e| e.to_string())?;
            let b_auth = self.link.auth_mut(Role::Bob).expect("authenticated link");
            let target = if dir == 0 { &mut b_auth.incoming } else { &mut b_auth.outgoing };
            target.replenish(&b_half).map_err(|e| e.to_string())?;
        }
        let app = off..m;
        for (side, s) in [(&mut self.alice, sa), (&mut self.bob, sb)] {
            side.pool.deposit(PoolBlock {
                lineage: s.lineage,
                source: app.clone(),
                bits: s.bits[app.clone()].to_vec(),
            });
        }
        rec.auth_bits = off as u64;
        rec.app_bits = (m - off) as u64;
        Ok(())
    }
}
