//! In-process duplex carrying framed public messages between two parties.
//!
//! Protocols are written as straight-line code that alternates between the
//! two roles; everything one role learns about the other passes through
//! [`PublicChannel::send`] / [`PublicChannel::recv`], so the recorded
//! transcript is exactly what an eavesdropper on the classical channel sees.

use std::collections::VecDeque;

use thiserror::Error;

use super::frame::{MalformedFrame, MsgType, PublicMessage, TAG_LEN};
use crate::auth::{AuthError, AuthKeyLedger, AuthTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Alice,
    Bob,
}

impl Role {
    pub fn peer(self) -> Role {
        match self {
            Role::Alice => Role::Bob,
            Role::Bob => Role::Alice,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("no message waiting for {0:?} (expected {1})")]
    Empty(Role, MsgType),
    #[error(transparent)]
    Malformed(#[from] MalformedFrame),
    #[error("expected {expected}, received {got}")]
    UnexpectedType { expected: MsgType, got: MsgType },
    #[error("frame belongs to session {got}, expected {expected}")]
    WrongSession { expected: u32, got: u32 },
    #[error("untagged {0} on an authenticated channel")]
    Untagged(MsgType),
    #[error("authentication of {msg_type} failed: {source}")]
    Auth { msg_type: MsgType, source: AuthError },
    #[error("malformed {msg_type} payload: {reason}")]
    Payload { msg_type: MsgType, reason: &'static str },
}

impl TransportError {
    pub fn payload(msg_type: MsgType, reason: &'static str) -> Self {
        TransportError::Payload { msg_type, reason }
    }
}

pub trait PublicChannel {
    fn send(&mut self, from: Role, msg_type: MsgType, payload: Vec<u8>) -> Result<(), TransportError>;
    fn recv(&mut self, at: Role, expected: MsgType) -> Result<Vec<u8>, TransportError>;
    /// Total bytes put on the wire so far, in both directions.
    fn bytes_sent(&self) -> usize;
}

/// The key ledgers one party holds: one for tagging what it sends and a
/// replica of its peer's, for verifying what it receives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartyAuth {
    pub outgoing: AuthKeyLedger,
    pub incoming: AuthKeyLedger,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub from: Role,
    pub frame: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    Drop,
    /// XOR `mask` into byte `offset` (clamped to the frame).
    Corrupt { offset: usize, mask: u8 },
    /// Keep only the first `len` bytes.
    Truncate { len: usize },
}

#[derive(Debug, Clone)]
pub struct Link {
    session_id: u32,
    block_id: u32,
    queues: [VecDeque<Vec<u8>>; 2],
    auth: Option<[PartyAuth; 2]>,
    transcript: Vec<TranscriptEntry>,
    keep_transcript: bool,
    faults: Vec<(usize, Fault)>,
    frames_sent: usize,
    bytes_sent: usize,
    auth_bits: [usize; 2],
}

impl Link {
    /// An unauthenticated link (lab mode and unit tests).
    pub fn plain(session_id: u32) -> Self {
        Self {
            session_id,
            block_id: 0,
            queues: [VecDeque::new(), VecDeque::new()],
            auth: None,
            transcript: Vec::new(),
            keep_transcript: true,
            faults: Vec::new(),
            frames_sent: 0,
            bytes_sent: 0,
            auth_bits: [0; 2],
        }
    }

    /// A link on which every frame is tagged and verified.
    pub fn authenticated(session_id: u32, alice: PartyAuth, bob: PartyAuth) -> Self {
        Self {
            auth: Some([alice, bob]),
            ..Self::plain(session_id)
        }
    }

    pub fn session_id(&self) -> u32 {
        self.session_id
    }

    pub fn set_block(&mut self, block_id: u32) {
        self.block_id = block_id;
    }

    pub fn block_id(&self) -> u32 {
        self.block_id
    }

    /// Stops storing frames; byte and frame counters keep running.
    pub fn without_transcript(mut self) -> Self {
        self.keep_transcript = false;
        self
    }

    /// Applies `fault` to the `frame_index`-th frame sent (counting from 0).
    pub fn inject(&mut self, frame_index: usize, fault: Fault) {
        self.faults.push((frame_index, fault));
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    /// Moves the recorded frames out, leaving the transcript empty.
    pub fn take_transcript(&mut self) -> Vec<TranscriptEntry> {
        std::mem::take(&mut self.transcript)
    }

    pub fn frames_sent(&self) -> usize {
        self.frames_sent
    }

    pub fn is_authenticated(&self) -> bool {
        self.auth.is_some()
    }

    /// Key bits spent on tags for frames sent by `from`.
    pub fn auth_bits_spent(&self, from: Role) -> usize {
        self.auth_bits[from.index()]
    }

    pub fn auth(&self, role: Role) -> Option<&PartyAuth> {
        self.auth.as_ref().map(|a| &a[role.index()])
    }

    pub fn auth_mut(&mut self, role: Role) -> Option<&mut PartyAuth> {
        self.auth.as_mut().map(|a| &mut a[role.index()])
    }

    /// Hands the ledgers back to their owners.
    pub fn into_auth(self) -> Option<[PartyAuth; 2]> {
        self.auth
    }

    /// Frames still queued for `role`.
    pub fn pending(&self, role: Role) -> usize {
        self.queues[role.index()].len()
    }

    fn apply_fault(&mut self, frame: Vec<u8>) -> Option<Vec<u8>> {
        let index = self.frames_sent;
        let mut frame = frame;
        for &(i, fault) in &self.faults {
            if i != index {
                continue;
            }
            match fault {
                Fault::Drop => return None,
                Fault::Corrupt { offset, mask } => {
                    if !frame.is_empty() {
                        let at = offset.min(frame.len() - 1);
                        frame[at] ^= mask;
                    }
                }
                Fault::Truncate { len } => frame.truncate(len),
            }
        }
        Some(frame)
    }
}

impl PublicChannel for Link {
    fn send(&mut self, from: Role, msg_type: MsgType, payload: Vec<u8>) -> Result<(), TransportError> {
        let mut msg = PublicMessage::new(msg_type, self.session_id, self.block_id, payload);
        if let Some(auth) = self.auth.as_mut() {
            let ledger = &mut auth[from.index()].outgoing;
            let (tag, spent) = ledger
                .make_tag(&msg.authenticated_bytes(true))
                .map_err(|source| TransportError::Auth { msg_type, source })?;
            msg.tag = Some(tag.to_bytes());
            self.auth_bits[from.index()] += spent;
        }
        let frame = msg.encode();
        self.bytes_sent += frame.len();
        if self.keep_transcript {
            self.transcript.push(TranscriptEntry {
                from,
                frame: frame.clone(),
            });
        }
        let delivered = self.apply_fault(frame);
        self.frames_sent += 1;
        if let Some(frame) = delivered {
            self.queues[from.peer().index()].push_back(frame);
        }
        Ok(())
    }

    fn recv(&mut self, at: Role, expected: MsgType) -> Result<Vec<u8>, TransportError> {
        let bytes = self.queues[at.index()]
            .pop_front()
            .ok_or(TransportError::Empty(at, expected))?;
        let msg = PublicMessage::decode(&bytes)?;
        if msg.session_id != self.session_id {
            return Err(TransportError::WrongSession {
                expected: self.session_id,
                got: msg.session_id,
            });
        }
        if let Some(auth) = self.auth.as_mut() {
            let ledger = &mut auth[at.index()].incoming;
            let tag = msg.tag.ok_or(TransportError::Untagged(msg.msg_type))?;
            let tag = AuthTag {
                tag: u64::from_le_bytes(tag),
                key_epoch: ledger.epoch(),
            };
            ledger
                .verify_tag(&msg.authenticated_bytes(true), tag)
                .map_err(|source| TransportError::Auth {
                    msg_type: msg.msg_type,
                    source,
                })?;
        }
        if msg.msg_type != expected {
            return Err(TransportError::UnexpectedType {
                expected,
                got: msg.msg_type,
            });
        }
        Ok(msg.payload)
    }

    fn bytes_sent(&self) -> usize {
        self.bytes_sent
    }
}

/// Builds matching ledgers for both directions from two independent
/// pre-placed keys, one per direction.
pub fn mutual_auth(alice_to_bob: Vec<u8>, bob_to_alice: Vec<u8>) -> (PartyAuth, PartyAuth) {
    let ab = AuthKeyLedger::new(alice_to_bob);
    let ba = AuthKeyLedger::new(bob_to_alice);
    (
        PartyAuth {
            outgoing: ab.clone(),
            incoming: ba.clone(),
        },
        PartyAuth {
            outgoing: ba,
            incoming: ab,
        },
    )
}

/// Bytes a frame with `payload_len` payload bytes occupies on the wire.
pub fn frame_len(payload_len: usize, authenticated: bool) -> usize {
    super::frame::HEADER_LEN + payload_len + if authenticated { TAG_LEN } else { 0 }
}
