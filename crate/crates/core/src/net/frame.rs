//! Bit-exact framing for the classical public channel.
//!
//! ```text
//! offset  size  field
//! 0       2     magic 0x51 0x4B ("QK")
//! 2       1     version (1)
//! 3       1     msg_type
//! 4       1     flags (bit 0: AUTH tag present; other bits must be zero)
//! 5       4     session_id  (u32 LE)
//! 9       4     block_id    (u32 LE)
//! 13      4     payload_len (u32 LE)
//! 17      n     payload
//! 17+n    8     tag (only when AUTH is set)
//! ```

use std::fmt;

use thiserror::Error;

pub const MAGIC: [u8; 2] = [0x51, 0x4B];
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 17;
pub const TAG_LEN: usize = 8;
pub const FLAG_AUTH: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MsgType {
    SiftDetect = 0x01,
    SiftBases = 0x02,
    SiftSargPairs = 0x03,
    SiftKeep = 0x04,
    EcCascadeParities = 0x10,
    EcCascadeReply = 0x11,
    EcNiagaraSyndrome = 0x12,
    EcAck = 0x13,
    PaParams = 0x20,
    KeyRelayXor = 0x30,
    Control = 0x7F,
}

impl MsgType {
    pub const ALL: [MsgType; 11] = [
        MsgType::SiftDetect,
        MsgType::SiftBases,
        MsgType::SiftSargPairs,
        MsgType::SiftKeep,
        MsgType::EcCascadeParities,
        MsgType::EcCascadeReply,
        MsgType::EcNiagaraSyndrome,
        MsgType::EcAck,
        MsgType::PaParams,
        MsgType::KeyRelayXor,
        MsgType::Control,
    ];

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| *t as u8 == b)
    }

    pub fn name(self) -> &'static str {
        match self {
            MsgType::SiftDetect => "SIFT_DETECT",
            MsgType::SiftBases => "SIFT_BASES",
            MsgType::SiftSargPairs => "SIFT_SARG_PAIRS",
            MsgType::SiftKeep => "SIFT_KEEP",
            MsgType::EcCascadeParities => "EC_CASCADE_PARITIES",
            MsgType::EcCascadeReply => "EC_CASCADE_REPLY",
            MsgType::EcNiagaraSyndrome => "EC_NIAGARA_SYNDROME",
            MsgType::EcAck => "EC_ACK",
            MsgType::PaParams => "PA_PARAMS",
            MsgType::KeyRelayXor => "KEYRELAY_XOR",
            MsgType::Control => "CONTROL",
        }
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed frame at byte {offset}: {reason}")]
pub struct MalformedFrame {
    pub offset: usize,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicMessage {
    pub msg_type: MsgType,
    pub session_id: u32,
    pub block_id: u32,
    pub payload: Vec<u8>,
    pub tag: Option<[u8; TAG_LEN]>,
}

impl PublicMessage {
    pub fn new(msg_type: MsgType, session_id: u32, block_id: u32, payload: Vec<u8>) -> Self {
        Self {
            msg_type,
            session_id,
            block_id,
            payload,
            tag: None,
        }
    }

    pub fn flags(&self) -> u8 {
        if self.tag.is_some() {
            FLAG_AUTH
        } else {
            0
        }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len() + if self.tag.is_some() { TAG_LEN } else { 0 }
    }

    /// Header and payload as they appear on the wire, with the AUTH flag
    /// forced to `auth`. This is the byte string the authentication tag covers.
    pub fn authenticated_bytes(&self, auth: bool) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len() + TAG_LEN);
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.msg_type as u8);
        out.push(if auth { FLAG_AUTH } else { 0 });
        out.extend_from_slice(&self.session_id.to_le_bytes());
        out.extend_from_slice(&self.block_id.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.authenticated_bytes(self.tag.is_some());
        if let Some(tag) = &self.tag {
            out.extend_from_slice(tag);
        }
        out
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self, MalformedFrame> {
        let (msg, used) = Self::decode_prefix(bytes)?;
        if used != bytes.len() {
            return Err(MalformedFrame {
                offset: used,
                reason: "trailing bytes after frame",
            });
        }
        Ok(msg)
    }

    /// Decodes the frame at the start of `bytes`, returning it and its length.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize), MalformedFrame> {
        let need = |n: usize| {
            if bytes.len() < n {
                Err(MalformedFrame {
                    offset: bytes.len(),
                    reason: "truncated frame",
                })
            } else {
                Ok(())
            }
        };
        need(2)?;
        if bytes[..2] != MAGIC {
            let offset = if bytes[0] != MAGIC[0] { 0 } else { 1 };
            return Err(MalformedFrame {
                offset,
                reason: "bad magic",
            });
        }
        need(3)?;
        if bytes[2] != VERSION {
            return Err(MalformedFrame {
                offset: 2,
                reason: "unknown version",
            });
        }
        need(4)?;
        let msg_type = MsgType::from_byte(bytes[3]).ok_or(MalformedFrame {
            offset: 3,
            reason: "unknown message type",
        })?;
        need(5)?;
        let flags = bytes[4];
        if flags & !FLAG_AUTH != 0 {
            return Err(MalformedFrame {
                offset: 4,
                reason: "reserved flag bits set",
            });
        }
        need(HEADER_LEN)?;
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let session_id = u32_at(5);
        let block_id = u32_at(9);
        let payload_len = u32_at(13) as usize;
        let payload_end = HEADER_LEN
            .checked_add(payload_len)
            .ok_or(MalformedFrame {
                offset: 13,
                reason: "payload length overflow",
            })?;
        need(payload_end)?;
        let payload = bytes[HEADER_LEN..payload_end].to_vec();
        let (tag, end) = if flags & FLAG_AUTH != 0 {
            need(payload_end + TAG_LEN)?;
            let mut tag = [0u8; TAG_LEN];
            tag.copy_from_slice(&bytes[payload_end..payload_end + TAG_LEN]);
            (Some(tag), payload_end + TAG_LEN)
        } else {
            (None, payload_end)
        };
        Ok((
            Self {
                msg_type,
                session_id,
                block_id,
                payload,
                tag,
            },
            end,
        ))
    }
}
