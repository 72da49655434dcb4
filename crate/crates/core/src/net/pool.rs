//! Application key pools.
//!
//! A distilled block is split once, when it is deposited: a prefix goes to
//! the authentication ledgers and only the remainder enters the pool, so no
//! bit can serve both purposes.

use std::collections::VecDeque;
use std::ops::Range;

use thiserror::Error;

use crate::privamp::Lineage;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PoolError {
    #[error("insufficient key: need {needed} bits, {available} available")]
    InsufficientKey { needed: usize, available: usize },
}

/// Part of a secret block held for the application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolBlock {
    pub lineage: Lineage,
    /// Where these bits sit inside the distilled block.
    pub source: Range<usize>,
    pub bits: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyPool {
    blocks: VecDeque<PoolBlock>,
    /// Bits of the front block already handed out.
    front_used: usize,
    deposited: usize,
    delivered: usize,
}

impl KeyPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn deposit(&mut self, block: PoolBlock) {
        if block.bits.is_empty() {
            return;
        }
        self.deposited += block.bits.len();
        self.blocks.push_back(block);
    }

    pub fn available(&self) -> usize {
        self.deposited - self.delivered
    }

    pub fn deposited(&self) -> usize {
        self.deposited
    }

    pub fn delivered(&self) -> usize {
        self.delivered
    }

    pub fn blocks(&self) -> impl Iterator<Item = &PoolBlock> {
        self.blocks.iter()
    }

    /// Unused bits in delivery order.
    pub fn contents(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.available());
        for (i, b) in self.blocks.iter().enumerate() {
            let skip = if i == 0 { self.front_used } else { 0 };
            out.extend_from_slice(&b.bits[skip..]);
        }
        out
    }

    /// Removes and returns the oldest `n` bits; nothing is taken on error.
    pub fn take(&mut self, n: usize) -> Result<Vec<u8>, PoolError> {
        if n > self.available() {
            return Err(PoolError::InsufficientKey {
                needed: n,
                available: self.available(),
            });
        }
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let front = self.blocks.front().expect("available bits remain");
            let want = (n - out.len()).min(front.bits.len() - self.front_used);
            out.extend_from_slice(&front.bits[self.front_used..self.front_used + want]);
            self.front_used += want;
            if self.front_used == front.bits.len() {
                self.blocks.pop_front();
                self.front_used = 0;
            }
        }
        self.delivered += n;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(id: u32, bits: Vec<u8>) -> PoolBlock {
        PoolBlock {
            lineage: Lineage {
                session_id: 1,
                block_id: id,
            },
            source: 0..bits.len(),
            bits,
        }
    }

    #[test]
    fn takes_oldest_first_across_blocks() {
        let mut p = KeyPool::new();
        p.deposit(block(0, vec![1, 0, 1]));
        p.deposit(block(1, vec![]));
        p.deposit(block(2, vec![0, 0, 1, 1]));
        assert_eq!(p.available(), 7);
        assert_eq!(p.take(2).unwrap(), vec![1, 0]);
        assert_eq!(p.contents(), vec![1, 0, 0, 1, 1]);
        assert_eq!(p.take(3).unwrap(), vec![1, 0, 0]);
        assert_eq!(p.blocks().count(), 1);
        assert_eq!(p.delivered(), 5);
    }

    #[test]
    fn failed_take_leaves_pool_untouched() {
        let mut p = KeyPool::new();
        p.deposit(block(0, vec![1; 10]));
        let before = p.clone();
        assert_eq!(
            p.take(11),
            Err(PoolError::InsufficientKey {
                needed: 11,
                available: 10
            })
        );
        assert_eq!(p, before);
    }
}
