//! Real-operation accounting for the detector inner loops.
//!
//! Hot paths are generic over [`OpTally`]; passing `&mut ()` compiles the
//! counting away, passing an [`OpCount`] records it.

use serde::{Deserialize, Serialize};

pub trait OpTally {
    fn add(&mut self, n: u64);
    fn mul(&mut self, n: u64);
}

impl OpTally for () {
    #[inline(always)]
    fn add(&mut self, _n: u64) {}
    #[inline(always)]
    fn mul(&mut self, _n: u64) {}
}

/// Running totals of real additions and multiplications.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub adds: u64,
    pub mults: u64,
}

impl OpTally for OpCount {
    #[inline]
    fn add(&mut self, n: u64) {
        self.adds += n;
    }
    #[inline]
    fn mul(&mut self, n: u64) {
        self.mults += n;
    }
}

impl OpCount {
    /// Divides both totals by `symbols`, returning `None` unless the division
    /// is exact.
    pub fn per_symbol(&self, symbols: u64) -> Option<OpCount> {
        if symbols == 0 || self.adds % symbols != 0 || self.mults % symbols != 0 {
            return None;
        }
        Some(OpCount {
            adds: self.adds / symbols,
            mults: self.mults / symbols,
        })
    }
}
