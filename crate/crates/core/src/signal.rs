//! Signal spaces and profiles.
//!
//! Every bidder draws its private signal from a finite, strictly increasing
//! grid. The smallest grid point plays the role of the "zero" signal.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::{Error, Result};

/// Per-bidder signal grids.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpace {
    grids: Vec<Vec<f64>>,
}

impl SignalSpace {
    pub fn new(grids: Vec<Vec<f64>>) -> Result<Self> {
        for (bidder, grid) in grids.iter().enumerate() {
            if grid.is_empty() {
                return Err(Error::EmptyGrid { bidder });
            }
            if grid.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::GridNotIncreasing { bidder });
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::GridNotIncreasing { bidder });
            }
        }
        Ok(Self { grids })
    }

    /// `n` bidders, each with the same grid.
    pub fn uniform(n: usize, grid: &[f64]) -> Result<Self> {
        Self::new(vec![grid.to_vec(); n])
    }

    /// `n` bidders with signals in `{0, 1}`.
    pub fn binary(n: usize) -> Self {
        Self {
            grids: vec![vec![0.0, 1.0]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.grids.len()
    }

    pub fn grid(&self, bidder: usize) -> &[f64] {
        &self.grids[bidder]
    }

    pub fn grids(&self) -> &[Vec<f64>] {
        &self.grids
    }

    /// The lowest signal of `bidder`.
    pub fn zero(&self, bidder: usize) -> f64 {
        self.grids[bidder][0]
    }

    /// Number of joint profiles, saturating.
    pub fn product_size(&self) -> u128 {
        self.grids
            .iter()
            .fold(1u128, |acc, g| acc.saturating_mul(g.len() as u128))
    }

    pub fn check_profile(&self, profile: &[f64]) -> Result<()> {
        if profile.len() != self.n() {
            return Err(Error::ProfileLength {
                expected: self.n(),
                got: profile.len(),
            });
        }
        for (bidder, (&x, grid)) in profile.iter().zip(&self.grids).enumerate() {
            if !grid.contains(&x) {
                return Err(Error::SignalNotOnGrid { bidder, value: x });
            }
        }
        Ok(())
    }

    /// Iterates the full grid product in odometer order (last bidder fastest).
    pub fn profiles(&self) -> Profiles<'_> {
        Profiles {
            space: self,
            index: vec![0; self.n()],
            done: self.grids.iter().any(|g| g.is_empty()),
        }
    }

    /// Errors if the grid product exceeds `cap` profiles.
    pub fn ensure_enumerable(&self, cap: u128) -> Result<()> {
        let size = self.product_size();
        if size > cap {
            Err(Error::GridTooLarge { size, cap })
        } else {
            Ok(())
        }
    }
}

/// Iterator over every profile of a [`SignalSpace`].
pub struct Profiles<'a> {
    space: &'a SignalSpace,
    index: Vec<usize>,
    done: bool,
}

impl<'a> Profiles<'a> {
    /// Grid indices of the profile that the next call to `next` returns.
    pub fn peek_index(&self) -> Option<&[usize]> {
        (!self.done).then_some(self.index.as_slice())
    }
}

impl Iterator for Profiles<'_> {
    type Item = SignalProfile;

    fn next(&mut self) -> Option<SignalProfile> {
        if self.done {
            return None;
        }
        let profile = SignalProfile(
            self.index
                .iter()
                .enumerate()
                .map(|(b, &k)| self.space.grids[b][k])
                .collect(),
        );
        let mut b = self.index.len();
        loop {
            if b == 0 {
                self.done = true;
                break;
            }
            b -= 1;
            self.index[b] += 1;
            if self.index[b] < self.space.grids[b].len() {
                break;
            }
            self.index[b] = 0;
        }
        Some(profile)
    }
}

/// One signal per bidder.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalProfile(pub Vec<f64>);

impl SignalProfile {
    pub fn new(signals: Vec<f64>) -> Self {
        Self(signals)
    }

    /// Copy of this profile with bidder `i`'s signal replaced.
    pub fn with_signal(&self, i: usize, signal: f64) -> SignalProfile {
        let mut s = self.0.clone();
        s[i] = signal;
        SignalProfile(s)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for SignalProfile {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for SignalProfile {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}
