use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitstring::BitString;
use crate::error::{check_len, Error, Result};

pub const SCALE_RANGE: (f64, f64) = (0.2, 5.0);
pub const TRANSLATE_RANGE: (f64, f64) = (-1000.0, 1000.0);

/// Instance disguise applied around the base function.
///
/// For an input `x` the base function sees `y` with
/// `y[j] = x[var_permutation[j]] ^ xor_mask[j]`, and the returned value is
/// `scale * f(y) + translate`. Instance 1 is the identity.
///
/// Indices are 0-based throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceTransform {
    pub instance_id: u32,
    pub xor_mask: BitString,
    pub var_permutation: Vec<u32>,
    pub scale: f64,
    pub translate: f64,
}

impl InstanceTransform {
    pub fn identity(n: usize) -> Self {
        InstanceTransform {
            instance_id: 1,
            xor_mask: BitString::zeros(n),
            var_permutation: (0..n as u32).collect(),
            scale: 1.0,
            translate: 0.0,
        }
    }

    /// Draws the transform of a non-identity instance.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, n: usize, instance_id: u32) -> Result<Self> {
        let xor_mask = BitString::random(rng, n)?;
        let mut var_permutation: Vec<u32> = (0..n as u32).collect();
        var_permutation.shuffle(rng);
        let scale = rng.random_range(SCALE_RANGE.0..=SCALE_RANGE.1);
        let translate = rng.random_range(TRANSLATE_RANGE.0..=TRANSLATE_RANGE.1);
        Ok(InstanceTransform {
            instance_id,
            xor_mask,
            var_permutation,
            scale,
            translate,
        })
    }

    pub fn len(&self) -> usize {
        self.xor_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xor_mask.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.xor_mask.len();
        check_len(n, self.var_permutation.len())?;
        let mut seen = vec![false; n];
        for &p in &self.var_permutation {
            let p = p as usize;
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::contract("variable permutation is not a bijection"));
            }
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::contract(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if !self.translate.is_finite() {
            return Err(Error::contract("translate must be finite"));
        }
        Ok(())
    }

    /// The string the base function sees for input `x`.
    pub fn apply(&self, x: &BitString) -> Result<BitString> {
        check_len(self.len(), x.len())?;
        let mut y = BitString::zeros(x.len());
        for (j, &src) in self.var_permutation.iter().enumerate() {
            y.set(j, x.get(src as usize) ^ self.xor_mask.get(j));
        }
        Ok(y)
    }

    /// Precomputes the transform in input coordinates.
    pub(crate) fn folded(&self) -> FoldedTransform {
        let n = self.len();
        let mut source_of = vec![0u32; n];
        let mut mask = BitString::zeros(n);
        for (j, &src) in self.var_permutation.iter().enumerate() {
            source_of[src as usize] = j as u32;
            if self.xor_mask.get(j) {
                mask.set(src as usize, true);
            }
        }
        FoldedTransform {
            target_index: source_of,
            mask,
        }
    }
}

/// The transform expressed per input position: input bit `i` lands on
/// base position `target_index[i]` and is inverted iff `mask[i]` is set.
#[derive(Clone, Debug)]
pub(crate) struct FoldedTransform {
    pub target_index: Vec<u32>,
    pub mask: BitString,
}
