//! Set partitions, Stirling and ordered Bell numbers, and the Möbius
//! weights turning moments into cumulants (and back).

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const MAX_ENUMERATE: usize = 12;
pub const MAX_WEIGHTS: usize = 10;

/// A partition of `{0, .., k-1}` stored as a restricted growth string:
/// `rgs[i]` is the block of element `i`, and each new block number is one
/// more than the largest seen so far. Blocks are thus ordered by least
/// element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SetPartition {
    rgs: Vec<u8>,
}

impl SetPartition {
    pub fn from_rgs(rgs: Vec<u8>) -> Result<Self> {
        let mut max: i16 = -1;
        for &b in &rgs {
            if i16::from(b) > max + 1 {
                return Err(invalid(format!("not a restricted growth string: {rgs:?}")));
            }
            max = max.max(i16::from(b));
        }
        Ok(Self { rgs })
    }

    pub fn rgs(&self) -> &[u8] {
        &self.rgs
    }

    pub fn k(&self) -> usize {
        self.rgs.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.rgs.iter().map(|b| *b as usize + 1).max().unwrap_or(0)
    }

    /// Blocks as sorted 0-based index lists, in canonical order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_blocks()];
        for (i, b) in self.rgs.iter().enumerate() {
            out[*b as usize].push(i);
        }
        out
    }

    /// Blocks as bit masks over the element indices.
    pub fn block_masks(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.n_blocks()];
        for (i, b) in self.rgs.iter().enumerate() {
            out[*b as usize] |= 1 << i;
        }
        out
    }

    /// `(-1)^(j-1) (j-1)!` for a partition with `j` blocks.
    pub fn mobius_weight(&self) -> i128 {
        let j = self.n_blocks();
        let f: i128 = (1..j as i128).product();
        if j % 2 == 1 {
            f
        } else {
            -f
        }
    }
}

impl std::fmt::Display for SetPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .blocks()
            .iter()
            .map(|b| format!("{{{}}}", b.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")))
            .collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Iterator over the partitions of a `k`-set in lexicographic RGS order.
pub struct Partitions {
    rgs: Vec<u8>,
    /// `prefix_max[i] = max(rgs[..i])`.
    prefix_max: Vec<u8>,
    done: bool,
}

impl Iterator for Partitions {
    type Item = SetPartition;

    fn next(&mut self) -> Option<SetPartition> {
        if self.done {
            return None;
        }
        let out = SetPartition { rgs: self.rgs.clone() };
        let k = self.rgs.len();
        // Advance: find the rightmost position that can still grow.
        let mut i = k;
        loop {
            if i <= 1 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.rgs[i] <= self.prefix_max[i] {
                self.rgs[i] += 1;
                for t in i + 1..k {
                    self.rgs[t] = 0;
                    self.prefix_max[t] = self.prefix_max[t - 1].max(self.rgs[t - 1]);
                }
                break;
            }
        }
        Some(out)
    }
}

/// All partitions of `{1..k}`, each once, in canonical order.
pub fn enumerate_partitions(k: usize) -> Result<Partitions> {
    if k == 0 || k > MAX_ENUMERATE {
        return Err(invalid(format!("k must lie in 1..={MAX_ENUMERATE}, got {k}")));
    }
    Ok(Partitions { rgs: vec![0; k], prefix_max: vec![0; k], done: false })
}

fn factorial(n: usize) -> Result<u128> {
    (1..=n as u128).try_fold(1u128, |acc, i| acc.checked_mul(i)).ok_or_else(|| Error::Overflow(format!("{n}!")))
}

/// Stirling number of the second kind `S(k, j)`, exact, with overflow
/// reported as an error.
pub fn stirling2(k: usize, j: usize) -> Result<u128> {
    if j > k {
        return Err(invalid(format!("stirling2 needs j <= k, got k = {k}, j = {j}")));
    }
    // Row recurrence S(n, i) = i S(n-1, i) + S(n-1, i-1).
    let mut row = vec![0u128; j + 1];
    row[0] = 1;
    for n in 1..=k {
        for i in (1..=j.min(n)).rev() {
            let grow = (i as u128).checked_mul(row[i]).and_then(|v| v.checked_add(row[i - 1]));
            row[i] = grow.ok_or_else(|| Error::Overflow(format!("stirling2({k}, {j})")))?;
        }
        row[0] = 0;
    }
    Ok(row[j])
}

/// Bell number `B(k)`, the number of partitions of a `k`-set.
pub fn bell(k: usize) -> Result<u128> {
    (0..=k).try_fold(0u128, |acc, j| {
        acc.checked_add(stirling2(k, j)?).ok_or_else(|| Error::Overflow(format!("bell({k})")))
    })
}

/// Ordered Bell (Fubini) number `Σ_j S(k, j) j!`.
pub fn ordered_bell(k: usize) -> Result<u128> {
    let mut acc = 0u128;
    for j in 0..=k {
        let term = stirling2(k, j)?
            .checked_mul(factorial(j)?)
            .ok_or_else(|| Error::Overflow(format!("ordered_bell({k})")))?;
        acc = acc.checked_add(term).ok_or_else(|| Error::Overflow(format!("ordered_bell({k})")))?;
    }
    Ok(acc)
}

/// Each partition of `{1..k}` with its weight `(-1)^(j-1)(j-1)!`.
pub fn mobius_truncation_weights(k: usize) -> Result<Vec<(SetPartition, i128)>> {
    if k == 0 || k > MAX_WEIGHTS {
        return Err(invalid(format!("k must lie in 1..={MAX_WEIGHTS}, got {k}")));
    }
    Ok(enumerate_partitions(k)?.map(|p| {
        let w = p.mobius_weight();
        (p, w)
    }).collect())
}

/// Elements of a bit mask in increasing order.
pub fn mask_elements(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

/// Lift a partition of `{0..|S|-1}` to masks over the elements of `S`.
fn lift(p: &SetPartition, elems: &[usize]) -> Vec<u32> {
    p.blocks().iter().map(|b| b.iter().fold(0u32, |m, i| m | 1 << elems[*i])).collect()
}

fn check_table_len(len: usize, k: usize) -> Result<()> {
    if k == 0 || k > MAX_WEIGHTS || len != 1 << k {
        return Err(invalid(format!("expected a table of 2^k entries with 1 <= k <= {MAX_WEIGHTS}")));
    }
    Ok(())
}

/// Joint cumulants from joint moments. Both tables are indexed by subset
/// bit mask over `k` variables; entry 0 is ignored (set to zero).
pub fn cumulants_from_moments<T>(moments: &[T], k: usize) -> Result<Vec<T>>
where
    T: Num + Clone + FromPrimitive,
{
    check_table_len(moments.len(), k)?;
    transform(moments, k, true)
}

/// Joint moments from joint cumulants; inverse of [`cumulants_from_moments`].
pub fn moments_from_cumulants<T>(cumulants: &[T], k: usize) -> Result<Vec<T>>
where
    T: Num + Clone + FromPrimitive,
{
    check_table_len(cumulants.len(), k)?;
    transform(cumulants, k, false)
}

fn transform<T>(input: &[T], k: usize, weighted: bool) -> Result<Vec<T>>
where
    T: Num + Clone + FromPrimitive,
{
    let mut out = vec![T::zero(); 1 << k];
    let mut by_size: Vec<Vec<(SetPartition, i128)>> = vec![Vec::new(); k + 1];
    for (s, slot) in by_size.iter_mut().enumerate().skip(1) {
        *slot = mobius_truncation_weights(s)?;
    }
    for (mask, slot) in out.iter_mut().enumerate().skip(1) {
        let elems = mask_elements(mask as u32);
        let mut acc = T::zero();
        for (p, w) in &by_size[elems.len()] {
            let mut term = T::one();
            for b in lift(p, &elems) {
                term = term * input[b as usize].clone();
            }
            if weighted {
                let w = T::from_i128(*w).ok_or_else(|| Error::Overflow("weight conversion".into()))?;
                term = w * term;
            }
            acc = acc + term;
        }
        *slot = acc;
    }
    Ok(out)
}
