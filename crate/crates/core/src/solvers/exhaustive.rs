use std::collections::BinaryHeap;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::qubo::{Assignment, CompiledQubo, QuboProblem};

use super::{SampleSet, TIE_TOLERANCE};

/// Largest problem the exhaustive oracle accepts (2^24 states).
pub const EXHAUSTIVE_CAP: usize = 24;

/// At most this many tied optima are returned; `total_optima` counts all of them.
const MAX_REPORTED_OPTIMA: usize = 4096;

/// Re-derive energy and local fields from scratch this often during enumeration.
const RESYNC_INTERVAL: u64 = 1 << 12;

/// Enumerates every assignment in Gray-code order and returns all optima.
///
/// The first pass finds the minimum energy; the second collects the states
/// within [`TIE_TOLERANCE`] of it, keeping the lexicographically smallest
/// [`MAX_REPORTED_OPTIMA`]. Reported energies are re-evaluated exactly.
pub fn solve_exhaustive(p: &QuboProblem) -> Result<SampleSet> {
    let n = p.num_vars();
    if n > EXHAUSTIVE_CAP {
        return Err(Error::TooLarge {
            num_vars: n,
            cap: EXHAUSTIVE_CAP,
        });
    }
    let start = Instant::now();
    let compiled = CompiledQubo::new(p);

    let mut min = f64::INFINITY;
    enumerate(&compiled, |_, e| min = min.min(e));

    let mut total: u64 = 0;
    // Max-heap on the lexicographic key: popping drops the largest.
    let mut kept: BinaryHeap<u32> = BinaryHeap::new();
    enumerate(&compiled, |mask, e| {
        if e <= min + TIE_TOLERANCE {
            total += 1;
            kept.push(lex_key(mask, n));
            if kept.len() > MAX_REPORTED_OPTIMA {
                kept.pop();
            }
        }
    });

    let reads = kept
        .into_iter()
        .map(|key| {
            let a = Assignment::from_mask(lex_key(key, n) as u64, n);
            let e = p.energy(&a)?;
            Ok((a, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut set = SampleSet::from_reads(reads, start.elapsed().as_secs_f64(), "exhaustive")?;
    set.total_optima = Some(total);
    Ok(set)
}

/// Bit-reversal within `n` bits: ordering keys numerically orders
/// assignments lexicographically (bit 0 most significant). Self-inverse.
fn lex_key(mask: u32, n: usize) -> u32 {
    if n == 0 {
        0
    } else {
        mask.reverse_bits() >> (32 - n)
    }
}

fn enumerate(c: &CompiledQubo, mut visit: impl FnMut(u32, f64)) {
    let n = c.num_vars();
    let mut x = vec![0u8; n];
    let mut fields = c.local_fields(&x);
    let mut energy = c.energy(&x);
    let mut mask: u32 = 0;
    visit(mask, energy);
    for step in 1..(1u64 << n) {
        let bit = step.trailing_zeros() as usize;
        energy += c.flip(&mut x, &mut fields, bit);
        mask ^= 1 << bit;
        if step % RESYNC_INTERVAL == 0 {
            fields = c.local_fields(&x);
            energy = c.energy(&x);
        }
        visit(mask, energy);
    }
}
