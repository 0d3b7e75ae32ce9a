//! Row-parallel helpers.
//!
//! Work is split by output row; each row is produced by the same sequential
//! arithmetic regardless of which worker runs it, so results do not depend on
//! the pool size. Reductions across tasks are always done by the caller, in a
//! fixed order, after collecting task outputs.

use rayon::prelude::*;

/// Below this many output samples the per-row fan-out costs more than it saves.
const PAR_THRESHOLD: usize = 1 << 14;

/// Fills `out` (row-major, `width` samples per row) by calling `f(y, row)`.
pub(crate) fn for_each_row<T: Send>(out: &mut [T], width: usize, f: impl Fn(usize, &mut [T]) + Sync) {
    if width == 0 {
        return;
    }
    if out.len() >= PAR_THRESHOLD {
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(y, row)| f(y, row));
    } else {
        out.chunks_mut(width).enumerate().for_each(|(y, row)| f(y, row));
    }
}
