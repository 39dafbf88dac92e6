//! Compensated accumulation over subjects with a fixed reduction order.
//!
//! Subjects are split into chunks of [`CHUNK`] consecutive subjects; each
//! chunk is folded on its own (possibly on a worker thread) and the partial
//! results are merged in chunk order. The arithmetic is therefore the same
//! whether the chunks run serially or in parallel.

use rayon::prelude::*;

/// Subjects per reduction chunk.
pub const CHUNK: usize = 32;

/// Neumaier-compensated sums over a flat buffer.
#[derive(Debug, Clone)]
pub struct CompensatedBuf {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedBuf {
    pub fn zeros(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            comp: vec![0.0; len],
        }
    }

    #[inline]
    pub fn add(&mut self, idx: usize, v: f64) {
        let s = self.sum[idx];
        let t = s + v;
        if s.abs() >= v.abs() {
            self.comp[idx] += (s - t) + v;
        } else {
            self.comp[idx] += (v - t) + s;
        }
        self.sum[idx] = t;
    }

    pub fn merge(&mut self, other: &CompensatedBuf) {
        for i in 0..self.sum.len() {
            self.add(i, other.sum[i]);
            self.add(i, other.comp[i]);
        }
    }

    pub fn finish(self) -> Vec<f64> {
        self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect()
    }
}

/// Folds `step` over subjects `0..n` chunk by chunk and merges the chunk
/// results in order.
pub fn fold_subjects<A, E, Init, Step, Merge>(
    n: usize,
    parallel: bool,
    init: Init,
    step: Step,
    merge: Merge,
) -> Result<A, E>
where
    A: Send,
    E: Send,
    Init: Fn() -> A + Sync,
    Step: Fn(&mut A, usize) -> Result<(), E> + Sync,
    Merge: Fn(&mut A, A),
{
    let chunk = |c: usize| -> Result<A, E> {
        let mut acc = init();
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            step(&mut acc, i)?;
        }
        Ok(acc)
    };
    let n_chunks = n.div_ceil(CHUNK);
    let parts: Vec<A> = if parallel && n_chunks > 1 {
        (0..n_chunks).into_par_iter().map(chunk).collect::<Result<_, E>>()?
    } else {
        (0..n_chunks).map(chunk).collect::<Result<_, E>>()?
    };
    let mut parts = parts.into_iter();
    let mut total = parts.next().unwrap_or_else(&init);
    for p in parts {
        merge(&mut total, p);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut acc = CompensatedBuf::zeros(1);
        acc.add(0, 1.0);
        for _ in 0..10_000 {
            acc.add(0, 1e-16);
        }
        acc.add(0, -1.0);
        let v = acc.finish()[0];
        assert!((v - 1e-12).abs() < 1e-20, "{v}");
    }

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let vals: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1013) as f64 * 1e-3 + 1e8).collect();
        let run = |parallel| {
            fold_subjects::<_, (), _, _, _>(
                vals.len(),
                parallel,
                || CompensatedBuf::zeros(1),
                |a, i| {
                    a.add(0, vals[i]);
                    Ok(())
                },
                |a, b| a.merge(&b),
            )
            .unwrap()
            .finish()[0]
        };
        assert_eq!(run(false).to_bits(), run(true).to_bits());
    }
}
