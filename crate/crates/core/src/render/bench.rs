use std::f64::consts::TAU;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evaluator::{BtfQuery, Evaluator};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub n: usize,
    pub threads: usize,
    /// Best-of-repetitions wall time for `n` and `4n` queries.
    pub seconds_n: f64,
    pub seconds_4n: f64,
    pub queries_per_second: f64,
    pub ns_per_query: f64,
    /// `seconds_4n / seconds_n`; 4 for linear scaling.
    pub ratio: f64,
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "n={} threads={} t(n)={:.4}s t(4n)={:.4}s ratio={:.3} {:.3e} queries/s {:.1} ns/query",
            self.n, self.threads, self.seconds_n, self.seconds_4n, self.ratio, self.queries_per_second, self.ns_per_query
        )
    }
}

fn upper_direction(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    // uniform over the cap up to 80 degrees from the normal
    let z: f64 = rng.gen_range(80f64.to_radians().cos()..1.0);
    let phi = rng.gen_range(0.0..TAU);
    let r = (1.0 - z * z).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

/// `n` random valid queries with `u*` spread over a 16 x 16 period area.
pub fn bench_queries(n: usize, seed: u64) -> Vec<BtfQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| BtfQuery {
            u_star: [rng.gen_range(0.0..16.0), rng.gen_range(0.0..16.0)],
            wi: upper_direction(&mut rng),
            wo: upper_direction(&mut rng),
        })
        .collect()
}

fn time_batch(eval: &Evaluator, queries: &[BtfQuery], reps: usize) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..reps {
        let start = Instant::now();
        let out = eval.query_batch_strict(queries)?;
        let t = start.elapsed().as_secs_f64();
        std::hint::black_box(out);
        best = best.min(t);
    }
    Ok(best)
}

/// Times batched queries at `n` and `4n` on a pool of `threads` workers.
pub fn bench(eval: &Evaluator, n: usize, threads: usize, reps: usize) -> Result<BenchReport> {
    if n == 0 || threads == 0 || reps == 0 {
        return Err(Error::Argument("bench needs n, threads and repetitions >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Configuration(e.to_string()))?;
    let big = bench_queries(4 * n, 0xBE7C);
    let small = &big[..n];
    pool.install(|| {
        // warm caches and the pool before timing
        eval.query_batch_strict(&small[..n.min(4096)])?;
        let seconds_n = time_batch(eval, small, reps)?;
        let seconds_4n = time_batch(eval, &big, reps)?;
        Ok(BenchReport {
            n,
            threads,
            seconds_n,
            seconds_4n,
            queries_per_second: n as f64 / seconds_n,
            ns_per_query: seconds_n * 1e9 / n as f64,
            ratio: seconds_4n / seconds_n,
        })
    })
}
