//! Deterministic low-discrepancy points for verification checks.

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    out
}

/// `count` Halton points inside the open box `(lo, hi)`.
///
/// # Panics
/// If the box has more than 12 dimensions or `lo.len() != hi.len()`.
pub fn halton_box(lo: &[f64], hi: &[f64], count: usize) -> Vec<Vec<f64>> {
    assert_eq!(lo.len(), hi.len(), "box bounds differ in length");
    assert!(lo.len() <= PRIMES.len(), "at most {} dimensions", PRIMES.len());
    (1..=count as u64)
        .map(|i| {
            lo.iter()
                .zip(hi)
                .zip(PRIMES)
                .map(|((a, b), p)| a + (b - a) * radical_inverse(i, p))
                .collect()
        })
        .collect()
}
