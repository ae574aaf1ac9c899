//! Deterministic low-discrepancy point sets.

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in base `b`.
pub fn radical_inverse(mut index: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    r
}

/// Halton sequence in `dim` dimensions.
///
/// `seed` offsets the starting index, so different seeds give disjoint
/// stretches of the same sequence. Index 0 (the origin) is never used.
#[derive(Clone, Debug)]
pub struct Halton {
    dim: usize,
    next: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension too large");
        Halton {
            dim,
            next: 1 + seed.wrapping_mul(1009),
        }
    }

    pub fn next_unit(&mut self) -> Vec<f64> {
        let i = self.next;
        self.next += 1;
        PRIMES[..self.dim]
            .iter()
            .map(|&b| radical_inverse(i, b))
            .collect()
    }

    /// Next point scaled into the box `[lo, hi]^dim`.
    pub fn next_in(&mut self, lo: f64, hi: f64) -> Vec<f64> {
        self.next_unit()
            .into_iter()
            .map(|u| lo + (hi - lo) * u)
            .collect()
    }
}

/// `count` points in `[lo, hi]^dim`.
pub fn box_samples(dim: usize, count: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut h = Halton::new(dim, seed);
    (0..count).map(|_| h.next_in(lo, hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_two_prefix() {
        let got: Vec<f64> = (1..5).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(got, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn deterministic_and_in_range() {
        let a = box_samples(6, 50, -2.0, 2.0, 3);
        let b = box_samples(6, 50, -2.0, 2.0, 3);
        assert_eq!(a, b);
        assert!(a.iter().flatten().all(|x| (-2.0..=2.0).contains(x)));
        assert_ne!(a, box_samples(6, 50, -2.0, 2.0, 4));
    }
}
