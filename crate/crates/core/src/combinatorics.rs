//! Exact binomial and multinomial coefficients.

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// `C(n, k)` as a big integer; zero whenever `n < 0`, `k < 0` or `k > n`.
pub fn binomial(n: i64, k: i64) -> BigUint {
    if n < 0 || k < 0 || k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    let mut acc = BigUint::one();
    for i in 0..k {
        // Exact at every step: the running product is C(n - k + i + 1, i + 1).
        acc *= n - k + i + 1;
        acc /= i + 1;
    }
    acc
}

/// `M! / (k_1! ... k_N!)` where `M = Σ k_i`.
pub fn multinomial(parts: &[u32]) -> BigUint {
    let mut acc = BigUint::one();
    let mut running: i64 = 0;
    for &k in parts {
        running += i64::from(k);
        acc *= binomial(running, i64::from(k));
    }
    acc
}
