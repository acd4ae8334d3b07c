//! Standard-normal helpers and seed derivation shared across the crate.

use statrs::function::erf::{erfc, erfc_inv};

/// Φ⁻¹(0.75): the standard-normal quantile that pins the JOD convention.
///
/// A score difference of 1 JOD corresponds to a 75% preference probability,
/// so this constant shows up wherever scores and probabilities meet.
pub const PHI_INV_75: f64 = 0.674_489_750_196_081_7;

/// Default per-condition observation noise, `1 / (√2 · Φ⁻¹(0.75))` ≈ 1.0484.
///
/// With this sigma, `Φ(diff / (sigma · √2))` evaluates to 0.75 at `diff = 1`,
/// which is exactly the 75%-per-JOD convention.
pub const DEFAULT_SIGMA_OBS: f64 = 1.048_358_082_507_530_5;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Standard normal density φ(x).
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile Φ⁻¹(p), p in (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument must be in (0, 1)");
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// ln Φ(x), stable far into the lower tail where Φ underflows.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > -10.0 {
        normal_cdf(x).ln()
    } else {
        // Asymptotic expansion of the Mills ratio for the far lower tail.
        let x2 = x * x;
        -0.5 * x2 - LN_SQRT_2PI - (-x).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Inverse Mills ratio φ(x)/Φ(x), stable for very negative x.
pub fn mills_ratio_inv(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI - ln_normal_cdf(x)).exp()
}

/// Derives a labeled child seed from a root seed.
///
/// Every command fans one root seed out into independent sub-streams
/// ("shuffle", "orientation", ...) so that adding a consumer of randomness
/// in one component does not disturb the others.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    for byte in label.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(root ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
