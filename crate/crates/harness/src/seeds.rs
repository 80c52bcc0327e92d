//! Per-trial seeds derived from the master seed, the suite name and the
//! trial index, so trials never share a stream and order of execution does
//! not matter.

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// FNV-1a; stable across platforms and toolchains, unlike `DefaultHasher`.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn trial_seed(master: u64, suite: &str, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ fnv1a(suite.as_bytes())) ^ index)
}

/// Scenario generation and trial execution draw from separate streams.
pub fn scenario_and_run_seeds(master: u64, suite: &str, index: u64) -> (u64, u64) {
    let s = trial_seed(master, suite, index);
    (s, splitmix64(s))
}
