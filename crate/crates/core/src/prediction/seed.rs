use crate::glm::ModelTag;

/// One step of the SplitMix64 output function.
pub fn split_mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent sub-seed for one `(year, model)` cell of a run.
pub fn derive_seed(seed: u64, year: i32, model: ModelTag) -> u64 {
    let tag = match model {
        ModelTag::Ols => 1,
        ModelTag::Ppml => 2,
        ModelTag::Zip => 3,
        ModelTag::Logit => 4,
    };
    let a = split_mix64(seed);
    let b = split_mix64(a ^ (year as i64 as u64));
    split_mix64(b ^ tag)
}
