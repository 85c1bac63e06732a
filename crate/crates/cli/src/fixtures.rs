//! Fixture registry: names and SCM files to domain collections.

use std::collections::BTreeMap;

use ctlab_core::scm::fixtures::{
    build_bow_examples, build_example_2_1, build_example_a1, build_fig_e_pair, build_gcd_collection, build_mixed_fixture,
    build_t4_fixture, random_bow_collection, random_transportable_collection, DEFAULT_NOISE,
};
use ctlab_core::scm::io::scm_from_json;
use ctlab_core::scm::DomainCollection;
use ctlab_core::{CtlabError, Result};
use sha2::{Digest, Sha256};

use crate::config::FixtureSpec;

pub const NAMES: [&str; 9] = ["a1", "bow", "ex2_1", "fig_e", "gcd", "mixed", "random", "random_bow", "t4"];

/// Whether the collection depends on the run seed.
pub fn is_seeded(spec: &FixtureSpec) -> bool {
    matches!(spec.name.as_deref(), Some("random" | "random_bow")) && spec.seed.is_none()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of every input file, keyed by path.
pub fn input_digests(spec: &FixtureSpec) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    if let Some(files) = &spec.files {
        for p in files.sources.iter().chain(std::iter::once(&files.target)) {
            out.insert(p.display().to_string(), sha256_hex(&std::fs::read(p)?));
        }
    }
    Ok(out)
}

/// Length and vocabulary of a random fixture for `seed`.
fn drawn(lo: usize, hi: Option<usize>, seed: u64, salt: u64) -> usize {
    match hi {
        Some(hi) if hi > lo => lo + ((seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> salt) % (hi - lo + 1) as u64) as usize,
        _ => lo,
    }
}

pub fn build(spec: &FixtureSpec, run_seed: u64) -> Result<DomainCollection> {
    if let Some(files) = &spec.files {
        let load = |p: &std::path::Path| -> Result<_> { scm_from_json(&std::fs::read_to_string(p)?) };
        let sources = files.sources.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
        return DomainCollection::new(sources, load(&files.target)?);
    }
    let name = spec.name.as_deref().unwrap_or_default();
    let noise = spec.noise.unwrap_or(DEFAULT_NOISE);
    let seed = spec.seed.unwrap_or(run_seed);
    match name {
        "ex2_1" => Ok(build_example_2_1()),
        "a1" => Ok(build_example_a1()),
        "bow" => Ok(build_bow_examples()),
        "random_bow" => Ok(random_bow_collection(seed)),
        "gcd" => build_gcd_collection(spec.vocab.unwrap_or(6), spec.noise.unwrap_or(0.05)),
        "fig_e" => build_fig_e_pair(noise),
        "t4" => build_t4_fixture(noise),
        "mixed" => build_mixed_fixture(noise),
        "random" => {
            let length = drawn(spec.length.unwrap_or(5), spec.max_length, seed, 7);
            let vocab = drawn(spec.vocab.unwrap_or(3), spec.max_vocab, seed, 23);
            random_transportable_collection(seed, length, vocab, spec.sources.unwrap_or(2))
        }
        other => Err(CtlabError::InvalidConfig(format!("unknown fixture {other:?}; known: {}", NAMES.join(", ")))),
    }
}
