//! The voice/source authentication parameter: user identity and voice
//! features squeezed into 32 bits via hash and a secret bit selection.
//!
//!     cargo run --example voice_authentication

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stegvoip::covert::Side;
use stegvoip::security::{
    compute_voice_auth_param, verify_security_param, voice_auth_value, BitSelectionPattern,
    DigestFeatures, Sha256Hash, Verification, VoiceAuthInput, VoiceFeatureExtractor,
};

fn main() {
    // Short identities fit outright: the concatenation is transmitted
    // left-aligned, zero-padded to 32 bits, no hashing involved.
    let short = VoiceAuthInput {
        user_global_id: vec![0xAB, 0xCD],
        voice_features: vec![0xEF],
    };
    let pattern = BitSelectionPattern::identity();
    let value = voice_auth_value(&short, &pattern, &Sha256Hash).unwrap();
    println!("short input (24 bits) -> value {value:#010x} (no hash needed)");

    // Realistic identities exceed 32 bits: hash, then select the 32
    // session-secret bit positions.
    let frames = vec![
        vec![0x11u8; 20],
        vec![0x22u8; 20],
        vec![0x33u8; 20],
        vec![0x44u8; 20],
    ];
    let features = DigestFeatures.extract(&frames);
    println!("\nvoice features over 4 frames: {} bytes", features.len());
    let input = VoiceAuthInput {
        user_global_id: b"alice@example.net".to_vec(),
        voice_features: features,
    };
    let param = compute_voice_auth_param(&input, &pattern, &Sha256Hash, Side::Sender).unwrap();
    println!(
        "voice-auth parameter (code {:04b}): {:#010x}",
        param.code,
        param.value_u64()
    );

    // The verifier recomputes from the same inputs and compares.
    let expected = voice_auth_value(&input, &pattern, &Sha256Hash).unwrap();
    assert_eq!(
        verify_security_param(&param, expected),
        Verification::Verified
    );
    println!("verification with the right inputs: verified");

    // A different caller or altered voice changes the value.
    let impostor = VoiceAuthInput {
        user_global_id: b"mallory@example.net".to_vec(),
        voice_features: input.voice_features.clone(),
    };
    let wrong = voice_auth_value(&impostor, &pattern, &Sha256Hash).unwrap();
    assert_eq!(verify_security_param(&param, wrong), Verification::Failed);
    println!("verification with an impostor id:   failed");

    // Each conversation uses its own bit-selection pattern; the same
    // inputs produce unrelated values under different patterns.
    println!("\nsame inputs under three session patterns:");
    for seed in 1..=3u64 {
        let session_pattern =
            BitSelectionPattern::random(&mut ChaCha8Rng::seed_from_u64(seed), 256);
        let v = voice_auth_value(&input, &session_pattern, &Sha256Hash).unwrap();
        println!("  session {seed}: {v:#010x}");
    }
}
