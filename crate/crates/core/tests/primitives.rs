use eid_cloud::pre::{
    re_decrypt, re_encrypt, re_keygen, re_reencrypt, re_rkgen, re_setup, Backend, PreError,
};
use eid_cloud::redactable::{
    commitment, decode_signed, encode_signed, rs_keygen, rs_redact, rs_sign, rs_verify, Block,
    BlockMessage, BlockProof,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

fn random_message(r: &mut ChaCha20Rng, len: usize) -> Vec<Vec<u8>> {
    (0..len)
        .map(|_| {
            let n = r.gen_range(0..40);
            (0..n).map(|_| r.gen()).collect()
        })
        .collect()
}

fn leaf_oracle(salt: &[u8], index: usize, content: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(salt);
    h.update((index as u32).to_be_bytes());
    h.update(content);
    h.finalize().into()
}

#[test]
fn every_subset_of_every_message_redacts_and_verifies() {
    let kp = rs_keygen("SRA", Some(7));
    let other = rs_keygen("SRA", Some(8));
    let mut r = ChaCha20Rng::seed_from_u64(500);
    for _ in 0..500 {
        let len = r.gen_range(1..=8);
        let blocks = random_message(&mut r, len);
        let m = BlockMessage::new(blocks.clone());
        let sig = rs_sign(&kp.sk, &m, &mut r).unwrap();
        assert!(rs_verify(&kp.pk, &m, &sig));
        assert!(!rs_verify(&other.pk, &m, &sig));
        for (i, p) in sig.proofs().iter().enumerate() {
            let BlockProof::Salt(salt) = p else { panic!("fresh proof is a salt") };
            assert_eq!(commitment(salt, i + 1, &blocks[i]), leaf_oracle(salt, i + 1, &blocks[i]));
        }
        for mask in 0u32..(1 << len) {
            let set: Vec<usize> = (0..len).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).collect();
            let (m2, s2) = rs_redact(&m, &kp.pk, &sig, &set).unwrap();
            assert!(rs_verify(&kp.pk, &m2, &s2));
            for (i, b) in m2.blocks().iter().enumerate() {
                match b {
                    Block::Redacted => assert!(set.contains(&(i + 1))),
                    Block::Visible(c) => assert_eq!(c, &blocks[i]),
                }
            }
            let (m3, s3) = decode_signed(&encode_signed(&m2, &s2)).unwrap();
            assert!(rs_verify(&kp.pk, &m3, &s3));
            let first = m2.visible().next().map(|(i, _)| i);
            if let Some(i) = first {
                let mut tampered: Vec<Block> = m2.blocks().to_vec();
                if let Block::Visible(c) = &mut tampered[i - 1] {
                    c.push(0x5a);
                }
                assert!(!rs_verify(&kp.pk, &BlockMessage::from_blocks(tampered), &s2));
            }
        }
    }
}

#[test]
fn multi_hop_chains_deliver_every_payload_to_the_last_holder_only() {
    let mut r = ChaCha20Rng::seed_from_u64(200);
    let (params, msk) = re_setup("SRA", 128, 4, Backend::Pairing, &mut r).unwrap();
    let ids = ["A", "B", "C", "D"];
    let keys: Vec<_> = ids.iter().map(|id| re_keygen(&msk, id).unwrap()).collect();
    let rks: Vec<_> = (0..3)
        .map(|i| re_rkgen(&params, &keys[i], ids[i], ids[i + 1], &mut r).unwrap())
        .collect();
    for n in 0..200 {
        let hops = n % 4;
        let len = r.gen_range(0..96);
        let m: Vec<u8> = (0..len).map(|_| r.gen()).collect();
        let mut c = re_encrypt(&params, "A", &m, &mut r).unwrap();
        for rk in &rks[..hops] {
            c = re_reencrypt(&c, rk, &mut r).unwrap();
        }
        assert_eq!(c.level() as usize, hops);
        assert_eq!(c.target_id(), ids[hops]);
        assert_eq!(re_decrypt(&keys[hops], &c).unwrap(), m);
        for (i, k) in keys.iter().enumerate().filter(|(i, _)| *i != hops) {
            assert_eq!(re_decrypt(k, &c), Err(PreError::Decryption), "{} read hop {hops}", ids[i]);
        }
    }
}

#[test]
fn a_key_for_one_direction_does_not_open_the_other() {
    let mut r = ChaCha20Rng::seed_from_u64(3);
    let (params, msk) = re_setup("SRA", 128, 4, Backend::Pairing, &mut r).unwrap();
    let sk_a = re_keygen(&msk, "A").unwrap();
    let sk_b = re_keygen(&msk, "B").unwrap();
    let rk = re_rkgen(&params, &sk_a, "A", "B", &mut r).unwrap();
    let c_b = re_encrypt(&params, "B", b"for B", &mut r).unwrap();
    assert!(matches!(re_reencrypt(&c_b, &rk, &mut r), Err(PreError::Routing { .. })));
    let mut relabelled = c_b.clone();
    relabelled.relabel("A");
    let out = re_reencrypt(&relabelled, &rk, &mut r).unwrap();
    assert_eq!(re_decrypt(&sk_b, &out), Err(PreError::Decryption));
    assert!(re_rkgen(&params, &sk_a, "B", "A", &mut r).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_hop_round_trips(m in proptest::collection::vec(any::<u8>(), 0..128), seed in any::<u64>()) {
        let mut r = ChaCha20Rng::seed_from_u64(seed);
        let (params, msk) = re_setup("SRA", 128, 2, Backend::Pairing, &mut r).unwrap();
        let sk_a = re_keygen(&msk, "A").unwrap();
        let sk_b = re_keygen(&msk, "B").unwrap();
        let rk = re_rkgen(&params, &sk_a, "A", "B", &mut r).unwrap();
        let c = re_encrypt(&params, "A", &m, &mut r).unwrap();
        prop_assert_eq!(re_decrypt(&sk_a, &c).unwrap(), m.clone());
        let c2 = re_reencrypt(&c, &rk, &mut r).unwrap();
        prop_assert_eq!(re_decrypt(&sk_b, &c2).unwrap(), m);
    }

    #[test]
    fn redaction_keeps_exactly_the_unredacted_blocks(
        blocks in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..24), 1..10),
        mask in any::<u16>(),
    ) {
        let kp = rs_keygen("SRA", Some(1));
        let mut r = ChaCha20Rng::seed_from_u64(mask as u64);
        let m = BlockMessage::new(blocks.clone());
        let sig = rs_sign(&kp.sk, &m, &mut r).unwrap();
        let set: Vec<usize> = (1..=blocks.len()).filter(|i| mask & (1 << (i - 1)) != 0).collect();
        let (m2, s2) = rs_redact(&m, &kp.pk, &sig, &set).unwrap();
        prop_assert!(rs_verify(&kp.pk, &m2, &s2));
        prop_assert_eq!(m2.redacted_indices().len(), set.len());
        let visible: Vec<Vec<u8>> = m2.visible().map(|(_, c)| c.to_vec()).collect();
        let expect: Vec<Vec<u8>> = blocks.iter().enumerate()
            .filter(|(i, _)| !set.contains(&(i + 1))).map(|(_, b)| b.clone()).collect();
        prop_assert_eq!(visible, expect);
    }
}
