//! Redactable signatures over block-structured messages.
//!
//! Each block `i` is committed as `SHA-256(salt_i ‖ i ‖ content_i)` with a
//! fresh 32-byte salt. The commitments form the leaves of a Merkle tree that
//! is padded to the next power of two with a fixed filler leaf, and the root
//! is signed with the conventional DSS. Redacting a block drops its content
//! and salt and publishes the leaf commitment instead, so anyone can still
//! recompute the root while the removed content stays hidden.

use std::collections::BTreeSet;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::codec::{DecodeError, Reader, Writer};
use crate::crypto::{dss_sign, dss_verify, sha256, SigKeyPair, Signature, SigningKey, VerifyingKey};

pub const SALT_LEN: usize = 32;

const ROOT_TAG: &[u8] = b"eid-cloud/rs/root/v1";
const PAD_LEAF_TAG: &[u8] = b"eid-cloud/rs/pad/v1";
const RECORD_TAG: &[u8] = b"eid-cloud/rs/record/v1";
const SIG_TAG: &[u8] = b"eid-cloud/rs/sig/v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RsError {
    #[error("cannot sign an empty message")]
    EmptyMessage,
    #[error("block {0} is already redacted")]
    AlreadyRedacted(usize),
    #[error("block index {0} is out of range")]
    IndexOutOfRange(usize),
    #[error("input signature does not verify")]
    InvalidSignature,
    #[error("decode: {0}")]
    Decode(#[from] DecodeError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    Visible(Vec<u8>),
    /// The `⊥` symbol: content removed.
    Redacted,
}

impl Block {
    pub fn content(&self) -> Option<&[u8]> {
        match self {
            Block::Visible(c) => Some(c),
            Block::Redacted => None,
        }
    }
}

/// Message `m = (m[1], …, m[ℓ])`. Indices are 1-based and contiguous.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BlockMessage {
    blocks: Vec<Block>,
}

impl BlockMessage {
    pub fn new<I, B>(blocks: I) -> Self
    where
        I: IntoIterator<Item = B>,
        B: Into<Vec<u8>>,
    {
        Self {
            blocks: blocks.into_iter().map(|b| Block::Visible(b.into())).collect(),
        }
    }

    pub fn from_blocks(blocks: Vec<Block>) -> Self {
        Self { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block at 1-based `index`.
    pub fn block(&self, index: usize) -> Option<&Block> {
        index.checked_sub(1).and_then(|i| self.blocks.get(i))
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// `(index, content)` for every visible block.
    pub fn visible(&self) -> impl Iterator<Item = (usize, &[u8])> {
        self.blocks
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.content().map(|c| (i + 1, c)))
    }

    pub fn redacted_indices(&self) -> BTreeSet<usize> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| matches!(b, Block::Redacted))
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Per-block opening information: exactly one of salt or commitment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BlockProof {
    Salt([u8; SALT_LEN]),
    Commitment([u8; 32]),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RedactableSignature {
    root_sig: Signature,
    proofs: Vec<BlockProof>,
}

impl RedactableSignature {
    pub fn block_count(&self) -> usize {
        self.proofs.len()
    }

    pub fn proofs(&self) -> &[BlockProof] {
        &self.proofs
    }

    pub fn root_signature(&self) -> &Signature {
        &self.root_sig
    }

    /// Replaces the proof for 1-based `index`. Used by forgery tests.
    #[doc(hidden)]
    pub fn set_proof(&mut self, index: usize, proof: BlockProof) {
        self.proofs[index - 1] = proof;
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_tag(SIG_TAG);
        w.fixed(&self.root_sig.to_bytes());
        write_proofs(&mut w, &self.proofs);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RsError> {
        let mut r = Reader::new(bytes);
        r.expect_tag(SIG_TAG)?;
        let root_sig = read_signature(&mut r)?;
        let proofs = read_proofs(&mut r)?;
        r.finish()?;
        Ok(Self { root_sig, proofs })
    }
}

fn write_proofs(w: &mut Writer, proofs: &[BlockProof]) {
    w.u32(proofs.len() as u32);
    for p in proofs {
        match p {
            BlockProof::Salt(s) => w.u8(0).fixed(s),
            BlockProof::Commitment(c) => w.u8(1).fixed(c),
        };
    }
}

fn read_proofs(r: &mut Reader<'_>) -> Result<Vec<BlockProof>, DecodeError> {
    let n = r.u32()? as usize;
    let mut proofs = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        proofs.push(match r.u8()? {
            0 => BlockProof::Salt(r.fixed()?),
            1 => BlockProof::Commitment(r.fixed()?),
            _ => return Err(DecodeError::Invalid("block proof kind")),
        });
    }
    Ok(proofs)
}

fn read_signature(r: &mut Reader<'_>) -> Result<Signature, DecodeError> {
    let raw: [u8; crate::crypto::SIGNATURE_LEN] = r.fixed()?;
    Signature::from_bytes(&raw).map_err(|_| DecodeError::Invalid("signature"))
}

/// Salted leaf commitment for the block at 1-based `index`.
pub fn commitment(salt: &[u8; SALT_LEN], index: usize, content: &[u8]) -> [u8; 32] {
    sha256(&[salt, &(index as u32).to_be_bytes(), content])
}

fn pad_leaf() -> [u8; 32] {
    sha256(&[PAD_LEAF_TAG])
}

fn node(left: &[u8; 32], right: &[u8; 32]) -> [u8; 32] {
    sha256(&[&[0x01], left, right])
}

fn merkle_root(mut level: Vec<[u8; 32]>) -> [u8; 32] {
    let width = level.len().next_power_of_two();
    level.resize(width, pad_leaf());
    while level.len() > 1 {
        level = level.chunks(2).map(|pair| node(&pair[0], &pair[1])).collect();
    }
    level[0]
}

fn root_message(block_count: usize, root: &[u8; 32]) -> Vec<u8> {
    let mut w = Writer::with_tag(ROOT_TAG);
    w.u32(block_count as u32).fixed(root);
    w.finish()
}

fn leaves(m: &BlockMessage, proofs: &[BlockProof]) -> Option<Vec<[u8; 32]>> {
    if m.len() != proofs.len() || m.is_empty() {
        return None;
    }
    m.blocks
        .iter()
        .zip(proofs)
        .enumerate()
        .map(|(i, pair)| match pair {
            (Block::Visible(c), BlockProof::Salt(s)) => Some(commitment(s, i + 1, c)),
            (Block::Redacted, BlockProof::Commitment(c)) => Some(*c),
            _ => None,
        })
        .collect()
}

/// RS.KG: a DSS key pair used to sign Merkle roots.
pub fn rs_keygen(owner: &str, seed: Option<u64>) -> SigKeyPair {
    crate::crypto::dss_keygen(owner, seed)
}

/// RS.Sign. Every block must be visible and there must be at least one.
pub fn rs_sign<R: RngCore + CryptoRng>(
    sk: &SigningKey,
    m: &BlockMessage,
    rng: &mut R,
) -> Result<RedactableSignature, RsError> {
    if m.is_empty() {
        return Err(RsError::EmptyMessage);
    }
    let mut proofs = Vec::with_capacity(m.len());
    let mut leaves = Vec::with_capacity(m.len());
    for (i, block) in m.blocks.iter().enumerate() {
        let Block::Visible(content) = block else {
            return Err(RsError::AlreadyRedacted(i + 1));
        };
        let mut salt = [0u8; SALT_LEN];
        rng.fill_bytes(&mut salt);
        leaves.push(commitment(&salt, i + 1, content));
        proofs.push(BlockProof::Salt(salt));
    }
    let root = merkle_root(leaves);
    let root_sig = dss_sign(sk, &root_message(m.len(), &root));
    Ok(RedactableSignature { root_sig, proofs })
}

/// RS.Verify: recompute the root from visible `(content, salt)` pairs and the
/// published commitments, then check the root signature.
pub fn rs_verify(pk: &VerifyingKey, m: &BlockMessage, sig: &RedactableSignature) -> bool {
    match leaves(m, &sig.proofs) {
        Some(l) => dss_verify(pk, &root_message(m.len(), &merkle_root(l)), &sig.root_sig),
        None => false,
    }
}

/// RS.Redact: replace the blocks listed in `mod_set` by `⊥`.
pub fn rs_redact(
    m: &BlockMessage,
    pk: &VerifyingKey,
    sig: &RedactableSignature,
    mod_set: &[usize],
) -> Result<(BlockMessage, RedactableSignature), RsError> {
    if !rs_verify(pk, m, sig) {
        return Err(RsError::InvalidSignature);
    }
    let mut blocks = m.blocks.clone();
    let mut proofs = sig.proofs.clone();
    for &index in mod_set {
        if index == 0 || index > blocks.len() {
            return Err(RsError::IndexOutOfRange(index));
        }
        let slot = index - 1;
        let Block::Visible(content) = &blocks[slot] else {
            return Err(RsError::AlreadyRedacted(index));
        };
        let BlockProof::Salt(salt) = &proofs[slot] else {
            return Err(RsError::InvalidSignature);
        };
        proofs[slot] = BlockProof::Commitment(commitment(salt, index, content));
        blocks[slot] = Block::Redacted;
    }
    Ok((
        BlockMessage { blocks },
        RedactableSignature {
            root_sig: sig.root_sig.clone(),
            proofs,
        },
    ))
}

/// Canonical record of a message together with its signature.
pub fn encode_signed(m: &BlockMessage, sig: &RedactableSignature) -> Vec<u8> {
    let mut w = Writer::with_tag(RECORD_TAG);
    w.u32(m.len() as u32);
    for b in &m.blocks {
        match b {
            Block::Visible(c) => w.u8(0).bytes(c),
            Block::Redacted => w.u8(1),
        };
    }
    w.fixed(&sig.root_sig.to_bytes());
    write_proofs(&mut w, &sig.proofs);
    w.finish()
}

pub fn decode_signed(bytes: &[u8]) -> Result<(BlockMessage, RedactableSignature), RsError> {
    let mut r = Reader::new(bytes);
    r.expect_tag(RECORD_TAG)?;
    let n = r.u32()? as usize;
    let mut blocks = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        blocks.push(match r.u8()? {
            0 => Block::Visible(r.bytes()?.to_vec()),
            1 => Block::Redacted,
            _ => return Err(DecodeError::Invalid("block kind").into()),
        });
    }
    let root_sig = read_signature(&mut r)?;
    let proofs = read_proofs(&mut r)?;
    r.finish()?;
    Ok((BlockMessage { blocks }, RedactableSignature { root_sig, proofs }))
}
