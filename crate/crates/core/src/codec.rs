//! Length-prefixed binary records.
//!
//! Every canonical encoding in the crate (signed envelope bodies, redactable
//! signatures, re-encryption ciphertexts, key material) goes through this
//! writer/reader pair so the byte layout is stable across runs. Integers are
//! big-endian; variable-length fields carry a `u32` length prefix.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unexpected end of input")]
    Truncated,
    #[error("trailing bytes after record")]
    Trailing,
    #[error("invalid value for {0}")]
    Invalid(&'static str),
    #[error("unsupported version {0}")]
    Version(u8),
}

#[derive(Debug, Default, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_tag(tag: &[u8]) -> Self {
        let mut w = Self::new();
        w.bytes(tag);
        w
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.u32(u32::try_from(v.len()).expect("record field exceeds u32::MAX"));
        self.buf.extend_from_slice(v);
        self
    }

    pub fn str(&mut self, v: &str) -> &mut Self {
        self.bytes(v.as_bytes())
    }

    pub fn fixed(&mut self, v: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(v);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct Reader<'a> {
    data: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.data.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, rest) = self.data.split_at(n);
        self.data = rest;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        let mut a = [0u8; 8];
        a.copy_from_slice(self.take(8)?);
        Ok(u64::from_be_bytes(a))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub fn str(&mut self) -> Result<&'a str, DecodeError> {
        std::str::from_utf8(self.bytes()?).map_err(|_| DecodeError::Invalid("utf-8 string"))
    }

    pub fn fixed<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    pub fn expect_tag(&mut self, tag: &[u8]) -> Result<(), DecodeError> {
        if self.bytes()? == tag {
            Ok(())
        } else {
            Err(DecodeError::Invalid("record tag"))
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        if self.data.is_empty() {
            Ok(())
        } else {
            Err(DecodeError::Trailing)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_back_what_was_written() {
        let mut w = Writer::with_tag(b"t");
        w.u8(7).u32(0xdead_beef).u64(42).str("MOA-ID").bytes(&[]).fixed(&[1, 2]);
        let bytes = w.finish();
        let mut r = Reader::new(&bytes);
        r.expect_tag(b"t").unwrap();
        assert_eq!(r.u8().unwrap(), 7);
        assert_eq!(r.u32().unwrap(), 0xdead_beef);
        assert_eq!(r.u64().unwrap(), 42);
        assert_eq!(r.str().unwrap(), "MOA-ID");
        assert_eq!(r.bytes().unwrap(), b"");
        assert_eq!(r.fixed::<2>().unwrap(), [1, 2]);
        r.finish().unwrap();
    }

    #[test]
    fn truncated_length_prefix_is_rejected() {
        let mut w = Writer::new();
        w.bytes(b"hello");
        let mut bytes = w.finish();
        bytes.pop();
        assert_eq!(Reader::new(&bytes).bytes(), Err(DecodeError::Truncated));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let r = Reader::new(&[0]);
        assert_eq!(r.finish(), Err(DecodeError::Trailing));
    }
}
