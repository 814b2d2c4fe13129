//! Minimal CBOR reader and writer covering the subset BP7 uses.
//!
//! The writer always emits shortest-form heads, so encoding is canonical and
//! byte-identical across calls. The reader accepts non-minimal heads and both
//! definite- and indefinite-length arrays, since foreign encoders are allowed
//! to produce them.

use alloc::vec::Vec;
use core::fmt;

use crate::MAX_BUNDLE_SIZE;

const MAJOR_UINT: u8 = 0;
const MAJOR_BYTES: u8 = 2;
const MAJOR_TEXT: u8 = 3;
const MAJOR_ARRAY: u8 = 4;
const MAJOR_MAP: u8 = 5;
const MAJOR_TAG: u8 = 6;
const MAJOR_SIMPLE: u8 = 7;

const BREAK: u8 = 0xFF;
const SIMPLE_FALSE: u8 = 0xF4;
const SIMPLE_TRUE: u8 = 0xF5;

/// Low-level CBOR failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CborError {
    /// Ran out of input mid-item.
    Truncated,
    /// Found a different major type than the caller asked for.
    Unexpected { expected: &'static str, found: u8 },
    /// Indefinite-length byte or text string (not used by BP7).
    IndefiniteString,
    /// Additional-info values 28..=30 are reserved.
    ReservedHead(u8),
    /// Declared length exceeds the decoder guard.
    TooLarge(u64),
    /// Value skipping hit the recursion limit.
    NestingTooDeep,
}

impl fmt::Display for CborError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CborError::Truncated => write!(f, "truncated CBOR item"),
            CborError::Unexpected { expected, found } => {
                write!(f, "expected {expected}, found head {found:#04x}")
            }
            CborError::IndefiniteString => write!(f, "indefinite-length string"),
            CborError::ReservedHead(b) => write!(f, "reserved CBOR head {b:#04x}"),
            CborError::TooLarge(n) => write!(f, "declared length {n} exceeds guard"),
            CborError::NestingTooDeep => write!(f, "nesting too deep"),
        }
    }
}

impl core::error::Error for CborError {}

/// Array length as declared on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayLen {
    Definite(u64),
    Indefinite,
}

/// Append-only CBOR writer with shortest-form heads.
#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    pub fn with_capacity(cap: usize) -> Self {
        Writer { buf: Vec::with_capacity(cap) }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    fn head(&mut self, major: u8, value: u64) {
        let m = major << 5;
        if value < 24 {
            self.buf.push(m | value as u8);
        } else if value <= u8::MAX as u64 {
            self.buf.push(m | 24);
            self.buf.push(value as u8);
        } else if value <= u16::MAX as u64 {
            self.buf.push(m | 25);
            self.buf.extend_from_slice(&(value as u16).to_be_bytes());
        } else if value <= u32::MAX as u64 {
            self.buf.push(m | 26);
            self.buf.extend_from_slice(&(value as u32).to_be_bytes());
        } else {
            self.buf.push(m | 27);
            self.buf.extend_from_slice(&value.to_be_bytes());
        }
    }

    pub fn uint(&mut self, value: u64) {
        self.head(MAJOR_UINT, value);
    }

    pub fn bytes(&mut self, value: &[u8]) {
        self.head(MAJOR_BYTES, value.len() as u64);
        self.buf.extend_from_slice(value);
    }

    pub fn text(&mut self, value: &str) {
        self.head(MAJOR_TEXT, value.len() as u64);
        self.buf.extend_from_slice(value.as_bytes());
    }

    pub fn bool(&mut self, value: bool) {
        self.buf.push(if value { SIMPLE_TRUE } else { SIMPLE_FALSE });
    }

    /// Definite-length array head for `len` upcoming items.
    pub fn array(&mut self, len: u64) {
        self.head(MAJOR_ARRAY, len);
    }

    /// Indefinite-length array head; terminate with [`Writer::break_stop`].
    pub fn begin_array(&mut self) {
        self.buf.push((MAJOR_ARRAY << 5) | 31);
    }

    pub fn break_stop(&mut self) {
        self.buf.push(BREAK);
    }

    /// Splice pre-encoded CBOR verbatim.
    pub fn raw(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Emit just a byte-string head; the caller streams `len` content bytes
    /// separately. Used by transports that frame a bundle without copying it.
    pub fn bytes_head(&mut self, len: u64) {
        self.head(MAJOR_BYTES, len);
    }

    /// Overwrite `patch.len()` bytes at `offset`. Panics if out of range.
    pub fn patch(&mut self, offset: usize, patch: &[u8]) {
        self.buf[offset..offset + patch.len()].copy_from_slice(patch);
    }
}

/// Cursor-based CBOR reader over a byte slice.
#[derive(Debug, Clone)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn is_at_end(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn byte(&mut self) -> Result<u8, CborError> {
        let b = *self.buf.get(self.pos).ok_or(CborError::Truncated)?;
        self.pos += 1;
        Ok(b)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CborError> {
        if self.remaining() < n {
            return Err(CborError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Read a head, returning `(major, value, indefinite)`.
    fn head(&mut self) -> Result<(u8, u64, bool), CborError> {
        let initial = self.byte()?;
        let major = initial >> 5;
        let info = initial & 0x1F;
        let value = match info {
            0..=23 => info as u64,
            24 => self.byte()? as u64,
            25 => u16::from_be_bytes(self.take(2)?.try_into().unwrap()) as u64,
            26 => u32::from_be_bytes(self.take(4)?.try_into().unwrap()) as u64,
            27 => u64::from_be_bytes(self.take(8)?.try_into().unwrap()),
            28..=30 => return Err(CborError::ReservedHead(initial)),
            31 => return Ok((major, 0, true)),
            _ => unreachable!(),
        };
        Ok((major, value, false))
    }

    pub fn uint(&mut self) -> Result<u64, CborError> {
        let (major, value, indef) = self.head()?;
        if major != MAJOR_UINT || indef {
            return Err(CborError::Unexpected { expected: "unsigned integer", found: major << 5 });
        }
        Ok(value)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], CborError> {
        let (major, len, indef) = self.head()?;
        if major != MAJOR_BYTES {
            return Err(CborError::Unexpected { expected: "byte string", found: major << 5 });
        }
        if indef {
            return Err(CborError::IndefiniteString);
        }
        if len > MAX_BUNDLE_SIZE as u64 {
            return Err(CborError::TooLarge(len));
        }
        self.take(len as usize)
    }

    pub fn text(&mut self) -> Result<&'a str, CborError> {
        let (major, len, indef) = self.head()?;
        if major != MAJOR_TEXT {
            return Err(CborError::Unexpected { expected: "text string", found: major << 5 });
        }
        if indef {
            return Err(CborError::IndefiniteString);
        }
        if len > MAX_BUNDLE_SIZE as u64 {
            return Err(CborError::TooLarge(len));
        }
        let raw = self.take(len as usize)?;
        core::str::from_utf8(raw)
            .map_err(|_| CborError::Unexpected { expected: "utf-8 text", found: MAJOR_TEXT << 5 })
    }

    pub fn bool(&mut self) -> Result<bool, CborError> {
        match self.byte()? {
            SIMPLE_FALSE => Ok(false),
            SIMPLE_TRUE => Ok(true),
            b => Err(CborError::Unexpected { expected: "boolean", found: b }),
        }
    }

    pub fn array(&mut self) -> Result<ArrayLen, CborError> {
        let (major, len, indef) = self.head()?;
        if major != MAJOR_ARRAY {
            return Err(CborError::Unexpected { expected: "array", found: major << 5 });
        }
        if indef {
            Ok(ArrayLen::Indefinite)
        } else {
            Ok(ArrayLen::Definite(len))
        }
    }

    /// Consume a break byte if one is next. Returns whether it did.
    pub fn break_if(&mut self) -> Result<bool, CborError> {
        if self.pos < self.buf.len() && self.buf[self.pos] == BREAK {
            self.pos += 1;
            Ok(true)
        } else if self.pos >= self.buf.len() {
            Err(CborError::Truncated)
        } else {
            Ok(false)
        }
    }

    /// Peek at the major type of the next item without consuming it.
    pub fn peek_major(&self) -> Result<u8, CborError> {
        self.buf.get(self.pos).map(|b| b >> 5).ok_or(CborError::Truncated)
    }

    /// Skip one complete value of any type, returning its byte span.
    pub fn skip_value(&mut self) -> Result<&'a [u8], CborError> {
        let start = self.pos;
        self.skip_inner(0)?;
        Ok(&self.buf[start..self.pos])
    }

    fn skip_inner(&mut self, depth: u32) -> Result<(), CborError> {
        if depth > 64 {
            return Err(CborError::NestingTooDeep);
        }
        let (major, value, indef) = self.head()?;
        match major {
            MAJOR_BYTES | MAJOR_TEXT => {
                if indef {
                    // chunked string: skip definite chunks until break
                    loop {
                        if self.break_if()? {
                            return Ok(());
                        }
                        let (m, len, i) = self.head()?;
                        if m != major || i {
                            return Err(CborError::Unexpected {
                                expected: "string chunk",
                                found: m << 5,
                            });
                        }
                        if len > MAX_BUNDLE_SIZE as u64 {
                            return Err(CborError::TooLarge(len));
                        }
                        self.take(len as usize)?;
                    }
                }
                if value > MAX_BUNDLE_SIZE as u64 {
                    return Err(CborError::TooLarge(value));
                }
                self.take(value as usize)?;
                Ok(())
            }
            MAJOR_ARRAY | MAJOR_MAP => {
                let per_entry = if major == MAJOR_MAP { 2 } else { 1 };
                if indef {
                    loop {
                        if self.break_if()? {
                            return Ok(());
                        }
                        for _ in 0..per_entry {
                            self.skip_inner(depth + 1)?;
                        }
                    }
                }
                if value > (MAX_BUNDLE_SIZE as u64) / per_entry.max(1) {
                    return Err(CborError::TooLarge(value));
                }
                for _ in 0..value * per_entry {
                    self.skip_inner(depth + 1)?;
                }
                Ok(())
            }
            MAJOR_TAG => self.skip_inner(depth + 1),
            MAJOR_SIMPLE => {
                if indef {
                    // a lone break outside a container
                    return Err(CborError::Unexpected { expected: "value", found: BREAK });
                }
                // floats carry their payload in the head we already read
                Ok(())
            }
            // uint / negative int: fully consumed by the head
            _ => Ok(()),
        }
    }
}

/// Incrementally parse a byte-string head from a possibly partial buffer.
///
/// Returns `Ok(None)` when more bytes are needed to finish the head,
/// `Ok(Some((head_len, content_len)))` once the head is complete. Stream
/// receivers use this to learn a frame length before the frame has arrived.
pub fn byte_string_head(buf: &[u8]) -> Result<Option<(usize, u64)>, CborError> {
    let Some(&initial) = buf.first() else {
        return Ok(None);
    };
    if initial >> 5 != MAJOR_BYTES {
        return Err(CborError::Unexpected { expected: "byte string", found: initial });
    }
    let info = initial & 0x1F;
    let extra = match info {
        0..=23 => 0usize,
        24 => 1,
        25 => 2,
        26 => 4,
        27 => 8,
        31 => return Err(CborError::IndefiniteString),
        _ => return Err(CborError::ReservedHead(initial)),
    };
    if buf.len() < 1 + extra {
        return Ok(None);
    }
    let len = match info {
        0..=23 => info as u64,
        24 => buf[1] as u64,
        25 => u16::from_be_bytes(buf[1..3].try_into().unwrap()) as u64,
        26 => u32::from_be_bytes(buf[1..5].try_into().unwrap()) as u64,
        27 => u64::from_be_bytes(buf[1..9].try_into().unwrap()),
        _ => unreachable!(),
    };
    if len > MAX_BUNDLE_SIZE as u64 {
        return Err(CborError::TooLarge(len));
    }
    Ok(Some((1 + extra, len)))
}
