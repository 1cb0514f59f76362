//! Word-level SPIR-V binary encoding and decoding.

use spvkit_grammar::SPIRV_MAGIC;

pub type Word = u32;

/// Default generator word: tool id 32 in the high half, version 0.
pub const DEFAULT_GENERATOR: Word = 32 << 16;

pub const HEADER_WORDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("not a SPIR-V module (magic word {0:#010x})")]
    NotSpirv(Word),
    #[error("truncated stream: {0}")]
    Truncated(String),
    #[error("corrupt stream: instruction at word {offset} has word count 0")]
    ZeroWordCount { offset: usize },
    #[error("instruction with {0} words does not fit the 16-bit word count")]
    TooLong(usize),
    #[error("module bound is 0; recompute it before encoding the header")]
    ZeroBound,
    #[error("string literal contains a NUL byte at offset {0}")]
    EmbeddedNul(usize),
    #[error("string literal is not NUL-terminated")]
    UnterminatedString,
    #[error("string literal is not valid UTF-8")]
    InvalidUtf8,
    #[error("literal width {0} is not resolved to 8, 16, 32 or 64 bits")]
    UnresolvedWidth(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModuleHeader {
    pub magic: Word,
    pub major: u8,
    pub minor: u8,
    pub generator: Word,
    pub bound: u32,
    pub schema: Word,
}

impl ModuleHeader {
    pub fn new(major: u8, minor: u8, generator: Word, bound: u32, schema: Word) -> Self {
        ModuleHeader {
            magic: SPIRV_MAGIC,
            major,
            minor,
            generator,
            bound,
            schema,
        }
    }

    pub fn version_word(&self) -> Word {
        (u32::from(self.major) << 16) | (u32::from(self.minor) << 8)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawInstruction {
    pub opcode: u16,
    pub operands: Vec<Word>,
}

impl RawInstruction {
    pub fn new(opcode: u16, operands: Vec<Word>) -> Self {
        RawInstruction { opcode, operands }
    }

    pub fn word_count(&self) -> usize {
        1 + self.operands.len()
    }
}

pub fn encode_header(h: &ModuleHeader) -> Result<[Word; HEADER_WORDS], CodecError> {
    if h.bound == 0 {
        return Err(CodecError::ZeroBound);
    }
    Ok([h.magic, h.version_word(), h.generator, h.bound, h.schema])
}

pub fn encode_instruction(ri: &RawInstruction, out: &mut Vec<Word>) -> Result<(), CodecError> {
    let count = ri.word_count();
    if count > usize::from(u16::MAX) {
        return Err(CodecError::TooLong(count));
    }
    out.push(((count as u32) << 16) | u32::from(ri.opcode));
    out.extend_from_slice(&ri.operands);
    Ok(())
}

/// NUL-terminated, zero-padded to a word boundary, first byte in the low
/// bits of the first word.
pub fn encode_string(s: &str) -> Result<Vec<Word>, CodecError> {
    if let Some(pos) = s.bytes().position(|b| b == 0) {
        return Err(CodecError::EmbeddedNul(pos));
    }
    let bytes = s.as_bytes();
    let mut words = vec![0; bytes.len() / 4 + 1];
    for (i, b) in bytes.iter().enumerate() {
        words[i / 4] |= u32::from(*b) << (8 * (i % 4));
    }
    Ok(words)
}

/// Decodes a string literal from the front of `words`, returning the text
/// and the number of words it occupied.
pub fn decode_string(words: &[Word]) -> Result<(String, usize), CodecError> {
    let mut bytes = Vec::new();
    for (i, w) in words.iter().enumerate() {
        for b in w.to_le_bytes() {
            if b == 0 {
                let s = String::from_utf8(bytes).map_err(|_| CodecError::InvalidUtf8)?;
                return Ok((s, i + 1));
            }
            bytes.push(b);
        }
    }
    Err(CodecError::UnterminatedString)
}

/// Widths up to 32 take one word; signed values are sign-extended from
/// `width` bits. Width 64 takes two words, low word first.
pub fn encode_context_dependent_literal(
    bits: u64,
    width: u32,
    signed: bool,
) -> Result<Vec<Word>, CodecError> {
    match width {
        8 | 16 => {
            let v = (bits as u32) & ((1u32 << width) - 1);
            let sign = 1u32 << (width - 1);
            if signed && v & sign != 0 {
                Ok(vec![v | !((1u32 << width) - 1)])
            } else {
                Ok(vec![v])
            }
        }
        32 => Ok(vec![bits as u32]),
        64 => Ok(vec![bits as u32, (bits >> 32) as u32]),
        other => Err(CodecError::UnresolvedWidth(other)),
    }
}

pub fn words_to_bytes(words: &[Word]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_le_bytes()).collect()
}

/// Splits a byte stream into words, detecting byte order from the magic.
pub fn bytes_to_words(bytes: &[u8]) -> Result<Vec<Word>, CodecError> {
    if bytes.len() < HEADER_WORDS * 4 {
        return Err(CodecError::Truncated(format!(
            "{} bytes is shorter than the 20-byte header",
            bytes.len()
        )));
    }
    if bytes.len() % 4 != 0 {
        return Err(CodecError::Truncated(format!(
            "{} bytes is not a whole number of words",
            bytes.len()
        )));
    }
    let first = [bytes[0], bytes[1], bytes[2], bytes[3]];
    let from: fn([u8; 4]) -> u32 = if u32::from_le_bytes(first) == SPIRV_MAGIC {
        u32::from_le_bytes
    } else if u32::from_be_bytes(first) == SPIRV_MAGIC {
        u32::from_be_bytes
    } else {
        return Err(CodecError::NotSpirv(u32::from_le_bytes(first)));
    };
    Ok(bytes
        .chunks_exact(4)
        .map(|c| from([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn decode_header(words: &[Word]) -> Result<ModuleHeader, CodecError> {
    if words.len() < HEADER_WORDS {
        return Err(CodecError::Truncated("missing header words".into()));
    }
    if words[0] != SPIRV_MAGIC {
        return Err(CodecError::NotSpirv(words[0]));
    }
    Ok(ModuleHeader {
        magic: words[0],
        major: (words[1] >> 16) as u8,
        minor: (words[1] >> 8) as u8,
        generator: words[2],
        bound: words[3],
        schema: words[4],
    })
}

pub fn decode_instructions(words: &[Word]) -> Result<Vec<RawInstruction>, CodecError> {
    let mut out = Vec::new();
    let mut at = 0;
    while at < words.len() {
        let count = (words[at] >> 16) as usize;
        let opcode = words[at] as u16;
        if count == 0 {
            return Err(CodecError::ZeroWordCount {
                offset: at + HEADER_WORDS,
            });
        }
        if at + count > words.len() {
            return Err(CodecError::Truncated(format!(
                "instruction at word {} needs {count} words, {} remain",
                at + HEADER_WORDS,
                words.len() - at
            )));
        }
        out.push(RawInstruction::new(
            opcode,
            words[at + 1..at + count].to_vec(),
        ));
        at += count;
    }
    Ok(out)
}

pub fn decode_module(bytes: &[u8]) -> Result<(ModuleHeader, Vec<RawInstruction>), CodecError> {
    let words = bytes_to_words(bytes)?;
    let header = decode_header(&words)?;
    let insts = decode_instructions(&words[HEADER_WORDS..])?;
    Ok((header, insts))
}

pub fn encode_module(h: &ModuleHeader, insts: &[RawInstruction]) -> Result<Vec<u8>, CodecError> {
    let mut words = encode_header(h)?.to_vec();
    for ri in insts {
        encode_instruction(ri, &mut words)?;
    }
    Ok(words_to_bytes(&words))
}
