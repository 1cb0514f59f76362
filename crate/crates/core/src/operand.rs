//! Hand-written base types the generated API is built on.

use std::fmt;

use crate::codec::{
    encode_context_dependent_literal, encode_string, CodecError, RawInstruction, Word,
};

/// A result id. Valid ids start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Id(pub u32);

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "%{}", self.0)
    }
}

/// Raw bits of a literal whose width comes from a type instruction
/// (`OpConstant`, `OpSpecConstant`, `OpSwitch` cases).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LiteralNumber(pub u64);

impl LiteralNumber {
    pub fn from_u32(v: u32) -> Self {
        Self(u64::from(v))
    }

    pub fn from_i32(v: i32) -> Self {
        Self(u64::from(v as u32))
    }

    pub fn from_u64(v: u64) -> Self {
        Self(v)
    }

    pub fn from_i64(v: i64) -> Self {
        Self(v as u64)
    }

    pub fn from_f32(v: f32) -> Self {
        Self(u64::from(v.to_bits()))
    }

    pub fn from_f64(v: f64) -> Self {
        Self(v.to_bits())
    }

    /// The value as it round-trips through the binary at `width` bits.
    pub fn canonical(self, width: u32, signed: bool) -> Result<Self, CodecError> {
        let words = encode_context_dependent_literal(self.0, width, signed)?;
        Ok(match words[..] {
            [lo] => Self(u64::from(lo)),
            [lo, hi] => Self(u64::from(lo) | (u64::from(hi) << 32)),
            _ => unreachable!("one or two words"),
        })
    }
}

/// One operand in word order. Enumerants and masks are `Literal`s.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Id(Id),
    Literal(u32),
    Number(LiteralNumber),
    String(String),
}

/// An instruction with its result type and result split out. All other
/// operands are flattened in binary order, enumerant parameters included.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub opcode: u16,
    pub result_type: Option<Id>,
    pub result: Option<Id>,
    pub operands: Vec<Operand>,
}

/// `(width, signed)` of the type that governs a `LiteralNumber`.
pub type NumberWidth = (u32, bool);

impl Instruction {
    pub fn new(
        opcode: u16,
        result_type: Option<Id>,
        result: Option<Id>,
        operands: Vec<Operand>,
    ) -> Self {
        Instruction {
            opcode,
            result_type,
            result,
            operands,
        }
    }

    /// Every id the instruction refers to, result excluded.
    pub fn used_ids(&self) -> impl Iterator<Item = Id> + '_ {
        self.result_type
            .into_iter()
            .chain(self.operands.iter().filter_map(|o| match o {
                Operand::Id(id) => Some(*id),
                _ => None,
            }))
    }

    pub fn has_numbers(&self) -> bool {
        self.operands
            .iter()
            .any(|o| matches!(o, Operand::Number(_)))
    }

    /// Encodes to words. `width` must be given when a `Number` operand is
    /// present.
    pub fn encode(&self, width: Option<NumberWidth>) -> Result<RawInstruction, CodecError> {
        let mut words: Vec<Word> = Vec::with_capacity(self.operands.len() + 2);
        words.extend(self.result_type.map(|i| i.0));
        words.extend(self.result.map(|i| i.0));
        for op in &self.operands {
            match op {
                Operand::Id(id) => words.push(id.0),
                Operand::Literal(v) => words.push(*v),
                Operand::Number(n) => {
                    let (w, signed) = width.unwrap_or((0, false));
                    words.extend(encode_context_dependent_literal(n.0, w, signed)?);
                }
                Operand::String(s) => words.extend(encode_string(s)?),
            }
        }
        Ok(RawInstruction::new(self.opcode, words))
    }
}

/// Appends a value's operands in binary order.
pub trait IntoOperands {
    fn push_operands(self, out: &mut Vec<Operand>);
}

impl IntoOperands for Id {
    fn push_operands(self, out: &mut Vec<Operand>) {
        out.push(Operand::Id(self));
    }
}

impl IntoOperands for u32 {
    fn push_operands(self, out: &mut Vec<Operand>) {
        out.push(Operand::Literal(self));
    }
}

impl IntoOperands for String {
    fn push_operands(self, out: &mut Vec<Operand>) {
        out.push(Operand::String(self));
    }
}

impl IntoOperands for &str {
    fn push_operands(self, out: &mut Vec<Operand>) {
        out.push(Operand::String(self.to_string()));
    }
}

impl IntoOperands for LiteralNumber {
    fn push_operands(self, out: &mut Vec<Operand>) {
        out.push(Operand::Number(self));
    }
}

impl<T: IntoOperands> IntoOperands for Option<T> {
    fn push_operands(self, out: &mut Vec<Operand>) {
        if let Some(v) = self {
            v.push_operands(out);
        }
    }
}

impl<T: IntoOperands> IntoOperands for Vec<T> {
    fn push_operands(self, out: &mut Vec<Operand>) {
        for v in self {
            v.push_operands(out);
        }
    }
}

/// Implemented by every generated instruction type.
pub trait TypedInstruction: Sized {
    const OPCODE: u16;
    const NAME: &'static str;

    fn into_instruction(self) -> Instruction;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_orders_result_first() {
        let inst = Instruction::new(
            128,
            Some(Id(1)),
            Some(Id(4)),
            vec![Operand::Id(Id(2)), Operand::Id(Id(3))],
        );
        assert_eq!(inst.encode(None).unwrap().operands, [1, 4, 2, 3]);
        assert_eq!(inst.used_ids().collect::<Vec<_>>(), [Id(1), Id(2), Id(3)]);
    }

    #[test]
    fn numbers_need_a_width() {
        let c = Instruction::new(
            43,
            Some(Id(1)),
            Some(Id(2)),
            vec![Operand::Number(LiteralNumber(1))],
        );
        assert_eq!(c.encode(None), Err(CodecError::UnresolvedWidth(0)));
        assert_eq!(c.encode(Some((64, false))).unwrap().operands, [1, 2, 1, 0]);
    }

    #[test]
    fn canonical_numbers() {
        assert_eq!(
            LiteralNumber::from_i64(-1).canonical(32, true).unwrap(),
            LiteralNumber(0xFFFF_FFFF)
        );
        assert_eq!(
            LiteralNumber::from_i32(-2).canonical(64, true).unwrap(),
            LiteralNumber(0xFFFF_FFFE)
        );
        assert_eq!(
            LiteralNumber(0x1_0000_0005).canonical(64, false).unwrap().0,
            0x1_0000_0005
        );
    }
}
