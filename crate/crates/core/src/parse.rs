//! Grammar-driven operand parsing of raw instructions.
//!
//! Operand slots are consumed left to right. Enumerant parameters and
//! composite members are expanded in place, and three instructions need
//! context from earlier in the module: `OpConstant`/`OpSpecConstant`
//! (literal width from the result type), `OpSwitch` (case width from the
//! selector's type) and `OpExtInst` (operands from the imported set).

use std::collections::{HashMap, VecDeque};

use spvkit_grammar::{Category, InstructionDef, OperandKindDef, Quantifier};

use crate::codec::{decode_module, decode_string, CodecError, ModuleHeader, RawInstruction, Word};
use crate::grammar::Grammar;
use crate::op;
use crate::operand::{Id, Instruction, LiteralNumber, Operand};

pub const OPENCL_STD: &str = "OpenCL.std";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("unknown opcode {0}")]
    UnknownOpcode(u16),
    #[error("{opname}: missing {kind} operand")]
    MissingOperand { opname: String, kind: String },
    #[error("{opname}: {count} operand word(s) left after the last operand")]
    TrailingWords { opname: String, count: usize },
    #[error("{opname}: literal width cannot be resolved from its type")]
    UnresolvedWidth { opname: String },
    #[error("{opname}: operand kind {kind} is not in the grammar")]
    UnknownKind { opname: String, kind: String },
    #[error("{opname}: {source}")]
    Codec { opname: String, source: CodecError },
}

/// Scalar type governing a context-dependent literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NumType {
    pub width: u32,
    pub signed: bool,
    pub float: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value<'g> {
    Id(Id),
    Literal(u32),
    Number {
        bits: u64,
        ty: NumType,
    },
    String(String),
    Enum {
        kind: &'g OperandKindDef,
        value: u32,
    },
    Mask {
        kind: &'g OperandKindDef,
        value: u32,
    },
    ExtInst {
        number: u32,
        name: Option<&'g str>,
    },
    SpecOp {
        opcode: u16,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedOperand<'g> {
    pub kind: &'g str,
    pub value: Value<'g>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedInstruction<'g> {
    pub opcode: u16,
    pub def: &'g InstructionDef,
    pub result_type: Option<Id>,
    pub result: Option<Id>,
    pub operands: Vec<ParsedOperand<'g>>,
    pub word_count: usize,
}

impl ParsedInstruction<'_> {
    /// All ids referenced by operands, result type included.
    pub fn used_ids(&self) -> impl Iterator<Item = Id> + '_ {
        self.result_type
            .into_iter()
            .chain(self.operands.iter().filter_map(|o| match o.value {
                Value::Id(id) => Some(id),
                _ => None,
            }))
    }

    pub fn to_instruction(&self) -> Instruction {
        let operands = self
            .operands
            .iter()
            .map(|o| match &o.value {
                Value::Id(id) => Operand::Id(*id),
                Value::Literal(v)
                | Value::Enum { value: v, .. }
                | Value::Mask { value: v, .. }
                | Value::ExtInst { number: v, .. } => Operand::Literal(*v),
                Value::SpecOp { opcode } => Operand::Literal(u32::from(*opcode)),
                Value::Number { bits, .. } => Operand::Number(LiteralNumber(*bits)),
                Value::String(s) => Operand::String(s.clone()),
            })
            .collect();
        Instruction::new(self.opcode, self.result_type, self.result, operands)
    }
}

/// Facts gathered from earlier instructions.
#[derive(Debug, Clone, Default)]
pub struct TypeContext {
    pub scalars: HashMap<Id, NumType>,
    pub value_types: HashMap<Id, Id>,
    pub ext_sets: HashMap<Id, String>,
}

impl TypeContext {
    pub fn observe(&mut self, p: &ParsedInstruction<'_>) {
        let lit = |i: usize| match p.operands.get(i).map(|o| &o.value) {
            Some(Value::Literal(v)) => Some(*v),
            _ => None,
        };
        match (p.opcode, p.result) {
            (op::TYPE_INT, Some(r)) => {
                if let (Some(width), Some(sign)) = (lit(0), lit(1)) {
                    self.scalars.insert(
                        r,
                        NumType {
                            width,
                            signed: sign == 1,
                            float: false,
                        },
                    );
                }
            }
            (op::TYPE_FLOAT, Some(r)) => {
                if let Some(width) = lit(0) {
                    self.scalars.insert(
                        r,
                        NumType {
                            width,
                            signed: false,
                            float: true,
                        },
                    );
                }
            }
            (op::EXT_INST_IMPORT, Some(r)) => {
                if let Some(Value::String(s)) = p.operands.first().map(|o| &o.value) {
                    self.ext_sets.insert(r, s.clone());
                }
            }
            _ => {}
        }
        if let (Some(r), Some(t)) = (p.result, p.result_type) {
            self.value_types.insert(r, t);
        }
    }

    pub fn type_of_value(&self, id: Id) -> Option<NumType> {
        self.scalars.get(self.value_types.get(&id)?).copied()
    }
}

struct Walker<'g, 'w> {
    g: &'g Grammar,
    ctx: &'w TypeContext,
    opcode: u16,
    opname: &'g str,
    words: &'w [Word],
    pos: usize,
    result_type: Option<Id>,
    out: Vec<ParsedOperand<'g>>,
    queue: VecDeque<(&'g str, Quantifier)>,
}

impl<'g> Walker<'g, '_> {
    fn at_end(&self) -> bool {
        self.pos >= self.words.len()
    }

    fn word(&mut self, kind: &str) -> Result<Word, ParseError> {
        let w = *self
            .words
            .get(self.pos)
            .ok_or_else(|| ParseError::MissingOperand {
                opname: self.opname.to_string(),
                kind: kind.to_string(),
            })?;
        self.pos += 1;
        Ok(w)
    }

    fn push(&mut self, kind: &'g str, value: Value<'g>) {
        self.out.push(ParsedOperand { kind, value });
    }

    fn number(&mut self, kind: &'g str, ty: NumType) -> Result<(), ParseError> {
        let lo = self.word(kind)?;
        let bits = if ty.width > 32 {
            u64::from(lo) | (u64::from(self.word(kind)?) << 32)
        } else {
            u64::from(lo)
        };
        self.push(kind, Value::Number { bits, ty });
        Ok(())
    }

    fn first_id(&self) -> Option<Id> {
        self.out.iter().find_map(|o| match o.value {
            Value::Id(id) => Some(id),
            _ => None,
        })
    }

    fn one(&mut self, kind: &'g str) -> Result<(), ParseError> {
        let g = self.g;
        let def = g.kind(kind).ok_or_else(|| ParseError::UnknownKind {
            opname: self.opname.to_string(),
            kind: kind.to_string(),
        })?;
        let kind = def.kind.as_str();
        match def.category {
            Category::Id => {
                let w = self.word(kind)?;
                self.push(kind, Value::Id(Id(w)));
            }
            Category::ValueEnum => {
                let value = self.word(kind)?;
                if let Some(e) = def.enumerant_by_value(value) {
                    for p in e.parameters.iter().rev() {
                        self.queue.push_front((p.kind.as_str(), p.quantifier));
                    }
                }
                self.push(kind, Value::Enum { kind: def, value });
            }
            Category::BitEnum => {
                let value = self.word(kind)?;
                let mut params = Vec::new();
                for bit in (0..32).map(|b| 1u32 << b).filter(|b| value & b != 0) {
                    if let Some(e) = def.enumerant_by_value(bit) {
                        params.extend(e.parameters.iter().map(|p| (p.kind.as_str(), p.quantifier)));
                    }
                }
                for p in params.into_iter().rev() {
                    self.queue.push_front(p);
                }
                self.push(kind, Value::Mask { kind: def, value });
            }
            Category::Composite => {
                for b in def.bases.iter().flatten().rev() {
                    self.queue.push_front((b.as_str(), Quantifier::Single));
                }
            }
            Category::Literal => self.literal(kind)?,
        }
        Ok(())
    }

    fn literal(&mut self, kind: &'g str) -> Result<(), ParseError> {
        match kind {
            "LiteralString" => {
                let rest = &self.words[self.pos.min(self.words.len())..];
                let (s, used) = decode_string(rest).map_err(|source| ParseError::Codec {
                    opname: self.opname.to_string(),
                    source,
                })?;
                self.pos += used;
                self.push(kind, Value::String(s));
            }
            "LiteralContextDependentNumber" => {
                let ty = self
                    .result_type
                    .and_then(|t| self.ctx.scalars.get(&t).copied())
                    .ok_or_else(|| ParseError::UnresolvedWidth {
                        opname: self.opname.to_string(),
                    })?;
                self.number(kind, ty)?;
            }
            "LiteralInteger" if self.opcode == op::SWITCH => {
                match self.first_id().and_then(|sel| self.ctx.type_of_value(sel)) {
                    Some(ty) => self.number(kind, ty)?,
                    None => {
                        let w = self.word(kind)?;
                        self.push(kind, Value::Literal(w));
                    }
                }
            }
            "LiteralExtInstInteger" => {
                let number = self.word(kind)?;
                let set = self.first_id().and_then(|id| self.ctx.ext_sets.get(&id));
                let mut name = None;
                if set.map(String::as_str) == Some(OPENCL_STD) {
                    if let Ok(e) = self.g.opencl.by_number(number) {
                        name = Some(e.name.as_str());
                        self.queue.clear();
                        for s in &e.operands {
                            self.queue.push_back((s.kind.as_str(), s.quantifier));
                        }
                    }
                }
                self.push(kind, Value::ExtInst { number, name });
            }
            "LiteralSpecConstantOpInteger" => {
                let opcode = self.word(kind)? as u16;
                if let Some(d) = self.g.def(opcode) {
                    self.queue.clear();
                    for s in d.operands.iter().filter(|s| !is_result_slot(&s.kind)) {
                        self.queue.push_back((s.kind.as_str(), s.quantifier));
                    }
                }
                self.push(kind, Value::SpecOp { opcode });
            }
            _ => {
                let w = self.word(kind)?;
                self.push(kind, Value::Literal(w));
            }
        }
        Ok(())
    }

    fn run(&mut self) -> Result<(), ParseError> {
        while let Some((kind, q)) = self.queue.pop_front() {
            match q {
                Quantifier::Single => self.one(kind)?,
                Quantifier::Optional => {
                    if !self.at_end() {
                        self.one(kind)?;
                    }
                }
                Quantifier::Variadic => {
                    if !self.at_end() {
                        self.queue.push_front((kind, q));
                        self.one(kind)?;
                    }
                }
            }
        }
        if !self.at_end() {
            return Err(ParseError::TrailingWords {
                opname: self.opname.to_string(),
                count: self.words.len() - self.pos,
            });
        }
        Ok(())
    }
}

pub fn is_result_slot(kind: &str) -> bool {
    kind == "IdResultType" || kind == "IdResult"
}

/// Parses one instruction's operands against its grammar entry.
pub fn parse_instruction<'g>(
    g: &'g Grammar,
    ctx: &TypeContext,
    raw: &RawInstruction,
) -> Result<ParsedInstruction<'g>, ParseError> {
    let def = g
        .def(raw.opcode)
        .ok_or(ParseError::UnknownOpcode(raw.opcode))?;
    let mut w = Walker {
        g,
        ctx,
        opcode: raw.opcode,
        opname: def.name.as_str(),
        words: &raw.operands,
        pos: 0,
        result_type: None,
        out: Vec::new(),
        queue: VecDeque::new(),
    };
    let mut result = None;
    for slot in &def.operands {
        match slot.kind.as_str() {
            "IdResultType" => w.result_type = Some(Id(w.word("IdResultType")?)),
            "IdResult" => result = Some(Id(w.word("IdResult")?)),
            k => w.queue.push_back((k, slot.quantifier)),
        }
    }
    w.run()?;
    Ok(ParsedInstruction {
        opcode: raw.opcode,
        def,
        result_type: w.result_type,
        result,
        operands: w.out,
        word_count: raw.word_count(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("instruction {index}: {error}")]
    Parse { index: usize, error: ParseError },
}

/// Decodes and parses every instruction of a module.
pub fn parse_module<'g>(
    g: &'g Grammar,
    bytes: &[u8],
) -> Result<(ModuleHeader, Vec<ParsedInstruction<'g>>), DecodeError> {
    let (header, raws) = decode_module(bytes)?;
    let mut ctx = TypeContext::default();
    let mut out = Vec::with_capacity(raws.len());
    for (index, raw) in raws.iter().enumerate() {
        let p =
            parse_instruction(g, &ctx, raw).map_err(|error| DecodeError::Parse { index, error })?;
        ctx.observe(&p);
        out.push(p);
    }
    Ok((header, out))
}

/// Decodes a module into the same instruction form the builder produces.
pub fn decode_instructions(
    g: &Grammar,
    bytes: &[u8],
) -> Result<(ModuleHeader, Vec<Instruction>), DecodeError> {
    let (h, parsed) = parse_module(g, bytes)?;
    Ok((
        h,
        parsed
            .iter()
            .map(ParsedInstruction::to_instruction)
            .collect(),
    ))
}
