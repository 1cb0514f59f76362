//! In-memory model of the Khronos machine-readable SPIR-V grammar.
//!
//! Two layouts are understood: the core grammar (`spirv.core.grammar.json`)
//! and extended instruction set grammars (`extinst.*.grammar.json`). Unknown
//! JSON fields are ignored so newer grammar revisions keep loading.

use std::collections::HashMap;
use std::fmt;

use serde::Deserialize;

use crate::GrammarError;

/// The SPIR-V magic number, used when a grammar file omits `magic_number`.
pub const SPIRV_MAGIC: u32 = 0x0723_0203;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Single,
    Optional,
    Variadic,
}

impl Quantifier {
    fn parse(raw: Option<&str>) -> Result<Self, GrammarError> {
        match raw {
            None | Some("") => Ok(Quantifier::Single),
            Some("?") => Ok(Quantifier::Optional),
            Some("*") => Ok(Quantifier::Variadic),
            Some(other) => Err(GrammarError::Schema(format!(
                "unknown quantifier `{other}`"
            ))),
        }
    }

    /// The grammar file spelling: `""`, `"?"` or `"*"`.
    pub fn as_str(self) -> &'static str {
        match self {
            Quantifier::Single => "",
            Quantifier::Optional => "?",
            Quantifier::Variadic => "*",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperandSlot {
    pub kind: String,
    pub name: Option<String>,
    pub quantifier: Quantifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Id,
    BitEnum,
    ValueEnum,
    Literal,
    Composite,
}

impl Category {
    fn parse(raw: &str) -> Result<Self, GrammarError> {
        Ok(match raw {
            "Id" => Category::Id,
            "BitEnum" => Category::BitEnum,
            "ValueEnum" => Category::ValueEnum,
            "Literal" => Category::Literal,
            "Composite" => Category::Composite,
            other => {
                return Err(GrammarError::Schema(format!(
                    "unknown operand kind category `{other}`"
                )))
            }
        })
    }

    pub fn is_enum(self) -> bool {
        matches!(self, Category::BitEnum | Category::ValueEnum)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::Id => "Id",
            Category::BitEnum => "BitEnum",
            Category::ValueEnum => "ValueEnum",
            Category::Literal => "Literal",
            Category::Composite => "Composite",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerantDef {
    pub name: String,
    pub value: u32,
    pub capabilities: Vec<String>,
    pub parameters: Vec<OperandSlot>,
    pub extensions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperandKindDef {
    pub category: Category,
    pub kind: String,
    /// Present iff the category is `BitEnum` or `ValueEnum`.
    pub enumerants: Option<Vec<EnumerantDef>>,
    /// Present iff the category is `Composite`.
    pub bases: Option<Vec<String>>,
    by_name: HashMap<String, usize>,
    by_value: HashMap<u32, usize>,
}

impl OperandKindDef {
    pub fn enumerants(&self) -> &[EnumerantDef] {
        self.enumerants.as_deref().unwrap_or(&[])
    }

    pub fn enumerant_by_name(&self, name: &str) -> Option<&EnumerantDef> {
        self.by_name.get(name).map(|&i| &self.enumerants()[i])
    }

    /// Value to enumerant; aliases resolve to the first occurrence in file order.
    pub fn enumerant_by_value(&self, value: u32) -> Option<&EnumerantDef> {
        self.by_value.get(&value).map(|&i| &self.enumerants()[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionDef {
    pub name: String,
    pub opcode: u16,
    /// The grammar's `class` attribute. Absent in pre-unified grammar files.
    pub class: Option<String>,
    pub operands: Vec<OperandSlot>,
    pub capabilities: Vec<String>,
    pub extensions: Vec<String>,
}

impl InstructionDef {
    pub fn has_result(&self) -> bool {
        self.operands.iter().any(|o| o.kind == "IdResult")
    }

    pub fn has_result_type(&self) -> bool {
        self.operands.iter().any(|o| o.kind == "IdResultType")
    }
}

/// Lookup key for [`GrammarSpec::lookup_instruction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstructionKey<'a> {
    Name(&'a str),
    Opcode(u16),
}

impl<'a> From<&'a str> for InstructionKey<'a> {
    fn from(name: &'a str) -> Self {
        InstructionKey::Name(name)
    }
}

impl From<u16> for InstructionKey<'_> {
    fn from(opcode: u16) -> Self {
        InstructionKey::Opcode(opcode)
    }
}

/// A loaded core grammar. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarSpec {
    pub magic_number: u32,
    pub major_version: u32,
    pub minor_version: u32,
    pub revision: u32,
    instructions: Vec<InstructionDef>,
    operand_kinds: Vec<OperandKindDef>,
    by_name: HashMap<String, usize>,
    by_opcode: HashMap<u16, usize>,
    kinds_by_name: HashMap<String, usize>,
}

impl GrammarSpec {
    pub fn instructions(&self) -> &[InstructionDef] {
        &self.instructions
    }

    pub fn operand_kinds(&self) -> &[OperandKindDef] {
        &self.operand_kinds
    }

    pub fn instruction_by_name(&self, name: &str) -> Option<&InstructionDef> {
        self.by_name.get(name).map(|&i| &self.instructions[i])
    }

    /// Opcode lookup. When several entries share an opcode (vendor aliases
    /// such as `OpDecorateStringGOOGLE`), the first in file order wins.
    pub fn instruction_by_opcode(&self, opcode: u16) -> Option<&InstructionDef> {
        self.by_opcode.get(&opcode).map(|&i| &self.instructions[i])
    }

    pub fn lookup_instruction<'k>(
        &self,
        key: impl Into<InstructionKey<'k>>,
    ) -> Result<&InstructionDef, GrammarError> {
        match key.into() {
            InstructionKey::Name(name) => {
                self.instruction_by_name(name)
                    .ok_or_else(|| GrammarError::NotFound {
                        what: "instruction",
                        key: name.to_string(),
                    })
            }
            InstructionKey::Opcode(op) => {
                self.instruction_by_opcode(op)
                    .ok_or_else(|| GrammarError::NotFound {
                        what: "opcode",
                        key: op.to_string(),
                    })
            }
        }
    }

    pub fn operand_kind(&self, kind: &str) -> Option<&OperandKindDef> {
        self.kinds_by_name
            .get(kind)
            .map(|&i| &self.operand_kinds[i])
    }

    pub fn version_string(&self) -> String {
        format!(
            "{}.{} rev {}",
            self.major_version, self.minor_version, self.revision
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtInstDef {
    pub name: String,
    pub opcode: u32,
    pub operands: Vec<OperandSlot>,
    pub capabilities: Vec<String>,
}

/// An extended instruction set grammar such as `OpenCL.std`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtInstGrammar {
    pub version: u32,
    pub revision: u32,
    instructions: Vec<ExtInstDef>,
    by_name: HashMap<String, usize>,
    by_number: HashMap<u32, usize>,
}

impl ExtInstGrammar {
    pub fn instructions(&self) -> &[ExtInstDef] {
        &self.instructions
    }

    pub fn by_name(&self, name: &str) -> Result<&ExtInstDef, GrammarError> {
        self.by_name
            .get(name)
            .map(|&i| &self.instructions[i])
            .ok_or_else(|| GrammarError::NotFound {
                what: "extended instruction",
                key: name.to_string(),
            })
    }

    pub fn by_number(&self, number: u32) -> Result<&ExtInstDef, GrammarError> {
        self.by_number
            .get(&number)
            .map(|&i| &self.instructions[i])
            .ok_or_else(|| GrammarError::NotFound {
                what: "extended instruction",
                key: number.to_string(),
            })
    }
}

// Serde mirror of the file layout. Field names follow the JSON.

#[derive(Deserialize)]
struct RawCore {
    magic_number: Option<String>,
    #[serde(default)]
    major_version: u32,
    #[serde(default)]
    minor_version: u32,
    #[serde(default)]
    revision: u32,
    instructions: Vec<RawInstruction>,
    operand_kinds: Vec<RawKind>,
}

#[derive(Deserialize)]
struct RawInstruction {
    opname: String,
    opcode: u32,
    class: Option<String>,
    #[serde(default)]
    operands: Vec<RawOperand>,
    #[serde(default)]
    capabilities: Vec<String>,
    #[serde(default)]
    extensions: Vec<String>,
}

#[derive(Deserialize)]
struct RawOperand {
    kind: String,
    name: Option<String>,
    quantifier: Option<String>,
}

#[derive(Deserialize)]
struct RawKind {
    category: String,
    kind: String,
    enumerants: Option<Vec<RawEnumerant>>,
    bases: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct RawEnumerant {
    enumerant: String,
    value: serde_json::Value,
    #[serde(default)]
    capabilities: Vec<String>,
    #[serde(default)]
    parameters: Vec<RawOperand>,
    #[serde(default)]
    extensions: Vec<String>,
}

#[derive(Deserialize)]
struct RawExtGrammar {
    #[serde(default)]
    version: u32,
    #[serde(default)]
    revision: u32,
    instructions: Vec<RawExtInstruction>,
}

#[derive(Deserialize)]
struct RawExtInstruction {
    opname: String,
    opcode: u32,
    #[serde(default)]
    operands: Vec<RawOperand>,
    #[serde(default)]
    capabilities: Vec<String>,
}

fn json_error(e: serde_json::Error) -> GrammarError {
    use serde_json::error::Category as C;
    match e.classify() {
        C::Data => GrammarError::Schema(e.to_string()),
        _ => GrammarError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
    }
}

fn parse_number(raw: &str) -> Option<u32> {
    match raw.strip_prefix("0x").or_else(|| raw.strip_prefix("0X")) {
        Some(hex) => u32::from_str_radix(hex, 16).ok(),
        None => raw.parse().ok(),
    }
}

fn enumerant_value(v: &serde_json::Value, name: &str) -> Result<u32, GrammarError> {
    let parsed = match v {
        serde_json::Value::String(s) => parse_number(s),
        serde_json::Value::Number(n) => n.as_u64().and_then(|n| u32::try_from(n).ok()),
        _ => None,
    };
    parsed.ok_or_else(|| GrammarError::Schema(format!("bad value {v} for enumerant `{name}`")))
}

fn convert_slots(raw: Vec<RawOperand>, owner: &str) -> Result<Vec<OperandSlot>, GrammarError> {
    let slots = raw
        .into_iter()
        .map(|o| {
            Ok(OperandSlot {
                quantifier: Quantifier::parse(o.quantifier.as_deref())?,
                kind: o.kind,
                name: o.name,
            })
        })
        .collect::<Result<Vec<_>, GrammarError>>()?;
    // `?` may only be followed by `?` or `*`; nothing follows `*`.
    let mut tail = Quantifier::Single;
    for slot in &slots {
        let bad = match tail {
            Quantifier::Variadic => true,
            Quantifier::Optional => slot.quantifier == Quantifier::Single,
            Quantifier::Single => false,
        };
        if bad {
            return Err(GrammarError::Schema(format!(
                "`{owner}`: operand `{}` follows an optional or variadic operand",
                slot.kind
            )));
        }
        if slot.quantifier != Quantifier::Single {
            tail = slot.quantifier;
        }
    }
    Ok(slots)
}

fn convert_kind(raw: RawKind) -> Result<OperandKindDef, GrammarError> {
    let category = Category::parse(&raw.category)?;
    if category.is_enum() != raw.enumerants.is_some() {
        return Err(GrammarError::Schema(format!(
            "operand kind `{}`: enumerants must be present exactly for enum categories",
            raw.kind
        )));
    }
    if (category == Category::Composite) != raw.bases.is_some() {
        return Err(GrammarError::Schema(format!(
            "operand kind `{}`: bases must be present exactly for composites",
            raw.kind
        )));
    }
    let enumerants = match raw.enumerants {
        None => None,
        Some(list) => Some(
            list.into_iter()
                .map(|e| {
                    Ok(EnumerantDef {
                        value: enumerant_value(&e.value, &e.enumerant)?,
                        parameters: convert_slots(e.parameters, &e.enumerant)?,
                        name: e.enumerant,
                        capabilities: e.capabilities,
                        extensions: e.extensions,
                    })
                })
                .collect::<Result<Vec<_>, GrammarError>>()?,
        ),
    };
    let mut by_name = HashMap::new();
    let mut by_value = HashMap::new();
    for (i, e) in enumerants.iter().flatten().enumerate() {
        if by_name.insert(e.name.clone(), i).is_some() {
            return Err(GrammarError::Schema(format!(
                "operand kind `{}`: duplicate enumerant `{}`",
                raw.kind, e.name
            )));
        }
        by_value.entry(e.value).or_insert(i);
    }
    Ok(OperandKindDef {
        category,
        kind: raw.kind,
        enumerants,
        bases: raw.bases,
        by_name,
        by_value,
    })
}

/// Parses a core grammar file.
pub fn load_core_grammar(json: &str) -> Result<GrammarSpec, GrammarError> {
    let raw: RawCore = serde_json::from_str(json).map_err(json_error)?;
    let magic_number = match raw.magic_number.as_deref() {
        None => SPIRV_MAGIC,
        Some(s) => parse_number(s)
            .ok_or_else(|| GrammarError::Schema(format!("bad magic_number `{s}`")))?,
    };

    let operand_kinds = raw
        .operand_kinds
        .into_iter()
        .map(convert_kind)
        .collect::<Result<Vec<_>, _>>()?;
    let mut kinds_by_name = HashMap::new();
    for (i, k) in operand_kinds.iter().enumerate() {
        if kinds_by_name.insert(k.kind.clone(), i).is_some() {
            return Err(GrammarError::Schema(format!(
                "duplicate operand kind `{}`",
                k.kind
            )));
        }
    }

    let mut instructions = Vec::with_capacity(raw.instructions.len());
    for ri in raw.instructions {
        let opcode = u16::try_from(ri.opcode).map_err(|_| {
            GrammarError::Schema(format!(
                "`{}`: opcode {} exceeds 16 bits",
                ri.opname, ri.opcode
            ))
        })?;
        instructions.push(InstructionDef {
            operands: convert_slots(ri.operands, &ri.opname)?,
            name: ri.opname,
            opcode,
            class: ri.class,
            capabilities: ri.capabilities,
            extensions: ri.extensions,
        });
    }

    let mut by_name = HashMap::new();
    let mut by_opcode = HashMap::new();
    for (i, inst) in instructions.iter().enumerate() {
        if by_name.insert(inst.name.clone(), i).is_some() {
            return Err(GrammarError::Schema(format!(
                "duplicate instruction `{}`",
                inst.name
            )));
        }
        by_opcode.entry(inst.opcode).or_insert(i);
    }

    // No dangling operand kinds.
    let slots = instructions.iter().flat_map(|i| i.operands.iter()).chain(
        operand_kinds
            .iter()
            .flat_map(|k| k.enumerants().iter())
            .flat_map(|e| e.parameters.iter()),
    );
    for slot in slots {
        if !kinds_by_name.contains_key(&slot.kind) {
            return Err(GrammarError::Schema(format!(
                "operand kind `{}` is referenced but not defined",
                slot.kind
            )));
        }
    }
    for k in &operand_kinds {
        for base in k.bases.iter().flatten() {
            if !kinds_by_name.contains_key(base) {
                return Err(GrammarError::Schema(format!(
                    "composite `{}` has undefined base `{base}`",
                    k.kind
                )));
            }
        }
    }

    Ok(GrammarSpec {
        magic_number,
        major_version: raw.major_version,
        minor_version: raw.minor_version,
        revision: raw.revision,
        instructions,
        operand_kinds,
        by_name,
        by_opcode,
        kinds_by_name,
    })
}

/// Parses an extended instruction set grammar file.
pub fn load_extended_grammar(json: &str) -> Result<ExtInstGrammar, GrammarError> {
    let raw: RawExtGrammar = serde_json::from_str(json).map_err(json_error)?;
    let mut instructions = Vec::with_capacity(raw.instructions.len());
    let mut by_name = HashMap::new();
    let mut by_number = HashMap::new();
    for (i, ri) in raw.instructions.into_iter().enumerate() {
        if by_name.insert(ri.opname.clone(), i).is_some() {
            return Err(GrammarError::Schema(format!(
                "duplicate extended instruction `{}`",
                ri.opname
            )));
        }
        by_number.entry(ri.opcode).or_insert(i);
        instructions.push(ExtInstDef {
            operands: convert_slots(ri.operands, &ri.opname)?,
            name: ri.opname,
            opcode: ri.opcode,
            capabilities: ri.capabilities,
        });
    }
    Ok(ExtInstGrammar {
        version: raw.version,
        revision: raw.revision,
        instructions,
        by_name,
        by_number,
    })
}
