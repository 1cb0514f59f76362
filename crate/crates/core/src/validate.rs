//! Structural and capability checks.
//!
//! Diagnostic codes:
//!
//! | code                 | severity | location |
//! |----------------------|----------|----------|
//! | DecodeFailed         | error    | module   |
//! | MissingFunction      | error    | module   |
//! | MissingCapability    | error    | module, or the instruction needing it |
//! | MissingMemoryModel   | error    | module   |
//! | MissingEntryPoint    | error, warning with Linkage | module |
//! | DuplicateMemoryModel | error    | instruction |
//! | DuplicateResultId    | error    | instruction |
//! | BoundTooSmall        | error    | instruction |
//! | InvalidId            | error    | instruction |
//! | UnknownOpcode        | error    | instruction |
//! | MalformedInstruction | error    | instruction |
//! | BuildFailed          | error    | module   |
//!
//! Module-level findings come first, then the rest by instruction index.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::builder::Module;
use crate::codec::{decode_module, ModuleHeader};
use crate::grammar::Grammar;
use crate::op;
use crate::operand::Id;
use crate::parse::{parse_instruction, ParseError, ParsedInstruction, TypeContext, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Location {
    Module,
    Instruction(usize),
    Id(Id),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Module => f.write_str("module"),
            Location::Instruction(i) => write!(f, "inst:{i}"),
            Location::Id(id) => write!(f, "id:{id}"),
        }
    }
}

pub mod codes {
    pub const DECODE_FAILED: &str = "DecodeFailed";
    pub const MISSING_FUNCTION: &str = "MissingFunction";
    pub const MISSING_CAPABILITY: &str = "MissingCapability";
    pub const MISSING_MEMORY_MODEL: &str = "MissingMemoryModel";
    pub const MISSING_ENTRY_POINT: &str = "MissingEntryPoint";
    pub const DUPLICATE_MEMORY_MODEL: &str = "DuplicateMemoryModel";
    pub const DUPLICATE_RESULT_ID: &str = "DuplicateResultId";
    pub const BOUND_TOO_SMALL: &str = "BoundTooSmall";
    pub const INVALID_ID: &str = "InvalidId";
    pub const UNKNOWN_OPCODE: &str = "UnknownOpcode";
    pub const MALFORMED_INSTRUCTION: &str = "MalformedInstruction";
    pub const BUILD_FAILED: &str = "BuildFailed";
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub location: Location,
    pub message: String,
}

impl Diagnostic {
    fn error(code: &'static str, location: Location, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            location,
            message: message.into(),
        }
    }

    fn index(&self) -> Option<usize> {
        match self.location {
            Location::Instruction(i) => Some(i),
            _ => None,
        }
    }
}

/// `severity code location message`
impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.severity, self.code, self.location, self.message
        )
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

/// Validates a serialized module.
pub fn validate_bytes(g: &Grammar, bytes: &[u8]) -> Vec<Diagnostic> {
    let (header, raws) = match decode_module(bytes) {
        Ok(m) => m,
        Err(e) => {
            return vec![Diagnostic::error(
                codes::DECODE_FAILED,
                Location::Module,
                e.to_string(),
            )]
        }
    };
    let mut diags = Vec::new();
    let mut ctx = TypeContext::default();
    let mut parsed = Vec::with_capacity(raws.len());
    for (i, raw) in raws.iter().enumerate() {
        match parse_instruction(g, &ctx, raw) {
            Ok(p) => {
                ctx.observe(&p);
                parsed.push((i, p));
            }
            Err(ParseError::UnknownOpcode(op)) => diags.push(Diagnostic::error(
                codes::UNKNOWN_OPCODE,
                Location::Instruction(i),
                format!("opcode {op} is not in the grammar"),
            )),
            Err(e) => diags.push(Diagnostic::error(
                codes::MALFORMED_INSTRUCTION,
                Location::Instruction(i),
                format!("{}: {e}", g.display_name(raw.opcode)),
            )),
        }
    }
    diags.extend(check_structure(g, &header, &parsed));
    diags.extend(check_capability_closure(g, &parsed));
    order(diags)
}

/// Validates a builder module by serializing it first.
pub fn validate_module(g: &Grammar, m: &Module) -> Vec<Diagnostic> {
    match m.to_bytes() {
        Ok(bytes) => validate_bytes(g, &bytes),
        Err(e) => vec![Diagnostic::error(
            codes::BUILD_FAILED,
            Location::Module,
            e.to_string(),
        )],
    }
}

fn order(mut diags: Vec<Diagnostic>) -> Vec<Diagnostic> {
    diags.sort_by_key(|d| d.index().map_or((0, 0), |i| (1, i)));
    diags
}

fn declared_capabilities(
    g: &Grammar,
    parsed: &[(usize, ParsedInstruction<'_>)],
) -> BTreeSet<String> {
    let values: BTreeSet<u32> = parsed
        .iter()
        .filter(|(_, p)| p.opcode == op::CAPABILITY)
        .filter_map(|(_, p)| match p.operands.first()?.value {
            Value::Enum { value, .. } => Some(value),
            _ => None,
        })
        .collect();
    let Some(kind) = g.kind("Capability") else {
        return BTreeSet::new();
    };
    // Aliases share a value; declaring one declares them all.
    let names = kind
        .enumerants()
        .iter()
        .filter(|e| values.contains(&e.value))
        .map(|e| e.name.as_str());
    let closure = g.capabilities.implied_closure(names);
    let implied_values: BTreeSet<u32> = kind
        .enumerants()
        .iter()
        .filter(|e| closure.contains(&e.name))
        .map(|e| e.value)
        .collect();
    kind.enumerants()
        .iter()
        .filter(|e| implied_values.contains(&e.value))
        .map(|e| e.name.clone())
        .collect()
}

fn check_structure(
    g: &Grammar,
    header: &ModuleHeader,
    parsed: &[(usize, ParsedInstruction<'_>)],
) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let count = |opcode: u16| parsed.iter().filter(|(_, p)| p.opcode == opcode).count();

    if count(op::FUNCTION) == 0 {
        diags.push(Diagnostic::error(
            codes::MISSING_FUNCTION,
            Location::Module,
            "the module declares no OpFunction",
        ));
    }
    if count(op::CAPABILITY) == 0 {
        diags.push(Diagnostic::error(
            codes::MISSING_CAPABILITY,
            Location::Module,
            "the module declares no OpCapability",
        ));
    }
    let models: Vec<usize> = parsed
        .iter()
        .filter(|(_, p)| p.opcode == op::MEMORY_MODEL)
        .map(|(i, _)| *i)
        .collect();
    if models.is_empty() {
        diags.push(Diagnostic::error(
            codes::MISSING_MEMORY_MODEL,
            Location::Module,
            "the module has no OpMemoryModel",
        ));
    }
    for i in models.iter().skip(1) {
        diags.push(Diagnostic::error(
            codes::DUPLICATE_MEMORY_MODEL,
            Location::Instruction(*i),
            format!(
                "second OpMemoryModel; the first is instruction {}",
                models[0]
            ),
        ));
    }
    if count(op::ENTRY_POINT) == 0 {
        let library = declared_capabilities(g, parsed).contains("Linkage");
        diags.push(Diagnostic {
            severity: if library {
                Severity::Warning
            } else {
                Severity::Error
            },
            code: codes::MISSING_ENTRY_POINT,
            location: Location::Module,
            message: "the module has no OpEntryPoint".into(),
        });
    }

    let mut defined: HashMap<Id, usize> = HashMap::new();
    let mut too_big: Option<(usize, Id)> = None;
    for (i, p) in parsed {
        if let Some(r) = p.result {
            if let Some(first) = defined.insert(r, *i) {
                diags.push(Diagnostic::error(
                    codes::DUPLICATE_RESULT_ID,
                    Location::Instruction(*i),
                    format!("{r} is already defined by instruction {first}"),
                ));
            }
        }
        for id in p.result.into_iter().chain(p.used_ids()) {
            if id.0 == 0 {
                diags.push(Diagnostic::error(
                    codes::INVALID_ID,
                    Location::Instruction(*i),
                    format!("{}: id 0 is not a valid id", p.def.name),
                ));
            } else if id.0 >= header.bound && too_big.map_or(true, |(_, m)| id.0 > m.0) {
                too_big = Some((*i, id));
            }
        }
    }
    if let Some((i, id)) = too_big {
        diags.push(Diagnostic::error(
            codes::BOUND_TOO_SMALL,
            Location::Instruction(i),
            format!("header bound {} does not exceed {id}", header.bound),
        ));
    }
    diags
}

/// Checks that every instruction, enumerant operand and scalar width is
/// enabled by the declared capabilities or ones they imply. A grammar list
/// of several capabilities is satisfied by any one of them.
pub fn check_capability_closure(
    g: &Grammar,
    parsed: &[(usize, ParsedInstruction<'_>)],
) -> Vec<Diagnostic> {
    let enabled = declared_capabilities(g, parsed);
    let mut diags = Vec::new();
    let mut need = |i: usize, what: String, caps: &[String]| {
        if !caps.is_empty() && !caps.iter().any(|c| enabled.contains(c)) {
            diags.push(Diagnostic::error(
                codes::MISSING_CAPABILITY,
                Location::Instruction(i),
                format!("{what} requires {}", caps.join(" or ")),
            ));
        }
    };
    for (i, p) in parsed {
        let i = *i;
        need(i, p.def.name.clone(), &p.def.capabilities);
        if p.opcode == op::CAPABILITY {
            continue;
        }
        for o in &p.operands {
            match o.value {
                Value::Enum { kind, value } => {
                    if let Some(e) = kind.enumerant_by_value(value) {
                        need(i, format!("{} {}", kind.kind, e.name), &e.capabilities);
                    }
                }
                Value::Mask { kind, value } => {
                    for bit in (0..32).map(|b| 1u32 << b).filter(|b| value & b != 0) {
                        if let Some(e) = kind.enumerant_by_value(bit) {
                            need(i, format!("{} {}", kind.kind, e.name), &e.capabilities);
                        }
                    }
                }
                _ => {}
            }
        }
        let width = match p.operands.first().map(|o| &o.value) {
            Some(Value::Literal(w)) => *w,
            _ => continue,
        };
        let cap = match (p.opcode, width) {
            (op::TYPE_INT, 64) => "Int64",
            (op::TYPE_INT, 16) => "Int16",
            (op::TYPE_INT, 8) => "Int8",
            (op::TYPE_FLOAT, 64) => "Float64",
            (op::TYPE_FLOAT, 16) => "Float16",
            _ => continue,
        };
        need(
            i,
            format!("{} width {width}", p.def.name),
            &[cap.to_string()],
        );
    }
    diags
}
