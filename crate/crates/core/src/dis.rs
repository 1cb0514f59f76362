//! Binary to text, in the Khronos disassembly dialect.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use crate::codec::{decode_module, CodecError, ModuleHeader, RawInstruction};
use crate::grammar::Grammar;
use crate::layout::{Group, Placement};
use crate::op;
use crate::operand::Id;
use crate::parse::{parse_instruction, NumType, ParseError, ParsedInstruction, TypeContext, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisassemblerOptions {
    /// ANSI colours. Presentation only.
    pub highlight: bool,
    /// Print ids named by `OpName` as `%name`.
    pub inline_names: bool,
    /// Do not right-align the result column.
    pub no_indent: bool,
    /// Blank line between the mode-setting, debug, annotation, global and
    /// function sections.
    pub group: bool,
    pub no_header: bool,
    /// Fail on unknown opcodes instead of printing them raw.
    pub strict: bool,
}

impl Default for DisassemblerOptions {
    fn default() -> Self {
        DisassemblerOptions {
            highlight: false,
            inline_names: true,
            no_indent: false,
            group: false,
            no_header: false,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DisassembleError {
    #[error(transparent)]
    Decode(#[from] CodecError),
    #[error("instruction {index}: {error}")]
    Parse { index: usize, error: ParseError },
    #[error("write failed: {0}")]
    Io(String),
}

const RESET: &str = "\x1b[0m";
const C_COMMENT: &str = "\x1b[90m";
const C_OPCODE: &str = "\x1b[1;34m";
const C_ID: &str = "\x1b[33m";
const C_ENUM: &str = "\x1b[36m";
const C_LITERAL: &str = "\x1b[32m";

enum Line<'g> {
    Parsed(ParsedInstruction<'g>),
    Raw(RawInstruction),
}

/// Id to display-name map.
#[derive(Debug, Clone, Default)]
pub struct NameMap {
    names: HashMap<Id, String>,
}

impl NameMap {
    pub fn get(&self, id: Id) -> Option<&str> {
        self.names.get(&id).map(String::as_str)
    }

    pub fn render(&self, id: Id) -> String {
        match self.get(id) {
            Some(n) => format!("%{n}"),
            None => format!("%{}", id.0),
        }
    }
}

/// Non-identifier characters become `_`; a leading digit gets a `_`.
pub fn friendly_name(raw: &str) -> Option<String> {
    if raw.is_empty() {
        return None;
    }
    let mut s: String = raw
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.starts_with(|c: char| c.is_ascii_digit()) {
        s.insert(0, '_');
    }
    Some(s)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// The assembler pins `%<number>` ids and hands every other name the
/// smallest free id in order of first mention. A friendly name is kept
/// only when that rule gives back the id it stands for.
fn settle_names(mention_order: &[Id], mut named: HashMap<Id, String>) -> HashMap<Id, String> {
    loop {
        let reserved: HashSet<u32> = mention_order
            .iter()
            .filter(|id| !named.contains_key(id))
            .map(|id| id.0)
            .collect();
        let mut next = 1u32;
        let mut mismatch = None;
        for id in mention_order.iter().filter(|id| named.contains_key(id)) {
            while reserved.contains(&next) {
                next += 1;
            }
            if next != id.0 {
                mismatch = Some(*id);
                break;
            }
            next += 1;
        }
        match mismatch {
            Some(id) => {
                named.remove(&id);
            }
            None => return named,
        }
    }
}

fn build_names(lines: &[Line<'_>]) -> NameMap {
    let mut named: HashMap<Id, String> = HashMap::new();
    let mut taken: HashSet<String> = HashSet::new();
    for line in lines {
        let Line::Parsed(p) = line else { continue };
        if p.opcode != op::NAME {
            continue;
        }
        let (Some(Value::Id(target)), Some(Value::String(s))) = (
            p.operands.first().map(|o| &o.value),
            p.operands.get(1).map(|o| &o.value),
        ) else {
            continue;
        };
        if named.contains_key(target) {
            continue;
        }
        let Some(base) = friendly_name(s) else {
            continue;
        };
        let mut candidate = base.clone();
        let mut n = 0;
        while taken.contains(&candidate) {
            candidate = format!("{base}_{n}");
            n += 1;
        }
        taken.insert(candidate.clone());
        named.insert(*target, candidate);
    }
    if named.is_empty() {
        return NameMap::default();
    }

    let mut seen = HashSet::new();
    let mut order = Vec::new();
    for line in lines {
        let Line::Parsed(p) = line else { continue };
        for id in p.result.into_iter().chain(p.used_ids()) {
            if seen.insert(id) {
                order.push(id);
            }
        }
    }
    NameMap {
        names: settle_names(&order, named),
    }
}

struct Painter {
    on: bool,
}

impl Painter {
    fn paint(&self, colour: &str, text: &str) -> String {
        if self.on {
            format!("{colour}{text}{RESET}")
        } else {
            text.to_string()
        }
    }
}

fn sign_extend(v: u64, width: u32) -> i64 {
    let shift = 64 - width;
    ((v << shift) as i64) >> shift
}

fn render_number(bits: u64, ty: NumType) -> String {
    if ty.float {
        return match ty.width {
            32 => {
                let f = f32::from_bits(bits as u32);
                if f.is_finite() {
                    format!("{f}")
                } else {
                    format!("0x{:08x}", bits as u32)
                }
            }
            64 => {
                let f = f64::from_bits(bits);
                if f.is_finite() {
                    format!("{f}")
                } else {
                    format!("0x{bits:016x}")
                }
            }
            _ => format!("0x{bits:x}"),
        };
    }
    if ty.width >= 64 {
        return if ty.signed {
            (bits as i64).to_string()
        } else {
            bits.to_string()
        };
    }
    let word = bits as u32;
    if ty.width == 0 {
        return format!("0x{word:x}");
    }
    let low = u64::from(word) & ((1u64 << ty.width) - 1);
    if ty.signed {
        let v = sign_extend(low, ty.width);
        if v as i32 as u32 == word {
            return v.to_string();
        }
    } else if u64::from(word) == low {
        return low.to_string();
    }
    format!("0x{word:x}")
}

fn render_mask(kind: &spvkit_grammar::OperandKindDef, value: u32) -> String {
    if value == 0 {
        return kind
            .enumerant_by_value(0)
            .map_or_else(|| "0".to_string(), |e| e.name.clone());
    }
    let mut parts = Vec::new();
    let mut unknown = 0u32;
    for bit in (0..32).map(|b| 1u32 << b).filter(|b| value & b != 0) {
        match kind.enumerant_by_value(bit) {
            Some(e) => parts.push(e.name.clone()),
            None => unknown |= bit,
        }
    }
    if unknown != 0 {
        parts.push(format!("0x{unknown:x}"));
    }
    parts.join("|")
}

fn render_operand(g: &Grammar, v: &Value<'_>, names: &NameMap, p: &Painter) -> String {
    match v {
        Value::Id(id) => p.paint(C_ID, &names.render(*id)),
        Value::Literal(n) => p.paint(C_LITERAL, &n.to_string()),
        Value::Number { bits, ty } => p.paint(C_LITERAL, &render_number(*bits, *ty)),
        Value::String(s) => p.paint(C_LITERAL, &quote(s)),
        Value::Enum { kind, value } => {
            let text = kind
                .enumerant_by_value(*value)
                .map_or_else(|| value.to_string(), |e| e.name.clone());
            p.paint(C_ENUM, &text)
        }
        Value::Mask { kind, value } => p.paint(C_ENUM, &render_mask(kind, *value)),
        Value::ExtInst { number, name } => p.paint(
            C_ENUM,
            &name.map_or_else(|| number.to_string(), str::to_string),
        ),
        Value::SpecOp { opcode } => {
            let text = g.name(*opcode).map_or_else(
                || opcode.to_string(),
                |n| n.trim_start_matches("Op").to_string(),
            );
            p.paint(C_ENUM, &text)
        }
    }
}

/// Renders everything after the `%result =` column.
pub fn format_instruction(
    g: &Grammar,
    inst: &ParsedInstruction<'_>,
    names: &NameMap,
    highlight: bool,
) -> String {
    let p = Painter { on: highlight };
    let mut out = p.paint(C_OPCODE, &inst.def.name);
    if let Some(rt) = inst.result_type {
        out.push(' ');
        out.push_str(&p.paint(C_ID, &names.render(rt)));
    }
    for o in &inst.operands {
        out.push(' ');
        out.push_str(&render_operand(g, &o.value, names, &p));
    }
    out
}

fn format_raw(raw: &RawInstruction, p: &Painter) -> String {
    let mut out = p.paint(C_OPCODE, &format!("OpUnknown({})", raw.opcode));
    for w in &raw.operands {
        out.push(' ');
        out.push_str(&p.paint(C_LITERAL, &w.to_string()));
    }
    out
}

fn group_of(g: &Grammar, opcode: u16, in_functions: bool) -> Group {
    if in_functions {
        return Group::Functions;
    }
    match g.placement(opcode) {
        Placement::Module(s) => s.group(),
        Placement::Anywhere | Placement::Undef | Placement::Variable => Group::Globals,
        _ => Group::Functions,
    }
}

pub fn header_lines(h: &ModuleHeader) -> Vec<String> {
    vec![
        "; SPIR-V".to_string(),
        format!("; Version: {}.{}", h.major, h.minor),
        format!("; Generator: 0x{:08x}", h.generator),
        format!("; Bound: {}", h.bound),
        format!("; Schema: {}", h.schema),
    ]
}

/// Disassembles a module into text, one line per instruction.
pub fn disassemble(
    g: &Grammar,
    bytes: &[u8],
    opts: &DisassemblerOptions,
) -> Result<String, DisassembleError> {
    let (header, raws) = decode_module(bytes)?;
    let mut ctx = TypeContext::default();
    let mut lines = Vec::with_capacity(raws.len());
    for (index, raw) in raws.into_iter().enumerate() {
        match parse_instruction(g, &ctx, &raw) {
            Ok(p) => {
                ctx.observe(&p);
                lines.push(Line::Parsed(p));
            }
            Err(ParseError::UnknownOpcode(_)) if !opts.strict => lines.push(Line::Raw(raw)),
            Err(error) => return Err(DisassembleError::Parse { index, error }),
        }
    }

    let names = if opts.inline_names {
        build_names(&lines)
    } else {
        NameMap::default()
    };
    let painter = Painter { on: opts.highlight };

    let rendered: Vec<(Option<String>, String, u16)> = lines
        .iter()
        .map(|l| match l {
            Line::Parsed(p) => (
                p.result.map(|r| names.render(r)),
                format_instruction(g, p, &names, opts.highlight),
                p.opcode,
            ),
            Line::Raw(r) => (None, format_raw(r, &painter), r.opcode),
        })
        .collect();
    let width = if opts.no_indent {
        0
    } else {
        rendered
            .iter()
            .filter_map(|(r, _, _)| r.as_ref().map(String::len))
            .max()
            .unwrap_or(0)
    };

    let mut out = String::new();
    if !opts.no_header {
        for l in header_lines(&header) {
            out.push_str(&painter.paint(C_COMMENT, &l));
            out.push('\n');
        }
    }
    let mut in_functions = false;
    let mut last_group = None;
    for (result, body, opcode) in &rendered {
        in_functions |= *opcode == op::FUNCTION;
        let group = group_of(g, *opcode, in_functions);
        if opts.group && last_group.is_some_and(|lg| lg != group) {
            out.push('\n');
        }
        last_group = Some(group);
        match result {
            Some(r) => {
                let pad = width.saturating_sub(r.len());
                out.push_str(&" ".repeat(pad));
                out.push_str(&painter.paint(C_ID, r));
                out.push_str(" = ");
            }
            None if width > 0 => out.push_str(&" ".repeat(width + 3)),
            None => {}
        }
        out.push_str(body);
        out.push('\n');
    }
    Ok(out)
}

/// Writes the disassembly to `sink` and returns the number of lines.
pub fn disassemble_to(
    g: &Grammar,
    bytes: &[u8],
    opts: &DisassemblerOptions,
    sink: &mut impl Write,
) -> Result<usize, DisassembleError> {
    let text = disassemble(g, bytes, opts)?;
    sink.write_all(text.as_bytes())
        .map_err(|e| DisassembleError::Io(e.to_string()))?;
    Ok(text.lines().count())
}

/// Removes ANSI escape sequences.
pub fn strip_ansi(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\x1b' {
            for c in chars.by_ref() {
                if c.is_ascii_alphabetic() {
                    break;
                }
            }
        } else {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_module, RawInstruction};

    fn module(insts: &[RawInstruction], bound: u32) -> Vec<u8> {
        encode_module(&ModuleHeader::new(1, 2, 32 << 16, bound, 0), insts).unwrap()
    }

    fn quiet() -> DisassemblerOptions {
        DisassemblerOptions {
            no_header: true,
            ..Default::default()
        }
    }

    #[test]
    fn capability_and_nop() {
        let bin = module(
            &[
                RawInstruction::new(17, vec![6]),
                RawInstruction::new(0, vec![]),
            ],
            1,
        );
        let text = disassemble(Grammar::unified(), &bin, &quiet()).unwrap();
        assert_eq!(text, "OpCapability Kernel\nOpNop\n");
    }

    #[test]
    fn header_toggle() {
        let bin = module(&[RawInstruction::new(17, vec![6])], 1);
        let full = disassemble(Grammar::unified(), &bin, &Default::default()).unwrap();
        let bare = disassemble(Grammar::unified(), &bin, &quiet()).unwrap();
        assert_eq!(
            full,
            "; SPIR-V\n; Version: 1.2\n; Generator: 0x00200000\n; Bound: 1\n; Schema: 0\nOpCapability Kernel\n"
        );
        assert!(full.ends_with(&bare));
    }

    #[test]
    fn function_control_mask() {
        // %3 = OpFunction %1 Inline|DontInline %2
        let bin = module(&[RawInstruction::new(54, vec![1, 3, 0x3, 2])], 4);
        let text = disassemble(Grammar::unified(), &bin, &quiet()).unwrap();
        assert_eq!(text, "%3 = OpFunction %1 Inline|DontInline %2\n");
    }

    #[test]
    fn unknown_opcodes() {
        let bin = module(&[RawInstruction::new(0x7FFF, vec![1, 2])], 1);
        let text = disassemble(Grammar::unified(), &bin, &quiet()).unwrap();
        assert_eq!(text, "OpUnknown(32767) 1 2\n");
        let strict = DisassemblerOptions {
            strict: true,
            ..quiet()
        };
        assert!(matches!(
            disassemble(Grammar::unified(), &bin, &strict),
            Err(DisassembleError::Parse {
                index: 0,
                error: ParseError::UnknownOpcode(32767)
            })
        ));
    }

    #[test]
    fn names_are_inlined_and_sanitized() {
        let name = |id, s: &str| {
            let mut ops = vec![id];
            ops.extend(crate::codec::encode_string(s).unwrap());
            RawInstruction::new(5, ops)
        };
        let bin = module(
            &[
                name(1, "stride"),
                name(2, "my var"),
                RawInstruction::new(19, vec![1]),
                RawInstruction::new(20, vec![2]),
            ],
            3,
        );
        let text = disassemble(Grammar::unified(), &bin, &quiet()).unwrap();
        assert_eq!(
            text,
            "          OpName %stride \"stride\"\n          OpName %my_var \"my var\"\n%stride = OpTypeVoid\n%my_var = OpTypeBool\n"
        );
        let plain = DisassemblerOptions {
            inline_names: false,
            no_indent: true,
            ..quiet()
        };
        let text = disassemble(Grammar::unified(), &bin, &plain).unwrap();
        assert!(text.contains("%1 = OpTypeVoid\n"));
    }

    #[test]
    fn names_that_would_not_round_trip_stay_numeric() {
        let name = |id, s: &str| {
            let mut ops = vec![id];
            ops.extend(crate::codec::encode_string(s).unwrap());
            RawInstruction::new(5, ops)
        };
        // %2 is named first, so the assembler would hand "b" id 1.
        let bin = module(
            &[
                name(2, "b"),
                name(1, "a"),
                RawInstruction::new(19, vec![1]),
                RawInstruction::new(20, vec![2]),
            ],
            3,
        );
        let text = disassemble(
            Grammar::unified(),
            &bin,
            &DisassemblerOptions {
                no_indent: true,
                ..quiet()
            },
        )
        .unwrap();
        assert_eq!(
            text,
            "OpName %2 \"b\"\nOpName %a \"a\"\n%a = OpTypeVoid\n%2 = OpTypeBool\n"
        );
    }

    #[test]
    fn highlight_only_adds_escapes() {
        let bin = module(
            &[
                RawInstruction::new(17, vec![6]),
                RawInstruction::new(19, vec![1]),
            ],
            2,
        );
        let plain = disassemble(Grammar::unified(), &bin, &Default::default()).unwrap();
        let lit = DisassemblerOptions {
            highlight: true,
            ..Default::default()
        };
        let colour = disassemble(Grammar::unified(), &bin, &lit).unwrap();
        assert_ne!(plain, colour);
        assert_eq!(strip_ansi(&colour), plain);
    }

    #[test]
    fn numbers() {
        let int = |w, s| NumType {
            width: w,
            signed: s,
            float: false,
        };
        assert_eq!(render_number(0xFFFF_FFFF, int(32, true)), "-1");
        assert_eq!(render_number(0xFFFF_FFFF, int(16, true)), "-1");
        assert_eq!(render_number(0x0000_FFFF, int(16, true)), "0xffff");
        assert_eq!(
            render_number(u64::MAX, int(64, false)),
            "18446744073709551615"
        );
        let f = NumType {
            width: 32,
            signed: false,
            float: true,
        };
        assert_eq!(render_number(u64::from(1.5f32.to_bits()), f), "1.5");
        assert_eq!(
            render_number(u64::from(f32::NAN.to_bits()), f),
            "0x7fc00000"
        );
    }
}
