//! Text to binary.
//!
//! Input is the Khronos disassembly dialect: one instruction per line,
//! `%name = OpCode operands...`, `;` comments, quoted strings with `\`
//! escapes. Leading `; Version:`, `; Generator:`, `; Bound:` and
//! `; Schema:` comments set the corresponding header fields.
//!
//! Ids are resolved in two steps. Numeric names such as `%12` are pinned
//! to that id. Every other name gets the smallest free id, in order of
//! first mention, so forward references need no second pass.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use spvkit_grammar::{Category, Quantifier};

use crate::builder::encode_stream;
use crate::codec::{ModuleHeader, DEFAULT_GENERATOR};
use crate::grammar::Grammar;
use crate::op;
use crate::operand::{Id, Instruction, LiteralNumber, Operand};
use crate::parse::{is_result_slot, NumType, OPENCL_STD};

/// A positioned assembler message. Lines and columns are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsmDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for AsmDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: error: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct AssembleError {
    pub diagnostics: Vec<AsmDiagnostic>,
}

impl fmt::Display for AssembleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Header values used when the text has no header comments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssembleOptions {
    pub major: u8,
    pub minor: u8,
    pub generator: u32,
    pub schema: u32,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions {
            major: 1,
            minor: 6,
            generator: DEFAULT_GENERATOR,
            schema: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Token text; for quoted strings, the unescaped contents.
    pub text: String,
    pub quoted: bool,
    pub line: usize,
    pub column: usize,
}

impl Token {
    fn is_id(&self) -> bool {
        !self.quoted && self.text.starts_with('%') && self.text.len() > 1
    }

    fn diag(&self, message: impl Into<String>) -> AsmDiagnostic {
        AsmDiagnostic {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextInstruction {
    pub result: Option<Token>,
    pub opcode: Token,
    pub operands: Vec<Token>,
}

impl TextInstruction {
    /// Result name without the leading `%`.
    pub fn result_name(&self) -> Option<&str> {
        self.result.as_ref().map(|t| &t.text[1..])
    }

    pub fn operand_texts(&self) -> Vec<&str> {
        self.operands.iter().map(|t| t.text.as_str()).collect()
    }

    fn end(&self) -> (usize, usize) {
        let last = self.operands.last().unwrap_or(&self.opcode);
        (last.line, last.column + last.text.len())
    }
}

/// Splits text into logical lines; a newline inside a quoted string does
/// not end the line. Returns `(first physical line, text)` pairs.
fn logical_lines(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut line = 1;
    let mut start_line = 1;
    let mut in_string = false;
    let mut escaped = false;
    let mut in_comment = false;
    for (i, c) in text.char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
        } else if c == '"' && !in_comment {
            in_string = true;
        } else if c == ';' {
            in_comment = true;
        }
        if c == '\n' {
            line += 1;
            if !in_string {
                out.push((start_line, &text[start..i]));
                start = i + 1;
                start_line = line;
                in_comment = false;
            }
        }
    }
    if start < text.len() {
        out.push((start_line, &text[start..]));
    }
    out
}

fn tokens(first_line: usize, text: &str) -> Result<Vec<Token>, AsmDiagnostic> {
    let mut out = Vec::new();
    let mut line = first_line;
    let mut line_start = 0;
    let mut chars = text.char_indices().peekable();
    let col = |i: usize, ls: usize| text[ls..i].chars().count() + 1;
    while let Some(&(i, c)) = chars.peek() {
        if c == '\n' {
            chars.next();
            line += 1;
            line_start = i + 1;
        } else if c.is_whitespace() {
            chars.next();
        } else if c == ';' {
            break;
        } else if c == '"' {
            let (tl, tc) = (line, col(i, line_start));
            chars.next();
            let mut s = String::new();
            let mut closed = false;
            while let Some((j, c)) = chars.next() {
                match c {
                    '"' => {
                        closed = true;
                        break;
                    }
                    '\\' => {
                        if let Some((_, e)) = chars.next() {
                            if e == '\n' {
                                line += 1;
                                line_start = j + 2;
                            }
                            s.push(e);
                        }
                    }
                    '\n' => {
                        line += 1;
                        line_start = j + 1;
                        s.push(c);
                    }
                    _ => s.push(c),
                }
            }
            if !closed {
                return Err(AsmDiagnostic {
                    line: tl,
                    column: tc,
                    message: "unterminated string literal".into(),
                });
            }
            out.push(Token {
                text: s,
                quoted: true,
                line: tl,
                column: tc,
            });
        } else if c == '=' {
            chars.next();
            out.push(Token {
                text: "=".into(),
                quoted: false,
                line,
                column: col(i, line_start),
            });
        } else {
            let start = i;
            let mut end = text.len();
            while let Some(&(j, c)) = chars.peek() {
                if c.is_whitespace() || c == ';' || c == '"' || c == '=' {
                    end = j;
                    break;
                }
                chars.next();
            }
            out.push(Token {
                text: text[start..end].to_string(),
                quoted: false,
                line,
                column: col(start, line_start),
            });
        }
    }
    Ok(out)
}

/// Tokenizes one logical line. Blank and comment-only lines give `None`.
pub fn tokenize_line(line: &str) -> Result<Option<TextInstruction>, AsmDiagnostic> {
    tokenize_at(1, line)
}

fn tokenize_at(first_line: usize, line: &str) -> Result<Option<TextInstruction>, AsmDiagnostic> {
    let mut toks = tokens(first_line, line)?;
    if toks.is_empty() {
        return Ok(None);
    }
    let result = if toks.len() >= 2 && toks[1].text == "=" && !toks[1].quoted {
        let r = toks.remove(0);
        let eq = toks.remove(0);
        if !r.is_id() {
            return Err(r.diag(format!("result name `{}` must start with `%`", r.text)));
        }
        if toks.is_empty() {
            return Err(eq.diag("expected an opcode after `=`"));
        }
        Some(r)
    } else {
        None
    };
    let opcode = toks.remove(0);
    if opcode.quoted || !opcode.text.starts_with("Op") {
        return Err(opcode.diag(format!("expected an opcode, found `{}`", opcode.text)));
    }
    if let Some(eq) = toks.iter().find(|t| t.text == "=" && !t.quoted) {
        return Err(eq.diag("unexpected `=`"));
    }
    Ok(Some(TextInstruction {
        result,
        opcode,
        operands: toks,
    }))
}

/// Name to id bindings. Numeric names are pinned; others are assigned the
/// smallest id that is neither pinned nor already given out.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    by_name: HashMap<String, Id>,
    by_id: HashMap<Id, String>,
    reserved: HashSet<u32>,
    next: u32,
}

fn numeric_id(name: &str) -> Option<u32> {
    let digits = name.strip_prefix('%').unwrap_or(name);
    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
        digits.parse().ok()
    } else {
        None
    }
}

impl SymbolTable {
    pub fn new() -> Self {
        SymbolTable {
            next: 1,
            ..Default::default()
        }
    }

    /// Pins `%<n>` so generated ids never collide with it.
    pub fn reserve(&mut self, id: u32) {
        self.reserved.insert(id);
    }

    /// The id bound to `name` (with or without `%`), binding it on first
    /// mention.
    pub fn resolve(&mut self, name: &str) -> Id {
        let key = name.strip_prefix('%').unwrap_or(name);
        if let Some(id) = self.by_name.get(key) {
            return *id;
        }
        let id = match numeric_id(key) {
            Some(n) => {
                self.reserved.insert(n);
                Id(n)
            }
            None => {
                while self.reserved.contains(&self.next) || self.by_id.contains_key(&Id(self.next))
                {
                    self.next += 1;
                }
                self.next += 1;
                Id(self.next - 1)
            }
        };
        self.by_name.insert(key.to_string(), id);
        self.by_id.insert(id, key.to_string());
        id
    }

    pub fn get(&self, name: &str) -> Option<Id> {
        self.by_name
            .get(name.strip_prefix('%').unwrap_or(name))
            .copied()
    }

    pub fn name_of(&self, id: Id) -> Option<&str> {
        self.by_id.get(&id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }
}

fn parse_int(text: &str) -> Option<i128> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let v = match body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        Some(hex) => i128::from_str_radix(hex, 16).ok()?,
        None => body.parse::<i128>().ok()?,
    };
    Some(if neg { -v } else { v })
}

fn is_hex(text: &str) -> bool {
    let t = text.strip_prefix('-').unwrap_or(text);
    t.starts_with("0x") || t.starts_with("0X")
}

/// Header fields taken from leading comment lines.
fn header_comments(text: &str, opts: &AssembleOptions) -> (ModuleHeader, Option<u32>) {
    let mut h = ModuleHeader::new(opts.major, opts.minor, opts.generator, 0, opts.schema);
    let mut bound = None;
    for line in text.lines() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let Some(comment) = t.strip_prefix(';') else {
            break;
        };
        let Some((key, value)) = comment.split_once(':') else {
            continue;
        };
        let value = value.trim();
        let num = || parse_int(value).and_then(|v| u32::try_from(v).ok());
        match key.trim() {
            "Version" => {
                if let Some((a, b)) = value.split_once('.') {
                    if let (Ok(a), Ok(b)) = (a.parse(), b.parse()) {
                        h.major = a;
                        h.minor = b;
                    }
                }
            }
            "Generator" => {
                if let Some(v) = num() {
                    h.generator = v;
                }
            }
            "Bound" => bound = num(),
            "Schema" => {
                if let Some(v) = num() {
                    h.schema = v;
                }
            }
            _ => {}
        }
    }
    (h, bound)
}

struct Context {
    scalars: HashMap<Id, NumType>,
    value_types: HashMap<Id, Id>,
    ext_sets: HashMap<Id, String>,
}

struct LineAssembler<'g, 'a> {
    g: &'g Grammar,
    ctx: &'a Context,
    symbols: &'a SymbolTable,
    text: &'a TextInstruction,
    opcode: u16,
    result_type: Option<Id>,
    pos: usize,
    operands: Vec<Operand>,
    queue: VecDeque<(&'g str, Quantifier)>,
    diags: Vec<AsmDiagnostic>,
}

impl<'g> LineAssembler<'g, '_> {
    fn next_token(&mut self, kind: &str) -> Option<&Token> {
        match self.text.operands.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Some(t)
            }
            None => {
                let (line, column) = self.text.end();
                self.diags.push(AsmDiagnostic {
                    line,
                    column,
                    message: format!("{}: missing {kind} operand", self.text.opcode.text),
                });
                None
            }
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.text.operands.len()
    }

    fn id(&self, t: &Token) -> Result<Id, AsmDiagnostic> {
        if !t.is_id() {
            return Err(t.diag(format!("expected an id, found `{}`", t.text)));
        }
        Ok(self.symbols.get(&t.text).expect("every id token is bound"))
    }

    fn first_id(&self) -> Option<Id> {
        self.operands.iter().find_map(|o| match o {
            Operand::Id(id) => Some(*id),
            _ => None,
        })
    }

    fn word(t: &Token) -> Result<u32, AsmDiagnostic> {
        if t.quoted {
            return Err(t.diag("expected an integer, found a string"));
        }
        match parse_int(&t.text) {
            Some(v) if (0..=i128::from(u32::MAX)).contains(&v) => Ok(v as u32),
            Some(v) if (i128::from(i32::MIN)..0).contains(&v) => Ok(v as i32 as u32),
            _ => Err(t.diag(format!("expected a 32-bit integer, found `{}`", t.text))),
        }
    }

    fn number(t: &Token, ty: NumType) -> Result<Operand, AsmDiagnostic> {
        if t.quoted {
            return Err(t.diag("expected a number, found a string"));
        }
        if ty.float && !is_hex(&t.text) {
            return match ty.width {
                32 => t
                    .text
                    .parse::<f32>()
                    .map(|f| Operand::Number(LiteralNumber::from_f32(f)))
                    .map_err(|_| t.diag(format!("`{}` is not a 32-bit float", t.text))),
                64 => t
                    .text
                    .parse::<f64>()
                    .map(|f| Operand::Number(LiteralNumber::from_f64(f)))
                    .map_err(|_| t.diag(format!("`{}` is not a 64-bit float", t.text))),
                w => Err(t.diag(format!(
                    "{w}-bit float literals must be written as hex bits"
                ))),
            };
        }
        if !matches!(ty.width, 8 | 16 | 32 | 64) {
            return Err(t.diag(format!("unsupported literal width {}", ty.width)));
        }
        let v =
            parse_int(&t.text).ok_or_else(|| t.diag(format!("`{}` is not an integer", t.text)))?;
        let w = ty.width;
        let umax = (1i128 << w) - 1;
        let smin = -(1i128 << (w - 1));
        if !(smin..=umax).contains(&v) || (v < 0 && !ty.signed && !ty.float) {
            return Err(t.diag(format!("`{}` does not fit a {w}-bit literal", t.text)));
        }
        if is_hex(&t.text) && w <= 32 {
            // Hex is taken as the raw word, bypassing sign extension.
            return Ok(Operand::Literal(v as u32));
        }
        Ok(Operand::Number(LiteralNumber(v as i64 as u64)))
    }

    fn enum_value(
        &self,
        t: &Token,
        kind: &spvkit_grammar::OperandKindDef,
    ) -> Result<u32, AsmDiagnostic> {
        let parts: Vec<&str> = if kind.category == Category::BitEnum {
            t.text.split('|').collect()
        } else {
            vec![t.text.as_str()]
        };
        let mut value = 0u32;
        for part in parts {
            let v = match kind.enumerant_by_name(part) {
                Some(e) => e.value,
                None => match parse_int(part) {
                    Some(n) if (0..=i128::from(u32::MAX)).contains(&n) => n as u32,
                    _ => return Err(t.diag(format!("unknown {} enumerant `{part}`", kind.kind))),
                },
            };
            value |= v;
        }
        Ok(value)
    }

    fn one(&mut self, kind: &'g str) -> Result<(), AsmDiagnostic> {
        let Some(def) = self.g.kind(kind) else {
            return Err(self
                .text
                .opcode
                .diag(format!("operand kind {kind} is not in the grammar")));
        };
        let kind = def.kind.as_str();
        if def.category == Category::Composite {
            for b in def.bases.iter().flatten().rev() {
                self.queue.push_front((b.as_str(), Quantifier::Single));
            }
            return Ok(());
        }
        let Some(t) = self.next_token(kind).cloned() else {
            return Ok(());
        };
        match def.category {
            Category::Id => {
                let id = self.id(&t)?;
                self.operands.push(Operand::Id(id));
            }
            Category::ValueEnum => {
                if t.quoted {
                    return Err(t.diag(format!("expected a {kind} enumerant, found a string")));
                }
                let value = self.enum_value(&t, def)?;
                if let Some(e) = def.enumerant_by_value(value) {
                    for p in e.parameters.iter().rev() {
                        self.queue.push_front((p.kind.as_str(), p.quantifier));
                    }
                }
                self.operands.push(Operand::Literal(value));
            }
            Category::BitEnum => {
                if t.quoted {
                    return Err(t.diag(format!("expected a {kind} mask, found a string")));
                }
                let value = self.enum_value(&t, def)?;
                let mut params = Vec::new();
                for bit in (0..32).map(|b| 1u32 << b).filter(|b| value & b != 0) {
                    if let Some(e) = def.enumerant_by_value(bit) {
                        params.extend(e.parameters.iter().map(|p| (p.kind.as_str(), p.quantifier)));
                    }
                }
                for p in params.into_iter().rev() {
                    self.queue.push_front(p);
                }
                self.operands.push(Operand::Literal(value));
            }
            Category::Literal => self.literal(kind, &t)?,
            Category::Composite => unreachable!("handled above"),
        }
        Ok(())
    }

    fn literal(&mut self, kind: &'g str, t: &Token) -> Result<(), AsmDiagnostic> {
        match kind {
            "LiteralString" => {
                if !t.quoted {
                    return Err(t.diag(format!("expected a quoted string, found `{}`", t.text)));
                }
                self.operands.push(Operand::String(t.text.clone()));
            }
            "LiteralContextDependentNumber" => {
                let ty = self
                    .result_type
                    .and_then(|rt| self.ctx.scalars.get(&rt).copied())
                    .ok_or_else(|| {
                        t.diag("cannot resolve the literal width from the result type")
                    })?;
                let o = Self::number(t, ty)?;
                self.operands.push(o);
            }
            "LiteralInteger" if self.opcode == op::SWITCH => {
                let ty = self
                    .first_id()
                    .and_then(|sel| self.ctx.value_types.get(&sel))
                    .and_then(|ty| self.ctx.scalars.get(ty))
                    .copied();
                let o = match ty {
                    Some(ty) => Self::number(t, ty)?,
                    None => Operand::Literal(Self::word(t)?),
                };
                self.operands.push(o);
            }
            "LiteralExtInstInteger" => {
                let set = self.first_id().and_then(|id| self.ctx.ext_sets.get(&id));
                let opencl = set.map(String::as_str) == Some(OPENCL_STD);
                let entry = if opencl {
                    self.g.opencl.by_name(&t.text).ok().or_else(|| {
                        Self::word(t)
                            .ok()
                            .and_then(|n| self.g.opencl.by_number(n).ok())
                    })
                } else {
                    None
                };
                let number = match entry {
                    Some(e) => {
                        self.queue.clear();
                        for s in &e.operands {
                            self.queue.push_back((s.kind.as_str(), s.quantifier));
                        }
                        e.opcode
                    }
                    None => Self::word(t).map_err(|_| {
                        t.diag(format!("unknown extended instruction `{}`", t.text))
                    })?,
                };
                self.operands.push(Operand::Literal(number));
            }
            "LiteralSpecConstantOpInteger" => {
                let named = self
                    .g
                    .opcode(&t.text)
                    .or_else(|| self.g.opcode(&format!("Op{}", t.text)));
                let opcode = match named {
                    Some(o) => o,
                    None => u16::try_from(Self::word(t)?)
                        .map_err(|_| t.diag(format!("`{}` is not an opcode", t.text)))?,
                };
                if let Some(d) = self.g.def(opcode) {
                    self.queue.clear();
                    for s in d.operands.iter().filter(|s| !is_result_slot(&s.kind)) {
                        self.queue.push_back((s.kind.as_str(), s.quantifier));
                    }
                }
                self.operands.push(Operand::Literal(u32::from(opcode)));
            }
            _ => {
                let w = Self::word(t)?;
                self.operands.push(Operand::Literal(w));
            }
        }
        Ok(())
    }

    fn run(&mut self) {
        while let Some((kind, q)) = self.queue.pop_front() {
            let r = match q {
                Quantifier::Single => self.one(kind),
                Quantifier::Optional if !self.at_end() => self.one(kind),
                Quantifier::Variadic if !self.at_end() => {
                    self.queue.push_front((kind, q));
                    self.one(kind)
                }
                _ => Ok(()),
            };
            if let Err(d) = r {
                self.diags.push(d);
                return;
            }
            if !self.diags.is_empty() {
                return;
            }
        }
        if let Some(extra) = self.text.operands.get(self.pos) {
            self.diags.push(extra.diag(format!(
                "{}: unexpected operand `{}`",
                self.text.opcode.text, extra.text
            )));
        }
    }
}

fn unknown_opcode(text: &str) -> Option<u16> {
    text.strip_prefix("OpUnknown(")?
        .strip_suffix(')')?
        .parse()
        .ok()
}

/// Assembles a whole document.
pub fn assemble(g: &Grammar, text: &str, opts: &AssembleOptions) -> Result<Vec<u8>, AssembleError> {
    let mut diags = Vec::new();
    let (mut header, header_bound) = header_comments(text, opts);

    let mut lines = Vec::new();
    for (first, line) in logical_lines(text) {
        match tokenize_at(first, line) {
            Ok(Some(t)) => lines.push(t),
            Ok(None) => {}
            Err(d) => diags.push(d),
        }
    }

    // Pin numeric ids, then bind names in order of first mention.
    let mut symbols = SymbolTable::new();
    let mut first_mention: HashMap<String, Token> = HashMap::new();
    let id_tokens = |l: &TextInstruction| -> Vec<Token> {
        l.result
            .iter()
            .chain(l.operands.iter())
            .filter(|t| t.is_id())
            .cloned()
            .collect()
    };
    for l in &lines {
        for t in id_tokens(l) {
            match numeric_id(&t.text) {
                Some(0) => diags.push(t.diag("id 0 is not a valid id")),
                Some(n) => symbols.reserve(n),
                None => {}
            }
        }
    }
    for l in &lines {
        for t in id_tokens(l) {
            symbols.resolve(&t.text);
            first_mention.entry(t.text.clone()).or_insert(t);
        }
    }

    // Types, value types and extended sets, so literal widths resolve even
    // across forward references.
    let mut ctx = Context {
        scalars: HashMap::new(),
        value_types: HashMap::new(),
        ext_sets: HashMap::new(),
    };
    for l in &lines {
        let Some(r) = l.result.as_ref().and_then(|r| symbols.get(&r.text)) else {
            continue;
        };
        let ops = l.operand_texts();
        let int = |i: usize| {
            ops.get(i)
                .and_then(|s| parse_int(s))
                .and_then(|v| u32::try_from(v).ok())
        };
        match l.opcode.text.as_str() {
            "OpTypeInt" => {
                if let (Some(width), Some(sign)) = (int(0), int(1)) {
                    ctx.scalars.insert(
                        r,
                        NumType {
                            width,
                            signed: sign == 1,
                            float: false,
                        },
                    );
                }
            }
            "OpTypeFloat" => {
                if let Some(width) = int(0) {
                    ctx.scalars.insert(
                        r,
                        NumType {
                            width,
                            signed: false,
                            float: true,
                        },
                    );
                }
            }
            "OpExtInstImport" => {
                if let Some(t) = l.operands.first().filter(|t| t.quoted) {
                    ctx.ext_sets.insert(r, t.text.clone());
                }
            }
            name => {
                let has_type = g
                    .opcode(name)
                    .and_then(|o| g.def(o))
                    .is_some_and(|d| d.has_result_type());
                if let (true, Some(t)) = (has_type, l.operands.first().filter(|t| t.is_id())) {
                    ctx.value_types
                        .insert(r, symbols.get(&t.text).expect("bound"));
                }
            }
        }
    }

    let mut insts = Vec::with_capacity(lines.len());
    let mut defined: HashSet<Id> = HashSet::new();
    for l in &lines {
        let result = l
            .result
            .as_ref()
            .map(|r| symbols.get(&r.text).expect("bound"));
        if let (Some(r), Some(tok)) = (result, &l.result) {
            if !defined.insert(r) {
                diags.push(tok.diag(format!("{} is defined more than once", tok.text)));
            }
        }

        if let Some(opcode) = unknown_opcode(&l.opcode.text) {
            if let Some(tok) = &l.result {
                diags.push(tok.diag("OpUnknown cannot have a result name"));
                continue;
            }
            let mut operands = Vec::new();
            for t in &l.operands {
                match LineAssembler::word(t) {
                    Ok(w) => operands.push(Operand::Literal(w)),
                    Err(d) => diags.push(d),
                }
            }
            insts.push(Instruction::new(opcode, None, None, operands));
            continue;
        }

        let Some(def) = g.opcode(&l.opcode.text).and_then(|o| g.def(o)) else {
            diags.push(l.opcode.diag(format!("unknown opcode `{}`", l.opcode.text)));
            continue;
        };
        match (def.has_result(), &l.result) {
            (true, None) => {
                diags.push(l.opcode.diag(format!(
                    "{} needs a result id: `%name = {}`",
                    def.name, def.name
                )));
                continue;
            }
            (false, Some(r)) => {
                diags.push(r.diag(format!("{} has no result id", def.name)));
                continue;
            }
            _ => {}
        }

        let mut la = LineAssembler {
            g,
            ctx: &ctx,
            symbols: &symbols,
            text: l,
            opcode: def.opcode,
            result_type: None,
            pos: 0,
            operands: Vec::new(),
            queue: VecDeque::new(),
            diags: Vec::new(),
        };
        if def.has_result_type() {
            if let Some(t) = la.next_token("IdResultType").cloned() {
                match la.id(&t) {
                    Ok(id) => la.result_type = Some(id),
                    Err(d) => la.diags.push(d),
                }
            }
        }
        if la.diags.is_empty() {
            for s in def.operands.iter().filter(|s| !is_result_slot(&s.kind)) {
                la.queue.push_back((s.kind.as_str(), s.quantifier));
            }
            la.run();
        }
        if la.diags.is_empty() {
            insts.push(Instruction::new(
                def.opcode,
                la.result_type,
                result,
                la.operands,
            ));
        } else {
            diags.append(&mut la.diags);
        }
    }

    let mut undefined: Vec<&Token> = first_mention
        .iter()
        .filter(|(name, _)| !defined.contains(&symbols.get(name).expect("bound")))
        .map(|(_, t)| t)
        .collect();
    undefined.sort_by_key(|t| (t.line, t.column));
    for t in undefined {
        diags.push(t.diag(format!("{} is used but never defined", t.text)));
    }

    if !diags.is_empty() {
        diags.sort_by_key(|d| (d.line, d.column));
        return Err(AssembleError { diagnostics: diags });
    }
    header.bound = header_bound.unwrap_or(0);
    encode_stream(&header, &insts).map_err(|e| AssembleError {
        diagnostics: vec![AsmDiagnostic {
            line: 0,
            column: 0,
            message: e.to_string(),
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::decode_module;

    #[test]
    fn tokenize_shapes() {
        let t = tokenize_line("%sum = OpIAdd %int %a %b").unwrap().unwrap();
        assert_eq!(t.result_name(), Some("sum"));
        assert_eq!(t.opcode.text, "OpIAdd");
        assert_eq!(t.operand_texts(), ["%int", "%a", "%b"]);

        let t = tokenize_line("OpCapability Kernel").unwrap().unwrap();
        assert_eq!(t.result, None);
        assert_eq!(t.operand_texts(), ["Kernel"]);

        let t = tokenize_line("OpName %f \"main kernel\"").unwrap().unwrap();
        assert_eq!(t.operands[1].text, "main kernel");
        assert!(t.operands[1].quoted);

        let t = tokenize_line(r#"OpString "a \"q\" \\ b""#)
            .unwrap()
            .unwrap();
        assert_eq!(t.operands[0].text, r#"a "q" \ b"#);

        assert_eq!(tokenize_line("   ; just a comment").unwrap(), None);
        assert_eq!(tokenize_line("").unwrap(), None);
        let err = tokenize_line("OpName %f \"open").unwrap_err();
        assert_eq!((err.line, err.column), (1, 11));
    }

    #[test]
    fn symbols_memoize_and_skip_pinned_ids() {
        let mut s = SymbolTable::new();
        s.reserve(1);
        let k = s.resolve("%ifThen");
        assert_eq!(k, Id(2));
        assert_eq!(s.resolve("%ifThen"), k);
        assert_ne!(s.resolve("%ifElse"), k);
        assert_eq!(s.resolve("%1"), Id(1));
        assert_eq!(s.name_of(k), Some("ifThen"));
    }

    #[test]
    fn listing_seven_capabilities() {
        let text = "OpCapability Addresses\nOpCapability Linkage\nOpCapability Kernel\nOpCapability Int64\nOpCapability Int8\n";
        let bin = assemble(Grammar::unified(), text, &AssembleOptions::default()).unwrap();
        let (_, insts) = decode_module(&bin).unwrap();
        let caps: Vec<u32> = insts.iter().map(|i| i.operands[0]).collect();
        assert!(insts.iter().all(|i| i.opcode == 17));
        assert_eq!(caps, [4, 5, 6, 11, 39]);
    }

    #[test]
    fn unknown_enumerant_is_positioned() {
        let err = assemble(
            Grammar::unified(),
            "OpCapability Bogus",
            &AssembleOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err.diagnostics.len(), 1);
        let d = &err.diagnostics[0];
        assert_eq!((d.line, d.column), (1, 14));
        assert!(d.message.contains("Bogus"));
    }

    #[test]
    fn independent_errors_are_all_reported() {
        let text = "OpCapability Bogus\nOpFrobnicate\n%x = OpTypeInt 32\nOpMemoryModel Logical";
        let err = assemble(Grammar::unified(), text, &AssembleOptions::default()).unwrap_err();
        let lines: Vec<usize> = err.diagnostics.iter().map(|d| d.line).collect();
        assert_eq!(lines, [1, 2, 3, 4]);
    }

    #[test]
    fn forward_references_and_wide_literals() {
        let text = "\
; Version: 1.0
; Bound: 40
%c = OpConstant %long 5
%long = OpTypeInt 64 1
%neg = OpConstant %long -2
";
        let bin = assemble(Grammar::unified(), text, &AssembleOptions::default()).unwrap();
        let (h, insts) = decode_module(&bin).unwrap();
        assert_eq!((h.major, h.minor, h.bound), (1, 0, 40));
        assert_eq!(insts[0].operands, [2, 1, 5, 0]);
        assert_eq!(insts[2].operands, [2, 3, 0xFFFF_FFFE, 0xFFFF_FFFF]);
    }

    #[test]
    fn undefined_names_are_reported() {
        let err = assemble(
            Grammar::unified(),
            "OpEntryPoint Kernel %main \"main\"",
            &AssembleOptions::default(),
        )
        .unwrap_err();
        assert_eq!(
            err.diagnostics[0].message,
            "%main is used but never defined"
        );
    }
}
