//! Source generator: turns a grammar into Rust source artifacts.
//!
//! Three template families are used, mirroring the grammar's structure:
//! instructions, operand kinds (enumerates, composites, literals) and
//! mapper tables for the assembler and disassembler.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::model::{
    Category, ExtInstGrammar, GrammarSpec, InstructionDef, OperandSlot, Quantifier,
};
use crate::template::{Context, Template};

const INSTRUCTION_TMPL: &str = include_str!("../templates/instruction.rs.tmpl");
const VALUE_ENUM_TMPL: &str = include_str!("../templates/kind_value_enum.rs.tmpl");
const BIT_ENUM_TMPL: &str = include_str!("../templates/kind_bit_enum.rs.tmpl");
const COMPOSITE_TMPL: &str = include_str!("../templates/kind_composite.rs.tmpl");
const LITERAL_TMPL: &str = include_str!("../templates/kind_literal.rs.tmpl");
const MAPPER_INSTRUCTIONS_TMPL: &str = include_str!("../templates/mapper_instructions.rs.tmpl");
const MAPPER_ENUMERANTS_TMPL: &str = include_str!("../templates/mapper_enumerants.rs.tmpl");
const MAPPER_EXTINST_TMPL: &str = include_str!("../templates/mapper_extinst.rs.tmpl");

/// Name written into every generated file's banner.
pub const GENERATOR_NAME: &str = "spvkit-gen";

/// Literal kinds backed by hand-written base types rather than generated
/// ones. All `Id`-category kinds are base types as well.
pub const BASE_LITERAL_KINDS: [&str; 4] = [
    "LiteralInteger",
    "LiteralString",
    "LiteralContextDependentNumber",
    "LiteralSpecConstantOpInteger",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("cannot sanitize an empty identifier")]
    EmptyIdentifier,
    #[error("opcode {opcode} is used by `{first}` and `{second}` with different operands")]
    DuplicateOpcode {
        opcode: u16,
        first: String,
        second: String,
    },
    #[error("extended instruction {number} is defined twice")]
    DuplicateExtInst { number: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArtifactCategory {
    Instruction,
    OperandKind,
    MapperTable,
}

impl ArtifactCategory {
    pub fn directory(self) -> &'static str {
        match self {
            ArtifactCategory::Instruction => "instructions",
            ArtifactCategory::OperandKind => "kinds",
            ArtifactCategory::MapperTable => "mappers",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedArtifact {
    pub logical_name: String,
    pub source_text: String,
    pub category: ArtifactCategory,
}

impl GeneratedArtifact {
    /// `generated/<family>/<logical_name>.rs`
    pub fn relative_path(&self) -> PathBuf {
        Path::new("generated")
            .join(self.category.directory())
            .join(format!("{}.rs", self.logical_name))
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

/// Builds a type-level identifier from a grammar name.
///
/// Characters outside `[A-Za-z0-9_]` become `_`, and a result that would
/// start with a digit gets a leading underscore.
pub fn sanitize_identifier(raw: &str, prefix: &str) -> Result<String, GenError> {
    if raw.is_empty() {
        return Err(GenError::EmptyIdentifier);
    }
    let joined: String = prefix
        .chars()
        .chain(raw.chars())
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if joined.starts_with(|c: char| !is_ident_start(c)) {
        Ok(format!("_{joined}"))
    } else {
        Ok(joined)
    }
}

/// True for identifiers satisfying the generated-name invariant.
pub fn is_valid_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if is_ident_start(c))
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

const RUST_KEYWORDS: &[&str] = &[
    "as", "async", "await", "break", "const", "continue", "crate", "dyn", "else", "enum", "extern",
    "false", "fn", "for", "if", "impl", "in", "let", "loop", "match", "mod", "move", "mut", "pub",
    "ref", "return", "self", "static", "struct", "super", "trait", "true", "type", "unsafe", "use",
    "where", "while", "abstract", "become", "box", "do", "final", "macro", "override", "priv",
    "typeof", "unsized", "virtual", "yield", "try", "gen",
];

/// `CamelCase` or `'Quoted Words'` to `snake_case`.
pub fn snake_case(raw: &str) -> String {
    let mut out = String::new();
    let mut prev_lower = false;
    for c in raw.chars() {
        if c.is_ascii_alphanumeric() {
            if c.is_ascii_uppercase() && prev_lower && !out.ends_with('_') {
                out.push('_');
            }
            prev_lower = c.is_ascii_lowercase() || c.is_ascii_digit();
            out.push(c.to_ascii_lowercase());
        } else {
            if !out.is_empty() && !out.ends_with('_') {
                out.push('_');
            }
            prev_lower = false;
        }
    }
    let trimmed = out.trim_matches('_').to_string();
    if trimmed.is_empty() {
        return "operand".into();
    }
    if trimmed.starts_with(|c: char| c.is_ascii_digit()) {
        return format!("_{trimmed}");
    }
    if RUST_KEYWORDS.contains(&trimmed.as_str()) {
        return format!("{trimmed}_");
    }
    trimmed
}

/// Field name for an operand slot: the grammar's name up to the first
/// comma or newline, or the kind name when the slot is unnamed.
fn slot_field_name(slot: &OperandSlot) -> String {
    match slot.kind.as_str() {
        "IdResultType" => return "result_type".into(),
        "IdResult" => return "result".into(),
        _ => {}
    }
    match &slot.name {
        Some(name) => {
            let head = name.split([',', '\n']).next().unwrap_or(name);
            snake_case(head)
        }
        None => snake_case(&slot.kind),
    }
}

fn unique_field_names(slots: &[OperandSlot]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    slots
        .iter()
        .map(|s| {
            let base = slot_field_name(s);
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}_{n}")
            }
        })
        .collect()
}

/// True when the kind maps onto a hand-written base type and therefore
/// gets no generated artifact.
pub fn is_base_kind(spec: &GrammarSpec, kind: &str) -> bool {
    match spec.operand_kind(kind) {
        Some(k) => k.category == Category::Id || BASE_LITERAL_KINDS.contains(&kind),
        None => false,
    }
}

fn kind_rust_type(spec: &GrammarSpec, kind: &str) -> String {
    let category = spec.operand_kind(kind).map(|k| k.category);
    match (category, kind) {
        (Some(Category::Id), _) => "Id".into(),
        (_, "LiteralInteger") | (_, "LiteralSpecConstantOpInteger") => "u32".into(),
        (_, "LiteralString") => "String".into(),
        (_, "LiteralContextDependentNumber") => "LiteralNumber".into(),
        _ => sanitize_identifier(kind, "").expect("grammar kind names are non-empty"),
    }
}

fn slot_rust_type(spec: &GrammarSpec, slot: &OperandSlot) -> String {
    let base = kind_rust_type(spec, &slot.kind);
    match slot.quantifier {
        Quantifier::Single => base,
        Quantifier::Optional => format!("Option<{base}>"),
        Quantifier::Variadic => format!("Vec<{base}>"),
    }
}

fn banner(spec: &GrammarSpec) -> String {
    format!(
        "// @generated by {GENERATOR_NAME} from SPIR-V grammar {}. Do not edit.",
        spec.version_string()
    )
}

fn parse_template(src: &str) -> Template {
    Template::parse(src).expect("vendored templates parse")
}

fn render(t: &Template, ctx: &Context) -> String {
    t.render(ctx)
        .expect("generator binds every template placeholder")
}

fn sorted_instructions(spec: &GrammarSpec) -> Vec<&InstructionDef> {
    let mut list: Vec<&InstructionDef> = spec.instructions().iter().collect();
    list.sort_by(|a, b| (a.opcode, &a.name).cmp(&(b.opcode, &b.name)));
    list
}

/// One artifact per instruction, sorted by opcode then name.
pub fn generate_instruction_definitions(spec: &GrammarSpec) -> Vec<GeneratedArtifact> {
    let template = parse_template(INSTRUCTION_TMPL);
    let banner = banner(spec);
    sorted_instructions(spec)
        .into_iter()
        .map(|inst| {
            let type_name = sanitize_identifier(&inst.name, "").expect("non-empty opname");
            let names = unique_field_names(&inst.operands);
            let mut fields = Vec::new();
            let mut operand_fields = Vec::new();
            let mut result_type = "None".to_string();
            let mut result = "None".to_string();
            for (slot, field) in inst.operands.iter().zip(&names) {
                fields.push(
                    Context::new()
                        .with("field", field.as_str())
                        .with("ty", slot_rust_type(spec, slot)),
                );
                match slot.kind.as_str() {
                    "IdResultType" => result_type = format!("Some(self.{field})"),
                    "IdResult" => result = format!("Some(self.{field})"),
                    _ => operand_fields.push(Context::new().with("field", field.as_str())),
                }
            }
            let mut ctx = Context::new();
            ctx.set("banner", banner.as_str())
                .set("opname", inst.name.as_str())
                .set("opcode", inst.opcode.to_string())
                .set("class", inst.class.as_deref().unwrap_or("unclassified"))
                .set("type_name", type_name.as_str())
                .set("result_type", result_type)
                .set("result", result)
                .set_list("fields", fields)
                .set_list("operand_fields", operand_fields);
            GeneratedArtifact {
                logical_name: type_name,
                source_text: render(&template, &ctx),
                category: ArtifactCategory::Instruction,
            }
        })
        .collect()
}

/// Argument list, push statements and type list for a parameter slot list.
fn param_parts(
    spec: &GrammarSpec,
    params: &[OperandSlot],
    sink: &str,
) -> (String, String, Vec<String>) {
    let types: Vec<String> = params.iter().map(|p| slot_rust_type(spec, p)).collect();
    let args = types
        .iter()
        .enumerate()
        .map(|(i, t)| format!("p{i}: {t}"))
        .collect::<Vec<_>>()
        .join(", ");
    let push = (0..params.len())
        .map(|i| format!("p{i}.push_operands({sink}); "))
        .collect::<String>();
    (args, push, types)
}

/// One artifact per generated operand kind, sorted by kind name. Kinds
/// backed by base types (see [`is_base_kind`]) produce no artifact.
pub fn generate_operand_kind_definitions(spec: &GrammarSpec) -> Vec<GeneratedArtifact> {
    let value_enum = parse_template(VALUE_ENUM_TMPL);
    let bit_enum = parse_template(BIT_ENUM_TMPL);
    let composite = parse_template(COMPOSITE_TMPL);
    let literal = parse_template(LITERAL_TMPL);
    let banner = banner(spec);

    let mut kinds: Vec<_> = spec
        .operand_kinds()
        .iter()
        .filter(|k| !is_base_kind(spec, &k.kind))
        .collect();
    kinds.sort_by(|a, b| a.kind.cmp(&b.kind));

    kinds
        .into_iter()
        .map(|kind| {
            let type_name = sanitize_identifier(&kind.kind, "").expect("non-empty kind");
            let mut ctx = Context::new();
            ctx.set("banner", banner.as_str())
                .set("kind", kind.kind.as_str())
                .set("type_name", type_name.as_str());
            let source_text = match kind.category {
                Category::ValueEnum => {
                    let variants = kind
                        .enumerants()
                        .iter()
                        .map(|e| {
                            let (_, push, types) = param_parts(spec, &e.parameters, "out");
                            let has = !types.is_empty();
                            let binds = (0..types.len())
                                .map(|i| format!("p{i}"))
                                .collect::<Vec<_>>()
                                .join(", ");
                            Context::new()
                                .with("variant", sanitize_identifier(&e.name, "").unwrap())
                                .with("enumerant", e.name.as_str())
                                .with("value", e.value.to_string())
                                .with(
                                    "fields",
                                    if has {
                                        format!("({})", types.join(", "))
                                    } else {
                                        String::new()
                                    },
                                )
                                .with("ignore", if has { "(..)" } else { "" })
                                .with(
                                    "bind",
                                    if has {
                                        format!("({binds})")
                                    } else {
                                        String::new()
                                    },
                                )
                                .with("push", push)
                        })
                        .collect();
                    ctx.set_list("variants", variants);
                    render(&value_enum, &ctx)
                }
                Category::BitEnum => {
                    let mut flags = Vec::new();
                    let mut param_flags = Vec::new();
                    let mut names = Vec::new();
                    for e in kind.enumerants() {
                        let value = format!("{:#x}", e.value);
                        names.push(
                            Context::new()
                                .with("enumerant", e.name.as_str())
                                .with("value", value.as_str()),
                        );
                        if e.parameters.is_empty() {
                            flags.push(
                                Context::new()
                                    .with("variant", sanitize_identifier(&e.name, "").unwrap())
                                    .with("value", value),
                            );
                        } else {
                            let (args, push, _) = param_parts(spec, &e.parameters, "&mut p");
                            param_flags.push(
                                Context::new()
                                    .with(
                                        "method",
                                        format!(
                                            "with_{}",
                                            snake_case(&e.name).trim_end_matches('_')
                                        ),
                                    )
                                    .with("value", value)
                                    .with("args", args)
                                    .with("push", push),
                            );
                        }
                    }
                    ctx.set_list("flags", flags)
                        .set_list("param_flags", param_flags)
                        .set_list("names", names);
                    render(&bit_enum, &ctx)
                }
                Category::Composite => {
                    let bases = kind
                        .bases
                        .iter()
                        .flatten()
                        .enumerate()
                        .map(|(i, b)| {
                            Context::new()
                                .with("ty", kind_rust_type(spec, b))
                                .with("index", i.to_string())
                        })
                        .collect();
                    ctx.set_list("bases", bases);
                    render(&composite, &ctx)
                }
                Category::Literal | Category::Id => render(&literal, &ctx),
            };
            GeneratedArtifact {
                logical_name: type_name,
                source_text,
                category: ArtifactCategory::OperandKind,
            }
        })
        .collect()
}

/// Name and value maps for one enum operand kind.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnumMap {
    pub name_to_value: HashMap<String, u32>,
    /// Aliases resolve to the first name in file order.
    pub value_to_name: BTreeMap<u32, String>,
    /// `(name, value)` in file order.
    pub ordered: Vec<(String, u32)>,
}

/// Lookup tables shared by the assembler and disassembler.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MapperTables {
    pub name_to_opcode: HashMap<String, u16>,
    pub opcode_to_def: BTreeMap<u16, InstructionDef>,
    pub enumerants: BTreeMap<String, EnumMap>,
    pub ext_name_to_number: HashMap<String, u32>,
    pub ext_number_to_name: BTreeMap<u32, String>,
}

impl MapperTables {
    pub fn opcode(&self, name: &str) -> Option<u16> {
        self.name_to_opcode.get(name).copied()
    }

    pub fn def(&self, opcode: u16) -> Option<&InstructionDef> {
        self.opcode_to_def.get(&opcode)
    }

    pub fn enum_value(&self, kind: &str, name: &str) -> Option<u32> {
        self.enumerants.get(kind)?.name_to_value.get(name).copied()
    }

    pub fn enum_name(&self, kind: &str, value: u32) -> Option<&str> {
        self.enumerants
            .get(kind)?
            .value_to_name
            .get(&value)
            .map(String::as_str)
    }
}

/// Builds the mapper tables. Instructions sharing an opcode must have the
/// same operand layout (vendor aliases); the first one in file order is
/// what the opcode decodes to.
pub fn generate_mapper_tables(
    spec: &GrammarSpec,
    ext: &ExtInstGrammar,
) -> Result<MapperTables, GenError> {
    let mut tables = MapperTables::default();
    for inst in spec.instructions() {
        tables.name_to_opcode.insert(inst.name.clone(), inst.opcode);
        match tables.opcode_to_def.get(&inst.opcode) {
            Some(first) if first.operands != inst.operands => {
                return Err(GenError::DuplicateOpcode {
                    opcode: inst.opcode,
                    first: first.name.clone(),
                    second: inst.name.clone(),
                })
            }
            Some(_) => {}
            None => {
                tables.opcode_to_def.insert(inst.opcode, inst.clone());
            }
        }
    }
    for kind in spec.operand_kinds().iter().filter(|k| k.category.is_enum()) {
        let mut map = EnumMap::default();
        for e in kind.enumerants() {
            map.name_to_value.insert(e.name.clone(), e.value);
            map.value_to_name
                .entry(e.value)
                .or_insert_with(|| e.name.clone());
            map.ordered.push((e.name.clone(), e.value));
        }
        tables.enumerants.insert(kind.kind.clone(), map);
    }
    for e in ext.instructions() {
        if tables
            .ext_number_to_name
            .insert(e.opcode, e.name.clone())
            .is_some()
        {
            return Err(GenError::DuplicateExtInst { number: e.opcode });
        }
        tables.ext_name_to_number.insert(e.name.clone(), e.opcode);
    }
    Ok(tables)
}

/// Mapper tables rendered as static Rust data.
pub fn generate_mapper_artifacts(
    spec: &GrammarSpec,
    ext: &ExtInstGrammar,
    ext_set_name: &str,
) -> Result<Vec<GeneratedArtifact>, GenError> {
    // Validates opcode aliasing before anything is emitted.
    generate_mapper_tables(spec, ext)?;
    let banner = banner(spec);

    let rows = sorted_instructions(spec)
        .into_iter()
        .map(|i| {
            Context::new()
                .with("name", i.name.as_str())
                .with("opcode", i.opcode.to_string())
        })
        .collect();
    let mut ctx = Context::new();
    ctx.set("banner", banner.as_str()).set_list("rows", rows);
    let instructions = render(&parse_template(MAPPER_INSTRUCTIONS_TMPL), &ctx);

    let mut kinds: Vec<_> = spec
        .operand_kinds()
        .iter()
        .filter(|k| k.category.is_enum())
        .collect();
    kinds.sort_by(|a, b| a.kind.cmp(&b.kind));
    let rows = kinds
        .into_iter()
        .flat_map(|k| {
            k.enumerants().iter().map(move |e| {
                Context::new()
                    .with("kind", k.kind.as_str())
                    .with("name", e.name.as_str())
                    .with("value", e.value.to_string())
            })
        })
        .collect();
    let mut ctx = Context::new();
    ctx.set("banner", banner.as_str()).set_list("rows", rows);
    let enumerants = render(&parse_template(MAPPER_ENUMERANTS_TMPL), &ctx);

    let mut ext_rows: Vec<_> = ext.instructions().iter().collect();
    ext_rows.sort_by_key(|e| e.opcode);
    let rows = ext_rows
        .into_iter()
        .map(|e| {
            Context::new()
                .with("name", e.name.as_str())
                .with("number", e.opcode.to_string())
        })
        .collect();
    let mut ctx = Context::new();
    ctx.set("banner", banner.as_str())
        .set("set", ext_set_name)
        .set_list("rows", rows);
    let extinst = render(&parse_template(MAPPER_EXTINST_TMPL), &ctx);

    let ext_logical =
        sanitize_identifier(&ext_set_name.replace('.', ""), "").map(|s| format!("{s}Map"))?;
    Ok(vec![
        GeneratedArtifact {
            logical_name: "InstructionMap".into(),
            source_text: instructions,
            category: ArtifactCategory::MapperTable,
        },
        GeneratedArtifact {
            logical_name: "EnumerantMap".into(),
            source_text: enumerants,
            category: ArtifactCategory::MapperTable,
        },
        GeneratedArtifact {
            logical_name: ext_logical,
            source_text: extinst,
            category: ArtifactCategory::MapperTable,
        },
    ])
}

/// Every artifact for a grammar pair, in a stable order: instructions,
/// then operand kinds, then mappers.
pub fn generate_all(
    spec: &GrammarSpec,
    ext: &ExtInstGrammar,
    ext_set_name: &str,
) -> Result<Vec<GeneratedArtifact>, GenError> {
    let mut all = generate_instruction_definitions(spec);
    all.extend(generate_operand_kind_definitions(spec));
    all.extend(generate_mapper_artifacts(spec, ext, ext_set_name)?);
    Ok(all)
}

/// Writes each artifact under `root` and returns the written paths.
/// Files whose contents are unchanged are left untouched.
pub fn write_artifacts(root: &Path, artifacts: &[GeneratedArtifact]) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = root.join(a.relative_path());
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let unchanged = fs::read_to_string(&path).is_ok_and(|old| old == a.source_text);
        if !unchanged {
            fs::write(&path, &a.source_text)?;
        }
        written.push(path);
    }
    Ok(written)
}
