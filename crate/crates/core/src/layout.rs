//! Logical layout sections and where each instruction may be placed.
//!
//! Placement is derived from the grammar's `class` attribute, with a small
//! table of per-instruction overrides. Grammars that predate the attribute
//! fall back to name prefixes.

use spvkit_grammar::InstructionDef;

/// Module-level sections in the order they are serialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Section {
    Capabilities,
    Extensions,
    ExtInstImports,
    MemoryModel,
    EntryPoints,
    ExecutionModes,
    DebugStrings,
    DebugNames,
    DebugModuleProcessed,
    Annotations,
    Globals,
}

impl Section {
    pub const ALL: [Section; 11] = [
        Section::Capabilities,
        Section::Extensions,
        Section::ExtInstImports,
        Section::MemoryModel,
        Section::EntryPoints,
        Section::ExecutionModes,
        Section::DebugStrings,
        Section::DebugNames,
        Section::DebugModuleProcessed,
        Section::Annotations,
        Section::Globals,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Coarse grouping used when printing blank lines between sections.
    pub fn group(self) -> Group {
        match self {
            Section::DebugStrings | Section::DebugNames | Section::DebugModuleProcessed => {
                Group::Debug
            }
            Section::Annotations => Group::Annotations,
            Section::Globals => Group::Globals,
            _ => Group::ModeSetting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    ModeSetting,
    Debug,
    Annotations,
    Globals,
    Functions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placement {
    Module(Section),
    /// `OpFunctionParameter`.
    Parameter,
    Block,
    /// Legal in any scope (`OpNop`, `OpLine`, `OpNoLine`).
    Anywhere,
    /// `OpVariable`: a block when the storage class is `Function`,
    /// otherwise the globals section.
    Variable,
    /// `OpUndef`: globals at module scope, otherwise the block.
    Undef,
    /// Emitted by the builder itself (`OpFunction`, `OpFunctionEnd`,
    /// `OpLabel`).
    Managed,
}

/// `Function` storage class.
pub const STORAGE_CLASS_FUNCTION: u32 = 7;

const BY_NAME: &[(&str, Placement)] = &[
    ("OpCapability", Placement::Module(Section::Capabilities)),
    ("OpExtension", Placement::Module(Section::Extensions)),
    (
        "OpExtInstImport",
        Placement::Module(Section::ExtInstImports),
    ),
    ("OpMemoryModel", Placement::Module(Section::MemoryModel)),
    ("OpEntryPoint", Placement::Module(Section::EntryPoints)),
    (
        "OpExecutionMode",
        Placement::Module(Section::ExecutionModes),
    ),
    (
        "OpExecutionModeId",
        Placement::Module(Section::ExecutionModes),
    ),
    ("OpString", Placement::Module(Section::DebugStrings)),
    ("OpSource", Placement::Module(Section::DebugStrings)),
    (
        "OpSourceContinued",
        Placement::Module(Section::DebugStrings),
    ),
    (
        "OpSourceExtension",
        Placement::Module(Section::DebugStrings),
    ),
    ("OpName", Placement::Module(Section::DebugNames)),
    ("OpMemberName", Placement::Module(Section::DebugNames)),
    (
        "OpModuleProcessed",
        Placement::Module(Section::DebugModuleProcessed),
    ),
    ("OpLine", Placement::Anywhere),
    ("OpNoLine", Placement::Anywhere),
    ("OpNop", Placement::Anywhere),
    ("OpUndef", Placement::Undef),
    ("OpVariable", Placement::Variable),
    ("OpFunction", Placement::Managed),
    ("OpFunctionEnd", Placement::Managed),
    ("OpLabel", Placement::Managed),
    ("OpFunctionParameter", Placement::Parameter),
    ("OpAsmTargetINTEL", Placement::Module(Section::Globals)),
    ("OpAsmINTEL", Placement::Module(Section::Globals)),
    (
        "OpAliasDomainDeclINTEL",
        Placement::Module(Section::Globals),
    ),
    ("OpAliasScopeDeclINTEL", Placement::Module(Section::Globals)),
    (
        "OpAliasScopeListDeclINTEL",
        Placement::Module(Section::Globals),
    ),
];

const BY_CLASS: &[(&str, Placement)] = &[
    ("Annotation", Placement::Module(Section::Annotations)),
    ("Type-Declaration", Placement::Module(Section::Globals)),
    ("Constant-Creation", Placement::Module(Section::Globals)),
];

/// Used when the class is missing or is one of the catch-all classes.
const BY_PREFIX: &[(&str, Placement)] = &[
    ("OpType", Placement::Module(Section::Globals)),
    ("OpConstant", Placement::Module(Section::Globals)),
    ("OpSpecConstant", Placement::Module(Section::Globals)),
    ("OpDecorat", Placement::Module(Section::Annotations)),
    ("OpMemberDecorate", Placement::Module(Section::Annotations)),
    ("OpGroupDecorate", Placement::Module(Section::Annotations)),
    (
        "OpGroupMemberDecorate",
        Placement::Module(Section::Annotations),
    ),
];

const CATCH_ALL_CLASSES: &[&str] = &["@exclude", "Reserved"];

pub fn placement_of(def: &InstructionDef) -> Placement {
    if let Some((_, p)) = BY_NAME.iter().find(|(n, _)| *n == def.name) {
        return *p;
    }
    match def.class.as_deref() {
        Some(class) if !CATCH_ALL_CLASSES.contains(&class) => BY_CLASS
            .iter()
            .find(|(c, _)| *c == class)
            .map_or(Placement::Block, |(_, p)| *p),
        _ => BY_PREFIX
            .iter()
            .find(|(prefix, _)| def.name.starts_with(prefix))
            .map_or(Placement::Block, |(_, p)| *p),
    }
}

/// Instruction names that end a block.
pub const TERMINATORS: &[&str] = &[
    "OpBranch",
    "OpBranchConditional",
    "OpSwitch",
    "OpReturn",
    "OpReturnValue",
    "OpKill",
    "OpUnreachable",
    "OpTerminateInvocation",
    "OpIgnoreIntersectionKHR",
    "OpTerminateRayKHR",
    "OpEmitMeshTasksEXT",
];
