//! Grammar context shared by the assembler, disassembler and validator.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use spvkit_grammar::snapshots::{self, LoadDirError, Snapshot};
use spvkit_grammar::{
    capability_dependency_graph, generate_mapper_tables, DependencyReport, EnumerantDef,
    ExtInstGrammar, GenError, GrammarError, GrammarSpec, InstructionDef, MapperTables,
    OperandKindDef,
};

use crate::layout::{placement_of, Placement, TERMINATORS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Dir(#[from] LoadDirError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Generate(#[from] GenError),
}

/// A loaded core grammar plus the OpenCL extended set, with lookup tables.
#[derive(Debug)]
pub struct Grammar {
    pub core: GrammarSpec,
    pub opencl: ExtInstGrammar,
    pub tables: MapperTables,
    pub capabilities: DependencyReport,
    placements: HashMap<u16, Placement>,
    terminators: HashSet<u16>,
}

impl Grammar {
    pub fn new(core: GrammarSpec, opencl: ExtInstGrammar) -> Result<Self, LoadError> {
        let tables = generate_mapper_tables(&core, &opencl)?;
        let capabilities = capability_dependency_graph(&core)?;
        let placements = tables
            .opcode_to_def
            .iter()
            .map(|(op, def)| (*op, placement_of(def)))
            .collect();
        let terminators = TERMINATORS
            .iter()
            .filter_map(|n| tables.opcode(n))
            .collect();
        Ok(Grammar {
            core,
            opencl,
            tables,
            capabilities,
            placements,
            terminators,
        })
    }

    fn from_snapshot(s: &Snapshot) -> Self {
        Grammar::new(s.core(), s.opencl()).expect("vendored grammar is consistent")
    }

    /// The vendored unified grammar (SPIR-V 1.6).
    pub fn unified() -> &'static Grammar {
        static G: OnceLock<Grammar> = OnceLock::new();
        G.get_or_init(|| Grammar::from_snapshot(&snapshots::UNIFIED1))
    }

    /// The vendored SPIR-V 1.2 grammar.
    pub fn v1_2() -> &'static Grammar {
        static G: OnceLock<Grammar> = OnceLock::new();
        G.get_or_init(|| Grammar::from_snapshot(&snapshots::V1_2))
    }

    /// Loads `spirv.core.grammar.json` and the OpenCL extended grammar
    /// from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, LoadError> {
        let (core, opencl) = snapshots::load_dir(dir)?;
        Grammar::new(core, opencl)
    }

    pub fn def(&self, opcode: u16) -> Option<&InstructionDef> {
        self.tables.def(opcode)
    }

    pub fn opcode(&self, name: &str) -> Option<u16> {
        self.tables.opcode(name)
    }

    pub fn kind(&self, name: &str) -> Option<&OperandKindDef> {
        self.core.operand_kind(name)
    }

    pub fn enumerant(&self, kind: &str, value: u32) -> Option<&EnumerantDef> {
        self.kind(kind)?.enumerant_by_value(value)
    }

    pub fn placement(&self, opcode: u16) -> Placement {
        self.placements
            .get(&opcode)
            .copied()
            .unwrap_or(Placement::Block)
    }

    pub fn is_terminator(&self, opcode: u16) -> bool {
        self.terminators.contains(&opcode)
    }

    pub fn name(&self, opcode: u16) -> Option<&str> {
        self.def(opcode).map(|d| d.name.as_str())
    }

    /// `Op<n>` style name used in messages when the opcode is unknown.
    pub fn display_name(&self, opcode: u16) -> String {
        self.name(opcode)
            .map_or_else(|| format!("OpUnknown({opcode})"), str::to_string)
    }
}
