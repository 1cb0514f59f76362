//! SPIR-V machine-readable grammar: loading, capability analysis and
//! Rust source generation.

pub mod deps;
pub mod generator;
pub mod model;
pub mod snapshots;
pub mod template;

pub use deps::{capability_dependency_graph, DependencyReport};
pub use generator::{
    generate_all, generate_instruction_definitions, generate_mapper_artifacts,
    generate_mapper_tables, generate_operand_kind_definitions, is_base_kind, sanitize_identifier,
    write_artifacts, ArtifactCategory, EnumMap, GenError, GeneratedArtifact, MapperTables,
};
pub use model::{
    load_core_grammar, load_extended_grammar, Category, EnumerantDef, ExtInstDef, ExtInstGrammar,
    GrammarSpec, InstructionDef, InstructionKey, OperandKindDef, OperandSlot, Quantifier,
    SPIRV_MAGIC,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("grammar JSON is malformed at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("grammar does not match the expected schema: {0}")]
    Schema(String),
    #[error("no {what} named `{key}`")]
    NotFound { what: &'static str, key: String },
}
