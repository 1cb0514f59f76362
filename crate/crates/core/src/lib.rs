//! Build, assemble, disassemble and validate SPIR-V modules.
//!
//! The typed instruction and operand-kind API under [`api`] is generated
//! at build time from the vendored Khronos grammar.

pub mod asm;
pub mod builder;
pub mod codec;
pub mod dis;
pub mod grammar;
pub mod layout;
pub mod operand;
pub mod parse;
pub mod validate;

/// Generated instruction types, operand kinds and mapper tables.
#[allow(clippy::all, non_snake_case, non_upper_case_globals)]
pub mod api {
    include!(concat!(env!("OUT_DIR"), "/generated/mod.rs"));
}

pub use codec::{ModuleHeader, RawInstruction, Word, DEFAULT_GENERATOR};
pub use grammar::Grammar;
pub use operand::{Id, Instruction, IntoOperands, LiteralNumber, Operand, TypedInstruction};

/// Opcodes the toolkit treats specially.
pub(crate) mod op {
    use crate::api::instructions::*;
    use crate::operand::TypedInstruction;

    pub const NAME: u16 = OpName::OPCODE;
    pub const EXT_INST_IMPORT: u16 = OpExtInstImport::OPCODE;
    pub const MEMORY_MODEL: u16 = OpMemoryModel::OPCODE;
    pub const ENTRY_POINT: u16 = OpEntryPoint::OPCODE;
    pub const CAPABILITY: u16 = OpCapability::OPCODE;
    #[cfg(test)]
    pub const EXT_INST: u16 = OpExtInst::OPCODE;
    #[cfg(test)]
    pub const CONSTANT: u16 = OpConstant::OPCODE;
    pub const TYPE_INT: u16 = OpTypeInt::OPCODE;
    pub const TYPE_FLOAT: u16 = OpTypeFloat::OPCODE;
    pub const FUNCTION: u16 = OpFunction::OPCODE;
    pub const FUNCTION_END: u16 = OpFunctionEnd::OPCODE;
    pub const LABEL: u16 = OpLabel::OPCODE;
    pub const SWITCH: u16 = OpSwitch::OPCODE;
}
