//! Scoped, chainable module construction.
//!
//! A [`Module`] owns the id counter and the module-level sections. Functions
//! and blocks are built through borrowing scopes:
//!
//! ```
//! use spvkit::api::instructions::*;
//! use spvkit::api::kinds::*;
//! use spvkit::builder::Module;
//!
//! let mut m = Module::new(1, 2, spvkit::DEFAULT_GENERATOR, 0).unwrap();
//! m.add(OpCapability::new(Capability::Kernel))?
//!     .add(OpCapability::new(Capability::Addresses))?;
//! let bytes = m.to_bytes()?;
//! assert_eq!(bytes.len(), 4 * (5 + 4));
//! # Ok::<(), spvkit::builder::BuildError>(())
//! ```

use std::collections::HashMap;
use std::io::Write;

use crate::codec::{
    encode_header, encode_instruction, words_to_bytes, CodecError, ModuleHeader, Word,
};
use crate::grammar::Grammar;
use crate::layout::{Placement, Section, STORAGE_CLASS_FUNCTION};
use crate::op;
use crate::operand::{Id, Instruction, NumberWidth, Operand};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("unsupported SPIR-V version {0}.{1}")]
    UnsupportedVersion(u8, u8),
    #[error("id space exhausted")]
    IdsExhausted,
    #[error("{opname} cannot be added at {scope} scope")]
    WrongScope { opname: String, scope: &'static str },
    #[error("{0} is already defined")]
    DuplicateId(Id),
    #[error("a module has at most one OpMemoryModel")]
    DuplicateMemoryModel,
    #[error("block {label} is already terminated; cannot add {opname}")]
    AfterTerminator { label: Id, opname: String },
    #[error("function parameters must precede the first block")]
    ParameterAfterBlock,
    #[error("{id} is used by {user} but never defined")]
    UndefinedId { id: Id, user: String },
    #[error("block {0} has no terminator")]
    UnterminatedBlock(Id),
    #[error("cannot resolve the literal width for {opname}")]
    UnresolvedWidth { opname: String },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("write failed: {0}")]
    Io(String),
}

#[derive(Debug, Clone)]
struct Block {
    label: Id,
    insts: Vec<Instruction>,
}

#[derive(Debug, Clone)]
struct Function {
    def: Instruction,
    params: Vec<Instruction>,
    blocks: Vec<Block>,
}

/// What the registry knows about an id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Definition {
    pub opcode: u16,
    pub result_type: Option<Id>,
}

/// Module scope: header fields, section buckets, functions, ids.
#[derive(Debug, Clone)]
pub struct Module {
    major: u8,
    minor: u8,
    generator: Word,
    schema: Word,
    sections: Vec<Vec<Instruction>>,
    functions: Vec<Function>,
    last_id: u32,
    registry: HashMap<Id, Definition>,
}

fn grammar() -> &'static Grammar {
    Grammar::unified()
}

fn opname(opcode: u16) -> String {
    grammar().display_name(opcode)
}

pub fn check_version(major: u8, minor: u8) -> Result<(), BuildError> {
    if major == 1 && minor <= 6 {
        Ok(())
    } else {
        Err(BuildError::UnsupportedVersion(major, minor))
    }
}

impl Module {
    /// A new empty module. The bound is computed when serializing.
    pub fn new(major: u8, minor: u8, generator: Word, schema: Word) -> Result<Self, BuildError> {
        check_version(major, minor)?;
        Ok(Module {
            major,
            minor,
            generator,
            schema,
            sections: vec![Vec::new(); Section::ALL.len()],
            functions: Vec::new(),
            last_id: 0,
            registry: HashMap::new(),
        })
    }

    pub fn try_next_id(&mut self) -> Result<Id, BuildError> {
        if self.last_id >= u32::MAX - 1 {
            return Err(BuildError::IdsExhausted);
        }
        self.last_id += 1;
        Ok(Id(self.last_id))
    }

    /// Allocates a fresh id.
    ///
    /// # Panics
    ///
    /// When all `2^32 - 2` ids are used; see [`Module::try_next_id`].
    pub fn next_id(&mut self) -> Id {
        self.try_next_id().expect("id space exhausted")
    }

    pub fn definition(&self, id: Id) -> Option<Definition> {
        self.registry.get(&id).copied()
    }

    pub fn defined_ids(&self) -> impl Iterator<Item = Id> + '_ {
        self.registry.keys().copied()
    }

    pub fn max_id(&self) -> u32 {
        self.last_id
    }

    pub fn section(&self, s: Section) -> &[Instruction] {
        &self.sections[s.index()]
    }

    fn register(&mut self, id: Id, inst: &Instruction) -> Result<(), BuildError> {
        if id.0 == 0 || self.registry.contains_key(&id) {
            return Err(BuildError::DuplicateId(id));
        }
        self.registry.insert(
            id,
            Definition {
                opcode: inst.opcode,
                result_type: inst.result_type,
            },
        );
        self.last_id = self.last_id.max(id.0);
        Ok(())
    }

    fn register_result(&mut self, inst: &Instruction) -> Result<(), BuildError> {
        match inst.result {
            Some(id) => self.register(id, inst),
            None => Ok(()),
        }
    }

    fn push_section(&mut self, section: Section, inst: Instruction) -> Result<(), BuildError> {
        if section == Section::MemoryModel && !self.sections[section.index()].is_empty() {
            return Err(BuildError::DuplicateMemoryModel);
        }
        self.register_result(&inst)?;
        self.sections[section.index()].push(inst);
        Ok(())
    }

    /// Module-level section for `inst` when added outside any block, or
    /// `None` when it belongs in a function or block.
    fn module_section(inst: &Instruction) -> Option<Section> {
        match grammar().placement(inst.opcode) {
            Placement::Module(s) => Some(s),
            Placement::Anywhere | Placement::Undef => Some(Section::Globals),
            Placement::Variable => match inst.operands.first() {
                Some(Operand::Literal(STORAGE_CLASS_FUNCTION)) => None,
                _ => Some(Section::Globals),
            },
            Placement::Parameter | Placement::Block | Placement::Managed => None,
        }
    }

    /// Adds a module-level instruction, routed to its section.
    pub fn add(&mut self, inst: impl Into<Instruction>) -> Result<&mut Self, BuildError> {
        let inst = inst.into();
        match Self::module_section(&inst) {
            Some(section) => self.push_section(section, inst)?,
            None => {
                return Err(BuildError::WrongScope {
                    opname: opname(inst.opcode),
                    scope: "module",
                })
            }
        }
        Ok(self)
    }

    /// Starts a function from its `OpFunction` instruction. The matching
    /// `OpFunctionEnd` is emitted automatically.
    pub fn function(
        &mut self,
        def: impl Into<Instruction>,
    ) -> Result<FunctionScope<'_>, BuildError> {
        let def = def.into();
        if def.opcode != op::FUNCTION {
            return Err(BuildError::WrongScope {
                opname: opname(def.opcode),
                scope: "function header",
            });
        }
        self.register_result(&def)?;
        self.functions.push(Function {
            def,
            params: Vec::new(),
            blocks: Vec::new(),
        });
        let index = self.functions.len() - 1;
        Ok(FunctionScope {
            module: self,
            index,
        })
    }

    /// Width and signedness for every `OpTypeInt` and `OpTypeFloat`.
    fn scalar_types(&self) -> HashMap<Id, NumberWidth> {
        scalar_types(self.sections[Section::Globals.index()].iter())
    }

    /// Flattens the module into logical-layout order after checking that
    /// every used id is defined and every block is terminated. Literal
    /// numbers are returned in their canonical binary form.
    pub fn to_instructions(&self) -> Result<Vec<Instruction>, BuildError> {
        let mut out: Vec<Instruction> = self.sections.iter().flatten().cloned().collect();
        let (decls, defs): (Vec<&Function>, Vec<&Function>) =
            self.functions.iter().partition(|f| f.blocks.is_empty());
        for f in decls.into_iter().chain(defs) {
            out.push(f.def.clone());
            out.extend(f.params.iter().cloned());
            for b in &f.blocks {
                match b.insts.last() {
                    Some(last) if grammar().is_terminator(last.opcode) => {}
                    _ => return Err(BuildError::UnterminatedBlock(b.label)),
                }
                out.push(Instruction::new(op::LABEL, None, Some(b.label), Vec::new()));
                out.extend(b.insts.iter().cloned());
            }
            out.push(Instruction::new(op::FUNCTION_END, None, None, Vec::new()));
        }
        for inst in &out {
            for id in inst.used_ids() {
                if !self.registry.contains_key(&id) {
                    return Err(BuildError::UndefinedId {
                        id,
                        user: opname(inst.opcode),
                    });
                }
            }
        }
        canonicalize_numbers(&mut out, &self.scalar_types(), &self.registry)?;
        Ok(out)
    }

    pub fn header(&self) -> ModuleHeader {
        ModuleHeader::new(
            self.major,
            self.minor,
            self.generator,
            self.last_id + 1,
            self.schema,
        )
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, BuildError> {
        let insts = self.to_instructions()?;
        encode_stream(&self.header(), &insts)
    }

    /// Writes the binary to `sink` and returns the number of bytes.
    pub fn serialize(&self, sink: &mut impl Write) -> Result<usize, BuildError> {
        let bytes = self.to_bytes()?;
        sink.write_all(&bytes)
            .map_err(|e| BuildError::Io(e.to_string()))?;
        Ok(bytes.len())
    }
}

fn scalar_types<'a>(insts: impl Iterator<Item = &'a Instruction>) -> HashMap<Id, NumberWidth> {
    insts
        .filter_map(|i| {
            let width = match i.operands.first() {
                Some(Operand::Literal(w)) => *w,
                _ => return None,
            };
            match i.opcode {
                op::TYPE_INT => {
                    let signed = matches!(i.operands.get(1), Some(Operand::Literal(1)));
                    Some((i.result?, (width, signed)))
                }
                op::TYPE_FLOAT => Some((i.result?, (width, false))),
                _ => None,
            }
        })
        .collect()
}

/// Width of the `LiteralNumber` operands of `inst`: the result type for
/// constants, the selector's type for `OpSwitch`.
fn number_width(
    inst: &Instruction,
    scalars: &HashMap<Id, NumberWidth>,
    value_type: impl Fn(Id) -> Option<Id>,
) -> Option<NumberWidth> {
    let ty = if inst.opcode == op::SWITCH {
        match inst.operands.first() {
            Some(Operand::Id(sel)) => value_type(*sel)?,
            _ => return None,
        }
    } else {
        inst.result_type?
    };
    scalars.get(&ty).copied()
}

fn canonicalize_numbers(
    insts: &mut [Instruction],
    scalars: &HashMap<Id, NumberWidth>,
    registry: &HashMap<Id, Definition>,
) -> Result<(), BuildError> {
    for inst in insts.iter_mut().filter(|i| i.has_numbers()) {
        let (w, signed) = number_width(inst, scalars, |v| registry.get(&v)?.result_type)
            .ok_or_else(|| BuildError::UnresolvedWidth {
                opname: opname(inst.opcode),
            })?;
        for o in &mut inst.operands {
            if let Operand::Number(n) = o {
                *n = n.canonical(w, signed)?;
            }
        }
    }
    Ok(())
}

/// Encodes an already ordered instruction stream. The header bound is
/// raised to cover every id in the stream.
pub fn encode_stream(header: &ModuleHeader, insts: &[Instruction]) -> Result<Vec<u8>, BuildError> {
    let scalars = scalar_types(insts.iter());
    let value_types: HashMap<Id, Id> = insts
        .iter()
        .filter_map(|i| Some((i.result?, i.result_type?)))
        .collect();
    let mut max_id = 0;
    let mut body = Vec::new();
    for inst in insts {
        for id in inst.result.iter().copied().chain(inst.used_ids()) {
            max_id = max_id.max(id.0);
        }
        let width = if inst.has_numbers() {
            let w = number_width(inst, &scalars, |v| value_types.get(&v).copied());
            if w.is_none() {
                return Err(BuildError::UnresolvedWidth {
                    opname: opname(inst.opcode),
                });
            }
            w
        } else {
            None
        };
        encode_instruction(&inst.encode(width)?, &mut body)?;
    }
    let mut header = *header;
    header.bound = header.bound.max(max_id.saturating_add(1));
    let mut words = encode_header(&header)?.to_vec();
    words.extend(body);
    Ok(words_to_bytes(&words))
}

/// Function scope: parameters, then blocks.
#[derive(Debug)]
pub struct FunctionScope<'m> {
    module: &'m mut Module,
    index: usize,
}

impl<'m> FunctionScope<'m> {
    pub fn next_id(&mut self) -> Id {
        self.module.next_id()
    }

    pub fn module(&mut self) -> &mut Module {
        self.module
    }

    pub fn result(&self) -> Option<Id> {
        self.module.functions[self.index].def.result
    }

    /// Adds an `OpFunctionParameter`, or routes a module-level instruction
    /// to its section.
    pub fn add(&mut self, inst: impl Into<Instruction>) -> Result<&mut Self, BuildError> {
        let inst = inst.into();
        match grammar().placement(inst.opcode) {
            Placement::Parameter => {
                if !self.module.functions[self.index].blocks.is_empty() {
                    return Err(BuildError::ParameterAfterBlock);
                }
                self.module.register_result(&inst)?;
                self.module.functions[self.index].params.push(inst);
            }
            _ => match Module::module_section(&inst) {
                Some(s) => self.module.push_section(s, inst)?,
                None => {
                    return Err(BuildError::WrongScope {
                        opname: opname(inst.opcode),
                        scope: "function",
                    })
                }
            },
        }
        Ok(self)
    }

    /// Appends a block headed by `OpLabel label`.
    pub fn begin_block(&mut self, label: Id) -> Result<BlockScope<'_>, BuildError> {
        let inst = Instruction::new(op::LABEL, None, Some(label), Vec::new());
        self.module.register(label, &inst)?;
        let blocks = &mut self.module.functions[self.index].blocks;
        blocks.push(Block {
            label,
            insts: Vec::new(),
        });
        let block = blocks.len() - 1;
        Ok(BlockScope {
            module: self.module,
            function: self.index,
            block,
        })
    }
}

/// Block scope: a label followed by instructions, ending in one terminator.
#[derive(Debug)]
pub struct BlockScope<'f> {
    module: &'f mut Module,
    function: usize,
    block: usize,
}

impl BlockScope<'_> {
    pub fn next_id(&mut self) -> Id {
        self.module.next_id()
    }

    pub fn module(&mut self) -> &mut Module {
        self.module
    }

    pub fn label(&self) -> Id {
        self.module.functions[self.function].blocks[self.block].label
    }

    pub fn is_terminated(&self) -> bool {
        self.module.functions[self.function].blocks[self.block]
            .insts
            .last()
            .is_some_and(|i| grammar().is_terminator(i.opcode))
    }

    /// Appends a block instruction. Module-level instructions are routed to
    /// their section instead.
    pub fn add(&mut self, inst: impl Into<Instruction>) -> Result<&mut Self, BuildError> {
        let inst = inst.into();
        let local = match grammar().placement(inst.opcode) {
            Placement::Block | Placement::Anywhere | Placement::Undef => true,
            Placement::Variable => Module::module_section(&inst).is_none(),
            Placement::Module(_) => false,
            Placement::Parameter | Placement::Managed => {
                return Err(BuildError::WrongScope {
                    opname: opname(inst.opcode),
                    scope: "block",
                })
            }
        };
        if !local {
            let section = Module::module_section(&inst).expect("module-level placement");
            self.module.push_section(section, inst)?;
            return Ok(self);
        }
        if self.is_terminated() {
            return Err(BuildError::AfterTerminator {
                label: self.label(),
                opname: opname(inst.opcode),
            });
        }
        self.module.register_result(&inst)?;
        self.module.functions[self.function].blocks[self.block]
            .insts
            .push(inst);
        Ok(self)
    }
}
