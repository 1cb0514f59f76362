//! Grammar files vendored with the crate.
//!
//! `V1_2` is the SPIR-V 1.2 grammar (revision 2) and `UNIFIED1` the
//! unified grammar for SPIR-V 1.6 (revision 1), both from the Khronos
//! SPIRV-Headers repository.

use std::fs;
use std::path::Path;

use crate::model::{load_core_grammar, load_extended_grammar, ExtInstGrammar, GrammarSpec};
use crate::GrammarError;

pub const CORE_FILE: &str = "spirv.core.grammar.json";
pub const OPENCL_FILE: &str = "extinst.opencl.std.100.grammar.json";
pub const OPENCL_SET: &str = "OpenCL.std";

/// Raw JSON of one grammar snapshot.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot {
    pub label: &'static str,
    pub core_json: &'static str,
    pub opencl_json: &'static str,
}

pub const V1_2: Snapshot = Snapshot {
    label: "1.2",
    core_json: include_str!("../grammars/1.2/spirv.core.grammar.json"),
    opencl_json: include_str!("../grammars/1.2/extinst.opencl.std.100.grammar.json"),
};

pub const UNIFIED1: Snapshot = Snapshot {
    label: "unified1",
    core_json: include_str!("../grammars/unified1/spirv.core.grammar.json"),
    opencl_json: include_str!("../grammars/unified1/extinst.opencl.std.100.grammar.json"),
};

impl Snapshot {
    pub fn core(&self) -> GrammarSpec {
        load_core_grammar(self.core_json).expect("vendored core grammar loads")
    }

    pub fn opencl(&self) -> ExtInstGrammar {
        load_extended_grammar(self.opencl_json).expect("vendored OpenCL grammar loads")
    }
}

/// Loads `spirv.core.grammar.json` and the OpenCL extended set from a
/// directory laid out like the SPIRV-Headers `include/spirv/<ver>` folders.
pub fn load_dir(dir: &Path) -> Result<(GrammarSpec, ExtInstGrammar), LoadDirError> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|source| LoadDirError::Io {
            path: path.display().to_string(),
            reason: source.to_string(),
        })
    };
    let core =
        load_core_grammar(&read(CORE_FILE)?).map_err(|e| LoadDirError::Grammar(CORE_FILE, e))?;
    let ext = load_extended_grammar(&read(OPENCL_FILE)?)
        .map_err(|e| LoadDirError::Grammar(OPENCL_FILE, e))?;
    Ok((core, ext))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoadDirError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{0}: {1}")]
    Grammar(&'static str, GrammarError),
}
