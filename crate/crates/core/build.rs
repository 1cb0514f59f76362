use std::fmt::Write as _;
use std::path::PathBuf;
use std::{env, fs};

use spvkit_grammar::snapshots::{OPENCL_SET, UNIFIED1};
use spvkit_grammar::{generate_all, write_artifacts, ArtifactCategory};

fn main() {
    let out = PathBuf::from(env::var_os("OUT_DIR").unwrap());
    let core = UNIFIED1.core();
    let ext = UNIFIED1.opencl();
    let artifacts = generate_all(&core, &ext, OPENCL_SET).expect("grammar generates");
    write_artifacts(&out, &artifacts).expect("write generated sources");

    let mut agg = String::from("// @generated aggregator. Do not edit.\n");
    for (category, module, prelude) in [
        (
            ArtifactCategory::Instruction,
            "instructions",
            "use super::kinds::*;\n",
        ),
        (ArtifactCategory::OperandKind, "kinds", ""),
        (ArtifactCategory::MapperTable, "mappers", ""),
    ] {
        writeln!(agg, "pub mod {module} {{").unwrap();
        writeln!(
            agg,
            "#[allow(unused_imports)]\nuse crate::operand::*;\n{prelude}"
        )
        .unwrap();
        for a in artifacts.iter().filter(|a| a.category == category) {
            let rel = a.relative_path();
            let rel = rel.strip_prefix("generated").unwrap();
            writeln!(agg, "include!(\"{}\");", rel.display()).unwrap();
        }
        agg.push_str("}\n");
    }
    let path = out.join("generated").join("mod.rs");
    if fs::read_to_string(&path).ok().as_deref() != Some(agg.as_str()) {
        fs::write(&path, agg).unwrap();
    }
    println!("cargo:rerun-if-changed=build.rs");
}
