//! Modules shared by the integration tests: a handful of fixed shapes and
//! a seeded random builder.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use spvkit::api::instructions::*;
use spvkit::api::kinds::*;
use spvkit::builder::Module;
use spvkit::{Id, Instruction, LiteralNumber, Operand, TypedInstruction, DEFAULT_GENERATOR};

pub fn kernel_header(m: &mut Module, extra: &[Capability]) {
    m.add(OpCapability::new(Capability::Addresses)).unwrap();
    m.add(OpCapability::new(Capability::Kernel)).unwrap();
    for c in extra {
        m.add(OpCapability::new(c.clone())).unwrap();
    }
    m.add(OpMemoryModel::new(
        AddressingModel::Physical64,
        MemoryModel::OpenCL,
    ))
    .unwrap();
}

/// Capability, memory model, one entry point, one empty function.
pub fn minimal_kernel() -> Module {
    let mut m = Module::new(1, 2, DEFAULT_GENERATOR, 0).unwrap();
    kernel_header(&mut m, &[]);
    let void = m.next_id();
    let fnty = m.next_id();
    let main = m.next_id();
    m.add(OpEntryPoint::new(
        ExecutionModel::Kernel,
        main,
        "main".into(),
        vec![],
    ))
    .unwrap();
    m.add(OpTypeVoid::new(void)).unwrap();
    m.add(OpTypeFunction::new(fnty, void, vec![])).unwrap();
    let label = m.next_id();
    let mut f = m
        .function(OpFunction::new(void, main, FunctionControl::None, fnty))
        .unwrap();
    f.begin_block(label).unwrap().add(OpReturn::new()).unwrap();
    m
}

/// `if (a < b) ... else ...` with the branch emitted before either label.
pub fn if_else() -> Module {
    let mut m = Module::new(1, 2, DEFAULT_GENERATOR, 0).unwrap();
    kernel_header(&mut m, &[]);
    let (void, int, bool_, fnty, func) = (
        m.next_id(),
        m.next_id(),
        m.next_id(),
        m.next_id(),
        m.next_id(),
    );
    m.add(OpEntryPoint::new(
        ExecutionModel::Kernel,
        func,
        "select".into(),
        vec![],
    ))
    .unwrap();
    m.add(OpTypeVoid::new(void)).unwrap();
    m.add(OpTypeInt::new(int, 32, 0)).unwrap();
    m.add(OpTypeBool::new(bool_)).unwrap();
    m.add(OpTypeFunction::new(fnty, void, vec![int, int]))
        .unwrap();

    let mut f = m
        .function(OpFunction::new(void, func, FunctionControl::None, fnty))
        .unwrap();
    let (a, b) = (f.next_id(), f.next_id());
    f.add(OpFunctionParameter::new(int, a)).unwrap();
    f.add(OpFunctionParameter::new(int, b)).unwrap();
    f.add(OpName::new(a, "a".into())).unwrap();
    f.add(OpName::new(b, "b".into())).unwrap();
    let entry = f.next_id();
    let if_then = f.next_id();
    let if_else = f.next_id();
    let merge = f.next_id();
    let cmp = f.next_id();
    f.add(OpName::new(if_then, "ifThen".into())).unwrap();
    f.add(OpName::new(if_else, "ifElse".into())).unwrap();
    {
        let mut blk = f.begin_block(entry).unwrap();
        blk.add(OpSLessThan::new(bool_, cmp, a, b)).unwrap();
        blk.add(OpBranchConditional::new(cmp, if_then, if_else, vec![]))
            .unwrap();
    }
    f.begin_block(if_then)
        .unwrap()
        .add(OpBranch::new(merge))
        .unwrap();
    f.begin_block(if_else)
        .unwrap()
        .add(OpBranch::new(merge))
        .unwrap();
    f.begin_block(merge).unwrap().add(OpReturn::new()).unwrap();
    m
}

/// `c[i] = a[i] + b[i]` over global buffers indexed by the invocation id.
pub fn iadd_kernel() -> Module {
    let mut m = Module::new(1, 2, DEFAULT_GENERATOR, 0).unwrap();
    m.add(OpCapability::new(Capability::Addresses)).unwrap();
    m.add(OpCapability::new(Capability::Linkage)).unwrap();
    m.add(OpCapability::new(Capability::Kernel)).unwrap();
    m.add(OpCapability::new(Capability::Int64)).unwrap();
    m.add(OpCapability::new(Capability::Int8)).unwrap();
    m.add(OpMemoryModel::new(
        AddressingModel::Physical64,
        MemoryModel::OpenCL,
    ))
    .unwrap();

    let ids: Vec<Id> = (0..9).map(|_| m.next_id()).collect();
    let [void, int, ulong, v3ulong, ptr_in, ptr_g, fnty, gid_var, kernel] = ids[..] else {
        unreachable!()
    };
    m.add(OpEntryPoint::new(
        ExecutionModel::Kernel,
        kernel,
        "add".into(),
        vec![gid_var],
    ))
    .unwrap();
    m.add(OpName::new(
        gid_var,
        "__spirv_BuiltInGlobalInvocationId".into(),
    ))
    .unwrap();
    m.add(OpDecorate::new(
        gid_var,
        Decoration::BuiltIn(BuiltIn::GlobalInvocationId),
    ))
    .unwrap();
    m.add(OpDecorate::new(gid_var, Decoration::Constant))
        .unwrap();
    m.add(OpTypeVoid::new(void)).unwrap();
    m.add(OpTypeInt::new(int, 32, 0)).unwrap();
    m.add(OpTypeInt::new(ulong, 64, 0)).unwrap();
    m.add(OpTypeVector::new(v3ulong, ulong, 3)).unwrap();
    m.add(OpTypePointer::new(ptr_in, StorageClass::Input, v3ulong))
        .unwrap();
    m.add(OpTypePointer::new(ptr_g, StorageClass::CrossWorkgroup, int))
        .unwrap();
    m.add(OpTypeFunction::new(fnty, void, vec![ptr_g, ptr_g, ptr_g]))
        .unwrap();
    m.add(OpVariable::new(ptr_in, gid_var, StorageClass::Input, None))
        .unwrap();

    let mut f = m
        .function(OpFunction::new(void, kernel, FunctionControl::None, fnty))
        .unwrap();
    let params: Vec<Id> = (0..3).map(|_| f.next_id()).collect();
    for (p, name) in params.iter().zip(["a", "b", "c"]) {
        f.add(OpFunctionParameter::new(ptr_g, *p)).unwrap();
        f.add(OpName::new(*p, name.into())).unwrap();
        f.add(OpDecorate::new(*p, Decoration::Alignment(4)))
            .unwrap();
    }
    let label = f.next_id();
    let mut b = f.begin_block(label).unwrap();
    let gid = b.next_id();
    let idx = b.next_id();
    b.add(OpLoad::new(
        v3ulong,
        gid,
        gid_var,
        Some(MemoryAccess::None.with_aligned(32)),
    ))
    .unwrap();
    b.add(OpCompositeExtract::new(ulong, idx, gid, vec![0]))
        .unwrap();
    let mut loaded = Vec::new();
    for p in &params[..2] {
        let (ptr, val) = (b.next_id(), b.next_id());
        b.add(OpInBoundsPtrAccessChain::new(ptr_g, ptr, *p, idx, vec![]))
            .unwrap();
        b.add(OpLoad::new(
            int,
            val,
            ptr,
            Some(MemoryAccess::None.with_aligned(4)),
        ))
        .unwrap();
        loaded.push(val);
    }
    let (sum, out) = (b.next_id(), b.next_id());
    b.add(OpIAdd::new(int, sum, loaded[0], loaded[1])).unwrap();
    b.add(OpInBoundsPtrAccessChain::new(
        ptr_g,
        out,
        params[2],
        idx,
        vec![],
    ))
    .unwrap();
    b.add(OpStore::new(
        out,
        sum,
        Some(MemoryAccess::None.with_aligned(4)),
    ))
    .unwrap();
    b.add(OpReturn::new()).unwrap();
    m
}

/// Strings, names that need escaping or renaming, line info, and an
/// extended instruction.
pub fn debug_heavy() -> Module {
    let mut m = Module::new(1, 4, DEFAULT_GENERATOR, 0).unwrap();
    kernel_header(&mut m, &[Capability::Float64]);
    let ids: Vec<Id> = (0..8).map(|_| m.next_id()).collect();
    let [set, file, void, double, fnty, func, one, _] = ids[..] else {
        unreachable!()
    };
    m.add(OpExtInstImport::new(set, "OpenCL.std".into()))
        .unwrap();
    m.add(OpString::new(file, "dir\\kernel \"v2\".cl".into()))
        .unwrap();
    m.add(OpSource::new(
        SourceLanguage::OpenCL_C,
        200,
        Some(file),
        Some("kernel void k() {\n  // \"quoted\" \\ text\n}\n".into()),
    ))
    .unwrap();
    m.add(OpSourceExtension::new("cl_khr_fp64".into())).unwrap();
    m.add(OpModuleProcessed::new("spvkit tests".into()))
        .unwrap();
    for (id, name) in [
        (void, "void"),
        (double, "1st double"),
        (fnty, "fn"),
        (func, "k"),
        (one, "k"),
    ] {
        m.add(OpName::new(id, name.into())).unwrap();
    }
    m.add(OpEntryPoint::new(
        ExecutionModel::Kernel,
        func,
        "k".into(),
        vec![],
    ))
    .unwrap();
    m.add(OpTypeVoid::new(void)).unwrap();
    m.add(OpTypeFloat::new(double, 64)).unwrap();
    m.add(OpTypeFunction::new(fnty, void, vec![])).unwrap();
    m.add(OpConstant::new(double, one, LiteralNumber::from_f64(-1.5)))
        .unwrap();
    let mut f = m
        .function(OpFunction::new(
            void,
            func,
            FunctionControl::Inline | FunctionControl::Const,
            fnty,
        ))
        .unwrap();
    let label = f.next_id();
    let mut b = f.begin_block(label).unwrap();
    let abs = b.next_id();
    b.add(OpLine::new(file, 3, 7)).unwrap();
    b.add(OpExtInst::new(
        double,
        abs,
        set,
        LiteralExtInstInteger(23),
        vec![one],
    ))
    .unwrap();
    b.add(OpNoLine::new()).unwrap();
    b.add(OpReturn::new()).unwrap();
    m
}

/// Literals of every width, a 64-bit switch and a spec-constant op.
pub fn wide_constants() -> Module {
    let mut m = Module::new(1, 2, DEFAULT_GENERATOR, 0).unwrap();
    kernel_header(
        &mut m,
        &[
            Capability::Int64,
            Capability::Int16,
            Capability::Int8,
            Capability::Float64,
            Capability::Float16,
        ],
    );
    let ids: Vec<Id> = (0..8).map(|_| m.next_id()).collect();
    let [void, long, ulong, short, byte, half, float, double] = ids[..] else {
        unreachable!()
    };
    let fnty = m.next_id();
    m.add(OpTypeVoid::new(void)).unwrap();
    m.add(OpTypeInt::new(long, 64, 1)).unwrap();
    m.add(OpTypeInt::new(ulong, 64, 0)).unwrap();
    m.add(OpTypeInt::new(short, 16, 1)).unwrap();
    m.add(OpTypeInt::new(byte, 8, 0)).unwrap();
    m.add(OpTypeFloat::new(half, 16)).unwrap();
    m.add(OpTypeFloat::new(float, 32)).unwrap();
    m.add(OpTypeFloat::new(double, 64)).unwrap();
    m.add(OpTypeFunction::new(fnty, void, vec![long])).unwrap();

    let consts: Vec<(Id, LiteralNumber)> = vec![
        (long, LiteralNumber::from_i64(-2)),
        (long, LiteralNumber::from_i64(i64::MIN)),
        (ulong, LiteralNumber::from_u64(u64::MAX)),
        (ulong, LiteralNumber::from_u64(1 << 40)),
        (short, LiteralNumber::from_i32(-300)),
        (byte, LiteralNumber::from_u32(255)),
        (half, LiteralNumber(0x3C00)),
        (float, LiteralNumber::from_f32(f32::NAN)),
        (float, LiteralNumber::from_f32(-0.0)),
        (float, LiteralNumber::from_f32(1.0e-40)),
        (double, LiteralNumber::from_f64(std::f64::consts::PI)),
        (double, LiteralNumber::from_f64(f64::INFINITY)),
    ];
    let mut longs = Vec::new();
    for (ty, v) in consts {
        let id = m.next_id();
        m.add(OpConstant::new(ty, id, v)).unwrap();
        if ty == long {
            longs.push(id);
        }
    }
    let spec = m.next_id();
    m.add(OpSpecConstant::new(long, spec, LiteralNumber::from_i64(7)))
        .unwrap();
    let sum = m.next_id();
    m.add(Instruction::new(
        OpSpecConstantOp::OPCODE,
        Some(long),
        Some(sum),
        vec![
            Operand::Literal(u32::from(OpIAdd::OPCODE)),
            Operand::Id(spec),
            Operand::Id(longs[0]),
        ],
    ))
    .unwrap();

    let func = m.next_id();
    m.add(OpEntryPoint::new(
        ExecutionModel::Kernel,
        func,
        "sw".into(),
        vec![],
    ))
    .unwrap();
    let mut f = m
        .function(OpFunction::new(void, func, FunctionControl::None, fnty))
        .unwrap();
    let sel = f.next_id();
    f.add(OpFunctionParameter::new(long, sel)).unwrap();
    let labels: Vec<Id> = (0..4).map(|_| f.next_id()).collect();
    f.begin_block(labels[0])
        .unwrap()
        .add(Instruction::new(
            OpSwitch::OPCODE,
            None,
            None,
            vec![
                Operand::Id(sel),
                Operand::Id(labels[3]),
                Operand::Number(LiteralNumber::from_i64(-5_000_000_000)),
                Operand::Id(labels[1]),
                Operand::Number(LiteralNumber::from_i64(3)),
                Operand::Id(labels[2]),
            ],
        ))
        .unwrap();
    for l in &labels[1..] {
        f.begin_block(*l).unwrap().add(OpReturn::new()).unwrap();
    }
    m
}

pub fn fixed_corpus() -> Vec<(&'static str, Module)> {
    vec![
        ("minimal kernel", minimal_kernel()),
        ("if-else", if_else()),
        ("iadd kernel", iadd_kernel()),
        ("debug strings", debug_heavy()),
        ("wide constants", wide_constants()),
    ]
}

const NAMES: &[&str] = &[
    "a",
    "b",
    "x",
    "tmp",
    "main",
    "1st",
    "a b",
    "%q",
    "",
    "a_0",
    "\u{e9}t\u{e9}",
];

struct Value {
    ty: Id,
    id: Id,
}

enum Event {
    Global(Instruction),
    Function(usize),
}

struct FunctionPlan {
    def: Instruction,
    params: Vec<Instruction>,
    blocks: Vec<(Id, Vec<Instruction>)>,
}

/// A random but well-formed module. Module-level instructions are added
/// in shuffled order; globals keep their relative order.
pub fn random_module(seed: u64) -> Module {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut m = Module::new(1, rng.gen_range(0..=6), DEFAULT_GENERATOR, 0).unwrap();

    let mut others: Vec<Instruction> = Vec::new();
    let mut globals: Vec<Instruction> = Vec::new();
    for c in [
        Capability::Addresses,
        Capability::Linkage,
        Capability::Kernel,
    ] {
        others.push(OpCapability::new(c).into());
    }
    let mut int_widths = vec![32];
    let mut float_widths = vec![32];
    for (cap, w, ints) in [
        (Capability::Int64, 64, true),
        (Capability::Int16, 16, true),
        (Capability::Int8, 8, true),
        (Capability::Float64, 64, false),
        (Capability::Float16, 16, false),
    ] {
        if rng.gen_bool(0.5) {
            others.push(OpCapability::new(cap).into());
            if ints {
                int_widths.push(w)
            } else {
                float_widths.push(w)
            }
        }
    }
    others.push(OpMemoryModel::new(AddressingModel::Physical64, MemoryModel::OpenCL).into());

    let void = m.next_id();
    globals.push(OpTypeVoid::new(void).into());
    let bool_ = m.next_id();
    globals.push(OpTypeBool::new(bool_).into());

    let mut int_types = Vec::new();
    let mut float_types = Vec::new();
    let mut pool: Vec<Value> = Vec::new();
    for w in int_widths {
        let ty = m.next_id();
        let signed = rng.gen_bool(0.5);
        globals.push(OpTypeInt::new(ty, w, u32::from(signed)).into());
        int_types.push(ty);
        for _ in 0..rng.gen_range(1..=3) {
            let raw: u64 = rng.gen();
            let v = if w == 64 {
                raw
            } else {
                raw & ((1u64 << w) - 1)
            };
            let v = if signed && w < 64 && v >> (w - 1) & 1 == 1 {
                v | !((1u64 << w) - 1)
            } else {
                v
            };
            let id = m.next_id();
            globals.push(OpConstant::new(ty, id, LiteralNumber(v)).into());
            pool.push(Value { ty, id });
        }
    }
    for w in float_widths {
        let ty = m.next_id();
        globals.push(OpTypeFloat::new(ty, w).into());
        float_types.push(ty);
        for _ in 0..rng.gen_range(1..=3) {
            let v = match (w, rng.gen_range(0..6)) {
                (16, _) => LiteralNumber(rng.gen::<u16>() as u64),
                (32, 0) => LiteralNumber::from_f32(f32::NAN),
                (32, 1) => LiteralNumber::from_f32(f32::NEG_INFINITY),
                (32, 2) => LiteralNumber::from_f32(f32::from_bits(rng.gen())),
                (32, _) => LiteralNumber::from_f32(rng.gen_range(-1.0e6..1.0e6)),
                (_, 0) => LiteralNumber::from_f64(f64::from_bits(rng.gen())),
                (_, _) => LiteralNumber::from_f64(rng.gen_range(-1.0e12..1.0e12)),
            };
            let id = m.next_id();
            globals.push(OpConstant::new(ty, id, v).into());
            pool.push(Value { ty, id });
        }
    }

    let value_types: Vec<Id> = int_types.iter().chain(&float_types).copied().collect();
    let mut plans = Vec::new();
    let mut nameable: Vec<Id> = pool.iter().map(|v| v.id).collect();
    for fi in 0..rng.gen_range(1..=3) {
        let ret = if rng.gen_bool(0.5) {
            void
        } else {
            *int_types.choose(&mut rng).unwrap()
        };
        let param_tys: Vec<Id> = (0..rng.gen_range(0..=3))
            .map(|_| *value_types.choose(&mut rng).unwrap())
            .collect();
        let fnty = m.next_id();
        globals.push(OpTypeFunction::new(fnty, ret, param_tys.clone()).into());
        let fid = m.next_id();
        nameable.push(fid);
        if ret == void {
            others.push(
                OpEntryPoint::new(ExecutionModel::Kernel, fid, format!("k{fi}"), vec![]).into(),
            );
        }
        let mut local: Vec<Value> = pool.iter().map(|v| Value { ty: v.ty, id: v.id }).collect();
        let mut params = Vec::new();
        for ty in param_tys {
            let id = m.next_id();
            params.push(OpFunctionParameter::new(ty, id).into());
            local.push(Value { ty, id });
            nameable.push(id);
        }
        let n_blocks = rng.gen_range(1..=4);
        let labels: Vec<Id> = (0..n_blocks).map(|_| m.next_id()).collect();
        let mut bools: Vec<Id> = Vec::new();
        let mut blocks = Vec::new();
        for (bi, label) in labels.iter().enumerate() {
            let mut body: Vec<Instruction> = Vec::new();
            for _ in 0..rng.gen_range(0..=6) {
                let a = &local[rng.gen_range(0..local.len())];
                let (ty, x) = (a.ty, a.id);
                let same: Vec<Id> = local.iter().filter(|v| v.ty == ty).map(|v| v.id).collect();
                let y = *same.choose(&mut rng).unwrap();
                let r = m.next_id();
                let is_int = int_types.contains(&ty);
                if rng.gen_bool(0.2) && is_int {
                    body.push(OpSLessThan::new(bool_, r, x, y).into());
                    bools.push(r);
                    continue;
                }
                body.push(match (is_int, rng.gen_range(0..3)) {
                    (true, 0) => OpIAdd::new(ty, r, x, y).into(),
                    (true, 1) => OpISub::new(ty, r, x, y).into(),
                    (true, _) => OpIMul::new(ty, r, x, y).into(),
                    (false, 0) => OpFAdd::new(ty, r, x, y).into(),
                    (false, _) => OpFMul::new(ty, r, x, y).into(),
                });
                local.push(Value { ty, id: r });
                nameable.push(r);
            }
            if bi + 1 < n_blocks {
                let next = labels[bi + 1];
                match bools.choose(&mut rng) {
                    Some(c) if rng.gen_bool(0.5) => {
                        let other = labels[rng.gen_range(bi + 1..n_blocks)];
                        let weights = if rng.gen_bool(0.3) {
                            vec![1, 3]
                        } else {
                            vec![]
                        };
                        body.push(OpBranchConditional::new(*c, next, other, weights).into());
                    }
                    _ => body.push(OpBranch::new(next).into()),
                }
            } else if ret == void {
                body.push(OpReturn::new().into());
            } else {
                let v = local.iter().rev().find(|v| v.ty == ret).unwrap().id;
                body.push(OpReturnValue::new(v).into());
            }
            blocks.push((*label, body));
        }
        plans.push(FunctionPlan {
            def: OpFunction::new(ret, fid, FunctionControl::None, fnty).into(),
            params,
            blocks,
        });
    }

    for id in nameable.choose_multiple(&mut rng, nameable.len() / 2) {
        let name = NAMES.choose(&mut rng).unwrap();
        others.push(OpName::new(*id, (*name).into()).into());
    }
    for id in pool.choose_multiple(&mut rng, 2) {
        others.push(OpDecorate::new(id.id, Decoration::Alignment(rng.gen_range(1..=16))).into());
    }
    others.shuffle(&mut rng);

    // Random merge: globals and functions keep their order, everything
    // else lands anywhere.
    let mut events: Vec<Event> = others.into_iter().map(Event::Global).collect();
    let mut ordered: Vec<Event> = globals.into_iter().map(Event::Global).collect();
    ordered.extend((0..plans.len()).map(Event::Function));
    let mut lo = 0;
    for e in ordered {
        let at = rng.gen_range(lo..=events.len());
        events.insert(at, e);
        lo = at + 1;
    }
    let mut plans: Vec<Option<FunctionPlan>> = plans.into_iter().map(Some).collect();
    for e in events {
        match e {
            Event::Global(inst) => {
                m.add(inst).unwrap();
            }
            Event::Function(i) => {
                let plan = plans[i].take().unwrap();
                let mut f = m.function(plan.def).unwrap();
                for p in plan.params {
                    f.add(p).unwrap();
                }
                for (label, body) in plan.blocks {
                    let mut b = f.begin_block(label).unwrap();
                    for inst in body {
                        b.add(inst).unwrap();
                    }
                }
            }
        }
    }
    m
}

/// Checks the serialization invariants every built module must satisfy:
/// unique result ids, bound = max id + 1, consistent word counts, and the
/// logical section order.
pub fn check_invariants(g: &spvkit::Grammar, bytes: &[u8]) -> Result<(), String> {
    use spvkit::layout::{Placement, Section};
    use std::collections::HashSet;

    let (h, parsed) = spvkit::parse::parse_module(g, bytes).map_err(|e| e.to_string())?;

    let words = bytes.len() / 4;
    let counted: usize = parsed.iter().map(|p| p.word_count).sum();
    if counted + 5 != words {
        return Err(format!(
            "word counts sum to {counted} + 5, stream has {words}"
        ));
    }

    let mut seen = HashSet::new();
    let mut max = 0;
    for p in &parsed {
        if let Some(r) = p.result {
            if !seen.insert(r) {
                return Err(format!("{r} defined twice"));
            }
        }
        for id in p.result.into_iter().chain(p.used_ids()) {
            max = max.max(id.0);
        }
    }
    if h.bound != max + 1 {
        return Err(format!("bound {} but max id {max}", h.bound));
    }

    let mut last = Section::Capabilities;
    let mut in_functions = false;
    for p in &parsed {
        let placement = g.placement(p.opcode);
        if p.def.name == "OpFunction" {
            in_functions = true;
        }
        if let Placement::Module(s) = placement {
            if in_functions {
                return Err(format!("{} after the first function", p.def.name));
            }
            if s < last {
                return Err(format!("{} ({s:?}) after {last:?}", p.def.name));
            }
            last = s;
        }
    }
    Ok(())
}
