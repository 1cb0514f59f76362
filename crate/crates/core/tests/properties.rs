mod common;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use spvkit::api::instructions::*;
use spvkit::api::kinds::*;
use spvkit::asm::{assemble, AssembleOptions};
use spvkit::builder::Module;
use spvkit::codec::decode_module;
use spvkit::dis::disassemble;
use spvkit::validate::{codes, validate_bytes};
use spvkit::{Grammar, DEFAULT_GENERATOR};

fn g() -> &'static Grammar {
    Grammar::unified()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn built_modules_keep_invariants(seed in any::<u64>()) {
        let b = common::random_module(seed).to_bytes().unwrap();
        prop_assert_eq!(common::check_invariants(g(), &b), Ok(()));
        let structural = [codes::DUPLICATE_RESULT_ID, codes::BOUND_TOO_SMALL, codes::MALFORMED_INSTRUCTION, codes::INVALID_ID];
        let diags = validate_bytes(g(), &b);
        prop_assert!(diags.iter().all(|d| !structural.contains(&d.code)), "{:?}", diags);
    }

    #[test]
    fn assemble_inverts_disassemble(seed in any::<u64>()) {
        let b = common::random_module(seed).to_bytes().unwrap();
        let text = disassemble(g(), &b, &Default::default()).unwrap();
        prop_assert_eq!(assemble(g(), &text, &AssembleOptions::default()).unwrap(), b);
    }

    #[test]
    fn name_order_does_not_change_id_count(seed in any::<u64>()) {
        let b = common::random_module(seed).to_bytes().unwrap();
        let text = disassemble(g(), &b, &Default::default()).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let names: Vec<usize> = (0..lines.len()).filter(|i| lines[*i].trim_start().starts_with("OpName")).collect();
        let mut shuffled: Vec<&str> = names.iter().map(|i| lines[*i]).collect();
        shuffled.shuffle(&mut StdRng::seed_from_u64(seed));
        for (i, l) in names.iter().zip(shuffled) {
            lines[*i] = l;
        }
        let out = assemble(g(), &lines.join("\n"), &AssembleOptions::default()).unwrap();
        let results = |bytes: &[u8]| decode_module(bytes).unwrap().1.len();
        prop_assert_eq!(results(&out), results(&b));
        prop_assert_eq!(common::check_invariants(g(), &out), Ok(()));
    }

    #[test]
    fn every_bad_line_is_reported(seed in any::<u64>(), k in 1usize..6) {
        let b = common::random_module(seed).to_bytes().unwrap();
        let text = disassemble(g(), &b, &Default::default()).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let mut rng = StdRng::seed_from_u64(seed);
        for n in 0..k {
            let at = rand::Rng::gen_range(&mut rng, 5..=lines.len());
            lines.insert(at, format!("OpCapability Bogus{n}"));
        }
        let err = assemble(g(), &lines.join("\n"), &AssembleOptions::default()).unwrap_err();
        prop_assert!(err.diagnostics.len() >= k);
        prop_assert!(err.diagnostics.iter().all(|d| d.line > 0 && d.column > 0));
    }

    #[test]
    fn chained_adds_equal_sequential_adds(caps in proptest::sample::subsequence(
        vec![Capability::Addresses, Capability::Linkage, Capability::Kernel, Capability::Int64, Capability::Int8, Capability::Float64],
        1..6,
    )) {
        let mut a = Module::new(1, 2, DEFAULT_GENERATOR, 0).unwrap();
        caps.iter().try_fold(&mut a, |m, c| m.add(OpCapability::new(c.clone()))).unwrap();
        let mut b = Module::new(1, 2, DEFAULT_GENERATOR, 0).unwrap();
        for c in &caps {
            b.add(OpCapability::new(c.clone())).unwrap();
        }
        prop_assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
    }
}

#[test]
fn independent_modules_have_independent_counters() {
    let mut a = Module::new(1, 2, DEFAULT_GENERATOR, 0).unwrap();
    let mut b = Module::new(1, 2, DEFAULT_GENERATOR, 0).unwrap();
    assert_eq!(a.next_id().0, 1);
    assert_eq!(a.next_id().0, 2);
    assert_eq!(b.next_id().0, 1);
}

#[test]
fn bound_follows_allocations() {
    let mut m = Module::new(1, 2, DEFAULT_GENERATOR, 0).unwrap();
    for _ in 0..5 {
        m.next_id();
    }
    let bytes = m.to_bytes().unwrap();
    assert_eq!(&bytes[12..16], &6u32.to_le_bytes());
}
