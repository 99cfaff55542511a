mod common;

use oauthscan::driver::Analyzer;
use oauthscan::osl::InstrKind;
use oauthscan::property::bundled_properties;

#[test]
fn lowering_facts_match_instruction_counts() {
    let a = Analyzer::new(bundled_properties());
    for f in common::corpus_files() {
        let ir = a.load_paths(&[&f]).unwrap().ir;
        let facts = ir.base_facts();
        let count = |p: &str| facts.iter().filter(|x| x.pred == p).count();
        let (mut assigns, mut allocs, mut branches) = (0, 0, 0);
        for i in &ir.instructions {
            match &i.kind {
                InstrKind::Assign { args, .. } => assigns += args.len(),
                InstrKind::Const { .. } => assigns += 1,
                InstrKind::Alloc { .. } => allocs += 1,
                InstrKind::Branch { .. } => branches += 1,
                _ => {}
            }
        }
        let name = f.display();
        assert_eq!(count("assign"), assigns, "{name}");
        assert_eq!(count("alloc"), allocs, "{name}");
        assert_eq!(count("branch"), branches, "{name}");
        assert_eq!(count("label"), ir.instructions.len(), "{name}");
    }
}
