mod common;

use movesmith_core::embedding::LocalEmbedder;
use movesmith_core::filter::MoveRoute;
use movesmith_core::model::{build_index, MethodRef, ProjectIndex};
use movesmith_core::retrieval::{
    enumerate_instance_targets, enumerate_static_targets, is_utility_class, pack_summaries,
    package_proximity, ranking_score, semantic_rerank_and_pack, token_count, ClassSummary,
};
use proptest::prelude::*;

use common::{class_at, fixture, write_project};

fn mref(index: &ProjectIndex, class: &str, name: &str) -> MethodRef {
    let c = index.class(class).unwrap();
    c.method_ref(c.methods.iter().find(|m| m.name == name).unwrap())
}

#[test]
fn proximity_examples() {
    let h = class_at(&["org", "example", "core"], "Engine");
    let t = class_at(&["org", "example", "utils"], "Helper");
    assert_eq!(package_proximity(&t, &h), 2.0 / 3.0);
    assert_eq!(
        package_proximity(&class_at(&["org", "example", "core"], "X"), &h),
        1.0
    );
    assert_eq!(
        package_proximity(&class_at(&["net", "other"], "X"), &h),
        0.0
    );
    // default package host
    let d = class_at(&[], "Main");
    assert_eq!(package_proximity(&class_at(&[], "Other"), &d), 1.0);
    assert_eq!(package_proximity(&class_at(&["a"], "Other"), &d), 0.0);
    // deeper target than host
    assert_eq!(
        package_proximity(&class_at(&["org", "example", "core", "deep"], "X"), &h),
        1.0
    );
}

#[test]
fn utility_examples() {
    assert!(is_utility_class(&class_at(&["a"], "StringUtils")));
    assert!(!is_utility_class(&class_at(&["a"], "Helper")));
    assert!(is_utility_class(&class_at(&["a"], "UtilityBelt")));
    // only the simple name counts, not the package
    assert!(!is_utility_class(&class_at(&["util"], "Helper")));
}

#[test]
fn ranking_score_examples() {
    let h = class_at(&["org", "example", "core"], "Engine");
    let t = class_at(&["org", "example", "utils"], "StringUtils");
    assert!((ranking_score(&t, &h) - 7.0 / 3.0).abs() < 1e-12);
    assert_eq!(ranking_score(&class_at(&["x"], "Helper"), &h), 0.0);
    assert_eq!(
        ranking_score(&class_at(&["org", "example", "core"], "CoreUtil"), &h),
        3.0
    );
}

#[test]
fn instance_targets_from_parameter_types() {
    let dir = write_project(&[
        ("a/Host.java", "package a;\npublic class Host {\n    int weigh(Item item) { return item.weight() * 3; }\n    int size(String s) { return s.length(); }\n}\n"),
        ("a/Item.java", "package a;\npublic class Item {\n    public int weight() { return 1; }\n}\n"),
    ]);
    let index = build_index(&[dir.path()]).unwrap();
    let got = enumerate_instance_targets(&index, &mref(&index, "a.Host", "weigh")).unwrap();
    let names: Vec<&str> = got.iter().map(|c| c.target.as_str()).collect();
    assert_eq!(names, vec!["a.Item"]);
    assert!(got.iter().all(|c| c.feasibility.feasible));
    assert!(
        enumerate_instance_targets(&index, &mref(&index, "a.Host", "size"))
            .unwrap()
            .is_empty()
    );
}

#[test]
fn resolve_policy_candidates_include_the_resolver() {
    let index = build_index(&[fixture("esql")]).unwrap();
    let m = mref(
        &index,
        "org.elasticsearch.xpack.esql.session.EsqlSession",
        "resolvePolicy",
    );
    let got = enumerate_instance_targets(&index, &m).unwrap();
    let names: Vec<&str> = got.iter().map(|c| c.target.as_str()).collect();
    assert!(
        names.contains(&"org.elasticsearch.xpack.esql.enrich.EnrichPolicyResolver"),
        "{names:?}"
    );
    assert!(!names.contains(&"org.elasticsearch.xpack.esql.enrich.EnrichResolution"));
    for c in &got {
        assert!(matches!(
            c.feasibility.route,
            Some(MoveRoute::Field { .. }) | Some(MoveRoute::Parameter { .. })
        ));
    }
}

fn static_project() -> tempfile::TempDir {
    write_project(&[
        ("org/shop/core/Cart.java", "package org.shop.core;\npublic class Cart {\n    static int cents(double amount) { return (int) Math.round(amount * 100); }\n}\n"),
        ("org/shop/core/PriceUtils.java", "package org.shop.core;\npublic class PriceUtils {\n    public static double vat(double x) { return x * 0.2; }\n}\n"),
        ("net/far/Remote.java", "package net.far;\npublic class Remote {\n    public void ping() { int x = 1; }\n}\n"),
    ])
}

#[test]
fn static_targets_rank_by_heuristic() {
    let dir = static_project();
    let index = build_index(&[dir.path()]).unwrap();
    let got =
        enumerate_static_targets(&index, &mref(&index, "org.shop.core.Cart", "cents"), 50).unwrap();
    let names: Vec<(&str, f64)> = got
        .iter()
        .map(|c| (c.target.as_str(), c.heuristic_score.unwrap()))
        .collect();
    assert_eq!(
        names,
        vec![("org.shop.core.PriceUtils", 3.0), ("net.far.Remote", 0.0)]
    );
    let got =
        enumerate_static_targets(&index, &mref(&index, "org.shop.core.Cart", "cents"), 1).unwrap();
    assert_eq!(got.len(), 1);
    for c in &got {
        assert_ne!(c.target, "org.shop.core.Cart");
    }
}

#[test]
fn two_class_project_has_one_static_target() {
    let dir = write_project(&[
        (
            "a/A.java",
            "package a;\npublic class A {\n    static int twice(int x) { return x * 2; }\n}\n",
        ),
        ("a/B.java", "package a;\npublic class B {}\n"),
    ]);
    let index = build_index(&[dir.path()]).unwrap();
    let got = enumerate_static_targets(&index, &mref(&index, "a.A", "twice"), 50).unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].target, "a.B");
}

fn summary_of_tokens(name: &str, tokens: usize) -> ClassSummary {
    // "class {name}\nfields:\ndoc:\n  {pad}\nmethods:\n"
    let fixed = format!("class {name}\nfields:\ndoc:\n  \nmethods:\n").len();
    let pad = "x".repeat(tokens * 4 - fixed);
    let s = ClassSummary::new(name, vec![], Some(pad), vec![]);
    assert_eq!(s.token_estimate, tokens);
    s
}

#[test]
fn eleven_summaries_of_600_fit_in_7000() {
    let all: Vec<ClassSummary> = (0..20)
        .map(|i| summary_of_tokens(&format!("p.C{i:02}"), 600))
        .collect();
    let packed = pack_summaries(all.clone(), 7000);
    assert_eq!(packed.summaries.len(), 11);
    assert_eq!(packed.total_tokens, 6600);
    assert!(packed.warnings.is_empty());
    assert_eq!(packed.summaries, all[..11].to_vec());

    let packed = pack_summaries(all.clone(), 1_000_000);
    assert_eq!(packed.summaries, all);
}

#[test]
fn oversized_first_summary_is_trimmed_with_warning() {
    let sigs: Vec<String> = (0..100)
        .map(|i| format!("public int method{i:03}(int a, int b)"))
        .collect();
    let big = ClassSummary::new("p.Big", vec!["int x".into()], None, sigs);
    assert!(big.token_estimate > 300);
    let packed = pack_summaries(vec![big, summary_of_tokens("p.Small", 10)], 300);
    assert_eq!(packed.summaries.len(), 1);
    assert_eq!(packed.warnings.len(), 1);
    let s = &packed.summaries[0];
    assert!(s.token_estimate <= 300);
    assert!(!s.signatures.is_empty());
    // one more signature would not have fit
    let mut longer = s.signatures.clone();
    longer.push("public int method999(int a, int b)".into());
    assert!(ClassSummary::new("p.Big", vec!["int x".into()], None, longer).token_estimate > 300);
}

#[test]
fn summary_sharing_identifiers_packs_first() {
    let dir = write_project(&[
        ("a/Host.java", "package a;\npublic class Host {\n    void post(Ledger ledger, Printer printer, int amount) { ledger.recordLedgerEntry(amount); printer.flush(); }\n}\n"),
        ("a/Ledger.java", "package a;\npublic class Ledger {\n    private int entries;\n    public void recordLedgerEntry(int amount) { entries += amount; }\n}\n"),
        ("a/Printer.java", "package a;\npublic class Printer {\n    public void flush() { System.out.println(); }\n}\n"),
    ]);
    let index = build_index(&[dir.path()]).unwrap();
    let m = mref(&index, "a.Host", "post");
    let candidates = enumerate_instance_targets(&index, &m).unwrap();
    let e = LocalEmbedder::for_index(&index);
    let text = index.class("a.Host").unwrap().methods[0].clone();
    let host = index.class("a.Host").unwrap();
    let (ranked, packed) =
        semantic_rerank_and_pack(&e, &index, host.method_text(&text), candidates, 7000).unwrap();
    assert_eq!(ranked.len(), 2);
    assert_eq!(ranked[0].target, "a.Ledger");
    assert!(ranked[0].semantic_score >= ranked.last().unwrap().semantic_score);
    assert_eq!(packed.summaries[0].qualified_name, "a.Ledger");
}

#[test]
fn summary_renders_fields_doc_and_signatures() {
    let index = build_index(&[fixture("bank")]).unwrap();
    let s = ClassSummary::of_class(index.class("com.bank.Account").unwrap());
    let text = s.render();
    assert!(text.starts_with("class com.bank.Account\nfields:\n  private final String id\n"));
    assert!(text.contains("doc:\n  A customer account holding a balance.\n"));
    assert!(text.contains("  public double computeInterest(int days)\n"));
    assert!(text.contains("  public Account(String id, Customer owner)\n"));
    assert_eq!(s.token_estimate, token_count(&text));
}

proptest! {
    #[test]
    fn packing_respects_the_budget(
        sizes in prop::collection::vec(12usize..400, 0..30),
        budget in 1usize..3000,
    ) {
        let all: Vec<ClassSummary> = sizes.iter().enumerate().map(|(i, t)| summary_of_tokens(&format!("p.C{i:02}"), *t)).collect();
        let packed = pack_summaries(all.clone(), budget);
        let total: usize = packed.summaries.iter().map(|s| s.token_estimate).sum();
        prop_assert_eq!(total, packed.total_tokens);
        if packed.warnings.is_empty() {
            prop_assert!(total <= budget);
            // greedy prefix, stopping at the first misfit
            prop_assert_eq!(&packed.summaries[..], &all[..packed.summaries.len()]);
            if let Some(next) = all.get(packed.summaries.len()) {
                prop_assert!(total + next.token_estimate > budget);
            }
        } else {
            prop_assert_eq!(packed.summaries.len(), 1);
            prop_assert!(all[0].token_estimate > budget);
        }
    }
}
