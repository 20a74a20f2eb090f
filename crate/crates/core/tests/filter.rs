mod common;

use movesmith_core::filter::{
    check_feasibility, check_instance_feasibility, check_static_feasibility, sanity_filter,
    FeasibilityReason, FilterError, FilterReason, MoveRoute,
};
use movesmith_core::model::{
    build_index, MemberKind, MethodRef, ProjectIndex, RefAccess, Visibility,
};
use proptest::prelude::*;

use common::{fixture, write_project};

fn mref(index: &ProjectIndex, class: &str, name: &str) -> MethodRef {
    let c = index.class(class).unwrap();
    let m = c.methods.iter().find(|m| m.name == name).unwrap();
    c.method_ref(m)
}

#[test]
fn sanity_filter_on_account() {
    let index = build_index(&[fixture("bank")]).unwrap();
    let verdicts = sanity_filter(index.class("com.bank.Account").unwrap());
    let got: Vec<(&str, Vec<FilterReason>)> = verdicts
        .iter()
        .map(|v| (v.method.method.as_str(), v.reasons.clone()))
        .collect();
    assert_eq!(
        got,
        vec![
            ("Account(String,Customer)", vec![FilterReason::Constructor]),
            ("getId()", vec![FilterReason::GetterSetter]),
            ("getBalance()", vec![FilterReason::GetterSetter]),
            ("setBalance(double)", vec![FilterReason::GetterSetter]),
            ("deposit(double)", vec![]),
            ("computeInterest(int)", vec![]),
            ("ownerLabel()", vec![]),
        ]
    );
    for v in &verdicts {
        assert_eq!(v.passed, v.reasons.is_empty());
    }
}

#[test]
fn sanity_filter_other_predicates() {
    let index = build_index(&[fixture("bank")]).unwrap();
    let fee = sanity_filter(index.class("com.bank.FeePolicy").unwrap());
    assert!(
        fee.iter()
            .find(|v| v.method.method == "fee(int)")
            .unwrap()
            .passed
    );
    let bank = sanity_filter(index.class("com.bank.Bank").unwrap());
    let audit = bank.iter().find(|v| v.method.method == "audit()").unwrap();
    assert_eq!(audit.reasons, vec![FilterReason::EmptyBody]);

    let dir = write_project(&[
        ("p/Base.java", "package p;\npublic class Base { public int size() { return 1; } }"),
        (
            "p/Child.java",
            "package p;\nimport org.junit.Test;\npublic class Child extends Base {\n  public int size() { return 2; }\n  @Test public void checks() { size(); }\n}",
        ),
    ]);
    let index = build_index(&[dir.path()]).unwrap();
    let child = sanity_filter(index.class("p.Child").unwrap());
    assert_eq!(child[0].reasons, vec![FilterReason::Override]);
    assert_eq!(child[1].reasons, vec![FilterReason::Test]);
}

#[test]
fn field_type_target_is_feasible() {
    let index = build_index(&[fixture("bank")]).unwrap();
    let m = mref(&index, "com.bank.Bank", "chargeMonthlyFee");
    let v = check_instance_feasibility(&index, &m, "com.bank.FeePolicy").unwrap();
    assert!(v.feasible, "{:?}", v.notes);
    assert_eq!(
        v.route,
        Some(MoveRoute::Field {
            name: "feePolicy".into()
        })
    );

    let m = mref(&index, "com.bank.Account", "ownerLabel");
    let v = check_instance_feasibility(&index, &m, "com.bank.Customer").unwrap();
    assert!(v.feasible, "{:?}", v.notes);
}

#[test]
fn esql_resolve_policy_targets() {
    let index = build_index(&[fixture("esql")]).unwrap();
    let m = mref(
        &index,
        "org.elasticsearch.xpack.esql.session.EsqlSession",
        "resolvePolicy",
    );
    let v = check_instance_feasibility(
        &index,
        &m,
        "org.elasticsearch.xpack.esql.enrich.EnrichPolicyResolver",
    )
    .unwrap();
    assert!(v.feasible, "{:?}", v.notes);
    assert_eq!(
        v.route,
        Some(MoveRoute::Field {
            name: "enrichPolicyResolver".into()
        })
    );

    // parameter type, but the private resolver field cannot follow
    let v = check_instance_feasibility(
        &index,
        &m,
        "org.elasticsearch.xpack.esql.enrich.EnrichResolution",
    )
    .unwrap();
    assert!(!v.feasible);
    assert_eq!(v.reasons, vec![FeasibilityReason::LosesReferences]);

    let v = check_instance_feasibility(
        &index,
        &m,
        "org.elasticsearch.xpack.esql.enrich.PolicyUtils",
    )
    .unwrap();
    assert_eq!(v.reasons, vec![FeasibilityReason::TargetNotFound]);
    assert_eq!(v.route, None);
}

#[test]
fn private_host_field_through_parameter_loses_references() {
    let index = build_index(&[fixture("bank")]).unwrap();
    let m = mref(&index, "com.bank.Bank", "chargeMonthlyFee");
    let v = check_instance_feasibility(&index, &m, "com.bank.Account").unwrap();
    assert!(!v.feasible);
    assert_eq!(v.reasons, vec![FeasibilityReason::LosesReferences]);
    assert!(
        v.notes.iter().any(|n| n.contains("feePolicy")),
        "{:?}",
        v.notes
    );
}

/// Writes the move out by hand and looks at what the moved body would
/// reference: a private field of another class.
#[test]
fn hand_rewritten_move_has_an_inaccessible_reference() {
    let bank = std::fs::read_to_string(fixture("bank").join("com/bank/Bank.java")).unwrap();
    let account = std::fs::read_to_string(fixture("bank").join("com/bank/Account.java")).unwrap();
    let start = bank.find("    public void chargeMonthlyFee").unwrap();
    let end = bank.find("    public void audit").unwrap();
    let bank_after = format!("{}{}", &bank[..start], &bank[end..]);
    let moved = "    public void chargeMonthlyFee(Bank bank) {\n        double fee = bank.feePolicy.monthlyFee(this.getBalance());\n        this.setBalance(this.getBalance() - fee);\n    }\n}\n";
    let cut = account.rfind('}').unwrap();
    let account_after = format!("{}\n{}", &account[..cut], moved);
    let dir = write_project(&[
        ("com/bank/Bank.java", &bank_after),
        ("com/bank/Account.java", &account_after),
        (
            "com/bank/FeePolicy.java",
            &std::fs::read_to_string(fixture("bank").join("com/bank/FeePolicy.java")).unwrap(),
        ),
    ]);
    let index = build_index(&[dir.path()]).unwrap();
    let acct = index.class("com.bank.Account").unwrap();
    let m = acct
        .methods
        .iter()
        .find(|m| m.name == "chargeMonthlyFee")
        .unwrap();
    let r = m
        .referenced_members
        .iter()
        .find(|r| r.kind == MemberKind::Field && r.name == "feePolicy")
        .expect("reference to feePolicy");
    assert_eq!(r.owner.as_deref(), Some("com.bank.Bank"));
    assert_eq!(r.access, RefAccess::Variable);
    let owner = index.class("com.bank.Bank").unwrap();
    assert_eq!(
        owner.field("feePolicy").unwrap().visibility,
        Visibility::Private
    );
}

#[test]
fn instance_target_must_be_field_or_parameter_type() {
    let index = build_index(&[fixture("bank")]).unwrap();
    let m = mref(&index, "com.bank.Account", "deposit");
    let v = check_instance_feasibility(&index, &m, "com.bank.util.MoneyUtils").unwrap();
    assert_eq!(v.reasons, vec![FeasibilityReason::TargetNotReachable]);
    let m = mref(&index, "com.bank.Customer", "sameEmail");
    let v = check_instance_feasibility(&index, &m, "com.bank.Customer").unwrap();
    assert_eq!(v.reasons, vec![FeasibilityReason::TargetNotReachable]);
}

#[test]
fn parameter_route_with_and_without_host_parameter() {
    let dir = write_project(&[
        (
            "a/Host.java",
            "package a;\npublic class Host {\n    public int scale = 2;\n    int pure(Item item) { return item.weight() * 3; }\n    int scaled(Item item) { return item.weight() * scale; }\n}\n",
        ),
        ("a/Item.java", "package a;\npublic class Item {\n    public int weight() { return 1; }\n}\n"),
    ]);
    let index = build_index(&[dir.path()]).unwrap();
    let v = check_instance_feasibility(&index, &mref(&index, "a.Host", "pure"), "a.Item").unwrap();
    assert_eq!(
        v.route,
        Some(MoveRoute::Parameter {
            index: 0,
            host_param: false
        })
    );
    let v =
        check_instance_feasibility(&index, &mref(&index, "a.Host", "scaled"), "a.Item").unwrap();
    assert_eq!(
        v.route,
        Some(MoveRoute::Parameter {
            index: 0,
            host_param: true
        })
    );
}

#[test]
fn duplicate_signature_in_target() {
    let dir = write_project(&[
        ("a/Host.java", "package a;\npublic class Host {\n    Item item;\n    int total() { return item.weight() + 1; }\n}\n"),
        ("a/Item.java", "package a;\npublic class Item {\n    public int weight() { return 1; }\n    public int total() { return 2; }\n}\n"),
    ]);
    let index = build_index(&[dir.path()]).unwrap();
    let v = check_instance_feasibility(&index, &mref(&index, "a.Host", "total"), "a.Item").unwrap();
    assert_eq!(v.reasons, vec![FeasibilityReason::DuplicateSignature]);
}

#[test]
fn override_chain_is_a_hierarchy_conflict() {
    let dir = write_project(&[
        ("a/Base.java", "package a;\npublic class Base {\n    Item item;\n    public int cost() { return 0; }\n}\n"),
        ("a/Host.java", "package a;\npublic class Host extends Base {\n    Item item;\n    public int cost() { return item.weight(); }\n}\n"),
        ("a/Item.java", "package a;\npublic class Item {\n    public int weight() { return 1; }\n}\n"),
    ]);
    let index = build_index(&[dir.path()]).unwrap();
    let v = check_instance_feasibility(&index, &mref(&index, "a.Host", "cost"), "a.Item").unwrap();
    assert!(v.reasons.contains(&FeasibilityReason::HierarchyConflict));
}

#[test]
fn static_moves() {
    let index = build_index(&[fixture("bank")]).unwrap();
    let round = mref(&index, "com.bank.util.MoneyUtils", "round");
    let v = check_static_feasibility(&index, &round, "com.bank.Account").unwrap();
    assert!(v.feasible, "{:?}", v.notes);
    assert_eq!(v.route, Some(MoveRoute::Static));
    let v = check_static_feasibility(&index, &round, "com.bank.util.MoneyUtils").unwrap();
    assert_eq!(v.reasons, vec![FeasibilityReason::TargetNotReachable]);
    let v = check_static_feasibility(&index, &round, "com.bank.Report").unwrap();
    assert_eq!(v.reasons, vec![FeasibilityReason::TargetNotReachable]);
    let v = check_static_feasibility(&index, &round, "com.bank.Nowhere").unwrap();
    assert_eq!(v.reasons, vec![FeasibilityReason::TargetNotFound]);

    // wrong entry point is an error, the dispatcher picks the right one
    assert!(matches!(
        check_instance_feasibility(&index, &round, "com.bank.Account"),
        Err(FilterError::StaticMethod(_))
    ));
    assert!(
        check_feasibility(&index, &round, "com.bank.Account")
            .unwrap()
            .feasible
    );
}

#[test]
fn static_move_losing_a_private_static() {
    let dir = write_project(&[
        (
            "a/Host.java",
            "package a;\npublic class Host {\n    private static int LIMIT = 3;\n    public static int SHARED = 4;\n    static int capped(int x) { return Math.min(x, LIMIT); }\n    static int shared(int x) { return x + SHARED; }\n}\n",
        ),
        ("b/Other.java", "package b;\npublic class Other {}\n"),
    ]);
    let index = build_index(&[dir.path()]).unwrap();
    let v = check_static_feasibility(&index, &mref(&index, "a.Host", "capped"), "b.Other").unwrap();
    assert_eq!(v.reasons, vec![FeasibilityReason::LosesReferences]);
    let v = check_static_feasibility(&index, &mref(&index, "a.Host", "shared"), "b.Other").unwrap();
    assert!(v.feasible, "{:?}", v.notes);
}

#[test]
fn static_move_to_enum_is_allowed_but_instance_is_not() {
    let dir = write_project(&[
        (
            "a/Host.java",
            "package a;\npublic class Host {\n    Kind kind;\n    static int twice(int x) { return x * 2; }\n    String label() { return kind.name() + \"!\"; }\n}\n",
        ),
        ("a/Kind.java", "package a;\npublic enum Kind { A, B }\n"),
    ]);
    let index = build_index(&[dir.path()]).unwrap();
    let v = check_static_feasibility(&index, &mref(&index, "a.Host", "twice"), "a.Kind").unwrap();
    assert!(v.feasible, "{:?}", v.notes);
    let v = check_instance_feasibility(&index, &mref(&index, "a.Host", "label"), "a.Kind").unwrap();
    assert!(v.reasons.contains(&FeasibilityReason::TargetNotReachable));
}

#[test]
fn unknown_refs_are_errors() {
    let index = build_index(&[fixture("bank")]).unwrap();
    let bad = MethodRef {
        class: "com.bank.Nope".into(),
        method: "x()".into(),
    };
    assert!(matches!(
        check_feasibility(&index, &bad, "com.bank.Account"),
        Err(FilterError::UnknownClass(_))
    ));
    let bad = MethodRef {
        class: "com.bank.Account".into(),
        method: "x()".into(),
    };
    assert!(matches!(
        check_feasibility(&index, &bad, "com.bank.Bank"),
        Err(FilterError::UnknownMethod(_))
    ));
}

fn bank_sources() -> Vec<(String, String)> {
    let root = fixture("bank");
    [
        "com/bank/Account.java",
        "com/bank/Bank.java",
        "com/bank/Customer.java",
        "com/bank/FeePolicy.java",
        "com/bank/Report.java",
        "com/bank/util/MoneyUtils.java",
    ]
    .iter()
    .map(|rel| {
        (
            rel.to_string(),
            std::fs::read_to_string(root.join(rel)).unwrap(),
        )
    })
    .collect()
}

fn probe(index: &ProjectIndex) -> Vec<bool> {
    let pairs = [
        ("com.bank.Bank", "chargeMonthlyFee", "com.bank.FeePolicy"),
        ("com.bank.Bank", "chargeMonthlyFee", "com.bank.Account"),
        ("com.bank.Account", "ownerLabel", "com.bank.Customer"),
        ("com.bank.util.MoneyUtils", "round", "com.bank.Account"),
        ("com.bank.util.MoneyUtils", "format", "com.bank.Customer"),
        ("com.bank.Account", "deposit", "com.bank.util.MoneyUtils"),
    ];
    pairs
        .iter()
        .map(|(h, m, t)| {
            check_feasibility(index, &mref(index, h, m), t)
                .unwrap()
                .feasible
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unrelated_class_never_flips_feasible(
        name in "[A-Z][a-z]{2,8}",
        pkg in prop::sample::select(vec!["com.bank", "com.bank.util", "org.other"]),
        methods in prop::collection::vec(("[a-z]{3,8}", 0usize..3), 0..5),
    ) {
        prop_assume!(!["Account", "Bank", "Customer", "FeePolicy", "Report", "MoneyUtils"].contains(&name.as_str()));
        let base = bank_sources();
        let before = {
            let files: Vec<(&str, &str)> = base.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            let dir = write_project(&files);
            probe(&build_index(&[dir.path()]).unwrap())
        };
        let body: String = methods
            .iter()
            .map(|(m, arity)| {
                let params: Vec<String> = (0..*arity).map(|i| format!("int p{i}")).collect();
                format!("    public int {m}({}) {{ return {}; }}\n", params.join(", "), arity)
            })
            .collect();
        let text = format!("package {pkg};\n\npublic class {name} {{\n{body}}}\n");
        let rel = format!("{}/{name}.java", pkg.replace('.', "/"));
        let mut files: Vec<(&str, &str)> = base.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        files.push((&rel, &text));
        let dir = write_project(&files);
        let after = probe(&build_index(&[dir.path()]).unwrap());
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(!*b || *a);
        }
    }

    #[test]
    fn constructors_never_pass(
        anns in prop::collection::vec(prop::sample::select(vec!["@Override", "@Test", "@Inject", "@Deprecated"]), 0..3),
        body in prop::sample::select(vec!["", "x = 1;", "/* nothing */", "this.x = x;"]),
        public in any::<bool>(),
    ) {
        let vis = if public { "public " } else { "" };
        let text = format!("package k;\nclass Get {{\n  int x;\n  {} {vis}Get(int x) {{ {body} }}\n}}\n", anns.join(" "));
        let dir = write_project(&[("k/Get.java", &text)]);
        let index = build_index(&[dir.path()]).unwrap();
        let v = sanity_filter(index.class("k.Get").unwrap());
        prop_assert!(!v[0].passed);
        prop_assert!(v[0].reasons.contains(&FilterReason::Constructor));
    }
}
