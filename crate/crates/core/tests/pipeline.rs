mod common;

use std::sync::Arc;

use common::{copy_fixture, fixture, write_project};
use movesmith_core::embedding::LocalEmbedder;
use movesmith_core::executor::ExecError;
use movesmith_core::llm::{Bucket, ChatProvider, MockBehavior, MockChatProvider};
use movesmith_core::model::{build_index, ProjectIndex};
use movesmith_core::pipeline::{Pipeline, PipelineConfig, PipelineError, RunStore, Verdict};

const SESSION: &str = "org.elasticsearch.xpack.esql.session.EsqlSession";
const RESOLVER: &str = "org.elasticsearch.xpack.esql.enrich.EnrichPolicyResolver";

fn esql() -> ProjectIndex {
    build_index(&[fixture("esql")]).unwrap()
}

fn mocked(behavior: MockBehavior) -> PipelineConfig {
    PipelineConfig {
        chat: movesmith_core::pipeline::ChatConfig {
            mock: Some(behavior),
        },
        ..PipelineConfig::default()
    }
}

#[test]
fn esql_session_top_recommendation() {
    let index = esql();
    let p = Pipeline::from_config(mocked(MockBehavior::SimilarityOracle)).unwrap();
    let rec = p.recommend(&index, SESSION).unwrap();
    let top = &rec.recommendations[0];
    assert_eq!(
        top.method.method,
        "resolvePolicy(ActionListener,Set,EnrichResolution)"
    );
    assert_eq!(top.target, RESOLVER);
    assert!(top.feasibility.feasible);
    assert!(top
        .diff
        .as_deref()
        .unwrap()
        .contains("EnrichPolicyResolver.java"));
    assert_eq!(rec.verdicts.len(), rec.recommendations.len());
    assert!(rec.recommendations.len() <= 3);
    assert_eq!(rec.hallucinations.count(Bucket::H1), 0);
}

#[test]
fn getters_only_class_yields_nothing() {
    let dir = write_project(&[(
        "p/Bean.java",
        "package p;\npublic class Bean {\n    private int a;\n    private String b;\n    public Bean(int a) { this.a = a; }\n    public int getA() { return a; }\n    public void setA(int a) { this.a = a; }\n    public String getB() { return b; }\n}\n",
    )]);
    let index = build_index(&[dir.path()]).unwrap();
    let p = Pipeline::from_config(mocked(MockBehavior::SimilarityOracle)).unwrap();
    let rec = p.recommend(&index, "p.Bean").unwrap();
    assert!(rec.recommendations.is_empty());
    assert!(rec.candidates.is_empty());
    assert!(rec.exchanges.is_empty());
}

#[test]
fn unknown_class_is_reported() {
    let index = esql();
    let p = Pipeline::from_config(mocked(MockBehavior::EchoOrder)).unwrap();
    assert!(matches!(
        p.recommend(&index, "no.Such"),
        Err(PipelineError::UnknownClass(_))
    ));
}

#[test]
fn fault_run_emits_only_valid_items() {
    let index = esql();
    let embedder = LocalEmbedder::for_index(&index);
    let mut planted = 0;
    for class in index.classes.keys() {
        let mock = Arc::new(MockChatProvider::fault(0.5, 0.25, 0.15, 11));
        let p = Pipeline::new(
            PipelineConfig::default(),
            mock.clone() as Arc<dyn ChatProvider>,
        );
        let rec = p.recommend_with(&index, class, &embedder).unwrap();
        assert!(rec.recommendations.len() <= 3);
        for r in &rec.recommendations {
            assert!(index.class(&r.target).is_some());
            assert!(r.feasibility.feasible);
            assert_ne!(r.target, r.method.class);
        }
        // every planted hallucination lands in its bucket
        for b in [Bucket::H1, Bucket::H2, Bucket::H3] {
            assert_eq!(
                rec.hallucinations.count(b),
                mock.injected(b),
                "{class} {b:?}"
            );
        }
        planted += mock.injections().len();
    }
    assert!(planted > 0);
}

#[test]
fn mock_runs_are_byte_identical() {
    let index = esql();
    let cfg = mocked(MockBehavior::Fault {
        p_h1: 0.3,
        p_h2: 0.2,
        p_h3: 0.1,
        seed: 5,
    });
    let a = Pipeline::from_config(cfg.clone())
        .unwrap()
        .recommend(&index, SESSION)
        .unwrap();
    let b = Pipeline::from_config(cfg)
        .unwrap()
        .recommend(&index, SESSION)
        .unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert_eq!(
        serde_json::to_string(&a.exchanges).unwrap(),
        serde_json::to_string(&b.exchanges).unwrap()
    );
}

#[test]
fn cap_holds_when_configured_higher() {
    let index = esql();
    let mut cfg = mocked(MockBehavior::SimilarityOracle);
    cfg.max_recommendations = 10;
    cfg.candidate_pool_k = 20;
    assert_eq!(cfg.output_cap(), 3);
    let p = Pipeline::from_config(cfg).unwrap();
    for class in index.classes.keys() {
        assert!(p.recommend(&index, class).unwrap().recommendations.len() <= 3);
    }
}

#[test]
fn config_reads_toml() {
    let cfg = PipelineConfig::from_toml_str(
        "candidate_pool_k = 4\ntoken_budget = 5000\n[chat.mock]\nkind = \"FAULT\"\np_h1 = 0.5\np_h2 = 0.25\np_h3 = 0.15\nseed = 3\n",
    )
    .unwrap();
    assert_eq!(cfg.candidate_pool_k, 4);
    assert_eq!(cfg.token_budget, 5000);
    assert_eq!(cfg.max_recommendations, 3);
    assert!(matches!(
        cfg.chat.mock,
        Some(MockBehavior::Fault { seed: 3, .. })
    ));
    assert!(PipelineConfig::from_toml_str("token_budget = 0").is_err());
    assert!(PipelineConfig::from_toml_str("token_budget = \"x\"").is_err());
}

#[test]
fn verdicts_round_trip_through_the_store() {
    let index = esql();
    let p = Pipeline::from_config(mocked(MockBehavior::SimilarityOracle)).unwrap();
    let rec = p.recommend(&index, SESSION).unwrap();
    let runs = tempfile::tempdir().unwrap();
    let store = RunStore::new(runs.path());
    let dir = store.save(&rec).unwrap();
    for f in [
        "record.json",
        "exchanges.json",
        "timings.json",
        "verdicts.json",
        "plans.json",
    ] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let loaded = store.load(&rec.run_id).unwrap();
    assert_eq!(loaded.recommendations, rec.recommendations);
    assert_eq!(loaded.exchanges.len(), rec.exchanges.len());

    let v = store
        .record_verdict(&rec.run_id, 0, Some(5), false)
        .unwrap();
    assert_eq!(
        v,
        Verdict {
            rating: Some(5),
            applied: false
        }
    );
    let on_disk: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("verdicts.json")).unwrap()).unwrap();
    assert_eq!(on_disk[0]["rating"], 5);
    assert!(matches!(
        store.record_verdict(&rec.run_id, 0, Some(7), false),
        Err(PipelineError::BadRating(7))
    ));
    assert!(matches!(
        store.record_verdict(&rec.run_id, 99, Some(2), false),
        Err(PipelineError::UnknownRecommendation { .. })
    ));
    assert!(matches!(
        store.load("run-missing"),
        Err(PipelineError::UnknownRun(_))
    ));
}

#[test]
fn stored_recommendation_applies_once() {
    let project = copy_fixture("esql");
    let index = build_index(&[project.path()]).unwrap();
    let p = Pipeline::from_config(mocked(MockBehavior::SimilarityOracle)).unwrap();
    let rec = p.recommend(&index, SESSION).unwrap();
    let runs = tempfile::tempdir().unwrap();
    let store = RunStore::new(runs.path());
    store.save(&rec).unwrap();
    let applied = store.apply(&rec.run_id, 0).unwrap();
    assert!(applied.result.reparse_ok);
    let moved = &rec.recommendations[0];
    assert!(applied
        .index
        .class(&moved.target)
        .unwrap()
        .methods
        .iter()
        .any(|m| m.name == "resolvePolicy"));
    assert_eq!(
        store.load(&rec.run_id).unwrap().verdicts[0]
            .unwrap()
            .applied,
        true
    );
    assert!(matches!(
        store.apply(&rec.run_id, 0),
        Err(PipelineError::Exec(ExecError::StaleIndex(_)))
    ));
}
