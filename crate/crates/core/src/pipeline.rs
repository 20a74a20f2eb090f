//! End-to-end recommendation for one host class, and the run records it
//! leaves behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{
    misplacement_scores, CachedEmbedder, EmbeddingCache, EmbeddingError, EmbeddingProvider,
    LocalEmbedder, MoveCandidate, RemoteEmbedder,
};
use crate::executor::{apply, plan_move, Applied, ExecError, MovePlan};
use crate::filter::{
    check_feasibility, sanity_filter, FeasibilityVerdict, FilterError, FilterVerdict,
};
use crate::llm::{
    choose_target, classify_suggestion, critique, rank_methods, resolve_class, Bucket,
    ChatProvider, Exchange, HallucinationReport, HttpChatProvider, LlmError, MethodRanking,
    MockBehavior, MockChatProvider, TargetSelection,
};
use crate::model::{sha256_hex, MethodRef, ProjectIndex};
use crate::retrieval::{
    enumerate_instance_targets, enumerate_static_targets, semantic_rerank_and_pack, Packed,
    TargetCandidate,
};

/// Hard ceiling on recommendations per class.
pub const MAX_RECOMMENDATIONS: usize = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown class {0}")]
    UnknownClass(String),
    #[error("{stage}: {source}")]
    Embedding {
        stage: &'static str,
        #[source]
        source: EmbeddingError,
    },
    #[error("{stage}: {source}")]
    Llm {
        stage: &'static str,
        #[source]
        source: LlmError,
    },
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("run {0} not found")]
    UnknownRun(String),
    #[error("run {run} has no recommendation {index}")]
    UnknownRecommendation { run: String, index: usize },
    #[error("rating must be between 1 and 6, got {0}")]
    BadRating(u8),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed run file {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ChatConfig {
    /// Use a mock instead of the HTTP provider configured from the
    /// environment.
    pub mock: Option<MockBehavior>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct EmbeddingConfig {
    /// Use the HTTP provider configured from the environment instead of the
    /// local TF-IDF embedder.
    pub remote: bool,
    /// JSON lines cache for remote embeddings.
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub candidate_pool_k: usize,
    pub max_recommendations: usize,
    pub token_budget: usize,
    pub static_limit: usize,
    pub critique_enabled: bool,
    pub chat: ChatConfig,
    pub embedding: EmbeddingConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            candidate_pool_k: 5,
            max_recommendations: MAX_RECOMMENDATIONS,
            token_budget: 7000,
            static_limit: 50,
            critique_enabled: false,
            chat: ChatConfig::default(),
            embedding: EmbeddingConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let c: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.candidate_pool_k == 0 || self.max_recommendations == 0 || self.token_budget == 0 {
            return Err(PipelineError::Config(
                "candidate_pool_k, max_recommendations and token_budget must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Recommendations actually emitted; never above three.
    pub fn output_cap(&self) -> usize {
        self.max_recommendations.min(MAX_RECOMMENDATIONS)
    }

    pub fn chat_provider(&self) -> Result<Arc<dyn ChatProvider>, PipelineError> {
        match &self.chat.mock {
            Some(b) => Ok(Arc::new(MockChatProvider::new(b.clone()))),
            None => HttpChatProvider::from_env()
                .map(|p| Arc::new(p) as Arc<dyn ChatProvider>)
                .ok_or_else(|| {
                    PipelineError::Config(
                        "CHAT_API_URL is not set; use a mock chat provider".into(),
                    )
                }),
        }
    }

    pub fn embedder(
        &self,
        index: &ProjectIndex,
    ) -> Result<Arc<dyn EmbeddingProvider>, PipelineError> {
        if !self.embedding.remote {
            return Ok(Arc::new(LocalEmbedder::for_index(index)));
        }
        let remote = RemoteEmbedder::from_env().ok_or_else(|| {
            PipelineError::Config("EMBEDDING_API_URL is not set; use local embeddings".into())
        })?;
        match &self.embedding.cache {
            Some(path) => {
                let cache =
                    EmbeddingCache::open(path).map_err(|source| PipelineError::Embedding {
                        stage: "embedding cache",
                        source,
                    })?;
                Ok(Arc::new(CachedEmbedder::new(remote, cache)))
            }
            None => Ok(Arc::new(remote)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveRecommendation {
    /// 1-based.
    pub rank: usize,
    pub method: MethodRef,
    pub signature: String,
    pub target: String,
    pub is_static: bool,
    pub method_rationale: String,
    pub target_rationale: String,
    /// Cosine between the method and the rest of its class.
    pub similarity: f64,
    /// Cosine between the method and the target class.
    pub target_score: f64,
    pub heuristic_score: Option<f64>,
    pub feasibility: FeasibilityVerdict,
    pub diff: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTargets {
    pub method: MethodRef,
    pub candidates: Vec<TargetCandidate>,
    pub packed: Packed,
    pub selection: Option<TargetSelection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub rating: Option<u8>,
    pub applied: bool,
}

/// Wall time per stage in milliseconds; LLM time is kept apart.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub sanity_ms: f64,
    pub embedding_ms: f64,
    pub retrieval_ms: f64,
    pub llm_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub host: String,
    pub config: PipelineConfig,
    pub chat_model: String,
    pub embedding_model: String,
    pub sanity: Vec<FilterVerdict>,
    pub candidates: Vec<MoveCandidate>,
    pub ranking: Option<MethodRanking>,
    pub targets: Vec<MethodTargets>,
    pub hallucinations: HallucinationReport,
    pub recommendations: Vec<MoveRecommendation>,
    /// One slot per recommendation.
    pub verdicts: Vec<Option<Verdict>>,
    pub warnings: Vec<String>,
    /// Kept in their own files; they vary between otherwise equal runs or
    /// are bulky.
    #[serde(skip)]
    pub exchanges: Vec<Exchange>,
    #[serde(skip)]
    pub timings: Timings,
    /// The plan behind each recommendation, applied verbatim later so a
    /// changed tree is caught as stale.
    #[serde(skip)]
    pub plans: Vec<Option<MovePlan>>,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1000.0
}

fn run_id(
    config: &PipelineConfig,
    index: &ProjectIndex,
    host: &str,
    chat: &str,
    emb: &str,
) -> String {
    let mut key = serde_json::to_string(config).expect("config serializes");
    for (path, f) in &index.files {
        key.push_str(&format!("|{}={}", path.display(), f.sha256));
    }
    key.push_str(&format!("|{host}|{chat}|{emb}"));
    format!("run-{}", &sha256_hex(key.as_bytes())[..16])
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub chat: Arc<dyn ChatProvider>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, chat: Arc<dyn ChatProvider>) -> Self {
        Self { config, chat }
    }

    /// Uses the providers named in the config.
    pub fn from_config(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let chat = config.chat_provider()?;
        Ok(Self { config, chat })
    }

    pub fn recommend(&self, index: &ProjectIndex, host: &str) -> Result<RunRecord, PipelineError> {
        let embedder = self.config.embedder(index)?;
        self.recommend_with(index, host, embedder.as_ref())
    }

    /// Sanity filter, misplacement scores, method ranking, then per ranked
    /// method: target retrieval, packing, target choice and classification.
    /// Only VALID suggestions become recommendations.
    pub fn recommend_with(
        &self,
        index: &ProjectIndex,
        host: &str,
        embedder: &dyn EmbeddingProvider,
    ) -> Result<RunRecord, PipelineError> {
        let start = Instant::now();
        let class = index
            .class(host)
            .ok_or_else(|| PipelineError::UnknownClass(host.to_string()))?;
        let cap = self.config.output_cap();
        let mut rec = RunRecord {
            run_id: run_id(
                &self.config,
                index,
                host,
                &self.chat.model_id(),
                &embedder.model_id(),
            ),
            host: host.to_string(),
            config: self.config.clone(),
            chat_model: self.chat.model_id(),
            embedding_model: embedder.model_id(),
            sanity: Vec::new(),
            candidates: Vec::new(),
            ranking: None,
            targets: Vec::new(),
            hallucinations: HallucinationReport::default(),
            recommendations: Vec::new(),
            verdicts: Vec::new(),
            warnings: Vec::new(),
            exchanges: Vec::new(),
            timings: Timings::default(),
            plans: Vec::new(),
        };

        let t = Instant::now();
        rec.sanity = sanity_filter(class);
        let surviving: Vec<_> = rec
            .sanity
            .iter()
            .filter(|v| v.passed)
            .filter_map(|v| class.method(&v.method.method))
            .collect();
        rec.timings.sanity_ms = ms(t);
        if surviving.is_empty() {
            rec.warnings
                .push("no method survives the sanity filter".into());
            rec.timings.total_ms = ms(start);
            return Ok(rec);
        }

        let t = Instant::now();
        let mut scored = misplacement_scores(embedder, class, &surviving).map_err(|source| {
            PipelineError::Embedding {
                stage: "misplacement scores",
                source,
            }
        })?;
        scored.truncate(self.config.candidate_pool_k);
        rec.candidates = scored;
        rec.timings.embedding_ms = ms(t);

        let t = Instant::now();
        let mut ranking = rank_methods(
            self.chat.as_ref(),
            class,
            &rec.candidates,
            cap,
            &mut rec.exchanges,
        )
        .map_err(|source| PipelineError::Llm {
            stage: "method ranking",
            source,
        })?;
        if self.config.critique_enabled {
            ranking.ranked = critique(
                self.chat.as_ref(),
                class,
                ranking.ranked,
                &mut rec.exchanges,
            )
            .map_err(|source| PipelineError::Llm {
                stage: "critique",
                source,
            })?;
        }
        rec.timings.llm_ms += ms(t);
        for raw in &ranking.raw {
            rec.hallucinations
                .record(raw.clone(), classify_suggestion(index, raw, class));
        }

        for ranked in &ranking.ranked {
            if rec.recommendations.len() >= cap {
                break;
            }
            let Some(m) = class.method(&ranked.method.method) else {
                continue;
            };
            let t = Instant::now();
            let found = if m.is_static {
                enumerate_static_targets(index, &ranked.method, self.config.static_limit)?
            } else {
                enumerate_instance_targets(index, &ranked.method)?
            };
            if found.is_empty() {
                rec.warnings
                    .push(format!("{}: no feasible target", ranked.method));
                rec.targets.push(MethodTargets {
                    method: ranked.method.clone(),
                    candidates: Vec::new(),
                    packed: Packed {
                        summaries: Vec::new(),
                        total_tokens: 0,
                        budget: self.config.token_budget,
                        warnings: Vec::new(),
                    },
                    selection: None,
                });
                rec.timings.retrieval_ms += ms(t);
                continue;
            }
            let (ranked_targets, packed) = semantic_rerank_and_pack(
                embedder,
                index,
                class.method_text(m),
                found,
                self.config.token_budget,
            )
            .map_err(|source| PipelineError::Embedding {
                stage: "target rerank",
                source,
            })?;
            rec.warnings.extend(packed.warnings.iter().cloned());
            rec.timings.retrieval_ms += ms(t);
            let scores: BTreeMap<String, f64> = ranked_targets
                .iter()
                .map(|c| (c.target.clone(), c.semantic_score))
                .collect();

            let t = Instant::now();
            let selection = choose_target(
                self.chat.as_ref(),
                class,
                m,
                &packed.summaries,
                &scores,
                &mut rec.exchanges,
            )
            .map_err(|source| PipelineError::Llm {
                stage: "target selection",
                source,
            })?;
            rec.timings.llm_ms += ms(t);

            let mut chosen = None;
            for raw in &selection.raw {
                let c = classify_suggestion(index, raw, class);
                let valid = c.bucket == Bucket::Valid;
                rec.hallucinations.record(raw.clone(), c);
                if !valid || chosen.is_some() {
                    continue;
                }
                // the classifier resolves loose spellings; emit only packed names
                let resolved = raw
                    .target
                    .as_deref()
                    .and_then(|t| resolve_class(index, class, t));
                chosen = resolved.and_then(|k| {
                    selection
                        .chosen
                        .iter()
                        .find(|c| c.target == k.qualified_name)
                        .cloned()
                });
            }
            if let Some(choice) = chosen {
                let verdict = check_feasibility(index, &ranked.method, &choice.target)?;
                if !verdict.feasible {
                    continue;
                }
                let (plan, diff) = match plan_move(index, &ranked.method, &choice.target)
                    .and_then(|p| p.diff().map(|d| (p, d)))
                {
                    Ok((p, d)) => (Some(p), Some(d)),
                    Err(e) => {
                        rec.warnings
                            .push(format!("{} -> {}: {e}", ranked.method, choice.target));
                        (None, None)
                    }
                };
                rec.plans.push(plan);
                let cand = ranked_targets.iter().find(|c| c.target == choice.target);
                rec.recommendations.push(MoveRecommendation {
                    rank: rec.recommendations.len() + 1,
                    method: ranked.method.clone(),
                    signature: m.signature.clone(),
                    target: choice.target.clone(),
                    is_static: m.is_static,
                    method_rationale: ranked.rationale.clone(),
                    target_rationale: choice.rationale.clone(),
                    similarity: rec
                        .candidates
                        .iter()
                        .find(|c| c.method == ranked.method)
                        .map_or(0.0, |c| c.similarity),
                    target_score: cand.map_or(0.0, |c| c.semantic_score),
                    heuristic_score: cand.and_then(|c| c.heuristic_score),
                    feasibility: verdict,
                    diff,
                });
            }
            rec.targets.push(MethodTargets {
                method: ranked.method.clone(),
                candidates: ranked_targets,
                packed,
                selection: Some(selection),
            });
        }
        rec.ranking = Some(ranking);
        rec.verdicts = vec![None; rec.recommendations.len()];
        rec.timings.total_ms = ms(start);
        Ok(rec)
    }
}

/// Run records on disk: one directory per run holding `record.json`,
/// `exchanges.json`, `timings.json`, `verdicts.json` and `plans.json`.
#[derive(Debug, Clone)]
pub struct RunStore {
    pub root: PathBuf,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("run data serializes");
    fs::write(path, text + "\n").map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json {
        path: path.to_path_buf(),
        source,
    })
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn dir(&self, run_id: &str) -> PathBuf {
        self.root.join(run_id)
    }

    pub fn save(&self, rec: &RunRecord) -> Result<PathBuf, PipelineError> {
        let dir = self.dir(&rec.run_id);
        fs::create_dir_all(&dir).map_err(|source| PipelineError::Io {
            path: dir.clone(),
            source,
        })?;
        write_json(&dir.join("record.json"), rec)?;
        write_json(&dir.join("exchanges.json"), &rec.exchanges)?;
        write_json(&dir.join("timings.json"), &rec.timings)?;
        write_json(&dir.join("verdicts.json"), &rec.verdicts)?;
        write_json(&dir.join("plans.json"), &rec.plans)?;
        Ok(dir)
    }

    pub fn load(&self, run_id: &str) -> Result<RunRecord, PipelineError> {
        let dir = self.dir(run_id);
        if run_id.contains(['/', '\\']) || !dir.join("record.json").is_file() {
            return Err(PipelineError::UnknownRun(run_id.to_string()));
        }
        let mut rec: RunRecord = read_json(&dir.join("record.json"))?;
        rec.exchanges = read_json(&dir.join("exchanges.json")).unwrap_or_default();
        rec.timings = read_json(&dir.join("timings.json")).unwrap_or_default();
        rec.verdicts = read_json(&dir.join("verdicts.json"))?;
        rec.plans = read_json(&dir.join("plans.json")).unwrap_or_default();
        Ok(rec)
    }

    /// Stores a rating (1 to 6) and the applied flag for recommendation
    /// `index` (0-based).
    pub fn record_verdict(
        &self,
        run_id: &str,
        index: usize,
        rating: Option<u8>,
        applied: bool,
    ) -> Result<Verdict, PipelineError> {
        if let Some(r) = rating {
            if !(1..=6).contains(&r) {
                return Err(PipelineError::BadRating(r));
            }
        }
        let mut rec = self.load(run_id)?;
        let slot =
            rec.verdicts
                .get_mut(index)
                .ok_or_else(|| PipelineError::UnknownRecommendation {
                    run: run_id.to_string(),
                    index,
                })?;
        let prior = slot.unwrap_or(Verdict {
            rating: None,
            applied: false,
        });
        let v = Verdict {
            rating: rating.or(prior.rating),
            applied: applied || prior.applied,
        };
        *slot = Some(v);
        write_json(&self.dir(run_id).join("verdicts.json"), &rec.verdicts)?;
        Ok(v)
    }

    /// Applies the stored plan of recommendation `n` (0-based) and marks
    /// it applied. Fails with a stale-index error once any touched file has
    /// changed, including by an earlier apply of the same plan.
    pub fn apply(&self, run_id: &str, n: usize) -> Result<Applied, PipelineError> {
        let rec = self.load(run_id)?;
        let unknown = || PipelineError::UnknownRecommendation {
            run: run_id.to_string(),
            index: n,
        };
        if n >= rec.recommendations.len() {
            return Err(unknown());
        }
        let plan = rec.plans.get(n).cloned().flatten().ok_or_else(unknown)?;
        let applied = apply(&plan)?;
        self.record_verdict(run_id, n, None, true)?;
        Ok(applied)
    }
}
