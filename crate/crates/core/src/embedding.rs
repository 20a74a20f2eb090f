//! Text embeddings and misplacement scoring.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, OpenOptions};
use std::hash::Hasher;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    class_text_without_method, sha256_hex, ClassInfo, MethodInfo, MethodRef, ModelError,
    ProjectIndex,
};

/// Width of the hashed bag used by [`LocalEmbedder`].
pub const LOCAL_DIMENSION: usize = 512;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("nothing to embed")]
    EmptyContent,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero vector")]
    ZeroVector,
    #[error("embedding cache {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub dimension: usize,
    pub model_id: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_id: impl Into<String>) -> Self {
        Self {
            dimension: values.len(),
            values,
            model_id: model_id.into(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(
            self.values.iter().map(|v| v * c).collect(),
            self.model_id.clone(),
        )
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> String;
    fn embed(&self, content: &str) -> Result<EmbeddingVector, EmbeddingError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn model_id(&self) -> String {
        (**self).model_id()
    }
    fn embed(&self, content: &str) -> Result<EmbeddingVector, EmbeddingError> {
        (**self).embed(content)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for std::sync::Arc<P> {
    fn model_id(&self) -> String {
        (**self).model_id()
    }
    fn embed(&self, content: &str) -> Result<EmbeddingVector, EmbeddingError> {
        (**self).embed(content)
    }
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.values.len() != b.values.len() {
        return Err(EmbeddingError::DimensionMismatch(
            a.values.len(),
            b.values.len(),
        ));
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.values.iter().zip(&b.values) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

const JAVA_KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "false",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "null",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "true",
    "try",
    "var",
    "void",
    "volatile",
    "while",
];

/// Lowercased identifier and word pieces: camelCase and snake_case are split,
/// Java keywords and one-letter pieces are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split(|c: char| !c.is_alphanumeric()) {
        if word.is_empty() {
            continue;
        }
        let chars: Vec<char> = word.chars().collect();
        let mut start = 0;
        for i in 1..=chars.len() {
            let boundary = i == chars.len() || {
                let (p, c) = (chars[i - 1], chars[i]);
                let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                (p.is_lowercase() && c.is_uppercase())
                    || (p.is_uppercase() && c.is_uppercase() && next_lower)
                    || (p.is_alphabetic() != c.is_alphabetic())
            };
            if boundary {
                let piece: String = chars[start..i].iter().collect::<String>().to_lowercase();
                start = i;
                if piece.chars().count() < 2
                    || piece.chars().all(|c| c.is_ascii_digit())
                    || JAVA_KEYWORDS.contains(&piece.as_str())
                {
                    continue;
                }
                out.push(piece);
            }
        }
    }
    out
}

fn bucket(token: &str) -> usize {
    let mut h = fnv::FnvHasher::default();
    h.write(token.as_bytes());
    (h.finish() % LOCAL_DIMENSION as u64) as usize
}

/// Offline TF-IDF embedder over identifier tokens, hashed into
/// [`LOCAL_DIMENSION`] buckets and L2-normalized.
#[derive(Debug, Clone)]
pub struct LocalEmbedder {
    idf: HashMap<String, f64>,
    docs: usize,
    model_id: String,
}

impl Default for LocalEmbedder {
    fn default() -> Self {
        Self {
            idf: HashMap::new(),
            docs: 0,
            model_id: format!("local-tfidf-{LOCAL_DIMENSION}"),
        }
    }
}

impl LocalEmbedder {
    /// Embedder with IDF weights fitted on `docs`.
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n = 0;
        let mut digest = String::new();
        for d in docs {
            n += 1;
            let uniq: BTreeSet<String> = tokenize(d).into_iter().collect();
            for t in uniq {
                *df.entry(t).or_default() += 1;
            }
            digest.push_str(&sha256_hex(d.as_bytes()));
        }
        let idf = df
            .into_iter()
            .map(|(t, c)| (t, ((1.0 + n as f64) / (1.0 + c as f64)).ln() + 1.0))
            .collect();
        Self {
            idf,
            docs: n,
            model_id: format!(
                "local-tfidf-{LOCAL_DIMENSION}-{}",
                &sha256_hex(digest.as_bytes())[..12]
            ),
        }
    }

    /// Fitted on every class text of the project.
    pub fn for_index(index: &ProjectIndex) -> Self {
        Self::fit(index.classes.values().map(|c| c.text.as_str()))
    }

    /// IDF weight of a token; tokens never seen while fitting get the
    /// weight of a term that occurs in no document.
    pub fn idf(&self, token: &str) -> f64 {
        self.idf
            .get(token)
            .copied()
            .unwrap_or_else(|| (1.0 + self.docs as f64).ln() + 1.0)
    }
}

impl EmbeddingProvider for LocalEmbedder {
    fn model_id(&self) -> String {
        self.model_id.clone()
    }

    fn embed(&self, content: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let trimmed = content.trim();
        if trimmed.is_empty() {
            return Err(EmbeddingError::EmptyContent);
        }
        let mut tokens = tokenize(trimmed);
        if tokens.is_empty() {
            tokens.push(trimmed.to_string());
        }
        let mut counts: BTreeMap<&str, f64> = BTreeMap::new();
        for t in &tokens {
            *counts.entry(t.as_str()).or_default() += 1.0;
        }
        let mut values = vec![0.0; LOCAL_DIMENSION];
        for (t, c) in counts {
            values[bucket(t)] += c * self.idf(t);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut values {
            *v /= norm;
        }
        Ok(EmbeddingVector::new(values, self.model_id.clone()))
    }
}

/// HTTP embeddings client: `POST {model, input: [text]}` answered by
/// `{data: [{embedding: [...]}]}`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

impl RemoteEmbedder {
    /// Reads `EMBEDDING_API_URL`, `EMBEDDING_API_KEY` and `EMBEDDING_MODEL`.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var("EMBEDDING_API_URL").ok()?;
        Some(Self {
            url,
            api_key: std::env::var("EMBEDDING_API_KEY").ok(),
            model: std::env::var("EMBEDDING_MODEL").unwrap_or_else(|_| "default".into()),
            timeout: Duration::from_secs(60),
        })
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl EmbeddingProvider for RemoteEmbedder {
    fn model_id(&self) -> String {
        self.model.clone()
    }

    fn embed(&self, content: &str) -> Result<EmbeddingVector, EmbeddingError> {
        if content.trim().is_empty() {
            return Err(EmbeddingError::EmptyContent);
        }
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let mut req = agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::json!({ "model": self.model, "input": [content] });
        let resp: EmbeddingResponse = req
            .send_json(body)
            .map_err(|e| EmbeddingError::ProviderUnavailable(e.to_string()))?
            .into_json()
            .map_err(|e| EmbeddingError::ProviderUnavailable(format!("bad response: {e}")))?;
        let values = resp
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| EmbeddingError::ProviderUnavailable("empty embedding list".into()))?;
        Ok(EmbeddingVector::new(values, self.model.clone()))
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    model: String,
    hash: String,
    embedding: Vec<f64>,
}

/// Content-addressed embedding store, optionally backed by a JSON lines
/// file that is appended to on every miss.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<(String, String), Vec<f64>>>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| EmbeddingError::Cache {
            path: path.clone(),
            source,
        };
        let mut entries = HashMap::new();
        if path.exists() {
            let f = fs::File::open(&path).map_err(io)?;
            for line in BufReader::new(f).lines() {
                let line = line.map_err(io)?;
                match serde_json::from_str::<CacheLine>(&line) {
                    Ok(l) => {
                        entries.insert((l.model, l.hash), l.embedding);
                    }
                    Err(e) => log::warn!("skipping bad cache line in {}: {e}", path.display()),
                }
            }
        } else if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        Ok(Self {
            path: Some(path),
            entries: Mutex::new(entries),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, model: &str, content: &str) -> Option<EmbeddingVector> {
        let key = (model.to_string(), sha256_hex(content.as_bytes()));
        self.entries
            .lock()
            .unwrap()
            .get(&key)
            .map(|v| EmbeddingVector::new(v.clone(), model))
    }

    pub fn put(&self, content: &str, v: &EmbeddingVector) -> Result<(), EmbeddingError> {
        let hash = sha256_hex(content.as_bytes());
        let mut entries = self.entries.lock().unwrap();
        if let Some(path) = &self.path {
            let line = serde_json::to_string(&CacheLine {
                model: v.model_id.clone(),
                hash: hash.clone(),
                embedding: v.values.clone(),
            })
            .expect("cache line serializes");
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|source| EmbeddingError::Cache {
                    path: path.clone(),
                    source,
                })?;
            writeln!(f, "{line}").map_err(|source| EmbeddingError::Cache {
                path: path.clone(),
                source,
            })?;
        }
        entries.insert((v.model_id.clone(), hash), v.values.clone());
        Ok(())
    }
}

/// Wraps a provider with an [`EmbeddingCache`].
pub struct CachedEmbedder<P> {
    pub inner: P,
    pub cache: EmbeddingCache,
}

impl<P: EmbeddingProvider> CachedEmbedder<P> {
    pub fn new(inner: P, cache: EmbeddingCache) -> Self {
        Self { inner, cache }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbedder<P> {
    fn model_id(&self) -> String {
        self.inner.model_id()
    }

    fn embed(&self, content: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let model = self.inner.model_id();
        if let Some(v) = self.cache.get(&model, content) {
            return Ok(v);
        }
        let v = self.inner.embed(content)?;
        self.cache.put(content, &v)?;
        Ok(v)
    }
}

/// A method whose body resembles its host less than its siblings do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveCandidate {
    pub method: MethodRef,
    pub signature: String,
    /// Cosine similarity between the method and the rest of its class.
    pub similarity: f64,
}

/// Scores each surviving method against its class with the method cut out,
/// least similar first; ties go to the lower `class#method` name.
pub fn misplacement_scores(
    provider: &dyn EmbeddingProvider,
    class: &ClassInfo,
    surviving: &[&MethodInfo],
) -> Result<Vec<MoveCandidate>, EmbeddingError> {
    let mut out = Vec::with_capacity(surviving.len());
    for m in surviving {
        let shell = class_text_without_method(class, m)?;
        let a = provider.embed(class.method_text(m))?;
        let b = provider.embed(&shell)?;
        out.push(MoveCandidate {
            method: class.method_ref(m),
            signature: m.signature.clone(),
            similarity: cosine_similarity(&a, &b)?,
        });
    }
    out.sort_by(|x, y| {
        x.similarity
            .total_cmp(&y.similarity)
            .then_with(|| x.method.to_string().cmp(&y.method.to_string()))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_split_camel_and_snake() {
        assert_eq!(tokenize("resolvePolicy"), vec!["resolve", "policy"]);
        assert_eq!(tokenize("MAX_RETRY_count"), vec!["max", "retry", "count"]);
        assert_eq!(tokenize("HTTPServer x"), vec!["http", "server"]);
        assert_eq!(tokenize("public static void main"), vec!["main"]);
        assert_eq!(tokenize("utf8Decoder"), vec!["utf", "decoder"]);
    }

    #[test]
    fn cosine_examples() {
        let v = |x: &[f64]| EmbeddingVector::new(x.to_vec(), "t");
        assert_eq!(
            cosine_similarity(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap(),
            1.0
        );
        assert_eq!(
            cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(),
            0.0
        );
        let c = cosine_similarity(&v(&[1.0, 1.0]), &v(&[1.0, 0.0])).unwrap();
        assert!((c - 0.70710678).abs() < 1e-8);
        assert!(matches!(
            cosine_similarity(&v(&[1.0]), &v(&[1.0, 0.0])),
            Err(EmbeddingError::DimensionMismatch(1, 2))
        ));
        assert!(matches!(
            cosine_similarity(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])),
            Err(EmbeddingError::ZeroVector)
        ));
    }

    #[test]
    fn punctuation_only_text_still_embeds() {
        let e = LocalEmbedder::default();
        let v = e.embed("{ } ;").unwrap();
        assert!(v.values.iter().any(|x| *x != 0.0));
        assert!(matches!(
            e.embed("  \n "),
            Err(EmbeddingError::EmptyContent)
        ));
    }
}
