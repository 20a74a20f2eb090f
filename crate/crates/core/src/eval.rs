//! Gold sets, recall metrics and synthetic corpora built by moving methods
//! away from home.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingProvider;
use crate::executor::{apply, plan_move, ExecError};
use crate::filter::{check_instance_feasibility, sanity_reasons, FilterError};
use crate::model::java::erase_type;
use crate::model::{build_index, ClassInfo, MethodRef, ModelError, ProjectIndex};
use crate::pipeline::{MoveRecommendation, Pipeline, PipelineError};
use crate::retrieval::enumerate_instance_targets;

/// Ranks reported by the metrics.
pub const KS: [usize; 3] = [1, 2, 3];

/// Classes with fewer methods than this are SMALL.
pub const SMALL_CLASS_LIMIT: usize = 15;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no run for host {0}")]
    MissingRun(String),
    #[error("only {found} feasible moves, {wanted} requested")]
    InsufficientCandidates { wanted: usize, found: usize },
    #[error("gold line {line}: {detail}")]
    BadGold { line: usize, detail: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GoldTriplet {
    /// `name(T1,T2)`.
    pub method: String,
    pub host: String,
    pub target: String,
    #[serde(default)]
    pub is_static: bool,
}

impl GoldTriplet {
    pub fn new(method: &str, host: &str, target: &str, is_static: bool) -> Self {
        Self {
            method: normalize_signature(method),
            host: host.into(),
            target: target.into(),
            is_static,
        }
    }
}

/// One recommended move as the metrics see it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub method: String,
    pub host: String,
    pub target: String,
}

impl From<&MoveRecommendation> for Suggestion {
    fn from(r: &MoveRecommendation) -> Self {
        Self {
            method: r.method.method.clone(),
            host: r.method.class.clone(),
            target: r.target.clone(),
        }
    }
}

fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '<' => depth += 1,
            '>' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

/// `name(java.util.List<String> xs, final int n) : void` becomes
/// `name(List,int)`. Text without parentheses is returned trimmed.
pub fn normalize_signature(text: &str) -> String {
    let text = text.trim();
    let (Some(open), Some(close)) = (text.find('('), text.rfind(')')) else {
        return text.to_string();
    };
    let name = text[..open].split_whitespace().last().unwrap_or("");
    let name = name.rsplit(['.', '#']).next().unwrap_or(name);
    let inner = text[open + 1..close].trim();
    if inner.is_empty() {
        return format!("{name}()");
    }
    let params: Vec<String> = split_top_level(inner, ',')
        .into_iter()
        .map(|p| {
            let mut words: Vec<&str> = split_top_level(p.trim(), ' ')
                .into_iter()
                .filter(|w| !w.is_empty() && *w != "final" && !w.starts_with('@'))
                .collect();
            // a trailing identifier after the type is the parameter name
            if words.len() > 1
                && words
                    .last()
                    .is_some_and(|w| w.chars().all(|c| c.is_alphanumeric() || c == '_'))
            {
                words.pop();
            }
            erase_type(&words.concat())
        })
        .collect();
    format!("{name}({})", params.join(","))
}

pub fn read_gold(path: &Path) -> Result<Vec<GoldTriplet>, EvalError> {
    let file = fs::File::open(path).map_err(io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut g: GoldTriplet = serde_json::from_str(&line).map_err(|e| EvalError::BadGold {
            line: i + 1,
            detail: e.to_string(),
        })?;
        if g.host == g.target {
            return Err(EvalError::BadGold {
                line: i + 1,
                detail: "host equals target".into(),
            });
        }
        g.method = normalize_signature(&g.method);
        out.push(g);
    }
    Ok(out)
}

pub fn write_gold(path: &Path, gold: &[GoldTriplet]) -> Result<(), EvalError> {
    let mut f = fs::File::create(path).map_err(io(path))?;
    for g in gold {
        writeln!(
            f,
            "{}",
            serde_json::to_string(g).expect("triplet serializes")
        )
        .map_err(io(path))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stratum {
    Small,
    Large,
}

pub fn stratify(class: &ClassInfo) -> Stratum {
    if class.methods.len() < SMALL_CLASS_LIMIT {
        Stratum::Small
    } else {
        Stratum::Large
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Normalized `name(T1,T2)`.
    #[default]
    Signature,
    /// Method name only; overloads collapse.
    NameOnly,
}

impl MatchMode {
    fn key(self, sig: &str) -> &str {
        match self {
            MatchMode::Signature => sig,
            MatchMode::NameOnly => sig.split('(').next().unwrap_or(sig),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recalls {
    pub k: usize,
    pub recall_m: f64,
    pub recall_c: f64,
    pub recall_mc: f64,
    /// |G|
    pub gold: usize,
    /// |ℜ_M|
    pub method_hits: usize,
    /// |ℜ ∩ G|
    pub exact_hits: usize,
}

/// Recalls over the top `k` suggestions of every host. The gold list is
/// treated as a set.
pub fn compute_recalls(
    gold: &[GoldTriplet],
    runs: &BTreeMap<String, Vec<Suggestion>>,
    k: usize,
    mode: MatchMode,
) -> Result<Recalls, EvalError> {
    let gold: BTreeSet<(String, &str, &str)> = gold
        .iter()
        .map(|g| {
            (
                normalize_signature(&g.method),
                g.host.as_str(),
                g.target.as_str(),
            )
        })
        .collect();
    let (mut method_hits, mut exact_hits) = (0, 0);
    for (method, host, target) in &gold {
        let run = runs
            .get(*host)
            .ok_or_else(|| EvalError::MissingRun(host.to_string()))?;
        let key = mode.key(method);
        let same_method: Vec<&Suggestion> = run
            .iter()
            .take(k)
            .filter(|s| s.host == *host && mode.key(&normalize_signature(&s.method)) == key)
            .collect();
        if !same_method.is_empty() {
            method_hits += 1;
            if same_method.iter().any(|s| s.target == *target) {
                exact_hits += 1;
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(Recalls {
        k,
        recall_m: ratio(method_hits, gold.len()),
        recall_c: ratio(exact_hits, method_hits),
        recall_mc: ratio(exact_hits, gold.len()),
        gold: gold.len(),
        method_hits,
        exact_hits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub overall: Vec<Recalls>,
    pub strata: BTreeMap<Stratum, Vec<Recalls>>,
}

/// Recalls at k = 1, 2, 3, overall and per stratum. `strata` maps hosts to
/// their stratum; hosts missing from it only count overall.
pub fn evaluate(
    gold: &[GoldTriplet],
    runs: &BTreeMap<String, Vec<Suggestion>>,
    strata: &BTreeMap<String, Stratum>,
    mode: MatchMode,
) -> Result<EvalResult, EvalError> {
    let at_all = |g: &[GoldTriplet]| -> Result<Vec<Recalls>, EvalError> {
        KS.iter()
            .map(|&k| compute_recalls(g, runs, k, mode))
            .collect()
    };
    let mut by_stratum: BTreeMap<Stratum, Vec<GoldTriplet>> = BTreeMap::new();
    for g in gold {
        if let Some(s) = strata.get(&g.host) {
            by_stratum.entry(*s).or_default().push(g.clone());
        }
    }
    Ok(EvalResult {
        overall: at_all(gold)?,
        strata: by_stratum
            .into_iter()
            .map(|(s, g)| Ok((s, at_all(&g)?)))
            .collect::<Result<_, EvalError>>()?,
    })
}

/// Plain-text table, one row per metric and k.
pub fn render_table(result: &EvalResult) -> String {
    let mut columns = vec![("All".to_string(), &result.overall)];
    for (s, r) in &result.strata {
        columns.push((format!("{s:?}"), r));
    }
    let mut out = format!("{:<12}", "Metric");
    for (name, r) in &columns {
        let _ = write!(
            out,
            "{:>14}",
            format!("{name} (n={})", r.first().map_or(0, |x| x.gold))
        );
    }
    out.push('\n');
    let metrics: [(&str, fn(&Recalls) -> f64); 3] = [
        ("Recall_M", |r| r.recall_m),
        ("Recall_C", |r| r.recall_c),
        ("Recall_MC", |r| r.recall_mc),
    ];
    for (label, get) in metrics {
        for (i, k) in KS.iter().enumerate() {
            let _ = write!(out, "{:<12}", format!("{label}@{k}"));
            for (_, r) in &columns {
                let _ = write!(out, "{:>13.1}%", r.get(i).map_or(0.0, get) * 100.0);
            }
            out.push('\n');
        }
    }
    out
}

/// Runs the pipeline once per gold host, hosts in parallel.
pub fn collect_runs(
    pipeline: &Pipeline,
    index: &ProjectIndex,
    embedder: &dyn EmbeddingProvider,
    gold: &[GoldTriplet],
) -> Result<BTreeMap<String, Vec<Suggestion>>, PipelineError> {
    let hosts: BTreeSet<&str> = gold.iter().map(|g| g.host.as_str()).collect();
    hosts
        .into_par_iter()
        .map(|host| {
            let rec = pipeline.recommend_with(index, host, embedder)?;
            Ok((
                host.to_string(),
                rec.recommendations.iter().map(Suggestion::from).collect(),
            ))
        })
        .collect()
}

/// Stratum of every gold host the index knows.
pub fn host_strata(index: &ProjectIndex, gold: &[GoldTriplet]) -> BTreeMap<String, Stratum> {
    gold.iter()
        .filter_map(|g| index.class(&g.host).map(|c| (g.host.clone(), stratify(c))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedCorpus {
    pub source_roots: Vec<PathBuf>,
    pub gold: Vec<GoldTriplet>,
    /// Moves tried and undone because they could not be reversed or broke an
    /// earlier triplet.
    pub rejected: usize,
}

fn copy_roots(index: &ProjectIndex, out_dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let mut roots = Vec::new();
    for (i, root) in index.source_roots.iter().enumerate() {
        let dest = if index.source_roots.len() == 1 {
            out_dir.to_path_buf()
        } else {
            out_dir.join(format!("root{i}"))
        };
        for (path, info) in &index.files {
            if &info.root != root {
                continue;
            }
            let rel = path.strip_prefix(root).unwrap_or(path);
            let to = dest.join(rel);
            if let Some(parent) = to.parent() {
                fs::create_dir_all(parent).map_err(io(parent))?;
            }
            fs::copy(path, &to).map_err(io(path))?;
        }
        roots.push(dest);
    }
    Ok(roots)
}

/// Every (method, target) instance move the feasibility check accepts, in a
/// stable order. Methods already moved are left alone.
fn feasible_moves(
    index: &ProjectIndex,
    moved: &BTreeSet<MethodRef>,
) -> Result<Vec<(MethodRef, String)>, EvalError> {
    let mut out = Vec::new();
    for class in index.classes.values() {
        if index
            .files
            .get(&class.source_file)
            .is_some_and(|f| f.is_test_source)
        {
            continue;
        }
        for m in &class.methods {
            let mref = class.method_ref(m);
            if m.is_static || !sanity_reasons(m).is_empty() || moved.contains(&mref) {
                continue;
            }
            for t in enumerate_instance_targets(index, &mref)? {
                out.push((mref.clone(), t.target));
            }
        }
    }
    Ok(out)
}

/// A triplet is still recoverable when its method exists, passes the sanity
/// filter and may move back home.
fn recoverable(index: &ProjectIndex, g: &GoldTriplet) -> bool {
    let mref = MethodRef {
        class: g.host.clone(),
        method: g.method.clone(),
    };
    let Some((_, m)) = index.method(&mref) else {
        return false;
    };
    sanity_reasons(m).is_empty()
        && check_instance_feasibility(index, &mref, &g.target).is_ok_and(|v| v.feasible)
}

/// Copies the project into `out_dir` and moves `n` instance methods to
/// seeded, uniformly drawn feasible targets. The gold set records the way
/// back for each move.
pub fn generate_perturbed_corpus(
    index: &ProjectIndex,
    n: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<PerturbedCorpus, EvalError> {
    let roots = copy_roots(index, out_dir)?;
    let mut current = build_index(&roots)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gold: Vec<GoldTriplet> = Vec::new();
    let mut moved = BTreeSet::new();
    let mut refused: BTreeSet<(MethodRef, String)> = BTreeSet::new();
    let mut rejected = 0;

    while gold.len() < n {
        let pool: Vec<_> = feasible_moves(&current, &moved)?
            .into_iter()
            .filter(|m| !refused.contains(m))
            .collect();
        let Some((mref, target)) = pool.choose(&mut rng).cloned() else {
            return Err(EvalError::InsufficientCandidates {
                wanted: n,
                found: gold.len(),
            });
        };
        let plan = plan_move(&current, &mref, &target)?;
        let originals: Vec<(PathBuf, String)> = plan
            .files
            .iter()
            .map(|f| {
                fs::read_to_string(&f.path)
                    .map(|t| (f.path.clone(), t))
                    .map_err(io(&f.path))
            })
            .collect::<Result<_, _>>()?;
        let after = apply(&plan)?.index;
        let triplet = GoldTriplet::new(&plan.new_method.method, &target, &mref.class, false);
        if recoverable(&after, &triplet) && gold.iter().all(|g| recoverable(&after, g)) {
            moved.insert(plan.new_method.clone());
            gold.push(triplet);
            current = after;
        } else {
            for (path, text) in originals {
                fs::write(&path, text).map_err(io(&path))?;
            }
            current = build_index(&roots)?;
            refused.insert((mref, target));
            rejected += 1;
        }
    }
    Ok(PerturbedCorpus {
        source_roots: roots,
        gold,
        rejected,
    })
}
