//! Target class retrieval: enumerate feasible destinations, score them, and
//! pack their summaries into a prompt budget.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_similarity, EmbeddingError, EmbeddingProvider};
use crate::filter::{
    check_instance_feasibility, check_static_feasibility, FeasibilityVerdict, FilterError,
};
use crate::model::{ClassInfo, MethodRef, ProjectIndex, Visibility};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCandidate {
    pub target: String,
    /// Proximity-plus-utility score; static moves only.
    pub heuristic_score: Option<f64>,
    /// Cosine between the method and the target's full text, once reranked.
    pub semantic_score: f64,
    pub feasibility: FeasibilityVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub qualified_name: String,
    pub fields: Vec<String>,
    pub docstring: Option<String>,
    pub signatures: Vec<String>,
    pub token_estimate: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packed {
    pub summaries: Vec<ClassSummary>,
    pub total_tokens: usize,
    pub budget: usize,
    pub warnings: Vec<String>,
}

/// Tokens are estimated as `ceil(bytes / 4)`.
pub fn token_count(text: &str) -> usize {
    text.len().div_ceil(4)
}

fn vis_word(v: Visibility) -> &'static str {
    match v {
        Visibility::Public => "public ",
        Visibility::Protected => "protected ",
        Visibility::Package => "",
        Visibility::Private => "private ",
    }
}

impl ClassSummary {
    pub fn new(
        qualified_name: impl Into<String>,
        fields: Vec<String>,
        docstring: Option<String>,
        signatures: Vec<String>,
    ) -> Self {
        let mut s = Self {
            qualified_name: qualified_name.into(),
            fields,
            docstring,
            signatures,
            token_estimate: 0,
        };
        s.token_estimate = token_count(&s.render());
        s
    }

    pub fn of_class(class: &ClassInfo) -> Self {
        let fields = class
            .fields
            .iter()
            .map(|f| {
                format!(
                    "{}{}{}{} {}",
                    vis_word(f.visibility),
                    if f.is_static { "static " } else { "" },
                    if f.is_final { "final " } else { "" },
                    f.raw_type,
                    f.name
                )
            })
            .collect();
        let signatures = class
            .methods
            .iter()
            .map(|m| {
                let params: Vec<String> = m
                    .parameters
                    .iter()
                    .map(|p| format!("{} {}", p.declared_type, p.name))
                    .collect();
                let ret = if m.is_constructor {
                    String::new()
                } else {
                    format!("{} ", m.return_type)
                };
                format!(
                    "{}{}{}{}({})",
                    vis_word(m.visibility),
                    if m.is_static { "static " } else { "" },
                    ret,
                    m.name,
                    params.join(", ")
                )
            })
            .collect();
        Self::new(
            class.qualified_name.clone(),
            fields,
            class.docstring.clone(),
            signatures,
        )
    }

    /// Stable text form used in prompts:
    ///
    /// ```text
    /// class a.b.Name
    /// fields:
    ///   private int count
    /// doc:
    ///   First doc line
    /// methods:
    ///   public int size()
    /// ```
    ///
    /// The `doc:` block is left out when there is no docstring.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "class {}", self.qualified_name);
        out.push_str("fields:\n");
        for f in &self.fields {
            let _ = writeln!(out, "  {f}");
        }
        if let Some(doc) = &self.docstring {
            out.push_str("doc:\n");
            for l in doc.lines() {
                let _ = writeln!(out, "  {l}");
            }
        }
        out.push_str("methods:\n");
        for s in &self.signatures {
            let _ = writeln!(out, "  {s}");
        }
        out
    }
}

/// Leading package segments `t` shares with `h`, and `h`'s package depth.
pub fn proximity_parts(t: &ClassInfo, h: &ClassInfo) -> (usize, usize) {
    let shared = t
        .package_path
        .iter()
        .zip(&h.package_path)
        .take_while(|(a, b)| a == b)
        .count();
    (shared, h.package_path.len())
}

/// Shared package prefix normalized by the host's package depth. A host in
/// the default package scores 1 against other default-package classes and 0
/// otherwise.
pub fn package_proximity(t: &ClassInfo, h: &ClassInfo) -> f64 {
    let (shared, depth) = proximity_parts(t, h);
    if depth == 0 {
        return if t.package_path.is_empty() { 1.0 } else { 0.0 };
    }
    shared as f64 / depth as f64
}

pub fn is_utility_class(t: &ClassInfo) -> bool {
    t.simple_name().to_lowercase().contains("util")
}

/// `2 * proximity + utility`.
pub fn ranking_score(t: &ClassInfo, h: &ClassInfo) -> f64 {
    2.0 * package_proximity(t, h) + if is_utility_class(t) { 1.0 } else { 0.0 }
}

/// Field types of the host and parameter types of the method, in that
/// order, keeping only feasible ones.
pub fn enumerate_instance_targets(
    index: &ProjectIndex,
    method: &MethodRef,
) -> Result<Vec<TargetCandidate>, FilterError> {
    let host = index
        .class(&method.class)
        .ok_or_else(|| FilterError::UnknownClass(method.class.clone()))?;
    let m = host
        .method(&method.method)
        .ok_or_else(|| FilterError::UnknownMethod(method.clone()))?;
    let mut seen = BTreeSet::new();
    let types = host
        .fields
        .iter()
        .filter(|f| !f.is_static)
        .map(|f| f.declared_type.clone())
        .chain(m.parameters.iter().filter_map(|p| p.resolved.clone()));
    let mut out = Vec::new();
    for t in types {
        if !index.classes.contains_key(&t) || !seen.insert(t.clone()) {
            continue;
        }
        let v = check_instance_feasibility(index, method, &t)?;
        if v.feasible {
            out.push(TargetCandidate {
                target: t,
                heuristic_score: None,
                semantic_score: 0.0,
                feasibility: v,
            });
        }
    }
    Ok(out)
}

/// Every other project class ranked by [`ranking_score`] (ties by name),
/// cut to `limit`, then checked for feasibility.
pub fn enumerate_static_targets(
    index: &ProjectIndex,
    method: &MethodRef,
    limit: usize,
) -> Result<Vec<TargetCandidate>, FilterError> {
    let host = index
        .class(&method.class)
        .ok_or_else(|| FilterError::UnknownClass(method.class.clone()))?;
    let mut scored: Vec<(&ClassInfo, f64)> = index
        .classes
        .values()
        .filter(|c| c.qualified_name != host.qualified_name)
        .map(|c| (c, ranking_score(c, host)))
        .collect();
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| a.0.qualified_name.cmp(&b.0.qualified_name))
    });
    scored.truncate(limit);
    let mut out = Vec::new();
    for (c, score) in scored {
        let v = check_static_feasibility(index, method, &c.qualified_name)?;
        if v.feasible {
            out.push(TargetCandidate {
                target: c.qualified_name.clone(),
                heuristic_score: Some(score),
                semantic_score: 0.0,
                feasibility: v,
            });
        }
    }
    Ok(out)
}

/// Orders candidates by cosine between `method_text` and each target's
/// full class text, highest first (ties by name).
pub fn semantic_rerank(
    provider: &dyn EmbeddingProvider,
    index: &ProjectIndex,
    method_text: &str,
    mut candidates: Vec<TargetCandidate>,
) -> Result<Vec<TargetCandidate>, EmbeddingError> {
    let mv = provider.embed(method_text)?;
    for c in &mut candidates {
        if let Some(class) = index.class(&c.target) {
            c.semantic_score = cosine_similarity(&mv, &provider.embed(&class.text)?)?;
        }
    }
    candidates.sort_by(|a, b| {
        b.semantic_score
            .total_cmp(&a.semantic_score)
            .then_with(|| a.target.cmp(&b.target))
    });
    Ok(candidates)
}

/// Greedy packing in the given order; stops at the first summary that does
/// not fit. A first summary that alone exceeds the budget is cut down one
/// signature at a time and emitted by itself with a warning.
pub fn pack_summaries(summaries: Vec<ClassSummary>, budget: usize) -> Packed {
    let mut packed = Packed {
        summaries: Vec::new(),
        total_tokens: 0,
        budget,
        warnings: Vec::new(),
    };
    let mut iter = summaries.into_iter();
    let Some(first) = iter.next() else {
        return packed;
    };
    if first.token_estimate > budget {
        let mut s = first;
        let original = s.signatures.len();
        while s.token_estimate > budget && !s.signatures.is_empty() {
            s.signatures.pop();
            s = ClassSummary::new(s.qualified_name, s.fields, s.docstring, s.signatures);
        }
        packed.warnings.push(format!(
            "summary of {} exceeds the {budget}-token budget; kept {} of {original} signatures ({} tokens)",
            s.qualified_name,
            s.signatures.len(),
            s.token_estimate
        ));
        packed.total_tokens = s.token_estimate;
        packed.summaries.push(s);
        return packed;
    }
    packed.total_tokens = first.token_estimate;
    packed.summaries.push(first);
    for s in iter {
        if packed.total_tokens + s.token_estimate > budget {
            break;
        }
        packed.total_tokens += s.token_estimate;
        packed.summaries.push(s);
    }
    packed
}

/// Reranks feasible candidates semantically and packs their summaries.
pub fn semantic_rerank_and_pack(
    provider: &dyn EmbeddingProvider,
    index: &ProjectIndex,
    method_text: &str,
    candidates: Vec<TargetCandidate>,
    budget: usize,
) -> Result<(Vec<TargetCandidate>, Packed), EmbeddingError> {
    let ranked = semantic_rerank(provider, index, method_text, candidates)?;
    let summaries = ranked
        .iter()
        .filter_map(|c| index.class(&c.target))
        .map(ClassSummary::of_class)
        .collect();
    Ok((ranked, pack_summaries(summaries, budget)))
}
