//! Resolved model of a Java project.
//!
//! [`build_index`] parses every `.java` file under a set of source roots and
//! produces a [`ProjectIndex`]: classes, their fields and methods, and the
//! members each method body touches. The index is immutable once built; any
//! change to the sources means building a new one.

mod build;
pub(crate) mod java;
mod refs;
mod resolve;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{build_index, parse_java_ok};
pub use java::{erase_type, normalize_ws};
pub use resolve::resolve_type;

/// Version of the persisted index layout.
pub const INDEX_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no Java classes could be parsed under {0:?}")]
    EmptyProject(Vec<PathBuf>),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("method {method} is not declared in {class}")]
    MethodNotInClass { class: String, method: String },
    #[error("unsupported index schema version {0}")]
    SchemaVersion(u32),
    #[error("malformed index: {0}")]
    Json(#[from] serde_json::Error),
}

/// Half-open byte range into a source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Re-bases the span so that `origin` becomes offset zero.
    pub fn relative_to(&self, origin: usize) -> Span {
        Span::new(self.start - origin, self.end - origin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Public,
    Protected,
    Package,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    Class,
    Interface,
    Enum,
    Record,
    Annotation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportDecl {
    /// Dotted path without the trailing `.*`.
    pub path: String,
    pub is_static: bool,
    pub on_demand: bool,
    pub span: Span,
}

/// Per-file facts shared by every class declared in the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFileInfo {
    pub root: PathBuf,
    pub package: Vec<String>,
    pub imports: Vec<ImportDecl>,
    /// Offset right after the last import, or after the package declaration,
    /// or zero. New imports are inserted here.
    pub import_anchor: usize,
    pub is_test_source: bool,
    /// SHA-256 of the file contents at indexing time.
    pub sha256: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectIndex {
    pub schema_version: u32,
    pub source_roots: Vec<PathBuf>,
    pub packages: BTreeSet<String>,
    pub classes: BTreeMap<String, ClassInfo>,
    pub files: BTreeMap<PathBuf, SourceFileInfo>,
    /// context class -> simple name -> qualified name, for every type name
    /// mentioned in the context class that resolves inside the project.
    pub name_resolution: BTreeMap<String, BTreeMap<String, String>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub qualified_name: String,
    /// Name relative to the package; `Outer.Inner` for nested types.
    pub name: String,
    pub package_path: Vec<String>,
    pub kind: ClassKind,
    pub visibility: Visibility,
    pub is_interface: bool,
    pub is_abstract: bool,
    /// Set for static nested types.
    pub enclosing: Option<String>,
    pub fields: Vec<FieldInfo>,
    pub methods: Vec<MethodInfo>,
    pub docstring: Option<String>,
    pub source_file: PathBuf,
    /// Whole declaration, modifiers and annotations included.
    pub body_span: Span,
    /// The `{ ... }` member block.
    pub members_span: Span,
    /// Exact text of `body_span`.
    pub text: String,
    pub super_types: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldInfo {
    pub name: String,
    /// Qualified name when the type resolves in the project, else the erased
    /// raw text.
    pub declared_type: String,
    pub raw_type: String,
    pub is_static: bool,
    pub is_final: bool,
    pub visibility: Visibility,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub declared_type: String,
    /// Qualified name if the erased type is a project class.
    pub resolved: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    Field,
    Method,
}

/// How a member was reached from inside a method body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefAccess {
    /// Bare `name` or `name(..)`.
    Implicit,
    /// `this.name`.
    This,
    /// `super.name`.
    Super,
    /// `Type.name`.
    Static,
    /// `variable.name` where the variable is a parameter or local.
    Variable,
    /// Any other receiver expression.
    Expression,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberRef {
    pub kind: MemberKind,
    /// Owning class when it resolves inside the project.
    pub owner: Option<String>,
    pub name: String,
    pub access: RefAccess,
    /// Whole invocation or field-access expression.
    pub span: Span,
    pub name_span: Span,
    pub receiver_span: Option<Span>,
    /// Receiver variable name for [`RefAccess::Variable`], or the host field
    /// name when the receiver is `field` / `this.field`.
    pub receiver_name: Option<String>,
    /// Argument expression spans; methods only.
    pub args: Vec<Span>,
    pub args_span: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamUse {
    pub index: usize,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodInfo {
    pub name: String,
    /// `name(T1,T2):R` with erased, unqualified types.
    pub signature: String,
    pub return_type: String,
    pub parameters: Vec<Parameter>,
    pub visibility: Visibility,
    pub annotations: Vec<String>,
    pub is_static: bool,
    pub is_abstract: bool,
    pub is_constructor: bool,
    pub is_override: bool,
    pub is_getter_setter: bool,
    pub is_test: bool,
    pub is_empty_or_comment_only: bool,
    /// Whole declaration, modifiers and annotations included.
    pub body_span: Span,
    pub name_span: Span,
    pub params_span: Span,
    /// The `{ ... }` block, absent for abstract and native methods.
    pub block_span: Option<Span>,
    /// Immediately preceding `/** */` comment.
    pub doc_span: Option<Span>,
    pub referenced_members: Vec<MemberRef>,
    /// Bare `this` expressions (not followed by a member access).
    pub this_uses: Vec<Span>,
    pub param_uses: Vec<ParamUse>,
    /// Parameters, locals and host fields that are assigned in the body.
    pub assigned_names: Vec<String>,
    pub uses_super: bool,
}

/// Reference to a method inside the index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodRef {
    pub class: String,
    /// Erased key `name(T1,T2)`.
    pub method: String,
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.class, self.method)
    }
}

impl MethodInfo {
    /// Erased `name(T1,T2)` key; used for gold matching and duplicate checks.
    pub fn key(&self) -> String {
        let types: Vec<String> = self
            .parameters
            .iter()
            .map(|p| erase_type(&p.declared_type))
            .collect();
        format!("{}({})", self.name, types.join(","))
    }

    pub fn arity(&self) -> usize {
        self.parameters.len()
    }
}

impl ClassInfo {
    pub fn simple_name(&self) -> &str {
        self.name.rsplit('.').next().unwrap_or(&self.name)
    }

    pub fn package(&self) -> String {
        self.package_path.join(".")
    }

    pub fn method(&self, key: &str) -> Option<&MethodInfo> {
        self.methods.iter().find(|m| m.key() == key)
    }

    pub fn field(&self, name: &str) -> Option<&FieldInfo> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Text of `span` taken from this class' own text.
    pub fn slice(&self, span: Span) -> &str {
        let rel = span.relative_to(self.body_span.start);
        &self.text[rel.start..rel.end]
    }

    pub fn method_text(&self, method: &MethodInfo) -> &str {
        self.slice(method.body_span)
    }

    pub fn method_ref(&self, method: &MethodInfo) -> MethodRef {
        MethodRef {
            class: self.qualified_name.clone(),
            method: method.key(),
        }
    }
}

impl ProjectIndex {
    pub fn class(&self, qualified_name: &str) -> Option<&ClassInfo> {
        self.classes.get(qualified_name)
    }

    pub fn method(&self, mref: &MethodRef) -> Option<(&ClassInfo, &MethodInfo)> {
        let class = self.classes.get(&mref.class)?;
        let method = class.method(&mref.method)?;
        Some((class, method))
    }

    pub fn method_count(&self) -> usize {
        self.classes.values().map(|c| c.methods.len()).sum()
    }

    /// Transitive project-local super types of `class`, nearest first.
    pub fn ancestors(&self, class: &str) -> Vec<&ClassInfo> {
        let mut out: Vec<&ClassInfo> = Vec::new();
        let mut seen = BTreeSet::new();
        let mut queue: Vec<&str> = vec![class];
        while let Some(name) = queue.pop() {
            let Some(c) = self.classes.get(name) else {
                continue;
            };
            for sup in &c.super_types {
                if let Some(s) = self.classes.get(sup) {
                    if seen.insert(s.qualified_name.clone()) {
                        out.push(s);
                        queue.push(&s.qualified_name);
                    }
                }
            }
        }
        out
    }

    pub fn is_subtype_of(&self, class: &str, ancestor: &str) -> bool {
        class == ancestor
            || self
                .ancestors(class)
                .iter()
                .any(|c| c.qualified_name == ancestor)
    }

    /// Every method reference in the project that targets `owner.name` with
    /// the given arity, paired with the class and method that contain it.
    pub fn call_sites<'a>(
        &'a self,
        owner: &'a str,
        name: &'a str,
        arity: usize,
    ) -> impl Iterator<Item = (&'a ClassInfo, &'a MethodInfo, &'a MemberRef)> + 'a {
        self.classes.values().flat_map(move |c| {
            c.methods.iter().flat_map(move |m| {
                m.referenced_members
                    .iter()
                    .filter(move |r| {
                        r.kind == MemberKind::Method
                            && r.name == name
                            && r.args.len() == arity
                            && r.owner.as_deref() == Some(owner)
                    })
                    .map(move |r| (c, m, r))
            })
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let index: ProjectIndex = serde_json::from_str(text)?;
        if index.schema_version != INDEX_SCHEMA_VERSION {
            return Err(ModelError::SchemaVersion(index.schema_version));
        }
        Ok(index)
    }
}

/// The class source with `method`'s declaration removed; every other byte is
/// kept as is.
pub fn class_text_without_method(
    class: &ClassInfo,
    method: &MethodInfo,
) -> Result<String, ModelError> {
    let owned = class
        .methods
        .iter()
        .any(|m| m.body_span == method.body_span && m.name == method.name);
    if !owned || !class.body_span.contains(&method.body_span) {
        return Err(ModelError::MethodNotInClass {
            class: class.qualified_name.clone(),
            method: method.key(),
        });
    }
    let rel = method.body_span.relative_to(class.body_span.start);
    let mut out = String::with_capacity(class.text.len() - rel.len());
    out.push_str(&class.text[..rel.start]);
    out.push_str(&class.text[rel.end..]);
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Java identifier-like tokens of `text`, in order. Comments and string
/// contents are not skipped.
pub fn identifiers(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$'))
        .filter(|t| t.chars().next().is_some_and(|c| !c.is_ascii_digit()))
}
