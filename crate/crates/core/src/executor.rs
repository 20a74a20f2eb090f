//! Turns a feasible `(m, H, T)` move into text edits and applies them.
//!
//! Plans are computed against the files on disk and pinned to the hashes
//! recorded in the index; a plan whose files changed in the meantime is
//! rejected with [`ExecError::StaleIndex`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use similar::TextDiff;
use thiserror::Error;

use crate::filter::{
    check_feasibility, host_family, member_is_static, FeasibilityVerdict, FilterError, MoveRoute,
};
use crate::model::{
    build_index, erase_type, identifiers, java, parse_java_ok, resolve_type, sha256_hex, ClassInfo,
    MethodInfo, MethodRef, ModelError, ProjectIndex, RefAccess, Span, Visibility,
};

static APPLY_LOCK: Mutex<()> = Mutex::new(());

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
    "try",
    "void",
    "volatile",
    "while",
    "true",
    "false",
    "null",
    "var",
    "record",
    "yield",
];

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("move of {} to {} is not feasible: {}", .0.method, .0.target, .0.notes.join("; "))]
    Infeasible(Box<FeasibilityVerdict>),
    #[error("conflicting edits in {path}: {detail}")]
    PlanConflict { path: PathBuf, detail: String },
    #[error("stale index: {0} changed since it was indexed")]
    StaleIndex(PathBuf),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("rewritten project does not parse: {0}")]
    ReparseFailed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextEdit {
    pub span: Span,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilePlan {
    pub path: PathBuf,
    /// Hash the file must still have when the plan is applied.
    pub sha256: String,
    /// Non-overlapping, sorted by descending offset so they can be applied
    /// one after another.
    pub edits: Vec<TextEdit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovePlan {
    pub method: MethodRef,
    pub target: String,
    pub route: MoveRoute,
    /// Key of the method once it lives in the target.
    pub new_method: MethodRef,
    pub new_signature: String,
    pub host_param_added: bool,
    pub call_sites_rewritten: usize,
    /// The declaration as inserted into the target.
    pub moved_text: String,
    pub files: Vec<FilePlan>,
    pub source_roots: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyResult {
    pub files_changed: Vec<PathBuf>,
    pub call_sites_rewritten: usize,
    pub reparse_ok: bool,
}

#[derive(Debug)]
pub struct Applied {
    pub result: ApplyResult,
    /// Index rebuilt from the rewritten sources.
    pub index: ProjectIndex,
}

struct Builder<'a> {
    index: &'a ProjectIndex,
    texts: BTreeMap<PathBuf, String>,
    edits: BTreeMap<PathBuf, Vec<TextEdit>>,
    /// Imports to add, per file, in insertion order.
    imports: BTreeMap<PathBuf, Vec<String>>,
}

impl<'a> Builder<'a> {
    fn load(&mut self, path: &Path) -> Result<String, ExecError> {
        if let Some(t) = self.texts.get(path) {
            return Ok(t.clone());
        }
        let text = read_checked(self.index, path)?;
        self.texts.insert(path.to_path_buf(), text.clone());
        Ok(text)
    }

    fn edit(&mut self, path: &Path, span: Span, replacement: impl Into<String>) {
        self.edits
            .entry(path.to_path_buf())
            .or_default()
            .push(TextEdit {
                span,
                replacement: replacement.into(),
            });
    }

    fn add_import(&mut self, file: &Path, path: &str) {
        let list = self.imports.entry(file.to_path_buf()).or_default();
        if !list.iter().any(|p| p == path) {
            list.push(path.to_string());
        }
    }

    fn simple_taken(&self, file: &Path, simple: &str, except: &str) -> bool {
        let existing = self.index.files.get(file).is_some_and(|f| {
            f.imports.iter().any(|i| {
                !i.is_static && !i.on_demand && i.path != except && last_segment(&i.path) == simple
            })
        });
        existing
            || self
                .imports
                .get(file)
                .is_some_and(|l| l.iter().any(|p| p != except && last_segment(p) == simple))
    }

    /// How to spell class `qn` inside `ctx`, adding an import when that is
    /// enough and falling back to the qualified name on a clash.
    fn qualifier(&mut self, ctx: &ClassInfo, qn: &str) -> String {
        let Some(c) = self.index.class(qn) else {
            return qn.to_string();
        };
        if resolve_type(self.index, ctx, &c.name).as_deref() == Some(qn) {
            return c.name.clone();
        }
        let mut top = c;
        while let Some(e) = top.enclosing.as_deref().and_then(|e| self.index.class(e)) {
            top = e;
        }
        if top.package_path.is_empty() {
            return c.name.clone();
        }
        let file = ctx.source_file.clone();
        let simple = top.simple_name().to_string();
        let planned = self
            .imports
            .get(&file)
            .is_some_and(|l| l.contains(&top.qualified_name));
        if planned {
            return c.name.clone();
        }
        if resolve_type(self.index, ctx, &simple).is_some()
            || self.simple_taken(&file, &simple, &top.qualified_name)
        {
            return qn.to_string();
        }
        self.add_import(&file, &top.qualified_name);
        c.name.clone()
    }

    /// Makes the simple name `tok` mean `qn` inside `ctx`.
    fn import_token(&mut self, ctx: &ClassInfo, tok: &str, qn: &str) {
        if resolve_type(self.index, ctx, tok).as_deref() == Some(qn) {
            return;
        }
        let Some(c) = self.index.class(qn) else {
            return;
        };
        if c.package_path.is_empty() {
            return;
        }
        if !self.simple_taken(&ctx.source_file, tok, qn) {
            let file = ctx.source_file.clone();
            self.add_import(&file, qn);
        }
    }
}

fn read_checked(index: &ProjectIndex, path: &Path) -> Result<String, ExecError> {
    let text = fs::read_to_string(path).map_err(|source| ExecError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match index.files.get(path) {
        Some(info) if info.sha256 == sha256_hex(text.as_bytes()) => Ok(text),
        _ => Err(ExecError::StaleIndex(path.to_path_buf())),
    }
}

fn last_segment(path: &str) -> &str {
    path.rsplit('.').next().unwrap_or(path)
}

fn line_start(text: &str, pos: usize) -> usize {
    text[..pos].rfind('\n').map_or(0, |i| i + 1)
}

fn blank(s: &str) -> bool {
    s.chars().all(|c| c == ' ' || c == '\t' || c == '\r')
}

fn indent_at(text: &str, pos: usize) -> Option<&str> {
    let pre = &text[line_start(text, pos)..pos];
    blank(pre).then_some(pre)
}

fn newline_of(text: &str) -> &'static str {
    if text.contains("\r\n") {
        "\r\n"
    } else {
        "\n"
    }
}

fn lower_camel(name: &str) -> String {
    let chars: Vec<char> = name.chars().collect();
    let upper = chars.iter().take_while(|c| c.is_uppercase()).count();
    let cut = match upper {
        0 => 0,
        n if n == chars.len() => n,
        1 => 1,
        n => n - 1,
    };
    chars[..cut]
        .iter()
        .flat_map(|c| c.to_lowercase())
        .chain(chars[cut..].iter().copied())
        .collect()
}

/// Whether `expr` must be wrapped before it can take a `.m(..)` suffix.
/// Names, field chains, calls and array accesses can not.
fn needs_parens(expr: &str) -> bool {
    let e = expr.trim();
    if !e.starts_with(|c: char| c.is_alphabetic() || c == '_' || c == '$') {
        return true;
    }
    let mut depth = 0i32;
    let mut quoted = false;
    for c in e.chars() {
        match c {
            '"' | '\'' => quoted = !quoted,
            _ if quoted => {}
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ if depth > 0 => {}
            c if c.is_alphanumeric() || c == '_' || c == '$' || c == '.' => {}
            _ => return true,
        }
    }
    quoted || depth != 0
}

/// Applies edits in the given order; with descending offsets every span
/// still refers to the original text.
pub fn apply_edits(text: &str, edits: &[TextEdit]) -> String {
    let mut out = text.to_string();
    for e in edits {
        out.replace_range(e.span.start..e.span.end, &e.replacement);
    }
    out
}

/// Sorts edits by descending offset, drops exact duplicates and rejects
/// overlaps.
fn normalize(path: &Path, mut edits: Vec<TextEdit>) -> Result<Vec<TextEdit>, ExecError> {
    edits.sort_by(|a, b| {
        a.span
            .cmp(&b.span)
            .then_with(|| a.replacement.cmp(&b.replacement))
    });
    edits.dedup();
    for w in edits.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let same_point = a.span.is_empty() && b.span.is_empty() && a.span.start == b.span.start;
        if a.span.end > b.span.start || same_point {
            return Err(ExecError::PlanConflict {
                path: path.to_path_buf(),
                detail: format!("edits at {:?} and {:?} overlap", a.span, b.span),
            });
        }
    }
    edits.reverse();
    Ok(edits)
}

struct Header {
    /// File offsets of the visibility keyword, if written.
    vis_keyword: Option<Span>,
    /// Where a new modifier keyword goes.
    modifier_insert: usize,
    params: Span,
    param_texts: Vec<String>,
    varargs: bool,
}

/// Re-reads the declaration on its own to find the modifier and parameter
/// nodes.
fn read_header(file_text: &str, m: &MethodInfo) -> Option<Header> {
    const PREFIX: &str = "class __Wrap {\n";
    let decl = &file_text[m.body_span.start..m.body_span.end];
    let src = format!("{PREFIX}{decl}\n}}");
    let tree = java::parse(&src)?;
    let class = java::named_children(tree.root_node())
        .into_iter()
        .find(|n| n.kind() == "class_declaration")?;
    let body = class.child_by_field_name("body")?;
    let node = java::named_children(body)
        .into_iter()
        .find(|n| n.kind() == "method_declaration")?;
    let shift = |p: usize| p - PREFIX.len() + m.body_span.start;
    let mut vis_keyword = None;
    let mut first_keyword = None;
    if let Some(mods) = java::child_of_kind(node, "modifiers") {
        for k in java::children(mods) {
            if matches!(k.kind(), "marker_annotation" | "annotation")
                || !k.is_named() && k.kind().len() < 3
            {
                continue;
            }
            if first_keyword.is_none() && !k.kind().contains("annotation") {
                first_keyword = Some(shift(k.start_byte()));
            }
            if matches!(k.kind(), "public" | "private" | "protected") {
                vis_keyword = Some(Span::new(shift(k.start_byte()), shift(k.end_byte())));
            }
        }
    }
    let after_mods = java::named_children(node)
        .into_iter()
        .find(|n| n.kind() != "modifiers")
        .map(|n| shift(n.start_byte()))?;
    let params = node.child_by_field_name("parameters")?;
    let mut param_texts = Vec::new();
    let mut varargs = false;
    for p in java::named_children(params) {
        match p.kind() {
            "formal_parameter" => param_texts.push(java::text(p, &src).to_string()),
            "spread_parameter" => {
                varargs = true;
                param_texts.push(java::text(p, &src).to_string());
            }
            _ => {}
        }
    }
    Some(Header {
        vis_keyword,
        modifier_insert: first_keyword.unwrap_or(after_mods),
        params: Span::new(shift(params.start_byte()), shift(params.end_byte())),
        param_texts,
        varargs,
    })
}

fn conflict(path: &Path, detail: impl Into<String>) -> ExecError {
    ExecError::PlanConflict {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

/// Plans moving `method` into `target`. The move must pass the feasibility
/// check; the chosen route decides how the body and call sites change.
pub fn plan_move(
    index: &ProjectIndex,
    method: &MethodRef,
    target: &str,
) -> Result<MovePlan, ExecError> {
    let verdict = check_feasibility(index, method, target)?;
    let route = match (&verdict.route, verdict.feasible) {
        (Some(r), true) => r.clone(),
        _ => return Err(ExecError::Infeasible(Box::new(verdict))),
    };
    let (host, m) = index
        .method(method)
        .ok_or_else(|| FilterError::UnknownMethod(method.clone()))?;
    let t = index
        .class(target)
        .ok_or_else(|| FilterError::UnknownClass(target.to_string()))?;
    let mut b = Builder {
        index,
        texts: BTreeMap::new(),
        edits: BTreeMap::new(),
        imports: BTreeMap::new(),
    };
    let hpath = host.source_file.clone();
    let tpath = t.source_file.clone();
    let htext = b.load(&hpath)?;
    let ttext = b.load(&tpath)?;
    let header = read_header(&htext, m)
        .ok_or_else(|| conflict(&hpath, "cannot re-read the method header"))?;

    let decl_start = m.doc_span.map_or(m.body_span.start, |d| d.start);
    let body_text = &htext[decl_start..m.body_span.end];
    let tokens: BTreeSet<&str> = identifiers(body_text).collect();
    let family = host_family(index, host);
    let t_family = host_family(index, t);

    let host_param = match &route {
        MoveRoute::Parameter {
            host_param: true, ..
        } => {
            let base = lower_camel(host.simple_name());
            let mut name = base.clone();
            let mut n = 2;
            while tokens.contains(name.as_str()) || JAVA_KEYWORDS.contains(&name.as_str()) {
                name = format!("{base}{n}");
                n += 1;
            }
            Some(name)
        }
        _ => None,
    };

    // edits inside the declaration, in file offsets
    let mut local: Vec<TextEdit> = Vec::new();
    let mut push = |span: Span, text: String| {
        local.push(TextEdit {
            span,
            replacement: text,
        })
    };
    for r in &m.referenced_members {
        let Some(owner) = r.owner.as_deref() else {
            continue;
        };
        let is_static = member_is_static(index, r);
        let host_member = family.contains(owner);
        let field_receiver = matches!(&route, MoveRoute::Field { name } if r.kind == crate::model::MemberKind::Field && &r.name == name && host_member);
        match r.access {
            RefAccess::Implicit => {
                if field_receiver {
                    push(r.span, "this".into());
                } else if is_static {
                    if t_family.contains(owner) {
                        continue;
                    }
                    let q = b.qualifier(
                        t,
                        if host_member {
                            &host.qualified_name
                        } else {
                            owner
                        },
                    );
                    push(
                        Span::new(r.name_span.start, r.name_span.start),
                        format!("{q}."),
                    );
                } else if host_member {
                    if let Some(hp) = &host_param {
                        push(
                            Span::new(r.name_span.start, r.name_span.start),
                            format!("{hp}."),
                        );
                    }
                }
            }
            RefAccess::This if host_member => {
                let Some(recv) = r.receiver_span else {
                    continue;
                };
                if field_receiver {
                    push(r.span, "this".into());
                } else if is_static {
                    let q = b.qualifier(t, &host.qualified_name);
                    push(recv, q);
                } else if let Some(hp) = &host_param {
                    push(recv, hp.clone());
                }
            }
            _ => {}
        }
    }
    if let MoveRoute::Parameter { index: p, .. } = &route {
        for u in m.param_uses.iter().filter(|u| u.index == *p) {
            push(u.span, "this".into());
        }
        if let Some(hp) = &host_param {
            for s in &m.this_uses {
                push(*s, hp.clone());
            }
        }
        let mut params: Vec<String> = header
            .param_texts
            .iter()
            .enumerate()
            .filter(|(i, _)| i != p)
            .map(|(_, s)| s.clone())
            .collect();
        if let Some(hp) = &host_param {
            if header.varargs && *p + 1 != header.param_texts.len() {
                return Err(conflict(
                    &hpath,
                    "cannot append the host parameter after varargs",
                ));
            }
            let q = b.qualifier(t, &host.qualified_name);
            params.push(format!("{q} {hp}"));
        }
        push(header.params, format!("({})", params.join(", ")));
    }

    // visibility: callers outside the target's package need public access
    let sites: Vec<_> = index
        .call_sites(&host.qualified_name, &m.name, m.arity())
        .filter(|(c, sm, _)| {
            !(c.qualified_name == host.qualified_name && sm.body_span == m.body_span)
        })
        .collect();
    let need_public = sites.iter().any(|(c, _, _)| c.package() != t.package());
    let new_vis = match (need_public, m.visibility) {
        (true, _) => Visibility::Public,
        (false, Visibility::Private) => Visibility::Package,
        (false, v) => v,
    };
    if new_vis != m.visibility {
        match (header.vis_keyword, new_vis) {
            (Some(kw), Visibility::Package) => {
                let rest = &htext[kw.end..];
                let ws = rest.len() - rest.trim_start_matches([' ', '\t']).len();
                push(Span::new(kw.start, kw.end + ws), String::new());
            }
            (Some(kw), _) => push(kw, "public".into()),
            (None, _) => push(
                Span::new(header.modifier_insert, header.modifier_insert),
                "public ".into(),
            ),
        }
    }
    let local = normalize(&hpath, local)?;
    let rebased: Vec<TextEdit> = local
        .iter()
        .map(|e| TextEdit {
            span: e.span.relative_to(decl_start),
            replacement: e.replacement.clone(),
        })
        .collect();
    let rewritten = apply_edits(body_text, &rebased);

    // re-indent for the target
    let nl = newline_of(&ttext);
    let base = indent_at(&htext, decl_start).unwrap_or("").to_string();
    let member_indent = t
        .methods
        .iter()
        .map(|x| x.doc_span.map_or(x.body_span.start, |d| d.start))
        .chain(t.fields.iter().map(|f| f.span.start))
        .min()
        .and_then(|p| indent_at(&ttext, p).map(str::to_string))
        .unwrap_or_else(|| {
            let class_indent = indent_at(&ttext, t.body_span.start).unwrap_or("");
            let host_class_indent = indent_at(&htext, host.body_span.start).unwrap_or("");
            let unit = base
                .strip_prefix(host_class_indent)
                .filter(|u| !u.is_empty())
                .unwrap_or("    ");
            format!("{class_indent}{unit}")
        });
    let moved_lines: Vec<String> = rewritten
        .split('\n')
        .enumerate()
        .map(|(i, line)| {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if i == 0 {
                format!("{member_indent}{line}")
            } else if blank(line) {
                String::new()
            } else if let Some(rest) = line.strip_prefix(base.as_str()) {
                format!("{member_indent}{rest}")
            } else {
                line.to_string()
            }
        })
        .collect();
    let moved_text = moved_lines.join(nl);

    // remove from the host, whole lines where possible
    let mut rm_start = decl_start;
    let mut rm_end = m.body_span.end;
    let ls = line_start(&htext, decl_start);
    if blank(&htext[ls..decl_start]) {
        rm_start = ls;
        let rest = &htext[rm_end..];
        let trail = rest.len() - rest.trim_start_matches([' ', '\t']).len();
        let after = &rest[trail..];
        if after.starts_with("\r\n") {
            rm_end += trail + 2;
        } else if after.starts_with('\n') {
            rm_end += trail + 1;
        }
        if rm_start > 0 {
            let prev = line_start(&htext, rm_start - 1);
            if blank(&htext[prev..rm_start - 1]) {
                rm_start = prev;
            }
        }
    }
    b.edit(&hpath, Span::new(rm_start, rm_end), "");

    // insert before the target's closing brace
    let close = t.members_span.end - 1;
    let cls = line_start(&ttext, close);
    if blank(&ttext[cls..close]) {
        let before = ttext[..cls].trim_end();
        let lead = if before.ends_with('{') { "" } else { nl };
        b.edit(
            &tpath,
            Span::new(cls, cls),
            format!("{lead}{moved_text}{nl}"),
        );
    } else {
        let class_indent = indent_at(&ttext, t.body_span.start).unwrap_or("");
        b.edit(
            &tpath,
            Span::new(close, close),
            format!("{nl}{moved_text}{nl}{class_indent}"),
        );
    }

    // imports the body needs in the target's file
    let empty = BTreeMap::new();
    let host_names = index
        .name_resolution
        .get(&host.qualified_name)
        .unwrap_or(&empty);
    for tok in &tokens {
        if let Some(qn) = host_names.get(*tok) {
            if qn != &t.qualified_name && index.classes.contains_key(qn) {
                b.import_token(t, tok, qn);
            }
        }
    }
    if let (Some(hf), Some(tf)) = (index.files.get(&hpath), index.files.get(&tpath)) {
        if hpath != tpath {
            let has =
                |p: &str, st: bool| tf.imports.iter().any(|i| i.path == p && i.is_static == st);
            let mut copies: Vec<(String, bool)> = Vec::new();
            for imp in &hf.imports {
                if has(&imp.path, imp.is_static) || index.classes.contains_key(&imp.path) {
                    continue;
                }
                let wanted = if imp.on_demand {
                    !index.packages.contains(&imp.path)
                } else {
                    tokens.contains(last_segment(&imp.path))
                };
                if wanted {
                    copies.push((imp.path.clone(), imp.is_static));
                }
            }
            for (p, st) in copies {
                let line = match (st, hf.imports.iter().any(|i| i.path == p && i.on_demand)) {
                    (true, true) => format!("static {p}.*"),
                    (true, false) => format!("static {p}"),
                    (false, true) => format!("{p}.*"),
                    (false, false) => p,
                };
                b.add_import(&tpath, &line);
            }
        }
    }

    // call sites
    let arity = m.arity();
    let mut rewritten_sites = 0;
    for (sc, _, r) in &sites {
        let path = sc.source_file.clone();
        let text = b.load(&path)?;
        match &route {
            MoveRoute::Static => {
                let q = b.qualifier(sc, &t.qualified_name);
                match (r.access, r.receiver_span) {
                    (RefAccess::Implicit, _) | (_, None) => b.edit(
                        &path,
                        Span::new(r.name_span.start, r.name_span.start),
                        format!("{q}."),
                    ),
                    (_, Some(recv)) => b.edit(&path, recv, q),
                }
            }
            MoveRoute::Parameter {
                index: p,
                host_param,
            } => {
                if r.args.len() != arity {
                    continue;
                }
                let recv = match (r.access, r.receiver_span) {
                    (RefAccess::Implicit, _) | (_, None) => "this".to_string(),
                    (_, Some(s)) => text[s.start..s.end].to_string(),
                };
                let arg = text[r.args[*p].start..r.args[*p].end].trim();
                let new_recv = if needs_parens(arg) {
                    format!("({arg})")
                } else {
                    arg.to_string()
                };
                let mut args: Vec<&str> = r
                    .args
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i != p)
                    .map(|(_, s)| text[s.start..s.end].trim())
                    .collect();
                if *host_param {
                    args.push(&recv);
                }
                b.edit(
                    &path,
                    r.span,
                    format!("{new_recv}.{}({})", m.name, args.join(", ")),
                );
            }
            MoveRoute::Field { name } => match (r.access, r.receiver_span) {
                (RefAccess::Implicit, _) | (_, None) => b.edit(
                    &path,
                    Span::new(r.name_span.start, r.name_span.start),
                    format!("{name}."),
                ),
                (_, Some(s)) => {
                    let recv = text[s.start..s.end].to_string();
                    b.edit(&path, s, format!("{recv}.{name}"));
                }
            },
        }
        rewritten_sites += 1;
    }

    // static imports of the moved method
    if route == MoveRoute::Static {
        let wanted = format!("{}.{}", host.qualified_name, m.name);
        let files: Vec<(PathBuf, Span)> = index
            .files
            .iter()
            .flat_map(|(p, f)| {
                f.imports
                    .iter()
                    .filter(|i| i.is_static && !i.on_demand && i.path == wanted)
                    .map(move |i| (p.clone(), i.span))
            })
            .collect();
        for (p, s) in files {
            let text = b.load(&p)?;
            let start = line_start(&text, s.start);
            let start = if blank(&text[start..s.start]) {
                start
            } else {
                s.start
            };
            let mut end = s.end;
            let rest = &text[end..];
            if rest.starts_with("\r\n") {
                end += 2;
            } else if rest.starts_with('\n') {
                end += 1;
            }
            b.edit(&p, Span::new(start, end), "");
        }
    }

    // one edit per file for new imports
    for (file, list) in std::mem::take(&mut b.imports) {
        let text = b.load(&file)?;
        let Some(info) = index.files.get(&file) else {
            continue;
        };
        let nl = newline_of(&text);
        let anchor = info.import_anchor;
        let lines: Vec<String> = list.iter().map(|p| format!("import {p};")).collect();
        let block = if !info.imports.is_empty() {
            lines.iter().map(|l| format!("{nl}{l}")).collect::<String>()
        } else if anchor > 0 {
            format!("{nl}{nl}{}", lines.join(nl))
        } else {
            format!("{}{nl}{nl}", lines.join(nl))
        };
        b.edit(&file, Span::new(anchor, anchor), block);
    }

    // in-body edits only matter for the text we moved; the host removal
    // already covers their spans
    let mut files = Vec::new();
    for (path, edits) in std::mem::take(&mut b.edits) {
        let edits = normalize(&path, edits)?;
        let sha256 = index.files[&path].sha256.clone();
        files.push(FilePlan {
            path,
            sha256,
            edits,
        });
    }

    let mut new_types: Vec<String> = m
        .parameters
        .iter()
        .map(|p| erase_type(&p.declared_type))
        .collect();
    if let MoveRoute::Parameter {
        index: p,
        host_param: hp,
    } = &route
    {
        new_types.remove(*p);
        if *hp {
            new_types.push(host.simple_name().to_string());
        }
    }
    let ret = m.signature.rsplit_once(':').map_or("", |(_, r)| r);
    Ok(MovePlan {
        method: method.clone(),
        target: target.to_string(),
        host_param_added: host_param.is_some(),
        new_method: MethodRef {
            class: target.to_string(),
            method: format!("{}({})", m.name, new_types.join(",")),
        },
        new_signature: format!("{}({}):{ret}", m.name, new_types.join(",")),
        route,
        call_sites_rewritten: rewritten_sites,
        moved_text,
        files,
        source_roots: index.source_roots.clone(),
    })
}

impl MovePlan {
    /// New contents of every touched file, checked against the planned hashes.
    pub fn rewritten(&self) -> Result<Vec<(PathBuf, String, String)>, ExecError> {
        let mut out = Vec::new();
        for f in &self.files {
            let old = fs::read_to_string(&f.path).map_err(|source| ExecError::Io {
                path: f.path.clone(),
                source,
            })?;
            if sha256_hex(old.as_bytes()) != f.sha256 {
                return Err(ExecError::StaleIndex(f.path.clone()));
            }
            let new = apply_edits(&old, &f.edits);
            out.push((f.path.clone(), old, new));
        }
        Ok(out)
    }

    /// Unified diff of the plan against the current files.
    pub fn diff(&self) -> Result<String, ExecError> {
        let mut out = String::new();
        for (path, old, new) in self.rewritten()? {
            let shown = self
                .source_roots
                .iter()
                .find_map(|r| path.strip_prefix(r).ok())
                .unwrap_or(&path)
                .display()
                .to_string();
            let diff = TextDiff::from_lines(&old, &new);
            out.push_str(
                &diff
                    .unified_diff()
                    .context_radius(3)
                    .header(&format!("a/{shown}"), &format!("b/{shown}"))
                    .to_string(),
            );
        }
        Ok(out)
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<(), ExecError> {
    let io_err = |source| ExecError::Io {
        path: path.to_path_buf(),
        source,
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.movesmith.tmp"));
    fs::write(&tmp, text).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

fn restore(originals: &[(PathBuf, String)]) {
    for (p, text) in originals {
        if let Err(e) = write_atomic(p, text) {
            log::error!("rollback of {} failed: {e}", p.display());
        }
    }
}

pub fn apply(plan: &MovePlan) -> Result<Applied, ExecError> {
    apply_with(plan, |_, _| {})
}

/// Like [`apply`]; `before_write` sees each new file text just before it is
/// written. Any parse or re-index failure restores every touched file.
pub fn apply_with(
    plan: &MovePlan,
    before_write: impl Fn(&Path, &mut String),
) -> Result<Applied, ExecError> {
    let _guard = APPLY_LOCK.lock().unwrap_or_else(|p| p.into_inner());
    let files = plan.rewritten()?;
    let mut written: Vec<(PathBuf, String)> = Vec::new();
    for (path, old, mut new) in files.iter().cloned() {
        before_write(&path, &mut new);
        if let Err(e) = write_atomic(&path, &new) {
            restore(&written);
            return Err(e);
        }
        written.push((path, old));
    }
    let failure = files
        .iter()
        .filter_map(|(p, _, _)| {
            let text = fs::read_to_string(p).ok()?;
            (!parse_java_ok(&text)).then(|| format!("{} has syntax errors", p.display()))
        })
        .next();
    let outcome = match failure {
        Some(f) => Err(f),
        None => match build_index(&plan.source_roots) {
            Err(e) => Err(e.to_string()),
            Ok(idx) => {
                let moved = idx.method(&plan.new_method).is_some();
                let gone = idx.method(&plan.method).is_none();
                if moved && gone {
                    Ok(idx)
                } else {
                    Err(format!(
                        "{} not found in {} after the move",
                        plan.new_method.method, plan.target
                    ))
                }
            }
        },
    };
    match outcome {
        Ok(index) => Ok(Applied {
            result: ApplyResult {
                files_changed: files.into_iter().map(|(p, _, _)| p).collect(),
                call_sites_rewritten: plan.call_sites_rewritten,
                reparse_ok: true,
            },
            index,
        }),
        Err(detail) => {
            restore(&written);
            Err(ExecError::ReparseFailed(detail))
        }
    }
}
