//! Small helpers over the tree-sitter Java grammar.

use tree_sitter::{Node, Parser, Tree};

use super::{Span, Visibility};

pub(crate) fn parse(text: &str) -> Option<Tree> {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_java::LANGUAGE.into())
        .expect("Java grammar is compatible with the linked tree-sitter");
    parser.parse(text, None)
}

pub(crate) fn span(node: Node<'_>) -> Span {
    Span::new(node.start_byte(), node.end_byte())
}

pub(crate) fn text<'a>(node: Node<'_>, src: &'a str) -> &'a str {
    &src[node.start_byte()..node.end_byte()]
}

pub(crate) fn named_children<'t>(node: Node<'t>) -> Vec<Node<'t>> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).collect()
}

pub(crate) fn children<'t>(node: Node<'t>) -> Vec<Node<'t>> {
    let mut cursor = node.walk();
    node.children(&mut cursor).collect()
}

pub(crate) fn child_of_kind<'t>(node: Node<'t>, kind: &str) -> Option<Node<'t>> {
    children(node).into_iter().find(|c| c.kind() == kind)
}

/// True when `node` is the `field` child of its parent.
pub(crate) fn is_field_of(node: Node<'_>, field: &str) -> bool {
    node.parent()
        .and_then(|p| p.child_by_field_name(field))
        .is_some_and(|c| c.id() == node.id())
}

#[derive(Debug, Default, Clone)]
pub(crate) struct Modifiers {
    pub keywords: Vec<String>,
    pub annotations: Vec<String>,
}

impl Modifiers {
    pub fn has(&self, kw: &str) -> bool {
        self.keywords.iter().any(|k| k == kw)
    }

    pub fn visibility(&self, default: Visibility) -> Visibility {
        if self.has("public") {
            Visibility::Public
        } else if self.has("protected") {
            Visibility::Protected
        } else if self.has("private") {
            Visibility::Private
        } else {
            default
        }
    }
}

pub(crate) fn modifiers(decl: Node<'_>, src: &str) -> Modifiers {
    let mut out = Modifiers::default();
    let Some(mods) = child_of_kind(decl, "modifiers") else {
        return out;
    };
    for c in children(mods) {
        match c.kind() {
            "marker_annotation" | "annotation" => {
                if let Some(name) = c.child_by_field_name("name") {
                    let full = text(name, src);
                    out.annotations
                        .push(full.rsplit('.').next().unwrap_or(full).to_string());
                }
            }
            _ if !c.is_named() => out.keywords.push(text(c, src).to_string()),
            _ => {}
        }
    }
    out
}

/// Strips generic arguments, annotations and whitespace; keeps array
/// brackets and turns varargs into `[]`. Package qualifiers are dropped so
/// `java.util.List<String>` becomes `List`.
pub fn erase_type(raw: &str) -> String {
    let mut out = String::new();
    let mut depth = 0usize;
    let mut chars = raw.chars().peekable();
    while let Some(ch) = chars.next() {
        match ch {
            '<' => depth += 1,
            '>' => depth = depth.saturating_sub(1),
            '@' if depth == 0 => {
                // annotation on a type use: skip the name
                while chars
                    .peek()
                    .is_some_and(|c| c.is_alphanumeric() || *c == '_' || *c == '.')
                {
                    chars.next();
                }
            }
            c if depth == 0 && !c.is_whitespace() => out.push(c),
            _ => {}
        }
    }
    let out = out.replace("...", "[]");
    let (base, dims) = match out.find('[') {
        Some(i) => (&out[..i], &out[i..]),
        None => (out.as_str(), ""),
    };
    let base = base.rsplit('.').next().unwrap_or(base);
    format!("{base}{dims}")
}

/// Erased type keeping package qualifiers; `None` for arrays and primitives.
pub(crate) fn class_type_name(raw: &str) -> Option<String> {
    let mut out = String::new();
    let mut depth = 0usize;
    for ch in raw.chars() {
        match ch {
            '<' => depth += 1,
            '>' => depth = depth.saturating_sub(1),
            c if depth == 0 && !c.is_whitespace() => out.push(c),
            _ => {}
        }
    }
    if out.contains('[') || out.contains("...") || out.is_empty() {
        return None;
    }
    let first = out.chars().next()?;
    if !(first.is_alphabetic() || first == '_' || first == '$') {
        return None;
    }
    if matches!(
        out.as_str(),
        "int"
            | "long"
            | "short"
            | "byte"
            | "char"
            | "boolean"
            | "float"
            | "double"
            | "void"
            | "var"
    ) {
        return None;
    }
    Some(out)
}

/// Collapses runs of whitespace into single spaces.
pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The `/** ... */` comment immediately before `node`, if any.
pub(crate) fn javadoc_before(node: Node<'_>, src: &str) -> Option<(Span, String)> {
    let prev = node.prev_sibling()?;
    if prev.kind() != "block_comment" {
        return None;
    }
    let t = text(prev, src);
    if !t.starts_with("/**") {
        return None;
    }
    let between = &src[prev.end_byte()..node.start_byte()];
    if !between.trim().is_empty() {
        return None;
    }
    Some((span(prev), t.to_string()))
}

/// Cleans a javadoc comment into plain text lines.
pub(crate) fn javadoc_text(raw: &str) -> String {
    let inner = raw.trim().trim_start_matches("/**").trim_end_matches("*/");
    inner
        .lines()
        .map(|l| l.trim().trim_start_matches('*').trim())
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}
