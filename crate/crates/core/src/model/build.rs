use std::collections::{BTreeMap, BTreeSet};
use std::path::{Component, Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use tree_sitter::{Node, Tree};
use walkdir::WalkDir;

use super::java::{self, class_type_name, erase_type, javadoc_before, javadoc_text, Modifiers};
use super::refs::analyze_method;
use super::resolve::resolve_uncached;
use super::{
    sha256_hex, ClassInfo, ClassKind, FieldInfo, ImportDecl, MethodInfo, ModelError, Parameter,
    ProjectIndex, SourceFileInfo, Span, Visibility, INDEX_SCHEMA_VERSION,
};

struct ParsedFile {
    path: PathBuf,
    text: String,
    tree: Tree,
    info: SourceFileInfo,
    classes: Vec<ClassInfo>,
    /// Type names mentioned per class, resolved once the class table exists.
    type_names: BTreeMap<String, BTreeSet<String>>,
}

/// True when `text` parses as Java without syntax errors.
pub fn parse_java_ok(text: &str) -> bool {
    java::parse(text).is_some_and(|t| !t.root_node().has_error())
}

/// Parses every `.java` file under `source_roots` into a [`ProjectIndex`].
///
/// Files that fail to parse are skipped with a warning recorded in
/// [`ProjectIndex::warnings`]. Output is deterministic for a given tree.
pub fn build_index<P: AsRef<Path>>(source_roots: &[P]) -> Result<ProjectIndex, ModelError> {
    let roots: Vec<PathBuf> = source_roots
        .iter()
        .map(|p| p.as_ref().to_path_buf())
        .collect();
    let mut files: Vec<(PathBuf, PathBuf)> = Vec::new();
    for root in &roots {
        std::fs::read_dir(root).map_err(|source| ModelError::Io {
            path: root.clone(),
            source,
        })?;
        for entry in WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| ModelError::Io {
                path: root.clone(),
                source: e.into(),
            })?;
            if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "java")
            {
                files.push((root.clone(), entry.into_path()));
            }
        }
    }

    let parsed: Vec<Result<ParsedFile, String>> = files
        .par_iter()
        .map(|(root, path)| parse_file(root, path))
        .collect();

    let mut warnings = Vec::new();
    let mut good = Vec::new();
    for p in parsed {
        match p {
            Ok(f) => good.push(f),
            Err(w) => {
                warn!("{w}");
                warnings.push(w);
            }
        }
    }

    // skeleton: declarations only, used for name resolution
    let mut index = ProjectIndex {
        schema_version: INDEX_SCHEMA_VERSION,
        source_roots: roots.clone(),
        packages: BTreeSet::new(),
        classes: BTreeMap::new(),
        files: BTreeMap::new(),
        name_resolution: BTreeMap::new(),
        warnings: Vec::new(),
    };
    for f in &good {
        index.files.insert(f.path.clone(), f.info.clone());
        if !f.info.package.is_empty() {
            index.packages.insert(f.info.package.join("."));
        }
        for c in &f.classes {
            if let Some(prev) = index.classes.get(&c.qualified_name) {
                warnings.push(format!(
                    "duplicate class {} in {} (keeping {})",
                    c.qualified_name,
                    c.source_file.display(),
                    prev.source_file.display()
                ));
                continue;
            }
            index.classes.insert(c.qualified_name.clone(), c.clone());
        }
    }
    if index.classes.is_empty() {
        return Err(ModelError::EmptyProject(roots));
    }

    // resolve mentioned type names per class
    for f in &good {
        for (class, names) in &f.type_names {
            let Some(ctx) = index.classes.get(class) else {
                continue;
            };
            let resolved: BTreeMap<String, String> = names
                .iter()
                .filter_map(|n| resolve_uncached(&index, ctx, n).map(|q| (n.clone(), q)))
                .collect();
            if !resolved.is_empty() {
                index.name_resolution.insert(class.clone(), resolved);
            }
        }
    }
    let resolution = index.name_resolution.clone();
    let lookup = |class: &str, raw: &str| -> Option<String> {
        let name = class_type_name(raw)?;
        resolution.get(class).and_then(|m| m.get(&name)).cloned()
    };
    for class in index.classes.values_mut() {
        let qn = class.qualified_name.clone();
        for field in &mut class.fields {
            if let Some(q) = lookup(&qn, &field.raw_type) {
                field.declared_type = q;
            }
        }
        for method in &mut class.methods {
            for p in &mut method.parameters {
                p.resolved = lookup(&qn, &p.declared_type);
            }
        }
        class.super_types = class
            .super_types
            .iter()
            .map(|s| lookup(&qn, s).unwrap_or_else(|| erase_type(s)))
            .collect();
    }

    // method bodies: references, getters/setters, emptiness
    let analyzed: Vec<(String, usize, MethodInfo)> = good
        .par_iter()
        .flat_map_iter(|f| {
            let index = &index;
            f.classes
                .iter()
                .filter(|c| {
                    index
                        .classes
                        .get(&c.qualified_name)
                        .is_some_and(|k| k.source_file == f.path)
                })
                .flat_map(move |c| {
                    let class = &index.classes[&c.qualified_name];
                    class.methods.iter().enumerate().map(move |(i, m)| {
                        let node = find_node(&f.tree, m.body_span);
                        let mut m = m.clone();
                        if let Some(node) = node {
                            analyze_method(index, class, &mut m, node, &f.text);
                        }
                        (class.qualified_name.clone(), i, m)
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect();
    for (class, i, m) in analyzed {
        index
            .classes
            .get_mut(&class)
            .expect("analyzed class")
            .methods[i] = m;
    }

    mark_overrides(&mut index);

    index.warnings = warnings;
    Ok(index)
}

fn find_node(tree: &Tree, span: Span) -> Option<Node<'_>> {
    let mut node = tree
        .root_node()
        .descendant_for_byte_range(span.start, span.end)?;
    loop {
        if node.start_byte() == span.start && node.end_byte() == span.end {
            if matches!(
                node.kind(),
                "method_declaration"
                    | "constructor_declaration"
                    | "compact_constructor_declaration"
            ) {
                return Some(node);
            }
        }
        node = node.parent()?;
    }
}

fn mark_overrides(index: &mut ProjectIndex) {
    let mut keys: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for c in index.classes.values() {
        keys.insert(
            c.qualified_name.clone(),
            c.methods
                .iter()
                .filter(|m| !m.is_constructor && !m.is_static)
                .map(|m| m.key())
                .collect(),
        );
    }
    let mut descendants: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut ancestors: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for c in index.classes.values() {
        let anc: Vec<String> = index
            .ancestors(&c.qualified_name)
            .into_iter()
            .map(|a| a.qualified_name.clone())
            .collect();
        for a in &anc {
            descendants
                .entry(a.clone())
                .or_default()
                .insert(c.qualified_name.clone());
        }
        ancestors.insert(c.qualified_name.clone(), anc);
    }
    for c in index.classes.values_mut() {
        let related: Vec<&String> = ancestors[&c.qualified_name]
            .iter()
            .chain(descendants.get(&c.qualified_name).into_iter().flatten())
            .collect();
        for m in &mut c.methods {
            if m.is_constructor || m.is_static {
                continue;
            }
            let key = m.key();
            let in_chain = related.iter().any(|r| keys[*r].contains(&key));
            m.is_override = m.is_override || in_chain;
        }
    }
}

fn parse_file(root: &Path, path: &Path) -> Result<ParsedFile, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("skipping {}: {e}", path.display()))?;
    let text = String::from_utf8(bytes)
        .map_err(|_| format!("skipping {}: not valid UTF-8", path.display()))?;
    let tree =
        java::parse(&text).ok_or_else(|| format!("skipping {}: parser gave up", path.display()))?;
    let program = tree.root_node();
    if program.has_error() {
        return Err(format!("skipping {}: syntax errors", path.display()));
    }

    let rel = path.strip_prefix(root).unwrap_or(path);
    let is_test_source = rel
        .components()
        .any(|c| matches!(c, Component::Normal(s) if s == "test" || s == "tests"));

    let mut package = Vec::new();
    let mut imports = Vec::new();
    let mut import_anchor = 0;
    for node in java::named_children(program) {
        match node.kind() {
            "package_declaration" => {
                if let Some(name) = java::named_children(node)
                    .into_iter()
                    .find(|c| matches!(c.kind(), "scoped_identifier" | "identifier"))
                {
                    package = java::text(name, &text)
                        .split('.')
                        .map(str::to_string)
                        .collect();
                }
                import_anchor = node.end_byte();
            }
            "import_declaration" => {
                let kids = java::children(node);
                let is_static = kids.iter().any(|c| c.kind() == "static");
                let on_demand = kids.iter().any(|c| c.kind() == "asterisk");
                if let Some(name) = kids
                    .iter()
                    .find(|c| matches!(c.kind(), "scoped_identifier" | "identifier"))
                {
                    imports.push(ImportDecl {
                        path: java::text(*name, &text).to_string(),
                        is_static,
                        on_demand,
                        span: java::span(node),
                    });
                }
                import_anchor = node.end_byte();
            }
            _ => {}
        }
    }

    let info = SourceFileInfo {
        root: root.to_path_buf(),
        package: package.clone(),
        imports,
        import_anchor,
        is_test_source,
        sha256: sha256_hex(text.as_bytes()),
        len: text.len(),
    };

    let mut ctx = Extractor {
        src: &text,
        path,
        package: &package,
        is_test_source,
        classes: Vec::new(),
        type_names: BTreeMap::new(),
    };
    for node in java::named_children(program) {
        ctx.type_declaration(node, None, false);
    }
    let Extractor {
        classes,
        type_names,
        ..
    } = ctx;

    Ok(ParsedFile {
        path: path.to_path_buf(),
        text,
        tree,
        info,
        classes,
        type_names,
    })
}

struct Extractor<'a> {
    src: &'a str,
    path: &'a Path,
    package: &'a [String],
    is_test_source: bool,
    classes: Vec<ClassInfo>,
    type_names: BTreeMap<String, BTreeSet<String>>,
}

fn class_kind(kind: &str) -> Option<ClassKind> {
    Some(match kind {
        "class_declaration" => ClassKind::Class,
        "interface_declaration" => ClassKind::Interface,
        "enum_declaration" => ClassKind::Enum,
        "record_declaration" => ClassKind::Record,
        "annotation_type_declaration" => ClassKind::Annotation,
        _ => return None,
    })
}

impl<'a> Extractor<'a> {
    fn type_declaration(
        &mut self,
        node: Node<'_>,
        enclosing: Option<&ClassInfo>,
        in_interface: bool,
    ) {
        let Some(kind) = class_kind(node.kind()) else {
            return;
        };
        let mods = java::modifiers(node, self.src);
        let implicitly_static = kind != ClassKind::Class || in_interface;
        if enclosing.is_some() && !mods.has("static") && !implicitly_static {
            // inner (non-static) classes stay part of their outer class' text
            return;
        }
        let Some(name_node) = node.child_by_field_name("name") else {
            return;
        };
        let simple = java::text(name_node, self.src);
        let name = match enclosing {
            Some(e) => format!("{}.{}", e.name, simple),
            None => simple.to_string(),
        };
        let qualified_name = if self.package.is_empty() {
            name.clone()
        } else {
            format!("{}.{}", self.package.join("."), name)
        };
        let Some(body) = node.child_by_field_name("body") else {
            return;
        };

        let default_vis = if in_interface {
            Visibility::Public
        } else {
            Visibility::Package
        };
        let mut class = ClassInfo {
            qualified_name: qualified_name.clone(),
            name,
            package_path: self.package.to_vec(),
            kind,
            visibility: mods.visibility(default_vis),
            is_interface: kind == ClassKind::Interface,
            is_abstract: mods.has("abstract") || kind == ClassKind::Interface,
            enclosing: enclosing.map(|e| e.qualified_name.clone()),
            fields: Vec::new(),
            methods: Vec::new(),
            docstring: javadoc_before(node, self.src).map(|(_, t)| javadoc_text(&t)),
            source_file: self.path.to_path_buf(),
            body_span: java::span(node),
            members_span: java::span(body),
            text: java::text(node, self.src).to_string(),
            super_types: self.super_types(node),
        };

        let mut names = BTreeSet::new();
        collect_type_names(node, self.src, &mut names);
        names.extend(class.super_types.iter().cloned());
        self.type_names.insert(qualified_name.clone(), names);

        if kind == ClassKind::Record {
            if let Some(params) = node.child_by_field_name("parameters") {
                for p in java::named_children(params) {
                    if let (Some(t), Some(n)) =
                        (p.child_by_field_name("type"), p.child_by_field_name("name"))
                    {
                        let raw = java::text(t, self.src).to_string();
                        class.fields.push(FieldInfo {
                            name: java::text(n, self.src).to_string(),
                            declared_type: erase_type(&raw),
                            raw_type: raw,
                            is_static: false,
                            is_final: true,
                            visibility: Visibility::Private,
                            span: java::span(p),
                        });
                    }
                }
            }
        }

        let is_iface = kind == ClassKind::Interface || kind == ClassKind::Annotation;
        let mut nested = Vec::new();
        let mut members: Vec<Node<'_>> = Vec::new();
        for member in java::named_children(body) {
            if member.kind() == "enum_body_declarations" {
                members.extend(java::named_children(member));
            } else {
                members.push(member);
            }
        }
        for member in members {
            match member.kind() {
                "field_declaration" | "constant_declaration" => {
                    self.fields(member, &mut class, is_iface)
                }
                "enum_constant" => {
                    if let Some(n) = member.child_by_field_name("name") {
                        class.fields.push(FieldInfo {
                            name: java::text(n, self.src).to_string(),
                            declared_type: qualified_name.clone(),
                            raw_type: simple.to_string(),
                            is_static: true,
                            is_final: true,
                            visibility: Visibility::Public,
                            span: java::span(member),
                        });
                    }
                }
                "method_declaration"
                | "constructor_declaration"
                | "compact_constructor_declaration" => {
                    if let Some(m) = self.method(member, is_iface) {
                        class.methods.push(m);
                    }
                }
                k if class_kind(k).is_some() => nested.push(member),
                _ => {}
            }
        }

        for n in nested {
            self.type_declaration(n, Some(&class), is_iface);
        }
        self.classes.push(class);
    }

    fn super_types(&self, node: Node<'_>) -> Vec<String> {
        let mut out = Vec::new();
        let mut push_types = |n: Node<'_>| {
            let mut stack = vec![n];
            while let Some(n) = stack.pop() {
                match n.kind() {
                    "type_identifier" | "scoped_type_identifier" | "generic_type" => {
                        out.push(erase_generic(java::text(n, self.src)));
                    }
                    _ => {
                        let mut kids = java::named_children(n);
                        kids.reverse();
                        stack.extend(kids);
                    }
                }
            }
        };
        if let Some(s) = node.child_by_field_name("superclass") {
            push_types(s);
        }
        if let Some(s) = node.child_by_field_name("interfaces") {
            push_types(s);
        }
        if let Some(s) = java::child_of_kind(node, "extends_interfaces") {
            push_types(s);
        }
        out
    }

    fn fields(&self, decl: Node<'_>, class: &mut ClassInfo, in_interface: bool) {
        let mods = java::modifiers(decl, self.src);
        let Some(ty) = decl.child_by_field_name("type") else {
            return;
        };
        let raw = java::text(ty, self.src).to_string();
        let mut cursor = decl.walk();
        for d in decl.children_by_field_name("declarator", &mut cursor) {
            let Some(n) = d.child_by_field_name("name") else {
                continue;
            };
            let dims = d
                .child_by_field_name("dimensions")
                .map(|x| java::text(x, self.src))
                .unwrap_or("");
            let raw_type = format!("{raw}{dims}");
            class.fields.push(FieldInfo {
                name: java::text(n, self.src).to_string(),
                declared_type: erase_type(&raw_type),
                raw_type,
                is_static: mods.has("static") || in_interface,
                is_final: mods.has("final") || in_interface,
                visibility: if in_interface {
                    Visibility::Public
                } else {
                    mods.visibility(Visibility::Package)
                },
                span: java::span(d),
            });
        }
    }

    fn method(&self, node: Node<'_>, in_interface: bool) -> Option<MethodInfo> {
        let mods: Modifiers = java::modifiers(node, self.src);
        let name_node = node.child_by_field_name("name")?;
        let name = java::text(name_node, self.src).to_string();
        let is_constructor = node.kind() != "method_declaration";
        let return_type = if is_constructor {
            String::new()
        } else {
            let base = node
                .child_by_field_name("type")
                .map(|t| java::text(t, self.src))
                .unwrap_or("void");
            let dims = node
                .child_by_field_name("dimensions")
                .map(|d| java::text(d, self.src))
                .unwrap_or("");
            format!("{base}{dims}")
        };

        let params_node = node.child_by_field_name("parameters");
        let mut parameters = Vec::new();
        if let Some(params) = params_node {
            for p in java::named_children(params) {
                match p.kind() {
                    "formal_parameter" => {
                        let (Some(t), Some(n)) =
                            (p.child_by_field_name("type"), p.child_by_field_name("name"))
                        else {
                            continue;
                        };
                        let dims = p
                            .child_by_field_name("dimensions")
                            .map(|d| java::text(d, self.src))
                            .unwrap_or("");
                        parameters.push(Parameter {
                            name: java::text(n, self.src).to_string(),
                            declared_type: format!("{}{}", java::text(t, self.src), dims),
                            resolved: None,
                        });
                    }
                    "spread_parameter" => {
                        let ty = java::named_children(p)
                            .into_iter()
                            .find(|c| !matches!(c.kind(), "modifiers" | "variable_declarator"));
                        let var = java::child_of_kind(p, "variable_declarator")
                            .and_then(|v| v.child_by_field_name("name"));
                        if let (Some(t), Some(n)) = (ty, var) {
                            parameters.push(Parameter {
                                name: java::text(n, self.src).to_string(),
                                declared_type: format!("{}...", java::text(t, self.src)),
                                resolved: None,
                            });
                        }
                    }
                    _ => {}
                }
            }
        }

        let block = node.child_by_field_name("body");
        let is_abstract = block.is_none();
        let default_vis = if in_interface {
            Visibility::Public
        } else {
            Visibility::Package
        };
        let is_static = mods.has("static");
        let is_test = self.is_test_source
            || mods.annotations.iter().any(|a| {
                a == "Test" || a.ends_with("Test") || a == "TestFactory" || a == "TestTemplate"
            });

        let types: Vec<String> = parameters
            .iter()
            .map(|p| erase_type(&p.declared_type))
            .collect();
        let signature = if is_constructor {
            format!("{}({})", name, types.join(","))
        } else {
            format!("{}({}):{}", name, types.join(","), erase_type(&return_type))
        };

        Some(MethodInfo {
            name,
            signature,
            return_type,
            parameters,
            visibility: mods.visibility(default_vis),
            is_override: mods.annotations.iter().any(|a| a == "Override"),
            annotations: mods.annotations,
            is_static,
            is_abstract,
            is_constructor,
            is_getter_setter: false,
            is_test,
            is_empty_or_comment_only: block.is_none_or(|b| {
                java::named_children(b)
                    .iter()
                    .all(|c| matches!(c.kind(), "line_comment" | "block_comment"))
            }),
            body_span: java::span(node),
            name_span: java::span(name_node),
            params_span: params_node.map(java::span).unwrap_or(java::span(name_node)),
            block_span: block.map(java::span),
            doc_span: javadoc_before(node, self.src).map(|(s, _)| s),
            referenced_members: Vec::new(),
            this_uses: Vec::new(),
            param_uses: Vec::new(),
            assigned_names: Vec::new(),
            uses_super: false,
        })
    }
}

fn erase_generic(raw: &str) -> String {
    class_type_name(raw).unwrap_or_else(|| erase_type(raw))
}

fn collect_type_names(node: Node<'_>, src: &str, out: &mut BTreeSet<String>) {
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        match n.kind() {
            "type_identifier" | "scoped_type_identifier" => {
                out.insert(java::text(n, src).to_string());
                if n.kind() == "scoped_type_identifier" {
                    stack.extend(java::named_children(n));
                }
            }
            "method_invocation" | "field_access" => {
                // receivers like `Util.helper()` may be type names
                if let Some(obj) = n.child_by_field_name("object") {
                    if obj.kind() == "identifier" {
                        let t = java::text(obj, src);
                        if t.chars().next().is_some_and(char::is_uppercase) {
                            out.insert(t.to_string());
                        }
                    }
                }
                stack.extend(java::named_children(n));
            }
            _ => stack.extend(java::named_children(n)),
        }
    }
}
