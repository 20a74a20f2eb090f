//! Best-effort resolution of what a method body touches.

use std::collections::{BTreeMap, BTreeSet};

use tree_sitter::Node;

use super::java::{self, is_field_of};
use super::resolve::resolve_type;
use super::{
    ClassInfo, FieldInfo, MemberKind, MemberRef, MethodInfo, ParamUse, ProjectIndex, RefAccess,
    Span,
};

struct Scope<'a> {
    index: &'a ProjectIndex,
    class: &'a ClassInfo,
    src: &'a str,
    params: Vec<(String, String)>,
    locals: BTreeMap<String, String>,
    declared: BTreeSet<usize>,
    static_imports: Vec<(String, String)>,
}

enum Receiver {
    /// Resolved to an instance of a project class (or unknown type).
    Value(Option<String>, RefAccess, Option<String>),
    /// A type name: static access.
    Type(String),
}

pub(crate) fn analyze_method(
    index: &ProjectIndex,
    class: &ClassInfo,
    method: &mut MethodInfo,
    decl: Node<'_>,
    src: &str,
) {
    let Some(body) = decl.child_by_field_name("body") else {
        return;
    };
    let static_imports = index
        .files
        .get(&class.source_file)
        .map(|f| {
            f.imports
                .iter()
                .filter(|i| i.is_static && !i.on_demand)
                .filter_map(|i| {
                    i.path
                        .rsplit_once('.')
                        .map(|(owner, name)| (owner.to_string(), name.to_string()))
                })
                .collect()
        })
        .unwrap_or_default();

    let mut scope = Scope {
        index,
        class,
        src,
        params: method
            .parameters
            .iter()
            .map(|p| (p.name.clone(), p.declared_type.clone()))
            .collect(),
        locals: BTreeMap::new(),
        declared: BTreeSet::new(),
        static_imports,
    };
    scope.collect_locals(body);

    let mut nodes = Vec::new();
    preorder(body, &mut nodes);

    for node in nodes {
        match node.kind() {
            "method_invocation" => {
                if let Some(r) = scope.invocation(node) {
                    method.referenced_members.push(r);
                }
            }
            "field_access" => {
                if let Some(r) = scope.field_access(node) {
                    method.referenced_members.push(r);
                }
            }
            "identifier" => {
                if !scope.is_expression_identifier(node) {
                    continue;
                }
                let name = java::text(node, src);
                if let Some(i) = scope.params.iter().position(|(p, _)| p == name) {
                    method.param_uses.push(ParamUse {
                        index: i,
                        span: java::span(node),
                    });
                } else if scope.locals.contains_key(name) {
                    continue;
                } else if let Some((owner, _)) = scope.field_owner(&class.qualified_name, name) {
                    let s = java::span(node);
                    method.referenced_members.push(MemberRef {
                        kind: MemberKind::Field,
                        owner: Some(owner),
                        name: name.to_string(),
                        access: RefAccess::Implicit,
                        span: s,
                        name_span: s,
                        receiver_span: None,
                        receiver_name: None,
                        args: Vec::new(),
                        args_span: None,
                    });
                }
            }
            "this" => {
                let parent = node.parent();
                let is_receiver = parent.is_some_and(|p| {
                    matches!(p.kind(), "field_access" | "method_invocation")
                        && is_field_of(node, "object")
                });
                if !is_receiver {
                    method.this_uses.push(java::span(node));
                }
            }
            "super" => method.uses_super = true,
            "assignment_expression" => {
                if let Some(left) = node.child_by_field_name("left") {
                    if let Some(n) = scope.assigned_name(left) {
                        method.assigned_names.push(n);
                    }
                }
            }
            "update_expression" => {
                if let Some(target) = node.named_child(0) {
                    if let Some(n) = scope.assigned_name(target) {
                        method.assigned_names.push(n);
                    }
                }
            }
            _ => {}
        }
    }
    method.assigned_names.sort();
    method.assigned_names.dedup();

    method.is_getter_setter = !method.is_constructor && scope.is_accessor(&method.name, body);
}

fn preorder<'t>(node: Node<'t>, out: &mut Vec<Node<'t>>) {
    let mut cursor = node.walk();
    loop {
        out.push(cursor.node());
        if cursor.goto_first_child() {
            continue;
        }
        loop {
            if cursor.node().id() == node.id() {
                return;
            }
            if cursor.goto_next_sibling() {
                break;
            }
            if !cursor.goto_parent() {
                return;
            }
        }
    }
}

impl<'a> Scope<'a> {
    fn collect_locals(&mut self, body: Node<'_>) {
        let mut nodes = Vec::new();
        preorder(body, &mut nodes);
        for n in nodes {
            match n.kind() {
                "local_variable_declaration" | "field_declaration" => {
                    let ty = n
                        .child_by_field_name("type")
                        .map(|t| java::text(t, self.src).to_string())
                        .unwrap_or_default();
                    let mut cursor = n.walk();
                    for d in n.children_by_field_name("declarator", &mut cursor) {
                        if let Some(name) = d.child_by_field_name("name") {
                            self.declare(name, &ty);
                        }
                    }
                }
                "enhanced_for_statement" | "resource" | "formal_parameter" => {
                    if let Some(name) = n.child_by_field_name("name") {
                        let ty = n
                            .child_by_field_name("type")
                            .map(|t| java::text(t, self.src).to_string())
                            .unwrap_or_default();
                        self.declare(name, &ty);
                    }
                }
                "catch_formal_parameter" => {
                    if let Some(name) = n.child_by_field_name("name") {
                        let ty = java::child_of_kind(n, "catch_type")
                            .map(|t| java::text(t, self.src).to_string())
                            .unwrap_or_default();
                        self.declare(name, &ty);
                    }
                }
                "inferred_parameters" => {
                    for c in java::named_children(n) {
                        if c.kind() == "identifier" {
                            self.declare(c, "");
                        }
                    }
                }
                "lambda_expression" => {
                    if let Some(p) = n.child_by_field_name("parameters") {
                        if p.kind() == "identifier" {
                            self.declare(p, "");
                        }
                    }
                }
                "type_pattern" | "instanceof_expression" => {
                    let ty = n
                        .named_child(0)
                        .filter(|c| c.kind() != "identifier")
                        .map(|t| java::text(t, self.src).to_string())
                        .unwrap_or_default();
                    if let Some(name) = n.child_by_field_name("name") {
                        self.declare(name, &ty);
                    } else if n.kind() == "type_pattern" {
                        if let Some(id) = java::named_children(n)
                            .into_iter()
                            .rev()
                            .find(|c| c.kind() == "identifier")
                        {
                            self.declare(id, &ty);
                        }
                    }
                }
                _ => {}
            }
        }
    }

    fn declare(&mut self, name: Node<'_>, ty: &str) {
        self.declared.insert(name.id());
        self.locals
            .entry(java::text(name, self.src).to_string())
            .or_insert_with(|| ty.to_string());
    }

    fn is_expression_identifier(&self, node: Node<'_>) -> bool {
        if self.declared.contains(&node.id()) {
            return false;
        }
        let Some(parent) = node.parent() else {
            return false;
        };
        match parent.kind() {
            "method_invocation" => !is_field_of(node, "name"),
            "field_access" => !is_field_of(node, "field"),
            "labeled_statement"
            | "break_statement"
            | "continue_statement"
            | "scoped_identifier"
            | "marker_annotation"
            | "annotation"
            | "inferred_parameters"
            | "switch_label" => false,
            "element_value_pair" => !is_field_of(node, "key"),
            "method_reference" => parent.named_child(0).is_some_and(|c| c.id() == node.id()),
            _ => true,
        }
    }

    fn var_type(&self, name: &str) -> Option<Option<String>> {
        let raw = self
            .params
            .iter()
            .find(|(p, _)| p == name)
            .map(|(_, t)| t.as_str())
            .or_else(|| self.locals.get(name).map(String::as_str))?;
        Some(resolve_type(self.index, self.class, raw))
    }

    /// Class declaring field `name` as seen from `class` (own or inherited).
    fn field_owner(&self, class: &str, name: &str) -> Option<(String, &'a FieldInfo)> {
        let c = self.index.classes.get(class)?;
        if let Some(f) = c.field(name) {
            return Some((c.qualified_name.clone(), f));
        }
        self.index
            .ancestors(class)
            .into_iter()
            .find_map(|a| a.field(name).map(|f| (a.qualified_name.clone(), f)))
    }

    fn method_owner(&self, class: &str, name: &str, arity: usize) -> Option<String> {
        let c = self.index.classes.get(class)?;
        let declares = |k: &ClassInfo| {
            k.methods
                .iter()
                .any(|m| m.name == name && m.arity() == arity && !m.is_constructor)
        };
        if declares(c) {
            return Some(c.qualified_name.clone());
        }
        self.index
            .ancestors(class)
            .into_iter()
            .find(|a| declares(a))
            .map(|a| a.qualified_name.clone())
    }

    fn is_local(&self, name: &str) -> bool {
        self.params.iter().any(|(p, _)| p == name) || self.locals.contains_key(name)
    }

    fn receiver(&self, obj: Node<'_>) -> Receiver {
        let class = &self.class.qualified_name;
        match obj.kind() {
            "this" => Receiver::Value(Some(class.clone()), RefAccess::This, None),
            "super" => Receiver::Value(
                self.index
                    .ancestors(class)
                    .first()
                    .map(|a| a.qualified_name.clone()),
                RefAccess::Super,
                None,
            ),
            "identifier" => {
                let name = java::text(obj, self.src);
                if let Some(ty) = self.var_type(name) {
                    return Receiver::Value(ty, RefAccess::Variable, Some(name.to_string()));
                }
                if let Some((_, f)) = self.field_owner(class, name) {
                    let ty = self
                        .index
                        .classes
                        .contains_key(&f.declared_type)
                        .then(|| f.declared_type.clone());
                    return Receiver::Value(ty, RefAccess::Expression, Some(name.to_string()));
                }
                match resolve_type(self.index, self.class, name) {
                    Some(t) => Receiver::Type(t),
                    None => Receiver::Value(None, RefAccess::Expression, None),
                }
            }
            "field_access" => {
                let this_field = obj
                    .child_by_field_name("object")
                    .is_some_and(|o| o.kind() == "this");
                let field_name = obj
                    .child_by_field_name("field")
                    .map(|f| java::text(f, self.src).to_string());
                match self.expr_type(obj) {
                    Some(t) => Receiver::Value(
                        Some(t),
                        RefAccess::Expression,
                        if this_field { field_name } else { None },
                    ),
                    None => match resolve_type(self.index, self.class, java::text(obj, self.src)) {
                        Some(t) => Receiver::Type(t),
                        None => Receiver::Value(None, RefAccess::Expression, None),
                    },
                }
            }
            _ => Receiver::Value(self.expr_type(obj), RefAccess::Expression, None),
        }
    }

    fn expr_type(&self, node: Node<'_>) -> Option<String> {
        let class = &self.class.qualified_name;
        match node.kind() {
            "this" => Some(class.clone()),
            "identifier" => {
                let name = java::text(node, self.src);
                if let Some(t) = self.var_type(name) {
                    return t;
                }
                let (_, f) = self.field_owner(class, name)?;
                self.index
                    .classes
                    .contains_key(&f.declared_type)
                    .then(|| f.declared_type.clone())
            }
            "field_access" => {
                let obj = node.child_by_field_name("object")?;
                let field = java::text(node.child_by_field_name("field")?, self.src);
                let owner_type = self.expr_type(obj)?;
                let (_, f) = self.field_owner(&owner_type, field)?;
                self.index
                    .classes
                    .contains_key(&f.declared_type)
                    .then(|| f.declared_type.clone())
            }
            "parenthesized_expression" => self.expr_type(node.named_child(0)?),
            "cast_expression" | "object_creation_expression" => {
                let t = node.child_by_field_name("type")?;
                resolve_type(self.index, self.class, java::text(t, self.src))
            }
            "method_invocation" => {
                let name = java::text(node.child_by_field_name("name")?, self.src);
                let arity = node
                    .child_by_field_name("arguments")
                    .map(|a| java::named_children(a).len())
                    .unwrap_or(0);
                let owner = match node.child_by_field_name("object") {
                    None => self.method_owner(class, name, arity)?,
                    Some(obj) => match self.receiver(obj) {
                        Receiver::Type(t) => self.method_owner(&t, name, arity)?,
                        Receiver::Value(t, _, _) => self.method_owner(&t?, name, arity)?,
                    },
                };
                let oc = self.index.classes.get(&owner)?;
                let m = oc
                    .methods
                    .iter()
                    .find(|m| m.name == name && m.arity() == arity)?;
                resolve_type(self.index, oc, &m.return_type)
            }
            _ => None,
        }
    }

    fn invocation(&self, node: Node<'_>) -> Option<MemberRef> {
        let name_node = node.child_by_field_name("name")?;
        let name = java::text(name_node, self.src).to_string();
        let args_node = node.child_by_field_name("arguments");
        let args: Vec<Span> = args_node
            .map(|a| {
                java::named_children(a)
                    .into_iter()
                    .filter(|c| !matches!(c.kind(), "line_comment" | "block_comment"))
                    .map(java::span)
                    .collect()
            })
            .unwrap_or_default();
        let arity = args.len();
        let class = &self.class.qualified_name;
        let obj = node.child_by_field_name("object");
        let (owner, access, receiver_name) = match obj {
            None => {
                let owner = self.method_owner(class, &name, arity).or_else(|| {
                    self.static_imports
                        .iter()
                        .find(|(_, n)| *n == name)
                        .filter(|(o, _)| self.index.classes.contains_key(o))
                        .map(|(o, _)| o.clone())
                });
                (owner, RefAccess::Implicit, None)
            }
            Some(obj) => match self.receiver(obj) {
                Receiver::Type(t) => (self.method_owner(&t, &name, arity), RefAccess::Static, None),
                Receiver::Value(t, access, rname) => (
                    t.and_then(|t| self.method_owner(&t, &name, arity)),
                    access,
                    rname,
                ),
            },
        };
        if owner.is_none() && access != RefAccess::Implicit {
            return None;
        }
        Some(MemberRef {
            kind: MemberKind::Method,
            owner,
            name,
            access,
            span: java::span(node),
            name_span: java::span(name_node),
            receiver_span: obj.map(java::span),
            receiver_name,
            args,
            args_span: args_node.map(java::span),
        })
    }

    fn field_access(&self, node: Node<'_>) -> Option<MemberRef> {
        let field = node.child_by_field_name("field")?;
        if field.kind() != "identifier" {
            return None;
        }
        let name = java::text(field, self.src).to_string();
        let obj = node.child_by_field_name("object")?;
        let (owner, access, receiver_name) = match self.receiver(obj) {
            Receiver::Type(t) => (
                self.field_owner(&t, &name).map(|(o, _)| o),
                RefAccess::Static,
                None,
            ),
            Receiver::Value(t, access, rname) => (
                t.and_then(|t| self.field_owner(&t, &name).map(|(o, _)| o)),
                access,
                rname,
            ),
        };
        let owner = owner?;
        Some(MemberRef {
            kind: MemberKind::Field,
            owner: Some(owner),
            name,
            access,
            span: java::span(node),
            name_span: java::span(field),
            receiver_span: Some(java::span(obj)),
            receiver_name,
            args: Vec::new(),
            args_span: None,
        })
    }

    fn assigned_name(&self, target: Node<'_>) -> Option<String> {
        match target.kind() {
            "identifier" => Some(java::text(target, self.src).to_string()),
            "field_access" => {
                let obj = target.child_by_field_name("object")?;
                (obj.kind() == "this")
                    .then(|| target.child_by_field_name("field"))
                    .flatten()
                    .map(|f| java::text(f, self.src).to_string())
            }
            _ => None,
        }
    }

    /// Name follows get*/set*/is* and the body is a single read or write of
    /// one of the host's own fields.
    fn is_accessor(&self, name: &str, body: Node<'_>) -> bool {
        let prefixed = ["get", "set", "is"].iter().any(|p| {
            name.strip_prefix(p)
                .and_then(|rest| rest.chars().next())
                .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit() || c == '_')
        });
        if !prefixed {
            return false;
        }
        let stmts: Vec<Node<'_>> = java::named_children(body)
            .into_iter()
            .filter(|c| !matches!(c.kind(), "line_comment" | "block_comment"))
            .collect();
        let [stmt] = stmts.as_slice() else {
            return false;
        };
        let host_field = |n: Node<'_>| -> bool {
            match n.kind() {
                "identifier" => {
                    let t = java::text(n, self.src);
                    !self.is_local(t) && self.class.field(t).is_some()
                }
                "field_access" => {
                    n.child_by_field_name("object")
                        .is_some_and(|o| o.kind() == "this")
                        && n.child_by_field_name("field")
                            .is_some_and(|f| self.class.field(java::text(f, self.src)).is_some())
                }
                _ => false,
            }
        };
        match stmt.kind() {
            "return_statement" => stmt.named_child(0).is_some_and(host_field),
            "expression_statement" => stmt.named_child(0).is_some_and(|e| {
                e.kind() == "assignment_expression"
                    && e.child_by_field_name("operator")
                        .is_some_and(|o| java::text(o, self.src) == "=")
                    && e.child_by_field_name("left").is_some_and(host_field)
            }),
            _ => false,
        }
    }
}
