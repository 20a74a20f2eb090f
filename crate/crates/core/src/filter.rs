//! Sanity filter and move feasibility.
//!
//! [`sanity_filter`] drops methods that must never be moved on their own.
//! [`check_instance_feasibility`] and [`check_static_feasibility`] decide
//! whether a concrete `(m, H, T)` move can be carried out mechanically by the
//! executor; whatever they accept, `executor::plan_move` can plan.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    erase_type, identifiers, resolve_type, ClassInfo, ClassKind, MemberKind, MemberRef, MethodInfo,
    MethodRef, ProjectIndex, RefAccess, Visibility,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error("unknown class {0}")]
    UnknownClass(String),
    #[error("unknown method {0}")]
    UnknownMethod(MethodRef),
    #[error("{0} is static; use the static feasibility check")]
    StaticMethod(MethodRef),
    #[error("{0} is not static; use the instance feasibility check")]
    InstanceMethod(MethodRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FilterReason {
    Constructor,
    GetterSetter,
    Override,
    Test,
    EmptyBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub method: MethodRef,
    pub passed: bool,
    pub reasons: Vec<FilterReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeasibilityReason {
    TargetNotFound,
    TargetNotReachable,
    LosesReferences,
    HierarchyConflict,
    DuplicateSignature,
}

/// How the executor turns the method into a member of the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MoveRoute {
    Static,
    /// Parameter `index` becomes the receiver; host members are reached
    /// through an extra trailing parameter when `host_param` is set.
    Parameter {
        index: usize,
        host_param: bool,
    },
    /// Host field `name` becomes the receiver.
    Field {
        name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub method: MethodRef,
    pub host: String,
    pub target: String,
    pub feasible: bool,
    pub reasons: Vec<FeasibilityReason>,
    /// Set exactly when the move is feasible.
    pub route: Option<MoveRoute>,
    /// Human readable details behind each reason.
    pub notes: Vec<String>,
}

pub fn sanity_filter(class: &ClassInfo) -> Vec<FilterVerdict> {
    class
        .methods
        .iter()
        .map(|m| {
            let reasons = sanity_reasons(m);
            FilterVerdict {
                method: class.method_ref(m),
                passed: reasons.is_empty(),
                reasons,
            }
        })
        .collect()
}

pub fn sanity_reasons(m: &MethodInfo) -> Vec<FilterReason> {
    let mut reasons = Vec::new();
    if m.is_constructor {
        reasons.push(FilterReason::Constructor);
    }
    if m.is_getter_setter {
        reasons.push(FilterReason::GetterSetter);
    }
    if m.is_override {
        reasons.push(FilterReason::Override);
    }
    if m.is_test {
        reasons.push(FilterReason::Test);
    }
    if m.is_empty_or_comment_only {
        reasons.push(FilterReason::EmptyBody);
    }
    reasons
}

/// Dispatches on whether the method is static.
pub fn check_feasibility(
    index: &ProjectIndex,
    method: &MethodRef,
    target: &str,
) -> Result<FeasibilityVerdict, FilterError> {
    let (_, m) = lookup(index, method)?;
    if m.is_static {
        check_static_feasibility(index, method, target)
    } else {
        check_instance_feasibility(index, method, target)
    }
}

pub fn check_instance_feasibility(
    index: &ProjectIndex,
    method: &MethodRef,
    target: &str,
) -> Result<FeasibilityVerdict, FilterError> {
    let (host, m) = lookup(index, method)?;
    if m.is_static {
        return Err(FilterError::StaticMethod(method.clone()));
    }
    let mut v = Verdict::new(method, target);
    let Some(t) = index.class(target) else {
        v.fail(
            FeasibilityReason::TargetNotFound,
            format!("{target} is not a project class"),
        );
        return Ok(v.finish(None));
    };
    if t.qualified_name == host.qualified_name {
        v.fail(
            FeasibilityReason::TargetNotReachable,
            "target is the host class".into(),
        );
        return Ok(v.finish(None));
    }
    if matches!(
        t.kind,
        ClassKind::Interface | ClassKind::Enum | ClassKind::Annotation
    ) {
        v.fail(
            FeasibilityReason::TargetNotReachable,
            format!(
                "{target} is {:?}, which cannot receive instance methods",
                t.kind
            ),
        );
    }
    if m.is_override {
        v.fail(
            FeasibilityReason::HierarchyConflict,
            "method is part of an override chain".into(),
        );
    }

    let fields: Vec<&str> = host
        .fields
        .iter()
        .filter(|f| !f.is_static && f.declared_type == t.qualified_name)
        .map(|f| f.name.as_str())
        .collect();
    let params: Vec<usize> = m
        .parameters
        .iter()
        .enumerate()
        .filter(|(_, p)| p.resolved.as_deref() == Some(t.qualified_name.as_str()))
        .map(|(i, _)| i)
        .collect();
    if fields.is_empty() && params.is_empty() {
        v.fail(
            FeasibilityReason::TargetNotReachable,
            format!("{target} is neither a field type of the host nor a parameter type"),
        );
        return Ok(v.finish(None));
    }

    let common = common_checks(index, host, m, t);
    // a parameter route is preferred; the first one that works wins
    let mut attempts: Vec<(MoveRoute, Vec<(FeasibilityReason, String)>)> = Vec::new();
    for &i in &params {
        let (route, problems) = parameter_route(index, host, m, t, i);
        if problems.is_empty() {
            attempts.clear();
            attempts.push((route, problems));
            break;
        }
        attempts.push((route, problems));
    }
    if attempts.first().is_none_or(|(_, p)| !p.is_empty()) {
        for f in &fields {
            let problems = field_route(index, host, m, t, f);
            if problems.is_empty() {
                attempts.clear();
                attempts.push((
                    MoveRoute::Field {
                        name: f.to_string(),
                    },
                    problems,
                ));
                break;
            }
            attempts.push((
                MoveRoute::Field {
                    name: f.to_string(),
                },
                problems,
            ));
        }
    }
    let chosen = attempts
        .iter()
        .find(|(_, p)| p.is_empty())
        .map(|(r, _)| r.clone());
    match &chosen {
        Some(route) => {
            let sig = new_param_types(host, m, route);
            for (r, note) in duplicate_checks(index, host, m, t, &sig) {
                v.fail(r, note);
            }
        }
        None => {
            for (_, problems) in &attempts {
                for (r, note) in problems {
                    v.fail(*r, note.clone());
                }
            }
        }
    }
    for (r, note) in common {
        v.fail(r, note);
    }
    Ok(v.finish(chosen))
}

pub fn check_static_feasibility(
    index: &ProjectIndex,
    method: &MethodRef,
    target: &str,
) -> Result<FeasibilityVerdict, FilterError> {
    let (host, m) = lookup(index, method)?;
    if !m.is_static {
        return Err(FilterError::InstanceMethod(method.clone()));
    }
    let mut v = Verdict::new(method, target);
    let Some(t) = index.class(target) else {
        v.fail(
            FeasibilityReason::TargetNotFound,
            format!("{target} is not a project class"),
        );
        return Ok(v.finish(None));
    };
    if t.qualified_name == host.qualified_name {
        v.fail(
            FeasibilityReason::TargetNotReachable,
            "target is the host class".into(),
        );
        return Ok(v.finish(None));
    }
    if matches!(t.kind, ClassKind::Interface | ClassKind::Annotation) {
        v.fail(
            FeasibilityReason::TargetNotReachable,
            format!(
                "{target} is {:?}; static moves go to classes, enums and records",
                t.kind
            ),
        );
    }
    if m.is_override {
        v.fail(
            FeasibilityReason::HierarchyConflict,
            "method is part of an override chain".into(),
        );
    }
    let family = host_family(index, host);
    for r in &m.referenced_members {
        if is_recursive(r, host, m, &family) {
            v.fail(
                FeasibilityReason::LosesReferences,
                format!("recursive call {}", r.name),
            );
            continue;
        }
        if let Some(note) = unreachable_from(index, r, t) {
            v.fail(FeasibilityReason::LosesReferences, note);
        }
    }
    if m.uses_super {
        v.fail(FeasibilityReason::LosesReferences, "uses super".into());
    }
    let sig: Vec<String> = m
        .parameters
        .iter()
        .map(|p| erase_type(&p.declared_type))
        .collect();
    for (r, note) in duplicate_checks(index, host, m, t, &sig) {
        v.fail(r, note);
    }
    for (r, note) in common_checks(index, host, m, t) {
        v.fail(r, note);
    }
    let feasible = v.reasons.is_empty();
    Ok(v.finish(feasible.then_some(MoveRoute::Static)))
}

fn lookup<'a>(
    index: &'a ProjectIndex,
    method: &MethodRef,
) -> Result<(&'a ClassInfo, &'a MethodInfo), FilterError> {
    let host = index
        .class(&method.class)
        .ok_or_else(|| FilterError::UnknownClass(method.class.clone()))?;
    let m = host
        .method(&method.method)
        .ok_or_else(|| FilterError::UnknownMethod(method.clone()))?;
    Ok((host, m))
}

struct Verdict {
    method: MethodRef,
    target: String,
    reasons: BTreeSet<FeasibilityReason>,
    notes: Vec<String>,
}

impl Verdict {
    fn new(method: &MethodRef, target: &str) -> Self {
        Self {
            method: method.clone(),
            target: target.to_string(),
            reasons: BTreeSet::new(),
            notes: Vec::new(),
        }
    }

    fn fail(&mut self, reason: FeasibilityReason, note: String) {
        self.reasons.insert(reason);
        if !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }

    fn finish(self, route: Option<MoveRoute>) -> FeasibilityVerdict {
        let feasible = self.reasons.is_empty();
        FeasibilityVerdict {
            host: self.method.class.clone(),
            method: self.method,
            target: self.target,
            feasible,
            reasons: self.reasons.into_iter().collect(),
            route: if feasible { route } else { None },
            notes: self.notes,
        }
    }
}

/// The host and its project super types.
pub(crate) fn host_family(index: &ProjectIndex, host: &ClassInfo) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = index
        .ancestors(&host.qualified_name)
        .into_iter()
        .map(|c| c.qualified_name.clone())
        .collect();
    out.insert(host.qualified_name.clone());
    out
}

pub(crate) fn is_recursive(
    r: &MemberRef,
    host: &ClassInfo,
    m: &MethodInfo,
    family: &BTreeSet<String>,
) -> bool {
    r.kind == MemberKind::Method
        && r.name == m.name
        && r.args.len() == m.arity()
        && (r.owner.as_deref() == Some(host.qualified_name.as_str())
            || r.owner.as_ref().is_some_and(|o| family.contains(o)))
}

/// Visibility of the member a reference points at.
pub(crate) fn member_visibility(index: &ProjectIndex, r: &MemberRef) -> Option<Visibility> {
    let owner = index.class(r.owner.as_deref()?)?;
    match r.kind {
        MemberKind::Field => owner.field(&r.name).map(|f| f.visibility),
        MemberKind::Method => owner
            .methods
            .iter()
            .find(|m| m.name == r.name && m.arity() == r.args.len() && !m.is_constructor)
            .map(|m| m.visibility),
    }
}

pub(crate) fn member_is_static(index: &ProjectIndex, r: &MemberRef) -> bool {
    let Some(owner) = r.owner.as_deref().and_then(|o| index.class(o)) else {
        return false;
    };
    match r.kind {
        MemberKind::Field => owner.field(&r.name).is_some_and(|f| f.is_static),
        MemberKind::Method => owner
            .methods
            .iter()
            .any(|m| m.name == r.name && m.arity() == r.args.len() && m.is_static),
    }
}

pub(crate) fn class_visible_from(index: &ProjectIndex, class: &ClassInfo, pkg: &str) -> bool {
    let mut c = Some(class);
    while let Some(k) = c {
        let ok = match k.visibility {
            Visibility::Public => true,
            Visibility::Private => false,
            _ => k.package() == pkg,
        };
        if !ok {
            return false;
        }
        c = k.enclosing.as_deref().and_then(|e| index.class(e));
    }
    true
}

fn member_visible_from(
    index: &ProjectIndex,
    owner: &ClassInfo,
    vis: Visibility,
    pkg: &str,
) -> bool {
    class_visible_from(index, owner, pkg)
        && match vis {
            Visibility::Public => true,
            Visibility::Private => false,
            Visibility::Package | Visibility::Protected => owner.package() == pkg,
        }
}

/// Why `r` could not be written the same way (or host-qualified) inside
/// `t`; `None` when it stays reachable.
fn unreachable_from(index: &ProjectIndex, r: &MemberRef, t: &ClassInfo) -> Option<String> {
    let Some(owner_name) = r.owner.as_deref() else {
        return Some(format!("{} resolves outside the project", r.name));
    };
    if owner_name == t.qualified_name {
        return None;
    }
    let owner = index.class(owner_name)?;
    let vis = member_visibility(index, r).unwrap_or(Visibility::Private);
    if vis != Visibility::Private && index.is_subtype_of(&t.qualified_name, owner_name) {
        return None;
    }
    if member_visible_from(index, owner, vis, &t.package()) {
        None
    } else {
        Some(format!(
            "{}.{} is {:?} and not visible from {}",
            owner.simple_name(),
            r.name,
            vis,
            t.qualified_name
        ))
    }
}

/// Checks shared by all routes: types used in the body must be nameable in
/// the target file, and call sites must be able to name the target.
fn common_checks(
    index: &ProjectIndex,
    host: &ClassInfo,
    m: &MethodInfo,
    t: &ClassInfo,
) -> Vec<(FeasibilityReason, String)> {
    let mut out = Vec::new();
    let tpkg = t.package();
    let text = host.method_text(m);
    let tokens: BTreeSet<&str> = identifiers(text).collect();
    let empty = Default::default();
    let host_names = index
        .name_resolution
        .get(&host.qualified_name)
        .unwrap_or(&empty);
    for tok in &tokens {
        if let Some(qn) = host_names.get(*tok) {
            let Some(c) = index.class(qn) else { continue };
            if !class_visible_from(index, c, &tpkg) {
                out.push((
                    FeasibilityReason::LosesReferences,
                    format!("type {qn} is not visible from {}", t.qualified_name),
                ));
            }
            if let Some(other) = resolve_type(index, t, tok) {
                if &other != qn {
                    out.push((
                        FeasibilityReason::LosesReferences,
                        format!("{tok} means {other} inside {}", t.qualified_name),
                    ));
                }
            }
        }
    }
    // single-type imports of external types that the body uses
    let hfile = index.files.get(&host.source_file);
    let tfile = index.files.get(&t.source_file);
    if let (Some(hf), Some(tf)) = (hfile, tfile) {
        for imp in hf.imports.iter().filter(|i| !i.on_demand) {
            let simple = imp.path.rsplit('.').next().unwrap_or(&imp.path);
            if !tokens.contains(simple) || index.classes.contains_key(&imp.path) {
                continue;
            }
            let clash = tf.imports.iter().any(|o| {
                !o.on_demand
                    && o.is_static == imp.is_static
                    && o.path != imp.path
                    && o.path.rsplit('.').next() == Some(simple)
            }) || (!imp.is_static && resolve_type(index, t, simple).is_some());
            if clash {
                out.push((
                    FeasibilityReason::LosesReferences,
                    format!(
                        "{simple} already names something else in {}",
                        t.qualified_name
                    ),
                ));
            }
        }
    }
    for (site_class, site_method, r) in index.call_sites(&host.qualified_name, &m.name, m.arity()) {
        if site_method.body_span == m.body_span && site_class.qualified_name == host.qualified_name
        {
            continue;
        }
        if r.access == RefAccess::Super {
            out.push((
                FeasibilityReason::LosesReferences,
                format!("called through super in {}", site_class.qualified_name),
            ));
        }
        if !class_visible_from(index, t, &site_class.package()) {
            out.push((
                FeasibilityReason::TargetNotReachable,
                format!(
                    "{} cannot see {}",
                    site_class.qualified_name, t.qualified_name
                ),
            ));
        }
    }
    out
}

fn parameter_route(
    index: &ProjectIndex,
    host: &ClassInfo,
    m: &MethodInfo,
    t: &ClassInfo,
    param: usize,
) -> (MoveRoute, Vec<(FeasibilityReason, String)>) {
    let family = host_family(index, host);
    let mut problems = Vec::new();
    let pname = &m.parameters[param].name;
    if m.assigned_names.iter().any(|n| n == pname) {
        problems.push((
            FeasibilityReason::LosesReferences,
            format!("parameter {pname} is reassigned"),
        ));
    }
    if m.uses_super {
        problems.push((FeasibilityReason::LosesReferences, "uses super".into()));
    }
    let mut host_param = !m.this_uses.is_empty();
    for r in &m.referenced_members {
        if is_recursive(r, host, m, &family) {
            problems.push((
                FeasibilityReason::LosesReferences,
                format!("recursive call {}", r.name),
            ));
            continue;
        }
        let routed = r.owner.as_ref().is_some_and(|o| family.contains(o))
            && matches!(r.access, RefAccess::Implicit | RefAccess::This)
            && !member_is_static(index, r);
        if routed {
            host_param = true;
        }
        if let Some(note) = unreachable_from(index, r, t) {
            problems.push((FeasibilityReason::LosesReferences, note));
        }
    }
    if host_param && !class_visible_from(index, host, &t.package()) {
        problems.push((
            FeasibilityReason::LosesReferences,
            format!(
                "{} is not visible from {}",
                host.qualified_name, t.qualified_name
            ),
        ));
    }
    (
        MoveRoute::Parameter {
            index: param,
            host_param,
        },
        problems,
    )
}

fn field_route(
    index: &ProjectIndex,
    host: &ClassInfo,
    m: &MethodInfo,
    t: &ClassInfo,
    field: &str,
) -> Vec<(FeasibilityReason, String)> {
    let family = host_family(index, host);
    let mut problems = Vec::new();
    if m.uses_super {
        problems.push((FeasibilityReason::LosesReferences, "uses super".into()));
    }
    if !m.this_uses.is_empty() {
        problems.push((
            FeasibilityReason::LosesReferences,
            "passes this, which has no counterpart in the target".into(),
        ));
    }
    if m.assigned_names.iter().any(|n| n == field) && !m.parameters.iter().any(|p| p.name == field)
    {
        problems.push((
            FeasibilityReason::LosesReferences,
            format!("field {field} is reassigned"),
        ));
    }
    for r in &m.referenced_members {
        if is_recursive(r, host, m, &family) {
            problems.push((
                FeasibilityReason::LosesReferences,
                format!("recursive call {}", r.name),
            ));
            continue;
        }
        let host_member = r.owner.as_ref().is_some_and(|o| family.contains(o))
            && matches!(r.access, RefAccess::Implicit | RefAccess::This);
        if host_member {
            let is_field = r.kind == MemberKind::Field && r.name == field;
            if !is_field && !member_is_static(index, r) {
                problems.push((
                    FeasibilityReason::LosesReferences,
                    format!("uses host member {} besides field {field}", r.name),
                ));
                continue;
            }
            if is_field {
                continue;
            }
        }
        if let Some(note) = unreachable_from(index, r, t) {
            problems.push((FeasibilityReason::LosesReferences, note));
        }
    }
    // call sites outside the host reach the method through the field
    let f = host.field(field);
    for (site_class, _, _) in index.call_sites(&host.qualified_name, &m.name, m.arity()) {
        if site_class.qualified_name == host.qualified_name {
            continue;
        }
        let ok = f.is_some_and(|f| {
            f.visibility != Visibility::Private
                && (f.visibility == Visibility::Public || host.package() == site_class.package())
        });
        if !ok {
            problems.push((
                FeasibilityReason::LosesReferences,
                format!("{} cannot reach field {field}", site_class.qualified_name),
            ));
        }
    }
    problems
}

/// Erased parameter types of the method once it lives in the target.
pub(crate) fn new_param_types(host: &ClassInfo, m: &MethodInfo, route: &MoveRoute) -> Vec<String> {
    let mut types: Vec<String> = m
        .parameters
        .iter()
        .map(|p| erase_type(&p.declared_type))
        .collect();
    if let MoveRoute::Parameter { index, host_param } = route {
        types.remove(*index);
        if *host_param {
            types.push(host.simple_name().to_string());
        }
    }
    types
}

fn duplicate_checks(
    index: &ProjectIndex,
    host: &ClassInfo,
    m: &MethodInfo,
    t: &ClassInfo,
    new_types: &[String],
) -> Vec<(FeasibilityReason, String)> {
    let mut out = Vec::new();
    let key = format!("{}({})", m.name, new_types.join(","));
    let arity = new_types.len();
    if t.method(&key).is_some() {
        out.push((
            FeasibilityReason::DuplicateSignature,
            format!("{} already declares {key}", t.qualified_name),
        ));
    } else if t
        .methods
        .iter()
        .any(|x| x.name == m.name && x.arity() == arity)
    {
        // call sites are matched by name and arity, so same-arity overloads
        // would make the moved method's callers ambiguous
        out.push((
            FeasibilityReason::DuplicateSignature,
            format!(
                "{} has an overload of {} with {arity} parameters",
                t.qualified_name, m.name
            ),
        ));
    }
    if host
        .methods
        .iter()
        .any(|x| x.name == m.name && x.arity() == m.arity() && x.body_span != m.body_span)
    {
        out.push((
            FeasibilityReason::DuplicateSignature,
            format!(
                "{} has another {} with {} parameters",
                host.qualified_name,
                m.name,
                m.arity()
            ),
        ));
    }
    let related =
        index
            .ancestors(&t.qualified_name)
            .into_iter()
            .chain(index.classes.values().filter(|c| {
                c.qualified_name != t.qualified_name
                    && index.is_subtype_of(&c.qualified_name, &t.qualified_name)
            }));
    for c in related {
        if c.methods
            .iter()
            .any(|x| x.name == m.name && x.arity() == arity && !x.is_constructor)
        {
            out.push((
                FeasibilityReason::HierarchyConflict,
                format!(
                    "{} in the hierarchy of {} declares {}",
                    c.qualified_name, t.qualified_name, m.name
                ),
            ));
        }
    }
    out
}
