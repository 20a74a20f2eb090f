use super::java::class_type_name;
use super::{ClassInfo, ProjectIndex};

/// Resolves a type name as written inside `context` to a project class.
///
/// Lookup order follows Java scoping: the context class and its enclosing
/// classes (and their member types), single-type imports, the context's own
/// package, then on-demand imports. Names that only exist outside the
/// project (`String`, `List`, library types) resolve to `None`.
pub fn resolve_type(index: &ProjectIndex, context: &ClassInfo, name: &str) -> Option<String> {
    if let Some(cached) = index
        .name_resolution
        .get(&context.qualified_name)
        .and_then(|m| m.get(name))
    {
        return Some(cached.clone());
    }
    resolve_uncached(index, context, name)
}

pub(crate) fn resolve_uncached(
    index: &ProjectIndex,
    context: &ClassInfo,
    name: &str,
) -> Option<String> {
    let name = class_type_name(name)?;
    if let Some((first, rest)) = name.split_once('.') {
        if let Some(head) = resolve_simple(index, context, first) {
            let candidate = format!("{head}.{rest}");
            if index.classes.contains_key(&candidate) {
                return Some(candidate);
            }
        }
        return index.classes.contains_key(&name).then_some(name);
    }
    resolve_simple(index, context, &name)
}

fn resolve_simple(index: &ProjectIndex, context: &ClassInfo, name: &str) -> Option<String> {
    // the context class, its enclosing classes, and their member types
    let mut scope = Some(context);
    while let Some(c) = scope {
        if c.simple_name() == name {
            return Some(c.qualified_name.clone());
        }
        let member = format!("{}.{}", c.qualified_name, name);
        if index.classes.contains_key(&member) {
            return Some(member);
        }
        scope = c.enclosing.as_deref().and_then(|e| index.classes.get(e));
    }

    let file = index.files.get(&context.source_file);
    if let Some(file) = file {
        for imp in file.imports.iter().filter(|i| !i.on_demand && !i.is_static) {
            if imp.path.rsplit('.').next() == Some(name) {
                // an explicit import shadows everything below, even when the
                // imported class lives outside the project
                return index
                    .classes
                    .contains_key(&imp.path)
                    .then(|| imp.path.clone());
            }
        }
    }

    let pkg = context.package();
    let same_pkg = if pkg.is_empty() {
        name.to_string()
    } else {
        format!("{pkg}.{name}")
    };
    if index.classes.contains_key(&same_pkg) {
        return Some(same_pkg);
    }

    if let Some(file) = file {
        for imp in file.imports.iter().filter(|i| i.on_demand && !i.is_static) {
            let candidate = format!("{}.{}", imp.path, name);
            if index.classes.contains_key(&candidate) {
                return Some(candidate);
            }
        }
    }
    None
}
