use std::collections::HashSet;

use super::{AppBundle, InvokeExpr, MethodBody};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedTarget<'a> {
    InBundle(&'a MethodBody),
    /// Library or platform code we have no body for.
    Opaque,
}

/// Resolve a call site by its static class, walking superclasses that are
/// defined in the bundle. Subclasses are never enumerated.
pub fn resolve_call<'a>(site: &InvokeExpr, bundle: &'a AppBundle) -> ResolvedTarget<'a> {
    let mut visited = HashSet::new();
    let mut class = Some(site.method.declaring_class.as_str());
    while let Some(name) = class {
        if !visited.insert(name) {
            break;
        }
        let Some(unit) = bundle.class(name) else {
            break;
        };
        if let Some(body) = unit.method(&site.method.name, &site.method.param_types) {
            return ResolvedTarget::InBundle(body);
        }
        class = unit.superclass.as_deref();
    }
    ResolvedTarget::Opaque
}
