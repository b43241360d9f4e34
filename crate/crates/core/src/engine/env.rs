use std::sync::Arc;

use crate::syntax::Name;

use super::value::Value;

/// Persistent variable environment (innermost binding first).
#[derive(Clone, Default)]
pub struct Env(Option<Arc<Frame>>);

struct Frame {
    name: Name,
    value: Value,
    next: Env,
}

impl Env {
    pub fn bind(&self, name: &Name, value: Value) -> Env {
        Env(Some(Arc::new(Frame { name: name.clone(), value, next: self.clone() })))
    }

    pub fn lookup(&self, name: &Name) -> Option<&Value> {
        let mut cur = self;
        while let Some(frame) = &cur.0 {
            if frame.name == *name {
                return Some(&frame.value);
            }
            cur = &frame.next;
        }
        None
    }
}

impl std::fmt::Debug for Env {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Env")
    }
}
