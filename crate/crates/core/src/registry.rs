//! Name-keyed registries of interchangeable strategies.

use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("unknown {kind} strategy {name:?} (available: {})", available.join(", "))]
pub struct UnknownStrategy {
    pub kind: &'static str,
    pub name: String,
    pub available: Vec<String>,
}

/// Strategies of one family, selectable by name at runtime.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Arc<T>>,
}

impl<T: ?Sized> Clone for Registry<T> {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind,
            entries: self.entries.clone(),
        }
    }
}

impl<T: ?Sized> std::fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `item` under `name`, replacing any previous entry.
    pub fn register(&mut self, name: impl Into<String>, item: Arc<T>) -> &mut Self {
        self.entries.insert(name.into(), item);
        self
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>, UnknownStrategy> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names(),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter: Send + Sync {
        fn greet(&self) -> String;
    }
    struct Hello;
    impl Greeter for Hello {
        fn greet(&self) -> String {
            "hello".into()
        }
    }

    #[test]
    fn lookup_by_name() {
        let mut r: Registry<dyn Greeter> = Registry::new("greeter");
        r.register("hello", Arc::new(Hello));
        assert_eq!(r.get("hello").map(|g| g.greet()), Ok("hello".to_string()));
        let Err(err) = r.get("bye") else {
            panic!("expected an error")
        };
        assert_eq!(err.available, vec!["hello".to_string()]);
        assert!(err.to_string().contains("bye"));
    }
}
