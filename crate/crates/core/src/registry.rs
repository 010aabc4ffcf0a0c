//! Name-keyed registries of strategy constructors.
//!
//! Every interchangeable algorithm family (distances, outlier policies,
//! candidate aggregators, forecasters, interval methods) is exposed as a
//! trait object built from a textual spec such as `lp:3` or `tailp:0.1:0.1`.
//! The part before the first `:` selects the constructor; the remaining
//! `:`-separated fields are handed to it as arguments.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Constructor for a registered strategy. `C` carries whatever context the
/// family needs beyond its textual arguments (use `()` when none).
pub type Factory<T, C> = fn(&[&str], &C) -> Result<Box<T>>;

pub struct Registry<T: ?Sized, C = ()> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Factory<T, C>>,
}

impl<T: ?Sized, C> Registry<T, C> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register(&mut self, name: &'static str, factory: Factory<T, C>) -> &mut Self {
        self.entries.insert(name, factory);
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn create_with(&self, spec: &str, ctx: &C) -> Result<Box<T>> {
        let spec = spec.trim();
        let mut parts = spec.split(':');
        let name = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let factory = self.entries.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: self.kind,
            name: name.to_string(),
            known: self.names().collect::<Vec<_>>().join(", "),
        })?;
        factory(&args, ctx)
    }
}

impl<T: ?Sized> Registry<T, ()> {
    pub fn create(&self, spec: &str) -> Result<Box<T>> {
        self.create_with(spec, &())
    }
}

impl<T: ?Sized, C> fmt::Debug for Registry<T, C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}

pub(crate) fn expect_args(kind: &str, args: &[&str], n: usize) -> Result<()> {
    if args.len() != n {
        return Err(Error::invalid(format!(
            "{kind} expects {n} argument(s), got {}",
            args.len()
        )));
    }
    Ok(())
}

pub(crate) fn parse_arg<V: FromStr>(kind: &str, what: &str, raw: &str) -> Result<V> {
    raw.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("{kind}: cannot parse {what} from `{raw}`")))
}
