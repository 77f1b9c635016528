//! Entity identity in `namespace/Kind/name` form.

use alloc::string::{String, ToString};
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EntityError {
    #[error("malformed entity id `{text}`: expected namespace/Kind/name")]
    MalformedEntityId { text: String },
}

/// Identity of a system entity. Renders canonically as `namespace/Kind/name`.
///
/// Ordering is lexicographic over the canonical rendering, so sorted
/// collections of ids print in the same order as sorted strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EntityId {
    namespace: String,
    kind: String,
    name: String,
}

/// Options for [`parse_entity_id_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Strip a generated `-<replicaset-hash>-<pod-hash>` suffix from Pod names.
    pub strip_suffix: bool,
}

impl EntityId {
    /// Builds an id from its parts. Parts are trimmed; case is preserved.
    pub fn new(
        namespace: impl AsRef<str>,
        kind: impl AsRef<str>,
        name: impl AsRef<str>,
    ) -> Result<Self, EntityError> {
        let (namespace, kind, name) = (
            namespace.as_ref().trim(),
            kind.as_ref().trim(),
            name.as_ref().trim(),
        );
        if namespace.is_empty()
            || kind.is_empty()
            || name.is_empty()
            || [namespace, kind, name].iter().any(|p| p.contains('/'))
        {
            return Err(EntityError::MalformedEntityId {
                text: alloc::format!("{namespace}/{kind}/{name}"),
            });
        }
        Ok(Self {
            namespace: namespace.to_string(),
            kind: kind.to_string(),
            name: name.to_string(),
        })
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Infrastructure kinds are excluded from window anchoring.
    pub fn is_application(&self) -> bool {
        !matches!(
            self.kind.as_str(),
            "Node" | "Namespace" | "PersistentVolume" | "Cluster" | "StorageClass"
        )
    }

    fn canonical_bytes(&self) -> impl Iterator<Item = u8> + '_ {
        self.namespace
            .bytes()
            .chain(core::iter::once(b'/'))
            .chain(self.kind.bytes())
            .chain(core::iter::once(b'/'))
            .chain(self.name.bytes())
    }
}

impl Ord for EntityId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical_bytes().cmp(other.canonical_bytes())
    }
}

impl PartialOrd for EntityId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.namespace, self.kind, self.name)
    }
}

/// Parses `namespace/Kind/name` without suffix stripping.
pub fn parse_entity_id(text: &str) -> Result<EntityId, EntityError> {
    parse_entity_id_with(text, ParseOptions::default())
}

pub fn parse_entity_id_with(text: &str, options: ParseOptions) -> Result<EntityId, EntityError> {
    let malformed = || EntityError::MalformedEntityId {
        text: text.to_string(),
    };
    let trimmed = text.trim();
    let mut parts = trimmed.split('/');
    let (Some(namespace), Some(kind), Some(name), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(malformed());
    };
    let name = if options.strip_suffix && kind.trim() == "Pod" {
        strip_pod_suffix(name.trim())
    } else {
        name
    };
    EntityId::new(namespace, kind, name).map_err(|_| malformed())
}

/// `load-generator-c7cbc4c99-xyz12` -> `load-generator`.
fn strip_pod_suffix(name: &str) -> &str {
    let is_hash = |s: &str, min: usize, max: usize| {
        (min..=max).contains(&s.len())
            && s.bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
    };
    let mut it = name.rsplitn(3, '-');
    match (it.next(), it.next(), it.next()) {
        (Some(pod), Some(rs), Some(base))
            if !base.is_empty() && is_hash(pod, 5, 5) && is_hash(rs, 8, 10) =>
        {
            base
        }
        _ => name,
    }
}

impl FromStr for EntityId {
    type Err = EntityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_entity_id(s)
    }
}

impl Serialize for EntityId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_entity_id(&text).map_err(serde::de::Error::custom)
    }
}
