//! Store-assigned identifiers.
//!
//! Every identifier is a 26-character ULID string: a 48-bit millisecond
//! timestamp followed by 80 random bits, Crockford base32 encoded. Ids minted
//! by one process are strictly increasing, so lexical order is creation
//! order.

use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

static GENERATOR: Mutex<Option<ulid::Generator>> = Mutex::new(None);

/// Mints a new monotonic ULID string.
pub fn next_ulid() -> String {
    let mut guard = GENERATOR.lock().unwrap_or_else(|e| e.into_inner());
    let gen = guard.get_or_insert_with(ulid::Generator::new);
    loop {
        match gen.generate() {
            Ok(id) => return id.to_string(),
            // Overflow of the random part within one millisecond.
            Err(_) => std::thread::yield_now(),
        }
    }
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn generate() -> Self {
                Self(next_ulid())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_type!(
    /// Identifier of a tag domain.
    DomainId
);
id_type!(
    /// Identifier of a tag.
    TagId
);
id_type!(
    /// Identifier of a stored annotation.
    AnnotationId
);
id_type!(
    /// Identifier of an annotation job.
    JobId
);
id_type!(
    /// Identifier of an outbound broker subscription.
    SubscriptionId
);
