use serde::{Deserialize, Serialize};
use std::fmt;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
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
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Attribute name, resolved against a [`Registry`](super::Registry).
    AttributeName
);
string_id!(Domain);
string_id!(
    /// `<manual>:<family>`, e.g. `m03:restaurant.find.food+area`.
    InstructionId
);
string_id!(
    /// Seed instruction shared by all paraphrases, e.g. `restaurant.find.food+area`.
    FamilyId
);
string_id!(ManualId);
string_id!(
    /// Unique API spec identifier, e.g. `restaurant_search[food+area]`.
    ApiId
);
string_id!(GoalId);
string_id!(DialogueId);

impl InstructionId {
    pub fn compose(manual: &ManualId, family: &FamilyId) -> Self {
        Self(format!("{manual}:{family}"))
    }
}
