use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-image multimodal reasoning output: a caption, the detected objects and
/// their attributes.
///
/// Object names are free text. They are not checked against the category
/// registry since the reasoning model may name things outside it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningRecord {
    #[serde(rename = "Caption")]
    pub caption: String,
    #[serde(rename = "Objects")]
    pub objects: Vec<String>,
    /// Object name to attribute list, in record order.
    #[serde(rename = "Attributes", with = "ordered_map")]
    pub attributes: Vec<(String, Vec<String>)>,
}

impl ReasoningRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (key, _) in &self.attributes {
            if !self.objects.iter().any(|o| o == key) {
                return Err(format!("attribute key {key:?} is not listed in Objects"));
            }
        }
        Ok(())
    }

    pub fn attributes_of(&self, object: &str) -> Option<&[String]> {
        self.attributes
            .iter()
            .find(|(k, _)| k == object)
            .map(|(_, v)| v.as_slice())
    }

    pub fn from_json_str(text: &str, path: &Path) -> Result<Self> {
        let record: Self =
            serde_json::from_str(text).map_err(|e| Error::schema(path, e.to_string()))?;
        record.validate().map_err(|reason| Error::schema(path, reason))?;
        Ok(record)
    }
}

pub fn load_reasoning(path: impl AsRef<Path>) -> Result<ReasoningRecord> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ReasoningRecord::from_json_str(&text, path)
}

mod ordered_map {
    use serde::de::{Deserializer, MapAccess, Visitor};
    use serde::ser::{SerializeMap, Serializer};

    type Entries = Vec<(String, Vec<String>)>;

    pub fn serialize<S: Serializer>(entries: &Entries, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(entries.len()))?;
        for (k, v) in entries {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Entries, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = Entries;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an object mapping object names to attribute lists")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Entries, A::Error> {
                let mut out: Entries = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, Vec<String>>()? {
                    if out.iter().any(|(existing, _)| *existing == k) {
                        return Err(serde::de::Error::custom(format!("duplicate attribute key {k:?}")));
                    }
                    out.push((k, v));
                }
                Ok(out)
            }
        }

        d.deserialize_map(EntriesVisitor)
    }
}
