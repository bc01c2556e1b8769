use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible category count: label 255 is reserved for ignore.
pub const MAX_CATEGORIES: usize = 255;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Group {
    pub name: String,
    pub members: Vec<usize>,
}

/// One partition scheme over category indices, e.g. a taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub name: String,
    pub groups: Vec<Group>,
}

/// Ordered category names plus named group partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryRegistry {
    names: Vec<String>,
    splits: Vec<Split>,
}

/// JSON layout shared by registry files and the registry part of a manifest.
#[derive(Debug, Deserialize)]
pub(crate) struct RawRegistry {
    pub categories: Vec<String>,
    #[serde(default)]
    pub splits: serde_json::Map<String, serde_json::Value>,
}

impl CategoryRegistry {
    pub fn new(names: Vec<String>, splits: Vec<Split>) -> Result<Self> {
        Self::validated(names, splits, Path::new("<registry>"))
    }

    fn validated(names: Vec<String>, splits: Vec<Split>, path: &Path) -> Result<Self> {
        let k = names.len();
        if k == 0 {
            return Err(Error::schema(path, "registry has no categories"));
        }
        if k > MAX_CATEGORIES {
            return Err(Error::schema(
                path,
                format!("{k} categories exceed the maximum of {MAX_CATEGORIES} (label 255 is reserved)"),
            ));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::schema(path, format!("duplicate category name {name:?}")));
            }
        }
        let mut group_names = HashSet::new();
        for split in &splits {
            let mut owner: HashMap<usize, &str> = HashMap::new();
            for group in &split.groups {
                if !group_names.insert(group.name.as_str()) {
                    return Err(Error::schema(
                        path,
                        format!("group name {:?} used more than once", group.name),
                    ));
                }
                for &index in &group.members {
                    if index >= k {
                        return Err(Error::schema(
                            path,
                            format!(
                                "group {:?} in split {:?} references category {index}, but only {k} exist",
                                group.name, split.name
                            ),
                        ));
                    }
                    if let Some(first) = owner.insert(index, &group.name) {
                        return Err(Error::GroupOverlap {
                            split: split.name.clone(),
                            index,
                            first: first.to_string(),
                            second: group.name.clone(),
                        });
                    }
                }
            }
        }
        Ok(Self { names, splits })
    }

    pub(crate) fn from_raw(raw: RawRegistry, path: &Path) -> Result<Self> {
        let mut splits = Vec::with_capacity(raw.splits.len());
        for (split_name, groups) in raw.splits {
            let groups = groups.as_object().ok_or_else(|| {
                Error::schema(path, format!("split {split_name:?} must be an object of groups"))
            })?;
            let mut parsed = Vec::with_capacity(groups.len());
            for (group_name, members) in groups {
                let members: Vec<usize> = serde_json::from_value(members.clone()).map_err(|e| {
                    Error::schema(
                        path,
                        format!("group {group_name:?} must list category indices: {e}"),
                    )
                })?;
                parsed.push(Group {
                    name: group_name.clone(),
                    members,
                });
            }
            splits.push(Split {
                name: split_name,
                groups: parsed,
            });
        }
        Self::validated(raw.categories, splits, path)
    }

    /// Loads a standalone registry file (`{"version":1,"categories":[..],"splits":{..}}`).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, path)
    }

    pub fn from_json_str(text: &str, path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Versioned {
            version: u32,
            #[serde(flatten)]
            registry: RawRegistry,
        }
        let doc: Versioned =
            serde_json::from_str(text).map_err(|e| Error::schema(path, e.to_string()))?;
        if doc.version != 1 {
            return Err(Error::schema(
                path,
                format!("unsupported registry version {}", doc.version),
            ));
        }
        Self::from_raw(doc.registry, path)
    }

    /// The registry shipped with the crate.
    pub fn aquaov255() -> Self {
        Self::from_json_str(crate::AQUAOV255_REGISTRY_JSON, Path::new("aquaov255_registry.json"))
            .expect("bundled registry is valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn split(&self, name: &str) -> Option<&Split> {
        self.splits.iter().find(|s| s.name == name)
    }

    /// All groups in split order, then group order.
    pub fn groups(&self) -> impl Iterator<Item = &Group> {
        self.splits.iter().flat_map(|s| s.groups.iter())
    }

    pub fn group(&self, name: &str) -> Option<&Group> {
        self.groups().find(|g| g.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    fn parse(json: &str) -> Result<CategoryRegistry> {
        CategoryRegistry::from_json_str(json, Path::new("test.json"))
    }

    #[test]
    fn overlapping_groups_are_rejected() {
        let json = r#"{"version":1,"categories":["a","b","c","d","e","f"],
            "splits":{"s":{"x":[1,5],"y":[5,2]}}}"#;
        match parse(json) {
            Err(Error::GroupOverlap { index: 5, split, .. }) => assert_eq!(split, "s"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overlap_across_splits_is_fine() {
        let json = r#"{"version":1,"categories":["a","b","c"],
            "splits":{"s1":{"x":[1]},"s2":{"y":[1,2]}}}"#;
        let reg = parse(json).unwrap();
        assert_eq!(reg.splits().len(), 2);
        assert_eq!(reg.group("y").unwrap().members, vec![1, 2]);
    }

    #[test]
    fn index_out_of_range_is_rejected() {
        let json = r#"{"version":1,"categories":["a","b"],"splits":{"s":{"x":[2]}}}"#;
        assert!(matches!(parse(json), Err(Error::SchemaError { .. })));
    }

    #[test]
    fn duplicate_names_and_versions() {
        assert!(matches!(
            parse(r#"{"version":1,"categories":["a","a"]}"#),
            Err(Error::SchemaError { .. })
        ));
        assert!(matches!(
            parse(r#"{"version":2,"categories":["a"]}"#),
            Err(Error::SchemaError { .. })
        ));
        assert!(CategoryRegistry::new(names(256), vec![]).is_err());
        assert!(CategoryRegistry::new(names(255), vec![]).is_ok());
    }

    #[test]
    fn split_and_group_order_is_preserved() {
        let json = r#"{"version":1,"categories":["a","b","c"],
            "splits":{"zeta":{"q":[0],"b":[1]},"alpha":{"m":[2]}}}"#;
        let reg = parse(json).unwrap();
        let order: Vec<_> = reg.groups().map(|g| g.name.as_str()).collect();
        assert_eq!(order, ["q", "b", "m"]);
    }

    #[test]
    fn accepts_a_154_member_group() {
        let members: Vec<String> = (1..=154).map(|i| i.to_string()).collect();
        let json = format!(
            r#"{{"version":1,"categories":{},"splits":{{"taxonomy":{{"Fish":[{}]}}}}}}"#,
            serde_json::to_string(&names(255)).unwrap(),
            members.join(",")
        );
        let reg = parse(&json).unwrap();
        assert_eq!(reg.group("Fish").unwrap().members.len(), 154);
    }

    #[test]
    fn bundled_registry_loads() {
        let reg = CategoryRegistry::aquaov255();
        assert_eq!(reg.len(), 255);
        assert_eq!(reg.name(0), "Background");
        assert_eq!(reg.name(13), "WeedySeaDragon");
        assert_eq!(reg.name(254), "Zebrafish");
        let split_names: Vec<_> = reg.splits().iter().map(|s| s.name.as_str()).collect();
        assert_eq!(split_names, ["taxonomy", "commonness"]);
        for split in reg.splits() {
            let covered: usize = split.groups.iter().map(|g| g.members.len()).sum();
            assert_eq!(covered, 254, "split {} should cover every foreground class", split.name);
        }
    }
}
