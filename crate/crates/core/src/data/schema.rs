use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordered category list. When omitted for a categorical or label
    /// column, the sorted distinct values of the file are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modalities: Option<Vec<String>>,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Numeric, modalities: None }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, modalities: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            modalities: Some(modalities.into_iter().map(Into::into).collect()),
        }
    }

    pub fn label<S: Into<String>>(name: impl Into<String>, classes: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Label,
            modalities: Some(classes.into_iter().map(Into::into).collect()),
        }
    }
}

/// Column descriptors of a tabular dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<ColumnSpec>,
}

impl FeatureSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = Self { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self.columns.iter().filter(|c| c.kind == ColumnKind::Label).count();
        if labels != 1 {
            return Err(Error::Schema(format!("expected exactly one label column, found {labels}")));
        }
        let mut names = HashSet::new();
        for c in &self.columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", c.name)));
            }
            if let Some(mods) = &c.modalities {
                if c.kind == ColumnKind::Numeric {
                    return Err(Error::Schema(format!("numeric column `{}` declares modalities", c.name)));
                }
                if mods.is_empty() {
                    return Err(Error::Schema(format!("column `{}` has an empty modality list", c.name)));
                }
                let distinct: HashSet<_> = mods.iter().collect();
                if distinct.len() != mods.len() {
                    return Err(Error::Schema(format!("column `{}` repeats a modality", c.name)));
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &ColumnSpec {
        self.columns.iter().find(|c| c.kind == ColumnKind::Label).expect("validated schema")
    }

    pub fn features(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(|c| c.kind != ColumnKind::Label)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Self = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serialisation cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let s = FeatureSchema::from_json(
            r#"{"columns":[{"name":"a","kind":"numeric"},
                {"name":"c","kind":"categorical","modalities":["x","y"]},
                {"name":"y","kind":"label"}]}"#,
        )
        .unwrap();
        assert_eq!(s.label().name, "y");
        assert_eq!(s.features().count(), 2);
    }

    #[test]
    fn rejects_bad_schemas() {
        let two_labels = FeatureSchema::new(vec![ColumnSpec::label("a", ["0"]), ColumnSpec::label("b", ["0"])]);
        assert!(two_labels.is_err());
        let no_label = FeatureSchema::new(vec![ColumnSpec::numeric("a")]);
        assert!(no_label.is_err());
        let dup_mod = FeatureSchema::new(vec![
            ColumnSpec::categorical("c", ["x", "x"]),
            ColumnSpec::label("y", ["0", "1"]),
        ]);
        assert!(dup_mod.is_err());
        let empty_mod = FeatureSchema::new(vec![
            ColumnSpec::categorical("c", Vec::<String>::new()),
            ColumnSpec::label("y", ["0", "1"]),
        ]);
        assert!(empty_mod.is_err());
    }
}
