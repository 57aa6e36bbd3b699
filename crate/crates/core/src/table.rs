//! Typed columnar records with explicit missingness.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Nominal,
    /// Two tokens: `categories[0]` encodes to 0, `categories[1]` to 1.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub unit: String,
}

impl ColumnSpec {
    pub fn continuous(name: &str, unit: &str) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
            categories: Vec::new(),
            unit: unit.into(),
        }
    }

    pub fn nominal(name: &str, categories: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Nominal,
            categories: categories.iter().map(|c| c.to_string()).collect(),
            unit: String::new(),
        }
    }

    /// `negative` encodes to 0 and `positive` to 1.
    pub fn binary(name: &str, negative: &str, positive: &str) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Binary,
            categories: alloc::vec![negative.into(), positive.into()],
            unit: String::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        let distinct: BTreeSet<&str> = self.categories.iter().map(String::as_str).collect();
        let ok = match self.kind {
            ColumnKind::Continuous => self.categories.is_empty(),
            ColumnKind::Nominal => {
                self.categories.len() >= 2 && distinct.len() == self.categories.len()
            }
            ColumnKind::Binary => self.categories.len() == 2 && distinct.len() == 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "column '{}' has an invalid category list for kind {:?}",
                self.name, self.kind
            )))
        }
    }
}

/// Name of the label column and the tokens that encode class 0 and class 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub name: String,
    pub negative: String,
    pub positive: String,
}

impl LabelSpec {
    pub fn parse(&self, token: &str) -> Option<Label> {
        if token == self.positive {
            Some(1)
        } else if token == self.negative {
            Some(0)
        } else {
            None
        }
    }

    pub fn token(&self, label: Label) -> &str {
        if label == 0 {
            &self.negative
        } else {
            &self.positive
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub columns: Vec<ColumnSpec>,
    pub label: LabelSpec,
}

impl TableSchema {
    pub fn new(columns: Vec<ColumnSpec>, label: LabelSpec) -> Result<Self> {
        let schema = Self { columns, label };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for c in &self.columns {
            c.validate()?;
            if !names.insert(c.name.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate column name '{}'",
                    c.name
                )));
            }
        }
        if names.contains(self.label.name.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "label column '{}' is also a feature column",
                self.label.name
            )));
        }
        if self.label.negative == self.label.positive {
            return Err(Error::InvalidArgument(
                "label tokens must be distinct".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Parses one raw token for column `col`. Missing tokens must be handled by
    /// the caller; here every token is taken as an observed value.
    pub fn parse_cell(&self, col: usize, token: &str) -> Result<Cell, CellError> {
        let spec = &self.columns[col];
        match spec.kind {
            ColumnKind::Continuous => match token.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Cell::Real(v)),
                _ => Err(CellError::NotANumber),
            },
            ColumnKind::Nominal | ColumnKind::Binary => spec
                .categories
                .iter()
                .position(|c| c == token)
                .map(|i| Cell::Category(i as u32))
                .ok_or(CellError::UnknownCategory),
        }
    }

    /// Renders a cell back into its source token; missing cells render as `missing`.
    pub fn render_cell<'a>(&'a self, col: usize, cell: &Cell, missing: &'a str) -> String {
        match cell {
            Cell::Missing => missing.to_string(),
            Cell::Real(v) => format!("{v}"),
            Cell::Category(i) => self.columns[col].categories[*i as usize].clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellError {
    NotANumber,
    UnknownCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Missing,
    Real(f64),
    /// Index into the column's category list.
    Category(u32),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    schema: TableSchema,
    rows: Vec<Vec<Cell>>,
    labels: Vec<Label>,
}

impl RawTable {
    pub fn new(schema: TableSchema, rows: Vec<Vec<Cell>>, labels: Vec<Label>) -> Result<Self> {
        schema.validate()?;
        if rows.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::InvalidArgument(format!(
                    "row {r} has {} cells, schema has {} columns",
                    row.len(),
                    schema.len()
                )));
            }
            for (cell, spec) in row.iter().zip(&schema.columns) {
                let ok = match (cell, spec.kind) {
                    (Cell::Missing, _) => true,
                    (Cell::Real(v), ColumnKind::Continuous) => v.is_finite(),
                    (Cell::Category(i), ColumnKind::Nominal | ColumnKind::Binary) => {
                        (*i as usize) < spec.categories.len()
                    }
                    _ => false,
                };
                if !ok {
                    return Err(Error::InvalidArgument(format!(
                        "row {r}: cell {cell:?} does not fit column '{}'",
                        spec.name
                    )));
                }
            }
        }
        Ok(Self {
            schema,
            rows,
            labels,
        })
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sub-table with the given rows in the given order.
    pub fn select(&self, indices: &[usize]) -> RawTable {
        RawTable {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn missing_count(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .filter(|c| c.is_missing())
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> TableSchema {
        TableSchema::new(
            alloc::vec![
                ColumnSpec::continuous("age", "years"),
                ColumnSpec::nominal("race", &["a", "b", "c"]),
                ColumnSpec::binary("htn", "No", "Yes"),
            ],
            LabelSpec {
                name: "y".into(),
                negative: "0".into(),
                positive: "1".into(),
            },
        )
        .unwrap()
    }

    #[test]
    fn schema_rejects_duplicates_and_short_category_lists() {
        let label = schema().label;
        let dup = alloc::vec![
            ColumnSpec::continuous("a", ""),
            ColumnSpec::continuous("a", "")
        ];
        assert!(TableSchema::new(dup, label.clone()).is_err());
        let short = alloc::vec![ColumnSpec::nominal("s", &["only"])];
        assert!(TableSchema::new(short, label.clone()).is_err());
        let clash = alloc::vec![ColumnSpec::continuous("y", "")];
        assert!(TableSchema::new(clash, label).is_err());
    }

    #[test]
    fn parse_cell_by_kind() {
        let s = schema();
        assert_eq!(s.parse_cell(0, "63.5"), Ok(Cell::Real(63.5)));
        assert_eq!(s.parse_cell(0, "inf"), Err(CellError::NotANumber));
        assert_eq!(s.parse_cell(1, "c"), Ok(Cell::Category(2)));
        assert_eq!(s.parse_cell(1, "d"), Err(CellError::UnknownCategory));
        assert_eq!(s.parse_cell(2, "Yes"), Ok(Cell::Category(1)));
    }

    #[test]
    fn table_checks_row_shape_and_cell_kinds() {
        let s = schema();
        let good = alloc::vec![Cell::Real(1.0), Cell::Category(0), Cell::Missing];
        assert!(RawTable::new(s.clone(), alloc::vec![good.clone()], alloc::vec![1]).is_ok());
        let short = alloc::vec![Cell::Real(1.0)];
        assert!(RawTable::new(s.clone(), alloc::vec![short], alloc::vec![1]).is_err());
        let wrong = alloc::vec![Cell::Category(0), Cell::Category(0), Cell::Missing];
        assert!(RawTable::new(s.clone(), alloc::vec![wrong], alloc::vec![0]).is_err());
        assert!(RawTable::new(s, alloc::vec![good], alloc::vec![2]).is_err());
    }
}
