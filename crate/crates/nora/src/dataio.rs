//! CSV and UCI CKD loaders, table and schema writers.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nora_core::{Cell, ColumnSpec, LabelSpec, RawTable, TableSchema, table::CellError};

use crate::{Error, Result};

pub const DEFAULT_MISSING_TOKENS: [&str; 2] = ["", "?"];

pub fn default_missing_tokens() -> Vec<String> {
    DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect()
}

fn cell_error(row: usize, column: &str, token: &str, e: CellError) -> Error {
    let what = match e {
        CellError::NotANumber => "not a finite number",
        CellError::UnknownCategory => "unknown category",
    };
    Error::Data(format!("row {row}, column '{column}': {what}: {token:?}"))
}

/// Header must name every schema column and the label column exactly once,
/// in any order. Tokens are trimmed before matching.
pub fn read_csv<R: Read>(reader: R, schema: &TableSchema, missing_tokens: &[String]) -> Result<RawTable> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let label_at = find(&schema.label.name)
        .ok_or_else(|| Error::Data(format!("missing label column '{}'", schema.label.name)))?;
    let mut positions = Vec::with_capacity(schema.len());
    for c in &schema.columns {
        positions.push(
            find(&c.name).ok_or_else(|| Error::Data(format!("header mismatch: column '{}' not found", c.name)))?,
        );
    }
    if header.len() != schema.len() + 1 {
        let extra: Vec<&String> = header
            .iter()
            .filter(|h| *h != &schema.label.name && schema.position(h).is_none())
            .collect();
        return Err(Error::Data(format!(
            "header mismatch: {} fields, expected {} (unexpected: {extra:?})",
            header.len(),
            schema.len() + 1
        )));
    }

    let is_missing = |t: &str| missing_tokens.iter().any(|m| m == t);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("row {r}: {e}")))?;
        let token = record[label_at].trim();
        if is_missing(token) {
            return Err(Error::Data(format!("row {r}: missing label")));
        }
        let label = schema
            .label
            .parse(token)
            .ok_or_else(|| Error::Data(format!("row {r}: unknown label token {token:?}")))?;
        let mut row = Vec::with_capacity(schema.len());
        for (j, &p) in positions.iter().enumerate() {
            let token = record[p].trim();
            row.push(if is_missing(token) {
                Cell::Missing
            } else {
                schema
                    .parse_cell(j, token)
                    .map_err(|e| cell_error(r, &schema.columns[j].name, token, e))?
            });
        }
        rows.push(row);
        labels.push(label);
    }
    Ok(RawTable::new(schema.clone(), rows, labels)?)
}

pub fn load_csv(path: &Path, schema: &TableSchema, missing_tokens: &[String]) -> Result<RawTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, missing_tokens)
}

/// Canonical CSV: schema column order, label last, missing cells empty,
/// reals in shortest round-trip form.
pub fn write_table_csv<W: Write>(table: &RawTable, writer: W) -> Result<()> {
    let schema = table.schema();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    header.push(&schema.label.name);
    let csv_err = |e: csv::Error| Error::Internal(format!("csv write: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for (row, &y) in table.rows().iter().zip(table.labels()) {
        let mut rec: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, c)| schema.render_cell(j, c, ""))
            .collect();
        rec.push(schema.label.token(y).to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Internal(format!("csv flush: {e}")))?;
    Ok(())
}

pub fn table_csv_bytes(table: &RawTable) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_table_csv(table, &mut buf)?;
    Ok(buf)
}

pub fn read_schema(path: &Path) -> Result<TableSchema> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let schema: TableSchema =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: bad schema: {e}", path.display())))?;
    schema.validate()?;
    Ok(schema)
}

pub fn schema_json(schema: &TableSchema) -> String {
    let mut s = serde_json::to_string_pretty(schema).expect("schema serializes");
    s.push('\n');
    s
}

/// The 24 UCI CKD attributes in file order. `sg`, `al` and `su` are ordinal
/// codes kept as nominal columns.
pub fn uci_ckd_schema() -> TableSchema {
    let c = ColumnSpec::continuous;
    let levels = ["0", "1", "2", "3", "4", "5"];
    let columns = vec![
        c("age", "years"),
        c("bp", "mm/Hg"),
        ColumnSpec::nominal("sg", &["1.005", "1.010", "1.015", "1.020", "1.025"]),
        ColumnSpec::nominal("al", &levels),
        ColumnSpec::nominal("su", &levels),
        ColumnSpec::binary("rbc", "normal", "abnormal"),
        ColumnSpec::binary("pc", "normal", "abnormal"),
        ColumnSpec::binary("pcc", "notpresent", "present"),
        ColumnSpec::binary("ba", "notpresent", "present"),
        c("bgr", "mgs/dl"),
        c("bu", "mgs/dl"),
        c("sc", "mgs/dl"),
        c("sod", "mEq/L"),
        c("pot", "mEq/L"),
        c("hemo", "gms"),
        c("pcv", ""),
        c("wbcc", "cells/cumm"),
        c("rbcc", "millions/cmm"),
        ColumnSpec::binary("htn", "no", "yes"),
        ColumnSpec::binary("dm", "no", "yes"),
        ColumnSpec::binary("cad", "no", "yes"),
        ColumnSpec::binary("appet", "good", "poor"),
        ColumnSpec::binary("pe", "no", "yes"),
        ColumnSpec::binary("ane", "no", "yes"),
    ];
    TableSchema::new(
        columns,
        LabelSpec {
            name: "class".into(),
            negative: "notckd".into(),
            positive: "ckd".into(),
        },
    )
    .expect("static schema is valid")
}

/// Parses the UCI distribution (ARFF header optional). Every token is
/// trimmed of whitespace and tabs; a row with too many fields has its empty
/// tokens dropped, which repairs the stray doubled and trailing commas in
/// the published file. Any row whose field count is still wrong is an error.
pub fn parse_uci_ckd(text: &str) -> Result<RawTable> {
    let schema = uci_ckd_schema();
    let width = schema.len() + 1;
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .position(|l| l.trim().eq_ignore_ascii_case("@data"))
        .map_or(0, |p| p + 1);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (offset, line) in lines[start..].iter().enumerate() {
        let line_no = start + offset + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') || line.starts_with('@') {
            continue;
        }
        let mut tokens: Vec<&str> = line.split(',').map(str::trim).collect();
        if start == 0 && rows.is_empty() && tokens.first() == Some(&"age") {
            continue;
        }
        if tokens.len() > width {
            tokens.retain(|t| !t.is_empty());
        }
        if tokens.len() != width {
            return Err(Error::Data(format!(
                "line {line_no}: {} fields after sanitization, expected {width}",
                tokens.len()
            )));
        }
        let class = tokens[width - 1];
        let label = schema
            .label
            .parse(class)
            .ok_or_else(|| Error::Data(format!("line {line_no}: unknown class token {class:?}")))?;
        let mut row = Vec::with_capacity(schema.len());
        for (j, &token) in tokens[..width - 1].iter().enumerate() {
            row.push(if token == "?" || token.is_empty() {
                Cell::Missing
            } else {
                schema
                    .parse_cell(j, token)
                    .map_err(|e| cell_error(line_no, &schema.columns[j].name, token, e))?
            });
        }
        rows.push(row);
        labels.push(label);
    }
    Ok(RawTable::new(schema, rows, labels)?)
}

pub fn load_uci_ckd(path: &Path) -> Result<RawTable> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Data(format!("{}: not UTF-8", path.display())))?;
    parse_uci_ckd(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nora_core::cohort::{cohort_schema, HEIGHT};

    #[test]
    fn missing_height_token_becomes_marker() {
        let mut text = String::from("age,sex,race,height,weight,hypertension,diabetes_mellitus,");
        text.push_str("diabetic_nephropathy,proteinuria,hematuria,dyslipidemia,ckd_class\n");
        text.push_str("70,Male,White,66.5,180,Yes,No,No,No,No,No,1\n");
        text.push_str("55,Female,Asian,?,150,No,No,No,No,No,Yes,0\n");
        text.push_str("81,Female,Hispanic,60,140,Yes,Yes,No,Yes,No,No,1\n");
        let t = read_csv(text.as_bytes(), &cohort_schema(), &default_missing_tokens()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.missing_count(), 1);
        assert!(t.rows()[1][HEIGHT].is_missing());
        assert_eq!(t.labels(), &[1, 0, 1]);
    }

    #[test]
    fn header_without_label_is_rejected() {
        let text = "age,sex,race,height,weight,hypertension,diabetes_mellitus,diabetic_nephropathy,proteinuria,hematuria,dyslipidemia\n";
        let err = read_csv(text.as_bytes(), &cohort_schema(), &default_missing_tokens()).unwrap_err();
        assert!(err.to_string().contains("missing label"), "{err}");
    }

    #[test]
    fn bad_cells_are_data_errors() {
        let head = "age,sex,race,height,weight,hypertension,diabetes_mellitus,diabetic_nephropathy,proteinuria,hematuria,dyslipidemia,ckd_class\n";
        for row in [
            "old,Male,White,66,180,Yes,No,No,No,No,No,1\n",
            "70,Other,White,66,180,Yes,No,No,No,No,No,1\n",
            "70,Male,White,66,180,Yes,No,No,No,No,No,?\n",
            "70,Male,White,66,180,Yes,No,No,No,No,No,3\n",
        ] {
            let text = format!("{head}{row}");
            let err = read_csv(text.as_bytes(), &cohort_schema(), &default_missing_tokens()).unwrap_err();
            assert_eq!(err.exit_code(), crate::error::EXIT_DATA, "{err}");
        }
    }

    #[test]
    fn uci_tokens_and_arity() {
        let ok = "@relation x\n@data\n48,80,1.020,1,0,?,normal,notpresent,notpresent,121,36,1.2,?,?,15.4,44,7800,5.2,yes,yes,no,good,no,no,ckd\t\r\n\
                  40,80,1.025,0,0,normal,normal,notpresent,notpresent,140,10,1.2,135,5,15,48,10400,4.5,no,no,no,good,no,no,notckd,\n";
        let t = parse_uci_ckd(ok).unwrap();
        assert_eq!(t.labels(), &[1, 0]);
        assert_eq!(t.schema().len(), 24);
        let short = "@data\n48,80,1.020,1,0,?,normal\n";
        assert!(parse_uci_ckd(short).unwrap_err().to_string().contains("fields"));
        let long = "@data\n1,48,80,1.020,1,0,?,normal,notpresent,notpresent,121,36,1.2,?,?,15.4,44,7800,5.2,yes,yes,no,good,no,no,ckd\n";
        assert!(parse_uci_ckd(long).is_err());
        let unknown = "@data\n48,80,1.020,1,0,?,normal,notpresent,notpresent,121,36,1.2,?,?,15.4,44,7800,5.2,yes,yes,no,good,no,no,maybe\n";
        assert!(parse_uci_ckd(unknown).unwrap_err().to_string().contains("class token"));
    }
}
