use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::FeatureSchema;
use crate::error::{Error, Result};

/// Name of the optional provenance column written for augmented data.
pub const ORIGIN_COLUMN: &str = "origin";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Original,
    Augmented,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Original => "original",
            Origin::Augmented => "augmented",
        }
    }
}

/// Validated tabular data. Immutable once loaded.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredDataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<f64>>,
    /// Index into `schema.labels` for each row.
    pub labels: Vec<usize>,
}

impl StructuredDataset {
    pub fn new(schema: FeatureSchema, rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Config(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (i, (row, &label)) in rows.iter().zip(&labels).enumerate() {
            schema
                .check_row(row)
                .map_err(|message| Error::Row { row: i + 1, message })?;
            if label >= schema.labels.len() {
                return Err(Error::Row {
                    row: i + 1,
                    message: format!("label index {label} out of range"),
                });
            }
        }
        Ok(StructuredDataset { schema, rows, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn load_structured(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<StructuredDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_structured(file, schema)
}

pub(crate) fn read_structured<R: Read>(reader: R, schema: &FeatureSchema) -> Result<StructuredDataset> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = csv.headers()?.clone();

    let column_of = |name: &str| header.iter().position(|h| h == name);
    let mut feature_columns = Vec::with_capacity(schema.len());
    for spec in &schema.features {
        let col = column_of(&spec.name)
            .ok_or_else(|| Error::Schema(format!("header has no column for feature `{}`", spec.name)))?;
        feature_columns.push(col);
    }
    let label_column = column_of(&schema.label)
        .ok_or_else(|| Error::Schema(format!("header has no label column `{}`", schema.label)))?;
    for h in header.iter() {
        if h != schema.label && h != ORIGIN_COLUMN && schema.feature_index(h).is_none() {
            return Err(Error::Schema(format!("column `{h}` is not in the schema")));
        }
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| Error::Row {
            row: row_no,
            message: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(schema.len());
        for (spec, &col) in schema.features.iter().zip(&feature_columns) {
            let cell = record.get(col).ok_or_else(|| Error::Row {
                row: row_no,
                message: format!("missing cell for `{}`", spec.name),
            })?;
            let v = spec
                .encode(cell)
                .map_err(|message| Error::Row { row: row_no, message })?;
            row.push(v);
        }
        let raw_label = record.get(label_column).unwrap_or("");
        let label = schema.label_index(raw_label).ok_or_else(|| Error::Row {
            row: row_no,
            message: format!("unknown label `{raw_label}`"),
        })?;
        rows.push(row);
        labels.push(label);
    }
    Ok(StructuredDataset {
        schema: schema.clone(),
        rows,
        labels,
    })
}

/// Writes the dataset as CSV in the ingestion format. When `origins` is given,
/// a trailing provenance column is added.
pub fn write_structured<W: Write>(
    writer: W,
    dataset: &StructuredDataset,
    origins: Option<&[Origin]>,
) -> Result<()> {
    if let Some(o) = origins {
        if o.len() != dataset.len() {
            return Err(Error::Config(format!(
                "{} origins for {} rows",
                o.len(),
                dataset.len()
            )));
        }
    }
    let schema = &dataset.schema;
    let mut csv = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
    header.push(&schema.label);
    if origins.is_some() {
        header.push(ORIGIN_COLUMN);
    }
    csv.write_record(&header)?;
    for (i, (row, &label)) in dataset.rows.iter().zip(&dataset.labels).enumerate() {
        let mut record: Vec<String> = schema
            .features
            .iter()
            .zip(row)
            .map(|(spec, &v)| spec.display_value(v))
            .collect();
        record.push(schema.labels[label].clone());
        if let Some(o) = origins {
            record.push(o[i].as_str().to_string());
        }
        csv.write_record(&record)?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSpec;
    use proptest::prelude::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                FeatureSpec::categorical("gender", &["male", "female"], true),
                FeatureSpec::continuous("age", 0.0, 100.0, false, true),
                FeatureSpec::continuous("hours", 0.0, 99.0, true, false),
            ],
            &["0", "1"],
            "1",
        )
        .unwrap()
    }

    #[test]
    fn loads_three_rows() {
        let csv = "gender,age,hours,label\nmale,20,40,0\nfemale,45,38,1\nmale,91,12,1\n";
        let d = read_structured(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.rows[1], vec![1.0, 45.0, 38.0]);
        assert_eq!(d.labels, vec![0, 1, 1]);
    }

    #[test]
    fn column_order_is_free() {
        let csv = "label,hours,age,gender\n1,40,20,female\n";
        let d = read_structured(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(d.rows[0], vec![1.0, 20.0, 40.0]);
    }

    #[test]
    fn out_of_domain_names_row() {
        let csv = "gender,age,hours,label\nmale,20,40,0\nmale,150,40,0\n";
        let err = read_structured(csv.as_bytes(), &schema()).unwrap_err();
        match err {
            Error::Row { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains("age"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_sensitive_column() {
        let csv = "age,hours,label\n20,40,0\n";
        let err = read_structured(csv.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::Schema(m) if m.contains("gender")));
    }

    #[test]
    fn unparseable_and_unknown_label() {
        let bad_num = "gender,age,hours,label\nmale,x,40,0\n";
        assert!(matches!(
            read_structured(bad_num.as_bytes(), &schema()),
            Err(Error::Row { row: 1, .. })
        ));
        let bad_label = "gender,age,hours,label\nmale,3,40,maybe\n";
        assert!(matches!(
            read_structured(bad_label.as_bytes(), &schema()),
            Err(Error::Row { row: 1, .. })
        ));
    }

    #[test]
    fn writes_origin_column() {
        let csv = "gender,age,hours,label\nmale,20.5,40,0\n";
        let d = read_structured(csv.as_bytes(), &schema()).unwrap();
        let mut out = Vec::new();
        write_structured(&mut out, &d, Some(&[Origin::Augmented])).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "gender,age,hours,label,origin\nmale,20.5,40,0,augmented\n");
        let back = read_structured(text.as_bytes(), &schema()).unwrap();
        assert_eq!(back, d);
    }

    proptest! {
        #[test]
        fn write_then_load_is_identity(
            rows in prop::collection::vec((0usize..2, 0.0f64..=100.0, 0u32..=99, 0usize..2), 1..40)
        ) {
            let s = schema();
            let d = StructuredDataset::new(
                s.clone(),
                rows.iter().map(|&(g, a, h, _)| vec![g as f64, a, h as f64]).collect(),
                rows.iter().map(|r| r.3).collect(),
            ).unwrap();
            let mut out = Vec::new();
            write_structured(&mut out, &d, None).unwrap();
            let back = read_structured(out.as_slice(), &s).unwrap();
            prop_assert_eq!(back, d);
        }
    }
}
