//! CSV ingestion for the generic trial format and the public uplift benchmarks.
//!
//! Generic schema: a header row, columns `y` (0/1 response), `w` (0/1, 1 =
//! treatment), an optional `weight`, and every other column a numeric
//! feature in file order.
//!
//! Benchmark schemas use fixed one-hot maps with alphabetical category order:
//!
//! * `hillstrom`: keeps the women's e-mail arm (treatment) and the no-e-mail
//!   arm (control), response `conversion`. Numeric features `recency`,
//!   `history`, `mens`, `womens`, `newbie`, followed by one-hot
//!   `history_segment` (7 levels), `zip_code` (Rural, Surburban, Urban) and
//!   `channel` (Multichannel, Phone, Web).
//! * `criteo`: features `f0`..`f11`, treatment `treatment`, response `visit`.
//! * `starbucks`: features `V1`..`V7`, treatment `Promotion` (Yes/No or 1/0),
//!   response `purchase`.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use super::{DataError, Group, LabeledData, RctDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schema {
    Generic,
    Hillstrom,
    Criteo,
    Starbucks,
}

impl FromStr for Schema {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "generic" => Ok(Schema::Generic),
            "hillstrom" => Ok(Schema::Hillstrom),
            "criteo" => Ok(Schema::Criteo),
            "starbucks" => Ok(Schema::Starbucks),
            other => Err(DataError::InvalidSpec(format!("unknown schema `{other}`"))),
        }
    }
}

const HISTORY_SEGMENTS: [&str; 7] = [
    "1) $0 - $100",
    "2) $100 - $200",
    "3) $200 - $350",
    "4) $350 - $500",
    "5) $500 - $750",
    "6) $750 - $1,000",
    "7) $1,000 +",
];
const ZIP_CODES: [&str; 3] = ["Rural", "Surburban", "Urban"];
const CHANNELS: [&str; 3] = ["Multichannel", "Phone", "Web"];

struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn get(&self, name: &str) -> Result<usize, DataError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    }
}

fn ingest_err(line: u64, column: &str, message: impl Into<String>) -> DataError {
    DataError::Ingest {
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

fn parse_f64(field: &str, line: u64, column: &str) -> Result<f64, DataError> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| ingest_err(line, column, format!("cannot parse `{field}` as a number")))
}

fn parse_binary(field: &str, line: u64, column: &str) -> Result<u8, DataError> {
    let v = parse_f64(field, line, column)?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(ingest_err(line, column, format!("expected 0 or 1, got `{field}`")))
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn header_map(reader: &mut csv::Reader<File>) -> Result<Columns, DataError> {
    let headers = reader.headers()?.clone();
    Ok(Columns {
        index: headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect(),
    })
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Accumulates rows before validation.
#[derive(Default)]
struct Rows {
    features: Vec<f64>,
    response: Vec<u8>,
    group: Vec<Group>,
    weight: Vec<f64>,
}

/// Loads a trial dataset from a CSV file using the named schema.
pub fn load_csv(path: impl AsRef<Path>, schema: Schema) -> Result<RctDataset, DataError> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let cols = header_map(&mut reader)?;
    let (names, rows) = match schema {
        Schema::Generic => read_generic(&mut reader, &cols, true)?,
        Schema::Hillstrom => read_hillstrom(&mut reader, &cols)?,
        Schema::Criteo => read_numeric(&mut reader, &cols, &criteo_features(), "treatment", "visit")?,
        Schema::Starbucks => read_numeric(&mut reader, &cols, &starbucks_features(), "Promotion", "purchase")?,
    };
    if rows.response.is_empty() {
        return Err(DataError::Empty);
    }
    let weight = (!rows.weight.is_empty()).then_some(rows.weight);
    RctDataset::new(names, rows.features, rows.response, rows.group, weight)
}

/// Loads a plain classification table: generic schema without the `w` column.
pub fn load_labeled_csv(path: impl AsRef<Path>) -> Result<LabeledData, DataError> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let cols = header_map(&mut reader)?;
    let (names, rows) = read_generic(&mut reader, &cols, false)?;
    if rows.response.is_empty() {
        return Err(DataError::Empty);
    }
    let weight = (!rows.weight.is_empty()).then_some(rows.weight);
    LabeledData::new(names, rows.features, rows.response, weight)
}

fn read_generic(
    reader: &mut csv::Reader<File>,
    cols: &Columns,
    with_group: bool,
) -> Result<(Vec<String>, Rows), DataError> {
    let y = cols.get("y")?;
    let w = if with_group { Some(cols.get("w")?) } else { None };
    let weight = cols.index.get("weight").copied();
    let mut feature_cols: Vec<(usize, String)> = cols
        .index
        .iter()
        .filter(|(name, _)| !matches!(name.as_str(), "y" | "w" | "weight"))
        .map(|(name, &i)| (i, name.clone()))
        .collect();
    feature_cols.sort();
    let mut rows = Rows::default();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        rows.response.push(parse_binary(&record[y], line, "y")?);
        if let Some(w) = w {
            let t = parse_binary(&record[w], line, "w")?;
            rows.group.push(if t == 1 { Group::Treatment } else { Group::Control });
        }
        if let Some(c) = weight {
            let v = parse_f64(&record[c], line, "weight")?;
            if !v.is_finite() || v < 0.0 {
                return Err(ingest_err(line, "weight", format!("invalid weight `{v}`")));
            }
            rows.weight.push(v);
        }
        for (c, name) in &feature_cols {
            rows.features.push(parse_f64(&record[*c], line, name)?);
        }
    }
    Ok((feature_cols.into_iter().map(|(_, n)| n).collect(), rows))
}

fn criteo_features() -> Vec<String> {
    (0..12).map(|i| format!("f{i}")).collect()
}

fn starbucks_features() -> Vec<String> {
    (1..=7).map(|i| format!("V{i}")).collect()
}

fn parse_arm(field: &str, line: u64, column: &str) -> Result<Group, DataError> {
    match field.trim() {
        "Yes" | "yes" => Ok(Group::Treatment),
        "No" | "no" => Ok(Group::Control),
        other => Ok(if parse_binary(other, line, column)? == 1 {
            Group::Treatment
        } else {
            Group::Control
        }),
    }
}

fn read_numeric(
    reader: &mut csv::Reader<File>,
    cols: &Columns,
    features: &[String],
    treatment: &str,
    response: &str,
) -> Result<(Vec<String>, Rows), DataError> {
    let t = cols.get(treatment)?;
    let y = cols.get(response)?;
    let f: Vec<usize> = features
        .iter()
        .map(|name| cols.get(name))
        .collect::<Result<_, _>>()?;
    let mut rows = Rows::default();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        rows.group.push(parse_arm(&record[t], line, treatment)?);
        rows.response.push(parse_binary(&record[y], line, response)?);
        for (&c, name) in f.iter().zip(features) {
            rows.features.push(parse_f64(&record[c], line, name)?);
        }
    }
    Ok((features.to_vec(), rows))
}

fn one_hot(
    out: &mut Vec<f64>,
    levels: &[&str],
    value: &str,
    line: u64,
    column: &str,
) -> Result<(), DataError> {
    let hit = levels
        .iter()
        .position(|&l| l == value)
        .ok_or_else(|| ingest_err(line, column, format!("unknown category `{value}`")))?;
    out.extend((0..levels.len()).map(|i| if i == hit { 1.0 } else { 0.0 }));
    Ok(())
}

fn read_hillstrom(
    reader: &mut csv::Reader<File>,
    cols: &Columns,
) -> Result<(Vec<String>, Rows), DataError> {
    const NUMERIC: [&str; 5] = ["recency", "history", "mens", "womens", "newbie"];
    let numeric: Vec<usize> = NUMERIC
        .iter()
        .map(|c| cols.get(c))
        .collect::<Result<_, _>>()?;
    let seg_hist = cols.get("history_segment")?;
    let zip = cols.get("zip_code")?;
    let channel = cols.get("channel")?;
    let segment = cols.get("segment")?;
    let conversion = cols.get("conversion")?;

    let mut names: Vec<String> = NUMERIC.iter().map(|s| s.to_string()).collect();
    for (col, levels) in [
        ("history_segment", &HISTORY_SEGMENTS[..]),
        ("zip_code", &ZIP_CODES[..]),
        ("channel", &CHANNELS[..]),
    ] {
        names.extend(levels.iter().map(|l| format!("{col}={l}")));
    }

    let mut rows = Rows::default();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let group = match &record[segment] {
            "Womens E-Mail" => Group::Treatment,
            "No E-Mail" => Group::Control,
            "Mens E-Mail" => continue,
            other => {
                return Err(ingest_err(line, "segment", format!("unknown segment `{other}`")))
            }
        };
        rows.group.push(group);
        rows.response
            .push(parse_binary(&record[conversion], line, "conversion")?);
        for (&c, name) in numeric.iter().zip(NUMERIC) {
            rows.features.push(parse_f64(&record[c], line, name)?);
        }
        one_hot(&mut rows.features, &HISTORY_SEGMENTS, &record[seg_hist], line, "history_segment")?;
        one_hot(&mut rows.features, &ZIP_CODES, &record[zip], line, "zip_code")?;
        one_hot(&mut rows.features, &CHANNELS, &record[channel], line, "channel")?;
    }
    Ok((names, rows))
}

/// Writes a dataset in the generic schema. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_csv(dataset: &RctDataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    if let Some(bad) = dataset
        .feature_names()
        .iter()
        .find(|n| matches!(n.as_str(), "y" | "w" | "weight"))
    {
        return Err(DataError::InvalidSpec(format!(
            "feature name `{bad}` collides with a reserved column"
        )));
    }
    let file = File::create(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = dataset.feature_names().iter().map(String::as_str).collect();
    header.extend(["y", "w", "weight"]);
    w.write_record(&header)?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..dataset.n() {
        fields.clear();
        fields.extend(dataset.row(i).iter().map(|v| v.to_string()));
        fields.push(dataset.response()[i].to_string());
        fields.push(if dataset.group()[i].is_treatment() { "1" } else { "0" }.to_string());
        fields.push(dataset.weights()[i].to_string());
        w.write_record(&fields)?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn generic_round_trip() {
        let f = write_tmp("a,y,b,w,weight\n0.1,1,-3,1,2.5\n1e-7,0,4,0,1\n");
        let d = load_csv(f.path(), Schema::Generic).unwrap();
        assert_eq!(d.feature_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(d.row(1), &[1e-7, 4.0]);
        assert_eq!(d.weights(), &[2.5, 1.0]);
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&d, out.path()).unwrap();
        let again = load_csv(out.path(), Schema::Generic).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_tmp("");
        assert!(load_csv(f.path(), Schema::Generic).is_err());
        let f = write_tmp("x,y,w\n");
        assert!(matches!(load_csv(f.path(), Schema::Generic), Err(DataError::Empty)));
    }

    #[test]
    fn bad_values_name_line_and_column() {
        let f = write_tmp("x,y,w\n1,0,1\n2,3,0\n");
        match load_csv(f.path(), Schema::Generic) {
            Err(DataError::Ingest { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
        let f = write_tmp("x,y,w\nabc,0,1\n");
        assert!(matches!(
            load_csv(f.path(), Schema::Generic),
            Err(DataError::Ingest { ref column, .. }) if column == "x"
        ));
        let f = write_tmp("x,w\n1,1\n");
        assert!(matches!(
            load_csv(f.path(), Schema::Generic),
            Err(DataError::MissingColumn(ref c)) if c == "y"
        ));
    }

    #[test]
    fn hillstrom_filters_mens_arm() {
        let f = write_tmp(
            "recency,history_segment,history,mens,womens,zip_code,newbie,channel,segment,visit,conversion,spend\n\
             10,\"2) $100 - $200\",142.44,1,0,Surburban,0,Phone,Womens E-Mail,0,0,0\n\
             6,\"3) $200 - $350\",329.08,1,1,Rural,1,Web,No E-Mail,0,1,0\n\
             7,\"2) $100 - $200\",180.65,0,1,Surburban,1,Web,Mens E-Mail,0,0,0\n",
        );
        let d = load_csv(f.path(), Schema::Hillstrom).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.p(), 5 + 7 + 3 + 3);
        assert_eq!(d.group(), &[Group::Treatment, Group::Control]);
        assert_eq!(d.response(), &[0, 1]);
        let r = d.row(0);
        assert_eq!(&r[..5], &[10.0, 142.44, 1.0, 0.0, 0.0]);
        assert_eq!(&r[5..12], &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(&r[12..15], &[0.0, 1.0, 0.0]);
        assert_eq!(&r[15..], &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn starbucks_and_criteo_columns() {
        let f = write_tmp("ID,Promotion,purchase,V1,V2,V3,V4,V5,V6,V7\n1,No,0,2,30.4,-1.1,1,3,2,2\n3,Yes,1,0,32.1,-0.2,2,2,2,1\n");
        let d = load_csv(f.path(), Schema::Starbucks).unwrap();
        assert_eq!((d.n(), d.p()), (2, 7));
        assert_eq!(d.group(), &[Group::Control, Group::Treatment]);
        let header: Vec<String> = (0..12).map(|i| format!("f{i}")).collect();
        let mut s = header.join(",") + ",treatment,conversion,visit,exposure\n";
        s += &vec!["1.5"; 12].join(",");
        s += ",1,0,1,0\n";
        let f = write_tmp(&s);
        let d = load_csv(f.path(), Schema::Criteo).unwrap();
        assert_eq!((d.n(), d.p()), (1, 12));
        assert_eq!(d.response(), &[1]);
    }

    #[test]
    fn labeled_loader_ignores_group() {
        let f = write_tmp("x,y\n1,0\n2,1\n");
        let d = load_labeled_csv(f.path()).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.response(), &[0, 1]);
    }
}
