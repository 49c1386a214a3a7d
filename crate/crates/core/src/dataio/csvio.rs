use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::dataio::Dataset;
use crate::error::{Error, Result};

/// Reads `x1,...,xn[,label]` with a header row.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let csv_err = |line: u64, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };

    let headers = reader
        .headers()
        .map_err(|e| csv_err(1, e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let has_labels = names.last() == Some(&"label");
    let dim = names.len() - usize::from(has_labels);
    if dim == 0 {
        return Err(csv_err(1, "no coordinate columns".into()));
    }
    for (m, name) in names[..dim].iter().enumerate() {
        if *name != format!("x{}", m + 1) {
            return Err(csv_err(1, format!("expected column x{}, found {name:?}", m + 1)));
        }
    }

    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != names.len() {
            return Err(csv_err(
                line,
                format!("expected {} fields, found {}", names.len(), record.len()),
            ));
        }
        for (m, field) in record.iter().take(dim).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| csv_err(line, format!("x{}: cannot parse {field:?}", m + 1)))?;
            if !v.is_finite() {
                return Err(csv_err(line, format!("x{}: non-finite value {field:?}", m + 1)));
            }
            coords.push(v);
        }
        if has_labels {
            let field = record.get(dim).unwrap_or_default().trim();
            labels.push(
                field
                    .parse::<usize>()
                    .map_err(|_| csv_err(line, format!("label: cannot parse {field:?}")))?,
            );
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Dataset::new(dim, coords, has_labels.then_some(labels))?.with_name(name))
}

/// Writes the dataset with shortest round-trip float formatting.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let header: Vec<String> = (1..=dataset.dim()).map(|m| format!("x{m}")).collect();
    out.push_str(&header.join(","));
    if dataset.labels().is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for (i, p) in dataset.iter().enumerate() {
        let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        if let Some(labels) = dataset.labels() {
            out.push_str(&format!(",{}", labels[i]));
        }
        out.push('\n');
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
