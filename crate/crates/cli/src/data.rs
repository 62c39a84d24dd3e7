//! Data-matrix CSV input for the Gibbs sampler.

use std::path::Path;

use relkit_core::bayes::DataMatrix;

use crate::error::CliError;

/// Reads a CSV with a header row; empty cells and `NA` are missing.
pub fn read_data_csv(path: &Path) -> Result<(Vec<String>, DataMatrix), CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = i + 2;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| match cell {
                "" | "NA" => Ok(None),
                s => s.parse::<f64>().map(Some).map_err(|_| {
                    CliError::Data(format!("{}: line {line}, column {}: not a number: {s:?}", path.display(), j + 1))
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let data = DataMatrix::from_rows(&rows).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((names, data))
}
