//! Whole-file reads and writes plus the small text formats the commands accept.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Parses a TOML config, or returns the defaults when no file was given.
pub fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| CliError::in_file(p, e)),
    }
}

/// Non-empty lines with `#` comments removed, tagged with 1-based line numbers.
pub fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

/// Splits a line on whitespace and commas.
pub fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|f| !f.is_empty())
}

pub fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64, CliError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::Invalid(format!(
            "{}:{line}: {field:?} is not a finite number",
            path.display()
        ))),
    }
}

/// One number per line.
pub fn read_numbers(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = read_text(path)?;
    data_lines(&text)
        .map(|(i, l)| {
            let mut f = fields(l);
            let v = f.next().expect("data lines are non-empty");
            if f.next().is_some() {
                return Err(CliError::Invalid(format!(
                    "{}:{i}: expected one number per line",
                    path.display()
                )));
            }
            parse_f64(path, i, v)
        })
        .collect()
}
