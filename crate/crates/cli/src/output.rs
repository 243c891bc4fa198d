use std::path::Path;

use cavity_berry::model::ModelParams;

use crate::config::RunConfig;
use crate::CliError;

pub const SIG_DIGITS: usize = 12;

/// Scientific notation with [`SIG_DIGITS`] significant digits; `-0` prints as `0`.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return format!("{:.*e}", SIG_DIGITS - 1, 0.0);
    }
    if x.is_nan() {
        return "nan".into();
    }
    format!("{:.*e}", SIG_DIGITS - 1, x)
}

pub struct Table {
    pub name: &'static str,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Table { name, columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "{}: row width", self.name);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
}

/// Comment block heading every file: tool version, command, resolved
/// configuration and the unit conversions applied to it.
pub fn header(command: &str, cfg: &RunConfig, params: &ModelParams) -> String {
    let mut h = String::new();
    h.push_str(&format!("# {} {}\n", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")));
    h.push_str(&format!("# command = {command}\n"));
    for line in cfg.to_toml().lines() {
        h.push_str(&format!("# {line}\n"));
    }
    h.push_str("# units: time ms, angular frequency rad/ms = 2π × kHz\n");
    for (k, v) in [
        ("g_rad_per_ms", params.g()),
        ("omega_rad_per_ms", params.omega_drive()),
        ("delta_rad_per_ms", params.delta()),
        ("lambda_rad_per_ms", params.lambda()),
        ("rabi_period_ms", params.rabi_period()),
    ] {
        h.push_str(&format!("# {k} = {}\n", num(v)));
    }
    h.push_str(&format!("# lambda_khz = {}\n", num(params.lambda() / (2.0 * std::f64::consts::PI))));
    h.push_str(&format!("# dispersive_warning = {}\n", params.dispersive_warning()));
    h
}

pub fn render(header: &str, table: &Table) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(header.as_bytes().to_vec());
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", table.name));
    w.write_record(&table.columns).map_err(io)?;
    for row in &table.rows {
        w.write_record(row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(format!("{}: {e}", table.name)))?;
    Ok(String::from_utf8(bytes).expect("ascii csv"))
}

pub fn write_all(dir: &Path, header: &str, tables: &[Table]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let rendered: Vec<(String, String)> =
        tables.iter().map(|t| Ok((t.name.to_string(), render(header, t)?))).collect::<Result<_, CliError>>()?;
    for (name, text) in rendered {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(std::f64::consts::PI), "3.14159265359e0");
        assert_eq!(num(-0.0), "0.00000000000e0");
        assert_eq!(num(1.0e-7), "1.00000000000e-7");
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn quoting_and_layout() {
        let mut t = Table::new("t.csv", &["a", "b"]);
        t.push(vec!["1".into(), "x, y".into()]);
        assert_eq!(render("# h\n", &t).unwrap(), "# h\na,b\n1,\"x, y\"\n");
    }
}
