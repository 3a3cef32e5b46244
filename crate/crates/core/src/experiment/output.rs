use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

/// Formats `x` in plain decimal with 12 significant digits, switching to
/// scientific notation outside `[1e-4, 1e12)`.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..12).contains(&mag) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

/// A table with a header row, written as CSV or whitespace-separated data.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(|v| sig12(*v)).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_dat(&self) -> String {
        let mut s = format!("# {}\n", self.header.join(" "));
        for r in &self.rows {
            s.push_str(&r.iter().map(|v| sig12(*v)).collect::<Vec<_>>().join(" "));
            s.push('\n');
        }
        s
    }
}

/// Versions of the library modules, embedded in every report.
pub fn module_versions() -> BTreeMap<&'static str, &'static str> {
    let v = env!("CARGO_PKG_VERSION");
    [
        "geometry",
        "fem",
        "cross_section",
        "boundary_layer",
        "floquet",
        "asymptotics",
        "experiment",
    ]
    .into_iter()
    .map(|m| (m, v))
    .collect()
}

#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub command: &'a str,
    pub config_hash: &'a str,
    pub seed: u64,
    pub package: &'static str,
    pub versions: BTreeMap<&'static str, &'static str>,
    pub result: &'a T,
}

pub(crate) fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

pub(crate) fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| crate::Error::Config(format!("cannot serialize report: {e}")))?;
    write(dir, name, &(text + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig12(29.608813203268074), "29.6088132033");
        assert_eq!(sig12(-std::f64::consts::TAU), "-6.28318530718");
        assert_eq!(sig12(0.0015), "0.00150000000000");
        assert_eq!(sig12(1.5e-7), "1.50000000000e-7");
        assert_eq!(sig12(0.0), "0");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(["h", "l"]);
        t.push(vec![0.2, 2.5]);
        assert_eq!(t.to_csv(), "h,l\n0.200000000000,2.50000000000\n");
        assert!(t.to_dat().starts_with("# h l\n"));
    }

    proptest! {
        #[test]
        fn twelve_significant_digits_round_trip(x in -1e6f64..1e6) {
            prop_assume!(x.abs() > 1e-3);
            let back: f64 = sig12(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 1e-11 * x.abs());
        }
    }
}
