//! Adapter from a directory of raw two-column spectrum CSVs to canonical
//! trace files. All knowledge about the raw dataset layout lives here.
//!
//! Raw files are expected to hold `frequency,power` rows; lines that do not
//! start with a number (headers, comments) are skipped. Frequencies all at or
//! below 5 are taken to be in MHz. Everything else is inferred:
//!
//! * instrument: from the point count (32768 or 100000),
//! * setup: a path component containing `home` gives `home_setup1`, one
//!   containing `setup<N>` (N in 1..=4) gives `lab_setup<N>`,
//! * appliance: the longest catalog name that matches a path component or
//!   the file stem, ignoring case and punctuation.
//!
//! Files that cannot be mapped are reported and skipped.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{catalog, write_trace, HfedError, Instrument, MeasuredTrace, Setup};
use crate::spectral::{check_uniform_grid, Spectrum};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportedFile {
    pub source: PathBuf,
    pub output: PathBuf,
    pub instrument: Instrument,
    pub setup: Setup,
    pub appliance: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedFile {
    pub source: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ImportReport {
    pub imported: Vec<ImportedFile>,
    pub skipped: Vec<SkippedFile>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HfedError + '_ {
    move |source| HfedError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), HfedError> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io_err(dir))?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            csv_files(&path, out)?;
        } else if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        {
            out.push(path);
        }
    }
    Ok(())
}

fn normalise(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

fn infer_setup(components: &[String]) -> Option<Setup> {
    if components.iter().any(|c| c.contains("home")) {
        return Some(Setup::HomeSetup1);
    }
    components.iter().find_map(|c| {
        let idx = c.find("setup")?;
        match c[idx + 5..].chars().next()? {
            '1' => Some(Setup::LabSetup1),
            '2' => Some(Setup::LabSetup2),
            '3' => Some(Setup::LabSetup3),
            '4' => Some(Setup::LabSetup4),
            _ => None,
        }
    })
}

fn infer_appliance(components: &[String]) -> Option<String> {
    catalog()
        .into_iter()
        .map(|e| (normalise(e.name), e.name))
        .filter(|(key, _)| components.iter().any(|c| c.contains(key.as_str())))
        .max_by_key(|(key, _)| key.len())
        .map(|(_, name)| name.to_string())
}

fn parse_raw(text: &str) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut freqs = Vec::new();
    let mut power = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if !line.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.') {
            continue;
        }
        let mut cols = line.split([',', ';', '\t']).map(str::trim);
        let (Some(f), Some(p)) = (cols.next(), cols.next()) else {
            return Err(format!("line {}: expected two columns", i + 1));
        };
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("line {}: bad number `{s}`", i + 1))
        };
        freqs.push(parse(f)?);
        power.push(parse(p)?);
    }
    if freqs.is_empty() {
        return Err("no data rows".into());
    }
    if freqs.iter().all(|f| *f <= 5.0) {
        freqs.iter_mut().for_each(|f| *f *= 1e6);
    }
    Ok((freqs, power))
}

fn convert(root: &Path, path: &Path) -> Result<MeasuredTrace, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let (freqs, power) = parse_raw(&text)?;
    let instrument = Instrument::from_points(power.len()).ok_or_else(|| {
        format!(
            "{} points matches no instrument (32768 or 100000)",
            power.len()
        )
    })?;
    let rel = path.strip_prefix(root).unwrap_or(path);
    let mut components: Vec<String> = rel
        .parent()
        .into_iter()
        .flat_map(|p| p.components())
        .map(|c| normalise(&c.as_os_str().to_string_lossy()))
        .collect();
    if let Some(stem) = path.file_stem() {
        components.push(normalise(&stem.to_string_lossy()));
    }
    let setup = infer_setup(&components).ok_or("cannot infer setup from path")?;
    let appliance = infer_appliance(&components);
    let (f0, df) = check_uniform_grid(&freqs).map_err(|e| e.to_string())?;
    let mut spectrum = Spectrum::measured(f0, df, power).map_err(|e| e.to_string())?;
    spectrum.n_fft = instrument.points();
    MeasuredTrace::new(spectrum, instrument, setup, appliance, None).map_err(|e| e.to_string())
}

/// Converts every `*.csv` below `dataset` into a canonical trace under
/// `out`, keeping the relative path. Files are processed in sorted order.
pub fn import_dataset(dataset: &Path, out: &Path) -> Result<ImportReport, HfedError> {
    let mut files = Vec::new();
    csv_files(dataset, &mut files)?;
    let mut report = ImportReport::default();
    for path in files {
        match convert(dataset, &path) {
            Ok(trace) => {
                let rel = path.strip_prefix(dataset).unwrap_or(&path);
                let output = out.join(rel);
                if let Some(parent) = output.parent() {
                    std::fs::create_dir_all(parent).map_err(io_err(parent))?;
                }
                std::fs::write(&output, write_trace(&trace)).map_err(io_err(&output))?;
                report.imported.push(ImportedFile {
                    source: path,
                    output,
                    instrument: trace.instrument,
                    setup: trace.setup,
                    appliance: trace.appliance_label,
                });
            }
            Err(reason) => {
                log::warn!("skipping {}: {reason}", path.display());
                report.skipped.push(SkippedFile {
                    source: path,
                    reason,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infers_metadata_from_path() {
        let comps: Vec<String> = ["Lab", "Setup_3", "LED_Lamp-2_run1"]
            .iter()
            .map(|s| normalise(s))
            .collect();
        assert_eq!(infer_setup(&comps), Some(Setup::LabSetup3));
        assert_eq!(infer_appliance(&comps).as_deref(), Some("LED Lamp-2"));
        let comps: Vec<String> = ["home", "CFL1"].iter().map(|s| normalise(s)).collect();
        assert_eq!(infer_setup(&comps), Some(Setup::HomeSetup1));
        assert_eq!(infer_appliance(&comps).as_deref(), Some("CFL1"));
        assert_eq!(infer_setup(&[normalise("misc")]), None);
    }

    #[test]
    fn raw_parsing() {
        let (f, p) = parse_raw("Frequency,Power\n0.01,-80\n0.02,-81\n").unwrap();
        assert_eq!(f, vec![10e3, 20e3]);
        assert_eq!(p, vec![-80.0, -81.0]);
        assert!(parse_raw("header only\n").is_err());
        assert!(parse_raw("1;x\n").is_err());
    }
}
