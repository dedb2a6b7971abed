use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use stationing::network::SCHEDULE_FILES;
use stationing::scenario::CONTEXT_DIR;
use stationing::Schedule;

use crate::errors;
use crate::manifest::Recorder;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| errors::io(format!("creating {}: {e}", dir.display())))
}

pub fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(errors::io(format!("{} does not exist", path.display())))
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| errors::io(format!("reading {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| errors::io(format!("writing {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing JSON")?;
    write_text(path, &(text + "\n"))
}

/// Writes `rows` under `header` as a CSV file.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| errors::io(format!("writing {}: {e}", path.display())))?;
    let io = |e: csv::Error| errors::io(format!("writing {}: {e}", path.display()));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| errors::io(format!("writing {}: {e}", path.display())))
}

pub fn load_schedule(dir: &Path, rec: &mut Recorder) -> Result<Schedule> {
    let schedule =
        Schedule::load(dir).with_context(|| format!("loading schedule from {}", dir.display()))?;
    for f in SCHEDULE_FILES {
        rec.input(dir.join(f));
    }
    Ok(schedule)
}

/// Per-day context files of a corpus, in day order.
pub fn context_files(data: &Path) -> Result<Vec<PathBuf>> {
    let dir = data.join(CONTEXT_DIR);
    let entries =
        fs::read_dir(&dir).map_err(|e| errors::io(format!("reading {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("day_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(errors::io(format!("no day contexts in {}", dir.display())));
    }
    Ok(files)
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
