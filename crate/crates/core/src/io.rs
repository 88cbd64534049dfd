//! JSONL and file helpers shared by the pipeline stages.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Read newline-delimited JSON records, reporting the failing line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| Error::MalformedRecord {
            line: index + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Serialize records as one JSON object per line.
pub fn write_jsonl<T: Serialize, W: Write>(records: &[T], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Write a file atomically: everything goes to a sibling temp file which is
/// renamed over the target only after a successful flush.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter {
            name: "path",
            reason: format!("{} has no file name", path.display()),
        })?
        .to_string_lossy()
        .into_owned();
    let tmp_path = match dir {
        Some(dir) => dir.join(format!(".{file_name}.tmp")),
        None => Path::new(&format!(".{file_name}.tmp")).to_path_buf(),
    };
    let result = (|| {
        let mut file = BufWriter::new(File::create(&tmp_path)?);
        write(&mut file)?;
        file.flush()?;
        file.into_inner()
            .map_err(|e| Error::Io(e.into_error()))?
            .sync_all()?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            std::fs::rename(&tmp_path, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::remove_file(&tmp_path);
            Err(e)
        }
    }
}

/// `write_jsonl` into an atomically replaced file.
pub fn write_jsonl_atomic<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    write_atomic(path, |out| write_jsonl(records, out))
}
