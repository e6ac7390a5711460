//! All-or-nothing file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes every `(name, bytes)` pair under `dir`. Nothing becomes visible
/// until all temporaries have been written and flushed.
pub fn write_all(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let mut tmp = NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
        tmp.write_all(bytes).and_then(|_| tmp.flush()).map_err(|e| io_err(tmp.path(), e))?;
        staged.push((tmp, dir.join(name)));
    }
    staged
        .into_iter()
        .map(|(tmp, path)| {
            tmp.persist(&path).map_err(|e| io_err(&path, e.error))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_files_and_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested");
        let paths = write_all(&out, &[("a.txt", b"one".to_vec()), ("b.txt", b"two".to_vec())]).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(std::fs::read(out.join("b.txt")).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(&out).unwrap().count(), 2);
    }

    #[test]
    fn unwritable_directory_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let err = write_all(&blocker.join("sub"), &[("a", vec![])]).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}
