// SPDX-License-Identifier: Apache-2.0
//! Loading `.tl` files from disk and writing refactored suites back.
//!
//! A file's id (its `path` inside [`ParsedFile`]) is relative to the root it
//! was found under, with `/` separators, so a suite and its refactored copy
//! in another directory share ids.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::testlang::{parse_file, serialize_file, ParseError, ParsedFile};

pub const EXTENSION: &str = "tl";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("duplicate file id `{0}`")]
    DuplicateId(String),
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CorpusError> {
    for entry in fs::read_dir(dir).map_err(io_error(dir))? {
        let path = entry.map_err(io_error(dir))?.path();
        if path.is_dir() {
            collect(&path, out)?;
        } else if path.extension().is_some_and(|e| e == EXTENSION) {
            out.push(path);
        }
    }
    Ok(())
}

fn relative_id(path: &Path, root: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Loads every `.tl` file named by `paths`. A file argument gets its file
/// name as id; a directory is walked recursively and its files get ids
/// relative to it. The result is sorted by id.
pub fn load_paths<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<ParsedFile>, CorpusError> {
    let mut found: Vec<(String, PathBuf)> = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let meta = fs::metadata(p).map_err(io_error(p))?;
        if meta.is_dir() {
            let mut files = Vec::new();
            collect(p, &mut files)?;
            found.extend(files.into_iter().map(|f| (relative_id(&f, p), f)));
        } else {
            let root = p.parent().unwrap_or(Path::new(""));
            found.push((relative_id(p, root), p.to_path_buf()));
        }
    }
    found.sort();
    if let Some(w) = found.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(CorpusError::DuplicateId(w[0].0.clone()));
    }
    found
        .into_iter()
        .map(|(id, path)| {
            let source = fs::read_to_string(&path).map_err(io_error(&path))?;
            parse_file(&source, &id).map_err(|source| CorpusError::Parse { path, source })
        })
        .collect()
}

/// Writes each file under `dir` at its id.
pub fn write_suite(dir: &Path, files: &[ParsedFile]) -> Result<(), CorpusError> {
    for file in files {
        let target = dir.join(&file.path);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(io_error(parent))?;
        }
        fs::write(&target, serialize_file(file)).map_err(io_error(&target))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_ids_are_relative_and_sorted() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("b/c")).unwrap();
        fs::write(dir.path().join("b/c/x.tl"), "test t { assert(true); }").unwrap();
        fs::write(dir.path().join("a.tl"), "test u { assert(true); }").unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let files = load_paths(&[dir.path()]).unwrap();
        let ids: Vec<_> = files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(ids, ["a.tl", "b/c/x.tl"]);

        let out = tempfile::tempdir().unwrap();
        write_suite(out.path(), &files).unwrap();
        assert_eq!(load_paths(&[out.path()]).unwrap(), files);

        let single = load_paths(&[dir.path().join("b/c/x.tl")]).unwrap();
        assert_eq!(single[0].path, "x.tl");
    }

    #[test]
    fn parse_errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("bad.tl"), "test {").unwrap();
        let err = load_paths(&[dir.path()]).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { .. }));
        assert!(err.to_string().contains("bad.tl"));
    }
}
