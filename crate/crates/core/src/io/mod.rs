//! File and stream formats: binary PGM, ASCII PLY and the raw frame stream.

pub mod pgm;
pub mod ply;
pub mod stream;

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;

/// Regular files in `dir` with the given extension, sorted by file name.
pub fn sorted_files(dir: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file()
            && path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case(extension))
        {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}
