use std::fs;
use std::path::{Path, PathBuf};

use lowband_core::raster::{read_annotations, read_pnm};
use lowband_core::{Annotation, Image};

use crate::CliError;

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn read_image(path: &Path) -> Result<Image, CliError> {
    read_pnm(&read_bytes(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn read_annotation_file(path: &Path) -> Result<Vec<Annotation>, CliError> {
    read_annotations(&read_bytes(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Every `.pgm`, `.ppm` and `.pnm` file in `dir`, in file-name order.
pub fn read_image_dir(dir: &Path) -> Result<Vec<Image>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm"))
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| read_image(p)).collect()
}
