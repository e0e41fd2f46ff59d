//! Image-folder ingestion: one subdirectory per class, PNG or JPEG files,
//! class indices assigned by lexicographic class-name order. Optionally a
//! manifest file (one `relative/path,class_name` record per line) selects
//! the samples instead of a directory walk.

use std::fs;
use std::path::{Path, PathBuf};

use super::DataError;

/// A decoded sample: 8-bit pixels, grayscale (1 channel) or interleaved RGB.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub pixels: Vec<u8>,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub label: usize,
    pub class_name: String,
    pub source_path: String,
}

/// A non-fatal problem found while loading (decode failure, empty class).
#[derive(Debug, Clone)]
pub struct LoadIssue {
    pub path: String,
    pub message: String,
}

pub struct DatasetLoad {
    pub samples: Vec<LabeledImage>,
    pub class_names: Vec<String>,
    pub issues: Vec<LoadIssue>,
}

fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("png") | Some("jpg") | Some("jpeg")
    )
}

pub fn decode_image(path: &Path, label: usize, class_name: &str) -> Result<LabeledImage, String> {
    let img = image::open(path).map_err(|e| e.to_string())?;
    let (channels, width, height, pixels) = match img.color() {
        image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16 => {
            let gray = img.to_luma8();
            (1, gray.width(), gray.height(), gray.into_raw())
        }
        _ => {
            let rgb = img.to_rgb8();
            (3, rgb.width(), rgb.height(), rgb.into_raw())
        }
    };
    if width == 0 || height == 0 {
        return Err("image has a zero dimension".into());
    }
    Ok(LabeledImage {
        pixels,
        height: height as usize,
        width: width as usize,
        channels,
        label,
        class_name: class_name.to_string(),
        source_path: path.display().to_string(),
    })
}

/// Walk `root/<class>/<file>` deterministically: classes sorted by name,
/// files sorted by path. Undecodable files are reported and skipped.
pub fn load_dataset(root: &Path) -> Result<DatasetLoad, DataError> {
    let entries = fs::read_dir(root).map_err(|e| DataError::Io {
        path: root.display().to_string(),
        source: e,
    })?;
    let mut class_dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| DataError::Io {
            path: root.display().to_string(),
            source: e,
        })?;
        let path = entry.path();
        if path.is_dir() {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                class_dirs.push((name.to_string(), path));
            }
        }
    }
    if class_dirs.is_empty() {
        return Err(DataError::NoClasses(root.display().to_string()));
    }
    class_dirs.sort_by(|a, b| a.0.cmp(&b.0));

    let mut samples = Vec::new();
    let mut issues = Vec::new();
    let class_names: Vec<String> = class_dirs.iter().map(|(n, _)| n.clone()).collect();
    for (label, (class_name, dir)) in class_dirs.iter().enumerate() {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| DataError::Io {
                path: dir.display().to_string(),
                source: e,
            })?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file() && is_image_file(p))
            .collect();
        files.sort();
        if files.is_empty() {
            issues.push(LoadIssue {
                path: dir.display().to_string(),
                message: format!("class `{class_name}` has no images"),
            });
            continue;
        }
        for file in files {
            match decode_image(&file, label, class_name) {
                Ok(sample) => samples.push(sample),
                Err(message) => issues.push(LoadIssue {
                    path: file.display().to_string(),
                    message,
                }),
            }
        }
    }
    Ok(DatasetLoad {
        samples,
        class_names,
        issues,
    })
}

/// Load the samples named by a manifest: one `relative/path,class_name` per
/// line (UTF-8, `#` comments and blank lines ignored). Class indices follow
/// lexicographic order of the class names appearing in the manifest.
pub fn load_manifest(root: &Path, manifest: &Path) -> Result<DatasetLoad, DataError> {
    let text = fs::read_to_string(manifest).map_err(|e| DataError::Io {
        path: manifest.display().to_string(),
        source: e,
    })?;
    let mut records: Vec<(String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (path, class) = line.split_once(',').ok_or_else(|| DataError::BadManifest {
            line: i + 1,
            reason: "expected `relative/path,class_name`".into(),
        })?;
        let (path, class) = (path.trim(), class.trim());
        if path.is_empty() || class.is_empty() {
            return Err(DataError::BadManifest {
                line: i + 1,
                reason: "empty path or class name".into(),
            });
        }
        records.push((path.to_string(), class.to_string()));
    }
    if records.is_empty() {
        return Err(DataError::Empty);
    }
    let mut class_names: Vec<String> = records.iter().map(|(_, c)| c.clone()).collect();
    class_names.sort();
    class_names.dedup();

    let mut samples = Vec::new();
    let mut issues = Vec::new();
    for (rel, class) in &records {
        let label = class_names
            .binary_search(class)
            .map_err(|_| DataError::UnknownClass(class.clone()))
            .expect("class drawn from manifest");
        let path = root.join(rel);
        match decode_image(&path, label, class) {
            Ok(sample) => samples.push(sample),
            Err(message) => issues.push(LoadIssue {
                path: path.display().to_string(),
                message,
            }),
        }
    }
    Ok(DatasetLoad {
        samples,
        class_names,
        issues,
    })
}
