//! Evaluation-set layout.
//!
//! ```text
//! <root>/<video>/images/        frames (optional, not read by eval)
//! <root>/<video>/fixation/      binary fixation maps, one per frame
//! <root>/<video>/fixations.txt  or "frame x y" lines, 0-based frame index
//! <root>/<video>/maps/          continuous density maps (optional)
//! ```
//!
//! A root that itself holds `fixation/` or `fixations.txt` is a single video.

use std::fs;
use std::path::{Path, PathBuf};

use bias_core::GrayMap;

use crate::error::{CliError, Result};
use crate::io::{list_maps, read_map};

#[derive(Clone, Debug, PartialEq)]
pub enum FixationSource {
    Maps(Vec<PathBuf>),
    Text(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoEntry {
    pub name: String,
    pub dir: PathBuf,
    pub fixations: FixationSource,
    pub density_maps: Option<Vec<PathBuf>>,
}

/// Fixations of one frame; `dims` is known when they came from a map.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameFixations {
    pub points: Vec<(usize, usize)>,
    pub dims: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub videos: Vec<VideoEntry>,
    /// True when `root` is itself one video.
    pub single: bool,
}

fn video_entry(dir: &Path, name: String) -> Result<Option<VideoEntry>> {
    let fix_dir = dir.join("fixation");
    let fix_txt = dir.join("fixations.txt");
    let fixations = if fix_dir.is_dir() {
        FixationSource::Maps(list_maps(&fix_dir)?)
    } else if fix_txt.is_file() {
        FixationSource::Text(fix_txt)
    } else {
        return Ok(None);
    };
    let maps = dir.join("maps");
    let density_maps = if maps.is_dir() { Some(list_maps(&maps)?) } else { None };
    Ok(Some(VideoEntry {
        name,
        dir: dir.to_path_buf(),
        fixations,
        density_maps,
    }))
}

impl DatasetLayout {
    pub fn discover(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(CliError::dataset(root, "not a directory"));
        }
        let name = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "video".into());
        if let Some(v) = video_entry(root, name)? {
            return Ok(Self {
                root: root.to_path_buf(),
                videos: vec![v],
                single: true,
            });
        }
        let mut dirs: Vec<PathBuf> = fs::read_dir(root)
            .map_err(|e| CliError::io(root, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        let mut videos = Vec::new();
        for d in dirs {
            let name = d.file_name().expect("listed entry").to_string_lossy().into_owned();
            if let Some(v) = video_entry(&d, name)? {
                videos.push(v);
            }
        }
        if videos.is_empty() {
            return Err(CliError::dataset(root, "no video with fixation/ or fixations.txt"));
        }
        Ok(Self {
            root: root.to_path_buf(),
            videos,
            single: false,
        })
    }
}

/// Parses `frame x y` lines (0-based frame index, pixel coordinates);
/// blank lines and `#` comments are skipped. Fractional coordinates are
/// rounded.
pub fn parse_fixation_text(text: &str, path: &Path) -> Result<Vec<FrameFixations>> {
    let mut frames: Vec<FrameFixations> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || CliError::dataset(path, format!("line {}: expected 'frame x y'", lineno + 1));
        let fields: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|f| !f.is_empty()).collect();
        if fields.len() != 3 {
            return Err(bad());
        }
        let frame: usize = fields[0].parse().map_err(|_| bad())?;
        let x: f64 = fields[1].parse().map_err(|_| bad())?;
        let y: f64 = fields[2].parse().map_err(|_| bad())?;
        if !(x >= 0.0 && y >= 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(bad());
        }
        if frames.len() <= frame {
            frames.resize(frame + 1, FrameFixations::default());
        }
        frames[frame].points.push((x.round() as usize, y.round() as usize));
    }
    Ok(frames)
}

/// Nonzero pixels of a binary fixation map.
pub fn fixations_from_map(map: &GrayMap) -> FrameFixations {
    let (w, h) = map.dims();
    let points = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| map.get(x, y) > 0.0)
        .collect();
    FrameFixations {
        points,
        dims: Some((w, h)),
    }
}

impl VideoEntry {
    /// Fixations per frame, in frame order.
    pub fn load_fixations(&self) -> Result<Vec<FrameFixations>> {
        match &self.fixations {
            FixationSource::Maps(paths) => paths
                .iter()
                .map(|p| read_map(p).map(|m| fixations_from_map(&m)))
                .collect(),
            FixationSource::Text(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                parse_fixation_text(&text, path)
            }
        }
    }

    /// Prediction maps of this video inside `pred_root`.
    pub fn prediction_paths(&self, pred_root: &Path, single: bool) -> Result<Vec<PathBuf>> {
        let dir = pred_root.join(&self.name);
        let dir = if dir.is_dir() {
            dir
        } else if single {
            pred_root.to_path_buf()
        } else {
            return Err(CliError::dataset(&dir, "missing prediction directory"));
        };
        let paths = list_maps(&dir)?;
        if paths.is_empty() {
            return Err(CliError::dataset(&dir, "no prediction maps"));
        }
        Ok(paths)
    }
}
