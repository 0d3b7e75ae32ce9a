//! Frame ingestion and map / foci / timing serialization.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bias_core::fixation::GaussianFocus;
use bias_core::pipeline::{FrameResult, StageTimings};
use bias_core::{FrameRGB, GrayMap};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{CliError, Result};

const FRAME_EXTENSIONS: [&str; 4] = ["png", "ppm", "pnm", "pgm"];
const MAP_EXTENSIONS: [&str; 4] = ["png", "pgm", "pnm", "pfm"];

fn has_extension(path: &Path, allowed: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| allowed.iter().any(|a| a.eq_ignore_ascii_case(e)))
        .unwrap_or(false)
}

fn sorted_files(dir: &Path, allowed: &[&str]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_file() && has_extension(&path, allowed) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Frame images in `dir`, sorted by file name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    sorted_files(dir, &FRAME_EXTENSIONS)
}

/// Saliency / fixation / density maps in `dir`, sorted by file name.
pub fn list_maps(dir: &Path) -> Result<Vec<PathBuf>> {
    sorted_files(dir, &MAP_EXTENSIONS)
}

pub fn decode_frame(path: &Path) -> Result<FrameRGB> {
    let img = image::open(path).map_err(|e| CliError::decode(path, e))?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(FrameRGB::from_rgb8(w as usize, h as usize, img.as_raw())?)
}

enum Source {
    Files {
        paths: Vec<PathBuf>,
        next: usize,
        dims: Option<(usize, usize)>,
    },
    Raw {
        reader: Box<dyn Read + Send>,
        label: PathBuf,
        width: usize,
        height: usize,
        index: usize,
        done: bool,
    },
}

/// Ordered frame stream from a directory of images or a raw RGB24 stream.
pub struct FrameReader {
    source: Source,
}

impl FrameReader {
    /// `input` is a directory of PNG/PPM frames, a raw RGB24 file, or `-` for
    /// raw RGB24 on standard input. Raw input needs `dims`.
    pub fn open(input: &str, dims: Option<(usize, usize)>) -> Result<Self> {
        let raw = |reader: Box<dyn Read + Send>, label: PathBuf| -> Result<Self> {
            let (width, height) = dims.ok_or_else(|| {
                CliError::Usage("raw RGB24 input needs --width and --height".into())
            })?;
            if width == 0 || height == 0 {
                return Err(CliError::Usage("frame dimensions must be positive".into()));
            }
            Ok(Self {
                source: Source::Raw {
                    reader,
                    label,
                    width,
                    height,
                    index: 0,
                    done: false,
                },
            })
        };
        if input == "-" {
            return raw(Box::new(BufReader::new(std::io::stdin())), PathBuf::from("<stdin>"));
        }
        let path = PathBuf::from(input);
        if path.is_dir() {
            return Ok(Self::from_paths(list_frames(&path)?));
        }
        let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
        raw(Box::new(BufReader::new(file)), path)
    }

    pub fn from_paths(paths: Vec<PathBuf>) -> Self {
        Self {
            source: Source::Files {
                paths,
                next: 0,
                dims: None,
            },
        }
    }

    pub fn from_raw(reader: impl Read + Send + 'static, width: usize, height: usize) -> Self {
        Self {
            source: Source::Raw {
                reader: Box::new(reader),
                label: PathBuf::from("<raw>"),
                width,
                height,
                index: 0,
                done: false,
            },
        }
    }
}

impl Iterator for FrameReader {
    type Item = Result<FrameRGB>;

    fn next(&mut self) -> Option<Self::Item> {
        match &mut self.source {
            Source::Files { paths, next, dims } => {
                let path = paths.get(*next)?;
                *next += 1;
                let frame = match decode_frame(path) {
                    Ok(f) => f,
                    Err(e) => return Some(Err(e)),
                };
                match *dims {
                    Some(d) if d != frame.dims() => Some(Err(CliError::decode(
                        path,
                        format!(
                            "frame is {}x{}, earlier frames are {}x{}",
                            frame.width(),
                            frame.height(),
                            d.0,
                            d.1
                        ),
                    ))),
                    _ => {
                        *dims = Some(frame.dims());
                        Some(Ok(frame))
                    }
                }
            }
            Source::Raw {
                reader,
                label,
                width,
                height,
                index,
                done,
            } => {
                if *done {
                    return None;
                }
                let mut buf = vec![0u8; *width * *height * 3];
                let mut filled = 0;
                while filled < buf.len() {
                    match reader.read(&mut buf[filled..]) {
                        Ok(0) => break,
                        Ok(n) => filled += n,
                        Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                        Err(e) => {
                            *done = true;
                            return Some(Err(CliError::io(&*label, e)));
                        }
                    }
                }
                if filled == 0 {
                    *done = true;
                    return None;
                }
                if filled < buf.len() {
                    *done = true;
                    return Some(Err(CliError::decode(
                        &*label,
                        format!("truncated frame {}: {} of {} bytes", *index, filled, buf.len()),
                    )));
                }
                *index += 1;
                Some(FrameRGB::from_rgb8(*width, *height, &buf).map_err(CliError::from))
            }
        }
    }
}

/// `round(255 · clamp(v, 0, 1))` per pixel.
pub fn quantize(map: &GrayMap) -> Vec<u8> {
    map.data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapFormat {
    Png,
    Pgm,
}

impl MapFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MapFormat::Png => "png",
            MapFormat::Pgm => "pgm",
        }
    }
}

impl FromStr for MapFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "png" => Ok(MapFormat::Png),
            "pgm" => Ok(MapFormat::Pgm),
            other => Err(CliError::Usage(format!("unknown map format '{other}' (png, pgm)"))),
        }
    }
}

/// 8-bit grayscale PNG or binary PGM (P5).
pub fn write_gray(path: &Path, map: &GrayMap, format: MapFormat) -> Result<()> {
    let (w, h) = (map.width() as u32, map.height() as u32);
    let pixels = quantize(map);
    match format {
        MapFormat::Png => image::save_buffer_with_format(path, &pixels, w, h, ExtendedColorType::L8, ImageFormat::Png)
            .map_err(|e| CliError::decode(path, e)),
        MapFormat::Pgm => {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            let mut out = BufWriter::new(file);
            PnmEncoder::new(&mut out)
                .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
                .write_image(&pixels, w, h, ExtendedColorType::L8)
                .map_err(|e| CliError::decode(path, e))?;
            out.flush().map_err(|e| CliError::io(path, e))
        }
    }
}

/// Little-endian single-channel PFM, rows stored bottom to top.
pub fn write_pfm(path: &Path, map: &GrayMap) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = Vec::with_capacity(map.len() * 4 + 32);
    body.extend_from_slice(format!("Pf\n{} {}\n-1.0\n", map.width(), map.height()).as_bytes());
    for y in (0..map.height()).rev() {
        for &v in map.row(y) {
            body.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    w.write_all(&body).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<GrayMap> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = Vec::new();
    while header.len() < 4 {
        let mut line = String::new();
        if r.read_line(&mut line).map_err(|e| CliError::io(path, e))? == 0 {
            return Err(CliError::decode(path, "truncated PFM header"));
        }
        header.extend(line.split_whitespace().map(str::to_owned));
    }
    if header[0] != "Pf" {
        return Err(CliError::decode(path, "not a single-channel PFM"));
    }
    let parse = |s: &str| s.parse::<f64>().map_err(|_| CliError::decode(path, "bad PFM header"));
    let (w, h, scale) = (parse(&header[1])? as usize, parse(&header[2])? as usize, parse(&header[3])?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| CliError::io(path, e))?;
    if bytes.len() != w * h * 4 {
        return Err(CliError::decode(path, "PFM payload size does not match header"));
    }
    let little = scale < 0.0;
    let mut data = vec![0.0; w * h];
    for (i, c) in bytes.chunks_exact(4).enumerate() {
        let b = [c[0], c[1], c[2], c[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (row, col) = (h - 1 - i / w, i % w);
        data[row * w + col] = v as f64;
    }
    Ok(GrayMap::from_vec(w, h, data)?)
}

/// Reads a map scaled to `[0, 1]` (8/16-bit images) or as stored (PFM).
pub fn read_map(path: &Path) -> Result<GrayMap> {
    if has_extension(path, &["pfm"]) {
        return read_pfm(path);
    }
    let img = image::open(path).map_err(|e| CliError::decode(path, e))?.to_luma16();
    let (w, h) = img.dimensions();
    let data = img.as_raw().iter().map(|&v| v as f64 / 65535.0).collect();
    Ok(GrayMap::from_vec(w as usize, h as usize, data)?)
}

/// Artifact kinds `run` can write.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EmitKind {
    Saliency,
    Static,
    Dynamic,
    Fixation,
    Foci,
    Timing,
}

impl EmitKind {
    pub const ALL: [EmitKind; 6] = [
        EmitKind::Saliency,
        EmitKind::Static,
        EmitKind::Dynamic,
        EmitKind::Fixation,
        EmitKind::Foci,
        EmitKind::Timing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EmitKind::Saliency => "saliency",
            EmitKind::Static => "static",
            EmitKind::Dynamic => "dynamic",
            EmitKind::Fixation => "fixation",
            EmitKind::Foci => "foci",
            EmitKind::Timing => "timing",
        }
    }

    fn map_of(self, r: &FrameResult) -> Option<&GrayMap> {
        match self {
            EmitKind::Saliency => Some(&r.master_map),
            EmitKind::Static => Some(&r.static_map),
            EmitKind::Dynamic => Some(&r.dynamic_map),
            EmitKind::Fixation => Some(&r.fixation_map),
            EmitKind::Foci | EmitKind::Timing => None,
        }
    }

    /// Comma-separated list; `all` selects every kind.
    pub fn parse_list(s: &str) -> Result<Vec<EmitKind>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                return Ok(Self::ALL.to_vec());
            }
            let k = Self::ALL
                .into_iter()
                .find(|k| k.name() == part)
                .ok_or_else(|| CliError::Usage(format!("unknown emit kind '{part}'")))?;
            if !out.contains(&k) {
                out.push(k);
            }
        }
        if out.is_empty() {
            return Err(CliError::Usage("--emit selects nothing".into()));
        }
        Ok(out)
    }
}

pub const FOCI_HEADER: [&str; 6] = ["frame", "mu_x", "mu_y", "sigma_x", "sigma_y", "amplitude"];

pub fn foci_record(frame: usize, f: &GaussianFocus) -> [String; 6] {
    [
        frame.to_string(),
        f.mu.0.to_string(),
        f.mu.1.to_string(),
        f.sigma.0.to_string(),
        f.sigma.1.to_string(),
        f.amplitude.to_string(),
    ]
}

fn timing_header() -> Vec<String> {
    let mut h = vec!["frame".to_string()];
    h.extend(StageTimings::STAGES.iter().map(|s| format!("{s}_ms")));
    h
}

fn timing_record(frame: usize, t: &StageTimings) -> Vec<String> {
    let mut r = vec![frame.to_string()];
    r.extend(t.as_array().iter().map(|d| format!("{:.6}", d.as_secs_f64() * 1e3)));
    r
}

/// Writes selected artifacts of each frame under one output directory:
/// `<kind>/NNNNNN.<ext>` images numbered from 1, `foci.csv` and `timing.csv`.
pub struct OutputWriter {
    out_dir: PathBuf,
    emit: Vec<EmitKind>,
    format: MapFormat,
    float_out: bool,
    foci: Option<csv::Writer<File>>,
    timing: Option<csv::Writer<File>>,
    written: usize,
}

impl OutputWriter {
    pub fn new(out_dir: &Path, emit: &[EmitKind], format: MapFormat, float_out: bool) -> Result<Self> {
        fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        let open_csv = |name: &str, header: &[String]| -> Result<csv::Writer<File>> {
            let path = out_dir.join(name);
            let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::decode(&path, e))?;
            w.write_record(header).map_err(|e| CliError::decode(&path, e))?;
            w.flush().map_err(|e| CliError::io(&path, e))?;
            Ok(w)
        };
        let mut foci = None;
        let mut timing = None;
        for &k in emit {
            match k {
                EmitKind::Foci => {
                    let header: Vec<String> = FOCI_HEADER.iter().map(|s| s.to_string()).collect();
                    foci = Some(open_csv("foci.csv", &header)?);
                }
                EmitKind::Timing => timing = Some(open_csv("timing.csv", &timing_header())?),
                _ => {
                    let dir = out_dir.join(k.name());
                    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                }
            }
        }
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            emit: emit.to_vec(),
            format,
            float_out,
            foci,
            timing,
            written: 0,
        })
    }

    /// Path of frame `index` (0-based) for an image kind.
    pub fn map_path(&self, kind: EmitKind, index: usize) -> PathBuf {
        let ext = if self.float_out { "pfm" } else { self.format.extension() };
        self.out_dir.join(kind.name()).join(format!("{:06}.{ext}", index + 1))
    }

    pub fn write(&mut self, r: &FrameResult) -> Result<()> {
        for &k in &self.emit {
            if let Some(map) = k.map_of(r) {
                let path = self.map_path(k, r.frame_index);
                if self.float_out {
                    write_pfm(&path, map)?;
                } else {
                    write_gray(&path, map, self.format)?;
                }
            }
        }
        let csv_err = |name: &str, e: csv::Error| CliError::decode(self.out_dir.join(name), e);
        if let Some(w) = self.foci.as_mut() {
            for f in &r.foci {
                w.write_record(foci_record(r.frame_index, f))
                    .map_err(|e| csv_err("foci.csv", e))?;
            }
        }
        if let Some(w) = self.timing.as_mut() {
            w.write_record(timing_record(r.frame_index, &r.timings))
                .map_err(|e| csv_err("timing.csv", e))?;
        }
        self.written += 1;
        Ok(())
    }

    /// Flushes the CSV logs; returns the number of frames written.
    pub fn finish(mut self) -> Result<usize> {
        for (name, w) in [("foci.csv", self.foci.as_mut()), ("timing.csv", self.timing.as_mut())] {
            if let Some(w) = w {
                w.flush().map_err(|e| CliError::io(self.out_dir.join(name), e))?;
            }
        }
        Ok(self.written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_rounds_and_clamps() {
        let m = GrayMap::from_vec(5, 1, vec![-0.2, 0.0, 0.5, 1.0, 1.7]).unwrap();
        assert_eq!(quantize(&m), vec![0, 0, 128, 255, 255]);
    }

    #[test]
    fn emit_lists() {
        assert_eq!(
            EmitKind::parse_list("saliency, foci,saliency").unwrap(),
            vec![EmitKind::Saliency, EmitKind::Foci]
        );
        assert_eq!(EmitKind::parse_list("all").unwrap().len(), 6);
        assert!(EmitKind::parse_list("bogus").is_err());
        assert!(EmitKind::parse_list("").is_err());
    }

    #[test]
    fn raw_stream_framing() {
        let bytes: Vec<u8> = (0..2 * 4 * 3 * 3).map(|i| (i % 251) as u8).collect();
        let frames: Vec<_> = FrameReader::from_raw(std::io::Cursor::new(bytes.clone()), 4, 2).collect();
        assert_eq!(frames.len(), 3);
        let f = frames[1].as_ref().unwrap();
        assert_eq!(f.pixel(0, 0), [24.0, 25.0, 26.0]);
        let mut short = bytes;
        short.pop();
        let frames: Vec<_> = FrameReader::from_raw(std::io::Cursor::new(short), 4, 2).collect();
        assert_eq!(frames.len(), 3);
        assert!(frames[2].is_err());
    }
}
