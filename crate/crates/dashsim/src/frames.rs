//! Frame sampling, resizing and JPEG encoding of videos into frame packs.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process::Command;

use dashsim_core::sampling::{SamplingError, sample_indices};
use image::codecs::jpeg::JpegEncoder;
use image::imageops::FilterType;
use image::{DynamicImage, ImageBuffer, Rgb};
use serde::{Deserialize, Serialize};

use crate::mockvid::{self, MockVideo};

pub const DEFAULT_PROBE_COMMAND: &str = "ffprobe -v error -select_streams v:0 -count_frames \
     -show_entries stream=nb_read_frames,avg_frame_rate,duration -of json {input}";
pub const DEFAULT_EXTRACT_COMMAND: &str =
    "ffmpeg -v error -y -i {input} -vf 'select=eq(n\\,{frame_index})' -vsync 0 -frames:v 1 {output}";

const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRef {
    pub path: PathBuf,
    pub frame_count: usize,
    pub fps: f64,
    pub duration_s: f64,
}

impl VideoRef {
    pub fn new(path: PathBuf, frame_count: usize, fps: f64) -> Self {
        VideoRef { path, frame_count, fps, duration_s: frame_count as f64 / fps }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameImage {
    pub format: &'static str,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FramePack {
    pub source: VideoRef,
    pub indices: Vec<usize>,
    pub images: Vec<FrameImage>,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackManifest {
    pub source: PathBuf,
    pub indices: Vec<usize>,
    pub width: u32,
    pub height: u32,
    pub format: String,
    pub frame_count: usize,
    pub fps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSettings {
    pub n: usize,
    pub max_dim: u32,
    pub jpeg_quality: u8,
}

impl Default for FrameSettings {
    fn default() -> Self {
        FrameSettings { n: 10, max_dim: 512, jpeg_quality: 85 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("probing {path} failed: {detail}")]
    Probe { path: PathBuf, detail: String },
    #[error("extracting frame {index} of {path} failed: {detail}")]
    Extract { path: PathBuf, index: usize, detail: String },
    #[error("frame {index} of {path} could not be decoded: {detail}")]
    Decode { path: PathBuf, index: usize, detail: String },
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("frame pack at {path}: {detail}")]
    Pack { path: PathBuf, detail: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub trait FrameSource: Send + Sync {
    fn probe(&self, path: &Path) -> Result<VideoRef, FrameError>;

    /// Writes frame `index` of `video` as an image file at `output`.
    fn extract(&self, video: &VideoRef, index: usize, output: &Path) -> Result<(), FrameError>;
}

/// Runs external probe and extract commands. Templates are split like a
/// shell would, then `{input}`, `{frame_index}` and `{output}` are substituted
/// inside each word.
#[derive(Debug, Clone)]
pub struct CommandFrameSource {
    pub probe_command: String,
    pub extract_command: String,
}

impl Default for CommandFrameSource {
    fn default() -> Self {
        CommandFrameSource {
            probe_command: DEFAULT_PROBE_COMMAND.into(),
            extract_command: DEFAULT_EXTRACT_COMMAND.into(),
        }
    }
}

fn expand(template: &str, vars: &[(&str, &str)]) -> Result<Vec<String>, String> {
    let words = shlex::split(template).ok_or_else(|| format!("cannot split command template `{template}`"))?;
    if words.is_empty() {
        return Err("empty command template".into());
    }
    Ok(words
        .into_iter()
        .map(|w| vars.iter().fold(w, |w, (k, v)| w.replace(&format!("{{{k}}}"), v)))
        .collect())
}

fn run(words: &[String]) -> Result<Vec<u8>, String> {
    let out = Command::new(&words[0])
        .args(&words[1..])
        .output()
        .map_err(|e| format!("cannot run `{}`: {e}", words[0]))?;
    if !out.status.success() {
        let stderr = String::from_utf8_lossy(&out.stderr);
        return Err(format!("`{}` exited with {}: {}", words[0], out.status, stderr.trim()));
    }
    Ok(out.stdout)
}

// ffprobe's `-of json` layout.
#[derive(Deserialize)]
struct ProbeOutput {
    streams: Vec<ProbeStream>,
}

#[derive(Deserialize)]
struct ProbeStream {
    nb_read_frames: Option<String>,
    nb_frames: Option<String>,
    avg_frame_rate: Option<String>,
    r_frame_rate: Option<String>,
}

fn parse_rate(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((n, d)) => {
            let (n, d): (f64, f64) = (n.trim().parse().ok()?, d.trim().parse().ok()?);
            (d != 0.0).then(|| n / d)
        }
        None => s.trim().parse().ok(),
    }
}

fn parse_probe(stdout: &[u8]) -> Result<(usize, f64), String> {
    let out: ProbeOutput = serde_json::from_slice(stdout).map_err(|e| format!("unreadable probe output: {e}"))?;
    let s = out.streams.first().ok_or("no video stream")?;
    let frames = s
        .nb_read_frames
        .as_deref()
        .or(s.nb_frames.as_deref())
        .and_then(|v| v.trim().parse::<usize>().ok())
        .ok_or("probe reported no frame count")?;
    let fps = s
        .avg_frame_rate
        .as_deref()
        .and_then(parse_rate)
        .filter(|r| *r > 0.0)
        .or_else(|| s.r_frame_rate.as_deref().and_then(parse_rate))
        .filter(|r| *r > 0.0)
        .ok_or("probe reported no frame rate")?;
    if frames == 0 {
        return Err("video has no frames".into());
    }
    Ok((frames, fps))
}

impl FrameSource for CommandFrameSource {
    fn probe(&self, path: &Path) -> Result<VideoRef, FrameError> {
        let err = |detail: String| FrameError::Probe { path: path.into(), detail };
        if !path.is_file() {
            return Err(err("no such file".into()));
        }
        let input = path.to_string_lossy();
        let words = expand(&self.probe_command, &[("input", &input)]).map_err(err)?;
        let stdout = run(&words).map_err(err)?;
        let (frames, fps) = parse_probe(&stdout).map_err(err)?;
        Ok(VideoRef::new(path.into(), frames, fps))
    }

    fn extract(&self, video: &VideoRef, index: usize, output: &Path) -> Result<(), FrameError> {
        let err = |detail: String| FrameError::Extract { path: video.path.clone(), index, detail };
        let input = video.path.to_string_lossy();
        let out = output.to_string_lossy();
        let idx = index.to_string();
        let words = expand(&self.extract_command, &[("input", &input), ("frame_index", &idx), ("output", &out)])
            .map_err(err)?;
        run(&words).map_err(err)?;
        Ok(())
    }
}

/// Renders `.mockvid` descriptors as solid-colour frames.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticFrameSource;

impl FrameSource for SyntheticFrameSource {
    fn probe(&self, path: &Path) -> Result<VideoRef, FrameError> {
        let v = MockVideo::load(path).map_err(|e| FrameError::Probe { path: path.into(), detail: e.to_string() })?;
        Ok(VideoRef::new(path.into(), v.frames, v.fps))
    }

    fn extract(&self, video: &VideoRef, index: usize, output: &Path) -> Result<(), FrameError> {
        let err = |detail: String| FrameError::Extract { path: video.path.clone(), index, detail };
        let v = MockVideo::load(&video.path).map_err(|e| err(e.to_string()))?;
        if index >= v.frames {
            return Err(err(format!("index out of range (video has {} frames)", v.frames)));
        }
        let img = ImageBuffer::from_pixel(v.width, v.height, Rgb(v.frame_color(index)));
        img.save_with_format(output, image::ImageFormat::Png).map_err(|e| err(e.to_string()))
    }
}

/// `.mockvid` paths go to the synthetic source, everything else to the
/// command source.
#[derive(Debug, Clone, Default)]
pub struct DispatchFrameSource {
    pub command: CommandFrameSource,
}

impl DispatchFrameSource {
    fn pick(&self, path: &Path) -> &dyn FrameSource {
        if mockvid::is_mock_video(path) { &SyntheticFrameSource } else { &self.command }
    }
}

impl FrameSource for DispatchFrameSource {
    fn probe(&self, path: &Path) -> Result<VideoRef, FrameError> {
        self.pick(path).probe(path)
    }

    fn extract(&self, video: &VideoRef, index: usize, output: &Path) -> Result<(), FrameError> {
        self.pick(&video.path).extract(video, index, output)
    }
}

fn fit(width: u32, height: u32, max_dim: u32) -> (u32, u32) {
    let longest = width.max(height);
    if longest <= max_dim {
        return (width, height);
    }
    let scale = f64::from(max_dim) / f64::from(longest);
    let w = ((f64::from(width) * scale).round() as u32).clamp(1, max_dim);
    let h = ((f64::from(height) * scale).round() as u32).clamp(1, max_dim);
    (w, h)
}

fn encode(img: DynamicImage, settings: &FrameSettings) -> Result<(FrameImage, u32, u32), String> {
    let (w, h) = fit(img.width(), img.height(), settings.max_dim);
    let img = if (w, h) == (img.width(), img.height()) { img } else { img.resize_exact(w, h, FilterType::Triangle) };
    let mut bytes = Vec::new();
    JpegEncoder::new_with_quality(Cursor::new(&mut bytes), settings.jpeg_quality)
        .encode_image(&img.to_rgb8())
        .map_err(|e| e.to_string())?;
    Ok((FrameImage { format: "jpeg", bytes }, w, h))
}

/// Probes `path`, samples `settings.n` frames uniformly, scales each so its
/// longest side is at most `settings.max_dim` and encodes it as JPEG.
pub fn build_frame_pack(source: &dyn FrameSource, path: &Path, settings: &FrameSettings) -> Result<FramePack, FrameError> {
    let video = source.probe(path)?;
    let indices = sample_indices(video.frame_count, settings.n)?;
    let scratch = tempfile::Builder::new().prefix("dashsim-frames").tempdir()?;
    let mut images = Vec::with_capacity(indices.len());
    let mut dims = (0, 0);
    for &index in &indices {
        let raw = scratch.path().join(format!("raw_{index}.png"));
        source.extract(&video, index, &raw)?;
        let decode_err = |detail: String| FrameError::Decode { path: video.path.clone(), index, detail };
        if !raw.is_file() {
            return Err(decode_err("extractor wrote no image".into()));
        }
        let img = image::open(&raw).map_err(|e| decode_err(e.to_string()))?;
        let (frame, w, h) = encode(img, settings).map_err(decode_err)?;
        dims = (w, h);
        images.push(frame);
    }
    Ok(FramePack { source: video, indices, images, width: dims.0, height: dims.1 })
}

impl FramePack {
    pub fn manifest(&self) -> PackManifest {
        PackManifest {
            source: self.source.path.clone(),
            indices: self.indices.clone(),
            width: self.width,
            height: self.height,
            format: "jpeg".into(),
            frame_count: self.source.frame_count,
            fps: self.source.fps,
        }
    }

    /// Writes `manifest.json` and `frame_<k>.jpg` into `dir`. The directory
    /// appears complete or not at all.
    pub fn persist(&self, dir: &Path) -> Result<(), FrameError> {
        let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent)?;
        let tmp = tempfile::Builder::new().prefix(".frames").tempdir_in(parent)?;
        for (k, img) in self.images.iter().enumerate() {
            fs::write(tmp.path().join(format!("frame_{k}.jpg")), &img.bytes)?;
        }
        crate::fsutil::write_json(&tmp.path().join(MANIFEST), &self.manifest())?;
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        fs::rename(tmp.keep(), dir)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, FrameError> {
        let err = |detail: String| FrameError::Pack { path: dir.into(), detail };
        let text = fs::read_to_string(dir.join(MANIFEST)).map_err(|e| err(format!("{MANIFEST}: {e}")))?;
        let m: PackManifest = serde_json::from_str(&text).map_err(|e| err(format!("{MANIFEST}: {e}")))?;
        if m.format != "jpeg" {
            return Err(err(format!("unsupported format `{}`", m.format)));
        }
        let mut images = Vec::with_capacity(m.indices.len());
        for k in 0..m.indices.len() {
            let bytes = fs::read(dir.join(format!("frame_{k}.jpg"))).map_err(|e| err(format!("frame_{k}.jpg: {e}")))?;
            images.push(FrameImage { format: "jpeg", bytes });
        }
        Ok(FramePack {
            source: VideoRef::new(m.source, m.frame_count, m.fps),
            indices: m.indices,
            images,
            width: m.width,
            height: m.height,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_preserves_aspect() {
        assert_eq!(fit(1280, 720, 512), (512, 288));
        assert_eq!(fit(720, 1280, 512), (288, 512));
        assert_eq!(fit(320, 180, 512), (320, 180));
        assert_eq!(fit(4000, 1, 512), (512, 1));
    }

    #[test]
    fn probe_output_parsing() {
        let out = br#"{"streams":[{"nb_read_frames":"300","avg_frame_rate":"30000/1001"}]}"#;
        let (n, fps) = parse_probe(out).unwrap();
        assert_eq!(n, 300);
        assert!((fps - 29.97).abs() < 0.01);
        assert!(parse_probe(br#"{"streams":[]}"#).is_err());
        assert!(parse_probe(br#"{"streams":[{"nb_frames":"0","r_frame_rate":"25/1"}]}"#).is_err());
    }

    #[test]
    fn template_expansion_keeps_quoted_words() {
        let w = expand(DEFAULT_EXTRACT_COMMAND, &[("input", "a b.mp4"), ("frame_index", "7"), ("output", "o.png")]).unwrap();
        assert!(w.contains(&"a b.mp4".to_string()));
        assert!(w.contains(&"select=eq(n\\,7)".to_string()));
        assert_eq!(w.last().unwrap(), "o.png");
    }
}
