//! Frame sources: numbered frame directories, Y4M and GIF files decoded
//! natively, and any other container through an external `ffmpeg`.
//!
//! Every source is read in two steps, counting frames first and then
//! decoding only the requested indices, so memory stays bounded by N frames.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use image::{AnimationDecoder, RgbImage};
use regex::Regex;

use super::VideoError;

const FRAME_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "gif"];

fn decode_err(path: &Path, reason: impl std::fmt::Display) -> VideoError {
    VideoError::Decode {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

#[derive(Debug)]
pub enum FrameSource {
    Directory(Vec<PathBuf>),
    Y4m(PathBuf),
    Gif(PathBuf),
    External(PathBuf),
}

impl FrameSource {
    pub fn open(path: &Path) -> Result<Self, VideoError> {
        if path.is_dir() {
            return list_frame_dir(path).map(FrameSource::Directory);
        }
        if !path.exists() {
            return Err(decode_err(path, "no such file or directory"));
        }
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        Ok(match ext.as_str() {
            "y4m" => FrameSource::Y4m(path.to_path_buf()),
            "gif" => FrameSource::Gif(path.to_path_buf()),
            _ => FrameSource::External(path.to_path_buf()),
        })
    }

    /// Total number of decodable frames.
    pub fn frame_count(&self, path: &Path) -> Result<usize, VideoError> {
        match self {
            FrameSource::Directory(files) => Ok(files.len()),
            FrameSource::Y4m(p) => y4m_frames(p, &[]).map(|(t, _)| t),
            FrameSource::Gif(p) => gif_frames(p, &[]).map(|(t, _)| t),
            FrameSource::External(p) => ffmpeg_frames(p, &[]).map(|(t, _)| t),
        }
        .map_err(|e| match e {
            VideoError::Decode { reason, .. } => decode_err(path, reason),
            other => other,
        })
    }

    /// Decodes the frames at `indices` (sorted ascending, repeats allowed),
    /// returned in the same order.
    pub fn read(&self, indices: &[usize]) -> Result<Vec<RgbImage>, VideoError> {
        debug_assert!(indices.windows(2).all(|w| w[0] <= w[1]));
        match self {
            FrameSource::Directory(files) => indices
                .iter()
                .map(|&i| {
                    let p = files.get(i).ok_or_else(|| decode_err(&files[0], format!("frame {i} out of range")))?;
                    image::open(p).map(|img| img.to_rgb8()).map_err(|e| decode_err(p, e))
                })
                .collect(),
            FrameSource::Y4m(p) => y4m_frames(p, indices).map(|(_, f)| f),
            FrameSource::Gif(p) => gif_frames(p, indices).map(|(_, f)| f),
            FrameSource::External(p) => ffmpeg_frames(p, indices).map(|(_, f)| f),
        }
    }
}

fn list_frame_dir(dir: &Path) -> Result<Vec<PathBuf>, VideoError> {
    let pattern = Regex::new(r"^frame_\d+\.([A-Za-z]+)$").expect("valid regex");
    let mut files = Vec::new();
    let mut extension: Option<String> = None;
    let entries = std::fs::read_dir(dir).map_err(|e| decode_err(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| decode_err(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(caps) = pattern.captures(name) else { continue };
        let ext = caps[1].to_ascii_lowercase();
        if !FRAME_EXTENSIONS.contains(&ext.as_str()) {
            continue;
        }
        match &extension {
            None => extension = Some(ext),
            Some(seen) if *seen != ext => {
                return Err(decode_err(dir, format!("mixed frame extensions .{seen} and .{ext}")));
            }
            Some(_) => {}
        }
        files.push(entry.path());
    }
    files.sort();
    if files.is_empty() {
        return Err(VideoError::EmptyVideo(dir.to_path_buf()));
    }
    Ok(files)
}

/// Called once per decoded frame `i` in order: if `i` is the next requested
/// index, builds the item and pushes it once per repetition in `indices`.
fn select<T: Clone>(indices: &[usize], i: usize, cursor: &mut usize, out: &mut Vec<T>, make: impl FnOnce() -> T) {
    if *cursor < indices.len() && indices[*cursor] == i {
        let item = make();
        while *cursor < indices.len() && indices[*cursor] == i {
            out.push(item.clone());
            *cursor += 1;
        }
    }
}

fn finish<T>(path: &Path, total: usize, indices: &[usize], out: Vec<T>) -> Result<(usize, Vec<T>), VideoError> {
    if total == 0 {
        return Err(VideoError::EmptyVideo(path.to_path_buf()));
    }
    if out.len() != indices.len() {
        return Err(decode_err(path, format!("requested frame beyond the last of {total}")));
    }
    Ok((total, out))
}

fn y4m_frames(path: &Path, indices: &[usize]) -> Result<(usize, Vec<RgbImage>), VideoError> {
    let file = File::open(path).map_err(|e| decode_err(path, e))?;
    let mut dec = y4m::decode(BufReader::new(file)).map_err(|e| decode_err(path, format!("{e:?}")))?;
    let (w, h) = (dec.get_width(), dec.get_height());
    let cs = dec.get_colorspace();
    let (cw, ch) = match cs {
        y4m::Colorspace::Cmono | y4m::Colorspace::Cmono12 => (0, 0),
        y4m::Colorspace::C422 | y4m::Colorspace::C422p10 | y4m::Colorspace::C422p12 => (w.div_ceil(2), h),
        y4m::Colorspace::C444 | y4m::Colorspace::C444p10 | y4m::Colorspace::C444p12 => (w, h),
        _ => (w.div_ceil(2), h.div_ceil(2)),
    };
    let depth = dec.get_bit_depth();
    let wide = dec.get_bytes_per_sample() == 2;
    let sample = move |plane: &[u8], i: usize| -> f32 {
        if wide {
            let v = u16::from_le_bytes([plane[2 * i], plane[2 * i + 1]]);
            f32::from(v) / ((1u32 << (depth - 8)) as f32)
        } else {
            f32::from(plane[i])
        }
    };
    let (mut total, mut cursor, mut out) = (0usize, 0usize, Vec::new());
    loop {
        let frame = match dec.read_frame() {
            Ok(f) => f,
            Err(y4m::Error::EOF) => break,
            Err(e) => return Err(decode_err(path, format!("frame {total}: {e:?}"))),
        };
        select(indices, total, &mut cursor, &mut out, || {
            let (yp, up, vp) = (frame.get_y_plane(), frame.get_u_plane(), frame.get_v_plane());
            RgbImage::from_fn(w as u32, h as u32, |x, y| {
                let (x, y) = (x as usize, y as usize);
                let luma = sample(yp, y * w + x);
                if cw == 0 {
                    let g = ((luma - 16.0) * 1.164).round().clamp(0.0, 255.0) as u8;
                    return image::Rgb([g, g, g]);
                }
                let ci = (y * ch / h) * cw + x * cw / w;
                yuv_to_rgb(luma, sample(up, ci), sample(vp, ci))
            })
        });
        total += 1;
    }
    finish(path, total, indices, out)
}

/// BT.601 limited-range conversion.
fn yuv_to_rgb(y: f32, u: f32, v: f32) -> image::Rgb<u8> {
    let (c, d, e) = (y - 16.0, u - 128.0, v - 128.0);
    let clamp = |x: f32| x.round().clamp(0.0, 255.0) as u8;
    image::Rgb([
        clamp(1.164 * c + 1.596 * e),
        clamp(1.164 * c - 0.392 * d - 0.813 * e),
        clamp(1.164 * c + 2.017 * d),
    ])
}

fn gif_frames(path: &Path, indices: &[usize]) -> Result<(usize, Vec<RgbImage>), VideoError> {
    let file = File::open(path).map_err(|e| decode_err(path, e))?;
    let dec = image::codecs::gif::GifDecoder::new(BufReader::new(file)).map_err(|e| decode_err(path, e))?;
    let (mut total, mut cursor, mut out) = (0usize, 0usize, Vec::new());
    for frame in dec.into_frames() {
        let frame = frame.map_err(|e| decode_err(path, format!("frame {total}: {e}")))?;
        select(indices, total, &mut cursor, &mut out, || {
            image::DynamicImage::ImageRgba8(frame.into_buffer()).to_rgb8()
        });
        total += 1;
    }
    finish(path, total, indices, out)
}

fn run_tool(path: &Path, cmd: &mut Command) -> Result<std::process::Child, VideoError> {
    let tool = cmd.get_program().to_string_lossy().into_owned();
    cmd.stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| decode_err(path, format!("cannot run {tool} (needed for this container format): {e}")))
}

/// Decodes through `ffmpeg -f rawvideo -pix_fmt rgb24`, streaming frames
/// from the pipe and keeping only the requested ones.
fn ffmpeg_frames(path: &Path, indices: &[usize]) -> Result<(usize, Vec<RgbImage>), VideoError> {
    let (w, h) = ffprobe_dims(path)?;
    let mut child = run_tool(
        path,
        Command::new("ffmpeg")
            .args(["-v", "error", "-nostdin", "-i"])
            .arg(path)
            .args(["-map", "0:v:0", "-vsync", "passthrough", "-f", "rawvideo", "-pix_fmt", "rgb24", "-"]),
    )?;
    let mut stdout = child.stdout.take().expect("stdout is piped");
    let mut buf = vec![0u8; w as usize * h as usize * 3];
    let (mut total, mut cursor, mut out) = (0usize, 0usize, Vec::new());
    loop {
        match stdout.read_exact(&mut buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(decode_err(path, e)),
        }
        select(indices, total, &mut cursor, &mut out, || {
            RgbImage::from_raw(w, h, buf.clone()).expect("buffer sized for frame")
        });
        total += 1;
    }
    let output = child.wait_with_output().map_err(|e| decode_err(path, e))?;
    if !output.status.success() {
        let msg = String::from_utf8_lossy(&output.stderr);
        return Err(decode_err(path, format!("ffmpeg failed: {}", msg.trim())));
    }
    finish(path, total, indices, out)
}

fn ffprobe_dims(path: &Path) -> Result<(u32, u32), VideoError> {
    let child = run_tool(
        path,
        Command::new("ffprobe")
            .args(["-v", "error", "-select_streams", "v:0", "-show_entries", "stream=width,height", "-of", "csv=p=0"])
            .arg(path),
    )?;
    let output = child.wait_with_output().map_err(|e| decode_err(path, e))?;
    let text = String::from_utf8_lossy(&output.stdout);
    if !output.status.success() {
        let msg = String::from_utf8_lossy(&output.stderr);
        return Err(decode_err(path, format!("ffprobe failed: {}", msg.trim())));
    }
    let mut parts = text.trim().split(',').map(|s| s.trim().parse::<u32>());
    match (parts.next(), parts.next()) {
        (Some(Ok(w)), Some(Ok(h))) if w > 0 && h > 0 => Ok((w, h)),
        _ => Err(decode_err(path, format!("no video stream found (ffprobe said {:?})", text.trim()))),
    }
}
