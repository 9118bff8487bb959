//! PNG + JSON sidecar persistence. Probability rasters are 16-bit grayscale
//! (value / 65535); label rasters are 8-bit indexed with a 4-entry palette.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BBox, ClassRaster, GridFrame, LabelRaster, RasterClass, RasterError};
use crate::geo::LocalProjection;

pub const CRS: &str = "EPSG:4326";
const LABEL_CLASS: &str = "label";

const PALETTE: [u8; 12] = [
    0, 0, 0, // background
    230, 230, 230, // sidewalk
    255, 200, 0, // crossing
    220, 30, 60, // corner bulb
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub class: String,
    pub width: usize,
    pub height: usize,
    pub bbox: BBox,
    pub crs: String,
}

/// `foo.png` -> `foo.json`.
pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("json")
}

fn format_err(path: &Path, reason: impl ToString) -> RasterError {
    RasterError::Format {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RasterError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = BufWriter::new(File::create(&tmp)?);
        f.write_all(bytes)?;
        f.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_sidecar(png: &Path, sc: &Sidecar) -> Result<(), RasterError> {
    let json = serde_json::to_vec_pretty(sc).map_err(|e| format_err(png, e))?;
    write_atomic(&sidecar_path(png), &json)
}

fn read_sidecar(png: &Path) -> Result<Sidecar, RasterError> {
    let p = sidecar_path(png);
    let text = match std::fs::read_to_string(&p) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(RasterError::MissingSidecar(p.display().to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let sc: Sidecar = serde_json::from_str(&text).map_err(|e| format_err(&p, e))?;
    if sc.crs != CRS {
        return Err(format_err(&p, format!("unsupported crs {}", sc.crs)));
    }
    Ok(sc)
}

fn encode(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    palette: Option<&[u8]>,
    data: &[u8],
) -> Result<(), RasterError> {
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(depth);
        if let Some(p) = palette {
            enc.set_palette(p.to_vec());
        }
        let mut w = enc.write_header().map_err(|e| format_err(path, e))?;
        w.write_image_data(data).map_err(|e| format_err(path, e))?;
        w.finish().map_err(|e| format_err(path, e))?;
    }
    write_atomic(path, &buf)
}

fn decode(path: &Path) -> Result<(png::OutputInfo, Vec<u8>), RasterError> {
    let f = BufReader::new(File::open(path)?);
    let mut dec = png::Decoder::new(f);
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut reader = dec.read_info().map_err(|e| format_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| format_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| format_err(path, e))?;
    buf.truncate(info.buffer_size());
    Ok((info, buf))
}

pub fn write_class_raster(path: &Path, r: &ClassRaster) -> Result<(), RasterError> {
    let bbox = r.bbox.ok_or(RasterError::NoBounds)?;
    let mut data = Vec::with_capacity(r.values.len() * 2);
    for &v in &r.values {
        let q = (v.clamp(0.0, 1.0) as f64 * 65535.0).round() as u16;
        data.extend_from_slice(&q.to_be_bytes());
    }
    encode(
        path,
        r.width(),
        r.height(),
        png::ColorType::Grayscale,
        png::BitDepth::Sixteen,
        None,
        &data,
    )?;
    write_sidecar(
        path,
        &Sidecar {
            class: r.class.name().to_string(),
            width: r.width(),
            height: r.height(),
            bbox,
            crs: CRS.to_string(),
        },
    )
}

/// Reads a probability raster; the pixel frame is recovered from the sidecar
/// bounds through `proj`.
pub fn read_class_raster(path: &Path, proj: &LocalProjection) -> Result<ClassRaster, RasterError> {
    let sc = read_sidecar(path)?;
    let class = RasterClass::parse(&sc.class)?;
    let (info, buf) = decode(path)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(format_err(path, "expected 16-bit grayscale"));
    }
    if (info.width as usize, info.height as usize) != (sc.width, sc.height) {
        return Err(format_err(path, "size disagrees with sidecar"));
    }
    let values = buf
        .chunks_exact(2)
        .map(|c| (u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0) as f32)
        .collect();
    Ok(ClassRaster {
        class,
        frame: GridFrame::from_bbox(&sc.bbox, sc.width, sc.height, proj)?,
        bbox: Some(sc.bbox),
        values,
    })
}

pub fn write_label_raster(path: &Path, r: &LabelRaster) -> Result<(), RasterError> {
    let bbox = r.bbox.ok_or(RasterError::NoBounds)?;
    if let Some(bad) = r
        .values
        .iter()
        .find(|&&v| RasterClass::from_index(v).is_none())
    {
        return Err(format_err(path, format!("label value {bad} out of range")));
    }
    encode(
        path,
        r.width(),
        r.height(),
        png::ColorType::Indexed,
        png::BitDepth::Eight,
        Some(&PALETTE),
        &r.values,
    )?;
    write_sidecar(
        path,
        &Sidecar {
            class: LABEL_CLASS.to_string(),
            width: r.width(),
            height: r.height(),
            bbox,
            crs: CRS.to_string(),
        },
    )
}

pub fn read_label_raster(path: &Path, proj: &LocalProjection) -> Result<LabelRaster, RasterError> {
    let sc = read_sidecar(path)?;
    if sc.class != LABEL_CLASS {
        return Err(format_err(
            path,
            format!("sidecar class {} is not a label raster", sc.class),
        ));
    }
    let (info, buf) = decode(path)?;
    if info.color_type != png::ColorType::Indexed || info.bit_depth != png::BitDepth::Eight {
        return Err(format_err(path, "expected 8-bit indexed"));
    }
    if (info.width as usize, info.height as usize) != (sc.width, sc.height) {
        return Err(format_err(path, "size disagrees with sidecar"));
    }
    if buf.iter().any(|&v| RasterClass::from_index(v).is_none()) {
        return Err(format_err(path, "label value out of range"));
    }
    Ok(LabelRaster {
        frame: GridFrame::from_bbox(&sc.bbox, sc.width, sc.height, proj)?,
        bbox: Some(sc.bbox),
        values: buf,
    })
}
