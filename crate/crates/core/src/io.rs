//! Binary tensor and video file formats.
//!
//! Tensor record ("EVTS"): magic bytes `EVTS`, u32 little-endian version = 1,
//! u32 rank, rank x u32 extents, then product(extents) x f32 little-endian
//! row-major values.
//!
//! Video file ("EVTV"): magic bytes `EVTV`, u32 little-endian version = 1,
//! u32 frame_count, followed by frame_count complete tensor records of
//! identical shape.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

const TENSOR_MAGIC: &[u8; 4] = b"EVTS";
const VIDEO_MAGIC: &[u8; 4] = b"EVTV";
const FORMAT_VERSION: u32 = 1;

pub fn write_tensor<W: Write>(w: &mut W, tensor: &DenseTensor) -> Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
    for &extent in tensor.shape() {
        w.write_all(&(extent as u32).to_le_bytes())?;
    }
    for &v in tensor.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<DenseTensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated tensor record".into()))?;
    if &magic != TENSOR_MAGIC {
        return Err(Error::Format(format!("bad tensor magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported tensor version {version}")));
    }
    let rank = read_u32(r)? as usize;
    if rank == 0 || rank > 8 {
        return Err(Error::Format(format!("unreasonable tensor rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(r)? as usize);
    }
    if shape.contains(&0) {
        return Err(Error::Format(format!("zero extent in stored shape {shape:?}")));
    }
    let numel: usize = shape.iter().product();
    let mut values = Vec::with_capacity(numel);
    let mut buf = [0u8; 4];
    for _ in 0..numel {
        r.read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated tensor values".into()))?;
        values.push(f32::from_le_bytes(buf));
    }
    DenseTensor::from_vec(&shape, values)
        .map_err(|e| Error::Format(format!("stored tensor invalid: {e}")))
}

pub fn write_tensor_file<P: AsRef<Path>>(path: P, tensor: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, tensor)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor_file<P: AsRef<Path>>(path: P) -> Result<DenseTensor> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| {
        Error::Format(format!("cannot open tensor file {}: {e}", path.display()))
    })?);
    read_tensor(&mut r)
}

pub fn write_video<W: Write>(w: &mut W, frames: &[DenseTensor]) -> Result<()> {
    if let Some(first) = frames.first() {
        if let Some(bad) = frames.iter().find(|f| f.shape() != first.shape()) {
            return Err(Error::Shape(format!(
                "video frames must share one shape: {:?} vs {:?}",
                first.shape(),
                bad.shape()
            )));
        }
    }
    w.write_all(VIDEO_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(frames.len() as u32).to_le_bytes())?;
    for frame in frames {
        write_tensor(w, frame)?;
    }
    Ok(())
}

pub fn read_video<R: Read>(r: &mut R) -> Result<Vec<DenseTensor>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated video header".into()))?;
    if &magic != VIDEO_MAGIC {
        return Err(Error::Format(format!("bad video magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported video version {version}")));
    }
    let frame_count = read_u32(r)? as usize;
    let mut frames = Vec::with_capacity(frame_count);
    for i in 0..frame_count {
        let frame = read_tensor(r)
            .map_err(|e| Error::Format(format!("frame {i}: {e}")))?;
        if let Some(first) = frames.first() {
            let first: &DenseTensor = first;
            if frame.shape() != first.shape() {
                return Err(Error::Format(format!(
                    "frame {i} shape {:?} differs from frame 0 shape {:?}",
                    frame.shape(),
                    first.shape()
                )));
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

pub fn write_video_file<P: AsRef<Path>>(path: P, frames: &[DenseTensor]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_video(&mut w, frames)?;
    w.flush()?;
    Ok(())
}

pub fn read_video_file<P: AsRef<Path>>(path: P) -> Result<Vec<DenseTensor>> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| {
        Error::Format(format!("cannot open video file {}: {e}", path.display()))
    })?);
    read_video(&mut r)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated u32 field".into()))?;
    Ok(u32::from_le_bytes(buf))
}
