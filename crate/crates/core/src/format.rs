//! Chunked binary tensor files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "C2FT"
//! version  u32      FORMAT_VERSION
//! kind     u32 len + UTF-8      e.g. "views", "pointcloud", "checkpoint"
//! meta     u32 len + UTF-8 JSON (may be "{}")
//! count    u32      number of tensors
//! tensor*  u16 name len + UTF-8 name, u32 ndim, u32 dims[ndim],
//!          f32 data, row-major, product(dims) values
//! ```
//!
//! Poses and bounds travel in a JSON sidecar next to the binary file.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    CanonicalView, PointCloud, RgbdImage, ViewId, ViewPose, ViewSet, WorkspaceBounds,
};

pub const MAGIC: &[u8; 4] = b"C2FT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("io error: {0}")]
    Stream(#[from] io::Error),
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("expected a {expected:?} file, found {found:?}")]
    WrongKind { expected: String, found: String },
    #[error("missing tensor {0:?}")]
    MissingTensor(String),
    #[error("tensor {name:?} has shape {got:?}, expected {expected:?}")]
    BadShape { name: String, expected: Vec<usize>, got: Vec<usize> },
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Self {
        let name = name.into();
        assert_eq!(dims.iter().product::<usize>(), data.len(), "tensor {name} data/dims mismatch");
        Self { name, dims, data }
    }

    pub fn from_f64(name: impl Into<String>, dims: Vec<usize>, data: impl IntoIterator<Item = f64>) -> Self {
        Self::new(name, dims, data.into_iter().map(|x| x as f32).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub kind: String,
    pub meta: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

impl TensorFile {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            meta: serde_json::Value::Object(Default::default()),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, tensor: Tensor) {
        self.tensors.push(tensor);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, FormatError> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| FormatError::MissingTensor(name.to_string()))
    }

    pub fn get_shaped(&self, name: &str, dims: &[usize]) -> Result<&Tensor, FormatError> {
        let t = self.get(name)?;
        if t.dims != dims {
            return Err(FormatError::BadShape {
                name: name.into(),
                expected: dims.to_vec(),
                got: t.dims.clone(),
            });
        }
        Ok(t)
    }

    pub fn expect_kind(&self, kind: &str) -> Result<(), FormatError> {
        if self.kind != kind {
            return Err(FormatError::WrongKind {
                expected: kind.into(),
                found: self.kind.clone(),
            });
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), FormatError> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        write_str32(w, &self.kind)?;
        write_str32(w, &serde_json::to_string(&self.meta)?)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            let name = t.name.as_bytes();
            let len = u16::try_from(name.len()).map_err(|_| FormatError::Malformed("tensor name too long".into()))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&(t.dims.len() as u32).to_le_bytes())?;
            for d in &t.dims {
                w.write_all(&(*d as u32).to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(t.data.len() * 4);
            for x in &t.data {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, FormatError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let kind = read_str32(r)?;
        let meta = serde_json::from_str(&read_str32(r)?)?;
        let count = read_u32(r)? as usize;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let mut len = [0u8; 2];
            r.read_exact(&mut len)?;
            let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| FormatError::Malformed(e.to_string()))?;
            let ndim = read_u32(r)? as usize;
            if ndim > 8 {
                return Err(FormatError::Malformed(format!("tensor {name} has {ndim} dims")));
            }
            let dims = (0..ndim).map(|_| read_u32(r).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            let n: usize = dims.iter().product();
            let mut bytes = vec![0u8; n * 4];
            r.read_exact(&mut bytes)?;
            let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            tensors.push(Tensor { name, dims, data });
        }
        Ok(Self { kind, meta, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        let file = File::create(path).map_err(|source| FormatError::Io { path: path.into(), source })?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush().map_err(|source| FormatError::Io { path: path.into(), source })?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let file = File::open(path).map_err(|source| FormatError::Io { path: path.into(), source })?;
        Self::read_from(&mut BufReader::new(file))
    }

    /// Read only the kind string of a file.
    pub fn peek_kind(path: &Path) -> Result<String, FormatError> {
        let file = File::open(path).map_err(|source| FormatError::Io { path: path.into(), source })?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        read_str32(&mut r)
    }
}

fn write_str32<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, FormatError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str32<R: Read>(r: &mut R) -> Result<String, FormatError> {
    let n = read_u32(r)? as usize;
    if n > 1 << 28 {
        return Err(FormatError::Malformed(format!("string of {n} bytes")));
    }
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| FormatError::Malformed(e.to_string()))
}

/// Path of the JSON sidecar for a binary file: `x.c2f` -> `x.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn point_cloud_to_file(cloud: &PointCloud) -> TensorFile {
    let n = cloud.len();
    let mut f = TensorFile::new("pointcloud");
    f.push(Tensor::from_f64("points", vec![n, 3], cloud.points.iter().flat_map(|p| [p.x, p.y, p.z])));
    f.push(Tensor::from_f64("colors", vec![n, 3], cloud.colors.iter().flatten().copied()));
    f.push(Tensor::from_f64("valid", vec![n], cloud.valid.iter().map(|v| f64::from(u8::from(*v)))));
    f
}

pub fn point_cloud_from_file(f: &TensorFile) -> Result<PointCloud, FormatError> {
    f.expect_kind("pointcloud")?;
    let valid = f.get("valid")?;
    let n = valid.data.len();
    let points = f.get_shaped("points", &[n, 3])?;
    let colors = f.get_shaped("colors", &[n, 3])?;
    let mut cloud = PointCloud::with_capacity(n);
    for i in 0..n {
        let p = &points.data[3 * i..3 * i + 3];
        let c = &colors.data[3 * i..3 * i + 3];
        cloud.push(
            Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64),
            [c[0] as f64, c[1] as f64, c[2] as f64],
            valid.data[i] != 0.0,
        );
    }
    Ok(cloud)
}

/// JSON sidecar for a views file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewsSidecar {
    pub version: u32,
    pub bounds: WorkspaceBounds,
    pub resolution: usize,
    pub poses: Vec<ViewPose>,
}

pub fn views_to_file(views: &ViewSet) -> (TensorFile, ViewsSidecar) {
    let r = views.resolution();
    let mut f = TensorFile::new("views");
    for view in views.iter() {
        let name = view.id().name();
        f.push(Tensor::from_f64(format!("{name}.rgb"), vec![r, r, 3], view.rgb.iter().flatten().copied()));
        f.push(Tensor::from_f64(format!("{name}.depth"), vec![r, r], view.depth.iter().copied()));
        f.push(Tensor::from_f64(format!("{name}.world_xyz"), vec![r, r, 3], view.world_xyz.iter().flatten().copied()));
        f.push(Tensor::from_f64(
            format!("{name}.occupancy"),
            vec![r, r],
            view.occupancy.iter().map(|o| f64::from(u8::from(*o))),
        ));
    }
    let sidecar = ViewsSidecar {
        version: FORMAT_VERSION,
        bounds: views.bounds(),
        resolution: r,
        poses: views.poses().to_vec(),
    };
    (f, sidecar)
}

pub fn views_from_file(f: &TensorFile, sidecar: &ViewsSidecar) -> Result<ViewSet, FormatError> {
    f.expect_kind("views")?;
    let r = sidecar.resolution;
    if sidecar.poses.len() != 3 {
        return Err(FormatError::Malformed(format!("{} poses in sidecar", sidecar.poses.len())));
    }
    let read = |id: ViewId| -> Result<CanonicalView, FormatError> {
        let name = id.name();
        let pose = *sidecar
            .poses
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| FormatError::Malformed(format!("no pose for {name}")))?;
        let rgb = f.get_shaped(&format!("{name}.rgb"), &[r, r, 3])?;
        let depth = f.get_shaped(&format!("{name}.depth"), &[r, r])?;
        let xyz = f.get_shaped(&format!("{name}.world_xyz"), &[r, r, 3])?;
        let occ = f.get_shaped(&format!("{name}.occupancy"), &[r, r])?;
        let triples = |d: &[f32]| d.chunks_exact(3).map(|c| [c[0] as f64, c[1] as f64, c[2] as f64]).collect();
        Ok(CanonicalView {
            pose,
            rgb: triples(&rgb.data),
            depth: depth.data.iter().map(|x| *x as f64).collect(),
            world_xyz: triples(&xyz.data),
            occupancy: occ.data.iter().map(|x| *x != 0.0).collect(),
        })
    };
    Ok(ViewSet {
        views: [read(ViewId::Front)?, read(ViewId::Left)?, read(ViewId::Top)?],
    })
}

/// Write a views file and its sidecar.
pub fn save_views(views: &ViewSet, path: &Path) -> Result<(), FormatError> {
    let (f, sidecar) = views_to_file(views);
    f.save(path)?;
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_vec_pretty(&sidecar)?).map_err(|source| FormatError::Io { path: side, source })
}

pub fn load_views(path: &Path) -> Result<ViewSet, FormatError> {
    let f = TensorFile::load(path)?;
    let side = sidecar_path(path);
    let bytes = std::fs::read(&side).map_err(|source| FormatError::Io { path: side, source })?;
    views_from_file(&f, &serde_json::from_slice(&bytes)?)
}

/// Stack RGB-D frames of one camera into `[T, H, W, 3]` and `[T, H, W]` tensors.
pub fn rgbd_frames_to_tensors(prefix: &str, frames: &[&RgbdImage]) -> Vec<Tensor> {
    let (w, h) = frames.first().map(|f| (f.width, f.height)).unwrap_or((0, 0));
    let t = frames.len();
    vec![
        Tensor::from_f64(format!("{prefix}.rgb"), vec![t, h, w, 3], frames.iter().flat_map(|f| f.rgb.iter().flatten().copied())),
        Tensor::from_f64(format!("{prefix}.depth"), vec![t, h, w], frames.iter().flat_map(|f| f.depth.iter().copied())),
    ]
}

pub fn rgbd_frames_from_tensors(f: &TensorFile, prefix: &str) -> Result<Vec<RgbdImage>, FormatError> {
    let rgb = f.get(&format!("{prefix}.rgb"))?;
    if rgb.dims.len() != 4 || rgb.dims[3] != 3 {
        return Err(FormatError::BadShape {
            name: format!("{prefix}.rgb"),
            expected: vec![0, 0, 0, 3],
            got: rgb.dims.clone(),
        });
    }
    let (t, h, w) = (rgb.dims[0], rgb.dims[1], rgb.dims[2]);
    let depth = f.get_shaped(&format!("{prefix}.depth"), &[t, h, w])?;
    let n = h * w;
    Ok((0..t)
        .map(|k| RgbdImage {
            width: w,
            height: h,
            rgb: rgb.data[3 * n * k..3 * n * (k + 1)]
                .chunks_exact(3)
                .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
                .collect(),
            depth: depth.data[n * k..n * (k + 1)].iter().map(|d| *d as f64).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project_canonical;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn tensor_file_roundtrip(
            kind in "[a-z]{1,12}",
            tensors in proptest::collection::vec(
                ("[a-z.]{1,10}", proptest::collection::vec(-1e6f32..1e6, 0..40)),
                0..5,
            )
        ) {
            let mut f = TensorFile::new(kind);
            f.meta = serde_json::json!({"k": 1});
            for (name, data) in tensors {
                let n = data.len();
                f.push(Tensor::new(name, vec![n], data));
            }
            let mut buf = Vec::new();
            f.write_to(&mut buf).unwrap();
            let back = TensorFile::read_from(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back, f);
        }
    }

    #[test]
    fn header_layout_is_little_endian() {
        let mut f = TensorFile::new("x");
        f.push(Tensor::new("a", vec![1], vec![1.0]));
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"C2FT");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[buf.len() - 4..], &1.0f32.to_le_bytes());
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        assert!(matches!(TensorFile::read_from(&mut &b"NOPE\x01\0\0\0"[..]), Err(FormatError::BadMagic(_))));
        assert!(matches!(
            TensorFile::read_from(&mut &b"C2FT\x09\0\0\0"[..]),
            Err(FormatError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn views_roundtrip_through_disk() {
        let b = WorkspaceBounds::default();
        let cloud = PointCloud::from_points(
            vec![Vector3::new(0.0, 0.0, 0.1), Vector3::new(0.25, -0.125, 0.5)],
            vec![[1.0, 0.5, 0.0], [0.0, 0.25, 1.0]],
        );
        let views = project_canonical(&cloud, &b, 16).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.c2f");
        save_views(&views, &path).unwrap();
        let back = load_views(&path).unwrap();
        for (a, b) in views.iter().zip(back.iter()) {
            assert_eq!(a.pose, b.pose);
            assert_eq!(a.occupancy, b.occupancy);
            assert_eq!(a.rgb, b.rgb);
        }
        assert_eq!(TensorFile::peek_kind(&path).unwrap(), "views");
    }

    #[test]
    fn point_cloud_roundtrip() {
        let mut cloud = PointCloud::from_points(vec![Vector3::new(0.5, -0.25, 1.0)], vec![[0.5; 3]]);
        cloud.push(Vector3::repeat(f64::NAN), [0.0; 3], false);
        let back = point_cloud_from_file(&point_cloud_to_file(&cloud)).unwrap();
        assert_eq!(back.valid, cloud.valid);
        assert_eq!(back.points[0], cloud.points[0]);
    }
}
