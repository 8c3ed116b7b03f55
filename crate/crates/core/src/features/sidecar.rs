//! Versioned binary sidecar for feature clouds, so matching can be re-run
//! without re-describing.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   4 bytes  "CGFC"
//! version u32      currently 1
//! dim     u32
//! count   u32
//! then per keypoint:
//!   point_id u32, position 3 × f64, saliency f64, values dim × f32
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Descriptor, FeatureCloud, Keypoint};
use crate::error::{Error, Result};
use crate::geometry::Point3;

const MAGIC: [u8; 4] = *b"CGFC";
const VERSION: u32 = 1;

pub fn save_features(features: &FeatureCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(16 + features.len() * (4 + 32 + features.dim() * 4));
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(features.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(features.len() as u32).to_le_bytes());
    for (kp, desc) in features.keypoints().iter().zip(features.descriptors()) {
        buf.extend_from_slice(&(kp.point_id as u32).to_le_bytes());
        for k in 0..3 {
            buf.extend_from_slice(&kp.position[k].to_le_bytes());
        }
        buf.extend_from_slice(&kp.saliency.to_le_bytes());
        for v in &desc.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = Cursor { bytes: &bytes, offset: 0 };

    if cursor.take(4)? != MAGIC {
        return Err(Error::SidecarFormat("bad magic bytes".into()));
    }
    let version = cursor.u32()?;
    if version != VERSION {
        return Err(Error::SidecarFormat(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let dim = cursor.u32()? as usize;
    let count = cursor.u32()? as usize;

    let mut keypoints = Vec::with_capacity(count);
    let mut descriptors = Vec::with_capacity(count);
    for _ in 0..count {
        let point_id = cursor.u32()? as usize;
        let position = Point3::new(cursor.f64()?, cursor.f64()?, cursor.f64()?);
        let saliency = cursor.f64()?;
        let values: Vec<f32> = (0..dim).map(|_| cursor.f32()).collect::<Result<_>>()?;
        keypoints.push(Keypoint {
            point_id,
            position,
            saliency,
        });
        descriptors.push(Descriptor {
            keypoint_id: point_id,
            values,
        });
    }
    if cursor.offset != bytes.len() {
        return Err(Error::SidecarFormat(format!(
            "{} trailing bytes",
            bytes.len() - cursor.offset
        )));
    }

    FeatureCloud::new(keypoints, descriptors, dim)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(Error::SidecarFormat(format!(
                "truncated at byte {}",
                self.offset
            )));
        }
        let out = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{describe, detect_iss, HistogramLayout, IssParams};
    use crate::geometry::compute_resolution;
    use crate::shapes::bumpy_sphere;

    #[test]
    fn roundtrip_preserves_features() {
        let cloud = bumpy_sphere(1500, 6);
        let pr = compute_resolution(&cloud).unwrap();
        let keypoints = detect_iss(&cloud, &IssParams::for_resolution(pr)).unwrap();
        let features = describe(&cloud, &keypoints, 8.0 * pr, HistogramLayout::default()).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.bin");
        save_features(&features, &path).unwrap();
        let back = load_features(&path).unwrap();

        assert_eq!(back.dim(), features.dim());
        assert_eq!(back.len(), features.len());
        for (a, b) in features.descriptors().iter().zip(back.descriptors()) {
            assert_eq!(a.values, b.values);
        }
        for (a, b) in features.keypoints().iter().zip(back.keypoints()) {
            assert_eq!(a.point_id, b.point_id);
            assert_eq!(a.position, b.position);
            assert_eq!(a.saliency, b.saliency);
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.bin");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(load_features(&path), Err(Error::SidecarFormat(_))));

        let cloud = bumpy_sphere(200, 7);
        let pr = compute_resolution(&cloud).unwrap();
        let keypoints = detect_iss(&cloud, &IssParams::for_resolution(pr)).unwrap();
        let features = describe(&cloud, &keypoints, 8.0 * pr, HistogramLayout::default()).unwrap();
        let good = dir.path().join("good.bin");
        save_features(&features, &good).unwrap();
        let mut bytes = std::fs::read(&good).unwrap();
        bytes.truncate(bytes.len() - 3);
        let cut = dir.path().join("cut.bin");
        std::fs::write(&cut, &bytes).unwrap();
        assert!(matches!(load_features(&cut), Err(Error::SidecarFormat(_))));
    }
}
