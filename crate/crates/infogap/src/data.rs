//! Dataset ingestion and test-time perturbation.
//!
//! Images travel in the big-endian IDX container (magic 0x00000803 for
//! images, 0x00000801 for labels), optionally gzip-compressed; pixels are
//! stored as f32 in [0,1]. The perturbation models covariate shift: each
//! image is rotated by a uniform random angle about its center (bilinear
//! interpolation, zero fill) and then shifted by integer offsets with zero
//! padding. Labels never change.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Where a dataset came from; perturbed datasets remember their noise seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Clean,
    Perturbed { seed: u64 },
}

/// Flat row-major image stack with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    /// n * rows * cols pixel values in [0,1].
    pub images: Vec<f32>,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
    pub num_classes: usize,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(
        images: Vec<f32>,
        labels: Vec<u8>,
        rows: usize,
        cols: usize,
        num_classes: usize,
    ) -> Result<Self> {
        if labels.len() * rows * cols != images.len() {
            return Err(Error::config(format!(
                "image buffer holds {} values but {} labels x {}x{} pixels expected",
                images.len(),
                labels.len(),
                rows,
                cols
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| (y as usize) >= num_classes) {
            return Err(Error::config(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(LabeledDataset { images, labels, rows, cols, num_classes, provenance: Provenance::Clean })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Pixels per image.
    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let d = self.dim();
        &self.images[i * d..(i + 1) * d]
    }

    pub fn image_f64(&self, i: usize) -> Vec<f64> {
        self.image(i).iter().map(|&v| v as f64).collect()
    }

    /// New dataset holding the given sample indices, in order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        let d = self.dim();
        let mut images = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset {
            images,
            labels,
            rows: self.rows,
            cols: self.cols,
            num_classes: self.num_classes,
            provenance: self.provenance.clone(),
        }
    }

    /// Empirical label distribution, length `num_classes`.
    pub fn label_frequencies(&self) -> Vec<f64> {
        let mut freq = vec![0.0; self.num_classes];
        for &y in &self.labels {
            freq[y as usize] += 1.0;
        }
        let n = self.len().max(1) as f64;
        for f in &mut freq {
            *f /= n;
        }
        freq
    }
}

/// Parameters of the covariate-shift perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    /// Integer shift per axis drawn from {-max_translation, ..., +max_translation}.
    pub max_translation: i32,
    /// Rotation angle drawn from (-angle_range, angle_range), radians.
    pub angle_range: f64,
    pub rng_seed: u64,
    /// Rotate before translating (the default composition order).
    pub rotate_first: bool,
}

impl Default for PerturbSpec {
    fn default() -> Self {
        PerturbSpec {
            max_translation: 5,
            angle_range: std::f64::consts::FRAC_PI_4,
            rng_seed: 0,
            rotate_first: true,
        }
    }
}

impl PerturbSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_translation < 0 {
            return Err(Error::config("max_translation must be >= 0"));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.angle_range) {
            return Err(Error::config("angle_range must lie in [0, pi]"));
        }
        Ok(())
    }
}

struct ByteReader<'a> {
    path: &'a str,
    bytes: Vec<u8>,
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn format_err(&self, offset: u64, detail: impl Into<String>) -> Error {
        Error::Format { path: self.path.to_string(), offset, detail: detail.into() }
    }

    fn read_u32_be(&mut self, what: &str) -> Result<u32> {
        if self.pos + 4 > self.bytes.len() {
            return Err(self.format_err(
                self.pos as u64,
                format!("truncated while reading {what}: need 4 bytes, {} left", self.bytes.len() - self.pos),
            ));
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Ok(v)
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.format_err(
                self.pos as u64,
                format!(
                    "truncated while reading {what}: need {n} bytes, {} left",
                    self.bytes.len() - self.pos
                ),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.format_err(
                self.pos as u64,
                format!("{} trailing bytes after declared content", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];
const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// Whole file as bytes, transparently gunzipping when the content is gzip.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if raw.len() >= 2 && raw[..2] == GZIP_MAGIC {
        let mut out = Vec::new();
        flate2::read::MultiGzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn write_maybe_gz(path: &Path, bytes: &[u8]) -> Result<()> {
    if path.extension().is_some_and(|e| e == "gz") {
        let file = std::fs::File::create(path)?;
        let mut enc = flate2::write::GzEncoder::new(file, flate2::Compression::default());
        enc.write_all(bytes)?;
        enc.finish()?;
    } else {
        std::fs::write(path, bytes)?;
    }
    Ok(())
}

/// Parses an IDX image/label file pair into a dataset; pixels scaled by 1/255.
pub fn load_idx(image_path: impl AsRef<Path>, label_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let image_path = image_path.as_ref();
    let label_path = label_path.as_ref();

    let img_name = image_path.display().to_string();
    let mut img = ByteReader { path: &img_name, bytes: read_maybe_gz(image_path)?, pos: 0 };
    let magic = img.read_u32_be("image magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(img.format_err(0, format!("bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}")));
    }
    let n = img.read_u32_be("image count")? as usize;
    if n == 0 {
        return Err(img.format_err(4, "empty dataset (image count 0)"));
    }
    let rows = img.read_u32_be("row count")? as usize;
    let cols = img.read_u32_be("column count")? as usize;
    if rows == 0 || cols == 0 {
        return Err(img.format_err(8, format!("degenerate image shape {rows}x{cols}")));
    }
    let pixels = img.take(n * rows * cols, "pixel data")?.to_vec();
    img.expect_end()?;

    let lbl_name = label_path.display().to_string();
    let mut lbl = ByteReader { path: &lbl_name, bytes: read_maybe_gz(label_path)?, pos: 0 };
    let magic = lbl.read_u32_be("label magic")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(lbl.format_err(0, format!("bad label magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}")));
    }
    let n_labels = lbl.read_u32_be("label count")? as usize;
    if n_labels != n {
        return Err(lbl.format_err(4, format!("label count {n_labels} does not match image count {n}")));
    }
    let labels = lbl.take(n_labels, "label data")?.to_vec();
    lbl.expect_end()?;

    let images: Vec<f32> = pixels.into_iter().map(|b| b as f32 / 255.0).collect();
    let num_classes = labels.iter().copied().max().unwrap_or(0) as usize + 1;
    LabeledDataset::new(images, labels, rows, cols, num_classes)
}

/// Writes the dataset back out as an IDX pair (gzip when the path ends in .gz).
/// Pixels quantize to the nearest byte of the 1/255 grid.
pub fn save_idx(
    ds: &LabeledDataset,
    image_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
) -> Result<()> {
    let n = ds.len() as u32;
    let mut img_bytes = Vec::with_capacity(16 + ds.images.len());
    img_bytes.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    img_bytes.extend_from_slice(&n.to_be_bytes());
    img_bytes.extend_from_slice(&(ds.rows as u32).to_be_bytes());
    img_bytes.extend_from_slice(&(ds.cols as u32).to_be_bytes());
    img_bytes.extend(ds.images.iter().map(|&v| (v as f64 * 255.0).round().clamp(0.0, 255.0) as u8));
    write_maybe_gz(image_path.as_ref(), &img_bytes)?;

    let mut lbl_bytes = Vec::with_capacity(8 + ds.labels.len());
    lbl_bytes.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    lbl_bytes.extend_from_slice(&n.to_be_bytes());
    lbl_bytes.extend_from_slice(&ds.labels);
    write_maybe_gz(label_path.as_ref(), &lbl_bytes)
}

/// Disjoint split by a seeded shuffle: `size` samples into the subset, the
/// rest into the remainder. Deterministic in `rng_seed`.
pub fn subsample(ds: &LabeledDataset, size: usize, rng_seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if size > ds.len() {
        return Err(Error::config(format!("subsample size {size} exceeds dataset size {}", ds.len())));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    let mut r = rng::stream(rng_seed);
    for i in (1..idx.len()).rev() {
        let j = r.gen_range(0..=i);
        idx.swap(i, j);
    }
    Ok((ds.select(&idx[..size]), ds.select(&idx[size..])))
}

#[inline]
fn pixel(img: &[f32], rows: usize, cols: usize, r: i64, c: i64) -> f64 {
    if r >= 0 && (r as usize) < rows && c >= 0 && (c as usize) < cols {
        img[r as usize * cols + c as usize] as f64
    } else {
        0.0
    }
}

/// Rotates one image about its center, sampling the source with bilinear
/// interpolation and zero fill outside the frame. Output stays in [0,1].
pub fn rotate_bilinear(img: &[f32], rows: usize, cols: usize, angle: f64) -> Vec<f32> {
    let cr = (rows as f64 - 1.0) / 2.0;
    let cc = (cols as f64 - 1.0) / 2.0;
    let (sin, cos) = angle.sin_cos();
    let mut out = vec![0.0f32; rows * cols];
    for r in 0..rows {
        let dr = r as f64 - cr;
        for c in 0..cols {
            let dc = c as f64 - cc;
            // Inverse map: source point of this output pixel.
            let sr = cr + cos * dr + sin * dc;
            let sc = cc - sin * dr + cos * dc;
            let r0 = sr.floor();
            let c0 = sc.floor();
            let fr = sr - r0;
            let fc = sc - c0;
            let (r0, c0) = (r0 as i64, c0 as i64);
            let v = (1.0 - fr) * (1.0 - fc) * pixel(img, rows, cols, r0, c0)
                + (1.0 - fr) * fc * pixel(img, rows, cols, r0, c0 + 1)
                + fr * (1.0 - fc) * pixel(img, rows, cols, r0 + 1, c0)
                + fr * fc * pixel(img, rows, cols, r0 + 1, c0 + 1);
            out[r * cols + c] = v.clamp(0.0, 1.0) as f32;
        }
    }
    out
}

/// Shifts one image by (dx columns, dy rows) with zero padding.
pub fn translate_zero_pad(img: &[f32], rows: usize, cols: usize, dx: i64, dy: i64) -> Vec<f32> {
    let mut out = vec![0.0f32; rows * cols];
    for r in 0..rows as i64 {
        for c in 0..cols as i64 {
            let v = pixel(img, rows, cols, r - dy, c - dx);
            out[r as usize * cols + c as usize] = v as f32;
        }
    }
    out
}

/// Applies the perturbation to every image. Each image gets its own RNG
/// stream derived from (seed, index), so results do not depend on evaluation
/// order. Draw order per image: angle, dx, dy.
pub fn perturb(ds: &LabeledDataset, spec: &PerturbSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    if ds.rows != ds.cols {
        return Err(Error::config(format!(
            "perturbation requires square images, got {}x{}",
            ds.rows, ds.cols
        )));
    }
    let d = ds.dim();
    let mut images = vec![0.0f32; ds.images.len()];
    for i in 0..ds.len() {
        let mut r = rng::substream(spec.rng_seed, i as u64);
        let angle = r.gen_range(-spec.angle_range..=spec.angle_range);
        let dx = r.gen_range(-(spec.max_translation as i64)..=spec.max_translation as i64);
        let dy = r.gen_range(-(spec.max_translation as i64)..=spec.max_translation as i64);
        let src = ds.image(i);
        let out = if spec.rotate_first {
            let rot = rotate_bilinear(src, ds.rows, ds.cols, angle);
            translate_zero_pad(&rot, ds.rows, ds.cols, dx, dy)
        } else {
            let tr = translate_zero_pad(src, ds.rows, ds.cols, dx, dy);
            rotate_bilinear(&tr, ds.rows, ds.cols, angle)
        };
        images[i * d..(i + 1) * d].copy_from_slice(&out);
    }
    Ok(LabeledDataset {
        images,
        labels: ds.labels.clone(),
        rows: ds.rows,
        cols: ds.cols,
        num_classes: ds.num_classes,
        provenance: Provenance::Perturbed { seed: spec.rng_seed },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    /// Hand-assembled IDX byte pair: n images of the given shape.
    fn idx_bytes(n: u32, rows: u32, cols: u32, pixels: &[u8], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let mut img = Vec::new();
        img.extend_from_slice(&0x0000_0803u32.to_be_bytes());
        img.extend_from_slice(&n.to_be_bytes());
        img.extend_from_slice(&rows.to_be_bytes());
        img.extend_from_slice(&cols.to_be_bytes());
        img.extend_from_slice(pixels);
        let mut lbl = Vec::new();
        lbl.extend_from_slice(&0x0000_0801u32.to_be_bytes());
        lbl.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        lbl.extend_from_slice(labels);
        (img, lbl)
    }

    fn write_pair(dir: &Path, img: &[u8], lbl: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
        let ip = dir.join("images-idx3-ubyte");
        let lp = dir.join("labels-idx1-ubyte");
        std::fs::write(&ip, img).unwrap();
        std::fs::write(&lp, lbl).unwrap();
        (ip, lp)
    }

    #[test]
    fn loads_hand_assembled_fixture() {
        let dir = tempdir().unwrap();
        let mut pixels = vec![0u8; 4 * 28 * 28];
        pixels[0] = 255; // image 0, pixel (0,0) at full intensity
        pixels[784 + 29] = 128;
        let (img, lbl) = idx_bytes(4, 28, 28, &pixels, &[7, 2, 1, 0]);
        let (ip, lp) = write_pair(dir.path(), &img, &lbl);
        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!((ds.rows, ds.cols), (28, 28));
        assert_eq!(ds.labels, vec![7, 2, 1, 0]);
        assert_eq!(ds.image(0)[0], 1.0); // byte 255 scales to exactly 1.0
        assert_eq!(ds.image(1)[29], 128.0 / 255.0);
        assert_eq!(ds.num_classes, 8);
        assert_eq!(ds.provenance, Provenance::Clean);
    }

    #[test]
    fn rejects_empty_dataset() {
        let dir = tempdir().unwrap();
        let (img, lbl) = idx_bytes(0, 28, 28, &[], &[]);
        let (ip, lp) = write_pair(dir.path(), &img, &lbl);
        let err = load_idx(&ip, &lp).unwrap_err();
        match err {
            Error::Format { offset, detail, .. } => {
                assert_eq!(offset, 4);
                assert!(detail.contains("empty dataset"), "detail: {detail}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_magic_truncation_and_count_mismatch() {
        let dir = tempdir().unwrap();
        let (mut img, lbl) = idx_bytes(1, 2, 2, &[1, 2, 3, 4], &[0]);
        img[3] = 0x04; // corrupt magic
        let (ip, lp) = write_pair(dir.path(), &img, &lbl);
        match load_idx(&ip, &lp).unwrap_err() {
            Error::Format { offset, detail, .. } => {
                assert_eq!(offset, 0);
                assert!(detail.contains("magic"));
            }
            other => panic!("{other:?}"),
        }

        let (img, lbl) = idx_bytes(2, 2, 2, &[1, 2, 3, 4], &[0, 1]); // claims 2 images, has 1
        let (ip, lp) = write_pair(dir.path(), &img, &lbl);
        assert!(matches!(load_idx(&ip, &lp).unwrap_err(), Error::Format { .. }));

        let (img, lbl) = idx_bytes(1, 2, 2, &[1, 2, 3, 4], &[0, 1]); // 1 image, 2 labels
        let (ip, lp) = write_pair(dir.path(), &img, &lbl);
        match load_idx(&ip, &lp).unwrap_err() {
            Error::Format { detail, .. } => assert!(detail.contains("does not match")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn save_load_round_trip_gz_and_raw() {
        let dir = tempdir().unwrap();
        // Pixels on the exact 1/255 grid survive the byte round trip.
        let images: Vec<f32> = (0..2 * 9).map(|i| (i * 13 % 256) as f32 / 255.0).collect();
        let ds = LabeledDataset::new(images, vec![3, 1], 3, 3, 4).unwrap();
        for ext in ["", ".gz"] {
            let ip = dir.path().join(format!("img{ext}"));
            let lp = dir.path().join(format!("lbl{ext}"));
            save_idx(&ds, &ip, &lp).unwrap();
            let back = load_idx(&ip, &lp).unwrap();
            assert_eq!(back.images, ds.images);
            assert_eq!(back.labels, ds.labels);
        }
    }

    #[test]
    fn subsample_is_a_deterministic_partition() {
        let images: Vec<f32> = (0..10).flat_map(|i| vec![i as f32 / 255.0; 4]).collect();
        let ds = LabeledDataset::new(images, (0u8..10).collect(), 2, 2, 10).unwrap();

        let (a, b) = subsample(&ds, 4, 9).unwrap();
        assert_eq!((a.len(), b.len()), (4, 6));
        let mut seen: Vec<u8> = a.labels.iter().chain(&b.labels).copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0u8..10).collect::<Vec<_>>()); // disjoint cover

        let (a2, _) = subsample(&ds, 4, 9).unwrap();
        assert_eq!(a.labels, a2.labels);
        assert_eq!(a.images, a2.images);

        let (full, empty) = subsample(&ds, 10, 1).unwrap();
        assert_eq!(full.len(), 10);
        assert!(empty.is_empty());
        let (none, all) = subsample(&ds, 0, 1).unwrap();
        assert!(none.is_empty());
        assert_eq!(all.len(), 10);

        assert!(subsample(&ds, 11, 0).is_err());
    }

    #[test]
    fn identity_perturbation_is_exact() {
        let images: Vec<f32> = (0..3 * 49).map(|i| (i % 200) as f32 / 255.0).collect();
        let ds = LabeledDataset::new(images, vec![0, 1, 2], 7, 7, 3).unwrap();
        let spec = PerturbSpec { max_translation: 0, angle_range: 0.0, rng_seed: 5, rotate_first: true };
        let out = perturb(&ds, &spec).unwrap();
        assert_eq!(out.images, ds.images);
        assert_eq!(out.labels, ds.labels);
        assert_eq!(out.provenance, Provenance::Perturbed { seed: 5 });
    }

    #[test]
    fn translation_moves_bright_pixel() {
        // Single bright pixel at (3, 2): a (dx=5, dy=0) shift lands it at (3, 7).
        let mut img = vec![0.0f32; 121];
        img[3 * 11 + 2] = 1.0;
        let out = translate_zero_pad(&img, 11, 11, 5, 0);
        assert_eq!(out[3 * 11 + 7], 1.0);
        assert_eq!(out.iter().filter(|&&v| v != 0.0).count(), 1); // vacated area zero
    }

    #[test]
    fn quarter_turn_rotation_moves_pixel() {
        // 5x5 frame, bright pixel one row above center rotates onto the row axis.
        let mut img = vec![0.0f32; 25];
        img[1 * 5 + 2] = 1.0;
        let out = rotate_bilinear(&img, 5, 5, std::f64::consts::FRAC_PI_2);
        let hot = out.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(hot.0, 2 * 5 + 1);
        assert!((*hot.1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn perturb_is_reproducible_and_range_preserving() {
        let images: Vec<f32> = (0..5 * 81).map(|i| ((i * 7) % 256) as f32 / 255.0).collect();
        let ds = LabeledDataset::new(images, vec![0, 1, 2, 3, 4], 9, 9, 5).unwrap();
        let spec = PerturbSpec { rng_seed: 77, ..PerturbSpec::default() };
        let a = perturb(&ds, &spec).unwrap();
        let b = perturb(&ds, &spec).unwrap();
        assert_eq!(a.images, b.images);
        assert_eq!(a.labels, ds.labels);
        assert!(a.images.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // A different seed actually moves things.
        let c = perturb(&ds, &PerturbSpec { rng_seed: 78, ..spec }).unwrap();
        assert_ne!(a.images, c.images);
    }
}
