//! Dataset loading and generation.
//!
//! Images are kept as raw bytes (consumed directly by the Haar filters, so
//! integral-image sums stay exact) and converted to `[0, 1]`-scaled tensors
//! for network input. Loaders are byte-exact: load, re-serialize, reload is
//! the identity.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rng::{mix_seed, Rng};
use crate::tensor::Tensor;

pub const MNIST_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const MNIST_LABEL_MAGIC: u32 = 0x0000_0801;

/// Environment variable naming the dataset root directory.
pub const DATA_ROOT_ENV: &str = "BOOSTLAB_DATA";

pub fn dataset_root() -> Option<PathBuf> {
    std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarVariant {
    C10,
    C100,
}

/// A labeled image set with uniform geometry.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    pub num_classes: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    raw: Vec<u8>,
    labels: Vec<u16>,
    /// CIFAR-100 coarse labels, retained so re-serialization is byte-exact.
    coarse: Option<Vec<u8>>,
}

impl Dataset {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        split: Split,
        num_classes: usize,
        (height, width, channels): (usize, usize, usize),
        raw: Vec<u8>,
        labels: Vec<u16>,
        coarse: Option<Vec<u8>>,
    ) -> Result<Self> {
        let px = height * width * channels;
        if px == 0 {
            return Err(Error::InvalidArgument("image extents must be >= 1".into()));
        }
        if raw.len() != labels.len() * px {
            return Err(Error::ShapeMismatch {
                context: "dataset raw buffer".into(),
                expected: format!("{} bytes for {} images", labels.len() * px, labels.len()),
                actual: format!("{}", raw.len()),
            });
        }
        if let Some(l) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {l} out of range for {num_classes} classes"
            )));
        }
        if let Some(c) = &coarse {
            if c.len() != labels.len() {
                return Err(Error::ShapeMismatch {
                    context: "coarse labels".into(),
                    expected: format!("{}", labels.len()),
                    actual: format!("{}", c.len()),
                });
            }
        }
        Ok(Dataset {
            name: name.into(),
            split,
            num_classes,
            height,
            width,
            channels,
            raw,
            labels,
            coarse,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels_usize(&self) -> Vec<usize> {
        self.labels.iter().map(|&l| l as usize).collect()
    }

    /// Raw pixel bytes of image `i`, `(y, x, channel)` interleaved.
    pub fn raw_image(&self, i: usize) -> &[u8] {
        let px = self.height * self.width * self.channels;
        &self.raw[i * px..(i + 1) * px]
    }

    /// Image `i` scaled to `[0, 1]` (value / 255).
    pub fn tensor(&self, i: usize) -> Tensor {
        let data = self.raw_image(i).iter().map(|&b| b as f64 / 255.0).collect();
        Tensor::from_vec(&[self.height, self.width, self.channels], data).expect("raw buffer is shape-consistent")
    }

    pub fn to_tensors(&self) -> Vec<Tensor> {
        (0..self.len()).map(|i| self.tensor(i)).collect()
    }

    /// Per-class example counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

// ---------------------------------------------------------------------------
// IDX (MNIST)
// ---------------------------------------------------------------------------

/// Parses the IDX image/label pair used by the MNIST distribution.
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img_bytes = std::fs::read(images_path).map_err(|e| Error::io(images_path.display().to_string(), e))?;
    let lbl_bytes = std::fs::read(labels_path).map_err(|e| Error::io(labels_path.display().to_string(), e))?;
    load_mnist_bytes(&img_bytes, &lbl_bytes)
}

pub fn load_mnist_bytes(img_bytes: &[u8], lbl_bytes: &[u8]) -> Result<Dataset> {
    if img_bytes.len() < 16 {
        return Err(Error::format("IDX", "image file shorter than its header"));
    }
    let magic = be_u32(&img_bytes[0..4]);
    if magic != MNIST_IMAGE_MAGIC {
        return Err(Error::format("IDX", format!("bad image magic {magic:#010x}")));
    }
    let count = be_u32(&img_bytes[4..8]) as usize;
    let h = be_u32(&img_bytes[8..12]) as usize;
    let w = be_u32(&img_bytes[12..16]) as usize;
    let want = 16 + count * h * w;
    if img_bytes.len() != want {
        return Err(Error::format(
            "IDX",
            format!("image file holds {} bytes, header implies {want}", img_bytes.len()),
        ));
    }

    if lbl_bytes.len() < 8 {
        return Err(Error::format("IDX", "label file shorter than its header"));
    }
    let magic = be_u32(&lbl_bytes[0..4]);
    if magic != MNIST_LABEL_MAGIC {
        return Err(Error::format("IDX", format!("bad label magic {magic:#010x}")));
    }
    let lbl_count = be_u32(&lbl_bytes[4..8]) as usize;
    if lbl_bytes.len() != 8 + lbl_count {
        return Err(Error::format(
            "IDX",
            format!("label file holds {} bytes, header implies {}", lbl_bytes.len(), 8 + lbl_count),
        ));
    }
    if lbl_count != count {
        return Err(Error::format(
            "IDX",
            format!("{count} images but {lbl_count} labels"),
        ));
    }
    let labels: Vec<u16> = lbl_bytes[8..].iter().map(|&b| b as u16).collect();
    Dataset::new(
        "mnist",
        Split::Train,
        10,
        (h, w, 1),
        img_bytes[16..].to_vec(),
        labels,
        None,
    )
}

/// Writes the dataset back out as an IDX image/label pair.
pub fn save_mnist(dataset: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let (img, lbl) = save_mnist_bytes(dataset)?;
    std::fs::write(images_path, img).map_err(|e| Error::io(images_path.display().to_string(), e))?;
    std::fs::write(labels_path, lbl).map_err(|e| Error::io(labels_path.display().to_string(), e))
}

pub fn save_mnist_bytes(dataset: &Dataset) -> Result<(Vec<u8>, Vec<u8>)> {
    if dataset.channels != 1 {
        return Err(Error::InvalidArgument("IDX images are single-channel".into()));
    }
    let mut img = Vec::with_capacity(16 + dataset.raw.len());
    img.extend_from_slice(&MNIST_IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    img.extend_from_slice(&(dataset.height as u32).to_be_bytes());
    img.extend_from_slice(&(dataset.width as u32).to_be_bytes());
    img.extend_from_slice(&dataset.raw);
    let mut lbl = Vec::with_capacity(8 + dataset.len());
    lbl.extend_from_slice(&MNIST_LABEL_MAGIC.to_be_bytes());
    lbl.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    lbl.extend(dataset.labels.iter().map(|&l| l as u8));
    Ok((img, lbl))
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes(b.try_into().unwrap())
}

// ---------------------------------------------------------------------------
// CIFAR binary
// ---------------------------------------------------------------------------

/// Parses CIFAR-10/100 binary batch files (concatenated in path order).
///
/// CIFAR-10 records are `label + 3072` bytes; CIFAR-100 records are
/// `coarse + fine + 3072` bytes (the fine label is used). Pixels arrive
/// channel-major and are stored interleaved.
pub fn load_cifar(paths: &[PathBuf], variant: CifarVariant) -> Result<Dataset> {
    let mut raw = Vec::new();
    let mut labels = Vec::new();
    let mut coarse = Vec::new();
    for path in paths {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        append_cifar_bytes(&bytes, variant, &mut raw, &mut labels, &mut coarse)?;
    }
    let (num_classes, name, coarse) = match variant {
        CifarVariant::C10 => (10, "cifar10", None),
        CifarVariant::C100 => (100, "cifar100", Some(coarse)),
    };
    Dataset::new(name, Split::Train, num_classes, (32, 32, 3), raw, labels, coarse)
}

pub fn load_cifar_bytes(bytes: &[u8], variant: CifarVariant) -> Result<Dataset> {
    let mut raw = Vec::new();
    let mut labels = Vec::new();
    let mut coarse = Vec::new();
    append_cifar_bytes(bytes, variant, &mut raw, &mut labels, &mut coarse)?;
    let (num_classes, name, coarse) = match variant {
        CifarVariant::C10 => (10, "cifar10", None),
        CifarVariant::C100 => (100, "cifar100", Some(coarse)),
    };
    Dataset::new(name, Split::Train, num_classes, (32, 32, 3), raw, labels, coarse)
}

fn append_cifar_bytes(
    bytes: &[u8],
    variant: CifarVariant,
    raw: &mut Vec<u8>,
    labels: &mut Vec<u16>,
    coarse: &mut Vec<u8>,
) -> Result<()> {
    let label_bytes = match variant {
        CifarVariant::C10 => 1,
        CifarVariant::C100 => 2,
    };
    let record = label_bytes + 3072;
    if bytes.is_empty() || bytes.len() % record != 0 {
        return Err(Error::format(
            "CIFAR",
            format!("file length {} is not a multiple of the {record}-byte record", bytes.len()),
        ));
    }
    for rec in bytes.chunks_exact(record) {
        match variant {
            CifarVariant::C10 => labels.push(rec[0] as u16),
            CifarVariant::C100 => {
                coarse.push(rec[0]);
                labels.push(rec[1] as u16);
            }
        }
        let px = &rec[label_bytes..];
        // channel-major (1024 R, 1024 G, 1024 B) -> (y, x, c) interleaved
        for i in 0..1024 {
            raw.push(px[i]);
            raw.push(px[1024 + i]);
            raw.push(px[2048 + i]);
        }
    }
    Ok(())
}

/// Re-serializes a CIFAR dataset into one binary batch, inverse of the loader.
pub fn save_cifar_bytes(dataset: &Dataset) -> Result<Vec<u8>> {
    if dataset.image_shape() != (32, 32, 3) {
        return Err(Error::InvalidArgument("CIFAR images are 32x32x3".into()));
    }
    let mut out = Vec::new();
    for i in 0..dataset.len() {
        if let Some(coarse) = &dataset.coarse {
            out.push(coarse[i]);
        }
        out.push(dataset.labels[i] as u8);
        let img = dataset.raw_image(i);
        for c in 0..3 {
            for p in 0..1024 {
                out.push(img[p * 3 + c]);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Seeded Gaussian class prototypes rendered into images.
///
/// Each class gets a prototype pattern; examples are
/// `128 + separation * 12 * prototype + 20 * noise`, clamped to bytes. At
/// separation 0 the labels carry no signal; at high separation the classes
/// are linearly separable.
pub fn synth_blobs(
    num_classes: usize,
    per_class: usize,
    image_shape: (usize, usize, usize),
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_classes == 0 || per_class == 0 {
        return Err(Error::InvalidArgument("num_classes and per_class must be >= 1".into()));
    }
    let (h, w, c) = image_shape;
    let px = h * w * c;
    let mut proto_rng = Rng::new(mix_seed(seed, 0xB10B));
    let prototypes: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| (0..px).map(|_| proto_rng.normal()).collect())
        .collect();

    let mut raw = Vec::with_capacity(num_classes * per_class * px);
    let mut labels = Vec::with_capacity(num_classes * per_class);
    let mut noise_rng = Rng::new(mix_seed(seed, 0x401E));
    for class in 0..num_classes {
        for _ in 0..per_class {
            for j in 0..px {
                let v = 128.0 + separation * 12.0 * prototypes[class][j] + 20.0 * noise_rng.normal();
                raw.push(v.round().clamp(0.0, 255.0) as u8);
            }
            labels.push(class as u16);
        }
    }
    let mut data = Dataset::new("blobs", Split::Train, num_classes, image_shape, raw, labels, None)?;
    shuffle_in_place(&mut data, mix_seed(seed, 0x5F1E));
    Ok(data)
}

/// Synthetic handwritten-digit stand-in: 10 classes of stroke patterns at
/// 28x28, with per-example anchor jitter, translation, amplitude variation,
/// and pixel noise. Train and test splits share class structure but draw
/// disjoint noise streams.
pub fn synth_digits(per_class: usize, seed: u64, split: Split) -> Result<Dataset> {
    if per_class == 0 {
        return Err(Error::InvalidArgument("per_class must be >= 1".into()));
    }
    const H: usize = 28;
    const W: usize = 28;
    const CLASSES: usize = 10;
    const STROKES: usize = 4;

    // class prototypes: stroke endpoints in a seeded layout, shared by splits
    let mut strokes = Vec::with_capacity(CLASSES);
    let mut proto_rng = Rng::new(mix_seed(seed, 0xD161));
    for _ in 0..CLASSES {
        let class_strokes: Vec<[f64; 4]> = (0..STROKES)
            .map(|_| {
                [
                    proto_rng.uniform_in(5.0, 23.0),
                    proto_rng.uniform_in(5.0, 23.0),
                    proto_rng.uniform_in(5.0, 23.0),
                    proto_rng.uniform_in(5.0, 23.0),
                ]
            })
            .collect();
        strokes.push(class_strokes);
    }

    let split_tag = match split {
        Split::Train => 0x7EA1u64,
        Split::Test => 0x7E57u64,
    };
    let mut raw = Vec::with_capacity(CLASSES * per_class * H * W);
    let mut labels = Vec::with_capacity(CLASSES * per_class);
    let mut field = vec![0.0f64; H * W];
    for class in 0..CLASSES {
        let mut rng = Rng::new(mix_seed(seed, split_tag ^ (0x100 + class as u64)));
        for _ in 0..per_class {
            field.fill(0.0);
            let dx = rng.uniform_in(-2.5, 2.5);
            let dy = rng.uniform_in(-2.5, 2.5);
            let amp = rng.uniform_in(0.65, 1.0);
            for s in &strokes[class] {
                let jit: Vec<f64> = (0..4).map(|_| rng.uniform_in(-1.5, 1.5)).collect();
                let (x0, y0) = (s[0] + jit[0] + dx, s[1] + jit[1] + dy);
                let (x1, y1) = (s[2] + jit[2] + dx, s[3] + jit[3] + dy);
                stamp_stroke(&mut field, W, H, x0, y0, x1, y1, 230.0 * amp);
            }
            for (j, f) in field.iter().enumerate() {
                let noise = 25.0 * rng.normal();
                let v = (f + noise).round().clamp(0.0, 255.0) as u8;
                debug_assert!(j < H * W);
                raw.push(v);
            }
            labels.push(class as u16);
        }
    }
    let mut data = Dataset::new("synth-digits", split, CLASSES, (H, W, 1), raw, labels, None)?;
    shuffle_in_place(&mut data, mix_seed(seed, split_tag ^ 0xFF));
    Ok(data)
}

fn stamp_stroke(field: &mut [f64], w: usize, h: usize, x0: f64, y0: f64, x1: f64, y1: f64, intensity: f64) {
    let steps = (((x1 - x0).abs().max((y1 - y0).abs()) * 2.0).ceil() as usize).max(1);
    for t in 0..=steps {
        let f = t as f64 / steps as f64;
        let cx = x0 + f * (x1 - x0);
        let cy = y0 + f * (y1 - y0);
        let y_lo = (cy - 2.0).floor().max(0.0) as usize;
        let y_hi = ((cy + 2.0).ceil() as usize).min(h - 1);
        let x_lo = (cx - 2.0).floor().max(0.0) as usize;
        let x_hi = ((cx + 2.0).ceil() as usize).min(w - 1);
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                let v = intensity * (-d2 / 1.8).exp();
                let cell = &mut field[y * w + x];
                *cell = cell.max(v);
            }
        }
    }
}

/// Stratified, seeded subset: exactly `per_class` examples of every class,
/// shuffled into a new order.
pub fn subset(dataset: &Dataset, per_class: usize, seed: u64) -> Result<Dataset> {
    let counts = dataset.class_counts();
    for (class, &count) in counts.iter().enumerate() {
        if count < per_class {
            return Err(Error::InvalidArgument(format!(
                "class {class} has {count} examples, {per_class} requested"
            )));
        }
    }
    let mut rng = Rng::new(mix_seed(seed, 0x5B5E7));
    let mut chosen = Vec::with_capacity(per_class * dataset.num_classes);
    for class in 0..dataset.num_classes {
        let mut members: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.label(i) == class).collect();
        rng.shuffle(&mut members);
        chosen.extend_from_slice(&members[..per_class]);
    }
    rng.shuffle(&mut chosen);

    let px = dataset.height * dataset.width * dataset.channels;
    let mut raw = Vec::with_capacity(chosen.len() * px);
    let mut labels = Vec::with_capacity(chosen.len());
    let mut coarse = dataset.coarse.as_ref().map(|_| Vec::with_capacity(chosen.len()));
    for &i in &chosen {
        raw.extend_from_slice(dataset.raw_image(i));
        labels.push(dataset.labels[i]);
        if let (Some(out), Some(src)) = (&mut coarse, &dataset.coarse) {
            out.push(src[i]);
        }
    }
    Dataset::new(
        dataset.name.clone(),
        dataset.split,
        dataset.num_classes,
        dataset.image_shape(),
        raw,
        labels,
        coarse,
    )
}

/// Deterministic stratified split: per class, the first `train_per_class`
/// occurrences (in dataset order) go to the train split, the rest to test.
pub fn split_train_test(dataset: &Dataset, train_per_class: usize) -> Result<(Dataset, Dataset)> {
    let counts = dataset.class_counts();
    for (class, &count) in counts.iter().enumerate() {
        if count <= train_per_class {
            return Err(Error::InvalidArgument(format!(
                "class {class} has {count} examples, cannot reserve {train_per_class} for training and keep a test split"
            )));
        }
    }
    let mut taken = vec![0usize; dataset.num_classes];
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for i in 0..dataset.len() {
        let class = dataset.label(i);
        if taken[class] < train_per_class {
            taken[class] += 1;
            train_idx.push(i);
        } else {
            test_idx.push(i);
        }
    }
    let build = |indices: &[usize], split: Split| -> Result<Dataset> {
        let mut raw = Vec::new();
        let mut labels = Vec::new();
        let mut coarse = dataset.coarse.as_ref().map(|_| Vec::new());
        for &i in indices {
            raw.extend_from_slice(dataset.raw_image(i));
            labels.push(dataset.labels[i]);
            if let (Some(out), Some(src)) = (&mut coarse, &dataset.coarse) {
                out.push(src[i]);
            }
        }
        Dataset::new(
            dataset.name.clone(),
            split,
            dataset.num_classes,
            dataset.image_shape(),
            raw,
            labels,
            coarse,
        )
    };
    Ok((build(&train_idx, Split::Train)?, build(&test_idx, Split::Test)?))
}

fn shuffle_in_place(dataset: &mut Dataset, seed: u64) {
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut order);
    let mut raw = Vec::with_capacity(dataset.raw.len());
    let mut labels = Vec::with_capacity(dataset.labels.len());
    let mut coarse = dataset.coarse.as_ref().map(|_| Vec::with_capacity(dataset.len()));
    for &i in &order {
        raw.extend_from_slice(dataset.raw_image(i));
        labels.push(dataset.labels[i]);
        if let (Some(out), Some(src)) = (&mut coarse, &dataset.coarse) {
            out.push(src[i]);
        }
    }
    dataset.raw = raw;
    dataset.labels = labels;
    dataset.coarse = coarse;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_mnist_bytes(n: usize, h: usize, w: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
        let mut rng = Rng::new(seed);
        let mut img = Vec::new();
        img.extend_from_slice(&MNIST_IMAGE_MAGIC.to_be_bytes());
        img.extend_from_slice(&(n as u32).to_be_bytes());
        img.extend_from_slice(&(h as u32).to_be_bytes());
        img.extend_from_slice(&(w as u32).to_be_bytes());
        for _ in 0..n * h * w {
            img.push(rng.below(256) as u8);
        }
        let mut lbl = Vec::new();
        lbl.extend_from_slice(&MNIST_LABEL_MAGIC.to_be_bytes());
        lbl.extend_from_slice(&(n as u32).to_be_bytes());
        for _ in 0..n {
            lbl.push(rng.below(10) as u8);
        }
        (img, lbl)
    }

    #[test]
    fn mnist_round_trip_is_identity() {
        let (img, lbl) = tiny_mnist_bytes(7, 5, 4, 3);
        let data = load_mnist_bytes(&img, &lbl).unwrap();
        assert_eq!(data.len(), 7);
        assert_eq!(data.image_shape(), (5, 4, 1));
        let (img2, lbl2) = save_mnist_bytes(&data).unwrap();
        assert_eq!(img, img2);
        assert_eq!(lbl, lbl2);
    }

    #[test]
    fn mnist_rejects_corrupt_input() {
        assert!(matches!(load_mnist_bytes(&[], &[]), Err(Error::Format { .. })));
        let (mut img, lbl) = tiny_mnist_bytes(3, 2, 2, 5);
        img[0] = 9;
        assert!(load_mnist_bytes(&img, &lbl).is_err());
        let (img, lbl) = tiny_mnist_bytes(3, 2, 2, 5);
        assert!(load_mnist_bytes(&img[..img.len() - 1], &lbl).is_err());
        // label count mismatch
        let (img, _) = tiny_mnist_bytes(3, 2, 2, 5);
        let (_, lbl) = tiny_mnist_bytes(4, 2, 2, 6);
        assert!(load_mnist_bytes(&img, &lbl).is_err());
    }

    fn tiny_cifar_bytes(n: usize, variant: CifarVariant, seed: u64) -> Vec<u8> {
        let mut rng = Rng::new(seed);
        let mut out = Vec::new();
        for _ in 0..n {
            if matches!(variant, CifarVariant::C100) {
                out.push(rng.below(20) as u8);
                out.push(rng.below(100) as u8);
            } else {
                out.push(rng.below(10) as u8);
            }
            for _ in 0..3072 {
                out.push(rng.below(256) as u8);
            }
        }
        out
    }

    #[test]
    fn cifar_round_trip_is_identity() {
        for variant in [CifarVariant::C10, CifarVariant::C100] {
            let bytes = tiny_cifar_bytes(5, variant, 9);
            let data = load_cifar_bytes(&bytes, variant).unwrap();
            assert_eq!(data.len(), 5);
            assert_eq!(save_cifar_bytes(&data).unwrap(), bytes);
        }
    }

    #[test]
    fn cifar_rejects_truncated_batch() {
        let bytes = tiny_cifar_bytes(2, CifarVariant::C10, 1);
        assert!(load_cifar_bytes(&bytes[..bytes.len() - 10], CifarVariant::C10).is_err());
    }

    #[test]
    fn tensor_scaling_is_value_over_255() {
        let (img, lbl) = tiny_mnist_bytes(2, 3, 3, 7);
        let data = load_mnist_bytes(&img, &lbl).unwrap();
        let t = data.tensor(0);
        for (b, v) in data.raw_image(0).iter().zip(t.iter()) {
            assert_eq!(*v, *b as f64 / 255.0);
        }
    }

    #[test]
    fn blobs_are_deterministic() {
        let a = synth_blobs(3, 10, (4, 4, 1), 2.0, 11).unwrap();
        let b = synth_blobs(3, 10, (4, 4, 1), 2.0, 11).unwrap();
        assert_eq!(a.raw, b.raw);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.class_counts(), vec![10, 10, 10]);
    }

    #[test]
    fn subset_is_stratified_and_exact() {
        let data = synth_blobs(4, 25, (3, 3, 1), 1.0, 2).unwrap();
        let sub = subset(&data, 10, 5).unwrap();
        assert_eq!(sub.len(), 40);
        assert_eq!(sub.class_counts(), vec![10; 4]);
        assert!(subset(&data, 26, 5).is_err());
    }

    #[test]
    fn full_subset_is_a_permutation() {
        let data = synth_blobs(2, 8, (2, 2, 1), 1.0, 3).unwrap();
        let sub = subset(&data, 8, 9).unwrap();
        assert_eq!(sub.len(), data.len());
        let mut orig: Vec<&[u8]> = (0..data.len()).map(|i| data.raw_image(i)).collect();
        let mut got: Vec<&[u8]> = (0..sub.len()).map(|i| sub.raw_image(i)).collect();
        orig.sort();
        got.sort();
        assert_eq!(orig, got);
    }

    #[test]
    fn train_test_split_is_stratified_and_disjoint() {
        let data = synth_blobs(3, 12, (2, 2, 1), 1.0, 4).unwrap();
        let (train, test) = split_train_test(&data, 8).unwrap();
        assert_eq!(train.class_counts(), vec![8; 3]);
        assert_eq!(test.class_counts(), vec![4; 3]);
        assert_eq!(train.len() + test.len(), data.len());
        assert!(split_train_test(&data, 12).is_err());
    }

    #[test]
    fn synth_digits_splits_differ_but_share_structure() {
        let train = synth_digits(5, 3, Split::Train).unwrap();
        let test = synth_digits(5, 3, Split::Test).unwrap();
        assert_eq!(train.len(), 50);
        assert_eq!(test.len(), 50);
        assert_ne!(train.raw, test.raw);
        let again = synth_digits(5, 3, Split::Train).unwrap();
        assert_eq!(train.raw, again.raw);
    }
}
