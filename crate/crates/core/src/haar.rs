//! Haar rectangle filters and integral-image evaluation.
//!
//! A filter is a multiset of 2-4 signed rectangles (at least one of each
//! sign) on one color channel; its value is the signed sum of pixel values,
//! optionally passed through an absolute value. Evaluation costs four table
//! lookups per rectangle and is exact for integer pixels.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{mix_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    pub x: u16,
    pub y: u16,
    pub w: u16,
    pub h: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HaarFilter {
    /// Signed rectangles in canonical (sorted) order. Sign is +1 or -1.
    pub rects: Vec<(Rect, i8)>,
    pub channel: u16,
    pub absolute: bool,
}

impl HaarFilter {
    pub fn new(mut rects: Vec<(Rect, i8)>, channel: u16, absolute: bool) -> Result<Self> {
        if !(2..=4).contains(&rects.len()) {
            return Err(Error::InvalidArgument(format!(
                "filters hold 2..=4 rectangles, got {}",
                rects.len()
            )));
        }
        if !rects.iter().any(|&(_, s)| s > 0) || !rects.iter().any(|&(_, s)| s < 0) {
            return Err(Error::InvalidArgument(
                "filters need at least one +1 and one -1 rectangle".into(),
            ));
        }
        if rects.iter().any(|&(_, s)| s != 1 && s != -1) {
            return Err(Error::InvalidArgument("rectangle signs must be +1 or -1".into()));
        }
        rects.sort();
        Ok(HaarFilter { rects, channel, absolute })
    }

    pub fn fits(&self, height: usize, width: usize, channels: usize) -> bool {
        (self.channel as usize) < channels
            && self.rects.iter().all(|(r, _)| {
                r.w >= 1 && r.h >= 1 && (r.x + r.w) as usize <= width && (r.y + r.h) as usize <= height
            })
    }
}

/// Per-channel 2-d prefix-sum table with 64-bit accumulators; entry
/// `(y, x)` of a plane holds the sum of all pixels above and left.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// channel-major planes of (h+1) x (w+1)
    table: Vec<i64>,
}

impl IntegralImage {
    /// Builds from raw `(y, x, c)`-interleaved bytes.
    pub fn from_raw(raw: &[u8], height: usize, width: usize, channels: usize) -> Self {
        assert_eq!(raw.len(), height * width * channels);
        let stride = width + 1;
        let plane = (height + 1) * stride;
        let mut table = vec![0i64; plane * channels];
        for c in 0..channels {
            let t = &mut table[c * plane..(c + 1) * plane];
            for y in 0..height {
                let mut row = 0i64;
                for x in 0..width {
                    row += raw[(y * width + x) * channels + c] as i64;
                    t[(y + 1) * stride + x + 1] = t[y * stride + x + 1] + row;
                }
            }
        }
        IntegralImage { height, width, channels, table }
    }

    /// Sum of the pixels inside `rect` on `channel`.
    #[inline]
    pub fn rect_sum(&self, rect: Rect, channel: usize) -> i64 {
        let stride = self.width + 1;
        let plane = (self.height + 1) * stride;
        let t = &self.table[channel * plane..(channel + 1) * plane];
        let (x0, y0) = (rect.x as usize, rect.y as usize);
        let (x1, y1) = (x0 + rect.w as usize, y0 + rect.h as usize);
        t[y1 * stride + x1] - t[y0 * stride + x1] - t[y1 * stride + x0] + t[y0 * stride + x0]
    }
}

/// Signed rectangle-sum difference; absolute value applied when the filter
/// asks for it.
pub fn eval_filter(ii: &IntegralImage, f: &HaarFilter) -> Result<f64> {
    if !f.fits(ii.height, ii.width, ii.channels) {
        return Err(Error::FilterOutOfBounds(format!(
            "{:?} on {}x{}x{}",
            f, ii.height, ii.width, ii.channels
        )));
    }
    let mut sum = 0i64;
    for &(rect, sign) in &f.rects {
        sum += sign as i64 * ii.rect_sum(rect, f.channel as usize);
    }
    Ok(if f.absolute { sum.abs() as f64 } else { sum as f64 })
}

/// Integral images for a whole dataset, built once and shared.
#[derive(Debug, Clone)]
pub struct IntegralSet {
    pub images: Vec<IntegralImage>,
}

impl IntegralSet {
    pub fn from_dataset(data: &Dataset) -> Self {
        let (h, w, c) = data.image_shape();
        IntegralSet {
            images: (0..data.len())
                .map(|i| IntegralImage::from_raw(data.raw_image(i), h, w, c))
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Filter bank generation
// ---------------------------------------------------------------------------

/// A sampled set of filters plus the geometry it was sampled for.
#[derive(Debug, Clone)]
pub struct FilterBank {
    pub filters: Vec<HaarFilter>,
    pub image_size: (usize, usize),
    pub channels: usize,
    pub min_rect: usize,
    pub seed: u64,
}

impl FilterBank {
    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }
}

/// All rectangles with both sides >= `min_rect` inside an image, in a fixed
/// enumeration order.
pub fn enumerate_rects(height: usize, width: usize, min_rect: usize) -> Vec<Rect> {
    let mut rects = Vec::new();
    for rh in min_rect..=height {
        for rw in min_rect..=width {
            for y in 0..=(height - rh) {
                for x in 0..=(width - rw) {
                    rects.push(Rect {
                        x: x as u16,
                        y: y as u16,
                        w: rw as u16,
                        h: rh as u16,
                    });
                }
            }
        }
    }
    rects
}

fn multichoose(n: u128, k: u128) -> u128 {
    // C(n + k - 1, k) for small k
    let mut num = 1u128;
    for i in 0..k {
        num = num.saturating_mul(n + k - 1 - i);
    }
    let mut den = 1u128;
    for i in 1..=k {
        den *= i;
    }
    num / den
}

/// Distinct valid filter geometries (signed-rectangle multisets with both
/// signs present) per rectangle count, given `r` placeable rectangles.
fn geometry_counts(r: u128) -> [u128; 3] {
    let mut counts = [0u128; 3];
    for (i, k) in (2u128..=4).enumerate() {
        let all = multichoose(2 * r, k);
        let same_sign = 2 * multichoose(r, k);
        counts[i] = all.saturating_sub(same_sign);
    }
    counts
}

/// Samples `target_count` filters (uniform without replacement over the
/// valid geometry space) for a single channel. Each sampled geometry is
/// emitted in both its plain and absolute-value versions, so `target_count`
/// must be even. Deterministic given `seed`.
pub fn generate_filter_bank(
    image_size: (usize, usize),
    min_rect: usize,
    channels: usize,
    target_count: usize,
    seed: u64,
) -> Result<FilterBank> {
    let (height, width) = image_size;
    if min_rect < 1 || target_count < 1 || channels < 1 {
        return Err(Error::InvalidArgument(
            "min_rect, channels and target_count must be >= 1".into(),
        ));
    }
    if target_count % 2 != 0 {
        return Err(Error::InvalidArgument(
            "target_count must be even: each geometry carries a plain and an absolute version".into(),
        ));
    }
    if min_rect > height || min_rect > width {
        return Err(Error::FilterSpaceExhausted { requested: target_count as u64, available: 0 });
    }
    let rects = enumerate_rects(height, width, min_rect);
    let r = rects.len() as u128;
    let counts = geometry_counts(r);
    let total: u128 = counts.iter().sum();
    let geometries = (target_count / 2) as u128;
    if geometries > total {
        return Err(Error::FilterSpaceExhausted {
            requested: target_count as u64,
            available: (2 * total).min(u64::MAX as u128) as u64,
        });
    }

    let mut rng = Rng::new(mix_seed(seed, 0x4AA2));
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    let mut filters = Vec::with_capacity(target_count);
    while seen.len() < geometries as usize {
        let draw = uniform_u128(&mut rng, total);
        let k = if draw < counts[0] {
            2
        } else if draw < counts[0] + counts[1] {
            3
        } else {
            4
        };
        // uniform multiset of k signed rects; reject single-sign draws
        let items = loop {
            let items = sample_multiset(&mut rng, 2 * rects.len(), k);
            let has_pos = items.iter().any(|&i| i % 2 == 0);
            let has_neg = items.iter().any(|&i| i % 2 == 1);
            if has_pos && has_neg {
                break items;
            }
        };
        let key: Vec<u32> = items.iter().map(|&i| i as u32).collect();
        if !seen.insert(key) {
            continue;
        }
        let signed: Vec<(Rect, i8)> = items
            .iter()
            .map(|&i| (rects[i / 2], if i % 2 == 0 { 1 } else { -1 }))
            .collect();
        for absolute in [false, true] {
            filters.push(HaarFilter::new(signed.clone(), 0, absolute)?);
        }
    }
    Ok(FilterBank {
        filters,
        image_size,
        channels,
        min_rect,
        seed,
    })
}

/// Replicates every filter across color channels ("effective" bank). Channel
/// variants of each filter are adjacent.
pub fn expand_channels(bank: &FilterBank) -> Vec<HaarFilter> {
    let mut out = Vec::with_capacity(bank.filters.len() * bank.channels);
    for f in &bank.filters {
        for ch in 0..bank.channels {
            let mut g = f.clone();
            g.channel = ch as u16;
            out.push(g);
        }
    }
    out
}

fn uniform_u128(rng: &mut Rng, n: u128) -> u128 {
    debug_assert!(n > 0);
    let limit = u128::MAX - (u128::MAX % n);
    loop {
        let v = ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128;
        if v < limit {
            return v % n;
        }
    }
}

/// Uniform multiset of size k from [0, n), via the combination bijection;
/// returned sorted.
fn sample_multiset(rng: &mut Rng, n: usize, k: usize) -> Vec<usize> {
    let m = n + k - 1;
    let mut picks = Vec::with_capacity(k);
    while picks.len() < k {
        let v = rng.below(m as u64) as usize;
        if !picks.contains(&v) {
            picks.push(v);
        }
    }
    picks.sort_unstable();
    picks.iter().enumerate().map(|(i, &v)| v - i).collect()
}

// ---------------------------------------------------------------------------
// Textual serialization (see docs/formats.md)
// ---------------------------------------------------------------------------

pub fn bank_to_string(bank: &FilterBank) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "BLHB v1");
    let _ = writeln!(s, "image {} {} {}", bank.image_size.0, bank.image_size.1, bank.channels);
    let _ = writeln!(s, "min_rect {}", bank.min_rect);
    let _ = writeln!(s, "seed {}", bank.seed);
    let _ = writeln!(s, "count {}", bank.filters.len());
    for f in &bank.filters {
        let _ = write!(s, "filter {} {} {}", f.channel, f.absolute as u8, f.rects.len());
        for (r, sign) in &f.rects {
            let _ = write!(s, " {} {} {} {} {}", r.x, r.y, r.w, r.h, sign);
        }
        let _ = writeln!(s);
    }
    s
}

pub fn bank_from_string(text: &str) -> Result<FilterBank> {
    let bad = |reason: &str| Error::format("BLHB", reason);
    let mut lines = text.lines();
    if lines.next() != Some("BLHB v1") {
        return Err(bad("missing BLHB v1 header"));
    }
    let mut image_size = (0usize, 0usize);
    let mut channels = 0usize;
    let mut min_rect = 0usize;
    let mut seed = 0u64;
    let mut count = 0usize;
    for _ in 0..4 {
        let line = lines.next().ok_or_else(|| bad("truncated header"))?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("image") => {
                image_size.0 = parse(parts.next(), "image height")?;
                image_size.1 = parse(parts.next(), "image width")?;
                channels = parse(parts.next(), "image channels")?;
            }
            Some("min_rect") => min_rect = parse(parts.next(), "min_rect")?,
            Some("seed") => seed = parse(parts.next(), "seed")?,
            Some("count") => count = parse(parts.next(), "count")?,
            other => return Err(bad(&format!("unexpected header field {other:?}"))),
        }
    }
    let mut filters = Vec::with_capacity(count);
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        if parts.next() != Some("filter") {
            return Err(bad("expected a filter line"));
        }
        let channel: u16 = parse(parts.next(), "channel")?;
        let absolute: u8 = parse(parts.next(), "absolute flag")?;
        let k: usize = parse(parts.next(), "rect count")?;
        let mut rects = Vec::with_capacity(k);
        for _ in 0..k {
            let x = parse(parts.next(), "rect x")?;
            let y = parse(parts.next(), "rect y")?;
            let w = parse(parts.next(), "rect w")?;
            let h = parse(parts.next(), "rect h")?;
            let sign: i8 = parse(parts.next(), "rect sign")?;
            rects.push((Rect { x, y, w, h }, sign));
        }
        filters.push(HaarFilter::new(rects, channel, absolute == 1)?);
    }
    if filters.len() != count {
        return Err(bad(&format!("header says {count} filters, found {}", filters.len())));
    }
    Ok(FilterBank { filters, image_size, channels, min_rect, seed })
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::format("BLHB", format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::format("BLHB", format!("unparseable {what}")))
}

pub fn save_bank_file(path: &Path, bank: &FilterBank) -> Result<()> {
    std::fs::write(path, bank_to_string(bank)).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_bank_file(path: &Path) -> Result<FilterBank> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    bank_from_string(&text)
}
