//! Grayscale image representation, PGM I/O, and the blur/low-resolution
//! degradation simulator.
//!
//! Images are stored as `f64` samples in `[0, 1]`, row major. All border
//! handling in this crate is replicate padding, and every degradation is a
//! pure function of its inputs, so outputs are bit-reproducible.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A normalized grayscale raster. Samples are in `[0, 1]`, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl GrayImage {
    /// Build an image from row-major samples, validating the type invariants.
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::Parameter(format!(
                "sample count {} does not match {width}x{height}",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite() || **s < 0.0 || **s > 1.0) {
            return Err(Error::Parameter(format!(
                "sample {bad} outside [0, 1]"
            )));
        }
        Ok(GrayImage { width, height, samples })
    }

    /// Build an image from arbitrary finite values by min–max scaling them
    /// into `[0, 1]`. Used for diagnostic exports of feature planes.
    pub fn from_values_min_max(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Parameter(format!(
                "value count {} does not match {width}x{height}",
                values.len()
            )));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            if !v.is_finite() {
                return Err(Error::Parameter("non-finite value in plane".into()));
            }
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        let span = hi - lo;
        let samples = if span > 0.0 {
            values.iter().map(|v| (v - lo) / span).collect()
        } else {
            vec![0.0; values.len()]
        };
        GrayImage::new(width, height, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Sample at (row, col) without bounds handling.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.samples[row * self.width + col]
    }

    /// Sample at signed coordinates with replicate padding.
    #[inline]
    pub fn at_clamped(&self, row: i64, col: i64) -> f64 {
        let r = row.clamp(0, self.height as i64 - 1) as usize;
        let c = col.clamp(0, self.width as i64 - 1) as usize;
        self.samples[r * self.width + c]
    }
}

/// A normalized convolution kernel: odd support, nonnegative taps, unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if width % 2 == 0 || height % 2 == 0 || width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "kernel dimensions must be odd, got {width}x{height}"
            )));
        }
        if weights.len() != width * height {
            return Err(Error::Parameter(format!(
                "weight count {} does not match {width}x{height}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Parameter("kernel weights must be finite and >= 0".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "kernel weights sum to {sum}, expected 1"
            )));
        }
        Ok(Kernel { width, height, weights })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.width + col]
    }
}

/// Isotropic Gaussian kernel over a `size`x`size` grid, normalized to unit mass.
pub fn gaussian_kernel(sigma: f64, size: usize) -> Result<Kernel> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::Parameter(format!("gaussian sigma must be > 0, got {sigma}")));
    }
    if size == 0 || size % 2 == 0 {
        return Err(Error::Parameter(format!("gaussian size must be odd and > 0, got {size}")));
    }
    let half = (size / 2) as i64;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut weights = Vec::with_capacity(size * size);
    for r in -half..=half {
        for c in -half..=half {
            weights.push((-((r * r + c * c) as f64) * inv).exp());
        }
    }
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Kernel::new(size, size, weights)
}

/// Linear motion kernel: `length` equal taps stepped along the direction
/// `angle_deg` (counterclockwise from the +x axis), centered in an odd square
/// support. Steps advance one cell along the dominant axis, so 0/45/90 degree
/// lines land exactly on rows, diagonals, and columns.
pub fn motion_kernel(length: usize, angle_deg: f64) -> Result<Kernel> {
    if length == 0 {
        return Err(Error::Parameter("motion length must be >= 1".into()));
    }
    let theta = angle_deg.to_radians();
    // Image rows grow downward, so a positive mathematical angle steps up.
    let dx = theta.cos();
    let dy = -theta.sin();
    let dominant = dx.abs().max(dy.abs());

    let mut taps: Vec<(i64, i64)> = Vec::with_capacity(length);
    if length == 1 || dominant == 0.0 {
        taps.push((0, 0));
    } else {
        let sx = dx / dominant;
        let sy = dy / dominant;
        let mid = (length as f64 - 1.0) / 2.0;
        for i in 0..length {
            let t = i as f64 - mid;
            // Round half up so even lengths stay contiguous around center.
            taps.push(((t * sy + 0.5).floor() as i64, (t * sx + 0.5).floor() as i64));
        }
    }

    let extent = taps
        .iter()
        .map(|(r, c)| r.abs().max(c.abs()))
        .max()
        .unwrap_or(0);
    let size = (2 * extent + 1) as usize;
    let half = extent;
    let mut weights = vec![0.0; size * size];
    let tap = 1.0 / taps.len() as f64;
    for (r, c) in &taps {
        weights[((r + half) as usize) * size + (c + half) as usize] += tap;
    }
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Kernel::new(size, size, weights)
}

/// Load a kernel from the plain-text format: first line `height width`,
/// then `height` rows of `width` space-separated weights. Weights within 1%
/// of unit mass are renormalized; anything else is rejected.
pub fn load_kernel(path: &Path) -> Result<Kernel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, "missing header line"))?;
    let mut it = header.split_whitespace();
    let height: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(path, "header field `height` is not a positive integer"))?;
    let width: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(path, "header field `width` is not a positive integer"))?;
    if it.next().is_some() {
        return Err(Error::parse(path, "header has trailing fields beyond `height width`"));
    }

    let mut weights = Vec::with_capacity(width * height);
    for (i, line) in lines.enumerate() {
        if i >= height {
            return Err(Error::parse(path, format!("more than {height} weight rows")));
        }
        for tok in line.split_whitespace() {
            let w: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, format!("weight `{tok}` is not a number")))?;
            if !w.is_finite() || w < 0.0 {
                return Err(Error::parse(path, format!("weight {w} is negative or non-finite")));
            }
            weights.push(w);
        }
        if weights.len() > width * (i + 1) {
            return Err(Error::parse(path, format!("row {} has more than {width} weights", i + 1)));
        }
    }
    if weights.len() != width * height {
        return Err(Error::parse(
            path,
            format!("expected {} weights, found {}", width * height, weights.len()),
        ));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 0.01 {
        return Err(Error::parse(
            path,
            format!("weights sum to {sum}; more than 1% away from unit mass"),
        ));
    }
    for w in &mut weights {
        *w /= sum;
    }
    Kernel::new(width, height, weights)
}

/// Convolve with replicate padding. Output has the input dimensions and is
/// clamped to `[0, 1]`.
pub fn convolve(image: &GrayImage, kernel: &Kernel) -> Result<GrayImage> {
    if kernel.width > 2 * image.width || kernel.height > 2 * image.height {
        return Err(Error::Parameter(format!(
            "kernel {}x{} larger than twice the image extent {}x{}",
            kernel.width, kernel.height, image.width, image.height
        )));
    }
    let kh = kernel.height as i64 / 2;
    let kw = kernel.width as i64 / 2;
    let mut out = Vec::with_capacity(image.samples.len());
    for row in 0..image.height as i64 {
        for col in 0..image.width as i64 {
            let mut acc = 0.0;
            for kr in -kh..=kh {
                for kc in -kw..=kw {
                    let w = kernel.at((kr + kh) as usize, (kc + kw) as usize);
                    // True convolution: the tap at offset (kr, kc) reads the
                    // source mirrored about the center.
                    acc += w * image.at_clamped(row - kr, col - kc);
                }
            }
            out.push(acc.clamp(0.0, 1.0));
        }
    }
    GrayImage::new(image.width, image.height, out)
}

/// One degradation of a clean image: parametric blurs, down/up resolution
/// round trips, or an arbitrary kernel loaded from a file.
#[derive(Debug, Clone, PartialEq)]
pub enum DegradationSpec {
    /// Box-average downsample by `factor`, then bicubic upsample back to the
    /// original dimensions so probe and gallery geometry match.
    LowRes { factor: usize },
    GaussianBlur { sigma: f64, size: usize },
    MotionBlur { length: usize, angle_deg: f64 },
    CustomKernel { source: PathBuf },
}

impl DegradationSpec {
    /// Parse the compact form used in config files and on the command line:
    /// `lowres(2)`, `gaussian(3,7)`, `motion(7,45)`, `kernel(path)`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, args) = match text.find('(') {
            Some(open) if text.ends_with(')') => {
                (&text[..open], &text[open + 1..text.len() - 1])
            }
            _ => {
                return Err(Error::Config(format!(
                    "degradation `{text}` is not of the form name(args)"
                )))
            }
        };
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let bad = |detail: String| Error::Config(format!("degradation `{text}`: {detail}"));
        match name.trim() {
            "lowres" => {
                if parts.len() != 1 {
                    return Err(bad("expected lowres(factor)".into()));
                }
                let factor: usize = parts[0]
                    .parse()
                    .map_err(|_| bad(format!("factor `{}` is not an integer", parts[0])))?;
                if factor < 2 {
                    return Err(bad("factor must be >= 2".into()));
                }
                Ok(DegradationSpec::LowRes { factor })
            }
            "gaussian" => {
                if parts.len() != 2 {
                    return Err(bad("expected gaussian(sigma,size)".into()));
                }
                let sigma: f64 = parts[0]
                    .parse()
                    .map_err(|_| bad(format!("sigma `{}` is not a number", parts[0])))?;
                let size: usize = parts[1]
                    .parse()
                    .map_err(|_| bad(format!("size `{}` is not an integer", parts[1])))?;
                if !sigma.is_finite() || sigma <= 0.0 {
                    return Err(bad("sigma must be > 0".into()));
                }
                if size == 0 || size % 2 == 0 {
                    return Err(bad("size must be odd".into()));
                }
                Ok(DegradationSpec::GaussianBlur { sigma, size })
            }
            "motion" => {
                if parts.len() != 2 {
                    return Err(bad("expected motion(length,angle)".into()));
                }
                let length: usize = parts[0]
                    .parse()
                    .map_err(|_| bad(format!("length `{}` is not an integer", parts[0])))?;
                let angle_deg: f64 = parts[1]
                    .parse()
                    .map_err(|_| bad(format!("angle `{}` is not a number", parts[1])))?;
                if length == 0 {
                    return Err(bad("length must be >= 1".into()));
                }
                Ok(DegradationSpec::MotionBlur { length, angle_deg })
            }
            "kernel" => {
                if args.trim().is_empty() {
                    return Err(bad("expected kernel(path)".into()));
                }
                Ok(DegradationSpec::CustomKernel {
                    source: PathBuf::from(args.trim()),
                })
            }
            other => Err(bad(format!("unknown degradation `{other}`"))),
        }
    }

    /// A comma-free label safe for table rows, file names, and CSV fields.
    pub fn label(&self) -> String {
        match self {
            DegradationSpec::LowRes { factor } => format!("lowres{factor}"),
            DegradationSpec::GaussianBlur { sigma, size } => format!("gaussian_s{sigma}_k{size}"),
            DegradationSpec::MotionBlur { length, angle_deg } => {
                format!("motion_l{length}_a{angle_deg}")
            }
            DegradationSpec::CustomKernel { source } => {
                let stem = source
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "custom".into());
                format!("kernel_{stem}")
            }
        }
    }
}

impl fmt::Display for DegradationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegradationSpec::LowRes { factor } => write!(f, "lowres({factor})"),
            DegradationSpec::GaussianBlur { sigma, size } => write!(f, "gaussian({sigma},{size})"),
            DegradationSpec::MotionBlur { length, angle_deg } => {
                write!(f, "motion({length},{angle_deg})")
            }
            DegradationSpec::CustomKernel { source } => write!(f, "kernel({})", source.display()),
        }
    }
}

/// Apply one degradation. Deterministic: identical inputs give bit-identical
/// outputs.
pub fn degrade(image: &GrayImage, spec: &DegradationSpec) -> Result<GrayImage> {
    match spec {
        DegradationSpec::LowRes { factor } => {
            let small = box_downsample(image, *factor)?;
            bicubic_resize(&small, image.width, image.height)
        }
        DegradationSpec::GaussianBlur { sigma, size } => {
            convolve(image, &gaussian_kernel(*sigma, *size)?)
        }
        DegradationSpec::MotionBlur { length, angle_deg } => {
            convolve(image, &motion_kernel(*length, *angle_deg)?)
        }
        DegradationSpec::CustomKernel { source } => convolve(image, &load_kernel(source)?),
    }
}

/// Downsample by `factor` with box averaging. Trailing rows/columns that do
/// not fill a full `factor`x`factor` block are truncated.
pub fn box_downsample(image: &GrayImage, factor: usize) -> Result<GrayImage> {
    if factor < 2 {
        return Err(Error::Parameter(format!("downsample factor must be >= 2, got {factor}")));
    }
    let out_h = image.height / factor;
    let out_w = image.width / factor;
    if out_h == 0 || out_w == 0 {
        return Err(Error::Parameter(format!(
            "image {}x{} too small for downsample factor {factor}",
            image.width, image.height
        )));
    }
    let norm = 1.0 / (factor * factor) as f64;
    let mut out = Vec::with_capacity(out_w * out_h);
    for br in 0..out_h {
        for bc in 0..out_w {
            let mut acc = 0.0;
            for r in 0..factor {
                for c in 0..factor {
                    acc += image.at(br * factor + r, bc * factor + c);
                }
            }
            out.push((acc * norm).clamp(0.0, 1.0));
        }
    }
    GrayImage::new(out_w, out_h, out)
}

// Keys cubic convolution weight with a = -0.5.
fn cubic_weight(t: f64) -> f64 {
    let a = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Bicubic resample to the given dimensions. Weights are renormalized per
/// axis so constant images are exact fixed points.
pub fn bicubic_resize(image: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Parameter("resize target must be positive".into()));
    }
    let scale_x = image.width as f64 / out_w as f64;
    let scale_y = image.height as f64 / out_h as f64;

    // Per-axis taps: (base index, 4 normalized weights).
    let axis_taps = |out_n: usize, scale: f64| -> Vec<(i64, [f64; 4])> {
        (0..out_n)
            .map(|o| {
                let src = (o as f64 + 0.5) * scale - 0.5;
                let base = src.floor();
                let t = src - base;
                let mut w = [
                    cubic_weight(t + 1.0),
                    cubic_weight(t),
                    cubic_weight(1.0 - t),
                    cubic_weight(2.0 - t),
                ];
                let sum: f64 = w.iter().sum();
                for wi in &mut w {
                    *wi /= sum;
                }
                (base as i64 - 1, w)
            })
            .collect()
    };
    let col_taps = axis_taps(out_w, scale_x);
    let row_taps = axis_taps(out_h, scale_y);

    let mut out = Vec::with_capacity(out_w * out_h);
    for (row_base, rw) in &row_taps {
        for (col_base, cw) in &col_taps {
            // Anchor the combination at the floor cell so constant inputs
            // come back bit-exact.
            let base = image.at_clamped(row_base + 1, col_base + 1);
            let mut acc = 0.0;
            for (i, rwi) in rw.iter().enumerate() {
                let mut line = 0.0;
                for (j, cwj) in cw.iter().enumerate() {
                    line += cwj * (image.at_clamped(row_base + i as i64, col_base + j as i64) - base);
                }
                acc += rwi * line;
            }
            out.push((base + acc).clamp(0.0, 1.0));
        }
    }
    GrayImage::new(out_w, out_h, out)
}

/// Center-crop to the target aspect ratio, then bicubic-resize to exactly
/// `out_w` x `out_h`. Used by the harness `resize` flag to normalize mixed
/// dataset dimensions.
pub fn resize_center_crop(image: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Parameter("resize target must be positive".into()));
    }
    let target_aspect = out_w as f64 / out_h as f64;
    let src_aspect = image.width as f64 / image.height as f64;
    let (crop_w, crop_h) = if src_aspect > target_aspect {
        (((image.height as f64 * target_aspect).round() as usize).max(1), image.height)
    } else {
        (image.width, ((image.width as f64 / target_aspect).round() as usize).max(1))
    };
    let crop_w = crop_w.min(image.width);
    let crop_h = crop_h.min(image.height);
    let x0 = (image.width - crop_w) / 2;
    let y0 = (image.height - crop_h) / 2;
    let mut cropped = Vec::with_capacity(crop_w * crop_h);
    for r in 0..crop_h {
        for c in 0..crop_w {
            cropped.push(image.at(y0 + r, x0 + c));
        }
    }
    let cropped = GrayImage::new(crop_w, crop_h, cropped)?;
    bicubic_resize(&cropped, out_w, out_h)
}

/// Read a binary PGM (P5) file with maxval 255.
pub fn load_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|detail| Error::parse(path, detail))
}

/// Read only the dimensions of a PGM file, without decoding the raster.
pub fn pgm_dimensions(path: &Path) -> Result<(usize, usize)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (width, height, _) = parse_pgm_header(&bytes).map_err(|detail| Error::parse(path, detail))?;
    Ok((width, height))
}

fn parse_pgm_header(bytes: &[u8]) -> std::result::Result<(usize, usize, usize), String> {
    let mut pos = 0usize;

    // Token reader skipping whitespace and `#` comment lines.
    let next_token = |pos: &mut usize| -> std::result::Result<&[u8], String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err("unexpected end of header".into());
        }
        Ok(&bytes[start..*pos])
    };

    let magic = next_token(&mut pos)?;
    if magic != b"P5" {
        return Err(format!(
            "magic `{}` is not binary PGM (P5)",
            String::from_utf8_lossy(magic)
        ));
    }
    let parse_dim = |tok: &[u8], field: &str| -> std::result::Result<usize, String> {
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|v| *v > 0)
            .ok_or_else(|| {
                format!("{field} `{}` is not a positive integer", String::from_utf8_lossy(tok))
            })
    };
    let width = parse_dim(next_token(&mut pos)?, "width")?;
    let height = parse_dim(next_token(&mut pos)?, "height")?;
    let maxval_tok = next_token(&mut pos)?;
    let maxval: u32 = std::str::from_utf8(maxval_tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            format!("maxval `{}` is not an integer", String::from_utf8_lossy(maxval_tok))
        })?;
    if maxval != 255 {
        return Err(format!("maxval {maxval} unsupported; only 255 is accepted"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing whitespace after maxval".into());
    }
    pos += 1;
    Ok((width, height, pos))
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let (width, height, pos) = parse_pgm_header(bytes)?;
    let expected = width * height;
    let data = &bytes[pos..];
    if data.len() < expected {
        return Err(format!(
            "raster truncated: expected {expected} bytes, found {}",
            data.len()
        ));
    }
    let samples = data[..expected].iter().map(|b| *b as f64 / 255.0).collect();
    GrayImage::new(width, height, samples).map_err(|e| e.to_string())
}

/// Write a binary PGM (P5) file with maxval 255. Samples are quantized by
/// `round(sample * 255)` and clamped to `[0, 255]`.
pub fn save_pgm(image: &GrayImage, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(32 + image.samples.len());
    out.extend_from_slice(format!("P5\n{} {}\n255\n", image.width, image.height).as_bytes());
    out.extend(
        image
            .samples
            .iter()
            .map(|s| (s * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{seeded_rng, unit_f64};

    fn random_image(rng: &mut impl rand_core::RngCore, w: usize, h: usize) -> GrayImage {
        let samples = (0..w * h).map(|_| unit_f64(rng)).collect();
        GrayImage::new(w, h, samples).unwrap()
    }

    #[test]
    fn load_pgm_scales_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        std::fs::write(&path, [b"P5\n2 2\n255\n".as_slice(), &[0, 255, 128, 64]].concat()).unwrap();
        let img = load_pgm(&path).unwrap();
        assert_eq!(img.width(), 2);
        assert_eq!(img.height(), 2);
        assert_eq!(img.samples(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn load_pgm_single_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.pgm");
        std::fs::write(&path, [b"P5\n1 1\n255\n".as_slice(), &[255]].concat()).unwrap();
        let img = load_pgm(&path).unwrap();
        assert_eq!((img.width(), img.height()), (1, 1));
        assert_eq!(img.samples(), &[1.0]);
    }

    #[test]
    fn load_pgm_rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let cases: [(&[u8], &str); 4] = [
            (b"P2\n1 1\n255\n0", "magic"),
            (b"P5\n0 1\n255\n", "width"),
            (b"P5\n1 1\n65535\n\0\0", "maxval"),
            (b"P5\n2 2\n255\n\0\0", "truncated"),
        ];
        for (i, (bytes, field)) in cases.iter().enumerate() {
            let path = dir.path().join(format!("bad{i}.pgm"));
            std::fs::write(&path, bytes).unwrap();
            let err = load_pgm(&path).unwrap_err().to_string();
            assert!(err.contains(field), "expected `{field}` in `{err}`");
        }
    }

    #[test]
    fn save_pgm_quantizes() {
        let dir = tempfile::tempdir().unwrap();
        for (v, byte) in [(0.5, 128u8), (0.0, 0u8), (1.0, 255u8)] {
            let path = dir.path().join("q.pgm");
            save_pgm(&GrayImage::new(1, 1, vec![v]).unwrap(), &path).unwrap();
            let bytes = std::fs::read(&path).unwrap();
            assert_eq!(*bytes.last().unwrap(), byte);
        }
    }

    #[test]
    fn pgm_round_trip_is_byte_identical() {
        let mut rng = seeded_rng(11);
        let img = random_image(&mut rng, 16, 16);
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.pgm");
        let p2 = dir.path().join("b.pgm");
        save_pgm(&img, &p1).unwrap();
        let reloaded = load_pgm(&p1).unwrap();
        save_pgm(&reloaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn pgm_load_inverts_save_within_quantization() {
        let mut rng = seeded_rng(12);
        let img = random_image(&mut rng, 8, 8);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        save_pgm(&img, &path).unwrap();
        let reloaded = load_pgm(&path).unwrap();
        for (a, b) in img.samples().iter().zip(reloaded.samples()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn gaussian_kernel_point() {
        let k = gaussian_kernel(1.0, 1).unwrap();
        assert_eq!(k.weights(), &[1.0]);
    }

    #[test]
    fn gaussian_kernel_flat_limit() {
        let k = gaussian_kernel(1e9, 3).unwrap();
        for w in k.weights() {
            assert!((w - 1.0 / 9.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_kernel_matches_direct_formula() {
        let k = gaussian_kernel(3.0, 7).unwrap();
        let sum: f64 = k.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        // Direct evaluation of the formula followed by normalization.
        let mut direct = Vec::new();
        for r in -3i64..=3 {
            for c in -3i64..=3 {
                direct.push((-((r * r + c * c) as f64) / 18.0).exp());
            }
        }
        let ds: f64 = direct.iter().sum();
        assert!((k.at(3, 3) - direct[24] / ds).abs() < 1e-15);
    }

    #[test]
    fn gaussian_kernel_rejects_bad_params() {
        assert!(gaussian_kernel(0.0, 3).is_err());
        assert!(gaussian_kernel(1.0, 4).is_err());
        assert!(gaussian_kernel(1.0, 0).is_err());
    }

    #[test]
    fn motion_kernel_point() {
        for angle in [0.0, 17.0, 90.0, 213.5] {
            let k = motion_kernel(1, angle).unwrap();
            assert_eq!(k.weights(), &[1.0]);
        }
    }

    #[test]
    fn motion_kernel_horizontal() {
        let k = motion_kernel(3, 0.0).unwrap();
        assert_eq!((k.width(), k.height()), (3, 3));
        for c in 0..3 {
            assert!((k.at(1, c) - 1.0 / 3.0).abs() < 1e-12);
            assert_eq!(k.at(0, c), 0.0);
            assert_eq!(k.at(2, c), 0.0);
        }
    }

    #[test]
    fn motion_kernel_even_length_is_contiguous() {
        let k = motion_kernel(4, 0.0).unwrap();
        let mid = k.height() / 2;
        let row: Vec<f64> = (0..k.width()).map(|c| k.at(mid, c)).collect();
        let taps: Vec<usize> = row
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(c, _)| c)
            .collect();
        assert_eq!(taps.len(), 4);
        assert!(taps.windows(2).all(|w| w[1] == w[0] + 1), "gap in {taps:?}");
    }

    #[test]
    fn motion_kernel_diagonal() {
        // 45 degrees: seven equal taps along the anti-diagonal of a 7x7 support.
        let k = motion_kernel(7, 45.0).unwrap();
        assert_eq!((k.width(), k.height()), (7, 7));
        for r in 0..7 {
            for c in 0..7 {
                let expect = if r + c == 6 { 1.0 / 7.0 } else { 0.0 };
                assert!((k.at(r, c) - expect).abs() < 1e-12, "({r},{c})");
            }
        }
    }

    #[test]
    fn convolve_identity_kernel() {
        let mut rng = seeded_rng(13);
        let img = random_image(&mut rng, 6, 5);
        let k = Kernel::new(1, 1, vec![1.0]).unwrap();
        assert_eq!(convolve(&img, &k).unwrap(), img);
    }

    #[test]
    fn convolve_preserves_constants() {
        let img = GrayImage::new(9, 9, vec![0.37; 81]).unwrap();
        let k = gaussian_kernel(1.2, 5).unwrap();
        let out = convolve(&img, &k).unwrap();
        for s in out.samples() {
            assert!((s - 0.37).abs() < 1e-12);
        }
    }

    #[test]
    fn convolve_matches_padded_buffer_oracle() {
        let mut rng = seeded_rng(14);
        let img = random_image(&mut rng, 8, 8);
        let mut w: Vec<f64> = (0..9).map(|_| unit_f64(&mut rng) + 0.01).collect();
        let s: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= s;
        }
        let k = Kernel::new(3, 3, w).unwrap();
        let out = convolve(&img, &k).unwrap();

        // Oracle: materialize a replicate-padded buffer, then run the literal
        // convolution sum.
        let pad = 1i64;
        let pw = 8 + 2 * pad as usize;
        let mut padded = vec![0.0; pw * pw];
        for r in 0..pw {
            for c in 0..pw {
                padded[r * pw + c] = img.at_clamped(r as i64 - pad, c as i64 - pad);
            }
        }
        for r in 0..8usize {
            for c in 0..8usize {
                let mut acc = 0.0;
                for kr in 0..3usize {
                    for kc in 0..3usize {
                        let sr = (r as i64 + pad - (kr as i64 - 1)) as usize;
                        let sc = (c as i64 + pad - (kc as i64 - 1)) as usize;
                        acc += k.at(kr, kc) * padded[sr * pw + sc];
                    }
                }
                assert!((out.at(r, c) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn convolve_rejects_oversized_kernel() {
        let img = GrayImage::new(3, 3, vec![0.5; 9]).unwrap();
        let k = gaussian_kernel(1.0, 7).unwrap();
        assert!(convolve(&img, &k).is_err());
    }

    #[test]
    fn degrade_gaussian_size_one_is_identity() {
        let mut rng = seeded_rng(15);
        let img = random_image(&mut rng, 7, 7);
        let out = degrade(&img, &DegradationSpec::GaussianBlur { sigma: 2.0, size: 1 }).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn degrade_lowres_constant_fixed_point() {
        let img = GrayImage::new(4, 4, vec![0.5; 16]).unwrap();
        let out = degrade(&img, &DegradationSpec::LowRes { factor: 2 }).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn degrade_gaussian_matches_composition() {
        let mut rng = seeded_rng(16);
        let img = random_image(&mut rng, 32, 32);
        let via_degrade =
            degrade(&img, &DegradationSpec::GaussianBlur { sigma: 3.0, size: 7 }).unwrap();
        let direct = convolve(&img, &gaussian_kernel(3.0, 7).unwrap()).unwrap();
        assert_eq!(via_degrade, direct);
    }

    #[test]
    fn degrade_lowres_truncates_remainders() {
        let mut rng = seeded_rng(17);
        let img = random_image(&mut rng, 9, 7);
        let small = box_downsample(&img, 2).unwrap();
        assert_eq!((small.width(), small.height()), (4, 3));
        let out = degrade(&img, &DegradationSpec::LowRes { factor: 2 }).unwrap();
        assert_eq!((out.width(), out.height()), (9, 7));
    }

    #[test]
    fn degrade_is_deterministic() {
        let mut rng = seeded_rng(18);
        let img = random_image(&mut rng, 16, 16);
        let spec = DegradationSpec::MotionBlur { length: 7, angle_deg: 45.0 };
        let a = degrade(&img, &spec).unwrap();
        let b = degrade(&img, &spec).unwrap();
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn kernel_file_parses_and_renormalizes() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("k.txt");
        // Sums to 1.005: within 1% of unit mass, so it is renormalized.
        std::fs::write(&good, "3 3\n0.1 0.1 0.1\n0.1 0.205 0.1\n0.1 0.1 0.1\n").unwrap();
        let k = load_kernel(&good).unwrap();
        assert_eq!((k.height(), k.width()), (3, 3));
        assert!((k.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((k.at(1, 1) - 0.205 / 1.005).abs() < 1e-12);
    }

    #[test]
    fn kernel_file_rejects_bad_contents() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("neg.txt", "1 3\n0.5 -0.1 0.6\n", "negative"),
            ("sum.txt", "1 3\n0.5 0.5 0.5\n", "unit mass"),
            ("even.txt", "2 2\n0.25 0.25\n0.25 0.25\n", "odd"),
            ("short.txt", "3 3\n0.5 0.5\n", "expected 9 weights"),
            ("header.txt", "x 3\n0.5 0.5\n", "height"),
        ];
        for (name, text, needle) in cases {
            let path = dir.path().join(name);
            std::fs::write(&path, text).unwrap();
            let err = load_kernel(&path).unwrap_err().to_string();
            assert!(err.contains(needle), "`{err}` should mention `{needle}`");
        }
    }

    #[test]
    fn degradation_spec_parsing() {
        assert_eq!(
            DegradationSpec::parse("lowres(2)").unwrap(),
            DegradationSpec::LowRes { factor: 2 }
        );
        assert_eq!(
            DegradationSpec::parse("gaussian(3,7)").unwrap(),
            DegradationSpec::GaussianBlur { sigma: 3.0, size: 7 }
        );
        assert_eq!(
            DegradationSpec::parse("motion(7,45)").unwrap(),
            DegradationSpec::MotionBlur { length: 7, angle_deg: 45.0 }
        );
        assert!(DegradationSpec::parse("lowres(1)").is_err());
        assert!(DegradationSpec::parse("sharpen(1)").is_err());
        assert_eq!(DegradationSpec::parse("gaussian(3,7)").unwrap().label(), "gaussian_s3_k7");
    }

    #[test]
    fn bicubic_preserves_constants() {
        let img = GrayImage::new(6, 6, vec![0.5; 36]).unwrap();
        let out = bicubic_resize(&img, 13, 9).unwrap();
        assert!(out.samples().iter().all(|s| *s == 0.5));
    }

    #[test]
    fn resize_center_crop_hits_target() {
        let mut rng = seeded_rng(19);
        let img = random_image(&mut rng, 20, 10);
        let out = resize_center_crop(&img, 8, 8).unwrap();
        assert_eq!((out.width(), out.height()), (8, 8));
    }
}
