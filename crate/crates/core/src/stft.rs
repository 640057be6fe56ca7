//! Windowed short-term Fourier transform of an image at the four selected
//! low frequencies of one scale.
//!
//! For a window of scale `W` the response at pixel `x` is
//!
//! ```text
//! F_x(u) = sum over offsets r in [-(W-1)/2, (W-1)/2]^2 of
//!          f(x + r) * w(r) * exp(-j 2 pi u . r)
//! ```
//!
//! with replicate padding at the borders. The exponent uses offsets relative
//! to the window center rather than absolute pixel coordinates. The two
//! conventions differ per pixel by a unit-modulus factor, so magnitudes are
//! identical either way, and the relative form keeps phase-quadrant
//! comparisons consistent under image translation.
//!
//! The Gaussian window and the complex exponential both factor per axis, so
//! the transform is computed as two 1-D passes. Correctness is pinned to the
//! direct double-summation form by the test suite.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// A rectangular raster of arbitrary cell type, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Plane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Parameter(format!(
                "plane data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Plane { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.width + col]
    }

    /// Read with replicate padding.
    #[inline]
    pub fn at_clamped(&self, row: i64, col: i64) -> &T {
        let r = row.clamp(0, self.height as i64 - 1) as usize;
        let c = col.clamp(0, self.width as i64 - 1) as usize;
        &self.data[r * self.width + c]
    }
}

/// Window family parameters for one scale: odd size and Gaussian sigma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub size: usize,
    pub sigma: f64,
}

impl WindowSpec {
    pub fn new(size: usize, sigma: f64) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(Error::Parameter(format!("window size must be odd, got {size}")));
        }
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::Parameter(format!("window sigma must be > 0, got {sigma}")));
        }
        Ok(WindowSpec { size, sigma })
    }

    /// Default window for a scale: sigma = W/6, so three sigma spans the
    /// half-width.
    pub fn for_scale(scale: usize) -> Result<Self> {
        WindowSpec::new(scale, scale as f64 / 6.0)
    }
}

/// Sampled Gaussian window, peak 1, unnormalized. Descriptors only compare
/// responses, so any window normalization cancels.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianWindow {
    spec: WindowSpec,
    /// 1-D factor, length `size`, peak 1 at the center.
    axis: Vec<f64>,
    /// Full `size`x`size` weights, the outer product of `axis` with itself.
    weights: Vec<f64>,
}

impl GaussianWindow {
    pub fn spec(&self) -> WindowSpec {
        self.spec
    }

    pub fn size(&self) -> usize {
        self.spec.size
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.spec.size + col]
    }
}

/// Sample the Gaussian window for a spec.
pub fn gaussian_window(spec: WindowSpec) -> GaussianWindow {
    let half = (spec.size / 2) as i64;
    let inv = 1.0 / (2.0 * spec.sigma * spec.sigma);
    let axis: Vec<f64> = (-half..=half)
        .map(|d| (-((d * d) as f64) * inv).exp())
        .collect();
    let mut weights = Vec::with_capacity(spec.size * spec.size);
    for r in &axis {
        for c in &axis {
            weights.push(r * c);
        }
    }
    GaussianWindow { spec, axis, weights }
}

/// A 2-D frequency in cycles per pixel: `u` along columns, `v` along rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    pub u: f64,
    pub v: f64,
}

impl Frequency {
    pub fn new(u: f64, v: f64) -> Self {
        Frequency { u, v }
    }

    pub fn negated(self) -> Self {
        Frequency { u: -self.u, v: -self.v }
    }
}

/// Number of frequencies per scale.
pub const FREQUENCY_COUNT: usize = 4;

/// The four selected frequencies for a scale `W`: one cycle per window along
/// the two axes and the two diagonals.
pub fn frequency_set(scale: usize) -> [Frequency; FREQUENCY_COUNT] {
    let f = 1.0 / scale as f64;
    [
        Frequency::new(f, 0.0),
        Frequency::new(0.0, f),
        Frequency::new(f, f),
        Frequency::new(f, -f),
    ]
}

/// Quadrant of a complex value under the tie convention `Re >= 0` / `Im >= 0`:
/// 0 for (+,+), 1 for (-,+), 2 for (-,-), 3 for (+,-).
#[inline]
pub fn quadrant(value: Complex64) -> u8 {
    match (value.re >= 0.0, value.im >= 0.0) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

/// Windowed transform of the whole image at one frequency.
///
/// Computed as a horizontal then a vertical 1-D pass; each pass clamps its
/// own coordinate, which is equivalent to clamping both coordinates in the
/// direct double sum.
pub fn stft_plane(image: &GrayImage, window: &GaussianWindow, freq: Frequency) -> Result<Plane<Complex64>> {
    let size = window.size();
    if size > 2 * image.width() || size > 2 * image.height() {
        return Err(Error::Parameter(format!(
            "window size {size} larger than twice the image extent {}x{}",
            image.width(),
            image.height()
        )));
    }
    let half = (size / 2) as i64;
    let tau = std::f64::consts::TAU;
    let taps = |f: f64| -> Vec<Complex64> {
        (-half..=half)
            .map(|o| window.axis[(o + half) as usize] * Complex64::cis(-tau * f * o as f64))
            .collect()
    };
    let kx = taps(freq.u);
    let ky = taps(freq.v);

    let (w, h) = (image.width(), image.height());
    let mut horizontal = vec![Complex64::ZERO; w * h];
    for row in 0..h {
        for col in 0..w as i64 {
            let mut acc = Complex64::ZERO;
            for (i, k) in kx.iter().enumerate() {
                acc += k * image.at_clamped(row as i64, col + i as i64 - half);
            }
            horizontal[row * w + col as usize] = acc;
        }
    }
    let mut out = vec![Complex64::ZERO; w * h];
    for row in 0..h as i64 {
        for col in 0..w {
            let mut acc = Complex64::ZERO;
            for (i, k) in ky.iter().enumerate() {
                let r = (row + i as i64 - half).clamp(0, h as i64 - 1) as usize;
                acc += k * horizontal[r * w + col];
            }
            out[row as usize * w + col] = acc;
        }
    }
    Plane::new(w, h, out)
}

/// The per-frequency complex response planes of one image at one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct StftPlanes {
    scale: usize,
    planes: [Plane<Complex64>; FREQUENCY_COUNT],
}

impl StftPlanes {
    /// Assemble from raw planes; all planes must share dimensions.
    pub fn from_planes(scale: usize, planes: [Plane<Complex64>; FREQUENCY_COUNT]) -> Result<Self> {
        let (w, h) = (planes[0].width(), planes[0].height());
        if planes.iter().any(|p| p.width() != w || p.height() != h) {
            return Err(Error::Parameter("frequency planes must share dimensions".into()));
        }
        Ok(StftPlanes { scale, planes })
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn width(&self) -> usize {
        self.planes[0].width()
    }

    pub fn height(&self) -> usize {
        self.planes[0].height()
    }

    pub fn plane(&self, index: usize) -> &Plane<Complex64> {
        &self.planes[index]
    }

    /// Magnitude plane `M(u_i, x)` for one frequency.
    pub fn magnitude_plane(&self, index: usize) -> Plane<f64> {
        let p = &self.planes[index];
        Plane::new(p.width(), p.height(), p.data().iter().map(|z| z.norm()).collect()).unwrap()
    }

    /// Quadrant plane `Q(u_i, x)` for one frequency.
    pub fn quadrant_plane(&self, index: usize) -> Plane<u8> {
        let p = &self.planes[index];
        Plane::new(p.width(), p.height(), p.data().iter().map(|z| quadrant(*z)).collect()).unwrap()
    }

    pub fn magnitude_planes(&self) -> Vec<Plane<f64>> {
        (0..FREQUENCY_COUNT).map(|i| self.magnitude_plane(i)).collect()
    }

    pub fn quadrant_planes(&self) -> Vec<Plane<u8>> {
        (0..FREQUENCY_COUNT).map(|i| self.quadrant_plane(i)).collect()
    }

    /// Min–max scaled magnitude raster for diagnostic export.
    pub fn magnitude_image(&self, index: usize) -> GrayImage {
        let p = self.magnitude_plane(index);
        GrayImage::from_values_min_max(p.width(), p.height(), p.data()).unwrap()
    }

    /// Min–max scaled phase-angle raster for diagnostic export.
    pub fn phase_image(&self, index: usize) -> GrayImage {
        let p = &self.planes[index];
        let angles: Vec<f64> = p.data().iter().map(|z| z.arg()).collect();
        GrayImage::from_values_min_max(p.width(), p.height(), &angles).unwrap()
    }
}

/// Compute all four frequency planes of an image at one scale, using the
/// scale's default Gaussian window.
pub fn compute_planes(image: &GrayImage, scale: usize) -> Result<StftPlanes> {
    if scale < 3 || scale % 2 == 0 {
        return Err(Error::Parameter(format!("scale must be odd and >= 3, got {scale}")));
    }
    let window = gaussian_window(WindowSpec::for_scale(scale)?);
    let freqs = frequency_set(scale);
    let planes = [
        stft_plane(image, &window, freqs[0])?,
        stft_plane(image, &window, freqs[1])?,
        stft_plane(image, &window, freqs[2])?,
        stft_plane(image, &window, freqs[3])?,
    ];
    StftPlanes::from_planes(scale, planes)
}
