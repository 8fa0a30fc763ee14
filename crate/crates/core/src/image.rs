//! 8-bit RGB image buffer, bilinear resampling and PPM/PGM I/O.
//!
//! Pixel `(x, y)` is column `x`, row `y`; row 0 is the top of the image.
//! Resampling is pixel-center aligned: destination pixel `i` maps to source
//! coordinate `(i + 0.5) * src / dst - 0.5`, clamped to the valid range.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::shape(width * height * 3, data.len()));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// One channel as a row-major `f64` plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(3).map(|&v| v as f64).collect()
    }

    /// Channel-mean grayscale plane.
    pub fn gray(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0)
            .collect()
    }

    /// Bilinear sample at continuous pixel coordinates; coordinates outside
    /// the pixel-center hull replicate the border.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> [f64; 3] {
        let xf = x.clamp(0.0, (self.width - 1) as f64);
        let yf = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xf.floor() as usize;
        let y0 = yf.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = xf - x0 as f64;
        let ty = yf - y0 as f64;
        let row0 = y0 * self.width;
        let row1 = y1 * self.width;
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            let p00 = self.data[(row0 + x0) * 3 + c] as f64;
            let p10 = self.data[(row0 + x1) * 3 + c] as f64;
            let p01 = self.data[(row1 + x0) * 3 + c] as f64;
            let p11 = self.data[(row1 + x1) * 3 + c] as f64;
            let top = p00 + (p10 - p00) * tx;
            let bottom = p01 + (p11 - p01) * tx;
            *o = top + (bottom - top) * ty;
        }
        out
    }

    /// Bilinear samples on the grid `xs × ys`, identical to calling
    /// [`sample`](Self::sample) per point but with the column taps shared.
    pub(crate) fn sample_grid(&self, xs: &[f64], ys: &[f64]) -> RgbImage {
        let taps = |v: f64, len: usize| {
            let f = v.clamp(0.0, (len - 1) as f64);
            let i0 = f.floor() as usize;
            (i0, (i0 + 1).min(len - 1), f - i0 as f64)
        };
        let cols: Vec<(usize, usize, f64)> = xs.iter().map(|&x| taps(x, self.width)).collect();
        let mut data = Vec::with_capacity(xs.len() * ys.len() * 3);
        for &y in ys {
            let (y0, y1, ty) = taps(y, self.height);
            let (row0, row1) = (y0 * self.width, y1 * self.width);
            for &(x0, x1, tx) in &cols {
                for c in 0..3 {
                    let p00 = self.data[(row0 + x0) * 3 + c] as f64;
                    let p10 = self.data[(row0 + x1) * 3 + c] as f64;
                    let p01 = self.data[(row1 + x0) * 3 + c] as f64;
                    let p11 = self.data[(row1 + x1) * 3 + c] as f64;
                    let top = p00 + (p10 - p00) * tx;
                    let bottom = p01 + (p11 - p01) * tx;
                    data.push(to_u8(top + (bottom - top) * ty));
                }
            }
        }
        RgbImage {
            width: xs.len(),
            height: ys.len(),
            data,
        }
    }

    /// Resamples to `out_w × out_h`, separably per axis: bilinear where the
    /// axis is enlarged, area averaging where it is shrunk (no aliasing).
    pub fn resize(&self, out_w: usize, out_h: usize) -> RgbImage {
        if (out_w, out_h) == (self.width, self.height) {
            return self.clone();
        }
        let wx = axis_weights(self.width, out_w);
        let wy = axis_weights(self.height, out_h);
        // Horizontal pass into f64 rows, then vertical pass.
        let mut tmp = vec![0.0f64; out_w * self.height * 3];
        for y in 0..self.height {
            let src = &self.data[y * self.width * 3..(y + 1) * self.width * 3];
            for (i, taps) in wx.iter().enumerate() {
                let o = &mut tmp[(y * out_w + i) * 3..(y * out_w + i) * 3 + 3];
                for &(k, w) in taps {
                    for c in 0..3 {
                        o[c] += w * src[k * 3 + c] as f64;
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(out_w * out_h * 3);
        for taps in &wy {
            for i in 0..out_w {
                let mut acc = [0.0; 3];
                for &(k, w) in taps {
                    let p = &tmp[(k * out_w + i) * 3..(k * out_w + i) * 3 + 3];
                    for c in 0..3 {
                        acc[c] += w * p[c];
                    }
                }
                out.extend(to_rgb8(acc));
            }
        }
        RgbImage {
            width: out_w,
            height: out_h,
            data: out,
        }
    }

    /// Nearest-pixel crop; `x0 + w` and `y0 + h` must lie inside the image.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }

    /// Rotates about the image center by `degrees` counter-clockwise, keeping
    /// the original dimensions; corners are filled by border replication.
    pub fn rotate(&self, degrees: f64) -> RgbImage {
        if degrees.rem_euclid(360.0) == 0.0 {
            return self.clone();
        }
        let (s, c) = degrees.to_radians().sin_cos();
        let cx = (self.width as f64 - 1.0) / 2.0;
        let cy = (self.height as f64 - 1.0) / 2.0;
        RgbImage::from_fn(self.width, self.height, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            // Image rows grow downward, so a CCW turn on screen uses (c, -s; s, c)
            // applied to (dx, -dy).
            let sx = c * dx - s * dy;
            let sy = s * dx + c * dy;
            to_rgb8(self.sample(cx + sx, cy + sy))
        })
    }

    /// Reads a binary PPM (P6) or PGM (P5) file; gray input is replicated to
    /// three channels.
    pub fn read_pnm(path: impl AsRef<Path>) -> Result<RgbImage> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        decode_pnm(&bytes).map_err(|reason| Error::format(path, reason))
    }

    /// Writes a binary PPM (P6).
    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::with_capacity(self.data.len() + 32);
        write!(out, "P6\n{} {}\n255\n", self.width, self.height).expect("vec write");
        out.extend_from_slice(&self.data);
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Writes the channel-mean grayscale as a binary PGM (P5).
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::with_capacity(self.width * self.height + 32);
        write!(out, "P5\n{} {}\n255\n", self.width, self.height).expect("vec write");
        out.extend(self.gray().into_iter().map(|g| g.round() as u8));
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Source taps `(index, weight)` for every output position along one axis.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            if dst >= src {
                let x = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let x0 = x.floor() as usize;
                let x1 = (x0 + 1).min(src - 1);
                let t = x - x0 as f64;
                if t == 0.0 {
                    vec![(x0, 1.0)]
                } else {
                    vec![(x0, 1.0 - t), (x1, t)]
                }
            } else {
                let (a, b) = (i as f64 * scale, (i + 1) as f64 * scale);
                (a.floor() as usize..(b.ceil() as usize).min(src))
                    .map(|k| (k, ((k + 1) as f64).min(b) - (k as f64).max(a)))
                    .filter(|&(_, w)| w > 0.0)
                    .map(|(k, w)| (k, w / scale))
                    .collect()
            }
        })
        .collect()
}

#[inline]
pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[inline]
pub(crate) fn to_rgb8(v: [f64; 3]) -> [u8; 3] {
    [to_u8(v[0]), to_u8(v[1]), to_u8(v[2])]
}

fn decode_pnm(bytes: &[u8]) -> std::result::Result<RgbImage, String> {
    let mut pos = 0usize;
    let next_token = |pos: &mut usize| -> std::result::Result<String, String> {
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
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = next_token(&mut pos)?;
    let channels = match magic.as_str() {
        "P6" => 3,
        "P5" => 1,
        other => return Err(format!("unsupported magic {other:?}, expected P6 or P5")),
    };
    let parse = |s: String, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what}: {s:?}"));
    let width = parse(next_token(&mut pos)?, "width")?;
    let height = parse(next_token(&mut pos)?, "height")?;
    let maxval = parse(next_token(&mut pos)?, "maxval")?;
    if maxval != 255 {
        return Err(format!("only 8-bit images are supported, maxval = {maxval}"));
    }
    if width == 0 || height == 0 {
        return Err("empty image".into());
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let need = width * height * channels;
    let body = bytes
        .get(pos..pos + need)
        .ok_or_else(|| format!("raster truncated: need {need} bytes"))?;
    let data = if channels == 3 {
        body.to_vec()
    } else {
        body.iter().flat_map(|&g| [g, g, g]).collect()
    };
    Ok(RgbImage { width, height, data })
}
