//! Procedural flat-ground aerial map used to synthesize geo-referenced rasters.
//!
//! The world is a mosaic of parcels (fields with row stripes, forest, villages
//! with regularly spaced roofs, meadows and ponds) separated by soft hedges and
//! crossed by straight roads. Every feature has a fixed physical size, so the
//! image spectrum of a view shifts with the viewing altitude; edges are soft
//! so views stay consistent across sampling rates.

use super::{GeoRaster, Utm};
use crate::image::RgbImage;

#[derive(Debug, Clone, PartialEq)]
pub struct TerrainConfig {
    pub width_px: usize,
    pub height_px: usize,
    /// Meters per pixel.
    pub resolution: f64,
    /// UTM position of the top-left pixel center.
    pub origin: Utm,
    pub seed: u64,
    /// Mean parcel spacing in meters.
    pub parcel_spacing_m: f64,
    /// Period of the crop-row stripes in meters.
    pub stripe_period_m: f64,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        Self {
            width_px: 2048,
            height_px: 2048,
            resolution: 1.0,
            origin: Utm::new(432_000.0, 4_402_000.0),
            seed: 1,
            parcel_spacing_m: 70.0,
            stripe_period_m: 10.0,
        }
    }
}

#[derive(Clone, Copy)]
struct Road {
    px: f64,
    py: f64,
    nx: f64,
    ny: f64,
    half_width: f64,
}

/// Generates the raster described by `cfg`.
pub fn generate(cfg: &TerrainConfig) -> GeoRaster {
    let world = World::new(cfg);
    let res = cfg.resolution;
    let pixels = RgbImage::from_fn(cfg.width_px, cfg.height_px, |x, y| {
        world.color(x as f64 * res, y as f64 * res)
    });
    GeoRaster::new(pixels, cfg.origin, cfg.resolution).expect("terrain config yields a valid raster")
}

struct World {
    seed: u64,
    spacing: f64,
    stripe_period: f64,
    roads: Vec<Road>,
}

#[derive(Clone, Copy)]
enum Land {
    Field,
    Forest,
    Village,
    Meadow,
    Water,
}

const FIELD_COLORS: [[f64; 3]; 6] = [
    [120.0, 140.0, 60.0],
    [165.0, 150.0, 85.0],
    [105.0, 120.0, 50.0],
    [185.0, 165.0, 105.0],
    [90.0, 125.0, 65.0],
    [150.0, 118.0, 82.0],
];
const ROOF_COLORS: [[f64; 3]; 4] = [
    [175.0, 75.0, 62.0],
    [118.0, 118.0, 126.0],
    [205.0, 203.0, 196.0],
    [150.0, 92.0, 70.0],
];

impl World {
    fn new(cfg: &TerrainConfig) -> Self {
        let w = cfg.width_px as f64 * cfg.resolution;
        let h = cfg.height_px as f64 * cfg.resolution;
        let count = (((w + h) / 700.0).round() as usize).max(2);
        let roads = (0..count)
            .map(|i| {
                let u = |salt: u64| unit(hash(i as i64, 0, cfg.seed, 0x50AD + salt));
                // Mostly grid-aligned roads with a few diagonals.
                let angle = if u(3) < 0.7 {
                    (if u(4) < 0.5 { 0.0 } else { 90.0f64 }).to_radians() + (u(5) - 0.5) * 0.15
                } else {
                    u(5) * std::f64::consts::PI
                };
                Road {
                    px: u(1) * w,
                    py: u(2) * h,
                    nx: -angle.sin(),
                    ny: angle.cos(),
                    half_width: 3.0 + 1.5 * u(6),
                }
            })
            .collect();
        Self {
            seed: cfg.seed,
            spacing: cfg.parcel_spacing_m,
            stripe_period: cfg.stripe_period_m,
            roads,
        }
    }

    fn color(&self, wx: f64, wy: f64) -> [u8; 3] {
        let (id, edge) = self.parcel(wx, wy);
        let mut c = self.parcel_color(id, wx, wy);

        let hedge = 32.0 * (-(edge / 2.0).powi(2)).exp();
        for v in c.iter_mut() {
            *v -= hedge;
        }

        for road in &self.roads {
            let d = ((wx - road.px) * road.nx + (wy - road.py) * road.ny).abs();
            let cover = 1.0 - smoothstep(road.half_width - 0.75, road.half_width + 0.75, d);
            if cover > 0.0 {
                let asphalt = [172.0, 168.0, 160.0];
                for (v, a) in c.iter_mut().zip(asphalt) {
                    *v += (a - *v) * cover;
                }
            }
        }

        let shade = 1.0 + 0.10 * value_noise(wx, wy, 280.0, self.seed ^ 0x5AADE);
        [
            crate::image::to_u8(c[0] * shade),
            crate::image::to_u8(c[1] * shade),
            crate::image::to_u8(c[2] * shade),
        ]
    }

    /// Nearest jittered-grid site and the distance to the nearest parcel border.
    fn parcel(&self, wx: f64, wy: f64) -> ((i64, i64), f64) {
        let s = self.spacing;
        let ci = (wx / s).floor() as i64;
        let cj = (wy / s).floor() as i64;
        let mut best = (f64::INFINITY, (0i64, 0i64), (0.0, 0.0));
        let mut second = (f64::INFINITY, (0.0, 0.0));
        for dj in -1..=1 {
            for di in -1..=1 {
                let (i, j) = (ci + di, cj + dj);
                let sx = (i as f64 + 0.1 + 0.8 * unit(hash(i, j, self.seed, 1))) * s;
                let sy = (j as f64 + 0.1 + 0.8 * unit(hash(i, j, self.seed, 2))) * s;
                let d2 = (wx - sx).powi(2) + (wy - sy).powi(2);
                if d2 < best.0 {
                    second = (best.0, best.2);
                    best = (d2, (i, j), (sx, sy));
                } else if d2 < second.0 {
                    second = (d2, (sx, sy));
                }
            }
        }
        let sep = ((best.2 .0 - second.1 .0).powi(2) + (best.2 .1 - second.1 .1).powi(2)).sqrt();
        let edge = (second.0 - best.0) / (2.0 * sep.max(1e-9));
        (best.1, edge)
    }

    fn parcel_color(&self, id: (i64, i64), wx: f64, wy: f64) -> [f64; 3] {
        let u = |salt: u64| unit(hash(id.0, id.1, self.seed, 100 + salt));
        let land = match u(0) {
            t if t < 0.55 => Land::Field,
            t if t < 0.70 => Land::Forest,
            t if t < 0.85 => Land::Village,
            t if t < 0.96 => Land::Meadow,
            _ => Land::Water,
        };
        let jitter = [(u(1) - 0.5) * 24.0, (u(2) - 0.5) * 24.0, (u(3) - 0.5) * 24.0];
        let theta = u(4) * std::f64::consts::PI;
        let (st, ct) = theta.sin_cos();
        let mut c = match land {
            Land::Field => {
                let base = FIELD_COLORS[(u(5) * FIELD_COLORS.len() as f64) as usize % FIELD_COLORS.len()];
                let amp = 5.0 + 9.0 * u(6);
                let phase = u(7) * std::f64::consts::TAU;
                let along = wx * ct + wy * st;
                let s = amp * (std::f64::consts::TAU * along / self.stripe_period + phase).sin();
                [base[0] + s, base[1] + s, base[2] + s * 0.6]
            }
            Land::Forest => {
                let n = 14.0 * value_noise(wx, wy, 5.0, self.seed ^ 0xF0E)
                    + 8.0 * value_noise(wx, wy, 13.0, self.seed ^ 0xF0F);
                [48.0 + n, 80.0 + 1.3 * n, 42.0 + 0.8 * n]
            }
            Land::Village => {
                let ground = [150.0, 146.0, 132.0];
                // Lots on a 24 m grid aligned with the parcel orientation.
                let lot = 24.0;
                let a = wx * ct + wy * st;
                let b = -wx * st + wy * ct;
                let (li, lj) = ((a / lot).floor(), (b / lot).floor());
                let la = a - (li + 0.5) * lot;
                let lb = b - (lj + 0.5) * lot;
                let h = hash(li as i64, lj as i64, self.seed, 0xB01D);
                let present = unit(h) < 0.75;
                let half = 4.5 + 2.5 * unit(h >> 7 | 1);
                let roof = ROOF_COLORS[(h >> 20) as usize % ROOF_COLORS.len()];
                let dist = la.abs().max(lb.abs()) - half;
                let cover = if present { 1.0 - smoothstep(-0.6, 0.6, dist) } else { 0.0 };
                [
                    ground[0] + (roof[0] - ground[0]) * cover,
                    ground[1] + (roof[1] - ground[1]) * cover,
                    ground[2] + (roof[2] - ground[2]) * cover,
                ]
            }
            Land::Meadow => {
                let n = 10.0 * value_noise(wx, wy, 20.0, self.seed ^ 0x3EAD);
                [132.0 + n, 152.0 + n, 82.0 + 0.5 * n]
            }
            Land::Water => {
                let n = 4.0 * value_noise(wx, wy, 40.0, self.seed ^ 0xAA7E);
                [58.0 + n, 80.0 + n, 102.0 + n]
            }
        };
        if !matches!(land, Land::Water) {
            for (v, j) in c.iter_mut().zip(jitter) {
                *v += j;
            }
        }
        c
    }
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn hash(i: i64, j: i64, seed: u64, salt: u64) -> u64 {
    let mut z = (i as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ seed.wrapping_mul(0x1656_67B1_9E37_79F9)
        ^ salt.wrapping_mul(0x27D4_EB2F_1656_67C5);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smooth value noise in `[-1, 1]` with feature size `scale` meters.
fn value_noise(wx: f64, wy: f64, scale: f64, seed: u64) -> f64 {
    let x = wx / scale;
    let y = wy / scale;
    let (x0, y0) = (x.floor(), y.floor());
    let (tx, ty) = (x - x0, y - y0);
    let (i, j) = (x0 as i64, y0 as i64);
    let v = |a: i64, b: i64| unit(hash(a, b, seed, 0x707)) * 2.0 - 1.0;
    let sx = tx * tx * (3.0 - 2.0 * tx);
    let sy = ty * ty * (3.0 - 2.0 * ty);
    let top = v(i, j) + (v(i + 1, j) - v(i, j)) * sx;
    let bottom = v(i, j + 1) + (v(i + 1, j + 1) - v(i, j + 1)) * sx;
    top + (bottom - top) * sy
}
