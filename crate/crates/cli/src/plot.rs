//! Minimal raster line plots: framed axes, tick labels from a built-in digit font, one colored
//! polyline per series. Axis quantities are carried by the file name and the sidecar CSV.

use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};

use crate::error::{CliError, CliResult};
use crate::manifest::write_atomic;

const WIDTH: u32 = 720;
const HEIGHT: u32 = 480;
const LEFT: i64 = 90;
const RIGHT: i64 = 20;
const TOP: i64 = 20;
const BOTTOM: i64 = 50;
const GLYPH_SCALE: i64 = 2;

const PALETTE: [[u8; 3]; 6] = [[31, 119, 180], [214, 39, 40], [44, 160, 44], [148, 103, 189], [255, 127, 14], [23, 190, 207]];

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Default)]
pub struct Plot {
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

/// 3×5 bitmaps, rows top to bottom, three bits per row.
fn glyph(c: char) -> Option<[u8; 5]> {
    Some(match c {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b001, 0b001, 0b001],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        '-' => [0b000, 0b000, 0b111, 0b000, 0b000],
        '+' => [0b000, 0b010, 0b111, 0b010, 0b000],
        'e' => [0b000, 0b111, 0b111, 0b100, 0b111],
        _ => return None,
    })
}

struct Canvas {
    img: RgbImage,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, c: Rgb<u8>) {
        if x >= 0 && y >= 0 && (x as u32) < WIDTH && (y as u32) < HEIGHT {
            self.img.put_pixel(x as u32, y as u32, c);
        }
    }

    fn line(&mut self, (mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), c: Rgb<u8>) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let mut err = dx + dy;
        loop {
            self.put(x0, y0, c);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }

    fn text(&mut self, s: &str, x: i64, y: i64, c: Rgb<u8>) {
        let mut cx = x;
        for ch in s.chars() {
            if let Some(rows) = glyph(ch) {
                for (r, bits) in rows.iter().enumerate() {
                    for b in 0..3 {
                        if bits & (0b100 >> b) != 0 {
                            for dy in 0..GLYPH_SCALE {
                                for dx in 0..GLYPH_SCALE {
                                    self.put(cx + b * GLYPH_SCALE + dx, y + r as i64 * GLYPH_SCALE + dy, c);
                                }
                            }
                        }
                    }
                }
            }
            cx += 4 * GLYPH_SCALE;
        }
    }
}

fn text_width(s: &str) -> i64 {
    s.chars().count() as i64 * 4 * GLYPH_SCALE
}

fn tick_label(v: f64) -> String {
    format!("{v:.2e}")
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return None;
        }
        if hi - lo < 1e-12 * lo.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        }
        Some(Self { lo, hi, log })
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn value_at(&self, f: f64) -> f64 {
        let v = self.lo + f * (self.hi - self.lo);
        if self.log {
            10f64.powf(v)
        } else {
            v
        }
    }
}

fn usable(v: f64, log: bool) -> bool {
    v.is_finite() && (!log || v > 0.0)
}

/// Renders `plot` as a PNG at `path`. Points that are not finite, or not positive on a log axis,
/// are dropped; a plot with no usable points still produces framed empty axes.
pub fn render_png(plot: &Plot, path: &Path) -> CliResult<()> {
    let white = Rgb([255, 255, 255]);
    let black = Rgb([0, 0, 0]);
    let grey = Rgb([220, 220, 220]);
    let mut canvas = Canvas { img: RgbImage::from_pixel(WIDTH, HEIGHT, white) };
    let pts = |s: &Series| -> Vec<(f64, f64)> {
        s.points.iter().copied().filter(|&(x, y)| usable(x, plot.log_x) && usable(y, plot.log_y)).collect()
    };
    let all: Vec<(f64, f64)> = plot.series.iter().flat_map(pts).collect();
    let (x0, y0, x1, y1) = (LEFT, TOP, WIDTH as i64 - RIGHT, HEIGHT as i64 - BOTTOM);
    if let (Some(ax), Some(ay)) = (Axis::new(all.iter().map(|p| p.0), plot.log_x), Axis::new(all.iter().map(|p| p.1), plot.log_y)) {
        let px = |v: f64| x0 + (ax.frac(v) * (x1 - x0) as f64).round() as i64;
        let py = |v: f64| y1 - (ay.frac(v) * (y1 - y0) as f64).round() as i64;
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let gx = x0 + (f * (x1 - x0) as f64).round() as i64;
            let gy = y1 - (f * (y1 - y0) as f64).round() as i64;
            canvas.line((gx, y0), (gx, y1), grey);
            canvas.line((x0, gy), (x1, gy), grey);
            let xl = tick_label(ax.value_at(f));
            canvas.text(&xl, gx - text_width(&xl) / 2, y1 + 10, black);
            let yl = tick_label(ay.value_at(f));
            canvas.text(&yl, x0 - text_width(&yl) - 8, gy - 5, black);
        }
        for (k, s) in plot.series.iter().enumerate() {
            let [r, g, b] = PALETTE[k % PALETTE.len()];
            let c = Rgb([r, g, b]);
            let p = pts(s);
            for w in p.windows(2) {
                canvas.line((px(w[0].0), py(w[0].1)), (px(w[1].0), py(w[1].1)), c);
            }
            for &(x, y) in &p {
                let (cx, cy) = (px(x), py(y));
                for d in -2..=2 {
                    canvas.line((cx - 2, cy + d), (cx + 2, cy + d), c);
                }
            }
        }
    }
    canvas.line((x0, y0), (x1, y0), black);
    canvas.line((x0, y1), (x1, y1), black);
    canvas.line((x0, y0), (x0, y1), black);
    canvas.line((x1, y0), (x1, y1), black);
    let mut bytes = std::io::Cursor::new(Vec::new());
    canvas.img.write_to(&mut bytes, ImageFormat::Png).map_err(|e| CliError::Internal(format!("png encoding: {e}")))?;
    write_atomic(path, bytes.get_ref())
}

/// Long-format CSV of the plotted data: series, x, y.
pub fn data_csv(plot: &Plot) -> String {
    let mut out = format!("series,{},{}\n", plot.x_label, plot.y_label);
    for s in &plot.series {
        for (x, y) in &s.points {
            out.push_str(&format!("{},{x:e},{y:e}\n", s.label));
        }
    }
    out
}
