//! Pictures of occupied sets on the disk and of Loewner traces.

use crate::error::{invalid, Result};
use crate::lattice::{boundary_index, is_boundary_slot, LatticeDisk, VertexSet};
use image::{Rgb, RgbImage};
use num_complex::Complex64;
use std::collections::VecDeque;
use std::f64::consts::PI;
use std::path::Path;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
const RED: Rgb<u8> = Rgb([220, 20, 20]);
const OUTLINE: Rgb<u8> = Rgb([90, 90, 90]);
const LEVEL: Rgb<u8> = Rgb([150, 190, 240]);

#[derive(Clone, Debug)]
pub struct Style {
    /// Image side in pixels.
    pub size: u32,
    /// Field values and a level `h`; vertices with value at least `h` are tinted.
    pub levels: Option<(Vec<f64>, f64)>,
    /// Boundary arc `(from, to)` in radians, counterclockwise. When set, the interface of the
    /// occupied set seen from the complementary arc is drawn in red.
    pub interface_arc: Option<(f64, f64)>,
}

impl Default for Style {
    fn default() -> Self {
        Style { size: 512, levels: None, interface_arc: None }
    }
}

fn angle_in_arc(theta: f64, (a, b): (f64, f64)) -> bool {
    let span = (b - a).rem_euclid(2.0 * PI);
    (theta - a).rem_euclid(2.0 * PI) <= span
}

/// Vacant vertices reachable from the boundary outside `arc`; everything else is the filled
/// occupied set. The interface is the set of filled vertices next to a reachable one.
pub fn interface(lattice: &LatticeDisk, occupied: &VertexSet, arc: (f64, f64)) -> VertexSet {
    let mut seen = VertexSet::empty(lattice);
    let mut queue = VecDeque::new();
    for &v in lattice.inner_boundary() {
        if occupied.contains(v) {
            continue;
        }
        let touches = lattice.neighbors(v).iter().any(|&s| {
            if !is_boundary_slot(s) {
                return false;
            }
            let (x, y) = lattice.outer_point(boundary_index(s));
            !angle_in_arc(y.atan2(x), arc)
        });
        if touches && !seen.contains(v) {
            seen.insert(v);
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &w in lattice.neighbors(v) {
            if !is_boundary_slot(w) && !occupied.contains(w) && !seen.contains(w) {
                seen.insert(w);
                queue.push_back(w);
            }
        }
    }
    VertexSet::from_iter(
        lattice,
        (0..lattice.len() as u32)
            .filter(|&v| !seen.contains(v))
            .filter(|&v| lattice.neighbors(v).iter().any(|&w| !is_boundary_slot(w) && seen.contains(w))),
    )
}

/// Draws the disk with `occupied` in black.
pub fn render(lattice: &LatticeDisk, occupied: &VertexSet, style: &Style) -> Result<RgbImage> {
    if style.size < 8 {
        return invalid("image size must be at least 8");
    }
    if let Some((phi, _)) = &style.levels {
        if phi.len() != lattice.len() {
            return invalid("field length does not match the lattice");
        }
    }
    let front = style.interface_arc.map(|arc| interface(lattice, occupied, arc));
    let n = lattice.n() as f64;
    let size = style.size;
    let half = size as f64 / 2.0;
    let scale = (half - 2.0) / 1.0;
    let mut img = RgbImage::from_pixel(size, size, WHITE);
    for py in 0..size {
        for px in 0..size {
            let x = (px as f64 + 0.5 - half) / scale;
            let y = (half - py as f64 - 0.5) / scale;
            let rad = x.hypot(y);
            if (rad - 1.0).abs() * scale < 1.0 {
                img.put_pixel(px, py, OUTLINE);
                continue;
            }
            if rad >= 1.0 {
                continue;
            }
            let Some(v) = lattice.index_of((x * n).round() as i32, (y * n).round() as i32) else { continue };
            let color = if front.as_ref().is_some_and(|f| f.contains(v)) {
                RED
            } else if occupied.contains(v) {
                BLACK
            } else if style.levels.as_ref().is_some_and(|(phi, h)| phi[v as usize] >= *h) {
                LEVEL
            } else {
                WHITE
            };
            img.put_pixel(px, py, color);
        }
    }
    Ok(img)
}

/// Draws a trace in the upper half plane, scaled so the window `[-w, w] x [0, 2w]` fits.
pub fn render_traces(traces: &[Vec<Complex64>], size: u32, w: f64) -> Result<RgbImage> {
    if size < 8 || !(w > 0.0) {
        return invalid("need size >= 8 and a positive window");
    }
    let mut img = RgbImage::from_pixel(size, size, WHITE);
    let s = size as f64;
    let to_px = |z: Complex64| ((z.re + w) / (2.0 * w) * s, s - 1.0 - z.im / (2.0 * w) * s);
    for px in 0..size {
        img.put_pixel(px, size - 1, OUTLINE);
    }
    for trace in traces {
        for seg in trace.windows(2) {
            let (a, b) = (to_px(seg[0]), to_px(seg[1]));
            let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
            for k in 0..=steps {
                let t = k as f64 / steps as f64;
                let (x, y) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
                if x >= 0.0 && y >= 0.0 && x < s && y < s {
                    img.put_pixel(x as u32, y as u32, RED);
                }
            }
        }
    }
    Ok(img)
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    Ok(img.save(path)?)
}
