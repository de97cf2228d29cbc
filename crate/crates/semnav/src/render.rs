//! Synthetic renders: egocentric first-person panel, top-down obstacle map
//! with heading arrow, and trajectory overlays. Plus PNG/PPM encoding.

use crate::occupancy::{CellIndex, CellState, DepthScan, GridPose, OccupancyGrid};

pub const EGO_WIDTH: usize = 256;
pub const EGO_HEIGHT: usize = 144;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl ImageRgb {
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        Self { width, height, pixels }
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = (y * self.width + x) * 3;
            self.pixels[i..i + 3].copy_from_slice(&rgb);
        }
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("pixel buffer matches dimensions");
        image::DynamicImage::ImageRgb8(img)
            .write_to(&mut std::io::Cursor::new(&mut out), image::ImageFormat::Png)
            .expect("in-memory PNG encode");
        out
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// First-person panel synthesized from a depth scan: one column band per ray,
/// wall height and shade from depth, target columns tinted red.
///
/// `target_rays[i]` marks rays whose first hit is a target cell.
pub fn egocentric_render(scan: &DepthScan, max_range: f64, target_rays: &[bool]) -> ImageRgb {
    let mut img = ImageRgb::filled(EGO_WIDTH, EGO_HEIGHT, [40, 40, 48]);
    // Floor.
    for y in EGO_HEIGHT / 2..EGO_HEIGHT {
        for x in 0..EGO_WIDTH {
            img.set(x, y, [60, 55, 50]);
        }
    }
    if scan.is_empty() {
        return img;
    }
    let n = scan.len();
    for col in 0..EGO_WIDTH {
        // Rightmost ray maps to the leftmost column (positive bearings are to
        // the agent's left).
        let ray = ((EGO_WIDTH - 1 - col) * n) / EGO_WIDTH;
        if !scan.hits[ray] {
            continue;
        }
        let depth = (scan.ranges[ray] / max_range).clamp(0.02, 1.0);
        let wall_h = ((EGO_HEIGHT as f64 * 0.9) / (depth * 8.0).max(1.0)) as usize;
        let shade = (220.0 * (1.0 - depth * 0.8)) as u8;
        let rgb = if target_rays.get(ray).copied().unwrap_or(false) {
            [shade.saturating_add(35), shade / 3, shade / 3]
        } else {
            [shade, shade, shade]
        };
        let top = EGO_HEIGHT / 2 - (wall_h / 2).min(EGO_HEIGHT / 2);
        let bottom = (EGO_HEIGHT / 2 + wall_h / 2).min(EGO_HEIGHT - 1);
        for y in top..=bottom {
            img.set(col, y, rgb);
        }
    }
    img
}

/// Top-down obstacle map: free white, unknown dark, obstacles grey, with a
/// red heading arrow at the agent pose.
pub fn topdown_render(grid: &OccupancyGrid, pose: &GridPose) -> ImageRgb {
    let mut img = ImageRgb::filled(grid.width(), grid.height(), [30, 30, 30]);
    for ((x, y), state) in grid.iter_cells() {
        let rgb = match state {
            CellState::Unknown => [30, 30, 30],
            CellState::Free => [255, 255, 255],
            CellState::Obstacle => [128, 128, 128],
        };
        img.set(x as usize, y as usize, rgb);
    }
    draw_arrow(&mut img, pose);
    img
}

fn draw_arrow(img: &mut ImageRgb, pose: &GridPose) {
    let len = 5.0;
    let (dx, dy) = (pose.heading.cos(), pose.heading.sin());
    for s in 0..=(len as usize * 4) {
        let t = s as f64 / 4.0;
        let x = pose.x + dx * t;
        let y = pose.y + dy * t;
        if x >= 0.0 && y >= 0.0 {
            img.set(x as usize, y as usize, [220, 30, 30]);
        }
    }
}

/// Trajectory overlay on an occupancy render: path in blue, start green,
/// end/target markers red.
pub fn trajectory_render(
    grid: &OccupancyGrid,
    trajectory: &[GridPose],
    targets: &[CellIndex],
) -> ImageRgb {
    let mut img = topdown_render(grid, trajectory.last().unwrap_or(&GridPose::new(0.0, 0.0, 0.0)));
    for w in trajectory.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let steps = (a.distance_to(b).ceil() as usize * 2).max(1);
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let x = a.x + (b.x - a.x) * t;
            let y = a.y + (b.y - a.y) * t;
            if x >= 0.0 && y >= 0.0 {
                img.set(x as usize, y as usize, [40, 90, 230]);
            }
        }
    }
    if let Some(start) = trajectory.first() {
        img.set(start.x as usize, start.y as usize, [30, 200, 60]);
    }
    for &(tx, ty) in targets {
        if tx >= 0 && ty >= 0 {
            img.set(tx as usize, ty as usize, [255, 0, 0]);
        }
    }
    img
}
