//! Log-odds occupancy grid built from scans, plus the derived products the
//! planner consumes: thresholded/inflated binary grids and a distance field.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{LaserScan, Pose2D, Rect, Shape, WorldModel};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("point ({x}, {y}) is outside the grid extent")]
    OutOfBounds { x: f64, y: f64 },
    #[error("cell ({col}, {row}) is outside a {width}x{height} grid")]
    InvalidIndex { col: i64, row: i64, width: usize, height: usize },
    #[error("invalid grid parameters: {0}")]
    Invalid(String),
    #[error("failed writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// PGM / sidecar thresholds (the usual map-file convention).
pub const PGM_OCCUPIED_THRESH: f64 = 0.65;
pub const PGM_FREE_THRESH: f64 = 0.196;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridIndex {
    pub col: usize,
    pub row: usize,
}

impl GridIndex {
    pub fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseSensorModel {
    pub l_occ: f64,
    pub l_free: f64,
    pub l_max: f64,
}

impl InverseSensorModel {
    pub fn from_probabilities(p_hit: f64, p_miss: f64, l_max: f64) -> Self {
        Self {
            l_occ: logit(p_hit),
            l_free: logit(p_miss),
            l_max,
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.l_occ > 0.0 && self.l_free < 0.0 && self.l_max > 0.0) {
            return Err(GridError::Invalid(format!(
                "sensor model needs l_occ > 0 > l_free and l_max > 0, got {:?}",
                self
            )));
        }
        Ok(())
    }
}

impl Default for InverseSensorModel {
    fn default() -> Self {
        Self::from_probabilities(0.7, 0.3, 5.0)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn logodds_to_probability(l: f64) -> f64 {
    1.0 - 1.0 / (1.0 + l.exp())
}

/// Row-major log-odds grid. `origin` is the world position of the outer
/// corner of cell (0, 0); the grid is axis aligned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub origin: Pose2D,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub logodds: Vec<f64>,
}

fn cell_count(extent: f64, resolution: f64) -> usize {
    let n = extent / resolution;
    let r = n.round();
    if (n - r).abs() < 1e-9 {
        r as usize
    } else {
        n.ceil() as usize
    }
}

impl OccupancyGrid {
    pub fn new(origin: [f64; 2], resolution: f64, width: usize, height: usize) -> Result<Self, GridError> {
        if !(resolution > 0.0) || width == 0 || height == 0 {
            return Err(GridError::Invalid(format!(
                "resolution {resolution} and size {width}x{height} must be positive"
            )));
        }
        Ok(Self {
            origin: Pose2D { x: origin[0], y: origin[1], theta: 0.0 },
            resolution,
            width,
            height,
            logodds: vec![0.0; width * height],
        })
    }

    /// Grid covering `bounds` plus `pad_cells` of margin on every side.
    pub fn covering(bounds: &Rect, resolution: f64, pad_cells: usize) -> Result<Self, GridError> {
        let pad = pad_cells as f64 * resolution;
        let width = cell_count(bounds.width(), resolution) + 2 * pad_cells;
        let height = cell_count(bounds.height(), resolution) + 2 * pad_cells;
        Self::new([bounds.min[0] - pad, bounds.min[1] - pad], resolution, width, height)
    }

    /// Ground-truth grid: every cell whose closed square touches an obstacle
    /// or pokes outside the world bounds is saturated occupied, the rest free.
    pub fn rasterize(world: &WorldModel, resolution: f64, pad_cells: usize, l_max: f64) -> Result<Self, GridError> {
        let mut grid = Self::covering(&world.bounds, resolution, pad_cells)?;
        let b = &world.bounds;
        for row in 0..grid.height {
            for col in 0..grid.width {
                let cell = grid.cell_rect(GridIndex::new(col, row));
                let eps = 1e-9 * resolution;
                let outside = cell.min[0] < b.min[0] - eps
                    || cell.max[0] > b.max[0] + eps
                    || cell.min[1] < b.min[1] - eps
                    || cell.max[1] > b.max[1] + eps;
                let hit = outside
                    || world.obstacles.iter().any(|ob| match *ob {
                        Shape::Disk { center, radius } => cell.distance_to(center) <= radius,
                        Shape::Rect { min, max } => {
                            min[0] <= cell.max[0] && max[0] >= cell.min[0] && min[1] <= cell.max[1] && max[1] >= cell.min[1]
                        }
                    });
                let i = grid.flat(GridIndex::new(col, row));
                grid.logodds[i] = if hit { l_max } else { -l_max };
            }
        }
        Ok(grid)
    }

    pub fn flat(&self, idx: GridIndex) -> usize {
        idx.row * self.width + idx.col
    }

    pub fn index(&self, col: i64, row: i64) -> Result<GridIndex, GridError> {
        if col < 0 || row < 0 || col as usize >= self.width || row as usize >= self.height {
            return Err(GridError::InvalidIndex { col, row, width: self.width, height: self.height });
        }
        Ok(GridIndex::new(col as usize, row as usize))
    }

    /// Continuous grid coordinates (cells) of a world point.
    pub fn to_grid_coords(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.origin.x) / self.resolution,
            (p[1] - self.origin.y) / self.resolution,
        ]
    }

    pub fn world_to_cell(&self, p: [f64; 2]) -> Result<GridIndex, GridError> {
        let u = self.to_grid_coords(p);
        let (c, r) = (u[0].floor(), u[1].floor());
        if !(c >= 0.0 && r >= 0.0 && (c as usize) < self.width && (r as usize) < self.height) {
            return Err(GridError::OutOfBounds { x: p[0], y: p[1] });
        }
        Ok(GridIndex::new(c as usize, r as usize))
    }

    pub fn cell_center(&self, idx: GridIndex) -> [f64; 2] {
        [
            self.origin.x + (idx.col as f64 + 0.5) * self.resolution,
            self.origin.y + (idx.row as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn cell_rect(&self, idx: GridIndex) -> Rect {
        let x0 = self.origin.x + idx.col as f64 * self.resolution;
        let y0 = self.origin.y + idx.row as f64 * self.resolution;
        Rect::new([x0, y0], [x0 + self.resolution, y0 + self.resolution])
    }

    pub fn logodds_at(&self, idx: GridIndex) -> f64 {
        self.logodds[self.flat(idx)]
    }

    pub fn set_logodds(&mut self, idx: GridIndex, value: f64) {
        let i = self.flat(idx);
        self.logodds[i] = value;
    }

    pub fn occupancy_probability(&self, idx: GridIndex) -> Result<f64, GridError> {
        if idx.col >= self.width || idx.row >= self.height {
            return Err(GridError::InvalidIndex {
                col: idx.col as i64,
                row: idx.row as i64,
                width: self.width,
                height: self.height,
            });
        }
        Ok(logodds_to_probability(self.logodds_at(idx)))
    }

    fn add(&mut self, idx: GridIndex, delta: f64, l_max: f64) {
        let i = self.flat(idx);
        self.logodds[i] = (self.logodds[i] + delta).clamp(-l_max, l_max);
    }

    fn cell_of_coords(&self, u: [f64; 2]) -> Option<GridIndex> {
        let (c, r) = (u[0].floor(), u[1].floor());
        if c >= 0.0 && r >= 0.0 && (c as usize) < self.width && (r as usize) < self.height {
            Some(GridIndex::new(c as usize, r as usize))
        } else {
            None
        }
    }

    /// Cells strictly between the cell containing `from` and the cell
    /// containing `to`, in traversal order, truncated at the grid edge.
    ///
    /// A cell is crossed when the open segment passes through its open
    /// interior; exact corner crossings step diagonally.
    pub fn ray_cells(&self, from: [f64; 2], to: [f64; 2]) -> Vec<GridIndex> {
        let u0 = self.to_grid_coords(from);
        let u1 = self.to_grid_coords(to);
        let Some(start) = self.cell_of_coords(u0) else {
            return Vec::new();
        };
        let end = [u1[0].floor() as i64, u1[1].floor() as i64];
        let d = [u1[0] - u0[0], u1[1] - u0[1]];
        let mut cell = [start.col as i64, start.row as i64];
        let step = [sign(d[0]), sign(d[1])];
        let next_t = |axis: usize, c: i64| -> f64 {
            if step[axis] == 0 {
                f64::INFINITY
            } else {
                let boundary = if step[axis] > 0 { c + 1 } else { c } as f64;
                (boundary - u0[axis]) / d[axis]
            }
        };
        let mut out = Vec::new();
        let mut tx = next_t(0, cell[0]);
        let mut ty = next_t(1, cell[1]);
        loop {
            let t = tx.min(ty);
            if t >= 1.0 {
                break;
            }
            if tx <= ty {
                cell[0] += step[0];
            }
            if ty <= tx {
                cell[1] += step[1];
            }
            tx = next_t(0, cell[0]);
            ty = next_t(1, cell[1]);
            if cell[0] < 0 || cell[1] < 0 || cell[0] as usize >= self.width || cell[1] as usize >= self.height {
                break;
            }
            if cell == end {
                break;
            }
            out.push(GridIndex::new(cell[0] as usize, cell[1] as usize));
        }
        out
    }

    /// Integrates one scan taken at `pose`. Traversed cells get `l_free`, the
    /// endpoint cell gets `l_occ` unless the beam had no return; the robot's
    /// own cell is not updated. Every increment is clamped to `±l_max`.
    pub fn update_with_scan(&mut self, pose: Pose2D, scan: &LaserScan, model: &InverseSensorModel) {
        let origin = pose.position();
        for (bearing, range, no_return) in scan.beams() {
            let a = pose.theta + bearing;
            let end = [origin[0] + range * a.cos(), origin[1] + range * a.sin()];
            for c in self.ray_cells(origin, end) {
                self.add(c, model.l_free, model.l_max);
            }
            if !no_return {
                if let Some(c) = self.cell_of_coords(self.to_grid_coords(end)) {
                    self.add(c, model.l_occ, model.l_max);
                }
            }
        }
    }

    pub fn occupied_mask(&self, threshold: f64) -> Vec<bool> {
        self.logodds
            .iter()
            .map(|&l| logodds_to_probability(l) >= threshold)
            .collect()
    }

    /// Binary grid where a cell is blocked iff some cell whose center lies
    /// within `radius` of its center has occupancy at least `threshold`.
    pub fn inflate(&self, occupied_threshold: f64, radius: f64) -> BinaryGrid {
        let occ = self.occupied_mask(occupied_threshold);
        let d2 = squared_distance_transform(&occ, self.width, self.height);
        let r_cells = radius / self.resolution;
        let limit = r_cells * r_cells + 1e-9;
        BinaryGrid {
            origin: [self.origin.x, self.origin.y],
            resolution: self.resolution,
            width: self.width,
            height: self.height,
            blocked: d2.iter().map(|&d| d <= limit).collect(),
        }
    }

    pub fn distance_field(&self, occupied_threshold: f64) -> DistanceField {
        let occ = self.occupied_mask(occupied_threshold);
        DistanceField {
            origin: [self.origin.x, self.origin.y],
            resolution: self.resolution,
            width: self.width,
            height: self.height,
            d2: squared_distance_transform(&occ, self.width, self.height),
        }
    }

    /// Map-file pixel value: 0 occupied, 254 free, 205 unknown.
    pub fn occupancy_byte(&self, idx: GridIndex) -> u8 {
        let p = logodds_to_probability(self.logodds_at(idx));
        if p >= PGM_OCCUPIED_THRESH {
            0
        } else if p <= PGM_FREE_THRESH {
            254
        } else {
            205
        }
    }

    /// Pixel bytes in image order (top row = highest grid row).
    pub fn pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for row in (0..self.height).rev() {
            for col in 0..self.width {
                out.push(self.occupancy_byte(GridIndex::new(col, row)));
            }
        }
        out
    }

    pub fn metadata(&self, image: &str) -> MapMetadata {
        MapMetadata {
            image: image.to_string(),
            resolution: self.resolution,
            origin: [self.origin.x, self.origin.y, 0.0],
            width: self.width,
            height: self.height,
            negate: 0,
            occupied_thresh: PGM_OCCUPIED_THRESH,
            free_thresh: PGM_FREE_THRESH,
        }
    }

    /// Writes `<stem>.pgm` and `<stem>.yaml` into `dir`.
    pub fn export_pgm(&self, dir: &Path, stem: &str) -> Result<(), GridError> {
        let pgm = dir.join(format!("{stem}.pgm"));
        let yaml = dir.join(format!("{stem}.yaml"));
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| GridError::Io { path, source }
        };
        std::fs::File::create(&pgm)
            .and_then(|mut f| f.write_all(&self.pgm_bytes()))
            .map_err(io(&pgm))?;
        let meta = serde_yaml::to_string(&self.metadata(&format!("{stem}.pgm")))
            .map_err(|e| GridError::Invalid(e.to_string()))?;
        std::fs::write(&yaml, meta).map_err(io(&yaml))?;
        Ok(())
    }
}

fn sign(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Sidecar document for a PGM map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub image: String,
    pub resolution: f64,
    pub origin: [f64; 3],
    pub width: usize,
    pub height: usize,
    pub negate: u8,
    pub occupied_thresh: f64,
    pub free_thresh: f64,
}

/// Planning grid of blocked/free cells.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryGrid {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub blocked: Vec<bool>,
}

impl BinaryGrid {
    pub fn new_free(width: usize, height: usize, resolution: f64, origin: [f64; 2]) -> Self {
        Self { origin, resolution, width, height, blocked: vec![false; width * height] }
    }

    pub fn in_bounds(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    pub fn is_blocked(&self, idx: GridIndex) -> bool {
        self.blocked[idx.row * self.width + idx.col]
    }

    pub fn set_blocked(&mut self, idx: GridIndex, blocked: bool) {
        let w = self.width;
        self.blocked[idx.row * w + idx.col] = blocked;
    }

    pub fn world_to_cell(&self, p: [f64; 2]) -> Result<GridIndex, GridError> {
        let c = ((p[0] - self.origin[0]) / self.resolution).floor();
        let r = ((p[1] - self.origin[1]) / self.resolution).floor();
        if !(c >= 0.0 && r >= 0.0 && (c as usize) < self.width && (r as usize) < self.height) {
            return Err(GridError::OutOfBounds { x: p[0], y: p[1] });
        }
        Ok(GridIndex::new(c as usize, r as usize))
    }

    pub fn cell_center(&self, idx: GridIndex) -> [f64; 2] {
        [
            self.origin[0] + (idx.col as f64 + 0.5) * self.resolution,
            self.origin[1] + (idx.row as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }
}

/// Squared distance (in cells) from each cell center to the nearest occupied
/// cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub d2: Vec<f64>,
}

impl DistanceField {
    /// Center-to-center distance in meters for the cell containing `p`;
    /// zero outside the grid.
    pub fn center_distance(&self, p: [f64; 2]) -> f64 {
        let c = ((p[0] - self.origin[0]) / self.resolution).floor();
        let r = ((p[1] - self.origin[1]) / self.resolution).floor();
        if !(c >= 0.0 && r >= 0.0 && (c as usize) < self.width && (r as usize) < self.height) {
            return 0.0;
        }
        self.d2[r as usize * self.width + c as usize].sqrt() * self.resolution
    }

    /// Lower bound on the distance from `p` to anything inside an occupied
    /// cell: the query point and the obstacle point may each sit up to half
    /// a cell diagonal from their cell centers.
    pub fn obstacle_distance(&self, p: [f64; 2]) -> f64 {
        (self.center_distance(p) - self.resolution * std::f64::consts::SQRT_2).max(0.0)
    }
}

/// Exact squared Euclidean distance transform (lower-envelope of parabolas,
/// separable over rows and columns). Unreachable cells are +inf.
pub fn squared_distance_transform(occupied: &[bool], width: usize, height: usize) -> Vec<f64> {
    let mut tmp = vec![f64::INFINITY; width * height];
    let mut col_in = vec![0.0; height];
    let mut col_out = vec![0.0; height];
    for c in 0..width {
        for r in 0..height {
            col_in[r] = if occupied[r * width + c] { 0.0 } else { f64::INFINITY };
        }
        dt_1d(&col_in, &mut col_out);
        for r in 0..height {
            tmp[r * width + c] = col_out[r];
        }
    }
    let mut out = vec![f64::INFINITY; width * height];
    for r in 0..height {
        dt_1d(&tmp[r * width..(r + 1) * width], &mut out[r * width..(r + 1) * width]);
    }
    out
}

fn dt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let sites: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if sites.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let inter = |a: usize, b: usize| -> f64 {
        let (fa, fb) = (f[a], f[b]);
        let (a, b) = (a as f64, b as f64);
        ((fb + b * b) - (fa + a * a)) / (2.0 * (b - a))
    };
    let mut v = vec![sites[0]];
    let mut z = vec![f64::NEG_INFINITY, f64::INFINITY];
    for &q in &sites[1..] {
        let mut s = inter(*v.last().unwrap(), q);
        // z[0] is -inf so the envelope never empties
        while s <= z[v.len() - 1] {
            v.pop();
            z.pop();
            s = inter(*v.last().unwrap(), q);
        }
        *z.last_mut().unwrap() = s;
        v.push(q);
        z.push(f64::INFINITY);
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ScanSpec;

    fn grid(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::new([0.0, 0.0], 0.05, w, h).unwrap()
    }

    fn one_beam(range: f64, range_max: f64) -> LaserScan {
        LaserScan { stamp: 0.0, angle_min: 0.0, angle_increment: 0.0, range_max, ranges: vec![range] }
    }

    #[test]
    fn world_to_cell_examples() {
        let g = grid(40, 40);
        assert_eq!(g.world_to_cell([0.26, 0.01]).unwrap(), GridIndex::new(5, 0));
        assert_eq!(g.world_to_cell([0.05, 0.0]).unwrap(), GridIndex::new(1, 0));
        assert!(matches!(g.world_to_cell([-0.01, 0.0]), Err(GridError::OutOfBounds { .. })));
        assert!(g.world_to_cell([2.0, 0.0]).is_err());
        let c = g.cell_center(GridIndex::new(5, 0));
        assert_eq!(g.world_to_cell(c).unwrap(), GridIndex::new(5, 0));
    }

    #[test]
    fn single_beam_update() {
        let mut g = grid(40, 10);
        let m = InverseSensorModel::default();
        assert!((m.l_occ - 0.8472978603872037).abs() < 1e-12);
        let pose = Pose2D::new(0.025, 0.025, 0.0);
        g.update_with_scan(pose, &one_beam(1.0, 3.5), &m);
        assert_eq!(g.logodds_at(GridIndex::new(20, 0)), m.l_occ);
        let free: Vec<_> = (0..40).filter(|&c| g.logodds_at(GridIndex::new(c, 0)) == m.l_free).collect();
        assert_eq!(free, (1..20).collect::<Vec<_>>());
        assert_eq!(g.logodds_at(GridIndex::new(0, 0)), 0.0);
        assert_eq!(g.logodds.iter().filter(|&&l| l != 0.0).count(), 20);
    }

    #[test]
    fn no_return_beam_marks_only_free() {
        let mut g = grid(40, 10);
        let m = InverseSensorModel::default();
        g.update_with_scan(Pose2D::new(0.025, 0.025, 0.0), &one_beam(1.0, 1.0), &m);
        assert!(g.logodds.iter().all(|&l| l <= 0.0));
        assert_eq!(g.logodds.iter().filter(|&&l| l < 0.0).count(), 19);
    }

    #[test]
    fn prior_and_probability() {
        let g = grid(4, 4);
        assert_eq!(g.occupancy_probability(GridIndex::new(1, 1)).unwrap(), 0.5);
        assert!(g.occupancy_probability(GridIndex::new(4, 0)).is_err());
        let m = InverseSensorModel::default();
        assert!((logodds_to_probability(m.l_occ) - 0.7).abs() < 1e-12);
        assert!((logodds_to_probability(m.l_free) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn repeated_hits_clamp_exactly() {
        let mut g = grid(40, 10);
        let m = InverseSensorModel::default();
        for _ in 0..100 {
            g.update_with_scan(Pose2D::new(0.025, 0.025, 0.0), &one_beam(1.0, 3.5), &m);
        }
        assert_eq!(g.logodds_at(GridIndex::new(20, 0)), 5.0);
        assert_eq!(g.logodds_at(GridIndex::new(10, 0)), -5.0);
    }

    #[test]
    fn beams_leaving_grid_are_truncated() {
        let mut g = grid(10, 10);
        let m = InverseSensorModel::default();
        g.update_with_scan(Pose2D::new(0.025, 0.025, 0.0), &one_beam(2.0, 3.5), &m);
        assert_eq!(g.logodds.iter().filter(|&&l| l != 0.0).count(), 9);
        assert!(g.logodds.iter().all(|&l| l <= 0.0));
    }

    #[test]
    fn inflation_radius_zero_is_threshold() {
        let mut g = grid(10, 10);
        g.set_logodds(GridIndex::new(3, 4), 2.0);
        g.set_logodds(GridIndex::new(7, 7), 0.1);
        let b = g.inflate(0.65, 0.0);
        assert_eq!(b.blocked_count(), 1);
        assert!(b.is_blocked(GridIndex::new(3, 4)));
    }

    #[test]
    fn inflation_matches_brute_force() {
        let mut g = grid(11, 11);
        g.set_logodds(GridIndex::new(5, 5), 5.0);
        let b = g.inflate(0.65, 0.1);
        // brute force over all cell pairs
        let mut expected = 0;
        for r in 0..11usize {
            for c in 0..11usize {
                let p = g.cell_center(GridIndex::new(c, r));
                let q = g.cell_center(GridIndex::new(5, 5));
                let blocked = (p[0] - q[0]).hypot(p[1] - q[1]) <= 0.1 + 1e-12;
                assert_eq!(b.is_blocked(GridIndex::new(c, r)), blocked, "cell {c},{r}");
                expected += blocked as usize;
            }
        }
        // diamond: center, 4 at distance 1, 4 diagonal, 4 at distance 2
        assert_eq!(expected, 13);
        assert_eq!(grid(5, 5).inflate(0.65, 0.3).blocked_count(), 0);
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let (w, h) = (23, 17);
        let occ: Vec<bool> = (0..w * h).map(|i| (i * 7919) % 31 == 0).collect();
        let d2 = squared_distance_transform(&occ, w, h);
        for r in 0..h {
            for c in 0..w {
                let mut best = f64::INFINITY;
                for rr in 0..h {
                    for cc in 0..w {
                        if occ[rr * w + cc] {
                            let d = (c as f64 - cc as f64).powi(2) + (r as f64 - rr as f64).powi(2);
                            best = best.min(d);
                        }
                    }
                }
                assert_eq!(d2[r * w + c], best);
            }
        }
        assert!(squared_distance_transform(&vec![false; 12], 4, 3).iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn rasterized_world_marks_walls_and_obstacles() {
        let w = WorldModel::square_room(1.0).with_obstacles(vec![Shape::Disk { center: [0.0, 0.0], radius: 0.1 }]);
        let g = OccupancyGrid::rasterize(&w, 0.05, 2, 5.0).unwrap();
        assert_eq!((g.width, g.height), (24, 24));
        let occ = |p: [f64; 2]| g.logodds_at(g.world_to_cell(p).unwrap()) > 0.0;
        assert!(occ([0.0, 0.0]));
        assert!(occ([0.52, 0.0]));
        assert!(!occ([0.3, 0.3]));
    }

    #[test]
    fn scan_of_room_maps_walls() {
        let w = WorldModel::square_room(2.0);
        let spec = ScanSpec::default();
        let pose = Pose2D::new(0.1, 0.05, 0.3);
        let scan = crate::world::raycast_scan(&w, pose, &spec, 0.0).unwrap();
        let mut g = OccupancyGrid::covering(&w.bounds, 0.05, 2).unwrap();
        g.update_with_scan(pose, &scan, &InverseSensorModel::default());
        let wall = g.world_to_cell([1.01, 0.05]).unwrap();
        assert!(g.logodds_at(wall) > 0.0);
        assert!(g.logodds_at(g.world_to_cell([0.5, 0.05]).unwrap()) < 0.0);
    }

    #[test]
    fn pgm_encoding() {
        let mut g = grid(3, 2);
        g.set_logodds(GridIndex::new(0, 0), 5.0);
        g.set_logodds(GridIndex::new(1, 1), -5.0);
        let bytes = g.pgm_bytes();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        // top image row is grid row 1
        assert_eq!(&bytes[header.len()..], &[205, 254, 205, 0, 205, 205]);
    }
}
