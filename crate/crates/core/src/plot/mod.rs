//! Density grids and SVG rendering of level-set bands and clusterings.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// `[xmin, ymin, xmax, ymax]`.
pub type BBox = [f64; 4];

/// Log-density at cell centers, row-major with `y` rows from the bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub bbox: BBox,
    pub log_density: Vec<f64>,
}

impl Grid {
    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.bbox[2] - self.bbox[0]) / self.nx as f64,
            (self.bbox[3] - self.bbox[1]) / self.ny as f64,
        )
    }

    pub fn center(&self, ix: usize, iy: usize) -> [f64; 2] {
        let (dx, dy) = self.cell_size();
        [
            self.bbox[0] + (ix as f64 + 0.5) * dx,
            self.bbox[1] + (iy as f64 + 0.5) * dy,
        ]
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.log_density[iy * self.nx + ix]
    }

    /// `Σ exp(value) · cell area`.
    pub fn integral(&self) -> f64 {
        let (dx, dy) = self.cell_size();
        self.log_density.iter().map(|v| v.exp()).sum::<f64>() * dx * dy
    }

    /// Cell with the highest density.
    pub fn argmax(&self) -> (usize, usize) {
        let best = (0..self.log_density.len())
            .max_by(|&a, &b| self.log_density[a].total_cmp(&self.log_density[b]))
            .unwrap_or(0);
        (best % self.nx, best / self.nx)
    }

    /// `x,y,log_density` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,log_density\n");
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let [x, y] = self.center(ix, iy);
                let _ = writeln!(out, "{x:?},{y:?},{:?}", self.at(ix, iy));
            }
        }
        out
    }
}

pub fn validate_bbox(bbox: &BBox) -> Result<()> {
    let ok = bbox.iter().all(|v| v.is_finite()) && bbox[2] > bbox[0] && bbox[3] > bbox[1];
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("degenerate bounding box {bbox:?}")))
    }
}

/// Evaluates `log_density` at every cell center.
pub fn density_grid<F>(log_density: F, bbox: BBox, nx: usize, ny: usize) -> Result<Grid>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    validate_bbox(&bbox)?;
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2×2 cells".into()));
    }
    let mut grid = Grid {
        nx,
        ny,
        bbox,
        log_density: Vec::new(),
    };
    grid.log_density = (0..nx * ny)
        .into_par_iter()
        .map(|c| log_density(&grid.center(c % nx, c / nx)))
        .collect();
    Ok(grid)
}

/// Density levels splitting `[min, max]` into ten equal bands.
pub fn decile_levels(grid: &Grid) -> Vec<f64> {
    let dens: Vec<f64> = grid.log_density.iter().map(|v| v.exp()).collect();
    let lo = dens.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = dens.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (1..10).map(|q| lo + (hi - lo) * q as f64 / 10.0).collect()
}

fn band_of(value: f64, levels: &[f64]) -> usize {
    levels.iter().take_while(|&&l| value >= l).count()
}

struct Frame {
    bbox: BBox,
    width: f64,
    height: f64,
}

impl Frame {
    fn new(bbox: BBox, width: f64) -> Self {
        let aspect = (bbox[3] - bbox[1]) / (bbox[2] - bbox[0]);
        Frame {
            bbox,
            width,
            height: width * aspect,
        }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (
            (p[0] - self.bbox[0]) / (self.bbox[2] - self.bbox[0]) * self.width,
            (self.bbox[3] - p[1]) / (self.bbox[3] - self.bbox[1]) * self.height,
        )
    }

    fn open(&self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.3} {h:.3}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
            w = self.width,
            h = self.height
        )
    }
}

fn gray(band: usize) -> String {
    let v = 255 - (band * 235 / 9).min(235);
    format!("rgb({v},{v},{v})")
}

/// Segments of the `level` isoline over the grid of cell centers.
pub fn isoline(grid: &Grid, level: f64) -> Vec<[[f64; 2]; 2]> {
    let d = |ix: usize, iy: usize| grid.at(ix, iy).exp() - level;
    let mut segs = Vec::new();
    for iy in 0..grid.ny - 1 {
        for ix in 0..grid.nx - 1 {
            let corners = [(ix, iy), (ix + 1, iy), (ix + 1, iy + 1), (ix, iy + 1)];
            let vals: Vec<f64> = corners.iter().map(|&(x, y)| d(x, y)).collect();
            let mut cuts = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (vals[e], vals[(e + 1) % 4]);
                if (a >= 0.0) != (b >= 0.0) {
                    let t = a / (a - b);
                    let pa = grid.center(corners[e].0, corners[e].1);
                    let pb = grid.center(corners[(e + 1) % 4].0, corners[(e + 1) % 4].1);
                    cuts.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                }
            }
            // 2 cuts: one segment; 4 cuts (saddle): pair consecutive edges
            for pair in cuts.chunks_exact(2) {
                segs.push([pair[0], pair[1]]);
            }
        }
    }
    segs
}

/// Filled decile bands of the density with isolines at the band edges,
/// and optional polylines (e.g. the curves) drawn on top.
pub fn density_svg(grid: &Grid, overlays: &[Vec<[f64; 2]>]) -> String {
    let frame = Frame::new(grid.bbox, 600.0);
    let levels = decile_levels(grid);
    let (dx, dy) = grid.cell_size();
    let (cw, ch) = (
        dx / (grid.bbox[2] - grid.bbox[0]) * frame.width,
        dy / (grid.bbox[3] - grid.bbox[1]) * frame.height,
    );
    let mut paths = vec![String::new(); 10];
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let band = band_of(grid.at(ix, iy).exp(), &levels);
            let c = grid.center(ix, iy);
            let (x, y) = frame.map([c[0] - 0.5 * dx, c[1] + 0.5 * dy]);
            let _ = write!(paths[band], "M{x:.3} {y:.3}h{cw:.3}v{ch:.3}h{:.3}z", -cw);
        }
    }
    let mut svg = frame.open();
    for (band, d) in paths.iter().enumerate() {
        if !d.is_empty() {
            let _ = writeln!(
                svg,
                "<path class=\"band\" data-band=\"{band}\" fill=\"{}\" d=\"{d}\"/>",
                gray(band)
            );
        }
    }
    for (q, &level) in levels.iter().enumerate() {
        let mut d = String::new();
        for [a, b] in isoline(grid, level) {
            let (x0, y0) = frame.map(a);
            let (x1, y1) = frame.map(b);
            let _ = write!(d, "M{x0:.3} {y0:.3}L{x1:.3} {y1:.3}");
        }
        if !d.is_empty() {
            let _ = writeln!(
                svg,
                "<path class=\"level\" data-level=\"{}\" data-density=\"{level:e}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.6\" d=\"{d}\"/>",
                q + 1
            );
        }
    }
    push_polylines(&mut svg, &frame, overlays, "#c0392b");
    svg.push_str("</svg>\n");
    svg
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn push_polylines(svg: &mut String, frame: &Frame, lines: &[Vec<[f64; 2]>], color: &str) {
    for line in lines {
        let pts: Vec<String> = line
            .iter()
            .map(|&p| {
                let (x, y) = frame.map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            svg,
            "<polyline class=\"curve\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            pts.join(" ")
        );
    }
}

/// Points colored by label, with one closed polyline per fitted curve.
pub fn clusters_svg(points: &[[f64; 2]], labels: &[usize], curves: &[Vec<[f64; 2]>], bbox: BBox) -> String {
    let frame = Frame::new(bbox, 600.0);
    let mut svg = frame.open();
    for (p, &l) in points.iter().zip(labels) {
        let (x, y) = frame.map(*p);
        let _ = writeln!(
            svg,
            "<circle class=\"point\" data-label=\"{l}\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"1.6\" fill=\"{}\"/>",
            PALETTE[l % PALETTE.len()]
        );
    }
    push_polylines(&mut svg, &frame, curves, "black");
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_grid() -> Grid {
        density_grid(
            |x| -(2.0 * std::f64::consts::PI).ln() - 0.5 * (x[0] * x[0] + x[1] * x[1]),
            [-6.0, -6.0, 6.0, 6.0],
            120,
            120,
        )
        .unwrap()
    }

    #[test]
    fn standard_normal_grid_integrates_to_one() {
        assert!((gauss_grid().integral() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn isolines_of_isotropic_density_are_circles() {
        let g = gauss_grid();
        let (dx, _) = g.cell_size();
        for level in decile_levels(&g) {
            let r = (-2.0 * (level * 2.0 * std::f64::consts::PI).ln()).sqrt();
            for [a, _] in isoline(&g, level) {
                assert!(((a[0] * a[0] + a[1] * a[1]).sqrt() - r).abs() < dx, "level {level}");
            }
        }
    }

    #[test]
    fn degenerate_bbox_rejected() {
        assert!(density_grid(|_| 0.0, [0.0, 0.0, 0.0, 1.0], 10, 10).is_err());
    }

    #[test]
    fn svg_has_bands() {
        let svg = density_svg(&gauss_grid(), &[]);
        assert!(svg.contains("class=\"band\" data-band=\"9\""));
        assert!(svg.contains("class=\"level\""));
    }
}
