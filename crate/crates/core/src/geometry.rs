//! Spatial layout: Poisson node placement, hexagonal cells and reuse coloring.
//!
//! The simulation plane is a finite rectangle anchored at the origin. The
//! hexagonal lattice (pointy-top, axial coordinates) is anchored so that one
//! cell center coincides with the center of the region; cells on the border
//! are truncated by the rectangle.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{FlccError, Result};
use crate::rng::{self, SimRng};

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle `[0, width] x [0, height]`, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    width: f64,
    height: f64,
}

impl Region {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(FlccError::param("width", format!("must be > 0, got {width}")));
        }
        if !(height > 0.0 && height.is_finite()) {
            return Err(FlccError::param("height", format!("must be > 0, got {height}")));
        }
        Ok(Region { width, height })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> Point {
        Point::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

/// Node intensity of the Poisson point process, in nodes per square meter.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Intensity(f64);

impl Intensity {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(FlccError::param("lambda", format!("must be >= 0, got {lambda}")));
        }
        Ok(Intensity(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Honest,
    Untrusted,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Honest => f.write_str("honest"),
            Role::Untrusted => f.write_str("untrusted"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSite {
    pub id: usize,
    pub position: Point,
    /// Populated by [`assign_cells`].
    pub cell_id: Option<usize>,
    pub role: Role,
    /// Transmit power in watts.
    pub tx_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: usize,
    /// Axial lattice coordinates `(q, r)` relative to the anchor cell.
    pub axial: (i32, i32),
    /// Cell center, which is also where the cell's server sits.
    pub center: Point,
    pub channel: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellPlan {
    pub region: Region,
    pub cells: Vec<Cell>,
    /// Hexagon circumradius in meters.
    pub cell_radius: f64,
    /// Number of carrier channels; zero until frequencies are assigned.
    pub num_channels: usize,
    /// Set when the channel budget could not separate every pair of cells
    /// within reuse distance.
    pub reuse_warning: bool,
    index: HashMap<(i32, i32), usize>,
}

impl CellPlan {
    pub fn cell(&self, id: usize) -> Option<&Cell> {
        self.cells.get(id)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn channel_of(&self, id: usize) -> Option<usize> {
        self.cells.get(id).and_then(|c| c.channel)
    }

    pub fn cell_at_axial(&self, axial: (i32, i32)) -> Option<usize> {
        self.index.get(&axial).copied()
    }

    fn anchor(&self) -> Point {
        self.region.center()
    }

    /// Whether `p` lies inside (or on the border of) the hexagon of `cell_id`.
    pub fn hexagon_contains(&self, cell_id: usize, p: &Point) -> bool {
        let cell = &self.cells[cell_id];
        hexagon_contains(&cell.center, self.cell_radius, p)
    }

    /// Cell whose hexagon contains `p`; boundary ties go to the lowest id.
    pub fn locate(&self, p: &Point) -> Option<usize> {
        let guess = axial_round(pixel_to_axial(p, &self.anchor(), self.cell_radius));
        let tol = 1e-9 * self.cell_radius;
        let mut best: Option<(usize, f64)> = None;
        for (dq, dr) in std::iter::once((0, 0)).chain(AXIAL_NEIGHBORS) {
            let Some(&id) = self.index.get(&(guess.0 + dq, guess.1 + dr)) else {
                continue;
            };
            let d = self.cells[id].center.distance(p);
            best = match best {
                None => Some((id, d)),
                Some((bid, bd)) if d < bd - tol || ((d - bd).abs() <= tol && id < bid) => {
                    Some((id, d))
                }
                keep => keep,
            };
        }
        best.map(|(id, _)| id)
            .filter(|&id| hexagon_contains(&self.cells[id].center, self.cell_radius * (1.0 + 1e-9), p))
    }
}

const AXIAL_NEIGHBORS: [(i32, i32); 6] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];

fn axial_to_pixel(q: i32, r: i32, anchor: &Point, radius: f64) -> Point {
    Point::new(
        anchor.x + radius * SQRT3 * (q as f64 + r as f64 / 2.0),
        anchor.y + radius * 1.5 * r as f64,
    )
}

fn pixel_to_axial(p: &Point, anchor: &Point, radius: f64) -> (f64, f64) {
    let x = p.x - anchor.x;
    let y = p.y - anchor.y;
    let q = (SQRT3 / 3.0 * x - y / 3.0) / radius;
    let r = (2.0 / 3.0 * y) / radius;
    (q, r)
}

fn axial_round((q, r): (f64, f64)) -> (i32, i32) {
    let s = -q - r;
    let (mut rq, mut rr, rs) = (q.round(), r.round(), s.round());
    let (dq, dr, ds) = ((rq - q).abs(), (rr - r).abs(), (rs - s).abs());
    if dq > dr && dq > ds {
        rq = -rr - rs;
    } else if dr > ds {
        rr = -rq - rs;
    }
    (rq as i32, rr as i32)
}

/// Hex-grid step distance between two axial coordinates.
pub fn axial_distance(a: (i32, i32), b: (i32, i32)) -> i32 {
    let dq = a.0 - b.0;
    let dr = a.1 - b.1;
    (dq.abs() + dr.abs() + (dq + dr).abs()) / 2
}

/// Point-in-hexagon test for a pointy-top hexagon (border inclusive).
pub fn hexagon_contains(center: &Point, radius: f64, p: &Point) -> bool {
    let apothem = radius * SQRT3 / 2.0;
    let dx = p.x - center.x;
    let dy = p.y - center.y;
    EDGE_NORMALS
        .iter()
        .all(|(nx, ny)| (dx * nx + dy * ny).abs() <= apothem * (1.0 + 1e-12) + 1e-12)
}

// Pointy-top hexagons have vertical left/right edges.
const EDGE_NORMALS: [(f64, f64); 3] = [(1.0, 0.0), (0.5, SQRT3 / 2.0), (-0.5, SQRT3 / 2.0)];

pub fn hexagon_vertices(center: &Point, radius: f64) -> [Point; 6] {
    std::array::from_fn(|k| {
        let theta = std::f64::consts::PI / 6.0 + k as f64 * std::f64::consts::PI / 3.0;
        Point::new(center.x + radius * theta.cos(), center.y + radius * theta.sin())
    })
}

/// Separating-axis test: does the hexagon overlap the region with positive area?
fn hexagon_overlaps_region(center: &Point, radius: f64, region: &Region) -> bool {
    let verts = hexagon_vertices(center, radius);
    let rect = [
        Point::new(0.0, 0.0),
        Point::new(region.width, 0.0),
        Point::new(region.width, region.height),
        Point::new(0.0, region.height),
    ];
    let eps = 1e-9 * radius.min(region.width).min(region.height);
    let axes = EDGE_NORMALS.iter().copied().chain([(0.0, 1.0)]);
    for (ax, ay) in axes {
        let project = |pts: &[Point]| {
            pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let v = p.x * ax + p.y * ay;
                (lo.min(v), hi.max(v))
            })
        };
        let (a0, a1) = project(&verts);
        let (b0, b1) = project(&rect);
        if a1.min(b1) - a0.max(b0) <= eps {
            return false;
        }
    }
    true
}

/// Draws a homogeneous PPP of intensity `lambda` over `region`.
///
/// Each node is independently marked untrusted with probability
/// `untrusted_fraction`. Cells are left unassigned.
pub fn sample_ppp(
    lambda: Intensity,
    region: &Region,
    untrusted_fraction: f64,
    tx_power: f64,
    seed: u64,
) -> Result<Vec<NodeSite>> {
    let mut rng = rng::substream(seed, &[rng::domain::LAYOUT]);
    let mean = lambda.value() * region.area();
    let count = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| FlccError::param("lambda", e.to_string()))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    place_nodes(count, region, untrusted_fraction, tx_power, &mut rng)
}

/// PPP conditioned on exactly `count` points, of which exactly
/// `round(untrusted_fraction * count)` are untrusted: i.i.d. uniform
/// positions with the untrusted subset drawn uniformly.
pub fn sample_fixed_count(
    count: usize,
    region: &Region,
    untrusted_fraction: f64,
    tx_power: f64,
    seed: u64,
) -> Result<Vec<NodeSite>> {
    let mut rng = rng::substream(seed, &[rng::domain::LAYOUT]);
    let mut nodes = place_nodes(count, region, untrusted_fraction, tx_power, &mut rng)?;
    let untrusted = (untrusted_fraction * count as f64).round() as usize;
    for n in &mut nodes {
        n.role = Role::Honest;
    }
    for i in rand::seq::index::sample(&mut rng, count, untrusted) {
        nodes[i].role = Role::Untrusted;
    }
    Ok(nodes)
}

fn place_nodes(
    count: usize,
    region: &Region,
    untrusted_fraction: f64,
    tx_power: f64,
    rng: &mut SimRng,
) -> Result<Vec<NodeSite>> {
    if !(0.0..=1.0).contains(&untrusted_fraction) {
        return Err(FlccError::param(
            "untrusted_fraction",
            format!("must lie in [0, 1], got {untrusted_fraction}"),
        ));
    }
    if !(tx_power > 0.0 && tx_power.is_finite()) {
        return Err(FlccError::param("tx_power", format!("must be > 0, got {tx_power}")));
    }
    Ok((0..count)
        .map(|id| {
            let position = Point::new(
                rng.gen::<f64>() * region.width,
                rng.gen::<f64>() * region.height,
            );
            let role = if rng.gen::<f64>() < untrusted_fraction {
                Role::Untrusted
            } else {
                Role::Honest
            };
            NodeSite {
                id,
                position,
                cell_id: None,
                role,
                tx_power,
            }
        })
        .collect())
}

/// Hexagonal tessellation of `region`: every lattice hexagon that overlaps the
/// region with positive area becomes a cell. Ids are dense, ordered by row
/// then column.
pub fn build_hex_tessellation(region: &Region, cell_radius: f64) -> Result<CellPlan> {
    if !(cell_radius > 0.0 && cell_radius.is_finite()) {
        return Err(FlccError::param(
            "cell_radius",
            format!("must be > 0, got {cell_radius}"),
        ));
    }
    let anchor = region.center();
    let half_h = region.height / 2.0;
    let half_w = region.width / 2.0;
    let r_max = ((half_h + cell_radius) / (1.5 * cell_radius)).ceil() as i32 + 1;
    let q_span = ((half_w + cell_radius) / (SQRT3 * cell_radius)).ceil() as i32 + 1;

    let mut cells = Vec::new();
    let mut index = HashMap::new();
    for r in -r_max..=r_max {
        let shift = -(r as f64 / 2.0).floor() as i32;
        for q in (shift - q_span - 1)..=(shift + q_span + 1) {
            let center = axial_to_pixel(q, r, &anchor, cell_radius);
            if hexagon_overlaps_region(&center, cell_radius, region) {
                let id = cells.len();
                index.insert((q, r), id);
                cells.push(Cell {
                    id,
                    axial: (q, r),
                    center,
                    channel: None,
                });
            }
        }
    }
    Ok(CellPlan {
        region: *region,
        cells,
        cell_radius,
        num_channels: 0,
        reuse_warning: false,
        index,
    })
}

/// Reuse-7 channel from axial coordinates: any two cells within two hex
/// steps get different channels, and co-channel centers are at least
/// `sqrt(21) * radius` apart.
pub fn reuse7_channel(axial: (i32, i32)) -> usize {
    (axial.0 + 3 * axial.1).rem_euclid(7) as usize
}

/// Reuse patterns `(a, b, k)`: channel `(a*q + b*r) mod k` keeps adjacent
/// cells apart. Only `k = 7` also separates cells two steps apart.
const REUSE_PATTERNS: [(i32, i32, usize); 3] = [(1, 3, 7), (1, 2, 4), (1, -1, 3)];

fn pattern_channel(axial: (i32, i32), (a, b, k): (i32, i32, usize)) -> usize {
    (a * axial.0 + b * axial.1).rem_euclid(k as i32) as usize
}

/// Assigns carrier channels so that cells whose centers are within
/// `2 * sqrt(3) * cell_radius` (two hex steps) differ.
///
/// Seven channels use the classic reuse-7 pattern. Other budgets use greedy
/// lowest-available coloring in id order; if that clashes, the largest reuse
/// pattern that fits the budget is used instead (reuse-7 when `n > 7`, so the
/// separation guarantee holds for every `n >= 7`). Budgets below seven cannot
/// separate second-ring cells and raise `reuse_warning`.
pub fn assign_frequencies(plan: &CellPlan, num_channels: usize) -> Result<CellPlan> {
    if num_channels == 0 {
        return Err(FlccError::param("num_channels", "must be >= 1"));
    }
    let mut out = plan.clone();
    out.num_channels = num_channels;

    let channels: Vec<usize> = if num_channels == 7 {
        out.cells.iter().map(|c| reuse7_channel(c.axial)).collect()
    } else {
        let greedy = greedy_coloring(&out, num_channels);
        if count_clashes(&out, &greedy) == 0 {
            greedy
        } else if let Some(&pattern) = REUSE_PATTERNS.iter().find(|p| p.2 <= num_channels) {
            out.cells.iter().map(|c| pattern_channel(c.axial, pattern)).collect()
        } else {
            greedy
        }
    };
    out.reuse_warning = count_clashes(&out, &channels) > 0;
    for (cell, ch) in out.cells.iter_mut().zip(channels) {
        cell.channel = Some(ch);
    }
    Ok(out)
}

fn greedy_coloring(plan: &CellPlan, num_channels: usize) -> Vec<usize> {
    let mut assigned: Vec<usize> = Vec::with_capacity(plan.cells.len());
    for cell in &plan.cells {
        let mut cost = vec![0u64; num_channels];
        for (other, &ch) in assigned.iter().enumerate() {
            match axial_distance(cell.axial, plan.cells[other].axial) {
                1 => cost[ch] += 1000,
                2 => cost[ch] += 1,
                _ => {}
            }
        }
        let best = (0..num_channels)
            .min_by_key(|&ch| (cost[ch], ch))
            .expect("num_channels >= 1");
        assigned.push(best);
    }
    assigned
}

/// Pairs of cells within two hex steps that share a channel.
fn count_clashes(plan: &CellPlan, channels: &[usize]) -> usize {
    let mut clashes = 0;
    for (i, a) in plan.cells.iter().enumerate() {
        for (j, b) in plan.cells.iter().enumerate().skip(i + 1) {
            if channels[i] == channels[j] && axial_distance(a.axial, b.axial) <= 2 {
                clashes += 1;
            }
        }
    }
    clashes
}

/// Sets each node's `cell_id` to the cell whose hexagon contains it.
pub fn assign_cells(nodes: &[NodeSite], plan: &CellPlan) -> Result<Vec<NodeSite>> {
    nodes
        .iter()
        .map(|n| {
            let cell = plan.locate(&n.position).ok_or_else(|| {
                FlccError::InvalidLayout(format!(
                    "node {} at ({}, {}) is outside every cell",
                    n.id, n.position.x, n.position.y
                ))
            })?;
            Ok(NodeSite {
                cell_id: Some(cell),
                ..n.clone()
            })
        })
        .collect()
}

/// Distance from a node to its cell server; `None` before cell assignment.
pub fn server_distance(node: &NodeSite, plan: &CellPlan) -> Option<f64> {
    node.cell_id
        .and_then(|c| plan.cell(c))
        .map(|c| c.center.distance(&node.position))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nearest_brute(plan: &CellPlan, p: &Point) -> usize {
        let mut best = (0usize, f64::INFINITY);
        for c in &plan.cells {
            let d = c.center.distance(p);
            if d < best.1 - 1e-9 * plan.cell_radius {
                best = (c.id, d);
            }
        }
        best.0
    }

    #[test]
    fn zero_intensity_is_empty() {
        let region = Region::new(100.0, 100.0).unwrap();
        let nodes = sample_ppp(Intensity::new(0.0).unwrap(), &region, 0.2, 1.0, 3).unwrap();
        assert!(nodes.is_empty());
    }

    #[test]
    fn ppp_count_mean_and_variance() {
        // lambda * area = 10; Poisson mean and variance both 10.
        let region = Region::new(100.0, 100.0).unwrap();
        let lambda = Intensity::new(0.001).unwrap();
        let seeds = 10_000u64;
        let counts: Vec<f64> = (0..seeds)
            .map(|s| sample_ppp(lambda, &region, 0.0, 1.0, s).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / seeds as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64;
        let sigma = (10.0f64).sqrt() / 100.0;
        assert!((mean - 10.0).abs() <= 3.0 * sigma, "mean {mean}");
        // Var of sample variance for Poisson(10) ~ (mu + 2 mu^2)/n.
        let var_sigma = ((10.0 + 2.0 * 100.0) / seeds as f64).sqrt();
        assert!((var - 10.0).abs() <= 4.0 * var_sigma, "variance {var}");
    }

    #[test]
    fn ppp_nodes_inside_region_with_dense_ids() {
        let region = Region::new(50.0, 20.0).unwrap();
        let nodes = sample_ppp(Intensity::new(0.1).unwrap(), &region, 0.3, 2.0, 11).unwrap();
        assert!(!nodes.is_empty());
        for (i, n) in nodes.iter().enumerate() {
            assert_eq!(n.id, i);
            assert!(region.contains(&n.position));
            assert_eq!(n.tx_power, 2.0);
        }
        let untrusted = nodes.iter().filter(|n| n.role == Role::Untrusted).count() as f64;
        let frac = untrusted / nodes.len() as f64;
        assert!((frac - 0.3).abs() < 0.08, "untrusted fraction {frac}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Region::new(0.0, 1.0).is_err());
        assert!(Intensity::new(-1.0).is_err());
        let region = Region::new(1.0, 1.0).unwrap();
        assert!(build_hex_tessellation(&region, 0.0).is_err());
        assert!(build_hex_tessellation(&region, -3.0).is_err());
        assert!(sample_ppp(Intensity::new(1.0).unwrap(), &region, 1.5, 1.0, 0).is_err());
    }

    #[test]
    fn tiny_region_single_cell() {
        let region = Region::new(1.0, 1.0).unwrap();
        let plan = build_hex_tessellation(&region, 10.0).unwrap();
        assert_eq!(plan.len(), 1);
        let plan = assign_frequencies(&plan, 7).unwrap();
        assert_eq!(plan.cells[0].channel, Some(0));
        let plan = assign_frequencies(&plan, 3).unwrap();
        assert_eq!(plan.cells[0].channel, Some(0));
        assert!(!plan.reuse_warning);
    }

    #[test]
    fn cell_count_matches_brute_force_scan() {
        // Brute force: enumerate a generous window of lattice hexagons and
        // keep those that contain at least one point of a fine grid over the
        // region (1 m grid plus the region border).
        let region = Region::new(100.0, 100.0).unwrap();
        let radius = 20.0;
        let plan = build_hex_tessellation(&region, radius).unwrap();
        let anchor = region.center();
        let mut hit = std::collections::BTreeSet::new();
        for ix in 0..=200 {
            for iy in 0..=200 {
                let p = Point::new(ix as f64 * 0.5, iy as f64 * 0.5);
                for q in -8..=8 {
                    for r in -8..=8 {
                        let c = axial_to_pixel(q, r, &anchor, radius);
                        if hexagon_contains(&c, radius * (1.0 - 1e-9), &p) {
                            hit.insert((q, r));
                        }
                    }
                }
            }
        }
        let planned: std::collections::BTreeSet<_> = plan.cells.iter().map(|c| c.axial).collect();
        assert_eq!(planned, hit);
    }

    #[test]
    fn every_point_in_exactly_one_cell() {
        let region = Region::new(100.0, 100.0).unwrap();
        let plan = build_hex_tessellation(&region, 20.0).unwrap();
        let mut rng = rng::substream(5, &[]);
        for _ in 0..10_000 {
            let p = Point::new(rng.gen::<f64>() * 100.0, rng.gen::<f64>() * 100.0);
            let inside: Vec<usize> = plan
                .cells
                .iter()
                .filter(|c| hexagon_contains(&c.center, 20.0, &p))
                .map(|c| c.id)
                .collect();
            assert_eq!(inside.len(), 1, "point {p:?} in {inside:?}");
            assert_eq!(plan.locate(&p), Some(inside[0]));
        }
    }

    #[test]
    fn node_at_center_and_on_shared_edge() {
        let region = Region::new(100.0, 100.0).unwrap();
        let plan = build_hex_tessellation(&region, 20.0).unwrap();
        let c = plan.cells[3].center;
        assert_eq!(plan.locate(&c), Some(3));

        // Midpoint between two horizontally adjacent centers lies on their
        // shared vertical edge.
        let a = plan.cell_at_axial((0, 0)).unwrap();
        let b = plan.cell_at_axial((1, 0)).unwrap();
        let ca = plan.cells[a].center;
        let cb = plan.cells[b].center;
        let mid = Point::new((ca.x + cb.x) / 2.0, (ca.y + cb.y) / 2.0);
        assert!(plan.hexagon_contains(a, &mid) && plan.hexagon_contains(b, &mid));
        assert_eq!(plan.locate(&mid), Some(a.min(b)));
    }

    #[test]
    fn assignment_matches_nearest_center() {
        let region = Region::new(100.0, 100.0).unwrap();
        let plan = build_hex_tessellation(&region, 20.0).unwrap();
        let nodes = sample_fixed_count(1000, &region, 0.0, 1.0, 9).unwrap();
        let assigned = assign_cells(&nodes, &plan).unwrap();
        for n in &assigned {
            assert_eq!(n.cell_id, Some(nearest_brute(&plan, &n.position)));
            let d = server_distance(n, &plan).unwrap();
            assert!(d <= 20.0 + 1e-9);
        }
    }

    #[test]
    fn fixed_count_marks_exact_fraction() {
        let region = Region::new(150.0, 150.0).unwrap();
        for seed in 0..20 {
            let nodes = sample_fixed_count(20, &region, 0.2, 1.0, seed).unwrap();
            assert_eq!(nodes.len(), 20);
            assert_eq!(nodes.iter().filter(|n| n.role == Role::Untrusted).count(), 4);
        }
    }

    #[test]
    fn square_of_three_radii_holds_seven_cells() {
        let region = Region::new(150.0, 150.0).unwrap();
        let plan = assign_frequencies(&build_hex_tessellation(&region, 50.0).unwrap(), 7).unwrap();
        assert_eq!(plan.len(), 7);
        let mut chans: Vec<usize> = plan.cells.iter().map(|c| c.channel.unwrap()).collect();
        chans.sort_unstable();
        assert_eq!(chans, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn seven_cell_flower_gets_distinct_channels() {
        let region = Region::new(1000.0, 1000.0).unwrap();
        let plan = build_hex_tessellation(&region, 20.0).unwrap();
        let plan = assign_frequencies(&plan, 7).unwrap();
        let center = plan.cell_at_axial((0, 0)).unwrap();
        let mut chans = vec![plan.channel_of(center).unwrap()];
        for (dq, dr) in AXIAL_NEIGHBORS {
            chans.push(plan.channel_of(plan.cell_at_axial((dq, dr)).unwrap()).unwrap());
        }
        chans.sort_unstable();
        assert_eq!(chans, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn reuse7_separation_exhaustive() {
        let region = Region::new(100.0, 100.0).unwrap();
        let radius = 20.0;
        let plan = assign_frequencies(&build_hex_tessellation(&region, radius).unwrap(), 7).unwrap();
        let mut min_cochannel = f64::INFINITY;
        for a in &plan.cells {
            for b in &plan.cells {
                if a.id >= b.id {
                    continue;
                }
                let d = a.center.distance(&b.center);
                if d <= 2.0 * SQRT3 * radius + 1e-9 {
                    assert_ne!(a.channel, b.channel, "cells {} and {}", a.id, b.id);
                }
                if a.channel == b.channel {
                    min_cochannel = min_cochannel.min(d);
                }
            }
        }
        assert!(min_cochannel >= 21f64.sqrt() * radius - 1e-9, "{min_cochannel}");
    }

    #[test]
    fn greedy_coloring_with_more_channels_is_proper() {
        let region = Region::new(300.0, 300.0).unwrap();
        let plan = build_hex_tessellation(&region, 20.0).unwrap();
        for n in [8, 9, 12, 19] {
            let colored = assign_frequencies(&plan, n).unwrap();
            assert!(!colored.reuse_warning);
            for a in &colored.cells {
                assert!(a.channel.unwrap() < n);
                for b in &colored.cells {
                    if a.id != b.id && axial_distance(a.axial, b.axial) <= 2 {
                        assert_ne!(a.channel, b.channel);
                    }
                }
            }
        }
    }

    #[test]
    fn too_few_channels_warns_but_keeps_neighbors_apart() {
        let region = Region::new(200.0, 200.0).unwrap();
        let plan = build_hex_tessellation(&region, 20.0).unwrap();
        let colored = assign_frequencies(&plan, 3).unwrap();
        assert!(colored.reuse_warning);
        // Three colors still suffice for the plain adjacency graph.
        for a in &colored.cells {
            for b in &colored.cells {
                if axial_distance(a.axial, b.axial) == 1 {
                    assert_ne!(a.channel, b.channel);
                }
            }
        }
        assert!(assign_frequencies(&plan, 0).is_err());
    }

    #[test]
    fn same_seed_same_layout() {
        let region = Region::new(100.0, 100.0).unwrap();
        let lambda = Intensity::new(0.01).unwrap();
        let a = sample_ppp(lambda, &region, 0.2, 1.0, 42).unwrap();
        let b = sample_ppp(lambda, &region, 0.2, 1.0, 42).unwrap();
        assert_eq!(a, b);
    }
}
