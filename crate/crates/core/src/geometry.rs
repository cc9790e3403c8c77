//! District geometry: the hexagonal eNodeB layout, the two static labelings
//! used as traditional-EPS baselines, and uniform UE placement.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::domain::Scenario;
use crate::error::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Planar position in km, centred on the district.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Polar angle in [0, 2π).
    pub fn angle(&self) -> f64 {
        let a = self.y.atan2(self.x);
        if a < 0.0 {
            a + TAU
        } else {
            a
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistrictLayout {
    pub radius_km: f64,
    pub intersite_km: f64,
    pub sites: Vec<Point>,
    /// Owner of each site under the demand-proportional static assignment.
    pub static_labels_demand: Option<Vec<usize>>,
    /// Owner of each site under the UE-proportional static assignment.
    pub static_labels_ue: Option<Vec<usize>>,
}

impl DistrictLayout {
    /// Layout for `scenario` with both static labelings attached.
    pub fn for_scenario(scenario: &Scenario, intersite_km: f64) -> Result<Self> {
        let mut layout = generate_layout(scenario.n_enodebs(), scenario.radius_km(), intersite_km);
        layout.static_labels_demand = Some(label_static(&layout, &demand_based_counts(scenario))?);
        layout.static_labels_ue = Some(label_static(&layout, &ue_based_counts(scenario))?);
        Ok(layout)
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// Strict-mode check that every site lies inside the district disk.
    pub fn check_containment(&self) -> Result<()> {
        for (k, s) in self.sites.iter().enumerate() {
            if s.norm() > self.radius_km + 1e-9 {
                return Err(Error::Scenario(format!(
                    "eNodeB {} at {:.3} km lies outside the {} km district",
                    k + 1,
                    s.norm(),
                    self.radius_km
                )));
            }
        }
        Ok(())
    }
}

/// The `n_sites` points of a hexagonal lattice (spacing `intersite_km`, one
/// axis horizontal, a point at the origin) closest to the district centre.
///
/// Ordering is by exact lattice norm `a² + ab + b²`, then polar angle, then
/// generation order, so the result is bit-reproducible.
pub fn generate_layout(n_sites: usize, radius_km: f64, intersite_km: f64) -> DistrictLayout {
    // Smallest hex ring count whose full hexagon holds n_sites; its Euclidean
    // radius bounds the n-th closest point, and |a|,|b| <= 2r+2 covers it.
    let mut rings = 0i64;
    while 3 * rings * (rings + 1) + 1 < n_sites as i64 {
        rings += 1;
    }
    let span = 2 * rings + 2;

    let mut candidates = Vec::new();
    for b in -span..=span {
        for a in -span..=span {
            let norm = a * a + a * b + b * b;
            let p = Point::new(
                intersite_km * (a as f64 + 0.5 * b as f64),
                intersite_km * b as f64 * SQRT_3 / 2.0,
            );
            candidates.push((norm, p.angle(), candidates.len(), p));
        }
    }
    candidates.sort_by(|x, y| {
        x.0.cmp(&y.0)
            .then_with(|| x.1.total_cmp(&y.1))
            .then_with(|| x.2.cmp(&y.2))
    });

    DistrictLayout {
        radius_km,
        intersite_km,
        sites: candidates.into_iter().take(n_sites).map(|c| c.3).collect(),
        static_labels_demand: None,
        static_labels_ue: None,
    }
}

/// Spreads `counts[i]` labels of each operator over the sites.
///
/// Sites are visited by (distance, polar angle) and labels are issued by
/// smooth weighted round-robin, which emits operator i exactly `counts[i]`
/// times per cycle and interleaves operators as evenly as the weights allow.
pub fn label_static(layout: &DistrictLayout, counts: &[usize]) -> Result<Vec<usize>> {
    let n = layout.n_sites();
    let total: usize = counts.iter().sum();
    if total != n {
        return Err(Error::Scenario(format!(
            "static site counts sum to {total}, layout has {n} eNodeBs"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| {
        let (sp, sq) = (&layout.sites[p], &layout.sites[q]);
        (sp.x * sp.x + sp.y * sp.y)
            .total_cmp(&(sq.x * sq.x + sq.y * sq.y))
            .then_with(|| sp.angle().total_cmp(&sq.angle()))
            .then_with(|| p.cmp(&q))
    });

    let weights: Vec<i64> = counts.iter().map(|&c| c as i64).collect();
    let mut current = vec![0i64; counts.len()];
    let mut labels = vec![0; n];
    for &site in &order {
        for (c, w) in current.iter_mut().zip(&weights) {
            *c += w;
        }
        let pick = (0..counts.len())
            .filter(|&i| weights[i] > 0)
            .max_by(|&p, &q| current[p].cmp(&current[q]).then(q.cmp(&p)))
            .expect("total > 0 implies a positive weight");
        current[pick] -= total as i64;
        labels[site] = pick;
    }
    Ok(labels)
}

/// Largest-remainder apportionment of `total` seats by `weights`.
/// Remainder ties go to the lower index.
pub fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() {
        return Vec::new();
    }
    if sum <= 0.0 {
        return apportion(&vec![1.0; weights.len()], total);
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut seats: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = total - seats.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..weights.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.partial_cmp(&ra).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    for &i in by_remainder.iter().cycle() {
        if left == 0 {
            break;
        }
        seats[i] += 1;
        left -= 1;
    }
    seats
}

/// Site counts proportional to UE counts (9/16/6 for the reference scenario).
pub fn ue_based_counts(scenario: &Scenario) -> Vec<usize> {
    let weights: Vec<f64> = scenario.mos().iter().map(|m| m.ue_count as f64).collect();
    apportion(&weights, scenario.n_enodebs())
}

/// Site counts proportional to mean demand (12/18/1 for the reference scenario).
///
/// Each best-effort operator is given a single eNodeB when the pool is large
/// enough; QoS-aware operators share the rest in proportion to the midpoint
/// of their demand range.
pub fn demand_based_counts(scenario: &Scenario) -> Vec<usize> {
    let n = scenario.n_enodebs();
    let qos = scenario.qos_set();
    let be = scenario.be_set();
    let mut counts = vec![0; scenario.mo_count()];
    if qos.is_empty() || n <= be.len() {
        let even = apportion(&vec![1.0; scenario.mo_count()], n);
        return even;
    }
    for &i in &be {
        counts[i] = 1;
    }
    let weights: Vec<f64> = qos
        .iter()
        .map(|&i| scenario.mos()[i].demand_range.map_or(0.0, |r| r.mean()))
        .collect();
    for (&i, seats) in qos.iter().zip(apportion(&weights, n - be.len())) {
        counts[i] = seats;
    }
    counts
}

/// UE positions per operator and the site each UE is attached to.
#[derive(Debug, Clone, PartialEq)]
pub struct UePlacement {
    pub positions: Vec<Vec<Point>>,
    /// Serving site of each UE, same shape as `positions`.
    pub association: Vec<Vec<usize>>,
}

impl UePlacement {
    pub fn n_ues(&self) -> usize {
        self.positions.iter().map(Vec::len).sum()
    }

    /// (operator, position, serving site) for every UE, operator-major.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Point, usize)> + '_ {
        self.positions
            .iter()
            .enumerate()
            .flat_map(move |(i, ps)| ps.iter().zip(&self.association[i]).map(move |(&p, &a)| (i, p, a)))
    }
}

/// Index of the site with the highest mean channel gain, i.e. the nearest
/// one. Ties go to the lower index.
pub fn nearest_site(sites: &[Point], p: &Point) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, s) in sites.iter().enumerate() {
        let d = s.distance(p);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Drops every operator's UEs uniformly over the district disk.
pub fn place_ues<R: Rng + ?Sized>(scenario: &Scenario, layout: &DistrictLayout, rng: &mut R) -> UePlacement {
    let radius = layout.radius_km;
    let mut positions = Vec::with_capacity(scenario.mo_count());
    let mut association = Vec::with_capacity(scenario.mo_count());
    for mo in scenario.mos() {
        let ps: Vec<Point> = (0..mo.ue_count)
            .map(|_| {
                let r = radius * rng.random::<f64>().sqrt();
                let theta = 2.0 * PI * rng.random::<f64>();
                Point::new(r * theta.cos(), r * theta.sin())
            })
            .collect();
        association.push(ps.iter().map(|p| nearest_site(&layout.sites, p)).collect());
        positions.push(ps);
    }
    UePlacement { positions, association }
}
