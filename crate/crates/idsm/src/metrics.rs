//! Support, Jaccard and centroid metrics against the scenario truth.

use std::fmt::Write as _;

use idsm_core::idsm::{SegmentCounters, SegmentReport};
use idsm_core::scenario::Scenario;
use idsm_core::{CellField, Mesh};

use crate::error::{Error, Result};

/// Fraction of the per-component maximum that marks a cell as support.
pub const SUPPORT_RATIO: f64 = 0.5;

/// Cells with `|v| ≥ ratio · max |v|`; empty when the field vanishes.
pub fn threshold_support(values: &[f64], ratio: f64) -> Vec<bool> {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return vec![false; values.len()];
    }
    values.iter().map(|v| v.abs() >= ratio * max).collect()
}

/// Area-weighted Jaccard index. Two empty sets score 1.
pub fn jaccard(a: &[bool], b: &[bool], areas: &[f64]) -> f64 {
    let (mut inter, mut union) = (0.0, 0.0);
    for ((&x, &y), &w) in a.iter().zip(b).zip(areas) {
        if x && y {
            inter += w;
        }
        if x || y {
            union += w;
        }
    }
    if union == 0.0 {
        1.0
    } else {
        inter / union
    }
}

pub fn area(support: &[bool], areas: &[f64]) -> f64 {
    support.iter().zip(areas).filter(|(s, _)| **s).map(|(_, a)| a).sum()
}

/// Connected pieces of `support` under shared-edge adjacency.
pub fn connected_components(neighbors: &[Vec<usize>], support: &[bool]) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; support.len()];
    let mut out = Vec::new();
    for start in 0..support.len() {
        if !support[start] || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut piece = vec![start];
        label[start] = id;
        let mut head = 0;
        while head < piece.len() {
            let c = piece[head];
            head += 1;
            for &n in &neighbors[c] {
                if support[n] && label[n] == usize::MAX {
                    label[n] = id;
                    piece.push(n);
                }
            }
        }
        piece.sort_unstable();
        out.push(piece);
    }
    out
}

/// Truth comparison of one segment estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthMetrics {
    /// Per component: estimate support against the same component's truth.
    pub jaccard: Vec<f64>,
    /// `cross[l][m]`: estimate component `l` against truth component `m`.
    pub cross: Vec<Vec<f64>>,
    /// Distance from every estimated region's centroid to the nearest true
    /// center of its component.
    pub centroid_errors: Vec<f64>,
    /// Estimated support area per component.
    pub support_area: Vec<f64>,
}

impl TruthMetrics {
    /// Mean centroid error of the segment, `NaN` without regions.
    pub fn centroid_error(&self) -> f64 {
        if self.centroid_errors.is_empty() {
            f64::NAN
        } else {
            self.centroid_errors.iter().sum::<f64>() / self.centroid_errors.len() as f64
        }
    }
}

/// Precomputed geometry for metric evaluation on the coarse mesh.
pub struct Evaluator {
    mesh: Mesh,
    neighbors: Vec<Vec<usize>>,
    centroids: Vec<[f64; 2]>,
}

impl Evaluator {
    pub fn new(mesh: Mesh) -> Self {
        let neighbors = mesh.cell_neighbors();
        let centroids = mesh.centroids();
        Self {
            mesh,
            neighbors,
            centroids,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn supports(&self, field: &CellField) -> Vec<Vec<bool>> {
        (0..field.components)
            .map(|l| threshold_support(field.component(l), SUPPORT_RATIO))
            .collect()
    }

    pub fn truth_supports(&self, scenario: &Scenario, t: f64) -> Result<Vec<Vec<bool>>> {
        let truth = scenario.eval_truth(&self.mesh, t)?;
        Ok((0..truth.components)
            .map(|l| truth.component(l).iter().map(|v| *v != 0.0).collect())
            .collect())
    }

    /// Area centroids of the connected regions of `support`.
    pub fn region_centroids(&self, support: &[bool]) -> Vec<[f64; 2]> {
        let areas = &self.mesh.cell_areas;
        connected_components(&self.neighbors, support)
            .iter()
            .map(|cells| {
                let (mut w, mut x, mut y) = (0.0, 0.0, 0.0);
                for &c in cells {
                    let a = areas[c];
                    w += a;
                    x += a * self.centroids[c][0];
                    y += a * self.centroids[c][1];
                }
                [x / w, y / w]
            })
            .collect()
    }

    pub fn evaluate(&self, scenario: &Scenario, estimate: &CellField, t: f64) -> Result<TruthMetrics> {
        if estimate.components != scenario.components() || estimate.cells != self.mesh.cell_count() {
            return Err(Error::Config(format!(
                "estimate has {} components on {} cells, expected {} on {}",
                estimate.components,
                estimate.cells,
                scenario.components(),
                self.mesh.cell_count()
            )));
        }
        let areas = &self.mesh.cell_areas;
        let est = self.supports(estimate);
        let truth = self.truth_supports(scenario, t)?;
        let same: Vec<f64> = est.iter().zip(&truth).map(|(a, b)| jaccard(a, b, areas)).collect();
        let cross = est
            .iter()
            .map(|a| truth.iter().map(|b| jaccard(a, b, areas)).collect())
            .collect();
        let mut centroid_errors = Vec::new();
        for (l, support) in est.iter().enumerate() {
            let centers: Vec<[f64; 2]> = scenario
                .inclusions
                .iter()
                .filter(|inc| inc.component == l && inc.is_present(t))
                .map(|inc| inc.center_at(t))
                .collect();
            if centers.is_empty() {
                continue;
            }
            for [x, y] in self.region_centroids(support) {
                let d = centers
                    .iter()
                    .map(|[cx, cy]| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min);
                centroid_errors.push(d);
            }
        }
        let support_area = est.iter().map(|s| area(s, areas)).collect();
        Ok(TruthMetrics {
            jaccard: same,
            cross,
            centroid_errors,
            support_area,
        })
    }
}

/// One line of the metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub segment: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub residual: f64,
    pub background_residual: f64,
    pub iterations: usize,
    pub capped: bool,
    pub jaccard: Vec<f64>,
    pub centroid_error: f64,
    pub regions: usize,
    pub counters: SegmentCounters,
}

impl MetricsRow {
    pub fn new(report: &SegmentReport, truth: &TruthMetrics) -> Self {
        Self {
            segment: report.index,
            t_start: report.t_start,
            t_end: report.t_end,
            residual: report.residual,
            background_residual: report.background_residual,
            iterations: report.iterations,
            capped: report.capped,
            jaccard: truth.jaccard.clone(),
            centroid_error: truth.centroid_error(),
            regions: truth.centroid_errors.len(),
            counters: report.counters,
        }
    }
}

pub fn metrics_header(components: usize) -> String {
    let mut s = String::from("segment,t_start,t_end,residual,background_residual,iterations,capped");
    for l in 0..components {
        let _ = write!(s, ",jaccard_{l}");
    }
    s.push_str(",centroid_error,regions,background,adjoint,forward,dirichlet,total");
    s
}

pub fn metrics_line(r: &MetricsRow) -> String {
    let mut s = format!(
        "{},{},{},{},{},{},{}",
        r.segment, r.t_start, r.t_end, r.residual, r.background_residual, r.iterations, r.capped as u8
    );
    for j in &r.jaccard {
        let _ = write!(s, ",{j}");
    }
    let c = &r.counters;
    let _ = write!(
        s,
        ",{},{},{},{},{},{},{}",
        r.centroid_error,
        r.regions,
        c.background,
        c.adjoint,
        c.forward,
        c.dirichlet,
        c.total()
    );
    s
}

pub fn metrics_csv(components: usize, rows: &[MetricsRow]) -> String {
    let mut s = metrics_header(components);
    s.push('\n');
    for r in rows {
        s.push_str(&metrics_line(r));
        s.push('\n');
    }
    s
}

/// Parses a metrics file written by [`metrics_csv`].
pub fn parse_metrics_csv(path: &std::path::Path, text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "empty metrics file"))?;
    let components = header.split(',').filter(|h| h.starts_with("jaccard_")).count();
    if header != metrics_header(components) {
        return Err(Error::format(path, 1, "unexpected metrics header"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ln = i + 2;
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != 7 + components + 7 {
            return Err(Error::format(path, ln, "wrong number of fields"));
        }
        let f = |k: usize| -> Result<f64> {
            toks[k]
                .parse()
                .map_err(|_| Error::format(path, ln, format!("bad number `{}`", toks[k])))
        };
        let u = |k: usize| -> Result<usize> {
            toks[k]
                .parse()
                .map_err(|_| Error::format(path, ln, format!("bad integer `{}`", toks[k])))
        };
        let base = 7 + components;
        rows.push(MetricsRow {
            segment: u(0)?,
            t_start: f(1)?,
            t_end: f(2)?,
            residual: f(3)?,
            background_residual: f(4)?,
            iterations: u(5)?,
            capped: u(6)? != 0,
            jaccard: (0..components).map(|l| f(7 + l)).collect::<Result<_>>()?,
            centroid_error: f(base)?,
            regions: u(base + 1)?,
            counters: SegmentCounters {
                background: u(base + 2)?,
                adjoint: u(base + 3)?,
                forward: u(base + 4)?,
                dirichlet: u(base + 5)?,
            },
        });
    }
    Ok(rows)
}

/// Median of the finite entries, `NaN` when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use idsm_core::mesh::build_disk_mesh;

    #[test]
    fn exact_truth_scores_one_and_zero_scores_zero() {
        let ev = Evaluator::new(build_disk_mesh(1120).unwrap());
        let s = Scenario::builtin("ex1").unwrap();
        let truth = s.eval_truth(ev.mesh(), 1.05).unwrap();
        let m = ev.evaluate(&s, &truth, 1.05).unwrap();
        assert_eq!(m.jaccard, vec![1.0]);
        assert_eq!(m.centroid_errors.len(), 2);
        assert!(m.centroid_errors.iter().all(|e| *e < 0.05), "{:?}", m.centroid_errors);
        let zero = CellField::zeros(1, ev.mesh().cell_count());
        let m = ev.evaluate(&s, &zero, 1.05).unwrap();
        assert_eq!(m.jaccard, vec![0.0]);
        assert!(m.centroid_error().is_nan());
    }

    #[test]
    fn components_follow_edges() {
        let mesh = build_disk_mesh(600).unwrap();
        let n = mesh.cell_neighbors();
        let all = vec![true; mesh.cell_count()];
        assert_eq!(connected_components(&n, &all).len(), 1);
        let c = mesh.centroids();
        let two: Vec<bool> = c.iter().map(|p| p[0].abs() > 0.3).collect();
        assert_eq!(connected_components(&n, &two).len(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let row = MetricsRow {
            segment: 3,
            t_start: 0.30000000000000004,
            t_end: 0.4,
            residual: 0.031,
            background_residual: 0.032,
            iterations: 2,
            capped: false,
            jaccard: vec![0.25, 1.0 / 3.0],
            centroid_error: f64::NAN,
            regions: 0,
            counters: SegmentCounters {
                background: 1,
                adjoint: 2,
                forward: 2,
                dirichlet: 1,
            },
        };
        let text = metrics_csv(2, std::slice::from_ref(&row));
        let back = parse_metrics_csv(std::path::Path::new("m.csv"), &text).unwrap();
        assert_eq!(back.len(), 1);
        assert!(back[0].centroid_error.is_nan());
        let mut a = back[0].clone();
        a.centroid_error = 0.0;
        let mut b = row;
        b.centroid_error = 0.0;
        assert_eq!(a, b);
    }

    #[test]
    fn median_skips_non_finite() {
        assert_eq!(median([3.0, f64::NAN, 1.0, 2.0]), 2.0);
        assert_eq!(median([4.0, 1.0]), 2.5);
        assert!(median(Vec::new()).is_nan());
    }
}
