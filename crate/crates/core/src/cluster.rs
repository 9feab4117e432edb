//! DenStream-style online clustering of unit-norm representations.
//!
//! Points are absorbed into micro-clusters summarised by `(w, LS, SS)`. A
//! micro-cluster is *potential* (core) once its weight reaches `beta * mu`
//! and *outlier* before that. Macro-clusters are the connected components of
//! potential micro-clusters whose centres lie within `2 * eps` of each other;
//! a macro-cluster is named by its lowest micro-cluster id.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::linalg::{axpy, dist_sq, dot, norm};
use crate::{Error, Result};

const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterParams {
    pub eps: f64,
    pub mu: f64,
    pub lambda: f64,
    pub beta: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self { eps: 0.01, mu: 2.0, lambda: 0.0, beta: 1.0 }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.mu >= 1.0) {
            return Err(Error::Config(format!("mu must be >= 1, got {}", self.mu)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta must be in (0, 1], got {}", self.beta)));
        }
        Ok(())
    }

    pub fn core_weight(&self) -> f64 {
        self.beta * self.mu
    }

    /// DenStream's minimal time span for a potential cluster to fade below
    /// `beta * mu`; pruning runs at this period.
    pub fn prune_period(&self) -> f64 {
        let bm = self.core_weight();
        if self.lambda == 0.0 {
            f64::INFINITY
        } else if bm > 1.0 {
            (1.0 / self.lambda) * (bm / (bm - 1.0)).log2()
        } else {
            1.0 / self.lambda
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterKind {
    Potential,
    Outlier,
}

impl ClusterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClusterKind::Potential => "potential",
            ClusterKind::Outlier => "outlier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroCluster {
    pub id: u64,
    pub kind: ClusterKind,
    pub weight: f64,
    pub ls: Vec<f64>,
    pub ss: f64,
    pub t_create: f64,
    pub t_last: f64,
}

impl MicroCluster {
    fn new(id: u64, point: &[f64], t: f64) -> Self {
        Self {
            id,
            kind: ClusterKind::Outlier,
            weight: 1.0,
            ls: point.to_vec(),
            ss: dot(point, point),
            t_create: t,
            t_last: t,
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.ls.iter().map(|v| v / self.weight).collect()
    }

    fn center_dist_sq(&self, p: &[f64]) -> f64 {
        let inv = 1.0 / self.weight;
        self.ls.iter().zip(p).map(|(l, x)| (l * inv - x) * (l * inv - x)).sum()
    }

    pub fn radius(&self) -> f64 {
        radius_of(self.weight, &self.ls, self.ss)
    }

    fn radius_if_merged(&self, p: &[f64]) -> f64 {
        let w = self.weight + 1.0;
        let mut ls = self.ls.clone();
        axpy(1.0, p, &mut ls);
        radius_of(w, &ls, self.ss + dot(p, p))
    }

    fn absorb(&mut self, p: &[f64], t: f64) {
        self.weight += 1.0;
        axpy(1.0, p, &mut self.ls);
        self.ss += dot(p, p);
        self.t_last = t;
    }
}

/// `sqrt(SS/w - |LS/w|^2)`, clamped at zero against cancellation.
fn radius_of(w: f64, ls: &[f64], ss: f64) -> f64 {
    let c2 = dot(ls, ls) / (w * w);
    (ss / w - c2).max(0.0).sqrt()
}

/// Where one inserted point ended up.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub window_id: usize,
    /// `None` when the point sits in an outlier micro-cluster.
    pub macro_id: Option<u64>,
    pub micro_id: u64,
    pub stream_time: f64,
}

impl Assignment {
    pub fn is_outlier(&self) -> bool {
        self.macro_id.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroCluster {
    pub id: u64,
    pub members: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub micro_id: u64,
    pub kind: ClusterKind,
    pub weight: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    pub macro_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamClusterer {
    params: ClusterParams,
    /// Kept sorted by id (ids are issued monotonically and only removed).
    clusters: Vec<MicroCluster>,
    next_id: u64,
    last_time: Option<f64>,
    last_decay: Option<f64>,
    last_prune: Option<f64>,
}

impl StreamClusterer {
    pub fn new(params: ClusterParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, clusters: Vec::new(), next_id: 0, last_time: None, last_decay: None, last_prune: None })
    }

    pub fn params(&self) -> &ClusterParams {
        &self.params
    }

    pub fn micro_clusters(&self) -> &[MicroCluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn insert(&mut self, point: &[f64], t: f64, window_id: usize) -> Result<Assignment> {
        let n = norm(point);
        if !((n - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::UnnormalizedPoint(n));
        }
        if let Some(last) = self.last_time {
            if t < last {
                return Err(Error::TimeWentBackwards { now: t, last });
            }
        }
        if let Some(d) = self.clusters.first().map(|c| c.ls.len()) {
            if d != point.len() {
                return Err(Error::DimensionMismatch { expected: d, got: point.len() });
            }
        }
        self.last_time = Some(t);
        self.apply_decay(t);

        let eps = self.params.eps;
        let target = [ClusterKind::Potential, ClusterKind::Outlier].into_iter().find_map(|kind| {
            let idx = self.nearest(point, kind)?;
            (self.clusters[idx].radius_if_merged(point) <= eps).then_some(idx)
        });
        let idx = match target {
            Some(idx) => {
                self.clusters[idx].absorb(point, t);
                idx
            }
            None => {
                self.clusters.push(MicroCluster::new(self.next_id, point, t));
                self.next_id += 1;
                self.clusters.len() - 1
            }
        };
        if self.clusters[idx].kind == ClusterKind::Outlier && self.clusters[idx].weight >= self.params.core_weight() {
            self.clusters[idx].kind = ClusterKind::Potential;
        }
        let micro_id = self.clusters[idx].id;

        if self.params.lambda > 0.0 {
            let due = match self.last_prune {
                Some(p) => t - p >= self.params.prune_period(),
                None => true,
            };
            if due {
                self.prune(t);
            }
        }

        let macro_id = match self.find(micro_id) {
            Some(i) if self.clusters[i].kind == ClusterKind::Potential => self.macro_of_index(i),
            _ => None,
        };
        Ok(Assignment { window_id, macro_id, micro_id, stream_time: t })
    }

    /// Nearest micro-cluster of `kind` by centre distance; ties go to the lowest id.
    fn nearest(&self, p: &[f64], kind: ClusterKind) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.clusters.iter().enumerate() {
            if c.kind != kind {
                continue;
            }
            let d = c.center_dist_sq(p);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    fn find(&self, micro_id: u64) -> Option<usize> {
        self.clusters.binary_search_by_key(&micro_id, |c| c.id).ok()
    }

    /// Fade every micro-cluster by `2^(-lambda * dt)` since the last decay.
    pub fn apply_decay(&mut self, t: f64) {
        let last = self.last_decay.replace(t.max(self.last_decay.unwrap_or(t)));
        if self.params.lambda == 0.0 {
            return;
        }
        let Some(last) = last else { return };
        let dt = t - last;
        if dt <= 0.0 {
            return;
        }
        let factor = (-self.params.lambda * dt).exp2();
        for c in &mut self.clusters {
            c.weight *= factor;
            c.ls.iter_mut().for_each(|v| *v *= factor);
            c.ss *= factor;
        }
    }

    /// Drop faded potential micro-clusters and outliers below the DenStream
    /// lower-limit curve. Clusters touched at time `t` are kept.
    pub fn prune(&mut self, t: f64) {
        if self.params.lambda == 0.0 {
            return;
        }
        self.apply_decay(t);
        self.last_prune = Some(t);
        let lambda = self.params.lambda;
        let tp = self.params.prune_period();
        let core = self.params.core_weight();
        self.clusters.retain(|c| {
            if c.t_last >= t {
                return true;
            }
            match c.kind {
                ClusterKind::Potential => c.weight >= core,
                ClusterKind::Outlier => {
                    let xi = ((-lambda * (t - c.t_create + tp)).exp2() - 1.0) / ((-lambda * tp).exp2() - 1.0);
                    c.weight >= xi
                }
            }
        });
    }

    fn potential_indices(&self) -> Vec<usize> {
        (0..self.clusters.len()).filter(|&i| self.clusters[i].kind == ClusterKind::Potential).collect()
    }

    fn neighbors(&self, a: usize, b: usize) -> bool {
        let reach = 2.0 * self.params.eps;
        let (ca, cb) = (self.clusters[a].center(), self.clusters[b].center());
        dist_sq(&ca, &cb) <= reach * reach
    }

    fn macro_of_index(&self, start: usize) -> Option<u64> {
        let pots = self.potential_indices();
        let mut seen = vec![false; self.clusters.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut lowest = self.clusters[start].id;
        while let Some(i) = queue.pop_front() {
            lowest = lowest.min(self.clusters[i].id);
            for &j in &pots {
                if !seen[j] && self.neighbors(i, j) {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        Some(lowest)
    }

    /// Macro-cluster id of a micro-cluster, `None` for outliers or unknown ids.
    pub fn macro_of(&self, micro_id: u64) -> Option<u64> {
        let i = self.find(micro_id)?;
        (self.clusters[i].kind == ClusterKind::Potential).then(|| self.macro_of_index(i)).flatten()
    }

    /// Connected components of potential micro-clusters, ordered by id.
    pub fn macro_clusters(&self) -> Vec<MacroCluster> {
        let pots = self.potential_indices();
        let mut seen = vec![false; self.clusters.len()];
        let mut out = Vec::new();
        for &s in &pots {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut members = vec![];
            let mut queue = VecDeque::from([s]);
            while let Some(i) = queue.pop_front() {
                members.push(self.clusters[i].id);
                for &j in &pots {
                    if !seen[j] && self.neighbors(i, j) {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            members.sort_unstable();
            out.push(MacroCluster { id: members[0], members });
        }
        out
    }

    pub fn snapshot(&self) -> Vec<SnapshotRow> {
        let mut macro_by_micro = std::collections::HashMap::new();
        for m in self.macro_clusters() {
            for id in m.members {
                macro_by_micro.insert(id, m.id);
            }
        }
        self.clusters
            .iter()
            .map(|c| SnapshotRow {
                micro_id: c.id,
                kind: c.kind,
                weight: c.weight,
                center: c.center(),
                radius: c.radius(),
                macro_id: macro_by_micro.get(&c.id).copied(),
            })
            .collect()
    }
}
