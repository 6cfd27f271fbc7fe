//! Finite atomic return distributions and the operators composed by every
//! distributional update rule: pushforward by the bootstrap map `z -> r + g*z`,
//! projection onto the categorical / quantile parametrizations, convex measure
//! mixtures, weighted moments, and the Cramér (l2-between-CDFs) metric.
//!
//! All types are plain values; everything here is pure and thread-safe.

use thiserror::Error;

/// Weight drift below this is silently renormalized away.
pub const WEIGHT_DRIFT_TOL: f64 = 1e-12;
/// Weight drift above this indicates a logic bug, not float noise.
pub const WEIGHT_BUG_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("invalid support: need theta_min < theta_max and m >= 2, got [{0}, {1}] with m = {2}")]
    BadSupport(f64, f64, usize),
    #[error("categorical mixture requires identical supports")]
    SupportMismatch,
    #[error("mixture requires both operands in the same representation")]
    RepresentationMismatch,
    #[error("mixture weight must lie in [0, 1], got {0}")]
    BadMixWeight(f64),
    #[error("quantile distribution needs at least one atom")]
    EmptyQuantile,
}

/// A fixed grid of `m` evenly spaced atom locations on `[theta_min, theta_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    theta_min: f64,
    theta_max: f64,
    m: usize,
}

impl Support {
    pub fn new(theta_min: f64, theta_max: f64, m: usize) -> Result<Self, DistError> {
        if !theta_min.is_finite() || !theta_max.is_finite() || theta_min >= theta_max || m < 2 {
            return Err(DistError::BadSupport(theta_min, theta_max, m));
        }
        Ok(Support {
            theta_min,
            theta_max,
            m,
        })
    }

    pub fn theta_min(&self) -> f64 {
        self.theta_min
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing between adjacent atoms.
    pub fn spacing(&self) -> f64 {
        (self.theta_max - self.theta_min) / (self.m - 1) as f64
    }

    /// Location of atom `i`: `theta_min + i * spacing`.
    pub fn location(&self, i: usize) -> f64 {
        debug_assert!(i < self.m);
        self.theta_min + i as f64 * self.spacing()
    }

    pub fn locations(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.m).map(move |i| self.location(i))
    }

    /// Projects an arbitrary atom list onto this grid (triangular-kernel /
    /// Cramér projection): an atom at `z` is clamped into the grid range and
    /// its weight split between the two neighboring grid atoms proportionally
    /// to distance. Linear in the input measure and mean-preserving for atoms
    /// inside the range.
    pub fn project(&self, atoms: &AtomList) -> CategoricalDist {
        let mut weights = vec![0.0; self.m];
        let spacing = self.spacing();
        for &Atom { z, w } in &atoms.0 {
            if w == 0.0 {
                continue;
            }
            let clamped = z.clamp(self.theta_min, self.theta_max);
            let u = ((clamped - self.theta_min) / spacing).clamp(0.0, (self.m - 1) as f64);
            let mut lo = u.floor() as usize;
            if lo >= self.m - 1 {
                lo = self.m - 2;
            }
            let frac = (u - lo as f64).clamp(0.0, 1.0);
            weights[lo] += w * (1.0 - frac);
            weights[lo + 1] += w * frac;
        }
        CategoricalDist::new(*self, weights)
    }

    /// Dirac delta at `value`, projected onto the grid.
    pub fn delta(&self, value: f64) -> CategoricalDist {
        self.project(&AtomList::point(value))
    }
}

/// One weighted atom of a finite measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub z: f64,
    pub w: f64,
}

/// An arbitrary finite atomic probability measure; the intermediate target
/// produced by pushforward/mixture before projection back onto a
/// parametrization.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomList(pub Vec<Atom>);

impl AtomList {
    pub fn new(atoms: Vec<Atom>) -> Self {
        let mut list = AtomList(atoms);
        list.renormalize();
        list
    }

    pub fn point(z: f64) -> Self {
        AtomList(vec![Atom { z, w: 1.0 }])
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self::new(pairs.iter().map(|&(z, w)| Atom { z, w }).collect())
    }

    pub fn total_weight(&self) -> f64 {
        self.0.iter().map(|a| a.w).sum()
    }

    /// Enforces the weight policy: drift past `WEIGHT_DRIFT_TOL` is scaled
    /// away; drift past `WEIGHT_BUG_TOL` signals a logic bug and panics.
    pub fn renormalize(&mut self) {
        renormalize_weights(self.0.iter_mut().map(|a| &mut a.w));
    }

    /// Pushforward by the bootstrap map `z -> r + gamma * z`.
    pub fn pushforward(&self, r: f64, gamma: f64) -> AtomList {
        AtomList(
            self.0
                .iter()
                .map(|a| Atom {
                    z: r + gamma * a.z,
                    w: a.w,
                })
                .collect(),
        )
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().map(|a| a.w * a.z).sum()
    }

    /// Weighted second central moment.
    pub fn sample_variance(&self) -> f64 {
        let m = self.mean();
        self.0
            .iter()
            .map(|a| a.w * (a.z - m) * (a.z - m))
            .sum::<f64>()
            .max(0.0)
    }

    fn sorted(&self) -> Vec<Atom> {
        let mut v = self.0.clone();
        v.sort_by(|a, b| a.z.total_cmp(&b.z));
        v
    }
}

fn renormalize_weights<'a>(weights: impl Iterator<Item = &'a mut f64>) {
    let ws: Vec<&'a mut f64> = weights.collect();
    let total: f64 = ws.iter().map(|w| **w).sum();
    let drift = (total - 1.0).abs();
    assert!(
        drift <= WEIGHT_BUG_TOL,
        "weights sum to {total}; drift {drift} exceeds {WEIGHT_BUG_TOL} (logic bug)"
    );
    if drift > WEIGHT_DRIFT_TOL {
        for w in ws {
            *w /= total;
        }
    }
}

/// A measure on a fixed support grid, parametrized by its weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDist {
    support: Support,
    weights: Vec<f64>,
}

impl CategoricalDist {
    pub fn new(support: Support, weights: Vec<f64>) -> Self {
        assert_eq!(
            weights.len(),
            support.len(),
            "weight vector must match support size"
        );
        debug_assert!(weights.iter().all(|&w| w >= 0.0), "negative weight");
        let mut d = CategoricalDist { support, weights };
        d.renormalize();
        d
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn renormalize(&mut self) {
        renormalize_weights(self.weights.iter_mut());
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.support.location(i))
            .sum()
    }

    pub fn sample_variance(&self) -> f64 {
        let m = self.mean();
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let d = self.support.location(i) - m;
                w * d * d
            })
            .sum::<f64>()
            .max(0.0)
    }

    pub fn pushforward(&self, r: f64, gamma: f64) -> AtomList {
        self.to_atoms().pushforward(r, gamma)
    }

    pub fn to_atoms(&self) -> AtomList {
        AtomList(
            self.weights
                .iter()
                .enumerate()
                .map(|(i, &w)| Atom {
                    z: self.support.location(i),
                    w,
                })
                .collect(),
        )
    }

    /// Componentwise convex combination `beta * self + (1 - beta) * other`;
    /// both operands must live on the same support.
    pub fn mix(&self, other: &CategoricalDist, beta: f64) -> Result<CategoricalDist, DistError> {
        if self.support != other.support {
            return Err(DistError::SupportMismatch);
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(DistError::BadMixWeight(beta));
        }
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| beta * a + (1.0 - beta) * b)
            .collect();
        Ok(CategoricalDist::new(self.support, weights))
    }
}

/// A measure with `m` free atom locations, each of weight `1/m`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileDist {
    locations: Vec<f64>,
}

impl QuantileDist {
    /// Locations are sorted on construction.
    pub fn new(mut locations: Vec<f64>) -> Result<Self, DistError> {
        if locations.is_empty() {
            return Err(DistError::EmptyQuantile);
        }
        locations.sort_by(f64::total_cmp);
        Ok(QuantileDist { locations })
    }

    pub fn point(value: f64, m: usize) -> Self {
        QuantileDist {
            locations: vec![value; m.max(1)],
        }
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mean(&self) -> f64 {
        self.locations.iter().sum::<f64>() / self.locations.len() as f64
    }

    pub fn sample_variance(&self) -> f64 {
        let m = self.mean();
        (self
            .locations
            .iter()
            .map(|z| (z - m) * (z - m))
            .sum::<f64>()
            / self.locations.len() as f64)
            .max(0.0)
    }

    pub fn pushforward(&self, r: f64, gamma: f64) -> AtomList {
        self.to_atoms().pushforward(r, gamma)
    }

    pub fn to_atoms(&self) -> AtomList {
        let w = 1.0 / self.locations.len() as f64;
        AtomList(self.locations.iter().map(|&z| Atom { z, w }).collect())
    }
}

/// 1-Wasserstein projection onto the m-point equal-weight family: location `i`
/// is the `tau_i`-quantile of the input CDF at midpoint `tau_i = (2i-1)/(2m)`,
/// with the right-continuous inverse (smallest location whose cumulative
/// weight reaches `tau`).
pub fn project_quantile(atoms: &AtomList, m: usize) -> QuantileDist {
    assert!(m >= 1, "quantile projection needs m >= 1");
    let sorted = atoms.sorted();
    let mut locations = Vec::with_capacity(m);
    let mut cursor = 0usize;
    let mut cum = 0.0;
    for i in 1..=m {
        let tau = (2 * i - 1) as f64 / (2 * m) as f64;
        while cursor < sorted.len() && cum + sorted[cursor].w < tau {
            cum += sorted[cursor].w;
            cursor += 1;
        }
        let idx = cursor.min(sorted.len() - 1);
        locations.push(sorted[idx].z);
    }
    QuantileDist { locations }
}

/// Either parametrization, as stored in a return table. Operations shared by
/// both representations dispatch through here.
#[derive(Debug, Clone, PartialEq)]
pub enum ReturnDist {
    Categorical(CategoricalDist),
    Quantile(QuantileDist),
}

impl ReturnDist {
    pub fn mean(&self) -> f64 {
        match self {
            ReturnDist::Categorical(d) => d.mean(),
            ReturnDist::Quantile(d) => d.mean(),
        }
    }

    pub fn sample_variance(&self) -> f64 {
        match self {
            ReturnDist::Categorical(d) => d.sample_variance(),
            ReturnDist::Quantile(d) => d.sample_variance(),
        }
    }

    pub fn pushforward(&self, r: f64, gamma: f64) -> AtomList {
        match self {
            ReturnDist::Categorical(d) => d.pushforward(r, gamma),
            ReturnDist::Quantile(d) => d.pushforward(r, gamma),
        }
    }

    pub fn to_atoms(&self) -> AtomList {
        match self {
            ReturnDist::Categorical(d) => d.to_atoms(),
            ReturnDist::Quantile(d) => d.to_atoms(),
        }
    }
}

/// Convex combination `beta * a + (1 - beta) * b` as a raw atom list.
/// Categorical operands must share a support; the categorical result is
/// already supported on the grid.
pub fn mixture(a: &ReturnDist, b: &ReturnDist, beta: f64) -> Result<AtomList, DistError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(DistError::BadMixWeight(beta));
    }
    match (a, b) {
        (ReturnDist::Categorical(da), ReturnDist::Categorical(db)) => {
            Ok(da.mix(db, beta)?.to_atoms())
        }
        (ReturnDist::Quantile(da), ReturnDist::Quantile(db)) => {
            let mut atoms = Vec::with_capacity(da.len() + db.len());
            let wa = beta / da.len() as f64;
            for &z in da.locations() {
                atoms.push(Atom { z, w: wa });
            }
            let wb = (1.0 - beta) / db.len() as f64;
            for &z in db.locations() {
                atoms.push(Atom { z, w: wb });
            }
            Ok(AtomList(atoms))
        }
        _ => Err(DistError::RepresentationMismatch),
    }
}

/// Exact Cramér (l2) distance: piecewise-constant CDF difference integrated
/// over the merged breakpoint grid, square-rooted.
pub fn cramer_distance(a: &AtomList, b: &AtomList) -> f64 {
    let sa = a.sorted();
    let sb = b.sorted();
    let mut breaks: Vec<f64> = sa.iter().chain(sb.iter()).map(|atom| atom.z).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut ia = 0usize;
    let mut ib = 0usize;
    let mut fa = 0.0;
    let mut fb = 0.0;
    let mut integral = 0.0;
    for pair in breaks.windows(2) {
        let (z, z_next) = (pair[0], pair[1]);
        while ia < sa.len() && sa[ia].z <= z {
            fa += sa[ia].w;
            ia += 1;
        }
        while ib < sb.len() && sb[ib].z <= z {
            fb += sb[ib].w;
            ib += 1;
        }
        let d = fa - fb;
        integral += d * d * (z_next - z);
    }
    integral.max(0.0).sqrt()
}

/// Cramér distance between two distributions in either representation.
pub fn cramer_distance_dist(a: &ReturnDist, b: &ReturnDist) -> f64 {
    cramer_distance(&a.to_atoms(), &b.to_atoms())
}
