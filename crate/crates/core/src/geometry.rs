//! Domains, uniform Dirichlet grids and piecewise-constant coefficient fields.
//!
//! Only interior nodes are stored; boundary values are eliminated. Nodes of the
//! square are numbered with the x index running fastest: `node = i + j * n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { length: f64 },
    Square { side: f64 },
}

impl Domain {
    pub fn interval(length: f64) -> Result<Self> {
        let d = Domain::Interval { length };
        d.validate()?;
        Ok(d)
    }

    pub fn square(side: f64) -> Result<Self> {
        let d = Domain::Square { side };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.length();
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::param("L", format!("domain length must be positive, got {l}")));
        }
        Ok(())
    }

    /// Side length `L`.
    pub fn length(&self) -> f64 {
        match *self {
            Domain::Interval { length } => length,
            Domain::Square { side } => side,
        }
    }

    /// Spatial dimension `d` (1 or 2).
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Square { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    domain: Domain,
    n: usize,
    h: f64,
}

/// Builds the uniform grid with `n` interior nodes per axis and `h = L / (n + 1)`.
pub fn build_grid(domain: Domain, n: usize) -> Result<Grid> {
    domain.validate()?;
    if n == 0 {
        return Err(Error::param("n", "need at least one interior node per axis"));
    }
    Ok(Grid {
        domain,
        n,
        h: domain.length() / (n as f64 + 1.0),
    })
}

impl Grid {
    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Interior nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn length(&self) -> f64 {
        self.domain.length()
    }

    /// Number of interior nodes: `n` in 1D, `n²` in 2D.
    pub fn num_nodes(&self) -> usize {
        self.n.pow(self.dim() as u32)
    }

    /// `h^d`, the lumped mass of one node.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    /// Coordinates of an interior node. The y coordinate is 0 in 1D.
    pub fn coords(&self, node: usize) -> [f64; 2] {
        match self.domain {
            Domain::Interval { .. } => [(node + 1) as f64 * self.h, 0.0],
            Domain::Square { .. } => {
                let (i, j) = (node % self.n, node / self.n);
                [(i + 1) as f64 * self.h, (j + 1) as f64 * self.h]
            }
        }
    }

    pub fn coordinates(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.num_nodes()).map(move |p| self.coords(p))
    }

    /// Neighbouring interior-node index along `axis` at offset ±1, or `None` at the boundary.
    pub(crate) fn neighbor(&self, node: usize, axis: Axis, forward: bool) -> Option<usize> {
        let n = self.n;
        let (i, j) = match self.domain {
            Domain::Interval { .. } => (node, 0),
            Domain::Square { .. } => (node % n, node / n),
        };
        let idx = match axis {
            Axis::X => i,
            Axis::Y => {
                if self.dim() == 1 {
                    return None;
                }
                j
            }
        };
        let next = if forward {
            if idx + 1 >= n {
                return None;
            }
            idx + 1
        } else {
            idx.checked_sub(1)?
        };
        Some(match (self.domain, axis) {
            (Domain::Interval { .. }, _) => next,
            (Domain::Square { .. }, Axis::X) => next + j * n,
            (Domain::Square { .. }, Axis::Y) => i + next * n,
        })
    }

    pub(crate) fn axes(&self) -> &'static [Axis] {
        match self.domain {
            Domain::Interval { .. } => &[Axis::X],
            Domain::Square { .. } => &[Axis::X, Axis::Y],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// A region of the domain. Membership is half-open, `lo <= x < hi`, evaluated
/// at node coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    All,
    /// Band `lo <= coord < hi` along one axis, unbounded along the other.
    Strip { axis: Axis, lo: f64, hi: f64 },
    Box { lo: [f64; 2], hi: [f64; 2] },
    #[serde(rename = "interval")]
    Interval1D { lo: f64, hi: f64 },
    /// Nodes whose distance to the boundary lies in `[inner, outer)`.
    Frame { inner: f64, outer: f64 },
}

impl RegionSpec {
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let l = domain.length();
        let check = |lo: f64, hi: f64| -> Result<()> {
            if !(lo < hi) {
                return Err(Error::param("region", format!("bounds must satisfy lo < hi, got [{lo}, {hi})")));
            }
            if lo < 0.0 || hi > l {
                return Err(Error::param("region", format!("bounds [{lo}, {hi}) leave the domain [0, {l}]")));
            }
            Ok(())
        };
        match (self, domain) {
            (RegionSpec::All, _) => Ok(()),
            (RegionSpec::Strip { axis: Axis::Y, .. }, Domain::Interval { .. }) => {
                Err(Error::param("region", "y-strips need a square domain"))
            }
            (RegionSpec::Strip { lo, hi, .. }, _) => check(*lo, *hi),
            (RegionSpec::Box { lo, hi }, Domain::Square { .. }) => {
                check(lo[0], hi[0])?;
                check(lo[1], hi[1])
            }
            (RegionSpec::Interval1D { lo, hi }, Domain::Interval { .. }) => check(*lo, *hi),
            (RegionSpec::Frame { inner, outer }, Domain::Square { .. }) => {
                check(*inner, *outer)?;
                if *outer > 0.5 * l {
                    return Err(Error::param("region", "frame width exceeds half the side"));
                }
                Ok(())
            }
            _ => Err(Error::param("region", format!("{self:?} does not apply to {domain:?}"))),
        }
    }

    pub fn contains(&self, p: [f64; 2], domain: &Domain) -> bool {
        let within = |x: f64, lo: f64, hi: f64| lo <= x && x < hi;
        match *self {
            RegionSpec::All => true,
            RegionSpec::Strip { axis, lo, hi } => match axis {
                Axis::X => within(p[0], lo, hi),
                Axis::Y => within(p[1], lo, hi),
            },
            RegionSpec::Box { lo, hi } => within(p[0], lo[0], hi[0]) && within(p[1], lo[1], hi[1]),
            RegionSpec::Interval1D { lo, hi } => within(p[0], lo, hi),
            RegionSpec::Frame { inner, outer } => {
                let l = domain.length();
                let dist = p[0].min(l - p[0]).min(p[1]).min(l - p[1]);
                within(dist, inner, outer)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    /// `b(x)` or `d(x)`: must be nonnegative.
    Damping,
    /// `c(x)`: any real value.
    Coupling,
}

/// Nodal samples of `b(x)`, `c(x)` or `d(x)` over the interior nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    grid: Grid,
    values: Vec<f64>,
}

impl CoefficientField {
    pub fn constant(grid: &Grid, value: f64) -> Self {
        CoefficientField {
            grid: *grid,
            values: vec![value; grid.num_nodes()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::DimensionMismatch {
                what: "coefficient field",
                expected: grid.num_nodes(),
                actual: values.len(),
            });
        }
        Ok(CoefficientField { grid: *grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        CoefficientField {
            grid: *grid,
            values: grid.coordinates().map(f).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Returns the single value if the field is constant.
    pub fn constant_value(&self) -> Option<f64> {
        let first = *self.values.first()?;
        self.values.iter().all(|&v| v == first).then_some(first)
    }

    /// For square grids: the x-profile if the field does not depend on y.
    pub fn x_profile(&self) -> Option<Vec<f64>> {
        match self.grid.domain() {
            Domain::Interval { .. } => Some(self.values.clone()),
            Domain::Square { .. } => {
                let n = self.grid.n();
                let row = &self.values[..n];
                self.values.chunks(n).all(|r| r == row).then(|| row.to_vec())
            }
        }
    }

    /// Nodes with a nonzero value.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i)
    }
}

/// `inside_value` on nodes of `region`, zero elsewhere.
pub fn indicator_field(
    grid: &Grid,
    region: &RegionSpec,
    inside_value: f64,
    role: FieldRole,
) -> Result<CoefficientField> {
    region.validate(&grid.domain())?;
    if !inside_value.is_finite() {
        return Err(Error::param("inside_value", "must be finite"));
    }
    if role == FieldRole::Damping && inside_value < 0.0 {
        return Err(Error::param(
            "inside_value",
            format!("damping coefficient must be nonnegative, got {inside_value}"),
        ));
    }
    let domain = grid.domain();
    Ok(CoefficientField::from_fn(grid, |p| {
        if region.contains(p, &domain) {
            inside_value
        } else {
            0.0
        }
    }))
}

/// Named coefficient configurations with their geometric parameters.
///
/// H4 and H5 are the vertical-strip layouts on the square. H1–H3 are sample
/// layouts built from boundary frames; the non-convex domain of H3 cannot be
/// represented, so its sample keeps the convex square and only reproduces the
/// `closure(ω_c) ⊂ ω_b` nesting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum Preset {
    /// `b = b0` on a frame of width `width`, `c = c0` everywhere.
    #[serde(rename = "H1_sample")]
    H1Sample { width: f64, b0: f64, c0: f64 },
    /// Nested frames: `ω_c` of width `eps[0]` inside `ω_b` of width `eps[1]`.
    #[serde(rename = "H2_sample")]
    H2Sample { eps: [f64; 2], b0: f64, c0: f64 },
    /// `ω_b` frame of width `eps[2]`, `ω_c` the band `eps[0] <= dist < eps[1]`.
    #[serde(rename = "H3_sample")]
    H3Sample { eps: [f64; 3], b0: f64, c0: f64 },
    /// `ω_b = (ε1, ε4) × (0, L)`, `ω_c = (ε2, ε3) × (0, L)`.
    H4 { eps: [f64; 4], b0: f64, c0: f64 },
    /// `ω_b = (0, ε2) × (0, L)`, `ω_c = (0, ε1) × (0, L)`.
    H5 { eps: [f64; 2], b0: f64, c0: f64 },
    /// `b = b0` on `(α1, α3)`, `c = c0` on `(α2, α4)`.
    #[serde(rename = "OneD_bc")]
    OneDBc { alpha: [f64; 4], b0: f64, c0: f64 },
}

impl Preset {
    pub fn h4_default(length: f64) -> Self {
        Preset::H4 {
            eps: [0.2, 0.4, 0.6, 0.8].map(|e| e * length),
            b0: 1.0,
            c0: 1.0,
        }
    }

    pub fn h5_default(length: f64) -> Self {
        Preset::H5 {
            eps: [0.25, 0.5].map(|e| e * length),
            b0: 1.0,
            c0: 1.0,
        }
    }

    pub fn one_d_default(length: f64) -> Self {
        Preset::OneDBc {
            alpha: [0.1, 0.3, 0.5, 0.7].map(|e| e * length),
            b0: 1.0,
            c0: 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::H1Sample { .. } => "H1_sample",
            Preset::H2Sample { .. } => "H2_sample",
            Preset::H3Sample { .. } => "H3_sample",
            Preset::H4 { .. } => "H4",
            Preset::H5 { .. } => "H5",
            Preset::OneDBc { .. } => "OneD_bc",
        }
    }

    /// `β` of the decay rate `t^{-2/(2+4β)}` for the strip layouts.
    pub fn beta(&self) -> Option<f64> {
        match self {
            Preset::H4 { .. } => Some(2.0),
            Preset::H5 { .. } => Some(1.5),
            _ => None,
        }
    }

    fn coefficients(&self) -> (f64, f64) {
        match *self {
            Preset::H1Sample { b0, c0, .. }
            | Preset::H2Sample { b0, c0, .. }
            | Preset::H3Sample { b0, c0, .. }
            | Preset::H4 { b0, c0, .. }
            | Preset::H5 { b0, c0, .. }
            | Preset::OneDBc { b0, c0, .. } => (b0, c0),
        }
    }

    /// Checks the ordering constraints of the preset against a side length.
    pub fn validate(&self, length: f64) -> Result<()> {
        let (b0, c0) = self.coefficients();
        if !(b0 > 0.0 && b0.is_finite()) {
            return Err(Error::param("b0", format!("must be positive, got {b0}")));
        }
        if c0 == 0.0 || !c0.is_finite() {
            return Err(Error::param("c0", format!("must be nonzero and finite, got {c0}")));
        }
        let increasing = |name: &'static str, xs: &[f64], upper: f64| -> Result<()> {
            let mut prev = 0.0;
            for (k, &x) in xs.iter().enumerate() {
                if !(x > prev) {
                    return Err(Error::param(
                        name,
                        format!("ordering violated: need 0 < {name}_1 < ... < {name}_{} < {upper}, but {name}_{} = {x} is not above {prev}", xs.len(), k + 1),
                    ));
                }
                prev = x;
            }
            if !(prev < upper) {
                return Err(Error::param(name, format!("ordering violated: {name}_{} = {prev} must lie below {upper}", xs.len())));
            }
            Ok(())
        };
        match self {
            Preset::H1Sample { width, .. } => increasing("width", &[*width], 0.5 * length),
            Preset::H2Sample { eps, .. } => increasing("eps", eps, 0.5 * length),
            Preset::H3Sample { eps, .. } => increasing("eps", eps, 0.5 * length),
            Preset::H4 { eps, .. } => increasing("eps", eps, length),
            Preset::H5 { eps, .. } => increasing("eps", eps, length),
            Preset::OneDBc { alpha, .. } => increasing("alpha", alpha, length),
        }
    }

    /// Region pair `(ω_b, ω_c)`.
    pub fn regions(&self, length: f64) -> (RegionSpec, RegionSpec) {
        let l = length;
        match *self {
            Preset::H1Sample { width, .. } => (RegionSpec::Frame { inner: 0.0, outer: width }, RegionSpec::All),
            Preset::H2Sample { eps, .. } => (
                RegionSpec::Frame { inner: 0.0, outer: eps[1] },
                RegionSpec::Frame { inner: 0.0, outer: eps[0] },
            ),
            Preset::H3Sample { eps, .. } => (
                RegionSpec::Frame { inner: 0.0, outer: eps[2] },
                RegionSpec::Frame { inner: eps[0], outer: eps[1] },
            ),
            Preset::H4 { eps, .. } => (
                RegionSpec::Box { lo: [eps[0], 0.0], hi: [eps[3], l] },
                RegionSpec::Box { lo: [eps[1], 0.0], hi: [eps[2], l] },
            ),
            Preset::H5 { eps, .. } => (
                RegionSpec::Box { lo: [0.0, 0.0], hi: [eps[1], l] },
                RegionSpec::Box { lo: [0.0, 0.0], hi: [eps[0], l] },
            ),
            Preset::OneDBc { alpha, .. } => (
                RegionSpec::Interval1D { lo: alpha[0], hi: alpha[2] },
                RegionSpec::Interval1D { lo: alpha[1], hi: alpha[3] },
            ),
        }
    }
}

/// Builds the `(b, c)` fields of a preset on `grid`.
pub fn preset_config(grid: &Grid, preset: &Preset) -> Result<(CoefficientField, CoefficientField)> {
    let needs_square = !matches!(preset, Preset::OneDBc { .. });
    match (needs_square, grid.domain()) {
        (true, Domain::Square { .. }) | (false, Domain::Interval { .. }) => {}
        _ => {
            return Err(Error::param(
                "preset",
                format!("{} does not apply to {:?}", preset.name(), grid.domain()),
            ))
        }
    }
    preset.validate(grid.length())?;
    let (b0, c0) = preset.coefficients();
    let (omega_b, omega_c) = preset.regions(grid.length());
    let b = indicator_field(grid, &omega_b, b0, FieldRole::Damping)?;
    let c = indicator_field(grid, &omega_c, c0, FieldRole::Coupling)?;
    Ok((b, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interval_grid_nodes() {
        let g = build_grid(Domain::interval(1.0).unwrap(), 4).unwrap();
        assert_relative_eq!(g.h(), 0.2);
        let xs: Vec<f64> = g.coordinates().map(|p| p[0]).collect();
        for (x, e) in xs.iter().zip([0.2, 0.4, 0.6, 0.8]) {
            assert_relative_eq!(*x, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn square_grid_counts() {
        let g = build_grid(Domain::square(1.0).unwrap(), 3).unwrap();
        assert_eq!(g.num_nodes(), 9);
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.coords(5), [0.75, 0.5]);
    }

    #[test]
    fn pi_interval_spacing() {
        let g = build_grid(Domain::interval(std::f64::consts::PI).unwrap(), 99).unwrap();
        assert_relative_eq!(g.h(), std::f64::consts::PI / 100.0, epsilon = 1e-16);
        assert_relative_eq!(g.h() * 100.0, g.length(), epsilon = 1e-14);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(build_grid(Domain::Interval { length: 1.0 }, 0).is_err());
        assert!(build_grid(Domain::Interval { length: -1.0 }, 3).is_err());
        assert!(Domain::square(0.0).is_err());
    }

    #[test]
    fn neighbors_on_square() {
        let g = build_grid(Domain::square(1.0).unwrap(), 3).unwrap();
        assert_eq!(g.neighbor(4, Axis::X, true), Some(5));
        assert_eq!(g.neighbor(4, Axis::Y, false), Some(1));
        assert_eq!(g.neighbor(2, Axis::X, true), None);
        assert_eq!(g.neighbor(6, Axis::Y, true), None);
    }

    #[test]
    fn indicator_on_interval() {
        let g = build_grid(Domain::interval(1.0).unwrap(), 4).unwrap();
        let f = indicator_field(&g, &RegionSpec::Interval1D { lo: 0.3, hi: 0.7 }, 2.0, FieldRole::Damping).unwrap();
        assert_eq!(f.values(), &[0.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn full_strip_covers_square() {
        let g = build_grid(Domain::square(1.0).unwrap(), 5).unwrap();
        let f = indicator_field(&g, &RegionSpec::Strip { axis: Axis::X, lo: 0.0, hi: 1.0 }, 0.7, FieldRole::Coupling).unwrap();
        assert_eq!(f.constant_value(), Some(0.7));
    }

    #[test]
    fn half_open_membership() {
        let g = build_grid(Domain::interval(1.0).unwrap(), 4).unwrap();
        let f = indicator_field(&g, &RegionSpec::Interval1D { lo: 0.4, hi: 0.8 }, 1.0, FieldRole::Damping).unwrap();
        // 0.4 lies inside (inclusive lower end); 0.8 is excluded
        assert_eq!(f.values()[1], 1.0);
        assert_eq!(f.values()[3], 0.0);
    }

    #[test]
    fn negative_damping_rejected() {
        let g = build_grid(Domain::interval(1.0).unwrap(), 4).unwrap();
        assert!(indicator_field(&g, &RegionSpec::All, -1.0, FieldRole::Damping).is_err());
        assert!(indicator_field(&g, &RegionSpec::All, -1.0, FieldRole::Coupling).is_ok());
    }

    #[test]
    fn region_bounds_checked() {
        let d = Domain::square(1.0).unwrap();
        assert!(RegionSpec::Strip { axis: Axis::X, lo: 0.5, hi: 0.2 }.validate(&d).is_err());
        assert!(RegionSpec::Strip { axis: Axis::X, lo: 0.5, hi: 1.2 }.validate(&d).is_err());
        assert!(RegionSpec::Interval1D { lo: 0.1, hi: 0.2 }.validate(&d).is_err());
    }

    #[test]
    fn h4_preset_strips() {
        let g = build_grid(Domain::square(1.0).unwrap(), 9).unwrap();
        let (b, c) = preset_config(&g, &Preset::h4_default(1.0)).unwrap();
        for (p, xy) in g.coordinates().enumerate() {
            let x = xy[0];
            assert_eq!(b.value(p) != 0.0, (0.2..0.8).contains(&x), "b at {x}");
            assert_eq!(c.value(p) != 0.0, (0.4..0.6).contains(&x), "c at {x}");
        }
        assert!(b.x_profile().is_some());
    }

    #[test]
    fn h5_nested_supports() {
        let g = build_grid(Domain::square(1.0).unwrap(), 15).unwrap();
        let (b, c) = preset_config(&g, &Preset::H5 { eps: [0.25, 0.5], b0: 1.0, c0: 1.0 }).unwrap();
        assert!(c.support().count() > 0);
        assert!(c.support().all(|p| b.value(p) != 0.0));
        assert!(b.support().count() > c.support().count());
    }

    #[test]
    fn one_d_overlap() {
        let g = build_grid(Domain::interval(1.0).unwrap(), 99).unwrap();
        let (b, c) = preset_config(&g, &Preset::one_d_default(1.0)).unwrap();
        let overlap: Vec<f64> = (0..g.num_nodes())
            .filter(|&p| b.value(p) != 0.0 && c.value(p) != 0.0)
            .map(|p| g.coords(p)[0])
            .collect();
        assert!((overlap[0] - 0.3).abs() < 1e-12);
        assert!((overlap.last().unwrap() - 0.49).abs() < 1e-12);
    }

    #[test]
    fn preset_ordering_errors() {
        let g = build_grid(Domain::square(1.0).unwrap(), 9).unwrap();
        let err = preset_config(&g, &Preset::H5 { eps: [0.5, 0.25], b0: 1.0, c0: 1.0 }).unwrap_err();
        assert!(err.to_string().contains("ordering"), "{err}");
        let err = preset_config(&g, &Preset::H4 { eps: [0.2, 0.6, 0.4, 0.8], b0: 1.0, c0: 1.0 }).unwrap_err();
        assert!(err.to_string().contains("ordering"));
        assert!(preset_config(&g, &Preset::one_d_default(1.0)).is_err());
    }

    #[test]
    fn frame_presets_nest() {
        let g = build_grid(Domain::square(1.0).unwrap(), 19).unwrap();
        for preset in [
            Preset::H2Sample { eps: [0.1, 0.2], b0: 1.0, c0: 1.0 },
            Preset::H3Sample { eps: [0.05, 0.15, 0.25], b0: 1.0, c0: 1.0 },
        ] {
            let (b, c) = preset_config(&g, &preset).unwrap();
            assert!(c.support().count() > 0);
            assert!(c.support().all(|p| b.value(p) != 0.0));
        }
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn indicator_is_traversal_independent(n in 1usize..30, lo in 0.0f64..0.5, w in 0.01f64..0.5) {
            let g = build_grid(Domain::interval(1.0).unwrap(), n).unwrap();
            let region = RegionSpec::Interval1D { lo, hi: lo + w };
            let f = indicator_field(&g, &region, 1.5, FieldRole::Damping).unwrap();
            let again = indicator_field(&g, &region, 1.5, FieldRole::Damping).unwrap();
            prop_assert_eq!(&f, &again);
            for p in (0..g.num_nodes()).rev() {
                let x = g.coords(p)[0];
                prop_assert_eq!(f.value(p), if lo <= x && x < lo + w { 1.5 } else { 0.0 });
            }
        }
    }
}
