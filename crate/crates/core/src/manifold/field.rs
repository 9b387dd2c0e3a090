use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::ManifoldError;

/// A point of the parameter domain. Torus points use `[x, y, 0]`; sphere
/// points are ambient coordinates on the sphere of the base radius.
pub type Point = [f64; 3];

/// The undeformed closed surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BaseManifold {
    /// `R^2 / (lx Z × ly Z)` with the flat metric.
    FlatTorus { lx: f64, ly: f64 },
    /// The round sphere of the given radius in `R^3`.
    Sphere { radius: f64 },
}

impl BaseManifold {
    pub fn validate(&self) -> Result<(), ManifoldError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            BaseManifold::FlatTorus { lx, ly } if ok(lx) && ok(ly) => Ok(()),
            BaseManifold::Sphere { radius } if ok(radius) => Ok(()),
            _ => Err(ManifoldError::InvalidField(format!(
                "base dimensions must be positive: {self:?}"
            ))),
        }
    }

    /// Same surface type and dimensions.
    pub fn same_domain(&self, other: &BaseManifold) -> bool {
        self == other
    }

    /// Canonical representative: reduced into the fundamental domain on the
    /// torus, projected onto the sphere otherwise.
    pub fn wrap(&self, p: Point) -> Point {
        match *self {
            BaseManifold::FlatTorus { lx, ly } => [p[0].rem_euclid(lx), p[1].rem_euclid(ly), 0.0],
            BaseManifold::Sphere { radius } => {
                let n = norm(p);
                // Leaves points already on the sphere untouched so wrapping is idempotent.
                if (n - radius).abs() <= 1e-12 * radius {
                    return p;
                }
                [p[0] * radius / n, p[1] * radius / n, p[2] * radius / n]
            }
        }
    }

    /// Shortest displacement `b - a` among lattice translates (torus only).
    pub(crate) fn torus_delta(lx: f64, ly: f64, a: Point, b: Point) -> [f64; 2] {
        let wrap = |d: f64, l: f64| d - l * (d / l).round();
        [wrap(b[0] - a[0], lx), wrap(b[1] - a[1], ly)]
    }

    /// Distance in the undeformed metric.
    pub fn base_distance(&self, a: Point, b: Point) -> f64 {
        match *self {
            BaseManifold::FlatTorus { lx, ly } => {
                let [dx, dy] = Self::torus_delta(lx, ly, a, b);
                dx.hypot(dy)
            }
            BaseManifold::Sphere { radius } => radius * angle(a, b),
        }
    }

    /// Minimizing base geodesic from `a` to `b`, as a curve on `[0, 1]`, and its length.
    fn segment(&self, a: Point, b: Point) -> Result<(Segment, f64), ManifoldError> {
        match *self {
            BaseManifold::FlatTorus { lx, ly } => {
                let d = Self::torus_delta(lx, ly, a, b);
                let len = d[0].hypot(d[1]);
                if len <= 1e-14 * lx.max(ly) {
                    return Err(ManifoldError::CoincidentPoints);
                }
                Ok((Segment::Line { start: a, delta: d }, len))
            }
            BaseManifold::Sphere { radius } => {
                let (ua, ub) = (unit(a), unit(b));
                let c = dot(ua, ub);
                let w = sub(ub, scale(ua, c));
                let s = norm(w);
                let theta = s.atan2(c);
                if theta <= 1e-14 {
                    return Err(ManifoldError::CoincidentPoints);
                }
                // Antipodal endpoints: every great circle through them is minimizing.
                let dir = if s > 1e-12 {
                    scale(w, 1.0 / s)
                } else {
                    perpendicular(ua)
                };
                Ok((
                    Segment::Arc {
                        start: ua,
                        dir,
                        theta,
                        radius,
                    },
                    radius * theta,
                ))
            }
        }
    }
}

enum Segment {
    Line {
        start: Point,
        delta: [f64; 2],
    },
    Arc {
        start: Point,
        dir: Point,
        theta: f64,
        radius: f64,
    },
}

impl Segment {
    fn at(&self, t: f64) -> Point {
        match *self {
            Segment::Line { start, delta } => {
                [start[0] + t * delta[0], start[1] + t * delta[1], 0.0]
            }
            Segment::Arc {
                start,
                dir,
                theta,
                radius,
            } => {
                let (s, c) = (t * theta).sin_cos();
                scale(add(scale(start, c), scale(dir, s)), radius)
            }
        }
    }
}

/// One real Fourier mode of a torus function, in coordinates normalized to
/// the unit square: `cos * cos(2π k·u) + sin * sin(2π k·u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub k: [i32; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// A Gaussian bump on the sphere, `height * exp(-|p̂ - ĉ|² / (2 width²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 3],
    pub height: f64,
    pub width: f64,
}

impl Bump {
    pub(crate) fn weight(center: Point, width: f64, p_unit: Point) -> f64 {
        let d = sub(p_unit, unit(center));
        (-dot(d, d) / (2.0 * width * width)).exp()
    }
}

/// The log-conformal factor φ of a metric `e^{2φ} g`.
///
/// Fourier terms apply to tori and bumps to spheres; the constant applies
/// to both and multiplies every length by `e^constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConformalFactor {
    #[serde(default)]
    pub constant: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fourier: Vec<FourierTerm>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bumps: Vec<Bump>,
}

impl ConformalFactor {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Self::default()
        }
    }

    pub fn eval(&self, base: &BaseManifold, p: Point) -> f64 {
        let mut phi = self.constant;
        match *base {
            BaseManifold::FlatTorus { lx, ly } => {
                let (u, v) = (p[0] / lx, p[1] / ly);
                for t in &self.fourier {
                    let (s, c) = (TAU * (t.k[0] as f64 * u + t.k[1] as f64 * v)).sin_cos();
                    phi += t.cos * c + t.sin * s;
                }
            }
            BaseManifold::Sphere { .. } => {
                let pu = unit(p);
                for b in &self.bumps {
                    phi += b.height * Bump::weight(b.center, b.width, pu);
                }
            }
        }
        phi
    }
}

/// A Riemannian metric `e^{2φ} g` on a flat torus or round sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricField {
    pub base: BaseManifold,
    #[serde(default)]
    pub conformal: ConformalFactor,
}

/// Simpson panels used along each edge.
const SIMPSON_PANELS: usize = 16;

impl MetricField {
    pub fn new(base: BaseManifold, conformal: ConformalFactor) -> Result<Self, ManifoldError> {
        let field = Self { base, conformal };
        field.validate()?;
        Ok(field)
    }

    pub fn flat(base: BaseManifold) -> Self {
        Self {
            base,
            conformal: ConformalFactor::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ManifoldError> {
        self.base.validate()?;
        let c = &self.conformal;
        let bad = |msg: String| Err(ManifoldError::InvalidField(msg));
        if !c.constant.is_finite() {
            return bad("conformal constant is not finite".into());
        }
        match self.base {
            BaseManifold::FlatTorus { .. } => {
                if !c.bumps.is_empty() {
                    return bad("bumps are only defined on the sphere".into());
                }
                if c.fourier
                    .iter()
                    .any(|t| !(t.cos.is_finite() && t.sin.is_finite()))
                {
                    return bad("Fourier coefficients must be finite".into());
                }
            }
            BaseManifold::Sphere { .. } => {
                if !c.fourier.is_empty() {
                    return bad("Fourier terms are only defined on the torus".into());
                }
                for b in &c.bumps {
                    let center_ok = b.center.iter().all(|v| v.is_finite()) && norm(b.center) > 0.0;
                    if !(center_ok && b.height.is_finite() && b.width.is_finite() && b.width > 0.0)
                    {
                        return bad(format!("invalid bump {b:?}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// φ at `p`.
    pub fn phi(&self, p: Point) -> f64 {
        self.conformal.eval(&self.base, p)
    }

    /// Length under `e^{2φ} g` of the base geodesic from `a` to `b`: the base
    /// length times the Simpson average of `e^φ` along the segment.
    pub fn edge_length(&self, a: Point, b: Point) -> Result<f64, ManifoldError> {
        let (seg, len) = self.base.segment(a, b)?;
        let m = SIMPSON_PANELS;
        let mut acc = 0.0;
        for k in 0..=m {
            let w = if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * self.phi(seg.at(k as f64 / m as f64)).exp();
        }
        Ok(len * acc / (3.0 * m as f64))
    }
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn unit(a: Point) -> Point {
    scale(a, 1.0 / norm(a))
}

/// Angle between two nonzero vectors.
pub(crate) fn angle(a: Point, b: Point) -> f64 {
    let (ua, ub) = (unit(a), unit(b));
    norm(cross(ua, ub)).atan2(dot(ua, ub))
}

/// Some unit vector orthogonal to the unit vector `u`.
fn perpendicular(u: Point) -> Point {
    let axis = if u[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    unit(cross(u, axis))
}
