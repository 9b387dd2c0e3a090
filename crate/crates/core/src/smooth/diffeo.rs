use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SmoothError;
use crate::manifold::{add, cross, dot, norm, scale, sub, unit, BaseManifold, Point};
use crate::search::SearchRng;

/// Fixed RK4 step count for the time-`flow_time` flow.
pub const FLOW_STEPS: usize = 64;

/// Width of the swirl bumps in the sphere family (chord distance on the unit sphere).
pub const SWIRL_WIDTH: f64 = 0.6;

/// One Fourier mode of a torus vector field in coordinates normalized to the
/// unit square: `cos * cos(2π k·u) + sin * sin(2π k·u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowMode {
    pub k: [i32; 2],
    #[serde(default)]
    pub cos: [f64; 2],
    #[serde(default)]
    pub sin: [f64; 2],
}

/// A rotation field `w(p) · (axis × p)` localized by a Gaussian bump `w`
/// around `center`; `|axis|` is the angular speed at the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Swirl {
    pub center: [f64; 3],
    pub axis: [f64; 3],
    pub width: f64,
}

/// A diffeomorphism of the parameter domain: an isometry-like rigid part
/// followed by the time-`flow_time` flow of a smooth vector field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DiffeoParams {
    /// `u ↦ matrix · u + translation` in normalized coordinates (the
    /// translation is given in domain units), then the flow.
    Torus {
        matrix: [[i32; 2]; 2],
        translation: [f64; 2],
        #[serde(default)]
        modes: Vec<FlowMode>,
        #[serde(default = "unit_time")]
        flow_time: f64,
    },
    /// Rotation by ZYZ Euler angles, then the flow.
    Sphere {
        angles: [f64; 3],
        #[serde(default)]
        swirls: Vec<Swirl>,
        #[serde(default = "unit_time")]
        flow_time: f64,
    },
}

fn unit_time() -> f64 {
    1.0
}

/// Anything that maps points of a base surface to points of the same surface.
pub trait SurfaceMap {
    fn map_point(&self, base: &BaseManifold, x: Point) -> Point;
}

impl<T: SurfaceMap + ?Sized> SurfaceMap for &T {
    fn map_point(&self, base: &BaseManifold, x: Point) -> Point {
        (**self).map_point(base, x)
    }
}

/// `outer ∘ inner`.
#[derive(Debug, Clone, Copy)]
pub struct Compose<F, G> {
    pub outer: F,
    pub inner: G,
}

impl<F: SurfaceMap, G: SurfaceMap> SurfaceMap for Compose<F, G> {
    fn map_point(&self, base: &BaseManifold, x: Point) -> Point {
        self.outer.map_point(base, self.inner.map_point(base, x))
    }
}

/// `p ∘ q`: applies `q` first.
pub fn compose<'a>(
    p: &'a DiffeoParams,
    q: &'a DiffeoParams,
) -> Compose<&'a DiffeoParams, &'a DiffeoParams> {
    Compose { outer: p, inner: q }
}

impl SurfaceMap for DiffeoParams {
    fn map_point(&self, base: &BaseManifold, x: Point) -> Point {
        self.apply(base, x)
    }
}

/// All integer matrices with entries in `[-bound, bound]` and determinant ±1,
/// ordered by entry magnitude so the identity comes first.
pub fn unimodular_matrices(bound: i32) -> Vec<[[i32; 2]; 2]> {
    let r = -bound..=bound;
    let mut out = Vec::new();
    for a in r.clone() {
        for b in r.clone() {
            for c in r.clone() {
                for d in r.clone() {
                    if (a * d - b * c).abs() == 1 {
                        out.push([[a, b], [c, d]]);
                    }
                }
            }
        }
    }
    let key = |m: &[[i32; 2]; 2]| {
        let off = m[0][1].abs() + m[1][0].abs();
        let diag = (m[0][0] - 1).abs() + (m[1][1] - 1).abs();
        (off + diag, off, *m)
    };
    out.sort_by_key(key);
    out
}

/// Frequencies `k ≠ 0` with `|k|∞ ≤ degree`, one from each `±k` pair.
pub fn torus_frequencies(degree: usize) -> Vec<[i32; 2]> {
    let d = degree as i32;
    let mut out = Vec::new();
    for k0 in 0..=d {
        for k1 in -d..=d {
            if k0 > 0 || k1 > 0 {
                out.push([k0, k1]);
            }
        }
    }
    out
}

/// Swirl centers of the sphere family: `2 * degree + 2` Fibonacci points.
pub fn swirl_centers(degree: usize) -> Vec<Point> {
    let n = 2 * degree + 2;
    let golden = PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let (s, c) = (golden * k as f64).sin_cos();
            [r * c, r * s, z]
        })
        .collect()
}

impl DiffeoParams {
    pub fn identity(base: &BaseManifold) -> Self {
        match base {
            BaseManifold::FlatTorus { .. } => DiffeoParams::Torus {
                matrix: [[1, 0], [0, 1]],
                translation: [0.0; 2],
                modes: Vec::new(),
                flow_time: 1.0,
            },
            BaseManifold::Sphere { .. } => DiffeoParams::Sphere {
                angles: [0.0; 3],
                swirls: Vec::new(),
                flow_time: 1.0,
            },
        }
    }

    /// A random member of the degree-`degree` family with flow coefficients
    /// uniform in `[-amplitude, amplitude]`.
    pub fn random(base: &BaseManifold, degree: usize, amplitude: f64, rng: &mut SearchRng) -> Self {
        let coef = |rng: &mut SearchRng| rng.random_range(-amplitude..=amplitude);
        let pair = |rng: &mut SearchRng| [coef(rng), coef(rng)];
        match *base {
            BaseManifold::FlatTorus { lx, ly } => {
                let modes = torus_frequencies(degree)
                    .into_iter()
                    .map(|k| FlowMode {
                        k,
                        cos: pair(rng),
                        sin: pair(rng),
                    })
                    .collect();
                let mats = unimodular_matrices(2);
                DiffeoParams::Torus {
                    matrix: mats[rng.random_range(0..mats.len())],
                    translation: [rng.random::<f64>() * lx, rng.random::<f64>() * ly],
                    modes,
                    flow_time: 1.0,
                }
            }
            BaseManifold::Sphere { .. } => {
                let swirls = swirl_centers(degree)
                    .into_iter()
                    .map(|center| Swirl {
                        center,
                        axis: [coef(rng), coef(rng), coef(rng)],
                        width: SWIRL_WIDTH,
                    })
                    .collect();
                DiffeoParams::Sphere {
                    angles: [
                        rng.random::<f64>() * TAU,
                        rng.random::<f64>() * PI,
                        rng.random::<f64>() * TAU,
                    ],
                    swirls,
                    flow_time: 1.0,
                }
            }
        }
    }

    pub fn validate(&self, base: &BaseManifold) -> Result<(), SmoothError> {
        let bad = |msg: &str| Err(SmoothError::InvalidParams(msg.to_string()));
        let time = match (self, base) {
            (
                DiffeoParams::Torus {
                    matrix,
                    translation,
                    modes,
                    flow_time,
                },
                BaseManifold::FlatTorus { .. },
            ) => {
                let [[a, b], [c, d]] = *matrix;
                if (a * d - b * c).abs() != 1 {
                    return bad("torus matrix must have determinant ±1");
                }
                let finite = translation.iter().all(|v| v.is_finite())
                    && modes
                        .iter()
                        .all(|m| m.cos.iter().chain(&m.sin).all(|v| v.is_finite()));
                if !finite {
                    return bad("non-finite torus parameters");
                }
                *flow_time
            }
            (
                DiffeoParams::Sphere {
                    angles,
                    swirls,
                    flow_time,
                },
                BaseManifold::Sphere { .. },
            ) => {
                if !angles.iter().all(|v| v.is_finite()) {
                    return bad("non-finite rotation angles");
                }
                for s in swirls {
                    let finite = s.center.iter().chain(&s.axis).all(|v| v.is_finite());
                    if !finite || norm(s.center) == 0.0 || s.width.is_nan() || s.width <= 0.0 {
                        return bad("swirls need finite axes, nonzero centers and positive widths");
                    }
                }
                *flow_time
            }
            _ => return Err(SmoothError::DomainMismatch),
        };
        if !(0.0..=1.0).contains(&time) {
            return bad("flow_time must lie in [0, 1]");
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        match self {
            DiffeoParams::Torus {
                matrix,
                translation,
                modes,
                flow_time,
            } => {
                *matrix == [[1, 0], [0, 1]]
                    && *translation == [0.0; 2]
                    && (*flow_time == 0.0
                        || modes.iter().all(|m| m.cos == [0.0; 2] && m.sin == [0.0; 2]))
            }
            DiffeoParams::Sphere {
                angles,
                swirls,
                flow_time,
            } => {
                *angles == [0.0; 3]
                    && (*flow_time == 0.0 || swirls.iter().all(|s| s.axis == [0.0; 3]))
            }
        }
    }

    /// Image of `x`.
    ///
    /// # Panics
    ///
    /// If the parameter kind does not match `base`.
    pub fn apply(&self, base: &BaseManifold, x: Point) -> Point {
        if self.is_identity() {
            return base.wrap(x);
        }
        match (self, *base) {
            (
                DiffeoParams::Torus {
                    matrix,
                    translation,
                    modes,
                    flow_time,
                },
                BaseManifold::FlatTorus { lx, ly },
            ) => {
                let u = [x[0] / lx, x[1] / ly];
                let m = matrix.map(|r| r.map(f64::from));
                let mut u = [
                    m[0][0] * u[0] + m[0][1] * u[1] + translation[0] / lx,
                    m[1][0] * u[0] + m[1][1] * u[1] + translation[1] / ly,
                ];
                let field = |u: [f64; 2]| torus_field(modes, u);
                let h = flow_time / FLOW_STEPS as f64;
                if !modes.is_empty() && h > 0.0 {
                    for _ in 0..FLOW_STEPS {
                        u = rk4_step2(&field, u, h);
                    }
                }
                base.wrap([u[0] * lx, u[1] * ly, 0.0])
            }
            (
                DiffeoParams::Sphere {
                    angles,
                    swirls,
                    flow_time,
                },
                BaseManifold::Sphere { radius },
            ) => {
                let mut p = rotate(&rotation(*angles), unit(x));
                let h = flow_time / FLOW_STEPS as f64;
                if !swirls.is_empty() && h > 0.0 {
                    for _ in 0..FLOW_STEPS {
                        p = unit(rk4_step3(&|p| sphere_field(swirls, p), p, h));
                    }
                }
                base.wrap(scale(p, radius))
            }
            _ => panic!("diffeomorphism parameters do not match the base manifold"),
        }
    }

    /// Parameters of the inverse map.
    ///
    /// The rigid part is inverted and the flow is conjugated by it and run
    /// backwards, which is exact in exact arithmetic; numerically the
    /// round trip is limited by the RK4 error of the flow.
    pub fn reverse(&self, base: &BaseManifold) -> Self {
        match (self, *base) {
            (
                DiffeoParams::Torus {
                    matrix,
                    translation,
                    modes,
                    flow_time,
                },
                BaseManifold::FlatTorus { lx, ly },
            ) => {
                let [[a, b], [c, d]] = *matrix;
                let det = a * d - b * c;
                let inv = [[det * d, -det * b], [-det * c, det * a]];
                let invf = inv.map(|r| r.map(f64::from));
                let apply_inv = |v: [f64; 2]| {
                    [
                        invf[0][0] * v[0] + invf[0][1] * v[1],
                        invf[1][0] * v[0] + invf[1][1] * v[1],
                    ]
                };
                let t = [translation[0] / lx, translation[1] / ly];
                let ti = apply_inv(t);
                let modes = modes
                    .iter()
                    .map(|mode| {
                        let k = mode.k;
                        let phase = TAU * (k[0] as f64 * t[0] + k[1] as f64 * t[1]);
                        let (sp, cp) = phase.sin_cos();
                        let cv = apply_inv([
                            mode.cos[0] * cp + mode.sin[0] * sp,
                            mode.cos[1] * cp + mode.sin[1] * sp,
                        ]);
                        let sv = apply_inv([
                            mode.sin[0] * cp - mode.cos[0] * sp,
                            mode.sin[1] * cp - mode.cos[1] * sp,
                        ]);
                        FlowMode {
                            k: [a * k[0] + c * k[1], b * k[0] + d * k[1]],
                            cos: [-cv[0], -cv[1]],
                            sin: [-sv[0], -sv[1]],
                        }
                    })
                    .collect();
                DiffeoParams::Torus {
                    matrix: inv,
                    translation: [-ti[0] * lx, -ti[1] * ly],
                    modes,
                    flow_time: *flow_time,
                }
            }
            (
                DiffeoParams::Sphere {
                    angles,
                    swirls,
                    flow_time,
                },
                BaseManifold::Sphere { .. },
            ) => {
                let r = rotation(*angles);
                let rt = transpose(&r);
                let swirls = swirls
                    .iter()
                    .map(|s| Swirl {
                        center: rotate(&rt, s.center),
                        axis: scale(rotate(&rt, s.axis), -1.0),
                        width: s.width,
                    })
                    .collect();
                DiffeoParams::Sphere {
                    angles: [-angles[2], -angles[1], -angles[0]],
                    swirls,
                    flow_time: *flow_time,
                }
            }
            _ => panic!("diffeomorphism parameters do not match the base manifold"),
        }
    }
}

fn torus_field(modes: &[FlowMode], u: [f64; 2]) -> [f64; 2] {
    let mut v = [0.0; 2];
    for m in modes {
        let (s, c) = (TAU * (m.k[0] as f64 * u[0] + m.k[1] as f64 * u[1])).sin_cos();
        v[0] += m.cos[0] * c + m.sin[0] * s;
        v[1] += m.cos[1] * c + m.sin[1] * s;
    }
    v
}

fn sphere_field(swirls: &[Swirl], p: Point) -> Point {
    let pu = unit(p);
    swirls.iter().fold([0.0; 3], |v, s| {
        let d = sub(pu, unit(s.center));
        let w = (-dot(d, d) / (2.0 * s.width * s.width)).exp();
        add(v, scale(cross(s.axis, p), w))
    })
}

fn rk4_step2(f: &impl Fn([f64; 2]) -> [f64; 2], u: [f64; 2], h: f64) -> [f64; 2] {
    let at = |k: [f64; 2], c: f64| [u[0] + c * k[0], u[1] + c * k[1]];
    let k1 = f(u);
    let k2 = f(at(k1, h / 2.0));
    let k3 = f(at(k2, h / 2.0));
    let k4 = f(at(k3, h));
    [
        u[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        u[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn rk4_step3(f: &impl Fn(Point) -> Point, p: Point, h: f64) -> Point {
    let k1 = f(p);
    let k2 = f(add(p, scale(k1, h / 2.0)));
    let k3 = f(add(p, scale(k2, h / 2.0)));
    let k4 = f(add(p, scale(k3, h)));
    let sum = add(add(k1, scale(add(k2, k3), 2.0)), k4);
    add(p, scale(sum, h / 6.0))
}

type Mat3 = [[f64; 3]; 3];

/// `Rz(α) Ry(β) Rz(γ)`.
fn rotation([alpha, beta, gamma]: [f64; 3]) -> Mat3 {
    let rz = |t: f64| {
        let (s, c) = t.sin_cos();
        [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
    };
    let (s, c) = beta.sin_cos();
    let ry = [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]];
    matmul(&matmul(&rz(alpha), &ry), &rz(gamma))
}

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

fn rotate(r: &Mat3, p: Point) -> Point {
    [dot(r[0], p), dot(r[1], p), dot(r[2], p)]
}
