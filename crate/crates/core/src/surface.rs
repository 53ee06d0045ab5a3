//! One particle constrained to a parametrized embedded submanifold.
//!
//! A [`Chart`] maps Lagrangian coordinates `y ∈ ℝˡ` (dimensionless) to
//! points of the pattern space. Tangent vectors `∂ₐ` and second derivatives
//! `∂ₐ∂_b` are either supplied analytically or obtained by central finite
//! differences. From them we build the induced metric `g_con` (dimension
//! `L²`), its Christoffel symbols, the second fundamental form and the
//! reaction force required by the constraint.
//!
//! The coordinate form of the reaction is evaluated on an adapted chart
//! `X(y, n) = embed(y) + Σ nʳ νᵣ(y)` obtained by completing the tangent frame
//! with unit normals.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::geom3::{flat, Covec3, Point3, Vec3};
use crate::units::{Dim, Quantity};

/// Induced-metric eigenvalue ratio below which a chart is degenerate.
pub const DEGENERACY_RATIO: f64 = 1e-10;
/// Base step for central finite differences, scaled by `max(1, |yᵃ|)`.
pub const FD_STEP: f64 = 1e-5;

pub type EmbedFn = Arc<dyn Fn(&[f64]) -> Vector3<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> Vec<Vector3<f64>> + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&[f64]) -> Vec<Vec<Vector3<f64>>> + Send + Sync>;

/// A parametrization of a submanifold of dimension `l ∈ {1, 2, 3}`.
#[derive(Clone)]
pub struct Chart {
    dim_l: usize,
    name: String,
    embed: EmbedFn,
    jacobian: Option<JacobianFn>,
    hessian: Option<HessianFn>,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("name", &self.name)
            .field("dim_l", &self.dim_l)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("analytic_hessian", &self.hessian.is_some())
            .finish()
    }
}

/// Coordinates and coordinate velocities (`T⁻¹`) of a constrained particle.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    pub y: Vec<f64>,
    pub y_dot: Vec<f64>,
}

impl ChartPoint {
    pub fn new(y: Vec<f64>, y_dot: Vec<f64>) -> Result<Self> {
        if y.len() != y_dot.len() {
            return Err(Error::LengthMismatch {
                context: "chart point",
                left: y.len(),
                right: y_dot.len(),
            });
        }
        if !y.iter().chain(&y_dot).all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("chart point is not finite".into()));
        }
        Ok(ChartPoint { y, y_dot })
    }
}

/// `(g_con)_ab` with dimension `L²`.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedMetric {
    pub matrix: DMatrix<f64>,
    pub dim: Dim,
}

/// `Γᵃ_bc`, indexed `gamma[a][b][c]`.
pub type Christoffel = Vec<Vec<Vec<f64>>>;

fn fd_step(y: &[f64], a: usize) -> f64 {
    FD_STEP * y[a].abs().max(1.0)
}

fn shifted(y: &[f64], a: usize, h: f64) -> Vec<f64> {
    let mut z = y.to_vec();
    z[a] += h;
    z
}

impl Chart {
    /// Chart from an embedding alone; derivatives by finite differences.
    pub fn new<F>(dim_l: usize, name: impl Into<String>, embed: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vector3<f64> + Send + Sync + 'static,
    {
        if !(1..=3).contains(&dim_l) {
            return Err(Error::InvalidInput(format!(
                "chart dimension must be 1, 2 or 3, got {dim_l}"
            )));
        }
        Ok(Chart {
            dim_l,
            name: name.into(),
            embed: Arc::new(embed),
            jacobian: None,
            hessian: None,
        })
    }

    pub fn with_jacobian<F>(mut self, jac: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<Vector3<f64>> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_hessian<F>(mut self, hess: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<Vec<Vector3<f64>>> + Send + Sync + 'static,
    {
        self.hessian = Some(Arc::new(hess));
        self
    }

    /// Same embedding with all derivatives by finite differences.
    pub fn without_derivatives(&self) -> Self {
        Chart {
            jacobian: None,
            hessian: None,
            name: format!("{} (finite differences)", self.name),
            ..self.clone()
        }
    }

    pub fn dim_l(&self) -> usize {
        self.dim_l
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.jacobian.is_some() && self.hessian.is_some()
    }

    /// `(θ, φ) ↦ ρ(sinθ cosφ, sinθ sinφ, cosθ)`.
    pub fn sphere(rho: f64) -> Result<Self> {
        check_radius(rho)?;
        Ok(Chart::new(2, format!("sphere({rho})"), move |y| {
            let (st, ct) = y[0].sin_cos();
            let (sp, cp) = y[1].sin_cos();
            Vector3::new(st * cp, st * sp, ct) * rho
        })?
        .with_jacobian(move |y| {
            let (st, ct) = y[0].sin_cos();
            let (sp, cp) = y[1].sin_cos();
            vec![
                Vector3::new(ct * cp, ct * sp, -st) * rho,
                Vector3::new(-st * sp, st * cp, 0.0) * rho,
            ]
        })
        .with_hessian(move |y| {
            let (st, ct) = y[0].sin_cos();
            let (sp, cp) = y[1].sin_cos();
            let tt = Vector3::new(-st * cp, -st * sp, -ct) * rho;
            let tp = Vector3::new(-ct * sp, ct * cp, 0.0) * rho;
            let pp = Vector3::new(-st * cp, -st * sp, 0.0) * rho;
            vec![vec![tt, tp], vec![tp, pp]]
        }))
    }

    /// `φ ↦ (ρ cosφ, ρ sinφ, 0)`.
    pub fn circle(rho: f64) -> Result<Self> {
        check_radius(rho)?;
        Ok(Chart::new(1, format!("circle({rho})"), move |y| {
            let (s, c) = y[0].sin_cos();
            Vector3::new(c, s, 0.0) * rho
        })?
        .with_jacobian(move |y| {
            let (s, c) = y[0].sin_cos();
            vec![Vector3::new(-s, c, 0.0) * rho]
        })
        .with_hessian(move |y| {
            let (s, c) = y[0].sin_cos();
            vec![vec![Vector3::new(-c, -s, 0.0) * rho]]
        }))
    }

    /// `(u, v) ↦ (u, v, 0)`.
    pub fn plane() -> Self {
        Chart::new(2, "plane", |y| Vector3::new(y[0], y[1], 0.0))
            .expect("valid dimension")
            .with_jacobian(|_| vec![Vector3::x(), Vector3::y()])
            .with_hessian(|_| vec![vec![Vector3::zeros(); 2]; 2])
    }

    /// `(φ, z) ↦ (ρ cosφ, ρ sinφ, z)`.
    pub fn cylinder(rho: f64) -> Result<Self> {
        check_radius(rho)?;
        Ok(Chart::new(2, format!("cylinder({rho})"), move |y| {
            let (s, c) = y[0].sin_cos();
            Vector3::new(rho * c, rho * s, y[1])
        })?
        .with_jacobian(move |y| {
            let (s, c) = y[0].sin_cos();
            vec![Vector3::new(-s, c, 0.0) * rho, Vector3::z()]
        })
        .with_hessian(move |y| {
            let (s, c) = y[0].sin_cos();
            let z = Vector3::zeros();
            vec![vec![Vector3::new(-c, -s, 0.0) * rho, z], vec![z, z]]
        }))
    }

    /// Parse a built-in chart name: `sphere(ρ)`, `circle(ρ)`, `plane`,
    /// `cylinder(ρ)`.
    pub fn builtin(text: &str) -> Result<Self> {
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if s == "plane" {
            return Ok(Chart::plane());
        }
        let (name, rest) = s
            .split_once('(')
            .ok_or_else(|| Error::InvalidInput(format!("unknown chart '{text}'")))?;
        let arg = rest
            .strip_suffix(')')
            .ok_or_else(|| Error::InvalidInput(format!("malformed chart '{text}'")))?;
        let rho: f64 = arg
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad radius in chart '{text}'")))?;
        match name {
            "sphere" => Chart::sphere(rho),
            "circle" => Chart::circle(rho),
            "cylinder" => Chart::cylinder(rho),
            _ => Err(Error::InvalidInput(format!("unknown chart '{text}'"))),
        }
    }

    fn check_coords(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim_l {
            return Err(Error::LengthMismatch {
                context: "chart coordinates",
                left: self.dim_l,
                right: y.len(),
            });
        }
        if !y.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("chart coordinates are not finite".into()));
        }
        Ok(())
    }

    pub fn point(&self, y: &[f64]) -> Point3 {
        Point3::from_raw((self.embed)(y))
    }

    /// Tangent vectors `∂ₐ` (dimensionless).
    pub fn tangents(&self, y: &[f64]) -> Vec<Vector3<f64>> {
        if let Some(j) = &self.jacobian {
            return j(y);
        }
        (0..self.dim_l)
            .map(|a| {
                let h = fd_step(y, a);
                ((self.embed)(&shifted(y, a, h)) - (self.embed)(&shifted(y, a, -h))) / (2.0 * h)
            })
            .collect()
    }

    /// Second derivatives `∂ₐ∂_b`.
    pub fn second_derivatives(&self, y: &[f64]) -> Vec<Vec<Vector3<f64>>> {
        if let Some(hs) = &self.hessian {
            return hs(y);
        }
        let l = self.dim_l;
        let mut out = vec![vec![Vector3::zeros(); l]; l];
        if self.jacobian.is_some() {
            for a in 0..l {
                let h = fd_step(y, a);
                let plus = self.tangents(&shifted(y, a, h));
                let minus = self.tangents(&shifted(y, a, -h));
                for b in 0..l {
                    out[a][b] += (plus[b] - minus[b]) / (4.0 * h);
                    out[b][a] += (plus[b] - minus[b]) / (4.0 * h);
                }
            }
            return out;
        }
        // second differences of the embedding need a larger step
        let e = &self.embed;
        for a in 0..l {
            let ha = 1e-4 * y[a].abs().max(1.0);
            for b in a..l {
                let hb = 1e-4 * y[b].abs().max(1.0);
                let d = if a == b {
                    (e(&shifted(y, a, ha)) - 2.0 * e(y) + e(&shifted(y, a, -ha))) / (ha * ha)
                } else {
                    let pp = e(&shifted(&shifted(y, a, ha), b, hb));
                    let pm = e(&shifted(&shifted(y, a, ha), b, -hb));
                    let mp = e(&shifted(&shifted(y, a, -ha), b, hb));
                    let mm = e(&shifted(&shifted(y, a, -ha), b, -hb));
                    (pp - pm - mp + mm) / (4.0 * ha * hb)
                };
                out[a][b] = d;
                out[b][a] = d;
            }
        }
        out
    }

    fn raw_metric(&self, y: &[f64]) -> DMatrix<f64> {
        let t = self.tangents(y);
        DMatrix::from_fn(self.dim_l, self.dim_l, |a, b| t[a].dot(&t[b]))
    }

    fn checked_metric(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        self.check_coords(y)?;
        let g = self.raw_metric(y);
        let eig = SymmetricEigen::new(g.clone()).eigenvalues;
        let max = eig.max();
        let min = eig.min();
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        if !(ratio > DEGENERACY_RATIO) {
            return Err(Error::DegenerateChart {
                y: y.to_vec(),
                ratio,
            });
        }
        Ok(g)
    }
}

fn check_radius(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("radius must be positive, got {rho}")))
    }
}

fn invert(g: &DMatrix<f64>) -> DMatrix<f64> {
    g.clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| g.clone().pseudo_inverse(1e-300).expect("svd converges"))
}

/// `(g_con)_ab = g(∂ₐ, ∂_b)`.
pub fn induced_metric(chart: &Chart, y: &[f64]) -> Result<InducedMetric> {
    Ok(InducedMetric {
        matrix: chart.checked_metric(y)?,
        dim: Dim::AREA,
    })
}

/// `∂_c g_ab = g(∂_c∂ₐ, ∂_b) + g(∂ₐ, ∂_c∂_b)`, indexed `[c][a][b]`.
fn metric_derivatives(chart: &Chart, y: &[f64]) -> Vec<DMatrix<f64>> {
    let l = chart.dim_l;
    let t = chart.tangents(y);
    let h = chart.second_derivatives(y);
    (0..l)
        .map(|c| DMatrix::from_fn(l, l, |a, b| h[c][a].dot(&t[b]) + t[a].dot(&h[c][b])))
        .collect()
}

/// Levi-Civita symbols `Γᵃ_bc` of the induced metric.
pub fn christoffel_intrinsic(chart: &Chart, y: &[f64]) -> Result<Christoffel> {
    let g = chart.checked_metric(y)?;
    let ginv = invert(&g);
    let dg = metric_derivatives(chart, y);
    let l = chart.dim_l;
    let mut gamma = vec![vec![vec![0.0; l]; l]; l];
    for a in 0..l {
        for b in 0..l {
            for c in b..l {
                let mut s = 0.0;
                for d in 0..l {
                    s += ginv[(a, d)] * (dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)]);
                }
                gamma[a][b][c] = 0.5 * s;
                gamma[a][c][b] = 0.5 * s;
            }
        }
    }
    Ok(gamma)
}

fn quadratic(d2: &[Vec<Vector3<f64>>], yd: &[f64]) -> Vector3<f64> {
    let mut acc = Vector3::zeros();
    for (a, row) in d2.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            acc += v * (yd[a] * yd[b]);
        }
    }
    acc
}

/// Component of `w` along the tangent space.
fn tangential_part(t: &[Vector3<f64>], ginv: &DMatrix<f64>, w: &Vector3<f64>) -> Vector3<f64> {
    let l = t.len();
    let proj = DVector::from_fn(l, |a, _| t[a].dot(w));
    let coef = ginv * proj;
    (0..l).map(|a| t[a] * coef[a]).sum()
}

fn check_velocity(chart: &Chart, y_dot: &[f64]) -> Result<()> {
    if y_dot.len() != chart.dim_l {
        return Err(Error::LengthMismatch {
            context: "chart velocity",
            left: chart.dim_l,
            right: y_dot.len(),
        });
    }
    Ok(())
}

/// Normal acceleration `N(y, ẏ)`, dimension `T⁻²`: the extrinsic
/// acceleration of the coordinate curve with `ÿ = 0` minus its tangential
/// part.
pub fn second_fundamental_form(chart: &Chart, y: &[f64], y_dot: &[f64]) -> Result<Vec3> {
    check_velocity(chart, y_dot)?;
    let g = chart.checked_metric(y)?;
    let ginv = invert(&g);
    let t = chart.tangents(y);
    let ext = quadratic(&chart.second_derivatives(y), y_dot);
    let n = ext - tangential_part(&t, &ginv, &ext);
    Ok(Vec3::from_raw(n, Dim::ACCELERATION))
}

/// Extrinsic acceleration `Σ ∂ₐ ÿᵃ + Σ ∂ₐ∂_b ẏᵃẏᵇ` of a motion in the chart.
pub fn extrinsic_acceleration(chart: &Chart, y: &[f64], y_dot: &[f64], y_ddot: &[f64]) -> Result<Vec3> {
    check_velocity(chart, y_dot)?;
    check_velocity(chart, y_ddot)?;
    chart.check_coords(y)?;
    let t = chart.tangents(y);
    let lin: Vector3<f64> = t.iter().zip(y_ddot).map(|(v, a)| v * *a).sum();
    Ok(Vec3::from_raw(
        lin + quadratic(&chart.second_derivatives(y), y_dot),
        Dim::ACCELERATION,
    ))
}

/// Intrinsic (covariant) acceleration `Σ (ÿᵃ + Γᵃ_bc ẏᵇẏᶜ) ∂ₐ`.
pub fn intrinsic_acceleration(chart: &Chart, y: &[f64], y_dot: &[f64], y_ddot: &[f64]) -> Result<Vec3> {
    check_velocity(chart, y_dot)?;
    check_velocity(chart, y_ddot)?;
    let gamma = christoffel_intrinsic(chart, y)?;
    let t = chart.tangents(y);
    let l = chart.dim_l;
    let mut acc = Vector3::zeros();
    for a in 0..l {
        let mut c = y_ddot[a];
        for b in 0..l {
            for d in 0..l {
                c += gamma[a][b][d] * y_dot[b] * y_dot[d];
            }
        }
        acc += t[a] * c;
    }
    Ok(Vec3::from_raw(acc, Dim::ACCELERATION))
}

/// Components `F_a = ⟨F, ∂ₐ⟩`.
pub fn force_components(chart: &Chart, y: &[f64], force: Covec3) -> Vec<f64> {
    chart.tangents(y).iter().map(|t| force.a.dot(t)).collect()
}

/// Annihilator part `F⊥ = F − Σ F_a g_con^{ab} g♭(∂_b)`.
pub fn normal_force(chart: &Chart, y: &[f64], force: Covec3) -> Result<Covec3> {
    let g = chart.checked_metric(y)?;
    let ginv = invert(&g);
    let t = chart.tangents(y);
    let tan = tangential_part(&t, &ginv, &force.a);
    Ok(Covec3::from_raw(force.a - tan, force.dim))
}

/// Coordinate acceleration `ÿᵃ = −Γᵃ_bc ẏᵇẏᶜ + g_con^{ab} F_b / m`.
pub fn coordinate_acceleration(chart: &Chart, y: &[f64], y_dot: &[f64], force: Covec3, mass: Quantity) -> Result<Vec<f64>> {
    force.dim.expect(Dim::FORCE, "surface force")?;
    let m = mass.value_in(Dim::MASS, "particle mass")?;
    check_velocity(chart, y_dot)?;
    let gamma = christoffel_intrinsic(chart, y)?;
    let ginv = invert(&chart.raw_metric(y));
    let fa = DVector::from_vec(force_components(chart, y, force));
    let push = ginv * fa / m;
    let l = chart.dim_l;
    Ok((0..l)
        .map(|a| {
            let mut s = push[a];
            for b in 0..l {
                for c in 0..l {
                    s -= gamma[a][b][c] * y_dot[b] * y_dot[c];
                }
            }
            s
        })
        .collect())
}

/// Reaction `R = m g♭(N) − F⊥` keeping the particle on the submanifold.
pub fn reaction_force(chart: &Chart, y: &[f64], y_dot: &[f64], force: Covec3, mass: Quantity) -> Result<Covec3> {
    force.dim.expect(Dim::FORCE, "surface force")?;
    mass.dim.expect(Dim::MASS, "particle mass")?;
    let n = second_fundamental_form(chart, y, y_dot)?;
    let f_perp = normal_force(chart, y, force)?;
    flat(n).scale_by(mass).try_sub(f_perp)
}

/// Adapted chart around a chart point: tangents plus unit normals.
struct AdaptedChart<'a> {
    chart: &'a Chart,
    /// Reference direction used to complete a curve's frame.
    reference: Vector3<f64>,
}

impl<'a> AdaptedChart<'a> {
    fn new(chart: &'a Chart, y: &[f64]) -> Self {
        let mut reference = Vector3::zeros();
        if chart.dim_l == 1 {
            let t = chart.tangents(y)[0].normalize();
            let k = (0..3)
                .min_by(|&a, &b| t[a].abs().total_cmp(&t[b].abs()))
                .expect("three components");
            reference[k] = 1.0;
        }
        AdaptedChart { chart, reference }
    }

    fn normals(&self, y: &[f64]) -> Vec<Vector3<f64>> {
        let t = self.chart.tangents(y);
        match self.chart.dim_l {
            1 => {
                let u = t[0].normalize();
                let n1 = (self.reference - u * u.dot(&self.reference)).normalize();
                vec![n1, u.cross(&n1)]
            }
            2 => vec![t[0].cross(&t[1]).normalize()],
            _ => vec![],
        }
    }

    /// Columns `∂ᵢX` at `x = (y, n)`.
    fn frame(&self, x: &[f64]) -> Matrix3<f64> {
        let l = self.chart.dim_l;
        let (y, n) = x.split_at(l);
        let t = self.chart.tangents(y);
        let nu = self.normals(y);
        let mut cols = [Vector3::zeros(); 3];
        for a in 0..l {
            let mut col = t[a];
            if n.iter().any(|&v| v != 0.0) {
                let h = fd_step(y, a);
                let np = self.normals(&shifted(y, a, h));
                let nm = self.normals(&shifted(y, a, -h));
                for r in 0..n.len() {
                    col += (np[r] - nm[r]) / (2.0 * h) * n[r];
                }
            }
            cols[a] = col;
        }
        for (r, v) in nu.iter().enumerate() {
            cols[l + r] = *v;
        }
        Matrix3::from_columns(&cols)
    }

    fn metric(&self, x: &[f64]) -> Matrix3<f64> {
        let f = self.frame(x);
        f.transpose() * f
    }

    /// `∂ₖ G_ij` at `x`, indexed `[k]`. The metric is quadratic in the
    /// normal coordinates, so a unit central difference there is exact.
    fn metric_derivatives(&self, x: &[f64]) -> [Matrix3<f64>; 3] {
        let l = self.chart.dim_l;
        std::array::from_fn(|k| {
            let h = if k < l { fd_step(x, k) } else { 1.0 };
            (self.metric(&shifted(x, k, h)) - self.metric(&shifted(x, k, -h))) / (2.0 * h)
        })
    }
}

/// Reaction from the coordinate expression on an adapted chart:
/// `R_r = m(Γ_{r,ab} − G_rc g_con^{cd} Γ_{d,ab}) ẏᵃẏᵇ − F_r + g_con^{ba} F_a G_br`
/// for normal indices `r`, with `R_a = 0` on tangent indices. Components
/// are mapped back through the inverse of the adapted frame.
pub fn reaction_force_explicit(chart: &Chart, y: &[f64], y_dot: &[f64], force: Covec3, mass: Quantity) -> Result<Covec3> {
    force.dim.expect(Dim::FORCE, "surface force")?;
    let m = mass.value_in(Dim::MASS, "particle mass")?;
    check_velocity(chart, y_dot)?;
    let g_con = chart.checked_metric(y)?;
    let ginv = invert(&g_con);
    let l = chart.dim_l;
    let adapted = AdaptedChart::new(chart, y);
    let mut x = y.to_vec();
    x.resize(3, 0.0);
    let frame = adapted.frame(&x);
    let big_g = frame.transpose() * frame;
    let dg = adapted.metric_derivatives(&x);
    // first-kind symbols Γ_{k,ij} = ½(∂ᵢG_jk + ∂ⱼG_ik − ∂ₖG_ij)
    let gamma1 = |k: usize, i: usize, j: usize| 0.5 * (dg[i][(j, k)] + dg[j][(i, k)] - dg[k][(i, j)]);
    let fx: Vector3<f64> = frame.transpose() * force.a;

    let mut comps = Vector3::zeros();
    for r in l..3 {
        let mut inertial = 0.0;
        for a in 0..l {
            for b in 0..l {
                let mut corr = 0.0;
                for c in 0..l {
                    for d in 0..l {
                        corr += big_g[(r, c)] * ginv[(c, d)] * gamma1(d, a, b);
                    }
                }
                inertial += (gamma1(r, a, b) - corr) * y_dot[a] * y_dot[b];
            }
        }
        let mut tangential = 0.0;
        for a in 0..l {
            for b in 0..l {
                tangential += ginv[(b, a)] * fx[a] * big_g[(b, r)];
            }
        }
        comps[r] = m * inertial - fx[r] + tangential;
    }
    let inv = frame
        .try_inverse()
        .ok_or_else(|| Error::DegenerateChart { y: y.to_vec(), ratio: 0.0 })?;
    Ok(Covec3::from_raw(inv.transpose() * comps, Dim::FORCE))
}
