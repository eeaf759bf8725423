//! Chart-level Riemannian and almost-complex geometry: metric jets,
//! Christoffel symbols, curvature, Lie brackets, the Nijenhuis tensor and
//! the constant-holomorphic-curvature formula.
//!
//! # Curvature conventions
//!
//! The curvature operator is
//!
//! ```text
//! R(X,Y)Z = ∇_X ∇_Y Z − ∇_Y ∇_X Z − ∇_{[X,Y]} Z,
//! ```
//!
//! and the stored fully-lowered components use the classical index-lowered
//! layout
//!
//! ```text
//! R_{ijkl} = g( R(∂_k, ∂_l) ∂_j , ∂_i ),
//! ```
//!
//! so that for the round sphere chart `g = diag(1, sin²x1)` the component
//! `R_1212` equals `sin²x1` (positive sectional curvature). Use
//! [`CurvatureAtPoint::pairing`] for the operator pairing `g(R(X,Y)Z, W)`.

use crate::expr::{ExprError, Jet2, Params, ScalarExpr, VectorField};
use crate::frames::{self, LinalgError};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("metric entry ({i},{j}) declared below the diagonal; declare i ≤ j")]
    LowerTriangleMetric { i: usize, j: usize },
    #[error("chart has no complex structure")]
    MissingComplexStructure,
    #[error("a complex structure needs an even-dimensional chart (dim = {0})")]
    OddDimComplexStructure(usize),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
}

/// A chart-described Riemannian manifold: a dimension, a metric given as a
/// symmetric matrix of scalar expressions, and optionally a (1,1) tensor J
/// (column index = input slot).
#[derive(Debug, Clone)]
pub struct ChartManifold {
    dim: usize,
    metric: Vec<ScalarExpr>,            // row-major dim×dim, mirrored
    complex_structure: Option<Vec<ScalarExpr>>, // row-major dim×dim
}

impl ChartManifold {
    pub fn euclidean(dim: usize) -> ChartManifold {
        assert!(dim > 0);
        let mut metric = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                metric.push(ScalarExpr::constant(if i == j { 1.0 } else { 0.0 }, dim));
            }
        }
        ChartManifold {
            dim,
            metric,
            complex_structure: None,
        }
    }

    /// Replace metric entries from an upper-triangle list; entries with
    /// i > j are rejected, the mirror is filled in automatically.
    pub fn set_metric_entry(
        &mut self,
        i: usize,
        j: usize,
        expr: ScalarExpr,
    ) -> Result<(), GeomError> {
        if i > j {
            return Err(GeomError::LowerTriangleMetric { i: i + 1, j: j + 1 });
        }
        if j >= self.dim {
            return Err(GeomError::DimMismatch(format!(
                "metric index ({},{}) outside chart of dimension {}",
                i + 1,
                j + 1,
                self.dim
            )));
        }
        self.metric[i * self.dim + j] = expr.clone();
        self.metric[j * self.dim + i] = expr;
        Ok(())
    }

    pub fn set_complex_structure_entry(
        &mut self,
        row: usize,
        col: usize,
        expr: ScalarExpr,
    ) -> Result<(), GeomError> {
        if self.dim % 2 != 0 {
            return Err(GeomError::OddDimComplexStructure(self.dim));
        }
        if row >= self.dim || col >= self.dim {
            return Err(GeomError::DimMismatch(format!(
                "J index ({},{}) outside chart of dimension {}",
                row + 1,
                col + 1,
                self.dim
            )));
        }
        let j = self.complex_structure.get_or_insert_with(|| {
            (0..self.dim * self.dim)
                .map(|_| ScalarExpr::constant(0.0, self.dim))
                .collect()
        });
        j[row * self.dim + col] = expr;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_complex_structure(&self) -> bool {
        self.complex_structure.is_some()
    }

    pub fn metric_expr(&self, i: usize, j: usize) -> &ScalarExpr {
        &self.metric[i * self.dim + j]
    }

    /// Rows of J as expressions, for AST-level application to fields.
    pub fn complex_structure_rows(&self) -> Result<Vec<Vec<ScalarExpr>>, GeomError> {
        let j = self
            .complex_structure
            .as_ref()
            .ok_or(GeomError::MissingComplexStructure)?;
        Ok((0..self.dim)
            .map(|r| (0..self.dim).map(|c| j[r * self.dim + c].clone()).collect())
            .collect())
    }

    /// Metric matrix at a point (no definiteness check).
    pub fn metric_at(&self, p: &[f64], params: &Params) -> Result<DMatrix<f64>, GeomError> {
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                g[(i, j)] = self.metric[i * self.dim + j].eval(p, params)?;
            }
        }
        Ok(g)
    }

    /// Metric with jets, inverse, and positive-definiteness check.
    pub fn metric_data_at(&self, p: &[f64], params: &Params) -> Result<MetricData, GeomError> {
        let mut jets = Vec::with_capacity(self.dim * self.dim);
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let jet = self.metric[i * self.dim + j].eval_jet2(p, params)?;
                g[(i, j)] = jet.value;
                jets.push(jet);
            }
        }
        let g_inv = frames::metric_inverse(&g)?;
        Ok(MetricData {
            dim: self.dim,
            g,
            g_inv,
            jets,
        })
    }

    /// J as a numeric matrix at a point.
    pub fn complex_structure_at(
        &self,
        p: &[f64],
        params: &Params,
    ) -> Result<DMatrix<f64>, GeomError> {
        let j = self
            .complex_structure
            .as_ref()
            .ok_or(GeomError::MissingComplexStructure)?;
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out[(r, c)] = j[r * self.dim + c].eval(p, params)?;
            }
        }
        Ok(out)
    }

    /// Jets of every J entry, for ∇J.
    fn complex_structure_jets_at(
        &self,
        p: &[f64],
        params: &Params,
    ) -> Result<Vec<Jet2>, GeomError> {
        let j = self
            .complex_structure
            .as_ref()
            .ok_or(GeomError::MissingComplexStructure)?;
        j.iter()
            .map(|e| e.eval_jet2(p, params).map_err(GeomError::from))
            .collect()
    }
}

/// Metric value, inverse and entry jets at one point.
pub struct MetricData {
    dim: usize,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    jets: Vec<Jet2>,
}

impl MetricData {
    fn d_g(&self, k: usize, i: usize, j: usize) -> f64 {
        self.jets[i * self.dim + j].grad[k]
    }

    fn d2_g(&self, k: usize, l: usize, i: usize, j: usize) -> f64 {
        self.jets[i * self.dim + j].hess[(k, l)]
    }
}

/// Γ^k_{ij}, stored as one matrix over (i,j) per upper index k.
#[derive(Debug, Clone)]
pub struct Christoffels {
    pub gamma: Vec<DMatrix<f64>>,
}

impl Christoffels {
    /// Γ(x, y)^k = Γ^k_{ij} x^i y^j.
    pub fn contract(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let dim = self.gamma.len();
        let mut out = DVector::zeros(dim);
        for k in 0..dim {
            out[k] = (x.transpose() * &self.gamma[k] * y)[(0, 0)];
        }
        out
    }
}

/// Γ^k_{ij} = ½ g^{kl} (∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij}).
pub fn christoffel_at(
    manifold: &ChartManifold,
    p: &[f64],
    params: &Params,
) -> Result<Christoffels, GeomError> {
    let md = manifold.metric_data_at(p, params)?;
    Ok(christoffel_from_metric(&md))
}

fn christoffel_from_metric(md: &MetricData) -> Christoffels {
    let n = md.dim;
    let mut gamma = vec![DMatrix::zeros(n, n); n];
    for i in 0..n {
        for j in i..n {
            // lower-index symbol Γ_{lij}
            for k in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    let lower = 0.5 * (md.d_g(i, j, l) + md.d_g(j, i, l) - md.d_g(l, i, j));
                    acc += md.g_inv[(k, l)] * lower;
                }
                gamma[k][(i, j)] = acc;
                gamma[k][(j, i)] = acc;
            }
        }
    }
    Christoffels { gamma }
}

/// Fully lowered curvature at a point; see the module docs for the
/// component layout.
pub struct CurvatureAtPoint {
    pub point: Vec<f64>,
    dim: usize,
    /// `lowered[i][j][k][l] = g(R(∂_k,∂_l)∂_j, ∂_i)`
    lowered: Vec<f64>,
    g: DMatrix<f64>,
}

impl CurvatureAtPoint {
    #[inline]
    pub fn component(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.dim;
        self.lowered[((i * n + j) * n + k) * n + l]
    }

    /// The operator pairing `g(R(x,y)z, w)`.
    pub fn pairing(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        z: &DVector<f64>,
        w: &DVector<f64>,
    ) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for a in 0..n {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                if y[b] == 0.0 {
                    continue;
                }
                for c in 0..n {
                    for d in 0..n {
                        // g(R(∂a,∂b)∂c, ∂d) = R_{dcab}
                        acc += x[a] * y[b] * z[c] * w[d] * self.component(d, c, a, b);
                    }
                }
            }
        }
        acc
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// Max violations of the pair symmetries, the slot antisymmetries and
    /// the first Bianchi identity.
    pub fn symmetry_residuals(&self) -> CurvatureSymmetry {
        let n = self.dim;
        let mut antisym12 = 0.0_f64;
        let mut antisym34 = 0.0_f64;
        let mut pair = 0.0_f64;
        let mut bianchi = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.component(i, j, k, l);
                        antisym12 = antisym12.max((r + self.component(j, i, k, l)).abs());
                        antisym34 = antisym34.max((r + self.component(i, j, l, k)).abs());
                        pair = pair.max((r - self.component(k, l, i, j)).abs());
                    }
                }
            }
        }
        // first Bianchi on the operator: R(x,y)z + R(y,z)x + R(z,x)y = 0
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let cycle = self.component(d, c, a, b)
                            + self.component(d, a, b, c)
                            + self.component(d, b, c, a);
                        bianchi = bianchi.max(cycle.abs());
                    }
                }
            }
        }
        CurvatureSymmetry {
            antisym12,
            antisym34,
            pair,
            bianchi,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.lowered.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

pub struct CurvatureSymmetry {
    pub antisym12: f64,
    pub antisym34: f64,
    pub pair: f64,
    pub bianchi: f64,
}

/// Lowered Riemann tensor from metric second jets:
/// ∂Γ is assembled from ∂²g and ∂g⁻¹, then lowered with g.
pub fn riemann_at(
    manifold: &ChartManifold,
    p: &[f64],
    params: &Params,
) -> Result<CurvatureAtPoint, GeomError> {
    let md = manifold.metric_data_at(p, params)?;
    let n = md.dim;
    let chris = christoffel_from_metric(&md);

    // ∂_l g^{kc} = − g^{ka} (∂_l g_{ab}) g^{bc}
    let mut dginv = vec![DMatrix::zeros(n, n); n];
    for l in 0..n {
        let mut dg = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                dg[(a, b)] = md.d_g(l, a, b);
            }
        }
        dginv[l] = -(&md.g_inv * dg * &md.g_inv);
    }

    // ∂_d Γ^k_{ij}
    let dgamma = |d: usize, k: usize, i: usize, j: usize| -> f64 {
        let mut acc = 0.0;
        for l in 0..n {
            let lower = 0.5 * (md.d_g(i, j, l) + md.d_g(j, i, l) - md.d_g(l, i, j));
            let dlower = 0.5
                * (md.d2_g(d, i, j, l) + md.d2_g(d, j, i, l) - md.d2_g(d, l, i, j));
            acc += dginv[d][(k, l)] * lower + md.g_inv[(k, l)] * dlower;
        }
        acc
    };

    // operator components R(∂a,∂b)∂c = R^k_{abc} ∂k
    let mut op = vec![0.0; n * n * n * n];
    let idx = |k: usize, a: usize, b: usize, c: usize| ((k * n + a) * n + b) * n + c;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for k in 0..n {
                    let mut val = dgamma(a, k, b, c) - dgamma(b, k, a, c);
                    for e in 0..n {
                        val += chris.gamma[k][(a, e)] * chris.gamma[e][(b, c)]
                            - chris.gamma[k][(b, e)] * chris.gamma[e][(a, c)];
                    }
                    op[idx(k, a, b, c)] = val;
                }
            }
        }
    }

    // R_{ijkl} = g(R(∂k,∂l)∂j, ∂i) = g_{ia} R^a_{klj}
    let mut lowered = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = 0.0;
                    for a in 0..n {
                        acc += md.g[(i, a)] * op[idx(a, k, l, j)];
                    }
                    lowered[((i * n + j) * n + k) * n + l] = acc;
                }
            }
        }
    }

    Ok(CurvatureAtPoint {
        point: p.to_vec(),
        dim: n,
        lowered,
        g: md.g,
    })
}

/// [X,Y]^k = X^i ∂_i Y^k − Y^i ∂_i X^k.
pub fn lie_bracket_at(
    x: &VectorField,
    y: &VectorField,
    p: &[f64],
    params: &Params,
) -> Result<DVector<f64>, GeomError> {
    if x.dim() != y.dim() || x.len() != y.len() {
        return Err(GeomError::DimMismatch(
            "bracket of fields on different charts".to_owned(),
        ));
    }
    let n = x.dim();
    let xv = x.value_at(p, params)?;
    let yv = y.value_at(p, params)?;
    let mut out = DVector::zeros(n);
    for k in 0..n {
        let jy = y.components[k].eval_jet2(p, params)?;
        let jx = x.components[k].eval_jet2(p, params)?;
        out[k] = jy.grad.dot(&xv) - jx.grad.dot(&yv);
    }
    Ok(out)
}

/// N_J(X,Y) = [JX,JY] − [X,Y] − J[X,JY] − J[JX,Y], with JX formed at the
/// expression level so the brackets see exact derivatives of J.
pub fn nijenhuis_at(
    manifold: &ChartManifold,
    x: &VectorField,
    y: &VectorField,
    p: &[f64],
    params: &Params,
) -> Result<DVector<f64>, GeomError> {
    let j_rows = manifold.complex_structure_rows()?;
    let jx = VectorField::matrix_apply(&j_rows, x);
    let jy = VectorField::matrix_apply(&j_rows, y);
    let j_at = manifold.complex_structure_at(p, params)?;
    let term1 = lie_bracket_at(&jx, &jy, p, params)?;
    let term2 = lie_bracket_at(x, y, p, params)?;
    let term3 = &j_at * lie_bracket_at(x, &jy, p, params)?;
    let term4 = &j_at * lie_bracket_at(&jx, y, p, params)?;
    Ok(term1 - term2 - term3 - term4)
}

/// Pointwise structure residuals: ‖J²+I‖, Hermitian compatibility of g with
/// J, and ‖∇J‖, all measured in a g-orthonormal frame.
pub struct HermitianReport {
    pub jsq: f64,
    pub compat: f64,
    pub kahler: f64,
}

pub fn hermitian_kahler_residuals(
    manifold: &ChartManifold,
    p: &[f64],
    params: &Params,
) -> Result<HermitianReport, GeomError> {
    let n = manifold.dim();
    let md = manifold.metric_data_at(p, params)?;
    let j = manifold.complex_structure_at(p, params)?;
    let j_jets = manifold.complex_structure_jets_at(p, params)?;
    let chris = christoffel_from_metric(&md);

    let jsq = (&j * &j + DMatrix::<f64>::identity(n, n))
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));

    // g-orthonormal frame from the coordinate basis
    let coords: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            e
        })
        .collect();
    let frame = frames::gram_schmidt(&md.g, &coords, 1e-12);

    let mut compat = 0.0_f64;
    for (a, u) in frame.iter().enumerate() {
        for (b, v) in frame.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            compat = compat.max((frames::inner(&md.g, &(&j * u), &(&j * v)) - target).abs());
        }
    }

    // (∇_X J)Y = ∇_X (JY) − J(∇_X Y) for constant frame extensions:
    //   component k: X^i ∂_i(J^k_j) Y^j + Γ^k(X, JY) − J^k_a Γ^a(X, Y)
    let mut kahler = 0.0_f64;
    for x in &frame {
        for y in &frame {
            let jy = &j * y;
            let mut v = DVector::zeros(n);
            for k in 0..n {
                let mut dj_term = 0.0;
                for jj in 0..n {
                    let jet = &j_jets[k * n + jj];
                    dj_term += jet.grad.dot(x) * y[jj];
                }
                v[k] = dj_term;
            }
            v += chris.contract(x, &jy) - &j * chris.contract(x, y);
            kahler = kahler.max(frames::norm(&md.g, &v));
        }
    }

    Ok(HermitianReport {
        jsq,
        compat,
        kahler,
    })
}

/// The constant-holomorphic-sectional-curvature pairing:
///
/// (v/4) { g(Y1,Y4)g(Y2,Y3) − g(Y1,Y3)g(Y2,Y4) + g(Y1,JY3)g(JY2,Y4)
///         − g(Y2,JY3)g(JY1,Y4) + 2 g(Y1,JY2)g(JY3,Y4) }
pub fn space_form_curvature(
    v: f64,
    manifold: &ChartManifold,
    y1: &DVector<f64>,
    y2: &DVector<f64>,
    y3: &DVector<f64>,
    y4: &DVector<f64>,
    p: &[f64],
    params: &Params,
) -> Result<f64, GeomError> {
    let g = manifold.metric_at(p, params)?;
    let j = manifold.complex_structure_at(p, params)?;
    let ip = |a: &DVector<f64>, b: &DVector<f64>| frames::inner(&g, a, b);
    let jy2 = &j * y2;
    let jy3 = &j * y3;
    Ok(v / 4.0
        * (ip(y1, y4) * ip(y2, y3) - ip(y1, y3) * ip(y2, y4)
            + ip(y1, &jy3) * ip(&jy2, y4)
            - ip(y2, &jy3) * ip(&(&j * y1), y4)
            + 2.0 * ip(y1, &jy2) * ip(&jy3, y4)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Params;

    fn no_params() -> Params {
        Params::new()
    }

    fn expr(text: &str, dim: usize) -> ScalarExpr {
        ScalarExpr::parse(text, dim, &no_params()).unwrap()
    }

    #[test]
    fn flat_christoffels_vanish() {
        let m = ChartManifold::euclidean(3);
        let chris = christoffel_at(&m, &[0.3, -0.2, 1.0], &no_params()).unwrap();
        for g in &chris.gamma {
            assert!(g.iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn polar_like_metric_christoffels() {
        // g = diag(1, x1²): Γ^1_22 = −x1, Γ^2_12 = 1/x1
        let mut m = ChartManifold::euclidean(2);
        m.set_metric_entry(1, 1, expr("x1^2", 2)).unwrap();
        let chris = christoffel_at(&m, &[2.0, 0.5], &no_params()).unwrap();
        assert!((chris.gamma[0][(1, 1)] - (-2.0)).abs() < 1e-12);
        assert!((chris.gamma[1][(0, 1)] - 0.5).abs() < 1e-12);
        assert!(chris.gamma[1][(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn conformal_metric_christoffels() {
        // g = e^{2x1} I on R²: Γ^1_11 = 1, Γ^1_22 = −1, Γ^2_12 = 1
        let mut m = ChartManifold::euclidean(2);
        m.set_metric_entry(0, 0, expr("exp(2*x1)", 2)).unwrap();
        m.set_metric_entry(1, 1, expr("exp(2*x1)", 2)).unwrap();
        let chris = christoffel_at(&m, &[0.4, -0.9], &no_params()).unwrap();
        assert!((chris.gamma[0][(0, 0)] - 1.0).abs() < 1e-12);
        assert!((chris.gamma[0][(1, 1)] + 1.0).abs() < 1e-12);
        assert!((chris.gamma[1][(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lower_triangle_metric_entry_rejected() {
        let mut m = ChartManifold::euclidean(2);
        let err = m.set_metric_entry(1, 0, expr("x1", 2)).unwrap_err();
        assert!(matches!(err, GeomError::LowerTriangleMetric { .. }));
    }

    #[test]
    fn flat_curvature_vanishes() {
        let m = ChartManifold::euclidean(3);
        let r = riemann_at(&m, &[0.1, 0.2, 0.3], &no_params()).unwrap();
        assert!(r.max_abs() < 1e-10);
    }

    #[test]
    fn sphere_chart_sectional_component() {
        // unit sphere: g = diag(1, sin²x1), R_1212 = sin²x1
        let mut m = ChartManifold::euclidean(2);
        m.set_metric_entry(1, 1, expr("sin(x1)^2", 2)).unwrap();
        let p = [1.0, 0.7];
        let r = riemann_at(&m, &p, &no_params()).unwrap();
        let expected = (1.0_f64).sin().powi(2);
        assert!(
            (r.component(0, 1, 0, 1) - expected).abs() < 1e-9,
            "R_1212 = {}, expected {}",
            r.component(0, 1, 0, 1),
            expected
        );
        let sym = r.symmetry_residuals();
        assert!(sym.antisym12 < 1e-8);
        assert!(sym.antisym34 < 1e-8);
        assert!(sym.pair < 1e-8);
        assert!(sym.bianchi < 1e-8);
    }

    #[test]
    fn bracket_of_coordinate_fields_vanishes() {
        let x = VectorField::coordinate(0, 3);
        let y = VectorField::coordinate(2, 3);
        let b = lie_bracket_at(&x, &y, &[0.5, 0.5, 0.5], &no_params()).unwrap();
        assert!(b.norm() < 1e-15);
    }

    #[test]
    fn bracket_single_product_rule() {
        // X = x2 ∂1, Y = ∂2: [X,Y] = −∂1
        let x = VectorField::new(vec![expr("x2", 2), expr("0", 2)]);
        let y = VectorField::coordinate(1, 2);
        let b = lie_bracket_at(&x, &y, &[0.3, -0.8], &no_params()).unwrap();
        assert!((b[0] + 1.0).abs() < 1e-15);
        assert!(b[1].abs() < 1e-15);
    }
}
