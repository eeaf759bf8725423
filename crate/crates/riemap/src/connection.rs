//! Second-order objects along the map: the second fundamental form and its
//! range/perp split, the O'Neill tensors, the shape-like S operator, the
//! covariant derivatives of the slant operators, and the tension field.
//!
//! Frame fields are constant-coefficient extensions of the point bases:
//! their coordinate derivative vanishes, so ∇ reduces to the Christoffel
//! contraction at the point. Objects that genuinely differentiate a
//! subspace-valued field (ω W, φ W, projector extensions) are evaluated by
//! central finite differences of the projector fields with one Richardson
//! step; everything tensorial goes through exact jets.

use crate::expr::{Params, ScalarExpr, VectorField};
use crate::frames;
use crate::map_analysis::{Analyzer, MapError, PointSplit};
use crate::geometry::Christoffels;
use nalgebra::{DMatrix, DVector};

/// Step for first-order directional finite differences.
pub const FD_STEP: f64 = 1e-5;
/// Step for finite-difference second derivatives (numeric dilation only).
pub const FD_STEP2: f64 = 1e-4;

/// Central difference with one Richardson extrapolation:
/// (4 D(h/2) − D(h)) / 3.
pub fn directional_fd<F>(f: F, p: &[f64], dir: &DVector<f64>, h: f64) -> Result<DVector<f64>, MapError>
where
    F: Fn(&[f64]) -> Result<DVector<f64>, MapError>,
{
    let eval = |t: f64| -> Result<DVector<f64>, MapError> {
        let q: Vec<f64> = p.iter().zip(dir.iter()).map(|(pi, di)| pi + t * di).collect();
        f(&q)
    };
    let coarse = (eval(h)? - eval(-h)?) / (2.0 * h);
    let fine = (eval(h / 2.0)? - eval(-h / 2.0)?) / h;
    Ok((fine * 4.0 - coarse) / 3.0)
}

pub fn directional_fd_scalar<F>(f: F, p: &[f64], dir: &DVector<f64>, h: f64) -> Result<f64, MapError>
where
    F: Fn(&[f64]) -> Result<f64, MapError>,
{
    let eval = |t: f64| -> Result<f64, MapError> {
        let q: Vec<f64> = p.iter().zip(dir.iter()).map(|(pi, di)| pi + t * di).collect();
        f(&q)
    };
    let coarse = (eval(h)? - eval(-h)?) / (2.0 * h);
    let fine = (eval(h / 2.0)? - eval(-h / 2.0)?) / h;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// The second fundamental form value (∇F*)(x,y) with its range/perp split.
#[derive(Debug, Clone)]
pub struct SffValue {
    pub total: DVector<f64>,
    pub range_part: DVector<f64>,
    pub perp_part: DVector<f64>,
}

impl SffValue {
    /// ‖total − (range + perp)‖: the Eq-completeness plumbing residual.
    pub fn completeness_residual(&self, g_n: &DMatrix<f64>) -> f64 {
        let gap = &self.total - (&self.range_part + &self.perp_part);
        frames::norm(g_n, &gap)
    }
}

/// (∇F*)(x,y) for tangent vectors at the split point. The second
/// fundamental form is tensorial, so constant extensions lose nothing:
///
///   (∇F*)(x,y)^a = xᵀ Hess(F^a) y + Γ^N{}^a(F*x, F*y) − (F*(Γ^M(x,y)))^a.
pub fn sff_at(
    an: &Analyzer,
    split: &PointSplit,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<SffValue, MapError> {
    let p = &split.point;
    let n = an.map.target_dim();
    let mut total = DVector::zeros(n);
    for (a, comp) in an.map.components.iter().enumerate() {
        let jet = comp.eval_jet2(p, an.params)?;
        total[a] = (x.transpose() * &jet.hess * y)[(0, 0)];
    }
    let gamma_n = an.christoffels_target(&split.image)?;
    total += gamma_n.contract(&split.push(x), &split.push(y));
    let gamma_m = an.christoffels_source(p)?;
    total -= split.push(&gamma_m.contract(x, y));
    Ok(SffValue {
        range_part: split.project_range(&total),
        perp_part: split.project_range_perp(&total),
        total,
    })
}

/// Field-argument form of [`sff_at`]; evaluates the fields at the point.
pub fn sff_fields_at(
    an: &Analyzer,
    split: &PointSplit,
    x: &VectorField,
    y: &VectorField,
) -> Result<SffValue, MapError> {
    let xv = x.value_at(&split.point, an.params)?;
    let yv = y.value_at(&split.point, an.params)?;
    sff_at(an, split, &xv, &yv)
}

/// How the dilation λ enters derivative formulas: either an exact jet of a
/// declared closed-form expression on the source chart, or numeric
/// re-splitting with finite differences.
pub enum DilationField<'a> {
    Declared(&'a ScalarExpr),
    Numeric,
}

impl DilationField<'_> {
    pub fn lambda_sq(&self, an: &Analyzer, p: &[f64]) -> Result<f64, MapError> {
        match self {
            DilationField::Declared(expr) => {
                let l = expr.eval(p, an.params)?;
                Ok(l * l)
            }
            DilationField::Numeric => an.lambda_sq(p),
        }
    }

    /// Coordinate partials ∂_i ln λ.
    pub fn d_ln_lambda(&self, an: &Analyzer, p: &[f64]) -> Result<DVector<f64>, MapError> {
        match self {
            DilationField::Declared(expr) => {
                let jet = expr.eval_jet2(p, an.params)?;
                Ok(jet.grad / jet.value)
            }
            DilationField::Numeric => {
                let m = p.len();
                let mut out = DVector::zeros(m);
                for i in 0..m {
                    let mut dir = DVector::zeros(m);
                    dir[i] = 1.0;
                    // ∂_i ln λ = ∂_i λ² / (2 λ²)
                    let d = directional_fd_scalar(|q| an.lambda_sq(q), p, &dir, FD_STEP)?;
                    out[i] = d / (2.0 * an.lambda_sq(p)?);
                }
                Ok(out)
            }
        }
    }

    /// Coordinate partials and Hessian of f = 1/λ².
    pub fn inv_lambda_sq_jets(
        &self,
        an: &Analyzer,
        p: &[f64],
    ) -> Result<(f64, DVector<f64>, DMatrix<f64>), MapError> {
        match self {
            DilationField::Declared(expr) => {
                let jet = expr.eval_jet2(p, an.params)?.pow_const(-2.0);
                Ok((jet.value, jet.grad, jet.hess))
            }
            DilationField::Numeric => {
                let m = p.len();
                let f = |q: &[f64]| -> Result<f64, MapError> { Ok(1.0 / an.lambda_sq(q)?) };
                let f0 = f(p)?;
                let h = FD_STEP2;
                let mut grad = DVector::zeros(m);
                let mut hess = DMatrix::zeros(m, m);
                let at = |q: &Vec<f64>| f(q);
                let shift = |i: usize, s: f64| -> Vec<f64> {
                    let mut q = p.to_vec();
                    q[i] += s;
                    q
                };
                for i in 0..m {
                    grad[i] = (at(&shift(i, h))? - at(&shift(i, -h))?) / (2.0 * h);
                    hess[(i, i)] =
                        (at(&shift(i, h))? - 2.0 * f0 + at(&shift(i, -h))?) / (h * h);
                    for j in (i + 1)..m {
                        let mut pp = shift(i, h);
                        pp[j] += h;
                        let mut pm = shift(i, h);
                        pm[j] -= h;
                        let mut mp = shift(i, -h);
                        mp[j] += h;
                        let mut mm = shift(i, -h);
                        mm[j] -= h;
                        let v = (at(&pp)? - at(&pm)? - at(&mp)? + at(&mm)?) / (4.0 * h * h);
                        hess[(i, j)] = v;
                        hess[(j, i)] = v;
                    }
                }
                Ok((f0, grad, hess))
            }
        }
    }

    /// λ-gradient as a tangent vector: grad ln λ = g⁻¹ d(ln λ).
    pub fn grad_ln_lambda(
        &self,
        an: &Analyzer,
        split: &PointSplit,
    ) -> Result<DVector<f64>, MapError> {
        let dln = self.d_ln_lambda(an, &split.point)?;
        let g_inv = frames::metric_inverse(&split.g_m)?;
        Ok(g_inv * dln)
    }

    /// Covariant Hessian pairing g(∇_x grad f, y) for f = 1/λ²:
    /// Hess f(x,y) = x^i y^j (∂_i∂_j f − Γ^k_{ij} ∂_k f).
    pub fn inv_lambda_sq_cov_hessian(
        &self,
        an: &Analyzer,
        split: &PointSplit,
        x: &DVector<f64>,
        y: &DVector<f64>,
    ) -> Result<f64, MapError> {
        let (_, grad, hess) = self.inv_lambda_sq_jets(an, &split.point)?;
        let gamma = an.christoffels_source(&split.point)?;
        let correction = gamma.contract(x, y).dot(&grad);
        Ok((x.transpose() * &hess * y)[(0, 0)] - correction)
    }
}

/// Residual of the conformal second-fundamental-form identity
///
///   (∇F*)(x,y)^range = X(lnλ) F*y + Y(lnλ) F*x − g_M(x,y) F*(grad lnλ)
///
/// for horizontal x, y at a conformal point.
pub fn conformal_sff_residual(
    an: &Analyzer,
    split: &PointSplit,
    x: &DVector<f64>,
    y: &DVector<f64>,
    lambda: &DilationField,
    conformal_tol: f64,
) -> Result<f64, MapError> {
    if split.conformal_residual > conformal_tol {
        return Err(MapError::NotConformal {
            residual: split.conformal_residual,
        });
    }
    let sff = sff_at(an, split, x, y)?;
    let dln = lambda.d_ln_lambda(an, &split.point)?;
    let grad = lambda.grad_ln_lambda(an, split)?;
    let x_ln = dln.dot(x);
    let y_ln = dln.dot(y);
    let rhs = split.push(y) * x_ln + split.push(x) * y_ln
        - split.push(&grad) * frames::inner(&split.g_m, x, y);
    Ok(frames::norm(&split.g_n, &(&sff.range_part - rhs)))
}

/// O'Neill tensor T on a pair of tangent vectors (constant extensions):
/// T_d e = ℋ∇_{𝒱d}(𝒱e) + 𝒱∇_{𝒱d}(ℋe).
pub fn oneill_t(
    split: &PointSplit,
    gamma: &Christoffels,
    d: &DVector<f64>,
    e: &DVector<f64>,
) -> DVector<f64> {
    let vd = split.project_vertical(d);
    let ve = split.project_vertical(e);
    let he = split.project_horizontal(e);
    split.project_horizontal(&gamma.contract(&vd, &ve))
        + split.project_vertical(&gamma.contract(&vd, &he))
}

/// O'Neill tensor A: A_d e = ℋ∇_{ℋd}(𝒱e) + 𝒱∇_{ℋd}(ℋe).
pub fn oneill_a(
    split: &PointSplit,
    gamma: &Christoffels,
    d: &DVector<f64>,
    e: &DVector<f64>,
) -> DVector<f64> {
    let hd = split.project_horizontal(d);
    let ve = split.project_vertical(e);
    let he = split.project_horizontal(e);
    split.project_horizontal(&gamma.contract(&hd, &ve))
        + split.project_vertical(&gamma.contract(&hd, &he))
}

/// T and A tabulated on the split frame, plus the four projection
/// decomposition residuals (each ∇ against the sum of its two parts).
pub struct ONeillAtPoint {
    pub vertical_count: usize,
    pub frame: Vec<DVector<f64>>,
    pub t_table: Vec<Vec<DVector<f64>>>,
    pub a_table: Vec<Vec<DVector<f64>>>,
    pub decomposition_residuals: [f64; 4],
    pub t_symmetry_residual: f64,
}

pub fn oneill_at(an: &Analyzer, split: &PointSplit) -> Result<ONeillAtPoint, MapError> {
    let gamma = an.christoffels_source(&split.point)?;
    let mut frame: Vec<DVector<f64>> = split.vertical.clone();
    frame.extend(split.horizontal.iter().cloned());
    let k = frame.len();
    let mut t_table = vec![vec![DVector::zeros(0); k]; k];
    let mut a_table = vec![vec![DVector::zeros(0); k]; k];
    for i in 0..k {
        for j in 0..k {
            t_table[i][j] = oneill_t(split, &gamma, &frame[i], &frame[j]);
            a_table[i][j] = oneill_a(split, &gamma, &frame[i], &frame[j]);
        }
    }

    let nv = split.vertical.len();
    let mut res = [0.0_f64; 4];
    let gm = &split.g_m;
    for (i, u) in frame.iter().enumerate() {
        for (j, w) in frame.iter().enumerate() {
            let full = gamma.contract(u, w);
            let split_sum = |a: &DVector<f64>, b: &DVector<f64>| {
                frames::norm(gm, &(&full - (a + b)))
            };
            match (i < nv, j < nv) {
                // ∇_V W = T_V W + 𝒱∇_V W
                (true, true) => {
                    res[0] = res[0].max(split_sum(
                        &t_table[i][j],
                        &split.project_vertical(&full),
                    ));
                }
                // ∇_V X = ℋ∇_V X + T_V X
                (true, false) => {
                    res[1] = res[1].max(split_sum(
                        &split.project_horizontal(&full),
                        &t_table[i][j],
                    ));
                }
                // ∇_X V = A_X V + 𝒱∇_X V
                (false, true) => {
                    res[2] = res[2].max(split_sum(
                        &a_table[i][j],
                        &split.project_vertical(&full),
                    ));
                }
                // ∇_X Y = A_X Y + ℋ∇_X Y
                (false, false) => {
                    res[3] = res[3].max(split_sum(
                        &a_table[i][j],
                        &split.project_horizontal(&full),
                    ));
                }
            }
        }
    }

    let mut t_sym = 0.0_f64;
    for i in 0..nv {
        for j in 0..nv {
            let gap = &t_table[i][j] - &t_table[j][i];
            t_sym = t_sym.max(frames::norm(gm, &gap));
        }
    }

    Ok(ONeillAtPoint {
        vertical_count: nv,
        frame,
        t_table,
        a_table,
        decomposition_residuals: res,
        t_symmetry_residual: t_sym,
    })
}

/// A vector field on the target chart: either a constant extension of a
/// tangent vector at the base image point or a genuine expression field.
pub enum TargetField {
    Constant(DVector<f64>),
    Expr(VectorField),
}

impl TargetField {
    pub fn value_at(&self, q: &[f64], params: &Params) -> Result<DVector<f64>, MapError> {
        match self {
            TargetField::Constant(v) => Ok(v.clone()),
            TargetField::Expr(f) => Ok(f.value_at(q, params)?),
        }
    }

    /// u^b ∂_b V^a at q.
    fn directional(&self, q: &[f64], u: &DVector<f64>, params: &Params) -> Result<DVector<f64>, MapError> {
        match self {
            TargetField::Constant(v) => Ok(DVector::zeros(v.len())),
            TargetField::Expr(f) => {
                let mut out = DVector::zeros(f.len());
                for (a, comp) in f.components.iter().enumerate() {
                    let jet = comp.eval_jet2(q, params)?;
                    out[a] = jet.grad.dot(u);
                }
                Ok(out)
            }
        }
    }
}

pub struct SOperatorValue {
    /// S_V F*x = −(range part of ∇^N_{F*x} V).
    pub s: DVector<f64>,
    /// Perp part of ∇^N_{F*x} V (the ∇^{F⊥} connection value).
    pub perp_connection: DVector<f64>,
    /// max over horizontal y of |g(S_V F*x, F*y) − g(V, (∇F*)(x,y))|.
    pub duality_residual: f64,
}

/// The shape-like operator of a range-perp field and its duality with the
/// perp part of the second fundamental form.
pub fn s_operator_at(
    an: &Analyzer,
    split: &PointSplit,
    v_field: &TargetField,
    x: &DVector<f64>,
) -> Result<SOperatorValue, MapError> {
    let q = &split.image;
    let v0 = v_field.value_at(q, an.params)?;
    let vn = frames::norm(&split.g_n, &v0);
    if vn > 0.0 {
        let in_range = frames::norm(&split.g_n, &split.project_range(&v0)) / vn;
        if in_range > crate::map_analysis::SUBSPACE_TOL {
            return Err(MapError::NotInSubspace { residual: in_range });
        }
    }
    let push_x = split.push(x);
    let gamma_n = an.christoffels_target(q)?;
    let nabla = v_field.directional(q, &push_x, an.params)? + gamma_n.contract(&push_x, &v0);
    let s = -split.project_range(&nabla);
    let perp_connection = split.project_range_perp(&nabla);

    let mut duality = 0.0_f64;
    for y in &split.horizontal {
        let sff = sff_at(an, split, x, y)?;
        let lhs = frames::inner(&split.g_n, &s, &split.push(y));
        let rhs = frames::inner(&split.g_n, &v0, &sff.total);
        duality = duality.max((lhs - rhs).abs());
    }
    Ok(SOperatorValue {
        s,
        perp_connection,
        duality_residual: duality,
    })
}

/// Covariant derivatives of the slant operators ω and φ on vertical
/// vectors, with the residuals of their structure identities:
///
///   (∇_V ω)W = ℋ∇_V(ωW) − ω(∇̂_V W)   vs   C T_V W − T_V φW
///   (∇_V φ)W = ∇̂_V(φW) − φ(∇̂_V W)   vs   B T_V W − T_V ωW
pub struct OmegaPhiValue {
    pub nabla_omega: DVector<f64>,
    pub nabla_phi: DVector<f64>,
    pub omega_identity_residual: f64,
    pub phi_identity_residual: f64,
    /// ‖(∇_V ω)W‖: zero everywhere means ω is parallel.
    pub omega_parallel_residual: f64,
}

pub fn omega_phi_covderiv_at(
    an: &Analyzer,
    split: &PointSplit,
    v: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<OmegaPhiValue, MapError> {
    let p = &split.point;
    let gamma = an.christoffels_source(p)?;
    let j_p = an.j_source(p)?;

    // projector-extended fields: W̃(q), ωW̃(q), φW̃(q)
    let w0 = w.clone();
    let w_field = |q: &[f64]| -> Result<DVector<f64>, MapError> {
        let s = an.split(q)?;
        Ok(s.project_vertical(&w0))
    };
    let omega_w_field = |q: &[f64]| -> Result<DVector<f64>, MapError> {
        let s = an.split(q)?;
        let jq = an.j_source(q)?;
        Ok(s.project_horizontal(&(&jq * s.project_vertical(&w0))))
    };
    let phi_w_field = |q: &[f64]| -> Result<DVector<f64>, MapError> {
        let s = an.split(q)?;
        let jq = an.j_source(q)?;
        Ok(s.project_vertical(&(&jq * s.project_vertical(&w0))))
    };

    let omega_w_p = omega_w_field(p)?;
    let phi_w_p = phi_w_field(p)?;

    let d_omega_w = directional_fd(omega_w_field, p, v, FD_STEP)?;
    let d_phi_w = directional_fd(phi_w_field, p, v, FD_STEP)?;
    let d_w = directional_fd(w_field, p, v, FD_STEP)?;

    // ∇̂_V W = 𝒱(dW/dV + Γ(V,W))
    let vhat_w = split.project_vertical(&(&d_w + gamma.contract(v, w)));

    let nabla_omega = split.project_horizontal(&(&d_omega_w + gamma.contract(v, &omega_w_p)))
        - split.project_horizontal(&(&j_p * &vhat_w));
    let nabla_phi = split.project_vertical(&(&d_phi_w + gamma.contract(v, &phi_w_p)))
        - split.project_vertical(&(&j_p * &vhat_w));

    let t_vw = oneill_t(split, &gamma, v, w);
    let c_t_vw = split.project_horizontal(&(&j_p * &t_vw));
    let b_t_vw = split.project_vertical(&(&j_p * &t_vw));
    let t_v_phiw = oneill_t(split, &gamma, v, &phi_w_p);
    let t_v_omegaw = oneill_t(split, &gamma, v, &omega_w_p);

    let gm = &split.g_m;
    Ok(OmegaPhiValue {
        omega_identity_residual: frames::norm(gm, &(&nabla_omega - (&c_t_vw - &t_v_phiw))),
        phi_identity_residual: frames::norm(gm, &(&nabla_phi - (&b_t_vw - &t_v_omegaw))),
        omega_parallel_residual: frames::norm(gm, &nabla_omega),
        nabla_omega,
        nabla_phi,
    })
}

/// Tension field: trace of the second fundamental form over the full
/// orthonormal frame at the point.
pub fn tension_at(an: &Analyzer, split: &PointSplit) -> Result<(DVector<f64>, f64), MapError> {
    let mut tau = DVector::zeros(an.map.target_dim());
    for e in split.vertical.iter().chain(split.horizontal.iter()) {
        tau += sff_at(an, split, e, e)?.total;
    }
    let norm = frames::norm(&split.g_n, &tau);
    Ok((tau, norm))
}

/// ∇^F_x W: pullback covariant derivative along the map of a target-valued
/// field given as a function of the source point.
pub fn pullback_derivative<F>(
    an: &Analyzer,
    split: &PointSplit,
    x: &DVector<f64>,
    field: F,
) -> Result<DVector<f64>, MapError>
where
    F: Fn(&[f64]) -> Result<DVector<f64>, MapError>,
{
    let d = directional_fd(&field, &split.point, x, FD_STEP)?;
    let gamma_n = an.christoffels_target(&split.image)?;
    let w0 = field(&split.point)?;
    Ok(d + gamma_n.contract(&split.push(x), &w0))
}

/// ∇^M_x of a source-valued field given as a function of the source point.
pub fn source_derivative<F>(
    an: &Analyzer,
    split: &PointSplit,
    x: &DVector<f64>,
    field: F,
) -> Result<DVector<f64>, MapError>
where
    F: Fn(&[f64]) -> Result<DVector<f64>, MapError>,
{
    let d = directional_fd(&field, &split.point, x, FD_STEP)?;
    let gamma_m = an.christoffels_source(&split.point)?;
    let w0 = field(&split.point)?;
    Ok(d + gamma_m.contract(x, &w0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Params, ScalarExpr};
    use crate::geometry::ChartManifold;
    use crate::map_analysis::{split_at, RankExpectation, SmoothMap, SplitOptions};

    fn no_params() -> Params {
        Params::new()
    }

    fn expr(text: &str, dim: usize) -> ScalarExpr {
        ScalarExpr::parse(text, dim, &no_params()).unwrap()
    }

    #[test]
    fn sff_of_linear_map_vanishes() {
        let map = SmoothMap::new(
            ChartManifold::euclidean(3),
            ChartManifold::euclidean(2),
            vec![expr("x1 + 2*x2", 3), expr("x3 - x1", 3)],
        )
        .unwrap();
        let params = no_params();
        let an = Analyzer::new(
            &map,
            &params,
            SplitOptions {
                expect: RankExpectation::Submersion,
            },
        );
        let split = an.split(&[0.4, -0.2, 0.8]).unwrap();
        for x in &split.horizontal {
            for y in &split.horizontal {
                let s = sff_at(&an, &split, x, y).unwrap();
                assert!(s.total.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn tension_of_quadratic_map() {
        // F(x) = (x1², x2) on flat charts: tension = (2, 0)
        let map = SmoothMap::new(
            ChartManifold::euclidean(2),
            ChartManifold::euclidean(2),
            vec![expr("x1^2", 2), expr("x2", 2)],
        )
        .unwrap();
        let params = no_params();
        let an = Analyzer::new(
            &map,
            &params,
            SplitOptions {
                expect: RankExpectation::Any,
            },
        );
        let split = an.split(&[0.7, -0.3]).unwrap();
        let (tau, _) = tension_at(&an, &split).unwrap();
        assert!((tau[0] - 2.0).abs() < 1e-10);
        assert!(tau[1].abs() < 1e-10);
    }

    #[test]
    fn warped_fiber_t_tensor_hand_value() {
        // g = diag(1,1,f²,f²) with f = 1 + 0.3 x1, map (x1,x2):
        // T_{∂3}∂3 = −f f' ∂1
        let mut source = ChartManifold::euclidean(4);
        source
            .set_metric_entry(2, 2, expr("(1 + 0.3*x1)^2", 4))
            .unwrap();
        source
            .set_metric_entry(3, 3, expr("(1 + 0.3*x1)^2", 4))
            .unwrap();
        let map = SmoothMap::new(
            source,
            ChartManifold::euclidean(2),
            vec![expr("x1", 4), expr("x2", 4)],
        )
        .unwrap();
        let params = no_params();
        let an = Analyzer::new(
            &map,
            &params,
            SplitOptions {
                expect: RankExpectation::Submersion,
            },
        );
        let p = [0.5, 0.0, 0.2, -0.4];
        let split = an.split(&p).unwrap();
        let gamma = an.christoffels_source(&p).unwrap();
        let e3 = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        let t = oneill_t(&split, &gamma, &e3, &e3);
        let f = 1.0 + 0.3 * p[0];
        assert!((t[0] - (-f * 0.3)).abs() < 1e-10, "T^1 = {}", t[0]);
        assert!(t[1].abs() < 1e-12);
    }

    #[test]
    fn oneill_decomposition_residuals_are_plumbing_level() {
        let mut source = ChartManifold::euclidean(4);
        source
            .set_metric_entry(2, 2, expr("exp(2*x1)", 4))
            .unwrap();
        source
            .set_metric_entry(3, 3, expr("exp(2*x1)", 4))
            .unwrap();
        let map = SmoothMap::new(
            source,
            ChartManifold::euclidean(2),
            vec![expr("x1", 4), expr("x2", 4)],
        )
        .unwrap();
        let params = no_params();
        let an = Analyzer::new(
            &map,
            &params,
            SplitOptions {
                expect: RankExpectation::Submersion,
            },
        );
        let split = an.split(&[0.3, 0.1, -0.2, 0.6]).unwrap();
        let oneill = oneill_at(&an, &split).unwrap();
        for r in oneill.decomposition_residuals {
            assert!(r < 1e-9, "decomposition residual {r}");
        }
        assert!(oneill.t_symmetry_residual < 1e-9);
    }
}
