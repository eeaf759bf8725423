//! Pointwise analysis of a smooth map between charts: differential,
//! vertical/horizontal splitting, conformality and dilation, slant angles,
//! the four decomposition operator families and the adjoint map.

use crate::expr::{Params, ScalarExpr, VectorField};
use crate::frames::{self, LinalgError};
use crate::geometry::{christoffel_at, ChartManifold, Christoffels, GeomError};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

/// Tolerance for "this vector lies in the claimed subspace" validations.
pub const SUBSPACE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MapError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Expr(#[from] crate::expr::ExprError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("not a proper Riemannian-map candidate: {detail} (rank {rank})")]
    NotProper { rank: usize, detail: String },
    #[error("vector is not in the claimed subspace (residual {residual:.3e})")]
    NotInSubspace { residual: f64 },
    #[error("map has {components} components but target dimension is {target_dim}")]
    ComponentCount {
        components: usize,
        target_dim: usize,
    },
    #[error("{side} slant analysis needs a complex structure on the {side}")]
    MissingStructure { side: &'static str },
    #[error("the {what} subspace is trivial at this point")]
    TrivialSubspace { what: &'static str },
    #[error("point is not conformal to working tolerance (Eq-residual {residual:.3e}); the dilation identity does not apply")]
    NotConformal { residual: f64 },
}

/// A smooth map given by one target-coordinate expression per component,
/// between two chart manifolds.
#[derive(Debug, Clone)]
pub struct SmoothMap {
    pub source: ChartManifold,
    pub target: ChartManifold,
    pub components: Vec<ScalarExpr>,
}

impl SmoothMap {
    pub fn new(
        source: ChartManifold,
        target: ChartManifold,
        components: Vec<ScalarExpr>,
    ) -> Result<SmoothMap, MapError> {
        if components.len() != target.dim() {
            return Err(MapError::ComponentCount {
                components: components.len(),
                target_dim: target.dim(),
            });
        }
        for c in &components {
            if c.dim() != source.dim() {
                return Err(MapError::Geom(GeomError::DimMismatch(format!(
                    "component references a chart of dimension {}, source has {}",
                    c.dim(),
                    source.dim()
                ))));
            }
        }
        Ok(SmoothMap {
            source,
            target,
            components,
        })
    }

    pub fn source_dim(&self) -> usize {
        self.source.dim()
    }

    pub fn target_dim(&self) -> usize {
        self.target.dim()
    }

    /// F(p).
    pub fn image_point(&self, p: &[f64], params: &Params) -> Result<Vec<f64>, MapError> {
        self.components
            .iter()
            .map(|c| c.eval(p, params).map_err(MapError::from))
            .collect()
    }
}

/// What rank pattern a scenario expects; anything outside the window is
/// reported as "not a proper Riemannian-map candidate".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum RankExpectation {
    /// 0 < rank < min(m, n): both the kernel and the range complement are
    /// nontrivial.
    #[default]
    ProperMap,
    /// rank = target dim < source dim (trivial range complement).
    Submersion,
    /// rank = source dim < target dim (trivial kernel).
    Immersion,
    /// any rank ≥ 1
    Any,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SplitOptions {
    pub expect: RankExpectation,
}

/// The orthogonal splitting data of a map at one point.
#[derive(Debug, Clone)]
pub struct PointSplit {
    pub point: Vec<f64>,
    pub image: Vec<f64>,
    pub rank: usize,
    /// g_M-orthonormal basis of ker F*.
    pub vertical: Vec<DVector<f64>>,
    /// g_M-orthonormal basis of (ker F*)^⊥.
    pub horizontal: Vec<DVector<f64>>,
    /// F* of each horizontal basis vector (not normalized).
    pub pushed: Vec<DVector<f64>>,
    /// g_N-orthonormal basis of range F*.
    pub range: Vec<DVector<f64>>,
    /// g_N-orthonormal basis of (range F*)^⊥.
    pub range_perp: Vec<DVector<f64>>,
    pub lambda_sq: f64,
    pub conformal_residual: f64,
    /// |λ² − 1| + conformal residual: distance from being a Riemannian map.
    pub riemannian_residual: f64,
    pub differential: DMatrix<f64>,
    pub g_m: DMatrix<f64>,
    pub g_n: DMatrix<f64>,
}

impl PointSplit {
    pub fn vertical_dim(&self) -> usize {
        self.vertical.len()
    }

    pub fn perp_dim(&self) -> usize {
        self.range_perp.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_sq.sqrt()
    }

    pub fn project_vertical(&self, x: &DVector<f64>) -> DVector<f64> {
        frames::project(&self.g_m, &self.vertical, x)
    }

    pub fn project_horizontal(&self, x: &DVector<f64>) -> DVector<f64> {
        frames::project(&self.g_m, &self.horizontal, x)
    }

    pub fn project_range(&self, w: &DVector<f64>) -> DVector<f64> {
        frames::project(&self.g_n, &self.range, w)
    }

    pub fn project_range_perp(&self, w: &DVector<f64>) -> DVector<f64> {
        frames::project(&self.g_n, &self.range_perp, w)
    }

    /// F* x for an arbitrary source tangent vector.
    pub fn push(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.differential * x
    }

    /// The metric adjoint *F*: g_M(*F* w, x) = g_N(w, F* x), horizontal
    /// valued. For a conformal map, *F*(F* x) = λ² x.
    pub fn adjoint(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.g_m.nrows());
        for x in &self.horizontal {
            out += x * frames::inner(&self.g_n, w, &self.push(x));
        }
        out
    }

    /// Right inverse of F* on the range: adjoint scaled by 1/λ², so that
    /// F*(lift(w)) = w for w ∈ range F*.
    pub fn lift(&self, w: &DVector<f64>) -> DVector<f64> {
        self.adjoint(w) / self.lambda_sq
    }
}

/// Entry (a,i) = ∂F^a/∂x^i.
pub fn differential_at(
    map: &SmoothMap,
    p: &[f64],
    params: &Params,
) -> Result<DMatrix<f64>, MapError> {
    let (m, n) = (map.source_dim(), map.target_dim());
    let mut d = DMatrix::zeros(n, m);
    for (a, comp) in map.components.iter().enumerate() {
        let jet = comp.eval_jet2(p, params)?;
        for i in 0..m {
            d[(a, i)] = jet.grad[i];
        }
    }
    Ok(d)
}

pub fn split_at(
    map: &SmoothMap,
    p: &[f64],
    params: &Params,
    opts: SplitOptions,
) -> Result<PointSplit, MapError> {
    let m = map.source_dim();
    let n = map.target_dim();
    let d = differential_at(map, p, params)?;
    let image = map.image_point(p, params)?;
    let md_m = map.source.metric_data_at(p, params)?;
    let md_n = map.target.metric_data_at(&image, params)?;

    let (rank, kernel_euclid) = frames::nullspace(&d)?;
    check_rank(rank, m, n, opts.expect)?;

    let vertical = frames::gram_schmidt(&md_m.g, &kernel_euclid, 1e-10);
    let horizontal = frames::complement(&md_m.g, &vertical, m)?;
    debug_assert_eq!(vertical.len() + horizontal.len(), m);

    let pushed: Vec<DVector<f64>> = horizontal.iter().map(|x| &d * x).collect();
    let range = frames::gram_schmidt(&md_n.g, &pushed, 1e-10);
    let range_perp = frames::complement(&md_n.g, &range, n)?;

    let r = horizontal.len();
    let mut lambda_sq = 0.0;
    for w in &pushed {
        lambda_sq += frames::inner(&md_n.g, w, w);
    }
    lambda_sq /= r as f64;

    let mut conformal_residual = 0.0_f64;
    for (i, wi) in pushed.iter().enumerate() {
        for (j, wj) in pushed.iter().enumerate() {
            let target = if i == j { lambda_sq } else { 0.0 };
            conformal_residual =
                conformal_residual.max((frames::inner(&md_n.g, wi, wj) - target).abs());
        }
    }
    let riemannian_residual = (lambda_sq - 1.0).abs() + conformal_residual;

    Ok(PointSplit {
        point: p.to_vec(),
        image,
        rank,
        vertical,
        horizontal,
        pushed,
        range,
        range_perp,
        lambda_sq,
        conformal_residual,
        riemannian_residual,
        differential: d,
        g_m: md_m.g,
        g_n: md_n.g,
    })
}

fn check_rank(rank: usize, m: usize, n: usize, expect: RankExpectation) -> Result<(), MapError> {
    if rank == 0 {
        return Err(MapError::NotProper {
            rank,
            detail: "the differential vanishes".to_owned(),
        });
    }
    let ok = match expect {
        RankExpectation::ProperMap => rank < m && rank < n,
        RankExpectation::Submersion => rank == n && rank < m,
        RankExpectation::Immersion => rank == m && rank < n,
        RankExpectation::Any => true,
    };
    if ok {
        Ok(())
    } else {
        Err(MapError::NotProper {
            rank,
            detail: format!(
                "rank must satisfy the '{:?}' expectation for a {}×{} differential",
                expect, n, m
            ),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlantSide {
    Domain,
    Range,
}

/// Wirtinger-angle measurement over a set of probe vectors.
#[derive(Debug, Clone, Serialize)]
pub struct SlantReport {
    pub side: SlantSide,
    /// Mean angle over all probes, in [0, π/2].
    pub theta: f64,
    /// Max pairwise deviation of the probe angles.
    pub spread: f64,
    pub probes: usize,
}

/// Angle between J v and a subspace: cos θ = ‖proj(Jv)‖ / ‖Jv‖.
fn wirtinger_angle(
    g: &DMatrix<f64>,
    basis: &[DVector<f64>],
    jv: &DVector<f64>,
) -> f64 {
    let total = frames::norm(g, jv);
    if total == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let proj = frames::project(g, basis, jv);
    let c = (frames::norm(g, &proj) / total).clamp(0.0, 1.0);
    c.acos()
}

/// Random g-unit vector in the span of a g-orthonormal basis.
fn random_unit_in_span(
    basis: &[DVector<f64>],
    rng: &mut ChaCha8Rng,
) -> DVector<f64> {
    let dim = basis[0].len();
    loop {
        let mut v = DVector::zeros(dim);
        let mut norm_sq = 0.0;
        let mut coeffs = Vec::with_capacity(basis.len());
        for _ in basis {
            let c: f64 = rng.random_range(-1.0..1.0);
            coeffs.push(c);
            norm_sq += c * c;
        }
        if norm_sq < 1e-6 {
            continue;
        }
        let scale = norm_sq.sqrt();
        for (b, c) in basis.iter().zip(&coeffs) {
            v += b * (*c / scale);
        }
        return v;
    }
}

/// Slant angle of the map at a split point.
///
/// Domain side: angle between J V and ker F* for vertical probes V.
/// Range side: angle between J(G* Z) and range G* for horizontal probes Z.
/// Probes are `extra_probes` random unit vectors plus the basis itself.
pub fn slant_at(
    map: &SmoothMap,
    split: &PointSplit,
    side: SlantSide,
    extra_probes: usize,
    params: &Params,
    rng: &mut ChaCha8Rng,
) -> Result<SlantReport, MapError> {
    let mut angles = Vec::new();
    match side {
        SlantSide::Domain => {
            if !map.source.has_complex_structure() {
                return Err(MapError::MissingStructure { side: "domain" });
            }
            if split.vertical.is_empty() {
                return Err(MapError::TrivialSubspace { what: "vertical" });
            }
            let j = map.source.complex_structure_at(&split.point, params)?;
            let mut probes: Vec<DVector<f64>> = split.vertical.clone();
            for _ in 0..extra_probes {
                probes.push(random_unit_in_span(&split.vertical, rng));
            }
            for v in &probes {
                angles.push(wirtinger_angle(&split.g_m, &split.vertical, &(&j * v)));
            }
        }
        SlantSide::Range => {
            if !map.target.has_complex_structure() {
                return Err(MapError::MissingStructure { side: "range" });
            }
            if split.range.is_empty() {
                return Err(MapError::TrivialSubspace { what: "range" });
            }
            let j = map.target.complex_structure_at(&split.image, params)?;
            let mut probes: Vec<DVector<f64>> = split.horizontal.clone();
            for _ in 0..extra_probes {
                probes.push(random_unit_in_span(&split.horizontal, rng));
            }
            for z in &probes {
                let w = &j * split.push(z);
                angles.push(wirtinger_angle(&split.g_n, &split.range, &w));
            }
        }
    }
    let mean = angles.iter().sum::<f64>() / angles.len() as f64;
    let mut spread = 0.0_f64;
    for a in &angles {
        for b in &angles {
            spread = spread.max((a - b).abs());
        }
    }
    Ok(SlantReport {
        side,
        theta: mean,
        spread,
        probes: angles.len(),
    })
}

/// J V = φV + ωV and J X = BX + CX split into vertical/horizontal parts.
#[derive(Debug, Clone)]
pub struct DomainDecomposition {
    pub phi_v: DVector<f64>,
    pub omega_v: DVector<f64>,
    pub b_x: DVector<f64>,
    pub c_x: DVector<f64>,
}

fn validate_in_span(
    g: &DMatrix<f64>,
    basis: &[DVector<f64>],
    v: &DVector<f64>,
) -> Result<(), MapError> {
    let n = frames::norm(g, v);
    if n == 0.0 {
        return Ok(());
    }
    let proj = frames::project(g, basis, v);
    let residual = frames::norm(g, &(v - proj)) / n;
    if residual > SUBSPACE_TOL {
        return Err(MapError::NotInSubspace { residual });
    }
    Ok(())
}

/// Split J V and J X by the vertical/horizontal projections at the point.
/// `v` must be vertical and `x` horizontal (validated to [`SUBSPACE_TOL`]).
pub fn decompose_domain(
    map: &SmoothMap,
    split: &PointSplit,
    v: &DVector<f64>,
    x: &DVector<f64>,
    params: &Params,
) -> Result<DomainDecomposition, MapError> {
    let j = map.source.complex_structure_at(&split.point, params)?;
    validate_in_span(&split.g_m, &split.vertical, v)?;
    validate_in_span(&split.g_m, &split.horizontal, x)?;
    let jv = &j * v;
    let jx = &j * x;
    Ok(DomainDecomposition {
        phi_v: split.project_vertical(&jv),
        omega_v: split.project_horizontal(&jv),
        b_x: split.project_vertical(&jx),
        c_x: split.project_horizontal(&jx),
    })
}

/// Orthogonal complement of ω(ker F*) inside the horizontal space.
pub fn mu_basis(
    map: &SmoothMap,
    split: &PointSplit,
    params: &Params,
) -> Result<Vec<DVector<f64>>, MapError> {
    let j = map.source.complex_structure_at(&split.point, params)?;
    let omega_span: Vec<DVector<f64>> = split
        .vertical
        .iter()
        .map(|v| split.project_horizontal(&(&j * v)))
        .collect();
    let omega_on = frames::gram_schmidt(&split.g_m, &omega_span, 1e-8);
    let mut residue = Vec::new();
    for h in &split.horizontal {
        let r = h - frames::project(&split.g_m, &omega_on, h);
        residue.push(r);
    }
    Ok(frames::gram_schmidt(&split.g_m, &residue, 1e-8))
}

/// φW = ρW + ϖW for W ∈ range G*, φP = DP + EP for P ⊥ range G*.
#[derive(Debug, Clone)]
pub struct RangeDecomposition {
    pub rho_w: DVector<f64>,
    pub varpi_w: DVector<f64>,
    pub d_p: DVector<f64>,
    pub e_p: DVector<f64>,
}

pub fn decompose_range(
    map: &SmoothMap,
    split: &PointSplit,
    w: &DVector<f64>,
    p_vec: &DVector<f64>,
    params: &Params,
) -> Result<RangeDecomposition, MapError> {
    let j = map.target.complex_structure_at(&split.image, params)?;
    validate_in_span(&split.g_n, &split.range, w)?;
    validate_in_span(&split.g_n, &split.range_perp, p_vec)?;
    let jw = &j * w;
    let jp = &j * p_vec;
    Ok(RangeDecomposition {
        rho_w: split.project_range(&jw),
        varpi_w: split.project_range_perp(&jw),
        d_p: split.project_range(&jp),
        e_p: split.project_range_perp(&jp),
    })
}

/// Orthogonal complement of ϖ(range G*) inside (range G*)^⊥.
pub fn eta_basis(
    map: &SmoothMap,
    split: &PointSplit,
    params: &Params,
) -> Result<Vec<DVector<f64>>, MapError> {
    let j = map.target.complex_structure_at(&split.image, params)?;
    let varpi_span: Vec<DVector<f64>> = split
        .range
        .iter()
        .map(|w| split.project_range_perp(&(&j * w)))
        .collect();
    let varpi_on = frames::gram_schmidt(&split.g_n, &varpi_span, 1e-8);
    let mut residue = Vec::new();
    for q in &split.range_perp {
        residue.push(q - frames::project(&split.g_n, &varpi_on, q));
    }
    Ok(frames::gram_schmidt(&split.g_n, &residue, 1e-8))
}

/// Bundles a map with a parameter binding and split options; the entry
/// point used by the check suites and the finite-difference field probes.
pub struct Analyzer<'a> {
    pub map: &'a SmoothMap,
    pub params: &'a Params,
    pub opts: SplitOptions,
}

impl<'a> Analyzer<'a> {
    pub fn new(map: &'a SmoothMap, params: &'a Params, opts: SplitOptions) -> Analyzer<'a> {
        Analyzer { map, params, opts }
    }

    pub fn split(&self, p: &[f64]) -> Result<PointSplit, MapError> {
        split_at(self.map, p, self.params, self.opts)
    }

    pub fn image(&self, p: &[f64]) -> Result<Vec<f64>, MapError> {
        self.map.image_point(p, self.params)
    }

    pub fn j_source(&self, p: &[f64]) -> Result<DMatrix<f64>, MapError> {
        Ok(self.map.source.complex_structure_at(p, self.params)?)
    }

    pub fn j_target(&self, q: &[f64]) -> Result<DMatrix<f64>, MapError> {
        Ok(self.map.target.complex_structure_at(q, self.params)?)
    }

    pub fn christoffels_source(&self, p: &[f64]) -> Result<Christoffels, MapError> {
        Ok(christoffel_at(&self.map.source, p, self.params)?)
    }

    pub fn christoffels_target(&self, q: &[f64]) -> Result<Christoffels, MapError> {
        Ok(christoffel_at(&self.map.target, q, self.params)?)
    }

    /// λ²(q), used for numeric dilation derivatives.
    pub fn lambda_sq(&self, q: &[f64]) -> Result<f64, MapError> {
        Ok(self.split(q)?.lambda_sq)
    }
}

/// Constant-coefficient extension of a tangent vector as a vector field.
pub fn constant_field(v: &DVector<f64>, dim: usize) -> VectorField {
    VectorField::constant(v.as_slice(), dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Params;
    use crate::geometry::ChartManifold;

    fn no_params() -> Params {
        Params::new()
    }

    fn expr(text: &str, dim: usize) -> ScalarExpr {
        ScalarExpr::parse(text, dim, &no_params()).unwrap()
    }

    fn projection_r3_to_r2() -> SmoothMap {
        SmoothMap::new(
            ChartManifold::euclidean(3),
            ChartManifold::euclidean(2),
            vec![expr("x1", 3), expr("x2", 3)],
        )
        .unwrap()
    }

    #[test]
    fn identity_differential() {
        let map = SmoothMap::new(
            ChartManifold::euclidean(2),
            ChartManifold::euclidean(2),
            vec![expr("x1", 2), expr("x2", 2)],
        )
        .unwrap();
        let d = differential_at(&map, &[0.3, 0.4], &no_params()).unwrap();
        assert_eq!(d, DMatrix::identity(2, 2));
    }

    #[test]
    fn constant_map_flagged() {
        let map = SmoothMap::new(
            ChartManifold::euclidean(2),
            ChartManifold::euclidean(2),
            vec![expr("1", 2), expr("2", 2)],
        )
        .unwrap();
        let err = split_at(&map, &[0.0, 0.0], &no_params(), SplitOptions::default()).unwrap_err();
        assert!(matches!(err, MapError::NotProper { rank: 0, .. }));
    }

    #[test]
    fn identity_map_not_proper() {
        let map = SmoothMap::new(
            ChartManifold::euclidean(2),
            ChartManifold::euclidean(2),
            vec![expr("x1", 2), expr("x2", 2)],
        )
        .unwrap();
        let err = split_at(&map, &[0.1, 0.1], &no_params(), SplitOptions::default()).unwrap_err();
        assert!(matches!(err, MapError::NotProper { rank: 2, .. }));
    }

    #[test]
    fn orthogonal_projection_is_riemannian_submersion() {
        let map = projection_r3_to_r2();
        let split = split_at(
            &map,
            &[0.2, -0.7, 0.9],
            &no_params(),
            SplitOptions {
                expect: RankExpectation::Submersion,
            },
        )
        .unwrap();
        assert_eq!(split.rank, 2);
        assert!((split.lambda() - 1.0).abs() < 1e-12);
        assert!(split.conformal_residual < 1e-12);
        assert_eq!(split.perp_dim(), 0);
        assert_eq!(split.vertical_dim(), 1);
    }

    #[test]
    fn adjoint_of_identity_like_map() {
        let map = projection_r3_to_r2();
        let split = split_at(
            &map,
            &[0.0, 0.0, 0.0],
            &no_params(),
            SplitOptions {
                expect: RankExpectation::Submersion,
            },
        )
        .unwrap();
        // *F*(F* x) = λ² x = x for horizontal x
        for x in &split.horizontal {
            let back = split.adjoint(&split.push(x));
            assert!((back - x).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_kills_range_perp() {
        let map = SmoothMap::new(
            ChartManifold::euclidean(2),
            ChartManifold::euclidean(3),
            vec![expr("x1", 2), expr("x2", 2), expr("0", 2)],
        )
        .unwrap();
        let split = split_at(
            &map,
            &[0.5, 0.5],
            &no_params(),
            SplitOptions {
                expect: RankExpectation::Immersion,
            },
        )
        .unwrap();
        for q in &split.range_perp {
            assert!(split.adjoint(q).norm() < 1e-12);
        }
    }
}
