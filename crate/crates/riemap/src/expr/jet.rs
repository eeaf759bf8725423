//! Second-order forward-mode jets: value, gradient and Hessian propagated
//! together through every arithmetic operation.
//!
//! A `Jet2` carries f(p), ∇f(p) and ∇²f(p) for a scalar function of `n`
//! chart coordinates. All rules are exact chain/product rules, so the
//! derivatives are correct to machine rounding — no step-size tuning.
//! The Hessian stays bit-exact symmetric because every update is built
//! from symmetric rank-one pairs `u vᵀ + v uᵀ` and entrywise-symmetric
//! matrix sums.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Jet2 {
    pub fn constant(value: f64, n: usize) -> Self {
        Jet2 {
            value,
            grad: DVector::zeros(n),
            hess: DMatrix::zeros(n, n),
        }
    }

    /// Coordinate jet: value `x`, unit gradient in slot `i`, zero Hessian.
    pub fn coordinate(x: f64, i: usize, n: usize) -> Self {
        let mut grad = DVector::zeros(n);
        grad[i] = 1.0;
        Jet2 {
            value: x,
            grad,
            hess: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn add(&self, rhs: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value + rhs.value,
            grad: &self.grad + &rhs.grad,
            hess: &self.hess + &rhs.hess,
        }
    }

    pub fn sub(&self, rhs: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value - rhs.value,
            grad: &self.grad - &rhs.grad,
            hess: &self.hess - &rhs.hess,
        }
    }

    pub fn neg(&self) -> Jet2 {
        Jet2 {
            value: -self.value,
            grad: -&self.grad,
            hess: -&self.hess,
        }
    }

    pub fn mul(&self, rhs: &Jet2) -> Jet2 {
        let n = self.dim();
        let mut hess = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                hess[(i, j)] = self.hess[(i, j)] * rhs.value
                    + rhs.hess[(i, j)] * self.value
                    + self.grad[i] * rhs.grad[j]
                    + rhs.grad[i] * self.grad[j];
            }
        }
        Jet2 {
            value: self.value * rhs.value,
            grad: &self.grad * rhs.value + &rhs.grad * self.value,
            hess,
        }
    }

    /// f(u) with f, f' and f'' supplied at u = self.value.
    pub fn chain(&self, f: f64, df: f64, d2f: f64) -> Jet2 {
        let n = self.dim();
        let mut hess = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                hess[(i, j)] = df * self.hess[(i, j)] + d2f * self.grad[i] * self.grad[j];
            }
        }
        Jet2 {
            value: f,
            grad: &self.grad * df,
            hess,
        }
    }

    pub fn recip(&self) -> Jet2 {
        let v = self.value;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn div(&self, rhs: &Jet2) -> Jet2 {
        self.mul(&rhs.recip())
    }

    /// self^c for an exponent with no coordinate dependence.
    ///
    /// Uses the power rule directly so that e.g. x² works for negative x.
    pub fn pow_const(&self, c: f64) -> Jet2 {
        let v = self.value;
        let f = v.powf(c);
        let df = c * v.powf(c - 1.0);
        let d2f = c * (c - 1.0) * v.powf(c - 2.0);
        self.chain(f, df, d2f)
    }

    /// General a^b = exp(b ln a); requires a > 0.
    pub fn pow_jet(&self, rhs: &Jet2) -> Jet2 {
        rhs.mul(&self.ln()).exp()
    }

    pub fn sin(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn tan(&self) -> Jet2 {
        let t = self.value.tan();
        let sec2 = 1.0 + t * t;
        self.chain(t, sec2, 2.0 * t * sec2)
    }

    pub fn sinh(&self) -> Jet2 {
        self.chain(self.value.sinh(), self.value.cosh(), self.value.sinh())
    }

    pub fn cosh(&self) -> Jet2 {
        self.chain(self.value.cosh(), self.value.sinh(), self.value.cosh())
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Jet2 {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sqrt(&self) -> Jet2 {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|x| x.is_finite())
            && self.hess.iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_exactly_symmetric_under_products() {
        let n = 3;
        let x = Jet2::coordinate(0.7, 0, n);
        let y = Jet2::coordinate(-1.3, 1, n);
        let z = Jet2::coordinate(0.2, 2, n);
        let e = x.mul(&y).add(&z.sin().mul(&x.exp())).div(&y.cosh());
        for i in 0..n {
            for j in 0..n {
                assert_eq!(e.hess[(i, j)].to_bits(), e.hess[(j, i)].to_bits());
            }
        }
    }

    #[test]
    fn product_rule_bilinear() {
        let x = Jet2::coordinate(3.0, 0, 2);
        let y = Jet2::coordinate(5.0, 1, 2);
        let p = x.mul(&y);
        assert_eq!(p.value, 15.0);
        assert_eq!(p.grad[0], 5.0);
        assert_eq!(p.grad[1], 3.0);
        assert_eq!(p.hess[(0, 1)], 1.0);
        assert_eq!(p.hess[(0, 0)], 0.0);
    }

    #[test]
    fn exp_jet_at_zero() {
        let x = Jet2::coordinate(0.0, 0, 1);
        let e = x.exp();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.grad[0], 1.0);
        assert_eq!(e.hess[(0, 0)], 1.0);
    }
}
