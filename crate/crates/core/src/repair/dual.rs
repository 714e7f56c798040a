use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::problem::Scalar;

/// Forward-mode dual number `v + d ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn new(v: f64, d: f64) -> Self {
        Dual { v, d }
    }

    pub fn var(v: f64) -> Self {
        Dual { v, d: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.v + o.v, self.d + o.d)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.v - o.v, self.d - o.d)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.v * o.v, self.d * o.v + self.v * o.d)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual::new(self.v / o.v, (self.d * o.v - self.v * o.d) / (o.v * o.v))
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.d)
    }
}

impl Scalar for Dual {
    fn constant(v: f64) -> Self {
        Dual::new(v, 0.0)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        Dual::new(e, e * self.d)
    }
    fn ln(self) -> Self {
        Dual::new(self.v.ln(), self.d / self.v)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Dual::new(s, self.d / (2.0 * s))
    }
    fn abs(self) -> Self {
        if self.v < 0.0 {
            -self
        } else {
            self
        }
    }
    fn sin(self) -> Self {
        Dual::new(self.v.sin(), self.v.cos() * self.d)
    }
    fn cos(self) -> Self {
        Dual::new(self.v.cos(), -self.v.sin() * self.d)
    }
    fn tan(self) -> Self {
        let t = self.v.tan();
        Dual::new(t, (1.0 + t * t) * self.d)
    }
    fn powf(self, e: Self) -> Self {
        let v = Scalar::powf(self.v, e.v);
        let mut d = 0.0;
        if self.d != 0.0 {
            d += e.v * Scalar::powf(self.v, e.v - 1.0) * self.d;
        }
        if e.d != 0.0 {
            d += v * self.v.ln() * e.d;
        }
        Dual::new(v, d)
    }
    fn is_finite(&self) -> bool {
        self.v.is_finite() && self.d.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_rules() {
        let x = Dual::var(3.0);
        assert_eq!((x * x).d, 6.0);
        assert_eq!((x / Dual::constant(2.0)).d, 0.5);
        assert!((x.ln().d - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(x.powf(Dual::constant(3.0)).d, 27.0);
        let y = Dual::var(2.0);
        let p = Dual::constant(2.0).powf(y);
        assert!((p.d - 4.0 * 2f64.ln()).abs() < 1e-14);
        assert_eq!(Dual::var(-2.0).powf(Dual::constant(2.0)).d, -4.0);
        assert_eq!(Dual::var(-2.0).abs().d, -1.0);
    }
}
