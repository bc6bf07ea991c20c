//! Truncated Taylor series in `eps` around a base point, `sum c_k eps^k`.
//!
//! Derivatives of `L(s, chi)` are read off as `k! * c_k` after carrying the
//! whole Euler–Maclaurin expression through jet arithmetic.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct Jet(pub Vec<Complex64>);

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl Jet {
    pub fn constant(c: Complex64, len: usize) -> Self {
        let mut v = vec![ZERO; len];
        v[0] = c;
        Jet(v)
    }

    /// `s0 + eps`.
    pub fn variable(s0: Complex64, len: usize) -> Self {
        let mut j = Self::constant(s0, len);
        if len > 1 {
            j.0[1] = Complex64::new(1.0, 0.0);
        }
        j
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn value(&self) -> Complex64 {
        self.0[0]
    }

    pub fn scale(&self, c: Complex64) -> Jet {
        Jet(self.0.iter().map(|x| x * c).collect())
    }

    pub fn add_scaled(&mut self, other: &Jet, c: Complex64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b * c;
        }
    }

    pub fn exp(&self) -> Jet {
        let n = self.len();
        let mut out = vec![ZERO; n];
        out[0] = self.0[0].exp();
        for k in 1..n {
            let mut acc = ZERO;
            for j in 1..=k {
                acc += self.0[j] * out[k - j] * j as f64;
            }
            out[k] = acc / k as f64;
        }
        Jet(out)
    }

    pub fn recip(&self) -> Jet {
        let n = self.len();
        let inv0 = self.0[0].inv();
        let mut out = vec![ZERO; n];
        out[0] = inv0;
        for k in 1..n {
            let mut acc = ZERO;
            for j in 1..=k {
                acc += self.0[j] * out[k - j];
            }
            out[k] = -acc * inv0;
        }
        Jet(out)
    }

    /// `b^{-(s0 + eps)}` for a real base `b > 0`, given as `exp(-s0 ln b)` and `ln b`.
    pub fn power_of_base(base_pow: Complex64, ln_base: f64, len: usize) -> Jet {
        let mut out = Vec::with_capacity(len);
        let mut c = base_pow;
        for k in 0..len {
            out.push(c);
            c = c * (-ln_base) / (k + 1) as f64;
        }
        Jet(out)
    }

    /// Derivatives `f^{(k)}(s0)` for `k < len`.
    pub fn derivatives(&self) -> Vec<Complex64> {
        let mut fact = 1.0;
        self.0
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k > 0 {
                    fact *= k as f64;
                }
                c * fact
            })
            .collect()
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet(self.0.iter().map(|a| -a).collect())
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let n = self.len();
        let mut out = vec![ZERO; n];
        for i in 0..n {
            if self.0[i] == ZERO {
                continue;
            }
            for j in 0..n - i {
                out[i + j] += self.0[i] * rhs.0[j];
            }
        }
        Jet(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_and_recip_of_variable() {
        let s0 = Complex64::new(0.3, 0.2);
        let x = Jet::variable(s0, 5);
        let e = x.exp();
        for (k, d) in e.derivatives().iter().enumerate() {
            assert!((d - s0.exp()).norm() < 1e-14, "k = {k}");
        }
        let r = x.recip().derivatives();
        // d^k/ds^k 1/s = (-1)^k k! / s^{k+1}
        let mut fact = 1.0;
        for (k, d) in r.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            let expect = s0.powi(-(k as i32 + 1)) * fact * if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((d - expect).norm() < 1e-12 * expect.norm());
        }
        let prod = &x * &x.recip();
        assert!((prod.0[0] - 1.0).norm() < 1e-15);
        assert!(prod.0[1..].iter().all(|c| c.norm() < 1e-14));
    }
}
