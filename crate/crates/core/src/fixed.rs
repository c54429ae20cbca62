//! Binary fixed-point arithmetic on big integers.
//!
//! Used to run the moment/cumulant recursions at high order, where f64
//! cancellation destroys every significant digit.

use num_bigint::BigInt;
use num_traits::{Float, Signed, ToPrimitive, Zero};

#[derive(Clone, Debug)]
pub(crate) struct Fixed {
    v: BigInt,
    bits: u64,
}

impl Fixed {
    pub fn zero(bits: u64) -> Self {
        Fixed { v: BigInt::zero(), bits }
    }

    pub fn from_int(i: i64, bits: u64) -> Self {
        Fixed { v: BigInt::from(i) << bits, bits }
    }

    pub fn from_bigint(i: BigInt, bits: u64) -> Self {
        Fixed { v: i << bits, bits }
    }

    /// Exact conversion of a finite f64.
    pub fn from_f64(x: f64, bits: u64) -> Self {
        assert!(x.is_finite());
        let (mant, exp, sign) = x.integer_decode();
        let mut v = BigInt::from(mant);
        let shift = bits as i64 + exp as i64;
        if shift >= 0 {
            v <<= shift as u64;
        } else {
            v >>= (-shift) as u64;
        }
        if sign < 0 {
            v = -v;
        }
        Fixed { v, bits }
    }

    pub fn to_f64(&self) -> f64 {
        // keep ~80 significant bits before the float conversion
        let len = self.v.bits();
        let drop = len.saturating_sub(80);
        let head = (&self.v >> drop).to_f64().unwrap_or(f64::NAN);
        head * 2f64.powi(drop as i32 - self.bits as i32)
    }

    pub fn add(&self, o: &Fixed) -> Fixed {
        Fixed { v: &self.v + &o.v, bits: self.bits }
    }

    pub fn sub(&self, o: &Fixed) -> Fixed {
        Fixed { v: &self.v - &o.v, bits: self.bits }
    }

    pub fn mul(&self, o: &Fixed) -> Fixed {
        Fixed { v: (&self.v * &o.v) >> self.bits, bits: self.bits }
    }

    pub fn div(&self, o: &Fixed) -> Fixed {
        Fixed { v: (&self.v << self.bits) / &o.v, bits: self.bits }
    }

    pub fn sqrt(&self) -> Fixed {
        assert!(!self.v.is_negative());
        Fixed { v: (&self.v << self.bits).sqrt(), bits: self.bits }
    }
}

/// Minimal ring interface shared by f64 and [`Fixed`].
pub(crate) trait Ring: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn radd(&self, o: &Self) -> Self;
    fn rsub(&self, o: &Self) -> Self;
    fn rmul(&self, o: &Self) -> Self;
}

impl Ring for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn one_like(&self) -> Self {
        1.0
    }
    fn radd(&self, o: &Self) -> Self {
        self + o
    }
    fn rsub(&self, o: &Self) -> Self {
        self - o
    }
    fn rmul(&self, o: &Self) -> Self {
        self * o
    }
}

impl Ring for Fixed {
    fn zero_like(&self) -> Self {
        Fixed::zero(self.bits)
    }
    fn one_like(&self) -> Self {
        Fixed::from_int(1, self.bits)
    }
    fn radd(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn rsub(&self, o: &Self) -> Self {
        self.sub(o)
    }
    fn rmul(&self, o: &Self) -> Self {
        self.mul(o)
    }
}

/// Moments `m[k-1] = m_k` to free cumulants via
/// `m_n = Σ_{s=1}^{n} κ_s [z^{n-s}] M(z)^s`, `M(z) = 1 + Σ m_k z^k`.
pub(crate) fn moments_to_cumulants<T: Ring>(m: &[T]) -> Vec<T> {
    let n = m.len();
    if n == 0 {
        return Vec::new();
    }
    let zero = m[0].zero_like();
    let mut mc = Vec::with_capacity(n);
    mc.push(m[0].one_like());
    mc.extend_from_slice(&m[..n - 1]);
    // pw[s-1][j] = [z^j] M^s, j ≤ n-s
    let mut pw: Vec<Vec<T>> = Vec::with_capacity(n);
    pw.push(mc.clone());
    for s in 2..n {
        let prev = &pw[s - 2];
        let len = n - s + 1;
        let mut row = vec![zero.clone(); len];
        for (j, r) in row.iter_mut().enumerate() {
            let mut acc = zero.clone();
            for i in 0..=j {
                acc = acc.radd(&prev[i].rmul(&mc[j - i]));
            }
            *r = acc;
        }
        pw.push(row);
    }
    let mut kappa: Vec<T> = Vec::with_capacity(n);
    for k in 1..=n {
        let mut acc = m[k - 1].clone();
        for s in 1..k {
            acc = acc.rsub(&kappa[s - 1].rmul(&pw[s - 1][k - s]));
        }
        kappa.push(acc);
    }
    kappa
}
