//! Prime-field arithmetic.
//!
//! Every protocol in this crate works over `F_q` for a prime `q >= 3`. Elements
//! carry their modulus so that vectors and matrices can be handed around without
//! a separate field handle; mixing elements of different fields is a bug and
//! panics.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("modulus {0} is below 3")]
    TooSmall(u64),
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("division by zero in F_{0}")]
    DivisionByZero(u64),
}

/// The prime field `F_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Field {
    q: u64,
}

/// A canonical residue in `[0, q)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fp {
    value: u64,
    q: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Inv,
}

impl Field {
    pub fn new(q: u64) -> Result<Self, FieldError> {
        if q < 3 {
            return Err(FieldError::TooSmall(q));
        }
        if !is_prime(q) {
            return Err(FieldError::NotPrime(q));
        }
        Ok(Field { q })
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    /// Number of field elements, as a `usize` for enumeration loops.
    pub fn order(&self) -> usize {
        self.q as usize
    }

    pub fn elem(&self, value: u64) -> Fp {
        Fp { value: value % self.q, q: self.q }
    }

    pub fn from_i64(&self, value: i64) -> Fp {
        let q = self.q as i128;
        let v = ((value as i128 % q) + q) % q;
        Fp { value: v as u64, q: self.q }
    }

    pub fn zero(&self) -> Fp {
        self.elem(0)
    }

    pub fn one(&self) -> Fp {
        self.elem(1)
    }

    pub fn zeros(&self, len: usize) -> Vec<Fp> {
        vec![self.zero(); len]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Fp {
        self.elem(rng.gen_range(0..self.q))
    }

    /// Uniform on `F_q \ {0}`.
    pub fn sample_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> Fp {
        self.elem(rng.gen_range(1..self.q))
    }

    /// Uniform on `F_q \ {0, 1}`.
    pub fn sample_h<R: Rng + ?Sized>(&self, rng: &mut R) -> Fp {
        self.elem(rng.gen_range(2..self.q))
    }

    pub fn elements(&self) -> impl Iterator<Item = Fp> + Clone {
        let q = self.q;
        (0..q).map(move |value| Fp { value, q })
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = Fp> + Clone {
        let q = self.q;
        (1..q).map(move |value| Fp { value, q })
    }

    /// The admissible values of `h`, i.e. `F_q \ {0, 1}`.
    pub fn h_values(&self) -> impl Iterator<Item = Fp> + Clone {
        let q = self.q;
        (2..q).map(move |value| Fp { value, q })
    }

    pub fn contains(&self, x: Fp) -> bool {
        x.q == self.q
    }

    pub fn arith(&self, a: Fp, b: Fp, op: ArithOp) -> Result<Fp, FieldError> {
        assert!(self.contains(a) && self.contains(b), "operands from a different field");
        match op {
            ArithOp::Add => Ok(a + b),
            ArithOp::Sub => Ok(a - b),
            ArithOp::Mul => Ok(a * b),
            ArithOp::Div => a.checked_div(b),
            ArithOp::Neg => Ok(-a),
            ArithOp::Inv => a.inv(),
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.q)
    }
}

impl Fp {
    pub fn value(self) -> u64 {
        self.value
    }

    pub fn field(self) -> Field {
        Field { q: self.q }
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn pow(self, mut exp: u64) -> Fp {
        let mut base = self;
        let mut acc = Fp { value: 1 % self.q, q: self.q };
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(self) -> Result<Fp, FieldError> {
        if self.is_zero() {
            return Err(FieldError::DivisionByZero(self.q));
        }
        Ok(self.pow(self.q - 2))
    }

    pub fn checked_div(self, rhs: Fp) -> Result<Fp, FieldError> {
        Ok(self * rhs.inv()?)
    }

    #[inline]
    fn check(self, rhs: Fp) {
        assert_eq!(self.q, rhs.q, "field elements from F_{} and F_{}", self.q, rhs.q);
    }
}

impl fmt::Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl fmt::Display for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Add for Fp {
    type Output = Fp;
    #[inline]
    fn add(self, rhs: Fp) -> Fp {
        self.check(rhs);
        let s = self.value as u128 + rhs.value as u128;
        Fp { value: (s % self.q as u128) as u64, q: self.q }
    }
}

impl Sub for Fp {
    type Output = Fp;
    #[inline]
    fn sub(self, rhs: Fp) -> Fp {
        self.check(rhs);
        let v = if self.value >= rhs.value {
            self.value - rhs.value
        } else {
            self.q - (rhs.value - self.value)
        };
        Fp { value: v, q: self.q }
    }
}

impl Mul for Fp {
    type Output = Fp;
    #[inline]
    fn mul(self, rhs: Fp) -> Fp {
        self.check(rhs);
        let p = self.value as u128 * rhs.value as u128;
        Fp { value: (p % self.q as u128) as u64, q: self.q }
    }
}

/// Panics on a zero divisor, like integer division. Use [`Fp::checked_div`]
/// when the divisor is untrusted.
impl Div for Fp {
    type Output = Fp;
    fn div(self, rhs: Fp) -> Fp {
        self.checked_div(rhs).expect("division by zero field element")
    }
}

impl Neg for Fp {
    type Output = Fp;
    #[inline]
    fn neg(self) -> Fp {
        if self.value == 0 {
            self
        } else {
            Fp { value: self.q - self.value, q: self.q }
        }
    }
}

impl AddAssign for Fp {
    fn add_assign(&mut self, rhs: Fp) {
        *self = *self + rhs;
    }
}

impl SubAssign for Fp {
    fn sub_assign(&mut self, rhs: Fp) {
        *self = *self - rhs;
    }
}

impl MulAssign for Fp {
    fn mul_assign(&mut self, rhs: Fp) {
        *self = *self * rhs;
    }
}

/// Componentwise `acc += c * x`.
pub fn axpy(acc: &mut [Fp], c: Fp, x: &[Fp]) {
    assert_eq!(acc.len(), x.len(), "vector length mismatch");
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += c * b;
    }
}

pub fn scale(c: Fp, x: &[Fp]) -> Vec<Fp> {
    x.iter().map(|&v| c * v).collect()
}

/// Sums an iterator of equal-length vectors. Returns an empty vector for an
/// empty iterator.
pub fn sum_vectors<'a, I>(vectors: I) -> Vec<Fp>
where
    I: IntoIterator<Item = &'a Vec<Fp>>,
{
    let mut it = vectors.into_iter();
    let Some(first) = it.next() else {
        return Vec::new();
    };
    let mut acc = first.clone();
    for v in it {
        assert_eq!(acc.len(), v.len(), "vector length mismatch");
        for (a, &b) in acc.iter_mut().zip(v) {
            *a += b;
        }
    }
    acc
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; these witnesses are exact for all `u64`.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
