//! Exact arithmetic in cyclotomic fields and the point-expression grammar.
//!
//! A system with parameter `J` lives in `Q(ζ_n)` with `n = lcm(2J, 4)`, so the
//! field always contains `ω = e^{iπ/J}` and the imaginary unit. Elements are
//! stored in the power basis of `ζ_n = e^{2πi/n}` reduced modulo the `n`-th
//! cyclotomic polynomial.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Errors raised by field arithmetic and expression handling.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("value is not real")]
    NotReal,
    #[error("syntax error at byte {offset}: {message}")]
    SyntaxError { offset: usize, message: String },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("index {index} out of range for J = {j}")]
    OutOfRange { index: usize, j: usize },
    #[error("symbol `r` is not available in this context")]
    RatioUnavailable,
    #[error("mismatched field orders {0} and {1}")]
    FieldMismatch(u32, u32),
    #[error("precision cap of {0} bits reached while deciding a sign")]
    PrecisionExhausted(u32),
}

/// Order `n` of the ambient cyclotomic field for a `J`-gon.
pub fn field_order(j: usize) -> u32 {
    let two_j = 2 * j as u32;
    two_j.lcm(&4)
}

struct FieldTables {
    degree: usize,
    /// `powers[k]` holds `ζ^k` reduced to the power basis, for `k < order`.
    powers: Vec<Vec<i64>>,
}

fn cyclotomic_poly(n: u32, cache: &mut HashMap<u32, Vec<i64>>) -> Vec<i64> {
    if let Some(p) = cache.get(&n) {
        return p.clone();
    }
    // x^n - 1 divided by every Φ_d with d | n, d < n.
    let mut num = vec![0i64; n as usize + 1];
    num[0] = -1;
    num[n as usize] = 1;
    for d in 1..n {
        if n.is_multiple_of(d) {
            let den = cyclotomic_poly(d, cache);
            num = poly_exact_div(&num, &den);
        }
    }
    cache.insert(n, num.clone());
    num
}

fn poly_exact_div(num: &[i64], den: &[i64]) -> Vec<i64> {
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    let nd = rem.len() - 1;
    let mut quot = vec![0i64; nd - dd + 1];
    for k in (0..=nd - dd).rev() {
        let c = rem[k + dd] / den[dd];
        quot[k] = c;
        for (t, &dc) in den.iter().enumerate() {
            rem[k + t] -= c * dc;
        }
    }
    debug_assert!(rem.iter().all(|&x| x == 0));
    quot
}

fn tables(order: u32) -> &'static FieldTables {
    static CACHE: OnceLock<Mutex<HashMap<u32, &'static FieldTables>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("field table cache poisoned");
    if let Some(t) = guard.get(&order) {
        return t;
    }
    let phi = cyclotomic_poly(order, &mut HashMap::new());
    let degree = phi.len() - 1;
    let mut powers = Vec::with_capacity(order as usize);
    let mut cur = vec![0i64; degree];
    cur[0] = 1;
    for _ in 0..order {
        powers.push(cur.clone());
        // multiply by x and reduce with the monic Φ
        let top = cur[degree - 1];
        let mut next = vec![0i64; degree];
        for k in (1..degree).rev() {
            next[k] = cur[k - 1];
        }
        if top != 0 {
            for k in 0..degree {
                next[k] -= top * phi[k];
            }
        }
        cur = next;
    }
    let leaked: &'static FieldTables = Box::leak(Box::new(FieldTables { degree, powers }));
    guard.insert(order, leaked);
    leaked
}

/// An element of `Q(ζ_n)` in canonical power-basis form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CycloNumber {
    order: u32,
    coeffs: Vec<BigRational>,
}

impl fmt::Debug for CycloNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (re, im) = self.to_f64();
        write!(f, "Cyclo[{}]({:.6}, {:.6})", self.order, re, im)
    }
}

impl CycloNumber {
    pub fn zero(order: u32) -> Self {
        let t = tables(order);
        CycloNumber { order, coeffs: vec![BigRational::zero(); t.degree] }
    }

    pub fn one(order: u32) -> Self {
        Self::from_rational(order, BigRational::one())
    }

    pub fn from_rational(order: u32, q: BigRational) -> Self {
        let mut z = Self::zero(order);
        z.coeffs[0] = q;
        z
    }

    pub fn from_ratio(order: u32, num: i64, den: i64) -> Self {
        Self::from_rational(order, BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// `ζ_n^k` for any integer `k`.
    pub fn root_power(order: u32, k: i64) -> Self {
        let t = tables(order);
        let e = k.rem_euclid(order as i64) as usize;
        CycloNumber {
            order,
            coeffs: t.powers[e].iter().map(|&c| BigRational::from_integer(c.into())).collect(),
        }
    }

    /// `ω^h` with `ω = e^{iπ/J}`.
    pub fn omega_power(j: usize, h: i64) -> Self {
        let order = field_order(j);
        let step = (order / (2 * j as u32)) as i64;
        Self::root_power(order, h * step)
    }

    /// The imaginary unit.
    pub fn imag_unit(order: u32) -> Self {
        Self::root_power(order, (order / 4) as i64)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_rational(&self) -> bool {
        self.coeffs.iter().skip(1).all(|c| c.is_zero())
    }

    fn check(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.order == other.order {
            Ok(())
        } else {
            Err(AlgebraError::FieldMismatch(self.order, other.order))
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check(other).expect("field mismatch");
        CycloNumber {
            order: self.order,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check(other).expect("field mismatch");
        CycloNumber {
            order: self.order,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        CycloNumber { order: self.order, coeffs: self.coeffs.iter().map(|a| -a).collect() }
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        CycloNumber { order: self.order, coeffs: self.coeffs.iter().map(|a| a * q).collect() }
    }

    fn combine(&self, by_power: &[BigRational]) -> Self {
        let t = tables(self.order);
        let mut out = vec![BigRational::zero(); t.degree];
        for (e, c) in by_power.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (k, &tc) in t.powers[e].iter().enumerate() {
                if tc != 0 {
                    out[k] += c * BigRational::from_integer(tc.into());
                }
            }
        }
        CycloNumber { order: self.order, coeffs: out }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check(other).expect("field mismatch");
        let n = self.order as usize;
        let mut by_power = vec![BigRational::zero(); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (k, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                by_power[(i + k) % n] += a * b;
            }
        }
        self.combine(&by_power)
    }

    /// Complex conjugate, the automorphism `ζ ↦ ζ^{-1}`.
    pub fn conj(&self) -> Self {
        let n = self.order as usize;
        let mut by_power = vec![BigRational::zero(); n];
        for (k, a) in self.coeffs.iter().enumerate() {
            by_power[(n - k) % n] += a;
        }
        self.combine(&by_power)
    }

    pub fn is_real(&self) -> bool {
        self.conj() == *self
    }

    /// Real part `(z + z̄)/2`.
    pub fn re(&self) -> Self {
        self.add(&self.conj()).scale(&BigRational::new(1.into(), 2.into()))
    }

    /// Multiplicative inverse by Gaussian elimination on the multiplication matrix.
    pub fn inv(&self) -> Result<Self, AlgebraError> {
        if self.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        let t = tables(self.order);
        let d = t.degree;
        // column k of the matrix is self * ζ^k
        let cols: Vec<Vec<BigRational>> = (0..d)
            .map(|k| self.mul(&CycloNumber::root_power(self.order, k as i64)).coeffs)
            .collect();
        let mut a: Vec<Vec<BigRational>> = (0..d)
            .map(|row| {
                let mut r: Vec<BigRational> = (0..d).map(|k| cols[k][row].clone()).collect();
                r.push(if row == 0 { BigRational::one() } else { BigRational::zero() });
                r
            })
            .collect();
        for col in 0..d {
            let piv = (col..d).find(|&r| !a[r][col].is_zero()).ok_or(AlgebraError::DivisionByZero)?;
            a.swap(col, piv);
            let p = a[col][col].clone();
            for v in a[col].iter_mut() {
                *v /= &p;
            }
            let pivot_row = a[col].clone();
            for (r, row) in a.iter_mut().enumerate() {
                if r != col && !row[col].is_zero() {
                    let f = row[col].clone();
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= &f * pv;
                    }
                }
            }
        }
        Ok(CycloNumber { order: self.order, coeffs: a.into_iter().map(|r| r[d].clone()).collect() })
    }

    pub fn div(&self, other: &Self) -> Result<Self, AlgebraError> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, e: i64) -> Result<Self, AlgebraError> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut out = CycloNumber::one(self.order);
        let mut b = base;
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                out = out.mul(&b);
            }
            b = b.mul(&b);
            k >>= 1;
        }
        Ok(out)
    }

    /// Floating-point value as `(re, im)`.
    pub fn to_f64(&self) -> (f64, f64) {
        let n = self.order as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            let v = c.to_f64().unwrap_or(f64::NAN);
            let ang = 2.0 * std::f64::consts::PI * k as f64 / n;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        (re, im)
    }

    /// Exact sign of a real element.
    pub fn real_sign(&self) -> Result<i8, AlgebraError> {
        if !self.is_real() {
            return Err(AlgebraError::NotReal);
        }
        Ok(self.sign_of_real_part())
    }

    /// Sign of `Re(self)` without requiring the element to be real.
    ///
    /// Zero is decided symbolically; nonzero values by interval refinement.
    pub fn re_sign(&self) -> i8 {
        self.re().sign_of_real_part()
    }

    fn sign_of_real_part(&self) -> i8 {
        if self.is_zero() {
            return 0;
        }
        if let Some(s) = self.quick_sign() {
            return s;
        }
        // A real element with a nonzero canonical form is nonzero, so the
        // refinement below terminates unless coefficients are astronomically large.
        match self.refined_sign() {
            Ok(s) => s,
            Err(e) => panic!("{e}"),
        }
    }

    fn quick_sign(&self) -> Option<i8> {
        let n = self.order as f64;
        let mut val = 0.0f64;
        let mut mag = 0.0f64;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let v = c.to_f64()?;
            if !v.is_finite() {
                return None;
            }
            let ang = 2.0 * std::f64::consts::PI * k as f64 / n;
            val += v * ang.cos();
            mag += v.abs();
        }
        let bound = mag * 1e-12 + f64::MIN_POSITIVE;
        if val > bound {
            Some(1)
        } else if val < -bound {
            Some(-1)
        } else {
            None
        }
    }

    fn refined_sign(&self) -> Result<i8, AlgebraError> {
        let cap = precision_cap();
        let mut bits = 64u32;
        let abs_sum: BigRational = self.coeffs.iter().map(|c| c.abs()).fold(BigRational::zero(), |a, b| a + b);
        loop {
            let cosines = cos_table(self.order, bits);
            // S approximates value * 2^bits with |S - exact| <= 4 * Σ|c_k|
            let mut s = BigRational::zero();
            for (k, c) in self.coeffs.iter().enumerate() {
                if !c.is_zero() {
                    s += c * BigRational::from_integer(cosines[k].clone());
                }
            }
            let bound = &abs_sum * BigRational::from_integer(4.into());
            if s.abs() > bound {
                return Ok(if s.is_positive() { 1 } else { -1 });
            }
            if bits >= cap {
                return Err(AlgebraError::PrecisionExhausted(cap));
            }
            bits = (bits * 2).min(cap);
        }
    }
}

fn precision_cap() -> u32 {
    static CAP: OnceLock<u32> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("POLYFRACT_PRECISION_CAP")
            .ok()
            .and_then(|v| v.trim().parse::<u32>().ok())
            .filter(|&v| v >= 64)
            .unwrap_or(4096)
    })
}

/// Fixed-point approximations `round(cos(2πk/n) · 2^bits)` with error below 2 units.
fn cos_table(order: u32, bits: u32) -> Arc<Vec<BigInt>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u32), Arc<Vec<BigInt>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cos cache poisoned").get(&(order, bits)) {
        return t.clone();
    }
    let guard_bits = 40u32;
    let w = bits + guard_bits;
    let one = BigInt::one() << w;
    let pi = fixed_pi(w);
    let theta = (&pi * BigInt::from(2)) / BigInt::from(order);
    let (c1, s1) = fixed_cos_sin(&theta, w);
    let mut out = Vec::with_capacity(order as usize);
    let (mut c, mut s) = (one.clone(), BigInt::zero());
    for _ in 0..order {
        out.push(round_shift(&c, guard_bits));
        let nc = (&c * &c1 - &s * &s1) >> w;
        let ns = (&s * &c1 + &c * &s1) >> w;
        c = nc;
        s = ns;
    }
    let arc = Arc::new(out);
    cache.lock().expect("cos cache poisoned").insert((order, bits), arc.clone());
    arc
}

fn round_shift(x: &BigInt, k: u32) -> BigInt {
    let half = BigInt::one() << (k - 1);
    (x + half) >> k
}

fn fixed_atan_inv(x: u32, w: u32) -> BigInt {
    // atan(1/x) = Σ (-1)^k / ((2k+1) x^{2k+1})
    let one = BigInt::one() << w;
    let x2 = BigInt::from(x) * BigInt::from(x);
    let mut term = one / BigInt::from(x);
    let mut sum = BigInt::zero();
    let mut k = 0u64;
    while !term.is_zero() {
        let t = &term / BigInt::from(2 * k + 1);
        if k.is_multiple_of(2) {
            sum += t;
        } else {
            sum -= t;
        }
        term /= &x2;
        k += 1;
    }
    sum
}

fn fixed_pi(w: u32) -> BigInt {
    let ww = w + 16;
    let pi = fixed_atan_inv(5, ww) * BigInt::from(16) - fixed_atan_inv(239, ww) * BigInt::from(4);
    pi >> 16
}

fn fixed_cos_sin(theta: &BigInt, w: u32) -> (BigInt, BigInt) {
    let one = BigInt::one() << w;
    let mut cos = one.clone();
    let mut sin = BigInt::zero();
    let mut term = one; // θ^k / k!
    let mut k = 0u64;
    loop {
        k += 1;
        term = (&term * theta) >> w;
        term /= BigInt::from(k);
        if term.is_zero() {
            break;
        }
        match k % 4 {
            1 => sin += &term,
            2 => cos -= &term,
            3 => sin -= &term,
            _ => cos += &term,
        }
    }
    (cos, sin)
}

/// Parse a rational literal of the form `a` or `a/b`.
pub fn parse_rational(text: &str) -> Result<BigRational, AlgebraError> {
    let t = text.trim();
    let err = |m: &str| AlgebraError::SyntaxError { offset: 0, message: m.to_string() };
    let (n, d) = match t.split_once('/') {
        Some((a, b)) => (a, b),
        None => (t, "1"),
    };
    let n: BigInt = n.trim().parse().map_err(|_| err("bad numerator"))?;
    let d: BigInt = d.trim().parse().map_err(|_| err("bad denominator"))?;
    if d.is_zero() {
        return Err(AlgebraError::DivisionByZero);
    }
    Ok(BigRational::new(n, d))
}

// ---------------------------------------------------------------------------
// Expression grammar

/// Symbols available inside point expressions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    Vertex(usize),
    Midpoint(usize),
    Omega,
    ImagUnit,
    Ratio,
}

/// Abstract syntax tree of a point expression.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PointExpr {
    Rat(BigRational),
    Sym(Symbol),
    Neg(Box<PointExpr>),
    Add(Box<PointExpr>, Box<PointExpr>),
    Sub(Box<PointExpr>, Box<PointExpr>),
    Mul(Box<PointExpr>, Box<PointExpr>),
    Pow(Box<PointExpr>, i64),
}

impl fmt::Display for PointExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointExpr::Rat(q) => {
                if q.is_negative() {
                    write!(f, "(-{})", q.abs())
                } else if q.is_integer() {
                    write!(f, "{}", q.numer())
                } else {
                    write!(f, "{}/{}", q.numer(), q.denom())
                }
            }
            PointExpr::Sym(s) => match s {
                Symbol::Vertex(k) => write!(f, "p{k}"),
                Symbol::Midpoint(k) => write!(f, "q{k}"),
                Symbol::Omega => write!(f, "w"),
                Symbol::ImagUnit => write!(f, "i"),
                Symbol::Ratio => write!(f, "r"),
            },
            PointExpr::Neg(a) => write!(f, "(-{a})"),
            PointExpr::Add(a, b) => write!(f, "({a} + {b})"),
            PointExpr::Sub(a, b) => write!(f, "({a} - {b})"),
            PointExpr::Mul(a, b) => write!(f, "({a} * {b})"),
            PointExpr::Pow(a, e) => {
                if *e < 0 {
                    write!(f, "({a} ^ ({e}))")
                } else {
                    write!(f, "({a} ^ {e})")
                }
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, offset: usize, message: impl Into<String>) -> Result<T, AlgebraError> {
        Err(AlgebraError::SyntaxError { offset, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<PointExpr, AlgebraError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = PointExpr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = PointExpr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<PointExpr, AlgebraError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = PointExpr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<PointExpr, AlgebraError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(PointExpr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<PointExpr, AlgebraError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.exponent()?;
            return Ok(PointExpr::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i64, AlgebraError> {
        let start = self.peek().map(|_| self.pos).unwrap_or(self.pos);
        let mut paren = false;
        if self.peek() == Some(b'(') {
            paren = true;
            self.pos += 1;
        }
        let mut neg = false;
        if self.peek() == Some(b'-') {
            neg = true;
            self.pos += 1;
        }
        self.skip_ws();
        let digits = self.digits();
        if digits.is_empty() {
            return self.err(start, "expected integer exponent");
        }
        let v: i64 = match digits.parse() {
            Ok(v) => v,
            Err(_) => return self.err(start, "exponent too large"),
        };
        if paren {
            if self.peek() != Some(b')') {
                return self.err(self.pos, "expected `)`");
            }
            self.pos += 1;
        }
        Ok(if neg { -v } else { v })
    }

    fn digits(&mut self) -> &'a str {
        let s = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        &self.src[s..self.pos]
    }

    fn atom(&mut self) -> Result<PointExpr, AlgebraError> {
        let c = match self.peek() {
            Some(c) => c,
            None => return self.err(self.pos, "unexpected end of input"),
        };
        let start = self.pos;
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            if self.peek() != Some(b')') {
                return self.err(self.pos, "expected `)`");
            }
            self.pos += 1;
            return Ok(e);
        }
        if c.is_ascii_digit() {
            let num: BigInt = self.digits().parse().expect("digits parse");
            // a rational literal `a/b` binds tighter than any operator
            let save = self.pos;
            if self.peek() == Some(b'/') {
                self.pos += 1;
                let dstart = self.peek().map(|_| self.pos).unwrap_or(self.pos);
                let d = self.digits();
                if d.is_empty() {
                    return self.err(dstart, "expected denominator after `/`");
                }
                let den: BigInt = d.parse().expect("digits parse");
                if den.is_zero() {
                    return self.err(dstart, "zero denominator");
                }
                return Ok(PointExpr::Rat(BigRational::new(num, den)));
            }
            self.pos = save;
            return Ok(PointExpr::Rat(BigRational::from_integer(num)));
        }
        if c.is_ascii_alphabetic() {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
                self.pos += 1;
            }
            let ident = &self.src[start..self.pos];
            return match ident {
                "w" => Ok(PointExpr::Sym(Symbol::Omega)),
                "i" => Ok(PointExpr::Sym(Symbol::ImagUnit)),
                "r" => Ok(PointExpr::Sym(Symbol::Ratio)),
                _ => {
                    let (head, tail) = ident.split_at(1);
                    let idx = tail.parse::<usize>().ok().filter(|_| !tail.is_empty());
                    match (head, idx) {
                        ("p", Some(k)) => Ok(PointExpr::Sym(Symbol::Vertex(k))),
                        ("q", Some(k)) => Ok(PointExpr::Sym(Symbol::Midpoint(k))),
                        _ => Err(AlgebraError::UnknownSymbol(ident.to_string())),
                    }
                }
            };
        }
        self.err(start, format!("unexpected character `{}`", c as char))
    }
}

/// Parse an expression into its syntax tree.
pub fn parse_expr(text: &str) -> Result<PointExpr, AlgebraError> {
    let mut p = Parser { src: text, bytes: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err(p.pos, "trailing input");
    }
    Ok(e)
}

/// Evaluation context: the polygon size and the optional contraction ratio.
#[derive(Clone, Debug)]
pub struct EvalContext {
    pub j: usize,
    pub ratio: Option<CycloNumber>,
}

impl PointExpr {
    pub fn eval(&self, ctx: &EvalContext) -> Result<CycloNumber, AlgebraError> {
        let order = field_order(ctx.j);
        Ok(match self {
            PointExpr::Rat(q) => CycloNumber::from_rational(order, q.clone()),
            PointExpr::Sym(s) => match s {
                Symbol::Vertex(k) => {
                    if *k >= ctx.j {
                        return Err(AlgebraError::OutOfRange { index: *k, j: ctx.j });
                    }
                    vertex(ctx.j, *k)
                }
                Symbol::Midpoint(k) => {
                    if *k >= ctx.j {
                        return Err(AlgebraError::OutOfRange { index: *k, j: ctx.j });
                    }
                    midpoint(ctx.j, *k)
                }
                Symbol::Omega => CycloNumber::omega_power(ctx.j, 1),
                Symbol::ImagUnit => CycloNumber::imag_unit(order),
                Symbol::Ratio => ctx.ratio.clone().ok_or(AlgebraError::RatioUnavailable)?,
            },
            PointExpr::Neg(a) => a.eval(ctx)?.neg(),
            PointExpr::Add(a, b) => a.eval(ctx)?.add(&b.eval(ctx)?),
            PointExpr::Sub(a, b) => a.eval(ctx)?.sub(&b.eval(ctx)?),
            PointExpr::Mul(a, b) => a.eval(ctx)?.mul(&b.eval(ctx)?),
            PointExpr::Pow(a, e) => a.eval(ctx)?.pow(*e)?,
        })
    }
}

/// Parse and evaluate in one step.
pub fn parse_point_expr(text: &str, j: usize, ratio: Option<&CycloNumber>) -> Result<CycloNumber, AlgebraError> {
    parse_expr(text)?.eval(&EvalContext { j, ratio: ratio.cloned() })
}

/// Vertex `p_k` of the regular `J`-gon with incircle radius 1.
pub fn vertex(j: usize, k: usize) -> CycloNumber {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), CycloNumber>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("vertex cache poisoned").get(&(j, k)) {
        return v.clone();
    }
    let order = field_order(j);
    // 1/cos(π/J) · e^{i(π/J + 2πk/J - π/2)} = ω^{2k+1}·(-i) / cos(π/J)
    let w = CycloNumber::omega_power(j, 1);
    let cos = w.add(&w.conj()).scale(&BigRational::new(1.into(), 2.into()));
    let dir = CycloNumber::omega_power(j, 2 * k as i64 + 1).mul(&CycloNumber::imag_unit(order).neg());
    let v = dir.div(&cos).expect("cos(pi/J) is nonzero");
    cache.lock().expect("vertex cache poisoned").insert((j, k), v.clone());
    v
}

/// Midpoint `q_k` of the edge `b_k = [p_{k-1}, p_k]`; a unit vector.
pub fn midpoint(j: usize, k: usize) -> CycloNumber {
    let prev = (k + j - 1) % j;
    vertex(j, prev).add(&vertex(j, k)).scale(&BigRational::new(1.into(), 2.into()))
}

/// Sign helper for rationals, used by callers that only need rational comparisons.
pub fn rational_sign(q: &BigRational) -> i8 {
    match q.numer().sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclotomic_degrees() {
        assert_eq!(tables(8).degree, 4);
        assert_eq!(tables(12).degree, 4);
        assert_eq!(tables(20).degree, 8);
    }

    #[test]
    fn refined_sign_agrees_with_float() {
        // √2 - 1.4142135 is tiny and positive
        let s2 = CycloNumber::root_power(8, 1).add(&CycloNumber::root_power(8, -1));
        let x = s2.sub(&CycloNumber::from_ratio(8, 14142135, 10000000));
        assert_eq!(x.refined_sign().unwrap(), 1);
        assert_eq!(x.neg().refined_sign().unwrap(), -1);
    }
}
