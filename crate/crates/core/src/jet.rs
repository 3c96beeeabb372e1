//! Derivative jets (f(0), f'(0), ..., f^(P)(0)) and the binomial
//! convolutions b_p = Σ_j C(p,j) c_j (1/G)^(p-j)(0) and its inverse
//! c_p = Σ_j C(p,j) b_j G^(p-j)(0), exact over any field.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Arithmetic needed by the jet operations.
pub trait Field:
    Clone
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
}

impl<T> Field for T where
    T: Clone
        + PartialEq
        + Zero
        + One
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Div<Output = T>
        + Neg<Output = T>
{
}

/// Values f^(k)(0) for k = 0..=P.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T>(pub Vec<T>);

pub type RationalJet = Jet<BigRational>;
pub type ComplexRational = Complex<BigRational>;
pub type ComplexJet = Jet<ComplexRational>;

impl<T: Field> Jet<T> {
    pub fn new(values: Vec<T>) -> Self {
        Jet(values)
    }

    pub fn zero(len: usize) -> Self {
        Jet(vec![T::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Derivative jet of 1/G. In Taylor coefficients a_k = G^(k)(0)/k! the
    /// Leibniz recursion Σ_j C(p,j) G_j R_{p-j} = δ_{p0} becomes a plain
    /// convolution.
    pub fn reciprocal(&self) -> Result<Self> {
        if self.0.is_empty() || self.0[0].is_zero() {
            return Err(Error::Precondition("G(0) must be nonzero".into()));
        }
        let (fact, inv_fact) = factorials::<T>(self.len());
        let g = to_taylor(&self.0, &inv_fact);
        let inv0 = T::one() / g[0].clone();
        let mut r: Vec<T> = Vec::with_capacity(g.len());
        r.push(inv0.clone());
        for p in 1..g.len() {
            let acc = (1..=p).fold(T::zero(), |acc, j| acc + g[j].clone() * r[p - j].clone());
            r.push(-(acc * inv0.clone()));
        }
        Ok(Jet(from_taylor(r, &fact)))
    }

    /// Leibniz product: the jet of f·g.
    pub fn leibniz(&self, other: &Self) -> Result<Self> {
        same_length(self, other)?;
        let (fact, inv_fact) = factorials::<T>(self.len());
        let a = to_taylor(&self.0, &inv_fact);
        let b = to_taylor(&other.0, &inv_fact);
        let c = (0..a.len())
            .map(|p| (0..=p).fold(T::zero(), |acc, j| acc + a[j].clone() * b[p - j].clone()))
            .collect();
        Ok(Jet(from_taylor(c, &fact)))
    }

    fn map(&self, f: impl Fn(usize, &T) -> T) -> Self {
        Jet(self.0.iter().enumerate().map(|(k, v)| f(k, v)).collect())
    }
}

fn same_length<T>(a: &Jet<T>, b: &Jet<T>) -> Result<()> {
    if a.0.len() != b.0.len() {
        return Err(Error::Precondition(format!(
            "jets have different lengths {} and {}",
            a.0.len(),
            b.0.len()
        )));
    }
    Ok(())
}

/// k! and 1/k! for k < n as field elements.
fn factorials<T: Field>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut fact = Vec::with_capacity(n);
    let mut k_t = T::zero();
    let mut f = T::one();
    for k in 0..n {
        if k > 0 {
            k_t = k_t + T::one();
            f = f * k_t.clone();
        }
        fact.push(f.clone());
    }
    let inv = fact.iter().map(|f| T::one() / f.clone()).collect();
    (fact, inv)
}

fn to_taylor<T: Field>(values: &[T], inv_fact: &[T]) -> Vec<T> {
    values.iter().zip(inv_fact).map(|(v, f)| v.clone() * f.clone()).collect()
}

fn from_taylor<T: Field>(coeffs: Vec<T>, fact: &[T]) -> Vec<T> {
    coeffs.into_iter().zip(fact).map(|(c, f)| c * f.clone()).collect()
}

/// b_p = Σ_j C(p,j) c_j (1/G)^(p-j)(0).
pub fn inversion_coeffs<T: Field>(c: &Jet<T>, g: &Jet<T>) -> Result<Jet<T>> {
    same_length(c, g)?;
    c.leibniz(&g.reciprocal()?)
}

/// c_p = Σ_j C(p,j) b_j G^(p-j)(0).
pub fn forward_binomial<T: Field>(b: &Jet<T>, g: &Jet<T>) -> Result<Jet<T>> {
    b.leibniz(g)
}

/// v · i^k without general complex multiplication.
fn rotate(v: &ComplexRational, k: usize) -> ComplexRational {
    match k % 4 {
        0 => v.clone(),
        1 => Complex::new(-v.im.clone(), v.re.clone()),
        2 => Complex::new(-v.re.clone(), -v.im.clone()),
        _ => Complex::new(v.im.clone(), -v.re.clone()),
    }
}

type Gaussian = Complex<BigInt>;

/// Taylor coefficients v_k / k! of a complex jet, scaled to Gaussian
/// integers by their common denominator `d`.
fn gaussian_taylor(values: &[ComplexRational]) -> (Vec<Gaussian>, BigInt) {
    let mut fact = BigInt::one();
    let coeffs: Vec<ComplexRational> = values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            if k > 0 {
                fact *= k;
            }
            let f = BigRational::from_integer(fact.clone());
            Complex::new(&v.re / &f, &v.im / &f)
        })
        .collect();
    let d = coeffs
        .iter()
        .fold(BigInt::one(), |d, c| d.lcm(c.re.denom()).lcm(c.im.denom()));
    let scale = |q: &BigRational| q.numer() * (&d / q.denom());
    let ints = coeffs.iter().map(|c| Complex::new(scale(&c.re), scale(&c.im))).collect();
    (ints, d)
}

/// Jet values p! · numer_p / denom_p.
fn from_gaussian(numer: Vec<Gaussian>, denom: Vec<Gaussian>) -> ComplexJet {
    let mut fact = BigInt::one();
    Jet(numer
        .into_iter()
        .zip(denom)
        .enumerate()
        .map(|(p, (n, d))| {
            if p > 0 {
                fact *= p;
            }
            let n = n * d.conj();
            let norm = d.norm_sqr();
            Complex::new(
                BigRational::new(n.re * &fact, norm.clone()),
                BigRational::new(n.im * &fact, norm),
            )
        })
        .collect())
}

/// [`inversion_coeffs`] for complex jets, fraction-free: with Taylor
/// coefficients scaled to Gaussian integers, (1/G)_p = S_p / G_0^(p+1) where
/// S_p = -Σ_{j>=1} G_j S_{p-j} G_0^(j-1).
fn complex_inversion(c: &ComplexJet, g: &ComplexJet) -> Result<ComplexJet> {
    same_length(c, g)?;
    if g.is_empty() || g.0[0].is_zero() {
        return Err(Error::Precondition("G(0) must be nonzero".into()));
    }
    let (cc, dc) = gaussian_taylor(&c.0);
    let (gg, dg) = gaussian_taylor(&g.0);
    let n = gg.len();
    let mut pow = vec![Gaussian::one()];
    for k in 1..=n {
        pow.push(&pow[k - 1] * &gg[0]);
    }
    let mut s: Vec<Gaussian> = vec![Gaussian::one()];
    for p in 1..n {
        let acc = (1..=p).fold(Gaussian::zero(), |acc, j| acc + &gg[j] * &s[p - j] * &pow[j - 1]);
        s.push(-acc);
    }
    let dg = Gaussian::new(dg, BigInt::zero());
    let dc = Gaussian::new(dc, BigInt::zero());
    let numer = (0..n)
        .map(|p| (0..=p).fold(Gaussian::zero(), |acc, j| acc + &cc[j] * &s[p - j] * &pow[j]) * &dg)
        .collect();
    let denom = (0..n).map(|p| &pow[p + 1] * &dc).collect();
    Ok(from_gaussian(numer, denom))
}

/// [`forward_binomial`] for complex jets, fraction-free.
fn complex_forward(b: &ComplexJet, g: &ComplexJet) -> Result<ComplexJet> {
    same_length(b, g)?;
    let (bb, db) = gaussian_taylor(&b.0);
    let (gg, dg) = gaussian_taylor(&g.0);
    let d = Gaussian::new(db * dg, BigInt::zero());
    let numer = (0..bb.len())
        .map(|p| (0..=p).fold(Gaussian::zero(), |acc, j| acc + &bb[j] * &gg[p - j]))
        .collect();
    Ok(from_gaussian(numer, vec![d; bb.len()]))
}

/// Phase-conjugated inversion b_p = (-i)^p Σ_j C(p,j) i^j c_j (1/G)^(p-j)(0).
pub fn phase_inversion_coeffs(c: &ComplexJet, g: &ComplexJet) -> Result<ComplexJet> {
    let twisted = c.map(|j, v| rotate(v, j));
    Ok(complex_inversion(&twisted, g)?.map(|p, v| rotate(v, 4 - p % 4)))
}

/// Inverse of [`phase_inversion_coeffs`]:
/// c_p = (-i)^p Σ_j C(p,j) i^j b_j G^(p-j)(0).
pub fn phase_forward_binomial(b: &ComplexJet, g: &ComplexJet) -> Result<ComplexJet> {
    let twisted = b.map(|j, v| rotate(v, j));
    Ok(complex_forward(&twisted, g)?.map(|p, v| rotate(v, 4 - p % 4)))
}

/// Jets serialize as arrays of exact strings: "a/b" for rationals and
/// "re+im i" style for complex rationals.
impl<T: fmt::Display> Serialize for Jet<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter().map(|v| v.to_string()))
    }
}

impl<'de> Deserialize<'de> for Jet<BigRational> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw: Vec<String> = Vec::deserialize(deserializer)?;
        raw.iter()
            .map(|s| BigRational::from_str(s.trim()).map_err(|e| D::Error::custom(format!("{s:?}: {e}"))))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Jet)
    }
}

/// Random rational with numerator in [-bound, bound] and denominator in [1, bound].
pub fn random_rational<R: Rng + ?Sized>(rng: &mut R, bound: i64) -> BigRational {
    BigRational::new(
        BigInt::from(rng.gen_range(-bound..=bound)),
        BigInt::from(rng.gen_range(1..=bound)),
    )
}

/// Random rational jet of length `len` with nonzero constant term.
pub fn random_jet<R: Rng + ?Sized>(rng: &mut R, len: usize, bound: i64) -> RationalJet {
    let mut v: Vec<BigRational> = (0..len).map(|_| random_rational(rng, bound)).collect();
    while v[0].is_zero() {
        v[0] = random_rational(rng, bound);
    }
    Jet(v)
}

pub fn random_complex_jet<R: Rng + ?Sized>(rng: &mut R, len: usize, bound: i64) -> ComplexJet {
    let re = random_jet(rng, len, bound);
    let im = random_jet(rng, len, bound);
    Jet(re.0.into_iter().zip(im.0).map(|(a, b)| Complex::new(a, b)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    fn jet(v: &[i64]) -> RationalJet {
        Jet(v.iter().map(|&n| q(n)).collect())
    }

    #[test]
    fn identity_and_scaling() {
        let c = jet(&[3, -1, 4, 1]);
        assert_eq!(inversion_coeffs(&c, &jet(&[1, 0, 0, 0])).unwrap(), c);
        let b = inversion_coeffs(&c, &jet(&[2, 0, 0, 0])).unwrap();
        assert_eq!(b, Jet(c.0.iter().map(|v| v / q(2)).collect()));
        assert_eq!(forward_binomial(&b, &jet(&[2, 0, 0, 0])).unwrap(), c);
    }

    #[test]
    fn one_plus_x() {
        let b = inversion_coeffs(&jet(&[1, 0, 0]), &jet(&[1, 1, 0])).unwrap();
        assert_eq!(b, jet(&[1, -1, 2]));
        assert_eq!(forward_binomial(&b, &jet(&[1, 1, 0])).unwrap(), jet(&[1, 0, 0]));
    }

    #[test]
    fn zero_constant_term_rejected() {
        assert!(matches!(
            inversion_coeffs(&jet(&[1, 2]), &jet(&[0, 1])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn fraction_free_matches_generic() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let c = random_complex_jet(&mut rng, 6, 9);
            let g = random_complex_jet(&mut rng, 6, 9);
            assert_eq!(complex_inversion(&c, &g).unwrap(), inversion_coeffs(&c, &g).unwrap());
            assert_eq!(complex_forward(&c, &g).unwrap(), forward_binomial(&c, &g).unwrap());
        }
    }

    #[test]
    fn json_round_trip() {
        let j = Jet(vec![BigRational::new(BigInt::from(-3), BigInt::from(4)), q(2)]);
        let text = serde_json::to_string(&j).unwrap();
        assert_eq!(text, r#"["-3/4","2"]"#);
        let back: RationalJet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, j);
    }
}
