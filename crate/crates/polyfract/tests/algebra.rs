use num_bigint::BigInt;
use num_rational::BigRational;
use polyfract::algebra::{field_order, midpoint, parse_point_expr, parse_rational, vertex, CycloNumber};
use proptest::prelude::*;

fn close(a: (f64, f64), b: (f64, f64)) -> bool {
    (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// Sums of a few root powers with small rational coefficients.
fn element(order: u32) -> impl Strategy<Value = CycloNumber> {
    prop::collection::vec((-5i64..=5, 1i64..=4, 0i64..order as i64), 1..4).prop_map(move |terms| {
        terms.into_iter().fold(CycloNumber::zero(order), |acc, (num, den, k)| {
            acc.add(&CycloNumber::root_power(order, k).mul(&CycloNumber::from_ratio(order, num, den)))
        })
    })
}

#[test]
fn field_orders() {
    assert_eq!(field_order(3), 12);
    assert_eq!(field_order(4), 8);
    assert_eq!(field_order(5), 20);
    assert_eq!(field_order(6), 12);
    assert_eq!(field_order(8), 16);
}

#[test]
fn imaginary_unit_squares_to_minus_one() {
    for order in [8, 12, 16, 20] {
        let i = CycloNumber::imag_unit(order);
        assert_eq!(i.mul(&i), CycloNumber::from_ratio(order, -1, 1));
    }
    assert_eq!(CycloNumber::root_power(8, 2), CycloNumber::imag_unit(8));
}

#[test]
fn sqrt_three_is_exact() {
    // ζ_12 + ζ_12^{-1} = 2 cos(π/6) = √3
    let s3 = CycloNumber::root_power(12, 1).add(&CycloNumber::root_power(12, -1));
    assert!(s3.is_real());
    assert_eq!(s3.mul(&s3), CycloNumber::from_ratio(12, 3, 1));
    assert!((s3.to_f64().0 - 3f64.sqrt()).abs() < 1e-15);
}

#[test]
fn square_vertices_and_midpoints() {
    // incircle radius 1: the square has vertices (±1, ±1) and q_0 = -i
    let q0 = midpoint(4, 0);
    assert_eq!(q0, CycloNumber::imag_unit(8).neg());
    for k in 0..4 {
        let (x, y) = vertex(4, k).to_f64();
        assert!((x.abs() - 1.0).abs() < 1e-12 && (y.abs() - 1.0).abs() < 1e-12);
        let m = midpoint(4, k);
        assert_eq!(m.mul(&m.conj()), CycloNumber::one(8));
    }
}

#[test]
fn midpoints_are_unit_vectors() {
    for j in 3..=8 {
        let order = field_order(j);
        for k in 0..j {
            let m = midpoint(j, k);
            assert_eq!(m.mul(&m.conj()), CycloNumber::one(order), "J={j} k={k}");
        }
    }
}

#[test]
fn rationals_parse() {
    assert_eq!(parse_rational("1/3").unwrap(), BigRational::new(BigInt::from(1), BigInt::from(3)));
    assert_eq!(parse_rational("-2").unwrap(), BigRational::from_integer(BigInt::from(-2)));
    assert!(parse_rational("1/0").is_err());
    assert!(parse_rational("x").is_err());
}

#[test]
fn point_expressions_evaluate() {
    let half_p3 = parse_point_expr("1/2 * p3", 4, None).unwrap();
    let (x, y) = half_p3.to_f64();
    let (vx, vy) = vertex(4, 3).to_f64();
    assert!((x - vx / 2.0).abs() < 1e-15 && (y - vy / 2.0).abs() < 1e-15);
    assert!(parse_point_expr("1/2 *", 4, None).is_err());
}

#[test]
fn division_by_zero_is_an_error() {
    assert!(CycloNumber::one(8).div(&CycloNumber::zero(8)).is_err());
}

proptest! {
    #[test]
    fn ring_axioms(a in element(12), b in element(12), c in element(12)) {
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn conjugation_is_an_involutive_automorphism(a in element(8), b in element(8)) {
        prop_assert_eq!(a.conj().conj(), a.clone());
        prop_assert_eq!(a.mul(&b).conj(), a.conj().mul(&b.conj()));
        prop_assert!(a.mul(&a.conj()).is_real());
        prop_assert!(a.re().is_real());
    }

    #[test]
    fn inverse_and_division(a in element(20), b in element(20)) {
        prop_assume!(!a.is_zero());
        prop_assert_eq!(a.mul(&a.inv().unwrap()), CycloNumber::one(20));
        prop_assert_eq!(b.div(&a).unwrap().mul(&a), b);
    }

    #[test]
    fn float_image_is_a_homomorphism(a in element(16), b in element(16)) {
        let (fa, fb) = (a.to_f64(), b.to_f64());
        prop_assert!(close(a.mul(&b).to_f64(), cmul(fa, fb)));
        let s = a.add(&b).to_f64();
        prop_assert!(close(s, (fa.0 + fb.0, fa.1 + fb.1)));
        prop_assert!(close(a.conj().to_f64(), (fa.0, -fa.1)));
    }

    #[test]
    fn exact_sign_matches_float(a in element(12)) {
        let re = a.re();
        let x = re.to_f64().0;
        if x.abs() > 1e-9 {
            prop_assert_eq!(re.re_sign(), if x > 0.0 { 1 } else { -1 });
        }
        if re.is_zero() {
            prop_assert_eq!(re.re_sign(), 0);
        }
    }

    #[test]
    fn powers_add_exponents(k in -30i64..30, l in -30i64..30) {
        let z = CycloNumber::root_power(12, 1);
        prop_assert_eq!(z.pow(k).unwrap().mul(&z.pow(l).unwrap()), z.pow(k + l).unwrap());
        prop_assert_eq!(z.pow(k).unwrap(), CycloNumber::root_power(12, k));
    }
}
