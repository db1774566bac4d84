//! Exact sparse multivariate polynomial arithmetic with formal differentials.

mod poly;
mod ring;
mod symform;
mod text;

pub use poly::{ring_arithmetic, ArithOp, Arity, Homogeneity, Monomial, MultiPoly};
pub use ring::{is_prime_u64, Integers, PrimeField, Rationals, Ring, RingDescriptor, SampleElem, MAX_PRIME};
pub use symform::{euler_residual, formal_differential, SymForm};

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(s: &str) -> MultiPoly<Rationals> {
        MultiPoly::parse(Rationals, Arity::plain(3), s).unwrap()
    }

    fn rat(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn difference_of_squares() {
        let a = q("z0+z1");
        let b = q("z0-z1");
        assert_eq!(&a * &b, q("z0^2-z1^2"));
    }

    #[test]
    fn common_factor_extraction() {
        let a = q("z0^2*z1+z0*z1^2");
        let b = q("z0*z1");
        assert_eq!(ring_arithmetic(&a, &b, ArithOp::ExactDivide).unwrap(), q("z0+z1"));
    }

    #[test]
    fn characteristic_two_square() {
        let f2 = PrimeField::new(2).unwrap();
        let p = MultiPoly::parse(f2, Arity::plain(2), "z0+z1").unwrap();
        assert_eq!(p.pow(2), MultiPoly::parse(f2, Arity::plain(2), "z0^2+z1^2").unwrap());
    }

    #[test]
    fn inexact_division_is_reported() {
        assert_eq!(q("z0^2+z1").exact_divide(&q("z0")), Err(crate::McmError::DivisionNotExact));
        assert_eq!(q("z0^2+1").exact_divide(&q("z0+z1")), Err(crate::McmError::DivisionNotExact));
        let zz = MultiPoly::parse(Integers, Arity::plain(1), "3*z0").unwrap();
        let two = MultiPoly::parse(Integers, Arity::plain(1), "2").unwrap();
        assert_eq!(zz.exact_divide(&two), Err(crate::McmError::DivisionNotExact));
    }

    #[test]
    fn ring_mismatch_is_reported() {
        let f5 = MultiPoly::parse(PrimeField::new(5).unwrap(), Arity::plain(1), "z0").unwrap();
        let f7 = MultiPoly::parse(PrimeField::new(7).unwrap(), Arity::plain(1), "z0").unwrap();
        assert!(matches!(f5.try_add(&f7), Err(crate::McmError::RingMismatch(_))));
    }

    #[test]
    fn differential_examples() {
        let d = formal_differential(&q("z0^2")).unwrap();
        assert_eq!(d.form_degree(), 1);
        assert_eq!(d.poly().to_text(), "2*z0*dz0");
        let d = formal_differential(&q("z0*z1")).unwrap();
        assert_eq!(d.poly().to_text(), "z0*dz1+z1*dz0");
        let f2 = PrimeField::new(2).unwrap();
        let p = MultiPoly::parse(f2, Arity::plain(1), "z0^2").unwrap();
        assert!(formal_differential(&p).unwrap().is_zero());
        assert!(matches!(formal_differential(d.poly()), Err(crate::McmError::InvalidGrade(_))));
    }

    #[test]
    fn euler_examples() {
        assert!(euler_residual(&q("z0^2")).unwrap().is_zero());
        assert!(euler_residual(&q("z0*z1*z2")).unwrap().is_zero());
        assert!(euler_residual(&MultiPoly::zero(Rationals, Arity::plain(3))).unwrap().is_zero());
        assert_eq!(euler_residual(&q("z0^2+z1")), Err(crate::McmError::NotHomogeneous));
    }

    #[test]
    fn euler_random_degree_five_over_f101() {
        let f = PrimeField::new(101).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..120 {
            let p = random_homogeneous(&f, &mut rng, 4, 5, 12);
            assert!(euler_residual(&p).unwrap().is_zero());
        }
    }

    fn random_homogeneous(f: &PrimeField, rng: &mut ChaCha8Rng, n: usize, deg: u32, nterms: usize) -> MultiPoly<PrimeField> {
        let terms = (0..nterms).map(|_| {
            let mut e = vec![0u32; n];
            for _ in 0..deg {
                e[rng.random_range(0..n)] += 1;
            }
            (Monomial(e), rng.random_range(0..f.q()))
        });
        MultiPoly::from_terms(*f, Arity::plain(n), terms)
    }

    #[test]
    fn evaluation_examples() {
        let p = MultiPoly::parse(Rationals, Arity::plain(2), "z0+z1").unwrap();
        assert_eq!(p.evaluate(&[rat(1), rat(2)], None).unwrap(), rat(3));
        let w = MultiPoly::parse(Rationals, Arity::graded(2), "dz0*z1").unwrap();
        assert_eq!(w.evaluate(&[rat(1), rat(2)], Some(&[rat(5), rat(7)])).unwrap(), rat(10));
        assert!(matches!(w.evaluate(&[rat(1)], Some(&[rat(5), rat(7)])), Err(crate::McmError::ArityError(_))));
        assert!(matches!(w.evaluate(&[rat(1), rat(2)], None), Err(crate::McmError::ArityError(_))));
    }

    #[test]
    fn b_entry_by_hand() {
        // B = z0 dA + λ A dz0 with A = z1, λ = 2 at z = (1,1), ξ = (0,1)
        let a = MultiPoly::parse(Rationals, Arity::plain(2), "z1").unwrap();
        let da = formal_differential(&a).unwrap();
        let z0 = SymForm::from_plain(&MultiPoly::z(Rationals, Arity::plain(2), 0));
        let dz0 = SymForm::new(MultiPoly::dz(Rationals, Arity::graded(2), 0), 1).unwrap();
        let b = z0.mul(&da).add(&dz0.mul_plain(&a).scale(&rat(2)));
        assert_eq!(b.evaluate(&[rat(1), rat(1)], Some(&[rat(0), rat(1)])).unwrap(), rat(1));
    }

    #[test]
    fn text_round_trip() {
        let f = PrimeField::new(7).unwrap();
        let p = MultiPoly::parse(f, Arity::graded(3), "3*z0^2*dz1 + z1*z2*dz2 - 1*z0^3*dz0").unwrap();
        let t = p.to_text();
        assert_eq!(MultiPoly::parse(f, Arity::graded(3), &t).unwrap(), p);
        let r = MultiPoly::parse(Rationals, Arity::plain(2), "-3/4*z0^2+z1-7").unwrap();
        assert_eq!(r.to_text(), "-3/4*z0^2+z1-7");
        assert_eq!(MultiPoly::parse(Rationals, Arity::plain(2), &r.to_text()).unwrap(), r);
        assert_eq!(MultiPoly::zero(Rationals, Arity::plain(2)).to_text(), "0");
    }

    #[test]
    fn graded_lex_order_puts_z_before_dz() {
        let p = MultiPoly::parse(Rationals, Arity::graded(2), "dz0*z1+z0*dz1+z0*z1").unwrap();
        assert_eq!(p.to_text(), "z0*z1+z0*dz1+z1*dz0");
    }

    #[test]
    fn symform_grade_checks() {
        let mixed = MultiPoly::parse(Rationals, Arity::graded(2), "z0*dz1+z1").unwrap();
        assert!(matches!(SymForm::new(mixed, 1), Err(crate::McmError::InvalidGrade(_))));
        let one = SymForm::new(MultiPoly::dz(Rationals, Arity::graded(2), 0), 1).unwrap();
        let zero_form = SymForm::from_plain(&MultiPoly::z(Rationals, Arity::plain(2), 0));
        assert!(one.try_add(&zero_form).is_err());
        assert_eq!(one.mul(&one).form_degree(), 2);
    }
}
