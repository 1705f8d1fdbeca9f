use proptest::prelude::*;
use prt_core::galois::{
    glfsr_next, is_irreducible, is_primitive, sequence_period, FeedbackSpec, FieldSpec, Poly2,
};

fn irreducible_fields() -> Vec<FieldSpec> {
    (2u32..1 << 9)
        .map(Poly2)
        .filter(|&p| is_irreducible(p).unwrap())
        .map(|p| FieldSpec::new(p).unwrap())
        .collect()
}

fn feedback_and_windows() -> impl Strategy<Value = (FeedbackSpec, Vec<u32>, Vec<u32>)> {
    let fields = irreducible_fields();
    (0..fields.len(), 1usize..=6).prop_flat_map(move |(fi, k)| {
        let f = fields[fi];
        let m = f.mask();
        (
            prop::collection::vec(0..=m, k),
            1..=m,
            prop::collection::vec(0..=m, k),
            prop::collection::vec(0..=m, k),
        )
            .prop_map(move |(mut c, last, a, b)| {
                c[k - 1] = last;
                (FeedbackSpec::new(f, c).unwrap(), a, b)
            })
    })
}

proptest! {
    #[test]
    fn glfsr_next_is_linear((fb, a, b) in feedback_and_windows()) {
        let sum: Vec<u32> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        let lhs = glfsr_next(&fb, &sum).unwrap();
        let rhs = glfsr_next(&fb, &a).unwrap() ^ glfsr_next(&fb, &b).unwrap();
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(glfsr_next(&fb, &vec![0; a.len()]).unwrap(), 0);
    }

    #[test]
    fn field_mul_is_commutative_and_distributive(fi in 0usize..50, a in any::<u32>(), b in any::<u32>(), c in any::<u32>()) {
        let fields = irreducible_fields();
        let f = fields[fi % fields.len()];
        let (a, b, c) = (a & f.mask(), b & f.mask(), c & f.mask());
        prop_assert_eq!(f.mul(a, b).unwrap(), f.mul(b, a).unwrap());
        prop_assert_eq!(f.mul(a, b ^ c).unwrap(), f.mul(a, b).unwrap() ^ f.mul(a, c).unwrap());
        prop_assert_eq!(f.mul(f.mul(a, b).unwrap(), c).unwrap(), f.mul(a, f.mul(b, c).unwrap()).unwrap());
        if a != 0 {
            let inv = f.inv(a).unwrap().unwrap();
            prop_assert_eq!(f.mul(a, inv).unwrap(), 1);
        }
    }
}

/// Taps `c_j = [x^(j-1)] P` for the first primitive `P` of degree `k` whose
/// `x^(k-1)` term is present, so that `c_k != 0`.
fn maximal_taps(k: u32) -> Vec<u32> {
    let p = (1u32 << k..1 << (k + 1))
        .map(Poly2)
        .filter(|&p| k == 1 || p.0 & (1 << (k - 1)) != 0)
        .find(|&p| is_irreducible(p).unwrap() && is_primitive(p).unwrap())
        .unwrap();
    (0..k).map(|i| (p.0 >> i) & 1).collect()
}

#[test]
fn primitive_bit_registers_are_maximal() {
    assert_eq!(maximal_taps(4), vec![1, 0, 0, 1]);
    for k in 1..=12u32 {
        let taps = maximal_taps(k);
        let fb = FeedbackSpec::new(FieldSpec::gf2(), taps).unwrap();
        let mut seed = vec![0; k as usize];
        seed[0] = 1;
        assert_eq!(sequence_period(&fb, &seed).unwrap(), (1 << k) - 1, "degree {k}");
    }
}

#[test]
fn gf16_degree_two_periods_divide_group_order() {
    let f = FieldSpec::new(Poly2(19)).unwrap();
    let mut maximal = 0;
    for c1 in 1..16 {
        for c2 in 1..16 {
            let fb = FeedbackSpec::new(f, vec![c1, c2]).unwrap();
            for seed in [[1, 0], [0, 1], [7, 12]] {
                let t = sequence_period(&fb, &seed).unwrap();
                assert_eq!(255 % t, 0, "coeffs ({c1},{c2})");
                maximal += (t == 255) as usize;
            }
        }
    }
    assert!(maximal > 0);
    // c1 = 0 drops the oldest stage, so the seed is never revisited
    let singular = FeedbackSpec::new(f, vec![0, 1]).unwrap();
    assert!(sequence_period(&singular, &[1, 0]).is_err());
}
