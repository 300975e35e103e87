//! Multiplicative-kernel coagulation sums on a mass grid truncated at `B`.
//!
//! Arrays are indexed by mass with slot 0 unused, so `a[k]` is the mass-flow
//! `k c_k` of size-`k` particles for `1 <= k < B`.

/// Half self-convolution `gain[i] = 1/2 sum_{k+m=i} a_k a_m` for `i < B`, and
/// the overflow flux `1/2 sum_{k+m>=B} (k+m) a_k a_m` over pairs `k, m < B`.
///
/// The overflow is evaluated as `sum_k k a_k S(B-k)` with the suffix sums
/// `S(m) = sum_{m<=l<B} a_l`, a sum of nonnegative terms.
pub fn coagulation_sums(a: &[f64], gain: &mut [f64], suffix: &mut [f64]) -> f64 {
    let b = a.len();
    debug_assert_eq!(gain.len(), b);
    debug_assert_eq!(suffix.len(), b + 1);
    // highest occupied class bounds the support of the convolution
    let top = a.iter().rposition(|&v| v != 0.0).unwrap_or(0);

    gain.iter_mut().for_each(|g| *g = 0.0);
    for i in 2..b.min(2 * top + 1) {
        let half = i / 2;
        let lo = if i > top { i - top } else { 1 };
        let mut s = 0.0;
        for k in lo..=half.min(top) {
            s += a[k] * a[i - k];
        }
        // counted each unordered pair once; the diagonal needs halving
        if i % 2 == 0 {
            s -= 0.5 * a[half] * a[half];
        }
        gain[i] = s;
    }

    suffix[b] = 0.0;
    for m in (1..b).rev() {
        suffix[m] = suffix[m + 1] + a[m];
    }
    suffix[0] = suffix[1];
    let mut overflow = 0.0;
    for k in 1..=top.min(b - 1) {
        overflow += k as f64 * a[k] * suffix[b - k];
    }
    overflow
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(a: &[f64]) -> (Vec<f64>, f64) {
        let b = a.len();
        let mut gain = vec![0.0; b];
        let mut over = 0.0;
        for k in 1..b {
            for m in 1..b {
                let w = 0.5 * a[k] * a[m];
                if k + m < b {
                    gain[k + m] += w;
                } else {
                    over += (k + m) as f64 * w;
                }
            }
        }
        (gain, over)
    }

    proptest::proptest! {
        #[test]
        fn matches_double_loop(values in proptest::collection::vec(0.0f64..1.0, 1..40), zeros in 0usize..10) {
            let mut a = vec![0.0];
            a.extend(values);
            a.extend(std::iter::repeat(0.0).take(zeros));
            let b = a.len();
            let mut gain = vec![0.0; b];
            let mut suffix = vec![0.0; b + 1];
            let over = coagulation_sums(&a, &mut gain, &mut suffix);
            let (g_ref, o_ref) = brute(&a);
            for i in 0..b {
                proptest::prop_assert!((gain[i] - g_ref[i]).abs() <= 1e-12 * (1.0 + g_ref[i].abs()));
            }
            proptest::prop_assert!((over - o_ref).abs() <= 1e-11 * (1.0 + o_ref.abs()));
        }
    }

    #[test]
    fn two_classes() {
        // a_1 = 1, B = 3: gain_2 = 1/2, no overflow
        let a = [0.0, 1.0, 0.0];
        let mut g = [0.0; 3];
        let mut s = [0.0; 4];
        assert_eq!(coagulation_sums(&a, &mut g, &mut s), 0.0);
        assert_eq!(g, [0.0, 0.0, 0.5]);
        // B = 2: the monomer pair overflows with mass 2 * 1/2
        let a = [0.0, 1.0];
        let mut g = [0.0; 2];
        let mut s = [0.0; 3];
        assert_eq!(coagulation_sums(&a, &mut g, &mut s), 1.0);
    }
}
