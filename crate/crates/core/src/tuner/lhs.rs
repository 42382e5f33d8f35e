use rand::seq::SliceRandom;
use rand::Rng;

/// `k` points in `[0, 1)^d` with exactly one point per stratum `[j/k, (j+1)/k)`
/// in every dimension.
pub fn latin_hypercube<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; d]; k];
    let mut strata: Vec<usize> = (0..k).collect();
    for dim in 0..d {
        strata.shuffle(rng);
        for (point, &j) in points.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            let mut v = (j as f64 + u) / k as f64;
            // Rounding can land exactly on the upper edge.
            if (v * k as f64).floor() as usize != j {
                v = j as f64 / k as f64;
            }
            point[dim] = v;
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn strata_ok(points: &[Vec<f64>], k: usize, d: usize) -> bool {
        (0..d).all(|dim| {
            let mut seen = vec![false; k];
            for p in points {
                let j = (p[dim] * k as f64).floor() as usize;
                if j >= k || seen[j] {
                    return false;
                }
                seen[j] = true;
            }
            true
        })
    }

    #[test]
    fn four_by_two() {
        let p = latin_hypercube(4, 2, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p.len(), 4);
        assert!(strata_ok(&p, 4, 2));
    }

    #[test]
    fn single_point() {
        let p = latin_hypercube(1, 3, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p.len(), 1);
        assert!(p[0].iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn seeded() {
        let a = latin_hypercube(10, 3, &mut ChaCha8Rng::seed_from_u64(5));
        let b = latin_hypercube(10, 3, &mut ChaCha8Rng::seed_from_u64(5));
        let c = latin_hypercube(10, 3, &mut ChaCha8Rng::seed_from_u64(6));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn always_stratified(k in 1usize..60, d in 1usize..6, seed in any::<u64>()) {
            let p = latin_hypercube(k, d, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert!(strata_ok(&p, k, d));
        }
    }
}
