use super::kriging::{linf, Kriging};
use super::lhs::latin_hypercube;
use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

pub const CANDIDATES: usize = 1000;
pub const REFINED: usize = 5;
pub const DUPLICATE_TOL: f64 = 1e-6;
const RANDOM_TRIES: usize = 1000;

/// Expected improvement below `f_best` for a Gaussian prediction.
pub fn ei(mean: f64, variance: f64, f_best: f64) -> f64 {
    let s = variance.max(0.0).sqrt();
    if s == 0.0 || !s.is_finite() {
        return 0.0;
    }
    let std = Normal::standard();
    let z = (f_best - mean) / s;
    ((f_best - mean) * std.cdf(z) + s * std.pdf(z)).max(0.0)
}

pub fn expected_improvement(m: &Kriging, x: &[f64], f_best: f64) -> f64 {
    let (mean, var) = m.predict(x);
    ei(mean, var, f_best)
}

fn refine(m: &Kriging, start: &[f64], f_best: f64) -> (Vec<f64>, f64) {
    let mut z = start.to_vec();
    let mut best = expected_improvement(m, &z, f_best);
    let mut step = 0.1;
    while step >= 1e-4 {
        let mut improved = false;
        for k in 0..z.len() {
            for dir in [1.0, -1.0] {
                let mut cand = z.clone();
                cand[k] = (z[k] + dir * step).clamp(0.0, 1.0);
                let v = expected_improvement(m, &cand, f_best);
                if v > best {
                    best = v;
                    z = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (z, best)
}

fn is_duplicate(p: &[f64], design: &[Vec<f64>]) -> bool {
    design.iter().any(|q| linf(p, q) <= DUPLICATE_TOL)
}

/// Next point in the unit cube. `snap` maps a point onto the set of distinct
/// configurations; the returned point is already snapped.
pub fn propose_unit<R: Rng + ?Sized>(
    m: &Kriging,
    design: &[Vec<f64>],
    f_best: f64,
    snap: &dyn Fn(&[f64]) -> Vec<f64>,
    rng: &mut R,
) -> Vec<f64> {
    let d = m.dim();
    let mut scored: Vec<(Vec<f64>, f64, f64)> = latin_hypercube(CANDIDATES, d, rng)
        .into_iter()
        .map(|c| {
            let (mean, var) = m.predict(&c);
            let e = ei(mean, var, f_best);
            (c, e, var)
        })
        .collect();
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].1.total_cmp(&scored[a].1));
    for &i in order.iter().take(REFINED) {
        let (z, e) = refine(m, &scored[i].0, f_best);
        let var = m.predict(&z).1;
        scored.push((z, e, var));
    }

    let winner = scored
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|c| snap(&c.0))
        .expect("candidates");
    if !is_duplicate(&winner, design) {
        return winner;
    }
    scored.sort_by(|a, b| b.2.total_cmp(&a.2));
    if let Some(p) = scored
        .iter()
        .map(|c| snap(&c.0))
        .find(|p| !is_duplicate(p, design))
    {
        return p;
    }
    random_unit(d, design, snap, rng)
}

/// A random snapped point, preferring one away from the design.
pub fn random_unit<R: Rng + ?Sized>(
    d: usize,
    design: &[Vec<f64>],
    snap: &dyn Fn(&[f64]) -> Vec<f64>,
    rng: &mut R,
) -> Vec<f64> {
    let mut last = Vec::new();
    for _ in 0..RANDOM_TRIES {
        let p: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        last = snap(&p);
        if !is_duplicate(&last, design) {
            break;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tuner::kriging::{KrigingParams, FIXED_NUGGET};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_normal_case() {
        assert!((ei(0.0, 1.0, 0.0) - 0.398942280401).abs() < 1e-9);
    }

    #[test]
    fn zero_at_design_points() {
        let k = Kriging::with_params(KrigingParams {
            x: vec![vec![0.0], vec![0.5], vec![1.0]],
            y: vec![1.0, 0.0, 2.0],
            theta: vec![1.0],
            nugget: 0.0,
            noise: false,
        })
        .unwrap();
        for p in k.design() {
            assert!(expected_improvement(&k, p, 0.0) < 1e-9);
        }
    }

    #[test]
    fn quadratic_proposal_is_interior() {
        let f = |x: f64| (x - 0.3) * (x - 0.3);
        let x = vec![vec![0.0], vec![1.0]];
        let y: Vec<f64> = x.iter().map(|p| f(p[0])).collect();
        let k = Kriging::fit(&x, &y, false, 0).unwrap();
        let ident = |p: &[f64]| p.to_vec();
        let run = |seed| propose_unit(&k, &x, 0.09, &ident, &mut ChaCha8Rng::seed_from_u64(seed));
        let p = run(1);
        assert!(p[0] > 0.0 && p[0] < 1.0, "{p:?}");
        assert_eq!(p, run(1));
    }

    #[test]
    fn falls_back_to_random_away_from_design() {
        let k = Kriging::with_params(KrigingParams {
            x: vec![vec![0.0], vec![1.0]],
            y: vec![0.0, 1.0],
            theta: vec![0.0],
            nugget: FIXED_NUGGET,
            noise: false,
        })
        .unwrap();
        // Snapping to a 3-point grid: 0 and 1 are taken, so only 0.5 is new.
        let snap = |p: &[f64]| vec![(p[0] * 2.0).round() / 2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = propose_unit(&k, k.design(), 0.0, &snap, &mut rng);
        assert_eq!(p, vec![0.5]);
        // With every grid point taken the result is still a grid point.
        let full = vec![vec![0.0], vec![0.5], vec![1.0]];
        let p = propose_unit(&k, &full, 0.0, &snap, &mut rng);
        assert!(full.contains(&p));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn ei_is_non_negative(mu in -1e3f64..1e3, s in 0.0f64..1e3, f in -1e3f64..1e3) {
            let v = ei(mu, s * s, f);
            prop_assert!(v >= 0.0 && v.is_finite());
        }
    }
}
