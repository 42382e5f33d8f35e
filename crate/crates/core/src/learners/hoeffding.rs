use super::{check_instance, ModelError, OnlineClassifier};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::{PI, SQRT_2};

const TREE_BYTES: usize = 96;
const SPLIT_BYTES: usize = 40;
const LEAF_BYTES: usize = 80;
/// Two classes times five f64 (count, mean, m2, min, max).
const FEATURE_STATS_BYTES: usize = 80;
const VAR_FLOOR: f64 = 1e-12;
/// Smallest share of the leaf weight either branch of a candidate may get.
const MIN_BRANCH_FRACTION: f64 = 0.01;

/// Radius within which the observed mean of `n` samples of a variable with
/// range `range` lies around its true mean with probability `1 - delta`.
pub fn hoeffding_bound(range: f64, delta: f64, n: f64) -> f64 {
    (range * range * (1.0 / delta).ln() / (2.0 * n)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafPrediction {
    /// Majority class.
    Mc,
    /// Naive Bayes.
    Nb,
    /// Naive Bayes adaptive: whichever of mc / nb has been more accurate at the leaf.
    Nba,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingTreeParams {
    pub grace_period: usize,
    /// Effective depth cap (already transformed).
    pub max_depth: usize,
    pub delta: f64,
    pub tau: f64,
    pub leaf_prediction: LeafPrediction,
    pub nb_threshold: usize,
    /// Accepted for configuration parity; numeric threshold splits are always binary.
    pub binary_split: bool,
}

impl Default for HoeffdingTreeParams {
    fn default() -> Self {
        Self {
            grace_period: 200,
            max_depth: 1 << 20,
            delta: 1e-7,
            tau: 0.05,
            leaf_prediction: LeafPrediction::Nba,
            nb_threshold: 0,
            binary_split: false,
        }
    }
}

/// Running Gaussian statistics of one feature for one class.
#[derive(Debug, Clone, Copy, PartialEq)]
struct GaussStat {
    n: f64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Default for GaussStat {
    fn default() -> Self {
        Self {
            n: 0.0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl GaussStat {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn var(&self) -> f64 {
        if self.n > 1.0 {
            self.m2 / (self.n - 1.0)
        } else {
            0.0
        }
    }

    fn std(&self) -> f64 {
        self.var().sqrt()
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        let var = self.var().max(VAR_FLOOR);
        -0.5 * (2.0 * PI * var).ln() - (x - self.mean).powi(2) / (2.0 * var)
    }

    /// Estimated number of this class's observations with value `<= t`.
    fn weight_at_most(&self, t: f64) -> f64 {
        if self.n == 0.0 || t < self.min {
            return 0.0;
        }
        if t >= self.max {
            return self.n;
        }
        let sd = self.std();
        if sd <= 0.0 {
            return if t >= self.mean { self.n } else { 0.0 };
        }
        let cdf = 0.5 * (1.0 + erf((t - self.mean) / (sd * SQRT_2)));
        self.n * cdf
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Leaf {
    depth: usize,
    /// Instances routed here since the leaf was created.
    counts: [f64; 2],
    /// Class distribution inherited from the parent split, used only as a
    /// prediction prior.
    prior: [f64; 2],
    stats: Vec<[GaussStat; 2]>,
    weight_at_last_attempt: f64,
    mc_correct: u64,
    nb_correct: u64,
}

impl Leaf {
    fn new(depth: usize, n_features: usize, prior: [f64; 2]) -> Self {
        Self {
            depth,
            counts: [0.0; 2],
            prior,
            stats: vec![[GaussStat::default(); 2]; n_features],
            weight_at_last_attempt: 0.0,
            mc_correct: 0,
            nb_correct: 0,
        }
    }

    fn total(&self) -> f64 {
        self.counts[0] + self.counts[1]
    }

    fn mc_proba(&self) -> f64 {
        let c0 = self.counts[0] + self.prior[0];
        let c1 = self.counts[1] + self.prior[1];
        if c0 + c1 == 0.0 {
            0.5
        } else {
            c1 / (c0 + c1)
        }
    }

    /// Naive Bayes with Laplace-smoothed priors; falls back to mc when the
    /// leaf has not seen any instance.
    fn nb_proba(&self, x: &[f64]) -> f64 {
        let n = self.total();
        if n == 0.0 {
            return self.mc_proba();
        }
        let mut log_post = [f64::NEG_INFINITY; 2];
        for (c, lp) in log_post.iter_mut().enumerate() {
            if self.counts[c] == 0.0 {
                continue;
            }
            let prior = ((self.counts[c] + 1.0) / (n + 2.0)).ln();
            let like: f64 = self
                .stats
                .iter()
                .zip(x)
                .map(|(s, &v)| s[c].ln_pdf(v))
                .sum();
            *lp = prior + like;
        }
        let top = log_post[0].max(log_post[1]);
        let e0 = (log_post[0] - top).exp();
        let e1 = (log_post[1] - top).exp();
        e1 / (e0 + e1)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(Leaf),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    merit: f64,
    left: [f64; 2],
    right: [f64; 2],
}

/// Hoeffding tree (VFDT) with Gaussian split statistics, for binary targets.
#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingTree {
    params: HoeffdingTreeParams,
    nodes: Vec<Node>,
    n_features: Option<usize>,
}

impl HoeffdingTree {
    pub fn new(params: HoeffdingTreeParams) -> Self {
        Self {
            params,
            nodes: vec![Node::Leaf(Leaf::new(0, 0, [0.0; 2]))],
            n_features: None,
        }
    }

    pub fn params(&self) -> &HoeffdingTreeParams {
        &self.params
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    /// Depth of the deepest leaf; 0 for a single-leaf tree.
    pub fn depth(&self) -> usize {
        self.leaves().map(|l| l.depth).max().unwrap_or(0)
    }

    /// Root split as `(feature, threshold)`, if the root has split.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            Node::Leaf(_) => None,
        }
    }

    /// Class counts of every leaf, in arena order.
    pub fn leaf_counts(&self) -> Vec<[f64; 2]> {
        self.leaves().map(|l| l.counts).collect()
    }

    fn leaves(&self) -> impl Iterator<Item = &Leaf> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(l) => Some(l),
            Node::Split { .. } => None,
        })
    }

    fn route(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf(_) => return idx,
                Node::Split { feature, threshold, left, right } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    fn leaf_proba(&self, leaf: &Leaf, x: &[f64]) -> f64 {
        let use_nb = match self.params.leaf_prediction {
            LeafPrediction::Mc => false,
            LeafPrediction::Nb => leaf.total() >= self.params.nb_threshold as f64,
            LeafPrediction::Nba => {
                leaf.total() >= self.params.nb_threshold as f64
                    && leaf.nb_correct >= leaf.mc_correct
            }
        };
        if use_nb {
            leaf.nb_proba(x)
        } else {
            leaf.mc_proba()
        }
    }

    fn best_candidates(&self, leaf: &Leaf) -> Vec<Candidate> {
        let total = leaf.total();
        let parent_entropy = entropy(leaf.counts);
        let mut per_feature = Vec::new();
        for (feature, st) in leaf.stats.iter().enumerate() {
            let mut thresholds = Vec::with_capacity(5);
            let seen: Vec<&GaussStat> = st.iter().filter(|s| s.n > 0.0).collect();
            if seen.len() == 2 {
                thresholds.push(0.5 * (seen[0].mean + seen[1].mean));
            }
            for s in &seen {
                thresholds.push(s.mean - s.std());
                thresholds.push(s.mean + s.std());
            }
            let mut best: Option<Candidate> = None;
            for t in thresholds {
                let left = [st[0].weight_at_most(t), st[1].weight_at_most(t)];
                let right = [leaf.counts[0] - left[0], leaf.counts[1] - left[1]];
                let wl = left[0] + left[1];
                let wr = right[0] + right[1];
                if wl < MIN_BRANCH_FRACTION * total || wr < MIN_BRANCH_FRACTION * total {
                    continue;
                }
                let merit =
                    parent_entropy - (wl / total) * entropy(left) - (wr / total) * entropy(right);
                if best.is_none_or(|b| merit > b.merit) {
                    best = Some(Candidate { feature, threshold: t, merit, left, right });
                }
            }
            per_feature.extend(best);
        }
        per_feature.sort_by(|a, b| b.merit.total_cmp(&a.merit));
        per_feature
    }

    fn attempt_split(&mut self, idx: usize) {
        let Node::Leaf(leaf) = &self.nodes[idx] else {
            return;
        };
        let candidates = self.best_candidates(leaf);
        let Some(best) = candidates.first().copied() else {
            return;
        };
        // The no-split option has merit 0, so it competes as runner-up.
        let second = candidates.get(1).map_or(0.0, |c| c.merit.max(0.0));
        let eps = hoeffding_bound(1.0, self.params.delta, leaf.total());
        if best.merit <= 0.0 || !(best.merit - second > eps || eps < self.params.tau) {
            return;
        }
        let depth = leaf.depth + 1;
        let d = leaf.stats.len();
        let left = self.nodes.len();
        self.nodes.push(Node::Leaf(Leaf::new(depth, d, best.left)));
        self.nodes.push(Node::Leaf(Leaf::new(depth, d, best.right)));
        self.nodes[idx] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right: left + 1,
        };
    }
}

fn entropy(counts: [f64; 2]) -> f64 {
    let n = counts[0] + counts[1];
    if n <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.log2()
        })
        .sum()
}

impl OnlineClassifier for HoeffdingTree {
    fn learn_one(&mut self, x: &[f64], y: u8) -> Result<(), ModelError> {
        check_instance(x, y, self.n_features)?;
        if self.n_features.is_none() {
            self.n_features = Some(x.len());
            if let Node::Leaf(root) = &mut self.nodes[0] {
                root.stats = vec![[GaussStat::default(); 2]; x.len()];
            }
        }
        let idx = self.route(x);
        let (mc_hit, nb_hit) = match &self.nodes[idx] {
            Node::Leaf(leaf) if self.params.leaf_prediction == LeafPrediction::Nba => (
                u8::from(leaf.mc_proba() >= 0.5) == y,
                u8::from(leaf.nb_proba(x) >= 0.5) == y,
            ),
            _ => (false, false),
        };
        let grace = self.params.grace_period.max(1) as f64;
        let max_depth = self.params.max_depth;
        let Node::Leaf(leaf) = &mut self.nodes[idx] else {
            unreachable!("route ends at a leaf");
        };
        leaf.mc_correct += u64::from(mc_hit);
        leaf.nb_correct += u64::from(nb_hit);
        leaf.counts[y as usize] += 1.0;
        for (st, &v) in leaf.stats.iter_mut().zip(x) {
            st[y as usize].push(v);
        }
        let due = leaf.total() - leaf.weight_at_last_attempt >= grace;
        let pure = leaf.counts[0] == 0.0 || leaf.counts[1] == 0.0;
        if due {
            leaf.weight_at_last_attempt = leaf.total();
        }
        if due && !pure && leaf.depth < max_depth {
            self.attempt_split(idx);
        }
        Ok(())
    }

    fn predict_proba_one(&self, x: &[f64]) -> f64 {
        if self.n_features.is_some_and(|d| d != x.len()) {
            return 0.5;
        }
        match &self.nodes[self.route(x)] {
            Node::Leaf(leaf) => self.leaf_proba(leaf, x),
            Node::Split { .. } => unreachable!("route ends at a leaf"),
        }
    }

    /// Fixed overhead plus 40 bytes per split node and, per leaf, 80 bytes
    /// plus 80 bytes of Gaussian statistics per feature.
    fn memory_bytes(&self) -> usize {
        TREE_BYTES
            + self
                .nodes
                .iter()
                .map(|n| match n {
                    Node::Split { .. } => SPLIT_BYTES,
                    Node::Leaf(l) => LEAF_BYTES + FEATURE_STATS_BYTES * l.stats.len(),
                })
                .sum::<usize>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tree(f: impl FnOnce(&mut HoeffdingTreeParams)) -> HoeffdingTree {
        let mut p = HoeffdingTreeParams::default();
        f(&mut p);
        HoeffdingTree::new(p)
    }

    fn separable_stream(n: usize, seed: u64) -> Vec<(f64, u8)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                (x, u8::from(x >= 0.0))
            })
            .collect()
    }

    #[test]
    fn bound_by_formula() {
        let eps = hoeffding_bound(1.0, 1e-7, 200.0);
        assert!((eps - 0.200_737).abs() < 1e-6, "{eps}");
        let quarter = hoeffding_bound(1.0, 1e-7, 800.0);
        assert!((quarter - eps / 2.0).abs() < 1e-15);
        assert_eq!(hoeffding_bound(1.0, 1.0, 10.0), 0.0);
    }

    #[test]
    fn no_split_before_grace_period() {
        let mut t = tree(|_| {});
        for (x, y) in separable_stream(50, 1) {
            t.learn_one(&[x], y).unwrap();
        }
        assert_eq!(t.n_nodes(), 1);
    }

    #[test]
    fn separable_stream_splits_at_root() {
        let mut t = tree(|p| p.leaf_prediction = LeafPrediction::Mc);
        let data = separable_stream(2000, 2);
        for &(x, y) in &data {
            t.learn_one(&[x], y).unwrap();
        }
        let (feature, threshold) = t.root_split().expect("root should split");
        assert_eq!(feature, 0);
        assert!(threshold.abs() < 0.05, "threshold {threshold}");
        let correct = data
            .iter()
            .filter(|&&(x, y)| t.predict_one(&[x]) == y)
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.99);
    }

    #[test]
    fn depth_cap_of_one_allows_a_single_split() {
        let mut t = tree(|p| {
            p.max_depth = 1;
            p.grace_period = 50;
        });
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5000 {
            let x = [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
            let y = u8::from((x[0] > 5.0) ^ (x[1] > 5.0));
            t.learn_one(&x, y).unwrap();
        }
        assert!(t.n_splits() <= 1);
        assert!(t.depth() <= 1);
    }

    #[test]
    fn untrained_predicts_half() {
        let t = tree(|_| {});
        assert_eq!(t.predict_proba_one(&[3.0, 1.0]), 0.5);
    }

    #[test]
    fn majority_class_frequency() {
        let mut t = tree(|p| {
            p.leaf_prediction = LeafPrediction::Mc;
            p.grace_period = 1000;
        });
        for i in 0..40 {
            t.learn_one(&[i as f64], u8::from(i < 10)).unwrap();
        }
        assert_eq!(t.predict_proba_one(&[0.0]), 0.25);
    }

    #[test]
    fn naive_bayes_symmetric_likelihoods() {
        let mut t = tree(|p| {
            p.leaf_prediction = LeafPrediction::Nb;
            p.grace_period = 1000;
        });
        // class 0 ~ mean 0, var 1; class 1 ~ mean 4, var 1; equal counts.
        for x in [-1.0, 0.0, 1.0] {
            t.learn_one(&[x], 0).unwrap();
        }
        for x in [3.0, 4.0, 5.0] {
            t.learn_one(&[x], 1).unwrap();
        }
        assert_eq!(t.predict_proba_one(&[2.0]), 0.5);
        assert!(t.predict_proba_one(&[3.5]) > 0.9);
    }

    #[test]
    fn nba_with_infinite_threshold_is_mc() {
        let mut nba = tree(|p| {
            p.leaf_prediction = LeafPrediction::Nba;
            p.nb_threshold = usize::MAX;
            p.grace_period = 30;
        });
        let mut mc = tree(|p| {
            p.leaf_prediction = LeafPrediction::Mc;
            p.grace_period = 30;
        });
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..3000 {
            let x = [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
            let y = u8::from(x[0] + x[1] > 9.0);
            assert_eq!(nba.predict_proba_one(&x), mc.predict_proba_one(&x));
            nba.learn_one(&x, y).unwrap();
            mc.learn_one(&x, y).unwrap();
        }
    }

    #[test]
    fn leaf_counts_sum_to_instances() {
        let mut t = tree(|p| p.grace_period = 40);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let leaf_total = |t: &HoeffdingTree| -> f64 { t.leaf_counts().iter().map(|c| c[0] + c[1]).sum() };
        // Instances absorbed into leaves that later became split nodes.
        let mut absorbed = 0.0;
        for _ in 0..3000 {
            let x = [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
            let before = leaf_total(&t);
            let splits = t.n_splits();
            t.learn_one(&x, u8::from(x[0] > 3.0 && x[1] > 6.0)).unwrap();
            let after = leaf_total(&t);
            if t.n_splits() == splits {
                assert_eq!(after, before + 1.0);
            } else {
                absorbed += before + 1.0 - after;
            }
        }
        assert!(t.n_splits() > 1);
        assert_eq!(leaf_total(&t) + absorbed, 3000.0);
        assert!(t.leaf_counts().iter().flatten().all(|&c| c >= 0.0));
    }

    #[test]
    fn memory_grows_with_splits_and_is_deterministic() {
        let mut t = tree(|p| p.grace_period = 50);
        assert!(t.memory_bytes() > 0);
        let mut before = t.memory_bytes();
        let mut grew = false;
        for (x, y) in separable_stream(600, 3) {
            let splits = t.n_splits();
            t.learn_one(&[x], y).unwrap();
            let now = t.memory_bytes();
            assert!(now >= before);
            if t.n_splits() > splits {
                grew = now > before;
            }
            before = now;
        }
        assert!(grew);
        let mut twin = tree(|p| p.grace_period = 50);
        for (x, y) in separable_stream(600, 3) {
            twin.learn_one(&[x], y).unwrap();
        }
        assert_eq!(twin, t);
        assert_eq!(twin.memory_bytes(), t.memory_bytes());
    }

    #[test]
    fn predict_is_pure() {
        let mut a = tree(|p| p.grace_period = 20);
        let mut b = a.clone();
        let data = separable_stream(300, 8);
        for &(x, y) in &data[..150] {
            a.learn_one(&[x], y).unwrap();
            b.learn_one(&[x], y).unwrap();
        }
        let p0 = a.predict_proba_one(&[0.3]);
        for _ in 0..1000 {
            assert_eq!(a.predict_proba_one(&[0.3]), p0);
        }
        for &(x, y) in &data[150..] {
            a.learn_one(&[x], y).unwrap();
            b.learn_one(&[x], y).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_finite() {
        let mut t = tree(|_| {});
        assert!(t.learn_one(&[f64::INFINITY], 0).is_err());
    }
}

#[cfg(test)]
mod bound_props {
    use super::hoeffding_bound;
    use proptest::prelude::*;

    fn reference(r: f64, delta: f64, n: f64) -> f64 {
        let numerator = r.powi(2) * -delta.ln();
        (numerator / n / 2.0).sqrt()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn matches_reference(r in 0.01f64..10.0, delta in 1e-12f64..1.0, n in 1u32..100_000) {
            let a = hoeffding_bound(r, delta, n as f64);
            let b = reference(r, delta, n as f64);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b), "{} vs {}", a, b);
        }
    }
}
