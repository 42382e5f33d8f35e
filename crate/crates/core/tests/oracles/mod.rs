//! Brute-force reference implementations written without looking at the
//! library's internals. Shared by the core tests and the acceptance target.

#![allow(dead_code)]

/// count, mean, std (n - 1), min, 25%, 50%, 75%, max.
pub fn describe(values: &[f64]) -> [f64; 8] {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let std = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let h = (n - 1) as f64 * p;
        let i = h as usize;
        if i + 1 >= n {
            s[n - 1]
        } else {
            s[i] + (h - i as f64) * (s[i + 1] - s[i])
        }
    };
    [n as f64, mean, std, s[0], q(0.25), q(0.5), q(0.75), s[n - 1]]
}

fn cells(y: &[u8], s: &[f64]) -> (f64, f64, f64, f64) {
    let (mut tp, mut fp, mut tn, mut fn_) = (0.0, 0.0, 0.0, 0.0);
    for (&t, &p) in y.iter().zip(s) {
        let hat = p >= 0.5;
        match (t == 1, hat) {
            (true, true) => tp += 1.0,
            (false, true) => fp += 1.0,
            (false, false) => tn += 1.0,
            (true, false) => fn_ += 1.0,
        }
    }
    (tp, fp, tn, fn_)
}

fn div(a: f64, b: f64) -> Option<f64> {
    if b == 0.0 {
        None
    } else {
        Some(a / b)
    }
}

/// Reference value by metric name; `None` where the definition has a zero
/// denominator or needs both classes.
pub fn metric(name: &str, y: &[u8], s: &[f64]) -> Option<f64> {
    let n = y.len() as f64;
    let (tp, fp, tn, fn_) = cells(y, s);
    let pos = y.iter().filter(|&&t| t == 1).count() as f64;
    let both = pos > 0.0 && pos < n;
    match name {
        "accuracy_score" => Some((tp + tn) / n),
        "zero_one_loss" => Some(1.0 - (tp + tn) / n),
        "hamming_loss" => {
            let wrong = y.iter().zip(s).filter(|(&t, &p)| t != u8::from(p >= 0.5)).count();
            Some(wrong as f64 / n)
        }
        "precision_score" => div(tp, tp + fp),
        "recall_score" => div(tp, tp + fn_),
        "f1_score" => {
            let p = div(tp, tp + fp);
            let r = div(tp, tp + fn_);
            match (p, r) {
                (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
                (Some(_), Some(_)) => Some(0.0),
                _ if tp + fp + fn_ > 0.0 => Some(0.0),
                _ => None,
            }
        }
        "jaccard_score" => div(tp, tp + fp + fn_),
        "cohen_kappa_score" => {
            if !both {
                return None;
            }
            let po = (tp + tn) / n;
            let pred_pos = (tp + fp) / n;
            let pe = (pos / n) * pred_pos + (1.0 - pos / n) * (1.0 - pred_pos);
            div(po - pe, 1.0 - pe)
        }
        "matthews_corrcoef" => {
            if !both {
                return None;
            }
            // Pearson correlation of the two 0/1 vectors.
            let yh: Vec<f64> = s.iter().map(|&p| f64::from(u8::from(p >= 0.5))).collect();
            let yt: Vec<f64> = y.iter().map(|&t| f64::from(t)).collect();
            let mt = yt.iter().sum::<f64>() / n;
            let mh = yh.iter().sum::<f64>() / n;
            let cov: f64 = yt.iter().zip(&yh).map(|(a, b)| (a - mt) * (b - mh)).sum();
            let vt: f64 = yt.iter().map(|a| (a - mt) * (a - mt)).sum();
            let vh: f64 = yh.iter().map(|b| (b - mh) * (b - mh)).sum();
            div(cov, (vt * vh).sqrt())
        }
        "roc_auc_score" => {
            if !both {
                return None;
            }
            let mut credit = 0.0;
            let mut pairs = 0.0;
            for (i, &ti) in y.iter().enumerate() {
                for (j, &tj) in y.iter().enumerate() {
                    if ti == 1 && tj == 0 {
                        pairs += 1.0;
                        if s[i] > s[j] {
                            credit += 1.0;
                        } else if s[i] == s[j] {
                            credit += 0.5;
                        }
                    }
                }
            }
            Some(credit / pairs)
        }
        "hinge_loss" => {
            let mut total = 0.0;
            for (&t, &p) in y.iter().zip(s) {
                let sign = if t == 1 { 1.0 } else { -1.0 };
                let l = 1.0 - sign * (2.0 * p - 1.0);
                if l > 0.0 {
                    total += l;
                }
            }
            Some(total / n)
        }
        other => panic!("no oracle for {other}"),
    }
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        let pivot = a[c].clone();
        for r in c + 1..n {
            let f = a[r][c] / pivot[c];
            for (dst, src) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                *dst -= f * src;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    x
}

/// Ordinary Kriging mean with correlation exp(-sum 10^theta_k d_k^2) and
/// `nugget` on the diagonal, using dense solves only.
pub fn kriging_mean(x: &[Vec<f64>], y: &[f64], theta: &[f64], nugget: f64, at: &[f64]) -> f64 {
    let corr = |a: &[f64], b: &[f64]| {
        let s: f64 = a.iter().zip(b).zip(theta).map(|((u, v), t)| 10f64.powf(*t) * (u - v).powi(2)).sum();
        (-s).exp()
    };
    let n = x.len();
    let r: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 + nugget } else { corr(&x[i], &x[j]) }).collect())
        .collect();
    let ri1 = solve(r.clone(), vec![1.0; n]);
    let riy = solve(r.clone(), y.to_vec());
    let mu = riy.iter().sum::<f64>() / ri1.iter().sum::<f64>();
    let resid: Vec<f64> = y.iter().map(|v| v - mu).collect();
    let w = solve(r, resid);
    mu + x.iter().zip(&w).map(|(p, wi)| corr(p, at) * wi).sum::<f64>()
}
