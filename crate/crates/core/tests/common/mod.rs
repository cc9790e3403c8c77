//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the scheduler implementations.

#![allow(dead_code)]

/// Every owner vector of `n_sites` eNodeBs over `n_mos` operators.
pub fn all_assignments(n_mos: usize, n_sites: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n_sites {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n_mos).map(move |i| {
                    let mut v = prefix.clone();
                    v.push(i);
                    v
                })
            })
            .collect();
    }
    out
}

pub fn rates_of(r: &[Vec<f64>], owners: &[usize]) -> Vec<f64> {
    let mut rates = vec![0.0; r.len()];
    for (k, &i) in owners.iter().enumerate() {
        rates[i] += r[i][k];
    }
    rates
}

/// Largest total rate any assignment attains.
pub fn max_total_rate(r: &[Vec<f64>]) -> f64 {
    let n_sites = r[0].len();
    all_assignments(r.len(), n_sites)
        .iter()
        .map(|owners| owners.iter().enumerate().map(|(k, &i)| r[i][k]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Ascending vector of min(rate/Ω, 1) over operators with a demand.
pub fn satisfaction_key(rates: &[f64], omega: &[Option<f64>]) -> Vec<f64> {
    let mut key: Vec<f64> = omega
        .iter()
        .zip(rates)
        .filter_map(|(w, &r)| w.map(|w| if w <= 0.0 { 1.0 } else { (r / w).min(1.0) }))
        .collect();
    key.sort_by(f64::total_cmp);
    key
}

/// Lexicographic comparison with an absolute tolerance per entry.
pub fn lex_less(a: &[f64], b: &[f64], tol: f64) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x + tol < *y {
            return true;
        }
        if *x > y + tol {
            return false;
        }
    }
    false
}

/// Lexicographically best satisfaction key over all assignments.
pub fn best_satisfaction_key(r: &[Vec<f64>], omega: &[Option<f64>]) -> Vec<f64> {
    let mut best: Option<Vec<f64>> = None;
    for owners in all_assignments(r.len(), r[0].len()) {
        let key = satisfaction_key(&rates_of(r, &owners), omega);
        if best.as_ref().is_none_or(|b| lex_less(b, &key, 0.0)) {
            best = Some(key);
        }
    }
    best.unwrap()
}

/// Greedy check: the smaller-demand operator takes its highest-rate
/// eNodeBs until covered, then the larger does the same on what is left.
/// Returns whether both demands are covered and how many eNodeBs remain.
pub fn greedy_cover(r: &[Vec<f64>], omega: &[Option<f64>]) -> (bool, usize) {
    let mut qos: Vec<usize> = (0..omega.len()).filter(|&i| omega[i].is_some()).collect();
    qos.sort_by(|&a, &b| omega[a].unwrap().total_cmp(&omega[b].unwrap()).then(a.cmp(&b)));
    let n_sites = r[0].len();
    let mut free: Vec<usize> = (0..n_sites).collect();
    for &i in &qos {
        let w = omega[i].unwrap();
        free.sort_by(|&a, &b| r[i][b].total_cmp(&r[i][a]).then(a.cmp(&b)));
        let mut got = 0.0;
        while got < w {
            if free.is_empty() {
                return (false, 0);
            }
            got += r[i][free.remove(0)];
        }
    }
    (true, free.len())
}

pub fn jain(rates: &[f64]) -> f64 {
    let s: f64 = rates.iter().sum();
    let q: f64 = rates.iter().map(|r| r * r).sum();
    if s == 0.0 {
        1.0
    } else {
        s * s / (rates.len() as f64 * q)
    }
}

/// Rate-guarantee utility Ω·(ln λ + 1 − exp(−β(λ − Ω)/Ω)).
pub fn rg_utility(lambda: f64, omega: f64, beta: f64) -> f64 {
    omega * (lambda.ln() + 1.0 - (-beta * (lambda - omega) / omega).exp())
}

/// Central difference of `f` at `x` with step `h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Smoothed rate after feeding `rates` through the closed form of the
/// exponential filter.
pub fn smoothed_closed_form(lambda0: f64, tau: f64, rates: &[f64]) -> f64 {
    let keep = 1.0 - 1.0 / tau;
    let t = rates.len();
    let mut v = keep.powi(t as i32) * lambda0;
    for (s, r) in rates.iter().enumerate() {
        v += keep.powi((t - 1 - s) as i32) * r / tau;
    }
    v
}
