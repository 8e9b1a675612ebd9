//! Self-check suites: fast-vs-brute-force equivalence and the algebraic
//! identities behind the fast formulas, on seeded random instances.
//!
//! Each suite returns a [`CheckOutcome`] with the worst observed deviation,
//! so callers can print one pass/fail line per suite.

use std::fmt;

use nalgebra::DMatrix;

use crate::approximators::{generalized_nystrom, gn_dense, nystrom};
use crate::error::Result;
use crate::estimators::{gram_inverse, loo_nystrom_fast, lpo_fast, lro_fast, lto_fast};
use crate::linalg::{drop_column, drop_row_column, lu_inverse, rcond_2, rel_diff};
use crate::oracles::{
    banachiewicz_inverse, gram_inverse_downdate, inverse_downdate, loo_nystrom_naive, lpo_naive, lro_naive, lto_naive,
    nystrom_replicate_from_scratch, nystrom_replicate_update, pinv_downdate, replicate_from_scratch,
    replicate_update_pair, replicate_update_right, ReplicateSpec,
};
use crate::sketching::{gaussian_sketch, Seed, SketchPair};

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Largest deviation observed, relative to its tolerance's scale.
    pub worst: f64,
    pub tolerance: f64,
    /// Instances compared; excluded instances are not counted.
    pub cases: usize,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: worst {:.3e} (tol {:.0e}) over {} cases{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance,
            self.cases,
            if self.detail.is_empty() { String::new() } else { format!("; {}", self.detail) }
        )
    }
}

struct Tracker {
    worst: f64,
    cases: usize,
    failures: Vec<String>,
    tolerance: f64,
}

impl Tracker {
    fn new(tolerance: f64) -> Self {
        Tracker { worst: 0.0, cases: 0, failures: Vec::new(), tolerance }
    }

    fn observe(&mut self, label: impl FnOnce() -> String, deviation: f64) {
        self.cases += 1;
        if deviation.is_nan() || deviation > self.tolerance {
            self.failures.push(format!("{} = {deviation:.3e}", label()));
        }
        if deviation.is_nan() {
            self.worst = f64::NAN;
        } else if !self.worst.is_nan() {
            self.worst = self.worst.max(deviation);
        }
    }

    fn error(&mut self, label: String, e: crate::error::Error) {
        self.cases += 1;
        self.failures.push(format!("{label}: {e}"));
    }

    fn finish(self, name: &str, extra: String) -> CheckOutcome {
        let mut detail = extra;
        if !self.failures.is_empty() {
            let shown: Vec<&str> = self.failures.iter().take(3).map(String::as_str).collect();
            if !detail.is_empty() {
                detail.push_str("; ");
            }
            detail.push_str(&format!("{} failures, e.g. {}", self.failures.len(), shown.join(", ")));
        }
        CheckOutcome {
            name: name.into(),
            passed: self.failures.is_empty() && self.cases > 0,
            worst: self.worst,
            tolerance: self.tolerance,
            cases: self.cases,
            detail,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Instances below this core conditioning are excluded from equivalence checks.
pub const EQUIVALENCE_RCOND: f64 = 1e-6;

/// Fast estimators against their brute-force definitions on Gaussian
/// `size x size` targets: LPO and LTO with `r = s`, LRO with `r = s` and
/// `r = s + 5`, and Nyström LOO on `G*G`.
pub fn oracle_equivalence(trials: usize, size: usize, widths: &[usize], tol: f64) -> CheckOutcome {
    let mut t = Tracker::new(tol);
    let mut excluded = 0;
    for trial in 0..trials as u64 {
        let a = gaussian_sketch(size, size, Seed(10_000 + trial));
        let spd = a.tr_mul(&a);
        for &s in widths {
            for r in [s, s + 5] {
                let sk = SketchPair::from_seed(size, size, s, r, Seed(trial * 1_000 + s as u64 * 10 + (r - s) as u64));
                let h = sk.phi.tr_mul(&(&a * &sk.omega));
                if rcond_2(&h) <= EQUIVALENCE_RCOND {
                    excluded += 1;
                    continue;
                }
                let r_omega = crate::linalg::thin_qr(&(&a * &sk.omega)).1;
                let label = |k: &str| format!("{k} trial {trial} s {s} r {r}");
                match (lro_fast(&r_omega, &h), lro_naive(&a, &sk.omega, &sk.phi)) {
                    (Ok(f), Ok(n)) => t.observe(|| label("LRO"), rel(f.value, n)),
                    (Err(e), _) | (_, Err(e)) => t.error(label("LRO"), e),
                }
                if r == s {
                    match (lpo_fast(&h), lpo_naive(&a, &sk.omega, &sk.phi)) {
                        (Ok(f), Ok(n)) => t.observe(|| label("LPO"), rel(f.value, n)),
                        (Err(e), _) | (_, Err(e)) => t.error(label("LPO"), e),
                    }
                    match (lto_fast(&h), lto_naive(&a, &sk.omega, &sk.phi)) {
                        (Ok(f), Ok(n)) => t.observe(|| label("LTO"), rel(f.value, n)),
                        (Err(e), _) | (_, Err(e)) => t.error(label("LTO"), e),
                    }
                    let ny = nystrom(&spd, &sk.omega);
                    match ny {
                        Ok(ny) if ny.rcond_h > EQUIVALENCE_RCOND => {
                            match (loo_nystrom_fast(&ny.rfac, &ny.h), loo_nystrom_naive(&spd, &sk.omega)) {
                                (Ok(f), Ok(n)) => t.observe(|| label("LOO"), rel(f.value, n)),
                                (Err(e), _) | (_, Err(e)) => t.error(label("LOO"), e),
                            }
                        }
                        Ok(_) => excluded += 1,
                        Err(e) => t.error(label("LOO"), e),
                    }
                }
            }
        }
    }
    let extra = if excluded > 0 { format!("{excluded} instances excluded for rcond(H) <= {EQUIVALENCE_RCOND:e}") } else { String::new() };
    t.finish("oracle equivalence (fast vs brute force)", extra)
}

/// Square-core inverse downdate, Gram-inverse and pseudoinverse downdates,
/// and blockwise (Banachiewicz) inversion.
pub fn downdate_identities(instances: usize, tol: f64) -> CheckOutcome {
    let mut t = Tracker::new(tol);
    for k in 0..instances as u64 {
        let s = 4 + (k as usize % 6);
        let h = gaussian_sketch(s, s, Seed(20_000 + k));
        let Some(hinv) = lu_inverse(&h) else { continue };
        let last = s - 1;
        match inverse_downdate(&hinv, last, last) {
            Ok(d) => {
                let expected = lu_inverse(&drop_row_column(&h, last, last)).expect("generic minor is invertible");
                let edge = d.row(last).amax().max(d.column(last).amax()) / hinv.amax();
                t.observe(|| format!("square downdate edge #{k}"), edge);
                t.observe(|| format!("square downdate block #{k}"), rel_diff(&d.view((0, 0), (last, last)).into_owned(), &expected));
            }
            Err(e) => t.error(format!("square downdate #{k}"), e),
        }

        let tall = gaussian_sketch(s + 5, s, Seed(21_000 + k));
        match gram_inverse(&tall) {
            Ok((gram_inv, _)) => {
                let j = k as usize % s;
                let reduced = drop_column(&tall, j);
                let expected = lu_inverse(&reduced.tr_mul(&reduced)).expect("full column rank");
                match gram_inverse_downdate(&gram_inv, j) {
                    Ok(d) => t.observe(|| format!("gram downdate #{k}"), rel_diff(&drop_row_column(&d, j, j), &expected)),
                    Err(e) => t.error(format!("gram downdate #{k}"), e),
                }
                let pinv = &gram_inv * tall.transpose();
                let expected = reduced.pseudo_inverse(1e-14).expect("pseudoinverse");
                match pinv_downdate(&gram_inv, &pinv, j) {
                    Ok(d) => t.observe(|| format!("pinv downdate #{k}"), rel_diff(&d.remove_row(j), &expected)),
                    Err(e) => t.error(format!("pinv downdate #{k}"), e),
                }
            }
            Err(e) => t.error(format!("gram inverse #{k}"), e),
        }

        match banachiewicz_inverse(&h) {
            Ok(b) => t.observe(|| format!("banachiewicz #{k}"), rel_diff(&b, &hinv)),
            Err(e) => t.error(format!("banachiewicz #{k}"), e),
        }
    }
    t.finish("downdate and block-inverse identities", String::new())
}

/// Rank-one replicate updates (pair, right, Nyström) against replicates
/// rebuilt from the reduced sketches.
pub fn replicate_identities(instances: usize, tol: f64) -> CheckOutcome {
    let mut t = Tracker::new(tol);
    for k in 0..instances as u64 {
        let (m, n, s) = (18, 15, 3 + (k as usize % 5));
        let a = gaussian_sketch(m, n, Seed(30_000 + k));
        let scale = a.norm();
        let (j, l) = (k as usize % s, (k as usize + 1) % s);

        let sk = SketchPair::from_seed(m, n, s, s, Seed(31_000 + k));
        let pair = generalized_nystrom(&a, &sk).and_then(|f| {
            let upd = replicate_update_pair(&f, j, l)?;
            let scratch = replicate_from_scratch(&a, &sk.omega, &sk.phi, ReplicateSpec::Pair { left: l, right: j })?;
            let twin = replicate_update_pair(&f, j, j)?;
            let twin_scratch = replicate_from_scratch(&a, &sk.omega, &sk.phi, ReplicateSpec::Twin(j))?;
            Ok(((upd - scratch).norm() / scale).max((twin - twin_scratch).norm() / scale))
        });
        match pair {
            Ok(d) => t.observe(|| format!("pair update #{k}"), d),
            Err(e) => t.error(format!("pair update #{k}"), e),
        }

        let sk = SketchPair::from_seed(m, n, s, s + 4, Seed(32_000 + k));
        let right = generalized_nystrom(&a, &sk).and_then(|f| {
            let upd = replicate_update_right(&f, j)?;
            let scratch = replicate_from_scratch(&a, &sk.omega, &sk.phi, ReplicateSpec::Right(j))?;
            Ok((upd - scratch).norm() / scale)
        });
        match right {
            Ok(d) => t.observe(|| format!("right update #{k}"), d),
            Err(e) => t.error(format!("right update #{k}"), e),
        }

        let g = gaussian_sketch(n, n, Seed(33_000 + k));
        let spd = g.tr_mul(&g);
        let omega = gaussian_sketch(n, s, Seed(34_000 + k));
        let ny = nystrom(&spd, &omega).and_then(|f| {
            let upd = nystrom_replicate_update(&f, j)?;
            let scratch = nystrom_replicate_from_scratch(&spd, &omega, j)?;
            Ok((upd - scratch).norm() / spd.norm())
        });
        match ny {
            Ok(d) => t.observe(|| format!("nystrom update #{k}"), d),
            Err(e) => t.error(format!("nystrom update #{k}"), e),
        }
    }
    t.finish("replicate updates vs from-scratch replicates", String::new())
}

/// `(A - Â)Ω = 0`, plus `Φ*(A - Â) = 0` when `r = s`.
pub fn interpolation_identities(instances: usize, tol: f64) -> CheckOutcome {
    let mut t = Tracker::new(tol);
    for k in 0..instances as u64 {
        let (m, n) = (30, 24);
        let a = gaussian_sketch(m, n, Seed(40_000 + k));
        for d in [0, 5] {
            let s = 4 + (k as usize % 8);
            let sk = SketchPair::from_seed(m, n, s, s + d, Seed(41_000 + 10 * k + d as u64));
            match generalized_nystrom(&a, &sk) {
                Ok(f) => {
                    let diff: DMatrix<f64> = &a - gn_dense(&f);
                    let right = (&diff * &sk.omega).norm() / (&a * &sk.omega).norm();
                    t.observe(|| format!("right interpolation #{k} r-s={d}"), right);
                    if d == 0 {
                        let left = (sk.phi.transpose() * &diff).norm() / (sk.phi.transpose() * &a).norm();
                        t.observe(|| format!("left interpolation #{k}"), left);
                    }
                }
                Err(e) => t.error(format!("interpolation #{k}"), e),
            }
        }
    }
    t.finish("interpolation (A - Â)Ω = 0", String::new())
}

/// The full `check` suite with its default sizes.
pub fn run_all() -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        oracle_equivalence(50, 60, &[5, 10, 20], 1e-8),
        downdate_identities(20, 1e-10),
        replicate_identities(20, 1e-8),
        interpolation_identities(20, 1e-10),
    ])
}
