//! Acceptance criteria, one line per criterion. Exits non-zero if any fails.

use std::f64::consts::{E, PI};
use std::time::{Duration, Instant};

use quasilattice::cutproject::{is_member, translated_patch, DEFAULT_TOL};
use quasilattice::deform::{deform_measure, detect_periods, DiracComb, KernelRule};
use quasilattice::diffraction::{fourier_sum, spectrum_scan};
use quasilattice::quadfield::{dual_coordinates, enumerate_dual};
use quasilattice::{
    amplitude_closed, amplitude_quadrature, autocorrelation_finite, deform_patch, fixed_point_patch, project_patch,
    sigma_estimate, silver_window, silver_windows, solve_windows, weyl_sum, AlgebraicNumber, Complex64,
    CutProjectScheme, DeformationMap, IfsSystem, LabeledPatch, Real,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn q(a: i64, b: i64, c: i64) -> AlgebraicNumber {
    AlgebraicNumber::new(a, b, c).unwrap()
}

fn ex(x: AlgebraicNumber) -> Real {
    Real::Exact(x)
}

fn zero() -> Real {
    ex(AlgebraicNumber::ZERO)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn patch(r: f64) -> Result<LabeledPatch, String> {
    project_patch(r, &CutProjectScheme::silver_mean()).map_err(|e| e.to_string())
}

fn within_time(limit: Option<Duration>, elapsed: Duration) -> Result<(), String> {
    match limit {
        Some(l) if elapsed > l => Err(format!("took {:.2} s, limit {:.0} s", elapsed.as_secs_f64(), l.as_secs_f64())),
        _ => Ok(()),
    }
}

fn c1_windows() -> Outcome {
    let sys = IfsSystem::silver_mean();
    let sol = solve_windows(&sys, DEFAULT_TOL).map_err(|e| e.to_string())?;
    let (w_a, w_b) = silver_windows();
    let dist = sol.windows[0].hausdorff(&w_a).max(sol.windows[1].hausdorff(&w_b));
    ensure(sol.iterations <= 200, || format!("{} iterations", sol.iterations))?;
    ensure(dist < 1e-10, || format!("Hausdorff distance {dist:e}"))?;
    ensure(sol.candidate_verified == Some(true), || "candidate not verified".into())?;
    ensure(sys.is_fixed_point(&[w_a, w_b]).unwrap(), || "exact windows are not a fixed point".into())?;
    Ok(format!("{} iterations, distance {dist:.2e}", sol.iterations))
}

fn c2_agreement() -> Outcome {
    let sub = fixed_point_patch(10).map_err(|e| e.to_string())?;
    let proj = patch(sub.radius())?;
    let upper = sub.points().last().unwrap().position;
    let common: Vec<_> = proj.points().iter().filter(|p| p.position <= upper).copied().collect();
    ensure(common == sub.points(), || "patches differ".into())?;
    Ok(format!("{} points identical", sub.len()))
}

fn c3_density() -> Outcome {
    let r = 1e4;
    let p = patch(r)?;
    let mut report = Vec::new();
    let alphas = [
        ("undeformed", None),
        ("0.5", Some(Real::Float(0.5))),
        ("1", Some(ex(AlgebraicNumber::ONE))),
        ("3-2sqrt2", Some(ex(q(3, -2, 1)))),
    ];
    for (name, alpha) in alphas {
        let count = match alpha {
            None => p.len(),
            Some(a) => deform_patch(&p, &DeformationMap::affine(a, zero())).map_err(|e| e.to_string())?.len(),
        };
        let d = count as f64 / (2.0 * r);
        ensure((d - 0.5).abs() < 1e-3, || format!("alpha {name}: density {d}"))?;
        report.push(format!("{name}:{d:.5}"));
    }
    Ok(report.join(" "))
}

fn c4_amplitudes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let (a, b): (f64, f64) = (rng.gen_range(-0.99..4.4), rng.gen_range(-5.0..5.0));
        let amp = amplitude_closed(&AlgebraicNumber::ZERO, a.into(), b.into()).map_err(|e| e.to_string())?;
        ensure(amp == Complex64::new(0.5, 0.0), || format!("A(0) = {amp} at alpha {a}, beta {b}"))?;
    }
    let ks = enumerate_dual(3.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for alpha in [0.0, 0.5, 1.0] {
        let map = DeformationMap::affine(alpha, 0.0);
        for k in &ks {
            let c = amplitude_closed(k, alpha.into(), 0.0.into()).map_err(|e| e.to_string())?;
            let qd = amplitude_quadrature(k, &map, 10_000).map_err(|e| e.to_string())?;
            worst = worst.max((c - qd).norm());
        }
    }
    ensure(worst < 1e-8, || format!("closed vs quadrature {worst:e}"))?;
    Ok(format!("{} wave numbers, max difference {worst:.2e}", ks.len()))
}

fn c5_alpha_one() -> Outcome {
    let r = 1e4;
    let map = DeformationMap::affine(ex(AlgebraicNumber::ONE), zero());
    // every preimage of 2Z ∩ [-r, r] lies within distance 1 of it
    let comb = deform_patch(&patch(r + 1.0)?, &map).map_err(|e| e.to_string())?;
    let got: Vec<AlgebraicNumber> = comb.restrict(-r, r).iter().map(|a| a.position.exact().unwrap()).collect();
    let m = (r / 2.0).floor() as i64;
    let expected: Vec<AlgebraicNumber> = (-m..=m).map(|j| AlgebraicNumber::integer(2 * j)).collect();
    ensure(got == expected, || "deformed patch differs from 2Z".into())?;
    ensure(comb.atoms().iter().all(|a| a.weight == Complex64::new(1.0, 0.0)), || "non-injective".into())?;

    for k in enumerate_dual(3.0).map_err(|e| e.to_string())? {
        let i = amplitude_closed(&k, ex(AlgebraicNumber::ONE), zero()).map_err(|e| e.to_string())?.norm_sqr();
        let (_, n) = dual_coordinates(&k).unwrap();
        let want = if n == 0 { 0.25 } else { 0.0 };
        ensure(i == want, || format!("I({k}) = {i}, expected {want}"))?;
    }
    let comb = deform_patch(&patch(r)?, &map).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for k in [q(1, 0, 2), q(1, 0, 1), q(3, 0, 2)] {
        worst = worst.max((weyl_sum(&comb, ex(k)).norm_sqr() - 0.25).abs());
    }
    ensure(worst < 1e-2, || format!("empirical intensity off by {worst:e}"))?;
    Ok(format!("{} points equal 2Z, empirical error {worst:.2e}", got.len()))
}

fn c6_weyl() -> Outcome {
    let k = q(1, 0, 2);
    let reference = amplitude_quadrature(&k, &DeformationMap::affine(0.0, 0.0), 100_000).map_err(|e| e.to_string())?;
    ensure((reference.re - 0.1790).abs() < 1e-4, || format!("reference {reference}"))?;
    let mut errs = Vec::new();
    for r in [1e2, 1e3, 1e4] {
        let comb = DiracComb::from_patch(&patch(r)?);
        errs.push((weyl_sum(&comb, ex(k)) - reference).norm());
    }
    for w in errs.windows(2) {
        ensure(w[1] <= 1.2 * w[0], || format!("errors not decreasing: {errs:?}"))?;
    }
    ensure(errs[2] < 1e-2, || format!("final error {:e}", errs[2]))?;
    Ok(format!("A(1/2) = {:.6}, errors {:.2e} {:.2e} {:.2e}", reference.re, errs[0], errs[1], errs[2]))
}

fn c7_off_spectrum() -> Outcome {
    let comb = DiracComb::from_patch(&patch(1e4)?);
    let mut out = Vec::new();
    for k in [ex(q(1, 0, 3)), Real::Float(E / 10.0), Real::Float(PI / 10.0)] {
        let s = weyl_sum(&comb, k).norm();
        ensure(s < 1e-2, || format!("|S({k})| = {s:e}"))?;
        out.push(format!("{s:.1e}"));
    }
    Ok(format!("|S| = {}", out.join(", ")))
}

fn c8_wiener() -> Outcome {
    let r = 1e3;
    let comb = DiracComb::from_patch(&patch(r)?);
    let gamma = autocorrelation_finite(&comb).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let k = Real::Float(rng.gen_range(-5.0..5.0));
        let structure = (weyl_sum(&comb, k) * (2.0 * r)).norm_sqr();
        let pair_sum = fourier_sum(&gamma, k) * (2.0 * r);
        let rel = (pair_sum - structure).norm() / structure;
        worst = worst.max(rel);
    }
    ensure(worst < 1e-9, || format!("relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn c9_rational_ratio() -> Outcome {
    let alpha = q(3, -2, 1);
    let lambda = q(4, -2, 1);
    let comb = deform_patch(&patch(1e4)?, &DeformationMap::affine(alpha, zero())).map_err(|e| e.to_string())?;
    for a in comb.atoms() {
        let m = a.position.exact().unwrap().checked_div(&lambda).map_err(|e| e.to_string())?;
        ensure(m.is_integer(), || format!("{} is not in lambda Z", a.position))?;
    }
    let shift = lambda.checked_inv().unwrap();
    let ks = enumerate_dual(3.0).map_err(|e| e.to_string())?;
    let mut pairs = 0;
    let mut worst: f64 = 0.0;
    for k in &ks {
        let k2 = *k + shift;
        if k2.to_f64().abs() > 3.0 {
            continue;
        }
        let i1 = amplitude_closed(k, ex(alpha), zero()).map_err(|e| e.to_string())?.norm_sqr();
        let i2 = amplitude_closed(&k2, ex(alpha), zero()).map_err(|e| e.to_string())?.norm_sqr();
        worst = worst.max((i1 - i2).abs());
        pairs += 1;
    }
    ensure(worst < 1e-8, || format!("periodicity defect {worst:e}"))?;
    Ok(format!("{} points in (4-2sqrt2)Z, {pairs} pairs, defect {worst:.1e}", comb.len()))
}

fn c10_sigma() -> Outcome {
    let scheme = CutProjectScheme::silver_mean();
    let w = silver_window();
    let mut widths = Vec::new();
    let mut failures = Vec::new();
    for x in [AlgebraicNumber::ZERO, q(1, 1, 1), q(2, 1, 1)] {
        ensure(is_member(&x, &w).unwrap(), || format!("{x} is not in the set"))?;
        let mut prev: Option<(f64, f64)> = None;
        for r in [10.0, 100.0, 1000.0] {
            let p = translated_patch(&scheme, &x, r).map_err(|e| e.to_string())?;
            let iv = sigma_estimate(&p, &w).map_err(|e| e.to_string())?;
            ensure(iv.contains(&x.star()).unwrap(), || format!("x = {x}, r = {r}: interval misses x*"))?;
            let (lo, hi) = iv.to_f64();
            if let Some((plo, phi)) = prev {
                ensure(plo <= lo && hi <= phi, || format!("x = {x}: intervals not nested at r = {r}"))?;
            }
            prev = Some((lo, hi));
            if r == 1000.0 {
                let width = iv.width().unwrap().to_f64();
                widths.push(format!("{width:.4e}"));
                if width >= 1e-3 {
                    failures.push(format!("x = {x}: width {width:.4e} >= 1e-3 at r = 1000"));
                }
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("widths at r = 1000: {}", widths.join(", ")))
    } else {
        Err(format!("nested and containing x*, but {}", failures.join("; ")))
    }
}

fn c11_measure() -> Outcome {
    let base = DiracComb::from_patch(&patch(200.0)?);
    let id = deform_measure(&base, &KernelRule::identity()).map_err(|e| e.to_string())?;
    ensure(id.atoms() == base.atoms(), || "identity kernel changed the comb".into())?;
    let t = ex(q(1, 3, 2));
    let shifted = deform_measure(&base, &KernelRule::translation(t)).map_err(|e| e.to_string())?;
    ensure(shifted.atoms() == base.translate(t).unwrap().atoms(), || "delta_t is not a translation".into())?;

    let unit = Complex64::new(1.0, 0.0);
    let mut table = std::collections::BTreeMap::new();
    table.insert(vec![1_000_000_000], vec![(zero(), unit), (ex(q(0, 1, 4)), Complex64::new(0.0, 0.5))]);
    let rule = KernelRule::LocalLookup {
        local_radius: 1.5,
        table,
        default: vec![(ex(q(-1, 0, 2)), unit)],
    };
    let reach = rule.support_radius() + 1.5;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let t = ex(AlgebraicNumber::from_ints(rng.gen_range(-20..=20), rng.gen_range(-20..=20)));
        let lhs = deform_measure(&base.translate(t).unwrap(), &rule).map_err(|e| e.to_string())?;
        let rhs = deform_measure(&base, &rule).map_err(|e| e.to_string())?.translate(t).unwrap();
        let band = base.radius() - t.value().abs() - 2.0 * reach;
        ensure(lhs.agrees_on(&rhs, -band, band, 0.0), || format!("equivariance fails for t = {t}"))?;
    }

    let flat = deform_patch(&patch(200.0)?, &DeformationMap::affine(ex(AlgebraicNumber::ONE), zero()))
        .map_err(|e| e.to_string())?;
    let candidates = [1.0, 2.0, 4.0, 6.0, 1.0 + std::f64::consts::SQRT_2];
    let before = detect_periods(&flat, &candidates, 1e-9).map_err(|e| e.to_string())?;
    let after = detect_periods(&deform_measure(&flat, &rule).map_err(|e| e.to_string())?, &candidates, 1e-9)
        .map_err(|e| e.to_string())?;
    ensure(!before.is_empty(), || "no input period found".into())?;
    ensure(before.iter().all(|p| after.contains(p)), || format!("periods {before:?} -> {after:?}"))?;
    Ok(format!("10 translations exact, periods {before:?} kept"))
}

fn c12_beta() -> Outcome {
    let alpha = ex(q(1, 0, 2));
    let beta: Real = "0.37".parse().map_err(|e: quasilattice::Error| e.to_string())?;
    let a = spectrum_scan(&DeformationMap::affine(alpha, zero()), 3.0, 1e-6).map_err(|e| e.to_string())?;
    let b = spectrum_scan(&DeformationMap::affine(alpha, beta), 3.0, 1e-6).map_err(|e| e.to_string())?;
    ensure(a.support() == b.support(), || "supports differ".into())?;
    Ok(format!("{} peaks in both", a.entries.len()))
}

fn main() {
    type Criterion = (u32, &'static str, fn() -> Outcome, Option<u64>);
    let criteria: [Criterion; 12] = [
        (1, "window solution", c1_windows, Some(1)),
        (2, "substitution/projection agreement", c2_agreement, Some(5)),
        (3, "density", c3_density, Some(10)),
        (4, "amplitudes", c4_amplitudes, None),
        (5, "alpha = 1 limit case", c5_alpha_one, None),
        (6, "Weyl convergence", c6_weyl, Some(30)),
        (7, "off-spectrum vanishing", c7_off_spectrum, None),
        (8, "Wiener identity", c8_wiener, None),
        (9, "rational-ratio lattice", c9_rational_ratio, None),
        (10, "sigma estimator", c10_sigma, None),
        (11, "measure deformation", c11_measure, None),
        (12, "beta-independent support", c12_beta, None),
    ];
    let mut failed = 0;
    for (id, name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|msg| within_time(limit.map(Duration::from_secs), elapsed).map(|_| msg));
        match outcome {
            Ok(msg) => println!("PASS {id:>2} {name}: {msg} ({:.2} s)", elapsed.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {msg} ({:.2} s)", elapsed.as_secs_f64());
            }
        }
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
