use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use quasilattice::cutproject::{is_member, translated_patch, DEFAULT_TOL};
use quasilattice::deform::{deformed_lengths, interval_ratio, DeloneReport};
use quasilattice::diffraction::{empirical_spectrum, first_dual_elements};
use quasilattice::substitution::fixed_point_patch_with;
use quasilattice::{
    compare_empirical_analytic, deform_patch, delone_check, density, extinction_report, project_patch,
    sigma_estimate, solve_windows, spectrum_scan, AlgebraicNumber, DiracComb, LabeledPatch, Real,
};
use serde_json::{json, Value};

use crate::config::Run;
use crate::error::CliError;
use crate::svg::stem_plot;
use crate::Mode;

/// Peaks weaker than this are left out of the empirical spectrum and the
/// comparison table; their Weyl sums are dominated by the boundary term.
pub const EMPIRICAL_FLOOR: f64 = 1e-4;

const MAX_LEVEL: usize = 64;

fn create_out(run: &Run) -> Result<(), CliError> {
    fs::create_dir_all(&run.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", run.out.display())))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, v)?;
        writeln!(w)
    })
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("values serialize"));
}

fn substitution_patch(run: &Run) -> Result<LabeledPatch, CliError> {
    for level in 0..=MAX_LEVEL {
        let p = fixed_point_patch_with(&run.rule, &run.seed.0, &run.seed.1, level)?;
        if p.radius() > run.radius {
            return Ok(p);
        }
    }
    Err(CliError::Config(format!(
        "fixed point does not reach radius {} within {MAX_LEVEL} levels",
        run.radius
    )))
}

pub fn generate(run: &Run, mode: Mode) -> Result<(), CliError> {
    let patch = match mode {
        Mode::Projection => project_patch(run.radius, &run.scheme)?,
        Mode::Substitution => substitution_patch(run)?,
    }
    .restrict(run.radius);
    create_out(run)?;
    let csv = run.out.join("patch.csv");
    write_with(&csv, |w| patch.write_csv(w))?;
    let positions: Vec<f64> = patch.positions().map(|x| x.to_f64()).collect();
    let [n_a, n_b] = patch.label_counts();
    let summary = json!({
        "mode": match mode { Mode::Projection => "projection", Mode::Substitution => "substitution" },
        "radius": run.radius,
        "points": patch.len(),
        "density": patch.len() as f64 / (2.0 * run.radius),
        "extent": [positions.first().copied(), positions.last().copied()],
        "label_counts": { "a": n_a, "b": n_b },
        "seed": run.rng_seed,
    });
    write_json(&run.out.join("summary.json"), &summary)?;
    println!("wrote {} points to {}", patch.len(), csv.display());
    Ok(())
}

pub fn windows(run: &Run) -> Result<(), CliError> {
    let sol = solve_windows(&run.ifs, DEFAULT_TOL)?;
    create_out(run)?;
    let report = json!({
        "iterations": sol.iterations,
        "last_step": sol.last_step,
        "candidate_verified": sol.candidate_verified,
        "windows": sol.windows,
        "windows_float": sol.windows.iter().map(|w| w.to_f64()).collect::<Vec<_>>(),
    });
    write_json(&run.out.join("windows.json"), &report)?;
    println!("converged in {} iterations (last step {:.3e})", sol.iterations, sol.last_step);
    for (name, w) in ["W_a", "W_b"].iter().zip(&sol.windows) {
        let parts: Vec<String> = w.intervals().iter().map(|iv| format!("[{}, {}]", iv.lo, iv.hi)).collect();
        println!("{name} = {}", parts.join(" u "));
    }
    match sol.candidate_verified {
        Some(true) => println!("candidate is an exact fixed point"),
        Some(false) => println!("candidate is NOT a fixed point"),
        None => {}
    }
    Ok(())
}

fn admissibility(run: &Run) -> Result<DeloneReport, CliError> {
    let report = delone_check(&run.deformation, 0.0)?;
    if !report.admissible && !run.allow_overlap {
        return Err(CliError::Config(format!(
            "deformation is not admissible (worst gap {:.6e}); pass --allow-overlap to proceed",
            report.worst_gap
        )));
    }
    Ok(report)
}

fn deformed(run: &Run) -> Result<(DeloneReport, LabeledPatch, DiracComb), CliError> {
    let report = admissibility(run)?;
    let patch = project_patch(run.radius, &run.scheme)?;
    let comb = deform_patch(&patch, &run.deformation)?;
    Ok((report, patch, comb))
}

pub fn deform(run: &Run) -> Result<(), CliError> {
    let (report, patch, comb) = deformed(run)?;
    create_out(run)?;
    let csv = run.out.join("deformed.csv");
    write_with(&csv, |w| comb.write_csv(w))?;
    let alpha = run.deformation.affine_params().map(|(a, _)| a);
    let lengths = alpha.and_then(|a| deformed_lengths(a).ok());
    let summary = json!({
        "admissible": report.admissible,
        "worst_gap": report.worst_gap,
        "spread": report.spread,
        "alpha_in_range": report.affine_in_range,
        "points": comb.len(),
        "input_points": patch.len(),
        "density": density(&comb),
        "interval_ratio": alpha.and_then(|a| interval_ratio(a).ok()),
        "deformed_lengths": lengths.map(|(a, b)| [a, b]),
        "seed": run.rng_seed,
    });
    write_json(&run.out.join("deform.json"), &summary)?;
    println!(
        "wrote {} points to {} (admissible: {}, worst gap {:.6e})",
        comb.len(),
        csv.display(),
        report.admissible,
        report.worst_gap
    );
    Ok(())
}

pub fn diffract(run: &Run) -> Result<(), CliError> {
    let (_, _, comb) = deformed(run)?;
    let spectrum = spectrum_scan(&run.deformation, run.k_max, run.floor)?;
    let ks: Vec<AlgebraicNumber> = spectrum
        .entries
        .iter()
        .filter(|e| e.intensity >= run.floor.max(EMPIRICAL_FLOOR))
        .map(|e| e.k)
        .collect();
    let empirical = empirical_spectrum(&comb, &ks, run.k_max);
    let table = compare_empirical_analytic(&comb, &run.deformation, &ks)?;

    create_out(run)?;
    write_with(&run.out.join("spectrum.csv"), |w| spectrum.write_csv(w))?;
    write_json(&run.out.join("spectrum.json"), &serde_json::to_value(&spectrum).expect("serializable"))?;
    write_with(&run.out.join("empirical.csv"), |w| empirical.write_csv(w))?;
    write_with(&run.out.join("comparison.csv"), |w| table.write_csv(w))?;
    write_json(
        &run.out.join("comparison.json"),
        &json!({
            "rows": table.rows.len(),
            "max_error": table.max_error,
            "rms_error": table.rms_error,
            "radius": run.radius,
            "seed": run.rng_seed,
        }),
    )?;
    if let Some(path) = &run.svg {
        let title = match run.deformation.affine_params() {
            Some((a, b)) => format!("alpha = {:.6}, beta = {:.6}", a.value(), b.value()),
            None => "piecewise-linear deformation".to_string(),
        };
        write_with(path, |w| w.write_all(stem_plot(&spectrum, &title).as_bytes()))?;
    }
    println!(
        "{} peaks with |k| <= {} above {:e}; {} compared, max error {:.3e}",
        spectrum.entries.len(),
        run.k_max,
        run.floor,
        table.rows.len(),
        table.max_error
    );
    Ok(())
}

pub fn sigma(run: &Run, shift: &str) -> Result<(), CliError> {
    let x: AlgebraicNumber = shift
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse shift `{shift}`")))?;
    let window = run.scheme.window();
    if !x.is_lattice_point() || !is_member(&x, window)? {
        return Err(CliError::Config(format!("shift {x} is not a point of the set")));
    }
    let patch = translated_patch(&run.scheme, &x, run.radius)?;
    let iv = sigma_estimate(&patch, window)?;
    let (lo, hi) = iv.to_f64();
    print_json(&json!({
        "shift": x,
        "shift_star": x.star(),
        "shift_star_float": x.star().to_f64(),
        "radius": run.radius,
        "lo": iv.lo,
        "hi": iv.hi,
        "lo_float": lo,
        "hi_float": hi,
        "width": iv.width()?.to_f64(),
        "contains_shift_star": iv.contains(&x.star())?,
    }));
    Ok(())
}

pub fn extinctions(run: &Run) -> Result<(), CliError> {
    let alpha = match run.deformation.affine_params() {
        Some((Real::Exact(a), _)) => a,
        _ => {
            return Err(CliError::Config(
                "extinctions need an exact affine alpha, e.g. --alpha 1+sqrt2".into(),
            ))
        }
    };
    let report = extinction_report(&alpha, run.k_max)?;
    print_json(&json!({
        "alpha": report.alpha,
        "k_max": report.k_max,
        "extinctions": report.extinctions,
        "extinctions_float": report.extinctions.iter().map(|k| k.to_f64()).collect::<Vec<_>>(),
        "survivors": report.survivors,
        "span": report.span.to_string(),
        "span_basis": report.span,
    }));
    Ok(())
}

pub fn compare(run: &Run) -> Result<(), CliError> {
    let (_, _, comb) = deformed(run)?;
    let ks = first_dual_elements(run.compare_count)?;
    let table = compare_empirical_analytic(&comb, &run.deformation, &ks)?;
    create_out(run)?;
    let csv = run.out.join("comparison.csv");
    write_with(&csv, |w| table.write_csv(w))?;
    println!(
        "{} wave numbers at radius {}: max error {:.6e}, rms {:.6e}",
        table.rows.len(),
        run.radius,
        table.max_error,
        table.rms_error
    );
    Ok(())
}
