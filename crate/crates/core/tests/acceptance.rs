//! Acceptance suite: one PASS/FAIL line per criterion at its stated tolerance.
//!
//! `cargo test -p hris-loc --test acceptance [-- 2 7]` runs all or the listed criteria.
//! Set `ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use hris_loc::array_model::{
    bs_steering, hris_ff_steering, nf_steering_vector, Axis, BsGeometry, HrisGeometry, NearFieldSource, NfLocation,
    PathModel, SphericalBearing,
};
use hris_loc::bench::{emit_outputs, run_scenario, RmseRow, ScenarioConfig};
use hris_loc::bounds::{bearing_jacobian, bs_partials, target_partials};
use hris_loc::hris_locator::triangulate;
use hris_loc::linalg::{spherical_unit, wrap_angle};
use hris_loc::phase_optimizer::{optimize_slot, QuadraticForm};
use hris_loc::sdp_engine::SolverSettings;
use hris_loc::signal_synthesis::{
    random_phase_schedule, reflected_signal, seeded_stream, synthesize_hris_rx, ArmSchedules, ChannelSpec, SignalKind,
    SourceSignalModel,
};
use hris_loc::virtual_coarray::assemble_h_tau;
use hris_loc::{Error, C64};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn config(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn run_at(mut cfg: ScenarioConfig, values: &[f64], trials: usize) -> Vec<RmseRow> {
    cfg.run.trials = trials;
    cfg.sweep.values = values.to_vec();
    run_scenario(&cfg, workers()).expect("scenario runs").table.rows
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn rel_err(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Exact path difference written out independently of the library.
fn path_difference(loc: &NfLocation, d: f64, m: i32, n: i32) -> f64 {
    let (phi, theta, r) = (loc.elevation, loc.azimuth, loc.range);
    let (gx, gz) = (phi.sin() * theta.cos(), phi.cos());
    let (x, z) = (m as f64 * d, n as f64 * d);
    (r * r + x * x + z * z - 2.0 * r * (x * gx + z * gz)).sqrt() - r
}

fn coarray_phase() -> Outcome {
    let start = Instant::now();
    let geom = HrisGeometry::quarter_wave(4, 4, 0.01).unwrap();
    let loc = NfLocation::from_degrees(63.0, 52.0, 0.15).unwrap();
    let src = [NearFieldSource::new(loc, 1.0).unwrap()];
    let ch = ChannelSpec::unit_gain(0.5, 0.0).unwrap();
    let block = synthesize_hris_rx(&geom, &src, &SourceSignalModel::new(SignalKind::Narrowband, 3), &ch, 64).unwrap();
    let k = 2.0 * std::f64::consts::PI / geom.wavelength;
    let (gx, gz) = (loc.cos_x(), loc.cos_z());
    let centre = geom.index(0, 0);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut largest_residual = 0.0f64;
    for tau in [0, 1, 5, 20] {
        let h = assemble_h_tau(&block, tau).unwrap();
        let reference = h[centre].arg();
        for (m, n) in geom.elements() {
            let u = geom.index(m, n);
            let observed = h[u].arg() - reference;
            let model = -2.0 * k * geom.spacing * (gx * m as f64 + gz * n as f64);
            // Phase left over after the linear terms cancel, from the exact spherical geometry.
            let residual = wrap_angle(
                k * (path_difference(&loc, geom.spacing, m, n) - path_difference(&loc, geom.spacing, -m, -n)) - model,
            )
            .abs();
            largest_residual = largest_residual.max(residual);
            worst_excess = worst_excess.max(wrap_angle(observed - model).abs() - residual);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_excess <= 1e-9 && secs < 1.0,
        format!(
            "phase deviation beyond the exact residual {worst_excess:.2e} rad (largest residual {largest_residual:.2e} rad), {secs:.3} s"
        ),
    )
}

fn tls_gain_five_targets() -> Outcome {
    let start = Instant::now();
    let rows = run_at(config("five_targets.toml"), &[], 200);
    let r = &rows[0];
    let ratio = r.phi / r.danm_phi;
    let range_gap = (r.r - r.danm_r).abs() / r.danm_r.min(r.r);
    let mins = start.elapsed().as_secs_f64() / 60.0;
    outcome(
        ratio <= 0.5 && range_gap <= 0.2 && mins <= 30.0 && r.failed == 0,
        format!(
            "elevation RMSE TLS {:.4e} deg / DANM {:.4e} deg = {ratio:.3} (need <= 0.5); range {:.4e} vs {:.4e} m, gap {:.1}% (need <= 20%); {} failed; {mins:.1} min",
            r.phi,
            r.danm_phi,
            r.r,
            r.danm_r,
            100.0 * range_gap,
            r.failed
        ),
    )
}

fn crb_proximity() -> Outcome {
    let rows = run_at(config("two_targets_snr.toml"), &[20.0], 200);
    let r = &rows[0];
    let (a, b) = (r.phi / r.crb_phi, r.theta / r.crb_theta);
    let ok = |x: f64| (0.8..=3.0).contains(&x);
    outcome(
        ok(a) && ok(b),
        format!(
            "RMSE/sqrt(CRB): elevation {:.4e}/{:.4e} = {a:.3}, azimuth {:.4e}/{:.4e} = {b:.3} (need [0.8, 3])",
            r.phi, r.crb_phi, r.theta, r.crb_theta
        ),
    )
}

fn bias_floor() -> Outcome {
    let rows = run_at(config("two_targets_snr.toml"), &[30.0, 40.0], 200);
    let (lo, hi) = (&rows[0], &rows[1]);
    let change = |a: f64, b: f64| (a - b).abs() / a;
    let drop = |a: f64, b: f64| (a - b) / a;
    let floor = [change(lo.danm_phi, hi.danm_phi), change(lo.danm_theta, hi.danm_theta)];
    let gain = [drop(lo.phi, hi.phi), drop(lo.theta, hi.theta)];
    outcome(
        floor.iter().all(|&c| c < 0.2) && gain.iter().all(|&g| g >= 0.4),
        format!(
            "DANM 30->40 dB change: elevation {:.1}% ({:.4e}->{:.4e}), azimuth {:.1}% ({:.4e}->{:.4e}) (need < 20%); \
             TLS decrease: elevation {:.1}% ({:.4e}->{:.4e}), azimuth {:.1}% ({:.4e}->{:.4e}) (need >= 40%)",
            100.0 * floor[0],
            lo.danm_phi,
            hi.danm_phi,
            100.0 * floor[1],
            lo.danm_theta,
            hi.danm_theta,
            100.0 * gain[0],
            lo.phi,
            hi.phi,
            100.0 * gain[1],
            lo.theta,
            hi.theta
        ),
    )
}

fn derivatives() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_stream(55, 0);
    let mut worst = [0.0f64; 3];
    for case in 0..50 {
        let m = rng.gen_range(2..=4);
        let geom = HrisGeometry::quarter_wave(m, rng.gen_range(2..=4), 0.01).unwrap();
        let delta = rng.gen_range(0.2..0.8);
        let loc = NfLocation::new(rng.gen_range(0.3..2.8), rng.gen_range(0.3..2.8), rng.gen_range(0.05..0.3)).unwrap();

        // Surface steering partials.
        let p = target_partials(&geom, &loc, delta);
        for (i, analytic) in p.iter().enumerate() {
            let h = if i == 2 { 1e-7 * loc.range } else { 1e-6 };
            let shift = |s: f64| {
                let mut l = loc;
                match i {
                    0 => l.elevation += s,
                    1 => l.azimuth += s,
                    _ => l.range += s,
                }
                nf_steering_vector(&geom, &l, PathModel::Exact) * C64::new(delta.sqrt(), 0.0)
            };
            let fd = (shift(h) - shift(-h)) / C64::new(2.0 * h, 0.0);
            let a = DMatrix::from_column_slice(analytic.len(), 1, analytic.as_slice());
            let f = DMatrix::from_column_slice(fd.len(), 1, fd.as_slice());
            worst[0] = worst[0].max(rel_err(&a, &f));
        }

        // BS observation partials with the surface-side vector fixed.
        let bs = BsGeometry::new(rng.gen_range(3..=6), rng.gen_range(3..=6), Vector3::new(3.0, 4.0, 2.0)).unwrap();
        let bearing = SphericalBearing::new(rng.gen_range(0.3..2.8), rng.gen_range(0.3..2.8)).unwrap();
        let ch = ChannelSpec::new(
            C64::new(rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5)),
            C64::new(rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5)),
            delta,
            0.1,
        )
        .unwrap();
        let slots = 6;
        let e = geom.element_count();
        let sched = ArmSchedules { x: random_phase_schedule(e, slots, case), z: random_phase_schedule(e, slots, case + 100) };
        let y = DMatrix::from_fn(e, slots, |_, _| {
            C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        });
        let (dx, dz) = bs_partials(&bs, &geom, &bearing, &ch, &sched, &y).unwrap();
        let br = hris_ff_steering(&geom, &bearing);
        let model = |b: SphericalBearing, axis: Axis| {
            let hm = bs_steering(&bs, &b, axis) * ch.gamma(axis) * br.adjoint();
            reflected_signal(&hm, sched.arm(axis), &y, ch.delta)
        };
        let h = 1e-6;
        let at = |dp: f64, dt: f64| SphericalBearing { elevation: bearing.elevation + dp, azimuth: bearing.azimuth + dt };
        let fx = (model(at(0.0, h), Axis::X) - model(at(0.0, -h), Axis::X)) / C64::new(2.0 * h, 0.0);
        let fz = (model(at(h, 0.0), Axis::Z) - model(at(-h, 0.0), Axis::Z)) / C64::new(2.0 * h, 0.0);
        worst[1] = worst[1].max(rel_err(&dx, &fx)).max(rel_err(&dz, &fz));

        // Bearing Jacobian with respect to the surface position.
        let p_r = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let j = bearing_jacobian(&bs.position, &p_r).unwrap();
        let mut fd = nalgebra::Matrix3x2::zeros();
        for c in 0..3 {
            let mut step = Vector3::zeros();
            step[c] = h;
            let a = SphericalBearing::between(&(p_r + step), &bs.position).unwrap();
            let b = SphericalBearing::between(&(p_r - step), &bs.position).unwrap();
            fd[(c, 0)] = (a.azimuth - b.azimuth) / (2.0 * h);
            fd[(c, 1)] = (a.elevation - b.elevation) / (2.0 * h);
        }
        worst[2] = worst[2].max((j - fd).norm() / fd.norm());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst.iter().all(|&w| w <= 1e-5) && secs < 10.0,
        format!(
            "50 configurations, worst relative error: target partials {:.2e}, BS partials {:.2e}, bearing Jacobian {:.2e}; {secs:.2} s",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn triangulation() -> Outcome {
    let mut rng = seeded_stream(66, 0);
    let mut worst = 0.0f64;
    let mut unexpected = 0;
    for _ in 0..1000 {
        let p_r = Vector3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let count = rng.gen_range(2..=4);
        let lines: Vec<_> = (0..count)
            .map(|_| {
                let dir = spherical_unit(rng.gen_range(0.2..2.9), rng.gen_range(0.2..2.9));
                let p_b = p_r + dir * rng.gen_range(5.0..50.0);
                (p_b, SphericalBearing::between(&p_r, &p_b).unwrap())
            })
            .collect();
        // Skip draws that happen to be nearly collinear.
        let d0 = lines[0].1.unit_vector();
        if lines.iter().skip(1).all(|l| d0.cross(&l.1.unit_vector()).norm() < 1e-2) {
            continue;
        }
        match triangulate(&lines) {
            Ok(est) => worst = worst.max((est.position - p_r).norm()),
            Err(_) => unexpected += 1,
        }
    }
    let mut collinear_rejected = 0;
    for i in 0..20 {
        let p_r = Vector3::new(i as f64 * 0.3, -1.0, 2.0);
        let dir = spherical_unit(0.4 + 0.1 * i as f64, 0.3 + 0.1 * i as f64);
        let lines: Vec<_> = [8.0, 20.0, 35.0]
            .iter()
            .map(|&s| {
                let p_b = p_r + dir * s;
                (p_b, SphericalBearing::between(&p_r, &p_b).unwrap())
            })
            .collect();
        if matches!(triangulate(&lines), Err(Error::NearCollinear { .. })) {
            collinear_rejected += 1;
        }
    }
    outcome(
        worst <= 1e-9 && unexpected == 0 && collinear_rejected == 20,
        format!("worst position error {worst:.2e} m, {unexpected} unexpected errors, {collinear_rejected}/20 collinear cases rejected"),
    )
}

fn phase_gain() -> Outcome {
    let values = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0];
    let rows = run_at(config("self_localization.toml"), &values, 100);
    let mut lines = Vec::new();
    let mut pass = true;
    for r in &rows {
        let ok = r.opt_bs_power > r.bs_power
            && r.opt_bearing_phi <= r.bearing_phi
            && r.opt_bearing_theta <= r.bearing_theta
            && r.opt_peb <= r.peb
            && r.failed == 0;
        pass &= ok;
        lines.push(format!(
            "{} dB: power {:.3e}/{:.3e}, bearing elevation {:.3e}/{:.3e} deg, azimuth {:.3e}/{:.3e} deg, PEB {:.3e}/{:.3e} m{}",
            r.sweep_value,
            r.opt_bs_power,
            r.bs_power,
            r.opt_bearing_phi,
            r.bearing_phi,
            r.opt_bearing_theta,
            r.bearing_theta,
            r.opt_peb,
            r.peb,
            if ok { "" } else { " <-" }
        ));
    }
    outcome(pass, format!("optimized/random per point:\n    {}", lines.join("\n    ")))
}

fn rounding_quality() -> Outcome {
    let mut rng = seeded_stream(88, 0);
    let settings = SolverSettings { max_iterations: 20_000, primal_tolerance: 1e-8, dual_tolerance: 1e-8, ..Default::default() };
    let psk: Vec<C64> = (0..8).map(|k| C64::from_polar(1.0, k as f64 * std::f64::consts::FRAC_PI_4)).collect();
    let mut worst = f64::INFINITY;
    for case in 0..20 {
        let g = DMatrix::from_fn(4, 4, |_, _| {
            C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        });
        let q = QuadraticForm::from_matrix(g.adjoint() * &g);
        let (best, _) = optimize_slot(&q, 200, case, &settings).unwrap();
        // The first phase is a free rotation; search the other three.
        let mut optimum = 0.0f64;
        for code in 0..512 {
            let w = DVector::from_vec(vec![psk[0], psk[code % 8], psk[(code / 8) % 8], psk[code / 64]]);
            optimum = optimum.max(q.value(&w));
        }
        worst = worst.min(best.power / optimum);
    }
    outcome(worst >= 0.95, format!("worst achieved/exhaustive 8-PSK ratio over 20 cases {worst:.4} (need >= 0.95)"))
}

fn snapshot_scaling() -> Outcome {
    let rows = run_at(config("two_targets_snapshots.toml"), &[100.0, 400.0], 200);
    let (a, b) = (&rows[0], &rows[1]);
    let rp = a.phi / b.phi;
    let rt = a.theta / b.theta;
    let ok = |x: f64| (1.6..=2.5).contains(&x);
    outcome(
        ok(rp) && ok(rt),
        format!(
            "RMSE(100)/RMSE(400) at 5 dB: elevation {:.4e}/{:.4e} = {rp:.3}, azimuth {:.4e}/{:.4e} = {rt:.3} (need [1.6, 2.5])",
            a.phi, b.phi, a.theta, b.theta
        ),
    )
}

fn determinism() -> Outcome {
    let mut cfg = config("self_localization.toml");
    cfg.run.trials = 6;
    cfg.sweep.values = vec![0.0, 20.0];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut bytes = Vec::new();
    for (i, d) in dirs.iter().enumerate() {
        // Different pool sizes must not change the result.
        let run = run_scenario(&cfg, 1 + i).unwrap();
        emit_outputs(&run.table, d.path()).unwrap();
        bytes.push(std::fs::read(d.path().join("rmse.csv")).unwrap());
    }
    outcome(bytes[0] == bytes[1], format!("two runs, {} bytes each, identical: {}", bytes[0].len(), bytes[0] == bytes[1]))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("co-array phase equivalence", coarray_phase),
        ("TLS gain on five targets", tls_gain_five_targets),
        ("CRB proximity", crb_proximity),
        ("bias floor", bias_floor),
        ("closed-form derivatives", derivatives),
        ("triangulation exactness", triangulation),
        ("phase optimization gain", phase_gain),
        ("SDR rounding quality", rounding_quality),
        ("snapshot scaling", snapshot_scaling),
        ("determinism", determinism),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !selected.is_empty() && !selected.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        ran += 1;
        failed += usize::from(!o.pass);
        println!(
            "{} criterion {number} ({name}) [{:.1} s]: {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
