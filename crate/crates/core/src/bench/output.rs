//! CSV and gnuplot emission.

use std::fs;
use std::path::Path;

use crate::bench::pipeline::{Stage2Estimate, TrialResult};
use crate::bench::runner::{RmseRow, RmseTable};
use crate::error::{Error, Result};

/// Column order of `rmse.csv`.
pub const COLUMNS: [&str; 25] = [
    "sweep_value",
    "trials",
    "failed",
    "danm_phi_deg",
    "danm_theta_deg",
    "danm_r_m",
    "phi_deg",
    "theta_deg",
    "r_m",
    "crb_phi_deg",
    "crb_theta_deg",
    "crb_r_m",
    "bearing_phi_deg",
    "bearing_theta_deg",
    "p_r_m",
    "peb_m",
    "bs_power",
    "opt_bearing_phi_deg",
    "opt_bearing_theta_deg",
    "opt_p_r_m",
    "opt_peb_m",
    "opt_bs_power",
    "p_u_m",
    "snr_db",
    "failure_rate",
];

fn row_values(r: &RmseRow) -> [f64; 25] {
    [
        r.sweep_value,
        r.trials as f64,
        r.failed as f64,
        r.danm_phi,
        r.danm_theta,
        r.danm_r,
        r.phi,
        r.theta,
        r.r,
        r.crb_phi,
        r.crb_theta,
        r.crb_r,
        r.bearing_phi,
        r.bearing_theta,
        r.p_r,
        r.peb,
        r.bs_power,
        r.opt_bearing_phi,
        r.opt_bearing_theta,
        r.opt_p_r,
        r.opt_peb,
        r.opt_bs_power,
        r.p_u,
        r.snr_db,
        r.failure_rate(),
    ]
}

fn row_from_values(v: &[f64]) -> RmseRow {
    RmseRow {
        sweep_value: v[0],
        trials: v[1] as usize,
        failed: v[2] as usize,
        danm_phi: v[3],
        danm_theta: v[4],
        danm_r: v[5],
        phi: v[6],
        theta: v[7],
        r: v[8],
        crb_phi: v[9],
        crb_theta: v[10],
        crb_r: v[11],
        bearing_phi: v[12],
        bearing_theta: v[13],
        p_r: v[14],
        peb: v[15],
        bs_power: v[16],
        opt_bearing_phi: v[17],
        opt_bearing_theta: v[18],
        opt_p_r: v[19],
        opt_peb: v[20],
        opt_bs_power: v[21],
        p_u: v[22],
        snr_db: v[23],
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { context: path.display().to_string(), source }
}

fn malformed(path: &Path, reason: impl std::fmt::Display) -> Error {
    Error::MalformedTable(format!("{}: {reason}", path.display()))
}

/// Shortest representation that parses back to the same bits; `NaN`, `inf` and `-inf` otherwise.
fn fmt(v: f64) -> String {
    format!("{v}")
}

fn csv_table(table: &RmseTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for row in &table.rows {
        w.write_record(row_values(row).iter().map(|v| fmt(*v)))?;
    }
    w.into_inner().map_err(|e| Error::MalformedTable(e.to_string()))
}

fn plot_script(csv: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set logscale y\n\
         set xlabel 'sweep value'\n\
         set terminal pngcairo size 1200,800\n\
         set output 'angles.png'\n\
         set ylabel 'RMSE (deg)'\n\
         plot '{csv}' using 1:4 with linespoints, '' using 1:5 with linespoints, \\\n\
         \x20    '' using 1:7 with linespoints, '' using 1:8 with linespoints, \\\n\
         \x20    '' using 1:10 with lines dashtype 2, '' using 1:11 with lines dashtype 2\n\
         set output 'range.png'\n\
         set ylabel 'RMSE (m)'\n\
         plot '{csv}' using 1:6 with linespoints, '' using 1:9 with linespoints, '' using 1:12 with lines dashtype 2\n\
         set output 'position.png'\n\
         plot '{csv}' using 1:15 with linespoints, '' using 1:16 with lines dashtype 2, \\\n\
         \x20    '' using 1:20 with linespoints, '' using 1:21 with lines dashtype 2, '' using 1:23 with linespoints\n\
         set output 'power.png'\n\
         set ylabel 'received power'\n\
         plot '{csv}' using 1:17 with linespoints, '' using 1:22 with linespoints\n"
    )
}

/// Writes `rmse.csv` and `plot.gp` into `dir`, creating it when needed.
pub fn emit_outputs(table: &RmseTable, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv = dir.join("rmse.csv");
    fs::write(&csv, csv_table(table)?).map_err(|e| io_err(&csv, e))?;
    let gp = dir.join("plot.gp");
    fs::write(&gp, plot_script("rmse.csv")).map_err(|e| io_err(&gp, e))?;
    Ok(())
}

/// Parses a file written by [`emit_outputs`].
pub fn read_table(path: &Path) -> Result<RmseTable> {
    let text = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut r = csv::Reader::from_reader(text.as_slice());
    if r.headers()?.iter().ne(COLUMNS.iter().copied()) {
        return Err(malformed(path, "unexpected column layout"));
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let values: Vec<f64> = record
            .iter()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| malformed(path, format!("row {}: {e}", i + 1)))?;
        rows.push(row_from_values(&values));
    }
    Ok(RmseTable { rows })
}

fn push_stage2(
    w: &mut csv::Writer<Vec<u8>>,
    t: &TrialResult,
    schedule: &str,
    est: &Stage2Estimate,
) -> Result<()> {
    for (i, b) in est.bearings.iter().enumerate() {
        let mut rec = vec![t.point.to_string(), t.trial.to_string(), i.to_string(), schedule.to_string()];
        rec.extend(
            [
                b.elevation.to_degrees(),
                b.azimuth.to_degrees(),
                est.position.x,
                est.position.y,
                est.position.z,
                est.bs_power,
                est.peb,
            ]
            .map(fmt),
        );
        w.write_record(&rec)?;
    }
    Ok(())
}

const TRIAL_COLUMNS: [&str; 17] = [
    "point",
    "trial",
    "sweep_value",
    "status",
    "source",
    "danm_phi_deg",
    "danm_theta_deg",
    "danm_r_m",
    "phi_deg",
    "theta_deg",
    "r_m",
    "u_x",
    "u_y",
    "u_z",
    "snr_db",
    "seconds",
    "error",
];

const BEARING_COLUMNS: [&str; 11] =
    ["point", "trial", "station", "schedule", "phi_deg", "theta_deg", "p_r_x", "p_r_y", "p_r_z", "bs_power", "peb_m"];

/// Writes `trials.csv` (one row per trial and source) and `bearings.csv` (one row per trial, BS and schedule).
pub fn write_trials(trials: &[TrialResult], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut targets = csv::Writer::from_writer(Vec::new());
    let mut bearings = csv::Writer::from_writer(Vec::new());
    targets.write_record(TRIAL_COLUMNS)?;
    bearings.write_record(BEARING_COLUMNS)?;
    for t in trials {
        let head = [t.point.to_string(), t.trial.to_string(), fmt(t.sweep_value)];
        match &t.outcome {
            Ok(e) => {
                for (k, (d, f)) in e.danm.iter().zip(&e.targets).enumerate() {
                    let u = e.absolute[k];
                    let mut rec = head.to_vec();
                    rec.push("ok".into());
                    rec.push(k.to_string());
                    rec.extend(
                        [
                            d.elevation.to_degrees(),
                            d.azimuth.to_degrees(),
                            d.range,
                            f.elevation.to_degrees(),
                            f.azimuth.to_degrees(),
                            f.range,
                            u.x,
                            u.y,
                            u.z,
                            e.snr_db,
                            t.seconds,
                        ]
                        .map(fmt),
                    );
                    rec.push(String::new());
                    targets.write_record(&rec)?;
                }
                if let Some(r) = &e.random {
                    push_stage2(&mut bearings, t, "random", r)?;
                }
                if let Some(o) = &e.optimized {
                    push_stage2(&mut bearings, t, "optimized", o)?;
                }
            }
            Err(msg) => {
                let mut rec = head.to_vec();
                rec.push("failed".into());
                rec.extend(std::iter::repeat_n(String::new(), 11));
                rec.push(fmt(t.seconds));
                rec.push(msg.clone());
                targets.write_record(&rec)?;
            }
        }
    }
    for (name, w) in [("trials.csv", targets), ("bearings.csv", bearings)] {
        let p = dir.join(name);
        let bytes = w.into_inner().map_err(|e| Error::MalformedTable(e.to_string()))?;
        fs::write(&p, bytes).map_err(|e| io_err(&p, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64) -> RmseRow {
        let mut values = [0.0; 24];
        for (i, x) in values.iter_mut().enumerate() {
            *x = v * (i as f64 + 1.0) / 7.0;
        }
        values[1] = 200.0;
        values[2] = 3.0;
        values[20] = f64::NAN;
        row_from_values(&values)
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(&RmseTable::default(), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("rmse.csv")).unwrap();
        assert_eq!(text, format!("{}\n", COLUMNS.join(",")));
        assert!(dir.path().join("plot.gp").exists());
        assert!(read_table(&dir.path().join("rmse.csv")).unwrap().rows.is_empty());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let table = RmseTable { rows: vec![row(0.1), row(std::f64::consts::PI), row(-1e-300)] };
        emit_outputs(&table, dir.path()).unwrap();
        let back = read_table(&dir.path().join("rmse.csv")).unwrap();
        assert_eq!(back.rows.len(), 3);
        for (a, b) in table.rows.iter().zip(&back.rows) {
            for (x, y) in row_values(a).iter().zip(row_values(b).iter()) {
                assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
    }

    #[test]
    fn column_order_is_stable() {
        assert_eq!(COLUMNS[0], "sweep_value");
        let text = String::from_utf8(csv_table(&RmseTable { rows: vec![row(1.0)] }).unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), COLUMNS.len());
    }

    #[test]
    fn rejects_foreign_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_table(&p), Err(Error::MalformedTable(_))));
    }
}
