//! CSV emission. Floats use Rust's shortest round-trip formatting, so
//! values read back are bit-identical to what was written.

use std::fs::File;
use std::path::Path;

use crate::dynamics::Trace;
use crate::error::{Error, Result};
use crate::metrics::FrequencyMetrics;

pub const METRIC_NAMES: [&str; 11] = [
    "f0_hz",
    "nadir_hz",
    "nadir_time_s",
    "settling_hz",
    "rocof_hz_per_s",
    "ufls_time_s",
    "fr_mw_per_0p1hz",
    "frn_mw_per_0p1hz",
    "fr_mw_per_hz",
    "frn_mw_per_hz",
    "crosses_ufls",
];

/// Value of a named metric; `None` means absent.
pub fn metric_value(m: &FrequencyMetrics, name: &str) -> Result<Option<f64>> {
    Ok(match name {
        "f0_hz" => Some(m.f0_hz),
        "nadir_hz" => Some(m.nadir_hz),
        "nadir_time_s" => Some(m.nadir_time_s),
        "settling_hz" => Some(m.settling_hz),
        "rocof_hz_per_s" => Some(m.rocof_hz_per_s),
        "ufls_time_s" => m.ufls_time_s,
        "fr_mw_per_0p1hz" => m.fr_mw_per_0p1hz,
        "frn_mw_per_0p1hz" => m.frn_mw_per_0p1hz,
        "fr_mw_per_hz" => m.fr_mw_per_hz(),
        "frn_mw_per_hz" => m.frn_mw_per_hz(),
        "crosses_ufls" => Some(if m.ufls_time_s.is_some() { 1.0 } else { 0.0 }),
        other => return Err(Error::Input(format!("unknown metric `{other}`"))),
    })
}

pub fn format_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

/// Writes rows of string cells with a header; shared by every table.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = writer(path)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn trace_header(trace: &Trace) -> Vec<String> {
    let mut h = vec!["t_s".to_string(), "f_coi_hz".to_string()];
    h.extend(trace.group_names.iter().map(|n| format!("f_{n}_hz")));
    h.extend(trace.group_names.iter().map(|n| format!("pm_{n}_mw")));
    h.extend(trace.storage_names.iter().map(|n| format!("storage_{n}_mw")));
    if trace.frl_relief_mw.is_some() {
        h.push("frl_relief_mw".into());
    }
    h
}

pub fn write_trace_csv(trace: &Trace, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..trace.len())
        .map(|k| {
            let mut row = vec![trace.times[k].to_string(), trace.f_coi[k].to_string()];
            row.extend(trace.group_freqs.iter().map(|s| s[k].to_string()));
            row.extend(trace.governor_mw.iter().map(|s| s[k].to_string()));
            row.extend(trace.storage_mw.iter().map(|s| s[k].to_string()));
            if let Some(relief) = &trace.frl_relief_mw {
                row.push(relief[k].to_string());
            }
            row
        })
        .collect();
    write_table(path, &trace_header(trace), &rows)
}

pub fn write_events_csv(trace: &Trace, path: &Path) -> Result<()> {
    let header = ["t_s", "kind", "detail"].map(String::from);
    let rows: Vec<Vec<String>> = trace
        .events
        .iter()
        .map(|e| vec![e.time_s.to_string(), e.kind.as_str().to_string(), e.detail.clone()])
        .collect();
    write_table(path, &header, &rows)
}

/// One labelled metrics record per row, all metric columns.
pub fn write_metrics_csv(rows: &[(String, FrequencyMetrics)], path: &Path) -> Result<()> {
    let mut header = vec!["label".to_string()];
    header.extend(METRIC_NAMES.iter().map(|s| s.to_string()));
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(label, m)| {
            let mut r = vec![label.clone()];
            r.extend(METRIC_NAMES.iter().map(|n| format_cell(metric_value(m, n).unwrap())));
            r
        })
        .collect();
    write_table(path, &header, &rows)
}

/// Read a trace CSV back as `(header, columns)`.
pub fn read_csv_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        for (i, cell) in rec.iter().enumerate() {
            let v = cell.parse::<f64>().map_err(|_| {
                Error::Input(format!(
                    "{}: row {}, column `{}`: not a number: {cell:?}",
                    path.display(),
                    line + 2,
                    header[i]
                ))
            })?;
            cols[i].push(v);
        }
    }
    Ok((header, cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Event, EventKind};

    fn flat(n: usize) -> Trace {
        Trace {
            times: (0..n).map(|k| k as f64 * 0.005).collect(),
            f_coi: vec![60.0; n],
            group_names: vec!["a".into()],
            group_freqs: vec![vec![60.0; n]],
            governor_mw: vec![vec![0.0; n]],
            ..Trace::default()
        }
    }

    #[test]
    fn three_sample_trace_has_four_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        write_trace_csv(&flat(3), &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().next().unwrap(), "t_s,f_coi_hz,f_a_hz,pm_a_mw");
    }

    #[test]
    fn frl_trip_row_in_events() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("events.csv");
        let mut t = flat(3);
        t.events.push(Event {
            time_s: 2.27,
            kind: EventKind::FrlTrip,
            detail: "relief 2500 MW".into(),
        });
        write_events_csv(&t, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let trips: Vec<_> = text.lines().filter(|l| l.contains(",frl_trip,")).collect();
        assert_eq!(trips, ["2.27,frl_trip,relief 2500 MW"]);
    }

    #[test]
    fn floats_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        let mut t = flat(4);
        t.f_coi = vec![59.123456789012345, 0.1 + 0.2, 60.0 - 1e-13, 59.7];
        write_trace_csv(&t, &p).unwrap();
        let (h, cols) = read_csv_columns(&p).unwrap();
        assert_eq!(h[1], "f_coi_hz");
        assert_eq!(cols[1], t.f_coi);
        assert_eq!(cols[0], t.times);
    }

    #[test]
    fn absent_metrics_are_empty_cells() {
        assert_eq!(format_cell(None), "");
        assert_eq!(format_cell(Some(0.5)), "0.5");
    }

    #[test]
    fn malformed_cell_names_column_and_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "t_s,f_coi_hz\n0,60\n0.005,oops\n").unwrap();
        let err = read_csv_columns(&p).unwrap_err().to_string();
        assert!(err.contains("f_coi_hz") && err.contains("row 3"), "{err}");
    }
}
