//! CSV and JSON writers.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use spinseq_core::propagate::Trajectory;
use spinseq_core::scan::Heatmap;

pub const TRAJECTORY_HEADER: [&str; 3] = ["time", "sz", "iz"];
pub const HEATMAP_HEADER: [&str; 3] = ["delta_over_omega", "rabi_error_over_omega", "polarization"];

/// `prefix` + `suffix`, creating the parent directory if needed.
pub fn output_path(prefix: &str, suffix: &str) -> io::Result<PathBuf> {
    let path = PathBuf::from(format!("{prefix}{suffix}"));
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(path)
}

fn csv_error(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

pub fn write_trajectory_csv<W: Write>(out: W, t: &Trajectory) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER).map_err(csv_error)?;
    for ((time, sz), iz) in t.times.iter().zip(&t.sz).zip(&t.iz) {
        w.serialize((time, sz, iz)).map_err(csv_error)?;
    }
    w.flush()
}

/// Long format, one row per grid point in row-major order.
pub fn write_heatmap_csv<W: Write>(out: W, h: &Heatmap) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEATMAP_HEADER).map_err(csv_error)?;
    for (idx, v) in h.values.iter().enumerate() {
        let (d, r) = h.grid.point(idx);
        w.serialize((d, r, v)).map_err(csv_error)?;
    }
    w.flush()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()
}

pub fn write_csv_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> io::Result<()>) -> io::Result<()> {
    f(BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use spinseq_core::scan::{scan, ScanGrid};
    use spinseq_core::sequence::{Scheme, SchemeSpec};
    use spinseq_core::DnpParams;

    #[test]
    fn heatmap_rows_are_row_major() {
        let g = ScanGrid::uniform((-0.1, 0.1), (-0.05, 0.05), 3, 2).unwrap();
        let h = scan(&SchemeSpec::new(Scheme::SlicNovel, 100.0), &DnpParams::new(24.0, 1.0), &g).unwrap();
        let mut buf = Vec::new();
        write_heatmap_csv(&mut buf, &h).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "delta_over_omega,rabi_error_over_omega,polarization");
        assert_eq!(lines.len(), 7);
        assert!(lines[1].starts_with("-0.1,-0.05,"));
        assert!(lines[2].starts_with("0.0,-0.05,"));
        assert!(lines[4].starts_with("-0.1,0.05,"));
    }
}
