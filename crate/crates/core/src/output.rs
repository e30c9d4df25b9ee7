//! File formats: sweep CSV, PPM heatmaps, and atomic file writes.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::phases::{PhasePoint, SweepGrid};

/// Scientific notation with 17 significant digits, enough to round-trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `key=value` pairs written as leading comment lines or header comments.
pub type Metadata = Vec<(String, String)>;

fn write_comment_lines<W: Write>(out: &mut W, meta: &Metadata) -> Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

/// Columns `T, a, label, sublabel, pressure, converged, M_1..M_P, max_abs_M`,
/// preceded by `# key=value` metadata lines.
pub fn write_sweep_csv<W: Write>(
    mut out: W,
    p: usize,
    points: &[PhasePoint],
    meta: &Metadata,
) -> Result<()> {
    write_comment_lines(&mut out, meta)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["T", "a", "label", "sublabel", "pressure", "converged"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=p).map(|mu| format!("M_{mu}")));
    header.push("max_abs_M".into());
    w.write_record(&header)?;
    for pt in points {
        let mut rec = vec![
            fmt_f64(pt.t),
            fmt_f64(pt.a),
            pt.label.to_string(),
            pt.sublabel.map(|s| s.to_string()).unwrap_or_default(),
            fmt_f64(pt.best.pressure),
            pt.best.converged.to_string(),
        ];
        rec.extend(pt.best.m.as_slice().iter().map(|x| fmt_f64(*x)));
        rec.push(fmt_f64(pt.max_abs_m()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Gray level of one heatmap cell.
pub fn gray_level(max_abs_m: f64) -> u8 {
    let v = if max_abs_m.is_nan() { 0.0 } else { max_abs_m.clamp(0.0, 1.0) };
    (255.0 * v).round() as u8
}

/// Binary PPM (P6), one pixel per cell: rows follow `T` increasing
/// downward, columns follow `a` increasing rightward, and every channel
/// equals `round(255 · clamp(max|M|, 0, 1))`.
pub fn write_heatmap_ppm<W: Write>(
    mut out: W,
    grid: &SweepGrid,
    points: &[PhasePoint],
    meta: &Metadata,
) -> Result<()> {
    let (rows, cols) = (grid.t.steps, grid.a.steps);
    assert_eq!(points.len(), rows * cols, "one point per grid cell");
    writeln!(out, "P6")?;
    writeln!(
        out,
        "# rows: T from {} (top) to {} (bottom); columns: a from {} (left) to {} (right)",
        grid.t.min, grid.t.max, grid.a.min, grid.a.max
    )?;
    writeln!(out, "# gray = round(255 * clamp(max_mu |M_mu|, 0, 1))")?;
    write_comment_lines(&mut out, meta)?;
    writeln!(out, "{cols} {rows}")?;
    writeln!(out, "255")?;
    let mut pixels = Vec::with_capacity(3 * rows * cols);
    for pt in points {
        let g = gray_level(pt.max_abs_m());
        pixels.extend_from_slice(&[g, g, g]);
    }
    out.write_all(&pixels)?;
    Ok(())
}

/// Writes through a temporary file in the target directory, then renames.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{FixedPointResult, Magnetization};
    use crate::phases::{Axis, PhaseLabel, RetrievalKind};

    fn point(t: f64, a: f64, m: Vec<f64>) -> PhasePoint {
        PhasePoint {
            t,
            a,
            best: FixedPointResult {
                m: Magnetization::new(m),
                pressure: 1.5,
                iterations: 3,
                converged: true,
                residual: 0.0,
                gradient_norm: None,
                denominator_violations: 0,
                min_denominator: None,
                error: None,
            },
            best_inits: vec!["pure".into()],
            label: PhaseLabel::Retrieval,
            sublabel: Some(RetrievalKind::R1),
            all_solutions: vec![],
            failures: vec![],
        }
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn sweep_csv_layout() {
        let pts = vec![point(0.5, 0.0, vec![0.9, -0.1])];
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, 2, &pts, &vec![("P".into(), "2".into())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# P=2");
        assert_eq!(lines[1], "T,a,label,sublabel,pressure,converged,M_1,M_2,max_abs_M");
        assert!(lines[2].contains(",Retrieval,R1,"));
        assert!(lines[2].ends_with(&fmt_f64(0.9)));
    }

    #[test]
    fn heatmap_pixels() {
        let grid = SweepGrid::new(1, Axis::new(0.1, 0.2, 2).unwrap(), Axis::new(0.0, 1.0, 2).unwrap()).unwrap();
        let pts = vec![
            point(0.1, 0.0, vec![1.0]),
            point(0.1, 1.0, vec![0.5]),
            point(0.2, 0.0, vec![0.0]),
            point(0.2, 1.0, vec![-2.0]),
        ];
        let mut buf = Vec::new();
        write_heatmap_ppm(&mut buf, &grid, &pts, &vec![]).unwrap();
        let body = &buf[buf.len() - 12..];
        assert_eq!(body, &[255, 255, 255, 128, 128, 128, 0, 0, 0, 255, 255, 255]);
        let header = String::from_utf8_lossy(&buf[..buf.len() - 12]);
        assert!(header.starts_with("P6\n"));
        assert!(header.ends_with("2 2\n255\n"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write(&path, b"one").unwrap();
        atomic_write(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
