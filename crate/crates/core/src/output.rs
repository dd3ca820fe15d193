//! CSV tables and legacy ASCII VTK snapshots.
//!
//! Every file starts with a comment line naming the code version and the config hash.
//! Floats are written with Rust's shortest round-trip scientific format, so identical runs
//! give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::discretization::MixedSpace;
use crate::error::Result;

/// `# recirc <version> config=<hash>`
pub fn provenance_line(config_hash: &str) -> String {
    format!("# recirc {} config={}", crate::VERSION, config_hash)
}

pub fn format_float(v: f64) -> String {
    format!("{v:e}")
}

/// CSV with a provenance comment, one header row and numeric rows.
pub fn csv_string(config_hash: &str, columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = provenance_line(config_hash);
    s.push('\n');
    s.push_str(&columns.join(","));
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn write_csv(path: &Path, config_hash: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, csv_string(config_hash, columns, rows))?;
    Ok(())
}

/// Unstructured-grid VTK of the quadratic mesh with named velocity-space vector fields.
pub fn vtk_string(space: &MixedSpace, config_hash: &str, fields: &[(&str, &[f64])]) -> String {
    let nodes = space.nodes();
    let n_cells = space.mesh().cells().len();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", &provenance_line(config_hash)[2..]);
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", nodes.len());
    for p in nodes {
        let _ = writeln!(s, "{} {} 0", format_float(p[0]), format_float(p[1]));
    }
    let _ = writeln!(s, "CELLS {} {}", n_cells, 7 * n_cells);
    for c in 0..n_cells {
        let ids: Vec<String> = space.cell_nodes()[c].iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "6 {}", ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {n_cells}");
    for _ in 0..n_cells {
        // VTK_QUADRATIC_TRIANGLE: corners then edge midpoints 01, 12, 20
        let _ = writeln!(s, "22");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", nodes.len());
        for (name, values) in fields {
            let _ = writeln!(s, "VECTORS {name} double");
            for n in 0..nodes.len() {
                let _ = writeln!(s, "{} {} 0", format_float(values[2 * n]), format_float(values[2 * n + 1]));
            }
        }
    }
    s
}

pub fn write_vtk(path: &Path, space: &MixedSpace, config_hash: &str, fields: &[(&str, &[f64])]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, vtk_string(space, config_hash, fields))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_rect_mesh;

    #[test]
    fn csv_layout() {
        let s = csv_string("abc", &["t", "x"], &[vec![0.0, 1.5], vec![0.1, -2e-7]]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], format!("# recirc {} config=abc", crate::VERSION));
        assert_eq!(lines[1], "t,x");
        assert_eq!(lines[2], "0e0,1.5e0");
        assert_eq!(lines[3], "1e-1,-2e-7");
        let back: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, -2e-7);
    }

    #[test]
    fn vtk_counts() {
        let space = MixedSpace::new(build_rect_mesh(1.0, 1.0, 1, 1).unwrap()).unwrap();
        let v = space.interpolate(|p| [p[0], -p[1]]);
        let s = vtk_string(&space, "h", &[("velocity", &v)]);
        assert!(s.contains("POINTS 9 double"));
        assert!(s.contains("CELLS 2 14"));
        assert_eq!(s.lines().filter(|l| *l == "22").count(), 2);
        assert!(s.contains("VECTORS velocity double"));
    }
}
