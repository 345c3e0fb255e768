//! CSV load-step histories and legacy VTK structured-points snapshots.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{file_err, IoError};
use crate::driver::{IncrementRecord, Simulation, SimulationHistory};
use crate::grid::GridSpec;
use crate::materials::ModelKind;
use crate::tensor::{SymTensor, COMPONENT_NAMES};

pub fn csv_header() -> String {
    let mut cols = vec!["increment".to_string(), "time".to_string()];
    cols.extend(COMPONENT_NAMES.iter().map(|c| format!("E{c}")));
    cols.extend(COMPONENT_NAMES.iter().map(|c| format!("S{c}")));
    cols.extend(
        ["staggered", "newton", "cg", "helmholtz", "max_damage", "wall_time"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols.join(",")
}

/// Floats use the shortest representation that parses back to the same value.
pub fn csv_row(r: &IncrementRecord) -> String {
    let mut s = format!("{},{}", r.increment, r.time);
    for v in r.strain.iter().chain(&r.stress) {
        write!(s, ",{v}").unwrap();
    }
    write!(
        s,
        ",{},{},{},{},{},{}",
        r.staggered_iterations, r.newton_iterations, r.cg_iterations, r.helmholtz_iterations, r.max_damage, r.wall_time
    )
    .unwrap();
    s
}

pub fn history_csv(history: &SimulationHistory) -> String {
    let mut out = csv_header();
    out.push('\n');
    for r in history.records() {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

pub fn write_history_csv(history: &SimulationHistory, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, history_csv(history)).map_err(file_err(path))
}

pub fn parse_history_csv(text: &str) -> Result<Vec<IncrementRecord>, IoError> {
    let mut lines = text.lines();
    if lines.next() != Some(csv_header().as_str()) {
        return Err(IoError::Format("unexpected CSV header".into()));
    }
    let bad = |l: &str| IoError::Format(format!("bad CSV row '{l}'"));
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 20 {
                return Err(bad(line));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad(line));
            let int = |i: usize| f[i].parse::<usize>().map_err(|_| bad(line));
            let mut strain = [0.0; 6];
            let mut stress = [0.0; 6];
            for c in 0..6 {
                strain[c] = num(2 + c)?;
                stress[c] = num(8 + c)?;
            }
            Ok(IncrementRecord {
                increment: int(0)?,
                time: num(1)?,
                strain,
                stress,
                staggered_iterations: int(14)?,
                newton_iterations: int(15)?,
                cg_iterations: int(16)?,
                helmholtz_iterations: int(17)?,
                max_damage: num(18)?,
                wall_time: num(19)?,
            })
        })
        .collect()
}

/// Appends to a history file one increment at a time.
pub struct CsvStream {
    file: std::io::BufWriter<std::fs::File>,
}

impl CsvStream {
    pub fn create(path: &Path) -> Result<Self, IoError> {
        let f = std::fs::File::create(path).map_err(file_err(path))?;
        let mut file = std::io::BufWriter::new(f);
        writeln!(file, "{}", csv_header())?;
        Ok(CsvStream { file })
    }

    pub fn append(&mut self, r: &IncrementRecord) -> Result<(), IoError> {
        writeln!(self.file, "{}", csv_row(r))?;
        self.file.flush()?;
        Ok(())
    }
}

/// Named voxel fields written at voxel centers.
#[derive(Clone, Debug, Default)]
pub struct Snapshot {
    pub scalars: Vec<(String, Vec<f64>)>,
    pub tensors: Vec<(String, Vec<SymTensor>)>,
}

impl Snapshot {
    pub fn scalar(mut self, name: &str, values: Vec<f64>) -> Self {
        self.scalars.push((name.to_string(), values));
        self
    }

    pub fn tensor(mut self, name: &str, values: Vec<SymTensor>) -> Self {
        self.tensors.push((name.to_string(), values));
        self
    }

    /// Phase, damage, local and regularized variables, stress and strain.
    pub fn of(sim: &Simulation) -> Self {
        let kind = sim.model_kind();
        let mut s = Snapshot::default().scalar("phase", sim.phases().iter().map(|&p| p as f64).collect());
        match kind {
            ModelKind::Gurson => s = s.scalar("f_star", sim.damage_field()),
            ModelKind::Lemaitre => s = s.scalar("D", sim.damage_field()),
            ModelKind::Elastic => {}
        }
        for (j, name) in kind.nonlocal_names().iter().enumerate() {
            s = s.scalar(name.trim_end_matches("_bar"), sim.local_field(j));
            s = s.scalar(name, sim.nonlocal()[j].clone());
        }
        let stress = sim.stress_field();
        s.scalar("von_mises", stress.iter().map(|t| t.von_mises()).collect())
            .tensor("stress", stress)
            .tensor("strain", sim.strain().to_vec())
    }

    pub fn to_vtk(&self, grid: &GridSpec, title: &str) -> Result<String, IoError> {
        let n = grid.len();
        let [n1, n2, n3] = grid.cells();
        let h = grid.spacing();
        let mut out = String::new();
        writeln!(out, "# vtk DataFile Version 3.0").unwrap();
        writeln!(out, "{}", title.lines().next().unwrap_or("")).unwrap();
        writeln!(out, "ASCII\nDATASET STRUCTURED_POINTS").unwrap();
        writeln!(out, "DIMENSIONS {n1} {n2} {n3}").unwrap();
        writeln!(out, "ORIGIN {:?} {:?} {:?}", 0.5 * h[0], 0.5 * h[1], 0.5 * h[2]).unwrap();
        writeln!(out, "SPACING {:?} {:?} {:?}", h[0], h[1], h[2]).unwrap();
        writeln!(out, "POINT_DATA {n}").unwrap();
        for (name, v) in &self.scalars {
            if v.len() != n {
                return Err(IoError::Format(format!("field {name} has {} values, expected {n}", v.len())));
            }
            writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
            for x in v {
                writeln!(out, "{x:e}").unwrap();
            }
        }
        for (name, v) in &self.tensors {
            if v.len() != n {
                return Err(IoError::Format(format!("field {name} has {} values, expected {n}", v.len())));
            }
            writeln!(out, "TENSORS {name} double").unwrap();
            for t in v {
                let m = t.to_matrix();
                for row in m {
                    writeln!(out, "{:e} {:e} {:e}", row[0], row[1], row[2]).unwrap();
                }
            }
        }
        Ok(out)
    }

    pub fn write_vtk(&self, grid: &GridSpec, title: &str, path: &Path) -> Result<(), IoError> {
        let text = self.to_vtk(grid, title)?;
        std::fs::write(path, text).map_err(file_err(path))
    }
}

/// Parses one scalar array back from a snapshot written by [`Snapshot::to_vtk`].
pub fn read_vtk_scalar(text: &str, name: &str) -> Option<Vec<f64>> {
    let n: usize = text.lines().find_map(|l| l.strip_prefix("POINT_DATA "))?.trim().parse().ok()?;
    let header = format!("SCALARS {name} double 1");
    let mut lines = text.lines().skip_while(|l| *l != header).skip(2);
    (0..n).map(|_| lines.next()?.trim().parse().ok()).collect()
}
