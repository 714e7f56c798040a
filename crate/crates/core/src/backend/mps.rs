//! Fixed-format MPS export and the external MILP solver adapter.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Serialize;
use thiserror::Error;

use super::milp::MilpInstance;
use super::{SolveResult, Status};

/// Validation tolerance for solutions read back from an external solver.
pub const EXTERNAL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpsExport {
    #[serde(skip)]
    pub text: String,
    /// `(mps name, original name)` per column, in column order.
    pub columns: Vec<(String, String)>,
    /// `(mps name, original name)` per written row.
    pub rows: Vec<(String, String)>,
}

impl MpsExport {
    pub fn mapping_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mapping serializes")
    }
}

/// Shortest decimal form of `v` that fits the 12-character numeric field.
pub fn format_number(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    for digits in (0..=12).rev() {
        let s = format!("{v:.digits$e}");
        if s.len() <= 12 {
            return s;
        }
    }
    format!("{v:e}")
}

fn field_line(out: &mut String, f1: &str, f2: &str, f3: &str, f4: &str, f5: &str, f6: &str) {
    let mut line = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}");
    if !f5.is_empty() {
        let _ = write!(line, "   {f5:<8}  {f6:>12}");
    }
    out.push_str(line.trim_end());
    out.push('\n');
}

/// Writes `inst` as fixed-format MPS with mangled names `C0000001`,
/// `R0000001`. Rows free on both sides are left out.
pub fn export_mps(inst: &MilpInstance, name: &str) -> MpsExport {
    let n = inst.ncols();
    let columns: Vec<(String, String)> = (0..n)
        .map(|j| {
            let original = inst
                .col_names
                .get(j)
                .cloned()
                .unwrap_or_else(|| format!("col{j}"));
            (format!("C{:07}", j + 1), original)
        })
        .collect();
    let mut rows = Vec::new();
    let mut row_index = Vec::new();
    for (i, r) in inst.lp.rows.iter().enumerate() {
        if r.lo.is_finite() || r.hi.is_finite() {
            let original = inst
                .row_names
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("row{i}"));
            rows.push((format!("R{:07}", rows.len() + 1), original));
            row_index.push(i);
        }
    }

    let mut out = String::new();
    let title: String = name
        .chars()
        .filter(|c| !c.is_whitespace())
        .take(8)
        .collect();
    let _ = writeln!(out, "NAME          {}", if title.is_empty() { "MILP" } else { &title });
    out.push_str("ROWS\n N  OBJ\n");
    for (k, &i) in row_index.iter().enumerate() {
        let r = &inst.lp.rows[i];
        let kind = if r.lo == r.hi {
            "E"
        } else if r.lo.is_finite() {
            "G"
        } else {
            "L"
        };
        let _ = writeln!(out, " {kind}  {}", rows[k].0);
    }

    // Column-major coefficient lists.
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (k, &i) in row_index.iter().enumerate() {
        for &(j, a) in &inst.lp.rows[i].coeffs {
            if a != 0.0 {
                by_col[j].push((k, a));
            }
        }
    }
    for list in by_col.iter_mut() {
        list.sort_by_key(|e| e.0);
        // Merge duplicate entries so each (row, column) appears once.
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(list.len());
        for &(k, a) in list.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += a,
                _ => merged.push((k, a)),
            }
        }
        *list = merged;
    }

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for j in 0..n {
        let int = inst.integral.get(j).copied().unwrap_or(false);
        if int != in_int {
            let kind = if int { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(
                out,
                "    M{marker:07}  'MARKER'                 {kind}"
            );
            marker += 1;
            in_int = int;
        }
        let mut entries: Vec<(String, f64)> = Vec::new();
        let c = inst.lp.objective.get(j).copied().unwrap_or(0.0);
        if c != 0.0 {
            entries.push(("OBJ".into(), c));
        }
        for &(k, a) in &by_col[j] {
            entries.push((rows[k].0.clone(), a));
        }
        if entries.is_empty() {
            // Keep the column declared.
            entries.push(("OBJ".into(), 0.0));
        }
        for pair in entries.chunks(2) {
            let (r1, v1) = &pair[0];
            let v1 = format_number(*v1);
            if let Some((r2, v2)) = pair.get(1) {
                field_line(&mut out, "", &columns[j].0, r1, &v1, r2, &format_number(*v2));
            } else {
                field_line(&mut out, "", &columns[j].0, r1, &v1, "", "");
            }
        }
    }
    if in_int {
        let _ = writeln!(out, "    M{marker:07}  'MARKER'                 'INTEND'");
    }

    out.push_str("RHS\n");
    if inst.obj_constant != 0.0 {
        field_line(&mut out, "", "RHS", "OBJ", &format_number(-inst.obj_constant), "", "");
    }
    let mut ranges = Vec::new();
    for (k, &i) in row_index.iter().enumerate() {
        let r = &inst.lp.rows[i];
        let rhs = if r.lo.is_finite() { r.lo } else { r.hi };
        if rhs != 0.0 {
            field_line(&mut out, "", "RHS", &rows[k].0, &format_number(rhs), "", "");
        }
        if r.lo.is_finite() && r.hi.is_finite() && r.lo != r.hi {
            ranges.push((k, r.hi - r.lo));
        }
    }
    if !ranges.is_empty() {
        out.push_str("RANGES\n");
        for (k, v) in ranges {
            field_line(&mut out, "", "RNG", &rows[k].0, &format_number(v), "", "");
        }
    }

    out.push_str("BOUNDS\n");
    for j in 0..n {
        let (l, u) = (inst.lp.col_lo[j], inst.lp.col_hi[j]);
        let col = &columns[j].0;
        let int = inst.integral.get(j).copied().unwrap_or(false);
        if l == u {
            field_line(&mut out, "FX", "BND", col, &format_number(l), "", "");
            continue;
        }
        match (l.is_finite(), u.is_finite()) {
            (false, false) => field_line(&mut out, "FR", "BND", col, "", "", ""),
            (false, true) => {
                field_line(&mut out, "MI", "BND", col, "", "", "");
                field_line(&mut out, "UP", "BND", col, &format_number(u), "", "");
            }
            (true, fin_u) => {
                if l != 0.0 || int {
                    field_line(&mut out, "LO", "BND", col, &format_number(l), "", "");
                }
                if fin_u {
                    field_line(&mut out, "UP", "BND", col, &format_number(u), "", "");
                } else if int {
                    field_line(&mut out, "PL", "BND", col, "", "", "");
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    MpsExport {
        text: out,
        columns,
        rows,
    }
}

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("no external solver command configured")]
    NoCommand,
    #[error("i/o error in {dir}: {source}")]
    Io {
        dir: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("external solver exited with {status}; artifacts kept in {dir}")]
    SolverFailed { status: String, dir: PathBuf },
    #[error("could not parse solution file {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("external solution violates the model by {violation:.3e}; artifacts kept in {dir}")]
    Disagreement { violation: f64, dir: PathBuf },
}

/// Reads a solution file: any line holding a known column name followed by
/// a number assigns that column; a line mentioning "infeasible" marks the
/// result infeasible. Missing columns default to zero.
pub fn parse_solution(text: &str, export: &MpsExport) -> Result<(Status, Vec<f64>), String> {
    let index: std::collections::HashMap<&str, usize> = export
        .columns
        .iter()
        .enumerate()
        .map(|(j, (m, _))| (m.as_str(), j))
        .collect();
    let mut x = vec![0.0; export.columns.len()];
    let mut seen = 0;
    for line in text.lines() {
        let lower = line.to_ascii_lowercase();
        if lower.contains("infeasible") && !lower.contains("not infeasible") {
            return Ok((Status::Infeasible, x));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        for w in toks.windows(2) {
            if let Some(&j) = index.get(w[0]) {
                if let Ok(v) = w[1].parse::<f64>() {
                    x[j] = v;
                    seen += 1;
                    break;
                }
            }
        }
    }
    if seen == 0 && !export.columns.is_empty() {
        return Err("no column values found".into());
    }
    Ok((Status::Optimal, x))
}

/// Runs `template` (with `{input}` and `{output}` substituted) through the
/// shell, reads the solution and checks it against `inst`.
pub fn external_solve(
    inst: &MilpInstance,
    template: &str,
    workdir: Option<&Path>,
) -> Result<SolveResult, ExternalError> {
    if template.trim().is_empty() {
        return Err(ExternalError::NoCommand);
    }
    let (dir, keep_guard) = match workdir {
        Some(d) => (d.to_path_buf(), None),
        None => {
            let t = tempfile::Builder::new()
                .prefix("tree-gopt-ext")
                .tempdir()
                .map_err(|source| ExternalError::Io {
                    dir: std::env::temp_dir(),
                    source,
                })?;
            (t.path().to_path_buf(), Some(t))
        }
    };
    let io = |source| ExternalError::Io {
        dir: dir.clone(),
        source,
    };
    std::fs::create_dir_all(&dir).map_err(io)?;
    let export = export_mps(inst, "model");
    let input = dir.join("model.mps");
    let output = dir.join("model.sol");
    std::fs::write(&input, &export.text).map_err(io)?;
    std::fs::write(dir.join("model.map.json"), export.mapping_json()).map_err(io)?;
    let cmd = template
        .replace("{input}", &input.to_string_lossy())
        .replace("{output}", &output.to_string_lossy());
    let keep = |guard: Option<tempfile::TempDir>| {
        if let Some(g) = guard {
            let _ = g.keep();
        }
    };
    let status = Command::new("sh").arg("-c").arg(&cmd).status().map_err(io)?;
    if !status.success() {
        keep(keep_guard);
        return Err(ExternalError::SolverFailed {
            status: status.to_string(),
            dir,
        });
    }
    let text = std::fs::read_to_string(&output).map_err(io)?;
    let (st, x) = parse_solution(&text, &export).map_err(|reason| ExternalError::Parse {
        path: output.clone(),
        reason,
    })?;
    if st != Status::Optimal {
        return Ok(SolveResult::failed(st, inst.ncols()));
    }
    let violation = inst.max_violation(&x);
    if violation > EXTERNAL_TOL {
        keep(keep_guard);
        return Err(ExternalError::Disagreement { violation, dir });
    }
    let objective: f64 = inst
        .lp
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum::<f64>()
        + inst.obj_constant;
    Ok(SolveResult {
        status: Status::Optimal,
        x,
        objective,
        bound: objective,
        iterations: 0,
        nodes: 0,
        duals: Vec::new(),
        reduced_costs: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_fit_the_field() {
        for v in [0.1, -1.0 / 3.0, 1e-17, 123456789012345.0, -2.5e-300, 0.0] {
            let s = format_number(v);
            assert!(s.len() <= 12, "{s}");
            let back: f64 = s.parse().unwrap();
            assert!((back - v).abs() <= 1e-6 * v.abs(), "{v} -> {s}");
        }
        assert_eq!(format_number(0.1), "0.1");
    }
}
