//! Logical-variable accounting for the lattice formulation versus the
//! source/sink (terminal) formulation of the same segmentation problem.
//!
//! Only logical structure is counted. Physical qubit counts after embedding
//! onto annealer hardware are not computed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// One variable per pixel, 4-neighbor couplings only.
    Grid,
    /// The lattice plus a source and a sink, each coupled to every pixel.
    Terminal,
}

impl Formulation {
    pub fn label(self) -> &'static str {
        match self {
            Formulation::Grid => "grid",
            Formulation::Terminal => "terminal",
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Formulation::Grid),
            "terminal" => Ok(Formulation::Terminal),
            other => Err(Error::InvalidParameter(format!("unknown formulation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulationStats {
    pub formulation: Formulation,
    pub width: usize,
    pub height: usize,
    pub image_pixels: usize,
    pub logical_vars: usize,
    pub edges: usize,
    pub max_degree: usize,
    pub solution_space_log2: usize,
}

pub const CSV_HEADER: &str = "formulation,width,height,logical_vars,edges,max_degree,solution_space_log2";

fn lattice_edges(w: usize, h: usize) -> usize {
    2 * w * h - w - h
}

fn lattice_max_degree(w: usize, h: usize) -> usize {
    let axis = |len: usize| (len - 1).min(2);
    axis(w) + axis(h)
}

pub fn stats_for(width: usize, height: usize, formulation: Formulation) -> Result<FormulationStats> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter(format!(
            "grid must be at least 1x1, got {width}x{height}"
        )));
    }
    let n = width * height;
    let (logical_vars, edges, max_degree) = match formulation {
        Formulation::Grid => (n, lattice_edges(width, height), lattice_max_degree(width, height)),
        // Each terminal touches all n pixels; a pixel gains one coupling per terminal.
        Formulation::Terminal => (
            n + 2,
            lattice_edges(width, height) + 2 * n,
            n.max(lattice_max_degree(width, height) + 2),
        ),
    };
    Ok(FormulationStats {
        formulation,
        width,
        height,
        image_pixels: n,
        logical_vars,
        edges,
        max_degree,
        solution_space_log2: logical_vars,
    })
}

impl FormulationStats {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.formulation,
            self.width,
            self.height,
            self.logical_vars,
            self.edges,
            self.max_degree,
            self.solution_space_log2
        )
    }
}

/// Both formulations for each `(width, height)`, grid first.
pub fn compare(sizes: &[(usize, usize)]) -> Result<Vec<FormulationStats>> {
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("no sizes given".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len() * 2);
    for &(w, h) in sizes {
        rows.push(stats_for(w, h, Formulation::Grid)?);
        rows.push(stats_for(w, h, Formulation::Terminal)?);
    }
    Ok(rows)
}

/// CSV table of [`compare`].
pub fn compare_report(sizes: &[(usize, usize)]) -> Result<String> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in compare(sizes)? {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GridGraph;

    #[test]
    fn three_by_three() {
        let g = stats_for(3, 3, Formulation::Grid).unwrap();
        assert_eq!((g.logical_vars, g.edges, g.max_degree), (9, 12, 4));
        let t = stats_for(3, 3, Formulation::Terminal).unwrap();
        assert_eq!((t.logical_vars, t.edges, t.max_degree), (11, 30, 9));
    }

    #[test]
    fn rejects_empty() {
        assert!(stats_for(0, 3, Formulation::Grid).is_err());
        assert!(compare_report(&[]).is_err());
    }

    #[test]
    fn closed_forms_match_explicit_graphs() {
        for w in 1..=10 {
            for h in 1..=10 {
                let g = GridGraph::new(w, h, vec![0.5; h * (w - 1)], vec![0.5; (h - 1) * w]).unwrap();
                let s = stats_for(w, h, Formulation::Grid).unwrap();
                assert_eq!(s.edges, g.num_edges());
                assert_eq!(s.max_degree, g.max_degree());

                // Terminal graph: pixel degrees gain 2, terminals have degree n.
                let n = w * h;
                let mut degrees: Vec<usize> = (0..n).map(|i| g.degree(i) + 2).collect();
                degrees.extend([n, n]);
                let t = stats_for(w, h, Formulation::Terminal).unwrap();
                assert_eq!(t.edges * 2, degrees.iter().sum::<usize>());
                assert_eq!(t.max_degree, *degrees.iter().max().unwrap());
            }
        }
    }

    #[test]
    fn report_shape() {
        let sizes: Vec<(usize, usize)> = (2..=44).map(|g| (g, g)).collect();
        let text = compare_report(&sizes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 87);
        assert_eq!(compare_report(&[(5, 5)]).unwrap().lines().count(), 3);
    }
}
