//! QUBO problems, the min-cut reduction, and the text export format.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{fmt_real, GridGraph};

/// Binary assignment, one bit per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<u8>);

impl Assignment {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidInput("assignment bits must be 0 or 1".into()));
        }
        Ok(Self(bits))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1; n])
    }

    /// Bit `i` is bit `i` of `mask`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self((0..n).map(|i| ((mask >> i) & 1) as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.0
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|b| 1 - b).collect())
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_char(if *b == 1 { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidInput(format!("bad bit `{other}`"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Assignment)
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Upper-triangular QUBO: `offset + sum l_i x_i + sum_{i<j} q_ij x_i x_j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuboProblem {
    num_vars: usize,
    linear: BTreeMap<usize, f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    offset: f64,
}

impl QuboProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn linear(&self) -> &BTreeMap<usize, f64> {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn set_offset(&mut self, offset: f64) {
        self.offset = offset;
    }

    fn check_coeff(&self, vars: &[usize], coeff: f64) -> Result<()> {
        if let Some(v) = vars.iter().find(|&&v| v >= self.num_vars) {
            return Err(Error::InvalidInput(format!(
                "variable {v} out of range for {} variables",
                self.num_vars
            )));
        }
        if !coeff.is_finite() {
            return Err(Error::InvalidInput("QUBO coefficients must be finite".into()));
        }
        Ok(())
    }

    pub fn add_linear(&mut self, i: usize, coeff: f64) -> Result<()> {
        self.check_coeff(&[i], coeff)?;
        *self.linear.entry(i).or_insert(0.0) += coeff;
        Ok(())
    }

    /// Adds `coeff * x_i * x_j`; `(j, i)` folds onto `(i, j)` and `i == j` onto the linear term.
    pub fn add_quadratic(&mut self, i: usize, j: usize, coeff: f64) -> Result<()> {
        self.check_coeff(&[i, j], coeff)?;
        if i == j {
            return self.add_linear(i, coeff);
        }
        *self.quadratic.entry((i.min(j), i.max(j))).or_insert(0.0) += coeff;
        Ok(())
    }

    pub fn energy(&self, a: &Assignment) -> Result<f64> {
        if a.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: format!("{} bits", self.num_vars),
                found: format!("{} bits", a.len()),
            });
        }
        let x = a.bits();
        let mut e = self.offset;
        for (&i, &l) in &self.linear {
            if x[i] == 1 {
                e += l;
            }
        }
        for (&(i, j), &q) in &self.quadratic {
            if x[i] == 1 && x[j] == 1 {
                e += q;
            }
        }
        Ok(e)
    }

    /// Text form: `qubo <n> <num_linear> <num_quadratic>`, then `l i c` lines
    /// in ascending `i`, then `q i j c` lines in ascending `(i, j)`.
    pub fn to_text(&self) -> Result<String> {
        if self.offset != 0.0 {
            return Err(Error::InvalidInput(
                "the QUBO text format carries no constant offset".into(),
            ));
        }
        let mut out = format!(
            "qubo {} {} {}\n",
            self.num_vars,
            self.linear.len(),
            self.quadratic.len()
        );
        for (i, l) in &self.linear {
            writeln!(out, "l {i} {}", fmt_real(*l)).expect("write to String");
        }
        for ((i, j), q) in &self.quadratic {
            writeln!(out, "q {i} {j} {}", fmt_real(*q)).expect("write to String");
        }
        Ok(out)
    }

    pub fn parse_text(text: &str, path: &Path) -> Result<QuboProblem> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::format(path, "empty QUBO file"))?;
        let counts: Vec<usize> = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["qubo", rest @ ..] if rest.len() == 3 => rest
                .iter()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(path, format!("bad header: {e}")))?,
            _ => return Err(Error::format(path, format!("bad header `{header}`"))),
        };
        let mut p = QuboProblem::new(counts[0]);
        let mut last_linear: Option<usize> = None;
        let mut last_quad: Option<(usize, usize)> = None;
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: String| Error::format(path, format!("line {}: {m}", lineno + 1));
            let parts: Vec<&str> = line.split_whitespace().collect();
            let idx = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{e}")));
            let coeff = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{e}")));
            match parts.as_slice() {
                ["l", i, c] => {
                    let i = idx(i)?;
                    if last_quad.is_some() || last_linear.is_some_and(|prev| prev >= i) {
                        return Err(bad("linear terms must be ascending and precede quadratic terms".into()));
                    }
                    p.add_linear(i, coeff(c)?).map_err(|e| bad(e.to_string()))?;
                    last_linear = Some(i);
                }
                ["q", i, j, c] => {
                    let key = (idx(i)?, idx(j)?);
                    if key.0 >= key.1 || last_quad.is_some_and(|prev| prev >= key) {
                        return Err(bad("quadratic terms must be upper-triangular and ascending".into()));
                    }
                    p.add_quadratic(key.0, key.1, coeff(c)?)
                        .map_err(|e| bad(e.to_string()))?;
                    last_quad = Some(key);
                }
                _ => return Err(bad(format!("unrecognized line `{line}`"))),
            }
        }
        if p.linear.len() != counts[1] || p.quadratic.len() != counts[2] {
            return Err(Error::format(
                path,
                format!(
                    "header declares {} linear and {} quadratic terms, found {} and {}",
                    counts[1],
                    counts[2],
                    p.linear.len(),
                    p.quadratic.len()
                ),
            ));
        }
        Ok(p)
    }
}

/// Writes the QUBO text format to `path`.
pub fn export_qubo(p: &QuboProblem, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = p.to_text()?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn import_qubo(path: impl AsRef<Path>) -> Result<QuboProblem> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    QuboProblem::parse_text(&text, path)
}

/// Min-cut QUBO: each edge contributes `w (x_i + x_j - 2 x_i x_j)`, which is
/// `w` exactly when the edge crosses the partition. One variable per node.
pub fn mincut_to_qubo(g: &GridGraph) -> QuboProblem {
    let mut p = QuboProblem::new(g.num_nodes());
    for e in g.edges() {
        *p.linear.entry(e.u).or_insert(0.0) += e.weight;
        *p.linear.entry(e.v).or_insert(0.0) += e.weight;
        *p.quadratic.entry((e.u, e.v)).or_insert(0.0) += -2.0 * e.weight;
    }
    p
}

/// Total weight of edges whose endpoints receive different bits.
pub fn cut_value(g: &GridGraph, a: &Assignment) -> Result<f64> {
    if a.len() != g.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} bits", g.num_nodes()),
            found: format!("{} bits", a.len()),
        });
    }
    let x = a.bits();
    Ok(g.edges().filter(|e| x[e.u] != x[e.v]).map(|e| e.weight).sum())
}

/// Dense linear terms plus symmetric adjacency, for solvers that flip single bits.
#[derive(Debug, Clone)]
pub struct CompiledQubo {
    linear: Vec<f64>,
    offsets: Vec<usize>,
    neighbors: Vec<(usize, f64)>,
    offset: f64,
}

impl CompiledQubo {
    pub fn new(p: &QuboProblem) -> Self {
        let n = p.num_vars;
        let mut linear = vec![0.0; n];
        for (&i, &l) in &p.linear {
            linear[i] = l;
        }
        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &q) in &p.quadratic {
            lists[i].push((j, q));
            lists[j].push((i, q));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        for l in lists {
            neighbors.extend(l);
            offsets.push(neighbors.len());
        }
        Self {
            linear,
            offsets,
            neighbors,
            offset: p.offset,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `h_i = l_i + sum_j q_ij x_j`; flipping bit `i` changes the energy by `(1 - 2 x_i) h_i`.
    pub fn local_fields(&self, x: &[u8]) -> Vec<f64> {
        (0..self.num_vars())
            .map(|i| {
                self.linear[i]
                    + self
                        .neighbors(i)
                        .iter()
                        .filter(|(j, _)| x[*j] == 1)
                        .map(|(_, q)| q)
                        .sum::<f64>()
            })
            .collect()
    }

    /// Flip bit `i`, updating `fields` in place; returns the energy change.
    #[inline]
    pub fn flip(&self, x: &mut [u8], fields: &mut [f64], i: usize) -> f64 {
        let delta = if x[i] == 0 { fields[i] } else { -fields[i] };
        let sign = if x[i] == 0 { 1.0 } else { -1.0 };
        x[i] ^= 1;
        for &(j, q) in self.neighbors(i) {
            fields[j] += sign * q;
        }
        delta
    }

    pub fn energy(&self, x: &[u8]) -> f64 {
        let mut e = self.offset;
        for i in 0..self.num_vars() {
            if x[i] == 1 {
                e += self.linear[i];
                e += self
                    .neighbors(i)
                    .iter()
                    .filter(|(j, _)| *j > i && x[*j] == 1)
                    .map(|(_, q)| q)
                    .sum::<f64>();
            }
        }
        e
    }
}
