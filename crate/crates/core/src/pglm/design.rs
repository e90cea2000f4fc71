use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Panel;
use crate::HOURS_PER_WEEK;

/// Which columns enter a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub name: String,
    pub response: String,
    pub regressors: Vec<String>,
    pub tract_effects: bool,
    pub hour_effects: bool,
    /// Dropped tract level; the lowest id when unset.
    pub reference_tract: Option<String>,
    pub reference_hour: usize,
    /// Drop columns that are linear combinations of earlier ones instead of failing.
    pub drop_aliased: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            name: "model".into(),
            response: "crime".into(),
            regressors: Vec::new(),
            tract_effects: true,
            hour_effects: true,
            reference_tract: None,
            reference_hour: 0,
            drop_aliased: false,
        }
    }
}

impl ModelSpec {
    pub fn new(name: &str, regressors: &[&str]) -> Self {
        ModelSpec {
            name: name.into(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            ..ModelSpec::default()
        }
    }
}

/// Sparse design: every row holds the intercept, at most one tract dummy, at most one hour
/// dummy and the raw regressors.
#[derive(Debug, Clone)]
pub struct Design {
    pub columns: Vec<String>,
    n: usize,
    tract_col: Vec<Option<u32>>,
    hour_col: Vec<Option<u32>>,
    reg_offset: usize,
    k: usize,
    regressors: Vec<f64>,
    pub y: Vec<u64>,
    /// Design-row index ranges for each tract / hour factor level (including the reference).
    pub(crate) tract_levels: Vec<(String, Vec<usize>)>,
    pub(crate) hour_levels: Vec<(usize, Vec<usize>)>,
}

impl Design {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn regressor_offset(&self) -> usize {
        self.reg_offset
    }

    /// Non-zero entries of row `i` as (column, value).
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let dummies = [Some(0u32), self.tract_col[i], self.hour_col[i]];
        dummies
            .into_iter()
            .flatten()
            .map(|c| (c as usize, 1.0))
            .chain(
                self.regressors[i * self.k..(i + 1) * self.k]
                    .iter()
                    .enumerate()
                    .map(move |(j, &v)| (self.reg_offset + j, v)),
            )
    }

    pub fn eta(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(c, v)| beta[c] * v).sum()).collect()
    }

    /// X'WX (full symmetric matrix).
    pub fn xtwx(&self, w: &[f64]) -> DMatrix<f64> {
        let p = self.p();
        let mut a = DMatrix::zeros(p, p);
        let mut nz: Vec<(usize, f64)> = Vec::with_capacity(3 + self.k);
        for (i, &wi) in w.iter().enumerate() {
            nz.clear();
            nz.extend(self.row(i));
            for (ia, &(ca, va)) in nz.iter().enumerate() {
                let wa = wi * va;
                for &(cb, vb) in &nz[ia..] {
                    let (r, c) = if ca <= cb { (ca, cb) } else { (cb, ca) };
                    a[(r, c)] += wa * vb;
                }
            }
        }
        for c in 0..p {
            for r in 0..c {
                a[(c, r)] = a[(r, c)];
            }
        }
        a
    }

    /// X'v.
    pub fn xtv(&self, v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.p());
        for (i, &vi) in v.iter().enumerate() {
            for (c, x) in self.row(i) {
                out[c] += x * vi;
            }
        }
        out
    }

    /// Dense copy, for tests and small problems.
    pub fn dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.p());
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                m[(i, c)] = v;
            }
        }
        m
    }

    /// Keep only the listed columns (in order). Dummy columns may not be removed.
    pub(crate) fn without_regressors(&self, drop: &[usize]) -> Design {
        let keep: Vec<usize> = (0..self.k).filter(|j| !drop.contains(&(self.reg_offset + j))).collect();
        let mut d = self.clone();
        d.k = keep.len();
        d.regressors = (0..self.n)
            .flat_map(|i| keep.iter().map(move |&j| self.regressors[i * self.k + j]))
            .collect();
        d.columns.truncate(self.reg_offset);
        d.columns.extend(keep.iter().map(|&j| self.columns[self.reg_offset + j].clone()));
        d
    }
}

/// Build the design matrix for `spec` over `panel`.
pub fn build_design(panel: &Panel, spec: &ModelSpec) -> Result<Design> {
    let n = panel.len();
    let y_raw = panel
        .column(&spec.response)
        .ok_or_else(|| Error::Config(format!("response column {:?} not in panel", spec.response)))?;
    let y = y_raw
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as u64)
            } else {
                Err(Error::Validation(format!("response {:?} must hold non-negative counts", spec.response)))
            }
        })
        .collect::<Result<Vec<u64>>>()?;

    let tract_ids = panel.tract_ids();
    let mut columns = vec!["intercept".to_string()];
    let mut tract_col = vec![None; n];
    let mut hour_col = vec![None; n];
    let mut tract_levels = Vec::new();
    let mut hour_levels = Vec::new();

    if spec.tract_effects {
        let reference = match &spec.reference_tract {
            Some(r) => tract_ids
                .iter()
                .position(|id| id == r)
                .ok_or_else(|| Error::Config(format!("reference tract {r:?} not in panel")))?,
            None => 0,
        };
        let mut col_of = vec![None; tract_ids.len()];
        for (k, id) in tract_ids.iter().enumerate() {
            if k != reference {
                col_of[k] = Some(columns.len() as u32);
                columns.push(format!("tract[{id}]"));
            }
        }
        for (i, c) in tract_col.iter_mut().enumerate() {
            *c = col_of[panel.tract_index(i)];
        }
        tract_levels = tract_ids
            .iter()
            .enumerate()
            .map(|(k, id)| (id.to_string(), (k * HOURS_PER_WEEK..(k + 1) * HOURS_PER_WEEK).collect()))
            .collect();
    }
    if spec.hour_effects {
        if spec.reference_hour >= HOURS_PER_WEEK {
            return Err(Error::Config(format!("reference hour {} out of range", spec.reference_hour)));
        }
        let mut col_of = [None; HOURS_PER_WEEK];
        for (t, slot) in col_of.iter_mut().enumerate() {
            if t != spec.reference_hour {
                *slot = Some(columns.len() as u32);
                columns.push(format!("hour[{t}]"));
            }
        }
        for (i, row) in panel.rows().iter().enumerate() {
            hour_col[i] = col_of[row.t];
        }
        hour_levels = (0..HOURS_PER_WEEK)
            .map(|t| (t, (0..n).filter(|i| i % HOURS_PER_WEEK == t).collect()))
            .collect();
    }

    let reg_offset = columns.len();
    let k = spec.regressors.len();
    let mut regressors = vec![0.0; n * k];
    for (j, name) in spec.regressors.iter().enumerate() {
        if spec.regressors[..j].contains(name) {
            return Err(Error::Config(format!("regressor {name:?} listed twice")));
        }
        let col = panel
            .column(name)
            .ok_or_else(|| Error::Config(format!("regressor column {name:?} not in panel")))?;
        if col.iter().all(|&v| v == col[0]) {
            return Err(Error::Estimation(format!(
                "regressor {name:?} is constant ({}) and cannot be identified",
                col[0]
            )));
        }
        for (i, v) in col.into_iter().enumerate() {
            regressors[i * k + j] = v;
        }
        columns.push(name.clone());
    }

    Ok(Design {
        columns,
        n,
        tract_col,
        hour_col,
        reg_offset,
        k,
        regressors,
        y,
        tract_levels,
        hour_levels,
    })
}

/// Columns that are (numerically) linear combinations of earlier columns.
///
/// Runs a Cholesky factorization of X'X column by column and flags any column whose residual
/// squared norm falls below `tol` times its own squared norm.
pub fn aliased_columns(d: &Design, tol: f64) -> Vec<usize> {
    let a = d.xtwx(&vec![1.0; d.n()]);
    let p = a.nrows();
    let mut l = DMatrix::<f64>::zeros(p, p);
    let mut ok = vec![false; p];
    let mut aliased = Vec::new();
    for j in 0..p {
        let mut diag = a[(j, j)];
        for k in 0..j {
            if ok[k] {
                diag -= l[(j, k)] * l[(j, k)];
            }
        }
        if a[(j, j)] <= 0.0 || diag <= tol * a[(j, j)] {
            aliased.push(j);
            continue;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        ok[j] = true;
        for i in j + 1..p {
            let mut s = a[(i, j)];
            for k in 0..j {
                if ok[k] {
                    s -= l[(i, k)] * l[(j, k)];
                }
            }
            l[(i, j)] = s / ljj;
        }
    }
    aliased
}
