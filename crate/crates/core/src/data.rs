use crate::error::{Error, Result};

/// Dense real matrix stored column-major: the split scan walks one
/// covariate at a time, so columns are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let n_cols = columns.len();
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::config("columns have unequal lengths"));
        }
        let data = columns.into_iter().flatten().collect();
        Ok(Matrix {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(n_rows, n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Schema {
                    expected: n_cols,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.n_rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[col * self.n_rows + row] = value;
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[f64] {
        &self.data[col * self.n_rows..(col + 1) * self.n_rows]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.n_cols).map(|j| self.get(row, j)).collect()
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for j in 0..self.n_cols {
            let col = self.column(j);
            data.extend(rows.iter().map(|&i| col[i]));
        }
        Matrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    /// Appends columns on the right.
    pub fn hstack(&self, extra: &[Vec<f64>]) -> Result<Matrix> {
        if extra.iter().any(|c| c.len() != self.n_rows) {
            return Err(Error::config("appended column length mismatch"));
        }
        let mut data = self.data.clone();
        for c in extra {
            data.extend_from_slice(c);
        }
        Ok(Matrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols + extra.len(),
            data,
        })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Observational data set: covariates, binary treatment and outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub t: Vec<u8>,
    pub y: Vec<f64>,
    /// Optional per-row `[control, treated]` missingness of the potential
    /// outcome pair; only the bivariate imputer reads it.
    pub missing_mask: Option<Vec<[bool; 2]>>,
    pub names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Matrix, t: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        let names = (1..=x.n_cols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, t, y, names)
    }

    pub fn with_names(x: Matrix, t: Vec<u8>, y: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let data = Dataset {
            x,
            t,
            y,
            missing_mask: None,
            names,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.n_rows();
        if n < 2 {
            return Err(Error::config(format!("need at least 2 rows, got {n}")));
        }
        if self.x.n_cols() < 1 {
            return Err(Error::config("need at least one covariate"));
        }
        if self.t.len() != n || self.y.len() != n {
            return Err(Error::config(format!(
                "length mismatch: x has {n} rows, t has {}, y has {}",
                self.t.len(),
                self.y.len()
            )));
        }
        if self.names.len() != self.x.n_cols() {
            return Err(Error::config("covariate name count does not match columns"));
        }
        if !self.x.all_finite() {
            return Err(Error::config("covariates must be finite"));
        }
        if let Some(i) = self.t.iter().position(|&t| t > 1) {
            return Err(Error::config(format!("treatment at row {i} is not 0/1")));
        }
        if let Some(mask) = &self.missing_mask {
            if mask.len() != n {
                return Err(Error::config("missing mask length mismatch"));
            }
        }
        if let Some(i) = self.y.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("outcome at row {i} is not finite")));
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.n_rows()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.n_cols()
    }

    pub fn arm_rows(&self, arm: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.t[i] == arm).collect()
    }

    pub fn arm_sizes(&self) -> [usize; 2] {
        let treated = self.t.iter().filter(|&&t| t == 1).count();
        [self.n() - treated, treated]
    }

    pub fn require_both_arms(&self) -> Result<()> {
        let [control, treated] = self.arm_sizes();
        if control == 0 || treated == 0 {
            return Err(Error::config(format!(
                "both treatment arms must be present (control={control}, treated={treated})"
            )));
        }
        Ok(())
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            t: rows.iter().map(|&i| self.t[i]).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            missing_mask: self
                .missing_mask
                .as_ref()
                .map(|m| rows.iter().map(|&i| m[i]).collect()),
            names: self.names.clone(),
        }
    }
}
