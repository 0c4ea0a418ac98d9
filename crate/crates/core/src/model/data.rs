use crate::error::{Error, Result};

/// Site-by-species abundance table with cached row totals.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    n: usize,
    m: usize,
    counts: Vec<u32>,
    row_totals: Vec<u32>,
}

impl CountMatrix {
    /// Builds a matrix from row-major counts. Rows whose counts are all zero
    /// are rejected: the zero-inflated multinomial needs a non-empty active set.
    pub fn new(n: usize, m: usize, counts: Vec<u32>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Data("count matrix must have at least one site and one species".into()));
        }
        if counts.len() != n * m {
            return Err(Error::Data(format!("count matrix has {} cells, expected {n}x{m}", counts.len())));
        }
        let mut row_totals = Vec::with_capacity(n);
        for (i, row) in counts.chunks(m).enumerate() {
            let total: u64 = row.iter().map(|&c| u64::from(c)).sum();
            if total == 0 {
                return Err(Error::Data(format!("site {i}: all counts are zero (every site needs a positive total)")));
            }
            let total =
                u32::try_from(total).map_err(|_| Error::Data(format!("site {i}: total count overflows u32")))?;
            row_totals.push(total);
        }
        Ok(Self { n, m, counts, row_totals })
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(Error::Data(format!("site {i}: {} species, expected {m}", r.len())));
        }
        Self::new(n, m, rows.concat())
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn n_species(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, k: usize) -> u32 {
        self.counts[i * self.m + k]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.counts[i * self.m..(i + 1) * self.m]
    }

    pub fn row_total(&self, i: usize) -> u32 {
        self.row_totals[i]
    }

    pub fn row_totals(&self) -> &[u32] {
        &self.row_totals
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.counts
    }

    pub fn zero_fraction(&self) -> f64 {
        let zeros = self.counts.iter().filter(|&&c| c == 0).count();
        zeros as f64 / self.counts.len() as f64
    }
}

/// Per-column affine map applied to raw climate values.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    pub fn to_raw(&self, point: &[f64]) -> Vec<f64> {
        point.iter().zip(self.mean.iter().zip(&self.sd)).map(|(v, (mu, sd))| v * sd + mu).collect()
    }
}

/// Climate covariates, one point of dimension 1 or 2 per site.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimateTable {
    n: usize,
    d: usize,
    values: Vec<f64>,
    standardization: Option<Standardization>,
}

impl ClimateTable {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::Data(format!("climate dimension must be 1 or 2, got {d}")));
        }
        if values.len() != n * d {
            return Err(Error::Data(format!("climate table has {} cells, expected {n}x{d}", values.len())));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("climate row {}, column {}: non-finite value", pos / d, pos % d)));
        }
        Ok(Self { n, d, values, standardization: None })
    }

    pub fn from_column(values: Vec<f64>) -> Result<Self> {
        Self::new(values.len(), 1, values)
    }

    /// Rescales every column to sample mean 0 and sample variance 1
    /// (n - 1 denominator), remembering the map so points can be sent back.
    pub fn standardized(self) -> Result<Self> {
        if self.n < 2 {
            return Err(Error::Data("standardization needs at least two sites".into()));
        }
        let mut mean = vec![0.0; self.d];
        let mut sd = vec![0.0; self.d];
        for j in 0..self.d {
            let col = self.column(j);
            let mu = col.iter().sum::<f64>() / self.n as f64;
            let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (self.n - 1) as f64;
            if var <= 0.0 {
                return Err(Error::Data(format!("climate column {j} has zero variance")));
            }
            mean[j] = mu;
            sd[j] = var.sqrt();
        }
        let values = self
            .values
            .chunks(self.d)
            .flat_map(|p| p.iter().enumerate().map(|(j, v)| (v - mean[j]) / sd[j]).collect::<Vec<_>>())
            .collect();
        Ok(Self { n: self.n, d: self.d, values, standardization: Some(Standardization { mean, sd }) })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().skip(j).step_by(self.d).copied().collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }
}

/// Observed counts paired with their site climates.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub counts: CountMatrix,
    pub climate: ClimateTable,
}

impl Dataset {
    pub fn new(counts: CountMatrix, climate: ClimateTable) -> Result<Self> {
        if counts.n_sites() != climate.n_sites() {
            return Err(Error::Data(format!(
                "counts have {} sites but climate has {}",
                counts.n_sites(),
                climate.n_sites()
            )));
        }
        Ok(Self { counts, climate })
    }

    pub fn n_sites(&self) -> usize {
        self.counts.n_sites()
    }

    pub fn n_species(&self) -> usize {
        self.counts.n_species()
    }

    pub fn dim(&self) -> usize {
        self.climate.dim()
    }
}
