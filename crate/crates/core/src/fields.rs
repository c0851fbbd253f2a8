//! Physical fields rebuilt from an m-profile, plus CSV/JSON export.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Problem, Profile};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct FieldProfiles<T> {
    pub m: Profile<T>,
    pub rho: Profile<T>,
    pub u: Profile<T>,
    pub flux: Profile<T>,
    pub e: Profile<T>,
    pub mach: Profile<T>,
}

/// Nodal first derivative: three-point centred formula inside (exact for quadratics on
/// any spacing), one-sided three-point formulas at the ends.
pub fn nodal_derivative<T: Real>(x: &[T], y: &[T]) -> Vec<T> {
    let n = x.len();
    let mut d = vec![T::zero(); n];
    for i in 1..n - 1 {
        let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        d[i] = (-h1 / (h0 * (h0 + h1))) * y[i - 1] + ((h1 - h0) / (h0 * h1)) * y[i] + (h0 / (h1 * (h0 + h1))) * y[i + 1];
    }
    let end = |ya: T, yb: T, yc: T, h0: T, h1: T| {
        // derivative at the first of three points a, b = a + h0, c = b + h1
        -(T::lit(2.0) * h0 + h1) / (h0 * (h0 + h1)) * ya + (h0 + h1) / (h0 * h1) * yb - h0 / (h1 * (h0 + h1)) * yc
    };
    d[0] = end(y[0], y[1], y[2], x[1] - x[0], x[2] - x[1]);
    d[n - 1] = -end(y[n - 1], y[n - 2], y[n - 3], x[n - 1] - x[n - 2], x[n - 2] - x[n - 3]);
    d
}

pub fn reconstruct<T: Real>(m: &Profile<T>, problem: &Problem<T>) -> Result<FieldProfiles<T>> {
    let c = &problem.config;
    let jj = c.big_j();
    if let Some(i) = m.values().iter().position(|&v| !(v > T::zero())) {
        return Err(Error::Domain { what: "m", value: m.values()[i].as_f64() });
    }
    let x = m.nodes();
    let w: Vec<T> = m.values().iter().map(|&v| (v - jj) * (v - jj)).collect();
    let wr = nodal_derivative(x, &w);
    let two = T::lit(2.0);
    let nm1 = T::from_usize_lossy(c.n() - 1);
    let e: Vec<T> = x
        .iter()
        .zip(m.values())
        .zip(&wr)
        .map(|((&r, &mv), &d)| (mv + jj) * d / (two * mv * mv * mv) + jj / (c.tau() * mv) - nm1 / r)
        .collect();
    let grid = m.grid();
    Ok(FieldProfiles {
        m: m.clone(),
        rho: Profile::new(grid.clone(), x.iter().zip(m.values()).map(|(&r, &v)| v / c.weight(r)).collect())?,
        u: m.map(|v| jj / v),
        flux: Profile::from_fn(grid, |r| jj / c.weight(r)),
        e: Profile::new(grid.clone(), e)?,
        mach: m.map(|v| jj / v),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidConfig(format!("unknown format '{other}'"))),
        }
    }
}

pub const CSV_HEADER: &str = "r,m,rho,u,flux,E,mach";

/// Plain arrays of every field, the JSON image of a `FieldProfiles`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldArrays {
    pub r: Vec<f64>,
    pub m: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub flux: Vec<f64>,
    #[serde(rename = "E")]
    pub e: Vec<f64>,
    pub mach: Vec<f64>,
}

impl FieldArrays {
    pub fn from_fields<T: Real>(f: &FieldProfiles<T>) -> Self {
        let conv = |p: &Profile<T>| p.values().iter().map(|v| v.as_f64()).collect::<Vec<f64>>();
        Self {
            r: f.m.nodes().iter().map(|v| v.as_f64()).collect(),
            m: conv(&f.m),
            rho: conv(&f.rho),
            u: conv(&f.u),
            flux: conv(&f.flux),
            e: conv(&f.e),
            mach: conv(&f.mach),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn check_shape(&self) -> Result<()> {
        let n = self.r.len();
        for (name, v) in [("m", &self.m), ("rho", &self.rho), ("u", &self.u), ("flux", &self.flux), ("E", &self.e), ("mach", &self.mach)] {
            if v.len() != n {
                return Err(Error::GridMismatch(format!("column {name} has {} rows, r has {n}", v.len())));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.len() * 140);
        s.push_str(CSV_HEADER);
        s.push('\n');
        for i in 0..self.len() {
            // shortest round-trip representation
            let row = [self.r[i], self.m[i], self.rho[i], self.u[i], self.flux[i], self.e[i], self.mach[i]];
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::InvalidConfig("empty CSV".into()))?;
        if header.trim() != CSV_HEADER {
            return Err(Error::InvalidConfig(format!("unexpected CSV header '{header}'")));
        }
        let mut cols: [Vec<f64>; 7] = Default::default();
        for (k, line) in lines.enumerate() {
            let vals: Vec<&str> = line.split(',').collect();
            if vals.len() != 7 {
                return Err(Error::InvalidConfig(format!("CSV row {} has {} columns", k + 2, vals.len())));
            }
            for (c, v) in cols.iter_mut().zip(vals) {
                c.push(
                    v.trim()
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("CSV row {}: bad number '{v}'", k + 2)))?,
                );
            }
        }
        let [r, m, rho, u, flux, e, mach] = cols;
        Ok(Self { r, m, rho, u, flux, e, mach })
    }
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() && !dir.exists() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents)?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DopingProfile, ProblemConfig, RadialGrid};

    fn problem(n: usize) -> Problem<f64> {
        Problem::new(ProblemConfig::new(n, 1.0, 2.0, 1.0, 1.0).unwrap(), DopingProfile::Constant { value: 2.0 }).unwrap()
    }

    #[test]
    fn sonic_state_field() {
        for n in [2, 3] {
            let p = problem(n);
            let g = RadialGrid::uniform(1.0, 2.0, 16).unwrap();
            let f = reconstruct(&Profile::constant(&g, 1.0), &p).unwrap();
            for (i, &r) in g.nodes().iter().enumerate() {
                assert!((f.u.values()[i] - 1.0).abs() < 1e-15);
                assert!((f.e.values()[i] - (1.0 - (n as f64 - 1.0) / r)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pointwise_arithmetic() {
        let p = Problem::new(ProblemConfig::new(2, 1.0, 3.0, 1.0, 1.0).unwrap(), DopingProfile::Constant { value: 2.0 }).unwrap();
        let g = RadialGrid::uniform(1.0, 3.0, 8).unwrap();
        let f = reconstruct(&Profile::constant(&g, 2.0), &p).unwrap();
        // node 4 is r = 2
        assert_eq!(f.rho.values()[4], 1.0);
        assert_eq!(f.u.values()[4], 0.5);
        assert_eq!(f.mach.values()[4], 0.5);
        assert!(reconstruct(&Profile::constant(&g, 0.0), &p).is_err());
    }

    #[test]
    fn derivative_exact_for_quadratics() {
        let g = RadialGrid::new(1.0, 2.0, 12, crate::model::Spacing::Clustered).unwrap();
        let y: Vec<f64> = g.nodes().iter().map(|r| 3.0 * r * r - r + 2.0).collect();
        let d = nodal_derivative(g.nodes(), &y);
        for (r, v) in g.nodes().iter().zip(&d) {
            assert!((6.0 * r - 1.0 - v).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_shape_and_round_trip() {
        let a = FieldArrays {
            r: vec![1.0, 1.5, 2.0],
            m: vec![1.0, 1.1 + 1e-17, 1.0],
            rho: vec![0.1, 0.2, 0.3],
            u: vec![1.0, 1.0 / 3.0, 1.0],
            flux: vec![1.0, 2.0 / 3.0, 0.5],
            e: vec![-0.0, 1e-300, -2.5e10],
            mach: vec![1.0, 0.9, 1.0],
        };
        let text = a.to_csv();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        let b = FieldArrays::from_csv(&text).unwrap();
        assert_eq!(a, b);
        let j = serde_json::to_string(&a).unwrap();
        let c: FieldArrays = serde_json::from_str(&j).unwrap();
        for (x, y) in a.u.iter().zip(&c.u) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert!(FieldArrays::from_csv("r,m\n1,2\n").is_err());
    }
}
