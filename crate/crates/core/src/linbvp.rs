//! Linear two-point boundary value problems [a y']' + b y' + c y = f with Dirichlet data.

use crate::error::{Error, Result};
use crate::model::{Profile, RadialGrid};
use crate::scalar::{sup_norm, Real};

/// Nodal-coefficient problem. Midpoint diffusion is the mean of nodal values,
/// the convection term is centred unless `upwind` is set.
#[derive(Debug, Clone)]
pub struct LinearBvp<T> {
    pub grid: RadialGrid<T>,
    pub a: Profile<T>,
    pub b: Profile<T>,
    pub c: Profile<T>,
    pub f: Profile<T>,
    pub alpha: T,
    pub beta: T,
    pub upwind: bool,
}

/// Interior rows of a Dirichlet problem. Row i couples y_i, y_{i+1}, y_{i+2}
/// (full-grid indices); `alpha`/`beta` are put back by the solver.
#[derive(Debug, Clone)]
pub struct TridiagonalSystem<T> {
    pub grid: RadialGrid<T>,
    pub sub: Vec<T>,
    pub diag: Vec<T>,
    pub sup: Vec<T>,
    pub rhs: Vec<T>,
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> TridiagonalSystem<T> {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// A x for interior unknowns x.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let m = self.size();
        (0..m)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.sub[i] * x[i - 1];
                }
                if i + 1 < m {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// ||A x - b||_inf / ||b||_inf for the interior part of a full profile.
    pub fn relative_residual(&self, y: &Profile<T>) -> T {
        let x = &y.values()[1..y.len() - 1];
        let ax = self.apply(x);
        let r: Vec<T> = ax.iter().zip(&self.rhs).map(|(&p, &q)| p - q).collect();
        let scale = sup_norm(&self.rhs);
        if scale > T::zero() {
            sup_norm(&r) / scale
        } else {
            sup_norm(&r)
        }
    }

    /// Identity system on `grid` with the given interior right side.
    pub fn identity(grid: &RadialGrid<T>, rhs: Vec<T>) -> Self {
        let m = rhs.len();
        Self {
            grid: grid.clone(),
            sub: vec![T::zero(); m],
            diag: vec![T::one(); m],
            sup: vec![T::zero(); m],
            rhs,
            alpha: T::zero(),
            beta: T::zero(),
        }
    }
}

fn check_grid<T: Real>(grid: &RadialGrid<T>, p: &Profile<T>, name: &str) -> Result<()> {
    if p.grid().same_as(grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("coefficient {name} is not on the problem grid")))
    }
}

pub fn assemble<T: Real>(bvp: &LinearBvp<T>) -> Result<TridiagonalSystem<T>> {
    let g = &bvp.grid;
    for (p, name) in [(&bvp.a, "a"), (&bvp.b, "b"), (&bvp.c, "c"), (&bvp.f, "f")] {
        check_grid(g, p, name)?;
    }
    let a = bvp.a.values();
    if let Some(i) = a.iter().position(|&v| !(v > T::zero())) {
        return Err(Error::Ellipticity { node: i, value: a[i].as_f64() });
    }
    let (b, c, f) = (bvp.b.values(), bvp.c.values(), bvp.f.values());
    let n = g.cells();
    let m = n - 1;
    let half = T::lit(0.5);
    let mut sys = TridiagonalSystem {
        grid: g.clone(),
        sub: vec![T::zero(); m],
        diag: vec![T::zero(); m],
        sup: vec![T::zero(); m],
        rhs: vec![T::zero(); m],
        alpha: bvp.alpha,
        beta: bvp.beta,
    };
    for i in 1..n {
        let (hm, hp) = (g.h(i - 1), g.h(i));
        let hbar = (hm + hp) * half;
        let am = (a[i - 1] + a[i]) * half;
        let ap = (a[i] + a[i + 1]) * half;
        let mut lo = am / (hm * hbar);
        let mut up = ap / (hp * hbar);
        let mut di = -(lo + up) + c[i];
        if bvp.upwind {
            if b[i] > T::zero() {
                up += b[i] / hp;
                di -= b[i] / hp;
            } else {
                lo -= b[i] / hm;
                di += b[i] / hm;
            }
        } else {
            let w = b[i] / (hm + hp);
            lo -= w;
            up += w;
        }
        let k = i - 1;
        sys.diag[k] = di;
        sys.rhs[k] = f[i];
        if i == 1 {
            sys.rhs[k] -= lo * bvp.alpha;
        } else {
            sys.sub[k] = lo;
        }
        if i == n - 1 {
            sys.rhs[k] -= up * bvp.beta;
        } else {
            sys.sup[k] = up;
        }
    }
    Ok(sys)
}

/// Cell-based conservative problem. On cell k = [x_k, x_{k+1}] the flux is
/// `diffusion_k (y_{k+1} - y_k)/h_k + advection_k (y_k + y_{k+1})/2 + offset_k`,
/// and `reaction`/`source` are midpoint values. Each interior row is the hat-function
/// weak form divided by the hat's half support, which on a uniform grid is the
/// usual second-order flux-difference scheme.
#[derive(Debug, Clone)]
pub struct FluxFormBvp<T> {
    pub grid: RadialGrid<T>,
    pub diffusion: Vec<T>,
    pub advection: Vec<T>,
    pub offset: Vec<T>,
    pub reaction: Vec<T>,
    pub source: Vec<T>,
    pub alpha: T,
    pub beta: T,
}

pub fn assemble_flux_form<T: Real>(bvp: &FluxFormBvp<T>) -> Result<TridiagonalSystem<T>> {
    let g = &bvp.grid;
    let n = g.cells();
    for (v, name) in [
        (&bvp.diffusion, "diffusion"),
        (&bvp.advection, "advection"),
        (&bvp.offset, "offset"),
        (&bvp.reaction, "reaction"),
        (&bvp.source, "source"),
    ] {
        if v.len() != n {
            return Err(Error::GridMismatch(format!("{name} has {} cells, grid has {n}", v.len())));
        }
    }
    if let Some(k) = bvp.diffusion.iter().position(|&v| !(v > T::zero())) {
        return Err(Error::Ellipticity { node: k, value: bvp.diffusion[k].as_f64() });
    }
    let m = n - 1;
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let mut sys = TridiagonalSystem {
        grid: g.clone(),
        sub: vec![T::zero(); m],
        diag: vec![T::zero(); m],
        sup: vec![T::zero(); m],
        rhs: vec![T::zero(); m],
        alpha: bvp.alpha,
        beta: bvp.beta,
    };
    for i in 1..n {
        let (l, r) = (i - 1, i);
        let (hm, hp) = (g.h(l), g.h(r));
        let hbar = (hm + hp) * half;
        let (am, ap) = (bvp.diffusion[l] / hm, bvp.diffusion[r] / hp);
        let (pm, pp) = (bvp.advection[l] * half, bvp.advection[r] * half);
        let (cm, cp) = (bvp.reaction[l] * hm * quarter, bvp.reaction[r] * hp * quarter);
        let lo = (am - pm + cm) / hbar;
        let up = (ap + pp + cp) / hbar;
        let di = (-ap + pp - am - pm + cm + cp) / hbar;
        let rhs = ((bvp.source[l] * hm + bvp.source[r] * hp) * half - (bvp.offset[r] - bvp.offset[l])) / hbar;
        let k = i - 1;
        sys.diag[k] = di;
        sys.rhs[k] = rhs;
        if i == 1 {
            sys.rhs[k] -= lo * bvp.alpha;
        } else {
            sys.sub[k] = lo;
        }
        if i == n - 1 {
            sys.rhs[k] -= up * bvp.beta;
        } else {
            sys.sup[k] = up;
        }
    }
    Ok(sys)
}

/// Tridiagonal elimination without pivoting; returns the full nodal profile.
pub fn thomas_solve<T: Real>(sys: &TridiagonalSystem<T>) -> Result<Profile<T>> {
    let m = sys.size();
    let mut cp = vec![T::zero(); m];
    let mut dp = vec![T::zero(); m];
    let mut denom = sys.diag[0];
    if denom == T::zero() || !denom.is_finite() {
        return Err(Error::Singular { row: 0 });
    }
    cp[0] = sys.sup[0] / denom;
    dp[0] = sys.rhs[0] / denom;
    for i in 1..m {
        denom = sys.diag[i] - sys.sub[i] * cp[i - 1];
        if denom == T::zero() || !denom.is_finite() {
            return Err(Error::Singular { row: i });
        }
        cp[i] = sys.sup[i] / denom;
        dp[i] = (sys.rhs[i] - sys.sub[i] * dp[i - 1]) / denom;
    }
    let mut y = vec![T::zero(); m + 2];
    y[0] = sys.alpha;
    y[m + 1] = sys.beta;
    y[m] = dp[m - 1];
    for i in (0..m - 1).rev() {
        y[i + 1] = dp[i] - cp[i] * y[i + 2];
    }
    let p = Profile::new(sys.grid.clone(), y)?;
    let res = sys.relative_residual(&p);
    if !(res <= T::lit(1e-10)) {
        log::debug!("tridiagonal residual {res} above 1e-10");
    }
    Ok(p)
}
