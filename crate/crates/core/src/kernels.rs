//! Deterministic generators for the sine, acoustic/potential and real
//! spherical-harmonic kernels, and the randomly permuted variant.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::matrix::DenseMatrix;
use crate::perm::Permutation;
use crate::rng::SeededRng;

/// Smallest source-target distance accepted by the acoustic kernel.
pub const MIN_DISTANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Sine,
    Acoustic,
    Spherical,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    Grid,
    #[default]
    Random,
}

macro_rules! lowercase_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::invalid(format!("unknown {}: {other}", stringify!($ty).to_lowercase()))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name,)+ })
            }
        }
    };
}

lowercase_enum!(Family { Sine => "sine", Acoustic => "acoustic", Spherical => "spherical" });
lowercase_enum!(Sampling { Grid => "grid", Random => "random" });

/// Kernel description. For the spherical family with grid sampling `n` is the
/// maximal degree; otherwise it is the number of sample points (random
/// spherical), frequencies (sine) or sources and targets (acoustic).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: Family,
    pub n: usize,
    pub nu: f64,
    pub sampling: Sampling,
    pub seed: u64,
}

impl KernelSpec {
    pub fn new(family: Family, n: usize) -> Self {
        KernelSpec {
            family,
            n,
            nu: 0.0,
            sampling: Sampling::Random,
            seed: 0,
        }
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2
            && !(self.family == Family::Spherical && self.sampling == Sampling::Grid && self.n >= 1)
        {
            return Err(Error::invalid(format!(
                "kernel size must be at least 2, got {}",
                self.n
            )));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::invalid(format!(
                "nu must be finite and non-negative, got {}",
                self.nu
            )));
        }
        Ok(())
    }
}

/// Generated kernel with the coordinates and original labels of its rows and
/// columns, in emitted order.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub matrix: DenseMatrix<f64>,
    pub spec: KernelSpec,
    pub row_points: Vec<Vec<f64>>,
    pub col_points: Vec<Vec<f64>>,
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
}

/// Coordinates and labels written next to a generated matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSidecar {
    pub spec: KernelSpec,
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_points: Vec<Vec<f64>>,
    pub col_points: Vec<Vec<f64>>,
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
}

impl Kernel {
    pub fn sidecar(&self) -> KernelSidecar {
        KernelSidecar {
            spec: self.spec,
            n_rows: self.matrix.n_rows(),
            n_cols: self.matrix.n_cols(),
            row_points: self.row_points.clone(),
            col_points: self.col_points.clone(),
            row_labels: self.row_labels.clone(),
            col_labels: self.col_labels.clone(),
        }
    }

    pub fn sidecar_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.sidecar())?)
    }

    /// Reassembles a kernel from its matrix and sidecar.
    pub fn from_sidecar(matrix: DenseMatrix<f64>, s: KernelSidecar) -> Result<Self> {
        check_len("sidecar rows", s.n_rows, matrix.n_rows())?;
        check_len("sidecar columns", s.n_cols, matrix.n_cols())?;
        check_len("row points", s.n_rows, s.row_points.len())?;
        check_len("column points", s.n_cols, s.col_points.len())?;
        check_len("row labels", s.n_rows, s.row_labels.len())?;
        check_len("column labels", s.n_cols, s.col_labels.len())?;
        Ok(Kernel {
            matrix,
            spec: s.spec,
            row_points: s.row_points,
            col_points: s.col_points,
            row_labels: s.row_labels,
            col_labels: s.col_labels,
        })
    }
}

pub fn generate(spec: &KernelSpec) -> Result<Kernel> {
    spec.validate()?;
    match spec.family {
        Family::Sine => sine_kernel(spec.n, spec.sampling, spec.seed),
        Family::Acoustic => acoustic_kernel(spec.n, spec.nu, spec.seed),
        Family::Spherical => match spec.sampling {
            Sampling::Grid => spherical_harmonics_grid(spec.n),
            Sampling::Random => spherical_harmonics_random(spec.n, spec.seed),
        },
    }
}

/// `K[k-1][i] = sin(2π k x_i)` for `k = 1..=n` and `2n` samples `x_i`:
/// uniform draws in draw order, or the grid `i / 2n`.
pub fn sine_kernel(n: usize, sampling: Sampling, seed: u64) -> Result<Kernel> {
    let spec = KernelSpec::new(Family::Sine, n)
        .with_sampling(sampling)
        .with_seed(seed);
    spec.validate()?;
    let x: Vec<f64> = match sampling {
        Sampling::Random => SeededRng::new(seed).uniform_vec(2 * n),
        Sampling::Grid => (0..2 * n).map(|i| i as f64 / (2 * n) as f64).collect(),
    };
    let matrix = DenseMatrix::from_fn(n, 2 * n, |k, i| (2.0 * PI * (k + 1) as f64 * x[i]).sin())?;
    Ok(Kernel {
        matrix,
        spec,
        row_points: (1..=n).map(|k| vec![k as f64]).collect(),
        col_points: x.iter().map(|&v| vec![v]).collect(),
        row_labels: (0..n).collect(),
        col_labels: (0..2 * n).collect(),
    })
}

/// Point `t ∈ [0, 1]` of the helix `(cos 6πt, sin 6πt, 3t)`.
pub fn helix_point(t: f64) -> [f64; 3] {
    [(6.0 * PI * t).cos(), (6.0 * PI * t).sin(), 3.0 * t]
}

/// `cos(2πν d) / d` for distance `d`.
pub fn acoustic_entry(nu: f64, d: f64) -> Result<f64> {
    if !(d >= MIN_DISTANCE) {
        return Err(Error::Degenerate(format!(
            "source-target distance {d:e} below {MIN_DISTANCE:e}"
        )));
    }
    Ok((2.0 * PI * nu * d).cos() / d)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Targets on an equispaced helix, sources uniform on the sheet
/// `[-1, 1]² × {-1.5}`; rows and columns shuffled.
pub fn acoustic_kernel(n: usize, nu: f64, seed: u64) -> Result<Kernel> {
    let spec = KernelSpec::new(Family::Acoustic, n)
        .with_nu(nu)
        .with_seed(seed);
    spec.validate()?;
    let mut rng = SeededRng::new(seed);
    let targets: Vec<Vec<f64>> = (0..n)
        .map(|i| helix_point(i as f64 / (n - 1) as f64).to_vec())
        .collect();
    let sources: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let u = rng.uniform_in(-1.0, 1.0);
            let v = rng.uniform_in(-1.0, 1.0);
            vec![u, v, -1.5]
        })
        .collect();
    let row_perm = Permutation::random(n, &mut rng);
    let col_perm = Permutation::random(n, &mut rng);
    let row_points: Vec<Vec<f64>> = row_perm
        .as_slice()
        .iter()
        .map(|&i| targets[i].clone())
        .collect();
    let col_points: Vec<Vec<f64>> = col_perm
        .as_slice()
        .iter()
        .map(|&j| sources[j].clone())
        .collect();
    let mut data = Vec::with_capacity(n * n);
    for x in &row_points {
        for y in &col_points {
            data.push(acoustic_entry(nu, distance(x, y))?);
        }
    }
    Ok(Kernel {
        matrix: DenseMatrix::from_vec(n, n, data)?,
        spec,
        row_points,
        col_points,
        row_labels: row_perm.into_vec(),
        col_labels: col_perm.into_vec(),
    })
}

/// Normalized associated Legendre values `N_l^m P_l^m(cos θ)` without the
/// Condon–Shortley phase, for `0 <= m <= l <= l_max`, stored at `l(l+1)/2 + m`.
pub fn normalized_legendre(l_max: usize, theta: f64) -> Vec<f64> {
    let (c, s) = (theta.cos(), theta.sin());
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut p = vec![0.0; idx(l_max, l_max) + 1];
    p[0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=l_max {
        let mf = m as f64;
        p[idx(m, m)] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[idx(m - 1, m - 1)];
    }
    for m in 0..l_max {
        let mf = m as f64;
        p[idx(m + 1, m)] = (2.0 * mf + 3.0).sqrt() * c * p[idx(m, m)];
        for l in m + 2..=l_max {
            let (lf, mf2) = (l as f64, mf * mf);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf2)).sqrt();
            let b =
                (((lf - 1.0) * (lf - 1.0) - mf2) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[idx(l, m)] = a * (c * p[idx(l - 1, m)] - b * p[idx(l - 2, m)]);
        }
    }
    p
}

/// Real spherical harmonics `Y_l^m(θ, φ)` for `l <= l_max`, `-l <= m <= l`,
/// in column order `(0,0), (1,-1), (1,0), (1,1), ...`.
pub fn real_spherical_harmonics(l_max: usize, theta: f64, phi: f64) -> Vec<f64> {
    let p = normalized_legendre(l_max, theta);
    let mut out = Vec::with_capacity((l_max + 1) * (l_max + 1));
    let r2 = std::f64::consts::SQRT_2;
    for l in 0..=l_max {
        let base = l * (l + 1) / 2;
        for m in -(l as i64)..=l as i64 {
            let am = m.unsigned_abs() as usize;
            let v = p[base + am];
            out.push(match m.signum() {
                0 => v,
                1 => r2 * v * (m as f64 * phi).cos(),
                _ => r2 * v * (am as f64 * phi).sin(),
            });
        }
    }
    out
}

/// Degree labels `(l, m)` of the harmonic columns.
pub fn harmonic_labels(l_max: usize) -> Vec<Vec<f64>> {
    (0..=l_max as i64)
        .flat_map(|l| (-l..=l).map(move |m| vec![l as f64, m as f64]))
        .collect()
}

fn harmonics_kernel(spec: KernelSpec, l_max: usize, points: Vec<Vec<f64>>) -> Result<Kernel> {
    let cols = (l_max + 1) * (l_max + 1);
    let mut data = Vec::with_capacity(points.len() * cols);
    for pt in &points {
        data.extend(real_spherical_harmonics(l_max, pt[0], pt[1]));
    }
    let n = points.len();
    Ok(Kernel {
        matrix: DenseMatrix::from_vec(n, cols, data)?,
        spec,
        row_points: points,
        col_points: harmonic_labels(l_max),
        row_labels: (0..n).collect(),
        col_labels: (0..cols).collect(),
    })
}

/// Harmonics up to degree `l_max` on the `(l_max + 1) × (2 l_max + 1)`
/// midpoint grid in `θ` and equispaced grid in `φ`.
pub fn spherical_harmonics_grid(l_max: usize) -> Result<Kernel> {
    if l_max < 1 {
        return Err(Error::invalid("maximal degree must be at least 1"));
    }
    let (nt, np) = (l_max + 1, 2 * l_max + 1);
    let points = (0..nt)
        .flat_map(|i| {
            let theta = PI * (i as f64 + 0.5) / nt as f64;
            (0..np).map(move |j| vec![theta, 2.0 * PI * j as f64 / np as f64])
        })
        .collect();
    harmonics_kernel(
        KernelSpec::new(Family::Spherical, l_max).with_sampling(Sampling::Grid),
        l_max,
        points,
    )
}

/// Largest degree used with `n` random samples, `⌊-1 + sqrt(n / 8)⌋`.
pub fn random_l_max(n: usize) -> usize {
    ((n as f64 / 8.0).sqrt() - 1.0).floor().max(0.0) as usize
}

/// Harmonics at `n` points uniform on the sphere: `θ = arccos(2x - 1)`,
/// `φ = 2π u`.
pub fn spherical_harmonics_random(n: usize, seed: u64) -> Result<Kernel> {
    let l_max = random_l_max(n);
    if l_max < 1 {
        return Err(Error::invalid(format!(
            "{n} samples give maximal degree 0; need at least 32"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let points = (0..n)
        .map(|_| {
            let theta = (2.0 * rng.uniform() - 1.0).acos();
            vec![theta, 2.0 * PI * rng.uniform()]
        })
        .collect();
    harmonics_kernel(
        KernelSpec::new(Family::Spherical, n).with_seed(seed),
        l_max,
        points,
    )
}

/// Randomly permuted copy of a kernel; the natural variant is the input.
#[derive(Clone, Debug, PartialEq)]
pub struct ShuffledKernel {
    pub permuted: DenseMatrix<f64>,
    pub row_perm: Permutation,
    pub col_perm: Permutation,
}

impl ShuffledKernel {
    /// Undoes the shuffle.
    pub fn natural(&self) -> Result<DenseMatrix<f64>> {
        self.permuted
            .permute(&self.row_perm.inverse(), &self.col_perm.inverse())
    }
}

/// `permuted[i][j] = K[row_perm[i]][col_perm[j]]` with seeded uniform permutations.
pub fn shuffle_variants(k: &DenseMatrix<f64>, seed: u64) -> Result<ShuffledKernel> {
    let mut rng = SeededRng::new(seed);
    let row_perm = Permutation::random(k.n_rows(), &mut rng);
    let col_perm = Permutation::random(k.n_cols(), &mut rng);
    Ok(ShuffledKernel {
        permuted: k.permute(&row_perm, &col_perm)?,
        row_perm,
        col_perm,
    })
}
