use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chart::{christoffel, orthonormal_frame, ManifoldChart, FD_STEP};
use super::path::{PathPiece, SmoothPath, CLOSURE_TOL};
use crate::error::{Error, Result};
use crate::linalg::{orthogonality_residual, polar_orthogonal, seeded_rng, Mat};
use crate::matrix_json::mat_serde;

pub const MIN_STEPS: usize = 100;
/// Raw orthogonality defect above which a transport is rejected.
pub const MAX_DEFECT: f64 = 1e-4;

/// Result of transporting the tangent space along a path.
#[derive(Debug, Clone)]
pub struct Transport {
    /// Orthonormal-frame expression `F(q)⁻¹·P·F(p)`.
    pub matrix: Mat,
    /// Coordinate transport `P`: column `j` is the transported `∂_j`.
    pub coordinate: Mat,
    pub defect: f64,
    pub steps: usize,
}

fn connection(chart: &ManifoldChart, piece: &PathPiece, s: f64) -> Result<Mat> {
    let x = piece.point(s);
    let gamma = christoffel(chart, &x)?;
    Ok(gamma.contract(&piece.velocity(s)))
}

/// Classical RK4 on `dP/ds = −A(s)·P` across one piece.
fn rk4_piece(chart: &ManifoldChart, piece: &PathPiece, steps: usize, mut p: Mat) -> Result<Mat> {
    let h = 1.0 / steps as f64;
    let mut a_next = connection(chart, piece, 0.0)?;
    for k in 0..steps {
        let s = k as f64 * h;
        let a0 = a_next;
        let a_mid = connection(chart, piece, s + 0.5 * h)?;
        a_next = connection(chart, piece, s + h)?;
        let k1 = -(&a0 * &p);
        let k2 = -(&a_mid * (&p + &k1 * (0.5 * h)));
        let k3 = -(&a_mid * (&p + &k2 * (0.5 * h)));
        let k4 = -(&a_next * (&p + &k3 * h));
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(p)
}

/// Coordinate transport matrix along `path`, with `steps` RK4 steps split
/// evenly across its pieces (earlier pieces take the remainder).
pub fn coordinate_transport(chart: &ManifoldChart, path: &SmoothPath, steps: usize) -> Result<Mat> {
    if steps < MIN_STEPS {
        return Err(Error::InvalidInput(format!(
            "at least {MIN_STEPS} ODE steps are required, got {steps}"
        )));
    }
    if path.dim() != chart.dim() {
        return Err(Error::DimensionMismatch {
            expected: chart.dim(),
            found: path.dim(),
        });
    }
    let m = path.pieces().len();
    let mut p = Mat::identity(chart.dim(), chart.dim());
    for (i, piece) in path.pieces().iter().enumerate() {
        let n = steps / m + usize::from(i < steps % m);
        p = rk4_piece(chart, piece, n.max(1), p)?;
    }
    Ok(p)
}

/// Parallel transport along `path`, expressed in orthonormal frames at
/// both ends. Fails with `StepTooCoarse` when the raw result is further
/// than [`MAX_DEFECT`] from orthogonal.
pub fn parallel_transport(chart: &ManifoldChart, path: &SmoothPath, steps: usize) -> Result<Transport> {
    let coordinate = coordinate_transport(chart, path, steps)?;
    let f_start = orthonormal_frame(chart, &path.start())?;
    let f_end = orthonormal_frame(chart, &path.end())?;
    let f_end_inv = f_end
        .try_inverse()
        .ok_or_else(|| Error::MetricNotInvertible { point: path.end() })?;
    let matrix = f_end_inv * &coordinate * f_start;
    let defect = orthogonality_residual(&matrix);
    if !(defect <= MAX_DEFECT) {
        return Err(Error::StepTooCoarse { defect });
    }
    Ok(Transport {
        matrix,
        coordinate,
        defect,
        steps,
    })
}

/// One letter of a loop word: a generator loop or its reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Letter {
    pub generator: usize,
    pub inverse: bool,
}

/// Holonomy of one closed loop at `base_point`, in the orthonormal frame
/// there. `matrix` is the polar-corrected transport; `orthogonality_defect`
/// is the raw defect before correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolonomySample {
    pub base_point: Vec<f64>,
    #[serde(rename = "loop")]
    pub loop_path: SmoothPath,
    #[serde(with = "mat_serde")]
    pub matrix: Mat,
    pub ode_steps: usize,
    pub orthogonality_defect: f64,
    /// Generator word this sample realizes (a single letter for generators).
    pub word: Vec<Letter>,
}

fn check_based_loop(p: &[f64], l: &SmoothPath) -> Result<()> {
    if !l.is_closed() {
        return Err(Error::InvalidInput("holonomy needs closed loops".into()));
    }
    let start = l.start();
    if start.len() != p.len() || start.iter().zip(p).any(|(a, b)| (a - b).abs() > CLOSURE_TOL) {
        return Err(Error::InvalidInput("loop is not based at the requested point".into()));
    }
    Ok(())
}

/// Holonomy matrices of `loops` at `p`. With `word_length ≥ 2` the set is
/// closed under free-reduced words of that length in the loops and their
/// reverses; otherwise only the loops themselves are returned.
pub fn holonomy_samples(
    chart: &ManifoldChart,
    p: &[f64],
    loops: &[SmoothPath],
    steps: usize,
    word_length: usize,
) -> Result<Vec<HolonomySample>> {
    for l in loops {
        check_based_loop(p, l)?;
    }
    let generators = loops
        .par_iter()
        .enumerate()
        .map(|(g, l)| {
            let t = parallel_transport(chart, l, steps)?;
            Ok(HolonomySample {
                base_point: p.to_vec(),
                loop_path: l.clone(),
                matrix: polar_orthogonal(&t.matrix),
                ode_steps: steps,
                orthogonality_defect: t.defect,
                word: vec![Letter {
                    generator: g,
                    inverse: false,
                }],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if word_length < 2 {
        return Ok(generators);
    }
    close_under_words(&generators, word_length)
}

fn letter_sample(generators: &[HolonomySample], l: Letter) -> (Mat, SmoothPath) {
    let g = &generators[l.generator];
    if l.inverse {
        (g.matrix.transpose(), g.loop_path.reversed())
    } else {
        (g.matrix.clone(), g.loop_path.clone())
    }
}

/// All free-reduced words of length `1..=max_len` over the generators and
/// their inverses, in length-then-lexicographic order. Traversing `a`
/// then `b` has holonomy `M_b·M_a`.
pub fn close_under_words(generators: &[HolonomySample], max_len: usize) -> Result<Vec<HolonomySample>> {
    let alphabet: Vec<Letter> = (0..generators.len())
        .flat_map(|g| [false, true].map(|inverse| Letter { generator: g, inverse }))
        .collect();
    let mut words: Vec<Vec<Letter>> = alphabet.iter().map(|l| vec![*l]).collect();
    let mut frontier = words.clone();
    for _ in 1..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            let last = w[w.len() - 1];
            for l in &alphabet {
                if l.generator == last.generator && l.inverse != last.inverse {
                    continue;
                }
                let mut nw = w.clone();
                nw.push(*l);
                next.push(nw);
            }
        }
        words.extend(next.iter().cloned());
        frontier = next;
    }
    words
        .into_par_iter()
        .map(|word| {
            let (mut matrix, mut path) = letter_sample(generators, word[0]);
            let mut steps = generators[word[0].generator].ode_steps;
            let mut defect = generators[word[0].generator].orthogonality_defect;
            for l in &word[1..] {
                let (m, p) = letter_sample(generators, *l);
                matrix = m * matrix;
                path = path.concat(&p)?;
                steps += generators[l.generator].ode_steps;
                defect = defect.max(generators[l.generator].orthogonality_defect);
            }
            Ok(HolonomySample {
                base_point: generators[word[0].generator].base_point.clone(),
                loop_path: path,
                matrix,
                ode_steps: steps,
                orthogonality_defect: defect,
                word,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    CoordinateRectangles,
    FourierRandom,
}

impl std::str::FromStr for LoopKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coordinate_rectangles" | "rectangles" => Ok(LoopKind::CoordinateRectangles),
            "fourier_random" | "fourier" => Ok(LoopKind::FourierRandom),
            _ => Err(Error::InvalidInput(format!("unknown loop kind `{s}`"))),
        }
    }
}

fn rectangle(p: &[f64], i: usize, j: usize, si: f64, sj: f64) -> Result<SmoothPath> {
    let mut a = p.to_vec();
    a[i] += si;
    let mut b = a.clone();
    b[j] += sj;
    let mut c = p.to_vec();
    c[j] += sj;
    SmoothPath::polyline(&[p.to_vec(), a, b, c, p.to_vec()])
}

/// `count` closed loops based at `p`.
///
/// Rectangles cycle through the axis pairs `(i, j)`, `i < j`, in order; pass
/// `c` over the pairs uses the quadrant `(±scale, ±scale)` selected by
/// `c mod 4`. Fourier loops carry three harmonics with per-harmonic
/// coefficient norm at most `scale / k`.
pub fn loop_family(
    chart: &ManifoldChart,
    p: &[f64],
    kind: LoopKind,
    count: usize,
    scale: f64,
    seed: u64,
) -> Result<Vec<SmoothPath>> {
    let d = chart.dim();
    if p.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p.len(),
        });
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidInput("loop scale must be positive".into()));
    }
    if !chart.contains(p, 2.0 * FD_STEP) {
        return Err(Error::OutsideDomain { point: p.to_vec() });
    }
    let loops: Vec<SmoothPath> = match kind {
        LoopKind::CoordinateRectangles => {
            let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
            const QUADRANTS: [(f64, f64); 4] = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
            (0..count)
                .map(|c| {
                    let (i, j) = pairs[c % pairs.len()];
                    let (si, sj) = QUADRANTS[(c / pairs.len()) % 4];
                    rectangle(p, i, j, si * scale, sj * scale)
                })
                .collect::<Result<_>>()?
        }
        LoopKind::FourierRandom => {
            let mut rng = seeded_rng(seed);
            let norm = scale / (d as f64).sqrt();
            (0..count)
                .map(|_| {
                    let mut coeffs = |k: usize| -> Vec<f64> {
                        (0..d).map(|_| rng.random_range(-1.0..1.0) * norm / k as f64).collect()
                    };
                    let mut sin = Vec::new();
                    let mut cos = Vec::new();
                    for k in 1..=3 {
                        sin.push(coeffs(k));
                        cos.push(coeffs(k));
                    }
                    SmoothPath::new(vec![PathPiece::Fourier {
                        base: p.to_vec(),
                        sin,
                        cos,
                    }])
                })
                .collect::<Result<_>>()?
        }
    };
    for l in &loops {
        if !l.sample(257).all(|x| chart.contains(&x, 2.0 * FD_STEP)) {
            return Err(Error::LoopEscapesDomain);
        }
    }
    Ok(loops)
}
