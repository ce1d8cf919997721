use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Endpoints closer than this count as the same point.
pub const CLOSURE_TOL: f64 = 1e-12;

/// One analytic piece of a path, parametrized by `s ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathPiece {
    Segment {
        from: Vec<f64>,
        to: Vec<f64>,
    },
    /// `center + radius·(cos θ e_a + sin θ e_b)` with θ running linearly
    /// from `start_angle` to `end_angle`.
    Arc {
        center: Vec<f64>,
        radius: f64,
        axes: [usize; 2],
        start_angle: f64,
        end_angle: f64,
    },
    /// `base + Σ_k sin_k·sin(2πks) + cos_k·(cos(2πks) − 1)`, closed and
    /// passing through `base` at `s = 0`.
    Fourier {
        base: Vec<f64>,
        sin: Vec<Vec<f64>>,
        cos: Vec<Vec<f64>>,
    },
}

impl PathPiece {
    pub fn dim(&self) -> usize {
        match self {
            PathPiece::Segment { from, .. } => from.len(),
            PathPiece::Arc { center, .. } => center.len(),
            PathPiece::Fourier { base, .. } => base.len(),
        }
    }

    fn check(&self) -> Result<()> {
        let d = self.dim();
        let bad = |msg: &str| Err(Error::InvalidInput(format!("path piece: {msg}")));
        match self {
            PathPiece::Segment { to, .. } if to.len() != d => bad("segment endpoints differ in length"),
            PathPiece::Arc { axes, radius, .. } => {
                if axes[0] >= d || axes[1] >= d || axes[0] == axes[1] {
                    bad("arc axes must be two distinct coordinates")
                } else if !radius.is_finite() {
                    bad("arc radius must be finite")
                } else {
                    Ok(())
                }
            }
            PathPiece::Fourier { sin, cos, .. } => {
                if sin.len() != cos.len() || sin.iter().chain(cos).any(|c| c.len() != d) {
                    bad("fourier coefficients must match the base dimension")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn point(&self, s: f64) -> Vec<f64> {
        match self {
            PathPiece::Segment { from, to } => from.iter().zip(to).map(|(a, b)| a + s * (b - a)).collect(),
            PathPiece::Arc {
                center,
                radius,
                axes,
                start_angle,
                end_angle,
            } => {
                let th = start_angle + s * (end_angle - start_angle);
                let mut x = center.clone();
                x[axes[0]] += radius * th.cos();
                x[axes[1]] += radius * th.sin();
                x
            }
            PathPiece::Fourier { base, sin, cos } => {
                let mut x = base.clone();
                for (k, (a, b)) in sin.iter().zip(cos).enumerate() {
                    let w = TAU * (k + 1) as f64 * s;
                    let (sw, cw) = (w.sin(), w.cos() - 1.0);
                    for i in 0..x.len() {
                        x[i] += a[i] * sw + b[i] * cw;
                    }
                }
                x
            }
        }
    }

    /// Derivative with respect to the local parameter `s`.
    pub fn velocity(&self, s: f64) -> Vec<f64> {
        match self {
            PathPiece::Segment { from, to } => to.iter().zip(from).map(|(b, a)| b - a).collect(),
            PathPiece::Arc {
                center,
                radius,
                axes,
                start_angle,
                end_angle,
            } => {
                let span = end_angle - start_angle;
                let th = start_angle + s * span;
                let mut v = vec![0.0; center.len()];
                v[axes[0]] = -radius * span * th.sin();
                v[axes[1]] = radius * span * th.cos();
                v
            }
            PathPiece::Fourier { base, sin, cos } => {
                let mut v = vec![0.0; base.len()];
                for (k, (a, b)) in sin.iter().zip(cos).enumerate() {
                    let f = TAU * (k + 1) as f64;
                    let w = f * s;
                    let (sw, cw) = (f * w.cos(), -f * w.sin());
                    for i in 0..v.len() {
                        v[i] += a[i] * sw + b[i] * cw;
                    }
                }
                v
            }
        }
    }

    pub fn reversed(&self) -> PathPiece {
        match self {
            PathPiece::Segment { from, to } => PathPiece::Segment {
                from: to.clone(),
                to: from.clone(),
            },
            PathPiece::Arc {
                center,
                radius,
                axes,
                start_angle,
                end_angle,
            } => PathPiece::Arc {
                center: center.clone(),
                radius: *radius,
                axes: *axes,
                start_angle: *end_angle,
                end_angle: *start_angle,
            },
            PathPiece::Fourier { base, sin, cos } => PathPiece::Fourier {
                base: base.clone(),
                sin: sin.iter().map(|a| a.iter().map(|v| -v).collect()).collect(),
                cos: cos.clone(),
            },
        }
    }
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// A continuous piecewise-analytic path. Piece `i` of `m` occupies the
/// global parameter interval `[i/m, (i+1)/m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPath", into = "RawPath")]
pub struct SmoothPath {
    pieces: Vec<PathPiece>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPath {
    pieces: Vec<PathPiece>,
}

impl TryFrom<RawPath> for SmoothPath {
    type Error = Error;
    fn try_from(raw: RawPath) -> Result<Self> {
        SmoothPath::new(raw.pieces)
    }
}

impl From<SmoothPath> for RawPath {
    fn from(p: SmoothPath) -> Self {
        RawPath { pieces: p.pieces }
    }
}

impl SmoothPath {
    pub fn new(pieces: Vec<PathPiece>) -> Result<Self> {
        let first = pieces
            .first()
            .ok_or_else(|| Error::InvalidInput("a path needs at least one piece".into()))?;
        let d = first.dim();
        for p in &pieces {
            p.check()?;
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.dim(),
                });
            }
        }
        for w in pieces.windows(2) {
            let gap = max_gap(&w[0].point(1.0), &w[1].point(0.0));
            if gap > CLOSURE_TOL {
                return Err(Error::InvalidInput(format!("path pieces do not join (gap {gap:.3e})")));
            }
        }
        Ok(SmoothPath { pieces })
    }

    /// Piecewise-linear path through `points`.
    pub fn polyline(points: &[Vec<f64>]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("a polyline needs two points".into()));
        }
        SmoothPath::new(
            points
                .windows(2)
                .map(|w| PathPiece::Segment {
                    from: w[0].clone(),
                    to: w[1].clone(),
                })
                .collect(),
        )
    }

    pub fn pieces(&self) -> &[PathPiece] {
        &self.pieces
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].dim()
    }

    pub fn start(&self) -> Vec<f64> {
        self.pieces[0].point(0.0)
    }

    pub fn end(&self) -> Vec<f64> {
        self.pieces[self.pieces.len() - 1].point(1.0)
    }

    pub fn is_closed(&self) -> bool {
        max_gap(&self.start(), &self.end()) <= CLOSURE_TOL
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let m = self.pieces.len();
        let u = t.clamp(0.0, 1.0) * m as f64;
        let i = (u.floor() as usize).min(m - 1);
        (i, u - i as f64)
    }

    pub fn point(&self, t: f64) -> Vec<f64> {
        let (i, s) = self.locate(t);
        self.pieces[i].point(s)
    }

    /// Derivative with respect to the global parameter `t`.
    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let (i, s) = self.locate(t);
        let m = self.pieces.len() as f64;
        self.pieces[i].velocity(s).into_iter().map(|v| v * m).collect()
    }

    pub fn reversed(&self) -> SmoothPath {
        SmoothPath {
            pieces: self.pieces.iter().rev().map(PathPiece::reversed).collect(),
        }
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &SmoothPath) -> Result<SmoothPath> {
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        SmoothPath::new(pieces)
    }

    /// `count` points per piece, including piece endpoints.
    pub fn sample(&self, count: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
        let count = count.max(2);
        self.pieces
            .iter()
            .flat_map(move |p| (0..count).map(move |k| p.point(k as f64 / (count - 1) as f64)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fourier() -> PathPiece {
        PathPiece::Fourier {
            base: vec![0.1, 0.2],
            sin: vec![vec![0.3, -0.1], vec![0.05, 0.02]],
            cos: vec![vec![0.1, 0.2], vec![-0.04, 0.01]],
        }
    }

    #[test]
    fn fourier_piece_is_closed_at_base() {
        let p = SmoothPath::new(vec![fourier()]).unwrap();
        assert!(p.is_closed());
        assert_eq!(p.start(), vec![0.1, 0.2]);
    }

    #[test]
    fn velocities_match_finite_differences() {
        let arc = PathPiece::Arc {
            center: vec![0.0, 0.0, 1.0],
            radius: 0.7,
            axes: [2, 0],
            start_angle: 0.3,
            end_angle: 2.0,
        };
        for piece in [fourier(), arc] {
            for s in [0.1, 0.5, 0.9] {
                let h = 1e-6;
                let a = piece.point(s + h);
                let b = piece.point(s - h);
                let v = piece.velocity(s);
                for i in 0..v.len() {
                    assert!(((a[i] - b[i]) / (2.0 * h) - v[i]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn reversal_runs_backwards() {
        let arc = PathPiece::Arc {
            center: vec![0.0, 0.0],
            radius: 1.0,
            axes: [0, 1],
            start_angle: 0.0,
            end_angle: 1.0,
        };
        let path = SmoothPath::new(vec![
            PathPiece::Segment {
                from: vec![0.0, 0.0],
                to: vec![1.0, 0.0],
            },
            arc,
        ])
        .unwrap();
        let rev = path.reversed();
        for t in [0.0, 0.2, 0.5, 0.77, 1.0] {
            assert!(max_gap(&path.point(t), &rev.point(1.0 - t)) < 1e-15);
        }
        let mut f = fourier().reversed();
        f = f.reversed();
        assert_eq!(f, fourier());
    }

    #[test]
    fn disjoint_pieces_are_rejected() {
        let err = SmoothPath::new(vec![
            PathPiece::Segment {
                from: vec![0.0],
                to: vec![1.0],
            },
            PathPiece::Segment {
                from: vec![1.1],
                to: vec![0.0],
            },
        ]);
        assert!(err.is_err());
    }

    #[test]
    fn serde_round_trip() {
        let p = SmoothPath::new(vec![fourier()]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"type\":\"fourier\""));
        let back: SmoothPath = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn global_parameter_splits_evenly() {
        let p = SmoothPath::polyline(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(p.point(0.25), vec![0.5]);
        assert_eq!(p.point(0.75), vec![2.0]);
        assert_eq!(p.velocity(0.75), vec![4.0]);
    }
}
