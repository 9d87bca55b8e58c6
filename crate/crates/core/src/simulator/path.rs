use nalgebra::Vector2;
use std::f64::consts::PI;

/// Boustrophedon survey path: parallel rows along y joined by semicircular
/// turns, parametrized by arclength. Turns are smooth so the heading (and
/// therefore the camera orientation) is continuous along the whole path.
#[derive(Debug, Clone)]
pub struct SurveyPath {
    segments: Vec<Segment>,
    /// x position of each survey row.
    rows: Vec<f64>,
    /// Arclength at the apex of each turn.
    turn_apexes: Vec<f64>,
    total_length: f64,
}

#[derive(Debug, Clone)]
enum Segment {
    Line {
        start: Vector2<f64>,
        dir: Vector2<f64>,
        len: f64,
    },
    Arc {
        center: Vector2<f64>,
        radius: f64,
        start_angle: f64,
        /// Signed sweep; positive is counterclockwise.
        sweep: f64,
    },
}

impl Segment {
    fn len(&self) -> f64 {
        match self {
            Segment::Line { len, .. } => *len,
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Position and unit tangent at arclength `s` into the segment.
    fn at(&self, s: f64) -> (Vector2<f64>, Vector2<f64>) {
        match self {
            Segment::Line { start, dir, .. } => (start + dir * s, *dir),
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let theta = start_angle + sweep.signum() * s / radius;
                let pos = center + *radius * Vector2::new(theta.cos(), theta.sin());
                let tangent =
                    sweep.signum() * Vector2::new(-theta.sin(), theta.cos());
                (pos, tangent)
            }
        }
    }
}

impl SurveyPath {
    /// Rows cover `0..=patch_x` at the given spacing; every row spans the full
    /// patch depth `patch_y`.
    pub fn new(patch: [f64; 2], row_spacing: f64) -> SurveyPath {
        let n_rows = (patch[0] / row_spacing).floor() as usize + 1;
        let rows: Vec<f64> = (0..n_rows).map(|i| i as f64 * row_spacing).collect();
        let radius = row_spacing / 2.0;

        let mut segments = Vec::new();
        let mut turn_apexes = Vec::new();
        let mut arclen = 0.0;
        for (i, &x) in rows.iter().enumerate() {
            let upward = i % 2 == 0;
            let (y0, dir) = if upward {
                (0.0, Vector2::new(0.0, 1.0))
            } else {
                (patch[1], Vector2::new(0.0, -1.0))
            };
            segments.push(Segment::Line {
                start: Vector2::new(x, y0),
                dir,
                len: patch[1],
            });
            arclen += patch[1];

            if i + 1 < rows.len() {
                // Semicircle joining this row's end to the next row's start.
                let y_end = if upward { patch[1] } else { 0.0 };
                let (start_angle, sweep) = if upward {
                    (PI, -PI) // bulge above the patch
                } else {
                    (PI, PI) // bulge below the patch
                };
                segments.push(Segment::Arc {
                    center: Vector2::new(x + radius, y_end),
                    radius,
                    start_angle,
                    sweep,
                });
                turn_apexes.push(arclen + radius * PI / 2.0);
                arclen += radius * PI;
            }
        }

        SurveyPath {
            segments,
            rows,
            turn_apexes,
            total_length: arclen,
        }
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn turn_apexes(&self) -> &[f64] {
        &self.turn_apexes
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Position and unit heading at arclength `s`, clamped to the path ends.
    pub fn at(&self, s: f64) -> (Vector2<f64>, Vector2<f64>) {
        let mut s = s.clamp(0.0, self.total_length);
        for seg in &self.segments {
            if s <= seg.len() {
                return seg.at(s);
            }
            s -= seg.len();
        }
        let last = self.segments.last().expect("path has segments");
        last.at(last.len())
    }
}
