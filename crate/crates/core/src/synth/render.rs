//! Articulated stick-walker projection and capsule rasterization.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::walker::WalkerParams;
use crate::data::{Attire, Direction, SequenceMeta, SilhouetteSequence, FRAME_HEIGHT, FRAME_WIDTH};
use crate::error::{Error, Result};

const FPS: f64 = 30.0;
const BODY_HEIGHT_M: f64 = 1.7;
const PIXELS_PER_BODY: f64 = 48.0;
const GROUND_ROW: f64 = 58.5;
const PATH_NEAR_M: f64 = 1.5;
const PATH_FAR_M: f64 = 7.5;
const SIDE_DISTANCE_M: f64 = 3.0;
const TORSO_CENTRE_M: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraView {
    pub view_id: u8,
    /// 0° faces the walking path head-on, 90° is a pure side view.
    pub azimuth_deg: f64,
    pub height_m: f64,
}

impl CameraView {
    /// Three azimuth groups along the front-to-side arc, each with a high and a low camera.
    pub fn from_id(view_id: u8) -> Result<Self> {
        let (azimuth_deg, height_m) = match view_id {
            1 => (10.0, 3.5),
            2 => (10.0, 2.5),
            3 => (45.0, 3.5),
            4 => (45.0, 2.5),
            5 => (80.0, 3.5),
            6 => (80.0, 2.5),
            _ => return Err(Error::InvalidArgument(format!("view_id {view_id} outside 1..=6"))),
        };
        Ok(Self {
            view_id,
            azimuth_deg,
            height_m,
        })
    }

    pub fn all() -> Vec<CameraView> {
        (1..=6).map(|v| Self::from_id(v).unwrap()).collect()
    }
}

/// Everything that varies between the sequences of one subject.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shot {
    pub view: CameraView,
    pub attire: Attire,
    pub direction: Direction,
    pub frames: usize,
    /// Gait phase at frame 0, radians.
    pub phase: f64,
}

#[derive(Clone, Copy, Debug)]
struct P3 {
    fwd: f64,
    lat: f64,
    up: f64,
}

impl P3 {
    fn new(fwd: f64, lat: f64, up: f64) -> Self {
        Self { fwd, lat, up }
    }
    fn add(self, o: P3) -> P3 {
        P3::new(self.fwd + o.fwd, self.lat + o.lat, self.up + o.up)
    }
    fn scale(self, s: f64) -> P3 {
        P3::new(self.fwd * s, self.lat * s, self.up * s)
    }
}

/// Unit vector in the sagittal plane at `angle` from straight down, positive forward.
fn limb_dir(angle: f64) -> P3 {
    P3::new(angle.sin(), 0.0, -angle.cos())
}

#[derive(Clone, Copy, Debug)]
enum Shape {
    Capsule { a: (f64, f64), b: (f64, f64), r: f64 },
    Ellipse { c: (f64, f64), rx: f64, ry: f64 },
}

impl Shape {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Shape::Capsule { a, b, r } => (a.0.min(b.0) - r, a.1.min(b.1) - r, a.0.max(b.0) + r, a.1.max(b.1) + r),
            Shape::Ellipse { c, rx, ry } => (c.0 - rx, c.1 - ry, c.0 + rx, c.1 + ry),
        }
    }

    fn transformed(&self, s: f64, from: (f64, f64), to: (f64, f64)) -> Shape {
        let m = |p: (f64, f64)| ((p.0 - from.0) * s + to.0, (p.1 - from.1) * s + to.1);
        match *self {
            Shape::Capsule { a, b, r } => Shape::Capsule {
                a: m(a),
                b: m(b),
                r: r * s,
            },
            Shape::Ellipse { c, rx, ry } => Shape::Ellipse {
                c: m(c),
                rx: rx * s,
                ry: ry * s,
            },
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Capsule { a, b, r } => {
                let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                let len2 = dx * dx + dy * dy;
                let t = if len2 > 0.0 {
                    (((x - a.0) * dx + (y - a.1) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (px, py) = (a.0 + t * dx - x, a.1 + t * dy - y);
                px * px + py * py <= r * r
            }
            Shape::Ellipse { c, rx, ry } => {
                let (u, v) = ((x - c.0) / rx, (y - c.1) / ry);
                u * u + v * v <= 1.0
            }
        }
    }
}

/// Orthographic camera with elevation; maps body-frame points to pixel coordinates.
struct Projector {
    right: (f64, f64),
    toward_cam: (f64, f64),
    cos_e: f64,
    sin_e: f64,
}

impl Projector {
    fn new(view: &CameraView, direction: Direction, distance_m: f64) -> Self {
        let a = view.azimuth_deg.to_radians();
        let s = match direction {
            Direction::Toward => 1.0,
            Direction::Away => -1.0,
        };
        let elevation = (view.height_m - TORSO_CENTRE_M).atan2(distance_m);
        Self {
            right: (a.sin(), -s * a.cos()),
            toward_cam: (s * a.cos(), a.sin()),
            cos_e: elevation.cos(),
            sin_e: elevation.sin(),
        }
    }

    fn px(&self, p: P3) -> (f64, f64) {
        let u = p.fwd * self.right.0 + p.lat * self.right.1;
        let depth = p.fwd * self.toward_cam.0 + p.lat * self.toward_cam.1;
        let v = p.up * self.cos_e - depth * self.sin_e;
        (
            FRAME_WIDTH as f64 / 2.0 + u * PIXELS_PER_BODY,
            GROUND_ROW - v * PIXELS_PER_BODY,
        )
    }

    /// Approximate image-plane half extents of an axis-aligned body-frame ellipsoid.
    fn ellipse_radii(&self, fwd: f64, lat: f64, up: f64) -> (f64, f64) {
        let rx = ((fwd * self.right.0).powi(2) + (lat * self.right.1).powi(2)).sqrt();
        let depth = ((fwd * self.toward_cam.0).powi(2) + (lat * self.toward_cam.1).powi(2)).sqrt();
        let ry = ((up * self.cos_e).powi(2) + (depth * self.sin_e).powi(2)).sqrt();
        (rx * PIXELS_PER_BODY, ry * PIXELS_PER_BODY)
    }
}

/// Horizontal camera distance at frame `t`; approaching or receding along the path
/// for frontal views, roughly constant for side views.
fn camera_distance(params: &WalkerParams, view: &CameraView, direction: Direction, t: usize) -> f64 {
    let travelled = params.walk_speed * BODY_HEIGHT_M * t as f64 / FPS;
    let along = match direction {
        Direction::Toward => (PATH_FAR_M - travelled).max(PATH_NEAR_M),
        Direction::Away => (PATH_NEAR_M + travelled).min(PATH_FAR_M),
    };
    let c = view.azimuth_deg.to_radians().cos();
    SIDE_DISTANCE_M + c * (along - SIDE_DISTANCE_M)
}

fn frame_shapes(params: &WalkerParams, shot: &Shot, t: usize) -> Vec<Shape> {
    let l = &params.limb_lengths;
    let period = params.gait_period;
    // Exact periodicity: the phase depends only on t mod period.
    let phase = 2.0 * PI * ((t as f64) % period) / period + shot.phase;
    let bob = params.head_bob_amplitude * (2.0 * phase).sin();
    let lean = params.posture_slump + 0.08 * params.walk_speed;
    let up_axis = P3::new(lean.sin(), 0.0, lean.cos());
    let proj = Projector::new(
        &shot.view,
        shot.direction,
        camera_distance(params, &shot.view, shot.direction, t),
    );

    let leg = params.leg_swing_amplitude;
    let arm = params.arm_swing_amplitude;
    let coat = shot.attire == Attire::Coat;
    let (torso_r, arm_r) = if coat { (0.105, 0.046) } else { (0.075, 0.035) };

    let hip = P3::new(0.0, 0.0, l.thigh + l.shin + bob);
    let neck = hip.add(up_axis.scale(l.torso));
    let head = neck.add(up_axis.scale(l.head_radius + 0.02));

    let mut shapes = Vec::with_capacity(16);
    let mut capsule = |a: P3, b: P3, r: f64| {
        shapes.push(Shape::Capsule {
            a: proj.px(a),
            b: proj.px(b),
            r: r * PIXELS_PER_BODY,
        })
    };

    capsule(hip, neck, torso_r);
    capsule(head, head, l.head_radius);
    capsule(neck, head, 0.03);
    if coat {
        // Coat hem hangs over the upper thighs.
        capsule(hip, hip.add(P3::new(0.0, 0.0, -0.12)), torso_r * 0.95);
    }

    for (side, offset) in [(1.0, 0.0), (-1.0, PI)] {
        let swing = phase + offset;
        let thigh_angle = leg * swing.sin();
        let knee_flex = 1.2 * leg * swing.cos().max(0.0);
        let hip_j = hip.add(P3::new(0.0, side * 0.07, 0.0));
        let knee = hip_j.add(limb_dir(thigh_angle).scale(l.thigh));
        let ankle = knee.add(limb_dir(thigh_angle - knee_flex).scale(l.shin));
        let toe = ankle.add(P3::new(0.07, 0.0, 0.0));
        capsule(hip_j, knee, 0.055);
        capsule(knee, ankle, 0.042);
        capsule(ankle, toe, 0.03);

        // Arms swing against the same-side leg.
        let arm_angle = arm * (swing + PI).sin();
        let elbow_flex = 0.25 * arm * (1.0 + (swing + PI).sin());
        let shoulder = hip
            .add(up_axis.scale(0.9 * l.torso))
            .add(P3::new(0.0, side * 0.11, 0.0));
        let elbow = shoulder.add(limb_dir(arm_angle).scale(l.upper_arm));
        let wrist = elbow.add(limb_dir(arm_angle + elbow_flex).scale(l.forearm));
        capsule(shoulder, elbow, arm_r);
        capsule(elbow, wrist, 0.03);
    }

    if shot.attire == Attire::Backpack {
        let centre = hip.add(up_axis.scale(0.6 * l.torso)).add(P3::new(
            -(torso_r + 0.06) * lean.cos(),
            0.0,
            (torso_r + 0.06) * lean.sin(),
        ));
        let (rx, ry) = proj.ellipse_radii(0.07, 0.09, 0.12);
        shapes.push(Shape::Ellipse {
            c: proj.px(centre),
            rx,
            ry,
        });
    }
    shapes
}

fn rasterize(shapes: &[Shape], out: &mut [u8]) -> Result<()> {
    let (h, w) = (FRAME_HEIGHT, FRAME_WIDTH);
    for s in shapes {
        let (x0, y0, x1, y1) = s.bounds();
        if x0 < 0.0 || y0 < 0.0 || x1 > w as f64 || y1 > h as f64 {
            return Err(Error::OutOfFrame(format!(
                "shape bounds ({x0:.1},{y0:.1})-({x1:.1},{y1:.1}) exceed {w}×{h}"
            )));
        }
        let (cx0, cx1) = ((x0.floor() as usize).min(w), (x1.ceil() as usize).min(w));
        let (cy0, cy1) = ((y0.floor() as usize).min(h), (y1.ceil() as usize).min(h));
        for y in cy0..cy1 {
            for x in cx0..cx1 {
                if out[y * w + x] == 0 && s.contains(x as f64 + 0.5, y as f64 + 0.5) {
                    out[y * w + x] = 1;
                }
            }
        }
    }
    Ok(())
}

const FRAME_MARGIN: f64 = 0.5;

/// One uniform scale and shift for the whole sequence, so every frame fits while
/// relative motion between frames is untouched. Identity when nothing overflows.
fn fit_to_frame(frames: &mut [Vec<Shape>]) {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for s in frames.iter().flatten() {
        let b = s.bounds();
        x0 = x0.min(b.0);
        y0 = y0.min(b.1);
        x1 = x1.max(b.2);
        y1 = y1.max(b.3);
    }
    let (lo_x, hi_x) = (FRAME_MARGIN, FRAME_WIDTH as f64 - FRAME_MARGIN);
    let (lo_y, hi_y) = (FRAME_MARGIN, FRAME_HEIGHT as f64 - FRAME_MARGIN);
    if x0 >= lo_x && y0 >= lo_y && x1 <= hi_x && y1 <= hi_y {
        return;
    }
    let s = ((hi_x - lo_x) / (x1 - x0)).min((hi_y - lo_y) / (y1 - y0)).min(1.0);
    let centre = |a: f64, b: f64, lo: f64, hi: f64| {
        let half = s * (b - a) / 2.0;
        ((a + b) / 2.0).clamp(lo + half, hi - half)
    };
    let from = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let to = (centre(x0, x1, lo_x, hi_x), centre(y0, y1, lo_y, hi_y));
    for shape in frames.iter_mut().flatten() {
        *shape = shape.transformed(s, from, to);
    }
}

/// Renders `shot.frames` binary 64×44 silhouettes of the walker.
pub fn render_sequence(params: &WalkerParams, shot: &Shot, subject_id: &str) -> Result<SilhouetteSequence> {
    params.validate()?;
    if shot.frames == 0 {
        return Err(Error::InvalidArgument("cannot render zero frames".into()));
    }
    let fs = FRAME_HEIGHT * FRAME_WIDTH;
    let mut shapes: Vec<Vec<Shape>> = (0..shot.frames).map(|t| frame_shapes(params, shot, t)).collect();
    fit_to_frame(&mut shapes);
    let mut pixels = vec![0u8; shot.frames * fs];
    for (frame, s) in pixels.chunks_mut(fs).zip(&shapes) {
        rasterize(s, frame)?;
    }
    SilhouetteSequence::new(
        pixels,
        shot.frames,
        FRAME_HEIGHT,
        FRAME_WIDTH,
        SequenceMeta {
            subject_id: subject_id.to_string(),
            view_id: shot.view.view_id,
            attire: shot.attire,
            direction: shot.direction,
        },
    )
}
