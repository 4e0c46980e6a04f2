//! Coil fields (Biot-Savart over polygonal current loops), uniform field
//! commands, and the force and torque a field exerts on a magnetized particle.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{wrap_angle, ParticleParams, MU0};
use crate::units::MM;

/// Relative distance (in units of segment length) below which a point counts
/// as lying on a wire.
const ON_WIRE_REL: f64 = 1e-6;
/// Central-difference step for field gradients, relative to the rig's
/// characteristic length.
const GRADIENT_STEP_REL: f64 = 1e-4;

/// A closed polyline carrying a current. The last vertex repeats the first.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentLoop {
    pub vertices: Vec<Vector3<f64>>,
    /// A
    pub current: f64,
}

impl CurrentLoop {
    /// Circular loop discretized as an inscribed regular polygon. The current
    /// circulates counterclockwise about `normal`.
    pub fn circle(
        center: Vector3<f64>,
        normal: Vector3<f64>,
        radius: f64,
        segments: usize,
        current: f64,
    ) -> Result<Self> {
        if segments < 3 {
            return Err(Error::Geometry(format!(
                "a loop needs at least 3 segments, got {segments}"
            )));
        }
        if !(radius > 0.0) || normal.norm() == 0.0 {
            return Err(Error::Geometry("loop radius and normal must be non-zero".into()));
        }
        let n = normal.normalize();
        // Any vector not parallel to n seeds the in-plane basis.
        let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = (seed - n * n.dot(&seed)).normalize();
        let e2 = n.cross(&e1);
        let mut vertices: Vec<_> = (0..segments)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / segments as f64;
                center + radius * (a.cos() * e1 + a.sin() * e2)
            })
            .collect();
        vertices.push(vertices[0]);
        Ok(Self { vertices, current })
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.len() < 4 {
            return Err(Error::Geometry(format!(
                "loop needs at least 3 distinct vertices plus the closing vertex, got {}",
                self.vertices.len()
            )));
        }
        if self.vertices.first() != self.vertices.last() {
            return Err(Error::Geometry(
                "loop is not closed: first vertex != last vertex".into(),
            ));
        }
        if !self.current.is_finite() || self.vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Geometry("loop contains non-finite values".into()));
        }
        Ok(())
    }

    fn segments(&self) -> impl Iterator<Item = (Vector3<f64>, Vector3<f64>)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    fn centroid(&self) -> Vector3<f64> {
        let open = &self.vertices[..self.vertices.len() - 1];
        open.iter().sum::<Vector3<f64>>() / open.len() as f64
    }

    fn mean_radius(&self) -> f64 {
        let c = self.centroid();
        let open = &self.vertices[..self.vertices.len() - 1];
        open.iter().map(|v| (v - c).norm()).sum::<f64>() / open.len() as f64
    }

    /// Field of this loop at `point`, T.
    fn field(&self, point: &Vector3<f64>) -> Result<Vector3<f64>> {
        let mut b = Vector3::zeros();
        for (a, c) in self.segments() {
            b += segment_field(&a, &c, self.current, point)?;
        }
        Ok(b)
    }
}

/// Exact field of a straight segment from `a` to `b` (the Biot-Savart
/// integral of µ0/4π · I dl × r̂ / |r|² along the segment).
fn segment_field(a: &Vector3<f64>, b: &Vector3<f64>, current: f64, p: &Vector3<f64>) -> Result<Vector3<f64>> {
    let dl = b - a;
    let len = dl.norm();
    if len == 0.0 {
        return Ok(Vector3::zeros());
    }
    let r1 = p - a;
    let r2 = p - b;
    // distance from p to the closed segment
    let s = (r1.dot(&dl) / (len * len)).clamp(0.0, 1.0);
    let dist = (r1 - s * dl).norm();
    if dist <= ON_WIRE_REL * len {
        return Err(Error::Singularity { distance: dist });
    }
    let n1 = r1.norm();
    let n2 = r2.norm();
    let cross = r1.cross(&r2);
    let denom = n1 * n2 * (n1 * n2 + r1.dot(&r2));
    if denom <= 0.0 {
        // p on the line extension beyond the segment: the field vanishes there
        return Ok(Vector3::zeros());
    }
    Ok(MU0 / (4.0 * PI) * current * (n1 + n2) / denom * cross)
}

/// A set of current loops, e.g. the four in-plane steering coils.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilRig {
    pub loops: Vec<CurrentLoop>,
}

impl CoilRig {
    pub fn new(loops: Vec<CurrentLoop>) -> Result<Self> {
        let rig = Self { loops };
        for l in &rig.loops {
            l.validate()?;
        }
        Ok(rig)
    }

    /// Four identical circular coils centred at ±X and ±Y, each facing the
    /// origin. Positive current in either X coil produces +x field at the
    /// origin; likewise for the Y pair. Loop order: +X, −X, +Y, −Y.
    pub fn four_coil(coil_radius: f64, center_distance: f64, segments: usize) -> Result<Self> {
        if center_distance <= coil_radius {
            return Err(Error::Geometry(
                "coil centre distance must exceed the coil radius".into(),
            ));
        }
        let d = center_distance;
        let specs = [
            (Vector3::new(d, 0.0, 0.0), Vector3::x()),
            (Vector3::new(-d, 0.0, 0.0), Vector3::x()),
            (Vector3::new(0.0, d, 0.0), Vector3::y()),
            (Vector3::new(0.0, -d, 0.0), Vector3::y()),
        ];
        let loops = specs
            .iter()
            .map(|(c, n)| CurrentLoop::circle(*c, *n, coil_radius, segments, 0.0))
            .collect::<Result<Vec<_>>>()?;
        Self::new(loops)
    }

    /// 10 mm coils centred 30 mm from the workspace origin, 128-gons.
    pub fn default_four_coil() -> Self {
        Self::four_coil(10.0 * MM, 30.0 * MM, 128).expect("default rig geometry is valid")
    }

    pub fn with_currents(&self, currents: &[f64]) -> Result<Self> {
        if currents.len() != self.loops.len() {
            return Err(Error::Domain(format!(
                "expected {} currents, got {}",
                self.loops.len(),
                currents.len()
            )));
        }
        let loops = self
            .loops
            .iter()
            .zip(currents)
            .map(|(l, &i)| CurrentLoop {
                vertices: l.vertices.clone(),
                current: i,
            })
            .collect();
        Ok(Self { loops })
    }

    pub fn currents(&self) -> Vec<f64> {
        self.loops.iter().map(|l| l.current).collect()
    }

    /// Smallest mean loop radius in the rig, m.
    pub fn characteristic_length(&self) -> f64 {
        self.loops
            .iter()
            .map(CurrentLoop::mean_radius)
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks that no wire passes within `workspace_radius` of the origin,
    /// where particles live.
    pub fn check_clearance(&self, workspace_radius: f64) -> Result<()> {
        let origin = Vector3::zeros();
        for (i, l) in self.loops.iter().enumerate() {
            for (a, b) in l.segments() {
                let dl = b - a;
                let s = if dl.norm_squared() > 0.0 {
                    ((origin - a).dot(&dl) / dl.norm_squared()).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let dist = (a + s * dl).norm();
                if dist <= workspace_radius {
                    return Err(Error::Geometry(format!(
                        "loop {i} passes {dist:e} m from the origin, inside the workspace radius {workspace_radius:e} m"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Flux density at `point`, T.
    pub fn field_at(&self, point: &Vector3<f64>) -> Result<Vector3<f64>> {
        if self.loops.is_empty() {
            return Err(Error::Domain("coil rig has no loops".into()));
        }
        let mut b = Vector3::zeros();
        for l in &self.loops {
            b += l.field(point)?;
        }
        Ok(b)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: RigFile = serde_json::from_str(text)?;
        let loops = file
            .loops
            .into_iter()
            .map(|l| CurrentLoop {
                vertices: l
                    .vertices_mm
                    .iter()
                    .map(|v| Vector3::new(v[0], v[1], v[2]) * MM)
                    .collect(),
                current: l.current_a,
            })
            .collect();
        Self::new(loops)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = RigFile {
            loops: self
                .loops
                .iter()
                .map(|l| LoopFile {
                    vertices_mm: l.vertices.iter().map(|v| [v.x / MM, v.y / MM, v.z / MM]).collect(),
                    current_a: l.current,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RigFile {
    loops: Vec<LoopFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoopFile {
    vertices_mm: Vec<[f64; 3]>,
    #[serde(rename = "current_A")]
    current_a: f64,
}

/// Flux density at a point, optionally with its spatial gradient
/// `grad_b[(i, j)] = ∂B_i/∂x_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub b: Vector3<f64>,
    pub grad_b: Option<Matrix3<f64>>,
}

impl FieldSample {
    /// ∇·B from the gradient, if present.
    pub fn divergence(&self) -> Option<f64> {
        self.grad_b.map(|g| g.trace())
    }
}

/// Field and central-difference gradient of the rig at `point`.
pub fn biot_savart(rig: &CoilRig, point: &Vector3<f64>) -> Result<FieldSample> {
    let b = rig.field_at(point)?;
    let h = GRADIENT_STEP_REL * rig.characteristic_length();
    let mut grad = Matrix3::zeros();
    for j in 0..3 {
        let mut e = Vector3::zeros();
        e[j] = h;
        let col = (rig.field_at(&(point + e))? - rig.field_at(&(point - e))?) / (2.0 * h);
        grad.set_column(j, &col);
    }
    Ok(FieldSample { b, grad_b: Some(grad) })
}

/// Commanded uniform in-plane field: direction `angle`, strength `magnitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldCommand {
    /// rad
    pub angle: f64,
    /// T
    pub magnitude: f64,
}

impl FieldCommand {
    pub fn new(angle: f64, magnitude: f64) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::Domain(format!("field angle must be finite, got {angle}")));
        }
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(Error::Domain(format!("field magnitude must be >= 0, got {magnitude}")));
        }
        Ok(Self {
            angle: wrap_angle(angle),
            magnitude,
        })
    }

    pub fn direction(&self) -> Vector2<f64> {
        Vector2::new(self.angle.cos(), self.angle.sin())
    }
}

pub fn command_to_field(cmd: &FieldCommand) -> FieldSample {
    let u = cmd.direction();
    FieldSample {
        b: Vector3::new(cmd.magnitude * u.x, cmd.magnitude * u.y, 0.0),
        grad_b: Some(Matrix3::zeros()),
    }
}

/// Minimum-norm coil currents that produce the commanded in-plane field at
/// the origin.
pub fn rig_currents_for_direction(rig: &CoilRig, cmd: &FieldCommand) -> Result<Vec<f64>> {
    let origin = Vector3::zeros();
    let n = rig.loops.len();
    if n == 0 {
        return Err(Error::Domain("coil rig has no loops".into()));
    }
    // Columns: in-plane field per unit current in each loop.
    let mut cols = Vec::with_capacity(n);
    for l in &rig.loops {
        let unit = CurrentLoop {
            vertices: l.vertices.clone(),
            current: 1.0,
        };
        let b = unit.field(&origin)?;
        cols.push(Vector2::new(b.x, b.y));
    }
    let mut gram = Matrix2::zeros();
    for c in &cols {
        gram += c * c.transpose();
    }
    let tr = gram.trace();
    let det = gram.determinant();
    if !(tr > 0.0) || det <= 1e-12 * tr * tr {
        return Err(Error::Geometry(
            "rig cannot produce an arbitrary in-plane field at the origin (rank < 2)".into(),
        ));
    }
    let target = cmd.magnitude * cmd.direction();
    let lambda = gram
        .try_inverse()
        .ok_or_else(|| Error::Geometry("singular field matrix".into()))?
        * target;
    Ok(cols.iter().map(|c| c.dot(&lambda)).collect())
}

/// Angle of the particle's dipole axis in the workspace frame. The
/// propulsion axis sits `φ` counterclockwise from the dipole, so a
/// field-aligned particle swims along `field.angle + φ`.
pub fn dipole_angle(params: &ParticleParams, heading: f64) -> f64 {
    heading - params.dipole_offset_phi
}

/// Out-of-plane magnetic torque d·B·sin(field angle − dipole angle), N·m.
pub fn magnetic_torque(params: &ParticleParams, heading: f64, field: &FieldCommand) -> f64 {
    params.dipole_moment * field.magnitude * (field.angle - dipole_angle(params, heading)).sin()
}

/// In-plane part of (d·m̂·∇)B, N. Zero for any uniform field.
pub fn magnetic_force(params: &ParticleParams, heading: f64, field: &FieldSample) -> Result<Vector2<f64>> {
    let grad = field
        .grad_b
        .ok_or_else(|| Error::Domain("magnetic force needs the field gradient".into()))?;
    let a = dipole_angle(params, heading);
    let m = params.dipole_moment * Vector3::new(a.cos(), a.sin(), 0.0);
    let f = grad * m;
    Ok(Vector2::new(f.x, f.y))
}
