use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Vec3;

/// Camera description as stored in camera JSON files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
    pub fov_y_deg: f64,
    pub width: usize,
    pub height: usize,
}

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

impl CameraSpec {
    /// Front view of the built-in scenes.
    pub fn front(resolution: usize) -> Self {
        CameraSpec {
            position: [0.0, 0.0, 3.0],
            look_at: [0.0, 0.0, 0.0],
            up: default_up(),
            fov_y_deg: 38.0,
            width: resolution,
            height: resolution,
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
    pub near: f64,
    pub far: f64,
    pub pixel: (usize, usize),
}

impl Ray {
    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// Pinhole camera. The basis columns are (right, up, back); the camera
/// looks down `-back`.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    position: Vec3,
    right: Vec3,
    up: Vec3,
    back: Vec3,
    fov_y: f64,
    width: usize,
    height: usize,
}

impl Camera {
    pub fn look_at(position: Vec3, target: Vec3, up: Vec3, fov_y: f64, width: usize, height: usize) -> Result<Self> {
        if !(fov_y > 0.0 && fov_y < std::f64::consts::PI) {
            return Err(Error::InvalidCamera(format!("fov {fov_y} rad outside (0, pi)")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidCamera("zero resolution".into()));
        }
        let back = position - target;
        if back.norm() < 1e-12 {
            return Err(Error::InvalidCamera("position equals look_at".into()));
        }
        let back = back.normalize();
        let right = up.cross(&back);
        if right.norm() < 1e-9 {
            return Err(Error::InvalidCamera("up is parallel to the view direction".into()));
        }
        let right = right.normalize();
        let up = back.cross(&right);
        Ok(Camera {
            position,
            right,
            up,
            back,
            fov_y,
            width,
            height,
        })
    }

    pub fn from_spec(spec: &CameraSpec) -> Result<Self> {
        Self::look_at(
            Vec3::from(spec.position),
            Vec3::from(spec.look_at),
            Vec3::from(spec.up),
            spec.fov_y_deg.to_radians(),
            spec.width,
            spec.height,
        )
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    /// Unit vector the camera looks along.
    pub fn forward(&self) -> Vec3 {
        -self.back
    }

    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        (self.right, self.up, self.back)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn fov_y(&self) -> f64 {
        self.fov_y
    }

    pub fn with_resolution(&self, width: usize, height: usize) -> Camera {
        Camera {
            width,
            height,
            ..self.clone()
        }
    }

    /// Camera rigidly rotated by `rot` about `pivot`.
    pub fn rotated_about(&self, pivot: &Vec3, rot: &Rotation3<f64>) -> Camera {
        Camera {
            position: pivot + rot * (self.position - pivot),
            right: rot * self.right,
            up: rot * self.up,
            back: rot * self.back,
            ..self.clone()
        }
    }

    /// Ray through the centre of pixel (`px`, `py`); row 0 is the top.
    pub fn ray(&self, px: usize, py: usize, near: f64, far: f64) -> Ray {
        let tan = (self.fov_y * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let sx = ((px as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * tan * aspect;
        let sy = (1.0 - (py as f64 + 0.5) / self.height as f64 * 2.0) * tan;
        let dir = (self.right * sx + self.up * sy - self.back).normalize();
        Ray {
            origin: self.position,
            dir,
            near,
            far,
            pixel: (px, py),
        }
    }
}
