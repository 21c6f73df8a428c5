//! Scene description: Alice, the anchors that observe her pilot, and the
//! pilot scheme she transmits.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::BoundingBox;
use crate::signal::{pathloss_gain, GainModel, OfdmConfig, Pilot, PilotScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Legitimate anchor that knows the transmitted pilot.
    Legit,
    /// Eavesdropper that assumes the public pilot.
    Eve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub position: DVector<f64>,
    pub role: Role,
    pub gain: GainModel,
}

impl Anchor {
    pub fn new(position: Vec<f64>, role: Role) -> Self {
        Self {
            position: DVector::from_vec(position),
            role,
            gain: GainModel::FreeSpace,
        }
    }

    pub fn with_gain(mut self, gain: GainModel) -> Self {
        self.gain = gain;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    alice: DVector<f64>,
    anchors: Vec<Anchor>,
    config: OfdmConfig,
    scheme: PilotScheme,
    speed_of_light: f64,
    gain_calibration: f64,
    seed_box: BoundingBox,
}

impl Scenario {
    pub fn new(
        alice: Vec<f64>,
        anchors: Vec<Anchor>,
        config: OfdmConfig,
        scheme: PilotScheme,
        speed_of_light: f64,
        gain_calibration: f64,
        seed_box: BoundingBox,
    ) -> Result<Self> {
        let dim = alice.len();
        if !(dim == 2 || dim == 3) {
            return Err(Error::Validation(format!("positions must be 2-D or 3-D, got {dim}-D")));
        }
        if alice.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("Alice position must be finite".into()));
        }
        if anchors.is_empty() {
            return Err(Error::Validation("at least one anchor is required".into()));
        }
        let alice = DVector::from_vec(alice);
        for (i, a) in anchors.iter().enumerate() {
            if a.position.len() != dim || a.position.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("anchor {i} must be a finite {dim}-D point")));
            }
            if (&a.position - &alice).norm() == 0.0 {
                return Err(Error::CoincidentPoint(i));
            }
        }
        if !(speed_of_light.is_finite() && speed_of_light > 0.0) {
            return Err(Error::Validation("speed_of_light must be positive".into()));
        }
        if !(gain_calibration.is_finite() && gain_calibration > 0.0) {
            return Err(Error::Validation("gain_calibration must be positive".into()));
        }
        if seed_box.dim() != dim {
            return Err(Error::Validation(format!("seed box must be {dim}-D")));
        }
        scheme.validate(&config)?;
        Ok(Self {
            alice,
            anchors,
            config,
            scheme,
            speed_of_light,
            gain_calibration,
            seed_box,
        })
    }

    pub fn alice(&self) -> &DVector<f64> {
        &self.alice
    }
    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }
    pub fn config(&self) -> &OfdmConfig {
        &self.config
    }
    pub fn scheme(&self) -> &PilotScheme {
        &self.scheme
    }
    pub fn speed_of_light(&self) -> f64 {
        self.speed_of_light
    }
    pub fn gain_calibration(&self) -> f64 {
        self.gain_calibration
    }
    pub fn seed_box(&self) -> &BoundingBox {
        &self.seed_box
    }
    pub fn dim(&self) -> usize {
        self.alice.len()
    }

    pub fn anchor(&self, id: usize) -> Result<&Anchor> {
        self.anchors.get(id).ok_or(Error::UnknownAnchor(id))
    }

    pub fn eve_ids(&self) -> Vec<usize> {
        self.ids_with(Role::Eve)
    }

    pub fn legit_ids(&self) -> Vec<usize> {
        self.ids_with(Role::Legit)
    }

    fn ids_with(&self, role: Role) -> Vec<usize> {
        self.anchors
            .iter()
            .enumerate()
            .filter(|(_, a)| a.role == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn distance(&self, id: usize) -> Result<f64> {
        Ok((&self.anchor(id)?.position - &self.alice).norm())
    }

    /// Line-of-sight delay `||p_A - p_i|| / c`.
    pub fn true_delay(&self, id: usize) -> Result<f64> {
        Ok(self.distance(id)? / self.speed_of_light)
    }

    /// Path gain with `|alpha|^2` scaled by the calibration factor.
    pub fn channel_gain(&self, id: usize) -> Result<Complex64> {
        let a = self.anchor(id)?;
        let g = pathloss_gain(self.distance(id)?, self.config.carrier_freq(), a.gain, self.speed_of_light)?;
        Ok(g * self.gain_calibration.sqrt())
    }

    pub fn pilot(&self) -> Result<Pilot> {
        self.scheme.build_pilot(&self.config)
    }

    pub fn with_scheme(&self, scheme: PilotScheme) -> Result<Self> {
        scheme.validate(&self.config)?;
        Ok(Self {
            scheme,
            ..self.clone()
        })
    }

    /// Replaces the configuration. The scheme is revalidated against it.
    pub fn with_config(&self, config: OfdmConfig) -> Result<Self> {
        self.scheme.validate(&config)?;
        Ok(Self {
            config,
            ..self.clone()
        })
    }

    pub fn with_gain_calibration(&self, gain_calibration: f64) -> Result<Self> {
        if !(gain_calibration.is_finite() && gain_calibration > 0.0) {
            return Err(Error::Validation("gain_calibration must be positive".into()));
        }
        Ok(Self {
            gain_calibration,
            ..self.clone()
        })
    }

    /// Same scene with Alice and every anchor mapped through `p -> R p + t`.
    /// Fixed gains are kept, free-space gains follow the new distances.
    pub fn transformed(&self, rotation: &nalgebra::DMatrix<f64>, shift: &DVector<f64>) -> Result<Self> {
        let map = |p: &DVector<f64>| rotation * p + shift;
        let anchors = self
            .anchors
            .iter()
            .map(|a| Anchor {
                position: map(&a.position),
                ..a.clone()
            })
            .collect();
        // the seed box is axis-aligned, so widen it to cover the mapped corners
        let corners = box_corners(&self.seed_box).into_iter().map(|c| map(&c));
        let dim = self.dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for c in corners {
            for k in 0..dim {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        Self::new(
            map(&self.alice).as_slice().to_vec(),
            anchors,
            self.config.clone(),
            self.scheme.clone(),
            self.speed_of_light,
            self.gain_calibration,
            BoundingBox::new(lo, hi)?,
        )
    }
}

fn box_corners(b: &BoundingBox) -> Vec<DVector<f64>> {
    let dim = b.dim();
    (0..1usize << dim)
        .map(|mask| DVector::from_iterator(dim, (0..dim).map(|k| if mask >> k & 1 == 1 { b.hi()[k] } else { b.lo()[k] })))
        .collect()
}
