//! Physical arrangement of the bench: object plane, nonlinear crystal,
//! optional imaging lens, detection plane. The layout produces the element
//! chains each beam traverses and the conjugate geometry the lens realizes.

use crate::elements::{ArmChain, Element};
use crate::error::{Result, SimError};
use crate::oracles::ImagingGeometry;

/// Lens position and strength inside the detection path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensPlacement {
    /// Crystal exit plane to lens (meters).
    pub crystal_to_lens: f64,
    pub focal_length: f64,
}

/// Distances along the optical axis. The object sits upstream of the
/// crystal; everything downstream of the crystal is shared by the twin
/// photons and, in the reference arrangement, by the transmitted pump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalLayout {
    /// Object plane to crystal exit plane (meters, may be zero).
    pub object_to_crystal: f64,
    pub lens: Option<LensPlacement>,
    /// Crystal exit plane to detection plane (meters).
    pub crystal_to_detector: f64,
}

impl OpticalLayout {
    pub fn new(
        object_to_crystal: f64,
        lens: Option<LensPlacement>,
        crystal_to_detector: f64,
    ) -> Result<Self> {
        let finite_nonneg = |name: &str, v: f64| -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SimError::Geometry(format!(
                    "{name} must be non-negative and finite, got {v}"
                )))
            }
        };
        finite_nonneg("object-to-crystal distance", object_to_crystal)?;
        finite_nonneg("crystal-to-detector distance", crystal_to_detector)?;
        if let Some(placement) = lens {
            finite_nonneg("crystal-to-lens distance", placement.crystal_to_lens)?;
            if placement.crystal_to_lens > crystal_to_detector {
                return Err(SimError::Geometry(format!(
                    "the lens at {} m sits beyond the detector at {} m",
                    placement.crystal_to_lens, crystal_to_detector
                )));
            }
            // Delegates the nonzero-focal-length invariant to ThinLens.
            Element::thin_lens(placement.focal_length)?;
        }
        Ok(OpticalLayout {
            object_to_crystal,
            lens,
            crystal_to_detector,
        })
    }

    /// Elements one twin photon traverses from the crystal exit plane to
    /// the detection plane.
    pub fn twin_chain(&self, photon_wavenumber: f64) -> Result<ArmChain> {
        let mut elements = Vec::new();
        match self.lens {
            Some(placement) => {
                push_free(&mut elements, placement.crystal_to_lens)?;
                elements.push(Element::thin_lens(placement.focal_length)?);
                push_free(
                    &mut elements,
                    self.crystal_to_detector - placement.crystal_to_lens,
                )?;
            }
            None => push_free(&mut elements, self.crystal_to_detector)?,
        }
        ArmChain::new(photon_wavenumber, elements)
    }

    /// Elements the transmitted pump traverses from the object plane to
    /// the detection plane (it passes the crystal unchanged).
    pub fn pump_chain(&self, pump_wavenumber: f64) -> Result<ArmChain> {
        let mut elements = Vec::new();
        match self.lens {
            Some(placement) => {
                push_free(
                    &mut elements,
                    self.object_to_crystal + placement.crystal_to_lens,
                )?;
                elements.push(Element::thin_lens(placement.focal_length)?);
                push_free(
                    &mut elements,
                    self.crystal_to_detector - placement.crystal_to_lens,
                )?;
            }
            None => push_free(
                &mut elements,
                self.object_to_crystal + self.crystal_to_detector,
            )?,
        }
        ArmChain::new(pump_wavenumber, elements)
    }

    /// Object and image distances the lens sees for the pump path: object
    /// side `object_to_crystal + crystal_to_lens`, image side
    /// `crystal_to_detector - crystal_to_lens`. No conjugation is implied;
    /// check `conjugation_residual` on the result to know whether the
    /// detector sits at the image plane. `None` without a lens.
    pub fn conjugate_geometry(&self) -> Option<ImagingGeometry> {
        self.lens.map(|placement| ImagingGeometry {
            object_distance: self.object_to_crystal + placement.crystal_to_lens,
            image_distance: self.crystal_to_detector - placement.crystal_to_lens,
            focal_length: placement.focal_length,
        })
    }

    /// Lens-to-detector distance, `None` without a lens.
    pub fn rear_distance(&self) -> Option<f64> {
        self.lens
            .map(|placement| self.crystal_to_detector - placement.crystal_to_lens)
    }

    /// Total object-to-detector path length.
    pub fn object_to_detector(&self) -> f64 {
        self.object_to_crystal + self.crystal_to_detector
    }
}

fn push_free(elements: &mut Vec<Element>, distance: f64) -> Result<()> {
    if distance > 0.0 {
        elements.push(Element::free_space(distance)?);
    }
    Ok(())
}
