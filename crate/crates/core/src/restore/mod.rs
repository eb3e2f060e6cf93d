//! Restoration stages: TV deblurring and inpainting, exemplar patch
//! fill, color retransfer, exposure correction, and the high-frequency
//! band decomposition used to measure edge fidelity.

mod color;
mod patch;
mod pyramid;
mod tv;

pub use color::{
    color_retransfer, color_stats, color_stats_over_mask, exposure_correct, ColorStats,
    CrtResult, ExposureDirection, ExposureResult, COLOR_CEILING,
};
pub use patch::{patch_inpaint, PatchFill, DEFAULT_PATCH_SIDE};
pub use pyramid::{hf_edge_fidelity, hf_pyramid, HfPyramid, HF_SCALES};
pub use tv::{tv_deconvolve, tv_deconvolve_traced, tv_inpaint, BLIND_PSF_SIGMA};

use crate::{Error, Result};

/// Controls for the TV solvers. Step sizes derive from the operator
/// norms; `step_scale` shrinks them if a caller wants extra safety
/// margin.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvParams {
    /// Fidelity weight: the TV term enters the objective as `1/lambda`.
    pub lambda: f64,
    /// Gaussian PSF std assumed by blind deconvolution when no PSF is
    /// supplied.
    pub kernel_radius: f64,
    /// Multiplier in `(0,1]` on the derived step sizes.
    pub step_scale: f64,
    pub max_iters: usize,
    /// Inner iterations of the TV proximal subproblem per outer step
    /// (deconvolution only).
    pub inner_iters: usize,
    /// Stop when the relative iterate change drops below this.
    pub tol: f64,
}

impl Default for TvParams {
    fn default() -> Self {
        TvParams {
            lambda: 1e3,
            kernel_radius: BLIND_PSF_SIGMA,
            step_scale: 1.0,
            max_iters: 150,
            inner_iters: 25,
            tol: 1e-5,
        }
    }
}

impl TvParams {
    /// Defaults tuned for inpainting, where each iteration is cheap but
    /// information travels roughly a pixel per step.
    pub fn for_inpainting() -> Self {
        TvParams {
            max_iters: 2000,
            ..TvParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda.is_finite()
            && self.lambda > 0.0
            && self.kernel_radius.is_finite()
            && self.kernel_radius > 0.0
            && self.step_scale > 0.0
            && self.step_scale <= 1.0
            && self.max_iters >= 1
            && self.inner_iters >= 1
            && self.tol.is_finite()
            && self.tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("tv params out of range"))
        }
    }
}
