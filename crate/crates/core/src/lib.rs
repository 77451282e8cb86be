//! LoDE: localisation and dimension estimation of container-like objects.
//!
//! Objects are assumed circularly symmetric about the world vertical axis
//! (`+z`, millimetres). Two calibrated views and one binary silhouette per
//! view are enough to recover the 3D centroid, the largest width and the
//! height of the object.
//!
//! The pipeline stages are:
//!
//! 1. **Mask** – intensity centroid of each silhouette.
//! 2. **Camera** – two-view midpoint triangulation of the 2D centroids.
//! 3. **Fitting** – a stack of horizontal circumferences around the centroid
//!    shrinks along a radius schedule until every sampled point re-projects
//!    inside both silhouettes.
//! 4. **Synth** – ray-cast silhouettes and depth maps of solids of revolution,
//!    used as ground truth.
//! 5. **Eval** – batch runs over manifests, localisation success ratio,
//!    error percentiles and the depth back-projection baseline.

pub mod camera;
pub mod cli;
pub mod error;
pub mod eval;
pub mod fitting;
pub mod mask;
pub mod pnm;
pub mod synth;

pub use camera::{CalibratedCamera, CameraPose, Intrinsics, Ray};
pub use error::{Error, Result};
pub use eval::{ErrorStats, Report};
pub use fitting::{Circumference, CircumferenceSet, FitParams, ObjectEstimate};
pub use mask::{Mask, PixelCentroid};
pub use synth::{DepthMap, NoiseParams, RevolutionShape};
