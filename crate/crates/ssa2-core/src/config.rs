//! Crate-wide default configuration values.

/// Number of states per channel in the selective scan.
pub const DEFAULT_D_STATE: usize = 4;

/// Inner-channel expansion of the SS2D block relative to its input width.
pub const DEFAULT_SSM_RATIO: f64 = 1.0;

/// Refinement iterations at inference time.
pub const DEFAULT_INFER_ITERS: usize = 32;

/// Number of cross-scan directions.
pub const SCAN_DIRECTIONS: usize = 4;

/// Correlation pyramid depth.
pub const PYRAMID_LEVELS: usize = 4;

/// Lookup radius around the current disparity estimate.
pub const DEFAULT_LOOKUP_RADIUS: usize = 4;

/// Self-description of the default configuration, used by config echo tests
/// and the CLI selftest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Defaults {
    pub d_state: usize,
    pub ssm_ratio: f64,
    pub infer_iters: usize,
    pub scan_directions: usize,
    pub pyramid_levels: usize,
    pub lookup_radius: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            d_state: DEFAULT_D_STATE,
            ssm_ratio: DEFAULT_SSM_RATIO,
            infer_iters: DEFAULT_INFER_ITERS,
            scan_directions: SCAN_DIRECTIONS,
            pyramid_levels: PYRAMID_LEVELS,
            lookup_radius: DEFAULT_LOOKUP_RADIUS,
        }
    }
}
