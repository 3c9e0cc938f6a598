//! Layers used by VS-Net and the optimizer that trains them.

pub mod adam;
pub mod conv;
pub mod layers;
pub mod params;

pub use adam::{Adam, AdamConfig, AdamState};
pub use conv::{
    conv2d_depthwise, conv2d_pointwise, pointwise_param_count, separable_conv, ConvParams,
};
pub use layers::{concat_channels, dropout, maxpool2, narrow_channels, upsample2};
pub use params::{Param, ParamSet};
