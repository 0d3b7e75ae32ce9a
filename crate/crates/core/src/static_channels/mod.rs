//! Intensity, colour-opponent and orientation feature channels of one frame.

mod channels;
mod features;
pub mod gabor;

pub use channels::{color_channels, intensity_channels, ColorChannels};
pub use features::{
    opponent_feature_maps, orientation_feature_from_levels, orientation_feature_maps,
    rectified_opponent, static_feature_set, static_features_from, Channel, ChannelPyramids,
    FeatureKind, FeatureMap, FeatureTag, OpponentPair, StaticFeatures,
};
pub(crate) use features::to_accumulation;
pub use gabor::{gabor_level, gabor_orient, GaborBank, GaborKernels, GaborOctave, ORIENTATIONS};
