pub mod doppler;
pub mod dynamics;
pub mod g2;
pub mod gain_curve;
pub mod spectrum;
pub mod sweep;
