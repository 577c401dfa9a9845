pub mod analysis;
pub mod data;
pub mod hpn;
pub mod losses;
pub mod model;
pub mod prior;
pub mod tensor;
pub mod trainer;
