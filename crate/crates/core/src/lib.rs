pub mod actions_angles;
pub mod dynamics;
pub mod integrability;
pub mod models;
pub mod numeric;
pub mod quantizer;
pub mod ode;
pub mod su2;
