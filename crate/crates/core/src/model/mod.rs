//! Problem data, the synthetic instance generator, and measurement/lifting
//! constructions.

mod bounds;
mod cross;
mod instance;
mod io;
pub mod rng;

pub use bounds::{delta_cf, min_closed_form_sensors, ratio_to_f64};
pub use cross::{cross_measurements, CrossMeasurements, CrossMode};
pub use instance::{generate_instance, measure, GainVector, GeneratorConfig, ProblemInstance};
pub use io::{read_instance, write_instance, InstanceFile};
