pub mod align;
pub mod cli;
pub mod kb;
pub mod masking;
pub mod model;
pub mod text;
pub mod probe;
pub mod synth;
pub mod pipeline;
