//! Transmitter, simulated pH channel and dataset persistence.

pub mod dataset;
pub mod io;
pub mod model;
pub mod scheme;

pub use dataset::{generate_dataset, Dataset, SequenceRecord, Split};
pub use io::{read_dataset, write_dataset};
pub use model::{simulate_trace, ChannelModel, PhTrace};
pub use scheme::{modulate, InjectionEvent, ModulationScheme, Polarity};
