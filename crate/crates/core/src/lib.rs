pub mod allocator;
pub mod compose;
pub mod error;
pub mod linalg;
pub mod ns;
pub mod op;
pub mod optimizer;
pub mod scheduler;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use ns::{apply_ns, CoefficientSchedule, CoefficientTriplet};
pub use op::OperatorType;
