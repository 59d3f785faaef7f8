pub mod bench;
pub mod compositing;
pub mod error;
pub mod field;
pub mod image;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod render;
pub mod superres;

pub use error::{Error, Result};
pub use image::Image;
