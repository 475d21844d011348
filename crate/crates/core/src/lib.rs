pub mod background;
pub mod book;
pub mod exchange;
pub mod kernel;
pub mod raw_state;
pub mod seeding;
pub mod serde_duration;
pub mod time;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
