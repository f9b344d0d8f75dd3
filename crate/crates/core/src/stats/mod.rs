//! Port counter time series, rates derived from them, and their exposition.

mod expo;
mod process;
mod rate;
mod store;

pub use expo::{render_exposition, CONTENT_TYPE};
pub use process::{ProcessSample, ProcessSampler};
pub use rate::{compute_rates, counter_rate, RateSample, DEFAULT_RATE_WINDOW_S};
pub use store::{MetricStore, Sample, ScrapeMeta, SeriesKey, StoreError, DEFAULT_CAPACITY, PORT_COUNTERS};
