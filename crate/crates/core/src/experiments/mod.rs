//! Applied studies built on the factor pipeline.

pub mod event;
pub mod slippage;
pub mod subsample;
pub mod vol_sorts;

pub use event::{
    cumulative_and_rolling, halving_event_study, placebo_scan, EventFit, EventStudyOptions, EventStudyResult,
    PlaceboRow, PlaceboScan,
};
pub use slippage::{
    panel_capacity, scaled_slippage, slippage_capacity, GrossReturn, PanelCapacity, SlippageReport, SlippageRow,
};
pub use subsample::{subsample_split, SubsampleRow};
pub use vol_sorts::{vol_sorts, VolSortRow};
