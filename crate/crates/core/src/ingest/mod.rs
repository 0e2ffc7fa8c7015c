//! Raw subnet-day data: snapshot files, base-token/USD prices, and the remote API.

mod fx;
pub mod remote;
mod snapshot;

pub use fx::{load_fx, parse_fx_csv, FxSeries, MAX_FX_FILL_DAYS};
pub use remote::{fetch_remote, FetchReport, RejectedRecord, RemoteClient, RemoteConfig};
pub use snapshot::{
    load_snapshot, parse_snapshot_csv, parse_snapshot_json, snapshot_csv_bytes, write_snapshot, write_snapshot_csv,
    RawSnapshotRow, SnapshotFormat, RAO_PER_TAO, SNAPSHOT_HEADER,
};
