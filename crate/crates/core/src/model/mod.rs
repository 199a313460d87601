//! System model: configuration, channels, transceivers and link metrics.

pub mod channels;
pub mod config;
pub mod simulate;
pub mod sinr;
pub mod transceiver;

pub use channels::{check_alignment_feasibility, check_sdma_feasibility, cn01, cn_matrix, sample_channels, ChannelSet};
pub use config::{achievable_dof, Direction, StreamId, SystemConfig};
pub use simulate::{propagate_block, simulate_transmission, BlockInput, BlockOutput};
pub use sinr::{
    all_sinrs, all_sinrs_decomposed, decomposed_with, dl_sinr, dl_sinr_decomposed, per_stream_rate, relay_forward_sinr,
    relay_power_decomposed, relay_tx_power, sinr_decomposition_ratio, sum_rate, ul_sinr, ul_sinr_decomposed,
    StreamSinrs,
};
pub use transceiver::{alignment_residual, hstack, vstack, AlignedRelay, RelaySplit, TransceiverSet};
