//! In-process stand-in for a message-passing runtime.
//!
//! Each subdomain runs on its own worker thread. Workers only interact
//! through [`Communicator`] collectives: halo exchange for distributed
//! products and deterministic sum reductions for inner products and the
//! small deflation vectors.

mod comm;
mod partition;
mod view;

pub use comm::{Communicator, Reduce, Serial};
pub use partition::{partition_contiguous, Partition};
pub use view::{reassemble, split_matrix, split_rect, HaloPattern, SubdomainView};
