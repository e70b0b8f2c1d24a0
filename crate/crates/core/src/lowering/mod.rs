//! Search-space dialects and lowering of symbolic cells into primitive-operator
//! computation graphs.
//!
//! Three dialects are supported: vertex-labeled cells (`nb101`), edge-labeled cells
//! on a fixed 4-node DAG (`nb201`), and two-input-node cells (`nb301`). Lowering
//! expands each grouped operator label into its primitive sequence, wires joins
//! (`Add` inside cells, `Concat` + 1x1 projection at multi-input cell outputs) and
//! assembles the macro skeleton: stem, cell stages with reductions, classifier.

mod cell;
mod dialect;
mod expand;
mod lower;
mod random;

pub use cell::{CellSpec, Nb101Cell, Nb201Cell, Nb301Cell, Nb301NodeSpec, NB201_EDGES};
pub use dialect::{Dialect, Nb101Op, Nb201Op, Nb301Op, NB201_FULL_VOCAB, NB201_NO_ZEROIZE_VOCAB};
pub use expand::{expand_operator, ChainNode};
pub use lower::{build_network, lower_cell, CellFragment, MacroConfig};
pub use random::{enumerate_nb201_cells, random_cell, random_nb201_cell};
