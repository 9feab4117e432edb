//! LSTM sequence auto-encoder.
//!
//! The encoder runs an LSTM over a window and keeps the last hidden state as
//! the representation. That vector is L2-normalized and becomes the initial
//! hidden state of the decoder LSTM (cell state zero), which then emits the
//! window in reverse order, feeding each linear-layer output back in as the
//! next input. The first decoder input is the zero vector.

mod backward;
mod forward;
mod model_file;
mod params;
mod train;

pub use backward::backward;
pub use forward::{
    decode, decode_with_hook, encode, forward, loss, reconstruction_error, unit_normalize,
    ForwardTrace, Representation,
};
pub use model_file::{read_model, read_model_file, write_model, write_model_file, MODEL_MAGIC};
pub use params::{init_params, LstmWeights, ModelParams, TENSOR_NAMES};
pub use train::{train, TrainConfig, TrainOutcome};
