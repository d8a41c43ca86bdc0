//! Recurrent sentence encoders: the plain tanh RNN and the LSTM-RNN (full and
//! reduced variants), their parameters, forward traces and checkpoints.

pub mod checkpoint;
mod forward;
mod params;

pub use forward::{
    embed, embed_bidirectional, forward, lstm_forward, rnn_forward, Embedding, EncoderTrace,
    ForwardTrace, LstmStep, sigmoid,
};
pub use params::{
    Arch, Encoder, GateParams, LstmParams, Params, RnnParams, Side, Variant, INIT_RANGE,
};
