//! The full classifier: encoder → sequence summary → task heads.

use crate::encoder::{Encoder, EncoderConfig, EncoderError};
use crate::heads::{self, HeadConfig, HeadError, HeadStack, TaskLogits};
use crate::rng::SeedRng;
use crate::tensor::{Mode, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Head(#[from] HeadError),
}

pub struct EmotionModel {
    pub encoder: Encoder,
    pub heads: HeadStack,
}

impl std::fmt::Debug for EmotionModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmotionModel")
            .field("encoder", &self.encoder.config)
            .field("heads", &self.heads.config)
            .finish_non_exhaustive()
    }
}

impl EmotionModel {
    pub fn init(
        encoder_config: EncoderConfig,
        head_config: HeadConfig,
        rng: &mut SeedRng,
    ) -> Result<EmotionModel, ModelError> {
        let d_model = encoder_config.d_model;
        let encoder = Encoder::init(encoder_config, rng)?;
        let heads = HeadStack::init(d_model, head_config, rng);
        Ok(EmotionModel { encoder, heads })
    }

    pub fn param_count(&self) -> usize {
        Encoder::param_count(&self.encoder.config)
            + HeadStack::param_count(self.encoder.config.d_model, &self.heads.config)
    }

    /// Visit every trainable parameter in a fixed, stable order.
    pub fn for_each_param(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.encoder.for_each_param(f);
        self.heads.for_each_param(f);
    }

    pub fn zero_grads(&mut self) {
        self.for_each_param(&mut |_, t| t.zero_grad());
    }

    /// Logits for one document's token sequence.
    pub fn forward_doc(
        &self,
        tokens: &[usize],
        mode: Mode,
        rng: &mut SeedRng,
    ) -> Result<TaskLogits, ModelError> {
        let (hidden, _) = self.encoder.encode(tokens, None, mode, rng)?;
        let summary = heads::summarize(&hidden, self.heads.config.summary_mode)?;
        Ok(self.heads.forward(&summary, mode, rng)?)
    }
}
