pub mod ablate;
pub mod evaluate;
pub mod fetch;
pub mod generate;
pub mod gradcheck;
pub mod import;
pub mod predict;
pub mod split;
pub mod train;

use std::path::Path;

use lyrnet_core::corpus::{Vocabulary, VocabularyFile};

use crate::errors::CliError;

pub fn load_vocab(path: &Path) -> Result<Vocabulary, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read vocabulary {}: {e}", path.display())))?;
    let file: VocabularyFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("bad vocabulary {}: {e}", path.display())))?;
    Ok(file.into())
}

pub fn save_vocab(path: &Path, vocab: &Vocabulary) -> Result<(), CliError> {
    let file = VocabularyFile::from(vocab);
    std::fs::write(path, serde_json::to_string(&file)? + "\n")?;
    Ok(())
}
