//! Model files on disk, with the model kind detected from the first record.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::baseline::BiasModel;
use crate::error::{Error, Result};
use crate::knn::ItemKnnModel;
use crate::mf::FactorModel;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelFile {
    Bias(BiasModel),
    ItemKnn(ItemKnnModel),
    Factors(FactorModel),
}

impl ModelFile {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelFile::Bias(_) => "bias",
            ModelFile::ItemKnn(_) => "itemknn",
            ModelFile::Factors(_) => "mf",
        }
    }

    pub fn write<W: Write>(&self, out: W) -> std::io::Result<()> {
        match self {
            ModelFile::Bias(m) => m.write(out),
            ModelFile::ItemKnn(m) => m.write(out),
            ModelFile::Factors(m) => m.write(out),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Parses a model: `k` first means factors, `g`/`i`/`u` a bias model,
    /// `m`/`w` an item-kNN model.
    pub fn parse(text: &str) -> Result<ModelFile> {
        let first = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('#'))
            .and_then(|l| l.split_whitespace().next());
        match first {
            Some("k") => FactorModel::read(text.as_bytes()).map(ModelFile::Factors),
            Some("g" | "i" | "u") => BiasModel::read(text.as_bytes()).map(ModelFile::Bias),
            Some("m" | "w") => ItemKnnModel::read(text.as_bytes()).map(ModelFile::ItemKnn),
            Some(tag) => Err(Error::Parse {
                line: 1,
                message: format!("unrecognized model record '{tag}'"),
            }),
            None => Err(Error::Parse {
                line: 0,
                message: "empty model file".into(),
            }),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelFile> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}
