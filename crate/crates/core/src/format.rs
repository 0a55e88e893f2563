//! Helpers shared by the line-oriented model file formats.

use std::io::{self, BufRead};

use crate::error::{Error, Result};

/// Rejects tokens that would not survive whitespace tokenization.
pub(crate) fn check_token(token: &str) -> io::Result<&str> {
    if token.is_empty() || token.chars().any(char::is_whitespace) {
        Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("token {token:?} cannot be written to a whitespace-separated file"),
        ))
    } else {
        Ok(token)
    }
}

/// A non-empty, non-comment line split on whitespace, with its 1-based number.
pub(crate) struct Record {
    pub line: u64,
    pub fields: Vec<String>,
}

impl Record {
    pub fn tag(&self) -> &str {
        &self.fields[0]
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    pub fn expect_len(&self, n: usize) -> Result<()> {
        if self.fields.len() == n {
            Ok(())
        } else {
            Err(self.error(format!(
                "expected {} fields for '{}' record, found {}",
                n,
                self.tag(),
                self.fields.len()
            )))
        }
    }

    pub fn real(&self, idx: usize) -> Result<f64> {
        let raw = &self.fields[idx];
        let v: f64 = raw.parse().map_err(|_| self.error(format!("invalid number {raw:?}")))?;
        if !v.is_finite() {
            return Err(self.error(format!("non-finite number {raw:?}")));
        }
        Ok(v)
    }

    pub fn count(&self, idx: usize) -> Result<usize> {
        let raw = &self.fields[idx];
        raw.parse().map_err(|_| self.error(format!("invalid count {raw:?}")))
    }
}

pub(crate) fn records<R: BufRead>(reader: R) -> impl Iterator<Item = Result<Record>> {
    reader.lines().enumerate().filter_map(|(idx, line)| {
        let line_no = idx as u64 + 1;
        match line {
            Err(e) => Some(Err(Error::Parse {
                line: line_no,
                message: e.to_string(),
            })),
            Ok(text) => {
                let text = text.trim();
                if text.is_empty() || text.starts_with('#') {
                    None
                } else {
                    Some(Ok(Record {
                        line: line_no,
                        fields: text.split_whitespace().map(str::to_owned).collect(),
                    }))
                }
            }
        }
    })
}
