//! The regression corpus: source programs with golden outputs.

use std::io;
use std::path::Path;

/// Environment variable naming a directory that replaces the embedded corpus.
pub const CORPUS_ENV: &str = "DEFUNCQ_CORPUS";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusEntry {
    pub name: String,
    pub source: String,
    /// Canonical serialization of the expected value, without a trailing newline.
    pub expected: String,
}

macro_rules! embedded {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../corpus/", $name, ".fq")), include_str!(concat!("../corpus/", $name, ".out")))),*]
    };
}

const EMBEDDED: &[(&str, &str, &str)] = embedded!(
    "pow",
    "fold-pow",
    "fold-concat",
    "map",
    "map-ops",
    "map-first-order",
    "group-by",
    "group-by-eager",
    "compose",
);

/// The corpus compiled into the binary.
pub fn embedded() -> Vec<CorpusEntry> {
    EMBEDDED
        .iter()
        .map(|(name, source, expected)| CorpusEntry {
            name: name.to_string(),
            source: source.to_string(),
            expected: expected.trim_end().to_string(),
        })
        .collect()
}

/// Every `<name>.fq` in `dir` with its `<name>.out`, sorted by name.
pub fn load_dir(dir: &Path) -> io::Result<Vec<CorpusEntry>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("fq") {
            continue;
        }
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let source = std::fs::read_to_string(&path)?;
        let expected = std::fs::read_to_string(path.with_extension("out"))?.trim_end().to_string();
        out.push(CorpusEntry { name, source, expected });
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

/// The directory named by `DEFUNCQ_CORPUS` if set, else the embedded corpus.
pub fn load() -> io::Result<Vec<CorpusEntry>> {
    match std::env::var_os(CORPUS_ENV) {
        Some(dir) => load_dir(Path::new(&dir)),
        None => Ok(embedded()),
    }
}

pub fn find(name: &str) -> Option<CorpusEntry> {
    embedded().into_iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_matches_directory() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus");
        let mut a = embedded();
        a.sort_by(|x, y| x.name.cmp(&y.name));
        assert_eq!(a, load_dir(&dir).unwrap());
    }
}
