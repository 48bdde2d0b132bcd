//! Line-oriented input and output helpers.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use sceneseq::{QaItem, Scene};
use serde::de::DeserializeOwned;

pub fn reader(path: Option<&Path>) -> anyhow::Result<Box<dyn BufRead>> {
    Ok(match path {
        None => Box::new(BufReader::new(io::stdin().lock())),
        Some(p) if p == Path::new("-") => Box::new(BufReader::new(io::stdin().lock())),
        Some(p) => Box::new(BufReader::new(
            File::open(p).with_context(|| format!("opening {}", p.display()))?,
        )),
    })
}

pub fn writer(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        None => Box::new(BufWriter::new(io::stdout().lock())),
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
    })
}

/// Non-blank lines with their 1-based line numbers.
pub fn lines(path: Option<&Path>) -> anyhow::Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in reader(path)?.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn read_scenes(path: Option<&Path>) -> anyhow::Result<Vec<Scene>> {
    lines(path)?
        .into_iter()
        .map(|(n, l)| Scene::from_json(&l).with_context(|| format!("line {n}")))
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: Option<&Path>) -> anyhow::Result<Vec<T>> {
    lines(path)?
        .into_iter()
        .map(|(n, l)| serde_json::from_str(&l).with_context(|| format!("line {n}")))
        .collect()
}

pub fn read_qa(path: Option<&Path>) -> anyhow::Result<Vec<QaItem>> {
    let items: Vec<QaItem> = read_jsonl(path)?;
    for (i, item) in items.iter().enumerate() {
        item.validate().with_context(|| format!("record {}", i + 1))?;
    }
    Ok(items)
}

pub fn read_ids(path: Option<&Path>) -> anyhow::Result<Vec<Vec<u32>>> {
    lines(path)?
        .into_iter()
        .map(|(n, l)| {
            l.split_whitespace()
                .map(|t| t.parse::<u32>().with_context(|| format!("line {n}: bad ID `{t}`")))
                .collect()
        })
        .collect()
}

pub fn write_id_line<W: Write + ?Sized>(w: &mut W, ids: &[u32]) -> io::Result<()> {
    let mut first = true;
    for id in ids {
        if !first {
            w.write_all(b" ")?;
        }
        write!(w, "{id}")?;
        first = false;
    }
    w.write_all(b"\n")
}
