//! Plain-text manifests.
//!
//! Split manifest: `seen: 0,1,2` and `unseen: 3,4` lines, with an optional
//! `name: ...` line. Class-name manifest: one `id<TAB>name` line per class.
//! Blank lines and lines starting with `#` are ignored in both.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{MsfError, Result};
use crate::eval::SplitSpec;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn parse_ids(line_no: usize, list: &str) -> Result<Vec<u32>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u32>()
                .map_err(|_| MsfError::Format(format!("line {line_no}: `{s}` is not a class id")))
        })
        .collect()
}

pub fn parse_split_manifest(text: &str, default_name: &str) -> Result<SplitSpec> {
    let mut name = None;
    let mut seen = None;
    let mut unseen = None;
    for (no, line) in content_lines(text) {
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| MsfError::Format(format!("line {no}: expected `key: value`")))?;
        let slot = match key.trim() {
            "name" => {
                name = Some(value.trim().to_string());
                continue;
            }
            "seen" => &mut seen,
            "unseen" => &mut unseen,
            other => return Err(MsfError::Format(format!("line {no}: unknown key `{other}`"))),
        };
        if slot.is_some() {
            return Err(MsfError::Format(format!("line {no}: duplicate `{}` line", key.trim())));
        }
        *slot = Some(parse_ids(no, value)?);
    }
    let seen = seen.ok_or_else(|| MsfError::Format("split manifest has no `seen:` line".into()))?;
    let unseen = unseen.ok_or_else(|| MsfError::Format("split manifest has no `unseen:` line".into()))?;
    SplitSpec::new(name.unwrap_or_else(|| default_name.to_string()), seen, unseen)
}

pub fn format_split_manifest(split: &SplitSpec) -> String {
    let join = |ids: Vec<u32>| ids.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
    format!(
        "name: {}\nseen: {}\nunseen: {}\n",
        split.name,
        join(split.seen_ids()),
        join(split.unseen_ids())
    )
}

pub fn read_split_manifest(path: impl AsRef<Path>) -> Result<SplitSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MsfError::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("split");
    parse_split_manifest(&text, stem)
}

pub fn write_split_manifest(path: impl AsRef<Path>, split: &SplitSpec) -> Result<()> {
    super::atomic_write(path.as_ref(), format_split_manifest(split).as_bytes())
}

pub fn parse_class_names(text: &str) -> Result<BTreeMap<u32, String>> {
    let mut out = BTreeMap::new();
    for (no, line) in content_lines(text) {
        let (id, name) = line
            .split_once('\t')
            .ok_or_else(|| MsfError::Format(format!("line {no}: expected `id<TAB>name`")))?;
        let id: u32 = id
            .trim()
            .parse()
            .map_err(|_| MsfError::Format(format!("line {no}: `{id}` is not a class id")))?;
        if out.insert(id, name.to_string()).is_some() {
            return Err(MsfError::Format(format!("line {no}: class {id} listed twice")));
        }
    }
    Ok(out)
}

pub fn format_class_names(names: &BTreeMap<u32, String>) -> String {
    let mut s = String::new();
    for (id, name) in names {
        let _ = writeln!(s, "{id}\t{name}");
    }
    s
}

pub fn read_class_names(path: impl AsRef<Path>) -> Result<BTreeMap<u32, String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MsfError::io(path, e))?;
    parse_class_names(&text)
}

pub fn write_class_names(path: impl AsRef<Path>, names: &BTreeMap<u32, String>) -> Result<()> {
    super::atomic_write(path.as_ref(), format_class_names(names).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_round_trip() {
        let s = SplitSpec::new("demo", [0, 2, 5], [1, 3]).unwrap();
        let text = format_split_manifest(&s);
        assert_eq!(text, "name: demo\nseen: 0,2,5\nunseen: 1,3\n");
        assert_eq!(parse_split_manifest(&text, "x").unwrap(), s);
    }

    #[test]
    fn split_without_name_uses_default() {
        let s = parse_split_manifest("# comment\nseen: 1, 2\n\nunseen: 3\n", "ntu").unwrap();
        assert_eq!(s.name, "ntu");
        assert_eq!(s.unseen_ids(), vec![3]);
    }

    #[test]
    fn split_errors() {
        assert!(parse_split_manifest("seen: 1\n", "x").is_err());
        assert!(parse_split_manifest("seen: 1\nunseen: a\n", "x").is_err());
        assert!(parse_split_manifest("seen: 1\nseen: 2\nunseen: 3\n", "x").is_err());
        assert!(parse_split_manifest("seen: 1\nunseen: 1\n", "x").is_err());
        assert!(parse_split_manifest("seen 1\n", "x").is_err());
    }

    #[test]
    fn class_names() {
        let names = parse_class_names("0\tdrink water\n1\teat meal\n").unwrap();
        assert_eq!(names[&1], "eat meal");
        assert_eq!(format_class_names(&names), "0\tdrink water\n1\teat meal\n");
        assert!(parse_class_names("0 drink\n").is_err());
        assert!(parse_class_names("0\ta\n0\tb\n").is_err());
    }
}
