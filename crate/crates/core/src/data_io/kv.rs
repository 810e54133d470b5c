//! Flat `key=value` text with `#` comments.

use crate::error::{Error, Result};

/// Parse into `(line number, (key, value))` pairs, in file order.
pub fn parse_kv(text: &str) -> Result<Vec<(usize, (String, String))>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key=value, got {line:?}") })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse { line: i + 1, msg: "empty key".into() });
        }
        out.push((i + 1, (k.to_string(), v.trim().to_string())));
    }
    Ok(out)
}

pub fn format_pairs<K: AsRef<str>>(pairs: &[(K, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{}={v}\n", k.as_ref())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_errors() {
        let kv = parse_kv("# header\n task = wipe \n\nlr=3e-4 # trailing\n").unwrap();
        assert_eq!(kv, vec![(2, ("task".into(), "wipe".into())), (4, ("lr".into(), "3e-4".into()))]);
        assert!(matches!(parse_kv("a=1\nbroken\n"), Err(Error::Parse { line: 2, .. })));
    }
}
