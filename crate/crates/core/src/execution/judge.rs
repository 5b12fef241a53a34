/// Per-line trailing-whitespace-insensitive comparison. Trailing blank lines
/// are ignored on both sides.
pub fn outputs_match(expected: &[u8], actual: &[u8]) -> bool {
    normalized_lines(expected).eq(normalized_lines(actual))
}

fn normalized_lines(bytes: &[u8]) -> impl Iterator<Item = &[u8]> {
    let lines: Vec<&[u8]> = bytes.split(|&b| b == b'\n').map(trim_end).collect();
    let keep = lines.iter().rposition(|l| !l.is_empty()).map_or(0, |i| i + 1);
    lines.into_iter().take(keep)
}

fn trim_end(line: &[u8]) -> &[u8] {
    let end = line
        .iter()
        .rposition(|b| !b.is_ascii_whitespace())
        .map_or(0, |i| i + 1);
    &line[..end]
}
