use super::AbstractedCode;

/// Unit-cost Levenshtein distance between two sequences.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut row = vec![0; short.len() + 1];
    for (i, x) in long.iter().enumerate() {
        row[0] = i + 1;
        for (j, y) in short.iter().enumerate() {
            let substitute = prev[j] + usize::from(x != y);
            row[j + 1] = substitute.min(prev[j + 1] + 1).min(row[j] + 1);
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[short.len()]
}

/// Edit distance over the abstracted token streams.
pub fn token_edit_distance(a: &AbstractedCode, b: &AbstractedCode) -> usize {
    levenshtein(&a.tokens, &b.tokens)
}
