
/// Full-matrix Levenshtein, written independently of the two-row version.
pub fn reference_distance(a: &[String], b: &[String]) -> usize {
    let mut m = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in m.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        m[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            m[i][j] = (m[i - 1][j] + 1).min(m[i][j - 1] + 1).min(m[i - 1][j - 1] + sub);
        }
    }
    m[a.len()][b.len()]
}

/// Brute-force BM25: for every document, loop over every query token and
/// recount tf and df by scanning the whole corpus.
pub fn brute_bm25(query: &[String], docs: &[Vec<String>], k1: f64, b: f64) -> Vec<f64> {
    let n = docs.len() as f64;
    let total: usize = docs.iter().map(Vec::len).sum();
    if docs.is_empty() || total == 0 {
        return vec![0.0; docs.len()];
    }
    let avgdl = total as f64 / n;
    docs.iter()
        .map(|doc| {
            let mut score = 0.0;
            for q in query {
                let tf = doc.iter().filter(|t| *t == q).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = docs.iter().filter(|d| d.contains(q)).count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                let dl = doc.len() as f64;
                score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl));
            }
            score
        })
        .collect()
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}
