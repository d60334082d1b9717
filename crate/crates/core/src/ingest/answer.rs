//! Final-answer extraction and a shallow correctness check.

const BOX_OPEN: &str = "\\boxed{";

/// Result of scanning a text for `\boxed{...}` groups.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoxScan {
    /// Content of the last balanced box.
    pub answer: Option<String>,
    /// Boxes whose braces never closed.
    pub unbalanced: usize,
}

// Returns the byte index of the matching close brace for a group whose
// content starts at `start`. `\{` and `\}` are literal braces in LaTeX and
// do not open or close groups.
fn matching_brace(text: &str, start: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 1usize;
    let mut i = start;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => {
                i += 2;
                continue;
            }
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

pub fn scan_boxed(text: &str) -> BoxScan {
    let mut scan = BoxScan::default();
    for (pos, _) in text.match_indices(BOX_OPEN) {
        let start = pos + BOX_OPEN.len();
        match matching_brace(text, start) {
            Some(end) => scan.answer = Some(text[start..end].to_owned()),
            None => scan.unbalanced += 1,
        }
    }
    scan
}

/// Content of the last balanced `\boxed{...}`, with nested braces kept.
pub fn extract_boxed_answer(text: &str) -> Option<String> {
    let scan = scan_boxed(text);
    if scan.unbalanced > 0 {
        tracing::warn!(unbalanced = scan.unbalanced, "unbalanced \\boxed{{}} in trace text");
    }
    scan.answer
}

/// Trims whitespace and surrounding `$` delimiters and collapses runs of
/// internal whitespace to one space.
pub fn normalize_answer(s: &str) -> String {
    let mut t = s.trim();
    while let Some(inner) = t.strip_prefix('$').and_then(|x| x.strip_suffix('$')) {
        t = inner.trim();
    }
    t.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_decimal(s: &str) -> Option<f64> {
    // "inf"/"nan" parse in Rust but are not answers
    if !s.bytes().any(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Normalised string match, or decimal equality within 1e-9 relative.
/// Fractions and symbolic forms are not evaluated.
pub fn check_correctness(predicted: Option<&str>, ground_truth: &str) -> bool {
    let Some(predicted) = predicted else {
        return false;
    };
    let (p, g) = (normalize_answer(predicted), normalize_answer(ground_truth));
    if g.is_empty() {
        return false;
    }
    if p == g {
        return true;
    }
    match (parse_decimal(&p), parse_decimal(&g)) {
        (Some(a), Some(b)) => {
            let scale = a.abs().max(b.abs());
            a == b || (a - b).abs() <= 1e-9 * scale
        }
        _ => false,
    }
}
